//! Runtime values, the array heap and CSR graphs.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Largest integer; the interpreter's `INF`.
pub const INF_VALUE: i64 = i64::MAX;

/// Compressed sparse row graph. Edge ids index `src`, `dst` and `weight`;
/// the out-edges of node `n` are `row_start[n]..row_start[n + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub row_start: Vec<i64>,
    pub src: Vec<i64>,
    pub dst: Vec<i64>,
    pub weight: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("graph line {line}: {message}")]
pub struct GraphError {
    pub line: usize,
    pub message: String,
}

impl Graph {
    /// Builds the CSR form of `edges` (`(u, v, w)` triples). Out-edges keep
    /// their input order.
    pub fn from_edges(nnodes: usize, edges: &[(i64, i64, i64)]) -> Result<Graph, String> {
        let mut counts = vec![0i64; nnodes + 1];
        for &(u, v, _) in edges {
            for x in [u, v] {
                if x < 0 || x as usize >= nnodes {
                    return Err(format!("node {x} out of range for {nnodes} nodes"));
                }
            }
            counts[u as usize + 1] += 1;
        }
        for i in 0..nnodes {
            counts[i + 1] += counts[i];
        }
        let row_start = counts.clone();
        let mut next = counts;
        let m = edges.len();
        let (mut src, mut dst, mut weight) = (vec![0; m], vec![0; m], vec![0; m]);
        for &(u, v, w) in edges {
            let slot = next[u as usize] as usize;
            next[u as usize] += 1;
            src[slot] = u;
            dst[slot] = v;
            weight[slot] = w;
        }
        Ok(Graph { row_start, src, dst, weight })
    }

    pub fn nnodes(&self) -> usize {
        self.row_start.len().saturating_sub(1)
    }

    pub fn nedges(&self) -> usize {
        self.dst.len()
    }

    /// Edge ids leaving `n`.
    pub fn edges(&self, n: usize) -> std::ops::Range<i64> {
        self.row_start[n]..self.row_start[n + 1]
    }
}

/// Parses the text edge-list format: a first line `N M`, then `M` lines
/// `u v [w]` with 0-based node ids and weight 1 when omitted. Blank lines
/// and lines starting with `#` are ignored.
pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line: usize, message: String| GraphError { line, message };
    let (hline, header) = lines.next().ok_or_else(|| err(1, "missing `N M` header".into()))?;
    let nums = |line: usize, l: &str| -> Result<Vec<i64>, GraphError> {
        l.split_whitespace()
            .map(|w| w.parse::<i64>().map_err(|_| err(line, format!("`{w}` is not an integer"))))
            .collect()
    };
    let h = nums(hline, header)?;
    let [n, m] = h[..] else {
        return Err(err(hline, "header must be `N M`".into()));
    };
    if n < 0 || m < 0 {
        return Err(err(hline, "negative node or edge count".into()));
    }
    let mut edges = Vec::with_capacity(m as usize);
    for (line, l) in lines {
        let v = nums(line, l)?;
        let e = match v[..] {
            [u, v] => (u, v, 1),
            [u, v, w] => (u, v, w),
            _ => return Err(err(line, "expected `u v [w]`".into())),
        };
        edges.push((line, e));
    }
    if edges.len() != m as usize {
        return Err(err(hline, format!("header announces {m} edges, found {}", edges.len())));
    }
    let triples: Vec<_> = edges.iter().map(|(_, e)| *e).collect();
    Graph::from_edges(n as usize, &triples).map_err(|m| {
        let line = edges
            .iter()
            .find(|(_, (u, v, _))| *u < 0 || *v < 0 || *u >= n || *v >= n)
            .map_or(hline, |(l, _)| *l);
        err(line, m)
    })
}

/// A value as seen from outside the interpreter: bindings going in and
/// results coming out.
#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    Int(i64),
    Float(f64),
    Bool(bool),
    Array(Vec<Data>),
    Graph(Arc<Graph>),
}

impl Data {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Data::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Integer elements of an array of integers.
    pub fn as_ints(&self) -> Option<Vec<i64>> {
        match self {
            Data::Array(xs) => xs.iter().map(Data::as_int).collect(),
            _ => None,
        }
    }
}

impl fmt::Display for Data {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Data::Int(INF_VALUE) => write!(f, "INF"),
            Data::Int(v) => write!(f, "{v}"),
            Data::Float(v) => write!(f, "{v:?}"),
            Data::Bool(v) => write!(f, "{v}"),
            Data::Array(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            Data::Graph(g) => write!(f, "<graph {} nodes, {} edges>", g.nnodes(), g.nedges()),
        }
    }
}

/// Parses a binding value: an integer, `INF`, a float, `true`/`false`, or a
/// bracketed comma-separated list of values.
pub fn parse_data(text: &str) -> Result<Data, String> {
    let mut p = DataParser { s: text.as_bytes(), i: 0 };
    let v = p.value()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(format!("unexpected `{}` after value", &text[p.i..]));
    }
    Ok(v)
}

struct DataParser<'a> {
    s: &'a [u8],
    i: usize,
}

impl DataParser<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn value(&mut self) -> Result<Data, String> {
        self.ws();
        if self.s.get(self.i) == Some(&b'[') {
            self.i += 1;
            let mut xs = Vec::new();
            self.ws();
            if self.s.get(self.i) == Some(&b']') {
                self.i += 1;
                return Ok(Data::Array(xs));
            }
            loop {
                xs.push(self.value()?);
                self.ws();
                match self.s.get(self.i) {
                    Some(b',') => self.i += 1,
                    Some(b']') => {
                        self.i += 1;
                        return Ok(Data::Array(xs));
                    }
                    _ => return Err("expected `,` or `]` in list".into()),
                }
            }
        }
        let start = self.i;
        while self.i < self.s.len() && !matches!(self.s[self.i], b',' | b']' | b'[') && !self.s[self.i].is_ascii_whitespace()
        {
            self.i += 1;
        }
        let word = std::str::from_utf8(&self.s[start..self.i]).map_err(|e| e.to_string())?;
        match word {
            "" => Err("expected a value".into()),
            "true" => Ok(Data::Bool(true)),
            "false" => Ok(Data::Bool(false)),
            "INF" => Ok(Data::Int(INF_VALUE)),
            w => {
                if let Ok(v) = w.parse::<i64>() {
                    Ok(Data::Int(v))
                } else if let Ok(v) = w.parse::<f64>() {
                    Ok(Data::Float(v))
                } else {
                    Err(format!("`{w}` is not a value"))
                }
            }
        }
    }
}

/// Interpreter-internal value. Arrays live in the [`Heap`] and are shared by
/// reference, the way device arrays are.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(Arc<str>),
    Array(usize),
    Graph(Arc<Graph>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Array(_) => "array",
            Value::Graph(_) => "graph",
        }
    }
}

#[derive(Debug, Default)]
pub(crate) struct Heap {
    arrays: Vec<Vec<Value>>,
}

impl Heap {
    pub fn alloc(&mut self, items: Vec<Value>) -> usize {
        self.arrays.push(items);
        self.arrays.len() - 1
    }

    pub fn len(&self, id: usize) -> usize {
        self.arrays[id].len()
    }

    pub fn get(&self, id: usize, i: i64) -> Result<Value, String> {
        let a = &self.arrays[id];
        usize::try_from(i)
            .ok()
            .and_then(|i| a.get(i))
            .cloned()
            .ok_or_else(|| format!("index {i} out of bounds for array of length {}", a.len()))
    }

    pub fn set(&mut self, id: usize, i: i64, v: Value) -> Result<(), String> {
        let a = &mut self.arrays[id];
        let len = a.len();
        match usize::try_from(i).ok().and_then(|i| a.get_mut(i)) {
            Some(slot) => {
                *slot = v;
                Ok(())
            }
            None => Err(format!("index {i} out of bounds for array of length {len}")),
        }
    }

    pub fn load_data(&mut self, d: &Data) -> Value {
        match d {
            Data::Int(v) => Value::Int(*v),
            Data::Float(v) => Value::Float(*v),
            Data::Bool(v) => Value::Bool(*v),
            Data::Array(xs) => {
                let items = xs.iter().map(|x| self.load_data(x)).collect();
                Value::Array(self.alloc(items))
            }
            Data::Graph(g) => Value::Graph(g.clone()),
        }
    }

    pub fn to_data(&self, v: &Value) -> Data {
        match v {
            Value::Int(x) => Data::Int(*x),
            Value::Float(x) => Data::Float(*x),
            Value::Bool(x) => Data::Bool(*x),
            Value::Str(s) => Data::Array(s.bytes().map(|b| Data::Int(b as i64)).collect()),
            Value::Array(id) => Data::Array(self.arrays[*id].iter().map(|x| self.to_data(x)).collect()),
            Value::Graph(g) => Data::Graph(g.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_keeps_input_order_per_source() {
        let g = parse_edge_list("3 3\n1 2 5\n0 1\n1 0 7\n").unwrap();
        assert_eq!(g.row_start, vec![0, 1, 3, 3]);
        assert_eq!(g.dst, vec![1, 2, 0]);
        assert_eq!(g.weight, vec![1, 5, 7]);
        assert_eq!(g.edges(1), 1..3);
    }

    #[test]
    fn edge_list_errors_name_the_line() {
        let e = parse_edge_list("2 1\n0 5\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_edge_list("2 2\n0 1\n").unwrap_err();
        assert!(e.message.contains("announces 2"));
    }

    #[test]
    fn data_round_trips_through_text() {
        let d = parse_data("[1, INF, [true, 2.5], []]").unwrap();
        assert_eq!(d.to_string(), "[1, INF, [true, 2.5], []]");
        assert!(parse_data("[1,").is_err());
    }
}
