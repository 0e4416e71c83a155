//! Expression evaluation and operator code over the shared memory.

use std::collections::HashMap;
use std::fmt::Write;
use std::sync::Arc;

use super::value::{Graph, Heap, Value, INF_VALUE};
use super::{Program, Stats};
use crate::ast::*;
use crate::op::{AssignOp, SimpleStmt};

pub(crate) type Locals = HashMap<String, Value>;
pub(crate) type EResult<T> = Result<T, String>;

/// State visible to every thread and to host code.
pub(crate) struct Memory<'p> {
    pub prog: &'p Program,
    pub heap: Heap,
    pub globals: HashMap<String, Value>,
    /// Graph behind `e.dst`, `edges(n)` and friends.
    pub graph: Option<Arc<Graph>>,
    pub output: String,
    pub trace: Option<Vec<String>>,
    /// Exclusive lock slots, keyed by (array, index).
    pub slots: HashMap<(usize, i64), i64>,
    /// Number of the current (or last) launch; items carry the epoch they
    /// were pushed in.
    pub epoch: u64,
    pub stats: Stats,
}

/// A storage location.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum Place {
    Local(String),
    Global(String),
    Elem(usize, i64),
}

/// Values a loop iterates over, produced lazily by index.
#[derive(Debug, Clone)]
pub(crate) enum Items {
    Range(i64, i64),
    Elems { array: usize, len: usize },
}

impl Items {
    pub fn len(&self) -> i64 {
        match self {
            Items::Range(b, e) => (e - b).max(0),
            Items::Elems { len, .. } => *len as i64,
        }
    }

    pub fn nth(&self, heap: &Heap, i: i64) -> EResult<Value> {
        match self {
            Items::Range(b, _) => Ok(Value::Int(b + i)),
            Items::Elems { array, .. } => heap.get(*array, i),
        }
    }
}

pub(crate) fn truthy(v: &Value) -> EResult<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Int(i) => Ok(*i != 0),
        Value::Float(f) => Ok(*f != 0.0),
        other => Err(format!("type error: {} used as a condition", other.type_name())),
    }
}

pub(crate) fn as_int(v: &Value) -> EResult<i64> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Bool(b) => Ok(*b as i64),
        other => Err(format!("type error: expected int, found {}", other.type_name())),
    }
}

fn as_float(v: &Value) -> EResult<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        other => as_int(other).map(|i| i as f64),
    }
}

fn overflow(op: BinaryOp, a: i64, b: i64) -> String {
    format!("integer overflow in {a} {} {b}", op.symbol())
}

pub(crate) fn binary(op: BinaryOp, a: &Value, b: &Value) -> EResult<Value> {
    use BinaryOp::*;
    let floats = matches!(a, Value::Float(_)) || matches!(b, Value::Float(_));
    match op {
        Add | Sub | Mul | Div | Rem if floats => {
            let (x, y) = (as_float(a)?, as_float(b)?);
            Ok(Value::Float(match op {
                Add => x + y,
                Sub => x - y,
                Mul => x * y,
                Div => x / y,
                _ => x % y,
            }))
        }
        Add | Sub | Mul | Div | Rem => {
            let (x, y) = (as_int(a)?, as_int(b)?);
            if matches!(op, Div | Rem) && y == 0 {
                return Err("division by zero".into());
            }
            let r = match op {
                Add => x.checked_add(y),
                Sub => x.checked_sub(y),
                Mul => x.checked_mul(y),
                Div => x.checked_div(y),
                _ => x.checked_rem(y),
            };
            r.map(Value::Int).ok_or_else(|| overflow(op, x, y))
        }
        Lt | Le | Gt | Ge | Eq | Ne => {
            let ord = if floats {
                as_float(a)?.partial_cmp(&as_float(b)?)
            } else {
                Some(as_int(a)?.cmp(&as_int(b)?))
            };
            let Some(ord) = ord else {
                return Ok(Value::Bool(op == Ne));
            };
            Ok(Value::Bool(match op {
                Lt => ord.is_lt(),
                Le => ord.is_le(),
                Gt => ord.is_gt(),
                Ge => ord.is_ge(),
                Eq => ord.is_eq(),
                _ => ord.is_ne(),
            }))
        }
        And => Ok(Value::Bool(truthy(a)? && truthy(b)?)),
        Or => Ok(Value::Bool(truthy(a)? || truthy(b)?)),
    }
}

impl<'p> Memory<'p> {
    pub fn new(prog: &'p Program) -> Self {
        Memory {
            prog,
            heap: Heap::default(),
            globals: HashMap::new(),
            graph: None,
            output: String::new(),
            trace: None,
            slots: HashMap::new(),
            epoch: 0,
            stats: Stats::default(),
        }
    }

    pub fn trace(&mut self, line: impl FnOnce() -> String) {
        if let Some(t) = &mut self.trace {
            t.push(line());
        }
    }

    fn graph(&self) -> EResult<&Arc<Graph>> {
        self.graph.as_ref().ok_or_else(|| "no graph is bound".to_string())
    }

    pub fn lookup(&self, locals: &Locals, name: &str) -> EResult<Value> {
        if let Some(v) = locals.get(name).or_else(|| self.globals.get(name)) {
            return Ok(v.clone());
        }
        if name == INF {
            return Ok(Value::Int(INF_VALUE));
        }
        Err(format!("unbound name `{name}`"))
    }

    fn array_of(&self, v: &Value) -> EResult<usize> {
        match v {
            Value::Array(id) => Ok(*id),
            other => Err(format!("type error: expected array, found {}", other.type_name())),
        }
    }

    fn graph_field(&self, field: &str, edge: i64) -> EResult<Value> {
        let g = self.graph()?;
        let col = match field {
            "dst" => &g.dst,
            "src" => &g.src,
            _ => &g.weight,
        };
        usize::try_from(edge)
            .ok()
            .and_then(|i| col.get(i))
            .map(|v| Value::Int(*v))
            .ok_or_else(|| format!("edge {edge} out of range for graph with {} edges", g.nedges()))
    }

    pub fn eval(&mut self, locals: &Locals, e: &Expr) -> EResult<Value> {
        match e {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Float(v) => Ok(Value::Float(*v)),
            Expr::Bool(v) => Ok(Value::Bool(*v)),
            Expr::Str(s) => Ok(Value::Str(Arc::from(s.as_str()))),
            Expr::Var(v) => self.lookup(locals, v),
            Expr::Unary(UnaryOp::Neg, a) => match self.eval(locals, a)? {
                Value::Float(f) => Ok(Value::Float(-f)),
                v => {
                    let i = as_int(&v)?;
                    i.checked_neg().map(Value::Int).ok_or_else(|| format!("integer overflow in -({i})"))
                }
            },
            Expr::Unary(UnaryOp::Not, a) => Ok(Value::Bool(!truthy(&self.eval(locals, a)?)?)),
            Expr::Binary(op @ (BinaryOp::And | BinaryOp::Or), a, b) => {
                let x = truthy(&self.eval(locals, a)?)?;
                if x == (*op == BinaryOp::Or) {
                    return Ok(Value::Bool(x));
                }
                Ok(Value::Bool(truthy(&self.eval(locals, b)?)?))
            }
            Expr::Binary(op, a, b) => {
                let x = self.eval(locals, a)?;
                let y = self.eval(locals, b)?;
                binary(*op, &x, &y)
            }
            Expr::Index(..) | Expr::Field(..) => {
                if let Expr::Field(base, f) = e {
                    match f.as_str() {
                        "id" => return self.eval(locals, base),
                        "dst" | "src" | "weight" => {
                            let edge = as_int(&self.eval(locals, base)?)?;
                            return self.graph_field(f, edge);
                        }
                        _ => {}
                    }
                }
                match self.place(locals, e)? {
                    Place::Elem(id, i) => self.heap.get(id, i),
                    _ => unreachable!("element places only"),
                }
            }
            Expr::Call(name, args) => self.call(locals, name, args),
            Expr::Method(recv, name, args) => {
                let r = self.eval(locals, recv)?;
                match (name.as_str(), args.len(), &r) {
                    ("nnodes", 0, Value::Graph(g)) => Ok(Value::Int(g.nnodes() as i64)),
                    ("nedges", 0, Value::Graph(g)) => Ok(Value::Int(g.nedges() as i64)),
                    ("len", 0, Value::Array(id)) => Ok(Value::Int(self.heap.len(*id) as i64)),
                    ("edges" | "nodes", _, _) => Err(format!("`.{name}()` is only valid as a loop iterator")),
                    _ => Err(format!("unknown method `.{name}` on {}", r.type_name())),
                }
            }
        }
    }

    fn call(&mut self, locals: &Locals, name: &str, args: &[Expr]) -> EResult<Value> {
        if self.prog.device.contains_key(name) {
            let vals = args.iter().map(|a| self.eval(locals, a)).collect::<EResult<Vec<_>>>()?;
            super::host::call_device(self, name, vals)?;
            return Ok(Value::Int(0));
        }
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(locals, a)?);
        }
        match (name, vals.as_slice()) {
            ("min" | "max", [a, b]) => {
                let less = truthy(&binary(BinaryOp::Lt, a, b)?)?;
                Ok(if less == (name == "min") { a.clone() } else { b.clone() })
            }
            ("abs", [Value::Float(f)]) => Ok(Value::Float(f.abs())),
            ("abs", [a]) => {
                let i = as_int(a)?;
                i.checked_abs().map(Value::Int).ok_or_else(|| format!("integer overflow in abs({i})"))
            }
            ("dst" | "src" | "weight", [e]) => self.graph_field(name, as_int(e)?),
            ("len", [a]) => Ok(Value::Int(self.heap.len(self.array_of(a)?) as i64)),
            ("zeros", [n]) => self.fill(n, Value::Int(0)),
            ("fill", [n, v]) => self.fill(n, v.clone()),
            ("nnodes", []) => Ok(Value::Int(self.graph()?.nnodes() as i64)),
            ("nedges", []) => Ok(Value::Int(self.graph()?.nedges() as i64)),
            ("printf", [Value::Str(f), rest @ ..]) => {
                let text = printf(f, rest)?;
                self.output.push_str(&text);
                Ok(Value::Int(text.len() as i64))
            }
            ("range" | "edges" | "nodes", _) => Err(format!("`{name}(...)` is only valid as a loop iterator")),
            _ => Err(format!("unknown builtin `{name}` with {} argument(s)", args.len())),
        }
    }

    fn fill(&mut self, n: &Value, v: Value) -> EResult<Value> {
        let n = as_int(n)?;
        let n = usize::try_from(n).map_err(|_| format!("negative array size {n}"))?;
        Ok(Value::Array(self.heap.alloc(vec![v; n])))
    }

    /// Resolves an lvalue. Names bound nowhere become new locals.
    pub fn place(&mut self, locals: &Locals, e: &Expr) -> EResult<Place> {
        match e {
            Expr::Var(v) if locals.contains_key(v) => Ok(Place::Local(v.clone())),
            Expr::Var(v) if self.globals.contains_key(v) => Ok(Place::Global(v.clone())),
            Expr::Var(v) if v != INF => Ok(Place::Local(v.clone())),
            Expr::Index(base, idx) => {
                let arr = self.eval(locals, base)?;
                let id = self.array_of(&arr)?;
                let i = as_int(&self.eval(locals, idx)?)?;
                Ok(Place::Elem(id, i))
            }
            Expr::Field(base, prop) => {
                let arr = self.globals.get(prop).cloned().ok_or_else(|| format!("unbound property array `{prop}`"))?;
                let id = self.array_of(&arr)?;
                let i = as_int(&self.eval(locals, base)?)?;
                Ok(Place::Elem(id, i))
            }
            other => Err(format!("`{other}` is not assignable")),
        }
    }

    pub fn load(&self, locals: &Locals, p: &Place) -> EResult<Value> {
        match p {
            Place::Local(n) | Place::Global(n) => self.lookup(locals, n),
            Place::Elem(id, i) => self.heap.get(*id, *i),
        }
    }

    pub fn store(&mut self, locals: &mut Locals, p: Place, v: Value) -> EResult<()> {
        match p {
            Place::Local(n) => {
                locals.insert(n, v);
                Ok(())
            }
            Place::Global(n) => {
                self.globals.insert(n, v);
                Ok(())
            }
            Place::Elem(id, i) => self.heap.set(id, i, v),
        }
    }

    /// Runs one operator-code statement.
    pub fn exec_simple(&mut self, locals: &mut Locals, s: &SimpleStmt) -> EResult<()> {
        match s {
            SimpleStmt::Call(e) => self.eval(locals, e).map(drop),
            SimpleStmt::Declare { ty, name, init } => {
                let v = match init {
                    Some(e) => coerce(*ty, self.eval(locals, e)?)?,
                    None => zero_of(*ty),
                };
                locals.insert(name.clone(), v);
                Ok(())
            }
            SimpleStmt::Assign { target, op, value } => {
                let v = match value {
                    Some(e) => self.eval(locals, e)?,
                    None => Value::Int(1),
                };
                let p = self.place(locals, target)?;
                let new = match op {
                    AssignOp::Set => v,
                    AssignOp::Add | AssignOp::Incr => binary(BinaryOp::Add, &self.load(locals, &p)?, &v)?,
                    AssignOp::Sub | AssignOp::Decr => binary(BinaryOp::Sub, &self.load(locals, &p)?, &v)?,
                    AssignOp::Mul => binary(BinaryOp::Mul, &self.load(locals, &p)?, &v)?,
                    AssignOp::Div => binary(BinaryOp::Div, &self.load(locals, &p)?, &v)?,
                };
                self.store(locals, p, new)
            }
        }
    }

    /// Evaluates a loop iterator. `wl_size` is the size of the input
    /// worklist when one is in scope.
    pub fn items(&mut self, locals: &Locals, e: &Expr, wl_size: Option<usize>) -> EResult<Items> {
        match e {
            Expr::Var(v) if v == WORKLIST => {
                let n = wl_size.ok_or("`wl` used outside a pipe context")?;
                Ok(Items::Range(0, n as i64))
            }
            Expr::Method(g, m, args) if matches!(m.as_str(), "edges" | "nodes") => {
                let g = match self.eval(locals, g)? {
                    Value::Graph(g) => g,
                    other => return Err(format!("type error: `.{m}()` on {}", other.type_name())),
                };
                self.graph_items(&g, m, args, locals)
            }
            Expr::Call(f, args) if matches!(f.as_str(), "edges" | "nodes") => {
                let g = self.graph()?.clone();
                self.graph_items(&g, f, args, locals)
            }
            Expr::Call(f, args) if f == "range" => match args.as_slice() {
                [n] => Ok(Items::Range(0, as_int(&self.eval(locals, n)?)?)),
                [a, b] => Ok(Items::Range(as_int(&self.eval(locals, a)?)?, as_int(&self.eval(locals, b)?)?)),
                _ => Err("range takes one or two arguments".into()),
            },
            _ => match self.eval(locals, e)? {
                Value::Array(id) => Ok(Items::Elems { array: id, len: self.heap.len(id) }),
                v => Ok(Items::Range(0, as_int(&v)?)),
            },
        }
    }

    fn graph_items(&mut self, g: &Graph, what: &str, args: &[Expr], locals: &Locals) -> EResult<Items> {
        match (what, args) {
            ("nodes", []) => Ok(Items::Range(0, g.nnodes() as i64)),
            ("edges", []) => Ok(Items::Range(0, g.nedges() as i64)),
            ("edges", [n]) => {
                let n = as_int(&self.eval(locals, n)?)?;
                if n < 0 || n as usize >= g.nnodes() {
                    return Err(format!("node {n} out of range for graph with {} nodes", g.nnodes()));
                }
                let r = g.edges(n as usize);
                Ok(Items::Range(r.start, r.end))
            }
            _ => Err(format!("bad arguments to `{what}`")),
        }
    }
}

pub(crate) fn zero_of(ty: TypeTag) -> Value {
    match ty {
        TypeTag::Float => Value::Float(0.0),
        TypeTag::Bool => Value::Bool(false),
        _ => Value::Int(0),
    }
}

pub(crate) fn coerce(ty: TypeTag, v: Value) -> EResult<Value> {
    match (ty, v) {
        (TypeTag::Float, Value::Int(i)) => Ok(Value::Float(i as f64)),
        (TypeTag::Int, Value::Bool(b)) => Ok(Value::Int(b as i64)),
        (TypeTag::Bool, Value::Int(i)) => Ok(Value::Bool(i != 0)),
        (TypeTag::Any, v)
        | (TypeTag::Int, v @ Value::Int(_))
        | (TypeTag::Float, v @ Value::Float(_))
        | (TypeTag::Bool, v @ Value::Bool(_))
        | (TypeTag::Array, v @ Value::Array(_))
        | (TypeTag::Graph, v @ Value::Graph(_)) => Ok(v),
        (ty, v) => Err(format!("type error: {} where {} is expected", v.type_name(), ty.keyword())),
    }
}

/// C-style formatting for `%d`, `%i`, `%u`, `%x`, `%f`, `%g`, `%e`, `%s`,
/// `%c` and `%%`, with flags, width, precision and length modifiers.
pub(crate) fn printf(fmt: &str, args: &[Value]) -> EResult<String> {
    let mut out = String::new();
    let mut args = args.iter();
    let mut chars = fmt.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        let mut spec = String::new();
        let conv = loop {
            match chars.next() {
                Some(ch) if ch.is_ascii_alphabetic() && !matches!(ch, 'l' | 'h' | 'z') => break ch,
                Some('%') if spec.is_empty() => break '%',
                Some(ch) => spec.push(ch),
                None => return Err(format!("printf: incomplete conversion in {fmt:?}")),
            }
        };
        if conv == '%' {
            out.push('%');
            continue;
        }
        let spec: String = spec.chars().filter(|c| !matches!(c, 'l' | 'h' | 'z')).collect();
        let nflags = spec.chars().take_while(|c| "-+ #0".contains(*c)).count();
        let (flags, digits) = spec.split_at(nflags);
        let (left, zero) = (flags.contains('-'), flags.contains('0'));
        let (w, p) = match digits.split_once('.') {
            Some((w, p)) => (w, Some(p.parse::<usize>().unwrap_or(0))),
            None => (digits, None),
        };
        let width = w.parse::<usize>().unwrap_or(0);
        let arg = args.next().ok_or_else(|| format!("printf: missing argument for %{conv}"))?;
        let body = match conv {
            'd' | 'i' | 'u' => {
                let v = as_int(arg)?;
                if flags.contains('+') && v >= 0 {
                    format!("+{v}")
                } else {
                    v.to_string()
                }
            }
            'x' => format!("{:x}", as_int(arg)?),
            'X' => format!("{:X}", as_int(arg)?),
            'c' => char::from_u32(as_int(arg)? as u32).unwrap_or('?').to_string(),
            'f' | 'F' => format!("{:.*}", p.unwrap_or(6), as_float(arg)?),
            'e' => format!("{:.*e}", p.unwrap_or(6), as_float(arg)?),
            'g' => format!("{}", as_float(arg)?),
            's' => match arg {
                Value::Str(s) => s.to_string(),
                other => return Err(format!("printf: %s given {}", other.type_name())),
            },
            other => return Err(format!("printf: unsupported conversion %{other}")),
        };
        if body.len() >= width {
            out.push_str(&body);
        } else if left {
            let _ = write!(out, "{body:<width$}");
        } else if zero && conv != 's' {
            let (sign, digits) = body.split_at(body.starts_with(['-', '+']) as usize);
            let _ = write!(out, "{sign}{digits:0>w$}", w = width - sign.len());
        } else {
            let _ = write!(out, "{body:>width$}");
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printf_conversions() {
        let s = printf("%d %lld %5.2f|%-3d|%03d %s %%\n", &[
            Value::Int(1),
            Value::Int(-2),
            Value::Float(1.23456),
            Value::Int(7),
            Value::Int(-4),
            Value::Str(Arc::from("x")),
        ])
        .unwrap();
        assert_eq!(s, "1 -2  1.23|7  |-04 x %\n");
        assert!(printf("%d", &[]).is_err());
    }

    #[test]
    fn arithmetic_is_checked() {
        assert!(binary(BinaryOp::Add, &Value::Int(INF_VALUE), &Value::Int(1)).is_err());
        assert!(binary(BinaryOp::Div, &Value::Int(1), &Value::Int(0)).is_err());
        assert_eq!(binary(BinaryOp::Div, &Value::Int(-7), &Value::Int(2)).unwrap(), Value::Int(-3));
        assert_eq!(binary(BinaryOp::Add, &Value::Int(1), &Value::Float(0.5)).unwrap(), Value::Float(1.5));
        assert_eq!(binary(BinaryOp::Lt, &Value::Int(1), &Value::Float(1.5)).unwrap(), Value::Bool(true));
    }
}
