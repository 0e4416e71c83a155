//! Operator code: the small statement language that fills `CBlock`s.
//!
//! Operator code is a sequence of simple statements: assignments (plain and
//! compound), increments, typed local declarations and call statements. The
//! surface parser turns each simple statement into its own `CBlock` whose
//! `code` is the canonical rendering produced here, together with the read and
//! write sets computed by [`read_write_sets`].

use std::collections::BTreeSet;
use std::fmt;

use crate::ast::{CBlock, Expr, TypeTag, INF};
use crate::syntax::{Cursor, PResult, SyntaxError};

/// Fields with a fixed meaning on graph nodes and edges. Any other field
/// `x.p` denotes the property array `p` indexed by `x`.
pub const BUILTIN_FIELDS: &[&str] = &["id", "dst", "src", "weight"];

/// Tokens that would break the single-entry, single-exit shape of a code block.
pub const CONTROL_TRANSFER: &[&str] = &["return", "goto", "break", "continue"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Incr,
    Decr,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Incr => "++",
            AssignOp::Decr => "--",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimpleStmt {
    /// `value` is `None` exactly for `++` and `--`.
    Assign { target: Expr, op: AssignOp, value: Option<Expr> },
    Declare { ty: TypeTag, name: String, init: Option<Expr> },
    Call(Expr),
}

impl fmt::Display for SimpleStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimpleStmt::Assign { target, op, value: Some(v) } => {
                write!(f, "{target} {} {v};", op.symbol())
            }
            SimpleStmt::Assign { target, op, value: None } => write!(f, "{target}{};", op.symbol()),
            SimpleStmt::Declare { ty, name, init: Some(e) } => {
                write!(f, "{} {name} = {e};", ty.keyword())
            }
            SimpleStmt::Declare { ty, name, init: None } => write!(f, "{} {name};", ty.keyword()),
            SimpleStmt::Call(e) => write!(f, "{e};"),
        }
    }
}

/// Whether `e` may appear on the left of an assignment.
pub fn is_lvalue(e: &Expr) -> bool {
    match e {
        Expr::Var(v) => v != INF,
        Expr::Index(base, _) => is_lvalue(base),
        Expr::Field(_, name) => !BUILTIN_FIELDS.contains(&name.as_str()),
        _ => false,
    }
}

/// Name of the storage an lvalue writes: the variable itself, the array
/// being indexed, or the property array behind a field.
pub fn lvalue_root(e: &Expr) -> Option<&str> {
    match e {
        Expr::Var(v) => Some(v),
        Expr::Index(base, _) => lvalue_root(base),
        Expr::Field(_, name) if !BUILTIN_FIELDS.contains(&name.as_str()) => Some(name),
        _ => None,
    }
}

/// Type keywords that may open a local declaration.
fn decl_type(c: &Cursor) -> Option<TypeTag> {
    match c.peek() {
        crate::lexer::Tok::Ident(s) => TypeTag::from_keyword(s).filter(|_| {
            matches!(c.peek_at(1), crate::lexer::Tok::Ident(_))
        }),
        _ => None,
    }
}

/// Parses one simple statement. The trailing `;` is optional.
pub fn parse_simple(c: &mut Cursor) -> PResult<SimpleStmt> {
    if let Some(ty) = decl_type(c) {
        c.next();
        let (name, _) = c.expect_ident()?;
        let init = if c.eat_punct("=") { Some(c.parse_expr()?) } else { None };
        c.eat_punct(";");
        return Ok(SimpleStmt::Declare { ty, name, init });
    }
    let start = c.span();
    let target = c.parse_expr()?;
    let op = [
        AssignOp::Set,
        AssignOp::Add,
        AssignOp::Sub,
        AssignOp::Mul,
        AssignOp::Div,
        AssignOp::Incr,
        AssignOp::Decr,
    ]
    .into_iter()
    .find(|op| c.is_punct(op.symbol()));
    let stmt = match op {
        Some(op) => {
            if !is_lvalue(&target) {
                return Err(SyntaxError { message: format!("cannot assign to `{target}`"), span: start });
            }
            c.next();
            let value = match op {
                AssignOp::Incr | AssignOp::Decr => None,
                _ => Some(c.parse_expr()?),
            };
            SimpleStmt::Assign { target, op, value }
        }
        None => match target {
            Expr::Call(..) | Expr::Method(..) => SimpleStmt::Call(target),
            other => {
                return Err(SyntaxError {
                    message: format!("expression `{other}` is not a statement"),
                    span: start,
                })
            }
        },
    };
    c.eat_punct(";");
    Ok(stmt)
}

/// Parses a whole operator-code text.
pub fn parse_operator_code(text: &str) -> PResult<Vec<SimpleStmt>> {
    let mut c = Cursor::new(text)?;
    let mut out = Vec::new();
    while !c.at_eof() {
        if let crate::lexer::Tok::Ident(w) = c.peek() {
            if CONTROL_TRANSFER.contains(&w.as_str()) {
                return c.error(format!("`{w}` is not allowed in operator code"));
            }
        }
        out.push(parse_simple(&mut c)?);
    }
    Ok(out)
}

fn collect_reads(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(v) => {
            if v != INF {
                out.insert(v.clone());
            }
        }
        Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Str(_) => {}
        Expr::Unary(_, a) => collect_reads(a, out),
        Expr::Binary(_, a, b) | Expr::Index(a, b) => {
            collect_reads(a, out);
            collect_reads(b, out);
        }
        Expr::Field(a, name) => {
            if !BUILTIN_FIELDS.contains(&name.as_str()) {
                out.insert(name.clone());
            }
            collect_reads(a, out);
        }
        Expr::Call(_, args) => args.iter().for_each(|a| collect_reads(a, out)),
        Expr::Method(r, _, args) => {
            collect_reads(r, out);
            args.iter().for_each(|a| collect_reads(a, out));
        }
    }
}

/// Reads made while computing the address of an lvalue (not the stored value).
fn collect_address_reads(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Index(base, idx) => {
            collect_address_reads(base, out);
            collect_reads(idx, out);
        }
        Expr::Field(base, _) => collect_reads(base, out),
        _ => {}
    }
}

/// Sorted, deduplicated read and write sets of a statement sequence.
pub fn read_write_sets(stmts: &[SimpleStmt]) -> (Vec<String>, Vec<String>) {
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    for s in stmts {
        match s {
            SimpleStmt::Assign { target, op, value } => {
                collect_address_reads(target, &mut reads);
                if let Some(v) = value {
                    collect_reads(v, &mut reads);
                }
                if let Some(root) = lvalue_root(target) {
                    if *op != AssignOp::Set {
                        reads.insert(root.to_string());
                    }
                    writes.insert(root.to_string());
                }
            }
            SimpleStmt::Declare { name, init, .. } => {
                if let Some(e) = init {
                    collect_reads(e, &mut reads);
                }
                writes.insert(name.clone());
            }
            SimpleStmt::Call(e) => collect_reads(e, &mut reads),
        }
    }
    (reads.into_iter().collect(), writes.into_iter().collect())
}

/// Builds the canonical `CBlock` for a single simple statement.
pub fn cblock_of(stmt: &SimpleStmt) -> CBlock {
    let (reads, writes) = read_write_sets(std::slice::from_ref(stmt));
    CBlock { code: stmt.to_string(), reads, writes }
}

/// If `block` is exactly the canonical block of one simple statement, returns
/// that statement. Such blocks print as plain statements in surface syntax.
pub fn as_simple_statement(block: &CBlock) -> Option<SimpleStmt> {
    let mut stmts = parse_operator_code(&block.code).ok()?;
    if stmts.len() != 1 {
        return None;
    }
    let stmt = stmts.pop()?;
    (cblock_of(&stmt) == *block).then_some(stmt)
}

/// First control-transfer keyword appearing as a word in raw code.
pub fn find_control_transfer(code: &str) -> Option<&'static str> {
    let words = code.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'));
    for w in words {
        if let Some(k) = CONTROL_TRANSFER.iter().find(|k| **k == w) {
            return Some(k);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_statements_parse() {
        let s = parse_operator_code("n_component = components[n]\nminwt = INF;").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].to_string(), "n_component = components[n];");
        let (r, w) = read_write_sets(&s);
        assert_eq!(r, vec!["components", "n"]);
        assert_eq!(w, vec!["minwt", "n_component"]);
    }

    #[test]
    fn property_writes_and_compound_ops() {
        let s = parse_operator_code("e.dst.level = LEVEL; LEVEL++; int k = 3;").unwrap();
        assert_eq!(s[1].to_string(), "LEVEL++;");
        assert_eq!(s[2].to_string(), "int k = 3;");
        let (r, w) = read_write_sets(&s);
        assert_eq!(r, vec!["LEVEL", "e"]);
        assert_eq!(w, vec!["LEVEL", "k", "level"]);
    }

    #[test]
    fn rejects_non_statements() {
        assert!(parse_operator_code("a + b;").is_err());
        assert!(parse_operator_code("e.dst = 3;").is_err());
        assert!(parse_operator_code("return;").is_err());
        assert!(parse_operator_code("INF = 1;").is_err());
    }

    #[test]
    fn canonical_block_detection() {
        let stmt = parse_operator_code("x = a[i] + 1").unwrap().remove(0);
        let b = cblock_of(&stmt);
        assert_eq!(as_simple_statement(&b), Some(stmt));
        let raw = CBlock { code: "x = 1; y = 2;".into(), reads: vec![], writes: vec!["x".into(), "y".into()] };
        assert_eq!(as_simple_statement(&raw), None);
    }

    #[test]
    fn control_transfer_words() {
        assert_eq!(find_control_transfer("if (x) return;"), Some("return"));
        assert_eq!(find_control_transfer("returned = 1;"), None);
    }
}
