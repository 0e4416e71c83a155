//! IrGL expressions as C expressions, through the runtime's macro layer.

use std::fmt::Write;

use crate::ast::*;
use crate::op::{SimpleStmt, BUILTIN_FIELDS};

/// C type used for a semantic type tag.
pub fn ctype(t: TypeTag) -> &'static str {
    match t {
        TypeTag::Any | TypeTag::Int => "irgl::value_t",
        TypeTag::Float => "double",
        TypeTag::Bool => "bool",
        TypeTag::Array => "irgl::Array",
        TypeTag::Graph => "irgl::CSRGraph",
    }
}

/// Names that render differently in C: device kernels are called through
/// their mangled names.
#[derive(Debug, Clone, Default)]
pub struct CEnv {
    pub device_kernels: std::collections::BTreeSet<String>,
}

impl CEnv {
    pub fn expr(&self, e: &Expr) -> String {
        let mut s = String::new();
        write_expr(self, &mut s, e, 0);
        s
    }

    fn args(&self, args: &[Expr]) -> String {
        args.iter().map(|a| self.expr(a)).collect::<Vec<_>>().join(", ")
    }

    /// One C statement for a simple operator-code statement.
    pub fn simple(&self, s: &SimpleStmt) -> String {
        match s {
            SimpleStmt::Assign { target, op, value: Some(v) } => {
                format!("{} {} {};", self.expr(target), op.symbol(), self.expr(v))
            }
            SimpleStmt::Assign { target, op, value: None } => format!("{}{};", self.expr(target), op.symbol()),
            // Declarations are hoisted; what remains is the initialization.
            SimpleStmt::Declare { name, init: Some(e), .. } => format!("{name} = {};", self.expr(e)),
            SimpleStmt::Declare { .. } => String::new(),
            SimpleStmt::Call(e) => format!("{};", self.expr(e)),
        }
    }
}

/// Renders with no device kernels in scope.
pub fn c_expr(e: &Expr) -> String {
    CEnv::default().expr(e)
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) => 7,
        Expr::Int(v) if *v < 0 => 7,
        Expr::Float(v) if v.is_sign_negative() => 7,
        _ => 8,
    }
}

fn write_expr(env: &CEnv, out: &mut String, e: &Expr, min: u8) {
    let paren = prec(e) < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Int(v) => {
            if *v == i64::MIN {
                out.push_str("(-9223372036854775807LL - 1)");
            } else if v.unsigned_abs() > i32::MAX as u64 {
                let _ = write!(out, "{v}LL");
            } else {
                let _ = write!(out, "{v}");
            }
        }
        Expr::Float(v) => {
            let _ = write!(out, "{v:?}");
        }
        Expr::Bool(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Str(s) => out.push_str(&quoted(s)),
        Expr::Var(v) if v == INF => out.push_str("IRGL_INF"),
        Expr::Var(v) => out.push_str(v),
        Expr::Unary(op, a) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Not => '!',
            });
            // Keep `- -x` from becoming a decrement.
            let wrap = *op == UnaryOp::Neg && prec(a) == 7;
            write_expr(env, out, a, if wrap { 9 } else { 7 });
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            write_expr(env, out, a, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(env, out, b, p + 1);
        }
        Expr::Index(a, i) => {
            write_expr(env, out, a, 8);
            out.push('[');
            write_expr(env, out, i, 0);
            out.push(']');
        }
        Expr::Field(a, name) => match name.as_str() {
            "id" => write_expr(env, out, a, 8),
            "dst" | "src" | "weight" => {
                let _ = write!(out, "IRGL_{}(", name.to_ascii_uppercase());
                write_expr(env, out, a, 0);
                out.push(')');
            }
            prop => {
                out.push_str(prop);
                out.push('[');
                write_expr(env, out, a, 0);
                out.push(']');
            }
        },
        Expr::Call(name, args) => {
            let callee = match (name.as_str(), args.len()) {
                ("dst", 1) => "IRGL_DST",
                ("src", 1) => "IRGL_SRC",
                ("weight", 1) => "IRGL_WEIGHT",
                ("len", 1) => "IRGL_LEN",
                ("min", 2) => "irgl::min_of",
                ("max", 2) => "irgl::max_of",
                ("abs", 1) => "irgl::abs_of",
                _ if env.device_kernels.contains(name) => {
                    let _ = write!(out, "irgl_{name}({})", env.args(args));
                    return close(out, paren);
                }
                _ => name.as_str(),
            };
            let _ = write!(out, "{callee}({})", env.args(args));
        }
        Expr::Method(r, name, args) => match (name.as_str(), args.len()) {
            ("nnodes", 0) => {
                let _ = write!(out, "IRGL_NNODES({})", env.expr(r));
            }
            ("nedges", 0) => {
                let _ = write!(out, "IRGL_NEDGES({})", env.expr(r));
            }
            ("len", 0) => {
                let _ = write!(out, "IRGL_LEN({})", env.expr(r));
            }
            _ => {
                write_expr(env, out, r, 8);
                let _ = write!(out, ".{name}({})", env.args(args));
            }
        },
    }
    close(out, paren);
}

fn close(out: &mut String, paren: bool) {
    if paren {
        out.push(')');
    }
}

/// Index range `[begin, end)` of an iterator; `elem` is set when the loop
/// variable takes array elements rather than the index itself.
pub struct IterRange {
    pub begin: String,
    pub end: String,
    pub elem: Option<String>,
}

impl CEnv {
    /// Lowers the iterator of a loop. `is_array` says whether a bare name denotes
    /// an array, whose elements are then iterated; other bare expressions are
    /// counts.
    pub fn iter_range(&self, e: &Expr, wl_size: &str, is_array: &dyn Fn(&str) -> bool) -> IterRange {
        let range = |b: String, e: String| IterRange { begin: b, end: e, elem: None };
        match e {
            Expr::Var(v) if v == WORKLIST => range("0".into(), wl_size.to_string()),
            Expr::Method(g, m, args) => match (m.as_str(), args.as_slice()) {
                ("edges", [n]) => {
                    let (g, n) = (self.expr(g), self.expr(n));
                    range(format!("IRGL_EDGE_BEGIN({g}, {n})"), format!("IRGL_EDGE_END({g}, {n})"))
                }
                ("edges", []) => range("0".into(), format!("IRGL_NEDGES({})", self.expr(g))),
                ("nodes", []) => range("0".into(), format!("IRGL_NNODES({})", self.expr(g))),
                _ => range("0".into(), self.expr(e)),
            },
            Expr::Call(f, args) => match (f.as_str(), args.as_slice()) {
                ("edges", [n]) => {
                    let n = self.expr(n);
                    range(format!("IRGL_EDGE_BEGIN(irgl_graph, {n})"), format!("IRGL_EDGE_END(irgl_graph, {n})"))
                }
                ("nodes", []) => range("0".into(), "IRGL_NNODES(irgl_graph)".into()),
                ("range", [n]) => range("0".into(), self.expr(n)),
                ("range", [a, b]) => range(self.expr(a), self.expr(b)),
                _ => range("0".into(), self.expr(e)),
            },
            Expr::Var(v) if is_array(v) => IterRange { begin: "0".into(), end: format!("IRGL_LEN({v})"), elem: Some(v.clone()) },
            _ => range("0".into(), self.expr(e)),
        }
    }
}

/// Names used as property arrays (`x.p` with `p` not a builtin field).
pub fn property_names(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Field(a, name) => {
            if !BUILTIN_FIELDS.contains(&name.as_str()) && !out.contains(name) {
                out.push(name.clone());
            }
            property_names(a, out);
        }
        Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => {}
        Expr::Unary(_, a) => property_names(a, out),
        Expr::Binary(_, a, b) | Expr::Index(a, b) => {
            property_names(a, out);
            property_names(b, out);
        }
        Expr::Call(_, args) => args.iter().for_each(|a| property_names(a, out)),
        Expr::Method(r, _, args) => {
            property_names(r, out);
            args.iter().for_each(|a| property_names(a, out));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_expr_text;

    fn c(s: &str) -> String {
        c_expr(&parse_expr_text(s).unwrap())
    }

    #[test]
    fn graph_accessors_use_macros() {
        assert_eq!(c("e.dst.level == INF"), "level[IRGL_DST(e)] == IRGL_INF");
        assert_eq!(c("e.dst.id"), "IRGL_DST(e)");
        assert_eq!(c("min(a, weight(e))"), "irgl::min_of(a, IRGL_WEIGHT(e))");
        assert_eq!(c("g.nnodes() - 1"), "IRGL_NNODES(g) - 1");
    }

    #[test]
    fn literals() {
        assert_eq!(c("-(-x)"), "-(-x)");
        assert_eq!(c("5000000000"), "5000000000LL");
        assert_eq!(c("a - -1"), "a - -1");
    }

    #[test]
    fn iterators() {
        let no = |_: &str| false;
        let r = CEnv::default().iter_range(&parse_expr_text("graph.edges(n)").unwrap(), "W", &no);
        assert_eq!((r.begin.as_str(), r.end.as_str()), ("IRGL_EDGE_BEGIN(graph, n)", "IRGL_EDGE_END(graph, n)"));
        let r = CEnv::default().iter_range(&Expr::var("wl"), "irgl_wl->in->size()", &no);
        assert_eq!(r.end, "irgl_wl->in->size()");
        let r = CEnv::default().iter_range(&Expr::var("xs"), "W", &|n| n == "xs");
        assert_eq!(r.elem.as_deref(), Some("xs"));
    }
}
