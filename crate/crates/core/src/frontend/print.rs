use std::fmt::Write;

use crate::ast::*;
use crate::op::as_simple_statement;

use super::parser::parse_statements;

const INDENT: &str = "  ";

/// Renders a module in surface syntax. Re-parsing the output yields a module
/// equal to the input.
pub fn pretty_print(m: &Module) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Module {};", m.name);
    if !m.imported_names.is_empty() {
        let _ = writeln!(out, "Names {};", m.imported_names.join(", "));
    }
    if !m.decls.is_empty() {
        out.push('\n');
        for d in &m.decls {
            match &d.init {
                Some(e) => {
                    let _ = writeln!(out, "{} {} = {e};", d.ty.keyword(), d.name);
                }
                None => {
                    let _ = writeln!(out, "{} {};", d.ty.keyword(), d.name);
                }
            }
        }
    }
    for k in &m.kernels {
        out.push('\n');
        kernel(&mut out, k);
    }
    out
}

fn kernel(out: &mut String, k: &Kernel) {
    if let Some(lb) = k.launch_bounds {
        match lb.min_blocks {
            Some(mb) => {
                let _ = writeln!(out, "@launch_bounds({}, {mb})", lb.max_threads);
            }
            None => {
                let _ = writeln!(out, "@launch_bounds({})", lb.max_threads);
            }
        }
    }
    for (key, value) in &k.annotations {
        let _ = writeln!(out, "@{key}({})", annotation_value(value));
    }
    match k.kind {
        KernelKind::Plain => {}
        KernelKind::Host => out.push_str("host "),
        KernelKind::Device => out.push_str("device "),
    }
    let params: Vec<String> = k
        .params
        .iter()
        .map(|p| match p.ty {
            TypeTag::Any => p.name.clone(),
            ty => format!("{} {}", ty.keyword(), p.name),
        })
        .collect();
    let _ = write!(out, "Kernel {}({}) ", k.name, params.join(", "));
    block(out, &k.body, 0);
    out.push('\n');
}

fn annotation_value(v: &str) -> String {
    let ident = v.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
        && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    let int = v.parse::<u64>().map(|n| n.to_string() == v).unwrap_or(false);
    if ident || int {
        v.to_string()
    } else {
        quoted(v)
    }
}

/// Prints a statement sequence at the given indentation depth, one statement
/// per line, without surrounding braces.
pub fn print_block(stmts: &[Stmt], depth: usize) -> String {
    let mut out = String::new();
    for s in stmts {
        stmt(&mut out, s, depth);
    }
    out
}

/// `{ }` when empty; otherwise braces around indented statements. The caller
/// has already written the indentation of the opening line.
fn block(out: &mut String, stmts: &[Stmt], depth: usize) {
    if stmts.is_empty() {
        out.push_str("{ }");
        return;
    }
    out.push_str("{\n");
    for s in stmts {
        stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn args(xs: &[Expr]) -> String {
    xs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
}

fn wlinit(init: &WorklistInit) -> String {
    let mut s = String::from(" Initial");
    if let Some(size) = &init.size {
        let _ = write!(s, " ({size})");
    }
    match &init.source {
        WorklistSource::Scalars(xs) => {
            let _ = write!(s, " [{}]", args(xs));
        }
        WorklistSource::FromArray { array, len } => {
            let _ = write!(s, " FromArray({array}, {len})");
        }
    }
    s
}

fn invoke_text(inv: &Invoke) -> String {
    let call = format!("Invoke {}({})", inv.kernel, args(&inv.args));
    let wrapped = match inv.reduction {
        Some(r) => format!("{}({call})", r.as_str()),
        None => call,
    };
    match &inv.result {
        Some(v) => format!("{v} = {wrapped}"),
        None => wrapped,
    }
}

/// The plain-statement rendering of a code block, when re-parsing that text
/// gives back exactly this block.
fn plain_cblock(b: &CBlock) -> Option<String> {
    let text = as_simple_statement(b)?.to_string();
    let parsed = parse_statements(&text).ok()?;
    match parsed.as_slice() {
        [s] if s.kind == StmtKind::CBlock(b.clone()) => Some(text),
        _ => None,
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    stmt_inline(out, s, depth);
    out.push('\n');
}

/// Writes a statement starting at the current position (no leading indent,
/// no trailing newline).
fn stmt_inline(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::CBlock(b) => match plain_cblock(b) {
            Some(text) => out.push_str(&text),
            None => {
                let _ = write!(out, "CBlock({})", quoted(&b.code));
                if !b.reads.is_empty() {
                    let _ = write!(out, " reads({})", b.reads.join(", "));
                }
                if !b.writes.is_empty() {
                    let _ = write!(out, " writes({})", b.writes.join(", "));
                }
                out.push(';');
            }
        },
        StmtKind::ForAll(f) => {
            if f.mapping != Mapping::Consecutive {
                let _ = write!(out, "@mapping({}) ", f.mapping.as_str());
            }
            let _ = write!(out, "ForAll({} In {}) ", f.var, f.iter);
            block(out, &f.body, depth);
        }
        StmtKind::For { var, iter, body } => {
            let _ = write!(out, "for ({var} In {iter}) ");
            block(out, body, depth);
        }
        StmtKind::While { cond, body } => {
            let _ = write!(out, "while ({cond}) ");
            block(out, body, depth);
        }
        StmtKind::If { cond, then, els } => {
            let _ = write!(out, "if ({cond}) ");
            block(out, then, depth);
            match els.as_slice() {
                [] => {}
                [inner] if matches!(inner.kind, StmtKind::If { .. }) => {
                    out.push_str(" else ");
                    stmt_inline(out, inner, depth);
                }
                _ => {
                    out.push_str(" else ");
                    block(out, els, depth);
                }
            }
        }
        StmtKind::Atomic { lock, locked, failed } => {
            let _ = write!(out, "Atomic({lock}) ");
            block(out, locked, depth);
            if let Some(f) = failed {
                out.push_str(" Else ");
                block(out, f, depth);
            }
        }
        StmtKind::Exclusive(x) => {
            let locks = match &x.locks {
                LockSource::Array(e) => e.to_string(),
                LockSource::ArrayIterator(e) => format!("In {e}"),
            };
            let _ = write!(out, "Exclusive({}, {}, {locks}) ", x.object, x.count);
            block(out, &x.locked, depth);
            if let Some(f) = &x.failed {
                out.push_str(" Else ");
                block(out, f, depth);
            }
        }
        StmtKind::SyncRunningThreads => out.push_str("SyncRunningThreads();"),
        StmtKind::Retry(e) => {
            let _ = write!(out, "Retry {e};");
        }
        StmtKind::Respawn(e) => {
            let _ = write!(out, "Respawn {e};");
        }
        StmtKind::ReduceAndReturn(e) => {
            let _ = write!(out, "ReduceAndReturn({e});");
        }
        StmtKind::Invoke(inv) => {
            let _ = write!(out, "{};", invoke_text(inv));
        }
        StmtKind::Iterate(it) => {
            out.push_str("Iterate ");
            if let Some((kind, red)) = it.cond {
                let k = match kind {
                    CondKind::While => "While",
                    CondKind::Until => "Until",
                };
                let _ = write!(out, "{k} {} ", red.as_str());
            }
            let _ = write!(out, "{}({})", it.kernel, args(&it.args));
            if let Some(init) = &it.initial {
                out.push_str(&wlinit(init));
            }
            if let Some((e, comb)) = &it.extra_cond {
                let _ = write!(out, " {} ({e})", comb.as_str());
            }
            if it.between_rounds.is_empty() {
                out.push(';');
            } else {
                out.push(' ');
                block(out, &it.between_rounds, depth);
            }
        }
        StmtKind::Pipe(p) => {
            out.push_str("Pipe");
            if p.once {
                out.push_str(" Once");
            }
            if let Some(init) = &p.wlinit {
                out.push_str(&wlinit(init));
            }
            out.push(' ');
            block(out, &p.body, depth);
        }
        StmtKind::WlPop { var, index } => {
            let _ = write!(out, "{var} = wl.pop({index});");
        }
        StmtKind::WlPush(e) => {
            let _ = write!(out, "wl.push({e});");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    #[test]
    fn empty_kernel_shape() {
        let mut m = Module::new("m");
        m.kernels.push(Kernel::new("f", KernelKind::Plain));
        let text = pretty_print(&m);
        assert!(text.contains("Kernel f() { }"), "{text}");
        assert_eq!(parse_source(&text, "m.irgl").unwrap(), m);
    }

    #[test]
    fn pipe_once_prints_once() {
        let src = "host Kernel main() { Pipe Once { Invoke a(); } }\nKernel a() { }";
        let m = parse_source(src, "p.irgl").unwrap();
        let text = pretty_print(&m);
        assert_eq!(text.matches("Pipe Once {").count(), 1);
        assert_eq!(parse_source(&text, "p.irgl").unwrap(), m);
    }

    #[test]
    fn raw_blocks_keep_their_form() {
        let src = "Kernel f() {\n  CBlock(\"x = 1; y = 2;\") writes(x, y);\n  n = wl.pop(0);\n  k = a[n] + 1;\n}";
        let m = parse_source(src, "f.irgl").unwrap();
        let text = pretty_print(&m);
        assert!(text.contains("CBlock(\"x = 1; y = 2;\") writes(x, y);"));
        assert!(text.contains("k = a[n] + 1;"));
        assert_eq!(parse_source(&text, "f.irgl").unwrap(), m);
    }

    #[test]
    fn canonical_pop_lookalike_stays_raw() {
        // A code block whose plain text would re-parse as a pop.
        let b = CBlock { code: "n = wl.pop(i);".into(), reads: vec!["i".into()], writes: vec!["n".into()] };
        assert_eq!(plain_cblock(&b), None);
    }
}
