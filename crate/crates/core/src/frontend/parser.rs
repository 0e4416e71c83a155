use std::collections::HashSet;
use std::path::Path;

use crate::ast::*;
use crate::diag::{has_errors, rules, Diagnostic};
use crate::lexer::Tok;
use crate::op::{cblock_of, parse_simple, AssignOp, SimpleStmt};
use crate::syntax::{Cursor, PResult, SyntaxError};

/// Parses a `.irgl` source file. The module is named by a `Module` header or,
/// failing that, by the file stem.
pub fn parse_source(text: &str, filename: &str) -> Result<Module, Vec<Diagnostic>> {
    let mut p = match Parser::new(text, filename) {
        Ok(p) => p,
        Err(e) => return Err(vec![syntax_diag(e, filename)]),
    };
    match p.module(&default_module_name(filename)) {
        Ok(mut m) if !has_errors(&p.diags) => {
            m.origin = Some(filename.to_string());
            Ok(m)
        }
        Ok(_) => Err(p.diags),
        Err(e) => {
            p.diags.push(syntax_diag(e, filename));
            Err(p.diags)
        }
    }
}

/// Parses a bare statement sequence (no braces). Used by tests and by the
/// printer to decide whether a code block can be shown as a plain statement.
pub fn parse_statements(text: &str) -> Result<Block, Vec<Diagnostic>> {
    let mut p = Parser::new(text, "").map_err(|e| vec![syntax_diag(e, "")])?;
    let mut out = Vec::new();
    loop {
        if p.c.at_eof() {
            break;
        }
        if p.c.eat_punct(";") {
            continue;
        }
        match p.stmt() {
            Ok(s) => out.push(s),
            Err(e) => {
                p.diags.push(syntax_diag(e, ""));
                return Err(p.diags);
            }
        }
    }
    if has_errors(&p.diags) {
        Err(p.diags)
    } else {
        Ok(out)
    }
}

fn syntax_diag(e: SyntaxError, file: &str) -> Diagnostic {
    Diagnostic::error(rules::SYNTAX, e.span, e.message).in_file(file)
}

fn default_module_name(filename: &str) -> String {
    let stem = Path::new(filename).file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let mut name: String =
        stem.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if name.is_empty() {
        name = "main".into();
    } else if name.starts_with(|c: char| c.is_ascii_digit()) {
        name.insert(0, '_');
    }
    name
}

struct Parser {
    c: Cursor,
    diags: Vec<Diagnostic>,
    file: String,
}

impl Parser {
    fn new(text: &str, file: &str) -> PResult<Parser> {
        Ok(Parser { c: Cursor::new(text)?, diags: Vec::new(), file: file.to_string() })
    }

    fn report(&mut self, rule: &'static str, span: Span, message: impl Into<String>) {
        self.diags.push(Diagnostic::error(rule, span, message).in_file(self.file.clone()));
    }

    fn module(&mut self, default_name: &str) -> PResult<Module> {
        let mut m = Module::new(default_name);
        let mut seen_header = false;
        let mut kernel_names = HashSet::new();
        while !self.c.at_eof() {
            if self.c.eat_punct(";") {
                continue;
            }
            if self.c.is_ident("Module") && !seen_header && m.decls.is_empty() && m.kernels.is_empty() {
                self.c.next();
                m.name = self.c.expect_ident()?.0;
                self.c.eat_punct(";");
                seen_header = true;
            } else if self.c.eat_ident("Names") {
                loop {
                    m.imported_names.push(self.c.expect_ident()?.0);
                    if !self.c.eat_punct(",") {
                        break;
                    }
                }
                self.c.eat_punct(";");
            } else if let Some(ty) = self.global_type() {
                self.c.next();
                let (name, _) = self.c.expect_ident()?;
                let init = if self.c.eat_punct("=") { Some(self.c.parse_expr()?) } else { None };
                self.c.eat_punct(";");
                m.decls.push(GlobalDecl { name, ty, init });
            } else {
                let k = self.kernel()?;
                if !kernel_names.insert(k.name.clone()) {
                    let span = k.span.unwrap_or_default();
                    self.report(rules::DUPLICATE_KERNEL, span, format!("kernel `{}` is defined more than once", k.name));
                }
                m.kernels.push(k);
            }
        }
        Ok(m)
    }

    fn global_type(&self) -> Option<TypeTag> {
        match self.c.peek() {
            Tok::Ident(s) if matches!(self.c.peek_at(1), Tok::Ident(_)) => TypeTag::from_keyword(s),
            _ => None,
        }
    }

    fn kernel(&mut self) -> PResult<Kernel> {
        let start = self.c.span();
        let mut launch_bounds = None;
        let mut annotations = std::collections::BTreeMap::new();
        while self.c.eat_punct("@") {
            let (key, kspan) = self.c.expect_ident()?;
            self.c.expect_punct("(")?;
            if key == "launch_bounds" {
                let max_threads = self.u32_lit()?;
                let min_blocks = if self.c.eat_punct(",") { Some(self.u32_lit()?) } else { None };
                self.c.expect_punct(")")?;
                if launch_bounds.replace(LaunchBounds { max_threads, min_blocks }).is_some() {
                    return Err(SyntaxError { message: "duplicate `@launch_bounds`".into(), span: kspan });
                }
                continue;
            }
            let value = match self.c.next().tok {
                Tok::Ident(s) | Tok::Str(s) => s,
                Tok::Int(v) => v.to_string(),
                Tok::Float(v) => format!("{v:?}"),
                other => {
                    return Err(SyntaxError {
                        message: format!("expected annotation value, found {}", other.describe()),
                        span: kspan,
                    })
                }
            };
            self.c.expect_punct(")")?;
            if annotations.insert(key.clone(), value).is_some() {
                return Err(SyntaxError { message: format!("duplicate annotation `@{key}`"), span: kspan });
            }
        }
        let kind = if self.c.eat_ident("host") {
            KernelKind::Host
        } else if self.c.eat_ident("device") {
            KernelKind::Device
        } else {
            KernelKind::Plain
        };
        self.c.expect_keyword("Kernel")?;
        let (name, _) = self.c.expect_ident()?;
        self.c.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.c.eat_punct(")") {
            loop {
                let (first, _) = self.c.expect_ident()?;
                let param = match self.c.peek().clone() {
                    Tok::Ident(pname) => {
                        let ty = TypeTag::from_keyword(&first).ok_or_else(|| SyntaxError {
                            message: format!("unknown parameter type `{first}`"),
                            span: self.c.span(),
                        })?;
                        self.c.next();
                        Param::new(pname, ty)
                    }
                    _ => Param::new(first, TypeTag::Any),
                };
                params.push(param);
                if self.c.eat_punct(")") {
                    break;
                }
                self.c.expect_punct(",")?;
            }
        }
        let body = self.block()?;
        Ok(Kernel { name, kind, params, body, launch_bounds, annotations, span: Some(start) })
    }

    fn u32_lit(&mut self) -> PResult<u32> {
        let span = self.c.span();
        let v = self.c.expect_uint()?;
        u32::try_from(v).map_err(|_| SyntaxError { message: "integer out of range".into(), span })
    }

    fn block(&mut self) -> PResult<Block> {
        self.c.expect_punct("{")?;
        let mut out = Vec::new();
        loop {
            if self.c.eat_punct("}") {
                return Ok(out);
            }
            if self.c.at_eof() {
                return self.c.unexpected("`}`");
            }
            if self.c.eat_punct(";") {
                continue;
            }
            out.push(self.stmt()?);
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.c.span();
        let kind = self.stmt_kind()?;
        self.c.eat_punct(";");
        Ok(Stmt::at(kind, span))
    }

    fn paren_expr(&mut self) -> PResult<Expr> {
        self.c.expect_punct("(")?;
        let e = self.c.parse_expr()?;
        self.c.expect_punct(")")?;
        Ok(e)
    }

    fn stmt_kind(&mut self) -> PResult<StmtKind> {
        if self.c.eat_punct("@") {
            let (key, span) = self.c.expect_ident()?;
            if key != "mapping" {
                return Err(SyntaxError { message: format!("unknown statement annotation `@{key}`"), span });
            }
            self.c.expect_punct("(")?;
            let (value, vspan) = self.c.expect_ident()?;
            let mapping = Mapping::parse(&value).ok_or_else(|| SyntaxError {
                message: format!("unknown mapping `{value}`; expected consecutive or blocked"),
                span: vspan,
            })?;
            self.c.expect_punct(")")?;
            if !self.c.is_ident("ForAll") {
                return self.c.unexpected("`ForAll` after `@mapping`");
            }
            let mut f = self.forall()?;
            f.mapping = mapping;
            return Ok(StmtKind::ForAll(f));
        }
        let word = match self.c.peek() {
            Tok::Ident(w) => w.clone(),
            _ => return self.simple(),
        };
        let call_like = self.c.is_punct_at(1, "(");
        match word.as_str() {
            "ForAll" => Ok(StmtKind::ForAll(self.forall()?)),
            "for" | "For" if call_like => {
                let (var, iter) = self.loop_header()?;
                Ok(StmtKind::For { var, iter, body: self.block()? })
            }
            "while" | "While" if call_like => {
                self.c.next();
                let cond = self.paren_expr()?;
                Ok(StmtKind::While { cond, body: self.block()? })
            }
            "if" | "If" if call_like => self.if_stmt(),
            "Atomic" if call_like => {
                self.c.next();
                let lock = self.paren_expr()?;
                let locked = self.block()?;
                let failed = self.else_block()?;
                Ok(StmtKind::Atomic { lock, locked, failed })
            }
            "Exclusive" if call_like => {
                self.c.next();
                self.c.expect_punct("(")?;
                let object = self.c.parse_expr()?;
                self.c.expect_punct(",")?;
                let count = self.c.parse_expr()?;
                self.c.expect_punct(",")?;
                let locks = if self.c.eat_ident("In") {
                    LockSource::ArrayIterator(self.c.parse_expr()?)
                } else {
                    LockSource::Array(self.c.parse_expr()?)
                };
                self.c.expect_punct(")")?;
                let locked = self.block()?;
                let failed = self.else_block()?;
                Ok(StmtKind::Exclusive(Exclusive { object, count, locks, locked, failed }))
            }
            "SyncRunningThreads" => {
                self.c.next();
                if self.c.eat_punct("(") {
                    self.c.expect_punct(")")?;
                }
                Ok(StmtKind::SyncRunningThreads)
            }
            "Retry" => {
                self.c.next();
                Ok(StmtKind::Retry(self.c.parse_expr()?))
            }
            "Respawn" => {
                self.c.next();
                Ok(StmtKind::Respawn(self.c.parse_expr()?))
            }
            "ReduceAndReturn" => {
                self.c.next();
                Ok(StmtKind::ReduceAndReturn(self.paren_expr()?))
            }
            "Invoke" => Ok(StmtKind::Invoke(self.invoke(None, None)?)),
            "Any" | "All" if call_like && self.c.is_ident_at(2, "Invoke") => {
                Ok(StmtKind::Invoke(self.reduced_invoke(None)?))
            }
            "Iterate" => self.iterate(),
            "Pipe" => {
                self.c.next();
                let once = self.c.eat_ident("Once");
                let wlinit = if self.c.eat_ident("Initial") { Some(self.wlinit()?) } else { None };
                Ok(StmtKind::Pipe(Pipe { once, body: self.block()?, wlinit }))
            }
            "CBlock" if call_like => self.raw_cblock(),
            _ if self.c.is_punct_at(1, "=")
                && (self.c.is_ident_at(2, "Any") || self.c.is_ident_at(2, "All"))
                && self.c.is_punct_at(3, "(")
                && self.c.is_ident_at(4, "Invoke") =>
            {
                let (var, _) = self.c.expect_ident()?;
                self.c.next();
                Ok(StmtKind::Invoke(self.reduced_invoke(Some(var))?))
            }
            _ => self.simple(),
        }
    }

    fn forall(&mut self) -> PResult<ForAll> {
        let (var, iter) = self.loop_header()?;
        Ok(ForAll { var, iter, body: self.block()?, mapping: Mapping::Consecutive })
    }

    /// `KW ( var In expr )`
    fn loop_header(&mut self) -> PResult<(String, Expr)> {
        self.c.next();
        self.c.expect_punct("(")?;
        let (var, _) = self.c.expect_ident()?;
        self.c.expect_keyword("In")?;
        let iter = self.c.parse_expr()?;
        self.c.expect_punct(")")?;
        Ok((var, iter))
    }

    fn if_stmt(&mut self) -> PResult<StmtKind> {
        self.c.next();
        let cond = self.paren_expr()?;
        let then = self.block()?;
        let els = if self.c.eat_ident("else") || self.c.eat_ident("Else") {
            if (self.c.is_ident("if") || self.c.is_ident("If")) && self.c.is_punct_at(1, "(") {
                let span = self.c.span();
                vec![Stmt::at(self.if_stmt()?, span)]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(StmtKind::If { cond, then, els })
    }

    fn else_block(&mut self) -> PResult<Option<Block>> {
        if self.c.eat_ident("Else") || self.c.eat_ident("else") {
            Ok(Some(self.block()?))
        } else {
            Ok(None)
        }
    }

    fn invoke(&mut self, reduction: Option<Reduction>, result: Option<String>) -> PResult<Invoke> {
        self.c.expect_keyword("Invoke")?;
        let (kernel, _) = self.c.expect_ident()?;
        self.c.expect_punct("(")?;
        let args = self.c.parse_args(")")?;
        Ok(Invoke { kernel, args, reduction, result })
    }

    /// `Any(Invoke k(args))` or `All(...)`
    fn reduced_invoke(&mut self, result: Option<String>) -> PResult<Invoke> {
        let red = if self.c.eat_ident("Any") {
            Reduction::Any
        } else {
            self.c.expect_keyword("All")?;
            Reduction::All
        };
        self.c.expect_punct("(")?;
        let inv = self.invoke(Some(red), result)?;
        self.c.expect_punct(")")?;
        Ok(inv)
    }

    fn iterate(&mut self) -> PResult<StmtKind> {
        self.c.next();
        let mut cond = None;
        for (kw, kind) in [("While", CondKind::While), ("Until", CondKind::Until)] {
            if self.c.is_ident(kw) && (self.c.is_ident_at(1, "Any") || self.c.is_ident_at(1, "All")) {
                self.c.next();
                let red = if self.c.eat_ident("Any") {
                    Reduction::Any
                } else {
                    self.c.next();
                    Reduction::All
                };
                cond = Some((kind, red));
            }
        }
        let (kernel, _) = self.c.expect_ident()?;
        self.c.expect_punct("(")?;
        let args = self.c.parse_args(")")?;
        let initial = if self.c.eat_ident("Initial") { Some(self.wlinit()?) } else { None };
        let mut extra_cond = None;
        for (kw, comb) in [("And", Combiner::And), ("Or", Combiner::Or)] {
            if extra_cond.is_none() && self.c.is_ident(kw) && self.c.is_punct_at(1, "(") {
                self.c.next();
                extra_cond = Some((self.paren_expr()?, comb));
            }
        }
        let between_rounds = if self.c.is_punct("{") { self.block()? } else { Vec::new() };
        Ok(StmtKind::Iterate(Iterate { kernel, args, cond, initial, extra_cond, between_rounds }))
    }

    /// `[(size)] [e, ...]` or `[(size)] FromArray(array, len)`
    fn wlinit(&mut self) -> PResult<WorklistInit> {
        let size = if self.c.is_punct("(") { Some(self.paren_expr()?) } else { None };
        let source = if self.c.eat_punct("[") {
            WorklistSource::Scalars(self.c.parse_args("]")?)
        } else if self.c.eat_ident("FromArray") {
            self.c.expect_punct("(")?;
            let array = self.c.parse_expr()?;
            self.c.expect_punct(",")?;
            let len = self.c.parse_expr()?;
            self.c.expect_punct(")")?;
            WorklistSource::FromArray { array, len }
        } else {
            return self.c.unexpected("`[` or `FromArray` in worklist initializer");
        };
        Ok(WorklistInit { size, source })
    }

    /// `CBlock("code") [reads(a, b)] [writes(c)]`
    fn raw_cblock(&mut self) -> PResult<StmtKind> {
        self.c.next();
        self.c.expect_punct("(")?;
        let code = match self.c.peek().clone() {
            Tok::Str(s) => {
                self.c.next();
                s
            }
            _ => return self.c.unexpected("string literal"),
        };
        self.c.expect_punct(")")?;
        let reads = if self.c.eat_ident("reads") { self.name_list()? } else { Vec::new() };
        let writes = if self.c.eat_ident("writes") { self.name_list()? } else { Vec::new() };
        Ok(StmtKind::CBlock(CBlock { code, reads, writes }))
    }

    fn name_list(&mut self) -> PResult<Vec<String>> {
        self.c.expect_punct("(")?;
        let mut out = Vec::new();
        if self.c.eat_punct(")") {
            return Ok(out);
        }
        loop {
            out.push(self.c.expect_ident()?.0);
            if self.c.eat_punct(")") {
                return Ok(out);
            }
            self.c.expect_punct(",")?;
        }
    }

    fn simple(&mut self) -> PResult<StmtKind> {
        let span = self.c.span();
        let stmt = parse_simple(&mut self.c)?;
        match stmt {
            SimpleStmt::Assign { target: Expr::Var(var), op: AssignOp::Set, value: Some(Expr::Method(r, m, mut a)) }
                if r.is_worklist() && m == "pop" && a.len() == 1 =>
            {
                Ok(StmtKind::WlPop { var, index: a.remove(0) })
            }
            SimpleStmt::Call(Expr::Method(r, m, mut a)) if r.is_worklist() && m == "push" && a.len() == 1 => {
                Ok(StmtKind::WlPush(a.remove(0)))
            }
            stmt => self.check_simple(stmt, span),
        }
    }

    fn check_simple(&mut self, stmt: SimpleStmt, span: Span) -> PResult<StmtKind> {
        let mut bad = None;
        let mut check = |e: &Expr| find_wl_method(e, &mut bad);
        match &stmt {
            SimpleStmt::Assign { target, value, .. } => {
                check(target);
                if let Some(v) = value {
                    check(v);
                }
            }
            SimpleStmt::Declare { init, .. } => {
                if let Some(e) = init {
                    check(e);
                }
            }
            SimpleStmt::Call(e) => check(e),
        }
        if let Some(m) = bad {
            let message = match m.as_str() {
                "pop" => "`wl.pop` takes one index and must be used as `v = wl.pop(i)`".to_string(),
                "push" => "`wl.push` takes one item and must be used as a statement".to_string(),
                m => format!("`wl.{m}` is not a worklist method; only `pop` and `push` exist"),
            };
            self.report(rules::WL_METHOD, span, message);
        }
        Ok(StmtKind::CBlock(cblock_of(&stmt)))
    }
}

fn find_wl_method(e: &Expr, found: &mut Option<String>) {
    if found.is_some() {
        return;
    }
    match e {
        Expr::Method(r, name, args) => {
            if r.is_worklist() {
                *found = Some(name.clone());
                return;
            }
            find_wl_method(r, found);
            args.iter().for_each(|a| find_wl_method(a, found));
        }
        Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => {}
        Expr::Unary(_, a) | Expr::Field(a, _) => find_wl_method(a, found),
        Expr::Binary(_, a, b) | Expr::Index(a, b) => {
            find_wl_method(a, found);
            find_wl_method(b, found);
        }
        Expr::Call(_, args) => args.iter().for_each(|a| find_wl_method(a, found)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(src: &str) -> StmtKind {
        let mut b = parse_statements(src).unwrap();
        assert_eq!(b.len(), 1, "{src}");
        b.remove(0).kind
    }

    #[test]
    fn atomic_with_empty_else() {
        match one("Atomic (l) { } Else { }") {
            StmtKind::Atomic { lock, locked, failed } => {
                assert_eq!(lock, Expr::var("l"));
                assert!(locked.is_empty());
                assert_eq!(failed, Some(vec![]));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn worklist_sugar() {
        assert_eq!(one("n = wl.pop(i)"), StmtKind::WlPop { var: "n".into(), index: Expr::var("i") });
        assert_eq!(one("wl.push(e.dst.id);"), StmtKind::WlPush(Expr::field(Expr::field(Expr::var("e"), "dst"), "id")));
        let d = parse_statements("wl.size()").unwrap_err();
        assert_eq!(d[0].rule_id, rules::WL_METHOD);
        let d = parse_statements("x = wl.pop(i) + 1").unwrap_err();
        assert_eq!(d[0].rule_id, rules::WL_METHOD);
    }

    #[test]
    fn iterate_forms() {
        match one("Iterate Until All k(a, b) Initial (64) FromArray(xs, n) Or (stop) { r++; }") {
            StmtKind::Iterate(it) => {
                assert_eq!(it.cond, Some((CondKind::Until, Reduction::All)));
                assert_eq!(it.args.len(), 2);
                let init = it.initial.unwrap();
                assert_eq!(init.size, Some(Expr::Int(64)));
                assert!(matches!(init.source, WorklistSource::FromArray { .. }));
                assert_eq!(it.extra_cond, Some((Expr::var("stop"), Combiner::Or)));
                assert_eq!(it.between_rounds.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reduced_invokes() {
        match one("changed = Any(Invoke relax(g))") {
            StmtKind::Invoke(inv) => {
                assert_eq!(inv.reduction, Some(Reduction::Any));
                assert_eq!(inv.result.as_deref(), Some("changed"));
            }
            other => panic!("{other:?}"),
        }
        match one("All(Invoke check())") {
            StmtKind::Invoke(inv) => assert_eq!((inv.reduction, inv.result), (Some(Reduction::All), None)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn else_if_chain() {
        match one("if (a) { x = 1; } else if (b) { x = 2; } else { x = 3; }") {
            StmtKind::If { els, .. } => {
                assert_eq!(els.len(), 1);
                assert!(matches!(&els[0].kind, StmtKind::If { els, .. } if els.len() == 1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn module_header_and_kernels() {
        let src = "Module bfs;\nNames N;\nint LEVEL = 0;\n@launch_bounds(256, 2)\nKernel k(graph g, x) { }\nhost Kernel main() { }\n";
        let m = parse_source(src, "x.irgl").unwrap();
        assert_eq!(m.name, "bfs");
        assert_eq!(m.imported_names, vec!["N"]);
        assert_eq!(m.decls[0].init, Some(Expr::Int(0)));
        assert_eq!(m.kernels[0].launch_bounds, Some(LaunchBounds { max_threads: 256, min_blocks: Some(2) }));
        assert_eq!(m.kernels[0].params, vec![Param::new("g", TypeTag::Graph), Param::new("x", TypeTag::Any)]);
        assert!(m.kernels[1].is_host());
        assert_eq!(parse_source("Kernel f() { }", "dir/my-prog.irgl").unwrap().name, "my_prog");
    }

    #[test]
    fn duplicate_kernel_is_a_diagnostic() {
        let d = parse_source("Kernel f() { }\nKernel f() { }", "a.irgl").unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].rule_id, rules::DUPLICATE_KERNEL);
        assert_eq!(d[0].span.line, 2);
    }

    #[test]
    fn syntax_error_has_position() {
        let d = parse_source("Kernel f() {\n  ForAll(x wl) { }\n}", "a.irgl").unwrap_err();
        assert_eq!(d[0].rule_id, rules::SYNTAX);
        assert_eq!((d[0].span.line, d[0].span.column), (2, 12));
        assert!(d[0].to_string().starts_with("a.irgl:2:12: error[syntax]"));
    }
}
