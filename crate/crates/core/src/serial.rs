//! Canonical text serialization of a [`Module`].
//!
//! The format is a parenthesized tree. Every declaration, kernel, statement
//! and statement block opens on its own line; expressions are written inline
//! as nested lists. The exact layout is stable: golden files depend on it.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;

use thiserror::Error;

use crate::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerialError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: u32, column: u32, message: String },
    #[error("{line}:{column}: duplicate kernel `{name}`")]
    DuplicateKernel { name: String, line: u32, column: u32 },
}

// ---------------------------------------------------------------------------
// Writer

pub fn serialize(m: &Module) -> String {
    let mut w = Writer { out: String::new(), depth: 0 };
    w.open(&format!("module {}", atom(&m.name)));
    if !m.imported_names.is_empty() {
        let names: Vec<String> = m.imported_names.iter().map(|n| atom(n)).collect();
        w.line(&format!("(names {})", names.join(" ")));
    }
    for d in &m.decls {
        match &d.init {
            Some(e) => w.line(&format!("(global {} {} {})", d.ty.keyword(), atom(&d.name), sexpr(e))),
            None => w.line(&format!("(global {} {})", d.ty.keyword(), atom(&d.name))),
        }
    }
    for k in &m.kernels {
        w.kernel(k);
    }
    w.close();
    w.out
}

struct Writer {
    out: String,
    depth: usize,
}

impl Writer {
    fn line(&mut self, s: &str) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn open(&mut self, head: &str) {
        self.line(&format!("({head}"));
        self.depth += 1;
    }

    fn close(&mut self) {
        self.depth -= 1;
        self.line(")");
    }

    fn kernel(&mut self, k: &Kernel) {
        self.open(&format!("kernel {} {}", atom(&k.name), k.kind.as_str()));
        let params: Vec<String> =
            k.params.iter().map(|p| format!("({} {})", atom(&p.name), p.ty.keyword())).collect();
        self.line(&format!("(params{}{})", if params.is_empty() { "" } else { " " }, params.join(" ")));
        if let Some(lb) = k.launch_bounds {
            match lb.min_blocks {
                Some(mb) => self.line(&format!("(launch_bounds {} {})", lb.max_threads, mb)),
                None => self.line(&format!("(launch_bounds {})", lb.max_threads)),
            }
        }
        for (key, value) in &k.annotations {
            self.line(&format!("(annotation {} {})", quoted(key), quoted(value)));
        }
        self.block("body", &k.body);
        self.close();
    }

    fn block(&mut self, tag: &str, stmts: &[Stmt]) {
        if stmts.is_empty() {
            self.line(&format!("({tag})"));
            return;
        }
        self.open(tag);
        for s in stmts {
            self.stmt(s);
        }
        self.close();
    }

    fn wlinit(&mut self, init: &WorklistInit) {
        let size = match &init.size {
            Some(e) => format!(" (size {})", sexpr(e)),
            None => String::new(),
        };
        let source = match &init.source {
            WorklistSource::Scalars(xs) => format!("(scalars{})", list_tail(xs)),
            WorklistSource::FromArray { array, len } => {
                format!("(from-array {} {})", sexpr(array), sexpr(len))
            }
        };
        self.line(&format!("(initial{size} {source})"));
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::CBlock(b) => {
                let reads: Vec<String> = b.reads.iter().map(|r| atom(r)).collect();
                let writes: Vec<String> = b.writes.iter().map(|r| atom(r)).collect();
                self.line(&format!(
                    "(cblock {} (reads{}{}) (writes{}{}))",
                    quoted(&b.code),
                    if reads.is_empty() { "" } else { " " },
                    reads.join(" "),
                    if writes.is_empty() { "" } else { " " },
                    writes.join(" ")
                ));
            }
            StmtKind::ForAll(f) => {
                self.open(&format!("forall {} {} {}", atom(&f.var), f.mapping.as_str(), sexpr(&f.iter)));
                self.block("body", &f.body);
                self.close();
            }
            StmtKind::For { var, iter, body } => {
                self.open(&format!("for {} {}", atom(var), sexpr(iter)));
                self.block("body", body);
                self.close();
            }
            StmtKind::While { cond, body } => {
                self.open(&format!("while {}", sexpr(cond)));
                self.block("body", body);
                self.close();
            }
            StmtKind::If { cond, then, els } => {
                self.open(&format!("if {}", sexpr(cond)));
                self.block("then", then);
                self.block("else", els);
                self.close();
            }
            StmtKind::Atomic { lock, locked, failed } => {
                self.open(&format!("atomic {}", sexpr(lock)));
                self.block("locked", locked);
                if let Some(f) = failed {
                    self.block("failed", f);
                }
                self.close();
            }
            StmtKind::Exclusive(x) => {
                let locks = match &x.locks {
                    LockSource::Array(e) => format!("(array {})", sexpr(e)),
                    LockSource::ArrayIterator(e) => format!("(iterator {})", sexpr(e)),
                };
                self.open(&format!("exclusive {} {} {}", sexpr(&x.object), sexpr(&x.count), locks));
                self.block("locked", &x.locked);
                if let Some(f) = &x.failed {
                    self.block("failed", f);
                }
                self.close();
            }
            StmtKind::SyncRunningThreads => self.line("(sync)"),
            StmtKind::Retry(e) => self.line(&format!("(retry {})", sexpr(e))),
            StmtKind::Respawn(e) => self.line(&format!("(respawn {})", sexpr(e))),
            StmtKind::ReduceAndReturn(e) => self.line(&format!("(reduce {})", sexpr(e))),
            StmtKind::Invoke(inv) => {
                let mut s = format!("(invoke {} (args{})", atom(&inv.kernel), list_tail(&inv.args));
                if let Some(r) = inv.reduction {
                    let _ = write!(s, " (reduction {})", r.as_str());
                }
                if let Some(v) = &inv.result {
                    let _ = write!(s, " (result {})", atom(v));
                }
                s.push(')');
                self.line(&s);
            }
            StmtKind::Iterate(it) => {
                self.open(&format!("iterate {} (args{})", atom(&it.kernel), list_tail(&it.args)));
                if let Some((kind, red)) = it.cond {
                    let k = match kind {
                        CondKind::While => "While",
                        CondKind::Until => "Until",
                    };
                    self.line(&format!("(cond {k} {})", red.as_str()));
                }
                if let Some(init) = &it.initial {
                    self.wlinit(init);
                }
                if let Some((e, comb)) = &it.extra_cond {
                    self.line(&format!("(extra {} {})", comb.as_str(), sexpr(e)));
                }
                self.block("between", &it.between_rounds);
                self.close();
            }
            StmtKind::Pipe(p) => {
                self.open(&format!("pipe {}", if p.once { "once" } else { "loop" }));
                if let Some(init) = &p.wlinit {
                    self.wlinit(init);
                }
                self.block("body", &p.body);
                self.close();
            }
            StmtKind::WlPop { var, index } => self.line(&format!("(wlpop {} {})", atom(var), sexpr(index))),
            StmtKind::WlPush(e) => self.line(&format!("(wlpush {})", sexpr(e))),
        }
    }
}

fn atom(s: &str) -> String {
    s.to_string()
}

fn list_tail(xs: &[Expr]) -> String {
    xs.iter().map(|e| format!(" {}", sexpr(e))).collect()
}

/// Inline s-expression form of an expression.
pub fn sexpr(e: &Expr) -> String {
    match e {
        Expr::Int(v) => format!("(int {v})"),
        Expr::Float(v) => format!("(float {v:?})"),
        Expr::Bool(v) => format!("(bool {v})"),
        Expr::Str(s) => format!("(str {})", quoted(s)),
        Expr::Var(v) => format!("(var {v})"),
        Expr::Unary(UnaryOp::Neg, a) => format!("(neg {})", sexpr(a)),
        Expr::Unary(UnaryOp::Not, a) => format!("(not {})", sexpr(a)),
        Expr::Binary(op, a, b) => format!("(bin {} {} {})", op.symbol(), sexpr(a), sexpr(b)),
        Expr::Index(a, b) => format!("(index {} {})", sexpr(a), sexpr(b)),
        Expr::Field(a, name) => format!("(field {} {name})", sexpr(a)),
        Expr::Call(name, args) => format!("(call {name}{})", list_tail(args)),
        Expr::Method(r, name, args) => format!("(method {} {name}{})", sexpr(r), list_tail(args)),
    }
}

// ---------------------------------------------------------------------------
// Reader

#[derive(Debug, Clone)]
enum SExp {
    Atom(String, Span),
    Str(String, Span),
    List(Vec<SExp>, Span),
}

impl SExp {
    fn span(&self) -> Span {
        match self {
            SExp::Atom(_, s) | SExp::Str(_, s) | SExp::List(_, s) => *s,
        }
    }
}

type R<T> = Result<T, SerialError>;

fn err<T>(span: Span, message: impl Into<String>) -> R<T> {
    Err(SerialError::Syntax { line: span.line, column: span.column, message: message.into() })
}

struct Reader<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    _src: &'a str,
}

impl Reader<'_> {
    fn here(&self) -> Span {
        Span::new(self.line, self.col, 1)
    }

    fn bump(&mut self) -> char {
        let c = self.chars[self.pos];
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while self.pos < self.chars.len() && self.chars[self.pos] != '\n' {
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> R<SExp> {
        self.skip_ws();
        let span = self.here();
        if self.pos >= self.chars.len() {
            return err(span, "unexpected end of input");
        }
        match self.chars[self.pos] {
            '(' => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if self.pos >= self.chars.len() {
                        return err(self.here(), format!("unexpected end of input; list opened at {}:{} is not closed", span.line, span.column));
                    }
                    if self.chars[self.pos] == ')' {
                        self.bump();
                        return Ok(SExp::List(items, span));
                    }
                    items.push(self.read()?);
                }
            }
            ')' => err(span, "unexpected `)`"),
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    if self.pos >= self.chars.len() {
                        return err(self.here(), "unexpected end of input in string");
                    }
                    match self.bump() {
                        '"' => return Ok(SExp::Str(s, span)),
                        '\\' => {
                            if self.pos >= self.chars.len() {
                                return err(self.here(), "unexpected end of input in string");
                            }
                            s.push(match self.bump() {
                                'n' => '\n',
                                't' => '\t',
                                'r' => '\r',
                                c => c,
                            });
                        }
                        c => s.push(c),
                    }
                }
            }
            _ => {
                let mut s = String::new();
                while self.pos < self.chars.len() {
                    let c = self.chars[self.pos];
                    if c.is_whitespace() || c == '(' || c == ')' || c == '"' || c == ';' {
                        break;
                    }
                    s.push(self.bump());
                }
                Ok(SExp::Atom(s, span))
            }
        }
    }
}

pub fn parse_serialized(text: &str) -> Result<Module, SerialError> {
    let mut r = Reader { chars: text.chars().collect(), pos: 0, line: 1, col: 1, _src: text };
    let root = r.read()?;
    r.skip_ws();
    if r.pos < r.chars.len() {
        return err(r.here(), "trailing input after module");
    }
    decode_module(&root)
}

fn list<'a>(e: &'a SExp, what: &str) -> R<&'a [SExp]> {
    match e {
        SExp::List(items, _) => Ok(items),
        other => err(other.span(), format!("expected {what}")),
    }
}

fn atom_of<'a>(e: &'a SExp, what: &str) -> R<&'a str> {
    match e {
        SExp::Atom(s, _) => Ok(s),
        other => err(other.span(), format!("expected {what}")),
    }
}

fn string_of<'a>(e: &'a SExp, what: &str) -> R<&'a str> {
    match e {
        SExp::Str(s, _) => Ok(s),
        other => err(other.span(), format!("expected {what}")),
    }
}

/// A list whose head atom is `tag`; returns the tail.
fn tagged<'a>(e: &'a SExp, tag: &str) -> R<&'a [SExp]> {
    let items = list(e, &format!("`({tag} ...)`"))?;
    match items.first() {
        Some(SExp::Atom(h, _)) if h == tag => Ok(&items[1..]),
        _ => err(e.span(), format!("expected `({tag} ...)`")),
    }
}

fn head(e: &SExp) -> Option<&str> {
    match e {
        SExp::List(items, _) => match items.first() {
            Some(SExp::Atom(h, _)) => Some(h),
            _ => None,
        },
        _ => None,
    }
}

fn arity(e: &SExp, tail: &[SExp], min: usize, max: usize) -> R<()> {
    if tail.len() < min || tail.len() > max {
        return err(e.span(), format!("wrong number of fields in `{}`", head(e).unwrap_or("?")));
    }
    Ok(())
}

fn decode_module(e: &SExp) -> R<Module> {
    let tail = tagged(e, "module")?;
    let Some(name) = tail.first() else {
        return err(e.span(), "module needs a name");
    };
    let mut m = Module::new(atom_of(name, "module name")?);
    let mut seen = HashSet::new();
    for item in &tail[1..] {
        match head(item) {
            Some("names") => {
                for n in tagged(item, "names")? {
                    m.imported_names.push(atom_of(n, "name")?.to_string());
                }
            }
            Some("global") => {
                let t = tagged(item, "global")?;
                arity(item, t, 2, 3)?;
                let ty_s = atom_of(&t[0], "type")?;
                let ty = TypeTag::from_keyword(ty_s).ok_or_else(|| syntax(t[0].span(), "unknown type"))?;
                let name = atom_of(&t[1], "name")?.to_string();
                let init = t.get(2).map(decode_expr).transpose()?;
                m.decls.push(GlobalDecl { name, ty, init });
            }
            Some("kernel") => {
                let k = decode_kernel(item)?;
                if !seen.insert(k.name.clone()) {
                    let s = item.span();
                    return Err(SerialError::DuplicateKernel { name: k.name, line: s.line, column: s.column });
                }
                m.kernels.push(k);
            }
            _ => return err(item.span(), "expected `names`, `global` or `kernel`"),
        }
    }
    Ok(m)
}

fn syntax(span: Span, message: &str) -> SerialError {
    SerialError::Syntax { line: span.line, column: span.column, message: message.to_string() }
}

fn parse_u32(e: &SExp) -> R<u32> {
    atom_of(e, "integer")?.parse().map_err(|_| syntax(e.span(), "expected integer"))
}

fn decode_kernel(e: &SExp) -> R<Kernel> {
    let t = tagged(e, "kernel")?;
    if t.len() < 3 {
        return err(e.span(), "kernel needs a name, a kind and a body");
    }
    let name = atom_of(&t[0], "kernel name")?;
    let kind = match atom_of(&t[1], "kernel kind")? {
        "plain" => KernelKind::Plain,
        "host" => KernelKind::Host,
        "device" => KernelKind::Device,
        _ => return err(t[1].span(), "kernel kind must be plain, host or device"),
    };
    let mut k = Kernel::new(name, kind);
    k.span = Some(e.span());
    let mut annotations = BTreeMap::new();
    let mut body = None;
    for item in &t[2..] {
        match head(item) {
            Some("params") => {
                for p in tagged(item, "params")? {
                    let pl = list(p, "parameter")?;
                    if pl.len() != 2 {
                        return err(p.span(), "parameter is `(name type)`");
                    }
                    let ty = TypeTag::from_keyword(atom_of(&pl[1], "type")?)
                        .ok_or_else(|| syntax(pl[1].span(), "unknown type"))?;
                    k.params.push(Param::new(atom_of(&pl[0], "name")?, ty));
                }
            }
            Some("launch_bounds") => {
                let lb = tagged(item, "launch_bounds")?;
                arity(item, lb, 1, 2)?;
                k.launch_bounds = Some(LaunchBounds {
                    max_threads: parse_u32(&lb[0])?,
                    min_blocks: lb.get(1).map(parse_u32).transpose()?,
                });
            }
            Some("annotation") => {
                let a = tagged(item, "annotation")?;
                arity(item, a, 2, 2)?;
                annotations.insert(string_of(&a[0], "key")?.to_string(), string_of(&a[1], "value")?.to_string());
            }
            Some("body") => body = Some(decode_block(item, "body")?),
            _ => return err(item.span(), "unexpected kernel field"),
        }
    }
    k.annotations = annotations;
    k.body = body.ok_or_else(|| syntax(e.span(), "kernel has no body"))?;
    Ok(k)
}

fn decode_block(e: &SExp, tag: &str) -> R<Block> {
    tagged(e, tag)?.iter().map(decode_stmt).collect()
}

/// Finds the optional sub-form `(tag ...)` among `items`.
fn find<'a>(items: &'a [SExp], tag: &str) -> Option<&'a SExp> {
    items.iter().find(|i| head(i) == Some(tag))
}

fn require<'a>(e: &SExp, items: &'a [SExp], tag: &str) -> R<&'a SExp> {
    find(items, tag).ok_or_else(|| syntax(e.span(), &format!("missing `({tag} ...)`")))
}

fn reduction(e: &SExp) -> R<Reduction> {
    match atom_of(e, "reduction")? {
        "Any" => Ok(Reduction::Any),
        "All" => Ok(Reduction::All),
        _ => err(e.span(), "reduction must be Any or All"),
    }
}

fn decode_wlinit(e: &SExp) -> R<WorklistInit> {
    let t = tagged(e, "initial")?;
    let size = find(t, "size").map(|s| {
        let st = tagged(s, "size")?;
        arity(s, st, 1, 1)?;
        decode_expr(&st[0])
    });
    let size = size.transpose()?;
    let source = if let Some(s) = find(t, "scalars") {
        WorklistSource::Scalars(tagged(s, "scalars")?.iter().map(decode_expr).collect::<R<_>>()?)
    } else if let Some(s) = find(t, "from-array") {
        let ft = tagged(s, "from-array")?;
        arity(s, ft, 2, 2)?;
        WorklistSource::FromArray { array: decode_expr(&ft[0])?, len: decode_expr(&ft[1])? }
    } else {
        return err(e.span(), "initial needs `scalars` or `from-array`");
    };
    Ok(WorklistInit { size, source })
}

fn decode_stmt(e: &SExp) -> R<Stmt> {
    let tag = head(e).ok_or_else(|| syntax(e.span(), "expected statement"))?;
    let t = tagged(e, tag)?;
    let kind = match tag {
        "cblock" => {
            arity(e, t, 3, 3)?;
            let code = string_of(&t[0], "code string")?.to_string();
            let names = |x: &SExp, tag: &str| -> R<Vec<String>> {
                tagged(x, tag)?.iter().map(|n| atom_of(n, "name").map(str::to_string)).collect()
            };
            StmtKind::CBlock(CBlock { code, reads: names(&t[1], "reads")?, writes: names(&t[2], "writes")? })
        }
        "forall" => {
            arity(e, t, 4, 4)?;
            let mapping = Mapping::parse(atom_of(&t[1], "mapping")?)
                .ok_or_else(|| syntax(t[1].span(), "mapping must be consecutive or blocked"))?;
            StmtKind::ForAll(ForAll {
                var: atom_of(&t[0], "variable")?.to_string(),
                iter: decode_expr(&t[2])?,
                body: decode_block(&t[3], "body")?,
                mapping,
            })
        }
        "for" => {
            arity(e, t, 3, 3)?;
            StmtKind::For {
                var: atom_of(&t[0], "variable")?.to_string(),
                iter: decode_expr(&t[1])?,
                body: decode_block(&t[2], "body")?,
            }
        }
        "while" => {
            arity(e, t, 2, 2)?;
            StmtKind::While { cond: decode_expr(&t[0])?, body: decode_block(&t[1], "body")? }
        }
        "if" => {
            arity(e, t, 3, 3)?;
            StmtKind::If {
                cond: decode_expr(&t[0])?,
                then: decode_block(&t[1], "then")?,
                els: decode_block(&t[2], "else")?,
            }
        }
        "atomic" => {
            arity(e, t, 2, 3)?;
            StmtKind::Atomic {
                lock: decode_expr(&t[0])?,
                locked: decode_block(&t[1], "locked")?,
                failed: t.get(2).map(|f| decode_block(f, "failed")).transpose()?,
            }
        }
        "exclusive" => {
            arity(e, t, 4, 5)?;
            let locks = match head(&t[2]) {
                Some("array") => {
                    let a = tagged(&t[2], "array")?;
                    arity(&t[2], a, 1, 1)?;
                    LockSource::Array(decode_expr(&a[0])?)
                }
                Some("iterator") => {
                    let a = tagged(&t[2], "iterator")?;
                    arity(&t[2], a, 1, 1)?;
                    LockSource::ArrayIterator(decode_expr(&a[0])?)
                }
                _ => return err(t[2].span(), "expected `(array ...)` or `(iterator ...)`"),
            };
            StmtKind::Exclusive(Exclusive {
                object: decode_expr(&t[0])?,
                count: decode_expr(&t[1])?,
                locks,
                locked: decode_block(&t[3], "locked")?,
                failed: t.get(4).map(|f| decode_block(f, "failed")).transpose()?,
            })
        }
        "sync" => {
            arity(e, t, 0, 0)?;
            StmtKind::SyncRunningThreads
        }
        "retry" | "respawn" | "reduce" | "wlpush" => {
            arity(e, t, 1, 1)?;
            let x = decode_expr(&t[0])?;
            match tag {
                "retry" => StmtKind::Retry(x),
                "respawn" => StmtKind::Respawn(x),
                "reduce" => StmtKind::ReduceAndReturn(x),
                _ => StmtKind::WlPush(x),
            }
        }
        "wlpop" => {
            arity(e, t, 2, 2)?;
            StmtKind::WlPop { var: atom_of(&t[0], "variable")?.to_string(), index: decode_expr(&t[1])? }
        }
        "invoke" => {
            arity(e, t, 2, 4)?;
            let args = tagged(require(e, t, "args")?, "args")?.iter().map(decode_expr).collect::<R<_>>()?;
            let reduction = find(t, "reduction")
                .map(|r| {
                    let rt = tagged(r, "reduction")?;
                    arity(r, rt, 1, 1)?;
                    reduction(&rt[0])
                })
                .transpose()?;
            let result = find(t, "result")
                .map(|r| {
                    let rt = tagged(r, "result")?;
                    arity(r, rt, 1, 1)?;
                    atom_of(&rt[0], "name").map(str::to_string)
                })
                .transpose()?;
            StmtKind::Invoke(Invoke { kernel: atom_of(&t[0], "kernel name")?.to_string(), args, reduction, result })
        }
        "iterate" => {
            let args = tagged(require(e, t, "args")?, "args")?.iter().map(decode_expr).collect::<R<_>>()?;
            let cond = find(t, "cond")
                .map(|c| {
                    let ct = tagged(c, "cond")?;
                    arity(c, ct, 2, 2)?;
                    let kind = match atom_of(&ct[0], "While or Until")? {
                        "While" => CondKind::While,
                        "Until" => CondKind::Until,
                        _ => return err(ct[0].span(), "expected While or Until"),
                    };
                    Ok((kind, reduction(&ct[1])?))
                })
                .transpose()?;
            let initial = find(t, "initial").map(decode_wlinit).transpose()?;
            let extra_cond = find(t, "extra")
                .map(|x| {
                    let xt = tagged(x, "extra")?;
                    arity(x, xt, 2, 2)?;
                    let comb = match atom_of(&xt[0], "And or Or")? {
                        "And" => Combiner::And,
                        "Or" => Combiner::Or,
                        _ => return err(xt[0].span(), "expected And or Or"),
                    };
                    Ok((decode_expr(&xt[1])?, comb))
                })
                .transpose()?;
            let between_rounds = decode_block(require(e, t, "between")?, "between")?;
            StmtKind::Iterate(Iterate {
                kernel: atom_of(t.first().ok_or_else(|| syntax(e.span(), "missing kernel"))?, "kernel name")?
                    .to_string(),
                args,
                cond,
                initial,
                extra_cond,
                between_rounds,
            })
        }
        "pipe" => {
            let once = match atom_of(t.first().ok_or_else(|| syntax(e.span(), "missing pipe mode"))?, "once or loop")? {
                "once" => true,
                "loop" => false,
                _ => return err(t[0].span(), "pipe mode must be once or loop"),
            };
            let wlinit = find(t, "initial").map(decode_wlinit).transpose()?;
            StmtKind::Pipe(Pipe { once, body: decode_block(require(e, t, "body")?, "body")?, wlinit })
        }
        other => return err(e.span(), format!("unknown statement `{other}`")),
    };
    Ok(Stmt::at(kind, e.span()))
}

fn decode_expr(e: &SExp) -> R<Expr> {
    let tag = head(e).ok_or_else(|| syntax(e.span(), "expected expression"))?;
    let t = tagged(e, tag)?;
    let n = |k: usize| arity(e, t, k, k);
    Ok(match tag {
        "int" => {
            n(1)?;
            Expr::Int(atom_of(&t[0], "integer")?.parse().map_err(|_| syntax(t[0].span(), "bad integer"))?)
        }
        "float" => {
            n(1)?;
            Expr::Float(atom_of(&t[0], "number")?.parse().map_err(|_| syntax(t[0].span(), "bad number"))?)
        }
        "bool" => {
            n(1)?;
            match atom_of(&t[0], "true or false")? {
                "true" => Expr::Bool(true),
                "false" => Expr::Bool(false),
                _ => return err(t[0].span(), "expected true or false"),
            }
        }
        "str" => {
            n(1)?;
            Expr::Str(string_of(&t[0], "string")?.to_string())
        }
        "var" => {
            n(1)?;
            Expr::Var(atom_of(&t[0], "name")?.to_string())
        }
        "neg" | "not" => {
            n(1)?;
            let op = if tag == "neg" { UnaryOp::Neg } else { UnaryOp::Not };
            Expr::Unary(op, Box::new(decode_expr(&t[0])?))
        }
        "bin" => {
            n(3)?;
            let op = BinaryOp::from_symbol(atom_of(&t[0], "operator")?)
                .ok_or_else(|| syntax(t[0].span(), "unknown operator"))?;
            Expr::binary(op, decode_expr(&t[1])?, decode_expr(&t[2])?)
        }
        "index" => {
            n(2)?;
            Expr::index(decode_expr(&t[0])?, decode_expr(&t[1])?)
        }
        "field" => {
            n(2)?;
            Expr::field(decode_expr(&t[0])?, atom_of(&t[1], "field name")?)
        }
        "call" => {
            if t.is_empty() {
                return err(e.span(), "call needs a function name");
            }
            Expr::Call(atom_of(&t[0], "function name")?.to_string(), t[1..].iter().map(decode_expr).collect::<R<_>>()?)
        }
        "method" => {
            if t.len() < 2 {
                return err(e.span(), "method needs a receiver and a name");
            }
            Expr::method(
                decode_expr(&t[0])?,
                atom_of(&t[1], "method name")?,
                t[2..].iter().map(decode_expr).collect::<R<_>>()?,
            )
        }
        other => return err(e.span(), format!("unknown expression `{other}`")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_module_has_one_header_and_no_kernels() {
        let text = serialize(&Module::new("m"));
        assert_eq!(text, "(module m\n)\n");
        assert_eq!(text.matches("(module").count(), 1);
        assert_eq!(text.matches("(kernel").count(), 0);
        assert_eq!(parse_serialized(&text).unwrap(), Module::new("m"));
    }

    #[test]
    fn host_kernel_round_trips() {
        let mut m = Module::new("m");
        let mut k = Kernel::new("main", KernelKind::Host);
        k.params.push(Param::new("g", TypeTag::Graph));
        k.body.push(
            StmtKind::Pipe(Pipe {
                once: true,
                body: vec![StmtKind::Invoke(Invoke {
                    kernel: "f".into(),
                    args: vec![Expr::var("g")],
                    reduction: Some(Reduction::Any),
                    result: Some("r".into()),
                })
                .into()],
                wlinit: Some(WorklistInit {
                    size: Some(Expr::Int(16)),
                    source: WorklistSource::Scalars(vec![Expr::Int(0)]),
                }),
            })
            .into(),
        );
        m.kernels.push(k);
        let back = parse_serialized(&serialize(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn duplicate_kernel_names_rejected() {
        let text = "(module m\n  (kernel f plain (params) (body))\n  (kernel f plain (params) (body))\n)";
        match parse_serialized(text) {
            Err(SerialError::DuplicateKernel { name, line, .. }) => {
                assert_eq!(name, "f");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_input_reports_position() {
        let full = serialize(&Module::new("m"));
        let cut = &full[..full.len() - 3];
        match parse_serialized(cut) {
            Err(SerialError::Syntax { line, column, .. }) => {
                assert!(line >= 1 && column >= 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
