//! The IrGL abstract syntax tree.
//!
//! A [`Module`] holds global declarations, imported names and kernels. Kernel
//! bodies are sequences of [`Stmt`]; every IrGL construct (kernel constructs,
//! orchestration constructs, structured control flow and operator code blocks)
//! has exactly one [`StmtKind`] variant.
//!
//! Source spans ride along on kernels and statements for diagnostics but do
//! not take part in equality: two trees are equal when their structure is.

use std::collections::BTreeMap;
use std::fmt;

/// Position of a node in its source text. Lines and columns are 1-based.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl Span {
    pub fn new(line: u32, column: u32, length: u32) -> Self {
        Span { line, column, length }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Module {
    pub name: String,
    pub decls: Vec<GlobalDecl>,
    pub kernels: Vec<Kernel>,
    pub imported_names: Vec<String>,
    /// File the module was read from, if any. Not part of equality.
    pub origin: Option<String>,
}

impl PartialEq for Module {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.decls == other.decls
            && self.kernels == other.kernels
            && self.imported_names == other.imported_names
    }
}

impl Module {
    pub fn new(name: impl Into<String>) -> Self {
        Module { name: name.into(), ..Default::default() }
    }

    pub fn kernel(&self, name: &str) -> Option<&Kernel> {
        self.kernels.iter().find(|k| k.name == name)
    }

    pub fn kernel_mut(&mut self, name: &str) -> Option<&mut Kernel> {
        self.kernels.iter_mut().find(|k| k.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: TypeTag,
    pub init: Option<Expr>,
}

/// Semantic type tag carried by parameters and global declarations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Any,
    Int,
    Float,
    Bool,
    Array,
    Graph,
}

impl TypeTag {
    pub fn keyword(self) -> &'static str {
        match self {
            TypeTag::Any => "var",
            TypeTag::Int => "int",
            TypeTag::Float => "float",
            TypeTag::Bool => "bool",
            TypeTag::Array => "array",
            TypeTag::Graph => "graph",
        }
    }

    pub fn from_keyword(s: &str) -> Option<TypeTag> {
        Some(match s {
            "var" => TypeTag::Any,
            "int" => TypeTag::Int,
            "float" => TypeTag::Float,
            "bool" => TypeTag::Bool,
            "array" => TypeTag::Array,
            "graph" => TypeTag::Graph,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Plain,
    Host,
    Device,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Plain => "plain",
            KernelKind::Host => "host",
            KernelKind::Device => "device",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: TypeTag,
}

impl Param {
    pub fn new(name: impl Into<String>, ty: TypeTag) -> Self {
        Param { name: name.into(), ty }
    }
}

/// `__launch_bounds__(max_threads, min_blocks)`. `min_blocks` is kept only for
/// pass-through emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchBounds {
    pub max_threads: u32,
    pub min_blocks: Option<u32>,
}

pub const MAX_BLOCK_SIZE: u32 = 1024;

#[derive(Debug, Clone)]
pub struct Kernel {
    pub name: String,
    pub kind: KernelKind,
    pub params: Vec<Param>,
    pub body: Block,
    pub launch_bounds: Option<LaunchBounds>,
    pub annotations: BTreeMap<String, String>,
    pub span: Option<Span>,
}

impl PartialEq for Kernel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.kind == other.kind
            && self.params == other.params
            && self.body == other.body
            && self.launch_bounds == other.launch_bounds
            && self.annotations == other.annotations
    }
}

impl Kernel {
    pub fn new(name: impl Into<String>, kind: KernelKind) -> Self {
        Kernel {
            name: name.into(),
            kind,
            params: Vec::new(),
            body: Vec::new(),
            launch_bounds: None,
            annotations: BTreeMap::new(),
            span: None,
        }
    }

    pub fn is_host(&self) -> bool {
        self.kind == KernelKind::Host
    }
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Option<Span>,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl From<StmtKind> for Stmt {
    fn from(kind: StmtKind) -> Self {
        Stmt { kind, span: None }
    }
}

impl Stmt {
    pub fn at(kind: StmtKind, span: Span) -> Self {
        Stmt { kind, span: Some(span) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    CBlock(CBlock),
    ForAll(ForAll),
    For { var: String, iter: Expr, body: Block },
    While { cond: Expr, body: Block },
    /// An empty `els` means there is no else branch.
    If { cond: Expr, then: Block, els: Block },
    Atomic { lock: Expr, locked: Block, failed: Option<Block> },
    Exclusive(Exclusive),
    SyncRunningThreads,
    Retry(Expr),
    Respawn(Expr),
    ReduceAndReturn(Expr),
    Invoke(Invoke),
    Iterate(Iterate),
    Pipe(Pipe),
    /// `var = wl.pop(index)`
    WlPop { var: String, index: Expr },
    /// `wl.push(value)`
    WlPush(Expr),
}

impl StmtKind {
    /// Stable construct name, used by diagnostics and the canonical form.
    pub fn construct_name(&self) -> &'static str {
        match self {
            StmtKind::CBlock(_) => "CBlock",
            StmtKind::ForAll(_) => "ForAll",
            StmtKind::For { .. } => "For",
            StmtKind::While { .. } => "While",
            StmtKind::If { .. } => "If",
            StmtKind::Atomic { .. } => "Atomic",
            StmtKind::Exclusive(_) => "Exclusive",
            StmtKind::SyncRunningThreads => "SyncRunningThreads",
            StmtKind::Retry(_) => "Retry",
            StmtKind::Respawn(_) => "Respawn",
            StmtKind::ReduceAndReturn(_) => "ReduceAndReturn",
            StmtKind::Invoke(_) => "Invoke",
            StmtKind::Iterate(_) => "Iterate",
            StmtKind::Pipe(_) => "Pipe",
            StmtKind::WlPop { .. } => "WlPop",
            StmtKind::WlPush(_) => "WlPush",
        }
    }

    pub fn is_orchestration(&self) -> bool {
        matches!(self, StmtKind::Invoke(_) | StmtKind::Iterate(_) | StmtKind::Pipe(_))
    }

    /// Constructs only a plain kernel may use.
    pub fn is_kernel_construct(&self) -> bool {
        matches!(
            self,
            StmtKind::Atomic { .. }
                | StmtKind::Exclusive(_)
                | StmtKind::Retry(_)
                | StmtKind::Respawn(_)
                | StmtKind::ReduceAndReturn(_)
                | StmtKind::WlPop { .. }
                | StmtKind::WlPush(_)
        )
    }

    /// Child statement sequences in source order.
    pub fn children(&self) -> Vec<&Block> {
        match self {
            StmtKind::ForAll(f) => vec![&f.body],
            StmtKind::For { body, .. } | StmtKind::While { body, .. } => vec![body],
            StmtKind::If { then, els, .. } => vec![then, els],
            StmtKind::Atomic { locked, failed, .. } => {
                let mut v = vec![locked];
                v.extend(failed.iter());
                v
            }
            StmtKind::Exclusive(x) => {
                let mut v = vec![&x.locked];
                v.extend(x.failed.iter());
                v
            }
            StmtKind::Iterate(it) => vec![&it.between_rounds],
            StmtKind::Pipe(p) => vec![&p.body],
            StmtKind::CBlock(_)
            | StmtKind::SyncRunningThreads
            | StmtKind::Retry(_)
            | StmtKind::Respawn(_)
            | StmtKind::ReduceAndReturn(_)
            | StmtKind::Invoke(_)
            | StmtKind::WlPop { .. }
            | StmtKind::WlPush(_) => Vec::new(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Block> {
        match self {
            StmtKind::ForAll(f) => vec![&mut f.body],
            StmtKind::For { body, .. } | StmtKind::While { body, .. } => vec![body],
            StmtKind::If { then, els, .. } => vec![then, els],
            StmtKind::Atomic { locked, failed, .. } => {
                let mut v = vec![locked];
                v.extend(failed.iter_mut());
                v
            }
            StmtKind::Exclusive(x) => {
                let mut v = vec![&mut x.locked];
                v.extend(x.failed.iter_mut());
                v
            }
            StmtKind::Iterate(it) => vec![&mut it.between_rounds],
            StmtKind::Pipe(p) => vec![&mut p.body],
            StmtKind::CBlock(_)
            | StmtKind::SyncRunningThreads
            | StmtKind::Retry(_)
            | StmtKind::Respawn(_)
            | StmtKind::ReduceAndReturn(_)
            | StmtKind::Invoke(_)
            | StmtKind::WlPop { .. }
            | StmtKind::WlPush(_) => Vec::new(),
        }
    }
}

/// Operator code. `code` is either canonical operator-language text (one or
/// more simple statements) or opaque C passed through by code generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CBlock {
    pub code: String,
    pub reads: Vec<String>,
    pub writes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mapping {
    #[default]
    Consecutive,
    Blocked,
}

impl Mapping {
    pub fn as_str(self) -> &'static str {
        match self {
            Mapping::Consecutive => "consecutive",
            Mapping::Blocked => "blocked",
        }
    }

    pub fn parse(s: &str) -> Option<Mapping> {
        match s {
            "consecutive" => Some(Mapping::Consecutive),
            "blocked" => Some(Mapping::Blocked),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForAll {
    pub var: String,
    pub iter: Expr,
    pub body: Block,
    pub mapping: Mapping,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LockSource {
    /// The first `count` entries of an array of lock indices.
    Array(Expr),
    /// An iterator yielding lock indices.
    ArrayIterator(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exclusive {
    pub object: Expr,
    pub count: Expr,
    pub locks: LockSource,
    pub locked: Block,
    pub failed: Option<Block>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reduction {
    Any,
    All,
}

impl Reduction {
    pub fn as_str(self) -> &'static str {
        match self {
            Reduction::Any => "Any",
            Reduction::All => "All",
        }
    }

    pub fn identity(self) -> bool {
        matches!(self, Reduction::All)
    }

    pub fn fold(self, acc: bool, v: bool) -> bool {
        match self {
            Reduction::Any => acc || v,
            Reduction::All => acc && v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invoke {
    pub kernel: String,
    pub args: Vec<Expr>,
    pub reduction: Option<Reduction>,
    /// Host variable receiving the reduced return value.
    pub result: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondKind {
    While,
    Until,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combiner {
    And,
    Or,
}

impl Combiner {
    pub fn as_str(self) -> &'static str {
        match self {
            Combiner::And => "And",
            Combiner::Or => "Or",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub kernel: String,
    pub args: Vec<Expr>,
    pub cond: Option<(CondKind, Reduction)>,
    pub initial: Option<WorklistInit>,
    /// Exit condition combined with the empty-worklist test.
    pub extra_cond: Option<(Expr, Combiner)>,
    pub between_rounds: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub once: bool,
    pub body: Block,
    pub wlinit: Option<WorklistInit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorklistInit {
    /// Capacity of each worklist; `None` leaves it to the runtime default.
    pub size: Option<Expr>,
    pub source: WorklistSource,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorklistSource {
    Scalars(Vec<Expr>),
    FromArray { array: Expr, len: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinaryOp> {
        Some(match s {
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "%" => BinaryOp::Rem,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "&&" => BinaryOp::And,
            "||" => BinaryOp::Or,
            _ => return None,
        })
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub const ALL: [BinaryOp; 13] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Rem,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::And,
        BinaryOp::Or,
    ];
}

/// Name of the implicit worklist object.
pub const WORKLIST: &str = "wl";
/// Builtin "infinity" constant.
pub const INF: &str = "INF";

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Field(Box<Expr>, String),
    Call(String, Vec<Expr>),
    Method(Box<Expr>, String, Vec<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn index(base: Expr, idx: Expr) -> Expr {
        Expr::Index(Box::new(base), Box::new(idx))
    }

    pub fn field(base: Expr, name: impl Into<String>) -> Expr {
        Expr::Field(Box::new(base), name.into())
    }

    pub fn method(recv: Expr, name: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::Method(Box::new(recv), name.into(), args)
    }

    /// True for the bare worklist object `wl`.
    pub fn is_worklist(&self) -> bool {
        matches!(self, Expr::Var(v) if v == WORKLIST)
    }

    /// Calls `f` on every variable name referenced by this expression.
    pub fn visit_vars(&self, f: &mut impl FnMut(&str)) {
        match self {
            Expr::Var(v) => f(v),
            Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Str(_) => {}
            Expr::Unary(_, e) | Expr::Field(e, _) => e.visit_vars(f),
            Expr::Binary(_, a, b) | Expr::Index(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit_vars(f)),
            Expr::Method(r, _, args) => {
                r.visit_vars(f);
                args.iter().for_each(|a| a.visit_vars(f));
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 7,
            Expr::Int(v) if *v < 0 => 7,
            Expr::Float(v) if v.is_sign_negative() => 7,
            _ => 8,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Int(v) => write!(f, "{v}")?,
            Expr::Float(v) => write!(f, "{v:?}")?,
            Expr::Bool(v) => write!(f, "{v}")?,
            Expr::Str(s) => write_quoted(f, s)?,
            Expr::Var(v) => f.write_str(v)?,
            Expr::Unary(op, e) => {
                f.write_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Not => "!",
                })?;
                // `-5` reads back as a literal and `--` as a decrement.
                let wrap = *op == UnaryOp::Neg
                    && matches!(**e, Expr::Int(_) | Expr::Float(_) | Expr::Unary(UnaryOp::Neg, _));
                e.fmt_prec(f, if wrap { 9 } else { 7 })?;
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                a.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, p + 1)?;
            }
            Expr::Index(a, i) => {
                a.fmt_prec(f, 8)?;
                write!(f, "[{i}]")?;
            }
            Expr::Field(a, name) => {
                a.fmt_prec(f, 8)?;
                write!(f, ".{name}")?;
            }
            Expr::Call(name, args) => {
                write!(f, "{name}(")?;
                write_args(f, args)?;
                f.write_str(")")?;
            }
            Expr::Method(r, name, args) => {
                r.fmt_prec(f, 8)?;
                write!(f, ".{name}(")?;
                write_args(f, args)?;
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Expr]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

/// Writes `s` as a double-quoted literal with C escapes.
pub fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

pub fn quoted(s: &str) -> String {
    let mut out = String::new();
    write_quoted(&mut out, s).expect("writing to a String cannot fail");
    out
}

/// Canonical, C-like surface form with minimal parentheses.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Depth-first pre-order walk over every statement in `block`.
pub fn walk_block<'a>(block: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for s in block {
        f(s);
        for child in s.kind.children() {
            walk_block(child, f);
        }
    }
}

pub fn walk_block_mut(block: &mut [Stmt], f: &mut impl FnMut(&mut Stmt)) {
    for s in block {
        f(s);
        for child in s.kind.children_mut() {
            walk_block_mut(child, f);
        }
    }
}

/// Names of kernels invoked (by Invoke or Iterate) anywhere under `block`,
/// in first-occurrence order.
pub fn invoked_kernels(block: &[Stmt]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    walk_block(block, &mut |s| {
        let name = match &s.kind {
            StmtKind::Invoke(inv) => &inv.kernel,
            StmtKind::Iterate(it) => &it.kernel,
            _ => return,
        };
        if !out.iter().any(|n| n == name) {
            out.push(name.clone());
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_uses_minimal_parens() {
        let e = Expr::binary(
            BinaryOp::Mul,
            Expr::binary(BinaryOp::Add, Expr::var("a"), Expr::Int(1)),
            Expr::var("b"),
        );
        assert_eq!(e.to_string(), "(a + 1) * b");
        let e = Expr::binary(
            BinaryOp::Sub,
            Expr::var("a"),
            Expr::binary(BinaryOp::Sub, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = Expr::field(Expr::field(Expr::var("e"), "dst"), "level");
        assert_eq!(e.to_string(), "e.dst.level");
        let e = Expr::Unary(UnaryOp::Neg, Box::new(Expr::Unary(UnaryOp::Neg, Box::new(Expr::Int(1)))));
        assert_eq!(e.to_string(), "-(-(1))");
        let e = Expr::field(Expr::Int(-5), "x");
        assert_eq!(e.to_string(), "(-5).x");
    }

    #[test]
    fn spans_do_not_affect_equality() {
        let a = Stmt::at(StmtKind::SyncRunningThreads, Span::new(1, 1, 4));
        let b = Stmt::from(StmtKind::SyncRunningThreads);
        assert_eq!(a, b);
    }

    #[test]
    fn quoting_escapes() {
        assert_eq!(quoted("a\"b\\c\n"), "\"a\\\"b\\\\c\\n\"");
    }
}
