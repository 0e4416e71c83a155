//! CUDA emission. Every kernel is mangled to `irgl_<name>`, every generated
//! helper starts with `irgl_` or `IRGL_`, and user identifiers pass through
//! unchanged.
//!
//! Emission order: runtime (inline or `#include`), globals, device kernels,
//! plain kernels (each followed by its outlined variant, if any), control
//! kernels of outlined pipes, then host functions.

mod cexpr;
mod host;
mod kernel;
pub mod runtime;

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::op::{parse_operator_code, SimpleStmt};
use crate::plan::{outermost_pipes, ModulePlan, OutlinedPipe};
use crate::sema::Analysis;

pub use cexpr::{c_expr, CEnv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitOptions {
    /// Compile eligible outermost pipes into control kernels.
    pub outline: bool,
    /// Paste the runtime into the output instead of including its header.
    pub runtime_inline: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions { outline: false, runtime_inline: true }
    }
}

pub struct EmitContext<'a> {
    pub module: &'a Module,
    pub analysis: &'a Analysis,
    pub plan: &'a ModulePlan,
    pub options: EmitOptions,
}

impl<'a> EmitContext<'a> {
    /// The outlined pipe at `index` of `host`, when outlining is on.
    pub(crate) fn outlined(&self, host: &str, index: usize) -> Option<&'a OutlinedPipe> {
        if !self.options.outline {
            return None;
        }
        self.plan.outlined_pipe(host, index)
    }

    fn is_outlined_member(&self, kernel: &str) -> bool {
        self.options.outline && self.plan.outlined.iter().any(|p| p.members.iter().any(|m| m == kernel))
    }

    pub(crate) fn cenv(&self) -> CEnv {
        CEnv {
            device_kernels: self
                .module
                .kernels
                .iter()
                .filter(|k| k.kind == KernelKind::Device)
                .map(|k| k.name.clone())
                .collect(),
        }
    }
}

/// Indented line writer.
#[derive(Default)]
pub(crate) struct Out {
    pub text: String,
    pub depth: usize,
}

impl Out {
    pub fn line(&mut self, s: impl AsRef<str>) {
        let s = s.as_ref();
        if !s.is_empty() {
            for _ in 0..self.depth {
                self.text.push_str("  ");
            }
            self.text.push_str(s);
        }
        self.text.push('\n');
    }

    pub fn open(&mut self, s: impl AsRef<str>) {
        self.line(s);
        self.depth += 1;
    }

    pub fn close(&mut self, s: impl AsRef<str>) {
        self.depth -= 1;
        self.line(s);
    }
}

/// Result of [`compile`].
#[derive(Debug, Clone)]
pub struct CompileOutput {
    pub cuda: String,
    pub plan: ModulePlan,
    /// Checker and planner warnings, in that order.
    pub warnings: Vec<crate::diag::Diagnostic>,
}

/// Demotes host ForAlls, checks, plans and emits a parsed module.
pub fn compile(
    m: &Module,
    sema: &crate::sema::SemaOptions,
    config: &crate::plan::PlanConfig,
    options: EmitOptions,
) -> Result<CompileOutput, Vec<crate::diag::Diagnostic>> {
    let m = crate::sema::host_forall_demotion(m);
    let analysis = crate::sema::analyze(&m, sema)?;
    let plan = crate::plan::plan_module(&m, &analysis, config)?;
    let ctx = EmitContext { module: &m, analysis: &analysis, plan: &plan, options };
    let cuda = emit_module(&ctx);
    let mut warnings = analysis.warnings.clone();
    warnings.extend(plan.warnings.iter().cloned());
    Ok(CompileOutput { cuda, plan, warnings })
}

/// Whole-module CUDA text. Deterministic in its inputs.
pub fn emit_module(ctx: &EmitContext) -> String {
    let m = ctx.module;
    let mut out = Out::default();
    out.line(format!("// Generated by irglc from module `{}`.", m.name));
    if ctx.options.runtime_inline {
        out.text.push_str(runtime::RUNTIME);
    } else {
        out.line(format!("#include \"{}\"", runtime::HEADER_NAME));
    }

    let globals = global_declarations(m);
    if !globals.is_empty() {
        out.line("");
        for g in globals {
            out.line(g);
        }
    }

    let devices: Vec<&Kernel> = m.kernels.iter().filter(|k| k.kind == KernelKind::Device).collect();
    if !devices.is_empty() {
        out.line("");
        for k in &devices {
            out.line(format!("__device__ void irgl_{}({});", k.name, user_params(m, k).join(", ")));
        }
    }
    for k in &devices {
        out.line("");
        kernel::emit_device_function(ctx, k, &mut out);
    }
    for k in m.kernels.iter().filter(|k| k.kind == KernelKind::Plain) {
        out.line("");
        kernel::emit_kernel(ctx, k, kernel::Variant::Global, &mut out);
        if ctx.is_outlined_member(&k.name) {
            out.line("");
            kernel::emit_kernel(ctx, k, kernel::Variant::Outlined, &mut out);
        }
    }
    for k in m.kernels.iter().filter(|k| k.is_host()) {
        for (i, _) in outermost_pipes(&k.body).iter().enumerate() {
            if let Some(p) = ctx.outlined(&k.name, i) {
                out.line("");
                host::emit_control_kernel(ctx, k, i, p, &mut out);
            }
        }
    }
    for k in m.kernels.iter().filter(|k| k.is_host()) {
        out.line("");
        host::emit_host_function(ctx, k, &mut out);
    }
    out.text
}

/// `__managed__` declarations for module globals, then for property arrays
/// and indexed names the program uses without declaring.
fn global_declarations(m: &Module) -> Vec<String> {
    let mut lines = Vec::new();
    for d in &m.decls {
        let ty = cexpr::ctype(d.ty);
        match (&d.init, d.ty) {
            (Some(e), TypeTag::Any | TypeTag::Int | TypeTag::Float | TypeTag::Bool) => {
                lines.push(format!("__managed__ {ty} {} = {};", d.name, c_expr(e)))
            }
            _ => lines.push(format!("__managed__ {ty} {};", d.name)),
        }
    }
    for a in implicit_arrays(m) {
        lines.push(format!("__managed__ irgl::Array {a};"));
    }
    lines
}

/// Arrays used (as properties or by indexing) but declared nowhere, in
/// first-use order. They become zero-filled globals.
pub(crate) fn implicit_arrays(m: &Module) -> Vec<String> {
    let declared: BTreeSet<&String> = m.imported_names.iter().chain(m.decls.iter().map(|d| &d.name)).collect();
    let mut arrays = Vec::new();
    for k in &m.kernels {
        let mut local: BTreeSet<String> = k.params.iter().map(|p| p.name.clone()).collect();
        local.extend(hoisted_locals(m, k).into_iter().map(|(n, _)| n));
        local.extend(loop_vars(&k.body));
        for e in kernel_exprs(&k.body) {
            cexpr::property_names(&e, &mut arrays);
            indexed_names(&e, &local, &mut arrays);
        }
    }
    arrays.retain(|a| !declared.contains(a) && a != WORKLIST);
    arrays
}

fn indexed_names(e: &Expr, local: &BTreeSet<String>, out: &mut Vec<String>) {
    if let Expr::Index(b, _) = e {
        if let Expr::Var(v) = &**b {
            if !local.contains(v) && !out.contains(v) {
                out.push(v.clone());
            }
        }
    }
    for c in subexprs(e) {
        indexed_names(c, local, out);
    }
}

fn subexprs(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => vec![],
        Expr::Unary(_, a) | Expr::Field(a, _) => vec![a],
        Expr::Binary(_, a, b) | Expr::Index(a, b) => vec![a, b],
        Expr::Call(_, args) => args.iter().collect(),
        Expr::Method(r, _, args) => std::iter::once(&**r).chain(args.iter()).collect(),
    }
}

/// Every expression of a block, including those inside canonical operator
/// code, as owned trees.
pub(crate) fn kernel_exprs(body: &[Stmt]) -> Vec<Expr> {
    let mut out = Vec::new();
    walk_block(body, &mut |s| match &s.kind {
        StmtKind::CBlock(cb) => {
            for st in parse_operator_code(&cb.code).unwrap_or_default() {
                match st {
                    SimpleStmt::Assign { target, value, .. } => {
                        out.push(target);
                        out.extend(value);
                    }
                    SimpleStmt::Declare { init, .. } => out.extend(init),
                    SimpleStmt::Call(e) => out.push(e),
                }
            }
        }
        StmtKind::ForAll(f) => out.push(f.iter.clone()),
        StmtKind::For { iter, .. } => out.push(iter.clone()),
        StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => out.push(cond.clone()),
        StmtKind::Atomic { lock, .. } => out.push(lock.clone()),
        StmtKind::Exclusive(x) => {
            out.push(x.object.clone());
            out.push(x.count.clone());
            match &x.locks {
                LockSource::Array(e) | LockSource::ArrayIterator(e) => out.push(e.clone()),
            }
        }
        StmtKind::Retry(e) | StmtKind::Respawn(e) | StmtKind::ReduceAndReturn(e) | StmtKind::WlPush(e) => {
            out.push(e.clone())
        }
        StmtKind::WlPop { index, .. } => out.push(index.clone()),
        StmtKind::Invoke(i) => out.extend(i.args.iter().cloned()),
        StmtKind::Iterate(it) => {
            out.extend(it.args.iter().cloned());
            out.extend(it.extra_cond.iter().map(|(e, _)| e.clone()));
            out.extend(it.initial.iter().flat_map(init_exprs));
        }
        StmtKind::Pipe(p) => out.extend(p.wlinit.iter().flat_map(init_exprs)),
        StmtKind::SyncRunningThreads => {}
    });
    out
}

fn init_exprs(w: &WorklistInit) -> Vec<Expr> {
    let mut v: Vec<Expr> = w.size.iter().cloned().collect();
    match &w.source {
        WorklistSource::Scalars(xs) => v.extend(xs.iter().cloned()),
        WorklistSource::FromArray { array, len } => {
            v.push(array.clone());
            v.push(len.clone());
        }
    }
    v
}

fn loop_vars(body: &[Stmt]) -> Vec<String> {
    let mut out = Vec::new();
    walk_block(body, &mut |s| match &s.kind {
        StmtKind::ForAll(f) => out.push(f.var.clone()),
        StmtKind::For { var, .. } => out.push(var.clone()),
        _ => {}
    });
    out
}

/// Type of a parameter. Untyped parameters take the type of a same-named
/// global, else whatever their uses imply.
pub(crate) fn param_type(m: &Module, k: &Kernel, p: &Param) -> TypeTag {
    if p.ty != TypeTag::Any {
        return p.ty;
    }
    if let Some(d) = m.decls.iter().find(|d| d.name == p.name) {
        return d.ty;
    }
    let mut ty = TypeTag::Any;
    for e in kernel_exprs(&k.body) {
        infer_use(&e, &p.name, &mut ty);
    }
    ty
}

fn infer_use(e: &Expr, name: &str, ty: &mut TypeTag) {
    match e {
        Expr::Method(r, m, _) if matches!(&**r, Expr::Var(v) if v == name) => {
            if matches!(m.as_str(), "edges" | "nodes" | "nnodes" | "nedges") {
                *ty = TypeTag::Graph;
            } else if m == "len" {
                *ty = TypeTag::Array;
            }
        }
        Expr::Index(b, _) if matches!(&**b, Expr::Var(v) if v == name) => *ty = TypeTag::Array,
        _ => {}
    }
    for c in subexprs(e) {
        infer_use(c, name, ty);
    }
}

pub(crate) fn user_params(m: &Module, k: &Kernel) -> Vec<String> {
    k.params.iter().map(|p| format!("{} {}", cexpr::ctype(param_type(m, k, p)), p.name)).collect()
}

/// Name → type of everything visible in a kernel body besides its locals.
pub(crate) fn scope_types(m: &Module, k: &Kernel) -> BTreeMap<String, TypeTag> {
    let mut t: BTreeMap<String, TypeTag> = m.decls.iter().map(|d| (d.name.clone(), d.ty)).collect();
    for p in &k.params {
        t.insert(p.name.clone(), param_type(m, k, p));
    }
    t
}

/// Locals a kernel body assigns or declares without them being globals or
/// parameters, in order of first appearance. They are declared once at the
/// top of the function so that `goto`-based exits never skip an
/// initialization.
pub(crate) fn hoisted_locals(m: &Module, k: &Kernel) -> Vec<(String, TypeTag)> {
    let mut known: BTreeSet<String> = m.decls.iter().map(|d| d.name.clone()).collect();
    known.extend(m.imported_names.iter().cloned());
    known.extend(k.params.iter().map(|p| p.name.clone()));
    known.insert(INF.to_string());
    known.insert(WORKLIST.to_string());
    let mut out: Vec<(String, TypeTag)> = Vec::new();
    let add = |name: &str, ty: TypeTag, out: &mut Vec<(String, TypeTag)>| {
        if !known.contains(name) && !out.iter().any(|(n, _)| n == name) {
            out.push((name.to_string(), ty));
        }
    };
    walk_block(&k.body, &mut |s| match &s.kind {
        StmtKind::CBlock(cb) => {
            for st in parse_operator_code(&cb.code).unwrap_or_default() {
                match st {
                    SimpleStmt::Assign { target: Expr::Var(v), value: Some(Expr::Bool(_)), .. } => {
                        add(&v, TypeTag::Bool, &mut out)
                    }
                    SimpleStmt::Assign { target: Expr::Var(v), .. } => add(&v, TypeTag::Any, &mut out),
                    SimpleStmt::Declare { ty, name, .. } => add(&name, ty, &mut out),
                    _ => {}
                }
            }
        }
        StmtKind::WlPop { var, .. } => add(var, TypeTag::Int, &mut out),
        StmtKind::Invoke(Invoke { result: Some(r), .. }) => add(r, TypeTag::Bool, &mut out),
        _ => {}
    });
    out
}

/// How a kernel is invoked across the module: whether some invocation uses
/// no reduction, and which reductions are requested.
pub(crate) fn invocation_modes(m: &Module, name: &str) -> (bool, BTreeSet<Reduction>) {
    let mut bare = false;
    let mut reds = BTreeSet::new();
    for k in &m.kernels {
        walk_block(&k.body, &mut |s| match &s.kind {
            StmtKind::Invoke(i) if i.kernel == name => match i.reduction {
                Some(r) => {
                    reds.insert(r);
                }
                None => bare = true,
            },
            StmtKind::Iterate(it) if it.kernel == name => match it.cond {
                Some((_, r)) => {
                    reds.insert(r);
                }
                None => bare = true,
            },
            _ => {}
        });
    }
    (bare || reds.is_empty(), reds)
}

pub(crate) fn red_macro(r: Option<Reduction>) -> &'static str {
    match r {
        None => "IRGL_RED_NONE",
        Some(Reduction::Any) => "IRGL_RED_ANY",
        Some(Reduction::All) => "IRGL_RED_ALL",
    }
}

/// Wraps `s` in parentheses unless it has no spaces (a name, literal or
/// simple call).
pub(crate) fn paren(s: &str) -> String {
    if !s.contains(' ') {
        s.to_string()
    } else {
        format!("({s})")
    }
}
