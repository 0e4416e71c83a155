//! Static rules, kernel classification and block-size constraints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ast::*;
use crate::diag::{has_errors, rules, Diagnostic};
use crate::op::{as_simple_statement, find_control_transfer};

/// Admissible thread-block sizes of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockConstraint {
    /// Any size in `[1, 1024]`.
    Elastic,
    /// Any size in `[1, max]`.
    Shrinkable(u32),
    /// Exactly this size.
    Fixed(u32),
}

impl BlockConstraint {
    /// Inclusive interval `[lo, hi]` of admissible sizes.
    pub fn domain(self) -> (u32, u32) {
        match self {
            BlockConstraint::Elastic => (1, MAX_BLOCK_SIZE),
            BlockConstraint::Shrinkable(m) => (1, m.min(MAX_BLOCK_SIZE)),
            BlockConstraint::Fixed(n) => (n, n),
        }
    }

    pub fn admits(self, size: u32) -> bool {
        let (lo, hi) = self.domain();
        (lo..=hi).contains(&size)
    }
}

impl fmt::Display for BlockConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockConstraint::Elastic => write!(f, "Elastic"),
            BlockConstraint::Shrinkable(m) => write!(f, "Shrinkable({m})"),
            BlockConstraint::Fixed(n) => write!(f, "Fixed({n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelInfo {
    pub kernel: String,
    pub kind: KernelKind,
    pub uses_pop: bool,
    pub uses_push: bool,
    /// Retry or Respawn.
    pub uses_retry: bool,
    pub uses_sync: bool,
    pub uses_exclusive: bool,
    pub uses_reduce: bool,
    /// Reads, writes or iterates over `wl` in any way.
    pub uses_worklist: bool,
    pub reductions_required: BTreeSet<Reduction>,
    pub block_constraint: BlockConstraint,
}

impl KernelInfo {
    /// Kernels whose launches need every thread resident at once.
    pub fn needs_global_barrier(&self) -> bool {
        self.uses_sync || self.uses_exclusive
    }
}

#[derive(Debug, Clone, Default)]
pub struct SemaOptions {
    /// Kernels compiled against a runtime specialized for one block size.
    pub fixed_block_sizes: BTreeMap<String, u32>,
}

/// Result of a successful analysis. `warnings` never contains errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub infos: BTreeMap<String, KernelInfo>,
    pub warnings: Vec<Diagnostic>,
}

/// Annotation keys whose value fixes the block size.
pub const FIXED_SIZE_ANNOTATIONS: &[&str] = &["fixed_block_size", "cooperative_conversion", "nested_parallelism"];

/// Checks every static rule and classifies every kernel. Diagnostics come in
/// source order; on any error the whole list (errors and warnings) is returned.
pub fn analyze(m: &Module, opts: &SemaOptions) -> Result<Analysis, Vec<Diagnostic>> {
    let file = m.origin.clone().unwrap_or_default();
    let mut diags = Vec::new();
    let mut infos = BTreeMap::new();
    for k in &m.kernels {
        let mut info = usage(k);
        match block_constraint_of(k, opts) {
            Ok(c) => info.block_constraint = c,
            Err(ds) => diags.extend(ds),
        }
        check_annotations(k, &mut diags);
        infos.insert(k.name.clone(), info);
    }
    // Reductions named by call sites.
    for k in &m.kernels {
        walk_block(&k.body, &mut |s| {
            let (target, red) = match &s.kind {
                StmtKind::Invoke(inv) => (&inv.kernel, inv.reduction),
                StmtKind::Iterate(it) => (&it.kernel, it.cond.map(|c| c.1)),
                _ => return,
            };
            if let (Some(info), Some(r)) = (infos.get_mut(target), red) {
                info.reductions_required.insert(r);
            }
        });
    }
    for k in &m.kernels {
        let mut cx = Checker { m, infos: &infos, kernel: k, diags: &mut diags };
        let scope = Scope::default();
        cx.block(&k.body, scope);
    }
    for d in &mut diags {
        if d.file.is_empty() {
            d.file = file.clone();
        }
    }
    diags.sort_by_key(|d| (d.span.line, d.span.column));
    if has_errors(&diags) {
        Err(diags)
    } else {
        Ok(Analysis { infos, warnings: diags })
    }
}

fn usage(k: &Kernel) -> KernelInfo {
    let mut info = KernelInfo {
        kernel: k.name.clone(),
        kind: k.kind,
        uses_pop: false,
        uses_push: false,
        uses_retry: false,
        uses_sync: false,
        uses_exclusive: false,
        uses_reduce: false,
        uses_worklist: false,
        reductions_required: BTreeSet::new(),
        block_constraint: BlockConstraint::Elastic,
    };
    let mut mentions_wl = false;
    let mut note = |e: &Expr| {
        e.visit_vars(&mut |v| {
            if v == WORKLIST {
                mentions_wl = true;
            }
        })
    };
    walk_block(&k.body, &mut |s| match &s.kind {
        StmtKind::WlPop { index, .. } => {
            info.uses_pop = true;
            note(index);
        }
        StmtKind::WlPush(e) => {
            info.uses_push = true;
            note(e);
        }
        StmtKind::Retry(e) | StmtKind::Respawn(e) => {
            info.uses_retry = true;
            note(e);
        }
        StmtKind::SyncRunningThreads => info.uses_sync = true,
        StmtKind::Exclusive(_) => info.uses_exclusive = true,
        StmtKind::ReduceAndReturn(_) => info.uses_reduce = true,
        StmtKind::ForAll(f) => note(&f.iter),
        StmtKind::For { iter, .. } => note(iter),
        StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => note(cond),
        _ => {}
    });
    info.uses_worklist = k.kind == KernelKind::Plain
        && (info.uses_pop || info.uses_push || info.uses_retry || mentions_wl);
    info
}

fn fixed_size_annotation(k: &Kernel) -> Option<(&'static str, Option<u32>)> {
    FIXED_SIZE_ANNOTATIONS.iter().find_map(|key| {
        k.annotations.get(*key).map(|v| (*key, v.parse::<u32>().ok().filter(|n| (1..=MAX_BLOCK_SIZE).contains(n))))
    })
}

fn check_annotations(k: &Kernel, diags: &mut Vec<Diagnostic>) {
    let span = k.span.unwrap_or_default();
    for key in FIXED_SIZE_ANNOTATIONS {
        if let Some(v) = k.annotations.get(*key) {
            if !matches!(v.parse::<u32>(), Ok(n) if (1..=MAX_BLOCK_SIZE).contains(&n)) {
                diags.push(Diagnostic::error(
                    rules::BAD_ANNOTATION,
                    span,
                    format!("`@{key}` needs a block size in [1, 1024], got `{v}`"),
                ));
            }
        }
    }
    if let Some(v) = k.annotations.get("mapping") {
        if Mapping::parse(v).is_none() {
            diags.push(Diagnostic::error(
                rules::BAD_ANNOTATION,
                span,
                format!("`@mapping` must be consecutive or blocked, got `{v}`"),
            ));
        }
    }
    if let Some(lb) = k.launch_bounds {
        if !(1..=MAX_BLOCK_SIZE).contains(&lb.max_threads) || lb.min_blocks == Some(0) {
            diags.push(Diagnostic::error(
                rules::LAUNCH_BOUNDS_RANGE,
                span,
                format!(
                    "launch bounds of `{}` must have maxthreadsperblock in [1, 1024] and positive minblocks",
                    k.name
                ),
            ));
        }
    }
}

/// The block-size constraint of a kernel. A fixed size comes from the
/// options or from one of the fixed-size annotations; launch bounds give an
/// upper bound; otherwise the kernel is elastic.
pub fn block_constraint_of(k: &Kernel, opts: &SemaOptions) -> Result<BlockConstraint, Vec<Diagnostic>> {
    let span = k.span.unwrap_or_default();
    let mut fixed: Option<(String, u32)> = None;
    let mut diags = Vec::new();
    if let Some(&n) = opts.fixed_block_sizes.get(&k.name) {
        fixed = Some(("the specialized runtime".to_string(), n));
    }
    if let Some((key, Some(n))) = fixed_size_annotation(k) {
        match &fixed {
            Some((src, m)) if *m != n => diags.push(Diagnostic::error(
                rules::BAD_ANNOTATION,
                span,
                format!("`@{key}({n})` contradicts block size {m} required by {src}"),
            )),
            _ => fixed = Some((format!("`@{key}`"), n)),
        }
    }
    let bound = k.launch_bounds.map(|lb| lb.max_threads).filter(|m| (1..=MAX_BLOCK_SIZE).contains(m));
    let c = match (fixed, bound) {
        (Some((src, n)), Some(m)) if n > m => {
            diags.push(Diagnostic::error(
                rules::LAUNCH_BOUNDS_BELOW_FIXED,
                span,
                format!("kernel `{}` needs block size {n} ({src}) but its launch bounds allow at most {m}", k.name),
            ));
            BlockConstraint::Fixed(n)
        }
        (Some((_, n)), _) => BlockConstraint::Fixed(n),
        (None, Some(m)) => BlockConstraint::Shrinkable(m),
        (None, None) => BlockConstraint::Elastic,
    };
    if diags.is_empty() {
        Ok(c)
    } else {
        Err(diags)
    }
}

/// Where a statement sits.
#[derive(Debug, Clone, Copy, Default)]
struct Scope {
    forall_depth: usize,
    /// Directly in the body of an outermost ForAll.
    outer_forall_body: bool,
    in_exclusive: bool,
    in_critical: bool,
    /// Under a Pipe or Iterate (host kernels).
    in_pipe: bool,
}

struct Checker<'a> {
    m: &'a Module,
    infos: &'a BTreeMap<String, KernelInfo>,
    kernel: &'a Kernel,
    diags: &'a mut Vec<Diagnostic>,
}

impl Checker<'_> {
    fn err(&mut self, rule: &'static str, span: Span, msg: String) {
        self.diags.push(Diagnostic::error(rule, span, msg));
    }

    fn block(&mut self, b: &[Stmt], scope: Scope) {
        for s in b {
            self.stmt(s, scope);
        }
    }

    fn stmt(&mut self, s: &Stmt, scope: Scope) {
        let span = s.span.or(self.kernel.span).unwrap_or_default();
        let kind = self.kernel.kind;
        let name = s.kind.construct_name();
        if s.kind.is_orchestration() && kind != KernelKind::Host {
            self.err(
                rules::ORCHESTRATION_IN_NON_HOST,
                span,
                format!("{name} may only appear in a host kernel; `{}` is not one", self.kernel.name),
            );
        }
        let kernel_construct = s.kind.is_kernel_construct() || matches!(s.kind, StmtKind::SyncRunningThreads);
        if kernel_construct && kind == KernelKind::Host {
            self.err(
                rules::KERNEL_CONSTRUCT_IN_HOST,
                span,
                format!("{name} may not appear in host kernel `{}`", self.kernel.name),
            );
        }
        if (kernel_construct || matches!(s.kind, StmtKind::ForAll(_))) && kind == KernelKind::Device {
            self.err(
                rules::KERNEL_CONSTRUCT_IN_DEVICE,
                span,
                format!("{name} may not appear in device kernel `{}`", self.kernel.name),
            );
        }
        let inner = Scope { outer_forall_body: false, ..scope };
        match &s.kind {
            StmtKind::CBlock(b) => {
                if as_simple_statement(b).is_none() {
                    if let Some(word) = find_control_transfer(&b.code) {
                        self.err(
                            rules::CBLOCK_CONTROL_TRANSFER,
                            span,
                            format!("`{word}` in a code block breaks single-entry, single-exit control flow"),
                        );
                    }
                    if b.reads.is_empty() && b.writes.is_empty() {
                        self.diags.push(Diagnostic::warning(
                            rules::CBLOCK_MISSING_RW,
                            span,
                            "code block has no reads/writes annotation",
                        ));
                    }
                }
            }
            StmtKind::ForAll(f) => {
                let host = kind == KernelKind::Host;
                let outermost = scope.forall_depth == 0 && !host;
                let child = Scope {
                    forall_depth: scope.forall_depth + usize::from(!host),
                    outer_forall_body: outermost,
                    ..scope
                };
                self.block(&f.body, child);
            }
            StmtKind::Exclusive(x) => {
                if scope.in_exclusive {
                    self.err(rules::EXCLUSIVE_PLACEMENT, span, "Exclusive may not be nested".into());
                } else if !scope.outer_forall_body && kind == KernelKind::Plain {
                    self.err(
                        rules::EXCLUSIVE_PLACEMENT,
                        span,
                        "Exclusive must be placed directly in the body of the outermost ForAll".into(),
                    );
                }
                let child = Scope { in_exclusive: true, in_critical: true, ..inner };
                self.block(&x.locked, child);
                if let Some(f) = &x.failed {
                    self.block(f, Scope { in_exclusive: true, ..inner });
                }
            }
            StmtKind::Atomic { locked, failed, .. } => {
                self.block(locked, Scope { in_critical: true, ..inner });
                if let Some(f) = failed {
                    self.block(f, inner);
                }
            }
            StmtKind::ReduceAndReturn(_) if scope.in_critical => {
                self.err(
                    rules::REDUCE_IN_CRITICAL_SECTION,
                    span,
                    "ReduceAndReturn inside a critical section would leave its locks held".into(),
                );
            }
            StmtKind::Invoke(inv) => self.invoke(inv, span, scope),
            StmtKind::Iterate(it) => {
                self.iterate(it, span, scope);
                self.block(&it.between_rounds, Scope { in_pipe: true, ..inner });
            }
            StmtKind::Pipe(p) => self.block(&p.body, Scope { in_pipe: true, ..inner }),
            other => {
                for child in other.children() {
                    self.block(child, inner);
                }
            }
        }
    }

    /// Shared checks for the target of an Invoke or Iterate. Returns the
    /// target's info when it is a valid plain kernel.
    fn target(&mut self, kernel: &str, args: &[Expr], span: Span) -> Option<&KernelInfo> {
        let Some(target) = self.m.kernel(kernel) else {
            self.err(rules::UNKNOWN_KERNEL, span, format!("no kernel named `{kernel}`"));
            return None;
        };
        if target.kind != KernelKind::Plain {
            self.err(
                rules::INVOKE_NON_PLAIN,
                span,
                format!("`{kernel}` is a {} kernel and cannot be invoked", target.kind.as_str()),
            );
            return None;
        }
        if target.params.len() != args.len() {
            self.err(
                rules::ARITY_MISMATCH,
                span,
                format!("`{kernel}` takes {} argument(s), {} given", target.params.len(), args.len()),
            );
        }
        self.infos.get(kernel)
    }

    fn invoke(&mut self, inv: &Invoke, span: Span, scope: Scope) {
        let Some(info) = self.target(&inv.kernel, &inv.args, span).cloned() else {
            return;
        };
        if info.uses_worklist && !scope.in_pipe {
            self.err(
                rules::WORKLIST_INVOKE_OUTSIDE_PIPE,
                span,
                format!("`{}` uses the worklist and must be invoked inside a Pipe or Iterate", inv.kernel),
            );
        }
        if let Some(r) = inv.reduction {
            if !info.uses_reduce {
                self.err(
                    rules::REDUCTION_WITHOUT_RETURN,
                    span,
                    format!("{}(Invoke {}) needs a kernel that uses ReduceAndReturn", r.as_str(), inv.kernel),
                );
            }
        }
    }

    fn iterate(&mut self, it: &Iterate, span: Span, scope: Scope) {
        if it.initial.is_some() && scope.in_pipe {
            self.err(
                rules::ITERATE_INITIAL_IN_PIPE,
                span,
                "Iterate inside a Pipe uses the pipe's worklists and may not have an Initial clause".into(),
            );
        }
        let Some(info) = self.target(&it.kernel, &it.args, span).cloned() else {
            return;
        };
        if let Some((_, r)) = it.cond {
            if !info.uses_reduce {
                self.err(
                    rules::REDUCTION_WITHOUT_RETURN,
                    span,
                    format!("Iterate condition {} needs `{}` to use ReduceAndReturn", r.as_str(), it.kernel),
                );
            }
        }
        if !info.uses_worklist && it.cond.is_none() && it.extra_cond.is_none() {
            self.err(
                rules::ITERATE_WITHOUT_TERMINATION,
                span,
                format!("`{}` does not use the worklist, so this Iterate needs a While/Until or And/Or condition", it.kernel),
            );
        }
    }
}

/// Rewrites every ForAll inside a host kernel into a sequential For.
pub fn host_forall_demotion(m: &Module) -> Module {
    let mut out = m.clone();
    for k in out.kernels.iter_mut().filter(|k| k.is_host()) {
        walk_block_mut(&mut k.body, &mut |s| {
            if let StmtKind::ForAll(f) = &mut s.kind {
                let f = std::mem::replace(
                    f,
                    ForAll { var: String::new(), iter: Expr::Int(0), body: Vec::new(), mapping: Mapping::Consecutive },
                );
                s.kind = StmtKind::For { var: f.var, iter: f.iter, body: f.body };
            }
        });
    }
    out
}

/// Mapping of a ForAll: its own annotation when blocked, else the kernel's
/// `@mapping` annotation, else consecutive.
pub fn effective_mapping(k: &Kernel, f: &ForAll) -> Mapping {
    if f.mapping == Mapping::Blocked {
        return Mapping::Blocked;
    }
    k.annotations.get("mapping").and_then(|v| Mapping::parse(v)).unwrap_or(Mapping::Consecutive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn rules_of(src: &str) -> Vec<&'static str> {
        let m = parse_source(src, "t.irgl").unwrap();
        match analyze(&m, &SemaOptions::default()) {
            Ok(a) => a.warnings.iter().map(|d| d.rule_id).collect(),
            Err(d) => d.iter().map(|d| d.rule_id).collect(),
        }
    }

    #[test]
    fn host_atomic_is_rejected() {
        assert_eq!(rules_of("host Kernel h() { Atomic(l) { x = 1; } }"), vec![rules::KERNEL_CONSTRUCT_IN_HOST]);
    }

    #[test]
    fn exclusive_placement_paths() {
        let ok = "Kernel k() { ForAll(i In wl) { Exclusive(m, n, c) { } } }";
        assert!(rules_of(ok).is_empty());
        for bad in [
            "Kernel k() { ForAll(i In wl) { if (x) { Exclusive(m, n, c) { } } } }",
            "Kernel k() { Exclusive(m, n, c) { } }",
            "Kernel k() { ForAll(i In wl) { ForAll(j In a) { Exclusive(m, n, c) { } } } }",
            "Kernel k() { ForAll(i In wl) { Exclusive(m, n, c) { Exclusive(m, n, c) { } } } }",
        ] {
            assert_eq!(rules_of(bad), vec![rules::EXCLUSIVE_PLACEMENT], "{bad}");
        }
    }

    #[test]
    fn block_constraints() {
        let parse = |src: &str| parse_source(src, "t.irgl").unwrap().kernels.remove(0);
        let opts = SemaOptions::default();
        assert_eq!(block_constraint_of(&parse("Kernel k() { }"), &opts), Ok(BlockConstraint::Elastic));
        assert_eq!(
            block_constraint_of(&parse("@launch_bounds(256) Kernel k() { }"), &opts),
            Ok(BlockConstraint::Shrinkable(256))
        );
        let k = parse("@launch_bounds(256) Kernel k() { }");
        let opts = SemaOptions { fixed_block_sizes: [("k".to_string(), 384)].into() };
        let err = block_constraint_of(&k, &opts).unwrap_err();
        assert_eq!(err[0].rule_id, rules::LAUNCH_BOUNDS_BELOW_FIXED);
    }

    #[test]
    fn listing1_shape_is_clean() {
        let src = "Kernel find_min(graph) {\n  ForAll(nidx In wl) {\n    n = wl.pop(nidx);\n    c = components[n];\n    Atomic(locks[c]) { if (minwt[c] > w) { minwt[c] = w; } }\n    if (more) { wl.push(n); }\n  }\n}";
        let m = parse_source(src, "t.irgl").unwrap();
        let a = analyze(&m, &SemaOptions::default()).unwrap();
        let info = &a.infos["find_min"];
        assert!(info.uses_pop && info.uses_push && !info.uses_retry && !info.uses_sync);
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn demotion_rewrites_nested_foralls() {
        let src = "host Kernel h() { ForAll(i In a) { ForAll(j In b) { } } }\nKernel k() { ForAll(i In a) { } }";
        let m = host_forall_demotion(&parse_source(src, "t.irgl").unwrap());
        let mut host_foralls = 0;
        walk_block(&m.kernels[0].body, &mut |s| host_foralls += matches!(s.kind, StmtKind::ForAll(_)) as usize);
        assert_eq!(host_foralls, 0);
        assert!(matches!(m.kernels[1].body[0].kind, StmtKind::ForAll(_)));
    }
}
