//! Lowering of plain and device kernels.
//!
//! In kernels that use device-wide barriers every thread must reach every
//! barrier, so the outermost ForAll runs the same number of trips in every
//! thread and marks the trips with no item as inactive (`irgl_active`).
//! Statements between barriers are grouped under one `if (irgl_active)`.

use std::collections::BTreeMap;

use super::cexpr::{ctype, CEnv, IterRange};
use super::{hoisted_locals, invocation_modes, paren, red_macro, scope_types, user_params, EmitContext, Out};
use crate::ast::*;
use crate::op::parse_operator_code;
use crate::sema::{effective_mapping, KernelInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Variant {
    /// The `__global__` kernel launched from host code.
    Global,
    /// The `__device__` copy called from an outlined pipe's control kernel.
    Outlined,
}

/// Where a ReduceAndReturn jumps to.
enum Target {
    /// End of the current ForAll iteration.
    Next(String),
    /// End of the current `if (irgl_active)` group; the thread stays idle
    /// until the trip ends.
    Skip(String),
}

struct Gen<'a> {
    env: CEnv,
    kernel: &'a Kernel,
    types: BTreeMap<String, TypeTag>,
    out: Out,
    counter: usize,
    /// Barrier kernel: outermost ForAlls use uniform trips.
    uniform: bool,
    forall_depth: usize,
    targets: Vec<(Target, bool)>,
    exit_used: bool,
}

/// Runtime parameters a kernel takes ahead of its own.
pub(crate) fn runtime_params(info: &KernelInfo) -> Vec<&'static str> {
    let mut v = Vec::new();
    if info.uses_worklist {
        v.push("irgl::PipeContext *irgl_wl");
    }
    if info.needs_global_barrier() {
        v.push("irgl::GlobalBarrier irgl_bar");
    }
    if info.uses_reduce {
        v.push("irgl::RetCell irgl_ret");
    }
    v
}

pub(crate) fn emit_kernel(ctx: &EmitContext, k: &Kernel, variant: Variant, out: &mut Out) {
    let info = &ctx.analysis.infos[&k.name];
    let mut params: Vec<String> = runtime_params(info).into_iter().map(String::from).collect();
    params.extend(user_params(ctx.module, k));
    let params = params.join(", ");
    if info.uses_reduce {
        out.line("template <int IRGL_RED>");
    }
    let header = match variant {
        Variant::Global => {
            let bounds = match k.launch_bounds {
                Some(LaunchBounds { max_threads, min_blocks: Some(b) }) => format!("__launch_bounds__({max_threads}, {b}) "),
                Some(LaunchBounds { max_threads, min_blocks: None }) => format!("__launch_bounds__({max_threads}) "),
                None => String::new(),
            };
            format!("__global__ void {bounds}irgl_{}({params}) {{", k.name)
        }
        Variant::Outlined => format!("__device__ void irgl_dev_{}({params}) {{", k.name),
    };
    out.open(header);
    let mut g = Gen::new(ctx, k, info.needs_global_barrier(), out.depth);
    g.out.line("const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;");
    g.out.line("const irgl::value_t irgl_nthreads = (irgl::value_t)gridDim.x * blockDim.x;");
    if info.uses_reduce {
        g.out.line("bool irgl_acc = irgl::red_identity<IRGL_RED>();");
    }
    g.locals(ctx.module);
    g.block(&k.body);
    if info.uses_reduce {
        if g.exit_used {
            g.out.depth -= 1;
            g.out.line("irgl_exit:");
            g.out.depth += 1;
        }
        g.out.line("irgl::red_combine<IRGL_RED>(irgl_ret, irgl_acc);");
    }
    out.text.push_str(&g.out.text);
    out.close("}");

    if info.uses_reduce && variant == Variant::Global {
        let (bare, reds) = invocation_modes(ctx.module, &k.name);
        let mut variants: Vec<Option<Reduction>> = Vec::new();
        if bare {
            variants.push(None);
        }
        variants.extend(reds.into_iter().map(Some));
        for r in variants {
            out.line(format!("template __global__ void irgl_{}<{}>({params});", k.name, red_macro(r)));
        }
    }
}

pub(crate) fn emit_device_function(ctx: &EmitContext, k: &Kernel, out: &mut Out) {
    out.open(format!("__device__ void irgl_{}({}) {{", k.name, user_params(ctx.module, k).join(", ")));
    let mut g = Gen::new(ctx, k, false, out.depth);
    g.locals(ctx.module);
    g.block(&k.body);
    out.text.push_str(&g.out.text);
    out.close("}");
}

impl<'a> Gen<'a> {
    fn new(ctx: &EmitContext, k: &'a Kernel, uniform: bool, depth: usize) -> Self {
        Gen {
            env: ctx.cenv(),
            kernel: k,
            types: scope_types(ctx.module, k),
            out: Out { text: String::new(), depth },
            counter: 0,
            uniform,
            forall_depth: 0,
            targets: Vec::new(),
            exit_used: false,
        }
    }

    fn fresh(&mut self) -> usize {
        self.counter += 1;
        self.counter
    }

    fn e(&self, e: &Expr) -> String {
        self.env.expr(e)
    }

    fn locals(&mut self, m: &Module) {
        for (name, ty) in hoisted_locals(m, self.kernel) {
            let init = match ty {
                TypeTag::Array | TypeTag::Graph => String::new(),
                TypeTag::Bool => " = false".to_string(),
                _ => " = 0".to_string(),
            };
            self.out.line(format!("{} {name}{init};", ctype(ty)));
        }
    }

    fn range(&self, iter: &Expr) -> IterRange {
        let types = &self.types;
        self.env.iter_range(iter, "irgl_wl->in->size()", &|n| types.get(n) == Some(&TypeTag::Array))
    }

    /// Renders nested output at one level deeper and returns it.
    fn capture(&mut self, f: impl FnOnce(&mut Self)) -> String {
        let saved = std::mem::take(&mut self.out.text);
        self.out.depth += 1;
        f(self);
        self.out.depth -= 1;
        std::mem::replace(&mut self.out.text, saved)
    }

    fn block(&mut self, b: &[Stmt]) {
        for s in b {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::CBlock(cb) => self.cblock(cb),
            StmtKind::ForAll(f) => {
                if self.forall_depth == 0 {
                    self.forall(f)
                } else {
                    self.nested_forall(f)
                }
            }
            StmtKind::For { var, iter, body } => {
                let r = self.range(iter);
                self.seq_loop(var, r, |g| g.block(body))
            }
            StmtKind::While { cond, body } => {
                self.out.open(format!("while ({}) {{", self.e(cond)));
                self.block(body);
                self.out.close("}");
            }
            StmtKind::If { cond, then, els } => {
                self.out.open(format!("if ({}) {{", self.e(cond)));
                self.block(then);
                if els.is_empty() {
                    self.out.close("}");
                } else {
                    self.out.depth -= 1;
                    self.out.open("} else {");
                    self.block(els);
                    self.out.close("}");
                }
            }
            StmtKind::Atomic { lock, locked, failed } => self.atomic(lock, locked, failed.as_deref()),
            StmtKind::Exclusive(x) => self.exclusive(x),
            StmtKind::SyncRunningThreads => self.out.line("irgl::barrier_sync(irgl_bar);"),
            StmtKind::Retry(e) | StmtKind::Respawn(e) => self.out.line(format!("irgl_wl->retry->push({});", self.e(e))),
            StmtKind::ReduceAndReturn(e) => self.reduce(e),
            StmtKind::WlPop { var, index } => self.out.line(format!("{var} = irgl_wl->in->pop({});", self.e(index))),
            StmtKind::WlPush(e) => self.out.line(format!("irgl_wl->out->push({});", self.e(e))),
            StmtKind::Invoke(_) | StmtKind::Iterate(_) | StmtKind::Pipe(_) => {
                self.out.line(format!("/* {} is only valid in host kernels */", s.kind.construct_name()))
            }
        }
    }

    fn cblock(&mut self, cb: &CBlock) {
        match parse_operator_code(&cb.code) {
            Ok(stmts) => {
                for st in &stmts {
                    let line = self.env.simple(st);
                    if !line.is_empty() {
                        self.out.line(line);
                    }
                }
            }
            Err(_) => {
                for l in cb.code.lines() {
                    self.out.line(l.trim());
                }
            }
        }
    }

    /// Sequential loop; the iterator is evaluated once.
    fn seq_loop(&mut self, var: &str, r: IterRange, body: impl FnOnce(&mut Self)) {
        let n = self.fresh();
        match &r.elem {
            None => self.out.open(format!(
                "for (irgl::value_t {var} = {}, irgl_end_{n} = {}; {var} < irgl_end_{n}; {var}++) {{",
                r.begin, r.end
            )),
            Some(arr) => {
                self.out.open(format!(
                    "for (irgl::value_t irgl_i_{n} = {}, irgl_end_{n} = {}; irgl_i_{n} < irgl_end_{n}; irgl_i_{n}++) {{",
                    r.begin, r.end
                ));
                self.out.line(format!("irgl::value_t {var} = {arr}[irgl_i_{n}];"));
            }
        }
        body(self);
        self.out.close("}");
    }

    /// A ForAll below the outermost one runs sequentially in its thread.
    fn nested_forall(&mut self, f: &ForAll) {
        let r = self.range(&f.iter);
        self.forall_depth += 1;
        let label = format!("irgl_next_{}", self.fresh());
        self.seq_loop(&f.var, r, |g| g.iteration_body(&f.body, label));
        self.forall_depth -= 1;
    }

    /// Body of one ForAll iteration, ending in the label ReduceAndReturn
    /// jumps to when it is used.
    fn iteration_body(&mut self, body: &[Stmt], label: String) {
        self.targets.push((Target::Next(label.clone()), false));
        self.block(body);
        if self.targets.pop().is_some_and(|(_, used)| used) {
            self.out.line(format!("{label}: ;"));
        }
    }

    fn bind_var(&mut self, var: &str, r: &IterRange, idx: &str) {
        match &r.elem {
            None => self.out.line(format!("irgl::value_t {var} = {idx};")),
            Some(arr) => self.out.line(format!("irgl::value_t {var} = {arr}[{idx}];")),
        }
    }

    fn forall(&mut self, f: &ForAll) {
        let r = self.range(&f.iter);
        let mapping = effective_mapping(self.kernel, f);
        let n = self.fresh();
        let label = format!("irgl_next_{n}");
        self.forall_depth += 1;
        self.out.open("{");
        self.out.line(format!("const irgl::value_t irgl_begin_{n} = {}, irgl_end_{n} = {};", r.begin, r.end));
        if mapping == Mapping::Blocked {
            self.out.line(format!(
                "const irgl::value_t irgl_chunk_{n} = (irgl_end_{n} - irgl_begin_{n} + irgl_nthreads - 1) / irgl_nthreads;"
            ));
        }
        match (self.uniform, mapping) {
            (false, Mapping::Consecutive) => {
                self.out.open(format!(
                    "for (irgl::value_t irgl_idx_{n} = irgl_begin_{n} + irgl_tid; irgl_idx_{n} < irgl_end_{n}; irgl_idx_{n} += irgl_nthreads) {{"
                ));
            }
            (false, Mapping::Blocked) => {
                self.out.line(format!(
                    "const irgl::value_t irgl_stop_{n} = irgl::min_of(irgl_begin_{n} + (irgl_tid + 1) * irgl_chunk_{n}, irgl_end_{n});"
                ));
                self.out.open(format!(
                    "for (irgl::value_t irgl_idx_{n} = irgl_begin_{n} + irgl_tid * irgl_chunk_{n}; irgl_idx_{n} < irgl_stop_{n}; irgl_idx_{n}++) {{"
                ));
            }
            (true, Mapping::Consecutive) => {
                self.out.open(format!(
                    "for (irgl::value_t irgl_base_{n} = irgl_begin_{n}; irgl_base_{n} < irgl_end_{n}; irgl_base_{n} += irgl_nthreads) {{"
                ));
                self.out.line(format!("const irgl::value_t irgl_idx_{n} = irgl_base_{n} + irgl_tid;"));
            }
            (true, Mapping::Blocked) => {
                self.out.open(format!(
                    "for (irgl::value_t irgl_k_{n} = 0; irgl_k_{n} < irgl_chunk_{n}; irgl_k_{n}++) {{"
                ));
                self.out.line(format!(
                    "const irgl::value_t irgl_idx_{n} = irgl_begin_{n} + irgl_tid * irgl_chunk_{n} + irgl_k_{n};"
                ));
            }
        }
        let idx = format!("irgl_idx_{n}");
        if self.uniform {
            self.out.line(format!("bool irgl_active = {idx} < irgl_end_{n};"));
            let arr_guard = r.elem.as_ref().map(|a| format!("irgl_active ? {a}[{idx}] : 0"));
            match arr_guard {
                Some(v) => self.out.line(format!("irgl::value_t {} = {v};", f.var)),
                None => self.out.line(format!("irgl::value_t {} = {idx};", f.var)),
            }
            self.uniform_body(&f.body);
        } else {
            self.bind_var(&f.var, &r, &idx);
            self.iteration_body(&f.body, label);
        }
        self.out.close("}");
        self.out.close("}");
        self.forall_depth -= 1;
    }

    fn uniform_body(&mut self, body: &[Stmt]) {
        let mut group: Vec<&Stmt> = Vec::new();
        for s in body {
            if matches!(s.kind, StmtKind::SyncRunningThreads | StmtKind::Exclusive(_)) {
                self.active_group(&group);
                group.clear();
                self.stmt(s);
            } else {
                group.push(s);
            }
        }
        self.active_group(&group);
    }

    fn active_group(&mut self, group: &[&Stmt]) {
        if group.is_empty() {
            return;
        }
        self.guarded(|g| {
            for s in group {
                g.stmt(s);
            }
        });
    }

    /// `if (irgl_active) { ... }` whose end is the jump target of
    /// ReduceAndReturn inside it.
    fn guarded(&mut self, f: impl FnOnce(&mut Self)) {
        let label = format!("irgl_skip_{}", self.fresh());
        self.targets.push((Target::Skip(label.clone()), false));
        let inner = self.capture(f);
        let used = self.targets.pop().is_some_and(|(_, used)| used);
        self.out.line("if (irgl_active) {");
        self.out.text.push_str(&inner);
        if used {
            self.out.depth += 1;
            self.out.line(format!("{label}: ;"));
            self.out.depth -= 1;
        }
        self.out.line("}");
    }

    fn reduce(&mut self, e: &Expr) {
        self.out.line(format!("irgl_acc = irgl::red_fold<IRGL_RED>(irgl_acc, {});", paren(&self.e(e))));
        match self.targets.last_mut() {
            Some((Target::Next(l), used)) => {
                *used = true;
                let l = l.clone();
                self.out.line(format!("goto {l};"));
            }
            Some((Target::Skip(l), used)) => {
                *used = true;
                let l = l.clone();
                self.out.line("irgl_active = false;");
                self.out.line(format!("goto {l};"));
            }
            None => {
                self.exit_used = true;
                self.out.line("goto irgl_exit;");
            }
        }
    }

    fn atomic(&mut self, lock: &Expr, locked: &[Stmt], failed: Option<&[Stmt]>) {
        let addr = format!("(unsigned long long *)&({})", self.e(lock));
        let acquire = format!("if (atomicCAS({addr}, 0ULL, 1ULL) == 0ULL) {{");
        let critical = |g: &mut Self| {
            g.out.line("__threadfence();");
            g.block(locked);
            g.out.line("__threadfence();");
            g.out.line(format!("atomicExch({addr}, 0ULL);"));
        };
        match failed {
            Some(failed) => {
                self.out.open(acquire);
                critical(self);
                self.out.depth -= 1;
                self.out.open("} else {");
                self.block(failed);
                self.out.close("}");
            }
            None => {
                let n = self.fresh();
                self.out.open("{");
                self.out.line(format!("bool irgl_done_{n} = false;"));
                self.out.open(format!("while (!irgl_done_{n}) {{"));
                self.out.open(acquire);
                critical(self);
                self.out.line(format!("irgl_done_{n} = true;"));
                self.out.close("}");
                self.out.close("}");
                self.out.close("}");
            }
        }
    }

    /// Three phases separated by device-wide barriers. Phase 1 races plain
    /// writes of each claimant's priority (its global thread id; lower wins)
    /// into its lock slots. Phase 2 lets a thread that sees a worse owner
    /// take the slot with atomicMin. Phase 3 confirms: a thread still owning
    /// every slot wins. Slots are reset before the critical sections run;
    /// nobody reads them again until the next round's second barrier.
    fn exclusive(&mut self, x: &Exclusive) {
        let n = self.fresh();
        let slots = format!("irgl_slots_{n}");
        let count = self.e(&x.count);
        self.out.open("{");
        self.out.line(format!(
            "volatile unsigned int *{slots} = IRGL_EXCL_SLOTS({});",
            self.e(&x.object)
        ));
        self.out.line(format!("const unsigned int irgl_prio_{n} = (unsigned int)irgl_tid;"));
        let (lock_at, limit) = match &x.locks {
            LockSource::Array(a) => {
                let a = self.e(a);
                (format!("{}[irgl_j_{n}]", paren(&a)), format!("IRGL_LEN({a})"))
            }
            LockSource::ArrayIterator(it) => {
                let r = self.range(it);
                let at = match &r.elem {
                    Some(arr) => format!("{arr}[{} + irgl_j_{n}]", paren(&r.begin)),
                    None => format!("{} + irgl_j_{n}", paren(&r.begin)),
                };
                (at, format!("{} - {}", paren(&r.end), paren(&r.begin)))
            }
        };
        self.out.line(format!(
            "const irgl::value_t irgl_nlocks_{n} = irgl_active ? irgl::min_of((irgl::value_t)({count}), (irgl::value_t)({limit})) : 0;"
        ));
        let each = format!("for (irgl::value_t irgl_j_{n} = 0; irgl_j_{n} < irgl_nlocks_{n}; irgl_j_{n}++) {{");
        let slot = format!("{slots}[{lock_at}]");

        self.out.open(each.clone());
        self.out.line(format!("{slot} = irgl_prio_{n};"));
        self.out.close("}");
        self.out.line("irgl::barrier_sync(irgl_bar);");

        self.out.open(each.clone());
        self.out.line(format!("const unsigned int irgl_owner_{n} = {slot};"));
        self.out.open(format!("if (irgl_owner_{n} != irgl_prio_{n} && irgl_prio_{n} < irgl_owner_{n}) {{"));
        self.out.line(format!("atomicMin((unsigned int *)&{slot}, irgl_prio_{n});"));
        self.out.close("}");
        self.out.close("}");
        self.out.line("irgl::barrier_sync(irgl_bar);");

        self.out.line(format!("bool irgl_won_{n} = irgl_active;"));
        self.out.open(each.clone());
        self.out.line(format!("if ({slot} != irgl_prio_{n}) irgl_won_{n} = false;"));
        self.out.close("}");
        self.out.line("irgl::barrier_sync(irgl_bar);");

        self.out.open(each);
        self.out.line(format!("{slot} = IRGL_UNCLAIMED;"));
        self.out.close("}");
        self.guarded(|g| {
            g.out.open(format!("if (irgl_won_{n}) {{"));
            g.block(&x.locked);
            match &x.failed {
                Some(failed) if !failed.is_empty() => {
                    g.out.depth -= 1;
                    g.out.open("} else {");
                    g.block(failed);
                    g.out.close("}");
                }
                _ => g.out.close("}"),
            }
        });
        self.out.close("}");
    }
}
