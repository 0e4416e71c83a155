//! Lowering of host kernels: orchestration on the host, or inside the control
//! kernel of an outlined pipe.

use std::collections::{BTreeMap, BTreeSet};

use super::cexpr::{ctype, CEnv};
use super::kernel::runtime_params;
use super::{hoisted_locals, paren, red_macro, scope_types, user_params, EmitContext, Out};
use crate::ast::*;
use crate::op::{parse_operator_code, read_write_sets, SimpleStmt};
use crate::plan::{GridPolicy, OutlinedPipe};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Host,
    /// Every thread of the control kernel runs the orchestration; kernel
    /// invocations become calls and worklist swaps are device-wide.
    Control,
}

struct Gen<'c, 'a> {
    ctx: &'c EmitContext<'a>,
    env: CEnv,
    kernel: &'a Kernel,
    types: BTreeMap<String, TypeTag>,
    out: Out,
    counter: usize,
    mode: Mode,
    /// Innermost pipe context in scope: a `HostPipe` variable on the host.
    pipe: Option<String>,
    pipe_nesting: usize,
    outermost_index: usize,
    /// Names a control kernel receives by value.
    captured: BTreeSet<String>,
}

pub(crate) fn emit_host_function(ctx: &EmitContext, k: &Kernel, out: &mut Out) {
    out.open(format!("void irgl_{}({}) {{", k.name, user_params(ctx.module, k).join(", ")));
    let mut g = Gen::new(ctx, k, Mode::Host, out.depth);
    let graph = k
        .params
        .iter()
        .map(|p| (p.name.clone(), g.types[&p.name]))
        .chain(ctx.module.decls.iter().map(|d| (d.name.clone(), d.ty)))
        .find(|(_, t)| *t == TypeTag::Graph);
    if let Some((name, _)) = graph {
        g.out.line(format!("irgl_graph = {name};"));
    }
    for (name, ty) in hoisted_locals(ctx.module, k) {
        let init = match ty {
            TypeTag::Array | TypeTag::Graph => String::new(),
            TypeTag::Bool => " = false".to_string(),
            _ => " = 0".to_string(),
        };
        g.out.line(format!("{} {name}{init};", ctype(ty)));
    }
    g.block(&k.body);
    out.text.push_str(&g.out.text);
    out.close("}");
}

/// Parameters of a control kernel after the runtime ones: the host kernel's
/// parameters and locals, by value.
fn captured_params(ctx: &EmitContext, k: &Kernel) -> Vec<(String, TypeTag)> {
    let types = scope_types(ctx.module, k);
    let mut v: Vec<(String, TypeTag)> = k.params.iter().map(|p| (p.name.clone(), types[&p.name])).collect();
    v.extend(hoisted_locals(ctx.module, k));
    v
}

fn pipe_reduces(p: &Pipe) -> bool {
    let mut any = false;
    walk_block(&p.body, &mut |s| match &s.kind {
        StmtKind::Invoke(i) => any |= i.reduction.is_some(),
        StmtKind::Iterate(it) => any |= it.cond.is_some(),
        _ => {}
    });
    any
}

pub(crate) fn emit_control_kernel(ctx: &EmitContext, k: &Kernel, index: usize, p: &OutlinedPipe, out: &mut Out) {
    let Some(stmt) = crate::plan::outermost_pipes(&k.body).get(index).copied() else { return };
    let StmtKind::Pipe(pipe) = &stmt.kind else { return };
    let mut params = vec!["irgl::PipeContext *irgl_wl".to_string(), "irgl::GlobalBarrier irgl_bar".to_string()];
    if pipe_reduces(pipe) {
        params.push("irgl::RetCell irgl_cell".to_string());
    }
    let captured = captured_params(ctx, k);
    params.extend(captured.iter().map(|(n, t)| format!("{} {n}", ctype(*t))));
    out.open(format!(
        "__global__ void __launch_bounds__({}) irgl_{}({}) {{",
        p.block_size,
        p.control_name(),
        params.join(", ")
    ));
    let mut g = Gen::new(ctx, k, Mode::Control, out.depth);
    g.captured = captured.into_iter().map(|(n, _)| n).collect();
    g.pipe = Some("irgl_wl".to_string());
    g.pipe_nesting = 1;
    g.out.line("const irgl::value_t irgl_tid = (irgl::value_t)blockIdx.x * blockDim.x + threadIdx.x;");
    g.pipe_body(pipe);
    out.text.push_str(&g.out.text);
    out.close("}");
}

impl<'c, 'a> Gen<'c, 'a> {
    fn new(ctx: &'c EmitContext<'a>, k: &'a Kernel, mode: Mode, depth: usize) -> Self {
        let mut types = scope_types(ctx.module, k);
        types.extend(hoisted_locals(ctx.module, k));
        Gen {
            ctx,
            env: ctx.cenv(),
            kernel: k,
            types,
            out: Out { text: String::new(), depth },
            counter: 0,
            mode,
            pipe: None,
            pipe_nesting: 0,
            outermost_index: 0,
            captured: BTreeSet::new(),
        }
    }

    fn fresh(&mut self) -> usize {
        self.counter += 1;
        self.counter
    }

    fn e(&self, e: &Expr) -> String {
        self.env.expr(e)
    }

    fn in_size(&self) -> String {
        match (self.mode, &self.pipe) {
            (Mode::Control, _) => "irgl_wl->in->size()".to_string(),
            (Mode::Host, Some(p)) => format!("{p}.in_size()"),
            (Mode::Host, None) => "0".to_string(),
        }
    }

    fn block(&mut self, b: &[Stmt]) {
        for s in b {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::CBlock(cb) => self.cblock(cb),
            StmtKind::ForAll(ForAll { var, iter, body, .. }) | StmtKind::For { var, iter, body } => {
                let types = &self.types;
                let r = self.env.iter_range(iter, &self.in_size(), &|n| types.get(n) == Some(&TypeTag::Array));
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
                self.block(body);
                self.out.close("}");
            }
            StmtKind::While { cond, body } => {
                self.out.open(format!("while ({}) {{", self.e(cond)));
                self.block(body);
                self.out.close("}");
            }
            StmtKind::If { cond, then, els } => {
                self.out.open(format!("if ({}) {{", self.e(cond)));
                self.block(then);
                if !els.is_empty() {
                    self.out.depth -= 1;
                    self.out.open("} else {");
                    self.block(els);
                }
                self.out.close("}");
            }
            StmtKind::Invoke(inv) => {
                let result = inv.result.clone();
                self.out.open("{");
                self.launch(&inv.kernel, &inv.args, inv.reduction, result.as_deref());
                self.out.close("}");
            }
            StmtKind::Iterate(it) => self.iterate(it),
            StmtKind::Pipe(p) => self.pipe(p),
            other => self.out.line(format!("/* {} is not valid in host kernels */", other.construct_name())),
        }
    }

    fn cblock(&mut self, cb: &CBlock) {
        let parsed = parse_operator_code(&cb.code);
        let lines: Vec<String> = match &parsed {
            Ok(stmts) => stmts.iter().map(|s| self.env.simple(s)).filter(|l| !l.is_empty()).collect(),
            Err(_) => cb.code.lines().map(|l| l.trim().to_string()).collect(),
        };
        // In a control kernel every thread keeps its own copy of the host
        // locals, so updates to them run everywhere; anything with effects
        // beyond them runs once, followed by a barrier.
        let thread_local = self.mode == Mode::Host
            || matches!(&parsed, Ok(stmts)
                if !stmts.iter().any(|s| matches!(s, SimpleStmt::Call(_)))
                    && read_write_sets(stmts).1.iter().all(|w| self.captured.contains(w)));
        if thread_local {
            for l in lines {
                self.out.line(l);
            }
        } else {
            self.out.open("if (irgl_tid == 0) {");
            for l in lines {
                self.out.line(l);
            }
            self.out.close("}");
            self.out.line("irgl::barrier_sync(irgl_bar);");
        }
    }

    /// One invocation including its retry re-runs and the final swap.
    /// `result` receives the reduced value.
    fn launch(&mut self, name: &str, args: &[Expr], red: Option<Reduction>, result: Option<&str>) {
        let Some(info) = self.ctx.analysis.infos.get(name) else {
            self.out.line(format!("/* unknown kernel {name} */"));
            return;
        };
        let n = self.fresh();
        let pipe_ctx = match (self.mode, &self.pipe) {
            (Mode::Control, _) => "irgl_wl".to_string(),
            (Mode::Host, Some(p)) => format!("{p}.ctx"),
            (Mode::Host, None) => "nullptr".to_string(),
        };
        let red_arg = if info.uses_reduce {
            format!("<{}>", red_macro(red))
        } else {
            String::new()
        };
        let mut call_args: Vec<String> = Vec::new();
        for p in runtime_params(info) {
            call_args.push(match p {
                "irgl::PipeContext *irgl_wl" => pipe_ctx.clone(),
                "irgl::GlobalBarrier irgl_bar" => match self.mode {
                    Mode::Host => format!("irgl_bar_{n}"),
                    Mode::Control => "irgl_bar".to_string(),
                },
                _ => match (red, self.mode) {
                    (Some(_), Mode::Host) => format!("irgl_ret_{n}"),
                    (Some(_), Mode::Control) => "irgl_cell".to_string(),
                    (None, _) => "irgl::RetCell()".to_string(),
                },
            });
        }
        call_args.extend(args.iter().map(|a| self.e(a)));
        let call_args = call_args.join(", ");
        let retry = info.uses_retry && info.uses_worklist;

        match self.mode {
            Mode::Host => {
                let plan = &self.ctx.plan.plans[name];
                let b = plan.block_size;
                let fname = format!("irgl_{name}{red_arg}");
                if let Some(r) = red {
                    self.out.line(format!("irgl::RetCell irgl_ret_{n} = irgl::ret_alloc({});", red_macro(Some(r))));
                }
                match plan.grid_size_policy {
                    GridPolicy::OccupancyCapped => {
                        self.out.line(format!("int irgl_bps_{n} = 0;"));
                        self.out.line(format!(
                            "irgl::check(cudaOccupancyMaxActiveBlocksPerMultiprocessor(&irgl_bps_{n}, {fname}, {b}, 0), \"occupancy\");"
                        ));
                        self.out.line(format!("const int irgl_grid_{n} = irgl_bps_{n} * irgl::sm_count();"));
                        self.out.line(format!("irgl::GlobalBarrier irgl_bar_{n} = irgl::barrier_alloc(irgl_grid_{n});"));
                    }
                    GridPolicy::FixedFromSM { multiplier } => {
                        self.out.line(format!("const int irgl_grid_{n} = irgl::sm_count() * {multiplier};"));
                    }
                }
                if retry {
                    self.out.line("// Retried items are re-launched as they are; conflict management is left to the program.");
                    self.out.open("while (true) {");
                }
                self.out.line(format!("{fname}<<<irgl_grid_{n}, {b}>>>({call_args});"));
                self.out.line(format!("irgl::check(cudaDeviceSynchronize(), {});", quoted(name)));
                if retry {
                    let p = self.pipe.clone().unwrap_or_default();
                    self.out.line(format!("if ({p}.retry_size() == 0) break;"));
                    self.out.line(format!("{p}.swap_in_retry();"));
                    self.out.close("}");
                }
                if plan.grid_size_policy == GridPolicy::OccupancyCapped {
                    self.out.line(format!("irgl::barrier_free(irgl_bar_{n});"));
                }
                if info.uses_worklist {
                    if let Some(p) = &self.pipe {
                        self.out.line(format!("{p}.swap_in_out();"));
                    }
                }
                if red.is_some() {
                    match result {
                        Some(x) => self.out.line(format!("{x} = irgl::ret_read(irgl_ret_{n});")),
                        None => self.out.line(format!("(void)irgl::ret_read(irgl_ret_{n});")),
                    }
                }
            }
            Mode::Control => {
                if let Some(r) = red {
                    let init = if r.identity() { 1 } else { 0 };
                    self.out.line(format!("if (irgl_tid == 0) *irgl_cell.value = {init};"));
                    self.out.line("irgl::barrier_sync(irgl_bar);");
                }
                if retry {
                    self.out.open("while (true) {");
                }
                self.out.line(format!("irgl_dev_{name}{red_arg}({call_args});"));
                self.out.line("irgl::barrier_sync(irgl_bar);");
                if retry {
                    self.out.line("if (irgl_wl->retry->size() == 0) break;");
                    self.out.line("irgl::device_swap_in_retry(irgl_wl, irgl_bar);");
                    self.out.close("}");
                }
                if info.uses_worklist {
                    self.out.line("irgl::device_swap_in_out(irgl_wl, irgl_bar);");
                }
                if red.is_some() {
                    if let Some(x) = result {
                        self.out.line(format!("{x} = *irgl_cell.value != 0;"));
                    }
                    self.out.line("irgl::barrier_sync(irgl_bar);");
                }
            }
        }
    }

    fn init_pipe(&mut self, var: &str, init: Option<&WorklistInit>) {
        let size = init.and_then(|w| w.size.as_ref()).map(|e| self.e(e)).unwrap_or_else(|| "IRGL_DEFAULT_WL_SIZE".into());
        self.out.line(format!("irgl::HostPipe {var}({size});"));
        match init.map(|w| &w.source) {
            Some(WorklistSource::Scalars(xs)) => {
                for x in xs {
                    self.out.line(format!("{var}.push_in({});", self.e(x)));
                }
            }
            Some(WorklistSource::FromArray { array, len }) => {
                self.out.line(format!("{var}.init_from_array({}, {});", self.e(array), self.e(len)))
            }
            None => {}
        }
    }

    fn iterate(&mut self, it: &Iterate) {
        let worklist = self.ctx.analysis.infos.get(&it.kernel).is_some_and(|i| i.uses_worklist);
        let n = self.fresh();
        self.out.open("{");
        let saved = self.pipe.clone();
        if self.mode == Mode::Host && (it.initial.is_some() || (worklist && self.pipe.is_none())) {
            let var = format!("irgl_pipe_{n}");
            self.init_pipe(&var, it.initial.as_ref());
            self.pipe = Some(var);
        }
        let r = format!("irgl_r_{n}");
        if let Some((_, red)) = it.cond {
            self.out.line(format!("bool {r} = {};", red.identity()));
        }
        self.out.open("while (true) {");
        let extra = it.extra_cond.as_ref().map(|(e, c)| (paren(&self.e(e)), *c));
        let stop = match (worklist, extra) {
            (true, None) => Some(format!("{} == 0", self.in_size())),
            (true, Some((e, c))) => {
                let op = if c == Combiner::And { "&&" } else { "||" };
                Some(format!("({} == 0) {op} {e}", self.in_size()))
            }
            (false, Some((e, _))) => Some(e),
            (false, None) => None,
        };
        if let Some(stop) = stop {
            self.out.line(format!("if ({stop}) break;"));
        }
        self.out.open("{");
        let red = it.cond.map(|(_, red)| red);
        self.launch(&it.kernel, &it.args, red, red.map(|_| r.as_str()));
        self.out.close("}");
        self.block(&it.between_rounds);
        match it.cond {
            Some((CondKind::While, _)) => self.out.line(format!("if (!{r}) break;")),
            Some((CondKind::Until, _)) => self.out.line(format!("if ({r}) break;")),
            None => {}
        }
        self.out.close("}");
        self.out.close("}");
        self.pipe = saved;
    }

    fn pipe(&mut self, p: &Pipe) {
        if self.pipe_nesting > 0 || self.mode == Mode::Control {
            self.pipe_nesting += 1;
            self.out.open("{");
            self.pipe_body(p);
            self.out.close("}");
            self.pipe_nesting -= 1;
            return;
        }
        let index = self.outermost_index;
        self.outermost_index += 1;
        let n = self.fresh();
        let var = format!("irgl_pipe_{n}");
        self.out.open("{");
        self.init_pipe(&var, p.wlinit.as_ref());
        let saved = self.pipe.replace(var.clone());
        match self.ctx.outlined(&self.kernel.name, index) {
            Some(op) => self.launch_control(op, p, n, &var),
            None => {
                self.pipe_nesting += 1;
                self.pipe_body(p);
                self.pipe_nesting -= 1;
            }
        }
        self.pipe = saved;
        self.out.close("}");
    }

    fn pipe_body(&mut self, p: &Pipe) {
        if p.once {
            self.block(&p.body);
        } else {
            self.out.open(format!("while ({} > 0) {{", self.in_size()));
            self.block(&p.body);
            self.out.close("}");
        }
    }

    fn launch_control(&mut self, op: &OutlinedPipe, p: &Pipe, n: usize, var: &str) {
        let fname = format!("irgl_{}", op.control_name());
        let b = op.block_size;
        self.out.line(format!("int irgl_bps_{n} = 0;"));
        self.out.line(format!(
            "irgl::check(cudaOccupancyMaxActiveBlocksPerMultiprocessor(&irgl_bps_{n}, {fname}, {b}, 0), \"occupancy\");"
        ));
        self.out.line(format!("const int irgl_grid_{n} = irgl_bps_{n} * irgl::sm_count();"));
        self.out.line(format!("irgl::GlobalBarrier irgl_bar_{n} = irgl::barrier_alloc(irgl_grid_{n});"));
        let mut args = vec![format!("{var}.ctx"), format!("irgl_bar_{n}")];
        let reduces = pipe_reduces(p);
        if reduces {
            self.out.line(format!("irgl::RetCell irgl_cell_{n} = irgl::ret_alloc(IRGL_RED_NONE);"));
            args.push(format!("irgl_cell_{n}"));
        }
        args.extend(captured_params(self.ctx, self.kernel).into_iter().map(|(name, _)| name));
        self.out.line(format!("{fname}<<<irgl_grid_{n}, {b}>>>({});", args.join(", ")));
        self.out.line(format!("irgl::check(cudaDeviceSynchronize(), {});", quoted(&op.control_name())));
        self.out.line(format!("irgl::barrier_free(irgl_bar_{n});"));
        if reduces {
            self.out.line(format!("(void)irgl::ret_read(irgl_cell_{n});"));
        }
    }
}
