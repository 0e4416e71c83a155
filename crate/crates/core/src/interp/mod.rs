//! Reference interpreter on a simulated bulk-synchronous machine.
//!
//! Host kernels run sequentially. Each launch of a plain kernel creates
//! virtual threads that interleave one statement at a time under a seeded
//! schedule (seed 0 is round-robin). Worklists, Atomic locks, device-wide
//! barriers, Exclusive, ReduceAndReturn and the retry protocol follow the
//! same contracts as the generated CUDA.
//!
//! Trace lines are `event key=value ...` with a fixed field order per event:
//!
//! ```text
//! launch kernel=K threads=T epoch=E in=N
//! pop thread=T index=I item=V
//! push thread=T list=out|retry item=V
//! acquire thread=T lock=NAME[I]
//! release thread=T lock=NAME[I]
//! barrier site=S threads=N
//! exclusive thread=T locks=[..] won=B
//! reduce thread=T value=B
//! swap lists=in<->out in=N out=N retry=N
//! swap lists=in<->retry in=N out=N retry=N
//! serialize kernel=K
//! iter kernel=K round=R
//! ```

mod compile;
mod eval;
mod host;
mod machine;
#[cfg(test)]
mod tests;
mod value;
mod worklist;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

pub use value::{parse_data, parse_edge_list, Data, Graph, GraphError, INF_VALUE};

use crate::ast::*;
use crate::diag::{rules, Diagnostic};
use crate::op::{parse_operator_code, SimpleStmt};
use crate::sema::{analyze, KernelInfo, SemaOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    /// Threads that can be live at once; launches never exceed it.
    pub resident_threads: usize,
    /// Threads per simulated block. Only reported; scheduling is per thread.
    pub block_size: usize,
    pub schedule_seed: u64,
    /// Rounds of a kernel executing Retry before its reruns go serial.
    pub retry_serialize_after: usize,
    /// Scheduler steps allowed per launch before giving up.
    pub max_steps: u64,
    /// Forces the thread count of every launch, bypassing the resident cap.
    /// Used to provoke the barrier deadlock check.
    pub launch_threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            resident_threads: 64,
            block_size: 32,
            schedule_seed: 0,
            retry_serialize_after: 4,
            max_steps: 20_000_000,
            launch_threads: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("the module is not runnable")]
    Rejected(Vec<Diagnostic>),
    #[error("{0}")]
    Binding(String),
    #[error("in `{kernel}`: {message}")]
    Runtime { kernel: String, message: String },
    #[error("simulated deadlock in `{kernel}`: {message}")]
    Deadlock { kernel: String, message: String },
    #[error("uniformity violation in `{kernel}`: {message}")]
    Uniformity { kernel: String, message: String },
    #[error("`{kernel}` exceeded {steps} scheduler steps")]
    StepLimit { kernel: String, steps: u64 },
}

/// One thread's part in one round of an Exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub thread: usize,
    pub locks: Vec<i64>,
    pub won: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaunchRecord {
    pub kernel: String,
    pub threads: usize,
    /// Every ReduceAndReturn value evaluated, in evaluation order.
    pub reduce_values: Vec<bool>,
    pub serial: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub launches: Vec<LaunchRecord>,
    /// Launch count of each Iterate statement executed, in order.
    pub iterate_rounds: Vec<(String, usize)>,
    /// Pops that saw an item pushed in the same launch.
    pub epoch_violations: usize,
    /// Rounds of every Exclusive executed, active claimants only.
    pub exclusive_rounds: Vec<Vec<Claim>>,
    pub steps: u64,
}

impl Stats {
    pub fn launch_count(&self, kernel: &str) -> usize {
        self.launches.iter().filter(|l| l.kernel == kernel).count()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Entry parameters, then globals in declaration order, then implicit
    /// property arrays.
    pub bindings: Vec<(String, Data)>,
    /// Text written by printf.
    pub output: String,
    pub trace: Vec<String>,
    pub stats: Stats,
}

impl RunResult {
    pub fn get(&self, name: &str) -> Option<&Data> {
        self.bindings.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }
}

pub(crate) struct Program {
    pub module: Module,
    pub infos: BTreeMap<String, KernelInfo>,
    /// Parsed operator code of every CBlock, by text.
    pub code: HashMap<String, Vec<SimpleStmt>>,
    pub compiled: HashMap<String, compile::Compiled>,
    pub device: HashMap<String, usize>,
    pub implicit_arrays: Vec<String>,
}

/// Builtin functions callable from operator code.
const BUILTINS: &[&str] = &[
    "min", "max", "abs", "dst", "src", "weight", "len", "zeros", "fill", "nnodes", "nedges", "printf", "range", "edges",
    "nodes",
];
const METHODS: &[&str] = &["nnodes", "nedges", "len", "edges", "nodes"];

/// Operator code the interpreter cannot run: CBlocks that are not operator
/// code and calls to unknown functions.
pub fn check_supported(m: &Module) -> Vec<Diagnostic> {
    let file = m.origin.clone().unwrap_or_default();
    let devices: Vec<&str> =
        m.kernels.iter().filter(|k| k.kind == KernelKind::Device).map(|k| k.name.as_str()).collect();
    let mut diags = Vec::new();
    for k in &m.kernels {
        walk_block(&k.body, &mut |s| {
            let span = s.span.unwrap_or_default();
            let mut exprs = Vec::new();
            match &s.kind {
                StmtKind::CBlock(cb) => match parse_operator_code(&cb.code) {
                    Ok(stmts) => {
                        for st in stmts {
                            match st {
                                SimpleStmt::Assign { target, value, .. } => {
                                    exprs.push(target);
                                    exprs.extend(value);
                                }
                                SimpleStmt::Declare { init, .. } => exprs.extend(init),
                                SimpleStmt::Call(e) => exprs.push(e),
                            }
                        }
                    }
                    Err(e) => {
                        diags.push(
                            Diagnostic::error(
                                rules::INTERP_UNSUPPORTED,
                                span,
                                format!("operator code cannot be interpreted: {}", e.message),
                            )
                            .in_file(&file),
                        );
                    }
                },
                other => exprs.extend(stmt_exprs(other)),
            }
            for e in &exprs {
                unknown_calls(e, &devices, &mut |what| {
                    diags.push(
                        Diagnostic::error(rules::INTERP_UNSUPPORTED, span, format!("unknown {what}")).in_file(&file),
                    )
                });
            }
        });
    }
    diags
}

fn stmt_exprs(s: &StmtKind) -> Vec<Expr> {
    let mut v = Vec::new();
    match s {
        StmtKind::ForAll(f) => v.push(f.iter.clone()),
        StmtKind::For { iter, .. } => v.push(iter.clone()),
        StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => v.push(cond.clone()),
        StmtKind::Atomic { lock, .. } => v.push(lock.clone()),
        StmtKind::Exclusive(x) => {
            v.push(x.object.clone());
            v.push(x.count.clone());
            v.push(match &x.locks {
                LockSource::Array(e) | LockSource::ArrayIterator(e) => e.clone(),
            });
        }
        StmtKind::Retry(e) | StmtKind::Respawn(e) | StmtKind::ReduceAndReturn(e) | StmtKind::WlPush(e) => {
            v.push(e.clone())
        }
        StmtKind::WlPop { index, .. } => v.push(index.clone()),
        StmtKind::Invoke(inv) => v.extend(inv.args.iter().cloned()),
        StmtKind::Iterate(it) => {
            v.extend(it.args.iter().cloned());
            v.extend(it.extra_cond.iter().map(|(e, _)| e.clone()));
        }
        StmtKind::CBlock(_) | StmtKind::SyncRunningThreads | StmtKind::Pipe(_) => {}
    }
    v
}

fn unknown_calls(e: &Expr, devices: &[&str], report: &mut impl FnMut(String)) {
    match e {
        Expr::Call(name, args) => {
            if !BUILTINS.contains(&name.as_str()) && !devices.contains(&name.as_str()) {
                report(format!("function `{name}`"));
            }
            args.iter().for_each(|a| unknown_calls(a, devices, report));
        }
        Expr::Method(r, name, args) => {
            if !METHODS.contains(&name.as_str()) {
                report(format!("method `.{name}`"));
            }
            unknown_calls(r, devices, report);
            args.iter().for_each(|a| unknown_calls(a, devices, report));
        }
        Expr::Unary(_, a) | Expr::Field(a, _) => unknown_calls(a, devices, report),
        Expr::Binary(_, a, b) | Expr::Index(a, b) => {
            unknown_calls(a, devices, report);
            unknown_calls(b, devices, report);
        }
        Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Str(_) | Expr::Var(_) => {}
    }
}

impl Program {
    fn new(m: &Module) -> Result<Program, InterpError> {
        let m = &crate::sema::host_forall_demotion(m);
        let analysis = analyze(m, &SemaOptions::default()).map_err(InterpError::Rejected)?;
        let unsupported = check_supported(m);
        if !unsupported.is_empty() {
            return Err(InterpError::Rejected(unsupported));
        }
        let mut code = HashMap::new();
        for k in &m.kernels {
            walk_block(&k.body, &mut |s| {
                if let StmtKind::CBlock(cb) = &s.kind {
                    if let Ok(stmts) = parse_operator_code(&cb.code) {
                        code.insert(cb.code.clone(), stmts);
                    }
                }
            });
        }
        let mut compiled = HashMap::new();
        let mut device = HashMap::new();
        for (i, k) in m.kernels.iter().enumerate() {
            match k.kind {
                KernelKind::Plain => {
                    let uniform = analysis.infos[&k.name].needs_global_barrier();
                    let c = compile::compile(k, &code, uniform)
                        .map_err(|message| InterpError::Runtime { kernel: k.name.clone(), message })?;
                    compiled.insert(k.name.clone(), c);
                }
                KernelKind::Device => {
                    device.insert(k.name.clone(), i);
                }
                KernelKind::Host => {}
            }
        }
        Ok(Program {
            module: m.clone(),
            infos: analysis.infos,
            code,
            compiled,
            device,
            implicit_arrays: crate::codegen::implicit_arrays(m),
        })
    }
}

/// Runs host kernel `entry` of a sema-clean module. `bindings` supply entry
/// parameters and may override globals.
pub fn run_host(
    m: &Module,
    entry: &str,
    bindings: &BTreeMap<String, Data>,
    config: &SimConfig,
) -> Result<RunResult, InterpError> {
    run_host_traced(m, entry, bindings, config, false)
}

/// [`run_host`], optionally recording the event trace.
pub fn run_host_traced(
    m: &Module,
    entry: &str,
    bindings: &BTreeMap<String, Data>,
    config: &SimConfig,
    trace: bool,
) -> Result<RunResult, InterpError> {
    if config.resident_threads == 0 || config.block_size == 0 || config.retry_serialize_after == 0 {
        return Err(InterpError::Binding("resident threads, block size and retry rounds must be positive".into()));
    }
    let prog = Program::new(m)?;
    host::run(&prog, entry, bindings, config, trace)
}
