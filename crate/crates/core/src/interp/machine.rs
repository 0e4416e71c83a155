//! Virtual threads and the scheduler for one kernel launch.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::compile::{Op, ReduceTarget};
use super::eval::{as_int, truthy, Items, Locals, Memory, Place};
use super::value::Value;
use super::worklist::PipeState;
use super::{Claim, InterpError, LaunchRecord, SimConfig};
use crate::ast::{LockSource, Mapping};
use crate::op::lvalue_root;

/// Priority of an unclaimed Exclusive slot.
const UNCLAIMED: i64 = i64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Running,
    Waiting(usize),
    Done,
}

#[derive(Debug, Clone, Copy)]
enum Limit {
    /// Run while the index is below this bound.
    Stop(i64),
    /// Run this many trips; trips at or past `n` are inactive.
    Trips { trips: i64, n: i64 },
}

#[derive(Debug, Clone)]
struct Loop {
    items: Items,
    base: i64,
    step: i64,
    k: i64,
    limit: Limit,
}

#[derive(Debug, Default)]
struct Excl {
    array: usize,
    locks: Vec<i64>,
    won: bool,
}

struct Thread {
    pc: usize,
    locals: Locals,
    status: Status,
    active: bool,
    loops: Vec<Option<Loop>>,
    held: Vec<(Place, String)>,
    excl: Excl,
}

pub(crate) struct Outcome {
    pub reduce_values: Vec<bool>,
    /// A Retry (not a Respawn) executed.
    pub retried: bool,
}

struct Launch<'a, 'm, 'p> {
    mem: &'m mut Memory<'p>,
    pipe: Option<&'a mut PipeState>,
    kernel: &'a str,
    ops: &'a [Op],
    nthreads: i64,
    owners: HashMap<Place, usize>,
    pending_round: Vec<Claim>,
    out: Outcome,
}

/// Launches plain kernel `kernel` with parameters already bound in `args`.
/// `serial` runs it on a single thread.
pub(crate) fn launch(
    mem: &mut Memory,
    config: &SimConfig,
    kernel: &str,
    args: Locals,
    pipe: Option<&mut PipeState>,
    serial: bool,
) -> Result<Outcome, InterpError> {
    let prog = mem.prog;
    let compiled = &prog.compiled[kernel];
    let info = &prog.infos[kernel];
    mem.epoch += 1;
    let wl_size = pipe.as_ref().map(|p| p.input.len());
    let nthreads = if serial {
        1
    } else if let Some(n) = config.launch_threads {
        n
    } else {
        let needed = compiled.first_forall.as_ref().map(|it| mem.items(&args, it, wl_size).map(|i| i.len()));
        match needed {
            None => 1,
            Some(Ok(n)) => (n.max(1) as usize).min(config.resident_threads),
            Some(Err(_)) => config.resident_threads,
        }
    };
    if info.needs_global_barrier() && nthreads > config.resident_threads {
        return Err(InterpError::Deadlock {
            kernel: kernel.to_string(),
            message: format!(
                "{nthreads} threads launched but only {} can be resident, so the global barrier never completes",
                config.resident_threads
            ),
        });
    }
    let epoch = mem.epoch;
    mem.trace(|| format!("launch kernel={kernel} threads={nthreads} epoch={epoch} in={}", wl_size.unwrap_or(0)));
    let mut threads: Vec<Thread> = (0..nthreads)
        .map(|_| Thread {
            pc: 0,
            locals: args.clone(),
            status: Status::Running,
            active: true,
            loops: vec![None; compiled.slots],
            held: Vec::new(),
            excl: Excl::default(),
        })
        .collect();
    let mut l = Launch {
        mem,
        pipe,
        kernel,
        ops: &compiled.ops,
        nthreads: nthreads as i64,
        owners: HashMap::new(),
        pending_round: Vec::new(),
        out: Outcome { reduce_values: Vec::new(), retried: false },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.schedule_seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut steps = 0u64;
    loop {
        let mut order: Vec<usize> = (0..threads.len()).filter(|&t| threads[t].status == Status::Running).collect();
        if order.is_empty() {
            if !l.release_barrier(&mut threads, &compiled.sites)? {
                break;
            }
            continue;
        }
        if config.schedule_seed != 0 {
            order.shuffle(&mut rng);
        }
        let mut progress = false;
        for t in order {
            if threads[t].status != Status::Running {
                continue;
            }
            steps += 1;
            if steps > config.max_steps {
                return Err(InterpError::StepLimit { kernel: kernel.to_string(), steps: config.max_steps });
            }
            progress |= l.step(t, &mut threads[t]).map_err(|message| InterpError::Runtime {
                kernel: kernel.to_string(),
                message: format!("thread {t}: {message}"),
            })?;
        }
        if !progress {
            return Err(InterpError::Deadlock {
                kernel: kernel.to_string(),
                message: "every running thread is waiting for a lock that is never released".into(),
            });
        }
    }
    l.mem.stats.steps += steps;
    let out = l.out;
    l.mem.stats.launches.push(LaunchRecord {
        kernel: kernel.to_string(),
        threads: nthreads,
        reduce_values: out.reduce_values.clone(),
        serial,
    });
    Ok(out)
}

impl Launch<'_, '_, '_> {
    /// Releases the threads waiting at a barrier. Returns false when every
    /// thread has finished.
    fn release_barrier(&mut self, threads: &mut [Thread], sites: &[bool]) -> Result<bool, InterpError> {
        let waiting: Vec<usize> = threads
            .iter()
            .filter_map(|t| match t.status {
                Status::Waiting(s) => Some(s),
                _ => None,
            })
            .collect();
        let Some(&site) = waiting.first() else {
            return Ok(false);
        };
        let uniformity = |message: String| InterpError::Uniformity { kernel: self.kernel.to_string(), message };
        if waiting.iter().any(|&s| s != site) {
            return Err(uniformity("threads wait at different barriers".into()));
        }
        if sites[site] && waiting.len() < threads.len() {
            return Err(uniformity("Exclusive reached by only some of the launched threads".into()));
        }
        for t in threads.iter_mut().filter(|t| t.status != Status::Done) {
            t.status = Status::Running;
            t.pc += 1;
        }
        let n = waiting.len();
        self.mem.trace(|| format!("barrier site={site} threads={n}"));
        if sites[site] && !self.pending_round.is_empty() {
            let mut round = std::mem::take(&mut self.pending_round);
            round.sort_by_key(|c| c.thread);
            self.mem.stats.exclusive_rounds.push(round);
        }
        Ok(true)
    }

    fn pipe(&mut self) -> Result<&mut PipeState, String> {
        self.pipe.as_deref_mut().ok_or_else(|| "worklist used outside a pipe context".to_string())
    }

    fn lock_name(&self, lock: &crate::ast::Expr, p: &Place) -> String {
        let root = lvalue_root(lock).unwrap_or("?");
        match p {
            Place::Elem(_, i) => format!("{root}[{i}]"),
            _ => root.to_string(),
        }
    }

    fn start_loop(&mut self, th: &Thread, iter: &crate::ast::Expr) -> Result<Items, String> {
        let wl_size = self.pipe.as_ref().map(|p| p.input.len());
        self.mem.items(&th.locals, iter, wl_size)
    }

    /// Runs the instruction at the thread's position. Returns whether the
    /// thread made progress.
    fn step(&mut self, tid: usize, th: &mut Thread) -> Result<bool, String> {
        let ops = self.ops;
        let op = &ops[th.pc];
        let mut next = th.pc + 1;
        match op {
            Op::Simple(s) => self.mem.exec_simple(&mut th.locals, s)?,
            Op::JumpIfNot(cond, t) => {
                if !truthy(&self.mem.eval(&th.locals, cond)?)? {
                    next = *t;
                }
            }
            Op::Jump(t) => next = *t,
            Op::LoopInit { slot, iter } => {
                let items = self.start_loop(th, iter)?;
                let n = items.len();
                th.loops[*slot] = Some(Loop { items, base: 0, step: 1, k: 0, limit: Limit::Stop(n) });
            }
            Op::ForAllInit { slot, iter, mapping } => {
                let items = self.start_loop(th, iter)?;
                let (n, t, tid) = (items.len(), self.nthreads, tid as i64);
                let chunk = (n + t - 1) / t;
                let uniform = self.mem.prog.infos[self.kernel].needs_global_barrier();
                let (base, step, limit) = match (mapping, uniform) {
                    (Mapping::Consecutive, false) => (tid, t, Limit::Stop(n)),
                    (Mapping::Blocked, false) => (tid * chunk, 1, Limit::Stop(((tid + 1) * chunk).min(n))),
                    (Mapping::Consecutive, true) => (tid, t, Limit::Trips { trips: chunk, n }),
                    (Mapping::Blocked, true) => (tid * chunk, 1, Limit::Trips { trips: chunk, n }),
                };
                th.loops[*slot] = Some(Loop { items, base, step, k: 0, limit });
            }
            Op::LoopNext { slot, var, exit } | Op::ForAllNext { slot, var, exit } => {
                let lp = th.loops[*slot].as_mut().expect("loop initialized");
                let idx = lp.base + lp.k * lp.step;
                lp.k += 1;
                let bound = match lp.limit {
                    Limit::Stop(stop) => (idx < stop).then_some(true),
                    Limit::Trips { trips, n } => (lp.k <= trips).then_some(idx < n),
                };
                match bound {
                    None => {
                        th.loops[*slot] = None;
                        th.active = true;
                        next = *exit;
                    }
                    Some(active) => {
                        let v = match (&lp.items, active) {
                            (items, true) => items.nth(&self.mem.heap, idx)?,
                            (Items::Range(b, _), false) => Value::Int(b + idx),
                            (Items::Elems { .. }, false) => Value::Int(0),
                        };
                        th.active = active;
                        th.locals.insert(var.clone(), v);
                    }
                }
            }
            Op::JumpIfInactive(t) => {
                if !th.active {
                    next = *t;
                }
            }
            Op::AtomicAcquire { lock, fail } => {
                let p = self.mem.place(&th.locals, lock)?;
                if matches!(p, Place::Local(_)) {
                    return Err(format!("lock `{lock}` is not shared memory"));
                }
                // compare-and-swap 0 -> 1 on the lock word
                if as_int(&self.mem.load(&th.locals, &p)?)? == 0 {
                    self.mem.store(&mut th.locals, p.clone(), Value::Int(1))?;
                    if let Some(owner) = self.owners.insert(p.clone(), tid) {
                        return Err(format!("lock `{lock}` acquired while thread {owner} holds it"));
                    }
                    let name = self.lock_name(lock, &p);
                    self.mem.trace(|| format!("acquire thread={tid} lock={name}"));
                    th.held.push((p, name));
                } else {
                    match fail {
                        Some(t) => next = *t,
                        None => return Ok(false),
                    }
                }
            }
            Op::AtomicRelease => {
                let (p, name) = th.held.pop().expect("release follows an acquire");
                self.owners.remove(&p);
                self.mem.store(&mut th.locals, p, Value::Int(0))?;
                self.mem.trace(|| format!("release thread={tid} lock={name}"));
            }
            Op::Barrier { site } => {
                th.status = Status::Waiting(*site);
                return Ok(true);
            }
            Op::ExclClaim(x) => {
                let array = match self.mem.eval(&th.locals, &x.object)? {
                    Value::Array(id) => id,
                    other => return Err(format!("Exclusive object is {}, not an array", other.type_name())),
                };
                let mut locks = Vec::new();
                if th.active {
                    let count = as_int(&self.mem.eval(&th.locals, &x.count)?)?.max(0);
                    let items = match &x.locks {
                        LockSource::Array(a) => match self.mem.eval(&th.locals, a)? {
                            Value::Array(id) => Items::Elems { array: id, len: self.mem.heap.len(id) },
                            other => return Err(format!("lock list is {}, not an array", other.type_name())),
                        },
                        LockSource::ArrayIterator(it) => self.start_loop(th, it)?,
                    };
                    for j in 0..count.min(items.len()) {
                        let l = as_int(&items.nth(&self.mem.heap, j)?)?;
                        self.mem.heap.get(array, l).map_err(|e| format!("Exclusive lock {l}: {e}"))?;
                        locks.push(l);
                    }
                }
                for &l in &locks {
                    self.mem.slots.insert((array, l), tid as i64);
                }
                th.excl = Excl { array, locks, won: false };
            }
            Op::ExclRecheck => {
                let me = tid as i64;
                for &l in &th.excl.locks {
                    let slot = self.mem.slots.entry((th.excl.array, l)).or_insert(UNCLAIMED);
                    if *slot != me && me < *slot {
                        *slot = me;
                    }
                }
            }
            Op::ExclConfirm => {
                let me = tid as i64;
                let slots = &self.mem.slots;
                th.excl.won =
                    th.active && th.excl.locks.iter().all(|l| slots.get(&(th.excl.array, *l)) == Some(&me));
                if th.active {
                    let (locks, won) = (th.excl.locks.clone(), th.excl.won);
                    self.mem.trace(|| format!("exclusive thread={tid} locks={locks:?} won={won}"));
                    self.pending_round.push(Claim { thread: tid, locks, won });
                }
            }
            Op::ExclClear => {
                for l in &th.excl.locks {
                    self.mem.slots.remove(&(th.excl.array, *l));
                }
            }
            Op::JumpIfLost(t) => {
                if !th.excl.won {
                    next = *t;
                }
            }
            Op::Pop { var, index } => {
                let i = as_int(&self.mem.eval(&th.locals, index)?)?;
                let epoch = self.mem.epoch;
                let (item, visible) = self.pipe()?.input.pop(i, epoch)?;
                if !visible {
                    self.mem.stats.epoch_violations += 1;
                }
                th.locals.insert(var.clone(), Value::Int(item));
                self.mem.trace(|| format!("pop thread={tid} index={i} item={item}"));
            }
            Op::Push(e) | Op::Retry(e) | Op::Respawn(e) => {
                let item = as_int(&self.mem.eval(&th.locals, e)?)?;
                let epoch = self.mem.epoch;
                let (list, name) = match op {
                    Op::Push(_) => (&mut self.pipe()?.output, "out"),
                    _ => (&mut self.pipe()?.retry, "retry"),
                };
                list.push(item, epoch)?;
                if matches!(op, Op::Retry(_)) {
                    self.out.retried = true;
                }
                self.mem.trace(|| format!("push thread={tid} list={name} item={item}"));
            }
            Op::Reduce { value, target } => {
                let b = truthy(&self.mem.eval(&th.locals, value)?)?;
                self.out.reduce_values.push(b);
                self.mem.trace(|| format!("reduce thread={tid} value={b}"));
                match target {
                    ReduceTarget::Jump(t) => next = *t,
                    ReduceTarget::Deactivate(t) => {
                        th.active = false;
                        next = *t;
                    }
                    ReduceTarget::Exit => return self.finish(th).map(|_| true),
                }
            }
            Op::Exit => return self.finish(th).map(|_| true),
        }
        th.pc = next;
        Ok(true)
    }

    fn finish(&mut self, th: &mut Thread) -> Result<(), String> {
        if let Some((_, name)) = th.held.last() {
            return Err(format!("thread finished while holding lock {name}"));
        }
        th.status = Status::Done;
        Ok(())
    }
}
