//! Lowering of plain kernels to a flat instruction list.
//!
//! Virtual threads need a resumable position, so kernel bodies are compiled
//! to instructions addressed by index. The layout mirrors the generated CUDA:
//! barrier kernels give every thread the same number of outermost ForAll
//! trips, idle trips are marked inactive, and the statements between two
//! barriers form one group that inactive threads skip.

use std::collections::HashMap;

use crate::ast::*;
use crate::op::SimpleStmt;
use crate::sema::effective_mapping;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ReduceTarget {
    /// Continue with the loop step at this index.
    Jump(usize),
    /// Mark the thread inactive for the rest of the trip and jump.
    Deactivate(usize),
    /// Leave the kernel.
    Exit,
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Simple(SimpleStmt),
    JumpIfNot(Expr, usize),
    Jump(usize),
    /// Sequential loop over an iterator evaluated once.
    LoopInit { slot: usize, iter: Expr },
    LoopNext { slot: usize, var: String, exit: usize },
    /// Outermost ForAll: iterations spread over the launched threads.
    ForAllInit { slot: usize, iter: Expr, mapping: Mapping },
    ForAllNext { slot: usize, var: String, exit: usize },
    JumpIfInactive(usize),
    AtomicAcquire { lock: Expr, fail: Option<usize> },
    AtomicRelease,
    Barrier { site: usize },
    ExclClaim(Box<Exclusive>),
    ExclRecheck,
    ExclConfirm,
    ExclClear,
    JumpIfLost(usize),
    Pop { var: String, index: Expr },
    Push(Expr),
    Retry(Expr),
    Respawn(Expr),
    Reduce { value: Expr, target: ReduceTarget },
    Exit,
}

#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub ops: Vec<Op>,
    pub slots: usize,
    /// For each barrier site, whether it belongs to an Exclusive.
    pub sites: Vec<bool>,
    /// Iterator of the first outermost ForAll, used to size launches.
    pub first_forall: Option<Expr>,
}

enum Target {
    Next(usize),
    /// Forward jump to the end of an active group; the listed ops need the
    /// address once it is known.
    Skip(Vec<usize>),
}

struct Compiler<'a> {
    kernel: &'a Kernel,
    code: &'a HashMap<String, Vec<SimpleStmt>>,
    ops: Vec<Op>,
    slots: usize,
    sites: Vec<bool>,
    uniform: bool,
    depth: usize,
    targets: Vec<Target>,
    first_forall: Option<Expr>,
}

/// Compiles a plain kernel. `code` maps every CBlock text to its parsed
/// statements; `uniform` is set for kernels that use device-wide barriers.
pub(crate) fn compile(
    kernel: &Kernel,
    code: &HashMap<String, Vec<SimpleStmt>>,
    uniform: bool,
) -> Result<Compiled, String> {
    let mut c = Compiler {
        kernel,
        code,
        ops: Vec::new(),
        slots: 0,
        sites: Vec::new(),
        uniform,
        depth: 0,
        targets: Vec::new(),
        first_forall: None,
    };
    c.block(&kernel.body)?;
    c.ops.push(Op::Exit);
    Ok(Compiled { ops: c.ops, slots: c.slots, sites: c.sites, first_forall: c.first_forall })
}

impl Compiler<'_> {
    fn here(&self) -> usize {
        self.ops.len()
    }

    fn emit(&mut self, op: Op) -> usize {
        self.ops.push(op);
        self.ops.len() - 1
    }

    /// Points the forward jump at `at` to the current position.
    fn patch(&mut self, at: usize) {
        let to = self.here();
        match &mut self.ops[at] {
            Op::JumpIfNot(_, t)
            | Op::Jump(t)
            | Op::JumpIfInactive(t)
            | Op::JumpIfLost(t)
            | Op::LoopNext { exit: t, .. }
            | Op::ForAllNext { exit: t, .. }
            | Op::AtomicAcquire { fail: Some(t), .. }
            | Op::Reduce { target: ReduceTarget::Deactivate(t), .. } => *t = to,
            other => unreachable!("not a forward jump: {other:?}"),
        }
    }

    fn slot(&mut self) -> usize {
        self.slots += 1;
        self.slots - 1
    }

    fn barrier(&mut self, exclusive: bool) {
        self.sites.push(exclusive);
        let site = self.sites.len() - 1;
        self.emit(Op::Barrier { site });
    }

    fn block(&mut self, b: &[Stmt]) -> Result<(), String> {
        b.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), String> {
        match &s.kind {
            StmtKind::CBlock(cb) => {
                let stmts = self
                    .code
                    .get(&cb.code)
                    .ok_or_else(|| format!("operator code `{}` cannot be interpreted", cb.code.trim()))?;
                for st in stmts {
                    self.emit(Op::Simple(st.clone()));
                }
            }
            StmtKind::ForAll(f) if self.depth == 0 => self.forall(f)?,
            StmtKind::ForAll(ForAll { var, iter, body, .. }) => {
                self.depth += 1;
                self.seq_loop(var, iter, body)?;
                self.depth -= 1;
            }
            StmtKind::For { var, iter, body } => self.seq_loop(var, iter, body)?,
            StmtKind::While { cond, body } => {
                let top = self.here();
                let test = self.emit(Op::JumpIfNot(cond.clone(), 0));
                self.block(body)?;
                self.emit(Op::Jump(top));
                self.patch(test);
            }
            StmtKind::If { cond, then, els } => {
                let test = self.emit(Op::JumpIfNot(cond.clone(), 0));
                self.block(then)?;
                if els.is_empty() {
                    self.patch(test);
                } else {
                    let skip = self.emit(Op::Jump(0));
                    self.patch(test);
                    self.block(els)?;
                    self.patch(skip);
                }
            }
            StmtKind::Atomic { lock, locked, failed } => {
                let acq = self.emit(Op::AtomicAcquire { lock: lock.clone(), fail: failed.as_ref().map(|_| 0) });
                self.block(locked)?;
                self.emit(Op::AtomicRelease);
                if let Some(failed) = failed {
                    let skip = self.emit(Op::Jump(0));
                    self.patch(acq);
                    self.block(failed)?;
                    self.patch(skip);
                }
            }
            StmtKind::Exclusive(x) => self.exclusive(x)?,
            StmtKind::SyncRunningThreads => self.barrier(false),
            StmtKind::Retry(e) => {
                self.emit(Op::Retry(e.clone()));
            }
            StmtKind::Respawn(e) => {
                self.emit(Op::Respawn(e.clone()));
            }
            StmtKind::ReduceAndReturn(e) => {
                let target = match self.targets.last() {
                    Some(Target::Next(pc)) => ReduceTarget::Jump(*pc),
                    Some(Target::Skip(_)) => ReduceTarget::Deactivate(0),
                    None => ReduceTarget::Exit,
                };
                let at = self.emit(Op::Reduce { value: e.clone(), target });
                if let Some(Target::Skip(patches)) = self.targets.last_mut() {
                    patches.push(at);
                }
            }
            StmtKind::WlPop { var, index } => {
                self.emit(Op::Pop { var: var.clone(), index: index.clone() });
            }
            StmtKind::WlPush(e) => {
                self.emit(Op::Push(e.clone()));
            }
            StmtKind::Invoke(_) | StmtKind::Iterate(_) | StmtKind::Pipe(_) => {
                return Err(format!("{} is only valid in host kernels", s.kind.construct_name()));
            }
        }
        Ok(())
    }

    fn seq_loop(&mut self, var: &str, iter: &Expr, body: &[Stmt]) -> Result<(), String> {
        let slot = self.slot();
        self.emit(Op::LoopInit { slot, iter: iter.clone() });
        let next = self.emit(Op::LoopNext { slot, var: var.to_string(), exit: 0 });
        self.targets.push(Target::Next(next));
        self.block(body)?;
        self.targets.pop();
        self.emit(Op::Jump(next));
        self.patch(next);
        Ok(())
    }

    fn forall(&mut self, f: &ForAll) -> Result<(), String> {
        if self.first_forall.is_none() {
            self.first_forall = Some(f.iter.clone());
        }
        let slot = self.slot();
        self.depth += 1;
        self.emit(Op::ForAllInit { slot, iter: f.iter.clone(), mapping: effective_mapping(self.kernel, f) });
        let next = self.emit(Op::ForAllNext { slot, var: f.var.clone(), exit: 0 });
        self.targets.push(Target::Next(next));
        if self.uniform {
            let mut group: Vec<&Stmt> = Vec::new();
            for s in &f.body {
                if matches!(s.kind, StmtKind::SyncRunningThreads | StmtKind::Exclusive(_)) {
                    self.group(&group)?;
                    group.clear();
                    self.stmt(s)?;
                } else {
                    group.push(s);
                }
            }
            self.group(&group)?;
        } else {
            self.block(&f.body)?;
        }
        self.targets.pop();
        self.emit(Op::Jump(next));
        self.patch(next);
        self.depth -= 1;
        Ok(())
    }

    /// Statements only active threads run.
    fn guarded(&mut self, f: impl FnOnce(&mut Self) -> Result<(), String>) -> Result<(), String> {
        let skip = self.emit(Op::JumpIfInactive(0));
        self.targets.push(Target::Skip(Vec::new()));
        f(self)?;
        if let Some(Target::Skip(patches)) = self.targets.pop() {
            for p in patches {
                self.patch(p);
            }
        }
        self.patch(skip);
        Ok(())
    }

    fn group(&mut self, group: &[&Stmt]) -> Result<(), String> {
        if group.is_empty() {
            return Ok(());
        }
        self.guarded(|c| group.iter().try_for_each(|s| c.stmt(s)))
    }

    fn exclusive(&mut self, x: &Exclusive) -> Result<(), String> {
        self.emit(Op::ExclClaim(Box::new(Exclusive {
            locked: Vec::new(),
            failed: None,
            ..x.clone()
        })));
        self.barrier(true);
        self.emit(Op::ExclRecheck);
        self.barrier(true);
        self.emit(Op::ExclConfirm);
        self.barrier(true);
        self.emit(Op::ExclClear);
        self.guarded(|c| {
            let lost = c.emit(Op::JumpIfLost(0));
            c.block(&x.locked)?;
            match &x.failed {
                Some(failed) if !failed.is_empty() => {
                    let skip = c.emit(Op::Jump(0));
                    c.patch(lost);
                    c.block(failed)?;
                    c.patch(skip);
                }
                _ => c.patch(lost),
            }
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::op::parse_operator_code;

    fn compiled(src: &str, uniform: bool) -> Compiled {
        let m = parse_source(src, "t.irgl").unwrap();
        let mut code = HashMap::new();
        crate::ast::walk_block(&m.kernels[0].body, &mut |s| {
            if let StmtKind::CBlock(cb) = &s.kind {
                code.insert(cb.code.clone(), parse_operator_code(&cb.code).unwrap());
            }
        });
        compile(&m.kernels[0], &code, uniform).unwrap()
    }

    #[test]
    fn reduce_in_forall_jumps_to_the_next_trip() {
        let c = compiled("Kernel k() { ForAll(i In range(4)) { ReduceAndReturn(true); x = 1; } }", false);
        let next = c.ops.iter().position(|o| matches!(o, Op::ForAllNext { .. })).unwrap();
        assert!(c.ops.iter().any(|o| matches!(o, Op::Reduce { target: ReduceTarget::Jump(t), .. } if *t == next)));
        assert_eq!(c.first_forall, Some(Expr::Call("range".into(), vec![Expr::Int(4)])));
    }

    #[test]
    fn exclusive_has_three_barriers_and_a_guard() {
        let c = compiled("Kernel k(m) { ForAll(i In wl) { Exclusive(m, 1, In range(i, i + 1)) { x = 1; } } }", true);
        assert_eq!(c.sites, vec![true, true, true]);
        let guards = c.ops.iter().filter(|o| matches!(o, Op::JumpIfInactive(_))).count();
        assert_eq!(guards, 1);
    }

    #[test]
    fn uniform_groups_split_at_barriers() {
        let c = compiled(
            "Kernel k() { ForAll(i In range(3)) { a = 1; SyncRunningThreads(); ReduceAndReturn(true); } }",
            true,
        );
        let deact = c.ops.iter().find_map(|o| match o {
            Op::Reduce { target: ReduceTarget::Deactivate(t), .. } => Some(*t),
            _ => None,
        });
        let t = deact.unwrap();
        assert!(matches!(c.ops[t], Op::Jump(_)), "group end precedes the loop back-edge");
        assert_eq!(c.sites, vec![false]);
    }
}
