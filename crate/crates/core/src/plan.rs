//! Launch planning: block sizes, grid policies and the control-kernel block
//! size of outlined pipes.

use std::collections::BTreeMap;
use std::fmt;

use crate::ast::*;
use crate::diag::{rules, Diagnostic};
use crate::sema::{Analysis, BlockConstraint, KernelInfo};

/// The member constraints of a pipe admit no common block size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyIntersection;

impl fmt::Display for EmptyIntersection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("iteration outlining cannot be performed on this Pipe")
    }
}

/// Largest block size admitted by every constraint.
pub fn t_control(constraints: &[BlockConstraint]) -> Result<u32, EmptyIntersection> {
    let (lo, hi) = constraints.iter().fold((1, MAX_BLOCK_SIZE), |(lo, hi), c| {
        let (a, b) = c.domain();
        (lo.max(a), hi.min(b))
    });
    if lo <= hi {
        Ok(hi)
    } else {
        Err(EmptyIntersection)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPolicy {
    /// `sm_count * multiplier` blocks.
    FixedFromSM { multiplier: u32 },
    /// As many blocks as can be resident at once, computed at run time.
    OccupancyCapped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaunchPlan {
    pub kernel: String,
    pub grid_size_policy: GridPolicy,
    pub block_size: u32,
    pub outlined: bool,
}

impl LaunchPlan {
    /// Grid size for a fixed policy; `None` when it is decided at run time.
    pub fn grid_size(&self, sm_count: u32) -> Option<u32> {
        match self.grid_size_policy {
            GridPolicy::FixedFromSM { multiplier } => Some(sm_count * multiplier),
            GridPolicy::OccupancyCapped => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanConfig {
    pub sm_count: u32,
    /// Resident blocks per SM assumed by fixed grids.
    pub blocks_per_sm: u32,
    /// Per-kernel block size chosen by the user.
    pub block_size_overrides: BTreeMap<String, u32>,
    pub outline: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig { sm_count: 8, blocks_per_sm: 8, block_size_overrides: BTreeMap::new(), outline: false }
    }
}

/// Plans one kernel. `pipe_membership` holds the constraints of every kernel
/// of the outlined pipe this kernel belongs to, if any.
pub fn plan_launch(
    info: &KernelInfo,
    pipe_membership: Option<&[BlockConstraint]>,
    config: &PlanConfig,
) -> Result<LaunchPlan, EmptyIntersection> {
    let grid_size_policy = if info.needs_global_barrier() {
        GridPolicy::OccupancyCapped
    } else {
        GridPolicy::FixedFromSM { multiplier: config.blocks_per_sm }
    };
    let (block_size, outlined) = match pipe_membership {
        Some(members) => (t_control(members)?, true),
        None => {
            let c = effective_constraint(info, config);
            (c.domain().1, false)
        }
    };
    Ok(LaunchPlan { kernel: info.kernel.clone(), grid_size_policy, block_size, outlined })
}

/// A kernel's constraint, narrowed to the user's override when one is given.
fn effective_constraint(info: &KernelInfo, config: &PlanConfig) -> BlockConstraint {
    match config.block_size_overrides.get(&info.kernel) {
        Some(&n) => BlockConstraint::Fixed(n),
        None => info.block_constraint,
    }
}

/// An outermost Pipe of a host kernel, identified by its pre-order position
/// among the outermost Pipes of that kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutlinedPipe {
    pub host: String,
    pub index: usize,
    pub members: Vec<String>,
    pub block_size: u32,
}

impl OutlinedPipe {
    pub fn control_name(&self) -> String {
        format!("{}_pipe{}", self.host, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulePlan {
    pub plans: BTreeMap<String, LaunchPlan>,
    pub outlined: Vec<OutlinedPipe>,
    pub warnings: Vec<Diagnostic>,
}

impl ModulePlan {
    pub fn outlined_pipe(&self, host: &str, index: usize) -> Option<&OutlinedPipe> {
        self.outlined.iter().find(|p| p.host == host && p.index == index)
    }
}

/// Outermost Pipe statements of a kernel body in pre-order.
pub fn outermost_pipes(body: &[Stmt]) -> Vec<&Stmt> {
    fn go<'a>(b: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
        for s in b {
            match &s.kind {
                StmtKind::Pipe(_) => out.push(s),
                other => {
                    for child in other.children() {
                        go(child, out);
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    go(body, &mut out);
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Plans every plain kernel of an analyzed module.
///
/// Each kernel gets one block size for all its launches. With outlining on,
/// pipes that share a kernel must agree on its size, so they are grouped and
/// the group's control block size is the intersection over all their members.
/// A group whose intersection is empty stays on host orchestration and each
/// of its pipes gets a warning.
pub fn plan_module(m: &Module, analysis: &Analysis, config: &PlanConfig) -> Result<ModulePlan, Vec<Diagnostic>> {
    let file = m.origin.clone().unwrap_or_default();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    for (name, &n) in &config.block_size_overrides {
        match analysis.infos.get(name) {
            Some(info) if info.kind == KernelKind::Plain => {
                if !info.block_constraint.admits(n) {
                    let span = m.kernel(name).and_then(|k| k.span).unwrap_or_default();
                    errors.push(
                        Diagnostic::error(
                            rules::BLOCK_SIZE_OVERRIDE,
                            span,
                            format!("block size {n} for `{name}` is outside its constraint {}", info.block_constraint),
                        )
                        .in_file(file.clone()),
                    );
                }
            }
            _ => errors.push(
                Diagnostic::error(
                    rules::BLOCK_SIZE_OVERRIDE,
                    Span::new(1, 1, 0),
                    format!("block size override names `{name}`, which is not a plain kernel"),
                )
                .in_file(file.clone()),
            ),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    // Candidate pipes and their groups.
    let mut pipes: Vec<(String, usize, Vec<String>, Span)> = Vec::new();
    if config.outline {
        for k in m.kernels.iter().filter(|k| k.is_host()) {
            for (i, s) in outermost_pipes(&k.body).into_iter().enumerate() {
                let StmtKind::Pipe(p) = &s.kind else { unreachable!("outermost_pipes yields pipes") };
                let members: Vec<String> = invoked_kernels(&p.body)
                    .into_iter()
                    .filter(|n| analysis.infos.get(n).is_some_and(|i| i.kind == KernelKind::Plain))
                    .collect();
                pipes.push((k.name.clone(), i, members, s.span.or(k.span).unwrap_or_default()));
            }
        }
    }
    let mut parent: Vec<usize> = (0..pipes.len()).collect();
    for a in 0..pipes.len() {
        for b in a + 1..pipes.len() {
            if pipes[a].2.iter().any(|k| pipes[b].2.contains(k)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut membership: BTreeMap<String, Vec<BlockConstraint>> = BTreeMap::new();
    let mut outlined = Vec::new();
    for root in 0..pipes.len() {
        let group: Vec<usize> = (0..pipes.len()).filter(|&i| find(&mut parent, i) == root).collect();
        if group.is_empty() {
            continue;
        }
        let mut names: Vec<String> = Vec::new();
        for &i in &group {
            for n in &pipes[i].2 {
                if !names.contains(n) {
                    names.push(n.clone());
                }
            }
        }
        let constraints: Vec<BlockConstraint> =
            names.iter().map(|n| effective_constraint(&analysis.infos[n], config)).collect();
        match t_control(&constraints) {
            Ok(size) => {
                for n in &names {
                    membership.insert(n.clone(), constraints.clone());
                }
                for &i in &group {
                    let (host, index, members, _) = &pipes[i];
                    outlined.push(OutlinedPipe {
                        host: host.clone(),
                        index: *index,
                        members: members.clone(),
                        block_size: size,
                    });
                }
            }
            Err(e) => {
                for &i in &group {
                    let (host, index, members, span) = &pipes[i];
                    let shown: Vec<String> = members
                        .iter()
                        .map(|n| format!("{n}: {}", effective_constraint(&analysis.infos[n], config)))
                        .collect();
                    warnings.push(
                        Diagnostic::warning(
                            rules::OUTLINING_IMPOSSIBLE,
                            *span,
                            format!(
                                "{e} (pipe {index} of `{host}`; member block sizes [{}] have no common value); using host orchestration",
                                shown.join(", ")
                            ),
                        )
                        .in_file(file.clone()),
                    );
                }
            }
        }
    }
    outlined.sort_by(|a, b| (&a.host, a.index).cmp(&(&b.host, b.index)));

    let mut plans = BTreeMap::new();
    for k in m.kernels.iter().filter(|k| k.kind == KernelKind::Plain) {
        let info = &analysis.infos[&k.name];
        let plan = plan_launch(info, membership.get(&k.name).map(Vec::as_slice), config)
            .expect("outlined groups were checked above");
        if !plan.block_size.is_multiple_of(32) {
            warnings.push(
                Diagnostic::warning(
                    rules::BLOCK_SIZE_NOT_WARP_MULTIPLE,
                    k.span.unwrap_or_default(),
                    format!("block size {} of `{}` is not a multiple of 32", plan.block_size, k.name),
                )
                .in_file(file.clone()),
            );
        }
        plans.insert(k.name.clone(), plan);
    }
    Ok(ModulePlan { plans, outlined, warnings })
}

/// Plans as a fixed-width text table, one row per kernel.
pub fn format_table(m: &Module, plan: &ModulePlan, analysis: &Analysis, sm_count: u32) -> String {
    let mut rows = vec![[
        "kernel".to_string(),
        "constraint".to_string(),
        "block".to_string(),
        "grid".to_string(),
        "outlined".to_string(),
    ]];
    for k in m.kernels.iter().filter(|k| k.kind == KernelKind::Plain) {
        let p = &plan.plans[&k.name];
        let grid = match p.grid_size_policy {
            GridPolicy::FixedFromSM { multiplier } => format!("{} (SMs x {multiplier})", sm_count * multiplier),
            GridPolicy::OccupancyCapped => "occupancy".to_string(),
        };
        rows.push([
            k.name.clone(),
            analysis.infos[&k.name].block_constraint.to_string(),
            p.block_size.to_string(),
            grid,
            if p.outlined { "yes" } else { "no" }.to_string(),
        ]);
    }
    for op in &plan.outlined {
        rows.push([
            op.control_name(),
            "control".to_string(),
            op.block_size.to_string(),
            "occupancy".to_string(),
            "yes".to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..5).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sema::BlockConstraint::*;

    #[test]
    fn t_control_examples() {
        assert_eq!(t_control(&[Elastic, Elastic]), Ok(1024));
        assert_eq!(t_control(&[Elastic, Shrinkable(512), Fixed(128)]), Ok(128));
        assert_eq!(t_control(&[Fixed(128), Fixed(256)]), Err(EmptyIntersection));
        assert_eq!(t_control(&[Shrinkable(64), Fixed(128)]), Err(EmptyIntersection));
    }

    fn info(sync: bool, c: BlockConstraint) -> KernelInfo {
        KernelInfo {
            kernel: "k".into(),
            kind: KernelKind::Plain,
            uses_pop: false,
            uses_push: false,
            uses_retry: false,
            uses_sync: sync,
            uses_exclusive: false,
            uses_reduce: false,
            uses_worklist: false,
            reductions_required: Default::default(),
            block_constraint: c,
        }
    }

    #[test]
    fn plan_launch_examples() {
        let cfg = PlanConfig::default();
        let p = plan_launch(&info(true, Elastic), None, &cfg).unwrap();
        assert_eq!(p.grid_size_policy, GridPolicy::OccupancyCapped);
        let p = plan_launch(&info(false, Elastic), None, &cfg).unwrap();
        assert_eq!((p.block_size, p.grid_size(8)), (1024, Some(64)));
        let p = plan_launch(&info(false, Elastic), Some(&[Elastic, Shrinkable(256)]), &cfg).unwrap();
        assert_eq!((p.block_size, p.outlined), (256, true));
        assert!(plan_launch(&info(false, Fixed(128)), Some(&[Fixed(128), Fixed(256)]), &cfg).is_err());
    }
}
