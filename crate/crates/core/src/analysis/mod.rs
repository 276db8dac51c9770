//! Worst-case response-time analyses.
//!
//! Every protocol shares one holistic fixed point:
//!
//! ```text
//! R_i = C_i + E_i + B_i + F_i + sum_{h in lhp(i)} ceil(R_i / T_h) * (C_h + F_h)
//! ```
//!
//! `E_i` and `B_i` depend on remote response times through the request
//! windows of remote tasks, so all tasks are iterated together. Each pass
//! runs a per-task fixed point with the other estimates held at their
//! latest values; passes repeat until nothing changes. Starting from
//! `R_i = C_i + F_i` every iterate is non-decreasing.

pub mod baselines;
pub mod leftrs;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{charge_n, validate, ResourceId, SystemSpec, TaskId, TaskSpec};

pub use baselines::{
    checkpointing_access, msrpft_access, msrpft_overhead, response_time_baseline, OverheadModel,
};
pub use leftrs::response_time;

/// Cap on full-system passes.
pub const MAX_PASSES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    #[serde(rename = "leftrs")]
    LeftRs,
    #[serde(rename = "msrpft")]
    MsrpFt,
    #[serde(rename = "msrpft-of")]
    MsrpFtOf,
    Checkpointing,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::LeftRs,
        Protocol::MsrpFt,
        Protocol::MsrpFtOf,
        Protocol::Checkpointing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::LeftRs => "leftrs",
            Protocol::MsrpFt => "msrpft",
            Protocol::MsrpFtOf => "msrpft-of",
            Protocol::Checkpointing => "checkpointing",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            format!("unknown protocol `{s}` (expected leftrs, msrpft, msrpft-of or checkpointing)")
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: TaskId,
    #[serde(rename = "R_us")]
    pub r: u64,
    #[serde(rename = "E_us")]
    pub e: u64,
    #[serde(rename = "B_us")]
    pub b: u64,
    #[serde(rename = "F_us")]
    pub f: u64,
    /// True only when the holistic iteration converged and `R <= D`.
    pub schedulable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Outcome {
    Converged,
    /// Iteration stopped because this task's estimate passed its deadline.
    DeadlineExceeded {
        task: TaskId,
    },
    /// The pass cap was reached.
    NonConverged,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub protocol: Protocol,
    pub tasks: Vec<TaskResult>,
    pub schedulable: bool,
    pub iterations: usize,
    pub outcome: Outcome,
}

impl AnalysisResult {
    pub fn task(&self, id: TaskId) -> Option<&TaskResult> {
        self.tasks.iter().find(|t| t.task == id)
    }

    pub fn verdict_line(&self) -> String {
        let ok = self.tasks.iter().filter(|t| t.schedulable).count();
        match &self.outcome {
            Outcome::Converged if self.schedulable => format!(
                "{}: SCHEDULABLE ({}/{} tasks, {} passes)",
                self.protocol,
                ok,
                self.tasks.len(),
                self.iterations
            ),
            Outcome::Converged => format!(
                "{}: UNSCHEDULABLE ({}/{} tasks meet deadlines, {} passes)",
                self.protocol,
                ok,
                self.tasks.len(),
                self.iterations
            ),
            Outcome::DeadlineExceeded { task } => format!(
                "{}: UNSCHEDULABLE (task {} exceeds its deadline after {} passes)",
                self.protocol, task, self.iterations
            ),
            Outcome::NonConverged => format!(
                "{}: UNSCHEDULABLE (non-converged after {} passes)",
                self.protocol, self.iterations
            ),
        }
    }
}

/// Run-length encoded, non-increasing list of execution counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunList {
    /// `(n, count)` pairs with strictly decreasing `n`.
    runs: Vec<(u32, u64)>,
}

impl RunList {
    pub fn from_runs(mut runs: Vec<(u32, u64)>) -> Self {
        runs.retain(|&(_, c)| c > 0);
        runs.sort_by_key(|r| std::cmp::Reverse(r.0));
        let mut merged: Vec<(u32, u64)> = Vec::with_capacity(runs.len());
        for (n, c) in runs {
            match merged.last_mut() {
                Some(last) if last.0 == n => last.1 += c,
                _ => merged.push((n, c)),
            }
        }
        RunList { runs: merged }
    }

    pub fn from_values(values: &[u32]) -> Self {
        Self::from_runs(values.iter().map(|&n| (n, 1)).collect())
    }

    pub fn len(&self) -> u64 {
        self.runs.iter().map(|r| r.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn runs(&self) -> &[(u32, u64)] {
        &self.runs
    }

    /// 1-based access.
    pub fn nth(&self, p: u64) -> Option<u32> {
        if p == 0 {
            return None;
        }
        let mut seen = 0;
        for &(n, c) in &self.runs {
            seen += c;
            if p <= seen {
                return Some(n);
            }
        }
        None
    }

    /// Number of entries greater than one among the first `k`.
    pub fn above_one_in_head(&self, k: u64) -> u64 {
        let above: u64 = self.runs.iter().filter(|r| r.0 > 1).map(|r| r.1).sum();
        above.min(k)
    }

    /// The first `k` entries.
    pub fn head(&self, k: u64) -> RunList {
        let mut left = k;
        let mut runs = Vec::new();
        for &(n, c) in &self.runs {
            if left == 0 {
                break;
            }
            let take = c.min(left);
            runs.push((n, take));
            left -= take;
        }
        RunList { runs }
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.runs
            .iter()
            .flat_map(|&(n, c)| std::iter::repeat_n(n, c as usize))
            .collect()
    }
}

/// Precomputed per-system lookups shared by every engine.
pub(crate) struct Ctx<'a> {
    pub sys: &'a SystemSpec,
    pub lhp: Vec<Vec<usize>>,
    pub llp: Vec<Vec<usize>>,
    /// Task positions requesting each resource.
    pub users: Vec<Vec<usize>>,
    pub global: Vec<bool>,
    pub cs: Vec<u64>,
}

impl<'a> Ctx<'a> {
    pub fn new(sys: &'a SystemSpec) -> Result<Self, ModelError> {
        let violations = validate(sys);
        if !violations.is_empty() {
            let msg = violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            return Err(ModelError::Invalid(msg));
        }
        let n = sys.tasks.len();
        let mut lhp = vec![Vec::new(); n];
        let mut llp = vec![Vec::new(); n];
        for (a, ta) in sys.tasks.iter().enumerate() {
            for (b, tb) in sys.tasks.iter().enumerate() {
                if a != b && ta.core == tb.core {
                    if tb.priority > ta.priority {
                        lhp[a].push(b);
                    } else {
                        llp[a].push(b);
                    }
                }
            }
        }
        let k = sys.resources.len();
        let mut cs = vec![0; k];
        for r in &sys.resources {
            cs[r.id] = r.c;
        }
        let mut users = vec![Vec::new(); k];
        for (pos, t) in sys.tasks.iter().enumerate() {
            for x in t.accessed() {
                users[x].push(pos);
            }
        }
        let global = (0..k).map(|x| sys.is_global(x)).collect();
        Ok(Ctx {
            sys,
            lhp,
            llp,
            users,
            global,
            cs,
        })
    }

    pub fn task(&self, pos: usize) -> &TaskSpec {
        &self.sys.tasks[pos]
    }

    /// `N^x_{i,local}` at response-time estimate `ri`.
    pub fn n_local(&self, i: usize, x: ResourceId, ri: u64) -> u64 {
        let own = self.task(i).requests(x) as u64;
        own + self.lhp[i]
            .iter()
            .map(|&h| {
                let th = self.task(h);
                div_ceil(ri, th.t) * th.requests(x) as u64
            })
            .sum::<u64>()
    }

    /// `xi^x_{i,lambda_k}` for every remote core holding a requester of `x`.
    pub fn remote_lists(&self, i: usize, x: ResourceId, r: &[u64]) -> Vec<(usize, RunList)> {
        let core_i = self.task(i).core;
        let mut per_core: Vec<(usize, Vec<(u32, u64)>)> = Vec::new();
        for &j in &self.users[x] {
            let tj = self.task(j);
            if tj.core == core_i {
                continue;
            }
            let len = eta_len(tj, x, r[i], r[j]);
            match per_core.iter_mut().find(|(k, _)| *k == tj.core) {
                Some((_, runs)) => runs.push((charge_n(tj), len)),
                None => per_core.push((tj.core, vec![(charge_n(tj), len)])),
            }
        }
        per_core.sort_by_key(|(k, _)| *k);
        per_core
            .into_iter()
            .map(|(k, runs)| (k, RunList::from_runs(runs)))
            .collect()
    }

    /// Resources able to impose arrival blocking on `i` (`F^A(i)`), each
    /// with the largest lower-priority execution count `alpha`.
    pub fn arrival_candidates(&self, i: usize) -> Vec<(ResourceId, u32)> {
        let ti = self.task(i);
        let mut out = Vec::new();
        for x in 0..self.cs.len() {
            let alpha = self.llp[i]
                .iter()
                .map(|&l| self.task(l))
                .filter(|tl| tl.uses(x))
                .map(charge_n)
                .max();
            let Some(alpha) = alpha else { continue };
            let blocks = self.global[x]
                || self
                    .sys
                    .local_ceiling(ti.core, x)
                    .is_some_and(|ceil| ceil >= ti.priority);
            if blocks {
                out.push((x, alpha));
            }
        }
        out
    }

    /// Longest segment of task `pos`: its normal execution or its longest
    /// critical section.
    pub fn longest_segment(&self, pos: usize) -> u64 {
        let t = self.task(pos);
        t.accessed().map(|x| self.cs[x]).max().unwrap_or(0).max(t.c)
    }
}

pub(crate) fn div_ceil(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// `|eta^x_j(R_i, R_j)|`: requests of `tj` to `x` within the window.
pub(crate) fn eta_len(tj: &TaskSpec, x: ResourceId, ri: u64, rj: u64) -> u64 {
    div_ceil(ri + rj, tj.t) * tj.requests(x) as u64
}

/// Per-task terms produced by one engine at a given estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct Terms {
    pub e: u64,
    pub b: u64,
    pub f: u64,
}

pub(crate) trait Engine {
    fn protocol(&self) -> Protocol;
    fn fault_term(&self, ctx: &Ctx, i: usize) -> u64;
    fn resource_term(&self, ctx: &Ctx, i: usize, r: &[u64]) -> u64;
    fn arrival_blocking(&self, ctx: &Ctx, i: usize, r: &[u64]) -> u64;

    fn terms(&self, ctx: &Ctx, i: usize, r: &[u64]) -> Terms {
        Terms {
            e: self.resource_term(ctx, i, r),
            b: self.arrival_blocking(ctx, i, r),
            f: self.fault_term(ctx, i),
        }
    }
}

/// Iterates full-system passes, yielding the estimate vector after each.
pub(crate) struct Passes<'c, 'a, E: Engine> {
    ctx: &'c Ctx<'a>,
    engine: &'c E,
    faults: Vec<u64>,
    pub r: Vec<u64>,
    pub passes: usize,
    pub stopped: Option<Outcome>,
}

impl<'c, 'a, E: Engine> Passes<'c, 'a, E> {
    pub fn new(ctx: &'c Ctx<'a>, engine: &'c E) -> Self {
        let faults: Vec<u64> = (0..ctx.sys.tasks.len())
            .map(|i| engine.fault_term(ctx, i))
            .collect();
        let r = ctx.sys.tasks.iter().zip(&faults).map(|(t, f)| t.c + f).collect();
        Passes {
            ctx,
            engine,
            faults,
            r,
            passes: 0,
            stopped: None,
        }
    }

    fn rhs(&mut self, i: usize, ri: u64) -> u64 {
        let ctx = self.ctx;
        let t = ctx.task(i);
        self.r[i] = ri;
        let terms = self.engine.terms(ctx, i, &self.r);
        let interference: u64 = ctx.lhp[i]
            .iter()
            .map(|&h| div_ceil(ri, ctx.task(h).t) * (ctx.task(h).c + self.faults[h]))
            .sum();
        t.c + terms.e + terms.b + terms.f + interference
    }

    /// One pass. Returns `true` when some estimate changed.
    pub fn step(&mut self) -> bool {
        let mut changed = false;
        for i in 0..self.r.len() {
            let d = self.ctx.task(i).d;
            let before = self.r[i];
            let mut cur = before;
            loop {
                let next = self.rhs(i, cur);
                debug_assert!(next >= cur, "estimates never decrease");
                if next == cur {
                    break;
                }
                cur = next;
                if cur > d {
                    break;
                }
            }
            self.r[i] = cur;
            if cur != before {
                changed = true;
            }
            if cur > d {
                self.stopped = Some(Outcome::DeadlineExceeded {
                    task: self.ctx.task(i).id,
                });
                break;
            }
        }
        self.passes += 1;
        changed
    }

    pub fn run(mut self) -> AnalysisResult {
        let outcome = loop {
            let changed = self.step();
            if let Some(o) = self.stopped.take() {
                break o;
            }
            if !changed {
                break Outcome::Converged;
            }
            if self.passes >= MAX_PASSES {
                break Outcome::NonConverged;
            }
        };
        let converged = outcome == Outcome::Converged;
        let ctx = self.ctx;
        let tasks: Vec<TaskResult> = (0..self.r.len())
            .map(|i| {
                let terms = self.engine.terms(ctx, i, &self.r);
                let t = ctx.task(i);
                TaskResult {
                    task: t.id,
                    r: self.r[i],
                    e: terms.e,
                    b: terms.b,
                    f: terms.f,
                    schedulable: converged && self.r[i] <= t.d,
                }
            })
            .collect();
        AnalysisResult {
            protocol: self.engine.protocol(),
            schedulable: converged && tasks.iter().all(|t| t.schedulable),
            tasks,
            iterations: self.passes,
            outcome,
        }
    }
}

/// Runs the analysis for any protocol.
pub fn analyze(
    system: &SystemSpec,
    protocol: Protocol,
    overheads: &OverheadModel,
) -> Result<AnalysisResult, ModelError> {
    match protocol {
        Protocol::LeftRs => response_time(system),
        p => response_time_baseline(system, p, overheads),
    }
}

/// Estimate vectors after every pass; exposed for monotonicity checks.
pub fn pass_history(
    system: &SystemSpec,
    protocol: Protocol,
    overheads: &OverheadModel,
) -> Result<Vec<Vec<u64>>, ModelError> {
    let ctx = Ctx::new(system)?;
    fn collect<E: Engine>(ctx: &Ctx, e: &E) -> Vec<Vec<u64>> {
        let mut p = Passes::new(ctx, e);
        let mut out = vec![p.r.clone()];
        loop {
            let changed = p.step();
            out.push(p.r.clone());
            if p.stopped.is_some() || !changed || p.passes >= MAX_PASSES {
                return out;
            }
        }
    }
    Ok(match protocol {
        Protocol::LeftRs => collect(&ctx, &leftrs::LeftRsEngine),
        p => collect(&ctx, &baselines::BaselineEngine::new(p, *overheads)),
    })
}
