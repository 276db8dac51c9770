//! Response-time analysis for LEFT-RS.
//!
//! Per resource `x` the local requests of `i` and its higher-priority
//! neighbours (`N^x_{i,local}`) are each charged one execution, one unit per
//! remote request that can precede them in the FIFO queue, and one
//! synchronisation unit per local request that can meet a faulty
//! predecessor. Own faults are charged once in `F_i` on the longest segment.

use crate::error::ModelError;
use crate::model::{charge_n, ResourceId, SystemSpec, TaskId, TaskSpec};

use super::{eta_len, AnalysisResult, Ctx, Engine, Passes, Protocol, RunList};

/// `xi^x_{i,lambda_k}` with its cap `min(N^x_{i,local}, |xi|)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemoteRequestList {
    pub core: usize,
    pub entries: RunList,
    pub cap: u64,
}

impl RemoteRequestList {
    /// The entry right after the capped head, if any.
    pub fn leftover(&self) -> Option<u32> {
        self.entries.nth(self.cap + 1)
    }
}

/// `E^x_i`: the capped heads of every remote list.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockingSet {
    pub entries: RunList,
}

impl BlockingSet {
    pub fn len(&self) -> u64 {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn from_lists(lists: &[RemoteRequestList]) -> Self {
        let runs = lists
            .iter()
            .flat_map(|l| l.entries.head(l.cap).runs().to_vec())
            .collect();
        BlockingSet {
            entries: RunList::from_runs(runs),
        }
    }
}

/// Requests of remote task `tj` to `x` that can overlap a window of
/// `ri + rj`, each carrying the task's execution count.
pub fn eta(tj: &TaskSpec, x: ResourceId, ri: u64, rj: u64) -> Vec<u32> {
    vec![charge_n(tj); eta_len(tj, x, ri, rj) as usize]
}

pub fn n_local(system: &SystemSpec, i: TaskId, x: ResourceId, ri: u64) -> Result<u64, ModelError> {
    let ctx = Ctx::new(system)?;
    Ok(ctx.n_local(pos_of(system, i)?, x, ri))
}

pub fn remote_request_lists(
    system: &SystemSpec,
    i: TaskId,
    x: ResourceId,
    ri: u64,
    r_of: impl Fn(TaskId) -> u64,
) -> Result<Vec<RemoteRequestList>, ModelError> {
    let ctx = Ctx::new(system)?;
    let (pos, r) = estimates(system, i, ri, r_of)?;
    Ok(lists(&ctx, pos, x, &r))
}

pub fn blocking_set(
    system: &SystemSpec,
    i: TaskId,
    x: ResourceId,
    ri: u64,
    r_of: impl Fn(TaskId) -> u64,
) -> Result<BlockingSet, ModelError> {
    Ok(BlockingSet::from_lists(&remote_request_lists(
        system, i, x, ri, r_of,
    )?))
}

/// `Syn^x_i`: one unit per blocking entry with `n > 1`, at most one per
/// local request.
pub fn syn_overhead(blocking: &BlockingSet, n_local: u64) -> u64 {
    blocking.entries.above_one_in_head(u64::MAX).min(n_local)
}

pub fn resource_term(
    system: &SystemSpec,
    i: TaskId,
    ri: u64,
    r_of: impl Fn(TaskId) -> u64,
) -> Result<u64, ModelError> {
    let ctx = Ctx::new(system)?;
    let (pos, r) = estimates(system, i, ri, r_of)?;
    Ok(LeftRsEngine.resource_term(&ctx, pos, &r))
}

pub fn arrival_blocking(
    system: &SystemSpec,
    i: TaskId,
    ri: u64,
    r_of: impl Fn(TaskId) -> u64,
) -> Result<u64, ModelError> {
    let ctx = Ctx::new(system)?;
    let (pos, r) = estimates(system, i, ri, r_of)?;
    Ok(LeftRsEngine.arrival_blocking(&ctx, pos, &r))
}

/// `F_i = f_i * max(C_i, max c^x)`: every fault re-runs the longest segment.
pub fn fault_term(system: &SystemSpec, i: TaskId) -> Result<u64, ModelError> {
    let ctx = Ctx::new(system)?;
    Ok(LeftRsEngine.fault_term(&ctx, pos_of(system, i)?))
}

pub fn response_time(system: &SystemSpec) -> Result<AnalysisResult, ModelError> {
    let ctx = Ctx::new(system)?;
    Ok(Passes::new(&ctx, &LeftRsEngine).run())
}

pub(crate) fn pos_of(system: &SystemSpec, i: TaskId) -> Result<usize, ModelError> {
    system
        .tasks
        .iter()
        .position(|t| t.id == i)
        .ok_or(ModelError::UnknownTask(i))
}

pub(crate) fn estimates(
    system: &SystemSpec,
    i: TaskId,
    ri: u64,
    r_of: impl Fn(TaskId) -> u64,
) -> Result<(usize, Vec<u64>), ModelError> {
    let pos = pos_of(system, i)?;
    let mut r: Vec<u64> = system.tasks.iter().map(|t| r_of(t.id)).collect();
    r[pos] = ri;
    Ok((pos, r))
}

fn lists(ctx: &Ctx, i: usize, x: ResourceId, r: &[u64]) -> Vec<RemoteRequestList> {
    let nl = ctx.n_local(i, x, r[i]);
    ctx.remote_lists(i, x, r)
        .into_iter()
        .map(|(core, entries)| RemoteRequestList {
            core,
            cap: nl.min(entries.len()),
            entries,
        })
        .collect()
}

pub(crate) struct LeftRsEngine;

impl Engine for LeftRsEngine {
    fn protocol(&self) -> Protocol {
        Protocol::LeftRs
    }

    fn fault_term(&self, ctx: &Ctx, i: usize) -> u64 {
        ctx.task(i).f as u64 * ctx.longest_segment(i)
    }

    fn resource_term(&self, ctx: &Ctx, i: usize, r: &[u64]) -> u64 {
        let mut total = 0;
        for x in 0..ctx.cs.len() {
            let nl = ctx.n_local(i, x, r[i]);
            if nl == 0 {
                continue;
            }
            let mut blocking = 0;
            let mut above_one = 0;
            for (_, xi) in ctx.remote_lists(i, x, r) {
                let cap = nl.min(xi.len());
                blocking += cap;
                above_one += xi.above_one_in_head(cap);
            }
            let syn = above_one.min(nl);
            total += (nl + blocking + syn) * ctx.cs[x];
        }
        total
    }

    fn arrival_blocking(&self, ctx: &Ctx, i: usize, r: &[u64]) -> u64 {
        ctx.arrival_candidates(i)
            .into_iter()
            .map(|(x, alpha)| {
                let nl = ctx.n_local(i, x, r[i]);
                let beta: Vec<u32> = ctx
                    .remote_lists(i, x, r)
                    .iter()
                    .filter_map(|(_, xi)| xi.nth(nl.min(xi.len()) + 1))
                    .collect();
                let sync = u64::from(beta.iter().any(|&n| n > 1));
                (alpha as u64 + beta.len() as u64 + sync) * ctx.cs[x]
            })
            .max()
            .unwrap_or(0)
    }
}
