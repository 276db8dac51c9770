//! Exhaustive worst case of one LEFT-RS request.
//!
//! Up to three predecessors join the queue on a quarter-`c` grid within the
//! first two critical-section lengths, the probed request joins last, and
//! every admissible fault pattern is explored: whenever an attempt of a
//! member with budget left ends, both outcomes are tried. The result is the
//! longest time from the probed request joining to it leaving the queue.

use std::collections::HashMap;

use crate::error::SimError;
use crate::model::{charge_n, ResourceId, SystemSpec, TaskId};

use super::queue::{LeftRsQueue, MemberState};

/// Grid points per critical-section length.
const GRID: u64 = 4;
/// Joins happen within `[0, JOIN_WINDOW * c]`.
const JOIN_WINDOW: u64 = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeInstance {
    /// Execution count of the probed request.
    pub target_n: u32,
    /// Execution count of each predecessor, in FIFO order.
    pub predecessor_ns: Vec<u32>,
}

type Pending = Vec<(u64, usize, u32)>;

struct Search {
    target: usize,
    memo: HashMap<(LeftRsQueue, Pending), u64>,
    bound: usize,
}

impl Search {
    /// Longest time from `now` until the target leaves. `q` already holds
    /// everything that happened at `now`.
    fn longest(&mut self, q: &LeftRsQueue, now: u64, pending: &[(u64, usize, u32)]) -> Result<u64, SimError> {
        let rel: Pending = pending.iter().map(|&(t, id, b)| (t - now, id, b)).collect();
        let key = (q.normalized(now), rel);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        if self.memo.len() >= self.bound {
            return Err(SimError::SearchSpaceExceeded(self.memo.len()));
        }

        let end = q.next_end();
        let join = pending.first().map(|p| p.0);
        let t = match (end, join) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!("the target is always queued or pending"),
        };

        let choices = if end == Some(t) {
            q.members()
                .iter()
                .filter(|m| m.budget > 0 && matches!(m.state, MemberState::Running { end, .. } if end == t))
                .count()
        } else {
            0
        };

        let mut best = 0;
        let mut out = Vec::new();
        for mask in 0u32..(1 << choices) {
            let mut next = q.clone();
            let mut left = None;
            if end == Some(t) {
                let mut bit = 0;
                left = next.advance(
                    t,
                    |_, _| {
                        let faulty = mask >> bit & 1 == 1;
                        bit += 1;
                        faulty
                    },
                    &mut out,
                );
            }
            let v = if left == Some(self.target) {
                t - now
            } else {
                let k = pending.iter().take_while(|p| p.0 == t).count();
                for &(_, id, budget) in &pending[..k] {
                    next.join(t, id, budget, &mut out);
                }
                t - now + self.longest(&next, t, &pending[k..])?
            };
            best = best.max(v);
            out.clear();
        }
        self.memo.insert(key, best);
        Ok(best)
    }
}

/// All non-decreasing join-time vectors of `len` entries within `0..=hi`
/// starting at 0.
fn join_grids(len: usize, hi: u64) -> Vec<Vec<u64>> {
    fn rec(prefix: &mut Vec<u64>, len: usize, hi: u64, out: &mut Vec<Vec<u64>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        let lo = prefix.last().copied().unwrap_or(0);
        let top = if prefix.is_empty() { 0 } else { hi };
        for t in lo..=top {
            prefix.push(t);
            rec(prefix, len, hi, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), len, hi, &mut out);
    out
}

/// Longest access of the probed request in ticks, with `c = 4` ticks.
/// `bound` caps the number of distinct search states.
pub fn probe_instance(inst: &ProbeInstance, bound: usize) -> Result<u64, SimError> {
    if inst.target_n == 0 || inst.predecessor_ns.contains(&0) {
        return Err(SimError::InvalidInput("execution counts start at 1".into()));
    }
    let c = GRID;
    let m = inst.predecessor_ns.len();
    let target = m;
    let mut search = Search {
        target,
        memo: HashMap::new(),
        bound,
    };
    let mut worst = 0;
    for grid in join_grids(m + 1, JOIN_WINDOW * c) {
        let mut pending: Pending = inst
            .predecessor_ns
            .iter()
            .enumerate()
            .map(|(id, &n)| (grid[id], id, n - 1))
            .collect();
        pending.push((grid[m], target, inst.target_n - 1));
        let mut q = LeftRsQueue::new(c, true);
        let mut out = Vec::new();
        let k = pending.iter().take_while(|p| p.0 == 0).count();
        for &(_, id, budget) in &pending[..k] {
            q.join(0, id, budget, &mut out);
        }
        let from_zero = search.longest(&q, 0, &pending[k..])?;
        worst = worst.max(from_zero - grid[m]);
    }
    Ok(worst)
}

/// Worst observed access time in microseconds of one request of task `i`
/// to resource `x`, with one predecessor per remote core using `x`, each
/// carrying the largest execution count found on its core.
pub fn worst_case_probe(
    system: &SystemSpec,
    i: TaskId,
    x: ResourceId,
    bound: usize,
) -> Result<u64, SimError> {
    let ti = system.task(i)?;
    let c = system.resource(x)?.c;
    if !ti.uses(x) {
        return Err(crate::error::ModelError::NotAccessed { task: i, resource: x }.into());
    }
    let mut predecessor_ns = Vec::new();
    for core in system.cores_using(x) {
        if core == ti.core {
            continue;
        }
        let n = system
            .tasks_on(core)
            .filter(|t| t.uses(x))
            .map(charge_n)
            .max()
            .unwrap_or(1);
        predecessor_ns.push(n);
    }
    let target_n = charge_n(ti);
    if predecessor_ns.len() > 3 || target_n > 4 || predecessor_ns.iter().any(|&n| n > 4) {
        return Err(SimError::InvalidInput(
            "probe limited to 3 remote cores and execution counts up to 4".into(),
        ));
    }
    let ticks = probe_instance(
        &ProbeInstance {
            target_n,
            predecessor_ns,
        },
        bound,
    )?;
    Ok((ticks * c).div_ceil(GRID))
}
