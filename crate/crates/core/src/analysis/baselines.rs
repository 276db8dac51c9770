//! Analyses for the comparison protocols: MSRP-FT (with and without its
//! coordination overhead) and plain checkpointing under a FIFO spin lock.
//!
//! Each local request `q = 1..N^x_{i,local}` is charged against the `q`-th
//! entry of every remote list, i.e. at most one remote request per core, and
//! its own execution count is one (own faults live in `F_i`).

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{ResourceId, SystemSpec};

use super::{AnalysisResult, Ctx, Engine, Passes, Protocol, RunList};

/// Coordination costs of MSRP-FT's helping mechanism, in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadModel {
    pub o_wrap: u64,
    pub o_replica: u64,
    pub o_self_wrap: u64,
}

impl OverheadModel {
    pub const MEASURED: OverheadModel = OverheadModel {
        o_wrap: 1,
        o_replica: 6,
        o_self_wrap: 1,
    };

    pub const ZERO: OverheadModel = OverheadModel {
        o_wrap: 0,
        o_replica: 0,
        o_self_wrap: 0,
    };
}

impl Default for OverheadModel {
    fn default() -> Self {
        Self::MEASURED
    }
}

/// Worst-case MSRP-FT access: the `p`-th largest remote request is served
/// with `p + 1` execution units, the requester then runs its own `n_i`
/// executions alone.
pub fn msrpft_access(n_i: u32, remote_ns: &[u32], c: u64) -> u64 {
    let mut sorted = remote_ns.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let s: u64 = sorted
        .iter()
        .enumerate()
        .map(|(p, &n)| (n as u64).div_ceil(p as u64 + 2))
        .sum();
    (n_i as u64 + s) * c
}

/// `O_total(m) = m * (O_wrap + O_replica) + O_self_wrap`.
pub fn msrpft_overhead(m: u64, model: &OverheadModel) -> u64 {
    m * (model.o_wrap + model.o_replica) + model.o_self_wrap
}

/// Each remote holder ahead re-executes every fault while holding the lock.
pub fn checkpointing_access(n_i: u32, remote_ns: &[u32], c: u64) -> u64 {
    (n_i as u64 + remote_ns.iter().map(|&n| n as u64).sum::<u64>()) * c
}

pub fn response_time_baseline(
    system: &SystemSpec,
    protocol: Protocol,
    model: &OverheadModel,
) -> Result<AnalysisResult, ModelError> {
    let ctx = Ctx::new(system)?;
    let engine = BaselineEngine::new(protocol, *model);
    Ok(Passes::new(&ctx, &engine).run())
}

pub(crate) struct BaselineEngine {
    protocol: Protocol,
    overheads: OverheadModel,
}

impl BaselineEngine {
    pub fn new(protocol: Protocol, overheads: OverheadModel) -> Self {
        assert!(protocol != Protocol::LeftRs, "LEFT-RS has its own engine");
        let overheads = match protocol {
            Protocol::MsrpFt => overheads,
            _ => OverheadModel::ZERO,
        };
        BaselineEngine { protocol, overheads }
    }

    fn uses_helping(&self) -> bool {
        matches!(self.protocol, Protocol::MsrpFt | Protocol::MsrpFtOf)
    }

    /// Access time plus, for MSRP-FT on a global resource, its overhead.
    fn access(&self, ctx: &Ctx, x: ResourceId, n_i: u32, remote: &[u32]) -> u64 {
        let c = ctx.cs[x];
        if self.uses_helping() {
            let mut t = msrpft_access(n_i, remote, c);
            if ctx.global[x] {
                t += msrpft_overhead(remote.len() as u64, &self.overheads);
            }
            t
        } else {
            checkpointing_access(n_i, remote, c)
        }
    }

    /// Sum of access times over local requests `1..=nl`, where request `q`
    /// meets the `q`-th entry of every remote list.
    fn requests_total(&self, ctx: &Ctx, x: ResourceId, nl: u64, lists: &[RunList]) -> u64 {
        // breakpoints where some list changes value or runs out
        let mut cuts: Vec<u64> = vec![nl];
        for l in lists {
            let mut acc = 0;
            for &(_, c) in l.runs() {
                acc += c;
                if acc < nl {
                    cuts.push(acc);
                }
            }
        }
        cuts.sort_unstable();
        cuts.dedup();

        let mut total = 0;
        let mut start = 0u64;
        let mut remote = Vec::with_capacity(lists.len());
        for end in cuts {
            if end <= start {
                continue;
            }
            remote.clear();
            remote.extend(lists.iter().filter_map(|l| l.nth(start + 1)));
            total += (end - start) * self.access(ctx, x, 1, &remote);
            start = end;
        }
        total
    }
}

impl Engine for BaselineEngine {
    fn protocol(&self) -> Protocol {
        self.protocol
    }

    fn fault_term(&self, ctx: &Ctx, i: usize) -> u64 {
        let t = ctx.task(i);
        if self.uses_helping() {
            t.f as u64 * t.c
        } else {
            t.f as u64 * ctx.longest_segment(i)
        }
    }

    fn resource_term(&self, ctx: &Ctx, i: usize, r: &[u64]) -> u64 {
        (0..ctx.cs.len())
            .map(|x| {
                let nl = ctx.n_local(i, x, r[i]);
                if nl == 0 {
                    return 0;
                }
                let lists: Vec<RunList> = ctx.remote_lists(i, x, r).into_iter().map(|(_, l)| l).collect();
                self.requests_total(ctx, x, nl, &lists)
            })
            .sum()
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
                self.access(ctx, x, alpha, &beta)
            })
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::analysis::response_time;
    use crate::model::{ResourceSpec, TaskSpec};

    #[test]
    fn msrpft_access_examples() {
        assert_eq!(msrpft_access(1, &[6], 1), 4);
        assert_eq!(msrpft_access(3, &[], 7), 21);
        assert_eq!(msrpft_access(2, &[3, 3], 2), 10);
        // order of the input does not matter
        assert_eq!(msrpft_access(1, &[1, 5, 3], 2), msrpft_access(1, &[5, 3, 1], 2));
    }

    #[test]
    fn overhead_examples() {
        assert_eq!(msrpft_overhead(0, &OverheadModel::MEASURED), 1);
        assert_eq!(msrpft_overhead(2, &OverheadModel::MEASURED), 15);
        assert_eq!(msrpft_overhead(5, &OverheadModel::ZERO), 0);
    }

    #[test]
    fn checkpointing_access_examples() {
        assert_eq!(checkpointing_access(1, &[6], 1), 7);
        assert_eq!(checkpointing_access(1, &[1, 1, 1], 4), 16);
        assert_eq!(checkpointing_access(2, &[], 3), 6);
    }

    fn micro() -> SystemSpec {
        let acc: BTreeMap<usize, u32> = [(0, 1)].into_iter().collect();
        SystemSpec {
            num_cores: 2,
            resources: vec![ResourceSpec { id: 0, c: 1 }],
            tasks: vec![
                TaskSpec {
                    id: 0,
                    core: 0,
                    c: 0,
                    t: 1_000,
                    d: 1_000,
                    priority: 1,
                    f: 5,
                    accesses: acc.clone(),
                },
                TaskSpec {
                    id: 1,
                    core: 1,
                    c: 0,
                    t: 1_000,
                    d: 1_000,
                    priority: 1,
                    f: 0,
                    accesses: acc,
                },
            ],
        }
    }

    #[test]
    fn micro_system_msrpft_charges_four_units() {
        let s = micro();
        let of = response_time_baseline(&s, Protocol::MsrpFtOf, &OverheadModel::ZERO).unwrap();
        assert_eq!(of.task(1).unwrap().e, 4);
        let ft = response_time_baseline(&s, Protocol::MsrpFt, &OverheadModel::MEASURED).unwrap();
        assert_eq!(
            ft.task(1).unwrap().e,
            4 + msrpft_overhead(1, &OverheadModel::MEASURED)
        );
        let left = response_time(&s).unwrap();
        assert!(left.task(1).unwrap().e <= 3);
    }

    #[test]
    fn requests_total_matches_explicit_walk() {
        let lists = vec![
            RunList::from_values(&[4, 4, 2, 1]),
            RunList::from_values(&[3]),
            RunList::from_values(&[2, 2, 2, 2, 2, 2]),
        ];
        let acc: BTreeMap<usize, u32> = [(0, 1)].into_iter().collect();
        let sys = SystemSpec {
            num_cores: 2,
            resources: vec![ResourceSpec { id: 0, c: 3 }],
            tasks: vec![
                TaskSpec {
                    id: 0,
                    core: 0,
                    c: 1,
                    t: 10,
                    d: 10,
                    priority: 1,
                    f: 0,
                    accesses: acc.clone(),
                },
                TaskSpec {
                    id: 1,
                    core: 1,
                    c: 1,
                    t: 10,
                    d: 10,
                    priority: 1,
                    f: 0,
                    accesses: acc,
                },
            ],
        };
        let ctx = Ctx::new(&sys).unwrap();
        for p in [Protocol::MsrpFt, Protocol::Checkpointing] {
            let e = BaselineEngine::new(p, OverheadModel::MEASURED);
            for nl in 0..9u64 {
                let explicit: u64 = (1..=nl)
                    .map(|q| {
                        let remote: Vec<u32> = lists.iter().filter_map(|l| l.nth(q)).collect();
                        e.access(&ctx, 0, 1, &remote)
                    })
                    .sum();
                assert_eq!(e.requests_total(&ctx, 0, nl, &lists), explicit, "{p} nl={nl}");
            }
        }
    }
}
