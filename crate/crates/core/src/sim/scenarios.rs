//! Small hand-built scenarios with known event sequences.

use std::collections::BTreeMap;

use crate::analysis::Protocol;
use crate::model::{ResourceSpec, SystemSpec, TaskSpec};

use super::{FaultSchedule, ReleasePattern, ScriptedFault, Segment, SimOptions};

fn two_task_system(c: u64, c_first: u64, c_second: u64, f: (u32, u32)) -> SystemSpec {
    let acc: BTreeMap<usize, u32> = [(0, 1)].into_iter().collect();
    let task = |id, c_exec, f| TaskSpec {
        id,
        core: id,
        c: c_exec,
        t: 20,
        d: 20,
        priority: 1,
        f,
        accesses: acc.clone(),
    };
    SystemSpec {
        num_cores: 2,
        resources: vec![ResourceSpec { id: 0, c }],
        tasks: vec![task(0, c_first, f.0), task(1, c_second, f.1)],
    }
}

fn released_at_zero() -> ReleasePattern {
    ReleasePattern::Scripted([(0, vec![0]), (1, vec![0])].into_iter().collect())
}

/// Task 0 requests at t=1 and its first attempt faults; task 1 requests at
/// t=2 while task 0 is mid-attempt and has to synchronise. `c = 2`.
pub fn fault_then_sync() -> (SystemSpec, SimOptions) {
    let sys = two_task_system(2, 4, 4, (1, 0));
    let faults = FaultSchedule::Scripted(vec![ScriptedFault {
        task: 0,
        release: 0,
        segment: 1,
        attempt: 1,
    }]);
    let mut opts = SimOptions::new(Protocol::LeftRs, released_at_zero(), faults, 20);
    opts.layouts
        .insert(0, vec![Segment::Normal(1), Segment::Cs(0), Segment::Normal(3)]);
    opts.layouts
        .insert(1, vec![Segment::Normal(2), Segment::Cs(0), Segment::Normal(2)]);
    (sys, opts)
}

/// Both tasks request at t=1 and succeed together; task 0 may fault five
/// times, task 1 never. `c = 1`.
pub fn concurrent_success() -> (SystemSpec, SimOptions) {
    let sys = two_task_system(1, 2, 2, (5, 0));
    let mut opts = SimOptions::new(Protocol::LeftRs, released_at_zero(), FaultSchedule::None, 20);
    for id in 0..2 {
        opts.layouts
            .insert(id, vec![Segment::Normal(1), Segment::Cs(0), Segment::Normal(1)]);
    }
    (sys, opts)
}
