#![allow(dead_code)]

use std::collections::BTreeMap;

use leftrs::model::{ResourceSpec, SystemSpec, TaskSpec};
use leftrs::taskgen::GenConfig;

/// One task per core, each issuing a single request to resource 0 per
/// release. Task 0 is the probed task with `target_n - 1` faults; task
/// `k + 1` runs on core `k + 1` with `preds[k] - 1` faults.
pub fn single_request_system(target_n: u32, preds: &[u32], c: u64) -> SystemSpec {
    let task = |id: usize, n: u32| TaskSpec {
        id,
        core: id,
        c: 10,
        t: 1_000_000,
        d: 1_000_000,
        priority: 1,
        f: n - 1,
        accesses: BTreeMap::from([(0, 1)]),
    };
    let mut tasks = vec![task(0, target_n)];
    tasks.extend(preds.iter().enumerate().map(|(k, &n)| task(k + 1, n)));
    SystemSpec {
        num_cores: preds.len() + 1,
        resources: vec![ResourceSpec { id: 0, c }],
        tasks,
    }
}

/// A generator setting small enough for exhaustive simulation in tests.
pub fn small_config(seed: u64) -> GenConfig {
    GenConfig {
        cores: 3,
        tasks_per_core: 3,
        util_per_task_slot: 0.04,
        period_range: (1_000, 20_000),
        rsf: 0.6,
        resources: Some(2),
        max_accesses: 3,
        cs_range: (1, 40),
        f_max: 3,
        seed,
    }
}
