//! Synthetic task-system generation.
//!
//! Utilisations come from UUniFast, periods are log-uniform, a fraction
//! `rsf` of the tasks share resources, tasks are placed by worst-fit with a
//! per-core cap of `N` and priorities follow deadline-monotonic order.
//!
//! # Random streams
//!
//! All draws use ChaCha8 seeded with `cfg.seed`. Stream 0 carries the
//! system-level draws (utilisations, critical-section lengths, choice of
//! sharing tasks); stream `i + 1` carries every draw made for task `i`
//! (period, fault budget, resource accesses). Adding per-task parameters
//! therefore never shifts another task's draws.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GenError;
use crate::model::{ResourceSpec, SystemSpec, TaskId, TaskSpec};

const MAX_REDRAWS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Core count `M`.
    pub cores: usize,
    /// Tasks per core `N`.
    pub tasks_per_core: usize,
    /// Utilisation per task slot; `U_total = util_per_task_slot * M * N`.
    pub util_per_task_slot: f64,
    /// Inclusive period bounds in microseconds.
    pub period_range: (u64, u64),
    /// Fraction of tasks that access shared resources.
    pub rsf: f64,
    /// Resource count `K`; `None` means `K = M`.
    pub resources: Option<usize>,
    /// Maximum requests per (task, resource) per release, `A`.
    pub max_accesses: u32,
    /// Inclusive critical-section length bounds `L` in microseconds.
    pub cs_range: (u64, u64),
    /// Maximum faults per release.
    pub f_max: u32,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            cores: 10,
            tasks_per_core: 5,
            util_per_task_slot: 0.04,
            period_range: (1_000, 1_000_000),
            rsf: 0.5,
            resources: None,
            max_accesses: 10,
            cs_range: (1, 100),
            f_max: 3,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn num_resources(&self) -> usize {
        self.resources.unwrap_or(self.cores)
    }

    pub fn total_tasks(&self) -> usize {
        self.cores * self.tasks_per_core
    }

    pub fn u_total(&self) -> f64 {
        self.util_per_task_slot * self.total_tasks() as f64
    }

    pub fn sharing_tasks(&self) -> usize {
        ((self.rsf * self.total_tasks() as f64) + 1e-9).floor() as usize
    }

    pub fn check(&self) -> Result<(), GenError> {
        let bad = |s: &str| Err(GenError::InvalidConfig(s.to_string()));
        if self.cores == 0 {
            return bad("cores must be >= 1");
        }
        if self.tasks_per_core == 0 {
            return bad("tasks_per_core must be >= 1");
        }
        if self.util_per_task_slot.is_nan() || self.util_per_task_slot <= 0.0 {
            return bad("util_per_task_slot must be > 0");
        }
        if self.period_range.0 < 1 || self.period_range.0 > self.period_range.1 {
            return bad("period_range must satisfy 1 <= low <= high");
        }
        if !(0.0..=1.0).contains(&self.rsf) {
            return bad("rsf must lie in [0, 1]");
        }
        if self.cs_range.0 < 1 || self.cs_range.0 > self.cs_range.1 {
            return bad("cs_range must satisfy 1 <= low <= high");
        }
        if self.max_accesses < 1 {
            return bad("max_accesses must be >= 1");
        }
        if self.num_resources() == 0 && self.sharing_tasks() > 0 {
            return bad("sharing tasks need at least one resource");
        }
        Ok(())
    }
}

/// Side information about one generation run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenReport {
    /// Sum of UUniFast utilisations (before any clamping).
    pub drawn_utilisation: f64,
    /// Tasks whose pure WCET had to be clamped to zero.
    pub clamped: usize,
    /// Access redraws performed because the WCET went negative.
    pub redraws: usize,
    /// Utilisation added by clamping.
    pub clamp_slack: f64,
    /// Order in which worst-fit placed the tasks.
    pub placement_order: Vec<TaskId>,
}

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// UUniFast: `n` positive utilisations summing to `u_total`.
pub fn uunifast<R: Rng + ?Sized>(n: usize, u_total: f64, rng: &mut R) -> Result<Vec<f64>, GenError> {
    if n == 0 {
        return Err(GenError::NoTasks);
    }
    if u_total.is_nan() || u_total <= 0.0 {
        return Err(GenError::InvalidConfig("u_total must be > 0".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut sum = u_total;
    for i in 1..n {
        // open interval keeps every share strictly positive
        let r: f64 = loop {
            let r: f64 = rng.random();
            if r > 0.0 {
                break r;
            }
        };
        let next = sum * r.powf(1.0 / (n - i) as f64);
        out.push(sum - next);
        sum = next;
    }
    out.push(sum);
    Ok(out)
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    if lo == hi {
        return lo;
    }
    let e = rng.random_range((lo as f64).ln()..=(hi as f64).ln());
    (e.exp().round() as u64).clamp(lo, hi)
}

pub fn generate(cfg: &GenConfig) -> Result<SystemSpec, GenError> {
    generate_with_report(cfg).map(|(s, _)| s)
}

pub fn generate_with_report(cfg: &GenConfig) -> Result<(SystemSpec, GenReport), GenError> {
    cfg.check()?;
    let total = cfg.total_tasks();
    let k = cfg.num_resources();
    let mut report = GenReport::default();

    let mut sys_rng = stream(cfg.seed, 0);
    let utils = uunifast(total, cfg.u_total(), &mut sys_rng)?;
    report.drawn_utilisation = utils.iter().sum();
    let resources: Vec<ResourceSpec> = (0..k)
        .map(|id| ResourceSpec {
            id,
            c: sys_rng.random_range(cfg.cs_range.0..=cfg.cs_range.1),
        })
        .collect();
    let mut sharing = vec![false; total];
    for i in sample(&mut sys_rng, total, cfg.sharing_tasks()).iter() {
        sharing[i] = true;
    }

    let mut tasks = Vec::with_capacity(total);
    for (i, &u) in utils.iter().enumerate() {
        let mut rng = stream(cfg.seed, i as u64 + 1);
        let t = log_uniform(&mut rng, cfg.period_range.0, cfg.period_range.1);
        let f = rng.random_range(0..=cfg.f_max);
        let budget = (u * t as f64).floor() as u64;

        let mut accesses = BTreeMap::new();
        let mut c = budget;
        if sharing[i] {
            let mut draws = 0;
            loop {
                accesses = draw_accesses(&mut rng, k, cfg.max_accesses);
                let cr: u64 = accesses.iter().map(|(&x, &n)| n as u64 * resources[x].c).sum();
                if cr <= budget {
                    c = budget - cr;
                    break;
                }
                if draws == MAX_REDRAWS {
                    c = 0;
                    report.clamped += 1;
                    report.clamp_slack += (cr - budget) as f64 / t as f64;
                    break;
                }
                draws += 1;
                report.redraws += 1;
            }
        }
        tasks.push(TaskSpec {
            id: i,
            core: 0,
            c,
            t,
            d: t,
            priority: 0,
            f,
            accesses,
        });
    }

    report.placement_order = worst_fit(&mut tasks, &resources, cfg.cores, cfg.tasks_per_core);
    assign_dm_priorities(&mut tasks, cfg.cores);

    Ok((
        SystemSpec {
            num_cores: cfg.cores,
            resources,
            tasks,
        },
        report,
    ))
}

fn draw_accesses<R: Rng + ?Sized>(rng: &mut R, k: usize, a: u32) -> BTreeMap<usize, u32> {
    let size = rng.random_range(1..=k);
    let mut chosen: Vec<usize> = sample(rng, k, size).into_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|x| (x, rng.random_range(1..=a))).collect()
}

/// Total utilisation of a task including its critical sections.
pub fn utilisation(task: &TaskSpec, resources: &[ResourceSpec]) -> f64 {
    let cr: u64 = task
        .accesses
        .iter()
        .map(|(&x, &n)| n as u64 * resources[x].c)
        .sum();
    (task.c + cr) as f64 / task.t as f64
}

/// Worst-fit decreasing with at most `cap` tasks per core. Returns the
/// insertion order.
fn worst_fit(tasks: &mut [TaskSpec], resources: &[ResourceSpec], cores: usize, cap: usize) -> Vec<TaskId> {
    let mut order: Vec<(f64, TaskId)> = tasks.iter().map(|t| (utilisation(t, resources), t.id)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut load = vec![0.0f64; cores];
    let mut count = vec![0usize; cores];
    for &(u, id) in &order {
        let core = (0..cores)
            .filter(|&k| count[k] < cap)
            .min_by(|&a, &b| load[a].total_cmp(&load[b]).then(a.cmp(&b)))
            .expect("M*N tasks always fit under a cap of N per core");
        load[core] += u;
        count[core] += 1;
        tasks[id].core = core;
    }
    order.into_iter().map(|(_, id)| id).collect()
}

/// Deadline-monotonic priorities, unique per core. Larger is higher;
/// deadline ties favour the lower task id.
pub fn assign_dm_priorities(tasks: &mut [TaskSpec], cores: usize) {
    for core in 0..cores {
        let mut local: Vec<(u64, TaskId, usize)> = tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.core == core)
            .map(|(pos, t)| (t.d, t.id, pos))
            .collect();
        local.sort();
        let n = local.len() as u32;
        for (rank, &(_, _, pos)) in local.iter().enumerate() {
            tasks[pos].priority = n - rank as u32;
        }
    }
}
