//! Static system description: cores, sporadic tasks and shared resources.
//!
//! All durations are integer microseconds. A [`SystemSpec`] is the complete
//! input to both the response-time analyses and the simulator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub type TaskId = usize;
pub type ResourceId = usize;
pub type CoreId = usize;

/// A shared resource `r^x` with critical-section length `c^x`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub id: ResourceId,
    #[serde(rename = "c_us")]
    pub c: u64,
}

/// One sporadic task.
///
/// `c` is the pure WCET excluding critical sections. `accesses` maps a
/// resource id to the number of requests issued per release.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub core: CoreId,
    #[serde(rename = "C_us")]
    pub c: u64,
    #[serde(rename = "T_us")]
    pub t: u64,
    #[serde(rename = "D_us")]
    pub d: u64,
    pub priority: u32,
    #[serde(rename = "f_max")]
    pub f: u32,
    #[serde(default)]
    pub accesses: BTreeMap<ResourceId, u32>,
}

impl TaskSpec {
    /// Requests per release to resource `x` (`N^x_i`), zero when unused.
    pub fn requests(&self, x: ResourceId) -> u32 {
        self.accesses.get(&x).copied().unwrap_or(0)
    }

    pub fn uses(&self, x: ResourceId) -> bool {
        self.requests(x) > 0
    }

    /// Resources with at least one request per release, ascending.
    pub fn accessed(&self) -> impl Iterator<Item = ResourceId> + '_ {
        self.accesses.iter().filter(|(_, &n)| n > 0).map(|(&x, _)| x)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub num_cores: usize,
    pub resources: Vec<ResourceSpec>,
    pub tasks: Vec<TaskSpec>,
}

/// Execution count charged to one request: `n = f + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RequestCharge {
    pub n: u32,
    pub resource: ResourceId,
    pub task: TaskId,
}

/// One broken invariant found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl SystemSpec {
    pub fn task(&self, i: TaskId) -> Result<&TaskSpec, ModelError> {
        self.tasks
            .iter()
            .find(|t| t.id == i)
            .ok_or(ModelError::UnknownTask(i))
    }

    pub fn resource(&self, x: ResourceId) -> Result<&ResourceSpec, ModelError> {
        self.resources
            .iter()
            .find(|r| r.id == x)
            .ok_or(ModelError::UnknownResource(x))
    }

    /// Critical-section length of `x`, or zero for an unknown id.
    pub fn cs_len(&self, x: ResourceId) -> u64 {
        self.resources.iter().find(|r| r.id == x).map_or(0, |r| r.c)
    }

    pub fn tasks_on(&self, core: CoreId) -> impl Iterator<Item = &TaskSpec> {
        self.tasks.iter().filter(move |t| t.core == core)
    }

    /// Cores hosting at least one task that requests `x`.
    pub fn cores_using(&self, x: ResourceId) -> BTreeSet<CoreId> {
        self.tasks.iter().filter(|t| t.uses(x)).map(|t| t.core).collect()
    }

    /// A resource is global when it is requested from two or more cores.
    pub fn is_global(&self, x: ResourceId) -> bool {
        self.cores_using(x).len() >= 2
    }

    /// Highest priority among tasks on `core` that request `x`.
    pub fn local_ceiling(&self, core: CoreId, x: ResourceId) -> Option<u32> {
        self.tasks_on(core)
            .filter(|t| t.uses(x))
            .map(|t| t.priority)
            .max()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        serde_json::from_str(s).map_err(|e| ModelError::Json(e.to_string()))
    }
}

/// Checks every structural invariant and returns one entry per violation.
pub fn validate(system: &SystemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |s: String| out.push(Violation(s));

    if system.num_cores == 0 {
        push("system: num_cores must be >= 1".into());
    }

    let mut res_ids = BTreeSet::new();
    for r in &system.resources {
        if r.c < 1 {
            push(format!("resource {}: c < 1", r.id));
        }
        if !res_ids.insert(r.id) {
            push(format!("resource {}: duplicate id", r.id));
        }
    }
    let k = system.resources.len();
    if res_ids.iter().copied().ne(0..k) {
        push(format!("resources: ids are not dense 0..{}", k));
    }

    let mut task_ids = BTreeSet::new();
    let mut prio_seen: BTreeMap<(CoreId, u32), TaskId> = BTreeMap::new();
    for t in &system.tasks {
        if !task_ids.insert(t.id) {
            push(format!("task {}: duplicate id", t.id));
        }
        if t.t < 1 {
            push(format!("task {}: T < 1", t.id));
        }
        if t.d > t.t {
            push(format!("task {}: D > T", t.id));
        }
        if t.core >= system.num_cores {
            push(format!(
                "task {}: core {} out of range (num_cores = {})",
                t.id, t.core, system.num_cores
            ));
        }
        if let Some(other) = prio_seen.insert((t.core, t.priority), t.id) {
            push(format!(
                "task {}: priority {} not unique on core {} (shared with task {})",
                t.id, t.priority, t.core, other
            ));
        }
        for &x in t.accesses.keys() {
            if !res_ids.contains(&x) {
                push(format!("task {}: references unknown resource {}", t.id, x));
            }
        }
    }
    out
}

/// Same-core tasks with higher priority than `i`.
pub fn lhp(system: &SystemSpec, i: TaskId) -> Result<Vec<TaskId>, ModelError> {
    let ti = system.task(i)?;
    Ok(system
        .tasks_on(ti.core)
        .filter(|t| t.id != i && t.priority > ti.priority)
        .map(|t| t.id)
        .collect())
}

/// Same-core tasks with lower priority than `i`.
pub fn llp(system: &SystemSpec, i: TaskId) -> Result<Vec<TaskId>, ModelError> {
    let ti = system.task(i)?;
    Ok(system
        .tasks_on(ti.core)
        .filter(|t| t.id != i && t.priority < ti.priority)
        .map(|t| t.id)
        .collect())
}

/// Per-request execution charge. Every request carries the task's whole
/// fault budget, since faults may all land on any single request.
pub fn request_charge(task: &TaskSpec, resource: ResourceId) -> Result<RequestCharge, ModelError> {
    if !task.uses(resource) {
        return Err(ModelError::NotAccessed {
            task: task.id,
            resource,
        });
    }
    Ok(RequestCharge {
        n: task.f + 1,
        resource,
        task: task.id,
    })
}

/// `request_charge(..).n` without the access check.
pub(crate) fn charge_n(task: &TaskSpec) -> u32 {
    task.f + 1
}
