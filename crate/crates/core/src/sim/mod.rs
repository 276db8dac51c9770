//! Discrete-event simulation of partitioned fixed-priority scheduling with
//! LEFT-RS or checkpointing-based resource sharing under injected faults.
//!
//! Time is integer microseconds. Every job is a sequence of segments: plain
//! execution pieces and critical sections. Execution pieces and local
//! critical sections end with a checkpoint; a faulty attempt is rolled back
//! and repeated. Global requests make the requester non-preemptive until it
//! leaves the resource queue.

mod engine;
pub mod invariants;
pub mod probe;
pub mod queue;
pub mod scenarios;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::Protocol;
use crate::error::SimError;
use crate::model::{ResourceId, SystemSpec, TaskId, TaskSpec};

pub use probe::{probe_instance, worst_case_probe, ProbeInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Release,
    StartNormal,
    CheckpointPass,
    CheckpointFail,
    RequestResource,
    EnterSync,
    StartCsAttempt,
    CsFault,
    CsSuccessWait,
    ResourceUpdate,
    DataInducedRestart,
    LeaveFifo,
    ResumeNormal,
    Complete,
    DeadlineMiss,
}

impl EventKind {
    pub const ALL: [EventKind; 15] = [
        EventKind::Release,
        EventKind::StartNormal,
        EventKind::CheckpointPass,
        EventKind::CheckpointFail,
        EventKind::RequestResource,
        EventKind::EnterSync,
        EventKind::StartCsAttempt,
        EventKind::CsFault,
        EventKind::CsSuccessWait,
        EventKind::ResourceUpdate,
        EventKind::DataInducedRestart,
        EventKind::LeaveFifo,
        EventKind::ResumeNormal,
        EventKind::Complete,
        EventKind::DeadlineMiss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Release => "release",
            EventKind::StartNormal => "start_normal",
            EventKind::CheckpointPass => "checkpoint_pass",
            EventKind::CheckpointFail => "checkpoint_fail",
            EventKind::RequestResource => "request_resource",
            EventKind::EnterSync => "enter_sync",
            EventKind::StartCsAttempt => "start_cs_attempt",
            EventKind::CsFault => "cs_fault",
            EventKind::CsSuccessWait => "cs_success_wait",
            EventKind::ResourceUpdate => "resource_update",
            EventKind::DataInducedRestart => "data_induced_restart",
            EventKind::LeaveFifo => "leave_fifo",
            EventKind::ResumeNormal => "resume_normal",
            EventKind::Complete => "complete",
            EventKind::DeadlineMiss => "deadline_miss",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: u64,
    pub kind: EventKind,
    pub task: TaskId,
    pub resource: Option<ResourceId>,
    pub attempt: Option<u32>,
}

impl fmt::Display for SimEvent {
    /// `time_us kind task resource attempt`, with `-` for absent fields.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.time, self.kind, self.task)?;
        match self.resource {
            Some(r) => write!(f, " {r}")?,
            None => f.write_str(" -")?,
        }
        match self.attempt {
            Some(a) => write!(f, " {a}"),
            None => f.write_str(" -"),
        }
    }
}

impl FromStr for SimEvent {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(format!("expected 5 fields, got {}: `{line}`", parts.len()));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|e| format!("`{s}`: {e}"));
        let opt = |s: &str| -> Result<Option<u64>, String> {
            if s == "-" {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        Ok(SimEvent {
            time: num(parts[0])?,
            kind: parts[1].parse()?,
            task: num(parts[2])? as TaskId,
            resource: opt(parts[3])?.map(|r| r as ResourceId),
            attempt: opt(parts[4])?.map(|a| a as u32),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub task: TaskId,
    pub release_index: u64,
    pub release: u64,
    pub completion: Option<u64>,
    pub response: Option<u64>,
    pub deadline_missed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub protocol: Protocol,
    pub events: Vec<SimEvent>,
    pub jobs: Vec<JobRecord>,
    /// Any job missed its deadline.
    pub deadline_miss: bool,
    /// Jobs still running when the drain limit was hit.
    pub unfinished: usize,
    pub end_time: u64,
}

impl SimTrace {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Vec<SimEvent>, SimError> {
        text.lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| l.parse().map_err(SimError::InvalidInput))
            .collect()
    }

    /// Largest observed response time per task, counting unfinished jobs
    /// by their age at the end of the run.
    pub fn max_response(&self) -> BTreeMap<TaskId, u64> {
        let mut out = BTreeMap::new();
        for j in &self.jobs {
            let r = j.response.unwrap_or(self.end_time - j.release);
            let e = out.entry(j.task).or_insert(0);
            *e = (*e).max(r);
        }
        out
    }

    pub fn summary(&self) -> SimSummary {
        SimSummary {
            protocol: self.protocol,
            jobs: self.jobs.len(),
            deadline_miss: self.deadline_miss,
            unfinished: self.unfinished,
            max_response_us: self.max_response(),
            responses: self.jobs.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSummary {
    pub protocol: Protocol,
    pub jobs: usize,
    pub deadline_miss: bool,
    pub unfinished: usize,
    pub max_response_us: BTreeMap<TaskId, u64>,
    pub responses: Vec<JobRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReleasePattern {
    /// All tasks release at 0 and then strictly periodically.
    SynchronousPeriodic,
    /// First release at 0, inter-arrival times uniform in `[T, 2T]`.
    Sporadic { seed: u64 },
    /// Explicit release times per task; unlisted tasks never release.
    Scripted(BTreeMap<TaskId, Vec<u64>>),
}

impl FromStr for ReleasePattern {
    type Err = String;

    /// `periodic`, `sporadic:<seed>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "periodic" || s == "synchronous-periodic" => Ok(ReleasePattern::SynchronousPeriodic),
            Some(("sporadic", seed)) => seed
                .parse()
                .map(|seed| ReleasePattern::Sporadic { seed })
                .map_err(|e| format!("bad sporadic seed `{seed}`: {e}")),
            _ => Err(format!(
                "unknown release pattern `{s}` (expected periodic or sporadic:<seed>)"
            )),
        }
    }
}

/// One faulty attempt: attempt `attempt` (1-based) of segment `segment`
/// (0-based) of release `release` (0-based) of `task`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScriptedFault {
    pub task: TaskId,
    pub release: u64,
    pub segment: usize,
    pub attempt: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultSchedule {
    None,
    Scripted(Vec<ScriptedFault>),
    /// Per release `k ~ U[0, f_i]` faults, each on a segment chosen with
    /// probability proportional to its length.
    Randomized {
        seed: u64,
    },
}

impl FaultSchedule {
    /// Parses a fault file: one `task release segment attempt` per line,
    /// `#` starts a comment.
    pub fn parse_scripted(text: &str) -> Result<Self, SimError> {
        let mut out = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = |why: &str| SimError::InvalidInput(format!("fault file line {}: {why}", no + 1));
            if f.len() != 4 {
                return Err(bad("expected `task release segment attempt`"));
            }
            let n = |s: &str| s.parse::<u64>().map_err(|e| bad(&format!("`{s}`: {e}")));
            out.push(ScriptedFault {
                task: n(f[0])? as TaskId,
                release: n(f[1])?,
                segment: n(f[2])? as usize,
                attempt: n(f[3])? as u32,
            });
        }
        Ok(FaultSchedule::Scripted(out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Normal(u64),
    Cs(ResourceId),
}

/// Default job shape: requests in resource order, with `C` split as evenly
/// as possible into one more execution piece than there are requests.
/// Empty pieces are dropped.
pub fn default_layout(task: &TaskSpec) -> Vec<Segment> {
    let reqs: Vec<ResourceId> = task
        .accesses
        .iter()
        .flat_map(|(&x, &n)| std::iter::repeat_n(x, n as usize))
        .collect();
    let pieces = reqs.len() as u64 + 1;
    let base = task.c / pieces;
    let extra = task.c % pieces;
    let mut out = Vec::with_capacity(reqs.len() * 2 + 1);
    for p in 0..pieces {
        let len = base + u64::from(p < extra);
        if len > 0 {
            out.push(Segment::Normal(len));
        }
        if let Some(&x) = reqs.get(p as usize) {
            out.push(Segment::Cs(x));
        }
    }
    out
}

fn check_layout(task: &TaskSpec, layout: &[Segment]) -> Result<(), SimError> {
    let normal: u64 = layout
        .iter()
        .map(|s| match s {
            Segment::Normal(l) => *l,
            Segment::Cs(_) => 0,
        })
        .sum();
    let mut reqs: BTreeMap<ResourceId, u32> = BTreeMap::new();
    for s in layout {
        if let Segment::Cs(x) = s {
            *reqs.entry(*x).or_default() += 1;
        }
    }
    let expected: BTreeMap<ResourceId, u32> = task
        .accesses
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(&x, &n)| (x, n))
        .collect();
    if normal != task.c || reqs != expected {
        return Err(SimError::InvalidInput(format!(
            "layout of task {} does not match its execution time and requests",
            task.id
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimOptions {
    pub protocol: Protocol,
    pub releases: ReleasePattern,
    pub faults: FaultSchedule,
    /// No job is released at or after this time.
    pub horizon: u64,
    /// Per-task segment layouts replacing [`default_layout`].
    pub layouts: BTreeMap<TaskId, Vec<Segment>>,
    pub record_events: bool,
    /// When false, LEFT-RS joiners never synchronise.
    pub fault_mode: bool,
}

impl SimOptions {
    pub fn new(protocol: Protocol, releases: ReleasePattern, faults: FaultSchedule, horizon: u64) -> Self {
        SimOptions {
            protocol,
            releases,
            faults,
            horizon,
            layouts: BTreeMap::new(),
            record_events: true,
            fault_mode: true,
        }
    }
}

pub fn simulate(
    system: &SystemSpec,
    protocol: Protocol,
    releases: &ReleasePattern,
    faults: &FaultSchedule,
    horizon: u64,
) -> Result<SimTrace, SimError> {
    simulate_with(
        system,
        &SimOptions::new(protocol, releases.clone(), faults.clone(), horizon),
    )
}

pub fn simulate_with(system: &SystemSpec, opts: &SimOptions) -> Result<SimTrace, SimError> {
    if !matches!(opts.protocol, Protocol::LeftRs | Protocol::Checkpointing) {
        return Err(SimError::InvalidInput(format!(
            "{} is analysed only; simulate leftrs or checkpointing",
            opts.protocol
        )));
    }
    let violations = crate::model::validate(system);
    if let Some(v) = violations.first() {
        return Err(crate::error::ModelError::Invalid(v.to_string()).into());
    }
    if system.resources.iter().any(|r| r.c == 0) {
        return Err(SimError::InvalidInput(
            "critical sections must be at least 1 us long".into(),
        ));
    }
    let max_d = system.tasks.iter().map(|t| t.d).max().unwrap_or(0);
    if opts.horizon < max_d {
        return Err(SimError::InvalidInput(format!(
            "horizon {} is shorter than the longest deadline {max_d}",
            opts.horizon
        )));
    }
    let mut layouts = Vec::with_capacity(system.tasks.len());
    for t in &system.tasks {
        match opts.layouts.get(&t.id) {
            Some(l) => {
                check_layout(t, l)?;
                layouts.push(l.clone());
            }
            None => layouts.push(default_layout(t)),
        }
    }
    for id in opts.layouts.keys() {
        system.task(*id)?;
    }
    if let FaultSchedule::Scripted(list) = &opts.faults {
        let mut per_job: BTreeMap<(TaskId, u64), BTreeSet<(usize, u32)>> = BTreeMap::new();
        for f in list {
            let t = system.task(f.task)?;
            let pos = system.tasks.iter().position(|x| x.id == f.task).unwrap_or(0);
            if f.attempt == 0 {
                return Err(SimError::InvalidInput("fault attempt indices start at 1".into()));
            }
            if f.segment >= layouts[pos].len() {
                return Err(SimError::InvalidInput(format!(
                    "task {} has no segment {}",
                    f.task, f.segment
                )));
            }
            per_job
                .entry((f.task, f.release))
                .or_default()
                .insert((f.segment, f.attempt));
            if per_job[&(f.task, f.release)].len() > t.f as usize {
                return Err(SimError::InvalidInput(format!(
                    "release {} of task {} has more scripted faults than its budget {}",
                    f.release, f.task, t.f
                )));
            }
        }
    }
    if let ReleasePattern::Scripted(map) = &opts.releases {
        for (id, times) in map {
            let t = system.task(*id)?;
            if times.windows(2).any(|w| w[1] < w[0] + t.t) {
                return Err(SimError::InvalidInput(format!(
                    "scripted releases of task {id} are closer than its period"
                )));
            }
        }
    }
    Ok(engine::Engine::new(system, opts, layouts).run())
}
