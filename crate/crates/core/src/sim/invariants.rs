//! Checks a finished trace against the protocol's guarantees by replaying
//! queue membership from the events alone.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::analysis::Protocol;
use crate::model::{ResourceId, SystemSpec, TaskId};

use super::{EventKind, SimEvent, SimTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Sync,
    Running,
    FaultWait,
    DoneOk,
}

#[derive(Debug)]
struct Tenant {
    task: TaskId,
    state: State,
    /// Tasks queued ahead at join time.
    predecessors: BTreeSet<TaskId>,
    restarts_by_predecessors: usize,
    sync_since: Option<u64>,
    attempt_since: Option<u64>,
}

#[derive(Default)]
struct Replay {
    tenants: Vec<Tenant>,
    /// Members still owed a restart by the latest update.
    owed: Option<(u64, TaskId, BTreeSet<TaskId>)>,
    updates: usize,
    leaves: usize,
    last_update_at: Option<u64>,
}

/// Every violated property, as a readable message. Empty means the trace
/// is consistent.
pub fn check_trace(system: &SystemSpec, trace: &SimTrace) -> Vec<String> {
    let mut errs = Vec::new();
    let cs: BTreeMap<ResourceId, u64> = system.resources.iter().map(|r| (r.id, r.c)).collect();
    let leftrs = trace.protocol == Protocol::LeftRs;
    let mut replay: BTreeMap<ResourceId, Replay> = BTreeMap::new();
    let mut outstanding: BTreeMap<TaskId, ResourceId> = BTreeMap::new();
    let mut releases: BTreeMap<TaskId, VecDeque<u64>> = BTreeMap::new();
    let mut responses: BTreeMap<TaskId, Vec<u64>> = BTreeMap::new();
    let mut prev_time = 0;

    for (k, e) in trace.events.iter().enumerate() {
        if e.time < prev_time {
            errs.push(format!("event {k} goes back in time ({} < {prev_time})", e.time));
        }
        prev_time = e.time;
        match e.kind {
            EventKind::Release => releases.entry(e.task).or_default().push_back(e.time),
            EventKind::Complete => match releases.get_mut(&e.task).and_then(|q| q.pop_front()) {
                Some(r) => responses.entry(e.task).or_default().push(e.time - r),
                None => errs.push(format!("task {} completes without a release", e.task)),
            },
            EventKind::DeadlineMiss => {
                outstanding.remove(&e.task);
            }
            _ => {}
        }
        let Some(x) = e.resource else { continue };
        let c = cs.get(&x).copied().unwrap_or(0);
        let global = system.is_global(x);
        let r = replay.entry(x).or_default();

        if let Some((at, updater, owed)) = &r.owed {
            if e.time > *at && !owed.is_empty() {
                errs.push(format!(
                    "update by task {updater} on resource {x} at {at} left stale members {owed:?} running"
                ));
                r.owed = None;
            }
        }

        let pos = r.tenants.iter().position(|t| t.task == e.task);
        match e.kind {
            EventKind::RequestResource => {
                if pos.is_some() {
                    errs.push(format!("task {} requests resource {x} twice", e.task));
                }
                outstanding.insert(e.task, x);
                let predecessors = r.tenants.iter().map(|t| t.task).collect();
                r.tenants.push(Tenant {
                    task: e.task,
                    state: State::Sync,
                    predecessors,
                    restarts_by_predecessors: 0,
                    sync_since: None,
                    attempt_since: None,
                });
            }
            EventKind::EnterSync => {
                if let Some(p) = pos {
                    r.tenants[p].sync_since = Some(e.time);
                }
            }
            EventKind::StartCsAttempt => {
                let Some(p) = pos else {
                    errs.push(format!(
                        "task {} starts on resource {x} without a request",
                        e.task
                    ));
                    continue;
                };
                if !leftrs || !global {
                    let busy = r
                        .tenants
                        .iter()
                        .any(|t| t.task != e.task && t.state == State::Running);
                    if busy {
                        errs.push(format!(
                            "task {} enters resource {x} at {} while another holder runs",
                            e.task, e.time
                        ));
                    }
                }
                let t = &mut r.tenants[p];
                if let Some(s) = t.sync_since.take() {
                    if e.time - s > c {
                        errs.push(format!(
                            "task {} synchronised {} us on resource {x} (c = {c})",
                            e.task,
                            e.time - s
                        ));
                    }
                }
                if leftrs && global {
                    if let Some(a) = t.attempt_since {
                        if e.time - a > c {
                            errs.push(format!(
                                "task {} spent {} us in one round on resource {x} (c = {c})",
                                e.task,
                                e.time - a
                            ));
                        }
                    }
                }
                t.attempt_since = Some(e.time);
                t.state = State::Running;
            }
            EventKind::CsFault => {
                if let Some(p) = pos {
                    r.tenants[p].state = State::FaultWait;
                }
            }
            EventKind::CsSuccessWait => {
                if let Some(p) = pos {
                    r.tenants[p].state = State::DoneOk;
                }
            }
            EventKind::ResourceUpdate => {
                r.updates += 1;
                if global && r.last_update_at == Some(e.time) {
                    errs.push(format!("two updates of resource {x} at {}", e.time));
                }
                r.last_update_at = Some(e.time);
                let Some(p) = pos else {
                    errs.push(format!("task {} updates resource {x} outside the queue", e.task));
                    continue;
                };
                if leftrs && global {
                    if let Some(a) = r.tenants[p].attempt_since {
                        if e.time - a > c {
                            errs.push(format!(
                                "task {} updated resource {x} {} us after its attempt began (c = {c})",
                                e.task,
                                e.time - a
                            ));
                        }
                    }
                    let stale = r
                        .tenants
                        .iter()
                        .filter(|t| t.task != e.task)
                        .filter(|t| matches!(t.state, State::Running | State::DoneOk))
                        .map(|t| t.task)
                        .collect();
                    r.owed = Some((e.time, e.task, stale));
                }
            }
            EventKind::DataInducedRestart => {
                let Some((at, updater, owed)) = r.owed.as_mut() else {
                    errs.push(format!(
                        "task {} restarts on resource {x} without an update",
                        e.task
                    ));
                    continue;
                };
                if *at != e.time || !owed.remove(&e.task) {
                    errs.push(format!(
                        "task {} restarted on resource {x} at {} but held no stale copy",
                        e.task, e.time
                    ));
                    continue;
                }
                let updater = *updater;
                if let Some(p) = pos {
                    let t = &mut r.tenants[p];
                    if t.predecessors.contains(&updater) {
                        t.restarts_by_predecessors += 1;
                        if t.restarts_by_predecessors > t.predecessors.len() {
                            errs.push(format!(
                                "task {} restarted {} times by {} predecessors on resource {x}",
                                e.task,
                                t.restarts_by_predecessors,
                                t.predecessors.len()
                            ));
                        }
                    }
                }
            }
            EventKind::LeaveFifo => {
                r.leaves += 1;
                outstanding.remove(&e.task);
                match pos {
                    Some(p) => {
                        r.tenants.remove(p);
                    }
                    None => errs.push(format!("task {} leaves resource {x} without joining", e.task)),
                }
            }
            _ => {}
        }
    }

    for (x, r) in &replay {
        if r.updates != r.leaves {
            errs.push(format!(
                "resource {x}: {} updates but {} departures",
                r.updates, r.leaves
            ));
        }
        if let Some((at, updater, owed)) = &r.owed {
            if !owed.is_empty() {
                errs.push(format!(
                    "update by task {updater} on resource {x} at {at} left stale members {owed:?}"
                ));
            }
        }
    }
    if trace.unfinished == 0 {
        for (task, x) in outstanding {
            errs.push(format!(
                "request of task {task} to resource {x} never left the queue"
            ));
        }
    }
    if trace.jobs.iter().all(|j| j.response.is_some()) {
        let mut recorded: BTreeMap<TaskId, Vec<u64>> = BTreeMap::new();
        for j in &trace.jobs {
            recorded.entry(j.task).or_default().extend(j.response);
        }
        if !trace.events.is_empty() && recorded != responses {
            errs.push("job response times disagree with release/complete events".into());
        }
    }
    errs
}

/// Events at one tick, for compact assertions in tests.
pub fn events_at(events: &[SimEvent], time: u64) -> Vec<(EventKind, TaskId)> {
    events
        .iter()
        .filter(|e| e.time == time)
        .map(|e| (e.kind, e.task))
        .collect()
}
