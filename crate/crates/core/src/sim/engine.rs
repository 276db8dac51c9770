use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::Protocol;
use crate::model::{ResourceId, SystemSpec, TaskId};
use crate::taskgen::stream;

use super::queue::{LeftRsQueue, QueueEvent};
use super::{EventKind, FaultSchedule, JobRecord, ReleasePattern, Segment, SimEvent, SimOptions, SimTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    /// About to start segment `seg`.
    Ready,
    /// Consuming CPU time: an execution piece or a local critical section.
    Exec {
        remaining: u64,
        attempt: u32,
        local_cs: Option<ResourceId>,
    },
    /// Inside a global access, non-preemptive.
    Global(ResourceId),
}

struct Job {
    pos: usize,
    release: u64,
    deadline: u64,
    seg: usize,
    phase: Phase,
    faults_left: u32,
    /// `(segment, attempt)` pairs that fault, sorted.
    faulty: Vec<(usize, u32)>,
    done: bool,
}

impl Job {
    fn take_fault(&mut self, attempt: u32) -> bool {
        if self.faults_left > 0 && self.faulty.binary_search(&(self.seg, attempt)).is_ok() {
            self.faults_left -= 1;
            true
        } else {
            false
        }
    }
}

/// FIFO spin lock whose holder re-executes in place on a fault.
struct LockQueue {
    c: u64,
    fifo: VecDeque<usize>,
    /// End of the holder's current attempt and its completed attempts.
    holder: Option<(u64, u32)>,
}

enum GlobalQueue {
    LeftRs(LeftRsQueue),
    Lock(LockQueue),
}

impl GlobalQueue {
    fn next_end(&self) -> Option<u64> {
        match self {
            GlobalQueue::LeftRs(q) => q.next_end(),
            GlobalQueue::Lock(l) => l.holder.map(|h| h.0),
        }
    }
}

#[derive(Default)]
struct Core {
    active: Vec<usize>,
    running: Option<usize>,
}

pub(super) struct Engine<'a> {
    sys: &'a SystemSpec,
    opts: &'a SimOptions,
    layouts: Vec<Vec<Segment>>,
    cs: Vec<u64>,
    /// Local ceiling per resource on the one core that uses it.
    ceilings: Vec<u32>,
    jobs: Vec<Job>,
    records: Vec<JobRecord>,
    cores: Vec<Core>,
    queues: Vec<Option<GlobalQueue>>,
    releases: BinaryHeap<Reverse<(u64, usize)>>,
    release_count: Vec<u64>,
    release_rng: Vec<ChaCha8Rng>,
    fault_rng: Vec<ChaCha8Rng>,
    scripted_releases: Vec<VecDeque<u64>>,
    scripted_faults: BTreeMap<(TaskId, u64), Vec<(usize, u32)>>,
    deadlines: BinaryHeap<Reverse<(u64, usize)>>,
    events: Vec<SimEvent>,
    qbuf: Vec<QueueEvent>,
}

impl<'a> Engine<'a> {
    pub fn new(sys: &'a SystemSpec, opts: &'a SimOptions, layouts: Vec<Vec<Segment>>) -> Self {
        let k = sys.resources.len();
        let mut cs = vec![0; k];
        for r in &sys.resources {
            cs[r.id] = r.c;
        }
        let mut queues = Vec::with_capacity(k);
        let mut ceilings = vec![0; k];
        for x in 0..k {
            if sys.is_global(x) {
                queues.push(Some(match opts.protocol {
                    Protocol::LeftRs => GlobalQueue::LeftRs(LeftRsQueue::new(cs[x], opts.fault_mode)),
                    _ => GlobalQueue::Lock(LockQueue {
                        c: cs[x],
                        fifo: VecDeque::new(),
                        holder: None,
                    }),
                }));
            } else {
                queues.push(None);
                if let Some(core) = sys.cores_using(x).into_iter().next() {
                    ceilings[x] = sys.local_ceiling(core, x).unwrap_or(0);
                }
            }
        }
        let n = sys.tasks.len();
        let (rseed, fseed) = (
            match opts.releases {
                ReleasePattern::Sporadic { seed } => seed,
                _ => 0,
            },
            match opts.faults {
                FaultSchedule::Randomized { seed } => seed,
                _ => 0,
            },
        );
        let mut scripted_faults: BTreeMap<(TaskId, u64), Vec<(usize, u32)>> = BTreeMap::new();
        if let FaultSchedule::Scripted(list) = &opts.faults {
            for f in list {
                let e = scripted_faults.entry((f.task, f.release)).or_default();
                e.push((f.segment, f.attempt));
                e.sort_unstable();
                e.dedup();
            }
        }
        let scripted_releases = sys
            .tasks
            .iter()
            .map(|t| match &opts.releases {
                ReleasePattern::Scripted(m) => m.get(&t.id).cloned().unwrap_or_default().into(),
                _ => VecDeque::new(),
            })
            .collect();
        let mut e = Engine {
            sys,
            opts,
            layouts,
            cs,
            ceilings,
            jobs: Vec::new(),
            records: Vec::new(),
            cores: (0..sys.num_cores).map(|_| Core::default()).collect(),
            queues,
            releases: BinaryHeap::new(),
            release_count: vec![0; n],
            release_rng: (0..n).map(|p| stream(rseed, 2 * p as u64 + 1)).collect(),
            fault_rng: (0..n).map(|p| stream(fseed, 2 * p as u64 + 2)).collect(),
            scripted_releases,
            scripted_faults,
            deadlines: BinaryHeap::new(),
            events: Vec::new(),
            qbuf: Vec::new(),
        };
        for pos in 0..n {
            let first = match &opts.releases {
                ReleasePattern::Scripted(_) => e.scripted_releases[pos].pop_front(),
                _ => Some(0),
            };
            e.push_release(pos, first);
        }
        e
    }

    fn push_release(&mut self, pos: usize, at: Option<u64>) {
        if let Some(t) = at.filter(|&t| t < self.opts.horizon) {
            self.releases.push(Reverse((t, pos)));
        }
    }

    fn emit(
        &mut self,
        time: u64,
        kind: EventKind,
        job: usize,
        resource: Option<ResourceId>,
        attempt: Option<u32>,
    ) {
        if self.opts.record_events {
            let task = self.sys.tasks[self.jobs[job].pos].id;
            self.events.push(SimEvent {
                time,
                kind,
                task,
                resource,
                attempt,
            });
        }
    }

    pub fn run(mut self) -> SimTrace {
        let max_d = self.sys.tasks.iter().map(|t| t.d).max().unwrap_or(0);
        let cap = self.opts.horizon.saturating_mul(2).max(self.opts.horizon + max_d);
        let mut now = 0;
        loop {
            self.tick(now);
            match self.next_time(now) {
                None => break,
                Some(t) if t > cap => {
                    now = cap;
                    break;
                }
                Some(t) => {
                    self.elapse(now, t);
                    now = t;
                }
            }
        }
        let mut unfinished = 0;
        for (j, job) in self.jobs.iter().enumerate() {
            if !job.done {
                unfinished += 1;
                if now > job.deadline {
                    self.records[j].deadline_missed = true;
                }
            }
        }
        let deadline_miss = self.records.iter().any(|r| r.deadline_missed);
        SimTrace {
            protocol: self.opts.protocol,
            events: self.events,
            jobs: self.records,
            deadline_miss,
            unfinished,
            end_time: now,
        }
    }

    fn next_time(&mut self, now: u64) -> Option<u64> {
        while let Some(&Reverse((_, j))) = self.deadlines.peek() {
            if self.jobs[j].done {
                self.deadlines.pop();
            } else {
                break;
            }
        }
        let mut next = None;
        let mut consider = |t: Option<u64>| {
            if let Some(t) = t {
                next = Some(next.map_or(t, |n: u64| n.min(t)));
            }
        };
        consider(self.releases.peek().map(|r| r.0 .0));
        if self.opts.record_events {
            consider(self.deadlines.peek().map(|r| r.0 .0));
        }
        for q in self.queues.iter().flatten() {
            consider(q.next_end());
        }
        for core in &self.cores {
            if let Some(j) = core.running {
                if let Phase::Exec { remaining, .. } = self.jobs[j].phase {
                    consider(Some(now + remaining));
                }
            }
        }
        next
    }

    fn elapse(&mut self, from: u64, to: u64) {
        let dt = to - from;
        for core in &self.cores {
            if let Some(j) = core.running {
                if let Phase::Exec { remaining, .. } = &mut self.jobs[j].phase {
                    *remaining -= dt;
                }
            }
        }
    }

    fn tick(&mut self, now: u64) {
        // 1. attempt ends, updates, restarts, retries in global queues
        let mut leavers = Vec::new();
        for x in 0..self.queues.len() {
            if self.queues[x].as_ref().and_then(|q| q.next_end()) != Some(now) {
                continue;
            }
            match self.queues[x].as_mut() {
                Some(GlobalQueue::LeftRs(q)) => {
                    let jobs = &mut self.jobs;
                    self.qbuf.clear();
                    let left = q.advance(now, |j, attempt| jobs[j].take_fault(attempt), &mut self.qbuf);
                    let evs = std::mem::take(&mut self.qbuf);
                    for ev in &evs {
                        self.emit_queue_event(now, x, *ev);
                    }
                    self.qbuf = evs;
                    leavers.extend(left);
                }
                Some(GlobalQueue::Lock(_)) => {
                    if let Some(j) = self.advance_lock(now, x) {
                        leavers.push(j);
                    }
                }
                None => {}
            }
        }
        for &j in &leavers {
            self.leave_global(now, j);
        }

        // 2. checkpoints of execution pieces and local critical sections
        for c in 0..self.cores.len() {
            let Some(j) = self.cores[c].running else { continue };
            let Phase::Exec {
                remaining: 0,
                attempt,
                local_cs,
            } = self.jobs[j].phase
            else {
                continue;
            };
            let faulty = self.jobs[j].take_fault(attempt);
            match (local_cs, faulty) {
                (None, true) => {
                    self.emit(now, EventKind::CheckpointFail, j, None, Some(attempt));
                    let Segment::Normal(len) = self.layouts[self.jobs[j].pos][self.jobs[j].seg] else {
                        unreachable!("execution piece expected")
                    };
                    self.jobs[j].phase = Phase::Exec {
                        remaining: len,
                        attempt: attempt + 1,
                        local_cs: None,
                    };
                }
                (None, false) => {
                    self.emit(now, EventKind::CheckpointPass, j, None, Some(attempt));
                    self.jobs[j].seg += 1;
                    self.jobs[j].phase = Phase::Ready;
                }
                (Some(x), true) => {
                    self.emit(now, EventKind::CsFault, j, Some(x), Some(attempt));
                    self.emit(now, EventKind::StartCsAttempt, j, Some(x), Some(attempt + 1));
                    self.jobs[j].phase = Phase::Exec {
                        remaining: self.cs[x],
                        attempt: attempt + 1,
                        local_cs: Some(x),
                    };
                }
                (Some(x), false) => {
                    self.emit(now, EventKind::ResourceUpdate, j, Some(x), None);
                    self.emit(now, EventKind::LeaveFifo, j, Some(x), None);
                    self.jobs[j].seg += 1;
                    self.jobs[j].phase = Phase::Ready;
                    self.resume(now, j);
                }
            }
        }
        // 3. releases
        while let Some(&Reverse((t, pos))) = self.releases.peek() {
            if t != now {
                break;
            }
            self.releases.pop();
            self.release(now, pos);
        }

        // 4. dispatch until nothing changes
        loop {
            let mut changed = false;
            for c in 0..self.cores.len() {
                let pick = self.pick(c);
                self.cores[c].running = pick;
                if let Some(j) = pick {
                    if self.jobs[j].phase == Phase::Ready {
                        self.start_segment(now, j);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // 5. deadlines
        while let Some(&Reverse((d, j))) = self.deadlines.peek() {
            if d > now {
                break;
            }
            self.deadlines.pop();
            if !self.jobs[j].done {
                self.records[j].deadline_missed = true;
                self.emit(now, EventKind::DeadlineMiss, j, None, None);
            }
        }
    }

    fn emit_queue_event(&mut self, now: u64, x: ResourceId, ev: QueueEvent) {
        let (kind, j, attempt) = match ev {
            QueueEvent::EnterSync { id } => (EventKind::EnterSync, id, None),
            QueueEvent::Start { id, attempt } => (EventKind::StartCsAttempt, id, Some(attempt)),
            QueueEvent::Fault { id, attempt } => (EventKind::CsFault, id, Some(attempt)),
            QueueEvent::SuccessWait { id } => (EventKind::CsSuccessWait, id, None),
            QueueEvent::Update { id } => (EventKind::ResourceUpdate, id, None),
            QueueEvent::Leave { id } => (EventKind::LeaveFifo, id, None),
            QueueEvent::Restart { id } => (EventKind::DataInducedRestart, id, None),
        };
        self.emit(now, kind, j, Some(x), attempt);
    }

    fn advance_lock(&mut self, now: u64, x: ResourceId) -> Option<usize> {
        let Some(GlobalQueue::Lock(l)) = self.queues[x].as_mut() else {
            return None;
        };
        let (_, done) = l.holder?;
        let j = *l.fifo.front().expect("a holder is queued");
        let attempt = done + 1;
        let c = l.c;
        if self.jobs[j].take_fault(attempt) {
            if let Some(GlobalQueue::Lock(l)) = self.queues[x].as_mut() {
                l.holder = Some((now + c, attempt));
            }
            self.emit(now, EventKind::CsFault, j, Some(x), Some(attempt));
            self.emit(now, EventKind::StartCsAttempt, j, Some(x), Some(attempt + 1));
            return None;
        }
        self.emit(now, EventKind::ResourceUpdate, j, Some(x), None);
        self.emit(now, EventKind::LeaveFifo, j, Some(x), None);
        let next = {
            let Some(GlobalQueue::Lock(l)) = self.queues[x].as_mut() else {
                unreachable!()
            };
            l.fifo.pop_front();
            l.holder = l.fifo.front().map(|_| (now + c, 0));
            l.fifo.front().copied()
        };
        if let Some(n) = next {
            self.emit(now, EventKind::StartCsAttempt, n, Some(x), Some(1));
        }
        Some(j)
    }

    fn leave_global(&mut self, now: u64, j: usize) {
        self.jobs[j].seg += 1;
        self.jobs[j].phase = Phase::Ready;
        self.resume(now, j);
    }

    fn resume(&mut self, now: u64, j: usize) {
        if self.jobs[j].seg < self.layouts[self.jobs[j].pos].len() {
            self.emit(now, EventKind::ResumeNormal, j, None, None);
        }
    }

    fn release(&mut self, now: u64, pos: usize) {
        let task = &self.sys.tasks[pos];
        let idx = self.release_count[pos];
        self.release_count[pos] += 1;
        let faulty = match &self.opts.faults {
            FaultSchedule::None => Vec::new(),
            FaultSchedule::Scripted(_) => self
                .scripted_faults
                .get(&(task.id, idx))
                .cloned()
                .unwrap_or_default(),
            FaultSchedule::Randomized { .. } => self.draw_faults(pos),
        };
        let j = self.jobs.len();
        self.jobs.push(Job {
            pos,
            release: now,
            deadline: now + task.d,
            seg: 0,
            phase: Phase::Ready,
            faults_left: task.f,
            faulty,
            done: false,
        });
        self.records.push(JobRecord {
            task: task.id,
            release_index: idx,
            release: now,
            completion: None,
            response: None,
            deadline_missed: false,
        });
        self.cores[task.core].active.push(j);
        self.deadlines.push(Reverse((now + task.d, j)));
        self.emit(now, EventKind::Release, j, None, None);

        let next = match &self.opts.releases {
            ReleasePattern::SynchronousPeriodic => Some(now + task.t),
            ReleasePattern::Sporadic { .. } => {
                Some(now + self.release_rng[pos].random_range(task.t..=2 * task.t))
            }
            ReleasePattern::Scripted(_) => self.scripted_releases[pos].pop_front(),
        };
        self.push_release(pos, next);
    }

    fn draw_faults(&mut self, pos: usize) -> Vec<(usize, u32)> {
        let f = self.sys.tasks[pos].f;
        let rng = &mut self.fault_rng[pos];
        let k = rng.random_range(0..=f);
        let lens: Vec<u64> = self.layouts[pos]
            .iter()
            .map(|s| match *s {
                Segment::Normal(l) => l,
                Segment::Cs(x) => self.cs[x],
            })
            .collect();
        let total: u64 = lens.iter().sum();
        if k == 0 || total == 0 {
            return Vec::new();
        }
        let mut hits = vec![0u32; lens.len()];
        for _ in 0..k {
            let mut r = rng.random_range(0..total);
            for (s, &l) in lens.iter().enumerate() {
                if r < l {
                    hits[s] += 1;
                    break;
                }
                r -= l;
            }
        }
        hits.iter()
            .enumerate()
            .flat_map(|(s, &q)| (1..=q).map(move |a| (s, a)))
            .collect()
    }

    fn effective_priority(&self, j: usize) -> (u32, bool) {
        let job = &self.jobs[j];
        match job.phase {
            Phase::Global(_) => (u32::MAX, true),
            Phase::Exec {
                local_cs: Some(x), ..
            } => (self.ceilings[x].max(self.sys.tasks[job.pos].priority), true),
            _ => (self.sys.tasks[job.pos].priority, false),
        }
    }

    fn pick(&self, c: usize) -> Option<usize> {
        let core = &self.cores[c];
        let key = |j: usize| {
            let (eff, held) = self.effective_priority(j);
            let job = &self.jobs[j];
            (
                eff,
                held,
                self.sys.tasks[job.pos].priority,
                Reverse(job.release),
                Reverse(job.pos),
            )
        };
        let best = core.active.iter().copied().max_by_key(|&j| key(j))?;
        match core.running {
            Some(r)
                if core.active.contains(&r) && {
                    let (kr, kb) = (key(r), key(best));
                    (kr.0, kr.1) >= (kb.0, kb.1)
                } =>
            {
                Some(r)
            }
            _ => Some(best),
        }
    }

    fn start_segment(&mut self, now: u64, j: usize) {
        let pos = self.jobs[j].pos;
        let seg = self.jobs[j].seg;
        let Some(&segment) = self.layouts[pos].get(seg) else {
            self.complete(now, j);
            return;
        };
        match segment {
            Segment::Normal(len) => {
                self.jobs[j].phase = Phase::Exec {
                    remaining: len,
                    attempt: 1,
                    local_cs: None,
                };
                self.emit(now, EventKind::StartNormal, j, None, None);
            }
            Segment::Cs(x) => {
                self.emit(now, EventKind::RequestResource, j, Some(x), None);
                match self.queues[x].as_mut() {
                    None => {
                        self.jobs[j].phase = Phase::Exec {
                            remaining: self.cs[x],
                            attempt: 1,
                            local_cs: Some(x),
                        };
                        self.emit(now, EventKind::StartCsAttempt, j, Some(x), Some(1));
                    }
                    Some(GlobalQueue::LeftRs(q)) => {
                        self.jobs[j].phase = Phase::Global(x);
                        self.qbuf.clear();
                        q.join(now, j, self.jobs[j].faults_left, &mut self.qbuf);
                        let evs = std::mem::take(&mut self.qbuf);
                        for ev in &evs {
                            self.emit_queue_event(now, x, *ev);
                        }
                        self.qbuf = evs;
                    }
                    Some(GlobalQueue::Lock(l)) => {
                        self.jobs[j].phase = Phase::Global(x);
                        l.fifo.push_back(j);
                        if l.fifo.len() == 1 {
                            l.holder = Some((now + l.c, 0));
                            self.emit(now, EventKind::StartCsAttempt, j, Some(x), Some(1));
                        }
                    }
                }
            }
        }
    }

    fn complete(&mut self, now: u64, j: usize) {
        let job = &mut self.jobs[j];
        job.done = true;
        job.faulty = Vec::new();
        let core = self.sys.tasks[job.pos].core;
        let rec = &mut self.records[j];
        rec.completion = Some(now);
        rec.response = Some(now - job.release);
        if now > job.deadline {
            rec.deadline_missed = true;
        }
        let c = &mut self.cores[core];
        c.active.retain(|&a| a != j);
        if c.running == Some(j) {
            c.running = None;
        }
        self.emit(now, EventKind::Complete, j, None, None);
    }
}
