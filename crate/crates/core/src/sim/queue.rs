//! Per-resource LEFT-RS FIFO queue.
//!
//! Members execute their own copy of the critical section concurrently;
//! the queue only decides who may commit an update and when retries or
//! late joiners may start. Time is integer ticks and every attempt lasts
//! exactly `c` ticks.

/// Where a queue member stands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MemberState {
    /// Joined while someone was mid-attempt; waits to start aligned.
    Sync,
    Running {
        start: u64,
        end: u64,
    },
    /// Last attempt faulted; waits for every current attempt to end.
    FaultWait,
    /// Last attempt succeeded; waits for predecessors before updating.
    DoneOk,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Member {
    pub id: usize,
    pub state: MemberState,
    /// Faults this member may still suffer.
    pub budget: u32,
    /// Attempts that ran to completion (aborted ones do not count).
    pub completed: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueueEvent {
    EnterSync { id: usize },
    Start { id: usize, attempt: u32 },
    Fault { id: usize, attempt: u32 },
    SuccessWait { id: usize },
    Update { id: usize },
    Leave { id: usize },
    Restart { id: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LeftRsQueue {
    c: u64,
    /// When false, joiners never synchronise.
    fault_mode: bool,
    members: Vec<Member>,
}

impl LeftRsQueue {
    pub fn new(c: u64, fault_mode: bool) -> Self {
        assert!(c > 0, "critical sections must take at least one tick");
        LeftRsQueue {
            c,
            fault_mode,
            members: Vec::new(),
        }
    }

    pub fn c(&self) -> u64 {
        self.c
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn mid_attempt(&self, now: u64) -> bool {
        self.members
            .iter()
            .any(|m| matches!(m.state, MemberState::Running { start, .. } if start < now))
    }

    /// True when no current member can fault again and none is waiting to
    /// retry, so a joiner may start without aligning.
    fn predecessors_fault_free(&self) -> bool {
        self.members
            .iter()
            .all(|m| m.budget == 0 && m.state != MemberState::FaultWait)
    }

    fn start(&mut self, idx: usize, now: u64, out: &mut Vec<QueueEvent>) {
        let m = &mut self.members[idx];
        m.state = MemberState::Running {
            start: now,
            end: now + self.c,
        };
        out.push(QueueEvent::Start {
            id: m.id,
            attempt: m.completed + 1,
        });
    }

    /// Appends a requester at the tail.
    pub fn join(&mut self, now: u64, id: usize, budget: u32, out: &mut Vec<QueueEvent>) {
        let sync = self.fault_mode && self.mid_attempt(now) && !self.predecessors_fault_free();
        self.members.push(Member {
            id,
            state: MemberState::Sync,
            budget,
            completed: 0,
        });
        if sync {
            out.push(QueueEvent::EnterSync { id });
        } else {
            let idx = self.members.len() - 1;
            self.start(idx, now, out);
        }
    }

    /// The same queue shifted so that `now` becomes tick 1. Behaviour only
    /// depends on whether an attempt started before `now`, so every such
    /// start collapses to tick 0.
    pub fn normalized(&self, now: u64) -> LeftRsQueue {
        let mut q = self.clone();
        for m in &mut q.members {
            if let MemberState::Running { start, end } = m.state {
                m.state = MemberState::Running {
                    start: u64::from(start >= now),
                    end: end - now + 1,
                };
            }
            m.completed = 0;
        }
        q
    }

    /// Earliest tick at which some attempt ends.
    pub fn next_end(&self) -> Option<u64> {
        self.members
            .iter()
            .filter_map(|m| match m.state {
                MemberState::Running { end, .. } => Some(end),
                _ => None,
            })
            .min()
    }

    /// Processes everything due at `now`: attempt ends, at most one update
    /// with the restarts it causes, then retries and sync releases.
    /// `faulty(id, attempt)` is asked only for members with budget left.
    /// Returns the member that left, if any.
    pub fn advance(
        &mut self,
        now: u64,
        mut faulty: impl FnMut(usize, u32) -> bool,
        out: &mut Vec<QueueEvent>,
    ) -> Option<usize> {
        let mut just_ok = Vec::new();
        for m in &mut self.members {
            if let MemberState::Running { end, .. } = m.state {
                if end != now {
                    continue;
                }
                m.completed += 1;
                if m.budget > 0 && faulty(m.id, m.completed) {
                    m.budget -= 1;
                    m.state = MemberState::FaultWait;
                    out.push(QueueEvent::Fault {
                        id: m.id,
                        attempt: m.completed,
                    });
                } else {
                    m.state = MemberState::DoneOk;
                    just_ok.push(m.id);
                }
            }
        }

        let mut left = None;
        let updater = self
            .members
            .iter()
            .position(|m| m.state == MemberState::DoneOk)
            .filter(|&p| {
                self.members[..p]
                    .iter()
                    .all(|m| m.state == MemberState::FaultWait)
            });
        if let Some(p) = updater {
            let m = self.members.remove(p);
            out.push(QueueEvent::Update { id: m.id });
            out.push(QueueEvent::Leave { id: m.id });
            left = Some(m.id);
            for idx in 0..self.members.len() {
                if matches!(
                    self.members[idx].state,
                    MemberState::Running { .. } | MemberState::DoneOk
                ) {
                    out.push(QueueEvent::Restart {
                        id: self.members[idx].id,
                    });
                    self.start(idx, now, out);
                }
            }
        }

        if !self.mid_attempt(now) {
            for idx in 0..self.members.len() {
                if matches!(
                    self.members[idx].state,
                    MemberState::FaultWait | MemberState::Sync
                ) {
                    self.start(idx, now, out);
                }
            }
        }

        for id in just_ok {
            if self
                .members
                .iter()
                .any(|m| m.id == id && m.state == MemberState::DoneOk)
            {
                out.push(QueueEvent::SuccessWait { id });
            }
        }
        left
    }
}
