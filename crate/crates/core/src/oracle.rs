//! Exact maximum throughput for small instances.
//!
//! The search builds left-shifted schedules machine by machine: the open
//! machine with the smallest free time either runs some remaining job at its
//! earliest fit, or is closed for good. Every left-shifted schedule is
//! reachable this way, and every feasible schedule left-shifts to one.
//! Results are memoized on (machine free times, remaining jobs).

use std::collections::HashMap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::greedy::greedy_shortest_first;
use crate::instance::{BlockedInterval, Instance, InstanceError, Job, Schedule, Time};

/// Jobs are tracked in a `u32` bitmask.
pub const MASK_LIMIT: usize = 24;

const CLOSED: Time = Time::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_jobs: usize,
    /// Wall-clock budget in milliseconds; 0 means unlimited.
    pub time_budget_ms: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_jobs: 12, time_budget_ms: 0 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{n} jobs exceed the oracle limit of {max} (set a time budget to try anyway)")]
    TooManyJobs { n: usize, max: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub value: usize,
    pub schedule: Schedule,
    pub proven_optimal: bool,
}

pub fn exact_solve(inst: &Instance, limits: OracleLimits) -> Result<OracleResult, OracleError> {
    assert!(limits.max_jobs >= 1, "max_jobs must be at least 1");
    let n = inst.len();
    if n > MASK_LIMIT || (n > limits.max_jobs && limits.time_budget_ms == 0) {
        return Err(OracleError::TooManyJobs { n, max: limits.max_jobs.min(MASK_LIMIT) });
    }
    let deadline = (limits.time_budget_ms > 0)
        .then(|| Instant::now() + Duration::from_millis(limits.time_budget_ms));
    let mut search = Search::new(inst, deadline, None);
    match search.run(n) {
        Some(schedule) => Ok(OracleResult {
            value: schedule.value(),
            schedule,
            proven_optimal: true,
        }),
        None => {
            log::warn!("oracle time budget exhausted after {} states", search.memo.len());
            let schedule = greedy_shortest_first(inst);
            Ok(OracleResult { value: schedule.value(), schedule, proven_optimal: false })
        }
    }
}

/// Best schedule using at most `cap` jobs, or `None` when the memo grows past
/// `state_budget` entries.
pub(crate) fn best_capped(inst: &Instance, cap: usize, state_budget: usize) -> Option<Schedule> {
    if inst.len() > MASK_LIMIT {
        return None;
    }
    Search::new(inst, None, Some(state_budget)).run(cap)
}

#[derive(Clone, Copy, Debug)]
enum Move {
    Stop,
    Close,
    Run { job: usize, start: Time },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Key {
    free: Vec<Time>,
    mask: u32,
    room: u8,
}

struct Search<'a> {
    inst: &'a Instance,
    jobs: &'a [Job],
    /// Machines are interchangeable when nothing is blocked.
    symmetric: bool,
    memo: HashMap<Key, (u8, Move)>,
    deadline: Option<Instant>,
    state_budget: Option<usize>,
    calls: u64,
    aborted: bool,
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, deadline: Option<Instant>, state_budget: Option<usize>) -> Self {
        Self {
            inst,
            jobs: inst.jobs(),
            symmetric: inst.blocked().is_empty(),
            memo: HashMap::new(),
            deadline,
            state_budget,
            calls: 0,
            aborted: false,
        }
    }

    fn run(&mut self, cap: usize) -> Option<Schedule> {
        let n = self.jobs.len();
        let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let free = vec![0; self.inst.machines()];
        let labels: Vec<usize> = (0..self.inst.machines()).collect();
        let (free, mask, room, labels) = self.normalize(free, full, cap.min(n), labels);
        self.best(&free, mask, room);
        if self.aborted {
            return None;
        }
        Some(self.rebuild(free, mask, room, labels))
    }

    fn fit(&self, machine: usize, free: Time, job: &Job) -> Option<Time> {
        if free == CLOSED {
            return None;
        }
        let s = self.inst.earliest_fit(machine, free.max(job.r), job.p);
        (s + job.p <= job.d).then_some(s)
    }

    /// Drops dead jobs, lifts idle free times to the earliest live release
    /// and sorts machines when they are interchangeable. `labels` tracks the
    /// real machine behind each slot.
    fn normalize(
        &self,
        mut free: Vec<Time>,
        mask: u32,
        room: usize,
        labels: Vec<usize>,
    ) -> (Vec<Time>, u32, u8, Vec<usize>) {
        let mut live = 0u32;
        let mut min_r = CLOSED;
        for (j, job) in self.jobs.iter().enumerate() {
            if mask & (1 << j) == 0 {
                continue;
            }
            let alive = free
                .iter()
                .enumerate()
                .any(|(slot, &f)| self.fit(labels[slot], f, job).is_some());
            if alive {
                live |= 1 << j;
                min_r = min_r.min(job.r);
            }
        }
        if live == 0 {
            free.iter_mut().for_each(|f| *f = CLOSED);
        } else {
            for f in free.iter_mut().filter(|f| **f != CLOSED) {
                *f = (*f).max(min_r);
            }
        }
        let room = room.min(live.count_ones() as usize) as u8;
        if self.symmetric {
            let mut pairs: Vec<(Time, usize)> = free.into_iter().zip(labels).collect();
            pairs.sort_unstable();
            let (free, labels) = pairs.into_iter().unzip();
            (free, live, room, labels)
        } else {
            (free, live, room, labels)
        }
    }

    fn machine_to_extend(free: &[Time]) -> Option<usize> {
        let (slot, &f) = free.iter().enumerate().min_by_key(|&(i, &f)| (f, i))?;
        (f != CLOSED).then_some(slot)
    }

    fn best(&mut self, free: &[Time], mask: u32, room: u8) -> u8 {
        if room == 0 || mask == 0 {
            return 0;
        }
        let Some(slot) = Self::machine_to_extend(free) else {
            return 0;
        };
        let key = Key { free: free.to_vec(), mask, room };
        if let Some(&(v, _)) = self.memo.get(&key) {
            return v;
        }
        self.calls += 1;
        if self.calls.is_multiple_of(1024) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.aborted = true;
                }
            }
        }
        if let Some(b) = self.state_budget {
            if self.memo.len() >= b {
                self.aborted = true;
            }
        }
        if self.aborted {
            return 0;
        }

        // Slots are machine labels only in the asymmetric case; with symmetric
        // machines blocks are absent and any label gives the same fit.
        let machine = if self.symmetric { 0 } else { slot };
        let t = free[slot];
        let mut best = 0u8;
        let mut best_move = Move::Stop;
        for j in 0..self.jobs.len() {
            if mask & (1 << j) == 0 {
                continue;
            }
            let job = self.jobs[j];
            let Some(s) = self.fit(machine, t, &job) else { continue };
            if s == t && self.edf_dominated(j, mask, t) {
                continue;
            }
            let mut next = free.to_vec();
            next[slot] = s + job.p;
            let labels: Vec<usize> = (0..free.len()).collect();
            let (nf, nm, nr, _) = self.normalize(next, mask & !(1 << j), room as usize - 1, labels);
            let v = 1 + self.best(&nf, nm, nr);
            if v > best {
                best = v;
                best_move = Move::Run { job: j, start: s };
                if best == room {
                    break;
                }
            }
        }
        if best < room {
            let mut next = free.to_vec();
            next[slot] = CLOSED;
            let labels: Vec<usize> = (0..free.len()).collect();
            let (nf, nm, nr, _) = self.normalize(next, mask, room as usize, labels);
            let v = self.best(&nf, nm, nr);
            if v > best {
                best = v;
                best_move = Move::Close;
            }
        }
        if !self.aborted {
            self.memo.insert(key, (best, best_move));
        }
        best
    }

    /// Another remaining job of the same size with an earlier (deadline, id)
    /// could take start `t` instead; swapping the two never hurts.
    fn edf_dominated(&self, j: usize, mask: u32, t: Time) -> bool {
        let job = self.jobs[j];
        self.jobs.iter().enumerate().any(|(k, other)| {
            k != j
                && mask & (1 << k) != 0
                && other.p == job.p
                && (other.d, other.id) < (job.d, job.id)
                && other.r <= t
                && t + other.p <= other.d
        })
    }

    fn rebuild(&self, mut free: Vec<Time>, mut mask: u32, mut room: u8, mut labels: Vec<usize>) -> Schedule {
        let mut sched = Schedule::new();
        loop {
            if room == 0 || mask == 0 {
                break;
            }
            let Some(slot) = Self::machine_to_extend(&free) else { break };
            let key = Key { free: free.clone(), mask, room };
            let Some(&(_, mv)) = self.memo.get(&key) else { break };
            let mut next = free.clone();
            let next_mask;
            let next_room;
            match mv {
                Move::Stop => break,
                Move::Close => {
                    next[slot] = CLOSED;
                    next_mask = mask;
                    next_room = room as usize;
                }
                Move::Run { job, start } => {
                    let jb = self.jobs[job];
                    sched.assign(jb.id, labels[slot], start);
                    next[slot] = start + jb.p;
                    next_mask = mask & !(1 << job);
                    next_room = room as usize - 1;
                }
            }
            let (nf, nm, nr, nl) = self.normalize(next, next_mask, next_room, labels);
            free = nf;
            mask = nm;
            room = nr;
            labels = nl;
        }
        sched
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdfOutcome {
    pub feasible: bool,
    pub schedule: Schedule,
}

/// Runs the earliest-deadline-first rule on equal-length jobs: whenever a
/// machine frees up, it takes the released job with the earliest deadline,
/// if that job can still finish in time.
///
/// A `true` answer is a certificate. With differing release times a
/// non-idling rule can miss schedules that wait on purpose, so `false` only
/// means this rule failed.
pub fn edf_uniform_feasible(
    jobs: &[Job],
    machines: usize,
    blocked: &[BlockedInterval],
) -> Result<EdfOutcome, InstanceError> {
    if let Some(first) = jobs.first() {
        if jobs.iter().any(|j| j.p != first.p) {
            return Err(InstanceError::Schema("jobs must share one processing time".into()));
        }
    }
    let inst = Instance::new(jobs.to_vec(), machines, blocked.to_vec())?;
    let mut pending: Vec<Job> = inst.jobs().to_vec();
    pending.sort_by_key(|j| (j.d, j.id));
    let mut free = vec![0; machines];
    let mut sched = Schedule::new();
    let mut feasible = true;
    while !pending.is_empty() {
        let (m, &t) = free
            .iter()
            .enumerate()
            .min_by_key(|&(i, &f)| (f, i))
            .expect("at least one machine");
        let Some(pos) = pending.iter().position(|j| j.r <= t) else {
            free[m] = pending.iter().map(|j| j.r).min().expect("non-empty");
            continue;
        };
        let job = pending.remove(pos);
        let s = inst.earliest_fit(m, t, job.p);
        if s + job.p <= job.d {
            sched.assign(job.id, m, s);
            free[m] = s + job.p;
        } else {
            feasible = false;
        }
    }
    Ok(EdfOutcome { feasible, schedule: sched })
}
