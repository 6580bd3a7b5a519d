//! Jobs, instances and schedules.
//!
//! All times are integral. A job `j` may run non-preemptively on any machine
//! inside its span `[r, d]`; a schedule is a sparse map from job id to
//! `(machine, start)`. Throughput is the number of assigned jobs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Time = i64;
pub type JobId = u32;

/// Default upper bound on the number of slack points enumerated.
pub const DEFAULT_SLACK_CAP: usize = 200_000;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schedule is infeasible: {0}")]
    InfeasibleSchedule(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    pub p: Time,
    pub r: Time,
    pub d: Time,
}

impl Job {
    pub fn new(id: JobId, p: Time, r: Time, d: Time) -> Self {
        Self { id, p, r, d }
    }

    /// Length of the span `[r, d]`.
    #[inline]
    pub fn span_len(&self) -> Time {
        self.d - self.r
    }

    /// Latest start that still meets the deadline.
    #[inline]
    pub fn latest_start(&self) -> Time {
        self.d - self.p
    }

    #[inline]
    pub fn fits_window(&self) -> bool {
        self.r + self.p <= self.d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockedInterval {
    pub machine: usize,
    pub start: Time,
    pub end: Time,
}

impl BlockedInterval {
    pub fn new(machine: usize, start: Time, end: Time) -> Self {
        Self { machine, start, end }
    }
}

/// A validated problem instance. Jobs are kept sorted by id and blocked
/// intervals by `(machine, start)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    jobs: Vec<Job>,
    machines: usize,
    horizon: Time,
    blocked: Vec<BlockedInterval>,
    by_machine: Vec<Vec<(Time, Time)>>,
}

impl Instance {
    /// Builds an instance, rejecting jobs that cannot fit their window.
    ///
    /// Blocked intervals are clipped to `[0, T]`; intervals that end up empty
    /// are discarded. Overlapping intervals on one machine are an error,
    /// abutting ones are merged.
    pub fn new(
        jobs: Vec<Job>,
        machines: usize,
        blocked: Vec<BlockedInterval>,
    ) -> Result<Self, InstanceError> {
        if machines == 0 {
            return Err(InstanceError::Schema("machine count must be positive".into()));
        }
        let mut jobs = jobs;
        jobs.sort_by_key(|j| j.id);
        for w in jobs.windows(2) {
            if w[0].id == w[1].id {
                return Err(InstanceError::Schema(format!("duplicate job id {}", w[0].id)));
            }
        }
        for j in &jobs {
            if j.p <= 0 {
                return Err(InstanceError::Schema(format!(
                    "job {}: processing time must be positive",
                    j.id
                )));
            }
            if j.r < 0 || j.d < 0 {
                return Err(InstanceError::Schema(format!("job {}: negative time", j.id)));
            }
            if !j.fits_window() {
                return Err(InstanceError::Schema(format!(
                    "job {}: r + p > d ({} + {} > {})",
                    j.id, j.r, j.p, j.d
                )));
            }
        }
        let horizon = jobs.iter().map(|j| j.d).max().unwrap_or(0).max(1);

        let mut by_machine: Vec<Vec<(Time, Time)>> = vec![Vec::new(); machines];
        for b in &blocked {
            if b.machine >= machines {
                return Err(InstanceError::Schema(format!(
                    "blocked interval on machine {} but m = {}",
                    b.machine, machines
                )));
            }
            if b.start < 0 || b.start >= b.end {
                return Err(InstanceError::Schema(format!(
                    "blocked interval [{}, {}) is empty or negative",
                    b.start, b.end
                )));
            }
            let end = b.end.min(horizon);
            if b.start < end {
                by_machine[b.machine].push((b.start, end));
            }
        }
        for (machine, list) in by_machine.iter_mut().enumerate() {
            list.sort_unstable();
            let mut merged: Vec<(Time, Time)> = Vec::with_capacity(list.len());
            for &(s, e) in list.iter() {
                match merged.last_mut() {
                    Some(last) if s < last.1 => {
                        return Err(InstanceError::Schema(format!(
                            "overlapping blocked intervals on machine {machine}"
                        )));
                    }
                    Some(last) if s == last.1 => last.1 = e,
                    _ => merged.push((s, e)),
                }
            }
            *list = merged;
        }
        let blocked = by_machine
            .iter()
            .enumerate()
            .flat_map(|(m, l)| l.iter().map(move |&(s, e)| BlockedInterval::new(m, s, e)))
            .collect();

        Ok(Self {
            jobs,
            machines,
            horizon,
            blocked,
            by_machine,
        })
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    /// `T`: the largest deadline, floored at 1.
    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn blocked(&self) -> &[BlockedInterval] {
        &self.blocked
    }

    /// Sorted, disjoint blocked `(start, end)` pairs of one machine.
    pub fn blocked_on(&self, machine: usize) -> &[(Time, Time)] {
        &self.by_machine[machine]
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn job(&self, id: JobId) -> Option<&Job> {
        self.jobs
            .binary_search_by_key(&id, |j| j.id)
            .ok()
            .map(|i| &self.jobs[i])
    }

    /// Sorted distinct processing times.
    pub fn distinct_sizes(&self) -> Vec<Time> {
        let set: BTreeSet<Time> = self.jobs.iter().map(|j| j.p).collect();
        set.into_iter().collect()
    }

    /// `c`, the number of distinct processing times.
    pub fn distinct_size_count(&self) -> usize {
        self.distinct_sizes().len()
    }

    pub fn release_times(&self) -> BTreeSet<Time> {
        self.jobs.iter().map(|j| j.r).collect()
    }

    pub fn deadlines(&self) -> BTreeSet<Time> {
        self.jobs.iter().map(|j| j.d).collect()
    }

    /// Same machines and blocked intervals, different job set.
    pub fn with_jobs(&self, jobs: Vec<Job>) -> Result<Self, InstanceError> {
        Self::new(jobs, self.machines, self.blocked.clone())
    }

    /// Instance without the given jobs.
    pub fn without(&self, ids: &BTreeSet<JobId>) -> Self {
        let jobs = self
            .jobs
            .iter()
            .filter(|j| !ids.contains(&j.id))
            .copied()
            .collect();
        self.with_jobs(jobs).expect("subset of a valid instance is valid")
    }

    /// Earliest `s >= from` such that `[s, s + p)` avoids every blocked
    /// interval of `machine`.
    pub fn earliest_fit(&self, machine: usize, from: Time, p: Time) -> Time {
        earliest_fit(&self.by_machine[machine], from, p)
    }
}

/// Earliest `s >= from` with `[s, s + p)` disjoint from the sorted `blocks`.
pub fn earliest_fit(blocks: &[(Time, Time)], from: Time, p: Time) -> Time {
    let mut s = from;
    for &(bs, be) in blocks {
        if be <= s {
            continue;
        }
        if s + p <= bs {
            break;
        }
        s = s.max(be);
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub machine: usize,
    pub start: Time,
}

/// Sparse schedule: only assigned jobs are stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    assignments: BTreeMap<JobId, Assignment>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, job: JobId, machine: usize, start: Time) {
        self.assignments.insert(job, Assignment { machine, start });
    }

    pub fn remove(&mut self, job: JobId) -> Option<Assignment> {
        self.assignments.remove(&job)
    }

    pub fn get(&self, job: JobId) -> Option<Assignment> {
        self.assignments.get(&job).copied()
    }

    pub fn contains(&self, job: JobId) -> bool {
        self.assignments.contains_key(&job)
    }

    /// Throughput.
    pub fn value(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (JobId, Assignment)> + '_ {
        self.assignments.iter().map(|(&j, &a)| (j, a))
    }

    pub fn job_ids(&self) -> BTreeSet<JobId> {
        self.assignments.keys().copied().collect()
    }

    /// Merges `other` into `self`; later entries win on id clashes.
    pub fn extend(&mut self, other: &Schedule) {
        for (j, a) in other.iter() {
            self.assignments.insert(j, a);
        }
    }

    /// Assignments grouped per machine, each list sorted by start time.
    pub fn per_machine(&self, machines: usize) -> Vec<Vec<(Time, JobId)>> {
        let mut out = vec![Vec::new(); machines];
        for (j, a) in self.iter() {
            if a.machine < machines {
                out[a.machine].push((a.start, j));
            }
        }
        for l in &mut out {
            l.sort_unstable();
        }
        out
    }
}

impl FromIterator<(JobId, usize, Time)> for Schedule {
    fn from_iter<I: IntoIterator<Item = (JobId, usize, Time)>>(iter: I) -> Self {
        let mut s = Schedule::new();
        for (j, m, t) in iter {
            s.assign(j, m, t);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnknownJob(JobId),
    BadMachine { job: JobId, machine: usize },
    BeforeRelease { job: JobId, start: Time, release: Time },
    AfterDeadline { job: JobId, finish: Time, deadline: Time },
    Overlap { machine: usize, first: JobId, second: JobId },
    Blocked { job: JobId, machine: usize, block: (Time, Time) },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownJob(j) => write!(f, "unknown job {j}"),
            Violation::BadMachine { job, machine } => {
                write!(f, "job {job} on nonexistent machine {machine}")
            }
            Violation::BeforeRelease { job, start, release } => {
                write!(f, "job {job} starts at {start} before release {release}")
            }
            Violation::AfterDeadline { job, finish, deadline } => {
                write!(f, "job {job} finishes at {finish} after deadline {deadline}")
            }
            Violation::Overlap { machine, first, second } => {
                write!(f, "jobs {first} and {second} overlap on machine {machine}")
            }
            Violation::Blocked { job, machine, block } => write!(
                f,
                "job {job} overlaps blocked [{}, {}) on machine {machine}",
                block.0, block.1
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub throughput: usize,
}

/// Checks every schedule constraint against `inst`.
pub fn validate_schedule(inst: &Instance, sched: &Schedule) -> ValidationReport {
    let mut violations = Vec::new();
    let mut lanes: Vec<Vec<(Time, Time, JobId)>> = vec![Vec::new(); inst.machines()];
    for (id, a) in sched.iter() {
        let Some(job) = inst.job(id) else {
            violations.push(Violation::UnknownJob(id));
            continue;
        };
        if a.machine >= inst.machines() {
            violations.push(Violation::BadMachine { job: id, machine: a.machine });
            continue;
        }
        let finish = a.start + job.p;
        if a.start < job.r {
            violations.push(Violation::BeforeRelease { job: id, start: a.start, release: job.r });
        }
        if finish > job.d {
            violations.push(Violation::AfterDeadline { job: id, finish, deadline: job.d });
        }
        for &(bs, be) in inst.blocked_on(a.machine) {
            if a.start < be && bs < finish {
                violations.push(Violation::Blocked {
                    job: id,
                    machine: a.machine,
                    block: (bs, be),
                });
            }
        }
        lanes[a.machine].push((a.start, finish, id));
    }
    for (machine, lane) in lanes.iter_mut().enumerate() {
        lane.sort_unstable();
        for w in lane.windows(2) {
            if w[1].0 < w[0].1 {
                violations.push(Violation::Overlap {
                    machine,
                    first: w[0].2,
                    second: w[1].2,
                });
            }
        }
    }
    ValidationReport {
        feasible: violations.is_empty(),
        violations,
        throughput: sched.value(),
    }
}

/// Sorted, deduplicated candidate time points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlackSet {
    pub times: Vec<Time>,
    /// Set when the enumeration hit the cap; `times` is then truncated.
    pub overflow: bool,
}

impl SlackSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn contains(&self, t: Time) -> bool {
        self.times.binary_search(&t).is_ok()
    }

    /// Points in `[lo, hi]`.
    pub fn range(&self, lo: Time, hi: Time) -> &[Time] {
        if lo > hi {
            return &[];
        }
        let a = self.times.partition_point(|&t| t < lo);
        let b = self.times.partition_point(|&t| t <= hi);
        &self.times[a..b]
    }
}

/// Every `r_i + sum(P')` not exceeding `T`, where `P'` ranges over
/// multisets of job sizes bounded by how often each size occurs.
pub fn slack_times(inst: &Instance, cap: usize) -> SlackSet {
    let bases: BTreeSet<Time> = inst.release_times();
    offsets_from(inst, &bases, cap)
}

/// Slack points seeded from both release times and block ends. Every start
/// time of a left-shifted schedule is one of these.
pub fn start_candidates(inst: &Instance, cap: usize) -> SlackSet {
    let mut bases = inst.release_times();
    bases.extend(inst.blocked().iter().map(|b| b.end));
    offsets_from(inst, &bases, cap)
}

fn offsets_from(inst: &Instance, bases: &BTreeSet<Time>, cap: usize) -> SlackSet {
    assert!(cap > 0, "slack cap must be positive");
    let horizon = inst.horizon();
    let Some(&lowest) = bases.iter().next() else {
        return SlackSet { times: Vec::new(), overflow: false };
    };
    let limit = horizon - lowest;

    let mut counts: BTreeMap<Time, usize> = BTreeMap::new();
    for j in inst.jobs() {
        *counts.entry(j.p).or_default() += 1;
    }
    // Subset sums over count vectors (k_1, ..., k_c), clipped at the horizon.
    let mut sums: BTreeSet<Time> = BTreeSet::from([0]);
    let mut overflow = false;
    'sizes: for (&p, &n) in &counts {
        let mut next = sums.clone();
        for &s in &sums {
            for k in 1..=n as Time {
                let v = s + k * p;
                if v > limit {
                    break;
                }
                next.insert(v);
                if next.len() > cap {
                    overflow = true;
                    sums = next;
                    break 'sizes;
                }
            }
        }
        sums = next;
    }

    let mut times = BTreeSet::new();
    'outer: for &b in bases {
        for &s in &sums {
            let t = b + s;
            if t > horizon {
                break;
            }
            times.insert(t);
            if times.len() > cap {
                overflow = true;
                break 'outer;
            }
        }
    }
    let mut times: Vec<Time> = times.into_iter().collect();
    if times.len() > cap {
        times.truncate(cap);
        overflow = true;
    }
    SlackSet { times, overflow }
}

/// Moves every job as early as possible while keeping its machine and the
/// relative order on that machine.
///
/// Afterwards every start equals the job's release time, the finish of the
/// previous job on the machine, or the end of a blocked interval.
pub fn left_shift(inst: &Instance, sched: &Schedule) -> Result<Schedule, InstanceError> {
    let report = validate_schedule(inst, sched);
    if !report.feasible {
        return Err(InstanceError::InfeasibleSchedule(
            report.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ));
    }
    let mut out = Schedule::new();
    for (machine, lane) in sched.per_machine(inst.machines()).into_iter().enumerate() {
        let mut free = 0;
        for (_, id) in lane {
            let job = inst.job(id).expect("validated");
            let start = inst.earliest_fit(machine, free.max(job.r), job.p);
            out.assign(id, machine, start);
            free = start + job.p;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobDoc {
    id: i64,
    p: i64,
    r: i64,
    d: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    machine: i64,
    start: i64,
    end: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    m: i64,
    #[serde(default)]
    blocked: Vec<BlockDoc>,
    jobs: Vec<JobDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignmentDoc {
    job: i64,
    machine: i64,
    start: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDoc {
    assignments: Vec<AssignmentDoc>,
}

/// Result of loading an instance document.
#[derive(Clone, Debug)]
pub struct LoadedInstance {
    pub instance: Instance,
    /// Jobs dropped because `r + p > d`.
    pub excluded: Vec<JobId>,
}

fn non_negative(v: i64, what: &str) -> Result<i64, InstanceError> {
    if v < 0 {
        Err(InstanceError::Schema(format!("negative {what}: {v}")))
    } else {
        Ok(v)
    }
}

fn job_id(v: i64) -> Result<JobId, InstanceError> {
    JobId::try_from(v).map_err(|_| InstanceError::Schema(format!("job id out of range: {v}")))
}

pub fn load_instance<R: Read>(reader: R) -> Result<LoadedInstance, InstanceError> {
    let doc: InstanceDoc = serde_json::from_reader(reader)?;
    if doc.m <= 0 {
        return Err(InstanceError::Schema(format!("m must be positive, got {}", doc.m)));
    }
    let mut jobs = Vec::with_capacity(doc.jobs.len());
    let mut excluded = Vec::new();
    for j in &doc.jobs {
        let id = job_id(non_negative(j.id, "job id")?)?;
        let p = non_negative(j.p, "processing time")?;
        let r = non_negative(j.r, "release time")?;
        let d = non_negative(j.d, "deadline")?;
        let job = Job::new(id, p, r, d);
        if p > 0 && !job.fits_window() {
            log::warn!("job {id} excluded: r + p > d ({r} + {p} > {d})");
            excluded.push(id);
            continue;
        }
        jobs.push(job);
    }
    let blocked = doc
        .blocked
        .iter()
        .map(|b| {
            Ok(BlockedInterval::new(
                non_negative(b.machine, "machine index")? as usize,
                non_negative(b.start, "block start")?,
                non_negative(b.end, "block end")?,
            ))
        })
        .collect::<Result<Vec<_>, InstanceError>>()?;
    let instance = Instance::new(jobs, doc.m as usize, blocked)?;
    Ok(LoadedInstance { instance, excluded })
}

pub fn parse_instance(text: &str) -> Result<LoadedInstance, InstanceError> {
    load_instance(text.as_bytes())
}

pub fn instance_to_json(inst: &Instance) -> String {
    let doc = InstanceDoc {
        m: inst.machines() as i64,
        blocked: inst
            .blocked()
            .iter()
            .map(|b| BlockDoc { machine: b.machine as i64, start: b.start, end: b.end })
            .collect(),
        jobs: inst
            .jobs()
            .iter()
            .map(|j| JobDoc { id: j.id as i64, p: j.p, r: j.r, d: j.d })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("instance serializes")
}

pub fn write_instance<W: Write>(inst: &Instance, mut w: W) -> Result<(), InstanceError> {
    w.write_all(instance_to_json(inst).as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn load_schedule<R: Read>(reader: R) -> Result<Schedule, InstanceError> {
    let doc: ScheduleDoc = serde_json::from_reader(reader)?;
    let mut sched = Schedule::new();
    for a in doc.assignments {
        let id = job_id(non_negative(a.job, "job id")?)?;
        let machine = non_negative(a.machine, "machine index")? as usize;
        let start = non_negative(a.start, "start time")?;
        if sched.contains(id) {
            return Err(InstanceError::Schema(format!("job {id} assigned twice")));
        }
        sched.assign(id, machine, start);
    }
    Ok(sched)
}

pub fn parse_schedule(text: &str) -> Result<Schedule, InstanceError> {
    load_schedule(text.as_bytes())
}

pub fn schedule_to_json(sched: &Schedule) -> String {
    let doc = ScheduleDoc {
        assignments: sched
            .iter()
            .map(|(j, a)| AssignmentDoc {
                job: j as i64,
                machine: a.machine as i64,
                start: a.start,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("schedule serializes")
}

pub fn write_schedule<W: Write>(sched: &Schedule, mut w: W) -> Result<(), InstanceError> {
    w.write_all(schedule_to_json(sched).as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Groups job ids by processing time.
pub fn jobs_by_size(jobs: &[Job]) -> HashMap<Time, Vec<JobId>> {
    let mut out: HashMap<Time, Vec<JobId>> = HashMap::new();
    for j in jobs {
        out.entry(j.p).or_default().push(j.id);
    }
    out
}
