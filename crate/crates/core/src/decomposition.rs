//! Randomized hierarchical partition of the horizon and the transformations
//! built on it.
//!
//! Level `i` has nominal interval length `ell_i = T / q^(i+1)` and boundaries
//! at every point congruent to the offset `r0` modulo `ell_j` for some
//! `j <= i`, plus `0` and `T`. Taking the union over coarser levels keeps
//! the levels nested when `T` is not a power of `q`. Boundaries are computed
//! arithmetically, so fine levels are never materialized in full.
//!
//! On top of the geometric levels sits a materialized tree used by the
//! dynamic program: an interval is split into its next-level pieces only
//! while it still contains enough distinct release times and deadlines.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::instance::{Instance, JobId, Schedule, Time};

/// Default refinement threshold: `4 * (R + D)` with three distinct release
/// times and three deadlines per base case.
pub const DEFAULT_STOP_RULE: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("branching factor must be at least 2, got {0}")]
    Branching(i64),
    #[error("horizon must be positive, got {0}")]
    Horizon(Time),
    #[error("offset {r0} outside [0, {max}]")]
    Offset { r0: Time, max: Time },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    /// `-1` for the root, which spans the whole horizon.
    pub level: i32,
    pub start: Time,
    pub end: Time,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn len(&self) -> Time {
        self.end - self.start
    }

    pub fn contains_span(&self, r: Time, d: Time) -> bool {
        self.start <= r && d <= self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HierarchicalPartition {
    horizon: Time,
    q: i64,
    r0: Time,
    k: usize,
    stop_rule: usize,
    nodes: Vec<TreeNode>,
}

#[derive(Serialize)]
struct PartitionDump<'a> {
    q: i64,
    r0: Time,
    levels: &'a [Vec<Time>],
}

/// `q^e` as i128, saturating.
fn qpow(q: i64, e: usize) -> i128 {
    let mut v: i128 = 1;
    for _ in 0..e {
        v = v.saturating_mul(q as i128);
        if v > i64::MAX as i128 {
            return i128::MAX / 4;
        }
    }
    v
}

/// Builds the partition for horizon `T` and offset `r0`, refining the tree
/// wherever a node holds at least `stop_rule` of the given `points`.
pub fn build_partition(
    horizon: Time,
    q: i64,
    r0: Time,
    stop_rule: usize,
    points: &BTreeSet<Time>,
) -> Result<HierarchicalPartition, PartitionError> {
    if q < 2 {
        return Err(PartitionError::Branching(q));
    }
    if horizon < 1 {
        return Err(PartitionError::Horizon(horizon));
    }
    let max = horizon / q;
    if r0 < 0 || r0 > max {
        return Err(PartitionError::Offset { r0, max });
    }
    let mut k = 0;
    while qpow(q, k) < horizon as i128 {
        k += 1;
    }
    let mut part = HierarchicalPartition {
        horizon,
        q,
        r0,
        k,
        stop_rule,
        nodes: vec![TreeNode { level: -1, start: 0, end: horizon, parent: None, children: vec![] }],
    };
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        let node = part.nodes[id].clone();
        if !part.should_refine(&node, points) {
            continue;
        }
        let child_level = (node.level + 1) as usize;
        let cuts = part.boundaries(child_level, node.start, node.end);
        let mut kids = Vec::with_capacity(cuts.len().saturating_sub(1));
        for w in cuts.windows(2) {
            kids.push(part.nodes.len());
            part.nodes.push(TreeNode {
                level: child_level as i32,
                start: w[0],
                end: w[1],
                parent: Some(id),
                children: vec![],
            });
        }
        stack.extend(kids.iter().rev());
        part.nodes[id].children = kids;
    }
    Ok(part)
}

impl HierarchicalPartition {
    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn r0(&self) -> Time {
        self.r0
    }

    /// Deepest geometric level, `ceil(log_q T)`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn stop_rule(&self) -> usize {
        self.stop_rule
    }

    /// Integer interval length at level `i`, floored at 1.
    pub fn ell(&self, i: usize) -> Time {
        let d = qpow(self.q, i + 1);
        ((self.horizon as i128 / d) as Time).max(1)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    fn should_refine(&self, node: &TreeNode, points: &BTreeSet<Time>) -> bool {
        if node.level < 0 {
            return true;
        }
        let l = node.level as usize;
        if l >= self.k || self.ell(l + 1) >= self.ell(l) {
            return false;
        }
        self.stop_rule == 0 || points.range(node.start..=node.end).count() >= self.stop_rule
    }

    fn level_clip(&self, level: usize) -> usize {
        level.min(self.k)
    }

    pub fn is_boundary(&self, level: usize, x: Time) -> bool {
        if x == 0 || x == self.horizon {
            return true;
        }
        if x < 0 || x > self.horizon {
            return false;
        }
        (0..=self.level_clip(level)).any(|j| (x - self.r0).rem_euclid(self.ell(j)) == 0)
    }

    /// Smallest level boundary strictly greater than `x`.
    pub fn next_boundary(&self, level: usize, x: Time) -> Option<Time> {
        if x >= self.horizon {
            return None;
        }
        let mut best = self.horizon;
        if x < 0 {
            return Some(0);
        }
        for j in 0..=self.level_clip(level) {
            let ell = self.ell(j);
            let base = self.r0.rem_euclid(ell);
            let g = base + ell * (x + ell - base).div_euclid(ell);
            if g > x && g < best {
                best = g;
            }
        }
        Some(best)
    }

    /// Largest level boundary strictly smaller than `x`.
    pub fn prev_boundary(&self, level: usize, x: Time) -> Option<Time> {
        if x <= 0 {
            return None;
        }
        if x > self.horizon {
            return Some(self.horizon);
        }
        let mut best = 0;
        for j in 0..=self.level_clip(level) {
            let ell = self.ell(j);
            let base = self.r0.rem_euclid(ell);
            let g = base + ell * (x - 1 - base).div_euclid(ell);
            if g > best && g < x {
                best = g;
            }
        }
        Some(best)
    }

    /// Level boundaries inside the closed range `[lo, hi]`.
    pub fn boundaries(&self, level: usize, lo: Time, hi: Time) -> Vec<Time> {
        let mut out = Vec::new();
        let mut x = if self.is_boundary(level, lo) { Some(lo) } else { self.next_boundary(level, lo) };
        while let Some(b) = x {
            if b > hi {
                break;
            }
            out.push(b);
            x = self.next_boundary(level, b);
        }
        out
    }

    /// All boundaries of geometric level `i` over `[0, T]`.
    pub fn grid(&self, level: usize) -> Vec<Time> {
        self.boundaries(level, 0, self.horizon)
    }

    /// The level interval `[a, b]` that contains `x` with `a <= x < b`.
    pub fn interval_at(&self, level: usize, x: Time) -> (Time, Time) {
        let a = if self.is_boundary(level, x) { x } else { self.prev_boundary(level, x).unwrap_or(0) };
        let b = self.next_boundary(level, x).unwrap_or(self.horizon);
        (a, b)
    }

    /// True when some level boundary lies strictly inside `(lo, hi)`.
    pub fn crosses(&self, level: usize, lo: Time, hi: Time) -> bool {
        self.next_boundary(level, lo).is_some_and(|b| b < hi)
    }

    /// Boundaries of the tree frontier at each depth; a leaf stays in the
    /// frontier of every deeper level.
    pub fn levels(&self) -> Vec<Vec<Time>> {
        let depth = self.nodes.iter().map(|n| n.level).max().unwrap_or(-1);
        (0..=depth)
            .map(|lvl| {
                let set: BTreeSet<Time> = self
                    .nodes
                    .iter()
                    .filter(|n| n.level == lvl || (n.level >= 0 && n.level < lvl && n.is_leaf()))
                    .flat_map(|n| [n.start, n.end])
                    .collect();
                set.into_iter().collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let levels = self.levels();
        serde_json::to_string_pretty(&PartitionDump { q: self.q, r0: self.r0, levels: &levels })
            .expect("partition serializes")
    }

    /// Class index from the exact comparison `|span| * q^(i+1) >= lambda * T`.
    pub fn span_class(&self, span: Time, lambda: i64) -> usize {
        let rhs = lambda as i128 * self.horizon as i128;
        (0..=self.k)
            .find(|&i| span as i128 * qpow(self.q, i + 1) >= rhs)
            .unwrap_or(self.k + 1)
    }

    /// Length class of a processing time: the `i` with
    /// `T/q^(i+1) <= p < T/q^i`, in exact arithmetic.
    pub fn size_class(&self, p: Time) -> usize {
        let t = self.horizon as i128;
        (0..).find(|&i| p as i128 * qpow(self.q, i + 1) >= t).expect("p >= 1")
    }

    /// Deepest tree node containing `[r, d]`.
    pub fn owner(&self, r: Time, d: Time) -> usize {
        let mut at = self.root();
        'down: loop {
            for &c in &self.nodes[at].children {
                if self.nodes[c].contains_span(r, d) {
                    at = c;
                    continue 'down;
                }
            }
            return at;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JobClass {
    pub class: usize,
    pub loose: bool,
    /// Level interval containing the release time (the head).
    pub head: (Time, Time),
    /// Level interval containing the deadline (the tail).
    pub tail: (Time, Time),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JobClassification {
    pub lambda: i64,
    pub jobs: BTreeMap<JobId, JobClass>,
}

impl JobClassification {
    pub fn get(&self, id: JobId) -> Option<&JobClass> {
        self.jobs.get(&id)
    }
}

pub fn classify_jobs(inst: &Instance, part: &HierarchicalPartition, lambda: i64) -> JobClassification {
    assert!(lambda >= 2, "lambda must be at least 2");
    let mut jobs = BTreeMap::new();
    for j in inst.jobs() {
        let class = part.span_class(j.span_len(), lambda);
        let level = class.min(part.k());
        let head = part.interval_at(level, j.r);
        let tail_start = part.prev_boundary(level, j.d).unwrap_or(0);
        let tail_end = if part.is_boundary(level, j.d) {
            j.d
        } else {
            part.next_boundary(level, j.d).unwrap_or(part.horizon())
        };
        jobs.insert(
            j.id,
            JobClass {
                class,
                loose: j.p * lambda <= j.span_len(),
                head,
                tail: (tail_start, tail_end),
            },
        );
    }
    JobClassification { lambda, jobs }
}

/// Jobs of class `i >= 2` whose span meets more than one level `i - 2`
/// interval.
pub fn find_span_crossing(
    inst: &Instance,
    part: &HierarchicalPartition,
    classes: &JobClassification,
) -> BTreeSet<JobId> {
    inst.jobs()
        .iter()
        .filter(|j| {
            let c = classes.get(j.id).expect("classified").class;
            c >= 2 && part.crosses(c - 2, j.r, j.d)
        })
        .map(|j| j.id)
        .collect()
}

/// Scheduled jobs with `ell_i <= p < ell_(i-1)` whose run meets more than
/// one level `i - 2` interval. Jobs with `p >= ell_0` are exempt.
pub fn find_position_crossing(
    inst: &Instance,
    sched: &Schedule,
    part: &HierarchicalPartition,
) -> BTreeSet<JobId> {
    sched
        .iter()
        .filter(|&(id, a)| {
            let Some(job) = inst.job(id) else { return false };
            let i = part.size_class(job.p);
            i >= 2 && part.crosses(i - 2, a.start, a.start + job.p)
        })
        .map(|(id, _)| id)
        .collect()
}

#[derive(Clone, Debug)]
pub struct CutResult {
    pub instance: Instance,
    /// Jobs whose trimmed span could no longer hold them.
    pub dropped: Vec<JobId>,
}

/// Trims the head and tail interval off every loose job of class `<= k`:
/// the release moves to the first boundary after it and the deadline to the
/// last boundary before it. Tight jobs and class `k + 1` jobs are unchanged.
pub fn cut_heads_tails(
    inst: &Instance,
    part: &HierarchicalPartition,
    classes: &JobClassification,
) -> CutResult {
    let mut jobs = Vec::with_capacity(inst.len());
    let mut dropped = Vec::new();
    for j in inst.jobs() {
        let c = classes.get(j.id).expect("classified");
        if !c.loose || c.class > part.k() {
            jobs.push(*j);
            continue;
        }
        let r = c.head.1;
        let d = c.tail.0;
        if r + j.p <= d {
            jobs.push(crate::instance::Job::new(j.id, j.p, r, d));
        } else {
            dropped.push(j.id);
        }
    }
    if !dropped.is_empty() {
        log::warn!("head/tail cutting dropped {} job(s) that no longer fit", dropped.len());
    }
    let instance = inst.with_jobs(jobs).expect("trimmed spans stay valid");
    CutResult { instance, dropped }
}
