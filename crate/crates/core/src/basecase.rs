//! Solver for instances with few distinct release times, deadlines and
//! blocked intervals.
//!
//! Release times, deadlines and block endpoints cut every machine into
//! windows. Jobs sharing a (release, deadline) pair form a type, and a
//! schedule that never runs a job across a cut point is described by how
//! much time each type gets in each window (an allotment). For a fixed
//! allotment the types are independent, and packing one type into its
//! allotments is a multiple-knapsack problem. The sweep enumerates
//! allotments type by type over the residual window capacities.
//!
//! Optima that must run a job across a cut point are caught by a separate
//! exhaustive search over schedules with few jobs.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::instance::{Instance, Job, JobId, Schedule, Time};
use crate::knapsack::{mk_exact, round_down_to_power, MkProblem};
use crate::oracle;

/// Largest job count the exhaustive small-schedule search goes up to.
pub const GUESS_CAP: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BasecaseError {
    #[error("{what}: {count} distinct values exceed the limit of {limit}; use the hierarchical solver")]
    TooManyPoints { what: &'static str, count: usize, limit: usize },
    #[error("allotment sweep exceeded {0} states")]
    StateBudget(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasecaseLimits {
    pub max_releases: usize,
    pub max_deadlines: usize,
    pub max_blocks: usize,
}

impl Default for BasecaseLimits {
    fn default() -> Self {
        Self { max_releases: 6, max_deadlines: 6, max_blocks: 6 }
    }
}

impl BasecaseLimits {
    pub fn unbounded() -> Self {
        Self { max_releases: usize::MAX, max_deadlines: usize::MAX, max_blocks: usize::MAX }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    Exact,
    Rounded,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasecaseParams {
    pub eps: f64,
    pub mode: SweepMode,
    pub limits: BasecaseLimits,
    /// Cap on allotment states (columns plus sweep layers).
    pub state_budget: usize,
    /// Cap on memo entries of the small-schedule search.
    pub guess_budget: usize,
}

impl Default for BasecaseParams {
    fn default() -> Self {
        Self {
            eps: 0.5,
            mode: SweepMode::Exact,
            limits: BasecaseLimits::default(),
            state_budget: 2_000_000,
            guess_budget: 2_000_000,
        }
    }
}

/// Adjusted release times and deadlines plus block endpoints, per machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StraddleSet {
    pub per_machine: Vec<Vec<Time>>,
}

impl StraddleSet {
    /// `|S''|`, summed over machines.
    pub fn len(&self) -> usize {
        self.per_machine.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Window {
    pub machine: usize,
    pub start: Time,
    pub end: Time,
}

impl Window {
    pub fn len(&self) -> Time {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when a job of this (release, deadline) type may use the window.
    pub fn admits(&self, r: Time, d: Time) -> bool {
        r <= self.start && self.end <= d
    }
}

/// Processing time budgeted per window (rows) and type (columns).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllotmentMatrix {
    pub windows: Vec<Window>,
    pub types: Vec<(Time, Time)>,
    pub a: Vec<Vec<Time>>,
}

impl AllotmentMatrix {
    pub fn is_valid(&self) -> bool {
        self.a.len() == self.windows.len()
            && self.windows.iter().zip(&self.a).all(|(w, row)| {
                row.len() == self.types.len()
                    && row.iter().all(|&x| x >= 0)
                    && row.iter().sum::<Time>() <= w.len()
                    && row
                        .iter()
                        .zip(&self.types)
                        .all(|(&x, &(r, d))| x == 0 || w.admits(r, d))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasecaseOutcome {
    pub schedule: Schedule,
    pub straddle_count: usize,
    /// The small-schedule search proved the result optimal.
    pub proven_optimal: bool,
    pub allotment: Option<AllotmentMatrix>,
}

fn inside(blocks: &[(Time, Time)], x: Time) -> Option<(Time, Time)> {
    blocks.iter().copied().find(|&(s, e)| s < x && x < e)
}

pub fn compute_straddle_and_windows(
    inst: &Instance,
    limits: BasecaseLimits,
) -> Result<(StraddleSet, Vec<Window>), BasecaseError> {
    let releases = inst.release_times();
    let deadlines = inst.deadlines();
    let checks = [
        ("release times", releases.len(), limits.max_releases),
        ("deadlines", deadlines.len(), limits.max_deadlines),
        ("blocked intervals", inst.blocked().len(), limits.max_blocks),
    ];
    for (what, count, limit) in checks {
        if count > limit {
            return Err(BasecaseError::TooManyPoints { what, count, limit });
        }
    }
    let mut per_machine = Vec::with_capacity(inst.machines());
    let mut windows = Vec::new();
    for m in 0..inst.machines() {
        let blocks = inst.blocked_on(m);
        let mut pts: Vec<Time> = Vec::new();
        for &r in &releases {
            pts.push(inside(blocks, r).map_or(r, |(_, e)| e));
        }
        for &d in &deadlines {
            pts.push(inside(blocks, d).map_or(d, |(s, _)| s));
        }
        for &(s, e) in blocks {
            pts.push(s);
            pts.push(e);
        }
        pts.sort_unstable();
        pts.dedup();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !blocks.iter().any(|&(s, e)| s <= a && b <= e) {
                windows.push(Window { machine: m, start: a, end: b });
            }
        }
        per_machine.push(pts);
    }
    Ok((StraddleSet { per_machine }, windows))
}

/// Best schedule with at most [`GUESS_CAP`] jobs, found exhaustively.
/// Returns the schedule and whether it is provably optimal overall.
pub fn small_opt(inst: &Instance, budget: usize) -> Option<(Schedule, bool)> {
    let cap = GUESS_CAP.min(inst.len());
    let s = oracle::best_capped(inst, cap, budget)?;
    let proven = s.value() < cap || s.value() == inst.len();
    Some((s, proven))
}

pub fn solve_basecase(inst: &Instance, params: &BasecaseParams) -> Result<BasecaseOutcome, BasecaseError> {
    let (straddle, windows) = compute_straddle_and_windows(inst, params.limits)?;
    let straddle_count = straddle.len();
    if inst.is_empty() {
        return Ok(BasecaseOutcome {
            schedule: Schedule::new(),
            straddle_count,
            proven_optimal: true,
            allotment: None,
        });
    }
    let guessed = small_opt(inst, params.guess_budget);
    if let Some((s, true)) = &guessed {
        return Ok(BasecaseOutcome {
            schedule: s.clone(),
            straddle_count,
            proven_optimal: true,
            allotment: None,
        });
    }
    let (swept, allotment) = sweep_windows(inst, &windows, params)?;
    let mut out = BasecaseOutcome {
        schedule: swept,
        straddle_count,
        proven_optimal: false,
        allotment: Some(allotment),
    };
    if let Some((s, _)) = guessed {
        if s.value() > out.schedule.value() {
            out.schedule = s;
            out.allotment = None;
        }
    }
    Ok(out)
}

/// Best schedule that keeps every job inside a single window.
pub fn sweep(inst: &Instance, params: &BasecaseParams) -> Result<(Schedule, AllotmentMatrix), BasecaseError> {
    let (_, windows) = compute_straddle_and_windows(inst, params.limits)?;
    sweep_windows(inst, &windows, params)
}

struct TypeColumns {
    key: (Time, Time),
    jobs: Vec<Job>,
    /// Indices into the global window list.
    eligible: Vec<usize>,
    /// Candidate allotments over `eligible`, with their knapsack value.
    columns: Vec<(Vec<Time>, usize)>,
}

fn sweep_windows(
    inst: &Instance,
    windows: &[Window],
    params: &BasecaseParams,
) -> Result<(Schedule, AllotmentMatrix), BasecaseError> {
    let mut by_type: BTreeMap<(Time, Time), Vec<Job>> = BTreeMap::new();
    for j in inst.jobs() {
        by_type.entry((j.r, j.d)).or_default().push(*j);
    }
    let mut budget = params.state_budget;
    let mut types = Vec::with_capacity(by_type.len());
    for (key, mut jobs) in by_type {
        jobs.sort_by_key(|j| (std::cmp::Reverse(j.p), j.id));
        let eligible: Vec<usize> = (0..windows.len())
            .filter(|&w| windows[w].admits(key.0, key.1))
            .collect();
        let lens: Vec<Time> = eligible.iter().map(|&w| windows[w].len()).collect();
        let sizes: Vec<Time> = jobs.iter().map(|j| j.p).collect();
        let mut loads = reachable_loads(&sizes, &lens, &mut budget)?;
        if params.mode == SweepMode::Rounded {
            loads = round_columns(loads, &sizes, params.eps);
        }
        let mut columns = Vec::with_capacity(loads.len());
        for col in loads {
            let count = mk_exact(&MkProblem::new(sizes.clone(), col.clone()))
                .map_err(|_| BasecaseError::StateBudget(params.state_budget))?
                .count;
            columns.push((col, count));
        }
        types.push(TypeColumns { key, jobs, eligible, columns });
    }

    // Sweep over types on the residual capacity of every window.
    struct Cell {
        value: usize,
        parent: usize,
        column: usize,
    }
    let start: Vec<Time> = windows.iter().map(Window::len).collect();
    let mut layers: Vec<(Vec<Vec<Time>>, Vec<Cell>)> =
        vec![(vec![start], vec![Cell { value: 0, parent: 0, column: usize::MAX }])];
    for t in &types {
        let (prev_states, prev_cells) = layers.last().expect("seeded");
        let mut states: Vec<Vec<Time>> = Vec::new();
        let mut cells: Vec<Cell> = Vec::new();
        let mut index: HashMap<Vec<Time>, usize> = HashMap::new();
        for (pi, residual) in prev_states.iter().enumerate() {
            for (ci, (col, count)) in t.columns.iter().enumerate() {
                if col.iter().zip(&t.eligible).any(|(&x, &w)| x > residual[w]) {
                    continue;
                }
                let mut next = residual.clone();
                for (&x, &w) in col.iter().zip(&t.eligible) {
                    next[w] -= x;
                }
                let value = prev_cells[pi].value + count;
                match index.get(&next) {
                    Some(&at) if cells[at].value >= value => {}
                    Some(&at) => cells[at] = Cell { value, parent: pi, column: ci },
                    None => {
                        if budget == 0 {
                            return Err(BasecaseError::StateBudget(params.state_budget));
                        }
                        budget -= 1;
                        index.insert(next.clone(), states.len());
                        states.push(next);
                        cells.push(Cell { value, parent: pi, column: ci });
                    }
                }
            }
        }
        layers.push((states, cells));
    }

    let (_, last) = layers.last().expect("seeded");
    let mut at = 0;
    for (i, c) in last.iter().enumerate() {
        if c.value > last[at].value {
            at = i;
        }
    }
    let mut chosen = vec![0usize; types.len()];
    for depth in (1..layers.len()).rev() {
        let c = &layers[depth].1[at];
        chosen[depth - 1] = c.column;
        at = c.parent;
    }

    let mut matrix = AllotmentMatrix {
        windows: windows.to_vec(),
        types: types.iter().map(|t| t.key).collect(),
        a: vec![vec![0; types.len()]; windows.len()],
    };
    let mut per_window: Vec<Vec<Job>> = vec![Vec::new(); windows.len()];
    for (ti, t) in types.iter().enumerate() {
        let (col, _) = &t.columns[chosen[ti]];
        for (&x, &w) in col.iter().zip(&t.eligible) {
            matrix.a[w][ti] = x;
        }
        let sizes: Vec<Time> = t.jobs.iter().map(|j| j.p).collect();
        let sol = mk_exact(&MkProblem::new(sizes, col.clone()))
            .map_err(|_| BasecaseError::StateBudget(params.state_budget))?;
        for (i, k) in sol.assignment.iter().enumerate() {
            if let Some(k) = *k {
                per_window[t.eligible[k]].push(t.jobs[i]);
            }
        }
    }
    debug_assert!(matrix.is_valid());

    let mut sched = Schedule::new();
    for (w, jobs) in per_window.iter_mut().enumerate() {
        jobs.sort_by_key(|j| (j.d, j.r, j.id));
        let mut t = windows[w].start;
        for j in jobs.iter() {
            sched.assign(j.id, windows[w].machine, t);
            t += j.p;
        }
    }
    Ok((sched, matrix))
}

/// Load vectors reachable by assigning a subset of `sizes` to windows of the
/// given lengths.
fn reachable_loads(sizes: &[Time], lens: &[Time], budget: &mut usize) -> Result<Vec<Vec<Time>>, BasecaseError> {
    let start = vec![0; lens.len()];
    let mut seen: HashSet<Vec<Time>> = HashSet::from([start.clone()]);
    let mut frontier = vec![start];
    for &p in sizes {
        let mut next = Vec::new();
        for v in &frontier {
            for k in 0..lens.len() {
                if v[k] + p > lens[k] {
                    continue;
                }
                let mut w = v.clone();
                w[k] += p;
                if seen.insert(w.clone()) {
                    if *budget == 0 {
                        return Err(BasecaseError::StateBudget(0));
                    }
                    *budget -= 1;
                    next.push(w);
                }
            }
        }
        frontier.extend(next);
    }
    let mut all: Vec<Vec<Time>> = seen.into_iter().collect();
    all.sort();
    Ok(all)
}

/// Rounds every allotment that could hold `ceil(1/eps^2)` or more jobs down
/// to a power of `1 + eps`.
fn round_columns(cols: Vec<Vec<Time>>, sizes: &[Time], eps: f64) -> Vec<Vec<Time>> {
    let crowded = ((1.0 / (eps * eps)) - 1e-9).ceil() as usize;
    let mut asc = sizes.to_vec();
    asc.sort_unstable();
    let fits = |cap: Time| {
        let mut left = cap;
        asc.iter().take_while(|&&p| {
            let ok = p <= left;
            left -= p.min(left);
            ok
        })
        .count()
    };
    let mut out: Vec<Vec<Time>> = cols
        .into_iter()
        .map(|c| {
            c.into_iter()
                .map(|x| if fits(x) >= crowded { round_down_to_power(x, eps) } else { x })
                .collect()
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Ids of jobs that a schedule runs across one of the machine's cut points.
pub fn straddling_jobs(inst: &Instance, sched: &Schedule, straddle: &StraddleSet) -> Vec<JobId> {
    sched
        .iter()
        .filter(|&(id, a)| {
            let p = inst.job(id).map_or(0, |j| j.p);
            straddle.per_machine[a.machine]
                .iter()
                .any(|&x| a.start < x && x < a.start + p)
        })
        .map(|(id, _)| id)
        .collect()
}
