//! The dynamic program over the decomposition tree.
//!
//! Every job belongs to the deepest tree node whose interval contains its
//! span. A node state is `(node, v, u)`: `v` is the time inside the node
//! already taken by jobs placed higher up, `u` counts jobs pushed down from
//! above, per size, that must run inside the node itself or inside one of
//! its children.
//!
//! An inner node sweeps over its children left to right. In each child it
//! may start some of its large or tight jobs (placed at candidate start
//! times), and it may push small loose jobs further down into a grandchild
//! that lies inside their span. The children are then solved recursively
//! with the resulting `v` and `u`. Leaves hand their jobs to the base-case
//! solver.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::rc::Rc;

use crate::basecase::{small_opt, solve_basecase, BasecaseLimits, BasecaseParams, SweepMode};
use crate::decomposition::HierarchicalPartition;
use crate::error::SolveError;
use crate::greedy::greedy_shortest_first;
use crate::instance::{BlockedInterval, Instance, Job, JobId, Schedule, Time};

use super::key::{canonicalize_key, clip, is_free, Blocks, CountEntry, DpKey};
use super::DpCaps;

/// Ids from here up stand for pushed-down jobs inside a leaf instance.
const ANON_BASE: JobId = 1 << 31;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DpStats {
    pub nodes_evaluated: usize,
    pub leaf_calls: usize,
    pub truncated: bool,
    pub budget_exhausted: bool,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct DpConfig {
    pub lambda: i64,
    pub eps: f64,
    /// Allow pushing small loose jobs down. Off, every job is placed at
    /// its owner.
    pub push_down: bool,
    pub caps: DpCaps,
    pub basecase_budget: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Place,
    Push,
}

#[derive(Clone, Debug)]
struct Class {
    p: Time,
    r: Time,
    d: Time,
    count: u32,
    kind: Kind,
    sigma: u32,
    /// Concrete ids, empty for pushed-down jobs.
    ids: Vec<JobId>,
    /// Earliest-deadline order among equal sizes.
    order: (Time, JobId),
    /// Push targets: (child position, grandchild position or the child).
    targets: Vec<(usize, Option<usize>)>,
}

#[derive(Clone, Copy, Debug)]
enum LocalRef {
    Job(JobId),
    Pushed(u32),
}

type Placement = (usize, usize, Time);
type Push = (usize, usize, Option<usize>, u32);

#[derive(Clone, Debug)]
struct Step {
    placements: Vec<Placement>,
    pushes: Vec<Push>,
    child_key: DpKey,
}

#[derive(Debug)]
enum Choice {
    Empty,
    Leaf(Vec<(LocalRef, usize, Time)>),
    Inner(Vec<Step>),
}

#[derive(Debug)]
struct Entry {
    value: usize,
    choice: Choice,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct SweepKey {
    ci: usize,
    counts: Vec<u32>,
    busy: Vec<Time>,
    placed: usize,
}

type SweepMemo = HashMap<SweepKey, (usize, Option<(Step, SweepKey)>)>;

pub(crate) struct Engine<'a> {
    inst: &'a Instance,
    part: &'a HierarchicalPartition,
    cfg: DpConfig,
    sizes: Vec<Time>,
    cands: Vec<Time>,
    owned: Vec<Vec<Job>>,
    memo: HashMap<DpKey, Rc<Entry>>,
    work: usize,
    pub stats: DpStats,
}

impl<'a> Engine<'a> {
    pub fn new(
        inst: &'a Instance,
        part: &'a HierarchicalPartition,
        cfg: DpConfig,
        cands: Vec<Time>,
    ) -> Self {
        let mut owned = vec![Vec::new(); part.nodes().len()];
        for j in inst.jobs() {
            owned[part.owner(j.r, j.d)].push(*j);
        }
        Self {
            inst,
            part,
            cfg,
            sizes: inst.distinct_sizes(),
            cands,
            owned,
            memo: HashMap::new(),
            work: 0,
            stats: DpStats::default(),
        }
    }

    /// Runs the program from the root; returns its value and schedule.
    pub fn solve(&mut self) -> Result<(usize, Schedule), SolveError> {
        let v: Vec<Blocks> = (0..self.inst.machines())
            .map(|m| self.inst.blocked_on(m).to_vec())
            .collect();
        let key = canonicalize_key(self.part.root(), v, vec![]).map_err(internal)?;
        let entry = self.eval(&key)?;
        let mut sched = Schedule::new();
        self.rebuild(&key, HashMap::new(), &mut sched);
        debug_assert_eq!(sched.value(), entry.value);
        Ok((entry.value, sched))
    }

    fn eval(&mut self, key: &DpKey) -> Result<Rc<Entry>, SolveError> {
        if let Some(e) = self.memo.get(key) {
            return Ok(Rc::clone(e));
        }
        if let Some(cap) = self.cfg.caps.table_cap {
            if self.memo.len() >= cap {
                return Err(SolveError::Budget(format!(
                    "DP table reached {cap} entries; try a smaller instance or a larger eps"
                )));
            }
        }
        let nodes_spent = self.cfg.caps.node_budget.is_some_and(|cap| self.stats.nodes_evaluated >= cap);
        if nodes_spent || self.out_of_work() {
            self.stats.truncated = true;
            self.stats.budget_exhausted = true;
            return Ok(Rc::new(Entry { value: 0, choice: Choice::Empty }));
        }
        self.stats.nodes_evaluated += 1;
        let entry = if self.part.node(key.node).is_leaf() {
            self.eval_leaf(key)
        } else {
            self.eval_inner(key)?
        };
        let entry = Rc::new(entry);
        self.memo.insert(key.clone(), Rc::clone(&entry));
        Ok(entry)
    }

    fn out_of_work(&self) -> bool {
        self.cfg.caps.work_budget.is_some_and(|cap| self.work >= cap)
    }

    fn eval_leaf(&mut self, key: &DpKey) -> Entry {
        let node = self.part.node(key.node);
        let mut jobs: Vec<Job> = self.owned[key.node].clone();
        let mut pushed: HashMap<JobId, u32> = HashMap::new();
        let mut next = ANON_BASE;
        for &(slot, sigma, n) in &key.u {
            debug_assert_eq!(slot, 0, "leaves have no children");
            for _ in 0..n {
                jobs.push(Job::new(next, self.sizes[sigma as usize], node.start, node.end));
                pushed.insert(next, sigma);
                next += 1;
            }
        }
        jobs.retain(|j| j.fits_window());
        if jobs.is_empty() {
            return Entry { value: 0, choice: Choice::Leaf(vec![]) };
        }
        self.stats.leaf_calls += 1;
        let blocks: Vec<BlockedInterval> = key
            .v
            .iter()
            .enumerate()
            .flat_map(|(m, pairs)| pairs.iter().map(move |&(s, e)| BlockedInterval::new(m, s, e)))
            .collect();
        let local = Instance::new(jobs, self.inst.machines(), blocks)
            .expect("leaf instances inherit valid spans and disjoint blocks");
        let sched = self.leaf_schedule(&local);
        let placements = sched
            .iter()
            .map(|(id, a)| {
                let r = match pushed.get(&id) {
                    Some(&sigma) => LocalRef::Pushed(sigma),
                    None => LocalRef::Job(id),
                };
                (r, a.machine, a.start)
            })
            .collect::<Vec<_>>();
        Entry { value: placements.len(), choice: Choice::Leaf(placements) }
    }

    fn leaf_schedule(&mut self, local: &Instance) -> Schedule {
        let mut params = BasecaseParams {
            eps: self.cfg.eps,
            mode: SweepMode::Exact,
            limits: BasecaseLimits::unbounded(),
            state_budget: self.cfg.basecase_budget,
            guess_budget: self.cfg.basecase_budget,
        };
        if let Ok(out) = solve_basecase(local, &params) {
            return out.schedule;
        }
        params.mode = SweepMode::Rounded;
        self.stats.truncated = true;
        if let Ok(out) = solve_basecase(local, &params) {
            return out.schedule;
        }
        log::debug!("leaf with {} jobs fell back to the small search", local.len());
        match small_opt(local, self.cfg.basecase_budget) {
            Some((s, _)) => s,
            None => greedy_shortest_first(local),
        }
    }

    fn classes(&self, key: &DpKey) -> Vec<Class> {
        let node = self.part.node(key.node);
        let theta = self.part.ell((node.level + 3) as usize);
        let mut groups: BTreeMap<(Time, Time, Time), Vec<JobId>> = BTreeMap::new();
        for j in &self.owned[key.node] {
            groups.entry((j.p, j.r, j.d)).or_default().push(j.id);
        }
        let sigma_of = |p: Time| self.sizes.binary_search(&p).expect("known size") as u32;
        let mut out: Vec<Class> = groups
            .into_iter()
            .map(|((p, r, d), ids)| Class {
                p,
                r,
                d,
                count: ids.len() as u32,
                kind: Kind::Place,
                sigma: sigma_of(p),
                order: (d, ids[0]),
                ids,
                targets: vec![],
            })
            .collect();
        for &(slot, sigma, n) in &key.u {
            if slot != 0 {
                continue;
            }
            out.push(Class {
                p: self.sizes[sigma as usize],
                r: node.start,
                d: node.end,
                count: n,
                kind: Kind::Place,
                sigma,
                ids: vec![],
                order: (node.end, ANON_BASE + sigma),
                targets: vec![],
            });
        }
        for c in &mut out {
            c.targets = self.push_targets(key.node, c.p, c.r, c.d);
            let small = c.p < theta && c.p * self.cfg.lambda <= c.d - c.r;
            if self.cfg.push_down && small && !c.targets.is_empty() {
                c.kind = Kind::Push;
            }
        }
        out
    }

    /// Leaf children and grandchildren inside `[r, d]` that can hold `p`.
    fn push_targets(&self, node: usize, p: Time, r: Time, d: Time) -> Vec<(usize, Option<usize>)> {
        let mut out = Vec::new();
        for (ci, &c) in self.part.node(node).children.iter().enumerate() {
            let child = self.part.node(c);
            if child.end <= r || d <= child.start {
                continue;
            }
            if child.is_leaf() {
                if (child.contains_span(r, d) || (r <= child.start && child.end <= d)) && child.len() >= p {
                    out.push((ci, None));
                }
                continue;
            }
            for (gi, &g) in child.children.iter().enumerate() {
                let gn = self.part.node(g);
                if r <= gn.start && gn.end <= d && gn.len() >= p {
                    out.push((ci, Some(gi)));
                }
            }
        }
        out
    }

    fn eval_inner(&mut self, key: &DpKey) -> Result<Entry, SolveError> {
        let classes = self.classes(key);
        let start = SweepKey {
            ci: 0,
            counts: classes.iter().map(|c| c.count).collect(),
            busy: vec![self.part.node(key.node).start; self.inst.machines()],
            placed: 0,
        };
        let mut memo = SweepMemo::new();
        let value = self.sweep(key, &classes, &start, &mut memo)?;
        let mut steps = Vec::new();
        let mut at = start;
        while let Some((_, Some((step, next)))) = memo.get(&at) {
            steps.push(step.clone());
            at = next.clone();
        }
        Ok(Entry { value, choice: Choice::Inner(steps) })
    }

    fn sweep(
        &mut self,
        key: &DpKey,
        classes: &[Class],
        st: &SweepKey,
        memo: &mut SweepMemo,
    ) -> Result<usize, SolveError> {
        if let Some((v, _)) = memo.get(st) {
            return Ok(*v);
        }
        let kids = &self.part.node(key.node).children;
        if st.ci == kids.len() {
            memo.insert(st.clone(), (0, None));
            return Ok(0);
        }
        let child = kids[st.ci];
        let (ca, cb) = (self.part.node(child).start, self.part.node(child).end);
        let room = self.cfg.caps.g_max.map(|g| g.saturating_sub(st.placed));
        let (sets, cut) = placement_sets(
            classes,
            &st.counts,
            &st.busy,
            &key.v,
            (ca, cb),
            &self.cands,
            room,
            self.cfg.caps.composition_budget,
        );
        self.stats.truncated |= cut;

        let mut best: Option<(usize, Step, SweepKey)> = None;
        for placements in sets {
            if best.is_some() && self.out_of_work() {
                self.stats.truncated = true;
                self.stats.budget_exhausted = true;
                break;
            }
            let mut counts = st.counts.clone();
            let mut busy = st.busy.clone();
            for &(c, m, s) in &placements {
                counts[c] -= 1;
                busy[m] = busy[m].max(s + classes[c].p);
            }
            let (pushes, cut) =
                push_options(classes, &counts, st.ci, self.cfg.caps.composition_budget);
            self.stats.truncated |= cut;
            for push in pushes {
                if best.is_some() && self.out_of_work() {
                    self.stats.truncated = true;
                    self.stats.budget_exhausted = true;
                    break;
                }
                self.work += 1;
                let mut after = counts.clone();
                for &(c, _, _, n) in &push {
                    after[c] -= n;
                }
                let child_key = self.child_key(key, classes, st, child, &placements, &push)?;
                let child_value = self.eval(&child_key)?.value;
                let next = SweepKey {
                    ci: st.ci + 1,
                    counts: after,
                    busy: busy.iter().map(|&b| b.max(cb)).collect(),
                    placed: if self.cfg.caps.g_max.is_some() { st.placed + placements.len() } else { 0 },
                };
                let rest = self.sweep(key, classes, &next, memo)?;
                let total = placements.len() + child_value + rest;
                if best.as_ref().is_none_or(|(v, _, _)| total > *v) {
                    let step = Step { placements: placements.clone(), pushes: push, child_key };
                    best = Some((total, step, next));
                }
            }
        }
        let (value, step, next) = best.expect("the empty option always exists");
        memo.insert(st.clone(), (value, Some((step, next))));
        Ok(value)
    }

    fn child_key(
        &self,
        key: &DpKey,
        classes: &[Class],
        st: &SweepKey,
        child: usize,
        placements: &[Placement],
        pushes: &[Push],
    ) -> Result<DpKey, SolveError> {
        let (ca, cb) = (self.part.node(child).start, self.part.node(child).end);
        let mut v: Vec<Blocks> = key.v.iter().map(|pairs| clip(pairs, ca, cb)).collect();
        for (m, &b) in st.busy.iter().enumerate() {
            if b > ca {
                v[m].push((ca, b.min(cb)));
            }
        }
        for &(c, m, s) in placements {
            v[m].push((s, (s + classes[c].p).min(cb)));
        }
        let slot = st.ci as u32 + 1;
        let mut u: Vec<CountEntry> = key
            .u
            .iter()
            .filter(|e| e.0 == slot)
            .map(|&(_, sigma, n)| (0, sigma, n))
            .collect();
        for &(c, _, g, n) in pushes {
            let target = g.map_or(0, |g| g as u32 + 1);
            u.push((target, classes[c].sigma, n));
        }
        canonicalize_key(child, v, u).map_err(internal)
    }

    fn rebuild(&self, key: &DpKey, mut ids: HashMap<(u32, u32), VecDeque<JobId>>, out: &mut Schedule) {
        let Some(entry) = self.memo.get(key) else { return };
        match &entry.choice {
            Choice::Empty => {}
            Choice::Leaf(placements) => {
                for &(r, m, s) in placements {
                    let id = match r {
                        LocalRef::Job(id) => id,
                        LocalRef::Pushed(sigma) => ids
                            .get_mut(&(0, sigma))
                            .and_then(VecDeque::pop_front)
                            .expect("pushed job ids are passed down"),
                    };
                    out.assign(id, m, s);
                }
            }
            Choice::Inner(steps) => {
                let classes = self.classes(key);
                let mut queues: Vec<VecDeque<JobId>> = classes
                    .iter()
                    .map(|c| {
                        if c.ids.is_empty() {
                            ids.remove(&(0, c.sigma)).unwrap_or_default()
                        } else {
                            c.ids.iter().copied().collect()
                        }
                    })
                    .collect();
                for (ci, step) in steps.iter().enumerate() {
                    for &(c, m, s) in &step.placements {
                        let id = queues[c].pop_front().expect("class has a job left");
                        out.assign(id, m, s);
                    }
                    let mut child_ids: HashMap<(u32, u32), VecDeque<JobId>> = HashMap::new();
                    let slot = ci as u32 + 1;
                    let passing: Vec<(u32, u32)> =
                        ids.keys().filter(|k| k.0 == slot).copied().collect();
                    for k in passing {
                        let list = ids.remove(&k).unwrap_or_default();
                        child_ids.entry((0, k.1)).or_default().extend(list);
                    }
                    for &(c, _, g, n) in &step.pushes {
                        let target = g.map_or(0, |g| g as u32 + 1);
                        let q = child_ids.entry((target, classes[c].sigma)).or_default();
                        for _ in 0..n {
                            q.push_back(queues[c].pop_front().expect("class has a job left"));
                        }
                    }
                    self.rebuild(&step.child_key, child_ids, out);
                }
            }
        }
    }
}

fn internal(e: super::key::KeyError) -> SolveError {
    SolveError::Precondition(format!("inconsistent DP state: {e}"))
}

/// All sets of placements starting inside `[ca, cb)`, listed in increasing
/// `(start, class, machine)` order so each set appears once.
#[allow(clippy::too_many_arguments)]
fn placement_sets(
    classes: &[Class],
    counts: &[u32],
    busy: &[Time],
    v: &[Blocks],
    (ca, cb): (Time, Time),
    cands: &[Time],
    room: Option<usize>,
    budget: Option<usize>,
) -> (Vec<Vec<Placement>>, bool) {
    struct Ctx<'c> {
        classes: &'c [Class],
        v: &'c [Blocks],
        cands: &'c [Time],
        ca: Time,
        cb: Time,
        room: Option<usize>,
        budget: Option<usize>,
        out: Vec<Vec<Placement>>,
        cut: bool,
    }

    fn options(ctx: &Ctx, counts: &[u32], busy: &[Time], last: Option<Placement>) -> Vec<Placement> {
        let mut out = Vec::new();
        for (c, class) in ctx.classes.iter().enumerate() {
            if class.kind != Kind::Place || counts[c] == 0 {
                continue;
            }
            let lo = class.r.max(ctx.ca).max(last.map_or(Time::MIN, |l| l.2));
            let hi = (class.d - class.p).min(ctx.cb - 1);
            if lo > hi {
                continue;
            }
            let from = ctx.cands.partition_point(|&t| t < lo);
            for &s in ctx.cands[from..].iter().take_while(|&&t| t <= hi) {
                // Jackson rule: an unused job of equal size and earlier
                // deadline that fits here would be placed first.
                let dominated = ctx.classes.iter().enumerate().any(|(o, other)| {
                    o != c
                        && other.kind == Kind::Place
                        && counts[o] > 0
                        && other.p == class.p
                        && other.order < class.order
                        && other.r <= s
                        && s + other.p <= other.d
                });
                if dominated {
                    continue;
                }
                for m in 0..busy.len() {
                    if last.is_some_and(|l| (s, c, m) <= (l.2, l.0, l.1)) {
                        continue;
                    }
                    if s < busy[m] || !is_free(&ctx.v[m], s, s + class.p) {
                        continue;
                    }
                    out.push((c, m, s));
                }
            }
        }
        out
    }

    fn dfs(ctx: &mut Ctx, acc: &mut Vec<Placement>, counts: &mut [u32], busy: &mut [Time]) {
        if ctx.budget.is_some_and(|b| ctx.out.len() >= b) {
            ctx.cut = true;
            return;
        }
        ctx.out.push(acc.clone());
        let next = options(ctx, counts, busy, acc.last().copied());
        if ctx.room.is_some_and(|r| acc.len() >= r) {
            ctx.cut |= !next.is_empty();
            return;
        }
        for (c, m, s) in next {
            let p = ctx.classes[c].p;
            let saved = busy[m];
            counts[c] -= 1;
            busy[m] = s + p;
            acc.push((c, m, s));
            dfs(ctx, acc, counts, busy);
            acc.pop();
            busy[m] = saved;
            counts[c] += 1;
        }
    }

    let mut ctx = Ctx { classes, v, cands, ca, cb, room, budget, out: Vec::new(), cut: false };
    dfs(&mut ctx, &mut Vec::new(), &mut counts.to_vec(), &mut busy.to_vec());
    (ctx.out, ctx.cut)
}

/// Ways to push the remaining small jobs into targets inside child `ci`.
fn push_options(
    classes: &[Class],
    counts: &[u32],
    ci: usize,
    budget: Option<usize>,
) -> (Vec<Vec<Push>>, bool) {
    let mut out: Vec<Vec<Push>> = vec![vec![]];
    let mut cut = false;
    for (c, class) in classes.iter().enumerate() {
        if class.kind != Kind::Push || counts[c] == 0 {
            continue;
        }
        let targets: Vec<Option<usize>> = class
            .targets
            .iter()
            .filter(|t| t.0 == ci)
            .map(|t| t.1)
            .collect();
        if targets.is_empty() {
            continue;
        }
        let splits = compositions(counts[c], targets.len());
        let mut next = Vec::new();
        'outer: for base in &out {
            for split in &splits {
                if budget.is_some_and(|b| next.len() >= b) {
                    cut = true;
                    break 'outer;
                }
                let mut v = base.clone();
                for (t, &n) in targets.iter().zip(split) {
                    if n > 0 {
                        v.push((c, ci, *t, n));
                    }
                }
                next.push(v);
            }
        }
        out = next;
    }
    (out, cut)
}

/// Vectors of `parts` non-negative integers summing to at most `total`.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn go(left: u32, parts: usize, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if acc.len() == parts {
            out.push(acc.clone());
            return;
        }
        for n in 0..=left {
            acc.push(n);
            go(left - n, parts, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    go(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(2, 1), vec![vec![0], vec![1], vec![2]]);
        // Stars and bars: C(3 + 2, 2) = 10.
        assert_eq!(compositions(3, 2).len(), 10);
        assert!(compositions(3, 2).iter().all(|c| c.iter().sum::<u32>() <= 3));
    }
}
