//! Unit-profit multiple knapsack.
//!
//! `mk_exact` is a dynamic program over items in decreasing size order whose
//! state is the vector of residual capacities. `mk_rounded` first shrinks
//! the capacities of knapsacks that hold many items to powers of `1 + eps`,
//! which collapses the state space at a bounded loss.

use std::collections::HashMap;

use thiserror::Error;

use crate::instance::Time;

/// Default ceiling on `prod(capacity + 1)`.
pub const DEFAULT_STATE_BUDGET: u128 = 100_000_000;

/// Layers up to this many states get pairwise dominance pruning.
const DOMINANCE_LAYER_LIMIT: usize = 512;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KnapsackError {
    #[error("item {0} has non-positive size")]
    BadItem(usize),
    #[error("knapsack {0} has negative capacity")]
    BadCapacity(usize),
    #[error("state space of {states} exceeds budget {budget}")]
    StateBudget { states: u128, budget: u128 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MkProblem {
    pub item_sizes: Vec<Time>,
    pub capacities: Vec<Time>,
}

impl MkProblem {
    pub fn new(item_sizes: Vec<Time>, capacities: Vec<Time>) -> Self {
        Self { item_sizes, capacities }
    }

    fn check(&self) -> Result<(), KnapsackError> {
        if let Some(i) = self.item_sizes.iter().position(|&s| s <= 0) {
            return Err(KnapsackError::BadItem(i));
        }
        if let Some(k) = self.capacities.iter().position(|&c| c < 0) {
            return Err(KnapsackError::BadCapacity(k));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MkSolution {
    pub count: usize,
    /// `assignment[i]` is the knapsack holding item `i`, if packed.
    pub assignment: Vec<Option<usize>>,
}

impl MkSolution {
    fn empty(n: usize) -> Self {
        Self { count: 0, assignment: vec![None; n] }
    }

    /// Total size packed into each knapsack.
    pub fn loads(&self, prob: &MkProblem) -> Vec<Time> {
        let mut loads = vec![0; prob.capacities.len()];
        for (i, k) in self.assignment.iter().enumerate() {
            if let Some(k) = *k {
                loads[k] += prob.item_sizes[i];
            }
        }
        loads
    }

    pub fn is_valid_for(&self, prob: &MkProblem) -> bool {
        self.assignment.len() == prob.item_sizes.len()
            && self.assignment.iter().flatten().count() == self.count
            && self.assignment.iter().flatten().all(|&k| k < prob.capacities.len())
            && self
                .loads(prob)
                .iter()
                .zip(&prob.capacities)
                .all(|(l, c)| l <= c)
    }
}

struct State {
    residual: Vec<Time>,
    count: usize,
    parent: usize,
    knapsack: Option<usize>,
}

pub fn mk_exact(prob: &MkProblem) -> Result<MkSolution, KnapsackError> {
    mk_exact_with_budget(prob, DEFAULT_STATE_BUDGET)
}

pub fn mk_exact_with_budget(prob: &MkProblem, budget: u128) -> Result<MkSolution, KnapsackError> {
    prob.check()?;
    let n = prob.item_sizes.len();
    if n == 0 || prob.capacities.is_empty() {
        return Ok(MkSolution::empty(n));
    }
    // Capacity beyond the total item mass is never used.
    let total: Time = prob.item_sizes.iter().sum();
    let caps: Vec<Time> = prob.capacities.iter().map(|&c| c.min(total)).collect();
    let states = caps
        .iter()
        .fold(1u128, |acc, &c| acc.saturating_mul(c as u128 + 1));
    if states > budget {
        return Err(KnapsackError::StateBudget { states, budget });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| prob.item_sizes[b].cmp(&prob.item_sizes[a]).then(a.cmp(&b)));

    let mut layers: Vec<Vec<State>> = Vec::with_capacity(n + 1);
    layers.push(vec![State { residual: caps, count: 0, parent: 0, knapsack: None }]);
    for &item in &order {
        let size = prob.item_sizes[item];
        let prev = layers.last().expect("seeded");
        let mut next: Vec<State> = Vec::new();
        let mut index: HashMap<Vec<Time>, usize> = HashMap::new();
        let mut push = |next: &mut Vec<State>, st: State| match index.get(&st.residual) {
            Some(&at) => {
                if st.count > next[at].count {
                    next[at] = st;
                }
            }
            None => {
                index.insert(st.residual.clone(), next.len());
                next.push(st);
            }
        };
        for (pi, st) in prev.iter().enumerate() {
            push(
                &mut next,
                State { residual: st.residual.clone(), count: st.count, parent: pi, knapsack: None },
            );
            // Knapsacks with equal residual are interchangeable here.
            let mut tried: Vec<Time> = Vec::new();
            for (k, &r) in st.residual.iter().enumerate() {
                if r < size || tried.contains(&r) {
                    continue;
                }
                tried.push(r);
                let mut residual = st.residual.clone();
                residual[k] -= size;
                push(
                    &mut next,
                    State { residual, count: st.count + 1, parent: pi, knapsack: Some(k) },
                );
            }
        }
        if next.len() <= DOMINANCE_LAYER_LIMIT {
            next = prune_dominated(next);
        }
        layers.push(next);
    }

    let last = layers.last().expect("non-empty");
    let mut best = 0;
    for (i, st) in last.iter().enumerate() {
        if st.count > last[best].count {
            best = i;
        }
    }
    let mut sol = MkSolution::empty(n);
    sol.count = last[best].count;
    let mut at = best;
    for depth in (1..layers.len()).rev() {
        let st = &layers[depth][at];
        if let Some(k) = st.knapsack {
            sol.assignment[order[depth - 1]] = Some(k);
        }
        at = st.parent;
    }
    Ok(sol)
}

fn prune_dominated(states: Vec<State>) -> Vec<State> {
    let dominated = |a: &State, b: &State| {
        b.count >= a.count && a.residual.iter().zip(&b.residual).all(|(x, y)| y >= x)
    };
    let mut keep = vec![true; states.len()];
    for i in 0..states.len() {
        for j in 0..states.len() {
            if i != j && keep[j] && dominated(&states[i], &states[j]) {
                // Break exact ties by position so one of the pair survives.
                let tie = states[i].count == states[j].count && states[i].residual == states[j].residual;
                if !tie || j < i {
                    keep[i] = false;
                    break;
                }
            }
        }
    }
    states
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}

/// Largest `floor((1 + eps)^j)` not exceeding `cap`.
pub fn round_down_to_power(cap: Time, eps: f64) -> Time {
    if cap <= 1 {
        return cap;
    }
    let base = 1.0 + eps;
    let mut v = 1.0f64;
    while (v * base).floor() <= cap as f64 {
        v *= base;
    }
    (v.floor() as Time).min(cap)
}

/// Item counts per knapsack in a first-fit-decreasing packing.
fn ffd_counts(prob: &MkProblem) -> Vec<usize> {
    let mut sizes = prob.item_sizes.clone();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let mut residual = prob.capacities.clone();
    let mut counts = vec![0; residual.len()];
    for s in sizes {
        if let Some(k) = residual.iter().position(|&r| r >= s) {
            residual[k] -= s;
            counts[k] += 1;
        }
    }
    counts
}

/// Capacities after rounding the crowded knapsacks down to powers of
/// `1 + eps`. A knapsack is crowded when a first-fit-decreasing probe puts at
/// least `ceil(1/eps^2)` items into it.
pub fn rounded_capacities(prob: &MkProblem, eps: f64) -> Vec<Time> {
    let crowded = ((1.0 / (eps * eps)) - 1e-9).ceil() as usize;
    ffd_counts(prob)
        .iter()
        .zip(&prob.capacities)
        .map(|(&n, &c)| if n >= crowded { round_down_to_power(c, eps) } else { c })
        .collect()
}

pub fn mk_rounded(prob: &MkProblem, eps: f64) -> Result<MkSolution, KnapsackError> {
    mk_rounded_with_budget(prob, eps, DEFAULT_STATE_BUDGET)
}

pub fn mk_rounded_with_budget(
    prob: &MkProblem,
    eps: f64,
    budget: u128,
) -> Result<MkSolution, KnapsackError> {
    assert!(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
    prob.check()?;
    let reduced = MkProblem::new(prob.item_sizes.clone(), rounded_capacities(prob, eps));
    // Rounded capacities never exceed the originals, so the packing carries over.
    mk_exact_with_budget(&reduced, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(prob: &MkProblem) -> usize {
        fn go(i: usize, prob: &MkProblem, res: &mut Vec<Time>) -> usize {
            if i == prob.item_sizes.len() {
                return 0;
            }
            let mut best = go(i + 1, prob, res);
            for k in 0..res.len() {
                if res[k] >= prob.item_sizes[i] {
                    res[k] -= prob.item_sizes[i];
                    best = best.max(1 + go(i + 1, prob, res));
                    res[k] += prob.item_sizes[i];
                }
            }
            best
        }
        go(0, prob, &mut prob.capacities.clone())
    }

    #[test]
    fn small_examples() {
        let p = MkProblem::new(vec![2, 2, 3], vec![4, 3]);
        let s = mk_exact(&p).unwrap();
        assert_eq!(s.count, 3);
        assert!(s.is_valid_for(&p));
        assert_eq!(mk_exact(&MkProblem::new(vec![5], vec![4])).unwrap().count, 0);
        assert_eq!(mk_exact(&MkProblem::new(vec![], vec![7])).unwrap().count, 0);
        assert_eq!(mk_exact(&MkProblem::new(vec![1, 1], vec![])).unwrap().count, 0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(mk_exact(&MkProblem::new(vec![0], vec![1])), Err(KnapsackError::BadItem(0)));
        assert_eq!(
            mk_exact(&MkProblem::new(vec![1], vec![-1])),
            Err(KnapsackError::BadCapacity(0))
        );
    }

    #[test]
    fn budget_is_enforced() {
        let p = MkProblem::new(vec![1000; 10], vec![5000, 5000, 5000]);
        assert!(matches!(
            mk_exact_with_budget(&p, 1000),
            Err(KnapsackError::StateBudget { .. })
        ));
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(0..=7);
            let k = rng.gen_range(1..=3);
            let items = (0..n).map(|_| rng.gen_range(1..=9)).collect();
            let caps = (0..k).map(|_| rng.gen_range(0..=15)).collect();
            let p = MkProblem::new(items, caps);
            let s = mk_exact(&p).unwrap();
            assert_eq!(s.count, brute(&p), "{p:?}");
            assert!(s.is_valid_for(&p));
        }
    }

    #[test]
    fn rounding_power_grid() {
        assert_eq!(round_down_to_power(100, 0.1), 97);
        assert_eq!(round_down_to_power(1, 0.5), 1);
        assert_eq!(round_down_to_power(0, 0.5), 0);
        assert_eq!(round_down_to_power(10, 1.0), 8);
        // Floors are taken on the real powers: 1.999.., 3.999.., 7.999..
        assert_eq!(round_down_to_power(10, 1.0 - 1e-12), 7);
    }

    #[test]
    fn rounded_on_many_unit_items() {
        let p = MkProblem::new(vec![1; 100], vec![100]);
        assert_eq!(mk_exact(&p).unwrap().count, 100);
        let r = mk_rounded(&p, 0.1).unwrap();
        assert!(r.count >= 80, "{}", r.count);
        assert!(r.is_valid_for(&p));
    }

    #[test]
    fn rounded_is_exact_when_knapsacks_hold_few_items() {
        let p = MkProblem::new(vec![3, 4, 5], vec![7, 5]);
        assert_eq!(mk_rounded(&p, 0.25).unwrap(), mk_exact(&p).unwrap());
    }
}
