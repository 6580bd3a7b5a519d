//! Reference oracles written independently of the library's solvers, plus
//! seeded instance builders shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use throughput::{BlockedInterval, Instance, Job, Time};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random instance with `n` jobs drawn from `c` sizes in `[1, pmax]` and
/// windows inside `[0, horizon]`, plus up to `blocks` blocked intervals per
/// machine.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    c: usize,
    horizon: Time,
    pmax: Time,
    blocks: usize,
) -> Instance {
    let sizes: Vec<Time> = (0..c).map(|_| rng.gen_range(1..=pmax)).collect();
    let jobs = (0..n)
        .map(|id| {
            let p = sizes[rng.gen_range(0..c)];
            let len = rng.gen_range(p..=(3 * p).min(horizon).max(p));
            let r = rng.gen_range(0..=horizon - len);
            Job::new(id as u32, p, r, r + len)
        })
        .collect();
    let mut bl = Vec::new();
    for machine in 0..m {
        let mut at = 0;
        for _ in 0..blocks {
            if at + 2 >= horizon {
                break;
            }
            let s = rng.gen_range(at..horizon - 1);
            let e = rng.gen_range(s + 1..=(s + 3).min(horizon));
            bl.push(BlockedInterval::new(machine, s, e));
            at = e + 1;
        }
    }
    Instance::new(jobs, m, bl).unwrap()
}

/// Instance with release times and deadlines drawn from small pools.
pub fn few_points_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    points: usize,
    blocks: usize,
    horizon: Time,
) -> Instance {
    let releases: Vec<Time> = (0..points).map(|_| rng.gen_range(0..horizon / 2)).collect();
    let deadlines: Vec<Time> = (0..points).map(|_| rng.gen_range(horizon / 2 + 1..=horizon)).collect();
    let jobs = (0..n)
        .map(|id| {
            let r = releases[rng.gen_range(0..points)];
            let d = deadlines[rng.gen_range(0..points)];
            let p = rng.gen_range(1..=((d - r) / 2).max(1));
            Job::new(id as u32, p, r, d)
        })
        .collect();
    let mut bl = Vec::new();
    for machine in 0..m {
        let mut at = 0;
        for _ in 0..blocks {
            if at + 2 >= horizon {
                break;
            }
            let s = rng.gen_range(at..horizon - 1);
            let e = rng.gen_range(s + 1..=(s + 3).min(horizon));
            bl.push(BlockedInterval::new(machine, s, e));
            at = e + 1;
        }
    }
    Instance::new(jobs, m, bl).unwrap()
}

/// Earliest start at or after `from` on one machine at which `p` fits
/// between the blocks and crosses none of the `barriers`.
fn first_start(blocks: &[(Time, Time)], barriers: &[Time], from: Time, p: Time) -> Time {
    let mut s = from;
    loop {
        let mut moved = false;
        for &(a, b) in blocks {
            if s < b && a < s + p {
                s = b;
                moved = true;
            }
        }
        for &x in barriers {
            if s < x && x < s + p {
                s = x;
                moved = true;
            }
        }
        if !moved {
            return s;
        }
    }
}

/// Whether the jobs, run in this order as early as possible, all meet
/// their deadlines on the machine.
fn sequence_fits(jobs: &[Job], order: &[usize], blocks: &[(Time, Time)], barriers: &[Time]) -> bool {
    let mut t = 0;
    for &j in order {
        let job = &jobs[j];
        let s = first_start(blocks, barriers, t.max(job.r), job.p);
        if s + job.p > job.d {
            return false;
        }
        t = s + job.p;
    }
    true
}

/// Whether some order of `set` fits. Tries every permutation.
fn some_order_fits(jobs: &[Job], set: &[usize], blocks: &[(Time, Time)], barriers: &[Time]) -> bool {
    fn permute(
        jobs: &[Job],
        rest: &mut Vec<usize>,
        acc: &mut Vec<usize>,
        blocks: &[(Time, Time)],
        barriers: &[Time],
    ) -> bool {
        if rest.is_empty() {
            return sequence_fits(jobs, acc, blocks, barriers);
        }
        // Prefix pruning: the partial order must already fit.
        if !sequence_fits(jobs, acc, blocks, barriers) {
            return false;
        }
        for i in 0..rest.len() {
            let j = rest.remove(i);
            acc.push(j);
            let ok = permute(jobs, rest, acc, blocks, barriers);
            acc.pop();
            rest.insert(i, j);
            if ok {
                return true;
            }
        }
        false
    }
    permute(jobs, &mut set.to_vec(), &mut Vec::new(), blocks, barriers)
}

/// Maximum throughput by enumerating every job-to-machine-or-nothing map and
/// every order on each machine.
pub fn brute_force_opt(inst: &Instance) -> usize {
    let barriers = vec![Vec::new(); inst.machines()];
    brute_force_with_barriers(inst, &barriers)
}

/// Like [`brute_force_opt`], but no job may run across one of the given
/// per-machine points.
pub fn brute_force_with_barriers(inst: &Instance, barriers: &[Vec<Time>]) -> usize {
    let jobs = inst.jobs();
    let n = jobs.len();
    let m = inst.machines();
    let mut best = 0;
    let mut choice = vec![0usize; n];
    let total = (m + 1).pow(n as u32);
    for code in 0..total {
        let mut x = code;
        let mut count = 0;
        for c in choice.iter_mut() {
            *c = x % (m + 1);
            x /= m + 1;
            if *c > 0 {
                count += 1;
            }
        }
        if count <= best {
            continue;
        }
        let ok = (0..m).all(|mach| {
            let set: Vec<usize> = (0..n).filter(|&j| choice[j] == mach + 1).collect();
            some_order_fits(jobs, &set, inst.blocked_on(mach), &barriers[mach])
        });
        if ok {
            best = count;
        }
    }
    best
}

/// Straddle points per machine: release times (moved past a block that
/// contains them), deadlines (moved before one) and block endpoints.
pub fn straddle_points(inst: &Instance) -> Vec<Vec<Time>> {
    (0..inst.machines())
        .map(|m| {
            let blocks = inst.blocked_on(m);
            let mut pts = Vec::new();
            for j in inst.jobs() {
                let r = blocks.iter().find(|&&(s, e)| s < j.r && j.r < e).map_or(j.r, |b| b.1);
                let d = blocks.iter().find(|&&(s, e)| s < j.d && j.d < e).map_or(j.d, |b| b.0);
                pts.push(r);
                pts.push(d);
            }
            for &(s, e) in blocks {
                pts.push(s);
                pts.push(e);
            }
            pts.sort_unstable();
            pts.dedup();
            pts
        })
        .collect()
}

/// Maximum independent set of intervals `[r, d)` on `m` machines: take
/// intervals by finishing time, each on the machine that became free
/// latest among those free in time.
pub fn interval_mis(inst: &Instance) -> usize {
    let mut iv: Vec<(Time, Time)> = inst.jobs().iter().map(|j| (j.d, j.r)).collect();
    iv.sort_unstable();
    let mut free: Vec<Option<Time>> = vec![None; inst.machines()];
    let mut count = 0;
    for (d, r) in iv {
        let pick = (0..free.len())
            .filter(|&k| free[k].is_none_or(|f| f <= r))
            .max_by_key(|&k| free[k].unwrap_or(Time::MIN));
        if let Some(k) = pick {
            free[k] = Some(d);
            count += 1;
        }
    }
    count
}

/// Multiple knapsack by trying every item-to-knapsack-or-nothing map.
pub fn knapsack_brute(sizes: &[Time], caps: &[Time]) -> usize {
    let k = caps.len();
    let n = sizes.len();
    let mut best = 0;
    for code in 0..(k + 1).pow(n as u32) {
        let mut x = code;
        let mut load = vec![0; k];
        let mut count = 0;
        for &s in sizes {
            let c = x % (k + 1);
            x /= k + 1;
            if c > 0 {
                load[c - 1] += s;
                count += 1;
            }
        }
        if count > best && load.iter().zip(caps).all(|(l, c)| l <= c) {
            best = count;
        }
    }
    best
}
