//! Greedy reference schedules and schedule combinators.

use crate::instance::{validate_schedule, Instance, Job, Schedule, Time};

/// Event-driven greedy: repeatedly runs, on some machine, the unscheduled job
/// that can finish earliest from that machine's free time.
///
/// Ties go to the earlier start, then the smaller processing time, the
/// earlier deadline, the smaller id and the lower machine index. Jobs that can
/// no longer meet their deadline are never started. On one machine this
/// keeps at least half of the optimum.
///
/// Picking the shortest released job instead (without looking at finish
/// times) can fall far below half: a long job released at 0 occupies the
/// machine while many unit jobs with tight windows expire.
pub fn greedy_shortest_first(inst: &Instance) -> Schedule {
    let mut free: Vec<Time> = vec![0; inst.machines()];
    let mut pending: Vec<Job> = inst.jobs().to_vec();
    let mut sched = Schedule::new();
    loop {
        let mut best: Option<((Time, Time, Time, Time, u32, usize), usize, Time)> = None;
        for (idx, job) in pending.iter().enumerate() {
            for (m, &f) in free.iter().enumerate() {
                let s = inst.earliest_fit(m, f.max(job.r), job.p);
                let finish = s + job.p;
                if finish > job.d {
                    continue;
                }
                let key = (finish, s, job.p, job.d, job.id, m);
                if best.as_ref().is_none_or(|(k, _, _)| key < *k) {
                    best = Some((key, idx, s));
                }
            }
        }
        let Some((key, idx, s)) = best else { break };
        let job = pending.swap_remove(idx);
        let m = key.5;
        sched.assign(job.id, m, s);
        free[m] = s + job.p;
    }
    sched
}

/// Inserts unscheduled jobs into idle gaps, earliest deadline first, each at
/// the earliest start any machine can offer. Existing assignments are kept.
pub fn fill_gaps(inst: &Instance, sched: &Schedule) -> Schedule {
    let mut busy: Vec<Vec<(Time, Time)>> = (0..inst.machines())
        .map(|m| inst.blocked_on(m).to_vec())
        .collect();
    for (id, a) in sched.iter() {
        if let Some(job) = inst.job(id) {
            busy[a.machine].push((a.start, a.start + job.p));
        }
    }
    for lane in &mut busy {
        lane.sort_unstable();
    }
    let mut out = sched.clone();
    let mut rest: Vec<&Job> = inst.jobs().iter().filter(|j| !sched.contains(j.id)).collect();
    rest.sort_by_key(|j| (j.d, j.p, j.id));
    for job in rest {
        let mut pick: Option<(Time, usize)> = None;
        for (m, lane) in busy.iter().enumerate() {
            if let Some(s) = first_gap(lane, job) {
                if pick.is_none_or(|(ps, _)| s < ps) {
                    pick = Some((s, m));
                }
            }
        }
        if let Some((s, m)) = pick {
            out.assign(job.id, m, s);
            let lane = &mut busy[m];
            let at = lane.partition_point(|&(a, _)| a < s);
            lane.insert(at, (s, s + job.p));
        }
    }
    out
}

fn first_gap(lane: &[(Time, Time)], job: &Job) -> Option<Time> {
    let mut s = job.r;
    for &(a, b) in lane {
        if b <= s {
            continue;
        }
        if s + job.p <= a {
            break;
        }
        s = s.max(b);
    }
    (s + job.p <= job.d).then_some(s)
}

/// The feasible schedule with the highest throughput; earlier candidates win
/// ties. Infeasible candidates are logged and skipped.
pub fn best_schedule<I>(inst: &Instance, candidates: I) -> Schedule
where
    I: IntoIterator<Item = Schedule>,
{
    let mut best: Option<Schedule> = None;
    for (i, s) in candidates.into_iter().enumerate() {
        let report = validate_schedule(inst, &s);
        if !report.feasible {
            log::error!(
                "defect: candidate {i} is infeasible ({} violations), discarded",
                report.violations.len()
            );
            continue;
        }
        if best.as_ref().is_none_or(|b| s.value() > b.value()) {
            best = Some(s);
        }
    }
    best.unwrap_or_default()
}

/// Runs every solver and keeps the best feasible result.
pub fn best_of(inst: &Instance, solvers: &[&dyn Fn(&Instance) -> Schedule]) -> Schedule {
    assert!(!solvers.is_empty(), "best_of needs at least one solver");
    best_schedule(inst, solvers.iter().map(|f| f(inst)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::BlockedInterval;
    use crate::oracle::{exact_solve, OracleLimits};

    fn inst(jobs: &[(Time, Time, Time)], m: usize) -> Instance {
        let jobs = jobs
            .iter()
            .enumerate()
            .map(|(i, &(p, r, d))| Job::new(i as u32, p, r, d))
            .collect();
        Instance::new(jobs, m, vec![]).unwrap()
    }

    #[test]
    fn tight_half_instance() {
        let i = inst(&[(2, 0, 4), (1, 1, 2)], 1);
        let g = greedy_shortest_first(&i);
        assert_eq!(g.value(), 1);
        assert_eq!(g.get(0).unwrap().start, 0);
    }

    #[test]
    fn trivial_cases() {
        assert_eq!(greedy_shortest_first(&inst(&[(3, 0, 3)], 1)).value(), 1);
        assert_eq!(greedy_shortest_first(&inst(&[], 1)).value(), 0);
    }

    #[test]
    fn long_job_does_not_starve_unit_jobs() {
        let mut jobs = vec![(10, 0, 10)];
        jobs.extend((0..9).map(|i| (1, i, i + 1)));
        let g = greedy_shortest_first(&inst(&jobs, 1));
        assert_eq!(g.value(), 9);
    }

    #[test]
    fn respects_blocks() {
        let i = Instance::new(
            vec![Job::new(0, 2, 0, 10), Job::new(1, 2, 0, 10)],
            1,
            vec![BlockedInterval::new(0, 1, 3)],
        )
        .unwrap();
        let g = greedy_shortest_first(&i);
        assert_eq!(g.value(), 2);
        assert!(validate_schedule(&i, &g).feasible);
    }

    #[test]
    fn best_of_prefers_higher_value() {
        let i = inst(&[(2, 0, 4), (1, 1, 2)], 1);
        let exact = |i: &Instance| exact_solve(i, OracleLimits::default()).unwrap().schedule;
        let s = best_of(&i, &[&greedy_shortest_first, &exact]);
        assert_eq!(s.value(), 2);
        assert_eq!(best_of(&i, &[&greedy_shortest_first]), greedy_shortest_first(&i));
        assert!(best_of(&inst(&[], 1), &[&greedy_shortest_first, &exact]).is_empty());
    }

    #[test]
    fn best_of_skips_infeasible() {
        let i = inst(&[(2, 0, 2)], 1);
        let broken = |_: &Instance| -> Schedule { [(0, 0, 1)].into_iter().collect() };
        let empty = |_: &Instance| Schedule::new();
        assert_eq!(best_of(&i, &[&broken, &empty]).value(), 0);
    }

    #[test]
    fn fill_gaps_adds_jobs() {
        let i = inst(&[(2, 0, 10), (3, 0, 10), (1, 0, 1)], 1);
        let s: Schedule = [(0, 0, 4)].into_iter().collect();
        let f = fill_gaps(&i, &s);
        assert!(validate_schedule(&i, &f).feasible);
        assert_eq!(f.value(), 3);
        assert_eq!(f.get(0).unwrap().start, 4);
    }
}
