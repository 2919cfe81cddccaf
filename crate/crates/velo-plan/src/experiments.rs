//! Batch drivers: Pareto sweeps over the trade-off weight, runtime
//! scaling over the grid size, and bulk exactness statistics on random
//! roads.
//!
//! All drivers are deterministic for fixed inputs; the parallel runner
//! only distributes independent solves across threads and writes each
//! result into its own slot, so concurrency never changes the output.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::exactness::{exactness_report, ExactnessReport, DEFAULT_GAP_THRESHOLD};
use crate::formulation::solve_instance;
use crate::model::SolveStatus;
use crate::scenarios::{benchmark_instance, random_instance, RandomRoadConfig, VehiclePreset};
use crate::{Error, Instance, SolverConfig};

/// Number of worker threads to use: `VELO_PLAN_THREADS` when set to a
/// positive integer, otherwise the machine's available parallelism.
pub fn thread_cap() -> usize {
    parse_thread_cap(std::env::var("VELO_PLAN_THREADS").ok().as_deref()).unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(std::num::NonZeroUsize::get)
            .unwrap_or(1)
    })
}

fn parse_thread_cap(raw: Option<&str>) -> Option<usize> {
    raw.and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
}

/// Applies `f` to every item on up to `threads` workers and returns the
/// results in input order. Items are handed out through a shared counter,
/// so idle workers pick up slack; each result lands in its own slot.
pub fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let result = f(&items[i]);
                *slots[i].lock().expect("result slot poisoned") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot poisoned")
                .expect("every slot is filled before the scope ends")
        })
        .collect()
}

/// One point of a time/energy trade-off sweep. `time_s` and `energy_j`
/// are re-priced from the recovered plan by the forward model; they are
/// NaN when the solve failed or the relaxation was not exact.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParetoPoint {
    pub lambda: f64,
    pub time_s: f64,
    pub energy_j: f64,
    /// Worst `|t_i − 1/√w_i|`, s/m.
    pub gap: f64,
    pub solve_s: f64,
    pub status: SolveStatus,
}

fn sweep_point(instance: &Instance) -> ParetoPoint {
    let mut point = ParetoPoint {
        lambda: instance.lambda,
        time_s: f64::NAN,
        energy_j: f64::NAN,
        gap: f64::NAN,
        solve_s: f64::NAN,
        status: SolveStatus::NumericalFailure,
    };
    let Ok(run) = solve_instance(instance, &SolverConfig::default()) else {
        return point;
    };
    point.status = run.status;
    point.solve_s = run.solve_seconds;
    let Some(extracted) = run.extracted else {
        return point;
    };
    match crate::exactness::recover_nonconvex(instance, &extracted, DEFAULT_GAP_THRESHOLD) {
        Ok(crate::exactness::Recovery::Exact { plan, .. }) => {
            point.time_s = plan.time;
            point.energy_j = plan.energy;
            point.gap = plan.exactness_gap;
        }
        Ok(crate::exactness::Recovery::NotExact { gap, .. }) => {
            point.gap = gap;
        }
        Err(_) => {}
    }
    point
}

/// Sweeps the benchmark road over the given trade-off weights. Points come
/// back in the order of `lambdas`.
pub fn pareto_sweep(
    preset: &VehiclePreset,
    n: usize,
    lambdas: &[f64],
    threads: usize,
) -> Result<Vec<ParetoPoint>, Error> {
    let instances = lambdas
        .iter()
        .map(|&lambda| benchmark_instance(preset, lambda, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parallel_map(&instances, threads, sweep_point))
}

/// Median solve time at one grid size.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingRecord {
    pub n: usize,
    pub solve_s: f64,
    pub status: SolveStatus,
}

/// Times minimum-time solves of the benchmark road at each grid size,
/// sequentially (timings stay clean without competing workers). Reports
/// the median of `repeats` runs and the worst status seen.
pub fn runtime_scaling(
    preset: &VehiclePreset,
    sizes: &[usize],
    repeats: usize,
) -> Result<Vec<ScalingRecord>, Error> {
    let repeats = repeats.max(1);
    let mut records = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let instance = benchmark_instance(preset, 0.0, n)?;
        let mut times = Vec::with_capacity(repeats);
        let mut status = SolveStatus::Optimal;
        for _ in 0..repeats {
            let run = solve_instance(&instance, &SolverConfig::default())?;
            times.push(run.solve_seconds);
            if run.status != SolveStatus::Optimal && status == SolveStatus::Optimal {
                status = run.status;
            }
        }
        times.sort_by(f64::total_cmp);
        records.push(ScalingRecord {
            n,
            solve_s: times[times.len() / 2],
            status,
        });
    }
    Ok(records)
}

/// One random-road solve, with its exactness verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct BatchRecord {
    pub seed: u64,
    pub lambda: f64,
    pub solve_s: f64,
    /// Worst `|t_i − 1/√w_i|`, s/m; NaN when the solve failed.
    pub gap: f64,
    pub status: SolveStatus,
    pub apriori_certified: bool,
    pub certified_exact: bool,
}

/// Solves seeded random roads `base_seed .. base_seed + count` and reports
/// the per-instance exactness outcomes, in seed order.
pub fn random_batch(
    preset: &VehiclePreset,
    config: &RandomRoadConfig,
    base_seed: u64,
    count: u64,
    threads: usize,
) -> Result<Vec<BatchRecord>, Error> {
    let instances = (base_seed..base_seed + count)
        .map(|seed| Ok((seed, random_instance(preset, config, seed)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(parallel_map(&instances, threads, |(seed, instance)| {
        let mut record = BatchRecord {
            seed: *seed,
            lambda: instance.lambda,
            solve_s: f64::NAN,
            gap: f64::NAN,
            status: SolveStatus::NumericalFailure,
            apriori_certified: false,
            certified_exact: false,
        };
        let Ok(run) = solve_instance(instance, &SolverConfig::default()) else {
            return record;
        };
        record.status = run.status;
        record.solve_s = run.solve_seconds;
        let report: Option<ExactnessReport<f64>> = run
            .extracted
            .as_ref()
            .and_then(|ex| exactness_report(instance, Some(ex), DEFAULT_GAP_THRESHOLD).ok());
        if let Some(report) = report {
            record.gap = report.posterior_gap.unwrap_or(f64::NAN);
            record.apriori_certified = report.apriori_certified;
            record.certified_exact = report.certified_exact;
        }
        record
    }))
}

/// Aggregates of a random batch.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BatchSummary {
    pub count: usize,
    /// Solves that produced a usable point.
    pub solved: usize,
    pub mean_solve_s: f64,
    pub median_solve_s: f64,
    pub max_gap: f64,
    pub apriori_certified: usize,
    /// True when every a-priori certificate was backed by a small
    /// measured gap — the soundness check of the certificates.
    pub apriori_all_exact: bool,
}

/// Summarizes a batch; solve times are aggregated over successful solves.
pub fn summarize_batch(records: &[BatchRecord]) -> BatchSummary {
    let mut times: Vec<f64> = records
        .iter()
        .filter(|r| r.solve_s.is_finite())
        .map(|r| r.solve_s)
        .collect();
    times.sort_by(f64::total_cmp);
    let solved = records.iter().filter(|r| r.gap.is_finite()).count();
    let apriori: Vec<&BatchRecord> = records.iter().filter(|r| r.apriori_certified).collect();
    BatchSummary {
        count: records.len(),
        solved,
        mean_solve_s: if times.is_empty() {
            f64::NAN
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        },
        median_solve_s: if times.is_empty() {
            f64::NAN
        } else {
            times[times.len() / 2]
        },
        max_gap: records
            .iter()
            .filter(|r| r.gap.is_finite())
            .fold(f64::NAN, |acc, r| if acc.is_nan() { r.gap } else { acc.max(r.gap) }),
        apriori_certified: apriori.len(),
        apriori_all_exact: apriori.iter().all(|r| r.certified_exact),
    }
}

/// Speed statistics used to inspect heavily energy-weighted plans.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileStats {
    /// Average speed over the first half of the road (distance over time),
    /// km/h.
    pub first_half_avg_kmh: f64,
    /// Largest traction force applied on any downhill step, N; `None`
    /// when the road has no downhill step.
    pub max_descent_force: Option<f64>,
}

/// Computes [`ProfileStats`] for a plan given as squared speeds and
/// per-step forces.
pub fn profile_stats(instance: &Instance, w: &[f64], force: &[f64]) -> ProfileStats {
    let steps = instance.path.slope_sin.len();
    let h = instance.path.step;
    let half = steps / 2;
    let mut time = 0.0;
    for &wi in &w[..half] {
        time += h / wi.sqrt();
    }
    let first_half_avg_kmh = 3.6 * (half as f64 * h) / time;
    let max_descent_force = instance
        .path
        .slope_sin
        .iter()
        .zip(force)
        .filter(|(&s, _)| s < 0.0)
        .map(|(_, &f)| f)
        .fold(None, |acc: Option<f64>, f| {
            Some(acc.map_or(f, |a| a.max(f)))
        });
    ProfileStats {
        first_half_avg_kmh,
        max_descent_force,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PathProfile, ProblemInstance, VehicleParams};
    use crate::scenarios::fiat500;

    #[test]
    fn parallel_map_matches_serial_in_any_width() {
        let items: Vec<u64> = (0..37).collect();
        let square = |x: &u64| x * x + 1;
        let serial = parallel_map(&items, 1, square);
        for threads in [2, 3, 8, 64] {
            assert_eq!(parallel_map(&items, threads, square), serial);
        }
        let empty: Vec<u64> = Vec::new();
        assert_eq!(parallel_map(&empty, 4, square), Vec::<u64>::new());
    }

    #[test]
    fn thread_cap_parses_only_positive_integers() {
        assert_eq!(parse_thread_cap(None), None);
        assert_eq!(parse_thread_cap(Some("3")), Some(3));
        assert_eq!(parse_thread_cap(Some(" 12 ")), Some(12));
        assert_eq!(parse_thread_cap(Some("0")), None);
        assert_eq!(parse_thread_cap(Some("-2")), None);
        assert_eq!(parse_thread_cap(Some("many")), None);
        assert!(thread_cap() >= 1);
    }

    #[test]
    fn short_sweep_trades_time_for_energy() {
        let points =
            pareto_sweep(&fiat500(), 12, &[0.0, 1e-4, 1e-2], 2).expect("sweep built");
        assert_eq!(points.len(), 3);
        for p in &points {
            assert_eq!(p.status, SolveStatus::Optimal, "λ = {}", p.lambda);
            assert!(p.gap <= DEFAULT_GAP_THRESHOLD, "λ = {}: gap {}", p.lambda, p.gap);
            assert!(p.time_s.is_finite() && p.energy_j.is_finite());
            assert!(p.solve_s > 0.0);
        }
        // More weight on energy: no faster, no hungrier.
        assert!(points[1].time_s >= points[0].time_s - 1e-9);
        assert!(points[2].time_s >= points[1].time_s - 1e-9);
        assert!(points[1].energy_j <= points[0].energy_j + 1e-6);
        assert!(points[2].energy_j <= points[1].energy_j + 1e-6);
    }

    #[test]
    fn sweep_output_is_independent_of_concurrency() {
        let lambdas = [0.0, 1e-5, 1e-3];
        let serial = pareto_sweep(&fiat500(), 10, &lambdas, 1).unwrap();
        let parallel = pareto_sweep(&fiat500(), 10, &lambdas, 3).unwrap();
        for (a, b) in serial.iter().zip(&parallel) {
            // Everything but the wall-clock measurement must be identical.
            assert_eq!(a.lambda, b.lambda);
            assert_eq!(a.time_s, b.time_s);
            assert_eq!(a.energy_j, b.energy_j);
            assert_eq!(a.gap, b.gap);
            assert_eq!(a.status, b.status);
        }
    }

    #[test]
    fn scaling_reports_a_median_per_size() {
        let records = runtime_scaling(&fiat500(), &[8, 16], 3).unwrap();
        assert_eq!(records.len(), 2);
        for r in &records {
            assert!(r.solve_s > 0.0);
            assert_eq!(r.status, SolveStatus::Optimal);
        }
        assert_eq!(records[0].n, 8);
        assert_eq!(records[1].n, 16);
    }

    #[test]
    fn random_batches_solve_and_summarize() {
        let config = RandomRoadConfig {
            points: 16,
            ..RandomRoadConfig::default()
        };
        let rows = random_batch(&fiat500(), &config, 100, 6, 3).unwrap();
        assert_eq!(rows.len(), 6);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.seed, 100 + i as u64);
            assert_eq!(row.status, SolveStatus::Optimal, "seed {}", row.seed);
            assert!(row.gap.is_finite());
        }
        let summary = summarize_batch(&rows);
        assert_eq!(summary.count, 6);
        assert_eq!(summary.solved, 6);
        assert!(summary.mean_solve_s > 0.0);
        assert!(summary.median_solve_s > 0.0);
        assert!(summary.max_gap.is_finite());
        assert!(summary.apriori_all_exact);

        // Concurrency does not change outcomes.
        let rerun = random_batch(&fiat500(), &config, 100, 6, 1).unwrap();
        for (a, b) in rows.iter().zip(&rerun) {
            assert_eq!(a.gap, b.gap);
            assert_eq!(a.lambda, b.lambda);
            assert_eq!(a.certified_exact, b.certified_exact);
        }
    }

    #[test]
    fn profile_stats_on_a_hand_built_plan() {
        let instance: ProblemInstance<f64> = ProblemInstance {
            vehicle: VehicleParams::fiat500(),
            path: PathProfile {
                step: 10.0,
                slope_sin: vec![0.0, -0.1, 0.0, -0.2],
                w_max: vec![900.0; 5],
            },
            lambda: 0.0,
            w_init: 100.0,
        };
        let w = vec![100.0; 5];
        let force = vec![1.0, 2.0, -3.0, -4.0];
        let stats = profile_stats(&instance, &w, &force);
        // Two 10 m steps at 10 m/s: 36 km/h.
        assert!((stats.first_half_avg_kmh - 36.0).abs() < 1e-12);
        // Downhill steps are 1 and 3; the largest force there is 2 N.
        assert_eq!(stats.max_descent_force, Some(2.0));

        let flat: ProblemInstance<f64> = ProblemInstance {
            path: PathProfile {
                slope_sin: vec![0.0; 4],
                ..instance.path.clone()
            },
            ..instance
        };
        assert_eq!(profile_stats(&flat, &w, &force).max_descent_force, None);
    }

    #[test]
    fn summaries_of_empty_batches_stay_defined() {
        let summary = summarize_batch(&[]);
        assert_eq!(summary.count, 0);
        assert_eq!(summary.solved, 0);
        assert!(summary.mean_solve_s.is_nan());
        assert!(summary.max_gap.is_nan());
        assert!(summary.apriori_all_exact, "vacuously true");
    }
}
