//! Temporary measurement harness (removed before release).

use velo_plan::exactness::exactness_report;
use velo_plan::formulation::solve_instance;
use velo_plan::scenarios::{benchmark_instance, fiat500, fiat500e, random_instance, RandomRoadConfig};
use velo_plan::SolverConfig;

#[test]
fn batch_probe() {
    let config = SolverConfig::default();
    let road = RandomRoadConfig::default();
    let mut n_fail = 0;
    let mut n_over = 0;
    let mut worst_posterior = 0.0_f64;
    for (name, vehicle) in [("500", fiat500()), ("500e", fiat500e())] {
        for seed in 0..100u64 {
            let instance = random_instance(&vehicle, &road, seed).unwrap();
            let run = solve_instance(&instance, &config).unwrap();
            let status = format!("{:?}", run.status);
            let rep = exactness_report(&instance, run.extracted.as_ref(), 1e-6).unwrap();
            let gap = rep.posterior_gap.unwrap_or(f64::NAN);
            let obj = run
                .extracted
                .as_ref()
                .map(|e| e.objective)
                .unwrap_or(f64::NAN);
            let bad = status != "Optimal" || !(gap <= 1e-6);
            if status != "Optimal" {
                n_fail += 1;
            } else if gap > 1e-6 {
                n_over += 1;
            }
            if status == "Optimal" && gap > worst_posterior {
                worst_posterior = gap;
            }
            if bad {
                let r = &run.conic_residuals;
                println!(
                    "{name} seed {seed}: {status} lambda {:.2e} obj {obj:.4e} res ({:.2e} {:.2e} {:.2e}) posterior {gap:.3e}",
                    instance.lambda, r.primal, r.dual, r.gap
                );
            }
        }
    }
    println!("fails: {n_fail}  posterior>1e-6 among Optimal: {n_over}");
    println!("worst posterior among Optimal: {worst_posterior:.3e}");

    for lambda in [0.0, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2] {
        let instance = benchmark_instance(&fiat500e(), lambda, 200).unwrap();
        let run = solve_instance(&instance, &config).unwrap();
        let rep = exactness_report(&instance, run.extracted.as_ref(), 1e-6).unwrap();
        let gap = rep.posterior_gap.unwrap_or(f64::NAN);
        println!(
            "bench lambda {lambda:.1e}: {:?} iters {} gap {gap:.3e}",
            run.status, run.iterations
        );
    }
}
