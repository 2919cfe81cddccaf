//! Ready-made problem instances.
//!
//! Three families, all over the two vehicle presets:
//!
//! * a **power-starved climb** on which the relaxation is provably not
//!   exact — the solver "stops the clock" by letting the relaxed time
//!   variable detach from the speed on the descent into the hill;
//! * a fixed 600 m **benchmark road** with speed-limit zones and a
//!   hill, used for runtime measurements and the Pareto sweeps;
//! * seeded **random roads** with spline-smoothed grades and random
//!   speed zones, used for bulk exactness statistics.
//!
//! Everything here is `f64`; the generic core does not depend on it.

use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{squared_speed_from_kmh, PathProfile, ProblemInstance, VehicleParams};
use crate::{Error, Instance, Path, Vehicle};

/// A named vehicle with its factory speed cap (m²/s²), which bounds every
/// per-point speed limit an instance may impose.
#[derive(Debug, Clone, Copy)]
pub struct VehiclePreset {
    pub name: &'static str,
    pub params: Vehicle,
    /// Squared top speed, m²/s².
    pub speed_cap: f64,
}

/// Combustion city car: 50.75 kW, no regenerative braking, 160 km/h top
/// speed.
pub fn fiat500() -> VehiclePreset {
    VehiclePreset {
        name: "fiat500",
        params: VehicleParams::fiat500(),
        speed_cap: 1975.0,
    }
}

/// Electric variant: 87 kW, recovers 70% of braking energy, 150 km/h top
/// speed.
pub fn fiat500e() -> VehiclePreset {
    VehiclePreset {
        name: "fiat500e",
        params: VehicleParams::fiat500e(),
        speed_cap: 1736.0,
    }
}

/// Looks a preset up by name.
pub fn preset(name: &str) -> Result<VehiclePreset, Error> {
    match name {
        "fiat500" => Ok(fiat500()),
        "fiat500e" => Ok(fiat500e()),
        other => Err(Error::InvalidParameter(format!(
            "unknown vehicle preset {other:?} (available: fiat500, fiat500e)"
        ))),
    }
}

/// Both presets, in a stable order.
pub fn all_presets() -> [VehiclePreset; 2] {
    [fiat500(), fiat500e()]
}

/// The λ grid shared by the Pareto sweeps and the random instances:
/// pure minimum time plus 100 logarithmically spaced weights spanning
/// `[1e-7, 1e-2]`.
pub fn lambda_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(101);
    grid.push(0.0);
    let (lo, hi) = (1e-7f64.ln(), 1e-2f64.ln());
    for k in 0..100 {
        let t = k as f64 / 99.0;
        grid.push((lo + t * (hi - lo)).exp());
    }
    // Rounding in exp(ln x) can nudge the endpoints off by an ulp.
    grid[1] = 1e-7;
    grid[100] = 1e-2;
    grid
}

/// A 200 m climb at 22.5° in the middle of a 600 m road, driven by a
/// power-limited car on a wet surface (engine derated to 12.5 kW, friction
/// 0.3). Minimum-time, standing start. The car cannot hold the critical
/// speed on the climb, so the relaxed time bound goes slack on the
/// approach: the relaxation solves to optimality but is not a speed plan.
pub fn power_starved_climb() -> Instance {
    let mut vehicle = VehicleParams::fiat500();
    vehicle.max_power = 12_500.0;
    vehicle.friction = 0.3;
    let n = 200;
    let incline = 22.5f64.to_radians().sin();
    let slope_sin = (0..n - 1)
        .map(|i| if (66..=132).contains(&i) { incline } else { 0.0 })
        .collect();
    ProblemInstance {
        vehicle,
        path: PathProfile {
            step: 1.0,
            slope_sin,
            w_max: vec![1975.0; n],
        },
        lambda: 0.0,
        w_init: 0.1,
    }
}

/// Grade of the benchmark road at arc position `s` (rise over run).
fn benchmark_grade(s: f64) -> f64 {
    if (100.0..250.0).contains(&s) {
        0.04
    } else if (350.0..500.0).contains(&s) {
        -0.04
    } else {
        0.0
    }
}

/// Speed limit of the benchmark road at arc position `s`, km/h.
fn benchmark_limit_kmh(s: f64) -> f64 {
    if s < 200.0 {
        70.0
    } else if s < 400.0 {
        90.0
    } else {
        30.0
    }
}

/// The fixed 600 m benchmark road at `n` sampling points: a 4% climb from
/// 100 m to 250 m, a matching 4% descent from 350 m to 500 m, and
/// 70/90/30 km/h speed zones in 200 m blocks. Standing start. Piecewise
/// data is sampled at the left endpoint of each step. The step length is
/// `600/n`, so the sampled road ends one step short of the nominal length.
pub fn benchmark_instance(
    preset: &VehiclePreset,
    lambda: f64,
    n: usize,
) -> Result<Instance, Error> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "benchmark road needs at least 2 sampling points, got {n}"
        )));
    }
    let step = 600.0 / n as f64;
    let slope_sin = (0..n - 1)
        .map(|i| {
            let grade = benchmark_grade(i as f64 * step);
            grade / grade.hypot(1.0)
        })
        .collect();
    let w_max = (0..n)
        .map(|i| {
            let limit = squared_speed_from_kmh(benchmark_limit_kmh(i as f64 * step))
                .expect("positive speed limit");
            limit.min(preset.speed_cap)
        })
        .collect();
    Ok(ProblemInstance {
        vehicle: preset.params,
        path: PathProfile {
            step,
            slope_sin,
            w_max,
        },
        lambda,
        w_init: 0.1,
    })
}

/// How the random roads are drawn.
#[derive(Debug, Clone)]
pub struct RandomRoadConfig {
    /// Sampling points per instance.
    pub points: usize,
    /// Total road length, m.
    pub length: f64,
    /// Grades are drawn from `[-grade_bound, grade_bound]` at the spline
    /// knots and the spline is clamped back into that range.
    pub grade_bound: f64,
    /// Speed-limit menu for the random zones, km/h. The vehicle's own top
    /// speed is always appended.
    pub speed_menu_kmh: Vec<f64>,
    /// Trade-off weights to draw from.
    pub lambda_grid: Vec<f64>,
}

impl Default for RandomRoadConfig {
    fn default() -> Self {
        RandomRoadConfig {
            points: 200,
            length: 600.0,
            grade_bound: 0.05,
            speed_menu_kmh: vec![30.0, 50.0, 70.0, 90.0, 110.0, 130.0],
            lambda_grid: lambda_grid(),
        }
    }
}

/// Natural cubic spline through equally informative knots: returns the
/// second derivatives at the knots (zero at both ends), from the standard
/// tridiagonal system solved by the Thomas algorithm.
fn natural_spline_m(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Interior equations: (h_{i-1}/6) m_{i-1} + ((h_{i-1}+h_i)/3) m_i
    // + (h_i/6) m_{i+1} = dy_i/h_i - dy_{i-1}/h_{i-1}.
    let mut diag = vec![0.0; n - 2];
    let mut upper = vec![0.0; n - 2];
    let mut rhs = vec![0.0; n - 2];
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        diag[i - 1] = (h0 + h1) / 3.0;
        upper[i - 1] = h1 / 6.0;
        rhs[i - 1] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
    }
    // Forward elimination (the lower diagonal equals the previous upper).
    for i in 1..n - 2 {
        let factor = upper[i - 1] / diag[i - 1];
        diag[i] -= factor * upper[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    // Back substitution into the interior slots of m.
    m[n - 2] = rhs[n - 3] / diag[n - 3];
    for i in (1..n - 2).rev() {
        m[i] = (rhs[i - 1] - upper[i - 1] * m[i + 1]) / diag[i - 1];
    }
    m
}

/// Evaluates the natural cubic spline at `x`.
fn spline_eval(xs: &[f64], ys: &[f64], m: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let j = match xs[1..n - 1].iter().position(|&k| x < k) {
        Some(p) => p,
        None => n - 2,
    };
    let h = xs[j + 1] - xs[j];
    let a = (xs[j + 1] - x) / h;
    let b = (x - xs[j]) / h;
    a * ys[j]
        + b * ys[j + 1]
        + ((a * a * a - a) * m[j] + (b * b * b - b) * m[j + 1]) * h * h / 6.0
}

/// Draws a seeded random instance: grades from a natural cubic spline
/// through seven uniform knots, three equal-length speed zones from the
/// menu, and a trade-off weight from the grid. The same seed always
/// produces the same instance.
pub fn random_instance(
    preset: &VehiclePreset,
    config: &RandomRoadConfig,
    seed: u64,
) -> Result<Instance, Error> {
    if config.points < 2 {
        return Err(Error::InvalidParameter(format!(
            "random road needs at least 2 sampling points, got {}",
            config.points
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.points;
    let step = config.length / n as f64;

    // Grade knots every length/6 metres, spline through them, then sample
    // at step left endpoints and clamp back into the bound (the spline can
    // overshoot between knots).
    let knots_x: Vec<f64> = (0..7).map(|k| k as f64 * config.length / 6.0).collect();
    let knots_y: Vec<f64> = (0..7)
        .map(|_| rng.gen_range(-config.grade_bound..=config.grade_bound))
        .collect();
    let m = natural_spline_m(&knots_x, &knots_y);
    let slope_sin = (0..n - 1)
        .map(|i| {
            let grade = spline_eval(&knots_x, &knots_y, &m, i as f64 * step)
                .clamp(-config.grade_bound, config.grade_bound);
            grade / grade.hypot(1.0)
        })
        .collect();

    // Three speed zones; the menu is extended by the vehicle's top speed.
    let mut menu: Vec<f64> = config
        .speed_menu_kmh
        .iter()
        .map(|&kmh| squared_speed_from_kmh(kmh).expect("positive menu speed"))
        .collect();
    menu.push(preset.speed_cap);
    let zones: Vec<f64> = (0..3)
        .map(|_| menu[rng.gen_range(0..menu.len())].min(preset.speed_cap))
        .collect();
    let w_max = (0..n)
        .map(|i| {
            let s = i as f64 * step;
            let zone = ((s / (config.length / 3.0)) as usize).min(2);
            zones[zone]
        })
        .collect();

    let lambda = config.lambda_grid[rng.gen_range(0..config.lambda_grid.len())];
    Ok(ProblemInstance {
        vehicle: preset.params,
        path: PathProfile {
            step,
            slope_sin,
            w_max,
        },
        lambda,
        w_init: 0.1,
    })
}

/// One row of an elevation file: arc position, elevation, and optionally a
/// speed limit that applies from this position onward.
#[derive(Debug, serde::Deserialize)]
struct ElevationRow {
    s_m: f64,
    elev_m: f64,
    #[serde(default)]
    speed_kmh: Option<f64>,
}

/// Reads a road from CSV columns `s_m, elev_m[, speed_kmh]` and resamples
/// it at the given step length. Elevation is interpolated linearly; the
/// grade of each step is the elevation difference across it. A speed limit
/// applies from its row's position until the next row that sets one;
/// points before the first limit get `default_speed_kmh`. Any remainder of
/// the road shorter than one step is dropped.
pub fn load_elevation_csv<R: Read>(
    reader: R,
    step: f64,
    default_speed_kmh: f64,
) -> Result<Path, Error> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "step length must be positive, got {step}"
        )));
    }
    if !(default_speed_kmh > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "default speed limit must be positive, got {default_speed_kmh}"
        )));
    }
    let mut rows: Vec<ElevationRow> = Vec::new();
    for record in csv::Reader::from_reader(reader).deserialize() {
        let row: ElevationRow =
            record.map_err(|e| Error::MalformedInput(format!("elevation csv: {e}")))?;
        if !row.s_m.is_finite() || !row.elev_m.is_finite() {
            return Err(Error::MalformedInput(format!(
                "elevation csv: non-finite entry at s_m = {}",
                row.s_m
            )));
        }
        if let Some(last) = rows.last() {
            if row.s_m <= last.s_m {
                return Err(Error::MalformedInput(format!(
                    "elevation csv: arc positions must increase strictly \
                     ({} after {})",
                    row.s_m, last.s_m
                )));
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::MalformedInput(
            "elevation csv needs at least two rows".into(),
        ));
    }

    let origin = rows[0].s_m;
    let length = rows.last().unwrap().s_m - origin;
    let steps = (length / step + 1e-9).floor() as usize;
    if steps == 0 {
        return Err(Error::MalformedInput(format!(
            "road of {length} m is shorter than one {step} m step"
        )));
    }

    let elevation_at = |s: f64| -> f64 {
        let j = rows.partition_point(|r| r.s_m <= s).clamp(1, rows.len() - 1);
        let (a, b) = (&rows[j - 1], &rows[j]);
        let t = (s - a.s_m) / (b.s_m - a.s_m);
        a.elev_m + t * (b.elev_m - a.elev_m)
    };
    let limit_at = |s: f64| -> Option<f64> {
        rows[..rows.partition_point(|r| r.s_m <= s)]
            .iter()
            .rev()
            .find_map(|r| r.speed_kmh)
    };

    let slope_sin = (0..steps)
        .map(|i| {
            let s = origin + i as f64 * step;
            let grade = (elevation_at(s + step) - elevation_at(s)) / step;
            grade / grade.hypot(1.0)
        })
        .collect();
    let mut w_max = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let kmh = limit_at(origin + i as f64 * step).unwrap_or(default_speed_kmh);
        if !(kmh > 0.0) {
            return Err(Error::MalformedInput(format!(
                "elevation csv: speed limit must be positive, got {kmh}"
            )));
        }
        w_max.push(squared_speed_from_kmh(kmh)?);
    }
    Ok(PathProfile {
        step,
        slope_sin,
        w_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactness::{
        check_critical_condition, check_h_condition, check_wmax_condition, Verdict,
    };
    use crate::model::validate_instance;

    #[test]
    fn presets_expose_published_parameters() {
        let thermal = fiat500();
        assert_eq!(thermal.name, "fiat500");
        assert_eq!(thermal.params.mass, 967.0);
        assert_eq!(thermal.params.max_power, 50_750.0);
        assert_eq!(thermal.params.regen_fraction, 0.0);
        assert_eq!(thermal.speed_cap, 1975.0);

        let electric = fiat500e();
        assert_eq!(electric.params.mass, 1365.0);
        assert_eq!(electric.params.max_power, 87_000.0);
        assert_eq!(electric.params.regen_fraction, 0.7);
        assert_eq!(electric.speed_cap, 1736.0);

        assert_eq!(preset("fiat500e").unwrap().name, "fiat500e");
        assert!(matches!(
            preset("fiat600"),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn lambda_grid_shape() {
        let grid = lambda_grid();
        assert_eq!(grid.len(), 101);
        assert_eq!(grid[0], 0.0);
        assert!((grid[1] - 1e-7).abs() < 1e-20);
        assert!((grid[100] - 1e-2).abs() < 1e-15);
        assert!(grid.windows(2).all(|p| p[0] < p[1]));
        // Log-spacing: constant ratio between positive entries.
        let r = grid[2] / grid[1];
        for pair in grid[1..].windows(2) {
            assert!((pair[1] / pair[0] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn climb_scenario_matches_its_specification() {
        let instance = power_starved_climb();
        assert!(validate_instance(&instance).is_valid());
        assert_eq!(instance.vehicle.max_power, 12_500.0);
        assert_eq!(instance.vehicle.friction, 0.3);
        assert_eq!(instance.path.slope_sin.len(), 199);
        assert_eq!(instance.path.step, 1.0);
        assert_eq!(instance.lambda, 0.0);
        assert_eq!(instance.w_init, 0.1);
        assert!(instance.path.w_max.iter().all(|&w| w == 1975.0));

        let incline = 0.38268343236508977;
        for (i, &s) in instance.path.slope_sin.iter().enumerate() {
            if (66..=132).contains(&i) {
                assert!((s - incline).abs() < 1e-15, "step {i}");
            } else {
                assert_eq!(s, 0.0, "step {i}");
            }
        }
        // 66 flat, 67 climbing, 66 flat.
        let climbing = instance.path.slope_sin.iter().filter(|&&s| s > 0.0).count();
        assert_eq!(climbing, 67);
    }

    #[test]
    fn climb_scenario_defeats_the_apriori_cap_conditions() {
        // The step condition holds, but with the caps wide open neither
        // per-step condition can: the car cannot hold, nor accelerate
        // through, the critical window on the incline.
        let instance = power_starved_climb();
        assert_eq!(check_h_condition(&instance).verdict, Verdict::Holds);
        assert_eq!(check_wmax_condition(&instance).verdict, Verdict::Fails);
        let critical = check_critical_condition(&instance);
        assert_eq!(critical.verdict, Verdict::Fails);
        // Every step sits above the critical speed, so all are checked.
        assert_eq!(critical.index_set.len(), 199);
    }

    #[test]
    fn benchmark_road_samples_grades_and_limits_on_the_left() {
        let instance = benchmark_instance(&fiat500(), 0.0, 200).unwrap();
        assert!(validate_instance(&instance).is_valid());
        assert_eq!(instance.path.step, 3.0);

        // First zone: 70 km/h.
        assert!((instance.path.w_max[0] - 378.086419753086).abs() < 1e-10);
        // The last point sits at 597 m, inside the 30 km/h zone.
        assert!((instance.path.w_max[199] - 69.4444444444).abs() < 1e-9);

        let sine = 0.0399680383488716;
        let ups = instance
            .path
            .slope_sin
            .iter()
            .filter(|&&s| (s - sine).abs() < 1e-15)
            .count();
        let downs = instance
            .path
            .slope_sin
            .iter()
            .filter(|&&s| (s + sine).abs() < 1e-15)
            .count();
        let flats = instance.path.slope_sin.iter().filter(|&&s| s == 0.0).count();
        assert_eq!(ups + downs + flats, 199);
        assert!(ups > 0 && downs > 0);

        // The road returns to its start elevation: signed climb cancels.
        let net: f64 = instance
            .path
            .slope_sin
            .iter()
            .map(|s| s * instance.path.step)
            .sum();
        assert!(net.abs() < 1e-10, "net climb {net}");
        // Peak altitude near 6 m (50 climbing steps at 4% when n = 200).
        let mut altitude: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for &s in &instance.path.slope_sin {
            altitude += s * instance.path.step;
            peak = peak.max(altitude);
        }
        assert!((peak - 5.99520575233074).abs() < 1e-6, "peak {peak}");
    }

    #[test]
    fn benchmark_road_respects_the_electric_cap() {
        // 90 km/h squared is 625, under both caps; the electric preset's own
        // cap only binds where the menu exceeds it (it never does here).
        let instance = benchmark_instance(&fiat500e(), 1e-4, 50).unwrap();
        assert!(instance.path.w_max.iter().all(|&w| w <= 1736.0));
        assert!(benchmark_instance(&fiat500(), 0.0, 1).is_err());
    }

    #[test]
    fn random_roads_are_reproducible_and_in_bounds() {
        let config = RandomRoadConfig::default();
        let a = random_instance(&fiat500(), &config, 42).unwrap();
        let b = random_instance(&fiat500(), &config, 42).unwrap();
        assert_eq!(a.path.slope_sin, b.path.slope_sin);
        assert_eq!(a.path.w_max, b.path.w_max);
        assert_eq!(a.lambda, b.lambda);
        let c = random_instance(&fiat500(), &config, 43).unwrap();
        assert_ne!(a.path.slope_sin, c.path.slope_sin);

        let max_sine = 0.05 / 0.05f64.hypot(1.0);
        let menu_w: Vec<f64> = [30.0, 50.0, 70.0, 90.0, 110.0, 130.0]
            .iter()
            .map(|&kmh| squared_speed_from_kmh(kmh).unwrap())
            .chain([1975.0])
            .collect();
        for seed in 0..100 {
            let inst = random_instance(&fiat500(), &config, seed).unwrap();
            assert!(validate_instance(&inst).is_valid(), "seed {seed}");
            assert_eq!(inst.path.slope_sin.len(), 199);
            for &s in &inst.path.slope_sin {
                assert!(s.abs() <= max_sine + 1e-15, "seed {seed}: sine {s}");
            }
            for &w in &inst.path.w_max {
                assert!(
                    menu_w.iter().any(|&m| (m - w).abs() < 1e-12),
                    "seed {seed}: cap {w} not on the menu"
                );
            }
            assert!(inst.lambda == 0.0 || (1e-7..=1e-2).contains(&inst.lambda));
            // Zone boundaries at thirds of the road.
            assert_eq!(inst.path.w_max[0], inst.path.w_max[66]);
            assert_eq!(inst.path.w_max[67], inst.path.w_max[132]);
            assert_eq!(inst.path.w_max[134], inst.path.w_max[199]);
        }
    }

    #[test]
    fn random_roads_hit_both_lambda_kinds() {
        // λ = 0 is 1 of 101 grid entries, so give it room to show up:
        // missing it in 2000 draws has probability (100/101)^2000 ≈ 2e-9.
        let config = RandomRoadConfig::default();
        let mut zeros = 0;
        let mut positives = 0;
        for seed in 0..2000 {
            let inst = random_instance(&fiat500e(), &config, seed).unwrap();
            if inst.lambda == 0.0 {
                zeros += 1;
            } else {
                positives += 1;
            }
        }
        assert!(zeros > 0, "pure minimum time never drawn");
        assert!(positives > 1000, "weighted draws should dominate");
    }

    #[test]
    fn spline_interpolates_its_knots_exactly() {
        let xs = [0.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0];
        let ys = [0.01, -0.03, 0.05, 0.0, -0.05, 0.02, 0.04];
        let m = natural_spline_m(&xs, &ys);
        for (x, y) in xs.iter().zip(&ys) {
            assert!((spline_eval(&xs, &ys, &m, *x) - y).abs() < 1e-14);
        }
        // Natural ends: zero curvature.
        assert_eq!(m[0], 0.0);
        assert_eq!(m[6], 0.0);
        // A line stays a line under natural spline interpolation.
        let line_y: Vec<f64> = xs.iter().map(|x| 0.5 + 2e-4 * x).collect();
        let lm = natural_spline_m(&xs, &line_y);
        for k in 0..=60 {
            let x = k as f64 * 10.0;
            assert!((spline_eval(&xs, &line_y, &lm, x) - (0.5 + 2e-4 * x)).abs() < 1e-13);
        }
    }

    #[test]
    fn elevation_csv_round_trip() {
        // Flat 100 m road at 10 m steps: 10 steps, 11 points.
        let flat = "s_m,elev_m,speed_kmh\n0,10,\n100,10,\n";
        let path = load_elevation_csv(flat.as_bytes(), 10.0, 50.0).unwrap();
        assert_eq!(path.slope_sin.len(), 10);
        assert_eq!(path.w_max.len(), 11);
        assert!(path.slope_sin.iter().all(|&s| s == 0.0));
        let w50 = squared_speed_from_kmh(50.0).unwrap();
        assert!(path.w_max.iter().all(|&w| (w - w50).abs() < 1e-12));

        // A 4% ramp: elevation gain of 4 m over 100 m.
        let ramp = "s_m,elev_m\n0,0\n100,4\n";
        let path = load_elevation_csv(ramp.as_bytes(), 10.0, 50.0).unwrap();
        for &s in &path.slope_sin {
            assert!((s - 0.0399680383488716).abs() < 1e-13);
        }

        // Speed limits apply from their row onward.
        let zoned = "s_m,elev_m,speed_kmh\n0,0,30\n50,0,\n100,0,90\n150,0,\n200,0,\n";
        let path = load_elevation_csv(zoned.as_bytes(), 25.0, 50.0).unwrap();
        let w30 = squared_speed_from_kmh(30.0).unwrap();
        let w90 = squared_speed_from_kmh(90.0).unwrap();
        assert_eq!(path.w_max.len(), 9);
        for (i, &w) in path.w_max.iter().enumerate() {
            let expect = if i < 4 { w30 } else { w90 };
            assert!((w - expect).abs() < 1e-12, "point {i}");
        }
    }

    #[test]
    fn elevation_csv_rejects_malformed_files() {
        let unsorted = "s_m,elev_m\n0,0\n100,4\n50,2\n";
        assert!(matches!(
            load_elevation_csv(unsorted.as_bytes(), 10.0, 50.0),
            Err(Error::MalformedInput(_))
        ));
        let single = "s_m,elev_m\n0,0\n";
        assert!(matches!(
            load_elevation_csv(single.as_bytes(), 10.0, 50.0),
            Err(Error::MalformedInput(_))
        ));
        let garbage = "s_m,elev_m\n0,zero\n100,4\n";
        assert!(matches!(
            load_elevation_csv(garbage.as_bytes(), 10.0, 50.0),
            Err(Error::MalformedInput(_))
        ));
        let too_short = "s_m,elev_m\n0,0\n1,0\n";
        assert!(matches!(
            load_elevation_csv(too_short.as_bytes(), 10.0, 50.0),
            Err(Error::MalformedInput(_))
        ));
        let bad_limit = "s_m,elev_m,speed_kmh\n0,0,-5\n100,4,\n";
        assert!(matches!(
            load_elevation_csv(bad_limit.as_bytes(), 10.0, 50.0),
            Err(Error::MalformedInput(_))
        ));
    }
}
