//! Acceptance checks, run with a custom harness: every criterion prints one
//! `PASS`/`FAIL` line and the binary exits non-zero if any of them failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use segpower_core::covspec::CovariateSpec;
use segpower_core::datasets::sat_critical_reading;
use segpower_core::model::{build_design, fit_null_gaussian, DesignMatrix};
use segpower_core::normal::Alternative;
use segpower_core::power::{
    compute_power, expected_s0, fit_segmented, posthoc_power, power_design, sample_size, PowerRequest,
};
use segpower_core::pscore::{
    estimate_changepoint, pscore_statistic, DispersionMode, PScoreOptions, SegmentKind, SegmentedTermSpec,
};
use segpower_core::rng::{replicate_rng, RCompatRng};
use segpower_core::simlab::{rejection_rates, table2_scenarios, table3_scenarios, TestKind};
use segpower_core::tfcp::{t_max, w_max_test};
use segpower_core::Series;

/// Fixed seed for every acceptance simulation.
const SEED: u64 = 2024;

static FAILURES: AtomicUsize = AtomicUsize::new(0);

fn verdict(name: &str, ok: bool, detail: &str) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        FAILURES.fetch_add(1, Ordering::SeqCst);
    }
}

const TABLE2: [(usize, [f64; 8]); 4] = [
    (20, [0.044, 0.048, 0.081, 0.081, 0.126, 0.101, 0.429, 0.336]),
    (30, [0.042, 0.057, 0.085, 0.080, 0.202, 0.162, 0.584, 0.544]),
    (40, [0.052, 0.044, 0.099, 0.074, 0.262, 0.220, 0.744, 0.698]),
    (50, [0.054, 0.052, 0.112, 0.088, 0.314, 0.244, 0.813, 0.765]),
];

const TABLE3: [(usize, [f64; 8]); 4] = [
    (20, [0.054, 0.031, 0.130, 0.087, 0.294, 0.222, 0.433, 0.385]),
    (30, [0.050, 0.042, 0.168, 0.141, 0.421, 0.378, 0.654, 0.624]),
    (40, [0.045, 0.058, 0.201, 0.175, 0.530, 0.475, 0.807, 0.783]),
    (50, [0.050, 0.064, 0.222, 0.189, 0.618, 0.587, 0.872, 0.866]),
];

fn compare_table(
    family: &str,
    table: &[(usize, [f64; 8])],
    deltas: [f64; 4],
    tests: [TestKind; 2],
    got: &segpower_core::simlab::RejectionTable,
    tol: f64,
) -> (bool, Vec<String>) {
    let mut misses = Vec::new();
    for (n, published) in table {
        for (d, &delta) in deltas.iter().enumerate() {
            for (t, &test) in tests.iter().enumerate() {
                let want = published[2 * d + t];
                let rate = got.rate(family, test, *n, delta).expect("cell present");
                if (rate - want).abs() > tol {
                    misses.push(format!("{} n={n} d={delta}: {rate:.3} vs {want:.3}", test.name()));
                }
            }
        }
    }
    (misses.is_empty(), misses)
}

fn table2_normal_rejection_rates() {
    let start = Instant::now();
    let table = rejection_rates(&table2_scenarios(), &[TestKind::PScore, TestKind::W], 1000, 0.05, SEED).unwrap();
    let elapsed = start.elapsed();
    let (ok, misses) = compare_table("normal", &TABLE2, [0.0, 0.25, 0.5, 1.0], [TestKind::PScore, TestKind::W], &table, 0.04);
    let fast = elapsed < Duration::from_secs(120);
    verdict(
        "table2 (32 cells within 0.04, < 2 min)",
        ok && fast,
        &format!("{:.1}s; {} misses {:?}", elapsed.as_secs_f64(), misses.len(), misses),
    );
}

fn table3_binary_rejection_rates() {
    let start = Instant::now();
    let table = rejection_rates(&table3_scenarios(), &[TestKind::PScore, TestKind::L], 1000, 0.05, SEED).unwrap();
    let elapsed = start.elapsed();
    let (ok, misses) = compare_table("binary", &TABLE3, [0.0, 1.0, 2.0, 3.0], [TestKind::PScore, TestKind::L], &table, 0.05);
    let fast = elapsed < Duration::from_secs(180);
    verdict(
        "table3 (32 cells within 0.05, < 3 min)",
        ok && fast,
        &format!("{:.1}s; {} misses {:?}", elapsed.as_secs_f64(), misses.len(), misses),
    );
}

fn sat_case() {
    let sat = sat_critical_reading();
    let w = w_max_test(&sat, 0.05).unwrap();
    let x = DesignMatrix::intercept_only(sat.len()).unwrap();
    let z = sat.covariate();
    let spec = SegmentedTermSpec::from_covariate(z.clone(), SegmentKind::Jump, 10).unwrap();
    let p = pscore_statistic(&sat.y, &x, &spec, &PScoreOptions::default()).unwrap();
    let psi_hat = estimate_changepoint(&sat.y, &x, &z, SegmentKind::Jump, None).unwrap();
    let cv = w.critical_value.unwrap();

    let w_year = sat.label(w.change_index());
    let p_year = sat.label(z.iter().position(|&v| v > psi_hat).unwrap());
    let checks = [
        ("W 7.65±0.01", (w.w_max - 7.65).abs() <= 0.01, format!("{:.3}", w.w_max)),
        ("critical 3.34±0.005", (cv - 3.34).abs() <= 0.005, format!("{cv:.4}")),
        ("reject", w.reject == Some(true), format!("{:?}", w.reject)),
        ("changepoint 2006", w_year == "2006" && p_year == "2006", format!("W {w_year}, P.Score {p_year}")),
        ("p in [1e-4, 1e-3]", (1e-4..=1e-3).contains(&p.p_value), format!("{:.5}", p.p_value)),
    ];
    let ok = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, pass, v)| format!("{name} {} ({v})", if *pass { "ok" } else { "MISS" }))
        .collect();
    verdict("sat case", ok, &detail.join("; "));
}

/// Broken-line data `y = δ (z - ψ)₊ + σ ε` tested with the `[1, z]` null model.
fn broken_line_rejection(n: usize, psi: f64, delta: f64, sigma: f64, alpha: f64, reps: usize) -> f64 {
    let z: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let x = build_design(n, &[z.clone()], true).unwrap();
    let spec = SegmentedTermSpec::from_covariate(z.clone(), SegmentKind::BrokenLine, 10).unwrap();
    let rejections: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(SEED, rep as u64);
            let y: Vec<f64> = z
                .iter()
                .map(|&v| delta * (v - psi).max(0.0) + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let r = pscore_statistic(&y, &x, &spec, &PScoreOptions::default()).unwrap();
            usize::from(r.p_value < alpha)
        })
        .sum();
    rejections as f64 / reps as f64
}

fn analytic_power_anchor() {
    let req = PowerRequest::at_n(100, CovariateSpec::Equispaced, 0.6, 0.5, 0.1);
    let power = compute_power(&req).unwrap().power;
    let mc = broken_line_rejection(100, 0.6, 0.5, 0.1, 0.01, 1000);
    let ok = (power - 0.749).abs() <= 0.005 && (mc - power).abs() <= 0.03;
    verdict(
        "analytic power 0.749±0.005, MC within 0.03",
        ok,
        &format!("power {power:.4}, 1000-rep MC {mc:.3}"),
    );
}

fn sample_size_anchor() {
    let req = PowerRequest::for_target(0.85, CovariateSpec::Normal { mu: 5.0, sd: 1.5 }, 5.5, 0.04, 0.05);
    let res = sample_size(&req).unwrap();
    let ok = res.n.abs_diff(114) <= 2 && res.power_at_n >= 0.85;
    verdict(
        "sample size 114±2 with power ≥ 0.85",
        ok,
        &format!("n = {}, power {:.4}", res.n, res.power_at_n),
    );
}

fn posthoc_anchor() {
    // set.seed(123); 1000 replicates of y = 0.5 (z - 0.6)₊ + 0.1 ε, keep the last
    let n = 100;
    let z: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let mut rng = RCompatRng::new(123);
    let mut y = Vec::new();
    for _ in 0..1000 {
        y = z.iter().map(|&v| 0.5 * (v - 0.6).max(0.0) + 0.1 * rng.norm_rand()).collect();
    }
    let x = build_design(n, &[z.clone()], true).unwrap();
    let fit = fit_segmented(&y, &x, &z).unwrap();
    let res = posthoc_power(&fit, &z, &x, 0.01, Alternative::TwoSided, Some(500), SEED).unwrap();
    let iv = res.interval.clone().unwrap();
    let point_ok = (res.power - 0.867).abs() <= 0.05;
    let width_ok = iv.upper - iv.lower > 0.5;
    let contains = iv.lower <= res.power && res.power <= iv.upper;
    verdict(
        "posthoc power 0.867±0.05, 500-draw interval wide and covering",
        point_ok && width_ok && contains,
        &format!(
            "power {:.3} (psi {:.3}, delta {:.3}, sigma {:.4}); interval ({:.3}, {:.3})",
            res.power, fit.psi_hat, fit.delta_hat, fit.sigma_hat, iv.lower, iv.upper
        ),
    );
}

/// Two-sided Kolmogorov p-value for statistic `d` from `m` observations.
fn kolmogorov_p(d: f64, m: usize) -> f64 {
    let x = d * (m as f64).sqrt();
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn ks_null_calibration() -> (bool, String) {
    let n = 30;
    let reps = 20_000;
    let z: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let x = DesignMatrix::intercept_only(n).unwrap();
    let spec = SegmentedTermSpec::from_covariate(z, SegmentKind::Jump, 10).unwrap();
    let opts = PScoreOptions {
        dispersion: DispersionMode::Supplied(0.09),
        ..Default::default()
    };
    let mut s: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(SEED, rep as u64);
            let y: Vec<f64> = (0..n).map(|_| 2.0 + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
            pscore_statistic(&y, &x, &spec, &opts).unwrap().s0
        })
        .collect();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = segpower_core::normal::cdf(v);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max);
    let p = kolmogorov_p(d, reps);
    (p > 0.001, format!("KS D={d:.4} p={p:.3}"))
}

fn alternative_mean_cross_check() -> (bool, String) {
    let n = 30;
    let (psi, delta, sigma) = (0.5, 1.0, 0.3);
    let reps = 20_000;
    let z: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let x = power_design(&z, None).unwrap();
    let e1 = expected_s0(&z, psi, delta, sigma, &x).unwrap();
    let spec = SegmentedTermSpec::from_covariate(z.clone(), SegmentKind::BrokenLine, 10).unwrap();
    let opts = PScoreOptions {
        dispersion: DispersionMode::Supplied(sigma * sigma),
        ..Default::default()
    };
    let s: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(SEED + 1, rep as u64);
            let y: Vec<f64> = z
                .iter()
                .map(|&v| 1.0 + 0.2 * v + delta * (v - psi).max(0.0) + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            pscore_statistic(&y, &x, &spec, &opts).unwrap().s0
        })
        .collect();
    let mean = s.iter().sum::<f64>() / reps as f64;
    let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let se = sd / (reps as f64).sqrt();
    ((mean - e1).abs() <= 3.0 * se, format!("E1 {e1:.4} vs MC {mean:.4} (se {se:.4})"))
}

fn hat_matrix_properties() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(6..40);
        let p = rng.random_range(1..5);
        let cols: Vec<Vec<f64>> = (0..p - 1).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let x = build_design(n, &cols, true).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let a = fit_null_gaussian(&y, &x).unwrap().hat;
        worst = worst
            .max((&a * &a - &a).amax())
            .max((a.trace() - p as f64).abs())
            .max((&a - a.transpose()).amax());
    }
    (worst < 1e-8, format!("hat worst deviation {worst:.1e}"))
}

fn t_max_affine_invariance() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut same_j = true;
    for _ in 0..100 {
        let n = rng.random_range(4..60);
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let a = rng.random_range(-100.0..100.0);
        let b = rng.random_range(0.1..10.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let base = t_max(&Series::new(y.clone())).unwrap();
        let moved = t_max(&Series::new(y.iter().map(|v| a + b * v).collect())).unwrap();
        worst = worst.max((base.t_max - moved.t_max).abs());
        same_j &= base.j_hat == moved.j_hat;
    }
    (worst < 1e-9 && same_j, format!("T_max worst change {worst:.1e}, j_hat stable {same_j}"))
}

fn power_monotonicity() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut ok = true;
    for _ in 0..50 {
        let n = rng.random_range(20..200);
        let delta = rng.random_range(0.05..1.0);
        let sigma = rng.random_range(0.05..1.0);
        let power = |n: usize, d: f64, s: f64| {
            compute_power(&PowerRequest::at_n(n, CovariateSpec::Equispaced, 0.5, d, s)).unwrap().power
        };
        let p = power(n, delta, sigma);
        let saturated = p >= 1.0 - 1e-15;
        ok &= power(n + 5, delta, sigma) >= p - 0.002;
        ok &= saturated || power(n, delta * 1.05, sigma) > p;
        ok &= saturated || power(n, delta, sigma * 1.05) < p;
    }
    (ok, "power non-decreasing in n, increasing in |δ|, decreasing in σ".into())
}

fn sample_size_bracketing() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut ok = true;
    for _ in 0..15 {
        let target = rng.random_range(0.2..0.95);
        let req = PowerRequest::for_target(
            target,
            CovariateSpec::Normal { mu: 5.0, sd: 1.5 },
            rng.random_range(4.5..6.5),
            rng.random_range(0.02..0.2),
            rng.random_range(0.02..0.2),
        );
        let got = sample_size(&req).unwrap();
        let at = |n: usize| {
            let mut r = req.clone();
            r.n = Some(n);
            r.target_power = None;
            compute_power(&r).unwrap().power
        };
        ok &= at(got.n) >= target;
        ok &= got.n == 5 || at(got.n - 1) < target;
    }
    (ok, "power(n) ≥ target > power(n - 1)".into())
}

fn simlab_determinism() -> (bool, String) {
    let scenarios: Vec<_> = table2_scenarios().into_iter().step_by(5).chain(table3_scenarios().into_iter().step_by(5)).collect();
    let tests = [TestKind::PScore, TestKind::W, TestKind::L];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| rejection_rates(&scenarios, &tests, 300, 0.05, SEED).unwrap().to_csv().unwrap())
    };
    let one = run(1);
    let ok = one == run(2) && one == run(8) && one == run(1);
    (ok, "CSV identical for 1, 2 and 8 workers".into())
}

fn property_suites() {
    let results = [
        ("null calibration", ks_null_calibration()),
        ("alternative mean", alternative_mean_cross_check()),
        ("hat matrix", hat_matrix_properties()),
        ("T_max affine", t_max_affine_invariance()),
        ("power monotone", power_monotonicity()),
        ("sample-size bracketing", sample_size_bracketing()),
        ("simlab determinism", simlab_determinism()),
    ];
    let ok = results.iter().all(|(_, (pass, _))| *pass);
    let detail: Vec<String> = results
        .iter()
        .map(|(name, (pass, d))| format!("{name} {} ({d})", if *pass { "ok" } else { "MISS" }))
        .collect();
    verdict("property suites", ok, &detail.join("; "));
}

fn main() {
    let criteria: [(&str, fn()); 7] = [
        ("table2", table2_normal_rejection_rates),
        ("table3", table3_binary_rejection_rates),
        ("sat case", sat_case),
        ("analytic power anchor", analytic_power_anchor),
        ("sample size anchor", sample_size_anchor),
        ("posthoc anchor", posthoc_anchor),
        ("property suites", property_suites),
    ];
    for (name, check) in criteria {
        if catch_unwind(AssertUnwindSafe(check)).is_err() {
            verdict(name, false, "panicked");
        }
    }
    let failed = FAILURES.load(Ordering::SeqCst);
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
