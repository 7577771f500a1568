//! Acceptance suite. Each test prints one `criterion NN PASS|FAIL` line
//! (visible with `--nocapture`) and then asserts.
//!
//! Expected values come from hand algebra, closed forms, or the brute-force
//! oracles in `waoss_core::mc`; none are fitted to the estimators' output.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use waoss_core::bootstrap::unit_bootstrap;
use waoss_core::mc::{dgp::Law, oracle_theta, oracle_zeta, PrePeriodSpec};
use waoss_core::parametric::theta_point;
use waoss_core::{
    difference_panel, estimate_parametric, estimate_twfe, fit_first_step, generate_panel, local_linear_g,
    placebo_theta, quasi_stayer_zeta, rng, spec_test, stats, BandwidthConfig, DgpSpec, DifferencedSample,
    EstimatorConfig, Experiment, GSpec, NonparametricConfig, PlaceboConfig, StayerPolicy,
};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:02} {tag} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn gaussian(mean: f64, sd: f64) -> Law {
    Law::Gaussian {
        mean,
        sd,
        truncate: 4.0,
    }
}

/// Multiplicative heterogeneity: slope τ(1 + d), τ ~ N(1, 0.5²), linear
/// trend. The default family (1,1,1) nests E[ΔY | D1, ΔD] exactly.
fn heterogeneous(noise_sd: f64) -> DgpSpec {
    let mut dgp = DgpSpec::constant_slope(1.0, Law::Uniform { low: 0.0, high: 2.0 }, gaussian(0.5, 1.0), noise_sd);
    dgp.slope = vec![1.0, 1.0];
    dgp.tau_sd = 0.5;
    dgp.trend = vec![0.3, 0.5];
    dgp.level = vec![1.0, -0.5];
    dgp.unit_effect_sd = 1.0;
    dgp.lipschitz_bound = dgp.max_abs_slope();
    dgp
}

fn sample_of(dgp: &DgpSpec, n: usize, seed: u64) -> DifferencedSample {
    difference_panel(&generate_panel(dgp, n, seed).unwrap(), StayerPolicy::error()).unwrap()
}

fn parametric() -> EstimatorConfig {
    EstimatorConfig::Parametric {
        family: GSpec::default(),
    }
}

#[test]
fn criterion_01_hand_oracle() {
    let start = Instant::now();
    // (dy, dd, d1) with (δ, ΔY) = (1,2), (−1,0), (2,3).
    let sample = DifferencedSample::from_triples(&[(2.0, 1.0, 1.0), (0.0, -1.0, 1.0), (3.0, 2.0, 0.0)]).unwrap();
    let g = GSpec::new(0, 0, 0);
    let fit = fit_first_step(&sample, g).unwrap();
    let theta = estimate_parametric(&sample, g, 0.95).unwrap().theta_hat;
    let beta = estimate_twfe(&sample, 0.95).unwrap().theta_hat;
    let elapsed = start.elapsed().as_secs_f64();
    let err = [
        (fit.lambda_hat[0] - 1.0).abs(),
        (fit.lambda_hat[1] - 1.0).abs(),
        (theta - 1.0).abs(),
        (beta - 1.0).abs(),
    ];
    let worst = err.iter().cloned().fold(0.0, f64::max);
    verdict(
        1,
        "hand oracle",
        worst < 1e-12 && elapsed < 1.0,
        format!(
            "lambda={:?} theta={theta} beta={beta} max err {worst:.1e} in {elapsed:.3}s",
            fit.lambda_hat
        ),
    );
}

#[test]
fn criterion_02_constant_slope_consistency() {
    let dgp = DgpSpec::constant_slope(2.0, Law::Uniform { low: 0.0, high: 1.0 }, gaussian(0.0, 1.0), 1.0);
    let rep = Experiment::new(dgp, parametric(), 2002)
        .consistency(20_000, 200)
        .unwrap();
    let s = rep.summary;
    verdict(
        2,
        "constant-slope consistency",
        s.bias.abs() < 3.0 * s.bias_mc_se,
        format!(
            "mean={:.6} oracle=2 |bias|={:.2e} < 3*{:.2e}",
            s.mean_theta,
            s.bias.abs(),
            s.bias_mc_se
        ),
    );
}

#[test]
fn criterion_03_heterogeneous_consistency() {
    let exp = Experiment::new(heterogeneous(1.0), parametric(), 2003).with_oracle_draws(10_000_000);
    let rep = exp.consistency(20_000, 200).unwrap();
    let s = rep.summary;
    let combined = (s.bias_mc_se.powi(2) + rep.oracle.mc_se.powi(2)).sqrt();
    verdict(
        3,
        "heterogeneous consistency",
        s.bias.abs() < 3.0 * combined,
        format!(
            "mean={:.6} oracle={:.6} (mc se {:.1e}) |bias|={:.2e} < 3*{:.2e}",
            s.mean_theta,
            rep.oracle.value,
            rep.oracle.mc_se,
            s.bias.abs(),
            combined
        ),
    );
}

#[test]
fn criterion_04_coverage() {
    let exp = Experiment::new(heterogeneous(1.0), parametric(), 2004).with_oracle_draws(10_000_000);
    let rep = exp.coverage(2_000, 500).unwrap();
    let c = rep.coverage.unwrap();
    verdict(
        4,
        "coverage",
        (0.92..=0.98).contains(&c),
        format!("coverage={c:.3} over {} reps", rep.reps),
    );
}

#[test]
fn criterion_05_plugin_vs_bootstrap() {
    let dgp = heterogeneous(1.0);
    let g = GSpec::default();
    let mut ratios: Vec<f64> = (0..50u64)
        .map(|k| {
            let sample = sample_of(&dgp, 2_000, rng::stream_seed(2005, k));
            let plug_in = estimate_parametric(&sample, g, 0.95).unwrap().se.unwrap();
            let boot = unit_bootstrap(&sample, 499, rng::stream_seed(20_051, k), 0.95, |s| theta_point(s, g)).unwrap();
            plug_in / boot.se
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = stats::quantile_sorted(&ratios, 0.5);
    verdict(
        5,
        "plug-in vs bootstrap se",
        (0.9..=1.1).contains(&median),
        format!("median ratio={median:.4} (range {:.3}..{:.3})", ratios[0], ratios[49]),
    );
}

const RATE_GRID: [usize; 4] = [500, 2_000, 8_000, 32_000];

#[test]
fn criterion_06_parametric_rate() {
    let exp = Experiment::new(heterogeneous(1.0), parametric(), 2006).with_oracle_draws(10_000_000);
    let rep = exp.rate(&RATE_GRID, 200).unwrap();
    let slope = rep.slope.unwrap();
    let rmse: Vec<String> = rep.points.iter().map(|p| format!("{:.4}", p.rmse)).collect();
    verdict(
        6,
        "parametric root-n rate",
        (-0.6..=-0.4).contains(&slope),
        format!("slope={slope:.3} rmse={rmse:?}"),
    );
}

/// Nonlinear trend with E[S] ≠ 0: the first-step error in g(·, 0) does not
/// average out, so the nonparametric rate shows through.
fn nonparametric_dgp() -> DgpSpec {
    let mut dgp = heterogeneous(1.0);
    dgp.trend = vec![0.0, 1.0, -1.0, 0.5];
    dgp
}

#[test]
fn criterion_07_nonparametric_rate() {
    let est = EstimatorConfig::Nonparametric {
        config: NonparametricConfig::default(),
    };
    let exp = Experiment::new(nonparametric_dgp(), est, 2007).with_oracle_draws(10_000_000);
    let rep = exp.rate(&RATE_GRID, 200).unwrap();
    let slope = rep.slope.unwrap();
    let rmse: Vec<String> = rep.points.iter().map(|p| format!("{:.4}", p.rmse)).collect();
    let bias: Vec<String> = rep.points.iter().map(|p| format!("{:.4}", p.bias)).collect();
    verdict(
        7,
        "nonparametric rate",
        (-0.55..=-0.28).contains(&slope),
        format!("slope={slope:.3} rmse={rmse:?} bias={bias:?}"),
    );
}

/// Curved effects, constant trend and little noise, so the O(η²)
/// quasi-stayer bias dominates the sampling error.
fn curvature_dgp() -> DgpSpec {
    let mut dgp = heterogeneous(0.02);
    dgp.slope = vec![1.0, 0.0, 1.0];
    dgp.trend = vec![0.5];
    dgp.unit_effect_sd = 0.0;
    dgp.tau_sd = 0.1;
    dgp.lipschitz_bound = dgp.max_abs_slope();
    dgp
}

#[test]
fn criterion_08_quasi_stayer_bias() {
    let dgp = curvature_dgp();
    let zeta0 = oracle_zeta(&dgp, 10, 0).unwrap();
    assert!(zeta0.closed_form);
    let (n, reps) = (20_000usize, 200u64);
    let sd_dd = {
        let s = sample_of(&dgp, 200_000, 1);
        let dd: Vec<f64> = s.units().iter().map(|u| u.dd).collect();
        stats::sample_sd(&dd)
    };
    let etas: Vec<f64> = [0.4, 0.2, 0.1, 0.05].iter().map(|m| m * sd_dd).collect();
    let h_d1 = 1.06 * (2.0 / 12f64.sqrt()) * (n as f64).powf(-0.2);
    let errors: Vec<Vec<f64>> = (0..reps)
        .map(|r| {
            let s = sample_of(&dgp, n, rng::stream_seed(2008, r));
            etas.iter()
                .map(|&eta| (quasi_stayer_zeta(&s, eta, h_d1).unwrap() - zeta0.value).abs())
                .collect()
        })
        .collect();
    let k = etas.len();
    let mean: Vec<f64> = (0..k)
        .map(|j| errors.iter().map(|e| e[j]).sum::<f64>() / reps as f64)
        .collect();
    // Paired Monte Carlo se of each consecutive difference.
    let diff_se: Vec<f64> = (0..k - 1)
        .map(|j| {
            let d: Vec<f64> = errors.iter().map(|e| e[j + 1] - e[j]).collect();
            stats::sample_sd(&d) / (reps as f64).sqrt()
        })
        .collect();
    let inversions: Vec<usize> = (0..k - 1).filter(|&j| mean[j + 1] > mean[j]).collect();
    let within_noise = inversions.iter().all(|&j| mean[j + 1] - mean[j] < 3.0 * diff_se[j]);
    verdict(
        8,
        "quasi-stayer bias bound",
        inversions.len() <= 1 && within_noise,
        format!(
            "zeta0={:.5} mean|err|={:?} inversions={:?}",
            zeta0.value,
            mean.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>(),
            inversions
        ),
    );
}

#[test]
fn criterion_09_local_linear_exactness() {
    let mut r = rng::stream(2009, 0);
    use rand::Rng;
    let triples: Vec<(f64, f64, f64)> = (0..2_000)
        .map(|_| {
            let d1: f64 = r.random_range(0.0..2.0);
            let mut dd: f64 = r.random_range(-1.0..1.0);
            if dd == 0.0 {
                dd = 0.5;
            }
            (0.7 - 1.3 * d1 + 2.1 * dd, dd, d1)
        })
        .collect();
    let sample = DifferencedSample::from_triples(&triples).unwrap();
    let points: Vec<(f64, f64)> = (1..20).map(|i| (0.1 * i as f64, 0.0)).collect();
    let fits = local_linear_g(&sample, &points, &BandwidthConfig::default()).unwrap();
    let worst = points
        .iter()
        .zip(&fits)
        .map(|(p, f)| (f.value - (0.7 - 1.3 * p.0)).abs())
        .fold(0.0, f64::max);
    verdict(
        9,
        "local-linear exactness",
        worst < 1e-8,
        format!("max error {worst:.2e} at 19 interior points"),
    );
}

#[test]
fn criterion_10_spec_test_size_and_power() {
    let null = GSpec::new(1, 1, 1);
    let alt = GSpec::new(2, 1, 1);
    let rejections = |dgp: &DgpSpec, n: usize, reps: u64, root: u64| -> f64 {
        let hits = (0..reps)
            .filter(|&r| {
                let s = sample_of(dgp, n, rng::stream_seed(root, r));
                spec_test(&s, null, alt, 0.05).unwrap().reject
            })
            .count();
        hits as f64 / reps as f64
    };
    let size = rejections(&heterogeneous(1.0), 2_000, 500, 2010);
    let mut misspecified = heterogeneous(1.0);
    misspecified.trend = vec![0.3, 0.5, 0.25];
    let power = rejections(&misspecified, 5_000, 200, 2011);
    verdict(
        10,
        "specification test size and power",
        (0.02..=0.09).contains(&size) && power > 0.5,
        format!("size={size:.3} power={power:.3}"),
    );
}

#[test]
fn criterion_11_placebo_centering() {
    let mut dgp = heterogeneous(1.0);
    dgp.pre_period = Some(PrePeriodSpec {
        dd0: gaussian(0.0, 0.5),
        trend: vec![0.2, 0.4],
    });
    let cfg = PlaceboConfig::parametric(0.1, GSpec::default());
    let reps = 200u64;
    let centered = (0..reps)
        .filter(|&r| {
            let panel = generate_panel(&dgp, 5_000, rng::stream_seed(20_111, r)).unwrap();
            let est = placebo_theta(&panel, &cfg, 0.95).unwrap().estimate;
            est.theta_hat.abs() <= 3.0 * est.se.unwrap()
        })
        .count();
    let share = centered as f64 / reps as f64;
    verdict(
        11,
        "placebo centering",
        share >= 0.9,
        format!("{centered}/{reps} within 3 se of 0"),
    );
}

fn run(args: &[&str], dir: &Path) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_waoss"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

#[test]
fn criterion_12_determinism() {
    let mut dgp = heterogeneous(1.0);
    dgp.pre_period = Some(PrePeriodSpec {
        dd0: gaussian(0.0, 0.5),
        trend: vec![],
    });
    let invocations: Vec<Vec<&str>> = vec![
        vec![
            "simulate",
            "--dgp",
            "dgp.toml",
            "--n",
            "2000",
            "--seed",
            "7",
            "--out",
            "panel.csv",
        ],
        vec![
            "estimate",
            "--input",
            "panel.csv",
            "--d1",
            "d1",
            "--d2",
            "d2",
            "--y1",
            "y1",
            "--y2",
            "y2",
            "--estimator",
            "nonparametric",
            "--boot",
            "60",
            "--seed",
            "11",
            "--eta",
            "0.05,0.1",
            "--out",
            "np.json",
        ],
        vec![
            "placebo",
            "--input",
            "panel.csv",
            "--d1",
            "d1",
            "--d2",
            "d2",
            "--y1",
            "y1",
            "--y2",
            "y2",
            "--d0",
            "d0",
            "--y0",
            "y0",
            "--eta0",
            "0.2",
            "--seed",
            "3",
            "--out",
            "placebo.json",
        ],
        vec![
            "spec-test",
            "--input",
            "panel.csv",
            "--d1",
            "d1",
            "--d2",
            "d2",
            "--y1",
            "y1",
            "--y2",
            "y2",
            "--out",
            "spec.json",
        ],
        vec![
            "coverage",
            "--dgp",
            "dgp.toml",
            "--n",
            "500",
            "--reps",
            "20",
            "--oracle-draws",
            "200000",
            "--seed",
            "5",
            "--out",
            "cov.json",
            "--csv",
            "cov.csv",
        ],
        vec![
            "rate",
            "--dgp",
            "dgp.toml",
            "--grid",
            "200,400,800",
            "--reps",
            "10",
            "--oracle-draws",
            "200000",
            "--estimator",
            "nonparametric",
            "--boot",
            "0",
            "--seed",
            "9",
            "--out",
            "rate.json",
        ],
    ];
    let files = [
        "panel.csv",
        "np.json",
        "placebo.json",
        "spec.json",
        "cov.json",
        "cov.csv",
        "rate.json",
    ];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("dgp.toml"), dgp.to_toml()).unwrap();
        let mut bytes: Vec<Vec<u8>> = invocations.iter().map(|a| run(a, dir.path())).collect();
        bytes.extend(files.iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()));
        runs.push(bytes);
    }
    let differing: Vec<usize> = (0..runs[0].len()).filter(|&i| runs[0][i] != runs[1][i]).collect();
    verdict(
        12,
        "determinism",
        differing.is_empty(),
        format!(
            "{} invocations and {} files compared, differing={differing:?}",
            invocations.len(),
            files.len()
        ),
    );
}

#[test]
fn oracle_is_deterministic_and_closed_form_where_expected() {
    let dgp = heterogeneous(1.0);
    let a = oracle_theta(&dgp, 100_000, 1).unwrap();
    let b = oracle_theta(&dgp, 100_000, 1).unwrap();
    assert_eq!(a, b);
    assert!(!a.closed_form);
}
