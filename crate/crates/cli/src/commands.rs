use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use waoss_core::mc::{write_replications_csv, Replication};
use waoss_core::{
    difference_panel, generate_panel, ingest, placebo_theta, read_panel, spec_test, summarize_quasi_stayers,
    BandwidthConfig, BandwidthRule, ColumnSpec, DgpSpec, DifferencedSample, EstimatorConfig, Experiment, GSpec,
    LongColumns, NonparametricConfig, PlaceboConfig, PlaceboEstimator, Result, StayerPolicy, ThetaEstimate,
    UnitObservation, WaossError, WideColumns,
};

use crate::args::{
    BandwidthArg, CoverageArgs, EstimateArgs, EstimatorArgs, EstimatorKind, ExperimentArgs, InputArgs, PlaceboArgs,
    RateArgs, SimulateArgs, SpecTestArgs,
};
use crate::format::{g6, opt};

fn column_spec(a: &InputArgs) -> ColumnSpec {
    let spec = if a.long {
        ColumnSpec::long(LongColumns {
            period: a.period.clone(),
            d: a.d.clone(),
            y: a.y.clone(),
            p0: a.p0.clone(),
            p1: a.p1.clone(),
            p2: a.p2.clone(),
        })
    } else {
        let name = |v: &Option<String>, default: &str| v.clone().unwrap_or_else(|| default.to_string());
        ColumnSpec::wide(WideColumns {
            d1: name(&a.d1, "d1"),
            d2: name(&a.d2, "d2"),
            y1: name(&a.y1, "y1"),
            y2: name(&a.y2, "y2"),
            d0: a.d0.clone(),
            y0: a.y0.clone(),
        })
    }
    .with_unit(a.unit.clone());
    match &a.weight {
        Some(w) => spec.with_weight(w.clone()),
        None => spec,
    }
}

fn stayer_policy(a: &InputArgs) -> StayerPolicy {
    let policy = if a.drop_stayers {
        StayerPolicy::drop()
    } else {
        StayerPolicy::error()
    };
    policy.with_tolerance(a.stayer_tol)
}

fn load(a: &InputArgs) -> Result<Vec<UnitObservation>> {
    read_panel(&a.input, &column_spec(a))
}

fn load_sample(a: &InputArgs) -> Result<DifferencedSample> {
    difference_panel(&load(a)?, stayer_policy(a))
}

fn rule(b: BandwidthArg) -> BandwidthRule {
    match b {
        BandwidthArg::Fixed(h) => BandwidthRule::Fixed(h),
        BandwidthArg::Silverman => BandwidthRule::Silverman,
        BandwidthArg::Cv => BandwidthRule::Cv,
    }
}

fn nonparametric_config(a: &EstimatorArgs) -> NonparametricConfig {
    NonparametricConfig {
        bandwidth: BandwidthConfig {
            h_d1: rule(a.bandwidth_d1),
            h_dd: rule(a.bandwidth_dd),
            kernel: a.kernel,
            ..BandwidthConfig::default()
        },
        n_boot: a.boot,
        seed: a.seed,
    }
}

fn estimator_config(a: &EstimatorArgs) -> EstimatorConfig {
    match a.estimator {
        EstimatorKind::Parametric => EstimatorConfig::Parametric { family: a.family },
        EstimatorKind::Nonparametric => EstimatorConfig::Nonparametric {
            config: nonparametric_config(a),
        },
        EstimatorKind::Twfe => EstimatorConfig::Twfe,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| WaossError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|source| WaossError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_family(family: &GSpec) -> String {
    format!(
        "{},{},{}",
        family.trend_degree, family.slope_d1_degree, family.slope_dd_degree
    )
}

fn print_estimate(est: &ThetaEstimate) {
    println!("estimator   {}", est.estimator);
    println!("n           {}", est.n);
    if est.n_dropped > 0 {
        println!("dropped     {}", est.n_dropped);
    }
    println!("theta_hat   {}", g6(est.theta_hat));
    println!("se          {}", opt(est.se));
    match est.ci {
        Some((l, u)) => println!("{}% ci      [{}, {}]", g6(100.0 * est.level), g6(l), g6(u)),
        None => println!("{}% ci      -", g6(100.0 * est.level)),
    }
    let d = &est.diagnostics;
    if let Some(f) = &d.family {
        println!("family      {}", print_family(f));
    }
    if let Some(bw) = &d.bandwidths_used {
        println!("bandwidths  h_d1={} h_dd={}", g6(bw.h_d1), g6(bw.h_dd));
    }
    if let Some(z) = d.zeta_hat {
        println!("zeta_hat    {}", g6(z));
    }
    if let Some(k) = d.fallback_points.filter(|k| *k > 0) {
        println!("fallbacks   {k}");
    }
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    let sample = load_sample(&a.input)?;
    let est = estimator_config(&a.estimator).estimate(&sample, a.estimator.level)?;
    print_estimate(&est);
    if !a.eta.is_empty() {
        println!();
        println!("{:>12} {:>8} {:>12}", "eta", "count", "weight_share");
        for row in summarize_quasi_stayers(&sample, &a.eta)? {
            println!("{:>12} {:>8} {:>12}", g6(row.eta), row.count, g6(row.weight_share));
        }
    }
    if let Some(out) = &a.out {
        write_json(out, &est.report())?;
    }
    Ok(())
}

pub fn placebo(a: &PlaceboArgs) -> Result<()> {
    let panel = load(&a.input)?;
    let estimator = match a.estimator.estimator {
        EstimatorKind::Parametric => PlaceboEstimator::Parametric(a.estimator.family),
        EstimatorKind::Nonparametric => PlaceboEstimator::Nonparametric(nonparametric_config(&a.estimator)),
        EstimatorKind::Twfe => {
            return Err(WaossError::InvalidArgument(
                "placebo supports the parametric and nonparametric estimators".into(),
            ))
        }
    };
    let cfg = PlaceboConfig {
        eta0: a.eta0,
        estimator,
        stayer_policy: stayer_policy(&a.input),
    };
    let est = placebo_theta(&panel, &cfg, a.estimator.level)?;
    print_estimate(&est.estimate);
    println!("retained    {} ({})", est.n_retained, g6(est.retained_share));
    if let Some(out) = &a.out {
        write_json(out, &est.report())?;
    }
    Ok(())
}

pub fn spec_test_cmd(a: &SpecTestArgs) -> Result<()> {
    let sample = load_sample(&a.input)?;
    let alt = a.alt_family.unwrap_or(GSpec::new(
        a.family.trend_degree + 1,
        a.family.slope_d1_degree,
        a.family.slope_dd_degree,
    ));
    let res = spec_test(&sample, a.family, alt, a.alpha)?;
    println!("null        {}", print_family(&a.family));
    println!("alternative {}", print_family(&alt));
    println!("statistic   {}", g6(res.statistic));
    println!("df          {}", res.df);
    println!("p_value     {}", g6(res.p_value));
    println!("alpha       {}", g6(res.alpha));
    println!("reject      {}", res.reject);
    if let Some(out) = &a.out {
        write_json(out, &res)?;
    }
    Ok(())
}

fn read_dgp(path: &Path) -> Result<DgpSpec> {
    let text = fs::read_to_string(path).map_err(|source| WaossError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    DgpSpec::from_toml(&text)
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let dgp = read_dgp(&a.dgp)?;
    let panel = generate_panel(&dgp, a.n, a.seed)?;
    match &a.out {
        Some(path) => ingest::write_wide_file(path, &panel, a.with_weight),
        None => {
            let stdout = std::io::stdout();
            ingest::write_wide(stdout.lock(), &panel, a.with_weight)
        }
    }
}

fn experiment(e: &ExperimentArgs, est: &EstimatorArgs) -> Result<Experiment> {
    Ok(Experiment::new(read_dgp(&e.dgp)?, estimator_config(est), est.seed)
        .with_oracle_draws(e.oracle_draws)
        .with_level(est.level))
}

fn write_csv(path: &Path, reps: &[Replication], target: f64) -> Result<()> {
    let mut file = create(path)?;
    write_replications_csv(&mut file, reps, target)?;
    file.flush().map_err(|source| WaossError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn coverage(a: &CoverageArgs) -> Result<()> {
    let mut report = experiment(&a.experiment, &a.estimator)?.coverage(a.n, a.experiment.reps)?;
    if !a.experiment.timing {
        report.wall_time_secs = None;
    }
    let s = &report.summary;
    println!(
        "oracle      {} (mc se {})",
        g6(report.oracle.value),
        g6(report.oracle.mc_se)
    );
    println!("n           {}", report.n);
    println!("reps        {}", report.reps);
    println!("mean_theta  {}", g6(s.mean_theta));
    println!("bias        {} (mc se {})", g6(s.bias), g6(s.bias_mc_se));
    println!("rmse        {}", g6(s.rmse));
    println!("coverage    {} at level {}", opt(report.coverage), g6(report.level));
    if let Some(t) = report.wall_time_secs {
        println!("wall_time   {}s", g6(t));
    }
    if let Some(path) = &a.experiment.csv {
        write_csv(path, &report.replications, report.oracle.value)?;
    }
    if let Some(out) = &a.experiment.out {
        write_json(out, &report)?;
    }
    Ok(())
}

pub fn rate(a: &RateArgs) -> Result<()> {
    let mut report = experiment(&a.experiment, &a.estimator)?.rate(&a.grid, a.experiment.reps)?;
    if !a.experiment.timing {
        report.wall_time_secs = None;
    }
    println!(
        "oracle      {} (mc se {})",
        g6(report.oracle.value),
        g6(report.oracle.mc_se)
    );
    println!("{:>10} {:>12} {:>12} {:>12}", "n", "rmse", "bias", "sd");
    for p in &report.points {
        println!(
            "{:>10} {:>12} {:>12} {:>12}",
            p.n,
            g6(p.rmse),
            g6(p.bias),
            g6(p.sd_theta)
        );
    }
    println!("slope       {}", opt(report.slope));
    if let Some(t) = report.wall_time_secs {
        println!("wall_time   {}s", g6(t));
    }
    if let Some(path) = &a.experiment.csv {
        write_csv(path, &report.replications, report.oracle.value)?;
    }
    if let Some(out) = &a.experiment.out {
        write_json(out, &report)?;
    }
    Ok(())
}
