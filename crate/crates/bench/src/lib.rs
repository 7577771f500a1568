//! Fixtures shared by the benchmarks in `benches/`.

use waoss_core::mc::dgp::Law;
use waoss_core::{difference_panel, generate_panel, DgpSpec, DifferencedSample, StayerPolicy};

/// Heterogeneous-slope DGP with a curved trend.
pub fn dgp() -> DgpSpec {
    let mut dgp = DgpSpec::constant_slope(
        1.0,
        Law::Uniform { low: 0.0, high: 2.0 },
        Law::Gaussian {
            mean: 0.5,
            sd: 1.0,
            truncate: 4.0,
        },
        1.0,
    );
    dgp.slope = vec![1.0, 1.0];
    dgp.tau_sd = 0.5;
    dgp.trend = vec![0.0, 1.0, -0.5];
    dgp.lipschitz_bound = dgp.max_abs_slope();
    dgp
}

pub fn sample(n: usize, seed: u64) -> DifferencedSample {
    let panel = generate_panel(&dgp(), n, seed).expect("valid dgp");
    difference_panel(&panel, StayerPolicy::error()).expect("no stayers")
}
