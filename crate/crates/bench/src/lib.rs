//! Shared inputs for the benchmarks.

use weakident::{add_noise, simulate, system, NoiseSpec, ObservationSet, RunConfig};

/// Noisy reference data for `name` together with its recommended run configuration.
pub fn noisy_system(name: &str, sigma: f64) -> (ObservationSet, RunConfig) {
    let def = system(name).expect("registered system");
    let clean = simulate(&def).expect("simulation succeeds");
    let data = add_noise(
        &clean,
        NoiseSpec {
            sigma_nsr: sigma,
            seed: 0,
        },
    )
    .expect("valid noise level");
    (data, RunConfig::for_system(&def))
}
