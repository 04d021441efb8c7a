//! Parameter sets shared by the benchmarks.

use waveqed::SystemParams;

/// Transparency configurations at increasing `ΓR`.
pub fn transparency_sweep() -> Vec<(String, SystemParams)> {
    [0.5, 1.0, 10.0]
        .into_iter()
        .map(|gr| (format!("gr{gr}"), SystemParams::transparency(2.0, gr)))
        .collect()
}

/// A configuration with no symmetry between the qubits.
pub fn generic() -> SystemParams {
    SystemParams::new(0.3, -0.7, 0.5, 0.9, 1.3, 0.4).expect("valid parameters")
}
