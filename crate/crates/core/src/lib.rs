//! Exact two-photon scattering off two distant qubits coupled to a
//! bidirectional one-dimensional waveguide, in units `ħ = v_g = 1`.
//!
//! The pipeline runs from single-photon scattering through the closed-form
//! two-photon vertex and its effective reduction to on-shell amplitudes,
//! momentum densities and `g²(τ)`. [`oracle`] holds independent numerical
//! checks of every stage.

pub mod closed_form_vertex;
pub mod effective_objects;
pub mod error;
pub mod numeric;
pub mod observables;
pub mod oracle;
pub mod params;
pub mod scattering;
pub mod single_photon;

pub use closed_form_vertex::{
    compute_coefficients, compute_roots, BaseComponents, CoefficientSet, RootData, RootTracker, VertexContext,
    VertexPair,
};
pub use effective_objects::{f_functions, sigma_plus_plus, DoublyExcitedSector, EffectiveValues, Mode, VertexModel};
pub use error::{Error, Result};
pub use observables::{g2, g2_from_result, kink_indices, local_extrema, markov_ratio, CorrelationSeries};
pub use oracle::{
    kernel_f4, nystrom_solve, unitarity_budget, verify_f_boundary, BoundaryReport, BudgetReport, NystromSolution,
    OracleSystem,
};
pub use params::{EnergyShell, SystemParams};
pub use scattering::{
    default_density_grid, density_curves, DensityCurve, InputState, Photon, TwoPhotonResult, TwoPhotonSolver,
};
pub use single_photon::{s1_matrix, unitarity_residual};
