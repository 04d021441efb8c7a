//! On-shell two-photon amplitudes, the elastic/inelastic split and momentum
//! densities over the `Δ'` grid.
//!
//! The two-photon S-matrix is stored as two singular kinematic structures
//! (momenta preserved, momenta exchanged) with coefficients built from
//! `S⁽¹⁾`, plus a regular on-shell amplitude `t(Δ')`:
//!
//! `S⁽²⁾ = S⁽¹⁾S⁽¹⁾ (sym.) − 2πi δ(E' − E) T(Δ')`.
//!
//! `T` is the bosonically symmetrized sum of four ordered terms
//! `v(α'₁,k'₁) M(k'₁) W(α'₂k'₂; α₂k₂) M(k₁) v†(α₁,k₁)`.

use nalgebra::{Matrix2, RowVector2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::effective_objects::{photon_basis, Mode, QubitTable, VertexModel};
use crate::error::{Error, Result};
use crate::params::{linspace, EnergyShell, SystemParams};
use crate::single_photon::{dressed_col, dressed_row, s1_matrix};

/// Half-width of the symmetric offset used to realize the principal value
/// where an outgoing momentum coincides with an incoming one.
pub const PV_OFFSET: f64 = 1e-4;

const SHELL_TOL: f64 = 1e-12;

/// A photon with channel index (0 = R, 1 = L) and momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photon {
    pub channel: usize,
    pub momentum: f64,
}

impl Photon {
    pub fn new(channel: usize, momentum: f64) -> Self {
        Self { channel, momentum }
    }
}

/// Incoming channel pair together with its energy shell.
#[derive(Debug, Clone, PartialEq)]
pub struct InputState {
    pub channels: (usize, usize),
    pub shell: EnergyShell,
}

impl InputState {
    pub fn new(channels: (usize, usize), shell: EnergyShell) -> Result<Self> {
        if channels.0 > 1 || channels.1 > 1 {
            return Err(Error::InvalidParameter(format!(
                "channel indices {channels:?} must be 0 (R) or 1 (L)"
            )));
        }
        Ok(Self { channels, shell })
    }

    pub fn photons(&self) -> [Photon; 2] {
        let (k1, k2) = self.shell.input_momenta();
        [Photon::new(self.channels.0, k1), Photon::new(self.channels.1, k2)]
    }
}

/// Amplitudes indexed `[α'₁][α'₂]`.
pub type ChannelAmplitudes = [[Complex64; 2]; 2];

/// Two-photon T-matrix evaluator at fixed total energy.
#[derive(Debug, Clone)]
pub struct TwoPhotonSolver {
    model: VertexModel,
}

impl TwoPhotonSolver {
    pub fn new(e: f64, p: &SystemParams, mode: Mode) -> Result<Self> {
        Ok(Self {
            model: VertexModel::new(e, p, mode)?,
        })
    }

    pub fn from_model(model: VertexModel) -> Self {
        Self { model }
    }

    pub fn params(&self) -> &SystemParams {
        &self.model.params
    }

    pub fn energy(&self) -> f64 {
        self.model.energy
    }

    pub fn mode(&self) -> Mode {
        self.model.mode
    }

    pub fn model(&self) -> &VertexModel {
        &self.model
    }

    fn check_shell(&self, a: f64, b: f64) -> Result<()> {
        let e = self.energy();
        if (a + b - e).abs() > SHELL_TOL * e.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "momenta {a} + {b} are off the shell E = {e}"
            )));
        }
        Ok(())
    }

    fn out_row(&self, ph: Photon) -> RowVector2<Complex64> {
        dressed_row(ph.channel, ph.momentum, self.params())
    }

    fn in_col(&self, ph: Photon) -> Vector2<Complex64> {
        dressed_col(ph.channel, ph.momentum, self.params())
    }

    /// One ordered term: photon `out[0]` and `inp[0]` couple through `M`,
    /// the second pair through the vertex.
    pub fn t2(&self, out: [Photon; 2], inp: [Photon; 2]) -> Complex64 {
        let table = self.model.qubit_table(out[1].momentum, inp[1].momentum);
        self.t2_with_table(&table, out, inp)
    }

    fn t2_with_table(&self, table: &QubitTable, out: [Photon; 2], inp: [Photon; 2]) -> Complex64 {
        let w = photon_basis(
            table,
            out[1].channel,
            out[1].momentum,
            inp[1].channel,
            inp[1].momentum,
            self.params(),
        );
        (self.out_row(out[0]) * w * self.in_col(inp[0]))[(0, 0)]
    }

    /// Symmetrized on-shell amplitude; momenta must satisfy
    /// `k'₁ + k'₂ = k₁ + k₂ = E`.
    pub fn t4(&self, out: [Photon; 2], inp: [Photon; 2]) -> Result<Complex64> {
        self.check_shell(out[0].momentum, out[1].momentum)?;
        self.check_shell(inp[0].momentum, inp[1].momentum)?;
        let mut tot = Complex64::new(0.0, 0.0);
        for o in [out, [out[1], out[0]]] {
            for i in [inp, [inp[1], inp[0]]] {
                tot += self.t2(o, i);
            }
        }
        Ok(tot)
    }

    /// `T` for all four outgoing channel pairs at `(k'₁, E − k'₁)`, sharing
    /// the four vertex tables between channels.
    pub fn t4_channels(&self, k1p: f64, inp: [Photon; 2]) -> Result<ChannelAmplitudes> {
        self.check_shell(inp[0].momentum, inp[1].momentum)?;
        let k2p = self.energy() - k1p;
        let kout = [k1p, k2p];
        let p = self.params();
        // ordering (o, i): photons o and i couple through M, the others through W
        let tables: [[QubitTable; 2]; 2] = std::array::from_fn(|o| {
            std::array::from_fn(|i| self.model.qubit_table(kout[1 - o], inp[1 - i].momentum))
        });
        let rows: [[RowVector2<Complex64>; 2]; 2] = std::array::from_fn(|a| {
            std::array::from_fn(|o| self.out_row(Photon::new(a, kout[o])))
        });
        let cols: [Vector2<Complex64>; 2] = std::array::from_fn(|i| self.in_col(inp[i]));
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (a1, row) in out.iter_mut().enumerate() {
            for (a2, val) in row.iter_mut().enumerate() {
                let ach = [a1, a2];
                for o in 0..2 {
                    for i in 0..2 {
                        let table = &tables[o][i];
                        let w: Matrix2<Complex64> = photon_basis(
                            table,
                            ach[1 - o],
                            kout[1 - o],
                            inp[1 - i].channel,
                            inp[1 - i].momentum,
                            p,
                        );
                        *val += (rows[ach[o]][o] * w * cols[i])[(0, 0)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Regular part of `T` on the shell: at outgoing momenta within
    /// `PV_OFFSET` of an incoming one the two sides are averaged.
    pub fn t4_regular(&self, k1p: f64, inp: [Photon; 2]) -> Result<ChannelAmplitudes> {
        let near = inp
            .iter()
            .any(|ph| (k1p - ph.momentum).abs() < PV_OFFSET);
        if !near {
            return self.t4_channels(k1p, inp);
        }
        let a = self.t4_channels(k1p + PV_OFFSET, inp)?;
        let b = self.t4_channels(k1p - PV_OFFSET, inp)?;
        Ok(std::array::from_fn(|i| {
            std::array::from_fn(|j| 0.5 * (a[i][j] + b[i][j]))
        }))
    }
}

/// Symmetrized on-shell two-photon amplitude for explicit labels.
pub fn t2_amplitude(
    out: (usize, f64, usize, f64),
    inp: (usize, f64, usize, f64),
    p: &SystemParams,
    mode: Mode,
) -> Result<Complex64> {
    let solver = TwoPhotonSolver::new(inp.1 + inp.3, p, mode)?;
    solver.t4(
        [Photon::new(out.0, out.1), Photon::new(out.2, out.3)],
        [Photon::new(inp.0, inp.1), Photon::new(inp.2, inp.3)],
    )
}

/// Coefficients of the two singular structures for one outgoing channel pair:
/// `δ(k'₁−k₁)δ(k'₂−k₂)` (preserved) and `δ(k'₁−k₂)δ(k'₂−k₁)` (exchanged).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticCoefficients {
    pub preserved: Complex64,
    pub exchanged: Complex64,
}

/// Elastic coefficients for every outgoing channel pair, indexed `[α'₁][α'₂]`.
pub fn elastic_part(inp: [Photon; 2], p: &SystemParams) -> [[ElasticCoefficients; 2]; 2] {
    let s1 = s1_matrix(inp[0].momentum, p);
    let s2 = s1_matrix(inp[1].momentum, p);
    let (c1, c2) = (inp[0].channel, inp[1].channel);
    std::array::from_fn(|a1| {
        std::array::from_fn(|a2| ElasticCoefficients {
            preserved: s1[(a1, c1)] * s2[(a2, c2)],
            exchanged: s2[(a1, c2)] * s1[(a2, c1)],
        })
    })
}

/// Full on-shell scattering data for one input state.
#[derive(Debug, Clone)]
pub struct TwoPhotonResult {
    pub shell: EnergyShell,
    pub input_channels: (usize, usize),
    pub mode: Mode,
    pub elastic_coeffs: [[ElasticCoefficients; 2]; 2],
    /// `t(Δ')` per outgoing channel pair `[α'₁][α'₂]` on `shell.delta_out_grid`.
    pub inelastic: [[Vec<Complex64>; 2]; 2],
}

impl TwoPhotonResult {
    pub fn compute(inp: &InputState, p: &SystemParams, mode: Mode) -> Result<Self> {
        let solver = TwoPhotonSolver::new(inp.shell.total_energy, p, mode)?;
        Self::with_solver(&solver, inp)
    }

    pub fn with_solver(solver: &TwoPhotonSolver, inp: &InputState) -> Result<Self> {
        let photons = inp.photons();
        let e = inp.shell.total_energy;
        if (solver.energy() - e).abs() > SHELL_TOL * e.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "solver energy {} differs from shell energy {e}",
                solver.energy()
            )));
        }
        let vals: Vec<ChannelAmplitudes> = inp
            .shell
            .delta_out_grid
            .par_iter()
            .map(|&d| solver.t4_regular(0.5 * (e + d), photons))
            .collect::<Result<_>>()?;
        for v in &vals {
            if v.iter().flatten().any(|z| !z.is_finite()) {
                return Err(Error::NonFinite("inelastic amplitude"));
            }
        }
        let inelastic =
            std::array::from_fn(|a| std::array::from_fn(|b| vals.iter().map(|v| v[a][b]).collect()));
        Ok(Self {
            shell: inp.shell.clone(),
            input_channels: inp.channels,
            mode: solver.mode(),
            elastic_coeffs: elastic_part(photons, solver.params()),
            inelastic,
        })
    }
}

/// Points of [`default_density_grid`].
pub const DENSITY_POINTS: usize = 4801;

/// `Δ' ∈ [−12Ω, 12Ω]` with `Ω = max |Ω_β|`, falling back to `Γ_max` and then
/// to 1 when both vanish.
pub fn default_density_grid(p: &SystemParams) -> Vec<f64> {
    let mut scale = p.omega1.abs().max(p.omega2.abs());
    if scale == 0.0 {
        scale = p.gamma_max();
    }
    if scale == 0.0 {
        scale = 1.0;
    }
    linspace(-12.0 * scale, 12.0 * scale, DENSITY_POINTS)
}

/// Inelastic momentum densities per unit `Δ'`.
///
/// With `T` the symmetrized amplitude, `P_{α'₁α'₂}(Δ') = π²|T|²` summed over
/// ordered channel pairs integrates to the inelastic probability. The
/// opposite-direction curve is `π²(|T_RL|² + |T_LR|²)`, even in `Δ'`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub delta_out_grid: Vec<f64>,
    pub rr: Vec<f64>,
    pub ll: Vec<f64>,
    pub opposite: Vec<f64>,
}

impl DensityCurve {
    pub fn from_result(r: &TwoPhotonResult) -> Self {
        let pi2 = std::f64::consts::PI.powi(2);
        let sq = |v: &Vec<Complex64>, f: f64| v.iter().map(|z| f * z.norm_sqr()).collect();
        Self {
            delta_out_grid: r.shell.delta_out_grid.clone(),
            rr: sq(&r.inelastic[0][0], pi2),
            ll: sq(&r.inelastic[1][1], pi2),
            opposite: r.inelastic[0][1]
                .iter()
                .zip(&r.inelastic[1][0])
                .map(|(a, b)| pi2 * (a.norm_sqr() + b.norm_sqr()))
                .collect(),
        }
    }

    /// `P_RR + P_LL`.
    pub fn same(&self) -> Vec<f64> {
        self.rr.iter().zip(&self.ll).map(|(a, b)| a + b).collect()
    }
}

pub fn density_curves(inp: &InputState, p: &SystemParams, mode: Mode) -> Result<DensityCurve> {
    Ok(DensityCurve::from_result(&TwoPhotonResult::compute(inp, p, mode)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::linspace;

    fn generic() -> SystemParams {
        SystemParams::new(0.3, -0.7, 0.5, 0.9, 1.3, 0.4).unwrap()
    }

    #[test]
    fn channel_evaluator_matches_direct_sum() {
        let p = generic();
        let inp = [Photon::new(0, 0.35), Photon::new(1, -0.15)];
        for mode in [Mode::Exact, Mode::Markov] {
            let s = TwoPhotonSolver::new(0.2, &p, mode).unwrap();
            let all = s.t4_channels(0.9, inp).unwrap();
            for a1 in 0..2 {
                for a2 in 0..2 {
                    let d = s
                        .t4([Photon::new(a1, 0.9), Photon::new(a2, 0.2 - 0.9)], inp)
                        .unwrap();
                    assert!((all[a1][a2] - d).norm() < 1e-13 * d.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn exchange_symmetry() {
        let p = generic();
        let s = TwoPhotonSolver::new(0.2, &p, Mode::Exact).unwrap();
        let o = [Photon::new(0, 0.9), Photon::new(1, -0.7)];
        let i = [Photon::new(1, 0.35), Photon::new(0, -0.15)];
        let t = s.t4(o, i).unwrap();
        assert!((t - s.t4([o[1], o[0]], i).unwrap()).norm() < 1e-12);
        assert!((t - s.t4(o, [i[1], i[0]]).unwrap()).norm() < 1e-12);
        assert!(t.norm() > 1e-6);
    }

    #[test]
    fn off_shell_rejected() {
        let s = TwoPhotonSolver::new(0.2, &generic(), Mode::Exact).unwrap();
        let r = s.t4(
            [Photon::new(0, 0.5), Photon::new(0, 0.0)],
            [Photon::new(0, 0.1), Photon::new(0, 0.1)],
        );
        assert!(r.is_err());
    }

    #[test]
    fn free_field_is_identity() {
        let p = SystemParams::new(0.3, -0.7, 0.0, 0.0, 1.3, 0.4).unwrap();
        let inp = [Photon::new(0, 0.3), Photon::new(1, -0.1)];
        let el = elastic_part(inp, &p);
        assert_eq!(el[0][1].preserved, Complex64::new(1.0, 0.0));
        assert_eq!(el[1][0].exchanged, Complex64::new(1.0, 0.0));
        assert_eq!(el[0][0].preserved, Complex64::new(0.0, 0.0));
        let s = TwoPhotonSolver::new(0.2, &p, Mode::Exact).unwrap();
        let t = s.t4_channels(0.7, inp).unwrap();
        assert!(t.iter().flatten().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn transparency_elastic_coefficients() {
        let p = SystemParams::transparency(2.0, 10.0);
        let el = elastic_part([Photon::new(0, 0.0), Photon::new(1, 0.0)], &p);
        assert!((el[0][1].preserved - 1.0).norm() < 1e-12);
        assert!((el[1][0].exchanged - 1.0).norm() < 1e-12);
        for (a, b) in [(0, 0), (1, 1)] {
            assert!(el[a][b].preserved.norm() < 1e-12 && el[a][b].exchanged.norm() < 1e-12);
        }
        // transparency is a k = 0 property
        let off = elastic_part([Photon::new(0, 0.4), Photon::new(1, -0.4)], &p);
        assert!(off[0][1].preserved.norm() < 0.5);
    }

    #[test]
    fn mirror_symmetry_of_densities() {
        let p = SystemParams::transparency(1.0, 1.0);
        let shell = EnergyShell::new(0.0, 0.0, linspace(-3.0, 3.0, 13)).unwrap();
        let inp = InputState::new((0, 1), shell).unwrap();
        let d = density_curves(&inp, &p, Mode::Exact).unwrap();
        let n = d.opposite.len();
        for j in 0..n {
            let (a, b) = (d.opposite[j], d.opposite[n - 1 - j]);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
            assert!(d.rr[j] >= 0.0 && d.ll[j] >= 0.0);
        }
    }
}
