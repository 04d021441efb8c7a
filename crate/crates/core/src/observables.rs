//! Second-order correlation functions in exact and Markov modes.
//!
//! Photons are labelled by the coordinate along their own propagation
//! direction, so a photon of energy `k` in either channel carries `e^{ikx}`.
//! The outgoing pair amplitude for channel `α'₁` at `x` and `α'₂` at `x + τ`
//! is then `e^{iEx} φ(τ)` with
//!
//! `φ(τ) = c_pres e^{ik₂τ} + c_exch e^{ik₁τ} − iπ e^{iEτ/2} ∫dΔ' e^{−iΔ'τ/2} T(Δ')`,
//!
//! where `T(Δ')` is the on-shell amplitude at `k'₁ = (E+Δ')/2` and the factor
//! `½` of `dk'₁ = dΔ'/2` is folded into `−iπ`. The common factor `e^{iEx}`
//! drops out of `|φ|²`, leaving a function of `τ` only.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::effective_objects::Mode;
use crate::error::{Error, Result};
use crate::params::{EnergyShell, SystemParams};
use crate::scattering::{InputState, TwoPhotonResult, TwoPhotonSolver};

/// Markov-mode solver: bare vertices, bare doubly excited propagator and no
/// vertex corrections.
pub fn markov_mode_objects(e: f64, p: &SystemParams) -> Result<TwoPhotonSolver> {
    TwoPhotonSolver::new(e, p, Mode::Markov)
}

/// `μ_n = ∫_{−h}^{h} uⁿ e^{−iωu} du` for `n = 0, 1, 2`.
fn centered_moments(omega: f64, h: f64) -> [Complex64; 3] {
    let a = omega * h;
    if a.abs() < 0.5 {
        let a2 = a * a;
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        // term = (−1)^n a^{2n}/(2n)!, next odd factorial tracked separately
        let mut even = 1.0;
        let mut odd = a;
        for n in 0..14 {
            let m = 2.0 * n as f64;
            s0 += even / (m + 1.0);
            s2 += even / (m + 3.0);
            s1 += odd / (m + 3.0);
            even *= -a2 / ((m + 1.0) * (m + 2.0));
            odd *= -a2 / ((m + 2.0) * (m + 3.0));
        }
        [
            Complex64::new(2.0 * h * s0, 0.0),
            Complex64::new(0.0, -2.0 * h * h * s1),
            Complex64::new(2.0 * h.powi(3) * s2, 0.0),
        ]
    } else {
        let (s, c) = a.sin_cos();
        [
            Complex64::new(2.0 * h * s / a, 0.0),
            Complex64::new(0.0, -2.0 * h * h * (s - a * c) / (a * a)),
            Complex64::new(2.0 * h.powi(3) * (a * a * s + 2.0 * a * c - 2.0 * s) / a.powi(3), 0.0),
        ]
    }
}

/// `∫ e^{−iωx} f(x) dx` over the grid span with `f` interpolated piecewise
/// (quadratic on equally spaced triples, linear elsewhere); the oscillatory
/// factor is integrated exactly.
pub fn fourier_integral(grid: &[f64], values: &[Complex64], omega: f64) -> Complex64 {
    assert_eq!(grid.len(), values.len());
    let n = grid.len();
    let span = grid.last().copied().unwrap_or(0.0) - grid.first().copied().unwrap_or(0.0);
    if n >= 3 && n % 2 == 1 && is_uniform(grid) {
        return uniform_fourier_integral(grid, values, omega);
    }
    general_fourier_integral(grid, values, omega, span)
}

fn general_fourier_integral(grid: &[f64], values: &[Complex64], omega: f64, span: f64) -> Complex64 {
    let n = grid.len();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut i = 0;
    while i + 1 < n {
        if i + 2 < n {
            let (x0, x1, x2) = (grid[i], grid[i + 1], grid[i + 2]);
            let h = x1 - x0;
            if ((x2 - x1) - h).abs() <= 1e-9 * span.max(1.0) {
                let (f0, f1, f2) = (values[i], values[i + 1], values[i + 2]);
                let m = centered_moments(omega, h);
                let b = (f2 - f0) / (2.0 * h);
                let c = (f2 - 2.0 * f1 + f0) / (2.0 * h * h);
                acc += Complex64::from_polar(1.0, -omega * x1) * (f1 * m[0] + b * m[1] + c * m[2]);
                i += 2;
                continue;
            }
        }
        let (x0, x1) = (grid[i], grid[i + 1]);
        let h = 0.5 * (x1 - x0);
        let m = centered_moments(omega, h);
        let (f0, f1) = (values[i], values[i + 1]);
        let mid = 0.5 * (x0 + x1);
        acc += Complex64::from_polar(1.0, -omega * mid)
            * (0.5 * (f0 + f1) * m[0] + (f1 - f0) / (2.0 * h) * m[1]);
        i += 1;
    }
    acc
}

fn is_uniform(grid: &[f64]) -> bool {
    let h = grid[1] - grid[0];
    let span = (grid[grid.len() - 1] - grid[0]).abs().max(1.0);
    h > 0.0 && grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * span)
}

/// Quadratic panels of equal width: moments are shared and the panel phase
/// advances by a fixed rotation, resynchronized periodically.
fn uniform_fourier_integral(grid: &[f64], values: &[Complex64], omega: f64) -> Complex64 {
    const RESYNC: usize = 64;
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let m = centered_moments(omega, h);
    let step = Complex64::from_polar(1.0, -2.0 * omega * h);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut phase = Complex64::new(1.0, 0.0);
    for (j, f) in values.windows(3).step_by(2).enumerate() {
        if j % RESYNC == 0 {
            phase = Complex64::from_polar(1.0, -omega * grid[2 * j + 1]);
        }
        let b = (f[2] - f[0]) / (2.0 * h);
        let c = (f[2] - 2.0 * f[1] + f[0]) / (2.0 * h * h);
        acc += phase * (f[1] * m[0] + b * m[1] + c * m[2]);
        phase *= step;
    }
    acc
}

/// Δ' grid for correlation functions: equally spaced with step `step` over
/// `[−half_width, half_width]`, with an even number of intervals.
pub fn fourier_grid(half_width: f64, step: f64) -> Result<Vec<f64>> {
    if !(half_width > 0.0 && step > 0.0) || !half_width.is_finite() || !step.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "half width {half_width} and step {step} must be positive"
        )));
    }
    let mut m = (half_width / step).ceil() as usize;
    if m == 0 {
        m = 1;
    }
    let h = half_width / m as f64;
    Ok((0..=2 * m).map(|j| -half_width + h * j as f64).collect())
}

/// Default correlation grid: `±400 Γ_max`, with a step resolving both the
/// linewidth and the `e^{iΔ'R/2}` structure.
pub fn default_fourier_grid(p: &SystemParams) -> Result<Vec<f64>> {
    let g = p.gamma_max();
    if g == 0.0 {
        return fourier_grid(1.0, 0.01);
    }
    let mut step = g / 10.0;
    if p.separation > 0.0 {
        step = step.min(PI / (16.0 * p.separation));
    }
    fourier_grid(DEFAULT_HALF_WIDTH * g, step)
}

/// Half width of the default correlation grid in units of `Γ_max`.
pub const DEFAULT_HALF_WIDTH: f64 = 400.0;

/// Fraction of the Δ' span, at each end, over which the Hann taper acts.
pub const TAPER_FRACTION: f64 = 0.1;

/// Hann taper: 1 on the inner part of the grid, falling smoothly to 0 over
/// the outer `fraction` of the span at either end.
pub fn taper_weights(grid: &[f64], fraction: f64) -> Vec<f64> {
    let (Some(&lo), Some(&hi)) = (grid.first(), grid.last()) else {
        return Vec::new();
    };
    let width = fraction * (hi - lo);
    grid.iter()
        .map(|&x| {
            let d = (x - lo).min(hi - x);
            if width <= 0.0 || d >= width {
                1.0
            } else {
                0.5 * (1.0 - (PI * d / width).cos())
            }
        })
        .collect()
}

/// Position-space pair amplitudes built from one on-shell result.
#[derive(Debug, Clone)]
pub struct PairAmplitude<'a> {
    result: &'a TwoPhotonResult,
    tapered: [[Vec<Complex64>; 2]; 2],
}

impl<'a> PairAmplitude<'a> {
    pub fn new(result: &'a TwoPhotonResult) -> Self {
        let w = taper_weights(&result.shell.delta_out_grid, TAPER_FRACTION);
        let tapered = std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                result.inelastic[a][b].iter().zip(&w).map(|(t, w)| t * *w).collect()
            })
        });
        Self { result, tapered }
    }

    /// `φ(τ)` for outgoing channels `(α'₁, α'₂)`.
    pub fn at(&self, channels: (usize, usize), tau: f64) -> Complex64 {
        let r = self.result;
        let (a1, a2) = channels;
        let (k1, k2) = r.shell.input_momenta();
        let el = r.elastic_coeffs[a1][a2];
        let elastic = el.preserved * Complex64::from_polar(1.0, k2 * tau)
            + el.exchanged * Complex64::from_polar(1.0, k1 * tau);
        let inel = fourier_integral(&r.shell.delta_out_grid, &self.tapered[a1][a2], 0.5 * tau);
        elastic
            - Complex64::new(0.0, PI) * Complex64::from_polar(1.0, 0.5 * r.shell.total_energy * tau) * inel
    }
}

/// `φ(τ)` for outgoing channels `(α'₁, α'₂)`; see [`PairAmplitude`] for
/// repeated evaluation.
pub fn pair_amplitude(r: &TwoPhotonResult, channels: (usize, usize), tau: f64) -> Complex64 {
    PairAmplitude::new(r).at(channels, tau)
}

const NORM_FLOOR: f64 = 1e-14;

/// Uncorrelated reference `(|c_pres| + |c_exch|)²`; channels without elastic
/// background fall back to the cross-channel `(R, L)` reference.
pub fn g2_normalization(r: &TwoPhotonResult, channels: (usize, usize)) -> f64 {
    let own = |a: usize, b: usize| {
        let c = r.elastic_coeffs[a][b];
        (c.preserved.norm() + c.exchanged.norm()).powi(2)
    };
    let n = own(channels.0, channels.1);
    if n > NORM_FLOOR {
        n
    } else {
        own(0, 1).max(own(1, 0)).max(NORM_FLOOR)
    }
}

/// `g²` values for every outgoing channel pair, indexed `[α'₁][α'₂]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub tau_grid: Vec<f64>,
    pub mode: Mode,
    pub values: [[Vec<f64>; 2]; 2],
}

impl CorrelationSeries {
    pub fn channel(&self, a1: usize, a2: usize) -> &[f64] {
        &self.values[a1][a2]
    }

    /// Same-direction autocorrelation (both photons right-moving).
    pub fn same(&self) -> &[f64] {
        &self.values[0][0]
    }

    /// Opposite-direction cross-correlation (right-moving photon first).
    pub fn cross(&self) -> &[f64] {
        &self.values[0][1]
    }
}

fn check_tau(tau_grid: &[f64], delta_grid: &[f64]) -> Result<()> {
    if let Some(t) = tau_grid.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::InvalidGrid(format!("tau value {t} must be finite and >= 0")));
    }
    let step = delta_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    if let Some(t) = tau_grid.iter().find(|t| **t * step > 2.0 * PI) {
        log::warn!("tau = {t} exceeds the alias limit 2π/Δ' step = {}", 2.0 * PI / step);
    }
    Ok(())
}

/// `g²(τ)` for all channel pairs from a precomputed on-shell result.
pub fn g2_from_result(r: &TwoPhotonResult, tau_grid: &[f64]) -> Result<CorrelationSeries> {
    check_tau(tau_grid, &r.shell.delta_out_grid)?;
    let amp = PairAmplitude::new(r);
    let values = std::array::from_fn(|a1| {
        std::array::from_fn(|a2| {
            let norm = g2_normalization(r, (a1, a2));
            tau_grid
                .par_iter()
                .map(|&t| amp.at((a1, a2), t).norm_sqr() / norm)
                .collect()
        })
    });
    Ok(CorrelationSeries {
        tau_grid: tau_grid.to_vec(),
        mode: r.mode,
        values,
    })
}

/// `g²(τ)` for input channels `inp.channels` at `(E, Δ)` of `inp.shell`; the
/// shell's Δ' grid is used as the Fourier grid.
pub fn g2(tau_grid: &[f64], inp: &InputState, p: &SystemParams, mode: Mode) -> Result<CorrelationSeries> {
    let r = TwoPhotonResult::compute(inp, p, mode)?;
    g2_from_result(&r, tau_grid)
}

/// Input state at `(E, Δ)` on the default correlation grid.
pub fn default_g2_input(
    channels: (usize, usize),
    total_energy: f64,
    delta_in: f64,
    p: &SystemParams,
) -> Result<InputState> {
    let shell = EnergyShell::new(total_energy, delta_in, default_fourier_grid(p)?)?;
    InputState::new(channels, shell)
}

/// `g²_exact(τ) / g²_Markov(τ)` for one outgoing channel pair.
pub fn markov_ratio(tau: f64, channels: (usize, usize), inp: &InputState, p: &SystemParams) -> Result<f64> {
    let ex = g2(&[tau], inp, p, Mode::Exact)?;
    let mk = g2(&[tau], inp, p, Mode::Markov)?;
    ratio_of(&ex, &mk, channels).map(|v| v[0])
}

/// Pointwise exact/Markov ratio of two series on the same τ grid.
pub fn ratio_of(
    exact: &CorrelationSeries,
    markov: &CorrelationSeries,
    channels: (usize, usize),
) -> Result<Vec<f64>> {
    if exact.tau_grid != markov.tau_grid {
        return Err(Error::InvalidGrid("exact and Markov tau grids differ".into()));
    }
    exact
        .channel(channels.0, channels.1)
        .iter()
        .zip(markov.channel(channels.0, channels.1))
        .map(|(e, m)| {
            if m.abs() < 1e-14 {
                Err(Error::SingularCoefficient {
                    what: "Markov g2",
                    value: Complex64::new(*m, 0.0),
                })
            } else {
                Ok(e / m)
            }
        })
        .collect()
}

/// Indices of interior local maxima (`sign = 1`) or minima (`sign = −1`).
pub fn local_extrema(values: &[f64], sign: f64) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| {
            let (a, b, c) = (sign * values[i - 1], sign * values[i], sign * values[i + 1]);
            b > a && b >= c
        })
        .collect()
}

const FORWARD_D1: [f64; 5] = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
const FORWARD_D2: [f64; 5] = [35.0 / 12.0, -26.0 / 3.0, 9.5, -14.0 / 3.0, 11.0 / 12.0];

/// Stencil spacings (in grid steps) compared by [`kink_indices`].
pub const KINK_SCALES: [usize; 3] = [1, 2, 4];
/// Largest spread between jump estimates at different scales for a feature
/// to count as non-smooth.
pub const KINK_SCALE_TOL: f64 = 2.0;
/// Smallest jump, relative to `max |y|` over one stencil step, that counts.
pub const KINK_FLOOR: f64 = 1e-3;

/// Jumps `[|f'₊ − f'₋|, |f''₊ − f''₋|]` at `i` from one-sided fourth-order
/// stencils with spacing `s·h`. Requires `4s ≤ i < len − 4s`.
pub fn one_sided_jumps(values: &[f64], i: usize, s: usize, h: f64) -> [f64; 2] {
    let hs = h * s as f64;
    let (mut d1, mut d2) = (0.0, 0.0);
    for k in 0..5 {
        let (r, l) = (values[i + k * s], values[i - k * s]);
        d1 += FORWARD_D1[k] * (r + l);
        d2 += FORWARD_D2[k] * (r - l);
    }
    [(d1 / hs).abs(), (d2 / (hs * hs)).abs()]
}

/// Median slope jump over the grid, the noise level against which a single
/// [`one_sided_jumps`] value is judged.
pub fn slope_jump_noise(values: &[f64], h: f64) -> f64 {
    let m = 4;
    if values.len() <= 2 * m {
        return 0.0;
    }
    let mut j: Vec<f64> = (m..values.len() - m).map(|i| one_sided_jumps(values, i, 1, h)[0]).collect();
    j.sort_by(|a, b| a.total_cmp(b));
    j[j.len() / 2]
}

/// Points where `values` (uniform step `h`) is not smooth: a jump in the
/// first or second derivative whose estimate is stable across
/// [`KINK_SCALES`]. Smooth features shrink like `h⁴` under refinement and
/// are rejected. Each cluster of flagged points is reduced to its largest.
pub fn kink_indices(values: &[f64], h: f64) -> Vec<usize> {
    let smax = KINK_SCALES[KINK_SCALES.len() - 1];
    let m = 4 * smax;
    let n = values.len();
    if n <= 2 * m {
        return Vec::new();
    }
    let amp = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let w = h * KINK_SCALES[0] as f64;
    let mut score = vec![0.0; n];
    for i in m..n - m {
        let jumps: Vec<[f64; 2]> = KINK_SCALES.iter().map(|&s| one_sided_jumps(values, i, s, h)).collect();
        for order in 0..2 {
            let (lo, hi) = jumps.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), j| (lo.min(j[order]), hi.max(j[order])));
            let size = jumps[0][order] * w.powi(order as i32 + 1);
            if lo > 0.0 && hi <= KINK_SCALE_TOL * lo && size > KINK_FLOOR * amp {
                score[i] = f64::max(score[i], size);
            }
        }
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if score[i] > 0.0 {
            let start = i;
            while i < n && score[i] > 0.0 {
                i += 1;
            }
            let best = (start..i).max_by(|&a, &b| score[a].total_cmp(&score[b])).unwrap();
            out.push(best);
        } else {
            i += 1;
        }
    }
    out
}
