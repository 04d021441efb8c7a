//! Single-qubit amplitudes, the one-excitation Green's function `M(E)` and the
//! single-photon scattering matrix.
//!
//! One-excitation operators are 2×2 matrices in the ordered basis
//! `{|e g⟩, |g e⟩}`. Channel 0 is right-moving, channel 1 left-moving.

use nalgebra::{Matrix2, RowVector2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{sign_factor, SystemParams, I};

pub type OneExcitationOperator = Matrix2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitAmplitudes {
    pub t1: Complex64,
    pub r1: Complex64,
    pub t2: Complex64,
    pub r2: Complex64,
}

fn qubit_tr(k: f64, p: &SystemParams, beta: usize) -> (Complex64, Complex64) {
    if p.gamma(beta) == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let den = k - p.omega_tilde(beta);
    let t = (k - p.omega(beta)) / den;
    let r = Complex64::new(0.0, -2.0 * p.gamma(beta)) / den;
    (t, r)
}

pub fn qubit_amplitudes(k: f64, p: &SystemParams) -> SingleQubitAmplitudes {
    let (t1, r1) = qubit_tr(k, p, 0);
    let (t2, r2) = qubit_tr(k, p, 1);
    SingleQubitAmplitudes { t1, r1, t2, r2 }
}

const POLE_TOL: f64 = 1e-13;

/// `m(E) = −2i sqrt(Γ₁Γ₂) e^{iER+iφ} / sqrt((E−Ω̃₁)(E−Ω̃₂))`, principal branch.
/// Diagnostic only; `green_one_excitation` is branch-free.
pub fn m_factor(e: Complex64, p: &SystemParams) -> Result<Complex64> {
    let d1 = e - p.omega_tilde(0);
    let d2 = e - p.omega_tilde(1);
    if d1.norm() < POLE_TOL || d2.norm() < POLE_TOL {
        return Err(Error::SingularGreen(e));
    }
    let g12 = (p.gamma1 * p.gamma2).sqrt();
    Ok(-2.0 * I * g12 * (I * (e * p.separation + p.phase)).exp() / (d1 * d2).sqrt())
}

/// `M(E)`: diagonal `((E−Ω̃₂), (E−Ω̃₁))/D`, off-diagonal `−2i sqrt(Γ₁Γ₂) e^{iER+iφ}/D`,
/// `D = (E−Ω̃₁)(E−Ω̃₂) + 4Γ₁Γ₂ e^{2i(ER+φ)}`.
pub fn green_one_excitation(e: Complex64, p: &SystemParams) -> Result<OneExcitationOperator> {
    let ph = (I * (e * p.separation + p.phase)).exp();
    let d1 = e - p.omega_tilde(0);
    let d2 = e - p.omega_tilde(1);
    let den = d1 * d2 + 4.0 * p.gamma1 * p.gamma2 * ph * ph;
    let scale = d1.norm() * d2.norm() + 4.0 * p.gamma1 * p.gamma2 * (ph * ph).norm();
    if den.norm() <= POLE_TOL * scale.max(1.0) || !den.is_finite() {
        return Err(Error::SingularGreen(e));
    }
    let off = -2.0 * I * (p.gamma1 * p.gamma2).sqrt() * ph;
    Ok(Matrix2::new(d2, off, off, d1) / den)
}

/// `M` on the real axis; real energies never hit the pole when a rate is positive.
pub fn green_real(e: f64, p: &SystemParams) -> OneExcitationOperator {
    green_one_excitation(Complex64::new(e, 0.0), p)
        .expect("one-excitation Green's function is regular on the real axis")
}

/// `(M̄⁺, M̄⁻) = e^{ik₁R+iφ}/(E − k₁ − Ω̃_{1,2})`.
pub fn mbar_diagonal(k1: f64, e: f64, p: &SystemParams) -> Result<(Complex64, Complex64)> {
    let ph = (I * (k1 * p.separation + p.phase)).exp();
    let d1 = e - k1 - p.omega_tilde(0);
    let d2 = e - k1 - p.omega_tilde(1);
    if d1.norm() < POLE_TOL || d2.norm() < POLE_TOL {
        return Err(Error::SingularGreen(Complex64::new(e - k1, 0.0)));
    }
    Ok((ph / d1, ph / d2))
}

/// Photon phase `e^{i c_α c_β (kR+φ)/2}` attached to qubit `β` and channel `α`.
#[inline]
pub fn basis_phase(alpha: usize, beta: usize, k: f64, p: &SystemParams) -> Complex64 {
    let th = 0.5 * sign_factor(alpha) * sign_factor(beta) * (k * p.separation + p.phase);
    Complex64::from_polar(1.0, th)
}

/// Emission vertex `⟨gg| v_{αk}` as a row over `{|eg⟩, |ge⟩}`.
pub fn vertex_row(alpha: usize, k: f64, p: &SystemParams) -> RowVector2<Complex64> {
    RowVector2::new(
        p.coupling(0) * basis_phase(alpha, 0, k, p).conj(),
        p.coupling(1) * basis_phase(alpha, 1, k, p).conj(),
    )
}

/// Absorption vertex `v†_{αk} |gg⟩` as a column over `{|eg⟩, |ge⟩}`.
pub fn vertex_col(alpha: usize, k: f64, p: &SystemParams) -> Vector2<Complex64> {
    Vector2::new(
        p.coupling(0) * basis_phase(alpha, 0, k, p),
        p.coupling(1) * basis_phase(alpha, 1, k, p),
    )
}

fn decoupled_green_diagonal(k: f64, p: &SystemParams, beta: usize) -> Complex64 {
    if p.gamma(beta) == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        1.0 / (k - p.omega_tilde(beta))
    }
}

/// `v_{αk} M(k)`; entries of uncoupled qubits are zero rather than `0·∞`.
pub fn dressed_row(alpha: usize, k: f64, p: &SystemParams) -> RowVector2<Complex64> {
    let v = vertex_row(alpha, k, p);
    if p.gamma1 * p.gamma2 == 0.0 {
        return RowVector2::new(
            v[0] * decoupled_green_diagonal(k, p, 0),
            v[1] * decoupled_green_diagonal(k, p, 1),
        );
    }
    v * green_real(k, p)
}

/// `M(k) v†_{αk}`.
pub fn dressed_col(alpha: usize, k: f64, p: &SystemParams) -> Vector2<Complex64> {
    let v = vertex_col(alpha, k, p);
    if p.gamma1 * p.gamma2 == 0.0 {
        return Vector2::new(
            v[0] * decoupled_green_diagonal(k, p, 0),
            v[1] * decoupled_green_diagonal(k, p, 1),
        );
    }
    green_real(k, p) * v
}

/// Closed-form `S⁽¹⁾(k)` in channel order (R, L).
pub fn s1_matrix(k: f64, p: &SystemParams) -> Matrix2<Complex64> {
    let a = qubit_amplitudes(k, p);
    let e = Complex64::from_polar(1.0, k * p.separation + p.phase);
    let den = 1.0 - a.r1 * a.r2 * e * e;
    let s11 = a.t1 * a.t2 / den;
    let s12 = (a.r1 / e + a.r2 * e + 2.0 * a.r1 * a.r2 * e) / den;
    let s21 = (a.r2 / e + a.r1 * e + 2.0 * a.r1 * a.r2 * e) / den;
    Matrix2::new(s11, s12, s21, s11)
}

/// `S⁽¹⁾` assembled as `δ − 2πi v M(k) v†`.
pub fn s1_from_green(k: f64, p: &SystemParams) -> Matrix2<Complex64> {
    let m = green_real(k, p);
    let mut s = Matrix2::identity();
    for out in 0..2 {
        for inp in 0..2 {
            let t = (vertex_row(out, k, p) * m * vertex_col(inp, k, p))[(0, 0)];
            s[(out, inp)] -= 2.0 * std::f64::consts::PI * I * t;
        }
    }
    s
}

pub fn unitarity_residual(s: &Matrix2<Complex64>) -> f64 {
    (s.adjoint() * s - Matrix2::identity()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

    fn sample() -> SystemParams {
        SystemParams::new(2.0, -2.0, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn transparency_qubit_amplitudes() {
        let p = SystemParams::transparency(2.0, 1.0);
        let a = qubit_amplitudes(0.0, &p);
        let t1 = Complex64::from_polar(FRAC_1_SQRT_2, FRAC_PI_4);
        let t2 = Complex64::from_polar(FRAC_1_SQRT_2, -FRAC_PI_4);
        assert!((a.t1 - t1).norm() < 1e-15 && (a.t2 - t2).norm() < 1e-15);
        assert!((a.r1 + Complex64::from_polar(FRAC_1_SQRT_2, -FRAC_PI_4)).norm() < 1e-15);
        assert!((a.r2 + Complex64::from_polar(FRAC_1_SQRT_2, FRAC_PI_4)).norm() < 1e-15);
    }

    #[test]
    fn decoupled_and_resonant_qubit() {
        let p = SystemParams::new(0.7, -0.2, 0.4, 0.0, 1.0, 0.0).unwrap();
        let a = qubit_amplitudes(0.3, &p);
        assert_eq!((a.t2, a.r2), (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
        let b = qubit_amplitudes(0.7, &p);
        assert!(b.t1.norm() < 1e-15 && (b.r1.norm() - 1.0).abs() < 1e-15);
        assert!((b.t1 - 1.0 - b.r1).norm() < 1e-15);
    }

    #[test]
    fn m_factor_modulus_and_decoupling() {
        let p = SystemParams::new(0.4, 0.4, 0.3, 0.3, 2.0, 0.5).unwrap();
        let e = Complex64::new(0.9, 0.0);
        let m = m_factor(e, &p).unwrap();
        assert!((m.norm() - 2.0 * 0.3 / (e - p.omega_tilde(0)).norm()).abs() < 1e-14);
        let q = SystemParams::new(0.4, 0.4, 0.0, 0.3, 2.0, 0.5).unwrap();
        assert_eq!(m_factor(e, &q).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn green_matches_m_factor_form() {
        let p = sample();
        for e in [0.0, 0.7, -1.3] {
            let e = Complex64::new(e, 0.0);
            let m = m_factor(e, &p).unwrap();
            let d1 = e - p.omega_tilde(0);
            let d2 = e - p.omega_tilde(1);
            let root = (d1 * d2).sqrt();
            let pref = 1.0 / (1.0 - m * m);
            let rebuilt = Matrix2::new(1.0 / d1, m / root, m / root, 1.0 / d2) * pref;
            let g = green_one_excitation(e, &p).unwrap();
            assert!((g - rebuilt).norm() < 1e-13, "E = {e}");
        }
    }

    #[test]
    fn green_decoupled_limit_and_inverse() {
        let p = SystemParams::new(0.5, -0.3, 0.8, 0.0, 0.0, 0.0).unwrap();
        let e = Complex64::new(0.2, 0.1);
        let g = green_one_excitation(e, &p).unwrap();
        assert!((g[(0, 0)] - 1.0 / (e - p.omega_tilde(0))).norm() < 1e-15);
        assert!((g[(1, 1)] - 1.0 / (e - p.omega2)).norm() < 1e-15);
        assert_eq!(g[(0, 1)], Complex64::new(0.0, 0.0));
        let q = sample();
        let g = green_one_excitation(e, &q).unwrap();
        let inv = g.try_inverse().unwrap();
        assert!((g * inv - Matrix2::identity()).norm() < 1e-13);
    }

    #[test]
    fn mbar_phase_removal() {
        let p = SystemParams::new(0.5, -0.3, 0.8, 0.2, 0.0, 0.0).unwrap();
        let (a, b) = mbar_diagonal(0.4, 1.0, &p).unwrap();
        assert!((a - 1.0 / (0.6 - p.omega_tilde(0))).norm() < 1e-15);
        assert!((b - 1.0 / (0.6 - p.omega_tilde(1))).norm() < 1e-15);
        let z = SystemParams::new(0.6, -0.3, 0.0, 0.0, 1.0, 0.0).unwrap();
        assert!(mbar_diagonal(0.4, 1.0, &z).is_err());
    }

    #[test]
    fn transparency_s1() {
        for n in [0.0, 1.0, -3.0] {
            let mut p = SystemParams::transparency(2.0, 1.0);
            p.phase = 2.0 * PI * n;
            let s = s1_matrix(0.0, &p);
            assert!((s[(0, 0)] - 1.0).norm() < 1e-12);
            assert!(s[(0, 1)].norm() < 1e-12 && s[(1, 0)].norm() < 1e-12);
        }
    }

    #[test]
    fn single_qubit_reduction() {
        let p = SystemParams::new(0.3, 1.1, 0.6, 0.0, 1.7, 0.4).unwrap();
        let k = 0.25;
        let a = qubit_amplitudes(k, &p);
        let th = k * p.separation + p.phase;
        let s = s1_matrix(k, &p);
        assert!((s[(0, 0)] - a.t1).norm() < 1e-15);
        assert!((s[(0, 1)] - a.r1 * Complex64::from_polar(1.0, -th)).norm() < 1e-15);
        assert!((s[(1, 0)] - a.r1 * Complex64::from_polar(1.0, th)).norm() < 1e-15);
    }

    #[test]
    fn closed_form_equals_green_assembly() {
        let p = SystemParams::new(0.3, -0.7, 0.5, 0.9, 1.3, 0.4).unwrap();
        for k in [-2.0, -0.4, 0.0, 0.35, 1.9] {
            assert!((s1_matrix(k, &p) - s1_from_green(k, &p)).norm() < 1e-13);
        }
    }

    #[test]
    fn qubit_swap_exchanges_channels() {
        for phase in [0.0, PI] {
            let p = SystemParams::new(0.3, -0.7, 0.5, 0.9, 1.3, phase).unwrap();
            let a = s1_matrix(0.4, &p);
            let b = s1_matrix(0.4, &p.swapped());
            assert!((a[(0, 1)] - b[(1, 0)]).norm() < 1e-14);
            assert!((a[(0, 0)] - b[(1, 1)]).norm() < 1e-14);
        }
    }
}
