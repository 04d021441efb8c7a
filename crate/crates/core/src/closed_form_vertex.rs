//! Analytic solution of the irreducible two-photon vertex.
//!
//! The kernel `F(x', x)` on `[0,R]²` is a sum of sixteen plane waves whose
//! wavenumbers are the roots of a biquadratic characteristic polynomial. All
//! double integrals of `F` against exponentials are done term by term over
//! half-squares, so no quadrature enters the production path.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{triangle_integral, Triangle};
use crate::params::{SystemParams, I};

const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootData {
    pub total_energy: f64,
    pub lambda: Complex64,
    pub asym: Complex64,
    pub nu: Complex64,
    /// `sqrt(b² − ν²)` on the branch used to build `p₁` and `p₃`.
    pub inner: Complex64,
    /// `[p₁, −p₁, p₃, −p₃]`.
    pub roots: [Complex64; 4],
}

impl RootData {
    pub fn p1(&self) -> Complex64 {
        self.roots[0]
    }

    pub fn p3(&self) -> Complex64 {
        self.roots[2]
    }

    /// Relative residual of `p` in `p⁴ − 2(λ²+b²)p² + (λ²−b²)² + 4λ²ν²`.
    pub fn residual(&self, p: Complex64) -> f64 {
        let (l2, b2) = (self.lambda * self.lambda, self.asym * self.asym);
        let p2 = p * p;
        let c0 = (l2 - b2) * (l2 - b2) + 4.0 * l2 * self.nu * self.nu;
        let val = p2 * p2 - 2.0 * (l2 + b2) * p2 + c0;
        let scale = (p2 * p2).norm() + (2.0 * (l2 + b2) * p2).norm() + c0.norm();
        val.norm() / scale.max(f64::MIN_POSITIVE)
    }

    pub fn is_degenerate(&self) -> bool {
        let b2 = self.asym * self.asym;
        let n2 = self.nu * self.nu;
        let scale = b2.norm() + n2.norm();
        scale > 0.0 && (b2 - n2).norm() < DEGENERACY_TOL * scale
    }

    /// Relabels the roots so that they continue `prev` along a sweep.
    ///
    /// `F` is invariant under `p₁ → −p₁`, `p₃ → −p₃` and under the exchange of
    /// `p₁` and `p₃` together with the sign of `sqrt(b² − ν²)`, so the
    /// relabeling changes nothing physical.
    pub fn aligned_to(&self, prev: &RootData) -> RootData {
        let (p1, p3) = (self.p1(), self.p3());
        let mut best = *self;
        let mut best_d = f64::INFINITY;
        for swap in [false, true] {
            let (a, c, inner) = if swap {
                (p3, p1, -self.inner)
            } else {
                (p1, p3, self.inner)
            };
            for s1 in [1.0, -1.0] {
                for s3 in [1.0, -1.0] {
                    let (q1, q3) = (a * s1, c * s3);
                    let d = (q1 - prev.p1()).norm() + (q3 - prev.p3()).norm();
                    if d < best_d {
                        best_d = d;
                        best = RootData {
                            inner,
                            roots: [q1, -q1, q3, -q3],
                            ..*self
                        };
                    }
                }
            }
        }
        best
    }
}

pub fn compute_roots(e: f64, p: &SystemParams) -> Result<RootData> {
    let (w1, w2) = (p.omega_tilde(0), p.omega_tilde(1));
    let lambda = 0.5 * (e - w1 - w2);
    let asym = 0.5 * (w1 - w2);
    let nu = 4.0 * I * p.gamma1 * p.gamma2 * (I * (e * p.separation + 2.0 * p.phase)).exp()
        / (e - w1 - w2);
    let inner = (asym * asym - nu * nu).sqrt();
    let base = lambda * lambda + asym * asym;
    let p1 = (base + 2.0 * lambda * inner).sqrt();
    let p3 = (base - 2.0 * lambda * inner).sqrt();
    let r = RootData {
        total_energy: e,
        lambda,
        asym,
        nu,
        inner,
        roots: [p1, -p1, p3, -p3],
    };
    if r.is_degenerate() {
        return Err(Error::DegenerateRoots(e));
    }
    Ok(r)
}

/// Sweep-continuous root labels along an energy grid.
#[derive(Debug, Default, Clone)]
pub struct RootTracker {
    prev: Option<RootData>,
}

impl RootTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next(&mut self, e: f64, p: &SystemParams) -> Result<RootData> {
        let raw = compute_roots(e, p)?;
        let r = match &self.prev {
            Some(prev) => raw.aligned_to(prev),
            None => raw,
        };
        self.prev = Some(r);
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub c: [[Complex64; 4]; 4],
    pub z: Complex64,
    /// `[p₁]`, `[p₃]`
    pub bracket: [Complex64; 2],
    /// `{p₁}`, `{p₃}`
    pub brace: [Complex64; 2],
}

/// `[p] = e^{ipR}(p+b−λ) + e^{−ipR}(p+λ−b)`.
pub fn bracket(p: Complex64, r: &RootData, sep: f64) -> Complex64 {
    let e = (I * p * sep).exp();
    e * (p + r.asym - r.lambda) + (p + r.lambda - r.asym) / e
}

/// `{p} = e^{ipR}(p+b−λ) − e^{−ipR}(p+λ−b)`.
pub fn brace(p: Complex64, r: &RootData, sep: f64) -> Complex64 {
    let e = (I * p * sep).exp();
    e * (p + r.asym - r.lambda) - (p + r.lambda - r.asym) / e
}

fn guard(what: &'static str, value: Complex64) -> Result<Complex64> {
    if value.norm() < 1e-300 || !value.is_finite() {
        return Err(Error::SingularCoefficient { what, value });
    }
    Ok(value)
}

pub fn compute_coefficients(r: &RootData, sep: f64) -> Result<CoefficientSet> {
    let (lam, b, nu, sq) = (r.lambda, r.asym, r.nu, r.inner);
    let (p1, p3) = (r.p1(), r.p3());
    let b1 = guard("[p1]", bracket(p1, r, sep))?;
    let b3 = guard("[p3]", bracket(p3, r, sep))?;
    let c1b = brace(p1, r, sep);
    let c3b = brace(p3, r, sep);
    let dz = guard(
        "Z denominator",
        p1 * p1 - 2.0 * b * p1 * c1b / b1 - p3 * p3 + 2.0 * b * p3 * c3b / b3,
    )?;
    let nu2 = nu * nu;
    let z = if b == Complex64::new(0.0, 0.0) {
        Complex64::new(0.0, 0.0)
    } else {
        -2.0 * I * lam * nu2 * b / guard("sqrt(b^2 - nu^2)", sq)? / dz
    };
    let j1 = I * lam * nu2 / (2.0 * p1 * sq);
    let j3 = I * lam * nu2 / (2.0 * p3 * sq);
    let (a1, c1) = (p1 + b - lam, p1 + lam - b);
    let (a3, c3) = (p3 + b - lam, p3 + lam - b);
    let (ep1, ep3) = ((I * p1 * sep).exp(), (I * p3 * sep).exp());
    let zero = Complex64::new(0.0, 0.0);
    let mut c = [[zero; 4]; 4];
    let b11 = b1 * b1;
    let b33 = b3 * b3;
    let b13 = b1 * b3;
    c[0][0] = z * a1 * a1 / b11 - j1 / ep1 * a1 / b1;
    c[1][1] = z * c1 * c1 / b11 + j1 * ep1 * c1 / b1;
    c[2][2] = z * a3 * a3 / b33 + j3 / ep3 * a3 / b3;
    c[3][3] = z * c3 * c3 / b33 - j3 * ep3 * c3 / b3;
    c[0][1] = z * a1 * c1 / b11 - j1 / ep1 * c1 / b1;
    c[1][0] = z * a1 * c1 / b11 + j1 * ep1 * a1 / b1;
    c[2][3] = z * a3 * c3 / b33 + j3 / ep3 * c3 / b3;
    c[3][2] = z * a3 * c3 / b33 - j3 * ep3 * a3 / b3;
    c[0][2] = -z * a1 * a3 / b13;
    c[0][3] = -z * a1 * c3 / b13;
    c[1][2] = -z * c1 * a3 / b13;
    c[1][3] = -z * c1 * c3 / b13;
    c[2][0] = c[0][2];
    c[3][0] = c[0][3];
    c[2][1] = c[1][2];
    c[3][1] = c[1][3];
    Ok(CoefficientSet {
        c,
        z,
        bracket: [b1, b3],
        brace: [c1b, c3b],
    })
}

/// `F(x', x) = Σ C_jl e^{i p_j max(x',x) + i p_l min(x',x)}`.
pub fn kernel_f(xp: f64, x: f64, c: &CoefficientSet, r: &RootData) -> Complex64 {
    kernel_f_partial(xp, x, 0, c, r)
}

/// `∂ⁿF/∂x'ⁿ` from the analytic derivatives of the plane waves, on the branch
/// selected by the sign of `x' − x` (`x' ≥ x` picks the `max = x'` branch).
pub fn kernel_f_partial(
    xp: f64,
    x: f64,
    n: u32,
    c: &CoefficientSet,
    r: &RootData,
) -> Complex64 {
    let p = &r.roots;
    let lower = xp >= x;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..4 {
        for l in 0..4 {
            let (phase, d) = if lower {
                (p[j] * xp + p[l] * x, I * p[j])
            } else {
                (p[j] * x + p[l] * xp, I * p[l])
            };
            acc += c.c[j][l] * d.powu(n) * (I * phase).exp();
        }
    }
    acc
}

/// Regular parts of the six components from which all sixteen follow.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BaseComponents {
    /// `𝒯^{(1)2+}`
    pub t12: Complex64,
    /// `𝒯^{(2)2+}`
    pub t22: Complex64,
    /// `𝒯^{(3)2+}`
    pub t32: Complex64,
    /// `𝒯^{2+}`
    pub t02: Complex64,
    /// `𝒯^{(1)1+}`
    pub t11: Complex64,
    /// `𝒯^{(3)1+}`
    pub t31: Complex64,
}

/// Roots and coefficients of the vertex at one total energy.
#[derive(Debug, Clone)]
pub struct VertexContext {
    pub params: SystemParams,
    pub energy: f64,
    pub roots: RootData,
    /// `None` when `Γ₁Γ₂ = 0`: the irreducible kernel vanishes identically.
    pub coeffs: Option<CoefficientSet>,
}

impl VertexContext {
    pub fn new(e: f64, p: &SystemParams) -> Result<Self> {
        let roots = compute_roots(e, p)?;
        let coeffs = if p.gamma1 * p.gamma2 == 0.0 {
            None
        } else {
            Some(compute_coefficients(&roots, p.separation)?)
        };
        Ok(Self {
            params: *p,
            energy: e,
            roots,
            coeffs,
        })
    }

    pub fn is_coupled(&self) -> bool {
        self.coeffs.is_some()
    }

    pub fn f(&self, xp: f64, x: f64) -> Complex64 {
        match &self.coeffs {
            Some(c) => kernel_f(xp, x, c, &self.roots),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn f_partial(&self, xp: f64, x: f64, n: u32) -> Complex64 {
        match &self.coeffs {
            Some(c) => kernel_f_partial(xp, x, n, c, &self.roots),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Regular parts of `𝒯^{(1)2+}`, `𝒯^{(2)2+}`, `𝒯^{(3)2+}`, `𝒯^{2+}`,
    /// `𝒯^{(1)1+}`, `𝒯^{(3)1+}` at `(k', k)`.
    pub fn base_components(&self, kp: f64, k: f64) -> BaseComponents {
        let Some(cs) = &self.coeffs else {
            return BaseComponents::default();
        };
        let s = &self.params;
        let e = self.energy;
        let sep = s.separation;
        let c = &cs.c;
        let p = &self.roots.roots;
        let (lam, b) = (self.roots.lambda, self.roots.asym);
        let al = Complex64::new(0.5 * e - kp, 0.0);
        let be = Complex64::new(0.5 * e - k, 0.0);
        let er: [Complex64; 4] = std::array::from_fn(|j| (I * p[j] * sep).exp());
        let tri = |a: Complex64, bb: Complex64, t: Triangle| triangle_integral(a, bb, t, sep);
        let (g1, g2) = (s.gamma1, s.gamma2);
        let g12 = (g1 * g2).sqrt();
        let pi = std::f64::consts::PI;

        // per-root factors
        let quad: [Complex64; 4] = std::array::from_fn(|j| (p[j] - b) * (p[j] - b) - lam * lam);
        let cube: [Complex64; 4] = std::array::from_fn(|j| quad[j] * (p[j] + lam + b));
        let lin: [Complex64; 4] = std::array::from_fn(|j| p[j] + lam - b);
        let dual: [Complex64; 4] = std::array::from_fn(|j| p[j] - lam + b);

        let mut acc12 = Complex64::new(0.0, 0.0);
        let mut acc22 = acc12;
        let mut acc32 = acc12;
        let mut acc02 = acc12;
        let mut acc11 = acc12;
        let mut acc31 = acc12;
        for j in 0..4 {
            for l in 0..4 {
                let cjl = c[j][l];
                let lo_pp = tri(al + p[j], be + p[l], Triangle::Lower);
                let up_pp = tri(al + p[l], be + p[j], Triangle::Upper);
                acc12 += cjl * (lo_pp + up_pp);
                acc32 += cjl * (quad[j] * lo_pp + quad[l] * up_pp);

                let sw = tri(al - p[j], be + p[l], Triangle::SouthWest);
                let ne = tri(al - p[l], be + p[j], Triangle::NorthEast);
                acc22 += cjl * (cube[j] * er[j] * sw + cube[l] * er[l] * ne);
                acc02 += cjl * (lin[j] * er[j] * sw + lin[l] * er[l] * ne);

                let e2 = er[j] * er[l];
                let up_mm = tri(al - p[j], be - p[l], Triangle::Upper);
                let lo_mm = tri(al - p[l], be - p[j], Triangle::Lower);
                acc11 += cjl * e2 * (lin[l] / dual[j] * up_mm + lin[j] / dual[l] * lo_mm);
                acc31 += cjl * e2 * lin[j] * lin[l] * (up_mm + lo_mm);
            }
        }
        let ph = |x: f64| (I * x).exp();
        BaseComponents {
            t12: -I * g1 / pi * acc12,
            t22: ph(-1.5 * e * sep - 3.0 * s.phase) / (8.0 * pi * g2 * g12) * acc22,
            t32: -I * ph(-e * sep - 2.0 * s.phase) / (4.0 * pi * g12) * acc32,
            t02: ph(-0.5 * e * sep - s.phase) / (2.0 * pi) * acc02,
            t11: I * g12 / pi * acc11,
            t31: I * ph(-e * sep - 2.0 * s.phase) / (4.0 * pi * g1) * acc31,
        }
    }
}

/// `+` or `−` superscript of a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// The sixteen components `𝒯^{(a)β±}(k', k)` at fixed `E`, split into a regular
/// part and the residue of the direct pole `1/(E − k' − k)`.
///
/// Index order is `[a][β][sign]`, with `a = 0` the unsuperscripted family,
/// `β ∈ {0, 1}` for qubits 1 and 2, and `sign` 0 for `+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexComponents {
    pub energy: f64,
    pub kp: f64,
    pub k: f64,
    pub regular: [[[Complex64; 2]; 2]; 4],
    pub pole_residue: [[[f64; 2]; 2]; 4],
}

impl VertexComponents {
    pub fn regular(&self, a: usize, beta: usize, sign: Sign) -> Complex64 {
        self.regular[a][beta][sign as usize]
    }

    pub fn residue(&self, a: usize, beta: usize, sign: Sign) -> f64 {
        self.pole_residue[a][beta][sign as usize]
    }

    /// Full value with the pole realized as a principal value (`k' + k ≠ E`).
    pub fn principal_value(&self, a: usize, beta: usize, sign: Sign) -> Complex64 {
        let den = self.energy - self.kp - self.k;
        self.regular(a, beta, sign) + self.residue(a, beta, sign) / den
    }
}

/// Vertex contexts at `E` for the parameters and for the swapped parameters.
#[derive(Debug, Clone)]
pub struct VertexPair {
    pub direct: VertexContext,
    pub swapped: VertexContext,
}

impl VertexPair {
    pub fn new(e: f64, p: &SystemParams) -> Result<Self> {
        Ok(Self {
            direct: VertexContext::new(e, p)?,
            swapped: VertexContext::new(e, &p.swapped())?,
        })
    }

    /// All sixteen components through the transposition (`k' ↔ k`) and qubit
    /// exchange relations.
    pub fn components(&self, kp: f64, k: f64) -> VertexComponents {
        let a = self.direct.base_components(kp, k);
        let at = self.direct.base_components(k, kp);
        let b = self.swapped.base_components(kp, k);
        let bt = self.swapped.base_components(k, kp);
        let p = &self.direct.params;
        let zero = Complex64::new(0.0, 0.0);
        let mut reg = [[[zero; 2]; 2]; 4];
        let (plus, minus) = (Sign::Plus as usize, Sign::Minus as usize);
        reg[0][0][plus] = at.t02;
        reg[0][1][plus] = a.t02;
        reg[0][0][minus] = b.t02;
        reg[0][1][minus] = bt.t02;
        reg[1][0][plus] = a.t11;
        reg[1][1][plus] = a.t12;
        reg[1][0][minus] = b.t12;
        reg[1][1][minus] = b.t11;
        reg[2][0][plus] = bt.t22;
        reg[2][1][plus] = a.t22;
        reg[2][0][minus] = b.t22;
        reg[2][1][minus] = at.t22;
        reg[3][0][plus] = a.t31;
        reg[3][1][plus] = a.t32;
        reg[3][0][minus] = b.t32;
        reg[3][1][minus] = b.t31;
        VertexComponents {
            regular: reg,
            ..direct_components(self.direct.energy, kp, k, p)
        }
    }
}

/// Components with only the direct pole terms, as used in the Markov limit.
pub fn direct_components(e: f64, kp: f64, k: f64, p: &SystemParams) -> VertexComponents {
    let pi = std::f64::consts::PI;
    let g12 = (p.gamma1 * p.gamma2).sqrt() / pi;
    let zero = Complex64::new(0.0, 0.0);
    let mut res = [[[0.0; 2]; 2]; 4];
    let (plus, minus) = (Sign::Plus as usize, Sign::Minus as usize);
    res[1][1][plus] = p.gamma1 / pi;
    res[1][0][plus] = g12;
    res[1][0][minus] = p.gamma2 / pi;
    res[1][1][minus] = g12;
    VertexComponents {
        energy: e,
        kp,
        k,
        regular: [[[zero; 2]; 2]; 4],
        pole_residue: res,
    }
}

pub fn all_components(kp: f64, k: f64, e: f64, p: &SystemParams) -> Result<VertexComponents> {
    Ok(VertexPair::new(e, p)?.components(kp, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic() -> SystemParams {
        SystemParams::new(0.3, -0.7, 0.5, 0.9, 1.3, 0.4).unwrap()
    }

    fn sample() -> SystemParams {
        SystemParams::new(2.0, -2.0, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn roots_solve_quartic_and_pair_up() {
        for (p, e) in [(sample(), 0.0), (generic(), 0.2), (generic(), -3.1)] {
            let r = compute_roots(e, &p).unwrap();
            assert_eq!(r.roots[1], -r.roots[0]);
            assert_eq!(r.roots[3], -r.roots[2]);
            for q in r.roots {
                assert!(r.residual(q) < 1e-12, "residual {}", r.residual(q));
            }
        }
    }

    #[test]
    fn roots_factorize_when_nu_vanishes() {
        let p = SystemParams::new(0.3, -0.7, 0.5, 0.0, 1.3, 0.4).unwrap();
        let r = compute_roots(0.2, &p).unwrap();
        let (l, b) = (r.lambda, r.asym);
        let want = [l + b, l - b];
        for q in [r.p1(), r.p3()] {
            assert!(want.iter().any(|w| (q - w).norm() < 1e-12 || (q + w).norm() < 1e-12));
        }
    }

    #[test]
    fn tracker_keeps_roots_continuous() {
        let p = generic();
        let mut t = RootTracker::new();
        let mut prev: Option<RootData> = None;
        for i in 0..400 {
            let e = -4.0 + 0.02 * i as f64;
            let r = t.next(e, &p).unwrap();
            if let Some(q) = prev {
                assert!((r.p1() - q.p1()).norm() < 0.2 && (r.p3() - q.p3()).norm() < 0.2);
            }
            prev = Some(r);
        }
    }

    #[test]
    fn relabeled_roots_give_same_kernel() {
        let p = generic();
        let r = compute_roots(0.2, &p).unwrap();
        let c = compute_coefficients(&r, p.separation).unwrap();
        let other = RootData {
            inner: -r.inner,
            roots: [-r.p3(), r.p3(), r.p1(), -r.p1()],
            ..r
        };
        let c2 = compute_coefficients(&other, p.separation).unwrap();
        for (xp, x) in [(0.9, 0.4), (0.2, 1.1), (1.3, 0.0)] {
            let a = kernel_f(xp, x, &c, &r);
            let b = kernel_f(xp, x, &c2, &other);
            assert!((a - b).norm() < 1e-13 * a.norm().max(1.0));
        }
    }

    #[test]
    fn coefficient_symmetry_pattern() {
        let p = generic();
        let r = compute_roots(0.2, &p).unwrap();
        let c = compute_coefficients(&r, p.separation).unwrap().c;
        assert_eq!(c[0][2], c[2][0]);
        assert_eq!(c[0][3], c[3][0]);
        assert_eq!(c[1][2], c[2][1]);
        assert_eq!(c[1][3], c[3][1]);
        assert!((c[0][1] - c[1][0]).norm() > 1e-6);
        assert!((c[2][3] - c[3][2]).norm() > 1e-6);
    }

    #[test]
    fn symmetric_qubits_have_vanishing_z() {
        let p = SystemParams::new(0.5, 0.5, 0.4, 0.4, 2.0, 0.3).unwrap();
        let r = compute_roots(0.1, &p).unwrap();
        let c = compute_coefficients(&r, p.separation).unwrap();
        assert_eq!(c.z, Complex64::new(0.0, 0.0));
        assert_eq!(c.c[0][2], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn kernel_symmetric_and_vanishes_at_far_edge() {
        let p = sample();
        let ctx = VertexContext::new(0.0, &p).unwrap();
        for (xp, x) in [(0.3, 0.8), (0.95, 0.1), (0.5, 0.5)] {
            assert!((ctx.f(xp, x) - ctx.f(x, xp)).norm() < 1e-15);
        }
        for x in [0.0, 0.25, 0.7, 1.0] {
            assert!(ctx.f(p.separation, x).norm() < 1e-13);
        }
    }

    #[test]
    fn transposition_and_exchange_chains() {
        let p = generic();
        let pair = VertexPair::new(0.2, &p).unwrap();
        let swapped = VertexPair::new(0.2, &p.swapped()).unwrap();
        let (kp, k) = (0.45, -0.8);
        let w = pair.components(kp, k);
        let wt = pair.components(k, kp);
        let wi = swapped.components(kp, k);
        let (pl, mi) = (Sign::Plus, Sign::Minus);
        let close = |a: Complex64, b: Complex64| (a - b).norm() < 1e-12 * a.norm().max(1e-3);
        // T^{1+} <-T-> T^{2+} <-I-> T^{1-} <-T-> T^{2-}
        assert!(close(w.regular(0, 0, pl), wt.regular(0, 1, pl)));
        assert!(close(w.regular(0, 1, pl), wi.regular(0, 0, mi)));
        assert!(close(w.regular(0, 0, mi), wt.regular(0, 1, mi)));
        // T^{(1)2+} is T-invariant, T^{(1)1+} <-T-> T^{(1)2-}
        assert!(close(w.regular(1, 1, pl), wt.regular(1, 1, pl)));
        assert!(close(w.regular(1, 0, pl), wt.regular(1, 1, mi)));
        assert!(close(w.regular(1, 0, pl), wi.regular(1, 1, mi)));
        // (2): 1+ <-T-> 1- <-I-> 2+ <-T-> 2-
        assert!(close(w.regular(2, 0, pl), wt.regular(2, 0, mi)));
        assert!(close(w.regular(2, 0, mi), wi.regular(2, 1, pl)));
        assert!(close(w.regular(2, 1, pl), wt.regular(2, 1, mi)));
        // (3): 1+ T-invariant, 1+ <-I-> 2-, 1- <-I or T-> 2+
        assert!(close(w.regular(3, 0, pl), wt.regular(3, 0, pl)));
        assert!(close(w.regular(3, 0, pl), wi.regular(3, 1, mi)));
        assert!(close(w.regular(3, 0, mi), wt.regular(3, 1, pl)));
        assert!(close(w.regular(3, 0, mi), wi.regular(3, 1, pl)));
    }

    #[test]
    fn symmetric_qubits_fix_exchange() {
        let p = SystemParams::new(0.5, 0.5, 0.4, 0.4, 2.0, 0.3).unwrap();
        let w = all_components(0.3, -0.2, 0.1, &p).unwrap();
        let d = w.regular(0, 0, Sign::Plus) - w.regular(0, 0, Sign::Minus);
        assert!(d.norm() < 1e-13);
    }

    #[test]
    fn decoupled_components_vanish() {
        let p = SystemParams::new(0.3, -0.7, 0.5, 0.0, 1.3, 0.4).unwrap();
        let w = all_components(0.3, -0.2, 0.1, &p).unwrap();
        for a in 0..4 {
            for beta in 0..2 {
                for s in [Sign::Plus, Sign::Minus] {
                    assert_eq!(w.regular(a, beta, s), Complex64::new(0.0, 0.0));
                }
            }
        }
        assert!((w.residue(1, 1, Sign::Plus) - 0.5 / std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(w.residue(1, 0, Sign::Plus), 0.0);
    }

    #[test]
    fn direct_residues() {
        let p = generic();
        let w = all_components(0.3, -0.2, 0.1, &p).unwrap();
        let pi = std::f64::consts::PI;
        let g12 = (p.gamma1 * p.gamma2).sqrt() / pi;
        assert!((w.residue(1, 0, Sign::Plus) - g12).abs() < 1e-15);
        assert!((w.residue(1, 0, Sign::Minus) - p.gamma2 / pi).abs() < 1e-15);
        assert_eq!(w.residue(0, 0, Sign::Plus), 0.0);
    }
}
