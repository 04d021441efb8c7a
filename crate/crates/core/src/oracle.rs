//! Independent numerical checks of the vertex solution.
//!
//! Nothing here evaluates the production kernel, coefficients or closed-form
//! integrals. The oracle builds its own plane-wave coefficients by solving the
//! boundary and jump conditions of the fourth-order problem as a linear system,
//! solves the coordinate-space Fredholm equation by Nyström quadrature, and
//! evaluates the component integrals by Gauss–Legendre quadrature.
//!
//! Momentum integrals over `k'` of components written as
//! `∫₀ᴿdx' e^{i(E/2−k')x'} g(x')` reduce to `π g(0)` (half of the delta at the
//! endpoint), and integrals against `M̄^±_k` close in the upper half plane on
//! the pole `k = E − Ω̃`. Both reductions turn the effective vertices and
//! `σ₊₊` into one-dimensional quadratures.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::closed_form_vertex::{kernel_f_partial, BaseComponents, CoefficientSet, RootData, VertexContext};
use crate::error::{Error, Result};
use crate::numeric::GaussRule;
use crate::params::{linspace, SystemParams, I};
use crate::effective_objects::Mode;
use crate::scattering::{elastic_part, InputState, Photon, TwoPhotonResult, TwoPhotonSolver};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Largest accepted condition number of an oracle linear system.
pub const MAX_CONDITION: f64 = 1e12;

/// `∫_u^v e^{iqc} dc`.
fn exp_segment(q: Complex64, u: f64, v: f64) -> Complex64 {
    let len = v - u;
    let w = I * q * len;
    let ratio = if w.norm() < 1e-3 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for m in 2..10 {
            term *= w / m as f64;
            sum += term;
        }
        len * sum
    } else {
        (w.exp() - 1.0) / (I * q)
    };
    (I * q * u).exp() * ratio
}

/// Roots and plane-wave coefficients of `F` from the boundary-value problem.
#[derive(Debug, Clone)]
pub struct OracleSystem {
    pub params: SystemParams,
    pub energy: f64,
    pub lambda: Complex64,
    pub asym: Complex64,
    pub nu: Complex64,
    /// `[p₁, −p₁, p₃, −p₃]`.
    pub roots: [Complex64; 4],
    pub coeffs: [[Complex64; 4]; 4],
    /// `C_jl m_jl` with `m_jl` the largest `|e^{i(p_j x' + p_l x)}|` on `x' ≥ x`.
    scaled: [[Complex64; 4]; 4],
    /// `ln m_jl`
    log_scale: [[f64; 4]; 4],
    /// Largest residual of the boundary system at the solution.
    pub solve_residual: f64,
    /// Condition number of the equilibrated boundary system.
    pub condition: f64,
}

impl OracleSystem {
    pub fn new(e: f64, p: &SystemParams) -> Result<Self> {
        p.validate()?;
        let o1 = p.omega_tilde(0);
        let o2 = p.omega_tilde(1);
        let lambda = 0.5 * (e - o1 - o2);
        let asym = 0.5 * (o1 - o2);
        let nu = 4.0 * I * p.gamma1 * p.gamma2 * (I * (e * p.separation + 2.0 * p.phase)).exp() / (e - o1 - o2);
        let (l2, b2, n2) = (lambda * lambda, asym * asym, nu * nu);
        // p² solves u² − 2(λ²+b²)u + (λ²−b²)² + 4λ²ν² = 0
        let s = l2 + b2;
        let disc = (s * s - (l2 - b2) * (l2 - b2) - 4.0 * l2 * n2).sqrt();
        let (u1, u3) = (s + disc, s - disc);
        let scale = s.norm().max(disc.norm()).max(f64::MIN_POSITIVE);
        if disc.norm() < 1e-9 * scale || u1.norm() < 1e-12 * scale || u3.norm() < 1e-12 * scale {
            return Err(Error::DegenerateRoots(e));
        }
        let (p1, p3) = (u1.sqrt(), u3.sqrt());
        let roots = [p1, -p1, p3, -p3];
        let mut sys = Self {
            params: *p,
            energy: e,
            lambda,
            asym,
            nu,
            roots,
            coeffs: [[ZERO; 4]; 4],
            scaled: [[ZERO; 4]; 4],
            log_scale: std::array::from_fn(|j| {
                std::array::from_fn(|l| {
                    let r = p.separation;
                    0.0f64.max(-roots[j].im * r).max(-(roots[j] + roots[l]).im * r)
                })
            }),
            solve_residual: 0.0,
            condition: 1.0,
        };
        if p.gamma1 * p.gamma2 > 0.0 {
            sys.solve_boundary_system()?;
        }
        Ok(sys)
    }

    /// Fills `coeffs` from F(R,x)=0, the slope condition at x'=0, the curvature
    /// condition at x'=R, continuity of F, F', F'' across x'=x, the jump of F'''
    /// and the third-derivative condition at (0⁺, 0).
    fn solve_boundary_system(&mut self) -> Result<()> {
        let p = self.roots;
        let (lam, b, nu) = (self.lambda, self.asym, self.nu);
        let r = self.params.separation;
        let src = -4.0 * lam * lam * nu * nu;
        let idx = |j: usize, l: usize| 4 * j + l;
        let mut rows: Vec<([Complex64; 16], Complex64)> = Vec::new();
        let er: [Complex64; 4] = std::array::from_fn(|j| (I * p[j] * r).exp());
        for l in 0..4 {
            let mut a = [ZERO; 16];
            let mut c = [ZERO; 16];
            for j in 0..4 {
                a[idx(j, l)] = er[j];
                c[idx(j, l)] = (-p[j] * p[j] + 2.0 * b * p[j]) * er[j];
            }
            rows.push((a, ZERO));
            rows.push((c, ZERO));
        }
        for j in 0..4 {
            let mut a = [ZERO; 16];
            for l in 0..4 {
                a[idx(j, l)] = I * p[l] + I * (lam - b);
            }
            rows.push((a, ZERO));
        }
        for (j, l) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            let mut a = [ZERO; 16];
            a[idx(j, l)] = Complex64::new(1.0, 0.0);
            a[idx(l, j)] = Complex64::new(-1.0, 0.0);
            rows.push((a, ZERO));
        }
        for power in [1, 3] {
            let mut a = [ZERO; 16];
            for (j, l) in [(0, 1), (2, 3)] {
                let d = 2.0 * (I * p[j]).powu(power);
                a[idx(j, l)] = d;
                a[idx(l, j)] = -d;
            }
            rows.push((a, if power == 3 { src } else { ZERO }));
        }
        let mut a = [ZERO; 16];
        for j in 0..4 {
            let ip = I * p[j];
            for l in 0..4 {
                a[idx(j, l)] = ip * ip * ip + I * (lam - b) * ip * ip;
            }
        }
        rows.push((a, src));

        for (row, _) in rows.iter_mut() {
            for j in 0..4 {
                for l in 0..4 {
                    row[idx(j, l)] *= (-self.log_scale[j][l]).exp();
                }
            }
        }
        let m = rows.len();
        let mut mat = DMatrix::<Complex64>::zeros(m, 16);
        let mut rhs = DVector::<Complex64>::zeros(m);
        for (i, (row, y)) in rows.iter().enumerate() {
            let scale = row.iter().fold(0.0f64, |s, v| s.max(v.norm())).max(f64::MIN_POSITIVE);
            for k in 0..16 {
                mat[(i, k)] = row[k] / scale;
            }
            rhs[i] = y / scale;
        }
        let mut col_scale = [1.0; 16];
        for (k, cs) in col_scale.iter_mut().enumerate() {
            *cs = mat.column(k).iter().fold(0.0f64, |s, v| s.max(v.norm())).max(f64::MIN_POSITIVE);
            let inv = 1.0 / *cs;
            mat.column_mut(k).scale_mut(inv);
        }
        let svd = mat.clone().svd(true, true);
        let (smax, smin) = svd
            .singular_values
            .iter()
            .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
        self.condition = smax / smin;
        if !(self.condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned(self.condition));
        }
        let sol = svd
            .solve(&rhs, 0.0)
            .map_err(|_| Error::NonFinite("oracle boundary system"))?;
        self.solve_residual = (&mat * &sol - &rhs).iter().fold(0.0f64, |s, v| s.max(v.norm()));
        for j in 0..4 {
            for l in 0..4 {
                self.scaled[j][l] = sol[idx(j, l)] / col_scale[idx(j, l)];
                self.coeffs[j][l] = self.scaled[j][l] * (-self.log_scale[j][l]).exp();
            }
        }
        Ok(())
    }

    /// `Σ C_jl w_jl e^{ip_j a + ip_l b}` for `a, b ∈ [0, R]`.
    fn sum(&self, weight: impl Fn(usize, usize) -> Complex64, (a, b): (f64, f64)) -> Complex64 {
        let p = &self.roots;
        let mut acc = ZERO;
        for j in 0..4 {
            for l in 0..4 {
                let wave = (I * (p[j] * a + p[l] * b) - self.log_scale[j][l]).exp();
                acc += self.scaled[j][l] * weight(j, l) * wave;
            }
        }
        acc
    }

    /// `F(x', x)` from the oracle coefficients.
    pub fn f(&self, xp: f64, x: f64) -> Complex64 {
        let hl = if xp >= x { (xp, x) } else { (x, xp) };
        self.sum(|_, _| Complex64::new(1.0, 0.0), hl)
    }

    fn quad(&self, j: usize) -> Complex64 {
        let d = self.roots[j] - self.asym;
        d * d - self.lambda * self.lambda
    }

    fn lin(&self, j: usize) -> Complex64 {
        self.roots[j] + self.lambda - self.asym
    }

    /// Integrand of the double integral defining each base component, without
    /// the momentum phases and prefactor.
    pub fn density(&self, which: Component, xp: f64, x: f64) -> Complex64 {
        let p = &self.roots;
        let r = self.params.separation;
        let (lam, b) = (self.lambda, self.asym);
        match which {
            Component::T12 => self.f(xp, x),
            Component::T32 => {
                if xp >= x {
                    self.sum(|j, _| self.quad(j), (xp, x))
                } else {
                    self.sum(|_, l| self.quad(l), (x, xp))
                }
            }
            Component::T22 | Component::T02 => {
                let w = |j: usize| match which {
                    Component::T22 => self.quad(j) * (p[j] + lam + b),
                    _ => self.lin(j),
                };
                if xp + x < r {
                    self.sum(|j, _| w(j), ((r - xp), x))
                } else {
                    self.sum(|_, l| w(l), (x, (r - xp)))
                }
            }
            Component::T11 => {
                let dual = |j: usize| p[j] - lam + b;
                if x > xp {
                    self.sum(|j, l| self.lin(l) / dual(j), ((r - xp), (r - x)))
                } else {
                    self.sum(|j, l| self.lin(j) / dual(l), ((r - x), (r - xp)))
                }
            }
            Component::T31 => {
                if x > xp {
                    self.sum(|j, l| self.lin(j) * self.lin(l), ((r - xp), (r - x)))
                } else {
                    self.sum(|j, l| self.lin(j) * self.lin(l), ((r - x), (r - xp)))
                }
            }
        }
    }

    /// Prefactor multiplying the double integral of [`Self::density`].
    pub fn prefactor(&self, which: Component) -> Complex64 {
        let s = &self.params;
        let (e, r, phi) = (self.energy, s.separation, s.phase);
        let (g1, g2) = (s.gamma1, s.gamma2);
        let g12 = (g1 * g2).sqrt();
        let ph = |x: f64| (I * x).exp();
        match which {
            Component::T12 => -I * g1 / PI,
            Component::T22 => ph(-1.5 * e * r - 3.0 * phi) / (2.0 * PI * 4.0 * g2 * g12),
            Component::T32 => -I * ph(-e * r - 2.0 * phi) / (4.0 * PI * g12),
            Component::T02 => ph(-0.5 * e * r - phi) / (2.0 * PI),
            Component::T11 => I * g12 / PI,
            Component::T31 => I * ph(-e * r - 2.0 * phi) / (4.0 * PI * g1),
        }
    }

    /// Regular part of a base component at `(k', k)` by Gauss quadrature with
    /// `q` nodes per direction on each smooth piece of the square.
    pub fn component(&self, which: Component, kp: f64, k: f64, q: usize) -> Complex64 {
        if self.params.gamma1 * self.params.gamma2 == 0.0 {
            return ZERO;
        }
        let r = self.params.separation;
        let e = self.energy;
        let rule = GaussRule::new(q);
        let mut acc = ZERO;
        for (u, v) in [(0.0, 0.5 * r), (0.5 * r, r)] {
            for (x, wx) in rule.on(u, v) {
                let (lo, hi) = if x < r - x { (x, r - x) } else { (r - x, x) };
                let mut inner = ZERO;
                for (a, bnd) in [(0.0, lo), (lo, hi), (hi, r)] {
                    for (xp, wp) in rule.on(a, bnd) {
                        let phase = (0.5 * e - kp) * xp + (0.5 * e - k) * x;
                        inner += wp * self.density(which, xp, x) * Complex64::from_polar(1.0, phase);
                    }
                }
                acc += wx * inner;
            }
        }
        self.prefactor(which) * acc
    }

    /// All six base components at `(k', k)`.
    pub fn base_components(&self, kp: f64, k: f64, q: usize) -> BaseComponents {
        BaseComponents {
            t12: self.component(Component::T12, kp, k, q),
            t22: self.component(Component::T22, kp, k, q),
            t32: self.component(Component::T32, kp, k, q),
            t02: self.component(Component::T02, kp, k, q),
            t11: self.component(Component::T11, kp, k, q),
            t31: self.component(Component::T31, kp, k, q),
        }
    }

    /// `x ↦ h(x)` with `f^{2+}_k = ∫₀ᴿ e^{i(E/2−k)x} h(x) dx` and the same for
    /// `f^{1+}` minus its constant term.
    fn vertex_profiles(&self, x: f64) -> (Complex64, Complex64) {
        let s = &self.params;
        let (g1, g2) = (s.gamma1, s.gamma2);
        let f2 = I / (PI * g2).sqrt() * PI * self.prefactor(Component::T02) * self.density(Component::T02, 0.0, x)
            + I / (PI * g1).sqrt() * PI * self.prefactor(Component::T22) * self.density(Component::T22, 0.0, x);
        let f1 = I / (PI * g2).sqrt() * PI * self.prefactor(Component::T31) * self.density(Component::T31, 0.0, x)
            + I / (PI * g1).sqrt() * PI * self.prefactor(Component::T11) * self.density(Component::T11, 0.0, x);
        (f2, f1)
    }

    /// `(f^{2+}_k, f^{1+}_k)` from the coordinate-space reduction.
    pub fn effective_plus(&self, k: f64, q: usize) -> (Complex64, Complex64) {
        let s = &self.params;
        let c2 = Complex64::new(s.coupling(1), 0.0);
        if s.gamma1 * s.gamma2 == 0.0 {
            return (ZERO, c2);
        }
        let r = s.separation;
        let rule = GaussRule::new(q);
        let (mut f2, mut f1) = (ZERO, c2);
        for (x, w) in rule.on(0.0, r) {
            let (h2, h1) = self.vertex_profiles(x);
            let ph = Complex64::from_polar(w, (0.5 * self.energy - k) * x);
            f2 += ph * h2;
            f1 += ph * h1;
        }
        (f2, f1)
    }

    /// `∫dk f^{2+}_k M̄^+_k`, closed on the pole `k = E − Ω̃₁`.
    fn sigma_half(&self, q: usize) -> Complex64 {
        let s = &self.params;
        let r = s.separation;
        let e = self.energy;
        let k0 = e - s.omega_tilde(0);
        let rule = GaussRule::new(q);
        let mut acc = ZERO;
        for (x, w) in rule.on(0.0, r) {
            let (h2, _) = self.vertex_profiles(x);
            acc += w * h2 * (I * (0.5 * e * x + k0 * (r - x))).exp();
        }
        -2.0 * PI * I * (I * s.phase).exp() * acc
    }
}

/// The six base components computed directly; the rest follow by symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// `𝒯^{(1)2+}`
    T12,
    /// `𝒯^{(2)2+}`
    T22,
    /// `𝒯^{(3)2+}`
    T32,
    /// `𝒯^{2+}`
    T02,
    /// `𝒯^{(1)1+}`
    T11,
    /// `𝒯^{(3)1+}`
    T31,
}

/// Effective vertices `(f^{1+}, f^{1−}, f^{2+}, f^{2−})` at `k` by quadrature.
pub fn effective_oracle(k: f64, e: f64, p: &SystemParams, q: usize) -> Result<[Complex64; 4]> {
    let direct = OracleSystem::new(e, p)?;
    let swapped = OracleSystem::new(e, &p.swapped())?;
    let (f2p, f1p) = direct.effective_plus(k, q);
    let (f1m, f2m) = swapped.effective_plus(k, q);
    Ok([f1p, f1m, f2p, f2m])
}

/// `σ₊₊(E)` by quadrature.
pub fn sigma_oracle(e: f64, p: &SystemParams, q: usize) -> Result<Complex64> {
    if p.gamma1 * p.gamma2 == 0.0 {
        return Ok(ZERO);
    }
    let direct = OracleSystem::new(e, p)?;
    let swapped = OracleSystem::new(e, &p.swapped())?;
    Ok(p.coupling(1) * direct.sigma_half(q) + p.coupling(0) * swapped.sigma_half(q))
}

/// The chain `f⁺ f⁻ f⁻ f⁺` of truncated exponentials behind `f⁽⁴⁾`.
#[derive(Debug, Clone, Copy)]
struct Chain {
    pref: Complex64,
    alpha: Complex64,
    beta: Complex64,
    lambda: Complex64,
    r: f64,
}

impl Chain {
    fn new(e: f64, p: &SystemParams) -> Self {
        let o1 = p.omega_tilde(0);
        let o2 = p.omega_tilde(1);
        let lambda = 0.5 * (e - o1 - o2);
        let b = 0.5 * (o1 - o2);
        let ph = (I * (0.5 * e * p.separation + p.phase)).exp();
        Self {
            pref: 4.0 * p.gamma1 * p.gamma2 * ph * ph,
            alpha: lambda - b,
            beta: lambda + b,
            lambda,
            r: p.separation,
        }
    }

    /// `A(a, c) = ∫₀ᴿ dx f⁺(a+x) f⁻(x+c)` as exponentials `coef·e^{i rate c}`
    /// on the side `c < a` (`below`) or `c > a`.
    fn terms(&self, a: f64, below: bool) -> [(Complex64, Complex64); 2] {
        let r = self.r;
        let base = self.pref * (I * (self.alpha * (r - a) + self.beta * r)).exp();
        let two_l = 2.0 * self.lambda;
        if below {
            let len = r - a;
            let phi = exp_segment(-two_l, 0.0, len);
            [(base * phi, -self.beta), (ZERO, ZERO)]
        } else {
            let d = -I * two_l;
            [
                (base * (-I * two_l * r).exp() / d, self.alpha),
                (-base / d, -self.beta),
            ]
        }
    }

    /// `f⁽⁴⁾(x', x) = ∫₀ᴿ dc A(x', c) A(x, c)`.
    fn f4(&self, xp: f64, x: f64) -> Complex64 {
        let (lo, hi) = if xp <= x { (xp, x) } else { (x, xp) };
        let mut acc = ZERO;
        for (u, v) in [(0.0, lo), (lo, hi), (hi, self.r)] {
            if v <= u {
                continue;
            }
            let mid = 0.5 * (u + v);
            let ta = self.terms(xp, mid < xp);
            let tb = self.terms(x, mid < x);
            for (ca, qa) in ta {
                if ca == ZERO {
                    continue;
                }
                for (cb, qb) in tb {
                    if cb == ZERO {
                        continue;
                    }
                    acc += ca * cb * exp_segment(qa + qb, u, v);
                }
            }
        }
        acc
    }
}

/// `f⁽⁴⁾(x', x)` by analytic nesting of the exponential primitives.
pub fn kernel_f4(xp: f64, x: f64, p: &SystemParams, e: f64) -> Complex64 {
    if p.gamma1 * p.gamma2 == 0.0 {
        return ZERO;
    }
    Chain::new(e, p).f4(xp, x)
}

const SPLIT_NODES: usize = 20;
const PANEL_NODES: usize = 4;

/// Nyström solution of `F = f⁽⁴⁾ + ∫₀ᴿ f⁽⁴⁾ F`, iterated once so that the
/// discretized unknown `G = F − f⁽⁴⁾` is smooth across the diagonal.
#[derive(Debug, Clone)]
pub struct NystromSolution {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `F(x_i, x_j)` on the node grid.
    pub values: DMatrix<Complex64>,
    /// Condition number of `1 − K₂W`.
    pub condition: f64,
    g: DMatrix<Complex64>,
    panel_nodes: Vec<f64>,
    panel_weights: Vec<f64>,
    /// `f⁽⁴⁾(y_m, x_j)` on the panel nodes.
    k_panel: DMatrix<Complex64>,
    chain: Option<Chain>,
    split: GaussRule,
}

impl NystromSolution {
    fn k(&self, a: f64, b: f64) -> Complex64 {
        self.chain.map_or(ZERO, |c| c.f4(a, b))
    }

    fn k2(&self, a: f64, b: f64) -> Complex64 {
        match &self.chain {
            Some(c) => k2_split(c, &self.split, a, b),
            None => ZERO,
        }
    }

    /// `∫ K₂(a, y) K(y, b) dy` split at `a` and `b`.
    fn k3_split(&self, a: f64, b: f64) -> Complex64 {
        let Some(c) = &self.chain else {
            return ZERO;
        };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut acc = ZERO;
        for (u, v) in [(0.0, lo), (lo, hi), (hi, c.r)] {
            if v > u {
                for (y, w) in self.split.on(u, v) {
                    acc += w * k2_split(c, &self.split, a, y) * c.f4(y, b);
                }
            }
        }
        acc
    }

    /// `G(b, x_j)` for all nodes from the Nyström interpolation formula.
    fn g_row(&self, b: f64) -> Vec<Complex64> {
        let n = self.nodes.len();
        let k2b: Vec<Complex64> = (0..self.panel_nodes.len()).map(|m| self.k2(b, self.panel_nodes[m])).collect();
        let k2n: Vec<Complex64> = self.nodes.iter().map(|&x| self.k2(b, x)).collect();
        (0..n)
            .map(|j| {
                let k3: Complex64 = (0..self.panel_nodes.len())
                    .map(|m| self.panel_weights[m] * k2b[m] * self.k_panel[(m, j)])
                    .sum();
                let sum: Complex64 = (0..n).map(|l| self.weights[l] * k2n[l] * self.g[(l, j)]).sum();
                k2n[j] + k3 + sum
            })
            .collect()
    }

    /// `F(a, b)` anywhere in the square.
    pub fn interpolate(&self, a: f64, b: f64) -> Complex64 {
        if self.chain.is_none() {
            return ZERO;
        }
        let gb = self.g_row(b);
        let tail: Complex64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .zip(&gb)
            .map(|((&x, &w), &g)| w * self.k2(a, x) * g)
            .sum();
        self.k(a, b) + self.k2(a, b) + self.k3_split(a, b) + tail
    }

    /// Largest `|F(x_i, x_j) − F(x_j, x_i)|` on the grid.
    pub fn asymmetry(&self) -> f64 {
        let n = self.nodes.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                m = m.max((self.values[(i, j)] - self.values[(j, i)]).norm());
            }
        }
        m
    }
}

fn k2_split(c: &Chain, rule: &GaussRule, a: f64, b: f64) -> Complex64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut acc = ZERO;
    for (u, v) in [(0.0, lo), (lo, hi), (hi, c.r)] {
        if v > u {
            for (y, w) in rule.on(u, v) {
                acc += w * c.f4(a, y) * c.f4(y, b);
            }
        }
    }
    acc
}

/// Solves the coordinate-space equation on an `n`-point Gauss–Legendre grid.
pub fn nystrom_solve(p: &SystemParams, e: f64, n: usize) -> Result<NystromSolution> {
    if n < 16 {
        return Err(Error::InvalidParameter(format!("Nystrom order must be at least 16, got {n}")));
    }
    p.validate()?;
    let r = p.separation;
    let rule = GaussRule::new(n);
    let (nodes, weights): (Vec<f64>, Vec<f64>) = rule.on(0.0, r).unzip();
    let split = GaussRule::new(SPLIT_NODES);
    let panel = GaussRule::new(PANEL_NODES);
    let mut bp = vec![0.0];
    bp.extend_from_slice(&nodes);
    bp.push(r);
    let (panel_nodes, panel_weights): (Vec<f64>, Vec<f64>) =
        bp.windows(2).flat_map(|w| panel.on(w[0], w[1]).collect::<Vec<_>>()).unzip();
    let np = panel_nodes.len();
    if p.gamma1 * p.gamma2 == 0.0 {
        return Ok(NystromSolution {
            nodes,
            weights,
            values: DMatrix::zeros(n, n),
            condition: 1.0,
            g: DMatrix::zeros(n, n),
            panel_nodes,
            panel_weights,
            k_panel: DMatrix::zeros(np, n),
            chain: None,
            split,
        });
    }
    let chain = Chain::new(e, p);
    let k = DMatrix::from_fn(n, n, |i, j| chain.f4(nodes[i], nodes[j]));
    let mut k2 = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = k2_split(&chain, &split, nodes[i], nodes[j]);
            k2[(i, j)] = v;
            k2[(j, i)] = v;
        }
    }
    let k_panel = DMatrix::from_fn(np, n, |m, j| chain.f4(panel_nodes[m], nodes[j]));
    let k2_panel = DMatrix::from_fn(n, np, |i, m| panel_weights[m] * k2_split(&chain, &split, nodes[i], panel_nodes[m]));
    let k3 = &k2_panel * &k_panel;
    let mut a = DMatrix::<Complex64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] -= k2[(i, j)] * weights[j];
        }
    }
    let sv = a.clone().singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let g = a
        .lu()
        .solve(&(&k2 + &k3))
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    let values = &k + &g;
    Ok(NystromSolution {
        nodes,
        weights,
        values,
        condition,
        g,
        panel_nodes,
        panel_weights,
        k_panel,
        chain: Some(chain),
        split,
    })
}

/// Residuals of the closed-form kernel against its defining conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryReport {
    /// `max_x |F(R, x)|`
    pub vanishing_at_r: f64,
    /// `max_x |∂F(0,x) + i(λ−b)F(0,x)|`
    pub slope_at_zero: f64,
    /// `max_x |∂²F(R,x) − 2ib ∂F(R,x)|`
    pub curvature_at_r: f64,
    /// `|∂³F(0⁺,0) + i(λ−b)∂²F(0⁺,0) + 4λ²ν²|`
    pub third_at_origin: f64,
    /// Finite-difference residual of the fourth-order equation away from
    /// the diagonal, relative to `max |F|`.
    pub ode_interior: f64,
}

impl BoundaryReport {
    pub fn max_boundary(&self) -> f64 {
        self.vanishing_at_r
            .max(self.slope_at_zero)
            .max(self.curvature_at_r)
            .max(self.third_at_origin)
    }
}

impl fmt::Display for BoundaryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vanishing_at_r: {:e}", self.vanishing_at_r)?;
        writeln!(f, "slope_at_zero: {:e}", self.slope_at_zero)?;
        writeln!(f, "curvature_at_r: {:e}", self.curvature_at_r)?;
        writeln!(f, "third_at_origin: {:e}", self.third_at_origin)?;
        writeln!(f, "ode_interior: {:e}", self.ode_interior)
    }
}

/// Step of the finite-difference check, as a fraction of `R`.
pub const FD_STEP_FRACTION: f64 = 1.0 / 2000.0;

/// Boundary and interior residuals of `F` built from `c` and `r`.
///
/// The interior check uses the fourth-order central stencils (five points for
/// the second derivative, seven for the fourth). They are applied plane wave
/// by plane wave through their symbols in `σ = −4 sin²(ph/2)`,
/// `(σ − σ²/12)/h²` and `(σ² − σ³/6)/h⁴`, so the residual carries the
/// truncation error of the stencil without cancellation.
pub fn boundary_residuals(c: &CoefficientSet, r: &RootData, sep: f64) -> BoundaryReport {
    let (lam, b, nu) = (r.lambda, r.asym, r.nu);
    let d = |xp: f64, x: f64, n: u32| kernel_f_partial(xp, x, n, c, r);
    let xs = linspace(0.0, sep, 11);
    let mut rep = BoundaryReport {
        vanishing_at_r: 0.0,
        slope_at_zero: 0.0,
        curvature_at_r: 0.0,
        third_at_origin: 0.0,
        ode_interior: 0.0,
    };
    for &x in &xs {
        rep.vanishing_at_r = rep.vanishing_at_r.max(d(sep, x, 0).norm());
        rep.curvature_at_r = rep.curvature_at_r.max((d(sep, x, 2) - 2.0 * I * b * d(sep, x, 1)).norm());
        if x > 0.0 {
            // x' = 0 < x lies on the other branch; differentiate it via symmetry
            let (f0, f1) = mirrored_slope(c, r, x);
            rep.slope_at_zero = rep.slope_at_zero.max((f1 + I * (lam - b) * f0).norm());
        }
    }
    rep.third_at_origin = (d(0.0, 0.0, 3) + I * (lam - b) * d(0.0, 0.0, 2) + 4.0 * lam * lam * nu * nu).norm();

    let h = FD_STEP_FRACTION * sep;
    let l2 = lam * lam;
    let b2 = b * b;
    let c2 = 2.0 * (l2 + b2);
    let c0 = (l2 - b2) * (l2 - b2) + 4.0 * l2 * nu * nu;
    let mut fmax = 0.0f64;
    let mut res = 0.0f64;
    let pts = linspace(0.05 * sep, 0.95 * sep, 7);
    for &xp in &pts {
        for &x in &pts {
            if (xp - x).abs() < 4.0 * h {
                continue;
            }
            let (hi, lo, upper) = if xp > x { (xp, x, true) } else { (x, xp, false) };
            let mut f = Complex64::new(0.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..4 {
                for l in 0..4 {
                    let (pv, ph) = if upper {
                        (r.roots[j], r.roots[j] * hi + r.roots[l] * lo)
                    } else {
                        (r.roots[l], r.roots[j] * hi + r.roots[l] * lo)
                    };
                    let term = c.c[j][l] * (I * ph).exp();
                    let half = (0.5 * pv * h).sin();
                    let sigma = -4.0 * half * half;
                    let d2 = (sigma - sigma * sigma / 12.0) / (h * h);
                    let d4 = (sigma * sigma - sigma * sigma * sigma / 6.0) / (h * h * h * h);
                    f += term;
                    acc += term * (d4 + c2 * d2 + c0);
                }
            }
            fmax = fmax.max(f.norm());
            res = res.max(acc.norm());
        }
    }
    rep.ode_interior = res / fmax.max(f64::MIN_POSITIVE);
    rep
}

/// `(F(0, x), ∂F/∂x'(0, x))` for `x > 0`, from the `x > x'` branch.
fn mirrored_slope(c: &CoefficientSet, r: &RootData, x: f64) -> (Complex64, Complex64) {
    let mut f0 = Complex64::new(0.0, 0.0);
    let mut f1 = f0;
    for j in 0..4 {
        for l in 0..4 {
            let t = c.c[j][l] * (I * r.roots[j] * x).exp();
            f0 += t;
            f1 += t * I * r.roots[l];
        }
    }
    (f0, f1)
}

/// Residual report for the closed-form kernel of a vertex context; `None`
/// when the qubits are decoupled and `F ≡ 0`.
pub fn verify_f_boundary(ctx: &VertexContext) -> Option<BoundaryReport> {
    ctx.coeffs
        .as_ref()
        .map(|c| boundary_residuals(c, &ctx.roots, ctx.params.separation))
}

/// Two-photon probability bookkeeping on one energy shell.
///
/// With plane-wave inputs the elastic part carries one more energy delta than
/// the inelastic part, so the interference and inelastic terms are reported
/// per unit of that delta and the optical theorem reads
/// `interference + inelastic = 0`. `total` is
/// `elastic + (interference + inelastic)/|interference|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    pub elastic: f64,
    pub interference: f64,
    pub inelastic: f64,
    /// Estimated contribution of `|Δ'|` beyond the grid, included in `inelastic`.
    pub tail: f64,
    pub total: f64,
    pub deviation: f64,
}

impl fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "elastic: {:.17e}", self.elastic)?;
        writeln!(f, "interference: {:.17e}", self.interference)?;
        writeln!(f, "inelastic: {:.17e}", self.inelastic)?;
        writeln!(f, "tail: {:e}", self.tail)?;
        writeln!(f, "total: {:.17e}", self.total)?;
        writeln!(f, "deviation: {:e}", self.deviation)
    }
}

/// Composite Simpson weights on a uniform grid with an odd number of points,
/// trapezoid otherwise.
fn simpson_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs());
    if uniform && n % 2 == 1 && n >= 3 {
        (0..n)
            .map(|i| {
                let c = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect()
    } else {
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let d = 0.5 * (grid[i + 1] - grid[i]);
            w[i] += d;
            w[i + 1] += d;
        }
        w
    }
}

/// Panels of the tail quadrature reach out to this multiple of the grid edge.
pub const TAIL_REACH: f64 = 16.0;

/// `π² Σ|T|²` integrated over `Δ'` from the grid edge `x` outward in the
/// direction `dir`. Composite Gauss–Legendre on panels no wider than `π/R`
/// up to `TAIL_REACH·|x|`, then the `Δ'⁻⁴` law with the mean of `Δ'⁴ π²Σ|T|²`
/// over the last quarter of the panels.
pub fn tail_integral(solver: &TwoPhotonSolver, photons: [Photon; 2], x: f64, dir: f64) -> Result<f64> {
    let start = x.abs();
    if start == 0.0 {
        return Ok(0.0);
    }
    let e = solver.energy();
    let sep = solver.params().separation;
    let stop = TAIL_REACH * start;
    let mut width = start / 8.0;
    if sep > 0.0 {
        width = width.min(PI / sep);
    }
    let panels = ((stop - start) / width).ceil() as usize;
    let h = (stop - start) / panels as f64;
    let rule = GaussRule::new(8);
    let (mut total, mut moment, mut span) = (0.0, 0.0, 0.0);
    for m in 0..panels {
        let (u, v) = (start + m as f64 * h, start + (m + 1) as f64 * h);
        for (d, w) in rule.on(u, v) {
            let t = solver.t4_regular(0.5 * (e + dir * d), photons)?;
            let dens = PI * PI * t.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>();
            total += w * dens;
            if 4 * m >= 3 * panels {
                moment += w * dens * d.powi(4);
                span += w;
            }
        }
    }
    if span > 0.0 {
        total += moment / span / (3.0 * stop.powi(3));
    }
    Ok(total)
}

/// Grid of the budget check: `points` values of `Δ'` over `±40 Γ_max`.
pub fn budget_grid(p: &SystemParams, points: usize) -> Vec<f64> {
    let w = 40.0 * p.gamma_max();
    linspace(-w, w, points)
}

/// Default number of `Δ'` points of [`budget_grid`].
pub const BUDGET_POINTS: usize = 2001;

/// Budget for one input state. `inelastic` integrates `π²|T|²` over `Δ'`
/// for every ordered output channel pair, plus the part beyond the grid
/// from [`tail_integral`].
pub fn unitarity_budget(inp: &InputState, p: &SystemParams, mode: Mode) -> Result<BudgetReport> {
    let solver = TwoPhotonSolver::new(inp.shell.total_energy, p, mode)?;
    let result = TwoPhotonResult::with_solver(&solver, inp)?;
    let photons = inp.photons();
    let el = elastic_part(photons, p);
    let elastic: f64 = el.iter().flatten().map(|c| c.preserved.norm_sqr()).sum();
    let forward = solver.t4_regular(photons[0].momentum, photons)?;
    let grid = &inp.shell.delta_out_grid;
    let w = simpson_weights(grid);
    let n = grid.len();
    let (mut interference, mut inelastic, mut tail) = (0.0, 0.0, 0.0);
    for a1 in 0..2 {
        for a2 in 0..2 {
            interference += 2.0 * (el[a1][a2].preserved.conj() * (-2.0 * PI * I) * forward[a1][a2]).re;
            let dens: Vec<f64> = result.inelastic[a1][a2].iter().map(|v| PI * PI * v.norm_sqr()).collect();
            inelastic += dens.iter().zip(&w).map(|(d, w)| d * w).sum::<f64>();
        }
    }
    if n >= 2 {
        tail = tail_integral(&solver, photons, grid[0], -1.0)? + tail_integral(&solver, photons, grid[n - 1], 1.0)?;
    }
    inelastic += tail;
    let deviation = if interference == 0.0 && inelastic == 0.0 {
        0.0
    } else {
        (interference + inelastic) / interference.abs()
    };
    Ok(BudgetReport {
        elastic,
        interference,
        inelastic,
        tail,
        total: elastic + deviation,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective_objects::{f_functions, sigma_plus_plus};
    use crate::params::EnergyShell;

    fn generic() -> SystemParams {
        SystemParams::new(0.3, -0.7, 0.5, 0.9, 1.3, 0.4).unwrap()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn f_sign(p: &SystemParams, e: f64, x: f64, plus: bool) -> Complex64 {
        if x > p.separation {
            return ZERO;
        }
        let o = if plus { p.omega_tilde(0) } else { p.omega_tilde(1) };
        let g = if plus { p.gamma1 } else { p.gamma2 };
        2.0 * g * (I * (0.5 * e * p.separation + p.phase)).exp() * (I * (0.5 * e - o) * (p.separation - x)).exp()
    }

    #[test]
    fn f4_matches_nested_quadrature() {
        let p = generic();
        let e = 0.7;
        let r = p.separation;
        let (xp, x) = (0.3 * r, 0.6 * r);
        let rule = GaussRule::new(24);
        let mut acc = ZERO;
        let outer = if r - x < r - xp { vec![(0.0, r - x), (r - x, r - xp)] } else { vec![(0.0, r - xp)] };
        for (x1, w1) in outer.into_iter().flat_map(|(u, v)| rule.on(u, v).collect::<Vec<_>>()) {
            let top = r - x1;
            let pieces = if x < top { vec![(0.0, x), (x, top)] } else { vec![(0.0, top)] };
            for (u, v) in pieces {
                for (x2, w2) in rule.on(u, v) {
                    for (x3, w3) in rule.on(0.0, (r - x2).min(r - x)) {
                        acc += w1
                            * w2
                            * w3
                            * f_sign(&p, e, xp + x1, true)
                            * f_sign(&p, e, x1 + x2, false)
                            * f_sign(&p, e, x2 + x3, false)
                            * f_sign(&p, e, x3 + x, true);
                    }
                }
            }
        }
        assert!((kernel_f4(xp, x, &p, e) - acc).norm() < 1e-8, "{} vs {acc}", kernel_f4(xp, x, &p, e));
        assert!((kernel_f4(xp, x, &p, e) - kernel_f4(x, xp, &p, e)).norm() < 1e-14);
    }

    #[test]
    fn f4_decouples() {
        let p = SystemParams::new(1.0, -1.0, 0.5, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(kernel_f4(0.2, 0.4, &p, 0.3), ZERO);
        let ny = nystrom_solve(&p, 0.3, 16).unwrap();
        assert!(ny.values.iter().all(|v| *v == ZERO));
        assert_eq!(ny.interpolate(0.1, 0.5), ZERO);
    }

    #[test]
    fn exp_segment_branches_agree() {
        let u = 0.2;
        for q in [Complex64::new(1e-4, 2e-4), Complex64::new(0.3, -0.1)] {
            let direct = ((I * q * 1.2).exp() - (I * q * u).exp()) / (I * q);
            assert!(rel(exp_segment(q, u, 1.2), direct) < 1e-10);
        }
    }

    #[test]
    fn boundary_solve_reproduces_kernel() {
        for gr in [0.5, 1.0, 10.0, 20.0] {
            let p = SystemParams::transparency(2.0, gr);
            let e = 4.3;
            let o = OracleSystem::new(e, &p).unwrap();
            let ctx = VertexContext::new(e, &p).unwrap();
            assert!(o.condition < 1e3);
            let r = p.separation;
            for i in 0..5 {
                for j in 0..5 {
                    let (a, b) = (r * i as f64 / 4.0, r * j as f64 / 4.0);
                    assert!((o.f(a, b) - ctx.f(a, b)).norm() < 1e-12, "gr {gr} at ({a}, {b})");
                }
            }
        }
    }

    #[test]
    fn component_quadrature_matches_production() {
        for gr in [1.0, 10.0] {
            let p = SystemParams::transparency(2.0, gr);
            let e = 4.3;
            let o = OracleSystem::new(e, &p).unwrap();
            let ctx = VertexContext::new(e, &p).unwrap();
            let (kp, k) = (1.7, 2.9);
            let a = o.base_components(kp, k, 32);
            let b = ctx.base_components(kp, k);
            for (x, y) in [(a.t12, b.t12), (a.t22, b.t22), (a.t32, b.t32), (a.t02, b.t02), (a.t11, b.t11), (a.t31, b.t31)] {
                assert!(rel(x, y) < 1e-7, "gr {gr}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn effective_vertices_and_sigma_match_production() {
        for p in [generic(), SystemParams::transparency(2.0, 1.0)] {
            let e = 1.9;
            let k = 0.8;
            let got = effective_oracle(k, e, &p, 48).unwrap();
            let v = f_functions(e, &p).unwrap().at(k);
            for (x, y) in got.iter().zip([v.f1_plus, v.f1_minus, v.f2_plus, v.f2_minus]) {
                assert!(rel(*x, y) < 1e-10, "{x} vs {y}");
            }
            let s = sigma_oracle(e, &p, 48).unwrap();
            assert!(rel(s, sigma_plus_plus(e, &p).unwrap().sigma_pp) < 1e-10);
        }
    }

    #[test]
    fn nystrom_matches_closed_form() {
        let p = SystemParams::transparency(2.0, 1.0);
        let e = 0.7;
        let ny = nystrom_solve(&p, e, 64).unwrap();
        let ctx = VertexContext::new(e, &p).unwrap();
        let mut sup = 0.0f64;
        for (i, &a) in ny.nodes.iter().enumerate() {
            for (j, &b) in ny.nodes.iter().enumerate() {
                sup = sup.max((ny.values[(i, j)] - ctx.f(a, b)).norm());
            }
        }
        assert!(sup < 1e-6);
        assert!(ny.asymmetry() < 1e-12);
        assert!(ny.condition < 10.0);
        let r = p.separation;
        assert!((ny.interpolate(0.21 * r, 0.83 * r) - ctx.f(0.21 * r, 0.83 * r)).norm() < 1e-9);
    }

    #[test]
    fn nystrom_order_convergence() {
        let p = SystemParams::transparency(2.0, 1.0);
        let e = 0.7;
        let lo = nystrom_solve(&p, e, 64).unwrap();
        let hi = nystrom_solve(&p, e, 96).unwrap();
        let r = p.separation;
        for a in [0.1, 0.45, 0.9] {
            for b in [0.15, 0.5, 0.95] {
                let d = (lo.interpolate(a * r, b * r) - hi.interpolate(a * r, b * r)).norm();
                assert!(d < 1e-9, "({a}, {b}): {d}");
            }
        }
        assert!(matches!(nystrom_solve(&p, e, 8), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn boundary_residuals_vanish() {
        for gr in [1.0, 10.0] {
            let p = SystemParams::transparency(2.0, gr);
            let rep = verify_f_boundary(&VertexContext::new(0.0, &p).unwrap()).unwrap();
            assert!(rep.max_boundary() < 1e-8, "{rep}");
            assert!(rep.ode_interior < 1e-4, "{rep}");
        }
        let sym = SystemParams::new(1.0, 1.0, 0.5, 0.5, 1.0, 0.0).unwrap();
        let rep = verify_f_boundary(&VertexContext::new(0.4, &sym).unwrap()).unwrap();
        assert!(rep.max_boundary() < 1e-8, "{rep}");
        let free = SystemParams::new(1.0, 1.0, 0.5, 0.0, 1.0, 0.0).unwrap();
        assert!(verify_f_boundary(&VertexContext::new(0.4, &free).unwrap()).is_none());
    }

    #[test]
    fn boundary_residuals_detect_perturbation() {
        let p = SystemParams::transparency(2.0, 1.0);
        let ctx = VertexContext::new(0.0, &p).unwrap();
        let mut c = ctx.coeffs.unwrap();
        c.c[0][0] += 1e-3;
        let rep = boundary_residuals(&c, &ctx.roots, p.separation);
        assert!(rep.max_boundary() > 1e-4, "{rep}");
    }

    #[test]
    fn budget_closes() {
        let p = SystemParams::transparency(2.0, 1.0);
        let shell = EnergyShell::new(4.0, 0.6, budget_grid(&p, BUDGET_POINTS)).unwrap();
        let inp = InputState::new((0, 1), shell).unwrap();
        let rep = unitarity_budget(&inp, &p, Mode::Exact).unwrap();
        assert!((rep.total - 1.0).abs() < 1e-4, "{rep}");
        assert!(rep.tail > 0.0);

        let free = SystemParams::new(1.0, -1.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let shell = EnergyShell::new(1.0, 0.2, linspace(-2.0, 2.0, 41)).unwrap();
        let inp = InputState::new((0, 1), shell).unwrap();
        let rep = unitarity_budget(&inp, &free, Mode::Exact).unwrap();
        assert_eq!(rep.total, 1.0);
        assert_eq!(rep.deviation, 0.0);
    }

    #[test]
    fn reports_are_key_value_lines() {
        let p = SystemParams::transparency(2.0, 1.0);
        let rep = verify_f_boundary(&VertexContext::new(0.0, &p).unwrap()).unwrap();
        let text = rep.to_string();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().all(|l| l.split_once(": ").is_some_and(|(_, v)| v.parse::<f64>().is_ok())));
    }
}
