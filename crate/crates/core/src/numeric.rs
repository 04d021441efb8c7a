//! Exponential divided differences, closed-form triangle integrals and
//! Gauss–Legendre rules.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::params::I;

const TAYLOR_SMALL: f64 = 1e-4;

/// `(e^{izL} − 1)/z`, switching to a Taylor series for `|zL| < 1e-4`.
pub fn exp_ratio(z: Complex64, len: f64) -> Complex64 {
    let w = I * z * len;
    if w.norm() < TAYLOR_SMALL {
        // (e^w - 1)/z = iL (1 + w/2 + w²/6 + w³/24 + w⁴/120 + w⁵/720)
        let series = Complex64::new(1.0, 0.0)
            + w * (1.0 / 2.0
                + w * (1.0 / 6.0 + w * (1.0 / 24.0 + w * (1.0 / 120.0 + w / 720.0))));
        I * len * series
    } else {
        (w.exp() - 1.0) / z
    }
}

/// `(e^{ia} − e^{ib})/(a − b)` with the removable singularity at `a = b`.
pub fn exp_difference_quotient(a: Complex64, b: Complex64) -> Complex64 {
    I * dd1(I * a, I * b)
}

/// First divided difference of `exp`: `(e^a − e^b)/(a − b)`.
pub fn dd1(a: Complex64, b: Complex64) -> Complex64 {
    let h = 0.5 * (a - b);
    let m = 0.5 * (a + b);
    let s = if h.norm() < 1e-3 {
        let h2 = h * h;
        1.0 + h2 * (1.0 / 6.0 + h2 * (1.0 / 120.0 + h2 / 5040.0))
    } else {
        h.sinh() / h
    };
    m.exp() * s
}

const DD2_TERMS: usize = 30;

/// Second divided difference of `exp` on three (possibly coincident) nodes.
pub fn dd2(z0: Complex64, z1: Complex64, z2: Complex64) -> Complex64 {
    let d01 = (z0 - z1).norm();
    let d12 = (z1 - z2).norm();
    let d02 = (z0 - z2).norm();
    let dmax = d01.max(d12).max(d02);
    if dmax < 1.0 {
        let c = (z0 + z1 + z2) / 3.0;
        let (w0, w1, w2) = (z0 - c, z1 - c, z2 - c);
        // Σ_m h_m(w0, w1, w2)/(m+2)!, with h_m the complete homogeneous polynomials.
        let mut h1 = Complex64::new(1.0, 0.0);
        let mut h2 = h1;
        let mut h3 = h1;
        let mut pw = h1;
        let mut inv_fact = 0.5;
        let mut total = h3 * inv_fact;
        for m in 1..DD2_TERMS {
            pw *= w0;
            h1 = pw;
            h2 = h1 + w1 * h2;
            h3 = h2 + w2 * h3;
            inv_fact /= (m + 2) as f64;
            total += h3 * inv_fact;
        }
        return c.exp() * total;
    }
    let (a, b, mid) = if d02 >= d01 && d02 >= d12 {
        (z0, z2, z1)
    } else if d01 >= d12 {
        (z0, z1, z2)
    } else {
        (z1, z2, z0)
    };
    (dd1(a, mid) - dd1(mid, b)) / (a - b)
}

/// Integration region in the `(x', x)` plane of the square `[0,R]²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Triangle {
    /// `x' > x`
    Lower,
    /// `x > x'`
    Upper,
    /// `x' + x < R`
    SouthWest,
    /// `x' + x > R`
    NorthEast,
}

impl Triangle {
    pub fn vertices(self, r: f64) -> [(f64, f64); 3] {
        match self {
            Triangle::Lower => [(0.0, 0.0), (r, 0.0), (r, r)],
            Triangle::Upper => [(0.0, 0.0), (0.0, r), (r, r)],
            Triangle::SouthWest => [(0.0, 0.0), (r, 0.0), (0.0, r)],
            Triangle::NorthEast => [(r, 0.0), (0.0, r), (r, r)],
        }
    }

    pub fn contains(self, xp: f64, x: f64, r: f64) -> bool {
        match self {
            Triangle::Lower => xp > x,
            Triangle::Upper => x > xp,
            Triangle::SouthWest => xp + x < r,
            Triangle::NorthEast => xp + x > r,
        }
    }
}

/// `∫∫_T e^{i(A x' + B x)} dx' dx` over one of the four half-squares of `[0,R]²`.
pub fn triangle_integral(a: Complex64, b: Complex64, tri: Triangle, r: f64) -> Complex64 {
    let v = tri.vertices(r);
    let l = |(u, w): (f64, f64)| I * (a * u + b * w);
    // every half-square has area R²/2, and ∫_T e^ℓ = 2·Area·[ℓ₀,ℓ₁,ℓ₂]exp
    r * r * dd2(l(v[0]), l(v[1]), l(v[2]))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre: need at least one node");
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let off = kf / (4.0 * kf * kf - 1.0).sqrt();
        jac[(k, k - 1)] = off;
        jac[(k - 1, k)] = off;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    // polish nodes with Newton steps on P_n and recompute weights from P_n'
    for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        for _ in 0..3 {
            let (p, dp) = legendre_with_derivative(n, *x);
            *x -= p / dp;
        }
        let (_, dp) = legendre_with_derivative(n, *x);
        *w = 2.0 / ((1.0 - *x * *x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights on `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        self.on(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

/// Composite trapezoid weights for an arbitrary increasing grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (grid[i] - grid[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}
