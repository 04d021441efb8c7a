//! Effective one-photon vertices, the doubly excited sector, the reducible
//! vertex and the full two-photon vertex in qubit and photon bases.
//!
//! Operator slots of the one-excitation sector map onto 2×2 matrix positions
//! in the basis `{|eg⟩, |ge⟩}`:
//!
//! | slot            | position |
//! |-----------------|----------|
//! | `P₊₋`           | `[0,0]`  |
//! | `P₋₊`           | `[1,1]`  |
//! | `σ₋⁽¹⁾σ₊⁽²⁾`    | `[1,0]`  |
//! | `σ₊⁽¹⁾σ₋⁽²⁾`    | `[0,1]`  |
//!
//! The sixteen irreducible components land in the qubit-basis table
//! `𝒲[(β', β)]` as follows (qubit indices 0-based):
//!
//! | `(β', β)` | `[0,0]`     | `[1,0]`     | `[0,1]`     | `[1,1]`     |
//! |-----------|-------------|-------------|-------------|-------------|
//! | `(0,0)`   | `𝒯^{(1)2+}` | `𝒯^{(2)2+}` | `𝒯^{(2)2−}` | `𝒯^{(3)2−}` |
//! | `(1,1)`   | `𝒯^{(3)1+}` | `𝒯^{(2)1+}` | `𝒯^{(2)1−}` | `𝒯^{(1)1−}` |
//! | `(0,1)`   | `𝒯^{1+}`    | `𝒯^{(1)1+}` | `𝒯^{(3)1−}` | `𝒯^{1−}`    |
//! | `(1,0)`   | `𝒯^{2+}`    | `𝒯^{(3)2+}` | `𝒯^{(1)2−}` | `𝒯^{2−}`    |

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::closed_form_vertex::{Sign, VertexComponents, VertexContext, VertexPair};
use crate::error::{Error, Result};
use crate::numeric::{exp_difference_quotient, exp_ratio};
use crate::params::{SystemParams, I};
use crate::single_photon::basis_phase;

/// Position of component `(a, β, sign)` in the qubit-basis table:
/// `((β', β), (row, col))`.
pub const fn slot(a: usize, beta: usize, sign: Sign) -> ((usize, usize), (usize, usize)) {
    match (a, beta, sign) {
        (0, 0, Sign::Plus) => ((0, 1), (0, 0)),
        (0, 1, Sign::Plus) => ((1, 0), (0, 0)),
        (0, 0, Sign::Minus) => ((0, 1), (1, 1)),
        (0, 1, Sign::Minus) => ((1, 0), (1, 1)),
        (1, 0, Sign::Plus) => ((0, 1), (1, 0)),
        (1, 1, Sign::Plus) => ((0, 0), (0, 0)),
        (1, 0, Sign::Minus) => ((1, 1), (1, 1)),
        (1, 1, Sign::Minus) => ((1, 0), (0, 1)),
        (2, 0, Sign::Plus) => ((1, 1), (1, 0)),
        (2, 1, Sign::Plus) => ((0, 0), (1, 0)),
        (2, 0, Sign::Minus) => ((1, 1), (0, 1)),
        (2, 1, Sign::Minus) => ((0, 0), (0, 1)),
        (3, 0, Sign::Plus) => ((1, 1), (0, 0)),
        (3, 1, Sign::Plus) => ((1, 0), (1, 0)),
        (3, 0, Sign::Minus) => ((0, 1), (0, 1)),
        (3, 1, Sign::Minus) => ((0, 0), (1, 1)),
        _ => panic!("slot: component index out of range"),
    }
}

/// Two-photon vertex in the qubit basis, indexed `[β'][β]`.
pub type QubitTable = [[Matrix2<Complex64>; 2]; 2];

fn zero_table() -> QubitTable {
    [[Matrix2::zeros(); 2]; 2]
}

/// Places the sixteen components, substituting `pole` for `1/(E − k' − k)`.
pub fn irreducible_table(w: &VertexComponents, pole: Complex64, regular: bool) -> QubitTable {
    let mut t = zero_table();
    for a in 0..4 {
        for beta in 0..2 {
            for sign in [Sign::Plus, Sign::Minus] {
                let ((bp, b), (r, c)) = slot(a, beta, sign);
                let mut v = pole * w.residue(a, beta, sign);
                if regular {
                    v += w.regular(a, beta, sign);
                }
                t[bp][b][(r, c)] += v;
            }
        }
    }
    t
}

/// Evaluates `f^{2+}` and `f^{1+}` on one vertex context; the `−` family
/// follows from the same code on the swapped context.
fn f_plus_pair(ctx: &VertexContext, k: f64) -> (Complex64, Complex64) {
    let s = &ctx.params;
    let g2 = s.coupling(1);
    let Some(cs) = &ctx.coeffs else {
        return (Complex64::new(0.0, 0.0), Complex64::new(g2, 0.0));
    };
    let r = &ctx.roots;
    let (lam, b, nu) = (r.lambda, r.asym, r.nu);
    let p = &r.roots;
    let sep = s.separation;
    let e = ctx.energy;
    let be = Complex64::new(0.5 * e - k, 0.0);
    let mut acc2 = Complex64::new(0.0, 0.0);
    let mut acc1 = Complex64::new(0.0, 0.0);
    for j in 0..4 {
        let erj = (I * p[j] * sep).exp();
        let pj_b = p[j] + b;
        let w2 = p[j] * (1.0 - 2.0 * I * lam * nu / (pj_b * pj_b - lam * lam)) * erj;
        let w1 = (p[j] - 2.0 * I * lam * nu / (p[j] - lam + b)) * erj;
        let mut s2 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        for l in 0..4 {
            let cjl = cs.c[j][l];
            s2 += cjl * exp_ratio(be + p[l], sep);
            // (e^{ip_l R} − e^{iβR})/(β − p_l)
            let q = -sep * exp_difference_quotient(be * sep, p[l] * sep);
            s1 += cjl * (p[l] + lam - b) * q;
        }
        acc2 += w2 * s2;
        acc1 += w1 * s1;
    }
    let pre2 = (I * (-0.5 * e * sep - s.phase)).exp()
        / (2.0 * (std::f64::consts::PI * s.gamma2).sqrt());
    let f2 = pre2 * acc2;
    let f1 = g2 + g2 * acc1 / (2.0 * lam * nu);
    (f2, f1)
}

/// Half of `σ₊₊` with `b → bs·b`; the roots and `sqrt(b² − ν²)` stay fixed.
fn sigma_half(ctx: &VertexContext, bs: f64) -> Complex64 {
    let r = &ctx.roots;
    let sep = ctx.params.separation;
    let (lam, nu, sq) = (r.lambda, r.nu, r.inner);
    let b = bs * r.asym;
    let (p1, p3) = (r.p1(), r.p3());
    let br = |p: Complex64| {
        let e = (I * p * sep).exp();
        (e * (p + b - lam) + (p + lam - b) / e, e * (p + b - lam) - (p + lam - b) / e)
    };
    let (b1, c1) = br(p1);
    let (b3, c3) = br(p3);
    let d = p1 * p1 - 2.0 * b * p1 * c1 / b1 - p3 * p3 + 2.0 * b * p3 * c3 / b3;
    let s1 = (p1 * sep).sin() / b1;
    let s3 = (p3 * sep).sin() / b3;
    -8.0 * I * lam * lam * nu / d * ((nu + I * b) * (s1 - s3) + I * sq * (s1 + s3))
}

/// `σ₊₊` and `g₊₊ = 1/(E − Ω̃₁ − Ω̃₂ − σ₊₊)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublyExcitedSector {
    pub sigma_pp: Complex64,
    pub g_pp: Complex64,
}

impl DoublyExcitedSector {
    pub fn exact(ctx: &VertexContext) -> Result<Self> {
        let sigma_pp = if ctx.is_coupled() {
            sigma_half(ctx, 1.0) + sigma_half(ctx, -1.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        Self::with_sigma(ctx.energy, &ctx.params, sigma_pp)
    }

    pub fn bare(e: f64, p: &SystemParams) -> Result<Self> {
        Self::with_sigma(e, p, Complex64::new(0.0, 0.0))
    }

    fn with_sigma(e: f64, p: &SystemParams, sigma_pp: Complex64) -> Result<Self> {
        let den = e - p.omega_tilde(0) - p.omega_tilde(1) - sigma_pp;
        if den.norm() < 1e-14 || !den.is_finite() {
            return Err(Error::SingularGreen(den));
        }
        Ok(Self {
            sigma_pp,
            g_pp: 1.0 / den,
        })
    }
}

pub fn sigma_plus_plus(e: f64, p: &SystemParams) -> Result<DoublyExcitedSector> {
    DoublyExcitedSector::exact(&VertexContext::new(e, p)?)
}

/// The four effective vertex functions at fixed `E`.
#[derive(Debug, Clone)]
pub struct EffectiveVertexFunctions {
    pair: VertexPair,
}

/// Values of the four effective vertices at one momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveValues {
    pub f1_plus: Complex64,
    pub f1_minus: Complex64,
    pub f2_plus: Complex64,
    pub f2_minus: Complex64,
}

impl EffectiveValues {
    /// Vectors `u_{β}` with `W^{(r)}[(β',β)] = g₊₊ u_{β'}(k') u_β(k)ᵀ`.
    pub fn vectors(&self) -> [Vector2<Complex64>; 2] {
        [
            Vector2::new(self.f2_plus, self.f2_minus),
            Vector2::new(self.f1_plus, self.f1_minus),
        ]
    }

    /// Markov vertices: the bare couplings.
    pub fn bare(p: &SystemParams) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            f1_plus: Complex64::new(p.coupling(1), 0.0),
            f1_minus: z,
            f2_plus: z,
            f2_minus: Complex64::new(p.coupling(0), 0.0),
        }
    }
}

pub fn effective_values(pair: &VertexPair, k: f64) -> EffectiveValues {
    let (f2_plus, f1_plus) = f_plus_pair(&pair.direct, k);
    let (f1_minus, f2_minus) = f_plus_pair(&pair.swapped, k);
    EffectiveValues {
        f1_plus,
        f1_minus,
        f2_plus,
        f2_minus,
    }
}

impl EffectiveVertexFunctions {
    pub fn from_pair(pair: VertexPair) -> Self {
        Self { pair }
    }

    pub fn at(&self, k: f64) -> EffectiveValues {
        effective_values(&self.pair, k)
    }
}

pub fn f_functions(e: f64, p: &SystemParams) -> Result<EffectiveVertexFunctions> {
    Ok(EffectiveVertexFunctions::from_pair(VertexPair::new(e, p)?))
}

/// `𝒲^{(r)}[(β', β)] = g₊₊ u_{β'}(k') u_β(k)ᵀ`.
pub fn reducible_table(out: &EffectiveValues, inp: &EffectiveValues, g_pp: Complex64) -> QubitTable {
    let uo = out.vectors();
    let ui = inp.vectors();
    let mut t = zero_table();
    for bp in 0..2 {
        for b in 0..2 {
            t[bp][b] = uo[bp] * ui[b].transpose() * g_pp;
        }
    }
    t
}

pub fn w_reducible(kp: f64, k: f64, e: f64, p: &SystemParams) -> Result<QubitTable> {
    let pair = VertexPair::new(e, p)?;
    let g = DoublyExcitedSector::exact(&pair.direct)?.g_pp;
    let f = EffectiveVertexFunctions::from_pair(pair);
    Ok(reducible_table(&f.at(kp), &f.at(k), g))
}

/// `W_{s's} = Σ_{β'β} 𝒲[(β',β)] t*_{β'α'}(k') t_{βα}(k)`.
pub fn photon_basis(
    table: &QubitTable,
    alpha_out: usize,
    kp: f64,
    alpha_in: usize,
    k: f64,
    p: &SystemParams,
) -> Matrix2<Complex64> {
    let mut w = Matrix2::zeros();
    for (bp, row) in table.iter().enumerate() {
        let to = basis_phase(alpha_out, bp, kp, p).conj();
        for (b, m) in row.iter().enumerate() {
            w += m * (to * basis_phase(alpha_in, b, k, p));
        }
    }
    w
}

pub fn add_tables(a: &QubitTable, b: &QubitTable) -> QubitTable {
    let mut t = *a;
    for bp in 0..2 {
        for b_ in 0..2 {
            t[bp][b_] += b[bp][b_];
        }
    }
    t
}

/// Exact or Markov (non-crossing) treatment of the vertex corrections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    Markov,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Markov => "markov",
        })
    }
}

#[derive(Debug, Clone)]
struct ExactCore {
    pair: VertexPair,
    g_pp: Complex64,
    energy: f64,
}

/// Everything needed to build the full two-photon vertex at one total energy.
#[derive(Debug, Clone)]
pub struct VertexModel {
    pub params: SystemParams,
    pub energy: f64,
    pub mode: Mode,
    /// One core, or two straddling a degenerate-root energy.
    cores: Vec<ExactCore>,
    markov_g_pp: Complex64,
}

/// Energy offset (in units of `Γ_max`) used to step off degenerate roots.
pub const DEGENERATE_SHIFT: f64 = 1e-7;

impl VertexModel {
    pub fn new(e: f64, p: &SystemParams, mode: Mode) -> Result<Self> {
        p.validate()?;
        let markov_g_pp = DoublyExcitedSector::bare(e, p)?.g_pp;
        let cores = match mode {
            Mode::Markov => Vec::new(),
            Mode::Exact => match Self::core(e, p) {
                Ok(c) => vec![c],
                Err(Error::DegenerateRoots(_)) => {
                    let h = DEGENERATE_SHIFT * p.gamma_max().max(1e-300);
                    log::warn!("degenerate roots at E = {e}; averaging E ± {h:e}");
                    vec![Self::core(e - h, p)?, Self::core(e + h, p)?]
                }
                Err(err) => return Err(err),
            },
        };
        Ok(Self {
            params: *p,
            energy: e,
            mode,
            cores,
            markov_g_pp,
        })
    }

    fn core(e: f64, p: &SystemParams) -> Result<ExactCore> {
        let pair = VertexPair::new(e, p)?;
        let g_pp = DoublyExcitedSector::exact(&pair.direct)?.g_pp;
        Ok(ExactCore {
            pair,
            g_pp,
            energy: e,
        })
    }

    pub fn g_pp(&self) -> Complex64 {
        match self.mode {
            Mode::Markov => self.markov_g_pp,
            Mode::Exact => {
                self.cores.iter().map(|c| c.g_pp).sum::<Complex64>() / self.cores.len() as f64
            }
        }
    }

    pub fn effective(&self, k: f64) -> EffectiveValues {
        match self.mode {
            Mode::Markov => EffectiveValues::bare(&self.params),
            Mode::Exact => {
                let n = self.cores.len() as f64;
                let mut v = [Complex64::new(0.0, 0.0); 4];
                for c in &self.cores {
                    let f = effective_values(&c.pair, k);
                    for (acc, x) in v.iter_mut().zip([f.f1_plus, f.f1_minus, f.f2_plus, f.f2_minus]) {
                        *acc += x / n;
                    }
                }
                EffectiveValues {
                    f1_plus: v[0],
                    f1_minus: v[1],
                    f2_plus: v[2],
                    f2_minus: v[3],
                }
            }
        }
    }

    /// Full qubit-basis vertex `𝒲 = 𝒲^{(i)} + 𝒲^{(r)}` at `(k', k)`, with the
    /// direct pole `1/(E − k' − k)` realized as a principal value.
    pub fn qubit_table(&self, kp: f64, k: f64) -> QubitTable {
        let p = &self.params;
        match self.mode {
            Mode::Markov => {
                let pole = Complex64::new(1.0 / (self.energy - kp - k), 0.0);
                let w = crate::closed_form_vertex::direct_components(self.energy, kp, k, p);
                let irr = irreducible_table(&w, pole, false);
                let f = EffectiveValues::bare(p);
                add_tables(&irr, &reducible_table(&f, &f, self.markov_g_pp))
            }
            Mode::Exact => {
                let n = self.cores.len() as f64;
                let mut acc = zero_table();
                for c in &self.cores {
                    let pole = Complex64::new(1.0 / (c.energy - kp - k), 0.0);
                    let w = c.pair.components(kp, k);
                    let irr = irreducible_table(&w, pole, true);
                    let red = reducible_table(
                        &effective_values(&c.pair, kp),
                        &effective_values(&c.pair, k),
                        c.g_pp,
                    );
                    acc = add_tables(&acc, &add_tables(&irr, &red));
                }
                for row in acc.iter_mut() {
                    for m in row.iter_mut() {
                        *m /= Complex64::new(n, 0.0);
                    }
                }
                acc
            }
        }
    }
}

pub fn full_w_photon_basis(
    channels: (usize, usize),
    momenta: (f64, f64),
    e: f64,
    p: &SystemParams,
    mode: Mode,
) -> Result<Matrix2<Complex64>> {
    let model = VertexModel::new(e, p, mode)?;
    let t = model.qubit_table(momenta.0, momenta.1);
    Ok(photon_basis(&t, channels.0, momenta.0, channels.1, momenta.1, p))
}
