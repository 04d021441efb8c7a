//! Experiment drivers. Each writes one CSV table (or, for `verify`, one
//! `CHECK` line per suite) to the given sink.

use std::io::Write;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use rayon::prelude::*;

use waveqed::observables::default_g2_input;
use waveqed::oracle::{budget_grid, effective_oracle, sigma_oracle, BUDGET_POINTS};
use waveqed::params::linspace;
use waveqed::{
    compute_roots, default_density_grid, f_functions, g2_from_result, nystrom_solve, s1_matrix, sigma_plus_plus,
    unitarity_budget, unitarity_residual, verify_f_boundary, DensityCurve, EnergyShell, InputState, Mode, Photon,
    SystemParams, TwoPhotonResult, TwoPhotonSolver, VertexContext,
};

use crate::config::{Experiment, GridSpec, ModeChoice, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    VerificationFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::VerificationFailed => 2,
        }
    }
}

/// Fixed 17-significant-digit rendering.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Table {
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, axis: Vec<f64>) -> Self {
        Self {
            header: vec![name.to_string()],
            columns: vec![axis],
        }
    }

    fn push(&mut self, name: impl Into<String>, column: Vec<f64>) {
        self.header.push(name.into());
        self.columns.push(column);
    }

    fn write(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for i in 0..self.columns[0].len() {
            w.write_record(self.columns.iter().map(|c| num(c[i])))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn modes(choice: ModeChoice) -> Vec<(Mode, &'static str)> {
    match choice {
        ModeChoice::Exact => vec![(Mode::Exact, "")],
        ModeChoice::Markov => vec![(Mode::Markov, "_markov")],
        ModeChoice::Both => vec![(Mode::Exact, ""), (Mode::Markov, "_markov")],
    }
}

fn energy_scale(p: &SystemParams) -> f64 {
    let s = p.omega1.abs().max(p.omega2.abs()).max(p.gamma_max());
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn axis(grid: Option<GridSpec>, default: impl FnOnce() -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    match grid {
        Some(g) => Ok(linspace(g.start, g.stop, g.points)),
        None => default(),
    }
}

fn s1(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let s = energy_scale(&cfg.params);
    let ks = axis(cfg.grid, || Ok(linspace(-4.0 * s, 4.0 * s, 401)))?;
    let rows: Vec<[f64; 9]> = ks
        .par_iter()
        .map(|&k| {
            let m = s1_matrix(k, &cfg.params);
            let e = |i, j| m[(i, j)];
            let (a, b, c, d): (Complex64, Complex64, Complex64, Complex64) = (e(0, 0), e(0, 1), e(1, 0), e(1, 1));
            [a.re, a.im, b.re, b.im, c.re, c.im, d.re, d.im, unitarity_residual(&m)]
        })
        .collect();
    let mut t = Table::new("k", ks);
    let names = ["re_s11", "im_s11", "re_s12", "im_s12", "re_s21", "im_s21", "re_s22", "im_s22", "unitarity_residual"];
    for (j, name) in names.into_iter().enumerate() {
        t.push(name, rows.iter().map(|r| r[j]).collect());
    }
    t.write(out)
}

fn roots(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let s = energy_scale(&cfg.params);
    let es = axis(cfg.grid, || Ok(linspace(-4.0 * s, 4.0 * s, 401)))?;
    let rows: Vec<[f64; 5]> = es
        .par_iter()
        .map(|&e| match compute_roots(e, &cfg.params) {
            Ok(r) => {
                let res = r.roots.iter().map(|&q| r.residual(q)).fold(0.0, f64::max);
                [r.roots[0].re, r.roots[0].im, r.roots[2].re, r.roots[2].im, res]
            }
            Err(err) => {
                log::warn!("E = {e}: {err}");
                [f64::NAN; 5]
            }
        })
        .collect();
    let mut t = Table::new("energy", es);
    for (j, name) in ["re_p1", "im_p1", "re_p3", "im_p3", "residual"].into_iter().enumerate() {
        t.push(name, rows.iter().map(|r| r[j]).collect());
    }
    t.write(out)
}

fn density(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let grid = axis(cfg.grid, || Ok(default_density_grid(&cfg.params)))?;
    let shell = EnergyShell::new(cfg.energy, cfg.delta, grid.clone()).context("grid")?;
    let inp = InputState::new(cfg.channels, shell)?;
    let mut t = Table::new("delta_out", grid);
    for (mode, suffix) in modes(cfg.mode) {
        let d = DensityCurve::from_result(&TwoPhotonResult::compute(&inp, &cfg.params, mode)?);
        t.push(format!("p_same{suffix}"), d.same());
        t.push(format!("p_opposite{suffix}"), d.opposite);
        t.push(format!("p_rr{suffix}"), d.rr);
        t.push(format!("p_ll{suffix}"), d.ll);
    }
    t.write(out)
}

fn tau_axis(cfg: &RunConfig, default_points: usize) -> Result<Vec<f64>> {
    axis(cfg.grid, || {
        let r = cfg.params.separation;
        match default_points {
            1 if r > 0.0 => Ok(vec![r]),
            1 => bail!("grid.start: missing required key (no default tau when system.separation = 0)"),
            n => {
                let span = if r > 0.0 { 5.0 * r } else { 5.0 / energy_scale(&cfg.params) };
                Ok(linspace(0.0, span, n))
            }
        }
    })
}

fn correlation_result(cfg: &RunConfig, mode: Mode) -> Result<TwoPhotonResult> {
    let inp = default_g2_input(cfg.channels, cfg.energy, cfg.delta, &cfg.params)?;
    Ok(TwoPhotonResult::compute(&inp, &cfg.params, mode)?)
}

fn g2(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let taus = tau_axis(cfg, 201)?;
    let mut t = Table::new("tau", taus.clone());
    for (mode, suffix) in modes(cfg.mode) {
        let s = g2_from_result(&correlation_result(cfg, mode)?, &taus)?;
        t.push(format!("g2_same{suffix}"), s.same().to_vec());
        t.push(format!("g2_cross{suffix}"), s.cross().to_vec());
        t.push(format!("g2_ll{suffix}"), s.channel(1, 1).to_vec());
        t.push(format!("g2_lr{suffix}"), s.channel(1, 0).to_vec());
    }
    t.write(out)
}

fn ratio(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let taus = tau_axis(cfg, 1)?;
    let ex = g2_from_result(&correlation_result(cfg, Mode::Exact)?, &taus)?;
    let mk = g2_from_result(&correlation_result(cfg, Mode::Markov)?, &taus)?;
    let r = waveqed::observables::ratio_of(&ex, &mk, cfg.output_channels)?;
    let mut t = Table::new("tau", taus);
    t.push("ratio", r);
    t.write(out)
}

/// Largest deviation and its tolerance, or the error that prevented the check.
struct Check {
    name: &'static str,
    tolerance: f64,
    residual: Result<f64>,
}

impl Check {
    fn pass(&self) -> bool {
        self.residual.as_ref().is_ok_and(|r| *r < self.tolerance)
    }
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

fn checks(cfg: &RunConfig) -> Vec<Check> {
    let (p, e) = (&cfg.params, cfg.energy);
    let s = energy_scale(p);
    let probes = linspace(-2.0 * s, 2.0 * s, 9);
    let check = |name, tolerance, residual| Check {
        name,
        tolerance,
        residual,
    };
    let boundary = VertexContext::new(e, p).map_err(anyhow::Error::from).and_then(|ctx| {
        verify_f_boundary(&ctx).context("boundary report needs a positive separation")
    });
    vec![
        check(
            "s1_unitarity",
            1e-12,
            Ok(probes.iter().map(|&k| unitarity_residual(&s1_matrix(k, p))).fold(0.0, f64::max)),
        ),
        check(
            "quartic_roots",
            1e-10,
            compute_roots(e, p).map(|r| r.roots.iter().map(|&q| r.residual(q)).fold(0.0, f64::max)).map_err(Into::into),
        ),
        check(
            "nystrom_vs_closed_form",
            1e-6,
            (|| {
                let ctx = VertexContext::new(e, p)?;
                let ny = nystrom_solve(p, e, 64)?;
                let mut sup = 0.0f64;
                for (i, &a) in ny.nodes.iter().enumerate() {
                    for (j, &b) in ny.nodes.iter().enumerate() {
                        sup = sup.max((ny.values[(i, j)] - ctx.f(a, b)).norm());
                    }
                }
                Ok(sup)
            })(),
        ),
        check("kernel_boundary", 1e-8, boundary.as_ref().map(|r| r.max_boundary()).map_err(|e| anyhow::anyhow!("{e}"))),
        check("kernel_ode_interior", 1e-4, boundary.map(|r| r.ode_interior)),
        check(
            "effective_vertices",
            1e-6,
            (|| {
                let f = f_functions(e, p)?;
                let mut worst = 0.0f64;
                for &k in &probes {
                    let v = f.at(k);
                    let o = effective_oracle(k, e, p, 64)?;
                    for (x, y) in o.iter().zip([v.f1_plus, v.f1_minus, v.f2_plus, v.f2_minus]) {
                        worst = worst.max(rel(*x, y));
                    }
                }
                Ok(worst)
            })(),
        ),
        check(
            "doubly_excited_self_energy",
            1e-6,
            (|| Ok(rel(sigma_oracle(e, p, 64)?, sigma_plus_plus(e, p)?.sigma_pp)))(),
        ),
        check(
            "bosonic_symmetry",
            1e-12,
            (|| {
                let solver = TwoPhotonSolver::new(e, p, Mode::Exact)?;
                let (k1, k2) = (0.5 * (e + cfg.delta), 0.5 * (e - cfg.delta));
                let inp = [Photon::new(cfg.channels.0, k1), Photon::new(cfg.channels.1, k2)];
                let mut worst = 0.0f64;
                for &d in &probes {
                    let out = [Photon::new(0, 0.5 * (e + d)), Photon::new(1, 0.5 * (e - d))];
                    let t = solver.t4(out, inp)?;
                    let swapped = solver.t4([out[1], out[0]], [inp[1], inp[0]])?;
                    worst = worst.max((t - swapped).norm() / t.norm().max(1.0));
                }
                Ok(worst)
            })(),
        ),
        check(
            "two_photon_budget",
            1e-4,
            (|| {
                let shell = EnergyShell::new(e, cfg.delta, budget_grid(p, BUDGET_POINTS))?;
                let rep = unitarity_budget(&InputState::new(cfg.channels, shell)?, p, Mode::Exact)?;
                Ok((rep.total - 1.0).abs())
            })(),
        ),
    ]
}

fn verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status> {
    let mut status = Status::Success;
    for c in checks(cfg) {
        let verdict = if c.pass() { "pass" } else { "fail" };
        if !c.pass() {
            status = Status::VerificationFailed;
        }
        let residual = match &c.residual {
            Ok(r) => num(*r),
            Err(e) => {
                log::error!("{}: {e:#}", c.name);
                "nan".to_string()
            }
        };
        writeln!(out, "CHECK {} {verdict} {residual}", c.name)?;
    }
    Ok(status)
}

pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status> {
    match cfg.experiment {
        Experiment::S1 => s1(cfg, out)?,
        Experiment::Roots => roots(cfg, out)?,
        Experiment::Density => density(cfg, out)?,
        Experiment::G2 => g2(cfg, out)?,
        Experiment::Ratio => ratio(cfg, out)?,
        Experiment::Verify => return verify(cfg, out),
    }
    Ok(Status::Success)
}
