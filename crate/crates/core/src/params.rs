//! Physical parameters, energy shell and index conventions.
//!
//! Units are fixed to ħ = v_g = 1. Qubits and channels are indexed 0 and 1
//! internally; index 0 is qubit 1 / the right-moving channel, index 1 is
//! qubit 2 / the left-moving channel.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexAmplitude = Complex64;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `c = +1` for index 0 and `c = -1` for index 1.
#[inline]
pub fn sign_factor(index: usize) -> f64 {
    match index {
        0 => 1.0,
        1 => -1.0,
        _ => panic!("sign_factor: index {index} outside {{0, 1}}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega1: f64,
    pub omega2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub separation: f64,
    pub phase: f64,
}

impl SystemParams {
    pub fn new(
        omega1: f64,
        omega2: f64,
        gamma1: f64,
        gamma2: f64,
        separation: f64,
        phase: f64,
    ) -> Result<Self> {
        let p = Self {
            omega1,
            omega2,
            gamma1,
            gamma2,
            separation,
            phase,
        };
        p.validate()?;
        Ok(p)
    }

    /// Antisymmetric detuning `Ω₁ = -Ω₂ = Ω`, `Γ₁ = Γ₂ = Ω/2`, `φ = 0`, with
    /// the separation chosen so that `ΓR` equals `gamma_r`.
    pub fn transparency(omega: f64, gamma_r: f64) -> Self {
        let gamma = omega / 2.0;
        Self {
            omega1: omega,
            omega2: -omega,
            gamma1: gamma,
            gamma2: gamma,
            separation: gamma_r / gamma,
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("separation", self.separation),
            ("phase", self.phase),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("separation", self.separation),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn gamma(&self, beta: usize) -> f64 {
        [self.gamma1, self.gamma2][beta]
    }

    pub fn omega(&self, beta: usize) -> f64 {
        [self.omega1, self.omega2][beta]
    }

    /// `Ω̃_β = Ω_β − 2iΓ_β`.
    pub fn omega_tilde(&self, beta: usize) -> Complex64 {
        Complex64::new(self.omega(beta), -2.0 * self.gamma(beta))
    }

    /// Bare coupling `g_β = sqrt(Γ_β/π)`.
    pub fn coupling(&self, beta: usize) -> f64 {
        (self.gamma(beta) / PI).sqrt()
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma1.max(self.gamma2)
    }

    pub fn is_free(&self) -> bool {
        self.gamma1 == 0.0 && self.gamma2 == 0.0
    }

    /// Exchanges the two qubits; `R` and `φ` are untouched.
    pub fn swapped(&self) -> Self {
        Self {
            omega1: self.omega2,
            omega2: self.omega1,
            gamma1: self.gamma2,
            gamma2: self.gamma1,
            ..*self
        }
    }

    /// `φ` reduced to `[0, 2π)` for display.
    pub fn phase_normalized(&self) -> f64 {
        self.phase.rem_euclid(2.0 * PI)
    }
}

pub fn swapped_params(p: &SystemParams) -> SystemParams {
    p.swapped()
}

/// Input `Δ = k₁ − k₂` and output `Δ'` grid on the shell of total energy `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyShell {
    pub total_energy: f64,
    pub delta_in: f64,
    pub delta_out_grid: Vec<f64>,
}

impl EnergyShell {
    pub fn new(total_energy: f64, delta_in: f64, delta_out_grid: Vec<f64>) -> Result<Self> {
        if !total_energy.is_finite() || !delta_in.is_finite() {
            return Err(Error::InvalidGrid("non-finite shell energy".into()));
        }
        if delta_out_grid.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidGrid("non-finite delta_out value".into()));
        }
        if delta_out_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("delta_out grid must be strictly increasing".into()));
        }
        Ok(Self {
            total_energy,
            delta_in,
            delta_out_grid,
        })
    }

    /// `(k₁, k₂) = ((E+Δ)/2, (E−Δ)/2)`.
    pub fn input_momenta(&self) -> (f64, f64) {
        (
            0.5 * (self.total_energy + self.delta_in),
            0.5 * (self.total_energy - self.delta_in),
        )
    }

    pub fn output_momenta(&self, delta_out: f64) -> (f64, f64) {
        (
            0.5 * (self.total_energy + delta_out),
            0.5 * (self.total_energy - delta_out),
        )
    }
}

/// `n` equally spaced points on `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let h = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + h * i as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_factor_values() {
        assert_eq!(sign_factor(0), 1.0);
        assert_eq!(sign_factor(1), -1.0);
        assert_eq!(sign_factor(0) * sign_factor(1), -1.0);
    }

    #[test]
    #[should_panic]
    fn sign_factor_out_of_range() {
        sign_factor(2);
    }

    #[test]
    fn swap_examples() {
        let p = SystemParams::new(2.0, -2.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let s = p.swapped();
        assert_eq!((s.omega1, s.omega2, s.gamma1, s.gamma2), (-2.0, 2.0, 1.0, 1.0));
        let sym = SystemParams::new(0.5, 0.5, 0.3, 0.3, 2.0, 1.0).unwrap();
        assert_eq!(sym.swapped(), sym);
        assert_eq!(p.swapped().swapped(), p);
    }

    #[test]
    fn validation_rejects_negative_rates() {
        assert!(SystemParams::new(0.0, 0.0, -1.0, 1.0, 1.0, 0.0).is_err());
        assert!(SystemParams::new(0.0, 0.0, 1.0, 1.0, -1.0, 0.0).is_err());
        assert!(SystemParams::new(f64::NAN, 0.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn omega_tilde_lower_half_plane() {
        let p = SystemParams::new(1.0, -3.0, 0.2, 0.7, 1.0, 0.0).unwrap();
        assert!(p.omega_tilde(0).im < 0.0 && p.omega_tilde(1).im < 0.0);
        assert_eq!(p.omega_tilde(1), Complex64::new(-3.0, -1.4));
    }

    #[test]
    fn transparency_preset() {
        let p = SystemParams::transparency(2.0, 10.0);
        assert_eq!((p.omega1, p.omega2, p.gamma1, p.gamma2), (2.0, -2.0, 1.0, 1.0));
        assert!((p.gamma1 * p.separation - 10.0).abs() < 1e-14);
    }

    #[test]
    fn shell_momenta_and_grid_checks() {
        let s = EnergyShell::new(0.4, 0.2, vec![-1.0, 0.0, 1.0]).unwrap();
        let (k1, k2) = s.input_momenta();
        assert!((k1 - 0.3).abs() < 1e-15 && (k2 - 0.1).abs() < 1e-15);
        assert!(EnergyShell::new(0.0, 0.0, vec![0.0, 0.0]).is_err());
        let g = linspace(-1.0, 1.0, 5);
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
