//! Concrete open systems: the thermally damped harmonic oscillator and the
//! β-scaled forced, damped Duffing oscillator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    annihilation_op, creation_op, momentum_op, number_op, position_op, OperatorMatrix, C64,
};

const HERMITIAN_TOL: f64 = 1e-12;

/// `H(t) = h_static + drive_amplitude·cos(drive_frequency·t)·drive_op` together
/// with the Lindblad operators `L_m`.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    h_static: OperatorMatrix,
    drive_op: OperatorMatrix,
    drive_amplitude: f64,
    drive_frequency: f64,
    lindblads: Vec<OperatorMatrix>,
}

impl LindbladModel {
    /// Identically-zero Lindblad operators are dropped.
    pub fn new(
        h_static: OperatorMatrix,
        drive_op: OperatorMatrix,
        drive_amplitude: f64,
        drive_frequency: f64,
        lindblads: Vec<OperatorMatrix>,
    ) -> Result<Self> {
        let dim = h_static.dim();
        for op in std::iter::once(&drive_op).chain(&lindblads) {
            if op.dim() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    found: op.dim(),
                });
            }
        }
        h_static.check_hermitian(HERMITIAN_TOL)?;
        drive_op.check_hermitian(HERMITIAN_TOL)?;
        if !drive_amplitude.is_finite() {
            return Err(Error::validation("drive_amplitude", "must be finite"));
        }
        if !drive_frequency.is_finite() {
            return Err(Error::validation("drive_frequency", "must be finite"));
        }
        let lindblads = lindblads.into_iter().filter(|l| !l.is_zero()).collect();
        Ok(Self {
            h_static,
            drive_op,
            drive_amplitude,
            drive_frequency,
            lindblads,
        })
    }

    pub fn dim(&self) -> usize {
        self.h_static.dim()
    }

    pub fn h_static(&self) -> &OperatorMatrix {
        &self.h_static
    }

    pub fn drive_op(&self) -> &OperatorMatrix {
        &self.drive_op
    }

    pub fn drive_amplitude(&self) -> f64 {
        self.drive_amplitude
    }

    pub fn drive_frequency(&self) -> f64 {
        self.drive_frequency
    }

    pub fn lindblads(&self) -> &[OperatorMatrix] {
        &self.lindblads
    }

    pub fn is_driven(&self) -> bool {
        self.drive_amplitude != 0.0 && !self.drive_op.is_zero()
    }

    /// Scalar multiplying `drive_op` at time `t`.
    pub fn drive_factor(&self, t: f64) -> f64 {
        self.drive_amplitude * (self.drive_frequency * t).cos()
    }

    pub fn hamiltonian_at(&self, t: f64) -> OperatorMatrix {
        let f = self.drive_factor(t);
        if f == 0.0 {
            return self.h_static.clone();
        }
        &self.h_static + &self.drive_op.scale_real(f)
    }
}

/// Damped harmonic oscillator at finite temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoParams {
    pub omega: f64,
    /// Inverse relaxation time.
    pub gamma: f64,
    /// Thermal mean photon number.
    pub nbar: f64,
    pub dim: usize,
}

impl HoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::validation("omega", format!("must be > 0, got {}", self.omega)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::validation("gamma", format!("must be ≥ 0, got {}", self.gamma)));
        }
        if !(self.nbar.is_finite() && self.nbar >= 0.0) {
            return Err(Error::validation("nbar", format!("must be ≥ 0, got {}", self.nbar)));
        }
        if self.dim < crate::fock::MIN_DIM {
            return Err(Error::validation("dim", format!("must be ≥ 2, got {}", self.dim)));
        }
        Ok(())
    }
}

/// `H = ω a†a`, `L₁ = √(n̄γ) a†`, `L₂ = √((n̄+1)γ) a`. `L₁` is absent when `n̄ = 0`.
pub fn build_damped_ho(p: &HoParams) -> Result<LindbladModel> {
    p.validate()?;
    let dim = p.dim;
    let h = number_op(dim)?.scale_real(p.omega);
    let mut lindblads = Vec::with_capacity(2);
    if p.nbar > 0.0 && p.gamma > 0.0 {
        lindblads.push(creation_op(dim)?.scale_real((p.nbar * p.gamma).sqrt()));
    }
    if p.gamma > 0.0 {
        lindblads.push(annihilation_op(dim)?.scale_real(((p.nbar + 1.0) * p.gamma).sqrt()));
    }
    LindbladModel::new(h, OperatorMatrix::zeros(dim)?, 0.0, 0.0, lindblads)
}

/// Forced, damped Duffing oscillator with classicality scale `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    /// Damping Γ.
    pub gamma: f64,
    /// Drive strength.
    pub g: f64,
    pub beta: f64,
    pub dim: usize,
    /// Coefficient of the `(QP + PQ)` term; `√Γ` unless overridden.
    pub ansatz_coeff: f64,
}

impl DuffingParams {
    pub fn new(gamma: f64, g: f64, beta: f64, dim: usize) -> Self {
        Self {
            gamma,
            g,
            beta,
            dim,
            ansatz_coeff: gamma.max(0.0).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::validation("gamma", format!("must be ≥ 0, got {}", self.gamma)));
        }
        if !self.g.is_finite() {
            return Err(Error::validation("g", "must be finite"));
        }
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return Err(Error::validation("beta", format!("must be ≥ 1, got {}", self.beta)));
        }
        if !self.ansatz_coeff.is_finite() {
            return Err(Error::validation("ansatz_coeff", "must be finite"));
        }
        if self.dim < crate::fock::MIN_DIM {
            return Err(Error::validation("dim", format!("must be ≥ 2, got {}", self.dim)));
        }
        Ok(())
    }

    /// Decay rate of `⟨a⟩` produced by `L = √(2Γ)(Q + iP) = 2√Γ a`.
    pub fn amplitude_decay_rate(&self) -> f64 {
        2.0 * self.gamma
    }
}

/// `H = P²/2 + Q⁴/(4β²) - Q²/2 + c(QP + PQ) + gβ cos(t) Q`, `L = √(2Γ)(Q + iP)`.
pub fn build_duffing(p: &DuffingParams) -> Result<LindbladModel> {
    p.validate()?;
    let dim = p.dim;
    let q = position_op(dim)?;
    let mom = momentum_op(dim)?;
    let q2 = &q * &q;
    let q4 = &q2 * &q2;
    let kinetic = (&mom * &mom).scale_real(0.5);
    let quartic = q4.scale_real(0.25 / (p.beta * p.beta));
    let ansatz = q.anticommutator(&mom)?.scale_real(p.ansatz_coeff);
    let h = &(&(&kinetic + &quartic) - &q2.scale_real(0.5)) + &ansatz;
    let h = OperatorMatrix::hermitian(hermitize(h.entries()))?;

    let l = (&q + &mom.scale(C64::new(0.0, 1.0))).scale_real((2.0 * p.gamma).sqrt());
    LindbladModel::new(h, q, p.g * p.beta, 1.0, vec![l])
}

// Products of Hermitian factors pick up ~1 ulp of anti-Hermitian noise.
fn hermitize(m: &nalgebra::DMatrix<C64>) -> nalgebra::DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}
