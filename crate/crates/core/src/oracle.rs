//! Deterministic density-matrix propagation of the Lindblad master equation
//!
//! `dρ/dt = -i[H(t), ρ] + Σ_m (L_m ρ L_m† - ½{L_m†L_m, ρ})`
//!
//! integrated with fixed-step classical RK4. This is the reference that
//! trajectory ensembles are checked against.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{OperatorMatrix, StateVector, C64};
use crate::model::LindbladModel;

/// Largest dimension accepted without an explicit override.
pub const ORACLE_MAX_DIM: usize = 128;

/// Step-count guard for [`propagate`].
pub const MAX_STEPS: u64 = 1_000_000_000;

const I: C64 = C64::new(0.0, 1.0);

/// Trace-one Hermitian positive matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Shape {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.nrows() < crate::fock::MIN_DIM {
            return Err(Error::InvalidDimension {
                dim: entries.nrows(),
                min: crate::fock::MIN_DIM,
            });
        }
        Ok(Self { entries })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        Self {
            entries: psi.projector(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        let d = dim as f64;
        Self::new(DMatrix::identity(dim, dim) * C64::new(1.0 / d, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// `a·self + b·other`.
    pub fn mix(&self, a: f64, other: &DensityMatrix, b: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            entries: &self.entries * C64::new(a, 0.0) + &other.entries * C64::new(b, 0.0),
        })
    }

    pub fn hermitian_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Replaces `ρ` by `(ρ + ρ†)/2` and rescales to unit trace.
    pub fn hermitize_and_normalize(&mut self) {
        let h = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let tr = h.trace().re;
        self.entries = if tr != 0.0 { h / C64::new(tr, 0.0) } else { h };
    }

    /// Trace within 1e-8 of one, Hermitian within 1e-10, eigenvalues ≥ -1e-8.
    pub fn check_invariants(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(Error::Invariant(format!("density matrix trace {tr}")));
        }
        let defect = self.hermitian_defect();
        if defect > 1e-10 {
            return Err(Error::Invariant(format!("density matrix anti-Hermitian part {defect:.3e}")));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -1e-8 {
            return Err(Error::Invariant(format!("density matrix eigenvalue {min_ev:.3e}")));
        }
        Ok(())
    }

    /// Largest entrywise `|ρ - σ|`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok((&self.entries - &other.entries)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max))
    }
}

/// `Tr(Aρ)`.
pub fn moment(rho: &DensityMatrix, op: &OperatorMatrix) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(Error::Shape {
            expected: op.dim(),
            found: rho.dim(),
        });
    }
    Ok(op.left_mul_dense(&rho.entries).trace())
}

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    (&rho.entries * &rho.entries).trace().re
}

/// Precomputed generator of the master equation for one model.
///
/// The commutator and anticommutator are folded into the non-Hermitian
/// `H_eff = H - (i/2) Σ L†L`, so the right-hand side is
/// `-i(H_eff ρ - ρ H_eff†) + Σ L ρ L†`.
#[derive(Clone, Debug)]
pub struct MasterEquation<'a> {
    model: &'a LindbladModel,
    h_eff: OperatorMatrix,
    h_eff_adj: OperatorMatrix,
    lindblad_adjs: Vec<OperatorMatrix>,
}

impl<'a> MasterEquation<'a> {
    pub fn new(model: &'a LindbladModel) -> Self {
        let mut h_eff = model.h_static().clone();
        let lindblad_adjs: Vec<_> = model.lindblads().iter().map(|l| l.adjoint()).collect();
        for (l, l_adj) in model.lindblads().iter().zip(&lindblad_adjs) {
            let decay = l_adj * l;
            h_eff = &h_eff - &decay.scale(C64::new(0.0, 0.5));
        }
        let h_eff_adj = h_eff.adjoint();
        Self {
            model,
            h_eff,
            h_eff_adj,
            lindblad_adjs,
        }
    }

    pub fn model(&self) -> &LindbladModel {
        self.model
    }

    /// `dρ/dt` at time `t`.
    pub fn rhs(&self, rho: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
        let mut forward = self.h_eff.left_mul_dense(rho);
        let mut backward = self.h_eff_adj.right_mul_dense(rho);
        let f = self.model.drive_factor(t);
        if f != 0.0 {
            let drive = self.model.drive_op();
            let fc = C64::new(f, 0.0);
            forward += drive.left_mul_dense(rho) * fc;
            backward += drive.right_mul_dense(rho) * fc;
        }
        let mut out = (forward - backward) * (-I);
        for (l, l_adj) in self.model.lindblads().iter().zip(&self.lindblad_adjs) {
            out += l.left_mul_dense(&l_adj.right_mul_dense(rho));
        }
        out
    }

    fn rk4_step(&self, rho: &mut DMatrix<C64>, t: f64, h: f64) {
        let half = C64::new(0.5 * h, 0.0);
        let full = C64::new(h, 0.0);
        let k1 = self.rhs(rho, t);
        let k2 = self.rhs(&(&*rho + &k1 * half), t + 0.5 * h);
        let k3 = self.rhs(&(&*rho + &k2 * half), t + 0.5 * h);
        let k4 = self.rhs(&(&*rho + &k3 * full), t + h);
        let w = C64::new(h / 6.0, 0.0);
        *rho += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * w;
    }
}

/// `dρ/dt` for `model` at time `t`.
pub fn lindblad_rhs(rho: &DensityMatrix, model: &LindbladModel, t: f64) -> Result<DMatrix<C64>> {
    if rho.dim() != model.dim() {
        return Err(Error::Shape {
            expected: model.dim(),
            found: rho.dim(),
        });
    }
    Ok(MasterEquation::new(model).rhs(&rho.entries, t))
}

/// Knobs for [`propagate_observed`].
#[derive(Clone, Copy, Debug)]
pub struct PropagateOptions {
    /// Steps between checkpoints; 0 means only the final state.
    pub checkpoint_every: usize,
    pub max_dim: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            checkpoint_every: 0,
            max_dim: ORACLE_MAX_DIM,
        }
    }
}

/// Number of fixed steps covering `[0, t_final]` with steps no longer than `dt`.
pub(crate) fn step_count(t_final: f64, dt: f64) -> Result<u64> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::validation("dt", format!("must be > 0, got {dt}")));
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::validation("t_final", format!("must be ≥ 0, got {t_final}")));
    }
    let steps = (t_final / dt - 1e-9).ceil().max(0.0);
    if steps > MAX_STEPS as f64 {
        return Err(Error::Config(format!(
            "{steps:.3e} steps requested (t_final = {t_final}, dt = {dt}); limit is {MAX_STEPS}"
        )));
    }
    Ok(steps as u64)
}

/// Propagates `rho0` to `t_final` with RK4 steps of (at most) `dt`.
pub fn propagate(
    rho0: &DensityMatrix,
    model: &LindbladModel,
    t_final: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    propagate_observed(rho0, model, t_final, dt, PropagateOptions::default(), |_, _| {})
}

/// Like [`propagate`], calling `observer(t, ρ)` at `t = 0`, at every
/// checkpoint, and at the end. Checkpointed states are re-Hermitized and
/// trace-renormalized before being observed and before integration resumes.
pub fn propagate_observed<F>(
    rho0: &DensityMatrix,
    model: &LindbladModel,
    t_final: f64,
    dt: f64,
    opts: PropagateOptions,
    mut observer: F,
) -> Result<DensityMatrix>
where
    F: FnMut(f64, &DensityMatrix),
{
    if rho0.dim() != model.dim() {
        return Err(Error::Shape {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    let dim = model.dim();
    if dim > opts.max_dim {
        return Err(Error::Config(format!(
            "oracle dimension {dim} exceeds the limit {}; raise max_dim explicitly",
            opts.max_dim
        )));
    }
    if dim > ORACLE_MAX_DIM {
        warn!(
            "oracle at dim = {dim} stores {:.1} MiB per density matrix",
            (dim * dim * 16) as f64 / (1024.0 * 1024.0)
        );
    }
    let steps = step_count(t_final, dt)?;
    observer(0.0, rho0);
    if steps == 0 {
        return Ok(rho0.clone());
    }
    let h = t_final / steps as f64;
    let eq = MasterEquation::new(model);
    let mut state = DensityMatrix {
        entries: rho0.entries.clone(),
    };
    for k in 0..steps {
        let t = k as f64 * h;
        eq.rk4_step(&mut state.entries, t, h);
        let done = k + 1;
        let checkpoint = opts.checkpoint_every > 0 && done % opts.checkpoint_every as u64 == 0;
        if checkpoint || done == steps {
            state.hermitize_and_normalize();
            if !state.entries.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::Divergence { t: done as f64 * h });
            }
            observer(done as f64 * h, &state);
        }
    }
    Ok(state)
}
