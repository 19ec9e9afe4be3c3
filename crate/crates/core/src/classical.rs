//! Classical and semiclassical reference dynamics.
//!
//! * The forced, damped Duffing oscillator `ẍ + 2Γẋ + x³ - x = g cos t`,
//!   integrated with fixed-step RK4.
//! * Reduced coherent-state equations for the damped harmonic oscillator:
//!   the QSD form driven by complex Wiener noise and the QJ form driven by a
//!   compensated Poisson increment.
//! * Ehrenfest diagnostics comparing the quantum Duffing model's mean motion
//!   against the classical equations.

use crate::error::{Error, Result};
use crate::fock::{expectation, OperatorMatrix, StateVector, C64};
use crate::model::{DuffingParams, HoParams, LindbladModel};
use crate::noise::NoiseStream;
use crate::oracle::step_count;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
    pub t: f64,
}

impl PhasePoint {
    pub fn new(x: f64, p: f64, t: f64) -> Self {
        Self { x, p, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite()
    }
}

/// Generalized Duffing vector field
///
/// `dx/dt = p - x_damping·x`, `dp/dt = x - x³ - p_damping·p + drive·cos t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DuffingField {
    pub x_damping: f64,
    pub p_damping: f64,
    pub drive: f64,
}

impl DuffingField {
    /// The classical oscillator `ẍ + 2Γẋ + x³ - x = g cos t`.
    pub fn classical(gamma: f64, g: f64) -> Self {
        Self {
            x_damping: 0.0,
            p_damping: 2.0 * gamma,
            drive: g,
        }
    }

    /// Localized-limit motion of `(⟨Q⟩, ⟨P⟩)/β` under the quantum Duffing
    /// model. The Lindblad operator damps both quadratures at `2Γ`, the
    /// `c(QP + PQ)` term adds `+2c` to the `Q` rate and `-2c` to the `P` rate,
    /// and `+gβ cos(t) Q` in the Hamiltonian pushes `P` by `-g cos t`.
    pub fn mean_field(p: &DuffingParams) -> Self {
        let decay = p.amplitude_decay_rate();
        Self {
            x_damping: decay - 2.0 * p.ansatz_coeff,
            p_damping: decay + 2.0 * p.ansatz_coeff,
            drive: -p.g,
        }
    }

    #[inline]
    pub fn rhs(&self, x: f64, p: f64, t: f64) -> (f64, f64) {
        (
            p - self.x_damping * x,
            x - x * x * x - self.p_damping * p + self.drive * t.cos(),
        )
    }

    #[inline]
    pub fn rk4_step(&self, s: PhasePoint, dt: f64) -> PhasePoint {
        let h2 = 0.5 * dt;
        let (k1x, k1p) = self.rhs(s.x, s.p, s.t);
        let (k2x, k2p) = self.rhs(s.x + h2 * k1x, s.p + h2 * k1p, s.t + h2);
        let (k3x, k3p) = self.rhs(s.x + h2 * k2x, s.p + h2 * k2p, s.t + h2);
        let (k4x, k4p) = self.rhs(s.x + dt * k3x, s.p + dt * k3p, s.t + dt);
        PhasePoint {
            x: s.x + dt / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x),
            p: s.p + dt / 6.0 * (k1p + 2.0 * (k2p + k3p) + k4p),
            t: s.t + dt,
        }
    }

    /// Takes `steps` RK4 steps from `s0`, passing every new point to `visit`.
    /// Times are `s0.t + k·dt`, never accumulated.
    pub fn integrate_with<F>(&self, s0: PhasePoint, dt: f64, steps: u64, mut visit: F) -> Result<PhasePoint>
    where
        F: FnMut(u64, &PhasePoint),
    {
        let mut s = s0;
        for k in 1..=steps {
            s = self.rk4_step(s, dt);
            s.t = s0.t + k as f64 * dt;
            if !s.is_finite() {
                return Err(Error::Divergence { t: s.t });
            }
            visit(k, &s);
        }
        Ok(s)
    }
}

/// `(dx/dt, dp/dt)` of the classical Duffing oscillator.
pub fn duffing_rhs(s: &PhasePoint, gamma: f64, g: f64) -> (f64, f64) {
    DuffingField::classical(gamma, g).rhs(s.x, s.p, s.t)
}

/// RK4 path of the classical oscillator on `[s0.t, s0.t + t_final]`,
/// including the starting point. The step is shrunk so the path ends exactly
/// at `t_final`.
pub fn integrate_classical(
    s0: PhasePoint,
    gamma: f64,
    g: f64,
    t_final: f64,
    dt: f64,
) -> Result<Vec<PhasePoint>> {
    let steps = step_count(t_final, dt)?;
    let h = if steps == 0 { dt } else { t_final / steps as f64 };
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(s0);
    DuffingField::classical(gamma, g).integrate_with(s0, h, steps, |_, s| out.push(*s))?;
    Ok(out)
}

/// `p²/2 + x⁴/4 - x²/2`.
pub fn duffing_energy(s: &PhasePoint) -> f64 {
    0.5 * s.p * s.p + 0.25 * s.x.powi(4) - 0.5 * s.x * s.x
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentAmplitude {
    pub alpha: C64,
    pub t: f64,
}

impl CoherentAmplitude {
    pub fn new(alpha: C64, t: f64) -> Self {
        Self { alpha, t }
    }
}

fn linear_drift(a: &CoherentAmplitude, p: &HoParams, dt: f64) -> C64 {
    -C64::new(0.5 * p.gamma, p.omega) * a.alpha * dt
}

/// Euler–Maruyama step of `dα = -iωα dt - (γ/2)α dt + √(n̄γ) dξ` with a given increment.
pub fn coherent_qsd_increment(a: CoherentAmplitude, p: &HoParams, dt: f64, dxi: C64) -> CoherentAmplitude {
    let alpha = a.alpha + linear_drift(&a, p, dt) + (p.nbar * p.gamma).sqrt() * dxi;
    CoherentAmplitude { alpha, t: a.t + dt }
}

pub fn coherent_qsd_step(
    a: CoherentAmplitude,
    p: &HoParams,
    dt: f64,
    stream: &mut NoiseStream,
) -> CoherentAmplitude {
    let dxi = stream.complex_wiener(dt);
    coherent_qsd_increment(a, p, dt, dxi)
}

/// Total jump rate on the coherent manifold: `γ(n̄+1)|α|² + γn̄(|α|²+1)`.
pub fn coherent_qj_rate(alpha: C64, p: &HoParams) -> f64 {
    let r2 = alpha.norm_sqr();
    p.gamma * (p.nbar + 1.0) * r2 + p.gamma * p.nbar * (r2 + 1.0)
}

/// `√(n̄γ) α/√(|α|²+1)`.
pub fn coherent_qj_noise_coefficient(alpha: C64, p: &HoParams) -> C64 {
    (p.nbar * p.gamma).sqrt() * alpha / (alpha.norm_sqr() + 1.0).sqrt()
}

/// Euler step of the reduced QJ equation. `dW = (dN - λdt)/√λ` is the
/// compensated jump count for this step, so `M(dW) = 0` and `M(dW²) = dt`.
pub fn coherent_qj_increment(
    a: CoherentAmplitude,
    p: &HoParams,
    dt: f64,
    jumped: bool,
) -> Result<CoherentAmplitude> {
    let rate = coherent_qj_rate(a.alpha, p);
    if rate * dt > 0.5 {
        return Err(Error::StepFailure {
            t: a.t,
            reason: format!("jump probability {:.3} per step exceeds 0.5; lower dt", rate * dt),
        });
    }
    let dw = if rate > 0.0 {
        (if jumped { 1.0 } else { 0.0 } - rate * dt) / rate.sqrt()
    } else {
        0.0
    };
    let alpha = a.alpha + linear_drift(&a, p, dt) + coherent_qj_noise_coefficient(a.alpha, p) * dw;
    Ok(CoherentAmplitude { alpha, t: a.t + dt })
}

pub fn coherent_qj_step(
    a: CoherentAmplitude,
    p: &HoParams,
    dt: f64,
    stream: &mut NoiseStream,
) -> Result<CoherentAmplitude> {
    let rate = coherent_qj_rate(a.alpha, p);
    let jumped = stream.uniform() < rate * dt;
    coherent_qj_increment(a, p, dt, jumped)
}

/// Mismatch between the quantum Duffing mean motion and the classical
/// equations, evaluated on a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EhrenfestDefect {
    pub t: f64,
    /// `d⟨Q⟩/dt - ⟨P⟩`.
    pub q: f64,
    /// `d⟨P⟩/dt - (-2Γ⟨P⟩ + ⟨Q⟩ - ⟨Q³⟩/β² - gβ cos t)`.
    pub p: f64,
}

/// Evaluates `d⟨A⟩/dt = ⟨i[H, A] + Σ (L†AL - ½{L†L, A})⟩` for `A = Q, P`.
#[derive(Clone, Debug)]
pub struct EhrenfestProbe<'a> {
    model: &'a LindbladModel,
    params: DuffingParams,
    q: OperatorMatrix,
    p: OperatorMatrix,
    q3: OperatorMatrix,
    gen_q: OperatorMatrix,
    gen_p: OperatorMatrix,
    drive_gen_q: OperatorMatrix,
    drive_gen_p: OperatorMatrix,
}

fn heisenberg_generator(h: &OperatorMatrix, lindblads: &[OperatorMatrix], a: &OperatorMatrix) -> Result<OperatorMatrix> {
    let i = C64::new(0.0, 1.0);
    let mut g = h.commutator(a)?.scale(i);
    for l in lindblads {
        let l_adj = l.adjoint();
        let decay = &l_adj * l;
        let sandwich = &(&l_adj * a) * l;
        g = &g + &(&sandwich - &decay.anticommutator(a)?.scale_real(0.5));
    }
    Ok(g)
}

impl<'a> EhrenfestProbe<'a> {
    pub fn new(model: &'a LindbladModel, params: &DuffingParams) -> Result<Self> {
        let dim = model.dim();
        let q = crate::fock::position_op(dim)?;
        let p = crate::fock::momentum_op(dim)?;
        let q3 = &(&q * &q) * &q;
        let gen_q = heisenberg_generator(model.h_static(), model.lindblads(), &q)?;
        let gen_p = heisenberg_generator(model.h_static(), model.lindblads(), &p)?;
        let drive_gen_q = heisenberg_generator(model.drive_op(), &[], &q)?;
        let drive_gen_p = heisenberg_generator(model.drive_op(), &[], &p)?;
        Ok(Self {
            model,
            params: *params,
            q,
            p,
            q3,
            gen_q,
            gen_p,
            drive_gen_q,
            drive_gen_p,
        })
    }

    /// `(d⟨Q⟩/dt, d⟨P⟩/dt)` implied by the master equation at `psi`.
    pub fn mean_velocity(&self, psi: &StateVector, t: f64) -> Result<(f64, f64)> {
        let f = self.model.drive_factor(t);
        let dq = expectation(psi, &self.gen_q)?.re + f * expectation(psi, &self.drive_gen_q)?.re;
        let dp = expectation(psi, &self.gen_p)?.re + f * expectation(psi, &self.drive_gen_p)?.re;
        Ok((dq, dp))
    }

    pub fn defect(&self, psi: &StateVector, t: f64) -> Result<EhrenfestDefect> {
        let (dq, dp) = self.mean_velocity(psi, t)?;
        let q = expectation(psi, &self.q)?.re;
        let p = expectation(psi, &self.p)?.re;
        let q3 = expectation(psi, &self.q3)?.re;
        let DuffingParams { gamma, g, beta, .. } = self.params;
        let classical_dp = -2.0 * gamma * p + q - q3 / (beta * beta) - g * beta * t.cos();
        Ok(EhrenfestDefect {
            t,
            q: dq - p,
            p: dp - classical_dp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::coherent_state;
    use crate::model::build_duffing;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn rhs_examples() {
        assert_eq!(duffing_rhs(&PhasePoint::new(0.0, 0.0, PI / 2.0), 0.4, 0.9).0, 0.0);
        assert_abs_diff_eq!(duffing_rhs(&PhasePoint::new(0.0, 0.0, PI / 2.0), 0.4, 0.9).1, 0.0, epsilon = 1e-16);
        assert_eq!(duffing_rhs(&PhasePoint::new(1.0, 0.0, 0.0), 0.125, 0.3), (0.0, 0.3));
        let (dx, dp) = duffing_rhs(&PhasePoint::new(-1.0, 0.0, PI), 0.125, 0.3);
        assert_eq!(dx, 0.0);
        assert_abs_diff_eq!(dp, -0.3, epsilon = 1e-15);
    }

    #[test]
    fn unforced_damped_motion_settles_in_right_well() {
        let path = integrate_classical(PhasePoint::new(0.1, 0.0, 0.0), 0.125, 0.0, 200.0, 1e-3).unwrap();
        let last = path.last().unwrap();
        assert_abs_diff_eq!(last.t, 200.0, epsilon = 1e-9);
        assert!((last.x - 1.0).abs() <= 1e-3 && last.p.abs() <= 1e-3, "{last:?}");
        // brute-force reference at a ten times finer step
        let fine = integrate_classical(PhasePoint::new(0.1, 0.0, 0.0), 0.125, 0.0, 200.0, 1e-4).unwrap();
        let f = fine.last().unwrap();
        assert!((f.x - last.x).abs() < 1e-9 && (f.p - last.p).abs() < 1e-9);
    }

    #[test]
    fn conservative_energy_drift() {
        let path = integrate_classical(PhasePoint::new(0.3, 0.8, 0.0), 0.0, 0.0, 100.0, 1e-3).unwrap();
        let e0 = duffing_energy(&path[0]);
        let worst = path.iter().map(|s| (duffing_energy(s) - e0).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-9, "drift {worst:.3e}");
    }

    #[test]
    fn rk4_global_error_is_fourth_order() {
        let s0 = PhasePoint::new(0.3, 0.8, 0.0);
        let end = |dt: f64| *integrate_classical(s0, 0.0, 0.0, 10.0, dt).unwrap().last().unwrap();
        let reference = end(0.1 / 8.0);
        let err = |s: PhasePoint| ((s.x - reference.x).powi(2) + (s.p - reference.p).powi(2)).sqrt();
        let ratio = err(end(0.1)) / err(end(0.05));
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn divergence_is_reported() {
        let field = DuffingField { x_damping: 0.0, p_damping: 0.0, drive: 0.0 };
        let err = field.integrate_with(PhasePoint::new(1e3, 0.0, 0.0), 0.5, 100, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn field_coefficients() {
        let p = DuffingParams { ansatz_coeff: 0.0, ..DuffingParams::new(0.125, 0.3, 4.0, 8) };
        let f = DuffingField::mean_field(&p);
        assert_eq!(f.x_damping, 0.25);
        assert_eq!(f.p_damping, 0.25);
        assert_eq!(f.drive, -0.3);
        let c = DuffingField::classical(0.125, 0.3);
        assert_eq!((c.x_damping, c.p_damping, c.drive), (0.0, 0.25, 0.3));
    }

    #[test]
    fn coherent_qsd_limits() {
        let p = HoParams { omega: 1.0, gamma: 0.0, nbar: 0.0, dim: 2 };
        let mut s = NoiseStream::new(1, 0);
        let mut a = CoherentAmplitude::new(C64::new(1.0, 0.5), 0.0);
        let r0 = a.alpha.norm();
        let dt = 1e-3;
        for _ in 0..1000 {
            let next = coherent_qsd_step(a, &p, dt, &mut s);
            assert!((next.alpha.norm() - a.alpha.norm()).abs() <= dt * dt * r0);
            a = next;
        }

        let p = HoParams { omega: 1e-300, gamma: 1.0, nbar: 0.0, dim: 2 };
        let mut a = CoherentAmplitude::new(C64::new(1.0, 0.0), 0.0);
        for _ in 0..2000 {
            a = coherent_qsd_step(a, &p, dt, &mut s);
        }
        // Euler on α' = -α/2 over t = 2
        assert_abs_diff_eq!(a.alpha.re, (1.0 - 0.5 * dt).powi(2000), epsilon = 1e-12);
        assert_abs_diff_eq!(a.alpha.re, (-1.0f64).exp(), epsilon = 1e-3);
    }

    #[test]
    fn coherent_qj_limits() {
        let p0 = HoParams { omega: 1.0, gamma: 1.0, nbar: 0.0, dim: 2 };
        let a = CoherentAmplitude::new(C64::new(1.5, -0.5), 0.0);
        let via_qj = coherent_qj_increment(a, &p0, 1e-3, true).unwrap();
        let via_qsd = coherent_qsd_increment(a, &p0, 1e-3, C64::new(0.7, 0.1));
        assert_eq!(via_qj.alpha, via_qsd.alpha);

        let p = HoParams { omega: 1.0, gamma: 1.0, nbar: 0.5, dim: 2 };
        let big = C64::new(60.0, 80.0);
        let coeff = coherent_qj_noise_coefficient(big, &p);
        let limit = (0.5f64).sqrt() * big / big.norm();
        assert!((coeff - limit).norm() < 1e-4 * limit.norm());

        let err = coherent_qj_increment(CoherentAmplitude::new(big, 0.0), &p, 1e-3, false).unwrap_err();
        assert!(matches!(err, Error::StepFailure { .. }));
    }

    #[test]
    fn ehrenfest_velocity_matches_analytic_mean_field() {
        // on a well-localized coherent state the generator reproduces the
        // hand-derived mean-field coefficients up to O(1/β²) corrections
        let params = DuffingParams::new(0.125, 0.3, 8.0, 160);
        let model = build_duffing(&params).unwrap();
        let probe = EhrenfestProbe::new(&model, &params).unwrap();
        let (x, p) = (0.8, -0.4);
        let alpha = C64::new(x, p) * params.beta / 2f64.sqrt();
        let psi = coherent_state(alpha, params.dim).unwrap();
        let t = 0.9;
        let (dq, dp) = probe.mean_velocity(&psi, t).unwrap();
        let field = DuffingField::mean_field(&params);
        let (fx, fp) = field.rhs(x, p, t);
        assert!((dq / params.beta - fx).abs() < 1e-9, "{} vs {fx}", dq / params.beta);
        // ⟨Q³⟩ = ⟨Q⟩³ + 3⟨Q⟩·½ on coherent states
        let correction = -1.5 * x / (params.beta * params.beta);
        assert!((dp / params.beta - (fp + correction)).abs() < 1e-9, "{} vs {}", dp / params.beta, fp + correction);

        let d = probe.defect(&psi, t).unwrap();
        let q = x * params.beta;
        let pm = p * params.beta;
        let c = params.ansatz_coeff;
        assert!((d.q - (2.0 * c - 2.0 * params.gamma) * q).abs() < 1e-8);
        assert!((d.p - (-2.0 * c * pm)).abs() < 1e-8);
    }
}
