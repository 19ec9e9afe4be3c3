//! Stochastic pure-state unravelings of the master equation.
//!
//! Quantum state diffusion (Itô):
//!
//! ```text
//! |dψ⟩ = -iH|ψ⟩dt - ½ Σ_j (L_j†L_j - 2⟨L_j†⟩L_j + |⟨L_j⟩|²)|ψ⟩dt + Σ_j (L_j - ⟨L_j⟩)|ψ⟩ dξ_j
//! ```
//!
//! Quantum jumps: no-jump drift `-iH|ψ⟩dt - ½ Σ_j (L_j†L_j - ⟨L_j†L_j⟩)|ψ⟩dt`,
//! interrupted with probability `⟨L_j†L_j⟩dt` per step by `|ψ⟩ → L_j|ψ⟩/‖L_j|ψ⟩‖`.
//!
//! Both are first order and renormalize after every step. The Hamiltonian
//! part is either folded into the explicit Euler–Maruyama drift
//! ([`Scheme::EulerMaruyama`]) or applied afterwards as a Cayley
//! (Crank–Nicolson) unitary ([`Scheme::SplitCayley`]). The split form is unconditionally
//! stable for the stiff quartic spectra of large truncations.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::BandedLu;
use crate::error::{Error, Result};
use crate::fock::{momentum_op, number_op, position_op, OperatorMatrix, StateVector, C64};
use crate::model::LindbladModel;
use crate::noise::NoiseStream;
use crate::oracle::{step_count, DensityMatrix};

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Norm below which a step is declared failed (before renormalization).
pub const NORM_COLLAPSE: f64 = 1e-6;
/// Total jump probability per step above which a warning is logged.
pub const JUMP_PROBABILITY_WARN: f64 = 0.1;
/// Total jump probability per step above which the step is rejected.
pub const JUMP_PROBABILITY_MAX: f64 = 0.5;
/// Default top-decile population that aborts a trajectory.
pub const DEFAULT_BREACH_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unraveling {
    Qsd,
    Qj,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Whole drift, Hamiltonian included, in one explicit Euler step.
    EulerMaruyama,
    /// Euler–Maruyama step of the dissipative drift and noise, then the
    /// Cayley unitary for `H(t + dt/2)`.
    #[default]
    SplitCayley,
}

/// Observables of one trajectory at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub q_mean: f64,
    pub p_mean: f64,
    pub n_mean: f64,
    pub q_var: f64,
    pub p_var: f64,
    pub boundary_population: f64,
    /// Cumulative jumps so far (always 0 for QSD).
    pub jump_count: u64,
}

/// Quadrature and number probes evaluated on trajectory states.
#[derive(Clone, Debug)]
pub struct Observables {
    q: OperatorMatrix,
    p: OperatorMatrix,
    n: OperatorMatrix,
    buf: Vec<C64>,
}

impl Observables {
    pub fn new(dim: usize) -> Result<Self> {
        Ok(Self {
            q: position_op(dim)?,
            p: momentum_op(dim)?,
            n: number_op(dim)?,
            buf: vec![ZERO; dim],
        })
    }

    fn mean_and_var(&mut self, which: u8, psi: &[C64]) -> (f64, f64) {
        let op = match which {
            0 => &self.q,
            1 => &self.p,
            _ => &self.n,
        };
        op.apply_into(psi, &mut self.buf);
        let mean: C64 = psi.iter().zip(&self.buf).map(|(a, b)| a.conj() * b).sum();
        let second: f64 = self.buf.iter().map(|c| c.norm_sqr()).sum();
        (mean.re, second - mean.re * mean.re)
    }

    pub fn record(&mut self, t: f64, psi: &StateVector, jump_count: u64) -> TrajectoryRecord {
        let amps = psi.amplitudes();
        let (q_mean, q_var) = self.mean_and_var(0, amps);
        let (p_mean, p_var) = self.mean_and_var(1, amps);
        let n_mean: f64 = amps.iter().enumerate().map(|(k, c)| k as f64 * c.norm_sqr()).sum();
        TrajectoryRecord {
            t,
            q_mean,
            p_mean,
            n_mean,
            q_var,
            p_var,
            boundary_population: psi.boundary_population(),
            jump_count,
        }
    }

    pub fn position(&self) -> &OperatorMatrix {
        &self.q
    }

    pub fn momentum(&self) -> &OperatorMatrix {
        &self.p
    }

    pub fn number(&self) -> &OperatorMatrix {
        &self.n
    }
}

#[derive(Clone, Debug)]
struct Cayley {
    lu: BandedLu,
    // (t, dt) the factorization was built for; static models reuse it
    key: Option<(f64, f64)>,
    half_width: usize,
}

/// Reusable single-trajectory integrator for one model.
#[derive(Clone, Debug)]
pub struct Stepper<'a> {
    model: &'a LindbladModel,
    scheme: Scheme,
    decays: Vec<OperatorMatrix>,
    cayley: Cayley,
    lpsi: Vec<Vec<C64>>,
    next: Vec<C64>,
    tmp: Vec<C64>,
    warned_jump_probability: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a LindbladModel, scheme: Scheme) -> Self {
        let dim = model.dim();
        let decays = model.lindblads().iter().map(|l| &l.adjoint() * l).collect();
        let (hl, hu) = model.h_static().bandwidth();
        let (dl, du) = model.drive_op().bandwidth();
        let half_width = hl.max(hu).max(dl).max(du);
        Self {
            model,
            scheme,
            decays,
            cayley: Cayley {
                lu: BandedLu::new(dim, half_width, half_width),
                key: None,
                half_width,
            },
            lpsi: vec![vec![ZERO; dim]; model.lindblads().len()],
            next: vec![ZERO; dim],
            tmp: vec![ZERO; dim],
            warned_jump_probability: false,
        }
    }

    pub fn model(&self) -> &LindbladModel {
        self.model
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    fn check_state(&self, psi: &StateVector) -> Result<()> {
        if psi.dim() != self.model.dim() {
            return Err(Error::Shape {
                expected: self.model.dim(),
                found: psi.dim(),
            });
        }
        Ok(())
    }

    /// `out += factor · H(t) ψ`.
    fn add_hamiltonian(&mut self, psi: &[C64], t: f64, factor: C64, out: &mut [C64]) {
        self.model.h_static().apply_into(psi, &mut self.tmp);
        out.iter_mut().zip(&self.tmp).for_each(|(o, h)| *o += factor * h);
        let f = self.model.drive_factor(t);
        if f != 0.0 {
            self.model.drive_op().apply_into(psi, &mut self.tmp);
            let c = factor * f;
            out.iter_mut().zip(&self.tmp).for_each(|(o, h)| *o += c * h);
        }
    }

    /// Replaces `psi` by `(I + iτH)⁻¹(I - iτH)ψ` with `τ = dt/2`, `H = H(t + dt/2)`.
    fn cayley_step(&mut self, psi: &mut [C64], t: f64, dt: f64) -> Result<()> {
        let t_mid = t + 0.5 * dt;
        let key = if self.model.is_driven() { (t_mid, dt) } else { (0.0, dt) };
        if self.cayley.key != Some(key) {
            let tau = 0.5 * dt;
            let h = self.model.h_static().entries();
            let d = self.model.drive_op().entries();
            let f = self.model.drive_factor(t_mid);
            let ok = self.cayley.lu.factor_from(|i, j| {
                let hij = h[(i, j)] + d[(i, j)] * f;
                let id = if i == j { C64::new(1.0, 0.0) } else { ZERO };
                id + I * tau * hij
            });
            if !ok {
                return Err(Error::StepFailure {
                    t,
                    reason: "singular Cayley factor".into(),
                });
            }
            self.cayley.key = Some(key);
        }
        debug_assert!(self.cayley.half_width <= psi.len());
        let mut rhs = std::mem::take(&mut self.next);
        rhs.copy_from_slice(psi);
        self.add_hamiltonian(psi, t_mid, -I * (0.5 * dt), &mut rhs);
        self.cayley.lu.solve(&mut rhs);
        psi.copy_from_slice(&rhs);
        self.next = rhs;
        Ok(())
    }

    fn finish(&self, psi: &mut StateVector, t: f64) -> Result<()> {
        let norm = psi.norm();
        if !norm.is_finite() {
            return Err(Error::StepFailure {
                t,
                reason: "non-finite amplitudes; lower dt".into(),
            });
        }
        if norm < NORM_COLLAPSE {
            return Err(Error::StepFailure {
                t,
                reason: format!("norm collapsed to {norm:.3e}; lower dt"),
            });
        }
        psi.normalize();
        Ok(())
    }

    /// One QSD step with caller-supplied increments, one per Lindblad channel.
    pub fn qsd_step_with_noise(
        &mut self,
        psi: &mut StateVector,
        t: f64,
        dt: f64,
        noise: &[C64],
    ) -> Result<()> {
        self.check_state(psi)?;
        if noise.len() != self.model.lindblads().len() {
            return Err(Error::Shape {
                expected: self.model.lindblads().len(),
                found: noise.len(),
            });
        }
        let amps = psi.amplitudes();
        let mut next = std::mem::take(&mut self.next);
        next.copy_from_slice(amps);
        if self.scheme == Scheme::EulerMaruyama {
            self.add_hamiltonian(amps, t, -I * dt, &mut next);
        }
        for (j, l) in self.model.lindblads().iter().enumerate() {
            let lpsi = &mut self.lpsi[j];
            l.apply_into(amps, lpsi);
            let mean: C64 = amps.iter().zip(lpsi.iter()).map(|(a, b)| a.conj() * b).sum();
            self.decays[j].apply_into(amps, &mut self.tmp);
            let xi = noise[j];
            // -½(L†L - 2⟨L⟩*L + |⟨L⟩|²)dt + (L - ⟨L⟩)dξ
            let c_decay = -0.5 * dt;
            let c_l = mean.conj() * dt + xi;
            let c_psi = -0.5 * mean.norm_sqr() * dt - mean * xi;
            for k in 0..next.len() {
                next[k] += c_decay * self.tmp[k] + c_l * lpsi[k] + c_psi * amps[k];
            }
        }
        psi.amplitudes_mut().copy_from_slice(&next);
        self.next = next;
        if self.scheme == Scheme::SplitCayley {
            self.cayley_step(psi.amplitudes_mut(), t, dt)?;
        }
        self.finish(psi, t)
    }

    /// One QSD step drawing `dξ_j` from `stream` in channel order.
    pub fn qsd_step(
        &mut self,
        psi: &mut StateVector,
        t: f64,
        dt: f64,
        stream: &mut NoiseStream,
    ) -> Result<()> {
        let noise: Vec<C64> = (0..self.model.lindblads().len())
            .map(|_| stream.complex_wiener(dt))
            .collect();
        self.qsd_step_with_noise(psi, t, dt, &noise)
    }

    /// One QJ step driven by a single uniform variate `u ∈ [0, 1)`.
    /// Returns the channel that jumped, if any.
    pub fn qj_step_with_uniform(
        &mut self,
        psi: &mut StateVector,
        t: f64,
        dt: f64,
        u: f64,
    ) -> Result<Option<usize>> {
        self.check_state(psi)?;
        let n_ch = self.model.lindblads().len();
        let mut probs = Vec::with_capacity(n_ch);
        for (j, l) in self.model.lindblads().iter().enumerate() {
            l.apply_into(psi.amplitudes(), &mut self.lpsi[j]);
            let rate: f64 = self.lpsi[j].iter().map(|c| c.norm_sqr()).sum();
            probs.push(rate * dt);
        }
        let total: f64 = probs.iter().sum();
        if total > JUMP_PROBABILITY_MAX {
            return Err(Error::StepFailure {
                t,
                reason: format!("jump probability {total:.3} per step exceeds {JUMP_PROBABILITY_MAX}; lower dt"),
            });
        }
        if total > JUMP_PROBABILITY_WARN && !self.warned_jump_probability {
            warn!("jump probability {total:.3} per step at t = {t:.3}; consider lowering dt");
            self.warned_jump_probability = true;
        }

        if u < total {
            let mut acc = 0.0;
            let mut channel = n_ch - 1;
            for (j, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    channel = j;
                    break;
                }
            }
            let target = &self.lpsi[channel];
            let norm = target.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Invariant(format!(
                    "jump selected on channel {channel} with vanishing L|ψ⟩"
                )));
            }
            psi.amplitudes_mut()
                .iter_mut()
                .zip(target)
                .for_each(|(a, b)| *a = b / norm);
            return Ok(Some(channel));
        }

        let amps = psi.amplitudes();
        let mut next = std::mem::take(&mut self.next);
        next.copy_from_slice(amps);
        if self.scheme == Scheme::EulerMaruyama {
            self.add_hamiltonian(amps, t, -I * dt, &mut next);
        }
        for decay in &self.decays {
            decay.apply_into(amps, &mut self.tmp);
            let mean: f64 = amps
                .iter()
                .zip(&self.tmp)
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            for k in 0..next.len() {
                next[k] += -0.5 * dt * (self.tmp[k] - mean * amps[k]);
            }
        }
        psi.amplitudes_mut().copy_from_slice(&next);
        self.next = next;
        if self.scheme == Scheme::SplitCayley {
            self.cayley_step(psi.amplitudes_mut(), t, dt)?;
        }
        self.finish(psi, t)?;
        Ok(None)
    }

    pub fn qj_step(
        &mut self,
        psi: &mut StateVector,
        t: f64,
        dt: f64,
        stream: &mut NoiseStream,
    ) -> Result<Option<usize>> {
        let u = stream.uniform();
        self.qj_step_with_uniform(psi, t, dt, u)
    }
}

/// Single QSD step with the default scheme.
pub fn qsd_step(
    psi: &StateVector,
    model: &LindbladModel,
    t: f64,
    dt: f64,
    stream: &mut NoiseStream,
) -> Result<StateVector> {
    let mut out = psi.clone();
    Stepper::new(model, Scheme::default()).qsd_step(&mut out, t, dt, stream)?;
    Ok(out)
}

/// Single QJ step with the default scheme; the flag reports whether a jump happened.
pub fn qj_step(
    psi: &StateVector,
    model: &LindbladModel,
    t: f64,
    dt: f64,
    stream: &mut NoiseStream,
) -> Result<(StateVector, bool)> {
    let mut out = psi.clone();
    let jumped = Stepper::new(model, Scheme::default()).qj_step(&mut out, t, dt, stream)?;
    Ok((out, jumped.is_some()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub dt: f64,
    pub t_final: f64,
    pub unraveling: Unraveling,
    pub scheme: Scheme,
    /// Steps between records; the final state is always recorded.
    pub sample_every: usize,
    pub breach_threshold: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            unraveling: Unraveling::Qsd,
            scheme: Scheme::default(),
            sample_every: 1,
            breach_threshold: DEFAULT_BREACH_THRESHOLD,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<u64> {
        if self.sample_every == 0 {
            return Err(Error::validation("sample_every", "must be ≥ 1"));
        }
        if !(self.breach_threshold > 0.0 && self.breach_threshold <= 1.0) {
            return Err(Error::validation("breach_threshold", "must lie in (0, 1]"));
        }
        step_count(self.t_final, self.dt)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_state: StateVector,
    pub jump_count: u64,
    pub steps: u64,
}

/// Integrates one trajectory, emitting a record every `sample_every` steps.
/// Steps land on `t_k = k·dt` exactly.
pub fn run_trajectory(
    model: &LindbladModel,
    psi0: &StateVector,
    opts: &RunOptions,
    stream: &mut NoiseStream,
) -> Result<Trajectory> {
    run_trajectory_observed(model, psi0, opts, stream, |_, _| {})
}

/// Like [`run_trajectory`], handing each record and its state to `observer`.
pub fn run_trajectory_observed<F>(
    model: &LindbladModel,
    psi0: &StateVector,
    opts: &RunOptions,
    stream: &mut NoiseStream,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(&TrajectoryRecord, &StateVector),
{
    let steps = opts.validate()?;
    if psi0.dim() != model.dim() {
        return Err(Error::Shape {
            expected: model.dim(),
            found: psi0.dim(),
        });
    }
    let mut stepper = Stepper::new(model, opts.scheme);
    let mut probes = Observables::new(model.dim())?;
    let mut psi = psi0.clone().normalized();
    let mut jumps = 0u64;
    let mut records = Vec::with_capacity((steps / opts.sample_every as u64 + 2) as usize);

    let breach = |psi: &StateVector, t: f64| -> Result<()> {
        let population = psi.boundary_population();
        if population > opts.breach_threshold {
            return Err(Error::TruncationBreach {
                t,
                population,
                threshold: opts.breach_threshold,
            });
        }
        Ok(())
    };

    breach(&psi, 0.0)?;
    let first = probes.record(0.0, &psi, 0);
    observer(&first, &psi);
    records.push(first);

    for k in 0..steps {
        let t = k as f64 * opts.dt;
        match opts.unraveling {
            Unraveling::Qsd => stepper.qsd_step(&mut psi, t, opts.dt, stream)?,
            Unraveling::Qj => {
                if stepper.qj_step(&mut psi, t, opts.dt, stream)?.is_some() {
                    jumps += 1;
                }
            }
        }
        let done = k + 1;
        let t_next = done as f64 * opts.dt;
        breach(&psi, t_next)?;
        if done % opts.sample_every as u64 == 0 || done == steps {
            let rec = probes.record(t_next, &psi, jumps);
            observer(&rec, &psi);
            records.push(rec);
        }
    }

    Ok(Trajectory {
        records,
        final_state: psi,
        jump_count: jumps,
        steps,
    })
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub rho_estimate: DensityMatrix,
    pub n_trajectories: usize,
    /// `1/√n_trajectories`.
    pub stderr_scale: f64,
    pub total_jumps: u64,
}

// Aggregation granularity; fixed so sums never depend on the worker count.
const ENSEMBLE_CHUNK: usize = 64;

/// Averages `|ψ⟩⟨ψ|` over `n_traj` trajectories at `t_final`. Trajectory `i`
/// uses stream `(base_seed, i)`; sums run in ascending `i`, so the result is
/// bit-identical for any `workers` count.
pub fn ensemble_density(
    model: &LindbladModel,
    psi0: &StateVector,
    opts: &RunOptions,
    n_traj: usize,
    base_seed: u64,
    workers: Option<usize>,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::validation("n_trajectories", "must be ≥ 1"));
    }
    let steps = opts.validate()?;
    // only the final state matters here
    let run_opts = RunOptions {
        sample_every: steps.max(1) as usize,
        ..*opts
    };
    let dim = model.dim();
    let mut sum = nalgebra::DMatrix::<C64>::zeros(dim, dim);
    let mut total_jumps = 0u64;

    let run_chunk = |start: usize, end: usize| -> Vec<Result<(StateVector, u64)>> {
        (start..end)
            .into_par_iter()
            .map(|i| {
                let mut stream = NoiseStream::new(base_seed, i as u64);
                run_trajectory(model, psi0, &run_opts, &mut stream)
                    .map(|tr| (tr.final_state, tr.jump_count))
                    .map_err(|e| Error::Trajectory {
                        index: i,
                        source: Box::new(e),
                    })
            })
            .collect()
    };

    let pool = match workers {
        Some(w) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
        ),
        None => None,
    };

    let mut start = 0;
    while start < n_traj {
        let end = (start + ENSEMBLE_CHUNK).min(n_traj);
        let results = match &pool {
            Some(p) => p.install(|| run_chunk(start, end)),
            None => run_chunk(start, end),
        };
        for r in results {
            let (psi, jumps) = r?;
            accumulate_projector(&mut sum, &psi);
            total_jumps += jumps;
        }
        start = end;
    }

    let mut rho = DensityMatrix::new(sum / C64::new(n_traj as f64, 0.0))?;
    rho.hermitize_and_normalize();
    Ok(EnsembleResult {
        rho_estimate: rho,
        n_trajectories: n_traj,
        stderr_scale: 1.0 / (n_traj as f64).sqrt(),
        total_jumps,
    })
}

fn accumulate_projector(sum: &mut nalgebra::DMatrix<C64>, psi: &StateVector) {
    let a = psi.amplitudes();
    let n = a.len();
    for j in 0..n {
        let cj = a[j].conj();
        let mut col = sum.column_mut(j);
        for i in 0..n {
            col[i] += a[i] * cj;
        }
    }
}
