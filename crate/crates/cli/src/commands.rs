//! The workloads behind each subcommand. Every command validates its whole
//! configuration first, writes its artifacts into `config.output`, and
//! returns a report whose checks decide the exit status.

use std::path::PathBuf;

use log::{info, warn};
use serde::Serialize;
use unravel::classical::{coherent_qsd_increment, coherent_qsd_step, CoherentAmplitude, EhrenfestProbe};
use unravel::fock::{
    annihilation_op, coherent_state, expectation, fock_state, number_op, truncation_adequate, StateVector,
};
use unravel::model::{build_damped_ho, build_duffing, HoParams, LindbladModel};
use unravel::oracle::{moment, propagate, propagate_observed, PropagateOptions};
use unravel::poincare::{
    classical_section, period_aligned_dt, quantum_section, steps_per_period, strobe_displacement_rms,
    SectionSeries,
};
use unravel::trajectories::{ensemble_density, run_trajectory, run_trajectory_observed, Stepper};
use unravel::{DensityMatrix, DuffingField, NoiseStream, PhasePoint, RunOptions, Unraveling, C64};

use crate::config::{InitialState, ModelKind, RunConfig};
use crate::error::CliError;
use crate::output::{checks_csv, ensure_dir, fmt_f64, write_file, write_manifest, Check};

// Stream indices for the single-path checks of `ho-validate`; ensembles use
// the trajectory index itself.
const LOCALIZATION_STREAM: u64 = 0;
const COHERENT_PATH_STREAM: u64 = 1;
const COHERENT_ENSEMBLE_STREAMS: u64 = 1 << 32;

fn unraveling_tag(u: Unraveling) -> &'static str {
    match u {
        Unraveling::Qsd => "qsd",
        Unraveling::Qj => "qj",
    }
}

fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalSectionReport {
    #[serde(skip)]
    pub csv: PathBuf,
    pub dt: f64,
    pub points: usize,
    pub x_std: f64,
    pub max_abs: f64,
    #[serde(skip)]
    pub series: SectionSeries,
}

pub fn classical_section_cmd(cfg: &RunConfig) -> Result<ClassicalSectionReport, CliError> {
    cfg.validate_duffing()?;
    cfg.validate_section()?;
    let d = &cfg.duffing;
    let s = &cfg.section;
    let dt = period_aligned_dt(cfg.run.dt)?;
    info!("classical section: {} points after {} skipped periods", s.n_points, s.n_skip);
    let series = classical_section(PhasePoint::new(s.x0, s.p0, 0.0), d.gamma, d.g, s.n_points, s.n_skip, dt)?;

    ensure_dir(&cfg.output)?;
    let csv = cfg.output.join("classical_section.csv");
    write_file(&csv, series.to_csv_string().as_bytes())?;
    let report = ClassicalSectionReport {
        csv: csv.clone(),
        dt,
        points: series.len(),
        x_std: series.x_std(),
        max_abs: series.max_abs(),
        series,
    };
    write_manifest(&cfg.output, "classical_section", "classical-section", cfg, &[csv], &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantumSectionReport {
    #[serde(skip)]
    pub csv: PathBuf,
    pub beta: f64,
    pub dim: usize,
    pub dt: f64,
    pub points: usize,
    /// Standard deviation of `⟨Q⟩/β` over the section.
    pub x_std: f64,
    /// RMS strobe-to-strobe residual of `(⟨Q⟩, ⟨P⟩)/β` against the one-period
    /// map of the model's localized-limit equations.
    pub displacement_mean_field: Option<f64>,
    /// Same residual against the classical Duffing map.
    pub displacement_classical: Option<f64>,
    /// RMS over records of the Ehrenfest defect, divided by β.
    pub ehrenfest_defect_q: f64,
    pub ehrenfest_defect_p: f64,
    pub max_boundary_population: f64,
    #[serde(skip)]
    pub series: SectionSeries,
}

pub fn quantum_section_cmd(cfg: &RunConfig) -> Result<QuantumSectionReport, CliError> {
    cfg.validate_duffing()?;
    cfg.validate_section()?;
    let params = cfg.duffing.params();
    let beta = params.beta;
    let s = &cfg.section;
    let per = steps_per_period(cfg.run.dt)?;
    let dt = period_aligned_dt(cfg.run.dt)?;
    let steps = (s.n_skip + s.n_points - 1) * per;
    let opts = RunOptions {
        dt,
        t_final: steps as f64 * dt,
        ..cfg.single_trajectory_options()
    };
    opts.validate()?;

    if params.dim > 256 {
        let mib = 12.0 * (params.dim * params.dim * 16) as f64 / (1024.0 * 1024.0);
        let secs = steps as f64 * params.dim as f64 * 2e-7;
        warn!(
            "dim = {} is large: roughly {mib:.0} MiB of operators and {:.1} h of integration",
            params.dim,
            secs / 3600.0
        );
    }
    let alpha = C64::new(s.x0, s.p0) * (beta / std::f64::consts::SQRT_2);
    if !truncation_adequate(alpha, params.dim) {
        return Err(CliError::Validation(format!(
            "duffing.dim: {} is too small for the starting coherent state |α| = {:.2}",
            params.dim,
            alpha.norm()
        )));
    }
    let model = build_duffing(&params)?;
    let psi0 = coherent_state(alpha, params.dim)?;
    let probe = EhrenfestProbe::new(&model, &params)?;

    info!("quantum section: beta = {beta}, dim = {}, {steps} steps", params.dim);
    let mut stream = NoiseStream::new(cfg.base_seed, 0);
    let mut defect_sq = (0.0, 0.0);
    let mut defect_err = None;
    let mut max_bp: f64 = 0.0;
    let trajectory = run_trajectory_observed(&model, &psi0, &opts, &mut stream, |rec, psi| {
        max_bp = max_bp.max(rec.boundary_population);
        match probe.defect(psi, rec.t) {
            Ok(d) => {
                defect_sq.0 += d.q * d.q;
                defect_sq.1 += d.p * d.p;
            }
            Err(e) => defect_err = Some(e),
        }
    })?;
    if let Some(e) = defect_err {
        return Err(e.into());
    }
    let n_rec = trajectory.records.len() as f64;

    let series = quantum_section(&trajectory.records, beta, s.normalize_by_beta, dt, s.n_skip)?;
    let normalized = quantum_section(&trajectory.records, beta, true, dt, s.n_skip)?;
    let mean_field = DuffingField::mean_field(&params);
    let classical = DuffingField::classical(params.gamma, params.g);

    ensure_dir(&cfg.output)?;
    let stem = format!("quantum_section_beta{beta}");
    let csv = cfg.output.join(format!("{stem}.csv"));
    write_file(&csv, series.to_csv_string().as_bytes())?;
    let report = QuantumSectionReport {
        csv: csv.clone(),
        beta,
        dim: params.dim,
        dt,
        points: series.len(),
        x_std: normalized.x_std(),
        displacement_mean_field: strobe_displacement_rms(&normalized, &mean_field, dt)?,
        displacement_classical: strobe_displacement_rms(&normalized, &classical, dt)?,
        ehrenfest_defect_q: (defect_sq.0 / n_rec).sqrt() / beta,
        ehrenfest_defect_p: (defect_sq.1 / n_rec).sqrt() / beta,
        max_boundary_population: max_bp,
        series,
    };
    write_manifest(&cfg.output, &stem, "quantum-section", cfg, &[csv], &report)?;
    Ok(report)
}

fn ensemble_model(cfg: &RunConfig) -> Result<LindbladModel, CliError> {
    Ok(match cfg.model {
        ModelKind::DampedHo => build_damped_ho(&cfg.damped_ho.params())?,
        ModelKind::Duffing => build_duffing(&cfg.duffing.params())?,
    })
}

fn initial_state(cfg: &RunConfig, dim: usize) -> Result<StateVector, CliError> {
    Ok(match cfg.initial {
        InitialState::Fock { n } => fock_state(n, dim)?,
        InitialState::Coherent { re, im } => coherent_state(C64::new(re, im), dim)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCompareReport {
    #[serde(skip)]
    pub csv: PathBuf,
    pub unraveling: Unraveling,
    pub n_trajectories: usize,
    pub max_error: f64,
    pub stderr_scale: f64,
    pub tolerance: f64,
    pub total_jumps: u64,
    pub pass: bool,
}

impl OracleCompareReport {
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!(
                "{} oracle-compare {}: max |rho_est - rho_oracle| = {:.4e} (tolerance {:.3e}, 1/sqrt(N) = {:.3e}, N = {})",
                if self.pass { "PASS" } else { "FAIL" },
                unraveling_tag(self.unraveling),
                self.max_error,
                self.tolerance,
                self.stderr_scale,
                self.n_trajectories
            ),
        ]
    }
}

pub fn oracle_compare_cmd(cfg: &RunConfig, workers: Option<usize>) -> Result<OracleCompareReport, CliError> {
    cfg.validate_ensemble()?;
    if !(cfg.oracle_compare.tolerance.is_finite() && cfg.oracle_compare.tolerance > 0.0) {
        return Err(CliError::Validation("oracle_compare.tolerance: must be positive".into()));
    }
    let model = ensemble_model(cfg)?;
    let psi0 = initial_state(cfg, model.dim())?;
    let opts = cfg.trajectory_options(1.0);
    let n = cfg.run.n_trajectories;
    info!("oracle-compare: {n} {} trajectories", unraveling_tag(opts.unraveling));
    let ens = ensemble_density(&model, &psi0, &opts, n, cfg.base_seed, workers)?;
    let oracle = propagate(&DensityMatrix::from_pure(&psi0), &model, opts.t_final, opts.dt)?;
    let est = ens.rho_estimate.entries();
    let exact = oracle.entries();

    let mut text = String::from("i,j,estimate_re,estimate_im,oracle_re,oracle_im,abs_error\n");
    let mut max_error: f64 = 0.0;
    for i in 0..model.dim() {
        for j in 0..model.dim() {
            let err = (est[(i, j)] - exact[(i, j)]).norm();
            max_error = max_error.max(err);
            text.push_str(&format!(
                "{i},{j},{},{},{},{},{}\n",
                fmt_f64(est[(i, j)].re),
                fmt_f64(est[(i, j)].im),
                fmt_f64(exact[(i, j)].re),
                fmt_f64(exact[(i, j)].im),
                fmt_f64(err)
            ));
        }
    }

    ensure_dir(&cfg.output)?;
    let stem = format!("oracle_compare_{}", unraveling_tag(opts.unraveling));
    let csv = cfg.output.join(format!("{stem}.csv"));
    write_file(&csv, text.as_bytes())?;
    let report = OracleCompareReport {
        csv: csv.clone(),
        unraveling: opts.unraveling,
        n_trajectories: n,
        max_error,
        stderr_scale: ens.stderr_scale,
        tolerance: cfg.oracle_compare.tolerance,
        total_jumps: ens.total_jumps,
        pass: max_error <= cfg.oracle_compare.tolerance,
    };
    let txt = cfg.output.join(format!("{stem}.txt"));
    write_file(&txt, (report.lines().join("\n") + "\n").as_bytes())?;
    write_manifest(&cfg.output, &stem, "oracle-compare", cfg, &[csv, txt], &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceLevel {
    pub n_trajectories: usize,
    pub replicate_errors: Vec<f64>,
    pub mean_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    #[serde(skip)]
    pub csv: PathBuf,
    pub unraveling: Unraveling,
    pub levels: Vec<ConvergenceLevel>,
    pub ratios: Vec<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub pass: bool,
}

impl ConvergenceReport {
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in &self.levels {
            out.push(format!(
                "  N = {:>6}: mean max-entry error {:.4e} over {} ensembles",
                l.n_trajectories,
                l.mean_error,
                l.replicate_errors.len()
            ));
        }
        let ratios: Vec<String> = self.ratios.iter().map(|r| format!("{r:.3}")).collect();
        out.insert(
            0,
            format!(
                "{} convergence-study {}: error ratios [{}] (allowed [{}, {}])",
                if self.pass { "PASS" } else { "FAIL" },
                unraveling_tag(self.unraveling),
                ratios.join(", "),
                self.ratio_min,
                self.ratio_max
            ),
        );
        out
    }
}

/// Seed of replicate `r` at level `level`; distinct for every pair.
fn replicate_seed(base: u64, level: usize, replicates: usize, r: usize) -> u64 {
    base.wrapping_add(1 + (level * replicates + r) as u64)
}

pub fn convergence_study_cmd(cfg: &RunConfig, workers: Option<usize>) -> Result<ConvergenceReport, CliError> {
    cfg.validate_convergence()?;
    let c = &cfg.convergence;
    let model = ensemble_model(cfg)?;
    let psi0 = initial_state(cfg, model.dim())?;
    let opts = cfg.trajectory_options(1.0);
    let oracle = propagate(&DensityMatrix::from_pure(&psi0), &model, opts.t_final, opts.dt)?;

    let mut text = String::from("n_trajectories,replicate,seed,max_error\n");
    let mut levels = Vec::new();
    for (li, &n) in c.n_trajectories.iter().enumerate() {
        info!("convergence-study: {} ensembles of {n}", c.replicates);
        let mut errs = Vec::with_capacity(c.replicates);
        for r in 0..c.replicates {
            let seed = replicate_seed(cfg.base_seed, li, c.replicates, r);
            let ens = ensemble_density(&model, &psi0, &opts, n, seed, workers)?;
            let e = ens.rho_estimate.max_abs_diff(&oracle)?;
            text.push_str(&format!("{n},{r},{seed},{}\n", fmt_f64(e)));
            errs.push(e);
        }
        let mean_error = errs.iter().sum::<f64>() / errs.len() as f64;
        levels.push(ConvergenceLevel {
            n_trajectories: n,
            replicate_errors: errs,
            mean_error,
        });
    }
    let ratios: Vec<f64> = levels.windows(2).map(|w| w[0].mean_error / w[1].mean_error).collect();
    let pass = ratios.iter().all(|r| (c.ratio_min..=c.ratio_max).contains(r));

    ensure_dir(&cfg.output)?;
    let stem = format!("convergence_{}", unraveling_tag(opts.unraveling));
    let csv = cfg.output.join(format!("{stem}.csv"));
    write_file(&csv, text.as_bytes())?;
    let report = ConvergenceReport {
        csv: csv.clone(),
        unraveling: opts.unraveling,
        levels,
        ratios,
        ratio_min: c.ratio_min,
        ratio_max: c.ratio_max,
        pass,
    };
    let txt = cfg.output.join(format!("{stem}.txt"));
    write_file(&txt, (report.lines().join("\n") + "\n").as_bytes())?;
    write_manifest(&cfg.output, &stem, "convergence-study", cfg, &[csv, txt], &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct HoValidateReport {
    #[serde(skip)]
    pub csv: PathBuf,
    pub checks: Vec<Check>,
    /// Largest boundary population seen along the shared-noise path.
    pub coherent_boundary_population: f64,
}

impl HoValidateReport {
    pub fn pass(&self) -> bool {
        all_pass(&self.checks)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn oracle_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let h = &cfg.ho_validate;
    let p = HoParams {
        dim: h.oracle_dim,
        ..cfg.damped_ho.params()
    };
    let model = build_damped_ho(&p)?;
    let alpha0 = C64::new(h.oracle_alpha0, 0.0);
    let rho0 = DensityMatrix::from_pure(&coherent_state(alpha0, p.dim)?);
    let a = annihilation_op(p.dim)?;

    let t1 = h.oracle_amplitude_t;
    let rho1 = propagate(&rho0, &model, t1, cfg.run.dt)?;
    let got = moment(&rho1, &a)?;
    let want = alpha0 * (-C64::new(0.5 * p.gamma, p.omega) * t1).exp();
    let amp = Check::new(
        "oracle-mean-amplitude",
        (got - want).norm(),
        0.0,
        format!("|<a>(t={t1}) - a0 exp(-(i omega + gamma/2) t)| <= {:e}", h.oracle_amplitude_tolerance),
        (got - want).norm() <= h.oracle_amplitude_tolerance,
    );

    let t2 = h.oracle_occupation_t / p.gamma;
    let rho2 = propagate(&rho0, &model, t2, cfg.run.dt)?;
    let n = moment(&rho2, &number_op(p.dim)?)?.re;
    let occ = Check::new(
        "oracle-thermal-occupation",
        n,
        p.nbar,
        format!("|<a+a>(t={t2}) - nbar| <= {:e}", h.oracle_occupation_tolerance),
        (n - p.nbar).abs() <= h.oracle_occupation_tolerance,
    );
    Ok(vec![amp, occ])
}

fn localization_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let h = &cfg.ho_validate;
    let p = HoParams {
        nbar: 0.0,
        dim: h.localization_dim,
        ..cfg.damped_ho.params()
    };
    let model = build_damped_ho(&p)?;
    let psi0 = fock_state(h.localization_fock, p.dim)?;
    let opts = RunOptions {
        t_final: h.localization_t,
        unraveling: Unraveling::Qsd,
        ..cfg.single_trajectory_options()
    };
    let opts = RunOptions {
        sample_every: opts.validate()?.max(1) as usize,
        ..opts
    };
    let mut stream = NoiseStream::new(cfg.base_seed, LOCALIZATION_STREAM);
    let tr = run_trajectory(&model, &psi0, &opts, &mut stream)?;
    let last = tr.records.last().expect("a run always records its final state");
    let band = (h.variance_min, h.variance_max);
    let rule = format!("in [{}, {}]", band.0, band.1);
    let inside = |v: f64| v >= band.0 && v <= band.1;
    let purity = tr.final_state.norm_sqr().powi(2);
    Ok(vec![
        Check::new("localization-q-variance", last.q_var, 0.5, rule.clone(), inside(last.q_var)),
        Check::new("localization-p-variance", last.p_var, 0.5, rule, inside(last.p_var)),
        Check::new(
            "localization-purity",
            purity,
            1.0,
            "|tr(P^2) - 1| <= 1e-12",
            (purity - 1.0).abs() <= 1e-12,
        ),
    ])
}

fn coherent_checks(cfg: &RunConfig, workers: Option<usize>) -> Result<(Vec<Check>, f64), CliError> {
    let h = &cfg.ho_validate;
    let p = HoParams {
        dim: h.coherent_dim,
        ..cfg.damped_ho.params()
    };
    let model = build_damped_ho(&p)?;
    let alpha0 = C64::new(h.coherent_alpha0, 0.0);

    // shared-noise path: the thermal channel `√(n̄γ) a†` is the one whose
    // increment drives the reduced equation
    let thermal_channel = (p.nbar > 0.0 && p.gamma > 0.0).then_some(0);
    let dt = h.coherent_dt;
    let steps = (h.coherent_t / dt).round() as u64;
    let mut psi = coherent_state(alpha0, p.dim)?;
    let a = annihilation_op(p.dim)?;
    let mut stepper = Stepper::new(&model, cfg.run.scheme);
    let mut stream = NoiseStream::new(cfg.base_seed, COHERENT_PATH_STREAM);
    let mut reduced = CoherentAmplitude::new(alpha0, 0.0);
    let mut worst: f64 = 0.0;
    let mut max_bp: f64 = 0.0;
    let mut noise = vec![C64::new(0.0, 0.0); model.lindblads().len()];
    for k in 0..steps {
        noise.iter_mut().for_each(|x| *x = stream.complex_wiener(dt));
        stepper.qsd_step_with_noise(&mut psi, k as f64 * dt, dt, &noise)?;
        let shared = thermal_channel.map_or(C64::new(0.0, 0.0), |j| noise[j]);
        reduced = coherent_qsd_increment(reduced, &p, dt, shared);
        worst = worst.max((expectation(&psi, &a)? - reduced.alpha).norm());
        max_bp = max_bp.max(psi.boundary_population());
    }
    let rel = worst / alpha0.norm();
    let shared = Check::new(
        "coherent-shared-noise-path",
        rel,
        0.0,
        format!("max_t |<a>_full - alpha_reduced| / |alpha0| <= {}", h.coherent_tolerance),
        rel <= h.coherent_tolerance,
    );

    // Monte Carlo moments of the reduced equation at the run step
    let mc_dt = cfg.run.dt;
    let mc_steps = (h.coherent_t / mc_dt).round() as u64;
    let t = mc_steps as f64 * mc_dt;
    let run_path = |i: usize| {
        let mut s = NoiseStream::new(cfg.base_seed, COHERENT_ENSEMBLE_STREAMS + i as u64);
        let mut z = CoherentAmplitude::new(alpha0, 0.0);
        for _ in 0..mc_steps {
            z = coherent_qsd_step(z, &p, mc_dt, &mut s);
        }
        z.alpha
    };
    let finals: Vec<C64> = match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| CliError::Validation(format!("workers: {e}")))?;
            pool.install(|| parallel_paths(h.coherent_paths, &run_path))
        }
        None => parallel_paths(h.coherent_paths, &run_path),
    };
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<C64>() / n;
    let var = finals.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    let want_mean = alpha0 * (-C64::new(0.5 * p.gamma, p.omega) * t).exp();
    let want_var = p.nbar * (1.0 - (-p.gamma * t).exp());
    let stderr = (var / n).sqrt();
    let mean_dev = (mean - want_mean).norm();
    let mean_check = Check::new(
        "coherent-ensemble-mean",
        mean_dev,
        0.0,
        format!("|M(alpha) - a0 exp(-(i omega + gamma/2) t)| <= 3 stderr = {:.3e}", 3.0 * stderr),
        mean_dev <= 3.0 * stderr,
    );
    let var_check = Check::new(
        "coherent-ensemble-variance",
        var,
        want_var,
        format!("relative deviation <= {}", h.coherent_variance_tolerance),
        want_var > 0.0 && ((var - want_var) / want_var).abs() <= h.coherent_variance_tolerance,
    );
    let truncation = Check::new(
        "coherent-truncation",
        max_bp,
        0.0,
        "boundary population along the path < 1e-6",
        max_bp < 1e-6,
    );
    Ok((vec![truncation, shared, mean_check, var_check], max_bp))
}

fn parallel_paths<F>(n: usize, f: &F) -> Vec<C64>
where
    F: Fn(usize) -> C64 + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

fn jump_rate_check(cfg: &RunConfig, workers: Option<usize>) -> Result<Check, CliError> {
    let h = &cfg.ho_validate;
    let p = HoParams {
        nbar: 0.0,
        dim: h.jump_dim,
        ..cfg.damped_ho.params()
    };
    let model = build_damped_ho(&p)?;
    let psi0 = fock_state(h.jump_fock, p.dim)?;
    let opts = RunOptions {
        t_final: h.jump_t,
        unraveling: Unraveling::Qj,
        ..cfg.single_trajectory_options()
    };
    let ens = ensemble_density(&model, &psi0, &opts, h.jump_trajectories, cfg.base_seed, workers)?;

    // time integral of Σ⟨L†L⟩ = γ⟨a†a⟩ along the oracle, trapezoid rule
    let rate_op = number_op(p.dim)?.scale_real(p.gamma);
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut err = None;
    propagate_observed(
        &DensityMatrix::from_pure(&psi0),
        &model,
        h.jump_t,
        cfg.run.dt,
        PropagateOptions {
            checkpoint_every: 1,
            ..Default::default()
        },
        |t, rho| match moment(rho, &rate_op) {
            Ok(r) => {
                if let Some((t0, r0)) = prev {
                    integral += 0.5 * (t - t0) * (r0 + r.re);
                }
                prev = Some((t, r.re));
            }
            Err(e) => err = Some(e),
        },
    )?;
    if let Some(e) = err {
        return Err(e.into());
    }
    let expected = integral * h.jump_trajectories as f64;
    let measured = ens.total_jumps as f64;
    let bound = 3.0 * expected.sqrt();
    Ok(Check::new(
        "qj-jump-count",
        measured,
        expected,
        format!("|count - expected| <= 3 sqrt(expected) = {bound:.2}"),
        (measured - expected).abs() <= bound,
    ))
}

pub fn ho_validate_cmd(cfg: &RunConfig, workers: Option<usize>) -> Result<HoValidateReport, CliError> {
    cfg.validate_ho()?;
    let mut checks = Vec::new();
    info!("ho-validate: oracle moments");
    checks.extend(oracle_checks(cfg)?);
    info!("ho-validate: QSD localization");
    checks.extend(localization_checks(cfg)?);
    info!("ho-validate: coherent-state reduction");
    let (coherent, coherent_bp) = coherent_checks(cfg, workers)?;
    checks.extend(coherent);
    info!("ho-validate: QJ jump rate");
    checks.push(jump_rate_check(cfg, workers)?);

    ensure_dir(&cfg.output)?;
    let csv = cfg.output.join("ho_validate.csv");
    write_file(&csv, checks_csv(&checks).as_bytes())?;
    let report = HoValidateReport {
        csv: csv.clone(),
        checks,
        coherent_boundary_population: coherent_bp,
    };
    write_manifest(&cfg.output, "ho_validate", "ho-validate", cfg, &[csv], &report)?;
    Ok(report)
}
