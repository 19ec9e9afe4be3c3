//! End-to-end acceptance suite. Runs every workload at its stated size and
//! tolerance, prints one PASS/FAIL line per criterion and exits nonzero if
//! any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use unravel::classical::{duffing_energy, integrate_classical};
use unravel::PhasePoint;
use unravel_cli::commands::{
    classical_section_cmd, convergence_study_cmd, ho_validate_cmd, oracle_compare_cmd, quantum_section_cmd,
    HoValidateReport,
};
use unravel_cli::RunConfig;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Suite {
    root: tempfile::TempDir,
    workers: Option<usize>,
    quiet: bool,
    runs: usize,
    outcomes: Vec<Outcome>,
    /// CSV artifacts of the first pass, keyed by workload.
    artifacts: Vec<(String, Vec<PathBuf>)>,
}

impl Suite {
    fn config(&mut self, toml: &str) -> RunConfig {
        self.runs += 1;
        let mut cfg = RunConfig::from_toml_str(toml).expect("acceptance config parses");
        cfg.output = self.root.path().join(format!("run{}", self.runs));
        cfg
    }

    fn new(workers: Option<usize>, quiet: bool) -> Self {
        Self {
            root: tempfile::tempdir().expect("tempdir"),
            workers,
            quiet,
            runs: 0,
            outcomes: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn note(&self, line: String) {
        if !self.quiet {
            println!("     {line}");
        }
    }

    fn record(&mut self, name: &'static str, pass: bool, detail: String) {
        if !self.quiet {
            println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        }
        self.outcomes.push(Outcome { name, pass, detail });
    }
}

fn checks_line(r: &HoValidateReport, names: &[&str]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        match r.check(name) {
            Some(c) => {
                pass &= c.pass;
                parts.push(format!("{name} {:.4e} vs {:.4e} ({})", c.measured, c.expected, c.rule));
            }
            None => {
                pass = false;
                parts.push(format!("{name} missing"));
            }
        }
    }
    (pass, parts.join("; "))
}

const CONSISTENCY: &str = r#"
[damped_ho]
omega = 1.0
gamma = 1.0
nbar = 0.5
dim = 15
[initial]
kind = "fock"
n = 1
[run]
dt = 1e-3
t_final = 2.0
n_trajectories = 1000
[oracle_compare]
tolerance = 0.05
"#;

fn with_unraveling(base: &str, u: &str) -> String {
    base.replace("[run]\n", &format!("[run]\nunraveling = \"{u}\"\n"))
}

fn consistency(s: &mut Suite) {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut files = Vec::new();
    for u in ["qsd", "qj"] {
        let cfg = s.config(&with_unraveling(CONSISTENCY, u));
        match oracle_compare_cmd(&cfg, s.workers) {
            Ok(r) => {
                pass &= r.pass;
                parts.push(format!("{u} max error {:.4e} (stderr scale {:.4e})", r.max_error, r.stderr_scale));
                files.push(r.csv);
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{u} error: {e}"));
            }
        }
    }
    let detail = format!("{}; tolerance 0.05; {:.1} s", parts.join(", "), start.elapsed().as_secs_f64());
    s.record("unraveling consistency", pass, detail);
    s.artifacts.push(("consistency".into(), files));
}

fn convergence(s: &mut Suite) {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut files = Vec::new();
    for u in ["qsd", "qj"] {
        let toml = format!(
            "{}\n[convergence]\nn_trajectories = [250, 1000, 4000]\nratio_min = 1.4\nratio_max = 2.9\n",
            with_unraveling(CONSISTENCY, u)
        );
        let cfg = s.config(&toml);
        match convergence_study_cmd(&cfg, s.workers) {
            Ok(r) => {
                pass &= r.pass;
                let errs: Vec<String> = r.levels.iter().map(|l| format!("{:.4e}", l.mean_error)).collect();
                let ratios: Vec<String> = r.ratios.iter().map(|x| format!("{x:.3}")).collect();
                parts.push(format!("{u} errors [{}] ratios [{}]", errs.join(", "), ratios.join(", ")));
                files.push(r.csv);
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{u} error: {e}"));
            }
        }
    }
    let detail = format!("{}; bounds [1.4, 2.9]; {:.1} s", parts.join("; "), start.elapsed().as_secs_f64());
    s.record("convergence rate", pass, detail);
    s.artifacts.push(("convergence".into(), files));
}

fn ho_validate(s: &mut Suite) {
    let start = Instant::now();
    let cfg = s.config("");
    let report = match ho_validate_cmd(&cfg, s.workers) {
        Ok(r) => r,
        Err(e) => {
            for name in ["oracle analytic moments", "localization", "reduced coherent dynamics", "jump rate"] {
                s.record(name, false, format!("ho-validate error: {e}"));
            }
            return;
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let groups: [(&'static str, &[&str]); 4] = [
        ("oracle analytic moments", &["oracle-mean-amplitude", "oracle-thermal-occupation"]),
        (
            "localization",
            &["localization-q-variance", "localization-p-variance", "localization-purity"],
        ),
        (
            "reduced coherent dynamics",
            &["coherent-truncation", "coherent-shared-noise-path", "coherent-ensemble-mean", "coherent-ensemble-variance"],
        ),
        ("jump rate", &["qj-jump-count"]),
    ];
    for (name, checks) in groups {
        let (pass, detail) = checks_line(&report, checks);
        s.record(name, pass, detail);
    }
    s.note(format!("damped-oscillator checks took {elapsed:.1} s"));
    s.artifacts.push(("ho-validate".into(), vec![report.csv]));
}

fn classical(s: &mut Suite) {
    let mut pass = true;
    let mut parts = Vec::new();

    let settle = integrate_classical(PhasePoint::new(0.1, 0.0, 0.0), 0.125, 0.0, 200.0, 1e-3)
        .ok()
        .and_then(|p| p.last().copied());
    match settle {
        Some(e) => {
            let d = (e.x.abs() - 1.0).abs().max(e.p.abs());
            pass &= d <= 1e-3;
            parts.push(format!("(a) distance to well {d:.2e}"));
        }
        None => {
            pass = false;
            parts.push("(a) integration failed".into());
        }
    }

    match integrate_classical(PhasePoint::new(0.3, 0.8, 0.0), 0.0, 0.0, 100.0, 1e-3) {
        Ok(path) => {
            let e0 = duffing_energy(&path[0]);
            let drift = path.iter().map(|q| (duffing_energy(q) - e0).abs()).fold(0.0, f64::max);
            pass &= drift <= 1e-9;
            parts.push(format!("(b) energy drift {drift:.2e}"));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("(b) {e}"));
        }
    }

    let s0 = PhasePoint::new(0.3, 0.8, 0.0);
    let end = |dt: f64| integrate_classical(s0, 0.0, 0.0, 10.0, dt).map(|p| *p.last().unwrap());
    match (end(0.1), end(0.05), end(0.1 / 8.0)) {
        (Ok(a), Ok(b), Ok(r)) => {
            let err = |q: PhasePoint| ((q.x - r.x).powi(2) + (q.p - r.p).powi(2)).sqrt();
            let ratio = err(a) / err(b);
            pass &= (8.0..=32.0).contains(&ratio);
            parts.push(format!("(c) order factor {ratio:.2}"));
        }
        _ => {
            pass = false;
            parts.push("(c) integration failed".into());
        }
    }

    let cfg = s.config("[section]\nx0 = 0.5\np0 = 0.0\nn_skip = 100\nn_points = 2000\n");
    let start = Instant::now();
    match classical_section_cmd(&cfg) {
        Ok(r) => {
            let secs = start.elapsed().as_secs_f64();
            let ok = secs < 30.0 && r.points == 2000 && r.max_abs <= 3.0 && r.x_std >= 0.1;
            pass &= ok;
            parts.push(format!(
                "(d) {} points in {secs:.2} s, max |x|,|p| {:.3}, std(x) {:.3}",
                r.points, r.max_abs, r.x_std
            ));
            s.artifacts.push(("classical section".into(), vec![r.csv]));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("(d) {e}"));
        }
    }
    s.record("classical duffing", pass, parts.join("; "));
}

/// Fock truncations sized so the leakage monitor stays quiet over 300 periods.
const BETA_RUNS: [(f64, usize); 3] = [(1.0, 64), (2.0, 96), (4.0, 150)];

fn beta_trend(s: &mut Suite) {
    let mut classical_map = Vec::new();
    let mut model_map = Vec::new();
    let mut files = Vec::new();
    let mut failure = None;
    for (beta, dim) in BETA_RUNS {
        let cfg = s.config(&format!(
            "[duffing]\ngamma = 0.125\ng = 0.3\nbeta = {beta:?}\ndim = {dim}\n[section]\nn_points = 300\n"
        ));
        let start = Instant::now();
        match quantum_section_cmd(&cfg) {
            Ok(r) => {
                s.note(format!(
                    "beta {beta}: dim {dim}, {} points, {:.1} s, ehrenfest defect / beta (q {:.3e}, p {:.3e}), max boundary population {:.2e}",
                    r.points,
                    start.elapsed().as_secs_f64(),
                    r.ehrenfest_defect_q,
                    r.ehrenfest_defect_p,
                    r.max_boundary_population
                ));
                classical_map.push(r.displacement_classical.unwrap_or(f64::NAN));
                model_map.push(r.displacement_mean_field.unwrap_or(f64::NAN));
                files.push(r.csv);
            }
            Err(e) => {
                failure = Some(format!("beta {beta}: {e}"));
                break;
            }
        }
    }
    let decreasing = |v: &[f64]| v.len() == BETA_RUNS.len() && v.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" > ");
    match failure {
        Some(e) => s.record("beta trend", false, e),
        None => {
            s.record(
                "beta trend",
                decreasing(&classical_map),
                format!("rms strobe displacement against the classical map, beta 1/2/4: {}", fmt(&classical_map)),
            );
            s.note(format!(
                "diagnostic: against the model's own localized map: {} ({})",
                fmt(&model_map),
                if decreasing(&model_map) { "decreasing" } else { "not decreasing" }
            ));
        }
    }
    s.artifacts.push(("beta trend".into(), files));
}

fn rerun() -> Suite {
    let mut again = Suite::new(Some(1), true);
    consistency(&mut again);
    convergence(&mut again);
    ho_validate(&mut again);
    classical(&mut again);
    beta_trend(&mut again);
    again
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    matches!((fs::read(a), fs::read(b)), (Ok(x), Ok(y)) if x == y)
}

fn determinism(s: &mut Suite) {
    let start = Instant::now();
    s.note("rerunning every workload on one worker for the determinism check".into());
    // keep the rerun suite alive so its directory outlives the comparison
    let again = rerun();
    let second = &again.artifacts;
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for ((name, first), (_, rerun)) in s.artifacts.iter().zip(second) {
        if first.len() != rerun.len() {
            mismatched.push(format!("{name} (missing outputs)"));
            continue;
        }
        for (a, b) in first.iter().zip(rerun) {
            compared += 1;
            if !same_bytes(a, b) {
                mismatched.push(format!("{name}: {}", a.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    let pass = mismatched.is_empty() && s.artifacts.len() == second.len() && compared > 0;
    let detail = if pass {
        format!("{compared} CSV files byte-identical on rerun; {:.1} s", start.elapsed().as_secs_f64())
    } else {
        format!("differences: {}", mismatched.join(", "))
    };
    s.record("determinism", pass, detail);
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut suite = Suite::new(None, false);
    println!("acceptance suite");
    consistency(&mut suite);
    convergence(&mut suite);
    ho_validate(&mut suite);
    classical(&mut suite);
    beta_trend(&mut suite);
    determinism(&mut suite);

    let failed: Vec<&Outcome> = suite.outcomes.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance: {} passed, {} failed ({:.0} s)",
        suite.outcomes.len() - failed.len(),
        failed.len(),
        start.elapsed().as_secs_f64()
    );
    for o in &failed {
        println!("  failed: {} ({})", o.name, o.detail);
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
