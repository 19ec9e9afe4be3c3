//! Stroboscopic surfaces of section at `t = 2πn`.

use std::f64::consts::TAU;
use std::io::Write;

use crate::classical::{DuffingField, PhasePoint};
use crate::error::{Error, Result};
use crate::trajectories::TrajectoryRecord;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionPoint {
    pub n: u64,
    pub x: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectionSeries {
    pub points: Vec<SectionPoint>,
    pub skipped_transient: u64,
    /// Factor applied to the raw coordinates: 1 or 1/β.
    pub normalization: f64,
}

/// Number of RK4 steps per forcing period for a requested step, at least one.
pub fn steps_per_period(dt: f64) -> Result<u64> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::validation("dt", format!("must be positive and finite, got {dt}")));
    }
    let n = (TAU / dt).round();
    if n > 1e9 {
        return Err(Error::validation("dt", format!("{dt} gives more than 1e9 steps per period")));
    }
    Ok((n as u64).max(1))
}

/// Step that divides 2π exactly, closest to `dt`.
pub fn period_aligned_dt(dt: f64) -> Result<f64> {
    Ok(TAU / steps_per_period(dt)? as f64)
}

/// Section of the classical Duffing oscillator started at `t = 0`.
pub fn classical_section(
    s0: PhasePoint,
    gamma: f64,
    g: f64,
    n_points: u64,
    n_skip: u64,
    dt: f64,
) -> Result<SectionSeries> {
    field_section(&DuffingField::classical(gamma, g), s0, n_points, n_skip, dt)
}

/// Section of an arbitrary Duffing-type field. `s0.t` must be 0 so that the
/// strobes fall on `t = 2πn`.
pub fn field_section(
    field: &DuffingField,
    s0: PhasePoint,
    n_points: u64,
    n_skip: u64,
    dt: f64,
) -> Result<SectionSeries> {
    if n_points == 0 {
        return Err(Error::validation("n_points", "must be at least 1"));
    }
    if s0.t != 0.0 {
        return Err(Error::validation("s0.t", format!("section must start at t = 0, got {}", s0.t)));
    }
    if !s0.is_finite() {
        return Err(Error::validation("s0", "initial point must be finite"));
    }
    let per = steps_per_period(dt)?;
    let h = TAU / per as f64;
    let last = n_skip + n_points - 1;
    let mut points = Vec::with_capacity(n_points as usize);
    if n_skip == 0 {
        points.push(SectionPoint { n: 0, x: s0.x, p: s0.p });
    }
    let mut s = s0;
    for n in 1..=last {
        // restart the time origin each period so strobe times stay exact
        let start = PhasePoint { t: TAU * (n - 1) as f64, ..s };
        s = field.integrate_with(start, h, per, |_, _| {})?;
        s.t = TAU * n as f64;
        if n >= n_skip {
            points.push(SectionPoint { n, x: s.x, p: s.p });
        }
    }
    Ok(SectionSeries {
        points,
        skipped_transient: n_skip,
        normalization: 1.0,
    })
}

/// Picks the record nearest each strobe time `2πn`, `n ≥ n_skip`, up to the
/// last record. `dt` is the trajectory step; a strobe with no record within
/// `dt/2` is a gap.
pub fn quantum_section(
    records: &[TrajectoryRecord],
    beta: f64,
    normalize_by_beta: bool,
    dt: f64,
    n_skip: u64,
) -> Result<SectionSeries> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::validation("beta", format!("must be positive, got {beta}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::validation("dt", format!("must be positive and finite, got {dt}")));
    }
    let Some(last) = records.last() else {
        return Err(Error::validation("records", "no trajectory records"));
    };
    if records.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::validation("records", "times must be strictly increasing"));
    }
    let tol = 0.5 * dt;
    let divisor = if normalize_by_beta { beta } else { 1.0 };
    let n_last = ((last.t + tol) / TAU).floor() as u64;
    let mut points = Vec::new();
    for n in n_skip..=n_last {
        let strobe = TAU * n as f64;
        let i = records.partition_point(|r| r.t < strobe);
        let nearest = [i.checked_sub(1), (i < records.len()).then_some(i)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| {
                (records[a].t - strobe)
                    .abs()
                    .total_cmp(&(records[b].t - strobe).abs())
            })
            .map(|k| &records[k]);
        match nearest {
            Some(r) if (r.t - strobe).abs() <= tol => points.push(SectionPoint {
                n,
                x: r.q_mean / divisor,
                p: r.p_mean / divisor,
            }),
            _ => {
                return Err(Error::SectionGap {
                    n,
                    strobe,
                    tolerance: tol,
                })
            }
        }
    }
    Ok(SectionSeries {
        points,
        skipped_transient: n_skip,
        normalization: 1.0 / divisor,
    })
}

impl SectionSeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn x_std(&self) -> f64 {
        let n = self.points.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.points.iter().map(|q| q.x).sum::<f64>() / n;
        (self.points.iter().map(|q| (q.x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.points.iter().map(|q| q.x.abs().max(q.p.abs())).fold(0.0, f64::max)
    }

    /// Writes `n,x,p` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,x,p")?;
        for q in &self.points {
            writeln!(w, "{},{:.16e},{:.16e}", q.n, q.x, q.p)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// RMS distance between each point and the one-period image of its
/// predecessor under `field`, over consecutive strobes. The series must be in
/// the field's coordinates. Returns `None` with fewer than two consecutive
/// strobes.
pub fn strobe_displacement_rms(series: &SectionSeries, field: &DuffingField, dt: f64) -> Result<Option<f64>> {
    let per = steps_per_period(dt)?;
    let h = TAU / per as f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for w in series.points.windows(2) {
        if w[1].n != w[0].n + 1 {
            continue;
        }
        let start = PhasePoint::new(w[0].x, w[0].p, TAU * w[0].n as f64);
        let image = field.integrate_with(start, h, per, |_, _| {})?;
        sum += (image.x - w[1].x).powi(2) + (image.p - w[1].p).powi(2);
        count += 1;
    }
    Ok((count > 0).then(|| (sum / count as f64).sqrt()))
}
