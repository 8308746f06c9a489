//! Reference solutions of the two singular limits (cold pressureless flow and
//! radial shell n-body) and the error tables of particle runs against them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{observables, Observables, RunMetrics};
use crate::error::{Result, VpError};
use crate::scales::{DatumShape, Particle, Shell, SingularDatum};

/// Collapse time of a cold uniform ball, `(pi/2) sqrt(R^3 / (2 M))`.
pub fn homologous_collapse_time(mass: f64, radius: f64) -> f64 {
    0.5 * std::f64::consts::PI * (radius.powi(3) / (2.0 * mass)).sqrt()
}

/// Time for a body at rest at `r0` to fall to the center under `r'' = -mu/r^2`.
pub fn free_fall_time(mu: f64, r0: f64) -> f64 {
    0.5 * std::f64::consts::PI * r0.powf(1.5) / (2.0 * mu).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub dt_oracle: f64,
    /// Spacing of the recorded states.
    pub record_dt: f64,
    /// Equal-mass bins of the velocity profile (fluid oracle).
    pub profile_bins: usize,
    /// Labels per profile bin (fluid oracle).
    pub labels_per_bin: usize,
}

impl OracleOptions {
    /// Oracle step `dt / ratio`, records every `dt`.
    pub fn for_run_dt(dt: f64, ratio: f64) -> Self {
        OracleOptions {
            dt_oracle: dt / ratio,
            record_dt: dt,
            profile_bins: 16,
            labels_per_bin: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub time: f64,
    pub labels: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub time: f64,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OracleKind {
    /// Discrete shells with these masses.
    Shells { masses: Vec<f64> },
    /// Fluid labels at these enclosed-mass fractions (increasing).
    Fluid { mass_coords: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTrajectory {
    pub kind: OracleKind,
    pub times: Vec<f64>,
    /// `radii[k][label]` at `times[k]`.
    pub radii: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub crossings: Vec<CrossingEvent>,
    pub collapse: Option<CollapseEvent>,
    /// End of validity: the earlier of the requested horizon, the first
    /// crossing (fluid) and the first collapse.
    pub horizon: f64,
}

fn rk4(r: f64, v: f64, mu: f64, h: f64) -> (f64, f64) {
    let a = |x: f64| -mu / (x * x);
    let (k1r, k1v) = (v, a(r));
    let (k2r, k2v) = (v + 0.5 * h * k1v, a(r + 0.5 * h * k1r));
    let (k3r, k3v) = (v + 0.5 * h * k2v, a(r + 0.5 * h * k2r));
    let (k4r, k4v) = (v + h * k3v, a(r + h * k3r));
    (
        r + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r),
        v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// A step is accepted when it stays positive, finite and moves the body by
/// less than half its radius.
fn acceptable(r: f64, r_new: f64, v_new: f64) -> bool {
    r_new > 0.0 && r_new.is_finite() && v_new.is_finite() && (r_new - r).abs() < 0.5 * r
}

/// Below this fraction of its starting radius a body is taken to have hit
/// the center.
const COLLAPSE_FRACTION: f64 = 1e-6;

/// Result of advancing one body with fixed `mu` by `span`.
enum Advance {
    Done(f64, f64),
    /// Reached the center after this much time.
    Collapsed(f64),
}

/// RK4 with step `h`, halving near the center; the last stretch into the
/// center uses the free-fall asymptote `t = (2/3) r / |v|`.
fn advance(mut r: f64, mut v: f64, mu: f64, span: f64, h: f64, r_stop: f64) -> Advance {
    let mut t = 0.0;
    while t < span {
        let mut step = h.min(span - t);
        loop {
            let (rn, vn) = rk4(r, v, mu, step);
            if acceptable(r, rn, vn) || mu <= 0.0 && rn > 0.0 {
                r = rn;
                v = vn;
                t += step;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return Advance::Collapsed(t + 2.0 / 3.0 * r / v.abs());
            }
        }
        if r < r_stop && v < 0.0 {
            return Advance::Collapsed(t + 2.0 / 3.0 * r / v.abs());
        }
    }
    Advance::Done(r, v)
}

fn record_times(t_end: f64, record_dt: f64) -> Vec<f64> {
    let n = (t_end / record_dt).round().max(1.0) as usize;
    (0..=n).map(|k| (k as f64 * record_dt).min(t_end)).collect()
}

fn validate_options(t_end: f64, opts: &OracleOptions) -> Result<()> {
    if !(t_end > 0.0) {
        return Err(VpError::invalid("T", format!("{t_end} (must be > 0)")));
    }
    if !(opts.dt_oracle > 0.0 && opts.record_dt >= opts.dt_oracle) {
        return Err(VpError::invalid(
            "dt_oracle",
            format!("{} with record spacing {}", opts.dt_oracle, opts.record_dt),
        ));
    }
    Ok(())
}

/// Enclosed-mass coefficients `gamma (sum of inner masses + m_k/2)` for the
/// shells in `order` (innermost first).
fn shell_mus(order: &[usize], masses: &[f64], gamma: f64) -> Vec<f64> {
    let mut mu = vec![0.0; masses.len()];
    let mut inner = 0.0;
    for &k in order {
        mu[k] = gamma * (inner + 0.5 * masses[k]);
        inner += masses[k];
    }
    mu
}

fn first_violation(order: &[usize], r: &[f64]) -> Option<usize> {
    (0..order.len().saturating_sub(1)).find(|&i| r[order[i]] > r[order[i + 1]])
}

/// Radial shell n-body reference: `r_k'' = -gamma M_k / r_k^2` with
/// `M_k = sum_{r_j < r_k} m_j + m_k/2`, integrated by RK4. Crossings are
/// located by bisection to 1e-10 and swap the pair's masses; a shell reaching
/// the center ends the trajectory.
pub fn shell_oracle(
    shells: &[Shell],
    gamma: f64,
    t_end: f64,
    opts: &OracleOptions,
) -> Result<OracleTrajectory> {
    validate_options(t_end, opts)?;
    if shells.is_empty() {
        return Err(VpError::invalid("shells", "empty list"));
    }
    let n = shells.len();
    for i in 0..n {
        if !(shells[i].radius > 0.0) {
            return Err(VpError::invalid(
                "shell radius",
                format!("{}", shells[i].radius),
            ));
        }
        for j in i + 1..n {
            if shells[i].radius == shells[j].radius {
                return Err(VpError::invalid(
                    "shells",
                    format!("duplicate radius {}", shells[i].radius),
                ));
            }
        }
    }
    let masses: Vec<f64> = shells.iter().map(|s| s.mass).collect();
    let mut r: Vec<f64> = shells.iter().map(|s| s.radius).collect();
    let mut v: Vec<f64> = shells.iter().map(|s| s.velocity).collect();
    let r_stop: Vec<f64> = r.iter().map(|x| x * COLLAPSE_FRACTION).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| r[a].total_cmp(&r[b]));

    let times = record_times(t_end, opts.record_dt);
    let mut out = OracleTrajectory {
        kind: OracleKind::Shells {
            masses: masses.clone(),
        },
        times: vec![0.0],
        radii: vec![r.clone()],
        velocities: vec![v.clone()],
        crossings: Vec::new(),
        collapse: None,
        horizon: t_end,
    };

    // advances all shells by `span` with frozen masses
    let advance_all = |r: &[f64],
                       v: &[f64],
                       mu: &[f64],
                       span: f64|
     -> std::result::Result<(Vec<f64>, Vec<f64>), (f64, usize)> {
        let mut rn = Vec::with_capacity(n);
        let mut vn = Vec::with_capacity(n);
        let mut earliest: Option<(f64, usize)> = None;
        for k in 0..n {
            match advance(r[k], v[k], mu[k], span, opts.dt_oracle, r_stop[k]) {
                Advance::Done(a, b) => {
                    rn.push(a);
                    vn.push(b);
                }
                Advance::Collapsed(tc) => {
                    if earliest.is_none_or(|e| tc < e.0) {
                        earliest = Some((tc, k));
                    }
                    rn.push(0.0);
                    vn.push(0.0);
                }
            }
        }
        match earliest {
            Some(e) => Err(e),
            None => Ok((rn, vn)),
        }
    };

    let mut t = 0.0;
    let mut mu = shell_mus(&order, &masses, gamma);
    let mut rec = 1;
    while rec < times.len() {
        let target = times[rec];
        let span = (target - t).min(opts.dt_oracle);
        match advance_all(&r, &v, &mu, span) {
            Err((tc, k)) => {
                out.collapse = Some(CollapseEvent {
                    time: t + tc,
                    label: k,
                });
                out.horizon = out.horizon.min(t + tc);
                break;
            }
            Ok((rn, vn)) => {
                if first_violation(&order, &rn).is_some() {
                    // bisect for the earliest crossing inside this step
                    let (mut lo, mut hi) = (0.0, span);
                    while hi - lo > 1e-10 {
                        let mid = 0.5 * (lo + hi);
                        match advance_all(&r, &v, &mu, mid) {
                            Ok((rm, _)) if first_violation(&order, &rm).is_none() => lo = mid,
                            _ => hi = mid,
                        }
                    }
                    let Ok((rc, vc)) = advance_all(&r, &v, &mu, hi) else {
                        return Err(VpError::invalid("shells", "collapse during crossing"));
                    };
                    t += hi;
                    while let Some(i) = first_violation(&order, &rc) {
                        out.crossings.push(CrossingEvent {
                            time: t,
                            labels: (order[i], order[i + 1]),
                        });
                        order.swap(i, i + 1);
                    }
                    r = rc;
                    v = vc;
                    mu = shell_mus(&order, &masses, gamma);
                } else {
                    r = rn;
                    v = vn;
                    t += span;
                }
            }
        }
        if (t - target).abs() < 1e-12 * target.max(1.0) {
            t = target;
            out.times.push(t);
            out.radii.push(r.clone());
            out.velocities.push(v.clone());
            rec += 1;
        }
    }
    Ok(out)
}

/// Cold pressureless reference: each Lagrangian label `r0` obeys
/// `r'' = -gamma M(r0) / r^2` with its initial enclosed mass, which is exact
/// until the first shell crossing. Labels sit at enclosed-mass fractions
/// 0.1, 0.5, 0.9 and at the midpoints of `labels_per_bin` cells in each
/// velocity-profile bin.
pub fn cold_euler_oracle(
    datum: &SingularDatum,
    t_end: f64,
    opts: &OracleOptions,
) -> Result<OracleTrajectory> {
    validate_options(t_end, opts)?;
    datum.validate()?;
    let DatumShape::ColdMonokinetic {
        mass,
        profile,
        velocity,
    } = &datum.shape
    else {
        return Err(VpError::invalid(
            "datum",
            "cold oracle needs a cold monokinetic datum",
        ));
    };
    let bins = opts.profile_bins.max(1);
    let per = opts.labels_per_bin.max(1);
    let mut coords: Vec<f64> = vec![0.1, 0.5, 0.9];
    for b in 0..bins {
        for j in 0..per {
            coords.push((b as f64 + (j as f64 + 0.5) / per as f64) / bins as f64);
        }
    }
    coords.sort_by(f64::total_cmp);
    coords.dedup();
    let gamma = datum.gamma;
    let times = record_times(t_end, opts.record_dt);

    struct LabelRun {
        radii: Vec<f64>,
        velocities: Vec<f64>,
        collapse: Option<f64>,
    }
    let runs: Vec<LabelRun> = coords
        .par_iter()
        .map(|&u| {
            let r0 = profile.fraction_inverse(u);
            let mu = gamma * mass * u;
            let (mut r, mut v) = (r0, velocity.at(r0));
            let mut radii = vec![r];
            let mut velocities = vec![v];
            for w in times.windows(2) {
                match advance(
                    r,
                    v,
                    mu,
                    w[1] - w[0],
                    opts.dt_oracle,
                    r0 * COLLAPSE_FRACTION,
                ) {
                    Advance::Done(a, b) => {
                        r = a;
                        v = b;
                        radii.push(r);
                        velocities.push(v);
                    }
                    Advance::Collapsed(tc) => {
                        return LabelRun {
                            radii,
                            velocities,
                            collapse: Some(w[0] + tc),
                        }
                    }
                }
            }
            LabelRun {
                radii,
                velocities,
                collapse: None,
            }
        })
        .collect();

    let mut collapse: Option<CollapseEvent> = None;
    for (k, run) in runs.iter().enumerate() {
        if let Some(tc) = run.collapse {
            if collapse.is_none_or(|c| tc < c.time) {
                collapse = Some(CollapseEvent { time: tc, label: k });
            }
        }
    }
    let usable = runs.iter().map(|r| r.radii.len()).min().unwrap_or(0);
    let mut out = OracleTrajectory {
        kind: OracleKind::Fluid {
            mass_coords: coords.clone(),
        },
        times: times[..usable].to_vec(),
        radii: (0..usable)
            .map(|i| runs.iter().map(|r| r.radii[i]).collect())
            .collect(),
        velocities: (0..usable)
            .map(|i| runs.iter().map(|r| r.velocities[i]).collect())
            .collect(),
        crossings: Vec::new(),
        collapse,
        horizon: collapse.map_or(t_end, |c| c.time.min(t_end)),
    };

    // first crossing between neighbouring labels, refined by bisection
    for i in 1..out.times.len() {
        let bad = (0..coords.len() - 1).find(|&k| out.radii[i][k] >= out.radii[i][k + 1]);
        if let Some(k) = bad {
            let t0 = out.times[i - 1];
            let state = |j: usize, span: f64| {
                let r0 = profile.fraction_inverse(coords[j]);
                let mu = gamma * mass * coords[j];
                match advance(
                    out.radii[i - 1][j],
                    out.velocities[i - 1][j],
                    mu,
                    span,
                    opts.dt_oracle,
                    r0 * COLLAPSE_FRACTION,
                ) {
                    Advance::Done(r, _) => r,
                    Advance::Collapsed(_) => 0.0,
                }
            };
            let (mut lo, mut hi) = (0.0, out.times[i] - t0);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if state(k, mid) < state(k + 1, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.crossings.push(CrossingEvent {
                time: t0 + hi,
                labels: (k, k + 1),
            });
            out.horizon = out.horizon.min(t0 + hi);
            break;
        }
    }
    Ok(out)
}

impl OracleTrajectory {
    /// Recorded state index at time `t`, if `t` is a record time.
    fn index_at(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&x| x < t - 1e-9);
        (k < self.times.len() && (self.times[k] - t).abs() < 1e-9).then_some(k)
    }

    /// Label states at `t`, by cubic Hermite interpolation between records.
    pub fn state_at(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        if let Some(k) = self.index_at(t) {
            return Some((self.radii[k].clone(), self.velocities[k].clone()));
        }
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 || k >= self.times.len() {
            return None;
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let h = t1 - t0;
        let x = (t - t0) / h;
        let (h00, h10, h01, h11) = (
            2.0 * x.powi(3) - 3.0 * x * x + 1.0,
            x.powi(3) - 2.0 * x * x + x,
            -2.0 * x.powi(3) + 3.0 * x * x,
            x.powi(3) - x * x,
        );
        let n = self.radii[k].len();
        let mut r = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for j in 0..n {
            let (r0, r1) = (self.radii[k - 1][j], self.radii[k][j]);
            let (v0, v1) = (self.velocities[k - 1][j], self.velocities[k][j]);
            r.push(h00 * r0 + h10 * h * v0 + h01 * r1 + h11 * h * v1);
            v.push(v0 + x * (v1 - v0));
        }
        Some((r, v))
    }

    /// Mass-quantile radii and the equal-mass velocity profile at `t`.
    pub fn observables_at(&self, t: f64, bins: usize) -> Option<Observables> {
        let (r, v) = self.state_at(t)?;
        match &self.kind {
            OracleKind::Shells { masses } => {
                let mut ps: Vec<Particle> = (0..r.len())
                    .map(|k| Particle {
                        r: r[k],
                        vr: v[k],
                        l: 0.0,
                        m: masses[k],
                    })
                    .collect();
                ps.sort_by(|a, b| a.r.total_cmp(&b.r));
                Some(observables(t, &ps, bins))
            }
            OracleKind::Fluid { mass_coords } => {
                let quantile = |q: f64| {
                    let k = mass_coords.partition_point(|&u| u < q);
                    if k < mass_coords.len() && mass_coords[k] == q {
                        return r[k];
                    }
                    let k = k.clamp(1, mass_coords.len() - 1);
                    let (u0, u1) = (mass_coords[k - 1], mass_coords[k]);
                    r[k - 1] + (r[k] - r[k - 1]) * (q - u0) / (u1 - u0)
                };
                let bins = bins.max(1);
                let mut sum = vec![0.0; bins];
                let mut count = vec![0usize; bins];
                for (k, &u) in mass_coords.iter().enumerate() {
                    // quantile labels are not part of the profile cells
                    if [0.1, 0.5, 0.9].contains(&u) {
                        continue;
                    }
                    let b = ((u * bins as f64) as usize).min(bins - 1);
                    sum[b] += v[k];
                    count[b] += 1;
                }
                Some(Observables {
                    t,
                    r10: quantile(0.1),
                    r50: quantile(0.5),
                    r90: quantile(0.9),
                    vr_profile: sum
                        .iter()
                        .zip(&count)
                        .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
                        .collect(),
                })
            }
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "label", "r", "vr"])?;
        for (k, &t) in self.times.iter().enumerate() {
            for j in 0..self.radii[k].len() {
                w.write_record([
                    t.to_string(),
                    j.to_string(),
                    self.radii[k][j].to_string(),
                    self.velocities[k][j].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| VpError::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    R10,
    R50,
    R90,
    VelocityProfile,
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::R10 => "r10",
            Observable::R50 => "r50",
            Observable::R90 => "r90",
            Observable::VelocityProfile => "vr_profile",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub s: f64,
    pub observable: String,
    pub error: f64,
    /// Samples past the oracle's validity horizon were dropped.
    pub truncated: bool,
}

/// Sup over sampled times in `[0, horizon]` of the absolute difference
/// between run and oracle observables.
pub fn compare(
    run: &RunMetrics,
    oracle: &OracleTrajectory,
    observable: Observable,
    horizon: f64,
) -> Result<ComparisonRow> {
    let limit = horizon.min(oracle.horizon);
    let truncated = horizon > oracle.horizon;
    let mut error = 0.0f64;
    let mut used = 0;
    for obs in &run.observables {
        if obs.t > limit + 1e-12 {
            continue;
        }
        let bins = obs.vr_profile.len();
        let Some(reference) = oracle.observables_at(obs.t, bins) else {
            continue;
        };
        let e = match observable {
            Observable::R10 => (obs.r10 - reference.r10).abs(),
            Observable::R50 => (obs.r50 - reference.r50).abs(),
            Observable::R90 => (obs.r90 - reference.r90).abs(),
            Observable::VelocityProfile => obs
                .vr_profile
                .iter()
                .zip(&reference.vr_profile)
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        };
        error = error.max(e);
        used += 1;
    }
    if used == 0 {
        return Err(VpError::InsufficientData { needed: 1, got: 0 });
    }
    Ok(ComparisonRow {
        s: run.width,
        observable: observable.name().to_string(),
        error,
        truncated,
    })
}

pub fn write_comparisons<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "observable", "error"])?;
    for row in rows {
        w.write_record([
            row.s.to_string(),
            row.observable.clone(),
            row.error.to_string(),
        ])?;
    }
    w.flush().map_err(|e| VpError::io("<csv>", e))?;
    Ok(())
}
