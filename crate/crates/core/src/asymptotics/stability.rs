use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GridRule;
use crate::dynamics::{dt_rule, SimOptions, SimState};
use crate::error::{Result, VpError};
use crate::numerics::linear_fit;
use crate::radial_field::cic_profiles;
use crate::scales::{regularize, Particle, SingularDatum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Initial radii and velocities shifted by `delta * phi_i`.
    Data,
    /// A kick of `delta * phi_i * dt` on every step.
    Forcing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySpec {
    pub datum: SingularDatum,
    /// Particle count at width `s0`; `n(s) = n0 * s0 / s`.
    pub n0: usize,
    pub s0: f64,
    pub t_end: f64,
    pub eta: f64,
    pub grid: GridRule,
    pub seed: u64,
    /// Differences are sampled every this many steps and at the end.
    pub sample_every: usize,
}

impl StabilitySpec {
    pub fn n_particles(&self, s: f64) -> usize {
        (self.n0 as f64 * self.s0 / s).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub s: f64,
    pub delta: f64,
    pub mode: PerturbationMode,
    /// Sup over time and particles of `max(|r - r~|, |vr - vr~|)`.
    pub d_z: f64,
    pub d_rho: f64,
    pub d_force: f64,
    /// `d_z / delta`, zero for a zero perturbation.
    pub amplification: f64,
    pub amplification_rho: f64,
    pub amplification_force: f64,
    /// Running sup of `d_z` at each sample time.
    pub history: Vec<(f64, f64)>,
    pub n_particles: usize,
}

/// Deterministic perturbation directions in `[-1, 1]`, two per particle.
fn directions(seed: u64, n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..n)
        .map(|_| {
            [
                2.0 * rng.random::<f64>() - 1.0,
                2.0 * rng.random::<f64>() - 1.0,
            ]
        })
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Evolves a base run and a perturbed run in lockstep and records the sup
/// over time of their differences.
pub fn stability_experiment(
    spec: &StabilitySpec,
    s: f64,
    delta: f64,
    mode: PerturbationMode,
) -> Result<StabilityReport> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(VpError::invalid("delta", format!("{delta} (must be >= 0)")));
    }
    if delta >= s {
        return Err(VpError::PerturbationTooLarge { delta, width: s });
    }
    if !(spec.t_end > 0.0) {
        return Err(VpError::invalid(
            "T",
            format!("{} (must be > 0)", spec.t_end),
        ));
    }
    let n = spec.n_particles(s);
    let base_ens = regularize(&spec.datum, s, n, spec.seed)?;
    let dirs = directions(spec.seed, base_ens.len());
    let mut pert_ens = base_ens.clone();
    if mode == PerturbationMode::Data {
        for (p, d) in pert_ens.particles.iter_mut().zip(&dirs) {
            p.r += delta * d[0];
            p.vr += delta * d[1];
            if p.r < 0.0 {
                p.r = -p.r;
                p.vr = -p.vr;
            }
        }
    }
    let opts = SimOptions::default();
    let mut base = SimState::new(&base_ens, opts)?;
    let mut pert = SimState::new(&pert_ens, opts)?;
    let grid = spec.grid.grid()?;
    let dt = dt_rule(spec.eta, s);
    let steps = (spec.t_end / dt).round().max(1.0) as usize;
    let every = spec.sample_every.max(1);

    let (mut d_z, mut d_rho, mut d_force) = (0.0f64, 0.0f64, 0.0f64);
    let mut history = Vec::new();
    let measure = |a: &SimState, b: &SimState| {
        let pa: Vec<Particle> = a.particles();
        let pb: Vec<Particle> = b.particles();
        let dz = pa
            .iter()
            .zip(&pb)
            .map(|(x, y)| (x.r - y.r).abs().max((x.vr - y.vr).abs()))
            .fold(0.0, f64::max);
        let (rho_a, f_a) = cic_profiles(&pa, &grid, a.gamma);
        let (rho_b, f_b) = cic_profiles(&pb, &grid, b.gamma);
        (dz, sup_diff(&rho_a, &rho_b), sup_diff(&f_a, &f_b))
    };
    for k in 0..=steps {
        if k > 0 {
            base.step(dt)?;
            pert.step(dt)?;
            if mode == PerturbationMode::Forcing {
                pert.force_velocities(dt, |id| delta * dirs[id][1]);
            }
        }
        if k % every == 0 || k == steps {
            let (a, b, c) = measure(&base, &pert);
            d_z = d_z.max(a);
            d_rho = d_rho.max(b);
            d_force = d_force.max(c);
            history.push((base.time, d_z));
        }
    }
    let amp = |d: f64| if delta > 0.0 { d / delta } else { 0.0 };
    Ok(StabilityReport {
        s,
        delta,
        mode,
        d_z,
        d_rho,
        d_force,
        amplification: amp(d_z),
        amplification_rho: amp(d_rho),
        amplification_force: amp(d_force),
        history,
        n_particles: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearResponse {
    pub full: StabilityReport,
    pub half: StabilityReport,
    /// Half-delta over full-delta differences for `d_z`, `d_rho`, `d_force`.
    pub ratios: [f64; 3],
    /// Every ratio within 20% of one half.
    pub pass: bool,
}

/// Runs the experiment at `delta` and `delta / 2`.
pub fn linear_response(
    spec: &StabilitySpec,
    s: f64,
    delta: f64,
    mode: PerturbationMode,
) -> Result<LinearResponse> {
    let full = stability_experiment(spec, s, delta, mode)?;
    let half = stability_experiment(spec, s, 0.5 * delta, mode)?;
    let ratios = [
        half.d_z / full.d_z,
        half.d_rho / full.d_rho,
        half.d_force / full.d_force,
    ];
    let pass = ratios.iter().all(|r| (r - 0.5).abs() <= 0.1);
    Ok(LinearResponse {
        full,
        half,
        ratios,
        pass,
    })
}

/// Envelope `amplification <= exp(A s^(-4/3) exp(B s^(-2)))` over a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallFit {
    pub a: f64,
    pub b: f64,
    /// Of the regression of `ln ln amp - ln s^(-4/3)` on `s^(-2)`.
    pub r2: f64,
    /// Widths with amplification above one (the others satisfy any envelope).
    pub points_used: usize,
    /// Every report lies under the envelope.
    pub bounded: bool,
}

impl GronwallFit {
    pub fn envelope(&self, s: f64) -> f64 {
        (self.a * s.powf(-4.0 / 3.0) * (self.b * s.powi(-2)).exp()).exp()
    }
}

/// Least-squares fit of `ln ln amp = ln A + (4/3) ln(1/s) + B s^(-2)`, with
/// `ln A` then raised by the largest residual so the law is an upper envelope.
pub fn fit_gronwall_law(reports: &[StabilityReport]) -> GronwallFit {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.amplification > 1.0 && r.amplification.is_finite())
        .map(|r| {
            (
                r.s.powi(-2),
                r.amplification.ln().ln() - (-4.0 / 3.0) * r.s.ln(),
            )
        })
        .collect();
    let (b, ln_a, r2) = match pts.len() {
        0 => (0.0, f64::NEG_INFINITY, 1.0),
        1 => (0.0, pts[0].1, 1.0),
        _ => {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let (b, ln_a, r2) = linear_fit(&xs, &ys);
            let lift = pts
                .iter()
                .map(|(x, y)| y - ln_a - b * x)
                .fold(0.0, f64::max);
            (b, ln_a + lift, r2)
        }
    };
    let mut fit = GronwallFit {
        a: ln_a.exp(),
        b,
        r2,
        points_used: pts.len(),
        bounded: false,
    };
    fit.bounded = fit.a.is_finite()
        && fit.b.is_finite()
        && reports
            .iter()
            .all(|r| r.amplification <= fit.envelope(r.s) * (1.0 + 1e-9));
    fit
}

pub fn write_stability_csv<W: Write>(reports: &[StabilityReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "delta", "dZ", "drho", "dforce", "amplification"])?;
    for r in reports {
        w.write_record([
            r.s.to_string(),
            r.delta.to_string(),
            r.d_z.to_string(),
            r.d_rho.to_string(),
            r.d_force.to_string(),
            r.amplification.to_string(),
        ])?;
    }
    w.flush().map_err(|e| VpError::io("<csv>", e))?;
    Ok(())
}
