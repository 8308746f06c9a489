use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SimState;
use crate::error::{Result, VpError};
use crate::radial_field::{verify_key_estimate, FieldSnapshot, RadialGrid};
use crate::scales::{Particle, ParticleEnsemble};

/// `dt = eta * min(s^(2/3), 0.01)`.
pub fn dt_rule(eta: f64, s: f64) -> f64 {
    eta * s.powf(2.0 / 3.0).min(0.01)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub rho_sup: f64,
    pub force_sup: f64,
    pub u_sup: f64,
    pub mass: f64,
    pub energy: f64,
    pub tangent_sup: f64,
}

/// Mass-coordinate observables at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    pub r10: f64,
    pub r50: f64,
    pub r90: f64,
    /// Mean radial velocity in equal-mass bins, innermost first.
    pub vr_profile: Vec<f64>,
}

/// Quantile radii and the equal-mass mean-velocity profile of particles
/// sorted by radius.
pub fn observables(t: f64, sorted: &[Particle], bins: usize) -> Observables {
    let total: f64 = sorted.iter().map(|p| p.m).sum();
    let bins = bins.max(1);
    let mut sum_mv = vec![0.0; bins];
    let mut sum_m = vec![0.0; bins];
    let mut radii = [f64::NAN; 3];
    let targets = [0.1, 0.5, 0.9];
    let mut next = 0;
    let mut acc = 0.0;
    for p in sorted {
        let mid = (acc + 0.5 * p.m) / total;
        let k = ((mid * bins as f64) as usize).min(bins - 1);
        sum_mv[k] += p.m * p.vr;
        sum_m[k] += p.m;
        acc += p.m;
        while next < 3 && acc >= targets[next] * total {
            radii[next] = p.r;
            next += 1;
        }
    }
    Observables {
        t,
        r10: radii[0],
        r50: radii[1],
        r90: radii[2],
        vr_profile: sum_mv
            .iter()
            .zip(&sum_m)
            .map(|(mv, m)| if *m > 0.0 { mv / m } else { f64::NAN })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: usize,
    pub grid: RadialGrid,
    /// Times at which to keep a copy of the ensemble.
    pub capture_times: Vec<f64>,
    /// Equal-mass bins of the velocity profile; 0 disables observables.
    pub observable_bins: usize,
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
    pub observables: Vec<Observables>,
    /// Key-estimate ratio per sample.
    pub key_ratios: Vec<f64>,
    /// `max r^2 |u'| - M` per sample.
    pub pointwise_excess: Vec<f64>,
    /// Smallest `C` in `|u'| <= C min(1/r^2, P^2)` per sample.
    pub min_bound_constants: Vec<f64>,
    pub captures: Vec<(f64, ParticleEnsemble)>,
    pub dt: f64,
    pub width: f64,
    pub n_particles: usize,
    pub grid: RadialGrid,
    pub grid_extended: bool,
    pub invalid_tangent_fraction: f64,
}

impl RunMetrics {
    pub fn last(&self) -> &MetricsRow {
        self.rows.last().expect("at least one sample")
    }

    /// Row with time closest to `t`.
    pub fn row_at(&self, t: f64) -> &MetricsRow {
        self.rows
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("at least one sample")
    }

    pub fn capture_at(&self, t: f64) -> Option<&ParticleEnsemble> {
        self.captures
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|c| &c.1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| VpError::io("<csv>", e))?;
        Ok(())
    }
}

fn sample(
    state: &SimState,
    grid: &mut RadialGrid,
    extended: &mut bool,
) -> Result<(MetricsRow, FieldSnapshot, Vec<Particle>)> {
    let sorted: Vec<Particle> = state.sorted_particles().collect();
    let support = sorted.last().map_or(0.0, |p| p.r);
    if support > grid.r_max() {
        if *extended {
            return Err(VpError::SupportEscapedGrid {
                support,
                grid_max: grid.r_max(),
            });
        }
        *grid = grid.extended_to(1.5 * support);
        *extended = true;
    }
    let pairs: Vec<(f64, f64)> = sorted.iter().map(|p| (p.r, p.m)).collect();
    let snap = FieldSnapshot::from_sorted(&pairs, state.gamma, state.total_mass, grid)?;
    let row = MetricsRow {
        t: state.time,
        p: state.p_sup,
        q: state.q_sup,
        rho_sup: snap.sup_density,
        force_sup: snap.sup_force,
        u_sup: snap.sup_potential,
        mass: state.mass(),
        energy: state.energy(),
        tangent_sup: state.sup_tangent_norm(),
    };
    Ok((row, snap, sorted))
}

/// Advances `state` to `t_end`, sampling diagnostics every `sample_every`
/// steps and at the final step.
pub fn integrate(state: &mut SimState, opts: &IntegrateOptions) -> Result<RunMetrics> {
    if !(opts.t_end > 0.0) {
        return Err(VpError::invalid(
            "T",
            format!("{} (must be > 0)", opts.t_end),
        ));
    }
    if !(opts.dt > 0.0) {
        return Err(VpError::invalid("dt", format!("{} (must be > 0)", opts.dt)));
    }
    let steps = (opts.t_end / opts.dt).round().max(1.0) as usize;
    let every = opts.sample_every.max(1);
    let mut grid = opts.grid.clone();
    let mut extended = false;
    let mut metrics = RunMetrics {
        rows: Vec::new(),
        observables: Vec::new(),
        key_ratios: Vec::new(),
        pointwise_excess: Vec::new(),
        min_bound_constants: Vec::new(),
        captures: Vec::new(),
        dt: opts.dt,
        width: state.width,
        n_particles: state.len(),
        grid: grid.clone(),
        grid_extended: false,
        invalid_tangent_fraction: 0.0,
    };
    let mut captures: Vec<f64> = opts.capture_times.clone();
    captures.sort_by(f64::total_cmp);
    let mut next_capture = 0;

    for k in 0..=steps {
        if k > 0 {
            state.step(opts.dt)?;
        }
        while next_capture < captures.len() && state.time >= captures[next_capture] - 0.5 * opts.dt
        {
            metrics.captures.push((state.time, state.ensemble()));
            next_capture += 1;
        }
        if k % every == 0 || k == steps {
            let (row, snap, sorted) = sample(state, &mut grid, &mut extended)?;
            metrics
                .key_ratios
                .push(verify_key_estimate(&snap).unwrap_or(f64::NAN));
            metrics.pointwise_excess.push(snap.pointwise_bound_excess());
            metrics
                .min_bound_constants
                .push(snap.min_bound_constant(row.p));
            if opts.observable_bins > 0 {
                metrics
                    .observables
                    .push(observables(state.time, &sorted, opts.observable_bins));
            }
            metrics.rows.push(row);
        }
    }
    metrics.grid = grid;
    metrics.grid_extended = extended;
    metrics.invalid_tangent_fraction = state.invalid_tangent_fraction();
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dt_rule_caps_at_the_fixed_step() {
        assert!((dt_rule(0.1, 0.5) - 1e-3).abs() < 1e-18);
        assert!((dt_rule(0.1, 1e-6) - 0.1 * 1e-4).abs() < 1e-15);
    }

    #[test]
    fn quantiles_of_equal_masses() {
        let ps: Vec<Particle> = (1..=10)
            .map(|i| Particle {
                r: i as f64,
                vr: i as f64,
                l: 0.0,
                m: 0.25,
            })
            .collect();
        let o = observables(0.0, &ps, 2);
        assert_eq!(o.r10, 1.0);
        assert_eq!(o.r50, 5.0);
        assert_eq!(o.r90, 9.0);
        assert!((o.vr_profile[0] - 3.0).abs() < 1e-12);
        assert!((o.vr_profile[1] - 8.0).abs() < 1e-12);
    }
}
