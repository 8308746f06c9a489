//! Kick-drift-kick integration of the reduced characteristic system
//! `r' = vr, vr' = -gamma M(r)/r^2 + L^2/r^3` with a 2x2 tangent per particle.
//!
//! The split is field against free motion: kicks apply `-gamma M(r)/r^2`, and
//! the drift moves each particle exactly along its straight 3D line, which
//! carries the centrifugal term. For `L = 0` the drift is the reflection rule.

mod metrics;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpError};
use crate::scales::{Particle, ParticleEnsemble};

pub use metrics::{
    dt_rule, integrate, observables, IntegrateOptions, MetricsRow, Observables, RunMetrics,
};

/// 2x2 matrix stored row-major: `[dr/dr0, dr/dv0, dv/dr0, dv/dv0]`.
pub type Tangent = [f64; 4];

const IDENTITY: Tangent = [1.0, 0.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Fixed point mass at the origin (external field).
    pub central_mass: f64,
    pub track_tangent: bool,
    /// Half-width of the finite-difference stencil for `d a / d r`.
    pub h_fd: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            central_mass: 0.0,
            track_tangent: false,
            h_fd: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Body {
    r: f64,
    vr: f64,
    l: f64,
    m: f64,
    id: usize,
    /// Field part of the acceleration.
    acc: f64,
    dacc: f64,
    tangent: Tangent,
    tangent_valid: bool,
}

#[derive(Debug, Clone)]
pub struct SimState {
    /// Bodies kept sorted by `(r, id)`.
    bodies: Vec<Body>,
    pub time: f64,
    pub gamma: f64,
    pub options: SimOptions,
    /// Running sup of the speed.
    pub p_sup: f64,
    /// Running sup of the radius.
    pub q_sup: f64,
    pub width: f64,
    pub total_mass: f64,
    prefix: Vec<f64>,
    keys: Vec<(u64, usize, usize)>,
    scratch: Vec<Body>,
}

fn speed(r: f64, vr: f64, l: f64) -> f64 {
    if l == 0.0 {
        vr.abs()
    } else {
        let vt = l / r;
        (vr * vr + vt * vt).sqrt()
    }
}

/// Exact free motion over `dt` for `L > 0`: the particle sits at
/// `x = r + vr t` along its line and `y = L t / r` across it. The tangent is
/// multiplied by the Jacobian of this map at fixed `L`.
fn free_drift(b: &mut Body, dt: f64) {
    let (r0, v0, l) = (b.r, b.vr, b.l);
    let x = r0 + v0 * dt;
    let y = l * dt / r0;
    let r = x.hypot(y);
    // r0 vr + |v|^2 t, written without cancellation against r0^2
    let num = r0 * v0 + v0 * v0 * dt + l * y / r0;
    let vr = num / r;
    if b.tangent_valid {
        let dr_dr0 = (x - y * l * dt / (r0 * r0)) / r;
        let dr_dv0 = x * dt / r;
        let dn_dr0 = v0 - 2.0 * l * y / (r0 * r0);
        let dn_dv0 = r0 + 2.0 * v0 * dt;
        let j = [
            dr_dr0,
            dr_dv0,
            (dn_dr0 - vr * dr_dr0) / r,
            (dn_dv0 - vr * dr_dv0) / r,
        ];
        let t = b.tangent;
        b.tangent = [
            j[0] * t[0] + j[1] * t[2],
            j[0] * t[1] + j[1] * t[3],
            j[2] * t[0] + j[3] * t[2],
            j[2] * t[1] + j[3] * t[3],
        ];
    }
    b.r = r;
    b.vr = vr;
}

/// Largest singular value of a 2x2 matrix.
pub fn operator_norm(t: &Tangent) -> f64 {
    let fro2 = t.iter().map(|x| x * x).sum::<f64>();
    let det = t[0] * t[3] - t[1] * t[2];
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0);
    (0.5 * (fro2 + disc.sqrt())).sqrt()
}

impl SimState {
    pub fn new(ensemble: &ParticleEnsemble, options: SimOptions) -> Result<Self> {
        if ensemble.is_empty() {
            return Err(VpError::invalid("ensemble", "no particles"));
        }
        if options.track_tangent && !(options.h_fd > 0.0) {
            return Err(VpError::invalid(
                "h_fd",
                format!("{} (must be > 0)", options.h_fd),
            ));
        }
        let bodies = ensemble
            .particles
            .iter()
            .enumerate()
            .map(|(id, p)| Body {
                r: p.r,
                vr: p.vr,
                l: p.l,
                m: p.m,
                id,
                acc: 0.0,
                dacc: 0.0,
                tangent: IDENTITY,
                tangent_valid: options.track_tangent,
            })
            .collect();
        let mut state = SimState {
            bodies,
            time: 0.0,
            gamma: ensemble.gamma,
            options,
            p_sup: 0.0,
            q_sup: 0.0,
            width: ensemble.width,
            total_mass: ensemble.total_mass,
            prefix: Vec::new(),
            keys: Vec::new(),
            scratch: Vec::new(),
        };
        state.sort();
        state.compute_forces()?;
        state.update_sups();
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    fn sort(&mut self) {
        // radii are nonnegative, so their bit patterns order like the values
        let key = |b: &Body| (b.r.to_bits(), b.id);
        if self.bodies.is_sorted_by_key(key) {
            return;
        }
        let mut keys = std::mem::take(&mut self.keys);
        keys.clear();
        keys.extend(
            self.bodies
                .iter()
                .enumerate()
                .map(|(slot, b)| (b.r.to_bits(), b.id, slot)),
        );
        keys.sort_unstable();
        let mut sorted = std::mem::take(&mut self.scratch);
        sorted.clear();
        sorted.extend(keys.iter().map(|k| self.bodies[k.2]));
        self.scratch = std::mem::replace(&mut self.bodies, sorted);
        self.keys = keys;
    }

    fn update_sups(&mut self) {
        for b in &self.bodies {
            self.p_sup = self.p_sup.max(speed(b.r, b.vr, b.l));
            self.q_sup = self.q_sup.max(b.r);
        }
    }

    /// Accelerations (and their radial derivatives when tracking the tangent)
    /// at the current sorted positions.
    fn compute_forces(&mut self) -> Result<()> {
        let n = self.bodies.len();
        let gamma = self.gamma;
        let mc = self.options.central_mass;
        self.prefix.clear();
        self.prefix.reserve(n + 1);
        let mut acc = 0.0;
        self.prefix.push(0.0);
        for b in &self.bodies {
            acc += b.m;
            self.prefix.push(acc);
        }
        for (i, b) in self.bodies.iter_mut().enumerate() {
            if b.r == 0.0 {
                if b.l > 0.0 {
                    return Err(VpError::CentrifugalSingularity {
                        index: b.id,
                        l: b.l,
                    });
                }
                b.acc = 0.0;
                continue;
            }
            let enclosed = self.prefix[i] + 0.5 * b.m + mc;
            b.acc = -gamma * enclosed / (b.r * b.r);
        }
        if self.options.track_tangent {
            self.compute_field_derivative();
        }
        Ok(())
    }

    /// Centered difference of the field `-gamma M(r)/r^2`. Two pointers sweep
    /// the sorted radii, so the cost is linear.
    fn compute_field_derivative(&mut self) {
        let h = self.options.h_fd;
        let gamma = self.gamma;
        let mc = self.options.central_mass;
        let n = self.bodies.len();
        let (mut lo, mut hi) = (0usize, 0usize);
        for i in 0..n {
            let r = self.bodies[i].r;
            if !self.bodies[i].tangent_valid || r < h {
                self.bodies[i].tangent_valid = false;
                continue;
            }
            let (xm, xp) = (r - h, r + h);
            while lo < n && self.bodies[lo].r < xm {
                lo += 1;
            }
            while hi < n && self.bodies[hi].r < xp {
                hi += 1;
            }
            let b = &mut self.bodies[i];
            let gm = -gamma * (self.prefix[lo] + mc) / (xm * xm);
            let gp = -gamma * (self.prefix[hi] + mc) / (xp * xp);
            b.dacc = (gp - gm) / (2.0 * h);
        }
    }

    fn kick(&mut self, half_dt: f64) {
        for b in &mut self.bodies {
            b.vr += half_dt * b.acc;
            if b.tangent_valid {
                let t = &mut b.tangent;
                t[2] += half_dt * b.dacc * t[0];
                t[3] += half_dt * b.dacc * t[1];
            }
        }
    }

    /// One kick-drift-kick step. Radial particles crossing the center are
    /// reflected, which multiplies their tangent by `-I`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(VpError::invalid("dt", format!("{dt} (must be > 0)")));
        }
        self.kick(0.5 * dt);
        for b in &mut self.bodies {
            if b.l == 0.0 {
                b.r += dt * b.vr;
                if b.tangent_valid {
                    let t = &mut b.tangent;
                    t[0] += dt * t[2];
                    t[1] += dt * t[3];
                }
                if b.r < 0.0 {
                    b.r = -b.r;
                    b.vr = -b.vr;
                    for x in &mut b.tangent {
                        *x = -*x;
                    }
                }
            } else {
                free_drift(b, dt);
            }
        }
        self.sort();
        self.compute_forces()?;
        self.kick(0.5 * dt);
        self.time += dt;
        for b in &self.bodies {
            if !(b.r.is_finite() && b.vr.is_finite()) {
                return Err(VpError::NonFinite {
                    time: self.time,
                    index: b.id,
                    r: b.r,
                    vr: b.vr,
                });
            }
        }
        self.update_sups();
        Ok(())
    }

    /// Flips every radial velocity, for time-reversal checks.
    pub fn reverse_velocities(&mut self) {
        for b in &mut self.bodies {
            b.vr = -b.vr;
        }
    }

    /// Adds `delta(id) * dt` to each radial velocity, the forcing-mode
    /// perturbation of the stability experiments.
    pub fn force_velocities(&mut self, dt: f64, delta: impl Fn(usize) -> f64) {
        for b in &mut self.bodies {
            b.vr += dt * delta(b.id);
        }
    }

    /// Particles in input order.
    pub fn particles(&self) -> Vec<Particle> {
        let mut out = vec![
            Particle {
                r: 0.0,
                vr: 0.0,
                l: 0.0,
                m: 0.0
            };
            self.bodies.len()
        ];
        for b in &self.bodies {
            out[b.id] = Particle {
                r: b.r,
                vr: b.vr,
                l: b.l,
                m: b.m,
            };
        }
        out
    }

    /// Particles sorted by radius.
    pub fn sorted_particles(&self) -> impl Iterator<Item = Particle> + '_ {
        self.bodies.iter().map(|b| Particle {
            r: b.r,
            vr: b.vr,
            l: b.l,
            m: b.m,
        })
    }

    pub fn ensemble(&self) -> ParticleEnsemble {
        let mut e = ParticleEnsemble::from_particles(self.particles(), self.gamma);
        e.width = self.width;
        e.total_mass = self.total_mass;
        e
    }

    /// Current accelerations in input order, centrifugal term included.
    pub fn accelerations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.bodies.len()];
        for b in &self.bodies {
            out[b.id] = if b.r > 0.0 {
                b.acc + b.l * b.l / (b.r * b.r * b.r)
            } else {
                b.acc
            };
        }
        out
    }

    /// Tangent matrices in input order; `None` where the tangent was invalidated.
    pub fn tangents(&self) -> Result<Vec<Option<Tangent>>> {
        if !self.options.track_tangent {
            return Err(VpError::TangentDisabled);
        }
        let mut out = vec![None; self.bodies.len()];
        for b in &self.bodies {
            out[b.id] = b.tangent_valid.then_some(b.tangent);
        }
        Ok(out)
    }

    /// Max operator norm over valid tangents, NaN when tracking is off.
    pub fn sup_tangent_norm(&self) -> f64 {
        if !self.options.track_tangent {
            return f64::NAN;
        }
        self.bodies
            .iter()
            .filter(|b| b.tangent_valid)
            .map(|b| operator_norm(&b.tangent))
            .fold(0.0, f64::max)
    }

    pub fn invalid_tangent_fraction(&self) -> f64 {
        if !self.options.track_tangent {
            return 0.0;
        }
        let bad = self.bodies.iter().filter(|b| !b.tangent_valid).count();
        bad as f64 / self.bodies.len() as f64
    }

    /// Total mass summed in sorted order.
    pub fn mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.m).sum()
    }

    /// `sum m (vr^2 + L^2/r^2)/2 - gamma sum m_i M_i / r_i`, with `M_i` the
    /// half-self enclosed mass plus the central mass.
    pub fn energy(&self) -> f64 {
        let mc = self.options.central_mass;
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        for (i, b) in self.bodies.iter().enumerate() {
            kinetic += 0.5 * b.m * b.vr * b.vr;
            if b.r > 0.0 {
                let vt = b.l / b.r;
                kinetic += 0.5 * b.m * vt * vt;
                potential -= self.gamma * b.m * (self.prefix[i] + 0.5 * b.m + mc) / b.r;
            }
        }
        kinetic + potential
    }
}

/// Accelerations of an ensemble in input order, half-self convention.
pub fn accelerate(ensemble: &ParticleEnsemble, central_mass: f64) -> Result<Vec<f64>> {
    let state = SimState::new(
        ensemble,
        SimOptions {
            central_mass,
            ..SimOptions::default()
        },
    )?;
    Ok(state.accelerations())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble(ps: &[(f64, f64, f64, f64)], gamma: f64) -> ParticleEnsemble {
        ParticleEnsemble::from_particles(
            ps.iter()
                .map(|&(r, vr, l, m)| Particle { r, vr, l, m })
                .collect(),
            gamma,
        )
    }

    #[test]
    fn two_shell_accelerations() {
        let e = ensemble(&[(1.0, 0.0, 0.0, 0.5), (0.5, 0.0, 0.0, 0.5)], 1.0);
        let a = accelerate(&e, 0.0).unwrap();
        assert_eq!(a[1], -1.0);
        assert_eq!(a[0], -0.75);
    }

    #[test]
    fn pure_centrifugal() {
        let e = ensemble(&[(2.0, 0.0, 1.5, 1.0)], 0.0);
        assert_eq!(accelerate(&e, 0.0).unwrap()[0], 1.5 * 1.5 / 8.0);
    }

    #[test]
    fn centrifugal_singularity_is_an_error() {
        let e = ensemble(&[(0.0, 0.0, 1.0, 1.0)], 1.0);
        assert!(matches!(
            accelerate(&e, 0.0),
            Err(VpError::CentrifugalSingularity { .. })
        ));
    }

    #[test]
    fn reflection_through_center() {
        let e = ensemble(&[(0.05, -1.0, 0.0, 1.0)], 0.0);
        let mut s = SimState::new(&e, SimOptions::default()).unwrap();
        s.step(0.1).unwrap();
        let p = s.particles()[0];
        assert!((p.r - 0.05).abs() < 1e-15);
        assert_eq!(p.vr, 1.0);
    }

    #[test]
    fn operator_norm_of_shear() {
        let t = [1.0, 2.0, 0.0, 1.0];
        // singular values of [[1,2],[0,1]] are sqrt(2) +- 1
        assert!((operator_norm(&t) - (2f64.sqrt() + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_dt() {
        let e = ensemble(&[(1.0, 0.0, 0.0, 1.0)], 1.0);
        let mut s = SimState::new(&e, SimOptions::default()).unwrap();
        assert!(s.step(0.0).is_err());
    }
}
