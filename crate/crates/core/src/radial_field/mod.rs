//! Radial Poisson field of a particle ensemble: enclosed mass, force,
//! density and the potential vanishing at infinity.

mod convolution;
mod vanishing;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpError};
use crate::scales::{Particle, ParticleEnsemble};

pub use convolution::{
    radial_potential, solve_vanishing_at_infinity, BlobCloud, ConvolutionSolver, DualSolution,
    RadialDensity, SpatialDensity,
};
pub use vanishing::{check_vanishing_conditions, VanishingCheck, VanishingRepresentative};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(VpError::invalid("grid", "needs at least two nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(VpError::invalid(
                "grid",
                format!("first node {} is not 0", nodes[0]),
            ));
        }
        if let Some(w) = nodes
            .windows(2)
            .find(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(VpError::invalid(
                "grid",
                format!("nodes not strictly increasing at {} -> {}", w[0], w[1]),
            ));
        }
        Ok(RadialGrid { nodes })
    }

    /// `bins` equal bins on `[0, r_max]`.
    pub fn uniform(r_max: f64, bins: usize) -> Result<Self> {
        if !(r_max > 0.0) || bins == 0 {
            return Err(VpError::invalid(
                "grid",
                format!("r_max {r_max}, bins {bins}"),
            ));
        }
        let h = r_max / bins as f64;
        let mut nodes: Vec<f64> = (0..bins).map(|j| j as f64 * h).collect();
        nodes.push(r_max);
        Self::new(nodes)
    }

    /// Uniform bins of width `bin` covering `[0, r_max]`.
    pub fn with_spacing(r_max: f64, bin: f64) -> Result<Self> {
        if !(bin > 0.0) {
            return Err(VpError::invalid("bin", format!("{bin} (must be > 0)")));
        }
        let bins = (r_max / bin).ceil().max(1.0) as usize;
        let nodes: Vec<f64> = (0..=bins).map(|j| j as f64 * bin).collect();
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn bins(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Bin `j` with `r_j <= r < r_{j+1}`; the outer edge belongs to the last bin.
    pub fn bin_of(&self, r: f64) -> Option<usize> {
        if r < 0.0 || r > self.r_max() {
            return None;
        }
        let k = self.nodes.partition_point(|&x| x <= r);
        Some((k - 1).min(self.bins() - 1))
    }

    /// Continues past the last node with bins growing by 5% each, until
    /// `r_max` is covered. Ejected particles can sit far out; a geometric tail
    /// keeps the node count logarithmic in the distance.
    pub fn extended_to(&self, r_max: f64) -> RadialGrid {
        let mut nodes = self.nodes.clone();
        let mut h = nodes[nodes.len() - 1] - nodes[nodes.len() - 2];
        while *nodes.last().unwrap() < r_max {
            h *= 1.05;
            let last = *nodes.last().unwrap();
            nodes.push(last + h);
        }
        RadialGrid { nodes }
    }
}

/// Enclosed mass `M(r_j) = sum { m_i : r_i < r_j }` at every node.
pub fn mass_profile(ensemble: &ParticleEnsemble, grid: &RadialGrid) -> Vec<f64> {
    mass_profile_sorted(&sorted_pairs(&ensemble.particles), grid)
}

/// `(r, m)` pairs sorted by radius.
fn sorted_pairs(particles: &[Particle]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = particles.iter().map(|p| (p.r, p.m)).collect();
    if !pairs.is_sorted_by(|a, b| a.0 <= b.0) {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    pairs
}

fn mass_profile_sorted(pairs: &[(f64, f64)], grid: &RadialGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.nodes.len());
    let mut acc = 0.0;
    let mut k = 0;
    for &r in &grid.nodes {
        while k < pairs.len() && pairs[k].0 < r {
            acc += pairs[k].1;
            k += 1;
        }
        out.push(acc);
    }
    out
}

/// Field `u'(r) = gamma M(r) / r^2`, where a particle exactly at `r`
/// contributes half its mass. Zero at the center.
pub fn force_at(ensemble: &ParticleEnsemble, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let mut inside = 0.0;
    let mut on = 0.0;
    for p in &ensemble.particles {
        if p.r < r {
            inside += p.m;
        } else if p.r == r {
            on += p.m;
        }
    }
    ensemble.gamma * (inside + 0.5 * on) / (r * r)
}

/// Bin densities `(bin mass) / (shell volume)`, reported at the inner node of
/// each bin; the last node carries 0.
pub fn density_estimate(ensemble: &ParticleEnsemble, grid: &RadialGrid) -> Vec<f64> {
    let pairs: Vec<(f64, f64)> = ensemble.particles.iter().map(|p| (p.r, p.m)).collect();
    density_from_pairs(&pairs, grid)
}

fn density_from_pairs(pairs: &[(f64, f64)], grid: &RadialGrid) -> Vec<f64> {
    let mut mass = vec![0.0; grid.bins()];
    for &(r, m) in pairs {
        if let Some(j) = grid.bin_of(r) {
            mass[j] += m;
        }
    }
    let mut out: Vec<f64> = mass
        .iter()
        .enumerate()
        .map(|(j, m)| m / shell_volume(grid.nodes[j], grid.nodes[j + 1]))
        .collect();
    out.push(0.0);
    out
}

fn shell_volume(a: f64, b: f64) -> f64 {
    FOUR_PI / 3.0 * (b * b * b - a * a * a)
}

/// `u(r_j) = -gamma (M(r_j)/r_j + 4 pi int_{r_j}^inf s rho(s) ds)`, exact for
/// the bin-constant density.
pub fn potential_profile(mass: &[f64], density: &[f64], grid: &RadialGrid, gamma: f64) -> Vec<f64> {
    let nodes = &grid.nodes;
    let mut out = vec![0.0; nodes.len()];
    let mut tail = 0.0;
    for j in (0..nodes.len()).rev() {
        if j + 1 < nodes.len() {
            tail += 0.5 * FOUR_PI * density[j] * (nodes[j + 1].powi(2) - nodes[j].powi(2));
        }
        let inner = if nodes[j] > 0.0 {
            mass[j] / nodes[j]
        } else {
            0.0
        };
        out[j] = -gamma * (inner + tail);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub grid: RadialGrid,
    pub gamma: f64,
    pub total_mass: f64,
    pub mass_profile: Vec<f64>,
    pub density: Vec<f64>,
    pub potential: Vec<f64>,
    /// `u'(r_j) = gamma M(r_j) / r_j^2`.
    pub force: Vec<f64>,
    pub sup_force: f64,
    pub sup_density: f64,
    pub sup_potential: f64,
}

impl FieldSnapshot {
    pub fn build(ensemble: &ParticleEnsemble, grid: &RadialGrid) -> Result<Self> {
        let pairs = sorted_pairs(&ensemble.particles);
        Self::from_sorted(&pairs, ensemble.gamma, ensemble.total_mass, grid)
    }

    /// Builds from `(r, m)` pairs already sorted by radius.
    pub(crate) fn from_sorted(
        pairs: &[(f64, f64)],
        gamma: f64,
        total_mass: f64,
        grid: &RadialGrid,
    ) -> Result<Self> {
        let support = pairs.last().map_or(0.0, |p| p.0);
        if support > grid.r_max() {
            return Err(VpError::SupportEscapedGrid {
                support,
                grid_max: grid.r_max(),
            });
        }
        let mass = mass_profile_sorted(pairs, grid);
        let density = density_from_pairs(pairs, grid);
        let potential = potential_profile(&mass, &density, grid, gamma);
        let force: Vec<f64> = grid
            .nodes
            .iter()
            .zip(&mass)
            .map(|(&r, &m)| if r > 0.0 { gamma * m / (r * r) } else { 0.0 })
            .collect();
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        Ok(FieldSnapshot {
            sup_force: sup(&force),
            sup_density: sup(&density),
            sup_potential: sup(&potential),
            grid: grid.clone(),
            gamma,
            total_mass,
            mass_profile: mass,
            density,
            potential,
            force,
        })
    }

    /// `max_j r_j^2 |u'(r_j)| - M`; nonpositive when the pointwise bound holds.
    pub fn pointwise_bound_excess(&self) -> f64 {
        self.grid
            .nodes
            .iter()
            .zip(&self.force)
            .map(|(&r, &f)| r * r * f.abs())
            .fold(f64::NEG_INFINITY, f64::max)
            - self.total_mass
    }

    /// Smallest `C` with `|u'(r)| <= C min(1/r^2, P^2)` on the grid.
    pub fn min_bound_constant(&self, p: f64) -> f64 {
        self.grid
            .nodes
            .iter()
            .zip(&self.force)
            .filter(|(&r, _)| r > 0.0)
            .map(|(&r, &f)| f.abs() / (1.0 / (r * r)).min(p * p))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "M", "rho", "u", "uprime"])?;
        for j in 0..self.grid.nodes.len() {
            w.write_record([
                self.grid.nodes[j].to_string(),
                self.mass_profile[j].to_string(),
                self.density[j].to_string(),
                self.potential[j].to_string(),
                self.force[j].to_string(),
            ])?;
        }
        w.flush().map_err(|e| VpError::io("<csv>", e))?;
        Ok(())
    }
}

/// `sup|u'| / (M^(1/3) sup(rho)^(2/3))`, the dimensionless key-estimate ratio.
pub fn verify_key_estimate(snapshot: &FieldSnapshot) -> Result<f64> {
    if !(snapshot.sup_density > 0.0) {
        return Err(VpError::ZeroDensity);
    }
    Ok(snapshot.sup_force / (snapshot.total_mass.cbrt() * snapshot.sup_density.powf(2.0 / 3.0)))
}

/// Density and force at the grid nodes from cloud-in-cell deposition: each
/// particle's mass is shared linearly between the two nearest nodes, so both
/// outputs depend Lipschitz-continuously on the particle radii.
pub fn cic_profiles(particles: &[Particle], grid: &RadialGrid, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let nodes = &grid.nodes;
    let n = nodes.len();
    let mut node_mass = vec![0.0; n];
    for p in particles {
        let r = p.r.clamp(0.0, grid.r_max());
        let j = grid.bin_of(r).unwrap_or(n - 2);
        let t = (r - nodes[j]) / (nodes[j + 1] - nodes[j]);
        node_mass[j] += (1.0 - t) * p.m;
        node_mass[j + 1] += t * p.m;
    }
    let density: Vec<f64> = (0..n)
        .map(|j| {
            let lo = if j == 0 {
                0.0
            } else {
                0.5 * (nodes[j - 1] + nodes[j])
            };
            let hi = if j + 1 == n {
                nodes[j]
            } else {
                0.5 * (nodes[j] + nodes[j + 1])
            };
            let vol = shell_volume(lo, hi);
            if vol > 0.0 {
                node_mass[j] / vol
            } else {
                0.0
            }
        })
        .collect();
    // enclosed mass with the node mass split evenly around each node
    let mut force = vec![0.0; n];
    let mut acc = 0.0;
    for j in 0..n {
        let enclosed = acc + 0.5 * node_mass[j];
        acc += node_mass[j];
        force[j] = if nodes[j] > 0.0 {
            gamma * enclosed / (nodes[j] * nodes[j])
        } else {
            0.0
        };
    }
    (density, force)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particle(r: f64, m: f64) -> Particle {
        Particle {
            r,
            vr: 0.0,
            l: 0.0,
            m,
        }
    }

    #[test]
    fn grid_rejects_bad_nodes() {
        assert!(RadialGrid::new(vec![0.0]).is_err());
        assert!(RadialGrid::new(vec![0.1, 0.2]).is_err());
        assert!(RadialGrid::new(vec![0.0, 0.2, 0.2]).is_err());
        assert!(RadialGrid::new(vec![0.0, 0.2, 0.1]).is_err());
    }

    #[test]
    fn bin_lookup() {
        let g = RadialGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.bin_of(0.0), Some(0));
        assert_eq!(g.bin_of(0.25), Some(1));
        assert_eq!(g.bin_of(1.0), Some(3));
        assert_eq!(g.bin_of(1.01), None);
    }

    #[test]
    fn single_particle_step() {
        let e = ParticleEnsemble::from_particles(vec![particle(0.5, 1.0)], 1.0);
        let g = RadialGrid::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(mass_profile(&e, &g), vec![0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(force_at(&e, 0.5), 0.5 / 0.25);
        assert_eq!(force_at(&e, 0.0), 0.0);
    }

    #[test]
    fn density_integrates_to_mass() {
        let ps: Vec<Particle> = (0..100).map(|i| particle(i as f64 / 100.0, 0.01)).collect();
        let e = ParticleEnsemble::from_particles(ps, 1.0);
        let g = RadialGrid::uniform(1.0, 7).unwrap();
        let rho = density_estimate(&e, &g);
        let n = g.nodes();
        let total: f64 = (0..g.bins())
            .map(|j| rho[j] * shell_volume(n[j], n[j + 1]))
            .sum();
        assert!((total - e.total_mass).abs() < 1e-12);
        assert_eq!(*rho.last().unwrap(), 0.0);
    }

    #[test]
    fn cic_conserves_mass_and_force_is_continuous() {
        let g = RadialGrid::uniform(2.0, 20).unwrap();
        let a = [particle(0.53, 1.0)];
        let b = [particle(0.53 + 1e-7, 1.0)];
        let (ra, fa) = cic_profiles(&a, &g, 1.0);
        let (rb, fb) = cic_profiles(&b, &g, 1.0);
        let diff = |x: &[f64], y: &[f64]| {
            x.iter()
                .zip(y)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        };
        assert!(diff(&ra, &rb) < 1e-4);
        assert!(diff(&fa, &fb) < 1e-5);
        assert!((fa.last().unwrap() * 4.0 - 1.0).abs() < 1e-12);
    }
}
