use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VpError};
use crate::numerics::CompositeRule;

/// `int_{[-1/2, 1/2]^3} 1/|x| dx`.
const SELF_CELL: f64 = 2.380_077_363_979_553;

/// A density on R^3 with (optionally) declared compact support.
pub trait SpatialDensity: Sync {
    fn value(&self, x: [f64; 3]) -> f64;

    fn center(&self) -> [f64; 3] {
        [0.0; 3]
    }

    /// Radius of a ball around [`Self::center`] that contains the support.
    fn support_radius(&self) -> Option<f64>;

    /// Value as a function of the distance to the center, for radial densities.
    fn radial_value(&self, _r: f64) -> Option<f64> {
        None
    }

    /// Radii where the radial profile is not smooth.
    fn radial_breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Radially symmetric density given by its profile.
pub struct RadialDensity<F> {
    profile: F,
    support: Option<f64>,
    center: [f64; 3],
    breakpoints: Vec<f64>,
}

impl<F: Fn(f64) -> f64 + Sync> RadialDensity<F> {
    pub fn new(profile: F, support: Option<f64>) -> Self {
        RadialDensity {
            profile,
            support,
            center: [0.0; 3],
            breakpoints: support.into_iter().collect(),
        }
    }

    pub fn centered_at(mut self, center: [f64; 3]) -> Self {
        self.center = center;
        self
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl<F: Fn(f64) -> f64 + Sync> SpatialDensity for RadialDensity<F> {
    fn value(&self, x: [f64; 3]) -> f64 {
        (self.profile)(dist(x, self.center))
    }

    fn center(&self) -> [f64; 3] {
        self.center
    }

    fn support_radius(&self) -> Option<f64> {
        self.support
    }

    fn radial_value(&self, r: f64) -> Option<f64> {
        Some((self.profile)(r))
    }

    fn radial_breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// Union of small uniform balls ("blobs") of common radius, one per sample
/// point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobCloud {
    pub points: Vec<[f64; 3]>,
    pub masses: Vec<f64>,
    pub blob_radius: f64,
}

impl BlobCloud {
    pub fn translated(&self, shift: [f64; 3]) -> BlobCloud {
        BlobCloud {
            points: self
                .points
                .iter()
                .map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]])
                .collect(),
            masses: self.masses.clone(),
            blob_radius: self.blob_radius,
        }
    }
}

impl SpatialDensity for BlobCloud {
    fn value(&self, x: [f64; 3]) -> f64 {
        let a = self.blob_radius;
        let rho = 3.0 / (4.0 * std::f64::consts::PI * a * a * a);
        self.points
            .iter()
            .zip(&self.masses)
            .filter(|(p, _)| dist(**p, x) < a)
            .map(|(_, m)| m * rho)
            .sum()
    }

    fn center(&self) -> [f64; 3] {
        let n = self.points.len().max(1) as f64;
        let mut c = [0.0; 3];
        for p in &self.points {
            for a in 0..3 {
                c[a] += p[a] / n;
            }
        }
        c
    }

    fn support_radius(&self) -> Option<f64> {
        let c = self.center();
        Some(self.points.iter().map(|p| dist(*p, c)).fold(0.0, f64::max) + self.blob_radius)
    }
}

/// Potential `u = -gamma int rho(y) / |x - y| dy` by midpoint quadrature on a
/// cubic lattice that has the evaluation point at a cell center.
///
/// The cell containing the evaluation point uses the exact integral of
/// `1/|x|` over a cube. Cells where the density is not constant at the
/// corners are averaged over `subsamples^3` points so that jumps in the
/// density enter with their volume fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionSolver {
    pub spacing: f64,
    pub subsamples: usize,
}

impl ConvolutionSolver {
    pub fn new(spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(VpError::invalid(
                "spacing",
                format!("{spacing} (must be > 0)"),
            ));
        }
        Ok(ConvolutionSolver {
            spacing,
            subsamples: 4,
        })
    }

    fn cell_average<D: SpatialDensity + ?Sized>(&self, density: &D, y: [f64; 3]) -> f64 {
        let h = self.spacing;
        let v0 = density.value(y);
        let mut uniform = true;
        'corners: for dx in [-0.5, 0.5] {
            for dy in [-0.5, 0.5] {
                for dz in [-0.5, 0.5] {
                    if density.value([y[0] + dx * h, y[1] + dy * h, y[2] + dz * h]) != v0 {
                        uniform = false;
                        break 'corners;
                    }
                }
            }
        }
        if uniform {
            return v0;
        }
        let m = self.subsamples.max(1);
        let step = h / m as f64;
        let offset = |i: usize| -0.5 * h + (i as f64 + 0.5) * step;
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    acc += density.value([y[0] + offset(i), y[1] + offset(j), y[2] + offset(k)]);
                }
            }
        }
        acc / (m * m * m) as f64
    }

    fn potential_at<D: SpatialDensity + ?Sized>(
        &self,
        density: &D,
        support: f64,
        x: [f64; 3],
    ) -> f64 {
        let h = self.spacing;
        let c = density.center();
        let reach = support + h * 3f64.sqrt();
        let range = |a: usize| -> (i64, i64) {
            let lo = ((c[a] - reach - x[a]) / h).floor() as i64;
            let hi = ((c[a] + reach - x[a]) / h).ceil() as i64;
            (lo, hi)
        };
        let (rx, ry, rz) = (range(0), range(1), range(2));
        let slabs: Vec<f64> = (rx.0..=rx.1)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in ry.0..=ry.1 {
                    for k in rz.0..=rz.1 {
                        let y = [
                            x[0] + i as f64 * h,
                            x[1] + j as f64 * h,
                            x[2] + k as f64 * h,
                        ];
                        if dist(y, c) > reach {
                            continue;
                        }
                        let rho = self.cell_average(density, y);
                        if rho == 0.0 {
                            continue;
                        }
                        if i == 0 && j == 0 && k == 0 {
                            acc += rho * h * h * SELF_CELL;
                        } else {
                            let d = ((i * i + j * j + k * k) as f64).sqrt() * h;
                            acc += rho * h * h * h / d;
                        }
                    }
                }
                acc
            })
            .collect();
        slabs.iter().sum()
    }

    pub fn solve<D: SpatialDensity + ?Sized>(
        &self,
        density: &D,
        gamma: f64,
        points: &[[f64; 3]],
    ) -> Result<Vec<f64>> {
        let support = density.support_radius().ok_or(VpError::UndeclaredSupport)?;
        Ok(points
            .iter()
            .map(|&x| -gamma * self.potential_at(density, support, x))
            .collect())
    }
}

/// Radial quadrature of `u(r) = -gamma (M(r)/r + 4 pi int_r^R s rho(s) ds)`.
pub fn radial_potential(
    profile: impl Fn(f64) -> f64,
    support: f64,
    breakpoints: &[f64],
    gamma: f64,
    radii: &[f64],
) -> Vec<f64> {
    let rule = CompositeRule::new(10, 64);
    let four_pi = 4.0 * std::f64::consts::PI;
    radii
        .iter()
        .map(|&r| {
            let inner = if r > 0.0 {
                let m = four_pi
                    * rule.integrate_piecewise(0.0, r.min(support), breakpoints, |s| {
                        s * s * profile(s)
                    });
                m / r
            } else {
                0.0
            };
            let outer = four_pi
                * rule
                    .integrate_piecewise(r.min(support), support, breakpoints, |s| s * profile(s));
            -gamma * (inner + outer)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub radii: Vec<f64>,
    /// Radial quadrature path; absent for non-radial densities.
    pub radial: Option<Vec<f64>>,
    pub convolution: Vec<f64>,
}

impl DualSolution {
    /// Largest pointwise difference between the two paths, if both ran.
    pub fn max_disagreement(&self) -> Option<f64> {
        self.radial.as_ref().map(|rad| {
            rad.iter()
                .zip(&self.convolution)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }
}

/// Potential vanishing at infinity along the ray `center + r e_x`, computed by
/// radial quadrature (radial densities only) and by 3D convolution.
pub fn solve_vanishing_at_infinity<D: SpatialDensity + ?Sized>(
    density: &D,
    gamma: f64,
    radii: &[f64],
    solver: &ConvolutionSolver,
) -> Result<DualSolution> {
    let support = density.support_radius().ok_or(VpError::UndeclaredSupport)?;
    let c = density.center();
    let points: Vec<[f64; 3]> = radii.iter().map(|&r| [c[0] + r, c[1], c[2]]).collect();
    let convolution = solver.solve(density, gamma, &points)?;
    let radial = density.radial_value(0.0).map(|_| {
        radial_potential(
            |r| density.radial_value(r).unwrap_or(0.0),
            support,
            &density.radial_breakpoints(),
            gamma,
            radii,
        )
    });
    Ok(DualSolution {
        radii: radii.to_vec(),
        radial,
        convolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_path_on_uniform_ball() {
        let rho = 3.0 / (4.0 * std::f64::consts::PI);
        let u = radial_potential(
            |r| if r < 1.0 { rho } else { 0.0 },
            1.0,
            &[1.0],
            1.0,
            &[0.0, 0.5, 1.0, 2.0],
        );
        let want = [-1.5, -11.0 / 8.0, -1.0, -0.5];
        for (a, b) in u.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn undeclared_support_is_rejected() {
        let d = RadialDensity::new(|_| 1.0, None);
        let s = ConvolutionSolver::new(0.1).unwrap();
        assert!(matches!(
            s.solve(&d, 1.0, &[[0.0; 3]]),
            Err(VpError::UndeclaredSupport)
        ));
    }

    #[test]
    fn self_cell_of_a_uniform_cube() {
        // a cube of side h holding unit density, evaluated at its center
        struct Cube(f64);
        impl SpatialDensity for Cube {
            fn value(&self, x: [f64; 3]) -> f64 {
                if x.iter().all(|c| c.abs() < 0.5 * self.0) {
                    1.0
                } else {
                    0.0
                }
            }
            fn support_radius(&self) -> Option<f64> {
                Some(self.0)
            }
        }
        let h = 0.3;
        let s = ConvolutionSolver::new(h).unwrap();
        let u = s.solve(&Cube(h), 1.0, &[[0.0; 3]]).unwrap();
        assert!((u[0] + h * h * SELF_CELL).abs() < 1e-12);
    }
}
