use serde::{Deserialize, Serialize};

/// A radial potential sampled on a grid reaching past the claimed source
/// support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingRepresentative {
    /// Strictly increasing sample radii.
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Claimed radius containing the support of the Laplacian.
    pub support_claim: f64,
    /// Mollification width; sources may reach this far past the claim.
    pub width: f64,
    /// Relative tolerance for both conditions.
    pub tolerance: f64,
}

impl VanishingRepresentative {
    pub fn new(radii: Vec<f64>, values: Vec<f64>, support_claim: f64, width: f64) -> Self {
        VanishingRepresentative {
            radii,
            values,
            support_claim,
            width,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VanishingCheck {
    /// `u` decays at least like `C/r` past the claimed support.
    pub cond_i: bool,
    /// The discrete Laplacian vanishes past the claimed support.
    pub cond_ii: bool,
}

/// Checks the two conditions of a solution vanishing at infinity.
///
/// The Laplacian is tested in flux form: with `F = r_j r_{j+1} (u_{j+1} - u_j)
/// / (r_{j+1} - r_j)`, the difference of neighbouring fluxes is the source
/// mass of a cell, and it is exactly zero for `u = -M/r`. Both conditions are
/// relative to the largest flux (condition ii) or the largest `r|u|`
/// (condition i) on the grid.
pub fn check_vanishing_conditions(rep: &VanishingRepresentative) -> VanishingCheck {
    let r = &rep.radii;
    let u = &rep.values;
    let n = r.len().min(u.len());
    let cutoff = rep.support_claim + rep.width;
    if n < 3 || u.iter().any(|v| !v.is_finite()) {
        return VanishingCheck {
            cond_i: false,
            cond_ii: false,
        };
    }

    let outside: Vec<usize> = (0..n).filter(|&j| r[j] > cutoff).collect();
    if outside.len() < 2 {
        return VanishingCheck {
            cond_i: false,
            cond_ii: false,
        };
    }

    // (i): r|u| must not grow over the outer quarter of the samples past the claim
    let weighted: Vec<f64> = (0..n).map(|j| r[j] * u[j].abs()).collect();
    let scale_i = weighted.iter().copied().fold(0.0, f64::max);
    let tail_start = outside.len() - (outside.len() / 4).max(2);
    let tail = &outside[tail_start..];
    let cond_i = tail
        .windows(2)
        .all(|w| weighted[w[1]] <= weighted[w[0]] + rep.tolerance * scale_i);

    // (ii): flux differences vanish on cells entirely past the claim
    let flux: Vec<f64> = (0..n - 1)
        .map(|j| r[j] * r[j + 1] * (u[j + 1] - u[j]) / (r[j + 1] - r[j]))
        .collect();
    let scale_ii = flux.iter().fold(0.0f64, |a, f| a.max(f.abs()));
    let cond_ii = (1..n - 1)
        .filter(|&j| r[j - 1] > cutoff)
        .all(|j| (flux[j] - flux[j - 1]).abs() <= rep.tolerance * scale_ii);

    VanishingCheck { cond_i, cond_ii }
}
