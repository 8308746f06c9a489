use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpError};
use crate::numerics::{CdfTable, CompositeRule};

/// The standard bump `exp(-1 / (1 - t^2))` on (-1, 1), zero outside.
pub fn bump(t: f64) -> f64 {
    let q = 1.0 - t * t;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

/// Derivative of [`bump`].
pub fn bump_derivative(t: f64) -> f64 {
    let q = 1.0 - t * t;
    if q <= 0.0 {
        0.0
    } else {
        bump(t) * (-2.0 * t / (q * q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelDim {
    /// Even kernel on the line.
    One,
    /// Radial kernel on R^3, normalized over the ball.
    Three,
}

impl KernelDim {
    pub fn from_dimension(dimension: u8) -> Result<Self> {
        match dimension {
            1 => Ok(KernelDim::One),
            3 => Ok(KernelDim::Three),
            d => Err(VpError::invalid(
                "dimension",
                format!("{d} (expected 1 or 3)"),
            )),
        }
    }
}

struct UnitKernels {
    /// Integral of the bump over [-1, 1].
    norm1: f64,
    /// Integral of the bump over the unit 3-ball.
    norm3: f64,
    /// sup |bump'| on [-1, 1].
    deriv_peak: f64,
    /// Quantile table of the 1D kernel on [-1, 1].
    cdf1: CdfTable,
    /// Quantile table of |x| for the 3D kernel (density 4 pi t^2 bump(t) on [0, 1]).
    cdf3: CdfTable,
}

fn unit() -> &'static UnitKernels {
    static UNIT: OnceLock<UnitKernels> = OnceLock::new();
    UNIT.get_or_init(|| {
        // The bump is flat to all orders at +-1, so a composite rule converges fast.
        let rule = CompositeRule::new(16, 64);
        let norm1 = rule.integrate(-1.0, 1.0, bump);
        let norm3 = 4.0 * std::f64::consts::PI * rule.integrate(0.0, 1.0, |t| t * t * bump(t));
        let deriv_peak = (1..20_000)
            .map(|i| bump_derivative(i as f64 / 20_000.0).abs())
            .fold(0.0, f64::max);
        UnitKernels {
            norm1,
            norm3,
            deriv_peak,
            cdf1: CdfTable::build(-1.0, 1.0, 8192, bump),
            cdf3: CdfTable::build(0.0, 1.0, 8192, |t| t * t * bump(t)),
        }
    })
}

/// Peak value of the unit-width kernel in the given dimension.
pub fn unit_peak(dim: KernelDim) -> f64 {
    let u = unit();
    match dim {
        KernelDim::One => bump(0.0) / u.norm1,
        KernelDim::Three => bump(0.0) / u.norm3,
    }
}

/// Nonnegative compactly supported mollifier, scaled to a half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierKernel {
    width: f64,
    dim: KernelDim,
}

impl MollifierKernel {
    pub fn new(width: f64, dim: KernelDim) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(VpError::invalid("width", format!("{width} (must be > 0)")));
        }
        Ok(MollifierKernel { width, dim })
    }

    /// The smooth bump normalized to unit integral at the requested width.
    pub fn bump_kernel(width: f64, dimension: u8) -> Result<Self> {
        Self::new(width, KernelDim::from_dimension(dimension)?)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn dim(&self) -> KernelDim {
        self.dim
    }

    fn norm(&self) -> f64 {
        let u = unit();
        match self.dim {
            KernelDim::One => u.norm1 * self.width,
            KernelDim::Three => u.norm3 * self.width.powi(3),
        }
    }

    /// Kernel value at coordinate `x` (1D) or at radius `|x|` (3D).
    pub fn value(&self, x: f64) -> f64 {
        bump(x / self.width) / self.norm()
    }

    pub fn peak(&self) -> f64 {
        bump(0.0) / self.norm()
    }

    /// sup of the first derivative along any direction.
    pub fn derivative_peak(&self) -> f64 {
        unit().deriv_peak / (self.norm() * self.width)
    }

    /// Maps a uniform variate to a kernel-distributed offset: a signed
    /// coordinate in 1D, a radius in [0, width] in 3D.
    pub fn offset_quantile(&self, u: f64) -> f64 {
        let t = match self.dim {
            KernelDim::One => unit().cdf1.quantile(u),
            KernelDim::Three => unit().cdf3.quantile(u),
        };
        t * self.width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_width() {
        assert!(MollifierKernel::bump_kernel(0.0, 1).is_err());
        assert!(MollifierKernel::bump_kernel(-1.0, 3).is_err());
        assert!(MollifierKernel::bump_kernel(1.0, 2).is_err());
    }

    #[test]
    fn compact_support_at_half_width() {
        let k = MollifierKernel::bump_kernel(0.5, 1).unwrap();
        assert_eq!(k.value(0.5), 0.0);
        assert_eq!(k.value(-0.5), 0.0);
        assert_eq!(k.value(0.7), 0.0);
        assert!(k.value(0.49) >= 0.0);
        assert!(k.value(0.0) > 0.0);
    }

    #[test]
    fn peak_scales_with_width() {
        let k1 = MollifierKernel::bump_kernel(1.0, 3).unwrap();
        let k2 = MollifierKernel::bump_kernel(0.5, 3).unwrap();
        assert!((k2.peak() / k1.peak() - 8.0).abs() < 1e-12);
        let l1 = MollifierKernel::bump_kernel(1.0, 1).unwrap();
        let l2 = MollifierKernel::bump_kernel(0.25, 1).unwrap();
        assert!((l2.peak() / l1.peak() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles_stay_in_support() {
        let k = MollifierKernel::bump_kernel(0.3, 1).unwrap();
        assert!((k.offset_quantile(0.5)).abs() < 1e-12);
        assert!(k.offset_quantile(0.0) >= -0.3 && k.offset_quantile(1.0) <= 0.3);
        let k3 = MollifierKernel::bump_kernel(0.3, 3).unwrap();
        assert!(k3.offset_quantile(0.999) <= 0.3);
        assert!(k3.offset_quantile(0.0) >= 0.0);
    }
}
