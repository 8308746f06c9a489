//! Regularization scales, mollifier kernels and mollified particle data.
//!
//! Everything in [`classify_scale`] is done in the variable
//! `ell = ln|ln eps|`, where all the built-in families have closed forms. A
//! floating-point `eps` would underflow long before the asymptotics show.

pub mod datum;
pub mod kernel;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpError};

pub use datum::{
    construction_constant, datum_norms, regularize, DatumNorms, DatumShape, Particle,
    ParticleEnsemble, RadialProfile, Shell, SingularDatum, VelocityField,
};
pub use kernel::{KernelDim, MollifierKernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScaleFamily {
    /// `sigma = |ln eps|^(-1/p)`.
    PowerOfLog { p: f64 },
    /// `sigma = (ln ln(1/eps))^(-exponent)`; `p` is the class the scale is
    /// meant for.
    IteratedLog { p: f64, exponent: f64 },
    /// `sigma = eps^a`.
    PowerLaw { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub name: String,
    pub family: ScaleFamily,
}

impl Scale {
    pub fn new(name: impl Into<String>, family: ScaleFamily) -> Result<Self> {
        let scale = Scale {
            name: name.into(),
            family,
        };
        scale.validate()?;
        Ok(scale)
    }

    pub fn power_of_log(p: f64) -> Result<Self> {
        Self::new(
            format!("power-of-log(p={p})"),
            ScaleFamily::PowerOfLog { p },
        )
    }

    pub fn iterated_log(p: f64, exponent: f64) -> Result<Self> {
        Self::new(
            format!("iterated-log(p={p},exponent={exponent})"),
            ScaleFamily::IteratedLog { p, exponent },
        )
    }

    pub fn power_law(a: f64) -> Result<Self> {
        Self::new(format!("power-law(a={a})"), ScaleFamily::PowerLaw { a })
    }

    /// The scales shipped with the crate.
    pub fn builtin() -> Vec<Scale> {
        let mut out = Vec::new();
        for p in [1.0, 2.0, 3.0, 4.0] {
            out.push(Scale::power_of_log(p).expect("valid"));
        }
        out.push(Scale::iterated_log(2.0, 0.25).expect("valid"));
        out.push(Scale::iterated_log(2.0, 0.5).expect("valid"));
        out.push(Scale::iterated_log(4.0, 0.125).expect("valid"));
        out.push(Scale::power_law(0.1).expect("valid"));
        out.push(Scale::power_law(1.0).expect("valid"));
        out
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(VpError::invalid(name, format!("{v} (must be > 0)")))
            }
        };
        match self.family {
            ScaleFamily::PowerOfLog { p } => check("p", p),
            ScaleFamily::IteratedLog { p, exponent } => {
                check("p", p)?;
                if !exponent.is_finite() {
                    return Err(VpError::invalid("exponent", "not finite"));
                }
                Ok(())
            }
            ScaleFamily::PowerLaw { a } => check("a", a),
        }
    }

    /// `ln sigma` as a function of `ell = ln|ln eps|`, clamped so that
    /// `sigma <= 1`.
    pub fn ln_sigma_at(&self, ell: f64) -> f64 {
        let raw = match self.family {
            ScaleFamily::PowerOfLog { p } => -ell / p,
            ScaleFamily::IteratedLog { exponent, .. } => {
                if ell <= 0.0 {
                    0.0
                } else {
                    -exponent * ell.ln()
                }
            }
            ScaleFamily::PowerLaw { a } => -a * ell.exp(),
        };
        raw.min(0.0)
    }

    /// `sigma(eps)` for `eps` in (0, 1].
    pub fn eval(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(VpError::invalid("eps", format!("{eps} not in (0, 1]")));
        }
        if let ScaleFamily::PowerLaw { a } = self.family {
            return Ok(eps.powf(a));
        }
        let big_l = -eps.ln();
        if big_l == 0.0 {
            return Ok(1.0);
        }
        Ok(self.ln_sigma_at(big_l.ln()).exp())
    }
}

/// One sampled point of a membership certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    /// `ln|ln eps|` at the sample.
    pub ell: f64,
    /// The constant `C` for variant 2, absent for variant 1.
    pub c: Option<f64>,
    /// Log ratio (variant 1) or difference (variant 2).
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub scale: String,
    pub p: f64,
    pub variant: u8,
    pub member: bool,
    /// Variant 1: max of `ln(sigma^-1 / |ln eps|^(1/p))`. Variant 2: max of
    /// `C sigma^-p - ln|ln eps|` over all `C`.
    pub max_value: f64,
    pub certificate: Vec<CertificateRow>,
}

const ELL_MIN: f64 = 1.5;
const ELL_MAX: f64 = 1.0e4;
const GRID_POINTS: usize = 600;
const VARIANT2_CONSTANTS: [f64; 3] = [1.0, 10.0, 100.0];

fn ell_grid() -> Vec<f64> {
    let (a, b) = (ELL_MIN.ln(), ELL_MAX.ln());
    (0..GRID_POINTS)
        .map(|i| (a + (b - a) * i as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect()
}

/// Bounded above on the sampled grid: finite everywhere and no longer growing
/// over the final tenth.
fn bounded_above(values: &[f64]) -> bool {
    if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return false;
    }
    let tail = (values.len() / 10).max(3);
    let start = values.len() - tail;
    values[start..]
        .windows(2)
        .all(|w| w[1] == f64::NEG_INFINITY || w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0))
}

/// Tests membership of `scale` in the variant-1 or variant-2 class of index `p`.
pub fn classify_scale(scale: &Scale, p: f64, variant: u8) -> Result<MembershipReport> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(VpError::invalid("p", format!("{p} (must be > 0)")));
    }
    if variant != 1 && variant != 2 {
        return Err(VpError::invalid(
            "variant",
            format!("{variant} (expected 1 or 2)"),
        ));
    }
    scale.validate()?;
    let grid = ell_grid();
    let ln_sigma: Vec<f64> = grid.iter().map(|&l| scale.ln_sigma_at(l)).collect();
    let decreasing = ln_sigma
        .windows(2)
        .all(|w| w[1] < w[0] || (w[1] == f64::NEG_INFINITY && w[0] == f64::NEG_INFINITY));
    if !decreasing {
        return Err(VpError::ScaleNotDecreasing(scale.name.clone()));
    }

    let mut certificate = Vec::new();
    let stride = GRID_POINTS / 30;
    let keep = |i: usize| i.is_multiple_of(stride) || i + 1 == GRID_POINTS;
    let (member, max_value) = if variant == 1 {
        let values: Vec<f64> = grid
            .iter()
            .zip(&ln_sigma)
            .map(|(&l, &ls)| -ls - l / p)
            .collect();
        for (i, (&l, &v)) in grid.iter().zip(&values).enumerate() {
            if keep(i) {
                certificate.push(CertificateRow {
                    ell: l,
                    c: None,
                    value: v,
                });
            }
        }
        (
            bounded_above(&values),
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    } else {
        let mut member = true;
        let mut max_value = f64::NEG_INFINITY;
        for c in VARIANT2_CONSTANTS {
            let values: Vec<f64> = grid
                .iter()
                .zip(&ln_sigma)
                .map(|(&l, &ls)| c * (-p * ls).exp() - l)
                .collect();
            member &= bounded_above(&values);
            max_value = values.iter().copied().fold(max_value, f64::max);
            for (i, (&l, &v)) in grid.iter().zip(&values).enumerate() {
                if keep(i) {
                    certificate.push(CertificateRow {
                        ell: l,
                        c: Some(c),
                        value: v,
                    });
                }
            }
        }
        (member, max_value)
    };
    Ok(MembershipReport {
        scale: scale.name.clone(),
        p,
        variant,
        member,
        max_value,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_stays_in_unit_interval() {
        for s in Scale::builtin() {
            for eps in [1.0, 0.9, 0.5, 1e-3, 1e-100, 1e-300] {
                let v = s.eval(eps).unwrap();
                assert!(v > 0.0 && v <= 1.0, "{} at {eps}: {v}", s.name);
            }
        }
    }

    #[test]
    fn eval_matches_closed_forms() {
        let s = Scale::power_of_log(2.0).unwrap();
        let eps: f64 = 1e-40;
        assert!((s.eval(eps).unwrap() - (-eps.ln()).powf(-0.5)).abs() < 1e-14);
        let s = Scale::iterated_log(2.0, 0.25).unwrap();
        assert!((s.eval(eps).unwrap() - (-eps.ln()).ln().powf(-0.25)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_p_and_increasing_scales() {
        let s = Scale::power_of_log(2.0).unwrap();
        assert!(classify_scale(&s, 0.0, 1).is_err());
        assert!(classify_scale(&s, -1.0, 1).is_err());
        let up = Scale::iterated_log(2.0, -0.5).unwrap();
        assert!(matches!(
            classify_scale(&up, 2.0, 1),
            Err(VpError::ScaleNotDecreasing(_))
        ));
        assert!(Scale::power_law(0.0).is_err());
    }

    #[test]
    fn bounded_above_detects_growth() {
        assert!(bounded_above(&[0.0; 40]));
        let growing: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert!(!bounded_above(&growing));
        assert!(!bounded_above(&[1.0, f64::INFINITY, 0.0, 0.0]));
    }
}
