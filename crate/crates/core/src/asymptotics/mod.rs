//! Width sweeps, growth-exponent fits and the perturbation (stability)
//! experiments.

mod stability;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{dt_rule, integrate, IntegrateOptions, RunMetrics, SimOptions, SimState};
use crate::error::{Result, VpError};
use crate::numerics::linear_fit;
use crate::radial_field::RadialGrid;
use crate::scales::{datum_norms, regularize, SingularDatum};

pub use stability::{
    fit_gronwall_law, linear_response, stability_experiment, write_stability_csv, GronwallFit,
    LinearResponse, PerturbationMode, StabilityReport, StabilitySpec,
};

/// Uniform radial grid reaching `r_max` with spacing `bin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRule {
    pub r_max: f64,
    pub bin: f64,
}

impl GridRule {
    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::with_spacing(self.r_max, self.bin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub datum: SingularDatum,
    /// Strictly decreasing widths.
    pub widths: Vec<f64>,
    /// Particle count at the first width; `n(s) = n0 * s0 / s`.
    pub n0: usize,
    pub t_end: f64,
    /// `dt = eta * min(s^(2/3), 0.01)`.
    pub eta: f64,
    pub grid: GridRule,
    pub seed: u64,
    pub sample_every: usize,
    /// Ensemble copies kept for norms that need the particles.
    pub capture_times: Vec<f64>,
    pub track_tangent: bool,
    pub h_fd: f64,
    /// Equal-mass bins of the velocity profile; 0 disables observables.
    pub observable_bins: usize,
}

impl SweepSpec {
    /// Spec with the documented defaults for everything but the datum,
    /// widths, particle count and horizon.
    pub fn new(datum: SingularDatum, widths: Vec<f64>, n0: usize, t_end: f64) -> Self {
        SweepSpec {
            datum,
            widths,
            n0,
            t_end,
            eta: 0.1,
            grid: GridRule {
                r_max: 2.0,
                bin: 1.0 / 32.0,
            },
            seed: 0,
            sample_every: 10,
            capture_times: Vec::new(),
            track_tangent: false,
            h_fd: 0.02,
            observable_bins: 0,
        }
    }

    /// `widths[0]`, `widths[0]/2`, ... (`count` widths).
    pub fn halving_widths(first: f64, count: usize) -> Vec<f64> {
        (0..count).map(|k| first / 2f64.powi(k as i32)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.datum.validate()?;
        if self.widths.is_empty() {
            return Err(VpError::invalid("widths", "empty list"));
        }
        if self.widths.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(VpError::invalid("widths", "must be strictly decreasing"));
        }
        if let Some(s) = self.widths.iter().find(|&&s| !(s > 0.0 && s <= 1.0)) {
            return Err(VpError::invalid("widths", format!("{s} not in (0, 1]")));
        }
        if self.n0 == 0 {
            return Err(VpError::invalid("n0", "must be >= 1"));
        }
        if !(self.t_end > 0.0) {
            return Err(VpError::invalid(
                "T",
                format!("{} (must be > 0)", self.t_end),
            ));
        }
        if !(self.eta > 0.0) {
            return Err(VpError::invalid(
                "eta",
                format!("{} (must be > 0)", self.eta),
            ));
        }
        self.grid.grid()?;
        Ok(())
    }

    pub fn n_particles(&self, s: f64) -> usize {
        let s0 = self.widths.first().copied().unwrap_or(s);
        (self.n0 as f64 * s0 / s).round().max(1.0) as usize
    }

    pub fn dt(&self, s: f64) -> f64 {
        dt_rule(self.eta, s)
    }
}

/// One width of the sweep: sample, evolve to `T`, collect metrics.
pub fn run_width(spec: &SweepSpec, s: f64) -> Result<RunMetrics> {
    let n = spec.n_particles(s);
    let ensemble = regularize(&spec.datum, s, n, spec.seed)?;
    if ensemble.under_resolved {
        return Err(VpError::invalid(
            "n_particles",
            format!("{n} particles under-resolve width {s}"),
        ));
    }
    let mut state = SimState::new(
        &ensemble,
        SimOptions {
            central_mass: 0.0,
            track_tangent: spec.track_tangent,
            h_fd: spec.h_fd,
        },
    )?;
    integrate(
        &mut state,
        &IntegrateOptions {
            t_end: spec.t_end,
            dt: spec.dt(s),
            sample_every: spec.sample_every,
            grid: spec.grid.grid()?,
            capture_times: spec.capture_times.clone(),
            observable_bins: spec.observable_bins,
        },
    )
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub width: f64,
    pub n_particles: usize,
    pub outcome: std::result::Result<RunMetrics, String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// In the order of the spec's widths.
    pub runs: Vec<SweepRun>,
}

impl SweepResult {
    pub fn completed(&self) -> impl Iterator<Item = (f64, &RunMetrics)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r.width, m)))
    }

    pub fn failures(&self) -> Vec<(f64, String)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.width, e.clone())))
            .collect()
    }
}

pub fn metrics_file_name(s: f64) -> String {
    format!("metrics_s{s}.csv")
}

/// Runs every width (in parallel), writing `metrics_s<width>.csv` into `out`
/// when given. A failed width is recorded and the others still run.
pub fn run_sweep(spec: &SweepSpec, out: Option<&Path>) -> Result<SweepResult> {
    spec.validate()?;
    let runs: Vec<SweepRun> = spec
        .widths
        .par_iter()
        .map(|&s| SweepRun {
            width: s,
            n_particles: spec.n_particles(s),
            outcome: run_width(spec, s).map_err(|e| e.to_string()),
        })
        .collect();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| VpError::io(dir, e))?;
        for run in &runs {
            if let Ok(m) = &run.outcome {
                let path = dir.join(metrics_file_name(run.width));
                let file = std::fs::File::create(&path).map_err(|e| VpError::io(&path, e))?;
                m.write_csv(std::io::BufWriter::new(file))?;
            }
        }
    }
    Ok(SweepResult { runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub quantity: String,
    pub pairs: Vec<(f64, f64)>,
    /// Slope of `ln q` against `ln(1/s)`.
    pub slope: f64,
    /// `ln C` in `q ~ C s^(-slope)`.
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares growth exponent of `q` in `1/s`.
pub fn fit_exponent(quantity: &str, pairs: &[(f64, f64)]) -> Result<ExponentFit> {
    if pairs.len() < 4 {
        return Err(VpError::InsufficientData {
            needed: 4,
            got: pairs.len(),
        });
    }
    for &(s, q) in pairs {
        if !(s > 0.0) {
            return Err(VpError::NonPositive {
                quantity: "s".into(),
                value: s,
            });
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(VpError::NonPositive {
                quantity: quantity.to_string(),
                value: q,
            });
        }
    }
    let xs: Vec<f64> = pairs.iter().map(|p| -p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(ExponentFit {
        quantity: quantity.to_string(),
        pairs: pairs.to_vec(),
        slope,
        intercept,
        r2,
    })
}

/// One line of `quantity,slope,intercept,r2,bound,pass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub quantity: String,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    pub bound: f64,
    pub pass: Option<bool>,
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quantity", "slope", "intercept", "r2", "bound", "pass"])?;
    for r in rows {
        w.write_record([
            r.quantity.clone(),
            opt(r.slope),
            opt(r.intercept),
            opt(r.r2),
            r.bound.to_string(),
            r.pass.map_or(String::new(), |p| p.to_string()),
        ])?;
    }
    w.flush().map_err(|e| VpError::io("<csv>", e))?;
    Ok(())
}

/// Growth bounds in `1/s` of the zero-order estimates.
pub const ZERO_ORDER_BOUNDS: [(&str, f64); 6] = [
    ("f", 1.0),
    ("P", 1.0 / 3.0),
    ("u", 4.0 / 3.0),
    ("u'", 4.0 / 3.0),
    ("rho", 2.0),
    ("Z", 1.0 / 3.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroOrderRow {
    pub quantity: String,
    pub bound: f64,
    /// `None` when the quantity could not be measured on enough widths.
    pub fit: Option<ExponentFit>,
    /// `value * s^bound` per width, in sweep order.
    pub ratios: Vec<f64>,
    pub pass: Option<bool>,
}

impl ZeroOrderRow {
    pub fn summary(&self) -> SummaryRow {
        SummaryRow {
            quantity: self.quantity.clone(),
            slope: self.fit.as_ref().map(|f| f.slope),
            intercept: self.fit.as_ref().map(|f| f.intercept),
            r2: self.fit.as_ref().map(|f| f.r2),
            bound: self.bound,
            pass: self.pass,
        }
    }
}

/// The ratio `value * s^bound` may not grow faster than `(1/s)^tolerance`:
/// its value at the smallest width is compared with the largest ratio over
/// the wider half of the sweep.
fn ratio_bounded(widths: &[f64], ratios: &[f64], tolerance: f64) -> bool {
    let n = ratios.len();
    if n < 2 {
        return true;
    }
    let head = ratios[..n.div_ceil(2)].iter().copied().fold(0.0, f64::max);
    let spread = widths[0] / widths[n - 1];
    ratios[n - 1] <= head * spread.powf(tolerance)
}

/// Fits the growth of `sup f` (at `t_star`), `P`, `sup|u|`, `sup|u'|`,
/// `sup rho` and `Z = max(Q, P)` (at `t_star`) over the sweep. `sup f` needs
/// an ensemble capture at `t_star`; without one its row is left empty.
pub fn verify_zero_order(sweep: &SweepResult, t_star: f64, tolerance: f64) -> Vec<ZeroOrderRow> {
    let runs: Vec<(f64, &RunMetrics)> = sweep.completed().collect();
    ZERO_ORDER_BOUNDS
        .iter()
        .map(|&(name, bound)| {
            let mut pairs = Vec::new();
            for &(s, m) in &runs {
                let row = m.row_at(t_star);
                let value = match name {
                    "f" => m
                        .captures
                        .iter()
                        .find(|c| (c.0 - t_star).abs() <= m.dt)
                        .map(|c| datum_norms(&c.1, &m.grid).linf_f),
                    "P" => Some(row.p),
                    "u" => Some(row.u_sup),
                    "u'" => Some(row.force_sup),
                    "rho" => Some(row.rho_sup),
                    _ => Some(row.q.max(row.p)),
                };
                if let Some(v) = value {
                    pairs.push((s, v));
                }
            }
            let fit = fit_exponent(name, &pairs).ok();
            let widths: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ratios: Vec<f64> = pairs.iter().map(|&(s, v)| v * s.powf(bound)).collect();
            let pass = fit.as_ref().map(|f| {
                f.slope <= bound + tolerance && ratio_bounded(&widths, &ratios, tolerance)
            });
            ZeroOrderRow {
                quantity: name.to_string(),
                bound,
                fit,
                ratios,
                pass,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentGrowthFit {
    /// `(s, sup tangent norm at t)` per completed width.
    pub pairs: Vec<(f64, f64)>,
    /// `C` in `ln sup = ln A + C s^(-2)`.
    pub c: f64,
    pub intercept: f64,
    pub r2: f64,
    pub max_invalid_fraction: f64,
    pub warning: Option<String>,
    /// `C` finite and the log-growth affine in `s^(-2)` (`r2 >= 0.9`).
    pub pass: bool,
}

impl TangentGrowthFit {
    pub fn summary(&self) -> SummaryRow {
        SummaryRow {
            quantity: "tangent".into(),
            slope: Some(self.c),
            intercept: Some(self.intercept),
            r2: Some(self.r2),
            bound: f64::INFINITY,
            pass: Some(self.pass),
        }
    }
}

/// Regresses `ln(sup tangent norm at t)` on `s^(-2)` across the sweep, using
/// the sample nearest `t`. The invalid fraction is the one at the end of the
/// runs, an upper bound for earlier times.
pub fn verify_tangent_growth(sweep: &SweepResult, t: f64) -> Result<TangentGrowthFit> {
    let runs: Vec<(f64, &RunMetrics)> = sweep.completed().collect();
    let pairs: Vec<(f64, f64)> = runs
        .iter()
        .map(|(s, m)| (*s, m.row_at(t).tangent_sup))
        .collect();
    if pairs.iter().any(|p| p.1.is_nan()) {
        return Err(VpError::TangentDisabled);
    }
    if pairs.len() < 4 {
        return Err(VpError::InsufficientData {
            needed: 4,
            got: pairs.len(),
        });
    }
    if let Some(p) = pairs.iter().find(|p| !(p.1 > 0.0)) {
        return Err(VpError::NonPositive {
            quantity: "tangent".into(),
            value: p.1,
        });
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.powi(-2)).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (c, intercept, r2) = linear_fit(&xs, &ys);
    let max_invalid = runs
        .iter()
        .map(|(_, m)| m.invalid_tangent_fraction)
        .fold(0.0, f64::max);
    let warning = (max_invalid > 0.1).then(|| {
        format!(
            "tangent invalidated on {:.1}% of particles",
            100.0 * max_invalid
        )
    });
    Ok(TangentGrowthFit {
        pairs,
        c,
        intercept,
        r2,
        max_invalid_fraction: max_invalid,
        warning,
        pass: c.is_finite() && r2 >= 0.9,
    })
}
