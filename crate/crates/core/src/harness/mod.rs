//! Experiment configuration, dispatch and on-disk artifacts.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{
    fit_exponent, fit_gronwall_law, linear_response, metrics_file_name, run_sweep, run_width,
    verify_tangent_growth, verify_zero_order, write_stability_csv, write_summary_csv, GridRule,
    PerturbationMode, StabilitySpec, SummaryRow, SweepSpec, ZERO_ORDER_BOUNDS,
};
use crate::error::{Result, VpError};
use crate::limits::{
    cold_euler_oracle, compare, shell_oracle, write_comparisons, Observable, OracleOptions,
};
use crate::radial_field::{
    check_vanishing_conditions, solve_vanishing_at_infinity, ConvolutionSolver, FieldSnapshot,
    RadialDensity, RadialGrid, VanishingRepresentative,
};
use crate::scales::{
    classify_scale, regularize, DatumShape, MembershipReport, Scale, ScaleFamily, SingularDatum,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Run,
    Sweep,
    Stability,
    Limit,
    PoissonCheck,
    ScaleCheck,
}

impl ExperimentKind {
    fn needs_datum(self) -> bool {
        !matches!(
            self,
            ExperimentKind::PoissonCheck | ExperimentKind::ScaleCheck
        )
    }

    fn needs_widths(self) -> bool {
        self.needs_datum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityParams {
    pub delta: f64,
    pub mode: PerturbationMode,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams {
            delta: 1e-3,
            mode: PerturbationMode::Data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleCheckParams {
    pub scale: ScaleFamily,
    pub p: f64,
    pub variant: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonParams {
    /// Particles sampled from the datum for the particle path.
    pub particles: usize,
    /// Lattice spacing of the 3D convolution path.
    pub spacing: f64,
    pub radii: Vec<f64>,
}

impl Default for PoissonParams {
    fn default() -> Self {
        PoissonParams {
            particles: 100_000,
            spacing: 0.05,
            radii: vec![0.0, 0.5, 1.0, 1.5, 2.0],
        }
    }
}

/// A complete experiment description. After [`load_config`] every field
/// holds an explicit value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub datum: Option<SingularDatum>,
    #[serde(default)]
    pub widths: Vec<f64>,
    #[serde(default = "defaults::n0")]
    pub n0: usize,
    #[serde(default = "defaults::t_end", rename = "T")]
    pub t_end: f64,
    /// Sample time of the zero-order suite; `0.75 T` when omitted.
    #[serde(default)]
    pub t_star: Option<f64>,
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::grid")]
    pub grid: GridRule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::sample_every")]
    pub sample_every: usize,
    #[serde(default = "defaults::tolerance")]
    pub tolerance: f64,
    /// `dt / dt_oracle`.
    #[serde(default = "defaults::dt_oracle_ratio")]
    pub dt_oracle_ratio: f64,
    #[serde(default = "defaults::h_fd")]
    pub h_fd: f64,
    #[serde(default)]
    pub track_tangent: bool,
    #[serde(default = "defaults::observable_bins")]
    pub observable_bins: usize,
    #[serde(default)]
    pub stability: Option<StabilityParams>,
    #[serde(default)]
    pub poisson: Option<PoissonParams>,
    #[serde(default)]
    pub scale_check: Option<ScaleCheckParams>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

mod defaults {
    use super::GridRule;

    pub fn n0() -> usize {
        20_000
    }
    pub fn t_end() -> f64 {
        0.8
    }
    pub fn eta() -> f64 {
        0.1
    }
    pub fn grid() -> GridRule {
        GridRule {
            r_max: 2.0,
            bin: 1.0 / 32.0,
        }
    }
    pub fn sample_every() -> usize {
        10
    }
    pub fn tolerance() -> f64 {
        0.15
    }
    pub fn dt_oracle_ratio() -> f64 {
        100.0
    }
    pub fn h_fd() -> f64 {
        0.02
    }
    pub fn observable_bins() -> usize {
        16
    }
}

impl ExperimentConfig {
    /// Fills every optional section the kind uses and checks ranges.
    pub fn materialize(mut self) -> Result<Self> {
        if self.t_star.is_none() {
            self.t_star = Some(0.75 * self.t_end);
        }
        if self.kind == ExperimentKind::Stability && self.stability.is_none() {
            self.stability = Some(StabilityParams::default());
        }
        if self.kind == ExperimentKind::PoissonCheck {
            if self.poisson.is_none() {
                self.poisson = Some(PoissonParams::default());
            }
            if self.datum.is_none() {
                self.datum = Some(SingularDatum::cold_ball(1.0, 1.0, 1.0)?);
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: String| Err(VpError::Config(format!("key `{key}`: {why}")));
        if let Some(d) = &self.datum {
            d.validate()
                .map_err(|e| VpError::Config(format!("key `datum`: {e}")))?;
        }
        if self.widths.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("widths", "must be strictly decreasing".into());
        }
        if let Some(s) = self.widths.iter().find(|&&s| !(s > 0.0 && s <= 1.0)) {
            return bad("widths", format!("{s} not in (0, 1]"));
        }
        if self.n0 == 0 {
            return bad("n0", "must be >= 1".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("T", format!("{} must be > 0", self.t_end));
        }
        if let Some(t) = self.t_star {
            if !(0.0..=self.t_end).contains(&t) {
                return bad("t_star", format!("{t} not in [0, T]"));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta", format!("{} not in (0, 1]", self.eta));
        }
        if !(self.grid.r_max > 0.0 && self.grid.bin > 0.0 && self.grid.bin < self.grid.r_max) {
            return bad("grid", "need 0 < bin < r_max".into());
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance", format!("{} must be >= 0", self.tolerance));
        }
        if !(self.dt_oracle_ratio >= 1.0) {
            return bad(
                "dt_oracle_ratio",
                format!("{} must be >= 1", self.dt_oracle_ratio),
            );
        }
        if !(self.h_fd > 0.0) {
            return bad("h_fd", format!("{} must be > 0", self.h_fd));
        }
        if let Some(st) = &self.stability {
            if !(st.delta >= 0.0) {
                return bad("stability.delta", format!("{} must be >= 0", st.delta));
            }
        }
        if let Some(p) = &self.poisson {
            if p.particles == 0 || !(p.spacing > 0.0) {
                return bad("poisson", "need particles >= 1 and spacing > 0".into());
            }
        }
        if let Some(sc) = &self.scale_check {
            if ![1, 2].contains(&sc.variant) {
                return bad(
                    "scale_check.variant",
                    format!("{} (expected 1 or 2)", sc.variant),
                );
            }
        }
        Ok(())
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let datum = self
            .datum
            .clone()
            .ok_or_else(|| VpError::Config("missing required keys: datum".into()))?;
        let mut spec = SweepSpec::new(datum, self.widths.clone(), self.n0, self.t_end);
        spec.eta = self.eta;
        spec.grid = self.grid;
        spec.seed = self.seed;
        spec.sample_every = self.sample_every;
        spec.track_tangent = self.track_tangent;
        spec.h_fd = self.h_fd;
        spec.observable_bins = self.observable_bins;
        spec.capture_times = self.t_star.into_iter().collect();
        Ok(spec)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn sha256(&self) -> Result<String> {
        let text = serde_json::to_string(self)?;
        Ok(Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    }
}

fn required_keys(kind: Option<ExperimentKind>) -> Vec<&'static str> {
    let mut keys = vec!["kind"];
    if let Some(k) = kind {
        if k.needs_datum() {
            keys.push("datum");
        }
        if k.needs_widths() {
            keys.push("widths");
        }
        if k == ExperimentKind::ScaleCheck {
            keys.push("scale_check");
        }
    }
    keys
}

/// Parses a config, reporting every missing required key at once and naming
/// unknown keys.
pub fn config_from_str(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| VpError::Config("top level must be an object".into()))?;
    let kind = obj
        .get("kind")
        .and_then(|k| serde_json::from_value::<ExperimentKind>(k.clone()).ok());
    let missing: Vec<&str> = required_keys(kind)
        .into_iter()
        .filter(|k| !obj.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(VpError::Config(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| VpError::Config(e.to_string()))?;
    cfg.materialize()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| VpError::io(path, e))?;
    config_from_str(&text)
}

/// Loads a config for the given experiment kind, which replaces any `kind`
/// in the file.
pub fn load_config_as(path: &Path, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| VpError::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| VpError::Config("top level must be an object".into()))?;
    obj.insert("kind".into(), serde_json::to_value(kind)?);
    config_from_str(&value.to_string())
}

pub fn save_config(config: &ExperimentConfig, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(config)?;
    std::fs::write(path, text + "\n").map_err(|e| VpError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub failures: Vec<String>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| VpError::io(path, e))?,
    ))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| VpError::io(path, e))
}

/// Runs the experiment, writing its artifacts, `config.json` and
/// `manifest.json` into `out`. Failed sweep widths are listed in the
/// manifest rather than failing the call.
pub fn execute(config: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let started = chrono::Utc::now().to_rfc3339();
    std::fs::create_dir_all(out).map_err(|e| VpError::io(out, e))?;
    save_config(config, &out.join("config.json"))?;
    let failures = match config.kind {
        ExperimentKind::Run => run_one(config, out)?,
        ExperimentKind::Sweep => sweep(config, out)?,
        ExperimentKind::Stability => stability(config, out)?,
        ExperimentKind::Limit => limit(config, out)?,
        ExperimentKind::PoissonCheck => poisson_check(config, out)?,
        ExperimentKind::ScaleCheck => {
            let params = config
                .scale_check
                .as_ref()
                .ok_or_else(|| VpError::Config("missing required keys: scale_check".into()))?;
            scale_check(params, Some(out))?;
            Vec::new()
        }
    };
    let manifest = Manifest {
        config_sha256: config.sha256()?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        failures,
    };
    write_json(&manifest, &out.join("manifest.json"))?;
    Ok(manifest)
}

fn first_width(config: &ExperimentConfig) -> Result<f64> {
    config
        .widths
        .first()
        .copied()
        .ok_or_else(|| VpError::Config("key `widths`: empty list".into()))
}

fn run_one(config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let spec = config.sweep_spec()?;
    let s = first_width(config)?;
    let metrics = run_width(&spec, s)?;
    metrics.write_csv(create(&out.join(metrics_file_name(s)))?)?;
    if let Some((_, ens)) = metrics.captures.last() {
        let snap = FieldSnapshot::build(ens, &metrics.grid)?;
        snap.write_csv(create(&out.join("field.csv"))?)?;
    }
    Ok(Vec::new())
}

fn sweep(config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let spec = config.sweep_spec()?;
    let result = run_sweep(&spec, Some(out))?;
    let t_star = config.t_star.unwrap_or(0.75 * config.t_end);
    let mut rows: Vec<SummaryRow> = verify_zero_order(&result, t_star, config.tolerance)
        .iter()
        .map(|r| r.summary())
        .collect();
    let mut failures: Vec<String> = result
        .failures()
        .into_iter()
        .map(|(s, e)| format!("s={s}: {e}"))
        .collect();
    if config.track_tangent {
        match verify_tangent_growth(&result, config.t_end) {
            Ok(fit) => {
                if let Some(w) = &fit.warning {
                    failures.push(format!("tangent: {w}"));
                }
                rows.push(fit.summary());
            }
            Err(e) => failures.push(format!("tangent fit: {e}")),
        }
    }
    write_summary_csv(&rows, create(&out.join("summary.csv"))?)?;
    Ok(failures)
}

fn stability(config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let datum = config
        .datum
        .clone()
        .ok_or_else(|| VpError::Config("missing required keys: datum".into()))?;
    let params = config.stability.clone().unwrap_or_default();
    let spec = StabilitySpec {
        datum,
        n0: config.n0,
        s0: first_width(config)?,
        t_end: config.t_end,
        eta: config.eta,
        grid: config.grid,
        seed: config.seed,
        sample_every: config.sample_every,
    };
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut responses = Vec::new();
    for &s in &config.widths {
        match linear_response(&spec, s, params.delta, params.mode) {
            Ok(lr) => {
                if !lr.pass {
                    failures.push(format!("s={s}: linear response ratios {:?}", lr.ratios));
                }
                responses.push(serde_json::json!({ "s": s, "ratios": lr.ratios, "pass": lr.pass }));
                reports.push(lr.full);
                reports.push(lr.half);
            }
            Err(e) => failures.push(format!("s={s}: {e}")),
        }
    }
    write_stability_csv(&reports, create(&out.join("stability.csv"))?)?;
    let full: Vec<_> = reports.iter().step_by(2).cloned().collect();
    let fit = fit_gronwall_law(&full);
    write_json(
        &serde_json::json!({ "gronwall": fit, "linear_response": responses }),
        &out.join("stability_fit.json"),
    )?;
    Ok(failures)
}

fn limit(config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let spec = config.sweep_spec()?;
    let s = first_width(config)?;
    let opts = OracleOptions {
        profile_bins: config.observable_bins.max(1),
        ..OracleOptions::for_run_dt(spec.dt(s), config.dt_oracle_ratio)
    };
    let oracle = match &spec.datum.shape {
        DatumShape::ShellSum { shells } => {
            shell_oracle(shells, spec.datum.gamma, config.t_end, &opts)?
        }
        DatumShape::ColdMonokinetic { .. } => cold_euler_oracle(&spec.datum, config.t_end, &opts)?,
        DatumShape::Smooth { .. } => {
            return Err(VpError::Config(
                "key `datum`: limit needs a shell or cold datum".into(),
            ))
        }
    };
    oracle.write_csv(create(&out.join("oracle.csv"))?)?;
    let result = run_sweep(&spec, Some(out))?;
    let mut failures: Vec<String> = result
        .failures()
        .into_iter()
        .map(|(s, e)| format!("s={s}: {e}"))
        .collect();
    if oracle.horizon < config.t_end {
        failures.push(format!(
            "comparison truncated at the oracle horizon {}",
            oracle.horizon
        ));
    }
    let mut rows = Vec::new();
    for (_, m) in result.completed() {
        for obs in [
            Observable::R10,
            Observable::R50,
            Observable::R90,
            Observable::VelocityProfile,
        ] {
            rows.push(compare(m, &oracle, obs, config.t_end)?);
        }
    }
    write_comparisons(&rows, create(&out.join("limit.csv"))?)?;
    Ok(failures)
}

fn poisson_check(config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let datum = config
        .datum
        .clone()
        .ok_or_else(|| VpError::Config("missing required keys: datum".into()))?;
    let params = config.poisson.clone().unwrap_or_default();
    let DatumShape::ColdMonokinetic { mass, profile, .. } = &datum.shape else {
        return Err(VpError::Config(
            "key `datum`: poisson-check needs a cold datum".into(),
        ));
    };
    let ens = regularize(
        &datum,
        first_width(config).unwrap_or(1.0),
        params.particles,
        config.seed,
    )?;
    let grid = RadialGrid::with_spacing(config.grid.r_max, config.grid.bin)?;
    let snap = FieldSnapshot::build(&ens, &grid)?;
    snap.write_csv(create(&out.join("field.csv"))?)?;

    let density = RadialDensity::new(
        |r: f64| mass * profile.unit_density(r),
        Some(profile.radius()),
    );
    let solver = ConvolutionSolver::new(params.spacing)?;
    let dual = solve_vanishing_at_infinity(&density, datum.gamma, &params.radii, &solver)?;
    let particle_u: Vec<f64> = params
        .radii
        .iter()
        .map(|&r| {
            let nodes = grid.nodes();
            let j = grid.bin_of(r).unwrap_or(nodes.len() - 2);
            let t = ((r - nodes[j]) / (nodes[j + 1] - nodes[j])).clamp(0.0, 1.0);
            snap.potential[j] + t * (snap.potential[j + 1] - snap.potential[j])
        })
        .collect();
    let mut w = csv::Writer::from_writer(create(&out.join("poisson_check.csv"))?);
    w.write_record(["r", "u_particles", "u_radial", "u_convolution"])?;
    for (k, &r) in params.radii.iter().enumerate() {
        w.write_record([
            r.to_string(),
            particle_u[k].to_string(),
            dual.radial
                .as_ref()
                .map_or(String::new(), |v| v[k].to_string()),
            dual.convolution[k].to_string(),
        ])?;
    }
    w.flush().map_err(|e| VpError::io(out, e))?;

    let rep = VanishingRepresentative::new(
        snap.grid.nodes().to_vec(),
        snap.potential.clone(),
        ens.max_radius(),
        0.0,
    );
    let check = check_vanishing_conditions(&rep);
    write_json(
        &serde_json::json!({
            "max_disagreement": dual.max_disagreement(),
            "cond_i": check.cond_i,
            "cond_ii": check.cond_ii,
        }),
        &out.join("poisson_check.json"),
    )?;
    let mut failures = Vec::new();
    if !(check.cond_i && check.cond_ii) {
        failures.push(format!(
            "particle potential failed the vanishing check: {check:?}"
        ));
    }
    Ok(failures)
}

/// Classifies a scale; with `out`, also writes its certificate to
/// `scale_check.csv`.
pub fn scale_check(params: &ScaleCheckParams, out: Option<&Path>) -> Result<MembershipReport> {
    let scale = Scale::new("configured", params.scale)?;
    let report = classify_scale(&scale, params.p, params.variant)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| VpError::io(dir, e))?;
        let mut w = csv::Writer::from_writer(create(&dir.join("scale_check.csv"))?);
        w.write_record(["ell", "c", "value"])?;
        for row in &report.certificate {
            w.write_record([
                row.ell.to_string(),
                row.c.map_or(String::new(), |c| c.to_string()),
                row.value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| VpError::io(dir, e))?;
    }
    Ok(report)
}

/// Sizes the global worker pool; only the first call has an effect.
pub fn set_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| VpError::Config(format!("threads: {e}")))
}

/// Rebuilds `summary.csv` in `dir` from its `metrics_s*.csv` files. Quantities
/// that need particle data (`f`) are left as gaps.
pub fn report(dir: &Path) -> Result<Vec<SummaryRow>> {
    let config = load_config(&dir.join("config.json")).ok();
    let t_star = config.as_ref().and_then(|c| c.t_star).unwrap_or(0.6);
    let tolerance = config.as_ref().map_or(0.15, |c| c.tolerance);
    let mut runs: Vec<(f64, Vec<crate::dynamics::MetricsRow>)> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| VpError::io(dir, e))? {
        let path = entry.map_err(|e| VpError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let Some(s) = name
            .strip_prefix("metrics_s")
            .and_then(|n| n.strip_suffix(".csv"))
            .and_then(|n| n.parse::<f64>().ok())
        else {
            continue;
        };
        let mut rdr = csv::Reader::from_path(&path)?;
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        runs.push((s, rows));
    }
    runs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = Vec::new();
    for &(name, bound) in ZERO_ORDER_BOUNDS.iter() {
        let pairs: Vec<(f64, f64)> = runs
            .iter()
            .filter_map(|(s, rows)| {
                let row = rows
                    .iter()
                    .min_by(|a, b| (a.t - t_star).abs().total_cmp(&(b.t - t_star).abs()))?;
                let v = match name {
                    "P" => row.p,
                    "u" => row.u_sup,
                    "u'" => row.force_sup,
                    "rho" => row.rho_sup,
                    "Z" => row.q.max(row.p),
                    _ => return None,
                };
                Some((*s, v))
            })
            .collect();
        let fit = fit_exponent(name, &pairs).ok();
        out.push(SummaryRow {
            quantity: name.to_string(),
            slope: fit.as_ref().map(|f| f.slope),
            intercept: fit.as_ref().map(|f| f.intercept),
            r2: fit.as_ref().map(|f| f.r2),
            bound,
            pass: fit.as_ref().map(|f| f.slope <= bound + tolerance),
        });
    }
    write_summary_csv(&out, create(&dir.join("summary.csv"))?)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "kind": "sweep",
        "datum": {"shape": {"type": "cold_monokinetic", "mass": 1.0,
                  "profile": {"type": "uniform_ball", "radius": 1.0},
                  "velocity": {"type": "zero"}}, "gamma": 1.0},
        "widths": [0.5, 0.25, 0.125, 0.0625]
    }"#;

    #[test]
    fn defaults_are_materialized() {
        let c = config_from_str(MINIMAL).unwrap();
        assert_eq!(c.eta, 0.1);
        assert_eq!(c.tolerance, 0.15);
        assert_eq!(c.dt_oracle_ratio, 100.0);
        assert_eq!(c.t_star, Some(0.75 * 0.8));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replacen("\"kind\"", "\"dt_adaptive\": true, \"kind\"", 1);
        let e = config_from_str(&text).unwrap_err().to_string();
        assert!(e.contains("dt_adaptive"), "{e}");
    }

    #[test]
    fn missing_keys_are_listed() {
        let e = config_from_str(r#"{"kind": "sweep"}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("datum") && e.contains("widths"), "{e}");
    }

    #[test]
    fn round_trip() {
        let c = config_from_str(MINIMAL).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(config_from_str(&text).unwrap(), c);
    }

    #[test]
    fn bad_range_names_key() {
        let text = MINIMAL.replacen("\"kind\"", "\"eta\": -1, \"kind\"", 1);
        let e = config_from_str(&text).unwrap_err().to_string();
        assert!(e.contains("eta"), "{e}");
    }
}
