use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vpgen_core::harness::{
    execute, load_config_as, report, scale_check, set_threads, ExperimentKind, ScaleCheckParams,
};
use vpgen_core::scales::ScaleFamily;

#[derive(Parser)]
#[command(
    name = "vpgen",
    version,
    about = "Regularized spherical Vlasov-Poisson experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; VPGEN_OUT takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    PowerOfLog,
    IteratedLog,
    PowerLaw,
}

#[derive(Subcommand)]
enum Command {
    /// One run at the first configured width.
    Run(Common),
    /// Width sweep with exponent fits.
    Sweep(Common),
    /// Perturbation experiments.
    Stability(Common),
    /// Comparison against the shell or cold-fluid reference solution.
    Limit(Common),
    /// Particle, radial and 3D convolution potentials of a cold datum.
    PoissonCheck(Common),
    /// Membership of a scale in the class of order p.
    ScaleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        family: Option<Family>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 1)]
        variant: u8,
        /// Exponent for iterated-log, `a` for power-law; defaults to `p` for
        /// power-of-log.
        #[arg(long)]
        family_param: Option<f64>,
    },
    /// Rebuilds summary.csv from the metrics files of an output directory.
    Report(Common),
}

fn out_dir(common: &Common, configured: Option<PathBuf>) -> PathBuf {
    std::env::var_os("VPGEN_OUT")
        .map(PathBuf::from)
        .or_else(|| common.out.clone())
        .or(configured)
        .unwrap_or_else(|| PathBuf::from("vpgen-out"))
}

fn experiment(kind: ExperimentKind, common: &Common) -> Result<()> {
    let path = match (&common.config, kind) {
        (Some(p), _) => Some(p.clone()),
        (None, ExperimentKind::PoissonCheck) => None,
        (None, _) => bail!("--config is required for this subcommand"),
    };
    let mut config = match path {
        Some(p) => load_config_as(&p, kind).with_context(|| format!("loading {}", p.display()))?,
        None => vpgen_core::harness::config_from_str(r#"{"kind": "poisson-check"}"#)?,
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = out_dir(common, config.out_dir.clone());
    let manifest = execute(&config, &out)?;
    for f in &manifest.failures {
        eprintln!("warning: {f}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn scale_params(
    common: &Common,
    family: Option<Family>,
    p: Option<f64>,
    variant: u8,
    family_param: Option<f64>,
) -> Result<ScaleCheckParams> {
    if let Some(path) = &common.config {
        let config = load_config_as(path, ExperimentKind::ScaleCheck)?;
        return config
            .scale_check
            .context("config has no scale_check section");
    }
    let family = family.context("--family is required without --config")?;
    let p = p.context("--p is required without --config")?;
    let scale = match family {
        Family::PowerOfLog => ScaleFamily::PowerOfLog {
            p: family_param.unwrap_or(p),
        },
        Family::IteratedLog => ScaleFamily::IteratedLog {
            p,
            exponent: family_param
                .context("--family-param (exponent) is required for iterated-log")?,
        },
        Family::PowerLaw => ScaleFamily::PowerLaw {
            a: family_param.context("--family-param (a) is required for power-law")?,
        },
    };
    Ok(ScaleCheckParams { scale, p, variant })
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Run(c)
        | Command::Sweep(c)
        | Command::Stability(c)
        | Command::Limit(c)
        | Command::PoissonCheck(c)
        | Command::Report(c) => c,
        Command::ScaleCheck { common, .. } => common,
    };
    if let Some(n) = common.threads {
        set_threads(n)?;
    }
    match &cli.command {
        Command::Run(c) => experiment(ExperimentKind::Run, c),
        Command::Sweep(c) => experiment(ExperimentKind::Sweep, c),
        Command::Stability(c) => experiment(ExperimentKind::Stability, c),
        Command::Limit(c) => experiment(ExperimentKind::Limit, c),
        Command::PoissonCheck(c) => experiment(ExperimentKind::PoissonCheck, c),
        Command::ScaleCheck {
            common,
            family,
            p,
            variant,
            family_param,
        } => {
            let params = scale_params(common, *family, *p, *variant, *family_param)?;
            let out = std::env::var_os("VPGEN_OUT")
                .map(PathBuf::from)
                .or(common.out.clone());
            let report = scale_check(&params, out.as_deref())?;
            println!("membership {}", report.member);
            Ok(())
        }
        Command::Report(c) => {
            let dir = out_dir(c, None);
            let rows = report(&dir)?;
            println!("quantity,slope,bound,pass");
            for r in rows {
                let slope = r.slope.map_or("-".into(), |s| format!("{s:.4}"));
                let pass = r.pass.map_or("-".into(), |p| p.to_string());
                println!("{},{},{:.4},{}", r.quantity, slope, r.bound, pass);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
