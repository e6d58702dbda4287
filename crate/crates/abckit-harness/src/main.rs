//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a verification or oracle check fails,
//! 2 when a proposal budget ran out before the requested particle count,
//! 3 on configuration or I/O errors. The output directory resolves in order
//! of precedence: `--out`, the `ABCKIT_OUT` environment variable, the config
//! file, then the built-in default `out/`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use abckit::calibrate::{calibrate_ball, calibrate_ellipse_closed};
use abckit::expansion::{re_form_exponential, re_form_normal, re_form_normal_exact};
use abckit::models::{ExponentialModel, GammaParams, Model, NormalGamma, NormalModel};
use abckit::oracle::{kl_numeric, QuadratureSpec};
use abckit::sampler::Region;
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use abckit_harness::config::{ExperimentConfig, GeometryKind, ModelKind};
use abckit_harness::manifest::RunManifest;
use abckit_harness::plot::plot_figure;
use abckit_harness::tables::{cell_seed, render_summary, reproduce_tables, run_cells, TAG_STAT};
use abckit_harness::verify::{render, verify_published_rows};

/// Environment variable overriding the output directory.
const OUT_ENV: &str = "ABCKIT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Normal,
    ExponentialRate,
}

#[derive(Parser)]
#[command(
    name = "abckit",
    about = "Likelihood-free inference with entropy-calibrated acceptance regions",
    after_help = "The output directory resolves as: --out, then the ABCKIT_OUT \
                  environment variable, then the config file, then ./out."
)]
struct Cli {
    /// TOML experiment configuration; defaults reproduce the reference study.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Accepted particles per cell and geometry.
    #[arg(long, global = true)]
    particles: Option<usize>,
    /// Model override.
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print calibrated acceptance thresholds for every configured cell.
    Calibrate,
    /// Run the configured cells and write the run manifest, no tables.
    Simulate,
    /// Run the configured cells and write table1-3.csv, figure2.csv, and the
    /// run manifest.
    Tables,
    /// Recompute the published study rows and report deviations.
    Verify,
    /// Cross-check the entropy expansion against independent quadrature.
    OracleCheck,
    /// Render figure2.svg from a previously written figure2.csv.
    Plot,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    if let Ok(dir) = std::env::var(OUT_ENV) {
        config.output_dir = PathBuf::from(dir);
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(particles) = cli.particles {
        config.particles = particles;
    }
    if let Some(model) = cli.model {
        config.model = match model {
            ModelArg::Normal => ModelKind::Normal,
            ModelArg::ExponentialRate => ModelKind::ExponentialRate,
        };
        // the default prior and true parameter are normal-specific
        if config.model == ModelKind::ExponentialRate && cli.config.is_none() {
            config.prior = vec![1.0, 1.0];
            config.true_theta = vec![1.0];
        }
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn cmd_calibrate(config: &ExperimentConfig) -> Result<(), String> {
    for (i, (tol, n)) in config.cell_list().into_iter().enumerate() {
        let ti = config.tolerances.iter().position(|t| *t == tol).unwrap_or(i);
        let ni = config.sample_sizes.iter().position(|m| *m == n).unwrap_or(i);
        let seed = cell_seed(config.master_seed, ti, ni, TAG_STAT);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        match config.model {
            ModelKind::Normal => {
                let prior =
                    NormalGamma::new(config.prior[0], config.prior[1], config.prior[2], config.prior[3])
                        .map_err(|e| e.to_string())?;
                let model = NormalModel::new(prior, n).map_err(|e| e.to_string())?;
                let theta = (config.true_theta[0], 1.0 / config.true_theta[1]);
                let stat = model.sample_stat(&theta, &mut rng);
                let form = re_form_normal(&model.posterior(stat).map_err(|e| e.to_string())?, n);
                let ball = calibrate_ball(&form, tol).map_err(|e| e.to_string())?;
                let ell = calibrate_ellipse_closed(&form, tol).map_err(|e| e.to_string())?;
                println!(
                    "tol={tol:<5} n={n:<5} stat=({:+.4},{:.4}) ball={:.4} ellipse=({:.4},{:.4})",
                    stat[0], stat[1], ball.epsilon[0], ell.epsilon[0], ell.epsilon[1]
                );
            }
            ModelKind::ExponentialRate => {
                let prior = GammaParams::new(config.prior[0], config.prior[1])
                    .map_err(|e| e.to_string())?;
                let model = ExponentialModel::new(prior, n).map_err(|e| e.to_string())?;
                let stat = model.sample_stat(&config.true_theta[0], &mut rng);
                let post = model.posterior(stat[0]).map_err(|e| e.to_string())?;
                let form = re_form_exponential(&post, n, stat[0]).map_err(|e| e.to_string())?;
                let ball = calibrate_ball(&form, tol).map_err(|e| e.to_string())?;
                println!(
                    "tol={tol:<5} n={n:<5} stat={:.4} interval={:.5}",
                    stat[0], ball.epsilon[0]
                );
            }
        }
    }
    Ok(())
}

fn run_and_manifest(config: &ExperimentConfig, write_tables: bool) -> Result<bool, String> {
    let started_at = SystemTime::now();
    let start = Instant::now();
    let outcome = if write_tables {
        reproduce_tables(config).map_err(|e| e.to_string())?
    } else {
        run_cells(config).map_err(|e| e.to_string())?
    };
    std::fs::create_dir_all(&config.output_dir).map_err(|e| e.to_string())?;
    let manifest =
        RunManifest::new(config, &outcome.records, started_at, start.elapsed().as_secs_f64());
    manifest.write(&config.output_dir.join("run-manifest.json")).map_err(|e| e.to_string())?;
    render_summary(&outcome.records, std::io::stdout()).map_err(|e| e.to_string())?;
    Ok(outcome.budget_exhausted)
}

/// Compare the numeric divergence with the expansion prediction on both
/// models at small thresholds; returns false when either disagrees by more
/// than the leading-order band.
fn cmd_oracle_check(config: &ExperimentConfig) -> Result<bool, String> {
    let spec = QuadratureSpec::for_moments();
    let mut ok = true;

    let prior = NormalGamma::new(0.0, 1.0, 1.0, 1.0).unwrap();
    let model = NormalModel::new(prior, 50).unwrap();
    let stat = [0.0, 1.0];
    // the exact statistic-geometry form, not the tabulation shorthand
    let form = re_form_normal_exact(&model, stat).map_err(|e| e.to_string())?;
    let cal = calibrate_ball(&form, 1e-4).map_err(|e| e.to_string())?;
    let region = Region::ball(stat, cal.epsilon[0]).unwrap();
    let kl = kl_numeric(&model, &stat, &region, &spec).map_err(|e| e.to_string())?;
    let predicted = form.value(&[cal.epsilon[0], cal.epsilon[0]]);
    let ratio = kl / predicted;
    println!("normal      n=50  eps={:.4}  kl={kl:.3e}  predicted={predicted:.3e}  ratio={ratio:.3}", cal.epsilon[0]);
    ok &= (0.7..=1.3).contains(&ratio);

    let model = ExponentialModel::new(GammaParams::new(1.0, 1.0).unwrap(), 50).unwrap();
    let stat = [1.0];
    let form = re_form_exponential(&model.posterior(1.0).unwrap(), 50, 1.0).map_err(|e| e.to_string())?;
    let cal = calibrate_ball(&form, 1e-4).map_err(|e| e.to_string())?;
    let region = Region::ball(stat, cal.epsilon[0]).unwrap();
    let kl = kl_numeric(&model, &stat, &region, &spec).map_err(|e| e.to_string())?;
    let predicted = form.value(&[cal.epsilon[0]]);
    let ratio = kl / predicted;
    println!("exponential n=50  eps={:.4}  kl={kl:.3e}  predicted={predicted:.3e}  ratio={ratio:.3}", cal.epsilon[0]);
    ok &= (0.7..=1.3).contains(&ratio);

    let _ = config;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(
            e.kind(),
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
        ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    let config = match resolve_config(&cli) {
        Ok(config) => config,
        Err(e) => return fail(3, e),
    };

    match cli.command {
        Command::Calibrate => match cmd_calibrate(&config) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(3, e),
        },
        Command::Simulate | Command::Tables => {
            if config.model != ModelKind::Normal {
                return fail(3, "simulation cells support only the normal model");
            }
            let write = matches!(cli.command, Command::Tables);
            match run_and_manifest(&config, write) {
                Ok(false) => ExitCode::SUCCESS,
                Ok(true) => {
                    eprintln!("warning: proposal budget exhausted in at least one cell");
                    ExitCode::from(2)
                }
                Err(e) => fail(3, e),
            }
        }
        Command::Verify => {
            if !config.geometries.contains(&GeometryKind::Ball) {
                return fail(3, "verification needs the default geometry set");
            }
            let report = verify_published_rows();
            print!("{}", render(&report));
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::OracleCheck => match cmd_oracle_check(&config) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => fail(1, "quadrature disagrees with the expansion"),
            Err(e) => fail(3, e),
        },
        Command::Plot => {
            let csv = config.output_dir.join("figure2.csv");
            let svg = config.output_dir.join("figure2.svg");
            match plot_figure(&csv, &svg) {
                Ok(()) => {
                    println!("wrote {}", svg.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(3, e),
            }
        }
    }
}
