//! `dpfeat` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dpfeat::accountant::{calibrate_sigma, default_orders, orders_up_to};
use dpfeat::dre::{compute_weights, sample_dre, train_dp_dre, Discriminator, DreConfig, WeightedPublicModel};
use dpfeat::features::{load_features, save_features};
use dpfeat::gan::{pretrain_public_gan, sample_gan, train_dp_latent_gan, GanConfig, LatentGan};
use dpfeat::harness::{emit_report, gen_synthetic, run_experiment, ExperimentConfig, ReportFormat};
use dpfeat::metrics::{evaluate, MetricSet};
use dpfeat::mge::{fit_dp_mge, sample_mge, GaussianModel};
use dpfeat::nn::{DpSgdConfig, PenaltyStyle};
use dpfeat::{Error, FeatureFormat, FeatureMatrix, PrivacyBudget, Result, SeededRng};

#[derive(Parser)]
#[command(
    name = "dpfeat",
    version,
    about = "Differentially private feature-distribution modeling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Fid,
    Prd,
    Ndb,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum GpStyle {
    Literal,
    Standard,
}

fn parse_eps(s: &str) -> std::result::Result<f64, String> {
    dpfeat::budget::parse_epsilon(s).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Noise multiplier for DP-SGD with Poisson sampling rate q over `steps` rounds.
    Calibrate {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        steps: u64,
        /// Use every integer Renyi order from 2 to this value instead of the default grid.
        #[arg(long)]
        grid_max: Option<u32>,
    },
    /// Private diagonal-Gaussian fit.
    FitMge {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_eps)]
        eps: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// DP-SGD training of the density-ratio discriminator.
    TrainDre {
        #[arg(long = "priv")]
        private: PathBuf,
        #[arg(long = "pub")]
        public: PathBuf,
        #[arg(long, value_parser = parse_eps)]
        eps: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long, default_value_t = 10_000)]
        iters: u64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 1.0)]
        clip: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw feature vectors from a saved model (Gaussian, discriminator, weights or GAN).
    Sample {
        #[arg(long)]
        model: PathBuf,
        /// Public pool; required for discriminator and weight models.
        #[arg(long = "pub")]
        public: Option<PathBuf>,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// DP latent-GAN training, optionally from a public-pretrained initialization.
    TrainGan {
        #[arg(long = "priv")]
        private: PathBuf,
        #[arg(long)]
        pretrain_pub: Option<PathBuf>,
        #[arg(long, value_parser = parse_eps)]
        eps: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, default_value_t = 25)]
        zdim: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 1000)]
        iters: u64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 1.0)]
        clip: f64,
        #[arg(long, value_enum, default_value_t = GpStyle::Literal)]
        gp_style: GpStyle,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// FID, PRD and NDB of a generated set against a reference set.
    Evaluate {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        fake: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::All)]
        metric: MetricArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a method x epsilon x seed grid from an INI config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Write the synthetic public and private feature sets of one seed.
    GenSynthetic {
        /// Experiment config whose [oracle] section is used; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "pub")]
        public: PathBuf,
        #[arg(long = "priv")]
        private: PathBuf,
    },
}

fn budget(eps: f64, delta: f64) -> Result<PrivacyBudget> {
    if eps.is_infinite() {
        Ok(PrivacyBudget::non_private(delta))
    } else {
        PrivacyBudget::new(eps, delta)
    }
}

fn load(path: &Path) -> Result<FeatureMatrix> {
    load_features(path, FeatureFormat::from_path(path))
}

fn save(m: &FeatureMatrix, path: &Path) -> Result<()> {
    save_features(m, path, FeatureFormat::from_path(path))
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn require_pub(public: Option<&PathBuf>) -> Result<FeatureMatrix> {
    let p = public.ok_or_else(|| Error::InvalidInput("this model samples from a public pool; pass --pub".into()))?;
    load(p)
}

fn sample(model: &Path, public: Option<&PathBuf>, k: usize, seed: u64) -> Result<FeatureMatrix> {
    let value = read_json(model)?;
    let mut rng = SeededRng::new(seed, 0);
    let has = |key: &str| value.get(key).is_some();
    if has("mu") {
        let m: GaussianModel = serde_json::from_value(value)?;
        sample_mge(&m, k, &mut rng)
    } else if has("generator") {
        let g: LatentGan = serde_json::from_value(value)?;
        sample_gan(&g, k, &mut rng)
    } else if has("network") {
        let disc: Discriminator = serde_json::from_value(value)?;
        let pool = require_pub(public)?;
        sample_dre(&compute_weights(&disc, &pool)?, &pool, k, &mut rng)
    } else if has("weights") {
        let w: WeightedPublicModel = serde_json::from_value(value)?;
        sample_dre(&w, &require_pub(public)?, k, &mut rng)
    } else {
        Err(Error::InvalidInput(format!(
            "{}: unrecognized model file",
            model.display()
        )))
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Calibrate {
            eps,
            delta,
            q,
            steps,
            grid_max,
        } => {
            let orders = grid_max.map(orders_up_to).unwrap_or_else(default_orders);
            let cal = calibrate_sigma(eps, delta, q, steps, &orders)?;
            write_json(
                &serde_json::json!({"sigma": cal.sigma, "eps_achieved": cal.eps_achieved, "alpha_star": cal.alpha_star}),
                None,
            )?;
        }
        Command::FitMge {
            input,
            eps,
            delta,
            seed,
            out,
        } => {
            let model = fit_dp_mge(&load(&input)?, &budget(eps, delta)?, &mut SeededRng::new(seed, 0))?;
            write_json(&model, Some(&out))?;
        }
        Command::TrainDre {
            private,
            public,
            eps,
            delta,
            width,
            iters,
            batch,
            lr,
            clip,
            seed,
            out,
        } => {
            let cfg = DreConfig {
                width,
                sgd: DpSgdConfig {
                    iters,
                    lr,
                    batch,
                    clip,
                    seed,
                },
                ..DreConfig::default()
            };
            let disc = train_dp_dre(
                &load(&private)?,
                &load(&public)?,
                &budget(eps, delta)?,
                &cfg,
                &mut SeededRng::new(seed, 0),
            )?;
            write_json(&disc, Some(&out))?;
        }
        Command::Sample {
            model,
            public,
            k,
            seed,
            out,
        } => save(&sample(&model, public.as_ref(), k, seed)?, &out)?,
        Command::TrainGan {
            private,
            pretrain_pub,
            eps,
            delta,
            zdim,
            width,
            iters,
            batch,
            lr,
            clip,
            gp_style,
            seed,
            out,
        } => {
            let cfg = GanConfig {
                z_dim: zdim,
                width,
                sgd: DpSgdConfig {
                    iters,
                    lr,
                    batch,
                    clip,
                    seed,
                },
                penalty: match gp_style {
                    GpStyle::Literal => PenaltyStyle::Literal,
                    GpStyle::Standard => PenaltyStyle::Standard { lambda: 10.0 },
                },
                ..GanConfig::default()
            };
            let root = SeededRng::new(seed, 0);
            let init = pretrain_pub
                .map(|p| pretrain_public_gan(&load(&p)?, &cfg, &mut root.split(0)))
                .transpose()?;
            let gan = train_dp_latent_gan(
                &load(&private)?,
                init.as_ref(),
                &budget(eps, delta)?,
                &cfg,
                &mut root.split(1),
            )?;
            write_json(&gan, Some(&out))?;
        }
        Command::Evaluate {
            real,
            fake,
            metric,
            seed,
            out,
        } => {
            let which = match metric {
                MetricArg::All => MetricSet::ALL,
                m => MetricSet {
                    fid: matches!(m, MetricArg::Fid),
                    prd: matches!(m, MetricArg::Prd),
                    ndb: matches!(m, MetricArg::Ndb),
                },
            };
            let report = evaluate(&load(&real)?, &load(&fake)?, which, seed)?;
            write_json(&report, out.as_deref())?;
        }
        Command::Experiment { config, out, parallel } => {
            let mut cfg = ExperimentConfig::from_ini_file(&config)?;
            if let Some(p) = parallel {
                cfg.parallel = p;
            }
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let table = run_experiment(&cfg)?;
            emit_report(&table, out.join("results.json"), ReportFormat::Json)?;
            emit_report(&table, out.join("results.csv"), ReportFormat::Csv)?;
            let failed = table.failed();
            eprintln!(
                "{} cells, {failed} failed; reports in {}",
                table.rows.len(),
                out.display()
            );
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::GenSynthetic {
            config,
            seed,
            public,
            private,
        } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::from_ini_file(p)?,
                None => ExperimentConfig::default(),
            };
            let data = gen_synthetic(&cfg.oracle, &mut SeededRng::new(seed, 0))?;
            save(&data.public, &public)?;
            save(&data.private, &private)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
