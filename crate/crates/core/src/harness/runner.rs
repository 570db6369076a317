//! Grid runner over (method, epsilon, seed) cells.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::oracle::{gen_synthetic, split_private};
use crate::budget::PrivacyBudget;
use crate::dre::{compute_weights, sample_dre, superclass_weight, train_dp_dre, WeightedPublicModel};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gan::{pretrain_public_gan, sample_gan, train_dp_latent_gan, GanConfig, LatentGan};
use crate::metrics::{evaluate, MetricsReport};
use crate::mge::{fit_dp_mge, sample_mge};
use crate::rng::SeededRng;

/// RNG streams under the master seed.
const DATA_STREAM: u64 = 0;
const CELL_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const PRETRAIN_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    /// Requested epsilon; `0` for the uniform-public baseline.
    #[serde(with = "crate::budget::inf_serde")]
    pub eps_target: f64,
    /// Epsilon reported by the accountant for the trained model; `None` when the cell failed.
    #[serde(with = "crate::budget::inf_serde::option")]
    pub eps: Option<f64>,
    pub seed: u64,
    pub metrics: Option<MetricsReport>,
    /// Sampling mass on public rows whose label is a private mode.
    pub superclass_mass: Option<f64>,
    pub wall_ms: u64,
    /// Why the cell produced no metrics.
    pub error: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Rows for `method` at requested epsilon `eps_target` (compared exactly).
    pub fn cells(&self, method: Method, eps_target: f64) -> impl Iterator<Item = &ResultRow> {
        self.rows
            .iter()
            .filter(move |r| r.method == method && (r.eps_target == eps_target))
    }

    /// Mean of `f` over the rows of one (method, epsilon) cell that produced a value.
    pub fn mean_of(&self, method: Method, eps_target: f64, f: impl Fn(&ResultRow) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = self.cells(method, eps_target).filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn mean_fid(&self, method: Method, eps_target: f64) -> Option<f64> {
        self.mean_of(method, eps_target, |r| r.metrics.as_ref().and_then(|m| m.fid))
    }

    pub fn mean_superclass(&self, method: Method, eps_target: f64) -> Option<f64> {
        self.mean_of(method, eps_target, |r| r.superclass_mass)
    }
}

struct SeedData {
    public: FeatureMatrix,
    train: FeatureMatrix,
    eval: FeatureMatrix,
    pretrained: Option<std::result::Result<LatentGan, String>>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    index: u64,
    method: Method,
    eps_target: f64,
    seed_pos: usize,
}

fn cell_list(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        let grid: Vec<f64> = if method.is_private() {
            cfg.eps_grid.clone()
        } else {
            vec![0.0]
        };
        for eps_target in grid {
            for seed_pos in 0..cfg.seeds.len() {
                cells.push(Cell {
                    index: cells.len() as u64,
                    method,
                    eps_target,
                    seed_pos,
                });
            }
        }
    }
    cells
}

fn prepare_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let data = gen_synthetic(
        &cfg.oracle,
        &mut SeededRng::new(cfg.master_seed, DATA_STREAM).split(seed),
    )?;
    let (train, eval) = split_private(
        &data.private,
        &mut SeededRng::new(cfg.master_seed, SPLIT_STREAM).split(seed),
    );
    let pretrained = cfg.methods.contains(&Method::DpGanFt).then(|| {
        let pcfg = GanConfig {
            sgd: crate::nn::DpSgdConfig {
                iters: cfg.gan.pretrain_iters,
                lr: cfg.gan.pretrain_lr,
                ..cfg.gan.gan.sgd
            },
            ..cfg.gan.gan.clone()
        };
        pretrain_public_gan(
            &data.public,
            &pcfg,
            &mut SeededRng::new(cfg.master_seed, PRETRAIN_STREAM).split(seed),
        )
        .map_err(|e| format!("public pretraining failed: {e}"))
    });
    Ok(SeedData {
        public: data.public,
        train,
        eval,
        pretrained,
    })
}

struct CellOutput {
    samples: FeatureMatrix,
    eps: f64,
    superclass_mass: Option<f64>,
    note: Option<String>,
}

fn run_method(cfg: &ExperimentConfig, cell: &Cell, data: &SeedData, rng: &mut SeededRng) -> Result<CellOutput> {
    let budget = if !cell.method.is_private() || cell.eps_target.is_infinite() || cell.eps_target >= 1e6 {
        PrivacyBudget::non_private(cfg.delta)
    } else {
        PrivacyBudget::new(cell.eps_target, cfg.delta)?
    };
    let targets: BTreeSet<u32> = cfg.oracle.private_modes.iter().copied().collect();
    let n = cfg.n_eval;
    match cell.method {
        Method::DpMge => {
            let model = fit_dp_mge(&data.train, &budget, &mut rng.split(0))?;
            Ok(CellOutput {
                samples: sample_mge(&model, n, &mut rng.split(1))?,
                eps: model.eps,
                superclass_mass: None,
                note: None,
            })
        }
        Method::DpDre => {
            let disc = train_dp_dre(&data.train, &data.public, &budget, &cfg.dre, &mut rng.split(0))?;
            let model = compute_weights(&disc, &data.public)?;
            Ok(CellOutput {
                samples: sample_dre(&model, &data.public, n, &mut rng.split(1))?,
                eps: disc.eps_achieved,
                superclass_mass: Some(superclass_weight(&model, data.public.labels(), &targets)?),
                note: None,
            })
        }
        Method::DpGanMi | Method::DpGanFt => {
            let (init, gcfg) = if cell.method == Method::DpGanFt {
                let pre = data
                    .pretrained
                    .as_ref()
                    .expect("pretraining runs whenever dp-gan-ft is configured")
                    .as_ref()
                    .map_err(|e| Error::InvalidInput(e.clone()))?;
                let mut gcfg = cfg.gan.gan.clone();
                gcfg.sgd.lr = cfg.gan.ft_lr;
                (Some(pre), gcfg)
            } else {
                (None, cfg.gan.gan.clone())
            };
            let gan = train_dp_latent_gan(&data.train, init, &budget, &gcfg, &mut rng.split(0))?;
            Ok(CellOutput {
                samples: sample_gan(&gan, n, &mut rng.split(1))?,
                eps: gan.eps_achieved,
                superclass_mass: None,
                note: gan
                    .selection_unaccounted
                    .then(|| "checkpoint selected by FID on training features (not privacy-accounted)".to_string()),
            })
        }
        Method::UniformPublic => {
            let model = WeightedPublicModel::uniform(&data.public)?;
            Ok(CellOutput {
                samples: sample_dre(&model, &data.public, n, &mut rng.split(1))?,
                eps: 0.0,
                superclass_mass: Some(superclass_weight(&model, data.public.labels(), &targets)?),
                note: None,
            })
        }
    }
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell, data: &Result<SeedData>) -> ResultRow {
    let seed = cfg.seeds[cell.seed_pos];
    let start = Instant::now();
    let mut rng = SeededRng::new(cfg.master_seed, CELL_STREAM).split(cell.index);
    let outcome = data
        .as_ref()
        .map_err(|e| Error::InvalidInput(format!("data generation failed: {e}")))
        .and_then(|data| {
            let out = run_method(cfg, cell, data, &mut rng)?;
            let report = evaluate(&data.eval, &out.samples, cfg.metrics, rng.split(2).next_seed())?;
            Ok((out, report))
        });
    let wall_ms = if cfg.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    match outcome {
        Ok((out, report)) => ResultRow {
            method: cell.method,
            eps_target: cell.eps_target,
            eps: Some(out.eps),
            seed,
            metrics: Some(report),
            superclass_mass: out.superclass_mass,
            wall_ms,
            error: None,
            note: out.note,
        },
        Err(e) => {
            log::warn!(
                "cell {} ({} eps={} seed={seed}) failed: {e}",
                cell.index,
                cell.method,
                cell.eps_target
            );
            ResultRow {
                method: cell.method,
                eps_target: cell.eps_target,
                eps: None,
                seed,
                metrics: None,
                superclass_mass: None,
                wall_ms,
                error: Some(e.to_string()),
                note: None,
            }
        }
    }
}

/// Runs every (method, epsilon, seed) cell. Cell failures are recorded in
/// the row rather than aborting the run; the result does not depend on
/// `cfg.parallel`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    let cells = cell_list(cfg);
    pool.install(|| {
        let data: Vec<Result<SeedData>> = cfg.seeds.par_iter().map(|&s| prepare_seed(cfg, s)).collect();
        let rows = cells.par_iter().map(|c| run_cell(cfg, c, &data[c.seed_pos])).collect();
        Ok(ResultTable { rows })
    })
}
