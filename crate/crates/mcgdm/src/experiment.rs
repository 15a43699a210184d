//! Turns a [`Config`] into simulator runs, one per seed.

use mcgdm_core::data::{gen_rotated_domains, gen_textured_domains, DomainDataset};
use mcgdm_core::federation::{run_da, run_dg, RunOutcome, Scenario, Sequential};

use crate::config::{Config, DataConfig, Mode};
use crate::parallel::Parallel;
use crate::AppResult;

pub fn generate(cfg: &Config, seed: u64) -> AppResult<Vec<DomainDataset>> {
    let domains = match &cfg.data {
        DataConfig::RotatedMoons {
            angles,
            n_per_domain,
            noise_sigma,
            classes,
        } => gen_rotated_domains(angles.len(), angles, *n_per_domain, *noise_sigma, *classes, seed)?,
        DataConfig::Textured {
            n_domains,
            side,
            n_per_domain,
            classes,
        } => gen_textured_domains(*n_domains, *side, *n_per_domain, *classes, seed)?,
    };
    Ok(domains)
}

pub fn scenario(cfg: &Config, seed: u64) -> AppResult<Scenario> {
    let domains = generate(cfg, seed)?;
    Ok(Scenario::new(
        &domains,
        cfg.train_frac,
        cfg.arch.clone(),
        cfg.augmentation.into(),
        cfg.hp.to_hyper_params(seed),
    )?)
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: RunOutcome,
}

pub fn run_seed(cfg: &Config, seed: u64, parallel_clients: bool) -> AppResult<SeedRun> {
    let sc = scenario(cfg, seed)?;
    let sources = cfg.source_domains();
    let outcome = match (cfg.mode, parallel_clients) {
        (Mode::Dg, false) => run_dg(&sc, &sources, cfg.held_out, &Sequential)?,
        (Mode::Dg, true) => run_dg(&sc, &sources, cfg.held_out, &Parallel)?,
        (Mode::Da, false) => run_da(&sc, &sources, cfg.held_out, &Sequential)?,
        (Mode::Da, true) => run_da(&sc, &sources, cfg.held_out, &Parallel)?,
    };
    Ok(SeedRun { seed, outcome })
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
