//! Particle swarm search over Fourier feedback nonlinearities.

use std::path::Path;

use anyhow::{Context, Result};
use augdfa::activations::{eta_for, Activation, FourierCoeffs, Nonlinearity};
use augdfa::gsearch::{pso_optimize, GenerationRecord, PsoResult, SwarmConfig};
use augdfa::Real;
use serde_json::json;

use crate::config::{ExperimentConfig, Precision};
use crate::output::{fmt_f64, CsvOut};
use crate::run::{prepare, run_on, Prepared};

pub const PSO_HEADER: [&str; 4] = ["generation", "best_score", "mean_score", "best_coeffs"];

pub fn swarm_config(cfg: &ExperimentConfig, parallel: bool) -> SwarmConfig {
    SwarmConfig {
        generations: cfg.pso_generations,
        particles: cfg.pso_particles,
        order: cfg.pso_order,
        inertia: cfg.pso_inertia,
        cognitive: cfg.pso_cognitive,
        social: cfg.pso_social,
        velocity_clamp: cfg.pso_velocity_clamp,
        seed: cfg.seed,
        parallel,
    }
}

fn coeff_field(c: &FourierCoeffs) -> String {
    c.to_flat().iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(";")
}

/// Test error after training with `g` replaced by the series; failed or
/// diverged runs score NaN, which the swarm treats as worst.
fn objective_on<T: Real>(cfg: &ExperimentConfig, data: &Prepared<T>, c: &FourierCoeffs) -> f64 {
    let g = Nonlinearity::Plain(Activation::Fourier(c.clone()));
    match run_on(cfg, data, Some(g), None) {
        Ok(o) if !o.history.diverged => 1.0 - o.final_test_acc(),
        _ => f64::NAN,
    }
}

fn search_on<T: Real>(
    cfg: &ExperimentConfig,
    data: &Prepared<T>,
    parallel: bool,
    on_generation: impl FnMut(&GenerationRecord),
) -> Result<PsoResult> {
    Ok(pso_optimize(|c| objective_on(cfg, data, c), &swarm_config(cfg, parallel), on_generation)?)
}

/// Runs the search on `jobs` threads, writing `pso.csv` and `summary.json`
/// to `out` when given.
pub fn run_pso(cfg: &ExperimentConfig, out: Option<&Path>, jobs: usize) -> Result<PsoResult> {
    cfg.validate()?;
    let mut csv = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Some(CsvOut::create(&dir.join("pso.csv"), &PSO_HEADER)?)
        }
        None => None,
    };
    let mut write_err = None;
    let on_generation = |r: &GenerationRecord| {
        if let Some(csv) = csv.as_mut() {
            let row = [
                r.generation.to_string(),
                fmt_f64(r.best_score),
                fmt_f64(r.mean_score),
                coeff_field(&r.best_coeffs),
            ];
            if let Err(e) = csv.row(&row) {
                write_err.get_or_insert(e);
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let parallel = jobs > 1;
    let result = pool.install(|| match cfg.precision {
        Precision::F32 => search_on(cfg, &prepare::<f32>(cfg)?, parallel, on_generation),
        Precision::F64 => search_on(cfg, &prepare::<f64>(cfg)?, parallel, on_generation),
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    if let Some(dir) = out {
        let f = cfg.activation()?;
        let best_g = Nonlinearity::Plain(Activation::Fourier(result.best.clone()));
        let summary = json!({
            "best_score": result.best_score,
            "best_coeffs": result.best.to_flat(),
            "best_g": best_g.to_string(),
            "eta_best": eta_for(&f, &best_g).ok(),
            "generations": result.history.len(),
            "config": cfg,
        });
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")
            .context("writing summary.json")?;
    }
    Ok(result)
}
