//! Particle swarm search over Fourier coefficients of `g`.

use rayon::prelude::*;

use crate::activations::{random_fourier, FourierCoeffs};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct SwarmConfig {
    /// Number of evaluation rounds, the initial one included.
    pub generations: usize,
    pub particles: usize,
    pub order: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub velocity_clamp: f64,
    pub seed: u64,
    /// Evaluate a generation's particles on the rayon pool.
    pub parallel: bool,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            generations: 20,
            particles: 128,
            order: crate::activations::FOURIER_ORDER,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            velocity_clamp: 0.5,
            seed: 0,
            parallel: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub position: FourierCoeffs,
    pub velocity: Vec<f64>,
    pub best_position: FourierCoeffs,
    pub best_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best score seen so far.
    pub best_score: f64,
    /// Mean over this generation's finite scores (NaN if none).
    pub mean_score: f64,
    pub best_coeffs: FourierCoeffs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsoResult {
    pub best: FourierCoeffs,
    pub best_score: f64,
    pub history: Vec<GenerationRecord>,
    pub particles: Vec<Particle>,
}

fn evaluate<F>(objective: &F, positions: &[FourierCoeffs], parallel: bool) -> Vec<f64>
where
    F: Fn(&FourierCoeffs) -> f64 + Sync,
{
    let clean = |s: f64| if s.is_nan() { f64::INFINITY } else { s };
    if parallel {
        positions.par_iter().map(|p| clean(objective(p))).collect()
    } else {
        positions.iter().map(|p| clean(objective(p))).collect()
    }
}

fn mean_finite(scores: &[f64]) -> f64 {
    let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    }
}

/// Minimizes `objective`; NaN scores count as `+inf`. `on_generation` sees
/// each record as it is produced.
pub fn pso_optimize<F>(
    objective: F,
    cfg: &SwarmConfig,
    mut on_generation: impl FnMut(&GenerationRecord),
) -> Result<PsoResult>
where
    F: Fn(&FourierCoeffs) -> f64 + Sync,
{
    if cfg.generations == 0 || cfg.particles == 0 {
        return Err(Error::InvalidArgument(format!(
            "swarm needs at least one generation and one particle, got {} and {}",
            cfg.generations, cfg.particles
        )));
    }
    if !(cfg.velocity_clamp > 0.0) {
        return Err(Error::InvalidArgument("velocity_clamp must be positive".into()));
    }
    let dims = 2 * cfg.order + 1;
    let root = RngStream::new(cfg.seed);
    let mut init = root.derive(0);
    let mut moves = root.derive(1);
    let positions: Vec<FourierCoeffs> = (0..cfg.particles).map(|_| random_fourier(&mut init, cfg.order)).collect();
    let scores = evaluate(&objective, &positions, cfg.parallel);
    let mut swarm: Vec<Particle> = positions
        .into_iter()
        .zip(&scores)
        .map(|(p, &s)| Particle {
            velocity: (0..dims).map(|_| init.uniform(-0.1, 0.1)).collect(),
            best_position: p.clone(),
            position: p,
            best_score: s,
        })
        .collect();
    let mut g_idx = 0;
    for (i, p) in swarm.iter().enumerate() {
        if p.best_score < swarm[g_idx].best_score {
            g_idx = i;
        }
    }
    let mut best = swarm[g_idx].best_position.clone();
    let mut best_score = swarm[g_idx].best_score;
    let mut history = Vec::with_capacity(cfg.generations);
    let record = GenerationRecord {
        generation: 0,
        best_score,
        mean_score: mean_finite(&scores),
        best_coeffs: best.clone(),
    };
    on_generation(&record);
    history.push(record);

    for generation in 1..cfg.generations {
        let gbest = best.to_flat();
        for p in &mut swarm {
            let x = p.position.to_flat();
            let pb = p.best_position.to_flat();
            let mut next = x.clone();
            for d in 0..dims {
                let (r1, r2) = (moves.unit(), moves.unit());
                let v = cfg.inertia * p.velocity[d]
                    + cfg.cognitive * r1 * (pb[d] - x[d])
                    + cfg.social * r2 * (gbest[d] - x[d]);
                p.velocity[d] = v.clamp(-cfg.velocity_clamp, cfg.velocity_clamp);
                next[d] += p.velocity[d];
            }
            // an all-zero move keeps the old position
            if let Ok(c) = FourierCoeffs::from_flat(&next).and_then(FourierCoeffs::normalized) {
                p.position = c;
            }
        }
        let positions: Vec<FourierCoeffs> = swarm.iter().map(|p| p.position.clone()).collect();
        let scores = evaluate(&objective, &positions, cfg.parallel);
        for (p, &s) in swarm.iter_mut().zip(&scores) {
            if s < p.best_score {
                p.best_score = s;
                p.best_position = p.position.clone();
            }
            if s < best_score {
                best_score = s;
                best = p.position.clone();
            }
        }
        let record = GenerationRecord {
            generation,
            best_score,
            mean_score: mean_finite(&scores),
            best_coeffs: best.clone(),
        };
        on_generation(&record);
        history.push(record);
    }
    Ok(PsoResult {
        best,
        best_score,
        history,
        particles: swarm,
    })
}
