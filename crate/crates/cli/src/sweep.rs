//! One-dimensional parameter sweeps with repeats.

use std::path::Path;

use anyhow::{anyhow, bail, Result};
use augdfa::{Real, RngStream};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Model, Precision, SweepAxis, SweepValue};
use crate::output::{fmt_f64, CsvOut};
use crate::run::{config_eta, prepare, run_on, Prepared};

pub const SWEEP_HEADER: [&str; 6] = ["axis_value", "eta", "repeat", "final_test_error", "mean_angle", "diverged"];

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub point: usize,
    pub axis_value: SweepValue,
    pub eta: Option<f64>,
    pub repeat: usize,
    pub final_test_error: f64,
    pub mean_angle: Option<f64>,
    pub diverged: bool,
    pub error: Option<String>,
}

/// The configuration of one sweep point: the axis value applied, the
/// sweep cleared.
pub fn point_config(base: &ExperimentConfig, value: &SweepValue) -> Result<ExperimentConfig> {
    let axis = base.sweep_axis.ok_or_else(|| anyhow!("no `sweep_axis` set"))?;
    let mut cfg = base.clone();
    cfg.sweep_axis = None;
    cfg.sweep_values.clear();
    let num = || match value {
        SweepValue::Num(v) => Ok(*v),
        SweepValue::Text(s) => Err(anyhow!("invalid value for `sweep_values`: '{s}' is not a number")),
    };
    match axis {
        SweepAxis::EtaTheta => {
            let theta = num()?;
            match cfg.model {
                Model::Reservoir => cfg.phi_alt = theta,
                _ => cfg.g = Some(format!("shifted_sin:{theta}")),
            }
        }
        SweepAxis::Layers => {
            let v = num()?;
            if v < 1.0 || v.fract() != 0.0 {
                bail!("invalid value for `sweep_values`: layer count {v} is not a positive integer");
            }
            let n = v as usize;
            match cfg.model {
                Model::Ffnet | Model::Elm => {
                    let width = cfg.hidden.first().copied().unwrap_or(800);
                    cfg.hidden = vec![width; n];
                    if let Some(fr) = cfg.frozen.as_mut() {
                        fr.retain(|&i| i < n);
                    }
                }
                Model::Reservoir | Model::Unitary => cfg.layers = n,
            }
        }
        SweepAxis::Epsilon => cfg.epsilon = num()?,
        SweepAxis::G => match value {
            SweepValue::Text(s) => cfg.g = Some(s.clone()),
            SweepValue::Num(_) => bail!("invalid value for `sweep_values`: the g axis takes g specs as strings"),
        },
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Seed of repeat `r` at sweep point `p`.
pub fn point_seed(seed: u64, point: usize, repeat: usize) -> u64 {
    RngStream::new(seed).derive(point as u64).derive(repeat as u64).next_u64()
}

fn sweep_on<T: Real>(base: &ExperimentConfig, data: &Prepared<T>, out: Option<&Path>) -> Vec<SweepRow> {
    let jobs: Vec<(usize, usize)> = (0..base.sweep_values.len())
        .flat_map(|p| (0..base.repeats).map(move |r| (p, r)))
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let value = base.sweep_values[p].clone();
            let mut row = SweepRow {
                point: p,
                axis_value: value.clone(),
                eta: None,
                repeat: r,
                final_test_error: f64::NAN,
                mean_angle: None,
                diverged: false,
                error: None,
            };
            let result = point_config(base, &value).and_then(|mut cfg| {
                cfg.seed = point_seed(base.seed, p, r);
                row.eta = config_eta(&cfg, &cfg.nonlinearity()?);
                let dir = out.map(|o| o.join("runs").join(format!("p{p:03}_r{r:02}")));
                run_on(&cfg, data, None, dir.as_deref())
            });
            match result {
                Ok(o) => {
                    row.final_test_error = 1.0 - o.final_test_acc();
                    row.mean_angle = o.final_mean_angle();
                    row.diverged = o.history.diverged;
                }
                Err(e) => row.error = Some(format!("{e:#}")),
            }
            row
        })
        .collect();
    rows.sort_by_key(|r| (r.point, r.repeat));
    rows
}

/// Runs every point and repeat in parallel on `jobs` threads and writes
/// `sweep.csv` to `out`. Failed runs are reported after the rest finish.
pub fn run_sweep(base: &ExperimentConfig, out: Option<&Path>, jobs: usize) -> Result<Vec<SweepRow>> {
    base.validate()?;
    if base.sweep_axis.is_none() {
        bail!("invalid value for `sweep_axis`: a sweep needs an axis");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let rows = pool.install(|| -> Result<Vec<SweepRow>> {
        Ok(match base.precision {
            Precision::F32 => sweep_on(base, &prepare::<f32>(base)?, out),
            Precision::F64 => sweep_on(base, &prepare::<f64>(base)?, out),
        })
    })?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut csv = CsvOut::create(&dir.join("sweep.csv"), &SWEEP_HEADER)?;
        for r in &rows {
            csv.row(&[
                r.axis_value.to_string(),
                r.eta.map(fmt_f64).unwrap_or_default(),
                r.repeat.to_string(),
                fmt_f64(r.final_test_error),
                r.mean_angle.map(fmt_f64).unwrap_or_default(),
                r.diverged.to_string(),
            ])?;
        }
        csv.finish()?;
    }
    let failed: Vec<String> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("point {} ({}) repeat {}: {e}", r.point, r.axis_value, r.repeat)))
        .collect();
    if !failed.is_empty() {
        bail!("{} of {} sweep runs failed:\n{}", failed.len(), rows.len(), failed.join("\n"));
    }
    Ok(rows)
}
