use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use patchwarp::dataset::SamplerMode;
use patchwarp::pipeline::{derive_seed, emit_training_pair, write_training_pair, ColorSpace, TrainingOptions};

use crate::engine::Engine;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerChoice {
    /// Annotated poses of the loaded dataset.
    Empirical,
    /// Area-uniform upper hemisphere at the mean annotated radius.
    Hemisphere,
}

#[derive(Debug, Clone)]
pub struct EmitConfig {
    pub seed: u64,
    pub limit: Option<usize>,
    pub color_space: ColorSpace,
    pub sampler: SamplerChoice,
    pub symmetry: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchDropout {
    pub dropped: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedSample {
    pub id: String,
    pub error: String,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmitSummary {
    pub seed: u64,
    pub sampler: SamplerChoice,
    pub color_space: ColorSpace,
    pub visibility_threshold: f64,
    pub requested: usize,
    pub emitted: usize,
    pub failed: Vec<FailedSample>,
    /// Per patch: how many emitted pairs lack it.
    pub patch_dropout: BTreeMap<String, PatchDropout>,
}

fn sampler_mode(engine: &Engine, choice: SamplerChoice) -> SamplerMode {
    let poses = engine.dataset.poses();
    let radius = if poses.is_empty() {
        140.0
    } else {
        poses.iter().map(|p| p.radius()).sum::<f64>() / poses.len() as f64
    };
    match choice {
        SamplerChoice::Empirical => SamplerMode::Empirical {
            poses,
            fallback_radius: radius,
        },
        SamplerChoice::Hemisphere => SamplerMode::UniformHemisphere { radius },
    }
}

fn safe_dir_name(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\']) && id != "summary.json"
}

/// Emits one training pair per sample (in id order, at most `limit`) into
/// `out/<sample id>/` and writes `out/summary.json`. Sample `i` uses the
/// seed derived from `(seed, i)`, so output does not depend on threading.
pub fn emit_pairs(engine: &Engine, out: &Path, config: &EmitConfig) -> Result<EmitSummary, CliError> {
    fs::create_dir_all(out)?;
    let mut options = TrainingOptions::new(sampler_mode(engine, config.sampler));
    options.visibility = engine.options.visibility;
    options.symmetry = config.symmetry;
    let samples = &engine.dataset.samples[..config.limit.unwrap_or(usize::MAX).min(engine.dataset.samples.len())];

    let results: Vec<Result<Vec<String>, String>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            if !safe_dir_name(&sample.id) {
                return Err(format!("sample id {:?} is not a valid directory name", sample.id));
            }
            let cad = engine
                .dataset
                .catalog
                .get(sample.cad_id)
                .ok_or_else(|| format!("no cad {}", sample.cad_id))?;
            let pair = emit_training_pair(sample, cad, &engine.spec, derive_seed(config.seed, i as u64), &options)
                .map_err(|e| e.to_string())?;
            write_training_pair(&pair, &out.join(&sample.id), config.color_space).map_err(|e| e.to_string())?;
            Ok(pair.dropped_patches)
        })
        .collect();

    let mut dropped: BTreeMap<String, usize> = engine.spec.patch_names().map(|n| (n.to_string(), 0)).collect();
    let mut failed = Vec::new();
    let mut emitted = 0;
    for (sample, result) in samples.iter().zip(results) {
        match result {
            Ok(names) => {
                emitted += 1;
                for n in names {
                    *dropped.entry(n).or_default() += 1;
                }
            }
            Err(error) => {
                log::warn!("sample {}: {error}", sample.id);
                failed.push(FailedSample {
                    id: sample.id.clone(),
                    error,
                });
            }
        }
    }
    let summary = EmitSummary {
        seed: config.seed,
        sampler: config.sampler,
        color_space: config.color_space,
        visibility_threshold: engine.options.visibility.threshold,
        requested: samples.len(),
        emitted,
        failed,
        patch_dropout: dropped
            .into_iter()
            .map(|(name, n)| {
                let rate = if emitted == 0 { 0.0 } else { n as f64 / emitted as f64 };
                (name, PatchDropout { dropped: n, rate })
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::new(crate::error::ErrorKind::Io, e.to_string()))?;
    fs::write(out.join("summary.json"), text + "\n")?;
    Ok(summary)
}
