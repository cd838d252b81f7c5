use std::path::{Path, PathBuf};

use dpm_core::geometry::median_norm;
use dpm_core::io::{write_archive, DpmArchive};
use dpm_core::synth::{perturb as add_noise, SceneSample, SceneSpec};
use rayon::prelude::*;

use crate::args::{GenerateArgs, PerturbArgs};
use crate::{load, num, usage, CliError, CliResult};

/// Stream offset separating the swapped quad's noise from the main quad's.
const SWAPPED_NOISE_SEED: u64 = 0x5357_4150;

fn batch_path(out: &Path, index: u32) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_{index:03}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{index:03}"),
    };
    out.with_file_name(name)
}

pub fn generate(a: &GenerateArgs) -> CliResult<Vec<String>> {
    let from_file = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Core(dpm_core::Error::InvalidSpec { field: "spec".into(), reason: format!("{}: {e}", path.display()) }))?;
            Some(SceneSpec::from_toml(&text)?)
        }
        None => None,
    };
    let base_seed = a.seed.unwrap_or(from_file.as_ref().map_or(0, |s| s.seed));
    if base_seed.checked_add(a.pairs as u64 - 1).is_none() {
        return usage("seed range overflows");
    }
    let lines: Vec<CliResult<String>> = (0..a.pairs)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed + i as u64;
            let (spec, source) = match (&from_file, &a.preset) {
                (Some(s), _) => (SceneSpec { seed, ..s.clone() }, "spec".to_string()),
                (None, Some(name)) => (SceneSpec::preset(name, seed)?, format!("preset:{name}")),
                (None, None) => unreachable!("clap requires --preset or --spec"),
            };
            let sample = SceneSample::generate(&spec)?;
            let dynamic = spec.objects.iter().filter(|o| o.dynamic).count();
            let mut archive = DpmArchive::new(sample.quad);
            archive.swapped = (!a.no_swapped).then_some(sample.swapped);
            archive.ground_truth = Some(sample.ground_truth);
            archive.metadata.insert("source".into(), source);
            archive.metadata.insert("seed".into(), seed.to_string());
            let path = if a.pairs == 1 { a.out.clone() } else { batch_path(&a.out, i) };
            write_archive(&archive, &path)?;
            Ok(format!(
                "generate {} {}x{} objects={} dynamic={} valid={}",
                path.display(),
                spec.width,
                spec.height,
                spec.objects.len(),
                dynamic,
                archive.quad.p11.valid_count()
            ))
        })
        .collect();
    lines.into_iter().collect()
}

pub fn perturb(a: &PerturbArgs) -> CliResult<Vec<String>> {
    let input = load(&a.input)?;
    let sigma = match (a.sigma, a.sigma_frac) {
        (Some(s), _) => s,
        (None, Some(f)) => {
            let z = median_norm(&input.quad.p11, None).ok_or_else(|| {
                CliError::Core(dpm_core::Error::DegenerateInput("P11 has no valid points".into()))
            })?;
            f * z
        }
        (None, None) => unreachable!("clap requires --sigma or --sigma-frac"),
    };
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return usage(format!("noise level must be non-negative, got {sigma}"));
    }
    let mut out = DpmArchive::new(add_noise(&input.quad, sigma, a.seed)?);
    out.swapped = match &input.swapped {
        Some(sw) => Some(add_noise(sw, sigma, a.seed ^ SWAPPED_NOISE_SEED)?),
        None => None,
    };
    out.metadata = input.metadata.clone();
    out.metadata.insert("noise_sigma".into(), format!("{sigma:e}"));
    out.metadata.insert("noise_seed".into(), a.seed.to_string());
    write_archive(&out, &a.out)?;
    Ok(vec![format!(
        "perturb {} sigma={} seed={}",
        a.out.display(),
        num(sigma),
        a.seed
    )])
}
