//! Settings resolution: defaults, then the TOML file, then env/flags.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use vid2trace_core::localization::{LocModelConfig, Variant};
use vid2trace_core::pipeline::PipelineConfig;
use vid2trace_core::segmentation::{FeatureKind, Metric};

use crate::{ClassifyArgs, GlobalArgs, ModelArgs, SegArgs};

pub fn load_file(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse(text: &str) -> Result<PipelineConfig> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| anyhow!("{}: {}", e.path(), e.inner().message()))
}

/// Base settings for every command.
pub fn base(global: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &global.config {
        Some(p) => load_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

pub fn apply_seg(cfg: &mut PipelineConfig, a: &SegArgs) -> Result<()> {
    if let Some(f) = &a.feature {
        cfg.segmentation.feature = f.parse::<FeatureKind>().map_err(|e| anyhow!("--feature: {e}"))?;
    }
    if let Some(m) = &a.metric {
        cfg.segmentation.metric = m.parse::<Metric>().map_err(|e| anyhow!("--metric: {e}"))?;
    }
    if let Some(n) = a.min_stable {
        cfg.segmentation.min_stable_frames = n;
    }
    if let Some(d) = a.divisor {
        cfg.segmentation.spike_divisor = d;
    }
    Ok(())
}

pub fn apply_cls(cfg: &mut PipelineConfig, a: &ClassifyArgs) {
    if let Some(n) = a.min_comoving {
        cfg.classifier.min_comoving_texts = n;
    }
}

/// Parse `HEIGHTxWIDTH`.
pub fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| anyhow!("expected HEIGHTxWIDTH, got {s:?}"))?;
    let h: usize = h.trim().parse().with_context(|| format!("bad height in {s:?}"))?;
    let w: usize = w.trim().parse().with_context(|| format!("bad width in {s:?}"))?;
    if h == 0 || w == 0 {
        bail!("dimensions must be positive, got {s:?}");
    }
    Ok((h, w))
}

pub fn apply_model(model: &mut LocModelConfig, a: &ModelArgs) -> Result<()> {
    if let Some(v) = &a.variant {
        model.variant = v.parse::<Variant>().map_err(|e| anyhow!("--variant: {e}"))?;
    }
    if let Some(k) = a.k {
        model.k = k;
    }
    if let Some(d) = &a.dims {
        (model.height, model.width) = parse_dims(d)?;
    }
    Ok(())
}

pub fn validated(cfg: PipelineConfig) -> Result<PipelineConfig> {
    cfg.validate().map_err(|e| anyhow!("invalid configuration: {e}"))?;
    Ok(cfg)
}
