//! Pipeline configuration: a flat TOML file plus `key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::BundleConfig;
use crate::primitives::{PathFilter, PrimitiveParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Generalised search radius `R`.
    pub radius: f64,
    /// Temporal stacking offsets in frames.
    pub offsets: Vec<isize>,
    pub bundling: bool,
    /// Neighbours per frame for bundling.
    pub bundling_k: usize,
    /// Seed for all randomness.
    pub seed: u64,
    /// Region growing stops after this many scan lines without new neighbours.
    pub stop_window: usize,
    /// Slope limit ν of warping paths.
    pub slope_limit: f64,
    /// Minimum path span in frames.
    pub min_span: usize,
    /// Cut candidates closer than this are merged.
    pub merge_distance: usize,
    /// Half-width of the removed diagonal band, in seconds.
    pub band_seconds: f64,
    pub symmetry: bool,
    /// Mirror map CSV, relative paths resolved against the config file.
    pub mirror_map: Option<PathBuf>,
    /// Frames within which original and mirrored cuts count as the same cut.
    pub symmetry_tolerance: usize,
    /// Ground-truth label aliases applied before scoring.
    pub aliases: BTreeMap<String, String>,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            radius: 0.3,
            offsets: vec![-5, 0, 5],
            bundling: false,
            bundling_k: 64,
            seed: 0,
            stop_window: 8,
            slope_limit: 2.0,
            min_span: 5,
            merge_distance: 5,
            band_seconds: 1.0,
            symmetry: false,
            mirror_map: None,
            symmetry_tolerance: 5,
            aliases: BTreeMap::new(),
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; a relative `mirror_map` is resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(map), Some(dir)) = (&cfg.mirror_map, path.parent()) {
            if map.is_relative() {
                cfg.mirror_map = Some(dir.join(map));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Applies a `key=value` override. Values are parsed as TOML, falling back to a string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override \"{assignment}\" is not key=value")))?;
        let key = key.trim();
        let value = value.trim();
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut table = toml::Table::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        if let Some((section, field)) = key.split_once('.') {
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => {
                    t.insert(field.to_string(), parsed);
                }
                _ => return Err(Error::Config(format!("\"{section}\" is not a table"))),
            }
        } else {
            table.insert(key.to_string(), parsed);
        }
        let updated: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return fail(format!("radius must be positive, got {}", self.radius));
        }
        if self.offsets.is_empty() || !self.offsets.contains(&0) {
            return fail("offsets must be non-empty and contain 0".into());
        }
        if self.bundling_k < 2 {
            return fail(format!("bundling_k must be at least 2, got {}", self.bundling_k));
        }
        if self.stop_window == 0 {
            return fail("stop_window must be at least 1".into());
        }
        if !(self.slope_limit > 1.0) || !self.slope_limit.is_finite() {
            return fail(format!("slope_limit must exceed 1, got {}", self.slope_limit));
        }
        if self.min_span == 0 {
            return fail("min_span must be at least 1".into());
        }
        if !(self.band_seconds >= 0.0) || !self.band_seconds.is_finite() {
            return fail(format!("band_seconds must be non-negative, got {}", self.band_seconds));
        }
        Ok(())
    }

    pub fn bundle_config(&self) -> BundleConfig {
        BundleConfig {
            k: self.bundling_k,
            seed: self.seed,
            ..BundleConfig::default()
        }
    }

    pub fn path_filter(&self) -> PathFilter {
        PathFilter {
            min_span: self.min_span,
            slope_limit: self.slope_limit,
        }
    }

    pub fn primitive_params(&self) -> PrimitiveParams {
        PrimitiveParams {
            filter: self.path_filter(),
            merge_distance: self.merge_distance,
        }
    }
}
