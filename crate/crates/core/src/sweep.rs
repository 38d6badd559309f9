//! Parameter sweeps scored against ground truth.

use std::collections::BTreeMap;
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluation::{frame_accuracy, AccuracyMode, GroundTruth};
use crate::features::MirrorMap;
use crate::ingest::TimeSeries;
use crate::pipeline::run_pipeline;

/// Strict and tolerant accuracy over a grid of stacking offsets (rows) and radii (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub radii: Vec<f64>,
    pub offsets: Vec<Vec<isize>>,
    pub strict: Vec<Vec<f64>>,
    pub tolerant: Vec<Vec<f64>>,
}

/// Parses `a:b:step` into the inclusive list `a, a+step, ...` up to `b`.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("range \"{spec}\" is not a:b:step")))?;
    let [a, b, step] = parts[..] else {
        return Err(Error::Config(format!("range \"{spec}\" is not a:b:step")));
    };
    if !(step > 0.0) || b < a {
        return Err(Error::Config(format!("range \"{spec}\" needs a <= b and step > 0")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    // rounded so that 0.1 + 2 * 0.1 prints as 0.3
    Ok((0..=n).map(|k| ((a + k as f64 * step) * 1e9).round() / 1e9).collect())
}

/// Parses `"-5,0,5;-10,0,10"` into offset lists.
pub fn parse_offset_sets(spec: &str) -> Result<Vec<Vec<isize>>> {
    spec.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|set| {
            set.split(',')
                .map(|v| v.trim().parse::<isize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("offset set \"{set}\" is not a comma-separated list")))
        })
        .collect()
}

fn score(
    config: &PipelineConfig,
    series: &TimeSeries,
    mirror: Option<&MirrorMap>,
    gt: &GroundTruth,
    aliases: &BTreeMap<String, String>,
) -> Result<(f64, f64)> {
    let out = run_pipeline(config, series, mirror)?;
    let fc = out.result.frame_clusters();
    Ok((
        frame_accuracy(&fc, gt, AccuracyMode::Strict, aliases)?,
        frame_accuracy(&fc, gt, AccuracyMode::Tolerant, aliases)?,
    ))
}

/// Runs the pipeline on every grid cell; all other settings come from `base`.
pub fn sweep_grid(
    base: &PipelineConfig,
    series: &TimeSeries,
    mirror: Option<&MirrorMap>,
    gt: &GroundTruth,
    radii: &[f64],
    offsets: &[Vec<isize>],
) -> Result<SweepGrid> {
    let cells: Vec<(usize, usize)> = (0..offsets.len())
        .flat_map(|o| (0..radii.len()).map(move |r| (o, r)))
        .collect();
    let scores = cells
        .par_iter()
        .map(|&(o, r)| {
            let mut cfg = base.clone();
            cfg.radius = radii[r];
            cfg.offsets = offsets[o].clone();
            score(&cfg, series, mirror, gt, &base.aliases)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grid = SweepGrid {
        radii: radii.to_vec(),
        offsets: offsets.to_vec(),
        strict: vec![vec![0.0; radii.len()]; offsets.len()],
        tolerant: vec![vec![0.0; radii.len()]; offsets.len()],
    };
    for (&(o, r), (s, t)) in cells.iter().zip(scores) {
        grid.strict[o][r] = s;
        grid.tolerant[o][r] = t;
    }
    Ok(grid)
}

/// Accuracy for each stop window.
pub fn sweep_stop_window(
    base: &PipelineConfig,
    series: &TimeSeries,
    mirror: Option<&MirrorMap>,
    gt: &GroundTruth,
    windows: &[usize],
) -> Result<Vec<(usize, f64, f64)>> {
    windows
        .par_iter()
        .map(|&w| {
            let mut cfg = base.clone();
            cfg.stop_window = w;
            score(&cfg, series, mirror, gt, &base.aliases).map(|(s, t)| (w, s, t))
        })
        .collect()
}

impl SweepGrid {
    fn label(offsets: &[isize]) -> String {
        let inner: Vec<String> = offsets.iter().map(|o| o.to_string()).collect();
        format!("[{}]", inner.join(" "))
    }

    pub fn row_labels(&self) -> Vec<String> {
        self.offsets.iter().map(|o| Self::label(o)).collect()
    }

    pub fn column_labels(&self) -> Vec<String> {
        self.radii.iter().map(|r| format!("{r:.3}")).collect()
    }

    /// Matrix CSV: one row per offset set, one column per radius.
    pub fn to_csv(&self, mode: AccuracyMode) -> String {
        let values = match mode {
            AccuracyMode::Strict => &self.strict,
            AccuracyMode::Tolerant => &self.tolerant,
        };
        let mut s = String::from("offsets");
        for r in &self.radii {
            let _ = write!(s, ",{r}");
        }
        s.push('\n');
        for (o, row) in self.offsets.iter().zip(values) {
            s.push_str(&Self::label(o));
            for v in row {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
        s
    }

    /// Share of cells within `points` accuracy points (0..100 scale) of the best cell.
    pub fn plateau_fraction(&self, mode: AccuracyMode, points: f64) -> f64 {
        let values: Vec<f64> = match mode {
            AccuracyMode::Strict => self.strict.concat(),
            AccuracyMode::Tolerant => self.tolerant.concat(),
        };
        if values.is_empty() {
            return 0.0;
        }
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        values.iter().filter(|&&v| best - v <= points / 100.0 + 1e-12).count() as f64 / values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0.1:0.3:0.1").unwrap().len(), 3);
        assert_eq!(parse_range("1:1:0.5").unwrap(), vec![1.0]);
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("x").is_err());
        assert_eq!(parse_offset_sets("-5,0,5; 0").unwrap(), vec![vec![-5, 0, 5], vec![0]]);
        assert!(parse_offset_sets("a,b").is_err());
    }
}
