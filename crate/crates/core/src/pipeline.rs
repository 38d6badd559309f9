//! End-to-end orchestration and the JSON result format.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::activity::{band_width, remove_band, segment_activities, ActivitySegmentation, Interval};
use crate::clustering::{build_clusters, ClusterGraph};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{bundle_features, mirror_features, stack_features, FeatureSequence, MirrorMap};
use crate::ingest::{load_timeseries, Format, TimeSeries};
use crate::neighborhood::{compute_neighborhoods, cross_neighborhoods, sssm_export, Neighborhoods};
use crate::primitives::{
    cut_candidates, extract_all, merge_cuts, primitives_from_cuts, MotionPrimitive, PrimitiveSource,
};
use crate::render;
use crate::symmetry::{classify_symmetry, SymmetryKind, SymmetryReport};

/// Inclusive 1-based frame span as written to JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: usize,
    pub end: usize,
}

impl From<Interval> for FrameSpan {
    fn from(iv: Interval) -> Self {
        Self { start: iv.start + 1, end: iv.end + 1 }
    }
}

impl FrameSpan {
    pub fn interval(&self) -> Interval {
        Interval::new(self.start - 1, self.end - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub frames: usize,
    pub channels: usize,
    pub sample_rate: f64,
    pub radius: f64,
    pub effective_radius: f64,
    pub offsets: Vec<isize>,
    pub bundling: bool,
    pub bundling_k: usize,
    pub seed: u64,
    pub stop_window: usize,
    pub slope_limit: f64,
    pub min_span: usize,
    pub merge_distance: usize,
    pub band_frames: usize,
    pub symmetry: bool,
    pub max_neighbors: usize,
    pub neighbor_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveRecord {
    pub id: usize,
    pub start: usize,
    pub end: usize,
    /// Index into `activities`.
    pub activity: usize,
    pub cluster: usize,
    pub source: PrimitiveSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: usize,
    pub primitives: Vec<usize>,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryRecord {
    pub activity: usize,
    pub kind: SymmetryKind,
    pub original_cuts: Vec<usize>,
    pub mirrored_cuts: Vec<usize>,
    pub merged_cuts: Vec<usize>,
}

/// Everything written to `seg.json`. Frames are 1-based and inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    pub meta: Meta,
    pub activities: Vec<FrameSpan>,
    pub transitions: Vec<FrameSpan>,
    pub primitives: Vec<PrimitiveRecord>,
    pub clusters: Vec<ClusterRecord>,
    pub symmetry: Vec<SymmetryRecord>,
}

impl SegmentationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("segmentation JSON: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// 0-based primitive intervals.
    pub fn primitive_intervals(&self) -> Vec<Interval> {
        self.primitives.iter().map(|p| Interval::new(p.start - 1, p.end - 1)).collect()
    }

    /// 0-based transition intervals.
    pub fn transition_intervals(&self) -> Vec<Interval> {
        self.transitions.iter().map(FrameSpan::interval).collect()
    }

    /// Cluster of every 0-based frame, `None` outside primitives.
    pub fn frame_clusters(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.meta.frames];
        for p in &self.primitives {
            for f in p.start - 1..p.end {
                out[f] = Some(p.cluster);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineStats {
    pub neighborhood_ops: u64,
    pub region_growing_ops: u64,
    pub primitive_ops: u64,
    pub timings: Vec<(&'static str, Duration)>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub result: SegmentationResult,
    pub features: FeatureSequence,
    /// Neighbourhoods with the diagonal band removed.
    pub neighborhoods: Neighborhoods,
    /// Neighbourhoods before band removal.
    pub full_neighborhoods: Neighborhoods,
    pub segmentation: ActivitySegmentation,
    pub primitives: Vec<MotionPrimitive>,
    pub clusters: ClusterGraph,
    pub symmetry: Vec<SymmetryReport>,
    pub stats: PipelineStats,
}

fn timed<T>(stats: &mut PipelineStats, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let r = f().map_err(|e| e.in_stage(name));
    stats.timings.push((name, t.elapsed()));
    r
}

/// Stacked and (if configured) bundled features of a series.
pub fn prepare_features(config: &PipelineConfig, series: &TimeSeries) -> Result<FeatureSequence> {
    let feats = stack_features(series, &config.offsets)?;
    if config.bundling {
        Ok(bundle_features(&feats, &config.bundle_config())?.0)
    } else {
        Ok(feats)
    }
}

/// Runs every stage on an in-memory series.
pub fn run_pipeline(
    config: &PipelineConfig,
    series: &TimeSeries,
    mirror: Option<&MirrorMap>,
) -> Result<PipelineOutput> {
    config.validate()?;
    let mut stats = PipelineStats::default();
    let rate = series.sample_rate();
    let band = band_width(rate, config.band_seconds)?;

    let feats = timed(&mut stats, "features", || prepare_features(config, series))?;
    let full = timed(&mut stats, "neighborhood", || compute_neighborhoods(&feats, config.radius))?;
    stats.neighborhood_ops = full.ops();
    let nbrs = remove_band(&full, band);

    let min_activity = band_width(rate, 1.0)?;
    let (segmentation, region_ops) = timed(&mut stats, "activity_segmentation", || {
        segment_activities(&nbrs, config.stop_window, min_activity)
    })?;
    stats.region_growing_ops = region_ops;

    let params = config.primitive_params();
    let extractions = timed(&mut stats, "primitive_detection", || {
        extract_all(&segmentation.activities, &nbrs, &params)
    })?;
    stats.primitive_ops = extractions.iter().map(|e| e.ops).sum();
    let mut primitives: Vec<MotionPrimitive> =
        extractions.iter().flat_map(|e| e.primitives.iter().copied()).collect();

    let mut reports = Vec::new();
    if config.symmetry {
        let map = mirror.ok_or_else(|| Error::Config("symmetry enabled without a mirror map".into()))?;
        reports = timed(&mut stats, "symmetry", || {
            let mirrored = mirror_features(series, map)?;
            let mfeats = prepare_features(config, &mirrored)?;
            let cross = remove_band(&cross_neighborhoods(&feats, &mfeats, config.radius)?, band);
            segmentation
                .activities
                .iter()
                .zip(&extractions)
                .map(|(&act, ex)| {
                    let (cands, _, _) = cut_candidates(&cross, act, &params.filter)?;
                    let mcuts = merge_cuts(&cands, &[act.start, act.end + 1], params.merge_distance);
                    Ok(classify_symmetry(act, &ex.cuts, &mcuts, config.symmetry_tolerance))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        primitives = reports
            .iter()
            .enumerate()
            .flat_map(|(k, r)| {
                primitives_from_cuts(r.activity, k, &r.merged_cuts, |s| {
                    if r.original_cuts.contains(&s) || s == r.activity.start {
                        PrimitiveSource::Path
                    } else {
                        PrimitiveSource::Mirrored
                    }
                })
            })
            .collect();
    }

    let clusters = timed(&mut stats, "clustering", || {
        build_clusters(&primitives, &nbrs, &config.path_filter())
    })?;

    let labels = clusters.labels();
    let result = SegmentationResult {
        meta: Meta {
            tool: "motionseg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            frames: series.frames(),
            channels: series.channels(),
            sample_rate: rate,
            radius: config.radius,
            effective_radius: full.radius(),
            offsets: feats.offsets().to_vec(),
            bundling: config.bundling,
            bundling_k: config.bundling_k,
            seed: config.seed,
            stop_window: config.stop_window,
            slope_limit: config.slope_limit,
            min_span: config.min_span,
            merge_distance: config.merge_distance,
            band_frames: band,
            symmetry: config.symmetry,
            max_neighbors: full.max_set_size(),
            neighbor_entries: full.entry_count(),
        },
        activities: segmentation.activities.iter().map(|&a| a.into()).collect(),
        transitions: segmentation.transitions.iter().map(|&t| t.into()).collect(),
        primitives: primitives
            .iter()
            .enumerate()
            .map(|(id, p)| PrimitiveRecord {
                id,
                start: p.start + 1,
                end: p.end + 1,
                activity: p.activity,
                cluster: labels[id],
                source: p.source,
            })
            .collect(),
        clusters: clusters
            .clusters
            .iter()
            .enumerate()
            .map(|(id, members)| ClusterRecord {
                id,
                primitives: members.clone(),
                frames: members.iter().map(|&m| primitives[m].len()).sum(),
            })
            .collect(),
        symmetry: reports
            .iter()
            .enumerate()
            .map(|(k, r)| SymmetryRecord {
                activity: k,
                kind: r.kind,
                original_cuts: r.original_cuts.iter().map(|c| c + 1).collect(),
                mirrored_cuts: r.mirrored_cuts.iter().map(|c| c + 1).collect(),
                merged_cuts: r.merged_cuts.iter().map(|c| c + 1).collect(),
            })
            .collect(),
    };
    Ok(PipelineOutput {
        result,
        features: feats,
        neighborhoods: nbrs,
        full_neighborhoods: full,
        segmentation,
        primitives,
        clusters,
        symmetry: reports,
        stats,
    })
}

/// Loads the input CSV (and the configured mirror map) and runs the pipeline.
pub fn run_file(config: &PipelineConfig, input: impl AsRef<Path>) -> Result<PipelineOutput> {
    let series = load_timeseries(input, Format::Csv).map_err(|e| e.in_stage("ingest"))?;
    let mirror = match (&config.symmetry, &config.mirror_map) {
        (true, Some(path)) => Some(MirrorMap::load(path, series.channel_names()).map_err(|e| e.in_stage("ingest"))?),
        _ => None,
    };
    run_pipeline(config, &series, mirror.as_ref())
}

/// Writes `seg.json`, `sssm.pgm` and `timeline.svg` into `dir`.
pub fn write_outputs(output: &PipelineOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    write("seg.json", output.result.to_json().as_bytes())?;
    write("sssm.pgm", &sssm_export(&output.full_neighborhoods).to_pgm())?;
    write("timeline.svg", render::timeline_svg(&output.result).as_bytes())?;
    Ok(())
}
