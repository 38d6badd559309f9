use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use motionseg::config::PipelineConfig;
use motionseg::evaluation::{evaluate, frame_accuracy, AccuracyMode, GroundTruth};
use motionseg::features::MirrorMap;
use motionseg::ingest::{load_timeseries, Format, TimeSeries};
use motionseg::neighborhood::{compute_neighborhoods, sssm_export, GrayImage};
use motionseg::pipeline::{prepare_features, run_pipeline, write_outputs, PipelineOutput, SegmentationResult};
use motionseg::render::{heatmap_svg, histogram_svg, timeline_svg};
use motionseg::sweep::{parse_offset_sets, parse_range, sweep_grid, sweep_stop_window};
use motionseg::synth::{generate, FixtureKind};

/// Unsupervised segmentation of motion time series into activities and motion primitives.
#[derive(Parser)]
#[command(name = "motionseg", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a trial and write seg.json, sssm.pgm, sssm.png and timeline.svg.
    Segment(RunArgs),
    /// Segment a trial and print its primitive clusters.
    Cluster(RunArgs),
    /// Score a segmentation against ground truth.
    Eval(EvalArgs),
    /// Accuracy over a grid of radii and stacking offsets.
    Sweep(SweepArgs),
    /// Render a stored segmentation (and optionally its SSSM).
    Render(RenderArgs),
    /// Write a synthetic fixture trial.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set radius=0.25`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for o in &self.overrides {
            cfg.set(o)?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Trial CSV.
    #[arg(long)]
    input: PathBuf,
    /// Output directory (defaults to the configured output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    Tolerant,
}

impl From<Mode> for AccuracyMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => AccuracyMode::Strict,
            Mode::Tolerant => AccuracyMode::Tolerant,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// seg.json written by `segment`.
    #[arg(long)]
    segmentation: PathBuf,
    /// Ground truth: `start_frame,end_frame,label` or `keyframe,label` rows.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Trial CSV, needed for the cluster variance.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Configuration supplying label aliases.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the key-point histogram as SVG.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Radii as `a:b:step`.
    #[arg(long)]
    radii: String,
    /// Offset sets separated by `;`, e.g. `"0;-5,0,5"`. Defaults to the configured offsets.
    #[arg(long, allow_hyphen_values = true)]
    offsets: Option<String>,
    /// Stop windows to sweep separately, comma separated.
    #[arg(long, value_delimiter = ',')]
    windows: Vec<usize>,
    /// Output directory for CSV matrices and heat maps.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    segmentation: PathBuf,
    /// Timeline SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Trial CSV; with `--sssm`, recomputes the SSSM using the stored parameters.
    #[arg(long, requires = "sssm")]
    input: Option<PathBuf>,
    /// SSSM output image (.png or .pgm).
    #[arg(long, requires = "input")]
    sssm: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// fixA, fixB, gait, symmetric, asymmetric, aba, circle or drift.
    #[arg(long)]
    fixture: String,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trial CSV.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth CSV.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Mirror map CSV (gait-type fixtures only).
    #[arg(long)]
    mirror: Option<PathBuf>,
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_png(image: &GrayImage, path: &Path) -> Result<()> {
    let buf = image::GrayImage::from_raw(image.width as u32, image.height as u32, image.pixels.clone())
        .context("SSSM image buffer size")?;
    buf.save(path).with_context(|| format!("writing {}", path.display()))
}

fn load_mirror(cfg: &PipelineConfig, series: &TimeSeries) -> Result<Option<MirrorMap>> {
    match (cfg.symmetry, &cfg.mirror_map) {
        (true, Some(p)) => Ok(Some(MirrorMap::load(p, series.channel_names())?)),
        (true, None) => bail!("symmetry is enabled but no mirror_map is configured"),
        _ => Ok(None),
    }
}

fn run(args: &RunArgs) -> Result<(PipelineConfig, PipelineOutput)> {
    let cfg = args.config.load()?;
    let series = load_timeseries(&args.input, Format::Csv)?;
    let mirror = load_mirror(&cfg, &series)?;
    let out = run_pipeline(&cfg, &series, mirror.as_ref())?;
    Ok((cfg, out))
}

fn segment(args: &RunArgs) -> Result<()> {
    let (cfg, out) = run(args)?;
    let dir = args
        .out
        .clone()
        .or(cfg.output_dir.clone())
        .context("no output directory: pass --out or set output_dir")?;
    write_outputs(&out, &dir)?;
    write_png(&sssm_export(&out.full_neighborhoods), &dir.join("sssm.png"))?;
    let r = &out.result;
    println!(
        "{} activities, {} transitions, {} primitives, {} clusters -> {}",
        r.activities.len(),
        r.transitions.len(),
        r.primitives.len(),
        r.clusters.len(),
        dir.display()
    );
    Ok(())
}

fn cluster(args: &RunArgs) -> Result<()> {
    let (cfg, out) = run(args)?;
    if let Some(dir) = args.out.clone().or(cfg.output_dir.clone()) {
        write_outputs(&out, &dir)?;
    }
    for c in &out.result.clusters {
        let spans: Vec<String> = c
            .primitives
            .iter()
            .map(|&p| {
                let p = &out.result.primitives[p];
                format!("{}-{}", p.start, p.end)
            })
            .collect();
        println!("cluster {} ({} frames): {}", c.id, c.frames, spans.join(" "));
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let result = SegmentationResult::load(&args.segmentation)?;
    let gt = GroundTruth::load(&args.gt)?;
    let aliases = match &args.config {
        Some(p) => PipelineConfig::load(p)?.aliases,
        None => BTreeMap::new(),
    };
    let series = args.input.as_ref().map(|p| load_timeseries(p, Format::Csv)).transpose()?;
    let report = evaluate(&result, &gt, &aliases, series.as_ref())?;
    if let Some(mode) = args.mode {
        let acc = frame_accuracy(&result.frame_clusters(), &gt, mode.into(), &aliases)?;
        println!("accuracy {acc:.4}");
    } else {
        if let (Some(s), Some(t)) = (report.strict_accuracy, report.tolerant_accuracy) {
            println!("strict accuracy {s:.4}\ntolerant accuracy {t:.4}");
        }
        if let Some(d) = report.mean_cluster_variance {
            println!("mean cluster variance {d:.4}");
        }
        if let Some(b) = &report.boundaries {
            println!(
                "boundary distance {:.2} (std {:.2}) frames, overlap {:.2}% (std {:.2})",
                b.boundary_mean, b.boundary_std, b.overlap_mean, b.overlap_std
            );
        }
        if let Some(k) = &report.keypoints {
            println!(
                "key points: {} in primitives, {} in transitions, histogram {:?}",
                k.positions.len(),
                k.in_transitions,
                k.histogram
            );
        }
    }
    if let Some(p) = &args.out {
        write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    if let Some(p) = &args.histogram {
        let k = report.keypoints.as_ref().context("a histogram needs key-point ground truth")?;
        write(p, histogram_svg(&k.histogram, "relative key-point position"))?;
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let series = load_timeseries(&args.input, Format::Csv)?;
    let mirror = load_mirror(&cfg, &series)?;
    let gt = GroundTruth::load(&args.gt)?;
    let radii = parse_range(&args.radii)?;
    let offsets = match &args.offsets {
        Some(s) => parse_offset_sets(s)?,
        None => vec![cfg.offsets.clone()],
    };
    let grid = sweep_grid(&cfg, &series, mirror.as_ref(), &gt, &radii, &offsets)?;
    for (mode, name) in [(AccuracyMode::Strict, "strict"), (AccuracyMode::Tolerant, "tolerant")] {
        write(&args.out.join(format!("sweep_{name}.csv")), grid.to_csv(mode))?;
        let values = if name == "strict" { &grid.strict } else { &grid.tolerant };
        let svg = heatmap_svg(values, &grid.row_labels(), &grid.column_labels(), &format!("{name} accuracy"));
        write(&args.out.join(format!("sweep_{name}.svg")), svg)?;
        println!("{name}: {:.0}% of cells within 5 points of the best", 100.0 * grid.plateau_fraction(mode, 5.0));
    }
    if !args.windows.is_empty() {
        let rows = sweep_stop_window(&cfg, &series, mirror.as_ref(), &gt, &args.windows)?;
        let mut csv = String::from("stop_window,strict,tolerant\n");
        for (w, s, t) in rows {
            csv.push_str(&format!("{w},{s:.6},{t:.6}\n"));
        }
        write(&args.out.join("sweep_window.csv"), csv)?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn render(args: &RenderArgs) -> Result<()> {
    let result = SegmentationResult::load(&args.segmentation)?;
    write(&args.out, timeline_svg(&result))?;
    if let (Some(input), Some(sssm)) = (&args.input, &args.sssm) {
        let series = load_timeseries(input, Format::Csv)?;
        if series.frames() != result.meta.frames {
            bail!("trial has {} frames, segmentation has {}", series.frames(), result.meta.frames);
        }
        let m = &result.meta;
        let cfg = PipelineConfig {
            radius: m.radius,
            offsets: m.offsets.clone(),
            bundling: m.bundling,
            bundling_k: m.bundling_k,
            seed: m.seed,
            ..PipelineConfig::default()
        };
        let nbrs = compute_neighborhoods(&prepare_features(&cfg, &series)?, cfg.radius)?;
        let image = sssm_export(&nbrs);
        if sssm.extension().is_some_and(|e| e == "pgm") {
            write(sssm, image.to_pgm())?;
        } else {
            write_png(&image, sssm)?;
        }
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let fx = generate(FixtureKind::parse(&args.fixture)?, args.noise, args.seed)?;
    write(&args.out, fx.series.to_csv_string())?;
    if let Some(p) = &args.gt {
        write(p, fx.ground_truth_csv())?;
    }
    if let Some(p) = &args.mirror {
        let map = fx.mirror_csv().context("this fixture has no mirror map")?;
        write(p, map)?;
    }
    println!("{} frames x {} channels -> {}", fx.series.frames(), fx.series.channels(), args.out.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Segment(a) => segment(a),
        Command::Cluster(a) => cluster(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Render(a) => render(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
