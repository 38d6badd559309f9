//! Synthetic motion trials with known structure.
//!
//! Every fixture is built from smooth multi-harmonic cycle shapes sampled at 30 fps,
//! with seeded Gaussian noise. Shapes are fixed; only the noise depends on the seed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activity::Interval;
use crate::error::{Error, Result};
use crate::features::MirrorMap;
use crate::ingest::TimeSeries;

pub const FIXTURE_RATE: f64 = 30.0;
const CHANNELS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    /// One activity: 10 cycles of period 40.
    FixA,
    /// Two activities (periods 32 and 43) around a 30-frame transition.
    FixB,
    /// Gait: right channels are the left channels half a stride later.
    Gait,
    /// Left and right channels perform the same motion.
    Symmetric,
    /// Left and right channels live in disjoint value ranges.
    Asymmetric,
    /// Activity A, activity B, activity A again.
    Aba,
    /// Unit circle traversed 10 times.
    Circle,
    /// A cycle that drifts steadily, so no two cycles coincide.
    Drift,
}

impl FixtureKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "fixa" | "a" => Self::FixA,
            "fixb" | "b" => Self::FixB,
            "gait" => Self::Gait,
            "symmetric" => Self::Symmetric,
            "asymmetric" => Self::Asymmetric,
            "aba" => Self::Aba,
            "circle" => Self::Circle,
            "drift" => Self::Drift,
            _ => return Err(Error::invalid(format!("unknown fixture \"{name}\""))),
        })
    }
}

/// A labelled stretch of a fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub interval: Interval,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub series: TimeSeries,
    /// Activities and transitions in frame order.
    pub segments: Vec<Segment>,
    /// First frame of every cycle, across all activities.
    pub cycle_starts: Vec<usize>,
    pub mirror: Option<MirrorMap>,
}

impl Fixture {
    pub fn activities(&self) -> Vec<Interval> {
        self.segments
            .iter()
            .filter(|s| s.label != "transition")
            .map(|s| s.interval)
            .collect()
    }

    /// Ground truth as `start_frame,end_frame,label` rows (1-based, inclusive).
    pub fn ground_truth_csv(&self) -> String {
        let mut out = String::from("start_frame,end_frame,label\n");
        for s in &self.segments {
            out.push_str(&format!("{},{},{}\n", s.interval.start + 1, s.interval.end + 1, s.label));
        }
        out
    }

    /// Mirror map as `channel_a,channel_b` rows, if the fixture has one.
    pub fn mirror_csv(&self) -> Option<String> {
        let map = self.mirror.as_ref()?;
        let names = self.series.channel_names();
        let mut out = String::new();
        for c in 0..map.channels() {
            let p = map.partner(c);
            if p > c {
                out.push_str(&format!("{},{}\n", names[c], names[p]));
            }
        }
        Some(out)
    }
}

/// Smooth periodic shape over `channels` channels with a few harmonics.
#[derive(Debug, Clone)]
pub struct CycleShape {
    // per channel: (amplitude, phase) for harmonics 1..=3, and an offset
    coeffs: Vec<([(f64, f64); 3], f64)>,
}

impl CycleShape {
    /// Deterministic shape for an id; different ids give unrelated shapes.
    pub fn new(id: u64, channels: usize, offset: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + id);
        let coeffs = (0..channels)
            .map(|_| {
                let h = [
                    (1.0, rng.random_range(0.0..2.0 * PI)),
                    (rng.random_range(0.3..0.6), rng.random_range(0.0..2.0 * PI)),
                    (rng.random_range(0.1..0.25), rng.random_range(0.0..2.0 * PI)),
                ];
                (h, offset)
            })
            .collect();
        Self { coeffs }
    }

    pub fn channels(&self) -> usize {
        self.coeffs.len()
    }

    /// Value of channel `c` at cycle phase `phase` (1.0 is one full cycle).
    pub fn value(&self, c: usize, phase: f64) -> f64 {
        let (h, offset) = &self.coeffs[c];
        offset
            + h.iter()
                .enumerate()
                .map(|(k, (a, p))| a * (2.0 * PI * (k + 1) as f64 * phase + p).sin())
                .sum::<f64>()
    }

    pub fn frame(&self, phase: f64) -> Vec<f64> {
        (0..self.channels()).map(|c| self.value(c, phase)).collect()
    }
}

const DWELL: f64 = 0.8;

/// Phase warp that slows the motion near every cycle boundary.
pub fn dwell(phase: f64) -> f64 {
    phase - DWELL * (2.0 * PI * phase).sin() / (2.0 * PI)
}

struct Builder {
    frames: Vec<Vec<f64>>,
    segments: Vec<Segment>,
    cycle_starts: Vec<usize>,
}

impl Builder {
    fn new() -> Self {
        Self { frames: Vec::new(), segments: Vec::new(), cycle_starts: Vec::new() }
    }

    fn cyclic(&mut self, label: &str, shape: &CycleShape, period: usize, frames: usize) {
        let start = self.frames.len();
        for t in 0..frames {
            if t % period == 0 {
                self.cycle_starts.push(start + t);
            }
            self.frames.push(shape.frame(dwell(t as f64 / period as f64)));
        }
        self.push_segment(label, start);
    }

    /// Cosine blend from the last frame so far to `target`.
    fn transition(&mut self, target: &[f64], frames: usize) {
        let start = self.frames.len();
        let from = self.frames.last().cloned().unwrap_or_else(|| target.to_vec());
        for t in 1..=frames {
            let s = t as f64 / (frames + 1) as f64;
            let w = 0.5 * (1.0 - (PI * s).cos());
            self.frames.push(from.iter().zip(target).map(|(a, b)| a + (b - a) * w).collect());
        }
        self.push_segment("transition", start);
    }

    fn push_segment(&mut self, label: &str, start: usize) {
        if self.frames.len() > start {
            self.segments.push(Segment {
                interval: Interval::new(start, self.frames.len() - 1),
                label: label.to_string(),
            });
        }
    }
}

fn add_noise(frames: &mut [Vec<f64>], sigma: f64, seed: u64) -> Result<()> {
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in frames.iter_mut() {
        for v in f.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(())
}

fn lr_names(per_side: usize) -> Vec<String> {
    (0..per_side)
        .map(|k| format!("l{k}"))
        .chain((0..per_side).map(|k| format!("r{k}")))
        .collect()
}

fn lr_mirror(per_side: usize) -> MirrorMap {
    let swaps: Vec<(usize, usize, bool)> = (0..per_side).map(|k| (k, k + per_side, false)).collect();
    MirrorMap::from_swaps(2 * per_side, &swaps).expect("valid swaps")
}

/// Builds a fixture with Gaussian noise of standard deviation `noise`.
pub fn generate(kind: FixtureKind, noise: f64, seed: u64) -> Result<Fixture> {
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::invalid(format!("noise must be non-negative, got {noise}")));
    }
    let mut b = Builder::new();
    let mut names: Vec<String> = (0..CHANNELS).map(|c| format!("c{c}")).collect();
    let mut mirror = None;
    match kind {
        FixtureKind::FixA => {
            b.cyclic("A", &CycleShape::new(1, CHANNELS, 0.0), 40, 400);
        }
        FixtureKind::FixB => {
            let a = CycleShape::new(1, CHANNELS, 0.0);
            let shape_b = CycleShape::new(2, CHANNELS, 2.0);
            b.cyclic("A", &a, 32, 300);
            b.transition(&shape_b.frame(0.0), 30);
            b.cyclic("B", &shape_b, 43, 300);
        }
        FixtureKind::Aba => {
            let a = CycleShape::new(1, CHANNELS, 0.0);
            let shape_b = CycleShape::new(2, CHANNELS, 2.0);
            b.cyclic("A", &a, 40, 200);
            b.transition(&shape_b.frame(0.0), 30);
            b.cyclic("B", &shape_b, 45, 270);
            b.transition(&a.frame(0.0), 30);
            b.cyclic("A", &a, 40, 200);
        }
        FixtureKind::Gait | FixtureKind::Symmetric | FixtureKind::Asymmetric => {
            let per_side = CHANNELS / 2;
            let period = 80;
            let strides = 6;
            let left = CycleShape::new(3, per_side, 0.0);
            let right_other = CycleShape::new(4, per_side, 0.0);
            let lag = match kind {
                FixtureKind::Gait => 0.5,
                _ => 0.0,
            };
            let label = match kind {
                FixtureKind::Gait => "walk",
                FixtureKind::Symmetric => "jump",
                _ => "limp",
            };
            let start = b.frames.len();
            for t in 0..period * strides {
                let phase = t as f64 / period as f64;
                if t % period == 0 {
                    b.cycle_starts.push(t);
                }
                let mut f: Vec<f64> = (0..per_side).map(|c| left.value(c, phase)).collect();
                match kind {
                    FixtureKind::Asymmetric => {
                        f.iter_mut().for_each(|v| *v += 3.0);
                        f.extend((0..per_side).map(|c| right_other.value(c, phase) - 3.0));
                    }
                    _ => f.extend((0..per_side).map(|c| left.value(c, phase + lag))),
                }
                b.frames.push(f);
            }
            b.push_segment(label, start);
            names = lr_names(per_side);
            mirror = Some(lr_mirror(per_side));
        }
        FixtureKind::Circle => {
            names = vec!["x".into(), "y".into()];
            for t in 0..400 {
                if t % 40 == 0 {
                    b.cycle_starts.push(t);
                }
                let a = 2.0 * PI * t as f64 / 40.0;
                b.frames.push(vec![a.cos(), a.sin()]);
            }
            b.push_segment("circle", 0);
        }
        FixtureKind::Drift => {
            return drift(400, noise, seed);
        }
    }
    let mut frames = b.frames;
    add_noise(&mut frames, noise, seed)?;
    let data = frames.concat();
    Ok(Fixture {
        series: TimeSeries::new(data, names, FIXTURE_RATE)?,
        segments: b.segments,
        cycle_starts: b.cycle_starts,
        mirror,
    })
}

const DRIFT: f64 = 0.002;

/// Cyclic motion whose channels drift linearly, `m` frames long. Only a few nearby
/// cycles stay within reach of each other, so neighbour counts per frame stay
/// bounded however long the trial is.
pub fn drift(m: usize, noise: f64, seed: u64) -> Result<Fixture> {
    let shape = CycleShape::new(5, CHANNELS, 0.0);
    let mut frames: Vec<Vec<f64>> = (0..m)
        .map(|t| {
            let mut f = shape.frame(t as f64 / 40.0);
            f.iter_mut().for_each(|v| *v += DRIFT * t as f64);
            f
        })
        .collect();
    add_noise(&mut frames, noise, seed)?;
    Ok(Fixture {
        series: TimeSeries::new(frames.concat(), (0..CHANNELS).map(|c| format!("c{c}")).collect(), FIXTURE_RATE)?,
        segments: vec![Segment { interval: Interval::new(0, m - 1), label: "drift".into() }],
        cycle_starts: (0..m).step_by(40).collect(),
        mirror: None,
    })
}

/// One activity of `m` frames: the FIX-A motion repeated with the given period.
pub fn periodic(m: usize, period: usize, noise: f64, seed: u64) -> Result<Fixture> {
    if period == 0 || m == 0 {
        return Err(Error::invalid("periodic fixture needs positive length and period"));
    }
    let mut b = Builder::new();
    b.cyclic("A", &CycleShape::new(1, CHANNELS, 0.0), period, m);
    let mut frames = b.frames;
    add_noise(&mut frames, noise, seed)?;
    Ok(Fixture {
        series: TimeSeries::new(frames.concat(), (0..CHANNELS).map(|c| format!("c{c}")).collect(), FIXTURE_RATE)?,
        segments: b.segments,
        cycle_starts: b.cycle_starts,
        mirror: None,
    })
}
