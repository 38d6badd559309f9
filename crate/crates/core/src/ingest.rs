//! Loading multichannel time series and sensor-specific preprocessing.
//!
//! The interchange format is a small CSV dialect:
//!
//! ```text
//! # rate=30
//! lhumerus_rx,lhumerus_ry,rhumerus_rx
//! 0.12,0.5,-0.3
//! ...
//! ```
//!
//! Every data row is one frame. Values must be finite decimals.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Frames × channels of scalar samples with a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    data: Vec<f64>,
    channels: usize,
    sample_rate: f64,
    channel_names: Vec<String>,
}

impl TimeSeries {
    /// Builds a series from row-major samples (`frames * channel_names.len()` values).
    pub fn new(data: Vec<f64>, channel_names: Vec<String>, sample_rate: f64) -> Result<Self> {
        let channels = channel_names.len();
        if channels == 0 {
            return Err(Error::invalid("a time series needs at least one channel"));
        }
        if data.is_empty() {
            return Err(Error::NoFrames);
        }
        if data.len() % channels != 0 {
            return Err(Error::ChannelMismatch(format!(
                "{} samples do not divide into {} channels",
                data.len(),
                channels
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let mut seen = HashSet::new();
        for name in &channel_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate channel name \"{name}\"")));
            }
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite sample at frame {}, channel \"{}\"",
                pos / channels + 1,
                channel_names[pos % channels]
            )));
        }
        Ok(Self {
            data,
            channels,
            sample_rate,
            channel_names,
        })
    }

    /// Builds a series with generated channel names `c0, c1, ...`.
    pub fn from_frames(frames: &[Vec<f64>], sample_rate: f64) -> Result<Self> {
        let channels = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != channels) {
            return Err(Error::ChannelMismatch("frames of unequal width".into()));
        }
        let names = (0..channels).map(|c| format!("c{c}")).collect();
        Self::new(frames.concat(), names, sample_rate)
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn value(&self, frame: usize, channel: usize) -> f64 {
        self.data[frame * self.channels + channel]
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Row-major samples.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|n| n == name)
    }

    fn with_data(&self, data: Vec<f64>, sample_rate: f64) -> Self {
        Self {
            data,
            channels: self.channels,
            sample_rate,
            channel_names: self.channel_names.clone(),
        }
    }

    fn from_channels(&self, columns: &[Vec<f64>], sample_rate: f64) -> Self {
        let frames = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(frames * self.channels);
        for i in 0..frames {
            data.extend(columns.iter().map(|col| col[i]));
        }
        self.with_data(data, sample_rate)
    }

    /// Concatenates another series with identical channels and rate after this one.
    pub fn concat(&self, other: &TimeSeries) -> Result<TimeSeries> {
        if other.channel_names != self.channel_names {
            return Err(Error::ChannelMismatch("concatenated series differ in channels".into()));
        }
        if other.sample_rate != self.sample_rate {
            return Err(Error::invalid("concatenated series differ in sample rate"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(self.with_data(data, self.sample_rate))
    }

    /// Serializes to the CSV interchange format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# rate={}", self.sample_rate);
        out.push_str(&self.channel_names.join(","));
        out.push('\n');
        for i in 0..self.frames() {
            let row: Vec<String> = self.frame(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Input formats accepted by [`load_timeseries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
}

pub fn load_timeseries(path: impl AsRef<Path>, format: Format) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Csv => parse_csv(&text, path),
    }
}

pub fn parse_csv(text: &str, path: &Path) -> Result<TimeSeries> {
    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.splitn(2, '\n');
    let rate_line = lines.next().unwrap_or("").trim();
    let rate = rate_line
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|s| s.strip_prefix("rate="))
        .ok_or_else(|| format_err(format!("expected \"# rate=<fps>\" header, got \"{rate_line}\"")))?
        .trim()
        .parse::<f64>()
        .map_err(|e| format_err(format!("bad sample rate: {e}")))?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(format_err(format!("sample rate must be positive, got {rate}")));
    }

    let body = lines.next().unwrap_or("");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| format_err(format!("bad channel header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(format_err("missing channel header".into()));
    }

    let mut data = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Row {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != names.len() {
            return Err(Error::Row {
                path: path.to_path_buf(),
                row,
                message: format!("expected {} columns, found {}", names.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let cell_err = |message: String| Error::Cell {
                path: path.to_path_buf(),
                row,
                column: names[c].clone(),
                message,
            };
            let value: f64 = cell
                .parse()
                .map_err(|_| cell_err(format!("not a number: \"{cell}\"")))?;
            if !value.is_finite() {
                return Err(cell_err(format!("non-finite value {cell}")));
            }
            data.push(value);
        }
    }
    if data.is_empty() {
        return Err(Error::NoFrames);
    }
    TimeSeries::new(data, names, rate).map_err(|e| match e {
        Error::InvalidParameter(message) => format_err(message),
        other => other,
    })
}

/// Linear-interpolation resampling to `target_rate`.
///
/// Output frame `k` samples the source at position `k * rate / target_rate`,
/// clamped to the last source frame.
pub fn resample(series: &TimeSeries, target_rate: f64) -> Result<TimeSeries> {
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(Error::invalid(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    let m = series.frames();
    let ratio = series.sample_rate / target_rate;
    let out_frames = ((m as f64) * target_rate / series.sample_rate).round().max(1.0) as usize;
    let c = series.channels;
    let mut data = Vec::with_capacity(out_frames * c);
    for k in 0..out_frames {
        let pos = (k as f64 * ratio).min((m - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(m - 1);
        let t = pos - lo as f64;
        let a = series.frame(lo);
        let b = series.frame(hi);
        data.extend(a.iter().zip(b).map(|(x, y)| x + t * (y - x)));
    }
    Ok(series.with_data(data, target_rate))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    /// Elementwise absolute value.
    Rectify,
    /// Zero-phase 2nd-order Butterworth low-pass.
    Lowpass { cutoff_hz: f64 },
    /// Normalized binomial smoothing kernel over `window` frames.
    Binomial { window: usize },
}

pub fn filter(series: &TimeSeries, kind: FilterKind) -> Result<TimeSeries> {
    match kind {
        FilterKind::Rectify => Ok(series.with_data(
            series.data.iter().map(|v| v.abs()).collect(),
            series.sample_rate,
        )),
        FilterKind::Lowpass { cutoff_hz } => {
            let nyquist = series.sample_rate / 2.0;
            if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
                return Err(Error::invalid(format!(
                    "low-pass cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
                )));
            }
            let biquad = Biquad::butterworth_lowpass(cutoff_hz, series.sample_rate);
            let columns: Vec<Vec<f64>> = (0..series.channels)
                .map(|c| biquad.filtfilt(&series.channel(c)))
                .collect();
            Ok(series.from_channels(&columns, series.sample_rate))
        }
        FilterKind::Binomial { window } => {
            if window < 2 {
                return Err(Error::invalid(format!(
                    "binomial window must be at least 2, got {window}"
                )));
            }
            let weights = binomial_weights(window);
            let columns: Vec<Vec<f64>> = (0..series.channels)
                .map(|c| convolve_reflect(&series.channel(c), &weights))
                .collect();
            Ok(series.from_channels(&columns, series.sample_rate))
        }
    }
}

/// Binomial coefficients of row `window - 1`, normalized to sum to one.
pub fn binomial_weights(window: usize) -> Vec<f64> {
    let n = window - 1;
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    let sum: f64 = row.iter().sum();
    row.iter().map(|w| w / sum).collect()
}

/// Index into `len` samples with mirror reflection at both ends (`-1 -> 1`, `len -> len - 2`).
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= len as isize {
        k = period - k;
    }
    k as usize
}

fn convolve_reflect(x: &[f64], weights: &[f64]) -> Vec<f64> {
    let center = (weights.len() as isize - 1) / 2;
    (0..x.len() as isize)
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * x[reflect_index(i + k as isize - center, x.len())])
                .sum()
        })
        .collect()
}

/// Second-order IIR section in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Bilinear-transform Butterworth low-pass with pre-warped cutoff.
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        let k = (std::f64::consts::PI * cutoff_hz / sample_rate).tan();
        let sqrt2 = std::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
        let b0 = k * k * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - sqrt2 * k + k * k) * norm],
        }
    }

    /// Magnitude response of one pass at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (
            1.0 + self.a[0] * c1 + self.a[1] * c2,
            self.a[0] * s1 + self.a[1] * s2,
        );
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        // steady state for a constant input equal to x[0]
        let x0 = x.first().copied().unwrap_or(0.0);
        let mut z2 = (b2 - a2) * x0;
        let mut z1 = (b1 - a1) * x0 + z2;
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + z1;
                z1 = b1 * xi - a1 * y + z2;
                z2 = b2 * xi - a2 * y;
                y
            })
            .collect()
    }

    /// Forward-backward application with reflected padding; no phase shift.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = (3 * 3).min(n - 1) as isize;
        let padded: Vec<f64> = (-pad..n as isize + pad)
            .map(|i| x[reflect_index(i, n)])
            .collect();
        let mut y = self.run(&padded);
        y.reverse();
        let mut y = self.run(&y);
        y.reverse();
        y[pad as usize..pad as usize + n].to_vec()
    }
}
