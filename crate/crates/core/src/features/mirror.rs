use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::TimeSeries;

/// Channel-level reflection across the body's mirror plane: an involutive
/// channel permutation plus sign flips.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorMap {
    permutation: Vec<usize>,
    negate: Vec<bool>,
}

impl MirrorMap {
    pub fn identity(channels: usize) -> Self {
        Self {
            permutation: (0..channels).collect(),
            negate: vec![false; channels],
        }
    }

    /// Builds a map from `(a, b, negate)` swaps over `channels` channels.
    /// `a == b` with `negate` flips a single channel in place.
    pub fn from_swaps(channels: usize, swaps: &[(usize, usize, bool)]) -> Result<Self> {
        let mut map = Self::identity(channels);
        let mut touched = vec![false; channels];
        for &(a, b, neg) in swaps {
            if a >= channels || b >= channels {
                return Err(Error::ChannelMismatch(format!(
                    "mirror pair ({a}, {b}) outside {channels} channels"
                )));
            }
            if touched[a] || touched[b] {
                return Err(Error::invalid(format!(
                    "channel listed in more than one mirror pair ({a}, {b})"
                )));
            }
            touched[a] = true;
            touched[b] = true;
            map.permutation[a] = b;
            map.permutation[b] = a;
            map.negate[a] = neg;
            map.negate[b] = neg;
        }
        Ok(map)
    }

    /// Parses `channel_a,channel_b[,negate]` rows against the series' channel names.
    pub fn parse(text: &str, channel_names: &[String]) -> Result<Self> {
        let index = |name: &str, line: usize| {
            channel_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| {
                    Error::ChannelMismatch(format!(
                        "mirror map line {line}: unknown channel \"{name}\""
                    ))
                })
        };
        let mut swaps = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let negate = match cells.get(2).copied() {
                None | Some("") => false,
                Some("negate") | Some("1") | Some("true") => true,
                Some("0") | Some("false") => false,
                Some(other) => {
                    return Err(Error::invalid(format!(
                        "mirror map line {}: bad negate flag \"{other}\"",
                        k + 1
                    )))
                }
            };
            if cells.len() < 2 || cells.len() > 3 {
                return Err(Error::invalid(format!(
                    "mirror map line {}: expected channel_a,channel_b[,negate]",
                    k + 1
                )));
            }
            swaps.push((index(cells[0], k + 1)?, index(cells[1], k + 1)?, negate));
        }
        Self::from_swaps(channel_names.len(), &swaps)
    }

    pub fn load(path: impl AsRef<Path>, channel_names: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, channel_names)
    }

    pub fn channels(&self) -> usize {
        self.permutation.len()
    }

    /// Partner of channel `c`.
    pub fn partner(&self, c: usize) -> usize {
        self.permutation[c]
    }

    pub fn negates(&self, c: usize) -> bool {
        self.negate[c]
    }

    /// Mirrors one frame of `channels()` values.
    pub fn apply(&self, frame: &[f64], out: &mut Vec<f64>) {
        out.extend(self.permutation.iter().zip(&self.negate).map(|(&src, &neg)| {
            if neg {
                -frame[src]
            } else {
                frame[src]
            }
        }));
    }
}

pub fn mirror_features(series: &TimeSeries, map: &MirrorMap) -> Result<TimeSeries> {
    if map.channels() != series.channels() {
        return Err(Error::ChannelMismatch(format!(
            "mirror map covers {} channels, series has {}",
            map.channels(),
            series.channels()
        )));
    }
    let mut data = Vec::with_capacity(series.as_slice().len());
    for i in 0..series.frames() {
        map.apply(series.frame(i), &mut data);
    }
    TimeSeries::new(data, series.channel_names().to_vec(), series.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lr_series(left: impl Fn(usize) -> f64, right: impl Fn(usize) -> f64, m: usize) -> TimeSeries {
        let data: Vec<f64> = (0..m).flat_map(|i| [left(i), right(i), 0.25 * i as f64]).collect();
        TimeSeries::new(data, vec!["l".into(), "r".into(), "root".into()], 30.0).unwrap()
    }

    #[test]
    fn symmetric_series_is_fixed() {
        let s = lr_series(|i| (i as f64).sin(), |i| (i as f64).sin(), 20);
        let map = MirrorMap::from_swaps(3, &[(0, 1, false)]).unwrap();
        assert_eq!(mirror_features(&s, &map).unwrap(), s);
    }

    #[test]
    fn mirror_is_involution() {
        let s = lr_series(|i| (i as f64 * 0.3).cos(), |i| (i as f64).sqrt(), 25);
        let map = MirrorMap::from_swaps(3, &[(0, 1, true), (2, 2, true)]).unwrap();
        let twice = mirror_features(&mirror_features(&s, &map).unwrap(), &map).unwrap();
        assert_eq!(twice, s);
    }

    #[test]
    fn phase_shifted_gait_mirror_is_time_shift() {
        let period = 40usize;
        let left = |i: usize| (2.0 * std::f64::consts::PI * i as f64 / period as f64).sin();
        let right = |i: usize| left(i + period / 2);
        let m = 200;
        let s = TimeSeries::new(
            (0..m).flat_map(|i| [left(i), right(i)]).collect(),
            vec!["l".into(), "r".into()],
            30.0,
        )
        .unwrap();
        let map = MirrorMap::from_swaps(2, &[(0, 1, false)]).unwrap();
        let mirrored = mirror_features(&s, &map).unwrap();
        for i in 0..m - period / 2 {
            for c in 0..2 {
                let dev = (mirrored.value(i, c) - s.value(i + period / 2, c)).abs();
                assert!(dev < 1e-9, "frame {i} channel {c}: {dev}");
            }
        }
    }

    #[test]
    fn parse_by_name() {
        let names: Vec<String> = ["lfemur", "rfemur", "root_x"].iter().map(|s| s.to_string()).collect();
        let map = MirrorMap::parse("lfemur,rfemur\nroot_x,root_x,negate\n", &names).unwrap();
        assert_eq!(map.partner(0), 1);
        assert_eq!(map.partner(1), 0);
        assert!(map.negates(2));
        assert!(!map.negates(0));
    }

    #[test]
    fn rejects_unknown_and_overlapping_channels() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert!(MirrorMap::parse("a,z\n", &names).is_err());
        assert!(MirrorMap::parse("a,b\nb,c\n", &names).is_err());
    }

    #[test]
    fn channel_count_mismatch() {
        let s = lr_series(|_| 0.0, |_| 1.0, 5);
        assert!(mirror_features(&s, &MirrorMap::identity(2)).is_err());
    }
}
