//! Separation of a trial into repetitive activities and transitions by forward
//! and backward region growing over the neighbour sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighborhood::Neighborhoods;

/// Inclusive frame interval, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(end >= start);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame <= self.end
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then_some(Interval { start, end })
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Number of frames removed on either side of the main diagonal for a sample rate.
pub fn band_width(rate: f64, seconds: f64) -> Result<usize> {
    if !(rate > 0.0) || !rate.is_finite() || !(seconds >= 0.0) || !seconds.is_finite() {
        return Err(Error::invalid(format!("diagonal band needs rate > 0 (got {rate}, {seconds} s)")));
    }
    Ok((rate * seconds).round() as usize)
}

/// Drops every pair with `|i - j| <= round(rate)`: one second around the diagonal.
pub fn remove_diagonal_band(nbrs: &Neighborhoods, rate: f64) -> Result<Neighborhoods> {
    let band = band_width(rate, 1.0)?;
    Ok(remove_band(nbrs, band))
}

/// Drops every pair with `|i - j| <= band`.
pub fn remove_band(nbrs: &Neighborhoods, band: usize) -> Neighborhoods {
    nbrs.retain(|i, j| i.abs_diff(j) > band)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// One grown region. Forward regions cover `seed..=last` and close at their
/// lower right corner (an activity end); backward regions cover `last..=seed`
/// and close at their upper left corner (an activity start).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub seed: usize,
    /// Final frame covered by the region in the growing direction.
    pub last: usize,
    /// Last frame whose scan line contributed a neighbour; `None` when the region never found one.
    pub corner: Option<usize>,
    /// Counted neighbour furthest back towards the seed: where repetitive content begins.
    pub reach: Option<usize>,
}

impl Region {
    /// Frames holding repetitive content, between the reach and the corner.
    pub fn content(&self) -> Option<Interval> {
        let (a, b) = (self.reach?, self.corner?);
        Some(Interval::new(a.min(b), a.max(b)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrowing {
    pub direction: Direction,
    pub regions: Vec<Region>,
    /// Neighbour entries inspected.
    pub ops: u64,
}

impl RegionGrowing {
    pub fn corners(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.regions.iter().filter_map(|r| r.corner).collect();
        c.sort_unstable();
        c
    }
}

/// Grows triangular regions along the diagonal.
///
/// Scan line `j` counts the neighbours `i'` of frame `j` that lie between the seed
/// and `j`. Once `w` consecutive scan lines add nothing, the region closes at the
/// last scan line that did and the next region is seeded right after it. A region
/// stays open until it has found its first neighbour.
pub fn region_grow(nbrs: &Neighborhoods, direction: Direction, w: usize) -> Result<RegionGrowing> {
    if w == 0 {
        return Err(Error::invalid("stop window must be at least 1"));
    }
    let m = nbrs.len();
    // rank: position along the growing direction
    let frame = |rank: usize| match direction {
        Direction::Forward => rank,
        Direction::Backward => m - 1 - rank,
    };
    let mut regions = Vec::new();
    let mut ops = 0u64;
    let mut seed = 0usize;
    let mut k = 0usize;
    let mut last_hit: Option<usize> = None;
    let mut reach: Option<usize> = None;
    while k < m {
        let set = nbrs.set(frame(k));
        ops += set.len() as u64 + 1;
        for &(j, _) in set {
            let rank = match direction {
                Direction::Forward => j,
                Direction::Backward => m - 1 - j,
            };
            if rank >= seed && rank < k {
                last_hit = Some(k);
                reach = Some(reach.map_or(rank, |r: usize| r.min(rank)));
            }
        }
        match last_hit {
            Some(l) if k - l >= w => {
                regions.push(Region {
                    seed: frame(seed),
                    last: frame(l),
                    corner: Some(frame(l)),
                    reach: reach.map(frame),
                });
                seed = l + 1;
                k = seed;
                last_hit = None;
                reach = None;
            }
            _ => k += 1,
        }
    }
    if seed < m {
        regions.push(Region {
            seed: frame(seed),
            last: frame(m - 1),
            corner: last_hit.map(frame),
            reach: reach.map(frame),
        });
    }
    Ok(RegionGrowing {
        direction,
        regions,
        ops,
    })
}

/// Activities and transitions partitioning a trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivitySegmentation {
    pub activities: Vec<Interval>,
    pub transitions: Vec<Interval>,
    pub trial_length: usize,
}

impl ActivitySegmentation {
    /// Builds the transition list as the complement of `activities` (sorted, disjoint).
    pub fn from_activities(activities: Vec<Interval>, trial_length: usize) -> Self {
        let mut transitions = Vec::new();
        let mut next = 0usize;
        for a in &activities {
            if a.start > next {
                transitions.push(Interval::new(next, a.start - 1));
            }
            next = a.end + 1;
        }
        if next < trial_length {
            transitions.push(Interval::new(next, trial_length - 1));
        }
        Self {
            activities,
            transitions,
            trial_length,
        }
    }

    /// Checks sortedness, disjointness and full coverage.
    pub fn is_partition(&self) -> bool {
        let mut all: Vec<Interval> = self.activities.iter().chain(&self.transitions).copied().collect();
        all.sort();
        let mut next = 0;
        for iv in &all {
            if iv.start != next || iv.end < iv.start {
                return false;
            }
            next = iv.end + 1;
        }
        next == self.trial_length && self.activities.windows(2).all(|w| w[0].end < w[1].start)
    }
}

/// Pairs forward and backward regions by intersecting their repetitive content.
///
/// Each non-empty intersection of a forward content `[reach, corner]` with a backward
/// content `[corner, reach]` is an activity. Overlapping results are clipped at the
/// overlap midpoint; activities shorter than `min_length` frames become transitions.
pub fn combine_regions(
    forward: &[Region],
    backward: &[Region],
    m: usize,
    min_length: usize,
) -> ActivitySegmentation {
    let mut found: Vec<Interval> = Vec::new();
    for f in forward.iter().filter_map(Region::content) {
        for b in backward.iter().filter_map(Region::content) {
            if let Some(iv) = f.intersect(&b) {
                if iv.end < m {
                    found.push(iv);
                }
            }
        }
    }
    found.sort();
    let mut resolved: Vec<Interval> = Vec::new();
    for iv in found {
        match resolved.last_mut() {
            Some(prev) if iv.end <= prev.end => {}
            Some(prev) if iv.start <= prev.end => {
                let mid = (iv.start + prev.end) / 2;
                let (lo, hi) = (prev.start, iv.end);
                prev.end = mid.max(lo);
                if mid < hi {
                    resolved.push(Interval::new(mid + 1, hi));
                }
            }
            _ => resolved.push(iv),
        }
    }
    resolved.retain(|a| a.len() >= min_length.max(1));
    ActivitySegmentation::from_activities(resolved, m)
}

/// Forward and backward growing plus combination. `nbrs` must already have the
/// diagonal band removed. Returns the segmentation and the inspected entry count.
pub fn segment_activities(
    nbrs: &Neighborhoods,
    w: usize,
    min_length: usize,
) -> Result<(ActivitySegmentation, u64)> {
    let (fwd, bwd) = rayon::join(
        || region_grow(nbrs, Direction::Forward, w),
        || region_grow(nbrs, Direction::Backward, w),
    );
    let (fwd, bwd) = (fwd?, bwd?);
    let seg = combine_regions(&fwd.regions, &bwd.regions, nbrs.len(), min_length);
    Ok((seg, fwd.ops + bwd.ops))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Symmetric neighbourhoods from a list of unordered pairs.
    fn nb(m: usize, pairs: &[(usize, usize)]) -> Neighborhoods {
        let mut sets = vec![Vec::new(); m];
        for &(i, j) in pairs {
            sets[i].push((j, 0.1));
            sets[j].push((i, 0.1));
        }
        Neighborhoods::from_sets(sets, 1.0).unwrap()
    }

    /// Stripes of a cyclic block `[a, b]` with the given period.
    fn block(a: usize, b: usize, period: usize) -> Vec<(usize, usize)> {
        let mut p = Vec::new();
        for i in a..=b {
            let mut j = i + period;
            while j <= b {
                p.push((i, j));
                j += period;
            }
        }
        p
    }

    #[test]
    fn band_examples() {
        let n = nb(200, &[(100, 125), (100, 131)]);
        let r = remove_diagonal_band(&n, 30.0).unwrap();
        assert_eq!(r.set(100), &[(131, 0.1)]);
        assert!(r.is_symmetric());
        let n = nb(5, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(remove_diagonal_band(&n, 1.0).unwrap().entry_count(), 0);
    }

    #[test]
    fn single_block() {
        let n = nb(100, &block(0, 99, 20));
        let f = region_grow(&n, Direction::Forward, 8).unwrap();
        assert_eq!(f.corners(), vec![99]);
        let b = region_grow(&n, Direction::Backward, 8).unwrap();
        assert_eq!(b.corners(), vec![0]);
        let seg = combine_regions(&f.regions, &b.regions, 100, 10);
        assert_eq!(seg.activities, vec![Interval::new(0, 99)]);
        assert!(seg.transitions.is_empty());
    }

    #[test]
    fn two_blocks_with_gap() {
        let mut pairs = block(0, 99, 20);
        pairs.extend(block(130, 229, 25));
        let n = nb(230, &pairs);
        let f = region_grow(&n, Direction::Forward, 8).unwrap();
        let b = region_grow(&n, Direction::Backward, 8).unwrap();
        assert_eq!(f.corners(), vec![99, 229]);
        assert_eq!(b.corners(), vec![0, 130]);
        let seg = combine_regions(&f.regions, &b.regions, 230, 10);
        assert_eq!(seg.activities, vec![Interval::new(0, 99), Interval::new(130, 229)]);
        assert_eq!(seg.transitions, vec![Interval::new(100, 129)]);
        assert!(seg.is_partition());
    }

    #[test]
    fn touching_blocks() {
        let mut pairs = block(0, 99, 20);
        pairs.extend(block(100, 199, 25));
        let n = nb(200, &pairs);
        let (seg, _) = segment_activities(&n, 8, 10).unwrap();
        assert_eq!(seg.activities, vec![Interval::new(0, 99), Interval::new(100, 199)]);
        assert!(seg.transitions.is_empty());
    }

    #[test]
    fn nothing_repeats() {
        let n = nb(50, &[]);
        let (seg, _) = segment_activities(&n, 8, 10).unwrap();
        assert!(seg.activities.is_empty());
        assert_eq!(seg.transitions, vec![Interval::new(0, 49)]);
        let f = region_grow(&n, Direction::Forward, 8).unwrap();
        assert_eq!(f.regions.len(), 1);
        assert_eq!(f.regions[0].corner, None);
    }

    #[test]
    fn short_activities_are_demoted() {
        let n = nb(100, &block(10, 30, 8));
        let (seg, _) = segment_activities(&n, 4, 30).unwrap();
        assert!(seg.activities.is_empty());
        assert!(seg.is_partition());
    }

    #[test]
    fn crossing_intervals_are_clipped() {
        let fwd = [Region { seed: 0, last: 59, corner: Some(59), reach: Some(0) }];
        let bwd = [
            Region { seed: 99, last: 40, corner: Some(40), reach: Some(99) },
            Region { seed: 39, last: 0, corner: Some(0), reach: Some(45) },
        ];
        let seg = combine_regions(&fwd, &bwd, 100, 1);
        assert!(seg.is_partition());
        assert_eq!(seg.activities, vec![Interval::new(0, 42), Interval::new(43, 59)]);
    }

    #[test]
    fn zero_stop_window() {
        assert!(region_grow(&nb(3, &[]), Direction::Forward, 0).is_err());
    }
}
