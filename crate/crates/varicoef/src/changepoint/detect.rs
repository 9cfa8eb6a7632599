//! Threshold detection and report assembly.

use super::cusum::CusumResult;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Maximal run of consecutive super-threshold probability positions,
/// in 0-based trace indices (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub start: usize,
    pub end: usize,
}

impl Region {
    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.end) as f64
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..=self.end).contains(&index)
    }
}

/// Statistics of one trace segment between detected change regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEstimate {
    /// Segment mean (the coefficient estimate).
    pub estimate: f64,
    /// Segment median; robust against boundary smearing.
    pub median: f64,
    pub variance: f64,
    /// Fraction of trace points in the segment.
    pub ratio: f64,
    /// Trace index range (inclusive).
    pub start: usize,
    pub end: usize,
}

/// Detection output for one probability series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    pub series_len: usize,
    pub threshold: f64,
    /// Super-threshold positions in trace indexing (0-based window
    /// centres; the paper counts each as one change point).
    pub change_indices: Vec<usize>,
    /// Merged gradual-change regions.
    pub regions: Vec<Region>,
    /// Per-segment statistics between region boundaries.
    pub segments: Vec<SegmentEstimate>,
    /// Probability series (window centre `j + 1` in trace indexing).
    pub probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cusum: Option<CusumResult>,
}

/// Thresholds a change probability series and computes segment
/// statistics of `trace` between the detected regions.
///
/// `probabilities[j]` is the window centred at trace index `j + 1`; the
/// trace has `probabilities.len() + 2` samples.
pub fn detect(trace: &[f64], probabilities: &[f64], threshold: f64) -> Result<ChangePointReport> {
    if probabilities.len() + 2 != trace.len() {
        return Err(Error::contract(format!(
            "probability series of {} does not match trace of {}",
            probabilities.len(),
            trace.len()
        )));
    }
    if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::contract("probabilities must lie in [0, 1]"));
    }
    let change_indices: Vec<usize> = probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > threshold)
        .map(|(j, _)| j + 1)
        .collect();

    let mut regions: Vec<Region> = Vec::new();
    for &idx in &change_indices {
        match regions.last_mut() {
            Some(r) if idx == r.end + 1 => r.end = idx,
            _ => regions.push(Region {
                start: idx,
                end: idx,
            }),
        }
    }

    // Segment boundaries: trace start, region edges, trace end.
    let mut segments = Vec::new();
    let mut cursor = 0usize;
    for r in &regions {
        if r.start > cursor {
            segments.push(segment_stats(trace, cursor, r.start - 1));
        }
        cursor = r.end + 1;
    }
    if cursor < trace.len() {
        segments.push(segment_stats(trace, cursor, trace.len() - 1));
    }

    Ok(ChangePointReport {
        series_len: probabilities.len(),
        threshold,
        change_indices,
        regions,
        segments,
        probabilities: probabilities.to_vec(),
        cusum: None,
    })
}

fn segment_stats(trace: &[f64], start: usize, end: usize) -> SegmentEstimate {
    let slice = &trace[start..=end];
    let n = slice.len() as f64;
    let mean = slice.iter().sum::<f64>() / n;
    let variance = slice.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let mut sorted = slice.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    SegmentEstimate {
        estimate: mean,
        median,
        variance,
        ratio: n / trace.len() as f64,
        start,
        end,
    }
}

impl ChangePointReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Threshold detection over a 2D probability field (interior nodes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldReport {
    /// Interior-node grid shape.
    pub shape: (usize, usize),
    pub threshold: f64,
    /// Number of super-threshold interior nodes.
    pub change_count: usize,
    /// Row-major mask of super-threshold interior nodes.
    pub change_mask: Vec<bool>,
}

pub fn detect_field(probabilities: &ndarray::Array2<f64>, threshold: f64) -> FieldReport {
    let mask: Vec<bool> = probabilities.iter().map(|&p| p > threshold).collect();
    FieldReport {
        shape: probabilities.dim(),
        threshold,
        change_count: mask.iter().filter(|&&m| m).count(),
        change_mask: mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_series_is_empty_report() {
        let trace = vec![1.5; 12];
        let probs = vec![0.0; 10];
        let report = detect(&trace, &probs, 1e-6).unwrap();
        assert!(report.change_indices.is_empty());
        assert!(report.regions.is_empty());
        assert_eq!(report.segments.len(), 1);
        assert!((report.segments[0].estimate - 1.5).abs() < 1e-15);
        assert_eq!(report.segments[0].ratio, 1.0);
    }

    #[test]
    fn single_spike_is_single_change_point() {
        let trace = vec![0.0; 12];
        let mut probs = vec![0.0; 10];
        probs[4] = 1.0; // trace index 5
        let report = detect(&trace, &probs, 1e-6).unwrap();
        assert_eq!(report.change_indices, vec![5]);
        assert_eq!(
            report.regions,
            vec![Region { start: 5, end: 5 }]
        );
        assert_eq!(report.segments.len(), 2);
        assert_eq!((report.segments[0].start, report.segments[0].end), (0, 4));
        assert_eq!((report.segments[1].start, report.segments[1].end), (6, 11));
    }

    #[test]
    fn consecutive_indices_merge_into_one_region() {
        let trace: Vec<f64> = (0..20).map(|i| if i < 10 { 0.5 } else { 1.0 }).collect();
        let mut probs = vec![0.0; 18];
        for j in 7..=10 {
            probs[j] = 0.9;
        }
        let report = detect(&trace, &probs, 1e-6).unwrap();
        assert_eq!(report.change_indices, vec![8, 9, 10, 11]);
        assert_eq!(report.regions, vec![Region { start: 8, end: 11 }]);
        assert_eq!(report.segments.len(), 2);
        assert!((report.segments[0].median - 0.5).abs() < 1e-15);
        assert!((report.segments[1].median - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_two_segment_trace_statistics() {
        let mut trace = vec![0.5; 10];
        trace.extend(vec![1.0; 10]);
        let mut probs = vec![0.0; 18];
        // Windows centred at 9 and 10 straddle the switch.
        probs[8] = 1.0;
        probs[9] = 1.0;
        let report = detect(&trace, &probs, 1e-6).unwrap();
        assert_eq!(report.regions.len(), 1);
        let seg = &report.segments;
        assert_eq!(seg.len(), 2);
        assert_eq!(seg[0].estimate, 0.5);
        assert_eq!(seg[1].estimate, 1.0);
        assert_eq!(seg[0].variance, 0.0);
    }

    #[test]
    fn json_roundtrip() {
        let trace = vec![0.1, 0.1, 0.9, 0.9, 0.9];
        let probs = vec![0.8, 0.0, 0.0];
        let mut report = detect(&trace, &probs, 1e-6).unwrap();
        report.cusum = Some(CusumResult {
            alpha: 0.0,
            k_hat: 2,
            profile: vec![0.1, 0.5, 0.2, 0.05],
            degenerate: false,
        });
        let text = report.to_json().unwrap();
        let back = ChangePointReport::from_json(&text).unwrap();
        assert_eq!(report, back);
    }
}
