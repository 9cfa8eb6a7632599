//! Piecewise coefficient schedules.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// One segment of a schedule: a constant, or the line `slope * t + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Const(f64),
    Ramp { slope: f64, intercept: f64 },
}

impl Segment {
    fn eval(&self, t: f64) -> f64 {
        match *self {
            Segment::Const(v) => v,
            Segment::Ramp { slope, intercept } => slope * t + intercept,
        }
    }
}

/// A time-varying coefficient as breakpoints plus per-interval segments.
///
/// `breakpoints` has one more entry than `segments` and covers
/// `[0, t_end]` without gaps. Evaluation is right-continuous at the
/// breakpoints; times outside the range clamp to the nearest segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSchedule {
    breakpoints: Vec<f64>,
    segments: Vec<Segment>,
}

impl PiecewiseSchedule {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<Segment>) -> Result<Self> {
        if breakpoints.len() != segments.len() + 1 || segments.is_empty() {
            return Err(Error::contract(
                "schedule needs one more breakpoint than segments",
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("breakpoints must be strictly ascending"));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("schedule breakpoint".into()));
        }
        Ok(Self {
            breakpoints,
            segments,
        })
    }

    pub fn constant(value: f64, t_end: f64) -> Self {
        Self {
            breakpoints: vec![0.0, t_end.max(f64::MIN_POSITIVE)],
            segments: vec![Segment::Const(value)],
        }
    }

    /// Constant steps: `values[i]` on `[times[i], times[i+1])`.
    pub fn steps(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let segments = values.into_iter().map(Segment::Const).collect();
        Self::new(breakpoints, segments)
    }

    pub fn t_start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Interior breakpoints (true change points of the schedule).
    pub fn interior_breakpoints(&self) -> &[f64] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.segment_index(t);
        self.segments[idx].eval(t)
    }

    fn segment_index(&self, t: f64) -> usize {
        if t < self.breakpoints[0] {
            return 0;
        }
        // Last interval whose left end is <= t; the final breakpoint
        // belongs to the last segment.
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(self.segments.len() - 1),
            Err(i) => (i - 1).min(self.segments.len() - 1),
        }
    }

    /// Extremes of the schedule over `[a, b]` (segments are monotone, so
    /// endpoints and breakpoints suffice).
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut consider = |t: f64| {
            let v = self.eval(t);
            lo = lo.min(v);
            hi = hi.max(v);
        };
        consider(a);
        consider(b);
        for &bp in &self.breakpoints {
            if bp > a && bp < b {
                consider(bp);
                // Left limit, in case the previous segment ends higher/lower.
                consider(bp - (bp - a) * 1e-12 - f64::MIN_POSITIVE);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_continuous_at_breakpoints() {
        let s = PiecewiseSchedule::steps(vec![0.0, 5.0, 10.0], vec![0.5, 1.0]).unwrap();
        assert_eq!(s.eval(4.999999), 0.5);
        assert_eq!(s.eval(5.0), 1.0);
        assert_eq!(s.eval(10.0), 1.0);
        assert_eq!(s.eval(0.0), 0.5);
    }

    #[test]
    fn gradual_ramp_case_endpoints_exact() {
        // 0.5 until 4.77, then 0.98 t - 4.19 until 5.27, then 1.
        let s = PiecewiseSchedule::new(
            vec![0.0, 4.77, 5.27, 10.0],
            vec![
                Segment::Const(0.5),
                Segment::Ramp {
                    slope: 0.98,
                    intercept: -4.19,
                },
                Segment::Const(1.0),
            ],
        )
        .unwrap();
        assert_eq!(s.eval(4.77), 0.98f64 * 4.77 - 4.19);
        let just_before = 5.27f64 - 1e-9;
        assert_eq!(s.eval(just_before), 0.98f64 * just_before - 4.19);
        assert_eq!(s.eval(5.27), 1.0);
    }

    #[test]
    fn coverage_and_ordering_validated() {
        assert!(PiecewiseSchedule::steps(vec![0.0, 5.0, 5.0], vec![1.0, 2.0]).is_err());
        assert!(PiecewiseSchedule::steps(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn range_on_sees_interior_extremes() {
        let s = PiecewiseSchedule::steps(vec![0.0, 2.0, 4.0, 10.0], vec![1.0, 3.0, 0.5]).unwrap();
        let (lo, hi) = s.range_on(0.0, 10.0);
        assert_eq!((lo, hi), (0.5, 3.0));
        let (lo, hi) = s.range_on(0.0, 1.0);
        assert_eq!((lo, hi), (1.0, 1.0));
    }
}
