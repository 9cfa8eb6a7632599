//! Registry of named experiment cases: coefficient schedules for the
//! Burgers' runs and the ellipse medium for the wave run.

use crate::forward::{PiecewiseSchedule, Segment};
use crate::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    C1_1,
    C1_2,
    C1_3,
    C2_1,
    C2_2,
    C3,
    Comparison,
    WaveEllipse,
    Custom,
}

impl CaseId {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(match text {
            "c1_1" => CaseId::C1_1,
            "c1_2" => CaseId::C1_2,
            "c1_3" => CaseId::C1_3,
            "c2_1" => CaseId::C2_1,
            "c2_2" => CaseId::C2_2,
            "c3" => CaseId::C3,
            "comparison" => CaseId::Comparison,
            "wave_ellipse" => CaseId::WaveEllipse,
            "custom" => CaseId::Custom,
            other => {
                return Err(Error::contract(format!(
                    "unknown case '{other}' (expected c1_1, c1_2, c1_3, c2_1, c2_2, c3, comparison, wave_ellipse, custom)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CaseId::C1_1 => "c1_1",
            CaseId::C1_2 => "c1_2",
            CaseId::C1_3 => "c1_3",
            CaseId::C2_1 => "c2_1",
            CaseId::C2_2 => "c2_2",
            CaseId::C3 => "c3",
            CaseId::Comparison => "comparison",
            CaseId::WaveEllipse => "wave_ellipse",
            CaseId::Custom => "custom",
        }
    }

    pub fn is_wave(&self) -> bool {
        matches!(self, CaseId::WaveEllipse)
    }
}

/// Ground-truth coefficient schedules for one Burgers' case.
#[derive(Debug, Clone)]
pub struct BurgersCase {
    pub lam1: PiecewiseSchedule,
    pub lam2: PiecewiseSchedule,
}

impl BurgersCase {
    /// Distinct coefficient states, ascending (for summary matching).
    pub fn distinct_values(schedule: &PiecewiseSchedule, t_end: f64, n: usize) -> Vec<f64> {
        let mut values: Vec<f64> = (1..=n)
            .map(|j| schedule.eval(t_end * j as f64 / n as f64))
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        values
    }
}

pub fn burgers_case(id: CaseId) -> Result<BurgersCase> {
    let t_end = 10.0;
    let lam2_01 = PiecewiseSchedule::constant(0.1, t_end);
    let case = match id {
        CaseId::C1_1 => BurgersCase {
            lam1: PiecewiseSchedule::constant(1.5, t_end),
            lam2: lam2_01,
        },
        CaseId::C1_2 => BurgersCase {
            lam1: PiecewiseSchedule::steps(vec![0.0, 5.0, t_end], vec![0.5, 1.0])?,
            lam2: lam2_01,
        },
        CaseId::C1_3 => BurgersCase {
            lam1: PiecewiseSchedule::new(
                vec![0.0, 4.77, 5.27, t_end],
                vec![
                    Segment::Const(0.5),
                    Segment::Ramp {
                        slope: 0.98,
                        intercept: -4.19,
                    },
                    Segment::Const(1.0),
                ],
            )?,
            lam2: lam2_01,
        },
        CaseId::C2_1 => BurgersCase {
            lam1: PiecewiseSchedule::steps(vec![0.0, 4.0, 5.0, t_end], vec![0.5, 1.0, 0.5])?,
            lam2: lam2_01,
        },
        CaseId::C2_2 => BurgersCase {
            lam1: PiecewiseSchedule::steps(
                vec![0.0, 2.0, 4.0, 8.0, t_end],
                vec![1.0, 0.5, 0.75, 0.5],
            )?,
            lam2: lam2_01,
        },
        CaseId::C3 => BurgersCase {
            lam1: PiecewiseSchedule::steps(
                vec![0.0, 2.0, 4.0, 6.0, 8.0, t_end],
                vec![1.0, 0.75, 0.5, 0.75, 1.0],
            )?,
            lam2: PiecewiseSchedule::steps(
                vec![0.0, 2.0, 4.0, 6.0, 8.0, t_end],
                vec![1.0, 1.33, 2.0, 1.33, 1.0],
            )?,
        },
        CaseId::Comparison => BurgersCase {
            lam1: PiecewiseSchedule::steps(
                vec![0.0, 2.0, 4.0, 6.0, 8.0, t_end],
                vec![1.0, 0.75, 0.5, 0.75, 1.0],
            )?,
            lam2: lam2_01,
        },
        CaseId::WaveEllipse | CaseId::Custom => {
            return Err(Error::contract(format!(
                "{} is not a Burgers' case",
                id.name()
            )))
        }
    };
    Ok(case)
}

/// Elliptical low-velocity anomaly in a uniform background.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EllipseAnomaly {
    pub center_x: f64,
    pub center_z: f64,
    pub semi_x: f64,
    pub semi_z: f64,
    pub inside: f64,
    pub outside: f64,
}

impl Default for EllipseAnomaly {
    fn default() -> Self {
        EllipseAnomaly {
            center_x: 0.6,
            center_z: 0.25,
            semi_x: 0.18,
            semi_z: 0.08,
            inside: 2.0,
            outside: 3.0,
        }
    }
}

impl EllipseAnomaly {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        let dx = (x - self.center_x) / self.semi_x;
        let dz = (z - self.center_z) / self.semi_z;
        dx * dx + dz * dz <= 1.0
    }

    /// Wave-speed field on an `(nx, nz)` node grid over the extents.
    pub fn speed_field(&self, nx: usize, nz: usize, x_extent: f64, z_extent: f64) -> Array2<f64> {
        Array2::from_shape_fn((nx, nz), |(i, j)| {
            let x = x_extent * i as f64 / (nx - 1) as f64;
            let z = z_extent * j as f64 / (nz - 1) as f64;
            if self.contains(x, z) {
                self.inside
            } else {
                self.outside
            }
        })
    }

    /// Boolean anomaly mask on the same grid.
    pub fn mask(&self, nx: usize, nz: usize, x_extent: f64, z_extent: f64) -> Vec<bool> {
        let mut out = Vec::with_capacity(nx * nz);
        for i in 0..nx {
            for j in 0..nz {
                let x = x_extent * i as f64 / (nx - 1) as f64;
                let z = z_extent * j as f64 / (nz - 1) as f64;
                out.push(self.contains(x, z));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_ids_roundtrip() {
        for name in [
            "c1_1",
            "c1_2",
            "c1_3",
            "c2_1",
            "c2_2",
            "c3",
            "comparison",
            "wave_ellipse",
        ] {
            assert_eq!(CaseId::parse(name).unwrap().name(), name);
        }
        assert!(CaseId::parse("bogus").is_err());
    }

    #[test]
    fn schedules_match_their_definitions() {
        let c12 = burgers_case(CaseId::C1_2).unwrap();
        assert_eq!(c12.lam1.eval(4.99), 0.5);
        assert_eq!(c12.lam1.eval(5.0), 1.0);
        assert_eq!(c12.lam2.eval(7.3), 0.1);

        let c3 = burgers_case(CaseId::C3).unwrap();
        assert_eq!(c3.lam1.eval(0.0), 1.0);
        assert_eq!(c3.lam1.eval(4.0), 0.5);
        assert_eq!(c3.lam2.eval(4.0), 2.0);
        assert_eq!(c3.lam2.eval(9.99), 1.0);

        let c13 = burgers_case(CaseId::C1_3).unwrap();
        assert_eq!(c13.lam1.eval(4.77), 0.98f64 * 4.77 - 4.19);

        let comp = burgers_case(CaseId::Comparison).unwrap();
        assert_eq!(comp.lam1.eval(6.5), 0.75);
        assert_eq!(comp.lam2.eval(6.5), 0.1);
    }

    #[test]
    fn distinct_values_of_c3() {
        let c3 = burgers_case(CaseId::C3).unwrap();
        let v1 = BurgersCase::distinct_values(&c3.lam1, 10.0, 256);
        assert_eq!(v1, vec![0.5, 0.75, 1.0]);
        let v2 = BurgersCase::distinct_values(&c3.lam2, 10.0, 256);
        assert_eq!(v2, vec![1.0, 1.33, 2.0]);
    }

    #[test]
    fn ellipse_separates_inside_and_outside() {
        let e = EllipseAnomaly::default();
        assert!(e.contains(0.6, 0.25));
        assert!(!e.contains(0.1, 0.05));
        let field = e.speed_field(33, 17, 1.2, 0.45);
        assert_eq!(field[(0, 0)], 3.0);
        let mask = e.mask(33, 17, 1.2, 0.45);
        assert_eq!(mask.iter().filter(|&&m| m).count() > 0, true);
    }
}
