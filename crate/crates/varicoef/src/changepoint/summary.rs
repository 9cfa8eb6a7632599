//! Mixture-component summary rows (estimate, variance, ratio), the
//! shape used for reporting coefficient estimates per state.

use super::gmm::GmmModel;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Known true value, when the run has ground truth.
    pub true_value: Option<f64>,
    /// Component mean.
    pub estimate: f64,
    /// Component (Gaussian) variance.
    pub variance: f64,
    /// Mixture proportion.
    pub ratio: f64,
}

/// Relative L2 error between a trace and its reference.
pub fn relative_l2(estimate: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    (num / den.max(1e-300)).sqrt()
}

/// One row per mixture component, ascending by mean. `true_values`
/// (also ascending) are paired positionally when the counts match.
pub fn segment_summary(model: &GmmModel, true_values: Option<&[f64]>) -> Result<Vec<SummaryRow>> {
    if model.d != 1 {
        return Err(Error::contract("summary rows are for scalar mixtures"));
    }
    let mut order: Vec<usize> = (0..model.k).collect();
    order.sort_by(|&a, &b| model.means[a][0].partial_cmp(&model.means[b][0]).unwrap());
    let rows = order
        .iter()
        .enumerate()
        .map(|(pos, &k)| SummaryRow {
            true_value: true_values.and_then(|tv| {
                if tv.len() == model.k {
                    Some(tv[pos])
                } else {
                    None
                }
            }),
            estimate: model.means[k][0],
            variance: model.covs[k][0],
            ratio: model.proportions[k],
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::changepoint::gmm::{em_fit_1d, GmmInit};

    #[test]
    fn constant_trace_single_component() {
        let trace = vec![1.5000001, 1.4999999, 1.5, 1.5, 1.5000002, 1.4999998];
        let model = em_fit_1d(&trace, 1, &GmmInit::default(), 1e-10, 100, 3).unwrap();
        let rows = segment_summary(&model, Some(&[1.5])).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].estimate - 1.5).abs() < 1e-6);
        assert_eq!(rows[0].ratio, 1.0);
        assert_eq!(rows[0].true_value, Some(1.5));
    }

    #[test]
    fn exact_two_segment_trace() {
        let mut trace = vec![0.5; 128];
        trace.extend(vec![1.0; 128]);
        let init = GmmInit::Explicit(Box::new(GmmModel {
            k: 2,
            d: 1,
            means: vec![vec![0.4], vec![1.1]],
            covs: vec![vec![0.01], vec![0.01]],
            proportions: vec![0.5, 0.5],
            loglik_trace: Vec::new(),
        }));
        let model = em_fit_1d(&trace, 2, &init, 1e-12, 200, 0).unwrap();
        let rows = segment_summary(&model, None).unwrap();
        assert!((rows[0].estimate - 0.5).abs() < 1e-12);
        assert!((rows[1].estimate - 1.0).abs() < 1e-12);
        assert!((rows[0].ratio - 0.5).abs() < 1e-12);
        assert!((rows[1].ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relative_l2_basics() {
        assert_eq!(relative_l2(&[1.0, 1.0], &[1.0, 1.0]), 0.0);
        let err = relative_l2(&[1.1, 0.9], &[1.0, 1.0]);
        assert!((err - (0.02f64 / 2.0).sqrt()).abs() < 1e-15);
    }
}
