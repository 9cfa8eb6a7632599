//! Observation sampling from solved fields.

use super::field::Field;
use crate::rng::stream;
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use rand::seq::index::sample;

/// Observed data: grid-node coordinates (one column per observation,
/// rows in the field's axis order) and the field values there.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub coords: Array2<f64>,
    pub values: Array1<f64>,
    /// Flat node indices into the source field, ascending.
    pub node_indices: Vec<usize>,
    pub provenance: String,
}

/// Uniform sample of `n_o` distinct grid nodes, deterministic under `seed`.
pub fn sample_observations(field: &Field, n_o: usize, seed: u64) -> Result<ObservationSet> {
    let total = field.n_values();
    if n_o > total {
        return Err(Error::contract(format!(
            "requested {n_o} observations from a grid with {total} nodes"
        )));
    }
    let mut rng = stream(seed, "observations");
    let mut indices: Vec<usize> = sample(&mut rng, total, n_o).into_vec();
    indices.sort_unstable();
    let d = field.axes.len();
    let mut coords = Array2::zeros((d, n_o));
    let mut values = Array1::zeros(n_o);
    for (col, &flat) in indices.iter().enumerate() {
        for (row, c) in field.unravel(flat).into_iter().enumerate() {
            coords[(row, col)] = c;
        }
        values[col] = field.values[flat];
    }
    Ok(ObservationSet {
        coords,
        values,
        node_indices: indices,
        provenance: format!("uniform_random(seed={seed}) from {}", field.provenance),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::field::AxisMeta;

    fn grid_field(nx: usize, nt: usize) -> Field {
        Field::new(
            vec![
                AxisMeta {
                    name: "x".into(),
                    coords: (0..nx).map(|i| i as f64).collect(),
                },
                AxisMeta {
                    name: "t".into(),
                    coords: (0..nt).map(|j| j as f64 * 0.1).collect(),
                },
            ],
            (0..nx * nt).map(|k| k as f64).collect(),
            "unit",
        )
        .unwrap()
    }

    #[test]
    fn full_sample_hits_every_node_once() {
        let f = grid_field(8, 4);
        let obs = sample_observations(&f, 32, 9).unwrap();
        assert_eq!(obs.node_indices, (0..32).collect::<Vec<_>>());
        assert_eq!(obs.values[5], 5.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let f = grid_field(16, 16);
        let a = sample_observations(&f, 40, 1234).unwrap();
        let b = sample_observations(&f, 40, 1234).unwrap();
        let c = sample_observations(&f, 40, 1235).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.node_indices, c.node_indices);
    }

    #[test]
    fn oversampling_is_rejected() {
        let f = grid_field(4, 4);
        assert!(sample_observations(&f, 17, 0).is_err());
    }

    #[test]
    fn spatial_histogram_is_uniform_within_4_sigma() {
        // 4000 draws from a 256 x 257 grid, binned by x into 16 bins of
        // 16 nodes each: each bin is hypergeometric with mean 250 and
        // sigma < 15.4, so a 4-sigma corridor is +/- 61.
        let f = grid_field(256, 257);
        let obs = sample_observations(&f, 4000, 42).unwrap();
        let mut bins = [0usize; 16];
        for &flat in &obs.node_indices {
            let ix = flat / 257;
            bins[ix / 16] += 1;
        }
        let expect = 4000.0 / 16.0;
        let sigma = (4000.0f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        for (b, &count) in bins.iter().enumerate() {
            let dev = (count as f64 - expect).abs();
            assert!(dev <= 4.0 * sigma, "bin {b}: count {count}, dev {dev}");
        }
    }
}
