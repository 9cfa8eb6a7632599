//! Change-point probabilities from soft classifications.
//!
//! 1D: `p_t = 1 - sum_k g[t-1,k] g[t,k] g[t+1,k]` over the sliding
//! three-point window. 2D: the same construction over the cross-shaped
//! five-point neighbourhood.

use crate::{Error, Result};
use ndarray::{Array2, ArrayView2, ArrayView3};

/// Probability series over interior positions `t = 1 .. n-2` (0-based);
/// entry `j` belongs to trace position `j + 1`.
pub fn change_prob_1d(resp: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let (n, k) = resp.dim();
    if n < 3 {
        return Err(Error::contract("need at least 3 samples for a window"));
    }
    let mut out = Vec::with_capacity(n - 2);
    for t in 1..n - 1 {
        let mut stay = 0.0;
        for j in 0..k {
            stay += resp[(t - 1, j)] * resp[(t, j)] * resp[(t + 1, j)];
        }
        out.push((1.0 - stay).clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Probability field over interior nodes of an `(nx, ny, k)`
/// responsibility grid; output is `(nx-2, ny-2)`.
pub fn change_prob_2d(resp: ArrayView3<'_, f64>) -> Result<Array2<f64>> {
    let (nx, ny, k) = resp.dim();
    if nx < 3 || ny < 3 {
        return Err(Error::contract("grid must be at least 3 x 3"));
    }
    let mut out = Array2::zeros((nx - 2, ny - 2));
    for x in 1..nx - 1 {
        for y in 1..ny - 1 {
            let mut stay = 0.0;
            for j in 0..k {
                stay += resp[(x, y, j)]
                    * resp[(x - 1, y, j)]
                    * resp[(x + 1, y, j)]
                    * resp[(x, y - 1, j)]
                    * resp[(x, y + 1, j)];
            }
            out[(x - 1, y - 1)] = (1.0 - stay).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn one_hot_series(assign: &[usize], k: usize) -> Array2<f64> {
        let mut g = Array2::zeros((assign.len(), k));
        for (i, &a) in assign.iter().enumerate() {
            g[(i, a)] = 1.0;
        }
        g
    }

    #[test]
    fn constant_one_hot_gives_zero() {
        let g = one_hot_series(&[1; 10], 2);
        let p = change_prob_1d(g.view()).unwrap();
        assert_eq!(p.len(), 8);
        assert!(p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_hot_switch_marks_exactly_the_touching_windows() {
        // Switch between trace indices 4 and 5: windows centred at 4 and 5
        // straddle it; everything else is pure.
        let assign = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let g = one_hot_series(&assign, 2);
        let p = change_prob_1d(g.view()).unwrap();
        for (j, &pj) in p.iter().enumerate() {
            let t = j + 1;
            let expect = if t == 4 || t == 5 { 1.0 } else { 0.0 };
            assert_eq!(pj, expect, "window centre {t}");
        }
    }

    #[test]
    fn uniform_two_component_series() {
        let g = Array2::from_elem((6, 2), 0.5);
        let p = change_prob_1d(g.view()).unwrap();
        for &pj in &p {
            assert!((pj - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn short_series_rejected() {
        let g = Array2::from_elem((2, 2), 0.5);
        assert!(change_prob_1d(g.view()).is_err());
    }

    #[test]
    fn constant_one_hot_field_gives_zeros() {
        let mut g = Array3::zeros((5, 5, 2));
        g.slice_mut(ndarray::s![.., .., 0]).fill(1.0);
        let p = change_prob_2d(g.view()).unwrap();
        assert_eq!(p.dim(), (3, 3));
        assert!(p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vertical_split_marks_adjacent_interior_columns() {
        // Columns 0..3 in component 0, columns 3..6 in component 1 (split
        // between x = 2 and x = 3).
        let (nx, ny) = (6, 5);
        let mut g = Array3::zeros((nx, ny, 2));
        for x in 0..nx {
            let comp = usize::from(x >= 3);
            for y in 0..ny {
                g[(x, y, comp)] = 1.0;
            }
        }
        let p = change_prob_2d(g.view()).unwrap();
        for x in 1..nx - 1 {
            for y in 1..ny - 1 {
                let expect = if x == 2 || x == 3 { 1.0 } else { 0.0 };
                assert_eq!(p[(x - 1, y - 1)], expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn uniform_two_component_field() {
        let g = Array3::from_elem((4, 4, 2), 0.5);
        let p = change_prob_2d(g.view()).unwrap();
        for &v in p.iter() {
            assert!((v - 0.9375).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_naive_direct_evaluation() {
        use crate::rng::stream;
        use rand::Rng;
        let mut rng = stream(77, "prob");
        for _ in 0..10 {
            let n = rng.gen_range(5..40);
            let k = rng.gen_range(1..5);
            let mut g = Array2::zeros((n, k));
            for i in 0..n {
                let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
                for (j, &x) in row.iter().enumerate() {
                    g[(i, j)] = x;
                }
            }
            let p = change_prob_1d(g.view()).unwrap();
            for t in 1..n - 1 {
                let mut stay = 0.0;
                for j in 0..k {
                    stay += g[(t - 1, j)] * g[(t, j)] * g[(t + 1, j)];
                }
                assert!((p[t - 1] - (1.0 - stay)).abs() <= 1e-14);
            }
        }
    }
}
