//! Cross-domain similarity local scaling over a precomputed cosine matrix.
//!
//! `csls(i, j) = 2·sim(i, j) − r_row(i) − r_col(j)`, where `r_row(i)` is the
//! mean of the `k` largest entries of row `i` and `r_col(j)` the same for
//! column `j`. Shared by dictionary induction and retrieval evaluation.

use crate::exec::Exec;
use crate::linalg::DenseMatrix;
use crate::{Error, Result};

/// Mean of the `k` largest values, summed in descending order so the result
/// does not depend on how the selection happened to permute the slice.
pub fn top_k_mean(values: &[f64], k: usize) -> f64 {
    let mut buf = values.to_vec();
    let k = k.min(buf.len());
    if k == 0 {
        return 0.0;
    }
    let desc = |a: &f64, b: &f64| b.total_cmp(a);
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, desc);
    }
    let top = &mut buf[..k];
    top.sort_unstable_by(desc);
    top.iter().sum::<f64>() / k as f64
}

fn check_k(k: usize, candidates: usize) -> Result<()> {
    if k == 0 || k >= candidates {
        return Err(Error::NeighbourhoodTooLarge { k, candidates });
    }
    Ok(())
}

pub fn row_neighbourhoods(sim: &DenseMatrix, k: usize, exec: Exec) -> Result<Vec<f64>> {
    check_k(k, sim.cols())?;
    Ok(exec.map_range(sim.rows(), |i| top_k_mean(sim.row(i), k)))
}

/// Column neighbourhoods average over at most `k` queries; fewer queries
/// than `k` simply means all of them.
pub fn col_neighbourhoods(sim: &DenseMatrix, k: usize, exec: Exec) -> Result<Vec<f64>> {
    if k == 0 || sim.rows() == 0 {
        return Err(Error::NeighbourhoodTooLarge { k, candidates: sim.cols() });
    }
    let t = sim.transpose();
    Ok(exec.map_range(t.rows(), |j| top_k_mean(t.row(j), k)))
}

/// Rescores a cosine matrix in place of a copy. Rows are queries, columns
/// candidates; both neighbourhoods use the same `k`.
pub fn csls_matrix(sim: &DenseMatrix, k: usize, exec: Exec) -> Result<DenseMatrix> {
    let r_row = row_neighbourhoods(sim, k, exec)?;
    let r_col = col_neighbourhoods(sim, k, exec)?;
    let mut out = sim.clone();
    let cols = sim.cols();
    exec.for_each_row_mut(out.as_mut_slice(), cols, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 2.0 * *v - r_row[i] - r_col[j];
        }
    });
    Ok(out)
}

/// Index of the largest value; ties go to the lowest index. NaN and
/// `-inf` entries are never selected. `None` for an all-excluded slice.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() || v == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn naive(sim: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
        let n = sim.len();
        let m = sim[0].len();
        let mean_top = |mut v: Vec<f64>| {
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let k = k.min(v.len());
            v[..k].iter().sum::<f64>() / k as f64
        };
        let rr: Vec<f64> = sim.iter().map(|r| mean_top(r.clone())).collect();
        let rc: Vec<f64> = (0..m).map(|j| mean_top((0..n).map(|i| sim[i][j]).collect())).collect();
        (0..n)
            .map(|i| (0..m).map(|j| 2.0 * sim[i][j] - rr[i] - rc[j]).collect())
            .collect()
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for (n, m) in [(10, 20), (200, 200), (37, 11)] {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let sim = DenseMatrix::from_rows(&rows).unwrap();
            let expect = naive(&rows, 10);
            for exec in [Exec::Sequential, Exec::default()] {
                let got = csls_matrix(&sim, 10, exec).unwrap();
                for i in 0..n {
                    for j in 0..m {
                        assert!((got.get(i, j) - expect[i][j]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn neighbourhood_must_be_smaller_than_candidates() {
        let sim = DenseMatrix::zeros(20, 10);
        assert!(matches!(
            csls_matrix(&sim, 10, Exec::Sequential),
            Err(Error::NeighbourhoodTooLarge { k: 10, candidates: 10 })
        ));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), Some(1));
        assert_eq!(argmax(&[f64::NEG_INFINITY, f64::NAN]), None);
        assert_eq!(argmax(&[f64::NEG_INFINITY, -3.0]), Some(1));
    }
}
