//! Unsupervised mapping of two monolingual embedding spaces into a common
//! space: normalization, similarity-distribution initialization, stochastic
//! self-learning with Procrustes steps, and a final symmetric re-weighting.
//!
//! Row order matters: the first `k_vocab` rows of each matrix are taken to be
//! the most frequent subwords and are the only ones used for induction. The
//! learned transforms are applied to every row.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csls::{argmax, csls_matrix};
use crate::embeddings::{cosine, EmbeddingMatrix};
use crate::exec::Exec;
use crate::linalg::{a_bt, orthogonality_error, paired_cross_covariance, transform, DenseMatrix};
use crate::{Error, Result};

/// Fewest rows (both sides together) the initialization accepts.
pub const MIN_INIT_ROWS: usize = 32;

const MAX_NORMALIZE_ROUNDS: usize = 100;
const NORMALIZE_TOLERANCE: f64 = 1e-12;

fn normalize_rows(m: &mut EmbeddingMatrix, replaced: &mut Vec<usize>) {
    let dim = m.dim();
    let fill = 1.0 / (dim as f64).sqrt();
    for i in 0..m.rows() {
        let n = m.row_norm(i);
        let row = m.row_mut(i);
        if n > 0.0 && n.is_finite() {
            row.iter_mut().for_each(|v| *v /= n);
        } else {
            row.iter_mut().for_each(|v| *v = fill);
            replaced.push(i);
        }
    }
}

/// Subtracts column means; returns the largest absolute mean removed.
fn center_columns(m: &mut EmbeddingMatrix) -> f64 {
    if m.rows() == 0 {
        return 0.0;
    }
    let mut mean = vec![0.0; m.dim()];
    for row in m.iter_rows() {
        mean.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    let n = m.rows() as f64;
    mean.iter_mut().for_each(|a| *a /= n);
    for i in 0..m.rows() {
        m.row_mut(i).iter_mut().zip(&mean).for_each(|(v, a)| *v -= a);
    }
    mean.iter().fold(0.0, |acc, a| acc.max(a.abs()))
}

/// Unit length, mean centering, unit length. Also returns the rows that
/// had zero norm at either length step and were replaced by a uniform vector.
pub fn normalize_embeddings_report(e: &EmbeddingMatrix) -> Result<(EmbeddingMatrix, Vec<usize>)> {
    if !e.is_finite() {
        return Err(Error::Degenerate("embedding matrix contains non-finite values".into()));
    }
    let mut m = e.clone();
    let mut replaced = Vec::new();
    normalize_rows(&mut m, &mut replaced);
    // Re-normalizing shifts the column means again; repeat the pair until
    // the means vanish so that the result is a fixed point.
    for round in 0..MAX_NORMALIZE_ROUNDS {
        let drift = center_columns(&mut m);
        normalize_rows(&mut m, &mut replaced);
        if round > 0 && drift < NORMALIZE_TOLERANCE {
            break;
        }
    }
    replaced.sort_unstable();
    replaced.dedup();
    if !replaced.is_empty() {
        log::warn!("{} zero-norm rows replaced by a uniform vector", replaced.len());
    }
    Ok((m, replaced))
}

pub fn normalize_embeddings(e: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    normalize_embeddings_report(e).map(|(m, _)| m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedDictionary {
    /// `(source row, target row)`, sorted by source row.
    pub pairs: Vec<(usize, usize)>,
    /// Mean cosine of the paired rows once the source side is rotated by
    /// the Procrustes solution fitted to the pairs themselves.
    pub mean_similarity: f64,
    /// Mean similarity of the paired sorted-similarity fingerprints.
    pub fingerprint_similarity: f64,
}

fn fingerprints(m: &EmbeddingMatrix, exec: Exec) -> Result<EmbeddingMatrix> {
    let sim = a_bt(m, m, exec)?;
    let n = sim.rows();
    let mut sorted = EmbeddingMatrix::zeros(n, n);
    exec.for_each_row_mut(sorted.as_mut_slice(), n, |i, row| {
        row.copy_from_slice(sim.row(i));
        row.sort_unstable_by(f64::total_cmp);
    });
    normalize_embeddings(&sorted)
}

/// Mutual nearest neighbours of `sim` (rows against columns), ties to the
/// lowest index. Entries equal to `-inf` are never chosen.
fn mutual_pairs(sim: &DenseMatrix, exec: Exec) -> Vec<(usize, usize)> {
    let fwd = exec.map_range(sim.rows(), |i| argmax(sim.row(i)));
    let t = sim.transpose();
    let bwd = exec.map_range(t.rows(), |j| argmax(t.row(j)));
    fwd.iter()
        .enumerate()
        .filter_map(|(i, f)| f.filter(|&j| bwd[j] == Some(i)).map(|j| (i, j)))
        .collect()
}

/// Seed dictionary from sorted within-language similarity distributions.
/// Both sides use the same prefix length `min(k_vocab, |X|, |Z|)` so their
/// fingerprints are comparable.
pub fn unsupervised_init(x: &EmbeddingMatrix, z: &EmbeddingMatrix, k_vocab: usize, exec: Exec) -> Result<SeedDictionary> {
    if x.dim() != z.dim() {
        return Err(Error::DimensionMismatch(format!("source dimension {}, target {}", x.dim(), z.dim())));
    }
    let total = x.rows().min(k_vocab) + z.rows().min(k_vocab);
    let s = x.rows().min(z.rows()).min(k_vocab);
    if total < MIN_INIT_ROWS || s == 0 {
        return Err(Error::Degenerate(format!(
            "{total} rows available for initialization, at least {MIN_INIT_ROWS} needed"
        )));
    }
    let prefix: Vec<usize> = (0..s).collect();
    let fx = fingerprints(&x.select_rows(&prefix), exec)?;
    let fz = fingerprints(&z.select_rows(&prefix), exec)?;
    let sim = a_bt(&fx, &fz, exec)?;
    let pairs = mutual_pairs(&sim, exec);
    if pairs.is_empty() {
        return Ok(SeedDictionary {
            pairs,
            mean_similarity: 0.0,
            fingerprint_similarity: 0.0,
        });
    }
    let n = pairs.len() as f64;
    let fingerprint_similarity = pairs.iter().map(|&(i, j)| sim.get(i, j)).sum::<f64>() / n;
    let w = procrustes(x, z, &pairs, 0)?;
    let xw = transform(&x.select_rows(&prefix), &w, exec);
    let mean_similarity = pairs.iter().map(|&(i, j)| cosine(xw.row(i), z.row(j))).sum::<f64>() / n;
    Ok(SeedDictionary {
        pairs,
        mean_similarity,
        fingerprint_similarity,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfLearnConfig {
    pub max_iters: usize,
    /// Rows of each side considered during induction.
    pub k_vocab: usize,
    pub csls_k: usize,
    pub initial_keep: f64,
    pub keep_multiplier: f64,
    /// Iterations without objective improvement before the keep
    /// probability grows.
    pub stall_interval: usize,
    pub threshold: f64,
    pub reweight: f64,
    pub seed: u64,
}

impl Default for SelfLearnConfig {
    fn default() -> Self {
        SelfLearnConfig {
            max_iters: 100,
            k_vocab: 4000,
            csls_k: 10,
            initial_keep: 0.1,
            keep_multiplier: 2.0,
            stall_interval: 50,
            threshold: 1e-6,
            reweight: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub keep_probability: f64,
    pub dictionary_size: usize,
    pub mean_similarity: f64,
    pub orthogonality_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingTrace {
    pub iterations: Vec<TraceEntry>,
    pub converged: bool,
    pub final_dictionary_size: usize,
    pub final_mean_similarity: f64,
}

impl MappingTrace {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MappedSpaces {
    pub x_mapped: EmbeddingMatrix,
    pub z_mapped: EmbeddingMatrix,
    /// Last Procrustes solution, mapping source rows onto the target space.
    pub rotation: DMatrix<f64>,
    /// Final dictionary, induced deterministically.
    pub dictionary: Vec<(usize, usize)>,
    pub trace: MappingTrace,
}

impl MappedSpaces {
    pub fn converged(&self) -> bool {
        self.trace.converged
    }
}

fn svd(m: DMatrix<f64>, iteration: usize) -> Result<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    m.try_svd(true, true, f64::EPSILON, 0).ok_or(Error::Svd { iteration })
}

fn procrustes(x: &EmbeddingMatrix, z: &EmbeddingMatrix, pairs: &[(usize, usize)], iteration: usize) -> Result<DMatrix<f64>> {
    let m = paired_cross_covariance(x, z, pairs);
    let s = svd(m, iteration)?;
    let (u, vt) = (s.u.ok_or(Error::Svd { iteration })?, s.v_t.ok_or(Error::Svd { iteration })?);
    Ok(u * vt)
}

struct Induced {
    pairs: Vec<(usize, usize)>,
    mean_similarity: f64,
}

fn induce(
    xw: &EmbeddingMatrix,
    z: &EmbeddingMatrix,
    csls_k: usize,
    keep: f64,
    rng: &mut ChaCha8Rng,
    exec: Exec,
) -> Result<Induced> {
    let sim = a_bt(xw, z, exec)?;
    let mut scores = csls_matrix(&sim, csls_k, exec)?;
    if keep < 1.0 {
        for v in scores.as_mut_slice() {
            if rng.random::<f64>() >= keep {
                *v = f64::NEG_INFINITY;
            }
        }
    }
    let pairs = mutual_pairs(&scores, exec);
    let mean_similarity = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|&(i, j)| sim.get(i, j)).sum::<f64>() / pairs.len() as f64
    };
    Ok(Induced { pairs, mean_similarity })
}

/// `(W, W⁻¹)` with `W` whitening the given rows; near-zero singular
/// directions are left unscaled.
fn whitening(m: &EmbeddingMatrix, rows: &[usize], iteration: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sub = m.select_rows(rows);
    let a = DMatrix::from_row_slice(sub.rows(), sub.dim(), sub.as_slice());
    let s = svd(a, iteration)?;
    let vt = s.v_t.ok_or(Error::Svd { iteration })?;
    let d = vt.nrows();
    let smax = s.singular_values.max();
    let floor = smax * 1e-10;
    let inv: DVector<f64> = s.singular_values.map(|v| if v > floor { 1.0 / v } else { 1.0 });
    let fwd: DVector<f64> = s.singular_values.map(|v| if v > floor { v } else { 1.0 });
    let v = vt.transpose();
    let w = &v * DMatrix::from_diagonal(&inv) * &vt;
    let w_inv = &v * DMatrix::from_diagonal(&fwd) * &vt;
    debug_assert_eq!(w.nrows(), d);
    Ok((w, w_inv))
}

fn reweight_symmetric(
    x: &EmbeddingMatrix,
    z: &EmbeddingMatrix,
    pairs: &[(usize, usize)],
    power: f64,
    iteration: usize,
    exec: Exec,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let src: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let trg: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let (wx1, wx1_inv) = whitening(x, &src, iteration)?;
    let (wz1, wz1_inv) = whitening(z, &trg, iteration)?;
    let xw = transform(x, &wx1, exec);
    let zw = transform(z, &wz1, exec);
    let m = paired_cross_covariance(&xw, &zw, pairs);
    let s = svd(m, iteration)?;
    let wx2 = s.u.ok_or(Error::Svd { iteration })?;
    let wz2 = s.v_t.ok_or(Error::Svd { iteration })?.transpose();
    let scale = s.singular_values.map(|v| v.powf(power));
    let sx = DMatrix::from_diagonal(&scale);
    // rotate, re-weight, then de-whiten in the rotated coordinates
    let tx = &wx1 * &wx2 * &sx * wx2.transpose() * &wx1_inv * &wx2;
    let tz = &wz1 * &wz2 * &sx * wz2.transpose() * &wz1_inv * &wz2;
    Ok((transform(x, &tx, exec), transform(z, &tz, exec)))
}

/// Self-learning from a seed dictionary. Inputs should already be
/// normalized; rows beyond `cfg.k_vocab` only receive the final transform.
pub fn self_learn(
    x: &EmbeddingMatrix,
    z: &EmbeddingMatrix,
    seed: &SeedDictionary,
    cfg: &SelfLearnConfig,
    exec: Exec,
) -> Result<MappedSpaces> {
    if x.dim() != z.dim() {
        return Err(Error::DimensionMismatch(format!("source dimension {}, target {}", x.dim(), z.dim())));
    }
    if seed.pairs.is_empty() {
        return Err(Error::InvalidArgument("seed dictionary is empty".into()));
    }
    if !(cfg.initial_keep > 0.0 && cfg.initial_keep <= 1.0) || cfg.keep_multiplier <= 1.0 {
        return Err(Error::InvalidArgument("keep probability must lie in (0, 1] and grow".into()));
    }
    let xs = x.select_rows(&(0..x.rows().min(cfg.k_vocab)).collect::<Vec<_>>());
    let zs = z.select_rows(&(0..z.rows().min(cfg.k_vocab)).collect::<Vec<_>>());
    if let Some(&(i, j)) = seed.pairs.iter().find(|&&(i, j)| i >= xs.rows() || j >= zs.rows()) {
        return Err(Error::InvalidArgument(format!("seed pair ({i}, {j}) lies outside the induction vocabulary")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dict = seed.pairs.clone();
    let mut keep = cfg.initial_keep;
    let mut best = f64::NEG_INFINITY;
    let mut last_improvement = 0;
    let mut previous_full: Option<f64> = None;
    let mut trace = Vec::new();
    let mut converged = false;

    for it in 0..cfg.max_iters {
        let w = procrustes(&xs, &zs, &dict, it)?;
        let ortho = orthogonality_error(&w);
        let xw = transform(&xs, &w, exec);
        let induced = induce(&xw, &zs, cfg.csls_k, keep, &mut rng, exec)?;
        if induced.pairs.is_empty() {
            return Err(Error::MappingCollapsed { iteration: it });
        }
        trace.push(TraceEntry {
            iteration: it,
            keep_probability: keep,
            dictionary_size: induced.pairs.len(),
            mean_similarity: induced.mean_similarity,
            orthogonality_error: ortho,
        });
        log::debug!(
            "iteration {it}: keep {keep:.3}, {} pairs, mean similarity {:.6}",
            induced.pairs.len(),
            induced.mean_similarity
        );
        dict = induced.pairs;
        if keep >= 1.0 {
            if previous_full.is_some_and(|p| induced.mean_similarity - p < cfg.threshold) {
                converged = true;
                break;
            }
            previous_full = Some(induced.mean_similarity);
        } else if induced.mean_similarity - best >= cfg.threshold {
            best = induced.mean_similarity;
            last_improvement = it;
        } else if it - last_improvement >= cfg.stall_interval {
            keep = (keep * cfg.keep_multiplier).min(1.0);
            best = f64::NEG_INFINITY;
            last_improvement = it;
        }
    }
    if !converged {
        log::warn!("self-learning stopped after {} iterations without converging", cfg.max_iters);
    }

    let last = trace.len();
    let rotation = procrustes(&xs, &zs, &dict, last)?;
    let xw = transform(&xs, &rotation, exec);
    let final_dict = induce(&xw, &zs, cfg.csls_k, 1.0, &mut rng, exec)?;
    if final_dict.pairs.is_empty() {
        return Err(Error::MappingCollapsed { iteration: last });
    }
    let (x_mapped, z_mapped) = reweight_symmetric(x, z, &final_dict.pairs, cfg.reweight, last, exec)?;
    Ok(MappedSpaces {
        x_mapped,
        z_mapped,
        rotation,
        dictionary: final_dict.pairs.clone(),
        trace: MappingTrace {
            iterations: trace,
            converged,
            final_dictionary_size: final_dict.pairs.len(),
            final_mean_similarity: final_dict.mean_similarity,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        EmbeddingMatrix::from_vec(rows, dim, data).unwrap()
    }

    fn random_rotation(dim: usize, seed: u64) -> DMatrix<f64> {
        let g = gaussian(dim, dim, seed);
        let m = DMatrix::from_row_slice(dim, dim, g.as_slice());
        m.qr().q()
    }

    fn full_keep() -> SelfLearnConfig {
        SelfLearnConfig {
            initial_keep: 1.0,
            ..SelfLearnConfig::default()
        }
    }

    #[test]
    fn normalization_gives_unit_rows_and_centered_intermediate() {
        let e = gaussian(200, 16, 1);
        let n = normalize_embeddings(&e).unwrap();
        for i in 0..n.rows() {
            assert!((n.row_norm(i) - 1.0).abs() < 1e-9);
        }
        let mut mid = e.clone();
        normalize_rows(&mut mid, &mut Vec::new());
        center_columns(&mut mid);
        for c in 0..16 {
            let mean: f64 = (0..200).map(|i| mid.row(i)[c]).sum::<f64>() / 200.0;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_is_nearly_idempotent() {
        // Embeddings with a shared offset, as skip-gram vectors tend to have.
        let mut e = gaussian(2000, 32, 2);
        for i in 0..e.rows() {
            e.row_mut(i)[0] += 3.0;
        }
        let once = normalize_embeddings(&e).unwrap();
        let twice = normalize_embeddings(&once).unwrap();
        let worst = once
            .as_slice()
            .iter()
            .zip(twice.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "max change {worst}");
    }

    #[test]
    fn zero_rows_are_replaced_and_reported() {
        let mut e = gaussian(10, 4, 3);
        e.row_mut(4).iter_mut().for_each(|v| *v = 0.0);
        let (n, replaced) = normalize_embeddings_report(&e).unwrap();
        assert_eq!(replaced, vec![4]);
        assert!(n.is_finite());
        assert!(normalize_embeddings(&EmbeddingMatrix::from_rows(&[vec![f64::NAN]]).unwrap()).is_err());
    }

    #[test]
    fn init_recovers_a_permutation() {
        let x = normalize_embeddings(&gaussian(300, 24, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut perm: Vec<usize> = (0..300).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        // z row perm[i] is x row i
        let mut inv = vec![0; 300];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let z = x.select_rows(&inv);
        let seed = unsupervised_init(&x, &z, 4000, Exec::default()).unwrap();
        let hits = seed.pairs.iter().filter(|&&(i, j)| perm[i] == j).count();
        assert!(hits as f64 >= 0.9 * 300.0, "{hits} of 300 recovered");
    }

    #[test]
    fn init_on_identical_spaces_is_identity() {
        let x = normalize_embeddings(&gaussian(100, 16, 6)).unwrap();
        let seed = unsupervised_init(&x, &x, 4000, Exec::Sequential).unwrap();
        assert_eq!(seed.pairs, (0..100).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn init_on_unrelated_spaces_finds_little() {
        let x = normalize_embeddings(&gaussian(2000, 32, 7)).unwrap();
        let z = normalize_embeddings(&gaussian(2000, 32, 8)).unwrap();
        let seed = unsupervised_init(&x, &z, 4000, Exec::default()).unwrap();
        assert!(seed.mean_similarity < 0.3, "{}", seed.mean_similarity);
    }

    #[test]
    fn init_rejects_tiny_inputs() {
        let x = gaussian(15, 8, 9);
        assert!(matches!(unsupervised_init(&x, &x, 4000, Exec::Sequential), Err(Error::Degenerate(_))));
    }

    #[test]
    fn planted_rotation_is_recovered() {
        let dim = 32;
        let x = normalize_embeddings(&gaussian(600, dim, 10)).unwrap();
        let r = random_rotation(dim, 11);
        let mut z = transform(&x, &r, Exec::Sequential);
        let noise = gaussian(600, dim, 12);
        z.as_mut_slice().iter_mut().zip(noise.as_slice()).for_each(|(v, n)| *v += 0.01 * n);
        let seed = unsupervised_init(&x, &z, 4000, Exec::default()).unwrap();
        let cfg = SelfLearnConfig {
            max_iters: 400,
            stall_interval: 10,
            ..SelfLearnConfig::default()
        };
        let mapped = self_learn(&x, &z, &seed, &cfg, Exec::default()).unwrap();
        let rel = (&mapped.rotation - &r).norm() / r.norm();
        assert!(rel < 0.05, "relative error {rel}");
        for t in &mapped.trace.iterations {
            assert!(t.orthogonality_error < 1e-6);
        }
        assert!(mapped.converged());
    }

    #[test]
    fn identical_spaces_form_a_fixed_point() {
        let x = normalize_embeddings(&gaussian(300, 16, 13)).unwrap();
        let seed = unsupervised_init(&x, &x, 4000, Exec::default()).unwrap();
        let mapped = self_learn(&x, &x, &seed, &full_keep(), Exec::default()).unwrap();
        assert!(mapped.converged());
        assert!(mapped.trace.final_mean_similarity > 0.999);
        let eye = DMatrix::<f64>::identity(16, 16);
        assert!((&mapped.rotation - eye).norm() < 1e-6);
        for i in 0..x.rows() {
            let a = mapped.x_mapped.row(i);
            let b = mapped.z_mapped.row(i);
            assert!(crate::embeddings::cosine(a, b) > 0.999999);
        }
    }

    #[test]
    fn objective_is_monotone_at_fixed_keep() {
        let dim = 24;
        let x = normalize_embeddings(&gaussian(500, dim, 14)).unwrap();
        let r = random_rotation(dim, 15);
        let mut z = transform(&x, &r, Exec::Sequential);
        let noise = gaussian(500, dim, 16);
        z.as_mut_slice().iter_mut().zip(noise.as_slice()).for_each(|(v, n)| *v += 0.05 * n);
        // a deliberately poor seed: a tenth of the true pairs plus noise pairs
        let pairs: Vec<(usize, usize)> = (0..500).step_by(10).map(|i| (i, i)).chain((1..500).step_by(50).map(|i| (i, (i * 7) % 500))).collect();
        let seed = SeedDictionary {
            pairs,
            mean_similarity: 0.0,
            fingerprint_similarity: 0.0,
        };
        let mapped = self_learn(&x, &z, &seed, &full_keep(), Exec::default()).unwrap();
        let sims: Vec<f64> = mapped.trace.iterations.iter().map(|t| t.mean_similarity).collect();
        for w in sims.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "{sims:?}");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let x = normalize_embeddings(&gaussian(200, 16, 17)).unwrap();
        let r = random_rotation(16, 18);
        let z = transform(&x, &r, Exec::Sequential);
        let seed = unsupervised_init(&x, &z, 4000, Exec::default()).unwrap();
        let cfg = SelfLearnConfig {
            max_iters: 30,
            stall_interval: 5,
            seed: 9,
            ..SelfLearnConfig::default()
        };
        let a = self_learn(&x, &z, &seed, &cfg, Exec::default()).unwrap();
        let b = self_learn(&x, &z, &seed, &cfg, Exec::Sequential).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.x_mapped, b.x_mapped);
    }

    #[test]
    fn empty_seed_is_rejected() {
        let x = gaussian(40, 8, 19);
        let seed = SeedDictionary {
            pairs: vec![],
            mean_similarity: 0.0,
            fingerprint_similarity: 0.0,
        };
        assert!(self_learn(&x, &x, &seed, &SelfLearnConfig::default(), Exec::Sequential).is_err());
    }

    #[test]
    fn trace_serializes() {
        let t = MappingTrace {
            iterations: vec![TraceEntry {
                iteration: 0,
                keep_probability: 0.1,
                dictionary_size: 3,
                mean_similarity: 0.5,
                orthogonality_error: 0.0,
            }],
            converged: true,
            final_dictionary_size: 3,
            final_mean_similarity: 0.5,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.json");
        t.save_json(&p).unwrap();
        let back: MappingTrace = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
