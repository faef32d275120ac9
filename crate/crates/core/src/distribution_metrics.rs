//! FID, Inception Score and R-precision over exported feature matrices.

use crate::features::FeatureMatrix;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Relative cutoff below which eigenvalues are treated as zero.
pub const EIGEN_CLAMP_RTOL: f64 = 1e-10;
/// Diagonal jitter added to both covariances when the first attempt fails.
pub const FID_RETRY_EPS: f64 = 1e-6;
/// Allowed deviation of a probability row sum from 1.
pub const DISTRIBUTION_TOL: f64 = 1e-5;
pub const DEFAULT_IS_SPLITS: usize = 10;
pub const DEFAULT_DISTRACTORS: usize = 99;
pub const DEFAULT_TOP_K: usize = 1;

// Rows per gemm block and number of fixed partitions when accumulating the
// scatter matrix. The partition does not depend on the thread count, so the
// result is bitwise reproducible.
const MOMENT_BLOCK_ROWS: usize = 256;
const MOMENT_PARTITIONS: usize = 8;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix square root failed to produce a finite result")]
    NumericalFailure,
    #[error("row {row} is not a probability distribution")]
    NotADistribution { row: usize },
    #[error("{rows} rows cannot fill {splits} splits")]
    TooFewRowsForSplits { rows: usize, splits: usize },
    #[error("need at least {needed} captions, got {found}")]
    TooFewCaptions { needed: usize, found: usize },
    #[error("{matrix} embedding row {row} has zero norm")]
    ZeroNormEmbedding { matrix: &'static str, row: usize },
    #[error("image {row} points at caption {index}, which does not exist")]
    InvalidTrueIndex { row: usize, index: usize },
    #[error("no caption row matches image id {0:?}")]
    UnmatchedImage(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// Mean and covariance of a Gaussian fitted to feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianMoments {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, MetricError> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(MetricError::DimensionMismatch {
                left: d,
                right: covariance.nrows(),
            });
        }
        Ok(GaussianMoments { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased (`n - 1`) covariance, symmetrized.
pub fn moments(x: &FeatureMatrix) -> Result<GaussianMoments, MetricError> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(MetricError::TooFewRows { needed: 2, found: n });
    }

    let mut mean = DVector::<f64>::zeros(d);
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean /= n as f64;

    let per_part = n.div_ceil(MOMENT_PARTITIONS);
    let partials: Vec<DMatrix<f64>> = (0..MOMENT_PARTITIONS)
        .into_par_iter()
        .map(|p| {
            let start = (p * per_part).min(n);
            let end = ((p + 1) * per_part).min(n);
            let mut acc = DMatrix::<f64>::zeros(d, d);
            let mut lo = start;
            while lo < end {
                let hi = (lo + MOMENT_BLOCK_ROWS).min(end);
                // d x block matrix of centered rows
                let block = DMatrix::from_fn(d, hi - lo, |j, i| x.row(lo + i)[j] - mean[j]);
                acc.gemm(1.0, &block, &block.transpose(), 1.0);
                lo = hi;
            }
            acc
        })
        .collect();

    let mut scatter = pairwise_sum(partials);
    scatter /= (n - 1) as f64;
    let covariance = (&scatter + scatter.transpose()) * 0.5;
    Ok(GaussianMoments { mean, covariance })
}

fn pairwise_sum(mut parts: Vec<DMatrix<f64>>) -> DMatrix<f64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one partition")
}

/// Eigenvalues with magnitudes below `EIGEN_CLAMP_RTOL * max|λ|` set to 0.
/// Returns `None` if a clearly negative eigenvalue remains.
fn clamp_eigenvalues(values: &DVector<f64>, strict: bool) -> Option<DVector<f64>> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = EIGEN_CLAMP_RTOL * scale;
    let mut out = values.clone();
    for v in out.iter_mut() {
        if !v.is_finite() {
            return None;
        }
        if v.abs() < tol {
            *v = 0.0;
        } else if *v < 0.0 {
            if strict {
                return None;
            }
            *v = 0.0;
        }
    }
    Some(out)
}

fn psd_sqrt(m: &DMatrix<f64>, strict: bool) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let values = clamp_eigenvalues(&eig.eigenvalues, strict)?;
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * values[j].sqrt());
    Some(&scaled * v.transpose())
}

/// `Tr((A B)^{1/2})` for symmetric PSD `A`, `B`, via the symmetric product
/// `A^{1/2} B A^{1/2}`.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>, strict: bool) -> Option<f64> {
    let root_a = psd_sqrt(a, strict)?;
    let inner = &root_a * b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(inner);
    let values = clamp_eigenvalues(&eig.eigenvalues, strict)?;
    let tr = values.iter().map(|v| v.sqrt()).sum::<f64>();
    tr.is_finite().then_some(tr)
}

/// Fréchet distance between two Gaussians:
/// `|μa − μb|² + Tr(Σa + Σb − 2 (Σa Σb)^{1/2})`, clamped to be nonnegative.
pub fn frechet_distance(a: &GaussianMoments, b: &GaussianMoments) -> Result<f64, MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let diff = (&a.mean - &b.mean).norm_squared();

    let attempt = |sa: &DMatrix<f64>, sb: &DMatrix<f64>, strict: bool| {
        trace_sqrt_product(sa, sb, strict).map(|tr| diff + sa.trace() + sb.trace() - 2.0 * tr)
    };

    let value = match attempt(&a.covariance, &b.covariance, true) {
        Some(v) if v.is_finite() => v,
        _ => {
            log::warn!("FID: matrix square root unstable, retrying with {FID_RETRY_EPS} jitter");
            let jitter = DMatrix::<f64>::identity(a.dim(), a.dim()) * FID_RETRY_EPS;
            attempt(&(&a.covariance + &jitter), &(&b.covariance + &jitter), false)
                .filter(|v| v.is_finite())
                .ok_or(MetricError::NumericalFailure)?
        }
    };
    Ok(value.max(0.0))
}

/// Splits `n` rows into `splits` contiguous blocks, the first `n % splits`
/// blocks one row longer.
fn split_bounds(n: usize, splits: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (n / splits, n % splits);
    let mut start = 0;
    (0..splits)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let bounds = (start, start + len);
            start += len;
            bounds
        })
        .collect()
}

/// Inception Score: per block, `exp(mean KL(p(y|x) || p̄(y)))`. Returns the
/// mean and population standard deviation over blocks.
pub fn inception_score(p: &FeatureMatrix, splits: usize) -> Result<(f64, f64), MetricError> {
    if splits == 0 {
        return Err(MetricError::InvalidArgument("splits must be at least 1"));
    }
    if p.rows() < splits {
        return Err(MetricError::TooFewRowsForSplits {
            rows: p.rows(),
            splits,
        });
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p.rows());
    for (i, row) in p.iter_rows().enumerate() {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > DISTRIBUTION_TOL {
            return Err(MetricError::NotADistribution { row: i });
        }
        rows.push(row.iter().map(|v| v / sum).collect());
    }

    let classes = p.cols();
    let scores: Vec<f64> = split_bounds(rows.len(), splits)
        .into_iter()
        .map(|(lo, hi)| {
            let block = &rows[lo..hi];
            let mut marginal = vec![0.0; classes];
            for row in block {
                for (m, v) in marginal.iter_mut().zip(row) {
                    *m += v;
                }
            }
            marginal.iter_mut().for_each(|m| *m /= block.len() as f64);
            let kl_sum: f64 = block
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(&marginal)
                        .filter(|(&v, _)| v > 0.0)
                        .map(|(&v, &m)| v * (v.ln() - m.ln()))
                        .sum::<f64>()
                })
                .sum();
            (kl_sum / block.len() as f64).exp()
        })
        .collect();

    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len() as f64;
    Ok((mean, var.sqrt()))
}

/// Image and caption embeddings with the index of each image's true caption.
#[derive(Debug, Clone)]
pub struct EmbeddingPair {
    pub images: FeatureMatrix,
    pub captions: FeatureMatrix,
    pub true_caption: Vec<usize>,
}

impl EmbeddingPair {
    pub fn new(
        images: FeatureMatrix,
        captions: FeatureMatrix,
        true_caption: Vec<usize>,
    ) -> Result<Self, MetricError> {
        if images.cols() != captions.cols() {
            return Err(MetricError::DimensionMismatch {
                left: images.cols(),
                right: captions.cols(),
            });
        }
        if true_caption.len() != images.rows() {
            return Err(MetricError::DimensionMismatch {
                left: images.rows(),
                right: true_caption.len(),
            });
        }
        if let Some((row, &index)) = true_caption
            .iter()
            .enumerate()
            .find(|(_, &i)| i >= captions.rows())
        {
            return Err(MetricError::InvalidTrueIndex { row, index });
        }
        Ok(EmbeddingPair {
            images,
            captions,
            true_caption,
        })
    }

    /// Pairs each image with the caption whose row id equals the image id,
    /// or the image id without its `_<replicate>` suffix.
    pub fn match_by_ids(images: FeatureMatrix, captions: FeatureMatrix) -> Result<Self, MetricError> {
        let index: std::collections::HashMap<&str, usize> = captions
            .ids()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let true_caption = images
            .ids()
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .or_else(|| {
                        let (stem, rep) = id.rsplit_once('_')?;
                        rep.chars().all(|c| c.is_ascii_digit()).then_some(())?;
                        index.get(stem)
                    })
                    .copied()
                    .ok_or_else(|| MetricError::UnmatchedImage(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        drop(index);
        Self::new(images, captions, true_caption)
    }
}

fn unit_rows(m: &FeatureMatrix, name: &'static str) -> Result<Vec<Vec<f64>>, MetricError> {
    m.iter_rows()
        .enumerate()
        .map(|(row, v)| {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                Err(MetricError::ZeroNormEmbedding { matrix: name, row })
            } else {
                Ok(v.iter().map(|x| x / norm).collect())
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// R-precision: for every image, draw `distractors` distinct captions other
/// than the true one and count a success when fewer than `k` of them are at
/// least as cosine-similar to the image as the true caption. With `k = 1` a
/// tie is a failure.
///
/// Image `i` draws from ChaCha8 stream `i` of `seed`, so the result does not
/// depend on scheduling.
pub fn r_precision(
    pairs: &EmbeddingPair,
    distractors: usize,
    k: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    if distractors == 0 || k == 0 {
        return Err(MetricError::InvalidArgument("distractors and k must be at least 1"));
    }
    let m = pairs.captions.rows();
    if m < distractors + 1 {
        return Err(MetricError::TooFewCaptions {
            needed: distractors + 1,
            found: m,
        });
    }
    let images = unit_rows(&pairs.images, "image")?;
    let captions = unit_rows(&pairs.captions, "caption")?;

    let successes: usize = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let truth = pairs.true_caption[i];
            let true_sim = dot(img, &captions[truth]);
            let beaten_by = rand::seq::index::sample(&mut rng, m - 1, distractors)
                .into_iter()
                .map(|j| if j >= truth { j + 1 } else { j })
                .filter(|&j| dot(img, &captions[j]) >= true_sim)
                .count();
            usize::from(beaten_by < k)
        })
        .sum();
    Ok(successes as f64 / images.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag(mean: &[f64], var: &[f64]) -> GaussianMoments {
        GaussianMoments::new(
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(var)),
        )
        .unwrap()
    }

    #[test]
    fn moments_examples() {
        let m = moments(&FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(m.mean.as_slice(), &[1.0, 1.0]);
        assert_eq!(m.covariance, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));

        let same = moments(&FeatureMatrix::from_rows(&vec![vec![3.0, -1.0]; 5]).unwrap()).unwrap();
        assert_eq!(same.covariance, DMatrix::zeros(2, 2));

        assert_eq!(
            moments(&FeatureMatrix::from_rows(&[vec![1.0]]).unwrap()),
            Err(MetricError::TooFewRows { needed: 2, found: 1 })
        );
    }

    #[test]
    fn moments_match_naive_two_pass() {
        let rows: Vec<Vec<f64>> = (0..700)
            .map(|i| (0..5).map(|j| ((i * 7 + j * 13) % 17) as f64 / 3.0 - j as f64).collect())
            .collect();
        let m = moments(&FeatureMatrix::from_rows(&rows).unwrap()).unwrap();
        let n = rows.len() as f64;
        for a in 0..5 {
            let mean_a = rows.iter().map(|r| r[a]).sum::<f64>() / n;
            assert!((m.mean[a] - mean_a).abs() < 1e-12);
            for b in 0..5 {
                let mean_b = rows.iter().map(|r| r[b]).sum::<f64>() / n;
                let c = rows.iter().map(|r| (r[a] - mean_a) * (r[b] - mean_b)).sum::<f64>() / (n - 1.0);
                assert!((m.covariance[(a, b)] - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn frechet_examples() {
        let a = diag(&[0.0], &[1.0]);
        assert_eq!(frechet_distance(&a, &a).unwrap(), 0.0);
        let b = diag(&[1.0], &[1.0]);
        assert!((frechet_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);

        let (ma, va): ([f64; 3], [f64; 3]) = ([0.5, -1.0, 2.0], [1.0, 4.0, 0.25]);
        let (mb, vb): ([f64; 3], [f64; 3]) = ([0.0, 1.0, 2.0], [9.0, 1.0, 0.25]);
        let closed: f64 = (0..3)
            .map(|j| (ma[j] - mb[j]).powi(2) + (va[j].sqrt() - vb[j].sqrt()).powi(2))
            .sum();
        let got = frechet_distance(&diag(&ma, &va), &diag(&mb, &vb)).unwrap();
        assert!((got - closed).abs() < 1e-10, "{got} vs {closed}");

        assert!(matches!(
            frechet_distance(&diag(&[0.0], &[1.0]), &diag(&[0.0, 0.0], &[1.0, 1.0])),
            Err(MetricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn frechet_handles_singular_covariances() {
        // rank-1 covariances from two rows each
        let a = moments(&FeatureMatrix::from_rows(&[vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 1.0]]).unwrap()).unwrap();
        let b = moments(&FeatureMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![2.0, 0.0, 0.0]]).unwrap()).unwrap();
        let v = frechet_distance(&a, &b).unwrap();
        assert!(v.is_finite() && v >= 0.0);
        assert!(frechet_distance(&a, &a).unwrap().abs() < 1e-8);
    }

    #[test]
    fn inception_score_examples() {
        let same = FeatureMatrix::from_rows(&vec![vec![0.2, 0.3, 0.5]; 20]).unwrap();
        let (s, sd) = inception_score(&same, 10).unwrap();
        assert!((s - 1.0).abs() < 1e-12 && sd.abs() < 1e-12);

        for n in [2usize, 10, 100] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
                .collect();
            let (s, _) = inception_score(&FeatureMatrix::from_rows(&rows).unwrap(), 1).unwrap();
            assert!((s - n as f64).abs() < 1e-9, "{n}: {s}");
        }

        let bad = FeatureMatrix::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]).unwrap();
        assert_eq!(inception_score(&bad, 1), Err(MetricError::NotADistribution { row: 0 }));
        let neg = FeatureMatrix::from_rows(&[vec![1.5, -0.5]]).unwrap();
        assert_eq!(inception_score(&neg, 1), Err(MetricError::NotADistribution { row: 0 }));
        assert_eq!(
            inception_score(&same, 21),
            Err(MetricError::TooFewRowsForSplits { rows: 20, splits: 21 })
        );
    }

    #[test]
    fn split_sizes() {
        assert!(split_bounds(30_000, 10).iter().all(|(a, b)| b - a == 3_000));
        assert_eq!(split_bounds(7, 3), vec![(0, 3), (3, 5), (5, 7)]);
    }

    fn orthogonal_pair(n_captions: usize) -> EmbeddingPair {
        let d = n_captions;
        let basis = |i: usize| (0..d).map(|j| f64::from(u8::from(i == j))).collect::<Vec<f64>>();
        let captions = FeatureMatrix::from_rows(&(0..n_captions).map(basis).collect::<Vec<_>>()).unwrap();
        let images = FeatureMatrix::from_rows(&(0..10).map(|i| basis(i * 3)).collect::<Vec<_>>()).unwrap();
        EmbeddingPair::new(images, captions, (0..10).map(|i| i * 3).collect()).unwrap()
    }

    #[test]
    fn r_precision_orthogonal_distractors() {
        assert_eq!(r_precision(&orthogonal_pair(100), 99, 1, 0).unwrap(), 1.0);
        assert_eq!(r_precision(&orthogonal_pair(150), 99, 1, 3).unwrap(), 1.0);
    }

    #[test]
    fn r_precision_ties_fail() {
        let mut rows = vec![vec![1.0, 0.0]; 1];
        rows.extend((0..99).map(|i| if i == 0 { vec![2.0, 0.0] } else { vec![0.0, 1.0] }));
        let captions = FeatureMatrix::from_rows(&rows).unwrap();
        let images = FeatureMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let pair = EmbeddingPair::new(images, captions, vec![0]).unwrap();
        assert_eq!(r_precision(&pair, 99, 1, 0).unwrap(), 0.0);
        // the tie is tolerated once two captions may outrank
        assert_eq!(r_precision(&pair, 99, 2, 0).unwrap(), 1.0);
    }

    #[test]
    fn r_precision_errors() {
        let pair = orthogonal_pair(50);
        assert_eq!(
            r_precision(&pair, 99, 1, 0),
            Err(MetricError::TooFewCaptions { needed: 100, found: 50 })
        );
        let captions = FeatureMatrix::from_rows(&vec![vec![1.0, 0.0]; 100]).unwrap();
        let images = FeatureMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let pair = EmbeddingPair::new(images, captions.clone(), vec![0]).unwrap();
        assert_eq!(
            r_precision(&pair, 99, 1, 0),
            Err(MetricError::ZeroNormEmbedding { matrix: "image", row: 0 })
        );
        let images = FeatureMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            EmbeddingPair::new(images, captions, vec![100]),
            Err(MetricError::InvalidTrueIndex { row: 0, index: 100 })
        ));
    }

    #[test]
    fn match_by_ids_strips_replicate_suffix() {
        let captions = FeatureMatrix::new(2, 1, vec![1.0, 2.0], vec!["17".into(), "42".into()]).unwrap();
        let images = FeatureMatrix::new(3, 1, vec![1.0; 3], vec!["42_0".into(), "17_2".into(), "42".into()]).unwrap();
        let pair = EmbeddingPair::match_by_ids(images, captions.clone()).unwrap();
        assert_eq!(pair.true_caption, vec![1, 0, 1]);
        let stray = FeatureMatrix::new(1, 1, vec![1.0], vec!["9_0".into()]).unwrap();
        assert_eq!(
            EmbeddingPair::match_by_ids(stray, captions).unwrap_err(),
            MetricError::UnmatchedImage("9_0".into())
        );
    }

    fn arb_moments(d: usize) -> impl Strategy<Value = GaussianMoments> {
        (
            prop::collection::vec(-2.0..2.0f64, d),
            prop::collection::vec(-1.0..1.0f64, d * d),
        )
            .prop_map(move |(mean, a)| {
                let a = DMatrix::from_row_slice(d, d, &a);
                let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
                GaussianMoments::new(DVector::from_vec(mean), cov).unwrap()
            })
    }

    proptest! {
        #[test]
        fn frechet_symmetric(a in arb_moments(4), b in arb_moments(4)) {
            let ab = frechet_distance(&a, &b).unwrap();
            let ba = frechet_distance(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-8, "{} vs {}", ab, ba);
            prop_assert!(frechet_distance(&a, &a).unwrap().abs() < 1e-8);
        }

        #[test]
        fn inception_score_bounded(raw in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 4), 2..30)) {
            let rows: Vec<Vec<f64>> = raw
                .into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum::<f64>() + 1e-3;
                    let mut v: Vec<f64> = r.iter().map(|x| x / s).collect();
                    v[0] += 1.0 - v.iter().sum::<f64>();
                    v
                })
                .collect();
            let (s, _) = inception_score(&FeatureMatrix::from_rows(&rows).unwrap(), 1).unwrap();
            prop_assert!((1.0 - 1e-9..=4.0 + 1e-9).contains(&s));
        }
    }
}
