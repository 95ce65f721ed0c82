//! Sparse regression stages: subspace pursuit, narrow fit, trimming and cross-validation.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dictionary::Coefficients;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, submatrix, subvector};
use crate::regions::DynamicRegionSet;

/// Relative residual decrease below which subspace pursuit stops.
pub const SP_TOLERANCE: f64 = 1e-12;
pub const SP_MAX_ITERATIONS: usize = 20;
/// `|b̄|` below this fraction of `mean|b|` triggers the mean-absolute guard.
pub const B_BAR_GUARD: f64 = 1e-12;

/// Knobs of the sparse regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionConfig {
    pub max_sparsity: usize,
    pub trim_threshold: f64,
    pub cv_lambda: f64,
    pub cv_trials: usize,
    pub seed: u64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            max_sparsity: 10,
            trim_threshold: 0.05,
            cv_lambda: 0.01,
            cv_trials: 30,
            seed: 0,
        }
    }
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sparsity == 0 {
            return Err(Error::Config("max sparsity must be at least 1".into()));
        }
        if !(self.trim_threshold > 0.0 && self.trim_threshold < 1.0) {
            return Err(Error::Config("trim threshold must lie in (0, 1)".into()));
        }
        if !(self.cv_lambda > 0.0 && self.cv_lambda < 1.0) {
            return Err(Error::Config("cv lambda must lie in (0, 1)".into()));
        }
        if self.cv_trials == 0 {
            return Err(Error::Config("need at least one cross-validation trial".into()));
        }
        Ok(())
    }
}

/// Divides every column by its Euclidean norm.
pub fn column_normalize(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    if let Some(l) = norms.iter().position(|&n| !(n > 0.0) || !n.is_finite()) {
        return Err(Error::ZeroColumn(l));
    }
    let mut out = w.clone();
    for (mut col, &n) in out.column_iter_mut().zip(&norms) {
        col /= n;
    }
    Ok((out, norms))
}

/// Indices of the `k` largest values, lowest index first among ties, returned ascending.
fn top_k(values: &[(usize, f64)], k: usize) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = values
        .iter()
        .map(|&(i, v)| (i, if v.is_nan() { 0.0 } else { v }))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut picked: Vec<usize> = order.into_iter().take(k).map(|(i, _)| i).collect();
    picked.sort_unstable();
    picked
}

fn residual(w: &DMatrix<f64>, b: &DVector<f64>, support: &[usize]) -> Result<(DVector<f64>, DVector<f64>)> {
    let sub = submatrix(w, None, support);
    let x = lstsq(&sub, b)?.x;
    let r = b - &sub * &x;
    Ok((x, r))
}

/// Greedy size-`k` support by subspace pursuit on unit-norm columns.
pub fn subspace_pursuit(wn: &DMatrix<f64>, b: &DVector<f64>, k: usize) -> Result<Vec<usize>> {
    let l = wn.ncols();
    if k == 0 || k > l || k > wn.nrows() {
        return Err(Error::InvalidArgument(format!(
            "sparsity {k} outside 1..={}",
            l.min(wn.nrows())
        )));
    }
    if k == l {
        return Ok((0..l).collect());
    }
    let correlate = |v: &DVector<f64>| -> Vec<(usize, f64)> {
        (wn.transpose() * v)
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.abs()))
            .collect()
    };
    let mut support = top_k(&correlate(b), k);
    let (_, mut r) = residual(wn, b, &support)?;
    for _ in 0..SP_MAX_ITERATIONS {
        let outside: Vec<(usize, f64)> = correlate(&r)
            .into_iter()
            .filter(|(i, _)| support.binary_search(i).is_err())
            .collect();
        let mut union = support.clone();
        union.extend(top_k(&outside, k));
        union.sort_unstable();
        let (x, _) = residual(wn, b, &union)?;
        let magnitudes: Vec<(usize, f64)> = union.iter().zip(x.iter()).map(|(&i, v)| (i, v.abs())).collect();
        let candidate = top_k(&magnitudes, k);
        let (_, r_new) = residual(wn, b, &candidate)?;
        if r_new.norm() >= r.norm() * (1.0 - SP_TOLERANCE) {
            break;
        }
        support = candidate;
        r = r_new;
    }
    Ok(support)
}

/// Mean of `b` over `rows`, guarded against cancellation.
pub fn narrow_mean(b: &DVector<f64>, rows: &[usize]) -> (f64, bool) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| b[r]).sum::<f64>() / n;
    let mean_abs = rows.iter().map(|&r| b[r].abs()).sum::<f64>() / n;
    if mean.abs() < B_BAR_GUARD * mean_abs || mean == 0.0 {
        (mean_abs, true)
    } else {
        (mean, false)
    }
}

/// Coefficients recovered on the highly dynamic rows of the error-normalized system.
#[derive(Debug, Clone, PartialEq)]
pub struct NarrowFit {
    /// Full-length coefficients on the original scale.
    pub coefficients: Coefficients,
    /// Normalized coefficients aligned with the support.
    pub c_tilde: Vec<f64>,
    /// Norms of the normalized support columns over the highly dynamic rows.
    pub column_norms: Vec<f64>,
    pub b_bar: f64,
    pub b_bar_guarded: bool,
    pub rank_deficient: bool,
}

pub fn narrow_fit(
    w: &DMatrix<f64>,
    b: &DVector<f64>,
    support: &[usize],
    regions: &DynamicRegionSet,
    normalizers: &[f64],
) -> Result<NarrowFit> {
    if support.is_empty() {
        return Err(Error::InvalidArgument("empty support".into()));
    }
    let rows = &regions.indices;
    if rows.len() < support.len() {
        return Err(Error::InvalidArgument(format!(
            "{} highly dynamic rows cannot determine {} coefficients",
            rows.len(),
            support.len()
        )));
    }
    let mut wt = submatrix(w, Some(rows), support);
    for (mut col, &l) in wt.column_iter_mut().zip(support) {
        col /= normalizers[l];
    }
    let (b_bar, b_bar_guarded) = narrow_mean(b, rows);
    let bt = subvector(b, rows) / b_bar;
    let sol = lstsq(&wt, &bt)?;
    let mut values = vec![0.0; w.ncols()];
    for (&l, &c) in support.iter().zip(sol.x.iter()) {
        values[l] = b_bar * c / normalizers[l];
    }
    Ok(NarrowFit {
        coefficients: Coefficients::from_values(values),
        c_tilde: sol.x.iter().copied().collect(),
        column_norms: wt.column_iter().map(|c| c.norm()).collect(),
        b_bar,
        b_bar_guarded,
        rank_deficient: sol.rank_deficient,
    })
}

/// `a_i = n_i / max n` with `n_i = ‖w̃_i‖ |c̃_i|`.
pub fn contribution_scores(column_norms: &[f64], c_tilde: &[f64]) -> Result<Vec<f64>> {
    let n: Vec<f64> = column_norms.iter().zip(c_tilde).map(|(w, c)| w * c.abs()).collect();
    let max = n.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Singular("all contributions vanish".into()));
    }
    Ok(n.iter().map(|v| v / max).collect())
}

/// Drops the single lowest-scoring feature if its score is below `threshold`.
pub fn trim_once(support: &[usize], scores: &[f64], threshold: f64) -> Vec<usize> {
    let argmin = scores
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &s)| match best {
            Some((_, b)) if b <= s => best,
            _ => Some((i, s)),
        });
    match argmin {
        Some((i, s)) if s < threshold => {
            let mut kept = support.to_vec();
            kept.remove(i);
            kept
        }
        _ => support.to_vec(),
    }
}

/// Mean cross-validation error over seeded equal splits of the highly dynamic rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOutcome {
    pub error: f64,
    pub skipped_trials: usize,
}

/// Row split for one trial; depends only on `(seed, trial)` so every sparsity level sees the same folds.
pub fn cv_partition(rows: &[usize], seed: u64, trial: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut shuffled = rows.to_vec();
    shuffled.shuffle(&mut rng);
    let half = shuffled.len() / 2;
    let a = shuffled[..half].to_vec();
    let b = shuffled[half..2 * half].to_vec();
    (a, b)
}

pub fn cross_validation_error(
    w_tilde: &DMatrix<f64>,
    b_tilde: &DVector<f64>,
    support: &[usize],
    rows: &[usize],
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<CvOutcome> {
    if rows.len() < 2 * support.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows are too few to cross-validate {} features",
            rows.len(),
            support.len()
        )));
    }
    let mut total = 0.0;
    let mut used = 0;
    for trial in 0..trials {
        let (a, b) = cv_partition(rows, seed, trial);
        let (wa, wb) = (
            submatrix(w_tilde, Some(&a), support),
            submatrix(w_tilde, Some(&b), support),
        );
        let (ba, bb) = (subvector(b_tilde, &a), subvector(b_tilde, &b));
        let (sa, sb) = match (lstsq(&wa, &ba), lstsq(&wb, &bb)) {
            (Ok(sa), Ok(sb)) if !sa.rank_deficient && !sb.rank_deficient => (sa, sb),
            _ => continue,
        };
        total += lambda * (&wa * &sb.x - &ba).norm() + (1.0 - lambda) * (&wb * &sa.x - &bb).norm();
        used += 1;
    }
    if used == 0 {
        return Err(Error::Singular("every cross-validation fold was singular".into()));
    }
    Ok(CvOutcome {
        error: total / used as f64,
        skipped_trials: trials - used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn normalized_columns_have_unit_norm() {
        let w = random_matrix(5, 3, 1);
        let (wn, norms) = column_normalize(&w).unwrap();
        let gram = wn.transpose() * &wn;
        for i in 0..3 {
            assert!((gram[(i, i)] - 1.0).abs() < 1e-12);
        }
        let mut scaled = w.clone();
        scaled.column_mut(1).scale_mut(10.0);
        let (wn2, norms2) = column_normalize(&scaled).unwrap();
        assert!((wn - wn2).amax() < 1e-15);
        assert!((norms2[1] - 10.0 * norms[1]).abs() < 1e-12);
        let mut zero = w;
        zero.column_mut(2).fill(0.0);
        assert!(matches!(column_normalize(&zero), Err(Error::ZeroColumn(2))));
    }

    #[test]
    fn sp_trivial_cases() {
        let (wn, _) = column_normalize(&random_matrix(20, 6, 2)).unwrap();
        let b = wn.column(4).into_owned();
        assert_eq!(subspace_pursuit(&wn, &b, 1).unwrap(), vec![4]);
        assert_eq!(subspace_pursuit(&wn, &b, 6).unwrap(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn narrow_fit_single_column() {
        let col = DVector::from_fn(10, |i, _| 1.0 + i as f64);
        let w = DMatrix::from_columns(&[col.clone(), DVector::from_element(10, 1.0)]);
        let b = &col * 2.5;
        let regions = crate::regions::DynamicRegionSet {
            indices: (0..10).collect(),
            gamma: 0.0,
            sbar: vec![0.0; 10],
            bins: 200,
            fallback: false,
        };
        let fit = narrow_fit(&w, &b, &[0], &regions, &[3.0, 1.0]).unwrap();
        assert!((fit.coefficients.values[0] - 2.5).abs() < 1e-13);
        assert_eq!(fit.coefficients.values[1], 0.0);
    }

    #[test]
    fn narrow_fit_matches_normal_equations() {
        let w = random_matrix(30, 5, 3);
        let b = DVector::from_fn(30, |i, _| (i as f64 * 0.37).cos() + 0.5);
        let rows: Vec<usize> = (0..30).filter(|i| i % 3 != 0).collect();
        let regions = crate::regions::DynamicRegionSet {
            indices: rows.clone(),
            gamma: 0.0,
            sbar: vec![0.0; 30],
            bins: 200,
            fallback: false,
        };
        let support = [0, 2, 3];
        let norms = [2.0, 1.0, 0.5, 4.0, 1.0];
        let fit = narrow_fit(&w, &b, &support, &regions, &norms).unwrap();
        let a = submatrix(&w, Some(&rows), &support);
        let bn = subvector(&b, &rows);
        let direct = (a.transpose() * &a).lu().solve(&(a.transpose() * &bn)).unwrap();
        for (j, &l) in support.iter().enumerate() {
            assert!((fit.coefficients.values[l] - direct[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn score_arithmetic() {
        assert_eq!(contribution_scores(&[1.0], &[3.0]).unwrap(), vec![1.0]);
        let a = contribution_scores(&[10.0, 1.0], &[1.0, -1.0]).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-15 && (a[1] - 0.1).abs() < 1e-15);
        let b = contribution_scores(&[10.0, 1.0], &[7.0, -7.0]).unwrap();
        assert_eq!(a, b);
        assert!(contribution_scores(&[1.0, 2.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn trim_examples() {
        assert_eq!(trim_once(&[3, 8], &[1.0, 0.01], 0.05), vec![3]);
        assert_eq!(trim_once(&[3, 8], &[1.0, 0.5], 0.05), vec![3, 8]);
        assert_eq!(trim_once(&[1, 2, 3], &[1.0, 0.04, 0.03], 0.05), vec![1, 2]);
        assert_eq!(trim_once(&[1, 2, 3], &[0.01, 1.0, 0.01], 0.05), vec![2, 3]);
    }

    #[test]
    fn partitions_are_equal_halves() {
        let rows: Vec<usize> = (10..41).collect();
        let (a, b) = cv_partition(&rows, 7, 3);
        assert_eq!(a.len(), 15);
        assert_eq!(b.len(), 15);
        assert!(a.iter().all(|r| !b.contains(r)));
        assert_eq!(cv_partition(&rows, 7, 3), (a.clone(), b));
        assert_ne!(cv_partition(&rows, 7, 4).0, a);
    }

    #[test]
    fn cv_prefers_true_support() {
        let w = random_matrix(80, 6, 9);
        let mut c = DVector::zeros(6);
        c[1] = 2.0;
        c[4] = -1.0;
        let b = &w * &c;
        let rows: Vec<usize> = (0..80).collect();
        let good = cross_validation_error(&w, &b, &[1, 4], &rows, 0.01, 30, 5).unwrap();
        let bad = cross_validation_error(&w, &b, &[1], &rows, 0.01, 30, 5).unwrap();
        assert!(good.error < 1e-10 && bad.error > 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn trim_removes_only_argmin(scores in proptest::collection::vec(0.0f64..1.0, 1..12), t in 0.01f64..0.99) {
            let support: Vec<usize> = (0..scores.len()).map(|i| 3 * i).collect();
            let kept = trim_once(&support, &scores, t);
            let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
            if min < t {
                prop_assert_eq!(kept.len(), support.len() - 1);
                let first_min = scores.iter().position(|&s| s == min).unwrap();
                prop_assert!(!kept.contains(&support[first_min]));
            } else {
                prop_assert_eq!(kept, support);
            }
        }
    }
}
