//! Leading noise-error scales and the split into mildly and highly dynamic regions.

use nalgebra::DMatrix;

use crate::changepoint::fit_one_junction;
use crate::dictionary::{Dictionary, FeatureSpec};
use crate::error::{Error, Result};
use crate::grid::ObservationSet;
use crate::test_function::{sample_kernel, TestFunction};
use crate::weak::{feature_orders, max_orders, monomial, Centers, Correlator, Job};

/// Normalizers smaller than this fraction of the absolute kernel mass are treated as vanishing.
pub const VANISHING_SCALE: f64 = 1e-10;

/// Leading coefficients `s(h, l)` of the noise-induced error.
#[derive(Debug, Clone)]
pub struct ScaleTable {
    /// `H × L` matrix of scales.
    pub s: DMatrix<f64>,
    /// Column means over all rows.
    pub column_means_full: Vec<f64>,
    /// Column means over the highly dynamic rows; empty until [`ScaleTable::set_regions`].
    pub column_means_narrow: Vec<f64>,
    /// `β · mean|lowered monomial| · Π Σ|kernel| Δ`, a size reference per column.
    pub reference: Vec<f64>,
}

/// Exponents of the monomial whose dominant variable is lowered by one (first on ties).
pub fn lowered_beta(beta: &[usize]) -> Vec<usize> {
    let mut lowered = beta.to_vec();
    let max = beta.iter().copied().max().unwrap_or(0);
    if max > 0 {
        let v = beta.iter().position(|&b| b == max).unwrap();
        lowered[v] -= 1;
    }
    lowered
}

/// `s(h,l) = β |Σ Û^{β-1} ∂^α φ_h Δ|`, with `s = 1` for the constant feature.
pub fn leading_scales(
    data: &ObservationSet,
    dict: &Dictionary,
    tf: &TestFunction,
    centers: &Centers,
) -> Result<ScaleTable> {
    let grid = &data.grid;
    let correlator = Correlator::new(grid, tf, centers, &max_orders(dict, grid))?;
    let jobs: Vec<Job> = dict
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.degree() > 0)
        .map(|(l, f)| Job {
            beta: lowered_beta(&f.beta),
            orders: feature_orders(f),
            tag: l,
        })
        .collect();
    let values = correlator.run(&data.values, &jobs)?;
    let h = centers.len();
    let mut s = DMatrix::from_element(h, dict.len(), 1.0);
    let mut reference = vec![1.0; dict.len()];
    for (job, vals) in jobs.iter().zip(&values) {
        let l = job.tag;
        let f = dict.get(l);
        let beta = f.degree() as f64;
        for (r, v) in vals.iter().enumerate() {
            s[(r, l)] = beta * v.abs();
        }
        reference[l] = beta * kernel_mass(f, tf)? * mean_abs_monomial(data, &job.beta);
    }
    let column_means_full = (0..dict.len()).map(|l| s.column(l).mean()).collect();
    Ok(ScaleTable {
        s,
        column_means_full,
        column_means_narrow: Vec::new(),
        reference,
    })
}

fn kernel_mass(f: &FeatureSpec, tf: &TestFunction) -> Result<f64> {
    let mut mass = 1.0;
    for (k, d) in tf.axes.iter().zip(feature_orders(f)) {
        let kernel = sample_kernel(k.m, k.p, k.spacing, d)?;
        mass *= kernel.iter().map(|v| v.abs()).sum::<f64>() * k.spacing;
    }
    Ok(mass)
}

fn mean_abs_monomial(data: &ObservationSet, beta: &[usize]) -> f64 {
    let field = monomial(&data.values, beta, data.grid.len());
    field.iter().map(|v| v.abs()).sum::<f64>() / field.len() as f64
}

impl ScaleTable {
    pub fn rows(&self) -> usize {
        self.s.nrows()
    }

    /// Fills the column means over the rows of `regions`.
    pub fn set_regions(&mut self, regions: &DynamicRegionSet) {
        let n = regions.indices.len() as f64;
        self.column_means_narrow = (0..self.s.ncols())
            .map(|l| regions.indices.iter().map(|&h| self.s[(h, l)]).sum::<f64>() / n)
            .collect();
    }

    /// Column normalizers over the highly dynamic rows. A mean that vanishes relative to
    /// the column's absolute kernel mass is replaced by that mass; the flag marks such columns.
    pub fn normalizers(&self) -> (Vec<f64>, Vec<bool>) {
        let means = if self.column_means_narrow.is_empty() {
            &self.column_means_full
        } else {
            &self.column_means_narrow
        };
        means
            .iter()
            .zip(&self.reference)
            .map(|(&m, &r)| {
                if m > VANISHING_SCALE * r && m.is_finite() {
                    (m, false)
                } else if r > 0.0 && r.is_finite() {
                    (r, true)
                } else {
                    (1.0, true)
                }
            })
            .unzip()
    }
}

/// Indices of the features whose scales drive region selection.
pub fn features_of_interest(num_vars: usize, spatial_dims: usize, dict: &Dictionary) -> Result<Vec<usize>> {
    let unit = |v: usize, power: usize| {
        let mut beta = vec![0; num_vars];
        beta[v] = power;
        beta
    };
    let specs: Vec<FeatureSpec> = match (spatial_dims, num_vars) {
        (0, _) => (0..num_vars).map(|v| FeatureSpec::new(vec![], unit(v, 2))).collect(),
        (1, _) => (0..num_vars).map(|v| FeatureSpec::new(vec![1], unit(v, 2))).collect(),
        (2, 1) => vec![
            FeatureSpec::new(vec![1, 0], vec![2]),
            FeatureSpec::new(vec![0, 1], vec![2]),
            FeatureSpec::new(vec![1, 1], vec![3]),
        ],
        (2, 2) => vec![
            FeatureSpec::new(vec![1, 0], vec![2, 0]),
            FeatureSpec::new(vec![0, 1], vec![2, 0]),
            FeatureSpec::new(vec![1, 0], vec![0, 2]),
            FeatureSpec::new(vec![0, 1], vec![0, 2]),
            FeatureSpec::new(vec![1, 0], vec![2, 1]),
            FeatureSpec::new(vec![0, 1], vec![1, 2]),
        ],
        (2, n) => {
            let mut specs = Vec::new();
            for v in 0..n {
                specs.push(FeatureSpec::new(vec![1, 0], unit(v, 2)));
                specs.push(FeatureSpec::new(vec![0, 1], unit(v, 2)));
            }
            specs
        }
        (d, _) => return Err(Error::UnsupportedDimension(d)),
    };
    specs.iter().map(|s| dict.lookup(s)).collect()
}

/// Rows split by the averaged scale threshold `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicRegionSet {
    /// Highly dynamic rows, ascending.
    pub indices: Vec<usize>,
    pub gamma: f64,
    pub sbar: Vec<f64>,
    pub bins: usize,
    /// Set when the histogram was degenerate and every row was kept.
    pub fallback: bool,
}

/// Thresholds `s̄(h)` at the junction of a one-kink fit to its cumulative histogram.
pub fn select_regions(scales: &ScaleTable, foi: &[usize], bins: usize) -> Result<DynamicRegionSet> {
    if foi.is_empty() {
        return Err(Error::InvalidArgument("no features of interest".into()));
    }
    if bins < 3 {
        return Err(Error::InvalidArgument("need at least 3 histogram bins".into()));
    }
    let sbar: Vec<f64> = (0..scales.rows())
        .map(|h| foi.iter().map(|&l| scales.s[(h, l)].abs()).sum::<f64>() / foi.len() as f64)
        .collect();
    Ok(threshold_rows(sbar, bins))
}

pub(crate) fn threshold_rows(sbar: Vec<f64>, bins: usize) -> DynamicRegionSet {
    let lo = sbar.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sbar.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let all = |gamma: f64, sbar: Vec<f64>| DynamicRegionSet {
        indices: (0..sbar.len()).collect(),
        gamma,
        sbar,
        bins,
        fallback: true,
    };
    if sbar.is_empty() || !(hi > lo) || !(hi - lo).is_finite() {
        return all(lo, sbar);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &sbar {
        let j = (((s - lo) / width).floor() as usize).min(bins - 1);
        counts[j] += 1;
    }
    let mut cumulative = Vec::with_capacity(bins);
    let mut running = 0.0;
    for c in counts {
        running += c as f64;
        cumulative.push(running);
    }
    let weights: Vec<f64> = cumulative
        .iter()
        .map(|&b| if b > 0.0 { 1.0 / (b * b) } else { 0.0 })
        .collect();
    let fit = match fit_one_junction(&cumulative, &weights) {
        Some(fit) if fit.cost.is_finite() => fit,
        _ => return all(lo, sbar),
    };
    let gamma = lo + fit.junction as f64 * width;
    let indices = (0..sbar.len()).filter(|&h| sbar[h] >= gamma).collect();
    DynamicRegionSet {
        indices,
        gamma,
        sbar,
        bins,
        fallback: false,
    }
}
