//! Discrete weak-form system `W c = b` built by separable FFT correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, Fft, FftPlanner};

use crate::dictionary::{Dictionary, FeatureSpec};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ObservationSet};
use crate::ndutil::{lines, ravel, unravel};
use crate::test_function::{sample_kernel, TestFunction};

/// Target number of test regions per axis, in grid storage order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsampleSpec {
    pub targets: Vec<usize>,
}

impl SubsampleSpec {
    /// Same target on every spatial axis, separate target in time.
    pub fn new(grid: &GridSpec, spatial: usize, time: usize) -> Self {
        let mut targets = vec![spatial; grid.spatial_dims()];
        targets.push(time);
        SubsampleSpec { targets }
    }
}

/// Number of centers on an axis of `n` points with half-width `m` and target `target`.
pub fn subsample_count(n: usize, m: usize, target: usize) -> Result<usize> {
    if n < 2 * m + 2 {
        return Err(Error::EmptyInterior {
            axis: "?",
            needed: 2 * m + 2,
            available: n,
        });
    }
    let stride = (n / target.max(1)).max(1);
    Ok((n - 2 * m - 1).div_ceil(stride) + 1)
}

/// Test-region centers: a Cartesian product of per-axis index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Centers {
    pub per_axis: Vec<Vec<usize>>,
}

impl Centers {
    pub fn counts(&self) -> Vec<usize> {
        self.per_axis.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.per_axis.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid multi-index (storage order) of row `h`. Rows run with the first axis fastest.
    pub fn center(&self, h: usize) -> Vec<usize> {
        let local = unravel(h, &self.counts());
        local.iter().zip(&self.per_axis).map(|(&i, c)| c[i]).collect()
    }

    /// Row of a grid multi-index, if it is a center.
    pub fn row_of(&self, index: &[usize]) -> Option<usize> {
        let local: Option<Vec<usize>> = index
            .iter()
            .zip(&self.per_axis)
            .map(|(i, c)| c.binary_search(i).ok())
            .collect();
        Some(ravel(&local?, &self.counts()))
    }
}

/// Evenly spreads the counted centers over the interior `[m, n-1-m]` of each axis.
pub fn subsample_centers(grid: &GridSpec, tf: &TestFunction, spec: &SubsampleSpec) -> Result<Centers> {
    let axes = grid.axes();
    if spec.targets.len() != axes.len() || tf.axes.len() != axes.len() {
        return Err(Error::InvalidArgument("subsample targets do not match the grid".into()));
    }
    let mut per_axis = Vec::with_capacity(axes.len());
    for ((&axis, k), &target) in axes.iter().zip(&tf.axes).zip(&spec.targets) {
        let n = grid.count(axis);
        let count = subsample_count(n, k.m, target).map_err(|_| Error::EmptyInterior {
            axis: axis.name(),
            needed: 2 * k.m + 2,
            available: n,
        })?;
        let span = (n - 1 - 2 * k.m) as f64;
        let centers: Vec<usize> = (0..count)
            .map(|j| k.m + (j as f64 * span / (count - 1) as f64).round() as usize)
            .collect();
        per_axis.push(centers);
    }
    Ok(Centers { per_axis })
}

struct AxisPlan {
    n: usize,
    padded: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Conjugated kernel spectra indexed by derivative order.
    spectra: Vec<Vec<Complex<f64>>>,
    centers: Vec<usize>,
}

impl AxisPlan {
    fn new(n: usize, m: usize, p: usize, spacing: f64, max_order: usize, centers: Vec<usize>) -> Result<Self> {
        let padded = (n + 2 * m).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let mut spectra = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            let kernel = sample_kernel(m, p, spacing, d)?;
            let mut buf = vec![Complex::new(0.0, 0.0); padded];
            for (j, &v) in kernel.iter().enumerate() {
                let offset = j as i64 - m as i64;
                buf[offset.rem_euclid(padded as i64) as usize] = Complex::new(v, 0.0);
            }
            forward.process(&mut buf);
            spectra.push(buf.iter().map(|c| c.conj()).collect());
        }
        Ok(AxisPlan {
            n,
            padded,
            forward,
            inverse,
            spectra,
            centers,
        })
    }

    /// Correlates every line along `pos` with each requested kernel and keeps the centers.
    fn reduce(&self, arr: &[f64], shape: &[usize], pos: usize, orders: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
        debug_assert_eq!(shape[pos], self.n);
        let (starts, stride) = lines(shape, pos);
        let mut out_shape = shape.to_vec();
        out_shape[pos] = self.centers.len();
        let out_stride: usize = out_shape[..pos].iter().product();
        let total: usize = out_shape.iter().product();
        let mut outs = vec![vec![0.0; total]; orders.len()];
        let (out_starts, _) = lines(&out_shape, pos);
        let scale = 1.0 / self.padded as f64;
        let mut line = vec![Complex::new(0.0, 0.0); self.padded];
        let mut work = vec![Complex::new(0.0, 0.0); self.padded];
        for (&s, &os) in starts.iter().zip(&out_starts) {
            line.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for k in 0..self.n {
                line[k] = Complex::new(arr[s + k * stride], 0.0);
            }
            self.forward.process(&mut line);
            for (out, &d) in outs.iter_mut().zip(orders) {
                for ((w, l), k) in work.iter_mut().zip(&line).zip(&self.spectra[d]) {
                    *w = l * k;
                }
                self.inverse.process(&mut work);
                for (j, &c) in self.centers.iter().enumerate() {
                    out[os + j * out_stride] = work[c].re * scale;
                }
            }
        }
        (outs, out_shape)
    }
}

/// One correlation request: a monomial and a derivative order per axis (storage order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Job {
    pub beta: Vec<usize>,
    pub orders: Vec<usize>,
    /// Reported in the overflow error when the monomial is non-finite.
    pub tag: usize,
}

/// Shared FFT machinery for one grid, test function and center set.
pub(crate) struct Correlator {
    shape: Vec<usize>,
    plans: Vec<AxisPlan>,
    volume: f64,
}

impl Correlator {
    pub fn new(grid: &GridSpec, tf: &TestFunction, centers: &Centers, max_orders: &[usize]) -> Result<Self> {
        let shape = grid.shape();
        let mut plans = Vec::with_capacity(shape.len());
        for (i, k) in tf.axes.iter().enumerate() {
            if centers.per_axis[i].iter().any(|&c| c < k.m || c + k.m >= shape[i]) {
                return Err(Error::InvalidArgument(format!(
                    "a center on the {} axis is closer than m to the boundary",
                    k.axis.name()
                )));
            }
            plans.push(AxisPlan::new(
                shape[i],
                k.m,
                k.p,
                k.spacing,
                max_orders[i],
                centers.per_axis[i].clone(),
            )?);
        }
        Ok(Correlator {
            shape,
            plans,
            volume: grid.cell_volume(),
        })
    }

    /// `Σ monomial · Π kernels · volume` at every center, for every job.
    pub fn run(&self, data: &[Vec<f64>], jobs: &[Job]) -> Result<Vec<Vec<f64>>> {
        let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
        for (j, job) in jobs.iter().enumerate() {
            groups.entry(job.beta.as_slice()).or_default().push(j);
        }
        let groups: Vec<(&[usize], Vec<usize>)> = groups.into_iter().collect();
        let results: Vec<Result<Vec<(usize, Vec<f64>)>>> = groups
            .par_iter()
            .map(|(beta, members)| {
                let field = monomial(data, beta, self.shape.iter().product());
                if field.iter().any(|v| !v.is_finite()) {
                    let tag = members.iter().map(|&j| jobs[j].tag).min().unwrap_or(0);
                    return Err(Error::NonFiniteFeature(tag));
                }
                let orders: Vec<(usize, &[usize])> = members.iter().map(|&j| (j, jobs[j].orders.as_slice())).collect();
                let mut out = Vec::with_capacity(members.len());
                let last = self.shape.len() - 1;
                self.reduce_rec(field, self.shape.clone(), last, &orders, &mut out);
                Ok(out)
            })
            .collect();
        let mut values = vec![Vec::new(); jobs.len()];
        for r in results {
            for (j, v) in r? {
                values[j] = v.into_iter().map(|x| x * self.volume).collect();
            }
        }
        Ok(values)
    }

    /// Reduces axes from the slowest (time) to the fastest, branching on distinct orders.
    fn reduce_rec(
        &self,
        arr: Vec<f64>,
        shape: Vec<usize>,
        pos: usize,
        members: &[(usize, &[usize])],
        out: &mut Vec<(usize, Vec<f64>)>,
    ) {
        let distinct: Vec<usize> = members
            .iter()
            .map(|(_, o)| o[pos])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let (reduced, new_shape) = self.plans[pos].reduce(&arr, &shape, pos, &distinct);
        drop(arr);
        for (d, next) in distinct.into_iter().zip(reduced) {
            let sub: Vec<(usize, &[usize])> = members.iter().filter(|(_, o)| o[pos] == d).copied().collect();
            if pos == 0 {
                for (j, _) in &sub {
                    out.push((*j, next.clone()));
                }
            } else {
                self.reduce_rec(next, new_shape.clone(), pos - 1, &sub, out);
            }
        }
    }
}

/// Pointwise product `Π_v u_v^{β_v}`.
pub(crate) fn monomial(data: &[Vec<f64>], beta: &[usize], len: usize) -> Vec<f64> {
    let mut field = vec![1.0; len];
    for (u, &b) in data.iter().zip(beta) {
        if b == 0 {
            continue;
        }
        for (f, &x) in field.iter_mut().zip(u) {
            *f *= x.powi(b as i32);
        }
    }
    field
}

/// The assembled weak system.
#[derive(Debug, Clone)]
pub struct WeakSystem {
    /// `H × L` feature matrix.
    pub w: DMatrix<f64>,
    /// One right-hand side per dependent variable.
    pub b: Vec<DVector<f64>>,
    pub centers: Centers,
    pub test_function: TestFunction,
    pub dictionary: Dictionary,
    pub grid: GridSpec,
}

impl WeakSystem {
    pub fn rows(&self) -> usize {
        self.w.nrows()
    }
}

/// Derivative orders of a feature column in storage order, time order 0.
pub(crate) fn feature_orders(spec: &FeatureSpec) -> Vec<usize> {
    let mut orders = spec.alpha.clone();
    orders.push(0);
    orders
}

pub(crate) fn max_orders(dict: &Dictionary, grid: &GridSpec) -> Vec<usize> {
    let mut orders: Vec<usize> = (0..grid.spatial_dims()).map(|i| dict.max_alpha(i)).collect();
    orders.push(1);
    orders
}

/// Builds `W` and every `b` by FFT correlation of monomials with kernel derivatives.
pub fn assemble(data: &ObservationSet, dict: &Dictionary, tf: &TestFunction, centers: &Centers) -> Result<WeakSystem> {
    data.validate()?;
    let grid = &data.grid;
    if dict.num_vars != data.num_vars() || dict.spatial_dims != grid.spatial_dims() {
        return Err(Error::InvalidArgument("dictionary does not match the data".into()));
    }
    let correlator = Correlator::new(grid, tf, centers, &max_orders(dict, grid))?;
    let nv = data.num_vars();
    let sd = grid.spatial_dims();
    let mut jobs: Vec<Job> = dict
        .features()
        .iter()
        .enumerate()
        .map(|(l, f)| Job {
            beta: f.beta.clone(),
            orders: feature_orders(f),
            tag: l,
        })
        .collect();
    for v in 0..nv {
        let mut beta = vec![0; nv];
        beta[v] = 1;
        let mut orders = vec![0; sd];
        orders.push(1);
        jobs.push(Job {
            beta,
            orders,
            tag: dict.len() + v,
        });
    }
    let values = correlator.run(&data.values, &jobs)?;
    let h = centers.len();
    let l = dict.len();
    let mut w = DMatrix::zeros(h, l);
    for (col, f) in dict.features().iter().enumerate() {
        let sign = if f.derivative_order() % 2 == 0 { 1.0 } else { -1.0 };
        for (r, v) in values[col].iter().enumerate() {
            w[(r, col)] = sign * v;
        }
    }
    let b = (0..nv)
        .map(|v| DVector::from_iterator(h, values[l + v].iter().map(|x| -x)))
        .collect();
    Ok(WeakSystem {
        w,
        b,
        centers: centers.clone(),
        test_function: tf.clone(),
        dictionary: dict.clone(),
        grid: grid.clone(),
    })
}

/// One weak-form entry by the literal quadrature sum, without FFTs.
pub fn direct_quadrature_reference(
    data: &ObservationSet,
    feature: &FeatureSpec,
    tf: &TestFunction,
    center: &[usize],
) -> Result<f64> {
    let orders = feature_orders(feature);
    let sign = if feature.derivative_order() % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * box_sum(data, &feature.beta, &orders, tf, center)?)
}

/// `Σ |monomial · ∂^α φ| · volume` around one center: the scale against which
/// rounding in either quadrature should be measured.
pub fn quadrature_magnitude(
    data: &ObservationSet,
    feature: &FeatureSpec,
    tf: &TestFunction,
    center: &[usize],
) -> Result<f64> {
    accumulate(data, &feature.beta, &feature_orders(feature), tf, center, true)
}

/// `Σ_{Ω} monomial · Π kernel(order) · volume` around one center.
pub(crate) fn box_sum(
    data: &ObservationSet,
    beta: &[usize],
    orders: &[usize],
    tf: &TestFunction,
    center: &[usize],
) -> Result<f64> {
    accumulate(data, beta, orders, tf, center, false)
}

fn accumulate(
    data: &ObservationSet,
    beta: &[usize],
    orders: &[usize],
    tf: &TestFunction,
    center: &[usize],
    magnitude: bool,
) -> Result<f64> {
    let shape = data.grid.shape();
    let kernels: Vec<Vec<f64>> = tf
        .axes
        .iter()
        .zip(orders)
        .map(|(k, &d)| sample_kernel(k.m, k.p, k.spacing, d))
        .collect::<Result<_>>()?;
    for ((k, &c), &n) in tf.axes.iter().zip(center).zip(&shape) {
        if c < k.m || c + k.m >= n {
            return Err(Error::InvalidArgument("center is not interior".into()));
        }
    }
    let widths: Vec<usize> = kernels.iter().map(Vec::len).collect();
    let total: usize = widths.iter().product();
    let mut sum = 0.0;
    let mut index = vec![0; shape.len()];
    for flat in 0..total {
        let local = unravel(flat, &widths);
        let mut weight = 1.0;
        for a in 0..shape.len() {
            index[a] = center[a] + local[a] - tf.axes[a].m;
            weight *= kernels[a][local[a]];
        }
        let at = ravel(&index, &shape);
        let mut value = 1.0;
        for (u, &b) in data.values.iter().zip(beta) {
            value *= u[at].powi(b as i32);
        }
        sum += if magnitude {
            (value * weight).abs()
        } else {
            value * weight
        };
    }
    Ok(sum * data.grid.cell_volume())
}
