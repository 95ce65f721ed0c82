//! Noise injection, identification error metrics and an empirical check of the noise error estimate.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dictionary::{Coefficients, Dictionary, FeatureSpec};
use crate::error::{Error, Result};
use crate::grid::{Axis, ObservationSet};
use crate::ndutil::{ravel, unravel};
use crate::ode::{integrate, OdeOptions, PolynomialField};
use crate::test_function::{sample_kernel, TestFunction};

/// Forward simulations stop once a state exceeds this multiple of the clean maximum.
pub const BLOW_UP_FACTOR: f64 = 1e6;
/// Accuracy of forward simulations for the dynamic error.
pub const FORWARD_TOLERANCE: f64 = 1e-10;
const FORWARD_MAX_STEPS: usize = 5_000_000;

/// Gaussian noise relative to the signal's midrange-centered RMS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_nsr: f64,
    pub seed: u64,
}

/// `sqrt(mean |u - (max + min)/2|²)`.
pub fn midrange_rms(field: &[f64]) -> f64 {
    if field.is_empty() {
        return 0.0;
    }
    let (lo, hi) = field.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let mid = 0.5 * (lo + hi);
    (field.iter().map(|v| (v - mid).powi(2)).sum::<f64>() / field.len() as f64).sqrt()
}

/// Per-variable noise standard deviations implied by `sigma_nsr`.
pub fn noise_levels(clean: &ObservationSet, sigma_nsr: f64) -> Vec<f64> {
    clean.values.iter().map(|f| sigma_nsr * midrange_rms(f)).collect()
}

/// Adds i.i.d. Gaussian noise; variable `v` draws from stream `v` of the seeded generator.
pub fn add_noise(clean: &ObservationSet, spec: NoiseSpec) -> Result<ObservationSet> {
    if !(spec.sigma_nsr >= 0.0) || !spec.sigma_nsr.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise ratio {} must be finite and >= 0",
            spec.sigma_nsr
        )));
    }
    let mut noisy = clean.clone();
    if spec.sigma_nsr == 0.0 {
        return Ok(noisy);
    }
    for (v, (field, sigma)) in noisy
        .values
        .iter_mut()
        .zip(noise_levels(clean, spec.sigma_nsr))
        .enumerate()
    {
        if sigma == 0.0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(v as u64);
        for x in field.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += sigma * z;
        }
    }
    Ok(noisy)
}

/// Coefficient, support and residual errors of an identified system.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub e2: f64,
    pub e_inf: f64,
    pub tpr: f64,
    pub ppv: f64,
    pub e_res: f64,
    pub e_dyn: Option<f64>,
}

/// Metrics over all equations at once: coefficient vectors and residuals are stacked.
/// `ppv` is 0 when nothing was identified.
pub fn error_report(
    truth: &[Coefficients],
    found: &[Coefficients],
    w: &DMatrix<f64>,
    b: &[DVector<f64>],
    e_dyn: Option<f64>,
) -> Result<ErrorReport> {
    if truth.len() != found.len() || truth.len() != b.len() {
        return Err(Error::InvalidArgument(
            "one coefficient vector and target per equation is required".into(),
        ));
    }
    let mut diff = 0.0;
    let mut norm = 0.0;
    let mut e_inf: f64 = 0.0;
    let (mut hits, mut true_count, mut found_count) = (0usize, 0usize, 0usize);
    let mut res = 0.0;
    let mut b_norm = 0.0;
    for ((t, f), bj) in truth.iter().zip(found).zip(b) {
        if t.len() != f.len() || t.len() != w.ncols() || bj.len() != w.nrows() {
            return Err(Error::InvalidArgument(
                "coefficient lengths do not match the feature matrix".into(),
            ));
        }
        for (&ct, &cf) in t.values.iter().zip(&f.values) {
            diff += (ct - cf).powi(2);
            norm += ct * ct;
            if ct != 0.0 {
                e_inf = e_inf.max((ct - cf).abs() / ct.abs());
                true_count += 1;
                hits += usize::from(cf != 0.0);
            }
            found_count += usize::from(cf != 0.0);
        }
        let c = DVector::from_column_slice(&f.values);
        res += (w * c - bj).norm_squared();
        b_norm += bj.norm_squared();
    }
    if norm == 0.0 {
        return Err(Error::UndefinedMetric("true coefficients are all zero".into()));
    }
    Ok(ErrorReport {
        e2: (diff / norm).sqrt(),
        e_inf,
        tpr: hits as f64 / true_count as f64,
        ppv: if found_count == 0 {
            0.0
        } else {
            hits as f64 / found_count as f64
        },
        e_res: if b_norm == 0.0 {
            res.sqrt()
        } else {
            (res / b_norm).sqrt()
        },
        e_dyn,
    })
}

/// `(feature, coefficient)` pairs of the nonzero entries.
pub fn terms_of(dict: &Dictionary, c: &Coefficients) -> Vec<(FeatureSpec, f64)> {
    c.support()
        .into_iter()
        .map(|l| (dict.get(l).clone(), c.values[l]))
        .collect()
}

/// Mean squared deviation between the identified ODE run forward from the clean initial state and
/// the clean trajectory. A diverging model is compared only up to the last sample before blow-up.
pub fn dynamic_error(clean: &ObservationSet, dict: &Dictionary, found: &[Coefficients]) -> Result<f64> {
    if clean.grid.spatial_dims() != 0 {
        return Err(Error::InvalidArgument(
            "the dynamic error is defined for ODE data only".into(),
        ));
    }
    let equations: Vec<Vec<(FeatureSpec, f64)>> = found.iter().map(|c| terms_of(dict, c)).collect();
    let field = PolynomialField::from_features(&equations)?;
    let nv = clean.num_vars();
    let nt = clean.grid.nt;
    let x0: Vec<f64> = clean.values.iter().map(|f| f[0]).collect();
    let peak = clean.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let opts = OdeOptions {
        max_steps: FORWARD_MAX_STEPS,
        blow_up: Some(BLOW_UP_FACTOR * peak.max(f64::MIN_POSITIVE)),
        ..OdeOptions::with_tolerance(FORWARD_TOLERANCE)
    };
    let traj = integrate(&field, &x0, &clean.grid.coords(Axis::T), opts)?;
    let used = traj.samples.len().min(nt);
    if used == 0 {
        return Err(Error::UndefinedMetric("forward simulation produced no samples".into()));
    }
    let total: f64 = traj.samples[..used]
        .iter()
        .enumerate()
        .map(|(n, s)| (0..nv).map(|v| (s[v] - clean.values[v][n]).powi(2)).sum::<f64>())
        .sum();
    Ok(total / (used * nv) as f64)
}

/// Empirical check of the noise error estimate for one equation of a known model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseErrorEstimate {
    /// `max_h sup_Ω |g|` over the linear sensitivity `g` of the residual to the noise.
    pub s_bar_star: f64,
    /// Predicted variance of the residual per unit noise variance, one per center.
    pub s_h_star: Vec<f64>,
    /// Monte-Carlo variance of the residual change caused by noise, one per center.
    pub empirical_variance: Vec<f64>,
    /// Largest `|e_h| / (S̄*_h |Ω_h| ε)` over centers and trials, `ε` being the trial's largest draw.
    pub bound_ratio: f64,
    pub sigma: f64,
}

impl NoiseErrorEstimate {
    /// `empirical / (σ² S_h*)` per center, `None` where the prediction vanishes.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        let s2 = self.sigma * self.sigma;
        self.s_h_star
            .iter()
            .zip(&self.empirical_variance)
            .map(|(&s, &e)| (s2 * s > 0.0).then(|| e / (s2 * s)))
            .collect()
    }
}

/// One feature's kernel samples and signs, precomputed for direct sums over a region.
struct Term {
    beta: Vec<usize>,
    weights: Vec<f64>,
    coefficient: f64,
}

fn region_terms(
    dict: &Dictionary,
    model: &Coefficients,
    variable: usize,
    tf: &TestFunction,
    axes: usize,
) -> Result<Vec<Term>> {
    let widths: Vec<usize> = tf.axes.iter().map(|k| 2 * k.m + 1).collect();
    let total: usize = widths.iter().product();
    let product_weights = |orders: &[usize]| -> Result<Vec<f64>> {
        let kernels: Vec<Vec<f64>> = tf
            .axes
            .iter()
            .zip(orders)
            .map(|(k, &d)| sample_kernel(k.m, k.p, k.spacing, d))
            .collect::<Result<_>>()?;
        Ok((0..total)
            .map(|flat| {
                unravel(flat, &widths)
                    .iter()
                    .zip(&kernels)
                    .map(|(&i, k)| k[i])
                    .product()
            })
            .collect())
    };
    let mut terms = Vec::new();
    for l in model.support() {
        let f = dict.get(l);
        let mut orders = f.alpha.clone();
        orders.push(0);
        let sign = if f.derivative_order() % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(Term {
            beta: f.beta.clone(),
            weights: product_weights(&orders)?,
            coefficient: sign * model.values[l],
        });
    }
    // the target side: +U_j ∂_t φ in the residual W c − b
    let mut orders = vec![0; axes - 1];
    orders.push(1);
    let mut beta = vec![0; dict.num_vars];
    beta[variable] = 1;
    terms.push(Term {
        beta,
        weights: product_weights(&orders)?,
        coefficient: 1.0,
    });
    Ok(terms)
}

/// Validates the linear noise error model on `centers` using `trials` draws of i.i.d. `N(0, σ²)` noise.
pub fn theorem1_validation(
    clean: &ObservationSet,
    dict: &Dictionary,
    model: &Coefficients,
    variable: usize,
    tf: &TestFunction,
    centers: &[Vec<usize>],
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<NoiseErrorEstimate> {
    if trials < 2 {
        return Err(Error::InvalidArgument("at least two trials are needed".into()));
    }
    if variable >= clean.num_vars() || model.len() != dict.len() {
        return Err(Error::InvalidArgument("model does not match the data".into()));
    }
    let shape = clean.grid.shape();
    let axes = shape.len();
    let widths: Vec<usize> = tf.axes.iter().map(|k| 2 * k.m + 1).collect();
    let total: usize = widths.iter().product();
    for c in centers {
        let interior = c.len() == axes
            && tf
                .axes
                .iter()
                .zip(c)
                .zip(&shape)
                .all(|((k, &c), &n)| c >= k.m && c + k.m < n);
        if !interior {
            return Err(Error::InvalidArgument("center is not interior".into()));
        }
    }
    let terms = region_terms(dict, model, variable, tf, axes)?;
    let vol = clean.grid.cell_volume();
    let nv = clean.num_vars();
    let point = |center: &[usize], flat: usize| -> usize {
        let local = unravel(flat, &widths);
        let index: Vec<usize> = (0..axes).map(|a| center[a] + local[a] - tf.axes[a].m).collect();
        ravel(&index, &shape)
    };
    let residual = |values: &[Vec<f64>], center: &[usize]| -> f64 {
        let mut sum = 0.0;
        for flat in 0..total {
            let at = point(center, flat);
            for t in &terms {
                let mono: f64 = values.iter().zip(&t.beta).map(|(u, &b)| u[at].powi(b as i32)).product();
                sum += t.coefficient * mono * t.weights[flat];
            }
        }
        sum * vol
    };

    let mut s_h_star = Vec::with_capacity(centers.len());
    let mut s_bar_h = Vec::with_capacity(centers.len());
    for c in centers {
        let (mut sq, mut sup) = (0.0, 0.0f64);
        for flat in 0..total {
            let at = point(c, flat);
            for v in 0..nv {
                let g: f64 = terms
                    .iter()
                    .filter(|t| t.beta[v] > 0)
                    .map(|t| {
                        let mono: f64 = (0..nv)
                            .map(|q| {
                                let b = t.beta[q] as i32 - i32::from(q == v);
                                clean.values[q][at].powi(b)
                            })
                            .product();
                        t.coefficient * t.beta[v] as f64 * mono * t.weights[flat]
                    })
                    .sum();
                sq += g * g;
                sup = sup.max(g.abs());
            }
        }
        s_h_star.push(sq * vol * vol);
        s_bar_h.push(sup);
    }
    let base: Vec<f64> = centers.iter().map(|c| residual(&clean.values, c)).collect();
    let region = total as f64 * vol;

    let draws: Vec<(Vec<f64>, f64)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let mut eps = 0.0f64;
            let noisy: Vec<Vec<f64>> = clean
                .values
                .iter()
                .map(|f| {
                    f.iter()
                        .map(|&x| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            eps = eps.max((sigma * z).abs());
                            x + sigma * z
                        })
                        .collect()
                })
                .collect();
            let errors: Vec<f64> = centers
                .iter()
                .zip(&base)
                .map(|(c, b0)| residual(&noisy, c) - b0)
                .collect();
            let worst = errors
                .iter()
                .zip(&s_bar_h)
                .map(|(e, &s)| {
                    if s * eps > 0.0 {
                        e.abs() / (s * region * eps)
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max);
            (errors, worst)
        })
        .collect();

    let n = trials as f64;
    let empirical_variance = (0..centers.len())
        .map(|h| {
            let mean = draws.iter().map(|(e, _)| e[h]).sum::<f64>() / n;
            draws.iter().map(|(e, _)| (e[h] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    Ok(NoiseErrorEstimate {
        s_bar_star: s_bar_h.iter().copied().fold(0.0, f64::max),
        s_h_star,
        empirical_variance,
        bound_ratio: draws.iter().map(|d| d.1).fold(0.0, f64::max),
        sigma,
    })
}
