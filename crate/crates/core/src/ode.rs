//! Adaptive Dormand–Prince 5(4) integration with dense output, for polynomial vector fields.

use crate::dictionary::FeatureSpec;
use crate::error::{Error, Result};

/// Right-hand side `dx_v/dt = Σ c · Π x^β` for each variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialField {
    pub terms: Vec<Vec<(Vec<usize>, f64)>>,
}

impl PolynomialField {
    /// Builds a field from per-variable `(feature, coefficient)` lists; features must be derivative free.
    pub fn from_features(equations: &[Vec<(FeatureSpec, f64)>]) -> Result<Self> {
        let mut terms = Vec::with_capacity(equations.len());
        for eq in equations {
            let mut row = Vec::with_capacity(eq.len());
            for (f, c) in eq {
                if f.derivative_order() > 0 {
                    return Err(Error::InvalidArgument(format!("ODE term {f} carries a derivative")));
                }
                if f.beta.len() != equations.len() {
                    return Err(Error::InvalidArgument(format!("ODE term {f} has the wrong arity")));
                }
                row.push((f.beta.clone(), *c));
            }
            terms.push(row);
        }
        Ok(PolynomialField { terms })
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, eq) in out.iter_mut().zip(&self.terms) {
            *o = eq
                .iter()
                .map(|(beta, c)| c * beta.iter().zip(x).map(|(&b, &xi)| xi.powi(b as i32)).product::<f64>())
                .sum();
        }
    }
}

/// Tolerances and guards for the integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Stop early once any state magnitude exceeds this bound. When set, step underflow and an
    /// exhausted step budget also truncate instead of failing.
    pub blow_up: Option<f64>,
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            max_steps: 50_000_000,
            blow_up: None,
        }
    }
}

/// Samples on the requested times; `samples.len() < times.len()` when integration stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Vec<f64>>,
    pub blew_up: bool,
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates from `x0` at `times[0]` and samples at every entry of the increasing `times`.
pub fn integrate(field: &PolynomialField, x0: &[f64], times: &[f64], opts: OdeOptions) -> Result<Trajectory> {
    let n = field.dim();
    if x0.len() != n {
        return Err(Error::InvalidArgument("initial state has the wrong length".into()));
    }
    if times.is_empty() {
        return Ok(Trajectory {
            samples: Vec::new(),
            blew_up: false,
        });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("sample times must increase".into()));
    }
    let mut samples = vec![x0.to_vec()];
    let t_end = *times.last().unwrap();
    let mut t = times[0];
    let mut x = x0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    field.eval(&x, &mut k[0]);
    let mut h = initial_step(field, &x, &k[0], t_end - t, opts);
    let mut next = 1;
    let mut stage = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut steps = 0;
    while next < times.len() {
        steps += 1;
        if steps > opts.max_steps {
            if opts.blow_up.is_some() {
                return Ok(Trajectory { samples, blew_up: true });
            }
            return Err(Error::Simulation("step budget exhausted".into()));
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_min {
            if opts.blow_up.is_some() {
                return Ok(Trajectory { samples, blew_up: true });
            }
            return Err(Error::Simulation(format!("step size underflow at t = {t}")));
        }
        h = h.min(t_end - t);
        for s in 1..7 {
            for i in 0..n {
                stage[i] = x[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            let (_, rest) = k.split_at_mut(s);
            field.eval(&stage, &mut rest[0]);
        }
        for i in 0..n {
            x_new[i] = stage[i];
        }
        let mut err = 0.0;
        for i in 0..n {
            let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let sc = opts.atol + opts.rtol * x[i].abs().max(x_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            let t_new = t + h;
            while next < times.len() && times[next] <= t_new + 1e-12 * t_new.abs().max(1.0) {
                let theta = ((times[next] - t) / h).clamp(0.0, 1.0);
                samples.push(dense(&x, &x_new, &k, h, theta));
                next += 1;
            }
            let escaped = opts
                .blow_up
                .is_some_and(|limit| x_new.iter().any(|v| !v.is_finite() || v.abs() > limit));
            if escaped {
                if let Some(last) = samples.last() {
                    if last.iter().any(|v| !v.is_finite() || v.abs() > opts.blow_up.unwrap()) {
                        samples.pop();
                    }
                }
                return Ok(Trajectory { samples, blew_up: true });
            }
            t = t_new;
            x.copy_from_slice(&x_new);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= if err <= 1.0 { factor } else { factor.min(1.0) };
    }
    Ok(Trajectory {
        samples,
        blew_up: false,
    })
}

fn dense(x0: &[f64], x1: &[f64], k: &[Vec<f64>], h: f64, theta: f64) -> Vec<f64> {
    (0..x0.len())
        .map(|i| {
            let r1 = x0[i];
            let r2 = x1[i] - x0[i];
            let r3 = h * k[0][i] - r2;
            let r4 = r2 - h * k[6][i] - r3;
            let r5 = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
            let s = 1.0 - theta;
            r1 + theta * (r2 + s * (r3 + theta * (r4 + s * r5)))
        })
        .collect()
}

fn initial_step(field: &PolynomialField, x: &[f64], f0: &[f64], span: f64, opts: OdeOptions) -> f64 {
    let n = x.len();
    let scale: Vec<f64> = x.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = norm(x);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let x1: Vec<f64> = x.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    field.eval(&x1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span.abs()).max(1e-12)
}
