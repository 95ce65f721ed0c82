//! Separable polynomial bump test functions and the spectral choice of their size.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::changepoint::fit_one_junction;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec, ObservationSet};
use crate::ndutil::lines;

/// Largest exponent considered when sizing a test function.
pub const P_MAX: usize = 60;

/// Half-width, exponent and spacing of the bump along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisKernel {
    pub axis: Axis,
    pub m: usize,
    pub p: usize,
    pub spacing: f64,
}

/// Product of one-dimensional bumps `(1 - (x/(m h))^2)^p`, one per grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    /// Kernels in grid storage order (x, y, t).
    pub axes: Vec<AxisKernel>,
}

impl TestFunction {
    pub fn new(axes: Vec<AxisKernel>) -> Result<Self> {
        for k in &axes {
            if k.m < 1 {
                return Err(Error::InvalidArgument(format!(
                    "half-width on the {} axis must be at least 1",
                    k.axis.name()
                )));
            }
            if !(k.spacing.is_finite() && k.spacing > 0.0) {
                return Err(Error::InvalidArgument("kernel spacing must be positive".into()));
            }
        }
        Ok(TestFunction { axes })
    }

    pub fn kernel(&self, axis: Axis) -> Result<&AxisKernel> {
        self.axes
            .iter()
            .find(|k| k.axis == axis)
            .ok_or_else(|| Error::InvalidArgument(format!("no {} axis in test function", axis.name())))
    }

    /// Checks the support fits the grid and that `p` exceeds each axis' derivative order plus one.
    pub fn check_against(&self, grid: &GridSpec, dict: &Dictionary) -> Result<()> {
        let axes = grid.axes();
        if axes.len() != self.axes.len() || axes.iter().zip(&self.axes).any(|(a, k)| *a != k.axis) {
            return Err(Error::InvalidArgument(
                "test function axes do not match the grid".into(),
            ));
        }
        for (i, k) in self.axes.iter().enumerate() {
            let n = grid.count(k.axis);
            if 2 * k.m + 1 > n {
                return Err(Error::EmptyInterior {
                    axis: k.axis.name(),
                    needed: 2 * k.m + 1,
                    available: n,
                });
            }
            let order = if k.axis == Axis::T { 1 } else { dict.max_alpha(i) };
            if k.p <= order + 1 {
                return Err(Error::DerivativeOrder { order, p: k.p });
            }
        }
        Ok(())
    }

    /// Samples the `derivative_order`-th derivative of the kernel on `axis`.
    pub fn sample(&self, axis: Axis, derivative_order: usize) -> Result<Vec<f64>> {
        let k = self.kernel(axis)?;
        sample_kernel(k.m, k.p, k.spacing, derivative_order)
    }
}

fn falling(p: usize, j: usize) -> f64 {
    (0..j).map(|i| (p - i) as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `d`-th derivative of `(1-s)^p (1+s)^p` with respect to `s`.
fn bump_derivative(s: f64, p: usize, d: usize) -> f64 {
    let (a, b) = (1.0 - s, 1.0 + s);
    (0..=d)
        .filter(|&j| j <= p && d - j <= p)
        .map(|j| {
            let left = falling(p, j) * a.powi((p - j) as i32);
            let right = falling(p, d - j) * b.powi((p - d + j) as i32);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(d, j) * left * right
        })
        .sum()
}

/// Samples the `d`-th derivative of the normalized 1D bump at offsets `-m..=m`.
///
/// The product-rule form keeps the support endpoints exactly zero for `d < p`.
pub fn sample_kernel(m: usize, p: usize, spacing: f64, d: usize) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(Error::InvalidArgument("half-width must be at least 1".into()));
    }
    if d >= p {
        return Err(Error::DerivativeOrder { order: d, p });
    }
    let offsets = -(m as i64)..=(m as i64);
    let base: f64 = offsets
        .clone()
        .map(|o| bump_derivative(o as f64 / m as f64, p, 0))
        .sum();
    let norm = 1.0 / (spacing * base);
    let chain = (1.0 / (m as f64 * spacing)).powi(d as i32);
    Ok(offsets
        .map(|o| norm * chain * bump_derivative(o as f64 / m as f64, p, d))
        .collect())
}

pub fn sample_test_function(tf: &TestFunction, axis: Axis, derivative_order: usize) -> Result<Vec<f64>> {
    tf.sample(axis, derivative_order)
}

/// Junction of the cumulative Fourier magnitude along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumChangepoint {
    pub k_star: usize,
    pub cumulative: Vec<f64>,
    pub fit_cost: f64,
    /// Set when the spectrum was too featureless for a meaningful junction.
    pub fallback: bool,
}

/// Finds the transition mode separating signal from noise along `axis`.
pub fn transition_frequency(data: &ObservationSet, axis: Axis) -> Result<SpectrumChangepoint> {
    let grid = &data.grid;
    let pos = grid
        .axes()
        .iter()
        .position(|&a| a == axis)
        .ok_or_else(|| Error::InvalidArgument(format!("grid has no {} axis", axis.name())))?;
    let shape = grid.shape();
    let n = shape[pos];
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "the {} axis needs at least 8 points for a spectrum",
            axis.name()
        )));
    }
    let half = n / 2;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let (starts, stride) = lines(&shape, pos);
    let mut magnitude = vec![0.0; half + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for field in &data.values {
        for &s in &starts {
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = Complex::new(field[s + k * stride], 0.0);
            }
            fft.process(&mut buf);
            for (acc, c) in magnitude.iter_mut().zip(&buf) {
                *acc += c.norm();
            }
        }
    }
    let count = (starts.len() * data.values.len()) as f64;
    let mut cumulative = Vec::with_capacity(half + 1);
    let mut running = 0.0;
    for v in magnitude {
        running += v / count;
        cumulative.push(running);
    }
    let weights = vec![1.0; cumulative.len()];
    let fit =
        fit_one_junction(&cumulative, &weights).ok_or_else(|| Error::InvalidArgument("spectrum too short".into()))?;
    let degenerate = !fit.cost.is_finite() || !(fit.cost < 0.95 * fit.line_cost);
    let (k_star, fallback) = if degenerate {
        ((n / 10).clamp(1, half.saturating_sub(1).max(1)), true)
    } else {
        (fit.junction, false)
    };
    Ok(SpectrumChangepoint {
        k_star,
        cumulative,
        fit_cost: fit.cost,
        fallback,
    })
}

/// Chosen support size and exponent for one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpChoice {
    pub m: usize,
    pub p: usize,
    /// Set when `m` or `p` hit a clamp.
    pub clamped: bool,
}

/// Sizes the bump so its Gaussian-matched spectral width sits at `k_star`
/// while its value one point inside the support edge stays near `tau_decay`.
///
/// The half-width solves the joint condition
/// `ln r(m) (4 pi^2 k^2 m^2 - 3 N^2 tau_hat^2) = 2 N^2 tau_hat^2 ln tau_decay`
/// with `r(m) = (2m - 1)/m^2`, and `p = floor(ln tau_decay / ln r(m))`.
pub fn choose_m_p(
    k_star: usize,
    axis_count: usize,
    _spacing: f64,
    max_derivative: usize,
    tau_hat: f64,
    tau_decay: f64,
) -> Result<MpChoice> {
    if axis_count < 7 {
        return Err(Error::InvalidArgument(format!(
            "axis with {axis_count} points admits no test function"
        )));
    }
    if k_star < 1 {
        return Err(Error::InvalidArgument("k* must be at least 1".into()));
    }
    if !(tau_hat > 0.0) || !(tau_decay > 0.0 && tau_decay < 1.0) {
        return Err(Error::InvalidArgument(
            "tau_hat > 0 and 0 < tau_decay < 1 required".into(),
        ));
    }
    let ratio = |m: f64| (2.0 * m - 1.0) / (m * m);
    let big_n = axis_count as f64;
    let k = k_star as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let a = big_n * big_n * tau_hat * tau_hat;
    let f = |m: f64| ratio(m).ln() * (two_pi * two_pi * k * k * m * m - 3.0 * a) - 2.0 * a * tau_decay.ln();

    let mut lo = 1.0_f64;
    let mut hi = 2.0_f64;
    while f(hi) > 0.0 && hi < 1e7 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let m_cap = (axis_count - 1) / 2;
    let m_raw = root.round().max(1.0) as usize;
    let m = m_raw.min(m_cap);
    let mut clamped = m != m_raw;

    let floor_p = max_derivative + 2;
    let r = ratio(m as f64);
    let p_decay = if r < 1.0 {
        (tau_decay.ln() / r.ln()).floor() as usize
    } else {
        clamped = true;
        floor_p
    };
    let mut p = p_decay.max(floor_p);
    if p > P_MAX {
        p = P_MAX.max(floor_p);
        clamped = true;
    }
    Ok(MpChoice { m, p, clamped })
}

/// Parameters of the spectral sizing rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizingConfig {
    pub tau_hat: f64,
    pub tau_decay: f64,
}

impl Default for SizingConfig {
    fn default() -> Self {
        SizingConfig {
            tau_hat: 2.0,
            tau_decay: 1e-10,
        }
    }
}

/// Outcome of sizing a test function from data.
#[derive(Debug, Clone, PartialEq)]
pub struct Sizing {
    pub test_function: TestFunction,
    pub changepoints: Vec<SpectrumChangepoint>,
    pub clamped: Vec<bool>,
}

/// Sizes every axis independently from its own spectrum.
pub fn size_test_function(data: &ObservationSet, dict: &Dictionary, config: SizingConfig) -> Result<Sizing> {
    let grid = &data.grid;
    let mut axes = Vec::new();
    let mut changepoints = Vec::new();
    let mut clamped = Vec::new();
    for (i, axis) in grid.axes().into_iter().enumerate() {
        let order = if axis == Axis::T { 1 } else { dict.max_alpha(i) };
        let cp = transition_frequency(data, axis)?;
        let n = grid.count(axis);
        let choice = choose_m_p(
            cp.k_star,
            n,
            grid.spacing(axis),
            order,
            config.tau_hat,
            config.tau_decay,
        )?;
        axes.push(AxisKernel {
            axis,
            m: choice.m,
            p: choice.p,
            spacing: grid.spacing(axis),
        });
        changepoints.push(cp);
        clamped.push(choice.clamped);
    }
    let test_function = TestFunction::new(axes)?;
    test_function.check_against(grid, dict)?;
    Ok(Sizing {
        test_function,
        changepoints,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ks_anchor() {
        let c = choose_m_p(24, 256, 32.0 * std::f64::consts::PI / 256.0, 6, 2.0, 1e-10).unwrap();
        assert_eq!((c.m, c.p), (17, 10));
        assert!(!c.clamped);
    }

    #[test]
    fn normalization_and_parity() {
        let h = 32.0 * std::f64::consts::PI / 256.0;
        let k0 = sample_kernel(17, 10, h, 0).unwrap();
        assert_eq!(k0.len(), 35);
        assert!((h * k0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k0[0], 0.0);
        assert_eq!(k0[34], 0.0);
        for o in 0..35 {
            assert_eq!(k0[o], k0[34 - o]);
        }
        let k1 = sample_kernel(17, 10, h, 1).unwrap();
        assert_eq!(k1[17], 0.0);
        for o in 0..35 {
            assert!((k1[o] + k1[34 - o]).abs() <= 1e-14 * k1.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn derivative_of_order_p_rejected() {
        assert!(matches!(
            sample_kernel(5, 4, 0.1, 4),
            Err(Error::DerivativeOrder { .. })
        ));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let (m, p) = (20usize, 8usize);
        for d in 1..4 {
            for o in -(m as i64) + 1..(m as i64) {
                let s = o as f64 / m as f64;
                let eps = 1e-5;
                let fd = (bump_derivative(s + eps, p, d - 1) - bump_derivative(s - eps, p, d - 1)) / (2.0 * eps);
                let exact = bump_derivative(s, p, d);
                assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "d={d} o={o}");
            }
        }
    }

    #[test]
    fn moment_matches_gaussian() {
        for (m, p) in [(17usize, 10usize), (30, 6), (40, 20), (25, 12)] {
            let h = 0.01;
            let k = sample_kernel(m, p, h, 0).unwrap();
            let second: f64 = k
                .iter()
                .enumerate()
                .map(|(i, v)| h * v * ((i as f64 - m as f64) * h).powi(2))
                .sum();
            let sigma2 = (m as f64 * h).powi(2) / (2 * p + 3) as f64;
            assert!((second / sigma2 - 1.0).abs() < 0.02, "m={m} p={p}");
        }
    }

    #[test]
    fn sinusoid_junction() {
        let n = 128;
        let grid = GridSpec::new(vec![n], 10, vec![1.0 / n as f64], 0.1).unwrap();
        let mut vals = Vec::new();
        for t in 0..10 {
            for i in 0..n {
                let x = i as f64 / n as f64;
                vals.push((2.0 * std::f64::consts::PI * 5.0 * x + 0.1 * t as f64).sin());
            }
        }
        let data = ObservationSet::new(grid, vec!["u".into()], vec![vals]).unwrap();
        let cp = transition_frequency(&data, Axis::X).unwrap();
        assert!((5..=7).contains(&cp.k_star), "k* = {}", cp.k_star);
    }

    #[test]
    fn noise_only_terminates() {
        use rand::{Rng, SeedableRng};
        for seed in 0..5 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 64;
            let grid = GridSpec::new(vec![n], 16, vec![0.1], 0.1).unwrap();
            let vals: Vec<f64> = (0..n * 16).map(|_| rng.random::<f64>() - 0.5).collect();
            let data = ObservationSet::new(grid, vec!["u".into()], vec![vals]).unwrap();
            let cp = transition_frequency(&data, Axis::X).unwrap();
            assert!(cp.k_star >= 1 && cp.k_star < n / 2);
        }
    }

    #[test]
    fn tau_hat_monotone() {
        for k in [3usize, 10, 24, 50] {
            let mut last = 0;
            for i in 0..12 {
                let tau_hat = 0.25 * 2f64.powf(i as f64 * 0.5);
                let c = choose_m_p(k, 256, 0.1, 4, tau_hat, 1e-10).unwrap();
                assert!(c.m >= last);
                last = c.m;
            }
        }
    }

    #[test]
    fn noise_dominated_still_admissible() {
        let c = choose_m_p(128, 256, 0.1, 6, 2.0, 1e-10).unwrap();
        assert!(c.m >= 1);
        assert!(c.p > 7);
        assert!(choose_m_p(3, 6, 0.1, 1, 2.0, 1e-10).is_err());
    }

    proptest! {
        #[test]
        fn boundary_derivatives_vanish(m in 1usize..60, p in 2usize..40, frac in 0.0f64..1.0) {
            let d = ((p as f64 - 1.0) * frac).floor() as usize;
            let k = sample_kernel(m, p, 0.37, d).unwrap();
            prop_assert_eq!(k[0], 0.0);
            prop_assert_eq!(k[2 * m], 0.0);
        }

        #[test]
        fn sizing_respects_contract(k in 1usize..128, n in 7usize..512, ord in 0usize..7) {
            let k = k.min(n / 2).max(1);
            let c = choose_m_p(k, n, 0.1, ord, 2.0, 1e-10).unwrap();
            prop_assert!(c.m >= 1 && 2 * c.m + 1 <= n);
            prop_assert!(c.p > ord + 1);
        }
    }
}
