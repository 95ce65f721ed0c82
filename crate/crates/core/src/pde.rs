//! Periodic pseudospectral solvers for 1D evolution equations.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};

use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Angular wavenumbers of an `n`-point periodic grid of length `length`, in FFT order.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let k = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            // the Nyquist mode is odd-symmetric; zeroing it keeps real data real
            let k = if n % 2 == 0 && j == n / 2 { 0.0 } else { k };
            2.0 * PI * k / length
        })
        .collect()
}

/// Forward and inverse transforms of one length, with unitary-style scaling on the inverse.
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn fft(&self, v: &mut [C64]) {
        self.forward.process(v);
    }

    pub fn ifft(&self, v: &mut [C64]) {
        self.inverse.process(v);
        let s = 1.0 / self.n as f64;
        v.iter_mut().for_each(|c| *c *= s);
    }
}

/// Exponential time differencing RK4 for `v̂_t = L v̂ + N(v̂)` with diagonal `L`.
pub struct Etdrk4 {
    e: Vec<C64>,
    e2: Vec<C64>,
    q: Vec<C64>,
    f1: Vec<C64>,
    f2: Vec<C64>,
    f3: Vec<C64>,
}

impl Etdrk4 {
    /// Coefficients by contour averages over `contour_points` roots of unity.
    pub fn new(linear: &[C64], h: f64, contour_points: usize) -> Self {
        let m = contour_points as f64;
        let roots: Vec<C64> = (1..=contour_points)
            .map(|j| C64::from_polar(1.0, PI * (j as f64 - 0.5) / m))
            .collect();
        let mut out = Etdrk4 {
            e: Vec::with_capacity(linear.len()),
            e2: Vec::with_capacity(linear.len()),
            q: Vec::with_capacity(linear.len()),
            f1: Vec::with_capacity(linear.len()),
            f2: Vec::with_capacity(linear.len()),
            f3: Vec::with_capacity(linear.len()),
        };
        for &l in linear {
            let lh = l * h;
            out.e.push(lh.exp());
            out.e2.push((lh * 0.5).exp());
            let mut q = C64::new(0.0, 0.0);
            let mut f1 = C64::new(0.0, 0.0);
            let mut f2 = C64::new(0.0, 0.0);
            let mut f3 = C64::new(0.0, 0.0);
            // the half-circle contour plus its conjugate covers the full circle for real L
            for &r in &roots {
                for z in [lh + r, lh + r.conj()] {
                    let ez = z.exp();
                    let z3 = z * z * z;
                    q += ((z * 0.5).exp() - 1.0) / z;
                    f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                    f2 += (2.0 + z + ez * (z - 2.0)) / z3;
                    f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
                }
            }
            let scale = h / (2.0 * m);
            out.q.push(q * scale);
            out.f1.push(f1 * scale);
            out.f2.push(f2 * scale);
            out.f3.push(f3 * scale);
        }
        out
    }

    /// One step; `nonlinear` maps a spectrum to the spectrum of the nonlinear term.
    pub fn step(&self, v: &mut [C64], nonlinear: &mut impl FnMut(&[C64]) -> Vec<C64>) {
        let nv = nonlinear(v);
        let a: Vec<C64> = (0..v.len()).map(|i| self.e2[i] * v[i] + self.q[i] * nv[i]).collect();
        let na = nonlinear(&a);
        let b: Vec<C64> = (0..v.len()).map(|i| self.e2[i] * v[i] + self.q[i] * na[i]).collect();
        let nb = nonlinear(&b);
        let c: Vec<C64> = (0..v.len())
            .map(|i| self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nv[i]))
            .collect();
        let nc = nonlinear(&c);
        for i in 0..v.len() {
            v[i] = self.e[i] * v[i] + nv[i] * self.f1[i] + 2.0 * (na[i] + nb[i]) * self.f2[i] + nc[i] * self.f3[i];
        }
    }
}

/// Settings for [`evolve`].
pub struct EvolveSpec<'a> {
    pub initial: &'a [C64],
    pub linear: &'a [C64],
    /// Applied to the spectrum of the physical nonlinearity (e.g. `-i k / 2` for `-(u^2)_x / 2`).
    pub multiplier: Option<&'a [C64]>,
    pub dt_out: f64,
    pub outputs: usize,
    pub substeps: usize,
}

/// Runs ETDRK4 and returns physical-space snapshots at `0, dt_out, …`.
pub fn evolve(spec: EvolveSpec<'_>, mut nonlinear_physical: impl FnMut(&[C64]) -> Vec<C64>) -> Result<Vec<Vec<C64>>> {
    let n = spec.initial.len();
    let spectral = Spectral::new(n);
    let h = spec.dt_out / spec.substeps as f64;
    let scheme = Etdrk4::new(spec.linear, h, 32);
    let mut v = spec.initial.to_vec();
    spectral.fft(&mut v);
    let scale = spec.initial.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    let mut snapshots = Vec::with_capacity(spec.outputs);
    snapshots.push(spec.initial.to_vec());
    let mut nonlinear = |vh: &[C64]| {
        let mut u = vh.to_vec();
        spectral.ifft(&mut u);
        let mut out = nonlinear_physical(&u);
        spectral.fft(&mut out);
        if let Some(mult) = spec.multiplier {
            out.iter_mut().zip(mult).for_each(|(o, m)| *o *= m);
        }
        out
    };
    for step in 1..spec.outputs {
        for _ in 0..spec.substeps {
            scheme.step(&mut v, &mut nonlinear);
        }
        let mut u = v.clone();
        spectral.ifft(&mut u);
        if u.iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite() || c.norm() > 1e8 * scale)
        {
            return Err(Error::Simulation(format!("solution blew up at output step {step}")));
        }
        snapshots.push(u);
    }
    Ok(snapshots)
}

/// Exact spectral solution of a linear constant-coefficient equation `v̂_t = L v̂`.
pub fn evolve_linear(initial: &[f64], linear: &[C64], dt_out: f64, outputs: usize) -> Vec<Vec<f64>> {
    let n = initial.len();
    let spectral = Spectral::new(n);
    let mut v0: Vec<C64> = initial.iter().map(|&x| C64::new(x, 0.0)).collect();
    spectral.fft(&mut v0);
    (0..outputs)
        .map(|s| {
            let t = s as f64 * dt_out;
            let mut v: Vec<C64> = v0.iter().zip(linear).map(|(c, l)| c * (l * t).exp()).collect();
            spectral.ifft(&mut v);
            v.iter().map(|c| c.re).collect()
        })
        .collect()
}

/// `i k` for each mode, as complex multipliers.
pub fn ik(k: &[f64]) -> Vec<C64> {
    k.iter().map(|&k| C64::new(0.0, k)).collect()
}
