//! Reference systems with known governing equations, and their simulators.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;

use crate::dictionary::{Coefficients, Dictionary, FeatureSpec};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ObservationSet};
use crate::ode::{integrate, OdeOptions, PolynomialField};
use crate::pde::{evolve, evolve_linear, ik, wavenumbers, EvolveSpec};

/// Default accuracy for ODE reference trajectories.
pub const ODE_TOLERANCE: f64 = 1e-10;

/// How a system's reference data is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Simulator {
    Ode,
    Transport,
    Kdv,
    KuramotoSivashinsky,
    Schrodinger,
    /// Data must be supplied from outside.
    LoadOnly,
}

/// A benchmark: its true equations, sampling grid and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDefinition {
    pub name: &'static str,
    pub num_vars: usize,
    pub spatial_dims: usize,
    pub var_names: Vec<String>,
    /// Per variable, the true `(feature, coefficient)` terms.
    pub terms: Vec<Vec<(FeatureSpec, f64)>>,
    pub alpha_cap: usize,
    pub beta_cap: usize,
    pub grid: GridSpec,
    /// ODE initial state; empty for PDEs, whose profiles are fixed per simulator.
    pub initial_state: Vec<f64>,
    pub simulator: Simulator,
    /// Recommended trimming threshold.
    pub trim_threshold: f64,
}

fn term(alpha: &[usize], beta: &[usize], c: f64) -> (FeatureSpec, f64) {
    (FeatureSpec::new(alpha.to_vec(), beta.to_vec()), c)
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn ode(
    name: &'static str,
    var_names: &[&str],
    terms: Vec<Vec<(FeatureSpec, f64)>>,
    beta_cap: usize,
    x0: &[f64],
    dt: f64,
    t_end: f64,
) -> SystemDefinition {
    let nt = (t_end / dt).round() as usize + 1;
    SystemDefinition {
        name,
        num_vars: var_names.len(),
        spatial_dims: 0,
        var_names: names(var_names),
        terms,
        alpha_cap: 0,
        beta_cap,
        grid: GridSpec::ode(nt, dt).expect("static grid"),
        initial_state: x0.to_vec(),
        simulator: Simulator::Ode,
        trim_threshold: 0.05,
    }
}

fn pde_1d(
    name: &'static str,
    var_names: &[&str],
    terms: Vec<Vec<(FeatureSpec, f64)>>,
    grid: GridSpec,
    simulator: Simulator,
    trim_threshold: f64,
) -> SystemDefinition {
    SystemDefinition {
        name,
        num_vars: var_names.len(),
        spatial_dims: 1,
        var_names: names(var_names),
        terms,
        alpha_cap: 6,
        beta_cap: 6,
        grid,
        initial_state: Vec::new(),
        simulator,
        trim_threshold,
    }
}

/// Names accepted by [`system`], in registry order.
pub const SYSTEM_NAMES: [&str; 11] = [
    "transport",
    "kdv",
    "ks",
    "nls",
    "linear2d",
    "vanderpol",
    "duffing",
    "lotka_volterra",
    "lorenz",
    "pm2d",
    "rd2d",
];

/// Looks up a registered system by name.
pub fn system(name: &str) -> Result<SystemDefinition> {
    let def = match name {
        "transport" => pde_1d(
            "transport",
            &["u"],
            vec![vec![term(&[1], &[1], -1.0), term(&[2], &[1], 0.05)]],
            GridSpec::with_origin(vec![257], 300, vec![1.0 / 256.0], 0.001, vec![0.0], 0.0)?,
            Simulator::Transport,
            0.05,
        ),
        "kdv" => pde_1d(
            "kdv",
            &["u"],
            vec![vec![term(&[1], &[2], -0.25), term(&[3], &[1], -1.0)]],
            GridSpec::with_origin(vec![400], 601, vec![2.0 * PI / 400.0], 1e-5, vec![-PI], 0.0)?,
            Simulator::Kdv,
            0.05,
        ),
        "ks" => pde_1d(
            "ks",
            &["u"],
            vec![vec![
                term(&[1], &[2], -0.5),
                term(&[2], &[1], -1.0),
                term(&[4], &[1], -1.0),
            ]],
            GridSpec::with_origin(vec![256], 301, vec![32.0 * PI / 256.0], 0.5, vec![0.0], 0.0)?,
            Simulator::KuramotoSivashinsky,
            0.2,
        ),
        "nls" => pde_1d(
            "nls",
            &["u", "v"],
            vec![
                vec![
                    term(&[2], &[0, 1], 0.5),
                    term(&[0], &[2, 1], 1.0),
                    term(&[0], &[0, 3], 1.0),
                ],
                vec![
                    term(&[2], &[1, 0], -0.5),
                    term(&[0], &[1, 2], -1.0),
                    term(&[0], &[3, 0], -1.0),
                ],
            ],
            GridSpec::with_origin(vec![256], 251, vec![10.0 / 256.0], PI / 250.0, vec![-5.0], 0.0)?,
            Simulator::Schrodinger,
            0.05,
        ),
        "linear2d" => ode(
            "linear2d",
            &["x", "y"],
            vec![
                vec![term(&[], &[1, 0], -0.15), term(&[], &[0, 1], 2.5)],
                vec![term(&[], &[1, 0], -2.5), term(&[], &[0, 1], -0.15)],
            ],
            5,
            &[2.0, 50.0],
            0.01,
            10.0,
        ),
        "vanderpol" => ode(
            "vanderpol",
            &["x", "y"],
            vec![
                vec![term(&[], &[0, 1], 1.0)],
                vec![
                    term(&[], &[1, 0], -1.0),
                    term(&[], &[0, 1], 4.0),
                    term(&[], &[2, 1], -4.0),
                ],
            ],
            5,
            &[0.0, 1.0],
            0.001,
            15.0,
        ),
        "duffing" => ode(
            "duffing",
            &["x", "y"],
            vec![
                vec![term(&[], &[0, 1], 1.0)],
                vec![
                    term(&[], &[1, 0], -0.2),
                    term(&[], &[0, 1], -0.05),
                    term(&[], &[3, 0], -1.0),
                ],
            ],
            5,
            &[0.0, 2.0],
            0.01,
            10.0,
        ),
        "lotka_volterra" => ode(
            "lotka_volterra",
            &["x", "y"],
            vec![
                vec![term(&[], &[1, 0], 0.67), term(&[], &[1, 1], -1.33)],
                vec![term(&[], &[0, 1], -1.0), term(&[], &[1, 1], 1.0)],
            ],
            5,
            &[10.0, 10.0],
            0.05,
            50.0,
        ),
        "lorenz" => ode(
            "lorenz",
            &["x", "y", "z"],
            vec![
                vec![term(&[], &[1, 0, 0], -10.2), term(&[], &[0, 1, 0], 10.2)],
                vec![
                    term(&[], &[1, 0, 0], 29.0),
                    term(&[], &[0, 1, 0], -1.0),
                    term(&[], &[1, 0, 1], -1.0),
                ],
                vec![term(&[], &[0, 0, 1], -2.0), term(&[], &[1, 1, 0], 1.0)],
            ],
            3,
            &[-8.0, 7.0, 10.0],
            0.001,
            15.0,
        ),
        "pm2d" => SystemDefinition {
            name: "pm2d",
            num_vars: 1,
            spatial_dims: 2,
            var_names: names(&["u"]),
            terms: vec![vec![
                term(&[2, 0], &[2], 1.0),
                term(&[1, 1], &[2], -0.8),
                term(&[0, 2], &[2], 0.3),
            ]],
            alpha_cap: 4,
            beta_cap: 4,
            grid: GridSpec::with_origin(vec![200, 200], 100, vec![0.0503, 0.0503], 0.0503, vec![-5.0, -5.0], 0.0)?,
            initial_state: Vec::new(),
            simulator: Simulator::LoadOnly,
            trim_threshold: 0.2,
        },
        "rd2d" => SystemDefinition {
            name: "rd2d",
            num_vars: 2,
            spatial_dims: 2,
            var_names: names(&["u", "v"]),
            terms: vec![
                vec![
                    term(&[2, 0], &[1, 0], 0.1),
                    term(&[0, 2], &[1, 0], 0.1),
                    term(&[0, 0], &[1, 0], 1.0),
                    term(&[0, 0], &[0, 3], 1.0),
                    term(&[0, 0], &[1, 2], -1.0),
                    term(&[0, 0], &[2, 1], 1.0),
                    term(&[0, 0], &[3, 0], -1.0),
                ],
                vec![
                    term(&[0, 2], &[0, 1], 0.1),
                    term(&[2, 0], &[0, 1], 0.1),
                    term(&[0, 0], &[0, 1], 1.0),
                    term(&[0, 0], &[0, 3], -1.0),
                    term(&[0, 0], &[1, 2], -1.0),
                    term(&[0, 0], &[2, 1], -1.0),
                    term(&[0, 0], &[3, 0], -1.0),
                ],
            ],
            alpha_cap: 4,
            beta_cap: 5,
            grid: GridSpec::with_origin(
                vec![256, 256],
                128,
                vec![0.0781, 0.0781],
                0.0781,
                vec![-10.0, -10.0],
                0.0,
            )?,
            initial_state: Vec::new(),
            simulator: Simulator::LoadOnly,
            trim_threshold: 0.05,
        },
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    Ok(def)
}

impl SystemDefinition {
    /// True coefficient vectors, one per variable, in `dict`'s feature order.
    pub fn true_coefficients(&self, dict: &Dictionary) -> Result<Vec<Coefficients>> {
        self.terms.iter().map(|t| Coefficients::from_terms(dict, t)).collect()
    }

    pub fn is_generatable(&self) -> bool {
        self.simulator != Simulator::LoadOnly
    }
}

/// Clean reference data for a generatable system.
pub fn simulate(def: &SystemDefinition) -> Result<ObservationSet> {
    match def.simulator {
        Simulator::Ode => simulate_ode(def, ODE_TOLERANCE),
        Simulator::LoadOnly => Err(Error::UnknownSystem(format!(
            "{} is load-only; supply its data from a file",
            def.name
        ))),
        _ => simulate_pde_1d(def),
    }
}

pub fn simulate_ode(def: &SystemDefinition, tolerance: f64) -> Result<ObservationSet> {
    if def.spatial_dims != 0 {
        return Err(Error::InvalidArgument(format!("{} is not an ODE system", def.name)));
    }
    let field = PolynomialField::from_features(&def.terms)?;
    let times = def.grid.coords(crate::grid::Axis::T);
    let traj = integrate(
        &field,
        &def.initial_state,
        &times,
        OdeOptions::with_tolerance(tolerance),
    )?;
    let values = (0..def.num_vars)
        .map(|v| traj.samples.iter().map(|s| s[v]).collect())
        .collect();
    ObservationSet::new(def.grid.clone(), def.var_names.clone(), values)
}

/// Initial profile of a 1D benchmark on its periodic simulation points.
fn initial_profile(sim: Simulator, x: &[f64]) -> Vec<Complex<f64>> {
    let sech = |v: f64| 1.0 / v.cosh();
    x.iter()
        .map(|&x| match sim {
            Simulator::Transport => {
                let edge = 0.7;
                let v = if x < edge {
                    (4.0 * PI * x / edge).sin().powi(3) * (PI * x / edge).cos()
                } else {
                    0.0
                };
                Complex::new(v, 0.0)
            }
            Simulator::Kdv => Complex::new(
                3.0 * 625.0 * sech(0.5 * 25.0 * (x + 2.0)).powi(2) + 3.0 * 256.0 * sech(0.5 * 16.0 * (x + 1.0)).powi(2),
                0.0,
            ),
            Simulator::KuramotoSivashinsky => Complex::new((x / 16.0).cos() * (1.0 + (x / 16.0).sin()), 0.0),
            Simulator::Schrodinger => Complex::new(2.0 * sech(x), 0.0),
            _ => Complex::new(0.0, 0.0),
        })
        .collect()
}

pub fn simulate_pde_1d(def: &SystemDefinition) -> Result<ObservationSet> {
    if def.spatial_dims != 1 {
        return Err(Error::InvalidArgument(format!("{} is not a 1D PDE", def.name)));
    }
    let grid = &def.grid;
    let dx = grid.dx[0];
    // the transport grid stores the periodic wrap point explicitly
    let wrap = def.simulator == Simulator::Transport;
    let n = if wrap { grid.nx[0] - 1 } else { grid.nx[0] };
    let length = n as f64 * dx;
    let x: Vec<f64> = (0..n).map(|i| grid.x0[0] + i as f64 * dx).collect();
    let k = wavenumbers(n, length);
    let u0 = initial_profile(def.simulator, &x);
    let nt = grid.nt;
    let dt = grid.dt;
    let snapshots: Vec<Vec<Complex<f64>>> = match def.simulator {
        Simulator::Transport => {
            let linear: Vec<Complex<f64>> = k.iter().map(|&k| Complex::new(-0.05 * k * k, -k)).collect();
            let real: Vec<f64> = u0.iter().map(|c| c.re).collect();
            evolve_linear(&real, &linear, dt, nt)
                .into_iter()
                .map(|s| s.into_iter().map(|v| Complex::new(v, 0.0)).collect())
                .collect()
        }
        Simulator::Kdv => {
            let linear: Vec<Complex<f64>> = k.iter().map(|&k| Complex::new(0.0, k * k * k)).collect();
            let flux = scaled(&ik(&k), -0.25);
            let spec = EvolveSpec {
                initial: &u0,
                linear: &linear,
                multiplier: Some(&flux),
                dt_out: dt,
                outputs: nt,
                substeps: 4,
            };
            evolve(spec, square)?
        }
        Simulator::KuramotoSivashinsky => {
            let linear: Vec<Complex<f64>> = k.iter().map(|&k| Complex::new(k * k - k.powi(4), 0.0)).collect();
            let flux = scaled(&ik(&k), -0.5);
            let spec = EvolveSpec {
                initial: &u0,
                linear: &linear,
                multiplier: Some(&flux),
                dt_out: dt,
                outputs: nt,
                substeps: 4,
            };
            evolve(spec, square)?
        }
        Simulator::Schrodinger => {
            let linear: Vec<Complex<f64>> = k.iter().map(|&k| Complex::new(0.0, 0.5 * k * k)).collect();
            let spec = EvolveSpec {
                initial: &u0,
                linear: &linear,
                multiplier: None,
                dt_out: dt,
                outputs: nt,
                substeps: 16,
            };
            evolve(spec, |psi| {
                psi.iter().map(|p| Complex::new(0.0, -1.0) * p * p.norm_sqr()).collect()
            })?
        }
        _ => return Err(Error::InvalidArgument(format!("{} has no 1D simulator", def.name))),
    };
    let width = grid.nx[0];
    let mut fields = vec![Vec::with_capacity(width * nt); def.num_vars];
    for snap in &snapshots {
        for i in 0..width {
            let c = snap[i % n];
            fields[0].push(c.re);
            if def.num_vars > 1 {
                fields[1].push(c.im);
            }
        }
    }
    ObservationSet::new(grid.clone(), def.var_names.clone(), fields)
}

fn square(u: &[Complex<f64>]) -> Vec<Complex<f64>> {
    u.iter().map(|c| Complex::new(c.re * c.re, 0.0)).collect()
}

fn scaled(v: &[Complex<f64>], a: f64) -> Vec<Complex<f64>> {
    v.iter().map(|c| c * a).collect()
}
