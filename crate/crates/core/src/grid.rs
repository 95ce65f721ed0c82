//! Uniform space-time lattices and the data sampled on them.

use crate::error::{Error, Result};

/// One axis of the space-time lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    T,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::T => "t",
        }
    }

    pub(crate) fn spatial(index: usize) -> Axis {
        match index {
            0 => Axis::X,
            _ => Axis::Y,
        }
    }
}

/// Uniform lattice. Spatial axes are stored x first; `spatial_dims == 0` is an ODE system.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nx: Vec<usize>,
    pub nt: usize,
    pub dx: Vec<f64>,
    pub dt: f64,
    pub x0: Vec<f64>,
    pub t0: f64,
}

impl GridSpec {
    pub fn new(nx: Vec<usize>, nt: usize, dx: Vec<f64>, dt: f64) -> Result<Self> {
        let x0 = vec![0.0; nx.len()];
        Self::with_origin(nx, nt, dx, dt, x0, 0.0)
    }

    pub fn ode(nt: usize, dt: f64) -> Result<Self> {
        Self::new(Vec::new(), nt, Vec::new(), dt)
    }

    pub fn with_origin(nx: Vec<usize>, nt: usize, dx: Vec<f64>, dt: f64, x0: Vec<f64>, t0: f64) -> Result<Self> {
        let grid = GridSpec { nx, nt, dx, dt, x0, t0 };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.nx.len();
        if d > 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        if self.dx.len() != d || self.x0.len() != d {
            return Err(Error::InvalidGrid(format!(
                "{} spatial counts but {} spacings and {} origins",
                d,
                self.dx.len(),
                self.x0.len()
            )));
        }
        if self.nt < 3 || self.nx.iter().any(|&n| n < 3) {
            return Err(Error::InvalidGrid("every axis needs at least 3 points".into()));
        }
        let spacing_ok = |h: f64| h.is_finite() && h > 0.0;
        if !spacing_ok(self.dt) || !self.dx.iter().all(|&h| spacing_ok(h)) {
            return Err(Error::InvalidGrid("spacings must be finite and positive".into()));
        }
        if !self.t0.is_finite() || !self.x0.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid("origins must be finite".into()));
        }
        Ok(())
    }

    pub fn spatial_dims(&self) -> usize {
        self.nx.len()
    }

    /// Axes in storage order, fastest varying first: x, y, then t.
    pub fn axes(&self) -> Vec<Axis> {
        let mut axes: Vec<Axis> = (0..self.spatial_dims()).map(Axis::spatial).collect();
        axes.push(Axis::T);
        axes
    }

    /// Point counts in storage order (matches [`GridSpec::axes`]).
    pub fn shape(&self) -> Vec<usize> {
        let mut shape = self.nx.clone();
        shape.push(self.nt);
        shape
    }

    pub fn count(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx[0],
            Axis::Y => self.nx[1],
            Axis::T => self.nt,
        }
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.dx[0],
            Axis::Y => self.dx[1],
            Axis::T => self.dt,
        }
    }

    pub fn has_axis(&self, axis: Axis) -> bool {
        match axis {
            Axis::X => self.spatial_dims() >= 1,
            Axis::Y => self.spatial_dims() >= 2,
            Axis::T => true,
        }
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product of all spacings: the cell volume of the Riemann sum.
    pub fn cell_volume(&self) -> f64 {
        self.dx.iter().product::<f64>() * self.dt
    }

    /// Coordinates of the points along one axis.
    pub fn coords(&self, axis: Axis) -> Vec<f64> {
        let (origin, h) = match axis {
            Axis::X => (self.x0[0], self.dx[0]),
            Axis::Y => (self.x0[1], self.dx[1]),
            Axis::T => (self.t0, self.dt),
        };
        (0..self.count(axis)).map(|i| origin + i as f64 * h).collect()
    }
}

/// Per-variable fields sampled on a grid, stored with t slowest, then y, then x.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub grid: GridSpec,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ObservationSet {
    pub fn new(grid: GridSpec, names: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let data = ObservationSet { grid, names, values };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.values.is_empty() {
            return Err(Error::InvalidArgument("at least one variable is required".into()));
        }
        if self.names.len() != self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} variables",
                self.names.len(),
                self.values.len()
            )));
        }
        let expected = self.grid.len();
        for (name, field) in self.names.iter().zip(&self.values) {
            if field.len() != expected {
                return Err(Error::InvalidArgument(format!(
                    "variable {name} has {} values, grid needs {expected}",
                    field.len()
                )));
            }
            if field.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "variable {name} contains non-finite values"
                )));
            }
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }
}

/// Default variable names: u, v, w for PDEs and x, y, z for ODE systems.
pub fn default_names(num_vars: usize, spatial_dims: usize) -> Vec<String> {
    let pool: &[&str] = if spatial_dims == 0 {
        &["x", "y", "z"]
    } else {
        &["u", "v", "w"]
    };
    (0..num_vars)
        .map(|i| match pool.get(i) {
            Some(s) => (*s).to_string(),
            None => format!("q{i}"),
        })
        .collect()
}
