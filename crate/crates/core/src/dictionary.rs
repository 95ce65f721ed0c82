//! Candidate features: spatial derivatives of monomials of the dependent variables.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// One candidate term `d^alpha (prod_v u_v^beta_v)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSpec {
    /// Derivative order per spatial axis (empty for ODE systems).
    pub alpha: Vec<usize>,
    /// Exponent per dependent variable.
    pub beta: Vec<usize>,
}

impl FeatureSpec {
    pub fn new(alpha: Vec<usize>, beta: Vec<usize>) -> Self {
        FeatureSpec { alpha, beta }
    }

    pub fn constant(num_vars: usize, spatial_dims: usize) -> Self {
        FeatureSpec::new(vec![0; spatial_dims], vec![0; num_vars])
    }

    pub fn degree(&self) -> usize {
        self.beta.iter().sum()
    }

    pub fn derivative_order(&self) -> usize {
        self.alpha.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    fn monomial_label(&self, names: &[String]) -> String {
        let mut out = String::new();
        for (name, &e) in names.iter().zip(&self.beta) {
            match e {
                0 => {}
                1 => out.push_str(name),
                _ => out.push_str(&format!("{name}^{e}")),
            }
        }
        out
    }

    /// Human readable label such as `u_xx`, `(u^2)_x` or `uv^2`.
    /// With `braces` the derivative subscript is wrapped, e.g. `u_{xx}`.
    pub fn label(&self, names: &[String], braces: bool) -> String {
        if self.is_constant() {
            return "1".to_string();
        }
        let mono = self.monomial_label(names);
        if self.derivative_order() == 0 {
            return mono;
        }
        const AXES: [char; 2] = ['x', 'y'];
        let sub: String = self
            .alpha
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| std::iter::repeat_n(AXES[i], a))
            .collect();
        let base = if self.degree() == 1 { mono } else { format!("({mono})") };
        if braces && sub.len() > 1 {
            format!("{base}_{{{sub}}}")
        } else {
            format!("{base}_{sub}")
        }
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(alpha={:?}, beta={:?})", self.alpha, self.beta)
    }
}

/// How the candidate list was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationRule {
    /// Every monomial of degree `1..=beta_cap` crossed with every derivative multi-index whose
    /// components lie in `0..=cap` (cap is `alpha_cap` in 1D and `alpha_cap - 1` in 2D),
    /// plus the constant.
    PerAxis,
    /// A caller supplied list.
    Explicit,
}

impl EnumerationRule {
    pub fn tag(self) -> &'static str {
        match self {
            EnumerationRule::PerAxis => "per-axis",
            EnumerationRule::Explicit => "explicit",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "per-axis" => Ok(EnumerationRule::PerAxis),
            "explicit" => Ok(EnumerationRule::Explicit),
            other => Err(Error::InvalidArgument(format!("unknown enumeration rule '{other}'"))),
        }
    }
}

/// Ordered list of candidate features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    features: Vec<FeatureSpec>,
    pub num_vars: usize,
    pub spatial_dims: usize,
    pub alpha_cap: usize,
    pub beta_cap: usize,
    pub rule: EnumerationRule,
    index: HashMap<FeatureSpec, usize>,
}

/// Per-axis derivative cap used by the per-axis rule.
pub fn per_axis_cap(spatial_dims: usize, alpha_cap: usize) -> usize {
    match spatial_dims {
        0 => 0,
        1 => alpha_cap,
        _ => alpha_cap.saturating_sub(1),
    }
}

fn sort_key(f: &FeatureSpec) -> (usize, Vec<usize>, Vec<usize>) {
    (f.degree(), f.beta.clone(), f.alpha.clone())
}

/// All exponent vectors over `num_vars` variables with total degree exactly `degree`.
fn monomials_of_degree(num_vars: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur[pos] = e;
            rec(pos + 1, left - e, cur, out);
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0; num_vars];
    rec(0, degree, &mut cur, &mut out);
    out
}

fn derivative_indices(spatial_dims: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..spatial_dims {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=cap).map(move |a| {
                    let mut v = prefix.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}

/// Enumerates the candidate features for the given caps.
pub fn build_dictionary(
    num_vars: usize,
    spatial_dims: usize,
    alpha_cap: usize,
    beta_cap: usize,
    rule: EnumerationRule,
) -> Result<Dictionary> {
    if spatial_dims > 2 {
        return Err(Error::UnsupportedDimension(spatial_dims));
    }
    if num_vars == 0 {
        return Err(Error::InvalidArgument("num_vars must be at least 1".into()));
    }
    if rule == EnumerationRule::Explicit {
        return Err(Error::InvalidArgument(
            "explicit dictionaries are built with Dictionary::from_features".into(),
        ));
    }
    let cap = per_axis_cap(spatial_dims, alpha_cap);
    let alphas = derivative_indices(spatial_dims, cap);
    let mut features = vec![FeatureSpec::constant(num_vars, spatial_dims)];
    for degree in 1..=beta_cap {
        for beta in monomials_of_degree(num_vars, degree) {
            for alpha in &alphas {
                features.push(FeatureSpec::new(alpha.clone(), beta.clone()));
            }
        }
    }
    features.sort_by_key(sort_key);
    Ok(Dictionary::assemble(
        features,
        num_vars,
        spatial_dims,
        alpha_cap,
        beta_cap,
        rule,
    ))
}

impl Dictionary {
    fn assemble(
        features: Vec<FeatureSpec>,
        num_vars: usize,
        spatial_dims: usize,
        alpha_cap: usize,
        beta_cap: usize,
        rule: EnumerationRule,
    ) -> Self {
        let index = features.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        Dictionary {
            features,
            num_vars,
            spatial_dims,
            alpha_cap,
            beta_cap,
            rule,
            index,
        }
    }

    /// Builds a dictionary from an explicit list (e.g. a restricted 2D system dictionary).
    /// Features are validated, deduplicated and put in canonical order.
    pub fn from_features(mut features: Vec<FeatureSpec>, num_vars: usize, spatial_dims: usize) -> Result<Self> {
        if spatial_dims > 2 {
            return Err(Error::UnsupportedDimension(spatial_dims));
        }
        for f in &features {
            if f.alpha.len() != spatial_dims || f.beta.len() != num_vars {
                return Err(Error::InvalidArgument(format!("feature {f} has the wrong arity")));
            }
            if f.is_constant() && f.derivative_order() > 0 {
                return Err(Error::InvalidArgument(format!("feature {f} differentiates a constant")));
            }
        }
        features.sort_by_key(sort_key);
        features.dedup();
        if features.is_empty() {
            return Err(Error::InvalidArgument("empty dictionary".into()));
        }
        let alpha_cap = features.iter().flat_map(|f| f.alpha.iter().copied()).max().unwrap_or(0);
        let beta_cap = features.iter().map(FeatureSpec::degree).max().unwrap_or(0);
        Ok(Self::assemble(
            features,
            num_vars,
            spatial_dims,
            alpha_cap,
            beta_cap,
            EnumerationRule::Explicit,
        ))
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn get(&self, l: usize) -> &FeatureSpec {
        &self.features[l]
    }

    /// Stable index of `spec`.
    pub fn lookup(&self, spec: &FeatureSpec) -> Result<usize> {
        self.index
            .get(spec)
            .copied()
            .ok_or_else(|| Error::FeatureNotFound(spec.to_string()))
    }

    /// Highest derivative order appearing on spatial axis `axis`.
    pub fn max_alpha(&self, axis: usize) -> usize {
        self.features
            .iter()
            .map(|f| f.alpha.get(axis).copied().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Looks up a feature by its plain label (as produced by [`FeatureSpec::label`]).
    pub fn lookup_label(&self, label: &str, names: &[String]) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.label(names, false) == label)
            .ok_or_else(|| Error::FeatureNotFound(label.to_string()))
    }
}

/// Alias kept for callers that think in terms of the lookup operation.
pub fn feature_order_lookup(dict: &Dictionary, spec: &FeatureSpec) -> Result<usize> {
    dict.lookup(spec)
}

/// Dense coefficient vector, one slot per dictionary feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub values: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(len: usize) -> Self {
        Coefficients { values: vec![0.0; len] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Coefficients { values }
    }

    /// Builds a coefficient vector from (feature, value) pairs.
    pub fn from_terms(dict: &Dictionary, terms: &[(FeatureSpec, f64)]) -> Result<Self> {
        let mut c = Self::zeros(dict.len());
        for (spec, value) in terms {
            c.values[dict.lookup(spec)?] += value;
        }
        Ok(c)
    }

    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
