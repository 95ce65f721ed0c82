//! The full identification pipeline from observations to per-variable equations.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dictionary::{build_dictionary, Coefficients, Dictionary, EnumerationRule, FeatureSpec};
use crate::error::{Error, Result};
use crate::grid::ObservationSet;
use crate::regions::{features_of_interest, leading_scales, select_regions, DynamicRegionSet, ScaleTable};
use crate::regression::{
    column_normalize, contribution_scores, cross_validation_error, narrow_fit, narrow_mean, subspace_pursuit,
    trim_once, RegressionConfig,
};
use crate::test_function::{size_test_function, Sizing, SizingConfig, SpectrumChangepoint, TestFunction};
use crate::weak::{assemble, subsample_centers, SubsampleSpec, WeakSystem};

/// Smallest acceptable highly dynamic row count for spatial data.
pub const MIN_DYNAMIC_ROWS: usize = 800;
pub const SUBSAMPLE_STEP: usize = 20;
pub const SUBSAMPLE_RETRIES: usize = 3;

/// Everything the pipeline needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentConfig {
    pub alpha_cap: usize,
    pub beta_cap: usize,
    pub rule: EnumerationRule,
    /// Used instead of the enumerated dictionary when set.
    pub explicit_features: Option<Vec<FeatureSpec>>,
    /// Target region count per spatial axis.
    pub subsample_space: usize,
    pub subsample_time: usize,
    /// Grow the targets until enough highly dynamic rows exist (spatial data only).
    pub adaptive_subsample: bool,
    pub sizing: SizingConfig,
    /// Skips spectral sizing and uses this test function as given.
    pub test_function: Option<TestFunction>,
    pub regression: RegressionConfig,
    pub histogram_bins: usize,
    /// Replaces the default features of interest when set.
    pub features_of_interest: Option<Vec<FeatureSpec>>,
}

impl IdentConfig {
    /// Defaults for data with `spatial_dims` spatial axes.
    pub fn defaults(spatial_dims: usize) -> Self {
        let ode = spatial_dims == 0;
        IdentConfig {
            alpha_cap: if ode { 0 } else { 6 },
            beta_cap: if ode { 5 } else { 6 },
            rule: EnumerationRule::PerAxis,
            explicit_features: None,
            subsample_space: 50,
            subsample_time: if ode { 1000 } else { 50 },
            adaptive_subsample: !ode,
            sizing: SizingConfig::default(),
            test_function: None,
            regression: RegressionConfig::default(),
            histogram_bins: if ode { 100 } else { 200 },
            features_of_interest: None,
        }
    }

    pub fn dictionary(&self, num_vars: usize, spatial_dims: usize) -> Result<Dictionary> {
        match &self.explicit_features {
            Some(features) => Dictionary::from_features(features.clone(), num_vars, spatial_dims),
            None => build_dictionary(num_vars, spatial_dims, self.alpha_cap, self.beta_cap, self.rule),
        }
    }
}

/// One sparsity level's final model.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateModel {
    pub sparsity_k: usize,
    /// Support proposed by subspace pursuit before trimming.
    pub proposed: Vec<usize>,
    pub support: Vec<usize>,
    pub coefficients: Coefficients,
    pub cv_error: f64,
    pub trim_iterations: usize,
    pub warnings: Vec<String>,
}

/// Outcome of one sparsity level; failures do not abort the others.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateOutcome {
    Model(CandidateModel),
    Failed {
        sparsity_k: usize,
        kind: &'static str,
        message: String,
    },
}

impl CandidateOutcome {
    pub fn model(&self) -> Option<&CandidateModel> {
        match self {
            CandidateOutcome::Model(m) => Some(m),
            CandidateOutcome::Failed { .. } => None,
        }
    }
}

/// Identified equation for one dependent variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableResult {
    pub variable: String,
    pub selected: CandidateModel,
    pub candidates: Vec<CandidateOutcome>,
}

#[derive(Debug, Clone)]
pub struct IdentResult {
    pub equations: Vec<VariableResult>,
    pub system: WeakSystem,
    pub scales: ScaleTable,
    pub regions: DynamicRegionSet,
    pub changepoints: Vec<SpectrumChangepoint>,
    pub subsample: SubsampleSpec,
    pub normalizer_fallback: Vec<bool>,
    pub warnings: Vec<String>,
}

impl IdentResult {
    pub fn test_function(&self) -> &TestFunction {
        &self.system.test_function
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.system.dictionary
    }

    pub fn coefficients(&self) -> Vec<&Coefficients> {
        self.equations.iter().map(|e| &e.selected.coefficients).collect()
    }
}

struct Stage {
    system: WeakSystem,
    scales: ScaleTable,
    regions: DynamicRegionSet,
    spec: SubsampleSpec,
}

fn build_stage(
    data: &ObservationSet,
    dict: &Dictionary,
    tf: &TestFunction,
    foi: &[usize],
    config: &IdentConfig,
    warnings: &mut Vec<String>,
) -> Result<Stage> {
    let grid = &data.grid;
    let spatial = grid.spatial_dims() > 0;
    let retries = if config.adaptive_subsample && spatial {
        SUBSAMPLE_RETRIES
    } else {
        0
    };
    let mut attempt = 0;
    loop {
        let bump = attempt * SUBSAMPLE_STEP;
        let spec = SubsampleSpec::new(grid, config.subsample_space + bump, config.subsample_time + bump);
        let centers = subsample_centers(grid, tf, &spec)?;
        let system = assemble(data, dict, tf, &centers)?;
        let mut scales = leading_scales(data, dict, tf, &centers)?;
        let regions = select_regions(&scales, foi, config.histogram_bins)?;
        if regions.fallback {
            warnings.push("degenerate region histogram: all rows kept".into());
        }
        if spatial && regions.indices.len() < MIN_DYNAMIC_ROWS && attempt < retries {
            attempt += 1;
            continue;
        }
        if spatial && regions.indices.len() < MIN_DYNAMIC_ROWS {
            warnings.push(format!(
                "only {} highly dynamic rows after {} subsample increases",
                regions.indices.len(),
                attempt
            ));
        }
        scales.set_regions(&regions);
        return Ok(Stage {
            system,
            scales,
            regions,
            spec,
        });
    }
}

/// Runs the whole pipeline and returns one equation per dependent variable.
pub fn weak_ident(data: &ObservationSet, config: &IdentConfig) -> Result<IdentResult> {
    data.validate()?;
    config.regression.validate()?;
    let grid = &data.grid;
    let nv = data.num_vars();
    let dict = config.dictionary(nv, grid.spatial_dims())?;
    let foi = match &config.features_of_interest {
        Some(specs) => specs.iter().map(|s| dict.lookup(s)).collect::<Result<Vec<_>>>()?,
        None => features_of_interest(nv, grid.spatial_dims(), &dict)?,
    };
    let sizing = match &config.test_function {
        Some(tf) => {
            tf.check_against(grid, &dict)?;
            Sizing {
                test_function: tf.clone(),
                changepoints: Vec::new(),
                clamped: vec![false; tf.axes.len()],
            }
        }
        None => size_test_function(data, &dict, config.sizing)?,
    };
    let mut warnings = Vec::new();
    for (k, (cp, clamped)) in sizing
        .test_function
        .axes
        .iter()
        .zip(sizing.changepoints.iter().zip(&sizing.clamped))
    {
        if cp.fallback {
            warnings.push(format!("flat spectrum on the {} axis", k.axis.name()));
        }
        if *clamped {
            warnings.push(format!("test function size clamped on the {} axis", k.axis.name()));
        }
    }
    let stage = build_stage(data, &dict, &sizing.test_function, &foi, config, &mut warnings)?;
    let (normalizers, fallback) = stage.scales.normalizers();
    let (wn, _) = column_normalize(&stage.system.w)?;
    let mut w_tilde = stage.system.w.clone();
    for (mut col, &s) in w_tilde.column_iter_mut().zip(&normalizers) {
        col /= s;
    }
    let ctx = Context {
        w: &stage.system.w,
        wn: &wn,
        w_tilde: &w_tilde,
        regions: &stage.regions,
        normalizers: &normalizers,
        config: &config.regression,
    };
    let equations = data
        .names
        .iter()
        .zip(&stage.system.b)
        .map(|(name, b)| identify_variable(&ctx, name, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(IdentResult {
        equations,
        system: stage.system,
        scales: stage.scales,
        regions: stage.regions,
        changepoints: sizing.changepoints,
        subsample: stage.spec,
        normalizer_fallback: fallback,
        warnings,
    })
}

struct Context<'a> {
    w: &'a DMatrix<f64>,
    wn: &'a DMatrix<f64>,
    w_tilde: &'a DMatrix<f64>,
    regions: &'a DynamicRegionSet,
    normalizers: &'a [f64],
    config: &'a RegressionConfig,
}

fn identify_variable(ctx: &Context<'_>, name: &str, b: &DVector<f64>) -> Result<VariableResult> {
    let norm = b.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Singular(format!("right-hand side for {name} vanishes")));
    }
    let b_unit = b / norm;
    let max_k = ctx.config.max_sparsity.min(ctx.w.ncols()).min(ctx.w.nrows());
    let candidates: Vec<CandidateOutcome> = (1..=max_k)
        .into_par_iter()
        .map(|k| match sparsity_level(ctx, b, &b_unit, k) {
            Ok(model) => CandidateOutcome::Model(model),
            Err(e) => CandidateOutcome::Failed {
                sparsity_k: k,
                kind: e.kind(),
                message: e.to_string(),
            },
        })
        .collect();
    let selected = candidates
        .iter()
        .filter_map(CandidateOutcome::model)
        .fold(None::<&CandidateModel>, |best, m| match best {
            Some(b) if b.cv_error <= m.cv_error => Some(b),
            _ => Some(m),
        })
        .cloned()
        .ok_or_else(|| Error::Singular(format!("no sparsity level produced a model for {name}")))?;
    Ok(VariableResult {
        variable: name.to_string(),
        selected,
        candidates,
    })
}

fn sparsity_level(ctx: &Context<'_>, b: &DVector<f64>, b_unit: &DVector<f64>, k: usize) -> Result<CandidateModel> {
    let proposed = subspace_pursuit(ctx.wn, b_unit, k)?;
    let mut support = proposed.clone();
    let mut trims = 0;
    let mut warnings = Vec::new();
    let fit = loop {
        let fit = narrow_fit(ctx.w, b, &support, ctx.regions, ctx.normalizers)?;
        let scores = contribution_scores(&fit.column_norms, &fit.c_tilde)?;
        if trims + 1 < k {
            let trimmed = trim_once(&support, &scores, ctx.config.trim_threshold);
            if trimmed.len() < support.len() {
                support = trimmed;
                trims += 1;
                continue;
            }
        }
        break fit;
    };
    if fit.b_bar_guarded {
        warnings.push("mean of b nearly cancels; using mean absolute value".into());
    }
    if fit.rank_deficient {
        warnings.push("rank-deficient narrow fit; ridge fallback used".into());
    }
    let (b_bar, _) = narrow_mean(b, &ctx.regions.indices);
    let b_tilde = b / b_bar;
    let cv = cross_validation_error(
        ctx.w_tilde,
        &b_tilde,
        &support,
        &ctx.regions.indices,
        ctx.config.cv_lambda,
        ctx.config.cv_trials,
        ctx.config.seed,
    )?;
    if cv.skipped_trials > 0 {
        warnings.push(format!("{} singular cross-validation folds skipped", cv.skipped_trials));
    }
    Ok(CandidateModel {
        sparsity_k: k,
        proposed,
        support,
        coefficients: fit.coefficients,
        cv_error: cv.error,
        trim_iterations: trims,
        warnings,
    })
}
