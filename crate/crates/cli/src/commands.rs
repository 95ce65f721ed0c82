use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use weakident::{
    add_noise, dynamic_error, error_report, load_dataset, save_dataset, simulate, system, weak_ident, CandidateOutcome,
    Coefficients, Error, ErrorReport, IdentResult, NoiseSpec, ObservationSet, Result, RunConfig, SystemDefinition,
};

use crate::output::{float, to_json, SWEEP_COLUMNS};

/// Options shared by the commands that run an identification.
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sigma: f64,
}

impl RunOptions {
    fn resolve(&self, mut base: RunConfig) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            base.apply_text(&text)?;
        }
        if let Some(seed) = self.seed {
            base.seed = seed;
        }
        base.validate()?;
        Ok(base)
    }
}

pub fn generate(name: &str, out: &Path, seed: u64, sigma: f64) -> Result<PathBuf> {
    let def = system(name)?;
    let clean = simulate(&def)?;
    let data = add_noise(&clean, NoiseSpec { sigma_nsr: sigma, seed })?;
    save_dataset(&data, &out.join(def.name))
}

pub fn identify(data_path: &Path, opts: &RunOptions, out: &Path) -> Result<()> {
    let clean = load_dataset(data_path)?;
    let cfg = opts.resolve(RunConfig::defaults(clean.grid.spatial_dims()))?;
    let start = Instant::now();
    let data = add_noise(
        &clean,
        NoiseSpec {
            sigma_nsr: opts.sigma,
            seed: cfg.seed,
        },
    )?;
    let result = weak_ident(&data, &cfg.ident_config(&data)?)?;
    let doc = result_document(&data, &cfg, &result, opts.sigma, None, None);
    write_outputs(out, &doc, &data, &result, start)
}

pub fn evaluate(name: &str, data_path: Option<&Path>, opts: &RunOptions, out: &Path) -> Result<()> {
    let def = system(name)?;
    let clean = clean_data(&def, data_path)?;
    let cfg = opts.resolve(RunConfig::for_system(&def))?;
    let start = Instant::now();
    let (data, result, report) = run_known(&def, &clean, &cfg, opts.sigma)?;
    let doc = result_document(&data, &cfg, &result, opts.sigma, Some(def.name), Some(&report));
    write_outputs(out, &doc, &data, &result, start)
}

/// One row per `(sigma, seed)`; failed runs keep their row with the error kind filled in.
pub fn sweep(
    name: &str,
    data_path: Option<&Path>,
    sigmas: &[f64],
    trials: usize,
    opts: &RunOptions,
    out: &Path,
) -> Result<()> {
    let def = system(name)?;
    let clean = clean_data(&def, data_path)?;
    let cfg = opts.resolve(RunConfig::for_system(&def))?;
    let jobs: Vec<(f64, u64)> = sigmas
        .iter()
        .flat_map(|&s| (0..trials as u64).map(move |t| (s, cfg.seed + t)))
        .collect();
    let rows: Vec<String> = jobs
        .par_iter()
        .map(|&(sigma, seed)| {
            let run_cfg = RunConfig { seed, ..cfg.clone() };
            match run_known(&def, &clean, &run_cfg, sigma) {
                Ok((_, _, r)) => sweep_row(sigma, seed, Some(&r), ""),
                Err(e) => sweep_row(sigma, seed, None, e.kind()),
            }
        })
        .collect();
    let mut text = SWEEP_COLUMNS.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, text)?;
    Ok(())
}

fn sweep_row(sigma: f64, seed: u64, report: Option<&ErrorReport>, error: &str) -> String {
    let cells: Vec<String> = match report {
        Some(r) => vec![
            float(r.e2),
            float(r.e_inf),
            float(r.tpr),
            float(r.ppv),
            float(r.e_res),
            r.e_dyn.map(float).unwrap_or_default(),
        ],
        None => vec![String::new(); 6],
    };
    format!("{},{seed},{},{error}", float(sigma), cells.join(","))
}

fn clean_data(def: &SystemDefinition, data_path: Option<&Path>) -> Result<ObservationSet> {
    let data = match data_path {
        Some(path) => load_dataset(path)?,
        None => simulate(def)?,
    };
    if data.num_vars() != def.num_vars || data.grid.spatial_dims() != def.spatial_dims {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} variables on {} spatial axes; {} needs {} on {}",
            data.num_vars(),
            data.grid.spatial_dims(),
            def.name,
            def.num_vars,
            def.spatial_dims
        )));
    }
    Ok(data)
}

fn run_known(
    def: &SystemDefinition,
    clean: &ObservationSet,
    cfg: &RunConfig,
    sigma: f64,
) -> Result<(ObservationSet, IdentResult, ErrorReport)> {
    let data = add_noise(
        clean,
        NoiseSpec {
            sigma_nsr: sigma,
            seed: cfg.seed,
        },
    )?;
    let result = weak_ident(&data, &cfg.ident_config(&data)?)?;
    let dict = result.dictionary();
    let truth = def.true_coefficients(dict)?;
    let found: Vec<Coefficients> = result.coefficients().into_iter().cloned().collect();
    let e_dyn = if def.spatial_dims == 0 {
        Some(dynamic_error(clean, dict, &found)?)
    } else {
        None
    };
    let report = error_report(&truth, &found, &result.system.w, &result.system.b, e_dyn)?;
    Ok((data, result, report))
}

fn labels(result: &IdentResult, names: &[String], support: &[usize]) -> Vec<String> {
    support
        .iter()
        .map(|&l| result.dictionary().get(l).label(names, false))
        .collect()
}

/// Renders `u_t = c1 f1 + c2 f2` with full-precision coefficients.
pub fn equation_text(result: &IdentResult, names: &[String], variable: &str, c: &Coefficients) -> String {
    let terms: Vec<String> = c
        .support()
        .into_iter()
        .map(|l| {
            format!(
                "{} {}",
                float(c.values[l]),
                result.dictionary().get(l).label(names, true)
            )
        })
        .collect();
    let rhs = if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    };
    format!("{variable}_t = {rhs}")
}

fn result_document(
    data: &ObservationSet,
    cfg: &RunConfig,
    result: &IdentResult,
    sigma: f64,
    system_name: Option<&str>,
    report: Option<&ErrorReport>,
) -> Value {
    let names = &data.names;
    let equations: Vec<Value> = result
        .equations
        .iter()
        .map(|eq| {
            let c = &eq.selected.coefficients;
            let terms: Vec<Value> = c
                .support()
                .into_iter()
                .map(|l| json!({"feature": result.dictionary().get(l).label(names, false), "coefficient": c.values[l]}))
                .collect();
            let cv: Vec<Value> = eq
                .candidates
                .iter()
                .map(|cand| match cand {
                    CandidateOutcome::Model(m) => json!({
                        "k": m.sparsity_k,
                        "status": "ok",
                        "cv_error": m.cv_error,
                        "proposed": labels(result, names, &m.proposed),
                        "support": labels(result, names, &m.support),
                        "trim_iterations": m.trim_iterations,
                        "warnings": m.warnings,
                    }),
                    CandidateOutcome::Failed {
                        sparsity_k,
                        kind,
                        message,
                    } => json!({
                        "k": sparsity_k,
                        "status": "failed",
                        "error": kind,
                        "message": message,
                    }),
                })
                .collect();
            json!({
                "variable": eq.variable,
                "equation": equation_text(result, names, &eq.variable, c),
                "support": labels(result, names, &eq.selected.support),
                "terms": terms,
                "selected_k": eq.selected.sparsity_k,
                "cv_by_k": cv,
            })
        })
        .collect();
    let g = &data.grid;
    let test_function: Vec<Value> = result
        .test_function()
        .axes
        .iter()
        .map(|k| json!({"axis": k.axis.name(), "m": k.m, "p": k.p, "spacing": k.spacing}))
        .collect();
    let changepoints: Vec<Value> = result
        .changepoints
        .iter()
        .zip(g.axes())
        .map(|(cp, axis)| json!({"axis": axis.name(), "k_star": cp.k_star, "fallback": cp.fallback}))
        .collect();
    let mut doc = json!({
        "config": cfg.to_map(),
        "sigma_nsr": sigma,
        "dataset": {
            "counts": g.shape(),
            "spacings": g.dx.iter().chain(std::iter::once(&g.dt)).collect::<Vec<_>>(),
            "variables": names,
        },
        "dictionary_size": result.dictionary().len(),
        "equations": equations,
        "regions": {
            "total_rows": result.system.rows(),
            "highly_dynamic_rows": result.regions.indices.len(),
            "gamma": result.regions.gamma,
            "fallback": result.regions.fallback,
        },
        "subsample_targets": result.subsample.targets,
        "test_function": test_function,
        "changepoints": changepoints,
        "warnings": result.warnings,
    });
    if let Some(name) = system_name {
        doc["system"] = json!(name);
    }
    if let Some(r) = report {
        doc["metrics"] = json!({
            "e2": r.e2,
            "e_inf": r.e_inf,
            "tpr": r.tpr,
            "ppv": r.ppv,
            "e_res": r.e_res,
            "e_dyn": r.e_dyn,
        });
    }
    doc
}

fn diagnostics_csv(data: &ObservationSet, result: &IdentResult) -> String {
    let mut text = String::from("variable,k,status,cv_error,trim_iterations,selected,proposed,support\n");
    for eq in &result.equations {
        for cand in &eq.candidates {
            let line = match cand {
                CandidateOutcome::Model(m) => format!(
                    "{},{},ok,{},{},{},{},{}",
                    eq.variable,
                    m.sparsity_k,
                    float(m.cv_error),
                    m.trim_iterations,
                    m.sparsity_k == eq.selected.sparsity_k,
                    labels(result, &data.names, &m.proposed).join(";"),
                    labels(result, &data.names, &m.support).join(";"),
                ),
                CandidateOutcome::Failed { sparsity_k, kind, .. } => {
                    format!("{},{},{kind},,,false,,", eq.variable, sparsity_k)
                }
            };
            text.push_str(&line);
            text.push('\n');
        }
    }
    text
}

fn write_outputs(out: &Path, doc: &Value, data: &ObservationSet, result: &IdentResult, start: Instant) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("result.json"), to_json(doc))?;
    fs::write(out.join("diagnostics.csv"), diagnostics_csv(data, result))?;
    let timing = json!({"wall_seconds": start.elapsed().as_secs_f64()});
    fs::write(out.join("timing.json"), to_json(&timing))?;
    Ok(())
}
