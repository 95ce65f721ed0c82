//! Acceptance criteria. Prints one `[PASS]`, `[FAIL]` or `[SKIP]` line per criterion.
//!
//! The run succeeds as long as every criterion could be evaluated; set
//! `WEAKIDENT_ACCEPTANCE_STRICT=1` to also fail on any `[FAIL]` line.
//! Criterion 6 needs a clean 2D porous-medium dataset named by `WEAKIDENT_PM_FIXTURE`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use weakident::{
    add_noise, assemble, build_dictionary, choose_m_p, contribution_scores, direct_quadrature_reference, error_report,
    load_dataset, narrow_fit, quadrature_magnitude, sample_kernel, simulate, subsample_centers, subspace_pursuit,
    system, theorem1_validation, trim_once, weak_ident, Axis, AxisKernel, Coefficients, EnumerationRule, ErrorReport,
    FeatureSpec, GridSpec, IdentResult, NoiseSpec, ObservationSet, RunConfig, SubsampleSpec, SystemDefinition,
    TestFunction,
};

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Line {
    id: &'static str,
    status: Status,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: String) -> Line {
    Line {
        id,
        status: if pass { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct Run {
    report: ErrorReport,
    result: IdentResult,
    seconds: f64,
}

fn identify(def: &SystemDefinition, clean: &ObservationSet, cfg: &RunConfig, sigma: f64) -> Run {
    let data = add_noise(
        clean,
        NoiseSpec {
            sigma_nsr: sigma,
            seed: cfg.seed,
        },
    )
    .unwrap();
    let start = Instant::now();
    let result = weak_ident(&data, &cfg.ident_config(&data).unwrap()).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let truth = def.true_coefficients(result.dictionary()).unwrap();
    let found: Vec<Coefficients> = result.coefficients().into_iter().cloned().collect();
    let report = error_report(&truth, &found, &result.system.w, &result.system.b, None).unwrap();
    Run {
        report,
        result,
        seconds,
    }
}

fn supports(run: &Run, def: &SystemDefinition) -> String {
    run.result
        .coefficients()
        .iter()
        .map(|c| {
            let labels: Vec<String> = c
                .support()
                .iter()
                .map(|&l| run.result.dictionary().get(l).label(&def.var_names, false))
                .collect();
            format!("{{{}}}", labels.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Median TPR, PPV and E2 over `seeds` noisy runs.
fn seeded_medians(name: &str, sigma: f64, seeds: u64, tweak: impl Fn(&mut RunConfig)) -> (f64, f64, f64) {
    let def = system(name).unwrap();
    let clean = simulate(&def).unwrap();
    let mut cfg = RunConfig::for_system(&def);
    tweak(&mut cfg);
    let reports: Vec<ErrorReport> = (0..seeds)
        .map(|seed| identify(&def, &clean, &RunConfig { seed, ..cfg.clone() }, sigma).report)
        .collect();
    (
        median(reports.iter().map(|r| r.tpr).collect()),
        median(reports.iter().map(|r| r.ppv).collect()),
        median(reports.iter().map(|r| r.e2).collect()),
    )
}

fn criterion_1() -> Line {
    let def = system("transport").unwrap();
    let clean = simulate(&def).unwrap();
    let run = identify(&def, &clean, &RunConfig::for_system(&def), 0.0);
    let sup = supports(&run, &def);
    let pass = sup == "{u_x, u_xx}" && run.report.e2 <= 0.005 && run.seconds <= 10.0;
    line(
        "1",
        pass,
        format!(
            "transport clean: support {sup}, E2 {:.3e} (<= 5e-3), {:.2} s (<= 10 s)",
            run.report.e2, run.seconds
        ),
    )
}

fn criterion_2() -> Line {
    let (tpr, ppv, e2) = seeded_medians("transport", 1.0, 20, |_| {});
    let pass = tpr == 1.0 && ppv == 1.0 && e2 <= 0.05;
    line(
        "2",
        pass,
        format!("transport sigma 1.0, 20 seeds: median TPR {tpr:.3}, PPV {ppv:.3}, E2 {e2:.3e} (<= 0.05)"),
    )
}

fn criterion_3() -> Line {
    let def = system("ks").unwrap();
    let clean = simulate(&def).unwrap();
    let cfg = RunConfig::for_system(&def);
    let runs: Vec<ErrorReport> = (0..10)
        .map(|seed| identify(&def, &clean, &RunConfig { seed, ..cfg.clone() }, 0.5).report)
        .collect();
    let exact = median(
        runs.iter()
            .map(|r| f64::from(u8::from(r.tpr == 1.0 && r.ppv == 1.0)))
            .collect(),
    );
    let e2 = median(runs.iter().map(|r| r.e2).collect());
    let pass = exact == 1.0 && e2 <= 0.15 && cfg.trim_threshold == 0.2;
    line(
        "3",
        pass,
        format!(
            "KS sigma 0.5, 10 seeds, trim {}: median exact support {exact:.1}, median E2 {e2:.4} (<= 0.15)",
            cfg.trim_threshold
        ),
    )
}

fn criterion_4() -> Line {
    let def = system("nls").unwrap();
    let clean = simulate(&def).unwrap();
    let run = identify(&def, &clean, &RunConfig::for_system(&def), 0.0);
    let pass = run.report.tpr == 1.0 && run.report.ppv == 1.0 && run.report.e2 <= 1e-5;
    line(
        "4",
        pass,
        format!(
            "NLS clean: support {}, E2 {:.3e} (<= 1e-5)",
            supports(&run, &def),
            run.report.e2
        ),
    )
}

fn criterion_5() -> Line {
    let (lt, lp, le) = seeded_medians("lotka_volterra", 0.1, 20, |_| {});
    let (zt, zp, ze) = seeded_medians("lorenz", 0.2, 20, |_| {});
    let pass = lt == 1.0 && lp == 1.0 && le <= 0.1 && zt == 1.0 && zp == 1.0 && ze <= 0.05;
    line(
        "5",
        pass,
        format!(
            "Lotka-Volterra sigma 0.1: median TPR {lt:.3}, PPV {lp:.3}, E2 {le:.3e} (<= 0.1); \
             Lorenz sigma 0.2: median TPR {zt:.3}, PPV {zp:.3}, E2 {ze:.3e} (<= 0.05); 20 seeds each"
        ),
    )
}

fn criterion_6() -> Line {
    let Ok(path) = std::env::var("WEAKIDENT_PM_FIXTURE") else {
        return Line {
            id: "6",
            status: Status::Skip,
            detail: "porous medium: no fixture supplied (set WEAKIDENT_PM_FIXTURE to a clean 2D dataset)".into(),
        };
    };
    let def = system("pm2d").unwrap();
    let clean = load_dataset(Path::new(&path)).unwrap();
    let run = identify(&def, &clean, &RunConfig::for_system(&def), 0.08);
    let pass = run.report.tpr == 1.0 && run.report.ppv == 1.0 && run.report.e2 <= 0.02;
    line(
        "6",
        pass,
        format!(
            "porous medium sigma 0.08: support {}, E2 {:.3e} (<= 0.02)",
            supports(&run, &def),
            run.report.e2
        ),
    )
}

fn wave_1d() -> ObservationSet {
    let (nx, nt) = (96, 80);
    let grid = GridSpec::new(vec![nx], nt, vec![0.07], 0.04).unwrap();
    let u = (0..nt)
        .flat_map(|n| {
            (0..nx)
                .map(move |i| (0.3 * i as f64 - 0.2 * n as f64).sin() + 0.4 * (0.11 * i as f64 + 0.05 * n as f64).cos())
        })
        .collect();
    ObservationSet::new(grid, vec!["u".into()], vec![u]).unwrap()
}

fn wave_2d() -> ObservationSet {
    let (nx, ny, nt) = (30, 28, 26);
    let grid = GridSpec::new(vec![nx, ny], nt, vec![0.1, 0.12], 0.05).unwrap();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for n in 0..nt {
        for j in 0..ny {
            for i in 0..nx {
                let (x, y, t) = (i as f64 * 0.1, j as f64 * 0.12, n as f64 * 0.05);
                u.push((x - t).sin() * (0.7 * y).cos() + 0.3);
                v.push((0.5 * x + y + t).cos());
            }
        }
    }
    ObservationSet::new(grid, vec!["u".into(), "v".into()], vec![u, v]).unwrap()
}

/// FFT assembly against direct quadrature, each entry's error relative to `Σ |f ∂φ| vol`.
fn assembly_error(data: &ObservationSet, alpha_cap: usize, beta_cap: usize, tf: &TestFunction) -> f64 {
    let dict = build_dictionary(
        data.num_vars(),
        data.grid.spatial_dims(),
        alpha_cap,
        beta_cap,
        EnumerationRule::PerAxis,
    )
    .unwrap();
    let targets = vec![7; data.grid.spatial_dims() + 1];
    let centers = subsample_centers(&data.grid, tf, &SubsampleSpec { targets }).unwrap();
    let sys = assemble(data, &dict, tf, &centers).unwrap();
    let mut worst: f64 = 0.0;
    for l in 0..dict.len() {
        for h in 0..centers.len() {
            let c = centers.center(h);
            let direct = direct_quadrature_reference(data, dict.get(l), tf, &c).unwrap();
            let scale = quadrature_magnitude(data, dict.get(l), tf, &c).unwrap();
            worst = worst.max((sys.w[(h, l)] - direct).abs() / scale);
        }
    }
    worst
}

fn property_a() -> (bool, String) {
    let tf1 = TestFunction::new(vec![
        AxisKernel {
            axis: Axis::X,
            m: 12,
            p: 9,
            spacing: 0.07,
        },
        AxisKernel {
            axis: Axis::T,
            m: 9,
            p: 7,
            spacing: 0.04,
        },
    ])
    .unwrap();
    let tf2 = TestFunction::new(vec![
        AxisKernel {
            axis: Axis::X,
            m: 6,
            p: 6,
            spacing: 0.1,
        },
        AxisKernel {
            axis: Axis::Y,
            m: 5,
            p: 6,
            spacing: 0.12,
        },
        AxisKernel {
            axis: Axis::T,
            m: 5,
            p: 4,
            spacing: 0.05,
        },
    ])
    .unwrap();
    let e1 = assembly_error(&wave_1d(), 6, 6, &tf1);
    let e2 = assembly_error(&wave_2d(), 4, 3, &tf2);
    let worst = e1.max(e2);
    (
        worst <= 1e-10,
        format!("(a) FFT vs direct quadrature max rel err {worst:.1e}"),
    )
}

fn property_b() -> (bool, String) {
    let (rows, cols) = (40, 10);
    let mut recovered = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = loop {
            let mut w = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
            for mut c in w.column_iter_mut() {
                let n = c.norm();
                c /= n;
            }
            let gram = w.transpose() * &w;
            let coherence = (0..cols)
                .flat_map(|i| (0..cols).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| gram[(i, j)].abs())
                .fold(0.0, f64::max);
            if coherence < 0.3 {
                break w;
            }
        };
        let mut planted: Vec<usize> = Vec::new();
        while planted.len() < 3 {
            let j = rng.random_range(0..cols);
            if !planted.contains(&j) {
                planted.push(j);
            }
        }
        planted.sort_unstable();
        let mut c = DVector::zeros(cols);
        for &j in &planted {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            c[j] = sign * rng.random_range(1.0..2.0);
        }
        let b = &w * c;
        let b = &b / b.norm();
        if subspace_pursuit(&w, &b, 3).unwrap() == planted {
            recovered += 1;
        }
    }
    (
        recovered == 100,
        format!("(b) SP planted 3-sparse recovery {recovered}/100"),
    )
}

fn property_c() -> (bool, String) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (name, sigma) in [("transport", 0.1), ("ks", 0.5), ("lotka_volterra", 0.1)] {
        let def = system(name).unwrap();
        let clean = simulate(&def).unwrap();
        let run = identify(&def, &clean, &RunConfig::for_system(&def), sigma);
        let r = &run.result;
        let (norms, _) = r.scales.normalizers();
        let threshold = def.trim_threshold;
        for (eq, b) in r.equations.iter().zip(&r.system.b) {
            for m in eq.candidates.iter().filter_map(|c| c.model()) {
                checked += 1;
                let k = m.sparsity_k;
                let mut support = m.proposed.clone();
                let mut steps = 0;
                loop {
                    let fit = narrow_fit(&r.system.w, b, &support, &r.regions, &norms).unwrap();
                    let scores = contribution_scores(&fit.column_norms, &fit.c_tilde).unwrap();
                    if steps + 1 >= k {
                        break;
                    }
                    let trimmed = trim_once(&support, &scores, threshold);
                    if trimmed.len() == support.len() {
                        break;
                    }
                    let removed = support.iter().position(|j| !trimmed.contains(j)).unwrap();
                    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
                    if scores[removed] != min || scores[removed] >= threshold {
                        bad.push(format!("{name} k={k}: removed a non-minimal score"));
                    }
                    support = trimmed;
                    steps += 1;
                }
                if steps > k.saturating_sub(1) || steps != m.trim_iterations || support != m.support {
                    bad.push(format!("{name} k={k}: {steps} steps, pipeline {}", m.trim_iterations));
                }
            }
        }
    }
    (
        bad.is_empty(),
        format!(
            "(c) trimming replayed on {checked} candidates, {} violations {:?}",
            bad.len(),
            bad
        ),
    )
}

fn property_d() -> (bool, String) {
    let data = wave_1d();
    let dict = build_dictionary(1, 1, 2, 1, EnumerationRule::PerAxis).unwrap();
    let model = Coefficients::from_terms(
        &dict,
        &[
            (FeatureSpec::new(vec![1], vec![1]), -1.0),
            (FeatureSpec::new(vec![2], vec![1]), 0.3),
        ],
    )
    .unwrap();
    let tf = TestFunction::new(vec![
        AxisKernel {
            axis: Axis::X,
            m: 8,
            p: 6,
            spacing: 0.07,
        },
        AxisKernel {
            axis: Axis::T,
            m: 6,
            p: 5,
            spacing: 0.04,
        },
    ])
    .unwrap();
    let centers = vec![vec![12, 10], vec![40, 33], vec![70, 60]];
    let est = theorem1_validation(&data, &dict, &model, 0, &tf, &centers, 0.05, 10_000, 11).unwrap();
    let ratios: Vec<f64> = est.ratios().into_iter().map(|r| r.unwrap_or(f64::NAN)).collect();
    let pass = ratios.iter().all(|r| (0.8..=1.2).contains(r));
    (
        pass,
        format!("(d) noise variance ratios {ratios:.3?} in [0.8, 1.2] at 1e4 trials"),
    )
}

fn property_e() -> (bool, String) {
    let r = EnumerationRule::PerAxis;
    let counts = [
        build_dictionary(1, 1, 6, 6, r).unwrap().len(),
        build_dictionary(2, 1, 6, 6, r).unwrap().len(),
        build_dictionary(2, 0, 0, 5, r).unwrap().len(),
        build_dictionary(1, 2, 4, 4, r).unwrap().len(),
    ];
    (
        counts == [43, 190, 21, 65],
        format!("(e) dictionary sizes {counts:?} (expect [43, 190, 21, 65])"),
    )
}

fn property_f() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for (m, p) in [(5usize, 3usize), (8, 6), (17, 10), (25, 14), (40, 20)] {
        let h = 0.05;
        for d in 0..p {
            let k = sample_kernel(m, p, h, d).unwrap();
            let scale = k.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            worst = worst.max(k[0].abs() / scale).max(k[2 * m].abs() / scale);
        }
    }
    (
        worst <= 1e-15,
        format!("(f) boundary derivative values, max relative {worst:.1e}"),
    )
}

fn property_g() -> (bool, String) {
    let c = choose_m_p(24, 256, 32.0 * std::f64::consts::PI / 256.0, 6, 2.0, 1e-10).unwrap();
    (
        (c.m, c.p) == (17, 10),
        format!("(g) KS anchor (m, p) = ({}, {}) at k* = 24", c.m, c.p),
    )
}

fn criterion_7() -> Line {
    let parts = [
        property_a(),
        property_b(),
        property_c(),
        property_d(),
        property_e(),
        property_f(),
        property_g(),
    ];
    let pass = parts.iter().all(|(p, _)| *p);
    let detail = parts
        .iter()
        .map(|(p, d)| format!("{d} {}", if *p { "ok" } else { "FAILED" }))
        .collect::<Vec<_>>()
        .join("; ");
    line("7", pass, format!("property suite: {detail}"))
}

fn criterion_8() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [40, 50, 60] {
        let (tpr, ppv, e2) = seeded_medians("transport", 0.1, 10, |c| {
            c.subsample_space = n;
            c.subsample_time = n;
        });
        pass &= tpr == 1.0 && ppv == 1.0;
        parts.push(format!("N={n}: median TPR {tpr:.3}, PPV {ppv:.3}, E2 {e2:.3e}"));
    }
    line(
        "8",
        pass,
        format!("transport sigma 0.1, 10 seeds: {}", parts.join("; ")),
    )
}

fn criterion_9() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bin = env!("CARGO_BIN_EXE_weakident");
    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .current_dir(d)
            .output()
            .unwrap()
            .status
            .success()
    };
    let ok = run(&["generate", "ks", "--out", "data", "--sigma", "0.3", "--seed", "2"])
        && run(&["identify", "--data", "data/ks", "--seed", "9", "--out", "a"])
        && run(&["identify", "--data", "data/ks", "--seed", "9", "--out", "b"]);
    let same = ok && std::fs::read(d.join("a/result.json")).unwrap() == std::fs::read(d.join("b/result.json")).unwrap();
    line(
        "9",
        same,
        format!("two identify runs on noisy KS data: byte-identical result.json {same}"),
    )
}

fn main() {
    let start = Instant::now();
    let criteria: [(&str, fn() -> Line); 9] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
        ("9", criterion_9),
    ];
    let mut lines = Vec::new();
    for (_, check) in criteria {
        let l = check();
        let tag = match l.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        println!("[{tag}] criterion {}: {}", l.id, l.detail);
        lines.push(l);
    }
    let count = |s: Status| lines.iter().filter(|l| l.status == s).count();
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "acceptance: {} passed, {} failed, {} skipped in {elapsed:.1} s (budget 900 s)",
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Skip)
    );
    let strict = std::env::var("WEAKIDENT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if elapsed > 900.0 || (strict && count(Status::Fail) > 0) {
        std::process::exit(1);
    }
}
