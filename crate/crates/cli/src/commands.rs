//! The four pipeline commands: fom, train, predict, evaluate.

use crate::config::{ConfigError, RunConfig};
use crate::csvout::{fmt, mu_headers, CsvWriter};
use eigenrom_core::gpr::FitConfig;
use eigenrom_core::problems::DiscreteProblem;
use eigenrom_core::rom::{self, RomModel};
use eigenrom_core::sampling::SampleDesign;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Failure classes mapped to process exit codes.
pub enum CmdError {
    /// exit 2
    Config(String),
    /// exit 3
    Numerical(String),
    /// exit 1
    Tolerance(String),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Numerical(format!("io error: {e}"))
    }
}

fn rom_error(e: rom::RomError) -> CmdError {
    match e {
        rom::RomError::SchemaMismatch { .. }
        | rom::RomError::ProvenanceMismatch(_)
        | rom::RomError::EmptyDesign
        | rom::RomError::QueryDimension { .. }
        | rom::RomError::DesignOutsideBox { .. } => CmdError::Config(e.to_string()),
        rom::RomError::Json(_) | rom::RomError::Io(_) => CmdError::Config(e.to_string()),
        other => CmdError::Numerical(other.to_string()),
    }
}

fn fit_config(cfg: &RunConfig) -> FitConfig {
    FitConfig {
        starts: cfg.gpr.starts,
        seed: cfg.gpr.seed,
        ..FitConfig::default()
    }
}

fn vertex_coordinates(problem: &DiscreteProblem) -> Vec<Vec<f64>> {
    problem
        .mesh
        .dof_to_vertex()
        .iter()
        .map(|&v| problem.mesh.vertices[v].clone())
        .collect()
}

fn write_eigenvector_csv(
    path: &Path,
    coords: &[Vec<f64>],
    values: &[f64],
) -> std::io::Result<()> {
    let dim = coords.first().map_or(1, Vec::len);
    let mut header: Vec<&str> = if dim == 1 {
        vec!["x"]
    } else {
        vec!["x", "y"]
    };
    header.push("value");
    let mut w = CsvWriter::create(path, &header)?;
    for (c, v) in coords.iter().zip(values) {
        let mut row: Vec<String> = c.iter().map(|x| fmt(*x)).collect();
        row.push(fmt(*v));
        w.row(&row)?;
    }
    w.finish()
}

/// Solve the full-order model over the test design and write eigenvalue
/// (and optionally eigenvector) CSVs.
pub fn cmd_fom(cfg: &RunConfig) -> Result<(), CmdError> {
    let problem = cfg.discretize()?;
    let test = match &cfg.test {
        Some(spec) => crate::config::build_design(spec, &problem.spec)?,
        None => SampleDesign {
            points: Vec::new(),
            kind: eigenrom_core::sampling::DesignKind::UniformGrid,
            seed: None,
        },
    };
    let n_modes = cfg.rom_mode().n_modes();
    let out = cfg.out_dir();
    let dim = problem.spec.dim();
    let mut headers: Vec<String> = mu_headers(dim);
    headers.push("k".to_string());
    headers.push("lambda".to_string());
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(&out.join("fom_eigenvalues.csv"), &header_refs)?;
    let coords = vertex_coordinates(&problem);
    for (i, mu) in test.points.iter().enumerate() {
        let pairs = problem
            .solve_fom(mu, n_modes)
            .map_err(|e| CmdError::Numerical(format!("FOM failed at {mu:?}: {e}")))?;
        for pair in &pairs {
            let mut row: Vec<String> = mu.iter().map(|v| fmt(*v)).collect();
            row.push(pair.index.to_string());
            row.push(fmt(pair.value));
            w.row(&row)?;
        }
        if cfg.write_eigenvectors {
            for pair in &pairs {
                let path = out.join(format!("fom_eigenvector_{i}_k{}.csv", pair.index));
                write_eigenvector_csv(&path, &coords, &pair.vector)?;
            }
        }
    }
    w.finish()?;
    println!("fom: wrote {} points to {}", test.len(), out.display());
    Ok(())
}

/// Offline stage: train the reduced model and write it with a manifest.
pub fn cmd_train(cfg: &RunConfig) -> Result<(), CmdError> {
    let started = Instant::now();
    let problem = cfg.discretize()?;
    let design = cfg.build_design(&cfg.training, "training", &problem.spec)?;
    let mode = cfg.rom_mode();
    let fit = fit_config(cfg);
    let model =
        rom::offline_train(&problem, &design, mode, cfg.epsilon, &fit).map_err(rom_error)?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;
    let model_path = cfg.model_path();
    model.save(&model_path).map_err(rom_error)?;
    let manifest = serde_json::json!({
        "schema": rom::SCHEMA_VERSION,
        "problem": problem.spec.id.as_str(),
        "h": problem.h(),
        "n_dof": problem.n_dof(),
        "epsilon": cfg.epsilon,
        "mode": model.mode,
        "design": { "kind": design.kind, "n": design.len(), "seed": design.seed },
        "gpr": { "starts": fit.starts, "seed": fit.seed },
        "n_basis": model.basis.n_basis,
        "n_regressors": model.n_regressors(),
        "model_file": model_path.display().to_string(),
        "wall_time_secs": started.elapsed().as_secs_f64(),
    });
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest is serializable"),
    )?;
    println!(
        "train: {} snapshots, POD dimension {}, {} regressors -> {}",
        design.len(),
        model.basis.n_basis,
        model.n_regressors(),
        model_path.display()
    );
    Ok(())
}

fn load_model(cfg: &RunConfig) -> Result<RomModel, CmdError> {
    RomModel::load(&cfg.model_path()).map_err(rom_error)
}

/// Online stage: predictions with bands, per-point eigenvector CSVs, and
/// the dense GPR curves for band plots.
pub fn cmd_predict(cfg: &RunConfig) -> Result<(), CmdError> {
    let model = load_model(cfg)?;
    let spec = eigenrom_core::problems::spec(model.provenance.problem);
    let test = cfg.build_design(&cfg.test, "test", &spec)?;
    let out = cfg.out_dir();
    let dim = spec.dim();

    let mut headers = mu_headers(dim);
    for name in ["k", "lambda", "lambda_lo", "lambda_hi"] {
        headers.push(name.to_string());
    }
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(&out.join("dd_eigenvalues.csv"), &header_refs)?;
    for (i, mu) in test.points.iter().enumerate() {
        let p = model.online_predict(mu).map_err(rom_error)?;
        for (slot, &k) in model.tracked_modes().iter().enumerate() {
            let ev = p.eigenvalues[slot];
            let mut row: Vec<String> = mu.iter().map(|v| fmt(*v)).collect();
            row.push(k.to_string());
            row.push(fmt(ev.mean));
            row.push(fmt(ev.lo));
            row.push(fmt(ev.hi));
            w.row(&row)?;
        }
        if cfg.write_eigenvectors {
            let problem = spec
                .discretize(model.provenance.resolution)
                .map_err(|e| CmdError::Config(e.to_string()))?;
            let coords = vertex_coordinates(&problem);
            for (slot, &k) in model.tracked_modes().iter().enumerate() {
                let path = out.join(format!("dd_eigenvector_{i}_k{k}.csv"));
                write_eigenvector_csv(&path, &coords, &p.eigenvectors[slot])?;
            }
        }
    }
    w.finish()?;

    // dense sampling of every regressor across the box plus 5% margins
    let grid = cfg.dense_grid.max(2);
    let box_ = model.parameter_box().to_vec();
    let axes: Vec<Vec<f64>> = box_
        .iter()
        .map(|b| {
            let margin = 0.05 * (b[1] - b[0]);
            let lo = b[0] - margin;
            let hi = b[1] + margin;
            (0..grid)
                .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
                .collect()
        })
        .collect();
    let mut headers = mu_headers(dim);
    for &k in &model.tracked_modes() {
        for suffix in ["mean", "lo", "hi"] {
            headers.push(format!("ev{k}_{suffix}"));
        }
    }
    for i in 0..model.basis.n_basis {
        for suffix in ["mean", "lo", "hi"] {
            headers.push(format!("coef{i}_{suffix}"));
        }
    }
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(&out.join("gpr_curves.csv"), &header_refs)?;
    let total: usize = grid.pow(dim as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut mu = Vec::with_capacity(dim);
        for axis in &axes {
            mu.push(axis[rem % grid]);
            rem /= grid;
        }
        let p = model.online_predict(&mu).map_err(rom_error)?;
        let mut row: Vec<String> = mu.iter().map(|v| fmt(*v)).collect();
        for ev in &p.eigenvalues {
            row.push(fmt(ev.mean));
            row.push(fmt(ev.lo));
            row.push(fmt(ev.hi));
        }
        for c in &p.coefficients {
            row.push(fmt(c.mean));
            row.push(fmt(c.lo));
            row.push(fmt(c.hi));
        }
        w.row(&row)?;
    }
    w.finish()?;
    println!(
        "predict: {} test points, {} curve rows -> {}",
        test.len(),
        total,
        out.display()
    );
    Ok(())
}

/// Reduced-vs-full comparison with the tolerance gate.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<(), CmdError> {
    let model = load_model(cfg)?;
    let spec = eigenrom_core::problems::spec(model.provenance.problem);
    // the FOM re-solve must use the mesh recorded in provenance; an explicit
    // mismatching mesh in the config is refused
    let requested = cfg.resolution()?;
    if requested != model.provenance.resolution {
        let problem = spec
            .discretize(requested)
            .map_err(|e| CmdError::Config(e.to_string()))?;
        if problem.n_dof() != model.provenance.n_dof {
            return Err(CmdError::Config(format!(
                "config mesh gives N_h = {}, model was trained with N_h = {}",
                problem.n_dof(),
                model.provenance.n_dof
            )));
        }
    }
    let problem = spec
        .discretize(model.provenance.resolution)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let test = cfg.build_design(&cfg.test, "test", &spec)?;
    let report = rom::evaluate(&model, &problem, &test).map_err(rom_error)?;

    let out = cfg.out_dir();
    let dim = spec.dim();
    let mut headers = mu_headers(dim);
    for name in [
        "k",
        "lambda_fem",
        "lambda_dd",
        "lambda_lo",
        "lambda_hi",
        "vec_inf_err",
        "vec_l2_rel_err",
    ] {
        headers.push(name.to_string());
    }
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(&out.join("error_report.csv"), &header_refs)?;
    for r in &report.rows {
        let mut row: Vec<String> = r.mu.iter().map(|v| fmt(*v)).collect();
        row.push(r.eigen_index.to_string());
        row.push(fmt(r.lambda_fem));
        row.push(fmt(r.lambda_dd));
        row.push(fmt(r.lambda_lo));
        row.push(fmt(r.lambda_hi));
        row.push(fmt(r.vec_inf_err));
        row.push(fmt(r.vec_l2_rel_err));
        w.row(&row)?;
    }
    w.finish()?;

    let summary = format!(
        "evaluated {} rows ({} FOM failures)\n\
         max |lambda_dd - lambda_fem| = {:.3e}\n\
         mean |lambda_dd - lambda_fem| = {:.3e}\n\
         max eigenvector sup error = {:.3e}\n\
         95% band coverage = {:.1}%\n",
        report.rows.len(),
        report.failures.len(),
        report.max_lambda_err(),
        report.mean_lambda_err(),
        report.max_vec_inf_err(),
        100.0 * report.band_coverage(),
    );
    print!("{summary}");
    std::fs::write(out.join("evaluation_summary.txt"), &summary)?;

    for (mu, message) in &report.failures {
        eprintln!("warning: FOM failed at {mu:?}: {message}");
    }

    if let Some(tol) = cfg.tolerances {
        let mut violations = Vec::new();
        if let Some(t) = tol.lambda_abs {
            if report.max_lambda_err() > t {
                violations.push(format!(
                    "max lambda error {:.3e} > {t:.3e}",
                    report.max_lambda_err()
                ));
            }
        }
        if let Some(t) = tol.lambda_rel {
            for r in &report.rows {
                let rel = (r.lambda_dd - r.lambda_fem).abs() / r.lambda_fem.abs().max(1e-300);
                if rel > t {
                    violations.push(format!(
                        "relative lambda error {rel:.3e} > {t:.3e} at {:?}",
                        r.mu
                    ));
                    break;
                }
            }
        }
        if let Some(t) = tol.vec_inf {
            if report.max_vec_inf_err() > t {
                violations.push(format!(
                    "max eigenvector sup error {:.3e} > {t:.3e}",
                    report.max_vec_inf_err()
                ));
            }
        }
        if let Some(t) = tol.coverage_min {
            if report.band_coverage() < t {
                violations.push(format!(
                    "band coverage {:.3} < {t:.3}",
                    report.band_coverage()
                ));
            }
        }
        if !violations.is_empty() {
            return Err(CmdError::Tolerance(violations.join("; ")));
        }
    }
    Ok(())
}

/// Resolve worker-count precedence: flag > config > EIGENROM_JOBS.
pub fn resolve_jobs(flag: Option<usize>, cfg: &RunConfig) -> Option<usize> {
    flag.or(cfg.jobs).or_else(|| {
        std::env::var("EIGENROM_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

pub fn apply_overrides(cfg: &mut RunConfig, out: Option<PathBuf>, seed: Option<u64>) {
    if let Some(dir) = out {
        cfg.out_dir = Some(dir);
    }
    if let Some(s) = seed {
        cfg.gpr.seed = s;
    }
}
