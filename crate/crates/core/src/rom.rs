//! Offline/online reduced-order pipeline.
//!
//! Offline: solve the full-order problem at every design point, align
//! snapshot signs, build the POD basis (stacked across eigenvectors in
//! simultaneous mode), project to reduced coordinates, and train one GPR
//! per eigenvalue plus one per reduced coefficient. Online: evaluate the
//! regressors at a new parameter, assemble the reduced vector, and lift it
//! back through the basis.

use crate::eigen::Eigenpair;
use crate::exec;
use crate::gpr::{self, FitConfig, GprModel, GprModelData};
use crate::linalg::{norm2, Mat};
use crate::pod::{
    align_signs, alignment_chain, compute_pod, orthonormality_defect, project, stack_snapshots,
    PodBasis, PodError, SnapshotSet,
};
use crate::problems::{DiscreteProblem, MeshResolution, ProblemError, ProblemId};
use crate::sampling::SampleDesign;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "eigenrom/1";

#[derive(Debug, Error)]
pub enum RomError {
    #[error("training design is empty")]
    EmptyDesign,
    #[error("design point {index} {point:?} lies outside the parameter box")]
    DesignOutsideBox { index: usize, point: Vec<f64> },
    #[error("full-order solve failed at {point:?}: {source}")]
    FomFailure {
        point: Vec<f64>,
        source: ProblemError,
    },
    #[error("GPR fit failed for {target}: {source}")]
    FitFailure {
        target: String,
        source: gpr::GprError,
    },
    #[error(transparent)]
    Pod(#[from] PodError),
    #[error(transparent)]
    Gpr(#[from] gpr::GprError),
    #[error("model schema is '{found}', expected '{expected}'")]
    SchemaMismatch { found: String, expected: String },
    #[error("model/problem provenance mismatch: {0}")]
    ProvenanceMismatch(String),
    #[error("query has dimension {got}, model expects {want}")]
    QueryDimension { want: usize, got: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RomMode {
    Single { eigen_index: usize },
    Simultaneous { n_eigen: usize },
}

impl RomMode {
    /// How many eigenpairs each full-order solve must deliver.
    pub fn n_modes(&self) -> usize {
        match self {
            RomMode::Single { eigen_index } => eigen_index + 1,
            RomMode::Simultaneous { n_eigen } => *n_eigen,
        }
    }

    /// How many eigenvalue regressors the model carries.
    pub fn n_eigenvalue_models(&self) -> usize {
        match self {
            RomMode::Single { .. } => 1,
            RomMode::Simultaneous { n_eigen } => *n_eigen,
        }
    }
}

/// Everything a reproduction run needs to be replayed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub problem: ProblemId,
    pub resolution: MeshResolution,
    pub h: f64,
    pub n_dof: usize,
    pub epsilon: f64,
    pub fit_config: FitConfig,
}

/// Serializable trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RomModelData {
    pub schema: String,
    pub provenance: Provenance,
    pub mode: RomMode,
    pub basis: PodBasis,
    pub eigenvalue_models: Vec<GprModelData>,
    pub coefficient_models: Vec<GprModelData>,
    pub design: SampleDesign,
}

/// Trained model with live regressors.
pub struct RomModel {
    pub provenance: Provenance,
    pub mode: RomMode,
    pub basis: PodBasis,
    pub design: SampleDesign,
    eigenvalue_models: Vec<GprModel>,
    coefficient_models: Vec<GprModel>,
}

/// A regressor output with its 95% band.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandedValue {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub latent_sd: f64,
    pub predictive_sd: f64,
}

fn banded(p: gpr::Posterior) -> BandedValue {
    let (lo, hi) = p.band_95();
    BandedValue {
        mean: p.mean,
        lo,
        hi,
        latent_sd: p.latent_variance.sqrt(),
        predictive_sd: p.predictive_variance.sqrt(),
    }
}

/// Online output at one parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub mu: Vec<f64>,
    /// Set when μ falls outside the training parameter box.
    pub out_of_box: bool,
    /// One entry in single mode, n_e in simultaneous mode.
    pub eigenvalues: Vec<BandedValue>,
    /// Reduced coefficients û_N with their bands.
    pub coefficients: Vec<BandedValue>,
    /// Reconstructed eigenvectors V·û_N, one block per predicted eigenpair.
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Solve the full-order model at every design point, in design order.
/// Linear problems fan out in parallel; the nonlinear problem walks the
/// parameter chain sequentially, seeding each Newton solve with its
/// predecessor.
pub fn solve_design(
    problem: &DiscreteProblem,
    design: &SampleDesign,
    n_modes: usize,
) -> Result<Vec<Vec<Eigenpair>>, RomError> {
    if design.is_empty() {
        return Err(RomError::EmptyDesign);
    }
    if problem.is_nonlinear() {
        let chain = alignment_chain(&design.points);
        let mut results: Vec<Option<Vec<Eigenpair>>> = vec![None; design.len()];
        let mut previous: Option<Eigenpair> = None;
        for &idx in &chain {
            let mu = &design.points[idx];
            let pair = crate::newton::solve_nonlinear(
                mu[0],
                problem,
                previous.as_ref(),
                crate::newton::DEFAULT_TOL,
                crate::newton::DEFAULT_MAX_ITER,
            )
            .map_err(|e| RomError::FomFailure {
                point: mu.clone(),
                source: ProblemError::Newton(e),
            })?;
            previous = Some(pair.clone());
            results[idx] = Some(vec![pair]);
        }
        Ok(results.into_iter().map(|r| r.expect("chain covers all")).collect())
    } else {
        let solved = exec::map_collect(&design.points, |mu| {
            problem.solve_fom(mu, n_modes).map_err(|e| (mu.clone(), e))
        });
        let mut out = Vec::with_capacity(design.len());
        for r in solved {
            match r {
                Ok(pairs) => out.push(pairs),
                Err((point, source)) => return Err(RomError::FomFailure { point, source }),
            }
        }
        Ok(out)
    }
}

/// Train the reduced model.
pub fn offline_train(
    problem: &DiscreteProblem,
    design: &SampleDesign,
    mode: RomMode,
    epsilon: f64,
    fit_config: &FitConfig,
) -> Result<RomModel, RomError> {
    let spec = &problem.spec;
    for (index, point) in design.points.iter().enumerate() {
        if !spec.contains(point) {
            return Err(RomError::DesignOutsideBox {
                index,
                point: point.clone(),
            });
        }
    }
    let n_modes = mode.n_modes();
    let solutions = solve_design(problem, design, n_modes)?;

    // per-eigenindex snapshot sets in design order
    let per_mode_sets: Vec<SnapshotSet> = (0..n_modes)
        .map(|k| {
            let cols: Vec<Vec<f64>> = solutions.iter().map(|s| s[k].vector.clone()).collect();
            SnapshotSet::new(Mat::from_columns(&cols), design.points.clone())
        })
        .collect();

    let (basis, reduced) = match mode {
        RomMode::Single { eigen_index } => {
            let aligned = align_signs(&per_mode_sets[eigen_index]);
            let basis = compute_pod(&aligned, epsilon)?;
            let reduced = project(&basis, &aligned.matrix)?;
            (basis, reduced)
        }
        RomMode::Simultaneous { .. } => {
            let stacked = stack_snapshots(&per_mode_sets)?;
            let basis = compute_pod(&stacked, epsilon)?;
            let reduced = project(&basis, &stacked.matrix)?;
            (basis, reduced)
        }
    };

    // training targets: eigenvalues per tracked mode, then coefficient rows
    let eigen_targets: Vec<(String, Vec<f64>)> = match mode {
        RomMode::Single { eigen_index } => vec![(
            format!("eigenvalue {eigen_index}"),
            solutions.iter().map(|s| s[eigen_index].value).collect(),
        )],
        RomMode::Simultaneous { n_eigen } => (0..n_eigen)
            .map(|k| {
                (
                    format!("eigenvalue {k}"),
                    solutions.iter().map(|s| s[k].value).collect(),
                )
            })
            .collect(),
    };
    let coeff_targets: Vec<(String, Vec<f64>)> = (0..basis.n_basis)
        .map(|i| {
            (
                format!("coefficient {i}"),
                (0..design.len()).map(|j| reduced[(i, j)]).collect(),
            )
        })
        .collect();

    let all_targets: Vec<(String, Vec<f64>)> =
        eigen_targets.into_iter().chain(coeff_targets).collect();
    let fits = exec::map_collect(&all_targets, |(name, targets)| {
        gpr::fit(&design.points, targets, &spec.parameter_box, fit_config).map_err(|source| {
            RomError::FitFailure {
                target: name.clone(),
                source,
            }
        })
    });
    let mut models = Vec::with_capacity(fits.len());
    for f in fits {
        models.push(f?);
    }
    let coefficient_models = models.split_off(mode.n_eigenvalue_models());
    let eigenvalue_models = models;

    Ok(RomModel {
        provenance: Provenance {
            problem: spec.id,
            resolution: problem.resolution,
            h: problem.h(),
            n_dof: problem.n_dof(),
            epsilon,
            fit_config: *fit_config,
        },
        mode,
        basis,
        design: design.clone(),
        eigenvalue_models,
        coefficient_models,
    })
}

impl RomModel {
    /// n_e + N in simultaneous mode, 1 + N in single mode.
    pub fn n_regressors(&self) -> usize {
        self.eigenvalue_models.len() + self.coefficient_models.len()
    }

    pub fn parameter_box(&self) -> &[[f64; 2]] {
        &self.eigenvalue_models[0].data().transforms.input_box
    }

    pub fn dim(&self) -> usize {
        self.parameter_box().len()
    }

    /// Height of one reconstructed eigenvector block.
    pub fn block_height(&self) -> usize {
        self.basis.matrix().nrows() / self.mode.n_eigenvalue_models().max(1)
    }

    /// Evaluate every regressor at μ and lift the coefficients.
    pub fn online_predict(&self, mu: &[f64]) -> Result<Prediction, RomError> {
        if mu.len() != self.dim() {
            return Err(RomError::QueryDimension {
                want: self.dim(),
                got: mu.len(),
            });
        }
        let out_of_box = mu
            .iter()
            .zip(self.parameter_box())
            .any(|(v, b)| *v < b[0] || *v > b[1]);
        let eigenvalues: Vec<BandedValue> = self
            .eigenvalue_models
            .iter()
            .map(|m| m.predict(mu).map(banded))
            .collect::<Result<_, _>>()?;
        let coefficients: Vec<BandedValue> = self
            .coefficient_models
            .iter()
            .map(|m| m.predict(mu).map(banded))
            .collect::<Result<_, _>>()?;
        let reduced: Vec<f64> = coefficients.iter().map(|c| c.mean).collect();
        let lifted = self.basis.matrix().matvec(&reduced);
        let block = self.block_height();
        let eigenvectors: Vec<Vec<f64>> = (0..self.mode.n_eigenvalue_models())
            .map(|b| lifted[b * block..(b + 1) * block].to_vec())
            .collect();
        Ok(Prediction {
            mu: mu.to_vec(),
            out_of_box,
            eigenvalues,
            coefficients,
            eigenvectors,
        })
    }

    /// Tracked eigenpair indices: `[k]` in single mode, `[0..n_e)` simultaneous.
    pub fn tracked_modes(&self) -> Vec<usize> {
        match self.mode {
            RomMode::Single { eigen_index } => vec![eigen_index],
            RomMode::Simultaneous { n_eigen } => (0..n_eigen).collect(),
        }
    }

    pub fn to_data(&self) -> RomModelData {
        RomModelData {
            schema: SCHEMA_VERSION.to_string(),
            provenance: self.provenance.clone(),
            mode: self.mode,
            basis: self.basis.clone(),
            eigenvalue_models: self
                .eigenvalue_models
                .iter()
                .map(|m| m.data().clone())
                .collect(),
            coefficient_models: self
                .coefficient_models
                .iter()
                .map(|m| m.data().clone())
                .collect(),
            design: self.design.clone(),
        }
    }

    /// Rebuild from serialized data, re-verifying the schema, each GPR's
    /// stored likelihood, and the basis invariants.
    pub fn from_data(data: RomModelData) -> Result<Self, RomError> {
        if data.schema != SCHEMA_VERSION {
            return Err(RomError::SchemaMismatch {
                found: data.schema,
                expected: SCHEMA_VERSION.to_string(),
            });
        }
        if data.coefficient_models.len() != data.basis.n_basis {
            return Err(RomError::ProvenanceMismatch(format!(
                "{} coefficient models for a basis of dimension {}",
                data.coefficient_models.len(),
                data.basis.n_basis
            )));
        }
        if data.eigenvalue_models.len() != data.mode.n_eigenvalue_models() {
            return Err(RomError::ProvenanceMismatch(format!(
                "{} eigenvalue models for mode {:?}",
                data.eigenvalue_models.len(),
                data.mode
            )));
        }
        let defect = orthonormality_defect(&data.basis);
        if defect > 1e-10 {
            return Err(RomError::ProvenanceMismatch(format!(
                "basis orthonormality defect {defect:e}"
            )));
        }
        let eigenvalue_models = data
            .eigenvalue_models
            .into_iter()
            .map(GprModel::from_data)
            .collect::<Result<Vec<_>, _>>()?;
        let coefficient_models = data
            .coefficient_models
            .into_iter()
            .map(GprModel::from_data)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RomModel {
            provenance: data.provenance,
            mode: data.mode,
            basis: data.basis,
            design: data.design,
            eigenvalue_models,
            coefficient_models,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), RomError> {
        let json = serde_json::to_string_pretty(&self.to_data())?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, RomError> {
        let json = std::fs::read_to_string(path)?;
        let data: RomModelData = serde_json::from_str(&json)?;
        Self::from_data(data)
    }

    /// The provenance check `evaluate` performs before re-solving the FOM.
    pub fn check_problem(&self, problem: &DiscreteProblem) -> Result<(), RomError> {
        if problem.spec.id != self.provenance.problem {
            return Err(RomError::ProvenanceMismatch(format!(
                "model was trained on {}, problem is {}",
                self.provenance.problem.as_str(),
                problem.spec.id.as_str()
            )));
        }
        if problem.n_dof() != self.provenance.n_dof {
            return Err(RomError::ProvenanceMismatch(format!(
                "model was trained with N_h = {}, problem has {}",
                self.provenance.n_dof,
                problem.n_dof()
            )));
        }
        Ok(())
    }
}

/// One test-point/eigen-index entry of an error report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRow {
    pub mu: Vec<f64>,
    pub eigen_index: usize,
    pub lambda_fem: f64,
    pub lambda_dd: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub vec_inf_err: f64,
    pub vec_l2_rel_err: f64,
    pub band_covered: bool,
}

/// Aggregated reduced-vs-full comparison over a test design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    /// Test points whose full-order solve failed, with the error text.
    pub failures: Vec<(Vec<f64>, String)>,
}

impl ErrorReport {
    pub fn max_lambda_err(&self) -> f64 {
        self.rows
            .iter()
            .fold(0.0_f64, |m, r| m.max((r.lambda_dd - r.lambda_fem).abs()))
    }

    pub fn mean_lambda_err(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows
            .iter()
            .map(|r| (r.lambda_dd - r.lambda_fem).abs())
            .sum::<f64>()
            / self.rows.len() as f64
    }

    pub fn max_vec_inf_err(&self) -> f64 {
        self.rows.iter().fold(0.0_f64, |m, r| m.max(r.vec_inf_err))
    }

    /// Fraction of rows whose 95% band contains the full-order eigenvalue.
    pub fn band_coverage(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.rows.iter().filter(|r| r.band_covered).count() as f64 / self.rows.len() as f64
    }
}

/// Compare reduced predictions against fresh full-order solves on the same
/// mesh the model was trained with.
pub fn evaluate(
    model: &RomModel,
    problem: &DiscreteProblem,
    test: &SampleDesign,
) -> Result<ErrorReport, RomError> {
    model.check_problem(problem)?;
    let modes = model.tracked_modes();
    let n_modes = model.mode.n_modes();
    let solved = exec::map_collect(&test.points, |mu| {
        problem.solve_fom(mu, n_modes).map_err(|e| e.to_string())
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (mu, fom) in test.points.iter().zip(solved) {
        let fom = match fom {
            Ok(pairs) => pairs,
            Err(message) => {
                failures.push((mu.clone(), message));
                continue;
            }
        };
        let prediction = model.online_predict(mu)?;
        for (slot, &k) in modes.iter().enumerate() {
            let fem = &fom[k];
            let dd_value = prediction.eigenvalues[slot];
            let dd_vec = &prediction.eigenvectors[slot];
            let (inf_err, l2_rel) = vector_errors(dd_vec, &fem.vector);
            rows.push(ErrorRow {
                mu: mu.clone(),
                eigen_index: k,
                lambda_fem: fem.value,
                lambda_dd: dd_value.mean,
                lambda_lo: dd_value.lo,
                lambda_hi: dd_value.hi,
                vec_inf_err: inf_err,
                vec_l2_rel_err: l2_rel,
                band_covered: dd_value.lo <= fem.value && fem.value <= dd_value.hi,
            });
        }
    }
    Ok(ErrorReport { rows, failures })
}

/// (min over sign of ‖a ∓ b‖_∞, matching relative ℓ² error).
pub fn vector_errors(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut inf_plus = 0.0_f64;
    let mut inf_minus = 0.0_f64;
    let mut l2_plus = 0.0_f64;
    let mut l2_minus = 0.0_f64;
    for (x, y) in a.iter().zip(b) {
        inf_plus = inf_plus.max((x - y).abs());
        inf_minus = inf_minus.max((x + y).abs());
        l2_plus += (x - y) * (x - y);
        l2_minus += (x + y) * (x + y);
    }
    let nb = norm2(b).max(1e-300);
    if l2_plus <= l2_minus {
        (inf_plus, l2_plus.sqrt() / nb)
    } else {
        (inf_minus, l2_minus.sqrt() / nb)
    }
}
