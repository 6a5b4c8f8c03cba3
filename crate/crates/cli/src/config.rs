//! Run configuration: a single JSON file, with scalar overrides from the
//! command line (flags > file > defaults).

use eigenrom_core::problems::{spec, DiscreteProblem, MeshResolution, ProblemId, ProblemSpec};
use eigenrom_core::rom::RomMode;
use eigenrom_core::sampling::{
    latin_hypercube, random_uniform, uniform_grid, DesignKind, SampleDesign,
};
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse(e) => write!(f, "cannot parse config: {e}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ModeSpec {
    Single { eigen_index: usize },
    Simultaneous { n_eigen: usize },
}

impl Default for ModeSpec {
    fn default() -> Self {
        ModeSpec::Single { eigen_index: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub kind: String,
    #[serde(default)]
    pub counts: Option<Vec<usize>>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Explicit points, for `kind = "explicit"`.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Optional per-dimension bounds overriding the problem's parameter box
    /// (test designs may probe outside it).
    #[serde(default)]
    pub bounds: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GprSpec {
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_starts() -> usize {
    8
}

fn default_seed() -> u64 {
    42
}

impl Default for GprSpec {
    fn default() -> Self {
        GprSpec {
            starts: default_starts(),
            seed: default_seed(),
        }
    }
}

/// Tolerances the `evaluate` command gates on (exit code 1 on violation).
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub lambda_abs: Option<f64>,
    #[serde(default)]
    pub lambda_rel: Option<f64>,
    #[serde(default)]
    pub vec_inf: Option<f64>,
    #[serde(default)]
    pub coverage_min: Option<f64>,
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_dense_grid() -> usize {
    201
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub training: Option<DesignSpec>,
    #[serde(default)]
    pub test: Option<DesignSpec>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub gpr: GprSpec,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Model path for predict/evaluate; relative paths resolve against
    /// out_dir. Defaults to rom_model.json.
    #[serde(default)]
    pub model_file: Option<PathBuf>,
    /// Also write per-point eigenvector field CSVs.
    #[serde(default)]
    pub write_eigenvectors: bool,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    /// Points per dimension for gpr_curves.csv (rows = grid^d).
    #[serde(default = "default_dense_grid")]
    pub dense_grid: usize,
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        serde_json::from_str(&text).map_err(ConfigError::Parse)
    }

    pub fn problem_id(&self) -> Result<ProblemId, ConfigError> {
        ProblemId::parse(&self.problem).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        Ok(spec(self.problem_id()?))
    }

    pub fn resolution(&self) -> Result<MeshResolution, ConfigError> {
        match (self.mesh.h, self.mesh.n) {
            (Some(h), None) => {
                if h <= 0.0 {
                    return Err(ConfigError::Invalid(format!("mesh.h must be > 0, got {h}")));
                }
                Ok(MeshResolution::MaxH(h))
            }
            (None, Some(n)) => Ok(MeshResolution::Cells(n)),
            _ => Err(ConfigError::Invalid(
                "mesh needs exactly one of 'h' or 'n'".to_string(),
            )),
        }
    }

    pub fn discretize(&self) -> Result<DiscreteProblem, ConfigError> {
        self.problem_spec()?
            .discretize(self.resolution()?)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn rom_mode(&self) -> RomMode {
        match self.mode {
            ModeSpec::Single { eigen_index } => RomMode::Single { eigen_index },
            ModeSpec::Simultaneous { n_eigen } => RomMode::Simultaneous { n_eigen },
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn model_path(&self) -> PathBuf {
        let file = self
            .model_file
            .clone()
            .unwrap_or_else(|| PathBuf::from("rom_model.json"));
        if file.is_absolute() {
            file
        } else {
            self.out_dir().join(file)
        }
    }

    pub fn build_design(
        &self,
        which: &Option<DesignSpec>,
        name: &str,
        problem: &ProblemSpec,
    ) -> Result<SampleDesign, ConfigError> {
        let spec = which
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid(format!("missing '{name}' design")))?;
        build_design(spec, problem)
    }
}

pub fn build_design(design: &DesignSpec, problem: &ProblemSpec) -> Result<SampleDesign, ConfigError> {
    let bounds: Vec<[f64; 2]> = design
        .bounds
        .clone()
        .unwrap_or_else(|| problem.parameter_box.clone());
    if bounds.len() != problem.parameter_box.len() {
        return Err(ConfigError::Invalid(format!(
            "design bounds have {} dims, problem has {}",
            bounds.len(),
            problem.parameter_box.len()
        )));
    }
    let invalid = |m: String| ConfigError::Invalid(m);
    match design.kind.as_str() {
        "uniform_grid" => {
            let counts = design
                .counts
                .clone()
                .ok_or_else(|| invalid("uniform_grid needs 'counts'".into()))?;
            uniform_grid(&bounds, &counts).map_err(|e| invalid(e.to_string()))
        }
        "latin_hypercube" => {
            let n = design
                .n
                .ok_or_else(|| invalid("latin_hypercube needs 'n'".into()))?;
            latin_hypercube(&bounds, n, design.seed.unwrap_or(0)).map_err(|e| invalid(e.to_string()))
        }
        "random" => {
            let n = design.n.ok_or_else(|| invalid("random needs 'n'".into()))?;
            random_uniform(&bounds, n, design.seed.unwrap_or(0)).map_err(|e| invalid(e.to_string()))
        }
        "explicit" => {
            let points = design
                .points
                .clone()
                .ok_or_else(|| invalid("explicit design needs 'points'".into()))?;
            for p in &points {
                if p.len() != problem.parameter_box.len() {
                    return Err(invalid(format!(
                        "explicit point {p:?} has wrong dimension"
                    )));
                }
            }
            Ok(SampleDesign {
                points,
                kind: DesignKind::UniformGrid,
                seed: design.seed,
            })
        }
        other => Err(invalid(format!("unknown design kind '{other}'"))),
    }
}
