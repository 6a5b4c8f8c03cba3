//! The six parametric benchmark eigenproblems.
//!
//! Each problem couples a domain, a parameter box, and a rule for building
//! the matrix pair (A(μ), B(μ)) on a P1 mesh with Dirichlet elimination.
//! Three of them carry an analytic spectrum used as a test oracle.

use crate::assemble::{
    apply_dirichlet, assemble_mass, assemble_stiffness, assemble_weighted_mass, AssembleError,
    Diffusion,
};
use crate::eigen::{fix_sign, solve_generalized_banded, Eigenpair, EigenError};
use crate::linalg::SymBand;
use crate::mesh::{build_crisscross_mesh, build_interval_mesh, Mesh, MeshError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("parameter has dimension {got}, problem expects {want}")]
    ParameterDimension { want: usize, got: usize },
    #[error("unknown problem id '{0}'")]
    UnknownId(String),
    #[error("the nonlinear problem only provides its first eigenpair")]
    NonlinearHigherMode,
    #[error(transparent)]
    Newton(#[from] crate::newton::NewtonError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    Ho1d,
    Ho2d,
    Nonlinear1d,
    Nonaffine1p,
    Interface2p,
    Crossing,
}

impl ProblemId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Ho1d => "ho1d",
            ProblemId::Ho2d => "ho2d",
            ProblemId::Nonlinear1d => "nonlinear1d",
            ProblemId::Nonaffine1p => "nonaffine1p",
            ProblemId::Interface2p => "interface2p",
            ProblemId::Crossing => "crossing",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ProblemError> {
        match s {
            "ho1d" => Ok(ProblemId::Ho1d),
            "ho2d" => Ok(ProblemId::Ho2d),
            "nonlinear1d" => Ok(ProblemId::Nonlinear1d),
            "nonaffine1p" => Ok(ProblemId::Nonaffine1p),
            "interface2p" => Ok(ProblemId::Interface2p),
            "crossing" => Ok(ProblemId::Crossing),
            other => Err(ProblemError::UnknownId(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
}

/// Problem definition independent of any mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub domain: Domain,
    pub parameter_box: Vec<[f64; 2]>,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.parameter_box.len()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim()
            && mu
                .iter()
                .zip(&self.parameter_box)
                .all(|(m, b)| *m >= b[0] && *m <= b[1])
    }
}

/// −½u″ + ½μ²x²u = λu on (−10, 10), μ ∈ [1, 9]; λ_n(μ) = (n+½)μ.
pub fn ho1d_spec() -> ProblemSpec {
    ProblemSpec {
        id: ProblemId::Ho1d,
        domain: Domain::Interval { a: -10.0, b: 10.0 },
        parameter_box: vec![[1.0, 9.0]],
    }
}

/// −½Δu + ½μ²(x²+y²)u = λu on (−π/2, π/2)², μ ∈ [1, 9]; λ_{m,n} = (m+n+1)μ.
pub fn ho2d_spec() -> ProblemSpec {
    use std::f64::consts::FRAC_PI_2;
    ProblemSpec {
        id: ProblemId::Ho2d,
        domain: Domain::Rectangle {
            x0: -FRAC_PI_2,
            x1: FRAC_PI_2,
            y0: -FRAC_PI_2,
            y1: FRAC_PI_2,
        },
        parameter_box: vec![[1.0, 9.0]],
    }
}

/// −u″ + μ²|u|^{7/3}u = λu with (u,u) = 1 on (0, 1), μ ∈ [1, 9].
pub fn nonlinear1d_spec() -> ProblemSpec {
    ProblemSpec {
        id: ProblemId::Nonlinear1d,
        domain: Domain::Interval { a: 0.0, b: 1.0 },
        parameter_box: vec![[1.0, 9.0]],
    }
}

/// −Δu = λ e^{−μ(x²+y²)} u on (0, 1)², μ ∈ [1, 8].
pub fn nonaffine1p_spec() -> ProblemSpec {
    ProblemSpec {
        id: ProblemId::Nonaffine1p,
        domain: Domain::Rectangle {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        },
        parameter_box: vec![[1.0, 8.0]],
    }
}

/// −Δu = λ ε(x;μ) u on (−1, 1)² with the interface x₁ = μ₁ sin(μ₂πx₂)
/// separating ε₁ = 0.1 from ε₂ = 0.2; μ ∈ [0.1, 0.2] × [1, 8].
pub fn interface2p_spec() -> ProblemSpec {
    ProblemSpec {
        id: ProblemId::Interface2p,
        domain: Domain::Rectangle {
            x0: -1.0,
            x1: 1.0,
            y0: -1.0,
            y1: 1.0,
        },
        parameter_box: vec![[0.1, 0.2], [1.0, 8.0]],
    }
}

/// −∇·(diag(1, 1+μ)∇u) = λu on (−1, 1)², μ ∈ [−0.9, 0.9];
/// λ_{m,n}(μ) = π²/4·(m² + (1+μ)n²).
pub fn crossing_spec() -> ProblemSpec {
    ProblemSpec {
        id: ProblemId::Crossing,
        domain: Domain::Rectangle {
            x0: -1.0,
            x1: 1.0,
            y0: -1.0,
            y1: 1.0,
        },
        parameter_box: vec![[-0.9, 0.9]],
    }
}

pub fn spec(id: ProblemId) -> ProblemSpec {
    match id {
        ProblemId::Ho1d => ho1d_spec(),
        ProblemId::Ho2d => ho2d_spec(),
        ProblemId::Nonlinear1d => nonlinear1d_spec(),
        ProblemId::Nonaffine1p => nonaffine1p_spec(),
        ProblemId::Interface2p => interface2p_spec(),
        ProblemId::Crossing => crossing_spec(),
    }
}

pub const INTERFACE_EPS_INNER: f64 = 0.1;
pub const INTERFACE_EPS_OUTER: f64 = 0.2;

/// Regularized interface weight: linear ramp between ε₁ and ε₂ over the
/// signed distance d = x₁ − μ₁ sin(μ₂πx₂), half-width `delta`.
pub fn interface_weight(x: &[f64], mu: &[f64], delta: f64) -> f64 {
    let d = x[0] - mu[0] * (mu[1] * std::f64::consts::PI * x[1]).sin();
    let t = ((d + delta) / (2.0 * delta)).clamp(0.0, 1.0);
    INTERFACE_EPS_INNER + (INTERFACE_EPS_OUTER - INTERFACE_EPS_INNER) * t
}

/// The nonlinear term g(w) = |w|^{7/3} w and its derivative.
pub fn g_nonlinear(w: f64) -> f64 {
    w.abs().powf(7.0 / 3.0) * w
}

pub fn g_prime_nonlinear(w: f64) -> f64 {
    (10.0 / 3.0) * w.abs().powf(7.0 / 3.0)
}

/// Mesh resolution request: a target mesh size or a cell count per side.
///
/// `MaxH(h)` targets mean edge length h. On intervals every edge has length
/// h exactly; on the criss-cross rectangle layout the mean edge of a cell
/// with side s is (1+1/√2)/2·s, so the cell count per side becomes
/// round(0.8536·L/h). That convention reproduces the reference eigenvalue
/// tables across all three 2D benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshResolution {
    MaxH(f64),
    Cells(usize),
}

/// Mean-edge factor of the criss-cross layout: (1 + 1/√2)/2.
const CRISSCROSS_MEAN_EDGE: f64 = 0.8535533905932737;

/// Interior-restricted matrix pair at a fixed parameter.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub a_matrix: SymBand,
    pub b_matrix: SymBand,
    pub parameter: Vec<f64>,
}

enum DiscreteKind {
    /// A(μ) = A₁ + μ²·A₂ (harmonic oscillators).
    AffineQuadratic {
        a1: SymBand,
        a2: SymBand,
        b: SymBand,
    },
    /// Linear part A₁ with mass B; μ enters through the Newton iteration.
    Nonlinear { a1: SymBand, b: SymBand },
    /// Fixed stiffness, parameter-dependent weighted mass.
    WeightedMass { a: SymBand, delta: Option<f64> },
    /// A(μ) = Ax + (1+μ)·Ay with mass B.
    Anisotropic {
        ax: SymBand,
        ay: SymBand,
        b: SymBand,
    },
}

/// A problem discretized on a concrete mesh, with the parameter-independent
/// matrices assembled once.
///
/// Rectangle domains use the criss-cross triangulation; intervals are
/// uniform subdivisions.
pub struct DiscreteProblem {
    pub spec: ProblemSpec,
    pub mesh: Mesh,
    pub resolution: MeshResolution,
    /// Cells per side (2D) or total (1D).
    pub cells: usize,
    kind: DiscreteKind,
}

impl ProblemSpec {
    pub fn discretize(&self, resolution: MeshResolution) -> Result<DiscreteProblem, ProblemError> {
        let (mesh, cells) = match self.domain {
            Domain::Interval { a, b } => {
                let h = match resolution {
                    MeshResolution::MaxH(h) => h,
                    MeshResolution::Cells(n) => (b - a) / n as f64,
                };
                let m = build_interval_mesh(a, b, h)?;
                let cells = m.elements.len();
                (m, cells)
            }
            Domain::Rectangle { x0, x1, y0, y1 } => {
                let n = match resolution {
                    MeshResolution::MaxH(h) => {
                        (CRISSCROSS_MEAN_EDGE * (x1 - x0) / h).round() as usize
                    }
                    MeshResolution::Cells(n) => n,
                };
                (build_crisscross_mesh(x0, x1, y0, y1, n)?, n)
            }
        };
        let kind = match self.id {
            ProblemId::Ho1d => DiscreteKind::AffineQuadratic {
                a1: apply_dirichlet(
                    &assemble_stiffness(&mesh, Diffusion::Scalar(1.0), 0.5)?,
                    &mesh,
                ),
                a2: apply_dirichlet(
                    &assemble_weighted_mass(&mesh, &|x, _| x[0] * x[0], &[], 0.5)?,
                    &mesh,
                ),
                b: apply_dirichlet(&assemble_mass(&mesh, 1.0), &mesh),
            },
            ProblemId::Ho2d => DiscreteKind::AffineQuadratic {
                a1: apply_dirichlet(
                    &assemble_stiffness(&mesh, Diffusion::Scalar(1.0), 0.5)?,
                    &mesh,
                ),
                a2: apply_dirichlet(
                    &assemble_weighted_mass(
                        &mesh,
                        &|x, _| x[0] * x[0] + x[1] * x[1],
                        &[],
                        0.5,
                    )?,
                    &mesh,
                ),
                b: apply_dirichlet(&assemble_mass(&mesh, 1.0), &mesh),
            },
            ProblemId::Nonlinear1d => DiscreteKind::Nonlinear {
                a1: apply_dirichlet(
                    &assemble_stiffness(&mesh, Diffusion::Scalar(1.0), 1.0)?,
                    &mesh,
                ),
                b: apply_dirichlet(&assemble_mass(&mesh, 1.0), &mesh),
            },
            ProblemId::Nonaffine1p => DiscreteKind::WeightedMass {
                a: apply_dirichlet(
                    &assemble_stiffness(&mesh, Diffusion::Scalar(1.0), 1.0)?,
                    &mesh,
                ),
                delta: None,
            },
            ProblemId::Interface2p => {
                let h = match self.domain {
                    Domain::Rectangle { x0, x1, .. } => (x1 - x0) / cells as f64,
                    Domain::Interval { .. } => unreachable!(),
                };
                DiscreteKind::WeightedMass {
                    a: apply_dirichlet(
                        &assemble_stiffness(&mesh, Diffusion::Scalar(1.0), 1.0)?,
                        &mesh,
                    ),
                    delta: Some(2.0 * h),
                }
            }
            // the per-direction parts are only semi-definite, which the SPD
            // check on Diffusion rejects; assembled directly instead
            ProblemId::Crossing => DiscreteKind::Anisotropic {
                ax: apply_dirichlet(&assemble_directional_stiffness(&mesh, 0), &mesh),
                ay: apply_dirichlet(&assemble_directional_stiffness(&mesh, 1), &mesh),
                b: apply_dirichlet(&assemble_mass(&mesh, 1.0), &mesh),
            },
        };
        Ok(DiscreteProblem {
            spec: self.clone(),
            mesh,
            resolution,
            cells,
            kind,
        })
    }
}

/// ∫ ∂_d u ∂_d v over a 2D mesh — one semi-definite directional part of an
/// anisotropic stiffness form.
fn assemble_directional_stiffness(mesh: &Mesh, direction: usize) -> SymBand {
    use crate::mesh::triangle_area;
    let n = mesh.n_vertices();
    let bw = mesh
        .elements
        .iter()
        .map(|e| e.iter().max().unwrap() - e.iter().min().unwrap())
        .max()
        .unwrap_or(0);
    let mut m = SymBand::zeros(n, bw);
    for e in &mesh.elements {
        let p: Vec<&[f64]> = e.iter().map(|&v| mesh.vertices[v].as_slice()).collect();
        let area = triangle_area(p[0], p[1], p[2]);
        let grads: Vec<[f64; 2]> = (0..3)
            .map(|i| {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                [
                    (p[j][1] - p[k][1]) / (2.0 * area),
                    (p[k][0] - p[j][0]) / (2.0 * area),
                ]
            })
            .collect();
        for i in 0..3 {
            for j in 0..=i {
                m.add(e[i], e[j], area * grads[i][direction] * grads[j][direction]);
            }
        }
    }
    m
}

impl DiscreteProblem {
    pub fn n_dof(&self) -> usize {
        self.mesh.n_dof()
    }

    /// Actual mesh spacing (cell side).
    pub fn h(&self) -> f64 {
        match self.spec.domain {
            Domain::Interval { a, b } => (b - a) / self.cells as f64,
            Domain::Rectangle { x0, x1, .. } => (x1 - x0) / self.cells as f64,
        }
    }

    fn check_mu(&self, mu: &[f64]) -> Result<(), ProblemError> {
        if mu.len() != self.spec.dim() {
            return Err(ProblemError::ParameterDimension {
                want: self.spec.dim(),
                got: mu.len(),
            });
        }
        Ok(())
    }

    /// Matrix pair (A(μ), B(μ)), Dirichlet rows eliminated.
    pub fn assemble(&self, mu: &[f64]) -> Result<AssembledOperator, ProblemError> {
        self.check_mu(mu)?;
        let (a, b) = match &self.kind {
            DiscreteKind::AffineQuadratic { a1, a2, b } => {
                (a1.add_scaled(a2, mu[0] * mu[0]), b.clone())
            }
            DiscreteKind::Nonlinear { a1, b } => (a1.clone(), b.clone()),
            DiscreteKind::WeightedMass { a, delta } => {
                let weight: Box<dyn Fn(&[f64], &[f64]) -> f64> = match delta {
                    None => Box::new(|x: &[f64], mu: &[f64]| {
                        (-mu[0] * (x[0] * x[0] + x[1] * x[1])).exp()
                    }),
                    Some(d) => {
                        let d = *d;
                        Box::new(move |x: &[f64], mu: &[f64]| interface_weight(x, mu, d))
                    }
                };
                let full = assemble_weighted_mass(&self.mesh, &weight, mu, 1.0)?;
                (a.clone(), apply_dirichlet(&full, &self.mesh))
            }
            DiscreteKind::Anisotropic { ax, ay, b } => {
                (ax.add_scaled(ay, 1.0 + mu[0]), b.clone())
            }
        };
        Ok(AssembledOperator {
            a_matrix: a,
            b_matrix: b,
            parameter: mu.to_vec(),
        })
    }

    /// Mass matrix of the linear part (used by the Newton iteration).
    pub fn linear_parts(&self) -> Option<(&SymBand, &SymBand)> {
        match &self.kind {
            DiscreteKind::Nonlinear { a1, b } => Some((a1, b)),
            _ => None,
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self.kind, DiscreteKind::Nonlinear { .. })
    }

    /// First k eigenpairs of the full-order model at μ, deterministic signs.
    ///
    /// Linear problems go through the generalized solver; the nonlinear
    /// problem runs the Newton iteration (first eigenpair only).
    pub fn solve_fom(&self, mu: &[f64], k: usize) -> Result<Vec<Eigenpair>, ProblemError> {
        self.check_mu(mu)?;
        if self.is_nonlinear() {
            if k != 1 {
                return Err(ProblemError::NonlinearHigherMode);
            }
            let pair = crate::newton::solve_nonlinear(
                mu[0],
                self,
                None,
                crate::newton::DEFAULT_TOL,
                crate::newton::DEFAULT_MAX_ITER,
            )?;
            return Ok(vec![pair]);
        }
        let op = self.assemble(mu)?;
        let mut pairs = solve_generalized_banded(&op.a_matrix, &op.b_matrix, k)?;
        for p in &mut pairs {
            fix_sign(p, None);
        }
        Ok(pairs)
    }

    /// Analytic k-th sorted eigenvalue where the problem has one.
    pub fn analytic_eigenvalue(&self, k: usize, mu: &[f64]) -> Option<f64> {
        analytic_eigenvalue(self.spec.id, k, mu)
    }
}

/// Analytic sorted spectra for HO1D, HO2D and CROSSING.
pub fn analytic_eigenvalue(id: ProblemId, k: usize, mu: &[f64]) -> Option<f64> {
    match id {
        ProblemId::Ho1d => Some((k as f64 + 0.5) * mu[0]),
        ProblemId::Ho2d => {
            let mut values: Vec<f64> = (0..=k + 1)
                .flat_map(|m| (0..=k + 1).map(move |n| (m + n + 1) as f64))
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(values[k] * mu[0])
        }
        ProblemId::Crossing => {
            let quarter_pi2 = std::f64::consts::PI * std::f64::consts::PI / 4.0;
            let mut values: Vec<f64> = (1..=k + 2)
                .flat_map(|m| {
                    (1..=k + 2)
                        .map(move |n| (m * m) as f64 + (1.0 + mu[0]) * (n * n) as f64)
                })
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(values[k] * quarter_pi2)
        }
        _ => None,
    }
}
