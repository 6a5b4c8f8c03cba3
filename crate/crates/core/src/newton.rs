//! Newton iteration for the normalized nonlinear eigenvalue problem.
//!
//! Each step linearizes g around the current iterate and solves the bordered
//! system
//!
//! ```text
//! [ A   -c ] [ d  ]   [ b     ]        A = A₁ + μ²·M_{g'} − λᵏ·M
//! [ 2cᵀ  0 ] [ δλ ] = [ 1 - s ]        c = M·uᵏ,  s = uᵏᵀ·M·uᵏ
//! ```
//!
//! with b = λᵏ·M·uᵏ − A₁·uᵏ − μ²·g, by dense LU with partial pivoting.
//! The g-terms are integrated with the same 4-point Gauss-Legendre rule the
//! assembly uses, with uᵏ interpolated as P1.

use crate::eigen::{fix_sign, solve_generalized_banded, Eigenpair};
use crate::linalg::{norm_inf, Lu, Mat};
use crate::problems::{g_nonlinear, g_prime_nonlinear, DiscreteProblem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NewtonError {
    #[error("bordered Newton matrix is singular at iteration {iteration}: {source}")]
    SingularSystem {
        iteration: usize,
        source: crate::linalg::LinalgError,
    },
    #[error("Newton did not reach tol {tol:e} in {max_iter} iterations (last residual {residual:e})")]
    NoConvergence {
        tol: f64,
        max_iter: usize,
        residual: f64,
    },
    #[error("problem has no nonlinear part")]
    NotNonlinear,
    #[error(transparent)]
    Eigen(#[from] crate::eigen::EigenError),
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 50;

/// Current Newton iterate.
#[derive(Debug, Clone)]
pub struct NewtonState {
    pub u: Vec<f64>,
    pub lambda: f64,
    pub iteration: usize,
    /// |δλ| + ‖δu‖_∞ of the last step; f64::INFINITY before the first one.
    pub residual: f64,
}

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_26,
    0.339_981_043_584_856_26,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_85,
];

/// Evaluate the interior-dof vector uᵏ at the vertices (zero on boundary).
fn vertex_values(problem: &DiscreteProblem, u: &[f64]) -> Vec<f64> {
    let mesh = &problem.mesh;
    let mut v = vec![0.0; mesh.n_vertices()];
    for (vertex, dof) in mesh.interior_map.iter().enumerate() {
        if let Some(d) = dof {
            v[vertex] = u[*d];
        }
    }
    v
}

/// g-vector g_j = ∫ g(uᵏ) φ_j and matrix M_{g'}(i,j) = ∫ g'(uᵏ) φ_j φ_i,
/// both restricted to interior dofs, returned as (g, M_{g'}) dense.
fn g_terms(problem: &DiscreteProblem, u: &[f64]) -> (Vec<f64>, Mat) {
    let mesh = &problem.mesh;
    let n_dof = mesh.n_dof();
    let uv = vertex_values(problem, u);
    let mut g_vec = vec![0.0; n_dof];
    let mut m_gp = Mat::zeros(n_dof, n_dof);
    for e in &mesh.elements {
        let (a, b) = (e[0], e[1]);
        let xa = mesh.vertices[a][0];
        let xb = mesh.vertices[b][0];
        let half = 0.5 * (xb - xa);
        for (t, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
            let phi = [0.5 * (1.0 - t), 0.5 * (1.0 + t)];
            let u_q = uv[a] * phi[0] + uv[b] * phi[1];
            let wq = w * half.abs();
            let gq = g_nonlinear(u_q);
            let gpq = g_prime_nonlinear(u_q);
            for (i, &vi) in e.iter().enumerate() {
                if let Some(di) = mesh.interior_map[vi] {
                    g_vec[di] += wq * gq * phi[i];
                    for (j, &vj) in e.iter().enumerate() {
                        if let Some(dj) = mesh.interior_map[vj] {
                            m_gp[(di, dj)] += wq * gpq * phi[i] * phi[j];
                        }
                    }
                }
            }
        }
    }
    (g_vec, m_gp)
}

/// One bordered Newton step at parameter μ.
pub fn newton_step(
    state: &NewtonState,
    mu: f64,
    problem: &DiscreteProblem,
) -> Result<NewtonState, NewtonError> {
    let (a1, mass) = problem.linear_parts().ok_or(NewtonError::NotNonlinear)?;
    let n = state.u.len();
    let (g_vec, m_gp) = g_terms(problem, &state.u);
    let mu2 = mu * mu;

    // bordered (n+1) system
    let mut sys = Mat::zeros(n + 1, n + 1);
    let a1_dense = a1.to_dense();
    let m_dense = mass.to_dense();
    for j in 0..n {
        for i in 0..n {
            sys[(i, j)] = a1_dense[(i, j)] + mu2 * m_gp[(i, j)] - state.lambda * m_dense[(i, j)];
        }
    }
    let c = mass.matvec(&state.u);
    for i in 0..n {
        sys[(i, n)] = -c[i];
        sys[(n, i)] = 2.0 * c[i];
    }

    let m_u = mass.matvec(&state.u);
    let a1_u = a1.matvec(&state.u);
    let s: f64 = state.u.iter().zip(&m_u).map(|(x, y)| x * y).sum();
    let mut rhs = vec![0.0; n + 1];
    for i in 0..n {
        rhs[i] = state.lambda * m_u[i] - a1_u[i] - mu2 * g_vec[i];
    }
    rhs[n] = 1.0 - s;

    let lu = Lu::new(&sys).map_err(|source| NewtonError::SingularSystem {
        iteration: state.iteration,
        source,
    })?;
    let sol = lu.solve(&rhs);

    let mut u = state.u.clone();
    for i in 0..n {
        u[i] += sol[i];
    }
    let delta_lambda = sol[n];
    Ok(NewtonState {
        u,
        lambda: state.lambda + delta_lambda,
        iteration: state.iteration + 1,
        residual: delta_lambda.abs() + norm_inf(&sol[..n]),
    })
}

/// Solve the nonlinear eigenproblem at μ.
///
/// Without an initial guess the iteration starts from the first eigenpair of
/// the linear part (g dropped); passing the solution at a nearby parameter
/// turns this into a continuation step.
pub fn solve_nonlinear(
    mu: f64,
    problem: &DiscreteProblem,
    init: Option<&Eigenpair>,
    tol: f64,
    max_iter: usize,
) -> Result<Eigenpair, NewtonError> {
    let (a1, mass) = problem.linear_parts().ok_or(NewtonError::NotNonlinear)?;
    let start = match init {
        Some(p) => p.clone(),
        None => {
            let mut pairs = solve_generalized_banded(a1, mass, 1)?;
            let mut p = pairs.remove(0);
            fix_sign(&mut p, None);
            p
        }
    };
    let mut state = NewtonState {
        u: start.vector,
        lambda: start.value,
        iteration: 0,
        residual: f64::INFINITY,
    };
    for _ in 0..max_iter {
        state = newton_step(&state, mu, problem)?;
        if state.residual < tol {
            let mut pair = Eigenpair {
                value: state.lambda,
                vector: state.u,
                index: 0,
            };
            fix_sign(&mut pair, None);
            return Ok(pair);
        }
    }
    Err(NewtonError::NoConvergence {
        tol,
        max_iter,
        residual: state.residual,
    })
}

/// Residual of the discrete nonlinear equation ‖A₁u + μ²g(u) − λMu‖₂.
pub fn nonlinear_residual(problem: &DiscreteProblem, mu: f64, pair: &Eigenpair) -> f64 {
    let (a1, mass) = problem.linear_parts().expect("nonlinear problem");
    let (g_vec, _) = g_terms(problem, &pair.vector);
    let a1_u = a1.matvec(&pair.vector);
    let m_u = mass.matvec(&pair.vector);
    let mu2 = mu * mu;
    a1_u.iter()
        .zip(&g_vec)
        .zip(&m_u)
        .map(|((a, g), m)| {
            let r = a + mu2 * g - pair.value * m;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}
