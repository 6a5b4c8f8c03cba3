//! P1 finite element assembly: stiffness, (weighted) mass, Dirichlet
//! elimination.
//!
//! Constant-coefficient terms use exact closed-form element integrals.
//! Variable coefficients are integrated with a 4-point Gauss-Legendre rule
//! per interval in 1D and the 3-point mid-edge rule per triangle in 2D
//! (exact for degree-2 integrands).

use crate::linalg::SymBand;
use crate::mesh::{triangle_area, Mesh};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("diffusion coefficient is not symmetric positive definite")]
    DiffusionNotSpd,
    #[error("coefficient field evaluated to a non-finite value at {0:?}")]
    NonFiniteField(Vec<f64>),
}

/// Constant diffusion coefficient for the stiffness form.
#[derive(Debug, Clone, Copy)]
pub enum Diffusion {
    Scalar(f64),
    /// Symmetric 2×2 matrix [[a, b], [b, c]].
    Matrix([[f64; 2]; 2]),
}

impl Diffusion {
    fn check_spd(&self) -> Result<(), AssembleError> {
        let ok = match self {
            Diffusion::Scalar(d) => *d > 0.0,
            Diffusion::Matrix(m) => {
                let sym = (m[0][1] - m[1][0]).abs() <= 1e-14 * (m[0][1].abs() + 1.0);
                sym && m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(AssembleError::DiffusionNotSpd)
        }
    }

    fn apply(&self, g: [f64; 2]) -> [f64; 2] {
        match self {
            Diffusion::Scalar(d) => [d * g[0], d * g[1]],
            Diffusion::Matrix(m) => [
                m[0][0] * g[0] + m[0][1] * g[1],
                m[1][0] * g[0] + m[1][1] * g[1],
            ],
        }
    }
}

/// 4-point Gauss-Legendre rule on `[-1, 1]`.
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

fn full_bandwidth(mesh: &Mesh) -> usize {
    mesh.elements
        .iter()
        .map(|e| {
            let lo = *e.iter().min().unwrap();
            let hi = *e.iter().max().unwrap();
            hi - lo
        })
        .max()
        .unwrap_or(0)
}

/// Stiffness matrix over all vertices: entries scale·∫ (D ∇φ_j)·∇φ_i.
pub fn assemble_stiffness(
    mesh: &Mesh,
    diffusion: Diffusion,
    scale: f64,
) -> Result<SymBand, AssembleError> {
    diffusion.check_spd()?;
    let n = mesh.n_vertices();
    let mut m = SymBand::zeros(n, full_bandwidth(mesh));
    match mesh.dim {
        1 => {
            let d = match diffusion {
                Diffusion::Scalar(d) => d,
                Diffusion::Matrix(_) => return Err(AssembleError::DiffusionNotSpd),
            };
            for e in &mesh.elements {
                let (a, b) = (e[0], e[1]);
                let h = (mesh.vertices[b][0] - mesh.vertices[a][0]).abs();
                let k = scale * d / h;
                m.add(a, a, k);
                m.add(b, b, k);
                m.add(a, b, -k);
            }
        }
        2 => {
            for e in &mesh.elements {
                let p: Vec<&[f64]> = e.iter().map(|&v| mesh.vertices[v].as_slice()).collect();
                let area = triangle_area(p[0], p[1], p[2]);
                // ∇φ_i = (b_i, c_i) / (2·area), cyclic edge coefficients
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
                    let dgi = diffusion.apply(grads[i]);
                    for j in 0..=i {
                        let v = scale * area * (dgi[0] * grads[j][0] + dgi[1] * grads[j][1]);
                        m.add(e[i], e[j], v);
                    }
                }
            }
        }
        _ => unreachable!("meshes are 1D or 2D"),
    }
    Ok(m)
}

/// Weighted mass matrix over all vertices: entries scale·∫ w(x;μ) φ_j φ_i,
/// with `field(point, mu)` evaluated inside the quadrature rule.
pub fn assemble_weighted_mass(
    mesh: &Mesh,
    field: &dyn Fn(&[f64], &[f64]) -> f64,
    mu: &[f64],
    scale: f64,
) -> Result<SymBand, AssembleError> {
    let n = mesh.n_vertices();
    let mut m = SymBand::zeros(n, full_bandwidth(mesh));
    match mesh.dim {
        1 => {
            for e in &mesh.elements {
                let (a, b) = (e[0], e[1]);
                let xa = mesh.vertices[a][0];
                let xb = mesh.vertices[b][0];
                let half = 0.5 * (xb - xa);
                let mid = 0.5 * (xa + xb);
                let mut local = [[0.0; 2]; 2];
                for (t, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                    let x = mid + half * t;
                    let f = field(&[x], mu);
                    if !f.is_finite() {
                        return Err(AssembleError::NonFiniteField(vec![x]));
                    }
                    let phi = [0.5 * (1.0 - t), 0.5 * (1.0 + t)];
                    for i in 0..2 {
                        for j in 0..=i {
                            local[i][j] += w * half.abs() * f * phi[i] * phi[j];
                        }
                    }
                }
                for i in 0..2 {
                    for j in 0..=i {
                        m.add(e[i], e[j], scale * local[i][j]);
                    }
                }
            }
        }
        2 => {
            // mid-edge quadrature: φ values are 1/2 on the two adjacent
            // vertices and 0 on the opposite one
            for e in &mesh.elements {
                let p: Vec<&[f64]> = e.iter().map(|&v| mesh.vertices[v].as_slice()).collect();
                let area = triangle_area(p[0], p[1], p[2]);
                let w = area / 3.0;
                let mut local = [[0.0; 3]; 3];
                for edge in 0..3 {
                    let a = (edge + 1) % 3;
                    let b = (edge + 2) % 3;
                    let x = [0.5 * (p[a][0] + p[b][0]), 0.5 * (p[a][1] + p[b][1])];
                    let f = field(&x, mu);
                    if !f.is_finite() {
                        return Err(AssembleError::NonFiniteField(x.to_vec()));
                    }
                    let mut phi = [0.0; 3];
                    phi[a] = 0.5;
                    phi[b] = 0.5;
                    for i in 0..3 {
                        for j in 0..=i {
                            local[i][j] += w * f * phi[i] * phi[j];
                        }
                    }
                }
                for i in 0..3 {
                    for j in 0..=i {
                        m.add(e[i], e[j], scale * local[i][j]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(m)
}

/// Consistent mass matrix (weight ≡ 1).
pub fn assemble_mass(mesh: &Mesh, scale: f64) -> SymBand {
    assemble_weighted_mass(mesh, &|_, _| 1.0, &[], scale).expect("unit field is finite")
}

/// Delete boundary rows and columns; the interior map fixes dof ordering.
pub fn apply_dirichlet(full: &SymBand, mesh: &Mesh) -> SymBand {
    let n_dof = mesh.n_dof();
    // restricted bandwidth from element connectivity over interior dofs
    let bw = mesh
        .elements
        .iter()
        .flat_map(|e| {
            let dofs: Vec<usize> = e.iter().filter_map(|&v| mesh.interior_map[v]).collect();
            let lo = dofs.iter().min().copied();
            let hi = dofs.iter().max().copied();
            match (lo, hi) {
                (Some(l), Some(h)) => Some(h - l),
                _ => None,
            }
        })
        .max()
        .unwrap_or(0);
    let mut out = SymBand::zeros(n_dof, bw);
    let dof_to_vertex = mesh.dof_to_vertex();
    for (di, &vi) in dof_to_vertex.iter().enumerate() {
        for dj in di.saturating_sub(bw)..=di {
            let vj = dof_to_vertex[dj];
            let v = full.get(vi, vj);
            if v != 0.0 {
                out.add(di, dj, v);
            }
        }
    }
    out
}
