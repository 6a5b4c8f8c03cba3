//! Snapshot handling and proper orthogonal decomposition.
//!
//! The basis comes from the correlation matrix C = SᵀS (size n_s, much
//! smaller than the snapshot height): eigenvectors ψ_j of C give the basis
//! columns ζ_j = S ψ_j / σ_j, and the dimension N is the smallest integer
//! whose cumulative squared-singular-value fraction reaches 1 − ε.

use crate::eigen::symmetric_eigen;
use crate::linalg::{dot, Mat};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PodError {
    #[error("snapshot matrix is identically zero")]
    ZeroSnapshots,
    #[error("snapshot sets disagree: {0}")]
    InconsistentSets(String),
    #[error("dimension mismatch: basis has {basis} rows, data has {data}")]
    DimensionMismatch { basis: usize, data: usize },
    #[error("epsilon must lie in (0,1), got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Eigen(#[from] crate::eigen::EigenError),
}

/// Snapshot columns with the parameters they were computed at.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    /// N_rows × n_s; column j is the (aligned, B-normalized) solution at
    /// `parameters[j]`. Stacked sets hold n_e·N_h rows.
    pub matrix: Mat,
    pub parameters: Vec<Vec<f64>>,
}

impl SnapshotSet {
    pub fn new(matrix: Mat, parameters: Vec<Vec<f64>>) -> Self {
        assert_eq!(
            matrix.ncols(),
            parameters.len(),
            "snapshot column count must equal parameter count"
        );
        SnapshotSet { matrix, parameters }
    }

    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }
}

/// Deterministic processing order for sign alignment: a nearest-neighbor
/// chain starting from the lexicographically smallest parameter. For 1D
/// sweeps this reduces to ascending parameter order.
pub fn alignment_chain(parameters: &[Vec<f64>]) -> Vec<usize> {
    let n = parameters.len();
    if n == 0 {
        return Vec::new();
    }
    let lex_less = |a: &[f64], b: &[f64]| -> bool {
        for (x, y) in a.iter().zip(b) {
            if x < y {
                return true;
            }
            if x > y {
                return false;
            }
        }
        false
    };
    let mut start = 0;
    for i in 1..n {
        if lex_less(&parameters[i], &parameters[start]) {
            start = i;
        }
    }
    let mut visited = vec![false; n];
    let mut chain = Vec::with_capacity(n);
    let mut current = start;
    visited[start] = true;
    chain.push(start);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (i, p) in parameters.iter().enumerate() {
            if visited[i] {
                continue;
            }
            let d: f64 = p
                .iter()
                .zip(&parameters[current])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            // ties break toward the lexicographically smaller point
            if d < best_d || (d == best_d && best != usize::MAX && lex_less(p, &parameters[best]))
            {
                best_d = d;
                best = i;
            }
        }
        visited[best] = true;
        chain.push(best);
        current = best;
    }
    chain
}

/// Choose snapshot signs along the chain: column j is flipped when
/// ‖u_j − u_prev‖ ≥ ‖u_j + u_prev‖ against its (already aligned)
/// predecessor. The first column is left unchanged. Only signs change.
pub fn align_signs(snapshots: &SnapshotSet) -> SnapshotSet {
    let mut out = snapshots.matrix.clone();
    let chain = alignment_chain(&snapshots.parameters);
    for w in chain.windows(2) {
        let (prev, cur) = (w[0], w[1]);
        let mut d_minus = 0.0;
        let mut d_plus = 0.0;
        {
            let p = out.column(prev);
            let c = out.column(cur);
            for (a, b) in c.iter().zip(p) {
                d_minus += (a - b) * (a - b);
                d_plus += (a + b) * (a + b);
            }
        }
        if d_minus >= d_plus {
            for v in out.column_mut(cur) {
                *v = -*v;
            }
        }
    }
    SnapshotSet {
        matrix: out,
        parameters: snapshots.parameters.clone(),
    }
}

/// Stack per-eigenvector snapshot sets into tall columns
/// [u_1; u_2; …; u_{n_e}] per parameter, aligning each set first.
pub fn stack_snapshots(sets: &[SnapshotSet]) -> Result<SnapshotSet, PodError> {
    let first = sets.first().ok_or(PodError::ZeroSnapshots)?;
    let n_s = first.len();
    let rows = first.matrix.nrows();
    for (i, s) in sets.iter().enumerate() {
        if s.parameters != first.parameters {
            return Err(PodError::InconsistentSets(format!(
                "set {i} has different parameters"
            )));
        }
        if s.matrix.nrows() != rows {
            return Err(PodError::InconsistentSets(format!(
                "set {i} has height {} != {rows}",
                s.matrix.nrows()
            )));
        }
    }
    let aligned: Vec<SnapshotSet> = sets.iter().map(align_signs).collect();
    let mut stacked = Mat::zeros(rows * sets.len(), n_s);
    for j in 0..n_s {
        let col = stacked.column_mut(j);
        for (block, s) in aligned.iter().enumerate() {
            col[block * rows..(block + 1) * rows].copy_from_slice(s.matrix.column(j));
        }
    }
    Ok(SnapshotSet {
        matrix: stacked,
        parameters: first.parameters.clone(),
    })
}

/// Orthonormal POD basis with its selection record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PodBasis {
    /// N_rows × N, columns ζ_j.
    pub basis: Mat,
    /// Retained singular values σ₁ ≥ … (all of them, for energy bookkeeping).
    pub singular_values: Vec<f64>,
    /// Selected dimension N.
    pub n_basis: usize,
    /// Energy tolerance the selection used.
    pub epsilon: f64,
    /// Achieved energy fraction I(N).
    pub energy: f64,
}

impl PodBasis {
    pub fn matrix(&self) -> &Mat {
        &self.basis
    }
}

/// Relative floor on σ² below which correlation-matrix modes are treated as
/// rank noise. The correlation route squares the condition number, so tiny
/// or negative eigenvalues of C are clamped out before the energy sum.
pub const RANK_GUARD: f64 = 1e-14;

/// Build the POD basis from snapshots via the correlation matrix.
pub fn compute_pod(snapshots: &SnapshotSet, epsilon: f64) -> Result<PodBasis, PodError> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(PodError::BadEpsilon(epsilon));
    }
    let s = &snapshots.matrix;
    let n_s = s.ncols();
    let corr = s.tr_matmul(s);
    if corr.max_abs() == 0.0 {
        return Err(PodError::ZeroSnapshots);
    }
    let (evals, evecs) = symmetric_eigen(&corr)?;
    // descending σ², rank-guarded
    let mut order: Vec<usize> = (0..n_s).collect();
    order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());
    let sigma2_max = evals[order[0]];
    let retained: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| evals[i] > RANK_GUARD * sigma2_max)
        .collect();
    let total: f64 = retained.iter().map(|&i| evals[i]).sum();
    let mut n_basis = retained.len();
    let mut cumulative = 0.0;
    let mut energy = 1.0;
    for (count, &i) in retained.iter().enumerate() {
        cumulative += evals[i];
        if cumulative / total >= 1.0 - epsilon {
            n_basis = count + 1;
            energy = cumulative / total;
            break;
        }
    }
    let singular_values: Vec<f64> = retained.iter().map(|&i| evals[i].sqrt()).collect();
    let mut basis = Mat::zeros(s.nrows(), n_basis);
    for (j, &src) in retained.iter().take(n_basis).enumerate() {
        let psi = evecs.column(src);
        let zeta = s.matvec(psi);
        let inv_sigma = 1.0 / singular_values[j];
        let col = basis.column_mut(j);
        for (c, z) in col.iter_mut().zip(&zeta) {
            *c = z * inv_sigma;
        }
    }
    // the squared conditioning of the correlation route leaves the trailing
    // ζ columns orthonormal only to ~ε_machine·σ₁/σ_N; two Gram-Schmidt
    // passes restore machine-level orthonormality without changing the span
    for _ in 0..2 {
        for j in 0..n_basis {
            for k in 0..j {
                let proj = dot(basis.column(j), basis.column(k));
                let prev = basis.column(k).to_vec();
                for (v, p) in basis.column_mut(j).iter_mut().zip(&prev) {
                    *v -= proj * p;
                }
            }
            let nrm = crate::linalg::norm2(basis.column(j));
            for v in basis.column_mut(j) {
                *v /= nrm;
            }
        }
    }
    Ok(PodBasis {
        basis,
        singular_values,
        n_basis,
        epsilon,
        energy,
    })
}

/// Reduced coordinates S_N = Vᵀ S; row i holds the training targets for
/// coefficient i across the sampled parameters.
pub fn project(basis: &PodBasis, data: &Mat) -> Result<Mat, PodError> {
    let v = basis.matrix();
    if v.nrows() != data.nrows() {
        return Err(PodError::DimensionMismatch {
            basis: v.nrows(),
            data: data.nrows(),
        });
    }
    Ok(v.tr_matmul(data))
}

/// Lift reduced coordinates back: u_h = V·û_N.
pub fn reconstruct(basis: &PodBasis, reduced: &[f64]) -> Vec<f64> {
    basis.matrix().matvec(reduced)
}

/// max |VᵀV − I| — orthonormality defect of the basis.
pub fn orthonormality_defect(basis: &PodBasis) -> f64 {
    let v = basis.matrix();
    let g = v.tr_matmul(&v);
    let mut worst = 0.0_f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - want).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::sampling::SplitMix64;

    fn params_1d(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|v| vec![*v]).collect()
    }

    #[test]
    fn chain_is_ascending_for_1d() {
        let params = params_1d(&[0.3, 0.1, 0.5, 0.2, 0.4]);
        let chain = alignment_chain(&params);
        assert_eq!(chain, vec![1, 3, 0, 4, 2]);
    }

    #[test]
    fn align_identical_columns_unchanged() {
        let col = vec![1.0, 2.0, -1.0];
        let m = Mat::from_columns(&[col.clone(), col.clone()]);
        let s = SnapshotSet::new(m, params_1d(&[0.0, 1.0]));
        let aligned = align_signs(&s);
        assert_eq!(aligned.matrix.column(0), &col[..]);
        assert_eq!(aligned.matrix.column(1), &col[..]);
    }

    #[test]
    fn align_flips_negated_column() {
        let col = vec![1.0, 2.0, -1.0];
        let neg: Vec<f64> = col.iter().map(|v| -v).collect();
        let m = Mat::from_columns(&[col.clone(), neg]);
        let s = SnapshotSet::new(m, params_1d(&[0.0, 1.0]));
        let aligned = align_signs(&s);
        assert_eq!(aligned.matrix.column(1), &col[..]);
    }

    #[test]
    fn align_only_changes_signs() {
        let mut rng = SplitMix64::new(9);
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..10).map(|_| rng.next_f64() - 0.5).collect())
            .collect();
        let s = SnapshotSet::new(
            Mat::from_columns(&cols),
            params_1d(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]),
        );
        let aligned = align_signs(&s);
        for j in 0..6 {
            for i in 0..10 {
                assert_eq!(
                    aligned.matrix[(i, j)].abs(),
                    s.matrix[(i, j)].abs(),
                    "alignment must not change magnitudes"
                );
            }
        }
    }

    #[test]
    fn single_snapshot_pod() {
        let col = vec![3.0, 4.0];
        let s = SnapshotSet::new(Mat::from_columns(&[col]), params_1d(&[0.5]));
        let pod = compute_pod(&s, 1e-8).unwrap();
        assert_eq!(pod.n_basis, 1);
        let v = pod.matrix();
        assert!((v[(0, 0)] - 0.6).abs() < 1e-12);
        assert!((v[(1, 0)] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn two_orthogonal_snapshots_keep_both() {
        let s = SnapshotSet::new(
            Mat::from_columns(&[vec![2.0, 0.0, 0.0], vec![0.0, 2.0, 0.0]]),
            params_1d(&[0.0, 1.0]),
        );
        let pod = compute_pod(&s, 1e-8).unwrap();
        assert_eq!(pod.n_basis, 2);
        assert!((pod.singular_values[0] - pod.singular_values[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_snapshots_rejected() {
        let s = SnapshotSet::new(Mat::zeros(4, 2), params_1d(&[0.0, 1.0]));
        assert!(matches!(compute_pod(&s, 1e-8), Err(PodError::ZeroSnapshots)));
        let s2 = SnapshotSet::new(Mat::from_columns(&[vec![1.0]]), params_1d(&[0.0]));
        assert!(compute_pod(&s2, 1.5).is_err());
    }

    #[test]
    fn energy_criterion_minimality() {
        // σ² profile 100, 1, 1e-4: ε=1e-8 keeps all three, ε=1e-3 keeps
        // two, ε=0.5 keeps one
        let mut rng = SplitMix64::new(4);
        let q = random_orthogonal(8, &mut rng);
        let mut cols = Vec::new();
        let scales = [10.0, 1.0, 1e-2];
        for j in 0..3 {
            let mut c = q.column(j).to_vec();
            for v in &mut c {
                *v *= scales[j];
            }
            cols.push(c);
        }
        let s = SnapshotSet::new(Mat::from_columns(&cols), params_1d(&[0.0, 0.5, 1.0]));
        let pod_tight = compute_pod(&s, 1e-8).unwrap();
        assert_eq!(pod_tight.n_basis, 3);
        let pod_loose = compute_pod(&s, 1e-3).unwrap();
        assert_eq!(pod_loose.n_basis, 2);
        assert!(pod_loose.energy >= 1.0 - 1e-3);
        let pod_half = compute_pod(&s, 0.5).unwrap();
        assert_eq!(pod_half.n_basis, 1);
    }

    #[test]
    fn projection_and_reconstruction_identities() {
        let mut rng = SplitMix64::new(12);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..20).map(|_| rng.next_f64() - 0.5).collect())
            .collect();
        let m = Mat::from_columns(&cols);
        let s = SnapshotSet::new(m.clone(), params_1d(&[0.0, 0.3, 0.6, 1.0]));
        let pod = compute_pod(&s, 1e-14).unwrap();
        assert_eq!(pod.n_basis, 4);
        // V·VᵀS = S when N = rank(S)
        let reduced = project(&pod, &m).unwrap();
        for j in 0..4 {
            let back = reconstruct(&pod, reduced.column(j));
            let orig = m.column(j);
            let diff: f64 = back
                .iter()
                .zip(orig)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(diff <= 1e-10 * norm2(orig), "column {j} residual {diff}");
        }
        assert!(orthonormality_defect(&pod) <= 1e-10);
    }

    #[test]
    fn truncation_energy_identity() {
        // ‖S − V VᵀS‖²_F = Σ_{i>N} σ_i², against a direct Gram-based check
        let mut rng = SplitMix64::new(33);
        let cols: Vec<Vec<f64>> = (0..10)
            .map(|j| {
                let scale = 0.4_f64.powi(j);
                (0..50).map(|_| scale * (rng.next_f64() - 0.5)).collect()
            })
            .collect();
        let m = Mat::from_columns(&cols);
        let s = SnapshotSet::new(m.clone(), params_1d(&(0..10).map(|i| i as f64).collect::<Vec<_>>()));
        let pod = compute_pod(&s, 1e-4).unwrap();
        assert!(pod.n_basis < 10);
        let reduced = project(&pod, &m).unwrap();
        let mut residual2 = 0.0;
        for j in 0..10 {
            let back = reconstruct(&pod, reduced.column(j));
            residual2 += back
                .iter()
                .zip(m.column(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        let tail: f64 = pod.singular_values[pod.n_basis..]
            .iter()
            .map(|s| s * s)
            .sum();
        assert!(
            (residual2 - tail).abs() <= 1e-8 * tail.max(1e-12),
            "residual² {residual2} vs tail {tail}"
        );
    }

    #[test]
    fn correlation_route_matches_direct_gram_svd() {
        // singular values from C = SᵀS must match those of the economy SVD;
        // the oracle here is an independent Jacobi one-sided SVD
        let mut rng = SplitMix64::new(101);
        for _ in 0..5 {
            let cols: Vec<Vec<f64>> = (0..10)
                .map(|_| (0..50).map(|_| rng.next_f64() - 0.5).collect())
                .collect();
            let m = Mat::from_columns(&cols);
            let s = SnapshotSet::new(
                m.clone(),
                params_1d(&(0..10).map(|i| i as f64).collect::<Vec<_>>()),
            );
            let pod = compute_pod(&s, 1e-14).unwrap();
            let direct = jacobi_singular_values(&m);
            for (a, b) in pod.singular_values.iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-8 * b.max(1e-8), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn stacking_blocks_in_order() {
        let s1 = SnapshotSet::new(Mat::from_columns(&[vec![1.0, 2.0]]), params_1d(&[0.0]));
        let s2 = SnapshotSet::new(Mat::from_columns(&[vec![3.0, 4.0]]), params_1d(&[0.0]));
        let s3 = SnapshotSet::new(Mat::from_columns(&[vec![5.0, 6.0]]), params_1d(&[0.0]));
        let stacked = stack_snapshots(&[s1.clone(), s2, s3]).unwrap();
        assert_eq!(stacked.matrix.nrows(), 6);
        assert_eq!(stacked.matrix.column(0), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // single set stacks to itself
        let same = stack_snapshots(std::slice::from_ref(&s1)).unwrap();
        assert_eq!(same.matrix.column(0), s1.matrix.column(0));
    }

    #[test]
    fn stacking_rejects_mismatched_parameters() {
        let s1 = SnapshotSet::new(Mat::from_columns(&[vec![1.0]]), params_1d(&[0.0]));
        let s2 = SnapshotSet::new(Mat::from_columns(&[vec![1.0]]), params_1d(&[1.0]));
        assert!(stack_snapshots(&[s1, s2]).is_err());
    }

    fn random_orthogonal(n: usize, rng: &mut SplitMix64) -> Mat {
        // Gram-Schmidt on a random matrix
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.next_f64() - 0.5).collect())
            .collect();
        for j in 0..n {
            for k in 0..j {
                let proj = dot(&cols[j], &cols[k]);
                let prev = cols[k].clone();
                for (v, p) in cols[j].iter_mut().zip(&prev) {
                    *v -= proj * p;
                }
            }
            let nrm = norm2(&cols[j]);
            for v in &mut cols[j] {
                *v /= nrm;
            }
        }
        Mat::from_columns(&cols)
    }

    /// One-sided Jacobi SVD (column rotations until convergence): a slow,
    /// independent way to get singular values.
    fn jacobi_singular_values(m: &Mat) -> Vec<f64> {
        let mut a = m.clone();
        let n = a.ncols();
        for _ in 0..60 {
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in p + 1..n {
                    let (cp, cq): (Vec<f64>, Vec<f64>) =
                        (a.column(p).to_vec(), a.column(q).to_vec());
                    let apq = dot(&cp, &cq);
                    let app = dot(&cp, &cp);
                    let aqq = dot(&cq, &cq);
                    off = off.max(apq.abs() / (app * aqq).sqrt().max(1e-300));
                    if apq.abs() < 1e-15 * (app * aqq).sqrt() {
                        continue;
                    }
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..a.nrows() {
                        let vp = a[(i, p)];
                        let vq = a[(i, q)];
                        a[(i, p)] = c * vp - s * vq;
                        a[(i, q)] = s * vp + c * vq;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
        }
        let mut sv: Vec<f64> = (0..n).map(|j| norm2(a.column(j))).collect();
        sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
        sv
    }
}
