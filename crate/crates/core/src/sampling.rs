//! Training-parameter designs over a parameter box.
//!
//! All stochastic designs draw from [`SplitMix64`], a 64-bit splittable
//! counter-based generator (increment 0x9E3779B97F4A7C15, finalizer from
//! Steele et al. 2014). The generator is pinned here so that seeded designs
//! are reproducible byte-for-byte across platforms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("each dimension needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("parameter box is degenerate in dimension {0}")]
    DegenerateBox(usize),
}

/// SplitMix64 PRNG. Deterministic, seedable, no global state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_below(&mut self, n: usize) -> usize {
        (self.next_f64() * n as f64) as usize % n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    UniformGrid,
    LatinHypercube,
    Random,
}

/// A set of training parameters inside a closed box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleDesign {
    pub points: Vec<Vec<f64>>,
    pub kind: DesignKind,
    pub seed: Option<u64>,
}

impl SampleDesign {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }
}

fn check_box(bounds: &[[f64; 2]]) -> Result<(), DesignError> {
    for (d, b) in bounds.iter().enumerate() {
        if !(b[0] < b[1]) {
            return Err(DesignError::DegenerateBox(d));
        }
    }
    Ok(())
}

/// Tensor product of equispaced 1D grids, both endpoints included.
pub fn uniform_grid(bounds: &[[f64; 2]], counts: &[usize]) -> Result<SampleDesign, DesignError> {
    assert_eq!(bounds.len(), counts.len(), "counts/bounds length mismatch");
    check_box(bounds)?;
    for &c in counts {
        if c < 2 {
            return Err(DesignError::TooFewPoints { min: 2, got: c });
        }
    }
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .zip(counts)
        .map(|(b, &c)| {
            (0..c)
                .map(|i| b[0] + (b[1] - b[0]) * i as f64 / (c - 1) as f64)
                .collect()
        })
        .collect();
    let total: usize = counts.iter().product();
    let mut points = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut p = Vec::with_capacity(axes.len());
        for axis in &axes {
            p.push(axis[rem % axis.len()]);
            rem /= axis.len();
        }
        points.push(p);
    }
    Ok(SampleDesign {
        points,
        kind: DesignKind::UniformGrid,
        seed: None,
    })
}

/// Latin hypercube: one point per stratum per dimension, uniformly placed
/// within its stratum, strata shuffled independently per dimension.
pub fn latin_hypercube(
    bounds: &[[f64; 2]],
    n: usize,
    seed: u64,
) -> Result<SampleDesign, DesignError> {
    check_box(bounds)?;
    if n < 2 {
        return Err(DesignError::TooFewPoints { min: 2, got: n });
    }
    let d = bounds.len();
    let mut rng = SplitMix64::new(seed);
    let mut strata: Vec<Vec<usize>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.next_below(i + 1);
            perm.swap(i, j);
        }
        strata.push(perm);
    }
    let mut points = vec![vec![0.0; d]; n];
    for (dim, b) in bounds.iter().enumerate() {
        for (i, point) in points.iter_mut().enumerate() {
            let u = rng.next_f64();
            let frac = (strata[dim][i] as f64 + u) / n as f64;
            point[dim] = b[0] + (b[1] - b[0]) * frac;
        }
    }
    Ok(SampleDesign {
        points,
        kind: DesignKind::LatinHypercube,
        seed: Some(seed),
    })
}

/// I.i.d. uniform points over the box.
pub fn random_uniform(
    bounds: &[[f64; 2]],
    n: usize,
    seed: u64,
) -> Result<SampleDesign, DesignError> {
    check_box(bounds)?;
    if n < 2 {
        return Err(DesignError::TooFewPoints { min: 2, got: n });
    }
    let mut rng = SplitMix64::new(seed);
    let points = (0..n)
        .map(|_| {
            bounds
                .iter()
                .map(|b| b[0] + (b[1] - b[0]) * rng.next_f64())
                .collect()
        })
        .collect();
    Ok(SampleDesign {
        points,
        kind: DesignKind::Random,
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_step() {
        let d = uniform_grid(&[[1.0, 9.0]], &[41]).unwrap();
        assert_eq!(d.len(), 41);
        assert_eq!(d.points[0][0], 1.0);
        assert_eq!(d.points[40][0], 9.0);
        assert!((d.points[1][0] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn grid_two_points() {
        let d = uniform_grid(&[[0.0, 1.0]], &[2]).unwrap();
        assert_eq!(d.points, vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn grid_tensor_product_count() {
        let d = uniform_grid(&[[0.1, 0.2], [1.0, 8.0]], &[2, 36]).unwrap();
        assert_eq!(d.len(), 72);
        for p in &d.points {
            assert!(p[0] >= 0.1 && p[0] <= 0.2);
            assert!(p[1] >= 1.0 && p[1] <= 8.0);
        }
    }

    #[test]
    fn grid_rejects_single_count() {
        assert!(uniform_grid(&[[0.0, 1.0]], &[1]).is_err());
    }

    #[test]
    fn lhs_one_point_per_stratum() {
        let d = latin_hypercube(&[[0.0, 1.0], [0.0, 1.0]], 4, 42).unwrap();
        for dim in 0..2 {
            let mut hits = [0usize; 4];
            for p in &d.points {
                let q = ((p[dim] * 4.0) as usize).min(3);
                hits[q] += 1;
            }
            assert_eq!(hits, [1, 1, 1, 1], "dimension {dim} quartiles {hits:?}");
        }
    }

    #[test]
    fn lhs_deterministic_under_seed() {
        let a = latin_hypercube(&[[0.0, 1.0], [0.0, 1.0]], 9, 7).unwrap();
        let b = latin_hypercube(&[[0.0, 1.0], [0.0, 1.0]], 9, 7).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn lhs_points_distinct() {
        let d = latin_hypercube(&[[0.4, 1.0], [0.4, 1.0]], 25, 123).unwrap();
        let mut min_dist = f64::INFINITY;
        for i in 0..d.len() {
            for j in 0..i {
                let dx = d.points[i][0] - d.points[j][0];
                let dy = d.points[i][1] - d.points[j][1];
                min_dist = min_dist.min((dx * dx + dy * dy).sqrt());
            }
        }
        assert!(min_dist > 0.0);
    }

    #[test]
    fn random_bounds_and_determinism() {
        let a = random_uniform(&[[2.0, 3.0]], 100, 5).unwrap();
        let b = random_uniform(&[[2.0, 3.0]], 100, 5).unwrap();
        assert_eq!(a.points, b.points);
        for p in &a.points {
            assert!(p[0] >= 2.0 && p[0] < 3.0);
        }
    }

    #[test]
    fn random_mean_near_center() {
        // CLT: mean of 1000 U(0,1) draws is within 3σ = 3/(√12·√1000) of 0.5.
        let d = random_uniform(&[[0.0, 1.0]], 1000, 99).unwrap();
        let mean: f64 = d.points.iter().map(|p| p[0]).sum::<f64>() / 1000.0;
        let three_sigma = 3.0 / (12.0_f64.sqrt() * (1000.0_f64).sqrt());
        assert!((mean - 0.5).abs() < three_sigma, "mean {mean}");
    }
}
