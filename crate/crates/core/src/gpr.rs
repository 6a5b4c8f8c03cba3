//! Scalar-output Gaussian process regression.
//!
//! Model: y = θᵀh(x) + f(x) + ε with a linear basis h(x) = (1, x₁, …, x_d),
//! f ~ GP(0, κ) under the ARD squared-exponential kernel
//! κ(x,x′) = σ₁²·exp(−½ Σ (x_i−x_i′)²/l_i²), and ε ~ N(0, σ²).
//!
//! Inputs are normalized to the declared parameter box and targets are
//! standardized before fitting. The mean coefficients θ are profiled out in
//! closed form (generalized least squares); the remaining log-parameters
//! (log l, log σ₁, log σ) are fitted by multi-start BFGS ascent on the log
//! marginal likelihood with analytic gradients. Everything is seeded and
//! deterministic.

use crate::linalg::{dot, Cholesky, Mat};
use crate::sampling::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GprError {
    #[error("need at least 2 training points, got {0}")]
    TooFewPoints(usize),
    #[error("training input {index} lies outside the declared box")]
    InputOutsideBox { index: usize },
    #[error("kernel matrix stayed non-positive-definite through the jitter ladder")]
    IrreparableKernel,
    #[error("every optimizer start failed factorization")]
    AllStartsFailed,
    #[error("stored likelihood {stored} does not match recomputed {recomputed}")]
    LikelihoodMismatch { stored: f64, recomputed: f64 },
    #[error("query has dimension {got}, model expects {want}")]
    QueryDimension { want: usize, got: usize },
}

/// Noise-variance floor in standardized output units.
pub const NOISE_VARIANCE_FLOOR: f64 = 1e-12;

/// Jitter ladder: start at 1e-10·mean(diag), escalate tenfold to 1e-6.
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Box constraints for the optimizer, in log space.
const LN_10: f64 = std::f64::consts::LN_10;
const LOG_LENGTHSCALE_BOUNDS: [f64; 2] = [-3.0 * LN_10, 3.0 * LN_10]; // [1e-3, 1e3]
const LOG_SIGNAL_BOUNDS: [f64; 2] = [-6.0 * LN_10, 3.0 * LN_10]; // [1e-6, 1e3]
const LOG_NOISE_BOUNDS: [f64; 2] = [-6.0 * LN_10, LN_10]; // [1e-6, 1e1]

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// θ for the linear basis (1, x₁, …, x_d), in normalized/standardized
    /// coordinates.
    pub mean_coeffs: Vec<f64>,
    /// σ₁² > 0.
    pub signal_variance: f64,
    /// l_i > 0, one per input dimension (normalized coordinates).
    pub lengthscales: Vec<f64>,
    /// σ² ≥ NOISE_VARIANCE_FLOOR.
    pub noise_variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transforms {
    /// Declared parameter box; inputs map to the unit box over it.
    pub input_box: Vec<[f64; 2]>,
    pub y_mean: f64,
    pub y_scale: f64,
}

impl Transforms {
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.input_box)
            .map(|(v, b)| (v - b[0]) / (b[1] - b[0]))
            .collect()
    }
}

/// Fit settings: number of optimizer starts and the seed for the random
/// ones. Start 0 is the fixed heuristic (l = 0.5, σ₁ = 1, σ = 1e-2).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitConfig {
    pub starts: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            starts: 8,
            seed: 42,
            max_iters: 200,
        }
    }
}

/// Serializable part of a trained model; the Cholesky factor and α are
/// rebuilt on load and the stored likelihood is verified.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GprModelData {
    pub hyper: Hyperparameters,
    /// n × d training inputs, normalized.
    pub x: Mat,
    /// Standardized targets.
    pub y: Vec<f64>,
    pub transforms: Transforms,
    pub log_likelihood: f64,
    /// Jitter that was needed at fit time (0 when Cholesky succeeded raw).
    pub jitter: f64,
}

/// Trained model with its cached factorization.
#[derive(Debug, Clone)]
pub struct GprModel {
    data: GprModelData,
    chol: Cholesky,
    alpha: Vec<f64>,
}

/// Posterior evaluation at one query point, in output units.
#[derive(Debug, Clone, Copy)]
pub struct Posterior {
    pub mean: f64,
    /// κ*(x), clamped at zero.
    pub latent_variance: f64,
    /// κ*(x) + σ² — what the 95% bands use.
    pub predictive_variance: f64,
}

impl Posterior {
    pub fn band_95(&self) -> (f64, f64) {
        let half = 1.96 * self.predictive_variance.sqrt();
        (self.mean - half, self.mean + half)
    }
}

fn squared_distance_over_lengthscales(a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(lengthscales)
        .map(|((x, y), l)| {
            let d = (x - y) / l;
            d * d
        })
        .sum()
}

/// ARD squared-exponential kernel.
pub fn kernel(a: &[f64], b: &[f64], signal_variance: f64, lengthscales: &[f64]) -> f64 {
    signal_variance * (-0.5 * squared_distance_over_lengthscales(a, b, lengthscales)).exp()
}

struct Workspace {
    /// K_y = κ(X,X) + σ²I (+ jitter), factorized.
    chol: Cholesky,
    jitter: f64,
    /// Profiled mean coefficients.
    theta: Vec<f64>,
    /// α = K_y⁻¹(y − Hθ).
    alpha: Vec<f64>,
    log_likelihood: f64,
}

fn row(x: &Mat, i: usize) -> Vec<f64> {
    (0..x.ncols()).map(|j| x[(i, j)]).collect()
}

fn basis_matrix(x: &Mat) -> Mat {
    let n = x.nrows();
    let d = x.ncols();
    Mat::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

/// Assemble and factorize K_y, profile out θ, return likelihood pieces.
fn evaluate_likelihood(
    x: &Mat,
    y: &[f64],
    signal_variance: f64,
    lengthscales: &[f64],
    noise_variance: f64,
) -> Result<Workspace, GprError> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(x, i)).collect();
    let mut k = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = kernel(&rows[i], &rows[j], signal_variance, lengthscales);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let mean_diag = (0..n).map(|i| k[(i, i)]).sum::<f64>() / n as f64 + noise_variance;
    let mut jitter = 0.0;
    let chol = loop {
        let mut ky = k.clone();
        for i in 0..n {
            ky[(i, i)] += noise_variance + jitter;
        }
        match Cholesky::new(&ky) {
            Ok(c) => break c,
            Err(_) => {
                jitter = if jitter == 0.0 {
                    JITTER_START * mean_diag
                } else {
                    jitter * 10.0
                };
                if jitter > JITTER_MAX * mean_diag {
                    return Err(GprError::IrreparableKernel);
                }
            }
        }
    };
    // generalized least squares for the linear mean
    let h = basis_matrix(x);
    let p = h.ncols();
    let mut kinv_h = Mat::zeros(n, p);
    for j in 0..p {
        kinv_h.set_column(j, &chol.solve(h.column(j)));
    }
    let kinv_y = chol.solve(y);
    let gram = h.tr_matmul(&kinv_h);
    let rhs = h.tr_matvec(&kinv_y);
    let theta = match Cholesky::new(&gram) {
        Ok(c) => c.solve(&rhs),
        Err(_) => vec![0.0; p], // degenerate design: fall back to zero mean
    };
    let h_theta = h.matvec(&theta);
    let residual: Vec<f64> = y.iter().zip(&h_theta).map(|(a, b)| a - b).collect();
    let alpha = chol.solve(&residual);
    let data_fit = dot(&residual, &alpha);
    let log_likelihood = -0.5 * data_fit
        - 0.5 * chol.log_det()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(Workspace {
        chol,
        jitter,
        theta,
        alpha,
        log_likelihood,
    })
}

/// Log marginal likelihood and its gradient with respect to the
/// log-hyperparameters η = (log l₁…log l_d, log σ₁, log σ), with the mean
/// coefficients profiled out (the envelope theorem makes the partial
/// gradient exact for the profiled objective).
pub fn log_marginal_likelihood(
    x: &Mat,
    y: &[f64],
    signal_variance: f64,
    lengthscales: &[f64],
    noise_variance: f64,
) -> Result<(f64, Vec<f64>), GprError> {
    let ws = evaluate_likelihood(x, y, signal_variance, lengthscales, noise_variance)?;
    let n = x.nrows();
    let d = x.ncols();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(x, i)).collect();
    // K (noise-free) and K_y⁻¹
    let mut k = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            k[(i, j)] = kernel(&rows[i], &rows[j], signal_variance, lengthscales);
        }
    }
    let mut kinv = Mat::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        kinv.set_column(j, &ws.chol.solve(&e));
        e[j] = 0.0;
    }
    let alpha = &ws.alpha;
    let mut grad = vec![0.0; d + 2];
    // lengthscales: ∂K/∂log l_m = K ⊙ D_m, D_m(i,j) = (x_im−x_jm)²/l_m²
    for m in 0..d {
        let lm2 = lengthscales[m] * lengthscales[m];
        let mut fit = 0.0;
        let mut trace = 0.0;
        for j in 0..n {
            for i in 0..n {
                let diff = x[(i, m)] - x[(j, m)];
                let dk = k[(i, j)] * diff * diff / lm2;
                fit += alpha[i] * dk * alpha[j];
                trace += kinv[(i, j)] * dk;
            }
        }
        grad[m] = 0.5 * (fit - trace);
    }
    // signal: ∂K/∂log σ₁ = 2K
    {
        let mut fit = 0.0;
        let mut trace = 0.0;
        for j in 0..n {
            for i in 0..n {
                fit += alpha[i] * 2.0 * k[(i, j)] * alpha[j];
                trace += kinv[(i, j)] * 2.0 * k[(i, j)];
            }
        }
        grad[d] = 0.5 * (fit - trace);
    }
    // noise: ∂K_y/∂log σ = 2σ²I
    {
        let fit = 2.0 * noise_variance * dot(alpha, alpha);
        let trace = 2.0 * noise_variance * (0..n).map(|i| kinv[(i, i)]).sum::<f64>();
        grad[d + 1] = 0.5 * (fit - trace);
    }
    Ok((ws.log_likelihood, grad))
}

/// Maximize the (negated-for-minimization) likelihood from one start by
/// BFGS with Armijo backtracking, clamping iterates into the log-space box.
fn bfgs_maximize(
    x: &Mat,
    y: &[f64],
    eta0: Vec<f64>,
    max_iters: usize,
) -> Option<(Vec<f64>, f64)> {
    let d = x.ncols();
    let bounds = |idx: usize| -> [f64; 2] {
        if idx < d {
            LOG_LENGTHSCALE_BOUNDS
        } else if idx == d {
            LOG_SIGNAL_BOUNDS
        } else {
            LOG_NOISE_BOUNDS
        }
    };
    let clamp = |eta: &mut Vec<f64>| {
        let mut touched = false;
        for (i, v) in eta.iter_mut().enumerate() {
            let b = bounds(i);
            let c = v.clamp(b[0], b[1]);
            if c != *v {
                touched = true;
                *v = c;
            }
        }
        touched
    };
    let eval = |eta: &[f64]| -> Option<(f64, Vec<f64>)> {
        let lengthscales: Vec<f64> = eta[..d].iter().map(|v| v.exp()).collect();
        let sigma1 = eta[d].exp();
        let sigma = eta[d + 1].exp();
        log_marginal_likelihood(x, y, sigma1 * sigma1, &lengthscales, sigma * sigma)
            .ok()
            .map(|(ll, g)| (-ll, g.iter().map(|v| -v).collect()))
    };

    let mut eta = eta0;
    clamp(&mut eta);
    let m = eta.len();
    let (mut f, mut g) = eval(&eta)?;
    let mut hess = Mat::identity(m);
    for _ in 0..max_iters {
        let g_norm = g.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if g_norm <= 1e-7 {
            break;
        }
        let dir: Vec<f64> = {
            let hg = hess.matvec(&g);
            hg.iter().map(|v| -v).collect()
        };
        // backtracking line search
        let slope = dot(&g, &dir);
        if slope >= 0.0 {
            hess = Mat::identity(m);
            continue;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut trial: Vec<f64> = eta.iter().zip(&dir).map(|(e, d)| e + step * d).collect();
            let was_clamped = clamp(&mut trial);
            if let Some((ft, gt)) = eval(&trial) {
                if ft <= f + 1e-4 * step * slope {
                    accepted = Some((trial, ft, gt, was_clamped));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((eta_new, f_new, g_new, was_clamped)) = accepted else {
            break;
        };
        // BFGS inverse-Hessian update
        let s: Vec<f64> = eta_new.iter().zip(&eta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if was_clamped || sy <= 1e-12 {
            hess = Mat::identity(m);
        } else {
            let rho = 1.0 / sy;
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let hy = hess.matvec(&yv);
            let yhy = dot(&yv, &hy);
            let coeff = (1.0 + rho * yhy) * rho;
            for j in 0..m {
                for i in 0..m {
                    hess[(i, j)] += coeff * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let f_change = (f - f_new).abs();
        eta = eta_new;
        f = f_new;
        g = g_new;
        if f_change <= 1e-12 * f.abs().max(1.0) {
            break;
        }
    }
    Some((eta, -f))
}

/// Fit a GPR to raw inputs/targets over the declared parameter box.
pub fn fit(
    inputs: &[Vec<f64>],
    targets: &[f64],
    input_box: &[[f64; 2]],
    config: &FitConfig,
) -> Result<GprModel, GprError> {
    let n = inputs.len();
    if n < 2 {
        return Err(GprError::TooFewPoints(n));
    }
    assert_eq!(targets.len(), n, "inputs/targets length mismatch");
    let d = input_box.len();
    let tol = 1e-9;
    for (i, p) in inputs.iter().enumerate() {
        if p.len() != d {
            return Err(GprError::QueryDimension {
                want: d,
                got: p.len(),
            });
        }
        for (v, b) in p.iter().zip(input_box) {
            if *v < b[0] - tol * (b[1] - b[0]) || *v > b[1] + tol * (b[1] - b[0]) {
                return Err(GprError::InputOutsideBox { index: i });
            }
        }
    }
    let y_mean = targets.iter().sum::<f64>() / n as f64;
    let var = targets.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
    let mut y_scale = var.sqrt();
    if y_scale <= 1e-12 * y_mean.abs().max(1.0) {
        y_scale = 1.0; // constant targets
    }
    let transforms = Transforms {
        input_box: input_box.to_vec(),
        y_mean,
        y_scale,
    };
    let x = Mat::from_fn(n, d, |i, j| {
        (inputs[i][j] - input_box[j][0]) / (input_box[j][1] - input_box[j][0])
    });
    let y: Vec<f64> = targets.iter().map(|v| (v - y_mean) / y_scale).collect();

    // multi-start: one heuristic + seeded log-uniform draws
    let mut rng = SplitMix64::new(config.seed);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(config.starts.max(1));
    let mut heuristic = vec![0.5_f64.ln(); d];
    heuristic.push(0.0); // σ₁ = 1
    heuristic.push(0.01_f64.ln()); // σ = 1e-2
    starts.push(heuristic);
    while starts.len() < config.starts.max(1) {
        let mut eta: Vec<f64> = (0..d)
            .map(|_| {
                let lo = 0.01_f64.ln();
                let hi = 10.0_f64.ln();
                lo + (hi - lo) * rng.next_f64()
            })
            .collect();
        let lo = 0.1_f64.ln();
        let hi = 10.0_f64.ln();
        eta.push(lo + (hi - lo) * rng.next_f64());
        let lo = 1e-6_f64.ln();
        let hi = 1.0_f64.ln();
        eta.push(lo + (hi - lo) * rng.next_f64());
        starts.push(eta);
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for eta0 in starts {
        if let Some((eta, ll)) = bfgs_maximize(&x, &y, eta0, config.max_iters) {
            let better = match &best {
                None => true,
                Some((_, b)) => ll > *b,
            };
            if better {
                best = Some((eta, ll));
            }
        }
    }
    let (eta, _) = best.ok_or(GprError::AllStartsFailed)?;
    let lengthscales: Vec<f64> = eta[..d].iter().map(|v| v.exp()).collect();
    let sigma1 = eta[d].exp();
    let sigma = eta[d + 1].exp();
    let signal_variance = sigma1 * sigma1;
    let noise_variance = (sigma * sigma).max(NOISE_VARIANCE_FLOOR);
    let ws = evaluate_likelihood(&x, &y, signal_variance, &lengthscales, noise_variance)?;
    let data = GprModelData {
        hyper: Hyperparameters {
            mean_coeffs: ws.theta.clone(),
            signal_variance,
            lengthscales,
            noise_variance,
        },
        x,
        y,
        transforms,
        log_likelihood: ws.log_likelihood,
        jitter: ws.jitter,
    };
    Ok(GprModel {
        chol: ws.chol,
        alpha: ws.alpha,
        data,
    })
}

impl GprModel {
    pub fn data(&self) -> &GprModelData {
        &self.data
    }

    pub fn log_likelihood(&self) -> f64 {
        self.data.log_likelihood
    }

    pub fn dim(&self) -> usize {
        self.data.x.ncols()
    }

    /// Rebuild the factorization from serialized data, verifying that the
    /// stored likelihood is reproduced to 1e-8.
    pub fn from_data(data: GprModelData) -> Result<Self, GprError> {
        let ws = evaluate_likelihood(
            &data.x,
            &data.y,
            data.hyper.signal_variance,
            &data.hyper.lengthscales,
            data.hyper.noise_variance,
        )?;
        if (ws.log_likelihood - data.log_likelihood).abs()
            > 1e-8 * data.log_likelihood.abs().max(1.0)
        {
            return Err(GprError::LikelihoodMismatch {
                stored: data.log_likelihood,
                recomputed: ws.log_likelihood,
            });
        }
        Ok(GprModel {
            chol: ws.chol,
            alpha: ws.alpha,
            data,
        })
    }

    /// Posterior mean and variances at a raw query point. Queries outside
    /// the declared box are allowed; the bands widen there.
    pub fn predict(&self, query: &[f64]) -> Result<Posterior, GprError> {
        let d = self.dim();
        if query.len() != d {
            return Err(GprError::QueryDimension {
                want: d,
                got: query.len(),
            });
        }
        let q = self.data.transforms.normalize(query);
        let n = self.data.x.nrows();
        let hyper = &self.data.hyper;
        let k_star: Vec<f64> = (0..n)
            .map(|i| {
                kernel(
                    &row(&self.data.x, i),
                    &q,
                    hyper.signal_variance,
                    &hyper.lengthscales,
                )
            })
            .collect();
        let mut mean_std = dot(&k_star, &self.alpha) + hyper.mean_coeffs[0];
        for (j, qj) in q.iter().enumerate() {
            mean_std += hyper.mean_coeffs[j + 1] * qj;
        }
        // latent variance via v = L⁻¹ k_*
        let mut v = k_star;
        self.chol.solve_lower(&mut v);
        let latent_std_units = (hyper.signal_variance - dot(&v, &v)).max(0.0);
        let scale2 = self.data.transforms.y_scale * self.data.transforms.y_scale;
        Ok(Posterior {
            mean: self.data.transforms.y_mean + self.data.transforms.y_scale * mean_std,
            latent_variance: latent_std_units * scale2,
            predictive_variance: (latent_std_units + hyper.noise_variance) * scale2,
        })
    }

    /// Latent variance before clamping — used by variance-sanity tests.
    pub fn raw_latent_variance(&self, query: &[f64]) -> f64 {
        let q = self.data.transforms.normalize(query);
        let hyper = &self.data.hyper;
        let n = self.data.x.nrows();
        let k_star: Vec<f64> = (0..n)
            .map(|i| {
                kernel(
                    &row(&self.data.x, i),
                    &q,
                    hyper.signal_variance,
                    &hyper.lengthscales,
                )
            })
            .collect();
        let mut v = k_star;
        self.chol.solve_lower(&mut v);
        hyper.signal_variance - dot(&v, &v)
    }
}
