//! Conditional law of the process given its own past, conditional
//! expectations of functionals, and an independent Gaussian-conditioning
//! oracle.
//!
//! Both the prediction formulas and the oracle condition on the discretized
//! driving increments on [0, u], which is exactly the observed past since the
//! filtrations of the process and its driving noise coincide.  The
//! conditional covariance is the tail Gram sum over unobserved cells (the
//! proof-side form of the covariance identity), so full information leaves
//! exactly zero variance.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::HurstOrder;
use crate::kernels::{invert_kernel_matrix, kernel_cell_averages, KernelMatrix};
use crate::linalg::cholesky_with_jitter;
use crate::quad::gauss_hermite;
use crate::rng::RngStream;
use crate::simulation::SamplePath;

/// Conditional law of the process at target times given the past up to u:
/// random mean (a function of the observed path), deterministic covariance.
#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    condition_time: f64,
    target_times: Vec<f64>,
    mean: Vec<f64>,
    covariance: DMatrix<f64>,
}

impl ConditionalLaw {
    pub fn condition_time(&self) -> f64 {
        self.condition_time
    }

    pub fn target_times(&self) -> &[f64] {
        &self.target_times
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }
}

/// Conditional mean and covariance of the process at the target times given
/// the driving increments on [0, u].
///
/// mean_i = B(u) + sum_{cells j <= u} [K(t_i, j) - K(u, j)] dW_j,
/// cov_ik = dt sum_{cells j > u} K(t_i, j) K(t_k, j),
/// with K(t, j) the cell-averaged kernel and dW recovered by triangular
/// inversion when the path does not carry its increments.
pub fn predict(
    ho: HurstOrder,
    path: &SamplePath,
    u: f64,
    targets: &[f64],
) -> Result<ConditionalLaw> {
    let grid = path.grid();
    if path.ho() != ho {
        return Err(Error::domain("path order does not match the requested order"));
    }
    let q = grid
        .index_of(u)
        .ok_or_else(|| Error::domain(format!("condition time {u} is not a grid point")))?;
    if targets.is_empty() {
        return Err(Error::domain("no target times"));
    }
    for w in targets.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::domain("target times must be strictly increasing"));
        }
    }
    if targets[0] <= u {
        return Err(Error::domain("targets must lie strictly beyond the condition time"));
    }
    if *targets.last().unwrap() > grid.horizon() * (1.0 + 1e-12) {
        return Err(Error::domain("targets must lie within the horizon"));
    }

    let matrix = KernelMatrix::cached(ho, grid)?;
    let dw_owned;
    let dw: &[f64] = match path.increments() {
        Some(inc) => inc,
        None => {
            dw_owned = invert_kernel_matrix(&matrix, path)?;
            &dw_owned
        }
    };

    // cell averages of k^(n)(t, .) for each target (matrix rows at grid points)
    let rows: Vec<Vec<f64>> = targets
        .iter()
        .map(|&t| match grid.index_of(t) {
            Some(i) if i >= 1 => Ok(matrix.row(i).to_vec()),
            _ => kernel_cell_averages(ho, grid, t),
        })
        .collect::<Result<_>>()?;

    let row_u: &[f64] = if q >= 1 { matrix.row(q) } else { &[] };
    let b_u = path.value(q);

    let mean: Vec<f64> = rows
        .iter()
        .map(|row| {
            let drift: f64 = (0..q).map(|j| (row[j] - row_u[j]) * dw[j]).sum();
            b_u + drift
        })
        .collect();

    let dt = grid.dt();
    let k = targets.len();
    let mut covariance = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for l in 0..=i {
            let upto = rows[i].len().min(rows[l].len());
            let s: f64 = (q..upto).map(|j| rows[i][j] * rows[l][j]).sum();
            covariance[(i, l)] = s * dt;
            covariance[(l, i)] = s * dt;
        }
    }

    Ok(ConditionalLaw {
        condition_time: u,
        target_times: targets.to_vec(),
        mean,
        covariance,
    })
}

/// Brute-force conditional law of a joint Gaussian vector by Schur
/// complement: mu = S_to S_oo^{-1} y, Sigma = S_tt - S_to S_oo^{-1} S_ot.
pub fn gaussian_conditioning_oracle(
    joint_cov: &DMatrix<f64>,
    observed_idx: &[usize],
    observed_vals: &[f64],
    target_idx: &[usize],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if observed_idx.len() != observed_vals.len() {
        return Err(Error::domain("observed index/value length mismatch"));
    }
    let (no, nt) = (observed_idx.len(), target_idx.len());
    if no == 0 {
        // unconditional law
        let mut tt = DMatrix::zeros(nt, nt);
        for (a, &i) in target_idx.iter().enumerate() {
            for (b, &j) in target_idx.iter().enumerate() {
                tt[(a, b)] = joint_cov[(i, j)];
            }
        }
        return Ok((DVector::zeros(nt), tt));
    }
    let mut oo = DMatrix::zeros(no, no);
    for (a, &i) in observed_idx.iter().enumerate() {
        for (b, &j) in observed_idx.iter().enumerate() {
            oo[(a, b)] = joint_cov[(i, j)];
        }
    }
    let mut to = DMatrix::zeros(nt, no);
    for (a, &i) in target_idx.iter().enumerate() {
        for (b, &j) in observed_idx.iter().enumerate() {
            to[(a, b)] = joint_cov[(i, j)];
        }
    }
    let mut tt = DMatrix::zeros(nt, nt);
    for (a, &i) in target_idx.iter().enumerate() {
        for (b, &j) in target_idx.iter().enumerate() {
            tt[(a, b)] = joint_cov[(i, j)];
        }
    }

    // observed block factorized with the shared jitter ladder
    let (l, _jitter) = cholesky_with_jitter(&oo)?;
    let chol = nalgebra::Cholesky::pack_dirty(l);
    let y = DVector::from_column_slice(observed_vals);
    let alpha = chol.solve(&y); // S_oo^{-1} y
    let mean = &to * alpha;
    let solved = chol.solve(&to.transpose()); // S_oo^{-1} S_ot
    let cov = &tt - &to * solved;
    Ok((mean, cov))
}

/// E[f(X)] for X ~ N(mean_i, var_i) under the conditional law, by 64-node
/// Gauss-Hermite quadrature; exact f(mean) when the variance vanishes.
pub fn predict_functional(
    law: &ConditionalLaw,
    f: impl Fn(f64) -> f64,
    target_index: usize,
) -> Result<f64> {
    predict_functional_nodes(law, f, target_index, 64)
}

pub(crate) fn predict_functional_nodes(
    law: &ConditionalLaw,
    f: impl Fn(f64) -> f64,
    target_index: usize,
    nodes: usize,
) -> Result<f64> {
    if target_index >= law.target_times.len() {
        return Err(Error::domain("target index out of range"));
    }
    let mean = law.mean[target_index];
    let var = law.variance(target_index);
    if var <= 0.0 {
        return Ok(f(mean));
    }
    let rule = gauss_hermite(nodes);
    let sd = (2.0 * var).sqrt();
    let inv = 1.0 / std::f64::consts::PI.sqrt();
    Ok(rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| w * f(mean + sd * x))
        .sum::<f64>()
        * inv)
}

/// Monte Carlo estimate (value, standard error) of E[f(X)] for X drawn from
/// the full conditional law; deterministic given (stream, samples).
pub fn predict_functional_multi(
    law: &ConditionalLaw,
    f: impl Fn(&[f64]) -> f64,
    stream: RngStream,
    samples: usize,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let k = law.target_times.len();
    let (l, _jitter) = cholesky_with_jitter(&law.covariance)?;
    let mut rng = stream.rng();
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    let mut x = vec![0.0; k];
    let mut z = vec![0.0; k];
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..k {
            let mut v = law.mean[i];
            for j in 0..=i {
                v += l[(i, j)] * z[j];
            }
            x[i] = v;
        }
        let v = f(&x);
        acc += v;
        acc2 += v * v;
    }
    let n = samples as f64;
    let mean = acc / n;
    let var = (acc2 / n - mean * mean).max(0.0);
    let se = (var / n).sqrt();
    Ok((mean, se))
}
