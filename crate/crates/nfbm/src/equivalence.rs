//! Representation of processes equivalent in law to the nth-order process:
//! the Volterra-drift transform of the driving noise, resolvent kernels,
//! log-likelihood ratios, and drift recovery.
//!
//! Everything is discretized non-anticipatively: inner sums run strictly over
//! earlier cells and drift/kernel tables are sampled at left endpoints, so
//! the likelihood keeps its exact martingale normalization at any grid size.

use crate::error::{Error, Result};
use crate::grid::{Grid, HurstOrder};
use crate::kernels::KernelMatrix;
use crate::rng::RngStream;
use crate::simulation::{SamplePath, SimMethod};

/// Drift pair (a, b): drift density plus Volterra kernel, sampled once onto
/// the grid at construction (left endpoints; b on the strict lower triangle).
#[derive(Debug, Clone)]
pub struct DriftModel {
    grid: Grid,
    /// a(t_{j-1}) for j = 1..=m.
    drift: Vec<f64>,
    /// kernel[j-1][l-1] = b(t_{j-1}, t_{l-1}) for 1 <= l < j <= m.
    kernel: Vec<Vec<f64>>,
}

impl DriftModel {
    pub fn from_fns(
        grid: Grid,
        a: impl Fn(f64) -> f64,
        b: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let m = grid.steps();
        let drift: Vec<f64> = (1..=m).map(|j| a(grid.point(j - 1))).collect();
        let kernel: Vec<Vec<f64>> = (1..=m)
            .map(|j| {
                (1..j)
                    .map(|l| b(grid.point(j - 1), grid.point(l - 1)))
                    .collect()
            })
            .collect();
        Self::from_tables(grid, drift, kernel)
    }

    pub fn from_tables(grid: Grid, drift: Vec<f64>, kernel: Vec<Vec<f64>>) -> Result<Self> {
        let m = grid.steps();
        if drift.len() != m || kernel.len() != m {
            return Err(Error::domain("drift model tables do not match the grid"));
        }
        for (j, row) in kernel.iter().enumerate() {
            if row.len() != j {
                return Err(Error::domain(
                    "kernel table must be strictly lower triangular",
                ));
            }
        }
        if drift.iter().any(|v| !v.is_finite())
            || kernel.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::domain("drift model values must be finite"));
        }
        Ok(Self {
            grid,
            drift,
            kernel,
        })
    }

    pub fn zero(grid: Grid) -> Self {
        Self::from_fns(grid, |_| 0.0, |_, _| 0.0).expect("zero model is valid")
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn drift_table(&self) -> &[f64] {
        &self.drift
    }

    pub fn kernel_table(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    /// theta_j = sum_{l < j} b(s_j, u_l) dW_l + a(s_j), the non-anticipating
    /// integrand of the transform, for all j.
    fn theta(&self, dw: &[f64]) -> Vec<f64> {
        self.kernel
            .iter()
            .zip(&self.drift)
            .map(|(row, a)| row.iter().zip(dw).map(|(b, w)| b * w).sum::<f64>() + a)
            .collect()
    }
}

fn brownian_order() -> HurstOrder {
    HurstOrder::new(1, 0.5).expect("valid")
}

/// The Volterra-drift transform of a Brownian path:
/// W~(t_i) = W(t_i) - sum_{s <= t_i} [sum_{u < s} b(s,u) dW_u] dt
///         + sum_{s <= t_i} a(s) dt.
pub fn hitsuda_transform(w_path: &SamplePath, model: &DriftModel) -> Result<SamplePath> {
    let grid = w_path.grid();
    if grid != model.grid {
        return Err(Error::domain("model grid does not match the path grid"));
    }
    let dw = w_path.require_increments()?;
    let dt = grid.dt();
    let theta = model.theta(dw);
    let mut inc = Vec::with_capacity(dw.len());
    for (j, &w) in dw.iter().enumerate() {
        // drift enters with +, the kernel term with -
        inc.push(w - dt * (theta[j] - model.drift[j]) + dt * model.drift[j]);
    }
    let mut values = Vec::with_capacity(dw.len() + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for &d in &inc {
        acc += d;
        values.push(acc);
    }
    SamplePath::new(
        grid,
        brownian_order(),
        values,
        w_path.method(),
        w_path.stream(),
        Some(inc),
    )
}

/// Inverse transform via the resolvent kernel:
/// dW_j = (dW~_j - a_j dt) - dt sum_{l<j} b*(s_j, u_l) (dW~_l - a_l dt).
///
/// This is the printed inverse with its sign fixed; the round trip against
/// `hitsuda_transform` is validated numerically.
pub fn hitsuda_inverse(wtilde: &SamplePath, model: &DriftModel) -> Result<SamplePath> {
    let grid = wtilde.grid();
    if grid != model.grid {
        return Err(Error::domain("model grid does not match the path grid"));
    }
    let dwt = wtilde.require_increments()?;
    let dt = grid.dt();
    let rk = resolvent(model)?;
    let centered: Vec<f64> = dwt
        .iter()
        .zip(&model.drift)
        .map(|(d, a)| d - a * dt)
        .collect();
    let mut inc = Vec::with_capacity(dwt.len());
    for j in 0..dwt.len() {
        let conv: f64 = rk.kernel[j].iter().zip(&centered).map(|(b, c)| b * c).sum();
        inc.push(centered[j] - dt * conv);
    }
    let mut values = Vec::with_capacity(inc.len() + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for &d in &inc {
        acc += d;
        values.push(acc);
    }
    SamplePath::new(
        grid,
        brownian_order(),
        values,
        wtilde.method(),
        wtilde.stream(),
        Some(inc),
    )
}

/// Path of the process equivalent in law to B^(n): the kernel matrix applied
/// to the transformed increments.
pub fn nfbm_equivalent_path(
    w_path: &SamplePath,
    model: &DriftModel,
    ho: HurstOrder,
) -> Result<SamplePath> {
    let wt = hitsuda_transform(w_path, model)?;
    let matrix = KernelMatrix::cached(ho, w_path.grid())?;
    let inc = wt.require_increments()?.to_vec();
    let values = matrix.apply(&inc);
    SamplePath::new(
        w_path.grid(),
        ho,
        values,
        w_path.method(),
        w_path.stream(),
        Some(inc),
    )
}

/// Resolvent kernel b* of b, solving b* + b = b . b* (triangle convolution
/// with dt weight), by direct triangular recursion; exact for the
/// discretization.
pub fn resolvent(model: &DriftModel) -> Result<DriftModel> {
    let m = model.grid.steps();
    let dt = model.grid.dt();
    let b = &model.kernel;
    let mut star: Vec<Vec<f64>> = (0..m).map(|j| vec![0.0; j]).collect();
    for j in 0..m {
        for l in 0..j {
            // b*[j][l] = -b[j][l] + dt sum_{l < r < j} b[j][r] b*[r][l]
            let mut conv = 0.0;
            for r in (l + 1)..j {
                conv += b[j][r] * star[r][l];
            }
            star[j][l] = -b[j][l] + dt * conv;
        }
    }
    DriftModel::from_tables(model.grid, vec![0.0; m], star)
}

/// Resolvent by the truncated Neumann series sum_k (-1) b^{conv k}; kept as a
/// cross-check of the triangular solve, mirroring the series construction.
pub fn resolvent_neumann(model: &DriftModel, tol: f64) -> Result<DriftModel> {
    let m = model.grid.steps();
    let dt = model.grid.dt();
    let b = &model.kernel;
    let mut term: Vec<Vec<f64>> = b.clone();
    let mut acc: Vec<Vec<f64>> = (0..m).map(|j| vec![0.0; j]).collect();
    let max_terms = 10 * m;
    for _ in 0..max_terms {
        let mut max_mag = 0.0f64;
        for (a_row, t_row) in acc.iter_mut().zip(&term) {
            for (a, &t) in a_row.iter_mut().zip(t_row) {
                *a -= t;
                max_mag = max_mag.max(t.abs());
            }
        }
        if max_mag < tol {
            return DriftModel::from_tables(model.grid, vec![0.0; m], acc);
        }
        // next convolution power: (b . term)(j, l) = dt sum_r b[j][r] term[r][l]
        let mut next: Vec<Vec<f64>> = (0..m).map(|j| vec![0.0; j]).collect();
        for j in 0..m {
            for l in 0..j {
                let mut conv = 0.0;
                for r in (l + 1)..j {
                    conv += b[j][r] * term[r][l];
                }
                next[j][l] = dt * conv;
            }
        }
        term = next;
    }
    Err(Error::QuadratureAccuracy {
        achieved: f64::NAN,
        target: tol,
    })
}

/// ell(t) = sum_{s <= t} theta_s dW_s - (1/2) sum_{s <= t} theta_s^2 dt with
/// strictly left-point (non-anticipating) inner sums.
pub fn log_likelihood(w_path: &SamplePath, model: &DriftModel, t: f64) -> Result<f64> {
    let grid = w_path.grid();
    if grid != model.grid {
        return Err(Error::domain("model grid does not match the path grid"));
    }
    let i_t = grid
        .index_of(t)
        .ok_or_else(|| Error::domain(format!("time {t} is not a grid point")))?;
    let dw = w_path.require_increments()?;
    let dt = grid.dt();
    let theta = model.theta(dw);
    let mut acc = 0.0;
    for j in 0..i_t {
        acc += theta[j] * dw[j] - 0.5 * theta[j] * theta[j] * dt;
    }
    Ok(acc)
}

/// ell at every grid point in one sweep.
pub fn log_likelihood_path(w_path: &SamplePath, model: &DriftModel) -> Result<Vec<f64>> {
    let grid = w_path.grid();
    if grid != model.grid {
        return Err(Error::domain("model grid does not match the path grid"));
    }
    let dw = w_path.require_increments()?;
    let dt = grid.dt();
    let theta = model.theta(dw);
    let mut out = Vec::with_capacity(dw.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for (j, &w) in dw.iter().enumerate() {
        acc += theta[j] * w - 0.5 * theta[j] * theta[j] * dt;
        out.push(acc);
    }
    Ok(out)
}

/// Least-squares slope through the origin over the first `window` grid
/// points: the one-sided derivative at 0, which identifies a linear drift
/// added to a process of order n >= 2.
pub fn recover_drift(path: &SamplePath, window: usize) -> Result<f64> {
    if path.ho().order() < 2 {
        return Err(Error::UnsupportedOrder(
            "drift recovery from the derivative at 0 needs order n >= 2".into(),
        ));
    }
    let grid = path.grid();
    if window < 1 || window > grid.steps() {
        return Err(Error::domain("window must be between 1 and m"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..=window {
        let t = grid.point(i);
        num += t * path.value(i);
        den += t * t;
    }
    Ok(num / den)
}

/// The default recovery window, ceil(sqrt(m)): wide enough to average the
/// noise, short enough to keep the curvature bias down.
pub fn default_drift_window(grid: Grid) -> usize {
    (grid.steps() as f64).sqrt().ceil() as usize
}

/// Recovered driving noise under the likelihood-tilted measure: the exact
/// discrete statistic whose reweighted mean vanishes (Girsanov consistency).
pub fn tilted_driving_noise(w_path: &SamplePath, model: &DriftModel) -> Result<SamplePath> {
    let grid = w_path.grid();
    let dw = w_path.require_increments()?;
    let dt = grid.dt();
    let theta = model.theta(dw);
    let inc: Vec<f64> = dw
        .iter()
        .zip(&theta)
        .map(|(w, th)| w - th * dt)
        .collect();
    let mut values = Vec::with_capacity(inc.len() + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for &d in &inc {
        acc += d;
        values.push(acc);
    }
    SamplePath::new(
        grid,
        brownian_order(),
        values,
        SimMethod::Volterra,
        RngStream::new(0, 0),
        Some(inc),
    )
}
