//! Sample-path generation by three routes: the Volterra discretization, exact
//! Cholesky sampling from the closed-form covariance, and FFT circulant
//! embedding of fractional Gaussian noise followed by iterated integration.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::covariance::{nfbm_cov_closed, NormalizationMode};
use crate::error::{Error, Result};
use crate::grid::{Grid, HurstOrder};
use crate::kernels::KernelMatrix;
use crate::linalg::{cholesky_with_jitter, symmetrize};
use crate::rng::RngStream;

/// How a path came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMethod {
    Volterra,
    Cholesky,
    FftIntegrated,
}

impl std::fmt::Display for SimMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimMethod::Volterra => write!(f, "volterra"),
            SimMethod::Cholesky => write!(f, "cholesky"),
            SimMethod::FftIntegrated => write!(f, "fft"),
        }
    }
}

/// Values of a process on a uniform grid, with provenance metadata.
#[derive(Debug, Clone)]
pub struct SamplePath {
    grid: Grid,
    ho: HurstOrder,
    values: Vec<f64>,
    method: SimMethod,
    stream: RngStream,
    stored_increments: Option<Vec<f64>>,
}

impl SamplePath {
    /// A process path; enforces length m+1 and the start-at-zero invariant.
    pub fn new(
        grid: Grid,
        ho: HurstOrder,
        values: Vec<f64>,
        method: SimMethod,
        stream: RngStream,
        stored_increments: Option<Vec<f64>>,
    ) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::domain(format!(
                "path has {} values for a grid with {} points",
                values.len(),
                grid.steps() + 1
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::domain("process paths start at zero"));
        }
        if let Some(inc) = &stored_increments {
            if inc.len() != grid.steps() {
                return Err(Error::domain("increment count does not match the grid"));
            }
        }
        Ok(Self {
            grid,
            ho,
            values,
            method,
            stream,
            stored_increments,
        })
    }

    /// Wrap arbitrary values (synthetic data, derivatives); no start-at-zero
    /// check.
    pub fn synthetic(grid: Grid, ho: HurstOrder, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::domain("value count does not match the grid"));
        }
        Ok(Self {
            grid,
            ho,
            values,
            method: SimMethod::Volterra,
            stream: RngStream::new(0, 0),
            stored_increments: None,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn ho(&self) -> HurstOrder {
        self.ho
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn method(&self) -> SimMethod {
        self.method
    }

    pub fn stream(&self) -> RngStream {
        self.stream
    }

    pub fn increments(&self) -> Option<&[f64]> {
        self.stored_increments.as_deref()
    }

    pub fn require_increments(&self) -> Result<&[f64]> {
        self.stored_increments
            .as_deref()
            .ok_or(Error::MissingIncrements)
    }
}

/// Draw i.i.d. N(0, dt) increments for the grid.
pub fn draw_increments(grid: Grid, stream: RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    let sd = grid.dt().sqrt();
    (0..grid.steps())
        .map(|_| sd * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect()
}

/// Volterra-discretization sampling: B(t_i) = sum_j K[i][j] dW_j with the
/// increments stored for later cross-checks and inversion.
pub fn simulate_volterra(ho: HurstOrder, grid: Grid, stream: RngStream) -> Result<SamplePath> {
    let matrix = KernelMatrix::cached(ho, grid)?;
    let dw = draw_increments(grid, stream);
    let values = matrix.apply(&dw);
    SamplePath::new(grid, ho, values, SimMethod::Volterra, stream, Some(dw))
}

/// Volterra sampling driven by caller-supplied increments (for same-noise
/// comparisons across orders).
pub fn simulate_volterra_from_increments(
    ho: HurstOrder,
    grid: Grid,
    dw: Vec<f64>,
) -> Result<SamplePath> {
    if dw.len() != grid.steps() {
        return Err(Error::domain("increment count does not match the grid"));
    }
    let matrix = KernelMatrix::cached(ho, grid)?;
    let values = matrix.apply(&dw);
    SamplePath::new(
        grid,
        ho,
        values,
        SimMethod::Volterra,
        RngStream::new(0, 0),
        Some(dw),
    )
}

/// Exact Gaussian sampling at the grid points from the closed-form
/// covariance: values = L z with L the (jittered) Cholesky factor.
pub fn simulate_cholesky(
    ho: HurstOrder,
    grid: Grid,
    stream: RngStream,
    mode: NormalizationMode,
) -> Result<SamplePath> {
    let m = grid.steps();
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for i in 1..=m {
        for k in 1..=i {
            let v = nfbm_cov_closed(ho, grid.point(i), grid.point(k), mode)?;
            cov[(i - 1, k - 1)] = v;
            cov[(k - 1, i - 1)] = v;
        }
    }
    symmetrize(&mut cov);
    let (l, _jitter) = cholesky_with_jitter(&cov)?;
    let mut rng = stream.rng();
    let z = DVector::<f64>::from_iterator(
        m,
        (0..m).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)),
    );
    let x = l * z;
    let mut values = Vec::with_capacity(m + 1);
    values.push(0.0);
    values.extend(x.iter());
    SamplePath::new(grid, ho, values, SimMethod::Cholesky, stream, None)
}

/// Standard fractional Brownian motion on the grid by circulant embedding of
/// fractional Gaussian noise, cumulatively summed.
pub fn simulate_fgn_fft(h: f64, grid: Grid, stream: RngStream) -> Result<SamplePath> {
    let ho = HurstOrder::new(1, h)?;
    let m = grid.steps();
    let len = 2 * m;
    let dt = grid.dt();

    // fGn autocovariance gamma(k) = dt^{2H} (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2
    let scale = dt.powf(2.0 * h);
    let gamma = |k: usize| -> f64 {
        let k = k as f64;
        0.5 * scale
            * ((k + 1.0).abs().powf(2.0 * h) - 2.0 * k.abs().powf(2.0 * h)
                + (k - 1.0).abs().powf(2.0 * h))
    };

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(len);

    // first row of the minimal circulant embedding
    let mut row: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); len];
    for k in 0..=m {
        row[k] = Complex::new(gamma(k), 0.0);
    }
    for k in 1..m {
        row[len - k] = Complex::new(gamma(k), 0.0);
    }
    fft.process(&mut row);

    let eigs: Vec<f64> = row.iter().map(|c| c.re).collect();
    let max_eig = eigs.iter().fold(0.0f64, |a, &b| a.max(b));
    let min_eig = eigs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig < -1e-10 * max_eig {
        return Err(Error::Embedding {
            value: min_eig,
            max: max_eig,
        });
    }
    let eigs: Vec<f64> = eigs.into_iter().map(|l| l.max(0.0)).collect();

    // frequency-domain Gaussian coefficients with conjugate symmetry
    let mut rng = stream.rng();
    let mut draw = || Distribution::<f64>::sample(&StandardNormal, &mut rng);
    let mut coeffs: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); len];
    coeffs[0] = Complex::new((eigs[0] / len as f64).sqrt() * draw(), 0.0);
    coeffs[m] = Complex::new((eigs[m] / len as f64).sqrt() * draw(), 0.0);
    for k in 1..m {
        let amp = (eigs[k] / (2.0 * len as f64)).sqrt();
        let (a, b) = (draw(), draw());
        coeffs[k] = Complex::new(amp * a, amp * b);
        coeffs[len - k] = coeffs[k].conj();
    }
    fft.process(&mut coeffs);

    let mut values = Vec::with_capacity(m + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for c in coeffs.iter().take(m) {
        acc += c.re;
        values.push(acc);
    }
    SamplePath::new(grid, ho, values, SimMethod::FftIntegrated, stream, None)
}

/// Cumulative trapezoidal integral of a path; the result represents the
/// process one order up, (n+1, H+1).
pub fn integrate_path(path: &SamplePath) -> SamplePath {
    let grid = path.grid();
    let dt = grid.dt();
    let v = path.values();
    let mut out = Vec::with_capacity(v.len());
    out.push(0.0);
    let mut acc = 0.0;
    for i in 1..v.len() {
        acc += 0.5 * dt * (v[i - 1] + v[i]);
        out.push(acc);
    }
    SamplePath {
        grid,
        ho: path.ho().integrated(),
        values: out,
        method: SimMethod::FftIntegrated,
        stream: path.stream(),
        stored_increments: None,
    }
}

/// k-fold central finite differences (one-sided at the endpoints); the result
/// represents (n-k, H-k).  Differentiating k >= n times is refused: the
/// would-be result is rougher than a function.
pub fn differentiate_path(path: &SamplePath, k: u32) -> Result<SamplePath> {
    let ho = path.ho().differentiated(k)?;
    if k == 0 {
        return Ok(path.clone());
    }
    let dt = path.grid().dt();
    let mut values = path.values().to_vec();
    for _ in 0..k {
        let prev = values;
        let m = prev.len() - 1;
        let mut next = Vec::with_capacity(prev.len());
        next.push((prev[1] - prev[0]) / dt);
        for i in 1..m {
            next.push((prev[i + 1] - prev[i - 1]) / (2.0 * dt));
        }
        next.push((prev[m] - prev[m - 1]) / dt);
        values = next;
    }
    Ok(SamplePath {
        grid: path.grid(),
        ho,
        values,
        method: path.method(),
        stream: path.stream(),
        stored_increments: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(m: usize) -> Grid {
        Grid::new(1.0, m).unwrap()
    }

    #[test]
    fn brownian_volterra_is_cumsum() {
        let ho = HurstOrder::new(1, 0.5).unwrap();
        let path = simulate_volterra(ho, grid(64), RngStream::new(1, 0)).unwrap();
        let dw = path.increments().unwrap();
        let mut acc = 0.0;
        for (i, &d) in dw.iter().enumerate() {
            acc += d;
            assert_relative_eq!(path.value(i + 1), acc, epsilon = 1e-12);
        }
    }

    #[test]
    fn determinism_same_stream() {
        let ho = HurstOrder::new(2, 1.25).unwrap();
        let a = simulate_volterra(ho, grid(32), RngStream::new(9, 4)).unwrap();
        let b = simulate_volterra(ho, grid(32), RngStream::new(9, 4)).unwrap();
        assert_eq!(a.values(), b.values());
        let c = simulate_fgn_fft(0.7, grid(32), RngStream::new(9, 4)).unwrap();
        let d = simulate_fgn_fft(0.7, grid(32), RngStream::new(9, 4)).unwrap();
        assert_eq!(c.values(), d.values());
        let e = simulate_cholesky(ho, grid(32), RngStream::new(9, 4), NormalizationMode::MgUnit)
            .unwrap();
        let f = simulate_cholesky(ho, grid(32), RngStream::new(9, 4), NormalizationMode::MgUnit)
            .unwrap();
        assert_eq!(e.values(), f.values());
    }

    #[test]
    fn integrate_ramp_exact() {
        let g = grid(16);
        let ho = HurstOrder::new(1, 0.5).unwrap();
        let ones = SamplePath::synthetic(g, ho, vec![1.0; 17]).unwrap();
        let ramp = integrate_path(&ones);
        assert_eq!(ramp.ho().order(), 2);
        for i in 0..=16 {
            assert_relative_eq!(ramp.value(i), g.point(i), epsilon = 1e-14);
        }
    }

    #[test]
    fn differentiate_quadratic_exact_inside() {
        let g = grid(32);
        let ho = HurstOrder::new(2, 1.5).unwrap();
        let vals: Vec<f64> = g.points().map(|t| t * t).collect();
        let p = SamplePath::synthetic(g, ho, vals).unwrap();
        let d = differentiate_path(&p, 1).unwrap();
        for i in 1..32 {
            assert_relative_eq!(d.value(i), 2.0 * g.point(i), epsilon = 1e-10);
        }
        assert_eq!(d.ho().order(), 1);
    }

    #[test]
    fn differentiate_identity_and_refusal() {
        let ho = HurstOrder::new(2, 1.5).unwrap();
        let p = simulate_volterra(ho, grid(16), RngStream::new(3, 0)).unwrap();
        let same = differentiate_path(&p, 0).unwrap();
        assert_eq!(same.values(), p.values());
        assert!(differentiate_path(&p, 2).is_err());
    }

    #[test]
    fn integrate_then_differentiate_round_trip() {
        // smooth synthetic path: the round trip is second-order accurate inside
        let g = grid(64);
        let ho = HurstOrder::new(1, 0.5).unwrap();
        let vals: Vec<f64> = g.points().map(|t| t * t).collect();
        let p = SamplePath::synthetic(g, ho, vals).unwrap();
        let back = differentiate_path(&integrate_path(&p), 1).unwrap();
        let dt2 = g.dt() * g.dt();
        for i in 1..64 {
            assert!((back.value(i) - p.value(i)).abs() < 2.0 * dt2);
        }
        // and algebraically the composition is the three-point average
        for i in 1..64 {
            let expect = 0.25 * (p.value(i + 1) + 2.0 * p.value(i) + p.value(i - 1));
            assert_relative_eq!(back.value(i), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn fft_path_shape() {
        let p = simulate_fgn_fft(0.75, grid(128), RngStream::new(11, 0)).unwrap();
        assert_eq!(p.values().len(), 129);
        assert_eq!(p.value(0), 0.0);
        assert_eq!(p.ho().order(), 1);
        assert!(p.increments().is_none());
        assert!(p.require_increments().is_err());
    }
}
