//! The dual operator carrying integrands for the nth-order process to
//! integrands for the driving Brownian motion, Wiener integrals over step
//! functions, and the induced inner product.

use std::sync::Arc;

use crate::covariance::{nfbm_cov_closed, NormalizationMode};
use crate::error::{Error, Result};
use crate::grid::{Grid, HurstOrder};
use crate::kernels::{base_profile_for, profile_for, KernelProfile};
use crate::quad::{graded_both, graded_lower};
use crate::simulation::SamplePath;

/// Piecewise-constant integrand: value a_k on (b_{k-1}, b_k], zero beyond.
#[derive(Debug, Clone)]
pub struct StepFunction {
    /// 0 = b_0 < b_1 < ... < b_K.
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::domain(
                "step function needs K values and K+1 breakpoints",
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::domain("step function breakpoints start at 0"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("step values must be finite"));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    /// The indicator 1_{[0, t)}.
    pub fn indicator(t: f64) -> Result<Self> {
        Self::new(vec![0.0, t], vec![1.0])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return if u == 0.0 { self.values[0] } else { 0.0 };
        }
        match self
            .breakpoints
            .iter()
            .position(|&b| u <= b)
        {
            Some(0) => self.values[0],
            Some(k) => self.values[k - 1],
            None => 0.0,
        }
    }

    /// L2 norm squared of the step function itself.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(a, w)| a * a * (w[1] - w[0]))
            .sum()
    }
}

/// Piecewise polynomial in local coordinates, used for the iterated
/// right-tail integrals of a step function.
#[derive(Debug, Clone)]
struct PiecewisePoly {
    breaks: Vec<f64>,
    /// coefs[i][k] multiplies (s - breaks[i])^k on (breaks[i], breaks[i+1]].
    coefs: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    fn from_step(f: &StepFunction, horizon: f64) -> Self {
        let mut breaks = f.breakpoints.clone();
        let mut coefs: Vec<Vec<f64>> = f.values.iter().map(|&a| vec![a]).collect();
        if f.support_end() < horizon {
            breaks.push(horizon);
            coefs.push(vec![0.0]);
        }
        Self { breaks, coefs }
    }

    /// g -> (s -> int_s^T g), one degree up, continuous.
    fn integrate_from_right(&self) -> Self {
        let mut coefs = vec![Vec::new(); self.coefs.len()];
        let mut tail = 0.0;
        for i in (0..self.coefs.len()).rev() {
            let w = self.breaks[i + 1] - self.breaks[i];
            let c = &self.coefs[i];
            // int_s^{x_{i+1}} = [tail at x_{i+1}] + sum c_k (w^{k+1} - xi^{k+1})/(k+1)
            let mut piece = vec![0.0; c.len() + 1];
            let mut full = 0.0;
            for (k, &ck) in c.iter().enumerate() {
                full += ck * w.powi(k as i32 + 1) / (k + 1) as f64;
                piece[k + 1] = -ck / (k + 1) as f64;
            }
            piece[0] = tail + full;
            tail += full;
            coefs[i] = piece;
        }
        Self {
            breaks: self.breaks.clone(),
            coefs,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= self.breaks[0] || s > *self.breaks.last().unwrap() {
            return 0.0;
        }
        let i = match self.breaks.iter().position(|&b| s <= b) {
            Some(0) | None => 0,
            Some(k) => k - 1,
        };
        let xi = s - self.breaks[i];
        self.coefs[i]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * xi + c)
    }
}

enum ImageKind {
    /// n = 1: exact sums of kernel differences (the fundamental theorem
    /// applied to the v-derivative inside the defining expression).
    Fbm { profile: Arc<KernelProfile> },
    /// n >= 2: int_u^T k_h(s, u) g(s) ds with g the (n-2)-fold right-tail
    /// integral of f (repeated-integration collapse of the kernel factor).
    Higher {
        base: Arc<KernelProfile>,
        iterated: PiecewisePoly,
    },
}

/// The image k^(n)* f as an evaluable function on (0, T).
pub struct DualImage {
    ho: HurstOrder,
    horizon: f64,
    f: StepFunction,
    kind: ImageKind,
}

/// k_H(t, u) extended by the diagonal limit: 0 for H > 1/2, infinite
/// otherwise (only reachable when evaluating exactly at a breakpoint).
fn kernel_or_limit(profile: &KernelProfile, t: f64, u: f64) -> f64 {
    if u >= t {
        if profile.base_index() > 0.5 || profile.order() > 1 {
            0.0
        } else if profile.base_index() == 0.5 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        profile.eval_k(t, u)
    }
}

impl DualImage {
    pub fn ho(&self) -> HurstOrder {
        self.ho
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Evaluate the image at u in (0, T).
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < self.horizon) {
            return Err(Error::domain(format!(
                "dual image evaluated at {u} outside (0, {})",
                self.horizon
            )));
        }
        Ok(match &self.kind {
            ImageKind::Fbm { profile } => self.eval_fbm_general(profile, u),
            ImageKind::Higher { base, iterated } => self.eval_higher(base, iterated, u),
        })
    }

    /// Segments of (u, T] with the integrand value on each, including the
    /// trailing zero piece beyond the support of f.
    fn segments_beyond(&self, u: f64) -> Vec<(f64, f64, f64)> {
        let mut segs = Vec::with_capacity(self.f.values.len() + 1);
        let mut prev = u;
        for (idx, &b) in self.f.breakpoints.iter().enumerate().skip(1) {
            if b <= u {
                continue;
            }
            let end = b.min(self.horizon);
            if end > prev {
                segs.push((prev, end, self.f.values[idx - 1]));
                prev = end;
            }
            if prev >= self.horizon {
                break;
            }
        }
        if prev < self.horizon {
            segs.push((prev, self.horizon, 0.0));
        }
        segs
    }

    /// General form: k(T,u) f(u) + sum over pieces of
    /// [f_piece - f(u)] [k(piece_end, u) - k(piece_start, u)]; the integral
    /// against the kernel's time derivative telescopes exactly.
    fn eval_fbm_general(&self, profile: &KernelProfile, u: f64) -> f64 {
        let fu = self.f.eval(u);
        let mut acc = profile.eval_k(self.horizon, u) * fu;
        for (x, y, v) in self.segments_beyond(u) {
            if v != fu {
                let kx = kernel_or_limit(profile, x, u);
                let ky = kernel_or_limit(profile, y, u);
                acc += (v - fu) * (ky - kx);
            }
        }
        acc
    }

    /// Simplified form valid for n = 1, H > 1/2:
    /// sum over pieces of f_piece [k(piece_end, u) - k(piece_start, u)].
    pub fn eval_simplified(&self, u: f64) -> Result<f64> {
        let profile = match &self.kind {
            ImageKind::Fbm { profile } => profile,
            ImageKind::Higher { .. } => {
                return Err(Error::UnsupportedOrder(
                    "the simplified form applies to the order-1 operator".into(),
                ))
            }
        };
        if profile.base_index() <= 0.5 {
            return Err(Error::domain(
                "the simplified form requires H > 1/2 (k(t,t) = 0)",
            ));
        }
        if !(u > 0.0 && u < self.horizon) {
            return Err(Error::domain("evaluation point outside (0, T)"));
        }
        let mut acc = 0.0;
        for (x, y, v) in self.segments_beyond(u) {
            if v != 0.0 {
                let kx = kernel_or_limit(profile, x, u); // k(u, u) = 0 here
                let ky = kernel_or_limit(profile, y, u);
                acc += v * (ky - kx);
            }
        }
        Ok(acc)
    }

    fn eval_higher(&self, base: &KernelProfile, g: &PiecewisePoly, u: f64) -> f64 {
        let h = base.base_index();
        let mut acc = 0.0;
        let mut lo = u;
        let mut first = true;
        for &b in &g.breaks[1..] {
            let hi = b.min(self.horizon);
            if hi <= lo {
                continue;
            }
            let out = if first {
                // weight (s-u)^{h-1/2} stripped off the base kernel
                graded_lower(lo, hi, h - 0.5, Some(u), 1e-8, |s| {
                    let stripped = if base.flat() {
                        1.0
                    } else {
                        s.powf(h - 0.5) * base.eval_f(u / s) * (s - u).powf(0.5 - h)
                    };
                    stripped * g.eval(s)
                })
            } else {
                graded_lower(lo, hi, 0.0, Some(lo - u), 1e-8, |s| {
                    base.eval_k(s, u) * g.eval(s)
                })
            };
            acc += out.value;
            first = false;
            lo = hi;
            if lo >= self.horizon {
                break;
            }
        }
        acc
    }
}

/// The order-1 dual operator on step functions: the defining expression
/// k_H(T,u) f(u) + int_u^T [f(v) - f(u)] dk_H(v,u)/dv dv, with the integral
/// telescoped exactly through the kernel antiderivative.
pub fn dual_operator_fbm(f: &StepFunction, h: f64, horizon: f64) -> Result<DualImage> {
    let ho = HurstOrder::new(1, h)?;
    if f.support_end() > horizon * (1.0 + 1e-12) {
        return Err(Error::domain("step function support exceeds the horizon"));
    }
    Ok(DualImage {
        ho,
        horizon,
        f: f.clone(),
        kind: ImageKind::Fbm {
            profile: profile_for(ho)?,
        },
    })
}

/// The order-n (n >= 2) dual operator on step functions,
/// u -> int_u^T f(t) k^{(n-1)}_{H-1}(t, u) dt, via the repeated-integration
/// collapse onto the base kernel.
pub fn dual_operator_nfbm(f: &StepFunction, ho: HurstOrder, horizon: f64) -> Result<DualImage> {
    if ho.order() < 2 {
        return Err(Error::UnsupportedOrder(
            "the L2 representation needs n >= 2; use dual_operator_fbm for n = 1".into(),
        ));
    }
    if f.support_end() > horizon * (1.0 + 1e-12) {
        return Err(Error::domain("step function support exceeds the horizon"));
    }
    let base = base_profile_for(ho)?;
    let mut iterated = PiecewisePoly::from_step(f, horizon);
    for _ in 0..(ho.order() - 2) {
        iterated = iterated.integrate_from_right();
    }
    Ok(DualImage {
        ho,
        horizon,
        f: f.clone(),
        kind: ImageKind::Higher { base, iterated },
    })
}

/// The dual operator for any order.
pub fn dual_operator(f: &StepFunction, ho: HurstOrder, horizon: f64) -> Result<DualImage> {
    if ho.order() == 1 {
        dual_operator_fbm(f, ho.hurst(), horizon)
    } else {
        dual_operator_nfbm(f, ho, horizon)
    }
}

/// L2([0,T]) inner product of two dual images of the same (ho, T).
pub fn dual_l2_inner(a: &DualImage, b: &DualImage) -> Result<f64> {
    if a.ho != b.ho || a.horizon != b.horizon {
        return Err(Error::domain("dual images live on different spaces"));
    }
    let horizon = a.horizon;
    // merge breakpoints of both integrands
    let mut cuts: Vec<f64> = a
        .f
        .breakpoints
        .iter()
        .chain(b.f.breakpoints.iter())
        .copied()
        .filter(|&x| x > 0.0 && x < horizon)
        .collect();
    cuts.push(horizon);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);

    let sigma = (a.ho.base_index() - 0.5).abs();
    // order-1 images diverge like (y-u)^{H-1/2} at piece tops when H < 1/2
    let alpha_end = if a.ho.order() == 1 {
        (2.0 * (a.ho.hurst() - 0.5)).min(0.0)
    } else {
        0.0
    };

    let mut total = 0.0;
    let mut lo = 0.0;
    for &hi in &cuts {
        let beta = if lo == 0.0 { -2.0 * sigma } else { 0.0 };
        let out = graded_both(lo, hi, beta, alpha_end, 1e-8, |u| {
            let va = a.eval(u).expect("quadrature nodes are interior");
            let vb = b.eval(u).expect("quadrature nodes are interior");
            va * vb * (u - lo).powf(-beta) * (hi - u).powf(-alpha_end)
        });
        if !out.converged {
            return Err(Error::QuadratureAccuracy {
                achieved: out.rel_err(),
                target: 1e-8,
            });
        }
        total += out.value;
        lo = hi;
    }
    Ok(total)
}

/// ||k^(n)* f||^2 in L2([0, T]).
pub fn dual_l2_norm_sq(image: &DualImage) -> Result<f64> {
    dual_l2_inner(image, image)
}

/// Inner product of step functions in the Hilbert space generated by the
/// covariance: bilinear expansion over indicator differences.
pub fn inner_product_h(
    f: &StepFunction,
    g: &StepFunction,
    ho: HurstOrder,
    mode: NormalizationMode,
) -> Result<f64> {
    let r = |t: f64, s: f64| nfbm_cov_closed(ho, t, s, mode);
    let mut acc = 0.0;
    for (af, wf) in f.values.iter().zip(f.breakpoints.windows(2)) {
        for (ag, wg) in g.values.iter().zip(g.breakpoints.windows(2)) {
            let block = r(wf[1], wg[1])? - r(wf[1], wg[0])? - r(wf[0], wg[1])? + r(wf[0], wg[0])?;
            acc += af * ag * block;
        }
    }
    Ok(acc)
}

/// Precomputed dual-image weights on the cell midpoints of a grid, for
/// integrating many paths against the same integrand.
pub struct WienerIntegrator {
    weights: Vec<f64>,
    grid: Grid,
    ho: HurstOrder,
}

impl WienerIntegrator {
    pub fn new(f: &StepFunction, ho: HurstOrder, grid: Grid) -> Result<Self> {
        let image = dual_operator(f, ho, grid.horizon())?;
        let weights = (1..=grid.steps())
            .map(|j| image.eval(grid.midpoint(j)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            weights,
            grid,
            ho,
        })
    }

    /// sum_j (k* f)(midpoint_j) dW_j over the path's stored increments.
    pub fn integrate(&self, path: &SamplePath) -> Result<f64> {
        if path.grid() != self.grid || path.ho() != self.ho {
            return Err(Error::domain("path does not match the integrator grid/order"));
        }
        let dw = path.require_increments()?;
        Ok(self.weights.iter().zip(dw).map(|(w, d)| w * d).sum())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Wiener integral of a step function against a sample path, discretized as
/// the driving-noise integral of the dual image.
pub fn wiener_integral_nfbm(f: &StepFunction, path: &SamplePath) -> Result<f64> {
    WienerIntegrator::new(f, path.ho(), path.grid())?.integrate(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{mg_kernel, nfbm_kernel};
    use approx::assert_relative_eq;

    #[test]
    fn step_function_validation_and_eval() {
        assert!(StepFunction::new(vec![0.0, 1.0], vec![]).is_err());
        assert!(StepFunction::new(vec![0.1, 1.0], vec![1.0]).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0, 0.5], vec![1.0, 2.0]).is_err());
        let f = StepFunction::new(vec![0.0, 0.25, 0.75], vec![2.0, -1.0]).unwrap();
        assert_eq!(f.eval(0.0), 2.0);
        assert_eq!(f.eval(0.1), 2.0);
        assert_eq!(f.eval(0.25), 2.0);
        assert_eq!(f.eval(0.3), -1.0);
        assert_eq!(f.eval(0.75), -1.0);
        assert_eq!(f.eval(0.8), 0.0);
        assert_relative_eq!(f.l2_norm_sq(), 4.0 * 0.25 + 1.0 * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn indicator_image_is_the_kernel() {
        // k* 1_t = k(t, .) on (0, t), 0 on [t, T)
        for &h in &[0.3, 0.75] {
            let f = StepFunction::indicator(0.6).unwrap();
            let img = dual_operator_fbm(&f, h, 1.0).unwrap();
            for &u in &[0.1, 0.35, 0.59] {
                assert_relative_eq!(
                    img.eval(u).unwrap(),
                    mg_kernel(h, 0.6, u).unwrap(),
                    max_relative = 1e-10
                );
            }
            for &u in &[0.61, 0.9] {
                assert!(img.eval(u).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn brownian_dual_is_identity() {
        let f = StepFunction::new(vec![0.0, 0.3, 0.8], vec![1.5, -0.5]).unwrap();
        let img = dual_operator_fbm(&f, 0.5, 1.0).unwrap();
        for &u in &[0.1, 0.29, 0.5, 0.79, 0.9] {
            assert_relative_eq!(img.eval(u).unwrap(), f.eval(u), epsilon = 1e-12);
        }
    }

    #[test]
    fn nfbm_dual_constant_integrand() {
        // ho = (2, 3/2), f = 1 on [0, T]: image is T - u
        let t_hor = 1.25;
        let f = StepFunction::new(vec![0.0, t_hor], vec![1.0]).unwrap();
        let ho = HurstOrder::new(2, 1.5).unwrap();
        let img = dual_operator_nfbm(&f, ho, t_hor).unwrap();
        for &u in &[0.1, 0.6, 1.2] {
            assert_relative_eq!(img.eval(u).unwrap(), t_hor - u, max_relative = 1e-9);
        }
        // and its L2 norm is T^3/3 = Var B^(2)(T)
        let norm = dual_l2_norm_sq(&img).unwrap();
        assert_relative_eq!(norm, t_hor.powi(3) / 3.0, max_relative = 1e-7);
    }

    #[test]
    fn nfbm_dual_indicator_is_higher_kernel() {
        let ho = HurstOrder::new(2, 1.5).unwrap();
        let f = StepFunction::indicator(0.7).unwrap();
        let img = dual_operator_nfbm(&f, ho, 1.0).unwrap();
        for &u in &[0.1, 0.4, 0.65] {
            assert_relative_eq!(
                img.eval(u).unwrap(),
                nfbm_kernel(ho, 0.7, u).unwrap(),
                max_relative = 1e-6
            );
        }
        let ho3 = HurstOrder::new(3, 2.25).unwrap();
        let img3 = dual_operator_nfbm(&f, ho3, 1.0).unwrap();
        for &u in &[0.1, 0.4, 0.65] {
            assert_relative_eq!(
                img3.eval(u).unwrap(),
                nfbm_kernel(ho3, 0.7, u).unwrap(),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn order_one_rejected_by_nfbm_operator() {
        let f = StepFunction::indicator(0.5).unwrap();
        let ho = HurstOrder::new(1, 0.75).unwrap();
        assert!(matches!(
            dual_operator_nfbm(&f, ho, 1.0),
            Err(Error::UnsupportedOrder(_))
        ));
    }

    #[test]
    fn fbm_indicator_norm_is_variance() {
        // ||k* 1_T||^2 = T^{2H}
        let h = 0.75;
        let t_hor = 1.0;
        let f = StepFunction::indicator(t_hor).unwrap();
        let img = dual_operator_fbm(&f, h, t_hor).unwrap();
        let norm = dual_l2_norm_sq(&img).unwrap();
        assert_relative_eq!(norm, t_hor.powf(2.0 * h), max_relative = 1e-4);
    }

    #[test]
    fn simplified_form_matches_general_for_large_h() {
        let f = StepFunction::new(vec![0.0, 0.3, 0.8], vec![1.0, -2.0]).unwrap();
        let img = dual_operator_fbm(&f, 0.75, 1.0).unwrap();
        for &u in &[0.05, 0.2, 0.5, 0.7, 0.95] {
            assert_relative_eq!(
                img.eval(u).unwrap(),
                img.eval_simplified(u).unwrap(),
                max_relative = 1e-6,
                epsilon = 1e-10
            );
        }
        // rejected below 1/2
        let rough = dual_operator_fbm(&f, 0.3, 1.0).unwrap();
        assert!(rough.eval_simplified(0.5).is_err());
    }

    #[test]
    fn linearity_pointwise() {
        let ho = HurstOrder::new(2, 1.25).unwrap();
        let f = StepFunction::new(vec![0.0, 0.4, 0.9], vec![1.0, 2.0]).unwrap();
        let g = StepFunction::new(vec![0.0, 0.25, 0.7], vec![-1.0, 0.5]).unwrap();
        // alpha f + beta g as a step function on merged breakpoints
        let (alpha, beta) = (2.0, -3.0);
        let mut cuts = vec![0.0, 0.25, 0.4, 0.7, 0.9];
        cuts.dedup();
        let vals: Vec<f64> = cuts
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                alpha * f.eval(mid) + beta * g.eval(mid)
            })
            .collect();
        let combo = StepFunction::new(cuts, vals).unwrap();
        let img_f = dual_operator(&f, ho, 1.0).unwrap();
        let img_g = dual_operator(&g, ho, 1.0).unwrap();
        let img_c = dual_operator(&combo, ho, 1.0).unwrap();
        for i in 1..10 {
            let u = i as f64 / 10.5;
            let direct = img_c.eval(u).unwrap();
            let linear = alpha * img_f.eval(u).unwrap() + beta * img_g.eval(u).unwrap();
            assert_relative_eq!(direct, linear, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn inner_product_trivials() {
        use NormalizationMode::MgUnit;
        let ho = HurstOrder::new(2, 1.5).unwrap();
        let f = StepFunction::indicator(0.8).unwrap();
        let ip = inner_product_h(&f, &f, ho, MgUnit).unwrap();
        assert_relative_eq!(
            ip,
            crate::covariance::nfbm_var(ho, 0.8, MgUnit).unwrap(),
            max_relative = 1e-12
        );
        let g = StepFunction::indicator(0.5).unwrap();
        let ip2 = inner_product_h(&f, &g, ho, MgUnit).unwrap();
        assert_relative_eq!(
            ip2,
            nfbm_cov_closed(ho, 0.8, 0.5, MgUnit).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_integrand_integrates_to_zero() {
        let grid = Grid::new(1.0, 32).unwrap();
        let ho = HurstOrder::new(2, 1.5).unwrap();
        let path =
            crate::simulation::simulate_volterra(ho, grid, crate::rng::RngStream::new(2, 0))
                .unwrap();
        let f = StepFunction::new(vec![0.0, 1.0], vec![0.0]).unwrap();
        let v = wiener_integral_nfbm(&f, &path).unwrap();
        assert_eq!(v, 0.0);
    }
}
