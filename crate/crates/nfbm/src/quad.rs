//! Gaussian quadrature rules and composite integration with endpoint
//! singularities.
//!
//! Integrals of the form  int_a^b (x-a)^beta f(x) dx  are handled by a
//! composite scheme: fixed-size panels graded dyadically toward the singular
//! endpoint, plain Gauss-Legendre on the outer panels and a Gauss-Jacobi rule
//! carrying the (x-a)^beta weight on the innermost one.  The panel count is
//! grown until two successive estimates agree, with a hard cap on the total
//! node budget.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::special::gamma_fn;

/// Nodes and weights on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Nodes per panel, per the composite design.
pub const PANEL_NODES: usize = 64;
/// Maximum grading depth; 64 panels of 64 nodes caps the budget at 4096.
pub const MAX_LEVELS: usize = 63;

fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> GaussRule {
    let n = diag.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = offdiag[i];
            m[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss-Jacobi rule for weight (1-x)^alpha (1+x)^beta on [-1, 1].
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> GaussRule {
    assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
    let ab = alpha + beta;
    let mut diag = Vec::with_capacity(n);
    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
    diag.push((beta - alpha) / (ab + 2.0));
    for k in 1..n {
        let kf = k as f64;
        let denom = 2.0 * kf + ab;
        diag.push((beta * beta - alpha * alpha) / (denom * (denom + 2.0)));
        let b_k = if k == 1 {
            4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab)
                / (denom.powi(2) * (denom + 1.0) * (denom - 1.0))
        };
        offdiag.push(b_k.sqrt());
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma_fn(alpha + 1.0).unwrap() * gamma_fn(beta + 1.0).unwrap()
        / gamma_fn(ab + 2.0).unwrap();
    golub_welsch(&diag, &offdiag, mu0)
}

pub fn gauss_legendre(n: usize) -> GaussRule {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Gauss-Hermite rule for weight exp(-x^2) on the whole line.
pub fn gauss_hermite(n: usize) -> GaussRule {
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    golub_welsch(&diag, &offdiag, std::f64::consts::PI.sqrt())
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached Gauss-Jacobi rule; alpha = beta = 0 is Gauss-Legendre.
pub fn jacobi_rule(n: usize, alpha: f64, beta: f64) -> Arc<GaussRule> {
    let key = (n, alpha.to_bits(), beta.to_bits());
    let mut cache = rule_cache().lock().unwrap();
    cache
        .entry(key)
        .or_insert_with(|| Arc::new(gauss_jacobi(n, alpha, beta)))
        .clone()
}

pub fn legendre_rule(n: usize) -> Arc<GaussRule> {
    jacobi_rule(n, 0.0, 0.0)
}

/// Plain fixed-order Gauss-Legendre integral of f over [a, b].
pub fn legendre_fixed(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = legendre_rule(n);
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * f(c + hw * x);
    }
    acc * hw
}

/// Outcome of a composite quadrature with its convergence diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct QuadOutcome {
    pub value: f64,
    /// Last successive-estimate difference, a proxy for the absolute error.
    pub abs_err: f64,
    pub converged: bool,
}

impl QuadOutcome {
    /// Achieved relative accuracy.
    pub fn rel_err(&self) -> f64 {
        if self.value == 0.0 {
            self.abs_err
        } else {
            self.abs_err / self.value.abs()
        }
    }
}

/// int_a^b (x-a)^beta f(x) dx with f smooth away from a.
///
/// `layer` is an optional length scale of a boundary layer of f at a (for
/// integrands like x^{-c} whose variation is resolved only once panels shrink
/// below that scale); grading starts deep enough to resolve it.
pub fn graded_lower(
    a: f64,
    b: f64,
    beta: f64,
    layer: Option<f64>,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> QuadOutcome {
    let w = b - a;
    debug_assert!(w > 0.0 && beta > -1.0);
    let legendre = legendre_rule(PANEL_NODES);
    let jacobi = jacobi_rule(PANEL_NODES, 0.0, beta);

    // innermost panel [a, a + delta] with the Jacobi weight
    let inner = |delta: f64| -> f64 {
        let scale = (0.5 * delta).powf(beta + 1.0);
        let mut acc = 0.0;
        for (&x, &wt) in jacobi.nodes.iter().zip(&jacobi.weights) {
            let t = a + delta * 0.5 * (1.0 + x);
            acc += wt * f(t);
        }
        scale * acc
    };
    // outer panel [lo, hi], weight folded into the integrand
    let outer = |lo: f64, hi: f64| -> f64 {
        let c = 0.5 * (lo + hi);
        let hw = 0.5 * (hi - lo);
        let mut acc = 0.0;
        for (&x, &wt) in legendre.nodes.iter().zip(&legendre.weights) {
            let t = c + hw * x;
            acc += wt * (t - a).powf(beta) * f(t);
        }
        acc * hw
    };

    let k_start = match layer {
        Some(l) if l > 0.0 && l < w => ((w / l).log2().ceil() as usize + 2).clamp(4, MAX_LEVELS),
        _ => 4,
    };
    let step = 8usize;

    let mut levels = k_start;
    let mut outer_sum = 0.0;
    for k in 1..=levels {
        outer_sum += outer(a + w * 0.5f64.powi(k as i32), a + w * 0.5f64.powi(k as i32 - 1));
    }
    let mut value = outer_sum + inner(w * 0.5f64.powi(levels as i32));
    let mut abs_err = f64::INFINITY;

    while levels < MAX_LEVELS {
        let next = (levels + step).min(MAX_LEVELS);
        for k in (levels + 1)..=next {
            outer_sum += outer(a + w * 0.5f64.powi(k as i32), a + w * 0.5f64.powi(k as i32 - 1));
        }
        levels = next;
        let new_value = outer_sum + inner(w * 0.5f64.powi(levels as i32));
        abs_err = (new_value - value).abs();
        value = new_value;
        if abs_err <= tol * value.abs() || abs_err == 0.0 {
            return QuadOutcome {
                value,
                abs_err,
                converged: true,
            };
        }
    }
    QuadOutcome {
        value,
        abs_err,
        converged: abs_err <= tol * value.abs(),
    }
}

/// int_a^b (b-x)^alpha f(x) dx, by reflection onto `graded_lower`.
pub fn graded_upper(
    a: f64,
    b: f64,
    alpha: f64,
    layer: Option<f64>,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> QuadOutcome {
    graded_lower(a, b, alpha, layer, tol, |y| f(a + b - y))
}

/// int_a^b (x-a)^beta (b-x)^alpha f(x) dx: split at the midpoint and treat
/// each endpoint with its own graded rule.
pub fn graded_both(
    a: f64,
    b: f64,
    beta: f64,
    alpha: f64,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> QuadOutcome {
    let mid = 0.5 * (a + b);
    let lo = graded_lower(a, mid, beta, None, tol, |x| (b - x).powf(alpha) * f(x));
    let hi = graded_upper(mid, b, alpha, None, tol, |x| (x - a).powf(beta) * f(x));
    QuadOutcome {
        value: lo.value + hi.value,
        abs_err: lo.abs_err + hi.abs_err,
        converged: lo.converged && hi.converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::special::beta_fn;

    #[test]
    fn legendre_polynomial_exactness() {
        // degree 2n-1 polynomials integrate exactly
        let v = legendre_fixed(0.0, 1.0, 8, |x| x.powi(15));
        assert_relative_eq!(v, 1.0 / 16.0, max_relative = 1e-13);
    }

    #[test]
    fn jacobi_moments() {
        // int_{-1}^1 (1+x)^beta dx = 2^{beta+1} / (beta+1)
        for &beta in &[-0.5, -0.25, 0.3, 0.75] {
            let rule = gauss_jacobi(16, 0.0, beta);
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, 2f64.powf(beta + 1.0) / (beta + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn jacobi_singular_integral() {
        // int_0^1 x^{-1/2} cos(x) dx, singular at the lower endpoint
        let out = graded_lower(0.0, 1.0, -0.5, None, 1e-10, |x| x.cos());
        assert!(out.converged);
        // reference: sqrt(2 pi) C(sqrt(2/pi)) (Fresnel); fixed high-precision value
        assert_relative_eq!(out.value, 1.8090484758005441, max_relative = 1e-9);
    }

    #[test]
    fn graded_beta_integral() {
        // int_0^1 x^{-0.3} (1-x)^{-0.4} dx = B(0.7, 0.6)
        let expect = beta_fn(0.7, 0.6).unwrap();
        let out = graded_both(0.0, 1.0, -0.3, -0.4, 1e-10, |_| 1.0);
        assert!(out.converged);
        assert_relative_eq!(out.value, expect, max_relative = 1e-9);
    }

    #[test]
    fn boundary_layer_hint() {
        // int_a^1 x^{-1.5} dx with a tiny: layer at scale a
        let a = 1e-12;
        let out = graded_lower(a, 1.0, 0.0, Some(a), 1e-9, |x| x.powf(-1.5));
        assert!(out.converged);
        let expect = 2.0 * (a.powf(-0.5) - 1.0);
        assert_relative_eq!(out.value, expect, max_relative = 1e-8);
    }

    #[test]
    fn hermite_moments() {
        let rule = gauss_hermite(64);
        let m0: f64 = rule.weights.iter().sum();
        assert_relative_eq!(m0, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
        let m2: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * x * x)
            .sum();
        assert_relative_eq!(m2, 0.5 * std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }
}
