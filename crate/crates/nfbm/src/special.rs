//! Gamma-family special functions and the normalizing constants shared by the
//! kernel and covariance modules.

use crate::error::{Error, Result};

/// Lanczos coefficients (g = 7, n = 9), the Godfrey/GSL set.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// sin(pi * x) with argument reduction so it vanishes exactly at integers.
pub fn sin_pi(x: f64) -> f64 {
    let r = x - x.round();
    let s = (std::f64::consts::PI * r).sin();
    if (x.round() as i64).rem_euclid(2) == 0 {
        s
    } else {
        -s
    }
}

fn lanczos_positive(x: f64) -> f64 {
    // valid for x >= 0.5
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS[1..].iter().enumerate() {
        acc += c / (z + (i + 1) as f64);
    }
    let w = z + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * w.powf(z + 0.5) * (-w).exp() * acc
}

/// Gamma function, Lanczos approximation with reflection for x < 1/2.
///
/// Relative accuracy is better than 1e-12 on (0, 30), the range every
/// normalizing constant in this crate lives in.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("gamma: non-finite argument {x}")));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::domain(format!("gamma: pole at {x}")));
    }
    if x < 0.5 {
        // reflection: gamma(x) = pi / (sin(pi x) * gamma(1 - x))
        Ok(std::f64::consts::PI / (sin_pi(x) * lanczos_positive(1.0 - x)))
    } else {
        Ok(lanczos_positive(x))
    }
}

/// Beta function B(a, b) = gamma(a) gamma(b) / gamma(a + b).
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    Ok(gamma_fn(a)? * gamma_fn(b)? / gamma_fn(a + b)?)
}

/// Generalized binomial coefficient alpha (alpha-1) ... (alpha-j+1) / j!.
///
/// Computed as an iterative product; j = 0 is the empty product 1.
pub fn gen_binom(alpha: f64, j: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..j {
        acc *= (alpha - i as f64) / (i + 1) as f64;
    }
    acc
}

/// Normalizing constant of the compact-interval fractional Brownian kernel,
/// d_H = sqrt(2H gamma(3/2 - H) / (gamma(H + 1/2) gamma(2 - 2H))).
pub fn mg_constant(h: f64) -> Result<f64> {
    if !(0.0 < h && h < 1.0) {
        return Err(Error::domain(format!("mg_constant: H = {h} outside (0, 1)")));
    }
    let num = 2.0 * h * gamma_fn(1.5 - h)?;
    let den = gamma_fn(h + 0.5)? * gamma_fn(2.0 - 2.0 * h)?;
    Ok((num / den).sqrt())
}

/// The moving-average normalization constant 1 / (gamma(2H + 1) |sin(pi H)|).
///
/// Defined for any non-integer H > 0; the value does not depend on the order.
pub fn perrin_constant(h: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!("perrin_constant: H = {h} must be positive")));
    }
    let s = sin_pi(h).abs();
    if s == 0.0 {
        return Err(Error::domain(format!(
            "perrin_constant: sin(pi H) vanishes at integer H = {h}"
        )));
    }
    Ok(1.0 / (gamma_fn(2.0 * h + 1.0)? * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma_classical_values() {
        assert_relative_eq!(gamma_fn(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            gamma_fn(0.5).unwrap(),
            std::f64::consts::PI.sqrt(),
            max_relative = 1e-13
        );
        assert_relative_eq!(gamma_fn(4.0).unwrap(), 6.0, max_relative = 1e-13);
    }

    #[test]
    fn gamma_recurrence() {
        for &x in &[0.1, 0.5, 1.3, 2.7, 5.5] {
            let lhs = gamma_fn(x + 1.0).unwrap() / gamma_fn(x).unwrap();
            assert_relative_eq!(lhs, x, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_poles_rejected() {
        for &x in &[0.0, -1.0, -2.0, -17.0] {
            assert!(gamma_fn(x).is_err());
        }
        assert!(gamma_fn(f64::NAN).is_err());
        // negative non-integer arguments go through reflection
        let g = gamma_fn(-0.5).unwrap();
        assert_relative_eq!(g, -2.0 * std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn gamma_against_independent_implementation() {
        // statrs carries its own Lanczos parameterization (g = 10.900511),
        // which makes it a genuinely independent cross-check.
        for i in 1..300 {
            let x = i as f64 * 0.1;
            assert_relative_eq!(
                gamma_fn(x).unwrap(),
                statrs::function::gamma::gamma(x),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn beta_relation() {
        for &(a, b) in &[(0.3, 1.7), (1.0, 1.0), (2.5, 4.0), (0.25, 0.75)] {
            let lhs = beta_fn(a, b).unwrap();
            let rhs = gamma_fn(a).unwrap() * gamma_fn(b).unwrap() / gamma_fn(a + b).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn gen_binom_values() {
        assert_eq!(gen_binom(0.37, 0), 1.0);
        assert_eq!(gen_binom(3.0, 1), 3.0);
        assert_eq!(gen_binom(3.0, 2), 3.0);
        assert_relative_eq!(gen_binom(0.5, 2), -0.125, max_relative = 1e-15);
    }

    #[test]
    fn alternating_sum_identity() {
        // sum_{j=0}^m (-1)^j binom(alpha, j) = (-1)^m binom(alpha - 1, m),
        // the identity that ties the covariance sum to the variance formula.
        for &alpha in &[0.5, 1.5, 3.0, 4.2] {
            for m in 0..=4u32 {
                let lhs: f64 = (0..=m)
                    .map(|j| (-1.0f64).powi(j as i32) * gen_binom(alpha, j))
                    .sum();
                let rhs = (-1.0f64).powi(m as i32) * gen_binom(alpha - 1.0, m);
                assert_relative_eq!(lhs, rhs, max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn mg_constant_values() {
        assert_relative_eq!(mg_constant(0.5).unwrap(), 1.0, max_relative = 1e-13);
        // cross-check the defining expression with the independent gamma
        for &h in &[0.75, 0.25, 0.1, 0.9] {
            let g = statrs::function::gamma::gamma;
            let expected = (2.0 * h * g(1.5 - h) / (g(h + 0.5) * g(2.0 - 2.0 * h))).sqrt();
            assert_relative_eq!(mg_constant(h).unwrap(), expected, max_relative = 1e-12);
        }
        assert!(mg_constant(0.0).is_err());
        assert!(mg_constant(1.0).is_err());
        assert!(mg_constant(1.5).is_err());
    }

    #[test]
    fn perrin_constant_values() {
        assert_relative_eq!(perrin_constant(0.5).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(perrin_constant(1.5).unwrap(), 1.0 / 6.0, max_relative = 1e-13);
        assert_relative_eq!(perrin_constant(2.5).unwrap(), 1.0 / 120.0, max_relative = 1e-13);
        assert!(perrin_constant(1.0).is_err());
        assert!(perrin_constant(2.0).is_err());
        assert!(perrin_constant(-0.5).is_err());
    }

    proptest! {
        #[test]
        fn gamma_recurrence_random(x in 0.05f64..20.0) {
            let lhs = gamma_fn(x + 1.0).unwrap() / gamma_fn(x).unwrap();
            prop_assert!((lhs - x).abs() <= 1e-12 * x.abs().max(1.0));
        }

        #[test]
        fn gen_binom_pascal_rule(alpha in -4.0f64..6.0, j in 1u32..8) {
            // binom(alpha, j) = binom(alpha-1, j) + binom(alpha-1, j-1)
            let lhs = gen_binom(alpha, j);
            let rhs = gen_binom(alpha - 1.0, j) + gen_binom(alpha - 1.0, j - 1);
            prop_assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0));
        }
    }
}
