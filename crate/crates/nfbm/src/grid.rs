//! Order/index pair and the uniform time grid everything is discretized on.

use crate::error::{Error, Result};

/// The pair (n, H) with H in (n-1, n); governs every kernel and covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstOrder {
    n: u32,
    hurst: f64,
}

impl HurstOrder {
    pub fn new(n: u32, hurst: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("order n must be at least 1"));
        }
        let lo = (n - 1) as f64;
        let hi = n as f64;
        if !(hurst > lo && hurst < hi) {
            return Err(Error::domain(format!(
                "H = {hurst} outside ({lo}, {hi}) for order n = {n}"
            )));
        }
        Ok(Self { n, hurst })
    }

    pub fn order(&self) -> u32 {
        self.n
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// The base self-similarity index H - n + 1, always in (0, 1).
    pub fn base_index(&self) -> f64 {
        self.hurst - (self.n - 1) as f64
    }

    /// The pair one integration level up: (n + 1, H + 1).
    pub fn integrated(&self) -> Self {
        Self {
            n: self.n + 1,
            hurst: self.hurst + 1.0,
        }
    }

    /// The pair k differentiation levels down: (n - k, H - k).
    pub fn differentiated(&self, k: u32) -> Result<Self> {
        if k >= self.n {
            return Err(Error::UnsupportedOrder(format!(
                "cannot differentiate an order-{} process {k} times",
                self.n
            )));
        }
        Ok(Self {
            n: self.n - k,
            hurst: self.hurst - k as f64,
        })
    }
}

impl std::fmt::Display for HurstOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(n={}, H={})", self.n, self.hurst)
    }
}

/// Uniform grid t_i = i T / m for i = 0..=m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    horizon: f64,
    steps: usize,
}

impl Grid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain(format!("horizon T = {horizon} must be positive")));
        }
        if steps == 0 {
            return Err(Error::domain("grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// t_i, exact at both endpoints.
    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i <= self.steps);
        self.horizon * (i as f64 / self.steps as f64)
    }

    /// Midpoint of cell j = (t_{j-1}, t_j], 1-based.
    pub fn midpoint(&self, j: usize) -> f64 {
        debug_assert!(1 <= j && j <= self.steps);
        self.horizon * ((j as f64 - 0.5) / self.steps as f64)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |i| self.point(i))
    }

    /// Index i with t_i = t, if t sits on the grid (relative tolerance 1e-9).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let i = x.round();
        if (x - i).abs() <= 1e-9 * self.steps as f64 && i >= 0.0 && i <= self.steps as f64 {
            Some(i as usize)
        } else {
            None
        }
    }
}
