//! Minimal Chebyshev interpolation on an interval, used for the cached
//! kernel profile tables.

/// A Chebyshev series on [lo, hi].
#[derive(Debug, Clone)]
pub(crate) struct ChebSeries {
    pub lo: f64,
    pub hi: f64,
    coef: Vec<f64>,
}

impl ChebSeries {
    /// Interpolate f at n Chebyshev-Gauss nodes on [lo, hi].
    pub fn fit(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        debug_assert!(hi > lo && n >= 2);
        let c = 0.5 * (lo + hi);
        let hw = 0.5 * (hi - lo);
        let vals: Vec<f64> = (0..n)
            .map(|j| {
                let theta = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                f(c + hw * theta.cos())
            })
            .collect();
        let mut coef = vec![0.0; n];
        for (k, ck) in coef.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &v) in vals.iter().enumerate() {
                let theta = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                acc += v * (k as f64 * theta).cos();
            }
            *ck = 2.0 * acc / n as f64;
        }
        coef[0] *= 0.5;
        Self { lo, hi, coef }
    }

    /// Clenshaw evaluation; x may sit slightly outside [lo, hi].
    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coef.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coef[0]
    }
}
