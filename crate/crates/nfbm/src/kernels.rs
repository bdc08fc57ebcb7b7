//! The compact-interval Volterra kernel of fractional Brownian motion, its
//! recursive higher-order family, and lower-triangular grid discretizations
//! with exact round-trip inversion.
//!
//! Every kernel in the family is homogeneous, k^(n)(t, u) = t^{H-1/2} F(u/t),
//! so each (n, H) reduces to a one-dimensional profile F(a) = k^(n)(1, a).
//! Profiles and their antiderivatives are tabulated once per (n, H) as
//! piecewise-Chebyshev series on a dyadically graded mesh; the table values
//! come from the Gauss-Jacobi composite quadrature applied to the defining
//! integrals, with the higher orders collapsed to a single weighted integral
//! of the base kernel through the repeated-integration identity.  Pointwise
//! evaluation and cell-averaged matrix assembly are table lookups after that.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::cheb::ChebSeries;
use crate::error::{Error, Result};
use crate::grid::{Grid, HurstOrder};
use crate::quad::{graded_lower, graded_upper};
use crate::simulation::SamplePath;
use crate::special::{beta_fn, gamma_fn, mg_constant};

const CHEB_NODES: usize = 24;
const DYADIC_LEVELS: usize = 54;
const PROFILE_TOL: f64 = 1e-11;
/// Relative diagonal floor below which the triangular solve refuses to run.
const SINGULARITY_FLOOR: f64 = 1e-14;

// ---------------------------------------------------------------------------
// Kernel profiles
// ---------------------------------------------------------------------------

/// Tabulated self-similar profile of k^(n): k^(n)(t, u) = t^pow F(u/t).
pub(crate) struct KernelProfile {
    order: u32,
    hurst: f64,
    /// Homogeneity power H - 1/2.
    pow: f64,
    /// Algebraic exponent at a -> 0: F ~ c_neg a^{-sigma} + c_pos a^{sigma}.
    sigma: f64,
    /// Algebraic exponent at a -> 1: F ~ ghi_one (1-a)^{hi_exp}.
    hi_exp: f64,
    /// F identically 1 (Brownian motion).
    flat: bool,
    f_lo: Vec<ChebSeries>,
    f_hi: Vec<ChebSeries>,
    c_neg: f64,
    c_pos: f64,
    ghi_one: f64,
    /// T(x) = int_0^x F on the lower pieces.
    t_lo: Vec<ChebSeries>,
    /// T_comp(x) = int_x^1 F on the upper pieces.
    t_comp: Vec<ChebSeries>,
    t_half: f64,
    total: f64,
}

/// Direct evaluation of the base profile F(a) = k_h(1, a) from the defining
/// expression; used to build the tables and as a slow reference.
fn base_profile_direct(h: f64, a: f64) -> f64 {
    debug_assert!(0.0 < a && a < 1.0);
    let d = mg_constant(h).expect("h validated by caller");
    // J(a) = int_a^1 v^{-2h} (1-v)^{h-1/2} dv, split at the midpoint
    let mid = 0.5 * (1.0 + a);
    let j1 = graded_lower(a, mid, 0.0, Some(a), PROFILE_TOL, |v| {
        v.powf(-2.0 * h) * (1.0 - v).powf(h - 0.5)
    });
    let j2 = graded_upper(mid, 1.0, h - 0.5, None, PROFILE_TOL, |v| v.powf(-2.0 * h));
    let j = j1.value + j2.value;
    d * (a.powf(0.5 - h) * (1.0 - a).powf(h - 0.5) - (h - 0.5) * a.powf(h - 0.5) * j)
}

/// Higher-order kernel by the collapsed repeated-integration identity,
/// int_u^t (t-s)^{n-2}/(n-2)! k_h(s, u) ds, as a composite Gauss-Jacobi
/// quadrature over the base profile.
pub(crate) fn nfbm_kernel_collapsed(base: &KernelProfile, n: u32, t: f64, u: f64, tol: f64) -> f64 {
    debug_assert!(base.order == 1);
    if n == 1 {
        return base.eval_k(t, u);
    }
    let h = base.hurst;
    let fact = gamma_fn((n - 1) as f64).unwrap(); // (n-2)!
    let out = graded_lower(u, t, h - 0.5, Some(u), tol, |s| {
        let poly = if n == 2 {
            1.0
        } else {
            (t - s).powi(n as i32 - 2) / fact
        };
        // strip the (s-u)^{h-1/2} weight from the base kernel
        let stripped = if base.flat {
            1.0
        } else {
            s.powf(h - 0.5) * base.eval_f(u / s) * (s - u).powf(0.5 - h)
        };
        poly * stripped
    });
    out.value
}

impl KernelProfile {
    fn build(order: u32, hurst: f64) -> Result<KernelProfile> {
        let ho = HurstOrder::new(order, hurst)?;
        let h = ho.base_index();
        let pow = hurst - 0.5;
        if order == 1 && h == 0.5 {
            return Ok(KernelProfile {
                order,
                hurst,
                pow,
                sigma: 0.0,
                hi_exp: 0.0,
                flat: true,
                f_lo: Vec::new(),
                f_hi: Vec::new(),
                c_neg: 1.0,
                c_pos: 0.0,
                ghi_one: 1.0,
                t_lo: Vec::new(),
                t_comp: Vec::new(),
                t_half: 0.5,
                total: 1.0,
            });
        }
        let sigma = (h - 0.5).abs();
        let hi_exp = hurst - 0.5;

        // leading coefficients of F at a -> 0
        let (c_neg, c_pos) = if order == 1 {
            let d_h = mg_constant(h)?;
            // F = (d_h/2) a^{1/2-h} - d_h (h-1/2) B(1-2h, h+1/2) a^{h-1/2} + ...
            let bstar = gamma_fn(1.0 - 2.0 * h)? * gamma_fn(h + 0.5)? / gamma_fn(1.5 - h)?;
            let coef_half_minus_h = 0.5 * d_h;
            let coef_h_minus_half = -d_h * (h - 0.5) * bstar;
            if h > 0.5 {
                (coef_half_minus_h, coef_h_minus_half)
            } else if h < 0.5 {
                (coef_h_minus_half, coef_half_minus_h)
            } else {
                (1.0, 0.0)
            }
        } else {
            // push the base coefficients through the collapsed integral
            let base = kernel_profile(1, h)?;
            let nm = (order - 2) as f64;
            let fact = gamma_fn(nm + 1.0)?;
            let b_neg = beta_fn(nm + 1.0, (h - 0.5) + sigma + 1.0)?;
            let b_pos = beta_fn(nm + 1.0, (h - 0.5) - sigma + 1.0)?;
            (base.c_neg * b_neg / fact, base.c_pos * b_pos / fact)
        };

        let direct: Box<dyn Fn(f64) -> f64 + Sync> = if order == 1 {
            Box::new(move |a| base_profile_direct(h, a))
        } else {
            let base = kernel_profile(1, h)?;
            Box::new(move |a| nfbm_kernel_collapsed(&base, order, 1.0, a, PROFILE_TOL))
        };

        let f_lo: Vec<ChebSeries> = (1..=DYADIC_LEVELS as i32)
            .into_par_iter()
            .map(|k| {
                let lo = 0.5f64.powi(k + 1);
                let hi = 0.5f64.powi(k);
                ChebSeries::fit(lo, hi, CHEB_NODES, |a| direct(a) * a.powf(sigma))
            })
            .collect();
        let f_hi: Vec<ChebSeries> = (1..=DYADIC_LEVELS as i32)
            .into_par_iter()
            .map(|k| {
                let blo = 0.5f64.powi(k + 1);
                let bhi = 0.5f64.powi(k);
                ChebSeries::fit(1.0 - bhi, 1.0 - blo, CHEB_NODES, |a| {
                    direct(a) * (1.0 - a).powf(-hi_exp)
                })
            })
            .collect();
        let ghi_one = f_hi
            .last()
            .unwrap()
            .eval(1.0 - 0.5f64.powi(DYADIC_LEVELS as i32 + 1));

        let mut profile = KernelProfile {
            order,
            hurst,
            pow,
            sigma,
            hi_exp,
            flat: false,
            f_lo,
            f_hi,
            c_neg,
            c_pos,
            ghi_one,
            t_lo: Vec::new(),
            t_comp: Vec::new(),
            t_half: 0.0,
            total: 0.0,
        };

        // antiderivative tables, accumulated from each end
        let floor = 0.5f64.powi(DYADIC_LEVELS as i32 + 1);
        let mut t_lo = Vec::with_capacity(DYADIC_LEVELS);
        let mut acc = profile.asymptotic_t(floor);
        for k in (1..=DYADIC_LEVELS as i32).rev() {
            let lo = 0.5f64.powi(k + 1);
            let hi = 0.5f64.powi(k);
            let base = acc;
            let piece =
                ChebSeries::fit(lo, hi, CHEB_NODES, |x| base + piece_integral(&profile, lo, x));
            acc = base + piece_integral(&profile, lo, hi);
            t_lo.push(piece);
        }
        t_lo.reverse(); // outermost (k = 1) first, matching f_lo ordering
        let t_half = acc;

        let mut t_comp = Vec::with_capacity(DYADIC_LEVELS);
        let mut acc_c = profile.ghi_one * floor.powf(hi_exp + 1.0) / (hi_exp + 1.0);
        for k in (1..=DYADIC_LEVELS as i32).rev() {
            let alo = 1.0 - 0.5f64.powi(k);
            let ahi = 1.0 - 0.5f64.powi(k + 1);
            let base = acc_c;
            let piece =
                ChebSeries::fit(alo, ahi, CHEB_NODES, |x| base + piece_integral(&profile, x, ahi));
            acc_c = base + piece_integral(&profile, alo, ahi);
            t_comp.push(piece);
        }
        t_comp.reverse();
        let total = t_half + acc_c;

        profile.t_lo = t_lo;
        profile.t_comp = t_comp;
        profile.t_half = t_half;
        profile.total = total;
        Ok(profile)
    }

    pub(crate) fn order(&self) -> u32 {
        self.order
    }

    pub(crate) fn base_index(&self) -> f64 {
        self.hurst - (self.order - 1) as f64
    }

    pub(crate) fn flat(&self) -> bool {
        self.flat
    }

    /// T(x) for x below the table floor.
    fn asymptotic_t(&self, x: f64) -> f64 {
        self.c_neg * x.powf(1.0 - self.sigma) / (1.0 - self.sigma)
            + self.c_pos * x.powf(1.0 + self.sigma) / (1.0 + self.sigma)
    }

    fn dyadic_index(x: f64) -> usize {
        // piece k covers [2^{-k-1}, 2^{-k}]; clamp into table range
        let k = (-x.log2()).ceil() as i64 - 1;
        k.clamp(0, DYADIC_LEVELS as i64 - 1) as usize + 1
    }

    /// The profile F(a) = k^(n)(1, a), 0 < a < 1.
    pub(crate) fn eval_f(&self, a: f64) -> f64 {
        debug_assert!(0.0 < a && a < 1.0);
        if self.flat {
            return 1.0;
        }
        let floor = 0.5f64.powi(DYADIC_LEVELS as i32 + 1);
        if a <= 0.5 {
            if a < floor {
                return self.c_neg * a.powf(-self.sigma) + self.c_pos * a.powf(self.sigma);
            }
            let k = Self::dyadic_index(a);
            self.f_lo[k - 1].eval(a) * a.powf(-self.sigma)
        } else {
            let b = 1.0 - a;
            if b < floor {
                return self.ghi_one * b.powf(self.hi_exp);
            }
            let k = Self::dyadic_index(b);
            self.f_hi[k - 1].eval(a) * b.powf(self.hi_exp)
        }
    }

    /// k^(n)(t, u) for 0 < u < t.
    pub(crate) fn eval_k(&self, t: f64, u: f64) -> f64 {
        if self.flat {
            return 1.0;
        }
        t.powf(self.pow) * self.eval_f(u / t)
    }

    fn t_at(&self, x: f64) -> f64 {
        if self.flat {
            return x;
        }
        let floor = 0.5f64.powi(DYADIC_LEVELS as i32 + 1);
        if x < floor {
            return self.asymptotic_t(x);
        }
        let k = Self::dyadic_index(x);
        self.t_lo[k - 1].eval(x)
    }

    fn t_comp_at(&self, x: f64) -> f64 {
        if self.flat {
            return 1.0 - x;
        }
        let floor = 0.5f64.powi(DYADIC_LEVELS as i32 + 1);
        let b = 1.0 - x;
        if b < floor {
            return self.ghi_one * b.powf(self.hi_exp + 1.0) / (self.hi_exp + 1.0);
        }
        let k = Self::dyadic_index(b);
        self.t_comp[k - 1].eval(x)
    }

    /// int_{x0}^{x1} F(a) da for 0 <= x0 <= x1 <= 1, stable at both ends.
    pub(crate) fn cell_integral(&self, x0: f64, x1: f64) -> f64 {
        debug_assert!(x0 <= x1 + 1e-12);
        if self.flat {
            return x1 - x0;
        }
        let x0 = x0.clamp(0.0, 1.0);
        let x1 = x1.clamp(0.0, 1.0);
        if x1 <= 0.5 {
            self.t_at(x1) - self.t_at(x0)
        } else if x0 >= 0.5 {
            self.t_comp_at(x0) - self.t_comp_at(x1)
        } else {
            (self.t_half - self.t_at(x0)) + (self.t_comp_at(0.5) - self.t_comp_at(x1))
        }
    }

    /// int over (cell intersect [0, s]) of k^(n)(s, u) du; cell = (u0, u1].
    pub(crate) fn cell_mass(&self, u0: f64, u1: f64, s: f64) -> f64 {
        let hi = u1.min(s);
        if hi <= u0 {
            return 0.0;
        }
        if self.flat {
            return hi - u0;
        }
        s.powf(self.pow + 1.0) * self.cell_integral(u0 / s, hi / s)
    }
}

/// Smooth-piece integral of F over [lo, hi] inside one dyadic piece.
fn piece_integral(p: &KernelProfile, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let rule = crate::quad::legendre_rule(32);
    let c = 0.5 * (lo + hi);
    let hw = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * p.eval_f(c + hw * x);
    }
    acc * hw
}

fn profile_cache() -> &'static Mutex<HashMap<(u32, u64), Arc<KernelProfile>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u64), Arc<KernelProfile>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Memoized profile for (n, H); order 1 is the base kernel.
pub(crate) fn kernel_profile(order: u32, hurst: f64) -> Result<Arc<KernelProfile>> {
    let key = (order, hurst.to_bits());
    if let Some(p) = profile_cache().lock().unwrap().get(&key) {
        return Ok(p.clone());
    }
    let built = Arc::new(KernelProfile::build(order, hurst)?);
    let mut cache = profile_cache().lock().unwrap();
    Ok(cache.entry(key).or_insert(built).clone())
}

pub(crate) fn profile_for(ho: HurstOrder) -> Result<Arc<KernelProfile>> {
    kernel_profile(ho.order(), ho.hurst())
}

pub(crate) fn base_profile_for(ho: HurstOrder) -> Result<Arc<KernelProfile>> {
    kernel_profile(1, ho.base_index())
}

// ---------------------------------------------------------------------------
// Pointwise kernels
// ---------------------------------------------------------------------------

/// The Volterra kernel of fractional Brownian motion on a compact interval,
/// k_H(t, s) for 0 < s < t and H in (0, 1).
pub fn mg_kernel(h: f64, t: f64, s: f64) -> Result<f64> {
    if !(0.0 < h && h < 1.0) {
        return Err(Error::domain(format!("mg_kernel: H = {h} outside (0, 1)")));
    }
    if !(s > 0.0 && s < t) {
        return Err(Error::domain(format!(
            "mg_kernel: need 0 < s < t, got s = {s}, t = {t}"
        )));
    }
    Ok(kernel_profile(1, h)?.eval_k(t, s))
}

/// Time derivative of the base kernel in its first argument,
/// d_H (H - 1/2) (v/u)^{H-1/2} (v-u)^{H-3/2}; the two terms of the defining
/// expression collapse when differentiated.
pub fn mg_kernel_dt(h: f64, v: f64, u: f64) -> Result<f64> {
    if !(0.0 < h && h < 1.0) {
        return Err(Error::domain(format!("mg_kernel_dt: H = {h} outside (0, 1)")));
    }
    if !(u > 0.0 && u < v) {
        return Err(Error::domain(format!(
            "mg_kernel_dt: need 0 < u < v, got u = {u}, v = {v}"
        )));
    }
    let d = mg_constant(h)?;
    Ok(d * (h - 0.5) * (v / u).powf(h - 0.5) * (v - u).powf(h - 1.5))
}

/// The order-n Volterra kernel k_H^(n)(t, u) for 0 < u < t.
pub fn nfbm_kernel(ho: HurstOrder, t: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < t) {
        return Err(Error::domain(format!(
            "nfbm_kernel: need 0 < u < t, got u = {u}, t = {t}"
        )));
    }
    Ok(profile_for(ho)?.eval_k(t, u))
}

// ---------------------------------------------------------------------------
// Grid discretization
// ---------------------------------------------------------------------------

/// Lower-triangular cell-averaged discretization of k^(n): entry (i, j) is
/// (1/dt) int over cell j of k^(n)(t_i, u) du, so that the process value at
/// t_i is the row dotted with N(0, dt) increments.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    ho: HurstOrder,
    grid: Grid,
    /// Row i (1-based) holds entries j = 1..=i.
    rows: Vec<Vec<f64>>,
}

impl KernelMatrix {
    pub fn build(ho: HurstOrder, grid: Grid) -> Result<Self> {
        let profile = profile_for(ho)?;
        let m = grid.steps();
        let dt = grid.dt();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        (1..m + 1)
            .into_par_iter()
            .map(|i| {
                let ti = grid.point(i);
                (1..=i)
                    .map(|j| profile.cell_mass(grid.point(j - 1), grid.point(j), ti) / dt)
                    .collect()
            })
            .collect_into_vec(&mut rows);
        Ok(Self { ho, grid, rows })
    }

    /// Memoized construction, shared per (order, grid) process-wide.
    pub fn cached(ho: HurstOrder, grid: Grid) -> Result<Arc<Self>> {
        type Key = (u32, u64, u64, usize);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<KernelMatrix>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (
            ho.order(),
            ho.hurst().to_bits(),
            grid.horizon().to_bits(),
            grid.steps(),
        );
        if let Some(k) = cache.lock().unwrap().get(&key) {
            return Ok(k.clone());
        }
        let built = Arc::new(Self::build(ho, grid)?);
        Ok(cache.lock().unwrap().entry(key).or_insert(built).clone())
    }

    pub fn ho(&self) -> HurstOrder {
        self.ho
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Entry (i, j), 1-based, zero above the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.rows[i - 1][j - 1]
        }
    }

    /// Row i (1-based): the j = 1..=i cell averages.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i - 1]
    }

    /// Apply to an increment vector: values[i] = sum_j K[i][j] dW_j, with the
    /// process start value 0 prepended.
    pub fn apply(&self, dw: &[f64]) -> Vec<f64> {
        assert_eq!(dw.len(), self.grid.steps());
        let mut values = Vec::with_capacity(dw.len() + 1);
        values.push(0.0);
        for row in &self.rows {
            values.push(row.iter().zip(dw).map(|(k, w)| k * w).sum());
        }
        values
    }

    /// Discrete Gram covariance sum_j K[i][j] K[k][j] dt.
    pub fn gram(&self, i: usize, k: usize) -> f64 {
        let lo = i.min(k);
        let (ri, rk) = (&self.rows[i - 1], &self.rows[k - 1]);
        ri[..lo].iter().zip(&rk[..lo]).map(|(a, b)| a * b).sum::<f64>() * self.grid.dt()
    }

    /// Forward substitution for K dW = values[1..], the discrete counterpart
    /// of the inversion formula recovering the driving noise.
    pub fn solve(&self, values: &[f64]) -> Result<Vec<f64>> {
        let m = self.grid.steps();
        assert_eq!(values.len(), m + 1);
        let max_mag = self
            .rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let mut dw = vec![0.0; m];
        for i in 1..=m {
            let diag = self.rows[i - 1][i - 1];
            if diag.abs() < SINGULARITY_FLOOR * max_mag {
                return Err(Error::Singular(format!(
                    "near-zero diagonal {diag:e} at row {i} (matrix scale {max_mag:e})"
                )));
            }
            let partial: f64 = self.rows[i - 1][..i - 1]
                .iter()
                .zip(&dw[..i - 1])
                .map(|(k, w)| k * w)
                .sum();
            dw[i - 1] = (values[i] - partial) / diag;
        }
        Ok(dw)
    }

    // -- binary cache -------------------------------------------------------

    const MAGIC: &'static [u8; 8] = b"NFBMKMAT";
    const VERSION: u32 = 1;

    /// Write the lower triangle to a versioned binary cache file.
    pub fn write_cache(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(Self::MAGIC)?;
        f.write_all(&Self::VERSION.to_le_bytes())?;
        for v in [
            self.ho.order() as f64,
            self.ho.hurst(),
            self.grid.horizon(),
            self.grid.steps() as f64,
        ] {
            f.write_all(&v.to_le_bytes())?;
        }
        for row in &self.rows {
            for &v in row {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Read a matrix back; validates magic, version, and parameters.
    pub fn read_cache(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("kernel cache: bad magic".into()));
        }
        let mut word = [0u8; 4];
        f.read_exact(&mut word)?;
        if u32::from_le_bytes(word) != Self::VERSION {
            return Err(Error::Format("kernel cache: unsupported version".into()));
        }
        let mut header = [0.0f64; 4];
        for v in header.iter_mut() {
            let mut buf = [0u8; 8];
            f.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let ho = HurstOrder::new(header[0] as u32, header[1])?;
        let m = header[3] as usize;
        let grid = Grid::new(header[2], m)?;
        let mut rows = Vec::with_capacity(m);
        for i in 1..=m {
            let mut row = vec![0.0; i];
            for v in row.iter_mut() {
                let mut buf = [0u8; 8];
                f.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            rows.push(row);
        }
        Ok(Self { ho, grid, rows })
    }
}

/// Cell averages of k^(n)(t, .) against the grid cells, for an arbitrary
/// time t in (0, T]: entry j is (1/dt) int over cell_j intersect [0, t].
/// At grid points this reproduces the matrix rows.
pub fn kernel_cell_averages(ho: HurstOrder, grid: Grid, t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0 && t <= grid.horizon() * (1.0 + 1e-12)) {
        return Err(Error::domain(format!("time {t} outside (0, T]")));
    }
    let profile = profile_for(ho)?;
    let dt = grid.dt();
    let n_cells = ((t / dt - 1e-12).ceil() as usize).min(grid.steps()).max(1);
    Ok((1..=n_cells)
        .map(|j| profile.cell_mass(grid.point(j - 1), grid.point(j), t) / dt)
        .collect())
}

/// Recover the driving increments from a sample path by triangular solve;
/// the discrete counterpart of the inversion formula, realizing the equality
/// of filtrations on the grid.
pub fn invert_kernel_matrix(matrix: &KernelMatrix, path: &SamplePath) -> Result<Vec<f64>> {
    if path.grid() != matrix.grid() {
        return Err(Error::domain("path grid does not match the kernel matrix grid"));
    }
    if path.ho() != matrix.ho() {
        return Err(Error::domain(format!(
            "path order {} does not match matrix order {}",
            path.ho(),
            matrix.ho()
        )));
    }
    matrix.solve(path.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::graded_both;
    use approx::assert_relative_eq;

    #[test]
    fn brownian_kernel_is_one() {
        for &(t, s) in &[(1.0, 0.3), (2.0, 1.99), (0.7, 0.0001)] {
            assert_eq!(mg_kernel(0.5, t, s).unwrap(), 1.0);
        }
    }

    #[test]
    fn kernel_domain_errors() {
        assert!(mg_kernel(1.2, 1.0, 0.5).is_err());
        assert!(mg_kernel(0.7, 1.0, 1.0).is_err());
        assert!(mg_kernel(0.7, 1.0, 0.0).is_err());
        assert!(mg_kernel(0.7, 1.0, -0.5).is_err());
    }

    #[test]
    fn profile_matches_direct_evaluation() {
        for &h in &[0.25, 0.75] {
            let p = kernel_profile(1, h).unwrap();
            for &a in &[1e-9, 1e-4, 0.03, 0.2, 0.5, 0.77, 0.99, 0.999999] {
                let direct = base_profile_direct(h, a);
                assert_relative_eq!(p.eval_f(a), direct, max_relative = 5e-10);
            }
        }
    }

    #[test]
    fn higher_profile_matches_collapsed_quadrature() {
        for &(n, hurst) in &[(2u32, 1.25), (2, 1.75), (3, 2.5)] {
            let p = kernel_profile(n, hurst).unwrap();
            let base = kernel_profile(1, hurst - (n - 1) as f64).unwrap();
            for &a in &[1e-6, 0.01, 0.3, 0.5, 0.9, 0.9999] {
                let direct = nfbm_kernel_collapsed(&base, n, 1.0, a, 1e-11);
                assert_relative_eq!(p.eval_f(a), direct, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn profile_antiderivative_consistency() {
        // T(x1) - T(x0) against direct quadrature of the tabulated F
        for &h in &[0.25, 0.75] {
            let p = kernel_profile(1, h).unwrap();
            for &(x0, x1) in &[(0.1, 0.4), (0.45, 0.55), (0.6, 0.95), (1e-6, 1e-3)] {
                let direct = graded_lower(x0, x1, 0.0, None, 1e-12, |a| p.eval_f(a)).value;
                assert_relative_eq!(p.cell_integral(x0, x1), direct, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn unit_variance_normalization() {
        // int_0^1 F(a)^2 da = 1: the base construction has unit variance at t=1
        for &h in &[0.25, 0.4, 0.6, 0.75] {
            let p = kernel_profile(1, h).unwrap();
            let alpha = 2.0 * (h - 0.5).min(0.0);
            let var = graded_both(0.0, 1.0, -2.0 * p.sigma, alpha, 1e-10, |a| {
                let f = p.eval_f(a);
                f * f * a.powf(2.0 * p.sigma) * (1.0 - a).powf(-alpha)
            });
            assert_relative_eq!(var.value, 1.0, max_relative = 1e-7);
        }
    }

    #[test]
    fn homogeneity_scaling() {
        // k^(n)(c t, c u) = c^{H-1/2} k^(n)(t, u)
        for &(n, hurst) in &[(1u32, 0.75), (2, 1.25), (3, 2.5)] {
            let ho = HurstOrder::new(n, hurst).unwrap();
            let (t, u, c) = (0.8, 0.3, 2.5);
            let lhs = nfbm_kernel(ho, c * t, c * u).unwrap();
            let rhs = c.powf(hurst - 0.5) * nfbm_kernel(ho, t, u).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn higher_order_closed_forms() {
        let ho2 = HurstOrder::new(2, 1.5).unwrap();
        let ho3 = HurstOrder::new(3, 2.5).unwrap();
        for &(t, u) in &[(1.0, 0.2), (2.0, 1.5), (0.9, 0.85)] {
            assert_relative_eq!(nfbm_kernel(ho2, t, u).unwrap(), t - u, max_relative = 1e-10);
            assert_relative_eq!(
                nfbm_kernel(ho3, t, u).unwrap(),
                (t - u) * (t - u) / 2.0,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn base_case_matches_mg() {
        let ho = HurstOrder::new(1, 0.75).unwrap();
        for &(t, u) in &[(1.0, 0.4), (0.8, 0.1)] {
            assert_relative_eq!(
                nfbm_kernel(ho, t, u).unwrap(),
                mg_kernel(0.75, t, u).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn kernel_dt_matches_finite_differences() {
        for &h in &[0.25, 0.75] {
            for &(v, u) in &[(1.0, 0.4), (0.9, 0.7)] {
                let eps = 1e-6;
                let fd = (mg_kernel(h, v + eps, u).unwrap() - mg_kernel(h, v - eps, u).unwrap())
                    / (2.0 * eps);
                assert_relative_eq!(mg_kernel_dt(h, v, u).unwrap(), fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn matrix_integrated_brownian_exact() {
        let ho = HurstOrder::new(2, 1.5).unwrap();
        let grid = Grid::new(1.0, 8).unwrap();
        let k = KernelMatrix::build(ho, grid).unwrap();
        for i in 1..=8 {
            for j in 1..=i {
                let expect = grid.point(i) - 0.5 * (grid.point(j - 1) + grid.point(j));
                assert_relative_eq!(k.entry(i, j), expect, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn matrix_brownian_all_ones() {
        let ho = HurstOrder::new(1, 0.5).unwrap();
        let grid = Grid::new(2.0, 6).unwrap();
        let k = KernelMatrix::build(ho, grid).unwrap();
        for i in 1..=6 {
            for j in 1..=i {
                assert_relative_eq!(k.entry(i, j), 1.0, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn cell_averages_match_matrix_rows() {
        for &(n, h) in &[(1u32, 0.75), (2, 1.25), (3, 2.5)] {
            let ho = HurstOrder::new(n, h).unwrap();
            let grid = Grid::new(1.0, 8).unwrap();
            let k = KernelMatrix::build(ho, grid).unwrap();
            let row = kernel_cell_averages(ho, grid, grid.point(5)).unwrap();
            assert_eq!(row.len(), 5);
            for j in 1..=5 {
                assert_relative_eq!(row[j - 1], k.entry(5, j), max_relative = 1e-9, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn cache_file_round_trip() {
        let ho = HurstOrder::new(2, 1.25).unwrap();
        let grid = Grid::new(1.0, 12).unwrap();
        let k = KernelMatrix::build(ho, grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kernel.bin");
        k.write_cache(&path).unwrap();
        let back = KernelMatrix::read_cache(&path).unwrap();
        assert_eq!(back.grid(), grid);
        assert_eq!(back.ho(), ho);
        for i in 1..=12 {
            for j in 1..=i {
                assert_eq!(back.entry(i, j), k.entry(i, j));
            }
        }
    }
}
