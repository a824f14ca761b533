//! Uniform grids, trapezoid quadrature and the Fourier pair
//! `F f(u) = ∫ e^{iux} f(x) dx`, `f(x) = (1/2π) ∫ e^{-ixu} F f(u) du`.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-12;

/// `n` equally spaced nodes from `lo` to `hi`, both included.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!("grid bounds [{lo}, {hi}] are not an interval")));
        }
        if n < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 nodes, got {n}")));
        }
        Ok(Grid1D { lo, hi, n })
    }

    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    /// Grid with spacing at most `h` covering `[lo, hi]`.
    pub fn with_spacing(lo: f64, hi: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("spacing must be positive"));
        }
        let n = ((hi - lo) / h).ceil() as usize + 1;
        Self::new(lo, hi, n.max(2))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * (i as f64 / (self.n - 1) as f64)
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Composite trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n];
        w[0] = 0.5 * h;
        w[self.n - 1] = 0.5 * h;
        w
    }

    pub fn is_symmetric(&self) -> bool {
        (self.lo + self.hi).abs() <= REL_TOL * self.hi.abs().max(1.0)
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let slack = REL_TOL * self.lo.abs().max(self.hi.abs()).max(1.0);
        self.lo <= lo + slack && self.hi >= hi - slack
    }
}

/// Values a grid function can carry.
pub trait Scalar: Copy + Default + Send + Sync + Add<Output = Self> + Mul<f64, Output = Self> {
    fn norm_sqr(self) -> f64;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Samples of a function on a [`Grid1D`]; zero off the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T = f64> {
    grid: Grid1D,
    values: Vec<T>,
}

pub type ComplexGridFunction = GridFunction<Complex64>;

impl<T: Scalar> GridFunction<T> {
    pub fn new(grid: Grid1D, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| {
            let c = v.to_complex();
            !(c.re.is_finite() && c.im.is_finite())
        }) {
            return Err(Error::invalid(format!("non-finite value at node {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> T + Sync) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|i| f(grid.node(i))).collect();
        GridFunction { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        let values = vec![T::default(); grid.len()];
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map<S: Scalar>(&self, f: impl Fn(T) -> S) -> GridFunction<S> {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Linear interpolation, zero outside `[lo, hi]`.
    pub fn at(&self, x: f64) -> T {
        let g = &self.grid;
        if !(x >= g.lo && x <= g.hi) {
            return T::default();
        }
        let t = (x - g.lo) / g.spacing();
        let i = (t.floor() as usize).min(g.n - 2);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Trapezoid integral.
    pub fn integral(&self) -> T {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .fold(T::default(), |acc, (&w, &v)| acc + v * w)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr().sqrt()).fold(0.0, f64::max)
    }
}

impl GridFunction<f64> {
    pub fn sub(&self, other: &GridFunction<f64>) -> Result<GridFunction<f64>> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid functions live on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(GridFunction { grid: self.grid.clone(), values })
    }

    pub fn scale(&self, c: f64) -> GridFunction<f64> {
        self.map(|v| v * c)
    }
}

/// Anything that can be evaluated pointwise on the real line.
pub trait RealFn: Sync {
    fn eval(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> RealFn for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

impl RealFn for GridFunction<f64> {
    fn eval(&self, x: f64) -> f64 {
        self.at(x)
    }
}

/// `‖f‖₂` by trapezoid quadrature.
pub fn l2_norm<T: Scalar>(f: &GridFunction<T>) -> f64 {
    f.grid
        .weights()
        .iter()
        .zip(&f.values)
        .map(|(&w, &v)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `L²` distance of two functions sampled on the same grid.
pub fn l2_distance(a: &GridFunction<f64>, b: &GridFunction<f64>) -> Result<f64> {
    Ok(l2_norm(&a.sub(b)?))
}

/// `F f(u) = ∫ e^{iux} f(x) dx` at every node of `u_grid`, direct O(nm) trapezoid sum.
pub fn fourier_forward<T: Scalar>(f: &GridFunction<T>, u_grid: &Grid1D) -> ComplexGridFunction {
    let x = f.grid.nodes();
    let wf: Vec<Complex64> =
        f.grid.weights().iter().zip(&f.values).map(|(&w, &v)| v.to_complex() * w).collect();
    let values = (0..u_grid.len())
        .into_par_iter()
        .map(|k| {
            let u = u_grid.node(k);
            x.iter().zip(&wf).map(|(&xj, &a)| a * Complex64::cis(u * xj)).sum()
        })
        .collect();
    GridFunction { grid: u_grid.clone(), values }
}

/// Same sum as [`fourier_forward`], evaluated with a chirp-z transform in O((n+m) log(n+m)).
pub fn fourier_forward_fft<T: Scalar>(f: &GridFunction<T>, u_grid: &Grid1D) -> ComplexGridFunction {
    let n = f.grid.len();
    let m = u_grid.len();
    let (x0, dx) = (f.grid.lo, f.grid.spacing());
    let (u0, du) = (u_grid.lo, u_grid.spacing());
    let alpha = du * dx;
    // e^{iα k j} = e^{iα k²/2} e^{iα j²/2} e^{-iα (k-j)²/2}
    let chirp = |q: i64| Complex64::cis(0.5 * alpha * (q * q) as f64);
    let len = (n + m - 1).next_power_of_two();
    let mut a = vec![Complex64::default(); len];
    for (j, (&w, &v)) in f.grid.weights().iter().zip(&f.values).enumerate() {
        a[j] = v.to_complex() * w * Complex64::cis(u0 * dx * j as f64) * chirp(j as i64);
    }
    let mut b = vec![Complex64::default(); len];
    for (q, bq) in b.iter_mut().enumerate().take(m) {
        *bq = chirp(q as i64).conj();
    }
    for q in 1..n {
        b[len - q] = chirp(q as i64).conj();
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai *= bi;
    }
    inv.process(&mut a);
    let scale = 1.0 / len as f64;
    let values = (0..m)
        .map(|k| {
            let phase = Complex64::cis(u0 * x0 + du * x0 * k as f64) * chirp(k as i64);
            a[k] * scale * phase
        })
        .collect();
    GridFunction { grid: u_grid.clone(), values }
}

/// `(1/2π) ∫_{-πl}^{πl} e^{-ixu} F(u) du` as an evaluator at arbitrary `x`.
#[derive(Clone, Debug)]
pub struct TruncatedInverse {
    u: Vec<f64>,
    wf: Vec<Complex64>,
}

impl TruncatedInverse {
    pub fn new(spectrum: &ComplexGridFunction, l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid(format!("cutoff l must be positive, got {l}")));
        }
        let g = spectrum.grid();
        let cut = PI * l;
        if !g.is_symmetric() {
            return Err(Error::Coverage(format!("u grid [{}, {}] is not symmetric", g.lo(), g.hi())));
        }
        if !g.covers(-cut, cut) {
            return Err(Error::Coverage(format!("u grid half-width {} < πl = {cut}", g.hi())));
        }
        let owned;
        let spec = if (g.hi() - cut).abs() <= REL_TOL * cut {
            spectrum
        } else {
            let sub = Grid1D::symmetric(cut, g.len())?;
            owned = GridFunction::from_fn(sub, |u| spectrum.at(u));
            &owned
        };
        let g = spec.grid();
        let wf = g.weights().iter().zip(spec.values()).map(|(&w, &v)| v * (w / (2.0 * PI))).collect();
        Ok(TruncatedInverse { u: g.nodes(), wf })
    }

    /// Phases advance by recurrence along the uniform grid and are recomputed exactly
    /// every 32 nodes.
    pub fn eval_complex(&self, x: f64) -> Complex64 {
        let n = self.u.len();
        let step = if n > 1 { Complex64::cis(-x * (self.u[1] - self.u[0])) } else { Complex64::new(1.0, 0.0) };
        let mut acc = Complex64::new(0.0, 0.0);
        for k0 in (0..n).step_by(32) {
            let mut z = Complex64::cis(-x * self.u[k0]);
            for a in &self.wf[k0..(k0 + 32).min(n)] {
                acc += a * z;
                z *= step;
            }
        }
        acc
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.eval(x)).collect()
    }
}

impl RealFn for TruncatedInverse {
    fn eval(&self, x: f64) -> f64 {
        self.eval_complex(x).re
    }
}

/// Truncated inverse transform onto `x_grid`; also returns `max |Im|` of the result.
pub fn fourier_inverse_truncated(
    spectrum: &ComplexGridFunction,
    l: f64,
    x_grid: &Grid1D,
) -> Result<(GridFunction<f64>, f64)> {
    let inv = TruncatedInverse::new(spectrum, l)?;
    let vals: Vec<Complex64> =
        (0..x_grid.len()).into_par_iter().map(|i| inv.eval_complex(x_grid.node(i))).collect();
    let imag = vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let f = GridFunction { grid: x_grid.clone(), values: vals.iter().map(|v| v.re).collect() };
    Ok((f, imag))
}

/// `(f * g)(x) = Σ_y f(y) g(x - y) h` on the grid of `f`.
pub fn convolve(f: &GridFunction<f64>, g: &GridFunction<f64>) -> Result<GridFunction<f64>> {
    let h = f.grid.spacing();
    if (h - g.grid.spacing()).abs() > 1e-9 * h {
        return Err(Error::invalid(format!(
            "spacing mismatch: {h} vs {}",
            g.grid.spacing()
        )));
    }
    let n = f.grid.len() as i64;
    let shift = -g.grid.lo / h;
    let aligned = (shift - shift.round()).abs() < 1e-9;
    let values = if aligned {
        let s = shift.round() as i64;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for (k, &gk) in g.values.iter().enumerate() {
                    let j = i + s - k as i64;
                    if (0..n).contains(&j) {
                        acc += f.values[j as usize] * gk;
                    }
                }
                acc * h
            })
            .collect()
    } else {
        let x = f.grid.nodes();
        (0..n as usize)
            .into_par_iter()
            .map(|i| x.iter().zip(&f.values).map(|(&y, &fy)| fy * g.at(x[i] - y)).sum::<f64>() * h)
            .collect()
    };
    Ok(GridFunction { grid: f.grid.clone(), values })
}

/// Composite Simpson rule with `n` (rounded up to even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Adaptive Simpson to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Log-spaced points with the endpoints reproduced exactly.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect();
    if let (Some(first), true) = (v.first_mut(), n > 0) {
        *first = lo;
    }
    if n > 1 {
        v[n - 1] = hi;
    }
    v
}

/// Ordinary least squares `y ≈ a + s x`; returns `(s, a)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let s = sxy / sxx;
    (s, my - s * mx)
}
