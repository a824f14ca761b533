//! Empirical characteristic function of a field sample and the cutoff estimator of `g₁`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numcore::{
    fourier_inverse_truncated, logspace, ols, simpson, ComplexGridFunction, Grid1D, GridFunction, TruncatedInverse,
};

/// `ψ̂`, `θ̂` and the stabilized reciprocal `1/ψ̃` on a u-grid.
#[derive(Clone, Debug)]
pub struct EcfEstimate {
    pub u_grid: Grid1D,
    pub psi_hat: Vec<Complex64>,
    pub theta_hat: Vec<Complex64>,
    pub n: usize,
    pub stabilized_recip: Vec<Complex64>,
}

/// Grid nodes per exact phase evaluation in [`compute_ecf`].
const ANCHOR: usize = 32;

/// `1/ψ̂` when `|ψ̂| > N^{-1/2}`, else 0.
pub fn stabilize(psi_hat: Complex64, n: usize) -> Complex64 {
    if psi_hat.norm() > 1.0 / (n as f64).sqrt() {
        psi_hat.inv()
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// `ψ̂(u) = (1/N) Σ e^{iuY}` and `θ̂(u) = (1/N) Σ Y e^{iuY}` at every node.
pub fn compute_ecf(sample: &[f64], u_grid: &Grid1D) -> Result<EcfEstimate> {
    if sample.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    if sample.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("sample contains non-finite values"));
    }
    let n = sample.len();
    let inv_n = 1.0 / n as f64;
    let h = u_grid.spacing();
    let chunks: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..u_grid.len())
        .step_by(ANCHOR)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k0| {
            let len = ANCHOR.min(u_grid.len() - k0);
            let u0 = u_grid.node(k0);
            let mut psi = vec![Complex64::new(0.0, 0.0); len];
            let mut theta = vec![Complex64::new(0.0, 0.0); len];
            for &y in sample {
                // e^{iuy} advanced along the grid, re-anchored exactly every ANCHOR nodes
                let mut z = Complex64::from_polar(1.0, u0 * y);
                let step = Complex64::from_polar(1.0, h * y);
                for j in 0..len {
                    psi[j] += z;
                    theta[j] += z * y;
                    z *= step;
                }
            }
            for v in psi.iter_mut().chain(theta.iter_mut()) {
                *v *= inv_n;
            }
            (psi, theta)
        })
        .collect();
    let (mut psi_hat, mut theta_hat): (Vec<Complex64>, Vec<Complex64>) =
        chunks.into_iter().flat_map(|(p, t)| p.into_iter().zip(t)).unzip();
    let len = u_grid.len();
    if u_grid.lo() == -u_grid.hi() {
        // mirrored nodes get exact conjugates so the cutoff treats ±u alike
        for k in 0..len / 2 {
            psi_hat[k] = psi_hat[len - 1 - k].conj();
            theta_hat[k] = theta_hat[len - 1 - k].conj();
        }
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    for k in (0..u_grid.len()).filter(|&k| u_grid.node(k) == 0.0) {
        psi_hat[k] = Complex64::new(1.0, 0.0);
        theta_hat[k] = Complex64::new(mean, 0.0);
    }
    let stabilized_recip = psi_hat.iter().map(|&p| stabilize(p, n)).collect();
    Ok(EcfEstimate { u_grid: u_grid.clone(), psi_hat, theta_hat, n, stabilized_recip })
}

impl EcfEstimate {
    /// `u,re_psi,im_psi,re_theta,im_theta` rows.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("u,re_psi,im_psi,re_theta,im_theta\n");
        for (k, (p, t)) in self.psi_hat.iter().zip(&self.theta_hat).enumerate() {
            let _ = writeln!(s, "{},{},{},{},{}", self.u_grid.node(k), p.re, p.im, t.re, t.im);
        }
        s
    }
}

/// `F̂[g₁] = θ̂ / ψ̃` (zero where masked).
pub fn fourier_g1_hat(ecf: &EcfEstimate) -> ComplexGridFunction {
    let values = ecf.theta_hat.iter().zip(&ecf.stabilized_recip).map(|(&t, &r)| t * r).collect();
    GridFunction::new(ecf.u_grid.clone(), values).expect("ecf arrays match their grid")
}

/// `ĝ_{1,l}` as a pointwise evaluator.
pub fn g1_hat_evaluator(ecf: &EcfEstimate, l: f64) -> Result<TruncatedInverse> {
    TruncatedInverse::new(&fourier_g1_hat(ecf), l)
}

/// `ĝ_{1,l}(x) = (1/2π) ∫_{-πl}^{πl} e^{-ixu} F̂[g₁](u) du` on `x_grid`.
pub fn g1_hat(ecf: &EcfEstimate, l: f64, x_grid: &Grid1D) -> Result<GridFunction<f64>> {
    let (g, imag) = fourier_inverse_truncated(&fourier_g1_hat(ecf), l, x_grid)?;
    let scale = crate::numcore::l2_norm(&g).max(f64::MIN_POSITIVE);
    if imag > 1e-6 * scale.max(1.0) {
        log::warn!("ĝ₁ imaginary residue {imag:e} relative to ‖ĝ₁‖ = {scale:e}");
    }
    Ok(g)
}

/// `L/(1+(πl)²)^β + (K̄/N) l (1+(πl)²)^β`.
pub fn corollary2_bound(l: f64, big_l: f64, beta: f64, kbar: f64, n: usize) -> f64 {
    let w = (1.0 + (PI * l).powi(2)).powf(beta);
    big_l / w + kbar / n as f64 * l * w
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffChoice {
    pub l: f64,
    pub bound: f64,
    /// Set when `β = 0` makes the bound increasing in `l`.
    pub degenerate: bool,
}

/// Grid search of [`corollary2_bound`] over 1000 log-spaced `l ∈ [0.05, 50]`.
pub fn select_cutoff(big_l: f64, beta: f64, kbar: f64, n: usize) -> Result<CutoffChoice> {
    select_cutoff_on(big_l, beta, kbar, n, &logspace(0.05, 50.0, 1000))
}

pub fn select_cutoff_on(big_l: f64, beta: f64, kbar: f64, n: usize, ls: &[f64]) -> Result<CutoffChoice> {
    if !(big_l >= 0.0 && beta >= 0.0 && kbar > 0.0) || n == 0 || ls.is_empty() {
        return Err(Error::invalid("cutoff selection needs L ≥ 0, β ≥ 0, K̄ > 0, N > 0"));
    }
    if beta == 0.0 {
        log::warn!("β = 0: cutoff bound is increasing in l, returning l = {}", ls[0]);
        return Ok(CutoffChoice { l: ls[0], bound: corollary2_bound(ls[0], big_l, beta, kbar, n), degenerate: true });
    }
    let mut best = CutoffChoice { l: ls[0], bound: f64::INFINITY, degenerate: false };
    for &l in ls {
        let b = corollary2_bound(l, big_l, beta, kbar, n);
        if b < best.bound {
            best = CutoffChoice { l, bound: b, degenerate: false };
        }
    }
    Ok(best)
}

/// `‖g₁ - g_{1,l}‖² + (K/N)(√E|Y|⁴ + ‖g₁‖₁²) ∫_{-πl}^{πl} du/|ψ(u)|²`.
pub fn theorem_bound_g1(
    bias_sq: f64,
    fourth_moment: f64,
    g1_l1: f64,
    psi: &dyn Fn(f64) -> Complex64,
    l: f64,
    n: usize,
    k: f64,
) -> Result<f64> {
    if n == 0 || !(l >= 0.0) {
        return Err(Error::invalid("bound needs N > 0 and l ≥ 0"));
    }
    if l == 0.0 {
        return Ok(bias_sq);
    }
    let cut = PI * l;
    let nodes = 4001;
    let mut min_abs = f64::INFINITY;
    let inv = |u: f64| {
        let a = psi(u).norm_sqr();
        1.0 / a
    };
    for i in 0..nodes {
        let u = -cut + 2.0 * cut * i as f64 / (nodes - 1) as f64;
        min_abs = min_abs.min(psi(u).norm());
    }
    // below machine epsilon ψ cannot be told apart from 0
    if !(min_abs > f64::EPSILON) {
        return Err(Error::DivergentBound(format!("ψ vanishes on [-πl, πl] (min |ψ| = {min_abs:e})")));
    }
    let integral = simpson(inv, -cut, cut, nodes - 1);
    if !integral.is_finite() {
        return Err(Error::DivergentBound("∫ du/|ψ|² is not finite".into()));
    }
    Ok(bias_sq + k / n as f64 * (fourth_moment.sqrt() + g1_l1 * g1_l1) * integral)
}

/// Constants of the decay hypothesis `c_ψ (1+u²)^{-β/2} ≤ |ψ(u)| ≤ C_ψ (1+u²)^{-β/2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub beta: f64,
    pub c_psi: f64,
    pub cap_c_psi: f64,
}

/// Least-squares fit of `log|ψ|` against `-(β/2) log(1+u²)`, then the envelope constants.
pub fn fit_decay(u: &[f64], psi_abs: &[f64]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = u
        .iter()
        .zip(psi_abs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&u, &p)| ((1.0 + u * u).ln(), p.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid("decay fit needs at least two points with |ψ| > 0"));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (slope, _) = ols(&xs, &ys);
    let beta = (-2.0 * slope).max(0.0);
    let scaled = u.iter().zip(psi_abs).map(|(&u, &p)| p * (1.0 + u * u).powf(0.5 * beta));
    let (lo, hi) = scaled.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(DecayFit { beta, c_psi: lo, cap_c_psi: hi })
}

/// `K̄ = 2π K c_ψ (√E|Y|⁴ + ‖g₁‖₁²)`.
pub fn kbar(k: f64, c_psi: f64, fourth_moment: f64, g1_l1: f64) -> f64 {
    2.0 * PI * k * c_psi * (fourth_moment.sqrt() + g1_l1 * g1_l1)
}

/// Smallest `K ≥ 0` with `bias + K·variance_factor ≥ observed` for every pilot observation.
pub fn calibrate_k(observed: &[f64], bias_sq: f64, variance_factor: f64) -> Result<f64> {
    if !(variance_factor > 0.0) || observed.is_empty() {
        return Err(Error::invalid("calibration needs pilot errors and a positive variance factor"));
    }
    Ok(observed.iter().map(|&e| (e - bias_sq) / variance_factor).fold(0.0, f64::max))
}
