//! Convolution smoothing `g̃ = ĝ * K_b` and its kernels.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numcore::{
    adaptive_simpson, convolve, fourier_forward, logspace, ComplexGridFunction, Grid1D, GridFunction,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    Epanechnikov,
    /// Fejér kernel `K(x) = (1 - cos x)/(π x²)`, `F[K](t) = (1 - |t|)₊`.
    BandLimited,
}

impl KernelFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "bandlimited" => Ok(KernelFamily::BandLimited),
            other => Err(Error::invalid(format!("unknown smoothing kernel {other:?}"))),
        }
    }

    /// `F[K](z)` at unit bandwidth.
    fn ft_unit(&self, z: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-0.5 * z * z).exp(),
            KernelFamily::Epanechnikov => {
                if z.abs() < EPAN_SERIES {
                    epan_series(z, false)
                } else {
                    3.0 * (z.sin() - z * z.cos()) / (z * z * z)
                }
            }
            KernelFamily::BandLimited => (1.0 - z.abs()).max(0.0),
        }
    }

    /// `d/dz F[K](z)` at unit bandwidth.
    fn ft_unit_deriv(&self, z: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => -z * (-0.5 * z * z).exp(),
            KernelFamily::Epanechnikov => {
                if z.abs() < EPAN_SERIES {
                    epan_series(z, true)
                } else {
                    let (s, c) = z.sin_cos();
                    3.0 * (z * z * s - 3.0 * s + 3.0 * z * c) / z.powi(4)
                }
            }
            KernelFamily::BandLimited => {
                if z.abs() < 1.0 {
                    -z.signum()
                } else {
                    0.0
                }
            }
        }
    }

    /// `K(x)` at unit bandwidth.
    fn density_unit(&self, x: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            KernelFamily::Epanechnikov => {
                if x.abs() <= 1.0 {
                    0.75 * (1.0 - x * x)
                } else {
                    0.0
                }
            }
            KernelFamily::BandLimited => {
                if x.abs() < 1e-4 {
                    (1.0 - x * x / 12.0) / (2.0 * PI)
                } else {
                    (1.0 - x.cos()) / (PI * x * x)
                }
            }
        }
    }

    /// Half-width beyond which the sampled kernel is cut, in units of `b`.
    fn reach(&self) -> f64 {
        match self {
            KernelFamily::Gaussian => 12.0,
            KernelFamily::Epanechnikov => 1.0,
            KernelFamily::BandLimited => f64::INFINITY,
        }
    }
}

/// Below this `|z|` the closed Epanechnikov transform loses digits to cancellation.
const EPAN_SERIES: f64 = 0.5;

/// `3 Σ_{k≥1} (-1)^{k+1} 2k z^{2k-2}/(2k+1)!` or its derivative.
fn epan_series(z: f64, deriv: bool) -> f64 {
    let z2 = z * z;
    let mut sum = 0.0;
    // c = 2k/(2k+1)! with alternating sign
    let mut fact = 6.0;
    let mut zp = 1.0;
    for k in 1..=10 {
        let kk = k as f64;
        if k > 1 {
            fact *= (2.0 * kk) * (2.0 * kk + 1.0);
        }
        let sign = if k % 2 == 1 { 3.0 } else { -3.0 };
        let c = sign * 2.0 * kk / fact;
        if !deriv {
            sum += c * zp;
            zp *= z2;
        } else if k > 1 {
            sum += c * (2.0 * kk - 2.0) * zp;
            zp *= z2;
        }
    }
    if deriv {
        z * sum
    } else {
        sum
    }
}

/// `K_b(x) = K(x/b)/b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingKernel {
    pub family: KernelFamily,
    pub b: f64,
}

impl SmoothingKernel {
    pub fn new(family: KernelFamily, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {b}")));
        }
        Ok(SmoothingKernel { family, b })
    }

    pub fn density(&self, x: f64) -> f64 {
        self.family.density_unit(x / self.b) / self.b
    }

    /// `F[K_b](t)`.
    pub fn ft(&self, t: f64) -> f64 {
        self.family.ft_unit(self.b * t)
    }

    /// `∂/∂b F[K_b](t)`.
    pub fn ft_db(&self, t: f64) -> f64 {
        t * self.family.ft_unit_deriv(self.b * t)
    }

    /// `C_K = sup |F[K_b]|`.
    pub fn c_k(&self) -> f64 {
        1.0
    }

    /// (K3) constant from the family's analytic bound.
    pub fn c1(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian => 2.0,
            KernelFamily::Epanechnikov => check_k3(self.family, &logspace(0.1, 2.0, 20), &dense_axis()).1,
            // Lipschitz constant of (1 - |t|)₊ is 1
            KernelFamily::BandLimited => 1.0,
        }
    }
}

fn dense_axis() -> Vec<f64> {
    crate::numcore::linspace(-200.0, 200.0, 40001)
}

/// `ĝ * K_b` on the grid of `est`; the sampled kernel is normalized to unit discrete mass.
pub fn smooth(est: &GridFunction<f64>, kern: &SmoothingKernel) -> Result<GridFunction<f64>> {
    let h = est.grid().spacing();
    let width = est.grid().hi() - est.grid().lo();
    let reach = (kern.family.reach() * kern.b).min(width);
    let half = (reach / h).floor() as usize;
    if half == 0 {
        return Ok(est.clone());
    }
    let kgrid = Grid1D::new(-(half as f64) * h, half as f64 * h, 2 * half + 1)?;
    let mut kvals: Vec<f64> = (0..kgrid.len()).map(|i| kern.density((i as f64 - half as f64) * h)).collect();
    let mass: f64 = kvals.iter().sum::<f64>() * h;
    if !(mass > 0.0) {
        return Ok(est.clone());
    }
    for v in &mut kvals {
        *v /= mass;
    }
    convolve(est, &GridFunction::new(kgrid, kvals)?)
}

/// `[(c₁/2π) ∫ min{1, b|x|}⁴ (1+x²)^{-δ} dx]^{1/4}`.
pub fn a_delta(b: f64, delta: f64, c1: f64) -> Result<f64> {
    if !(delta > 0.5) {
        return Err(Error::DivergentBound(format!("a_δ needs δ > 1/2, got {delta}")));
    }
    if !(b > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {b}")));
    }
    let tol = 1e-14;
    let knee = 1.0 / b;
    let inner = |x: f64| (b * x).powi(4) * (1.0 + x * x).powf(-delta);
    // log-substitution resolves the polynomial growth up to the knee
    let inner_log = |s: f64| {
        let x = s.exp();
        inner(x) * x
    };
    let tail_log = |s: f64| {
        let x = s.exp();
        (1.0 + x * x).powf(-delta) * x
    };
    let head = if knee <= 1.0 {
        adaptive_simpson(&inner, 0.0, knee, tol)
    } else {
        adaptive_simpson(&inner, 0.0, 1.0, tol) + adaptive_simpson(&inner_log, 0.0, knee.ln(), tol)
    };
    let far = knee.max(1.0) * 1e6;
    let mid = adaptive_simpson(&tail_log, knee.ln(), far.ln(), tol);
    let rest = far.powf(1.0 - 2.0 * delta) / (2.0 * delta - 1.0) - delta * far.powf(-1.0 - 2.0 * delta) / (2.0 * delta + 1.0);
    let integral = 2.0 * (head + mid + rest);
    Ok((c1 / (2.0 * PI) * integral).powf(0.25))
}

/// Smallest `c₁` with `|1 - F[K_b](x)| ≤ c₁ min{1, b|x|}` over the product grid.
pub fn check_k3(family: KernelFamily, bs: &[f64], xs: &[f64]) -> (bool, f64) {
    let c1 = bs
        .par_iter()
        .map(|&b| {
            let k = SmoothingKernel { family, b };
            xs.iter()
                .filter(|&&x| x != 0.0)
                .map(|&x| (1.0 - k.ft(x)).abs() / (b * x.abs()).min(1.0))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    (c1.is_finite(), c1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthChoice {
    pub b: f64,
    pub candidates: Vec<f64>,
    pub objective: Vec<f64>,
}

/// Default candidate bandwidths: 50 log-spaced points in `[0.05, 3]`.
pub fn default_bandwidths() -> Vec<f64> {
    logspace(0.05, 3.0, 50)
}

/// `argmin_b ‖F[ĝ₀] · ∂_b F[K_b]‖₂`, ties to the smaller `b`.
pub fn select_bandwidth(est: &GridFunction<f64>, family: KernelFamily, bs: &[f64]) -> Result<BandwidthChoice> {
    if bs.is_empty() {
        return Err(Error::invalid("empty bandwidth range"));
    }
    let b_min = bs.iter().cloned().fold(f64::INFINITY, f64::min);
    let nyquist = PI / est.grid().spacing();
    let u_max = nyquist.min(12.0 / b_min);
    let spec = fourier_forward(est, &Grid1D::symmetric(u_max, 4097)?);
    let objective: Vec<f64> = bs
        .par_iter()
        .map(|&b| {
            let k = SmoothingKernel { family, b };
            let vals: Vec<Complex64> = spec
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| v * k.ft_db(spec.grid().node(i)))
                .collect();
            crate::numcore::l2_norm(&GridFunction::new(spec.grid().clone(), vals).expect("same grid"))
        })
        .collect();
    let mut best = 0;
    for i in 1..bs.len() {
        if objective[i] < objective[best] || objective[i] == objective[best] && bs[i] < bs[best] {
            best = i;
        }
    }
    Ok(BandwidthChoice { b: bs[best], candidates: bs.to_vec(), objective })
}

/// `‖f‖_{H^δ} = ‖F f · (1+x²)^{δ/2}‖₂` from a sampled spectrum.
pub fn sobolev_norm(spectrum: &ComplexGridFunction, delta: f64) -> f64 {
    let g = spectrum.grid();
    let weighted: Vec<Complex64> =
        spectrum.values().iter().enumerate().map(|(i, &v)| v * (1.0 + g.node(i).powi(2)).powf(0.5 * delta)).collect();
    crate::numcore::l2_norm(&GridFunction::new(g.clone(), weighted).expect("same grid"))
}

/// `(C_K/2π) err + ‖g₀‖₁^{1/2} ‖g₀‖_{H^δ}^{1/2} a_δ(b)`.
pub fn smoothed_error_bound(kern: &SmoothingKernel, err: f64, g0_l1: f64, g0_sobolev: f64, delta: f64) -> Result<f64> {
    let a = a_delta(kern.b, delta, kern.c1())?;
    Ok(kern.c_k() / (2.0 * PI) * err + (g0_l1 * g0_sobolev).sqrt() * a)
}
