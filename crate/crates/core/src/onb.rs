//! Orthonormal-basis inversion on functions supported in `[-A, A]`, with Haar wavelets.
//!
//! Inner products use the midpoint rule on a cell grid whose cell edges contain every
//! Haar breakpoint, so the sampled basis is orthonormal to rounding.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invert::ContractionReport;
use crate::model::{SimpleKernel, WeightH};
use crate::numcore::{Grid1D, GridFunction, RealFn};

const MIN_CELLS: usize = 4096;

/// `ψ` index: the scaling function or the wavelet of a level and shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HaarFn {
    Scaling,
    Wavelet { level: u32, shift: u32 },
}

/// First `m` Haar functions on `[-A, A]`.
#[derive(Clone, Debug)]
pub struct HaarBasis {
    a: f64,
    levels: u32,
    fns: Vec<HaarFn>,
    cells: Grid1D,
    samples: Vec<Vec<f64>>,
}

impl HaarBasis {
    pub fn new(a: f64, levels: u32, m: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("half-width A must be positive, got {a}")));
        }
        let full = 1usize << (levels + 1);
        if m == 0 || m > full {
            return Err(Error::invalid(format!("m = {m} must lie in 1..={full} for {levels} levels")));
        }
        let mut fns = vec![HaarFn::Scaling];
        'outer: for level in 0..=levels {
            for shift in 0..(1u32 << level) {
                if fns.len() == m {
                    break 'outer;
                }
                fns.push(HaarFn::Wavelet { level, shift });
            }
        }
        fns.truncate(m);
        let n_cells = MIN_CELLS.div_ceil(full) * full;
        let h = 2.0 * a / n_cells as f64;
        let cells = Grid1D::new(-a + 0.5 * h, a - 0.5 * h, n_cells)?;
        let mut basis = HaarBasis { a, levels, fns, cells, samples: vec![] };
        basis.samples = (0..m).map(|i| basis.sample(&|x| basis.eval(i, x))).collect();
        Ok(basis)
    }

    pub fn half_width(&self) -> f64 {
        self.a
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fns.is_empty()
    }

    pub fn functions(&self) -> &[HaarFn] {
        &self.fns
    }

    /// Cell centres used for quadrature.
    pub fn cells(&self) -> &Grid1D {
        &self.cells
    }

    /// `ψᵢ` sampled at the cell centres.
    pub fn sampled(&self, i: usize) -> &[f64] {
        &self.samples[i]
    }

    /// `ψᵢ(x)`, right-continuous, zero outside `[-A, A)`.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        let a = self.a;
        if !(x >= -a && x < a) {
            return 0.0;
        }
        match self.fns[i] {
            HaarFn::Scaling => 1.0 / (2.0 * a).sqrt(),
            HaarFn::Wavelet { level, shift } => {
                let w = 2.0 * a / (1u64 << level) as f64;
                let t = (x + a) / w - shift as f64;
                if (0.0..0.5).contains(&t) {
                    1.0 / w.sqrt()
                } else if (0.5..1.0).contains(&t) {
                    -1.0 / w.sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample(&self, f: &dyn RealFn) -> Vec<f64> {
        (0..self.cells.len()).map(|i| f.eval(self.cells.node(i))).collect()
    }

    /// Midpoint-rule inner product of two sampled functions.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.cells.spacing() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `⟨g, ψᵢ⟩` for every basis function.
    pub fn coefficients(&self, g: &dyn RealFn) -> Vec<f64> {
        let s = self.sample(g);
        self.samples.iter().map(|p| self.inner(&s, p)).collect()
    }

    /// `Σ cᵢ ψᵢ(x)`.
    pub fn combine_at(&self, c: &[f64], x: f64) -> f64 {
        c.iter().enumerate().map(|(i, &ci)| ci * self.eval(i, x)).sum()
    }
}

/// `ηⱼ = Σₖ (νₖ/|fₖ|) h(·)/h((f₁/fₖ)·) ψⱼ((f₁/fₖ)·)` and its Gram–Schmidt basis.
#[derive(Clone, Debug)]
pub struct EtaSystem {
    pub basis: HaarBasis,
    pub eta: Vec<Vec<f64>>,
    pub e_basis: Vec<Vec<f64>>,
    /// `mix[j][i] = ⟨ηᵢ, eⱼ⟩`, zero below the diagonal.
    pub mix: Vec<Vec<f64>>,
    pub f1: f64,
    pub n1: f64,
    pub e_factor: f64,
    pub h: WeightH,
    /// `min{1, |f₁|}`.
    pub m_scale: f64,
}

pub fn build_eta(basis: HaarBasis, kernel: &SimpleKernel, report: &ContractionReport) -> Result<EtaSystem> {
    let f1 = report.pivot;
    let h = report.h;
    if let Some(&big) = kernel.coeffs().iter().find(|c| c.abs() > f1.abs() * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!("pivot |{f1}| is not maximal (|{big}| is larger)")));
    }
    if !report.satisfied {
        return Err(Error::Precondition(format!("contraction factor {} ≥ 1", report.e)));
    }
    let terms: Vec<(f64, f64)> = kernel
        .coeffs()
        .iter()
        .zip(kernel.volumes())
        .map(|(&f, &nu)| (nu / f.abs() * h.ratio(f1 / f), f1 / f))
        .collect();
    let m = basis.len();
    let eta: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| basis.sample(&|x: f64| terms.iter().map(|&(w, c)| w * basis.eval(j, c * x)).sum::<f64>()))
        .collect();

    let mut e_basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (i, eta_i) in eta.iter().enumerate() {
        let mut v = eta_i.clone();
        for _pass in 0..2 {
            for e in &e_basis {
                let r = basis.inner(&v, e);
                for (vk, ek) in v.iter_mut().zip(e) {
                    *vk -= r * ek;
                }
            }
        }
        let norm = basis.inner(&v, &v).sqrt();
        let eta_norm = basis.inner(eta_i, eta_i).sqrt();
        if !(norm >= 1e-8 * eta_norm) || eta_norm == 0.0 {
            return Err(Error::Degenerate(format!("η{} is numerically dependent on its predecessors", i + 1)));
        }
        e_basis.push(v.into_iter().map(|x| x / norm).collect());
    }
    let mut mix = vec![vec![0.0; m]; m];
    for (i, eta_i) in eta.iter().enumerate() {
        for (j, e_j) in e_basis.iter().enumerate().take(i + 1) {
            mix[j][i] = basis.inner(eta_i, e_j);
        }
    }
    Ok(EtaSystem {
        basis,
        eta,
        e_basis,
        mix,
        f1,
        n1: report.n1,
        e_factor: report.e,
        h,
        m_scale: f1.abs().min(1.0),
    })
}

/// `ŷⱼ = ⟨ḡ₁, eⱼ⟩` with `ḡ₁(x) = h(x)/h(f₁x) g₁(f₁x)`.
pub fn project_g1bar(g1: &dyn RealFn, system: &EtaSystem) -> Vec<f64> {
    let r = system.h.ratio(system.f1);
    let f1 = system.f1;
    let cells = system.basis.cells();
    let gbar: Vec<f64> = (0..cells.len()).into_par_iter().map(|i| r * g1.eval(f1 * cells.node(i))).collect();
    system.e_basis.iter().map(|e| system.basis.inner(&gbar, e)).collect()
}

/// Backward substitution for the upper-triangular `mix · x = y`.
pub fn solve_coefficients(yhat: &[f64], mix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = yhat.len();
    if mix.len() != m || mix.iter().any(|row| row.len() != m) {
        return Err(Error::invalid("coefficient system has mismatched dimensions"));
    }
    let mut x = vec![0.0; m];
    for j in (0..m).rev() {
        let d = mix[j][j];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::SingularSystem(format!("zero diagonal at row {}", j + 1)));
        }
        let s: f64 = (j + 1..m).map(|i| mix[j][i] * x[i]).sum();
        x[j] = (yhat[j] - s) / d;
    }
    Ok(x)
}

/// `ĝ₀ = Σ x̂ᵢ ψᵢ` on `x_grid`.
pub fn onb_estimate(xhat: &[f64], basis: &HaarBasis, x_grid: &Grid1D) -> Result<GridFunction<f64>> {
    if xhat.len() != basis.len() {
        return Err(Error::invalid(format!("{} coefficients for {} basis functions", xhat.len(), basis.len())));
    }
    Ok(GridFunction::from_fn(x_grid.clone(), |x| basis.combine_at(xhat, x)))
}

/// Full chain: project `ḡ₁`, solve, combine on `x_grid`.
pub fn onb_pipeline(g1: &dyn RealFn, system: &EtaSystem, x_grid: &Grid1D) -> Result<GridFunction<f64>> {
    let y = project_g1bar(g1, system);
    let x = solve_coefficients(&y, &system.mix)?;
    onb_estimate(&x, &system.basis, x_grid)
}

/// `|f₁|/(n₁(1-e)) [2 tail + proj_err]`.
pub fn onb_error_bound(e_factor: f64, f1: f64, n1: f64, tail_norm: f64, proj_err: f64) -> Result<f64> {
    if !(e_factor < 1.0) {
        return Err(Error::BoundInapplicable(format!("contraction factor {e_factor} ≥ 1")));
    }
    Ok(f1.abs() / (n1 * (1.0 - e_factor)) * (2.0 * tail_norm + proj_err))
}
