use std::f64::consts::PI;

use num_complex::Complex64;

use super::config::{Bandwidth, ExperimentConfig, Method, Tuning};
use crate::ecf::{compute_ecf, fourier_g1_hat, g1_hat_evaluator};
use crate::error::{Error, Result, StageExt};
use crate::invert::{
    build_series_plan, contraction_factor, fourier_estimate, fourier_required_halfwidth, fourier_spectrum_from_fn, plugin_estimate, ContractionReport, SeriesPlan,
};
use crate::model::{fourier_g1_exact, forward_g, JumpLaw, SimpleKernel, WeightH};
use crate::numcore::{fourier_inverse_truncated, l2_norm, Grid1D, GridFunction, RealFn};
use crate::onb::{build_eta, onb_pipeline, EtaSystem, HaarBasis};
use crate::simulate::{sample_field, seeded_rng, GridSample, DEFAULT_MAX_CELLS};
use crate::smooth::{default_bandwidths, select_bandwidth, smooth, KernelFamily, SmoothingKernel};

/// Everything a method needs that does not depend on the sample.
pub struct MethodSetup {
    pub method: Method,
    pub kernel: SimpleKernel,
    pub law: JumpLaw,
    pub law_name: &'static str,
    pub h: WeightH,
    pub report: ContractionReport,
    pub plan: SeriesPlan,
    pub tuning: Tuning,
    pub x_grid: Grid1D,
    pub u_points: usize,
    pub family: KernelFamily,
    pub oracle_g1: bool,
    pub eta: Option<EtaSystem>,
    pub g0_true: GridFunction<f64>,
}

impl MethodSetup {
    pub fn new(cfg: &ExperimentConfig, method: Method) -> Result<Self> {
        cfg.validate()?;
        let kernel = cfg.kernel_model()?;
        let law = cfg.jump_law.build()?;
        let h = cfg.weight()?;
        let tuning = cfg.tuning(method);
        let report = contraction_factor(&kernel, &h, cfg.pivot_rule()).stage("inversion")?;
        let plan = build_series_plan(&report, tuning.n_n).stage("inversion")?;
        let x_grid = cfg.x_grid()?;
        let eta = match method {
            Method::Onb => {
                let basis = HaarBasis::new(cfg.a, cfg.haar_levels, cfg.m)?;
                Some(build_eta(basis, &kernel, &report).stage("inversion")?)
            }
            _ => None,
        };
        let g0_true = GridFunction::from_fn(x_grid.clone(), |x| h.eval(x) * law.density(x));
        Ok(MethodSetup {
            method,
            kernel,
            law,
            law_name: cfg.jump_law.name(),
            h,
            report,
            plan,
            tuning,
            x_grid,
            u_points: cfg.u_points,
            family: cfg.smoothing_family(),
            oracle_g1: cfg.oracle_g1,
            eta,
            g0_true,
        })
    }

    /// `g₀ = h·v₀`.
    pub fn g0(&self, x: f64) -> f64 {
        self.h.eval(x) * self.law.density(x)
    }

    /// `g₁` from the forward map of the true `g₀`.
    pub fn g1_exact(&self, x: f64) -> f64 {
        let g0 = |y: f64| self.g0(y);
        forward_g(&self.kernel, &self.h, &g0, x)
    }

    fn exact_fourier_g1(&self) -> Result<impl Fn(f64) -> Complex64 + Sync + '_> {
        if !(self.h.signed && self.h.beta == 1.0) {
            return Err(Error::invalid("exact F[g₁] is available for h(x) = x only"));
        }
        Ok(move |u: f64| fourier_g1_exact(&self.kernel, &self.law, u))
    }

    /// `ĝ₀` from a sample, smoothed per the tuning.
    pub fn estimate(&self, sample: &GridSample) -> Result<GridFunction<f64>> {
        let raw = self.raw_estimate(sample)?;
        self.smooth(raw).stage("smoothing")
    }

    fn raw_estimate(&self, sample: &GridSample) -> Result<GridFunction<f64>> {
        let l = self.tuning.l;
        let u_points = self.u_points;
        match self.method {
            Method::Plugin => {
                if self.oracle_g1 {
                    let g1 = |x: f64| self.g1_exact(x);
                    return Ok(plugin_estimate(&g1, &self.plan, &self.x_grid));
                }
                let ecf = compute_ecf(sample.values(), &Grid1D::symmetric(PI * l, u_points)?).stage("ecf")?;
                let g1 = g1_hat_evaluator(&ecf, l).stage("g1")?;
                Ok(plugin_estimate(&g1, &self.plan, &self.x_grid))
            }
            Method::Fourier => {
                if self.oracle_g1 {
                    let fg1 = self.exact_fourier_g1()?;
                    let spec = fourier_spectrum_from_fn(&fg1, &self.plan, l, u_points).stage("inversion")?;
                    return Ok(fourier_inverse_truncated(&spec, l, &self.x_grid).stage("inversion")?.0);
                }
                let need = fourier_required_halfwidth(&self.plan, l);
                let ecf = compute_ecf(sample.values(), &Grid1D::symmetric(need, u_points)?).stage("ecf")?;
                let fg1 = fourier_g1_hat(&ecf);
                let est = fourier_estimate(&fg1, &self.plan, &self.report, l, u_points, &self.x_grid)
                    .stage("inversion")?;
                Ok(est.g0_hat)
            }
            Method::Onb => {
                let system = self.eta.as_ref().expect("onb setup builds the eta system");
                if self.oracle_g1 {
                    let g1 = |x: f64| self.g1_exact(x);
                    return onb_pipeline(&g1, system, &self.x_grid).stage("inversion");
                }
                let ecf = compute_ecf(sample.values(), &Grid1D::symmetric(PI * l, u_points)?).stage("ecf")?;
                let g1 = g1_hat_evaluator(&ecf, l).stage("g1")?;
                onb_pipeline(&g1, system, &self.x_grid).stage("inversion")
            }
        }
    }

    fn smooth(&self, est: GridFunction<f64>) -> Result<GridFunction<f64>> {
        let b = match self.tuning.bandwidth {
            None => return Ok(est),
            Some(Bandwidth::Fixed(b)) => b,
            Some(Bandwidth::Auto(_)) => select_bandwidth(&est, self.family, &default_bandwidths())?.b,
        };
        smooth(&est, &SmoothingKernel::new(self.family, b)?)
    }

    /// `‖g₀ - ĝ₀‖₂²` on the x-grid over `[-A, A]`.
    pub fn mse(&self, est: &GridFunction<f64>) -> Result<f64> {
        Ok(l2_norm(&self.g0_true.sub(est)?).powi(2))
    }
}

/// Evaluate `g1` in bulk; kept for callers that want a sampled `ĝ₁`.
pub fn sample_on(g1: &dyn RealFn, grid: &Grid1D) -> GridFunction<f64> {
    GridFunction::from_fn(grid.clone(), |x| g1.eval(x))
}

/// Field sample of replication `rep`.
pub fn simulate(cfg: &ExperimentConfig, seed: u64, rep: u64) -> Result<GridSample> {
    let kernel = cfg.kernel_model()?;
    let law = cfg.jump_law.build()?;
    let mut rng = seeded_rng(seed, rep);
    sample_field(&kernel, &law, &cfg.window, cfg.mesh, &mut rng, DEFAULT_MAX_CELLS).stage("simulate")
}

pub struct PipelineOutput {
    pub g0_hat: GridFunction<f64>,
    pub mse: f64,
}

/// simulate → ECF → ĝ₁ → inversion → smoothing → MSE for one replication.
pub fn run_pipeline(cfg: &ExperimentConfig, setup: &MethodSetup, rep: u64) -> Result<PipelineOutput> {
    let sample = simulate(cfg, cfg.master_seed, rep)?;
    let g0_hat = setup.estimate(&sample)?;
    let mse = setup.mse(&g0_hat).stage("mse")?;
    Ok(PipelineOutput { g0_hat, mse })
}
