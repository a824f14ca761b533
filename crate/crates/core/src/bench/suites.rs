//! Validation suites behind `idfield validate`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::error::{Error, Result, StageExt};
use crate::invert::{
    build_series_plan, build_series_plan_raw, contraction_factor, forward_residual, plugin_estimate, PivotRule,
    SeriesPlan,
};
use crate::model::{
    charfn_x0, forward_drift, forward_g, forward_gaussian, recover_a0_b0, theta_x0, JumpLaw, LevyTriplet,
    SimpleKernel, WeightH,
};
use crate::numcore::{adaptive_simpson, l2_norm, linspace, logspace, ols, Grid1D, GridFunction};
use crate::onb::{build_eta, onb_pipeline, solve_coefficients, HaarBasis};
use crate::simulate::{sample_field, seeded_rng, DEFAULT_MAX_CELLS};
use crate::smooth::{a_delta, check_k3, KernelFamily, SmoothingKernel};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, self.suite, c.name, c.detail)?;
        }
        Ok(())
    }
}

pub const SUITES: [&str; 4] = ["appendix-rates", "kernels", "fixed-point", "onb"];

pub fn run_suite(name: &str, cfg: &ExperimentConfig, reps: Option<usize>) -> Result<SuiteReport> {
    match name {
        "appendix-rates" => appendix_rates_suite(cfg, reps.unwrap_or(200)),
        "kernels" => kernels_suite(),
        "fixed-point" => fixed_point_suite(),
        "onb" => onb_suite(),
        other => Err(Error::Config(format!("unknown suite {other:?}; expected one of {SUITES:?}"))),
    }
}

/// Monte Carlo moments of the ECF errors at one `u` against sample size.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    /// Realized sample sizes `side^d`.
    pub n: Vec<usize>,
    /// `E|ψ̂(u) - ψ(u)|²`.
    pub psi_sq: Vec<f64>,
    /// `E|θ̂(u) - θ(u)|⁴`.
    pub theta_4: Vec<f64>,
    pub slope_psi: f64,
    pub slope_theta: f64,
}

/// `N ∈ {10², 10^2.5, …, 10⁴}`.
pub fn default_rate_sizes() -> Vec<f64> {
    (0..5).map(|i| 10f64.powf(2.0 + 0.5 * i as f64)).collect()
}

/// Level `i`, replication `r` draws from stream `(i << 32) | r` of `seed`.
pub fn validate_appendix_rates(
    kernel: &SimpleKernel,
    law: &JumpLaw,
    sizes: &[f64],
    reps: usize,
    u: f64,
    seed: u64,
) -> Result<RateReport> {
    if sizes.len() < 2 {
        return Err(Error::invalid("rate fit needs at least two sample sizes"));
    }
    let span = sizes.iter().cloned().fold(0.0, f64::max).log10() - sizes.iter().cloned().fold(f64::INFINITY, f64::min).log10();
    if span < 1.5 {
        log::warn!("sample sizes span {span:.2} decades, fewer than 1.5");
    }
    if reps < 50 {
        log::warn!("{reps} replications per size; rate fits want at least 50");
    }
    let d = kernel.dim();
    let triplet = LevyTriplet::compound_poisson(law.clone());
    let psi = charfn_x0(kernel, &triplet, u);
    let theta = theta_x0(kernel, &triplet, u);
    let mut report = RateReport { n: vec![], psi_sq: vec![], theta_4: vec![], slope_psi: 0.0, slope_theta: 0.0 };
    for (level, &size) in sizes.iter().enumerate() {
        let side = size.powf(1.0 / d as f64).round().max(1.0) as usize;
        let dims = vec![side; d];
        let errs: Vec<(f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = seeded_rng(seed, ((level as u64) << 32) | r as u64);
                let sample = sample_field(kernel, law, &dims, 1, &mut rng, DEFAULT_MAX_CELLS).stage("simulate")?;
                let n = sample.len() as f64;
                let (mut p, mut t) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                for &y in sample.values() {
                    let e = Complex64::from_polar(1.0, u * y);
                    p += e;
                    t += e * y;
                }
                Ok(((p / n - psi).norm_sqr(), (t / n - theta).norm_sqr().powi(2)))
            })
            .collect::<Result<_>>()?;
        report.n.push(side.pow(d as u32));
        report.psi_sq.push(errs.iter().map(|e| e.0).sum::<f64>() / reps as f64);
        report.theta_4.push(errs.iter().map(|e| e.1).sum::<f64>() / reps as f64);
    }
    let ln_n: Vec<f64> = report.n.iter().map(|&n| (n as f64).ln()).collect();
    let ln = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
    report.slope_psi = ols(&ln_n, &ln(&report.psi_sq)).0;
    report.slope_theta = ols(&ln_n, &ln(&report.theta_4)).0;
    Ok(report)
}

fn appendix_rates_suite(cfg: &ExperimentConfig, reps: usize) -> Result<SuiteReport> {
    let law = cfg.jump_law.build()?;
    let sizes = default_rate_sizes();
    let mut checks = vec![];
    let field = validate_appendix_rates(&cfg.kernel_model()?, &law, &sizes, reps, 1.0, cfg.master_seed)?;
    checks.push(rate_check("m-dependent field, E|ψ̂-ψ|²", field.slope_psi, -1.0, 0.15));
    checks.push(rate_check("m-dependent field, E|θ̂-θ|⁴", field.slope_theta, -2.0, 0.2));
    let iid = SimpleKernel::new(vec![1.0], vec![vec![0; cfg.d]], vec![1.0])?;
    let flat = validate_appendix_rates(&iid, &law, &sizes, reps, 1.0, cfg.master_seed)?;
    checks.push(rate_check("i.i.d. field, E|ψ̂-ψ|²", flat.slope_psi, -1.0, 0.1));
    checks.push(rate_check("i.i.d. field, E|θ̂-θ|⁴", flat.slope_theta, -2.0, 0.1));
    Ok(SuiteReport { suite: "appendix-rates".into(), checks })
}

fn rate_check(name: &str, slope: f64, target: f64, tol: f64) -> Check {
    Check::new(name, (slope - target).abs() <= tol, format!("slope {slope:.4}, target {target} ± {tol}"))
}

/// Fitted log–log slope of `a_δ(b)` on `b ∈ [1e-3, 1e-1]`.
pub fn a_delta_slope(delta: f64, c1: f64) -> Result<f64> {
    let bs = logspace(1e-3, 1e-1, 9);
    let ys = bs.iter().map(|&b| a_delta(b, delta, c1).map(f64::ln)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = bs.iter().map(|b| b.ln()).collect();
    Ok(ols(&xs, &ys).0)
}

/// (K1) unit mass and nonnegativity, (K2) `|F[K_b]| ≤ C_K`, (K3) fitted `c₁`.
pub fn kernel_conditions(family: KernelFamily) -> (Check, Check, Check) {
    let bs = linspace(0.1, 2.0, 20);
    let xs = linspace(-200.0, 200.0, 40001);
    let mut mass_err: f64 = 0.0;
    let mut negative = false;
    let mut sup_ft: f64 = 0.0;
    for &b in &bs {
        let k = SmoothingKernel { family, b };
        let f = |x: f64| k.density(x);
        let reach = match family {
            KernelFamily::Epanechnikov => b,
            _ => f64::INFINITY,
        };
        let mass = if reach.is_finite() {
            adaptive_simpson(&f, -reach, reach, 1e-13)
        } else {
            let r = 4000.0 * b;
            let tail = match family {
                // asymptotic tail of (1 - cos y)/(π y²) beyond ±R
                KernelFamily::BandLimited => {
                    let big = r / b;
                    2.0 / PI * (1.0 / big + big.sin() / big.powi(2) - 2.0 * big.cos() / big.powi(3))
                }
                _ => 0.0,
            };
            let pieces = linspace(-r, r, 801);
            pieces.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-15)).sum::<f64>() + tail
        };
        mass_err = mass_err.max((mass - 1.0).abs());
        negative |= xs.iter().any(|&x| k.density(x) < 0.0);
        sup_ft = xs.iter().map(|&x| k.ft(x).abs()).fold(sup_ft, f64::max);
    }
    let (holds, c1) = check_k3(family, &bs, &xs);
    let name = format!("{family:?}");
    (
        Check::new(format!("{name} (K1)"), mass_err <= 1e-8 && !negative, format!("max |∫K_b - 1| = {mass_err:.2e}")),
        Check::new(format!("{name} (K2)"), sup_ft <= 1.0 + 1e-12, format!("sup |F[K_b]| = {sup_ft:.6}")),
        Check::new(format!("{name} (K3)"), holds, format!("fitted c₁ = {c1:.6}")),
    )
}

fn kernels_suite() -> Result<SuiteReport> {
    let mut checks = vec![];
    for family in [KernelFamily::Gaussian, KernelFamily::Epanechnikov, KernelFamily::BandLimited] {
        let (k1, k2, k3) = kernel_conditions(family);
        checks.extend([k1, k2, k3]);
    }
    let (_, gauss_c1) = check_k3(KernelFamily::Gaussian, &linspace(0.1, 2.0, 20), &linspace(-200.0, 200.0, 40001));
    checks.push(Check::new("Gaussian c₁ ≤ 2", gauss_c1 <= 2.0, format!("c₁ = {gauss_c1:.6}")));
    for delta in [1.0, 1.5, 2.0] {
        let slope = a_delta_slope(delta, 1.0)?;
        let target = f64::min(1.0, (2.0 * delta - 1.0) / 4.0);
        checks.push(Check::new(
            format!("a_δ slope, δ = {delta}"),
            (slope - target).abs() <= 0.1,
            format!("slope {slope:.4}, target {target} ± 0.1"),
        ));
    }
    let slope = a_delta_slope(2.5, 1.0)?;
    checks.push(Check::new("a_δ slope, δ = 5/2", (0.9..=1.1).contains(&slope), format!("slope {slope:.4} in [0.9, 1.1]")));
    Ok(SuiteReport { suite: "kernels".into(), checks })
}

/// Largest bucketed difference between the grouped and raw expansions, relative to the
/// absolute mass of each bucket.
pub fn grouping_discrepancy(grouped: &SeriesPlan, raw: &SeriesPlan) -> f64 {
    let bucket = |p: &SeriesPlan| {
        let mut v: Vec<(usize, f64, f64)> =
            p.terms.iter().map(|t| (t.depth, t.scale, t.coefficient(&p.h))).collect();
        v.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
        let mut out: Vec<(usize, f64, f64, f64)> = vec![];
        for (d, s, c) in v {
            match out.last_mut() {
                Some(last) if last.0 == d && (last.1 - s).abs() <= 1e-12 * s.abs() => {
                    last.2 += c;
                    last.3 += c.abs();
                }
                _ => out.push((d, s, c, c.abs())),
            }
        }
        out
    };
    let (g, r) = (bucket(grouped), bucket(raw));
    if g.len() != r.len() {
        return f64::INFINITY;
    }
    g.iter()
        .zip(&r)
        .map(|(a, b)| {
            if a.0 != b.0 || (a.1 - b.1).abs() > 1e-12 * a.1.abs() {
                f64::INFINITY
            } else {
                (a.2 - b.2).abs() / a.3.max(b.3)
            }
        })
        .fold(0.0, f64::max)
}

/// Plug-in output and forward residual with exact `g₁` for the kernel `(1.0, 0.1)`, `β = 1`,
/// `n_N = 10`, Gaussian jumps: `(relative L² error, relative residual, e)`.
pub fn fixed_point_oracle() -> Result<(f64, f64, f64)> {
    let kernel = SimpleKernel::on_line(vec![1.0, 0.1], 1)?;
    let h = WeightH::power(1);
    let law = JumpLaw::gaussian(0.0, 1.0, 1.0)?;
    let report = contraction_factor(&kernel, &h, PivotRule::Auto)?;
    let plan = build_series_plan(&report, 10)?;
    let g0 = |x: f64| h.eval(x) * law.density(x);
    let g1 = |x: f64| forward_g(&kernel, &h, &g0, x);
    let m = report.pivot.abs().min(1.0);
    let grid = Grid1D::symmetric(6.0 * m, 4097)?;
    let est = plugin_estimate(&g1, &plan, &grid);
    let truth = GridFunction::from_fn(grid.clone(), g0);
    let rel = l2_norm(&est.sub(&truth)?) / l2_norm(&truth);
    let residual = forward_residual(&kernel, &h, &est, &g1, &grid);
    Ok((rel, residual, report.e))
}

fn fixed_point_suite() -> Result<SuiteReport> {
    let mut checks = vec![];
    let reference = SimpleKernel::new(
        vec![1.3, 0.2, 0.1, 0.1],
        vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
        vec![1.0; 4],
    )?;
    let r = contraction_factor(&reference, &WeightH::power(1), PivotRule::Auto)?;
    checks.push(Check::new("reference e(f,h)", (r.e - 0.946932).abs() <= 1e-6, format!("e = {:.8}", r.e)));
    let odd = contraction_factor(&SimpleKernel::on_line(vec![1.0, -1.0], 1)?, &WeightH::power(1), PivotRule::Auto)?;
    checks.push(Check::new("(1, -1) with odd h not satisfied", !odd.satisfied, format!("e = {}", odd.e)));

    let (rel, residual, e) = fixed_point_oracle()?;
    let tol = e.powi(11) / (1.0 - e) + 2e-3;
    checks.push(Check::new("exact-g₁ plug-in", rel < tol, format!("relative L² error {rel:.3e} < {tol:.3e}")));
    checks.push(Check::new("forward residual", residual < tol, format!("relative residual {residual:.3e} < {tol:.3e}")));

    let mut rng = seeded_rng(0x5eed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let kernel = random_kernel(&mut rng, 5)?;
        let n_n = rng.random_range(1..=6);
        let report = contraction_factor(&kernel, &WeightH::power(1), PivotRule::Auto)?;
        worst = worst.max(grouping_discrepancy(&build_series_plan(&report, n_n)?, &build_series_plan_raw(&report, n_n)));
    }
    checks.push(Check::new("grouped = raw expansion", worst <= 1e-14, format!("max relative gap {worst:.2e}")));

    let mut worst: f64 = 0.0;
    let mut n_ok = 0;
    while n_ok < 50 {
        let kernel = random_kernel(&mut rng, 5)?;
        let s1: f64 = kernel.coeffs().iter().sum();
        if s1.abs() < 1e-3 {
            continue;
        }
        let law = JumpLaw::gaussian(rng.random_range(-1.0..1.0), rng.random_range(0.3..2.0), rng.random_range(0.2..3.0))?;
        let triplet = LevyTriplet::new(rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0), law.clone())?;
        let a1 = forward_drift(&kernel, &triplet)?;
        let b1 = forward_gaussian(&kernel, triplet.b)?;
        let (a0, b0) = recover_a0_b0(&kernel, &law, a1, b1)?;
        worst = worst.max((a0 - triplet.a).abs()).max((b0 - triplet.b).abs());
        n_ok += 1;
    }
    checks.push(Check::new("(a₀, b₀) recovery", worst <= 1e-8, format!("max error {worst:.2e}")));
    let singular = recover_a0_b0(&SimpleKernel::on_line(vec![1.0, -1.0], 1)?, &JumpLaw::gaussian(0.0, 1.0, 1.0)?, 0.0, 1.0);
    checks.push(Check::new(
        "(1, -1) recovery is singular",
        matches!(singular, Err(Error::SingularRecovery(_))),
        format!("{:?}", singular.err().map(|e| e.to_string())),
    ));
    Ok(SuiteReport { suite: "fixed-point".into(), checks })
}

/// Up to `n_max` coefficients drawn from a small pool so that ties occur.
pub fn random_kernel<R: Rng>(rng: &mut R, n_max: usize) -> Result<SimpleKernel> {
    const POOL: [f64; 8] = [1.3, 1.0, 0.7, 0.4, 0.2, 0.1, -0.3, -0.15];
    let n = rng.random_range(1..=n_max);
    let coeffs = (0..n).map(|_| POOL[rng.random_range(0..POOL.len())]).collect();
    SimpleKernel::on_line(coeffs, 1)
}

/// Structural checks of the Haar η-system for the reference kernel, `m = 7`.
fn onb_suite() -> Result<SuiteReport> {
    let cfg = ExperimentConfig::default();
    let kernel = cfg.kernel_model()?;
    let h = cfg.weight()?;
    let report = contraction_factor(&kernel, &h, PivotRule::Auto)?;
    let basis = HaarBasis::new(cfg.a, cfg.haar_levels, cfg.m)?;
    let sys = build_eta(basis, &kernel, &report)?;
    let m = sys.basis.len();
    let mut checks = vec![];

    let mut ortho: f64 = 0.0;
    let mut lower: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let g = sys.basis.inner(&sys.e_basis[i], &sys.e_basis[j]);
            ortho = ortho.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            if j > i {
                lower = lower.max(sys.basis.inner(&sys.eta[i], &sys.e_basis[j]).abs());
            }
        }
    }
    checks.push(Check::new("Gram–Schmidt orthonormality", ortho <= 1e-10, format!("max deviation {ortho:.2e}")));
    checks.push(Check::new("mixing matrix upper-triangular", lower <= 1e-10, format!("max below-diagonal {lower:.2e}")));
    let floor = sys.n1 / sys.f1.abs() * (1.0 - sys.e_factor) - 1e-8;
    let min_diag = (0..m).map(|j| sys.mix[j][j]).fold(f64::INFINITY, f64::min);
    checks.push(Check::new("diagonal lower bound", min_diag >= floor, format!("min diag {min_diag:.6} ≥ {floor:.6}")));

    let coeffs: Vec<f64> = (0..m).map(|i| ((i as f64 + 1.0) * 0.37).sin()).collect();
    let g0 = |x: f64| sys.basis.combine_at(&coeffs, x);
    let g1 = |x: f64| forward_g(&kernel, &h, &g0, x);
    let grid = sys.basis.cells().clone();
    let est = onb_pipeline(&g1, &sys, &grid)?;
    let truth = GridFunction::from_fn(grid, g0);
    let gap = est.sub(&truth)?.max_abs();
    checks.push(Check::new("in-span recovery", gap <= 1e-8, format!("max error {gap:.2e}")));

    let x: Vec<f64> = (0..m).map(|i| 1.0 - 0.1 * i as f64).collect();
    let y: Vec<f64> = (0..m).map(|j| (j..m).map(|i| sys.mix[j][i] * x[i]).sum()).collect();
    let back = solve_coefficients(&y, &sys.mix)?;
    let round = back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::new("triangular solve round-trip", round <= 1e-12, format!("max error {round:.2e}")));
    Ok(SuiteReport { suite: "onb".into(), checks })
}
