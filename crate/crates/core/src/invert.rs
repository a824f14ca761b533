//! Inversion of `g₁ = Σ (νₖ/|fₖ|) h/h(·/fₖ) g₀(·/fₖ)` by the truncated Neumann series,
//! in the spatial domain (plug-in) and in the Fourier domain.

use std::f64::consts::PI;

use num_complex::Complex64;
use crate::error::{Error, Result};
use crate::model::{CoeffGroup, SimpleKernel, WeightH};
use crate::numcore::{fourier_inverse_truncated, ComplexGridFunction, Grid1D, GridFunction, RealFn};

const TIE_TOL: f64 = 1e-12;

/// Largest grouped plan [`build_series_plan`] will materialize.
pub const MAX_SERIES_TERMS: usize = 2_000_000;

/// How to choose the pivot group `Q`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum PivotRule {
    /// Group with the smallest contraction factor, ties to the largest `|f|`.
    #[default]
    Auto,
    /// Group whose coefficient equals this value.
    Value(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionReport {
    pub e: f64,
    pub satisfied: bool,
    /// `f₁`.
    pub pivot: f64,
    /// `n₁`: total volume of the pivot group (its cardinality for unit volumes).
    pub n1: f64,
    pub pivot_group: CoeffGroup,
    pub others: Vec<CoeffGroup>,
    /// `sₖ = s(f₁/fₖ)` per entry of `others`.
    pub s: Vec<f64>,
    pub h: WeightH,
}

fn contraction_for(groups: &[CoeffGroup], p: usize, h: &WeightH) -> f64 {
    let f1 = groups[p].value;
    let sum: f64 = groups
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != p)
        .map(|(_, g)| g.mass * h.sup_ratio(f1 / g.value) * (f1.abs() / g.value.abs()).sqrt())
        .sum();
    sum / groups[p].mass
}

/// `e(f,h) = (1/n₁) Σ_{k∉Q} sₖ (|f₁|/|fₖ|)^{1/2}` with the pivot chosen by `rule`.
pub fn contraction_factor(kernel: &SimpleKernel, h: &WeightH, rule: PivotRule) -> Result<ContractionReport> {
    h.validate()?;
    let groups = kernel.groups();
    let p = match rule {
        PivotRule::Value(v) => groups
            .iter()
            .position(|g| (g.value - v).abs() <= TIE_TOL * g.value.abs().max(v.abs()))
            .ok_or_else(|| Error::invalid(format!("pivot {v} is not a kernel coefficient")))?,
        PivotRule::Auto => {
            let es: Vec<f64> = (0..groups.len()).map(|i| contraction_for(&groups, i, h)).collect();
            let mut best = 0;
            for i in 1..groups.len() {
                let tie = (es[i] - es[best]).abs() <= TIE_TOL * es[best].abs().max(1.0);
                if es[i] < es[best] && !tie || tie && groups[i].value.abs() > groups[best].value.abs() {
                    best = i;
                }
            }
            best
        }
    };
    let e = contraction_for(&groups, p, h);
    let pivot_group = groups[p].clone();
    let f1 = pivot_group.value;
    let others: Vec<CoeffGroup> = groups.into_iter().enumerate().filter(|&(i, _)| i != p).map(|(_, g)| g).collect();
    let s = others.iter().map(|g| h.sup_ratio(f1 / g.value)).collect();
    Ok(ContractionReport { e, satisfied: e < 1.0, pivot: f1, n1: pivot_group.mass, pivot_group, others, s, h: *h })
}

/// One grouped series term `sign · weight · h(x)/h(scale·x) · g₁(scale·x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTerm {
    pub depth: usize,
    /// `f₁^{j+1} / Π f_{iₘ}`.
    pub scale: f64,
    /// `Π f_{iₘ}` over the multi-index.
    pub product: f64,
    /// Number of (volume-weighted) multi-indices collapsed into this term.
    pub multiplicity: f64,
    /// `multiplicity · (|f₁|/n₁)^{j+1} / |Π f_{iₘ}|`.
    pub weight: f64,
    pub sign: f64,
}

impl SeriesTerm {
    /// Signed coefficient of `g₁(scale·x)` in the spatial series.
    pub fn coefficient(&self, h: &WeightH) -> f64 {
        self.sign * self.weight * h.ratio(self.scale)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPlan {
    pub f1: f64,
    pub n1: f64,
    pub n_n: usize,
    pub e: f64,
    pub contraction_ok: bool,
    pub h: WeightH,
    pub terms: Vec<SeriesTerm>,
    /// Number of terms with `j ≥ 1` before grouping: `Σ_{j=1}^{n_N} (n - n₁)^j`.
    pub raw_count: f64,
}

impl SeriesPlan {
    /// Grouped terms with `j ≥ 1`.
    pub fn grouped_count(&self) -> usize {
        self.terms.iter().filter(|t| t.depth > 0).count()
    }
}

fn compositions(total: usize, parts: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
    if parts == 1 {
        cur.push(total);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for k in (0..=total).rev() {
        cur.push(k);
        compositions(total - k, parts - 1, out, cur);
        cur.pop();
    }
}

fn multinomial(ks: &[usize]) -> f64 {
    let mut acc = 1.0;
    let mut n = 0usize;
    for &k in ks {
        for i in 1..=k {
            n += 1;
            acc = acc * n as f64 / i as f64;
        }
    }
    acc
}

fn term(report: &ContractionReport, depth: usize, product: f64, multiplicity: f64) -> SeriesTerm {
    let (f1, n1) = (report.pivot, report.n1);
    SeriesTerm {
        depth,
        scale: f1.powi(depth as i32 + 1) / product,
        product,
        multiplicity,
        weight: multiplicity * (f1.abs() / n1).powi(depth as i32 + 1) / product.abs(),
        sign: if depth.is_multiple_of(2) { 1.0 } else { -1.0 },
    }
}

/// Series terms up to depth `n_N`, one per multiset of distinct non-pivot values.
pub fn build_series_plan(report: &ContractionReport, n_n: usize) -> Result<SeriesPlan> {
    if !report.satisfied {
        log::warn!("contraction factor {} ≥ 1: the series need not converge", report.e);
    }
    let g = report.others.len();
    let count = grouped_term_count(g, n_n);
    if count > MAX_SERIES_TERMS as f64 {
        return Err(Error::Resource(format!(
            "series plan needs {count:.0} terms (budget {MAX_SERIES_TERMS}); use a smaller n_N"
        )));
    }
    let mut terms = vec![term(report, 0, 1.0, 1.0)];
    if g > 0 {
        for j in 1..=n_n {
            let mut comps = Vec::new();
            compositions(j, g, &mut comps, &mut Vec::new());
            for ks in comps {
                let mut product = 1.0;
                let mut mult = multinomial(&ks);
                for (grp, &k) in report.others.iter().zip(&ks) {
                    product *= grp.value.powi(k as i32);
                    mult *= grp.mass.powi(k as i32);
                }
                terms.push(term(report, j, product, mult));
            }
        }
    }
    Ok(plan(report, n_n, terms))
}

/// `1 + Σ_{j=1}^{n_N} C(j+g-1, g-1)` for `g` distinct non-pivot values.
pub fn grouped_term_count(g: usize, n_n: usize) -> f64 {
    if g == 0 {
        return 1.0;
    }
    let binom = |n: usize, k: usize| (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64);
    1.0 + (1..=n_n).map(|j| binom(j + g - 1, g - 1)).sum::<f64>()
}

/// Same series, one term per ordered multi-index (reference enumeration).
pub fn build_series_plan_raw(report: &ContractionReport, n_n: usize) -> SeriesPlan {
    let idx: Vec<(f64, f64)> = report
        .others
        .iter()
        .flat_map(|g| g.indices.iter().map(move |_| (g.value, g.mass / g.indices.len() as f64)))
        .collect();
    let mut terms = vec![term(report, 0, 1.0, 1.0)];
    let mut level: Vec<(f64, f64)> = vec![(1.0, 1.0)];
    for j in 1..=n_n {
        if idx.is_empty() {
            break;
        }
        let mut next = Vec::with_capacity(level.len() * idx.len());
        for &(p, w) in &level {
            for &(v, nu) in &idx {
                next.push((p * v, w * nu));
            }
        }
        terms.extend(next.iter().map(|&(p, w)| term(report, j, p, w)));
        level = next;
    }
    plan(report, n_n, terms)
}

fn plan(report: &ContractionReport, n_n: usize, terms: Vec<SeriesTerm>) -> SeriesPlan {
    let m = report.others.iter().map(|g| g.indices.len()).sum::<usize>() as f64;
    SeriesPlan {
        f1: report.pivot,
        n1: report.n1,
        n_n,
        e: report.e,
        contraction_ok: report.satisfied,
        h: report.h,
        terms,
        raw_count: (1..=n_n).map(|j| m.powi(j as i32)).sum(),
    }
}

/// `ĝ₀(x) = Σ_terms coefficient · g₁(scale·x)` on `x_grid`.
pub fn plugin_estimate(g1: &dyn RealFn, plan: &SeriesPlan, x_grid: &Grid1D) -> GridFunction<f64> {
    let coeffs: Vec<(f64, f64)> = plan.terms.iter().map(|t| (t.coefficient(&plan.h), t.scale)).collect();
    GridFunction::from_fn(x_grid.clone(), |x| coeffs.iter().map(|&(c, s)| c * g1.eval(s * x)).sum())
}

/// `(|f₁|^{1/2}/n₁) s(f₁) [(1 + Σ_{j≤n_N} e^j) err_g₁ + e^{n_N+1} ‖g₁‖₂ / (1-e)]`.
pub fn plugin_error_bound(plan: &SeriesPlan, err_g1: f64, norm_g1: f64) -> Result<f64> {
    let e = plan.e;
    if !(e < 1.0) {
        return Err(Error::BoundInapplicable(format!("contraction factor {e} ≥ 1")));
    }
    let geo: f64 = (0..=plan.n_n).map(|j| e.powi(j as i32)).sum();
    let tail = e.powi(plan.n_n as i32 + 1) / (1.0 - e);
    Ok(plan.f1.abs().sqrt() / plan.n1 * plan.h.sup_ratio(plan.f1) * (geo * err_g1 + tail * norm_g1))
}

/// `(1/n₁) Σ_{k∉Q} νₖ (|fₖ|/|f₁|)^β`, the Fourier-domain contraction.
pub fn fourier_contraction(report: &ContractionReport) -> f64 {
    let beta = report.h.beta;
    report.others.iter().map(|g| g.mass * (g.value.abs() / report.pivot.abs()).powf(beta)).sum::<f64>() / report.n1
}

#[derive(Clone, Debug)]
pub struct FourierEstimate {
    pub g0_hat: GridFunction<f64>,
    pub spectrum: ComplexGridFunction,
    /// `false` when the Fourier-domain contraction is ≥ 1.
    pub condition_ok: bool,
}

/// Half-width of the `F̂[g₁]` grid needed by [`fourier_estimate`].
pub fn fourier_required_halfwidth(plan: &SeriesPlan, l: f64) -> f64 {
    plan.terms.iter().map(|t| PI * l / t.scale.abs()).fold(0.0, f64::max)
}

/// `F̂[g₀](t) = Σ_terms (coefficient/|scale|) F̂[g₁](t/scale)` on a `u_points` grid over
/// `[-πl, πl]`, then the truncated inverse onto `x_grid`.
pub fn fourier_estimate(
    fg1: &ComplexGridFunction,
    plan: &SeriesPlan,
    report: &ContractionReport,
    l: f64,
    u_points: usize,
    x_grid: &Grid1D,
) -> Result<FourierEstimate> {
    if plan.h.beta.fract() != 0.0 {
        return Err(Error::invalid(format!("Fourier inversion needs integer β, got {}", plan.h.beta)));
    }
    let need = fourier_required_halfwidth(plan, l);
    if !fg1.grid().covers(-need, need) {
        return Err(Error::Coverage(format!(
            "F̂[g₁] grid [{}, {}] does not cover ±{need}",
            fg1.grid().lo(),
            fg1.grid().hi()
        )));
    }
    let q = fourier_contraction(report);
    let condition_ok = q < 1.0;
    if !condition_ok {
        log::warn!("Fourier-domain contraction {q} ≥ 1");
    }
    let coeffs: Vec<(f64, f64)> =
        plan.terms.iter().map(|t| (t.coefficient(&plan.h) / t.scale.abs(), t.scale)).collect();
    let u_grid = Grid1D::symmetric(PI * l, u_points)?;
    let spectrum = GridFunction::from_fn(u_grid, |t| {
        coeffs.iter().map(|&(c, s)| fg1.at(t / s) * c).sum::<Complex64>()
    });
    let (g0_hat, _) = fourier_inverse_truncated(&spectrum, l, x_grid)?;
    Ok(FourierEstimate { g0_hat, spectrum, condition_ok })
}

/// `F̂[g₀]` from an exact `F[g₁]` callable, same series.
pub fn fourier_spectrum_from_fn(
    fg1: &(dyn Fn(f64) -> Complex64 + Sync),
    plan: &SeriesPlan,
    l: f64,
    u_points: usize,
) -> Result<ComplexGridFunction> {
    let coeffs: Vec<(f64, f64)> =
        plan.terms.iter().map(|t| (t.coefficient(&plan.h) / t.scale.abs(), t.scale)).collect();
    let u_grid = Grid1D::symmetric(PI * l, u_points)?;
    Ok(GridFunction::from_fn(u_grid, |t| coeffs.iter().map(|&(c, s)| fg1(t / s) * c).sum::<Complex64>()))
}

/// `(1/(n₁|f₁|^β)) [err(l/|f₁|) + q^{n_N+1}/(1-q) ‖g₁‖₂ + Σ_{j≥1} Σ (Π sᵢ/n₁^j) err(|Π fᵢ/f₁^{j+1}| l)]`,
/// `err(c)` being `‖ĝ_{1,c} - g₁‖₂`.
pub fn fourier_error_bound(
    plan: &SeriesPlan,
    report: &ContractionReport,
    err_at: &dyn Fn(f64) -> f64,
    norm_g1: f64,
    l: f64,
) -> Result<f64> {
    let q = fourier_contraction(report);
    if !(q < 1.0) {
        return Err(Error::BoundInapplicable(format!("Fourier-domain contraction {q} ≥ 1")));
    }
    let (f1, n1, beta) = (plan.f1.abs(), plan.n1, plan.h.beta);
    let mut acc = err_at(l / f1) + q.powi(plan.n_n as i32 + 1) / (1.0 - q) * norm_g1;
    for t in plan.terms.iter().filter(|t| t.depth > 0) {
        let j = t.depth as i32;
        let s_prod = (t.product.abs() / f1.powi(j)).powf(beta);
        acc += t.multiplicity * s_prod / n1.powi(j) * err_at((t.product / plan.f1.powi(j + 1)).abs() * l);
    }
    Ok(acc / (n1 * f1.powf(beta)))
}

/// `g₁ = Σ (νₖ/|fₖ|) h/h(·/fₖ) g₀(·/fₖ)` sampled on `x_grid`.
pub fn forward_g_grid(kernel: &SimpleKernel, h: &WeightH, g0: &dyn RealFn, x_grid: &Grid1D) -> GridFunction<f64> {
    GridFunction::from_fn(x_grid.clone(), |x| crate::model::forward_g(kernel, h, g0, x))
}

/// Relative `L²` residual of the forward map applied to `g0_hat` against `g1`, on `x_grid`.
pub fn forward_residual(
    kernel: &SimpleKernel,
    h: &WeightH,
    g0_hat: &GridFunction<f64>,
    g1: &dyn RealFn,
    x_grid: &Grid1D,
) -> f64 {
    let fwd = forward_g_grid(kernel, h, g0_hat, x_grid);
    let target = GridFunction::from_fn(x_grid.clone(), |x| g1.eval(x));
    let diff = fwd.sub(&target).expect("same grid");
    crate::numcore::l2_norm(&diff) / crate::numcore::l2_norm(&target).max(f64::MIN_POSITIVE)
}
