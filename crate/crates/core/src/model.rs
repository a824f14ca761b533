//! Lévy characteristics of the basic random measure and their images under a
//! simple kernel `f = Σ fₖ 1_{Δₖ}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::numcore::{adaptive_simpson, GridFunction, Grid1D, RealFn};

const QUAD_TOL: f64 = 1e-13;
const SNAP_TOL: f64 = 1e-12;

/// Shape of the normalized jump distribution.
#[derive(Clone, Debug)]
pub enum JumpShape {
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    /// Density sampled on a grid, with node-wise CDF for inverse-transform sampling.
    Tabulated { pdf: GridFunction<f64>, cdf: Vec<f64> },
}

/// Finite Lévy measure `v₀ = total_mass · pdf`.
#[derive(Clone, Debug)]
pub struct JumpLaw {
    shape: JumpShape,
    total_mass: f64,
}

impl JumpLaw {
    pub fn gaussian(mean: f64, sd: f64, total_mass: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(Error::invalid(format!("gaussian jumps need finite mean and sd > 0, got ({mean}, {sd})")));
        }
        Self::with_mass(JumpShape::Gaussian { mean, sd }, total_mass)
    }

    pub fn exponential(rate: f64, total_mass: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("exponential rate must be positive, got {rate}")));
        }
        Self::with_mass(JumpShape::Exponential { rate }, total_mass)
    }

    /// Lévy density given on a grid; its integral becomes the total mass.
    pub fn tabulated(levy_density: GridFunction<f64>) -> Result<Self> {
        if levy_density.values().iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("tabulated density must be finite and non-negative"));
        }
        let mass = levy_density.integral();
        if !(mass > 0.0) {
            return Err(Error::invalid("tabulated density has zero mass"));
        }
        let pdf = levy_density.scale(1.0 / mass);
        let h = pdf.grid().spacing();
        let mut cdf = Vec::with_capacity(pdf.values().len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in pdf.values().windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Self::with_mass(JumpShape::Tabulated { pdf, cdf }, mass)
    }

    fn with_mass(shape: JumpShape, total_mass: f64) -> Result<Self> {
        if !(total_mass >= 0.0 && total_mass.is_finite()) {
            return Err(Error::invalid(format!("total mass must be finite and nonnegative, got {total_mass}")));
        }
        Ok(JumpLaw { shape, total_mass })
    }

    pub fn shape(&self) -> &JumpShape {
        &self.shape
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Density of a single jump.
    pub fn pdf(&self, x: f64) -> f64 {
        match &self.shape {
            JumpShape::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            JumpShape::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            JumpShape::Tabulated { pdf, .. } => pdf.at(x),
        }
    }

    /// Lévy density `v₀(x)`.
    pub fn density(&self, x: f64) -> f64 {
        self.total_mass * self.pdf(x)
    }

    /// Interval outside of which the density is negligible (or zero).
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            JumpShape::Gaussian { mean, sd } => (mean - 40.0 * sd, mean + 40.0 * sd),
            JumpShape::Exponential { rate } => (0.0, 75.0 / rate),
            JumpShape::Tabulated { pdf, .. } => (pdf.grid().lo(), pdf.grid().hi()),
        }
    }

    /// `∫_a^b g(x) pdf(x) dx` over the support.
    fn expect_on(&self, a: f64, b: f64, g: &dyn Fn(f64) -> f64) -> f64 {
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if a >= b {
            return 0.0;
        }
        match &self.shape {
            JumpShape::Tabulated { pdf, .. } => {
                // piecewise-linear density: integrate exactly between nodes
                let grid = pdf.grid();
                let mut cuts = vec![a];
                cuts.extend(grid.nodes().into_iter().filter(|&x| x > a && x < b));
                cuts.push(b);
                cuts.windows(2)
                    .map(|w| crate::numcore::simpson(|x| g(x) * pdf.at(x), w[0], w[1], 8))
                    .sum()
            }
            _ => {
                // split at 0 where the exponential density jumps
                let f = |x: f64| g(x) * self.pdf(x);
                if a < 0.0 && b > 0.0 {
                    adaptive_simpson(&f, a, 0.0, QUAD_TOL) + adaptive_simpson(&f, 0.0, b, QUAD_TOL)
                } else {
                    adaptive_simpson(&f, a, b, QUAD_TOL)
                }
            }
        }
    }

    /// `E[Y^k]` of a single jump.
    pub fn moment(&self, k: i32) -> f64 {
        match &self.shape {
            JumpShape::Exponential { rate } => (1..=k).map(|i| i as f64).product::<f64>() / rate.powi(k),
            JumpShape::Gaussian { mean, sd } => {
                // m_j = μ m_{j-1} + (j-1) σ² m_{j-2}
                let (mut prev, mut cur) = (0.0, 1.0);
                for j in 1..=k {
                    let next = mean * cur + (j - 1) as f64 * sd * sd * prev;
                    prev = cur;
                    cur = next;
                }
                cur
            }
            JumpShape::Tabulated { .. } => {
                let (lo, hi) = self.support();
                self.expect_on(lo, hi, &|x| x.powi(k))
            }
        }
    }

    /// `E|Y|`.
    pub fn abs_mean(&self) -> f64 {
        let (lo, hi) = self.support();
        self.expect_on(lo, hi, &|x: f64| x.abs())
    }

    /// `∫_{a<|x|≤b} x v₀(x) dx` for `0 ≤ a ≤ b`.
    pub fn first_moment_shell(&self, a: f64, b: f64) -> f64 {
        let m = match &self.shape {
            JumpShape::Exponential { rate } => {
                let prim = |x: f64| -(x + 1.0 / rate) * (-rate * x).exp();
                prim(b) - prim(a)
            }
            _ => self.expect_on(a, b, &|x| x) + self.expect_on(-b, -a, &|x| x),
        };
        self.total_mass * m
    }

    /// Characteristic function of a single jump.
    pub fn charfn(&self, u: f64) -> Complex64 {
        match &self.shape {
            JumpShape::Gaussian { mean, sd } => Complex64::new(-0.5 * sd * sd * u * u, u * mean).exp(),
            JumpShape::Exponential { rate } => Complex64::new(*rate, 0.0) / Complex64::new(*rate, -u),
            JumpShape::Tabulated { pdf, .. } => tabulated_transform(pdf, u, |_| 1.0),
        }
    }

    /// `d/du E e^{iuY} = E[iY e^{iuY}]`.
    pub fn charfn_deriv(&self, u: f64) -> Complex64 {
        match &self.shape {
            JumpShape::Gaussian { mean, sd } => Complex64::new(-sd * sd * u, *mean) * self.charfn(u),
            JumpShape::Exponential { rate } => {
                let d = Complex64::new(*rate, -u);
                Complex64::new(0.0, *rate) / (d * d)
            }
            JumpShape::Tabulated { pdf, .. } => Complex64::i() * tabulated_transform(pdf, u, |x| x),
        }
    }

    /// One jump drawn from the normalized law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.shape {
            JumpShape::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            JumpShape::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            JumpShape::Tabulated { pdf, cdf } => {
                let p: f64 = rng.random();
                let i = cdf.partition_point(|&c| c <= p).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[i - 1], cdf[i]);
                let grid = pdf.grid();
                let (x0, x1) = (grid.node(i - 1), grid.node(i));
                if c1 > c0 {
                    x0 + (x1 - x0) * (p - c0) / (c1 - c0)
                } else {
                    x0
                }
            }
        }
    }
}

fn tabulated_transform(pdf: &GridFunction<f64>, u: f64, g: impl Fn(f64) -> f64) -> Complex64 {
    let grid = pdf.grid();
    grid.weights()
        .iter()
        .zip(pdf.values())
        .enumerate()
        .map(|(i, (&w, &p))| {
            let x = grid.node(i);
            Complex64::cis(u * x) * (w * p * g(x))
        })
        .sum()
}

/// Generating triplet `(a, b, v)` with truncation function `1_{[-1,1]}`.
#[derive(Clone, Debug)]
pub struct LevyTriplet {
    pub a: f64,
    pub b: f64,
    pub law: JumpLaw,
}

impl LevyTriplet {
    pub fn new(a: f64, b: f64, law: JumpLaw) -> Result<Self> {
        if !a.is_finite() || !(b >= 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("triplet needs finite a and b ≥ 0, got ({a}, {b})")));
        }
        Ok(LevyTriplet { a, b, law })
    }

    /// Pure compound Poisson: no Gaussian part, drift equal to the truncated mean.
    pub fn compound_poisson(law: JumpLaw) -> Self {
        let a = law.first_moment_shell(0.0, 1.0);
        LevyTriplet { a, b: 0.0, law }
    }

    /// `K(t) = ita - t²b/2 + ∫ (e^{itx} - 1 - itx 1_{[-1,1]}(x)) v(x) dx`.
    pub fn cumulant(&self, t: f64) -> Complex64 {
        let trunc = self.law.first_moment_shell(0.0, 1.0);
        let jumps = (self.law.charfn(t) - 1.0) * self.law.total_mass();
        Complex64::new(-0.5 * t * t * self.b, t * (self.a - trunc)) + jumps
    }

    /// `K'(t)`.
    pub fn cumulant_deriv(&self, t: f64) -> Complex64 {
        let trunc = self.law.first_moment_shell(0.0, 1.0);
        Complex64::new(-t * self.b, self.a - trunc) + self.law.charfn_deriv(t) * self.law.total_mass()
    }
}

/// Weight `h(x) = |x|^β`, or `x^β` for integer `β` when `signed`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightH {
    pub beta: f64,
    pub signed: bool,
}

impl WeightH {
    pub fn abs_power(beta: f64) -> Result<Self> {
        let h = WeightH { beta, signed: false };
        h.validate()?;
        Ok(h)
    }

    pub fn power(beta: u32) -> Self {
        WeightH { beta: beta as f64, signed: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("weight exponent must be finite and ≥ 0, got {}", self.beta)));
        }
        if self.signed && self.beta.fract() != 0.0 {
            return Err(Error::invalid(format!("signed weight x^β needs integer β, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.signed {
            x.powi(self.beta as i32)
        } else {
            x.abs().powf(self.beta)
        }
    }

    /// `h(x)/h(cx)`, which does not depend on `x`.
    pub fn ratio(&self, c: f64) -> f64 {
        let r = c.abs().powf(-self.beta);
        if self.signed && c < 0.0 && (self.beta as i64) % 2 == 1 {
            -r
        } else {
            r
        }
    }

    /// `s(y) = sup_x |h(x)/h(yx)| = |y|^{-β}`.
    pub fn sup_ratio(&self, y: f64) -> f64 {
        y.abs().powf(-self.beta)
    }
}

/// Group of kernel indices sharing one coefficient value.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffGroup {
    pub value: f64,
    pub indices: Vec<usize>,
    /// Sum of the volumes `νₖ` over the group.
    pub mass: f64,
}

/// `f = Σ fₖ 1_{cₖ + [0,1)^d}` with cell volumes `νₖ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleKernel {
    coeffs: Vec<f64>,
    offsets: Vec<Vec<i64>>,
    volumes: Vec<f64>,
}

impl SimpleKernel {
    pub fn new(coeffs: Vec<f64>, offsets: Vec<Vec<i64>>, volumes: Vec<f64>) -> Result<Self> {
        let n = coeffs.len();
        if n == 0 {
            return Err(Error::invalid("kernel needs at least one coefficient"));
        }
        if offsets.len() != n || volumes.len() != n {
            return Err(Error::invalid(format!(
                "kernel arity mismatch: {n} coefficients, {} offsets, {} volumes",
                offsets.len(),
                volumes.len()
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite() || **c == 0.0) {
            return Err(Error::invalid(format!("kernel coefficients must be finite and nonzero, got {c}")));
        }
        if let Some(v) = volumes.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("cell volumes must be positive, got {v}")));
        }
        let d = offsets[0].len();
        if d == 0 || offsets.iter().any(|o| o.len() != d) {
            return Err(Error::invalid("offsets must share one positive dimension"));
        }
        for i in 0..n {
            if offsets[..i].contains(&offsets[i]) {
                return Err(Error::invalid(format!("duplicate cell offset {:?}", offsets[i])));
            }
        }
        Ok(SimpleKernel { coeffs, offsets, volumes })
    }

    /// Unit volumes, offsets laid out along the first axis.
    pub fn on_line(coeffs: Vec<f64>, d: usize) -> Result<Self> {
        let n = coeffs.len();
        let offsets = (0..n as i64)
            .map(|k| {
                let mut o = vec![0; d.max(1)];
                o[0] = k;
                o
            })
            .collect();
        Self::new(coeffs, offsets, vec![1.0; n])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn dim(&self) -> usize {
        self.offsets[0].len()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Sup-norm diameter of the offset set: the dependence range of the field.
    pub fn m_range(&self) -> i64 {
        (0..self.dim())
            .map(|a| {
                let it = self.offsets.iter().map(|o| o[a]);
                it.clone().max().unwrap() - it.min().unwrap()
            })
            .max()
            .unwrap_or(0)
    }

    /// Coefficients grouped by value after snapping equal-within-1e-12-relative values.
    pub fn groups(&self) -> Vec<CoeffGroup> {
        let mut groups: Vec<CoeffGroup> = Vec::new();
        for (k, &c) in self.coeffs.iter().enumerate() {
            match groups.iter_mut().find(|g| (g.value - c).abs() <= SNAP_TOL * g.value.abs().max(c.abs())) {
                Some(g) => {
                    g.indices.push(k);
                    g.mass += self.volumes[k];
                }
                None => groups.push(CoeffGroup { value: c, indices: vec![k], mass: self.volumes[k] }),
            }
        }
        groups
    }
}

/// `v₁(x) = Σ (νₖ/|fₖ|) v₀(x/fₖ)` on `x_grid`.
pub fn forward_levy_density(kernel: &SimpleKernel, v0: &dyn RealFn, x_grid: &Grid1D) -> GridFunction<f64> {
    GridFunction::from_fn(x_grid.clone(), |x| {
        kernel.coeffs.iter().zip(&kernel.volumes).map(|(&f, &nu)| nu / f.abs() * v0.eval(x / f)).sum()
    })
}

/// `g₁(x) = Σ (νₖ/|fₖ|) h(x)/h(x/fₖ) g₀(x/fₖ)` for `g = h·v`.
pub fn forward_g(kernel: &SimpleKernel, h: &WeightH, g0: &dyn RealFn, x: f64) -> f64 {
    kernel
        .coeffs
        .iter()
        .zip(&kernel.volumes)
        .map(|(&f, &nu)| nu / f.abs() * h.ratio(1.0 / f) * g0.eval(x / f))
        .sum()
}

/// `b₁ = b₀ Σ fₖ² νₖ`.
pub fn forward_gaussian(kernel: &SimpleKernel, b0: f64) -> Result<f64> {
    if !(b0 >= 0.0 && b0.is_finite()) {
        return Err(Error::invalid(format!("b0 must be a nonnegative real, got {b0}")));
    }
    Ok(b0 * kernel.coeffs.iter().zip(&kernel.volumes).map(|(f, nu)| f * f * nu).sum::<f64>())
}

/// `I(u) = ∫ x [1_{[-1,1]}(ux) - 1_{[-1,1]}(x)] v₀(x) dx`.
fn truncation_shift(law: &JumpLaw, u: f64) -> Result<f64> {
    if u == 0.0 {
        return Err(Error::invalid("truncation shift undefined at u = 0"));
    }
    let c = 1.0 / u.abs();
    if let JumpShape::Tabulated { pdf, .. } = law.shape() {
        let r = c.max(1.0);
        if !pdf.grid().covers(-r, r) {
            return Err(Error::Coverage(format!(
                "density grid [{}, {}] does not cover [-{r}, {r}]",
                pdf.grid().lo(),
                pdf.grid().hi()
            )));
        }
    }
    Ok(if c > 1.0 {
        law.first_moment_shell(1.0, c)
    } else if c < 1.0 {
        -law.first_moment_shell(c, 1.0)
    } else {
        0.0
    })
}

/// `U(u) = u (a₀ + ∫ x [1_{[-1,1]}(ux) - 1_{[-1,1]}(x)] v₀(x) dx)`.
pub fn u_function(law: &JumpLaw, a0: f64, u: f64) -> Result<f64> {
    if u == 0.0 {
        return Ok(0.0);
    }
    Ok(u * (a0 + truncation_shift(law, u)?))
}

/// `a₁ = Σ νₖ U(fₖ)`.
pub fn forward_drift(kernel: &SimpleKernel, triplet: &LevyTriplet) -> Result<f64> {
    kernel
        .coeffs
        .iter()
        .zip(&kernel.volumes)
        .map(|(&f, &nu)| Ok(nu * u_function(&triplet.law, triplet.a, f)?))
        .sum()
}

/// Image triplet `(a₁, b₁, v₁)` with `v₁` sampled on `x_grid`.
pub fn forward_triplet(
    kernel: &SimpleKernel,
    triplet: &LevyTriplet,
    x_grid: &Grid1D,
) -> Result<(f64, f64, GridFunction<f64>)> {
    let v0 = |x: f64| triplet.law.density(x);
    Ok((
        forward_drift(kernel, triplet)?,
        forward_gaussian(kernel, triplet.b)?,
        forward_levy_density(kernel, &v0, x_grid),
    ))
}

/// Invert `(a₁, b₁)` for `(a₀, b₀)` given `v₀`.
pub fn recover_a0_b0(kernel: &SimpleKernel, law: &JumpLaw, a1: f64, b1: f64) -> Result<(f64, f64)> {
    let (f, nu) = (&kernel.coeffs, &kernel.volumes);
    let s2: f64 = f.iter().zip(nu).map(|(f, n)| f * f * n).sum();
    let s1: f64 = f.iter().zip(nu).map(|(f, n)| f * n).sum();
    let scale: f64 = f.iter().zip(nu).map(|(f, n)| (f * n).abs()).sum();
    if s1.abs() <= SNAP_TOL * scale {
        return Err(Error::SingularRecovery("Σ fₖνₖ = 0: a₀ is not identifiable".into()));
    }
    let mut shift = 0.0;
    for (&fk, &nk) in f.iter().zip(nu) {
        shift += nk * fk * truncation_shift(law, fk)?;
    }
    Ok(((a1 - shift) / s1, b1 / s2))
}

/// `K(t)` of the basic random measure.
pub fn cumulant(triplet: &LevyTriplet, t: f64) -> Complex64 {
    triplet.cumulant(t)
}

/// `ψ(u) = E e^{iuX(0)} = exp Σ νₖ K(u fₖ)`.
pub fn charfn_x0(kernel: &SimpleKernel, triplet: &LevyTriplet, u: f64) -> Complex64 {
    kernel
        .coeffs
        .iter()
        .zip(&kernel.volumes)
        .map(|(&f, &nu)| triplet.cumulant(u * f) * nu)
        .sum::<Complex64>()
        .exp()
}

/// `θ(u) = E[X(0) e^{iuX(0)}] = -i ψ'(u)`.
pub fn theta_x0(kernel: &SimpleKernel, triplet: &LevyTriplet, u: f64) -> Complex64 {
    let d: Complex64 = kernel
        .coeffs
        .iter()
        .zip(&kernel.volumes)
        .map(|(&f, &nu)| triplet.cumulant_deriv(u * f) * (nu * f))
        .sum();
    -Complex64::i() * d * charfn_x0(kernel, triplet, u)
}

/// `F[x v₁](u) = -i ψ'(u)/ψ(u)` for a pure-jump image.
pub fn fourier_g1_exact(kernel: &SimpleKernel, law: &JumpLaw, u: f64) -> Complex64 {
    kernel
        .coeffs
        .iter()
        .zip(&kernel.volumes)
        .map(|(&f, &nu)| -Complex64::i() * law.charfn_deriv(u * f) * (nu * f * law.total_mass()))
        .sum()
}

/// `E X(0)^k` for `k ∈ {2, 4}` of a centered-or-not compound Poisson field value,
/// from the cumulants `κⱼ = Σ νₖ fₖ^j λ E[Y^j]`.
pub fn x0_moment(kernel: &SimpleKernel, law: &JumpLaw, k: u32) -> f64 {
    let kappa = |j: i32| -> f64 {
        kernel.coeffs.iter().zip(&kernel.volumes).map(|(f, nu)| nu * f.powi(j)).sum::<f64>()
            * law.total_mass()
            * law.moment(j)
    };
    let (k1, k2) = (kappa(1), kappa(2));
    match k {
        1 => k1,
        2 => k2 + k1 * k1,
        4 => {
            let (k3, k4) = (kappa(3), kappa(4));
            k4 + 4.0 * k3 * k1 + 3.0 * k2 * k2 + 6.0 * k2 * k1 * k1 + k1.powi(4)
        }
        _ => panic!("unsupported moment order {k}"),
    }
}
