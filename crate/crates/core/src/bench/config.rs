use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invert::PivotRule;
use crate::model::{JumpLaw, SimpleKernel, WeightH};
use crate::numcore::{Grid1D, GridFunction};
use crate::smooth::KernelFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Plugin,
    Fourier,
    Onb,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Plugin, Method::Fourier, Method::Onb];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Plugin => "plugin",
            Method::Fourier => "fourier",
            Method::Onb => "onb",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "plugin" => Ok(Method::Plugin),
            "fourier" => Ok(Method::Fourier),
            "onb" => Ok(Method::Onb),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// One method or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodSel {
    One(Method),
    Many(Vec<Method>),
}

impl MethodSel {
    pub fn methods(&self) -> Vec<Method> {
        match self {
            MethodSel::One(m) => vec![*m],
            MethodSel::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

/// Fixed bandwidth or `"auto"` selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(f64),
    Auto(AutoKeyword),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum JumpLawConfig {
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    Exponential {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// Lévy density sampled at equally spaced points from `lo` to `hi`.
    Tabulated { lo: f64, hi: f64, density: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl JumpLawConfig {
    pub fn name(&self) -> &'static str {
        match self {
            JumpLawConfig::Gaussian { .. } => "gaussian",
            JumpLawConfig::Exponential { .. } => "exponential",
            JumpLawConfig::Tabulated { .. } => "tabulated",
        }
    }

    pub fn build(&self) -> Result<JumpLaw> {
        match self {
            JumpLawConfig::Gaussian { mean, sd, mass } => JumpLaw::gaussian(*mean, *sd, *mass),
            JumpLawConfig::Exponential { rate, mass } => JumpLaw::exponential(*rate, *mass),
            JumpLawConfig::Tabulated { lo, hi, density } => {
                let grid = Grid1D::new(*lo, *hi, density.len())?;
                JumpLaw::tabulated(GridFunction::new(grid, density.clone())?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub coeffs: Vec<f64>,
    pub offsets: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volumes: Option<Vec<f64>>,
}

/// Per-method replacements of the global tuning parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<Bandwidth>,
    #[serde(default, rename = "n_N", skip_serializing_if = "Option::is_none")]
    pub n_n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub d: usize,
    pub kernel: KernelConfig,
    pub jump_law: JumpLawConfig,
    pub window: Vec<usize>,
    pub mesh: i64,
    pub method: MethodSel,
    pub beta: f64,
    /// `h(x) = x^β` when true, `|x|^β` otherwise.
    pub signed_h: bool,
    #[serde(rename = "n_N")]
    pub n_n: usize,
    pub l: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub grid_points: usize,
    pub u_points: usize,
    /// `null` disables smoothing.
    pub bandwidth: Option<Bandwidth>,
    pub smoothing_kernel: String,
    pub haar_levels: u32,
    pub m: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub oracle_g1: bool,
    /// Pivot coefficient; automatic when absent.
    pub pivot: Option<f64>,
    pub method_overrides: BTreeMap<Method, MethodOverrides>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut overrides = BTreeMap::new();
        overrides.insert(Method::Onb, MethodOverrides { l: Some(4.5), bandwidth: Some(Bandwidth::Fixed(0.7)), n_n: None });
        ExperimentConfig {
            d: 2,
            kernel: KernelConfig {
                coeffs: vec![1.3, 0.2, 0.1, 0.1],
                offsets: vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
                volumes: None,
            },
            jump_law: JumpLawConfig::Gaussian { mean: 0.0, sd: 1.0, mass: 1.0 },
            window: vec![100, 100],
            mesh: 1,
            method: MethodSel::One(Method::Fourier),
            beta: 1.0,
            signed_h: true,
            n_n: 1,
            l: 1.0,
            a: 6.0,
            grid_points: 2048,
            u_points: 4097,
            bandwidth: Some(Bandwidth::Fixed(0.5)),
            smoothing_kernel: "epanechnikov".into(),
            haar_levels: 2,
            m: 7,
            reps: 20,
            master_seed: 20240607,
            oracle_g1: false,
            pivot: None,
            method_overrides: overrides,
        }
    }
}

/// Tuning parameters of one method after applying overrides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tuning {
    pub l: f64,
    pub n_n: usize,
    pub bandwidth: Option<Bandwidth>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let kernel = self.kernel_model().map_err(cfg_err)?;
        if kernel.dim() != self.d || self.window.len() != self.d {
            return Err(Error::Config(format!(
                "dimension d = {} but offsets have {} and window has {} axes",
                self.d,
                kernel.dim(),
                self.window.len()
            )));
        }
        if self.window.contains(&0) {
            return Err(Error::Config("window dims must be positive".into()));
        }
        if self.mesh < 1 {
            return Err(Error::Config("mesh must be a positive integer".into()));
        }
        self.jump_law.build().map_err(cfg_err)?;
        self.weight().map_err(cfg_err)?;
        if !(self.a > 0.0) || self.grid_points < 2 || self.u_points < 3 {
            return Err(Error::Config("need A > 0, grid_points ≥ 2, u_points ≥ 3".into()));
        }
        if self.m == 0 || self.m > 1usize << (self.haar_levels + 1) {
            return Err(Error::Config(format!("m = {} exceeds the {} Haar levels", self.m, self.haar_levels)));
        }
        KernelFamily::parse(&self.smoothing_kernel).map_err(cfg_err)?;
        if self.method.methods().is_empty() {
            return Err(Error::Config("no method selected".into()));
        }
        for m in Method::ALL {
            let t = self.tuning(m);
            if !(t.l > 0.0 && t.l.is_finite()) {
                return Err(Error::Config(format!("cutoff l must be positive for {}", m.name())));
            }
            if let Some(Bandwidth::Fixed(b)) = t.bandwidth {
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::Config(format!("bandwidth must be positive for {}", m.name())));
                }
            }
        }
        Ok(())
    }

    pub fn kernel_model(&self) -> Result<SimpleKernel> {
        let n = self.kernel.coeffs.len();
        let vols = self.kernel.volumes.clone().unwrap_or_else(|| vec![1.0; n]);
        SimpleKernel::new(self.kernel.coeffs.clone(), self.kernel.offsets.clone(), vols)
    }

    pub fn weight(&self) -> Result<WeightH> {
        let h = WeightH { beta: self.beta, signed: self.signed_h };
        h.validate()?;
        Ok(h)
    }

    pub fn pivot_rule(&self) -> PivotRule {
        self.pivot.map(PivotRule::Value).unwrap_or_default()
    }

    pub fn smoothing_family(&self) -> KernelFamily {
        KernelFamily::parse(&self.smoothing_kernel).unwrap_or(KernelFamily::Epanechnikov)
    }

    pub fn tuning(&self, method: Method) -> Tuning {
        let o = self.method_overrides.get(&method).cloned().unwrap_or_default();
        Tuning {
            l: o.l.unwrap_or(self.l),
            n_n: o.n_n.unwrap_or(self.n_n),
            bandwidth: o.bandwidth.or(self.bandwidth),
        }
    }

    pub fn x_grid(&self) -> Result<Grid1D> {
        Grid1D::symmetric(self.a, self.grid_points)
    }

    pub fn sample_size(&self) -> usize {
        self.window.iter().product()
    }
}
