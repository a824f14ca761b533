//! Exact simulation of moving-average fields with simple kernels over compound
//! Poisson cell variables.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{JumpLaw, SimpleKernel};

/// Largest number of cell variables materialized by default.
pub const DEFAULT_MAX_CELLS: usize = 1 << 27;

/// Portable generator for replication `stream` of `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn ln_factorial(k: u64) -> f64 {
    if k < 20 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let x = (k + 1) as f64;
    // Stirling series for ln Γ(x)
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
}

/// Poisson variate: sequential inversion below mean 30, PTRS transformed rejection above.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            let next = cdf + p;
            if next == cdf {
                break;
            }
            cdf = next;
        }
        return k;
    }
    let smu = mean.sqrt();
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    let log_mean = mean.ln();
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        if lhs <= -mean + k * log_mean - ln_factorial(k as u64) {
            return k as u64;
        }
    }
}

/// `Λ(Δ)` for a cell of the given volume: a Poisson number of jumps, summed.
pub fn sample_cp_cell<R: Rng + ?Sized>(rng: &mut R, law: &JumpLaw, volume: f64) -> Result<f64> {
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::invalid(format!("cell volume must be positive, got {volume}")));
    }
    let m = poisson(rng, volume * law.total_mass());
    Ok((0..m).map(|_| law.sample(rng)).sum())
}

/// Field values on a rectangular lattice window, row-major with the last index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSample {
    dims: Vec<usize>,
    mesh: i64,
    values: Vec<f64>,
}

impl GridSample {
    pub fn new(dims: Vec<usize>, mesh: i64, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::invalid(format!("window dims {dims:?} must be positive")));
        }
        if dims.iter().product::<usize>() != values.len() {
            return Err(Error::invalid("sample size does not match window dims"));
        }
        if mesh < 1 {
            return Err(Error::invalid(format!("mesh must be a positive integer, got {mesh}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample value at index {i}")));
        }
        Ok(GridSample { dims, mesh, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn mesh(&self) -> i64 {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Lattice index of the `flat`-th value.
    pub fn index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            idx[a] = flat % self.dims[a];
            flat /= self.dims[a];
        }
        idx
    }

    pub fn to_csv_string(&self) -> String {
        let d = self.dims.len();
        let mut s = String::new();
        for a in 1..=d {
            let _ = write!(s, "j{a},");
        }
        s.push_str("value\n");
        for (flat, v) in self.values.iter().enumerate() {
            for j in self.index(flat) {
                let _ = write!(s, "{j},");
            }
            let _ = writeln!(s, "{v}");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_csv_string().as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a `j1,...,jd,value` file; rows may come in any order but must fill a box.
    pub fn read_csv(path: &Path, mesh: i64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(h) => h.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::invalid(format!("{}: empty sample file", path.display()))),
        };
        let cols: Vec<&str> = header.trim().split(',').collect();
        let d = cols.len().saturating_sub(1);
        let expected: Vec<String> = (1..=d).map(|a| format!("j{a}")).chain(["value".to_string()]).collect();
        if d == 0 || cols != expected {
            return Err(Error::invalid(format!("{}: bad header {header:?}", path.display())));
        }
        let mut rows: Vec<(Vec<i64>, f64)> = Vec::new();
        for (ln, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.trim().split(',').collect();
            if parts.len() != d + 1 {
                return Err(Error::invalid(format!("{}: line {} has {} fields", path.display(), ln + 2, parts.len())));
            }
            let bad = || Error::invalid(format!("{}: unparsable line {}", path.display(), ln + 2));
            let idx = parts[..d].iter().map(|p| p.parse::<i64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
            let v = parts[d].parse::<f64>().map_err(|_| bad())?;
            rows.push((idx, v));
        }
        if rows.is_empty() {
            return Err(Error::invalid(format!("{}: no sample rows", path.display())));
        }
        let lo: Vec<i64> = (0..d).map(|a| rows.iter().map(|r| r.0[a]).min().unwrap()).collect();
        let hi: Vec<i64> = (0..d).map(|a| rows.iter().map(|r| r.0[a]).max().unwrap()).collect();
        let dims: Vec<usize> = (0..d).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
        let total: usize = dims.iter().product();
        if total != rows.len() {
            return Err(Error::invalid(format!("{}: rows do not fill a rectangular window", path.display())));
        }
        let mut values = vec![f64::NAN; total];
        for (idx, v) in rows {
            let flat = (0..d).fold(0usize, |acc, a| acc * dims[a] + (idx[a] - lo[a]) as usize);
            values[flat] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid(format!("{}: duplicate lattice indices", path.display())));
        }
        GridSample::new(dims, mesh, values)
    }
}

/// `Y_j = Σ fₖ W_{Δj - cₖ}` on the window `[0, dims)`, cells materialized row-major over
/// the extended box in one pass of `rng`.
pub fn sample_field<R: Rng + ?Sized>(
    kernel: &SimpleKernel,
    law: &JumpLaw,
    dims: &[usize],
    mesh: i64,
    rng: &mut R,
    max_cells: usize,
) -> Result<GridSample> {
    let d = kernel.dim();
    if dims.len() != d {
        return Err(Error::invalid(format!("window has {} axes, kernel has {d}", dims.len())));
    }
    if dims.contains(&0) {
        return Err(Error::invalid("window dims must be positive"));
    }
    if mesh < 1 {
        return Err(Error::invalid(format!("mesh must be a positive integer, got {mesh}")));
    }
    let vol = kernel.volumes()[0];
    if kernel.volumes().iter().any(|&v| v != vol) {
        return Err(Error::invalid("lattice simulation needs equal cell volumes"));
    }
    let offs = kernel.offsets();
    let lo: Vec<i64> = (0..d).map(|a| -offs.iter().map(|o| o[a]).max().unwrap()).collect();
    let hi: Vec<i64> = (0..d).map(|a| mesh * (dims[a] as i64 - 1) - offs.iter().map(|o| o[a]).min().unwrap()).collect();
    let ext: Vec<usize> = (0..d).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
    let n_cells = ext.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
    let n_cells = match n_cells {
        Some(n) if n <= max_cells => n,
        _ => return Err(Error::Resource(format!("extended window {ext:?} exceeds {max_cells} cells"))),
    };
    let cells: Vec<f64> = (0..n_cells).map(|_| sample_cp_cell(rng, law, vol)).collect::<Result<_>>()?;

    let strides: Vec<usize> = (0..d).map(|a| ext[a + 1..].iter().product()).collect();
    let kernel_terms: Vec<(f64, Vec<i64>)> =
        kernel.coeffs().iter().zip(offs).map(|(&f, o)| (f, o.clone())).collect();
    let n: usize = dims.iter().product();
    let mut values = Vec::with_capacity(n);
    let mut j = vec![0usize; d];
    for _ in 0..n {
        let mut y = 0.0;
        for (f, o) in &kernel_terms {
            let flat: usize = (0..d).map(|a| (mesh * j[a] as i64 - o[a] - lo[a]) as usize * strides[a]).sum();
            y += f * cells[flat];
        }
        values.push(y);
        for a in (0..d).rev() {
            j[a] += 1;
            if j[a] < dims[a] {
                break;
            }
            j[a] = 0;
        }
    }
    GridSample::new(dims.to_vec(), mesh, values)
}
