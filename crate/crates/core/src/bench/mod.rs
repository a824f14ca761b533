//! Experiment harness: Monte Carlo MSE runs, validation suites and output files.

pub mod config;
pub mod pipeline;
pub mod suites;

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

pub use config::{Bandwidth, ExperimentConfig, JumpLawConfig, KernelConfig, Method, MethodOverrides, MethodSel};
pub use pipeline::{run_pipeline, simulate, MethodSetup, PipelineOutput};

use crate::error::{Error, Result, StageExt};
use crate::numcore::GridFunction;

/// One replication of one method.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub method: Method,
    pub law: String,
    pub rep: usize,
    pub mse: f64,
    pub runtime_s: f64,
}

/// Mean and sample standard deviation of the replication MSEs of one method.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchSummary {
    pub method: Method,
    pub law: String,
    pub reps: usize,
    pub mean: f64,
    pub sd: f64,
}

pub fn summarize(records: &[BenchRecord]) -> Vec<BenchSummary> {
    let mut out: Vec<BenchSummary> = Vec::new();
    let mut methods: Vec<(Method, String)> = records.iter().map(|r| (r.method, r.law.clone())).collect();
    methods.sort();
    methods.dedup();
    for (method, law) in methods {
        let v: Vec<f64> = records.iter().filter(|r| r.method == method && r.law == law).map(|r| r.mse).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        out.push(BenchSummary { method, law, reps: v.len(), mean, sd });
    }
    out
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::Resource(format!("thread pool: {e}")))
}

/// Run `reps` replications of every configured method; replication `r` uses stream `r`
/// of `cfg.master_seed` and the same field sample feeds every method.
pub fn run_bench(cfg: &ExperimentConfig, reps: usize, threads: Option<usize>) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    if reps == 0 {
        return Err(Error::Config("reps must be positive".into()));
    }
    let setups: Vec<MethodSetup> =
        cfg.method.methods().into_iter().map(|m| MethodSetup::new(cfg, m)).collect::<Result<_>>()?;
    let pool = thread_pool(threads)?;
    let per_rep: Vec<Vec<BenchRecord>> = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let sample = simulate(cfg, cfg.master_seed, rep as u64)?;
                setups
                    .iter()
                    .map(|s| {
                        let t0 = Instant::now();
                        let est = s.estimate(&sample)?;
                        let mse = s.mse(&est).stage("mse")?;
                        Ok(BenchRecord {
                            method: s.method,
                            law: s.law_name.to_string(),
                            rep,
                            mse,
                            runtime_s: t0.elapsed().as_secs_f64(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut records: Vec<BenchRecord> = per_rep.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.method, r.rep));
    Ok(records)
}

/// `method,law,rep,mse,runtime_s`; the runtime column is empty unless `timing`.
pub fn results_csv(records: &[BenchRecord], timing: bool) -> String {
    let mut s = String::from("method,law,rep,mse,runtime_s\n");
    for r in records {
        let _ = write!(s, "{},{},{},{},", r.method.name(), r.law, r.rep, r.mse);
        if timing {
            let _ = write!(s, "{}", r.runtime_s);
        }
        s.push('\n');
    }
    s
}

/// `x,g0_true,g0_hat`, or `x,g0_hat` without a known truth.
pub fn estimate_csv(g0_hat: &GridFunction<f64>, g0_true: Option<&GridFunction<f64>>) -> String {
    let mut s = String::from(if g0_true.is_some() { "x,g0_true,g0_hat\n" } else { "x,g0_hat\n" });
    let grid = g0_hat.grid();
    for (i, v) in g0_hat.values().iter().enumerate() {
        match g0_true {
            Some(t) => {
                let _ = writeln!(s, "{},{},{}", grid.node(i), t.values()[i], v);
            }
            None => {
                let _ = writeln!(s, "{},{}", grid.node(i), v);
            }
        }
    }
    s
}

/// Git blob hash with SHA-256: `sha256("blob {len}\0" ++ bytes)`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Run manifest: config echo, seeds, input/output hashes, summaries.
pub fn manifest(
    cfg: &ExperimentConfig,
    reps: usize,
    records: &[BenchRecord],
    results_text: &str,
    timing: bool,
) -> serde_json::Value {
    let cfg_text = cfg.to_json();
    let summaries: Vec<serde_json::Value> = summarize(records)
        .iter()
        .map(|s| json!({"method": s.method.name(), "law": s.law, "reps": s.reps, "mean_mse": s.mean, "sd_mse": s.sd}))
        .collect();
    let mut m = json!({
        "tool": concat!("idfield ", env!("CARGO_PKG_VERSION")),
        "config": serde_json::from_str::<serde_json::Value>(&cfg_text).expect("config echo is JSON"),
        "seeds": {
            "master_seed": cfg.master_seed,
            "generator": "ChaCha8, seed_from_u64(master_seed), stream = replication index",
            "replications": reps,
        },
        "inputs": {"config_sha256": content_hash(cfg_text.as_bytes())},
        "outputs": {"results_sha256": content_hash(results_text.as_bytes())},
        "summary": summaries,
    });
    if timing {
        let total: f64 = records.iter().map(|r| r.runtime_s).sum();
        m["timing"] = json!({"total_estimation_s": total});
    }
    m
}

/// Write `results` and a `<stem>.manifest.json` next to it.
pub fn emit_outputs(cfg: &ExperimentConfig, reps: usize, records: &[BenchRecord], out: &Path, timing: bool) -> Result<()> {
    let text = results_csv(records, timing);
    write_file(out, &text)?;
    let man = manifest(cfg, reps, records, &text, timing);
    write_file(&manifest_path(out), &(serde_json::to_string_pretty(&man).expect("manifest serializes") + "\n"))
}

pub fn manifest_path(out: &Path) -> std::path::PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}
