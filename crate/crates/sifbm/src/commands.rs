use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sifbm_core::flows::{project, Flow};
use sifbm_core::gaussian::{GaussianField, SampleEnsemble};
use sifbm_core::intrep::IntegralSampler;
use sifbm_core::linalg::JitterPolicy;
use sifbm_core::measure::{
    additivity_functional, characterize, check_additivity, verify_extension, CoverChoice,
    PreMeasureTable, PsiFunctional,
};
use sifbm_core::stats::{gaussianity_check, hurst_estimate, variance_profile, GaussianityReport};
use sifbm_core::{HurstParam, Rect};

use crate::config::Experiment;
use crate::error::{CliError, CliResult};
use crate::format;
use crate::sample::{sample_field, sample_flow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Project,
    RecoverMeasure,
    VerifyIntrep,
    Characterize,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Project => "project",
            Command::RecoverMeasure => "recover-measure",
            Command::VerifyIntrep => "verify-intrep",
            Command::Characterize => "characterize",
            Command::Report => "report",
        }
    }
}

pub const ENSEMBLE_SIFB: &str = "ensemble.sifb";
pub const ENSEMBLE_CSV: &str = "ensemble.csv";
pub const REPORT_JSON: &str = "report.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    /// File names relative to the output directory, manifest excluded.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub jobs: usize,
    pub sifbm_version: String,
    pub core_version: String,
    pub wall_time_secs: f64,
    pub passed: bool,
    pub artifacts: Vec<String>,
}

pub fn manifest_name(cmd: Command) -> String {
    format!("{}.manifest.json", cmd.name())
}

struct Out<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Out<'_> {
    fn create(&mut self, name: impl Into<String>) -> CliResult<BufWriter<File>> {
        let name = name.into();
        let f = File::create(self.dir.join(&name))?;
        self.written.push(name);
        Ok(BufWriter::new(f))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Runs one command inside a pool of `jobs` workers and writes its manifest.
pub fn run(cmd: Command, exp: &Experiment, jobs: usize) -> CliResult<Outcome> {
    let start = Instant::now();
    fs::create_dir_all(&exp.output)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let mut out = Out { dir: &exp.output, written: Vec::new() };
    let passed = pool.install(|| match cmd {
        Command::Simulate => simulate(exp, &mut out),
        Command::Project => project_flows(exp, &mut out),
        Command::RecoverMeasure => recover_measure(exp, &mut out),
        Command::VerifyIntrep => verify_intrep(exp, &mut out),
        Command::Characterize => run_characterize(exp, &mut out),
        Command::Report => report(exp),
    })?;
    let artifacts = out.written.clone();
    let manifest = Manifest {
        command: cmd,
        config_hash: exp.config.hash(),
        seed: exp.config.seed,
        jobs,
        sifbm_version: env!("CARGO_PKG_VERSION").into(),
        core_version: sifbm_core::VERSION.into(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        passed,
        artifacts: artifacts.clone(),
    };
    let mut w = BufWriter::new(File::create(exp.output.join(manifest_name(cmd)))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.flush()?;
    Ok(Outcome { passed, artifacts })
}

fn require(path: PathBuf) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact(path))
    }
}

pub fn load_ensemble(dir: &Path) -> CliResult<SampleEnsemble> {
    let path = require(dir.join(ENSEMBLE_SIFB))?;
    format::read_sifb(BufReader::new(File::open(path)?))
}

/// Exact ensemble for the experiment's indices.
pub fn exact_ensemble(exp: &Experiment) -> CliResult<SampleEnsemble> {
    let field = GaussianField::new(&exp.indices, exp.hurst, &JitterPolicy::default())?;
    Ok(sample_field(&field, exp.config.samples, exp.config.seed)?)
}

fn simulate(exp: &Experiment, out: &mut Out) -> CliResult<bool> {
    let e = exact_ensemble(exp)?;
    let mut w = out.create(ENSEMBLE_SIFB)?;
    format::write_sifb(&e, &mut w)?;
    w.flush()?;
    format::write_ensemble_csv(&e, out.create(ENSEMBLE_CSV)?)?;
    log::info!("sampled {} rows over {} indices", e.n_samples(), e.n_indices());
    Ok(true)
}

#[derive(Debug, Serialize)]
struct FlowSummary {
    flow: usize,
    elementary: bool,
    points: usize,
    theta_end: f64,
    fraction_within: f64,
    hurst_estimate: Option<f64>,
    endpoint_gaussianity: Option<GaussianityReport>,
}

fn project_flows(exp: &Experiment, out: &mut Out) -> CliResult<bool> {
    let e = load_ensemble(out.dir)?;
    let th = &exp.config.thresholds;
    let mut summary = Vec::new();
    for (i, flow) in exp.battery.flows.iter().enumerate() {
        let paths = project(&e, flow)?;
        let profile = variance_profile(&paths, exp.test_hurst, th.max_profile_pairs);
        format::write_paths_csv(&paths, out.create(format!("flow{i}_paths.csv"))?)?;
        format::write_time_change_csv(&paths, out.create(format!("flow{i}_theta.csv"))?)?;
        format::write_profile_csv(&profile, out.create(format!("flow{i}_profile.csv"))?)?;
        let k = paths.len();
        let end: Vec<f64> = if k > 0 { paths.column(k - 1).collect() } else { Vec::new() };
        summary.push(FlowSummary {
            flow: i,
            elementary: matches!(flow, Flow::Elementary(_)),
            points: k,
            theta_end: paths.time_change().values.last().copied().unwrap_or(0.0),
            fraction_within: profile.fraction_within(th.profile_sigma),
            hurst_estimate: hurst_estimate(&paths).ok(),
            endpoint_gaussianity: gaussianity_check(&end).ok(),
        });
    }
    out.json("flows.json", &summary)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct PsiLine {
    rect: Rect,
    psi: f64,
    stderr: f64,
    lebesgue: f64,
}

#[derive(Debug, Serialize)]
struct ExtensionLine {
    target: Rect,
    outer: f64,
    psi: f64,
    residual: f64,
    stderr: f64,
    cover: CoverChoice,
}

#[derive(Debug, Serialize)]
struct AdditivityLine {
    residual: f64,
    stderr: f64,
}

#[derive(Debug, Serialize)]
struct MeasureReport {
    hurst: HurstParam,
    n_samples: usize,
    psi: Vec<PsiLine>,
    extension: Vec<ExtensionLine>,
    additivity: Vec<AdditivityLine>,
}

fn recover_measure(exp: &Experiment, out: &mut Out) -> CliResult<bool> {
    let e = load_ensemble(out.dir)?;
    let h = exp.test_hurst;
    let table = PreMeasureTable::empirical(&e, h)?;
    let mut psi = Vec::new();
    for entry in table.entries() {
        psi.push(PsiLine {
            rect: entry.rect.clone(),
            psi: entry.value,
            stderr: PsiFunctional::rect(&entry.rect).stderr(&e, h)?,
            lebesgue: entry.rect.measure(),
        });
    }
    let mut w = csv::Writer::from_writer(out.create("psi.csv")?);
    w.write_record(["index", "psi", "stderr", "lebesgue"])?;
    for p in &psi {
        w.write_record([format::index_label(&p.rect), p.psi.to_string(), p.stderr.to_string(), p.lebesgue.to_string()])?;
    }
    w.flush()?;
    let mut extension = Vec::new();
    for c in &exp.battery.extension {
        let ext = verify_extension(&table, &c.covers, &c.target)?;
        let stderr = ext.functional(&c.covers, &c.target)?.stderr(&e, h)?;
        extension.push(ExtensionLine {
            target: c.target.clone(),
            outer: ext.outer,
            psi: ext.psi,
            residual: ext.residual,
            stderr,
            cover: ext.cover,
        });
    }
    let mut additivity = Vec::new();
    for c in &exp.battery.additivity {
        additivity.push(AdditivityLine {
            residual: check_additivity(&table, &c.first, &c.second, &c.union)?,
            stderr: additivity_functional(&c.first, &c.second, &c.union)?.stderr(&e, h)?,
        });
    }
    out.json("measure.json", &MeasureReport { hurst: h, n_samples: e.n_samples(), psi, extension, additivity })?;
    Ok(true)
}

fn fbm_cov(a: f64, b: f64, h: f64) -> f64 {
    0.5 * (a.powf(2.0 * h) + b.powf(2.0 * h) - (a - b).abs().powf(2.0 * h))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceLine {
    pub i: usize,
    pub j: usize,
    pub observed: f64,
    pub predicted: f64,
    pub stderr: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Refinement {
    pub max_error: f64,
    pub refined_max_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntrepReport {
    pub hurst: HurstParam,
    pub n_samples: usize,
    pub masses: Vec<f64>,
    pub normalization: Option<f64>,
    /// Largest `|Var − θ^{2H}| / θ^{2H}` over positive masses.
    pub max_variance_rel_error: f64,
    pub variance_tol: f64,
    pub covariance: Vec<CovarianceLine>,
    pub refinement: Option<Refinement>,
    pub passed: bool,
}

/// Simulates the configured flow masses and compares against the fBm
/// covariance.
pub fn intrep_report(exp: &Experiment) -> CliResult<(IntrepReport, sifbm_core::flows::PathEnsemble)> {
    let spec = &exp.config.intrep;
    let h = exp.hurst.value();
    let n = spec.samples.unwrap_or(exp.config.samples);
    let masses = &spec.masses;
    let paths = sample_flow(masses, &exp.rep, n)?;
    let k = masses.len();
    let mut covariance = Vec::new();
    let mut max_rel = 0.0f64;
    let mut passed = true;
    for i in 0..k {
        for j in 0..=i {
            let (mut s, mut s2) = (0.0, 0.0);
            for r in 0..n {
                let x = paths.path(r);
                let v = x[i] * x[j];
                s += v;
                s2 += v * v;
            }
            let mean = s / n as f64;
            let stderr = ((s2 / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
            let predicted = fbm_cov(masses[i], masses[j], h);
            let ok = (mean - predicted).abs() <= spec.covariance_sigma * stderr + 1e-12;
            if i == j && predicted > 0.0 {
                max_rel = max_rel.max((mean - predicted).abs() / predicted);
            }
            passed &= ok;
            covariance.push(CovarianceLine { i, j, observed: mean, predicted, stderr, passed: ok });
        }
    }
    passed &= max_rel <= spec.variance_tol;
    let refinement = if exp.hurst.is_half() {
        None
    } else {
        let worst = |cfg: &sifbm_core::intrep::RepConfig| -> CliResult<f64> {
            let cov = IntegralSampler::new(masses, cfg)?.implied_covariance();
            let mut w = 0.0f64;
            for i in 0..k {
                for j in 0..k {
                    w = w.max((cov.get(i, j) - fbm_cov(masses[i], masses[j], h)).abs());
                }
            }
            Ok(w)
        };
        let fine = sifbm_core::intrep::RepConfig::new(exp.hurst, exp.rep.grid().refined(), exp.rep.seed())?;
        let (a, b) = (worst(&exp.rep)?, worst(&fine)?);
        Some(Refinement { max_error: a, refined_max_error: b, passed: b < a || a == 0.0 })
    };
    passed &= refinement.as_ref().is_none_or(|r| r.passed);
    let report = IntrepReport {
        hurst: exp.hurst,
        n_samples: n,
        masses: masses.clone(),
        normalization: exp.rep.normalization(),
        max_variance_rel_error: max_rel,
        variance_tol: spec.variance_tol,
        covariance,
        refinement,
        passed,
    };
    Ok((report, paths))
}

fn verify_intrep(exp: &Experiment, out: &mut Out) -> CliResult<bool> {
    let (report, paths) = intrep_report(exp)?;
    format::write_paths_csv(&paths, out.create("intrep_paths.csv")?)?;
    out.json("intrep.json", &report)?;
    Ok(report.passed)
}

fn run_characterize(exp: &Experiment, out: &mut Out) -> CliResult<bool> {
    let e = load_ensemble(out.dir)?;
    let report = characterize(&e, &exp.battery, exp.test_hurst, &exp.config.thresholds)?;
    for (i, f) in report.flows.iter().enumerate() {
        if let Some(p) = &f.profile {
            format::write_profile_csv(p, out.create(format!("profile_flow{i}.csv"))?)?;
        }
    }
    out.json(REPORT_JSON, &report)?;
    Ok(report.verdict)
}

#[derive(Deserialize)]
struct StoredCriterion {
    criterion: String,
    passed: bool,
    /// Non-finite statistics are stored as `null`.
    statistic: Option<f64>,
    threshold: f64,
    at_least: bool,
    detail: String,
}

#[derive(Deserialize)]
struct StoredReport {
    hurst: f64,
    n_samples: usize,
    criteria: Vec<StoredCriterion>,
    verdict: bool,
}

/// Prints the stored characterization report.
fn report(exp: &Experiment) -> CliResult<bool> {
    let path = require(exp.output.join(REPORT_JSON))?;
    let r: StoredReport = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    println!("H = {}, n = {}", r.hurst, r.n_samples);
    for c in &r.criteria {
        let side = if c.at_least { ">=" } else { "<=" };
        let stat = c.statistic.map_or("non-finite".to_string(), |x| format!("{x:.4}"));
        println!(
            "{:<4} {}: {stat} {side} {} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.criterion,
            c.threshold,
            c.detail
        );
    }
    println!("verdict: {}", if r.verdict { "pass" } else { "fail" });
    Ok(r.verdict)
}
