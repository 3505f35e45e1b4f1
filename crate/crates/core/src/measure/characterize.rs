//! End-to-end test that an ensemble is a set-indexed fBm for some measure:
//! flow projections, recovered `ψ`, its additivity and extension, and the
//! covariance implied by the recovered measure.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::cover::{verify_extension, CoverFamily};
use super::{additivity_functional, estimate_psi, PreMeasureTable, PsiFunctional};
use crate::error::{Error, Result};
use crate::flows::{project, time_change, Flow};
use crate::gaussian::{Column, SampleEnsemble};
use crate::hurst::HurstParam;
use crate::index::{LeftNeighborhood, Rect, RectKey};
use crate::stats::{gaussianity_check, hurst_estimate, variance_profile, GaussianityReport, VarianceProfile};
#[allow(unused_imports)]
use num_traits::Float as _;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Thresholds {
    /// Profile pairs count as matching within this many standard errors.
    pub profile_sigma: f64,
    /// Minimum share of matching profile pairs, per flow.
    pub profile_fraction: f64,
    /// Subsample the pair grid down to about this many pairs.
    pub max_profile_pairs: Option<usize>,
    pub gaussianity_z: f64,
    pub centering_z: f64,
    pub psi_sigma: f64,
    pub monotone_sigma: f64,
    pub additivity_sigma: f64,
    pub extension_sigma: f64,
    /// Relative slack added to every propagated-error allowance.
    pub abs_tol: f64,
    pub covariance_sigma: f64,
    pub covariance_fraction: f64,
    pub min_samples: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            profile_sigma: 4.0,
            profile_fraction: 0.95,
            max_profile_pairs: None,
            gaussianity_z: crate::stats::GAUSSIANITY_Z,
            centering_z: 4.5,
            psi_sigma: 4.0,
            monotone_sigma: 3.0,
            additivity_sigma: 3.0,
            extension_sigma: 3.0,
            abs_tol: 1e-12,
            covariance_sigma: 4.0,
            covariance_fraction: 0.99,
            min_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtensionCase {
    pub target: Rect,
    pub covers: CoverFamily,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdditivityCase {
    pub first: LeftNeighborhood,
    pub second: LeftNeighborhood,
    pub union: LeftNeighborhood,
}

/// What to test. `measure_indices` are the rectangles whose pairwise
/// covariances and nesting are checked; when empty, every rectangle the
/// cases and flow endpoints reference is used.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Battery {
    pub flows: Vec<Flow>,
    pub extension: Vec<ExtensionCase>,
    pub additivity: Vec<AdditivityCase>,
    pub measure_indices: Vec<Rect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Criterion {
    VarianceProfile,
    Gaussianity,
    Centering,
    PsiRecovery,
    PsiMonotone,
    Additivity,
    Extension,
    Covariance,
}

/// `passed` compares `statistic` with `threshold`; `at_least` says which side
/// passes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriterionResult {
    pub criterion: Criterion,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub at_least: bool,
    pub detail: String,
}

impl CriterionResult {
    fn at_most(criterion: Criterion, statistic: f64, threshold: f64, detail: String) -> Self {
        Self { criterion, passed: statistic <= threshold, statistic, threshold, at_least: false, detail }
    }

    fn at_least(criterion: Criterion, statistic: f64, threshold: f64, detail: String) -> Self {
        Self { criterion, passed: statistic >= threshold, statistic, threshold, at_least: true, detail }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowDiagnostics {
    /// Only elementary flows enter the variance-profile verdict: the additive
    /// extension along a union-valued flow is a time-changed fBm only when
    /// `H = 1/2`.
    pub elementary: bool,
    pub fraction_within: f64,
    pub hurst_estimate: Option<f64>,
    pub gaussianity: Vec<GaussianityReport>,
    /// Largest `|ψ(f(t)) − θ_f(t)| / SE` along the flow.
    pub psi_max_z: f64,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub profile: Option<VarianceProfile>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsiRow {
    pub rect: Rect,
    pub psi: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CharacterizationReport {
    pub hurst: HurstParam,
    pub n_samples: usize,
    pub thresholds: Thresholds,
    pub criteria: Vec<CriterionResult>,
    pub flows: Vec<FlowDiagnostics>,
    pub psi: Vec<PsiRow>,
    pub additivity_residuals: Vec<f64>,
    pub extension_residuals: Vec<f64>,
    pub verdict: bool,
}

impl CharacterizationReport {
    pub fn failed(&self) -> Vec<Criterion> {
        self.criteria.iter().filter(|c| !c.passed).map(|c| c.criterion).collect()
    }

    pub fn criterion(&self, c: Criterion) -> Option<&CriterionResult> {
        self.criteria.iter().find(|r| r.criterion == c)
    }
}

fn z_of(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY.copysign(diff)
    }
}

fn column_moments(e: &SampleEnsemble, j: usize) -> (f64, f64) {
    let n = e.n_samples() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for x in e.column(j) {
        s1 += x;
        s2 += x * x;
    }
    (s1 / n, s2 / n)
}

impl Battery {
    /// Every rectangle of positive measure the battery reads, deduplicated
    /// and in key order.
    pub fn required_indices(&self) -> Result<Vec<Rect>> {
        let mut need: Vec<Rect> = self.measure_indices.clone();
        for f in &self.flows {
            need.extend(f.required_indices()?);
        }
        for c in &self.extension {
            need.push(c.target.clone());
            need.extend(c.covers.required_rects()?);
        }
        for c in &self.additivity {
            need.extend(additivity_functional(&c.first, &c.second, &c.union)?.terms.into_iter().map(|(r, _)| r));
        }
        if self.measure_indices.is_empty() {
            need.extend(default_measure_indices(self)?);
        }
        let mut out = BTreeMap::new();
        for r in need {
            if r.measure() > 0.0 {
                out.entry(r.key()).or_insert(r);
            }
        }
        Ok(out.into_values().collect())
    }
}

fn check_present(e: &SampleEnsemble, battery: &Battery) -> Result<()> {
    let missing: Vec<Rect> = battery
        .required_indices()?
        .into_iter()
        .filter(|r| e.resolve(r).is_none())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingIndices(missing))
    }
}

fn default_measure_indices(battery: &Battery) -> Result<Vec<Rect>> {
    let mut out: BTreeMap<RectKey, Rect> = BTreeMap::new();
    let mut add = |r: &Rect| {
        if r.measure() > 0.0 {
            out.entry(r.key()).or_insert_with(|| r.clone());
        }
    };
    for f in &battery.flows {
        if let Some(last) = f.values()?.last() {
            last.parts().iter().for_each(&mut add);
        }
    }
    for c in &battery.extension {
        add(&c.target);
        for m in c.covers.members() {
            add(m.base());
        }
    }
    for c in &battery.additivity {
        for s in [&c.first, &c.second, &c.union] {
            add(s.base());
        }
    }
    Ok(out.into_values().collect())
}

/// Runs every check of the battery and collects the per-criterion verdict.
pub fn characterize(
    e: &SampleEnsemble,
    battery: &Battery,
    h: HurstParam,
    thresholds: &Thresholds,
) -> Result<CharacterizationReport> {
    let n = e.n_samples();
    let min = thresholds.min_samples.max(crate::stats::MIN_GAUSSIANITY_SAMPLES);
    if n < min {
        return Err(Error::TooFewSamples { needed: min, got: n });
    }
    check_present(e, battery)?;
    let table = PreMeasureTable::empirical(e, h)?;
    let mut criteria = Vec::new();

    // flows: variance profile, Gaussianity, ψ along the flow
    let mut flows = Vec::with_capacity(battery.flows.len());
    let mut worst_fraction = 1.0f64;
    let mut worst_gauss = 0.0f64;
    let mut worst_psi = 0.0f64;
    for flow in &battery.flows {
        let paths = project(e, flow)?;
        let profile = variance_profile(&paths, h, thresholds.max_profile_pairs);
        let fraction_within = profile.fraction_within(thresholds.profile_sigma);
        let elementary = matches!(flow, Flow::Elementary(_));
        if elementary {
            worst_fraction = worst_fraction.min(fraction_within);
        }
        let k = paths.len();
        let mut gaussianity = Vec::new();
        if k > 0 {
            let end: Vec<f64> = paths.column(k - 1).collect();
            let mid: Vec<f64> = paths.column(k / 2).collect();
            let inc: Vec<f64> = end.iter().zip(&mid).map(|(a, b)| a - b).collect();
            for sample in [end, inc] {
                match gaussianity_check(&sample) {
                    Ok(g) => {
                        worst_gauss = worst_gauss.max(g.skewness_z.abs()).max(g.kurtosis_z.abs());
                        gaussianity.push(g);
                    }
                    Err(Error::ZeroVariance) => {}
                    Err(err) => return Err(err),
                }
            }
        }
        let theta = time_change(flow)?;
        let mut psi_max_z = 0.0f64;
        for (set, target) in flow.values()?.iter().zip(&theta.values) {
            let f = PsiFunctional::rect_union(set.parts())?;
            let z = z_of(table.evaluate(&f)? - target, f.stderr(e, h)?).abs();
            psi_max_z = psi_max_z.max(z);
        }
        worst_psi = worst_psi.max(psi_max_z);
        flows.push(FlowDiagnostics {
            elementary,
            fraction_within,
            hurst_estimate: hurst_estimate(&paths).ok(),
            gaussianity,
            psi_max_z,
            profile: Some(profile),
        });
    }
    criteria.push(CriterionResult::at_least(
        Criterion::VarianceProfile,
        worst_fraction,
        thresholds.profile_fraction,
        format!("worst share of pairs within {}σ over elementary flows", thresholds.profile_sigma),
    ));
    criteria.push(CriterionResult::at_most(
        Criterion::Gaussianity,
        worst_gauss,
        thresholds.gaussianity_z,
        "largest |z| of skewness and excess kurtosis at flow endpoints and increments".into(),
    ));

    // centering of every stored column
    let mut worst_center = 0.0f64;
    for j in 0..e.n_indices() {
        let (mean, second) = column_moments(e, j);
        let var = second - mean * mean;
        if var > 0.0 {
            worst_center = worst_center.max((mean / (var / n as f64).sqrt()).abs());
        } else if mean != 0.0 {
            worst_center = f64::INFINITY;
        }
    }
    criteria.push(CriterionResult::at_most(
        Criterion::Centering,
        worst_center,
        thresholds.centering_z,
        "largest |mean| / SE over stored indices".into(),
    ));

    criteria.push(CriterionResult::at_most(
        Criterion::PsiRecovery,
        worst_psi,
        thresholds.psi_sigma,
        "largest |ψ(f(t)) − θ_f(t)| / SE along the flows".into(),
    ));

    // ψ table on the measure lattice, and its monotonicity
    let lattice = if battery.measure_indices.is_empty() {
        default_measure_indices(battery)?
    } else {
        battery.measure_indices.clone()
    };
    let mut psi = Vec::with_capacity(lattice.len());
    for r in &lattice {
        psi.push(PsiRow {
            rect: r.clone(),
            psi: estimate_psi(e, r, h)?,
            stderr: PsiFunctional::rect(r).stderr(e, h)?,
        });
    }
    let mut worst_mono = f64::NEG_INFINITY;
    for a in &lattice {
        for b in &lattice {
            if a.key() == b.key() || !a.is_subset_of(b)? {
                continue;
            }
            let mut f = PsiFunctional::rect(a);
            f.add_scaled(&PsiFunctional::rect(b), -1.0);
            worst_mono = worst_mono.max(z_of(table.evaluate(&f)?, f.stderr(e, h)?));
        }
    }
    criteria.push(CriterionResult::at_most(
        Criterion::PsiMonotone,
        worst_mono.max(0.0),
        thresholds.monotone_sigma,
        "largest (ψ(U) − ψ(V)) / SE over nested U ⊆ V".into(),
    ));

    // additivity and extension, as residual / allowance
    let mut additivity_residuals = Vec::new();
    let mut worst_add = 0.0f64;
    for c in &battery.additivity {
        let f = additivity_functional(&c.first, &c.second, &c.union)?;
        let res = table.evaluate(&f)?.abs();
        let scale = super::psi_on_C(&table, &c.union)?.abs().max(1.0);
        let allow = thresholds.additivity_sigma * f.stderr(e, h)? + thresholds.abs_tol * scale;
        additivity_residuals.push(res);
        worst_add = worst_add.max(res / allow);
    }
    criteria.push(CriterionResult::at_most(
        Criterion::Additivity,
        worst_add,
        1.0,
        format!("largest residual over ({}·SE + tol)", thresholds.additivity_sigma),
    ));
    let mut extension_residuals = Vec::new();
    let mut worst_ext = 0.0f64;
    for c in &battery.extension {
        let ext = verify_extension(&table, &c.covers, &c.target)?;
        let f = ext.functional(&c.covers, &c.target)?;
        let allow = thresholds.extension_sigma * f.stderr(e, h)? + thresholds.abs_tol * ext.psi.abs().max(1.0);
        extension_residuals.push(ext.residual);
        worst_ext = worst_ext.max(ext.residual / allow);
    }
    criteria.push(CriterionResult::at_most(
        Criterion::Extension,
        worst_ext,
        1.0,
        format!("largest residual over ({}·SE + tol)", thresholds.extension_sigma),
    ));

    let (within, total) = covariance_comparison(e, &table, &lattice, h, thresholds.covariance_sigma)?;
    let share = if total == 0 { 1.0 } else { within as f64 / total as f64 };
    criteria.push(CriterionResult::at_least(
        Criterion::Covariance,
        share,
        thresholds.covariance_fraction,
        format!("{within} of {total} pairs within {}σ of the recovered-measure covariance", thresholds.covariance_sigma),
    ));

    let verdict = criteria.iter().all(|c| c.passed);
    Ok(CharacterizationReport {
        hurst: h,
        n_samples: n,
        thresholds: thresholds.clone(),
        criteria,
        flows,
        psi,
        additivity_residuals,
        extension_residuals,
        verdict,
    })
}

/// Empirical `E[X_U X_V]` against `½[ψ(U)^{2H} + ψ(V)^{2H} − D^{2H}]` with
/// `D = ψ(U) + ψ(V) − 2ψ(U∩V)`, the covariance of a set-indexed fBm driven
/// by the recovered measure. Each pair's z-score comes from the per-sample
/// influence of the difference.
fn covariance_comparison(
    e: &SampleEnsemble,
    table: &PreMeasureTable,
    lattice: &[Rect],
    h: HurstParam,
    sigma: f64,
) -> Result<(usize, usize)> {
    let n = e.n_samples();
    let slope = |r: &Rect| -> Result<(Option<usize>, f64, f64)> {
        match e.resolve(r) {
            Some(Column::Stored(j)) => {
                let (_, s) = column_moments(e, j);
                let p = table.get(r).unwrap_or(0.0);
                let d = if s > 0.0 { p / (h.twice() * s) } else { 0.0 };
                Ok((Some(j), p, d))
            }
            Some(Column::Zero) => Ok((None, 0.0, 0.0)),
            None => Err(Error::MissingIndices(alloc::vec![r.clone()])),
        }
    };
    let (mut within, mut total) = (0, 0);
    for (a, u) in lattice.iter().enumerate() {
        for v in &lattice[a + 1..] {
            let w = u.intersection(v)?;
            if e.resolve(&w).is_none() {
                continue;
            }
            let (ju, pu, du) = slope(u)?;
            let (jv, pv, dv) = slope(v)?;
            let (jw, pw, dw) = slope(&w)?;
            let d = pu + pv - 2.0 * pw;
            let g_slope = if d > 0.0 { h.twice() * d.powf(h.twice() - 1.0) } else { 0.0 };
            let pick = |row: &[f64], j: Option<usize>| j.map_or(0.0, |j| row[j]);
            let (mut sum, mut sum2) = (0.0, 0.0);
            for s in 0..n {
                let row = e.row(s);
                let (xu, xv, xw) = (pick(row, ju), pick(row, jv), pick(row, jw));
                let q = -0.5 * (xu - xv) * (xu - xv)
                    + 0.5 * g_slope * (du * xu * xu + dv * xv * xv - 2.0 * dw * xw * xw);
                sum += q;
                sum2 += q * q;
            }
            let nf = n as f64;
            let mean = sum / nf;
            let se = ((sum2 / nf - mean * mean).max(0.0) / (nf - 1.0)).sqrt();
            // the plug-in statistic evaluated at the sample moments
            let stat = -0.5 * (mean_sq_diff(e, ju, jv)) + 0.5 * crate::gaussian::pow2h(d, h);
            total += 1;
            if z_of(stat, se).abs() <= sigma {
                within += 1;
            }
        }
    }
    Ok((within, total))
}

fn mean_sq_diff(e: &SampleEnsemble, a: Option<usize>, b: Option<usize>) -> f64 {
    let n = e.n_samples();
    let mut acc = 0.0;
    for s in 0..n {
        let row = e.row(s);
        let d = a.map_or(0.0, |j| row[j]) - b.map_or(0.0, |j| row[j]);
        acc += d * d;
    }
    acc / n as f64
}
