//! Recovery of the underlying measure from second moments.
//!
//! `ψ(U) = (E[X_U²])^{1/(2H)}` on rectangles, extended by inclusion–exclusion
//! to left-neighborhoods and their finite unions, then to an outer measure by
//! minimizing over finite covers. Empirical quantities carry delta-method
//! standard errors computed from the per-sample influence of each term.

mod characterize;
mod cover;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gaussian::{Column, SampleEnsemble};
use crate::hurst::HurstParam;
use crate::index::{signed_terms, AtomGrid, LeftNeighborhood, RadonMeasure, Rect, RectKey, MAX_PARTS};
#[allow(unused_imports)]
use num_traits::Float as _;

pub use characterize::{
    characterize, AdditivityCase, Battery, CharacterizationReport, Criterion, CriterionResult, ExtensionCase,
    FlowDiagnostics, Thresholds,
};
pub use cover::{
    measurability_check, outer_continuity_check, outer_measure, outer_measure_of, split_family, verify_extension,
    ContinuityTrace, CoverChoice, CoverFamily, Extension, MAX_COVER_FAMILY,
};

pub const MIN_PSI_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Provenance {
    Analytic,
    Empirical { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiEntry {
    pub rect: Rect,
    pub value: f64,
    pub provenance: Provenance,
}

/// `ψ` on a finite family of rectangles. `ψ(∅) = 0`, and rectangles of zero
/// Lebesgue measure that are not listed read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PreMeasureTable {
    hurst: HurstParam,
    entries: BTreeMap<RectKey, PsiEntry>,
}

impl PreMeasureTable {
    pub fn new(hurst: HurstParam) -> Self {
        Self { hurst, entries: BTreeMap::new() }
    }

    /// `ψ = m` on the given rectangles.
    pub fn analytic<'a>(
        hurst: HurstParam,
        measure: &impl RadonMeasure,
        rects: impl IntoIterator<Item = &'a Rect>,
    ) -> Self {
        let mut t = Self::new(hurst);
        for r in rects {
            t.insert(r.clone(), measure.rect(r), Provenance::Analytic);
        }
        t
    }

    /// Analytic table holding every rectangle the given left-neighborhoods
    /// expand into.
    pub fn analytic_for(
        hurst: HurstParam,
        measure: &impl RadonMeasure,
        sets: &[LeftNeighborhood],
        extra: &[Rect],
    ) -> Result<Self> {
        let mut rects: Vec<Rect> = extra.to_vec();
        for c in sets {
            rects.extend(c.required_rects()?);
        }
        Ok(Self::analytic(hurst, measure, &rects))
    }

    /// Plug-in estimates on every stored index of the ensemble.
    pub fn empirical(e: &SampleEnsemble, hurst: HurstParam) -> Result<Self> {
        let mut t = Self::new(hurst);
        for r in e.indices() {
            let v = estimate_psi(e, r, hurst)?;
            t.insert(r.clone(), v, Provenance::Empirical { samples: e.n_samples() });
        }
        Ok(t)
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn insert(&mut self, rect: Rect, value: f64, provenance: Provenance) {
        self.entries.insert(rect.key(), PsiEntry { rect, value, provenance });
    }

    pub fn get(&self, r: &Rect) -> Option<f64> {
        if r.is_empty() {
            return Some(0.0);
        }
        match self.entries.get(&r.key()) {
            Some(e) => Some(e.value),
            None if r.measure() == 0.0 => Some(0.0),
            None => None,
        }
    }

    pub fn entry(&self, r: &Rect) -> Option<&PsiEntry> {
        self.entries.get(&r.key())
    }

    pub fn entries(&self) -> impl Iterator<Item = &PsiEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Σ c_k ψ(R_k)`, listing every rectangle the table lacks.
    pub fn evaluate(&self, f: &PsiFunctional) -> Result<f64> {
        let mut missing = Vec::new();
        let mut total = 0.0;
        for (r, c) in &f.terms {
            match self.get(r) {
                Some(v) => total += c * v,
                None => missing.push(r.clone()),
            }
        }
        if missing.is_empty() {
            Ok(total)
        } else {
            Err(Error::MissingIndices(missing))
        }
    }
}

/// `(mean_s X_U²)^{1/(2H)}`.
pub fn estimate_psi(e: &SampleEnsemble, u: &Rect, h: HurstParam) -> Result<f64> {
    if e.n_samples() < MIN_PSI_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_PSI_SAMPLES, got: e.n_samples() });
    }
    let s = second_moment(e, u)?;
    if s == 0.0 {
        if u.measure() > 0.0 {
            log::warn!("zero empirical variance on {u} of measure {}", u.measure());
        }
        return Ok(0.0);
    }
    Ok(s.powf(1.0 / h.twice()))
}

fn second_moment(e: &SampleEnsemble, u: &Rect) -> Result<f64> {
    match e.resolve(u) {
        Some(Column::Stored(j)) => Ok(e.column(j).map(|x| x * x).sum::<f64>() / e.n_samples() as f64),
        Some(Column::Zero) => Ok(0.0),
        None => Err(Error::MissingIndices(alloc::vec![u.clone()])),
    }
}

/// A linear combination `Σ c_k ψ(R_k)` of rectangle values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PsiFunctional {
    pub terms: Vec<(Rect, f64)>,
}

impl PsiFunctional {
    pub fn rect(r: &Rect) -> Self {
        Self { terms: alloc::vec![(r.clone(), 1.0)] }
    }

    /// Inclusion–exclusion terms of `ψ(C)`.
    pub fn left_nbhd(c: &LeftNeighborhood) -> Result<Self> {
        Ok(Self { terms: c.signed_terms()?.into_iter().map(|(r, k)| (r, k as f64)).collect() })
    }

    /// Inclusion–exclusion terms of `ψ(C_1 ∪ … ∪ C_k)`.
    pub fn union(parts: &[LeftNeighborhood]) -> Result<Self> {
        if parts.len() > MAX_PARTS {
            return Err(Error::TooManyParts { count: parts.len(), max: MAX_PARTS });
        }
        let mut out = Self::default();
        for mask in 1u32..(1u32 << parts.len()) {
            let mut acc: Option<LeftNeighborhood> = None;
            for (i, p) in parts.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    acc = Some(match acc {
                        None => p.clone(),
                        Some(a) => a.intersection(p)?,
                    });
                }
            }
            let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
            let inner = Self::left_nbhd(&acc.expect("mask is non-empty"))?;
            out.add_scaled(&inner, sign);
        }
        out.compact();
        Ok(out)
    }

    /// Inclusion–exclusion terms of `ψ(R_1 ∪ … ∪ R_k)` for rectangles.
    pub fn rect_union(parts: &[Rect]) -> Result<Self> {
        Ok(Self { terms: signed_terms(None, parts)?.into_iter().map(|(r, k)| (r, k as f64)).collect() })
    }

    pub fn add_scaled(&mut self, other: &PsiFunctional, scale: f64) {
        self.terms.extend(other.terms.iter().map(|(r, c)| (r.clone(), c * scale)));
    }

    /// Merges repeated rectangles and drops cancelled terms.
    pub fn compact(&mut self) {
        let mut acc: BTreeMap<RectKey, (Rect, f64)> = BTreeMap::new();
        for (r, c) in self.terms.drain(..) {
            acc.entry(r.key()).or_insert_with(|| (r, 0.0)).1 += c;
        }
        self.terms = acc.into_values().filter(|(_, c)| *c != 0.0).collect();
    }

    /// Delta-method standard error of the plug-in estimate of this
    /// functional: each `ψ(R)` is a smooth function of the second moment
    /// `s_R`, so the estimate's fluctuation is the sample mean of
    /// `Σ c_k ψ'(s_k) X_k²`.
    pub fn stderr(&self, e: &SampleEnsemble, h: HurstParam) -> Result<f64> {
        let n = e.n_samples();
        let mut weights: Vec<(usize, f64)> = Vec::new();
        let mut missing = Vec::new();
        for (r, c) in &self.terms {
            match e.resolve(r) {
                Some(Column::Stored(j)) => {
                    let s = second_moment(e, r)?;
                    if s > 0.0 {
                        // dψ/ds = ψ / (2H s)
                        let slope = s.powf(1.0 / h.twice()) / (h.twice() * s);
                        weights.push((j, c * slope));
                    }
                }
                Some(Column::Zero) => {}
                None => missing.push(r.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingIndices(missing));
        }
        if weights.is_empty() || n < 2 {
            return Ok(0.0);
        }
        let (mut sum, mut sum2) = (0.0, 0.0);
        for s in 0..n {
            let row = e.row(s);
            let v: f64 = weights.iter().map(|&(j, w)| w * row[j] * row[j]).sum();
            sum += v;
            sum2 += v * v;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sum2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
        Ok((var / nf).sqrt())
    }
}

/// The alternating sum `ψ(U) − Σψ(U∩U_i) + Σ_{i<j}ψ(U∩U_i∩U_j) − …`.
#[allow(non_snake_case)]
pub fn psi_on_C(table: &PreMeasureTable, c: &LeftNeighborhood) -> Result<f64> {
    table.evaluate(&PsiFunctional::left_nbhd(c)?)
}

/// `ψ` on a finite union of left-neighborhoods.
pub fn psi_on_union(table: &PreMeasureTable, parts: &[LeftNeighborhood]) -> Result<f64> {
    table.evaluate(&PsiFunctional::union(parts)?)
}

fn set_dim(sets: &[&LeftNeighborhood]) -> usize {
    sets.iter().find_map(|c| c.dim()).unwrap_or(1)
}

/// The functional `ψ(c1∪c2) − ψ(c1) − ψ(c2) + ψ(c1∩c2)`, after checking that
/// `union` is exactly `c1 ∪ c2`.
pub fn additivity_functional(
    c1: &LeftNeighborhood,
    c2: &LeftNeighborhood,
    union: &LeftNeighborhood,
) -> Result<PsiFunctional> {
    let dim = set_dim(&[c1, c2, union]);
    let grid = AtomGrid::for_neighborhoods(dim, [c1, c2, union])?;
    if grid.left_nbhd(c1)?.union(&grid.left_nbhd(c2)?) != grid.left_nbhd(union)? {
        return Err(Error::UnionNotExpressible);
    }
    let mut f = PsiFunctional::left_nbhd(union)?;
    f.add_scaled(&PsiFunctional::left_nbhd(c1)?, -1.0);
    f.add_scaled(&PsiFunctional::left_nbhd(c2)?, -1.0);
    f.add_scaled(&PsiFunctional::left_nbhd(&c1.intersection(c2)?)?, 1.0);
    f.compact();
    Ok(f)
}

/// `|ψ(c1∪c2) − ψ(c1) − ψ(c2) + ψ(c1∩c2)|` where the caller supplies the
/// union as a single left-neighborhood.
pub fn check_additivity(
    table: &PreMeasureTable,
    c1: &LeftNeighborhood,
    c2: &LeftNeighborhood,
    union: &LeftNeighborhood,
) -> Result<f64> {
    let dim = set_dim(&[c1, c2, union]);
    let grid = AtomGrid::for_neighborhoods(dim, [c1, c2, union])?;
    if grid.left_nbhd(c1)?.union(&grid.left_nbhd(c2)?) != grid.left_nbhd(union)? {
        return Err(Error::UnionNotExpressible);
    }
    let both = psi_on_C(table, union)?;
    let first = psi_on_C(table, c1)?;
    let second = psi_on_C(table, c2)?;
    let overlap = psi_on_C(table, &c1.intersection(c2)?)?;
    Ok((both - first - second + overlap).abs())
}
