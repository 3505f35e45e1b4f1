//! Finite-cover outer measure and the identities built on it.

use alloc::vec::Vec;

use super::{psi_on_C, PreMeasureTable, PsiFunctional};
use crate::error::{Error, Result};
use crate::gaussian::pow2h;
use crate::hurst::HurstParam;
use crate::index::{symdiff_measure, AtomGrid, AtomSet, LeftNeighborhood, Rect};

pub const MAX_COVER_FAMILY: usize = 16;

/// Candidate cover elements.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<LeftNeighborhood>", into = "Vec<LeftNeighborhood>"))]
pub struct CoverFamily {
    members: Vec<LeftNeighborhood>,
}

impl CoverFamily {
    pub fn new(members: Vec<LeftNeighborhood>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidInput("cover family is empty".into()));
        }
        let mut dim = None;
        for m in &members {
            if let Some(d) = m.dim() {
                match dim {
                    None => dim = Some(d),
                    Some(e) if e != d => return Err(Error::DimensionMismatch { expected: e, found: d }),
                    _ => {}
                }
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[LeftNeighborhood] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.members.iter().find_map(LeftNeighborhood::dim)
    }

    /// Every rectangle needed to evaluate `ψ` on the members.
    pub fn required_rects(&self) -> Result<Vec<Rect>> {
        let mut out = Vec::new();
        for m in &self.members {
            out.extend(m.required_rects()?);
        }
        Ok(out)
    }
}

impl TryFrom<Vec<LeftNeighborhood>> for CoverFamily {
    type Error = Error;

    fn try_from(v: Vec<LeftNeighborhood>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CoverFamily> for Vec<LeftNeighborhood> {
    fn from(c: CoverFamily) -> Self {
        c.members
    }
}

/// The optimal sub-family: member positions in increasing order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverChoice {
    pub value: f64,
    pub members: Vec<usize>,
}

struct Search<'a> {
    masks: &'a [AtomSet],
    costs: &'a [f64],
    reach: Vec<AtomSet>,
    slack: Vec<f64>,
    target: &'a AtomSet,
    best: Option<CoverChoice>,
    chosen: Vec<usize>,
}

impl Search<'_> {
    fn tol(v: f64) -> f64 {
        1e-12 * v.abs().max(1.0)
    }

    fn visit(&mut self, i: usize, covered: &AtomSet, cost: f64) {
        if self.target.is_subset(covered) {
            self.offer(cost);
        }
        if i == self.masks.len() {
            return;
        }
        if let Some(b) = &self.best {
            // costs can be negative on noisy tables, so the bound adds every
            // negative cost still available
            if cost + self.slack[i] > b.value + Self::tol(b.value) {
                return;
            }
        }
        if !self.target.is_subset(&covered.union(&self.reach[i])) {
            return;
        }
        self.chosen.push(i);
        self.visit(i + 1, &covered.union(&self.masks[i]), cost + self.costs[i]);
        self.chosen.pop();
        self.visit(i + 1, covered, cost);
    }

    fn offer(&mut self, cost: f64) {
        let better = match &self.best {
            None => true,
            Some(b) if cost < b.value - Self::tol(b.value) => true,
            Some(b) if cost <= b.value + Self::tol(b.value) => self.chosen < b.members,
            _ => false,
        };
        if better {
            self.best = Some(CoverChoice { value: cost, members: self.chosen.clone() });
        }
    }
}

/// `min Σ ψ(C_i)` over sub-families of `covers` whose union contains every
/// set in `target`; ties go to the lexicographically smallest index list.
pub fn outer_measure_of(
    table: &PreMeasureTable,
    covers: &CoverFamily,
    target: &[LeftNeighborhood],
) -> Result<CoverChoice> {
    if covers.len() > MAX_COVER_FAMILY {
        return Err(Error::CoverTooLarge { count: covers.len(), max: MAX_COVER_FAMILY });
    }
    let dim = covers
        .dim()
        .or_else(|| target.iter().find_map(LeftNeighborhood::dim))
        .unwrap_or(1);
    let grid = AtomGrid::for_neighborhoods(dim, covers.members().iter().chain(target))?;
    let mut goal = grid.empty_set();
    for t in target {
        goal.union_with(&grid.left_nbhd(t)?);
    }
    if goal.is_empty() {
        return Ok(CoverChoice { value: 0.0, members: Vec::new() });
    }
    let masks: Vec<AtomSet> = covers
        .members()
        .iter()
        .map(|c| Ok(grid.left_nbhd(c)?.intersection(&goal)))
        .collect::<Result<_>>()?;
    let costs: Vec<f64> = covers.members().iter().map(|c| psi_on_C(table, c)).collect::<Result<_>>()?;
    let k = masks.len();
    let mut reach = alloc::vec![grid.empty_set(); k + 1];
    let mut slack = alloc::vec![0.0; k + 1];
    for i in (0..k).rev() {
        reach[i] = reach[i + 1].union(&masks[i]);
        slack[i] = slack[i + 1] + costs[i].min(0.0);
    }
    let mut search = Search {
        masks: &masks,
        costs: &costs,
        reach,
        slack,
        target: &goal,
        best: None,
        chosen: Vec::new(),
    };
    search.visit(0, &grid.empty_set(), 0.0);
    search.best.ok_or(Error::NoCover)
}

/// Outer measure of a rectangle over a finite cover family.
pub fn outer_measure(table: &PreMeasureTable, covers: &CoverFamily, target: &Rect) -> Result<f64> {
    Ok(outer_measure_of(table, covers, &[LeftNeighborhood::from_rect(target.clone())])?.value)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Extension {
    pub outer: f64,
    pub psi: f64,
    pub residual: f64,
    pub cover: CoverChoice,
}

impl Extension {
    /// `Σ_{chosen} ψ(C_i) − ψ(u)` as a functional, for error propagation.
    pub fn functional(&self, covers: &CoverFamily, u: &Rect) -> Result<PsiFunctional> {
        let mut f = PsiFunctional::default();
        for &i in &self.cover.members {
            f.add_scaled(&PsiFunctional::left_nbhd(&covers.members()[i])?, 1.0);
        }
        f.add_scaled(&PsiFunctional::rect(u), -1.0);
        f.compact();
        Ok(f)
    }
}

/// `|m(u) − ψ(u)|` with `m` the finite-cover outer measure.
pub fn verify_extension(table: &PreMeasureTable, covers: &CoverFamily, u: &Rect) -> Result<Extension> {
    let cover = outer_measure_of(table, covers, &[LeftNeighborhood::from_rect(u.clone())])?;
    let psi = table.get(u).ok_or_else(|| Error::MissingIndices(alloc::vec![u.clone()]))?;
    Ok(Extension { outer: cover.value, psi, residual: (cover.value - psi).abs(), cover })
}

/// Each `C_i` cut into `C_i ∩ u` and `C_i \ u`; empty pieces are dropped.
pub fn split_family(covers: &CoverFamily, u: &Rect) -> Result<CoverFamily> {
    let dim = covers.dim().or(u.dim()).unwrap_or(1);
    let mut pieces = Vec::with_capacity(2 * covers.len());
    for c in covers.members() {
        let inside = LeftNeighborhood::new(c.base().intersection(u)?, c.subtracted().to_vec())?;
        let mut minus = c.subtracted().to_vec();
        minus.push(u.clone());
        let outside = LeftNeighborhood::new(c.base().clone(), minus)?;
        pieces.push(inside);
        pieces.push(outside);
    }
    let grid = AtomGrid::for_neighborhoods(dim, pieces.iter())?;
    let mut kept = Vec::with_capacity(pieces.len());
    for p in pieces {
        if !grid.left_nbhd(&p)?.is_empty() {
            kept.push(p);
        }
    }
    if kept.is_empty() {
        return Err(Error::NoCover);
    }
    CoverFamily::new(kept)
}

/// `|m(a ∪ b) − m(a) − m(b)|` for `a ⊆ u` and `b ∩ u = ∅`, with `m` computed
/// over the family split along `u`.
pub fn measurability_check(
    table: &PreMeasureTable,
    covers: &CoverFamily,
    u: &Rect,
    a_inside: &LeftNeighborhood,
    b_outside: &LeftNeighborhood,
) -> Result<f64> {
    let dim = covers.dim().or(u.dim()).unwrap_or(1);
    let ul = LeftNeighborhood::from_rect(u.clone());
    let grid = AtomGrid::for_neighborhoods(dim, [a_inside, b_outside, &ul])?;
    let (a, b, uset) = (grid.left_nbhd(a_inside)?, grid.left_nbhd(b_outside)?, grid.left_nbhd(&ul)?);
    if !a.is_subset(&uset) {
        return Err(Error::Containment("a is not inside u"));
    }
    if !b.is_disjoint(&uset) {
        return Err(Error::Containment("b meets u"));
    }
    let split = split_family(covers, u)?;
    let both = outer_measure_of(table, &split, &[a_inside.clone(), b_outside.clone()])?.value;
    let first = outer_measure_of(table, &split, core::slice::from_ref(a_inside))?.value;
    let second = outer_measure_of(table, &split, core::slice::from_ref(b_outside))?.value;
    Ok((both - first - second).abs())
}

/// `E[(X_{U_n} − X_U)²] = m(U_n △ U)^{2H}` along a decreasing sequence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContinuityTrace {
    pub values: Vec<f64>,
    pub monotone: bool,
}

impl ContinuityTrace {
    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn converged(&self, tol: f64) -> bool {
        self.monotone && self.last() <= tol
    }
}

pub fn outer_continuity_check(h: HurstParam, sequence: &[Rect], u: &Rect) -> Result<ContinuityTrace> {
    let mut values = Vec::with_capacity(sequence.len());
    for (n, r) in sequence.iter().enumerate() {
        if !u.is_subset_of(r)? {
            return Err(Error::NotDecreasing(n));
        }
        if n > 0 && !r.is_subset_of(&sequence[n - 1])? {
            return Err(Error::NotDecreasing(n));
        }
        values.push(pow2h(symdiff_measure(r, u)?, h));
    }
    let monotone = values.windows(2).all(|w| w[1] <= w[0]);
    Ok(ContinuityTrace { values, monotone })
}
