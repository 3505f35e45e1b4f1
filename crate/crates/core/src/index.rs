//! The indexing collection: rectangles `[0, t]` anchored at the origin of
//! `R^N_+`, the empty set, finite unions of rectangles and left-neighborhoods
//! `U \ (U_1 ∪ … ∪ U_n)`, measured with the Lebesgue product measure.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Largest family handled by exact inclusion–exclusion (`2^k` terms).
pub const MAX_PARTS: usize = 20;

/// A rectangle `[0, t] = ∏ [0, t_i]` identified by its upper corner, or the
/// empty set.
///
/// Rectangles with a zero coordinate are valid indices of measure zero and
/// remain distinct from `∅`.
#[derive(Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(try_from = "Option<Vec<f64>>", into = "Option<Vec<f64>>")
)]
pub struct Rect {
    corner: Option<Vec<f64>>,
}

impl Rect {
    pub fn new(corner: Vec<f64>) -> Result<Self> {
        if corner.is_empty() {
            return Err(Error::InvalidCorner("zero-dimensional corner".into()));
        }
        let mut corner = corner;
        for c in corner.iter_mut() {
            if !c.is_finite() || *c < 0.0 {
                return Err(Error::InvalidCorner(format!("coordinate {c} is not a finite non-negative real")));
            }
            // fold -0.0 into +0.0 so keys and equality agree
            *c += 0.0;
        }
        Ok(Self { corner: Some(corner) })
    }

    pub const fn empty() -> Self {
        Self { corner: None }
    }

    /// The degenerate rectangle `[0, 0]`, i.e. the origin alone.
    pub fn origin(dim: usize) -> Self {
        Self { corner: Some(vec![0.0; dim.max(1)]) }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.corner.is_none()
    }

    #[inline]
    pub fn corner(&self) -> Option<&[f64]> {
        self.corner.as_deref()
    }

    #[inline]
    pub fn dim(&self) -> Option<usize> {
        self.corner.as_ref().map(Vec::len)
    }

    /// Lebesgue measure `∏ t_i`, zero for `∅`.
    pub fn measure(&self) -> f64 {
        self.corner.as_ref().map_or(0.0, |c| c.iter().product())
    }

    pub fn intersection(&self, other: &Rect) -> Result<Rect> {
        check_dims(self, other)?;
        Ok(self.meet(other))
    }

    /// Componentwise minimum of corners; callers guarantee matching dimensions.
    pub(crate) fn meet(&self, other: &Rect) -> Rect {
        match (&self.corner, &other.corner) {
            (Some(a), Some(b)) => Rect {
                corner: Some(a.iter().zip(b).map(|(x, y)| x.min(*y)).collect()),
            },
            _ => Rect::empty(),
        }
    }

    /// `self ⊆ other` as sets.
    pub fn is_subset_of(&self, other: &Rect) -> Result<bool> {
        check_dims(self, other)?;
        Ok(self.subset_unchecked(other))
    }

    pub(crate) fn subset_unchecked(&self, other: &Rect) -> bool {
        match (&self.corner, &other.corner) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => a.iter().zip(b).all(|(x, y)| x <= y),
        }
    }

    pub fn key(&self) -> RectKey {
        RectKey(self.corner.as_ref().map(|c| c.iter().map(|x| x.to_bits()).collect()))
    }
}

impl fmt::Debug for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.corner {
            None => f.write_str("∅"),
            Some(c) => {
                f.write_str("[0,(")?;
                for (i, x) in c.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")]")
            }
        }
    }
}

impl TryFrom<Option<Vec<f64>>> for Rect {
    type Error = Error;

    fn try_from(corner: Option<Vec<f64>>) -> Result<Self> {
        match corner {
            None => Ok(Rect::empty()),
            Some(c) => Rect::new(c),
        }
    }
}

impl From<Rect> for Option<Vec<f64>> {
    fn from(r: Rect) -> Self {
        r.corner
    }
}

/// Totally ordered lookup key for a [`Rect`]. Coordinates are non-negative,
/// so bit patterns order like the values they encode.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RectKey(Option<Vec<u64>>);

fn check_dims(a: &Rect, b: &Rect) -> Result<()> {
    match (a.dim(), b.dim()) {
        (Some(x), Some(y)) if x != y => Err(Error::DimensionMismatch { expected: x, found: y }),
        _ => Ok(()),
    }
}

fn common_dim<'a>(rects: impl IntoIterator<Item = &'a Rect>) -> Result<Option<usize>> {
    let mut dim = None;
    for r in rects {
        match (dim, r.dim()) {
            (None, d) => dim = d,
            (Some(x), Some(y)) if x != y => return Err(Error::DimensionMismatch { expected: x, found: y }),
            _ => {}
        }
    }
    Ok(dim)
}

/// Lebesgue measure of `big \ small` for `small ⊆ big`, by telescoping over
/// coordinates so that thin shells keep their relative precision.
fn nested_difference(big: &[f64], small: &[f64]) -> f64 {
    let n = big.len();
    let mut total = 0.0;
    for i in 0..n {
        let gap = big[i] - small[i];
        if gap == 0.0 {
            continue;
        }
        let mut term = gap;
        for (j, (&b, &s)) in big.iter().zip(small).enumerate() {
            if j < i {
                term *= s;
            } else if j > i {
                term *= b;
            }
        }
        total += term;
    }
    total
}

pub fn rect_measure(r: &Rect) -> f64 {
    r.measure()
}

pub fn rect_intersection(a: &Rect, b: &Rect) -> Result<Rect> {
    a.intersection(b)
}

/// `m(a △ b) = m(a) + m(b) − 2 m(a ∩ b)`.
pub fn symdiff_measure(a: &Rect, b: &Rect) -> Result<f64> {
    let meet = a.intersection(b)?;
    let lost = |r: &Rect| match (r.corner(), meet.corner()) {
        (None, _) => 0.0,
        (Some(c), None) => c.iter().product(),
        (Some(c), Some(m)) => nested_difference(c, m),
    };
    Ok(lost(a) + lost(b))
}

/// A finite union of rectangles, kept in canonical form: no empty parts and
/// no part contained in another.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<Rect>", into = "Vec<Rect>"))]
pub struct RectUnion {
    parts: Vec<Rect>,
}

impl RectUnion {
    pub fn new(parts: Vec<Rect>) -> Result<Self> {
        common_dim(&parts)?;
        let mut kept: Vec<Rect> = Vec::with_capacity(parts.len());
        for p in parts.into_iter().filter(|p| !p.is_empty()) {
            if kept.iter().any(|k| p.subset_unchecked(k)) {
                continue;
            }
            kept.retain(|k| !k.subset_unchecked(&p));
            kept.push(p);
        }
        Ok(Self { parts: kept })
    }

    pub fn single(r: Rect) -> Self {
        Self::new(vec![r]).expect("a single part has one dimension")
    }

    pub fn parts(&self) -> &[Rect] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.parts.first().and_then(Rect::dim)
    }
}

impl TryFrom<Vec<Rect>> for RectUnion {
    type Error = Error;

    fn try_from(parts: Vec<Rect>) -> Result<Self> {
        Self::new(parts)
    }
}

impl From<RectUnion> for Vec<Rect> {
    fn from(u: RectUnion) -> Self {
        u.parts
    }
}

/// `C = U \ (U_1 ∪ … ∪ U_n)`; an empty subtracted list denotes `U` itself.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeftNeighborhood {
    base: Rect,
    subtracted: Vec<Rect>,
}

impl LeftNeighborhood {
    pub fn new(base: Rect, subtracted: Vec<Rect>) -> Result<Self> {
        common_dim(core::iter::once(&base).chain(&subtracted))?;
        Ok(Self { base, subtracted })
    }

    pub fn from_rect(base: Rect) -> Self {
        Self { base, subtracted: Vec::new() }
    }

    /// The box `∏ (lower_i, upper_i]`, closed at zero when `lower_i = 0`.
    pub fn cell(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: upper.len(), found: lower.len() });
        }
        let base = Rect::new(upper.to_vec())?;
        let mut subtracted = Vec::new();
        for (i, &lo) in lower.iter().enumerate() {
            if lo < 0.0 || lo > upper[i] {
                return Err(Error::InvalidCorner(format!("cell bound {lo} outside [0, {}]", upper[i])));
            }
            if lo > 0.0 {
                let mut c = upper.to_vec();
                c[i] = lo;
                subtracted.push(Rect::new(c)?);
            }
        }
        Ok(Self { base, subtracted })
    }

    pub fn base(&self) -> &Rect {
        &self.base
    }

    pub fn subtracted(&self) -> &[Rect] {
        &self.subtracted
    }

    pub fn dim(&self) -> Option<usize> {
        common_dim(core::iter::once(&self.base).chain(&self.subtracted)).ok().flatten()
    }

    /// `(U ∩ V) \ (U_i ∪ V_j)`, again a left-neighborhood.
    pub fn intersection(&self, other: &LeftNeighborhood) -> Result<LeftNeighborhood> {
        let base = self.base.intersection(&other.base)?;
        let subtracted = self.subtracted.iter().chain(&other.subtracted).cloned().collect();
        LeftNeighborhood::new(base, subtracted)
    }

    /// Signed rectangle terms of the inclusion–exclusion expansion of this set.
    pub fn signed_terms(&self) -> Result<Vec<(Rect, i64)>> {
        signed_terms(Some(&self.base), &self.subtracted)
    }

    /// Every rectangle `U ∩ (∩_{i∈S} U_i)` needed to evaluate a set function
    /// on this left-neighborhood.
    pub fn required_rects(&self) -> Result<Vec<Rect>> {
        Ok(self.signed_terms()?.into_iter().map(|(r, _)| r).collect())
    }
}

/// Expands `Σ_S (−1)^{|S|} f(A ∩ ∩_{i∈S} P_i)` (anchored at `A`) or
/// `Σ_{S≠∅} (−1)^{|S|+1} f(∩_{i∈S} P_i)` (no anchor) into merged signed
/// rectangle terms. Empty intersections are dropped, as are terms whose
/// coefficients cancel.
pub fn signed_terms(anchor: Option<&Rect>, parts: &[Rect]) -> Result<Vec<(Rect, i64)>> {
    if parts.len() > MAX_PARTS {
        return Err(Error::TooManyParts { count: parts.len(), max: MAX_PARTS });
    }
    common_dim(anchor.into_iter().chain(parts))?;
    let mut acc: BTreeMap<RectKey, (Rect, i64)> = BTreeMap::new();
    let mut push = |size: usize, r: &Rect| {
        let sign = match (anchor.is_some(), size.is_multiple_of(2)) {
            (true, true) | (false, false) => 1,
            _ => -1,
        };
        acc.entry(r.key()).or_insert_with(|| (r.clone(), 0)).1 += sign;
    };
    walk(parts, anchor.cloned(), 0, &mut push);
    Ok(acc.into_values().filter(|(_, c)| *c != 0).collect())
}

fn walk(parts: &[Rect], acc: Option<Rect>, size: usize, visit: &mut impl FnMut(usize, &Rect)) {
    if acc.as_ref().is_some_and(Rect::is_empty) {
        return;
    }
    match parts.split_first() {
        None => {
            if let Some(r) = &acc {
                visit(size, r);
            }
        }
        Some((first, rest)) => {
            let with = match &acc {
                None => first.clone(),
                Some(a) => a.meet(first),
            };
            walk(rest, acc, size, visit);
            walk(rest, Some(with), size + 1, visit);
        }
    }
}

/// A σ-finite measure evaluated on rectangles; the other set classes follow
/// by inclusion–exclusion.
pub trait RadonMeasure {
    fn dimension(&self) -> usize;

    fn rect(&self, r: &Rect) -> f64;

    fn union(&self, u: &RectUnion) -> Result<f64> {
        let terms = signed_terms(None, u.parts())?;
        Ok(terms.iter().map(|(r, c)| *c as f64 * self.rect(r)).sum())
    }

    fn left_nbhd(&self, c: &LeftNeighborhood) -> Result<f64> {
        let cut: Vec<Rect> = c.subtracted().iter().map(|s| c.base().meet(s)).collect();
        let inside = self.union(&RectUnion::new(cut)?)?;
        Ok((self.rect(c.base()) - inside).max(0.0))
    }
}

/// Lebesgue product measure on `R^N_+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lebesgue {
    pub dim: usize,
}

impl RadonMeasure for Lebesgue {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn rect(&self, r: &Rect) -> f64 {
        r.measure()
    }
}

/// Lebesgue measure of a finite union by inclusion–exclusion.
pub fn union_measure(parts: &RectUnion) -> Result<f64> {
    Lebesgue { dim: parts.dim().unwrap_or(1) }.union(parts)
}

/// `m(U) − m(U ∩ ∪ U_i)`.
pub fn left_nbhd_measure(c: &LeftNeighborhood) -> Result<f64> {
    Lebesgue { dim: c.dim().unwrap_or(1) }.left_nbhd(c)
}

/// Exact set algebra on a finite rectangle family.
///
/// Along each axis the distinct coordinates `0 = c_0 < c_1 < … < c_k` split
/// `[0, c_k]` into the atoms `{0}, (c_0, c_1], …, (c_{k-1}, c_k]`; products of
/// axis atoms partition the bounding box, and every set generated by the
/// family is an exact union of product atoms.
#[derive(Debug, Clone)]
pub struct AtomGrid {
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    len: usize,
}

/// A set of atoms of an [`AtomGrid`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomSet {
    words: Vec<u64>,
}

impl AtomGrid {
    pub fn new<'a>(dim: usize, rects: impl IntoIterator<Item = &'a Rect>) -> Result<Self> {
        let mut axes: Vec<Vec<f64>> = vec![vec![0.0]; dim];
        for r in rects {
            if let Some(c) = r.corner() {
                if c.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: c.len() });
                }
                for (axis, &x) in axes.iter_mut().zip(c) {
                    axis.push(x);
                }
            }
        }
        let mut strides = Vec::with_capacity(dim);
        let mut len = 1usize;
        for axis in axes.iter_mut() {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
            strides.push(len);
            len = len
                .checked_mul(axis.len())
                .ok_or_else(|| Error::InvalidInput("atom grid too large".into()))?;
        }
        Ok(Self { axes, strides, len })
    }

    /// Grid covering every rectangle a left-neighborhood family touches.
    pub fn for_neighborhoods<'a>(dim: usize, sets: impl IntoIterator<Item = &'a LeftNeighborhood>) -> Result<Self> {
        let rects: Vec<&Rect> = sets
            .into_iter()
            .flat_map(|c| core::iter::once(&c.base).chain(&c.subtracted))
            .collect();
        Self::new(dim, rects)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn empty_set(&self) -> AtomSet {
        AtomSet { words: vec![0; self.len.div_ceil(64)] }
    }

    pub fn rect(&self, r: &Rect) -> Result<AtomSet> {
        let mut set = self.empty_set();
        let Some(c) = r.corner() else { return Ok(set) };
        if c.len() != self.axes.len() {
            return Err(Error::DimensionMismatch { expected: self.axes.len(), found: c.len() });
        }
        let mut limits = Vec::with_capacity(c.len());
        for (axis, &x) in self.axes.iter().zip(c) {
            let pos = axis
                .binary_search_by(|v| v.total_cmp(&x))
                .map_err(|_| Error::InvalidInput(format!("coordinate {x} not on the atom grid")))?;
            limits.push(pos);
        }
        let mut idx = vec![0usize; limits.len()];
        loop {
            let flat: usize = idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
            set.words[flat / 64] |= 1 << (flat % 64);
            let mut d = 0;
            loop {
                if d == idx.len() {
                    return Ok(set);
                }
                if idx[d] < limits[d] {
                    idx[d] += 1;
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    pub fn left_nbhd(&self, c: &LeftNeighborhood) -> Result<AtomSet> {
        let mut set = self.rect(&c.base)?;
        for s in &c.subtracted {
            set = set.difference(&self.rect(s)?);
        }
        Ok(set)
    }

    /// Lebesgue measure of an atom set; atoms on a coordinate hyperplane
    /// weigh nothing.
    pub fn measure(&self, set: &AtomSet) -> f64 {
        let mut total = 0.0;
        for flat in set.iter() {
            let mut vol = 1.0;
            for (&stride, coords) in self.strides.iter().zip(&self.axes) {
                let i = (flat / stride) % coords.len();
                vol *= if i == 0 { 0.0 } else { coords[i] - coords[i - 1] };
            }
            total += vol;
        }
        total
    }
}

impl AtomSet {
    pub fn union(&self, other: &AtomSet) -> AtomSet {
        AtomSet { words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect() }
    }

    pub fn intersection(&self, other: &AtomSet) -> AtomSet {
        AtomSet { words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect() }
    }

    pub fn difference(&self, other: &AtomSet) -> AtomSet {
        AtomSet { words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect() }
    }

    pub fn union_with(&mut self, other: &AtomSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn is_subset(&self, other: &AtomSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &AtomSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            let mut bits = bits;
            core::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + b)
            })
        })
    }
}

/// Cells of the grid cut of `u` at the given per-axis coordinates; they
/// partition `u` exactly. Coordinates outside `(0, u_i)` are ignored and
/// `u_i` is always a cut.
pub fn tiling(u: &Rect, cuts: &[Vec<f64>]) -> Result<Vec<LeftNeighborhood>> {
    let Some(corner) = u.corner() else { return Ok(Vec::new()) };
    if cuts.len() != corner.len() {
        return Err(Error::DimensionMismatch { expected: corner.len(), found: cuts.len() });
    }
    let axes: Vec<Vec<f64>> = cuts
        .iter()
        .zip(corner)
        .map(|(cs, &top)| {
            let mut v: Vec<f64> = cs.iter().copied().filter(|&c| c > 0.0 && c < top).collect();
            v.push(top);
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    let mut cells = Vec::new();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let lower: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| if i == 0 { 0.0 } else { a[i - 1] }).collect();
        let upper: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
        cells.push(LeftNeighborhood::cell(&lower, &upper)?);
        let mut d = 0;
        loop {
            if d == idx.len() {
                return Ok(cells);
            }
            if idx[d] + 1 < axes[d].len() {
                idx[d] += 1;
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(c: &[f64]) -> Rect {
        Rect::new(c.to_vec()).unwrap()
    }

    #[test]
    fn rect_measure_examples() {
        assert_eq!(rect_measure(&Rect::empty()), 0.0);
        assert_eq!(rect_measure(&r(&[1.0, 1.0])), 1.0);
        assert_eq!(rect_measure(&r(&[2.0, 0.5, 3.0])), 3.0);
    }

    #[test]
    fn construction_rejects_bad_corners() {
        assert!(Rect::new(vec![]).is_err());
        assert!(Rect::new(vec![1.0, -0.5]).is_err());
        assert!(Rect::new(vec![f64::INFINITY]).is_err());
        assert_eq!(Rect::new(vec![-0.0, 1.0]).unwrap().key(), r(&[0.0, 1.0]).key());
    }

    #[test]
    fn degenerate_rect_is_not_empty() {
        let o = Rect::origin(2);
        assert!(!o.is_empty());
        assert_eq!(o.measure(), 0.0);
        assert_ne!(o, Rect::empty());
    }

    #[test]
    fn intersection_examples() {
        let u = r(&[1.0, 1.0]);
        assert_eq!(rect_intersection(&u, &u).unwrap(), u);
        assert_eq!(rect_intersection(&r(&[1.0, 2.0]), &r(&[2.0, 1.0])).unwrap(), u);
        assert_eq!(rect_intersection(&u, &Rect::empty()).unwrap(), Rect::empty());
        assert_eq!(
            rect_intersection(&u, &r(&[1.0, 1.0, 1.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn symdiff_examples() {
        let u = r(&[1.0, 1.0]);
        assert_eq!(symdiff_measure(&u, &u).unwrap(), 0.0);
        assert_eq!(symdiff_measure(&u, &Rect::empty()).unwrap(), 1.0);
        assert_eq!(symdiff_measure(&u, &r(&[2.0, 1.0])).unwrap(), 1.0);
        assert!(symdiff_measure(&u, &r(&[1.0])).is_err());
    }

    #[test]
    fn symdiff_keeps_thin_shells() {
        let eps = f64::EPSILON;
        let a = r(&[1.0 + eps, 1.0 + eps]);
        let b = r(&[1.0, 1.0]);
        let exact = 2.0 * eps + eps * eps;
        assert!((symdiff_measure(&a, &b).unwrap() - exact).abs() <= 1e-3 * exact);
    }

    #[test]
    fn union_examples() {
        assert_eq!(union_measure(&RectUnion::new(vec![]).unwrap()).unwrap(), 0.0);
        let two = RectUnion::new(vec![r(&[1.0, 2.0]), r(&[2.0, 1.0])]).unwrap();
        assert_eq!(union_measure(&two).unwrap(), 3.0);
        assert_eq!(union_measure(&RectUnion::single(r(&[1.0, 1.0]))).unwrap(), 1.0);
    }

    #[test]
    fn union_canonical_form_drops_covered_parts() {
        let u = RectUnion::new(vec![r(&[1.0, 1.0]), Rect::empty(), r(&[2.0, 2.0]), r(&[1.0, 1.0])]).unwrap();
        assert_eq!(u.parts(), &[r(&[2.0, 2.0])]);
        let dup = RectUnion::new(vec![r(&[1.0, 1.0]), r(&[1.0, 1.0])]).unwrap();
        assert_eq!(dup.parts().len(), 1);
    }

    #[test]
    fn too_many_parts_is_an_error() {
        let parts: Vec<Rect> = (0..=MAX_PARTS).map(|i| r(&[i as f64 + 1.0, 100.0 - i as f64])).collect();
        let u = RectUnion::new(parts).unwrap();
        assert!(matches!(union_measure(&u), Err(Error::TooManyParts { .. })));
    }

    #[test]
    fn left_nbhd_examples() {
        let u = r(&[1.5, 2.0]);
        let c = LeftNeighborhood::new(u.clone(), vec![u.clone()]).unwrap();
        assert_eq!(left_nbhd_measure(&c).unwrap(), 0.0);
        let c = LeftNeighborhood::new(r(&[2.0, 2.0]), vec![r(&[1.0, 2.0]), r(&[2.0, 1.0])]).unwrap();
        assert_eq!(left_nbhd_measure(&c).unwrap(), 1.0);
        let c = LeftNeighborhood::from_rect(u.clone());
        assert_eq!(left_nbhd_measure(&c).unwrap(), 3.0);
    }

    #[test]
    fn tiling_partitions_the_rectangle() {
        let u = r(&[3.0, 2.0]);
        let cells = tiling(&u, &[vec![1.0, 2.0], vec![0.5]]).unwrap();
        assert_eq!(cells.len(), 6);
        let grid = AtomGrid::for_neighborhoods(2, &cells).unwrap();
        let whole = grid.rect(&u).unwrap();
        let mut acc = grid.empty_set();
        for (i, a) in cells.iter().enumerate() {
            let sa = grid.left_nbhd(a).unwrap();
            for b in &cells[i + 1..] {
                assert!(sa.is_disjoint(&grid.left_nbhd(b).unwrap()));
            }
            acc.union_with(&sa);
        }
        assert_eq!(acc, whole);
        let total: f64 = cells.iter().map(|c| left_nbhd_measure(c).unwrap()).sum();
        assert!((total - 6.0).abs() < 1e-12);
    }

    #[test]
    fn atoms_include_the_closed_boundary() {
        // [0,(1,1)] \ [0,(1,0)] is not [0,(1,1)]: the bottom edge is removed.
        let grid = AtomGrid::new(2, [&r(&[1.0, 1.0]), &r(&[1.0, 0.0])]).unwrap();
        let full = grid.rect(&r(&[1.0, 1.0])).unwrap();
        let edge = grid.rect(&r(&[1.0, 0.0])).unwrap();
        assert!(!edge.is_empty());
        assert!(edge.is_subset(&full));
        assert_ne!(full.difference(&edge), full);
        assert_eq!(grid.measure(&full.difference(&edge)), 1.0);
    }
}
