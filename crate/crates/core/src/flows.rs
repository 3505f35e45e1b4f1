//! Discretized increasing paths through the indexing collection, their time
//! changes `θ_f(t) = m(f(t))`, and projections of sampled fields onto them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::gaussian::{additive_extend, Column, SampleEnsemble};
use crate::index::{signed_terms, union_measure, AtomGrid, Rect, RectUnion};
#[allow(unused_imports)]
use num_traits::Float as _;

pub const DEFAULT_GRID_POINTS: usize = 64;

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("grid has no points".into()));
    }
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidGrid("grid points must be finite and non-negative".into()));
    }
    if let Some(i) = grid.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(format!("grid not strictly increasing at {i}")));
    }
    Ok(())
}

/// `n` equally spaced points on `[a, b]`, endpoints exact.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// An increasing map from a grid on `[a, b]` into the indexing collection.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawElementary"))]
pub struct ElementaryFlow {
    grid: Vec<f64>,
    corners: Vec<Rect>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawElementary {
    grid: Vec<f64>,
    corners: Vec<Rect>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawElementary> for ElementaryFlow {
    type Error = Error;

    fn try_from(raw: RawElementary) -> Result<Self> {
        ElementaryFlow::new(raw.grid, raw.corners)
    }
}

impl ElementaryFlow {
    pub fn new(grid: Vec<f64>, sets: Vec<Rect>) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != sets.len() {
            return Err(Error::InvalidGrid(format!("{} grid points for {} sets", grid.len(), sets.len())));
        }
        let mut dim = None;
        for r in &sets {
            match (dim, r.dim()) {
                (None, d) => dim = d,
                (Some(a), Some(b)) if a != b => return Err(Error::DimensionMismatch { expected: a, found: b }),
                _ => {}
            }
        }
        if let Some(i) = sets.windows(2).position(|w| !w[0].subset_unchecked(&w[1])) {
            return Err(Error::NonMonotoneFlow(i, i + 1));
        }
        Ok(Self { grid, corners: sets })
    }

    /// Builds `f(t) = [0, g(t)]` on the grid.
    pub fn from_fn(grid: Vec<f64>, mut corner: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let sets = grid.iter().map(|&t| Rect::new(corner(t))).collect::<Result<Vec<_>>>()?;
        Self::new(grid, sets)
    }

    /// The curve `t ↦ [0, (t^{p_1} u_1, …, t^{p_N} u_N)]` on `[0, 1]`.
    pub fn power_curve(target: &Rect, exponents: &[f64], points: usize) -> Result<Self> {
        let corner = target.corner().ok_or(Error::EmptyTarget)?;
        if exponents.len() != corner.len() {
            return Err(Error::DimensionMismatch { expected: corner.len(), found: exponents.len() });
        }
        if exponents.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidInput("curve exponents must be positive".into()));
        }
        if points < 2 {
            return Err(Error::InvalidGrid("a flow through a set needs at least two points".into()));
        }
        Self::from_fn(uniform_grid(0.0, 1.0, points), |t| {
            corner.iter().zip(exponents).map(|(u, p)| if t == 1.0 { *u } else { u * t.powf(*p) }).collect()
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sets(&self) -> &[Rect] {
        &self.corners
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn last(&self) -> &Rect {
        &self.corners[self.corners.len() - 1]
    }

    /// Inserts `factor − 1` points between consecutive grid points,
    /// interpolating corners linearly. Existing points keep their sets.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidGrid("refinement factor must be positive".into()));
        }
        let mut grid = Vec::with_capacity(self.len() * factor);
        let mut sets = Vec::with_capacity(self.len() * factor);
        for i in 0..self.len() {
            grid.push(self.grid[i]);
            sets.push(self.corners[i].clone());
            if i + 1 == self.len() {
                break;
            }
            for k in 1..factor {
                let w = k as f64 / factor as f64;
                grid.push(self.grid[i] + w * (self.grid[i + 1] - self.grid[i]));
                let set = match (self.corners[i].corner(), self.corners[i + 1].corner()) {
                    (Some(a), Some(b)) => Rect::new(a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect())?,
                    _ => self.corners[i].clone(),
                };
                sets.push(set);
            }
        }
        Self::new(grid, sets)
    }
}

pub fn make_elementary_flow(grid: Vec<f64>, corners: Vec<Vec<f64>>) -> Result<ElementaryFlow> {
    let sets = corners.into_iter().map(Rect::new).collect::<Result<Vec<_>>>()?;
    ElementaryFlow::new(grid, sets)
}

/// The linear flow `f(t) = [0, t·u]` on `[0, 1]`, so `f(1) = u` and `f(0)` is
/// the origin.
pub fn flows_through(u: &Rect, points: usize) -> Result<ElementaryFlow> {
    let ones = vec![1.0; u.dim().ok_or(Error::EmptyTarget)?];
    ElementaryFlow::power_curve(u, &ones, points)
}

/// A piecewise-elementary flow with values in finite unions: on segment `i`
/// the value is `f_i(s) ∪ f_1(s_1) ∪ … ∪ f_{i−1}(s_{i−1})`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawSimple"))]
pub struct SimpleFlow {
    breakpoints: Vec<f64>,
    segments: Vec<ElementaryFlow>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawSimple {
    breakpoints: Vec<f64>,
    segments: Vec<ElementaryFlow>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawSimple> for SimpleFlow {
    type Error = Error;

    fn try_from(raw: RawSimple) -> Result<Self> {
        SimpleFlow::new(raw.breakpoints, raw.segments)
    }
}

impl SimpleFlow {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<ElementaryFlow>) -> Result<Self> {
        check_grid(&breakpoints)?;
        if breakpoints.len() < 2 || segments.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidGrid(format!(
                "{} breakpoints for {} segments",
                breakpoints.len(),
                segments.len()
            )));
        }
        for (i, seg) in segments.iter().enumerate() {
            if seg.start() != breakpoints[i] || seg.end() != breakpoints[i + 1] {
                return Err(Error::InvalidGrid(format!("segment {i} does not span its breakpoints")));
            }
        }
        let dim = segments
            .iter()
            .flat_map(|s| s.sets())
            .find_map(Rect::dim)
            .unwrap_or(1);
        // continuity at each breakpoint: the next segment starts inside what
        // has already been swept
        let mut swept: Vec<Rect> = Vec::new();
        for (i, seg) in segments.iter().enumerate() {
            if i > 0 {
                let start = &seg.sets()[0];
                let grid = AtomGrid::new(dim, swept.iter().chain(core::iter::once(start)))?;
                let mut covered = grid.empty_set();
                for r in &swept {
                    covered.union_with(&grid.rect(r)?);
                }
                if !grid.rect(start)?.is_subset(&covered) {
                    return Err(Error::InvalidInput(format!("simple flow jumps at breakpoint {i}")));
                }
            }
            swept.push(seg.last().clone());
        }
        Ok(Self { breakpoints, segments })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[ElementaryFlow] {
        &self.segments
    }

    /// Concatenated segment grids, with each shared breakpoint once.
    pub fn grid(&self) -> Vec<f64> {
        let mut g = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let skip = usize::from(i > 0);
            g.extend_from_slice(&seg.grid()[skip..]);
        }
        g
    }

    /// Flow values on [`Self::grid`]; a breakpoint takes the value at the
    /// end of the segment it closes.
    pub fn values(&self) -> Result<Vec<RectUnion>> {
        let mut out = Vec::new();
        let mut acc: Vec<Rect> = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let skip = usize::from(i > 0);
            for set in &seg.sets()[skip..] {
                let mut parts = acc.clone();
                parts.push(set.clone());
                out.push(RectUnion::new(parts)?);
            }
            acc.push(seg.last().clone());
        }
        Ok(out)
    }

    /// Every rectangle the additive expansion of the flow values touches.
    pub fn required_indices(&self) -> Result<Vec<Rect>> {
        let mut out = Vec::new();
        for v in self.values()? {
            for (r, _) in signed_terms(None, v.parts())? {
                out.push(r);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Flow {
    Simple(SimpleFlow),
    Elementary(ElementaryFlow),
}

impl From<ElementaryFlow> for Flow {
    fn from(f: ElementaryFlow) -> Self {
        Flow::Elementary(f)
    }
}

impl From<SimpleFlow> for Flow {
    fn from(f: SimpleFlow) -> Self {
        Flow::Simple(f)
    }
}

impl Flow {
    pub fn grid(&self) -> Vec<f64> {
        match self {
            Flow::Elementary(f) => f.grid().to_vec(),
            Flow::Simple(f) => f.grid(),
        }
    }

    pub fn values(&self) -> Result<Vec<RectUnion>> {
        match self {
            Flow::Elementary(f) => Ok(f.sets().iter().cloned().map(RectUnion::single).collect()),
            Flow::Simple(f) => f.values(),
        }
    }

    /// Rectangles an ensemble must hold to project onto this flow.
    pub fn required_indices(&self) -> Result<Vec<Rect>> {
        match self {
            Flow::Elementary(f) => Ok(f.sets().iter().filter(|r| !r.is_empty()).cloned().collect()),
            Flow::Simple(f) => f.required_indices(),
        }
    }
}

/// `θ_f(t_i) = m(f(t_i))` on the flow's grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeChange {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeChange {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

pub fn time_change(flow: &Flow) -> Result<TimeChange> {
    let grid = flow.grid();
    let values = match flow {
        Flow::Elementary(f) => f.sets().iter().map(Rect::measure).collect(),
        Flow::Simple(f) => f.values()?.iter().map(union_measure).collect::<Result<Vec<_>>>()?,
    };
    Ok(TimeChange { grid, values })
}

/// Sample paths along a flow: `n_samples × grid length`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    time_change: TimeChange,
    n_samples: usize,
    values: Vec<f64>,
}

impl PathEnsemble {
    pub fn new(time_change: TimeChange, n_samples: usize, values: Vec<f64>) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::ZeroSamples);
        }
        if values.len() != n_samples * time_change.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for {n_samples} paths of length {}",
                values.len(),
                time_change.len()
            )));
        }
        Ok(Self { time_change, n_samples, values })
    }

    pub fn time_change(&self) -> &TimeChange {
        &self.time_change
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn len(&self) -> usize {
        self.time_change.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_change.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn path(&self, s: usize) -> &[f64] {
        let k = self.len();
        &self.values[s * k..(s + 1) * k]
    }

    pub fn column(&self, i: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.values.iter().skip(i).step_by(self.len()).copied()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }
}

/// `path(t_i) = X_{f(t_i)}` for every sample.
pub fn project(e: &SampleEnsemble, flow: &Flow) -> Result<PathEnsemble> {
    let tc = time_change(flow)?;
    let k = tc.len();
    let n = e.n_samples();
    let mut values = vec![0.0; n * k];
    match flow {
        Flow::Elementary(f) => {
            let mut missing = Vec::new();
            let mut cols = Vec::with_capacity(k);
            for r in f.sets() {
                match e.resolve(r) {
                    Some(Column::Stored(j)) => cols.push(Some(j)),
                    Some(Column::Zero) => cols.push(None),
                    None => missing.push(r.clone()),
                }
            }
            if !missing.is_empty() {
                missing.dedup();
                return Err(Error::MissingIndices(missing));
            }
            for s in 0..n {
                let row = e.row(s);
                let out = &mut values[s * k..(s + 1) * k];
                for (o, c) in out.iter_mut().zip(&cols) {
                    *o = c.map_or(0.0, |j| row[j]);
                }
            }
        }
        Flow::Simple(f) => {
            let unions = f.values()?;
            let mut missing = Vec::new();
            let mut columns = Vec::with_capacity(k);
            for u in &unions {
                match additive_extend(e, u) {
                    Ok(c) => columns.push(c),
                    Err(Error::MissingIndices(m)) => missing.extend(m),
                    Err(other) => return Err(other),
                }
            }
            if !missing.is_empty() {
                let mut seen: Vec<Rect> = Vec::new();
                for m in missing {
                    if !seen.contains(&m) {
                        seen.push(m);
                    }
                }
                return Err(Error::MissingIndices(seen));
            }
            for (i, col) in columns.iter().enumerate() {
                for (s, v) in col.iter().enumerate() {
                    values[s * k + i] = *v;
                }
            }
        }
    }
    PathEnsemble::new(tc, n, values)
}
