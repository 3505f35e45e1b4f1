//! Moving-average representation of a time-changed fBm along one flow:
//! `X(θ) = C(H) ∫ (|θ − u|^{H−1/2} − |u|^{H−1/2}) W(du)`, discretized on a
//! midpoint grid whose breakpoints include every singularity.
//!
//! Cells grade geometrically toward each singularity and grow geometrically
//! in the far tails, so truncation at `±1000·max θ` costs a few thousand cells.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::flows::{PathEnsemble, TimeChange};
use crate::hurst::HurstParam;
use crate::linalg::SquareMatrix;
use crate::rng::{row_stream, DOMAIN_HALF, DOMAIN_INTEGRAL};
#[allow(unused_imports)]
use num_traits::Float as _;

/// `|mass − u|^{H−1/2} − |u|^{H−1/2}`.
pub fn mvn_kernel(mass: f64, u: f64, h: HurstParam) -> Result<f64> {
    if h.is_half() {
        return Err(Error::HalfCase);
    }
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(Error::InvalidMasses);
    }
    Ok(kernel(mass, u, h.value() - 0.5))
}

#[inline]
fn kernel(mass: f64, u: f64, alpha: f64) -> f64 {
    if mass == 0.0 {
        return 0.0;
    }
    (mass - u).abs().powf(alpha) - u.abs().powf(alpha)
}

/// Grid parameters, relative to the largest mass `M`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct KernelGridSpec {
    /// Truncation at `−lower·M`.
    pub lower: f64,
    /// Truncation at `max mass + upper·M`.
    pub upper: f64,
    /// `Δu = M / steps`.
    pub steps: usize,
    /// Cells are `Δu / refine` within `window·M` of a singularity.
    pub refine: usize,
    pub window: f64,
    /// Geometric grading ratio toward a singularity, down to `floor·M`.
    pub grade_ratio: f64,
    pub floor: f64,
    /// Geometric growth of tail cells beyond distance `M` from the masses.
    pub tail_growth: f64,
}

impl Default for KernelGridSpec {
    fn default() -> Self {
        Self {
            lower: 1000.0,
            upper: 1000.0,
            steps: 4096,
            refine: 8,
            window: 0.01,
            grade_ratio: 1.15,
            floor: 1e-20,
            tail_growth: 1.01,
        }
    }
}

impl KernelGridSpec {
    /// Halves every cell: `Δu/2`, square-rooted growth ratios.
    pub fn refined(&self) -> Self {
        Self {
            steps: self.steps * 2,
            grade_ratio: self.grade_ratio.sqrt(),
            tail_growth: self.tail_growth.sqrt(),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lower > 0.0
            && self.upper > 0.0
            && self.steps > 0
            && self.refine > 0
            && self.window >= 0.0
            && self.grade_ratio > 1.0
            && self.floor > 0.0
            && self.tail_growth >= 1.0
            && [self.lower, self.upper, self.window, self.grade_ratio, self.floor, self.tail_growth]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(alloc::format!("{self:?}")))
        }
    }
}

/// Midpoint cells on `[u_min, u_max]`. Each cell is stored as an offset from
/// the singularity it grades toward, so cells far below the spacing of
/// floats near that singularity keep their exact widths.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    anchors: Vec<f64>,
    offsets: Vec<f64>,
    widths: Vec<f64>,
}

struct Side {
    h0: f64,
    ratio: f64,
    fine: f64,
    window: f64,
    coarse: f64,
    core: f64,
    growth: f64,
}

impl Side {
    /// Offsets from a singularity outward, ending exactly at `extent`.
    fn offsets(&self, extent: f64) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut d = 0.0;
        let mut w = self.h0;
        while d < extent {
            let cap = if d < self.window {
                self.fine
            } else if d < self.core {
                self.coarse
            } else {
                (w * self.growth).max(self.coarse)
            };
            w = if d == 0.0 { self.h0 } else { (d * (self.ratio - 1.0)).max(self.h0).min(cap) };
            if d + 1.5 * w >= extent {
                out.push(extent);
                break;
            }
            d += w;
            out.push(d);
        }
        out
    }
}

impl KernelGrid {
    /// Grid for masses up to `scale`, with `singularities` (sorted, distinct,
    /// starting at 0) as breakpoints.
    pub fn build(spec: &KernelGridSpec, scale: f64, singularities: &[f64]) -> Result<Self> {
        spec.validate()?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidMasses);
        }
        let coarse = scale / spec.steps as f64;
        let side = Side {
            h0: spec.floor * scale,
            ratio: spec.grade_ratio,
            fine: coarse / spec.refine as f64,
            window: spec.window * scale,
            coarse,
            core: scale,
            growth: spec.tail_growth,
        };
        let mut grid = Self { anchors: Vec::new(), offsets: Vec::new(), widths: Vec::new() };
        let lo = singularities[0];
        let hi = singularities[singularities.len() - 1];
        grid.push_side(lo, &side.offsets(spec.lower * scale), -1.0);
        for pair in singularities.windows(2) {
            let half = 0.5 * (pair[1] - pair[0]);
            if half <= 2.0 * side.h0 {
                grid.push_side(pair[0], &[0.0, 2.0 * half], 1.0);
                continue;
            }
            let d = side.offsets(half);
            grid.push_side(pair[0], &d, 1.0);
            grid.push_side(pair[1], &d, -1.0);
        }
        grid.push_side(hi, &side.offsets(spec.upper * scale), 1.0);
        Ok(grid)
    }

    fn push_side(&mut self, anchor: f64, d: &[f64], sign: f64) {
        for w in d.windows(2) {
            self.anchors.push(anchor);
            self.offsets.push(sign * 0.5 * (w[0] + w[1]));
            self.widths.push(w[1] - w[0]);
        }
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    /// Cell midpoints, rounded to absolute coordinates.
    pub fn midpoints(&self) -> Vec<f64> {
        self.anchors.iter().zip(&self.offsets).map(|(a, o)| a + o).collect()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// `k(mass, ·)` at every midpoint.
    pub fn kernel_values(&self, mass: f64, h: HurstParam) -> Vec<f64> {
        let alpha = h.value() - 0.5;
        self.anchors.iter().zip(&self.offsets).map(|(&a, &o)| kernel_at(mass, a, o, alpha)).collect()
    }

    /// `Σ k(m_a, u_i) k(m_b, u_i) Δu_i`.
    fn inner(&self, a: f64, b: f64, alpha: f64) -> f64 {
        (0..self.len())
            .map(|i| {
                let (s, o) = (self.anchors[i], self.offsets[i]);
                kernel_at(a, s, o, alpha) * kernel_at(b, s, o, alpha) * self.widths[i]
            })
            .sum()
    }
}

/// The kernel at `u = anchor + offset`, with both distances formed before
/// adding the offset.
#[inline]
fn kernel_at(mass: f64, anchor: f64, offset: f64, alpha: f64) -> f64 {
    if mass == 0.0 {
        return 0.0;
    }
    ((mass - anchor) - offset).abs().powf(alpha) - (anchor + offset).abs().powf(alpha)
}

/// Relative size of what the grid cannot see: the mass of the innermost
/// singular cells that the midpoint rule misses, plus both truncated tails.
fn quadrature_error(spec: &KernelGridSpec, h: HurstParam, integral: f64) -> f64 {
    let two_h = h.twice();
    let alpha = h.value() - 0.5;
    let h0 = spec.floor;
    let cell = (h0.powf(two_h) / two_h - h0 * (0.5 * h0).powf(2.0 * alpha)).abs();
    let tail = |d: f64| alpha * alpha * d.powf(two_h - 2.0) / (2.0 - two_h);
    (4.0 * cell + tail(spec.lower) + tail(spec.upper)) / integral
}

pub const QUADRATURE_TOL: f64 = 1e-3;

/// `(∫ k(1, u)² du)^{-1/2}` on the unit grid. By scaling, the same constant
/// normalizes every mass.
pub fn normalization_const(h: HurstParam, spec: &KernelGridSpec) -> Result<f64> {
    if h.is_half() {
        return Err(Error::HalfCase);
    }
    let grid = KernelGrid::build(spec, 1.0, &[0.0, 1.0])?;
    let integral = grid.inner(1.0, 1.0, h.value() - 0.5);
    let err = quadrature_error(spec, h, integral);
    if err > QUADRATURE_TOL {
        return Err(Error::QuadratureNotConverged(err));
    }
    Ok(integral.powf(-0.5))
}

/// Hurst parameter, grid and seed, with `C(H)` computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct RepConfig {
    hurst: HurstParam,
    grid: KernelGridSpec,
    seed: u64,
    norm: Option<f64>,
}

impl RepConfig {
    /// At `H = 1/2` no constant is computed and simulation takes the
    /// indicator-kernel path.
    pub fn new(hurst: HurstParam, grid: KernelGridSpec, seed: u64) -> Result<Self> {
        grid.validate()?;
        let norm = if hurst.is_half() { None } else { Some(normalization_const(hurst, &grid)?) };
        Ok(Self { hurst, grid, seed, norm })
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn grid(&self) -> &KernelGridSpec {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normalization(&self) -> Option<f64> {
        self.norm
    }
}

fn check_masses(masses: &[f64]) -> Result<()> {
    let finite = masses.iter().all(|m| m.is_finite() && *m >= 0.0);
    if masses.is_empty() || !finite || masses.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidMasses);
    }
    Ok(())
}

/// Time change of a mass list indexed by position.
pub fn time_change_of(masses: &[f64]) -> TimeChange {
    TimeChange { grid: (0..masses.len()).map(|i| i as f64).collect(), values: masses.to_vec() }
}

/// Precomputed `C(H)·k(m_j, u_i)·√Δu_i` for one flow.
#[derive(Debug, Clone)]
pub struct IntegralSampler {
    masses: Vec<f64>,
    cells: usize,
    weights: Vec<Vec<f64>>,
}

impl IntegralSampler {
    pub fn new(masses: &[f64], cfg: &RepConfig) -> Result<Self> {
        check_masses(masses)?;
        let norm = cfg.norm.ok_or(Error::HalfCase)?;
        let scale = masses[masses.len() - 1];
        if scale == 0.0 {
            return Ok(Self { masses: masses.to_vec(), cells: 0, weights: vec![Vec::new(); masses.len()] });
        }
        let mut sing = vec![0.0];
        sing.extend(masses.iter().copied().filter(|&m| m > 0.0));
        sing.dedup();
        let grid = KernelGrid::build(&cfg.grid, scale, &sing)?;
        let weights = masses
            .iter()
            .map(|&m| {
                grid.kernel_values(m, cfg.hurst)
                    .iter()
                    .zip(&grid.widths)
                    .map(|(k, w)| norm * k * w.sqrt())
                    .collect()
            })
            .collect();
        Ok(Self { masses: masses.to_vec(), cells: grid.len(), weights })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// One path from the `(seed, row)` stream; the same white noise drives
    /// every mass.
    pub fn sample_row(&self, seed: u64, row: u64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.cells == 0 {
            return;
        }
        let mut rng = row_stream(seed, DOMAIN_INTEGRAL, row);
        for i in 0..self.cells {
            let z: f64 = StandardNormal.sample(&mut rng);
            for (o, w) in out.iter_mut().zip(&self.weights) {
                *o += w[i] * z;
            }
        }
    }

    /// The covariance the discretization implies, without sampling.
    pub fn implied_covariance(&self) -> SquareMatrix {
        let k = self.masses.len();
        let mut m = SquareMatrix::zeros(k);
        for a in 0..k {
            for b in 0..=a {
                let v: f64 = self.weights[a].iter().zip(&self.weights[b]).map(|(x, y)| x * y).sum();
                m.set(a, b, v);
                m.set(b, a, v);
            }
        }
        m
    }
}

/// Paths at the given masses, `n_samples` rows generated sequentially.
pub fn simulate_via_integral(masses: &[f64], cfg: &RepConfig, n_samples: usize) -> Result<PathEnsemble> {
    if cfg.hurst.is_half() {
        return Err(Error::HalfCase);
    }
    let sampler = IntegralSampler::new(masses, cfg)?;
    let k = masses.len();
    let mut values = vec![0.0; n_samples * k];
    for (row, chunk) in values.chunks_mut(k).enumerate() {
        sampler.sample_row(cfg.seed, row as u64, chunk);
    }
    PathEnsemble::new(time_change_of(masses), n_samples, values)
}

/// Brownian values `W([0, m_i])` from independent increments.
#[derive(Debug, Clone)]
pub struct HalfSampler {
    masses: Vec<f64>,
    steps: Vec<f64>,
}

impl HalfSampler {
    pub fn new(masses: &[f64]) -> Result<Self> {
        check_masses(masses)?;
        let mut prev = 0.0;
        let steps = masses
            .iter()
            .map(|&m| {
                let s = (m - prev).sqrt();
                prev = m;
                s
            })
            .collect();
        Ok(Self { masses: masses.to_vec(), steps })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn sample_row(&self, seed: u64, row: u64, out: &mut [f64]) {
        let mut rng = row_stream(seed, DOMAIN_HALF, row);
        let mut acc = 0.0;
        for (o, s) in out.iter_mut().zip(&self.steps) {
            let z: f64 = StandardNormal.sample(&mut rng);
            acc += s * z;
            *o = acc;
        }
    }
}

pub fn half_case_simulate(masses: &[f64], seed: u64, n_samples: usize) -> Result<PathEnsemble> {
    let sampler = HalfSampler::new(masses)?;
    let k = masses.len();
    let mut values = vec![0.0; n_samples * k];
    for (row, chunk) in values.chunks_mut(k).enumerate() {
        sampler.sample_row(seed, row as u64, chunk);
    }
    PathEnsemble::new(time_change_of(masses), n_samples, values)
}

/// Dispatches on `H`: the moving-average integral below 1/2, Brownian
/// increments at 1/2.
pub fn simulate(masses: &[f64], cfg: &RepConfig, n_samples: usize) -> Result<PathEnsemble> {
    if cfg.hurst.is_half() {
        half_case_simulate(masses, cfg.seed, n_samples)
    } else {
        simulate_via_integral(masses, cfg, n_samples)
    }
}
