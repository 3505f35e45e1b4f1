//! Exact Gaussian sampling of the set-indexed fractional Brownian motion on
//! a finite index list.
//!
//! The covariance is `½[m(U)^{2H} + m(V)^{2H} − m(U△V)^{2H}]`. It is factored
//! once and each sample row is `L z` for a standard normal `z` drawn from a
//! stream keyed by `(seed, row)`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hurst::HurstParam;
use crate::index::{signed_terms, symdiff_measure, Rect, RectKey, RectUnion};
use crate::linalg::{self, CholeskyFactor, JitterPolicy, SquareMatrix};
use crate::rng::{row_stream, DOMAIN_FIELD};
#[allow(unused_imports)]
use num_traits::Float as _;

/// `x^{2H}` with `0^{2H} = 0`.
#[inline]
pub(crate) fn pow2h(x: f64, h: HurstParam) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.powf(h.twice())
    }
}

/// `E[B_U B_V]`.
pub fn covariance(u: &Rect, v: &Rect, h: HurstParam) -> Result<f64> {
    let sym = symdiff_measure(u, v)?;
    Ok(0.5 * (pow2h(u.measure(), h) + pow2h(v.measure(), h) - pow2h(sym, h)))
}

/// Covariance of the field over an ordered index list.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    indices: Vec<Rect>,
    matrix: SquareMatrix,
}

impl CovMatrix {
    pub fn indices(&self) -> &[Rect] {
        &self.indices
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }
}

pub fn build_cov_matrix(indices: &[Rect], h: HurstParam) -> Result<CovMatrix> {
    if indices.is_empty() {
        return Err(Error::EmptyIndexList);
    }
    let n = indices.len();
    let mut matrix = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let c = covariance(&indices[i], &indices[j], h)?;
            matrix.set(i, j, c);
            matrix.set(j, i, c);
        }
    }
    Ok(CovMatrix { indices: indices.to_vec(), matrix })
}

pub fn cholesky(c: &CovMatrix, policy: &JitterPolicy) -> Result<CholeskyFactor> {
    linalg::cholesky(&c.matrix, policy)
}

/// A factored covariance ready to draw ensembles from.
#[derive(Debug, Clone)]
pub struct GaussianField {
    indices: Vec<Rect>,
    hurst: HurstParam,
    factor: CholeskyFactor,
}

impl GaussianField {
    pub fn new(indices: &[Rect], hurst: HurstParam, policy: &JitterPolicy) -> Result<Self> {
        let cov = build_cov_matrix(indices, hurst)?;
        let factor = cholesky(&cov, policy)?;
        Ok(Self { indices: cov.indices, hurst, factor })
    }

    pub fn indices(&self) -> &[Rect] {
        &self.indices
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// Fills `out` with sample row `row`; depends only on `(seed, row)`.
    pub fn sample_row(&self, seed: u64, row: u64, out: &mut [f64]) {
        sample_row(&self.factor, seed, row, out);
    }
}

/// One draw of `L z` into `out`, with `z` from the `(seed, row)` stream.
pub fn sample_row(factor: &CholeskyFactor, seed: u64, row: u64, out: &mut [f64]) {
    let mut rng = row_stream(seed, DOMAIN_FIELD, row);
    let z: Vec<f64> = (0..factor.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
    factor.apply(&z, out);
}

/// Draws `n_samples` rows sequentially.
pub fn sample_ensemble(field: &GaussianField, n_samples: usize, seed: u64) -> Result<SampleEnsemble> {
    if n_samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let k = field.indices.len();
    let mut values = vec![0.0; n_samples * k];
    for (row, chunk) in values.chunks_mut(k).enumerate() {
        field.sample_row(seed, row as u64, chunk);
    }
    SampleEnsemble::new(field.indices.clone(), n_samples, values, Some(field.hurst), Some(seed))
}

/// Where a set's value lives in an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Stored(usize),
    /// `∅` or an absent set of measure zero, whose value is 0 almost surely.
    Zero,
}

/// Realizations of the field: `n_samples × n_indices`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEnsemble {
    indices: Vec<Rect>,
    n_samples: usize,
    values: Vec<f64>,
    hurst: Option<HurstParam>,
    seed: Option<u64>,
    lookup: BTreeMap<RectKey, usize>,
}

impl SampleEnsemble {
    pub fn new(
        indices: Vec<Rect>,
        n_samples: usize,
        values: Vec<f64>,
        hurst: Option<HurstParam>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::ZeroSamples);
        }
        if indices.is_empty() {
            return Err(Error::EmptyIndexList);
        }
        if values.len() != n_samples * indices.len() {
            return Err(Error::InvalidInput(alloc::format!(
                "{} values for {n_samples} samples of {} indices",
                values.len(),
                indices.len()
            )));
        }
        let mut lookup = BTreeMap::new();
        for (j, r) in indices.iter().enumerate() {
            lookup.entry(r.key()).or_insert(j);
        }
        Ok(Self { indices, n_samples, values, hurst, seed, lookup })
    }

    pub fn indices(&self) -> &[Rect] {
        &self.indices
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_indices(&self) -> usize {
        self.indices.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn hurst(&self) -> Option<HurstParam> {
        self.hurst
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, s: usize) -> &[f64] {
        let k = self.indices.len();
        &self.values[s * k..(s + 1) * k]
    }

    pub fn column(&self, j: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.indices.len()).copied()
    }

    pub fn index_of(&self, r: &Rect) -> Option<usize> {
        self.lookup.get(&r.key()).copied()
    }

    pub fn resolve(&self, r: &Rect) -> Option<Column> {
        if r.is_empty() {
            return Some(Column::Zero);
        }
        match self.index_of(r) {
            Some(j) => Some(Column::Stored(j)),
            None if r.measure() == 0.0 => Some(Column::Zero),
            None => None,
        }
    }

    /// Values of `X_r` across samples.
    pub fn values_of(&self, r: &Rect) -> Result<Vec<f64>> {
        match self.resolve(r) {
            Some(Column::Stored(j)) => Ok(self.column(j).collect()),
            Some(Column::Zero) => Ok(vec![0.0; self.n_samples]),
            None => Err(Error::MissingIndices(vec![r.clone()])),
        }
    }

    /// Same ensemble with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }
}

/// Raw second moments `(1/n) Σ_s X_i X_j`; the field is centered by
/// definition, so the mean is not subtracted.
pub fn empirical_covariance(e: &SampleEnsemble) -> Result<SquareMatrix> {
    if e.n_samples < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: e.n_samples });
    }
    let k = e.n_indices();
    let mut acc = vec![0.0; k * k];
    for s in 0..e.n_samples {
        let row = e.row(s);
        for i in 0..k {
            let xi = row[i];
            let dst = &mut acc[i * k..i * k + i + 1];
            for (a, xj) in dst.iter_mut().zip(row) {
                *a += xi * xj;
            }
        }
    }
    let n = e.n_samples as f64;
    let mut m = SquareMatrix::zeros(k);
    for i in 0..k {
        for j in 0..=i {
            let v = acc[i * k + j] / n;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

/// Resolved signed terms of an inclusion–exclusion expansion.
pub(crate) fn resolve_terms(e: &SampleEnsemble, terms: &[(Rect, i64)]) -> Result<Vec<(usize, f64)>> {
    let mut missing = Vec::new();
    let mut resolved = Vec::with_capacity(terms.len());
    for (r, c) in terms {
        match e.resolve(r) {
            Some(Column::Stored(j)) => resolved.push((j, *c as f64)),
            Some(Column::Zero) => {}
            None => missing.push(r.clone()),
        }
    }
    if missing.is_empty() {
        Ok(resolved)
    } else {
        Err(Error::MissingIndices(missing))
    }
}

/// Value on a finite union by additivity:
/// `X_{∪P} = Σ_{S≠∅} (−1)^{|S|+1} X_{∩S}`, per sample.
pub fn additive_extend(e: &SampleEnsemble, target: &RectUnion) -> Result<Vec<f64>> {
    let terms = signed_terms(None, target.parts())?;
    let resolved = resolve_terms(e, &terms)?;
    Ok((0..e.n_samples)
        .map(|s| {
            let row = e.row(s);
            resolved.iter().map(|&(j, c)| c * row[j]).sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(c: &[f64]) -> Rect {
        Rect::new(c.to_vec()).unwrap()
    }

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn covariance_examples() {
        let u = r(&[1.0, 1.0]);
        assert_eq!(covariance(&u, &u, h(0.37)).unwrap(), 1.0);
        assert!((covariance(&u, &r(&[2.0, 0.5]), h(0.5)).unwrap() - 0.5).abs() < 1e-15);
        let expected = 0.5 * (1.0 + 2f64.sqrt() - 1.0);
        assert!((covariance(&u, &r(&[2.0, 1.0]), h(0.25)).unwrap() - expected).abs() < 1e-15);
        assert_eq!(covariance(&u, &Rect::empty(), h(0.2)).unwrap(), 0.0);
        assert!(covariance(&u, &r(&[1.0]), h(0.2)).is_err());
    }

    #[test]
    fn cov_matrix_examples() {
        let u = r(&[1.0, 1.0]);
        let c = build_cov_matrix(core::slice::from_ref(&u), h(0.3)).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        let c = build_cov_matrix(&[Rect::empty(), u], h(0.3)).unwrap();
        assert_eq!(c.matrix().row(0), &[0.0, 0.0]);
        assert_eq!(c.get(1, 0), 0.0);
        assert!(matches!(build_cov_matrix(&[], h(0.3)), Err(Error::EmptyIndexList)));
    }

    #[test]
    fn half_case_matrix_is_intersection_measure() {
        let mut idx = Vec::new();
        for a in 1..=3 {
            for b in 1..=3 {
                idx.push(r(&[a as f64, b as f64]));
            }
        }
        let c = build_cov_matrix(&idx, h(0.5)).unwrap();
        for (i, u) in idx.iter().enumerate() {
            for (j, v) in idx.iter().enumerate() {
                let m = u.intersection(v).unwrap().measure();
                assert!((c.get(i, j) - m).abs() <= 1e-12 * m.max(1.0));
            }
        }
    }

    #[test]
    fn zero_factor_gives_zero_samples() {
        let field = GaussianField::new(&[Rect::empty(), Rect::origin(2)], h(0.3), &JitterPolicy::default()).unwrap();
        let e = sample_ensemble(&field, 5, 1).unwrap();
        assert!(e.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let field = GaussianField::new(&[r(&[1.0, 2.0]), r(&[2.0, 1.0])], h(0.3), &JitterPolicy::default()).unwrap();
        let a = sample_ensemble(&field, 1, 42).unwrap();
        let b = sample_ensemble(&field, 1, 42).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample_ensemble(&field, 1, 43).unwrap();
        assert_ne!(a.values(), c.values());
        assert!(matches!(sample_ensemble(&field, 0, 1), Err(Error::ZeroSamples)));
    }

    #[test]
    fn empirical_covariance_edge_cases() {
        let idx = vec![r(&[1.0]), r(&[1.0])];
        let e = SampleEnsemble::new(idx.clone(), 3, vec![0.0; 6], None, None).unwrap();
        assert!(empirical_covariance(&e).unwrap().as_slice().iter().all(|v| *v == 0.0));
        let e = SampleEnsemble::new(idx.clone(), 2, vec![1.0, 1.0, 3.0, 3.0], None, None).unwrap();
        let m = empirical_covariance(&e).unwrap();
        assert_eq!(m.row(0), m.row(1));
        assert_eq!(m.get(0, 0), 5.0);
        let one = SampleEnsemble::new(idx, 1, vec![1.0, 1.0], None, None).unwrap();
        assert!(matches!(empirical_covariance(&one), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn additive_extension_expands_unions() {
        let a = r(&[1.0, 2.0]);
        let b = r(&[2.0, 1.0]);
        let ab = r(&[1.0, 1.0]);
        let values = vec![1.0, 2.0, 0.5, -1.0, 4.0, 3.0];
        let e = SampleEnsemble::new(vec![a.clone(), b.clone(), ab], 2, values, None, None).unwrap();
        let single = additive_extend(&e, &RectUnion::single(a.clone())).unwrap();
        assert_eq!(single, vec![1.0, -1.0]);
        let twice = additive_extend(&e, &RectUnion::new(vec![a.clone(), a.clone()]).unwrap()).unwrap();
        assert_eq!(twice, single);
        let both = additive_extend(&e, &RectUnion::new(vec![a, b.clone()]).unwrap()).unwrap();
        assert_eq!(both, vec![1.0 + 2.0 - 0.5, -1.0 + 4.0 - 3.0]);
        let missing = additive_extend(&e, &RectUnion::new(vec![b, r(&[0.5, 3.0])]).unwrap());
        match missing {
            Err(Error::MissingIndices(m)) => assert_eq!(m.len(), 2),
            other => panic!("expected missing indices, got {other:?}"),
        }
    }
}
