//! Dense symmetric matrices and a semidefinite Cholesky factorization with
//! an escalating diagonal jitter.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float as _;

/// Square matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidInput(alloc::format!("{} entries do not form a {n}x{n} matrix", data.len())));
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Relative jitter levels tried in order, each scaled by the largest
/// diagonal entry.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JitterPolicy {
    pub ladder: Vec<f64>,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self { ladder: vec![0.0, 1e-12, 1e-10, 1e-8] }
    }
}

/// Lower-triangular `L` with `L Lᵀ ≈ A + εI`, stored as packed rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    n: usize,
    packed: Vec<f64>,
    /// Absolute jitter `ε` added to the non-zero diagonal entries.
    pub jitter: f64,
    /// Position on the jitter ladder that succeeded.
    pub ladder_step: usize,
}

impl CholeskyFactor {
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row `i` of `L`, entries `0..=i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.row(i)[j]
        }
    }

    /// Writes `L z` into `out`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.row(i).iter().zip(z).map(|(l, x)| l * x).sum();
        }
    }

    pub fn reconstruct(&self) -> SquareMatrix {
        let mut m = SquareMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..=i {
                let v: f64 = self.row(i)[..=j].iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }
}

/// Factorizes `a`, walking the jitter ladder until a step succeeds.
///
/// Rows whose diagonal is exactly zero get no jitter and a zero column, so
/// indices of measure zero stay identically zero. A pivot that is zero up to
/// rounding is accepted only when the rest of its column vanishes too.
pub fn cholesky(a: &SquareMatrix, policy: &JitterPolicy) -> Result<CholeskyFactor> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::EmptyIndexList);
    }
    let scale = a.max_diag();
    let mut last_pivot = 0;
    for (step, &rel) in policy.ladder.iter().enumerate() {
        let jitter = rel * scale;
        match factor_once(a, jitter, scale) {
            Ok(packed) => return Ok(CholeskyFactor { n, packed, jitter, ladder_step: step }),
            Err(pivot) => last_pivot = pivot,
        }
    }
    Err(Error::NotPsd { pivot: last_pivot })
}

fn factor_once(a: &SquareMatrix, jitter: f64, scale: f64) -> core::result::Result<Vec<f64>, usize> {
    let n = a.dim();
    let pivot_tol = 4.0 * n as f64 * f64::EPSILON * scale;
    let column_tol = 1e-9 * scale;
    let mut packed = vec![0.0; n * (n + 1) / 2];
    let off = |i: usize| i * (i + 1) / 2;
    for j in 0..n {
        let diag = a.get(j, j);
        let shifted = if diag > 0.0 { diag + jitter } else { diag };
        let rj = off(j);
        let d = shifted - packed[rj..rj + j].iter().map(|x| x * x).sum::<f64>();
        if d > pivot_tol {
            let root = d.sqrt();
            packed[rj + j] = root;
            for i in j + 1..n {
                let ri = off(i);
                let dot: f64 = packed[ri..ri + j].iter().zip(&packed[rj..rj + j]).map(|(x, y)| x * y).sum();
                packed[ri + j] = (a.get(i, j) - dot) / root;
            }
        } else if d >= -pivot_tol {
            for i in j + 1..n {
                let ri = off(i);
                let dot: f64 = packed[ri..ri + j].iter().zip(&packed[rj..rj + j]).map(|(x, y)| x * y).sum();
                if (a.get(i, j) - dot).abs() > column_tol {
                    return Err(j);
                }
            }
        } else {
            return Err(j);
        }
    }
    Ok(packed)
}
