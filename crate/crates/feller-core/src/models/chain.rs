//! Finite-state chains with exact duals: the exactly computable oracle
//! for every definition the other models can only sample.

use crate::error::{CoreError, Result};
use crate::measure::ProbVector;
use crate::stats::CompensatedSum;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    n: usize,
    rows: Vec<f64>, // row-major n x n
}

impl FiniteChain {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(CoreError::InvalidParameter("empty chain".into()));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(CoreError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            let mut acc = CompensatedSum::new();
            for &p in row {
                if p < 0.0 || !p.is_finite() {
                    return Err(CoreError::InvalidParameter(format!(
                        "negative or non-finite entry {p} in row {i}"
                    )));
                }
                acc.add(p);
            }
            if (acc.value() - 1.0).abs() > 1e-12 {
                return Err(CoreError::InvalidParameter(format!(
                    "row {i} sums to {} (must be 1 within 1e-12)",
                    acc.value()
                )));
            }
            flat.extend_from_slice(row);
        }
        Ok(Self { n, rows: flat })
    }

    pub fn identity(n: usize) -> Self {
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            rows[i * n + i] = 1.0;
        }
        Self { n, rows }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(CoreError::DimensionMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    /// One application of the dual: `(P f)(i) = sum_j P(i,j) f(j)`.
    pub fn step_dual(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        Ok((0..self.n)
            .map(|i| crate::stats::dot(self.row(i), f))
            .collect())
    }

    /// `P^t f` by repeated exact matrix-vector products.
    pub fn exact_dual(&self, f: &[f64], t: u64) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        let mut cur = f.to_vec();
        for _ in 0..t {
            cur = self.step_dual(&cur)?;
        }
        Ok(cur)
    }

    /// One application on distributions: `(nu P)(j) = sum_i nu(i) P(i,j)`.
    pub fn step_distribution(&self, nu: &ProbVector) -> Result<ProbVector> {
        self.check_len(nu.len())?;
        let src = nu.entries();
        let mut out = vec![CompensatedSum::new(); self.n];
        for i in 0..self.n {
            let w = src[i];
            if w == 0.0 {
                continue;
            }
            for (j, acc) in out.iter_mut().enumerate() {
                acc.add(w * self.entry(i, j));
            }
        }
        ProbVector::new(out.into_iter().map(|a| a.value().max(0.0)).collect())
    }

    /// `nu P^t` by repeated exact products.
    pub fn exact_distribution(&self, nu: &ProbVector, t: u64) -> Result<ProbVector> {
        let mut cur = nu.clone();
        for _ in 0..t {
            cur = self.step_distribution(&cur)?;
        }
        Ok(cur)
    }

    /// Exact Cesaro average `(1/t) sum_{k=1}^t nu P^k`.
    pub fn exact_cesaro(&self, nu: &ProbVector, t: u64) -> Result<ProbVector> {
        if t == 0 {
            return Err(CoreError::InvalidTime {
                t: 0.0,
                reason: "cesaro average needs t >= 1",
            });
        }
        let mut cur = nu.clone();
        let mut acc = vec![CompensatedSum::new(); self.n];
        for _ in 0..t {
            cur = self.step_distribution(&cur)?;
            for (a, &p) in acc.iter_mut().zip(cur.entries()) {
                a.add(p);
            }
        }
        let tf = t as f64;
        ProbVector::new(acc.into_iter().map(|a| (a.value() / tf).max(0.0)).collect())
    }

    /// Categorical draw of the next state.
    pub fn sample_step(&self, state: usize, rng: &mut impl Rng) -> usize {
        let row = self.row(state);
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for (j, &p) in row.iter().enumerate() {
            cum += p;
            if u < cum {
                return j;
            }
        }
        // top up rounding: the row sums to 1 within 1e-12
        self.n - 1
    }

    /// Samples the state after `t` steps.
    pub fn sample_path_end(&self, state: usize, t: u64, rng: &mut impl Rng) -> usize {
        let mut cur = state;
        for _ in 0..t {
            cur = self.sample_step(cur, rng);
        }
        cur
    }

    /// Stationary distribution by power iteration on a strictly positive
    /// start, certified afterwards by the caller via
    /// [`crate::ergodic::invariant_residual`].
    pub fn stationary(&self, tol: f64, max_iters: u64) -> Result<ProbVector> {
        let mut cur = ProbVector::uniform(self.n);
        for _ in 0..max_iters {
            let next = self.step_distribution(&cur)?;
            let moved = cur.tv_distance(&next)?;
            cur = next;
            if moved <= tol {
                return Ok(cur);
            }
        }
        Err(CoreError::PreconditionFailed(format!(
            "power iteration did not reach tol {tol} in {max_iters} iterations"
        )))
    }
}
