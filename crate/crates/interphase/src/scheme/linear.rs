//! Sparse direct linear algebra behind the Newton iteration.
//!
//! The Jacobian sparsity pattern is fixed per scenario, so the symbolic
//! analysis is done once; each refresh only refills values and redoes the
//! numeric factorization.

use crate::scheme::SchemeError;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

/// Sink receiving Jacobian entries during assembly.
pub trait JacSink {
    const ACTIVE: bool;
    fn emit(&mut self, row: usize, col: usize, val: f64);
}

/// Residual-only assembly: entries are discarded (and the compiler removes
/// the emission code entirely).
pub struct NoJac;

impl JacSink for NoJac {
    const ACTIVE: bool = false;
    #[inline(always)]
    fn emit(&mut self, _row: usize, _col: usize, _val: f64) {}
}

/// First pass: record the (row, col) pattern in emission order.
pub struct PatternSink {
    pub pairs: Vec<(u32, u32)>,
}

impl JacSink for PatternSink {
    const ACTIVE: bool = true;
    #[inline(always)]
    fn emit(&mut self, row: usize, col: usize, _val: f64) {
        self.pairs.push((row as u32, col as u32));
    }
}

/// Value pass: the k-th emission lands in a precomputed CSC slot.
pub struct ValueSink<'a> {
    slots: &'a [u32],
    values: &'a mut [f64],
    k: usize,
}

impl JacSink for ValueSink<'_> {
    const ACTIVE: bool = true;
    #[inline(always)]
    fn emit(&mut self, _row: usize, _col: usize, val: f64) {
        self.values[self.slots[self.k] as usize] += val;
        self.k += 1;
    }
}

/// CSC matrix with frozen pattern plus cached symbolic/numeric LU.
pub struct SparseSystem {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    slots: Vec<u32>,
    values: Vec<f64>,
    symbolic: SymbolicLu<usize>,
    lu: Option<Lu<usize, f64>>,
    pub factorizations: usize,
    pub solves: usize,
}

impl SparseSystem {
    /// Build the CSC skeleton and symbolic factorization from the emission
    /// pattern of one assembly pass.
    pub fn from_pattern(n: usize, pairs: &[(u32, u32)]) -> Result<Self, SchemeError> {
        let mut order: Vec<u32> = (0..pairs.len() as u32).collect();
        order.sort_unstable_by_key(|&k| {
            let (r, c) = pairs[k as usize];
            ((c as u64) << 32) | r as u64
        });
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(pairs.len());
        let mut slots = vec![0u32; pairs.len()];
        let mut last: Option<(u32, u32)> = None;
        for &k in &order {
            let (r, c) = pairs[k as usize];
            if last != Some((r, c)) {
                row_idx.push(r as usize);
                col_ptr[c as usize + 1] += 1;
                last = Some((r, c));
            }
            slots[k as usize] = (row_idx.len() - 1) as u32;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let values = vec![0.0; row_idx.len()];
        let sym_ref = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLu::try_new(sym_ref).map_err(|e| SchemeError::LinearSolveFailed(format!("symbolic LU: {e:?}")))?;
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            slots,
            values,
            symbolic,
            lu: None,
            factorizations: 0,
            solves: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Begin a value refill; all slots reset to zero.
    pub fn value_sink(&mut self) -> ValueSink<'_> {
        self.values.fill(0.0);
        ValueSink { slots: &self.slots, values: &mut self.values, k: 0 }
    }

    fn mat_ref(&self) -> SparseColMatRef<'_, usize, f64> {
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        SparseColMatRef::new(sym, &self.values)
    }

    /// Numeric factorization of the currently filled values.
    pub fn factorize(&mut self) -> Result<(), SchemeError> {
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), self.mat_ref())
            .map_err(|e| SchemeError::LinearSolveFailed(format!("numeric LU: {e:?}")))?;
        self.lu = Some(lu);
        self.factorizations += 1;
        Ok(())
    }

    pub fn has_factorization(&self) -> bool {
        self.lu.is_some()
    }

    pub fn invalidate(&mut self) {
        self.lu = None;
    }

    /// Solve J x = rhs in place using the cached factorization.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) -> Result<(), SchemeError> {
        let lu = self.lu.as_ref().ok_or_else(|| SchemeError::LinearSolveFailed("no factorization".into()))?;
        let n = self.n;
        let m = MatMut::from_column_major_slice_mut(rhs, n, 1);
        lu.solve_in_place(m);
        self.solves += 1;
        Ok(())
    }

    /// Max-norm of J x - b for the current values (not the factorization).
    pub fn residual_inf(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut r = b.to_vec();
        for c in 0..self.n {
            let xc = x[c];
            if xc != 0.0 {
                for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                    r[self.row_idx[k]] -= self.values[k] * xc;
                }
            }
        }
        r.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assemble_factor_solve_roundtrip() {
        // 2x2 block diag + coupling, with a duplicate emission summed into one slot
        let pairs = vec![(0u32, 0u32), (0, 0), (0, 1), (1, 0), (1, 1), (2, 2)];
        let mut sys = SparseSystem::from_pattern(3, &pairs).unwrap();
        assert_eq!(sys.nnz(), 5);
        {
            let mut sink = sys.value_sink();
            for (k, v) in [2.0, 1.0, 1.0, 1.0, 2.0, 4.0].iter().enumerate() {
                let (r, c) = pairs[k];
                sink.emit(r as usize, c as usize, *v);
            }
        }
        sys.factorize().unwrap();
        // A = [[3,1,0],[1,2,0],[0,0,4]], b = [5,4,8] -> x = [1.2, 1.4, 2]
        let mut rhs = vec![5.0, 4.0, 8.0];
        sys.solve_in_place(&mut rhs).unwrap();
        assert!((rhs[0] - 1.2).abs() < 1e-12);
        assert!((rhs[1] - 1.4).abs() < 1e-12);
        assert!((rhs[2] - 2.0).abs() < 1e-12);
        let b = vec![5.0, 4.0, 8.0];
        assert!(sys.residual_inf(&rhs, &b) < 1e-12);
    }
}
