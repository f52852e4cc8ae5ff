//! Compressed sparse row matrices.
//!
//! Every adjacency and aggregation matrix in the engine is stored in this
//! form. Column indices are strictly increasing within a row, so products
//! accumulate in a fixed order and results are reproducible bit for bit.

use crate::dense::{axpy, DenseMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from raw CSR arrays, validating every structural invariant.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::shape("SparseMatrix::from_csr", msg));
        if row_ptr.len() != rows + 1 {
            return bad(format!("row_ptr has length {}, expected {}", row_ptr.len(), rows + 1));
        }
        if row_ptr[0] != 0 || row_ptr[rows] != col_idx.len() || col_idx.len() != values.len() {
            return bad("row_ptr endpoints disagree with nnz".into());
        }
        for r in 0..rows {
            if row_ptr[r] > row_ptr[r + 1] {
                return bad(format!("row_ptr decreases at row {r}"));
            }
            let cs = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cs.iter().any(|&c| c >= cols) {
                return bad(format!("column index out of range in row {r}"));
            }
            if cs.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("columns not strictly increasing in row {r}"));
            }
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from (row, col, value) triplets. Duplicate coordinates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::shape(
                    "SparseMatrix::from_triplets",
                    format!("entry ({r}, {c}) outside {rows}x{cols}"),
                ));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Stores every nonzero of `dense`.
    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(dense.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..dense.rows() {
            for (c, &v) in dense.row(r).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: dense.rows(),
            cols: dense.cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            out.set(r, c, v);
        }
        out
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Stored value at (r, c), zero when absent.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cs, vs) = self.row(r);
            cs.iter().zip(vs).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (_, c, v) in self.iter() {
            out[c] += v;
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in ascending order, so columns of the transpose stay sorted.
        for (r, c, v) in self.iter() {
            let slot = next[c];
            col_idx[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    /// Returns a copy with every stored value transformed by `f(row, col, value)`.
    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.values[k] = f(r, self.col_idx[k], self.values[k]);
            }
        }
        out
    }

    /// `self + alpha·I` for square matrices, inserting missing diagonal entries.
    pub fn add_diagonal(&self, alpha: f64) -> Result<SparseMatrix> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let diag = (0..self.rows).map(|i| (i, i, alpha));
        SparseMatrix::from_triplets(self.rows, self.cols, self.iter().chain(diag))
    }

    /// Principal submatrix on `keep`, which must be strictly increasing.
    /// Row and column `k` of the result correspond to node `keep[k]`.
    pub fn induced_submatrix(&self, keep: &[usize]) -> Result<SparseMatrix> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "induced_submatrix: indices must be strictly increasing".into(),
            ));
        }
        const DROPPED: usize = usize::MAX;
        let mut new_index = vec![DROPPED; self.rows];
        for (k, &i) in keep.iter().enumerate() {
            if i >= self.rows {
                return Err(Error::NodeIndex {
                    index: i,
                    num_nodes: self.rows,
                });
            }
            new_index[i] = k;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &i in keep {
            let (cs, vs) = self.row(i);
            for (&c, &v) in cs.iter().zip(vs) {
                let nc = new_index[c];
                if nc != DROPPED {
                    col_idx.push(nc);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            rows: keep.len(),
            cols: keep.len(),
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Sparse-dense product `self · rhs`. Each output row accumulates in
    /// ascending column order.
    pub fn spmm(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows() {
            return Err(Error::shape(
                "spmm",
                format!("{}x{} x {:?}", self.rows, self.cols, rhs.shape()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols());
        for r in 0..self.rows {
            let (cs, vs) = self.row(r);
            let out_row = out.row_mut(r);
            for (&c, &v) in cs.iter().zip(vs) {
                axpy(v, rhs.row(c), out_row);
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` computed by scattering, without building the transpose.
    pub fn spmm_transposed(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows() {
            return Err(Error::shape(
                "spmm_transposed",
                format!("({}x{})ᵀ x {:?}", self.rows, self.cols, rhs.shape()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, rhs.cols());
        for r in 0..self.rows {
            let (cs, vs) = self.row(r);
            let src = rhs.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                axpy(v, src, out.row_mut(c));
            }
        }
        Ok(out)
    }
}

/// Block-diagonal concatenation of square or rectangular blocks.
pub fn block_diagonal(blocks: &[&SparseMatrix]) -> SparseMatrix {
    let rows: usize = blocks.iter().map(|b| b.rows()).sum();
    let cols: usize = blocks.iter().map(|b| b.cols()).sum();
    let mut row_ptr = Vec::with_capacity(rows + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    let mut col_offset = 0;
    for b in blocks {
        for r in 0..b.rows() {
            let (cs, vs) = b.row(r);
            col_idx.extend(cs.iter().map(|c| c + col_offset));
            values.extend_from_slice(vs);
            row_ptr.push(col_idx.len());
        }
        col_offset += b.cols();
    }
    SparseMatrix {
        rows,
        cols,
        row_ptr,
        col_idx,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    #[test]
    fn identity_spmm_is_noop() {
        let d = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(SparseMatrix::identity(3).spmm(&d).unwrap(), d);
    }

    #[test]
    fn swap_permutation() {
        let s = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let d = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let expected = DenseMatrix::from_rows(&[[3.0, 4.0], [1.0, 2.0]]).unwrap();
        assert_eq!(s.spmm(&d).unwrap(), expected);
    }

    #[test]
    fn spmm_dimension_mismatch() {
        let s = SparseMatrix::identity(3);
        assert!(s.spmm(&DenseMatrix::zeros(2, 2)).is_err());
        assert!(s.spmm_transposed(&DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let s = SparseMatrix::from_triplets(2, 3, [(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (1, 0, 4.0)])
            .unwrap();
        assert_eq!(s.row_ptr(), &[0, 1, 3]);
        assert_eq!(s.col_idx(), &[1, 0, 2]);
        assert_eq!(s.values(), &[2.0, 4.0, 1.5]);
        assert!(SparseMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn from_csr_rejects_unsorted_columns() {
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 2], vec![1, 2], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn induced_submatrix_relabels() {
        let d = DenseMatrix::from_fn(4, 4, |i, j| (i * 4 + j + 1) as f64);
        let s = SparseMatrix::from_dense(&d);
        let sub = s.induced_submatrix(&[1, 3]).unwrap().to_dense();
        assert_eq!(sub, DenseMatrix::from_rows(&[[6.0, 8.0], [14.0, 16.0]]).unwrap());
        assert!(s.induced_submatrix(&[3, 1]).is_err());
    }

    fn arb_sparse(max: usize) -> impl Strategy<Value = DenseMatrix> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            proptest::collection::vec(
                prop_oneof![3 => Just(0.0), 1 => -10.0..10.0f64],
                r * c,
            )
            .prop_map(move |v| DenseMatrix::from_vec(r, c, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn densify_inverts_sparsify(d in arb_sparse(12)) {
            let s = SparseMatrix::from_dense(&d);
            prop_assert_eq!(s.to_dense(), d.clone());
            prop_assert_eq!(SparseMatrix::from_dense(&s.to_dense()), s);
        }

        #[test]
        fn spmm_matches_dense_oracle(s in arb_sparse(32), seed in 0u64..1000) {
            let cols = 1 + (seed % 5) as usize;
            let d = DenseMatrix::from_fn(s.cols(), cols, |i, j| ((i * 7 + j * 13 + seed as usize) % 11) as f64 - 5.0);
            let sp = SparseMatrix::from_dense(&s);
            let oracle = dense_matmul(&s, &d);
            prop_assert!(sp.spmm(&d).unwrap().max_abs_diff(&oracle) <= 1e-12);
            let dt = DenseMatrix::from_fn(s.rows(), cols, |i, j| ((i * 3 + j * 5 + seed as usize) % 7) as f64 - 3.0);
            let oracle_t = dense_matmul(&s.transpose(), &dt);
            prop_assert!(sp.spmm_transposed(&dt).unwrap().max_abs_diff(&oracle_t) <= 1e-12);
        }

        #[test]
        fn transpose_is_involution(d in arb_sparse(10)) {
            let s = SparseMatrix::from_dense(&d);
            prop_assert_eq!(s.transpose().to_dense(), d.transpose());
            prop_assert_eq!(s.transpose().transpose(), s);
        }
    }
}
