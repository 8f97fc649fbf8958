use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Row-compressed sparse matrix. Constraint rows produced by the controller
/// have one or two nonzeros, so products and Gram matrices stay cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(ncols: usize) -> Self {
        CsrMatrix {
            nrows: 0,
            ncols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs. Panics on an
    /// out-of-range column.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        for &(j, v) in entries {
            assert!(j < self.ncols, "column {j} out of range {}", self.ncols);
            if v != 0.0 {
                self.indices.push(j);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        self.nrows += 1;
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut out = CsrMatrix::new(m.ncols());
        for i in 0..m.nrows() {
            let row: Vec<(usize, f64)> = (0..m.ncols()).map(|j| (j, m[(i, j)])).collect();
            out.push_row(&row);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.nrows,
            (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()),
        )
    }

    pub fn tr_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            let yi = y[i];
            if yi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += v * yi;
                }
            }
        }
        out
    }

    /// `m += scale · GᵀG`.
    pub fn add_gram_to(&self, m: &mut DMatrix<f64>, scale: f64) {
        for i in 0..self.nrows {
            let r = self.indptr[i]..self.indptr[i + 1];
            let idx = &self.indices[r.clone()];
            let val = &self.values[r];
            for (a, &ja) in idx.iter().enumerate() {
                for (b, &jb) in idx.iter().enumerate() {
                    m[(ja, jb)] += scale * val[a] * val[b];
                }
            }
        }
    }

    /// Dense `n × k` matrix whose columns are the selected rows.
    pub fn rows_transposed(&self, rows: &[usize]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.ncols, rows.len());
        for (c, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                m[(j, c)] += v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_and_products() {
        let d = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -2.0, 3.0, 0.0, 4.0]);
        let s = CsrMatrix::from_dense(&d);
        assert_eq!(s.nnz(), 4);
        assert_eq!(s.to_dense(), d);
        let x = DVector::from_vec(vec![0.5, -1.0]);
        assert_eq!(s.mul_vec(&x), &d * &x);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.tr_mul_vec(&y), d.transpose() * &y);
        let mut g = DMatrix::zeros(2, 2);
        s.add_gram_to(&mut g, 2.0);
        assert_eq!(g, 2.0 * d.transpose() * &d);
        assert_eq!(s.rows_transposed(&[2, 0]), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 4.0, 0.0]));
    }
}
