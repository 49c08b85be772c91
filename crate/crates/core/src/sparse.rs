//! Compressed-row sparse operators.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ImageBuffer};

/// Sparse matrix in compressed-row storage. Column indices are strictly
/// increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_starts: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_starts: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_starts: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds an operator from per-row `(column, value)` lists. Entries are
    /// sorted, duplicate columns summed and exact zeros dropped.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_starts = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_starts.push(0);
        let n_rows = rows.len();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if c >= cols {
                    return Err(Error::invalid(format!(
                        "column index {c} out of range for {cols} columns"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::invalid("sparse operator values must be finite"));
                }
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_starts.push(col_indices.len());
        }
        let mut op = Self {
            rows: n_rows,
            cols,
            row_starts,
            col_indices,
            values,
        };
        op.prune_zeros();
        Ok(op)
    }

    /// Builds an operator from a row-major dense matrix, keeping non-zeros.
    pub fn from_dense(rows: usize, cols: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "dense matrix",
                expected: rows * cols,
                got: dense.len(),
            });
        }
        let rows_vec = (0..rows)
            .map(|r| {
                (0..cols)
                    .filter_map(|c| {
                        let v = dense[r * cols + c];
                        (v != 0.0).then_some((c, v))
                    })
                    .collect()
            })
            .collect();
        Self::from_rows(cols, rows_vec)
    }

    fn prune_zeros(&mut self) {
        if !self.values.contains(&0.0) {
            return;
        }
        let mut starts = Vec::with_capacity(self.rows + 1);
        let mut cols = Vec::with_capacity(self.col_indices.len());
        let mut vals = Vec::with_capacity(self.values.len());
        starts.push(0);
        for r in 0..self.rows {
            for k in self.row_starts[r]..self.row_starts[r + 1] {
                if self.values[k] != 0.0 {
                    cols.push(self.col_indices[k]);
                    vals.push(self.values[k]);
                }
            }
            starts.push(cols.len());
        }
        self.row_starts = starts;
        self.col_indices = cols;
        self.values = vals;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values stored in row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_starts[r], self.row_starts[r + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).1.iter().sum()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.rows];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = op · x` without allocating.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len("operand", self.cols, x.len())?;
        check_len("output", self.rows, y.len())?;
        for (r, out) in y.iter_mut().enumerate() {
            let (c, v) = self.row(r);
            *out = c.iter().zip(v).map(|(&c, &v)| v * x[c]).sum();
        }
        Ok(())
    }

    pub fn apply_transpose(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cols];
        self.apply_transpose_add(r, &mut out)?;
        Ok(out)
    }

    /// `out += opᵀ · r`.
    pub fn apply_transpose_add(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("operand", self.rows, r.len())?;
        check_len("output", self.cols, out.len())?;
        for (row, &rv) in r.iter().enumerate() {
            if rv == 0.0 {
                continue;
            }
            let (c, v) = self.row(row);
            for (&c, &v) in c.iter().zip(v) {
                out[c] += v * rv;
            }
        }
        Ok(())
    }

    /// Sparse product `self · b`.
    pub fn compose(&self, b: &SparseOperator) -> Result<SparseOperator> {
        check_len("inner operator rows", self.cols, b.rows)?;
        let mut acc = vec![0.0; b.cols];
        let mut touched = vec![false; b.cols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut row_starts = Vec::with_capacity(self.rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_starts.push(0);
        for r in 0..self.rows {
            let (ac, av) = self.row(r);
            for (&k, &a) in ac.iter().zip(av) {
                let (bc, bv) = b.row(k);
                for (&c, &v) in bc.iter().zip(bv) {
                    if !touched[c] {
                        touched[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += a * v;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                if acc[c] != 0.0 {
                    col_indices.push(c);
                    values.push(acc[c]);
                }
                acc[c] = 0.0;
                touched[c] = false;
            }
            pattern.clear();
            row_starts.push(col_indices.len());
        }
        Ok(SparseOperator {
            rows: self.rows,
            cols: b.cols,
            row_starts,
            col_indices,
            values,
        })
    }

    /// Reshapes row `row` onto `grid`: pixel `i` holds `a[row, i]`.
    pub fn densify_row(&self, row: usize, grid: GridSpec) -> Result<ImageBuffer> {
        if row >= self.rows {
            return Err(Error::invalid(format!(
                "row {row} out of range for operator with {} rows",
                self.rows
            )));
        }
        check_len("grid size", self.cols, grid.len())?;
        let mut samples = vec![0.0; self.cols];
        let (c, v) = self.row(row);
        for (&c, &v) in c.iter().zip(v) {
            samples[c] = v;
        }
        ImageBuffer::new(grid, samples)
    }

    /// Row-major dense copy. Intended for small operators and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            let (c, v) = self.row(r);
            for (&c, &v) in c.iter().zip(v) {
                d[r * self.cols + c] = v;
            }
        }
        d
    }

    /// Largest absolute entrywise difference between two operators of the
    /// same shape, treating missing entries as zero.
    pub fn max_abs_diff(&self, other: &SparseOperator) -> Result<f64> {
        check_len("rows", self.rows, other.rows)?;
        check_len("cols", self.cols, other.cols)?;
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            let (ac, av) = self.row(r);
            let (bc, bv) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ac.len() || j < bc.len() {
                let d = match (ac.get(i), bc.get(j)) {
                    (Some(&ca), Some(&cb)) if ca == cb => {
                        i += 1;
                        j += 1;
                        av[i - 1] - bv[j - 1]
                    }
                    (Some(&ca), Some(&cb)) if ca < cb => {
                        i += 1;
                        av[i - 1]
                    }
                    (Some(_), None) => {
                        i += 1;
                        av[i - 1]
                    }
                    _ => {
                        j += 1;
                        bv[j - 1]
                    }
                };
                worst = worst.max(d.abs());
            }
        }
        Ok(worst)
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
