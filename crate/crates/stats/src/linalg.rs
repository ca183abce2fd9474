use crate::StatsError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, StatsError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(StatsError::LengthMismatch(row.len(), cols));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Design matrix `[1, x_1, ..., x_k]` from predictor columns.
    pub fn with_intercept(columns: &[&[f64]]) -> Result<Self, StatsError> {
        let rows = columns.first().map_or(0, |c| c.len());
        let mut m = Matrix::zeros(rows, columns.len() + 1);
        for r in 0..rows {
            m[(r, 0)] = 1.0;
        }
        for (j, column) in columns.iter().enumerate() {
            if column.len() != rows {
                return Err(StatsError::LengthMismatch(column.len(), rows));
            }
            for (r, value) in column.iter().enumerate() {
                m[(r, j + 1)] = *value;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Householder QR of a tall matrix. Only `R` and `Qᵀy` are kept.
pub(crate) struct QrSolve {
    /// Upper-triangular `k × k` factor.
    pub r: Matrix,
    /// First `k` entries of `Qᵀy`.
    pub qty: Vec<f64>,
    /// Squared norm of the remaining `n - k` entries of `Qᵀy` (the RSS).
    pub residual_ss: f64,
}

pub(crate) fn householder_qr(x: &Matrix, y: &[f64]) -> Result<QrSolve, StatsError> {
    let (n, k) = (x.rows(), x.cols());
    let mut a = x.clone();
    let mut b = y.to_vec();
    let column_norms: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|i| x[(i, j)] * x[(i, j)]).sum::<f64>().sqrt())
        .collect();

    for j in 0..k {
        let norm = (j..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
        // A pivot that is tiny relative to its original column means the
        // column is (numerically) a combination of the earlier ones.
        if column_norms[j] == 0.0 || norm <= 1e-10 * column_norms[j] {
            return Err(StatsError::SingularDesign);
        }
        let alpha = if a[(j, j)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| a[(i, j)]).collect();
        v[0] -= alpha;
        let v_norm_sq: f64 = v.iter().map(|x| x * x).sum();
        if v_norm_sq == 0.0 {
            continue;
        }
        for c in j..k {
            let dot: f64 = v.iter().enumerate().map(|(o, vi)| vi * a[(j + o, c)]).sum();
            let scale = 2.0 * dot / v_norm_sq;
            for (o, vi) in v.iter().enumerate() {
                a[(j + o, c)] -= scale * vi;
            }
        }
        let dot: f64 = v.iter().enumerate().map(|(o, vi)| vi * b[j + o]).sum();
        let scale = 2.0 * dot / v_norm_sq;
        for (o, vi) in v.iter().enumerate() {
            b[j + o] -= scale * vi;
        }
    }

    let mut r = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            r[(i, j)] = a[(i, j)];
        }
    }
    Ok(QrSolve {
        r,
        qty: b[..k].to_vec(),
        residual_ss: b[k..].iter().map(|v| v * v).sum(),
    })
}

/// Solves `R x = b` for upper-triangular `R`.
pub(crate) fn back_substitute(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let k = r.cols();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let tail: f64 = ((i + 1)..k).map(|j| r[(i, j)] * x[j]).sum();
        x[i] = (b[i] - tail) / r[(i, i)];
    }
    x
}

/// Diagonal of `(RᵀR)⁻¹ = R⁻¹R⁻ᵀ`, i.e. the squared row norms of `R⁻¹`.
pub(crate) fn inverse_gram_diagonal(r: &Matrix) -> Vec<f64> {
    let k = r.cols();
    let mut inv = Matrix::zeros(k, k);
    for col in 0..k {
        let mut e = vec![0.0; k];
        e[col] = 1.0;
        let x = back_substitute(r, &e);
        for (row, value) in x.into_iter().enumerate() {
            inv[(row, col)] = value;
        }
    }
    (0..k).map(|i| inv.row(i).iter().map(|v| v * v).sum()).collect()
}
