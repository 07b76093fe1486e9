//! Sparse symmetric LDLᵀ factorization without pivoting.
//!
//! The elimination tree and column counts are computed once per sparsity
//! pattern; numeric refactorizations reuse them. Without pivoting a
//! factorization exists for every symmetric quasidefinite matrix, and by
//! Sylvester's law the signs of `D` give the inertia.

const NONE: usize = usize::MAX;

/// Upper-triangular compressed-column pattern of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct CscPattern {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl CscPattern {
    /// Builds the upper-triangular pattern from `(row, col)` pairs (either
    /// triangle). The diagonal is always included. Returns the pattern and,
    /// for each input pair, its position in the value array.
    pub fn from_entries(n: usize, entries: &[(usize, usize)]) -> (Self, Vec<usize>) {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(j);
        }
        for &(r, c) in entries {
            let (i, j) = if r <= c { (r, c) } else { (c, r) };
            cols[j].push(i);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let pattern = Self { n, col_ptr, row_idx };
        let map = entries
            .iter()
            .map(|&(r, c)| {
                let (i, j) = if r <= c { (r, c) } else { (c, r) };
                pattern.position(i, j).expect("entry in pattern")
            })
            .collect();
        (pattern, map)
    }

    /// Position of the upper entry `(i, j)` with `i ≤ j`.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let rows = &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]];
        rows.binary_search(&i).ok().map(|k| self.col_ptr[j] + k)
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn diagonal_positions(&self) -> Vec<usize> {
        (0..self.n)
            .map(|j| self.position(j, j).expect("diagonal present"))
            .collect()
    }
}

/// Reusable symbolic analysis plus the latest numeric factor.
#[derive(Clone, Debug)]
pub struct Ldl {
    n: usize,
    etree: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    d: Vec<f64>,
    d_inv: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Ldl {
    pub fn analyze(p: &CscPattern) -> Self {
        let n = p.n;
        let mut work = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut etree = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &i0 in &p.row_idx[p.col_ptr[j]..p.col_ptr[j + 1]] {
                let mut i = i0;
                if i >= j {
                    continue;
                }
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut l_ptr = vec![0usize; n + 1];
        for i in 0..n {
            l_ptr[i + 1] = l_ptr[i] + lnz[i];
        }
        let nnz = l_ptr[n];
        Self {
            n,
            etree,
            l_ptr,
            l_idx: vec![0; nnz],
            l_val: vec![0.0; nnz],
            d: vec![0.0; n],
            d_inv: vec![0.0; n],
        }
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_ptr[self.n]
    }

    /// Numeric factorization of the matrix with pattern `p` and values `ax`.
    /// Pivots with `|d| ≤ pivot_tol` count as zero and abort the
    /// factorization; the returned inertia then has `zero > 0`.
    pub fn factor(&mut self, p: &CscPattern, ax: &[f64], pivot_tol: f64) -> Inertia {
        let n = self.n;
        let mut y_mark = vec![false; n];
        let mut y_vals = vec![0.0; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.l_ptr[..n].to_vec();
        let mut inertia = Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };
        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for q in p.col_ptr[k]..p.col_ptr[k + 1] {
                let b = p.row_idx[q];
                if b == k {
                    self.d[k] = ax[q];
                    continue;
                }
                y_vals[b] = ax[q];
                if !y_mark[b] {
                    y_mark[b] = true;
                    elim[0] = b;
                    let mut ne = 1;
                    let mut nx = self.etree[b];
                    while nx != NONE && nx < k {
                        if y_mark[nx] {
                            break;
                        }
                        y_mark[nx] = true;
                        elim[ne] = nx;
                        ne += 1;
                        nx = self.etree[nx];
                    }
                    while ne > 0 {
                        ne -= 1;
                        y_idx[nnz_y] = elim[ne];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_space[c];
                let yc = y_vals[c];
                for j in self.l_ptr[c]..tmp {
                    y_vals[self.l_idx[j]] -= self.l_val[j] * yc;
                }
                self.l_idx[tmp] = k;
                self.l_val[tmp] = yc * self.d_inv[c];
                self.d[k] -= yc * self.l_val[tmp];
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_mark[c] = false;
            }
            let dk = self.d[k];
            if !dk.is_finite() || dk.abs() <= pivot_tol {
                inertia.zero += 1;
                return inertia;
            }
            if dk > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            self.d_inv[k] = 1.0 / dk;
        }
        inertia
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let xi = x[i];
            for j in self.l_ptr[i]..self.l_ptr[i + 1] {
                x[self.l_idx[j]] -= self.l_val[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.d_inv[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in self.l_ptr[i]..self.l_ptr[i + 1] {
                s -= self.l_val[j] * x[self.l_idx[j]];
            }
            x[i] = s;
        }
    }
}

/// `y = A x` for a symmetric matrix stored as its upper triangle.
pub fn sym_matvec(p: &CscPattern, ax: &[f64], x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..p.n {
        for q in p.col_ptr[j]..p.col_ptr[j + 1] {
            let i = p.row_idx[q];
            y[i] += ax[q] * x[j];
            if i != j {
                y[j] += ax[q] * x[i];
            }
        }
    }
}
