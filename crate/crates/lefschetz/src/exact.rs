//! Exact dense linear algebra for small integer and rational matrices.
//!
//! Everything here is heap-backed arbitrary precision: Hurwitz conjugations
//! multiply transvection matrices together, so entries grow multiplicatively
//! and fixed-width integers would overflow, and signature computation must be
//! exact to be trusted. Matrices stay small (at most `4g x 4g` for genus
//! `g <= 3` in practice), so dense row operations are plenty fast.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Dense row-major integer matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMat {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: &[&[i64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = IntMat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = BigInt::from(v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_identity(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = &self[(i, j)];
                let ok = if i == j { v.is_one() } else { v.is_zero() };
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    pub fn transpose(&self) -> IntMat {
        let mut out = IntMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn mul(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = IntMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a * &other[(k, j)];
                    out[(i, j)] += prod;
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &IntMat) -> IntMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn neg(&self) -> IntMat {
        let mut out = self.clone();
        for a in &mut out.data {
            *a = -a.clone();
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| &self[(i, j)] * &v[j]).sum())
            .collect()
    }

    pub fn to_rational(&self) -> RatMat {
        RatMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|v| BigRational::from_integer(v.clone()))
                .collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntMat {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for IntMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", self[(i, j)])?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Dense row-major rational matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatMat {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl RatMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMat {
            rows,
            cols,
            data: vec![BigRational::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self[(i, j)] != self[(j, i)] {
                    return false;
                }
            }
        }
        true
    }

    /// Basis of the right kernel `{ v : M v = 0 }` via reduced row echelon
    /// form with exact rational pivots.
    pub fn kernel_basis(&self) -> Vec<Vec<BigRational>> {
        let mut m = self.clone();
        let (rows, cols) = (m.rows, m.cols);
        let mut pivot_cols: Vec<usize> = Vec::new();
        let mut row = 0usize;
        for col in 0..cols {
            // Partial pivoting by first nonzero entry; exact arithmetic needs
            // no magnitude-based choice.
            let pivot_row = (row..rows).find(|&r| !m[(r, col)].is_zero());
            let Some(pr) = pivot_row else { continue };
            if pr != row {
                for c in 0..cols {
                    let tmp = m[(pr, c)].clone();
                    m[(pr, c)] = m[(row, c)].clone();
                    m[(row, c)] = tmp;
                }
            }
            let inv = m[(row, col)].clone();
            for c in 0..cols {
                let v = m[(row, c)].clone() / inv.clone();
                m[(row, c)] = v;
            }
            for r in 0..rows {
                if r != row && !m[(r, col)].is_zero() {
                    let f = m[(r, col)].clone();
                    for c in 0..cols {
                        let v = m[(r, c)].clone() - f.clone() * m[(row, c)].clone();
                        m[(r, c)] = v;
                    }
                }
            }
            pivot_cols.push(col);
            row += 1;
            if row == rows {
                break;
            }
        }

        let pivot_set: std::collections::BTreeSet<usize> = pivot_cols.iter().copied().collect();
        let mut basis = Vec::new();
        for free in 0..cols {
            if pivot_set.contains(&free) {
                continue;
            }
            let mut v = vec![BigRational::zero(); cols];
            v[free] = BigRational::one();
            for (r, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -m[(r, free)].clone();
            }
            basis.push(v);
        }
        basis
    }

    /// Inertia `(n_plus, n_minus, n_zero)` of a symmetric matrix by exact
    /// congruence diagonalization. Diagonal pivots are preferred; when the
    /// remaining diagonal is all zero but an off-diagonal entry survives, a
    /// symmetric row/column addition manufactures a nonzero pivot.
    pub fn symmetric_signature(&self) -> (usize, usize, usize) {
        assert!(self.is_symmetric(), "signature needs a symmetric matrix");
        let mut g = self.clone();
        let n = g.rows;
        let (mut pos, mut neg, mut zero) = (0usize, 0usize, 0usize);

        for k in 0..n {
            if g[(k, k)].is_zero() {
                if let Some(i) = ((k + 1)..n).find(|&i| !g[(i, i)].is_zero()) {
                    g.swap_sym(k, i);
                } else {
                    // All remaining diagonal entries are zero.
                    let mut found = None;
                    'scan: for i in k..n {
                        for j in (i + 1)..n {
                            if !g[(i, j)].is_zero() {
                                found = Some((i, j));
                                break 'scan;
                            }
                        }
                    }
                    let Some((i, j)) = found else {
                        zero += n - k;
                        break;
                    };
                    // row_i += row_j and col_i += col_j: the new (i, i) entry
                    // equals 2 g_ij != 0.
                    g.add_sym(i, j);
                    if i != k {
                        g.swap_sym(k, i);
                    }
                }
            }

            let pivot = g[(k, k)].clone();
            if pivot.is_positive() {
                pos += 1;
            } else {
                neg += 1;
            }
            for i in (k + 1)..n {
                if g[(i, k)].is_zero() {
                    continue;
                }
                let f = g[(i, k)].clone() / pivot.clone();
                for c in 0..n {
                    let v = g[(i, c)].clone() - f.clone() * g[(k, c)].clone();
                    g[(i, c)] = v;
                }
                for r in 0..n {
                    let v = g[(r, i)].clone() - f.clone() * g[(r, k)].clone();
                    g[(r, i)] = v;
                }
            }
        }
        (pos, neg, zero)
    }

    fn swap_sym(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            let tmp = self[(a, c)].clone();
            self[(a, c)] = self[(b, c)].clone();
            self[(b, c)] = tmp;
        }
        for r in 0..self.rows {
            let tmp = self[(r, a)].clone();
            self[(r, a)] = self[(r, b)].clone();
            self[(r, b)] = tmp;
        }
    }

    fn add_sym(&mut self, into: usize, from: usize) {
        for c in 0..self.cols {
            let v = self[(into, c)].clone() + self[(from, c)].clone();
            self[(into, c)] = v;
        }
        for r in 0..self.rows {
            let v = self[(r, into)].clone() + self[(r, from)].clone();
            self[(r, into)] = v;
        }
    }
}

impl std::ops::Index<(usize, usize)> for RatMat {
    type Output = BigRational;
    fn index(&self, (i, j): (usize, usize)) -> &BigRational {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigRational {
        &mut self.data[i * self.cols + j]
    }
}
