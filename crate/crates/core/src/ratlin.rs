//! Exact rational linear algebra for the combinatorics layer.
//!
//! Everything is `BigRational`: Gram matrices, affine kernels and the
//! polystability inverse are computed without floating point, so the
//! "holds exactly" invariants really are exact.

use num::rational::BigRational;
use num::traits::{One, Signed, Zero};
use num::BigInt;

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Dense rational matrix, row major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Rat>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Rat) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_i64(rows: &[Vec<i64>]) -> Self {
        Self::from_fn(rows.len(), rows[0].len(), |i, j| rat(rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { Rat::one() } else { Rat::zero() })
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn mul_vec(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| &self[(i, j)] * &v[j])
                    .fold(Rat::zero(), |a, b| a + b)
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| rat_to_f64(&self[(i, j)])).collect())
            .collect()
    }

    /// Basis of the right null space, by Gauss-Jordan elimination.
    pub fn nullspace(&self) -> Vec<Vec<Rat>> {
        let mut m = self.clone();
        let (rows, cols) = (m.rows, m.cols);
        let mut pivot_col_of_row = Vec::new();
        let mut row = 0usize;
        for col in 0..cols {
            let Some(p) = (row..rows).find(|&r| !m[(r, col)].is_zero()) else {
                continue;
            };
            for j in 0..cols {
                let tmp = m[(p, j)].clone();
                m[(p, j)] = m[(row, j)].clone();
                m[(row, j)] = tmp;
            }
            let inv = m[(row, col)].clone();
            for j in 0..cols {
                m[(row, j)] = &m[(row, j)] / &inv;
            }
            for r in 0..rows {
                if r != row && !m[(r, col)].is_zero() {
                    let factor = m[(r, col)].clone();
                    for j in 0..cols {
                        let sub = &factor * &m[(row, j)];
                        m[(r, j)] = &m[(r, j)] - &sub;
                    }
                }
            }
            pivot_col_of_row.push(col);
            row += 1;
            if row == rows {
                break;
            }
        }
        let pivot_cols: Vec<usize> = pivot_col_of_row.clone();
        let free_cols: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
        free_cols
            .iter()
            .map(|&fc| {
                let mut v = vec![Rat::zero(); cols];
                v[fc] = Rat::one();
                for (r, &pc) in pivot_col_of_row.iter().enumerate() {
                    v[pc] = -m[(r, fc)].clone();
                }
                v
            })
            .collect()
    }

    /// Exact inverse; `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let p = (col..n).find(|&r| !m[(r, col)].is_zero())?;
            for j in 0..n {
                m.data.swap(p * n + j, col * n + j);
                inv.data.swap(p * n + j, col * n + j);
            }
            let d = m[(col, col)].clone();
            for j in 0..n {
                m[(col, j)] = &m[(col, j)] / &d;
                inv[(col, j)] = &inv[(col, j)] / &d;
            }
            for r in 0..n {
                if r != col && !m[(r, col)].is_zero() {
                    let factor = m[(r, col)].clone();
                    for j in 0..n {
                        let a = &factor * &m[(col, j)];
                        m[(r, j)] = &m[(r, j)] - &a;
                        let b = &factor * &inv[(col, j)];
                        inv[(r, j)] = &inv[(r, j)] - &b;
                    }
                }
            }
        }
        Some(inv)
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        &mut self.data[i * self.cols + j]
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    let numer = r.numer();
    let denom = r.denom();
    // Values in this crate are tiny; go through i128 when possible.
    if let (Some(n), Some(d)) = (to_i128(numer), to_i128(denom)) {
        n as f64 / d as f64
    } else {
        let digits = 30usize;
        let scale = BigInt::from(10u64).pow(digits as u32);
        let scaled = (numer * &scale) / denom;
        let s = scaled.to_string();
        s.parse::<f64>().unwrap_or(f64::NAN) / 10f64.powi(digits as i32)
    }
}

fn to_i128(b: &BigInt) -> Option<i128> {
    use num::ToPrimitive;
    b.to_i128()
}

/// Formats a rational as the exact fraction string `p/q` (or `p` when q=1).
pub fn rat_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else if r.denom().is_negative() {
        format!("{}/{}", -r.numer(), -r.denom())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
