//! Dense matrices over 𝔽₂.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense `rows × cols` matrix over 𝔽₂, serialized as a list of 0/1 rows.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct F2Matrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl F2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        F2Matrix {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows of 0/1 entries; any odd entry counts as 1.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Precondition("ragged F2 matrix rows".into()));
        }
        let bits = rows.iter().flat_map(|r| r.iter().map(|&b| b % 2 == 1)).collect();
        Ok(F2Matrix {
            rows: rows.len(),
            cols,
            bits,
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| u8::from(self.get(i, j))).collect())
            .collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits[i * self.cols + j] = value;
    }

    pub fn flip(&mut self, i: usize, j: usize) {
        let k = i * self.cols + j;
        self.bits[k] = !self.bits[k];
    }

    pub fn is_zero(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Positions of the nonzero entries in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| (k / self.cols, k % self.cols))
    }

    pub fn mul(&self, other: &F2Matrix) -> Result<F2Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                expected: (self.cols, other.cols),
                got: (other.rows, other.cols),
            });
        }
        let mut out = F2Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self.get(i, k) {
                    for j in 0..other.cols {
                        if other.get(k, j) {
                            out.flip(i, j);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &F2Matrix) -> Result<F2Matrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::ShapeMismatch {
                expected: (self.rows, self.cols),
                got: (other.rows, other.cols),
            });
        }
        Ok(F2Matrix {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect(),
        })
    }

    pub fn transpose(&self) -> F2Matrix {
        let mut out = F2Matrix::zeros(self.cols, self.rows);
        for (i, j) in self.nonzeros() {
            out.set(j, i, true);
        }
        out
    }

    /// `M·v` for a 0/1 column vector.
    pub fn apply(&self, v: &[bool]) -> Vec<bool> {
        (0..self.rows)
            .map(|i| (0..self.cols).fold(false, |acc, j| acc ^ (self.get(i, j) && v[j])))
            .collect()
    }
}

impl TryFrom<Vec<Vec<u8>>> for F2Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self> {
        F2Matrix::from_rows(&rows)
    }
}

impl From<F2Matrix> for Vec<Vec<u8>> {
    fn from(m: F2Matrix) -> Self {
        m.to_rows()
    }
}

impl fmt::Debug for F2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F2Matrix{:?}", self.to_rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_reduce_mod_two() {
        let a = F2Matrix::from_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
        let sq = a.mul(&a).unwrap();
        assert_eq!(sq, F2Matrix::identity(2));
        assert!(a.add(&a).unwrap().is_zero());
    }

    #[test]
    fn shapes_are_checked() {
        let a = F2Matrix::zeros(2, 3);
        assert!(a.mul(&a).is_err());
        assert!(F2Matrix::from_rows(&[vec![1], vec![0, 1]]).is_err());
        assert_eq!(a.transpose().rows(), 3);
    }

    #[test]
    fn serializes_as_rows() {
        let a = F2Matrix::from_rows(&[vec![0, 0], vec![1, 0]]).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "[[0,0],[1,0]]");
        let back: F2Matrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert_eq!(a.apply(&[true, false]), vec![false, true]);
    }
}
