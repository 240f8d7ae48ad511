//! Dense square matrices over a small finite field.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fq::Fq;

/// Row-major `dim x dim` matrix with entries in `0..q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FqMat {
    dim: usize,
    entries: Vec<u8>,
}

impl FqMat {
    pub fn zero(dim: usize) -> Self {
        FqMat { dim, entries: vec![0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = FqMat::zero(dim);
        for i in 0..dim {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let dim = rows.len();
        let mut m = FqMat::zero(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix rows must be square");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.dim + j] as u32
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.entries[i * self.dim + j] = v as u8;
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn mul(&self, other: &FqMat, f: &Fq) -> FqMat {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = FqMat::zero(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0;
                for l in 0..n {
                    acc = f.add(acc, f.mul(self.get(i, l), other.get(l, j)));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn add(&self, other: &FqMat, f: &Fq) -> FqMat {
        assert_eq!(self.dim, other.dim);
        let mut out = FqMat::zero(self.dim);
        for (o, (a, b)) in out.entries.iter_mut().zip(self.entries.iter().zip(&other.entries)) {
            *o = f.add(*a as u32, *b as u32) as u8;
        }
        out
    }

    pub fn sub(&self, other: &FqMat, f: &Fq) -> FqMat {
        assert_eq!(self.dim, other.dim);
        let mut out = FqMat::zero(self.dim);
        for (o, (a, b)) in out.entries.iter_mut().zip(self.entries.iter().zip(&other.entries)) {
            *o = f.sub(*a as u32, *b as u32) as u8;
        }
        out
    }

    pub fn scale(&self, c: u32, f: &Fq) -> FqMat {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e = f.mul(*e as u32, c) as u8;
        }
        out
    }

    pub fn det(&self, f: &Fq) -> u32 {
        let n = self.dim;
        let mut m = self.clone();
        let mut det = 1u32;
        for col in 0..n {
            let Some(pivot) = (col..n).find(|&r| m.get(r, col) != 0) else {
                return 0;
            };
            if pivot != col {
                for j in 0..n {
                    let (a, b) = (m.get(col, j), m.get(pivot, j));
                    m.set(col, j, b);
                    m.set(pivot, j, a);
                }
                det = f.mul(det, f.neg(1));
            }
            let p = m.get(col, col);
            det = f.mul(det, p);
            let pinv = f.inv(p);
            for r in col + 1..n {
                let factor = f.mul(m.get(r, col), pinv);
                if factor != 0 {
                    for j in col..n {
                        let v = f.sub(m.get(r, j), f.mul(factor, m.get(col, j)));
                        m.set(r, j, v);
                    }
                }
            }
        }
        det
    }

    pub fn rank(&self, f: &Fq) -> usize {
        let n = self.dim;
        let mut m = self.clone();
        let mut rank = 0;
        for col in 0..n {
            let Some(pivot) = (rank..n).find(|&r| m.get(r, col) != 0) else {
                continue;
            };
            if pivot != rank {
                for j in 0..n {
                    let (a, b) = (m.get(rank, j), m.get(pivot, j));
                    m.set(rank, j, b);
                    m.set(pivot, j, a);
                }
            }
            let pinv = f.inv(m.get(rank, col));
            for r in 0..n {
                if r != rank && m.get(r, col) != 0 {
                    let factor = f.mul(m.get(r, col), pinv);
                    for j in col..n {
                        let v = f.sub(m.get(r, j), f.mul(factor, m.get(rank, j)));
                        m.set(r, j, v);
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn inverse(&self, f: &Fq) -> Option<FqMat> {
        let n = self.dim;
        let mut m = self.clone();
        let mut inv = FqMat::identity(n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| m.get(r, col) != 0)?;
            if pivot != col {
                for j in 0..n {
                    let (a, b) = (m.get(col, j), m.get(pivot, j));
                    m.set(col, j, b);
                    m.set(pivot, j, a);
                    let (a, b) = (inv.get(col, j), inv.get(pivot, j));
                    inv.set(col, j, b);
                    inv.set(pivot, j, a);
                }
            }
            let pinv = f.inv(m.get(col, col));
            for j in 0..n {
                m.set(col, j, f.mul(m.get(col, j), pinv));
                inv.set(col, j, f.mul(inv.get(col, j), pinv));
            }
            for r in 0..n {
                if r != col && m.get(r, col) != 0 {
                    let factor = m.get(r, col);
                    for j in 0..n {
                        m.set(r, j, f.sub(m.get(r, j), f.mul(factor, m.get(col, j))));
                        inv.set(r, j, f.sub(inv.get(r, j), f.mul(factor, inv.get(col, j))));
                    }
                }
            }
        }
        Some(inv)
    }

    pub fn is_upper_unitriangular(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| {
            self.get(i, i) == 1 && (0..i).all(|j| self.get(i, j) == 0)
        })
    }

    /// Pack into a `u64` key; requires `dim^2 * ceil(log2 q) <= 64`.
    pub fn pack(&self, q: u32) -> u64 {
        let bits = 32 - (q - 1).leading_zeros();
        debug_assert!(self.dim * self.dim * bits as usize <= 64);
        self.entries
            .iter()
            .fold(0u64, |acc, &e| (acc << bits) | e as u64)
    }

    /// Decode the matrix with the given linear index when entries are read as
    /// base-q digits, row-major, most significant first.
    pub fn from_index(dim: usize, q: u32, mut idx: u64) -> FqMat {
        let mut entries = vec![0u8; dim * dim];
        for e in entries.iter_mut().rev() {
            *e = (idx % q as u64) as u8;
            idx /= q as u64;
        }
        FqMat { dim, entries }
    }

    pub fn to_index(&self, q: u32) -> u64 {
        self.entries
            .iter()
            .fold(0u64, |acc, &e| acc * q as u64 + e as u64)
    }

    /// Parse `"a,b;c,d"` with entries as field-element indices.
    pub fn parse(s: &str, q: u32) -> Result<FqMat> {
        let rows: Vec<Vec<u32>> = s
            .trim()
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|e| {
                        e.trim()
                            .parse::<u32>()
                            .map_err(|_| Error::SubsetMalformed(format!("bad matrix entry {:?}", e)))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let dim = rows.len();
        for row in &rows {
            if row.len() != dim {
                return Err(Error::SubsetMalformed(format!(
                    "matrix must be square, got row of {} in {} rows",
                    row.len(),
                    dim
                )));
            }
            for &e in row {
                if e >= q {
                    return Err(Error::SubsetMalformed(format!(
                        "entry {} out of range for F_{}",
                        e, q
                    )));
                }
            }
        }
        Ok(FqMat::from_rows(&rows))
    }

    pub fn format(&self) -> String {
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.get(i, j).to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Uniformly random matrix.
pub fn random_mat(dim: usize, q: u32, rng: &mut impl Rng) -> FqMat {
    let mut m = FqMat::zero(dim);
    for i in 0..dim {
        for j in 0..dim {
            m.set(i, j, rng.gen_range(0..q));
        }
    }
    m
}

/// Rejection-sample an invertible matrix.
pub fn random_invertible(dim: usize, q: u32, f: &Fq, rng: &mut impl Rng) -> FqMat {
    loop {
        let m = random_mat(dim, q, rng);
        if m.det(f) != 0 {
            return m;
        }
    }
}

/// Uniformly random upper unitriangular matrix.
pub fn random_unipotent(dim: usize, q: u32, rng: &mut impl Rng) -> FqMat {
    let mut m = FqMat::identity(dim);
    for i in 0..dim {
        for j in i + 1..dim {
            m.set(i, j, rng.gen_range(0..q));
        }
    }
    m
}

/// All `q^(dim^2)` matrices in index order. Caller is responsible for keeping
/// `dim` and `q` small enough for the full scan.
pub fn enumerate_all(dim: usize, q: u32) -> impl Iterator<Item = FqMat> {
    let total = (q as u64).pow((dim * dim) as u32);
    (0..total).map(move |idx| FqMat::from_index(dim, q, idx))
}
