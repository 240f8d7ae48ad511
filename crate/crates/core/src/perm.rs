//! Permutations of `{0, .., n-1}` stored as image arrays.
//!
//! Products compose like functions: `(a * b)(x) = a(b(x))`, matching the
//! column-vector convention used for matrices. Cycle notation at the text
//! boundary is 1-based.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm {
    images: Vec<u8>,
}

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm { images: (0..n as u8).collect() }
    }

    /// Build from an images array; must be a bijection.
    pub fn from_images(images: Vec<u8>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &img in &images {
            if (img as usize) >= n || seen[img as usize] {
                return Err(Error::InvalidParameters(format!(
                    "not a permutation of 0..{}: {:?}",
                    n, images
                )));
            }
            seen[img as usize] = true;
        }
        Ok(Perm { images })
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.images[x] as usize
    }

    pub fn images(&self) -> &[u8] {
        &self.images
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.n(), other.n());
        Perm {
            images: other.images.iter().map(|&x| self.images[x as usize]).collect(),
        }
    }

    pub fn inverse(&self) -> Perm {
        let mut images = vec![0u8; self.n()];
        for (x, &img) in self.images.iter().enumerate() {
            images[img as usize] = x as u8;
        }
        Perm { images }
    }

    pub fn is_even(&self) -> bool {
        let mut seen = vec![false; self.n()];
        let mut transpositions = 0;
        for start in 0..self.n() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.apply(x);
                len += 1;
            }
            transpositions += len - 1;
        }
        transpositions % 2 == 0
    }

    /// Cycle lengths, longest first; includes fixed points as ones.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n()];
        let mut lens = Vec::new();
        for start in 0..self.n() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.apply(x);
                len += 1;
            }
            lens.push(len);
        }
        lens.sort_unstable_by(|a, b| b.cmp(a));
        lens
    }

    pub fn fixed_points(&self) -> Vec<usize> {
        (0..self.n()).filter(|&x| self.apply(x) == x).collect()
    }

    /// Pack into a `u64` key, one nibble per point; requires `n <= 16`.
    pub fn pack(&self) -> u64 {
        debug_assert!(self.n() <= 16);
        self.images.iter().fold(0u64, |acc, &x| (acc << 4) | x as u64)
    }

    /// Parse 1-based cycle notation such as `(1 2 3)(4 5)`; `()`, `e` and
    /// `id` denote the identity. Points may be separated by spaces or commas.
    pub fn parse_cycles(s: &str, n: usize) -> Result<Perm> {
        let s = s.trim();
        if s == "e" || s == "id" || s == "()" {
            return Ok(Perm::identity(n));
        }
        let mut images: Vec<u8> = (0..n as u8).collect();
        let mut used = vec![false; n];
        let bad = |msg: String| Error::SubsetMalformed(msg);
        if !s.starts_with('(') || !s.ends_with(')') {
            return Err(bad(format!("cycle notation must be parenthesized: {:?}", s)));
        }
        for cyc in s[1..s.len() - 1].split(")(") {
            let points: Vec<usize> = cyc
                .split(|c: char| c == ' ' || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| bad(format!("bad point {:?} in {:?}", t, s)))
                })
                .collect::<Result<_>>()?;
            if points.is_empty() {
                continue;
            }
            for &p in &points {
                if p == 0 || p > n {
                    return Err(bad(format!("point {} out of range 1..={}", p, n)));
                }
                if used[p - 1] {
                    return Err(bad(format!("point {} repeated in {:?}", p, s)));
                }
                used[p - 1] = true;
            }
            for (i, &p) in points.iter().enumerate() {
                let next = points[(i + 1) % points.len()];
                images[p - 1] = (next - 1) as u8;
            }
        }
        Perm::from_images(images)
    }

    /// Format as 1-based cycle notation, fixed points omitted; identity is `()`.
    pub fn format_cycles(&self) -> String {
        let mut seen = vec![false; self.n()];
        let mut out = String::new();
        for start in 0..self.n() {
            if seen[start] || self.apply(start) == start {
                seen[start] = true;
                continue;
            }
            out.push('(');
            let mut x = start;
            let mut first = true;
            while !seen[x] {
                seen[x] = true;
                if !first {
                    out.push(' ');
                }
                out.push_str(&(x + 1).to_string());
                first = false;
                x = self.apply(x);
            }
            out.push(')');
        }
        if out.is_empty() {
            out.push_str("()");
        }
        out
    }
}

/// Uniformly random permutation of `{0..n}`.
pub fn random_perm(n: usize, rng: &mut impl Rng) -> Perm {
    let mut images: Vec<u8> = (0..n as u8).collect();
    for i in (1..n).rev() {
        images.swap(i, rng.gen_range(0..=i));
    }
    Perm { images }
}

/// Uniformly random even permutation: shuffle, then swap two images if odd.
pub fn random_even_perm(n: usize, rng: &mut impl Rng) -> Perm {
    assert!(n >= 2, "no even permutation correction below n = 2");
    let mut p = random_perm(n, rng);
    if !p.is_even() {
        p.images.swap(0, 1);
    }
    p
}
