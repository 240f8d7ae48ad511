//! Small finite fields with fully tabulated arithmetic.
//!
//! Elements of `F_q`, `q = p^k <= 32`, are indices `0..q`. An element encodes
//! the polynomial `c_0 + c_1 x + ... + c_{k-1} x^{k-1}` over `F_p` as
//! `sum c_i p^i`, so `0` and `1` are the additive and multiplicative units for
//! every `q`. Prime-power fields reduce modulo the lexicographically first
//! monic irreducible of degree `k`, which fixes the tables across runs.

use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

pub const MAX_Q: u32 = 32;

/// Arithmetic tables for one `F_q`.
#[derive(Debug)]
pub struct Fq {
    q: u32,
    p: u32,
    k: u32,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
}

impl Fq {
    /// Build (or fetch the cached) field of order `q`.
    pub fn new(q: u32) -> Result<&'static Fq> {
        static CACHE: OnceLock<Mutex<Vec<&'static Fq>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let mut guard = cache.lock().unwrap();
        if let Some(f) = guard.iter().find(|f| f.q == q) {
            return Ok(f);
        }
        let built: &'static Fq = Box::leak(Box::new(Fq::build(q)?));
        guard.push(built);
        Ok(built)
    }

    fn build(q: u32) -> Result<Fq> {
        let (p, k) = factor_prime_power(q).ok_or(Error::UnsupportedField(q))?;
        if q > MAX_Q {
            return Err(Error::UnsupportedField(q));
        }
        let modulus = first_irreducible(p, k);
        let qe = q as usize;
        let mut add = vec![0u8; qe * qe];
        let mut mul = vec![0u8; qe * qe];
        for a in 0..q {
            for b in 0..q {
                add[(a * q + b) as usize] = poly_add(a, b, p) as u8;
                mul[(a * q + b) as usize] = poly_mul_mod(a, b, p, k, &modulus) as u8;
            }
        }
        let mut neg = vec![0u8; qe];
        let mut inv = vec![0u8; qe];
        for a in 0..q {
            neg[a as usize] = (0..q)
                .find(|&b| add[(a * q + b) as usize] == 0)
                .expect("additive inverse exists") as u8;
            if a != 0 {
                inv[a as usize] = (1..q)
                    .find(|&b| mul[(a * q + b) as usize] == 1)
                    .expect("multiplicative inverse exists") as u8;
            }
        }
        let f = Fq { q, p, k, add, mul, neg, inv };
        f.check_axioms();
        Ok(f)
    }

    /// Exhaustive field-axiom check over all triples; cheap for q <= 32.
    fn check_axioms(&self) {
        let q = self.q;
        for a in 0..q {
            assert_eq!(self.add(a, 0), a);
            assert_eq!(self.mul(a, 1), a);
            assert_eq!(self.add(a, self.neg(a)), 0);
            if a != 0 {
                assert_eq!(self.mul(a, self.inv(a)), 1);
            }
            for b in 0..q {
                assert_eq!(self.add(a, b), self.add(b, a));
                assert_eq!(self.mul(a, b), self.mul(b, a));
                for c in 0..q {
                    assert_eq!(self.add(self.add(a, b), c), self.add(a, self.add(b, c)));
                    assert_eq!(self.mul(self.mul(a, b), c), self.mul(a, self.mul(b, c)));
                    assert_eq!(
                        self.mul(a, self.add(b, c)),
                        self.add(self.mul(a, b), self.mul(a, c))
                    );
                }
            }
        }
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.k
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        self.add[(a * self.q + b) as usize] as u32
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.mul[(a * self.q + b) as usize] as u32
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        self.neg[a as usize] as u32
    }

    /// Multiplicative inverse; `a` must be nonzero.
    #[inline]
    pub fn inv(&self, a: u32) -> u32 {
        debug_assert!(a != 0);
        self.inv[a as usize] as u32
    }

    pub fn div(&self, a: u32, b: u32) -> u32 {
        self.mul(a, self.inv(b))
    }

    pub fn pow(&self, a: u32, e: u32) -> u32 {
        let mut acc = 1;
        for _ in 0..e {
            acc = self.mul(acc, a);
        }
        acc
    }

    /// Elements `c` with `c^n = 1`; these are the scalars that fix the
    /// determinant of an `n x n` scalar matrix at one.
    pub fn nth_roots_of_unity(&self, n: u32) -> Vec<u32> {
        (1..self.q).filter(|&c| self.pow(c, n) == 1).collect()
    }
}

pub fn factor_prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q % d == 0).unwrap();
    let mut rest = q;
    let mut k = 0;
    while rest % p == 0 {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p, k))
}

/// Digits of `a` base `p`, lowest first: the coefficients of the encoded
/// polynomial.
fn digits(mut a: u32, p: u32, k: u32) -> Vec<u32> {
    (0..k)
        .map(|_| {
            let d = a % p;
            a /= p;
            d
        })
        .collect()
}

fn poly_add(a: u32, b: u32, p: u32) -> u32 {
    let mut out = 0;
    let mut mult = 1;
    let (mut a, mut b) = (a, b);
    while a > 0 || b > 0 {
        out += ((a + b) % p) * mult;
        a /= p;
        b /= p;
        mult *= p;
    }
    out
}

/// Multiply the encoded polynomials and reduce by the monic `modulus`
/// (coefficients of degree 0..k; the leading coefficient 1 is implicit).
fn poly_mul_mod(a: u32, b: u32, p: u32, k: u32, modulus: &[u32]) -> u32 {
    let da = digits(a, p, k);
    let db = digits(b, p, k);
    let mut prod = vec![0u32; (2 * k) as usize];
    for (i, &ca) in da.iter().enumerate() {
        for (j, &cb) in db.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ca * cb) % p;
        }
    }
    for d in ((k as usize)..prod.len()).rev() {
        let c = prod[d];
        if c != 0 {
            prod[d] = 0;
            for (off, &m) in modulus.iter().enumerate() {
                let idx = d - k as usize + off;
                prod[idx] = (prod[idx] + c * (p - m % p)) % p;
            }
        }
    }
    prod[..k as usize]
        .iter()
        .rev()
        .fold(0, |acc, &c| acc * p + c)
}

/// Lexicographically first monic irreducible of degree `k` over `F_p`,
/// returned as its non-leading coefficients. Found by sieving out every
/// product of lower-degree monic polynomials.
fn first_irreducible(p: u32, k: u32) -> Vec<u32> {
    if k == 1 {
        return vec![0];
    }
    let count = p.pow(k) as usize;
    let mut reducible = vec![false; count];
    // Monic of degree d is encoded by its d non-leading coefficients.
    fn mul_monic(a: u32, da: u32, b: u32, db: u32, p: u32) -> u32 {
        let mut ca = digits(a, p, da);
        ca.push(1);
        let mut cb = digits(b, p, db);
        cb.push(1);
        let mut prod = vec![0u32; ca.len() + cb.len() - 1];
        for (i, &x) in ca.iter().enumerate() {
            for (j, &y) in cb.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % p;
            }
        }
        debug_assert_eq!(*prod.last().unwrap(), 1);
        prod[..prod.len() - 1].iter().rev().fold(0, |acc, &c| acc * p + c)
    }
    for d1 in 1..k {
        let d2 = k - d1;
        if d2 < d1 {
            break;
        }
        for a in 0..p.pow(d1) {
            for b in 0..p.pow(d2) {
                if d2 == d1 {
                    // Avoid marking from both orders; harmless but wasteful.
                    if b < a {
                        continue;
                    }
                    reducible[mul_monic(a, d1, b, d2, p) as usize] = true;
                } else if d2 > d1 {
                    // Remaining degree splits further; recurse implicitly by
                    // marking degree-d2 reducibles first is unnecessary since
                    // every reducible of degree k has a factor of degree <= k/2
                    // and the cofactor, reducible or not, is enumerated here.
                    reducible[mul_monic(a, d1, b, d2, p) as usize] = true;
                }
            }
        }
    }
    let code = (0..count as u32)
        .find(|&c| !reducible[c as usize])
        .expect("an irreducible of every degree exists");
    digits(code, p, k)
}
