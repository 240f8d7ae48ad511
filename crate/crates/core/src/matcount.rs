//! Exact counting and additive-combinatorics experiments for `n x n` matrices
//! over small finite fields: closed-form rank censuses checked against brute
//! force, rank-sum distributions and their envelope ratios, additive energy,
//! sumset growth under the two-sided invertible action, the block embedding
//! that realises conjugation as `a -> g^-1 a h`, and a constructive six-factor
//! solver for unipotent upper-triangular matrices.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::bitset::BitSet;
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::fq::{factor_prime_power, Fq};
use crate::fqmat::{enumerate_all, random_invertible, FqMat};

/// Largest matrix side for the brute-force rank-sum census at q = 2.
const NSUM_MAX_DIM_Q2: usize = 4;
/// Largest matrix side for the brute-force rank-sum census at q >= 3.
const NSUM_MAX_DIM: usize = 3;
/// Largest field size for the table-driven operations in this module.
const MAX_COUNT_Q: u32 = 9;
/// Cell cap for dense ambient work; keeps index arithmetic and histograms in RAM.
const AMBIENT_MAX_CELLS: u64 = 1 << 22;
/// Candidate transporter pairs examined per greedy covering round.
const COVER_POOL: usize = 256;
/// Longest summation range accepted by the geometric-series check.
const SERIES_MAX_TERMS: i64 = 1_000_000;

fn check_prime_power(q: u32) -> Result<()> {
    if factor_prime_power(q).is_none() {
        return Err(Error::UnsupportedField(q));
    }
    Ok(())
}

fn check_table_field(q: u32) -> Result<()> {
    check_prime_power(q)?;
    if q > MAX_COUNT_Q {
        return Err(Error::UnsupportedField(q));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Closed-form counts.

/// Number of injective linear maps from a `d`-dimensional space into a
/// `D`-dimensional space over `F_q`: `(q^D - 1)(q^D - q) ... (q^D - q^(d-1))`.
pub fn count_injections(d: usize, big_d: usize, q: u32) -> Result<BigUint> {
    check_prime_power(q)?;
    if d > big_d {
        return Err(Error::InvalidParameters(format!(
            "need 0 <= d <= D, got d = {d}, D = {big_d}"
        )));
    }
    let qb = BigUint::from(q);
    let q_big_d = qb.pow(big_d as u32);
    let mut acc = BigUint::one();
    for i in 0..d {
        acc *= &q_big_d - qb.pow(i as u32);
    }
    Ok(acc)
}

/// Number of `d`-dimensional subspaces of `F_q^D` (Gaussian binomial).
pub fn count_subspaces(d: usize, big_d: usize, q: u32) -> Result<BigUint> {
    let num = count_injections(d, big_d, q)?;
    let den = count_injections(d, d, q)?;
    debug_assert!((&num % &den).is_zero());
    Ok(num / den)
}

/// Number of `n x n` matrices over `F_q` of rank exactly `r`: choose the
/// kernel, then an injection on a complement.
pub fn count_rank(r: usize, n: usize, q: u32) -> Result<BigUint> {
    if r > n {
        return Err(Error::InvalidParameters(format!(
            "need 0 <= r <= n, got r = {r}, n = {n}"
        )));
    }
    Ok(count_subspaces(n - r, n, q)? * count_injections(r, n, q)?)
}

/// Canonical rank-`t` matrix: identity block in the top-left corner.
pub fn rank_representative(t: usize, n: usize, q: u32) -> Result<FqMat> {
    check_prime_power(q)?;
    if t > n {
        return Err(Error::InvalidParameters(format!(
            "need 0 <= t <= n, got t = {t}, n = {n}"
        )));
    }
    let mut m = FqMat::zero(n);
    for i in 0..t {
        m.set(i, i, 1);
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Brute-force rank-sum distributions.

fn check_census_domain(n: usize, q: u32) -> Result<()> {
    check_table_field(q)?;
    let max_dim = if q == 2 { NSUM_MAX_DIM_Q2 } else { NSUM_MAX_DIM };
    if n == 0 {
        return Err(Error::InvalidParameters("matrix side must be positive".into()));
    }
    if n > max_dim {
        let pow = |side: usize| (q as u64).checked_pow((side * side) as u32).unwrap_or(u64::MAX);
        return Err(Error::BudgetExceeded { needed: pow(n), used: 0, cap: pow(max_dim) });
    }
    Ok(())
}

/// All matrices of each rank, indexed by rank. Costs `q^(n^2)` enumeration.
fn rank_classes(n: usize, q: u32, f: &Fq, budget: &Budget) -> Result<Vec<Vec<FqMat>>> {
    let cells = (q as u64).pow((n * n) as u32);
    budget.charge(cells.saturating_mul(n as u64))?;
    let mut classes = vec![Vec::new(); n + 1];
    for m in enumerate_all(n, q) {
        let r = m.rank(f);
        classes[r].push(m);
    }
    Ok(classes)
}

fn nsum_rec(
    ranks: &[usize],
    target: &FqMat,
    classes: &[Vec<FqMat>],
    n: usize,
    q: u32,
    f: &Fq,
    budget: &Budget,
) -> Result<BigUint> {
    match ranks.len() {
        0 => unreachable!("rank list checked nonempty"),
        1 => Ok(if target.rank(f) == ranks[0] { BigUint::one() } else { BigUint::zero() }),
        2 => {
            let (r, s) = (ranks[0], ranks[1]);
            budget.charge((classes[r].len() as u64).saturating_mul((n * n) as u64))?;
            let count = classes[r]
                .par_iter()
                .filter(|a| target.sub(a, f).rank(f) == s)
                .count();
            Ok(BigUint::from(count))
        }
        3 => {
            // Pair loop with the third summand solved for: a3 = m - a1 - a2.
            let (r1, r2, r3) = (ranks[0], ranks[1], ranks[2]);
            let pairs = (classes[r1].len() as u64).saturating_mul(classes[r2].len() as u64);
            budget.charge(pairs.saturating_mul((n * n) as u64))?;
            let count: u64 = classes[r1]
                .par_iter()
                .map(|a1| {
                    let m1 = target.sub(a1, f);
                    classes[r2].iter().filter(|a2| m1.sub(a2, f).rank(f) == r3).count() as u64
                })
                .sum();
            Ok(BigUint::from(count))
        }
        _ => {
            // Peel the last summand: group the remaining sum by its rank s.
            let (last, head) = ranks.split_last().expect("len >= 4");
            let mut total = BigUint::zero();
            for s in 0..=n {
                let rep = rank_representative(s, n, q)?;
                let head_count = nsum_rec(head, &rep, classes, n, q, f, budget)?;
                if head_count.is_zero() {
                    continue;
                }
                let pair = nsum_rec(&[*last, s], target, classes, n, q, f, budget)?;
                total += head_count * pair;
            }
            Ok(total)
        }
    }
}

/// Number of tuples of matrices with the prescribed ranks summing to `target`.
/// The count only depends on `rank(target)`; exposing the target lets callers
/// verify that independence directly.
pub fn nsum_for_target(
    ranks: &[usize],
    target: &FqMat,
    q: u32,
    budget: &Budget,
) -> Result<BigUint> {
    let n = target.dim();
    check_census_domain(n, q)?;
    if ranks.is_empty() {
        return Err(Error::InvalidParameters("need at least one rank".into()));
    }
    if let Some(&r) = ranks.iter().find(|&&r| r > n) {
        return Err(Error::InvalidParameters(format!("rank {r} exceeds matrix side {n}")));
    }
    let f = Fq::new(q)?;
    let classes = rank_classes(n, q, f, budget)?;
    nsum_rec(ranks, target, &classes, n, q, f, budget)
}

/// `nsum_for_target` against the canonical rank-`t` representative.
pub fn nsum_bruteforce(
    ranks: &[usize],
    t: usize,
    n: usize,
    q: u32,
    budget: &Budget,
) -> Result<BigUint> {
    check_census_domain(n, q)?;
    let target = rank_representative(t, n, q)?;
    nsum_for_target(ranks, &target, q, budget)
}

// ---------------------------------------------------------------------------
// Envelope ratios for the rank-sum counts.

fn ser_decimal<S: Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct TripleRatioRow {
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
    pub t: usize,
    #[serde(serialize_with = "ser_decimal")]
    pub count: BigUint,
    /// count / (R(r1) R(r2) R(r3) / q^(n^2)); bounded uniformly in t for
    /// ranks above two thirds of the side.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairRatioRow {
    pub r: usize,
    pub s: usize,
    pub t: usize,
    #[serde(serialize_with = "ser_decimal")]
    pub count: BigUint,
    /// count / (R(r) R(s) / q^(n^2) * q^((2n-r-s-t)^2 / 4)).
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioScan {
    pub n: usize,
    pub q: u32,
    pub r_min: usize,
    pub triple_rows: Vec<TripleRatioRow>,
    pub triple_max: f64,
    pub pair_rows: Vec<PairRatioRow>,
    pub pair_max: f64,
}

/// Exhaustive table of rank-sum counts against their envelopes: all triples
/// with each rank at least `r_min`, and all pairs against the quartic-exponent
/// envelope. Zero counts tabulate as ratio 0.
pub fn nsum_ratio_scan(n: usize, q: u32, r_min: usize, budget: &Budget) -> Result<RatioScan> {
    check_census_domain(n, q)?;
    if r_min > n {
        return Err(Error::InvalidParameters(format!("r_min = {r_min} exceeds n = {n}")));
    }
    let f = Fq::new(q)?;
    let classes = rank_classes(n, q, f, budget)?;
    let rr: Vec<BigUint> = (0..=n).map(|r| count_rank(r, n, q)).collect::<Result<_>>()?;
    let qn2 = BigUint::from(q).pow((n * n) as u32);
    let targets: Vec<FqMat> =
        (0..=n).map(|t| rank_representative(t, n, q)).collect::<Result<_>>()?;

    let mut triple_rows = Vec::new();
    for r1 in r_min..=n {
        for r2 in r_min..=n {
            for r3 in r_min..=n {
                for t in 0..=n {
                    let count = nsum_rec(&[r1, r2, r3], &targets[t], &classes, n, q, f, budget)?;
                    let denom = &rr[r1] * &rr[r2] * &rr[r3];
                    let ratio = BigRational::new(
                        BigInt::from(&count * &qn2),
                        BigInt::from(denom),
                    )
                    .to_f64()
                    .unwrap_or(f64::INFINITY);
                    triple_rows.push(TripleRatioRow { r1, r2, r3, t, count, ratio });
                }
            }
        }
    }
    let triple_max = triple_rows.iter().fold(0.0f64, |m, row| m.max(row.ratio));

    let mut pair_rows = Vec::new();
    for r in 0..=n {
        for s in 0..=n {
            for t in 0..=n {
                let count = nsum_rec(&[r, s], &targets[t], &classes, n, q, f, budget)?;
                let gap = 2.0 * n as f64 - (r + s + t) as f64;
                let envelope = (&rr[r] * &rr[s]).to_f64().unwrap_or(f64::INFINITY)
                    / qn2.to_f64().unwrap()
                    * (q as f64).powf(gap * gap / 4.0);
                let ratio = count.to_f64().unwrap_or(f64::INFINITY) / envelope;
                pair_rows.push(PairRatioRow { r, s, t, count, ratio });
            }
        }
    }
    let pair_max = pair_rows.iter().fold(0.0f64, |m, row| m.max(row.ratio));

    Ok(RatioScan { n, q, r_min, triple_rows, triple_max, pair_rows, pair_max })
}

// ---------------------------------------------------------------------------
// Geometric series dominated by a concave quadric exponent.

/// Exact `sum_{x=a}^{b} q^F(x)` for `F(x) = c2 x^2 + c1 x + c0` with `c2 < 0`,
/// together with the closed-form bound `2 q^M / (1 - 2^c2)` valid whenever
/// `F <= M` on the range (checked by direct scan). Asserts sum <= bound.
pub fn quadric_series_bound(
    a: i64,
    b: i64,
    coeffs: (f64, f64, f64),
    m_cap: f64,
    q: u32,
) -> Result<(f64, f64)> {
    let (c2, c1, c0) = coeffs;
    if !(c2 < 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "leading coefficient must be negative, got {c2}"
        )));
    }
    if q < 2 {
        return Err(Error::InvalidParameters("base q must be at least 2".into()));
    }
    let bound = 2.0 * (q as f64).powf(m_cap) / (1.0 - 2f64.powf(c2));
    if a > b {
        return Ok((0.0, bound));
    }
    if b - a >= SERIES_MAX_TERMS {
        return Err(Error::InvalidParameters(format!(
            "range [{a}, {b}] exceeds {SERIES_MAX_TERMS} terms"
        )));
    }
    let mut sum = 0.0;
    for x in a..=b {
        let xf = x as f64;
        let fx = c2 * xf * xf + c1 * xf + c0;
        if fx > m_cap {
            return Err(Error::PreconditionViolated(format!(
                "F({x}) = {fx} exceeds the certified cap {m_cap}"
            )));
        }
        sum += (q as f64).powf(fx);
    }
    assert!(sum <= bound, "series bound violated: {sum} > {bound}");
    Ok((sum, bound))
}

// ---------------------------------------------------------------------------
// Abelian ambient spaces indexed by machine integers.

/// Dense abelian ambient for sumset and energy work. Matrix spaces use the
/// same cell indexing as `FqMat::to_index`, so matrix subsets interoperate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Ambient {
    /// `n x n` matrices over `F_q` under entrywise addition.
    Mat { n: usize, q: u32 },
    /// `(Z/m)^d` under componentwise addition, indexed base `m`.
    ZmPow { m: u64, d: usize },
}

struct Cells {
    base: u64,
    digits: u32,
    /// Some for matrix spaces (table addition covers non-prime q), None for Z/m.
    field: Option<&'static Fq>,
}

impl Cells {
    fn sub(&self, mut x: u64, mut y: u64) -> u64 {
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.digits {
            let (dx, dy) = (x % self.base, y % self.base);
            let d = match self.field {
                Some(f) => f.sub(dx as u32, dy as u32) as u64,
                None => (self.base + dx - dy) % self.base,
            };
            out += d * place;
            place *= self.base;
            x /= self.base;
            y /= self.base;
        }
        out
    }
}

impl Ambient {
    pub fn size(&self) -> Result<u64> {
        Ok(resolve_ambient(self)?.1)
    }
}

fn resolve_ambient(ambient: &Ambient) -> Result<(Cells, u64)> {
    let too_big =
        || Error::InvalidParameters(format!("ambient exceeds {AMBIENT_MAX_CELLS} cells"));
    match *ambient {
        Ambient::Mat { n, q } => {
            if n == 0 {
                return Err(Error::InvalidParameters("matrix side must be positive".into()));
            }
            let f = Fq::new(q)?;
            let digits = u32::try_from(n * n).map_err(|_| too_big())?;
            let size = (q as u64)
                .checked_pow(digits)
                .filter(|&s| s <= AMBIENT_MAX_CELLS)
                .ok_or_else(too_big)?;
            Ok((Cells { base: q as u64, digits, field: Some(f) }, size))
        }
        Ambient::ZmPow { m, d } => {
            if m < 2 || d == 0 {
                return Err(Error::InvalidParameters(
                    "need modulus >= 2 and positive exponent".into(),
                ));
            }
            let digits = u32::try_from(d).map_err(|_| too_big())?;
            let size = m
                .checked_pow(digits)
                .filter(|&s| s <= AMBIENT_MAX_CELLS)
                .ok_or_else(too_big)?;
            Ok((Cells { base: m, digits, field: None }, size))
        }
    }
}

fn check_index_sets(sets: &[Vec<u64>], size: u64, k_min: usize) -> Result<()> {
    if sets.len() < k_min {
        return Err(Error::InvalidParameters(format!(
            "need at least {k_min} sets, got {}",
            sets.len()
        )));
    }
    for set in sets {
        if set.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut seen = BitSet::new(size as usize);
        for &x in set {
            if x >= size {
                return Err(Error::InvalidParameters(format!(
                    "index {x} outside ambient of size {size}"
                )));
            }
            if seen.contains(x as usize) {
                return Err(Error::InvalidParameters(format!("duplicate index {x} in set")));
            }
            seen.insert(x as usize);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Additive energy and the sumset lower bound it implies.

/// Exact number of `2k`-tuples `(x_1..x_k, y_1..y_k)` with `x_i, y_i` drawn
/// from the i-th set and equal sums, via a sum-distribution histogram.
pub fn additive_energy(ambient: &Ambient, sets: &[Vec<u64>], budget: &Budget) -> Result<BigUint> {
    let (cells, size) = resolve_ambient(ambient)?;
    check_index_sets(sets, size, 2)?;
    let tuples: BigUint = sets.iter().map(|s| BigUint::from(s.len())).product();
    if tuples > BigUint::from(u64::MAX) {
        return Err(Error::BudgetExceeded { needed: u64::MAX, used: budget.used(), cap: budget.cap() });
    }
    let mut hist = vec![0u64; size as usize];
    for &x in &sets[0] {
        hist[x as usize] = 1;
    }
    for set in &sets[1..] {
        budget.charge(size.saturating_mul(set.len() as u64))?;
        // Gather form: representation counts accumulate cell by cell.
        let next: Vec<u64> = (0..size)
            .into_par_iter()
            .map(|z| set.iter().map(|&x| hist[cells.sub(z, x) as usize]).sum())
            .collect();
        hist = next;
    }
    // Each count is at most the tuple total <= u64::MAX, so squares fit u128.
    let energy: u128 = hist.iter().map(|&h| (h as u128) * (h as u128)).sum();
    Ok(BigUint::from(energy))
}

/// Sumset size against the Cauchy-Schwarz lower bound `prod |X_i|^2 / E`.
/// Returns both sides exactly and asserts the inequality.
pub fn sumset_energy_check(
    ambient: &Ambient,
    sets: &[Vec<u64>],
    budget: &Budget,
) -> Result<(u64, BigRational)> {
    let energy = additive_energy(ambient, sets, budget)?;
    let (cells, size) = resolve_ambient(ambient)?;
    let mut cur = BitSet::from_indices(size as usize, sets[0].iter().map(|&x| x as usize));
    for set in &sets[1..] {
        budget.charge(size.saturating_mul(set.len() as u64))?;
        let mut next = BitSet::new(size as usize);
        for z in 0..size {
            if set.iter().any(|&x| cur.contains(cells.sub(z, x) as usize)) {
                next.insert(z as usize);
            }
        }
        cur = next;
    }
    let sum_size = cur.count() as u64;
    let tuples: BigUint = sets.iter().map(|s| BigUint::from(s.len())).product();
    let bound = BigRational::new(BigInt::from(&tuples * &tuples), BigInt::from(energy));
    assert!(
        BigRational::from_integer(BigInt::from(sum_size)) >= bound,
        "sumset bound violated: |sum| = {sum_size} < {bound}"
    );
    Ok((sum_size, bound))
}

// ---------------------------------------------------------------------------
// Growth under the two-sided invertible action.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrowthAction {
    /// Transporters `(g, h)` acting on matrices by `x -> g x h^-1`.
    GlTimesGl { n: usize, q: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchStrategy {
    pub restarts: usize,
    pub pool: usize,
    pub seed: u64,
}

impl Default for SearchStrategy {
    fn default() -> Self {
        SearchStrategy { restarts: 4, pool: 24, seed: 0 }
    }
}

/// Outcome of the transported-sumset search, built from a from-scratch
/// re-verification of the reported transporters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthOutcome {
    pub transporters: Vec<(FqMat, FqMat)>,
    pub sum_size: u64,
    pub ambient_size: u64,
    pub min_set_size: u64,
    pub set_count: usize,
    /// `|sum| >= (l/2) min |X_i|` held as exact integers.
    pub growth_branch: bool,
    /// The sum is the whole matrix space (the only invariant subgroup of
    /// size > 1 under the two-sided action, so the coset branch with a
    /// nontrivial subgroup forces exactly this).
    pub filled: bool,
    /// Some set is a singleton, so the zero subgroup already satisfies the
    /// coset branch's size constraint.
    pub point_coset_branch: bool,
}

impl GrowthOutcome {
    pub fn witnessed(&self) -> bool {
        self.growth_branch || self.filled || self.point_coset_branch
    }
}

fn gl_order_u128(n: usize, q: u32) -> Result<u128> {
    count_injections(n, n, q)?
        .to_u128()
        .ok_or_else(|| Error::InvalidParameters("invertible group too large to index".into()))
}

/// Identity pair first, then either every invertible pair (when that fits the
/// pool) or seeded random draws.
fn candidate_pairs(
    n: usize,
    q: u32,
    f: &'static Fq,
    pool: usize,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<(FqMat, FqMat)>> {
    let id = FqMat::identity(n);
    let mut pairs = vec![(id.clone(), id.clone())];
    let total = gl_order_u128(n, q)?.saturating_mul(gl_order_u128(n, q)?);
    if total <= pool as u128 {
        let gl: Vec<FqMat> = enumerate_all(n, q).filter(|m| m.det(f) != 0).collect();
        for g in &gl {
            for h in &gl {
                if *g != id || *h != id {
                    pairs.push((g.clone(), h.clone()));
                }
            }
        }
    } else {
        while pairs.len() < pool.max(1) {
            let g = random_invertible(n, q, f, rng);
            let h = random_invertible(n, q, f, rng);
            pairs.push((g, h));
        }
    }
    Ok(pairs)
}

/// Image of an index set under `x -> l x r`.
fn dilate_indices(set: &[u64], l: &FqMat, r: &FqMat, n: usize, q: u32, f: &Fq) -> Vec<u64> {
    set.iter()
        .map(|&i| {
            let m = FqMat::from_index(n, q, i);
            l.mul(&m, f).mul(r, f).to_index(q)
        })
        .collect()
}

fn sumset_fold(cur: &BitSet, set: &[u64], cells: &Cells, size: u64, budget: &Budget) -> Result<BitSet> {
    budget.charge(size.saturating_mul(set.len() as u64))?;
    let mut out = BitSet::new(size as usize);
    for z in 0..size {
        if set.iter().any(|&x| cur.contains(cells.sub(z, x) as usize)) {
            out.insert(z as usize);
        }
    }
    Ok(out)
}

fn indicator(set: &[u64], size: u64) -> BitSet {
    BitSet::from_indices(size as usize, set.iter().map(|&x| x as usize))
}

/// Greedy randomized search for transporters `(g_i, h_i)` maximizing the size
/// of `sum_i g_i X_i h_i^-1`, reporting which branch of the growth-or-coset
/// disjunction the final sum witnesses.
pub fn automorphism_growth_search(
    sets: &[Vec<u64>],
    action: GrowthAction,
    strategy: &SearchStrategy,
    budget: &Budget,
) -> Result<GrowthOutcome> {
    let GrowthAction::GlTimesGl { n, q } = action;
    if n == 0 || n > 3 || q > 5 {
        return Err(Error::InvalidParameters(format!(
            "two-sided search supports 1 <= n <= 3 and q <= 5, got n = {n}, q = {q}"
        )));
    }
    let ambient = Ambient::Mat { n, q };
    let (cells, size) = resolve_ambient(&ambient)?;
    check_index_sets(sets, size, 1)?;
    let f = Fq::new(q)?;
    let mut rng = ChaCha20Rng::seed_from_u64(strategy.seed);

    let mut best: Option<(u64, Vec<(FqMat, FqMat)>)> = None;
    for restart in 0..strategy.restarts.max(1) {
        let mut chosen: Vec<(FqMat, FqMat)> = Vec::with_capacity(sets.len());
        let mut cur: Option<BitSet> = None;
        for set in sets {
            if cur.as_ref().is_some_and(|s| s.is_full()) {
                // Full stays full under adding any translate.
                chosen.push((FqMat::identity(n), FqMat::identity(n)));
                continue;
            }
            let pool = candidate_pairs(n, q, f, strategy.pool, &mut rng)?;
            match cur {
                None => {
                    // A transporter never changes the first set's size; vary
                    // the start point across restarts for diversity.
                    let pick = if restart == 0 { 0 } else { rng.gen_range(0..pool.len()) };
                    let (g, h) = pool[pick].clone();
                    let hi = h.inverse(f).expect("pool pairs are invertible");
                    cur = Some(indicator(&dilate_indices(set, &g, &hi, n, q, f), size));
                    chosen.push((g, h));
                }
                Some(ref s) => {
                    let scored: Vec<(usize, BitSet)> = pool
                        .iter()
                        .map(|(g, h)| {
                            let hi = h.inverse(f).expect("pool pairs are invertible");
                            let d = dilate_indices(set, g, &hi, n, q, f);
                            sumset_fold(s, &d, &cells, size, budget).map(|b| (b.count(), b))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let (idx, _) = scored
                        .iter()
                        .enumerate()
                        .max_by(|(i, (ca, _)), (j, (cb, _))| ca.cmp(cb).then(j.cmp(i)))
                        .expect("pool is nonempty");
                    chosen.push(pool[idx].clone());
                    cur = Some(scored.into_iter().nth(idx).unwrap().1);
                }
            }
        }
        let achieved = cur.as_ref().map_or(0, |s| s.count() as u64);
        if best.as_ref().is_none_or(|(b, _)| achieved > *b) {
            best = Some((achieved, chosen));
        }
        if best.as_ref().is_some_and(|(b, _)| *b == size) {
            break;
        }
    }

    let (_, transporters) = best.expect("at least one restart ran");
    // Re-verify the winning transporters from scratch.
    let mut cur: Option<BitSet> = None;
    for (set, (g, h)) in sets.iter().zip(&transporters) {
        let hi = h.inverse(f).expect("transporters are invertible");
        let d = dilate_indices(set, g, &hi, n, q, f);
        cur = Some(match cur {
            None => indicator(&d, size),
            Some(s) => sumset_fold(&s, &d, &cells, size, budget)?,
        });
    }
    let sum_size = cur.expect("at least one set").count() as u64;
    let min_set_size = sets.iter().map(|s| s.len() as u64).min().unwrap();
    let l = sets.len();
    Ok(GrowthOutcome {
        transporters,
        sum_size,
        ambient_size: size,
        min_set_size,
        set_count: l,
        growth_branch: 2 * sum_size >= (l as u64) * min_set_size,
        filled: sum_size == size,
        point_coset_branch: min_set_size == 1,
    })
}

// ---------------------------------------------------------------------------
// Covering the matrix space by transported sumsets.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DilateCover {
    pub mu: usize,
    pub pairs: Vec<(FqMat, FqMat)>,
}

/// Greedy search for invertible pairs with `sum_i a_i^-1 X_i b_i` equal to the
/// whole matrix space, using at most `mu_max` summands (sets cycle when fewer
/// are supplied). Coverage is re-verified from scratch before reporting.
pub fn dilate_cover_search(
    sets: &[Vec<u64>],
    n: usize,
    q: u32,
    mu_max: usize,
    seed: u64,
    budget: &Budget,
) -> Result<Option<DilateCover>> {
    if n == 0 || n > 2 || q > 7 {
        return Err(Error::InvalidParameters(format!(
            "cover search supports 1 <= n <= 2 and q <= 7, got n = {n}, q = {q}"
        )));
    }
    if mu_max == 0 {
        return Err(Error::InvalidParameters("need mu_max >= 1".into()));
    }
    let ambient = Ambient::Mat { n, q };
    let (cells, size) = resolve_ambient(&ambient)?;
    check_index_sets(sets, size, 1)?;
    let threshold = (q as f64).powf(0.9 * (n * n) as f64);
    for set in sets {
        if (set.len() as f64) + 1e-9 < threshold {
            return Err(Error::PreconditionViolated(format!(
                "set of size {} is below the q^(0.9 n^2) = {threshold:.2} floor",
                set.len()
            )));
        }
    }
    let f = Fq::new(q)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let apply = |set: &[u64], a: &FqMat, b: &FqMat| -> Vec<u64> {
        let ai = a.inverse(f).expect("pool pairs are invertible");
        dilate_indices(set, &ai, b, n, q, f)
    };

    let mut covered: Option<BitSet> = None;
    let mut pairs: Vec<(FqMat, FqMat)> = Vec::new();
    for slot in 0..mu_max {
        let set = &sets[slot % sets.len()];
        let pool = candidate_pairs(n, q, f, COVER_POOL, &mut rng)?;
        let scored: Vec<(usize, BitSet)> = pool
            .iter()
            .map(|(a, b)| {
                let d = apply(set, a, b);
                match covered {
                    None => Ok((indicator(&d, size).count(), indicator(&d, size))),
                    Some(ref s) => {
                        sumset_fold(s, &d, &cells, size, budget).map(|bset| (bset.count(), bset))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let (idx, _) = scored
            .iter()
            .enumerate()
            .max_by(|(i, (ca, _)), (j, (cb, _))| ca.cmp(cb).then(j.cmp(i)))
            .expect("pool is nonempty");
        pairs.push(pool[idx].clone());
        let next = scored.into_iter().nth(idx).unwrap().1;
        let full = next.is_full();
        covered = Some(next);
        if full {
            // Recompute the cover from the recorded pairs alone.
            let mut check: Option<BitSet> = None;
            for (i, (a, b)) in pairs.iter().enumerate() {
                let d = apply(&sets[i % sets.len()], a, b);
                check = Some(match check {
                    None => indicator(&d, size),
                    Some(s) => sumset_fold(&s, &d, &cells, size, budget)?,
                });
            }
            if !check.expect("at least one pair").is_full() {
                return Err(Error::VerifyFailed("cover re-verification failed".into()));
            }
            return Ok(Some(DilateCover { mu: slot + 1, pairs }));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Block embedding: conjugating a translation block by a two-sided transporter.

/// `g^-1 a h`, the effect on the translation block of conjugation inside the
/// bigger special linear group.
pub fn un_tn_action(g: &FqMat, h: &FqMat, a: &FqMat, f: &Fq) -> Result<FqMat> {
    let n = a.dim();
    if g.dim() != n || h.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "blocks must share one side, got {} / {} / {}",
            g.dim(),
            h.dim(),
            n
        )));
    }
    let gi = g
        .inverse(f)
        .ok_or_else(|| Error::SingularInput("left block is not invertible".into()))?;
    if h.inverse(f).is_none() {
        return Err(Error::SingularInput("right block is not invertible".into()));
    }
    Ok(gi.mul(a, f).mul(h, f))
}

/// `(2n+1) x (2n+1)` unipotent block matrix with `a` in the top-right corner.
pub fn embed_translation_block(a: &FqMat) -> FqMat {
    let n = a.dim();
    let d = 2 * n + 1;
    let mut u = FqMat::identity(d);
    for i in 0..n {
        for j in 0..n {
            u.set(i, n + 1 + j, a.get(i, j));
        }
    }
    u
}

/// Determinant-one block diagonal `diag(g, (det g det h)^-1, h)`.
pub fn embed_transporter_block(g: &FqMat, h: &FqMat, f: &Fq) -> Result<FqMat> {
    let n = g.dim();
    if h.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "diagonal blocks must match, got {} and {}",
            n,
            h.dim()
        )));
    }
    let (dg, dh) = (g.det(f), h.det(f));
    if dg == 0 || dh == 0 {
        return Err(Error::SingularInput("diagonal blocks must be invertible".into()));
    }
    let d = 2 * n + 1;
    let mut t = FqMat::zero(d);
    for i in 0..n {
        for j in 0..n {
            t.set(i, j, g.get(i, j));
            t.set(n + 1 + i, n + 1 + j, h.get(i, j));
        }
    }
    t.set(n, n, f.inv(f.mul(dg, dh)));
    Ok(t)
}

// ---------------------------------------------------------------------------
// Sparsity patterns and the six-factor unipotent decomposition.

/// The three sparsity patterns for odd side `2n+1` (1-based coordinates):
/// edges `(2i-1, 2j)`, edges `(2i, 2j+1)`, and the top-right `n x n` corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GraphPattern {
    Alpha,
    Kappa,
    Upsilon,
}

fn in_pattern(r: usize, c: usize, n: usize, pattern: GraphPattern) -> bool {
    if r >= c {
        return false;
    }
    match pattern {
        // 0-based: even row, odd column. The i <= j edge constraint is
        // automatic above the diagonal.
        GraphPattern::Alpha => r % 2 == 0 && c % 2 == 1,
        GraphPattern::Kappa => r % 2 == 1 && c % 2 == 0,
        GraphPattern::Upsilon => r < n && c > n,
    }
}

/// True iff the matrix has unit diagonal and off-diagonal support inside the
/// pattern's edge set.
pub fn graph_matrix_membership(m: &FqMat, pattern: GraphPattern) -> Result<bool> {
    let d = m.dim();
    if d < 3 || d % 2 == 0 {
        return Err(Error::DimensionMismatch(format!(
            "patterns need odd side >= 3, got {d}"
        )));
    }
    let n = (d - 1) / 2;
    for i in 0..d {
        if m.get(i, i) != 1 {
            return Ok(false);
        }
    }
    for r in 0..d {
        for c in 0..d {
            if r != c && m.get(r, c) != 0 && !in_pattern(r, c, n, pattern) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn pattern_positions(d: usize, pattern: GraphPattern) -> Vec<(usize, usize)> {
    let n = (d - 1) / 2;
    let mut out = Vec::new();
    for r in 0..d {
        for c in 0..d {
            if in_pattern(r, c, n, pattern) {
                out.push((r, c));
            }
        }
    }
    out
}

/// Factors of `T = A K B L C M` with `A, B, C` alpha-patterned and
/// `K, L, M` kappa-patterned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AkblcmFactors {
    pub a: FqMat,
    pub k: FqMat,
    pub b: FqMat,
    pub l: FqMat,
    pub c: FqMat,
    pub m: FqMat,
}

impl AkblcmFactors {
    pub fn product(&self, f: &Fq) -> FqMat {
        self.a
            .mul(&self.k, f)
            .mul(&self.b, f)
            .mul(&self.l, f)
            .mul(&self.c, f)
            .mul(&self.m, f)
    }
}

fn product_six(a: &FqMat, k: &FqMat, b: &FqMat, l: &FqMat, c: &FqMat, m: &FqMat, f: &Fq) -> FqMat {
    a.mul(k, f).mul(b, f).mul(l, f).mul(c, f).mul(m, f)
}

/// Decompose a unipotent upper-triangular matrix of odd side `2n+1 <= 9` into
/// the six-factor product `A K B L C M` with the alternating sparsity
/// patterns. Sweeps the equations bottom row up, left to right inside a row;
/// each entry is matched by one linear adjustment chosen so that every
/// previously matched entry stays fixed:
///   - entries the alpha pattern covers adjust `A` directly;
///   - entries the kappa pattern covers adjust `M` directly;
///   - odd/odd entries (1-based) shift weight between `A` and `C` one column
///     earlier, keeping `A + C` there fixed;
///   - even/even entries shift weight between `K` and `L` one column earlier,
///     keeping `K + L` there fixed at the all-ones initialisation.
pub fn akblcm_solve(t: &FqMat, q: u32) -> Result<AkblcmFactors> {
    let d = t.dim();
    if d < 3 || d % 2 == 0 || d > 9 {
        return Err(Error::InvalidParameters(format!(
            "need odd side between 3 and 9, got {d}"
        )));
    }
    check_table_field(q)?;
    let f = Fq::new(q)?;
    if !t.is_upper_unitriangular() {
        return Err(Error::PreconditionViolated(
            "input must be unipotent upper triangular".into(),
        ));
    }

    let mut a = FqMat::identity(d);
    let mut k = FqMat::identity(d);
    let mut c = FqMat::identity(d);
    let mut m = FqMat::identity(d);
    let mut b = FqMat::identity(d);
    for (r, cc) in pattern_positions(d, GraphPattern::Alpha) {
        b.set(r, cc, 1);
    }
    let mut l = FqMat::identity(d);
    for (r, cc) in pattern_positions(d, GraphPattern::Kappa) {
        l.set(r, cc, 1);
    }

    for s in (0..d).rev() {
        for tc in (s + 1)..d {
            let prod = product_six(&a, &k, &b, &l, &c, &m, f);
            let delta = f.sub(t.get(s, tc), prod.get(s, tc));
            if delta == 0 {
                continue;
            }
            match (s % 2, tc % 2) {
                // 0-based (even, odd): alpha position, adjust A.
                (0, 1) => a.set(s, tc, f.add(a.get(s, tc), delta)),
                // 0-based (odd, even): kappa position, adjust M.
                (1, 0) => m.set(s, tc, f.add(m.get(s, tc), delta)),
                // No factor covers this entry; the previous column is an
                // alpha position and the net effect of moving weight from C
                // to A there is exactly delta times K + L = 1 one step on.
                (0, 0) => {
                    a.set(s, tc - 1, f.add(a.get(s, tc - 1), delta));
                    c.set(s, tc - 1, f.sub(c.get(s, tc - 1), delta));
                }
                // Same trick on the kappa side: B = 1 one step on carries
                // the moved weight, C cancels.
                (1, 1) => {
                    k.set(s, tc - 1, f.add(k.get(s, tc - 1), delta));
                    l.set(s, tc - 1, f.sub(l.get(s, tc - 1), delta));
                }
                _ => unreachable!(),
            }
            let check = product_six(&a, &k, &b, &l, &c, &m, f);
            if check.get(s, tc) != t.get(s, tc) {
                return Err(Error::SolveFailed {
                    row: s + 1,
                    col: tc + 1,
                    detail: format!(
                        "entry is {} after adjustment, want {}",
                        check.get(s, tc),
                        t.get(s, tc)
                    ),
                });
            }
        }
    }

    let factors = AkblcmFactors { a, k, b, l, c, m };
    if factors.product(f) != *t {
        return Err(Error::SolveFailed {
            row: 0,
            col: 0,
            detail: "full product mismatch after the sweep".into(),
        });
    }
    for (mat, pat) in [
        (&factors.a, GraphPattern::Alpha),
        (&factors.b, GraphPattern::Alpha),
        (&factors.c, GraphPattern::Alpha),
        (&factors.k, GraphPattern::Kappa),
        (&factors.l, GraphPattern::Kappa),
        (&factors.m, GraphPattern::Kappa),
    ] {
        if !graph_matrix_membership(mat, pat)? {
            return Err(Error::ConstructionFailed(
                "factor left its sparsity pattern".into(),
            ));
        }
    }
    Ok(factors)
}

impl fmt::Display for GraphPattern {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphPattern::Alpha => write!(out, "alpha"),
            GraphPattern::Kappa => write!(out, "kappa"),
            GraphPattern::Upsilon => write!(out, "upsilon"),
        }
    }
}
