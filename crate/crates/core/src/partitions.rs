//! Partitions of n, symmetric-group character degrees and values, and the
//! character bounds driven by cycle statistics.
//!
//! Degrees come from the hook length formula; individual character values from
//! the Murnaghan-Nakayama recursion on beta-numbers (exact integers). The
//! "virtual degree" replaces hook products by row-and-column factorials and
//! dominates the true degree; the bound under test controls |chi_lambda(sigma)|
//! by a power of the virtual degree determined by the cycle statistics of
//! sigma.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::perm::Perm;

/// Partition of n, parts weakly decreasing, no zero parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn new(mut parts: Vec<u32>) -> Result<Partition> {
        parts.retain(|&p| p != 0);
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPartition(format!(
                "parts must be weakly decreasing: {:?}",
                parts
            )));
        }
        Ok(Partition { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn n(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    /// Conjugate (transpose) partition.
    pub fn conjugate(&self) -> Partition {
        if self.parts.is_empty() {
            return Partition { parts: vec![] };
        }
        let cols = self.parts[0] as usize;
        let mut t = vec![0u32; cols];
        for &p in &self.parts {
            for c in 0..p as usize {
                t[c] += 1;
            }
        }
        Partition { parts: t }
    }

    pub fn is_self_conjugate(&self) -> bool {
        *self == self.conjugate()
    }

    /// All partitions of n in descending lexicographic order.
    pub fn all(n: u32) -> Vec<Partition> {
        let mut out = Vec::new();
        let mut cur: Vec<u32> = Vec::new();
        fn rec(remaining: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
            if remaining == 0 {
                out.push(Partition { parts: cur.clone() });
                return;
            }
            let hi = max.min(remaining);
            for p in (1..=hi).rev() {
                cur.push(p);
                rec(remaining - p, p, cur, out);
                cur.pop();
            }
        }
        rec(n, n, &mut cur, &mut out);
        out
    }

    /// Hook length product over all cells.
    fn hook_product(&self) -> u128 {
        let conj = self.conjugate();
        let mut prod: u128 = 1;
        for (i, &row) in self.parts.iter().enumerate() {
            for j in 0..row as usize {
                let arm = row as u128 - 1 - j as u128;
                let leg = conj.parts[j] as u128 - 1 - i as u128;
                prod *= arm + leg + 1;
            }
        }
        prod
    }

    /// Character degree by the hook length formula: n! / prod(hooks).
    pub fn degree(&self) -> u128 {
        let n = self.n();
        let mut fact: u128 = 1;
        for i in 1..=n as u128 {
            fact *= i;
        }
        fact / self.hook_product()
    }

    /// Virtual degree: (n-1)! / (prod_i (lambda_i - i)! * prod_j (lambda'_j - j)!)
    /// with 1-based indices and the convention that factorials of nonpositive
    /// arguments are 1. Always an integer >= the true degree, but computed as
    /// a rational to keep the definition transparent.
    pub fn virtual_degree(&self) -> BigRational {
        fn fact_or_one(v: i64) -> BigInt {
            if v <= 0 {
                return BigInt::one();
            }
            let mut f = BigInt::one();
            for i in 2..=v {
                f *= i;
            }
            f
        }
        let n = self.n() as i64;
        let mut denom = BigInt::one();
        for (i, &p) in self.parts.iter().enumerate() {
            denom *= fact_or_one(p as i64 - (i as i64 + 1));
        }
        for (j, &p) in self.conjugate().parts.iter().enumerate() {
            denom *= fact_or_one(p as i64 - (j as i64 + 1));
        }
        let mut num = BigInt::one();
        for i in 2..(n.max(1)) {
            num *= i;
        }
        BigRational::new(num, denom)
    }
}

/// Cycle type of a permutation as a partition (includes fixed points).
pub fn cycle_type_partition(p: &Perm) -> Partition {
    let parts = p.cycle_type().into_iter().map(|c| c as u32).collect();
    Partition::new(parts).expect("cycle type is sorted")
}

/// Character value chi_lambda(sigma) by Murnaghan-Nakayama on beta-numbers.
/// `cycles` is the cycle type of sigma, any order. Exact integer.
pub fn mn_character(lambda: &Partition, cycles: &[u32]) -> i64 {
    assert_eq!(lambda.n(), cycles.iter().sum::<u32>(), "size mismatch");
    // Descending cycle order keeps the memo small.
    let mut cyc: Vec<u32> = cycles.to_vec();
    cyc.sort_unstable_by(|a, b| b.cmp(a));
    let beta = beta_set(lambda);
    let mut memo: HashMap<(Vec<u32>, usize), i64> = HashMap::new();
    mn_rec(&beta, &cyc, 0, &mut memo)
}

/// Beta-numbers: {lambda_i + (k - i)} for i = 1..k (0-based: lambda_i + k-1-i),
/// stored ascending.
fn beta_set(lambda: &Partition) -> Vec<u32> {
    let k = lambda.num_parts();
    let mut b: Vec<u32> = lambda
        .parts()
        .iter()
        .enumerate()
        .map(|(i, &p)| p + (k - 1 - i) as u32)
        .collect();
    b.sort_unstable();
    b
}

fn mn_rec(
    beta: &[u32],
    cycles: &[u32],
    at: usize,
    memo: &mut HashMap<(Vec<u32>, usize), i64>,
) -> i64 {
    if at == cycles.len() {
        return 1;
    }
    let key = (beta.to_vec(), at);
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let r = cycles[at];
    let mut total = 0i64;
    // Removing an r-strip moves one bead b down to b - r; legal when the
    // target is free. Sign counts the beads strictly between.
    for (pos, &b) in beta.iter().enumerate() {
        if b < r {
            continue;
        }
        let target = b - r;
        if beta.binary_search(&target).is_ok() {
            continue;
        }
        let crossed = pos - beta.partition_point(|&x| x < target);
        let sign = if crossed % 2 == 0 { 1 } else { -1 };
        let mut next: Vec<u32> = beta.to_vec();
        next[pos] = target;
        next.sort_unstable();
        total += sign * mn_rec(&next, cycles, at + 1, memo);
    }
    memo.insert(key, total);
    total
}

/// Cycle statistics of sigma in S_n: with Sigma_i = number of points in
/// cycles of length at most i, the exponents are
/// `e_i = (ln max(Sigma_i, 1) - ln max(Sigma_{i-1}, 1)) / ln n` for i >= 2,
/// and `e_1 = ln max(f, 1) / ln n` where f is the fixed-point count.
#[derive(Clone, Debug)]
pub struct CycleStats {
    pub n: u32,
    pub fixed: u32,
    /// e_1, e_2, ..., e_n (index 0 is e_1).
    pub exps: Vec<f64>,
}

pub fn cycle_stats(p: &Perm) -> CycleStats {
    let n = p.n() as u32;
    assert!(n >= 2, "cycle statistics need n >= 2");
    let mut count_by_len = vec![0u32; n as usize + 1];
    for &c in cycle_type_partition(p).parts() {
        count_by_len[c as usize] += c;
    }
    let fixed = count_by_len[1];
    let ln_n = (n as f64).ln();
    let mut exps = Vec::with_capacity(n as usize);
    let mut cum_prev = 0u32;
    for i in 1..=n {
        let cum = cum_prev + count_by_len[i as usize];
        let e = if i == 1 {
            (fixed.max(1) as f64).ln() / ln_n
        } else {
            ((cum.max(1) as f64).ln() - (cum_prev.max(1) as f64).ln()) / ln_n
        };
        exps.push(e);
        cum_prev = cum;
    }
    CycleStats { n, fixed, exps }
}

/// Orbit-growth exponent appearing in the bound:
/// E(sigma) = e_1 / 2 + sum_{i >= 2} e_i / i.
pub fn orbit_exponent(stats: &CycleStats) -> f64 {
    let mut e = stats.exps[0] / 2.0;
    for (idx, &ei) in stats.exps.iter().enumerate().skip(1) {
        e += ei / (idx as f64 + 1.0);
    }
    e
}

/// The character bound under test:
/// |chi_lambda(sigma)| <= D(lambda)^E(sigma) * (f!)^{1/4},
/// where D is the virtual degree, E the orbit exponent, f the fixed points.
/// Returns (|chi|, bound) for inspection.
pub fn character_bound_check(lambda: &Partition, sigma: &Perm) -> (f64, f64) {
    let cycles: Vec<u32> = sigma.cycle_type().into_iter().map(|c| c as u32).collect();
    let chi = mn_character(lambda, &cycles).unsigned_abs() as f64;
    let d = lambda
        .virtual_degree()
        .to_f64()
        .expect("virtual degree fits in f64 for desk-scale n");
    let stats = cycle_stats(sigma);
    let e = orbit_exponent(&stats);
    let mut fixed_fact = 1f64;
    for i in 2..=stats.fixed as u64 {
        fixed_fact *= i as f64;
    }
    let bound = d.powf(e) * fixed_fact.powf(0.25);
    (chi, bound)
}

/// Base inequality: every degree satisfies d(lambda) <= sqrt(D(lambda)) * (n!)^{1/4}.
pub fn base_degree_check(lambda: &Partition) -> (f64, f64) {
    let d = lambda.degree() as f64;
    let big_d = lambda.virtual_degree().to_f64().unwrap();
    let n = lambda.n();
    let mut fact = 1f64;
    for i in 2..=n as u64 {
        fact *= i as f64;
    }
    (d, big_d.sqrt() * fact.powf(0.25))
}

/// How an S_n character behaves on restriction to A_n: stays irreducible
/// unless the partition is self-conjugate, in which case it splits in two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AltRestriction {
    Irreducible,
    Splits,
}

pub fn alt_restriction(lambda: &Partition) -> AltRestriction {
    if lambda.is_self_conjugate() {
        AltRestriction::Splits
    } else {
        AltRestriction::Irreducible
    }
}

/// Exact virtual-degree comparison d(lambda) <= D(lambda) in big rationals.
pub fn virtual_dominates_exact(lambda: &Partition) -> bool {
    let d = BigRational::from(BigInt::from(lambda.degree()));
    d <= lambda.virtual_degree()
}

/// Exact check of the character bound when the quantities are rationals with
/// rational exponents cleared: compares |chi|^(4 * denom) against
/// (D^{4 e num} * f!^denom) after clearing exponents; used only on tiny cases
/// in tests. For the battery, the f64 comparison with a safety margin is used.
pub fn character_bound_holds(lambda: &Partition, sigma: &Perm, rel_margin: f64) -> bool {
    let (chi, bound) = character_bound_check(lambda, sigma);
    chi <= bound * (1.0 + rel_margin) + 1e-9
}

/// What a [`charbound_scan`] sweeps over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    /// Per partition, the largest |chi| over classes with at most `t` fixed
    /// points, with the empirical exponent log |chi| / log chi(1).
    FixedPointThreshold(u32),
    /// Per partition, the true degree against the virtual degree.
    VirtualRatio,
    /// Per (partition, class) pair, |chi| against the orbit-exponent bound
    /// `D^E * f!^(1/4)`; classes without fixed points are report-only.
    LsBound,
}

/// One row of a fixed-point-threshold scan.
#[derive(Clone, Debug, Serialize)]
pub struct FixedPointRow {
    pub lambda: Vec<u32>,
    pub degree: u128,
    /// Largest |chi_lambda| over the admitted classes.
    pub max_abs_char: u64,
    /// Cycle type achieving the maximum (first in enumeration order).
    pub argmax_class: Vec<u32>,
    /// log |chi| / log chi(1); absent when either logarithm degenerates.
    pub exponent: Option<f64>,
}

/// One row of a virtual-ratio scan.
#[derive(Clone, Debug, Serialize)]
pub struct VirtualRatioRow {
    pub lambda: Vec<u32>,
    pub degree: u128,
    pub virtual_degree: f64,
    /// d / D, at most 1 since the virtual degree dominates exactly.
    pub ratio: f64,
    /// log d / log D; absent for the degenerate d = 1 or D = 1 rows.
    pub log_ratio: Option<f64>,
}

/// One row of a per-class bound scan.
#[derive(Clone, Debug, Serialize)]
pub struct LsBoundRow {
    pub lambda: Vec<u32>,
    /// Cycle type of the class.
    pub class: Vec<u32>,
    pub fixed_points: u32,
    pub abs_char: u64,
    pub bound: f64,
    /// `bound - |chi|`; negative only on a violation.
    pub margin: f64,
    /// The bound's hypothesis needs at least one fixed point; rows without
    /// are tabulated but carry no claim.
    pub in_scope: bool,
}

#[derive(Clone, Debug, Serialize)]
pub enum ScanTable {
    FixedPoint(Vec<FixedPointRow>),
    VirtualRatio(Vec<VirtualRatioRow>),
    LsBound(Vec<LsBoundRow>),
}

/// A permutation realizing a cycle type, as consecutive cycles.
pub fn perm_with_cycle_type(cycles: &[u32]) -> Result<Perm> {
    let n: u32 = cycles.iter().sum();
    if n == 0 || n > u8::MAX as u32 {
        return Err(Error::InvalidPartition(format!("degree {} out of range", n)));
    }
    let mut images = vec![0u8; n as usize];
    let mut start = 0usize;
    for &c in cycles {
        if c == 0 {
            return Err(Error::InvalidPartition("zero-length cycle".into()));
        }
        let c = c as usize;
        for i in 0..c {
            images[start + i] = (start + (i + 1) % c) as u8;
        }
        start += c;
    }
    Perm::from_images(images)
}

/// Sweeps every partition of `n` (desk scale: `n <= 10`) and tabulates either
/// the concentration of character values on nearly fixed-point-free classes
/// or the gap between true and virtual degrees. The virtual-degree sweep
/// asserts `d <= D` exactly in big rationals; the fixed-point sweep is purely
/// observational apart from the classical `|chi| <= chi(1)` sanity bound.
pub fn charbound_scan(n: u32, mode: ScanMode) -> Result<ScanTable> {
    if n == 0 || n > 10 {
        return Err(Error::InvalidParameters(format!(
            "scan degree {} outside 1..=10",
            n
        )));
    }
    let lambdas = Partition::all(n);
    match mode {
        ScanMode::VirtualRatio => {
            let rows = lambdas
                .iter()
                .map(|lambda| {
                    assert!(
                        virtual_dominates_exact(lambda),
                        "true degree exceeded virtual degree at {:?}",
                        lambda.parts()
                    );
                    let d = lambda.degree();
                    let big_d = lambda.virtual_degree().to_f64().unwrap();
                    let ratio = d as f64 / big_d;
                    let log_ratio = if d > 1 && big_d > 1.0 {
                        Some((d as f64).ln() / big_d.ln())
                    } else {
                        None
                    };
                    VirtualRatioRow {
                        lambda: lambda.parts().to_vec(),
                        degree: d,
                        virtual_degree: big_d,
                        ratio,
                        log_ratio,
                    }
                })
                .collect();
            Ok(ScanTable::VirtualRatio(rows))
        }
        ScanMode::FixedPointThreshold(t) => {
            let classes: Vec<&Partition> = lambdas
                .iter()
                .filter(|c| c.parts().iter().filter(|&&p| p == 1).count() as u32 <= t)
                .collect();
            if classes.is_empty() {
                return Err(Error::InvalidParameters(format!(
                    "no class of S_{} has at most {} fixed points",
                    n, t
                )));
            }
            let rows = lambdas
                .iter()
                .map(|lambda| {
                    let mut max_abs = 0u64;
                    let mut argmax: &Partition = classes[0];
                    for class in &classes {
                        let v = mn_character(lambda, class.parts()).unsigned_abs();
                        if v > max_abs {
                            max_abs = v;
                            argmax = class;
                        }
                    }
                    let d = lambda.degree();
                    assert!(
                        (max_abs as u128) <= d,
                        "character value above the degree at {:?}",
                        lambda.parts()
                    );
                    let exponent = if max_abs >= 1 && d > 1 {
                        Some((max_abs as f64).ln() / (d as f64).ln())
                    } else {
                        None
                    };
                    FixedPointRow {
                        lambda: lambda.parts().to_vec(),
                        degree: d,
                        max_abs_char: max_abs,
                        argmax_class: argmax.parts().to_vec(),
                        exponent,
                    }
                })
                .collect();
            Ok(ScanTable::FixedPoint(rows))
        }
        ScanMode::LsBound => {
            let mut rows = Vec::new();
            for lambda in &lambdas {
                for class in &lambdas {
                    let sigma = perm_with_cycle_type(class.parts())?;
                    let (chi, bound) = character_bound_check(lambda, &sigma);
                    let fixed = class.parts().iter().filter(|&&c| c == 1).count() as u32;
                    let in_scope = fixed >= 1;
                    let margin = bound - chi;
                    assert!(
                        !in_scope || margin >= -1e-9,
                        "bound violated at {:?} on class {:?}: |chi| = {}, bound = {}",
                        lambda.parts(),
                        class.parts(),
                        chi,
                        bound
                    );
                    rows.push(LsBoundRow {
                        lambda: lambda.parts().to_vec(),
                        class: class.parts().to_vec(),
                        fixed_points: fixed,
                        abs_char: chi as u64,
                        bound,
                        margin,
                        in_scope,
                    });
                }
            }
            Ok(ScanTable::LsBound(rows))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    fn p(parts: &[u32]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn partition_enumeration_counts() {
        // Partition numbers p(1..10) = 1, 2, 3, 5, 7, 11, 15, 22, 30, 42.
        let expect = [1, 2, 3, 5, 7, 11, 15, 22, 30, 42];
        for (i, &e) in expect.iter().enumerate() {
            assert_eq!(Partition::all(i as u32 + 1).len(), e);
        }
    }

    #[test]
    fn conjugate_involution() {
        for lam in Partition::all(8) {
            assert_eq!(lam.conjugate().conjugate(), lam);
            assert_eq!(lam.conjugate().n(), lam.n());
        }
        assert_eq!(p(&[3, 1]).conjugate(), p(&[2, 1, 1]));
        assert!(p(&[2, 2]).is_self_conjugate());
        assert!(p(&[3, 1, 1]).is_self_conjugate());
    }

    #[test]
    fn hook_degrees_known() {
        assert_eq!(p(&[5]).degree(), 1);
        assert_eq!(p(&[1, 1, 1, 1, 1]).degree(), 1);
        assert_eq!(p(&[4, 1]).degree(), 4);
        assert_eq!(p(&[3, 2]).degree(), 5);
        assert_eq!(p(&[3, 1, 1]).degree(), 6);
        // Degree squares sum to n!.
        for n in 1..=9u32 {
            let total: u128 = Partition::all(n).iter().map(|l| l.degree() * l.degree()).sum();
            let fact: u128 = (1..=n as u128).product();
            assert_eq!(total, fact, "n = {}", n);
        }
    }

    #[test]
    fn virtual_degree_examples() {
        // (2,1): (3-1)! / ((2-1)! * (1-2)! * (2-1)! * (1-2)!) = 2.
        assert_eq!(p(&[2, 1]).virtual_degree(), BigRational::from_u64(2).unwrap());
        // (2,2): conjugate (2,2); 3! / ((2-1)! 0! (2-1)! 0!) = 6.
        assert_eq!(p(&[2, 2]).virtual_degree(), BigRational::from_u64(6).unwrap());
        // Single row (n): D = (n-1)! / (n-1)! = 1.
        for n in 1..=10 {
            assert_eq!(
                p(&[n]).virtual_degree(),
                BigRational::one(),
                "row partition ({})",
                n
            );
        }
    }

    #[test]
    fn virtual_degree_dominates_true_degree() {
        for n in 1..=10u32 {
            for lam in Partition::all(n) {
                assert!(virtual_dominates_exact(&lam), "{:?}", lam.parts());
            }
        }
    }

    #[test]
    fn mn_matches_small_tables() {
        // S_3 standard character (2,1): values 2, 0, -1 on 1^3, 21, 3.
        let lam = p(&[2, 1]);
        assert_eq!(mn_character(&lam, &[1, 1, 1]), 2);
        assert_eq!(mn_character(&lam, &[2, 1]), 0);
        assert_eq!(mn_character(&lam, &[3]), -1);
        // Sign character (1^4) on a transposition: -1.
        assert_eq!(mn_character(&p(&[1, 1, 1, 1]), &[2, 1, 1]), -1);
        // Trivial character is 1 everywhere.
        for cycles in [[4u32].as_slice(), &[2, 2], &[2, 1, 1], &[3, 1]] {
            assert_eq!(mn_character(&p(&[4]), cycles), 1);
        }
        // Identity column recovers the hook degree.
        for n in 1..=8u32 {
            let ones: Vec<u32> = vec![1; n as usize];
            for lam in Partition::all(n) {
                assert_eq!(mn_character(&lam, &ones), lam.degree() as i64);
            }
        }
    }

    #[test]
    fn mn_column_orthogonality() {
        // Columns of the S_5 table: sum over lambda of chi(c)^2 equals
        // the centralizer order |S_n| / |class c|.
        let n = 5u32;
        let classes: Vec<(Vec<u32>, u64)> = vec![
            (vec![1, 1, 1, 1, 1], 120),
            (vec![2, 1, 1, 1], 12),
            (vec![2, 2, 1], 8),
            (vec![3, 1, 1], 6),
            (vec![3, 2], 6),
            (vec![4, 1], 4),
            (vec![5], 5),
        ];
        for (cycles, centralizer) in classes {
            let s: i64 = Partition::all(n)
                .iter()
                .map(|l| {
                    let v = mn_character(l, &cycles);
                    v * v
                })
                .sum();
            assert_eq!(s as u64, centralizer, "class {:?}", cycles);
        }
    }

    #[test]
    fn cycle_stats_worked_example() {
        // (12)(345) in S_5: Sigma_1 = 0, Sigma_2 = 2, Sigma_3 = 5.
        let sigma = Perm::parse_cycles("(1 2)(3 4 5)", 5).unwrap();
        let st = cycle_stats(&sigma);
        assert_eq!(st.fixed, 0);
        let ln5 = 5f64.ln();
        assert!((st.exps[0] - 0.0).abs() < 1e-12);
        assert!((st.exps[1] - 2f64.ln() / ln5).abs() < 1e-12);
        assert!((st.exps[2] - (5f64.ln() - 2f64.ln()) / ln5).abs() < 1e-12);
        assert!((st.exps[3]).abs() < 1e-12);
        assert!((st.exps[4]).abs() < 1e-12);
        // Exponents of a fixed-point-free permutation sum to 1 from e_2 on.
        let total: f64 = st.exps[1..].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_stats_identity() {
        let st = cycle_stats(&Perm::identity(6));
        assert_eq!(st.fixed, 6);
        // e_1 = ln 6 / ln 6 = 1, all others 0.
        assert!((st.exps[0] - 1.0).abs() < 1e-12);
        for &e in &st.exps[1..] {
            assert!(e.abs() < 1e-12);
        }
        assert!((orbit_exponent(&st) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn character_bound_on_small_groups() {
        // Exhaustive over all classes and partitions for n = 5..=8.
        for n in 5..=8u32 {
            for lam in Partition::all(n) {
                for mu in Partition::all(n) {
                    let sigma = perm_of_type(&mu, n);
                    assert!(
                        character_bound_holds(&lam, &sigma, 1e-9),
                        "lambda {:?} sigma type {:?}",
                        lam.parts(),
                        mu.parts()
                    );
                }
            }
        }
    }

    fn perm_of_type(mu: &Partition, n: u32) -> Perm {
        let mut images: Vec<u8> = (0..n as u8).collect();
        let mut at = 0usize;
        for &c in mu.parts() {
            let c = c as usize;
            for k in 0..c {
                images[at + k] = (at + (k + 1) % c) as u8;
            }
            at += c;
        }
        Perm::from_images(images).unwrap()
    }

    #[test]
    fn base_degree_inequality_small() {
        for n in 1..=10u32 {
            for lam in Partition::all(n) {
                let (d, bound) = base_degree_check(&lam);
                assert!(d <= bound * (1.0 + 1e-12), "{:?}", lam.parts());
            }
        }
    }

    #[test]
    fn alt_restriction_split_counts() {
        // Number of self-conjugate partitions of n equals the number of
        // partitions into distinct odd parts: 1, 0, 1, 1, 1, 1, 1, 2, 2, 2 for n=1..10.
        let expect = [1, 0, 1, 1, 1, 1, 1, 2, 2, 2];
        for (i, &e) in expect.iter().enumerate() {
            let n = i as u32 + 1;
            let splits = Partition::all(n)
                .iter()
                .filter(|l| alt_restriction(l) == AltRestriction::Splits)
                .count();
            assert_eq!(splits, e, "n = {}", n);
        }
    }

    #[test]
    fn alt_restriction_bookkeeping() {
        // Split rows halve into two integral degrees; non-self-conjugate
        // partitions pair with their transpose and induce one A_n-irreducible
        // per pair. The resulting irreducible count matches the known class
        // counts of A_n, and the degree squares sum to n!/2.
        let known_classes = [(4u32, 4usize), (5, 5), (6, 7), (7, 9)];
        for (n, classes) in known_classes {
            let all = Partition::all(n);
            let mut irreducibles = 0usize;
            let mut sum_sq: u128 = 0;
            for lam in &all {
                let d = lam.degree();
                match alt_restriction(lam) {
                    AltRestriction::Splits => {
                        assert_eq!(d % 2, 0, "split degree must be even: {:?}", lam.parts());
                        irreducibles += 2;
                        sum_sq += 2 * (d / 2) * (d / 2);
                    }
                    AltRestriction::Irreducible => {
                        // Count each {lambda, lambda'} pair once.
                        if *lam <= lam.conjugate() {
                            irreducibles += 1;
                            sum_sq += d * d;
                        }
                    }
                }
            }
            assert_eq!(irreducibles, classes, "n = {}", n);
            let fact: u128 = (1..=n as u128).product();
            assert_eq!(sum_sq, fact / 2, "n = {}", n);
        }
    }

    #[test]
    fn virtual_ratio_scan_small_degree() {
        let ScanTable::VirtualRatio(rows) = charbound_scan(5, ScanMode::VirtualRatio).unwrap()
        else {
            panic!("wrong table shape")
        };
        assert_eq!(rows.len(), 7);
        for row in &rows {
            assert!(row.ratio <= 1.0, "{:?}", row.lambda);
        }
        let flat = rows.iter().find(|r| r.lambda == vec![5]).unwrap();
        assert_eq!(flat.ratio, 1.0);
        assert!(flat.log_ratio.is_none());
    }

    #[test]
    fn fixed_point_scan_stays_under_the_degree() {
        let ScanTable::FixedPoint(rows) =
            charbound_scan(7, ScanMode::FixedPointThreshold(1)).unwrap()
        else {
            panic!("wrong table shape")
        };
        assert_eq!(rows.len(), 15);
        for row in &rows {
            assert!((row.max_abs_char as u128) <= row.degree);
            let f = row.argmax_class.iter().filter(|&&c| c == 1).count();
            assert!(f <= 1, "class {:?} has {} fixed points", row.argmax_class, f);
            if let Some(e) = row.exponent {
                assert!((0.0..=1.0).contains(&e));
            }
        }
        // Sign character: |chi| = 1 everywhere, degenerate exponent.
        let sign = rows.iter().find(|r| r.lambda == vec![1; 7]).unwrap();
        assert_eq!(sign.max_abs_char, 1);
        assert!(sign.exponent.is_none());
    }

    #[test]
    fn scan_rejects_large_degree() {
        assert!(charbound_scan(11, ScanMode::VirtualRatio).is_err());
        assert!(charbound_scan(0, ScanMode::VirtualRatio).is_err());
    }

    #[test]
    fn cycle_type_representatives_roundtrip() {
        for class in Partition::all(7) {
            let sigma = perm_with_cycle_type(class.parts()).unwrap();
            let mut ct: Vec<u32> = sigma.cycle_type().into_iter().map(|c| c as u32).collect();
            ct.sort_unstable_by(|a, b| b.cmp(a));
            assert_eq!(ct, class.parts());
        }
        assert!(perm_with_cycle_type(&[]).is_err());
        assert!(perm_with_cycle_type(&[3, 0]).is_err());
    }

    #[test]
    fn per_class_bound_scan_holds_in_scope() {
        let ScanTable::LsBound(rows) = charbound_scan(6, ScanMode::LsBound).unwrap() else {
            panic!("wrong table shape")
        };
        // 11 partitions of 6, all (lambda, class) pairs.
        assert_eq!(rows.len(), 121);
        assert!(rows.iter().any(|r| !r.in_scope), "fixed-point-free classes exist");
        for row in &rows {
            if row.in_scope {
                assert!(row.margin >= -1e-9, "{:?} on {:?}", row.lambda, row.class);
            }
        }
        // The trivial character on the identity class: |chi| = 1 and the
        // bound has every point fixed, so it is at least 6!^(1/4) > 5.
        let triv = rows
            .iter()
            .find(|r| r.lambda == vec![6] && r.class == vec![1; 6])
            .unwrap();
        assert_eq!(triv.abs_char, 1);
        assert!(triv.bound > 5.0);
    }
}
