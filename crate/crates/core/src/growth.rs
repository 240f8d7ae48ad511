//! Growth diagnostics for product sets: the second-moment statistic driving
//! skew-product lower bounds, class-concentration witnesses, r-globality
//! profiles over umvirates of alternating groups, a constructive factorization
//! of any even permutation into three pointwise stabilizers, and a greedy
//! search for short conjugate products covering the whole group.
//!
//! Everything that feeds an inequality is exact: the Gamma statistic and the
//! skew-product expectation are big rationals, umvirate counts are integers,
//! and every search result is re-verified from scratch before it is returned.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::fourier::class_profile;
use crate::group::{conjugate_subset, product_set, Group, GroupSpec, Subset};
use crate::perm::Perm;

/// Exhaustive expectation over all conjugators is refused above this order.
const SKEW_EXPECTATION_MAX_ORDER: usize = 2520;
/// Random restarts for the greedy conjugate cover search.
const COVER_RESTARTS: usize = 32;

fn check_subset(g: &Group, a: &Subset) -> Result<()> {
    if a.capacity() != g.order() {
        return Err(Error::GroupMismatch(format!(
            "subset over {} points in a group of order {}",
            a.capacity(),
            g.order()
        )));
    }
    if a.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(())
}

/// Second-moment statistic `Gamma(A, B)`: the expected number of coincidences
/// `a1^-1 a2 = b1 b2^-1` weighted by class size,
///
/// ```text
/// Gamma = sum_alpha N_alpha M_{alpha^-1} / (|alpha| |A| |B|)
/// ```
///
/// where `N_alpha = #{(a1,a2) in A^2 : a1^-1 a2 in alpha}` and likewise `M`
/// for `B`. A Cauchy–Schwarz argument turns it into the guarantee
/// `max_sigma |A^sigma B| >= |A||B| / Gamma`, which the tests check against
/// the exhaustive maximum. Exact rational output.
pub fn gamma_statistic(
    g: &Group,
    a: &Subset,
    b: &Subset,
    budget: &Budget,
) -> Result<BigRational> {
    check_subset(g, a)?;
    check_subset(g, b)?;
    let n_profile = class_profile(g, a, budget)?;
    let m_profile = class_profile(g, b, budget)?;
    let mut sum = BigRational::from_integer(BigInt::from(0));
    for (ci, info) in g.classes().iter().enumerate() {
        let n_alpha = n_profile[ci];
        let m_inv = m_profile[info.inverse_class as usize];
        if n_alpha == 0 || m_inv == 0 {
            continue;
        }
        sum += BigRational::new(
            BigInt::from(n_alpha as u128 * m_inv as u128),
            BigInt::from(info.size),
        );
    }
    let pairs = BigInt::from(a.count() as u128 * b.count() as u128);
    Ok(sum / BigRational::from_integer(pairs))
}

/// Best class-concentration witness for `A`: the shift and class maximizing
/// `|a^-1 A ∩ alpha|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Concentration {
    /// Shift `a` (element index) whose left translate of `A` meets the class.
    pub shift: u32,
    /// Index of the witnessing conjugacy class.
    pub class: u32,
    /// `|a^-1 A ∩ alpha|`, the concentration achieved.
    pub count: usize,
}

/// Finds the pair `(a, alpha)` maximizing `|a^-1 A ∩ alpha|` over all shifts
/// `a` in the group and all conjugacy classes. Ties break toward the smallest
/// `(a, alpha)` pair. The shift ranges over the whole group, not just `A`:
/// a translate of a class is then recognized exactly, with count `|alpha|`.
pub fn class_concentration(g: &Group, a: &Subset, budget: &Budget) -> Result<Concentration> {
    check_subset(g, a)?;
    let order = g.order();
    let members: Vec<u32> = a.iter().map(|x| x as u32).collect();
    budget.charge(order as u64 * members.len() as u64)?;
    let k = g.classes().len();
    let best = (0..order as u32)
        .into_par_iter()
        .map(|shift| {
            let si = g.inv(shift);
            let mut counts = vec![0usize; k];
            if let Some(row) = g.mul_row(si) {
                for &y in &members {
                    counts[g.class_of(row[y as usize]) as usize] += 1;
                }
            } else {
                for &y in &members {
                    counts[g.class_of(g.mul(si, y)) as usize] += 1;
                }
            }
            let (class, count) = counts
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
                .expect("group has at least one class");
            Concentration { shift, class: class as u32, count: *count }
        })
        .reduce(
            || Concentration { shift: u32::MAX, class: u32::MAX, count: 0 },
            |x, y| {
                // max count, then smallest (shift, class); total order makes
                // the parallel reduction deterministic.
                match x.count.cmp(&y.count).then_with(|| {
                    (y.shift, y.class).cmp(&(x.shift, x.class))
                }) {
                    std::cmp::Ordering::Less => y,
                    _ => x,
                }
            },
        );
    Ok(best)
}

/// Exhaustively checks the skew-product expectation bound
/// `E_sigma |A^sigma B| >= |alpha B| |A ∩ alpha| / |alpha|` for one class.
///
/// Returns the exact `(lhs, rhs)` pair; the inequality itself is asserted,
/// since a violation would falsify the second-moment argument rather than
/// merely a tolerance. The full scan over conjugators is refused for groups
/// of order above 2520.
pub fn expected_skew_product_check(
    g: &Group,
    a: &Subset,
    b: &Subset,
    class: u32,
    budget: &Budget,
) -> Result<(BigRational, BigRational)> {
    check_subset(g, a)?;
    check_subset(g, b)?;
    let order = g.order();
    if class as usize >= g.classes().len() {
        return Err(Error::InvalidParameters(format!(
            "class index {} out of range ({} classes)",
            class,
            g.classes().len()
        )));
    }
    if order > SKEW_EXPECTATION_MAX_ORDER {
        return Err(Error::BudgetExceeded {
            needed: order as u64,
            used: 0,
            cap: SKEW_EXPECTATION_MAX_ORDER as u64,
        });
    }
    budget.charge(order as u64 * a.count() as u64)?;
    let total: u64 = (0..order as u32)
        .into_par_iter()
        .map(|s| -> Result<u64> {
            let conj = conjugate_subset(g, a, s);
            Ok(product_set(g, &conj, b, budget)?.count() as u64)
        })
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    let lhs = BigRational::new(BigInt::from(total), BigInt::from(order));

    let info = &g.classes()[class as usize];
    let class_product = product_set(g, &info.members, b, budget)?;
    let meet = a.intersect_count(&info.members);
    let rhs = BigRational::new(
        BigInt::from(class_product.count() as u128 * meet as u128),
        BigInt::from(info.size),
    );
    assert!(
        lhs >= rhs,
        "skew-product expectation {} fell below class bound {}",
        lhs,
        rhs
    );
    Ok((lhs, rhs))
}

/// Witnessing umvirate for one depth of a globality profile: the point set
/// `I` and the images prescribed on it, both 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UmvirateWitness {
    pub points: Vec<usize>,
    pub images: Vec<usize>,
}

/// Maximum density ratio of a set over all `d`-umvirates at one depth.
#[derive(Clone, Debug, Serialize)]
pub struct DensityRatio {
    pub d: usize,
    /// `|A ∩ U|` at the witnessing umvirate.
    pub count: usize,
    /// `|U| = |A_n| / (n (n-1) ... (n-d+1))`.
    pub umvirate_size: u64,
    /// `(|A ∩ U| / |U|) / mu(A)`, exact in f64.
    pub ratio: f64,
    pub witness: UmvirateWitness,
}

/// Per-depth maximum density ratios of a subset of an alternating group.
#[derive(Clone, Debug, Serialize)]
pub struct GlobalityReport {
    pub degree: usize,
    pub set_size: usize,
    pub ratios: Vec<DensityRatio>,
}

impl GlobalityReport {
    /// `A` is `r`-global when no umvirate concentrates it beyond `r^d`.
    pub fn is_r_global(&self, r: f64) -> bool {
        self.ratios.iter().all(|e| e.ratio <= r.powi(e.d as i32))
    }
}

fn falling_factorial(n: usize, d: usize) -> u64 {
    (0..d).map(|i| (n - i) as u64).product()
}

/// Lexicographic successor of a `d`-combination of `0..n`; false at the last.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let d = combo.len();
    for i in (0..d).rev() {
        if combo[i] < n - d + i {
            combo[i] += 1;
            for j in i + 1..d {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Computes, for each `d <= d_max`, the maximum of
/// `(|A ∩ U| / |U|) / mu(A)` over all `d`-umvirates `U` (cosets of pointwise
/// stabilizers of `d` points), with the maximizing umvirate as witness.
///
/// The parent group must be an alternating group and `d_max <= n - 3`, so
/// every umvirate has positive size and the stabilizer index
/// `n (n-1) ... (n-d+1)` divides `|A_n|` exactly.
pub fn globality_profile(
    g: &Group,
    a: &Subset,
    d_max: usize,
    budget: &Budget,
) -> Result<GlobalityReport> {
    let n = match g.spec() {
        GroupSpec::Alt { n } => *n as usize,
        other => {
            return Err(Error::PreconditionViolated(format!(
                "globality profile needs an alternating parent, got {}",
                other
            )))
        }
    };
    check_subset(g, a)?;
    if d_max + 3 > n {
        return Err(Error::InvalidParameters(format!(
            "depth {} too deep for degree {} (need d <= n - 3)",
            d_max, n
        )));
    }
    let members: Vec<&Perm> = a.iter().map(|i| g.perm(i as u32).expect("perm carrier")).collect();
    let order = g.order() as u64;
    let set_size = members.len();

    let mut ratios = vec![DensityRatio {
        d: 0,
        count: set_size,
        umvirate_size: order,
        ratio: 1.0,
        witness: UmvirateWitness { points: vec![], images: vec![] },
    }];

    for d in 1..=d_max {
        let combos_total = binomial(n, d);
        let factorial_d: u64 = (1..=d as u64).product();
        budget.charge(n as u64 * combos_total * factorial_d)?;
        budget.charge(combos_total * set_size as u64)?;

        let mut combos = Vec::with_capacity(combos_total as usize);
        let mut combo: Vec<usize> = (0..d).collect();
        loop {
            combos.push(combo.clone());
            if !next_combination(&mut combo, n) {
                break;
            }
        }

        // Per point set I, bucket members by their image tuple on I: each
        // bucket is one umvirate's intersection with A.
        let best = combos
            .par_iter()
            .enumerate()
            .map(|(idx, points)| {
                let mut buckets: HashMap<u64, usize> = HashMap::new();
                for p in &members {
                    let key = points
                        .iter()
                        .fold(0u64, |acc, &x| (acc << 4) | p.apply(x) as u64);
                    *buckets.entry(key).or_insert(0) += 1;
                }
                let (key, count) = buckets
                    .into_iter()
                    .max_by(|x, y| x.1.cmp(&y.1).then(y.0.cmp(&x.0)))
                    .expect("nonempty set fills at least one bucket");
                (count, idx, key)
            })
            .reduce(
                || (0usize, usize::MAX, u64::MAX),
                |x, y| match x.0.cmp(&y.0).then_with(|| (y.1, y.2).cmp(&(x.1, x.2))) {
                    std::cmp::Ordering::Less => y,
                    _ => x,
                },
            );

        let (count, combo_idx, key) = best;
        let points = combos[combo_idx].clone();
        let mut images = vec![0usize; d];
        for (slot, img) in images.iter_mut().rev().enumerate() {
            *img = ((key >> (4 * slot)) & 0xF) as usize;
        }
        let index = falling_factorial(n, d);
        debug_assert_eq!(order % index, 0);
        let umvirate_size = order / index;
        // (count / umvirate_size) / (set_size / order) = count * index / set_size
        let ratio = (count as u64 * index) as f64 / set_size as f64;
        ratios.push(DensityRatio {
            d,
            count,
            umvirate_size,
            ratio,
            witness: UmvirateWitness { points, images },
        });
    }

    Ok(GlobalityReport { degree: n, set_size, ratios })
}

fn binomial(n: usize, d: usize) -> u64 {
    let mut acc = 1u64;
    for i in 0..d {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

fn fixes_pointwise(p: &Perm, set: &[usize]) -> bool {
    set.iter().all(|&x| p.apply(x) == x)
}

/// Order-preserving completion: assigns the still-missing domain points (in
/// increasing order) to the still-missing values (in increasing order).
fn fill_order_preserving(images: &mut [usize], n: usize) {
    let mut used = vec![false; n];
    for &img in images.iter() {
        if img != usize::MAX {
            used[img] = true;
        }
    }
    let mut free_values = (0..n).filter(|&v| !used[v]);
    for img in images.iter_mut() {
        if *img == usize::MAX {
            *img = free_values.next().expect("as many free values as holes");
        }
    }
}

fn perm_from_usize(images: &[usize]) -> Result<Perm> {
    Perm::from_images(images.iter().map(|&x| x as u8).collect())
}

/// Factors an even permutation as `sigma = sigma_I sigma_J sigma_K` with each
/// factor even and fixing its set pointwise — a constructive proof that the
/// product of three pointwise-stabilizer subgroups is all of `A_n`.
///
/// `I`, `J`, `K` must be pairwise disjoint with at least two points each;
/// points are 0-based. The construction: `sigma_I` agrees with `sigma`
/// wherever that avoids touching `I`, closes up order-preservingly, and
/// repairs parity with a swap that never pushes the remainder's `K`-images
/// into `J`; `sigma_J` copies the remainder on `K` and closes up likewise;
/// `sigma_K` is the exact quotient. Every claimed property is re-verified on
/// the finished triple, and any gap surfaces as `ConstructionFailed` rather
/// than a silently adjusted output.
pub fn umvirate_triple_cover(
    sigma: &Perm,
    i_set: &[usize],
    j_set: &[usize],
    k_set: &[usize],
) -> Result<(Perm, Perm, Perm)> {
    let n = sigma.n();
    for (name, set) in [("I", i_set), ("J", j_set), ("K", k_set)] {
        if set.len() < 2 {
            return Err(Error::InvalidParameters(format!(
                "set {} has {} points, need at least 2",
                name,
                set.len()
            )));
        }
        if set.iter().any(|&x| x >= n) {
            return Err(Error::InvalidParameters(format!(
                "set {} contains a point outside 0..{}",
                name, n
            )));
        }
    }
    let mut owner = vec![0u8; n];
    for (tag, set) in [(1u8, i_set), (2, j_set), (3, k_set)] {
        for &x in set {
            if owner[x] != 0 {
                return Err(Error::InvalidParameters(format!(
                    "point {} appears in two of I, J, K",
                    x
                )));
            }
            owner[x] = tag;
        }
    }
    if !sigma.is_even() {
        return Err(Error::PreconditionViolated(
            "input permutation is odd".into(),
        ));
    }
    let in_i = |x: usize| owner[x] == 1;
    let in_j = |x: usize| owner[x] == 2;
    let in_k = |x: usize| owner[x] == 3;

    // sigma_I: fix I, copy sigma wherever the image stays clear of I, and
    // close the leftover points (sigma^-1(I) \ I) onto the leftover values
    // (sigma(I) \ I) in increasing order.
    let mut img = vec![usize::MAX; n];
    for x in 0..n {
        if in_i(x) {
            img[x] = x;
        } else if !in_i(sigma.apply(x)) {
            img[x] = sigma.apply(x);
        }
    }
    let holes: Vec<usize> = (0..n).filter(|&x| img[x] == usize::MAX).collect();
    fill_order_preserving(&mut img, n);
    if !perm_from_usize(&img)?.is_even() {
        if holes.len() >= 2 {
            // Swapping two filled-in images changes the remainder only on I.
            img.swap(holes[0], holes[1]);
        } else {
            // Too few free points: swap two images outside I, constrained so
            // the remainder's K-images stay clear of J. Two K-points always
            // qualify, so the search cannot come up empty.
            let outside: Vec<usize> = (0..n).filter(|&x| !in_i(x)).collect();
            let mut swapped = false;
            'pairs: for (ui, &u) in outside.iter().enumerate() {
                for &v in &outside[ui + 1..] {
                    let ok = (!in_k(u) || !in_j(v)) && (!in_k(v) || !in_j(u));
                    if ok {
                        img.swap(u, v);
                        swapped = true;
                        break 'pairs;
                    }
                }
            }
            if !swapped {
                return Err(Error::ConstructionFailed(
                    "no parity-repair swap outside I".into(),
                ));
            }
        }
    }
    let sigma_i = perm_from_usize(&img)?;
    if !sigma_i.is_even() || !fixes_pointwise(&sigma_i, i_set) {
        return Err(Error::ConstructionFailed(
            "first factor is odd or moves I".into(),
        ));
    }

    // Remainder tau = sigma_I^-1 sigma; on K it lands in K or I, never in J.
    let tau = sigma_i.inverse().compose(sigma);
    if k_set.iter().any(|&x| in_j(tau.apply(x))) {
        return Err(Error::ConstructionFailed(
            "remainder maps K into J".into(),
        ));
    }

    // sigma_J: fix J, copy the remainder on K, close up order-preservingly,
    // and repair parity inside the free points (at least |I| >= 2 of them).
    let mut img2 = vec![usize::MAX; n];
    for x in 0..n {
        if in_j(x) {
            img2[x] = x;
        } else if in_k(x) {
            img2[x] = tau.apply(x);
        }
    }
    let free: Vec<usize> = (0..n).filter(|&x| img2[x] == usize::MAX).collect();
    fill_order_preserving(&mut img2, n);
    if !perm_from_usize(&img2)?.is_even() {
        if free.len() < 2 {
            return Err(Error::ConstructionFailed(
                "second factor has no room for a parity repair".into(),
            ));
        }
        img2.swap(free[0], free[1]);
    }
    let sigma_j = perm_from_usize(&img2)?;
    if !sigma_j.is_even() || !fixes_pointwise(&sigma_j, j_set) {
        return Err(Error::ConstructionFailed(
            "second factor is odd or moves J".into(),
        ));
    }

    let sigma_k = sigma_j.inverse().compose(&tau);
    if !sigma_k.is_even() || !fixes_pointwise(&sigma_k, k_set) {
        return Err(Error::ConstructionFailed(
            "third factor is odd or moves K".into(),
        ));
    }
    if sigma_i.compose(&sigma_j).compose(&sigma_k) != *sigma {
        return Err(Error::ConstructionFailed(
            "factors do not multiply back to the input".into(),
        ));
    }
    Ok((sigma_i, sigma_j, sigma_k))
}

/// A verified covering of the group by a short product of conjugates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverWitness {
    /// Number of conjugates multiplied.
    pub m: usize,
    /// Conjugating element indices, in product order.
    pub shifts: Vec<u32>,
}

/// Greedy search for conjugates `A^{s_1} ... A^{s_m} = G` with `m <= m_max`:
/// each step picks the conjugator maximizing the running product (ties to the
/// smallest element index), restarting `32` times with a randomized first
/// conjugator to escape bad starts. Returns the witness for the smallest `m`
/// reached — re-verified from scratch — or `None` when no restart covers
/// within the cap. The parent group must be one of the presumed-simple
/// families, where conjugates of any nontrivial set generate everything.
pub fn conjugate_cover_search(
    g: &Group,
    a: &Subset,
    m_max: usize,
    seed: u64,
    budget: &Budget,
) -> Result<Option<CoverWitness>> {
    check_subset(g, a)?;
    if !g.spec().presumed_simple() {
        return Err(Error::PreconditionViolated(format!(
            "conjugate covering expects a simple parent, got {}",
            g.spec()
        )));
    }
    if m_max == 0 {
        return Err(Error::InvalidParameters("m_max must be positive".into()));
    }
    let order = g.order();
    let size = a.count();
    if size == order {
        return Ok(Some(CoverWitness { m: 1, shifts: vec![g.identity()] }));
    }
    if size == 1 {
        // A product of single conjugates is a single element.
        return Ok(None);
    }
    // |A^{s_1} ... A^{s_m}| <= |A|^m floors the reachable m.
    let floor = {
        let mut m = 1usize;
        let mut reach = size as u128;
        while reach < order as u128 {
            m += 1;
            reach *= size as u128;
        }
        m
    };

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<CoverWitness> = None;
    for restart in 0..COVER_RESTARTS {
        let first = if restart == 0 {
            g.identity()
        } else {
            rng.gen_range(0..order as u32)
        };
        budget.charge(size as u64)?;
        let mut shifts = vec![first];
        let mut product = conjugate_subset(g, a, first);
        while !product.is_full() && shifts.len() < m_max {
            if let Some(b) = &best {
                if shifts.len() + 1 >= b.m {
                    break;
                }
            }
            budget.charge(order as u64 * size as u64)?;
            let step = (0..order as u32)
                .into_par_iter()
                .map(|s| -> Result<(usize, u32)> {
                    let conj = conjugate_subset(g, a, s);
                    let grown = product_set(g, &product, &conj, budget)?;
                    Ok((grown.count(), s))
                })
                .try_reduce(
                    || (0, u32::MAX),
                    |x, y| {
                        Ok(match x.0.cmp(&y.0).then(y.1.cmp(&x.1)) {
                            std::cmp::Ordering::Less => y,
                            _ => x,
                        })
                    },
                )?;
            let conj = conjugate_subset(g, a, step.1);
            product = product_set(g, &product, &conj, budget)?;
            shifts.push(step.1);
        }
        if product.is_full() {
            let m = shifts.len();
            if best.as_ref().map_or(true, |b| m < b.m) {
                if !verify_conjugate_cover(g, a, &shifts, budget)? {
                    return Err(Error::VerifyFailed(
                        "greedy cover did not survive recomputation".into(),
                    ));
                }
                best = Some(CoverWitness { m, shifts });
            }
        }
        if best.as_ref().is_some_and(|b| b.m <= floor) {
            break;
        }
    }
    Ok(best)
}

/// Recomputes `A^{s_1} ... A^{s_m}` from scratch and reports whether it is
/// the whole group. Independent of any state the search kept.
pub fn verify_conjugate_cover(
    g: &Group,
    a: &Subset,
    shifts: &[u32],
    budget: &Budget,
) -> Result<bool> {
    check_subset(g, a)?;
    if shifts.is_empty() {
        return Err(Error::InvalidParameters("empty shift list".into()));
    }
    let mut product = conjugate_subset(g, a, shifts[0]);
    for &s in &shifts[1..] {
        let conj = conjugate_subset(g, a, s);
        product = product_set(g, &product, &conj, budget)?;
    }
    Ok(product.is_full())
}
