//! The acceptance battery behind `suite`: each criterion exercises one
//! documented contract end to end and reports a single pass/fail outcome.
//!
//! Detail strings carry mathematical facts only — never timing and never
//! addresses — so a full battery serializes to identical bytes on identical
//! seeds. Wall-clock caps are enforced in the pass flags without being
//! serialized. A criterion that panics (a violated internal inequality
//! assertion, for instance) is caught and reported as a failure rather than
//! aborting the battery: an honest red.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use prodlab::budget::{Budget, DEFAULT_BUDGET};
use prodlab::chartable::{character_table, witten_zeta, CharTable, DEFAULT_CHAR_TOL};
use prodlab::fourier::{
    criterion_check, frobenius_lhs, frobenius_rhs, normalized_indicator, project,
    projection_norm_sq, GroupFunction, SampleMode, ShiftSearch,
};
use prodlab::fq::Fq;
use prodlab::fqmat::{enumerate_all, random_invertible, random_unipotent, FqMat};
use prodlab::group::{
    build_group, max_skew_product, random_subset, BuildOptions, Group, GroupSpec, SkewStrategy,
};
use prodlab::growth::{expected_skew_product_check, gamma_statistic, umvirate_triple_cover};
use prodlab::matcount::{
    additive_energy, akblcm_solve, count_injections, count_rank, count_subspaces, dilate_cover_search,
    nsum_bruteforce, nsum_for_target, nsum_ratio_scan, rank_representative, sumset_energy_check,
    Ambient,
};
use prodlab::partitions::{
    charbound_scan, cycle_type_partition, mn_character, virtual_dominates_exact, Partition,
    ScanMode, ScanTable,
};
use prodlab::perm::random_even_perm;
use prodlab::{Error, Result};

/// The benchmark roster, smallest order first.
pub const BENCH_SPECS: [&str; 7] = ["Sn:3", "Sn:4", "An:4", "An:5", "Sn:5", "PSL:2,7", "An:6"];

/// Seed for the shared character tables; fixed so the battery's own seed only
/// steers the random sets and functions.
const TABLE_SEED: u64 = 12345;

pub struct BenchEntry {
    pub spec: String,
    pub group: Group,
    pub table: CharTable,
}

pub struct Bench {
    pub entries: Vec<BenchEntry>,
}

impl Bench {
    fn entry(&self, spec: &str) -> &BenchEntry {
        self.entries.iter().find(|e| e.spec == spec).expect("benchmark roster entry")
    }
}

pub fn build_bench() -> Result<Bench> {
    let budget = Budget::new(DEFAULT_BUDGET);
    let mut entries = Vec::new();
    for spec in BENCH_SPECS {
        let parsed = GroupSpec::parse(spec)?;
        let group = build_group(&parsed, &BuildOptions::default())?;
        let table = character_table(&group, DEFAULT_CHAR_TOL, TABLE_SEED, &budget)?;
        entries.push(BenchEntry { spec: spec.to_string(), group, table });
    }
    Ok(Bench { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryReport {
    pub level: String,
    pub criteria: Vec<CriterionOutcome>,
    pub all_pass: bool,
}

impl BatteryReport {
    fn seal(level: &str, criteria: Vec<CriterionOutcome>) -> BatteryReport {
        let all_pass = criteria.iter().all(|c| c.pass);
        BatteryReport { level: level.to_string(), criteria, all_pass }
    }
}

/// Per-criterion rng, decorrelated from the table seed and between criteria.
fn crng(seed: u64, salt: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed.rotate_left(17) ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn panic_text(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "opaque panic payload".to_string()
    }
}

/// Run one criterion body, catching panics and enforcing an optional
/// wall-clock cap. The cap affects only the pass flag, never the detail
/// numbers, so reports stay byte-deterministic.
fn run(
    id: u32,
    name: &'static str,
    cap_secs: Option<f64>,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed().as_secs_f64();
    let (mut pass, mut detail) = match outcome {
        Ok(Ok((pass, detail))) => (pass, detail),
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(p) => (false, format!("panicked: {}", panic_text(p))),
    };
    if let Some(cap) = cap_secs {
        if elapsed > cap {
            pass = false;
            detail.push_str("; wall budget exceeded");
        }
    }
    CriterionOutcome { id, name, pass, detail }
}

fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(1.0)
}

// ---------------------------------------------------------------------------
// Criterion 1: Fourier identities.

fn c01_fourier_identities(bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let budget = Budget::new(DEFAULT_BUDGET);
    let mut worst_parseval = 0f64;
    let mut worst_recon = 0f64;
    let mut worst_pair = 0f64;
    for (gi, e) in bench.entries.iter().enumerate() {
        let (g, t) = (&e.group, &e.table);
        let mut rng = crng(seed, 0x0101 + gi as u64);
        for _ in 0..50 {
            let values: Vec<Complex64> = (0..g.order())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let f = GroupFunction::new(g, values)?;
            let total = f.norm_l2_sq();
            let mut sum_norms = 0f64;
            let mut recon = vec![Complex64::new(0.0, 0.0); g.order()];
            for row in 0..t.num_classes() {
                let p = project(g, t, &f, row)?;
                sum_norms += p.norm_l2_sq();
                for (acc, v) in recon.iter_mut().zip(p.values()) {
                    *acc += *v;
                }
            }
            worst_parseval = worst_parseval.max(rel_err(sum_norms, total));
            let scale = f.norm_linf().max(1.0);
            let linf = recon
                .iter()
                .zip(f.values())
                .map(|(a, b)| (a - b).norm())
                .fold(0f64, f64::max);
            worst_recon = worst_recon.max(linf / scale);
        }
        for _ in 0..10 {
            let size = 1 + rng.gen_range(0..g.order());
            let a = random_subset(g, size, &mut rng);
            let f = normalized_indicator(g, &a)?;
            for row in 0..t.num_classes() {
                let via_pairs = projection_norm_sq(g, t, &a, row, &budget)?;
                let direct = project(g, t, &f, row)?.norm_l2_sq();
                worst_pair = worst_pair.max(rel_err(via_pairs, direct));
            }
        }
    }
    let pass = worst_parseval <= 1e-8 && worst_recon <= 1e-8 && worst_pair <= 1e-8;
    Ok((
        pass,
        format!(
            "across {} groups x 50 functions: Parseval rel {:.2e}, pointwise reconstruction rel {:.2e}, pair-average projection norm rel {:.2e} (tolerance 1e-8)",
            bench.entries.len(),
            worst_parseval,
            worst_recon,
            worst_pair
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 2: shifted-convolution moments, exact and sampled.

fn c02_frobenius_moments(bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let mut worst_rel = 0f64;
    for (gi, e) in bench.entries.iter().enumerate() {
        let (g, t) = (&e.group, &e.table);
        let mut rng = crng(seed, 0x0201 + gi as u64);
        for _ in 0..20 {
            let budget = Budget::new(DEFAULT_BUDGET);
            let a = random_subset(g, 1 + rng.gen_range(0..g.order()), &mut rng);
            let b = random_subset(g, 1 + rng.gen_range(0..g.order()), &mut rng);
            let (lhs, _) = frobenius_lhs(g, &[&a, &b], 1, SampleMode::Exhaustive, &budget)?;
            let rhs = frobenius_rhs(g, t, &[&a, &b], 1, &budget)?;
            worst_rel = worst_rel.max((lhs - rhs).abs() / rhs.abs().max(1e-30));
        }
    }

    let mut worst_gap = 0f64;
    let mut mc_ok = true;
    for (si, spec) in ["Sn:4", "An:5"].iter().enumerate() {
        let e = bench.entry(spec);
        let (g, t) = (&e.group, &e.table);
        let mut rng = crng(seed, 0x0202 + si as u64);
        for k in 0..5u64 {
            let budget = Budget::new(DEFAULT_BUDGET);
            let size = |rng: &mut ChaCha20Rng| 3 + rng.gen_range(0..g.order() / 2);
            let a = random_subset(g, size(&mut rng), &mut rng);
            let b = random_subset(g, size(&mut rng), &mut rng);
            let c = random_subset(g, size(&mut rng), &mut rng);
            let mode = SampleMode::MonteCarlo { samples: 100_000, seed: seed ^ (k << 8) };
            let (lhs, se) = frobenius_lhs(g, &[&a, &b, &c], 2, mode, &budget)?;
            let rhs = frobenius_rhs(g, t, &[&a, &b, &c], 2, &budget)?;
            let gap = (lhs - rhs).abs();
            let allowed = 5.0 * se + 1e-9 * rhs.abs();
            if gap > allowed {
                mc_ok = false;
            }
            worst_gap = worst_gap.max(if se > 0.0 { gap / se } else { 0.0 });
        }
    }
    let pass = worst_rel <= 1e-6 && mc_ok;
    Ok((
        pass,
        format!(
            "order-1 moment exact vs spectral: rel {:.2e} over 7 groups x 20 pairs (tolerance 1e-6); order-2 sampled moment within 5 standard errors on 10 triples (worst {:.2} se)",
            worst_rel, worst_gap
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 3: the mixing criterion produces verified factorizations.

fn c03_mixing_criterion(bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let budget = Budget::new(DEFAULT_BUDGET);
    let mut per_group = Vec::new();
    let mut pass = true;
    for (si, spec) in ["An:5", "An:6"].iter().enumerate() {
        let e = bench.entry(spec);
        let (g, t) = (&e.group, &e.table);
        let mut successes = 0u32;
        for trial in 0..10u64 {
            let mut rng = crng(seed, 0x0301 + (si as u64) * 100 + trial);
            let size = (g.order() + 1) / 2;
            let a = random_subset(g, size, &mut rng);
            let search = ShiftSearch::Random { tuples: 200, seed: seed ^ (0x35 + trial) };
            let report = criterion_check(g, t, &[&a], 0.2, 8, search, &budget)?;
            let ok = report.hypothesis_holds
                && report.covered
                && report.witness.is_some()
                && report.linf.map_or(false, |d| d < 0.5);
            if ok {
                successes += 1;
            }
        }
        if successes < 9 {
            pass = false;
        }
        per_group.push(format!("{spec} {successes}/10"));
    }
    Ok((
        pass,
        format!(
            "half-density sets, eps 0.2, 8 factors: verified witnesses in {} (need at least 9/10 each)",
            per_group.join(", ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 4: the skew-product maximum meets the pair-statistic bound.

fn c04_skew_product_bound(bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let mut checked = 0u32;
    let mut violations = 0u32;
    let mut worst_ratio = f64::INFINITY;
    for (gi, e) in bench.entries.iter().enumerate() {
        let g = &e.group;
        let mut rng = crng(seed, 0x0401 + gi as u64);
        for _ in 0..100 {
            let budget = Budget::new(DEFAULT_BUDGET);
            let cap = g.order().min(60);
            let a = random_subset(g, 1 + rng.gen_range(0..cap), &mut rng);
            let b = random_subset(g, 1 + rng.gen_range(0..cap), &mut rng);
            let gamma = gamma_statistic(g, &a, &b, &budget)?;
            let pairs = BigRational::from_integer(BigInt::from((a.count() * b.count()) as u64));
            let bound = &pairs / &gamma;
            let best = max_skew_product(g, &a, &b, SkewStrategy::Exhaustive, &budget)?;
            let size = BigRational::from_integer(BigInt::from(best.size as u64));
            checked += 1;
            if size < bound {
                violations += 1;
            }
            if let (Some(s), Some(bv)) = (size.to_f64(), bound.to_f64()) {
                if bv > 0.0 {
                    worst_ratio = worst_ratio.min(s / bv);
                }
            }
        }
    }
    Ok((
        violations == 0,
        format!(
            "max skew product vs exact pair-statistic bound on {checked} pairs: {violations} violations, tightest max/bound ratio {worst_ratio:.3}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 5: the averaged skew product dominates the class term.

fn c05_class_expectation_bound(bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let mut checked = 0u32;
    let mut min_slack = f64::INFINITY;
    for (gi, e) in bench.entries.iter().enumerate() {
        let g = &e.group;
        let mut rng = crng(seed, 0x0501 + gi as u64);
        for _ in 0..100 {
            let budget = Budget::new(DEFAULT_BUDGET);
            let cap = g.order().min(48);
            let a = random_subset(g, 1 + rng.gen_range(0..cap), &mut rng);
            let b = random_subset(g, 1 + rng.gen_range(0..cap), &mut rng);
            let class = rng.gen_range(0..g.classes().len()) as u32;
            // Violations panic inside the check and surface as a criterion
            // failure through the harness.
            let (lhs, rhs) = expected_skew_product_check(g, &a, &b, class, &budget)?;
            checked += 1;
            if let (Some(l), Some(r)) = (lhs.to_f64(), rhs.to_f64()) {
                min_slack = min_slack.min(l - r);
            }
        }
    }
    Ok((
        true,
        format!(
            "averaged skew product dominated its class term on all {checked} triples (smallest slack {min_slack:.4})"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 6: character tables against combinatorial predictions.

fn factorial_u128(n: u32) -> u128 {
    (1..=n as u128).product()
}

fn c06_character_tables(_bench: &Bench, _seed: u64) -> Result<(bool, String)> {
    let budget = Budget::new(DEFAULT_BUDGET);

    // Numeric tables of the symmetric groups match the combinatorial
    // recursion row for row.
    let mut matched_rows = 0u32;
    let mut total_rows = 0u32;
    for n in 2..=6u32 {
        let g = build_group(&GroupSpec::Sym { n }, &BuildOptions::default())?;
        let t = character_table(&g, DEFAULT_CHAR_TOL, 777, &budget)?;
        let lambdas = Partition::all(n);
        let class_types: Vec<Vec<u32>> = g
            .classes()
            .iter()
            .map(|c| cycle_type_partition(g.perm(c.rep).expect("permutation group")).parts().to_vec())
            .collect();
        let mut used = vec![false; lambdas.len()];
        for row in 0..t.num_classes() {
            total_rows += 1;
            let hit = lambdas.iter().enumerate().position(|(li, lambda)| {
                !used[li]
                    && class_types.iter().enumerate().all(|(c, ty)| {
                        let predicted = mn_character(lambda, ty) as f64;
                        let got = t.chars[row][c];
                        (got.re - predicted).abs() <= 1e-8 && got.im.abs() <= 1e-8
                    })
            });
            if let Some(li) = hit {
                used[li] = true;
                matched_rows += 1;
            }
        }
    }
    let sym_ok = matched_rows == total_rows;

    // Degree squares sum to the group order, well past table range.
    let mut degrees_ok = true;
    for n in 1..=14u32 {
        let total: u128 = Partition::all(n).iter().map(|l| l.degree() * l.degree()).sum();
        if total != factorial_u128(n) {
            degrees_ok = false;
        }
    }

    // Alternating restriction: self-conjugate shapes split in half, conjugate
    // pairs fuse, and the numeric tables realize exactly that degree multiset.
    let mut alt_ok = true;
    for n in 3..=7u32 {
        let g = build_group(&GroupSpec::Alt { n }, &BuildOptions::default())?;
        let t = character_table(&g, DEFAULT_CHAR_TOL, 777, &budget)?;
        let mut expected: Vec<u64> = Vec::new();
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        for lambda in Partition::all(n) {
            if seen.contains(lambda.parts()) {
                continue;
            }
            let d = lambda.degree() as u64;
            if lambda.is_self_conjugate() {
                expected.push(d / 2);
                expected.push(d / 2);
            } else {
                expected.push(d);
                seen.insert(lambda.conjugate().parts().to_vec());
            }
            seen.insert(lambda.parts().to_vec());
        }
        expected.sort_unstable();
        let mut got = t.degrees.clone();
        got.sort_unstable();
        if got != expected {
            alt_ok = false;
        }
    }

    Ok((
        sym_ok && degrees_ok && alt_ok,
        format!(
            "symmetric tables matched the recursion on {matched_rows}/{total_rows} rows (n <= 6); degree squares summed to n! for n <= 14; alternating degree multisets split as predicted for n <= 7"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 7: representation zeta values.

fn c07_zeta_values(bench: &Bench, _seed: u64) -> Result<(bool, String)> {
    let e = bench.entry("An:5");
    let z2 = witten_zeta(&e.table, 2.0, true);
    // Degree list 1, 3, 3, 4, 5 summed independently of the table code.
    let oracle = 1.0 + 2.0 / 9.0 + 1.0 / 16.0 + 1.0 / 25.0;
    let value_ok = (z2 - oracle).abs() < 1e-6;

    let grid = [0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
    let mut monotone_ok = true;
    for e in &bench.entries {
        for include_trivial in [true, false] {
            let values: Vec<f64> =
                grid.iter().map(|&s| witten_zeta(&e.table, s, include_trivial)).collect();
            for w in values.windows(2) {
                if w[1] > w[0] + 1e-12 {
                    monotone_ok = false;
                }
            }
        }
    }
    Ok((
        value_ok && monotone_ok,
        format!(
            "zeta at 2 on the order-60 alternating table: {z2:.9} vs independent degree sum {oracle:.9}; monotone non-increasing on all 7 tables over 6 grid points"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 8: degree bounds, exact and per class.

fn c08_degree_bounds(_bench: &Bench, _seed: u64) -> Result<(bool, String)> {
    let mut dominated = 0u32;
    let mut dominance_violations = 0u32;
    for n in 1..=14u32 {
        for lambda in Partition::all(n) {
            if virtual_dominates_exact(&lambda) {
                dominated += 1;
            } else {
                dominance_violations += 1;
            }
        }
    }

    let mut in_scope = 0u32;
    let mut out_of_scope = 0u32;
    let mut bound_violations = 0u32;
    let mut min_margin = f64::INFINITY;
    for n in 5..=8u32 {
        match charbound_scan(n, ScanMode::LsBound)? {
            ScanTable::LsBound(rows) => {
                for row in rows {
                    if row.in_scope {
                        in_scope += 1;
                        min_margin = min_margin.min(row.margin);
                        if row.margin < -1e-9 {
                            bound_violations += 1;
                        }
                    } else {
                        out_of_scope += 1;
                    }
                }
            }
            _ => return Err(Error::InvalidParameters("unexpected scan shape".into())),
        }
    }

    Ok((
        dominance_violations == 0 && bound_violations == 0,
        format!(
            "virtual degree dominated the true degree exactly for all {dominated} shapes (n <= 14, {dominance_violations} violations); per-class bound held on {in_scope} in-scope pairs (5 <= n <= 8, min margin {min_margin:.3}, {bound_violations} violations); {out_of_scope} fixed-point-free pairs tabulated report-only"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 9: triple factorization through pointwise stabilizers.

fn c09_stabilizer_factorization(bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let i_set = [0usize, 1];
    let j_set = [2usize, 3];
    let k_set = [4usize, 5];
    let verify = |sigma: &prodlab::perm::Perm| -> Result<bool> {
        let (fi, fj, fk) = umvirate_triple_cover(sigma, &i_set, &j_set, &k_set)?;
        let composed = fi.compose(&fj).compose(&fk);
        let fixes = |p: &prodlab::perm::Perm, set: &[usize]| set.iter().all(|&x| p.apply(x) == x);
        Ok(composed == *sigma
            && fi.is_even()
            && fj.is_even()
            && fk.is_even()
            && fixes(&fi, &i_set)
            && fixes(&fj, &j_set)
            && fixes(&fk, &k_set))
    };

    let mut failures = 0u32;
    let mut checked = 0u32;

    let alt6 = bench.entry("An:6");
    for i in 0..alt6.group.order() as u32 {
        let sigma = alt6.group.perm(i).expect("permutation group").clone();
        checked += 1;
        if !verify(&sigma)? {
            failures += 1;
        }
    }

    for (di, degree) in [7usize, 8].into_iter().enumerate() {
        let mut rng = crng(seed, 0x0901 + di as u64);
        for _ in 0..1000 {
            let sigma = random_even_perm(degree, &mut rng);
            checked += 1;
            if !verify(&sigma)? {
                failures += 1;
            }
        }
    }

    Ok((
        failures == 0,
        format!(
            "pointwise-stabilizer triple factorization verified on {checked} even permutations (all of degree 6, 1000 random each at degrees 7 and 8): {failures} failures"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 10: rank census and rank-sum structure.

fn c10_rank_census(_bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let budget = Budget::new(DEFAULT_BUDGET);
    let mut problems: Vec<String> = Vec::new();

    // Exhaustive census per ambient.
    for (n, q) in [(1usize, 2u32), (2, 2), (2, 3), (3, 2), (3, 3), (4, 2)] {
        let f = Fq::new(q)?;
        let mut census = vec![0u64; n + 1];
        let mut total = 0u64;
        for m in enumerate_all(n, q) {
            census[m.rank(f)] += 1;
            total += 1;
        }
        if BigUint::from(total) != BigUint::from(q).pow((n * n) as u32) {
            problems.push(format!("census total at n={n} q={q}"));
        }
        for (r, &count) in census.iter().enumerate() {
            if count_rank(r, n, q)? != BigUint::from(count) {
                problems.push(format!("rank {r} count at n={n} q={q}"));
            }
        }
    }

    // Power-of-q sandwiches for the three closed-form counters.
    let four = BigUint::from(4u32);
    for q in [2u32, 3, 4, 5, 7, 8, 9] {
        let qb = BigUint::from(q);
        for big_d in 0..=5usize {
            for d in 0..=big_d {
                let inj = count_injections(d, big_d, q)?;
                let pow = qb.pow((d * big_d) as u32);
                if inj > pow || &inj * &four < pow {
                    problems.push(format!("injection sandwich d={d} D={big_d} q={q}"));
                }
                let sub = count_subspaces(d, big_d, q)?;
                let pow = qb.pow((d * (big_d - d)) as u32);
                if sub < pow || sub > &pow * &four {
                    problems.push(format!("subspace sandwich d={d} D={big_d} q={q}"));
                }
            }
        }
        for n in 1..=5usize {
            for r in 0..=n {
                let rk = count_rank(r, n, q)?;
                let pow = qb.pow((r * (2 * n - r)) as u32);
                if &rk * &four < pow || rk > &pow * &four {
                    problems.push(format!("rank sandwich r={r} n={n} q={q}"));
                }
            }
        }
    }

    // Conservation: summing the pair counts over targets weighted by rank
    // class sizes recovers the product of class sizes.
    for (n, q) in [(2usize, 2u32), (2, 3), (3, 2)] {
        for r in 0..=n {
            for s in 0..=n {
                let mut total = BigUint::zero();
                for t in 0..=n {
                    total += nsum_bruteforce(&[r, s], t, n, q, &budget)? * count_rank(t, n, q)?;
                }
                if total != count_rank(r, n, q)? * count_rank(s, n, q)? {
                    problems.push(format!("conservation r={r} s={s} n={n} q={q}"));
                }
            }
        }
    }

    // The count only depends on the target through its rank.
    for (n, q) in [(2usize, 2u32), (2, 3)] {
        let f = Fq::new(q)?;
        let mut rng = crng(seed, 0x0a01 + n as u64);
        for t in 0..=n {
            let rep = rank_representative(t, n, q)?;
            for r in 0..=n {
                for s in 0..=n {
                    let canonical = nsum_for_target(&[r, s], &rep, q, &budget)?;
                    let u = random_invertible(n, q, f, &mut rng);
                    let v = random_invertible(n, q, f, &mut rng);
                    let moved = u.mul(&rep, f).mul(&v, f);
                    if nsum_for_target(&[r, s], &moved, q, &budget)? != canonical {
                        problems.push(format!("representative dependence r={r} s={s} t={t} n={n} q={q}"));
                    }
                }
            }
        }
    }

    // Vanishing window: pair counts are zero outside |r-s| <= t <= r+s and
    // positive inside it.
    for (n, q) in [(2usize, 2u32), (2, 3), (3, 2)] {
        for r in 0..=n {
            for s in 0..=n {
                for t in 0..=n {
                    let count = nsum_bruteforce(&[r, s], t, n, q, &budget)?;
                    let inside = t + s >= r && t + r >= s && t <= r + s;
                    if inside && count.is_zero() {
                        problems.push(format!("unexpected zero at r={r} s={s} t={t} n={n} q={q}"));
                    }
                    if !inside && !count.is_zero() {
                        problems.push(format!("missed vanishing at r={r} s={s} t={t} n={n} q={q}"));
                    }
                }
            }
        }
    }

    problems.sort();
    let pass = problems.is_empty();
    let detail = if pass {
        "census exact on 6 ambients; sandwiches held for q <= 9; conservation, target-independence, and the vanishing window all exact".to_string()
    } else {
        format!("{} problems: {}", problems.len(), problems.join("; "))
    };
    Ok((pass, detail))
}

// ---------------------------------------------------------------------------
// Criterion 11: rank-sum ratios stay within their envelopes.

fn c11_rank_sum_ratios(_bench: &Bench, _seed: u64) -> Result<(bool, String)> {
    let mut pass = true;
    let mut notes: Vec<String> = Vec::new();
    for (n, q) in [(2usize, 2u32), (2, 3), (3, 2)] {
        let budget = Budget::new(DEFAULT_BUDGET);
        let r_min = (2 * n).div_ceil(3);
        let scan = nsum_ratio_scan(n, q, r_min, &budget)?;
        let ok = scan.triple_max.is_finite() && scan.triple_max > 0.0 && scan.triple_max <= 100.0;
        if !ok {
            pass = false;
        }
        notes.push(format!("n={n} q={q}: triple max {:.3}", scan.triple_max));
    }
    // The largest case is optional: attempted under a reduced budget and
    // accepted either way, as long as a completed scan stays bounded.
    match nsum_ratio_scan(3, 3, 2, &Budget::new(200_000_000)) {
        Ok(scan) => {
            let ok = scan.triple_max.is_finite() && scan.triple_max <= 100.0;
            if !ok {
                pass = false;
            }
            notes.push(format!("n=3 q=3: triple max {:.3}", scan.triple_max));
        }
        Err(Error::BudgetExceeded { .. }) => {
            notes.push("n=3 q=3: skipped under reduced budget".to_string());
        }
        Err(e) => return Err(e),
    }
    Ok((pass, format!("rank-sum ratios bounded by 100: {}", notes.join("; "))))
}

// ---------------------------------------------------------------------------
// Criterion 12: six-factor patterned decomposition.

fn c12_six_factor_decomposition(_bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let mut failures = 0u32;
    let mut checked = 0u32;
    for (ci, (d, q)) in [(5usize, 2u32), (5, 3), (7, 2)].into_iter().enumerate() {
        let f = Fq::new(q)?;
        let mut rng = crng(seed, 0x0c01 + ci as u64);
        for _ in 0..100 {
            let t = random_unipotent(d, q, &mut rng);
            checked += 1;
            match akblcm_solve(&t, q) {
                Ok(factors) => {
                    if factors.product(f) != t {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    Ok((
        failures == 0,
        format!(
            "six-factor decomposition recovered {checked} random unipotent inputs across sides 5 and 7, fields of order 2 and 3: {failures} failures"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 13: additive energy against a quadruple-loop oracle.

/// Independent oracle: walk every tuple with matrix arithmetic (no cell
/// tables), histogram the sums, and square-sum the histogram.
fn energy_oracle(n: usize, q: u32, sets: &[Vec<u64>]) -> Result<BigUint> {
    let f = Fq::new(q)?;
    let size = (q as u64).pow((n * n) as u32) as usize;
    let mut hist = vec![0u64; size];
    let mut stack: Vec<usize> = vec![0; sets.len()];
    loop {
        let mut acc = FqMat::zero(n);
        for (si, &pick) in stack.iter().enumerate() {
            acc = acc.add(&FqMat::from_index(n, q, sets[si][pick]), f);
        }
        hist[acc.to_index(q) as usize] += 1;
        let mut level = sets.len();
        loop {
            if level == 0 {
                let energy: u128 = hist.iter().map(|&h| (h as u128) * (h as u128)).sum();
                return Ok(BigUint::from(energy));
            }
            level -= 1;
            stack[level] += 1;
            if stack[level] < sets[level].len() {
                break;
            }
            stack[level] = 0;
        }
    }
}

fn c13_additive_energy(_bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let budget = Budget::new(DEFAULT_BUDGET);
    let mut mismatches = 0u32;
    let mut checked = 0u32;
    for (ai, (n, q)) in [(2usize, 2u32), (2, 3)].into_iter().enumerate() {
        let ambient = Ambient::Mat { n, q };
        let size = (q as u64).pow((n * n) as u32);
        let mut rng = crng(seed, 0x0d01 + ai as u64);
        for inst in 0..50 {
            let set_count = 2 + (inst % 2) as usize;
            let sets: Vec<Vec<u64>> = (0..set_count)
                .map(|_| {
                    let len = 2 + rng.gen_range(0..7usize.min(size as usize - 1));
                    let mut chosen: Vec<u64> = Vec::new();
                    while chosen.len() < len {
                        let x = rng.gen_range(0..size);
                        if !chosen.contains(&x) {
                            chosen.push(x);
                        }
                    }
                    chosen.sort_unstable();
                    chosen
                })
                .collect();
            checked += 1;
            let fast = additive_energy(&ambient, &sets, &budget)?;
            let slow = energy_oracle(n, q, &sets)?;
            if fast != slow {
                mismatches += 1;
            }
            // The sumset bound asserts internally; a violation panics into
            // the harness.
            let (sum_size, bound) = sumset_energy_check(&ambient, &sets, &budget)?;
            if BigRational::from_integer(BigInt::from(sum_size)) < bound {
                mismatches += 1;
            }
        }
    }
    Ok((
        mismatches == 0,
        format!(
            "gathered energy equal to the quadruple-loop oracle on {checked} instances over 2x2 matrices (fields of order 2 and 3), sumset bound held: {mismatches} mismatches"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 14: dilated covers of matrix spaces.

fn c14_dilate_covers(_bench: &Bench, seed: u64) -> Result<(bool, String)> {
    let budget = Budget::new(DEFAULT_BUDGET);

    // The punctured line over the order-7 field covers in at most 3 summands.
    let punctured: Vec<u64> = (1..7).collect();
    let line = dilate_cover_search(&[punctured], 1, 7, 3, seed, &budget)?;
    let line_mu = line.as_ref().map(|c| c.mu);
    let line_ok = line.map_or(false, |c| c.mu <= 3 && !c.pairs.is_empty());

    // Thirteen of the sixteen 2x2 binary matrices cover in at most 16.
    let mut grid_ok = true;
    let mut grid_mus: Vec<usize> = Vec::new();
    let mut rng = crng(seed, 0x0e01);
    for _ in 0..3 {
        let mut chosen: Vec<u64> = Vec::new();
        while chosen.len() < 13 {
            let x = rng.gen_range(0..16u64);
            if !chosen.contains(&x) {
                chosen.push(x);
            }
        }
        chosen.sort_unstable();
        match dilate_cover_search(&[chosen], 2, 2, 16, seed, &budget)? {
            Some(cover) => {
                grid_mus.push(cover.mu);
                if cover.mu > 16 {
                    grid_ok = false;
                }
            }
            None => grid_ok = false,
        }
    }
    let mus: Vec<String> = grid_mus.iter().map(|m| m.to_string()).collect();
    Ok((
        line_ok && grid_ok,
        format!(
            "punctured order-7 line covered with mu = {} (cap 3); three random 13-element 2x2 binary sets covered with mu = [{}] (cap 16)",
            line_mu.map_or("none".to_string(), |m| m.to_string()),
            mus.join(", ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// Assembly.

type CriterionFn = fn(&Bench, u64) -> Result<(bool, String)>;

const FULL_ROSTER: [(u32, &str, Option<f64>, CriterionFn); 14] = [
    (1, "fourier-identities", Some(60.0), c01_fourier_identities),
    (2, "shifted-moments", Some(180.0), c02_frobenius_moments),
    (3, "mixing-criterion", None, c03_mixing_criterion),
    (4, "skew-product-bound", None, c04_skew_product_bound),
    (5, "class-expectation-bound", None, c05_class_expectation_bound),
    (6, "character-tables", None, c06_character_tables),
    (7, "zeta-values", None, c07_zeta_values),
    (8, "degree-bounds", None, c08_degree_bounds),
    (9, "stabilizer-factorization", None, c09_stabilizer_factorization),
    (10, "rank-census", None, c10_rank_census),
    (11, "rank-sum-ratios", Some(180.0), c11_rank_sum_ratios),
    (12, "six-factor-decomposition", None, c12_six_factor_decomposition),
    (13, "additive-energy", None, c13_additive_energy),
    (14, "dilate-covers", None, c14_dilate_covers),
];

/// All measurement criteria once. Shared context failures degrade to a
/// uniformly failing report instead of erroring out.
pub fn run_full(seed: u64) -> BatteryReport {
    let bench = match build_bench() {
        Ok(b) => b,
        Err(e) => {
            let criteria = FULL_ROSTER
                .iter()
                .map(|&(id, name, _, _)| CriterionOutcome {
                    id,
                    name,
                    pass: false,
                    detail: format!("shared context failed to build: {e}"),
                })
                .collect();
            return BatteryReport::seal("full", criteria);
        }
    };
    let criteria = FULL_ROSTER
        .iter()
        .map(|&(id, name, cap, body)| run(id, name, cap, || body(&bench, seed)))
        .collect();
    BatteryReport::seal("full", criteria)
}

/// The full battery twice, then a 15th criterion asserting the two passes
/// serialized to identical bytes and the first stayed inside the overall
/// wall budget.
pub fn run_suite_full(seed: u64) -> BatteryReport {
    let start = Instant::now();
    let first = run_full(seed);
    let elapsed = start.elapsed().as_secs_f64();
    let second = run_full(seed);
    let first_bytes = serde_json::to_vec(&first).expect("battery serializes");
    let second_bytes = serde_json::to_vec(&second).expect("battery serializes");
    let identical = first_bytes == second_bytes;
    let within_budget = elapsed <= 600.0;
    let mut criteria = first.criteria;
    criteria.push(CriterionOutcome {
        id: 15,
        name: "determinism",
        pass: identical && within_budget,
        detail: format!(
            "two identically seeded passes serialized to {} bytes: {}{}",
            first_bytes.len(),
            if identical { "identical" } else { "DIFFERENT" },
            if within_budget { "" } else { "; wall budget exceeded" },
        ),
    });
    BatteryReport::seal("full", criteria)
}

// ---------------------------------------------------------------------------
// Smoke battery: fast identity checks for the quick suite level.

fn smoke_structure() -> Result<(bool, String)> {
    let mut ok = true;
    for (spec, order, classes) in [("Sn:3", 6usize, 3usize), ("Sn:4", 24, 5), ("An:4", 12, 4)] {
        let g = build_group(&GroupSpec::parse(spec)?, &BuildOptions::default())?;
        let class_total: usize = g.classes().iter().map(|c| c.size).sum();
        ok &= g.order() == order && g.classes().len() == classes && class_total == order;
    }
    Ok((ok, "orders, class counts, and class equations on three small groups".into()))
}

fn smoke_fourier(seed: u64) -> Result<(bool, String)> {
    let budget = Budget::new(DEFAULT_BUDGET);
    let mut worst = 0f64;
    for spec in ["Sn:3", "Sn:4", "An:4"] {
        let g = build_group(&GroupSpec::parse(spec)?, &BuildOptions::default())?;
        let t = character_table(&g, DEFAULT_CHAR_TOL, TABLE_SEED, &budget)?;
        let mut rng = crng(seed, 0xf0);
        for _ in 0..5 {
            let values: Vec<Complex64> = (0..g.order())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let f = GroupFunction::new(&g, values)?;
            let total: f64 =
                (0..t.num_classes()).map(|r| project(&g, &t, &f, r).map(|p| p.norm_l2_sq()).unwrap_or(f64::NAN)).sum();
            worst = worst.max(rel_err(total, f.norm_l2_sq()));
        }
    }
    Ok((worst <= 1e-8, format!("Parseval rel {worst:.2e} on 15 random functions")))
}

fn smoke_census() -> Result<(bool, String)> {
    let budget = Budget::new(DEFAULT_BUDGET);
    let f = Fq::new(2)?;
    let mut census = vec![0u64; 3];
    for m in enumerate_all(2, 2) {
        census[m.rank(f)] += 1;
    }
    let mut ok = census == vec![1, 9, 6];
    for r in 0..=2usize {
        ok &= count_rank(r, 2, 2)? == BigUint::from(census[r]);
    }
    // One conservation identity.
    let mut total = BigUint::zero();
    for t in 0..=2usize {
        total += nsum_bruteforce(&[1, 1], t, 2, 2, &budget)? * count_rank(t, 2, 2)?;
    }
    ok &= total == count_rank(1, 2, 2)? * count_rank(1, 2, 2)?;
    Ok((ok, "2x2 binary rank census 1/9/6 with one conservation identity".into()))
}

fn smoke_factorizations(seed: u64) -> Result<(bool, String)> {
    let f = Fq::new(2)?;
    let mut ok = true;
    for t in enumerate_all(3, 2).filter(|m| m.is_upper_unitriangular()) {
        let factors = akblcm_solve(&t, 2)?;
        ok &= factors.product(f) == t;
    }
    let mut rng = crng(seed, 0xf1);
    for _ in 0..50 {
        let sigma = random_even_perm(6, &mut rng);
        let (fi, fj, fk) = umvirate_triple_cover(&sigma, &[0, 1], &[2, 3], &[4, 5])?;
        ok &= fi.compose(&fj).compose(&fk) == sigma;
    }
    Ok((ok, "six-factor side-3 decompositions and 50 stabilizer triples".into()))
}

/// Fast identity subset for `suite smoke`.
pub fn run_smoke(seed: u64) -> BatteryReport {
    let criteria = vec![
        run(1, "smoke-structure", Some(60.0), smoke_structure),
        run(2, "smoke-fourier", Some(60.0), || smoke_fourier(seed)),
        run(3, "smoke-census", Some(60.0), smoke_census),
        run(4, "smoke-factorizations", Some(60.0), || smoke_factorizations(seed)),
    ];
    BatteryReport::seal("smoke", criteria)
}
