//! Numerical character tables by random self-adjoint class-sum operators.
//!
//! The class-multiplication coefficients give k commuting k-by-k integer
//! matrices whose joint eigenvectors are the irreducible characters (scaled).
//! A random complex combination chosen conjugate-symmetrically is self-adjoint
//! in the class-size-weighted inner product, so one real symmetric eigenproblem
//! (the 2k-by-2k real embedding of the Hermitian matrix) splits all characters
//! at once with probability 1; failures to split within tolerance are retried
//! with fresh coefficients.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::group::Group;

/// Numerical character table: `chars[r][j]` is the value of the `r`-th
/// irreducible character on class `j`. Rows are sorted by degree, then by
/// values in class order (real part, then imaginary, rounded to 1e-6).
#[derive(Clone, Debug)]
pub struct CharTable {
    pub class_sizes: Vec<usize>,
    pub class_reps: Vec<u32>,
    pub chars: Vec<Vec<Complex64>>,
    pub degrees: Vec<u64>,
    /// Row index of the trivial character (all values 1).
    pub trivial_row: usize,
    /// Tolerance the table was certified against.
    pub tolerance: f64,
}

/// Default certification tolerance.
pub const DEFAULT_CHAR_TOL: f64 = 1e-8;
const SPLIT_ATTEMPTS: u32 = 8;
/// Eigenvalues closer than this are treated as an unsplit cluster.
const CLUSTER_GAP: f64 = 1e-7;

/// Class-multiplication coefficients `a[i][j][l]`: the number of ways an
/// element of class `l` factors as (class-`i` element) * (class-`j` element)
/// ... counted as pairs with the first factor ranging over class `i`.
/// Computed in one pass of `k * |G|` products.
pub fn class_coefficients(g: &Group, budget: &Budget) -> Result<Vec<Vec<Vec<u64>>>> {
    let k = g.classes().len();
    let n = g.order();
    budget.charge((k * n) as u64)?;
    let mut a = vec![vec![vec![0u64; k]; k]; k];
    for (l, cl) in g.classes().iter().enumerate() {
        let z = cl.rep;
        // x * y = z with x in class i forces y = x^-1 z.
        for x in 0..n as u32 {
            let i = g.class_of(x) as usize;
            let y = g.mul(g.inv(x), z);
            let j = g.class_of(y) as usize;
            a[i][j][l] += 1;
        }
    }
    Ok(a)
}

struct Embedded {
    /// Real 2k-by-2k embedding [[A, -B], [B, A]] of the Hermitian k-by-k H.
    m: DMatrix<f64>,
}

fn embed_hermitian(h: &[Vec<Complex64>]) -> Result<Embedded> {
    let k = h.len();
    let mut residual = 0f64;
    for i in 0..k {
        for j in 0..k {
            residual = residual.max((h[i][j] - h[j][i].conj()).norm());
        }
    }
    if residual > 1e-6 {
        return Err(Error::ToleranceViolation {
            context: "weighted class operator is not Hermitian".into(),
            residual,
            tolerance: 1e-6,
        });
    }
    let mut m = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            // Symmetrize explicitly so the eigensolver sees an exact
            // symmetric matrix despite roundoff.
            let re = 0.5 * (h[i][j].re + h[j][i].re);
            let im = 0.5 * (h[i][j].im - h[j][i].im);
            m[(i, j)] = re;
            m[(k + i, k + j)] = re;
            m[(i, k + j)] = -im;
            m[(k + i, j)] = im;
        }
    }
    Ok(Embedded { m })
}

/// Compute the character table, certified against `tolerance` (valid range
/// [1e-12, 1e-6]: degree snapping within tolerance x degree, orthogonality
/// within tolerance x scale). Deterministic for a fixed seed.
pub fn character_table(
    g: &Group,
    tolerance: f64,
    seed: u64,
    budget: &Budget,
) -> Result<CharTable> {
    if !(1e-12..=1e-6).contains(&tolerance) {
        return Err(Error::InvalidParameters(format!(
            "tolerance {:.3e} outside [1e-12, 1e-6]",
            tolerance
        )));
    }
    let k = g.classes().len();
    let n = g.order() as f64;
    let sizes: Vec<usize> = g.classes().iter().map(|c| c.size).collect();
    let a = class_coefficients(g, budget)?;

    // Scaled operators M_i with (M_i)_{jl} = a[i][j][l] / h_i have joint
    // eigenvalues chi(g_i) / chi(1), all bounded by 1 in modulus.
    let mut ops: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k);
    for i in 0..k {
        let hi = sizes[i] as f64;
        let mut m = vec![vec![0f64; k]; k];
        for j in 0..k {
            for l in 0..k {
                m[j][l] = a[i][j][l] as f64 / hi;
            }
        }
        ops.push(m);
    }
    let inv_class: Vec<usize> =
        g.classes().iter().map(|c| c.inverse_class as usize).collect();

    let mut last_fail = String::new();
    for attempt in 0..SPLIT_ATTEMPTS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        // t_{i*} = conj(t_i) makes T = sum t_i M_i self-adjoint in the
        // h-weighted inner product.
        let mut t = vec![Complex64::new(0.0, 0.0); k];
        let mut assigned = vec![false; k];
        for i in 0..k {
            if assigned[i] {
                continue;
            }
            let istar = inv_class[i];
            if istar == i {
                t[i] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
                assigned[i] = true;
            } else {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                t[i] = z;
                t[istar] = z.conj();
                assigned[i] = true;
                assigned[istar] = true;
            }
        }
        let mut big = vec![vec![Complex64::new(0.0, 0.0); k]; k];
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    big[j][l] += t[i] * ops[i][j][l];
                }
            }
        }
        // The joint eigenvectors u_j ~ h_j chi(g_j) are orthogonal in the
        // 1/h-weighted inner product, so H = W^-1 T W with W = diag(sqrt(h_j))
        // is Hermitian.
        let w: Vec<f64> = sizes.iter().map(|&h| (h as f64).sqrt()).collect();
        let mut h = vec![vec![Complex64::new(0.0, 0.0); k]; k];
        for j in 0..k {
            for l in 0..k {
                h[j][l] = big[j][l] * (w[l] / w[j]);
            }
        }
        let emb = match embed_hermitian(&h) {
            Ok(e) => e,
            Err(_) => continue,
        };
        let eig = SymmetricEigen::new(emb.m);
        match extract_characters(g, &eig, &ops, &sizes, k, n) {
            Ok(mut chars) => {
                if let Some(table) = finalize_table(g, &mut chars, &sizes, tolerance) {
                    match certify(&table, g) {
                        Ok(()) => return Ok(table),
                        Err(e) => last_fail = e.to_string(),
                    }
                } else {
                    last_fail = "degree snapping or trivial-row detection failed".into();
                }
            }
            Err(e) => last_fail = e.to_string(),
        }
    }
    Err(Error::EigenSplitFailure {
        attempts: SPLIT_ATTEMPTS,
        detail: format!("could not split {} classes of {}: {}", k, g.spec(), last_fail),
    })
}

/// Pull k complex eigenvectors out of the 2k real embedding, verify each is a
/// simultaneous eigenvector of every scaled operator, and convert to
/// characters.
fn extract_characters(
    g: &Group,
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    ops: &[Vec<Vec<f64>>],
    sizes: &[usize],
    k: usize,
    n: f64,
) -> Result<Vec<Vec<Complex64>>> {
    // The embedding doubles every eigenvalue: eigenvectors come in pairs
    // (x, y) ~ (-y, x) encoding v = x + i y. Sort by eigenvalue and take
    // every other vector from each 2-cluster.
    let mut order: Vec<usize> = (0..2 * k).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap()
    });
    let mut vecs: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    let mut idx = 0;
    while idx < 2 * k {
        let col = eig.eigenvectors.column(order[idx]);
        let mut v: Vec<Complex64> = (0..k)
            .map(|j| Complex64::new(col[j], col[k + j]))
            .collect();
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-9 {
            // x + iy degenerate; use the partner vector of the pair.
            let col2 = eig.eigenvectors.column(order[idx + 1]);
            v = (0..k).map(|j| Complex64::new(col2[j], col2[k + j])).collect();
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-9 {
            return Err(Error::EigenSplitFailure {
                attempts: 1,
                detail: "degenerate embedded eigenvector".into(),
            });
        }
        for z in &mut v {
            *z /= norm;
        }
        // Reject if the pair's eigenvalues did not cluster as expected.
        if idx + 1 >= 2 * k
            || (eig.eigenvalues[order[idx]] - eig.eigenvalues[order[idx + 1]]).abs()
                > CLUSTER_GAP
        {
            return Err(Error::EigenSplitFailure {
                attempts: 1,
                detail: "embedded eigenvalues did not pair".into(),
            });
        }
        // Distinct characters must not share this random eigenvalue.
        if idx + 2 < 2 * k
            && (eig.eigenvalues[order[idx]] - eig.eigenvalues[order[idx + 2]]).abs()
                < CLUSTER_GAP
        {
            return Err(Error::EigenSplitFailure {
                attempts: 1,
                detail: "random combination failed to split two characters".into(),
            });
        }
        vecs.push(v);
        idx += 2;
    }

    // Undo the conjugation: eigenvectors of H correspond to u = W v, whose
    // entry j is proportional to h_j chi(g_j). Recover the character from the
    // simultaneous eigenvalues chi(g_i)/chi(1) instead, which is numerically
    // cleaner: ratio_i = (M_i u)_j / u_j at a stable j.
    let w: Vec<f64> = sizes.iter().map(|&h| (h as f64).sqrt()).collect();
    let id_class = g.class_of(g.identity()) as usize;
    let mut chars = Vec::with_capacity(k);
    for v in vecs {
        let u: Vec<Complex64> = (0..k).map(|j| v[j] * w[j]).collect();
        // Eigenvalue of M_i on u gives chi(g_i)/chi(1).
        let mut ratios = vec![Complex64::new(0.0, 0.0); k];
        // Pick the largest-|u_j| coordinate for stability.
        let j0 = (0..k)
            .max_by(|&a, &b| u[a].norm().partial_cmp(&u[b].norm()).unwrap())
            .unwrap();
        for i in 0..k {
            let mut s = Complex64::new(0.0, 0.0);
            for l in 0..k {
                s += ops[i][j0][l] * u[l];
            }
            ratios[i] = s / u[j0];
            // Verify u is an eigenvector of M_i everywhere, not just at j0.
            let mut worst = 0f64;
            for j in 0..k {
                let mut mj = Complex64::new(0.0, 0.0);
                for l in 0..k {
                    mj += ops[i][j][l] * u[l];
                }
                worst = worst.max((mj - ratios[i] * u[j]).norm());
            }
            if worst > 1e-6 {
                return Err(Error::EigenSplitFailure {
                    attempts: 1,
                    detail: format!("joint eigenvector residual {:.2e}", worst),
                });
            }
        }
        // Degree from the second orthogonality relation:
        // sum_i h_i |chi(g_i)|^2 = |G| with chi(g_i) = d * ratio_i.
        let mut s = 0f64;
        for i in 0..k {
            s += sizes[i] as f64 * ratios[i].norm_sqr();
        }
        let d = (n / s).sqrt();
        let mut chi: Vec<Complex64> = ratios.iter().map(|r| r * d).collect();
        // Phase convention: identity value is real positive (it equals d).
        let phase = chi[id_class] / chi[id_class].norm();
        for z in &mut chi {
            *z /= phase;
        }
        chars.push(chi);
    }
    Ok(chars)
}

fn finalize_table(
    g: &Group,
    chars: &mut Vec<Vec<Complex64>>,
    sizes: &[usize],
    tolerance: f64,
) -> Option<CharTable> {
    let id_class = g.class_of(g.identity()) as usize;
    let mut degrees = Vec::with_capacity(chars.len());
    for chi in chars.iter_mut() {
        let d = chi[id_class].re;
        let snapped = d.round();
        if snapped < 1.0 || (d - snapped).abs() > tolerance * snapped {
            return None;
        }
        // Rescale so the degree is exactly integral.
        let scale = snapped / d;
        for z in chi.iter_mut() {
            *z *= scale;
        }
        degrees.push(snapped as u64);
    }
    let mut order: Vec<usize> = (0..chars.len()).collect();
    let key = |r: usize| -> Vec<(i64, i64)> {
        chars[r]
            .iter()
            .map(|z| ((z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64))
            .collect()
    };
    order.sort_by(|&a, &b| degrees[a].cmp(&degrees[b]).then_with(|| key(a).cmp(&key(b))));
    let chars: Vec<Vec<Complex64>> = order.iter().map(|&r| chars[r].clone()).collect();
    let degrees: Vec<u64> = order.iter().map(|&r| degrees[r]).collect();
    // The trivial character must appear exactly once.
    let trivial_rows: Vec<usize> = (0..chars.len())
        .filter(|&r| chars[r].iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-6))
        .collect();
    let &[trivial_row] = trivial_rows.as_slice() else {
        return None;
    };
    Some(CharTable {
        class_sizes: sizes.to_vec(),
        class_reps: g.classes().iter().map(|c| c.rep).collect(),
        chars,
        degrees,
        trivial_row,
        tolerance,
    })
}

/// Hard checks a correct table must pass: degree sum of squares, row
/// orthogonality (weighted), column orthogonality, trivial-row uniqueness
/// (and, for groups presumed simple, uniqueness of degree 1 outright).
fn certify(t: &CharTable, g: &Group) -> Result<()> {
    let n = g.order() as f64;
    let k = t.chars.len();
    let tol = t.tolerance;
    let sum_sq: u64 = t.degrees.iter().map(|d| d * d).sum();
    if sum_sq != g.order() as u64 {
        return Err(Error::ToleranceViolation {
            context: format!("degree square sum {} != group order {}", sum_sq, g.order()),
            residual: (sum_sq as f64 - n).abs(),
            tolerance: 0.0,
        });
    }
    for r in 0..k {
        for s in 0..k {
            let mut ip = Complex64::new(0.0, 0.0);
            for j in 0..k {
                ip += t.class_sizes[j] as f64 * t.chars[r][j] * t.chars[s][j].conj();
            }
            ip /= n;
            let target = if r == s { 1.0 } else { 0.0 };
            let residual = (ip - Complex64::new(target, 0.0)).norm();
            if residual > tol {
                return Err(Error::ToleranceViolation {
                    context: format!("row orthogonality ({}, {})", r, s),
                    residual,
                    tolerance: tol,
                });
            }
        }
    }
    for j in 0..k {
        for l in 0..k {
            let mut ip = Complex64::new(0.0, 0.0);
            for r in 0..k {
                ip += t.chars[r][j] * t.chars[r][l].conj();
            }
            let target = if j == l { n / t.class_sizes[j] as f64 } else { 0.0 };
            let residual = (ip - Complex64::new(target, 0.0)).norm();
            let scale = target.abs().max(1.0);
            if residual > tol * scale {
                return Err(Error::ToleranceViolation {
                    context: format!("column orthogonality ({}, {})", j, l),
                    residual,
                    tolerance: tol * scale,
                });
            }
        }
    }
    if g.spec().presumed_simple() {
        let ones = t.degrees.iter().filter(|&&d| d == 1).count();
        if ones != 1 {
            return Err(Error::ToleranceViolation {
                context: format!("{} degree-1 rows on a perfect group", ones),
                residual: ones as f64 - 1.0,
                tolerance: 0.0,
            });
        }
    }
    Ok(())
}

impl CharTable {
    pub fn num_classes(&self) -> usize {
        self.chars.len()
    }

    /// Value of character `r` on the class of element `x`.
    pub fn value(&self, g: &Group, r: usize, x: u32) -> Complex64 {
        self.chars[r][g.class_of(x) as usize]
    }

    /// True when every value of row `r` is real within tolerance.
    pub fn is_real_row(&self, r: usize) -> bool {
        self.chars[r].iter().all(|z| z.im.abs() < 1e-7)
    }
}

/// `sum_chi chi(1)^{-s}` over the irreducible characters; all degrees are
/// known exactly after snapping, so this is a finite sum evaluated in f64.
/// With `include_trivial` false the trivial character is dropped, which for
/// a group with a unique degree-1 character leaves the mixing-relevant part.
pub fn witten_zeta(t: &CharTable, s: f64, include_trivial: bool) -> f64 {
    assert!(s > 0.0, "zeta exponent must be positive");
    t.degrees
        .iter()
        .enumerate()
        .filter(|&(r, _)| include_trivial || r != t.trivial_row)
        .map(|(_, &d)| (d as f64).powf(-s))
        .sum()
}
