//! Finite group construction with dense element indexing.
//!
//! A built group stores its elements in canonical sorted order (image arrays
//! for permutations, row-major entry arrays for matrices) so that indices are
//! stable across runs. Products are resolved through the canonical form; a
//! full multiplication table is materialized only for small orders.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::bitset::BitSet;
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::fq::Fq;
use crate::fqmat::FqMat;
use crate::perm::Perm;

/// Default order cap; rejects anything past the desk scale.
pub const DEFAULT_ORDER_CAP: u64 = 10_080;
/// Absolute ceiling no configuration may lift.
pub const HARD_ORDER_MAX: u64 = 20_000;
/// Largest order for which the full multiplication table is materialized.
pub const MUL_TABLE_MAX: usize = 2_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    Sym { n: u32 },
    Alt { n: u32 },
    Sl { n: u32, q: u32 },
    Psl { n: u32, q: u32 },
    Cayley { path: String },
}

impl GroupSpec {
    /// Parse `"Sn:5"`, `"An:6"`, `"SL:3,2"`, `"PSL:2,7"`, `"cayley:<path>"`.
    pub fn parse(s: &str) -> Result<GroupSpec> {
        let bad = || Error::InvalidParameters(format!("unrecognized group spec {:?}", s));
        let (head, rest) = s.split_once(':').ok_or_else(bad)?;
        let parse_n = |t: &str| t.trim().parse::<u32>().map_err(|_| bad());
        match head {
            "Sn" => Ok(GroupSpec::Sym { n: parse_n(rest)? }),
            "An" => Ok(GroupSpec::Alt { n: parse_n(rest)? }),
            "SL" | "PSL" => {
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                let (n, q) = (parse_n(a)?, parse_n(b)?);
                if head == "SL" {
                    Ok(GroupSpec::Sl { n, q })
                } else {
                    Ok(GroupSpec::Psl { n, q })
                }
            }
            "cayley" => Ok(GroupSpec::Cayley { path: rest.to_string() }),
            _ => Err(bad()),
        }
    }

    pub fn format(&self) -> String {
        match self {
            GroupSpec::Sym { n } => format!("Sn:{}", n),
            GroupSpec::Alt { n } => format!("An:{}", n),
            GroupSpec::Sl { n, q } => format!("SL:{},{}", n, q),
            GroupSpec::Psl { n, q } => format!("PSL:{},{}", n, q),
            GroupSpec::Cayley { path } => format!("cayley:{}", path),
        }
    }

    /// Order by formula; `None` for Cayley tables (order comes from the file).
    pub fn predicted_order(&self) -> Option<u64> {
        fn factorial(n: u32) -> u64 {
            (1..=n as u64).product()
        }
        fn sl_order(n: u32, q: u32) -> u64 {
            // q^(n(n-1)/2) * prod_{i=2..n} (q^i - 1)
            let q = q as u64;
            let mut o = q.pow(n * (n - 1) / 2);
            for i in 2..=n {
                o *= q.pow(i) - 1;
            }
            o
        }
        match *self {
            GroupSpec::Sym { n } => Some(factorial(n)),
            GroupSpec::Alt { n } => Some(if n >= 2 { factorial(n) / 2 } else { 1 }),
            GroupSpec::Sl { n, q } => Some(sl_order(n, q)),
            GroupSpec::Psl { n, q } => {
                Some(sl_order(n, q) / gcd(n as u64, (q - 1) as u64))
            }
            GroupSpec::Cayley { .. } => None,
        }
    }

    /// Whether the family member is a known nonabelian simple group. Nothing
    /// is verified algorithmically; Cayley groups are never presumed simple.
    pub fn presumed_simple(&self) -> bool {
        match *self {
            GroupSpec::Alt { n } => n >= 5,
            GroupSpec::Psl { n, q } => !matches!((n, q), (2, 2) | (2, 3)),
            // SL coincides with PSL exactly when the center is trivial.
            GroupSpec::Sl { n, q } => {
                gcd(n as u64, (q - 1) as u64) == 1 && !matches!((n, q), (2, 2) | (2, 3))
            }
            GroupSpec::Sym { .. } | GroupSpec::Cayley { .. } => false,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            GroupSpec::Sym { n } | GroupSpec::Alt { n } => {
                if n < 1 || n > 16 {
                    return Err(Error::InvalidParameters(format!(
                        "degree {} outside 1..=16",
                        n
                    )));
                }
            }
            GroupSpec::Sl { n, q } | GroupSpec::Psl { n, q } => {
                if n < 2 {
                    return Err(Error::InvalidParameters("matrix dimension must be >= 2".into()));
                }
                Fq::new(q)?;
            }
            GroupSpec::Cayley { .. } => {}
        }
        Ok(())
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub order_cap: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { order_cap: DEFAULT_ORDER_CAP }
    }
}

#[derive(Clone, Debug)]
pub struct ClassInfo {
    pub rep: u32,
    pub size: usize,
    pub members: BitSet,
    /// Class containing the inverses of this class.
    pub inverse_class: u32,
}

enum Carrier {
    Perm { n: usize, elems: Vec<Perm> },
    Mat { fq: &'static Fq, elems: Vec<FqMat>, psl_scalars: Vec<u32> },
    Cayley { table: Vec<u32>, order: usize },
}

pub struct Group {
    spec: GroupSpec,
    order: usize,
    carrier: Carrier,
    /// Packed canonical form of element `i`; sorted because packing is
    /// monotone in the canonical order, so index lookup is a binary search.
    packed: Vec<u64>,
    mul_table: Option<Vec<u32>>,
    identity: u32,
    inv: Vec<u32>,
    classes: Vec<ClassInfo>,
    class_of: Vec<u32>,
}

pub fn build_group(spec: &GroupSpec, opts: &BuildOptions) -> Result<Group> {
    spec.validate()?;
    let cap = opts.order_cap.min(HARD_ORDER_MAX);
    if let Some(order) = spec.predicted_order() {
        if order > cap {
            return Err(Error::OrderCapExceeded { order, cap });
        }
    }
    let carrier = match spec {
        GroupSpec::Sym { n } => build_perm_carrier(*n as usize, false),
        GroupSpec::Alt { n } => build_perm_carrier(*n as usize, true),
        GroupSpec::Sl { n, q } => build_matrix_carrier(*n as usize, *q, false)?,
        GroupSpec::Psl { n, q } => build_matrix_carrier(*n as usize, *q, true)?,
        GroupSpec::Cayley { path } => {
            let text = std::fs::read_to_string(Path::new(path))?;
            parse_cayley_table(&text, cap)?
        }
    };
    finish_group(spec.clone(), carrier)
}

/// Build directly from an in-memory Cayley table (row-major products).
pub fn build_from_table(table: Vec<Vec<u32>>) -> Result<Group> {
    let order = table.len();
    let mut flat = Vec::with_capacity(order * order);
    for row in &table {
        if row.len() != order {
            return Err(Error::CayleyFileMalformed("table is not square".into()));
        }
        flat.extend(row.iter().copied());
    }
    validate_cayley(&flat, order)?;
    finish_group(
        GroupSpec::Cayley { path: "<memory>".into() },
        Carrier::Cayley { table: flat, order },
    )
}

fn build_perm_carrier(n: usize, even_only: bool) -> Carrier {
    let mut elems = Vec::new();
    let mut images: Vec<u8> = (0..n as u8).collect();
    loop {
        let p = Perm::from_images(images.clone()).unwrap();
        if !even_only || p.is_even() {
            elems.push(p);
        }
        if !next_permutation(&mut images) {
            break;
        }
    }
    // Lexicographic generation already yields sorted canonical order.
    Carrier::Perm { n, elems }
}

fn next_permutation(a: &mut [u8]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Canonical coset representative in PSL: the lexicographically least scalar
/// multiple over the determinant-preserving scalars.
fn psl_canonical(m: &FqMat, scalars: &[u32], f: &Fq) -> FqMat {
    let mut best = m.clone();
    for &c in scalars {
        if c == 1 {
            continue;
        }
        let cand = m.scale(c, f);
        if cand < best {
            best = cand;
        }
    }
    best
}

fn build_matrix_carrier(n: usize, q: u32, psl: bool) -> Result<Carrier> {
    let f = Fq::new(q)?;
    let scalars = if psl { f.nth_roots_of_unity(n as u32) } else { vec![1] };
    // Transvections generate SL(n, q).
    let mut gens = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                for c in 1..q {
                    let mut g = FqMat::identity(n);
                    g.set(i, j, c);
                    gens.push(if psl { psl_canonical(&g, &scalars, f) } else { g });
                }
            }
        }
    }
    let canon = |m: &FqMat| if psl { psl_canonical(m, &scalars, f) } else { m.clone() };
    let mut seen: HashMap<FqMat, ()> = HashMap::new();
    let mut queue: Vec<FqMat> = vec![canon(&FqMat::identity(n))];
    seen.insert(queue[0].clone(), ());
    let mut head = 0;
    while head < queue.len() {
        let cur = queue[head].clone();
        head += 1;
        for g in &gens {
            let next = canon(&cur.mul(g, f));
            if !seen.contains_key(&next) {
                seen.insert(next.clone(), ());
                queue.push(next);
                if queue.len() as u64 > HARD_ORDER_MAX {
                    return Err(Error::OrderCapExceeded {
                        order: queue.len() as u64,
                        cap: HARD_ORDER_MAX,
                    });
                }
            }
        }
    }
    queue.sort();
    Ok(Carrier::Mat { fq: f, elems: queue, psl_scalars: scalars })
}

fn parse_cayley_table(text: &str, cap: u64) -> Result<Carrier> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::CayleyFileMalformed("empty file".into()))?;
    let mut parts = header.split_whitespace();
    let order: usize = match (parts.next(), parts.next(), parts.next()) {
        (Some("order"), Some(k), None) => k
            .parse()
            .map_err(|_| Error::CayleyFileMalformed(format!("bad order {:?}", k)))?,
        _ => {
            return Err(Error::CayleyFileMalformed(format!(
                "header must be \"order k\", got {:?}",
                header
            )))
        }
    };
    if order == 0 {
        return Err(Error::CayleyFileMalformed("order must be positive".into()));
    }
    if order as u64 > cap {
        return Err(Error::OrderCapExceeded { order: order as u64, cap });
    }
    let mut flat = Vec::with_capacity(order * order);
    for _ in 0..order {
        let line = lines
            .next()
            .ok_or_else(|| Error::CayleyFileMalformed("missing table rows".into()))?;
        let row: Vec<u32> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| Error::CayleyFileMalformed(format!("bad entry {:?}", t)))
            })
            .collect::<Result<_>>()?;
        if row.len() != order {
            return Err(Error::CayleyFileMalformed(format!(
                "row has {} entries, expected {}",
                row.len(),
                order
            )));
        }
        flat.extend(row);
    }
    if lines.next().is_some() {
        return Err(Error::CayleyFileMalformed("trailing rows after table".into()));
    }
    validate_cayley(&flat, order)?;
    Ok(Carrier::Cayley { table: flat, order })
}

fn validate_cayley(table: &[u32], order: usize) -> Result<()> {
    let k = order;
    let at = |i: usize, j: usize| table[i * k + j] as usize;
    for i in 0..k {
        for j in 0..k {
            if at(i, j) >= k {
                return Err(Error::CayleyFileMalformed(format!(
                    "entry {} out of range at ({}, {})",
                    at(i, j),
                    i,
                    j
                )));
            }
        }
    }
    // Latin square: every row and column is a permutation.
    for i in 0..k {
        let mut row_seen = vec![false; k];
        let mut col_seen = vec![false; k];
        for j in 0..k {
            if row_seen[at(i, j)] || col_seen[at(j, i)] {
                return Err(Error::CayleyFileMalformed(format!(
                    "row or column {} repeats a value",
                    i
                )));
            }
            row_seen[at(i, j)] = true;
            col_seen[at(j, i)] = true;
        }
    }
    let identity = (0..k)
        .find(|&e| (0..k).all(|j| at(e, j) == j && at(j, e) == j))
        .ok_or_else(|| Error::CayleyFileMalformed("no two-sided identity".into()))?;
    for i in 0..k {
        if !(0..k).any(|j| at(i, j) == identity && at(j, i) == identity) {
            return Err(Error::CayleyFileMalformed(format!("element {} has no inverse", i)));
        }
    }
    // Associativity: exhaustive when affordable, otherwise a seeded sample.
    if k <= 300 {
        for a in 0..k {
            for b in 0..k {
                let ab = at(a, b);
                for c in 0..k {
                    if at(ab, c) != at(a, at(b, c)) {
                        return Err(Error::CayleyFileMalformed(format!(
                            "associativity fails at ({}, {}, {})",
                            a, b, c
                        )));
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for _ in 0..1_000_000 {
            let (a, b, c) =
                (rng.gen_range(0..k), rng.gen_range(0..k), rng.gen_range(0..k));
            if at(at(a, b), c) != at(a, at(b, c)) {
                return Err(Error::CayleyFileMalformed(format!(
                    "associativity fails at ({}, {}, {})",
                    a, b, c
                )));
            }
        }
    }
    Ok(())
}

fn finish_group(spec: GroupSpec, carrier: Carrier) -> Result<Group> {
    let order = match &carrier {
        Carrier::Perm { elems, .. } => elems.len(),
        Carrier::Mat { elems, .. } => elems.len(),
        Carrier::Cayley { order, .. } => *order,
    };
    if let Some(predicted) = spec.predicted_order() {
        assert_eq!(
            order as u64, predicted,
            "enumerated order disagrees with the order formula for {}",
            spec
        );
    }
    let packed: Vec<u64> = match &carrier {
        Carrier::Perm { elems, .. } => elems.iter().map(Perm::pack).collect(),
        Carrier::Mat { fq, elems, .. } => elems.iter().map(|m| m.pack(fq.q())).collect(),
        Carrier::Cayley { .. } => (0..order as u64).collect(),
    };
    debug_assert!(packed.windows(2).all(|w| w[0] < w[1]));

    let mut g = Group {
        spec,
        order,
        carrier,
        packed,
        mul_table: None,
        identity: 0,
        inv: Vec::new(),
        classes: Vec::new(),
        class_of: Vec::new(),
    };
    g.identity = g.find_identity();
    if order <= MUL_TABLE_MAX && !matches!(g.carrier, Carrier::Cayley { .. }) {
        let mut table = vec![0u32; order * order];
        for a in 0..order as u32 {
            for b in 0..order as u32 {
                table[a as usize * order + b as usize] = g.mul_raw(a, b);
            }
        }
        g.mul_table = Some(table);
    }
    g.inv = (0..order as u32).map(|i| g.compute_inverse(i)).collect();
    g.build_classes();
    Ok(g)
}

impl Group {
    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> u32 {
        self.identity
    }

    #[inline]
    pub fn inv(&self, a: u32) -> u32 {
        self.inv[a as usize]
    }

    pub fn classes(&self) -> &[ClassInfo] {
        &self.classes
    }

    #[inline]
    pub fn class_of(&self, a: u32) -> u32 {
        self.class_of[a as usize]
    }

    pub fn has_mul_table(&self) -> bool {
        self.mul_table.is_some()
    }

    /// Row `a` of the multiplication table, when materialized: entry `x` is `a * x`.
    pub fn mul_row(&self, a: u32) -> Option<&[u32]> {
        self.mul_table
            .as_ref()
            .map(|t| &t[a as usize * self.order..(a as usize + 1) * self.order])
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if let Some(t) = &self.mul_table {
            t[a as usize * self.order + b as usize]
        } else {
            self.mul_raw(a, b)
        }
    }

    fn mul_raw(&self, a: u32, b: u32) -> u32 {
        match &self.carrier {
            Carrier::Perm { n, elems } => {
                let pa = elems[a as usize].images();
                let pb = elems[b as usize].images();
                let mut key = 0u64;
                for i in 0..*n {
                    key = (key << 4) | pa[pb[i] as usize] as u64;
                }
                self.index_of_packed(key)
            }
            Carrier::Mat { fq, elems, psl_scalars } => {
                let prod = elems[a as usize].mul(&elems[b as usize], fq);
                let canon = if psl_scalars.len() > 1 {
                    psl_canonical(&prod, psl_scalars, fq)
                } else {
                    prod
                };
                self.index_of_packed(canon.pack(fq.q()))
            }
            Carrier::Cayley { table, order } => table[a as usize * order + b as usize],
        }
    }

    #[inline]
    fn index_of_packed(&self, key: u64) -> u32 {
        self.packed.binary_search(&key).expect("closed under products") as u32
    }

    fn find_identity(&self) -> u32 {
        match &self.carrier {
            Carrier::Perm { n, .. } => {
                self.index_of_packed(Perm::identity(*n).pack())
            }
            Carrier::Mat { fq, elems, .. } => {
                let id = FqMat::identity(elems[0].dim());
                self.index_of_packed(id.pack(fq.q()))
            }
            Carrier::Cayley { table, order } => (0..*order as u32)
                .find(|&e| (0..*order).all(|j| table[e as usize * order + j] == j as u32))
                .expect("validated table has an identity"),
        }
    }

    fn compute_inverse(&self, a: u32) -> u32 {
        match &self.carrier {
            Carrier::Perm { .. } => {
                let p = self.perm(a).unwrap().inverse();
                self.index_of_packed(p.pack())
            }
            Carrier::Mat { fq, elems, psl_scalars } => {
                let inv = elems[a as usize].inverse(fq).expect("group elements are invertible");
                let canon = if psl_scalars.len() > 1 {
                    psl_canonical(&inv, psl_scalars, fq)
                } else {
                    inv
                };
                self.index_of_packed(canon.pack(fq.q()))
            }
            Carrier::Cayley { table, order } => (0..*order as u32)
                .find(|&b| table[a as usize * order + b as usize] == self.identity)
                .expect("validated table has inverses"),
        }
    }

    fn build_classes(&mut self) {
        let order = self.order;
        let mut class_of = vec![u32::MAX; order];
        let mut classes: Vec<ClassInfo> = Vec::new();
        for x in 0..order as u32 {
            if class_of[x as usize] != u32::MAX {
                continue;
            }
            let id = classes.len() as u32;
            let mut members = BitSet::new(order);
            for g in 0..order as u32 {
                let y = self.mul(self.mul(self.inv(g), x), g);
                if class_of[y as usize] == u32::MAX {
                    class_of[y as usize] = id;
                    members.insert(y as usize);
                }
            }
            let size = members.count();
            classes.push(ClassInfo { rep: x, size, members, inverse_class: 0 });
        }
        for i in 0..classes.len() {
            let rep_inv = self.inv(classes[i].rep);
            classes[i].inverse_class = class_of[rep_inv as usize];
        }
        self.class_of = class_of;
        self.classes = classes;
    }

    pub fn perm(&self, i: u32) -> Option<&Perm> {
        match &self.carrier {
            Carrier::Perm { elems, .. } => Some(&elems[i as usize]),
            _ => None,
        }
    }

    pub fn mat(&self, i: u32) -> Option<&FqMat> {
        match &self.carrier {
            Carrier::Mat { elems, .. } => Some(&elems[i as usize]),
            _ => None,
        }
    }

    /// Degree of the permutation carrier, if any.
    pub fn degree(&self) -> Option<usize> {
        match &self.carrier {
            Carrier::Perm { n, .. } => Some(*n),
            _ => None,
        }
    }

    pub fn field(&self) -> Option<&'static Fq> {
        match &self.carrier {
            Carrier::Mat { fq, .. } => Some(fq),
            _ => None,
        }
    }

    pub fn element_string(&self, i: u32) -> String {
        match &self.carrier {
            Carrier::Perm { elems, .. } => elems[i as usize].format_cycles(),
            Carrier::Mat { elems, .. } => elems[i as usize].format(),
            Carrier::Cayley { .. } => i.to_string(),
        }
    }

    pub fn element_from_string(&self, s: &str) -> Result<u32> {
        match &self.carrier {
            Carrier::Perm { n, .. } => {
                let p = Perm::parse_cycles(s, *n)?;
                self.index_of_perm(&p).ok_or_else(|| {
                    Error::SubsetMalformed(format!("{} is not a member of {}", s, self.spec))
                })
            }
            Carrier::Mat { fq, psl_scalars, .. } => {
                let m = FqMat::parse(s, fq.q())?;
                let canon = if psl_scalars.len() > 1 {
                    psl_canonical(&m, psl_scalars, fq)
                } else {
                    m
                };
                self.packed
                    .binary_search(&canon.pack(fq.q()))
                    .map(|i| i as u32)
                    .map_err(|_| {
                        Error::SubsetMalformed(format!("{} is not a member of {}", s, self.spec))
                    })
            }
            Carrier::Cayley { order, .. } => {
                let i: u32 = s.trim().parse().map_err(|_| {
                    Error::SubsetMalformed(format!("expected an element index, got {:?}", s))
                })?;
                if (i as usize) < *order {
                    Ok(i)
                } else {
                    Err(Error::SubsetMalformed(format!("index {} out of range", i)))
                }
            }
        }
    }

    pub fn index_of_perm(&self, p: &Perm) -> Option<u32> {
        match &self.carrier {
            Carrier::Perm { n, .. } if p.n() == *n => {
                self.packed.binary_search(&p.pack()).ok().map(|i| i as u32)
            }
            _ => None,
        }
    }
}

// ── Subsets ──────────────────────────────────────────────────────────

/// Element subset of a built group, as a bitmap over indices.
pub type Subset = BitSet;

/// Parse a subset source: `class:<i>`, `random:<size>:<seed>`,
/// `umvirate:<points>:<rep>`, or a path to a file with one element per line.
pub fn subset_from_spec(g: &Group, spec: &str) -> Result<Subset> {
    if let Some(rest) = spec.strip_prefix("class:") {
        let i: usize = rest
            .trim()
            .parse()
            .map_err(|_| Error::SubsetMalformed(format!("bad class index {:?}", rest)))?;
        let classes = g.classes();
        if i >= classes.len() {
            return Err(Error::SubsetMalformed(format!(
                "class index {} out of range ({} classes)",
                i,
                classes.len()
            )));
        }
        return Ok(classes[i].members.clone());
    }
    if let Some(rest) = spec.strip_prefix("random:") {
        let (size_s, seed_s) = rest
            .split_once(':')
            .ok_or_else(|| Error::SubsetMalformed("random needs <size>:<seed>".into()))?;
        let size: usize = size_s
            .parse()
            .map_err(|_| Error::SubsetMalformed(format!("bad size {:?}", size_s)))?;
        let seed: u64 = seed_s
            .parse()
            .map_err(|_| Error::SubsetMalformed(format!("bad seed {:?}", seed_s)))?;
        if size > g.order() {
            return Err(Error::SubsetMalformed(format!(
                "size {} exceeds group order {}",
                size,
                g.order()
            )));
        }
        return Ok(random_subset(g, size, &mut ChaCha20Rng::seed_from_u64(seed)));
    }
    if let Some(rest) = spec.strip_prefix("umvirate:") {
        let (points_s, rep_s) = rest
            .split_once(':')
            .ok_or_else(|| Error::SubsetMalformed("umvirate needs <points>:<rep>".into()))?;
        return umvirate_subset(g, points_s, rep_s);
    }
    let text = std::fs::read_to_string(Path::new(spec)).map_err(|e| {
        Error::SubsetMalformed(format!("cannot read subset source {:?}: {}", spec, e))
    })?;
    parse_subset_lines(g, &text)
}

/// One element per line; blank lines and `#` comments are ignored.
pub fn parse_subset_lines(g: &Group, text: &str) -> Result<Subset> {
    let mut s = BitSet::new(g.order());
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        s.insert(g.element_from_string(line)? as usize);
    }
    Ok(s)
}

/// Uniform random subset of the given size (partial Fisher-Yates).
pub fn random_subset(g: &Group, size: usize, rng: &mut impl Rng) -> Subset {
    let order = g.order();
    assert!(size <= order);
    let mut idx: Vec<u32> = (0..order as u32).collect();
    for i in 0..size {
        let j = rng.gen_range(i..order);
        idx.swap(i, j);
    }
    BitSet::from_indices(order, idx[..size].iter().map(|&i| i as usize))
}

/// All permutations in the group agreeing with `rep` on the 1-based `points`.
fn umvirate_subset(g: &Group, points_s: &str, rep_s: &str) -> Result<Subset> {
    let n = g.degree().ok_or_else(|| {
        Error::SubsetMalformed("umvirate subsets need a permutation group".into())
    })?;
    let points: Vec<usize> = points_s
        .split(',')
        .map(|t| {
            let p: usize = t
                .trim()
                .parse()
                .map_err(|_| Error::SubsetMalformed(format!("bad point {:?}", t)))?;
            if p == 0 || p > n {
                return Err(Error::SubsetMalformed(format!("point {} out of 1..={}", p, n)));
            }
            Ok(p - 1)
        })
        .collect::<Result<_>>()?;
    let rep = Perm::parse_cycles(rep_s, n)?;
    let mut s = BitSet::new(g.order());
    for i in 0..g.order() as u32 {
        let p = g.perm(i).unwrap();
        if points.iter().all(|&pt| p.apply(pt) == rep.apply(pt)) {
            s.insert(i as usize);
        }
    }
    if s.is_empty() {
        return Err(Error::SubsetMalformed(format!(
            "no element agrees with {} on {:?}",
            rep_s, points_s
        )));
    }
    Ok(s)
}

/// Product set `AB = {ab : a in A, b in B}`.
pub fn product_set(g: &Group, a: &Subset, b: &Subset, budget: &Budget) -> Result<Subset> {
    budget.charge((a.count() * b.count()) as u64)?;
    let mut out = BitSet::new(g.order());
    for x in a.iter() {
        for y in b.iter() {
            out.insert(g.mul(x as u32, y as u32) as usize);
        }
    }
    Ok(out)
}

/// Conjugate `A^s = s^-1 A s`.
pub fn conjugate_subset(g: &Group, a: &Subset, s: u32) -> Subset {
    let si = g.inv(s);
    let mut out = BitSet::new(g.order());
    for x in a.iter() {
        out.insert(g.mul(g.mul(si, x as u32), s) as usize);
    }
    out
}

/// Translate `A s` on the right.
pub fn translate_subset(g: &Group, a: &Subset, s: u32) -> Subset {
    let mut out = BitSet::new(g.order());
    for x in a.iter() {
        out.insert(g.mul(x as u32, s) as usize);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum WitnessOutcome {
    /// `|B A^sigma| > |B|`, with the witnessing conjugator and grown size.
    Witness { sigma: u32, grown: usize },
    /// Preconditions of the growth lemma are not met, or no conjugate grew.
    Refused { reason: String },
}

/// Search for a conjugator `sigma` with `|B A^sigma| > |B|`. The guarantee
/// holds when the ambient group is nonabelian simple, `B` is proper nonempty
/// and `|A| >= 2`; outside those preconditions the search is refused.
pub fn growth_witness(g: &Group, b: &Subset, a: &Subset, budget: &Budget) -> Result<WitnessOutcome> {
    if !g.spec().presumed_simple() {
        return Ok(WitnessOutcome::Refused {
            reason: format!("{} is not on the list of presumed-simple families", g.spec()),
        });
    }
    if b.is_empty() || b.is_full() {
        return Ok(WitnessOutcome::Refused {
            reason: "B must be nonempty and proper".into(),
        });
    }
    if a.count() < 2 {
        return Ok(WitnessOutcome::Refused { reason: "|A| must be at least 2".into() });
    }
    let b_size = b.count();
    for sigma in 0..g.order() as u32 {
        let conj = conjugate_subset(g, a, sigma);
        budget.charge((b_size * conj.count()) as u64 + 2 * conj.count() as u64)?;
        let prod = product_set(g, b, &conj, budget)?;
        let grown = prod.count();
        if grown > b_size {
            return Ok(WitnessOutcome::Witness { sigma, grown });
        }
    }
    Ok(WitnessOutcome::Refused {
        reason: "no conjugate grew B; growth lemma preconditions must not actually hold".into(),
    })
}

#[derive(Clone, Copy, Debug)]
pub enum SkewStrategy {
    Exhaustive,
    Sample { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkewMax {
    pub sigma: u32,
    pub size: usize,
}

/// Maximize `|A^sigma B|` over conjugators, exhaustively or by seeded
/// sampling. Ties keep the smallest element index.
pub fn max_skew_product(
    g: &Group,
    a: &Subset,
    b: &Subset,
    strategy: SkewStrategy,
    budget: &Budget,
) -> Result<SkewMax> {
    let sigmas: Vec<u32> = match strategy {
        SkewStrategy::Exhaustive => (0..g.order() as u32).collect(),
        SkewStrategy::Sample { count, seed } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            (0..count).map(|_| rng.gen_range(0..g.order() as u32)).collect()
        }
    };
    budget.ensure(sigmas.len() as u64 * (a.count() * b.count() + 2 * a.count()) as u64)?;
    let mut best: Option<SkewMax> = None;
    for sigma in sigmas {
        let conj = conjugate_subset(g, a, sigma);
        let prod = product_set(g, &conj, b, budget)?;
        let size = prod.count();
        let better = match &best {
            None => true,
            Some(cur) => size > cur.size || (size == cur.size && sigma < cur.sigma),
        };
        if better {
            best = Some(SkewMax { sigma, size });
        }
    }
    Ok(best.expect("at least one conjugator considered"))
}
