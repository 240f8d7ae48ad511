//! Report envelopes and offline witness re-verification.
//!
//! Every command emits one JSON report: the command name, a config echo, the
//! command-specific results, and the crate version. Reports are byte-stable
//! for a fixed argv and seed; wall-clock timing is opt-in because it breaks
//! that. `verify_witness` re-derives a report's claims from the witnesses it
//! carries — no search, only recomputation.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use serde_json::Value;

use prodlab::bitset::BitSet;
use prodlab::budget::{Budget, DEFAULT_BUDGET};
use prodlab::fq::Fq;
use prodlab::fqmat::FqMat;
use prodlab::group::{
    build_group, conjugate_subset, product_set, subset_from_spec, BuildOptions, Group, GroupSpec,
    Subset,
};
use prodlab::growth::{gamma_statistic, verify_conjugate_cover};
use prodlab::{Error, Result};

/// Everything a report echoes about how it was produced.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub args: Vec<String>,
    pub seed: u64,
    pub budget: u64,
    pub order_cap: u64,
    pub workers: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub command: String,
    pub config: ConfigEcho,
    pub results: T,
    /// Present only under `--timing`; excluded by default so identical runs
    /// emit identical bytes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    pub version: &'static str,
}

/// Canonical serialization: pretty JSON with a trailing newline.
pub fn render<T: Serialize>(report: &Report<T>) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Witness re-verification.

#[derive(Debug, Clone, Serialize)]
pub struct Claim {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyResults {
    pub command: String,
    pub claims: Vec<Claim>,
    pub all_pass: bool,
}

fn schema(msg: &str) -> Error {
    Error::VerifyFailed(format!("schema mismatch: {msg}"))
}

fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value> {
    v.get(name).ok_or_else(|| schema(&format!("missing field {name:?}")))
}

fn str_field(v: &Value, name: &str) -> Result<String> {
    Ok(field(v, name)?
        .as_str()
        .ok_or_else(|| schema(&format!("field {name:?} is not a string")))?
        .to_string())
}

fn u64_field(v: &Value, name: &str) -> Result<u64> {
    field(v, name)?
        .as_u64()
        .ok_or_else(|| schema(&format!("field {name:?} is not an unsigned integer")))
}

fn rebuild_group(spec: &str) -> Result<Group> {
    build_group(&GroupSpec::parse(spec)?, &BuildOptions::default())
}

/// Re-derive every claim in a report from its recorded witnesses.
pub fn verify_witness(path: &Path) -> Result<VerifyResults> {
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let command = str_field(&v, "command")?;
    let results = field(&v, "results")?;
    let claims = match command.as_str() {
        "growth gamma" => verify_gamma(results)?,
        "growth cover" => verify_cover(results)?,
        "criterion check" => verify_criterion(results)?,
        "fq cover" => verify_fq_cover(results)?,
        _ => vec![Claim {
            name: "no-witness-claims".into(),
            pass: true,
            detail: format!("{command:?} reports carry no re-verifiable witness"),
        }],
    };
    let all_pass = claims.iter().all(|c| c.pass);
    Ok(VerifyResults { command, claims, all_pass })
}

fn verify_gamma(results: &Value) -> Result<Vec<Claim>> {
    let g = rebuild_group(&str_field(results, "group")?)?;
    let a = subset_from_spec(&g, &str_field(results, "a")?)?;
    let b = subset_from_spec(&g, &str_field(results, "b")?)?;
    let budget = Budget::new(DEFAULT_BUDGET);

    let stored_gamma = str_field(results, "gamma")?;
    let gamma = gamma_statistic(&g, &a, &b, &budget)?;
    let gamma_ok = gamma.to_string() == stored_gamma;

    let sigma = u64_field(results, "witness_sigma")? as u32;
    let claimed_size = u64_field(results, "skew_size")?;
    let conj = conjugate_subset(&g, &a, sigma);
    let size = product_set(&g, &conj, &b, &budget)?.count() as u64;
    let size_ok = size == claimed_size;

    let pairs = BigRational::from_integer(BigInt::from(a.count() as u64 * b.count() as u64));
    let bound = &pairs / &gamma;
    let bound_ok = BigRational::from_integer(BigInt::from(size)) >= bound;

    Ok(vec![
        Claim {
            name: "gamma-recomputed".into(),
            pass: gamma_ok,
            detail: format!("stored {stored_gamma}, recomputed {gamma}"),
        },
        Claim {
            name: "witness-product-size".into(),
            pass: size_ok,
            detail: format!("stored {claimed_size}, recomputed {size} at shift {sigma}"),
        },
        Claim {
            name: "size-meets-bound".into(),
            pass: bound_ok,
            detail: format!("{size} >= {bound}"),
        },
    ])
}

fn verify_cover(results: &Value) -> Result<Vec<Claim>> {
    let g = rebuild_group(&str_field(results, "group")?)?;
    let a = subset_from_spec(&g, &str_field(results, "set")?)?;
    let shifts: Vec<u32> = field(results, "shifts")?
        .as_array()
        .ok_or_else(|| schema("shifts is not an array"))?
        .iter()
        .map(|s| {
            s.as_u64()
                .map(|x| x as u32)
                .ok_or_else(|| schema("shift is not an unsigned integer"))
        })
        .collect::<Result<_>>()?;
    if shifts.is_empty() {
        return Ok(vec![Claim {
            name: "no-witness-claimed".into(),
            pass: true,
            detail: "report makes no coverage claim".into(),
        }]);
    }
    let budget = Budget::new(DEFAULT_BUDGET);
    let covered = verify_conjugate_cover(&g, &a, &shifts, &budget)?;
    Ok(vec![Claim {
        name: "conjugate-product-covers".into(),
        pass: covered,
        detail: format!("product of {} conjugates recomputed from scratch", shifts.len()),
    }])
}

fn verify_criterion(results: &Value) -> Result<Vec<Claim>> {
    let report = field(results, "report")?;
    let witness = field(report, "witness")?;
    if witness.is_null() {
        return Ok(vec![Claim {
            name: "no-witness-claimed".into(),
            pass: true,
            detail: "report makes no coverage claim".into(),
        }]);
    }
    let g = rebuild_group(&str_field(report, "group")?)?;
    let set_specs: Vec<String> = field(results, "sets")?
        .as_array()
        .ok_or_else(|| schema("sets is not an array"))?
        .iter()
        .map(|s| {
            s.as_str()
                .map(str::to_string)
                .ok_or_else(|| schema("set spec is not a string"))
        })
        .collect::<Result<_>>()?;
    let sets: Vec<Subset> =
        set_specs.iter().map(|s| subset_from_spec(&g, s)).collect::<Result<_>>()?;
    let m = u64_field(report, "m")? as usize;
    let shifts: Vec<u32> = witness
        .as_array()
        .ok_or_else(|| schema("witness is not an array"))?
        .iter()
        .map(|s| {
            let text = s.as_str().ok_or_else(|| schema("witness entry is not a string"))?;
            g.element_from_string(text)
        })
        .collect::<Result<_>>()?;
    if shifts.len() != m || sets.is_empty() {
        return Err(schema("witness length disagrees with m"));
    }

    // t_1 = e, t_i = s_{i-1} ... s_1: the conjugated form of the translated
    // factorization. Recomputed exactly, independent of the search path.
    let budget = Budget::new(DEFAULT_BUDGET);
    let mut conjugator = g.identity();
    let mut cover: Option<Subset> = None;
    for (i, &s) in shifts.iter().enumerate() {
        let piece = conjugate_subset(&g, &sets[i % sets.len()], conjugator);
        cover = Some(match cover {
            None => piece,
            Some(c) => product_set(&g, &c, &piece, &budget)?,
        });
        conjugator = g.mul(s, conjugator);
    }
    let covered = cover.map(|c| c.is_full()).unwrap_or(false);
    Ok(vec![Claim {
        name: "conjugated-product-covers".into(),
        pass: covered,
        detail: format!("{m}-fold conjugated set product recomputed"),
    }])
}

fn verify_fq_cover(results: &Value) -> Result<Vec<Claim>> {
    let n = u64_field(results, "n")? as usize;
    let q = u64_field(results, "q")? as u32;
    let f = Fq::new(q)?;
    let size = (q as u64).pow((n * n) as u32) as usize;
    let sets: Vec<Vec<u64>> = field(results, "sets")?
        .as_array()
        .ok_or_else(|| schema("sets is not an array"))?
        .iter()
        .map(|set| {
            set.as_array()
                .ok_or_else(|| schema("set is not an array"))?
                .iter()
                .map(|x| x.as_u64().ok_or_else(|| schema("set entry is not an index")))
                .collect::<Result<Vec<u64>>>()
        })
        .collect::<Result<_>>()?;
    if sets.is_empty() {
        return Err(schema("no sets recorded"));
    }
    let pairs: Vec<(FqMat, FqMat)> = field(results, "pairs")?
        .as_array()
        .ok_or_else(|| schema("pairs is not an array"))?
        .iter()
        .map(|p| {
            let arr = p.as_array().filter(|a| a.len() == 2).ok_or_else(|| schema("pair shape"))?;
            let a = FqMat::parse(arr[0].as_str().ok_or_else(|| schema("pair entry"))?, q)?;
            let b = FqMat::parse(arr[1].as_str().ok_or_else(|| schema("pair entry"))?, q)?;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    if pairs.is_empty() {
        return Err(schema("no pairs recorded"));
    }

    let mut covered: Option<BitSet> = None;
    for (i, (a, b)) in pairs.iter().enumerate() {
        let ai = a
            .inverse(f)
            .ok_or_else(|| Error::SingularInput("cover pair is not invertible".into()))?;
        let dil: Vec<FqMat> = sets[i % sets.len()]
            .iter()
            .map(|&idx| ai.mul(&FqMat::from_index(n, q, idx), f).mul(b, f))
            .collect();
        covered = Some(match covered {
            None => {
                let mut s = BitSet::new(size);
                for d in &dil {
                    s.insert(d.to_index(q) as usize);
                }
                s
            }
            Some(cur) => {
                let mut next = BitSet::new(size);
                for z in cur.iter() {
                    let zm = FqMat::from_index(n, q, z as u64);
                    for d in &dil {
                        next.insert(zm.add(d, f).to_index(q) as usize);
                    }
                }
                next
            }
        });
    }
    let full = covered.map(|c| c.is_full()).unwrap_or(false);
    Ok(vec![Claim {
        name: "dilated-sumset-covers".into(),
        pass: full,
        detail: format!("{} dilated summands recomputed over {size} cells", pairs.len()),
    }])
}

/// Parse a `p/q` rational previously rendered with `Display`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    BigRational::from_str(s)
        .map_err(|e| Error::InvalidParameters(format!("bad rational {s:?}: {e}")))
}
