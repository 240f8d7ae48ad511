//! Command-line entry point: one subcommand per experiment family, each
//! emitting a single JSON report (CSV for the tabular scans). Reports are
//! byte-deterministic for a fixed argv and seed unless `--timing` is given.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use prodlab::budget::{Budget, DEFAULT_BUDGET};
use prodlab::chartable::{character_table, witten_zeta, CharTable, DEFAULT_CHAR_TOL};
use prodlab::fourier::{
    criterion_check, frobenius_lhs, frobenius_rhs, normalized_indicator, project,
    projection_norm_sq, CriterionReport, SampleMode, ShiftSearch,
};
use prodlab::fq::Fq;
use prodlab::fqmat::{random_unipotent, FqMat};
use prodlab::group::{
    build_group, max_skew_product, subset_from_spec, BuildOptions,
    Group, GroupSpec, SkewStrategy, DEFAULT_ORDER_CAP,
};
use prodlab::growth::{
    class_concentration, conjugate_cover_search, expected_skew_product_check, gamma_statistic,
    globality_profile, verify_conjugate_cover, GlobalityReport,
};
use prodlab::matcount::{
    additive_energy, akblcm_solve, count_rank, dilate_cover_search, nsum_for_target,
    nsum_ratio_scan, rank_representative, sumset_energy_check, Ambient, RatioScan,
};
use prodlab::partitions::{charbound_scan, ScanMode, ScanTable};
use prodlab::{Error, Result};

use prodlab_cli::battery;
use prodlab_cli::report::{emit, render, verify_witness, ConfigEcho, Report, VerifyResults};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Parser)]
#[command(name = "prodlab", version, about = "Finite-group mixing and matrix-space experiments")]
struct Cli {
    /// Seed for every randomized choice this invocation makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Element-operation budget (group and field multiplications).
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to PRODLAB_WORKERS, then all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Largest group order the builders accept.
    #[arg(long = "order-cap", global = true, default_value_t = DEFAULT_ORDER_CAP)]
    order_cap: u64,
    /// Include wall time in the report (breaks byte determinism).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a group and report its conjugacy class structure.
    Group {
        /// Group spec: Sn:<n>, An:<n>, SL:<n>,<q>, PSL:<n>,<q>, or cayley:<path>.
        spec: String,
    },
    /// Numeric character table.
    Chartable {
        spec: String,
        /// Orthogonality tolerance for the table solver.
        #[arg(long, default_value_t = DEFAULT_CHAR_TOL)]
        tol: f64,
        /// Emit the canonical JSON report (the default).
        #[arg(long)]
        json: bool,
        /// Emit the table as CSV instead.
        #[arg(long, conflicts_with = "json")]
        csv: bool,
    },
    /// Representation zeta values over a grid of exponents.
    Zeta {
        spec: String,
        /// Exponent(s) to evaluate; repeatable.
        #[arg(long = "s", default_values_t = vec![2.0])]
        s: Vec<f64>,
        /// Include the trivial representation in the sum.
        #[arg(long)]
        include_trivial: bool,
    },
    /// Fourier identities on one subset's normalized indicator.
    Fourier {
        spec: String,
        /// Subset source: class:<i>, random:<size>:<seed>, umvirate:<pts>:<rep>, or a file.
        #[arg(long)]
        set: String,
    },
    /// Shifted-convolution moment comparisons.
    Frobenius {
        #[command(subcommand)]
        sub: FrobeniusCmd,
    },
    /// Quasirandom mixing hypothesis checks with factorization witnesses.
    Criterion {
        #[command(subcommand)]
        sub: CriterionCmd,
    },
    /// Product-growth statistics and covers.
    Growth {
        #[command(subcommand)]
        sub: GrowthCmd,
    },
    /// Character-degree scans over partition shapes.
    Partitions {
        #[command(subcommand)]
        sub: PartitionsCmd,
    },
    /// Matrix-space counting and additive experiments.
    Fq {
        #[command(subcommand)]
        sub: FqCmd,
    },
    /// Special-linear decompositions.
    Sl {
        #[command(subcommand)]
        sub: SlCmd,
    },
    /// Run the acceptance battery.
    Suite {
        /// smoke (fast identities) or full (all criteria, twice, byte-compared).
        #[arg(long, default_value = "smoke")]
        level: String,
    },
    /// Re-derive every claim in a previously emitted report from its witnesses.
    VerifyWitness { report: PathBuf },
}

#[derive(Subcommand)]
enum FrobeniusCmd {
    /// Exact or sampled moment of order m against the spectral side.
    Verify {
        spec: String,
        #[arg(long)]
        m: usize,
        /// m+1 subset sources.
        #[arg(long, num_args = 1.., required = true)]
        sets: Vec<String>,
        /// exhaustive, or mc:<samples>:<seed>.
        #[arg(long, default_value = "exhaustive")]
        mode: String,
    },
}

#[derive(Subcommand)]
enum CriterionCmd {
    /// Check the mixing hypothesis and search for a factorization witness.
    Check {
        spec: String,
        #[arg(long)]
        eps: f64,
        /// Number of factors (even).
        #[arg(long)]
        m: usize,
        /// Subset sources; cycled when fewer than m.
        #[arg(long, num_args = 1.., required = true)]
        sets: Vec<String>,
        /// random:<tuples>:<seed>, or exhaustive.
        #[arg(long, default_value = "random:200:0")]
        search: String,
    },
}

#[derive(Args)]
struct PairArgs {
    spec: String,
    #[arg(long = "A", visible_alias = "a")]
    a: String,
    #[arg(long = "B", visible_alias = "b")]
    b: String,
}

#[derive(Subcommand)]
enum GrowthCmd {
    /// Pair statistic, its bound, and the exhaustive skew-product maximum.
    Gamma(PairArgs),
    /// Largest translate-class concentration of a set.
    Concentrate {
        spec: String,
        #[arg(long = "A", visible_alias = "a")]
        a: String,
    },
    /// Averaged skew product against one class term, both sides exact.
    Classbound {
        #[command(flatten)]
        pair: PairArgs,
        /// Conjugacy class index.
        #[arg(long)]
        class: u32,
    },
    /// Per-depth stabilizer-coset density ratios.
    Globality {
        spec: String,
        #[arg(long = "A", visible_alias = "a")]
        a: String,
        #[arg(long = "d-max", default_value_t = 3)]
        d_max: usize,
    },
    /// Search for a short conjugate-product cover and verify it.
    Cover {
        spec: String,
        #[arg(long = "A", visible_alias = "a")]
        a: String,
        #[arg(long = "m-max", default_value_t = 8)]
        m_max: usize,
    },
}

#[derive(Subcommand)]
enum PartitionsCmd {
    /// Scan all shapes of n; CSV output.
    Scan {
        #[arg(long)]
        n: u32,
        /// virtual, lsbound, or fixedpoints:<t>.
        #[arg(long)]
        mode: String,
    },
}

#[derive(Subcommand)]
enum FqCmd {
    /// Exact rank census of n x n matrices over F_q.
    Count {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: u32,
    },
    /// Rank-sum count against a canonical rank-t target.
    Nsum {
        /// Comma-separated rank list.
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: u32,
    },
    /// All rank-sum counts against their envelopes.
    RatioScan {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: u32,
        /// Smallest rank admitted to the triple table; defaults to ceil(2n/3).
        #[arg(long = "r-min")]
        r_min: Option<usize>,
    },
    /// Additive energy and the sumset bound for listed sets.
    Energy {
        /// Matrix side (with --q) for a matrix ambient.
        #[arg(long, requires = "q")]
        n: Option<usize>,
        #[arg(long, requires = "n")]
        q: Option<u32>,
        /// Modular ambient <m>:<d> instead of a matrix one.
        #[arg(long, conflicts_with_all = ["n", "q"])]
        zm: Option<String>,
        /// Set files: one matrix per line for matrix ambients ("a,b;c,d"),
        /// one index per line for modular ones.
        #[arg(long, num_args = 1.., required = true)]
        sets: Vec<PathBuf>,
    },
    /// Search for a dilated-sumset cover of the whole matrix space.
    Cover {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: u32,
        #[arg(long, num_args = 1.., required = true)]
        sets: Vec<PathBuf>,
        #[arg(long = "mu-max", default_value_t = 16)]
        mu_max: usize,
    },
}

#[derive(Subcommand)]
enum SlCmd {
    /// Six-factor patterned decomposition of unipotent upper-triangular input.
    Akblcm {
        /// Matrix side (odd, at most 9).
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: u32,
        /// Decompose this many random unipotent matrices.
        #[arg(long, conflicts_with = "matrix")]
        random: Option<usize>,
        /// Or read one matrix from this file ("a,b;c,d" syntax).
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
}

// ---------------------------------------------------------------------------
// Result payloads.

#[derive(Serialize)]
struct ClassRow {
    index: usize,
    rep: String,
    size: usize,
}

#[derive(Serialize)]
struct GroupResults {
    group: String,
    order: usize,
    presumed_simple: bool,
    classes: Vec<ClassRow>,
}

#[derive(Serialize)]
struct IrredRow {
    degree: u64,
    values: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct ChartableResults {
    group: String,
    classes: Vec<ClassRow>,
    irreducibles: Vec<IrredRow>,
    tolerance: f64,
}

#[derive(Serialize)]
struct ZetaReadingRow {
    s: f64,
    value: f64,
}

#[derive(Serialize)]
struct ZetaResults {
    group: String,
    include_trivial: bool,
    degrees: Vec<u64>,
    readings: Vec<ZetaReadingRow>,
}

#[derive(Serialize)]
struct FourierRow {
    row: usize,
    degree: u64,
    pair_average: f64,
    direct: f64,
    abs_err: f64,
}

#[derive(Serialize)]
struct FourierResults {
    group: String,
    set: String,
    set_size: usize,
    parseval_lhs: f64,
    parseval_rhs: f64,
    parseval_rel: f64,
    reconstruction_linf: f64,
    rows: Vec<FourierRow>,
}

#[derive(Serialize)]
struct FrobeniusResults {
    group: String,
    m: usize,
    sets: Vec<String>,
    set_sizes: Vec<usize>,
    mode: String,
    lhs: f64,
    stderr: f64,
    rhs: f64,
    abs_err: f64,
    rel_err: f64,
}

#[derive(Serialize)]
struct CriterionCheckResults {
    group: String,
    sets: Vec<String>,
    set_sizes: Vec<usize>,
    search: String,
    report: CriterionReport,
}

#[derive(Serialize)]
struct GammaResults {
    group: String,
    a: String,
    b: String,
    a_size: usize,
    b_size: usize,
    /// Pair statistic as an exact rational.
    gamma: String,
    /// |A||B| / Gamma as an exact rational.
    bound: String,
    bound_ceil: u64,
    witness_sigma: u32,
    witness_sigma_string: String,
    skew_size: u64,
    holds: bool,
}

#[derive(Serialize)]
struct ConcentrateResults {
    group: String,
    set: String,
    set_size: usize,
    shift: u32,
    shift_string: String,
    class_index: u32,
    class_rep: String,
    class_size: usize,
    count: usize,
}

#[derive(Serialize)]
struct ClassboundResults {
    group: String,
    a: String,
    b: String,
    a_size: usize,
    b_size: usize,
    class_index: u32,
    /// Averaged skew product, exact.
    lhs: String,
    /// Class term, exact.
    rhs: String,
    holds: bool,
}

#[derive(Serialize)]
struct GlobalityResults {
    group: String,
    set: String,
    report: GlobalityReport,
}

#[derive(Serialize)]
struct CoverResults {
    group: String,
    set: String,
    set_size: usize,
    m_max: usize,
    found: bool,
    m: Option<usize>,
    shifts: Vec<u32>,
    shift_strings: Vec<String>,
    covered: bool,
}

#[derive(Serialize)]
struct FqCountResults {
    n: usize,
    q: u32,
    total: String,
    ranks: Vec<String>,
}

#[derive(Serialize)]
struct FqNsumResults {
    ranks: Vec<usize>,
    t: usize,
    n: usize,
    q: u32,
    count: String,
}

#[derive(Serialize)]
struct RatioScanResults {
    scan: RatioScan,
}

#[derive(Serialize)]
struct EnergyResults {
    ambient: String,
    set_sizes: Vec<usize>,
    energy: String,
    sumset_size: u64,
    /// Cauchy-Schwarz lower bound, exact rational.
    bound: String,
    holds: bool,
}

#[derive(Serialize)]
struct FqCoverResults {
    n: usize,
    q: u32,
    mu_max: usize,
    /// Inline set indices so the report re-verifies without its input files.
    sets: Vec<Vec<u64>>,
    set_sizes: Vec<usize>,
    found: bool,
    mu: Option<usize>,
    pairs: Vec<[String; 2]>,
    verified: bool,
}

#[derive(Serialize)]
struct AkblcmFactorRow {
    a: String,
    k: String,
    b: String,
    l: String,
    c: String,
    m: String,
}

#[derive(Serialize)]
struct AkblcmInstance {
    input: String,
    ok: bool,
    error: Option<String>,
    factors: Option<AkblcmFactorRow>,
    product_matches: Option<bool>,
}

#[derive(Serialize)]
struct AkblcmResults {
    n: usize,
    q: u32,
    instances: Vec<AkblcmInstance>,
    failures: usize,
}

// ---------------------------------------------------------------------------
// Plumbing.

struct Ctx {
    echo: ConfigEcho,
    budget: Budget,
    order_cap: u64,
    seed: u64,
    timing: bool,
    out: Option<PathBuf>,
    started: Instant,
}

impl Ctx {
    fn build(&self, spec: &str) -> Result<Group> {
        build_group(&GroupSpec::parse(spec)?, &BuildOptions { order_cap: self.order_cap })
    }

    fn table(&self, g: &Group, tol: f64) -> Result<CharTable> {
        character_table(g, tol, self.seed, &self.budget)
    }

    fn emit<T: Serialize>(&self, command: &str, results: T) -> Result<()> {
        let report = Report {
            command: command.to_string(),
            config: self.echo.clone(),
            results,
            wall_ms: self.timing.then(|| self.started.elapsed().as_secs_f64() * 1000.0),
            version: env!("CARGO_PKG_VERSION"),
        };
        emit(&render(&report)?, self.out.as_deref())
    }

    fn emit_text(&self, text: &str) -> Result<()> {
        emit(text, self.out.as_deref())
    }
}

fn class_rows(g: &Group) -> Vec<ClassRow> {
    g.classes()
        .iter()
        .enumerate()
        .map(|(index, c)| ClassRow { index, rep: g.element_string(c.rep), size: c.size })
        .collect()
}

fn parse_sample_mode(s: &str) -> Result<SampleMode> {
    if s == "exhaustive" {
        return Ok(SampleMode::Exhaustive);
    }
    if let Some(rest) = s.strip_prefix("mc:") {
        if let Some((k, seed)) = rest.split_once(':') {
            let samples = k.parse().map_err(|_| bad_flag("mode", s))?;
            let seed = seed.parse().map_err(|_| bad_flag("mode", s))?;
            return Ok(SampleMode::MonteCarlo { samples, seed });
        }
    }
    Err(bad_flag("mode", s))
}

fn parse_shift_search(s: &str) -> Result<ShiftSearch> {
    if s == "exhaustive" {
        return Ok(ShiftSearch::Exhaustive);
    }
    if let Some(rest) = s.strip_prefix("random:") {
        if let Some((tuples, seed)) = rest.split_once(':') {
            let tuples = tuples.parse().map_err(|_| bad_flag("search", s))?;
            let seed = seed.parse().map_err(|_| bad_flag("search", s))?;
            return Ok(ShiftSearch::Random { tuples, seed });
        }
    }
    Err(bad_flag("search", s))
}

fn bad_flag(flag: &str, value: &str) -> Error {
    Error::InvalidParameters(format!("unrecognized --{flag} value {value:?}"))
}

fn rational_strings(x: &BigRational) -> String {
    x.to_string()
}

/// Matrix-set file: one matrix per line, rows ';'-separated, entries ','.
fn read_matrix_set(path: &Path, n: usize, q: u32) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let m = FqMat::parse(line, q)?;
        if m.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected side {n}, file line has side {}",
                m.dim()
            )));
        }
        out.push(m.to_index(q));
    }
    if out.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(out)
}

/// Index-set file for modular ambients: one index per line.
fn read_index_set(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(
            line.parse::<u64>()
                .map_err(|_| Error::SubsetMalformed(format!("bad index {line:?}")))?,
        );
    }
    if out.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(out)
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// ---------------------------------------------------------------------------
// Command bodies.

fn cmd_group(ctx: &Ctx, spec: &str) -> Result<()> {
    let g = ctx.build(spec)?;
    let results = GroupResults {
        group: g.spec().format(),
        order: g.order(),
        presumed_simple: g.spec().presumed_simple(),
        classes: class_rows(&g),
    };
    ctx.emit("group", results)
}

fn cmd_chartable(ctx: &Ctx, spec: &str, tol: f64, csv: bool) -> Result<()> {
    let g = ctx.build(spec)?;
    let t = ctx.table(&g, tol)?;
    // Present rows by ascending degree; ties keep solver order.
    let mut order: Vec<usize> = (0..t.num_classes()).collect();
    order.sort_by_key(|&r| (t.degrees[r], r));
    if csv {
        let mut lines = Vec::new();
        let header: Vec<String> = std::iter::once("degree".to_string())
            .chain(t.class_reps.iter().map(|&r| csv_quote(&g.element_string(r))))
            .collect();
        lines.push(header.join(","));
        for &r in &order {
            let row: Vec<String> = std::iter::once(t.degrees[r].to_string())
                .chain(t.chars[r].iter().map(|v| {
                    if v.im.abs() > t.tolerance {
                        csv_quote(&format!("{}{}{}i", v.re, if v.im < 0.0 { "-" } else { "+" }, v.im.abs()))
                    } else {
                        format!("{}", v.re)
                    }
                }))
                .collect();
            lines.push(row.join(","));
        }
        return ctx.emit_text(&(lines.join("\n") + "\n"));
    }
    let results = ChartableResults {
        group: g.spec().format(),
        classes: class_rows(&g),
        irreducibles: order
            .iter()
            .map(|&r| IrredRow {
                degree: t.degrees[r],
                values: t.chars[r].iter().map(|v| [v.re, v.im]).collect(),
            })
            .collect(),
        tolerance: t.tolerance,
    };
    ctx.emit("chartable", results)
}

fn cmd_zeta(ctx: &Ctx, spec: &str, s_values: &[f64], include_trivial: bool) -> Result<()> {
    let g = ctx.build(spec)?;
    let t = ctx.table(&g, DEFAULT_CHAR_TOL)?;
    let mut degrees = t.degrees.clone();
    degrees.sort_unstable();
    let readings = s_values
        .iter()
        .map(|&s| ZetaReadingRow { s, value: witten_zeta(&t, s, include_trivial) })
        .collect();
    let results = ZetaResults { group: g.spec().format(), include_trivial, degrees, readings };
    ctx.emit("zeta", results)
}

fn cmd_fourier(ctx: &Ctx, spec: &str, set: &str) -> Result<()> {
    let g = ctx.build(spec)?;
    let t = ctx.table(&g, DEFAULT_CHAR_TOL)?;
    let a = subset_from_spec(&g, set)?;
    let f = normalized_indicator(&g, &a)?;
    let total = f.norm_l2_sq();
    let mut sum_norms = 0f64;
    let mut recon = vec![num_complex::Complex64::new(0.0, 0.0); g.order()];
    let mut rows = Vec::new();
    for row in 0..t.num_classes() {
        let p = project(&g, &t, &f, row)?;
        sum_norms += p.norm_l2_sq();
        for (acc, v) in recon.iter_mut().zip(p.values()) {
            *acc += *v;
        }
        let pair_average = projection_norm_sq(&g, &t, &a, row, &ctx.budget)?;
        let direct = p.norm_l2_sq();
        rows.push(FourierRow {
            row,
            degree: t.degrees[row],
            pair_average,
            direct,
            abs_err: (pair_average - direct).abs(),
        });
    }
    let linf = recon
        .iter()
        .zip(f.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0f64, f64::max);
    let results = FourierResults {
        group: g.spec().format(),
        set: set.to_string(),
        set_size: a.count(),
        parseval_lhs: sum_norms,
        parseval_rhs: total,
        parseval_rel: (sum_norms - total).abs() / total.max(1e-30),
        reconstruction_linf: linf,
        rows,
    };
    ctx.emit("fourier", results)
}

fn cmd_frobenius(ctx: &Ctx, spec: &str, m: usize, sets: &[String], mode: &str) -> Result<()> {
    let g = ctx.build(spec)?;
    let t = ctx.table(&g, DEFAULT_CHAR_TOL)?;
    let subsets: Vec<_> = sets.iter().map(|s| subset_from_spec(&g, s)).collect::<Result<_>>()?;
    let refs: Vec<&_> = subsets.iter().collect();
    let sample_mode = parse_sample_mode(mode)?;
    let (lhs, stderr) = frobenius_lhs(&g, &refs, m, sample_mode, &ctx.budget)?;
    let rhs = frobenius_rhs(&g, &t, &refs, m, &ctx.budget)?;
    let results = FrobeniusResults {
        group: g.spec().format(),
        m,
        sets: sets.to_vec(),
        set_sizes: subsets.iter().map(|s| s.count()).collect(),
        mode: mode.to_string(),
        lhs,
        stderr,
        rhs,
        abs_err: (lhs - rhs).abs(),
        rel_err: (lhs - rhs).abs() / rhs.abs().max(1e-30),
    };
    ctx.emit("frobenius verify", results)
}

fn cmd_criterion(
    ctx: &Ctx,
    spec: &str,
    eps: f64,
    m: usize,
    sets: &[String],
    search: &str,
) -> Result<()> {
    let g = ctx.build(spec)?;
    let t = ctx.table(&g, DEFAULT_CHAR_TOL)?;
    let subsets: Vec<_> = sets.iter().map(|s| subset_from_spec(&g, s)).collect::<Result<_>>()?;
    let refs: Vec<&_> = subsets.iter().collect();
    let report = criterion_check(&g, &t, &refs, eps, m, parse_shift_search(search)?, &ctx.budget)?;
    let results = CriterionCheckResults {
        group: g.spec().format(),
        sets: sets.to_vec(),
        set_sizes: subsets.iter().map(|s| s.count()).collect(),
        search: search.to_string(),
        report,
    };
    ctx.emit("criterion check", results)
}

fn cmd_growth_gamma(ctx: &Ctx, args: &PairArgs) -> Result<()> {
    let g = ctx.build(&args.spec)?;
    let a = subset_from_spec(&g, &args.a)?;
    let b = subset_from_spec(&g, &args.b)?;
    let gamma = gamma_statistic(&g, &a, &b, &ctx.budget)?;
    let pairs = BigRational::from_integer(BigInt::from((a.count() * b.count()) as u64));
    let bound = &pairs / &gamma;
    let bound_ceil = bound.ceil().to_integer().to_u64().unwrap_or(u64::MAX);
    let best = max_skew_product(&g, &a, &b, SkewStrategy::Exhaustive, &ctx.budget)?;
    let holds = BigRational::from_integer(BigInt::from(best.size as u64)) >= bound;
    let results = GammaResults {
        group: g.spec().format(),
        a: args.a.clone(),
        b: args.b.clone(),
        a_size: a.count(),
        b_size: b.count(),
        gamma: rational_strings(&gamma),
        bound: rational_strings(&bound),
        bound_ceil,
        witness_sigma: best.sigma,
        witness_sigma_string: g.element_string(best.sigma),
        skew_size: best.size as u64,
        holds,
    };
    ctx.emit("growth gamma", results)
}

fn cmd_growth_concentrate(ctx: &Ctx, spec: &str, a_spec: &str) -> Result<()> {
    let g = ctx.build(spec)?;
    let a = subset_from_spec(&g, a_spec)?;
    let c = class_concentration(&g, &a, &ctx.budget)?;
    let info = &g.classes()[c.class as usize];
    let results = ConcentrateResults {
        group: g.spec().format(),
        set: a_spec.to_string(),
        set_size: a.count(),
        shift: c.shift,
        shift_string: g.element_string(c.shift),
        class_index: c.class,
        class_rep: g.element_string(info.rep),
        class_size: info.size,
        count: c.count,
    };
    ctx.emit("growth concentrate", results)
}

fn cmd_growth_classbound(ctx: &Ctx, pair: &PairArgs, class: u32) -> Result<()> {
    let g = ctx.build(&pair.spec)?;
    let a = subset_from_spec(&g, &pair.a)?;
    let b = subset_from_spec(&g, &pair.b)?;
    let (lhs, rhs) = expected_skew_product_check(&g, &a, &b, class, &ctx.budget)?;
    let results = ClassboundResults {
        group: g.spec().format(),
        a: pair.a.clone(),
        b: pair.b.clone(),
        a_size: a.count(),
        b_size: b.count(),
        class_index: class,
        holds: lhs >= rhs,
        lhs: rational_strings(&lhs),
        rhs: rational_strings(&rhs),
    };
    ctx.emit("growth classbound", results)
}

fn cmd_growth_globality(ctx: &Ctx, spec: &str, a_spec: &str, d_max: usize) -> Result<()> {
    let g = ctx.build(spec)?;
    let a = subset_from_spec(&g, a_spec)?;
    let report = globality_profile(&g, &a, d_max, &ctx.budget)?;
    let results =
        GlobalityResults { group: g.spec().format(), set: a_spec.to_string(), report };
    ctx.emit("growth globality", results)
}

fn cmd_growth_cover(ctx: &Ctx, spec: &str, a_spec: &str, m_max: usize) -> Result<()> {
    let g = ctx.build(spec)?;
    let a = subset_from_spec(&g, a_spec)?;
    let witness = conjugate_cover_search(&g, &a, m_max, ctx.seed, &ctx.budget)?;
    let results = match witness {
        Some(w) => {
            let covered = verify_conjugate_cover(&g, &a, &w.shifts, &ctx.budget)?;
            CoverResults {
                group: g.spec().format(),
                set: a_spec.to_string(),
                set_size: a.count(),
                m_max,
                found: true,
                m: Some(w.m),
                shift_strings: w.shifts.iter().map(|&s| g.element_string(s)).collect(),
                shifts: w.shifts,
                covered,
            }
        }
        None => CoverResults {
            group: g.spec().format(),
            set: a_spec.to_string(),
            set_size: a.count(),
            m_max,
            found: false,
            m: None,
            shifts: Vec::new(),
            shift_strings: Vec::new(),
            covered: false,
        },
    };
    ctx.emit("growth cover", results)
}

fn cmd_partitions_scan(ctx: &Ctx, n: u32, mode: &str) -> Result<()> {
    let parsed = if mode == "virtual" {
        ScanMode::VirtualRatio
    } else if mode == "lsbound" {
        ScanMode::LsBound
    } else if let Some(rest) = mode.strip_prefix("fixedpoints:") {
        ScanMode::FixedPointThreshold(rest.parse().map_err(|_| bad_flag("mode", mode))?)
    } else {
        return Err(bad_flag("mode", mode));
    };
    let fmt_parts = |p: &[u32]| p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("+");
    let mut lines = Vec::new();
    match charbound_scan(n, parsed)? {
        ScanTable::VirtualRatio(rows) => {
            lines.push("lambda,degree,virtual_degree,ratio,log_ratio".to_string());
            for r in rows {
                lines.push(format!(
                    "{},{},{},{},{}",
                    fmt_parts(&r.lambda),
                    r.degree,
                    r.virtual_degree,
                    r.ratio,
                    r.log_ratio.map_or(String::new(), |x| x.to_string()),
                ));
            }
        }
        ScanTable::LsBound(rows) => {
            lines.push("lambda,class,fixed_points,abs_char,bound,margin,in_scope".to_string());
            for r in rows {
                lines.push(format!(
                    "{},{},{},{},{},{},{}",
                    fmt_parts(&r.lambda),
                    fmt_parts(&r.class),
                    r.fixed_points,
                    r.abs_char,
                    r.bound,
                    r.margin,
                    r.in_scope,
                ));
            }
        }
        ScanTable::FixedPoint(rows) => {
            lines.push("lambda,degree,max_abs_char,argmax_class,exponent".to_string());
            for r in rows {
                lines.push(format!(
                    "{},{},{},{},{}",
                    fmt_parts(&r.lambda),
                    r.degree,
                    r.max_abs_char,
                    fmt_parts(&r.argmax_class),
                    r.exponent.map_or(String::new(), |x| x.to_string()),
                ));
            }
        }
    }
    ctx.emit_text(&(lines.join("\n") + "\n"))
}

fn cmd_fq_count(ctx: &Ctx, n: usize, q: u32) -> Result<()> {
    let mut ranks = Vec::new();
    let mut total = num_bigint::BigUint::from(0u32);
    for r in 0..=n {
        let c = count_rank(r, n, q)?;
        total += &c;
        ranks.push(c.to_string());
    }
    let results = FqCountResults { n, q, total: total.to_string(), ranks };
    ctx.emit("fq count", results)
}

fn cmd_fq_nsum(ctx: &Ctx, ranks: &[usize], t: usize, n: usize, q: u32) -> Result<()> {
    let target = rank_representative(t, n, q)?;
    let count = nsum_for_target(ranks, &target, q, &ctx.budget)?;
    let results =
        FqNsumResults { ranks: ranks.to_vec(), t, n, q, count: count.to_string() };
    ctx.emit("fq nsum", results)
}

fn cmd_fq_ratio_scan(ctx: &Ctx, n: usize, q: u32, r_min: Option<usize>) -> Result<()> {
    let r_min = r_min.unwrap_or((2 * n).div_ceil(3));
    let scan = nsum_ratio_scan(n, q, r_min, &ctx.budget)?;
    ctx.emit("fq ratio-scan", RatioScanResults { scan })
}

fn parse_zm(s: &str) -> Result<(u64, usize)> {
    let (m, d) = s.split_once(':').ok_or_else(|| bad_flag("zm", s))?;
    Ok((
        m.parse().map_err(|_| bad_flag("zm", s))?,
        d.parse().map_err(|_| bad_flag("zm", s))?,
    ))
}

fn cmd_fq_energy(
    ctx: &Ctx,
    n: Option<usize>,
    q: Option<u32>,
    zm: Option<&str>,
    set_paths: &[PathBuf],
) -> Result<()> {
    let (ambient, sets, label) = match (n, q, zm) {
        (Some(n), Some(q), None) => {
            let sets: Vec<Vec<u64>> =
                set_paths.iter().map(|p| read_matrix_set(p, n, q)).collect::<Result<_>>()?;
            (Ambient::Mat { n, q }, sets, format!("mat:{n},{q}"))
        }
        (None, None, Some(zm)) => {
            let (m, d) = parse_zm(zm)?;
            let sets: Vec<Vec<u64>> =
                set_paths.iter().map(|p| read_index_set(p)).collect::<Result<_>>()?;
            (Ambient::ZmPow { m, d }, sets, format!("zm:{m},{d}"))
        }
        _ => {
            return Err(Error::InvalidParameters(
                "pass either --n with --q, or --zm <m>:<d>".into(),
            ))
        }
    };
    let energy = additive_energy(&ambient, &sets, &ctx.budget)?;
    let (sumset_size, bound) = sumset_energy_check(&ambient, &sets, &ctx.budget)?;
    let holds = BigRational::from_integer(BigInt::from(sumset_size)) >= bound;
    let results = EnergyResults {
        ambient: label,
        set_sizes: sets.iter().map(|s| s.len()).collect(),
        energy: energy.to_string(),
        sumset_size,
        bound: rational_strings(&bound),
        holds,
    };
    ctx.emit("fq energy", results)
}

fn cmd_fq_cover(
    ctx: &Ctx,
    n: usize,
    q: u32,
    set_paths: &[PathBuf],
    mu_max: usize,
) -> Result<()> {
    let sets: Vec<Vec<u64>> =
        set_paths.iter().map(|p| read_matrix_set(p, n, q)).collect::<Result<_>>()?;
    let cover = dilate_cover_search(&sets, n, q, mu_max, ctx.seed, &ctx.budget)?;
    let results = match cover {
        Some(c) => FqCoverResults {
            n,
            q,
            mu_max,
            set_sizes: sets.iter().map(|s| s.len()).collect(),
            sets,
            found: true,
            mu: Some(c.mu),
            pairs: c.pairs.iter().map(|(a, b)| [a.format(), b.format()]).collect(),
            verified: true,
        },
        None => FqCoverResults {
            n,
            q,
            mu_max,
            set_sizes: sets.iter().map(|s| s.len()).collect(),
            sets,
            found: false,
            mu: None,
            pairs: Vec::new(),
            verified: false,
        },
    };
    ctx.emit("fq cover", results)
}

fn cmd_sl_akblcm(
    ctx: &Ctx,
    n: usize,
    q: u32,
    random: Option<usize>,
    matrix: Option<&Path>,
) -> Result<()> {
    let f = Fq::new(q)?;
    let inputs: Vec<FqMat> = match (random, matrix) {
        (Some(k), None) => {
            let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed);
            (0..k).map(|_| random_unipotent(n, q, &mut rng)).collect()
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            vec![FqMat::parse(text.trim(), q)?]
        }
        (None, None) => vec![FqMat::identity(n)],
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let mut instances = Vec::new();
    let mut failures = 0usize;
    for input in &inputs {
        match akblcm_solve(input, q) {
            Ok(factors) => {
                let matches = factors.product(f) == *input;
                if !matches {
                    failures += 1;
                }
                instances.push(AkblcmInstance {
                    input: input.format(),
                    ok: true,
                    error: None,
                    factors: Some(AkblcmFactorRow {
                        a: factors.a.format(),
                        k: factors.k.format(),
                        b: factors.b.format(),
                        l: factors.l.format(),
                        c: factors.c.format(),
                        m: factors.m.format(),
                    }),
                    product_matches: Some(matches),
                });
            }
            Err(e) => {
                failures += 1;
                instances.push(AkblcmInstance {
                    input: input.format(),
                    ok: false,
                    error: Some(e.to_string()),
                    factors: None,
                    product_matches: None,
                });
            }
        }
    }
    let results = AkblcmResults { n, q, instances, failures };
    ctx.emit("sl akblcm", results)
}

fn cmd_suite(ctx: &Ctx, level: &str) -> Result<i32> {
    let report = match level {
        "smoke" => battery::run_smoke(ctx.seed),
        "full" => battery::run_suite_full(ctx.seed),
        other => return Err(bad_flag("level", other)),
    };
    let all_pass = report.all_pass;
    let first_failure = report.criteria.iter().find(|c| !c.pass).map(|c| (c.id, c.name));
    ctx.emit("suite", report)?;
    if let Some((id, name)) = first_failure {
        eprintln!("suite aborted: criterion {id} ({name}) failed");
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_verify_witness(ctx: &Ctx, path: &Path) -> Result<i32> {
    let results: VerifyResults = verify_witness(path)?;
    let ok = results.all_pass;
    ctx.emit("verify-witness", results)?;
    Ok(if ok { 0 } else { 1 })
}

// ---------------------------------------------------------------------------

fn dispatch(cli: Cli) -> Result<i32> {
    let workers = cli.workers.or_else(|| {
        std::env::var("PRODLAB_WORKERS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(w) = workers {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let echo = ConfigEcho {
        args: std::env::args().skip(1).collect(),
        seed: cli.seed,
        budget: cli.budget,
        order_cap: cli.order_cap,
        workers,
    };
    let ctx = Ctx {
        echo,
        budget: Budget::new(cli.budget),
        order_cap: cli.order_cap,
        seed: cli.seed,
        timing: cli.timing,
        out: cli.out,
        started: Instant::now(),
    };
    match cli.command {
        Command::Group { spec } => cmd_group(&ctx, &spec).map(|_| 0),
        Command::Chartable { spec, tol, json: _, csv } => {
            cmd_chartable(&ctx, &spec, tol, csv).map(|_| 0)
        }
        Command::Zeta { spec, s, include_trivial } => {
            cmd_zeta(&ctx, &spec, &s, include_trivial).map(|_| 0)
        }
        Command::Fourier { spec, set } => cmd_fourier(&ctx, &spec, &set).map(|_| 0),
        Command::Frobenius { sub } => match sub {
            FrobeniusCmd::Verify { spec, m, sets, mode } => {
                cmd_frobenius(&ctx, &spec, m, &sets, &mode).map(|_| 0)
            }
        },
        Command::Criterion { sub } => match sub {
            CriterionCmd::Check { spec, eps, m, sets, search } => {
                cmd_criterion(&ctx, &spec, eps, m, &sets, &search).map(|_| 0)
            }
        },
        Command::Growth { sub } => match sub {
            GrowthCmd::Gamma(args) => cmd_growth_gamma(&ctx, &args).map(|_| 0),
            GrowthCmd::Concentrate { spec, a } => {
                cmd_growth_concentrate(&ctx, &spec, &a).map(|_| 0)
            }
            GrowthCmd::Classbound { pair, class } => {
                cmd_growth_classbound(&ctx, &pair, class).map(|_| 0)
            }
            GrowthCmd::Globality { spec, a, d_max } => {
                cmd_growth_globality(&ctx, &spec, &a, d_max).map(|_| 0)
            }
            GrowthCmd::Cover { spec, a, m_max } => {
                cmd_growth_cover(&ctx, &spec, &a, m_max).map(|_| 0)
            }
        },
        Command::Partitions { sub } => match sub {
            PartitionsCmd::Scan { n, mode } => cmd_partitions_scan(&ctx, n, &mode).map(|_| 0),
        },
        Command::Fq { sub } => match sub {
            FqCmd::Count { n, q } => cmd_fq_count(&ctx, n, q).map(|_| 0),
            FqCmd::Nsum { ranks, t, n, q } => cmd_fq_nsum(&ctx, &ranks, t, n, q).map(|_| 0),
            FqCmd::RatioScan { n, q, r_min } => {
                cmd_fq_ratio_scan(&ctx, n, q, r_min).map(|_| 0)
            }
            FqCmd::Energy { n, q, zm, sets } => {
                cmd_fq_energy(&ctx, n, q, zm.as_deref(), &sets).map(|_| 0)
            }
            FqCmd::Cover { n, q, sets, mu_max } => {
                cmd_fq_cover(&ctx, n, q, &sets, mu_max).map(|_| 0)
            }
        },
        Command::Sl { sub } => match sub {
            SlCmd::Akblcm { n, q, random, matrix } => {
                cmd_sl_akblcm(&ctx, n, q, random, matrix.as_deref()).map(|_| 0)
            }
        },
        Command::Suite { level } => cmd_suite(&ctx, &level),
        Command::VerifyWitness { report } => cmd_verify_witness(&ctx, &report),
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
