//! Desk-scale laboratory for product growth and mixing in finite simple groups.
//!
//! The crate builds small groups (symmetric, alternating, special linear and
//! projective special linear families, plus user-supplied Cayley tables) with
//! dense element indexing, computes their numerical character tables, and runs
//! exact and statistical experiments on product sets: nonabelian Fourier
//! projections, mixing inequalities, conjugate covering, character bounds for
//! symmetric groups, and matrix-rank counting over small finite fields.

pub mod bitset;
pub mod budget;
pub mod chartable;
pub mod error;
pub mod fourier;
pub mod fq;
pub mod fqmat;
pub mod group;
pub mod growth;
pub mod matcount;
pub mod partitions;
pub mod perm;

pub use bitset::BitSet;
pub use budget::{Budget, DEFAULT_BUDGET};
pub use chartable::{character_table, witten_zeta, CharTable};
pub use error::{Error, Result};
pub use fourier::{
    convolve, criterion_check, frobenius_lhs, frobenius_rhs, linf_mixing_distance,
    normalized_indicator, project, projection_norm_sq, CriterionReport, GroupFunction,
    SampleMode, ShiftSearch,
};
pub use fq::Fq;
pub use fqmat::FqMat;
pub use group::{
    build_from_table, build_group, subset_from_spec, BuildOptions, Group, GroupSpec, Subset,
};
pub use growth::{
    class_concentration, conjugate_cover_search, expected_skew_product_check, gamma_statistic,
    globality_profile, umvirate_triple_cover, verify_conjugate_cover, Concentration,
    CoverWitness, GlobalityReport,
};
pub use matcount::{
    additive_energy, akblcm_solve, automorphism_growth_search, count_injections, count_rank,
    count_subspaces, dilate_cover_search, graph_matrix_membership, nsum_bruteforce,
    nsum_for_target, nsum_ratio_scan, quadric_series_bound, sumset_energy_check, un_tn_action,
    AkblcmFactors, Ambient, DilateCover, GraphPattern, GrowthAction, GrowthOutcome, RatioScan,
    SearchStrategy,
};
pub use partitions::{charbound_scan, perm_with_cycle_type, Partition, ScanMode, ScanTable};
pub use perm::Perm;
