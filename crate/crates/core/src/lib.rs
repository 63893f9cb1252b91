//! Numerics for the fast escaping set `A(f)` of a transcendental entire
//! function when its level sets form a spider's web.
//!
//! The crate is organised bottom-up:
//!
//! * [`function`] evaluates the supported entire maps, samples maximum and
//!   minimum modulus on circles and builds the iterated maximum-modulus ladder
//!   `M^n(R, f)`.
//! * [`escape`] classifies points and uniform grids against the levels
//!   `A_R^L(f)` (truncated at a finite iteration depth), labels complement
//!   components and reports spider's-web evidence.
//! * [`loops`] extracts fundamental holes `H_n` and loops `L_n` and checks their
//!   nesting, forward mapping and disjointness numerically.
//! * [`itinerary`] builds the annular partition `B_m`, computes itineraries and
//!   detects the expanding indices `m(j)`.
//! * [`orbit`] generates admissible itineraries for the bounded, bounded
//!   suborbit and escaping orbit types and realises points with a prescribed
//!   itinerary prefix by backward quadtree refinement.
//! * [`periodic`] finds repelling periodic points, gathers multi-scale
//!   singleton evidence and computes covering degrees by winding numbers.
//!
//! Every set-valued answer here is computed at finite depth and finite
//! resolution. Results are evidence, never certificates.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod escape;
pub mod function;
pub mod geometry;
pub mod itinerary;
pub mod loops;
pub mod mask;
pub mod orbit;
pub mod periodic;

pub use error::{CoreError, Result};
pub use escape::{
    classify_grid, classify_point, complement_components, spiders_web_verdict, ComponentMap, GridClassification,
    GridSpec, PointVerdict, WebVerdict,
};
pub use function::{
    build_ladder, max_modulus, min_modulus, validate_radius, EntireFunction, EntireMap, Family, RadiusCertificate,
    RadiusLadder, Rung,
};
pub use itinerary::{
    build_partition, compute_itinerary, detect_expanding_indices, validate_itinerary_rule, AnnulusIndex, ExpandingSet,
    Itinerary, PartitionIndexer, Truncation,
};
pub use loops::{
    check_forward_loop_map, check_nesting, extract_hole, find_disjointness_n, trace_loop, FundamentalHole,
    FundamentalLoop, FundamentalLoopSet,
};
pub use num_complex::Complex64;
pub use orbit::{
    branch_pair, determinable_length, generate_itinerary, realize_point, verify_orbit_type, EscapeSchedule, OrbitKind,
    OrbitTypeParams, RegionChain,
};
pub use periodic::{
    find_periodic_points, polynomial_like_degree, singleton_evidence, winding_degree, DegreeReport, NewtonConfig,
    PeriodicPointRecord, Region, SingletonEvidence,
};

/// Moduli above this are treated as escaped past the top of any ladder.
pub const OVERFLOW_THRESHOLD: f64 = 1e300;

/// Banner attached to every truncated-depth verdict that leaves the crate.
pub const EVIDENCE_BANNER: &str = "evidence, not proof: finite iteration depth and finite grid resolution";
