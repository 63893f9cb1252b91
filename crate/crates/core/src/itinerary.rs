//! The annular partition `B_0 = H_0`, `B_m = H_m \ H_{m-1}`, itineraries
//! under `f^N`, and the expanding indices `m(j)`.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::escape::GridSpec;
use crate::function::EntireMap;
use crate::loops::FundamentalLoopSet;
use crate::mask::Mask;

/// Where a point sits relative to the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnnulusIndex {
    /// Inside `B_m`, more than half a cell from every loop.
    Plain(usize),
    /// Within half a cell of the loop bounding `H_m` (stride units).
    OnLoop(usize),
    /// Beyond the outermost usable loop.
    Outside,
}

impl AnnulusIndex {
    pub fn plain(self) -> Option<usize> {
        match self {
            AnnulusIndex::Plain(m) => Some(m),
            _ => None,
        }
    }

    /// True when the point lies in the closure of `B_m`.
    pub fn in_closure_of(self, m: usize) -> bool {
        match self {
            AnnulusIndex::Plain(k) => k == m,
            AnnulusIndex::OnLoop(k) => k == m || k + 1 == m,
            AnnulusIndex::Outside => false,
        }
    }
}

/// Point location in the partition `{B_m}` at stride `N`.
///
/// Loop `m` (stride units) is the boundary of the filled hole `H_{mN}`, which
/// runs along cell edges, so containment is a cell lookup in the filled mask
/// and the half-cell band is decided against the edges of the neighbouring
/// cells.
#[derive(Debug, Clone)]
pub struct PartitionIndexer {
    pub grid: GridSpec,
    pub stride: usize,
    /// Filled `H_{mN}` for `m = 0..=top_index`.
    pub regions: Vec<Mask>,
    /// Largest `|z|` on `H_{mN}`.
    pub radii: Vec<f64>,
    pub top_index: usize,
}

/// Build the partition from every `stride`-th hole of `ls`.
pub fn build_partition(ls: &FundamentalLoopSet, stride: usize) -> Result<PartitionIndexer> {
    let required = ls.n_disjoint().ok_or(CoreError::DisjointnessNotFound { loops: ls.len() })?;
    if stride < required {
        return Err(CoreError::StrideTooSmall { stride, required });
    }
    let picked: Vec<_> = ls.holes.iter().step_by(stride).collect();
    if picked.len() < 3 {
        return Err(CoreError::InsufficientLoops { needed: 3, available: picked.len() });
    }
    Ok(PartitionIndexer {
        grid: ls.grid,
        stride,
        regions: picked.iter().map(|h| h.filled.clone()).collect(),
        radii: picked.iter().map(|h| h.max_radius()).collect(),
        top_index: picked.len() - 1,
    })
}

impl PartitionIndexer {
    /// Partition from explicit filled regions, innermost first.
    pub fn from_regions(grid: &GridSpec, stride: usize, regions: Vec<Mask>) -> Result<Self> {
        if regions.len() < 3 {
            return Err(CoreError::InsufficientLoops { needed: 3, available: regions.len() });
        }
        let radii = regions
            .iter()
            .map(|m| {
                let mut best: f64 = 0.0;
                for j in 0..m.res() {
                    for i in 0..m.res() {
                        if m.get(i, j) {
                            for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                                best = best.max(grid.vertex(i as i64 + a, j as i64 + b).norm());
                            }
                        }
                    }
                }
                best
            })
            .collect();
        let top_index = regions.len() - 1;
        Ok(Self { grid: *grid, stride, regions, radii, top_index })
    }

    /// True when `z` lies within half a cell of the boundary of region `m`.
    fn near_boundary(&self, m: usize, i: i64, j: i64, fu: f64, fv: f64) -> bool {
        let r = &self.regions[m];
        let inside = |a: i64, b: i64| r.get_signed(a, b);
        let dist_to_unit = |t: f64, k: i64| -> f64 {
            // Distance from t to the interval [k, k + 1].
            let lo = k as f64;
            if t < lo {
                lo - t
            } else if t > lo + 1.0 {
                t - lo - 1.0
            } else {
                0.0
            }
        };
        for k in -1..=1 {
            let dy = dist_to_unit(fv, k);
            // Vertical edges on x = i and x = i + 1 between rows j + k.
            if inside(i - 1, j + k) != inside(i, j + k) && fu.hypot(dy) < 0.5 {
                return true;
            }
            if inside(i, j + k) != inside(i + 1, j + k) && (1.0 - fu).hypot(dy) < 0.5 {
                return true;
            }
            let dx = dist_to_unit(fu, k);
            // Horizontal edges on y = j and y = j + 1 between columns i + k.
            if inside(i + k, j - 1) != inside(i + k, j) && fv.hypot(dx) < 0.5 {
                return true;
            }
            if inside(i + k, j) != inside(i + k, j + 1) && (1.0 - fv).hypot(dx) < 0.5 {
                return true;
            }
        }
        false
    }

    pub fn annulus_index(&self, z: Complex64) -> AnnulusIndex {
        if !z.is_finite() {
            return AnnulusIndex::Outside;
        }
        let (u, v) = self.grid.lattice_coords(z);
        let r = self.grid.resolution as f64;
        if u < -1.0 || v < -1.0 || u > r + 1.0 || v > r + 1.0 {
            return AnnulusIndex::Outside;
        }
        let (i, j) = (u.floor() as i64, v.floor() as i64);
        let (fu, fv) = (u - i as f64, v - j as f64);
        for m in 0..=self.top_index {
            if self.near_boundary(m, i, j, fu, fv) {
                return AnnulusIndex::OnLoop(m);
            }
            if self.regions[m].get_signed(i, j) {
                return AnnulusIndex::Plain(m);
            }
        }
        AnnulusIndex::Outside
    }

    /// Bounding box of region `m` in the plane: (lower-left, upper-right).
    pub fn region_bbox(&self, m: usize) -> (Complex64, Complex64) {
        let r = &self.regions[m];
        let res = r.res();
        let (mut i0, mut j0, mut i1, mut j1) = (res, res, 0, 0);
        for j in 0..res {
            for i in 0..res {
                if r.get(i, j) {
                    i0 = i0.min(i);
                    j0 = j0.min(j);
                    i1 = i1.max(i + 1);
                    j1 = j1.max(j + 1);
                }
            }
        }
        if i0 > i1 {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        (self.grid.vertex(i0 as i64, j0 as i64), self.grid.vertex(i1 as i64, j1 as i64))
    }

    /// Cells of `B_m` (region `m` minus region `m - 1`) as a mask.
    pub fn annulus_mask(&self, m: usize) -> Mask {
        let res = self.grid.resolution;
        Mask::from_fn(res, |i, j| self.regions[m].get(i, j) && (m == 0 || !self.regions[m - 1].get(i, j)))
    }
}

/// Probe statistics for one candidate index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexConfidence {
    pub m: usize,
    /// Probes that landed in `B_m`.
    pub probes: usize,
    /// Of those, probes whose image fell in `H_{m-1}`.
    pub hits: usize,
    pub fraction: f64,
    pub expanding: bool,
}

/// The detected expanding indices `m(0) = 0 < m(1) < ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandingSet {
    pub stride: usize,
    pub indices: Vec<usize>,
    /// Largest index that was examined; nothing is known beyond it.
    pub top_index: usize,
    pub confidence: Vec<IndexConfidence>,
}

impl ExpandingSet {
    /// A set given by hand (tests, fixtures).
    pub fn new(stride: usize, indices: impl IntoIterator<Item = usize>, top_index: usize) -> Self {
        let set: BTreeSet<usize> = std::iter::once(0).chain(indices).collect();
        Self { stride, indices: set.into_iter().collect(), top_index, confidence: Vec::new() }
    }

    pub fn contains(&self, m: usize) -> bool {
        self.indices.binary_search(&m).is_ok()
    }

    /// `m(j)`, when known.
    pub fn m(&self, j: usize) -> Option<usize> {
        self.indices.get(j).copied()
    }
}

/// Detect indices `m` where `f^N(B̄_m)` covers `H̄_{m+1}`.
///
/// A lattice of `probes` points over the bounding box of `H_m` is filtered to
/// `B_m` and mapped by `f^N`. Under the dichotomy either every image stays in
/// `B̄_{m+1}` or the images cover all of `H_{m+1}`; an image inside `H_{m-1}`
/// decides the second case and is far from the loop-band artefacts that an
/// image just inside `H_m` can be. `m = 0` is always expanding.
pub fn detect_expanding_indices<F: EntireMap + ?Sized>(f: &F, p: &PartitionIndexer, probes: usize) -> ExpandingSet {
    let side = (probes as f64).sqrt().ceil().max(1.0) as usize;
    let mut confidence = vec![IndexConfidence { m: 0, probes: 0, hits: 0, fraction: 1.0, expanding: true }];
    let mut indices = vec![0];
    for m in 1..=p.top_index {
        let (lo, hi) = p.region_bbox(m);
        let step = (hi - lo) / side as f64;
        let (inside, hits) = (0..side)
            .into_par_iter()
            .map(|row| {
                let mut inside = 0usize;
                let mut hits = 0usize;
                for col in 0..side {
                    let z = lo + Complex64::new((col as f64 + 0.5) * step.re, (row as f64 + 0.5) * step.im);
                    if p.annulus_index(z) != AnnulusIndex::Plain(m) {
                        continue;
                    }
                    inside += 1;
                    if let Some(w) = f.iterate(z, p.stride) {
                        if matches!(p.annulus_index(w), AnnulusIndex::Plain(k) if k < m) {
                            hits += 1;
                        }
                    }
                }
                (inside, hits)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let expanding = hits > 0;
        if expanding {
            indices.push(m);
        }
        confidence.push(IndexConfidence {
            m,
            probes: inside,
            hits,
            fraction: if inside > 0 { hits as f64 / inside as f64 } else { 0.0 },
            expanding,
        });
    }
    ExpandingSet { stride: p.stride, indices, top_index: p.top_index, confidence }
}

/// Why an itinerary stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    DepthReached,
    LeftCovered,
    OnLoop,
    Overflow,
    /// The construction could not decide further symbols.
    ScheduleLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub z: Option<Complex64>,
    pub stride: usize,
    pub symbols: Vec<usize>,
    pub truncation: Truncation,
    pub mset: Vec<usize>,
}

impl Itinerary {
    /// A symbol sequence with no associated point.
    pub fn from_symbols(symbols: Vec<usize>, mset: &ExpandingSet) -> Self {
        Self { z: None, stride: mset.stride, symbols, truncation: Truncation::DepthReached, mset: mset.indices.clone() }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Symbols `s_k` with `f^{kN}(z) ∈ B_{s_k}`, for at most `depth` symbols.
pub fn compute_itinerary<F: EntireMap + ?Sized>(
    f: &F,
    p: &PartitionIndexer,
    mset: &ExpandingSet,
    z: Complex64,
    depth: usize,
) -> Itinerary {
    let mut symbols = Vec::with_capacity(depth);
    let mut w = z;
    let mut truncation = Truncation::DepthReached;
    while symbols.len() < depth {
        match p.annulus_index(w) {
            AnnulusIndex::Plain(m) => symbols.push(m),
            AnnulusIndex::OnLoop(_) => {
                truncation = Truncation::OnLoop;
                break;
            }
            AnnulusIndex::Outside => {
                truncation = Truncation::LeftCovered;
                break;
            }
        }
        if symbols.len() == depth {
            break;
        }
        match f.iterate(w, p.stride) {
            Some(next) => w = next,
            None => {
                truncation = Truncation::Overflow;
                break;
            }
        }
    }
    Itinerary { z: Some(z), stride: p.stride, symbols, truncation, mset: mset.indices.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub valid: bool,
    /// Index `n` of the first transition `s_n -> s_{n+1}` that breaks the rule.
    pub first_violation: Option<usize>,
}

/// `s_{n+1} ∈ {0, ..., s_n + 1}` when `s_n` is expanding, else `s_{n+1} = s_n + 1`.
pub fn validate_itinerary_rule(it: &Itinerary) -> RuleCheck {
    let first_violation = it.symbols.windows(2).position(|w| {
        let (s, t) = (w[0], w[1]);
        if it.mset.binary_search(&s).is_ok() {
            t > s + 1
        } else {
            t != s + 1
        }
    });
    RuleCheck { valid: first_violation.is_none(), first_violation }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(res: usize) -> GridSpec {
        GridSpec::new(Complex64::new(0.0, 0.0), res as f64 / 2.0, res, 1, 0)
    }

    fn disk(g: &GridSpec, radius: f64) -> Mask {
        Mask::from_fn(g.resolution, |i, j| g.cell_center(i, j).norm() < radius)
    }

    fn circles() -> (FundamentalLoopSet, GridSpec) {
        let g = grid(80);
        let set = FundamentalLoopSet::from_masks(&g, &[disk(&g, 10.0), disk(&g, 20.0), disk(&g, 30.0)]).unwrap();
        (set, g)
    }

    fn rule(symbols: Vec<usize>, mset: &[usize]) -> RuleCheck {
        validate_itinerary_rule(&Itinerary::from_symbols(symbols, &ExpandingSet::new(1, mset.iter().copied(), 10)))
    }

    #[test]
    fn partition_from_concentric_circles() {
        let (set, _) = circles();
        let p = build_partition(&set, 1).unwrap();
        assert_eq!(p.top_index, 2);
        assert_eq!(p.annulus_index(Complex64::new(0.0, 0.0)), AnnulusIndex::Plain(0));
        assert_eq!(p.annulus_index(Complex64::new(15.2, 0.3)), AnnulusIndex::Plain(1));
        assert_eq!(p.annulus_index(Complex64::new(25.3, 0.2)), AnnulusIndex::Plain(2));
        assert_eq!(p.annulus_index(Complex64::new(36.0, 0.0)), AnnulusIndex::Outside);
        assert_eq!(p.annulus_index(Complex64::new(400.0, 0.0)), AnnulusIndex::Outside);
        let v = set.loops[1].vertices[3];
        assert_eq!(p.annulus_index(v), AnnulusIndex::OnLoop(1));
        assert!(matches!(build_partition(&set, 2), Err(CoreError::InsufficientLoops { .. })));
    }

    #[test]
    fn band_is_half_a_cell() {
        let (set, g) = circles();
        let p = build_partition(&set, 1).unwrap();
        // Cell edges of loop 0 on the positive real axis sit at an integer x.
        let (i, j) = g.cell_of(Complex64::new(9.5, 0.5)).unwrap();
        assert!(set.holes[0].filled.get(i, j));
        assert!(!set.holes[0].filled.get(i + 1, j));
        let edge = g.vertex(i as i64 + 1, j as i64).re;
        assert_eq!(p.annulus_index(Complex64::new(edge - 0.49, 0.5)), AnnulusIndex::OnLoop(0));
        assert_eq!(p.annulus_index(Complex64::new(edge - 0.51, 0.5)), AnnulusIndex::Plain(0));
        assert_eq!(p.annulus_index(Complex64::new(edge + 0.51, 0.5)), AnnulusIndex::Plain(1));
    }

    #[test]
    fn index_is_monotone_in_containment() {
        let (set, g) = circles();
        let p = build_partition(&set, 1).unwrap();
        for k in 0..400 {
            let z = Complex64::from_polar(k as f64 * 0.1, k as f64 * 0.7);
            let w = z * 1.3;
            if let (Some(a), Some(b)) = (p.annulus_index(z).plain(), p.annulus_index(w).plain()) {
                assert!(a <= b, "{z} {w}");
            }
        }
        assert_eq!(g.resolution, 80);
    }

    #[test]
    fn rule_examples() {
        assert!(rule(vec![0, 1, 2, 3], &[0]).valid);
        assert_eq!(rule(vec![5, 7], &[0]).first_violation, Some(0));
        assert!(rule(vec![4, 0], &[0, 4]).valid);
        assert!(rule(vec![4, 5, 6, 0], &[0, 4]).first_violation == Some(2));
        assert!(!rule(vec![0, 2], &[0]).valid);
        assert!(rule(vec![], &[0]).valid);
    }

    struct Climb;
    impl EntireMap for Climb {
        fn apply(&self, z: Complex64) -> Complex64 {
            // Radial map sending each annulus of the circle fixture to the next.
            let r = z.norm();
            let target = if r < 10.0 { r * 1.5 } else { r + 10.0 };
            if r == 0.0 {
                Complex64::new(15.0, 0.0)
            } else {
                z * (target / r)
            }
        }
        fn deriv(&self, _: Complex64) -> Complex64 {
            Complex64::new(1.0, 0.0)
        }
    }

    #[test]
    fn stub_map_is_non_expanding_off_zero() {
        let (set, _) = circles();
        let p = build_partition(&set, 1).unwrap();
        let ms = detect_expanding_indices(&Climb, &p, 10_000);
        assert_eq!(ms.indices, vec![0]);
        assert!(ms.confidence[1].probes > 0);
        assert_eq!(ms.confidence[1].hits, 0);
    }

    #[test]
    fn stub_itinerary_climbs() {
        let (set, _) = circles();
        let p = build_partition(&set, 1).unwrap();
        let ms = ExpandingSet::new(1, [], 2);
        let it = compute_itinerary(&Climb, &p, &ms, Complex64::new(5.0, 0.0), 10);
        assert_eq!(it.symbols, vec![0, 0, 1, 2]);
        assert_eq!(it.truncation, Truncation::LeftCovered);
        let first = compute_itinerary(&Climb, &p, &ms, Complex64::new(0.0, 0.0), 1);
        assert_eq!(first.symbols, vec![0]);
        assert_eq!(first.truncation, Truncation::DepthReached);
    }
}
