//! Fundamental holes `H_n`, fundamental loops `L_n = ∂H_n`, and numerical
//! checks of their nesting, forward mapping and disjointness.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::escape::{check_ladder, classify_grid, classify_point, GridClassification, GridSpec};
use crate::function::{EntireMap, RadiusLadder, Rung};
use crate::geometry::{resample_closed, winding_number, SegmentIndex};
use crate::mask::Mask;

/// The complement component containing the origin at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalHole {
    pub index: usize,
    pub grid: GridSpec,
    /// Flood-filled complement cells.
    pub cells: Mask,
    /// `cells` plus everything it encloses; the region bounded by the loop.
    pub filled: Mask,
    pub area_cells: usize,
}

impl FundamentalHole {
    /// Hole `index` from a complement mask over `grid`.
    pub fn from_complement(index: usize, grid: &GridSpec, complement: &Mask) -> Result<Self> {
        let origin = grid
            .cell_of(Complex64::new(0.0, 0.0))
            .ok_or_else(|| CoreError::InvalidGrid("grid does not contain the origin".into()))?;
        if !complement.get(origin.0, origin.1) {
            return Err(CoreError::OriginNotInComplement);
        }
        let cells = Mask::flood_fill(grid.resolution, origin, |i, j| complement.get(i, j));
        let filled = cells.filled();
        let area_cells = cells.count();
        Ok(Self { index, grid: grid.at_level(index as i32), cells, filled, area_cells })
    }

    pub fn is_bounded(&self) -> bool {
        !self.cells.touches_border()
    }

    /// Largest `|z|` over the cells of the hole (cell corners included).
    pub fn max_radius(&self) -> f64 {
        let res = self.grid.resolution;
        let mut best: f64 = 0.0;
        for j in 0..res {
            for i in 0..res {
                if self.filled.get(i, j) {
                    for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        best = best.max(self.grid.vertex(i as i64 + a, j as i64 + b).norm());
                    }
                }
            }
        }
        best
    }
}

/// `H_n` from a level-`n` classification: flood fill from the origin cell.
pub fn extract_hole(gc: &GridClassification) -> Result<FundamentalHole> {
    if gc.spec.level < 0 {
        return Err(CoreError::InvalidParameter(format!(
            "fundamental holes live at levels n >= 0, got {}",
            gc.spec.level
        )));
    }
    FundamentalHole::from_complement(gc.spec.level as usize, &gc.spec, &gc.complement_mask())
}

/// Counterclockwise boundary of a filled hole, on cell edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalLoop {
    pub index: usize,
    pub grid: GridSpec,
    /// Lattice vertices, closed (first == last), collinear runs merged.
    pub lattice: Vec<(i64, i64)>,
    /// The same vertices in the plane.
    pub vertices: Vec<Complex64>,
    /// Winding number about the centre of the origin cell.
    pub winding: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopExport {
    pub n: usize,
    pub vertices: Vec<[f64; 2]>,
    pub closed: bool,
    pub winding: i32,
}

impl FundamentalLoop {
    pub fn export(&self) -> LoopExport {
        LoopExport {
            n: self.index,
            vertices: self.vertices.iter().map(|v| [v.re, v.im]).collect(),
            closed: self.vertices.first() == self.vertices.last(),
            winding: self.winding,
        }
    }

    /// Number of unit cell edges along the loop.
    pub fn edge_count(&self) -> i64 {
        self.lattice.windows(2).map(|w| (w[1].0 - w[0].0).abs() + (w[1].1 - w[0].1).abs()).sum()
    }

    pub fn length(&self) -> f64 {
        self.edge_count() as f64 * self.grid.cell_size()
    }
}

const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Trace the outer boundary of the hole with the region on the left.
///
/// At a vertex where the region touches itself diagonally the left turn is
/// taken, which keeps the two cells apart as 4-connectivity demands.
pub fn trace_loop(hole: &FundamentalHole) -> Result<FundamentalLoop> {
    if !hole.is_bounded() {
        return Err(CoreError::UnboundedHole { index: hole.index });
    }
    let f = &hole.filled;
    let inside = |i: i64, j: i64| f.get_signed(i, j);
    let res = f.res();
    let start = (0..res * res)
        .find(|&k| f.bits()[k])
        .map(|k| ((k % res) as i64, (k / res) as i64))
        .ok_or(CoreError::MissingLoop { index: hole.index })?;
    // Outgoing boundary edge from vertex (x, y) in direction d exists when the
    // cell on its left is inside and the cell on its right is not.
    let has_edge = |x: i64, y: i64, d: usize| -> bool {
        let (l, r) = match d {
            0 => ((x, y), (x, y - 1)),
            1 => ((x - 1, y), (x, y)),
            2 => ((x - 1, y - 1), (x - 1, y)),
            _ => ((x, y - 1), (x - 1, y - 1)),
        };
        inside(l.0, l.1) && !inside(r.0, r.1)
    };

    let mut lattice = vec![start];
    let (mut x, mut y) = start;
    let mut dir = 0usize;
    let mut steps = 0usize;
    let limit = 4 * res * res + 4;
    loop {
        x += DIRS[dir].0;
        y += DIRS[dir].1;
        steps += 1;
        let next = [(dir + 1) % 4, dir, (dir + 3) % 4]
            .into_iter()
            .find(|&d| has_edge(x, y, d))
            .expect("boundary of a filled region always continues");
        if (x, y) == start && next == 0 {
            break;
        }
        if next != dir {
            lattice.push((x, y));
        }
        dir = next;
        if steps > limit {
            unreachable!("loop tracing did not close");
        }
    }
    lattice.push(start);

    let grid = hole.grid;
    let vertices: Vec<Complex64> = lattice.iter().map(|&(i, j)| grid.vertex(i, j)).collect();
    let origin = grid.cell_of(Complex64::new(0.0, 0.0)).ok_or(CoreError::OriginNotInComplement)?;
    let winding = winding_number(&vertices, grid.cell_center(origin.0, origin.1));
    Ok(FundamentalLoop { index: hole.index, grid, lattice, vertices, winding })
}

/// Where a loop set came from, when it was computed rather than constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSource {
    pub ladder: RadiusLadder,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSeparation {
    pub inner: usize,
    pub outer: usize,
    /// Minimum vertex-to-segment distance, in cells.
    pub cells: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disjointness {
    pub n: usize,
    pub separations: Vec<LoopSeparation>,
}

/// Holes `H_0..H_K` and loops `L_0..L_K` over one grid.
#[derive(Debug, Clone)]
pub struct FundamentalLoopSet {
    pub grid: GridSpec,
    pub holes: Vec<FundamentalHole>,
    pub loops: Vec<FundamentalLoop>,
    pub source: Option<LoopSource>,
    pub disjointness: Option<Disjointness>,
}

impl FundamentalLoopSet {
    /// Classify `grid` at levels `0..count`, extract and trace each hole.
    pub fn extract<F: EntireMap + ?Sized>(
        f: &F,
        ladder: &RadiusLadder,
        grid: &GridSpec,
        count: usize,
        threads: usize,
    ) -> Result<Self> {
        if count == 0 {
            return Err(CoreError::InvalidParameter("need at least one hole".into()));
        }
        check_ladder(ladder, count as i32 - 1, grid.depth)?;
        let mut holes = Vec::with_capacity(count);
        for n in 0..count {
            let gc = classify_grid(f, ladder, &grid.at_level(n as i32), threads)?;
            holes.push(extract_hole(&gc)?);
        }
        let source = LoopSource { ladder: ladder.clone(), depth: grid.depth };
        Self::from_holes(grid, holes, Some(source))
    }

    /// Build a set from precomputed holes, tracing each loop.
    pub fn from_holes(grid: &GridSpec, holes: Vec<FundamentalHole>, source: Option<LoopSource>) -> Result<Self> {
        let loops = holes.iter().map(trace_loop).collect::<Result<Vec<_>>>()?;
        let mut set = Self { grid: grid.at_level(0), holes, loops, source, disjointness: None };
        if set.loops.len() >= 2 {
            set.disjointness = find_disjointness_n(&set).ok();
        }
        Ok(set)
    }

    /// Holes from complement masks, one per level.
    pub fn from_masks(grid: &GridSpec, complements: &[Mask]) -> Result<Self> {
        let holes = complements
            .iter()
            .enumerate()
            .map(|(n, m)| FundamentalHole::from_complement(n, grid, m))
            .collect::<Result<Vec<_>>>()?;
        Self::from_holes(grid, holes, None)
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.grid.cell_size()
    }

    pub fn n_disjoint(&self) -> Option<usize> {
        self.disjointness.as_ref().map(|d| d.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestingPair {
    pub n: usize,
    /// Cells of `H_n` missing from `H_{n+1}`.
    pub witnesses: usize,
    pub first_witness: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskInclusion {
    pub n: usize,
    /// `M^n(R)`, or `None` past the top of the ladder.
    pub radius: Option<f64>,
    /// Cells with centre inside the disk that are missing from `H_n`.
    pub witnesses: usize,
    pub first_witness: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestingReport {
    pub passed: bool,
    pub pairs: Vec<NestingPair>,
    /// Empty when the loop set carries no ladder.
    pub disks: Vec<DiskInclusion>,
}

/// Check `H_n ⊂ H_{n+1}` cellwise and `{|z| < M^n(R)} ⊂ H_n`.
pub fn check_nesting(ls: &FundamentalLoopSet) -> Result<NestingReport> {
    if ls.holes.len() < 2 {
        return Err(CoreError::InsufficientLoops { needed: 2, available: ls.holes.len() });
    }
    let pairs: Vec<NestingPair> = ls
        .holes
        .windows(2)
        .map(|w| {
            let first_witness = w[0].cells.first_not_in(&w[1].cells);
            let witnesses = w[0].cells.bits().iter().zip(w[1].cells.bits()).filter(|(&a, &b)| a && !b).count();
            NestingPair { n: w[0].index, witnesses, first_witness }
        })
        .collect();
    let mut disks = Vec::new();
    if let Some(src) = &ls.source {
        for hole in &ls.holes {
            let radius = match src.ladder.rung(hole.index)? {
                Rung::Finite(v) => Some(v),
                Rung::BeyondTop => None,
            };
            let bound = radius.unwrap_or(f64::INFINITY);
            let res = ls.grid.resolution;
            let mut witnesses = 0;
            let mut first_witness = None;
            for j in 0..res {
                for i in 0..res {
                    if ls.grid.cell_center(i, j).norm() < bound && !hole.cells.get(i, j) {
                        witnesses += 1;
                        first_witness.get_or_insert((i, j));
                    }
                }
            }
            disks.push(DiskInclusion { n: hole.index, radius, witnesses, first_witness });
        }
    }
    let passed = pairs.iter().all(|p| p.witnesses == 0) && disks.iter().all(|d| d.witnesses == 0);
    Ok(NestingReport { passed, pairs, disks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardMapReport {
    pub m: usize,
    pub samples: usize,
    /// Samples moved onto the level-`m` boundary by bisection before mapping.
    pub snapped: usize,
    /// One-sided Hausdorff distance from `f(L_m)` to `L_{m+1}`, in cells.
    pub max_cells: f64,
    pub mean_cells: f64,
    /// The same maximum in plane units.
    pub max_plane: f64,
}

const SNAP_BISECTIONS: usize = 40;
/// Half-length of the normal segment searched for a verdict change, in cells.
const SNAP_REACH: f64 = 2.0;
/// Probes on each side of the sample along that segment.
const SNAP_PROBES: i64 = 8;

/// Map `samples` arc-length samples of `L_m` by `f` and measure their distance
/// to `L_{m+1}`.
///
/// When the set carries its ladder each sample is first moved to the nearest
/// point, within two cells along the edge normal, the edge itself or a
/// diagonal, where the level-`m` verdict changes (located by bisection); the
/// staircase itself is not mapped.
pub fn check_forward_loop_map<F: EntireMap + ?Sized>(
    f: &F,
    ls: &FundamentalLoopSet,
    m: usize,
    samples: usize,
) -> Result<ForwardMapReport> {
    let (src, dst) = match (ls.loops.get(m), ls.loops.get(m + 1)) {
        (Some(a), Some(b)) => (a, b),
        (None, _) => return Err(CoreError::MissingLoop { index: m }),
        (_, None) => return Err(CoreError::MissingLoop { index: m + 1 }),
    };
    if samples == 0 {
        return Err(CoreError::InvalidParameter("need at least one sample".into()));
    }
    let h = ls.cell_size();
    let index = SegmentIndex::new(&dst.vertices);
    let pts = resample_closed(&src.vertices, samples);
    let results: Vec<(Option<f64>, bool)> = pts
        .par_iter()
        .map(|s| {
            let mut p = s.point;
            let mut snapped = false;
            if let Some(source) = &ls.source {
                let comp = |z| {
                    classify_point(f, &source.ladder, z, m as i32, source.depth)
                        .map(|v| !v.is_in_level())
                        .unwrap_or(false)
                };
                // The verdict change closest to the sample along the normal,
                // then the other three axis and diagonal directions.
                let mut best: Option<(i64, Complex64, Complex64, bool)> = None;
                for turn in [
                    Complex64::new(0.0, 1.0),
                    Complex64::new(1.0, 0.0),
                    Complex64::new(1.0, 1.0),
                    Complex64::new(1.0, -1.0),
                ] {
                    let dir = s.tangent * turn / turn.norm();
                    let probe = |k: i64| p + dir * (k as f64 * SNAP_REACH * h / SNAP_PROBES as f64);
                    let sides: Vec<bool> = (-SNAP_PROBES..=SNAP_PROBES).map(|k| comp(probe(k))).collect();
                    let nearest = (0..sides.len() - 1)
                        .filter(|&k| sides[k] != sides[k + 1])
                        .min_by_key(|&k| (2 * k as i64 + 1 - 2 * SNAP_PROBES).abs());
                    if let Some(k) = nearest {
                        let off = (2 * k as i64 + 1 - 2 * SNAP_PROBES).abs();
                        if best.is_none_or(|b| off < b.0) {
                            let k = k as i64;
                            best = Some((off, probe(k - SNAP_PROBES), probe(k + 1 - SNAP_PROBES), sides[k as usize]));
                        }
                    }
                }
                if let Some((_, mut a, mut b, side_a)) = best {
                    for _ in 0..SNAP_BISECTIONS {
                        let mid = (a + b) * 0.5;
                        if comp(mid) == side_a {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    p = (a + b) * 0.5;
                    snapped = true;
                }
            }
            let w = f.apply(p);
            if crate::function::escaped(w) {
                (None, snapped)
            } else {
                (Some(index.distance(w)), snapped)
            }
        })
        .collect();
    let mut max_plane: f64 = 0.0;
    let mut sum = 0.0;
    for (d, _) in &results {
        let d = d.ok_or(CoreError::Overflow)?;
        max_plane = max_plane.max(d);
        sum += d;
    }
    Ok(ForwardMapReport {
        m,
        samples,
        snapped: results.iter().filter(|r| r.1).count(),
        max_cells: max_plane / h,
        mean_cells: sum / samples as f64 / h,
        max_plane,
    })
}

/// Minimum vertex-to-segment distance between two closed polylines, in plane units.
pub fn loop_separation(a: &FundamentalLoop, b: &FundamentalLoop) -> f64 {
    let ia = SegmentIndex::new(&a.vertices);
    let ib = SegmentIndex::new(&b.vertices);
    let ab = a.vertices.par_iter().map(|&v| ib.distance(v)).reduce(|| f64::INFINITY, f64::min);
    let ba = b.vertices.par_iter().map(|&v| ia.distance(v)).reduce(|| f64::INFINITY, f64::min);
    ab.min(ba)
}

/// Smallest `N` with `L_{N+m}` and `L_m` more than one cell apart for every
/// stored `m`.
pub fn find_disjointness_n(ls: &FundamentalLoopSet) -> Result<Disjointness> {
    let k = ls.loops.len();
    if k < 2 {
        return Err(CoreError::InsufficientLoops { needed: 2, available: k });
    }
    let h = ls.cell_size();
    for n in 1..k {
        let separations: Vec<LoopSeparation> = (0..k - n)
            .map(|m| LoopSeparation {
                inner: m,
                outer: m + n,
                cells: loop_separation(&ls.loops[m], &ls.loops[m + n]) / h,
            })
            .collect();
        if separations.iter().all(|s| s.cells > 1.0) {
            return Ok(Disjointness { n, separations });
        }
    }
    Err(CoreError::DisjointnessNotFound { loops: k })
}
