//! Admissible itineraries for prescribed orbit types and their realisation by
//! backward quadtree refinement.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::function::{EntireMap, RadiusLadder, Rung};
use crate::itinerary::{compute_itinerary, AnnulusIndex, ExpandingSet, Itinerary, PartitionIndexer, Truncation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitKind {
    /// Bounded orbit: dwell between `m(j_0)` and `m(j_0) - 1`.
    BoundedA,
    /// Unbounded orbit returning to `B_0` after each first visit to `m(j)`, `j >= 2`.
    BoundedSuborbitB,
    /// Escaping orbit that is still not fast escaping.
    EscapingC,
    /// Escaping orbit held below a user sequence `a_n` (experimental).
    SlowEscape,
}

/// Which `m(j)` values are below `M^i(R)`, as far as the computed loops tell.
///
/// Indices are in stride units: step `i` of the schedule compares against
/// `M^{iN}(R)` and `B̃_{m}` is the filled hole `H_{mN}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeSchedule {
    pub stride: usize,
    /// `j_i` for `i = 0, 1, ...`; `None` once the answer depends on loops that
    /// were not computed. Entry 0 is unused.
    pub j: Vec<Option<usize>>,
    /// Smallest `i` with `j_i != 0`.
    pub start: usize,
    pub mset: Vec<usize>,
    /// `max |z|` over `H_{mN}`, `m = 0..=top`.
    pub hole_radii: Vec<f64>,
}

impl EscapeSchedule {
    /// `j_i` is the largest `j` with `H_{m(j)N} ⊂ {|z| < M^{iN}(R)}`. Since
    /// `H_{mN}` contains the disk of radius `M^{mN}(R)`, only `m < i` can
    /// qualify, so `j_i` is known exactly when every index below `i` has been
    /// examined.
    pub fn compute(p: &PartitionIndexer, ladder: &RadiusLadder, mset: &ExpandingSet) -> Result<Self> {
        let stride = p.stride;
        let known_top = p.top_index.min(mset.top_index);
        let mut j = vec![None];
        let mut i = 1;
        while i <= known_top + 1 && i * stride <= ladder.depth {
            let bound = match ladder.rung(i * stride)? {
                Rung::Finite(v) => v,
                Rung::BeyondTop => f64::INFINITY,
            };
            let ji = mset
                .indices
                .iter()
                .enumerate()
                .filter(|&(_, &m)| m < i && p.radii[m] < bound)
                .map(|(k, _)| k)
                .max()
                .unwrap_or(0);
            j.push(Some(ji));
            i += 1;
        }
        let start = j
            .iter()
            .position(|x| matches!(x, Some(v) if *v != 0))
            .ok_or_else(|| CoreError::MsetInsufficient("no i with j_i != 0 in the computed range".into()))?;
        Ok(Self { stride, j, start, mset: mset.indices.clone(), hole_radii: p.radii.clone() })
    }

    /// `m(j_i)`, or `None` when undetermined.
    pub fn m_of(&self, i: usize) -> Option<usize> {
        self.j.get(i).copied().flatten().map(|j| self.mset[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTypeParams {
    pub kind: OrbitKind,
    /// Kind A: index `j_0 >= 2` into the expanding set.
    pub j0: Option<usize>,
    /// Kind A: use this expanding index directly as `m(j_0)`. It must be at
    /// least 2, the property of `m(j_0)` the construction actually uses.
    pub anchor: Option<usize>,
    /// Slow escape: the bound `a_n` per stride.
    pub rate: Option<Vec<f64>>,
    pub length: usize,
    /// Kinds C and slow escape.
    pub schedule: Option<EscapeSchedule>,
}

impl OrbitTypeParams {
    pub fn new(kind: OrbitKind, length: usize) -> Self {
        Self { kind, j0: None, anchor: None, rate: None, length, schedule: None }
    }

    /// Kind A anchored at the smallest expanding index `>= 2`.
    pub fn kind_a_analogue(mset: &ExpandingSet, length: usize) -> Result<Self> {
        let m = mset
            .indices
            .iter()
            .copied()
            .find(|&m| m >= 2)
            .ok_or_else(|| CoreError::MsetInsufficient("no expanding index >= 2".into()))?;
        Ok(Self { anchor: Some(m), ..Self::new(OrbitKind::BoundedA, length) })
    }

    /// `m(j_0)` for kind A.
    pub fn anchor_index(&self, mset: &ExpandingSet) -> Result<usize> {
        if let Some(j0) = self.j0 {
            if j0 < 2 {
                return Err(CoreError::InvalidParameter(format!("j0 must be >= 2, got {j0}")));
            }
            return mset
                .m(j0)
                .ok_or_else(|| CoreError::MsetInsufficient(format!("m({j0}) is beyond the computed range")));
        }
        match self.anchor {
            Some(m) if m >= 2 && mset.contains(m) => Ok(m),
            Some(m) => Err(CoreError::MsetInsufficient(format!("{m} is not an expanding index >= 2"))),
            None => Err(CoreError::InvalidParameter("kind A needs j0 or an anchor".into())),
        }
    }
}

/// How the symbol after `s_n` is chosen by a construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Next(usize),
    Undetermined,
}

fn kind_a_step(m: usize, s: usize) -> usize {
    if s == m {
        m - 1
    } else {
        s + 1
    }
}

fn kind_b_first_visit(mset: &ExpandingSet, prefix: &[usize]) -> bool {
    let s = *prefix.last().unwrap();
    mset.indices.iter().skip(2).any(|&m| m == s) && !prefix[..prefix.len() - 1].contains(&s)
}

/// Kind C rule: dwell at `m(j_i)` while `n <= 2i - I`.
fn kind_c_step(schedule: &EscapeSchedule, n: usize, s: usize) -> Step {
    let start = schedule.start;
    // Only i with 2i - I >= n can make the dwell condition hold.
    let first_i = (n + start).div_ceil(2).max(start);
    let mut i = first_i;
    loop {
        match schedule.m_of(i) {
            None => return Step::Undetermined,
            Some(m) if m == s => return Step::Next(s),
            // m(j_i) is nondecreasing in i.
            Some(m) if m > s => return Step::Next(s + 1),
            Some(_) => i += 1,
        }
    }
}

fn slow_step(schedule: &EscapeSchedule, rate: &[f64], mset: &ExpandingSet, n: usize, s: usize) -> Step {
    if !mset.contains(s) {
        return Step::Next(s + 1);
    }
    let Some(&a) = rate.get(n + 1) else { return Step::Undetermined };
    match schedule.hole_radii.get(s + 1) {
        // Climbing would allow moduli up to the next hole's radius.
        Some(&r) if r <= a => Step::Next(s + 1),
        Some(_) => Step::Next(s),
        None if a.is_infinite() => Step::Next(s + 1),
        None => Step::Next(s),
    }
}

/// The paper's construction for `params.kind`, truncated to `length` symbols.
pub fn generate_itinerary(params: &OrbitTypeParams, mset: &ExpandingSet, length: usize) -> Result<Itinerary> {
    if length == 0 {
        return Err(CoreError::InvalidParameter("itinerary length must be at least 1".into()));
    }
    let mut symbols = Vec::with_capacity(length);
    match params.kind {
        OrbitKind::BoundedA => {
            let m = params.anchor_index(mset)?;
            symbols.push(m);
            while symbols.len() < length {
                symbols.push(kind_a_step(m, *symbols.last().unwrap()));
            }
        }
        OrbitKind::BoundedSuborbitB => {
            if mset.indices.len() < 3 {
                return Err(CoreError::MsetInsufficient("kind B needs m(2) in the computed range".into()));
            }
            symbols.push(0);
            while symbols.len() < length {
                let s = *symbols.last().unwrap();
                let next = if kind_b_first_visit(mset, &symbols) { 0 } else { s + 1 };
                if next > mset.top_index && !mset.indices.iter().any(|&m| m > s) {
                    return Err(CoreError::ScheduleExhausted { determinable: symbols.len(), requested: length });
                }
                symbols.push(next);
            }
        }
        OrbitKind::EscapingC | OrbitKind::SlowEscape => {
            let schedule = params
                .schedule
                .as_ref()
                .ok_or_else(|| CoreError::InvalidParameter("kinds C and slow escape need a schedule".into()))?;
            let s0 = schedule
                .m_of(schedule.start)
                .ok_or_else(|| CoreError::MsetInsufficient("m(j_I) undetermined".into()))?;
            symbols.push(s0);
            let rate = params.rate.as_deref();
            if params.kind == OrbitKind::SlowEscape && rate.is_none() {
                return Err(CoreError::InvalidParameter("slow escape needs a rate sequence".into()));
            }
            while symbols.len() < length {
                let n = symbols.len() - 1;
                let s = symbols[n];
                let step = match (params.kind, rate) {
                    (OrbitKind::SlowEscape, Some(rate)) => slow_step(schedule, rate, mset, n, s),
                    _ => kind_c_step(schedule, n, s),
                };
                match step {
                    Step::Next(t) => symbols.push(t),
                    Step::Undetermined => {
                        return Err(CoreError::ScheduleExhausted { determinable: symbols.len(), requested: length })
                    }
                }
            }
        }
    }
    Ok(Itinerary {
        z: None,
        stride: mset.stride,
        symbols,
        truncation: Truncation::DepthReached,
        mset: mset.indices.clone(),
    })
}

/// Longest prefix the construction can determine, capped at `limit`.
pub fn determinable_length(params: &OrbitTypeParams, mset: &ExpandingSet, limit: usize) -> usize {
    match generate_itinerary(params, mset, limit) {
        Ok(it) => it.len(),
        Err(CoreError::ScheduleExhausted { determinable, .. }) => determinable,
        Err(_) => 0,
    }
}

/// Two itineraries sharing `s_0 ..= s_{branch_step}` and differing at
/// `branch_step + 1`.
pub fn branch_pair(
    params: &OrbitTypeParams,
    mset: &ExpandingSet,
    branch_step: usize,
) -> Result<(Itinerary, Itinerary)> {
    let length = params.length.max(branch_step + 2);
    let base = generate_itinerary(params, mset, length)?;
    let s = base.symbols[branch_step];
    let mut alt = base.symbols[..=branch_step].to_vec();
    match params.kind {
        OrbitKind::BoundedA => {
            let m = params.anchor_index(mset)?;
            if s != m {
                return Err(CoreError::NoBranchAvailable { step: branch_step });
            }
            alt.push(m - 2);
            while alt.len() < length {
                alt.push(kind_a_step(m, *alt.last().unwrap()));
            }
        }
        OrbitKind::BoundedSuborbitB => {
            if !kind_b_first_visit(mset, &base.symbols[..=branch_step]) {
                return Err(CoreError::NoBranchAvailable { step: branch_step });
            }
            // Return to B_1 instead of B_0, then continue by the same rule.
            alt.push(1);
            while alt.len() < length {
                let t = *alt.last().unwrap();
                alt.push(if kind_b_first_visit(mset, &alt) { 0 } else { t + 1 });
            }
        }
        OrbitKind::EscapingC => {
            let schedule = params.schedule.as_ref().ok_or(CoreError::NoBranchAvailable { step: branch_step })?;
            // Extra dwell at m(j_i) when n = 2i - I + 1.
            let n = branch_step;
            let i_exact = (n + schedule.start).checked_sub(1).filter(|v| v % 2 == 0).map(|v| v / 2);
            let ok = i_exact.is_some_and(|i| i >= schedule.start && schedule.m_of(i) == Some(s));
            if !ok || base.symbols[n + 1] == s {
                return Err(CoreError::NoBranchAvailable { step: branch_step });
            }
            alt.push(s);
            while alt.len() < length {
                let k = alt.len() - 1;
                match kind_c_step(schedule, k, alt[k]) {
                    Step::Next(t) => alt.push(t),
                    Step::Undetermined => break,
                }
            }
        }
        OrbitKind::SlowEscape => return Err(CoreError::NoBranchAvailable { step: branch_step }),
    }
    let other = Itinerary { symbols: alt, ..base.clone() };
    Ok((base, other))
}

/// A kept quadtree cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeptCell {
    pub center: Complex64,
    pub size: f64,
}

/// Nested kept regions `C_k ⊂ B̄_{s_k}` and the witness point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionChain {
    pub requested: Vec<usize>,
    pub kept: Vec<Vec<KeptCell>>,
    pub kept_counts: Vec<usize>,
    pub witness: Complex64,
    /// Itinerary of the witness recomputed from scratch.
    pub recomputed: Vec<usize>,
    pub achieved_prefix: usize,
    pub self_check: bool,
}

/// Kept cells per step after subsampling.
pub const KEPT_CAP: usize = 2048;
/// Roots per side of the search box at each step.
const ROOTS_PER_SIDE: f64 = 128.0;
/// Safety factor on the image-disk radius estimate.
const DISK_FACTOR: f64 = 1.5;

/// Spatial lookup over target squares.
struct Targets {
    cells: Vec<KeptCell>,
    lo: Complex64,
    bucket: f64,
    n: usize,
    buckets: Vec<Vec<u32>>,
    max_size: f64,
}

impl Targets {
    fn new(cells: Vec<KeptCell>) -> Self {
        let mut lo = cells[0].center;
        let mut hi = cells[0].center;
        let mut max_size: f64 = 0.0;
        for c in &cells {
            lo = Complex64::new(lo.re.min(c.center.re), lo.im.min(c.center.im));
            hi = Complex64::new(hi.re.max(c.center.re), hi.im.max(c.center.im));
            max_size = max_size.max(c.size);
        }
        let n = 128usize;
        let extent = (hi.re - lo.re).max(hi.im - lo.im).max(max_size);
        let bucket = extent / n as f64 * (1.0 + 1e-9);
        let mut buckets = vec![Vec::new(); n * n];
        for (k, c) in cells.iter().enumerate() {
            let bx = (((c.center.re - lo.re) / bucket) as usize).min(n - 1);
            let by = (((c.center.im - lo.im) / bucket) as usize).min(n - 1);
            buckets[by * n + bx].push(k as u32);
        }
        Self { cells, lo, bucket, n, buckets, max_size }
    }

    fn square_distance(c: &KeptCell, w: Complex64) -> f64 {
        let dx = ((w.re - c.center.re).abs() - 0.5 * c.size).max(0.0);
        let dy = ((w.im - c.center.im).abs() - 0.5 * c.size).max(0.0);
        dx.hypot(dy)
    }

    /// Some target square within `reach` of `w` beyond its own size?
    /// Returns the smallest `distance - size` seen and that target's size.
    fn probe(&self, w: Complex64, reach: f64) -> Option<(f64, f64)> {
        let r = reach + self.max_size;
        let x0 = ((w.re - r - self.lo.re) / self.bucket).floor();
        let x1 = ((w.re + r - self.lo.re) / self.bucket).floor();
        let y0 = ((w.im - r - self.lo.im) / self.bucket).floor();
        let y1 = ((w.im + r - self.lo.im) / self.bucket).floor();
        let n = self.n as f64;
        if x1 < 0.0 || y1 < 0.0 || x0 >= n || y0 >= n {
            return None;
        }
        let (x0, x1) = (x0.max(0.0) as usize, x1.min(n - 1.0) as usize);
        let (y0, y1) = (y0.max(0.0) as usize, y1.min(n - 1.0) as usize);
        let mut best: Option<(f64, f64)> = None;
        let mut consider = |c: &KeptCell| {
            let d = Self::square_distance(c, w) - c.size;
            if d <= reach && best.is_none_or(|b| d < b.0) {
                best = Some((d, c.size));
            }
        };
        if (x1 - x0 + 1) * (y1 - y0 + 1) > self.cells.len() {
            self.cells.iter().for_each(&mut consider);
        } else {
            for by in y0..=y1 {
                for bx in x0..=x1 {
                    for &k in &self.buckets[by * self.n + bx] {
                        consider(&self.cells[k as usize]);
                    }
                }
            }
        }
        best
    }
}

fn probes(center: Complex64, size: f64) -> [Complex64; 9] {
    let h = 0.5 * size;
    let mut out = [center; 9];
    let mut k = 0;
    for b in [-1.0, 0.0, 1.0] {
        for a in [-1.0, 0.0, 1.0] {
            out[k] = center + Complex64::new(a * h, b * h);
            k += 1;
        }
    }
    out
}

/// Deterministic thinning that keeps the largest cells, which are the least
/// expanded and so the easiest targets for the next pullback. Ties keep the
/// earlier cell; the survivors stay in their original order.
fn subsample(cells: Vec<KeptCell>, cap: usize) -> Vec<KeptCell> {
    if cells.len() <= cap {
        return cells;
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| cells[b].size.total_cmp(&cells[a].size).then(a.cmp(&b)));
    order.truncate(cap);
    order.sort_unstable();
    order.into_iter().map(|k| cells[k]).collect()
}

struct Search<'a, F: EntireMap + ?Sized> {
    f: &'a F,
    p: &'a PartitionIndexer,
    symbol: usize,
    targets: &'a Targets,
    max_subdiv: usize,
    per_root_cap: usize,
}

impl<F: EntireMap + ?Sized> Search<'_, F> {
    fn visit(&self, center: Complex64, size: f64, depth: usize, out: &mut Vec<KeptCell>) {
        if out.len() >= self.per_root_cap {
            return;
        }
        let n = self.p.stride;
        let pts = probes(center, size);
        // Below the partition's cell size nothing outside B_symbol can be kept,
        // and the half-cell bands around the loops would otherwise be refined
        // all the way down.
        if size <= self.p.grid.cell_size()
            && pts.iter().all(|&q| self.p.annulus_index(q) != AnnulusIndex::Plain(self.symbol))
        {
            return;
        }
        let Some((w, dw)) = self.f.iterate_with_derivative(center, n) else { return };
        let mut images = [Complex64::new(0.0, 0.0); 9];
        let mut spread: f64 = 0.0;
        let mut finite = true;
        for (img, &q) in images.iter_mut().zip(&pts) {
            match self.f.iterate(q, n) {
                Some(v) => {
                    *img = v;
                    spread = spread.max((v - w).norm());
                }
                None => finite = false,
            }
        }
        let radius = if finite {
            DISK_FACTOR * spread.max(dw.norm() * size * std::f64::consts::FRAC_1_SQRT_2)
        } else {
            f64::INFINITY
        };
        let Some((_, tsize)) = self.targets.probe(w, radius) else { return };
        let accept = finite
            && radius <= tsize
            && images.iter().all(|&v| self.targets.probe(v, 0.0).is_some())
            && self.p.annulus_index(center) == AnnulusIndex::Plain(self.symbol);
        if accept {
            out.push(KeptCell { center, size });
            return;
        }
        // Already far finer than the targets: only the edges of the kept set
        // are left, and refining them further adds nothing.
        if depth >= self.max_subdiv || radius <= 0.25 * tsize {
            return;
        }
        let q = 0.25 * size;
        for (a, b) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            self.visit(center + Complex64::new(a * q, b * q), 0.5 * size, depth + 1, out);
        }
    }
}

/// Cells of the partition grid well inside `B_symbol`.
fn seed_cells(p: &PartitionIndexer, symbol: usize) -> Vec<KeptCell> {
    let g = &p.grid;
    let h = g.cell_size();
    let res = g.resolution;
    let mut out = Vec::new();
    for j in 0..res {
        for i in 0..res {
            let c = g.cell_center(i, j);
            if probes(c, h).iter().all(|&q| p.annulus_index(q) == AnnulusIndex::Plain(symbol)) {
                out.push(KeptCell { center: c, size: h });
            }
        }
    }
    out
}

/// Realise the first `prefix_len` symbols of `it` by pulling kept regions back
/// from `B_{s_{prefix_len - 1}}` to `B_{s_0}`.
///
/// Each step searches a quadtree over the bounding box of `B_{s_k}`. A cell is
/// pruned when the disk estimated to contain its `f^N`-image misses every kept
/// target, and kept once that disk is no larger than the target cell it hits,
/// its nine probe images all land within one target cell of the kept set and
/// its centre lies in `B_{s_k}`. Kept sets are thinned to [`KEPT_CAP`] cells by
/// even deterministic subsampling. The witness is the first kept cell of
/// `C_0`, in quadtree order, whose recomputed itinerary matches the prefix.
pub fn realize_point<F: EntireMap + ?Sized>(
    f: &F,
    p: &PartitionIndexer,
    it: &Itinerary,
    prefix_len: usize,
    max_subdiv: usize,
) -> Result<RegionChain> {
    if prefix_len == 0 || prefix_len > it.symbols.len() {
        return Err(CoreError::InvalidParameter(format!(
            "prefix length {prefix_len} outside 1..={}",
            it.symbols.len()
        )));
    }
    let s = &it.symbols[..prefix_len];
    let last = prefix_len - 1;
    if s[last] > p.top_index {
        return Err(CoreError::RefinementExhausted { step: last });
    }
    let mut kept: Vec<Vec<KeptCell>> = vec![Vec::new(); prefix_len];
    let seeds = subsample(seed_cells(p, s[last]), KEPT_CAP);
    if seeds.is_empty() {
        return Err(CoreError::RefinementExhausted { step: last });
    }
    kept[last] = seeds;
    for k in (0..last).rev() {
        if s[k] > p.top_index {
            return Err(CoreError::RefinementExhausted { step: k });
        }
        let targets = Targets::new(kept[k + 1].clone());
        let (lo, hi) = p.region_bbox(s[k]);
        let extent = (hi.re - lo.re).max(hi.im - lo.im);
        let root = (extent / ROOTS_PER_SIDE).max(p.grid.cell_size());
        let nx = ((hi.re - lo.re) / root).ceil() as usize;
        let ny = ((hi.im - lo.im) / root).ceil() as usize;
        let band = p.annulus_mask(s[k]);
        let search = Search { f, p, symbol: s[k], targets: &targets, max_subdiv, per_root_cap: KEPT_CAP };
        let found: Vec<Vec<KeptCell>> = (0..nx * ny)
            .into_par_iter()
            .map(|r| {
                let (ix, iy) = (r % nx, r / nx);
                let center = lo + Complex64::new((ix as f64 + 0.5) * root, (iy as f64 + 0.5) * root);
                // Skip roots that do not touch B_{s_k}, dilated by a cell.
                let (u0, v0) = p.grid.lattice_coords(center - Complex64::new(0.5 * root, 0.5 * root));
                let (u1, v1) = p.grid.lattice_coords(center + Complex64::new(0.5 * root, 0.5 * root));
                let touches = (v0.floor() as i64 - 1..=v1.floor() as i64 + 1)
                    .any(|j| (u0.floor() as i64 - 1..=u1.floor() as i64 + 1).any(|i| band.get_signed(i, j)));
                let mut out = Vec::new();
                if touches {
                    search.visit(center, root, 0, &mut out);
                }
                out
            })
            .collect();
        let cells: Vec<KeptCell> = found.into_iter().flatten().collect();
        if cells.is_empty() {
            return Err(CoreError::RefinementExhausted { step: k });
        }
        kept[k] = subsample(cells, KEPT_CAP);
    }

    let mset =
        ExpandingSet { stride: p.stride, indices: it.mset.clone(), top_index: p.top_index, confidence: Vec::new() };
    let checks: Vec<(usize, Vec<usize>)> = kept[0]
        .par_iter()
        .map(|c| {
            let rec = compute_itinerary(f, p, &mset, c.center, prefix_len).symbols;
            let agree = rec.iter().zip(s).take_while(|(a, b)| a == b).count();
            (agree, rec)
        })
        .collect();
    let pick = checks.iter().position(|(a, _)| *a == prefix_len).unwrap_or_else(|| {
        let best = checks.iter().map(|c| c.0).max().unwrap_or(0);
        checks.iter().position(|c| c.0 == best).unwrap_or(0)
    });
    let (achieved_prefix, recomputed) = checks[pick].clone();
    Ok(RegionChain {
        requested: s.to_vec(),
        kept_counts: kept.iter().map(Vec::len).collect(),
        witness: kept[0][pick].center,
        kept,
        recomputed,
        achieved_prefix,
        self_check: achieved_prefix == prefix_len,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedCheck {
    pub anchor: usize,
    /// `M^{(m+1)N}(R)`: the disk of this radius lies inside loop `m + 1`.
    pub radius_bound: Option<f64>,
    pub max_modulus: f64,
    /// Strides whose point was inside loop `m + 1` by the partition or the disk bound.
    pub steps_inside: usize,
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetCheck {
    pub reset_steps: Vec<usize>,
    pub returned: Vec<bool>,
    /// Running maximum of the modulus at each reset step.
    pub max_at_reset: Vec<f64>,
    pub grows: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwiceCheck {
    pub i: usize,
    /// Stride count `2i - I`.
    pub step: usize,
    pub modulus: f64,
    /// `M^{iN}(R)`, `None` past the top of the ladder.
    pub rung: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapingCheck {
    pub start: usize,
    pub inequalities: Vec<TwiceCheck>,
    /// Running maximum over the last five strides is nondecreasing and rises.
    pub max_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub kind: OrbitKind,
    pub z: Complex64,
    pub depth: usize,
    pub stride: usize,
    /// `|f^{kN}(z)|` for `k = 0..=depth`; stops at overflow.
    pub moduli: Vec<f64>,
    pub bounded: Option<BoundedCheck>,
    pub resets: Option<ResetCheck>,
    pub escaping: Option<EscapingCheck>,
    pub violations: Vec<String>,
    pub passed: bool,
}

fn rung_value(ladder: &RadiusLadder, n: usize) -> Option<f64> {
    match ladder.rung(n) {
        Ok(Rung::Finite(v)) => Some(v),
        _ => None,
    }
}

/// Check a witness orbit against what its orbit type promises.
///
/// `target` is the itinerary the witness was built for; `realized` is how many
/// of its symbols the construction pinned down.
#[allow(clippy::too_many_arguments)]
pub fn verify_orbit_type<F: EntireMap + ?Sized>(
    f: &F,
    ladder: &RadiusLadder,
    p: &PartitionIndexer,
    z: Complex64,
    params: &OrbitTypeParams,
    target: &Itinerary,
    realized: usize,
    depth: usize,
) -> Result<OrbitReport> {
    let n = p.stride;
    let mut orbit = vec![z];
    let mut w = z;
    for _ in 0..depth {
        match f.iterate(w, n) {
            Some(v) => {
                w = v;
                orbit.push(v);
            }
            None => break,
        }
    }
    let moduli: Vec<f64> = orbit.iter().map(|v| v.norm()).collect();
    let mut violations = Vec::new();
    if orbit.len() <= depth {
        violations.push(format!("orbit left the representable range after {} strides", orbit.len() - 1));
    }
    let mset = ExpandingSet { stride: n, indices: target.mset.clone(), top_index: p.top_index, confidence: Vec::new() };
    let mut report = OrbitReport {
        kind: params.kind,
        z,
        depth,
        stride: n,
        moduli: moduli.clone(),
        bounded: None,
        resets: None,
        escaping: None,
        violations: Vec::new(),
        passed: false,
    };
    match params.kind {
        OrbitKind::BoundedA => {
            let m = params.anchor_index(&mset)?;
            let radius_bound = rung_value(ladder, (m + 1) * n);
            let mut steps_inside = 0;
            for (k, v) in orbit.iter().enumerate() {
                let by_partition = match p.annulus_index(*v) {
                    AnnulusIndex::Plain(i) | AnnulusIndex::OnLoop(i) => i <= m + 1,
                    AnnulusIndex::Outside => false,
                };
                let by_disk = radius_bound.is_some_and(|r| v.norm() < r);
                if by_partition || by_disk {
                    steps_inside += 1;
                } else {
                    violations.push(format!("stride {k}: |z| = {} outside loop {}", v.norm(), m + 1));
                }
            }
            let max_modulus = moduli.iter().copied().fold(0.0, f64::max);
            report.bounded = Some(BoundedCheck {
                anchor: m,
                radius_bound,
                max_modulus,
                steps_inside,
                inside: steps_inside == orbit.len() && orbit.len() == depth + 1,
            });
        }
        OrbitKind::BoundedSuborbitB => {
            let reset_steps: Vec<usize> = target
                .symbols
                .iter()
                .enumerate()
                .skip(1)
                .filter(|&(k, &s)| s == 0 && k <= realized.min(depth) && k < orbit.len())
                .map(|(k, _)| k)
                .collect();
            let recomputed = compute_itinerary(f, p, &mset, z, depth + 1).symbols;
            let returned: Vec<bool> = reset_steps.iter().map(|&k| recomputed.get(k) == Some(&0)).collect();
            let mut running = 0.0f64;
            let mut max_at_reset = Vec::new();
            let mut r = reset_steps.iter().peekable();
            for (k, m) in moduli.iter().enumerate() {
                running = running.max(*m);
                if r.peek() == Some(&&k) {
                    max_at_reset.push(running);
                    r.next();
                }
            }
            let grows = max_at_reset.windows(2).all(|w| w[1] > w[0]);
            for (k, ok) in reset_steps.iter().zip(&returned) {
                if !ok {
                    violations.push(format!("stride {k}: no return to B_0"));
                }
            }
            if !grows {
                violations.push("maximum modulus does not grow between resets".into());
            }
            report.resets = Some(ResetCheck { reset_steps, returned, max_at_reset, grows });
        }
        OrbitKind::EscapingC | OrbitKind::SlowEscape => {
            let schedule = params
                .schedule
                .as_ref()
                .ok_or_else(|| CoreError::InvalidParameter("kinds C and slow escape need a schedule".into()))?;
            let start = schedule.start;
            let mut inequalities = Vec::new();
            // Applicable i: the step 2i - I lies within the realised prefix or
            // is the image of its last pinned point.
            let mut i = start;
            while 2 * i - start <= realized.min(depth) {
                let step = 2 * i - start;
                if step >= orbit.len() {
                    break;
                }
                let modulus = moduli[step];
                let rung = rung_value(ladder, i * n);
                let holds = rung.is_none_or(|r| modulus < r);
                if !holds {
                    violations.push(format!("i = {i}: |f^{step}(z)| = {modulus} is not below M^{i}(R)"));
                }
                inequalities.push(TwiceCheck { i, step, modulus, rung, holds });
                i += 1;
            }
            let tail: Vec<f64> = {
                let mut run = 0.0f64;
                let all: Vec<f64> = moduli
                    .iter()
                    .map(|m| {
                        run = run.max(*m);
                        run
                    })
                    .collect();
                all[all.len().saturating_sub(5)..].to_vec()
            };
            let max_increasing = tail.len() >= 2 && tail.last() > tail.first();
            if !max_increasing {
                violations.push("maximum modulus does not increase over the last 5 strides".into());
            }
            report.escaping = Some(EscapingCheck { start, inequalities, max_increasing });
        }
    }
    report.passed = violations.is_empty();
    report.violations = violations;
    Ok(report)
}
