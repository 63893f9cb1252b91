//! Repelling periodic points, multi-scale evidence that they are singleton
//! complement components, and covering degrees by winding numbers.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::escape::{classify_grid, GridSpec};
use crate::function::{escaped, EntireMap, RadiusLadder};
use crate::geometry::{resample_closed, SegmentIndex};
use crate::loops::FundamentalLoopSet;
use crate::mask::Mask;

/// A root of `f^p(z) = z` of minimal period `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPointRecord {
    pub z0: Complex64,
    #[serde(rename = "p")]
    pub period: usize,
    /// `(f^p)'(z0)`, the product of `f'` along the cycle.
    pub multiplier: Complex64,
    /// `|f^p(z0) - z0|`.
    pub residual: f64,
    pub repelling: bool,
}

/// Axis-aligned closed box in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Complex64,
    pub upper: Complex64,
}

impl Region {
    pub fn new(lower: Complex64, upper: Complex64) -> Result<Self> {
        if !(lower.re < upper.re && lower.im < upper.im) || !lower.is_finite() || !upper.is_finite() {
            return Err(CoreError::InvalidParameter(format!("empty or infinite region [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    /// The square `[-h, h]^2` around `center`.
    pub fn square(center: Complex64, h: f64) -> Result<Self> {
        Self::new(center - Complex64::new(h, h), center + Complex64::new(h, h))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.lower.re && z.re <= self.upper.re && z.im >= self.lower.im && z.im <= self.upper.im
    }
}

/// Tolerances for the Newton search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub seeds_per_side: usize,
    pub max_iter: usize,
    /// Accept a root when `|f^p(z) - z| <= root_tol * max(1, |z|)`.
    pub root_tol: f64,
    /// Roots closer than this are the same root.
    pub dedup: f64,
    /// A root also solving the period-`q` equation to this tolerance is not of minimal period.
    pub divisor_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { seeds_per_side: 64, max_iter: 100, root_tol: 1e-11, dedup: 1e-7, divisor_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSearch {
    pub period: usize,
    pub seeds: usize,
    /// Seeds whose Newton run converged to a root (inside the region or not).
    pub converged: usize,
    pub outside_region: usize,
    /// Roots dropped because they solve a proper-divisor equation.
    pub non_minimal: usize,
    pub records: Vec<PeriodicPointRecord>,
}

fn newton<F: EntireMap + ?Sized>(f: &F, seed: Complex64, p: usize, cfg: &NewtonConfig) -> Option<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let mut z = seed;
    for _ in 0..cfg.max_iter {
        let (w, d) = f.iterate_with_derivative(z, p)?;
        let g = w - z;
        let dg = d - one;
        if dg.norm() == 0.0 {
            return None;
        }
        let step = g / dg;
        z -= step;
        if !z.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    let w = f.iterate(z, p)?;
    ((w - z).norm() <= cfg.root_tol * z.norm().max(1.0)).then_some(z)
}

fn proper_divisors(p: usize) -> impl Iterator<Item = usize> {
    (1..p).filter(move |&q| p.is_multiple_of(q))
}

/// Newton's method on `f^p(z) - z` from a uniform seed grid over `region`.
pub fn find_periodic_points<F: EntireMap + ?Sized>(
    f: &F,
    region: &Region,
    p: usize,
    cfg: &NewtonConfig,
) -> Result<PeriodicSearch> {
    if p == 0 {
        return Err(CoreError::InvalidParameter("period must be at least 1".into()));
    }
    let k = cfg.seeds_per_side;
    if k == 0 {
        return Err(CoreError::InvalidParameter("need at least one seed per side".into()));
    }
    let span = region.upper - region.lower;
    let seeds: Vec<Complex64> = (0..k * k)
        .map(|s| {
            let (i, j) = ((s % k) as f64, (s / k) as f64);
            region.lower + Complex64::new(span.re * (i + 0.5) / k as f64, span.im * (j + 0.5) / k as f64)
        })
        .collect();
    let roots: Vec<Option<Complex64>> = seeds.par_iter().map(|&z| newton(f, z, p, cfg)).collect();

    let mut search = PeriodicSearch {
        period: p,
        seeds: seeds.len(),
        converged: 0,
        outside_region: 0,
        non_minimal: 0,
        records: Vec::new(),
    };
    let mut distinct: Vec<Complex64> = Vec::new();
    for z in roots.into_iter().flatten() {
        search.converged += 1;
        if !region.contains(z) {
            search.outside_region += 1;
            continue;
        }
        if distinct.iter().all(|r| (r - z).norm() >= cfg.dedup) {
            distinct.push(z);
        }
    }
    for z in distinct {
        let lower_period = proper_divisors(p)
            .any(|q| f.iterate(z, q).is_some_and(|w| (w - z).norm() <= cfg.divisor_tol * z.norm().max(1.0)));
        if lower_period {
            search.non_minimal += 1;
            continue;
        }
        let Some((w, multiplier)) = f.iterate_with_derivative(z, p) else { continue };
        search.records.push(PeriodicPointRecord {
            z0: z,
            period: p,
            multiplier,
            residual: (w - z).norm(),
            repelling: multiplier.norm() > 1.0,
        });
    }
    search.records.sort_by(|a, b| a.z0.re.total_cmp(&b.z0.re).then(a.z0.im.total_cmp(&b.z0.im)));
    Ok(search)
}

/// Outcome of the chain search at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEvidence {
    pub outer: f64,
    pub inner: f64,
    /// A closed 8-connected chain of in-level cells separates the two circles.
    pub surrounded: bool,
    pub in_level_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingletonEvidence {
    pub z0: Complex64,
    pub scales: Vec<f64>,
    pub level: i32,
    pub depth: usize,
    pub gridres: usize,
    pub per_scale: Vec<ScaleEvidence>,
    /// Every scale surrounded.
    pub positive: bool,
}

/// True when the cells of `in_level` contain a closed 8-connected chain that
/// separates `|z - z0| <= inner` from `|z - z0| >= outer` inside the grid.
///
/// Dually: no 4-connected path of non-in-level annulus cells joins the inner
/// disk to the outer circle or the grid border.
pub fn annulus_surrounded(grid: &GridSpec, in_level: &Mask, z0: Complex64, inner: f64, outer: f64) -> bool {
    let res = grid.resolution;
    let dist = |i: usize, j: usize| (grid.cell_center(i, j) - z0).norm();
    let mut seen = Mask::new(res);
    let mut queue = VecDeque::new();
    for j in 0..res {
        for i in 0..res {
            if dist(i, j) <= inner {
                seen.set(i, j, true);
                queue.push_back((i, j));
            }
        }
    }
    if queue.is_empty() {
        // The inner disk falls between cell centres: start from the cell holding z0.
        match grid.cell_of(z0) {
            Some((i, j)) => {
                seen.set(i, j, true);
                queue.push_back((i, j));
            }
            None => return false,
        }
    }
    while let Some((i, j)) = queue.pop_front() {
        if i == 0 || j == 0 || i + 1 == res || j + 1 == res {
            return false;
        }
        for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
            if seen.get(a, b) {
                continue;
            }
            let d = dist(a, b);
            if d >= outer {
                return false;
            }
            if d <= inner || !in_level.get(a, b) {
                seen.set(a, b, true);
                queue.push_back((a, b));
            }
        }
    }
    true
}

/// Inner radius paired with scale `k`: the next scale, or for the last one
/// the same ratio continued.
fn inner_radius(scales: &[f64], k: usize) -> f64 {
    match (scales.get(k + 1), k) {
        (Some(&next), _) => next,
        (None, 0) => scales[0] * 0.5,
        (None, _) => scales[k] * scales[k] / scales[k - 1],
    }
}

/// Classify a `gridres`-square grid of half-width `ρ_k` around `z0` at level 0
/// for each scale and look for a surrounding chain in each annulus.
pub fn singleton_evidence<F: EntireMap + ?Sized>(
    f: &F,
    ladder: &RadiusLadder,
    z0: Complex64,
    scales: &[f64],
    gridres: usize,
    depth: usize,
    threads: usize,
) -> Result<SingletonEvidence> {
    if scales.is_empty() {
        return Err(CoreError::InvalidParameter("need at least one scale".into()));
    }
    if scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CoreError::InvalidParameter(format!("scales must be positive and decreasing, got {scales:?}")));
    }
    let level = 0;
    let mut per_scale = Vec::with_capacity(scales.len());
    for k in 0..scales.len() {
        let outer = scales[k];
        let inner = inner_radius(scales, k);
        let spec = GridSpec::new(z0, outer, gridres, depth, level);
        let gc = classify_grid(f, ladder, &spec, threads)?;
        let inl = gc.in_level_mask();
        per_scale.push(ScaleEvidence {
            outer,
            inner,
            surrounded: annulus_surrounded(&spec, &inl, z0, inner, outer),
            in_level_fraction: inl.count() as f64 / (gridres * gridres) as f64,
        });
    }
    let positive = per_scale.iter().all(|s| s.surrounded);
    Ok(SingletonEvidence { z0, scales: scales.to_vec(), level, depth, gridres, per_scale, positive })
}

/// Largest angle step accepted between consecutive image points.
const MAX_TURN: f64 = 0.5;
const MAX_SPLITS: usize = 40;

/// Winding number of `f^n` along the closed polyline `curve` about `w`, by
/// angle accumulation over `samples` arc-length samples, subdividing wherever
/// the image turns too fast.
pub fn winding_degree<F: EntireMap + ?Sized>(
    f: &F,
    curve: &[Complex64],
    n: usize,
    w: Complex64,
    samples: usize,
) -> Result<i64> {
    if curve.len() < 3 || curve.first() != curve.last() {
        return Err(CoreError::InvalidParameter("curve must be a closed polyline".into()));
    }
    if samples < 3 {
        return Err(CoreError::InvalidParameter("need at least three samples".into()));
    }
    let pts: Vec<Complex64> = resample_closed(curve, samples).into_iter().map(|s| s.point).collect();
    let image = |z: Complex64| -> Result<Complex64> {
        let v = f.iterate(z, n).ok_or(CoreError::NonClosedImage)? - w;
        if v.norm() <= 1e-12 * w.norm().max(1.0) {
            return Err(CoreError::BasePointOnCurve);
        }
        Ok(v)
    };
    let images = pts.par_iter().map(|&z| image(z)).collect::<Result<Vec<_>>>()?;
    let total: f64 = (0..pts.len())
        .into_par_iter()
        .map(|k| {
            let next = (k + 1) % pts.len();
            turn(&image, pts[k], pts[next], images[k], images[next], 0)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    let d = total / TAU;
    let rounded = d.round();
    if (d - rounded).abs() > 1e-6 {
        return Err(CoreError::NonClosedImage);
    }
    Ok(rounded as i64)
}

fn turn(
    image: &impl Fn(Complex64) -> Result<Complex64>,
    a: Complex64,
    b: Complex64,
    fa: Complex64,
    fb: Complex64,
    splits: usize,
) -> Result<f64> {
    let step = (fb / fa).arg();
    if step.abs() <= MAX_TURN {
        return Ok(step);
    }
    if splits >= MAX_SPLITS || step.abs() >= PI && splits + 1 >= MAX_SPLITS {
        return Err(CoreError::NonClosedImage);
    }
    let mid = (a + b) * 0.5;
    let fm = image(mid)?;
    Ok(turn(image, a, mid, fa, fm, splits + 1)? + turn(image, mid, b, fm, fb, splits + 1)?)
}

/// Degree of `f^N : H_m -> H_{m+N}` read off from winding numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub m: usize,
    pub stride: usize,
    pub samples: usize,
    /// Degree about the first base point.
    pub degree: i64,
    pub base_points: Vec<Complex64>,
    pub degrees: Vec<i64>,
    pub invariant: bool,
    /// `degree >= 2` and the same at every base point.
    pub polynomial_like: bool,
}

/// Base points: the origin and four points on the circle of half the distance
/// from 0 to `L_{m+N}`, so all lie well inside `H_{m+N}`.
pub fn degree_base_points(ls: &FundamentalLoopSet, outer: usize) -> Result<Vec<Complex64>> {
    let lp = ls.loops.get(outer).ok_or(CoreError::MissingLoop { index: outer })?;
    let r = 0.5 * SegmentIndex::new(&lp.vertices).distance(Complex64::new(0.0, 0.0));
    let mut pts = vec![Complex64::new(0.0, 0.0)];
    pts.extend((0..4).map(|k| Complex64::from_polar(r, PI / 8.0 + k as f64 * PI / 2.0)));
    Ok(pts)
}

/// Winding number of `f^N(L_m)` about base points inside `H_{m+N}`.
pub fn polynomial_like_degree<F: EntireMap + ?Sized>(
    f: &F,
    ls: &FundamentalLoopSet,
    m: usize,
    stride: usize,
    samples: usize,
) -> Result<DegreeReport> {
    if stride == 0 {
        return Err(CoreError::InvalidParameter("stride must be at least 1".into()));
    }
    let lm = ls.loops.get(m).ok_or(CoreError::MissingLoop { index: m })?;
    let base_points = degree_base_points(ls, m + stride)?;
    if base_points.iter().any(|&w| escaped(w)) {
        return Err(CoreError::Overflow);
    }
    let degrees =
        base_points.iter().map(|&w| winding_degree(f, &lm.vertices, stride, w, samples)).collect::<Result<Vec<_>>>()?;
    let degree = degrees[0];
    let invariant = degrees.iter().all(|&d| d == degree);
    Ok(DegreeReport {
        m,
        stride,
        samples,
        degree,
        base_points,
        degrees,
        invariant,
        polynomial_like: invariant && degree >= 2,
    })
}
