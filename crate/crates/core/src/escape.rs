//! Truncated-depth membership in the levels `A_R^L(f)` and complement
//! components of classified grids.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::function::{escaped, EntireMap, RadiusLadder, Rung};
use crate::mask::Mask;

/// A square grid of `resolution^2` cells, sampled at cell centres.
///
/// Row 0 sits at the bottom (smallest imaginary part), column 0 at the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: Complex64,
    pub half_width: f64,
    pub resolution: usize,
    pub depth: usize,
    pub level: i32,
}

impl GridSpec {
    pub fn new(center: Complex64, half_width: f64, resolution: usize, depth: usize, level: i32) -> Self {
        Self { center, half_width, resolution, depth, level }
    }

    /// Same geometry, another level.
    pub fn at_level(&self, level: i32) -> Self {
        Self { level, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(CoreError::InvalidGrid(format!("resolution {} < 2", self.resolution)));
        }
        if self.depth < 1 {
            return Err(CoreError::InvalidGrid("depth must be at least 1".into()));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() || !self.center.is_finite() {
            return Err(CoreError::InvalidGrid(format!(
                "need finite centre and positive half-width, got {} and {}",
                self.center, self.half_width
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn cell_size(&self) -> f64 {
        2.0 * self.half_width / self.resolution as f64
    }

    /// Lower-left corner of the grid.
    #[inline]
    pub fn origin(&self) -> Complex64 {
        self.center - Complex64::new(self.half_width, self.half_width)
    }

    /// Plane position of lattice vertex `(i, j)`, the lower-left corner of cell `(i, j)`.
    #[inline]
    pub fn vertex(&self, i: i64, j: i64) -> Complex64 {
        let h = self.cell_size();
        self.origin() + Complex64::new(i as f64 * h, j as f64 * h)
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> Complex64 {
        let h = self.cell_size();
        self.origin() + Complex64::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h)
    }

    /// Cell containing `z`, if inside the grid.
    pub fn cell_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let h = self.cell_size();
        let u = (z - self.origin()) / h;
        let (i, j) = (u.re.floor(), u.im.floor());
        let r = self.resolution as f64;
        if i >= 0.0 && j >= 0.0 && i < r && j < r {
            Some((i as usize, j as usize))
        } else {
            None
        }
    }

    /// Fractional lattice coordinates of `z` (cell units from the lower-left corner).
    #[inline]
    pub fn lattice_coords(&self, z: Complex64) -> (f64, f64) {
        let u = (z - self.origin()) / self.cell_size();
        (u.re, u.im)
    }
}

/// Outcome of the truncated membership test for one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointVerdict {
    /// Every tested inequality held.
    InLevel,
    /// `|f^n(z)| < M^{n+L}(R)` at this `n`, the first failure.
    FailedAt(usize),
    /// The orbit left the representable range at this step after passing every
    /// earlier test; all remaining tests count as satisfied.
    Overflowed(usize),
}

impl PointVerdict {
    #[inline]
    pub fn is_in_level(self) -> bool {
        !matches!(self, PointVerdict::FailedAt(_))
    }

    /// Raster byte: 0 in-level, 1 complement, 2 in-level by overflow.
    #[inline]
    pub fn code(self) -> u8 {
        match self {
            PointVerdict::InLevel => 0,
            PointVerdict::FailedAt(_) => 1,
            PointVerdict::Overflowed(_) => 2,
        }
    }

    pub fn first_failure(self) -> Option<usize> {
        match self {
            PointVerdict::FailedAt(n) => Some(n),
            _ => None,
        }
    }
}

/// Check that `ladder` supports level `level` tested to `depth`.
pub fn check_ladder(ladder: &RadiusLadder, level: i32, depth: usize) -> Result<()> {
    if (level as i64) < -(ladder.depth as i64) {
        return Err(CoreError::LevelTooLow { level, depth: ladder.depth });
    }
    let needed = depth as i64 + level as i64;
    if needed > ladder.depth as i64 {
        return Err(CoreError::LadderTooShort { needed, available: ladder.depth });
    }
    Ok(())
}

#[inline]
fn verdict_unchecked<F: EntireMap + ?Sized>(
    f: &F,
    ladder: &RadiusLadder,
    z: Complex64,
    level: i32,
    depth: usize,
) -> PointVerdict {
    let start = (-level).max(0) as usize;
    let mut w = z;
    for n in 0..=depth {
        if n >= start {
            let rung = (n as i64 + level as i64) as usize;
            let fails = match ladder.values.get(rung) {
                Some(&v) => w.norm() < v,
                // A rung past the representable range beats every finite modulus.
                None => true,
            };
            if fails {
                return PointVerdict::FailedAt(n);
            }
        }
        if n < depth {
            w = f.apply(w);
            if escaped(w) {
                return PointVerdict::Overflowed(n + 1);
            }
        }
    }
    PointVerdict::InLevel
}

/// Test `|f^n(z)| >= M^{n+L}(R)` for `n = max(0, -L) ..= depth`.
pub fn classify_point<F: EntireMap + ?Sized>(
    f: &F,
    ladder: &RadiusLadder,
    z: Complex64,
    level: i32,
    depth: usize,
) -> Result<PointVerdict> {
    check_ladder(ladder, level, depth)?;
    debug_assert!(matches!(ladder.rung(0), Ok(Rung::Finite(_))));
    Ok(verdict_unchecked(f, ladder, z, level, depth))
}

/// Per-cell verdicts for one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridClassification {
    pub spec: GridSpec,
    pub verdicts: Vec<PointVerdict>,
    pub ladder_id: String,
}

impl GridClassification {
    #[inline]
    pub fn verdict(&self, i: usize, j: usize) -> PointVerdict {
        self.verdicts[j * self.spec.resolution + i]
    }

    pub fn complement_mask(&self) -> Mask {
        Mask::from_bits(self.spec.resolution, self.verdicts.iter().map(|v| !v.is_in_level()).collect())
    }

    pub fn in_level_mask(&self) -> Mask {
        Mask::from_bits(self.spec.resolution, self.verdicts.iter().map(|v| v.is_in_level()).collect())
    }

    /// Counts of (in-level, complement, overflow) cells.
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for v in &self.verdicts {
            c[v.code() as usize] += 1;
        }
        c
    }

    pub fn to_raster(&self) -> Vec<u8> {
        let cells: Vec<u8> = self.verdicts.iter().map(|v| v.code()).collect();
        encode_raster(&self.spec, &cells)
    }
}

/// Leading bytes of a serialized classification raster.
pub const RASTER_MAGIC: &[u8; 4] = b"SWGC";
pub const RASTER_VERSION: u16 = 1;
const RASTER_HEADER: usize = 4 + 2 + 8 * 3 + 4 + 4 + 4;

/// Little-endian raster: magic, version, grid spec, then one byte per cell.
pub fn encode_raster(spec: &GridSpec, cells: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(RASTER_HEADER + cells.len());
    out.extend_from_slice(RASTER_MAGIC);
    out.extend_from_slice(&RASTER_VERSION.to_le_bytes());
    out.extend_from_slice(&spec.center.re.to_le_bytes());
    out.extend_from_slice(&spec.center.im.to_le_bytes());
    out.extend_from_slice(&spec.half_width.to_le_bytes());
    out.extend_from_slice(&(spec.resolution as u32).to_le_bytes());
    out.extend_from_slice(&(spec.depth as u32).to_le_bytes());
    out.extend_from_slice(&spec.level.to_le_bytes());
    out.extend_from_slice(cells);
    out
}

/// Inverse of [`encode_raster`].
pub fn decode_raster(bytes: &[u8]) -> Result<(GridSpec, Vec<u8>)> {
    if bytes.len() < RASTER_HEADER || &bytes[..4] != RASTER_MAGIC {
        return Err(CoreError::Format("missing SWGC header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != RASTER_VERSION {
        return Err(CoreError::Format(format!("unsupported raster version {version}")));
    }
    let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let spec = GridSpec {
        center: Complex64::new(f64_at(6), f64_at(14)),
        half_width: f64_at(22),
        resolution: u32_at(30) as usize,
        depth: u32_at(34) as usize,
        level: i32::from_le_bytes(bytes[38..42].try_into().unwrap()),
    };
    let cells = &bytes[RASTER_HEADER..];
    if cells.len() != spec.resolution * spec.resolution {
        return Err(CoreError::Format(format!(
            "expected {} cells, found {}",
            spec.resolution * spec.resolution,
            cells.len()
        )));
    }
    if let Some(bad) = cells.iter().find(|&&b| b > 2) {
        return Err(CoreError::Format(format!("invalid cell byte {bad}")));
    }
    Ok((spec, cells.to_vec()))
}

/// Run `op` on a pool with `threads` workers, or on the global pool when 0.
pub(crate) fn in_pool<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        return op();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}

/// Classify every cell centre of `spec`; output does not depend on `threads`.
pub fn classify_grid<F: EntireMap + ?Sized>(
    f: &F,
    ladder: &RadiusLadder,
    spec: &GridSpec,
    threads: usize,
) -> Result<GridClassification> {
    spec.validate()?;
    check_ladder(ladder, spec.level, spec.depth)?;
    let res = spec.resolution;
    let mut verdicts = vec![PointVerdict::InLevel; res * res];
    in_pool(threads, || {
        verdicts.par_chunks_mut(res).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = verdict_unchecked(f, ladder, spec.cell_center(i, j), spec.level, spec.depth);
            }
        });
    });
    Ok(GridClassification { spec: *spec, verdicts, ladder_id: ladder.fingerprint() })
}

/// 4-connected labelling of complement cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMap {
    pub resolution: usize,
    /// Component id per cell, `None` for in-level cells.
    pub labels: Vec<Option<u32>>,
    /// `false` when the component touches the grid boundary.
    pub bounded: Vec<bool>,
    pub sizes: Vec<usize>,
}

impl ComponentMap {
    /// Label the set cells of `complement`; ids follow row-major first appearance.
    pub fn from_mask(complement: &Mask) -> Self {
        let res = complement.res();
        let mut labels: Vec<Option<u32>> = vec![None; res * res];
        let mut bounded = Vec::new();
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..res * res {
            if !complement.bits()[start] || labels[start].is_some() {
                continue;
            }
            let id = bounded.len() as u32;
            let mut size = 0;
            let mut touches = false;
            labels[start] = Some(id);
            stack.push(start);
            while let Some(k) = stack.pop() {
                size += 1;
                let (i, j) = (k % res, k / res);
                if i == 0 || j == 0 || i == res - 1 || j == res - 1 {
                    touches = true;
                }
                let mut push = |n: usize| {
                    if complement.bits()[n] && labels[n].is_none() {
                        labels[n] = Some(id);
                        stack.push(n);
                    }
                };
                if i > 0 {
                    push(k - 1);
                }
                if i + 1 < res {
                    push(k + 1);
                }
                if j > 0 {
                    push(k - res);
                }
                if j + 1 < res {
                    push(k + res);
                }
            }
            bounded.push(!touches);
            sizes.push(size);
        }
        Self { resolution: res, labels, bounded, sizes }
    }

    pub fn label(&self, i: usize, j: usize) -> Option<u32> {
        self.labels[j * self.resolution + i]
    }

    pub fn component_count(&self) -> usize {
        self.bounded.len()
    }
}

pub fn complement_components(gc: &GridClassification) -> ComponentMap {
    ComponentMap::from_mask(&gc.complement_mask())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WebVerdict {
    /// The complement component of the origin is bounded at this depth and resolution.
    EvidencePositive,
    /// The origin's complement component reaches the grid boundary.
    NegativeAtDepth,
}

/// Spider's-web evidence from the component containing `origin_cell`.
pub fn spiders_web_verdict(cm: &ComponentMap, origin_cell: (usize, usize)) -> Result<WebVerdict> {
    let (i, j) = origin_cell;
    if i >= cm.resolution || j >= cm.resolution {
        return Err(CoreError::InvalidGrid("origin cell outside the grid".into()));
    }
    match cm.label(i, j) {
        None => Err(CoreError::OriginNotInComplement),
        Some(id) if cm.bounded[id as usize] => Ok(WebVerdict::EvidencePositive),
        Some(_) => Ok(WebVerdict::NegativeAtDepth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{build_ladder, validate_radius, EntireFunction};

    fn gap_ladder(depth: usize) -> (EntireFunction, RadiusLadder) {
        let f = EntireFunction::gap_series();
        let cert = validate_radius(&f, 1.0, 100.0).unwrap();
        let ladder = build_ladder(&f, &cert, depth).unwrap();
        (f, ladder)
    }

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn inside_base_radius_fails_at_zero() {
        let (f, ladder) = gap_ladder(20);
        assert_eq!(classify_point(&f, &ladder, c(0.3, -0.2), 0, 5).unwrap(), PointVerdict::FailedAt(0));
        assert_eq!(classify_point(&f, &ladder, c(0.999, 0.0), 0, 15).unwrap(), PointVerdict::FailedAt(0));
    }

    #[test]
    fn positive_axis_rides_the_ladder() {
        let (f, ladder) = gap_ladder(20);
        for depth in 1..=15 {
            let v = classify_point(&f, &ladder, c(1.0, 0.0), 0, depth).unwrap();
            assert!(v.is_in_level(), "depth {depth}: {v:?}");
        }
        // The fifth iterate of 1 is cosh(1.45e7): beyond the representable range.
        assert_eq!(classify_point(&f, &ladder, c(1.0, 0.0), 0, 15).unwrap(), PointVerdict::Overflowed(5));
        assert_eq!(classify_point(&f, &ladder, c(1.0, 0.0), 0, 4).unwrap(), PointVerdict::InLevel);
    }

    #[test]
    fn negative_level_regression() {
        // Orbit of 0.5 from mpmath: 0.5, 2.00521, 3.36026, 13.4395, 343303.76, then overflow.
        // Against M^{n-1}(1) = 1, 2.08338, 3.58762, 17.1856, 1.454e7 every test passes.
        let (f, ladder) = gap_ladder(20);
        assert_eq!(classify_point(&f, &ladder, c(0.5, 0.0), -1, 4).unwrap(), PointVerdict::InLevel);
        assert_eq!(classify_point(&f, &ladder, c(0.5, 0.0), -1, 10).unwrap(), PointVerdict::Overflowed(5));
        // At level 0 the first test already fails: |0.5| < R.
        assert_eq!(classify_point(&f, &ladder, c(0.5, 0.0), 0, 10).unwrap(), PointVerdict::FailedAt(0));
    }

    #[test]
    fn ladder_preconditions() {
        let (f, ladder) = gap_ladder(5);
        assert!(matches!(classify_point(&f, &ladder, c(1.0, 0.0), 1, 5), Err(CoreError::LadderTooShort { .. })));
        assert!(matches!(classify_point(&f, &ladder, c(1.0, 0.0), -6, 1), Err(CoreError::LevelTooLow { .. })));
    }

    #[test]
    fn straddling_grid() {
        let (f, ladder) = gap_ladder(20);
        // Cells centred at 0.75 and 1.25 on the real axis (and 0.25 above/below).
        let spec = GridSpec::new(c(1.0, 0.0), 0.5, 2, 6, 0);
        let gc = classify_grid(&f, &ladder, &spec, 1).unwrap();
        assert_eq!(gc.verdict(0, 0), PointVerdict::FailedAt(0));
        assert_eq!(gc.verdict(0, 1), PointVerdict::FailedAt(0));
        assert!(gc.verdict(1, 0).is_in_level());
        assert!(gc.verdict(1, 1).is_in_level());
    }

    #[test]
    fn grid_inside_radius_is_all_complement() {
        let (f, ladder) = gap_ladder(20);
        let spec = GridSpec::new(c(0.0, 0.0), 0.5, 16, 4, 0);
        let gc = classify_grid(&f, &ladder, &spec, 2).unwrap();
        assert!(gc.verdicts.iter().all(|v| *v == PointVerdict::FailedAt(0)));
    }

    #[test]
    fn raster_round_trip() {
        let (f, ladder) = gap_ladder(20);
        let spec = GridSpec::new(c(0.0, 0.0), 3.0, 32, 6, 0);
        let gc = classify_grid(&f, &ladder, &spec, 0).unwrap();
        let bytes = gc.to_raster();
        assert_eq!(&bytes[..4], b"SWGC");
        let (back, cells) = decode_raster(&bytes).unwrap();
        assert_eq!(back, spec);
        assert_eq!(cells, gc.verdicts.iter().map(|v| v.code()).collect::<Vec<_>>());
        assert!(decode_raster(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_raster(b"NOPE").is_err());
    }

    #[test]
    fn component_examples() {
        let all = Mask::from_fn(6, |_, _| true);
        let cm = ComponentMap::from_mask(&all);
        assert_eq!(cm.component_count(), 1);
        assert!(!cm.bounded[0]);
        assert_eq!(spiders_web_verdict(&cm, (3, 3)).unwrap(), WebVerdict::NegativeAtDepth);

        let square = Mask::from_fn(6, |i, j| (2..4).contains(&i) && (2..4).contains(&j));
        let cm = ComponentMap::from_mask(&square);
        assert_eq!(cm.component_count(), 1);
        assert!(cm.bounded[0]);

        // Disk inside an in-level ring inside an outer complement region.
        let annulus = Mask::from_fn(20, |i, j| {
            let r = ((i as f64 - 9.5).powi(2) + (j as f64 - 9.5).powi(2)).sqrt();
            !(4.0..6.5).contains(&r)
        });
        let cm = ComponentMap::from_mask(&annulus);
        assert_eq!(cm.component_count(), 2);
        let inner = cm.label(10, 10).unwrap() as usize;
        let outer = cm.label(0, 0).unwrap() as usize;
        assert!(cm.bounded[inner] && !cm.bounded[outer]);
        assert_eq!(spiders_web_verdict(&cm, (10, 10)).unwrap(), WebVerdict::EvidencePositive);
        assert_eq!(spiders_web_verdict(&cm, (10, 5)), Err(CoreError::OriginNotInComplement));
    }
}
