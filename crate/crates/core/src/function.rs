//! Entire functions, circle extrema and the iterated maximum-modulus ladder.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::OVERFLOW_THRESHOLD;

/// True when `z` is beyond the representable range (or not a number at all).
#[inline]
pub fn escaped(z: Complex64) -> bool {
    !(z.norm() <= OVERFLOW_THRESHOLD)
}

/// A holomorphic self-map of the plane, as seen by the dynamics code.
///
/// Implementations return raw floating point values; overflow shows up as
/// infinities or NaN and is detected with [`escaped`].
pub trait EntireMap: Sync {
    fn apply(&self, z: Complex64) -> Complex64;

    fn deriv(&self, z: Complex64) -> Complex64;

    /// `f^n(z)`, or `None` once an iterate escapes.
    fn iterate(&self, z: Complex64, n: usize) -> Option<Complex64> {
        let mut w = z;
        for _ in 0..n {
            w = self.apply(w);
            if escaped(w) {
                return None;
            }
        }
        Some(w)
    }

    /// `f^n(z)` together with `(f^n)'(z)` by the chain rule.
    fn iterate_with_derivative(&self, z: Complex64, n: usize) -> Option<(Complex64, Complex64)> {
        let mut w = z;
        let mut d = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            d *= self.deriv(w);
            w = self.apply(w);
            if escaped(w) || escaped(d) {
                return None;
            }
        }
        Some((w, d))
    }
}

/// The closed set of supported function families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `cos z + cosh z = 2 * sum z^(4k) / (4k)!`
    GapSeries,
    /// `lambda * exp(z)`
    Exponential { lambda: Complex64 },
    /// Test polynomial with coefficients in ascending degree order.
    Polynomial { coeffs: Vec<Complex64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntireFunction {
    #[serde(flatten)]
    family: Family,
}

impl EntireFunction {
    pub fn gap_series() -> Self {
        Self { family: Family::GapSeries }
    }

    pub fn exponential(lambda: Complex64) -> Result<Self> {
        if lambda == Complex64::new(0.0, 0.0) || !lambda.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "exponential family needs a finite nonzero lambda, got {lambda}"
            )));
        }
        Ok(Self { family: Family::Exponential { lambda } })
    }

    /// Polynomial of degree at least two; `coeffs[k]` multiplies `z^k`.
    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        let mut coeffs = coeffs;
        while coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        if coeffs.len() < 3 {
            return Err(CoreError::InvalidParameter("test polynomials must have degree at least 2".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::InvalidParameter("non-finite polynomial coefficient".into()));
        }
        Ok(Self { family: Family::Polynomial { coeffs } })
    }

    /// `z^d`.
    pub fn monomial(degree: usize) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); degree + 1];
        coeffs[degree] = Complex64::new(1.0, 0.0);
        Self::polynomial(coeffs)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn family_id(&self) -> &'static str {
        match self.family {
            Family::GapSeries => "gap-series",
            Family::Exponential { .. } => "exponential",
            Family::Polynomial { .. } => "polynomial",
        }
    }

    /// True when every Taylor coefficient about 0 is a nonnegative real.
    pub fn positive_coefficients(&self) -> bool {
        match &self.family {
            Family::GapSeries => true,
            Family::Exponential { lambda } => lambda.im == 0.0 && lambda.re > 0.0,
            Family::Polynomial { coeffs } => coeffs.iter().all(|c| c.im == 0.0 && c.re >= 0.0),
        }
    }

    pub fn is_transcendental(&self) -> bool {
        !matches!(self.family, Family::Polynomial { .. })
    }

    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        let w = self.apply(z);
        if escaped(w) {
            Err(CoreError::Overflow)
        } else {
            Ok(w)
        }
    }

    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        let w = self.deriv(z);
        if escaped(w) {
            Err(CoreError::Overflow)
        } else {
            Ok(w)
        }
    }
}

impl EntireMap for EntireFunction {
    #[inline]
    fn apply(&self, z: Complex64) -> Complex64 {
        match &self.family {
            Family::GapSeries => z.cos() + z.cosh(),
            Family::Exponential { lambda } => lambda * z.exp(),
            Family::Polynomial { coeffs } => coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c),
        }
    }

    #[inline]
    fn deriv(&self, z: Complex64) -> Complex64 {
        match &self.family {
            Family::GapSeries => z.sinh() - z.sin(),
            Family::Exponential { lambda } => lambda * z.exp(),
            Family::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, (k, c)| acc * z + c * k as f64),
        }
    }
}

/// Sampling parameters for circle extrema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSampling {
    pub samples: usize,
    /// Number of best arcs polished by golden-section search.
    pub refine_arcs: usize,
    pub rel_tol: f64,
}

impl Default for CircleSampling {
    fn default() -> Self {
        Self { samples: 4096, refine_arcs: 8, rel_tol: 1e-9 }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Extremum {
    Max,
    Min,
}

fn modulus_on_circle(f: &impl EntireMap, r: f64, theta: f64) -> f64 {
    let w = f.apply(Complex64::from_polar(r, theta));
    if escaped(w) {
        f64::INFINITY
    } else {
        w.norm()
    }
}

/// Golden-section search for an extremum of `g` on `[a, b]`.
fn golden_section(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, kind: Extremum) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let better = |x: f64, y: f64| match kind {
        Extremum::Max => x > y,
        Extremum::Min => x < y,
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * TAU {
            break;
        }
        if better(gc, gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    if better(gc, gd) {
        (c, gc)
    } else {
        (d, gd)
    }
}

fn circle_extremum(f: &impl EntireMap, r: f64, sampling: &CircleSampling, kind: Extremum) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(CoreError::InvalidParameter(format!("radius must be finite and >= 0, got {r}")));
    }
    if r == 0.0 {
        let w = f.apply(Complex64::new(0.0, 0.0));
        return if escaped(w) { Err(CoreError::Overflow) } else { Ok(w.norm()) };
    }
    let n = sampling.samples.max(8);
    let step = TAU / n as f64;
    let values: Vec<f64> = (0..n).map(|k| modulus_on_circle(f, r, k as f64 * step)).collect();

    match kind {
        Extremum::Max if values.iter().any(|v| v.is_infinite()) => return Err(CoreError::Overflow),
        Extremum::Min if values.iter().all(|v| v.is_infinite()) => return Err(CoreError::Overflow),
        _ => {}
    }

    let better = |x: f64, y: f64| match kind {
        Extremum::Max => x > y,
        Extremum::Min => x < y,
    };
    // Local extrema of the sampled sequence, best first; ties keep index order.
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&k| {
            let prev = values[(k + n - 1) % n];
            let next = values[(k + 1) % n];
            !better(prev, values[k]) && !better(next, values[k])
        })
        .collect();
    candidates.sort_by(|&a, &b| {
        let ord = values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal);
        let ord = if kind == Extremum::Max { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });

    let mut best = candidates.first().map(|&k| values[k]).unwrap_or_else(|| values[0]);
    for &k in candidates.iter().take(sampling.refine_arcs.max(1)) {
        let centre = k as f64 * step;
        let (_, v) = golden_section(|t| modulus_on_circle(f, r, t), centre - step, centre + step, kind);
        if v.is_finite() && better(v, best) {
            best = v;
        }
    }
    if kind == Extremum::Max && best.is_infinite() {
        return Err(CoreError::Overflow);
    }
    Ok(best)
}

/// `M(r, f) = max |f(z)|` on `|z| = r`.
pub fn max_modulus(f: &EntireFunction, r: f64) -> Result<f64> {
    max_modulus_with(f, r, &CircleSampling::default())
}

/// Maximum modulus with explicit sampling parameters.
///
/// For families with nonnegative coefficients the maximum is attained at
/// `z = r`; when the sampled value agrees with `|f(r)|` to the relative
/// tolerance the exact axis value is returned, so the ladder rides the real
/// axis bit for bit.
pub fn max_modulus_with(f: &EntireFunction, r: f64, sampling: &CircleSampling) -> Result<f64> {
    let sampled = circle_extremum(f, r, sampling, Extremum::Max)?;
    if f.positive_coefficients() {
        let on_axis = f.evaluate(Complex64::new(r, 0.0))?.norm();
        if (sampled - on_axis).abs() <= sampling.rel_tol * on_axis {
            return Ok(on_axis);
        }
    }
    Ok(sampled)
}

/// `m(r, f) = min |f(z)|` on `|z| = r`.
pub fn min_modulus(f: &EntireFunction, r: f64) -> Result<f64> {
    min_modulus_with(f, r, &CircleSampling::default())
}

pub fn min_modulus_with(f: &EntireFunction, r: f64, sampling: &CircleSampling) -> Result<f64> {
    circle_extremum(f, r, sampling, Extremum::Min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSample {
    pub r: f64,
    /// `None` when `M(r)` overflowed, which trivially exceeds `r`.
    pub modulus: Option<f64>,
}

/// Finite-range evidence that `M(r, f) > r` for `r >= R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusCertificate {
    pub family: String,
    pub base_radius: f64,
    pub r_max: f64,
    pub grid: Vec<RadiusSample>,
    /// `M(r)/r` grows between the last two grid radii.
    pub growth_increasing: bool,
    pub passed: bool,
}

/// Number of geometric grid radii checked by [`validate_radius`].
pub const RADIUS_GRID_POINTS: usize = 64;

/// Check `M(r) > r` on a geometric grid in `[radius, r_max]` and that `M(r)/r`
/// is still increasing at `r_max`.
pub fn validate_radius(f: &EntireFunction, radius: f64, r_max: f64) -> Result<RadiusCertificate> {
    if !(radius > 0.0) || !(r_max > radius) || !r_max.is_finite() {
        return Err(CoreError::InvalidParameter(format!("need 0 < R < r_max, got R = {radius}, r_max = {r_max}")));
    }
    let n = RADIUS_GRID_POINTS;
    let ratio = (r_max / radius).powf(1.0 / (n - 1) as f64);
    let mut grid = Vec::with_capacity(n);
    for k in 0..n {
        let r = if k == n - 1 { r_max } else { radius * ratio.powi(k as i32) };
        let modulus = match max_modulus(f, r) {
            Ok(m) => Some(m),
            Err(CoreError::Overflow) => None,
            Err(e) => return Err(e),
        };
        if let Some(m) = modulus {
            if m <= r {
                return Err(CoreError::RadiusCheckFailed { witness: r, modulus: m });
            }
        }
        grid.push(RadiusSample { r, modulus });
    }
    let growth_increasing = match (&grid[n - 2], &grid[n - 1]) {
        (_, RadiusSample { modulus: None, .. }) => true,
        (RadiusSample { modulus: None, .. }, _) => false,
        (a, b) => b.modulus.unwrap() / b.r > a.modulus.unwrap() / a.r,
    };
    if !growth_increasing {
        return Err(CoreError::GrowthHeuristicFailed { r_max });
    }
    Ok(RadiusCertificate {
        family: f.family_id().to_string(),
        base_radius: radius,
        r_max,
        grid,
        growth_increasing,
        passed: true,
    })
}

/// One rung `M^n(R)` of a ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rung {
    Finite(f64),
    /// The rung overflowed; it exceeds every representable modulus.
    BeyondTop,
}

/// The sequence `M^n(R, f)` for `n = 0..=depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusLadder {
    pub base_radius: f64,
    /// Finite rungs; shorter than `depth + 1` when the ladder was truncated.
    pub values: Vec<f64>,
    pub depth: usize,
    pub tolerance: f64,
    /// First rung index that overflowed, if any.
    pub truncated_at: Option<usize>,
    pub certificate: RadiusCertificate,
}

impl RadiusLadder {
    pub fn rung(&self, n: usize) -> Result<Rung> {
        if n > self.depth {
            return Err(CoreError::LadderTooShort { needed: n as i64, available: self.depth });
        }
        Ok(self.values.get(n).map_or(Rung::BeyondTop, |&v| Rung::Finite(v)))
    }

    /// Largest finite rung index.
    pub fn top(&self) -> usize {
        self.values.len() - 1
    }

    /// Stable identifier derived from the rung bit patterns.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in std::iter::once(self.base_radius).chain(self.values.iter().copied()) {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h ^= self.depth as u64;
        format!("{}-R{}-d{}-{h:016x}", self.certificate.family, self.base_radius, self.depth)
    }
}

/// Build `[R, M(R), M^2(R), ...]` up to `depth` rungs above the base.
pub fn build_ladder(f: &EntireFunction, certificate: &RadiusCertificate, depth: usize) -> Result<RadiusLadder> {
    if !certificate.passed || certificate.family != f.family_id() {
        return Err(CoreError::InvalidRadius(certificate.base_radius));
    }
    let sampling = CircleSampling::default();
    let mut values = vec![certificate.base_radius];
    let mut truncated_at = None;
    for n in 0..depth {
        match max_modulus_with(f, values[n], &sampling) {
            Ok(m) => values.push(m),
            Err(CoreError::Overflow) => {
                truncated_at = Some(n + 1);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RadiusLadder {
        base_radius: certificate.base_radius,
        values,
        depth,
        tolerance: sampling.rel_tol,
        truncated_at,
        certificate: certificate.clone(),
    })
}
