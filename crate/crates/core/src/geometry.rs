//! Plane geometry on closed polylines.

use num_complex::Complex64;

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

/// Twice the signed area enclosed by a closed polyline (first == last).
pub fn signed_area2(vertices: &[Complex64]) -> f64 {
    vertices.windows(2).map(|w| w[0].re * w[1].im - w[1].re * w[0].im).sum()
}

/// Winding number of a closed polyline around `p`, by upward/downward
/// crossings of the horizontal ray to the right of `p`.
pub fn winding_number(vertices: &[Complex64], p: Complex64) -> i32 {
    let mut wn = 0;
    for w in vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let side = (b.re - a.re) * (p.im - a.im) - (p.re - a.re) * (b.im - a.im);
        if a.im <= p.im {
            if b.im > p.im && side > 0.0 {
                wn += 1;
            }
        } else if b.im <= p.im && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

pub fn perimeter(vertices: &[Complex64]) -> f64 {
    vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// A point on a polyline together with the unit direction of its segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub point: Complex64,
    pub tangent: Complex64,
}

/// `n` points equally spaced in arc length along a closed polyline,
/// starting at the first vertex.
pub fn resample_closed(vertices: &[Complex64], n: usize) -> Vec<CurveSample> {
    let total = perimeter(vertices);
    if n == 0 || total == 0.0 {
        return Vec::new();
    }
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..n {
        let s = k as f64 * step;
        while seg + 1 < vertices.len() - 1 && seg_start + (vertices[seg + 1] - vertices[seg]).norm() <= s {
            seg_start += (vertices[seg + 1] - vertices[seg]).norm();
            seg += 1;
        }
        let (a, b) = (vertices[seg], vertices[seg + 1]);
        let len = (b - a).norm();
        let t = if len > 0.0 { ((s - seg_start) / len).clamp(0.0, 1.0) } else { 0.0 };
        let tangent = if len > 0.0 { (b - a) / len } else { Complex64::new(1.0, 0.0) };
        out.push(CurveSample { point: a + (b - a) * t, tangent });
    }
    out
}

/// Bucket grid over the segments of a polyline for nearest-distance queries.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    segments: Vec<(Complex64, Complex64)>,
    min: Complex64,
    bucket: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl SegmentIndex {
    /// Index the consecutive segments of `vertices`.
    pub fn new(vertices: &[Complex64]) -> Self {
        let segments: Vec<_> = vertices.windows(2).map(|w| (w[0], w[1])).collect();
        assert!(!segments.is_empty(), "polyline needs at least one segment");
        let (mut lo, mut hi) = (segments[0].0, segments[0].0);
        for &(a, b) in &segments {
            for p in [a, b] {
                lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
                hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
            }
        }
        let extent = (hi.re - lo.re).max(hi.im - lo.im).max(1e-12);
        let target = ((segments.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let bucket = extent / target as f64;
        let nx = (((hi.re - lo.re) / bucket).floor() as usize + 1).max(1);
        let ny = (((hi.im - lo.im) / bucket).floor() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (k, &(a, b)) in segments.iter().enumerate() {
            let (x0, x1) = (a.re.min(b.re), a.re.max(b.re));
            let (y0, y1) = (a.im.min(b.im), a.im.max(b.im));
            let bx0 = (((x0 - lo.re) / bucket).floor() as usize).min(nx - 1);
            let bx1 = (((x1 - lo.re) / bucket).floor() as usize).min(nx - 1);
            let by0 = (((y0 - lo.im) / bucket).floor() as usize).min(ny - 1);
            let by1 = (((y1 - lo.im) / bucket).floor() as usize).min(ny - 1);
            for by in by0..=by1 {
                for bx in bx0..=bx1 {
                    buckets[by * nx + bx].push(k as u32);
                }
            }
        }
        Self { segments, min: lo, bucket, nx, ny, buckets }
    }

    /// Distance from `p` to the nearest indexed segment.
    pub fn distance(&self, p: Complex64) -> f64 {
        let fx = (p.re - self.min.re) / self.bucket;
        let fy = (p.im - self.min.im) / self.bucket;
        let bx = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let by = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        // Distance from p to the box of its clamped bucket; rings grow from there.
        let cx = self.min.re + (bx as f64 + 0.5) * self.bucket;
        let cy = self.min.im + (by as f64 + 0.5) * self.bucket;
        let outside =
            ((p.re - cx).abs() - 0.5 * self.bucket).max(0.0).hypot(((p.im - cy).abs() - 0.5 * self.bucket).max(0.0));
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            let lo_x = bx as i64 - ring as i64;
            let hi_x = bx as i64 + ring as i64;
            let lo_y = by as i64 - ring as i64;
            let hi_y = by as i64 + ring as i64;
            for y in lo_y..=hi_y {
                if y < 0 || y >= self.ny as i64 {
                    continue;
                }
                for x in lo_x..=hi_x {
                    if x < 0 || x >= self.nx as i64 {
                        continue;
                    }
                    if y != lo_y && y != hi_y && x != lo_x && x != hi_x {
                        continue;
                    }
                    for &k in &self.buckets[y as usize * self.nx + x as usize] {
                        let (a, b) = self.segments[k as usize];
                        best = best.min(point_segment_distance(p, a, b));
                    }
                }
            }
            // Anything in the next ring is at least this far away.
            if best <= outside + ring as f64 * self.bucket {
                break;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn square() -> Vec<Complex64> {
        vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0), c(0.0, 0.0)]
    }

    #[test]
    fn segment_distance() {
        assert_eq!(point_segment_distance(c(0.5, 1.0), c(0.0, 0.0), c(1.0, 0.0)), 1.0);
        assert_eq!(point_segment_distance(c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)), 1.0);
        assert_eq!(point_segment_distance(c(3.0, 4.0), c(0.0, 0.0), c(0.0, 0.0)), 5.0);
    }

    #[test]
    fn winding_and_area() {
        let sq = square();
        assert_eq!(winding_number(&sq, c(0.5, 0.5)), 1);
        assert_eq!(winding_number(&sq, c(1.5, 0.5)), 0);
        let rev: Vec<_> = sq.iter().rev().copied().collect();
        assert_eq!(winding_number(&rev, c(0.5, 0.5)), -1);
        assert_eq!(signed_area2(&sq), 2.0);
    }

    #[test]
    fn resampling_is_uniform() {
        let s = resample_closed(&square(), 8);
        assert_eq!(s.len(), 8);
        assert_eq!(s[0].point, c(0.0, 0.0));
        assert!((s[1].point - c(0.5, 0.0)).norm() < 1e-15);
        assert!((s[5].point - c(0.5, 1.0)).norm() < 1e-15);
        assert_eq!(s[5].tangent, c(-1.0, 0.0));
    }

    #[test]
    fn index_matches_brute_force() {
        let circle: Vec<Complex64> =
            (0..=200).map(|k| Complex64::from_polar(3.0, k as f64 * std::f64::consts::TAU / 200.0)).collect();
        let idx = SegmentIndex::new(&circle);
        for p in [c(0.0, 0.0), c(2.9, 0.1), c(10.0, -7.0), c(-3.2, 0.4), c(0.0, 50.0)] {
            let brute = circle.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min);
            assert!((idx.distance(p) - brute).abs() < 1e-12, "{p}");
        }
    }
}
