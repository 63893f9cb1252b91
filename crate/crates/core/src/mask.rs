//! Square boolean cell masks and the connectivity operations on them.

use serde::{Deserialize, Serialize};

/// A `res x res` boolean raster; cell `(i, j)` is column `i`, row `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    res: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(res: usize) -> Self {
        Self { res, bits: vec![false; res * res] }
    }

    pub fn from_fn(res: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(res * res);
        for j in 0..res {
            for i in 0..res {
                bits.push(f(i, j));
            }
        }
        Self { res, bits }
    }

    pub fn from_bits(res: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), res * res, "mask size mismatch");
        Self { res, bits }
    }

    #[inline]
    pub fn res(&self) -> usize {
        self.res
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.res + i]
    }

    /// Like [`Mask::get`] but `false` outside the raster.
    #[inline]
    pub fn get_signed(&self, i: i64, j: i64) -> bool {
        let r = self.res as i64;
        i >= 0 && j >= 0 && i < r && j < r && self.bits[(j * r + i) as usize]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[j * self.res + i] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn touches_border(&self) -> bool {
        let r = self.res;
        (0..r).any(|k| self.get(k, 0) || self.get(k, r - 1) || self.get(0, k) || self.get(r - 1, k))
    }

    /// First cell set in `self` but not in `other`, scanning rows upward.
    pub fn first_not_in(&self, other: &Mask) -> Option<(usize, usize)> {
        assert_eq!(self.res, other.res);
        self.bits.iter().zip(&other.bits).position(|(&a, &b)| a && !b).map(|k| (k % self.res, k / self.res))
    }

    /// 4-connected component of `seed` among cells where `pred` holds.
    pub fn flood_fill(res: usize, seed: (usize, usize), pred: impl Fn(usize, usize) -> bool) -> Mask {
        let mut out = Mask::new(res);
        if !pred(seed.0, seed.1) {
            return out;
        }
        let mut stack = vec![seed];
        out.set(seed.0, seed.1, true);
        while let Some((i, j)) = stack.pop() {
            let mut visit = |a: usize, b: usize, out: &mut Mask| {
                if !out.get(a, b) && pred(a, b) {
                    out.set(a, b, true);
                    stack.push((a, b));
                }
            };
            if i > 0 {
                visit(i - 1, j, &mut out);
            }
            if i + 1 < res {
                visit(i + 1, j, &mut out);
            }
            if j > 0 {
                visit(i, j - 1, &mut out);
            }
            if j + 1 < res {
                visit(i, j + 1, &mut out);
            }
        }
        out
    }

    /// The region together with every cell it encloses.
    ///
    /// Unset cells count as exterior when they reach the raster border
    /// through 8-connected unset cells, the dual of 4-connected regions.
    pub fn filled(&self) -> Mask {
        let r = self.res;
        let mut exterior = Mask::new(r);
        let mut stack = Vec::new();
        for k in 0..r {
            for (i, j) in [(k, 0), (k, r - 1), (0, k), (r - 1, k)] {
                if !self.get(i, j) && !exterior.get(i, j) {
                    exterior.set(i, j, true);
                    stack.push((i, j));
                }
            }
        }
        while let Some((i, j)) = stack.pop() {
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= r as i64 || b >= r as i64 {
                        continue;
                    }
                    let (a, b) = (a as usize, b as usize);
                    if !self.get(a, b) && !exterior.get(a, b) {
                        exterior.set(a, b, true);
                        stack.push((a, b));
                    }
                }
            }
        }
        Mask { res: r, bits: exterior.bits.iter().map(|&e| !e).collect() }
    }
}
