//! Uniform background bins over the domain bounding box, aware of periodic axes.

use crate::geometry::{DomainPolygon, Vec2};

/// Integer periodic image offset, in multiples of the domain period.
pub type Shift = [i32; 2];

pub struct PointGrid<'a> {
    points: &'a [Vec2],
    origin: Vec2,
    bin: Vec2,
    dims: [i64; 2],
    period: [Option<f64>; 2],
    start: Vec<usize>,
    items: Vec<usize>,
}

impl<'a> PointGrid<'a> {
    pub fn new(points: &'a [Vec2], domain: &DomainPolygon, target_bin: f64) -> Self {
        let (min, max) = domain.bounding_box();
        let extent = max - min;
        let mut dims = [1i64; 2];
        let mut bin = Vec2::zeros();
        for axis in 0..2 {
            let n = ((extent[axis] / target_bin).floor() as i64).clamp(1, 1 << 20);
            dims[axis] = n;
            bin[axis] = extent[axis] / n as f64;
        }
        let ncell = (dims[0] * dims[1]) as usize;
        let mut counts = vec![0usize; ncell + 1];
        let mut grid = Self {
            points,
            origin: min,
            bin,
            dims,
            period: domain.period(),
            start: Vec::new(),
            items: Vec::new(),
        };
        let keys: Vec<usize> = points.iter().map(|p| grid.key(grid.bin_of(p))).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for c in 1..=ncell {
            counts[c] += counts[c - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k]] = i;
            fill[k] += 1;
        }
        grid.start = counts;
        grid.items = items;
        grid
    }

    pub fn bin_size(&self) -> f64 {
        self.bin.x.min(self.bin.y)
    }

    pub fn dims(&self) -> [i64; 2] {
        self.dims
    }

    pub fn bin_of(&self, p: &Vec2) -> [i64; 2] {
        let mut b = [0i64; 2];
        for axis in 0..2 {
            let raw = ((p[axis] - self.origin[axis]) / self.bin[axis]).floor() as i64;
            b[axis] = raw.clamp(0, self.dims[axis] - 1);
        }
        b
    }

    fn key(&self, b: [i64; 2]) -> usize {
        (b[1] * self.dims[0] + b[0]) as usize
    }

    pub fn shift_vector(&self, shift: Shift) -> Vec2 {
        let mut v = Vec2::zeros();
        for axis in 0..2 {
            if let Some(len) = self.period[axis] {
                v[axis] = shift[axis] as f64 * len;
            }
        }
        v
    }

    /// Resolves a possibly out-of-range bin to a stored bin plus image shift.
    fn resolve(&self, b: [i64; 2]) -> Option<([i64; 2], Shift)> {
        let mut out = [0i64; 2];
        let mut shift = [0i32; 2];
        for axis in 0..2 {
            let n = self.dims[axis];
            if self.period[axis].is_some() {
                out[axis] = b[axis].rem_euclid(n);
                shift[axis] = b[axis].div_euclid(n) as i32;
            } else if b[axis] < 0 || b[axis] >= n {
                return None;
            } else {
                out[axis] = b[axis];
            }
        }
        Some((out, shift))
    }

    fn visit_bin(&self, b: [i64; 2], f: &mut impl FnMut(usize, Shift)) {
        if let Some((bin, shift)) = self.resolve(b) {
            let k = self.key(bin);
            for &j in &self.items[self.start[k]..self.start[k + 1]] {
                f(j, shift);
            }
        }
    }

    /// Visits every stored point (with image shift) in the square ring of bins
    /// at Chebyshev distance `ring` from `center`. Returns false once the ring
    /// lies entirely outside a non-periodic grid.
    pub fn visit_ring(&self, center: [i64; 2], ring: i64, mut f: impl FnMut(usize, Shift)) -> bool {
        let exhausted = (0..2).all(|axis| {
            self.period[axis].is_none()
                && center[axis] - ring < 0
                && center[axis] + ring >= self.dims[axis]
        });
        if ring == 0 {
            self.visit_bin(center, &mut f);
            return true;
        }
        for dx in -ring..=ring {
            self.visit_bin([center[0] + dx, center[1] - ring], &mut f);
            self.visit_bin([center[0] + dx, center[1] + ring], &mut f);
        }
        for dy in (-ring + 1)..ring {
            self.visit_bin([center[0] - ring, center[1] + dy], &mut f);
            self.visit_bin([center[0] + ring, center[1] + dy], &mut f);
        }
        !exhausted
    }

    /// Visits all point images within `radius` of `p`, passing the index and
    /// the image position.
    pub fn visit_radius(&self, p: &Vec2, radius: f64, mut f: impl FnMut(usize, Vec2)) {
        let r2 = radius * radius;
        let lo: Vec<i64> = (0..2)
            .map(|a| ((p[a] - radius - self.origin[a]) / self.bin[a]).floor() as i64)
            .collect();
        let hi: Vec<i64> = (0..2)
            .map(|a| ((p[a] + radius - self.origin[a]) / self.bin[a]).floor() as i64)
            .collect();
        for by in lo[1]..=hi[1] {
            for bx in lo[0]..=hi[0] {
                self.visit_bin([bx, by], &mut |j, shift| {
                    let q = self.points[j] + self.shift_vector(shift);
                    if (q - p).norm_squared() < r2 {
                        f(j, q);
                    }
                });
            }
        }
    }
}
