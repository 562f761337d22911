//! Regions of the cube, the uc-cone field and rasterised planar regions.
//!
//! Coordinates follow the hyperbolic splitting: `x` is the unstable
//! direction, `y` the strong-stable (vertical) one and `z` the center-stable
//! one. "Horizontal" means parallel to the xz-plane.

mod cone;
mod raster;
mod regions;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub use cone::ConeSpec;
pub(crate) use regions::TRANSIT_LIFT;
pub use raster::{
    graph_surface_area, Grid, PlanarAffine, PlanarMap, PlanarRegion, RegionHeader, Slab,
};
pub use regions::{
    neighborhood_margin, q_points, region_membership, Regions, RegionTag, NEIGHBORHOOD_RADIUS,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Tangent vectors share the point representation.
pub type Vec3 = Point3;

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, o: &Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(&self, o: &Point3) -> f64 {
        (*self - *o).norm()
    }

    /// Sup-norm distance.
    pub fn dist_inf(&self, o: &Point3) -> f64 {
        (self.x - o.x).abs().max((self.y - o.y).abs()).max((self.z - o.z).abs())
    }

    /// Orthogonal projection to the xz-plane.
    pub fn proj(&self) -> [f64; 2] {
        [self.x, self.z]
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        let m = &self.0;
        Point3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn max_abs_diff(&self, o: &Mat3) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.0[i][j] - o.0[i][j]).abs());
            }
        }
        d
    }

    /// Solves `self * v = b` by Cramer's rule; `None` if singular.
    pub fn solve(&self, b: &Vec3) -> Option<Vec3> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let col = |j: usize| {
            let mut m = *self;
            let bb = b.to_array();
            for (i, row) in m.0.iter_mut().enumerate() {
                row[j] = bb[i];
            }
            m.det() / d
        };
        Some(Point3::new(col(0), col(1), col(2)))
    }
}

/// Axis-aligned closed box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub lo: Point3,
    pub hi: Point3,
}

impl Box3 {
    pub fn new(lo: Point3, hi: Point3) -> Self {
        Box3 { lo, hi }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y && p.z >= self.lo.z && p.z <= self.hi.z
    }

    pub fn center(&self) -> Point3 {
        (self.lo + self.hi) * 0.5
    }

    pub fn widths(&self) -> [f64; 3] {
        [self.hi.x - self.lo.x, self.hi.y - self.lo.y, self.hi.z - self.lo.z]
    }

    /// Largest side length (sup-norm diameter).
    pub fn diameter(&self) -> f64 {
        let w = self.widths();
        w[0].max(w[1]).max(w[2])
    }

    pub fn volume(&self) -> f64 {
        let w = self.widths();
        w[0].max(0.0) * w[1].max(0.0) * w[2].max(0.0)
    }

    /// `k^3` grid points including corners; `k >= 2`.
    pub fn grid_points(&self, k: usize) -> Vec<Point3> {
        let k = k.max(2);
        let mut out = Vec::with_capacity(k * k * k);
        let t = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (k - 1) as f64;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    out.push(Point3::new(
                        t(self.lo.x, self.hi.x, i),
                        t(self.lo.y, self.hi.y, j),
                        t(self.lo.z, self.hi.z, l),
                    ));
                }
            }
        }
        out
    }
}
