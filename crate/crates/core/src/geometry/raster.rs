use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Point3, RegionTag, Regions};
use crate::error::{Error, Result};
use crate::params::ParamSet;

/// Uniform cell grid over a rectangle of the xz-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub z0: f64,
    pub x1: f64,
    pub z1: f64,
    pub nx: usize,
    pub nz: usize,
}

impl Grid {
    pub fn new(x0: f64, x1: f64, z0: f64, z1: f64, nx: usize, nz: usize) -> Result<Self> {
        if nx == 0 || nz == 0 {
            return Err(Error::InvalidInput("raster resolution must be positive".into()));
        }
        if !(x1 > x0 && z1 > z0) {
            return Err(Error::InvalidInput(format!("empty bounding box [{x0},{x1}]x[{z0},{z1}]")));
        }
        Ok(Grid { x0, z0, x1, z1, nx, nz })
    }

    /// Square grid of `n x n` cells over the face `I_eps0^2` of the cube.
    pub fn cube_face(p: &ParamSet, n: usize) -> Result<Self> {
        Grid::new(p.cube_lo(), p.cube_hi(), p.cube_lo(), p.cube_hi(), n, n)
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    pub fn hz(&self) -> f64 {
        (self.z1 - self.z0) / self.nz as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hz()
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, i: usize, k: usize) -> [f64; 2] {
        [self.x0 + (i as f64 + 0.5) * self.hx(), self.z0 + (k as f64 + 0.5) * self.hz()]
    }

    /// Cell containing `(x, z)`, if inside the grid.
    pub fn locate(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        let fi = (x - self.x0) / self.hx();
        let fk = (z - self.z0) / self.hz();
        if !(fi >= 0.0 && fk >= 0.0) {
            return None;
        }
        let (i, k) = (fi as usize, fk as usize);
        if i < self.nx && k < self.nz {
            Some((i, k))
        } else if fi == self.nx as f64 || fk == self.nz as f64 {
            // closed upper edge
            Some((i.min(self.nx - 1), k.min(self.nz - 1)))
        } else {
            None
        }
    }

    pub fn box_area(&self) -> f64 {
        (self.x1 - self.x0) * (self.z1 - self.z0)
    }
}

/// A measurable subset of the xz-plane stored as a raster mask.
/// Cell `(i, k)` is stored at index `k * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarRegion {
    pub grid: Grid,
    pub mask: Vec<bool>,
}

/// JSON header accompanying an exported mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionHeader {
    pub bbox: [f64; 4],
    pub resolution: [usize; 2],
    pub area: f64,
    pub error_bound: f64,
}

/// Map of the xz-plane used for pushforwards. Implementations must be
/// injective; the inverse is used to pull target cells back.
pub trait PlanarMap: Sync {
    fn apply(&self, p: [f64; 2]) -> [f64; 2];
    fn inverse(&self, q: [f64; 2]) -> Option<[f64; 2]>;
    fn jacobian_det(&self, p: [f64; 2]) -> f64;
    fn is_injective(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarAffine {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl PlanarAffine {
    pub fn new(m: [[f64; 2]; 2], t: [f64; 2]) -> Self {
        PlanarAffine { m, t }
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }
}

impl PlanarMap for PlanarAffine {
    fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * p[0] + self.m[0][1] * p[1] + self.t[0],
            self.m[1][0] * p[0] + self.m[1][1] * p[1] + self.t[1],
        ]
    }

    fn inverse(&self, q: [f64; 2]) -> Option<[f64; 2]> {
        let d = self.det();
        if d == 0.0 {
            return None;
        }
        let (a, b) = (q[0] - self.t[0], q[1] - self.t[1]);
        Some([(self.m[1][1] * a - self.m[0][1] * b) / d, (-self.m[1][0] * a + self.m[0][0] * b) / d])
    }

    fn jacobian_det(&self, _p: [f64; 2]) -> f64 {
        self.det()
    }

    fn is_injective(&self) -> bool {
        self.det() != 0.0
    }
}

/// Planar part of a region of the cube, used to restrict masks.
#[derive(Debug, Clone, Copy)]
pub struct Slab {
    regions: Regions,
    tag: RegionTag,
}

impl Slab {
    pub fn new(p: &ParamSet, tag: RegionTag) -> Self {
        Slab { regions: Regions::new(p), tag }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        // y plays no role in the planar footprint of these regions
        let pt = Point3::new(x, 0.5, z);
        let r = &self.regions;
        match self.tag {
            RegionTag::X0 => r.in_x0(&pt),
            RegionTag::X1 => r.in_x1(&pt),
            RegionTag::X2 => r.in_x2(&pt),
            RegionTag::Y => r.in_y(&pt),
            RegionTag::S => r.in_s(&pt),
            RegionTag::U0 => r.in_u(0, &pt),
            RegionTag::U1 => r.in_u(1, &pt),
            RegionTag::U2 => r.in_u(2, &pt),
            RegionTag::OutsideB => !r.in_cube(&pt),
            RegionTag::GX2Transit => false,
        }
    }
}

impl PlanarRegion {
    pub fn empty(grid: Grid) -> Self {
        PlanarRegion { mask: vec![false; grid.len()], grid }
    }

    /// Cells whose center satisfies `pred`.
    pub fn from_predicate(grid: Grid, pred: impl Fn(f64, f64) -> bool + Sync) -> Self {
        let mask = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let c = grid.center(idx % grid.nx, idx / grid.nx);
                pred(c[0], c[1])
            })
            .collect();
        PlanarRegion { grid, mask }
    }

    /// Closed rectangle `[x_lo, x_hi] x [z_lo, z_hi]`.
    pub fn from_rect(grid: Grid, x: [f64; 2], z: [f64; 2]) -> Self {
        Self::from_predicate(grid, |cx, cz| cx >= x[0] && cx <= x[1] && cz >= z[0] && cz <= z[1])
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn area(&self) -> f64 {
        self.cell_count() as f64 * self.grid.cell_area()
    }

    pub fn get(&self, i: usize, k: usize) -> bool {
        self.mask[k * self.grid.nx + i]
    }

    pub fn contains_point(&self, x: f64, z: f64) -> bool {
        match self.grid.locate(x, z) {
            Some((i, k)) => self.get(i, k),
            None => false,
        }
    }

    /// Length of the mask's boundary (cell edges between set and complement,
    /// including edges on the grid border).
    pub fn perimeter(&self) -> f64 {
        let g = &self.grid;
        let (hx, hz) = (g.hx(), g.hz());
        let mut p = 0.0;
        for k in 0..g.nz {
            for i in 0..g.nx {
                if !self.get(i, k) {
                    continue;
                }
                if i == 0 || !self.get(i - 1, k) {
                    p += hz;
                }
                if i + 1 == g.nx || !self.get(i + 1, k) {
                    p += hz;
                }
                if k == 0 || !self.get(i, k - 1) {
                    p += hx;
                }
                if k + 1 == g.nz || !self.get(i, k + 1) {
                    p += hx;
                }
            }
        }
        p
    }

    /// Raster surcharge: twice the area of one cell per boundary edge. For
    /// square cells this is the perimeter times twice the cell size; on
    /// anisotropic grids it charges each edge its own strip.
    pub fn error_bound(&self) -> f64 {
        let g = &self.grid;
        let (hx, hz) = (g.hx(), g.hz());
        let edges = self.perimeter_edges();
        2.0 * edges as f64 * hx * hz
    }

    fn perimeter_edges(&self) -> usize {
        let g = &self.grid;
        let mut n = 0;
        for k in 0..g.nz {
            for i in 0..g.nx {
                if !self.get(i, k) {
                    continue;
                }
                n += usize::from(i == 0 || !self.get(i - 1, k));
                n += usize::from(i + 1 == g.nx || !self.get(i + 1, k));
                n += usize::from(k == 0 || !self.get(i, k - 1));
                n += usize::from(k + 1 == g.nz || !self.get(i, k + 1));
            }
        }
        n
    }

    /// `[x_min, x_max, z_min, z_max]` of the marked cells, or `None` if empty.
    pub fn bounding_box(&self) -> Option<[f64; 4]> {
        let g = &self.grid;
        let mut bb: Option<[usize; 4]> = None;
        for k in 0..g.nz {
            for i in 0..g.nx {
                if self.get(i, k) {
                    bb = Some(match bb {
                        None => [i, i, k, k],
                        Some(b) => [b[0].min(i), b[1].max(i), b[2].min(k), b[3].max(k)],
                    });
                }
            }
        }
        bb.map(|b| {
            [
                g.x0 + b[0] as f64 * g.hx(),
                g.x0 + (b[1] + 1) as f64 * g.hx(),
                g.z0 + b[2] as f64 * g.hz(),
                g.z0 + (b[3] + 1) as f64 * g.hz(),
            ]
        })
    }

    /// Image of the region under an injective map, resampled on `target`.
    /// Every target cell is split into `supersample^2` sub-points which are
    /// pulled back through the inverse; the cell is kept when at least half
    /// of them land in the source mask.
    pub fn pushforward_onto(&self, map: &dyn PlanarMap, target: Grid, supersample: usize) -> Result<PlanarRegion> {
        if supersample < 4 {
            return Err(Error::InvalidInput(format!("supersampling factor {supersample} < 4")));
        }
        if !map.is_injective() {
            return Err(Error::InvalidInput("pushforward requires an injective map".into()));
        }
        let s = supersample;
        let (hx, hz) = (target.hx(), target.hz());
        let need = s * s;
        let mask = (0..target.len())
            .into_par_iter()
            .map(|idx| {
                let (i, k) = (idx % target.nx, idx / target.nx);
                let bx = target.x0 + i as f64 * hx;
                let bz = target.z0 + k as f64 * hz;
                let mut hits = 0usize;
                for a in 0..s {
                    for b in 0..s {
                        let q = [bx + (a as f64 + 0.5) / s as f64 * hx, bz + (b as f64 + 0.5) / s as f64 * hz];
                        if let Some(pre) = map.inverse(q) {
                            if self.contains_point(pre[0], pre[1]) {
                                hits += 1;
                            }
                        }
                    }
                }
                2 * hits >= need
            })
            .collect();
        Ok(PlanarRegion { grid: target, mask })
    }

    pub fn pushforward(&self, map: &dyn PlanarMap, supersample: usize) -> Result<PlanarRegion> {
        self.pushforward_onto(map, self.grid, supersample)
    }

    pub fn intersect(&self, pred: impl Fn(f64, f64) -> bool + Sync) -> PlanarRegion {
        let g = self.grid;
        let mask = self
            .mask
            .par_iter()
            .enumerate()
            .map(|(idx, &m)| {
                if !m {
                    return false;
                }
                let c = g.center(idx % g.nx, idx / g.nx);
                pred(c[0], c[1])
            })
            .collect();
        PlanarRegion { grid: g, mask }
    }

    /// Restriction to the planar footprint of a region tag.
    pub fn intersect_tag(&self, p: &ParamSet, tag: RegionTag) -> PlanarRegion {
        let slab = Slab::new(p, tag);
        self.intersect(move |x, z| slab.contains(x, z))
    }

    pub fn union(&self, other: &PlanarRegion) -> Result<PlanarRegion> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("union of regions on different grids".into()));
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect();
        Ok(PlanarRegion { grid: self.grid, mask })
    }

    pub fn header(&self) -> RegionHeader {
        let g = &self.grid;
        RegionHeader {
            bbox: [g.x0, g.x1, g.z0, g.z1],
            resolution: [g.nx, g.nz],
            area: self.area(),
            error_bound: self.error_bound(),
        }
    }

    /// Binary PGM (P5); row 0 of the image is the top (largest z).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        write!(w, "P5\n{} {}\n255\n", g.nx, g.nz)?;
        let mut row = vec![0u8; g.nx];
        for k in (0..g.nz).rev() {
            for (i, px) in row.iter_mut().enumerate() {
                *px = if self.get(i, k) { 255 } else { 0 };
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

/// Area of the graph `y = h(x, z)` over a planar region, given the gradient
/// of `h`.
pub fn graph_surface_area(region: &PlanarRegion, grad: impl Fn(f64, f64) -> (f64, f64) + Sync) -> f64 {
    let g = region.grid;
    let sum: f64 = region
        .mask
        .par_iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(idx, _)| {
            let c = g.center(idx % g.nx, idx / g.nx);
            let (gx, gz) = grad(c[0], c[1]);
            (1.0 + gx * gx + gz * gz).sqrt()
        })
        .sum();
    sum * g.cell_area()
}
