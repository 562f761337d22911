use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Point3;
use crate::params::ParamSet;

/// Radius of the closed box-neighborhoods `U_i` of the regions `X_i`.
pub const NEIGHBORHOOD_RADIUS: f64 = 0.005;

/// Vertical offset of the concrete transit step out of the cube.
pub(crate) const TRANSIT_LIFT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    X0,
    X1,
    X2,
    #[serde(rename = "gX2_transit")]
    GX2Transit,
    Y,
    S,
    OutsideB,
    U0,
    U1,
    U2,
}

impl RegionTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionTag::X0 => "X0",
            RegionTag::X1 => "X1",
            RegionTag::X2 => "X2",
            RegionTag::GX2Transit => "gX2_transit",
            RegionTag::Y => "Y",
            RegionTag::S => "S",
            RegionTag::OutsideB => "OutsideB",
            RegionTag::U0 => "U0",
            RegionTag::U1 => "U1",
            RegionTag::U2 => "U2",
        }
    }

    /// Coding region tag for a symbol.
    pub fn coding(symbol: u8) -> RegionTag {
        if symbol == 0 {
            RegionTag::X0
        } else {
            RegionTag::X1
        }
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed regions of the cube `B = [-eps0, 1+eps0]^3` derived from a
/// parameter set. All regions are closed, so frontier points carry every
/// adjacent tag.
#[derive(Debug, Clone, Copy)]
pub struct Regions {
    pub lo: f64,
    pub hi: f64,
    pub slab: f64,
    pub parabola: f64,
    pub mu: f64,
    pub delta: f64,
}

impl Regions {
    pub fn new(p: &ParamSet) -> Self {
        Regions {
            lo: p.cube_lo(),
            hi: p.cube_hi(),
            slab: p.slab_width(),
            parabola: p.parabola_coeff(),
            mu: p.mu,
            delta: NEIGHBORHOOD_RADIUS,
        }
    }

    fn in_interval(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn in_cube(&self, p: &Point3) -> bool {
        self.in_interval(p.x) && self.in_interval(p.y) && self.in_interval(p.z)
    }

    pub fn in_x0(&self, p: &Point3) -> bool {
        self.in_cube(p) && p.x >= 0.0 && p.x <= self.slab
    }

    pub fn in_x1(&self, p: &Point3) -> bool {
        self.in_cube(p) && p.x >= 1.0 - self.slab && p.x <= 1.0
    }

    /// Coding slab containing `p` when the slab is widened by `tol` in x;
    /// used by the dynamics to absorb roundoff at the slab frontiers.
    pub fn coding_slab(&self, p: &Point3, tol: f64) -> Option<u8> {
        if !self.in_cube(p) {
            None
        } else if p.x >= -tol && p.x <= self.slab + tol {
            Some(0)
        } else if p.x >= 1.0 - self.slab - tol && p.x <= 1.0 + tol {
            Some(1)
        } else {
            None
        }
    }

    /// Height of the parabolic cylinder bounding `X2` from below.
    pub fn fold_floor(&self, x: f64) -> f64 {
        self.parabola * (x - 0.5) * (x - 0.5) - self.mu
    }

    pub fn in_x2(&self, p: &Point3) -> bool {
        self.in_cube(p) && p.z >= self.fold_floor(p.x)
    }

    pub fn in_y(&self, p: &Point3) -> bool {
        self.in_cube(p) && p.x >= self.slab && p.x <= 1.0 - self.slab && p.z <= self.fold_floor(p.x)
    }

    pub fn in_s(&self, p: &Point3) -> bool {
        self.in_cube(p) && (p.x <= 0.0 || p.x >= 1.0)
    }

    pub fn in_transit(&self, p: &Point3) -> bool {
        self.in_x2(&Point3::new(p.x, p.y, p.z - TRANSIT_LIFT))
    }

    /// Signed slack of `p` in the neighborhood `U_i` (non-negative inside).
    /// For `U0`, `U1` this is the sup-norm distance to the complement.
    pub fn u_margin(&self, i: u8, p: &Point3) -> f64 {
        let d = self.delta;
        let (xlo, xhi) = match i {
            0 => (0.0 - d, self.slab + d),
            1 => (1.0 - self.slab - d, 1.0 + d),
            _ => (self.lo - d, self.hi + d),
        };
        let mut m = (p.x - xlo).min(xhi - p.x);
        m = m.min(p.y - (self.lo - d)).min(self.hi + d - p.y);
        m = m.min(p.z - (self.lo - d)).min(self.hi + d - p.z);
        if i == 2 {
            // box-thickened parabolic region: every point within sup-distance
            // `d` of X2 satisfies this inequality
            let reach = ((p.x - 0.5).abs() - d).max(0.0);
            let floor = self.parabola * reach * reach - self.mu - d;
            m = m.min(p.z - floor);
        }
        m
    }

    pub fn in_u(&self, i: u8, p: &Point3) -> bool {
        self.u_margin(i, p) >= 0.0
    }

    pub fn tags(&self, p: &Point3) -> BTreeSet<RegionTag> {
        let mut out = BTreeSet::new();
        if self.in_cube(p) {
            if self.in_x0(p) {
                out.insert(RegionTag::X0);
            }
            if self.in_x1(p) {
                out.insert(RegionTag::X1);
            }
            if self.in_x2(p) {
                out.insert(RegionTag::X2);
            }
            if self.in_y(p) {
                out.insert(RegionTag::Y);
            }
            if self.in_s(p) {
                out.insert(RegionTag::S);
            }
        } else {
            out.insert(RegionTag::OutsideB);
            if self.in_transit(p) {
                out.insert(RegionTag::GX2Transit);
            }
        }
        for (i, tag) in [(0u8, RegionTag::U0), (1, RegionTag::U1), (2, RegionTag::U2)] {
            if self.in_u(i, p) {
                out.insert(tag);
            }
        }
        out
    }
}

pub fn region_membership(p: &ParamSet, pt: &Point3) -> BTreeSet<RegionTag> {
    Regions::new(p).tags(pt)
}

/// Margin of `pt` inside the coding neighborhood for `symbol`.
pub fn neighborhood_margin(p: &ParamSet, symbol: u8, pt: &Point3) -> f64 {
    Regions::new(p).u_margin(symbol, pt)
}

/// Intersections of the parabolic cylinder with the planes `z = 1 + eps0` and
/// `y = 1/2`, ordered `(q-, q+)`.
pub fn q_points(p: &ParamSet) -> (Point3, Point3) {
    let off = (p.a2 / p.a1 * (1.0 + p.eps0 + p.mu)).sqrt();
    let z = 1.0 + p.eps0;
    (Point3::new(0.5 - off, 0.5, z), Point3::new(0.5 + off, 0.5, z))
}
