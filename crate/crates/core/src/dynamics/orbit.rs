use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MapFamily;
use crate::error::{Error, Result};
use crate::geometry::{Point3, RegionTag, TRANSIT_LIFT};

/// Slab frontiers are widened by this much so that points placed exactly
/// on them (up to roundoff) keep their affine branch.
pub const SLAB_TOL: f64 = 1e-12;

/// External attracting fixed point receiving absorbed orbits.
pub const ABSORBING_POINT: Point3 = Point3::new(0.0, 0.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrbitPos {
    Active { at: Point3 },
    /// One step outside the cube; `origin` is the point of `X2` that folded.
    Transit { origin: Point3 },
    Absorbed { at: Point3 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitState {
    pub pos: OrbitPos,
    pub time: u64,
    /// Region of the current position (primary tag by precedence
    /// X0, X1, X2, Y, S).
    pub tag: RegionTag,
}

impl OrbitState {
    pub fn start(m: &MapFamily, at: Point3) -> Result<Self> {
        if !at.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite start {at:?}")));
        }
        Ok(OrbitState { pos: OrbitPos::Active { at }, time: 0, tag: primary_tag(m, &at) })
    }

    /// Concrete coordinates of the state.
    pub fn point(&self) -> Point3 {
        match self.pos {
            OrbitPos::Active { at } | OrbitPos::Absorbed { at } => at,
            OrbitPos::Transit { origin } => origin + Point3::new(0.0, 0.0, TRANSIT_LIFT),
        }
    }

    pub fn is_absorbed(&self) -> bool {
        matches!(self.pos, OrbitPos::Absorbed { .. })
    }
}

fn primary_tag(m: &MapFamily, p: &Point3) -> RegionTag {
    let r = m.regions();
    if !r.in_cube(p) {
        RegionTag::OutsideB
    } else if r.in_x0(p) {
        RegionTag::X0
    } else if r.in_x1(p) {
        RegionTag::X1
    } else if r.in_x2(p) {
        RegionTag::X2
    } else if r.in_y(p) {
        RegionTag::Y
    } else {
        RegionTag::S
    }
}

/// One iterate of the model map.
pub fn step(m: &MapFamily, s: &OrbitState) -> Result<OrbitState> {
    let time = s.time + 1;
    let pos = match s.pos {
        OrbitPos::Absorbed { at } => OrbitPos::Absorbed { at: ABSORBING_POINT + (at - ABSORBING_POINT) * 0.5 },
        OrbitPos::Transit { origin } => OrbitPos::Active { at: m.branch(2, origin) },
        OrbitPos::Active { at } => {
            let r = m.regions();
            if !r.in_cube(&at) {
                return Err(Error::Unmodeled(at.to_array()));
            }
            if let Some(v) = r.coding_slab(&at, SLAB_TOL) {
                OrbitPos::Active { at: m.branch(v, at) }
            } else if r.in_x2(&at) {
                OrbitPos::Transit { origin: at }
            } else {
                OrbitPos::Absorbed { at: ABSORBING_POINT + (at - ABSORBING_POINT) * 0.5 }
            }
        }
    };
    let tag = match pos {
        OrbitPos::Active { at } => primary_tag(m, &at),
        OrbitPos::Transit { .. } => RegionTag::GX2Transit,
        OrbitPos::Absorbed { .. } => RegionTag::OutsideB,
    };
    Ok(OrbitState { pos, time, tag })
}

/// Orbit of `start` with `n` steps (`n + 1` states).
pub fn orbit(m: &MapFamily, start: Point3, n: u64) -> Result<Vec<OrbitState>> {
    let mut s = OrbitState::start(m, start)?;
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(s);
    for _ in 0..n {
        s = step(m, &s)?;
        out.push(s);
    }
    Ok(out)
}

/// CSV with columns `time,x,y,z,tag`.
pub fn write_orbit_csv<W: Write>(states: &[OrbitState], mut w: W) -> Result<()> {
    writeln!(w, "time,x,y,z,tag")?;
    for s in states {
        let p = s.point();
        writeln!(w, "{},{:.17e},{:.17e},{:.17e},{}", s.time, p.x, p.y, p.z, s.tag)?;
    }
    Ok(())
}
