use serde::{Deserialize, Serialize};

use super::Vec3;

/// The uc-cone field of aperture `eps`: vectors whose strong-stable
/// component is at most `eps` times the norm of their (unstable,
/// center-stable) part. The field is constant in space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub eps: f64,
}

impl ConeSpec {
    pub fn new(eps: f64) -> Self {
        ConeSpec { eps }
    }

    pub fn contains(&self, v: &Vec3) -> bool {
        v.y.abs() <= self.eps * v.x.hypot(v.z)
    }

    /// `eps * |(v^u, v^cs)| - |v^s|`, scaled by `1/|v|`; positive strictly inside.
    pub fn margin(&self, v: &Vec3) -> f64 {
        let n = v.norm();
        if n == 0.0 {
            return 0.0;
        }
        (self.eps * v.x.hypot(v.z) - v.y.abs()) / n
    }

    /// Unit vector on the boundary of the cone at angle `theta` in the
    /// (u, cs)-plane; `upper` selects the sign of the strong-stable part.
    pub fn boundary_vector(&self, theta: f64, upper: bool) -> Vec3 {
        let s = if upper { self.eps } else { -self.eps };
        let v = Vec3::new(theta.cos(), s, theta.sin());
        v * (1.0 / v.norm())
    }
}
