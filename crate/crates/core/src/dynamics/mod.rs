//! Branch maps of the model, their perturbations, Jacobians and orbits.
//!
//! `phi0` and `phi1` extend the two affine horseshoe branches to all of
//! space; `phi2` extends the fold return map (two iterates) with a C¹
//! unimodal profile `eta`. A [`MapFamily`] adds smooth bumps supported in
//! the neighborhoods `U_i`.
//!
//! The model leaves two pieces of dynamics qualitative; they are realized
//! concretely here:
//!
//! * a point of `X2` spends one step outside the cube, translated by
//!   `(0, 0, 3)`, before landing on its `phi2` image;
//! * a point of `Y ∪ S` is absorbed: it contracts by `1/2` per step toward the
//!   external fixed point `s0 = (0, 0, 5)` and never returns.

mod cone_check;
mod orbit;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, PlanarMap, Point3, Regions};
use crate::params::ParamSet;

pub use cone_check::{cone_check, BranchConeStats, ConeReport, ConeSampling, ConeWitness, ConeCase};
pub use orbit::{orbit, step, write_orbit_csv, OrbitPos, OrbitState, ABSORBING_POINT, SLAB_TOL};

/// Finite-difference step for perturbed Jacobians.
pub const FD_STEP: f64 = 1e-6;

/// Sup of `|d/ds psi(s)|` for the bump profile.
pub const PROFILE_MAX_SLOPE: f64 = 2.170357085708888;

/// Three-piece C¹ unimodal profile of the fold extension.
pub fn eta(p: &ParamSet, x: f64) -> f64 {
    let c = p.a1 * (0.5 + p.eps0);
    if x < -p.eps0 {
        2.0 * c * x + c * (-0.5 + p.eps0)
    } else if x <= 1.0 + p.eps0 {
        -p.a1 * (x - 0.5) * (x - 0.5)
    } else {
        -2.0 * c * x + c * (1.5 + p.eps0)
    }
}

pub fn eta_prime(p: &ParamSet, x: f64) -> f64 {
    let c = 2.0 * p.a1 * (0.5 + p.eps0);
    if x < -p.eps0 {
        c
    } else if x <= 1.0 + p.eps0 {
        -2.0 * p.a1 * (x - 0.5)
    } else {
        -c
    }
}

pub fn phi0(p: &ParamSet, q: Point3) -> Point3 {
    Point3::new(p.lambda_u * q.x, p.lambda_ss * q.y, p.lambda_cs0 * q.z)
}

pub fn phi1(p: &ParamSet, q: Point3) -> Point3 {
    Point3::new(
        p.lambda_u * (1.0 - q.x),
        1.0 - p.lambda_ss * q.y,
        p.lambda_cs1 * q.z + 1.0 - p.lambda_cs1,
    )
}

pub fn phi2(p: &ParamSet, q: Point3) -> Point3 {
    Point3::new(
        eta(p, q.x) + p.a2 * (q.z + p.mu),
        p.a3 * (q.y - 0.5) + 0.5,
        p.a4 * (q.x - 0.5) + 0.5,
    )
}

pub fn phi0_inv(p: &ParamSet, q: Point3) -> Point3 {
    Point3::new(q.x / p.lambda_u, q.y / p.lambda_ss, q.z / p.lambda_cs0)
}

pub fn phi1_inv(p: &ParamSet, q: Point3) -> Point3 {
    Point3::new(
        1.0 - q.x / p.lambda_u,
        (1.0 - q.y) / p.lambda_ss,
        (q.z - 1.0 + p.lambda_cs1) / p.lambda_cs1,
    )
}

pub fn phi2_inv(p: &ParamSet, q: Point3) -> Point3 {
    let x = (q.z - 0.5) / p.a4 + 0.5;
    let y = (q.y - 0.5) / p.a3 + 0.5;
    let z = (q.x - eta(p, x)) / p.a2 - p.mu;
    Point3::new(x, y, z)
}

pub fn phi(p: &ParamSet, branch: u8, q: Point3) -> Point3 {
    match branch {
        0 => phi0(p, q),
        1 => phi1(p, q),
        _ => phi2(p, q),
    }
}

pub fn phi_inv(p: &ParamSet, branch: u8, q: Point3) -> Point3 {
    match branch {
        0 => phi0_inv(p, q),
        1 => phi1_inv(p, q),
        _ => phi2_inv(p, q),
    }
}

/// Closed-form Jacobian of an unperturbed branch.
pub fn phi_jacobian(p: &ParamSet, branch: u8, q: Point3) -> Mat3 {
    match branch {
        0 => Mat3::diag(p.lambda_u, p.lambda_ss, p.lambda_cs0),
        1 => Mat3::diag(-p.lambda_u, -p.lambda_ss, p.lambda_cs1),
        _ => Mat3([[eta_prime(p, q.x), 0.0, p.a2], [0.0, p.a3, 0.0], [p.a4, 0.0, 0.0]]),
    }
}

/// Restriction of an unperturbed branch to horizontal planes. All three
/// branches preserve horizontality, so their xz-part does not depend on `y`.
#[derive(Debug, Clone, Copy)]
pub struct PlanarBranch {
    pub params: ParamSet,
    pub branch: u8,
}

impl PlanarBranch {
    pub fn new(params: &ParamSet, branch: u8) -> Self {
        PlanarBranch { params: *params, branch }
    }
}

impl PlanarMap for PlanarBranch {
    fn apply(&self, q: [f64; 2]) -> [f64; 2] {
        phi(&self.params, self.branch, Point3::new(q[0], 0.5, q[1])).proj()
    }

    fn inverse(&self, q: [f64; 2]) -> Option<[f64; 2]> {
        let pre = phi_inv(&self.params, self.branch, Point3::new(q[0], 0.5, q[1]));
        pre.is_finite().then(|| pre.proj())
    }

    fn jacobian_det(&self, _q: [f64; 2]) -> f64 {
        let p = &self.params;
        match self.branch {
            0 => p.lambda_u * p.lambda_cs0,
            1 => -p.lambda_u * p.lambda_cs1,
            _ => -p.a2 * p.a4,
        }
    }
}

/// Smooth radial bump `amplitude * psi(|p - center| / radius)` with
/// `psi(s) = exp(1 - 1/(1 - s^2))` on `s < 1`, so `psi(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point3,
    pub radius: f64,
    pub amplitude: Point3,
}

fn profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl Bump {
    pub fn new(center: Point3, radius: f64, amplitude: Point3) -> Self {
        Bump { center, radius, amplitude }
    }

    pub fn displacement(&self, q: Point3) -> Point3 {
        let s = q.dist(&self.center) / self.radius;
        self.amplitude * profile(s)
    }

    /// Sup-norm of the amplitude vector.
    pub fn amplitude_sup(&self) -> f64 {
        self.amplitude.x.abs().max(self.amplitude.y.abs()).max(self.amplitude.z.abs())
    }

    /// Upper bound on every entry of the displacement's Jacobian.
    pub fn derivative_bound(&self) -> f64 {
        PROFILE_MAX_SLOPE * self.amplitude_sup() / self.radius
    }

    /// Bump whose Jacobian entries are bounded by `c1` (and whose
    /// displacement is then at most `c1 * radius / 2.17`).
    pub fn with_c1_size(center: Point3, radius: f64, direction: Point3, c1: f64) -> Self {
        let d = direction.x.abs().max(direction.y.abs()).max(direction.z.abs());
        let a = c1 * radius / PROFILE_MAX_SLOPE;
        Bump::new(center, radius, direction * (a / d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Unperturbed,
    Perturbed,
}

/// Which map a Jacobian is requested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Phi0,
    Phi1,
    Phi2,
    /// The fold return map itself; only defined on `X2`.
    F0Squared,
}

impl Branch {
    pub fn index(self) -> u8 {
        match self {
            Branch::Phi0 => 0,
            Branch::Phi1 => 1,
            Branch::Phi2 | Branch::F0Squared => 2,
        }
    }
}

/// A map `g` near the model map, given by its three branch extensions.
#[derive(Debug, Clone)]
pub struct MapFamily {
    pub params: ParamSet,
    pub perturbations: Vec<Bump>,
    /// Declared amplitude budget for the bumps.
    pub delta: f64,
    owner: Vec<u8>,
    regions: Regions,
}

impl MapFamily {
    pub fn unperturbed(params: &ParamSet) -> Self {
        MapFamily { params: *params, perturbations: Vec::new(), delta: 0.0, owner: Vec::new(), regions: Regions::new(params) }
    }

    /// Validates each bump: finite data, amplitude within `delta`, support
    /// inside exactly one neighborhood `U_i`.
    pub fn perturbed(params: &ParamSet, bumps: Vec<Bump>, delta: f64) -> Result<Self> {
        params.check_finite()?;
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("amplitude budget {delta} must be finite and non-negative")));
        }
        let regions = Regions::new(params);
        let mut owner = Vec::with_capacity(bumps.len());
        for (k, b) in bumps.iter().enumerate() {
            if !(b.center.is_finite() && b.amplitude.is_finite() && b.radius > 0.0 && b.radius.is_finite()) {
                return Err(Error::InvalidInput(format!("bump {k} has invalid data")));
            }
            if b.amplitude_sup() > delta {
                return Err(Error::InvalidInput(format!(
                    "bump {k} amplitude {} exceeds budget {delta}",
                    b.amplitude_sup()
                )));
            }
            let home = (0..3u8).find(|&i| support_inside(&regions, i, b));
            match home {
                Some(i) => owner.push(i),
                None => return Err(Error::InvalidInput(format!("bump {k} support is not inside any U_i"))),
            }
        }
        Ok(MapFamily { params: *params, perturbations: bumps, delta, owner, regions })
    }

    pub fn mode(&self) -> Mode {
        if self.perturbations.is_empty() {
            Mode::Unperturbed
        } else {
            Mode::Perturbed
        }
    }

    pub fn regions(&self) -> &Regions {
        &self.regions
    }

    /// Neighborhood index owning each bump.
    pub fn owners(&self) -> &[u8] {
        &self.owner
    }

    pub fn has_bumps_on(&self, branch: u8) -> bool {
        self.owner.contains(&branch)
    }

    /// The perturbed branch `phi_{g,i}`.
    pub fn branch(&self, i: u8, q: Point3) -> Point3 {
        let mut out = phi(&self.params, i, q);
        for (b, &o) in self.perturbations.iter().zip(&self.owner) {
            if o == i {
                out = out + b.displacement(q);
            }
        }
        out
    }

    /// Inverse of `phi_{g,i}` by Newton iteration from the unperturbed inverse.
    pub fn branch_inverse(&self, i: u8, target: Point3) -> Result<Point3> {
        let mut q = phi_inv(&self.params, i, target);
        if !self.has_bumps_on(i) {
            return Ok(q);
        }
        for _ in 0..60 {
            let r = self.branch(i, q) - target;
            if r.norm() <= 1e-14 * (1.0 + target.norm()) {
                return Ok(q);
            }
            let j = self.fd_jacobian(i, q);
            let dq = j
                .solve(&r)
                .ok_or_else(|| Error::Degenerate(format!("singular Jacobian of branch {i} at {q:?}")))?;
            q = q - dq;
        }
        let r = (self.branch(i, q) - target).norm();
        if r <= 1e-10 {
            Ok(q)
        } else {
            Err(Error::Degenerate(format!("branch {i} inverse did not converge (residual {r:e})")))
        }
    }

    fn fd_jacobian(&self, i: u8, q: Point3) -> Mat3 {
        let h = FD_STEP;
        let mut m = [[0.0; 3]; 3];
        let basis = [Point3::new(h, 0.0, 0.0), Point3::new(0.0, h, 0.0), Point3::new(0.0, 0.0, h)];
        for (col, e) in basis.iter().enumerate() {
            let d = (self.branch(i, q + *e) - self.branch(i, q - *e)) * (0.5 / h);
            let d = d.to_array();
            for row in 0..3 {
                m[row][col] = d[row];
            }
        }
        Mat3(m)
    }

    /// Jacobian of a branch at `q`: closed form when the branch carries no
    /// bumps, central differences otherwise.
    pub fn jacobian(&self, branch: Branch, q: Point3) -> Result<Mat3> {
        if !q.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite point {q:?}")));
        }
        if branch == Branch::F0Squared && !self.regions.in_x2(&q) {
            return Err(Error::InvalidInput(format!("fold return map undefined at {q:?} (outside X2)")));
        }
        let i = branch.index();
        if self.has_bumps_on(i) {
            Ok(self.fd_jacobian(i, q))
        } else {
            Ok(phi_jacobian(&self.params, i, q))
        }
    }
}

fn support_inside(regions: &Regions, i: u8, b: &Bump) -> bool {
    if regions.u_margin(i, &b.center) < b.radius {
        return false;
    }
    if i < 2 {
        return true;
    }
    // the fold neighborhood is curved; probe the support sphere
    let n = 2000;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n).all(|k| {
        let t = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
        let r = (1.0 - t * t).sqrt();
        let th = golden * k as f64;
        let d = Point3::new(r * th.cos(), t, r * th.sin());
        regions.in_u(2, &(b.center + d * b.radius))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ps() -> ParamSet {
        ParamSet::reference()
    }

    fn close(a: Point3, b: Point3, tol: f64) -> bool {
        a.dist_inf(&b) <= tol
    }

    #[test]
    fn eta_examples() {
        let p = ps();
        assert_eq!(eta(&p, 0.5), 0.0);
        // left piece and parabola agree at the breakpoint
        let left: f64 = 2.0 * 20.0 * 0.51 * -0.01 + 20.0 * 0.51 * (-0.49);
        assert!((left - (-5.202)).abs() < 1e-12);
        assert!((eta(&p, -0.01) - (-5.202)).abs() < 1e-12);
        assert!((eta(&p, -0.01 - 1e-13) - (-5.202)).abs() < 1e-10);
        assert!((eta(&p, 1.01) - (-5.202)).abs() < 1e-12);
        assert!((eta(&p, 1.01 + 1e-13) - (-5.202)).abs() < 1e-10);
    }

    #[test]
    fn eta_derivative_is_bounded_and_continuous() {
        let p = ps();
        let h = 1e-7;
        let mut sup: f64 = 0.0;
        for k in 0..=4000 {
            let x = -1.0 + 3.0 * k as f64 / 4000.0;
            let fd = (eta(&p, x + h) - eta(&p, x - h)) / (2.0 * h);
            sup = sup.max(fd.abs());
            assert!((fd - eta_prime(&p, x)).abs() < 1e-5);
        }
        assert!(sup <= 20.4 + 1e-6, "{sup}");
        for b in [-0.01, 1.01] {
            assert!((eta_prime(&p, b - 1e-12) - eta_prime(&p, b + 1e-12)).abs() < 1e-9);
        }
    }

    #[test]
    fn branch_examples() {
        let p = ps();
        assert!(close(phi0(&p, Point3::new(0.1, 0.2, 0.3)), Point3::new(0.3, 0.05, 0.18), 1e-15));
        let fix = Point3::new(0.75, 0.8, 1.0);
        assert!(close(phi1(&p, fix), fix, 1e-12));
        assert!((0.75 - 3.0 / 4.0f64).abs() < 1e-15 && (0.8 - 1.0 / 1.25f64).abs() < 1e-15);
        assert!(close(phi2(&p, Point3::new(0.5, 0.5, 0.5)), Point3::new(0.052, 0.5, 0.5), 1e-15));
    }

    #[test]
    fn inverses_round_trip() {
        let p = ps();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let q = Point3::new(rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5));
            for i in 0..3 {
                let back = phi_inv(&p, i, phi(&p, i, q));
                assert!(close(back, q, 1e-12), "branch {i} at {q:?}");
            }
        }
    }

    #[test]
    fn fold_jacobian_at_vertex() {
        let m = MapFamily::unperturbed(&ps());
        let j = m.jacobian(Branch::F0Squared, Point3::new(0.5, 0.5, 0.5)).unwrap();
        let want = Mat3([[0.0, 0.0, 0.1], [0.0, 0.002, 0.0], [-1.0, 0.0, 0.0]]);
        assert!(j.max_abs_diff(&want) < 1e-15);
        assert!((j.det() - 2e-4).abs() < 1e-18);
        assert!(m.jacobian(Branch::F0Squared, Point3::new(0.1, 0.5, 0.5)).is_err());
        let j0 = m.jacobian(Branch::Phi0, Point3::new(0.9, -3.0, 7.0)).unwrap();
        assert_eq!(j0, Mat3::diag(3.0, 0.25, 0.6));
    }

    #[test]
    fn closed_form_matches_finite_differences() {
        let p = ps();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let q = Point3::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            for i in 0..3u8 {
                let h = 1e-6;
                let jc = phi_jacobian(&p, i, q);
                for (col, e) in [Point3::new(h, 0.0, 0.0), Point3::new(0.0, h, 0.0), Point3::new(0.0, 0.0, h)]
                    .iter()
                    .enumerate()
                {
                    let d = ((phi(&p, i, q + *e) - phi(&p, i, q - *e)) * (0.5 / h)).to_array();
                    for row in 0..3 {
                        let c = jc.0[row][col];
                        assert!((d[row] - c).abs() <= 1e-6 * c.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn small_bumps_move_jacobian_proportionally() {
        let p = ps();
        let delta = 1e-4;
        let b = Bump::new(Point3::new(0.15, 0.5, 0.5), 0.1, Point3::new(delta, -delta, delta));
        let m = MapFamily::perturbed(&p, vec![b], delta).unwrap();
        assert_eq!(m.owners(), &[0]);
        let base = MapFamily::unperturbed(&p);
        let c = PROFILE_MAX_SLOPE / 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let q = Point3::new(rng.gen_range(0.05..0.25), rng.gen_range(0.4..0.6), rng.gen_range(0.4..0.6));
            let j = m.jacobian(Branch::Phi0, q).unwrap();
            let j0 = base.jacobian(Branch::Phi0, q).unwrap();
            assert!(j.max_abs_diff(&j0) <= c * delta * 1.01 + 1e-8);
            // outside its neighborhood the bump does not act on other branches
            assert_eq!(m.branch(1, q), phi1(&p, q));
        }
    }

    #[test]
    fn perturbed_inverse_converges() {
        let p = ps();
        let b = Bump::with_c1_size(Point3::new(0.5, 0.5, 0.6), 0.05, Point3::new(1.0, 0.0, -0.5), 0.0025);
        let m = MapFamily::perturbed(&p, vec![b], 0.0025).unwrap();
        assert_eq!(m.owners(), &[2]);
        let q = Point3::new(0.51, 0.45, 0.62);
        let back = m.branch_inverse(2, m.branch(2, q)).unwrap();
        assert!(close(back, q, 1e-11));
    }

    #[test]
    fn bad_bumps_are_rejected() {
        let p = ps();
        // straddles the gap between the slab and the fold neighborhood
        let b = Bump::new(Point3::new(0.34, 0.5, 0.5), 0.05, Point3::new(1e-4, 0.0, 0.0));
        assert!(MapFamily::perturbed(&p, vec![b], 1e-3).is_err());
        let b = Bump::new(Point3::new(0.15, 0.5, 0.5), 0.05, Point3::new(1e-2, 0.0, 0.0));
        assert!(MapFamily::perturbed(&p, vec![b], 1e-3).is_err());
    }

    #[test]
    fn fold_image_lands_in_x0_with_expected_height_range() {
        let p = ps();
        let rg = Regions::new(&p);
        let (mut ymin, mut ymax) = (f64::MAX, f64::MIN);
        let n = 60;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let t = |s: usize| -0.01 + 1.02 * s as f64 / n as f64;
                    let q = Point3::new(0.5 + (t(i) - 0.5) * 0.2, t(j), t(k));
                    if !rg.in_x2(&q) {
                        continue;
                    }
                    let img = phi2(&p, q);
                    assert!(rg.in_x0(&img), "{q:?} -> {img:?}");
                    ymin = ymin.min(img.y);
                    ymax = ymax.max(img.y);
                    let det = phi_jacobian(&p, 2, q).det();
                    assert!((det - 2e-4).abs() < 1e-18);
                }
            }
        }
        let half = 0.002 * 0.51;
        assert!((ymin - (0.5 - half)).abs() < 1e-9 && (ymax - (0.5 + half)).abs() < 1e-9);
    }

    #[test]
    fn planar_branches_scale_area() {
        let p = ps();
        assert!((PlanarBranch::new(&p, 0).jacobian_det([0.1, 0.1]) - 1.8).abs() < 1e-12);
        assert!((PlanarBranch::new(&p, 1).jacobian_det([0.9, 0.1]).abs() - 2.7).abs() < 1e-12);
        assert!((PlanarBranch::new(&p, 2).jacobian_det([0.5, 0.5]).abs() - 0.1).abs() < 1e-12);
    }
}
