use serde::{Deserialize, Serialize};

use super::Code;
use crate::dynamics::MapFamily;
use crate::error::{Error, Result};
use crate::geometry::{Box3, Point3};
use crate::params::ParamSet;

/// Backward depth used to pin the x-coordinate of orbit points.
const X_DEPTH: i64 = 40;
/// Forward depth used to pin the (y, z)-coordinates of orbit points.
const YZ_DEPTH: i64 = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub point: Point3,
    pub bbox: Box3,
    /// Largest side of the nested box.
    pub diameter: f64,
    /// `(1 + 2 eps0) * max(lambda_ss, 1/lambda_u, lambda_cs1)^n`.
    pub bound: f64,
}

/// Itinerary of `pt` on `[-n, n]` with respect to `{U0, U1}`.
pub fn encode(m: &MapFamily, pt: Point3, n: u64) -> Result<Code> {
    if !pt.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite point {pt:?}")));
    }
    let r = m.regions();
    let n = n as i64;
    let symbol_of = |q: &Point3| {
        if r.in_u(0, q) {
            Some(0u8)
        } else if r.in_u(1, q) {
            Some(1)
        } else {
            None
        }
    };
    let mut future = Vec::with_capacity(n as usize + 1);
    let mut q = pt;
    for j in 0..=n {
        let v = symbol_of(&q).ok_or(Error::NotInHorseshoe(j))?;
        future.push(v);
        if j < n {
            q = m.branch(v, q);
        }
    }
    let mut past = Vec::with_capacity(n as usize);
    let mut q = pt;
    for j in 1..=n {
        let mut found = None;
        for v in 0..2u8 {
            let pre = m.branch_inverse(v, q)?;
            if r.in_u(v, &pre) {
                found = Some((v, pre));
                break;
            }
        }
        let (v, pre) = found.ok_or(Error::NotInHorseshoe(-j))?;
        past.push(v);
        q = pre;
    }
    past.reverse();
    past.extend(future);
    Code::window(-n, past)
}

fn pre_x(p: &ParamSet, v: u8, lo: f64, hi: f64) -> (f64, f64) {
    // preimage of an x-interval under the x-part of a coding branch,
    // clipped to the coding slab
    let w = p.slab_width();
    if v == 0 {
        ((lo / p.lambda_u).max(0.0), (hi / p.lambda_u).min(w))
    } else {
        ((1.0 - hi / p.lambda_u).max(1.0 - w), (1.0 - lo / p.lambda_u).min(1.0))
    }
}

fn fwd_yz(p: &ParamSet, v: u8, y: f64, z: f64) -> (f64, f64) {
    if v == 0 {
        (p.lambda_ss * y, p.lambda_cs0 * z)
    } else {
        (1.0 - p.lambda_ss * y, p.lambda_cs1 * z + 1.0 - p.lambda_cs1)
    }
}

/// Nested-box intersection of the constraints `f^j(x) ∈ X_{v_j}`,
/// `-n <= j <= n`: the x-side from forward symbols, the (y, z)-sides from
/// backward symbols. The returned point is the box center.
pub fn decode(m: &MapFamily, c: &Code, n: u64) -> Result<Decoded> {
    let p = &m.params;
    let n = n as i64;
    let (lo, hi) = (p.cube_lo(), p.cube_hi());
    let (mut xl, mut xh) = (lo, hi);
    for j in (0..=n).rev() {
        let v = c.symbol(j)?;
        (xl, xh) = pre_x(p, v, xl, xh);
        if xl > xh {
            return Err(Error::InternalInconsistency(format!("empty x-interval at j = {j}")));
        }
    }
    let (mut y, mut z) = ([lo, hi], [lo, hi]);
    for j in -n..0 {
        let v = c.symbol(j)?;
        let (y0, z0) = fwd_yz(p, v, y[0], z[0]);
        let (y1, z1) = fwd_yz(p, v, y[1], z[1]);
        y = [y0.min(y1), y0.max(y1)];
        z = [z0.min(z1), z0.max(z1)];
    }
    let bbox = Box3::new(Point3::new(xl, y[0], z[0]), Point3::new(xh, y[1], z[1]));
    Ok(Decoded {
        point: bbox.center(),
        bbox,
        diameter: bbox.diameter(),
        bound: (1.0 + 2.0 * p.eps0) * p.coding_rate().powi(n as i32),
    })
}

/// Point of the perturbed horseshoe with the same itinerary on `[-n, n]`.
///
/// Alternates a forward sweep that updates `(y, z)` along the segment with
/// a backward sweep solving for `x` (the expanding coordinate) by 1-D
/// Newton steps, with the same boundary data as `decode`.
pub fn continuation(m: &MapFamily, c: &Code, n: u64) -> Result<Point3> {
    if !m.has_bumps_on(0) && !m.has_bumps_on(1) {
        return decode(m, c, n).map(|d| d.point);
    }
    let p = &m.params;
    let n = n as i64;
    let len = (2 * n + 2) as usize;
    let idx = |j: i64| (j + n) as usize;
    let v: Vec<u8> = (-n..=n).map(|j| c.symbol(j)).collect::<Result<_>>()?;
    let mut x = vec![0.5; len];
    let mut y = vec![0.5; len];
    let mut z = vec![0.5; len];
    for j in (-n..=n).rev() {
        x[idx(j)] = if v[idx(j)] == 0 { x[idx(j + 1)] / p.lambda_u } else { 1.0 - x[idx(j + 1)] / p.lambda_u };
    }
    for j in -n..=n {
        let (a, b) = fwd_yz(p, v[idx(j)], y[idx(j)], z[idx(j)]);
        y[idx(j + 1)] = a;
        z[idx(j + 1)] = b;
    }
    let h = 1e-7;
    for _ in 0..200 {
        let mut change: f64 = 0.0;
        for j in -n..=n {
            let k = idx(j);
            let q = m.branch(v[k], Point3::new(x[k], y[k], z[k]));
            change = change.max((y[k + 1] - q.y).abs()).max((z[k + 1] - q.z).abs());
            y[k + 1] = q.y;
            z[k + 1] = q.z;
        }
        for j in (-n..=n).rev() {
            let k = idx(j);
            let target = x[k + 1];
            let f = |t: f64| m.branch(v[k], Point3::new(t, y[k], z[k])).x - target;
            let mut t = if v[k] == 0 { target / p.lambda_u } else { 1.0 - target / p.lambda_u };
            for _ in 0..30 {
                let r = f(t);
                let d = (f(t + h) - f(t - h)) / (2.0 * h);
                if d == 0.0 || !d.is_finite() {
                    return Err(Error::Degenerate(format!("flat x-branch at j = {j}")));
                }
                let dt = r / d;
                t -= dt;
                if dt.abs() <= 1e-17 {
                    break;
                }
            }
            change = change.max((x[k] - t).abs());
            x[k] = t;
        }
        if change <= 1e-15 {
            let k = idx(0);
            return Ok(Point3::new(x[k], y[k], z[k]));
        }
    }
    Err(Error::Degenerate("continuation sweeps did not converge".into()))
}

/// Orbit points `f^j(x)`, `0 <= j < len`, of the horseshoe point with code
/// `c` under the unperturbed map. Each point is pinned by the code alone
/// (x by the next 40 symbols, y and z by the previous 400), so the orbit does
/// not inherit the instability of forward iteration.
pub fn orbit_from_code(p: &ParamSet, c: &Code, len: usize) -> Result<Vec<Point3>> {
    let last = len as i64 + X_DEPTH;
    let mut xs = vec![0.5; len];
    let mut x = 0.5;
    for j in (0..last).rev() {
        let v = c.symbol(j)?;
        x = if v == 0 { x / p.lambda_u } else { 1.0 - x / p.lambda_u };
        if (j as usize) < len {
            xs[j as usize] = x;
        }
    }
    let (mut y, mut z) = (0.5, 0.5);
    for j in -YZ_DEPTH..0 {
        (y, z) = fwd_yz(p, c.symbol(j)?, y, z);
    }
    let mut out = Vec::with_capacity(len);
    for (j, &xj) in xs.iter().enumerate() {
        out.push(Point3::new(xj, y, z));
        (y, z) = fwd_yz(p, c.symbol(j as i64)?, y, z);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{phi, Bump};
    use crate::symbolic::Generator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fam() -> MapFamily {
        MapFamily::unperturbed(&ParamSet::reference())
    }

    fn all(v: u8, n: i64) -> Code {
        Code::window(-n, vec![v; (2 * n + 1) as usize]).unwrap()
    }

    #[test]
    fn fixed_points_encode_constantly() {
        let m = fam();
        assert_eq!(encode(&m, Point3::new(0.0, 0.0, 0.0), 5).unwrap(), all(0, 5));
        assert_eq!(encode(&m, Point3::new(0.75, 0.8, 1.0), 5).unwrap(), all(1, 5));
        assert!(matches!(encode(&m, Point3::new(0.5, 0.5, 0.5), 1), Err(Error::NotInHorseshoe(0))));
    }

    #[test]
    fn fixed_points_decode_within_bound() {
        let m = fam();
        for n in [5u64, 20, 40] {
            let d = decode(&m, &all(0, n as i64), n).unwrap();
            assert!(d.point.dist_inf(&Point3::new(0.0, 0.0, 0.0)) <= d.bound);
            let d = decode(&m, &all(1, n as i64), n).unwrap();
            assert!(d.point.dist_inf(&Point3::new(0.75, 0.8, 1.0)) <= d.bound);
        }
    }

    #[test]
    fn period_two_decode() {
        let m = fam();
        let c = Code::from_generator(Generator::Periodic(vec![0, 1]));
        let d = decode(&m, &c, 30).unwrap();
        let want = Point3::new(0.3, 1.0 / 1.0625, 0.1 / 0.46);
        assert!((want.y - 0.941176).abs() < 1e-6 && (want.z - 0.217391).abs() < 1e-6);
        assert!(d.point.dist_inf(&want) <= d.bound);
    }

    #[test]
    fn diameters_respect_bound() {
        let m = fam();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 0..=40u64 {
            let w: Vec<u8> = (0..2 * n + 1).map(|_| rng.gen_range(0..2)).collect();
            let c = Code::window(-(n as i64), w).unwrap();
            let d = decode(&m, &c, n).unwrap();
            assert!(d.diameter <= d.bound * (1.0 + 1e-12), "n={n}: {} > {}", d.diameter, d.bound);
        }
    }

    #[test]
    fn shift_equivariance() {
        let m = fam();
        let p = ParamSet::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let w: Vec<u8> = (0..41).map(|_| rng.gen_range(0..2)).collect();
            let c = Code::window(-20, w).unwrap();
            let a = decode(&m, &c, 19).unwrap();
            let b = decode(&m, &c.shift(1), 19).unwrap();
            let img = phi(&p, c.symbol(0).unwrap(), a.point);
            // the image's error grows by at most lambda_u in x
            assert!(img.dist_inf(&b.point) <= 3.0 * a.bound + b.bound);
        }
    }

    #[test]
    fn code_driven_orbit_matches_decode() {
        let p = ParamSet::reference();
        let m = fam();
        let c = Code::from_generator(Generator::Blocks(4));
        let orb = orbit_from_code(&p, &c, 30).unwrap();
        for (j, q) in orb.iter().enumerate() {
            let d = decode(&m, &c.shift(j as i64), 60).unwrap();
            assert!(q.dist_inf(&d.point) <= 2.0 * d.bound, "j={j}");
        }
        // consecutive points are related by the branch maps up to roundoff
        for j in 0..29 {
            let img = phi(&p, c.symbol(j as i64).unwrap(), orb[j]);
            assert!(img.dist_inf(&orb[j + 1]) < 1e-12);
        }
    }

    #[test]
    fn zero_perturbation_continuation_is_decode() {
        let m = fam();
        let c = all(1, 6);
        assert_eq!(continuation(&m, &c, 6).unwrap(), decode(&m, &c, 6).unwrap().point);
    }

    #[test]
    fn continuation_respects_support() {
        let p = ParamSet::reference();
        let b = Bump::new(Point3::new(0.15, 0.5, 0.5), 0.1, Point3::new(1e-4, 1e-4, -1e-4));
        let g = MapFamily::perturbed(&p, vec![b], 1e-4).unwrap();
        let m = fam();
        let ones = all(1, 12);
        let a = continuation(&g, &ones, 12).unwrap();
        assert!(a.dist_inf(&decode(&m, &ones, 12).unwrap().point) < 1e-9);
        let zeros = all(0, 12);
        let a = continuation(&g, &zeros, 12).unwrap();
        assert!(a.dist_inf(&decode(&m, &zeros, 12).unwrap().point) <= 1e-3);
        // the continued point carries its code under the perturbed map
        let mixed = Code::window(-8, vec![0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 0, 1]).unwrap();
        let q = continuation(&g, &mixed, 8).unwrap();
        assert_eq!(encode(&g, q, 6).unwrap().slice(-6, 6).unwrap(), mixed.slice(-6, 6).unwrap());
    }
}
