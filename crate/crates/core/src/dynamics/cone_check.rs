use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Branch, MapFamily};
use crate::error::{Error, Result};
use crate::geometry::{ConeSpec, Point3, Vec3, NEIGHBORHOOD_RADIUS};

/// Which half of the fold-branch estimate a tested vector falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeCase {
    /// Affine branches, no case split.
    Affine,
    /// `|v^u| >= (a2 / 2 a1) |v^cs|`.
    UnstableDominant,
    CenterStableDominant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSampling {
    /// Points sampled in each neighborhood `U_i`.
    pub points: usize,
    /// Cone-boundary unit vectors per point.
    pub directions: usize,
}

impl Default for ConeSampling {
    fn default() -> Self {
        ConeSampling { points: 1000, directions: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeWitness {
    pub branch: u8,
    pub point: Point3,
    pub vector: Vec3,
    pub image: Vec3,
    pub margin: f64,
    pub case: ConeCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchConeStats {
    pub branch: u8,
    pub tested: usize,
    pub violations: usize,
    pub worst: Option<ConeWitness>,
    pub unstable_dominant: usize,
    pub center_stable_dominant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub eps: f64,
    pub tested: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub strictly_inside: bool,
    pub worst: Option<ConeWitness>,
    pub branches: Vec<BranchConeStats>,
}

fn sample_in_u(m: &MapFamily, branch: u8, rng: &mut ChaCha8Rng) -> Point3 {
    let r = m.regions();
    let d = NEIGHBORHOOD_RADIUS;
    let (xlo, xhi) = match branch {
        0 => (-d, r.slab + d),
        1 => (1.0 - r.slab - d, 1.0 + d),
        _ => (r.lo - d, r.hi + d),
    };
    loop {
        let p = Point3::new(
            rng.gen_range(xlo..=xhi),
            rng.gen_range(r.lo - d..=r.hi + d),
            rng.gen_range(r.lo - d..=r.hi + d),
        );
        if r.in_u(branch, &p) {
            return p;
        }
    }
}

fn worse(a: Option<ConeWitness>, b: Option<ConeWitness>) -> Option<ConeWitness> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.margin < x.margin { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Samples points in each `U_i` and cone-boundary unit vectors there, and
/// checks that the branch Jacobian maps each vector into the closed cone.
pub fn cone_check(m: &MapFamily, eps: f64, sampling: ConeSampling, seed: u64) -> Result<ConeReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("cone aperture {eps} must be positive")));
    }
    if sampling.points == 0 || sampling.directions == 0 {
        return Err(Error::InvalidInput("cone check needs at least one point and direction".into()));
    }
    let cone = ConeSpec::new(eps);
    let p = m.params;
    let split = p.a2 / (2.0 * p.a1);
    let mut branches = Vec::with_capacity(3);
    for branch in 0..3u8 {
        let br = [Branch::Phi0, Branch::Phi1, Branch::Phi2][branch as usize];
        let per_point: Vec<Result<BranchConeStats>> = (0..sampling.points)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(branch as u64 * (1 << 40) + k as u64);
                let pt = sample_in_u(m, branch, &mut rng);
                let j = m.jacobian(br, pt)?;
                let mut st = BranchConeStats {
                    branch,
                    tested: 0,
                    violations: 0,
                    worst: None,
                    unstable_dominant: 0,
                    center_stable_dominant: 0,
                };
                for _ in 0..sampling.directions {
                    let v = cone.boundary_vector(rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_bool(0.5));
                    let img = j.apply(&v);
                    let margin = cone.margin(&img);
                    let case = if branch < 2 {
                        ConeCase::Affine
                    } else if v.x.abs() >= split * v.z.abs() {
                        st.unstable_dominant += 1;
                        ConeCase::UnstableDominant
                    } else {
                        st.center_stable_dominant += 1;
                        ConeCase::CenterStableDominant
                    };
                    st.tested += 1;
                    if margin < 0.0 {
                        st.violations += 1;
                    }
                    st.worst = worse(st.worst, Some(ConeWitness { branch, point: pt, vector: v, image: img, margin, case }));
                }
                Ok(st)
            })
            .collect();
        let mut agg = BranchConeStats {
            branch,
            tested: 0,
            violations: 0,
            worst: None,
            unstable_dominant: 0,
            center_stable_dominant: 0,
        };
        for st in per_point {
            let st = st?;
            agg.tested += st.tested;
            agg.violations += st.violations;
            agg.unstable_dominant += st.unstable_dominant;
            agg.center_stable_dominant += st.center_stable_dominant;
            agg.worst = worse(agg.worst, st.worst);
        }
        branches.push(agg);
    }
    let worst = branches.iter().fold(None, |acc, b| worse(acc, b.worst));
    let worst_margin = worst.map(|w| w.margin).unwrap_or(f64::INFINITY);
    Ok(ConeReport {
        eps,
        tested: branches.iter().map(|b| b.tested).sum(),
        violations: branches.iter().map(|b| b.violations).sum(),
        worst_margin,
        strictly_inside: worst_margin > 0.0,
        worst,
        branches,
    })
}
