//! Empirical measures along orbits and the first Wasserstein distance with
//! ground cost `min(|a - b|, 2)`.

mod historic;
pub mod transport;

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{orbit, MapFamily};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::params::ParamSet;
use crate::symbolic::{orbit_from_code, Code};

pub use historic::{historic_from_points, historic_indicator, spl_average, spl_profile, HistoricReport, HISTORIC_FLOOR};

/// Cap on the transport cost; test functions take values in [-1, 1].
pub const COST_CAP: f64 = 2.0;

/// Residual problems up to this many unit atoms per side go to the
/// assignment solver when both measures have the same size.
pub const ASSIGNMENT_MAX: usize = 400;

/// Uniform probability measure on a list of atoms (repetitions allowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<Point3>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<Point3>) -> Result<Self> {
        if let Some(p) = atoms.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite atom {p:?}")));
        }
        Ok(EmpiricalMeasure { atoms })
    }

    pub fn n(&self) -> usize {
        self.atoms.len()
    }

    /// Measure on the first `k` atoms.
    pub fn prefix(&self, k: usize) -> Self {
        EmpiricalMeasure { atoms: self.atoms[..k.min(self.atoms.len())].to_vec() }
    }

    /// Distinct atoms with multiplicities.
    fn grouped(&self) -> Vec<(Point3, u64)> {
        group(self.atoms.iter().map(|p| (key(p), *p)))
    }

    /// Atoms moved to the centers of a cubic grid of side `cell`; every atom
    /// moves by at most `cell * sqrt(3) / 2`.
    fn snapped(&self, cell: f64) -> Vec<(Point3, u64)> {
        let c = |v: f64| ((v / cell).floor() + 0.5) * cell;
        group(self.atoms.iter().map(|p| {
            let q = Point3::new(c(p.x), c(p.y), c(p.z));
            (key(&q), q)
        }))
    }
}

fn key(p: &Point3) -> [u64; 3] {
    // +0.0 and -0.0 are the same atom
    let b = |v: f64| if v == 0.0 { 0 } else { v.to_bits() };
    [b(p.x), b(p.y), b(p.z)]
}

fn group(it: impl Iterator<Item = ([u64; 3], Point3)>) -> Vec<(Point3, u64)> {
    let mut idx: HashMap<[u64; 3], usize> = HashMap::new();
    let mut out: Vec<(Point3, u64)> = Vec::new();
    for (k, p) in it {
        match idx.get(&k) {
            Some(&i) => out[i].1 += 1,
            None => {
                idx.insert(k, out.len());
                out.push((p, 1));
            }
        }
    }
    out
}

/// `(1/n) sum_{i<n} delta_{f^i(pt)}` under the step rule; fold transits and
/// absorbed states contribute their concrete coordinates.
pub fn empirical(m: &MapFamily, pt: Point3, n: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let orb = orbit(m, pt, n - 1)?;
    EmpiricalMeasure::new(orb.iter().map(|s| s.point()).collect())
}

/// Empirical measure of the first `n` points of the horseshoe orbit with
/// code `c` (unperturbed map, pinned by the code).
pub fn empirical_from_code(p: &ParamSet, c: &Code, n: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    EmpiricalMeasure::new(orbit_from_code(p, c, n as usize)?)
}

pub fn ground_cost(a: &Point3, b: &Point3) -> f64 {
    a.dist(b).min(COST_CAP)
}

/// Exact W1 between two weighted atom lists with total masses `m_a`, `m_b`.
/// Only the signed difference of the measures matters, so common mass is
/// cancelled before solving.
fn w1_grouped(a: &[(Point3, u64)], b: &[(Point3, u64)]) -> Result<f64> {
    let m_a: u64 = a.iter().map(|x| x.1).sum();
    let m_b: u64 = b.iter().map(|x| x.1).sum();
    if m_a == 0 || m_b == 0 {
        return Err(Error::EmptyMeasure);
    }
    let g = num_gcd(m_a, m_b);
    let (sa, sb) = (m_b / g, m_a / g);
    let mut net: HashMap<[u64; 3], (Point3, i128)> = HashMap::new();
    for (p, c) in a {
        net.entry(key(p)).or_insert((*p, 0)).1 += (*c as i128) * sa as i128;
    }
    for (p, c) in b {
        net.entry(key(p)).or_insert((*p, 0)).1 -= (*c as i128) * sb as i128;
    }
    let mut entries: Vec<(Point3, i128)> = net.into_values().filter(|e| e.1 != 0).collect();
    // deterministic order regardless of hashing
    entries.sort_by(|x, y| x.0.to_array().partial_cmp(&y.0.to_array()).unwrap_or(std::cmp::Ordering::Equal));
    let sup: Vec<(Point3, u64)> = entries.iter().filter(|e| e.1 > 0).map(|e| (e.0, e.1 as u64)).collect();
    let dem: Vec<(Point3, u64)> = entries.iter().filter(|e| e.1 < 0).map(|e| (e.0, (-e.1) as u64)).collect();
    let total = (m_a / g) as f64 * m_b as f64;
    if sup.is_empty() {
        return Ok(0.0);
    }
    let units: u64 = sup.iter().map(|x| x.1).sum();
    let cost = if m_a == m_b && units as usize <= ASSIGNMENT_MAX {
        let rows: Vec<Point3> = sup.iter().flat_map(|(p, c)| std::iter::repeat_n(*p, *c as usize)).collect();
        let cols: Vec<Point3> = dem.iter().flat_map(|(p, c)| std::iter::repeat_n(*p, *c as usize)).collect();
        let n = rows.len();
        let mat: Vec<f64> = (0..n * n).map(|i| ground_cost(&rows[i / n], &cols[i % n])).collect();
        transport::hungarian(n, &mat)?.0
    } else {
        let s: Vec<u64> = sup.iter().map(|x| x.1).collect();
        let d: Vec<u64> = dem.iter().map(|x| x.1).collect();
        transport::min_cost_transport(&s, &d, |i, j| ground_cost(&sup[i].0, &dem[j].0))?
    };
    Ok(cost / total)
}

fn num_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact first Wasserstein distance. Equal-size measures reduce to an
/// assignment problem, other sizes to a transportation problem with integer
/// masses. Cost grows cubically in the number of distinct atoms.
pub fn w1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.n() == 0 || nu.n() == 0 {
        return Err(Error::EmptyMeasure);
    }
    // solve in a canonical orientation so that w1(a, b) == w1(b, a) bitwise
    if canonical_order(mu, nu) == std::cmp::Ordering::Greater {
        w1_grouped(&nu.grouped(), &mu.grouped())
    } else {
        w1_grouped(&mu.grouped(), &nu.grouped())
    }
}

fn canonical_order(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> std::cmp::Ordering {
    a.n().cmp(&b.n()).then_with(|| {
        let ka = a.atoms.iter().map(key);
        let kb = b.atoms.iter().map(key);
        ka.cmp(kb)
    })
}

/// W1 after snapping atoms to a grid of side `cell`, with a rigorous bound
/// on the difference to the exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1Estimate {
    pub value: f64,
    pub error_bound: f64,
    pub support_mu: usize,
    pub support_nu: usize,
}

pub fn w1_compressed(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, cell: f64) -> Result<W1Estimate> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(Error::InvalidInput(format!("cell must be positive, got {cell}")));
    }
    if mu.n() == 0 || nu.n() == 0 {
        return Err(Error::EmptyMeasure);
    }
    let (a, b) = (mu.snapped(cell), nu.snapped(cell));
    let value = if canonical_order(mu, nu) == std::cmp::Ordering::Greater { w1_grouped(&b, &a)? } else { w1_grouped(&a, &b)? };
    Ok(W1Estimate { value, error_bound: 3f64.sqrt() * cell, support_mu: a.len(), support_nu: b.len() })
}

/// One row of a batch of distance evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1Row {
    pub n: u64,
    pub w1: f64,
    pub runtime_ms: f64,
}

/// CSV with columns `n,w1,runtime_ms`.
pub fn write_w1_csv<W: Write>(rows: &[W1Row], mut w: W) -> Result<()> {
    writeln!(w, "n,w1,runtime_ms")?;
    for r in rows {
        writeln!(w, "{},{:.12},{:.3}", r.n, r.w1, r.runtime_ms)?;
    }
    Ok(())
}
