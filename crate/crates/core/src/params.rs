//! Scalar constants of the affine model and their inequality systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every scalar constant of the construction.
///
/// `lambda_*` are the contraction/expansion rates, `a1..a4` and `mu` shape the
/// fold, `eps0` is the margin of the cube `[-eps0, 1+eps0]^3` and `eps` the
/// aperture of the uc-cone field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub lambda_ss: f64,
    pub lambda_cs0: f64,
    pub lambda_cs1: f64,
    pub lambda_u: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub mu: f64,
    pub eps0: f64,
    pub eps: f64,
}

impl ParamSet {
    /// The reference witness used throughout the test-suite.
    pub fn reference() -> Self {
        ParamSet {
            lambda_ss: 0.25,
            lambda_cs0: 0.6,
            lambda_cs1: 0.9,
            lambda_u: 3.0,
            a1: 20.0,
            a2: 0.1,
            a3: 0.002,
            a4: -1.0,
            mu: 0.02,
            eps0: 0.01,
            eps: 0.05,
        }
    }

    pub fn fields(&self) -> [(&'static str, f64); 11] {
        [
            ("lambda_ss", self.lambda_ss),
            ("lambda_cs0", self.lambda_cs0),
            ("lambda_cs1", self.lambda_cs1),
            ("lambda_u", self.lambda_u),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("a4", self.a4),
            ("mu", self.mu),
            ("eps0", self.eps0),
            ("eps", self.eps),
        ]
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, v) in self.fields() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("field {name} is not finite ({v})")));
            }
        }
        Ok(())
    }

    /// Curvature `a1/a2` of the parabolic cylinder bounding the fold region.
    pub fn parabola_coeff(&self) -> f64 {
        self.a1 / self.a2
    }

    /// Inverse expansion rate `1/lambda_u`: the width of the coding slabs.
    pub fn slab_width(&self) -> f64 {
        1.0 / self.lambda_u
    }

    pub fn cube_lo(&self) -> f64 {
        -self.eps0
    }

    pub fn cube_hi(&self) -> f64 {
        1.0 + self.eps0
    }

    /// Largest rate among the contracting and inverse-expanding directions of
    /// the horseshoe; controls the decay of decoded box diameters.
    pub fn coding_rate(&self) -> f64 {
        self.lambda_ss.max(1.0 / self.lambda_u).max(self.lambda_cs1)
    }
}

/// Comparison the constraint requires between its two operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Label of the inequality system ("4.1", "4.3a", ..., "6.2").
    pub constraint: String,
    /// Human readable clause within that system.
    pub clause: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
}

impl Violation {
    /// Re-evaluates the recorded comparison; always `false` for a genuine
    /// violation.
    pub fn reevaluate(&self) -> bool {
        self.relation.holds(self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn violates(&self, label: &str) -> bool {
        self.violations.iter().any(|v| v.constraint == label)
    }

    pub fn violates_clause(&self, clause: &str) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn new() -> Self {
        Checker { violations: Vec::new() }
    }

    fn require(&mut self, label: &str, clause: &str, lhs: f64, relation: Relation, rhs: f64) {
        if !relation.holds(lhs, rhs) {
            self.violations.push(Violation {
                constraint: label.to_string(),
                clause: clause.to_string(),
                lhs,
                relation,
                rhs,
            });
        }
    }

    fn finish(self) -> ValidationReport {
        ValidationReport { ok: self.violations.is_empty(), violations: self.violations }
    }
}

use Relation::{Le, Lt};

fn check_rates(c: &mut Checker, p: &ParamSet) {
    c.require("4.1", "0 < lambda_ss", 0.0, Lt, p.lambda_ss);
    c.require("4.1", "lambda_ss < 1/2", p.lambda_ss, Lt, 0.5);
    c.require("4.1", "lambda_ss < lambda_cs0", p.lambda_ss, Lt, p.lambda_cs0);
    c.require("4.1", "lambda_cs0 <= lambda_cs1", p.lambda_cs0, Le, p.lambda_cs1);
    c.require("4.1", "lambda_cs1 < 1", p.lambda_cs1, Lt, 1.0);
    c.require("4.1", "1 < lambda_cs0 + lambda_cs1", 1.0, Lt, p.lambda_cs0 + p.lambda_cs1);
    c.require("4.1", "2 < lambda_u", 2.0, Lt, p.lambda_u);
    c.require("4.1", "1 < lambda_cs1 * lambda_u", 1.0, Lt, p.lambda_cs1 * p.lambda_u);
}

/// Evaluates the eigenvalue system and the fold-coefficient system (4.3a-e).
/// All comparisons are strict except `lambda_cs0 <= lambda_cs1`; no slack.
pub fn validate_blender_params(p: &ParamSet) -> Result<ValidationReport> {
    p.check_finite()?;
    let mut c = Checker::new();
    check_rates(&mut c, p);

    let e0 = p.eps0;
    let half_e0 = 0.5 + e0;
    let gap = 0.5 - p.lambda_ss * (1.0 + e0);
    let root = (4.0 * p.a1 * p.a1 + p.a2 * p.a2).sqrt();
    let shift = 1.0 + e0 + p.mu;

    c.require("4.3a", "0 < a1", 0.0, Lt, p.a1);
    c.require("4.3a", "0 < a2", 0.0, Lt, p.a2);
    c.require("4.3a", "a3 * a4 < 0", p.a3 * p.a4, Lt, 0.0);

    c.require("4.3b", "0 < eps0", 0.0, Lt, e0);
    c.require("4.3b", "0 < 1/2 - lambda_ss (1 + eps0)", 0.0, Lt, gap);
    c.require("4.3b", "|a3| (1/2 + eps0) < 1/2 - lambda_ss (1 + eps0)", p.a3.abs() * half_e0, Lt, gap);

    c.require("4.3c", "|a3| < a2 |a4| / sqrt(4 a1^2 + a2^2)", p.a3.abs(), Lt, p.a2 * p.a4.abs() / root);
    c.require(
        "4.3c",
        "|a3| < a1 a2 (1 - 2 eps0) / sqrt(4 a1^2 + a2^2)",
        p.a3.abs(),
        Lt,
        p.a1 * p.a2 * (1.0 - 2.0 * e0) / root,
    );

    let inv_u = 1.0 / p.lambda_u;
    c.require(
        "4.3d",
        "a2/a1 (1 + eps0 + mu)^2 < (1/2 - 1/lambda_u)^2",
        p.a2 / p.a1 * shift * shift,
        Lt,
        (0.5 - inv_u) * (0.5 - inv_u),
    );
    c.require(
        "4.3d",
        "a2/a1 a4^2 (1 + eps0 + mu) < (1/2 + eps0)^2",
        p.a2 / p.a1 * p.a4 * p.a4 * shift,
        Lt,
        half_e0 * half_e0,
    );

    c.require("4.3e", "0 < mu - eps0", 0.0, Lt, p.mu - e0);
    c.require("4.3e", "a2 (1 + eps0 + mu) < 1/lambda_u", p.a2 * shift, Lt, inv_u);

    Ok(c.finish())
}

/// Rate regime under which strong pluripotency on the majority subset is
/// known; only the four rates are inspected.
pub fn validate_kns_params(p: &ParamSet) -> Result<ValidationReport> {
    for (name, v) in [
        ("lambda_ss", p.lambda_ss),
        ("lambda_cs0", p.lambda_cs0),
        ("lambda_cs1", p.lambda_cs1),
        ("lambda_u", p.lambda_u),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("field {name} is not finite ({v})")));
        }
    }
    let mut c = Checker::new();
    c.require("6.2", "0 < lambda_ss", 0.0, Lt, p.lambda_ss);
    c.require("6.2", "lambda_ss < lambda_cs0", p.lambda_ss, Lt, p.lambda_cs0);
    c.require("6.2", "lambda_cs0 < 1/2", p.lambda_cs0, Lt, 0.5);
    c.require("6.2", "1/2 < lambda_cs1", 0.5, Lt, p.lambda_cs1);
    c.require("6.2", "lambda_cs1 < 1", p.lambda_cs1, Lt, 1.0);
    c.require("6.2", "1 < lambda_cs0 + lambda_cs1", 1.0, Lt, p.lambda_cs0 + p.lambda_cs1);
    c.require("6.2", "2 < lambda_u", 2.0, Lt, p.lambda_u);
    c.require(
        "6.2",
        "lambda_cs0 lambda_cs1 lambda_u^2 < 1",
        p.lambda_cs0 * p.lambda_cs1 * p.lambda_u * p.lambda_u,
        Lt,
        1.0,
    );
    Ok(c.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn pinned(v: f64) -> Self {
        Range { lo: v, hi: v }
    }

    fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// Grid of `2^level + 1` points, midpoint first then outward; nested in
    /// `level`.
    fn grid(&self, level: u32) -> Vec<f64> {
        if self.is_degenerate() {
            return vec![self.lo];
        }
        let cells = 1usize << level;
        let mut pts: Vec<f64> = (0..=cells)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / cells as f64)
            .collect();
        let mid = 0.5 * (self.lo + self.hi);
        pts.sort_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()).then(a.total_cmp(b)));
        pts
    }
}

/// Search box for [`search_params`]; one closed range per field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub lambda_ss: Range,
    pub lambda_cs0: Range,
    pub lambda_cs1: Range,
    pub lambda_u: Range,
    pub a1: Range,
    pub a2: Range,
    pub a3: Range,
    pub a4: Range,
    pub mu: Range,
    pub eps0: Range,
    pub eps: Range,
}

impl ParamRanges {
    pub fn pinned(p: &ParamSet) -> Self {
        ParamRanges {
            lambda_ss: Range::pinned(p.lambda_ss),
            lambda_cs0: Range::pinned(p.lambda_cs0),
            lambda_cs1: Range::pinned(p.lambda_cs1),
            lambda_u: Range::pinned(p.lambda_u),
            a1: Range::pinned(p.a1),
            a2: Range::pinned(p.a2),
            a3: Range::pinned(p.a3),
            a4: Range::pinned(p.a4),
            mu: Range::pinned(p.mu),
            eps0: Range::pinned(p.eps0),
            eps: Range::pinned(p.eps),
        }
    }

    fn all(&self) -> [(&'static str, Range); 11] {
        [
            ("lambda_ss", self.lambda_ss),
            ("lambda_cs0", self.lambda_cs0),
            ("lambda_cs1", self.lambda_cs1),
            ("lambda_u", self.lambda_u),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("a4", self.a4),
            ("mu", self.mu),
            ("eps0", self.eps0),
            ("eps", self.eps),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Maximum number of full validations before giving up.
    pub budget: usize,
    /// Deepest grid refinement level (level `l` has `2^l + 1` points per field).
    pub max_level: u32,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { budget: 200_000, max_level: 2 }
    }
}

fn rotate<T: Clone>(v: &[T], seed: u64, salt: u64) -> Vec<T> {
    if v.len() <= 1 {
        return v.to_vec();
    }
    let k = (seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt) % v.len() as u64) as usize;
    let mut out = v.to_vec();
    out.rotate_left(k);
    out
}

/// Candidate values of `a1`: from the low end, doubling up to the high end.
fn growing(r: Range) -> Vec<f64> {
    if r.is_degenerate() || r.lo <= 0.0 {
        return r.grid(2);
    }
    let mut out = Vec::new();
    let mut v = r.lo;
    while v < r.hi {
        out.push(v);
        v *= 2.0;
    }
    out.push(r.hi);
    out
}

/// Candidate values of `a3`: of sign opposite to `a4`, starting at the largest
/// admissible magnitude and halving towards zero.
fn shrinking(r: Range, a4: f64) -> Vec<f64> {
    if r.is_degenerate() {
        return vec![r.lo];
    }
    let sign = if a4 < 0.0 { 1.0 } else { -1.0 };
    // portion of the range on the admissible side of zero
    let (near, far) = if sign > 0.0 {
        (r.lo.max(0.0), r.hi)
    } else {
        ((-r.hi).max(0.0), -r.lo)
    };
    if far <= 0.0 || far < near {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut m = far;
    let floor = near.max(far * 1e-12);
    while m >= floor && out.len() < 64 {
        out.push(sign * m);
        m *= 0.5;
    }
    if near > 0.0 && out.last().map(|v: &f64| v.abs() != near).unwrap_or(true) {
        out.push(sign * near);
    }
    out
}

/// Deterministic grid-plus-refinement search for a set that passes
/// [`validate_blender_params`]. Within each grid cell `a1` is grown first and
/// `|a3|` shrunk second. The seed only rotates the visiting order of the grids.
pub fn search_params(ranges: &ParamRanges, seed: u64, opts: SearchOptions) -> Result<ParamSet> {
    for (name, r) in ranges.all() {
        if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo > r.hi {
            return Err(Error::InvalidInput(format!("range for {name} is malformed: [{}, {}]", r.lo, r.hi)));
        }
    }
    let mut evaluations = 0usize;
    for level in 1..=opts.max_level.max(1) {
        let g = |r: Range, salt: u64| rotate(&r.grid(level), seed, salt);
        let eps = ranges.eps.grid(0)[0];
        for &lambda_u in &g(ranges.lambda_u, 1) {
            for &lambda_ss in &g(ranges.lambda_ss, 2) {
                for &lambda_cs0 in &g(ranges.lambda_cs0, 3) {
                    for &lambda_cs1 in &g(ranges.lambda_cs1, 4) {
                        let mut rates = ParamSet { lambda_ss, lambda_cs0, lambda_cs1, lambda_u, ..ParamSet::reference() };
                        rates.eps = eps;
                        let mut c = Checker::new();
                        check_rates(&mut c, &rates);
                        evaluations += 1;
                        if !c.violations.is_empty() {
                            continue;
                        }
                        for &eps0 in &g(ranges.eps0, 5) {
                            if !(0.5 - lambda_ss * (1.0 + eps0) > 0.0 && eps0 > 0.0) {
                                continue;
                            }
                            for &mu in &g(ranges.mu, 6) {
                                if mu - eps0 <= 0.0 {
                                    continue;
                                }
                                for &a2 in &g(ranges.a2, 7) {
                                    for &a4 in &g(ranges.a4, 8) {
                                        for &a1 in &growing(ranges.a1) {
                                            for &a3 in &shrinking(ranges.a3, a4) {
                                                let cand = ParamSet { a1, a2, a3, a4, mu, eps0, ..rates };
                                                evaluations += 1;
                                                if validate_blender_params(&cand)?.ok {
                                                    return Ok(cand);
                                                }
                                                if evaluations >= opts.budget {
                                                    return Err(Error::InfeasibleInRanges { evaluations });
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Err(Error::InfeasibleInRanges { evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_set_is_valid() {
        let r = validate_blender_params(&ParamSet::reference()).unwrap();
        assert!(r.ok, "{:?}", r.violations);
    }

    #[test]
    fn min_bound_on_a3_is_a_quarter_percent() {
        let p = ParamSet::reference();
        let root = (4.0 * p.a1 * p.a1 + p.a2 * p.a2).sqrt();
        let b = (p.a2 * p.a4.abs() / root).min(p.a1 * p.a2 * (1.0 - 2.0 * p.eps0) / root);
        assert!((b - 0.0025).abs() < 1e-6);
        assert!(0.002 < b);
    }

    #[test]
    fn a3_too_large_violates_fold_bound() {
        let p = ParamSet { a3: 0.003, ..ParamSet::reference() };
        let r = validate_blender_params(&p).unwrap();
        assert!(!r.ok);
        assert!(r.violates("4.3c"));
        let v = r.violations.iter().find(|v| v.constraint == "4.3c").unwrap();
        assert_eq!(v.lhs, 0.003);
        assert!(v.rhs < 0.003);
    }

    #[test]
    fn lambda_u_two_is_rejected() {
        let p = ParamSet { lambda_u: 2.0, ..ParamSet::reference() };
        let r = validate_blender_params(&p).unwrap();
        assert!(r.violates_clause("2 < lambda_u"));
    }

    #[test]
    fn non_finite_is_input_error() {
        let p = ParamSet { mu: f64::NAN, ..ParamSet::reference() };
        assert!(matches!(validate_blender_params(&p), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn kns_regime_examples() {
        let base = ParamSet { lambda_ss: 0.2, lambda_cs0: 0.45, lambda_cs1: 0.555, lambda_u: 2.0005, ..ParamSet::reference() };
        let r = validate_kns_params(&base).unwrap();
        assert!(r.ok, "{:?}", r.violations);
        let prod: f64 = 0.45 * 0.555 * 2.0005 * 2.0005;
        assert!((prod - 0.99950).abs() < 1e-5);

        let bad = ParamSet { lambda_cs0: 0.3, lambda_cs1: 0.9, lambda_u: 3.0, ..ParamSet::reference() };
        let r = validate_kns_params(&bad).unwrap();
        let v = r.violations.iter().find(|v| v.clause.contains("lambda_u^2")).unwrap();
        assert!((v.lhs - 2.43).abs() < 1e-12);

        let half = ParamSet { lambda_cs1: 0.5, ..base };
        let r = validate_kns_params(&half).unwrap();
        assert!(r.violates_clause("1/2 < lambda_cs1"));
        assert!(r.violations.iter().all(|v| v.constraint == "6.2"));
    }

    #[test]
    fn report_json_uses_constraint_labels() {
        let p = ParamSet { a3: 0.003, ..ParamSet::reference() };
        let r = validate_blender_params(&p).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"constraint\":\"4.3c\""));
        assert!(s.contains("\"relation\":\"<\""));
    }

    #[test]
    fn pinned_ranges_return_the_pinned_set() {
        let p = ParamSet::reference();
        let got = search_params(&ParamRanges::pinned(&p), 7, SearchOptions::default()).unwrap();
        assert_eq!(got, p);
    }

    #[test]
    fn ranges_containing_reference_find_valid_set() {
        let p = ParamSet::reference();
        let ranges = ParamRanges {
            lambda_ss: Range::new(0.1, 0.3),
            lambda_cs0: Range::new(0.5, 0.7),
            lambda_cs1: Range::new(0.8, 0.95),
            lambda_u: Range::new(2.5, 4.0),
            a1: Range::new(1.0, 100.0),
            a2: Range::new(0.05, 0.2),
            a3: Range::new(1e-5, 0.05),
            a4: Range::new(-1.5, -0.5),
            mu: Range::new(0.015, 0.05),
            eps0: Range::new(0.005, 0.01),
            eps: Range::pinned(p.eps),
        };
        for seed in 0..4 {
            let got = search_params(&ranges, seed, SearchOptions::default()).unwrap();
            assert!(validate_blender_params(&got).unwrap().ok);
            let again = search_params(&ranges, seed, SearchOptions::default()).unwrap();
            assert_eq!(got, again);
        }
    }

    #[test]
    fn lambda_u_below_two_is_infeasible() {
        let mut ranges = ParamRanges::pinned(&ParamSet::reference());
        ranges.lambda_u = Range::new(0.5, 1.99);
        assert!(matches!(
            search_params(&ranges, 0, SearchOptions::default()),
            Err(Error::InfeasibleInRanges { .. })
        ));
    }
}
