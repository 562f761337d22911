use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ledger::{write_ledger_csv, GrowthLedger, LedgerRow, StepContext};
use super::{block_counts, bound_profile, log_cap, BlockCounts, BoundReport, GrowthFactors};
use crate::dynamics::{MapFamily, SLAB_TOL};
use crate::error::{Error, Result};
use crate::geometry::{Box3, Grid, PlanarRegion, Point3};
use crate::schedule::{check_d2, d2_samples, D2Report, D2Verdict, IntervalSchedule};
use crate::symbolic::{classify_one_filling, Code, Verdict, ONE_FILLING_TOL};

/// Horizontal section of `g^alpha2(D)` with the largest raster area.
#[derive(Debug, Clone)]
pub struct FubiniSlice {
    pub y0: f64,
    pub region: PlanarRegion,
    /// `(y, area)` for every level tried.
    pub levels: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Branch(u8),
    /// Fold and return: two iterates through the outside of the cube.
    Fold,
}

/// Branch sequence followed by the center of `d` up to time `alpha2`.
fn itinerary(m: &MapFamily, d: &Box3, alpha2: u64) -> Result<Vec<Op>> {
    let r = m.regions();
    let mut ops = Vec::new();
    let mut q = d.center();
    let mut t = 0;
    while t < alpha2 {
        if let Some(v) = r.coding_slab(&q, SLAB_TOL) {
            ops.push(Op::Branch(v));
            q = m.branch(v, q);
            t += 1;
        } else if r.in_x2(&q) && t + 2 <= alpha2 {
            ops.push(Op::Fold);
            q = m.branch(2, q);
            t += 2;
        } else {
            return Err(Error::InvalidInput(format!("D leaves the coding regions at time {t}")));
        }
    }
    if r.coding_slab(&q, SLAB_TOL).is_none() {
        return Err(Error::InvalidInput(format!("g^{alpha2}(D) is not in X0 or X1")));
    }
    Ok(ops)
}

fn forward(m: &MapFamily, ops: &[Op], mut q: Point3) -> Point3 {
    for op in ops {
        q = match op {
            Op::Branch(v) => m.branch(*v, q),
            Op::Fold => m.branch(2, q),
        };
    }
    q
}

/// Pulls `q` back along `ops`; `Some` when every preimage lies in the
/// region its branch is defined on and the start lies in `d`.
fn pull_back(m: &MapFamily, ops: &[Op], d: &Box3, mut q: Point3) -> bool {
    let r = m.regions();
    for op in ops.iter().rev() {
        let (b, ok): (u8, fn(&crate::geometry::Regions, &Point3, u8) -> bool) = match op {
            Op::Branch(v) => (*v, |r, p, v| r.coding_slab(p, SLAB_TOL) == Some(v)),
            Op::Fold => (2, |r, p, _| r.in_x2(p)),
        };
        q = match m.branch_inverse(b, q) {
            Ok(p) => p,
            Err(_) => return false,
        };
        if !ok(r, &q, b) {
            return false;
        }
    }
    d.contains(&q)
}

/// Horizontal sections of `g^alpha2(D)` at `2^y_refine + 1` equally spaced
/// heights across its y-range, rasterized on one `resolution^2` grid fitted
/// to its xz-extent; the largest is returned.
pub fn fubini_slice(m: &MapFamily, d: &Box3, alpha2: u64, resolution: usize, y_refine: u32) -> Result<FubiniSlice> {
    if !(d.lo.is_finite() && d.hi.is_finite()) {
        return Err(Error::InvalidInput("non-finite box".into()));
    }
    let w = d.widths();
    if w[0] <= 0.0 || w[2] <= 0.0 || w[1] < 0.0 {
        return Err(Error::Degenerate("D has zero xz-extent".into()));
    }
    if resolution < 8 {
        return Err(Error::InvalidInput(format!("resolution {resolution} too small")));
    }
    let ops = itinerary(m, d, alpha2)?;
    let imgs: Vec<Point3> = d2_samples(d, 3).into_iter().map(|q| forward(m, &ops, q)).collect();
    let lo = imgs.iter().fold([f64::INFINITY; 3], |a, q| [a[0].min(q.x), a[1].min(q.y), a[2].min(q.z)]);
    let hi = imgs.iter().fold([f64::NEG_INFINITY; 3], |a, q| [a[0].max(q.x), a[1].max(q.y), a[2].max(q.z)]);
    let p = &m.params;
    let n = resolution as f64;
    let pad = |a: usize| (hi[a] - lo[a]) * 2.0 / n;
    let grid = Grid::new(
        (lo[0] - pad(0)).max(p.cube_lo()),
        (hi[0] + pad(0)).min(p.cube_hi()),
        (lo[2] - pad(2)).max(p.cube_lo()),
        (hi[2] + pad(2)).min(p.cube_hi()),
        resolution,
        resolution,
    )?;
    let k = 1u64 << y_refine;
    let mut levels = Vec::with_capacity(k as usize + 1);
    let mut best: Option<(f64, PlanarRegion)> = None;
    for i in 0..=k {
        let y = lo[1] + (hi[1] - lo[1]) * i as f64 / k as f64;
        let reg = PlanarRegion::from_predicate(grid, |x, z| pull_back(m, &ops, d, Point3::new(x, y, z)));
        levels.push((y, reg.area()));
        if best.as_ref().is_none_or(|b| reg.area() > b.1.area()) {
            best = Some((y, reg));
        }
    }
    match best {
        Some((y0, region)) if region.area() > 0.0 => Ok(FubiniSlice { y0, region, levels }),
        _ => Err(Error::Degenerate("every horizontal section is empty".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of blocks `K`; the run targets `alpha_{K+1}`.
    pub blocks: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_y_refine")]
    pub y_refine: u32,
    /// Factor margin; `None` uses 0 for the model map and `eps^2` otherwise.
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default = "default_d2_refine")]
    pub d2_refine: u32,
}

fn default_resolution() -> usize {
    256
}

fn default_y_refine() -> u32 {
    3
}

fn default_d2_refine() -> u32 {
    2
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            blocks: 6,
            resolution: default_resolution(),
            y_refine: default_y_refine(),
            margin: None,
            d2_refine: default_d2_refine(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentVerdict {
    /// The bound crossed the cap while the containment check passed.
    DescribabilityInfeasible,
    /// Schedule density at most 1/2: no divergence is implied.
    D1Fails,
    /// `(1/2) sum beta < sum tau`: no contradiction claimed.
    GateFailed,
    /// The bound crossed the cap but `D` does not follow the schedule.
    D2Fails,
    /// No cap crossing within the horizon.
    NoCrossing,
}

/// Measured area against the bound at `alpha_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub k: usize,
    pub j: u64,
    pub measured: Option<f64>,
    pub error_bound: f64,
    pub log_bound: f64,
    /// Every free step up to `j` kept its whole image.
    pub hypotheses_ok: bool,
    pub dominates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub blocks: Vec<BlockCounts>,
    pub bound: BoundReport,
    pub gate: bool,
    pub d1_density: f64,
    pub one_filling_estimate: f64,
    pub one_filling_ok: bool,
    pub y0: f64,
    pub area0: f64,
    pub rows: Vec<LedgerRow>,
    pub tracking: Vec<TrackPoint>,
    /// Measured areas dominate the bound wherever the hypotheses held.
    pub tracks_bound: bool,
    /// Measured areas dominate the bound at every recorded checkpoint
    /// before the cap crossing, whether or not the hypotheses held.
    pub tracks_before_crossing: bool,
    /// No measured area above the face area plus raster error.
    pub cap_consistent: bool,
    pub crossing_j: Option<u64>,
    pub termination: String,
    pub d2: D2Report,
    pub verdict: ExperimentVerdict,
}

impl ExperimentReport {
    pub fn k_star(&self) -> Option<usize> {
        self.bound.k_star
    }

    /// `(j, bound)` pairs attached to the block starts.
    pub fn bound_marks(&self) -> Vec<(u64, f64)> {
        self.tracking.iter().map(|t| (t.j, t.log_bound)).collect()
    }

    pub fn write_ledger_csv<W: Write>(&self, w: W) -> Result<()> {
        write_ledger_csv(&self.rows, &self.bound_marks(), self.bound.cap, w)
    }
}

/// Runs the section ledger along `s` from `alpha_2` to `alpha_{K+1}` (or to
/// the block where the bound first exceeds the cap) and compares measured
/// areas with the bound.
pub fn run_contradiction_experiment(
    m: &MapFamily,
    d: &Box3,
    c: &Code,
    s: &IntervalSchedule,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let kk = cfg.blocks;
    if kk < 2 {
        return Err(Error::InvalidInput("at least two blocks are needed".into()));
    }
    if !s.is_normalized() {
        return Err(Error::InvalidInput("schedule must be normalized".into()));
    }
    let ints: Vec<(u64, u64)> = s.intervals().take(kk + 1).collect();
    if ints.len() < kk + 1 {
        return Err(Error::InvalidInput(format!("schedule has {} intervals, need {}", ints.len(), kk + 1)));
    }
    let p = &m.params;
    let end = ints[kk].0;
    let d1_density = s.d1_density(end);
    let of = classify_one_filling(c, end.max(4), ONE_FILLING_TOL)?;
    let mut blocks = block_counts(s, c, kk)?;
    let alpha2 = ints[1].0;
    let slice = fubini_slice(m, d, alpha2, cfg.resolution, cfg.y_refine)?;
    let area0 = slice.region.area();
    let factors = match cfg.margin {
        Some(mg) => GrowthFactors::new(p, mg)?,
        None => GrowthFactors::for_family(m, p.eps)?,
    };
    let bound = bound_profile(&blocks, &factors, area0.ln(), log_cap(p));
    let gate = bound.last().is_some_and(|b| b.gate);
    let k_stop = bound.k_star.unwrap_or(kk);
    let stop_j = ints[k_stop].0;

    let mut ledger = GrowthLedger::new(p, alpha2, slice.region, cfg.resolution)?;
    let ctx = |t: u64| -> Result<StepContext> {
        if s.covers(t) {
            Ok(StepContext::Coded(c.symbol(t as i64)?))
        } else {
            Ok(StepContext::Gap { allow_fold: !s.covers(t + 1) })
        }
    };
    let mut termination = String::from("horizon reached");
    while ledger.j() < stop_j {
        match ledger.advance(ctx) {
            Ok(()) => {}
            Err(Error::ResolutionExhausted { step, .. }) => {
                termination = format!("resolution exhausted at j = {step}");
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if bound.k_star.is_some() && ledger.j() >= stop_j {
        termination = format!("cap crossed at k = {k_stop}");
    }
    for b in blocks.iter_mut() {
        b.gamma3 = ledger.double_steps_in(b.alpha + b.beta, ints[b.k].0);
    }

    let rows = ledger.rows.clone();
    let mut tracking = Vec::new();
    for k in 1..=k_stop {
        let j = ints[k].0;
        let row = rows.iter().find(|r| r.j == j);
        let hypotheses_ok = rows.iter().filter(|r| r.j <= j && r.rule != super::Rule::SelectThird).all(|r| r.contained);
        let log_bound = bound.at(k).map(|b| b.bound).unwrap_or(f64::NAN);
        let (measured, error_bound) = match row {
            Some(r) => (Some(r.area), r.error_bound),
            None => (None, 0.0),
        };
        let dominates = measured.is_some_and(|a| a + error_bound >= log_bound.exp());
        tracking.push(TrackPoint { k, j, measured, error_bound, log_bound, hypotheses_ok, dominates });
    }
    let tracks_bound = tracking.iter().filter(|t| t.hypotheses_ok && t.measured.is_some()).all(|t| t.dominates);
    let before = |t: &&TrackPoint| bound.k_star.is_none_or(|ks| t.k < ks) && t.measured.is_some();
    let tracks_before_crossing = tracking.iter().filter(before).all(|t| t.dominates);
    let face = (1.0 + 2.0 * p.eps0).powi(2);
    let cap_consistent = rows.iter().all(|r| r.area <= face + r.error_bound);
    let crossing_j = bound.k_star.map(|k| ints[k].0);
    let d2 = check_d2(m, d, c, s, stop_j, cfg.d2_refine)?;
    let verdict = if d1_density <= 0.5 {
        ExperimentVerdict::D1Fails
    } else if !gate {
        ExperimentVerdict::GateFailed
    } else if bound.k_star.is_none() {
        ExperimentVerdict::NoCrossing
    } else if d2.verdict == D2Verdict::Pass {
        ExperimentVerdict::DescribabilityInfeasible
    } else {
        ExperimentVerdict::D2Fails
    };
    Ok(ExperimentReport {
        blocks,
        bound,
        gate,
        d1_density,
        one_filling_estimate: of.estimate,
        one_filling_ok: of.verdict == Verdict::Satisfied,
        y0: slice.y0,
        area0,
        rows,
        tracking,
        tracks_bound,
        tracks_before_crossing,
        cap_consistent,
        crossing_j,
        termination,
        d2,
        verdict,
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    k_star: Option<usize>,
    verdict: ExperimentVerdict,
    cap: f64,
    log_a0: f64,
    y0: f64,
    gate: bool,
    half_beta: f64,
    tau_sum: u64,
    final_bound: f64,
    d1_density: f64,
    d2_verdict: D2Verdict,
    tracks_bound: bool,
    tracks_before_crossing: bool,
    cap_consistent: bool,
    crossing_j: Option<u64>,
    termination: &'a str,
}

/// Compact JSON summary of a report.
pub fn write_summary_json<W: Write>(r: &ExperimentReport, w: W) -> Result<()> {
    let last = r.bound.last();
    let s = Summary {
        k_star: r.bound.k_star,
        verdict: r.verdict,
        cap: r.bound.cap,
        log_a0: r.bound.log_a0,
        y0: r.y0,
        gate: r.gate,
        half_beta: last.map(|b| b.half_beta).unwrap_or(0.0),
        tau_sum: last.map(|b| b.tau_sum).unwrap_or(0),
        final_bound: last.map(|b| b.bound).unwrap_or(f64::NAN),
        d1_density: r.d1_density,
        d2_verdict: r.d2.verdict,
        tracks_bound: r.tracks_bound,
        tracks_before_crossing: r.tracks_before_crossing,
        cap_consistent: r.cap_consistent,
        crossing_j: r.crossing_j,
        termination: &r.termination,
    };
    serde_json::to_writer_pretty(w, &s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::Generator;
    use crate::ParamSet;

    fn fam() -> MapFamily {
        MapFamily::unperturbed(&ParamSet::reference())
    }

    /// `I_1 = [0, 1]`, gaps of 3, `beta_k = k^2` afterwards.
    pub(crate) fn square_schedule(k_max: usize) -> IntervalSchedule {
        let mut e = vec![(0u64, 1u64)];
        let mut alpha = 4;
        for k in 2..=k_max {
            let b = (k * k) as u64;
            e.push((alpha, b));
            alpha += b + 3;
        }
        IntervalSchedule::new(e, None).unwrap()
    }

    /// Box around the fixed point `(3/4, ., 1)` thin enough in x to stay in
    /// `X1` for `depth` steps.
    fn ones_box(depth: i32) -> Box3 {
        let h = 0.5 * 3f64.powi(-depth);
        Box3::new(Point3::new(0.75 - h, 0.2, 0.1), Point3::new(0.75 + h, 0.8, 0.9))
    }

    #[test]
    fn slice_of_affine_box_has_exact_area() {
        let m = fam();
        let d = ones_box(8);
        let sl = fubini_slice(&m, &d, 2, 128, 3).unwrap();
        let want = d.widths()[0] * d.widths()[2] * 2.7f64.powi(2);
        assert!((sl.region.area() - want).abs() <= sl.region.error_bound(), "{} vs {want}", sl.region.area());
        assert!(sl.levels.len() == 9);
    }

    #[test]
    fn slice_refinement_never_shrinks() {
        let m = fam();
        let d = Box3::new(Point3::new(0.05, 0.1, 0.1), Point3::new(0.1, 0.9, 0.9));
        let mut prev = 0.0;
        for r in 0..4 {
            let a = fubini_slice(&m, &d, 1, 64, r).unwrap().region.area();
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn degenerate_boxes_fail() {
        let m = fam();
        let flat = Box3::new(Point3::new(0.1, 0.1, 0.5), Point3::new(0.2, 0.9, 0.5));
        assert!(matches!(fubini_slice(&m, &flat, 1, 64, 2), Err(Error::Degenerate(_))));
        let gap = Box3::new(Point3::new(0.4, 0.1, 0.0), Point3::new(0.45, 0.9, 0.01));
        assert!(fubini_slice(&m, &gap, 1, 64, 2).is_err());
    }

    #[test]
    fn all_ones_run_crosses_the_cap_at_six() {
        let m = fam();
        let s = square_schedule(7);
        let ones = Code::from_generator(Generator::Ones);
        let cfg = ExperimentConfig { blocks: 6, resolution: 128, ..Default::default() };
        let r = run_contradiction_experiment(&m, &ones_box(10), &ones, &s, &cfg).unwrap();
        assert!(r.bound.log_a0 > -10.0);
        assert_eq!(r.k_star(), Some(6));
        assert!(r.gate);
        assert!(r.tracks_bound, "{:?}", r.tracking);
        assert!(r.cap_consistent);
        assert!(r.tracking[0].hypotheses_ok && r.tracking[0].dominates);
        // no area fits under a bound above the cap
        let at6 = r.tracking.iter().find(|t| t.k == 6).unwrap();
        assert!(!at6.dominates && !at6.hypotheses_ok);
        // once containment breaks the free steps keep only the coded third
        assert!(!r.tracks_before_crossing);
        // a box of finite depth cannot follow the ones code forever
        assert_eq!(r.verdict, ExperimentVerdict::D2Fails);
        let mut buf = Vec::new();
        write_summary_json(&r, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["k_star"], 6);
    }

    #[test]
    fn sparse_schedule_reports_d1_failure() {
        let m = fam();
        let s = IntervalSchedule::new(vec![(0, 1), (10, 1), (20, 1), (30, 1)], None).unwrap();
        let ones = Code::from_generator(Generator::Ones);
        let cfg = ExperimentConfig { blocks: 3, resolution: 64, ..Default::default() };
        let r = run_contradiction_experiment(&m, &ones_box(12), &ones, &s, &cfg).unwrap();
        assert_eq!(r.verdict, ExperimentVerdict::D1Fails);
    }

    #[test]
    fn zero_itinerary_fails_the_gate() {
        let m = fam();
        let s = square_schedule(5);
        let zeros = Code::from_generator(Generator::Zeros);
        let d = Box3::new(Point3::new(0.0, 0.2, 0.1), Point3::new(3f64.powi(-10), 0.8, 0.9));
        let cfg = ExperimentConfig { blocks: 4, resolution: 64, ..Default::default() };
        let r = run_contradiction_experiment(&m, &d, &zeros, &s, &cfg).unwrap();
        assert!(!r.gate);
        assert_eq!(r.verdict, ExperimentVerdict::GateFailed);
        assert!(!r.one_filling_ok);
    }
}
