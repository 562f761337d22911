//! Interval schedules `I_k = [alpha_k, alpha_k + beta_k]` of good blocks, their
//! density, normalization and a sample-based containment checker.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step, MapFamily, OrbitPos, OrbitState};
use crate::error::{Error, Result};
use crate::geometry::{Box3, Point3, RegionTag};
use crate::symbolic::Code;

/// Samples with margin below this are reported as inconclusive.
pub const INCONCLUSIVE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tail {
    pub alpha: u64,
    /// Whether the half-open interval `[alpha, inf)` has been replaced by
    /// `[alpha, alpha + 2]` and `[alpha + 2^(i+1), alpha + 2^(i+2) - 2]`, `i >= 1`.
    #[serde(default)]
    pub split: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IntervalSchedule {
    pub entries: Vec<(u64, u64)>,
    #[serde(default)]
    pub tail: Option<Tail>,
}

/// Lazily generated intervals of the split tail.
fn split_intervals(alpha: u64) -> impl Iterator<Item = (u64, u64)> {
    std::iter::once((alpha, 2)).chain((1u32..62).map(move |i| (alpha + (1u64 << (i + 1)), (1u64 << (i + 1)) - 2)))
}

impl IntervalSchedule {
    pub fn new(entries: Vec<(u64, u64)>, tail: Option<u64>) -> Result<Self> {
        let s = IntervalSchedule { entries, tail: tail.map(|alpha| Tail { alpha, split: false }) };
        s.validate()?;
        Ok(s)
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let s: IntervalSchedule = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Alpha strictly increasing and `0 <= beta_k <= alpha_{k+1} - alpha_k - 1`,
    /// the tail counting as the next alpha.
    pub fn validate(&self) -> Result<()> {
        let mut alphas: Vec<u64> = self.entries.iter().map(|e| e.0).collect();
        if let Some(t) = self.tail {
            alphas.push(t.alpha);
        }
        for k in 0..self.entries.len() {
            let (a, b) = self.entries[k];
            if let Some(&next) = alphas.get(k + 1) {
                if next <= a {
                    return Err(Error::InvalidInput(format!("alpha not strictly increasing at entry {k}")));
                }
                if b > next - a - 1 {
                    return Err(Error::InvalidInput(format!(
                        "beta_{k} = {b} exceeds alpha_(k+1) - alpha_k - 1 = {}",
                        next - a - 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// `alpha_k + beta_k + 2 <= alpha_{k+1}` for all consecutive intervals.
    pub fn is_normalized(&self) -> bool {
        let ints: Vec<(u64, u64)> = self.intervals().take(self.entries.len() + 2).collect();
        let mut ok = ints.windows(2).all(|w| w[0].0 + w[0].1 + 2 <= w[1].0);
        if let (Some(t), Some(&(a, b))) = (self.tail, self.entries.last()) {
            ok &= a + b + 2 <= t.alpha;
        }
        ok && self.tail.is_none_or(|t| t.split)
    }

    /// Merges adjacent intervals and splits a half-open tail.
    pub fn normalize(&self) -> IntervalSchedule {
        let mut out: Vec<(u64, u64)> = Vec::with_capacity(self.entries.len());
        for &(a, b) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 + last.1 + 1 == a => last.1 += b + 1,
                _ => out.push((a, b)),
            }
        }
        let tail = self.tail.map(|t| {
            let mut alpha = t.alpha;
            if let Some(&(a, b)) = out.last() {
                if a + b + 1 == alpha {
                    // the last block runs into the tail
                    alpha = a;
                    out.pop();
                }
            }
            Tail { alpha, split: true }
        });
        IntervalSchedule { entries: out, tail }
    }

    /// All intervals as `(alpha, beta)`; a split tail is expanded lazily and an
    /// unsplit one appears as `(alpha, u64::MAX - alpha)`.
    pub fn intervals(&self) -> Box<dyn Iterator<Item = (u64, u64)> + '_> {
        let head = self.entries.iter().copied();
        match self.tail {
            None => Box::new(head),
            Some(Tail { alpha, split: true }) => Box::new(head.chain(split_intervals(alpha))),
            Some(Tail { alpha, split: false }) => Box::new(head.chain(std::iter::once((alpha, u64::MAX - alpha)))),
        }
    }

    /// Whether `j` lies in some interval.
    pub fn covers(&self, j: u64) -> bool {
        for (a, b) in self.intervals() {
            if a > j {
                return false;
            }
            if j <= a.saturating_add(b) {
                return true;
            }
        }
        false
    }

    /// Fraction of `j < n` covered by the intervals.
    pub fn d1_density(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let mut covered = 0u64;
        for (a, b) in self.intervals() {
            if a >= n {
                break;
            }
            let hi = a.saturating_add(b).min(n - 1);
            covered += hi - a + 1;
        }
        covered as f64 / n as f64
    }

    /// Covered indices `j <= horizon`.
    pub fn covered_up_to(&self, horizon: u64) -> Vec<u64> {
        let mut out = Vec::new();
        for (a, b) in self.intervals() {
            if a > horizon {
                break;
            }
            out.extend(a..=a.saturating_add(b).min(horizon));
        }
        out
    }

    /// `gamma_k = alpha_{k+1} - (alpha_k + beta_k)`; `None` after the last interval.
    pub fn gamma(&self, k: usize) -> Option<u64> {
        let mut it = self.intervals().skip(k);
        let (a, b) = it.next()?;
        let (next, _) = it.next()?;
        Some(next - (a + b))
    }

    /// Number of zero symbols on `I_k`.
    pub fn tau(&self, k: usize, c: &Code) -> Result<u64> {
        let (a, b) = self.intervals().nth(k).ok_or_else(|| Error::InvalidInput(format!("no interval {k}")))?;
        let mut t = 0;
        for j in a..=a + b {
            t += u64::from(c.symbol(j as i64)? == 0);
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum D2Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D2Failure {
    pub j: u64,
    pub start: Point3,
    pub image: Point3,
    pub expected: RegionTag,
    pub margin: f64,
    pub image_tags: BTreeSet<RegionTag>,
    /// Share of samples inside the expected neighborhood at step `j`.
    pub inside_fraction: f64,
    pub diagnosis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D2Report {
    pub verdict: D2Verdict,
    pub samples: usize,
    pub checked_indices: usize,
    pub min_margin: f64,
    pub first_failure: Option<D2Failure>,
}

/// Corner and face-grid samples of `d` with `2^refine + 1` points per edge
/// (refinement only adds points), plus the grid on the middle horizontal slice.
pub fn d2_samples(d: &Box3, refine: u32) -> Vec<Point3> {
    let k = (1usize << refine) + 1;
    let t = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (k - 1) as f64;
    let mut pts = Vec::new();
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                let on_face = i == 0 || i == k - 1 || j == 0 || j == k - 1 || l == 0 || l == k - 1;
                let on_slice = 2 * j == k - 1;
                if on_face || on_slice {
                    pts.push(Point3::new(t(d.lo.x, d.hi.x, i), t(d.lo.y, d.hi.y, j), t(d.lo.z, d.hi.z, l)));
                }
            }
        }
    }
    pts
}

/// Per-sample trace: margins in `U_{v_j}` at each covered `j`, stopping at the
/// first negative one.
fn trace(m: &MapFamily, start: Point3, c: &Code, covered: &[u64], horizon: u64) -> Result<Vec<(u64, Point3, f64)>> {
    let r = m.regions();
    let mut out = Vec::with_capacity(covered.len());
    let mut s = OrbitState::start(m, start)?;
    let mut next = 0usize;
    for j in 0..=horizon {
        if next < covered.len() && covered[next] == j {
            next += 1;
            let v = c.symbol(j as i64)?;
            let (pt, margin) = match s.pos {
                OrbitPos::Active { at } => (at, r.u_margin(v, &at)),
                _ => (s.point(), f64::NEG_INFINITY),
            };
            out.push((j, pt, margin));
            if margin < 0.0 {
                return Ok(out);
            }
        }
        if j == horizon || next == covered.len() {
            break;
        }
        s = match step(m, &s) {
            Ok(t) => t,
            Err(Error::Unmodeled(_)) => {
                // the box left the cube: every later covered index fails
                if next < covered.len() {
                    let jj = covered[next];
                    out.push((jj, s.point(), f64::NEG_INFINITY));
                }
                return Ok(out);
            }
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

/// Checks `g^j(D) ⊂ U_{v_j}` for covered `j <= horizon` on samples of `D`.
pub fn check_d2(m: &MapFamily, d: &Box3, c: &Code, s: &IntervalSchedule, horizon: u64, refine: u32) -> Result<D2Report> {
    if !(d.lo.is_finite() && d.hi.is_finite()) || d.volume() <= 0.0 {
        return Err(Error::Degenerate("D must be a box of positive volume".into()));
    }
    let covered = s.covered_up_to(horizon);
    let pts = d2_samples(d, refine);
    let traces: Vec<Vec<(u64, Point3, f64)>> =
        pts.par_iter().map(|&p| trace(m, p, c, &covered, horizon)).collect::<Result<_>>()?;
    let mut min_margin = f64::INFINITY;
    let mut first: Option<(u64, usize)> = None;
    for (idx, tr) in traces.iter().enumerate() {
        for &(j, _, margin) in tr {
            min_margin = min_margin.min(margin);
            if margin < 0.0 && first.is_none_or(|(fj, _)| j < fj) {
                first = Some((j, idx));
            }
        }
    }
    let first_failure = match first {
        None => None,
        Some((j, idx)) => {
            let v = c.symbol(j as i64)?;
            let expected = if v == 0 { RegionTag::U0 } else { RegionTag::U1 };
            let (_, image, margin) = *traces[idx].iter().find(|t| t.0 == j).expect("failure recorded");
            let at_j: Vec<f64> = traces.iter().filter_map(|tr| tr.iter().find(|t| t.0 == j).map(|t| t.2)).collect();
            let inside = at_j.iter().filter(|&&mg| mg >= 0.0).count();
            let inside_fraction = inside as f64 / pts.len() as f64;
            let image_tags = m.regions().tags(&image);
            let diagnosis = if inside > 0 {
                format!(
                    "boundary: the image at j = {j} straddles the frontier of {expected}; {inside} of {} samples inside, failing sample in {}",
                    pts.len(),
                    tag_list(&image_tags)
                )
            } else {
                format!("whole image at j = {j} misses {expected}; failing sample in {}", tag_list(&image_tags))
            };
            Some(D2Failure { j, start: pts[idx], image, expected, margin, image_tags, inside_fraction, diagnosis })
        }
    };
    let verdict = if first_failure.is_some() {
        D2Verdict::Fail
    } else if min_margin < INCONCLUSIVE_MARGIN {
        D2Verdict::Inconclusive
    } else {
        D2Verdict::Pass
    };
    Ok(D2Report { verdict, samples: pts.len(), checked_indices: covered.len(), min_margin, first_failure })
}

fn tag_list(tags: &BTreeSet<RegionTag>) -> String {
    if tags.is_empty() {
        return "{}".into();
    }
    let v: Vec<&str> = tags.iter().map(|t| t.as_str()).collect();
    format!("{{{}}}", v.join(", "))
}
