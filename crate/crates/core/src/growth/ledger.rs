use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::PlanarBranch;
use crate::error::{Error, Result};
use crate::geometry::{Grid, PlanarMap, PlanarRegion, RegionTag};
use crate::params::ParamSet;

/// Regions covering fewer cells than this end the run.
pub const MIN_CELLS: usize = 10;

const SUPERSAMPLE: usize = 4;
const EDGE_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Start,
    /// Whole image kept (inside a good block).
    Free,
    /// Largest of the three coding components of the image kept.
    SelectThird,
    /// Fold followed by the return map; spans two indices.
    DoubleStep,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::Start => "start",
            Rule::Free => "free",
            Rule::SelectThird => "select-third",
            Rule::DoubleStep => "double-step",
        }
    }
}

/// What the schedule prescribes for the section at index `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepContext {
    /// `t` lies in a good block with symbol `v`.
    Coded(u8),
    /// `t` lies in a gap; a fold component may be selected only if the
    /// double step still ends inside the gap or on the next block start.
    Gap { allow_fold: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub j: u64,
    pub tag: RegionTag,
    pub rule: Rule,
    pub area: f64,
    /// Area ratio to the previous section (two steps back for a double step).
    pub factor: f64,
    pub error_bound: f64,
    pub cells: usize,
    /// Image area discarded by the rule, relative to the image.
    pub discarded: f64,
    /// For free steps: the whole image stayed in the coded region up to
    /// raster error.
    pub contained: bool,
}

/// The sequence of horizontal sections `A_j`, each a raster region of the
/// xz-plane contained in one component of the coding regions.
#[derive(Debug, Clone)]
pub struct GrowthLedger {
    pub params: ParamSet,
    pub rows: Vec<LedgerRow>,
    pub resolution: usize,
    region: PlanarRegion,
}

fn tag_of(tag: RegionTag) -> Option<u8> {
    match tag {
        RegionTag::X0 => Some(0),
        RegionTag::X1 => Some(1),
        RegionTag::X2 => Some(2),
        _ => None,
    }
}

impl GrowthLedger {
    /// Starts at index `j0` with a section lying in `X0`, `X1` or `X2`.
    pub fn new(p: &ParamSet, j0: u64, a0: PlanarRegion, resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::InvalidInput(format!("resolution {resolution} too small")));
        }
        let comps = [RegionTag::X0, RegionTag::X1, RegionTag::X2].map(|t| (t, a0.intersect_tag(p, t)));
        let total = a0.area();
        let (tag, comp) = comps
            .iter()
            .max_by(|a, b| a.1.area().total_cmp(&b.1.area()))
            .map(|(t, c)| (*t, c.clone()))
            .expect("three components");
        if comp.cell_count() < MIN_CELLS {
            return Err(Error::ResolutionExhausted { step: j0, area: comp.area(), floor: MIN_CELLS as f64 * a0.grid.cell_area() });
        }
        let discarded = (total - comp.area()) / total;
        let row = LedgerRow {
            j: j0,
            tag,
            rule: Rule::Start,
            area: comp.area(),
            factor: 1.0,
            error_bound: comp.error_bound(),
            cells: comp.cell_count(),
            discarded,
            contained: total - comp.area() <= a0.error_bound(),
        };
        Ok(GrowthLedger { params: *p, rows: vec![row], resolution, region: comp })
    }

    pub fn j(&self) -> u64 {
        self.rows.last().map(|r| r.j).unwrap_or(0)
    }

    pub fn tag(&self) -> RegionTag {
        self.rows.last().map(|r| r.tag).unwrap_or(RegionTag::OutsideB)
    }

    pub fn region(&self) -> &PlanarRegion {
        &self.region
    }

    pub fn area(&self) -> f64 {
        self.region.area()
    }

    /// Grid fitted to the image of the current region's bounding box,
    /// clipped to the cube face.
    fn image_grid(&self, map: &dyn PlanarMap) -> Option<Grid> {
        let bb = self.region.bounding_box()?;
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for e in 0..=EDGE_SAMPLES {
            let t = e as f64 / EDGE_SAMPLES as f64;
            let x = bb[0] + t * (bb[1] - bb[0]);
            let z = bb[2] + t * (bb[3] - bb[2]);
            for q in [[x, bb[2]], [x, bb[3]], [bb[0], z], [bb[1], z]] {
                let w = map.apply(q);
                for a in 0..2 {
                    lo[a] = lo[a].min(w[a]);
                    hi[a] = hi[a].max(w[a]);
                }
            }
        }
        let n = self.resolution as f64;
        let pad = [(hi[0] - lo[0]) * 2.0 / n, (hi[1] - lo[1]) * 2.0 / n];
        let (c0, c1) = (self.params.cube_lo(), self.params.cube_hi());
        let x0 = (lo[0] - pad[0]).max(c0);
        let x1 = (hi[0] + pad[0]).min(c1);
        let z0 = (lo[1] - pad[1]).max(c0);
        let z1 = (hi[1] + pad[1]).min(c1);
        Grid::new(x0, x1, z0, z1, self.resolution, self.resolution).ok()
    }

    fn push_image(&self, branch: u8) -> Result<Option<PlanarRegion>> {
        let map = PlanarBranch::new(&self.params, branch);
        match self.image_grid(&map) {
            None => Ok(None),
            Some(g) => Ok(Some(self.region.pushforward_onto(&map, g, SUPERSAMPLE)?)),
        }
    }

    /// Keeps one coding component of `image` according to `ctx`.
    fn select(&self, image: &PlanarRegion, ctx: StepContext) -> (RegionTag, PlanarRegion) {
        let p = &self.params;
        match ctx {
            StepContext::Coded(v) => {
                let tag = RegionTag::coding(v);
                (tag, image.intersect_tag(p, tag))
            }
            StepContext::Gap { allow_fold } => {
                // ties go to X1, then X0, then X2
                let mut order = vec![RegionTag::X1, RegionTag::X0];
                if allow_fold {
                    order.push(RegionTag::X2);
                }
                let mut best: Option<(RegionTag, PlanarRegion)> = None;
                for t in order {
                    let c = image.intersect_tag(p, t);
                    if best.as_ref().is_none_or(|b| c.area() > b.1.area()) {
                        best = Some((t, c));
                    }
                }
                best.expect("at least two candidates")
            }
        }
    }

    /// One step of the construction. `ctx(t)` describes index `t`. A
    /// section in `X2` takes the fold double step and adds two rows.
    pub fn advance(&mut self, ctx: impl Fn(u64) -> Result<StepContext>) -> Result<()> {
        let j = self.j();
        let prev_area = self.area();
        let branch = tag_of(self.tag()).ok_or_else(|| {
            Error::InternalInconsistency(format!("section at {j} carries tag {}", self.tag()))
        })?;
        let (t, rule) = if branch == 2 {
            if matches!(ctx(j + 1)?, StepContext::Coded(_)) {
                return Err(Error::InternalInconsistency(format!("fold section at {j} right before a good block")));
            }
            self.rows.push(LedgerRow {
                j: j + 1,
                tag: RegionTag::GX2Transit,
                rule: Rule::DoubleStep,
                area: prev_area,
                factor: 1.0,
                error_bound: self.region.error_bound(),
                cells: self.region.cell_count(),
                discarded: 0.0,
                contained: true,
            });
            (j + 2, Rule::DoubleStep)
        } else {
            let rule = match ctx(j + 1)? {
                StepContext::Coded(_) => Rule::Free,
                StepContext::Gap { .. } => Rule::SelectThird,
            };
            (j + 1, rule)
        };
        let floor_err = |area: f64, cell: f64| Error::ResolutionExhausted { step: t, area, floor: MIN_CELLS as f64 * cell };
        let image = match self.push_image(branch)? {
            Some(im) => im,
            None => return Err(floor_err(0.0, 0.0)),
        };
        let mut c = ctx(t)?;
        if rule == Rule::DoubleStep {
            if let StepContext::Gap { .. } = c {
                // a fold image cannot fold again before the next block
                c = StepContext::Gap { allow_fold: false };
            }
        }
        let (tag, kept) = self.select(&image, c);
        if kept.cell_count() < MIN_CELLS {
            return Err(floor_err(kept.area(), image.grid.cell_area()));
        }
        let total = image.area();
        let row = LedgerRow {
            j: t,
            tag,
            rule,
            area: kept.area(),
            factor: kept.area() / prev_area,
            error_bound: kept.error_bound(),
            cells: kept.cell_count(),
            discarded: if total > 0.0 { (total - kept.area()) / total } else { 0.0 },
            contained: total - kept.area() <= image.error_bound(),
        };
        self.rows.push(row);
        self.region = kept;
        Ok(())
    }

    /// Number of double steps with landing index in `(from, to]`.
    pub fn double_steps_in(&self, from: u64, to: u64) -> u64 {
        self.rows.iter().filter(|r| r.rule == Rule::DoubleStep && r.tag != RegionTag::GX2Transit && r.j > from && r.j <= to).count()
            as u64
    }

    /// CSV with columns `j,tag,rule,area,factor,cum_bound,cap`.
    pub fn write_csv<W: Write>(&self, bounds: &[(u64, f64)], cap: f64, w: W) -> Result<()> {
        write_ledger_csv(&self.rows, bounds, cap, w)
    }
}

/// `cum_bound` is the log-area bound attached to an index, empty where none
/// applies.
pub fn write_ledger_csv<W: Write>(rows: &[LedgerRow], bounds: &[(u64, f64)], cap: f64, mut w: W) -> Result<()> {
    writeln!(w, "j,tag,rule,area,factor,cum_bound,cap")?;
    for r in rows {
        let b = bounds.iter().find(|b| b.0 == r.j).map(|b| format!("{:.9}", b.1)).unwrap_or_default();
        writeln!(w, "{},{},{},{:.12e},{:.9},{},{:.9}", r.j, r.tag, r.rule.as_str(), r.area, r.factor, b, cap)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ParamSet {
        ParamSet::reference()
    }

    fn rect(x: [f64; 2], z: [f64; 2], n: usize) -> PlanarRegion {
        let g = Grid::new(x[0], x[1], z[0], z[1], n, n).unwrap();
        PlanarRegion::from_rect(g, x, z)
    }

    #[test]
    fn free_step_in_x1_multiplies_area() {
        let a0 = rect([0.70, 0.72], [0.1, 0.5], 128);
        let mut l = GrowthLedger::new(&p(), 0, a0, 128).unwrap();
        assert_eq!(l.tag(), RegionTag::X1);
        l.advance(|_| Ok(StepContext::Coded(1))).unwrap();
        let r = &l.rows[1];
        assert_eq!(r.rule, Rule::Free);
        assert_eq!(r.tag, RegionTag::X1);
        assert!((r.factor - 2.7).abs() < 0.027, "factor {}", r.factor);
        assert!(r.contained);
    }

    #[test]
    fn fold_double_step_multiplies_by_a2a4() {
        // thin horizontal strip high in X2
        let a0 = rect([0.45, 0.55], [0.8, 0.9], 256);
        let mut l = GrowthLedger::new(&p(), 10, a0, 256).unwrap();
        assert_eq!(l.tag(), RegionTag::X2);
        l.advance(|_| Ok(StepContext::Gap { allow_fold: true })).unwrap();
        assert_eq!(l.j(), 12);
        assert_eq!(l.rows[1].tag, RegionTag::GX2Transit);
        assert_eq!(l.rows[1].j, 11);
        let r = &l.rows[2];
        assert_eq!(r.rule, Rule::DoubleStep);
        assert_eq!(r.tag, RegionTag::X0);
        assert!((r.factor - 0.1).abs() < 0.002, "factor {}", r.factor);
        assert_eq!(l.double_steps_in(10, 12), 1);
    }

    #[test]
    fn selection_keeps_the_largest_third() {
        // X1 strip whose image covers the whole x-range
        let a0 = rect([2.0 / 3.0, 1.0], [0.0, 1.0], 256);
        let total = a0.area() * 2.7;
        let mut l = GrowthLedger::new(&p(), 0, a0, 256).unwrap();
        l.advance(|_| Ok(StepContext::Gap { allow_fold: true })).unwrap();
        let r = &l.rows[1];
        assert_eq!(r.rule, Rule::SelectThird);
        assert!(r.area >= total / 3.0 - r.error_bound);
        assert!(r.tag == RegionTag::X2 || r.tag == RegionTag::X1 || r.tag == RegionTag::X0);
    }

    #[test]
    fn tiny_components_exhaust_resolution() {
        let a0 = rect([0.70, 0.72], [0.1, 0.5], 16);
        let mut l = GrowthLedger::new(&p(), 0, a0, 16).unwrap();
        // coded symbol 0 asks for the X0 part of an image lying in X1
        let err = l.advance(|_| Ok(StepContext::Coded(0))).unwrap_err();
        assert!(matches!(err, Error::ResolutionExhausted { .. }));
    }

    #[test]
    fn fold_before_good_block_is_rejected() {
        let a0 = rect([0.45, 0.55], [0.8, 0.9], 64);
        let mut l = GrowthLedger::new(&p(), 0, a0, 64).unwrap();
        assert!(l.advance(|_| Ok(StepContext::Coded(0))).is_err());
    }

    #[test]
    fn csv_columns() {
        let a0 = rect([0.70, 0.72], [0.1, 0.5], 32);
        let mut l = GrowthLedger::new(&p(), 0, a0, 32).unwrap();
        l.advance(|_| Ok(StepContext::Coded(1))).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&[(1, -2.5)], 0.0396, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "j,tag,rule,area,factor,cum_bound,cap");
        assert!(lines[1].starts_with("0,X1,start,"));
        assert!(lines[1].contains(",,0.039600000"));
        assert!(lines[2].starts_with("1,X1,free,") && lines[2].contains("-2.500000000"));
    }
}
