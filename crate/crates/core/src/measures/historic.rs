use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{w1, w1_compressed, EmpiricalMeasure};
use crate::dynamics::{orbit, MapFamily};
use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Default oscillation floor for the historic-evidence flag.
pub const HISTORIC_FLOOR: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricReport {
    pub checkpoints: Vec<u64>,
    /// `W1(delta^{n_i}, delta^{n_{i+1}})` for consecutive checkpoints.
    pub pair_w1: Vec<f64>,
    /// Largest consecutive distance.
    pub score: f64,
    /// Smallest consecutive distance.
    pub min_pair: f64,
    pub floor: f64,
    /// Bound on `|reported - exact|` for every pair (0 when solved exactly).
    pub error_bound: f64,
    /// Every consecutive distance exceeds the floor by more than the error.
    pub historic: bool,
}

fn check_points(checkpoints: &[u64]) -> Result<()> {
    if checkpoints.is_empty() || checkpoints[0] == 0 {
        return Err(Error::InvalidInput("checkpoints must be positive and nonempty".into()));
    }
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("checkpoints must be strictly increasing".into()));
    }
    Ok(())
}

/// Oscillation of the empirical measures of a precomputed orbit. With
/// `cell = Some(h)` atoms are snapped to a grid of side `h` first.
pub fn historic_from_points(points: &[Point3], checkpoints: &[u64], floor: f64, cell: Option<f64>) -> Result<HistoricReport> {
    check_points(checkpoints)?;
    let last = *checkpoints.last().unwrap_or(&0) as usize;
    if points.len() < last {
        return Err(Error::InvalidInput(format!("orbit has {} points, checkpoint needs {last}", points.len())));
    }
    let all = EmpiricalMeasure::new(points[..last].to_vec())?;
    let pairs: Vec<(f64, f64)> = checkpoints
        .par_windows(2)
        .map(|w| {
            let (a, b) = (all.prefix(w[0] as usize), all.prefix(w[1] as usize));
            match cell {
                Some(h) => w1_compressed(&a, &b, h).map(|e| (e.value, e.error_bound)),
                None => w1(&a, &b).map(|v| (v, 0.0)),
            }
        })
        .collect::<Result<_>>()?;
    let pair_w1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let error_bound = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let score = pair_w1.iter().cloned().fold(0.0, f64::max);
    let min_pair = pair_w1.iter().cloned().fold(f64::INFINITY, f64::min);
    let historic = !pair_w1.is_empty() && min_pair - error_bound > floor;
    Ok(HistoricReport { checkpoints: checkpoints.to_vec(), pair_w1, score, min_pair: min_pair.min(score), floor, error_bound, historic })
}

/// Oscillation of `delta^n_{pt}` across the checkpoints, orbit by the step
/// rule.
pub fn historic_indicator(m: &MapFamily, pt: Point3, checkpoints: &[u64], floor: f64, cell: Option<f64>) -> Result<HistoricReport> {
    check_points(checkpoints)?;
    let last = *checkpoints.last().unwrap_or(&1);
    let pts: Vec<Point3> = orbit(m, pt, last - 1)?.iter().map(|s| s.point()).collect();
    historic_from_points(&pts, checkpoints, floor, cell)
}

/// Running averages `(1/k) sum_{i<k} max_y dist(g^i y, g^i x_g)` for
/// `k = 1..=n`. The sample maximum is a lower bound for the supremum over
/// the set the samples are drawn from.
pub fn spl_profile(m: &MapFamily, samples: &[Point3], x_g: Point3, n: u64) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let base: Vec<Point3> = orbit(m, x_g, n - 1)?.iter().map(|s| s.point()).collect();
    let per_sample: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|y| Ok(orbit(m, *y, n - 1)?.iter().zip(&base).map(|(s, b)| s.point().dist(b)).collect()))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n as usize);
    let mut acc = 0.0;
    for i in 0..n as usize {
        acc += per_sample.iter().map(|d| d[i]).fold(0.0, f64::max);
        out.push(acc / (i + 1) as f64);
    }
    Ok(out)
}

pub fn spl_average(m: &MapFamily, samples: &[Point3], x_g: Point3, n: u64) -> Result<f64> {
    Ok(*spl_profile(m, samples, x_g, n)?.last().unwrap_or(&0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::empirical;
    use crate::symbolic::{orbit_from_code, Code, Generator};
    use crate::ParamSet;

    fn fam() -> MapFamily {
        MapFamily::unperturbed(&ParamSet::reference())
    }

    #[test]
    fn fixed_point_is_not_historic() {
        let r = historic_indicator(&fam(), Point3::new(0.0, 0.0, 0.0), &[10, 100, 1000], HISTORIC_FLOOR, None).unwrap();
        assert_eq!(r.score, 0.0);
        assert!(!r.historic);
    }

    #[test]
    fn periodic_orbit_oscillation_dies_out() {
        let p = ParamSet::reference();
        let c = Code::from_generator(Generator::Periodic(vec![0, 1]));
        let pts = orbit_from_code(&p, &c, 10_001).unwrap();
        let r = historic_from_points(&pts, &[9, 99, 999, 10_001], HISTORIC_FLOOR, None).unwrap();
        assert!(r.pair_w1.windows(2).all(|w| w[1] < w[0]));
        assert!(r.pair_w1[2] < 0.01);
        assert!(!r.historic);
    }

    #[test]
    fn rejects_bad_checkpoints() {
        let m = fam();
        let o = Point3::new(0.0, 0.0, 0.0);
        assert!(historic_indicator(&m, o, &[10, 10], 0.3, None).is_err());
        assert!(historic_indicator(&m, o, &[0, 10], 0.3, None).is_err());
        assert!(historic_from_points(&[o; 5], &[3, 8], 0.3, None).is_err());
    }

    #[test]
    fn spl_of_base_point_is_zero() {
        let m = fam();
        let x = Point3::new(0.25, 0.3, 0.4);
        assert!(spl_profile(&m, &[x], x, 20).unwrap().iter().all(|&v| v == 0.0));
        assert!(spl_profile(&m, &[], x, 20).is_err());
    }

    /// Samples on the local stable set of the fixed point at the origin
    /// (x within 3^-61 of 0, y and z free) contract toward its orbit.
    fn stable_samples() -> Vec<Point3> {
        let h = 3f64.powi(-61);
        let mut out = Vec::new();
        for i in 0..=4 {
            for j in 0..=4 {
                for k in 0..=1 {
                    out.push(Point3::new(k as f64 * h, i as f64 / 4.0, j as f64 / 4.0));
                }
            }
        }
        out
    }

    #[test]
    fn matching_itineraries_contract() {
        let m = fam();
        let prof = spl_profile(&m, &stable_samples(), Point3::new(0.0, 0.0, 0.0), 50).unwrap();
        assert!(prof.windows(2).all(|w| w[1] < w[0]));
        assert!(prof[49] < 0.1);
    }

    #[test]
    fn divergent_itinerary_stays_away() {
        let m = fam();
        // one sample in X1 leaves the neighborhood of the origin for good
        let mut s = stable_samples();
        s.push(Point3::new(0.9, 0.5, 0.5));
        let prof = spl_profile(&m, &s, Point3::new(0.0, 0.0, 0.0), 50).unwrap();
        assert!(prof.iter().all(|&v| v > 0.5));
    }

    #[test]
    fn average_displacement_bounds_w1() {
        let m = fam();
        let x = Point3::new(0.0, 0.0, 0.0);
        let n = 50;
        let samples = stable_samples();
        let avg = spl_average(&m, &samples, x, n).unwrap();
        let dx = empirical(&m, x, n).unwrap();
        for y in &samples {
            let d = w1(&empirical(&m, *y, n).unwrap(), &dx).unwrap();
            assert!(d <= avg + 1e-12);
        }
    }
}
