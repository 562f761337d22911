//! Area growth of horizontal sections along a coded schedule: growth
//! factors, the logarithmic lower bound with its applicability gate, the
//! raster ledger and the end-to-end divergence experiment.

mod experiment;
mod ledger;

use serde::{Deserialize, Serialize};

use crate::dynamics::MapFamily;
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::schedule::IntervalSchedule;
use crate::symbolic::Code;

pub use experiment::{
    fubini_slice, run_contradiction_experiment, write_summary_json, ExperimentConfig, ExperimentReport, ExperimentVerdict,
    FubiniSlice, TrackPoint,
};
pub use ledger::{write_ledger_csv, GrowthLedger, LedgerRow, Rule, StepContext, MIN_CELLS};

/// Per-step area factors. `rho_hat` is the worst factor allowed on steps
/// outside the free blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFactors {
    pub rho0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho_hat: f64,
    /// Subtracted from every exact factor.
    pub margin: f64,
}

impl GrowthFactors {
    pub fn new(p: &ParamSet, margin: f64) -> Result<Self> {
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(Error::InvalidInput(format!("margin {margin} must be finite and non-negative")));
        }
        let rho0 = p.lambda_cs0 * p.lambda_u - margin;
        let rho1 = p.lambda_cs1 * p.lambda_u - margin;
        let rho2 = (p.a2 * p.a4).abs() - margin;
        if rho1 <= 1.0 {
            return Err(Error::InvalidInput(format!("rho1 = {rho1} must exceed 1")));
        }
        if rho0 <= 0.0 || rho2 <= 0.0 {
            return Err(Error::InvalidInput("margin exceeds a growth factor".into()));
        }
        let rho_hat = (rho0 / 3.0).min(rho1 / 3.0).min(rho2).min(1.0);
        Ok(GrowthFactors { rho0, rho1, rho2, rho_hat, margin })
    }

    /// Exact factors for the unperturbed map, `eps^2` margin otherwise.
    pub fn for_family(m: &MapFamily, eps: f64) -> Result<Self> {
        let margin = if m.perturbations.is_empty() { 0.0 } else { eps * eps };
        GrowthFactors::new(&m.params, margin)
    }
}

/// `log((1 + 2 eps0)^2)`, the log-area of the face `I_eps0^2`.
pub fn log_cap(p: &ParamSet) -> f64 {
    2.0 * (1.0 + 2.0 * p.eps0).ln()
}

/// Schedule data of block `k` (1-based): `I_k = [alpha, alpha + beta]`,
/// `gamma = alpha_{k+1} - alpha - beta`, `tau` zeros of the code on `I_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCounts {
    pub k: usize,
    pub alpha: u64,
    pub beta: u64,
    pub gamma: u64,
    pub tau: u64,
    /// Fold double steps taken in the gap after `I_k` (filled by a ledger run).
    pub gamma3: u64,
}

/// Counts for blocks `1..=k_max`; needs `I_{k_max + 1}`.
pub fn block_counts(s: &IntervalSchedule, c: &Code, k_max: usize) -> Result<Vec<BlockCounts>> {
    let ints: Vec<(u64, u64)> = s.intervals().take(k_max + 1).collect();
    if ints.len() < k_max + 1 {
        return Err(Error::InvalidInput(format!("schedule has {} intervals, need {}", ints.len(), k_max + 1)));
    }
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let (alpha, beta) = ints[k - 1];
        let gamma = ints[k].0 - alpha - beta;
        let mut tau = 0;
        for j in alpha..=alpha + beta {
            tau += u64::from(c.symbol(j as i64)? == 0);
        }
        out.push(BlockCounts { k, alpha, beta, gamma, tau, gamma3: 0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub k: usize,
    /// `(1/2) sum_{i=2}^k beta_i`.
    pub half_beta: f64,
    pub tau_sum: u64,
    pub gamma_sum: u64,
    /// Lower bound for the log-area of the section at `alpha_{k+1}`.
    pub bound: f64,
    /// `half_beta >= tau_sum`.
    pub gate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub points: Vec<BoundPoint>,
    pub log_a0: f64,
    pub cap: f64,
    /// First `k` whose bound exceeds the cap.
    pub k_star: Option<usize>,
    pub factors: GrowthFactors,
}

impl BoundReport {
    pub fn at(&self, k: usize) -> Option<&BoundPoint> {
        self.points.iter().find(|b| b.k == k)
    }

    pub fn last(&self) -> Option<&BoundPoint> {
        self.points.last()
    }
}

/// `(1/2) sum beta_i log rho1 + sum (gamma_i + tau_i) log rho_hat + log A0`,
/// sums over `i = 2..=k`, for every block in `blocks` (gate not enforced).
pub fn bound_profile(blocks: &[BlockCounts], f: &GrowthFactors, log_a0: f64, cap: f64) -> BoundReport {
    let (l1, lh) = (f.rho1.ln(), f.rho_hat.ln());
    let mut points = Vec::with_capacity(blocks.len());
    let (mut beta, mut tau, mut gamma) = (0u64, 0u64, 0u64);
    for b in blocks {
        if b.k >= 2 {
            beta += b.beta;
            tau += b.tau;
            gamma += b.gamma;
        }
        let half_beta = 0.5 * beta as f64;
        let bound = half_beta * l1 + (gamma + tau) as f64 * lh + log_a0;
        points.push(BoundPoint { k: b.k, half_beta, tau_sum: tau, gamma_sum: gamma, bound, gate: half_beta >= tau as f64 });
    }
    let k_star = points.iter().find(|p| p.bound > cap).map(|p| p.k);
    BoundReport { points, log_a0, cap, k_star, factors: *f }
}

/// Bound profile for blocks `1..=K`, failing when the gate
/// `(1/2) sum beta_i >= sum tau_i` does not hold at `K`.
pub fn lower_bound(blocks: &[BlockCounts], p: &ParamSet, f: &GrowthFactors, log_a0: f64) -> Result<BoundReport> {
    if !log_a0.is_finite() {
        return Err(Error::InvalidInput(format!("log A0 = {log_a0} is not finite")));
    }
    let rep = bound_profile(blocks, f, log_a0, log_cap(p));
    if let Some(last) = rep.last() {
        if !last.gate {
            return Err(Error::GateFailed { half_beta: last.half_beta, tau: last.tau_sum });
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::Generator;
    use proptest::prelude::*;

    fn squares_blocks(k_max: usize, tau: impl Fn(u64) -> u64) -> Vec<BlockCounts> {
        let mut alpha = 0;
        (1..=k_max)
            .map(|k| {
                let beta = if k == 1 { 1 } else { (k * k) as u64 };
                let b = BlockCounts { k, alpha, beta, gamma: 3, tau: tau(beta), gamma3: 0 };
                alpha += beta + 3;
                b
            })
            .collect()
    }

    #[test]
    fn reference_factors() {
        let f = GrowthFactors::new(&ParamSet::reference(), 0.0).unwrap();
        assert!((f.rho0 - 1.8).abs() < 1e-12);
        assert!((f.rho1 - 2.7).abs() < 1e-12);
        assert!((f.rho2 - 0.1).abs() < 1e-12);
        assert!((f.rho_hat - 0.1).abs() < 1e-12);
        assert!(GrowthFactors::new(&ParamSet::reference(), 1.8).is_err());
        let cap = log_cap(&ParamSet::reference());
        assert!((cap - 1.0404f64.ln()).abs() < 1e-15);
        assert!((cap - 0.0396).abs() < 1e-4);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn hand_arithmetic_for_square_blocks() {
        let p = ParamSet::reference();
        let f = GrowthFactors::new(&p, 0.0).unwrap();
        let blocks = squares_blocks(6, |_| 0);
        let r = lower_bound(&blocks, &p, &f, 0.0).unwrap();
        // log 2.7 = 0.993252, log 0.1 = -2.302585
        let k5 = 27.0 * 0.993_251_773 - 12.0 * 2.302_585_093;
        let k6 = 45.0 * 0.993_251_773 - 15.0 * 2.302_585_093;
        assert!((r.at(5).unwrap().bound - k5).abs() < 1e-6);
        assert!((r.at(6).unwrap().bound - k6).abs() < 1e-6);
        assert!((k5 + 0.813).abs() < 1e-3 && (k6 - 10.157).abs() < 1e-3);
        for log_a0 in [-10.0, -6.9, -3.0, 0.0] {
            let r = lower_bound(&blocks, &p, &f, log_a0).unwrap();
            assert_eq!(r.k_star, Some(6), "log A0 = {log_a0}");
        }
        // below e^-10 the crossing moves past the horizon
        assert_eq!(lower_bound(&blocks, &p, &f, -10.2).unwrap().k_star, None);
    }

    #[test]
    fn unit_blocks_closed_form() {
        let p = ParamSet::reference();
        let f = GrowthFactors::new(&p, 0.0).unwrap();
        let blocks: Vec<BlockCounts> =
            (1..=20).map(|k| BlockCounts { k, alpha: 2 * k as u64, beta: 1, gamma: 0, tau: 0, gamma3: 0 }).collect();
        let r = lower_bound(&blocks, &p, &f, -1.5).unwrap();
        for b in &r.points {
            let want = 0.5 * (b.k - 1) as f64 * 2.7f64.ln() - 1.5;
            assert!((b.bound - want).abs() < 1e-12);
        }
        assert!(r.points.windows(2).all(|w| w[1].bound > w[0].bound));
    }

    #[test]
    fn gate() {
        let p = ParamSet::reference();
        let f = GrowthFactors::new(&p, 0.0).unwrap();
        let all_zero = squares_blocks(6, |b| b + 1);
        assert!(matches!(lower_bound(&all_zero, &p, &f, 0.0), Err(Error::GateFailed { .. })));
        // ceil(beta/2) zeros: 2 + 5 + 8 + 13 + 18 = 46 > 45
        let half = squares_blocks(6, |b| b.div_ceil(2));
        match lower_bound(&half, &p, &f, 0.0) {
            Err(Error::GateFailed { half_beta, tau }) => {
                assert_eq!(half_beta, 45.0);
                assert_eq!(tau, 46);
            }
            other => panic!("expected gate failure, got {other:?}"),
        }
        let prof = bound_profile(&half, &f, 0.0, log_cap(&p));
        let ideal = bound_profile(&squares_blocks(6, |_| 0), &f, 0.0, log_cap(&p));
        for (a, b) in prof.points.iter().zip(&ideal.points).skip(1) {
            assert!(a.bound < b.bound);
        }
    }

    #[test]
    fn counts_from_schedule() {
        let s = IntervalSchedule::new(vec![(0, 1), (4, 4), (11, 9), (23, 16)], None).unwrap();
        let ones = Code::from_generator(Generator::Ones);
        let b = block_counts(&s, &ones, 3).unwrap();
        assert_eq!(b.iter().map(|x| (x.alpha, x.beta, x.gamma, x.tau)).collect::<Vec<_>>(), vec![(0, 1, 3, 0), (4, 4, 3, 0), (11, 9, 3, 0)]);
        let zeros = Code::from_generator(Generator::Zeros);
        assert_eq!(block_counts(&s, &zeros, 3).unwrap()[1].tau, 5);
        assert!(block_counts(&s, &ones, 4).is_err());
    }

    proptest! {
        #[test]
        fn bound_increments_stay_positive_for_growing_blocks(
            start in 1u64..20,
            steps in proptest::collection::vec(0u64..5, 2..30),
            gamma in 0u64..6,
        ) {
            let f = GrowthFactors::new(&ParamSet::reference(), 0.0).unwrap();
            let mut beta = start;
            let mut blocks = vec![BlockCounts { k: 1, alpha: 0, beta: 1, gamma, tau: 0, gamma3: 0 }];
            for (i, d) in steps.iter().enumerate() {
                beta += d;
                blocks.push(BlockCounts { k: i + 2, alpha: 0, beta, gamma, tau: 0, gamma3: 0 });
            }
            let r = bound_profile(&blocks, &f, 0.0, 0.04);
            let inc: Vec<f64> = r.points.windows(2).map(|w| w[1].bound - w[0].bound).collect();
            if let Some(first) = inc.iter().position(|&d| d >= 0.0) {
                prop_assert!(inc[first..].iter().all(|&d| d >= 0.0));
            }
        }
    }
}
