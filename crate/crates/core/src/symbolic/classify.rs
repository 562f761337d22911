use serde::{Deserialize, Serialize};

use super::Code;
use crate::error::{Error, Result};

/// Default distance from 1 accepted by the 1-filling verdict.
pub const ONE_FILLING_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    /// Tail estimate within one symbol of the threshold.
    Boundary,
    Violated,
}

/// Finite-horizon evidence for an asymptotic property of a code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Statistic the verdict is based on (tail minimum or final ratio).
    pub estimate: f64,
    pub threshold: f64,
    pub tolerance: f64,
    pub n_max: u64,
    pub note: String,
}

/// Real length `(3n)^(2/3)` of the trailing window.
pub fn majority_window(n: u64) -> f64 {
    (3.0 * n as f64).powf(2.0 / 3.0)
}

fn need(c: &Code, n_max: u64) -> Result<()> {
    if !c.is_generator_backed() && c.end() < n_max as i64 {
        return Err(Error::WindowTooShort(n_max as i64));
    }
    Ok(())
}

/// `ratio_n` for `n = 1..=n_max`: zeros among `j ∈ [⌈n - (3n)^(2/3)⌉, n]`,
/// `j >= 0`, divided by `(3n)^(2/3)`.
pub fn majority_profile(c: &Code, n_max: u64) -> Result<Vec<f64>> {
    need(c, n_max)?;
    let mut zeros = Vec::with_capacity(n_max as usize + 2);
    zeros.push(0u64);
    for j in 0..=n_max as i64 {
        let z = zeros.last().copied().unwrap_or(0) + u64::from(c.symbol(j)? == 0);
        zeros.push(z);
    }
    // zeros[k] counts zeros among v_0..v_{k-1}
    Ok((1..=n_max)
        .map(|n| {
            let w = majority_window(n);
            let lo = (n as f64 - w).ceil().max(0.0) as usize;
            (zeros[n as usize + 1] - zeros[lo]) as f64 / w
        })
        .collect())
}

/// Verdict on the tail half `[n_max/2, n_max]` of the majority profile.
pub fn classify_majority(c: &Code, n_max: u64) -> Result<Classification> {
    if n_max < 2 {
        return Err(Error::InvalidInput("n_max must be at least 2".into()));
    }
    let prof = majority_profile(c, n_max)?;
    let from = (n_max / 2).max(1) as usize;
    let estimate = prof[from - 1..].iter().cloned().fold(f64::INFINITY, f64::min);
    let tolerance = 2.0 / majority_window(from as u64);
    let verdict = if (estimate - 0.5).abs() <= tolerance {
        Verdict::Boundary
    } else if estimate > 0.5 {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    };
    Ok(Classification {
        verdict,
        estimate,
        threshold: 0.5,
        tolerance,
        n_max,
        note: "finite-horizon evidence: tail minimum over [n_max/2, n_max]".into(),
    })
}

/// Fraction of ones among `v_0, ..., v_{n-1}` for `n = 1..=n_max`.
pub fn one_filling_profile(c: &Code, n_max: u64) -> Result<Vec<f64>> {
    if !c.is_generator_backed() && c.end() < n_max as i64 - 1 {
        return Err(Error::WindowTooShort(n_max as i64 - 1));
    }
    let mut ones = 0u64;
    let mut out = Vec::with_capacity(n_max as usize);
    for j in 0..n_max as i64 {
        ones += u64::from(c.symbol(j)? == 1);
        out.push(ones as f64 / (j + 1) as f64);
    }
    Ok(out)
}

/// Verdict from the final ratio and the trend between the third and last
/// quarter of the profile.
pub fn classify_one_filling(c: &Code, n_max: u64, tol: f64) -> Result<Classification> {
    if n_max < 4 {
        return Err(Error::InvalidInput("n_max must be at least 4".into()));
    }
    let prof = one_filling_profile(c, n_max)?;
    let q = n_max as usize / 4;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let third = mean(&prof[2 * q..3 * q]);
    let last = mean(&prof[3 * q..]);
    let estimate = prof[prof.len() - 1];
    let rising = last >= third - 1e-12;
    let verdict = if estimate >= 1.0 - tol && rising {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    };
    Ok(Classification {
        verdict,
        estimate,
        threshold: 1.0,
        tolerance: tol,
        n_max,
        note: "finite-horizon evidence: final ratio and non-decreasing trend".into(),
    })
}
