//! Exact discrete optimal transport: an O(n^3) Hungarian method for square
//! assignment problems and successive shortest paths for integer supplies.

use crate::error::{Error, Result};

/// Minimum-cost perfect matching of a square cost matrix (row-major).
/// Returns `(total cost, column assigned to each row)`.
pub fn hungarian(n: usize, cost: &[f64]) -> Result<(f64, Vec<usize>)> {
    if cost.len() != n * n {
        return Err(Error::InvalidInput(format!("cost matrix has {} entries, expected {}", cost.len(), n * n)));
    }
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite cost".into()));
    }
    // 1-based potentials u (rows), v (columns); p[j] = row matched to column j
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total, assign))
}

/// Transportation problem with integer supplies and demands of equal total,
/// solved by successive shortest augmenting paths (Dijkstra with potentials
/// on the dense residual graph). Returns the minimum total cost.
pub fn min_cost_transport(supply: &[u64], demand: &[u64], cost: impl Fn(usize, usize) -> f64) -> Result<f64> {
    let (k, l) = (supply.len(), demand.len());
    let total_s: u128 = supply.iter().map(|&s| s as u128).sum();
    let total_d: u128 = demand.iter().map(|&d| d as u128).sum();
    if total_s != total_d {
        return Err(Error::InvalidInput(format!("supply {total_s} != demand {total_d}")));
    }
    if total_s == 0 {
        return Ok(0.0);
    }
    let c: Vec<f64> = (0..k * l).map(|idx| cost(idx / l, idx % l)).collect();
    if c.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidInput("costs must be finite and non-negative".into()));
    }
    // node layout: supplies 0..k, demands k..k+l
    let mut flow = vec![0u64; k * l];
    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();
    let mut pot = vec![0.0f64; k + l];
    let mut total = 0.0;
    let n = k + l;
    loop {
        if rem_s.iter().all(|&s| s == 0) {
            break;
        }
        // multi-source Dijkstra from supplies with remaining mass
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut done = vec![false; n];
        for i in 0..k {
            if rem_s[i] > 0 {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut best = usize::MAX;
            let mut bd = f64::INFINITY;
            for x in 0..n {
                if !done[x] && dist[x] < bd {
                    bd = dist[x];
                    best = x;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            if best < k {
                let i = best;
                for j in 0..l {
                    let y = k + j;
                    if done[y] {
                        continue;
                    }
                    let rc = (c[i * l + j] + pot[i] - pot[y]).max(0.0);
                    if bd + rc < dist[y] {
                        dist[y] = bd + rc;
                        prev[y] = i;
                    }
                }
            } else {
                let j = best - k;
                for i in 0..k {
                    if done[i] || flow[i * l + j] == 0 {
                        continue;
                    }
                    let rc = (-c[i * l + j] + pot[best] - pot[i]).max(0.0);
                    if bd + rc < dist[i] {
                        dist[i] = bd + rc;
                        prev[i] = best;
                    }
                }
            }
        }
        // cheapest reachable demand with remaining capacity
        let mut sink = usize::MAX;
        let mut sd = f64::INFINITY;
        for j in 0..l {
            if rem_d[j] > 0 && dist[k + j] < sd {
                sd = dist[k + j];
                sink = k + j;
            }
        }
        if sink == usize::MAX {
            return Err(Error::InternalInconsistency("no augmenting path in transport".into()));
        }
        for x in 0..n {
            if dist[x].is_finite() {
                pot[x] += dist[x];
            }
        }
        // bottleneck along the path
        let mut amount = rem_d[sink - k];
        let mut y = sink;
        let source;
        loop {
            let x = prev[y];
            if y >= k {
                // forward arc x -> y, unbounded capacity
            } else {
                amount = amount.min(flow[y * l + (x - k)]);
            }
            if x < k && prev[x] == usize::MAX {
                source = x;
                break;
            }
            y = x;
        }
        amount = amount.min(rem_s[source]);
        let mut y = sink;
        loop {
            let x = prev[y];
            if y >= k {
                flow[x * l + (y - k)] += amount;
                total += amount as f64 * c[x * l + (y - k)];
            } else {
                flow[y * l + (x - k)] -= amount;
                total -= amount as f64 * c[y * l + (x - k)];
            }
            if x == source {
                break;
            }
            y = x;
        }
        rem_s[source] -= amount;
        rem_d[sink - k] -= amount;
    }
    Ok(total)
}
