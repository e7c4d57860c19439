//! Slow, independent verification routes for the discrete weak-KAM problem:
//! exact minimum mean cycle (Karp) and the diagonal of the Peierls barrier
//! (Floyd–Warshall). Intended for small 1-D grids.

use super::operator::LaxOleinik;
use crate::error::{Error, Result};

const MAX_ORACLE_NODES: usize = 1024;

/// Dense step-cost matrix, `w[y][x]` = cost of y → x (+∞ when out of reach).
pub fn dense_costs(op: &LaxOleinik) -> Vec<Vec<f64>> {
    let nodes = op.nodes();
    let mut w = vec![vec![f64::INFINITY; nodes]; nodes];
    for x in 0..nodes {
        for (y, c) in op.incoming(x) {
            if c < w[y][x] {
                w[y][x] = c;
            }
        }
    }
    w
}

/// Minimum mean cost per step over all cycles (Karp's algorithm); α = −λ/h.
pub fn min_mean_cycle(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    // d[k][v]: min cost of a walk with exactly k edges from node 0 to v
    let mut d = vec![vec![f64::INFINITY; n]; n + 1];
    d[0][0] = 0.0;
    for k in 1..=n {
        let (prev, cur) = d.split_at_mut(k);
        let prev = &prev[k - 1];
        let cur = &mut cur[0];
        for (u, row) in w.iter().enumerate() {
            let du = prev[u];
            if du.is_infinite() {
                continue;
            }
            for (v, c) in row.iter().enumerate() {
                let cand = du + c;
                if cand < cur[v] {
                    cur[v] = cand;
                }
            }
        }
    }
    let mut best = f64::INFINITY;
    for v in 0..n {
        if d[n][v].is_infinite() {
            continue;
        }
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n {
            if d[k][v].is_finite() {
                worst = worst.max((d[n][v] - d[k][v]) / (n - k) as f64);
            }
        }
        best = best.min(worst);
    }
    best
}

/// Critical value of the discrete problem via Karp.
pub fn critical_value(op: &LaxOleinik) -> Result<f64> {
    if op.nodes() > MAX_ORACLE_NODES {
        return Err(Error::config("N", "oracle limited to small grids"));
    }
    Ok(-min_mean_cycle(&dense_costs(op)) / op.h())
}

/// h(x, x): cheapest closed walk through x of the costs shifted by the critical mean.
/// Zero exactly on the discrete projected Aubry set.
pub fn peierls_diagonal(op: &LaxOleinik) -> Result<Vec<f64>> {
    if op.dim() != 1 || op.nodes() > 128 {
        return Err(Error::config("N", "Peierls oracle is 1-D only with N <= 128"));
    }
    let mut w = dense_costs(op);
    let lambda = min_mean_cycle(&w);
    for row in w.iter_mut() {
        for c in row.iter_mut() {
            *c -= lambda;
        }
    }
    let n = w.len();
    for k in 0..n {
        for i in 0..n {
            let wik = w[i][k];
            if wik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let cand = wik + w[k][j];
                if cand < w[i][j] {
                    w[i][j] = cand;
                }
            }
        }
    }
    Ok((0..n).map(|i| w[i][i].max(0.0)).collect())
}
