//! α tables over cohomology grids and β by discrete Legendre–Fenchel conjugation.

use rayon::prelude::*;

use super::grid::{DiscreteActionParams, GridFunction};
use super::operator::LaxOleinik;
use super::solver::{solve_with_operator, SolverOptions};
use crate::error::{Error, Result};
use crate::system::{CohomologyClass, TonelliSystem};

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaRow {
    pub c: Vec<f64>,
    pub alpha: f64,
    pub rotation_vector: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaTable {
    pub dim: usize,
    pub rows: Vec<AlphaRow>,
    /// 1-D only: α is nondecreasing in |c| on each side of the minimum.
    pub monotone_in_abs_c: Option<bool>,
}

/// Parses `start:stop:step` into an inclusive grid (endpoint kept within 1e-12).
pub fn parse_range(key: &str, spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |m: &str| Error::config(key, format!("`{spec}`: {m}"));
    if parts.len() != 3 {
        return Err(bad("expected start:stop:step"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("not a number"))?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !step.is_finite() || !start.is_finite() || !stop.is_finite() {
        return Err(bad("step must be positive and bounds finite"));
    }
    if stop < start {
        return Err(bad("stop is below start"));
    }
    let count = ((stop - start) / step + 1e-12).floor() as usize;
    if count > 1_000_000 {
        return Err(bad("too many grid points"));
    }
    // rounding to 1e-12 keeps decimal grids such as 0.4 free of accumulated error
    let mut out: Vec<f64> = (0..=count)
        .map(|i| {
            let v = start + i as f64 * step;
            let r = (v * 1e12).round() / 1e12;
            if (r - v).abs() <= 1e-12 { r + 0.0 } else { v }
        })
        .collect();
    // snap the last value onto stop when it lands within 1e-12
    if let Some(last) = out.last_mut() {
        if (*last - stop).abs() <= 1e-12 * (1.0 + stop.abs()) {
            *last = stop;
        }
    }
    Ok(out)
}

/// Solves every class of the grid; rows keep the input order.
pub fn alpha_table(
    sys: &TonelliSystem,
    c_grid: &[CohomologyClass],
    params: &DiscreteActionParams,
    opts: &SolverOptions,
) -> Result<AlphaTable> {
    let Some(first) = c_grid.first() else {
        return Err(Error::config("c_grid", "empty cohomology grid"));
    };
    // costs are built once; other classes only shift the linear term
    let base = LaxOleinik::new(sys, first, params)?;
    let rows = c_grid
        .par_iter()
        .map(|c| {
            let op = base.with_class(c)?;
            let u0 = GridFunction::constant(sys.dim(), params.n, 0.0)?;
            let r = solve_with_operator(sys, &op, params, opts, &u0)?;
            Ok(AlphaRow {
                c: c.as_slice().to_vec(),
                alpha: r.alpha,
                rotation_vector: r.rotation_vector,
                converged: r.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone_in_abs_c = (sys.dim() == 1).then(|| is_monotone_in_abs_c(&rows, 10.0 * opts.tol));
    Ok(AlphaTable {
        dim: sys.dim(),
        rows,
        monotone_in_abs_c,
    })
}

fn is_monotone_in_abs_c(rows: &[AlphaRow], slack: f64) -> bool {
    let mut sorted: Vec<(f64, f64)> = rows.iter().map(|r| (r.c[0], r.alpha)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (right, left): (Vec<_>, Vec<_>) = sorted.into_iter().partition(|(c, _)| *c >= 0.0);
    let ok_right = right.windows(2).all(|w| w[1].1 >= w[0].1 - slack);
    let ok_left = left.windows(2).all(|w| w[0].1 >= w[1].1 - slack);
    ok_right && ok_left
}

impl AlphaTable {
    /// CSV `c1[,c2],alpha`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("c{i}")).collect();
        header.push("alpha".into());
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut row: Vec<String> = r.c.iter().map(|v| v.to_string()).collect();
            row.push(r.alpha.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::config("alpha", "empty table"))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let dim = cols.len().saturating_sub(1);
        if !(1..=2).contains(&dim) || cols.last() != Some(&"alpha") {
            return Err(Error::config("alpha", format!("bad header `{header}`")));
        }
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::config("alpha", format!("bad row `{line}`")))?;
            if v.len() != dim + 1 {
                return Err(Error::config("alpha", format!("bad row `{line}`")));
            }
            rows.push(AlphaRow {
                c: v[..dim].to_vec(),
                alpha: v[dim],
                rotation_vector: vec![f64::NAN; dim],
                converged: true,
            });
        }
        Ok(AlphaTable {
            dim,
            rows,
            monotone_in_abs_c: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaRow {
    pub h: Vec<f64>,
    pub beta: f64,
    /// Largest difference of one-sided difference slopes over the axes.
    pub slope_gap: f64,
    /// Grid class attaining the supremum.
    pub argmax_c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaTable {
    pub dim: usize,
    pub rows: Vec<BetaRow>,
}

impl BetaTable {
    /// CSV `h1[,h2],beta,slope_gap`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("h{i}")).collect();
        header.push("beta".into());
        header.push("slope_gap".into());
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut row: Vec<String> = r.h.iter().map(|v| v.to_string()).collect();
            row.push(r.beta.to_string());
            row.push(r.slope_gap.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn conjugate_at(table: &AlphaTable, h: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, r) in table.rows.iter().enumerate() {
        let v = r.c.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() - r.alpha;
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

fn on_boundary(table: &AlphaTable, idx: usize) -> bool {
    (0..table.dim).any(|axis| {
        let v = table.rows[idx].c[axis];
        let (lo, hi) = table
            .rows
            .iter()
            .map(|r| r.c[axis])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        v <= lo || v >= hi
    })
}

/// β(h) = max over the c-grid of ⟨c, h⟩ − α(c), with one-sided slopes taken at step `delta`.
pub fn beta_from_alpha(table: &AlphaTable, h_grid: &[Vec<f64>], delta: f64) -> Result<BetaTable> {
    if table.rows.is_empty() {
        return Err(Error::config("alpha", "empty α table"));
    }
    if !(delta > 0.0) {
        return Err(Error::config("delta", "slope step must be positive"));
    }
    let mut rows = Vec::with_capacity(h_grid.len());
    for h in h_grid {
        if h.len() != table.dim {
            return Err(Error::Dimension { expected: table.dim, got: h.len() });
        }
        let (beta, idx) = conjugate_at(table, h);
        let mut gap: f64 = 0.0;
        for axis in 0..table.dim {
            let mut hp = h.clone();
            hp[axis] += delta;
            let mut hm = h.clone();
            hm[axis] -= delta;
            let (bp, ip) = conjugate_at(table, &hp);
            let (bm, im) = conjugate_at(table, &hm);
            if on_boundary(table, ip) || on_boundary(table, im) {
                return Err(Error::WidenGrid { h: h.clone() });
            }
            let right = (bp - beta) / delta;
            let left = (beta - bm) / delta;
            gap = gap.max(right - left);
        }
        if on_boundary(table, idx) {
            return Err(Error::WidenGrid { h: h.clone() });
        }
        rows.push(BetaRow {
            h: h.clone(),
            beta,
            slope_gap: gap,
            argmax_c: table.rows[idx].c.clone(),
        });
    }
    Ok(BetaTable { dim: table.dim, rows })
}
