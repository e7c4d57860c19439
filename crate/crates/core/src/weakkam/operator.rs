//! The discrete (negative-type) Lax–Oleinik operator
//! (Tu)(x) = min over y within reach of u(y) + A_c(y → x).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::grid::{node_position, DiscreteActionParams, GridFunction, Quadrature};
use crate::error::{Error, Result};
use crate::system::{lagrangian_value, CohomologyClass, TonelliSystem};
use crate::torus;

/// Cost of one step of duration h from y to x in class c:
/// h·L(ξ, d/h) − ⟨c, d⟩ with d the minimal displacement and ξ the quadrature node.
/// Returns +∞ when |d|/h exceeds vmax.
pub fn one_step_cost(
    sys: &TonelliSystem,
    y: &[f64],
    x: &[f64],
    c: &CohomologyClass,
    params: &DiscreteActionParams,
) -> Result<f64> {
    let d = torus::displacement(y, x);
    step_cost(sys, y, &d, c.as_slice(), params, false)
}

fn step_cost(
    sys: &TonelliSystem,
    y: &[f64],
    d: &[f64],
    c: &[f64],
    params: &DiscreteActionParams,
    reversed: bool,
) -> Result<f64> {
    let h = params.h;
    let speed = d.iter().map(|v| v * v).sum::<f64>().sqrt() / h;
    if speed > params.vmax * (1.0 + 1e-12) {
        return Ok(f64::INFINITY);
    }
    // reversed Lagrangian L(x, -v) in class -c
    let sign = if reversed { -1.0 } else { 1.0 };
    let cd: f64 = c.iter().zip(d).map(|(a, b)| a * b).sum();
    let lag = |x: &[f64], v: &[f64]| -> Result<f64> {
        let v: Vec<f64> = v.iter().map(|vi| sign * vi).collect();
        lagrangian_value(sys, x, &v)
    };
    let v: Vec<f64> = d.iter().map(|di| di / h).collect();
    let action = match params.quadrature {
        Quadrature::Midpoint => {
            let xi: Vec<f64> = y.iter().zip(d).map(|(a, b)| a + 0.5 * b).collect();
            h * lag(&xi, &v)?
        }
        Quadrature::LeftPoint => h * lag(y, &v)?,
        Quadrature::Simpson => simpson_action(&lag, y, d, h)?,
    };
    Ok(action - sign * cd)
}

const SIMPSON_TOL: f64 = 1e-10;
const SIMPSON_MAX_ITER: usize = 30;

/// Simpson action of the quadratic path through y, y + d/2 + w, y + d, minimized over w.
fn simpson_action<F>(lag: &F, y: &[f64], d: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> Result<f64>,
{
    let n = y.len();
    let end: Vec<f64> = y.iter().zip(d).map(|(a, b)| a + b).collect();
    let vmid: Vec<f64> = d.iter().map(|di| di / h).collect();
    let action = |w: &[f64]| -> Result<f64> {
        let m: Vec<f64> = (0..n).map(|i| y[i] + 0.5 * d[i] + w[i]).collect();
        // endpoint velocities of the quadratic path
        let v0: Vec<f64> = (0..n).map(|i| vmid[i] + 4.0 * w[i] / h).collect();
        let v1: Vec<f64> = (0..n).map(|i| vmid[i] - 4.0 * w[i] / h).collect();
        Ok(h * (lag(y, &v0)? + 4.0 * lag(&m, &vmid)? + lag(&end, &v1)?) / 6.0)
    };
    let mut w = vec![0.0; n];
    let mut best = action(&w)?;
    let eps = 1e-5 * h;
    for _ in 0..SIMPSON_MAX_ITER {
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut probe = w.clone();
        for i in 0..n {
            probe[i] = w[i] + eps;
            let fp = action(&probe)?;
            probe[i] = w[i] - eps;
            let fm = action(&probe)?;
            probe[i] = w[i];
            grad[i] = (fp - fm) / (2.0 * eps);
            hess[(i, i)] = (fp - 2.0 * best + fm) / (eps * eps);
            for j in 0..i {
                let mut at = |si: f64, sj: f64| -> Result<f64> {
                    probe[i] = w[i] + si * eps;
                    probe[j] = w[j] + sj * eps;
                    let v = action(&probe);
                    probe[i] = w[i];
                    probe[j] = w[j];
                    v
                };
                let mixed = (at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?) / (4.0 * eps * eps);
                hess[(i, j)] = mixed;
                hess[(j, i)] = mixed;
            }
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            // the kinetic part dominates; fall back to its curvature
            None => &grad * (h / 16.0),
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = (0..n).map(|i| w[i] - scale * step[i]).collect();
            let f = action(&trial)?;
            if f <= best {
                w = trial;
                best = f;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || step.amax() * scale < SIMPSON_TOL {
            break;
        }
    }
    Ok(best)
}

/// Precomputed operator: reach offsets, source indices and step costs per destination.
#[derive(Clone, Debug)]
pub struct LaxOleinik {
    dim: usize,
    n: usize,
    h: f64,
    /// offsets in grid units, destination = source + offset
    offsets: Vec<Vec<i64>>,
    /// `sources[x * m + k]` is the node x − offsets[k]
    sources: Vec<u32>,
    costs: Vec<f64>,
    class: Vec<f64>,
    reversed: bool,
    quadrature: Quadrature,
}

impl LaxOleinik {
    /// Forward operator for (sys, c).
    pub fn new(sys: &TonelliSystem, c: &CohomologyClass, params: &DiscreteActionParams) -> Result<Self> {
        Self::build(sys, c, params, false)
    }

    /// Operator of the reversed Lagrangian L(x, −v) in class −c; its fixed points are −u⁺.
    pub fn reversed(sys: &TonelliSystem, c: &CohomologyClass, params: &DiscreteActionParams) -> Result<Self> {
        Self::build(sys, c, params, true)
    }

    fn build(sys: &TonelliSystem, c: &CohomologyClass, params: &DiscreteActionParams, reversed: bool) -> Result<Self> {
        params.validate()?;
        let dim = sys.dim();
        if !(1..=2).contains(&dim) {
            return Err(Error::config("dim", "weak-KAM grids support dimension 1 or 2"));
        }
        if c.dim() != dim {
            return Err(Error::Dimension { expected: dim, got: c.dim() });
        }
        let n = params.n;
        let reach = params.vmax * params.h * n as f64;
        // offsets in (-N/2, N/2] so each displacement is the minimal representative
        let lo = -(((n - 1) / 2) as i64);
        let hi = (n / 2) as i64;
        let r = (reach.floor() as i64).clamp(0, hi);
        let axis: Vec<i64> = (lo.max(-r)..=r.min(hi)).collect();
        let mut offsets: Vec<Vec<i64>> = if dim == 1 {
            axis.iter().map(|&k| vec![k]).collect()
        } else {
            axis.iter()
                .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
                .collect()
        };
        let s = 1.0 / n as f64;
        offsets.retain(|o| {
            let len = o.iter().map(|&k| (k as f64 * s).powi(2)).sum::<f64>().sqrt();
            len <= params.vmax * params.h * (1.0 + 1e-12)
        });
        if offsets.is_empty() {
            return Err(Error::config("vmax", "empty reach set"));
        }
        let m = offsets.len();
        let nodes = n.pow(dim as u32);
        let ni = n as i64;
        let source_of = |x: usize, o: &[i64]| -> usize {
            match dim {
                1 => ((x as i64 - o[0]).rem_euclid(ni)) as usize,
                _ => {
                    let (i, j) = ((x / n) as i64, (x % n) as i64);
                    ((i - o[0]).rem_euclid(ni) * ni + (j - o[1]).rem_euclid(ni)) as usize
                }
            }
        };
        let cvec = c.as_slice().to_vec();
        let rows: Vec<Result<(Vec<u32>, Vec<f64>)>> = (0..nodes)
            .into_par_iter()
            .map(|x| {
                let mut src = Vec::with_capacity(m);
                let mut cost = Vec::with_capacity(m);
                for o in &offsets {
                    let y = source_of(x, o);
                    let ypos = node_position(dim, n, y);
                    let d: Vec<f64> = o.iter().map(|&k| k as f64 * s).collect();
                    src.push(y as u32);
                    cost.push(step_cost(sys, &ypos, &d, &cvec, params, reversed)?);
                }
                Ok((src, cost))
            })
            .collect();
        let mut sources = Vec::with_capacity(nodes * m);
        let mut costs = Vec::with_capacity(nodes * m);
        for row in rows {
            let (s, c) = row?;
            sources.extend(s);
            costs.extend(c);
        }
        Ok(LaxOleinik {
            dim,
            n,
            h: params.h,
            offsets,
            sources,
            costs,
            class: c.as_slice().to_vec(),
            reversed,
            quadrature: params.quadrature,
        })
    }

    /// Same operator for another class: only the ⟨c, d⟩ term of each cost changes.
    pub fn with_class(&self, c: &CohomologyClass) -> Result<Self> {
        if c.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: c.dim() });
        }
        let s = 1.0 / self.n as f64;
        let sign = if self.reversed { -1.0 } else { 1.0 };
        let shift: Vec<f64> = self
            .offsets
            .iter()
            .map(|o| {
                o.iter()
                    .zip(self.class.iter().zip(c.as_slice()))
                    .map(|(&k, (old, new))| sign * (old - new) * k as f64 * s)
                    .sum()
            })
            .collect();
        let m = self.offsets.len();
        let mut out = self.clone();
        for (i, cost) in out.costs.iter_mut().enumerate() {
            *cost += shift[i % m];
        }
        out.class = c.as_slice().to_vec();
        Ok(out)
    }

    /// The reversed operator obtained by transposing the edge costs. Exact for
    /// time-symmetric quadratures; `None` for the left-point rule or when the
    /// reach set is not symmetric under o ↦ −o.
    pub fn transposed(&self) -> Option<Self> {
        if self.quadrature == Quadrature::LeftPoint {
            return None;
        }
        let m = self.offsets.len();
        let index: std::collections::HashMap<&[i64], usize> =
            self.offsets.iter().enumerate().map(|(k, o)| (o.as_slice(), k)).collect();
        let negated: Vec<usize> = self
            .offsets
            .iter()
            .map(|o| {
                let neg: Vec<i64> = o.iter().map(|k| -k).collect();
                index.get(neg.as_slice()).copied()
            })
            .collect::<Option<_>>()?;
        let mut costs = vec![0.0; self.costs.len()];
        for x in 0..self.nodes() {
            for k in 0..m {
                let y = self.sources[x * m + k] as usize;
                costs[x * m + k] = self.costs[y * m + negated[k]];
            }
        }
        Some(LaxOleinik {
            costs,
            reversed: !self.reversed,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn class(&self) -> CohomologyClass {
        CohomologyClass::new(self.class.clone()).expect("class validated at construction")
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn reach_size(&self) -> usize {
        self.offsets.len()
    }

    pub fn offset(&self, k: usize) -> &[i64] {
        &self.offsets[k]
    }

    /// (source, cost) pairs of the edges ending at `x`.
    pub fn incoming(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let m = self.offsets.len();
        self.sources[x * m..(x + 1) * m]
            .iter()
            .zip(&self.costs[x * m..(x + 1) * m])
            .map(|(s, c)| (*s as usize, *c))
    }

    /// out = T u. Each destination scans its reach set in a fixed order.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let m = self.offsets.len();
        out.par_iter_mut().enumerate().for_each(|(x, o)| {
            let src = &self.sources[x * m..(x + 1) * m];
            let cost = &self.costs[x * m..(x + 1) * m];
            let mut best = f64::INFINITY;
            for (s, c) in src.iter().zip(cost) {
                let v = u[*s as usize] + c;
                if v < best {
                    best = v;
                }
            }
            *o = best;
        });
    }

    pub fn apply(&self, u: &GridFunction) -> GridFunction {
        let mut out = u.clone();
        self.apply_into(u.values(), out.values_mut());
        out
    }

    /// Minimizing predecessor of x and the offset index used; ties go to the smallest node index.
    pub fn argmin(&self, u: &[f64], x: usize) -> (usize, usize) {
        let m = self.offsets.len();
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for k in 0..m {
            let s = self.sources[x * m + k] as usize;
            let v = u[s] + self.costs[x * m + k];
            if v < best.0 || (v == best.0 && s < best.1) {
                best = (v, s, k);
            }
        }
        (best.1, best.2)
    }
}
