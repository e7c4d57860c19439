//! Symplectic integration of Hamiltonian flows and transport of empirical measures.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::system::{Observable, PhasePoint, TonelliSystem};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
const MAX_STEPS: f64 = 1e8;

/// Uniformly sampled orbit of a Hamiltonian flow.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
}

impl Trajectory {
    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// CSV with header `t,x1..xn,p1..pn,H`.
    pub fn write_csv<W: Write>(&self, sys: &TonelliSystem, mut w: W) -> Result<()> {
        let n = sys.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("p{i}")));
        header.push("H".into());
        writeln!(w, "{}", header.join(","))?;
        for (t, z) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(z.x().iter().chain(z.p()).map(|v| v.to_string()));
            row.push(sys.energy(z).to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Number of uniform steps and their (signed) size for a flow of duration `t`.
pub(crate) fn step_plan(t: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config("dt", "time step must be positive"));
    }
    if !t.is_finite() {
        return Err(Error::config("t", "flow time must be finite"));
    }
    let ratio = t.abs() / dt;
    if ratio > MAX_STEPS {
        return Err(Error::config("t", "|t|/dt exceeds 1e8"));
    }
    let n = (ratio - 1e-9).ceil().max(0.0) as usize;
    if n == 0 {
        return Ok((0, 0.0));
    }
    Ok((n, t / n as f64))
}

fn vec_of(z: &PhasePoint) -> DVector<f64> {
    DVector::from_iterator(2 * z.dim(), z.x().iter().chain(z.p()).copied())
}

fn split(v: &DVector<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    (v.rows(0, n).iter().copied().collect(), v.rows(n, n).iter().copied().collect())
}

fn field(f: &Observable, v: &DVector<f64>, n: usize) -> Result<DVector<f64>> {
    let (x, p) = split(v, n);
    let g = f.gradient_at(&x, &p)?;
    Ok(DVector::from_iterator(
        2 * n,
        g.dp.iter().copied().chain(g.dx.iter().map(|d| -d)),
    ))
}

/// One implicit-midpoint step z₁ = z₀ + h·X_f((z₀ + z₁)/2), Newton-solved from
/// an explicit Euler predictor. Positions are not wrapped here.
fn midpoint_step(f: &Observable, z0: &DVector<f64>, h: f64, n: usize, step: usize) -> Result<DVector<f64>> {
    let mut z1 = z0 + field(f, z0, n)? * h;
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let mid = (z0 + &z1) * 0.5;
        let r = &z1 - z0 - field(f, &mid, n)? * h;
        residual = r.amax();
        if residual == 0.0 {
            return Ok(z1);
        }
        let (mx, mp) = split(&mid, n);
        let hess = f.hessian_at(&mx, &mp)?;
        // Jacobian of X_f = J ∇f with J = [[0, I], [-I, 0]]
        let mut jx = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..2 * n {
            for i in 0..n {
                jx[(i, j)] = hess[(n + i, j)];
                jx[(n + i, j)] = -hess[(i, j)];
            }
        }
        let a = DMatrix::identity(2 * n, 2 * n) - jx * (0.5 * h);
        let delta = a
            .lu()
            .solve(&r)
            .ok_or(Error::StepFailure { step, residual })?;
        z1 -= &delta;
        let scale = 1.0 + z1.amax();
        if delta.amax() <= NEWTON_TOL * scale {
            if z1.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { step });
            }
            return Ok(z1);
        }
    }
    if z1.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp { step });
    }
    Err(Error::StepFailure { step, residual })
}

fn to_point(v: &DVector<f64>, n: usize) -> PhasePoint {
    let (x, p) = split(v, n);
    PhasePoint::new(x, p)
}

/// Φ_f^t(z₀) sampled at every step.
pub fn flow(f: &Observable, z0: &PhasePoint, t: f64, dt: f64) -> Result<Trajectory> {
    let n = z0.dim();
    if f.dim() != n {
        return Err(Error::Dimension { expected: f.dim(), got: n });
    }
    let (steps, h) = step_plan(t, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(z0.clone());
    let mut z = vec_of(z0);
    for k in 0..steps {
        z = midpoint_step(f, &z, h, n, k)?;
        let pt = to_point(&z, n);
        z = vec_of(&pt);
        times.push(if k + 1 == steps { t } else { (k + 1) as f64 * h });
        states.push(pt);
    }
    Ok(Trajectory { times, states })
}

/// Φ_f^t(z₀) without storing the orbit.
pub fn flow_endpoint(f: &Observable, z0: &PhasePoint, t: f64, dt: f64) -> Result<PhasePoint> {
    let n = z0.dim();
    if f.dim() != n {
        return Err(Error::Dimension { expected: f.dim(), got: n });
    }
    let (steps, h) = step_plan(t, dt)?;
    let mut z = vec_of(z0);
    for k in 0..steps {
        z = midpoint_step(f, &z, h, n, k)?;
        // keep x reduced so long runs do not lose precision
        z = vec_of(&to_point(&z, n));
    }
    Ok(to_point(&z, n))
}

/// Φ_H^t for a Tonelli system.
pub fn flow_system(sys: &TonelliSystem, z0: &PhasePoint, t: f64, dt: f64) -> Result<Trajectory> {
    flow(sys.hamiltonian(), z0, t, dt)
}

/// max over the orbit of |f(z(t)) − f(z(0))|.
pub fn first_integral_defect(f: &Observable, traj: &Trajectory) -> f64 {
    let f0 = f.eval(&traj.states[0]);
    traj.states
        .iter()
        .map(|z| (f.eval(z) - f0).abs())
        .fold(0.0, f64::max)
}

/// Distance between Φ_A^s Φ_B^t z₀ and Φ_B^t Φ_A^s z₀.
pub fn flow_commutator_defect(
    a: &Observable,
    b: &Observable,
    z0: &PhasePoint,
    s: f64,
    t: f64,
    dt: f64,
) -> Result<f64> {
    let ab = flow_endpoint(a, &flow_endpoint(b, z0, t, dt)?, s, dt)?;
    let ba = flow_endpoint(b, &flow_endpoint(a, z0, s, dt)?, t, dt)?;
    Ok(ab.distance(&ba))
}

/// Finitely supported probability measure on T*(Tⁿ).
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<PhasePoint>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<PhasePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("measure", "empty support"));
        }
        if points.len() != weights.len() {
            return Err(Error::config("measure", "points and weights differ in length"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::config("measure", "weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config("measure", format!("weights sum to {total}, not 1")));
        }
        let n = points[0].dim();
        if points.iter().any(|z| z.dim() != n) {
            return Err(Error::config("measure", "mixed dimensions"));
        }
        Ok(EmpiricalMeasure { points, weights })
    }

    pub fn uniform(points: Vec<PhasePoint>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        // 1/k summed k times can miss 1 by a few ulps
        let mut m = EmpiricalMeasure { points, weights };
        let total: f64 = m.weights.iter().sum();
        if let Some(last) = m.weights.last_mut() {
            *last += 1.0 - total;
        }
        EmpiricalMeasure::new(m.points, m.weights)
    }

    /// Time average along a trajectory (endpoint excluded, uniform weights).
    pub fn from_orbit(traj: &Trajectory) -> Result<Self> {
        let k = traj.states.len().saturating_sub(1).max(1);
        Self::uniform(traj.states[..k].to_vec())
    }

    /// Time average along a trajectory weighted by the bump exp(−1/(s(1−s))), s ∈ (0, 1)
    /// the normalized time. The smooth window makes averages of quasi-periodic orbits
    /// converge much faster than uniform weights, whose truncation error decays like 1/T.
    pub fn from_orbit_windowed(traj: &Trajectory) -> Result<Self> {
        let m = traj.states.len();
        let w: Vec<f64> = (0..m)
            .map(|k| {
                let s = (k as f64 + 0.5) / m as f64;
                (-1.0 / (s * (1.0 - s))).exp()
            })
            .collect();
        let total: f64 = w.iter().sum();
        Self::new(traj.states.clone(), w.into_iter().map(|v| v / total).collect())
    }

    pub fn point_mass(z: PhasePoint) -> Self {
        EmpiricalMeasure {
            points: vec![z],
            weights: vec![1.0],
        }
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// CSV `x1..xn,p1..pn,w`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.points[0].dim();
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend((1..=n).map(|i| format!("p{i}")));
        header.push("w".into());
        writeln!(w, "{}", header.join(","))?;
        for (z, wt) in self.points.iter().zip(&self.weights) {
            let mut row: Vec<String> = z.x().iter().chain(z.p()).map(|v| v.to_string()).collect();
            row.push(wt.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::config("measure", "empty file"))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols.len() % 2 == 0 || cols.last() != Some(&"w") {
            return Err(Error::config("measure", format!("bad header `{header}`")));
        }
        let n = (cols.len() - 1) / 2;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::config("measure", format!("line {}: not a number", i + 2)))?;
            if vals.len() != 2 * n + 1 {
                return Err(Error::config("measure", format!("line {}: expected {} fields", i + 2, 2 * n + 1)));
            }
            points.push(PhasePoint::new(vals[..n].to_vec(), vals[n..2 * n].to_vec()));
            weights.push(vals[2 * n]);
        }
        EmpiricalMeasure::new(points, weights)
    }
}

/// (Φ_f^t)_* μ: every support point advanced by the flow, weights unchanged.
pub fn pushforward(f: &Observable, mu: &EmpiricalMeasure, t: f64, dt: f64) -> Result<EmpiricalMeasure> {
    let points = mu
        .points
        .par_iter()
        .map(|z| flow_endpoint(f, z, t, dt))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalMeasure {
        points,
        weights: mu.weights.clone(),
    })
}

/// Σ wᵢ (pᵢ·∂H/∂p − H − c·∂H/∂p): the action of L − c·v on the Legendre image of μ.
pub fn action_average(sys: &TonelliSystem, mu: &EmpiricalMeasure, c: &[f64]) -> Result<f64> {
    let h = sys.hamiltonian();
    let mut acc = 0.0;
    for (z, w) in mu.points.iter().zip(&mu.weights) {
        let g = h.gradient(z)?;
        let pv: f64 = z.p().iter().zip(&g.dp).map(|(p, v)| p * v).sum();
        let cv: f64 = c.iter().zip(&g.dp).map(|(c, v)| c * v).sum();
        acc += w * (pv - h.eval(z) - cv);
    }
    Ok(acc)
}

/// |∫(p·H_p − H) dμ − ∫(p·H_p − H) d(Φ_f^t)_*μ|.
///
/// Meaningful only when μ is (close to) Φ_H-invariant and f Poisson-commutes with H.
pub fn exact_symplecto_action_defect(
    sys: &TonelliSystem,
    f: &Observable,
    mu: &EmpiricalMeasure,
    t: f64,
    dt: f64,
) -> Result<f64> {
    let zero = vec![0.0; sys.dim()];
    let before = action_average(sys, mu, &zero)?;
    let after = action_average(sys, &pushforward(f, mu, t, dt)?, &zero)?;
    Ok((before - after).abs())
}
