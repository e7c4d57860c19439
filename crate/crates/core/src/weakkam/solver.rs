//! Value iteration for the critical value α(c), critical subsolutions and Aubry sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::{interpolate, DiscreteActionParams, GridFunction};
use super::operator::LaxOleinik;
use crate::error::{Error, Result};
use crate::system::{CohomologyClass, PhasePoint, TonelliSystem};
use crate::torus;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop when sup|u_{k+1} − u_k| and the width of the bracket on α fall below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Krasnosel'skii–Mann averaging u ← (1 − θ)u + θ·Tu. θ = 1 is plain value
    /// iteration, which can cycle when the critical graph is periodic.
    pub relaxation: f64,
    /// Aubry indicator threshold; `None` picks 5·spacing·Lip(u).
    pub tol_aubry: Option<f64>,
    /// Backtracking length for the rotation vector; `None` picks 4N.
    pub rotation_steps: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 200_000,
            relaxation: 0.5,
            tol_aubry: None,
            rotation_steps: None,
        }
    }
}

/// Normalized fixed point of the Lax–Oleinik iteration.
#[derive(Clone, Debug)]
pub struct ValueIteration {
    pub u: GridFunction,
    pub alpha: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// Iterates u ← normalize((1 − θ)u + θ·Tu) from `u0`; α is read off the mean increment.
/// Stops once both the step and the bracket on α are below `tol`.
pub fn value_iteration(op: &LaxOleinik, u0: &GridFunction, opts: &SolverOptions) -> Result<ValueIteration> {
    if u0.len() != op.nodes() {
        return Err(Error::Dimension { expected: op.nodes(), got: u0.len() });
    }
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::config("relaxation", "must lie in (0, 1]"));
    }
    let theta = opts.relaxation;
    let mut u = u0.normalized();
    let mut tu = u.clone();
    let mut next = vec![0.0; u.len()];
    let mut alpha = f64::NAN;
    let mut residual = f64::INFINITY;
    let nodes = u.len() as f64;
    for k in 1..=opts.max_iter {
        op.apply_into(u.values(), tu.values_mut());
        // sequential sums keep the result independent of the worker count
        let (mut sum, mut incr_lo, mut incr_hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in tu.values().iter().zip(u.values()) {
            sum += a - b;
            incr_lo = incr_lo.min(a - b);
            incr_hi = incr_hi.max(a - b);
        }
        // adding 0.0 turns -0.0 into 0.0 in reports
        alpha = -sum / (nodes * op.h()) + 0.0;
        // min(Tu − u) ≤ −α·h ≤ max(Tu − u), and the mean lies in the same bracket
        let bracket = (incr_hi - incr_lo) / op.h();
        let mut lo = f64::INFINITY;
        for (o, (a, b)) in next.iter_mut().zip(u.values().iter().zip(tu.values())) {
            *o = (1.0 - theta) * a + theta * b;
            lo = lo.min(*o);
        }
        residual = 0.0;
        for (o, a) in next.iter_mut().zip(u.values()) {
            *o -= lo;
            residual = f64::max(residual, (*o - a).abs());
        }
        u.values_mut().copy_from_slice(&next);
        if !residual.is_finite() {
            return Err(Error::domain("value iteration diverged"));
        }
        if residual < opts.tol && bracket <= opts.tol {
            return Ok(ValueIteration {
                u,
                alpha,
                converged: true,
                iterations: k,
                residual,
            });
        }
    }
    Ok(ValueIteration {
        u,
        alpha,
        converged: false,
        iterations: opts.max_iter,
        residual,
    })
}

/// Conjugate-pair Aubry estimate.
#[derive(Clone, Debug)]
pub struct AubryEstimate {
    /// I(x) = u⁻(x) − u⁺(x) − min(u⁻ − u⁺).
    pub indicator: GridFunction,
    pub nodes: Vec<usize>,
    pub tol_aubry: f64,
    /// −u⁺, the normalized fixed point of the reversed operator.
    pub backward: GridFunction,
    pub backward_converged: bool,
}

/// Aubry nodes from the forward solution u⁻ and the backward solution u⁺ of the
/// reversed Lagrangian L(x, −v) in class −c, started from −u⁻.
pub fn aubry_estimate(
    sys: &TonelliSystem,
    c: &CohomologyClass,
    params: &DiscreteActionParams,
    forward_u: &GridFunction,
    opts: &SolverOptions,
) -> Result<AubryEstimate> {
    let rev = LaxOleinik::reversed(sys, c, params)?;
    conjugate_pair(&rev, forward_u, opts)
}

fn conjugate_pair(rev: &LaxOleinik, forward_u: &GridFunction, opts: &SolverOptions) -> Result<AubryEstimate> {
    let neg = GridFunction::new(
        forward_u.dim(),
        forward_u.n(),
        forward_u.values().iter().map(|v| -v).collect(),
    )?;
    let back = value_iteration(rev, &neg, opts)?;
    let sum: Vec<f64> = forward_u
        .values()
        .iter()
        .zip(back.u.values())
        .map(|(a, b)| a + b)
        .collect();
    let indicator = GridFunction::new(forward_u.dim(), forward_u.n(), sum)?.normalized();
    let tol_aubry = opts.tol_aubry.unwrap_or_else(|| default_tol_aubry(forward_u, opts.tol));
    let nodes = indicator
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= tol_aubry)
        .map(|(i, _)| i)
        .collect();
    Ok(AubryEstimate {
        indicator,
        nodes,
        tol_aubry,
        backward: back.u,
        backward_converged: back.converged,
    })
}

/// 5·spacing·Lip(u), floored at the resolution of the solver.
pub fn default_tol_aubry(u: &GridFunction, solver_tol: f64) -> f64 {
    (5.0 * u.spacing() * u.lipschitz_estimate()).max(10.0 * solver_tol)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RotationEstimate {
    pub vector: Vec<f64>,
    /// True when no cycle of the minimizer chain was found within the step budget.
    pub flagged: bool,
}

/// Everything the weak-KAM solver learns about one cohomology class.
#[derive(Clone, Debug)]
pub struct WeakKamResult {
    pub c: CohomologyClass,
    pub alpha: f64,
    /// Critical subsolution, normalized to min u = 0.
    pub u: GridFunction,
    pub indicator: GridFunction,
    pub aubry_nodes: Vec<usize>,
    /// c + du at each Aubry node, in the order of `aubry_nodes`.
    pub lifted_momenta: Vec<Vec<f64>>,
    pub rotation_vector: Vec<f64>,
    pub rotation_flagged: bool,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub tol_aubry: f64,
    pub params: DiscreteActionParams,
}

impl WeakKamResult {
    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.u.spacing()
    }

    /// c + du at every node.
    pub fn momentum_field(&self) -> Vec<Vec<f64>> {
        let c = self.c.as_slice();
        self.u
            .gradient_field()
            .into_iter()
            .map(|g| g.iter().zip(c).map(|(a, b)| a + b).collect())
            .collect()
    }

    /// c + du interpolated (bi)linearly at an arbitrary point.
    pub fn momentum_at(&self, x: &[f64]) -> Vec<f64> {
        let field = self.momentum_field();
        interpolate(self.dim(), self.u.n(), &field, x)
    }

    /// (x, c + du(x)) at every node.
    pub fn lifted_graph(&self) -> Vec<PhasePoint> {
        self.momentum_field()
            .into_iter()
            .enumerate()
            .map(|(i, p)| PhasePoint::new(self.u.position(i), p))
            .collect()
    }

    /// Lifted Aubry points (x, c + du(x)).
    pub fn aubry_points(&self) -> Vec<PhasePoint> {
        self.aubry_nodes
            .iter()
            .zip(&self.lifted_momenta)
            .map(|(i, p)| PhasePoint::new(self.u.position(*i), p.clone()))
            .collect()
    }

    pub fn is_full_support(&self) -> bool {
        self.aubry_nodes.len() == self.u.len()
    }

    /// CSV `x1[,x2],u,indicator,p1[,p2]` over all nodes.
    pub fn write_grid_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let n = self.dim();
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.push("u".into());
        header.push("indicator".into());
        header.extend((1..=n).map(|i| format!("p{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (i, p) in self.momentum_field().iter().enumerate() {
            let mut row: Vec<String> = self.u.position(i).iter().map(|v| v.to_string()).collect();
            row.push(self.u.values()[i].to_string());
            row.push(self.indicator.values()[i].to_string());
            row.extend(p.iter().map(|v| v.to_string()));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn assemble(
    sys: &TonelliSystem,
    c: &CohomologyClass,
    params: &DiscreteActionParams,
    op: &LaxOleinik,
    fwd: ValueIteration,
    opts: &SolverOptions,
) -> Result<WeakKamResult> {
    let aubry = match op.transposed() {
        Some(rev) => conjugate_pair(&rev, &fwd.u, opts)?,
        None => aubry_estimate(sys, c, params, &fwd.u, opts)?,
    };
    let grads = fwd.u.gradient_field();
    let lifted_momenta = aubry
        .nodes
        .iter()
        .map(|&i| grads[i].iter().zip(c.as_slice()).map(|(a, b)| a + b).collect())
        .collect();
    let steps = opts.rotation_steps.unwrap_or(4 * params.n);
    let rot = match aubry.nodes.first() {
        Some(&seed) => backtrack_rotation(op, &fwd.u, seed, steps),
        None => RotationEstimate {
            vector: vec![f64::NAN; c.dim()],
            flagged: true,
        },
    };
    Ok(WeakKamResult {
        c: c.clone(),
        alpha: fwd.alpha,
        u: fwd.u,
        indicator: aubry.indicator,
        aubry_nodes: aubry.nodes,
        lifted_momenta,
        rotation_vector: rot.vector,
        rotation_flagged: rot.flagged,
        converged: fwd.converged && aubry.backward_converged,
        iterations: fwd.iterations,
        residual: fwd.residual,
        tol_aubry: aubry.tol_aubry,
        params: *params,
    })
}

/// Solves for α(c), u_c, the Aubry estimate and the rotation vector, starting from u ≡ 0.
pub fn solve_weak_kam(
    sys: &TonelliSystem,
    c: &CohomologyClass,
    params: &DiscreteActionParams,
    opts: &SolverOptions,
) -> Result<WeakKamResult> {
    let u0 = GridFunction::constant(sys.dim(), params.n, 0.0)?;
    solve_weak_kam_from(sys, c, params, opts, &u0)
}

pub fn solve_weak_kam_from(
    sys: &TonelliSystem,
    c: &CohomologyClass,
    params: &DiscreteActionParams,
    opts: &SolverOptions,
    u0: &GridFunction,
) -> Result<WeakKamResult> {
    let op = LaxOleinik::new(sys, c, params)?;
    solve_with_operator(sys, &op, params, opts, u0)
}

/// Solves with a prebuilt forward operator, whose class is used.
pub fn solve_with_operator(
    sys: &TonelliSystem,
    op: &LaxOleinik,
    params: &DiscreteActionParams,
    opts: &SolverOptions,
    u0: &GridFunction,
) -> Result<WeakKamResult> {
    let c = op.class();
    let fwd = value_iteration(op, u0, opts)?;
    assemble(sys, &c, params, op, fwd, opts)
}

/// Follows minimizing predecessors from `seed`; the rotation vector is the mean
/// velocity over the first cycle found, or over `steps` steps when none closes.
pub fn backtrack_rotation(op: &LaxOleinik, u: &GridFunction, seed: usize, steps: usize) -> RotationEstimate {
    let dim = op.dim();
    let s = 1.0 / op.n() as f64;
    let mut visited: Vec<Option<usize>> = vec![None; op.nodes()];
    // cumulative displacement after each step
    let mut path: Vec<Vec<f64>> = vec![vec![0.0; dim]];
    let mut x = seed;
    visited[x] = Some(0);
    for step in 1..=steps.max(1) {
        let (y, k) = op.argmin(u.values(), x);
        let mut total = path.last().unwrap().clone();
        for (t, o) in total.iter_mut().zip(op.offset(k)) {
            *t += *o as f64 * s;
        }
        path.push(total);
        if let Some(first) = visited[y] {
            let len = (step - first) as f64;
            let vector = path[step]
                .iter()
                .zip(&path[first])
                .map(|(a, b)| (a - b) / (len * op.h()))
                .collect();
            return RotationEstimate { vector, flagged: false };
        }
        visited[y] = Some(step);
        x = y;
    }
    let len = path.len() - 1;
    RotationEstimate {
        vector: path[len].iter().map(|d| d / (len as f64 * op.h())).collect(),
        flagged: true,
    }
}

/// Rotation vector of a solved class, recomputed with an explicit step budget.
pub fn rotation_vector(sys: &TonelliSystem, result: &WeakKamResult, steps: usize) -> Result<RotationEstimate> {
    let op = LaxOleinik::new(sys, &result.c, &result.params)?;
    let seed = *result
        .aubry_nodes
        .first()
        .ok_or_else(|| Error::domain("empty Aubry estimate"))?;
    Ok(backtrack_rotation(&op, &result.u, seed, steps))
}

/// max over Aubry nodes of |H(x, c + du) − α|.
pub fn energy_level_check(sys: &TonelliSystem, result: &WeakKamResult) -> f64 {
    result
        .aubry_points()
        .iter()
        .map(|z| (sys.energy(z) - result.alpha).abs())
        .fold(0.0, f64::max)
}

/// max over nodes of H(x, c + du(x)) − α; nonpositive for an exact subsolution.
pub fn subcritical_check(sys: &TonelliSystem, u: &GridFunction, c: &CohomologyClass, alpha: f64) -> f64 {
    (0..u.len())
        .map(|i| {
            let p: Vec<f64> = u
                .gradient_at_node(i)
                .iter()
                .zip(c.as_slice())
                .map(|(a, b)| a + b)
                .collect();
            sys.energy_at(&u.position(i), &p) - alpha
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Random grid function with values uniform in [0, 1).
pub fn random_grid(dim: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
    let len = n.pow(dim as u32);
    GridFunction::new(dim, n, (0..len).map(|_| rng.random::<f64>()).collect())
}

/// Seeded generator shared by the probes.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimal displacement between two nodes, in torus units.
pub fn node_displacement(u: &GridFunction, from: usize, to: usize) -> Vec<f64> {
    torus::displacement(&u.position(from), &u.position(to))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn params(n: usize) -> DiscreteActionParams {
        DiscreteActionParams::new(0.1, 4.0, n)
    }

    fn class(c: f64) -> CohomologyClass {
        CohomologyClass::new(vec![c]).unwrap()
    }

    #[test]
    fn free_motion_in_a_lattice_class() {
        // 1.25 = 8/(N·h) lies on the velocity lattice, so u is constant
        let sys = catalog::free(1);
        let wk = solve_weak_kam(&sys, &class(1.25), &params(64), &SolverOptions::default()).unwrap();
        assert!(wk.converged);
        assert!((wk.alpha - 0.78125).abs() < 1e-12, "{}", wk.alpha);
        assert!(wk.is_full_support());
        assert!(wk.u.max() - wk.u.min() < 1e-12);
        for p in wk.momentum_field() {
            assert!((p[0] - 1.25).abs() < 1e-12);
        }
        assert!((wk.rotation_vector[0] - 1.25).abs() < 1e-12);
        assert!(!wk.rotation_flagged);
        assert!(energy_level_check(&sys, &wk) < 1e-12);
    }

    #[test]
    fn free_rotation_within_half_a_lattice_velocity() {
        let sys = catalog::free(1);
        let p = params(256);
        let wk = solve_weak_kam(&sys, &class(0.7), &p, &SolverOptions::default()).unwrap();
        let lattice = 1.0 / (p.n as f64 * p.h);
        assert!((wk.rotation_vector[0] - 0.7).abs() <= 0.5 * lattice, "{:?}", wk.rotation_vector);
    }

    #[test]
    fn pendulum_rest_class() {
        let sys = catalog::pendulum();
        let wk = solve_weak_kam(&sys, &class(0.0), &params(64), &SolverOptions::default()).unwrap();
        assert!(wk.converged);
        assert!((wk.alpha - 1.0).abs() < 2e-2);
        assert_eq!(wk.rotation_vector, vec![0.0]);
        assert!(!wk.is_full_support());
        // the Aubry estimate hugs the hyperbolic point x = 0
        for z in wk.aubry_points() {
            assert!(crate::torus::distance(z.x(), &[0.0]) < 0.2, "{:?}", z);
        }
        let top = wk.aubry_points().into_iter().find(|z| z.x()[0] == 0.0).unwrap();
        assert!(top.p()[0].abs() < 1e-2);
    }

    #[test]
    fn constant_function_is_a_pendulum_subsolution() {
        let sys = catalog::pendulum();
        let u = GridFunction::constant(1, 64, 0.0).unwrap();
        assert!(subcritical_check(&sys, &u, &class(0.0), 1.0) <= 0.0);
        let free = catalog::free(1);
        assert!(subcritical_check(&free, &u, &class(0.0), 0.0).abs() < 1e-8);
    }

    #[test]
    fn rotating_pendulum_has_full_support() {
        let sys = catalog::pendulum();
        let wk = solve_weak_kam(&sys, &class(2.0), &params(128), &SolverOptions::default()).unwrap();
        assert!(wk.is_full_support());
        assert!(wk.rotation_vector[0] > 0.5);
        assert!(energy_level_check(&sys, &wk) < 5e-2);
    }

    #[test]
    fn iteration_respects_the_cap() {
        let sys = catalog::pendulum();
        let opts = SolverOptions {
            max_iter: 3,
            ..SolverOptions::default()
        };
        let wk = solve_weak_kam(&sys, &class(0.0), &params(32), &opts).unwrap();
        assert!(!wk.converged);
        assert!(wk.iterations <= 3);
    }

    #[test]
    fn seeded_grids_repeat() {
        let a = random_grid(2, 8, &mut seeded_rng(5)).unwrap();
        let b = random_grid(2, 8, &mut seeded_rng(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|v| (0.0..1.0).contains(v)));
    }
}
