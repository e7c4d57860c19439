//! Numerical checks tying integrals of motion to weak-KAM objects: independence,
//! commutation, involution and invariance on Aubry sets, invariant graphs, and
//! the assembled weak-integrability verdict.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{flow_endpoint, flow_system};
use crate::sampling;
use crate::system::{poisson_bracket, CohomologyClass, Observable, PhasePoint, TonelliSystem};
use crate::weakkam::solver::{random_grid, seeded_rng, solve_weak_kam, solve_weak_kam_from, SolverOptions};
use crate::weakkam::{DiscreteActionParams, WeakKamResult};

pub const DEFAULT_SV_TOL: f64 = 1e-8;

/// A list of candidate integrals F₁…F_k on T*(Tⁿ).
#[derive(Clone)]
pub struct IntegralFamily {
    members: Vec<Observable>,
    includes_hamiltonian: bool,
}

impl std::fmt::Debug for IntegralFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = self.members.iter().map(|m| m.name()).collect();
        f.debug_struct("IntegralFamily").field("members", &names).finish()
    }
}

impl IntegralFamily {
    /// Checks k ≤ 2n, matching dimensions and periodicity in x on a small sample set.
    pub fn new(dim: usize, members: Vec<Observable>, includes_hamiltonian: bool) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::config("integrals", "empty family"));
        }
        if members.len() > 2 * dim {
            return Err(Error::config(
                "integrals",
                format!("{} members exceed the phase-space dimension {}", members.len(), 2 * dim),
            ));
        }
        let probe = sampling::phase_samples(dim, 16, sampling::DEFAULT_MOMENTUM_BOX, 0);
        for f in &members {
            if f.dim() != dim {
                return Err(Error::Dimension { expected: dim, got: f.dim() });
            }
            if !f.is_periodic(&probe, 1e-9) {
                return Err(Error::config("integrals", format!("`{}` is not periodic in x", f.name())));
            }
        }
        Ok(IntegralFamily {
            members,
            includes_hamiltonian,
        })
    }

    /// Comma-separated catalog observable names, e.g. `p1,p2` or `H`.
    pub fn parse(spec: &str, sys: &TonelliSystem) -> Result<Self> {
        let names: Vec<&str> = spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let members = names
            .iter()
            .map(|n| crate::catalog::observable(n, sys))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sys.dim(), members, names.contains(&"H"))
    }

    pub fn members(&self) -> &[Observable] {
        &self.members
    }

    pub fn includes_hamiltonian(&self) -> bool {
        self.includes_hamiltonian
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn numerical_rank(m: &DMatrix<f64>, sv_tol: f64) -> usize {
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 || !top.is_finite() {
        return 0;
    }
    sv.iter().filter(|s| **s > sv_tol * top).count()
}

/// Minimum rank of the k×2n gradient matrix over the samples, and a point attaining it.
pub fn independence_rank(fam: &IntegralFamily, samples: &[PhasePoint], sv_tol: f64) -> Result<(usize, PhasePoint)> {
    if samples.is_empty() {
        return Err(Error::config("samples", "empty sample set"));
    }
    let ranks = samples
        .par_iter()
        .map(|z| {
            let rows = fam
                .members
                .iter()
                .map(|f| f.gradient(z).map(|g| g.concat()))
                .collect::<Result<Vec<_>>>()?;
            let k = rows.len();
            let m = DMatrix::from_fn(k, 2 * z.dim(), |i, j| rows[i][j]);
            Ok(numerical_rank(&m, sv_tol))
        })
        .collect::<Result<Vec<_>>>()?;
    // first minimizer in sample order
    let (idx, rank) = ranks
        .iter()
        .enumerate()
        .fold((0, usize::MAX), |best, (i, r)| if *r < best.1 { (i, *r) } else { best });
    Ok((rank, samples[idx].clone()))
}

/// max over the samples of |{f, g}|.
pub fn commutation_defect(f: &Observable, g: &Observable, samples: &[PhasePoint]) -> Result<f64> {
    let vals = samples
        .par_iter()
        .map(|z| poisson_bracket(f, g, z).map(f64::abs))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// max |{f, g}| over the lifted Aubry points of `wk`.
pub fn involution_on_aubry(f: &Observable, g: &Observable, wk: &WeakKamResult) -> Result<f64> {
    let pts = wk.aubry_points();
    if pts.is_empty() {
        return Err(Error::domain("empty Aubry estimate"));
    }
    commutation_defect(f, g, &pts)
}

fn nearest_distance(z: &PhasePoint, set: &[PhasePoint]) -> f64 {
    set.iter().map(|a| a.distance(z)).fold(f64::INFINITY, f64::min)
}

/// Pushes every lifted Aubry point by the f-flow for time t and returns the largest
/// distance to the lifted Aubry set.
pub fn aubry_invariance_defect(f: &Observable, wk: &WeakKamResult, t: f64, dt: f64) -> Result<f64> {
    let pts = wk.aubry_points();
    if pts.is_empty() {
        return Err(Error::domain("empty Aubry estimate"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let pushed = pts
        .par_iter()
        .map(|z| flow_endpoint(f, z, t, dt))
        .collect::<Result<Vec<_>>>()?;
    Ok(pushed
        .par_iter()
        .map(|z| nearest_distance(z, &pts))
        .reduce(|| 0.0, f64::max))
}

fn require_full_graph(wk: &WeakKamResult) -> Result<()> {
    if wk.is_full_support() {
        Ok(())
    } else {
        Err(Error::GraphNotFull {
            covered: wk.aubry_nodes.len(),
            total: wk.u.len(),
        })
    }
}

/// Seeds points on the graph {(x, c + du(x))}, flows them under H for time t and
/// returns max |p(t) − (c + du(x(t)))| with du interpolated (bi)linearly.
pub fn graph_invariance_defect(
    sys: &TonelliSystem,
    wk: &WeakKamResult,
    t: f64,
    dt: f64,
    n_seeds: usize,
    seed: u64,
) -> Result<f64> {
    require_full_graph(wk)?;
    let mut rng = seeded_rng(seed);
    let field = wk.momentum_field();
    let starts: Vec<PhasePoint> = (0..n_seeds)
        .map(|_| {
            let x: Vec<f64> = (0..wk.dim()).map(|_| rng.random::<f64>()).collect();
            let p = crate::weakkam::grid::interpolate(wk.dim(), wk.u.n(), &field, &x);
            PhasePoint::new(x, p)
        })
        .collect();
    let defects = starts
        .par_iter()
        .map(|z| {
            let traj = flow_system(sys, z, t, dt)?;
            Ok(traj
                .states
                .iter()
                .map(|s| {
                    let q = crate::weakkam::grid::interpolate(wk.dim(), wk.u.n(), &field, s.x());
                    s.p().iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}

/// max − min of f over the lifted graph.
pub fn constancy_on_graph(f: &Observable, wk: &WeakKamResult) -> Result<f64> {
    require_full_graph(wk)?;
    let (lo, hi) = wk
        .lifted_graph()
        .iter()
        .map(|z| f.eval(z))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    Ok(hi - lo)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniquenessProbe {
    /// max pairwise sup-distance of the normalized solutions.
    pub spread: f64,
    pub all_converged: bool,
}

/// Solves from `n_restarts` seeded random grids in [0, 1) and compares the normalized solutions.
pub fn uniqueness_probe(
    sys: &TonelliSystem,
    c: &CohomologyClass,
    params: &DiscreteActionParams,
    opts: &SolverOptions,
    n_restarts: usize,
    seed: u64,
) -> Result<UniquenessProbe> {
    let mut rng = seeded_rng(seed);
    let starts = (0..n_restarts)
        .map(|_| random_grid(sys.dim(), params.n, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let op = crate::weakkam::LaxOleinik::new(sys, c, params)?;
    let sols = starts
        .iter()
        .map(|u0| crate::weakkam::value_iteration(&op, u0, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut spread: f64 = 0.0;
    for i in 0..sols.len() {
        for j in 0..i {
            spread = spread.max(sols[i].u.sup_distance(&sols[j].u));
        }
    }
    Ok(UniquenessProbe {
        spread,
        all_converged: sols.iter().all(|s| s.converged),
    })
}

/// One line of a verdict report. For `independence_rank` the pass rule is value ≥ threshold,
/// for every other check value ≤ threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictReport {
    pub records: Vec<CheckRecord>,
    /// `weakly-integrable-consistent` or `not-weakly-integrable`.
    pub verdict: String,
}

impl VerdictReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failing(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerdictOptions {
    pub seed: u64,
    pub sample_count: usize,
    pub momentum_box: f64,
    pub sv_tol: f64,
    pub commutation_tol: f64,
    pub involution_tol: f64,
    /// Graph invariance threshold in units of the grid spacing.
    pub graph_spacings: f64,
    /// Aubry invariance threshold in units of the grid spacing.
    pub aubry_spacings: f64,
    pub constancy_tol: f64,
    pub flow_t: f64,
    pub flow_dt: f64,
    pub graph_seeds: usize,
    pub solver: SolverOptions,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        VerdictOptions {
            seed: 0,
            sample_count: sampling::DEFAULT_SAMPLE_COUNT,
            momentum_box: sampling::DEFAULT_MOMENTUM_BOX,
            sv_tol: DEFAULT_SV_TOL,
            commutation_tol: 1e-6,
            involution_tol: 5e-2,
            graph_spacings: 3.0,
            aubry_spacings: 2.0,
            constancy_tol: 5e-2,
            flow_t: 1.0,
            flow_dt: 1e-2,
            graph_seeds: 16,
            solver: SolverOptions::default(),
        }
    }
}

const CRITICAL_POINT_TOL: f64 = 1e-10;

/// Newton on dH = 0 from `z`, with the pseudo-inverse of the Hessian.
fn refine_critical_point(sys: &TonelliSystem, z: &PhasePoint) -> Option<PhasePoint> {
    let n = z.dim();
    let (mut x, mut p) = (z.x().to_vec(), z.p().to_vec());
    for _ in 0..50 {
        let g = sys.hamiltonian().gradient_at(&x, &p).ok()?.concat();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < CRITICAL_POINT_TOL {
            return Some(PhasePoint::new(x, p));
        }
        let hess = sys.hamiltonian().hessian_at(&x, &p).ok()?;
        let step = hess.svd(true, true).solve(&DVector::from_vec(g), 1e-12).ok()?;
        for i in 0..n {
            x[i] -= step[i];
            p[i] -= step[n + i];
        }
        if !x.iter().chain(&p).all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

fn record(name: String, value: f64, threshold: f64, seed: u64) -> CheckRecord {
    CheckRecord {
        pass: value.is_finite() && value <= threshold,
        name,
        value,
        threshold,
        seed,
    }
}

fn class_label(c: &CohomologyClass) -> String {
    c.as_slice().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Runs every check of the weak-integrability checklist and sorts the records by name.
pub fn weak_integrability_verdict(
    sys: &TonelliSystem,
    fam: &IntegralFamily,
    c_list: &[CohomologyClass],
    params: &DiscreteActionParams,
    opts: &VerdictOptions,
) -> Result<VerdictReport> {
    let seed = opts.seed;
    let h = sys.hamiltonian().clone().renamed("H");
    let mut samples = sampling::phase_samples(sys.dim(), opts.sample_count, opts.momentum_box, seed);
    let mut records = Vec::new();

    for f in fam.members() {
        let v = commutation_defect(&h, f, &samples)?;
        records.push(record(format!("commutation[H,{}]", f.name()), v, opts.commutation_tol, seed));
    }

    let solutions = c_list
        .iter()
        .map(|c| solve_weak_kam(sys, c, params, &opts.solver))
        .collect::<Result<Vec<_>>>()?;

    // the rank is probed where it is most likely to drop: on Aubry lifts and at
    // critical points of H reached from them
    for wk in &solutions {
        let lifts = wk.aubry_points();
        let critical: Vec<PhasePoint> = lifts.par_iter().filter_map(|z| refine_critical_point(sys, z)).collect();
        samples.extend(lifts);
        samples.extend(critical);
    }
    let (rank, _) = independence_rank(fam, &samples, opts.sv_tol)?;
    records.push(CheckRecord {
        name: "independence_rank".into(),
        value: rank as f64,
        threshold: sys.dim() as f64,
        pass: rank >= sys.dim(),
        seed,
    });

    for (c, wk) in c_list.iter().zip(&solutions) {
        let label = class_label(c);
        let spacing = wk.spacing();
        records.push(CheckRecord {
            name: format!("graph_existence[c={label}]"),
            value: wk.aubry_nodes.len() as f64,
            threshold: wk.u.len() as f64,
            pass: wk.is_full_support() && wk.converged,
            seed,
        });
        let graph = match graph_invariance_defect(sys, wk, opts.flow_t, opts.flow_dt, opts.graph_seeds, seed) {
            Ok(v) => v,
            Err(Error::GraphNotFull { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        records.push(record(
            format!("graph_invariance[c={label}]"),
            graph,
            opts.graph_spacings * spacing,
            seed,
        ));
        for f in fam.members() {
            let spread = match constancy_on_graph(f, wk) {
                Ok(v) => v,
                Err(Error::GraphNotFull { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            records.push(record(
                format!("constancy[{};c={label}]", f.name()),
                spread,
                opts.constancy_tol,
                seed,
            ));
            let inv = aubry_invariance_defect(f, wk, opts.flow_t, opts.flow_dt)?;
            records.push(record(
                format!("aubry_invariance[{};c={label}]", f.name()),
                inv,
                opts.aubry_spacings * spacing,
                seed,
            ));
        }
        let m = fam.members();
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                let v = involution_on_aubry(&m[i], &m[j], wk)?;
                records.push(record(
                    format!("involution[{},{};c={label}]", m[i].name(), m[j].name()),
                    v,
                    opts.involution_tol,
                    seed,
                ));
            }
        }
    }

    records.sort_by(|a, b| a.name.cmp(&b.name));
    let verdict = if records.iter().all(|r| r.pass) {
        "weakly-integrable-consistent"
    } else {
        "not-weakly-integrable"
    };
    Ok(VerdictReport {
        records,
        verdict: verdict.into(),
    })
}

/// Re-solves from a seeded random start; used to compare against the u ≡ 0 start.
pub fn solve_from_random_start(
    sys: &TonelliSystem,
    c: &CohomologyClass,
    params: &DiscreteActionParams,
    opts: &SolverOptions,
    seed: u64,
) -> Result<WeakKamResult> {
    let mut rng = seeded_rng(seed);
    let u0 = random_grid(sys.dim(), params.n, &mut rng)?;
    solve_weak_kam_from(sys, c, params, opts, &u0)
}
