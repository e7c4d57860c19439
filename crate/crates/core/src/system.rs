//! Tonelli Hamiltonians on T*(Tⁿ), observables, Hamiltonian vector fields,
//! Poisson brackets and the Legendre duality.
//!
//! Sign conventions: X_H = (∂H/∂p, −∂H/∂x) and
//! {f, g} = df · X_g = Σᵢ ∂f/∂xᵢ ∂g/∂pᵢ − ∂f/∂pᵢ ∂g/∂xᵢ.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::torus;

/// Default step for 4th-order central differences.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A point (x, p) of T*(Tⁿ). `x` is always reduced into [0, 1)ⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    x: Vec<f64>,
    p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(mut x: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(x.len(), p.len(), "position and momentum dimensions differ");
        torus::wrap_all(&mut x);
        PhasePoint { x, p }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.p)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.p).all(|v| v.is_finite())
    }

    /// Torus metric in x, Euclidean in p.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        torus::phase_distance(&self.x, &self.p, &other.x, &other.p)
    }
}

/// Gradient of a phase-space function, split into its x and p blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGradient {
    pub dx: Vec<f64>,
    pub dp: Vec<f64>,
}

impl PhaseGradient {
    fn check_finite(&self, owner: &str) -> Result<()> {
        for (i, v) in self.dx.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::domain(format!("{owner}: d/dx{}", i + 1)));
            }
        }
        for (i, v) in self.dp.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::domain(format!("{owner}: d/dp{}", i + 1)));
            }
        }
        Ok(())
    }

    /// Row vector (∂/∂x, ∂/∂p).
    pub fn concat(&self) -> Vec<f64> {
        self.dx.iter().chain(&self.dp).copied().collect()
    }
}

/// A smooth function on T*(Tⁿ), periodic in x.
///
/// Analytic derivatives are optional; [`Observable`] falls back to finite
/// differences when they are absent. The Hessian is ordered (x, p).
pub trait PhaseFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], p: &[f64]) -> f64;
    fn gradient(&self, _x: &[f64], _p: &[f64]) -> Option<PhaseGradient> {
        None
    }
    fn hessian(&self, _x: &[f64], _p: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

/// A Lagrangian L(x, v) on T(Tⁿ).
pub trait LagrangianFn: Send + Sync {
    fn value(&self, x: &[f64], v: &[f64]) -> f64;
}

type ScalarFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

struct ClosureFunction {
    dim: usize,
    f: Box<ScalarFn>,
}

impl PhaseFunction for ClosureFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64], p: &[f64]) -> f64 {
        (self.f)(x, p)
    }
}

struct ClosureLagrangian(Box<ScalarFn>);

impl LagrangianFn for ClosureLagrangian {
    fn value(&self, x: &[f64], v: &[f64]) -> f64 {
        (self.0)(x, v)
    }
}

/// A named phase-space function: an integral-of-motion candidate or a flow generator.
#[derive(Clone)]
pub struct Observable {
    name: String,
    func: Arc<dyn PhaseFunction>,
    fd_step: f64,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl Observable {
    pub fn new(name: impl Into<String>, func: Arc<dyn PhaseFunction>) -> Self {
        Observable {
            name: name.into(),
            func,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    /// Observable without analytic derivatives.
    pub fn from_fn<F>(name: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            name,
            Arc::new(ClosureFunction {
                dim,
                f: Box::new(f),
            }),
        )
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        assert!(step > 0.0);
        self.fd_step = step;
        self
    }

    /// Same function with a new name.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Drops analytic derivatives so every derivative goes through finite differences.
    pub fn numerical_only(&self) -> Self {
        let inner = self.func.clone();
        let mut o = Observable::from_fn(self.name.clone(), self.dim(), move |x, p| {
            inner.value(x, p)
        });
        o.fd_step = self.fd_step;
        o
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.func.dim()
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn function(&self) -> &Arc<dyn PhaseFunction> {
        &self.func
    }

    pub fn has_analytic_gradient(&self) -> bool {
        let n = self.dim();
        self.func.gradient(&vec![0.0; n], &vec![0.0; n]).is_some()
    }

    pub fn value_at(&self, x: &[f64], p: &[f64]) -> f64 {
        self.func.value(x, p)
    }

    pub fn eval(&self, z: &PhasePoint) -> f64 {
        self.func.value(z.x(), z.p())
    }

    pub fn gradient_at(&self, x: &[f64], p: &[f64]) -> Result<PhaseGradient> {
        let g = match self.func.gradient(x, p) {
            Some(g) => g,
            None => self.fd_gradient(x, p),
        };
        g.check_finite(&self.name)?;
        Ok(g)
    }

    pub fn gradient(&self, z: &PhasePoint) -> Result<PhaseGradient> {
        self.gradient_at(z.x(), z.p())
    }

    fn fd_gradient(&self, x: &[f64], p: &[f64]) -> PhaseGradient {
        let n = x.len();
        let h = self.fd_step;
        let f = |xs: &[f64], ps: &[f64]| self.func.value(xs, ps);
        let d4 = |fm2: f64, fm1: f64, fp1: f64, fp2: f64| (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
        let mut dx = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut xs = x.to_vec();
        let mut ps = p.to_vec();
        for i in 0..n {
            let xi = x[i];
            let mut at = |s: f64| {
                xs[i] = xi + s * h;
                f(&xs, p)
            };
            let (a, b, c, d) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
            dx[i] = d4(a, b, c, d);
            xs[i] = xi;
        }
        for i in 0..n {
            let pi = p[i];
            let mut at = |s: f64| {
                ps[i] = pi + s * h;
                f(x, &ps)
            };
            let (a, b, c, d) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
            dp[i] = d4(a, b, c, d);
            ps[i] = pi;
        }
        PhaseGradient { dx, dp }
    }

    /// Hessian in (x, p) ordering: analytic when available, otherwise central
    /// differences of the gradient.
    pub fn hessian_at(&self, x: &[f64], p: &[f64]) -> Result<DMatrix<f64>> {
        if let Some(h) = self.func.hessian(x, p) {
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("{}: Hessian", self.name)));
            }
            return Ok(h);
        }
        let n = x.len();
        // nested differences lose precision quickly; a coarser step is more accurate
        let h = if self.func.gradient(x, p).is_some() {
            self.fd_step
        } else {
            (self.fd_step * 100.0).min(1e-3)
        };
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        let mut xs = x.to_vec();
        let mut ps = p.to_vec();
        for j in 0..2 * n {
            let shift = |s: f64, xs: &mut Vec<f64>, ps: &mut Vec<f64>| {
                if j < n {
                    xs[j] = x[j] + s * h;
                } else {
                    ps[j - n] = p[j - n] + s * h;
                }
            };
            // fourth-order central stencil applied to the gradient
            let mut g = |s: f64| -> Result<Vec<f64>> {
                shift(s, &mut xs, &mut ps);
                let v = self.gradient_at(&xs, &ps)?.concat();
                shift(0.0, &mut xs, &mut ps);
                Ok(v)
            };
            let (g2p, g1p, g1m, g2m) = (g(2.0)?, g(1.0)?, g(-1.0)?, g(-2.0)?);
            for i in 0..2 * n {
                out[(i, j)] = (-g2p[i] + 8.0 * g1p[i] - 8.0 * g1m[i] + g2m[i]) / (12.0 * h);
            }
        }
        // symmetrize
        let sym = (&out + out.transpose()) * 0.5;
        Ok(sym)
    }

    /// Checks periodicity in x by comparing f(x) with f(x + eᵢ) at the sample points.
    pub fn is_periodic(&self, samples: &[PhasePoint], tol: f64) -> bool {
        samples.iter().all(|z| {
            let f0 = self.eval(z);
            (0..z.dim()).all(|i| {
                let mut x = z.x().to_vec();
                x[i] += 1.0;
                let f1 = self.func.value(&x, z.p());
                (f1 - f0).abs() <= tol * (1.0 + f0.abs())
            })
        })
    }
}

/// Closed 1-form c·dx representing a class in H¹(Tⁿ; R) ≅ Rⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct CohomologyClass(Vec<f64>);

impl CohomologyClass {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if let Some(i) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("c{}", i + 1), "cohomology class must be finite"));
        }
        Ok(CohomologyClass(c))
    }

    pub fn zero(dim: usize) -> Self {
        CohomologyClass(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn negated(&self) -> Self {
        CohomologyClass(self.0.iter().map(|v| -v).collect())
    }
}

impl From<f64> for CohomologyClass {
    fn from(c: f64) -> Self {
        CohomologyClass(vec![c])
    }
}

/// A Tonelli Hamiltonian on T*(Tⁿ) together with an optional closed-form Lagrangian.
#[derive(Clone)]
pub struct TonelliSystem {
    hamiltonian: Observable,
    lagrangian: Option<Arc<dyn LagrangianFn>>,
}

impl fmt::Debug for TonelliSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TonelliSystem")
            .field("name", &self.name())
            .field("dim", &self.dim())
            .field("analytic_lagrangian", &self.lagrangian.is_some())
            .finish()
    }
}

impl TonelliSystem {
    pub fn new(hamiltonian: Observable) -> Self {
        TonelliSystem {
            hamiltonian,
            lagrangian: None,
        }
    }

    pub fn from_fn<F>(name: impl Into<String>, dim: usize, h: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(Observable::from_fn(name, dim, h))
    }

    pub fn with_lagrangian(mut self, l: Arc<dyn LagrangianFn>) -> Self {
        self.lagrangian = Some(l);
        self
    }

    pub fn with_lagrangian_fn<F>(self, l: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.with_lagrangian(Arc::new(ClosureLagrangian(Box::new(l))))
    }

    /// Same Hamiltonian, Legendre transform computed numerically.
    pub fn without_lagrangian(&self) -> Self {
        TonelliSystem {
            hamiltonian: self.hamiltonian.clone(),
            lagrangian: None,
        }
    }

    /// Same Hamiltonian with every derivative taken by finite differences.
    pub fn numerical_only(&self) -> Self {
        TonelliSystem {
            hamiltonian: self.hamiltonian.numerical_only(),
            lagrangian: None,
        }
    }

    pub fn name(&self) -> &str {
        self.hamiltonian.name()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn fd_step(&self) -> f64 {
        self.hamiltonian.fd_step()
    }

    pub fn has_analytic_lagrangian(&self) -> bool {
        self.lagrangian.is_some()
    }

    /// H itself, as an observable / flow generator.
    pub fn hamiltonian(&self) -> &Observable {
        &self.hamiltonian
    }

    pub fn energy(&self, z: &PhasePoint) -> f64 {
        self.hamiltonian.eval(z)
    }

    pub fn energy_at(&self, x: &[f64], p: &[f64]) -> f64 {
        self.hamiltonian.value_at(x, p)
    }

    /// Smallest eigenvalue of the fiber Hessian ∂²H/∂p² over the samples.
    pub fn min_fiber_curvature(&self, samples: &[PhasePoint]) -> Result<f64> {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        for z in samples {
            let hess = self.hamiltonian.hessian(z)?;
            let hpp = hess.view((n, n), (n, n)).into_owned();
            let ev = hpp.symmetric_eigenvalues();
            lo = lo.min(ev.min());
        }
        Ok(lo)
    }

    /// Superlinearity proxy: H(x, R p̂)/R increases over R ∈ {10, 100, 1000}.
    pub fn is_superlinear_along(&self, x: &[f64], directions: &[Vec<f64>]) -> bool {
        directions.iter().all(|d| {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ratio = |r: f64| {
                let p: Vec<f64> = d.iter().map(|v| r * v / norm).collect();
                self.energy_at(x, &p) / r
            };
            let (a, b, c) = (ratio(10.0), ratio(100.0), ratio(1000.0));
            a < b && b < c
        })
    }
}

impl Observable {
    /// Hessian at a phase point.
    pub fn hessian(&self, z: &PhasePoint) -> Result<DMatrix<f64>> {
        self.hessian_at(z.x(), z.p())
    }
}

/// X_f(z) = (∂f/∂p, −∂f/∂x) for any generator f.
pub fn vector_field(f: &Observable, z: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = f.gradient(z)?;
    Ok((g.dp, g.dx.iter().map(|v| -v).collect()))
}

/// Hamiltonian vector field (dx/dt, dp/dt) of a Tonelli system.
pub fn hamiltonian_vector_field(sys: &TonelliSystem, z: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
    vector_field(sys.hamiltonian(), z)
}

/// {f, g}(z) = Σᵢ ∂f/∂xᵢ ∂g/∂pᵢ − ∂f/∂pᵢ ∂g/∂xᵢ.
pub fn poisson_bracket(f: &Observable, g: &Observable, z: &PhasePoint) -> Result<f64> {
    let gf = f.gradient(z)?;
    let gg = g.gradient(z)?;
    let v: f64 = (0..z.dim())
        .map(|i| gf.dx[i] * gg.dp[i] - gf.dp[i] * gg.dx[i])
        .sum();
    if !v.is_finite() {
        return Err(Error::domain(format!("{{{}, {}}}", f.name(), g.name())));
    }
    Ok(v)
}

const LEGENDRE_TOL: f64 = 1e-10;
const LEGENDRE_MAX_ITER: usize = 100;

/// argmax over p of ⟨p, v⟩ − H(x, p), by damped Newton from p₀ = v.
fn legendre_argmax(sys: &TonelliSystem, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = sys.dim();
    let h = sys.hamiltonian();
    let objective = |p: &[f64]| -> f64 {
        p.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - h.value_at(x, p)
    };
    let fail = || Error::ConvexityViolation {
        x: x.to_vec(),
        v: v.to_vec(),
    };
    let mut p = v.to_vec();
    for _ in 0..LEGENDRE_MAX_ITER {
        let g = h.gradient_at(x, &p)?;
        let resid = DVector::from_iterator(n, v.iter().zip(&g.dp).map(|(a, b)| a - b));
        if resid.norm() < LEGENDRE_TOL {
            return Ok(p);
        }
        let hess = h.hessian_at(x, &p)?;
        let hpp = hess.view((n, n), (n, n)).into_owned();
        let step = hpp.cholesky().ok_or_else(fail)?.solve(&resid);
        let f0 = objective(&p);
        let slope = resid.dot(&step);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            // near the optimum rounding dominates the decrease test; accept full steps there
            if objective(&trial) >= f0 + 1e-4 * t * slope || resid.norm() < 1e-6 {
                p = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(fail());
            }
        }
    }
    let g = h.gradient_at(x, &p)?;
    let r: f64 = v.iter().zip(&g.dp).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if r < LEGENDRE_TOL {
        Ok(p)
    } else {
        Err(fail())
    }
}

/// L(x, v) = sup_p (⟨p, v⟩ − H(x, p)); closed form when the system supplies one.
pub fn lagrangian_value(sys: &TonelliSystem, x: &[f64], v: &[f64]) -> Result<f64> {
    if x.len() != sys.dim() || v.len() != sys.dim() {
        return Err(Error::Dimension {
            expected: sys.dim(),
            got: x.len().max(v.len()),
        });
    }
    if let Some(l) = &sys.lagrangian {
        let val = l.value(x, v);
        return if val.is_finite() {
            Ok(val)
        } else {
            Err(Error::domain("Lagrangian"))
        };
    }
    let p = legendre_argmax(sys, x, v)?;
    let pv: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(pv - sys.energy_at(x, &p))
}

/// Legendre transform (x, v) ↦ (x, ∂L/∂v).
pub fn legendre_fiber_map(sys: &TonelliSystem, x: &[f64], v: &[f64]) -> Result<PhasePoint> {
    let p = legendre_argmax(sys, x, v)?;
    Ok(PhasePoint::new(x.to_vec(), p))
}
