//! Closed-form Hamiltonians and observables.
//!
//! Every catalog entry is an instance of the trigonometric family
//!
//! ```text
//! F(x, p) = ½ (p − a)ᵀ Q (p − a) + ℓ·p + Σₜ (αₜ + βₜ·p) φₜ(2π kₜ·x),   φₜ ∈ {cos, sin}
//! ```
//!
//! which has analytic gradients and Hessians, and, when Q is positive definite,
//! the closed-form Lagrangian
//!
//! ```text
//! L(x, v) = ½ (v − b)ᵀ Q⁻¹ (v − b) + a·(v − b) − V(x),   b = ℓ + Σ βₜ φₜ,  V = Σ αₜ φₜ.
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::{LagrangianFn, Observable, PhaseFunction, PhaseGradient, TonelliSystem};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wave {
    Cos,
    Sin,
}

/// One term (α + β·p)·φ(2π k·x).
#[derive(Clone, Debug, PartialEq)]
pub struct TrigTerm {
    pub wave: Wave,
    pub k: Vec<i32>,
    pub alpha: f64,
    pub beta: Vec<f64>,
}

impl TrigTerm {
    pub fn potential(wave: Wave, k: Vec<i32>, alpha: f64) -> Self {
        let n = k.len();
        TrigTerm {
            wave,
            k,
            alpha,
            beta: vec![0.0; n],
        }
    }

    fn phase(&self, x: &[f64]) -> f64 {
        TWO_PI * self.k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum::<f64>()
    }

    /// (φ, φ', φ'') at the phase of x.
    fn waves(&self, x: &[f64]) -> (f64, f64, f64) {
        let (s, c) = self.phase(x).sin_cos();
        match self.wave {
            Wave::Cos => (c, -s, -c),
            Wave::Sin => (s, c, -s),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrigPolynomial {
    dim: usize,
    quad: DMatrix<f64>,
    shift: DVector<f64>,
    linear: DVector<f64>,
    terms: Vec<TrigTerm>,
}

impl TrigPolynomial {
    pub fn new(
        quad: DMatrix<f64>,
        shift: Vec<f64>,
        linear: Vec<f64>,
        terms: Vec<TrigTerm>,
    ) -> Result<Self> {
        let dim = quad.nrows();
        if quad.ncols() != dim {
            return Err(Error::config("mass", "quadratic form must be square"));
        }
        if (&quad - quad.transpose()).amax() > 1e-12 {
            return Err(Error::config("mass", "quadratic form must be symmetric"));
        }
        if shift.len() != dim {
            return Err(Error::Dimension { expected: dim, got: shift.len() });
        }
        if linear.len() != dim {
            return Err(Error::Dimension { expected: dim, got: linear.len() });
        }
        for t in &terms {
            if t.k.len() != dim || t.beta.len() != dim {
                return Err(Error::config("terms", format!("term {t:?} has wrong dimension")));
            }
        }
        Ok(TrigPolynomial {
            dim,
            quad,
            shift: DVector::from_vec(shift),
            linear: DVector::from_vec(linear),
            terms,
        })
    }

    fn drift(&self, x: &[f64]) -> DVector<f64> {
        let mut b = self.linear.clone();
        for t in &self.terms {
            let (phi, _, _) = t.waves(x);
            for i in 0..self.dim {
                b[i] += t.beta[i] * phi;
            }
        }
        b
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.alpha * t.waves(x).0).sum()
    }

    /// Closed-form Lagrangian, when the quadratic form is positive definite.
    pub fn lagrangian(&self) -> Option<TrigLagrangian> {
        let inv = self.quad.clone().cholesky()?.inverse();
        Some(TrigLagrangian {
            poly: self.clone(),
            quad_inv: inv,
        })
    }
}

impl PhaseFunction for TrigPolynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64], p: &[f64]) -> f64 {
        let pv = DVector::from_column_slice(p);
        let q = &pv - &self.shift;
        let mut v = 0.5 * q.dot(&(&self.quad * &q)) + self.linear.dot(&pv);
        for t in &self.terms {
            let amp = t.alpha + t.beta.iter().zip(p).map(|(b, p)| b * p).sum::<f64>();
            v += amp * t.waves(x).0;
        }
        v
    }

    fn gradient(&self, x: &[f64], p: &[f64]) -> Option<PhaseGradient> {
        let n = self.dim;
        let pv = DVector::from_column_slice(p);
        let dp_v = &self.quad * (&pv - &self.shift) + &self.linear;
        let mut dp: Vec<f64> = dp_v.iter().copied().collect();
        let mut dx = vec![0.0; n];
        for t in &self.terms {
            let (phi, dphi, _) = t.waves(x);
            let amp = t.alpha + t.beta.iter().zip(p).map(|(b, p)| b * p).sum::<f64>();
            for i in 0..n {
                dx[i] += amp * dphi * TWO_PI * t.k[i] as f64;
                dp[i] += t.beta[i] * phi;
            }
        }
        Some(PhaseGradient { dx, dp })
    }

    fn hessian(&self, x: &[f64], p: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.dim;
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((n, n), (n, n)).copy_from(&self.quad);
        for t in &self.terms {
            let (_, dphi, ddphi) = t.waves(x);
            let amp = t.alpha + t.beta.iter().zip(p).map(|(b, p)| b * p).sum::<f64>();
            for i in 0..n {
                let ki = TWO_PI * t.k[i] as f64;
                for j in 0..n {
                    let kj = TWO_PI * t.k[j] as f64;
                    h[(i, j)] += amp * ddphi * ki * kj;
                    let xp = t.beta[j] * dphi * ki;
                    h[(i, n + j)] += xp;
                    h[(n + j, i)] += xp;
                }
            }
        }
        Some(h)
    }
}

pub struct TrigLagrangian {
    poly: TrigPolynomial,
    quad_inv: DMatrix<f64>,
}

impl LagrangianFn for TrigLagrangian {
    fn value(&self, x: &[f64], v: &[f64]) -> f64 {
        let w = DVector::from_column_slice(v) - self.poly.drift(x);
        0.5 * w.dot(&(&self.quad_inv * &w)) + self.poly.shift.dot(&w) - self.poly.potential(x)
    }
}

/// Builds a Tonelli system from a trigonometric polynomial; the quadratic form must be positive definite.
pub fn tonelli_from_trig(name: &str, poly: TrigPolynomial) -> Result<TonelliSystem> {
    let lag = poly
        .lagrangian()
        .ok_or_else(|| Error::config("mass", "quadratic form must be positive definite"))?;
    Ok(TonelliSystem::new(Observable::new(name, Arc::new(poly))).with_lagrangian(Arc::new(lag)))
}

/// ½|p|² on Tⁿ.
pub fn free(dim: usize) -> TonelliSystem {
    let poly = TrigPolynomial::new(DMatrix::identity(dim, dim), vec![0.0; dim], vec![0.0; dim], vec![]).unwrap();
    tonelli_from_trig("free", poly).unwrap()
}

/// ½p² + cos(2πx) on T¹; the potential peaks at x = 0.
pub fn pendulum() -> TonelliSystem {
    let poly = TrigPolynomial::new(
        DMatrix::identity(1, 1),
        vec![0.0],
        vec![0.0],
        vec![TrigTerm::potential(Wave::Cos, vec![1], 1.0)],
    )
    .unwrap();
    tonelli_from_trig("pendulum", poly).unwrap()
}

/// ½|p|² + ε(cos 2πx₁ + cos 2πx₂) on T².
pub fn mech2d(eps: f64) -> TonelliSystem {
    let poly = TrigPolynomial::new(
        DMatrix::identity(2, 2),
        vec![0.0; 2],
        vec![0.0; 2],
        vec![
            TrigTerm::potential(Wave::Cos, vec![1, 0], eps),
            TrigTerm::potential(Wave::Cos, vec![0, 1], eps),
        ],
    )
    .unwrap();
    tonelli_from_trig("mech2d", poly).unwrap()
}

/// Looks up a catalog system by id.
pub fn system(id: &str, dim: usize, eps: f64) -> Result<TonelliSystem> {
    match id {
        "free" => {
            if !(1..=2).contains(&dim) {
                return Err(Error::config("dim", "free system supports dim 1 or 2"));
            }
            Ok(free(dim))
        }
        "pendulum" => {
            if dim != 1 {
                return Err(Error::config("dim", "pendulum is one-dimensional"));
            }
            Ok(pendulum())
        }
        "mech2d" => {
            if dim != 2 {
                return Err(Error::config("dim", "mech2d is two-dimensional"));
            }
            Ok(mech2d(eps))
        }
        other => Err(Error::config("system", format!("unknown catalog system `{other}`"))),
    }
}

fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

/// pᵢ (zero-based index).
pub fn momentum(dim: usize, i: usize) -> Observable {
    let poly = TrigPolynomial::new(DMatrix::zeros(dim, dim), vec![0.0; dim], unit(dim, i), vec![]).unwrap();
    Observable::new(format!("p{}", i + 1), Arc::new(poly))
}

/// ½|p|².
pub fn kinetic(dim: usize) -> Observable {
    let poly = TrigPolynomial::new(DMatrix::identity(dim, dim), vec![0.0; dim], vec![0.0; dim], vec![]).unwrap();
    Observable::new("kinetic", Arc::new(poly))
}

fn wave_observable(name: String, dim: usize, i: usize, wave: Wave) -> Observable {
    let mut k = vec![0; dim];
    k[i] = 1;
    let poly = TrigPolynomial::new(
        DMatrix::zeros(dim, dim),
        vec![0.0; dim],
        vec![0.0; dim],
        vec![TrigTerm::potential(wave, k, 1.0)],
    )
    .unwrap();
    Observable::new(name, Arc::new(poly))
}

/// sin(2πxᵢ).
pub fn sin_observable(dim: usize, i: usize) -> Observable {
    wave_observable(format!("sin{}", i + 1), dim, i, Wave::Sin)
}

/// cos(2πxᵢ).
pub fn cos_observable(dim: usize, i: usize) -> Observable {
    wave_observable(format!("cos{}", i + 1), dim, i, Wave::Cos)
}

/// Resolves an observable name: `H`, `p<i>`, `sin<i>`, `cos<i>` or `kinetic` (indices from 1).
pub fn observable(name: &str, sys: &TonelliSystem) -> Result<Observable> {
    let dim = sys.dim();
    let index = |rest: &str| -> Result<usize> {
        let i: usize = rest
            .parse()
            .map_err(|_| Error::config("integrals", format!("bad observable `{name}`")))?;
        if i == 0 || i > dim {
            return Err(Error::config("integrals", format!("`{name}` out of range for dim {dim}")));
        }
        Ok(i - 1)
    };
    match name {
        "H" => Ok(sys.hamiltonian().clone().renamed("H")),
        "kinetic" => Ok(kinetic(dim)),
        _ => {
            if let Some(r) = name.strip_prefix("sin") {
                Ok(sin_observable(dim, index(r)?))
            } else if let Some(r) = name.strip_prefix("cos") {
                Ok(cos_observable(dim, index(r)?))
            } else if let Some(r) = name.strip_prefix('p') {
                Ok(momentum(dim, index(r)?))
            } else {
                Err(Error::config("integrals", format!("unknown observable `{name}`")))
            }
        }
    }
}

/// Parses `cos|sin k1[,k2] alpha [beta1[,beta2]]` terms separated by `;`.
pub fn parse_terms(spec: &str, dim: usize) -> Result<Vec<TrigTerm>> {
    let bad = |m: String| Error::config("terms", m);
    let mut out = Vec::new();
    for raw in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(bad(format!("`{raw}`: expected `wave k alpha [beta]`")));
        }
        let wave = match fields[0] {
            "cos" => Wave::Cos,
            "sin" => Wave::Sin,
            w => return Err(bad(format!("unknown wave `{w}`"))),
        };
        let k: Vec<i32> = fields[1]
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad(format!("bad wave vector in `{raw}`"))))
            .collect::<Result<_>>()?;
        let alpha: f64 = fields[2].parse().map_err(|_| bad(format!("bad amplitude in `{raw}`")))?;
        let beta: Vec<f64> = match fields.get(3) {
            Some(b) => b
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| bad(format!("bad momentum coefficients in `{raw}`"))))
                .collect::<Result<_>>()?,
            None => vec![0.0; dim],
        };
        if k.len() != dim || beta.len() != dim {
            return Err(bad(format!("`{raw}` does not match dim {dim}")));
        }
        out.push(TrigTerm { wave, k, alpha, beta });
    }
    Ok(out)
}
