//! Geodesic flow of a left-invariant metric on SO(3): the generalized rigid body.
//!
//! Body momentum p_b follows Euler's equations ṗ_b = p_b × Ω with Ω = A⁻¹p_b,
//! the attitude follows Ṙ = R·hat(Ω), and the spatial momentum p_s = R p_b is
//! conserved.

use nalgebra::{Matrix3, SMatrix, Vector3};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::weakkam::solver::seeded_rng;

/// Algebra interface of a matrix Lie group: bracket, coadjoint action and exponential.
pub trait LieAlgebra {
    type Element: Copy;
    type Group: Copy;

    fn bracket(a: &Self::Element, b: &Self::Element) -> Self::Element;
    /// ad*_ξ μ, with elements of the dual identified with elements of the algebra.
    fn coadjoint(xi: &Self::Element, mu: &Self::Element) -> Self::Element;
    fn exp(xi: &Self::Element) -> Self::Group;
}

/// so(3) ≅ (R³, ×).
pub struct So3;

impl LieAlgebra for So3 {
    type Element = Vector3<f64>;
    type Group = Matrix3<f64>;

    fn bracket(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
        a.cross(b)
    }

    /// ad*_Ω p = p × Ω.
    fn coadjoint(xi: &Vector3<f64>, mu: &Vector3<f64>) -> Vector3<f64> {
        mu.cross(xi)
    }

    fn exp(xi: &Vector3<f64>) -> Matrix3<f64> {
        rodrigues(xi, xi.norm())
    }
}

/// hat(w) v = w × v.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rotation about the axis of `w` by `angle` (closed form).
fn rodrigues(w: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let norm = w.norm();
    if norm == 0.0 {
        return Matrix3::identity();
    }
    let k = hat(&(w / norm));
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Diagonal inertia operator A: so(3) → so(3)*.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaOperator {
    moments: [f64; 3],
}

impl InertiaOperator {
    pub fn new(moments: [f64; 3]) -> Result<Self> {
        if moments.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::config("inertia", format!("moments must be positive, got {moments:?}")));
        }
        Ok(InertiaOperator { moments })
    }

    pub fn moments(&self) -> [f64; 3] {
        self.moments
    }

    /// Ω = A⁻¹ p.
    pub fn velocity(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(p.x / self.moments[0], p.y / self.moments[1], p.z / self.moments[2])
    }

    fn inverse_diag(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(
            1.0 / self.moments[0],
            1.0 / self.moments[1],
            1.0 / self.moments[2],
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyState {
    pub attitude: Matrix3<f64>,
    pub body_momentum: Vector3<f64>,
}

impl RigidBodyState {
    pub fn new(attitude: Matrix3<f64>, body_momentum: Vector3<f64>) -> Result<Self> {
        if orthogonality_defect(&attitude) > 1e-10 || attitude.determinant() <= 0.0 {
            return Err(Error::config("attitude", "attitude is not a rotation"));
        }
        Ok(RigidBodyState {
            attitude,
            body_momentum,
        })
    }

    pub fn at_rest_frame(body_momentum: Vector3<f64>) -> Self {
        RigidBodyState {
            attitude: Matrix3::identity(),
            body_momentum,
        }
    }

    /// Attitude given as an axis-angle vector.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, body_momentum: Vector3<f64>) -> Self {
        RigidBodyState {
            attitude: So3::exp(&axis_angle),
            body_momentum,
        }
    }
}

/// ‖RᵀR − I‖ (Frobenius).
pub fn orthogonality_defect(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// p_b × A⁻¹p_b.
pub fn euler_rhs(a: &InertiaOperator, p: &Vector3<f64>) -> Vector3<f64> {
    So3::coadjoint(&a.velocity(p), p)
}

fn euler_jacobian(a: &InertiaOperator, p: &Vector3<f64>) -> Matrix3<f64> {
    // d(p × Ω) = δp × Ω + p × A⁻¹δp
    -hat(&a.velocity(p)) + hat(p) * a.inverse_diag()
}

/// How the attitude is advanced from the midpoint body velocity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttitudeMap {
    /// Rotation by the angle 2·atan(dt|Ω|/2) (the Cayley transform of dt·hat(Ω)).
    /// Together with the midpoint update of p_b this keeps R·p_b fixed to round-off.
    Cayley,
    /// exp(dt·hat(Ω)).
    Exponential,
}

#[derive(Clone, Debug)]
pub struct RigidBodyTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<RigidBodyState>,
}

const MIDPOINT_TOL: f64 = 1e-14;
const MIDPOINT_MAX_ITER: usize = 50;

fn polar(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    u * vt
}

/// One implicit-midpoint step for p_b followed by the attitude update.
pub fn rigid_body_step(
    a: &InertiaOperator,
    s: &RigidBodyState,
    dt: f64,
    map: AttitudeMap,
    step: usize,
) -> Result<RigidBodyState> {
    let p0 = s.body_momentum;
    let mut p1 = p0 + euler_rhs(a, &p0) * dt;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..MIDPOINT_MAX_ITER {
        let mid = (p0 + p1) * 0.5;
        let g = p1 - p0 - euler_rhs(a, &mid) * dt;
        residual = g.norm();
        if residual <= MIDPOINT_TOL * (1.0 + p0.norm()) {
            converged = true;
            break;
        }
        let jac = Matrix3::identity() - euler_jacobian(a, &mid) * (0.5 * dt);
        let delta = jac
            .lu()
            .solve(&g)
            .ok_or(Error::StepFailure { step, residual })?;
        p1 -= delta;
    }
    if !converged {
        return Err(Error::StepFailure { step, residual });
    }
    let omega = a.velocity(&((p0 + p1) * 0.5));
    let w = omega * dt;
    let angle = match map {
        AttitudeMap::Cayley => 2.0 * (0.5 * w.norm()).atan(),
        AttitudeMap::Exponential => w.norm(),
    };
    let attitude = polar(&(s.attitude * rodrigues(&w, angle)));
    Ok(RigidBodyState {
        attitude,
        body_momentum: p1,
    })
}

/// Integrates for time t with steps of at most dt, recording every state.
pub fn integrate_rigid_body(a: &InertiaOperator, s0: &RigidBodyState, t: f64, dt: f64) -> Result<RigidBodyTrajectory> {
    integrate_rigid_body_with(a, s0, t, dt, AttitudeMap::Cayley)
}

pub fn integrate_rigid_body_with(
    a: &InertiaOperator,
    s0: &RigidBodyState,
    t: f64,
    dt: f64,
    map: AttitudeMap,
) -> Result<RigidBodyTrajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config("dt", "time step must be positive"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::config("t", "final time must be nonnegative"));
    }
    let (steps, h) = crate::flow::step_plan(t, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(*s0);
    let mut s = *s0;
    for k in 0..steps {
        s = rigid_body_step(a, &s, h, map, k)?;
        if !s.body_momentum.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step: k });
        }
        times.push(if k + 1 == steps { t } else { (k + 1) as f64 * h });
        states.push(s);
    }
    Ok(RigidBodyTrajectory { times, states })
}

/// p_s = R p_b.
pub fn spatial_momentum(s: &RigidBodyState) -> Vector3<f64> {
    s.attitude * s.body_momentum
}

/// (energy ½⟨p, A⁻¹p⟩, Casimir |p|²).
pub fn rigid_body_invariants(a: &InertiaOperator, s: &RigidBodyState) -> (f64, f64) {
    let p = s.body_momentum;
    (0.5 * p.dot(&a.velocity(&p)), p.norm_squared())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConservationSummary {
    pub energy_drift: f64,
    pub casimir_drift: f64,
    pub spatial_momentum_drift: f64,
    pub orthogonality_defect: f64,
}

fn relative(delta: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        delta / scale
    } else {
        delta
    }
}

/// Largest relative drifts along a trajectory and the worst attitude orthogonality.
pub fn conservation_summary(a: &InertiaOperator, traj: &RigidBodyTrajectory) -> ConservationSummary {
    let first = &traj.states[0];
    let (e0, c0) = rigid_body_invariants(a, first);
    let ps0 = spatial_momentum(first);
    let mut out = ConservationSummary {
        energy_drift: 0.0,
        casimir_drift: 0.0,
        spatial_momentum_drift: 0.0,
        orthogonality_defect: 0.0,
    };
    for s in &traj.states {
        let (e, c) = rigid_body_invariants(a, s);
        out.energy_drift = out.energy_drift.max(relative((e - e0).abs(), e0.abs()));
        out.casimir_drift = out.casimir_drift.max(relative((c - c0).abs(), c0.abs()));
        out.spatial_momentum_drift = out
            .spatial_momentum_drift
            .max(relative((spatial_momentum(s) - ps0).norm(), ps0.norm()));
        out.orthogonality_defect = out.orthogonality_defect.max(orthogonality_defect(&s.attitude));
    }
    out
}

impl RigidBodyTrajectory {
    /// CSV `t,R11..R33,pb1,pb2,pb3,ps1,ps2,ps3,energy,casimir`, every `stride`-th state
    /// plus the last one.
    pub fn write_csv<W: std::io::Write>(&self, a: &InertiaOperator, stride: usize, mut w: W) -> Result<()> {
        let stride = stride.max(1);
        let mut header = vec!["t".to_string()];
        for i in 1..=3 {
            for j in 1..=3 {
                header.push(format!("R{i}{j}"));
            }
        }
        for name in ["pb1", "pb2", "pb3", "ps1", "ps2", "ps3", "energy", "casimir"] {
            header.push(name.into());
        }
        writeln!(w, "{}", header.join(","))?;
        let last = self.states.len() - 1;
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            if k % stride != 0 && k != last {
                continue;
            }
            let mut row = vec![t.to_string()];
            for i in 0..3 {
                for j in 0..3 {
                    row.push(s.attitude[(i, j)].to_string());
                }
            }
            let ps = spatial_momentum(s);
            row.extend(s.body_momentum.iter().map(|v| v.to_string()));
            row.extend(ps.iter().map(|v| v.to_string()));
            let (e, c) = rigid_body_invariants(a, s);
            row.push(e.to_string());
            row.push(c.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Seeded random attitudes (uniform axis-angle vectors in the ball of radius π).
pub fn random_attitudes(count: usize, seed: u64) -> Vec<Matrix3<f64>> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let v = Vector3::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            );
            So3::exp(&(v * std::f64::consts::PI / 3f64.sqrt()))
        })
        .collect()
}

/// Seeded random states with attitudes as above and body momenta uniform in [−1, 1]³.
pub fn random_states(count: usize, seed: u64) -> Vec<RigidBodyState> {
    let attitudes = random_attitudes(count, seed);
    let mut rng = seeded_rng(seed.wrapping_add(1));
    attitudes
        .into_iter()
        .map(|r| RigidBodyState {
            attitude: r,
            body_momentum: Vector3::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ),
        })
        .collect()
}

/// Derivative of (R, p_b) ↦ R p_b along body-frame perturbations (δθ, δp):
/// R(δp − p_b × δθ), as a 3×6 matrix.
pub fn momentum_map_differential(s: &RigidBodyState) -> SMatrix<f64, 3, 6> {
    let r = s.attitude;
    let left = -r * hat(&s.body_momentum);
    let mut m = SMatrix::<f64, 3, 6>::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&left);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&r);
    m
}

/// Minimum numerical rank (relative singular-value threshold `sv_tol`) of the
/// momentum-map differential over the states.
pub fn momentum_independence_check(states: &[RigidBodyState], sv_tol: f64) -> usize {
    states
        .iter()
        .map(|s| {
            let sv = momentum_map_differential(s).singular_values();
            let top = sv.max();
            if top == 0.0 {
                0
            } else {
                sv.iter().filter(|v| **v > sv_tol * top).count()
            }
        })
        .min()
        .unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InvolutionCheck {
    /// max |F_i| over the states.
    pub max_momentum: f64,
    /// max over pairs (i, j) of the distance between the momentum values reached by the
    /// i-flow then the j-flow and by the j-flow then the i-flow.
    pub max_commutator: f64,
}

/// The flow of F_i = (R p_b)_i rotates the body about the spatial axis eᵢ:
/// R ↦ exp(t·hat(eᵢ))R with p_b fixed, so p_s ↦ exp(t·hat(eᵢ)) p_s.
fn momentum_flow(i: usize, t: f64, s: &RigidBodyState) -> RigidBodyState {
    let mut axis = Vector3::zeros();
    axis[i] = t;
    RigidBodyState {
        attitude: So3::exp(&axis) * s.attitude,
        body_momentum: s.body_momentum,
    }
}

/// Momentum values and flow-commutator defects of the spatial momentum components
/// over the given states, with flow times s and t.
pub fn momentum_involution_check(states: &[RigidBodyState], s: f64, t: f64) -> InvolutionCheck {
    let mut out = InvolutionCheck {
        max_momentum: 0.0,
        max_commutator: 0.0,
    };
    for st in states {
        out.max_momentum = out.max_momentum.max(spatial_momentum(st).amax());
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let ij = spatial_momentum(&momentum_flow(j, t, &momentum_flow(i, s, st)));
                let ji = spatial_momentum(&momentum_flow(i, s, &momentum_flow(j, t, st)));
                out.max_commutator = out.max_commutator.max((ij - ji).norm());
            }
        }
    }
    out
}

/// The check above on the zero section p_b = 0 at the given attitudes.
pub fn zero_section_involution_check(attitudes: &[Matrix3<f64>], s: f64, t: f64) -> InvolutionCheck {
    let states: Vec<RigidBodyState> = attitudes
        .iter()
        .map(|r| RigidBodyState {
            attitude: *r,
            body_momentum: Vector3::zeros(),
        })
        .collect();
    momentum_involution_check(&states, s, t)
}
