//! Closed-form dynamics of a passive tilted Furuta pendulum.
//!
//! The base joint axis is inclined by a tilt angle `phi` so that gravity
//! actuates both joints and the unforced system has a stable equilibrium at
//! `theta0 = theta1 = 0`. The equations of motion are
//!
//! ```text
//! H(q) q̈ = Q(q̇) + u + B(q, q̇) - G(q)
//! ```
//!
//! with `H` the configuration-dependent inertia matrix, `B` the Coriolis and
//! centrifugal generalized forces, `G` the gravity torques and `Q` the joint
//! friction torques. Friction enters dissipatively, `Q(q̇) = -f(q̇)`, with
//! `f` a continuous five-parameter model per joint: a dynamic (Coulomb-like)
//! term shaped by `tanh`, a rational Stribeck dip, and a viscous term gated
//! by the transition force.
//!
//! All angles are radians, all state is SI. Every function here is pure.

use nalgebra::{Matrix2, Vector2};

/// Determinant threshold below which the inertia matrix is treated as
/// singular. Physical parameter sets sit many orders of magnitude above it.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Mass, geometry and inertia of the two links, plus gravity and tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Arm link mass (kg).
    pub m1: f64,
    /// Pendulum link mass (kg).
    pub m2: f64,
    /// Arm inertia about its joint axis (kg·m²).
    pub j1z: f64,
    /// Pendulum inertia about its x axis (kg·m²).
    pub j2x: f64,
    /// Pendulum inertia about its y axis (kg·m²).
    pub j2y: f64,
    /// Pendulum inertia about its z axis (kg·m²).
    pub j2z: f64,
    /// Arm pivot-to-CG distance (m).
    pub l1: f64,
    /// Pendulum pivot-to-CG distance (m).
    pub l2: f64,
    /// Arm total length (m).
    pub big_l1: f64,
    /// Pendulum total length (m).
    pub big_l2: f64,
    /// Gravitational acceleration (m/s²).
    pub g: f64,
    /// Tilt of the base joint axis (rad), in (0, π/2].
    pub phi: f64,
}

impl PhysicalParams {
    /// Check the structural invariants: strictly positive masses, inertias
    /// and lengths, and a tilt in (0, π/2].
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("j1z", self.j1z),
            ("j2x", self.j2x),
            ("j2y", self.j2y),
            ("j2z", self.j2z),
            ("l1", self.l1),
            ("l2", self.l2),
            ("L1", self.big_l1),
            ("L2", self.big_l2),
            ("g", self.g),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(ModelError::InvalidParam {
                    name,
                    value: v,
                    constraint: "must be finite and strictly positive",
                });
            }
        }
        if !self.phi.is_finite() || self.phi <= 0.0 || self.phi > std::f64::consts::FRAC_PI_2 {
            return Err(ModelError::InvalidParam {
                name: "phi",
                value: self.phi,
                constraint: "must lie in (0, pi/2]",
            });
        }
        Ok(())
    }
}

/// Continuous friction model coefficients for one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionParams {
    /// Dynamic friction coefficient (dimensionless).
    pub mu_d: f64,
    /// Static friction coefficient (dimensionless).
    pub mu_s: f64,
    /// Viscous friction coefficient (N·m·s/rad).
    pub mu_v: f64,
    /// Transition angular velocity shaping the Stribeck dip (rad/s).
    pub theta_dot_t: f64,
    /// Transition force gating the viscous term (N).
    pub f_nt: f64,
}

impl FrictionParams {
    /// All five coefficients, in the canonical ordering used by the
    /// identification stack: `[mu_d, mu_s, mu_v, theta_dot_t, f_nt]`.
    pub fn to_array(self) -> [f64; 5] {
        [self.mu_d, self.mu_s, self.mu_v, self.theta_dot_t, self.f_nt]
    }

    /// Inverse of [`FrictionParams::to_array`].
    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            mu_d: a[0],
            mu_s: a[1],
            mu_v: a[2],
            theta_dot_t: a[3],
            f_nt: a[4],
        }
    }

    /// `theta_dot_t` and `f_nt` sit in denominators, so every field must be
    /// strictly positive.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("mu_d", self.mu_d),
            ("mu_s", self.mu_s),
            ("mu_v", self.mu_v),
            ("theta_dot_t", self.theta_dot_t),
            ("f_nt", self.f_nt),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(ModelError::InvalidParam {
                    name,
                    value: v,
                    constraint: "must be finite and strictly positive",
                });
            }
        }
        Ok(())
    }
}

/// Joint angles and angular velocities `(theta0, theta1, omega0, omega1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub theta0: f64,
    pub theta1: f64,
    pub omega0: f64,
    pub omega1: f64,
}

impl State {
    pub fn new(theta0: f64, theta1: f64, omega0: f64, omega1: f64) -> Self {
        Self {
            theta0,
            theta1,
            omega0,
            omega1,
        }
    }

    pub fn to_vector(self) -> nalgebra::SVector<f64, 4> {
        nalgebra::SVector::<f64, 4>::new(self.theta0, self.theta1, self.omega0, self.omega1)
    }

    pub fn from_vector(v: &nalgebra::SVector<f64, 4>) -> Self {
        Self {
            theta0: v[0],
            theta1: v[1],
            omega0: v[2],
            omega1: v[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta0.is_finite()
            && self.theta1.is_finite()
            && self.omega0.is_finite()
            && self.omega1.is_finite()
    }
}

/// Generalized torques applied at the two joints (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneralizedForces {
    pub tau0: f64,
    pub tau1: f64,
}

impl GeneralizedForces {
    pub const ZERO: Self = Self {
        tau0: 0.0,
        tau1: 0.0,
    };

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.tau0, self.tau1)
    }
}

/// Which joint a quantity refers to: 0 is the arm (base) joint, 1 the
/// pendulum joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Joint {
    Arm,
    Pendulum,
}

/// Strategy for the normal force carried by each joint bearing.
///
/// The friction model scales with the joint normal force, but its exact
/// dependence on the state is not fixed by the dynamics; implementations can
/// range from static weight sums to full reaction-force models.
pub trait NormalForceModel {
    fn normal_force(&self, p: &PhysicalParams, s: &State, joint: Joint) -> f64;
}

/// Default provider: each joint statically bears the weight of the links
/// below it, independent of the state.
#[derive(Debug, Clone, Copy, Default)]
pub struct StaticWeights;

impl NormalForceModel for StaticWeights {
    fn normal_force(&self, p: &PhysicalParams, _s: &State, joint: Joint) -> f64 {
        match joint {
            Joint::Arm => (p.m1 + p.m2) * p.g,
            Joint::Pendulum => p.m2 * p.g,
        }
    }
}

/// Errors from the dynamics layer.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("parameter `{name}` = {value} {constraint}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("inertia matrix is numerically singular (|det H| = {det:e})")]
    SingularInertia { det: f64 },
}

/// Generalized inertia matrix `H(q)`. Symmetric by construction; depends on
/// the pendulum angle only.
pub fn eval_h(p: &PhysicalParams, s: &State) -> Matrix2<f64> {
    let (sin1, cos1) = s.theta1.sin_cos();
    let h11 = p.j1z
        + p.m1 * p.l1 * p.l1
        + (p.m2 * p.l2 * p.l2 + p.j2y) * sin1 * sin1
        + p.j2z * cos1 * cos1;
    let h12 = -p.m2 * p.l2 * p.big_l1 * cos1;
    let h22 = p.j2x + p.m2 * p.l2 * p.l2;
    Matrix2::new(h11, h12, h12, h22)
}

/// Coriolis and centrifugal generalized forces `B(q, q̇)`.
pub fn eval_b(p: &PhysicalParams, s: &State) -> Vector2<f64> {
    let (sin1, cos1) = s.theta1.sin_cos();
    let m2l2sq = p.m2 * p.l2 * p.l2;
    let b0 = -(m2l2sq - p.j2y + p.j2x) * (2.0 * s.theta1).sin() * s.omega0 * s.omega1
        - p.m2 * p.l2 * p.big_l1 * sin1 * s.omega1 * s.omega1;
    let b1 = (m2l2sq - p.j2y + p.j2z) * sin1 * cos1 * s.omega0 * s.omega0;
    Vector2::new(b0, b1)
}

/// Gravity generalized forces `G(q)`. Both components vanish at the
/// equilibrium `theta0 = theta1 = 0`; the tilt couples gravity into the arm
/// joint through `sin(phi)`.
pub fn eval_g(p: &PhysicalParams, s: &State) -> Vector2<f64> {
    let (sin0, cos0) = s.theta0.sin_cos();
    let (sin1, cos1) = s.theta1.sin_cos();
    let (sin_phi, cos_phi) = p.phi.sin_cos();
    let g0 = p.m1 * p.g * p.l1 * sin0 * sin_phi
        + p.m2 * p.g * (p.big_l1 * sin0 - p.l2 * sin1 * cos0) * sin_phi;
    let g1 = -p.m2 * p.g * p.l2 * (sin0 * cos1 * sin_phi - sin1 * cos_phi);
    Vector2::new(g0, g1)
}

/// Gravitational potential whose gradient is [`eval_g`]. Reference level:
/// zero where both link CGs cross the base plane.
pub fn potential_energy(p: &PhysicalParams, s: &State) -> f64 {
    let (sin_phi, cos_phi) = p.phi.sin_cos();
    -p.m1 * p.g * p.l1 * s.theta0.cos() * sin_phi
        - p.m2
            * p.g
            * (p.big_l1 * s.theta0.cos() + p.l2 * s.theta1.sin() * s.theta0.sin())
            * sin_phi
        - p.m2 * p.g * p.l2 * s.theta1.cos() * cos_phi
}

/// Total mechanical energy `½ q̇ᵀ H q̇ + V(q)`.
pub fn total_energy(p: &PhysicalParams, s: &State) -> f64 {
    let qd = Vector2::new(s.omega0, s.omega1);
    0.5 * (qd.transpose() * eval_h(p, s) * qd)[(0, 0)] + potential_energy(p, s)
}

/// Friction torque of one joint at angular velocity `omega` under normal
/// force `f_n`: dynamic `tanh` term + rational Stribeck term + gated viscous
/// term. Odd in `omega`, zero at rest.
pub fn friction_torque(fp: &FrictionParams, omega: f64, f_n: f64) -> f64 {
    let r = omega / fp.theta_dot_t;
    let dynamic = f_n * fp.mu_d * (4.0 * r).tanh();
    let stribeck = f_n * (fp.mu_s - fp.mu_d) * r / (0.25 * r * r + 0.75);
    let viscous = fp.mu_v * omega * (4.0 * f_n / fp.f_nt).tanh();
    dynamic + stribeck + viscous
}

/// Time derivative of the full state under applied torque `u`:
/// `(ω0, ω1, H⁻¹(-f(ω) + u + B - G))`.
///
/// `u = 0` is the passive plant; the observer passes its own input here.
/// Fails when `|det H|` drops below [`SINGULARITY_TOL`], which only happens
/// for non-physical parameter sets.
pub fn dynamics_rhs<N: NormalForceModel + ?Sized>(
    p: &PhysicalParams,
    fp0: &FrictionParams,
    fp1: &FrictionParams,
    normal: &N,
    s: &State,
    u: GeneralizedForces,
) -> Result<nalgebra::SVector<f64, 4>, ModelError> {
    let h = eval_h(p, s);
    let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
    if det.abs() < SINGULARITY_TOL {
        return Err(ModelError::SingularInertia { det });
    }
    let f_n0 = normal.normal_force(p, s, Joint::Arm);
    let f_n1 = normal.normal_force(p, s, Joint::Pendulum);
    let friction = Vector2::new(
        -friction_torque(fp0, s.omega0, f_n0),
        -friction_torque(fp1, s.omega1, f_n1),
    );
    let rhs = friction + u.to_vector() + eval_b(p, s) - eval_g(p, s);
    // 2x2 solve by the adjugate; cheaper and exact enough at this scale.
    let acc0 = (h[(1, 1)] * rhs[0] - h[(0, 1)] * rhs[1]) / det;
    let acc1 = (-h[(1, 0)] * rhs[0] + h[(0, 0)] * rhs[1]) / det;
    Ok(nalgebra::SVector::<f64, 4>::new(
        s.omega0, s.omega1, acc0, acc1,
    ))
}

/// The pendulum and adaptation defaults used throughout the test rig; a
/// 0.37 kg arm with a 0.128 kg pendulum on a tilted base.
pub mod reference {
    use super::{FrictionParams, PhysicalParams};

    /// Bench model parameters. The tilt here is 1 rad; any value in
    /// (0, π/2] is valid.
    pub fn physical_params(phi: f64) -> PhysicalParams {
        PhysicalParams {
            m1: 0.370,
            m2: 0.128,
            j1z: 3.09e-3,
            j2x: 5.25e-3,
            j2y: 5.25e-3,
            j2z: 2.91e-6,
            l1: 0.0620,
            l2: 0.0620,
            big_l1: 0.216,
            big_l2: 0.316,
            g: 9.81,
            phi,
        }
    }

    /// Arm-joint friction coefficients of the bench model.
    pub fn friction_arm() -> FrictionParams {
        FrictionParams {
            mu_d: 5e-4,
            mu_s: 6e-4,
            mu_v: 2.5e-4,
            theta_dot_t: 5e-3,
            f_nt: 10e-3,
        }
    }

    /// Pendulum-joint friction coefficients of the bench model.
    pub fn friction_pendulum() -> FrictionParams {
        FrictionParams {
            mu_d: 6e-4,
            mu_s: 7e-4,
            mu_v: 2.5e-4,
            theta_dot_t: 5e-3,
            f_nt: 10e-3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn params() -> PhysicalParams {
        reference::physical_params(0.3)
    }

    #[test]
    fn h_off_diagonal_vanishes_at_quarter_turn() {
        let s = State::new(0.0, FRAC_PI_2, 0.0, 0.0);
        let h = eval_h(&params(), &s);
        assert_abs_diff_eq!(h[(0, 1)], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(h[(1, 0)], 0.0, epsilon = 1e-16);
    }

    #[test]
    fn h_at_zero_matches_hand_evaluation() {
        let h = eval_h(&params(), &State::default());
        assert_relative_eq!(h[(0, 0)], 0.00451519, max_relative = 1e-12);
        assert_relative_eq!(h[(0, 1)], -0.001714176, max_relative = 1e-12);
        assert_relative_eq!(h[(1, 1)], 5.742032e-3, max_relative = 1e-12);
    }

    #[test]
    fn h_is_symmetric_everywhere() {
        for i in 0..100 {
            let th1 = -PI + 2.0 * PI * (i as f64) / 99.0;
            let h = eval_h(&params(), &State::new(0.3, th1, 0.0, 0.0));
            assert_eq!(h[(0, 1)], h[(1, 0)]);
        }
    }

    #[test]
    fn b_vanishes_at_rest() {
        let b = eval_b(&params(), &State::new(0.4, -1.2, 0.0, 0.0));
        assert_eq!(b, Vector2::zeros());
    }

    #[test]
    fn b_second_component_vanishes_with_pendulum_angle() {
        let b = eval_b(&params(), &State::new(0.1, 0.0, 2.0, -3.0));
        assert_abs_diff_eq!(b[1], 0.0, epsilon = 1e-16);
    }

    #[test]
    fn b_hand_evaluated_point() {
        let b = eval_b(&params(), &State::new(0.0, FRAC_PI_4, 1.0, 0.0));
        assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-16);
        assert_relative_eq!(b[1], -2.377529e-3, max_relative = 1e-9);
    }

    #[test]
    fn gravity_vanishes_at_equilibrium() {
        let g = eval_g(&params(), &State::default());
        assert_eq!(g, Vector2::zeros());
    }

    #[test]
    fn untilted_limit_decouples_arm_joint() {
        let mut p = params();
        p.phi = 0.0; // bypasses validate() deliberately: the untilted limit
        let g = eval_g(&p, &State::new(0.7, 0.5, 0.0, 0.0));
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-16);
        assert_relative_eq!(
            g[1],
            p.m2 * p.g * p.l2 * 0.5_f64.sin(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gravity_hand_evaluated_point() {
        let g = eval_g(&params(), &State::new(0.1, 0.2, 0.0, 0.0));
        assert_relative_eq!(g[0], 0.010093371848870878, max_relative = 1e-12);
        assert_relative_eq!(g[1], 0.012524961431563482, max_relative = 1e-12);
    }

    #[test]
    fn gravity_is_gradient_of_potential() {
        let p = params();
        let h = 1e-6;
        for (th0, th1) in [(0.2, -0.9), (-1.1, 0.4), (2.0, 2.5)] {
            let g = eval_g(&p, &State::new(th0, th1, 0.0, 0.0));
            let dv0 = (potential_energy(&p, &State::new(th0 + h, th1, 0.0, 0.0))
                - potential_energy(&p, &State::new(th0 - h, th1, 0.0, 0.0)))
                / (2.0 * h);
            let dv1 = (potential_energy(&p, &State::new(th0, th1 + h, 0.0, 0.0))
                - potential_energy(&p, &State::new(th0, th1 - h, 0.0, 0.0)))
                / (2.0 * h);
            assert_abs_diff_eq!(g[0], dv0, epsilon = 1e-8);
            assert_abs_diff_eq!(g[1], dv1, epsilon = 1e-8);
        }
    }

    #[test]
    fn friction_zero_at_rest() {
        let fp = reference::friction_arm();
        assert_eq!(friction_torque(&fp, 0.0, 4.9), 0.0);
    }

    #[test]
    fn friction_is_odd() {
        let fp = reference::friction_pendulum();
        for omega in [1e-4, 3e-3, 0.1, 2.0, 40.0] {
            let plus = friction_torque(&fp, omega, 1.2556);
            let minus = friction_torque(&fp, -omega, 1.2556);
            assert_abs_diff_eq!(plus, -minus, epsilon = 1e-18);
        }
    }

    #[test]
    fn friction_at_transition_velocity() {
        // At omega = theta_dot_t the Stribeck fraction collapses to 1.
        let fp = reference::friction_arm();
        let f_n = 4.88538;
        let expected = 0.0029308396871796216;
        let got = friction_torque(&fp, fp.theta_dot_t, f_n);
        assert_relative_eq!(got, expected, max_relative = 1e-12);
    }

    #[test]
    fn normal_force_static_weights() {
        let p = params();
        let s = State::default();
        assert_relative_eq!(
            StaticWeights.normal_force(&p, &s, Joint::Arm),
            4.88538,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            StaticWeights.normal_force(&p, &s, Joint::Pendulum),
            1.25568,
            max_relative = 1e-12
        );
    }

    #[test]
    fn normal_force_zero_for_massless_pendulum() {
        let mut p = params();
        p.m2 = 0.0;
        assert_eq!(
            StaticWeights.normal_force(&p, &State::default(), Joint::Pendulum),
            0.0
        );
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = params();
        let d = dynamics_rhs(
            &p,
            &reference::friction_arm(),
            &reference::friction_pendulum(),
            &StaticWeights,
            &State::default(),
            GeneralizedForces::ZERO,
        )
        .unwrap();
        assert_eq!(d, nalgebra::SVector::<f64, 4>::zeros());
    }

    #[test]
    fn accelerations_at_rest_ignore_friction() {
        let p = params();
        let s = State::new(0.3, 1.0, 0.0, 0.0);
        let lo = FrictionParams {
            mu_d: 1e-6,
            mu_s: 1e-6,
            mu_v: 1e-6,
            theta_dot_t: 1e-3,
            f_nt: 1e-3,
        };
        let hi = FrictionParams {
            mu_d: 0.5,
            mu_s: 0.9,
            mu_v: 0.3,
            theta_dot_t: 2.0,
            f_nt: 5.0,
        };
        let a = dynamics_rhs(&p, &lo, &lo, &StaticWeights, &s, GeneralizedForces::ZERO).unwrap();
        let b = dynamics_rhs(&p, &hi, &hi, &StaticWeights, &s, GeneralizedForces::ZERO).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singular_inertia_is_reported() {
        let mut p = params();
        // Degenerate inertia: zero out the pendulum row.
        p.j2x = 1e-30;
        p.m2 = 1e-30;
        let err = dynamics_rhs(
            &p,
            &reference::friction_arm(),
            &reference::friction_pendulum(),
            &StaticWeights,
            &State::default(),
            GeneralizedForces::ZERO,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::SingularInertia { .. }));
    }

    #[test]
    fn validate_rejects_nonpositive_and_bad_tilt() {
        let mut p = params();
        p.m1 = 0.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.phi = 0.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.phi = 2.0;
        assert!(p.validate().is_err());
        assert!(params().validate().is_ok());

        let mut fp = reference::friction_arm();
        fp.theta_dot_t = 0.0;
        assert!(fp.validate().is_err());
        assert!(reference::friction_arm().validate().is_ok());
    }
}
