//! Task-space impedance control laws.
//!
//! Every law produces a task-space wrench `T~` and joint torques
//! `T = J^T T~` for its frame Jacobian. The body-frame laws use
//! `M~ dV^b + C~ V^b + G~ = T~` (see [`crate::dynamics::task_space_dynamics`]).
//!
//! | name        | wrench                                                          |
//! |-------------|-----------------------------------------------------------------|
//! | `gic1`      | `M~ dV_d* + C~ V_d* + G~ - f_g - K_d e_V`                        |
//! | `gic2`      | `M~ dVbar_d + C~ Vbar_d + G~ - f_g - K_d ebar_V`                 |
//! | `intuitive` | `M~ dV_d* + C~ V_d* + G~ - K_g e_g - K_d e_V`                    |
//! | `benchmark` | `M~s dV_d^s + C~s V^s + G~s - K_g e_g^s - K_d e_V^s` (base axes) |
//! | `pd`        | `-K_g e_g - K_d e_V`, no model                                  |

use std::fmt;
use std::str::FromStr;

use crate::dynamics::{joint_dynamics, task_space_dynamics, Frame, JointDynamics, JointState, TaskSpaceDynamics};
use crate::error::{GicError, Result};
use crate::geometry::{
    desired_accel_star, desired_velocity_star, elastic_force, error_function, position_error,
    potential, spatial_errors, stiffness_jacobian, DesiredState, Gains,
};
use crate::kinematics::{body_jacobian, forward_kinematics, JointVector, RobotModel};
use crate::se3::{Pose, Twist, Vec6};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    Gic1,
    Gic2,
    Intuitive,
    Benchmark,
    Pd,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::Gic1,
        ControllerKind::Gic2,
        ControllerKind::Intuitive,
        ControllerKind::Benchmark,
        ControllerKind::Pd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Gic1 => "gic1",
            ControllerKind::Gic2 => "gic2",
            ControllerKind::Intuitive => "intuitive",
            ControllerKind::Benchmark => "benchmark",
            ControllerKind::Pd => "pd",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = GicError;

    fn from_str(s: &str) -> Result<Self> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GicError::UnknownController(s.to_string()))
    }
}

/// Snapshot of the error quantities seen by a controller.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub psi: f64,
    /// Potential `P`.
    pub potential: f64,
    /// `1/2 e^T M~ e` for the velocity error the law damps.
    pub kinetic: f64,
    /// Position error (`e_g`, or `e_g^s` for the benchmark).
    pub e_g: Vec6,
    /// Velocity error (`e_V`, or `e_V^s` for the benchmark).
    pub e_v: Vec6,
    /// Spring wrench applied by the law.
    pub f_g: Vec6,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub tau: JointVector,
    pub wrench: Vec6,
    pub diagnostics: Diagnostics,
}

/// Current pose, body velocity and body-frame task-space dynamics.
struct BodyState {
    g: Pose,
    v_b: Twist,
    ts: TaskSpaceDynamics,
}

fn body_state(model: &RobotModel, state: &JointState) -> Result<BodyState> {
    state.validate(model)?;
    let g = forward_kinematics(model, &state.q)?;
    let ts = task_space_dynamics(model, &state.q, &state.qdot, Frame::Body)?;
    let v_b = Twist::from_vector(&Vec6::from_iterator(
        (&ts.jacobian * &state.qdot).iter().copied(),
    ));
    Ok(BodyState { g, v_b, ts })
}

fn kinetic(ts: &TaskSpaceDynamics, e: &Vec6) -> f64 {
    0.5 * e.dot(&(ts.mt * e))
}

/// Shared shape of the model-based body-frame laws:
/// `M~ a_ref + C~ v_ref + G~ - spring - K_d e`.
fn model_based(
    b: &BodyState,
    a_ref: &Vec6,
    v_ref: &Vec6,
    spring: Vec6,
    e: &Vec6,
    des: &DesiredState,
    gains: &Gains,
) -> ControlOutput {
    let ts = &b.ts;
    let wrench = ts.mt * a_ref + ts.ct * v_ref + ts.gt - spring - gains.kd * e;
    ControlOutput {
        tau: ts.torque(&wrench),
        wrench,
        diagnostics: Diagnostics {
            psi: error_function(&b.g, &des.gd),
            potential: potential(&b.g, &des.gd, gains),
            kinetic: kinetic(ts, e),
            e_g: position_error(&b.g, &des.gd),
            e_v: *e,
            f_g: spring,
        },
    }
}

pub fn gic1(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<ControlOutput> {
    gic1_with_dynamics(model, state, des, gains).map(|(out, _)| out)
}

fn gic1_with_dynamics(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<(ControlOutput, JointDynamics)> {
    let b = body_state(model, state)?;
    let v_star = desired_velocity_star(&b.g, des).to_vector();
    let a_star = desired_accel_star(&b.g, &b.v_b, des).to_vector();
    let e_v = b.v_b.to_vector() - v_star;
    let f_g = elastic_force(&b.g, &des.gd, gains);
    Ok((model_based(&b, &a_star, &v_star, f_g, &e_v, des, gains), b.ts.joint))
}

/// Second geometric law, built on the reference velocity
/// `Vbar_d = V_d* - lambda f_g`. The reported velocity error is
/// `ebar_V = e_V + lambda f_g`.
pub fn gic2(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<ControlOutput> {
    gic2_with_dynamics(model, state, des, gains).map(|(out, _)| out)
}

fn gic2_with_dynamics(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<(ControlOutput, JointDynamics)> {
    let b = body_state(model, state)?;
    let lambda = gains.lambda_g;
    let v_star = desired_velocity_star(&b.g, des).to_vector();
    let a_star = desired_accel_star(&b.g, &b.v_b, des).to_vector();
    let e_v = b.v_b.to_vector() - v_star;
    let f_g = elastic_force(&b.g, &des.gd, gains);
    let b_k = stiffness_jacobian(&b.g, &des.gd, gains);
    let v_ref = v_star - f_g * lambda;
    let a_ref = a_star - b_k * e_v * lambda;
    let e_bar = e_v + f_g * lambda;
    Ok((model_based(&b, &a_ref, &v_ref, f_g, &e_bar, des, gains), b.ts.joint))
}

pub fn intuitive_impedance(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<ControlOutput> {
    intuitive_impedance_with_dynamics(model, state, des, gains).map(|(out, _)| out)
}

fn intuitive_impedance_with_dynamics(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<(ControlOutput, JointDynamics)> {
    let b = body_state(model, state)?;
    let v_star = desired_velocity_star(&b.g, des).to_vector();
    let a_star = desired_accel_star(&b.g, &b.v_b, des).to_vector();
    let e_v = b.v_b.to_vector() - v_star;
    let spring = gains.kg() * position_error(&b.g, &des.gd);
    Ok((model_based(&b, &a_star, &v_star, spring, &e_v, des, gains), b.ts.joint))
}

/// Conventional base-frame impedance law used as the comparison baseline.
/// Velocities are `V^s = [d/dt p; w^s]` (base axes, end-effector origin),
/// the dynamics are transformed with the matching Jacobian, and the desired
/// velocity is `[d/dt p_d; w_d^s]`.
pub fn benchmark_spatial(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<ControlOutput> {
    benchmark_spatial_with_dynamics(model, state, des, gains).map(|(out, _)| out)
}

fn benchmark_spatial_with_dynamics(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<(ControlOutput, JointDynamics)> {
    state.validate(model)?;
    let g = forward_kinematics(model, &state.q)?;
    let ts = task_space_dynamics(model, &state.q, &state.qdot, Frame::World)?;
    let v_s = Vec6::from_iterator((&ts.jacobian * &state.qdot).iter().copied());
    let vd_s = des.spatial_velocity();
    let ad_s = des.spatial_acceleration().to_vector();
    let (e_g, e_v) = spatial_errors(&g, &des.gd, &Twist::from_vector(&v_s), &vd_s);
    let spring = gains.kg() * e_g;
    let wrench = ts.mt * ad_s + ts.ct * v_s + ts.gt - spring - gains.kd * e_v;
    let out = ControlOutput {
        tau: ts.torque(&wrench),
        wrench,
        diagnostics: Diagnostics {
            psi: error_function(&g, &des.gd),
            potential: potential(&g, &des.gd, gains),
            kinetic: kinetic(&ts, &e_v),
            e_g,
            e_v,
            f_g: spring,
        },
    };
    Ok((out, ts.joint))
}

/// Model-free wrench `-K_g e_g - K_d e_V`.
pub fn pd_wrench(g: &Pose, v_b: &Twist, des: &DesiredState, gains: &Gains) -> Vec6 {
    let e_g = position_error(g, &des.gd);
    let e_v = v_b.to_vector() - desired_velocity_star(g, des).to_vector();
    -(gains.kg() * e_g) - gains.kd * e_v
}

/// PD law on the body-frame errors, mapped through `J_b^T` only. It needs
/// neither the dynamics model nor a Jacobian inverse, so it stays defined
/// at singular configurations and is the fallback there.
pub fn pd_fallback(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<ControlOutput> {
    pd_fallback_with_dynamics(model, state, des, gains).map(|(out, _)| out)
}

fn pd_fallback_with_dynamics(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<(ControlOutput, JointDynamics)> {
    state.validate(model)?;
    let g = forward_kinematics(model, &state.q)?;
    let jb = body_jacobian(model, &state.q)?;
    let v_b = Twist::from_vector(&Vec6::from_iterator((&jb * &state.qdot).iter().copied()));
    let wrench = pd_wrench(&g, &v_b, des, gains);
    let e_g = position_error(&g, &des.gd);
    let e_v = v_b.to_vector() - desired_velocity_star(&g, des).to_vector();
    let out = ControlOutput {
        tau: jb.transpose() * wrench,
        wrench,
        diagnostics: Diagnostics {
            psi: error_function(&g, &des.gd),
            potential: potential(&g, &des.gd, gains),
            kinetic: 0.0,
            e_g,
            e_v,
            f_g: gains.kg() * e_g,
        },
    };
    Ok((out, joint_dynamics(model, &state.q, &state.qdot)?))
}

/// Dispatches on the controller name.
pub fn evaluate(
    kind: ControllerKind,
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<ControlOutput> {
    evaluate_with_dynamics(kind, model, state, des, gains).map(|(out, _)| out)
}

/// [`evaluate`] that also hands back the joint-space dynamics computed on the
/// way, so a simulator does not have to rebuild them.
pub fn evaluate_with_dynamics(
    kind: ControllerKind,
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<(ControlOutput, JointDynamics)> {
    match kind {
        ControllerKind::Gic1 => gic1_with_dynamics(model, state, des, gains),
        ControllerKind::Gic2 => gic2_with_dynamics(model, state, des, gains),
        ControllerKind::Intuitive => intuitive_impedance_with_dynamics(model, state, des, gains),
        ControllerKind::Benchmark => benchmark_spatial_with_dynamics(model, state, des, gains),
        ControllerKind::Pd => pd_fallback_with_dynamics(model, state, des, gains),
    }
}
