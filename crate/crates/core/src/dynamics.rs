//! Joint-space rigid-body dynamics `M(q) qdd + C(q, qd) qd + G(q) = T + T_e`
//! and its task-space form
//!
//! ```text
//! Mt = J^-T M J^-1,  Ct = J^-T (C - M J^-1 Jdot) J^-1,  Gt = J^-T G
//! ```
//!
//! where `J` is the body, spatial or world Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{GicError, Result};
use crate::kinematics::{
    body_jacobian_rate, link_jacobians, shift_to_point, JointVector, Jacobian, RobotModel,
};
use crate::se3::{ad, hat3, Mat6, Pose, Twist, Vec3, Vec6};

/// Task-space dynamics are refused above this Jacobian condition number.
pub const MAX_JACOBIAN_CONDITION: f64 = 1e8;

pub type JointMatrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: JointVector,
    pub qdot: JointVector,
}

impl JointState {
    pub fn new(q: JointVector, qdot: JointVector) -> Self {
        Self { q, qdot }
    }

    pub fn at_rest(q: JointVector) -> Self {
        let n = q.len();
        Self::new(q, JointVector::zeros(n))
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        let n = model.dof();
        for len in [self.q.len(), self.qdot.len()] {
            if len != n {
                return Err(GicError::DimensionMismatch { expected: n, got: len });
            }
        }
        if !self.q.iter().chain(self.qdot.iter()).all(|x| x.is_finite()) {
            return Err(GicError::InvalidModel("joint state has non-finite entries".into()));
        }
        Ok(())
    }
}

/// How `dM/dq` is obtained for the Christoffel symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassDerivative {
    /// Closed form from the link Jacobian derivatives.
    #[default]
    Analytic,
    /// Central differences with step `1e-6 (1 + |q_t|)`.
    FiniteDifference,
}

/// Generalized inertia `blkdiag(m I, I_c)` of a link in its COM frame.
fn spatial_inertia(model: &RobotModel, k: usize) -> Mat6 {
    let link = &model.links[k];
    let mut g = Mat6::zeros();
    g.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(nalgebra::Matrix3::identity() * link.mass));
    g.fixed_view_mut::<3, 3>(3, 3).copy_from(&link.inertia);
    g
}

fn check_len(model: &RobotModel, x: &JointVector) -> Result<()> {
    if x.len() != model.dof() {
        return Err(GicError::DimensionMismatch {
            expected: model.dof(),
            got: x.len(),
        });
    }
    Ok(())
}

fn columns(j: &Jacobian, count: usize) -> Vec<Vec6> {
    (0..count).map(|c| j.column(c).into_owned()).collect()
}

fn mass_from_links(model: &RobotModel, links: &[(Pose, Jacobian)]) -> JointMatrix {
    let n = model.dof();
    let mut m = JointMatrix::from_diagonal(&DVector::from_column_slice(&model.armature));
    for (k, (_, jk)) in links.iter().enumerate() {
        let gk = spatial_inertia(model, k);
        let cols = columns(jk, k + 1);
        let weighted: Vec<Vec6> = cols.iter().map(|c| gk * c).collect();
        for i in 0..=k {
            for j in 0..=i {
                let v = cols[i].dot(&weighted[j]);
                m[(i, j)] += v;
                if i != j {
                    m[(j, i)] += v;
                }
            }
        }
    }
    debug_assert_eq!(m.nrows(), n);
    m
}

/// `M(q) = sum_k J_k^T blkdiag(m_k I, I_k) J_k + diag(armature)` over link COM
/// body Jacobians.
pub fn mass_matrix(model: &RobotModel, q: &JointVector) -> Result<JointMatrix> {
    let links = link_jacobians(model, q)?;
    Ok(mass_from_links(model, &links))
}

/// `dM/dq_t` for every `t`.
pub fn mass_matrix_derivatives(
    model: &RobotModel,
    q: &JointVector,
    method: MassDerivative,
) -> Result<Vec<JointMatrix>> {
    check_len(model, q)?;
    let n = model.dof();
    match method {
        MassDerivative::Analytic => {
            let links = link_jacobians(model, q)?;
            Ok(mass_derivatives_from_links(model, &links))
        }
        MassDerivative::FiniteDifference => (0..n)
            .map(|t| {
                let h = 1e-6 * (1.0 + q[t].abs());
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[t] += h;
                qm[t] -= h;
                Ok((mass_matrix(model, &qp)? - mass_matrix(model, &qm)?) / (2.0 * h))
            })
            .collect(),
    }
}

/// Column `j` of a link body Jacobian depends on `q_t` for `t > j` only, with
/// `dJ_j/dq_t = -ad(J_t) J_j`.
fn mass_derivatives_from_links(model: &RobotModel, links: &[(Pose, Jacobian)]) -> Vec<JointMatrix> {
    let n = model.dof();
    let mut out = vec![JointMatrix::zeros(n, n); n];
    for (k, (_, jk)) in links.iter().enumerate() {
        let gk = spatial_inertia(model, k);
        let cols = columns(jk, k + 1);
        let weighted: Vec<Vec6> = cols.iter().map(|c| gk * c).collect();
        for t in 1..=k {
            let ad_t = ad(&Twist::from_vector(&cols[t]));
            for j in 0..t {
                let dj = -(ad_t * cols[j]);
                for s in 0..=k {
                    let v = dj.dot(&weighted[s]);
                    out[t][(j, s)] += v;
                    out[t][(s, j)] += v;
                }
            }
        }
    }
    out
}

fn christoffel(dm: &[JointMatrix], qdot: &JointVector) -> JointMatrix {
    let n = qdot.len();
    JointMatrix::from_fn(n, n, |r, s| {
        0.5 * (0..n)
            .map(|t| (dm[t][(r, s)] + dm[s][(t, r)] - dm[r][(t, s)]) * qdot[t])
            .sum::<f64>()
    })
}

/// Coriolis matrix from the Christoffel symbols of the first kind:
/// `C_rs = 1/2 sum_t (dM_rs/dq_t + dM_tr/dq_s - dM_ts/dq_r) qd_t`.
pub fn coriolis_matrix(model: &RobotModel, q: &JointVector, qdot: &JointVector) -> Result<JointMatrix> {
    coriolis_matrix_with(model, q, qdot, MassDerivative::default())
}

pub fn coriolis_matrix_with(
    model: &RobotModel,
    q: &JointVector,
    qdot: &JointVector,
    method: MassDerivative,
) -> Result<JointMatrix> {
    check_len(model, qdot)?;
    let dm = mass_matrix_derivatives(model, q, method)?;
    Ok(christoffel(&dm, qdot))
}

fn gravity_from_links(model: &RobotModel, links: &[(Pose, Jacobian)]) -> JointVector {
    let n = model.dof();
    let mut g = JointVector::zeros(n);
    for (k, (pose, jk)) in links.iter().enumerate() {
        // body-frame gravity force on the COM
        let f_body = pose.rotation.transpose() * model.gravity * model.links[k].mass;
        let mut wrench = Vec6::zeros();
        wrench.fixed_rows_mut::<3>(0).copy_from(&f_body);
        g -= jk.transpose() * wrench;
    }
    g
}

/// `G(q) = dU/dq` with `U = -sum_k m_k gravity . p_k(q)`.
pub fn gravity_vector(model: &RobotModel, q: &JointVector) -> Result<JointVector> {
    let links = link_jacobians(model, q)?;
    Ok(gravity_from_links(model, &links))
}

/// `M`, `C` and `G` evaluated together.
#[derive(Debug, Clone)]
pub struct JointDynamics {
    pub mass: JointMatrix,
    pub coriolis: JointMatrix,
    pub gravity: JointVector,
}

pub fn joint_dynamics(model: &RobotModel, q: &JointVector, qdot: &JointVector) -> Result<JointDynamics> {
    check_len(model, qdot)?;
    let links = link_jacobians(model, q)?;
    let dm = mass_derivatives_from_links(model, &links);
    Ok(JointDynamics {
        mass: mass_from_links(model, &links),
        coriolis: christoffel(&dm, qdot),
        gravity: gravity_from_links(model, &links),
    })
}

/// `qdd = M^-1 (T + T_e - C qd - G)`.
pub fn forward_dynamics(
    model: &RobotModel,
    state: &JointState,
    torque: &JointVector,
    external: &JointVector,
) -> Result<JointVector> {
    state.validate(model)?;
    check_len(model, torque)?;
    check_len(model, external)?;
    let d = joint_dynamics(model, &state.q, &state.qdot)?;
    solve_acceleration(&d, &state.qdot, torque, external)
}

pub(crate) fn solve_acceleration(
    d: &JointDynamics,
    qdot: &JointVector,
    torque: &JointVector,
    external: &JointVector,
) -> Result<JointVector> {
    let rhs = torque + external - &d.coriolis * qdot - &d.gravity;
    let chol = d
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| GicError::InvalidModel("mass matrix is not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// End-effector frame, `V^b`.
    Body,
    /// Spatial twist `V^s` with `hat(V^s) = dg g^-1`.
    Spatial,
    /// Base-frame axes at the end-effector origin, `[d/dt p; w^s]`.
    World,
}

#[derive(Debug, Clone)]
pub struct TaskSpaceDynamics {
    pub mt: Mat6,
    pub ct: Mat6,
    pub gt: Vec6,
    pub frame: Frame,
    /// The Jacobian used for the transform.
    pub jacobian: Jacobian,
    /// `J^-1` (Moore-Penrose pseudo-inverse when the arm is not 6-DOF).
    pub jacobian_inv: DMatrix<f64>,
    pub condition: f64,
    pub joint: JointDynamics,
}

impl TaskSpaceDynamics {
    /// Joint torques realising a task-space wrench: `T = J^T F`.
    pub fn torque(&self, wrench: &Vec6) -> JointVector {
        self.jacobian.transpose() * wrench
    }

    /// Task-space wrench equivalent to joint torques: `F = J^-T T`.
    pub fn wrench(&self, torque: &JointVector) -> Vec6 {
        let w = self.jacobian_inv.transpose() * torque;
        Vec6::from_iterator(w.iter().copied())
    }
}

pub fn jacobian_condition(j: &Jacobian) -> f64 {
    let svd = j.clone().svd(false, false);
    let sv = &svd.singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Rate of a spatial Jacobian: column `i` moves with the frames before it,
/// `d/dt J_i = ad(sum_{j < i} J_j qd_j) J_i`.
pub fn spatial_jacobian_rate(js: &Jacobian, qdot: &JointVector) -> Jacobian {
    let n = js.ncols();
    let mut out = Jacobian::zeros(n);
    let mut head = Vec6::zeros();
    for i in 0..n {
        let col: Vec6 = js.column(i).into_owned();
        out.set_column(i, &(ad(&Twist::from_vector(&head)) * col));
        head += col * qdot[i];
    }
    out
}

/// Rate of the world Jacobian `J_w = S(p) J_s`, `S(p) = [[I, -hat(p)], [0, I]]`:
/// `S(p) dJ_s - [[0, hat(dp)], [0, 0]] J_s`, where `p` is the end-effector
/// position and `dp` its velocity.
pub fn world_jacobian_rate(js: &Jacobian, p: &Vec3, qdot: &JointVector) -> Jacobian {
    let js_rate = spatial_jacobian_rate(js, qdot);
    let w_rows = js.fixed_rows::<3>(3).into_owned();
    let w_rate = js_rate.fixed_rows::<3>(3).into_owned();
    let pdot: Vec3 = (js.fixed_rows::<3>(0) - hat3(p) * &w_rows) * qdot;
    let top = js_rate.fixed_rows::<3>(0) - hat3(p) * &w_rate - hat3(&pdot) * &w_rows;
    let mut out = js_rate;
    out.fixed_rows_mut::<3>(0).copy_from(&top);
    out
}

fn inverse_or_pinv(j: &Jacobian) -> Result<DMatrix<f64>> {
    let jd = DMatrix::from_column_slice(6, j.ncols(), j.as_slice());
    if j.ncols() == 6 {
        jd.try_inverse()
            .ok_or(GicError::NearSingularJacobian { cond: f64::INFINITY, limit: MAX_JACOBIAN_CONDITION })
    } else {
        jd.pseudo_inverse(1e-14)
            .map_err(|e| GicError::InvalidModel(format!("pseudo-inverse failed: {e}")))
    }
}

fn mat6_from(d: &DMatrix<f64>) -> Mat6 {
    Mat6::from_fn(|i, j| d[(i, j)])
}

/// Task-space dynamics in the requested frame.
pub fn task_space_dynamics(
    model: &RobotModel,
    q: &JointVector,
    qdot: &JointVector,
    frame: Frame,
) -> Result<TaskSpaceDynamics> {
    let joint = joint_dynamics(model, q, qdot)?;
    let (jacobian, jacobian_dot) = match frame {
        Frame::Body => {
            let jb = crate::kinematics::body_jacobian(model, q)?;
            let jd = body_jacobian_rate(&jb, qdot, model.dof());
            (jb, jd)
        }
        Frame::Spatial => {
            let js = crate::kinematics::spatial_jacobian(model, q)?;
            let jd = spatial_jacobian_rate(&js, qdot);
            (js, jd)
        }
        Frame::World => {
            let js = crate::kinematics::spatial_jacobian(model, q)?;
            let p = crate::kinematics::forward_kinematics(model, q)?.translation;
            let jd = world_jacobian_rate(&js, &p, qdot);
            (shift_to_point(&p) * js, jd)
        }
    };
    task_space_from_parts(joint, jacobian, jacobian_dot, frame)
}

pub fn task_space_from_parts(
    joint: JointDynamics,
    jacobian: Jacobian,
    jacobian_dot: Jacobian,
    frame: Frame,
) -> Result<TaskSpaceDynamics> {
    let condition = jacobian_condition(&jacobian);
    if !(condition <= MAX_JACOBIAN_CONDITION) {
        return Err(GicError::NearSingularJacobian {
            cond: condition,
            limit: MAX_JACOBIAN_CONDITION,
        });
    }
    let jinv = inverse_or_pinv(&jacobian)?;
    let jinv_t = jinv.transpose();
    let jdot = DMatrix::from_column_slice(6, jacobian_dot.ncols(), jacobian_dot.as_slice());
    let mt = &jinv_t * &joint.mass * &jinv;
    let ct = &jinv_t * (&joint.coriolis - &joint.mass * &jinv * jdot) * &jinv;
    let gt = &jinv_t * &joint.gravity;
    let mt = mat6_from(&mt);
    Ok(TaskSpaceDynamics {
        mt: (mt + mt.transpose()) * 0.5,
        ct: mat6_from(&ct),
        gt: Vec6::from_iterator(gt.iter().copied()),
        frame,
        jacobian,
        jacobian_inv: jinv,
        condition,
        joint,
    })
}
