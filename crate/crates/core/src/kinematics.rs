//! Product-of-exponentials kinematics for serial chains of revolute joints.
//!
//! `g(q) = exp(hat(xi_1) q_1) ... exp(hat(xi_n) q_n) g(0)` with every joint
//! twist expressed in the base (spatial) frame at the home configuration.

use nalgebra::{DVector, Matrix6xX};

use crate::error::{GicError, Result};
use crate::se3::{ad, exp_se3, hat3, Mat3, Mat6, Pose, Twist, Vec3, Vec6};

pub type JointVector = DVector<f64>;
pub type Jacobian = Matrix6xX<f64>;

/// Mass properties of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkInertia {
    /// kg
    pub mass: f64,
    /// Pose of the link's centre-of-mass frame in the base frame at `q = 0`.
    pub com_pose: Pose,
    /// Rotational inertia about the COM, in the COM frame (kg m^2).
    pub inertia: Mat3,
}

impl LinkInertia {
    pub fn validate(&self, index: usize) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(GicError::InvalidModel(format!(
                "link {index}: mass must be finite and positive, got {}",
                self.mass
            )));
        }
        let i = &self.inertia;
        if !i.iter().all(|x| x.is_finite()) {
            return Err(GicError::InvalidModel(format!(
                "link {index}: inertia has non-finite entries"
            )));
        }
        if (i - i.transpose()).abs().max() > 1e-9 * (1.0 + i.abs().max()) {
            return Err(GicError::InvalidModel(format!(
                "link {index}: inertia tensor is not symmetric"
            )));
        }
        if i.cholesky().is_none() {
            return Err(GicError::InvalidModel(format!(
                "link {index}: inertia tensor is not positive definite"
            )));
        }
        self.com_pose
            .validate(1e-9)
            .map_err(|e| GicError::InvalidModel(format!("link {index}: com pose: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    /// Spatial-frame joint twists at `q = 0`.
    pub joint_twists: Vec<Twist>,
    /// End-effector pose at `q = 0`.
    pub home: Pose,
    pub links: Vec<LinkInertia>,
    /// m/s^2
    pub gravity: Vec3,
    /// Reflected rotor inertia added to the diagonal of `M(q)` (kg m^2).
    pub armature: Vec<f64>,
    pub joint_limits: Option<Vec<[f64; 2]>>,
}

impl RobotModel {
    pub fn dof(&self) -> usize {
        self.joint_twists.len()
    }

    /// Checks every model invariant: matching lengths, unit revolute axes,
    /// positive masses and SPD inertias.
    pub fn validate(&self) -> Result<()> {
        let n = self.dof();
        if n == 0 {
            return Err(GicError::InvalidModel("model has no joints".into()));
        }
        if self.links.len() != n {
            return Err(GicError::InvalidModel(format!(
                "{} joints but {} links",
                n,
                self.links.len()
            )));
        }
        if self.armature.len() != n {
            return Err(GicError::InvalidModel(format!(
                "{} joints but {} armature entries",
                n,
                self.armature.len()
            )));
        }
        for (i, xi) in self.joint_twists.iter().enumerate() {
            let axis_norm = xi.w.norm();
            if !xi.to_vector().iter().all(|x| x.is_finite()) || (axis_norm - 1.0).abs() > 1e-9 {
                return Err(GicError::InvalidModel(format!(
                    "joint {i}: revolute twist needs a unit rotation axis, |w| = {axis_norm}"
                )));
            }
            if xi.v.dot(&xi.w).abs() > 1e-9 {
                return Err(GicError::InvalidModel(format!(
                    "joint {i}: twist has nonzero pitch (v.w = {:.3e}); only revolute joints are supported",
                    xi.v.dot(&xi.w)
                )));
            }
        }
        for (i, link) in self.links.iter().enumerate() {
            link.validate(i)?;
        }
        for (i, a) in self.armature.iter().enumerate() {
            if !(a.is_finite() && *a >= 0.0) {
                return Err(GicError::InvalidModel(format!(
                    "joint {i}: armature must be finite and non-negative"
                )));
            }
        }
        if !self.gravity.iter().all(|x| x.is_finite()) {
            return Err(GicError::InvalidModel("gravity must be finite".into()));
        }
        if let Some(limits) = &self.joint_limits {
            if limits.len() != n {
                return Err(GicError::InvalidModel(format!(
                    "{} joints but {} joint limits",
                    n,
                    limits.len()
                )));
            }
            if limits.iter().any(|[lo, hi]| !(lo < hi)) {
                return Err(GicError::InvalidModel("joint limit with min >= max".into()));
            }
        }
        self.home
            .validate(1e-9)
            .map_err(|e| GicError::InvalidModel(format!("home pose: {e}")))
    }

    fn check_len(&self, x: &JointVector) -> Result<()> {
        if x.len() != self.dof() {
            return Err(GicError::DimensionMismatch {
                expected: self.dof(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Single revolute joint about the base z axis carrying a point-like mass
    /// `m = 1 kg` at `l = 1 m` along x. Gravity points along `-y`, so the arm
    /// swings in a vertical plane and the closed forms are
    ///
    /// * `M(q) = m l^2 = 1` (plus a 1e-9 kg m^2 rotational inertia keeping the
    ///   link tensor positive definite),
    /// * `G(q) = m g0 l cos(q) = 9.81 cos(q)`,
    /// * `C = 0`.
    pub fn pendulum1() -> Self {
        let home = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        RobotModel {
            name: "pendulum1".into(),
            joint_twists: vec![Twist::new(Vec3::zeros(), Vec3::z())],
            home,
            links: vec![LinkInertia {
                mass: 1.0,
                com_pose: home,
                inertia: Mat3::identity() * PENDULUM_POINT_INERTIA,
            }],
            gravity: Vec3::new(0.0, -9.81, 0.0),
            armature: vec![0.0],
            joint_limits: None,
        }
    }

    /// UR5e-like 6-DOF arm, see `models/ur5e_approx.toml`.
    pub fn ur5e_approx() -> Self {
        crate::io::parse_robot_model(crate::io::UR5E_APPROX_TOML, "ur5e_approx.toml")
            .expect("bundled ur5e_approx model is valid")
    }

    /// Bundled model by name (`pendulum1` or `ur5e_approx`).
    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "pendulum1" => Some(Self::pendulum1()),
            "ur5e_approx" | "ur5e" => Some(Self::ur5e_approx()),
            _ => None,
        }
    }
}

pub const PENDULUM_POINT_INERTIA: f64 = 1e-9;

/// `exp(xi_1 q_1) ... exp(xi_k q_k)` for `k = 0..=n` (index 0 is the identity).
fn exponential_prefixes(model: &RobotModel, q: &JointVector) -> Vec<Pose> {
    let mut out = Vec::with_capacity(model.dof() + 1);
    let mut acc = Pose::identity();
    out.push(acc);
    for (xi, &qi) in model.joint_twists.iter().zip(q.iter()) {
        acc = acc.compose(&exp_se3(&xi.scale(qi)));
        out.push(acc);
    }
    out
}

pub fn forward_kinematics(model: &RobotModel, q: &JointVector) -> Result<Pose> {
    model.check_len(q)?;
    let prefixes = exponential_prefixes(model, q);
    Ok(prefixes[model.dof()].compose(&model.home))
}

/// Spatial Jacobian of the first `count` joints; column `i` is
/// `Ad(exp(xi_1 q_1) ... exp(xi_{i-1} q_{i-1})) xi_i`.
fn spatial_columns(model: &RobotModel, prefixes: &[Pose], count: usize) -> Jacobian {
    let mut j = Jacobian::zeros(model.dof());
    for i in 0..count {
        let col = prefixes[i].adjoint() * model.joint_twists[i].to_vector();
        j.set_column(i, &col);
    }
    j
}

pub fn spatial_jacobian(model: &RobotModel, q: &JointVector) -> Result<Jacobian> {
    model.check_len(q)?;
    let prefixes = exponential_prefixes(model, q);
    Ok(spatial_columns(model, &prefixes, model.dof()))
}

pub fn body_jacobian(model: &RobotModel, q: &JointVector) -> Result<Jacobian> {
    model.check_len(q)?;
    let prefixes = exponential_prefixes(model, q);
    let g = prefixes[model.dof()].compose(&model.home);
    Ok(g.inverse().adjoint() * spatial_columns(model, &prefixes, model.dof()))
}

/// Jacobian of `[d/dt p; w^s]`: base-frame axes, reference point at the
/// end-effector origin. Related to the spatial Jacobian by
/// `J_w = [[I, -hat(p)], [0, I]] J_s`.
pub fn world_jacobian(model: &RobotModel, q: &JointVector) -> Result<Jacobian> {
    model.check_len(q)?;
    let prefixes = exponential_prefixes(model, q);
    let p = prefixes[model.dof()].compose(&model.home).translation;
    Ok(shift_to_point(&p) * spatial_columns(model, &prefixes, model.dof()))
}

/// `[[I, -hat(p)], [0, I]]`.
pub fn shift_to_point(p: &Vec3) -> Mat6 {
    let mut s = Mat6::identity();
    s.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-hat3(p)));
    s
}

/// `V^b = J_b(q) qdot`.
pub fn body_velocity(model: &RobotModel, q: &JointVector, qdot: &JointVector) -> Result<Twist> {
    model.check_len(qdot)?;
    let jb = body_jacobian(model, q)?;
    Ok(Twist::from_vector(&(jb * qdot)))
}

/// Time derivative of a body Jacobian along `qdot`.
///
/// Column `i` of a body Jacobian is `Ad(h_i^-1) xi_i` where `h_i` is the tail
/// product from joint `i` to the frame. Its rate is `-ad(W_i) J_i` with
/// `W_i = sum_{j > i} J_j qdot_j`, the body velocity contributed by the joints
/// after `i`. Columns past `active` are treated as zero (link Jacobians).
pub fn body_jacobian_rate(jb: &Jacobian, qdot: &JointVector, active: usize) -> Jacobian {
    let n = jb.ncols();
    let mut out = Jacobian::zeros(n);
    let mut tail = Vec6::zeros();
    for i in (0..active).rev() {
        let col: Vec6 = jb.column(i).into_owned();
        let rate = -(ad(&Twist::from_vector(&tail)) * col);
        out.set_column(i, &rate);
        tail += col * qdot[i];
    }
    out
}

pub fn body_jacobian_dot(
    model: &RobotModel,
    q: &JointVector,
    qdot: &JointVector,
) -> Result<Jacobian> {
    model.check_len(qdot)?;
    let jb = body_jacobian(model, q)?;
    Ok(body_jacobian_rate(&jb, qdot, model.dof()))
}

/// Body Jacobian of link `k`'s COM frame (columns `> k` are zero) together
/// with the COM pose.
pub fn link_body_jacobian(model: &RobotModel, q: &JointVector, k: usize) -> Result<(Pose, Jacobian)> {
    model.check_len(q)?;
    let prefixes = exponential_prefixes(model, q);
    Ok(link_jacobian_from_prefixes(model, &prefixes, k))
}

pub(crate) fn link_jacobian_from_prefixes(
    model: &RobotModel,
    prefixes: &[Pose],
    k: usize,
) -> (Pose, Jacobian) {
    let pose = prefixes[k + 1].compose(&model.links[k].com_pose);
    let js = spatial_columns(model, prefixes, k + 1);
    (pose, pose.inverse().adjoint() * js)
}

/// All link COM poses and body Jacobians at `q`.
pub fn link_jacobians(model: &RobotModel, q: &JointVector) -> Result<Vec<(Pose, Jacobian)>> {
    model.check_len(q)?;
    let prefixes = exponential_prefixes(model, q);
    let js = spatial_columns(model, &prefixes, model.dof());
    Ok((0..model.dof())
        .map(|k| {
            let pose = prefixes[k + 1].compose(&model.links[k].com_pose);
            let mut jk = js.clone();
            for c in k + 1..model.dof() {
                jk.column_mut(c).fill(0.0);
            }
            (pose, pose.inverse().adjoint() * jk)
        })
        .collect())
}
