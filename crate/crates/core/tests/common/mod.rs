#![allow(dead_code)]

use gic::se3::{Mat3, Pose, Vec3, Vec6};
use nalgebra::SMatrix;
use proptest::prelude::*;

/// Truncated power series `sum_k A^k / k!`, independent of the closed forms.
pub fn series_exp<const D: usize>(a: &SMatrix<f64, D, D>, terms: usize) -> SMatrix<f64, D, D> {
    let mut sum = SMatrix::<f64, D, D>::identity();
    let mut term = sum;
    for k in 1..terms {
        term = term * a / k as f64;
        sum += term;
    }
    sum
}

/// Cross-product matrix written out entry by entry.
pub fn cross_matrix(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// Rotation matrix from a Rodrigues-free route: Gram-Schmidt on three
/// random vectors, with the determinant forced to +1.
pub fn orthonormalise(a: Vec3, b: Vec3) -> Option<Mat3> {
    let x = a.try_normalize(1e-3)?;
    let y = (b - x * x.dot(&b)).try_normalize(1e-3)?;
    Some(Mat3::from_columns(&[x, y, x.cross(&y)]))
}

pub fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-scale..scale).prop_map(Vec3::from)
}

pub fn vec6(scale: f64) -> impl Strategy<Value = Vec6> {
    prop::array::uniform6(-scale..scale).prop_map(Vec6::from)
}

pub fn mat3(scale: f64) -> impl Strategy<Value = Mat3> {
    prop::array::uniform9(-scale..scale).prop_map(|a| Mat3::from_column_slice(&a))
}

pub fn rotation() -> impl Strategy<Value = Mat3> {
    (vec3(1.0), vec3(1.0)).prop_filter_map("degenerate frame", |(a, b)| orthonormalise(a, b))
}

pub fn pose() -> impl Strategy<Value = Pose> {
    (rotation(), vec3(1.0)).prop_map(|(r, p)| Pose::from_parts(r, p))
}

pub fn spd3() -> impl Strategy<Value = Mat3> {
    mat3(1.0).prop_map(|a| a * a.transpose() * 10.0 + Mat3::identity())
}

/// Central difference of a scalar function of one variable.
pub fn central<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

pub fn joint_state(n: usize) -> impl Strategy<Value = (gic::kinematics::JointVector, gic::kinematics::JointVector)> {
    (
        prop::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, n),
        prop::collection::vec(-1.0..1.0f64, n),
    )
        .prop_map(|(q, qd)| (nalgebra::DVector::from_vec(q), nalgebra::DVector::from_vec(qd)))
}

/// `[v; w]` with `hat(V) = X`, reading the rotational block's skew part.
pub fn twist_of(x: &nalgebra::Matrix4<f64>) -> Vec6 {
    let r = x.fixed_view::<3, 3>(0, 0);
    let w = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let v = x.fixed_view::<3, 1>(0, 3).into_owned();
    Vec6::new(v[0], v[1], v[2], w[0], w[1], w[2])
}

/// Forward kinematics rebuilt from truncated exponential series of the
/// homogeneous twist matrices.
pub fn series_fk(model: &gic::kinematics::RobotModel, q: &nalgebra::DVector<f64>, tail: &Pose) -> nalgebra::Matrix4<f64> {
    let mut g = nalgebra::Matrix4::<f64>::identity();
    for (xi, &qi) in model.joint_twists.iter().zip(q.iter()) {
        g *= series_exp(&(gic::se3::hat6(xi) * qi), 40);
    }
    g * tail.to_homogeneous()
}

/// Link `k` COM pose rebuilt from series exponentials.
pub fn series_link_pose(model: &gic::kinematics::RobotModel, q: &nalgebra::DVector<f64>, k: usize) -> nalgebra::Matrix4<f64> {
    let mut g = nalgebra::Matrix4::<f64>::identity();
    for (xi, &qi) in model.joint_twists.iter().zip(q.iter()).take(k + 1) {
        g *= series_exp(&(gic::se3::hat6(xi) * qi), 40);
    }
    g * model.links[k].com_pose.to_homogeneous()
}
