//! SO(3) and SE(3) primitives.
//!
//! Every 6-vector in this crate is ordered translation first: a twist is
//! `[v; w]`, and position errors, elastic forces and wrenches follow the
//! same layout. The se(3) hat map is
//!
//! ```text
//! hat6([v; w]) = | hat3(w)  v |
//!                |   0      0 |
//! ```

use nalgebra::{Matrix3, Matrix4, Matrix6, Rotation3, UnitQuaternion, Vector3, Vector6};

use crate::error::{GicError, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;
pub type Mat6 = Matrix6<f64>;

/// Below this rotation angle the closed forms switch to Taylor expansions.
const SMALL_ANGLE: f64 = 1e-6;

/// Orthonormality tolerance enforced by [`Pose::new`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// A twist `[v; w]` (linear part first).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub v: Vec3,
    pub w: Vec3,
}

impl Twist {
    pub fn new(v: Vec3, w: Vec3) -> Self {
        Self { v, w }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(x: &Vec6) -> Self {
        Self {
            v: x.fixed_rows::<3>(0).into_owned(),
            w: x.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vec6 {
        Vec6::new(self.v.x, self.v.y, self.v.z, self.w.x, self.w.y, self.w.z)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.v * s, self.w * s)
    }
}

impl From<Vec6> for Twist {
    fn from(x: Vec6) -> Self {
        Self::from_vector(&x)
    }
}

impl From<Twist> for Vec6 {
    fn from(t: Twist) -> Self {
        t.to_vector()
    }
}

/// Cross-product matrix: `hat3(w) * u == w.cross(u)`.
pub fn hat3(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat3`]. Returns the vee of the skew part `(m - m^T) / 2` and
/// rejects inputs whose symmetric part is larger than `1e-6 (1 + |m|_F)`.
pub fn vee3(m: &Mat3) -> Result<Vec3> {
    let asymmetry = (m + m.transpose()).norm();
    let tolerance = 1e-6 * (1.0 + m.norm());
    if !(asymmetry <= tolerance) {
        return Err(GicError::NonSkew {
            asymmetry,
            tolerance,
        });
    }
    Ok(vee3_skew_part(m))
}

/// Vee of the skew-symmetric part of an arbitrary matrix, without checking.
pub fn vee3_skew_part(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

pub fn hat6(xi: &Twist) -> Mat4 {
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&xi.w));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&xi.v);
    m
}

pub fn vee6(m: &Mat4) -> Result<Twist> {
    let bottom = m.fixed_view::<1, 4>(3, 0).abs().max();
    if !(bottom <= 1e-9) {
        return Err(GicError::NotTwistMatrix(format!(
            "bottom row magnitude {bottom:.3e} exceeds 1e-9"
        )));
    }
    let w = vee3(&m.fixed_view::<3, 3>(0, 0).into_owned())?;
    Ok(Twist::new(m.fixed_view::<3, 1>(0, 3).into_owned(), w))
}

/// The `ad` operator (Lie bracket matrix): `ad(a) * b == vee6([hat6(a), hat6(b)])`.
pub fn ad(xi: &Twist) -> Mat6 {
    let w_hat = hat3(&xi.w);
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&w_hat);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&hat3(&xi.v));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&w_hat);
    m
}

/// Rodrigues coefficients `sin(t)/t`, `(1 - cos t)/t^2`, `(t - sin t)/t^3`.
fn rodrigues_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        (s / theta, (1.0 - c) / t2, (theta - s) / (t2 * theta))
    }
}

pub fn exp_so3(w: &Vec3) -> Mat3 {
    let (a, b, _) = rodrigues_coefficients(w.norm());
    let w_hat = hat3(w);
    Mat3::identity() + w_hat * a + w_hat * w_hat * b
}

/// Rotation vector of `r`, with norm in `[0, pi]`.
///
/// Near the half-turn the axis is recovered from the symmetric part
/// `(R + R^T) / 2 = cos(t) I + (1 - cos t) n n^T`, with the sign taken from the
/// skew part when it is resolvable.
pub fn log_so3(r: &Mat3) -> Result<Vec3> {
    let drift = (r.transpose() * r - Mat3::identity()).norm();
    let det = r.determinant();
    if !(drift <= 1e-6) || !((det - 1.0).abs() <= 1e-6) {
        return Err(GicError::NotRotation(format!(
            "|R^T R - I| = {drift:.3e}, det = {det:.6}"
        )));
    }
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let skew = vee3_skew_part(r); // sin(theta) * n
    if theta < SMALL_ANGLE {
        return Ok(skew * (1.0 + theta * theta / 6.0));
    }
    if cos_theta > -0.99 {
        return Ok(skew * (theta / theta.sin()));
    }
    // half-turn branch
    let sym = (r + r.transpose()) * 0.5;
    let nn = (sym - Mat3::identity() * cos_theta) / (1.0 - cos_theta);
    let k = (0..3)
        .max_by(|&i, &j| nn[(i, i)].total_cmp(&nn[(j, j)]))
        .unwrap_or(0);
    let mut axis = nn.column(k).into_owned() / nn[(k, k)].max(f64::MIN_POSITIVE).sqrt();
    axis /= axis.norm();
    if axis.dot(&skew) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

pub fn exp_se3(xi: &Twist) -> Pose {
    let theta = xi.w.norm();
    let (a, b, c) = rodrigues_coefficients(theta);
    let w_hat = hat3(&xi.w);
    let w_hat2 = w_hat * w_hat;
    let rotation = Mat3::identity() + w_hat * a + w_hat2 * b;
    let v_mat = Mat3::identity() + w_hat * b + w_hat2 * c;
    Pose::from_parts(rotation, v_mat * xi.v)
}

/// A rigid transform `[[R, p], [0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Checked constructor: `R^T R = I` and `det R = 1` within 1e-9.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let pose = Self::from_parts(rotation, translation);
        pose.validate(ROTATION_TOLERANCE)?;
        Ok(pose)
    }

    pub fn from_parts(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::from_parts(Mat3::identity(), translation)
    }

    pub fn from_rotation(rotation: Mat3) -> Self {
        Self::from_parts(rotation, Vec3::zeros())
    }

    pub fn validate(&self, tolerance: f64) -> Result<()> {
        let r = &self.rotation;
        let drift = (r.transpose() * r - Mat3::identity()).abs().max();
        let det = r.determinant();
        let finite = r.iter().chain(self.translation.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(GicError::NotRotation("non-finite entries".into()));
        }
        if drift > tolerance || (det - 1.0).abs() > tolerance {
            return Err(GicError::NotRotation(format!(
                "max|R^T R - I| = {drift:.3e}, det = {det:.12}"
            )));
        }
        Ok(())
    }

    pub fn to_homogeneous(&self) -> Mat4 {
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Mat4) -> Result<Self> {
        let bottom = m.fixed_view::<1, 4>(3, 0);
        if (bottom - nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0)).abs().max() > 1e-9 {
            return Err(GicError::NotRotation("bottom row is not [0 0 0 1]".into()));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::from_parts(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::from_parts(rt, -(rt * self.translation))
    }

    /// `Ad_g = [[R, hat(p) R], [0, R]]` acting on `[v; w]` twists.
    pub fn adjoint(&self) -> Mat6 {
        let r = &self.rotation;
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        m.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(hat3(&self.translation) * r));
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
        m
    }

    pub fn transform_twist(&self, xi: &Twist) -> Twist {
        Twist::from_vector(&(self.adjoint() * xi.to_vector()))
    }

    pub fn transform_point(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    /// Unit quaternion `(w, x, y, z)` of the rotation part, with `w >= 0`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let rot = Rotation3::from_matrix_unchecked(self.rotation);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
        [q.w, q.i, q.j, q.k]
    }
}

impl std::ops::Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl std::ops::Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

pub fn rot_x(angle: f64) -> Mat3 {
    exp_so3(&(Vec3::x() * angle))
}

pub fn rot_y(angle: f64) -> Mat3 {
    exp_so3(&(Vec3::y() * angle))
}

pub fn rot_z(angle: f64) -> Mat3 {
    exp_so3(&(Vec3::z() * angle))
}
