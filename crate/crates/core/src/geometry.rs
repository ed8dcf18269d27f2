//! Geometric error quantities on SE(3).
//!
//! With `g = (R, p)` the current end-effector pose and `g_d = (R_d, p_d)` the
//! desired one:
//!
//! * error function `Psi = tr(I - R_d^T R) + 1/2 |p - p_d|^2`
//!   (equal to `1/2 |I - g_d^-1 g|_F^2`, left-invariant),
//! * position error `e_g = [R^T (p - p_d); (R_d^T R - R^T R_d)^v]`, the
//!   gradient of `Psi` under right perturbations `g exp(eta)`,
//! * velocity error `e_V = V^b - Ad(g^-1 g_d) V_d^b`,
//! * weighted potential `P = tr(K_R (I - R_d^T R)) + 1/2 (p - p_d)^T R_d K_p R_d^T (p - p_d)`
//!   with elastic force `f_g` (its gradient) and stiffness Jacobian `B_K`
//!   (`d/dt f_g = B_K e_V`).
//!
//! Antipodal orientations (`tr(R_d^T R) = -1`) are critical points of `Psi`;
//! every quantity here stays defined there but the spring force vanishes.

use crate::error::{GicError, Result};
use crate::se3::{ad, exp_se3, hat3, vee3_skew_part, Mat3, Mat6, Pose, Twist, Vec3, Vec6};

/// Impedance gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    /// Translational stiffness (N/m).
    pub kp: Mat3,
    /// Rotational stiffness (N m/rad).
    pub kr: Mat3,
    /// Damping.
    pub kd: Mat6,
    /// Reference-velocity gain of the second geometric law.
    pub lambda_g: f64,
}

fn check_spd<const D: usize>(m: &nalgebra::SMatrix<f64, D, D>, what: &str) -> Result<()>
where
    nalgebra::Const<D>: nalgebra::DimMin<nalgebra::Const<D>, Output = nalgebra::Const<D>>,
{
    if !m.iter().all(|x| x.is_finite()) {
        return Err(GicError::InvalidGains(format!("{what} has non-finite entries")));
    }
    if (m - m.transpose()).abs().max() > 1e-12 * (1.0 + m.abs().max()) {
        return Err(GicError::InvalidGains(format!("{what} is not symmetric")));
    }
    if m.cholesky().is_none() {
        return Err(GicError::InvalidGains(format!("{what} is not positive definite")));
    }
    Ok(())
}

impl Gains {
    pub fn new(kp: Mat3, kr: Mat3, kd: Mat6, lambda_g: f64) -> Result<Self> {
        check_spd(&kp, "K_p")?;
        check_spd(&kr, "K_R")?;
        check_spd(&kd, "K_d")?;
        if !(lambda_g.is_finite() && lambda_g >= 0.0) {
            return Err(GicError::InvalidGains(format!("lambda_g must be >= 0, got {lambda_g}")));
        }
        Ok(Self { kp, kr, kd, lambda_g })
    }

    /// `K_p = kp I`, `K_R = ko I`, `K_d = kd I`.
    pub fn isotropic(kp: f64, ko: f64, kd: f64, lambda_g: f64) -> Result<Self> {
        Self::new(
            Mat3::identity() * kp,
            Mat3::identity() * ko,
            Mat6::identity() * kd,
            lambda_g,
        )
    }

    /// `K_g = blkdiag(K_p, K_R)`.
    pub fn kg(&self) -> Mat6 {
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.kp);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.kr);
        m
    }

    pub fn with_lambda(&self, lambda_g: f64) -> Self {
        Self { lambda_g, ..self.clone() }
    }
}

/// Desired pose with its body-frame velocity and acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredState {
    pub gd: Pose,
    /// `V_d^b`, from `hat(V_d^b) = g_d^-1 d/dt g_d`.
    pub vd_b: Twist,
    pub vd_b_dot: Twist,
}

impl DesiredState {
    pub fn stationary(gd: Pose) -> Self {
        Self { gd, vd_b: Twist::zero(), vd_b_dot: Twist::zero() }
    }

    /// `[d/dt p_d; w_d^s]` used by the spatial benchmark law.
    pub fn spatial_velocity(&self) -> Twist {
        let r = &self.gd.rotation;
        Twist::new(r * self.vd_b.v, r * self.vd_b.w)
    }

    /// Time derivative of [`Self::spatial_velocity`].
    pub fn spatial_acceleration(&self) -> Twist {
        let r = &self.gd.rotation;
        let v = &self.vd_b;
        let a = &self.vd_b_dot;
        Twist::new(r * (v.w.cross(&v.v) + a.v), r * a.w)
    }
}

pub fn error_function(g: &Pose, gd: &Pose) -> f64 {
    let rel = gd.rotation.transpose() * g.rotation;
    let dp = g.translation - gd.translation;
    (3.0 - rel.trace()) + 0.5 * dp.norm_squared()
}

pub fn position_error(g: &Pose, gd: &Pose) -> Vec6 {
    let r = &g.rotation;
    let rd = &gd.rotation;
    let ep = r.transpose() * (g.translation - gd.translation);
    let a = rd.transpose() * r;
    // (A - A^T)^v with A = R_d^T R
    let er = vee3_skew_part(&a) * 2.0;
    stack(&ep, &er)
}

pub(crate) fn stack(top: &Vec3, bottom: &Vec3) -> Vec6 {
    Vec6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

pub(crate) fn top(x: &Vec6) -> Vec3 {
    x.fixed_rows::<3>(0).into_owned()
}

#[cfg(test)]
pub(crate) fn bottom(x: &Vec6) -> Vec3 {
    x.fixed_rows::<3>(3).into_owned()
}

/// `g_ed = g^-1 g_d`.
pub fn relative_desired(g: &Pose, gd: &Pose) -> Pose {
    g.inverse().compose(gd)
}

/// `V_d^* = Ad(g^-1 g_d) V_d^b`: the desired velocity moved to the tangent
/// space at `g`.
pub fn desired_velocity_star(g: &Pose, des: &DesiredState) -> Twist {
    let ged = relative_desired(g, &des.gd);
    Twist::from_vector(&(ged.adjoint() * des.vd_b.to_vector()))
}

/// `d/dt V_d^*` along a motion with body velocity `v_b`.
///
/// Product rule: `(d/dt Ad(g_ed)) V_d^b + Ad(g_ed) dV_d^b`, where
/// `d/dt g_ed = -hat(V^b) g_ed + g_ed hat(V_d^b)` makes the first term equal
/// to `ad(V_d^*) V^b`. With this, `d/dt e_V = dV^b - dV_d^*` exactly.
pub fn desired_accel_star(g: &Pose, v_b: &Twist, des: &DesiredState) -> Twist {
    let ged = relative_desired(g, &des.gd);
    let ad_g = ged.adjoint();
    let v_star = ad_g * des.vd_b.to_vector();
    let rate = ad(&Twist::from_vector(&v_star)) * v_b.to_vector();
    Twist::from_vector(&(rate + ad_g * des.vd_b_dot.to_vector()))
}

pub fn velocity_error(g: &Pose, v_b: &Twist, des: &DesiredState) -> Twist {
    let v_star = desired_velocity_star(g, des);
    Twist::from_vector(&(v_b.to_vector() - v_star.to_vector()))
}

pub fn potential(g: &Pose, gd: &Pose, gains: &Gains) -> f64 {
    let rel = gd.rotation.transpose() * g.rotation;
    let dp = g.translation - gd.translation;
    let rot = (gains.kr * (Mat3::identity() - rel)).trace();
    let lin = 0.5 * (dp.transpose() * gd.rotation * gains.kp * gd.rotation.transpose() * dp)[(0, 0)];
    rot + lin
}

/// Principal square root of a symmetric positive semi-definite matrix.
pub fn sqrt_spd(m: &Mat3) -> Mat3 {
    let eig = nalgebra::SymmetricEigen::new(*m);
    let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    eig.eigenvectors * Mat3::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// `P = 1/2 tr(psi_k^T psi_k)` with
/// `psi_k = [[sqrt(K_R)(I - R_d^T R), -sqrt(K_p) R_d^T (p - p_d)], [0, 0]]`.
/// Independent route to [`potential`], used as a cross-check.
pub fn potential_trace_form(g: &Pose, gd: &Pose, gains: &Gains) -> f64 {
    let rel = gd.rotation.transpose() * g.rotation;
    let dp = g.translation - gd.translation;
    let mut psi = nalgebra::Matrix4::<f64>::zeros();
    psi.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(sqrt_spd(&gains.kr) * (Mat3::identity() - rel)));
    psi.fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&(-(sqrt_spd(&gains.kp) * gd.rotation.transpose() * dp)));
    0.5 * (psi.transpose() * psi).trace()
}

/// `f_g = [R^T R_d K_p R_d^T (p - p_d); (K_R R_d^T R - R^T R_d K_R)^v]`.
pub fn elastic_force(g: &Pose, gd: &Pose, gains: &Gains) -> Vec6 {
    let r = &g.rotation;
    let rd = &gd.rotation;
    let red = r.transpose() * rd;
    let fp = red * gains.kp * rd.transpose() * (g.translation - gd.translation);
    let a = gains.kr * rd.transpose() * r;
    // a - a^T is skew by construction since K_R is symmetric
    let fr = vee3_skew_part(&(a - a.transpose()));
    stack(&fp, &fr)
}

/// `B_K = [[R_ed K_p R_ed^T, hat(f_p)], [0, tr(R_ed K_R) I - R_ed K_R]]`,
/// `R_ed = R^T R_d`, so that `d/dt f_g = B_K e_V`.
pub fn stiffness_jacobian(g: &Pose, gd: &Pose, gains: &Gains) -> Mat6 {
    let red = g.rotation.transpose() * gd.rotation;
    let fp = top(&elastic_force(g, gd, gains));
    let rk = red * gains.kr;
    let mut b = Mat6::zeros();
    b.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(red * gains.kp * red.transpose()));
    b.fixed_view_mut::<3, 3>(0, 3).copy_from(&hat3(&fp));
    b.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(Mat3::identity() * rk.trace() - rk));
    b
}

/// Propagates `g` and `g_d` along their current velocities for a time `h`.
pub(crate) fn advance(g: &Pose, v_b: &Twist, des: &DesiredState, h: f64) -> (Pose, Pose) {
    (
        g.compose(&exp_se3(&v_b.scale(h))),
        des.gd.compose(&exp_se3(&des.vd_b.scale(h))),
    )
}

/// `|dP/dt - f_g^T e_V|`, with `dP/dt` by a central difference (step 1e-6)
/// of `P` along `g exp(t V^b)`, `g_d exp(t V_d^b)`.
pub fn potential_rate_identity_check(
    g: &Pose,
    gd: &Pose,
    v_b: &Twist,
    des: &DesiredState,
    gains: &Gains,
) -> f64 {
    let des = DesiredState { gd: *gd, ..*des };
    let h = 1e-6;
    let (gp, gdp) = advance(g, v_b, &des, h);
    let (gm, gdm) = advance(g, v_b, &des, -h);
    let rate_fd = (potential(&gp, &gdp, gains) - potential(&gm, &gdm, gains)) / (2.0 * h);
    let ev = velocity_error(g, v_b, &des).to_vector();
    (rate_fd - elastic_force(g, gd, gains).dot(&ev)).abs()
}

/// `|d/dt f_g - B_K e_V|`, with `d/dt f_g` by a central difference (step
/// 1e-6) along the same curves as [`potential_rate_identity_check`].
pub fn elastic_force_rate_check(
    g: &Pose,
    gd: &Pose,
    v_b: &Twist,
    des: &DesiredState,
    gains: &Gains,
) -> f64 {
    let des = DesiredState { gd: *gd, ..*des };
    let h = 1e-6;
    let (gp, gdp) = advance(g, v_b, &des, h);
    let (gm, gdm) = advance(g, v_b, &des, -h);
    let rate_fd = (elastic_force(&gp, &gdp, gains) - elastic_force(&gm, &gdm, gains)) / (2.0 * h);
    let ev = velocity_error(g, v_b, &des).to_vector();
    (rate_fd - stiffness_jacobian(g, gd, gains) * ev).norm()
}

/// Spatial-frame errors of the benchmark law:
/// `e_g^s = [p - p_d; sum_i r_di x r_i]`, `e_V^s = V^s - V_d^s`.
pub fn spatial_errors(g: &Pose, gd: &Pose, v_s: &Twist, vd_s: &Twist) -> (Vec6, Vec6) {
    let ep = g.translation - gd.translation;
    let er = (0..3).fold(Vec3::zeros(), |acc, i| {
        acc + gd.rotation.column(i).cross(&g.rotation.column(i))
    });
    (stack(&ep, &er), v_s.to_vector() - vd_s.to_vector())
}

/// `Phi = Psi + e_V^T e_V`.
pub fn dynamic_error(g: &Pose, gd: &Pose, e_v: &Twist) -> f64 {
    error_function(g, gd) + e_v.to_vector().norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{exp_so3, rot_z};
    use std::f64::consts::PI;

    fn sample_pose() -> Pose {
        Pose::from_parts(exp_so3(&Vec3::new(0.3, -0.5, 0.8)), Vec3::new(0.2, -0.1, 0.4))
    }

    #[test]
    fn error_function_values() {
        let g = sample_pose();
        assert_eq!(error_function(&g, &g), 0.0);
        let shifted = Pose::from_parts(g.rotation, g.translation + Vec3::x());
        assert!((error_function(&shifted, &g) - 0.5).abs() < 1e-15);
        let turned = Pose::from_rotation(rot_z(PI));
        assert!((error_function(&turned, &Pose::identity()) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn position_error_values() {
        let g = sample_pose();
        assert_eq!(position_error(&g, &g), Vec6::zeros());
        let d = Vec3::new(0.1, -0.2, 0.3);
        let e = position_error(&Pose::from_translation(d), &Pose::identity());
        assert_eq!(e, stack(&d, &Vec3::zeros()));
    }

    #[test]
    fn desired_velocity_at_coincident_poses() {
        let g = sample_pose();
        let des = DesiredState {
            gd: g,
            vd_b: Twist::new(Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.4, 0.5, 0.6)),
            vd_b_dot: Twist::zero(),
        };
        let v = desired_velocity_star(&g, &des);
        assert!((v.to_vector() - des.vd_b.to_vector()).abs().max() < 1e-15);
        let pure = DesiredState {
            vd_b: Twist::new(Vec3::new(0.1, 0.2, 0.3), Vec3::zeros()),
            ..des
        };
        let v = desired_velocity_star(&g, &pure);
        assert!((v.v - pure.vd_b.v).abs().max() < 1e-15);
        assert_eq!(v.w, Vec3::zeros());
    }

    #[test]
    fn desired_accel_special_cases() {
        let g = sample_pose();
        let vb = Twist::new(Vec3::new(0.3, 0.0, -0.1), Vec3::new(0.2, 0.1, 0.0));
        let still = DesiredState::stationary(Pose::identity());
        assert_eq!(desired_accel_star(&g, &vb, &still).to_vector(), Vec6::zeros());
        let des = DesiredState { gd: g, vd_b: vb, vd_b_dot: Twist::new(Vec3::x(), Vec3::y()) };
        let a = desired_accel_star(&g, &vb, &des);
        assert!((a.to_vector() - des.vd_b_dot.to_vector()).abs().max() < 1e-15);
    }

    #[test]
    fn velocity_error_cases() {
        let g = sample_pose();
        let des = DesiredState {
            gd: Pose::identity(),
            vd_b: Twist::new(Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.4, 0.5, 0.6)),
            vd_b_dot: Twist::zero(),
        };
        let vstar = desired_velocity_star(&g, &des);
        assert!(velocity_error(&g, &vstar, &des).to_vector().abs().max() < 1e-15);
        let at_goal = DesiredState { gd: g, ..des };
        let vb = Twist::new(Vec3::x(), Vec3::z());
        let ev = velocity_error(&g, &vb, &at_goal).to_vector();
        assert!((ev - (vb.to_vector() - des.vd_b.to_vector())).abs().max() < 1e-15);
    }

    #[test]
    fn potential_reduces_to_error_function_for_unit_gains() {
        let gains = Gains::isotropic(1.0, 1.0, 1.0, 0.0).unwrap();
        let g = sample_pose();
        let gd = Pose::from_parts(rot_z(0.4), Vec3::new(-0.3, 0.1, 0.0));
        assert!(potential(&g, &g, &gains).abs() < 1e-14);
        assert!((potential(&g, &gd, &gains) - error_function(&g, &gd)).abs() < 1e-14);
    }

    #[test]
    fn isotropic_elastic_force_is_scaled_position_error() {
        let k = 37.5;
        let gains = Gains::isotropic(k, k, 1.0, 0.0).unwrap();
        let g = sample_pose();
        let gd = Pose::from_parts(rot_z(-1.1), Vec3::new(0.5, 0.1, -0.2));
        let f = elastic_force(&g, &gd, &gains);
        let e = position_error(&g, &gd) * k;
        assert!((f - e).abs().max() < 1e-13);
        assert!(elastic_force(&g, &g, &gains).abs().max() < 1e-12);
    }

    #[test]
    fn translational_force_uses_rotated_stiffness() {
        let kp = Mat3::new(100.0, 10.0, 0.0, 10.0, 50.0, 5.0, 0.0, 5.0, 20.0);
        let gains = Gains::new(kp, Mat3::identity(), Mat6::identity(), 0.0).unwrap();
        let g = sample_pose();
        let gd = Pose::from_parts(rot_z(0.9), Vec3::new(0.5, 0.1, -0.2));
        let red = g.rotation.transpose() * gd.rotation;
        let ep = top(&position_error(&g, &gd));
        let fp = top(&elastic_force(&g, &gd, &gains));
        assert!((fp - red * kp * red.transpose() * ep).abs().max() < 1e-13);
    }

    #[test]
    fn stiffness_jacobian_at_goal() {
        let kp = Mat3::from_diagonal(&Vec3::new(10.0, 20.0, 30.0));
        let kr = Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 4.0));
        let gains = Gains::new(kp, kr, Mat6::identity(), 0.0).unwrap();
        let g = sample_pose();
        let b = stiffness_jacobian(&g, &g, &gains);
        let mut expected = Mat6::zeros();
        expected.fixed_view_mut::<3, 3>(0, 0).copy_from(&kp);
        expected
            .fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Mat3::identity() * kr.trace() - kr));
        assert!((b - expected).abs().max() < 1e-13);

        let iso = Gains::isotropic(5.0, 7.0, 1.0, 0.0).unwrap();
        let b = stiffness_jacobian(&g, &g, &iso);
        assert!((b.fixed_view::<3, 3>(3, 3) - Mat3::identity() * 14.0).abs().max() < 1e-13);
    }

    #[test]
    fn potential_rate_residual_when_static() {
        let gains = Gains::isotropic(100.0, 100.0, 50.0, 0.0).unwrap();
        let g = sample_pose();
        let gd = Pose::identity();
        let des = DesiredState::stationary(gd);
        assert_eq!(potential_rate_identity_check(&g, &gd, &Twist::zero(), &des, &gains), 0.0);
        let vb = Twist::new(Vec3::new(0.1, 0.0, 0.2), Vec3::new(0.0, 0.3, 0.0));
        let moving = DesiredState { gd: g, vd_b: vb, vd_b_dot: Twist::zero() };
        assert!(potential_rate_identity_check(&g, &g, &vb, &moving, &gains) < 1e-10);
    }

    #[test]
    fn spatial_rotation_error() {
        let g = sample_pose();
        let (eg, ev) = spatial_errors(&g, &g, &Twist::zero(), &Twist::zero());
        assert_eq!(eg, Vec6::zeros());
        assert_eq!(ev, Vec6::zeros());
        for theta in [1e-3, 0.05, 0.3] {
            let (eg, _) = spatial_errors(
                &Pose::from_rotation(rot_z(theta)),
                &Pose::identity(),
                &Twist::zero(),
                &Twist::zero(),
            );
            let expected = Vec3::new(0.0, 0.0, 2.0 * theta.sin());
            assert!((bottom(&eg) - expected).abs().max() < 1e-15);
        }
    }

    #[test]
    fn dynamic_error_values() {
        let g = sample_pose();
        assert_eq!(dynamic_error(&g, &g, &Twist::zero()), 0.0);
        let e = Twist::new(Vec3::x(), Vec3::zeros());
        assert_eq!(dynamic_error(&g, &g, &e), 1.0);
    }

    #[test]
    fn gains_validation() {
        assert!(Gains::isotropic(-1.0, 1.0, 1.0, 0.0).is_err());
        assert!(Gains::isotropic(1.0, 1.0, 1.0, -0.1).is_err());
        let mut kp = Mat3::identity();
        kp[(0, 1)] = 0.5;
        assert!(Gains::new(kp, Mat3::identity(), Mat6::identity(), 0.0).is_err());
    }
}
