mod common;

use common::*;
use gic::se3::*;
use proptest::prelude::*;

#[test]
fn half_turn_about_z() {
    let r = exp_so3(&Vec3::new(0.0, 0.0, std::f64::consts::PI));
    assert!((r - Mat3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0))).abs().max() < 1e-15);
    let w = log_so3(&r).unwrap();
    assert!((w.norm() - std::f64::consts::PI).abs() < 1e-9);
    assert!((w[0].abs() + w[1].abs()) < 1e-9);
}

#[test]
fn tiny_angles_use_a_stable_branch() {
    for s in [1e-7, 1e-9, 1e-12] {
        let w = Vec3::new(s, -2.0 * s, 0.5 * s);
        let r = exp_so3(&w);
        assert!((r - series_exp(&cross_matrix(&w), 5)).abs().max() < 1e-15);
        assert!((log_so3(&r).unwrap() - w).norm() < 1e-15);
        let xi = Twist::new(Vec3::new(1.0, 2.0, 3.0), w);
        let g = exp_se3(&xi).to_homogeneous();
        assert!((g - series_exp(&hat6(&xi), 5)).abs().max() < 1e-14);
    }
}

#[test]
fn pure_translation_exponential() {
    let d = Vec3::new(0.3, -1.2, 2.0);
    let g = exp_se3(&Twist::new(d, Vec3::zeros()));
    assert_eq!(g.rotation, Mat3::identity());
    assert_eq!(g.translation, d);
}

#[test]
fn adjoint_of_pure_rotation_is_block_diagonal() {
    let r = exp_so3(&Vec3::new(0.2, 0.4, -0.1));
    let ad = Pose::from_rotation(r).adjoint();
    assert_eq!(ad.fixed_view::<3, 3>(0, 0), r);
    assert_eq!(ad.fixed_view::<3, 3>(3, 3), r);
    assert_eq!(ad.fixed_view::<3, 3>(0, 3), Mat3::zeros());
    assert_eq!(ad.fixed_view::<3, 3>(3, 0), Mat3::zeros());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hat3_is_the_cross_product(w in vec3(10.0), u in vec3(10.0)) {
        let m = hat3(&w);
        prop_assert_eq!(m + m.transpose(), Mat3::zeros());
        prop_assert_eq!(m, cross_matrix(&w));
        let expect = Vec3::new(
            w[1] * u[2] - w[2] * u[1],
            w[2] * u[0] - w[0] * u[2],
            w[0] * u[1] - w[1] * u[0],
        );
        prop_assert!((m * u - expect).norm() < 1e-12);
    }

    #[test]
    fn hat_vee_round_trips(w in vec3(10.0), x in vec6(10.0)) {
        prop_assert_eq!(vee3(&hat3(&w)).unwrap(), w);
        let s = hat3(&w);
        prop_assert_eq!(hat3(&vee3(&s).unwrap()), s);
        let xi = Twist::from_vector(&x);
        prop_assert_eq!(vee6(&hat6(&xi)).unwrap(), xi);
        let m = hat6(&xi);
        prop_assert_eq!(m.row(3).transpose(), nalgebra::Vector4::zeros());
    }

    #[test]
    fn exp_so3_matches_series_and_is_a_rotation(w in vec3(3.0)) {
        let r = exp_so3(&w);
        prop_assert!((r - series_exp(&cross_matrix(&w), 30)).abs().max() < 1e-10);
        prop_assert!((r.transpose() * r - Mat3::identity()).abs().max() < 1e-10);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exp_se3_matches_series(x in vec6(2.0)) {
        let xi = Twist::from_vector(&x);
        let g = exp_se3(&xi).to_homogeneous();
        prop_assert!((g - series_exp(&hat6(&xi), 30)).abs().max() < 1e-10);
    }

    #[test]
    fn log_inverts_exp(w in vec3(3.0)) {
        prop_assume!(w.norm() < 3.1);
        let back = log_so3(&exp_so3(&w)).unwrap();
        prop_assert!((back - w).norm() < 1e-9);
    }

    #[test]
    fn exp_of_log_recovers_rotation(r in rotation()) {
        prop_assume!(r.trace() > -1.0 + 1e-6);
        let w = log_so3(&r).unwrap();
        prop_assert!(w.norm() <= std::f64::consts::PI + 1e-12);
        prop_assert!((exp_so3(&w) - r).abs().max() < 1e-8);
    }

    #[test]
    fn compose_with_inverse_is_identity(g in pose()) {
        let e = g.compose(&g.inverse()).to_homogeneous();
        prop_assert!((e - nalgebra::Matrix4::identity()).abs().max() < 1e-10);
        let h = g.to_homogeneous().try_inverse().unwrap();
        prop_assert!((g.inverse().to_homogeneous() - h).abs().max() < 1e-12);
    }

    #[test]
    fn adjoint_is_conjugation(g in pose(), x in vec6(2.0)) {
        let xi = Twist::from_vector(&x);
        let gm = g.to_homogeneous();
        let conj = gm * hat6(&xi) * gm.try_inverse().unwrap();
        let expect = vee6(&conj).unwrap().to_vector();
        prop_assert!((g.adjoint() * x - expect).norm() < 1e-10);
    }

    #[test]
    fn adjoint_is_a_homomorphism(a in pose(), b in pose()) {
        let lhs = a.compose(&b).adjoint();
        prop_assert!((lhs - a.adjoint() * b.adjoint()).abs().max() < 1e-10);
        prop_assert!((Pose::identity().adjoint() - Mat6::identity()).abs().max() == 0.0);
    }

    #[test]
    fn ad_is_the_commutator(x in vec6(2.0), y in vec6(2.0)) {
        let (a, b) = (Twist::from_vector(&x), Twist::from_vector(&y));
        let bracket = hat6(&a) * hat6(&b) - hat6(&b) * hat6(&a);
        prop_assert!((ad(&a) * y - vee6(&bracket).unwrap().to_vector()).norm() < 1e-12);
    }

    #[test]
    fn vee_trace_lemma(a in mat3(5.0), b in vec3(5.0)) {
        let lhs = vee3(&(a * hat3(&b) + hat3(&b) * a.transpose())).unwrap();
        let rhs = (Mat3::identity() * a.transpose().trace() - a.transpose()) * b;
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn quaternion_reproduces_rotation(r in rotation()) {
        let [w, x, y, z] = Pose::from_rotation(r).quaternion_wxyz();
        prop_assert!(((w * w + x * x + y * y + z * z) - 1.0).abs() < 1e-12);
        let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        prop_assert!((q.to_rotation_matrix().into_inner() - r).abs().max() < 1e-12);
        prop_assert!(w >= 0.0);
    }
}
