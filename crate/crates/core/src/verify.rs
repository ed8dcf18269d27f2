//! Numerical identity suite behind `gic verify`.
//!
//! Every check samples from a fixed-seed generator, so two runs print the same
//! numbers. A check passes when its worst residual is below its tolerance.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controllers::{evaluate, ControllerKind};
use crate::dynamics::{task_space_dynamics, Frame, JointState};
use crate::geometry::{
    elastic_force, elastic_force_rate_check, error_function, position_error, potential,
    potential_rate_identity_check, DesiredState, Gains,
};
use crate::kinematics::RobotModel;
use crate::se3::{exp_se3, exp_so3, hat3, hat6, vee3, vee6, Mat3, Mat4, Pose, Twist, Vec3, Vec6};
use crate::simulation::{local_lyapunov_rates, max_lyapunov_increase, run_scenario, Scenario};
use crate::Result;

pub const SEED: u64 = 0x5_e39c;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst.is_finite() && self.worst < self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} worst {:.3e}  tol {:.0e}  ({} samples)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.samples
        )
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec3<R: Rng>(rng: &mut R, scale: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(-scale..scale))
}

pub fn random_vec6<R: Rng>(rng: &mut R, scale: f64) -> Vec6 {
    Vec6::from_fn(|_, _| rng.random_range(-scale..scale))
}

/// Rotation by a uniformly drawn axis-angle vector with `|w| < pi`.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    loop {
        let w = random_vec3(rng, std::f64::consts::PI);
        if w.norm() < std::f64::consts::PI {
            return exp_so3(&w);
        }
    }
}

pub fn random_pose<R: Rng>(rng: &mut R) -> Pose {
    Pose::from_parts(random_rotation(rng), random_vec3(rng, 1.0))
}

pub fn random_spd3<R: Rng>(rng: &mut R) -> Mat3 {
    let a = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    a * a.transpose() + Mat3::identity() * 0.5
}

/// Anisotropic gains with `lambda = 0.1`.
pub fn random_gains<R: Rng>(rng: &mut R) -> Gains {
    let kd_half = nalgebra::Matrix6::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let kd = kd_half * kd_half.transpose() + nalgebra::Matrix6::identity();
    Gains::new(random_spd3(rng) * 10.0, random_spd3(rng) * 10.0, kd * 5.0, 0.1)
        .expect("constructed SPD")
}

pub fn random_desired<R: Rng>(rng: &mut R) -> DesiredState {
    DesiredState {
        gd: random_pose(rng),
        vd_b: Twist::from_vector(&random_vec6(rng, 1.0)),
        vd_b_dot: Twist::from_vector(&random_vec6(rng, 1.0)),
    }
}

/// Joint state whose body Jacobian condition number stays below `max_cond`.
pub fn random_joint_state<R: Rng>(rng: &mut R, model: &RobotModel, max_cond: f64) -> JointState {
    let n = model.dof();
    loop {
        let q = DVector::from_fn(n, |_, _| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        let qdot = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if let Ok(ts) = task_space_dynamics(model, &q, &qdot, Frame::Body) {
            if ts.condition < max_cond {
                return JointState::new(q, qdot);
            }
        }
    }
}

/// Truncated power series of a square matrix exponential.
pub fn exp_series<const D: usize>(
    a: &nalgebra::SMatrix<f64, D, D>,
    terms: usize,
) -> nalgebra::SMatrix<f64, D, D> {
    let mut sum = nalgebra::SMatrix::<f64, D, D>::identity();
    let mut term = sum;
    for k in 1..terms {
        term = term * a / k as f64;
        sum += term;
    }
    sum
}

fn worst<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) })
}

/// hat/vee round trips, exponentials against their series, the Adjoint
/// homomorphism and the vee identity `(A b^ + b^ A^T)^v = (tr(A) I - A^T) b`.
pub fn lie_core(samples: usize) -> CheckResult {
    let mut rng = rng(SEED);
    let w = worst((0..samples).map(|_| {
        let w = random_vec3(&mut rng, 2.0);
        let xi = Twist::from_vector(&random_vec6(&mut rng, 2.0));
        let round3 = (vee3(&hat3(&w)).expect("skew") - w).norm();
        let round6 = (vee6(&hat6(&xi)).expect("twist").to_vector() - xi.to_vector()).norm();
        let so3 = (exp_so3(&w) - exp_series(&hat3(&w), 30)).abs().max();
        let se3: Mat4 = exp_series(&hat6(&xi), 30);
        let se3 = (exp_se3(&xi).to_homogeneous() - se3).abs().max();
        let (a, b) = (random_pose(&mut rng), random_pose(&mut rng));
        let hom = (a.compose(&b).adjoint() - a.adjoint() * b.adjoint()).abs().max();
        let m = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let lhs = vee3(&(m * hat3(&w) + hat3(&w) * m.transpose())).expect("skew");
        let rhs = (Mat3::identity() * m.trace() - m.transpose()) * w;
        let lemma = (lhs - rhs).norm();
        // Scaled so that every tolerance reads as 1e-10.
        round3.max(round6).max(so3).max(se3).max(hom).max(lemma * 1e2)
    }));
    CheckResult { name: "lie_core", worst: w, tolerance: 1e-10, samples }
}

/// `Psi(g_l g, g_l g_d) = Psi(g, g_d)`.
pub fn left_invariance(samples: usize) -> CheckResult {
    let mut rng = rng(SEED + 1);
    let w = worst((0..samples).map(|_| {
        let (g, gd, gl) = (random_pose(&mut rng), random_pose(&mut rng), random_pose(&mut rng));
        (error_function(&gl.compose(&g), &gl.compose(&gd)) - error_function(&g, &gd)).abs()
    }));
    CheckResult { name: "left_invariance", worst: w, tolerance: 1e-12, samples }
}

fn directional<F: Fn(&Pose) -> f64>(f: F, g: &Pose, eta: &Twist, eps: f64) -> f64 {
    let gp = g.compose(&exp_se3(&eta.scale(eps)));
    let gm = g.compose(&exp_se3(&eta.scale(-eps)));
    (f(&gp) - f(&gm)) / (2.0 * eps)
}

/// `d/de Psi(g exp(e eta), g_d) = e_g^T eta`.
pub fn error_perturbation(samples: usize) -> CheckResult {
    let mut rng = rng(SEED + 2);
    let w = worst((0..samples).map(|_| {
        let (g, gd) = (random_pose(&mut rng), random_pose(&mut rng));
        let eta = Twist::from_vector(&random_vec6(&mut rng, 1.0));
        let fd = directional(|x| error_function(x, &gd), &g, &eta, 1e-6);
        (fd - position_error(&g, &gd).dot(&eta.to_vector())).abs()
    }));
    CheckResult { name: "error_perturbation", worst: w, tolerance: 1e-6, samples }
}

/// `d/de P(g exp(e eta), g_d) = f_g^T eta` with anisotropic gains.
pub fn potential_perturbation(samples: usize) -> CheckResult {
    let mut rng = rng(SEED + 3);
    let w = worst((0..samples).map(|_| {
        let (g, gd) = (random_pose(&mut rng), random_pose(&mut rng));
        let gains = random_gains(&mut rng);
        let eta = Twist::from_vector(&random_vec6(&mut rng, 1.0));
        let fd = directional(|x| potential(x, &gd, &gains), &g, &eta, 1e-6);
        (fd - elastic_force(&g, &gd, &gains).dot(&eta.to_vector())).abs() / (1.0 + fd.abs())
    }));
    CheckResult { name: "potential_perturbation", worst: w, tolerance: 1e-6, samples }
}

/// `dP/dt = f_g^T e_V` along free motions of `g` and `g_d`.
pub fn potential_rate(samples: usize) -> CheckResult {
    let mut rng = rng(SEED + 4);
    let w = worst((0..samples).map(|_| {
        let g = random_pose(&mut rng);
        let des = random_desired(&mut rng);
        let gains = random_gains(&mut rng);
        let v_b = Twist::from_vector(&random_vec6(&mut rng, 1.0));
        potential_rate_identity_check(&g, &des.gd, &v_b, &des, &gains)
    }));
    CheckResult { name: "potential_rate", worst: w, tolerance: 1e-5, samples }
}

/// `d/dt f_g = B_K e_V` along free motions of `g` and `g_d`.
pub fn elastic_force_rate(samples: usize) -> CheckResult {
    let mut rng = rng(SEED + 5);
    let w = worst((0..samples).map(|_| {
        let g = random_pose(&mut rng);
        let des = random_desired(&mut rng);
        let gains = random_gains(&mut rng);
        let v_b = Twist::from_vector(&random_vec6(&mut rng, 1.0));
        elastic_force_rate_check(&g, &des.gd, &v_b, &des, &gains)
    }));
    CheckResult { name: "elastic_force_rate", worst: w, tolerance: 1e-4, samples }
}

/// Symmetric part of `dM~/dt - 2 C~`, with `dM~/dt` by a central difference
/// along `q + t qdot`, relative to `1 + |dM~/dt|`.
pub fn skew_residual(model: &RobotModel, state: &JointState, h: f64) -> Result<f64> {
    let ts = task_space_dynamics(model, &state.q, &state.qdot, Frame::Body)?;
    let qp = &state.q + &state.qdot * h;
    let qm = &state.q - &state.qdot * h;
    let mp = task_space_dynamics(model, &qp, &state.qdot, Frame::Body)?.mt;
    let mm = task_space_dynamics(model, &qm, &state.qdot, Frame::Body)?.mt;
    let mdot = (mp - mm) / (2.0 * h);
    let n = mdot - ts.ct * 2.0;
    Ok((n + n.transpose()).norm() / (1.0 + mdot.norm()))
}

pub fn task_space_skew(samples: usize) -> CheckResult {
    let model = RobotModel::ur5e_approx();
    let mut rng = rng(SEED + 6);
    let w = worst((0..samples).map(|_| {
        let state = random_joint_state(&mut rng, &model, 50.0);
        skew_residual(&model, &state, 1e-6).unwrap_or(f64::NAN)
    }));
    CheckResult { name: "task_space_skew", worst: w, tolerance: 1e-5, samples }
}

/// gic2 with `lambda = 0` against gic1, and gic1 against the intuitive law
/// under isotropic gains. Torque differences relative to `1 + |tau|`.
pub fn reductions(samples: usize) -> CheckResult {
    let model = RobotModel::ur5e_approx();
    let mut rng = rng(SEED + 7);
    let w = worst((0..samples).map(|_| {
        let state = random_joint_state(&mut rng, &model, 50.0);
        let des = random_desired(&mut rng);
        let aniso = random_gains(&mut rng).with_lambda(0.0);
        let k = rng.random_range(10.0..200.0);
        let iso = Gains::isotropic(k, k, 50.0, 0.1).expect("positive gains");
        let run = |kind, gains: &Gains| evaluate(kind, &model, &state, &des, gains).map(|o| o.tau);
        let (Ok(a), Ok(b), Ok(c), Ok(d)) = (
            run(ControllerKind::Gic2, &aniso),
            run(ControllerKind::Gic1, &aniso),
            run(ControllerKind::Gic1, &iso),
            run(ControllerKind::Intuitive, &iso),
        ) else {
            return f64::NAN;
        };
        ((a.clone() - &b).amax() / (1.0 + b.amax())).max((c.clone() - &d).amax() / (1.0 + c.amax()))
    }));
    CheckResult { name: "reductions", worst: w, tolerance: 1e-12, samples }
}

/// Closed-loop dissipation at random states of the tracking scenario:
/// `dV/dt = -e_V^T K_d e_V` under gic1 and
/// `dW/dt = -ebar^T K_d ebar - lambda |f_g|^2` under gic2, with the rates
/// taken along the simulated flow. Residuals relative to `1 + decay`.
pub fn lyapunov_flow(kind: ControllerKind, samples: usize) -> CheckResult {
    let scenario = Scenario::tracking().with_controller(kind);
    let mut rng = rng(SEED + 8);
    let w = worst((0..samples).map(|_| {
        let state = random_joint_state(&mut rng, &scenario.robot, 50.0);
        let t = rng.random_range(0.01..scenario.duration - 0.01);
        match local_lyapunov_rates(&scenario, &state, t, 1e-6) {
            Ok(r) if kind == ControllerKind::Gic2 => r.w_residual() / (1.0 + r.w_decay),
            Ok(r) => r.v_residual() / (1.0 + r.v_decay),
            Err(_) => f64::NAN,
        }
    }));
    let name = if kind == ControllerKind::Gic2 { "w_decay" } else { "v_dissipation" };
    CheckResult { name, worst: w, tolerance: 1e-4, samples }
}

/// Largest per-step increase of `V` inside a waypoint segment over the first
/// `duration` seconds of the gic1 regulation run.
pub fn v_monotone(duration: f64) -> CheckResult {
    let mut scenario = Scenario::regulation();
    scenario.duration = duration;
    let (w, samples) = match run_scenario(&scenario) {
        Ok(trace) => (max_lyapunov_increase(&trace).0.max(0.0), trace.records.len()),
        Err(_) => (f64::NAN, 0),
    };
    CheckResult { name: "v_monotone", worst: w, tolerance: 1e-8, samples }
}

/// The full suite, in a fixed order.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        lie_core(200),
        left_invariance(1000),
        error_perturbation(500),
        potential_perturbation(500),
        potential_rate(500),
        elastic_force_rate(500),
        task_space_skew(500),
        reductions(200),
        lyapunov_flow(ControllerKind::Gic1, 50),
        lyapunov_flow(ControllerKind::Gic2, 50),
        v_monotone(2.0),
    ]
}
