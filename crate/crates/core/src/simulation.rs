//! Fixed-step closed-loop simulation.
//!
//! The state `(q, qd)` is integrated in joint space with classical RK4; the
//! controller is re-evaluated at every stage. Task-space quantities are
//! recomputed from `q` at each record, so the pose never drifts off SE(3).

use std::f64::consts::PI;

use crate::controllers::{evaluate, evaluate_with_dynamics, ControlOutput, ControllerKind};
use crate::dynamics::{solve_acceleration, task_space_dynamics, Frame, JointState};
use crate::error::{GicError, Result};
use crate::geometry::{
    desired_velocity_star, elastic_force, error_function, potential, DesiredState, Gains,
};
use crate::kinematics::{body_jacobian, forward_kinematics, JointVector, RobotModel};
use crate::se3::{Mat3, Pose, Twist, Vec3, Vec6, ROTATION_TOLERANCE};

/// Slack used when comparing times that are integer multiples of `dt`.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Piecewise-constant set points `(t_start, g_d)`; zero desired velocity.
    Waypoints { points: Vec<(f64, Pose)> },
    /// `p_d(t) = [-0.52 - 0.2 cos(pi t), 0.2 sin(pi t), 0.2 + 0.1 sin(pi t / 2)]`
    /// with a constant orientation.
    Sinusoid { rotation: Mat3 },
}

/// Rotation shared by the published scenarios: `[[1,0,0],[0,0,-1],[0,1,0]]`.
pub fn reference_rotation() -> Mat3 {
    Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
}

/// Waypoint orientation `[[0,-1,0],[0,0,-1],[1,0,0]]`.
pub fn waypoint_rotation_a() -> Mat3 {
    Mat3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)
}

impl Trajectory {
    pub fn waypoints(points: Vec<(f64, Pose)>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| GicError::InvalidScenario("no waypoints".into()))?;
        if first.0 != 0.0 {
            return Err(GicError::InvalidScenario(format!(
                "first waypoint must start at t=0, got {}",
                first.0
            )));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(GicError::InvalidScenario(format!(
                    "waypoint times must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for (t, pose) in &points {
            pose.validate(ROTATION_TOLERANCE)
                .map_err(|e| GicError::InvalidScenario(format!("waypoint at t={t}: {e}")))?;
        }
        Ok(Trajectory::Waypoints { points })
    }

    pub fn sinusoid(rotation: Mat3) -> Result<Self> {
        Pose::new(rotation, Vec3::zeros())
            .map_err(|e| GicError::InvalidScenario(format!("sinusoid rotation: {e}")))?;
        Ok(Trajectory::Sinusoid { rotation })
    }

    /// The five-waypoint regulation schedule, 3 s per segment.
    pub fn regulation_schedule() -> Self {
        let ra = waypoint_rotation_a();
        let rb = reference_rotation();
        let p = |x: f64, y: f64| Vec3::new(x, y, 0.2);
        Trajectory::Waypoints {
            points: vec![
                (0.0, Pose::from_parts(ra, p(-0.4, 0.3))),
                (3.0, Pose::from_parts(rb, p(-0.4, -0.3))),
                (6.0, Pose::from_parts(ra, p(-0.6, -0.3))),
                (9.0, Pose::from_parts(rb, p(-0.6, 0.3))),
                (12.0, Pose::from_parts(ra, p(-0.4, 0.3))),
            ],
        }
    }

    pub fn is_tracking(&self) -> bool {
        matches!(self, Trajectory::Sinusoid { .. })
    }

    /// Index of the waypoint active at `t` (always 0 for a sinusoid).
    pub fn segment_at(&self, t: f64) -> usize {
        match self {
            Trajectory::Waypoints { points } => points
                .iter()
                .rposition(|(start, _)| t + TIME_SLACK >= *start)
                .unwrap_or(0),
            Trajectory::Sinusoid { .. } => 0,
        }
    }

    fn desired_unchecked(&self, t: f64) -> DesiredState {
        match self {
            Trajectory::Waypoints { points } => DesiredState::stationary(points[self.segment_at(t)].1),
            Trajectory::Sinusoid { rotation } => {
                let (p, pd, pdd) = sinusoid_position(t);
                let rt = rotation.transpose();
                DesiredState {
                    gd: Pose::from_parts(*rotation, p),
                    vd_b: Twist::new(rt * pd, Vec3::zeros()),
                    vd_b_dot: Twist::new(rt * pdd, Vec3::zeros()),
                }
            }
        }
    }

    /// Desired state at an RK4 stage time. Set points are held at the
    /// segment active at the step start so a switch never lands mid-step.
    fn desired_in_step(&self, step_start: f64, stage: f64) -> DesiredState {
        match self {
            Trajectory::Waypoints { .. } => self.desired_unchecked(step_start),
            Trajectory::Sinusoid { .. } => self.desired_unchecked(stage),
        }
    }
}

/// Position, velocity and acceleration of the sinusoidal target.
pub fn sinusoid_position(t: f64) -> (Vec3, Vec3, Vec3) {
    let (s, c) = (PI * t).sin_cos();
    let (sh, ch) = (0.5 * PI * t).sin_cos();
    let p = Vec3::new(-0.52 - 0.2 * c, 0.2 * s, 0.2 + 0.1 * sh);
    let v = Vec3::new(0.2 * PI * s, 0.2 * PI * c, 0.05 * PI * ch);
    let a = Vec3::new(0.2 * PI * PI * c, -0.2 * PI * PI * s, -0.025 * PI * PI * sh);
    (p, v, a)
}

pub fn desired_state_at(trajectory: &Trajectory, t: f64, duration: f64) -> Result<DesiredState> {
    if !(t >= -TIME_SLACK && t <= duration + TIME_SLACK) {
        return Err(GicError::TimeOutOfRange { t, duration });
    }
    Ok(trajectory.desired_unchecked(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub robot: RobotModel,
    pub controller: ControllerKind,
    pub gains: Gains,
    pub duration: f64,
    pub dt: f64,
    pub q0: JointVector,
    pub qdot0: JointVector,
    pub trajectory: Trajectory,
    /// Body-frame wrench applied at the end effector.
    pub external_wrench: Vec6,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GicError::InvalidScenario(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(GicError::InvalidScenario(format!(
                "duration {} shorter than dt {}",
                self.duration, self.dt
            )));
        }
        let n = self.robot.dof();
        for (what, v) in [("q0", &self.q0), ("qdot0", &self.qdot0)] {
            if v.len() != n {
                return Err(GicError::InvalidScenario(format!(
                    "{what} has {} entries, robot has {n} joints",
                    v.len()
                )));
            }
        }
        if !self.external_wrench.iter().all(|x| x.is_finite()) {
            return Err(GicError::InvalidScenario("external wrench is not finite".into()));
        }
        Ok(())
    }

    /// Bundled multi-point regulation scenario.
    pub fn regulation() -> Self {
        crate::io::load_scenario("regulation").expect("bundled regulation scenario is valid")
    }

    /// Bundled sinusoid tracking scenario.
    pub fn tracking() -> Self {
        crate::io::load_scenario("tracking").expect("bundled tracking scenario is valid")
    }

    pub fn with_controller(mut self, controller: ControllerKind) -> Self {
        self.controller = controller;
        self
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt + TIME_SLACK).floor() as usize
    }

    pub fn initial_state(&self) -> JointState {
        JointState::new(self.q0.clone(), self.qdot0.clone())
    }
}

/// One classical RK4 step of `(q, qd)` with `qdd = accel(stage_time, stage_state)`.
pub fn rk4_integrate<F>(state: &JointState, t: f64, dt: f64, mut accel: F) -> Result<JointState>
where
    F: FnMut(f64, &JointState) -> Result<JointVector>,
{
    let q = &state.q;
    let v = &state.qdot;
    let a1 = accel(t, state)?;
    let s2 = JointState::new(q + v * (0.5 * dt), v + &a1 * (0.5 * dt));
    let a2 = accel(t + 0.5 * dt, &s2)?;
    let s3 = JointState::new(q + &s2.qdot * (0.5 * dt), v + &a2 * (0.5 * dt));
    let a3 = accel(t + 0.5 * dt, &s3)?;
    let s4 = JointState::new(q + &s3.qdot * dt, v + &a3 * dt);
    let a4 = accel(t + dt, &s4)?;
    let q_next = q + (v + &s2.qdot * 2.0 + &s3.qdot * 2.0 + &s4.qdot) * (dt / 6.0);
    let v_next = v + (&a1 + &a2 * 2.0 + &a3 * 2.0 + &a4) * (dt / 6.0);
    Ok(JointState::new(q_next, v_next))
}

/// Joint torque of a body-frame end-effector wrench, `J_b^T F_e`.
fn external_torque(model: &RobotModel, q: &JointVector, wrench: &Vec6) -> Result<JointVector> {
    if wrench.iter().all(|x| *x == 0.0) {
        return Ok(JointVector::zeros(model.dof()));
    }
    Ok(body_jacobian(model, q)?.transpose() * wrench)
}

/// Closed-loop joint acceleration at one stage.
fn closed_loop_accel(
    model: &RobotModel,
    controller: ControllerKind,
    scenario: &Scenario,
    state: &JointState,
    des: &DesiredState,
) -> Result<JointVector> {
    let (out, dynamics) = evaluate_with_dynamics(controller, model, state, des, &scenario.gains)?;
    let te = external_torque(model, &state.q, &scenario.external_wrench)?;
    solve_acceleration(&dynamics, &state.qdot, &out.tau, &te)
}

/// Advances the closed loop by one step of length `dt` from time `t`.
pub fn rk4_step(
    model: &RobotModel,
    state: &JointState,
    controller: ControllerKind,
    scenario: &Scenario,
    t: f64,
    dt: f64,
) -> Result<JointState> {
    rk4_integrate(state, t, dt, |s, x| {
        let des = scenario.trajectory.desired_in_step(t, s);
        closed_loop_accel(model, controller, scenario, x, &des)
    })
}

/// Per-step record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub q: JointVector,
    pub qdot: JointVector,
    pub pose: Pose,
    pub desired: Pose,
    /// Waypoint index (0 for tracking).
    pub segment: usize,
    pub psi: f64,
    pub phi: f64,
    pub potential: f64,
    /// `1/2 e_V^T M~ e_V`.
    pub kinetic: f64,
    /// `V = 1/2 e_V^T M~ e_V + P`.
    pub v_lyap: f64,
    /// `W = 1/2 ebar_V^T M~ ebar_V + P`, `ebar_V = e_V + lambda f_g`.
    pub w_lyap: f64,
    /// `e_V^T K_d e_V`.
    pub v_decay: f64,
    /// `ebar_V^T K_d ebar_V + lambda |f_g|^2`.
    pub w_decay: f64,
    pub e_g: Vec6,
    pub e_v: Vec6,
    pub f_g: Vec6,
    pub tau: JointVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rms_position: [f64; 3],
    pub rms_psi: f64,
    pub rms_phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dof: usize,
    pub controller: String,
    pub records: Vec<Record>,
    pub summary: Summary,
    /// Whether the target moves (tracking) rather than jumping between set points.
    pub tracking: bool,
    pub lambda_g: f64,
}

/// Lyapunov monitors at one state. They are defined in the body frame for
/// every law, so traces of different controllers are comparable. Terms that
/// need `M~` (kinetic, `V`, `W`) are NaN at a singular pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitors {
    pub pose: Pose,
    pub psi: f64,
    pub phi: f64,
    pub potential: f64,
    pub kinetic: f64,
    pub v_lyap: f64,
    pub w_lyap: f64,
    pub v_decay: f64,
    pub w_decay: f64,
    pub e_g: Vec6,
    pub e_v: Vec6,
    pub f_g: Vec6,
}

pub fn monitors(
    model: &RobotModel,
    state: &JointState,
    des: &DesiredState,
    gains: &Gains,
) -> Result<Monitors> {
    let g = forward_kinematics(model, &state.q)?;
    let v_b = Vec6::from_iterator((body_jacobian(model, &state.q)? * &state.qdot).iter().copied());
    let e_v = v_b - desired_velocity_star(&g, des).to_vector();
    let f_g = elastic_force(&g, &des.gd, gains);
    let e_bar = e_v + f_g * gains.lambda_g;
    let psi = error_function(&g, &des.gd);
    let p = potential(&g, &des.gd, gains);
    // M~ does not exist at a singular pose; only the PD law gets there
    let (kinetic, kinetic_bar) = match task_space_dynamics(model, &state.q, &state.qdot, Frame::Body) {
        Ok(ts) => (0.5 * e_v.dot(&(ts.mt * e_v)), 0.5 * e_bar.dot(&(ts.mt * e_bar))),
        Err(GicError::NearSingularJacobian { .. }) => (f64::NAN, f64::NAN),
        Err(e) => return Err(e),
    };
    Ok(Monitors {
        pose: g,
        psi,
        phi: psi + e_v.norm_squared(),
        potential: p,
        kinetic,
        v_lyap: kinetic + p,
        w_lyap: kinetic_bar + p,
        v_decay: e_v.dot(&(gains.kd * e_v)),
        w_decay: e_bar.dot(&(gains.kd * e_bar)) + gains.lambda_g * f_g.norm_squared(),
        e_g: crate::geometry::position_error(&g, &des.gd),
        e_v,
        f_g,
    })
}

fn record_at(
    model: &RobotModel,
    state: &JointState,
    t: f64,
    des: &DesiredState,
    segment: usize,
    gains: &Gains,
    control: &ControlOutput,
) -> Result<Record> {
    let m = monitors(model, state, des, gains)?;
    Ok(Record {
        t,
        q: state.q.clone(),
        qdot: state.qdot.clone(),
        pose: m.pose,
        desired: des.gd,
        segment,
        psi: m.psi,
        phi: m.phi,
        potential: m.potential,
        kinetic: m.kinetic,
        v_lyap: m.v_lyap,
        w_lyap: m.w_lyap,
        v_decay: m.v_decay,
        w_decay: m.w_decay,
        e_g: m.e_g,
        e_v: m.e_v,
        f_g: m.f_g,
        tau: control.tau.clone(),
    })
}

/// Time derivatives of `V` and `W` at one state of the closed loop, by a
/// central difference along the flow (two RK4 sub-steps of length `h`),
/// next to their closed-form decay rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalRates {
    pub v_rate: f64,
    pub w_rate: f64,
    pub v_decay: f64,
    pub w_decay: f64,
}

impl LocalRates {
    pub fn v_residual(&self) -> f64 {
        (self.v_rate + self.v_decay).abs()
    }

    pub fn w_residual(&self) -> f64 {
        (self.w_rate + self.w_decay).abs()
    }
}

pub fn local_lyapunov_rates(
    scenario: &Scenario,
    state: &JointState,
    t: f64,
    h: f64,
) -> Result<LocalRates> {
    let model = &scenario.robot;
    let traj = &scenario.trajectory;
    let flow = |dt: f64| {
        rk4_integrate(state, t, dt, |s, x| {
            let des = traj.desired_in_step(t, s);
            closed_loop_accel(model, scenario.controller, scenario, x, &des)
        })
    };
    let at = |x: &JointState, s: f64| monitors(model, x, &traj.desired_in_step(t, s), &scenario.gains);
    let ahead = at(&flow(h)?, t + h)?;
    let behind = at(&flow(-h)?, t - h)?;
    let here = at(state, t)?;
    Ok(LocalRates {
        v_rate: (ahead.v_lyap - behind.v_lyap) / (2.0 * h),
        w_rate: (ahead.w_lyap - behind.w_lyap) / (2.0 * h),
        v_decay: here.v_decay,
        w_decay: here.w_decay,
    })
}

fn abort(step: usize, e: GicError) -> GicError {
    match e {
        GicError::SimulationAborted { .. } => e,
        other => GicError::SimulationAborted { step, reason: other.to_string() },
    }
}

pub fn run_scenario(scenario: &Scenario) -> Result<Trace> {
    scenario.validate()?;
    let model = &scenario.robot;
    let steps = scenario.steps();
    let dt = scenario.dt;
    let mut state = scenario.initial_state();
    let mut records = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        let t = n as f64 * dt;
        let des = scenario.trajectory.desired_unchecked(t);
        let segment = scenario.trajectory.segment_at(t);
        let control = evaluate(scenario.controller, model, &state, &des, &scenario.gains)
            .map_err(|e| abort(n, e))?;
        let record = record_at(model, &state, t, &des, segment, &scenario.gains, &control)
            .map_err(|e| abort(n, e))?;
        records.push(record);
        if n == steps {
            break;
        }
        state = rk4_step(model, &state, scenario.controller, scenario, t, dt)
            .map_err(|e| abort(n, e))?;
        if !(state.q.iter().chain(state.qdot.iter()).all(|x| x.is_finite())) {
            return Err(GicError::SimulationAborted {
                step: n + 1,
                reason: "state became non-finite".into(),
            });
        }
    }
    let summary = summarize(&records)?;
    Ok(Trace {
        dof: model.dof(),
        controller: scenario.controller.name().to_string(),
        records,
        summary,
        tracking: scenario.trajectory.is_tracking(),
        lambda_g: scenario.gains.lambda_g,
    })
}

fn summarize(records: &[Record]) -> Result<Summary> {
    let axis = |i: usize| -> Result<f64> {
        rms(&records
            .iter()
            .map(|r| r.pose.translation[i] - r.desired.translation[i])
            .collect::<Vec<_>>())
    };
    Ok(Summary {
        rms_position: [axis(0)?, axis(1)?, axis(2)?],
        rms_psi: rms(&records.iter().map(|r| r.psi).collect::<Vec<_>>())?,
        rms_phi: rms(&records.iter().map(|r| r.phi).collect::<Vec<_>>())?,
    })
}

pub fn rms(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(GicError::EmptySeries);
    }
    Ok((series.iter().map(|x| x * x).sum::<f64>() / series.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovResiduals {
    /// `max |dV/dt + e_V^T K_d e_V|`.
    pub v: f64,
    /// `max |dW/dt + ebar_V^T K_d ebar_V + lambda |f_g|^2|`.
    pub w: f64,
}

/// Central-difference rates of the recorded `V` and `W` against their
/// closed-form decay. Windows that straddle a waypoint switch are skipped.
pub fn lyapunov_residuals(trace: &Trace) -> LyapunovResiduals {
    let mut out = LyapunovResiduals { v: 0.0, w: 0.0 };
    for w in trace.records.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        if a.segment != c.segment {
            continue;
        }
        let h = c.t - a.t;
        let v_rate = (c.v_lyap - a.v_lyap) / h;
        let w_rate = (c.w_lyap - a.w_lyap) / h;
        out.v = out.v.max((v_rate + b.v_decay).abs());
        out.w = out.w.max((w_rate + b.w_decay).abs());
    }
    out
}

/// Largest step-to-step increase of `V` and `W` inside a segment.
pub fn max_lyapunov_increase(trace: &Trace) -> (f64, f64) {
    trace.records.windows(2).filter(|w| w[0].segment == w[1].segment).fold(
        (f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(v, w), p| {
            (v.max(p[1].v_lyap - p[0].v_lyap), w.max(p[1].w_lyap - p[0].w_lyap))
        },
    )
}
