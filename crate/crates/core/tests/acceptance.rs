//! End-to-end acceptance criteria. Every criterion prints one PASS/FAIL line
//! with the measured values; the test fails at the end if any criterion did.

use std::time::{Duration, Instant};

use gic::controllers::ControllerKind;
use gic::dynamics::JointState;
use gic::geometry::{
    elastic_force, error_function, potential, potential_rate_identity_check, elastic_force_rate_check,
};
use gic::kinematics::{body_velocity, forward_kinematics, JointVector};
use gic::se3::{exp_se3, Mat3, Pose, Twist, Vec3};
use gic::simulation::*;
use gic::verify;

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, notes: Vec::new() }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn lie_core() -> Outcome {
    let (r, t) = timed(|| verify::lie_core(200));
    Outcome::new(r.passed() && t.as_secs_f64() < 1.0, format!("{r}; {:.3} s", t.as_secs_f64()))
}

fn left_invariance() -> Outcome {
    let (r, t) = timed(|| verify::left_invariance(1000));
    let g = Pose::from_parts(gic::se3::rot_x(0.4), Vec3::new(0.3, 0.0, -0.2));
    let gd = Pose::from_parts(gic::se3::rot_y(-0.7), Vec3::new(-0.1, 0.5, 0.1));
    let gr = Pose::from_parts(gic::se3::rot_z(1.1), Vec3::new(1.0, -2.0, 0.5));
    let witness = (error_function(&g.compose(&gr), &gd.compose(&gr)) - error_function(&g, &gd)).abs();
    Outcome::new(
        r.passed() && witness > 1e-3 && t.as_secs_f64() < 1.0,
        format!("{r}; right-translation witness {witness:.4} (> 1e-3); {:.3} s", t.as_secs_f64()),
    )
}

fn perturbations() -> Outcome {
    let psi = verify::error_perturbation(500);
    let mut rng = verify::rng(verify::SEED + 30);
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (g, gd) = (verify::random_pose(&mut rng), verify::random_pose(&mut rng));
        let gains = verify::random_gains(&mut rng);
        let eta = Twist::from_vector(&verify::random_vec6(&mut rng, 1.0));
        let p = |s: f64| potential(&g.compose(&exp_se3(&eta.scale(s))), &gd, &gains);
        let fd = (p(eps) - p(-eps)) / (2.0 * eps);
        worst = worst.max((fd - elastic_force(&g, &gd, &gains).dot(&eta.to_vector())).abs());
    }
    Outcome::new(
        psi.passed() && worst < 1e-6,
        format!("max |dPsi - e_g.eta| {:.2e}, max |dP - f_g.eta| {worst:.2e} (tol 1e-6, 500 samples)", psi.worst),
    )
}

fn rate_identities() -> Outcome {
    let scenario = Scenario::tracking();
    let trace = match run_scenario(&scenario) {
        Ok(t) => t,
        Err(e) => return Outcome::new(false, format!("gic1 tracking run failed: {e}")),
    };
    let (mut dp, mut df) = (0.0f64, 0.0f64);
    for r in &trace.records {
        let des = desired_state_at(&scenario.trajectory, r.t, scenario.duration).unwrap();
        let v_b = body_velocity(&scenario.robot, &r.q, &r.qdot).unwrap();
        dp = dp.max(potential_rate_identity_check(&r.pose, &des.gd, &v_b, &des, &scenario.gains));
        df = df.max(elastic_force_rate_check(&r.pose, &des.gd, &v_b, &des, &scenario.gains));
    }
    Outcome::new(
        dp < 1e-5 && df < 1e-4,
        format!(
            "max |dP/dt - f_g.e_V| {dp:.2e} (tol 1e-5), max |df_g/dt - B_K e_V| {df:.2e} (tol 1e-4), {} states",
            trace.records.len()
        ),
    )
}

fn task_space_skew() -> Outcome {
    let r = verify::task_space_skew(500);
    Outcome::new(r.passed(), format!("{r}"))
}

fn dissipativity(reg: &Result<Trace, gic::GicError>) -> Outcome {
    let trace = match reg {
        Ok(t) => t,
        Err(e) => return Outcome::new(false, format!("gic1 regulation run failed: {e}")),
    };
    let res = lyapunov_residuals(trace);
    let (inc, _) = max_lyapunov_increase(trace);
    let mut out = Outcome::new(
        res.v < 1e-4 && inc <= 1e-8,
        format!("max |dV/dt_fd + e_V.K_d e_V| {:.3e} (tol 1e-4), max step increase of V {inc:.2e} (tol 1e-8)", res.v),
    );
    let scenario = Scenario::regulation();
    let mut local = 0.0f64;
    let mut n = 0;
    for r in trace.records.iter().step_by(100) {
        let state = JointState::new(r.q.clone(), r.qdot.clone());
        if let Ok(rates) = local_lyapunov_rates(&scenario, &state, r.t, 1e-7) {
            local = local.max(rates.v_residual() / (1.0 + rates.v_decay));
            n += 1;
        }
    }
    out.notes.push(format!(
        "rate of V along the local flow (step 1e-7) at {n} trace states: max relative residual {local:.2e}"
    ));
    out
}

fn decay() -> Outcome {
    let mut scenario = Scenario::tracking().with_controller(ControllerKind::Gic2);
    scenario.gains = scenario.gains.with_lambda(0.1);
    let mut out = match run_scenario(&scenario) {
        Ok(trace) => {
            let res = lyapunov_residuals(&trace);
            let (_, inc) = max_lyapunov_increase(&trace);
            Outcome::new(
                res.w < 1e-4 && inc <= 1e-8,
                format!("max |dW/dt_fd + decay| {:.3e} (tol 1e-4), max step increase of W {inc:.2e}", res.w),
            )
        }
        Err(e) => Outcome::new(false, format!("gic2 tracking run (lambda_g = 0.1) aborted: {e}")),
    };
    let local = verify::lyapunov_flow(ControllerKind::Gic2, 50);
    out.notes.push(format!("rate of W along the local flow at random states: {local}"));
    out
}

fn reductions() -> Outcome {
    let r = verify::reductions(1000);
    Outcome::new(r.passed(), format!("{r} (gic2 at lambda 0 vs gic1; gic1 vs intuitive at isotropic gains)"))
}

fn rd1() -> Mat3 {
    Mat3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)
}

fn rd2() -> Mat3 {
    Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
}

fn scenario_reproduction(reg: &Result<Trace, gic::GicError>) -> Outcome {
    let scenario = Scenario::regulation();
    let q0 = JointVector::from_vec(vec![0.1721, -1.0447, 1.6729, -0.6282, 0.1721, 0.0]);
    let g0 = forward_kinematics(&scenario.robot, &q0).unwrap();
    let start = (g0.translation - Vec3::new(-0.5, -0.3, 0.2)).norm();
    let trace = match reg {
        Ok(t) => t,
        Err(e) => return Outcome::new(false, format!("start offset {start:.2e}; regulation run failed: {e}")),
    };
    let mut end_psi = Vec::new();
    for seg in 0..5 {
        let last = trace.records.iter().filter(|r| r.segment == seg).next_back();
        end_psi.push(last.map_or(f64::INFINITY, |r| r.psi));
    }
    let has = |r: Mat3| trace.records.iter().any(|x| x.desired.rotation == r);
    let targets: Vec<Vec3> = (0..5)
        .filter_map(|s| trace.records.iter().find(|r| r.segment == s).map(|r| r.desired.translation))
        .collect();
    let reached = end_psi.iter().all(|&p| p < 1e-2);
    Outcome::new(
        start < 1e-3 && reached && has(rd1()) && has(rd2()) && targets.len() == 5,
        format!(
            "start offset {start:.2e} (tol 1e-3); Psi at segment ends {}; targets visited {}; R_d1 {} R_d2 {}",
            end_psi.iter().map(|p| format!("{p:.1e}")).collect::<Vec<_>>().join(" "),
            targets.len(),
            has(rd1()),
            has(rd2())
        ),
    )
}

fn orderings() -> Outcome {
    let runs = [
        Scenario::regulation(),
        Scenario::regulation().with_controller(ControllerKind::Benchmark),
        Scenario::tracking(),
        Scenario::tracking().with_controller(ControllerKind::Benchmark),
    ];
    let (traces, t) = timed(|| {
        std::thread::scope(|s| {
            let handles: Vec<_> = runs.iter().map(|sc| s.spawn(move || run_scenario(sc))).collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>()
        })
    });
    let s: Vec<_> = match traces.into_iter().collect::<Result<Vec<_>, _>>() {
        Ok(v) => v.into_iter().map(|t| t.summary).collect(),
        Err(e) => return Outcome::new(false, format!("comparison run failed: {e}")),
    };
    let reg = s[0].rms_psi < s[1].rms_psi;
    let trk = s[2].rms_psi < s[3].rms_psi && s[2].rms_phi < s[3].rms_phi;
    Outcome::new(
        reg && trk && t.as_secs_f64() < 60.0,
        format!(
            "regulation RMS(Psi) gic1 {:.4} vs benchmark {:.4} [{}]; tracking RMS(Psi) {:.4} vs {:.4}, RMS(Phi) {:.4} vs {:.4} [{}]; {:.1} s",
            s[0].rms_psi,
            s[1].rms_psi,
            if reg { "ordered" } else { "not ordered" },
            s[2].rms_psi,
            s[3].rms_psi,
            s[2].rms_phi,
            s[3].rms_phi,
            if trk { "ordered" } else { "not ordered" },
            t.as_secs_f64()
        ),
    )
}

fn final_q(duration: f64, dt: f64) -> Result<JointVector, gic::GicError> {
    let mut sc = Scenario::tracking();
    sc.duration = duration;
    sc.dt = dt;
    Ok(run_scenario(&sc)?.records.last().unwrap().q.clone())
}

fn integrator_order() -> Outcome {
    let ratio = |duration: f64| -> Result<(f64, f64, f64), gic::GicError> {
        let (a, b, c) = (final_q(duration, 1e-3)?, final_q(duration, 5e-4)?, final_q(duration, 2.5e-4)?);
        let (d1, d2) = ((&a - &b).norm(), (&b - &c).norm());
        Ok((d1, d2, d1 / d2))
    };
    let mut out = match ratio(8.0) {
        Ok((d1, d2, r)) => Outcome::new(
            (12.0..=20.0).contains(&r),
            format!("|q_dt - q_dt/2| {d1:.2e}, |q_dt/2 - q_dt/4| {d2:.2e}, ratio {r:.2} (accept [12, 20])"),
        ),
        Err(e) => Outcome::new(false, format!("tracking run failed: {e}")),
    };
    if let Ok((d1, d2, r)) = ratio(1.0) {
        out.notes.push(format!("over the first 1 s: differences {d1:.2e}, {d2:.2e}, ratio {r:.2}"));
    }
    out
}

#[test]
fn acceptance() {
    let regulation = run_scenario(&Scenario::regulation());
    let results: Vec<(&str, Outcome)> = vec![
        ("1 lie core", lie_core()),
        ("2 left invariance", left_invariance()),
        ("3 perturbation identities", perturbations()),
        ("4 rate identities", rate_identities()),
        ("5 task-space skew symmetry", task_space_skew()),
        ("6 dissipativity (gic1 regulation)", dissipativity(&regulation)),
        ("7 decay (gic2 tracking)", decay()),
        ("8 reductions", reductions()),
        ("9 scenario reproduction", scenario_reproduction(&regulation)),
        ("10 comparison orderings", orderings()),
        ("11 integrator order", integrator_order()),
    ];
    println!();
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        for n in &o.notes {
            println!("     note: {n}");
        }
    }
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
