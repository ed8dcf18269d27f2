//! File formats: robot models and scenarios (TOML), traces (CSV) and the RMS
//! summary table.
//!
//! Robot model grammar:
//!
//! ```toml
//! name = "my_arm"
//! gravity = [0.0, 0.0, -9.81]          # optional, default -9.81 z
//!
//! [home]                               # end-effector pose at q = 0
//! rotation = [[1,0,0],[0,1,0],[0,0,1]] # row-major
//! translation = [0.5, 0.0, 0.2]
//!
//! [[joint]]                            # one table per revolute joint
//! axis = [0, 0, 1]                     # unit axis in the base frame
//! point = [0, 0, 0]                    # any point on the axis
//! armature = 0.0                       # optional, kg m^2
//! limits = [-3.14, 3.14]               # optional, all or none
//!
//! [joint.link]
//! mass = 1.0
//! com_rotation = [[1,0,0],[0,1,0],[0,0,1]]   # optional, default identity
//! com_translation = [0.1, 0, 0]              # COM position at q = 0
//! inertia = [[0.01,0,0],[0,0.01,0],[0,0,0.01]]
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::controllers::ControllerKind;
use crate::error::{GicError, Result};
use crate::geometry::Gains;
use crate::kinematics::{JointVector, LinkInertia, RobotModel};
use crate::se3::{Mat3, Pose, Twist, Vec3};
use crate::simulation::{Scenario, Trace, Trajectory};

pub const UR5E_APPROX_TOML: &str = include_str!("../models/ur5e_approx.toml");
pub const PENDULUM1_TOML: &str = include_str!("../models/pendulum1.toml");
pub const REGULATION_TOML: &str = include_str!("../scenarios/regulation.toml");
pub const TRACKING_TOML: &str = include_str!("../scenarios/tracking.toml");

/// Environment variable holding extra model search directories
/// (separated like `PATH`).
pub const MODEL_DIR_ENV: &str = "GIC_MODEL_DIR";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    #[serde(default = "default_gravity")]
    gravity: [f64; 3],
    home: PoseFile,
    joint: Vec<JointFile>,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointFile {
    axis: [f64; 3],
    point: [f64; 3],
    #[serde(default)]
    armature: f64,
    limits: Option<[f64; 2]>,
    link: LinkFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    mass: f64,
    com_rotation: Option<[[f64; 3]; 3]>,
    com_translation: [f64; 3],
    inertia: [[f64; 3]; 3],
}

fn mat3(rows: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

fn vec3(x: &[f64; 3]) -> Vec3 {
    Vec3::new(x[0], x[1], x[2])
}

fn parse_error(path: &str, e: impl std::fmt::Display) -> GicError {
    GicError::Parse {
        path: path.to_string(),
        message: e.to_string(),
    }
}

/// Parses and validates a robot model. `origin` only labels errors.
pub fn parse_robot_model(text: &str, origin: &str) -> Result<RobotModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| parse_error(origin, e))?;
    let home = Pose::new(mat3(&file.home.rotation), vec3(&file.home.translation))
        .map_err(|e| GicError::InvalidModel(format!("home pose: {e}")))?;

    let mut joint_twists = Vec::with_capacity(file.joint.len());
    let mut links = Vec::with_capacity(file.joint.len());
    let mut armature = Vec::with_capacity(file.joint.len());
    for (i, j) in file.joint.iter().enumerate() {
        let axis = vec3(&j.axis);
        let norm = axis.norm();
        if !(norm > 1e-12) {
            return Err(GicError::InvalidModel(format!("joint {i}: zero axis")));
        }
        if (norm - 1.0).abs() > 1e-9 {
            return Err(GicError::InvalidModel(format!(
                "joint {i}: axis must be a unit vector, |axis| = {norm}"
            )));
        }
        let w = axis / norm;
        joint_twists.push(Twist::new(-w.cross(&vec3(&j.point)), w));
        armature.push(j.armature);
        let com_rotation = j.link.com_rotation.as_ref().map(mat3).unwrap_or_else(Mat3::identity);
        links.push(LinkInertia {
            mass: j.link.mass,
            com_pose: Pose::from_parts(com_rotation, vec3(&j.link.com_translation)),
            inertia: mat3(&j.link.inertia),
        });
    }
    let limits: Vec<_> = file.joint.iter().filter_map(|j| j.limits).collect();
    let joint_limits = match limits.len() {
        0 => None,
        n if n == file.joint.len() => Some(limits),
        _ => {
            return Err(GicError::InvalidModel(
                "joint limits must be given for all joints or none".into(),
            ))
        }
    };

    let model = RobotModel {
        name: file.name,
        joint_twists,
        home,
        links,
        gravity: vec3(&file.gravity),
        armature,
        joint_limits,
    };
    model.validate()?;
    Ok(model)
}

fn model_search_dirs() -> Vec<PathBuf> {
    std::env::var_os(MODEL_DIR_ENV)
        .map(|v| std::env::split_paths(&v).collect())
        .unwrap_or_default()
}

/// Loads a model from a file path, from `<name>.toml` in the directories
/// listed in `GIC_MODEL_DIR`, or from the bundled models.
pub fn load_robot_model(spec: &str) -> Result<RobotModel> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return parse_robot_model(&text, &path.display().to_string());
    }
    for dir in model_search_dirs() {
        for candidate in [dir.join(spec), dir.join(format!("{spec}.toml"))] {
            if candidate.is_file() {
                let text = std::fs::read_to_string(&candidate)?;
                return parse_robot_model(&text, &candidate.display().to_string());
            }
        }
    }
    match spec {
        "ur5e_approx" | "ur5e" => parse_robot_model(UR5E_APPROX_TOML, "ur5e_approx.toml"),
        "pendulum1" => parse_robot_model(PENDULUM1_TOML, "pendulum1.toml"),
        _ => Err(GicError::Io(format!("robot model '{spec}' not found"))),
    }
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// Scenario grammar:
///
/// ```toml
/// name = "regulation"
/// robot = "ur5e_approx"          # bundled name, GIC_MODEL_DIR entry or path
/// controller = "gic1"
/// duration = 15.0
/// dt = 0.001
/// q0 = [...]
/// qdot0 = [...]                   # optional, default zeros
/// external_wrench = [0,0,0,0,0,0] # optional, body frame
///
/// [gains]
/// kp = 100.0      # scalar or 3x3 matrix
/// ko = 100.0      # scalar or 3x3 matrix
/// kd = 50.0       # scalar or 6x6 matrix
/// lambda_g = 0.0
///
/// [trajectory]
/// kind = "waypoints"
/// [[trajectory.waypoint]]
/// t = 0.0
/// rotation = [[...]]
/// translation = [...]
///
/// # or
/// [trajectory]
/// kind = "sinusoid"
/// rotation = [[...]]
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    robot: String,
    #[serde(default = "default_controller")]
    controller: String,
    duration: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    q0: Vec<f64>,
    qdot0: Option<Vec<f64>>,
    external_wrench: Option<[f64; 6]>,
    gains: GainsFile,
    trajectory: TrajectoryFile,
}

fn default_controller() -> String {
    "gic1".into()
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GainValue {
    Scalar(f64),
    Matrix3([[f64; 3]; 3]),
    Matrix6([[f64; 6]; 6]),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsFile {
    kp: GainValue,
    ko: GainValue,
    kd: GainValue,
    #[serde(default)]
    lambda_g: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum TrajectoryFile {
    Waypoints { waypoint: Vec<WaypointFile> },
    Sinusoid { rotation: [[f64; 3]; 3] },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaypointFile {
    t: f64,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

fn gain3(v: &GainValue, what: &str) -> Result<Mat3> {
    match v {
        GainValue::Scalar(k) => Ok(Mat3::identity() * *k),
        GainValue::Matrix3(m) => Ok(mat3(m)),
        GainValue::Matrix6(_) => Err(GicError::InvalidGains(format!("{what} must be 3x3"))),
    }
}

fn gain6(v: &GainValue, what: &str) -> Result<crate::se3::Mat6> {
    match v {
        GainValue::Scalar(k) => Ok(crate::se3::Mat6::identity() * *k),
        GainValue::Matrix6(m) => Ok(crate::se3::Mat6::from_fn(|i, j| m[i][j])),
        GainValue::Matrix3(_) => Err(GicError::InvalidGains(format!("{what} must be 6x6"))),
    }
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error(origin, e))?;
    let robot = load_robot_model(&file.robot)?;
    let controller: ControllerKind = file.controller.parse()?;
    let gains = Gains::new(
        gain3(&file.gains.kp, "kp")?,
        gain3(&file.gains.ko, "ko")?,
        gain6(&file.gains.kd, "kd")?,
        file.gains.lambda_g,
    )?;
    let trajectory = match &file.trajectory {
        TrajectoryFile::Waypoints { waypoint } => {
            let mut list = Vec::with_capacity(waypoint.len());
            for w in waypoint {
                let pose = Pose::new(mat3(&w.rotation), vec3(&w.translation))
                    .map_err(|e| GicError::InvalidScenario(format!("waypoint at t={}: {e}", w.t)))?;
                list.push((w.t, pose));
            }
            Trajectory::waypoints(list)?
        }
        TrajectoryFile::Sinusoid { rotation } => Trajectory::sinusoid(mat3(rotation))?,
    };
    let n = robot.dof();
    let qdot0 = file.qdot0.unwrap_or_else(|| vec![0.0; n]);
    let scenario = Scenario {
        name: file.name,
        robot,
        controller,
        gains,
        duration: file.duration,
        dt: file.dt,
        q0: JointVector::from_vec(file.q0),
        qdot0: JointVector::from_vec(qdot0),
        trajectory,
        external_wrench: file
            .external_wrench
            .map(|w| crate::se3::Vec6::from_column_slice(&w))
            .unwrap_or_else(crate::se3::Vec6::zeros),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Loads `regulation` / `tracking` by name, or a scenario file by path.
pub fn load_scenario(spec: &str) -> Result<Scenario> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return parse_scenario(&text, &path.display().to_string());
    }
    match spec {
        "regulation" => parse_scenario(REGULATION_TOML, "regulation.toml"),
        "tracking" => parse_scenario(TRACKING_TOML, "tracking.toml"),
        _ => Err(GicError::Io(format!("scenario '{spec}' not found"))),
    }
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("q{i}")));
    h.extend((1..=n).map(|i| format!("qd{i}")));
    h.extend(["px", "py", "pz", "qw", "qx", "qy", "qz", "psi", "phi", "V_lyap", "W_lyap"].map(String::from));
    h.extend((1..=n).map(|i| format!("tau{i}")));
    h
}

/// Writes a trace as CSV: header, then one row per record, 17 significant
/// digits, LF line endings.
pub fn write_trace_csv<W: std::io::Write>(trace: &Trace, mut out: W) -> Result<()> {
    let n = trace.dof;
    let mut text = trace_csv_header(n).join(",");
    text.push('\n');
    for r in &trace.records {
        let quat = r.pose.quaternion_wxyz();
        let mut fields = Vec::with_capacity(4 * n + 12);
        fields.push(fmt17(r.t));
        fields.extend(r.q.iter().map(|x| fmt17(*x)));
        fields.extend(r.qdot.iter().map(|x| fmt17(*x)));
        fields.extend(r.pose.translation.iter().map(|x| fmt17(*x)));
        fields.extend(quat.iter().map(|x| fmt17(*x)));
        for x in [r.psi, r.phi, r.v_lyap, r.w_lyap] {
            fields.push(fmt17(x));
        }
        fields.extend(r.tau.iter().map(|x| fmt17(*x)));
        let _ = writeln!(text, "{}", fields.join(","));
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_trace_csv_file(trace: &Trace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_trace_csv(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Parses a trace CSV back into its header and numeric rows.
pub fn read_trace_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| parse_error("csv", "missing header"))?
        .split(',')
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_error("csv", format!("line {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(parse_error(
                "csv",
                format!("line {}: {} fields, header has {}", i + 2, row.len(), header.len()),
            ));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

// ---------------------------------------------------------------------------
// Summary table
// ---------------------------------------------------------------------------

/// RMS table with one column per controller, in the given order. The
/// `RMS(Phi)` row is only included when some trace tracks a moving target.
pub fn summary_table(traces: &[(String, &Trace)]) -> String {
    let with_phi = traces.iter().any(|(_, t)| t.tracking);
    let mut rows: Vec<(&str, Box<dyn Fn(&Trace) -> f64>)> = vec![
        ("RMS(x - x_d)", Box::new(|t: &Trace| t.summary.rms_position[0])),
        ("RMS(y - y_d)", Box::new(|t: &Trace| t.summary.rms_position[1])),
        ("RMS(z - z_d)", Box::new(|t: &Trace| t.summary.rms_position[2])),
        ("RMS(Psi)", Box::new(|t: &Trace| t.summary.rms_psi)),
    ];
    if with_phi {
        rows.push(("RMS(Phi)", Box::new(|t: &Trace| t.summary.rms_phi)));
    }
    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(7);
    let col_width = traces.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(10);

    let mut out = String::new();
    let _ = write!(out, "{:<label_width$}", "metric");
    for (name, _) in traces {
        let _ = write!(out, " | {name:>col_width$}");
    }
    out.push('\n');
    out.push_str(&"-".repeat(label_width + traces.len() * (col_width + 3)));
    out.push('\n');
    for (label, f) in &rows {
        let _ = write!(out, "{label:<label_width$}");
        for (_, t) in traces {
            let _ = write!(out, " | {:>col_width$.4}", f(t));
        }
        out.push('\n');
    }
    out
}

/// Row values of the summary table keyed by metric label.
pub fn summary_values(trace: &Trace) -> BTreeMap<&'static str, f64> {
    let mut m = BTreeMap::new();
    m.insert("RMS(x - x_d)", trace.summary.rms_position[0]);
    m.insert("RMS(y - y_d)", trace.summary.rms_position[1]);
    m.insert("RMS(z - z_d)", trace.summary.rms_position[2]);
    m.insert("RMS(Psi)", trace.summary.rms_psi);
    if trace.tracking {
        m.insert("RMS(Phi)", trace.summary.rms_phi);
    }
    m
}
