//! Deterministic synthetic-world generator: analytic ground-truth
//! trajectories, anchor placement, and IMU / visual-feature / UWB range
//! synthesis with configurable noise, biases, and NLOS outliers.
//!
//! All randomness flows from per-stream ChaCha12 generators derived from the
//! config seed, so an identical [`WorldConfig`] reproduces the dataset bit
//! for bit on any platform.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation};
use crate::spline::SplineTrajectory;

/// Pinhole camera intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            fx: 400.0,
            fy: 400.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

/// Rigid camera-from-IMU extrinsics plus intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Camera pose in the IMU frame (IMU-from-camera).
    pub t_ic: Pose,
    pub camera: CameraIntrinsics,
}

/// Front-looking camera: optical axis along body +x, image x right (-y body),
/// image y down (-z body).
pub fn front_looking_t_ic() -> Pose {
    let r = Matrix3::from_columns(&[
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(1.0, 0.0, 0.0),
    ]);
    Pose::new(
        Rotation::from_matrix(r).expect("constant extrinsic rotation"),
        Vector3::new(0.05, 0.0, 0.02),
    )
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            t_ic: front_looking_t_ic(),
            camera: CameraIntrinsics::default(),
        }
    }
}

/// Ground-truth trajectory families with closed-form derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryKind {
    /// Planar circle at constant speed, yaw following the tangent.
    Circle {
        center: Vector2<f64>,
        radius: f64,
        period: f64,
        height: f64,
    },
    /// Per-axis sinusoids with a gentle yaw/roll sway.
    Lissajous {
        center: Vector3<f64>,
        amplitude: Vector3<f64>,
        frequency: Vector3<f64>,
        phase: Vector3<f64>,
        yaw_amplitude: f64,
        yaw_frequency: f64,
        roll_amplitude: f64,
        roll_frequency: f64,
    },
    /// Constant-speed waypoint chain with a fixed attitude.
    Polyline {
        waypoints: Vec<Vector3<f64>>,
        speed: f64,
    },
}

/// Full synthetic-world description. Identical configs (seed included)
/// reproduce identical datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub seed: u64,
    pub duration: f64,
    pub trajectory: TrajectoryKind,
    pub imu_rate: f64,
    pub feature_rate: f64,
    pub range_rate: f64,
    pub landmark_count: usize,
    pub landmark_margin: f64,
    pub camera: CameraIntrinsics,
    pub t_ic: Pose,
    pub sigma_gyro: f64,
    pub sigma_accel: f64,
    pub sigma_pixel: f64,
    pub sigma_range: f64,
    pub outlier_prob: f64,
    pub outlier_bias_min: f64,
    pub outlier_bias_max: f64,
    pub anchor_count: usize,
    pub anchor_height: f64,
    /// Optional per-axis anchor-position perturbation; zero by default.
    pub anchor_jitter: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    pub accel_bias: Vector3<f64>,
    pub gravity: Vector3<f64>,
    /// Random-walk drift of the pose priors, m per sqrt(s).
    pub prior_drift_rate: f64,
    /// Random-walk drift of the prior orientations, rad per sqrt(s).
    pub prior_rot_drift_rate: f64,
    pub prior_sigma_pos: f64,
    pub prior_sigma_rot: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 0,
            duration: 60.0,
            trajectory: TrajectoryKind::Circle {
                center: Vector2::new(0.0, 0.0),
                radius: 2.0,
                period: 12.0,
                height: 1.0,
            },
            imu_rate: 200.0,
            feature_rate: 20.0,
            range_rate: 10.0,
            landmark_count: 60,
            landmark_margin: 3.0,
            camera: CameraIntrinsics::default(),
            t_ic: front_looking_t_ic(),
            sigma_gyro: 0.01,
            sigma_accel: 0.05,
            sigma_pixel: 1.0,
            sigma_range: 0.10,
            outlier_prob: 0.1,
            outlier_bias_min: 0.5,
            outlier_bias_max: 3.0,
            anchor_count: 4,
            anchor_height: 2.5,
            anchor_jitter: Vector3::zeros(),
            gyro_bias: Vector3::zeros(),
            accel_bias: Vector3::zeros(),
            gravity: Vector3::new(0.0, 0.0, -9.81),
            prior_drift_rate: 0.02,
            prior_rot_drift_rate: 0.002,
            prior_sigma_pos: 0.01,
            prior_sigma_rot: 0.005,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration <= 0.0 {
            return Err(Error::InvalidArgument("duration must be positive".into()));
        }
        for (name, rate) in [
            ("imu_rate", self.imu_rate),
            ("feature_rate", self.feature_rate),
            ("range_rate", self.range_rate),
        ] {
            if rate <= 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            return Err(Error::InvalidArgument(format!(
                "outlier_prob {} outside [0, 1]",
                self.outlier_prob
            )));
        }
        if self.sigma_range <= 0.0 {
            return Err(Error::InvalidArgument("sigma_range must be positive".into()));
        }
        if self.outlier_bias_min <= 0.0 || self.outlier_bias_max < self.outlier_bias_min {
            return Err(Error::InvalidArgument(
                "outlier bias range must be positive and ordered".into(),
            ));
        }
        Ok(())
    }
}

/// Anything that can play the role of ground truth for measurement synthesis:
/// the analytic trajectories here, or a spline trajectory itself.
pub trait TruthModel {
    fn position(&self, t: f64) -> Vector3<f64>;
    fn velocity(&self, t: f64) -> Vector3<f64>;
    fn acceleration(&self, t: f64) -> Vector3<f64>;
    fn rotation(&self, t: f64) -> Rotation;
    fn angular_velocity(&self, t: f64) -> Vector3<f64>;

    fn pose(&self, t: f64) -> Pose {
        Pose::new(self.rotation(t), self.position(t))
    }
}

/// Closed-form trajectory built from a [`TrajectoryKind`].
#[derive(Debug, Clone)]
pub struct AnalyticTruth {
    kind: TrajectoryKind,
}

/// Validates the shape parameters and wraps them as an evaluable trajectory.
pub fn generate_truth(config: &WorldConfig) -> Result<AnalyticTruth> {
    config.validate()?;
    match &config.trajectory {
        TrajectoryKind::Circle { radius, period, .. } => {
            if *radius <= 0.0 || *period <= 0.0 {
                return Err(Error::InvalidArgument(
                    "circle radius and period must be positive".into(),
                ));
            }
        }
        TrajectoryKind::Lissajous { .. } => {}
        TrajectoryKind::Polyline { waypoints, speed } => {
            if waypoints.len() < 2 {
                return Err(Error::InvalidArgument(
                    "polyline needs at least two waypoints".into(),
                ));
            }
            if *speed <= 0.0 {
                return Err(Error::InvalidArgument("polyline speed must be positive".into()));
            }
        }
    }
    Ok(AnalyticTruth {
        kind: config.trajectory.clone(),
    })
}

impl TruthModel for AnalyticTruth {
    fn position(&self, t: f64) -> Vector3<f64> {
        match &self.kind {
            TrajectoryKind::Circle {
                center,
                radius,
                period,
                height,
            } => {
                let th = TAU * t / period;
                Vector3::new(
                    center.x + radius * th.cos(),
                    center.y + radius * th.sin(),
                    *height,
                )
            }
            TrajectoryKind::Lissajous {
                center,
                amplitude,
                frequency,
                phase,
                ..
            } => {
                let mut p = *center;
                for k in 0..3 {
                    p[k] += amplitude[k] * (TAU * frequency[k] * t + phase[k]).sin();
                }
                p
            }
            TrajectoryKind::Polyline { waypoints, speed } => {
                let (i, s) = polyline_segment(waypoints, *speed, t);
                waypoints[i] + (waypoints[i + 1] - waypoints[i]) * s
            }
        }
    }

    fn velocity(&self, t: f64) -> Vector3<f64> {
        match &self.kind {
            TrajectoryKind::Circle {
                radius, period, ..
            } => {
                let th = TAU * t / period;
                let rate = TAU / period;
                Vector3::new(-radius * rate * th.sin(), radius * rate * th.cos(), 0.0)
            }
            TrajectoryKind::Lissajous {
                amplitude,
                frequency,
                phase,
                ..
            } => {
                let mut v = Vector3::zeros();
                for k in 0..3 {
                    let w = TAU * frequency[k];
                    v[k] = amplitude[k] * w * (w * t + phase[k]).cos();
                }
                v
            }
            TrajectoryKind::Polyline { waypoints, speed } => {
                let (i, _) = polyline_segment(waypoints, *speed, t);
                let d = waypoints[i + 1] - waypoints[i];
                let len = d.norm();
                if len < 1e-12 {
                    Vector3::zeros()
                } else {
                    d / len * *speed
                }
            }
        }
    }

    fn acceleration(&self, t: f64) -> Vector3<f64> {
        match &self.kind {
            TrajectoryKind::Circle {
                center,
                radius,
                period,
                ..
            } => {
                let th = TAU * t / period;
                let rate2 = (TAU / period) * (TAU / period);
                let _ = center;
                Vector3::new(-radius * rate2 * th.cos(), -radius * rate2 * th.sin(), 0.0)
            }
            TrajectoryKind::Lissajous {
                amplitude,
                frequency,
                phase,
                ..
            } => {
                let mut a = Vector3::zeros();
                for k in 0..3 {
                    let w = TAU * frequency[k];
                    a[k] = -amplitude[k] * w * w * (w * t + phase[k]).sin();
                }
                a
            }
            TrajectoryKind::Polyline { .. } => Vector3::zeros(),
        }
    }

    fn rotation(&self, t: f64) -> Rotation {
        match &self.kind {
            TrajectoryKind::Circle { period, .. } => {
                let yaw = TAU * t / period + std::f64::consts::FRAC_PI_2;
                rot_z(yaw)
            }
            TrajectoryKind::Lissajous {
                yaw_amplitude,
                yaw_frequency,
                roll_amplitude,
                roll_frequency,
                ..
            } => {
                let yaw = yaw_amplitude * (TAU * yaw_frequency * t).sin();
                let roll = roll_amplitude * (TAU * roll_frequency * t).sin();
                rot_z(yaw).compose(&rot_x(roll))
            }
            TrajectoryKind::Polyline { .. } => Rotation::identity(),
        }
    }

    fn angular_velocity(&self, t: f64) -> Vector3<f64> {
        match &self.kind {
            TrajectoryKind::Circle { period, .. } => Vector3::new(0.0, 0.0, TAU / period),
            TrajectoryKind::Lissajous {
                yaw_amplitude,
                yaw_frequency,
                roll_amplitude,
                roll_frequency,
                ..
            } => {
                // R = Rz(yaw) Rx(roll): omega = Rx(roll)^T (0,0,dyaw) + (droll,0,0)
                let wy = TAU * yaw_frequency;
                let wr = TAU * roll_frequency;
                let yaw_dot = yaw_amplitude * wy * (wy * t).cos();
                let roll = roll_amplitude * (wr * t).sin();
                let roll_dot = roll_amplitude * wr * (wr * t).cos();
                Vector3::new(
                    roll_dot,
                    yaw_dot * roll.sin(),
                    yaw_dot * roll.cos(),
                )
            }
            TrajectoryKind::Polyline { .. } => Vector3::zeros(),
        }
    }
}

fn rot_z(a: f64) -> Rotation {
    Rotation::exp(&Vector3::new(0.0, 0.0, a))
}

fn rot_x(a: f64) -> Rotation {
    Rotation::exp(&Vector3::new(a, 0.0, 0.0))
}

/// Segment index and in-segment fraction of a constant-speed polyline at `t`;
/// clamps past the last waypoint.
fn polyline_segment(waypoints: &[Vector3<f64>], speed: f64, t: f64) -> (usize, f64) {
    let mut remaining = (t * speed).max(0.0);
    for i in 0..waypoints.len() - 1 {
        let len = (waypoints[i + 1] - waypoints[i]).norm();
        if remaining <= len || i == waypoints.len() - 2 {
            let s = if len < 1e-12 {
                0.0
            } else {
                (remaining / len).min(1.0)
            };
            return (i, s);
        }
        remaining -= len;
    }
    (0, 0.0)
}

impl TruthModel for SplineTrajectory {
    fn position(&self, t: f64) -> Vector3<f64> {
        self.eval_position(t).expect("sample time inside spline span")
    }
    fn velocity(&self, t: f64) -> Vector3<f64> {
        self.eval_velocity(t).expect("sample time inside spline span")
    }
    fn acceleration(&self, t: f64) -> Vector3<f64> {
        self.eval_acceleration(t)
            .expect("sample time inside spline span")
    }
    fn rotation(&self, t: f64) -> Rotation {
        self.eval_rotation(t).expect("sample time inside spline span")
    }
    fn angular_velocity(&self, t: f64) -> Vector3<f64> {
        self.body_angular_velocity(t)
            .expect("sample time inside spline span")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorKind {
    Physical,
    Virtual,
}

/// Static ranging beacon, physical or constructed, with its own noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub position: Vector3<f64>,
    pub kind: AnchorKind,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureObs {
    pub t: f64,
    pub landmark_id: u64,
    pub pixel: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeSample {
    pub t: f64,
    pub anchor_id: String,
    pub range: f64,
    /// Simulator-only metadata for recall/precision scoring; the estimator
    /// must never read it.
    pub is_outlier_truth: bool,
}

/// Time-stamped measurement streams plus the world description an estimator
/// is allowed to see (anchors, landmark map, calibration) and the ground
/// truth it is not.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub imu: Vec<ImuSample>,
    pub features: Vec<FeatureObs>,
    pub ranges: Vec<RangeSample>,
    pub priors: Vec<(f64, Pose)>,
    pub anchors: BTreeMap<String, Anchor>,
    pub landmarks: BTreeMap<u64, Vector3<f64>>,
    pub ground_truth: Vec<(f64, Pose)>,
    pub calibration: Calibration,
}

/// Pinhole projection of a world point through a world-to-camera pose.
pub fn project(
    camera: &CameraIntrinsics,
    t_cw: &Pose,
    x_world: &Vector3<f64>,
) -> Result<Vector2<f64>> {
    let x_cam = t_cw.transform(x_world);
    if x_cam.z <= 1e-9 {
        return Err(Error::Cheirality { depth: x_cam.z });
    }
    Ok(Vector2::new(
        camera.fx * x_cam.x / x_cam.z + camera.cx,
        camera.fy * x_cam.y / x_cam.z + camera.cy,
    ))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn sample_times(duration: f64, rate: f64) -> Vec<f64> {
    let n = (duration * rate).floor() as usize;
    (0..n).map(|k| k as f64 / rate).collect()
}

/// Anchors at the corners of the trajectory's xy bounding box at a fixed
/// height; counts below 4 drop the highest corner indices.
pub fn place_anchors(
    truth: &impl TruthModel,
    config: &WorldConfig,
) -> Result<BTreeMap<String, Anchor>> {
    if !(2..=4).contains(&config.anchor_count) {
        return Err(Error::InvalidArgument(format!(
            "anchor_count {} outside 2..=4",
            config.anchor_count
        )));
    }
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=1000 {
        let p = truth.position(config.duration * k as f64 / 1000.0);
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    if max_x - min_x < 1e-9 || max_y - min_y < 1e-9 {
        return Err(Error::DegenerateGeometry(
            "trajectory bounding box has zero extent".into(),
        ));
    }
    let corners = [
        Vector2::new(min_x, min_y),
        Vector2::new(max_x, min_y),
        Vector2::new(max_x, max_y),
        Vector2::new(min_x, max_y),
    ];
    let mut jitter_rng = stream_rng(config.seed, 1);
    let mut anchors = BTreeMap::new();
    for (i, c) in corners.iter().enumerate().take(config.anchor_count) {
        let mut pos = Vector3::new(c.x, c.y, config.anchor_height);
        for axis in 0..3 {
            if config.anchor_jitter[axis] > 0.0 {
                let n = Normal::new(0.0, config.anchor_jitter[axis]).unwrap();
                pos[axis] += n.sample(&mut jitter_rng);
            }
        }
        anchors.insert(
            format!("a{i}"),
            Anchor {
                position: pos,
                kind: AnchorKind::Physical,
                sigma: config.sigma_range,
            },
        );
    }
    Ok(anchors)
}

/// Gyro and specific-force stream: `w + b_g + n_g` and
/// `R^T (a - g) + b_a + n_a`.
pub fn simulate_imu(
    truth: &impl TruthModel,
    config: &WorldConfig,
    rng: &mut ChaCha12Rng,
) -> Vec<ImuSample> {
    let gyro_noise = Normal::new(0.0, config.sigma_gyro.max(f64::MIN_POSITIVE)).unwrap();
    let accel_noise = Normal::new(0.0, config.sigma_accel.max(f64::MIN_POSITIVE)).unwrap();
    sample_times(config.duration, config.imu_rate)
        .into_iter()
        .map(|t| {
            let r = truth.rotation(t);
            let mut gyro = truth.angular_velocity(t) + config.gyro_bias;
            let mut accel =
                r.transpose().rotate(&(truth.acceleration(t) - config.gravity)) + config.accel_bias;
            if config.sigma_gyro > 0.0 {
                gyro += Vector3::new(
                    gyro_noise.sample(rng),
                    gyro_noise.sample(rng),
                    gyro_noise.sample(rng),
                );
            }
            if config.sigma_accel > 0.0 {
                accel += Vector3::new(
                    accel_noise.sample(rng),
                    accel_noise.sample(rng),
                    accel_noise.sample(rng),
                );
            }
            ImuSample { t, gyro, accel }
        })
        .collect()
}

/// Pixel observations of every landmark inside the frustum, at the feature
/// rate. Landmarks behind the camera or outside the image are silently
/// skipped.
pub fn simulate_features(
    truth: &impl TruthModel,
    landmarks: &BTreeMap<u64, Vector3<f64>>,
    config: &WorldConfig,
    rng: &mut ChaCha12Rng,
) -> Vec<FeatureObs> {
    let pixel_noise = Normal::new(0.0, config.sigma_pixel.max(f64::MIN_POSITIVE)).unwrap();
    let mut obs = Vec::new();
    for t in sample_times(config.duration, config.feature_rate) {
        let t_wi = truth.pose(t);
        let t_cw = t_wi.compose(&config.t_ic).inverse();
        for (&id, x) in landmarks {
            let Ok(mut px) = project(&config.camera, &t_cw, x) else {
                continue;
            };
            if config.sigma_pixel > 0.0 {
                px += Vector2::new(pixel_noise.sample(rng), pixel_noise.sample(rng));
            }
            if px.x < 0.0
                || px.x > config.camera.width as f64
                || px.y < 0.0
                || px.y > config.camera.height as f64
            {
                continue;
            }
            obs.push(FeatureObs {
                t,
                landmark_id: id,
                pixel: px,
            });
        }
    }
    obs
}

/// One range per anchor per tick, with probability `outlier_prob` of an added
/// positive NLOS bias drawn from the configured range.
pub fn simulate_ranges(
    truth: &impl TruthModel,
    anchors: &BTreeMap<String, Anchor>,
    config: &WorldConfig,
    rng: &mut ChaCha12Rng,
) -> Vec<RangeSample> {
    let range_noise = Normal::new(0.0, config.sigma_range.max(f64::MIN_POSITIVE)).unwrap();
    let mut out = Vec::new();
    for t in sample_times(config.duration, config.range_rate) {
        let p = truth.position(t);
        for (id, anchor) in anchors {
            let mut r = (p - anchor.position).norm();
            if config.sigma_range > 0.0 {
                r += range_noise.sample(rng);
            }
            let is_outlier = config.outlier_prob > 0.0 && rng.random::<f64>() < config.outlier_prob;
            if is_outlier {
                r += rng.random_range(config.outlier_bias_min..=config.outlier_bias_max);
            }
            out.push(RangeSample {
                t,
                anchor_id: id.clone(),
                range: r,
                is_outlier_truth: is_outlier,
            });
        }
    }
    out
}

/// VIO-like pose priors: ground truth corrupted by a random-walk drift plus
/// white noise, timestamped at the feature rate.
pub fn simulate_priors(
    truth: &impl TruthModel,
    config: &WorldConfig,
    rng: &mut ChaCha12Rng,
) -> Vec<(f64, Pose)> {
    let dt = 1.0 / config.feature_rate;
    let drift_step = Normal::new(0.0, (config.prior_drift_rate * dt.sqrt()).max(f64::MIN_POSITIVE))
        .unwrap();
    let rot_drift_step = Normal::new(
        0.0,
        (config.prior_rot_drift_rate * dt.sqrt()).max(f64::MIN_POSITIVE),
    )
    .unwrap();
    let pos_noise = Normal::new(0.0, config.prior_sigma_pos.max(f64::MIN_POSITIVE)).unwrap();
    let rot_noise = Normal::new(0.0, config.prior_sigma_rot.max(f64::MIN_POSITIVE)).unwrap();

    let mut drift = Vector3::zeros();
    let mut rot_drift = Vector3::zeros();
    let mut priors = Vec::new();
    for t in sample_times(config.duration, config.feature_rate) {
        if config.prior_drift_rate > 0.0 {
            drift += Vector3::new(
                drift_step.sample(rng),
                drift_step.sample(rng),
                drift_step.sample(rng),
            );
        }
        if config.prior_rot_drift_rate > 0.0 {
            rot_drift += Vector3::new(
                rot_drift_step.sample(rng),
                rot_drift_step.sample(rng),
                rot_drift_step.sample(rng),
            );
        }
        let mut p = truth.position(t) + drift;
        let mut phi = rot_drift;
        if config.prior_sigma_pos > 0.0 {
            p += Vector3::new(
                pos_noise.sample(rng),
                pos_noise.sample(rng),
                pos_noise.sample(rng),
            );
        }
        if config.prior_sigma_rot > 0.0 {
            phi += Vector3::new(
                rot_noise.sample(rng),
                rot_noise.sample(rng),
                rot_noise.sample(rng),
            );
        }
        let r = truth.rotation(t).compose(&Rotation::exp(&phi));
        priors.push((t, Pose::new(r, p)));
    }
    priors
}

/// Uniformly sampled landmarks in the trajectory bounding box inflated by the
/// configured margin.
pub fn sample_landmarks(
    truth: &impl TruthModel,
    config: &WorldConfig,
    rng: &mut ChaCha12Rng,
) -> BTreeMap<u64, Vector3<f64>> {
    let mut lo = Vector3::from_element(f64::INFINITY);
    let mut hi = Vector3::from_element(f64::NEG_INFINITY);
    for k in 0..=1000 {
        let p = truth.position(config.duration * k as f64 / 1000.0);
        for axis in 0..3 {
            lo[axis] = lo[axis].min(p[axis]);
            hi[axis] = hi[axis].max(p[axis]);
        }
    }
    lo -= Vector3::from_element(config.landmark_margin);
    hi += Vector3::from_element(config.landmark_margin);
    (0..config.landmark_count as u64)
        .map(|id| {
            let p = Vector3::new(
                rng.random_range(lo.x..hi.x),
                rng.random_range(lo.y..hi.y),
                rng.random_range(lo.z..hi.z),
            );
            (id, p)
        })
        .collect()
}

/// Runs the full synthesis pipeline for one world. Each stream draws from its
/// own seeded generator, so streams stay reproducible independently of each
/// other.
pub fn generate_dataset(config: &WorldConfig) -> Result<Dataset> {
    let truth = generate_truth(config)?;
    generate_dataset_from(&truth, config)
}

/// Same as [`generate_dataset`] but measuring an arbitrary truth model (for
/// example a spline trajectory used as its own ground truth).
pub fn generate_dataset_from(
    truth: &impl TruthModel,
    config: &WorldConfig,
) -> Result<Dataset> {
    config.validate()?;
    let anchors = place_anchors(truth, config)?;
    let landmarks = sample_landmarks(truth, config, &mut stream_rng(config.seed, 2));
    let imu = simulate_imu(truth, config, &mut stream_rng(config.seed, 3));
    let features = simulate_features(truth, &landmarks, config, &mut stream_rng(config.seed, 4));
    let ranges = simulate_ranges(truth, &anchors, config, &mut stream_rng(config.seed, 5));
    let priors = simulate_priors(truth, config, &mut stream_rng(config.seed, 6));
    let ground_truth = sample_times(config.duration, config.imu_rate)
        .into_iter()
        .map(|t| (t, truth.pose(t)))
        .collect();
    Ok(Dataset {
        imu,
        features,
        ranges,
        priors,
        anchors,
        landmarks,
        ground_truth,
        calibration: Calibration {
            t_ic: config.t_ic,
            camera: config.camera,
        },
    })
}
