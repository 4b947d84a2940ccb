//! Uniform-knot cubic B-spline trajectory on SE(3).
//!
//! Translation uses the plain uniform cubic basis over control points
//! `p_i..p_{i+3}`; rotation uses the cumulative form on SO(3): a per-segment
//! base rotation followed by exponentials of the three relative increments
//! scaled by the cumulative basis. Both give C^2 trajectories with analytic
//! velocity, acceleration, and body angular velocity.
//!
//! Control rotations are the mutable quantities (the solver perturbs them in
//! their local Lie algebra); the increments `log(R_j^T R_{j+1})` are kept in
//! sync and consumed by evaluation. This keeps every evaluation local to 4
//! consecutive control indices.

use nalgebra::{DMatrix, DVector, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geometry::{so3_log, Pose, Rotation};

/// Slack for timestamps sitting on the span boundary.
const EDGE_TOL: f64 = 1e-9;

/// Plain uniform cubic basis and its first two derivatives with respect to
/// the normalized segment time `u` in [0, 1).
pub fn basis(u: f64) -> Result<(Vector4<f64>, Vector4<f64>, Vector4<f64>)> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!(
            "normalized time {u} outside [0, 1)"
        )));
    }
    Ok(basis_unchecked(u))
}

pub(crate) fn basis_unchecked(u: f64) -> (Vector4<f64>, Vector4<f64>, Vector4<f64>) {
    let u2 = u * u;
    let u3 = u2 * u;
    let b = Vector4::new(
        (1.0 - 3.0 * u + 3.0 * u2 - u3) / 6.0,
        (4.0 - 6.0 * u2 + 3.0 * u3) / 6.0,
        (1.0 + 3.0 * u + 3.0 * u2 - 3.0 * u3) / 6.0,
        u3 / 6.0,
    );
    let db = Vector4::new(
        (-3.0 + 6.0 * u - 3.0 * u2) / 6.0,
        (-12.0 * u + 9.0 * u2) / 6.0,
        (3.0 + 6.0 * u - 9.0 * u2) / 6.0,
        3.0 * u2 / 6.0,
    );
    let ddb = Vector4::new(1.0 - u, 3.0 * u - 2.0, 1.0 - 3.0 * u, u);
    (b, db, ddb)
}

/// Cumulative cubic basis `bt_j(u) = sum_{l>=j} b_l(u)` and its derivative.
/// `bt_0` is identically 1 and is folded into the per-segment base rotation.
pub fn cumulative_basis(u: f64) -> (Vector4<f64>, Vector4<f64>) {
    let u2 = u * u;
    let u3 = u2 * u;
    let bt = Vector4::new(
        1.0,
        (5.0 + 3.0 * u - 3.0 * u2 + u3) / 6.0,
        (1.0 + 3.0 * u + 3.0 * u2 - 2.0 * u3) / 6.0,
        u3 / 6.0,
    );
    let dbt = Vector4::new(
        0.0,
        (3.0 - 6.0 * u + 3.0 * u2) / 6.0,
        (3.0 + 6.0 * u - 6.0 * u2) / 6.0,
        3.0 * u2 / 6.0,
    );
    (bt, dbt)
}

/// Uniform knot grid `t_i = t0 + i h` for `i = 0..=intervals`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotGrid {
    t0: f64,
    h: f64,
    intervals: usize,
}

impl KnotGrid {
    /// Builds the grid covering `[t0, t_end]` with spacing `h`; the interval
    /// count is `ceil((t_end - t0)/h)` so the last knot is at or past `t_end`.
    pub fn new(t0: f64, t_end: f64, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("knot spacing {h} <= 0")));
        }
        if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
            return Err(Error::InvalidArgument(format!(
                "empty time span [{t0}, {t_end}]"
            )));
        }
        let ratio = (t_end - t0) / h;
        // The 1e-9 shave keeps exact multiples from gaining a spurious knot
        // through the division; the loop restores coverage if it undershot.
        let mut intervals = ((ratio - 1e-9).ceil().max(1.0)) as usize;
        while t0 + intervals as f64 * h < t_end {
            intervals += 1;
        }
        Ok(KnotGrid { t0, h, intervals })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Number of knot intervals (M); knots number `M + 1`.
    pub fn num_intervals(&self) -> usize {
        self.intervals
    }

    pub fn num_knots(&self) -> usize {
        self.intervals + 1
    }

    /// Control points needed to evaluate every interval with cubic support.
    pub fn num_control_points(&self) -> usize {
        self.intervals + 3
    }

    pub fn knot_time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    /// Last knot time; evaluation is defined on `[t0, t_end]`.
    pub fn t_end(&self) -> f64 {
        self.knot_time(self.intervals)
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.t0 - EDGE_TOL && t <= self.t_end() + EDGE_TOL
    }

    /// Segment index and normalized time for `t`; the right span edge maps
    /// into the last segment with `u = 1`.
    pub fn segment_and_u(&self, t: f64) -> Result<(usize, f64)> {
        if !self.covers(t) {
            return Err(Error::OutOfRange {
                t,
                start: self.t0,
                end: self.t_end(),
            });
        }
        let x = ((t - self.t0) / self.h).max(0.0);
        let mut i = x.floor() as usize;
        if i >= self.intervals {
            i = self.intervals - 1;
        }
        let u = (x - i as f64).clamp(0.0, 1.0);
        Ok((i, u))
    }
}

/// Cubic B-spline trajectory over SE(3) plus the IMU bias and gravity states
/// carried alongside it during estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineTrajectory {
    grid: KnotGrid,
    translation_cps: Vec<Vector3<f64>>,
    control_rotations: Vec<Rotation>,
    /// `rotation_increments[j] = log(R_j^T R_{j+1})`, kept in sync with
    /// `control_rotations`.
    rotation_increments: Vec<Vector3<f64>>,
    gyro_bias: Vector3<f64>,
    accel_bias: Vector3<f64>,
    gravity: Vector3<f64>,
}

pub const DEFAULT_GRAVITY: [f64; 3] = [0.0, 0.0, -9.81];

impl SplineTrajectory {
    /// Builds a trajectory from a base rotation and per-index increments
    /// (`increments[j]` takes control rotation `j` to `j + 1`).
    pub fn new(
        grid: KnotGrid,
        translation_cps: Vec<Vector3<f64>>,
        rotation_base: Rotation,
        rotation_increments: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        let n = grid.num_control_points();
        if translation_cps.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} translation control points, got {}",
                translation_cps.len()
            )));
        }
        if rotation_increments.len() != n - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} rotation increments, got {}",
                n - 1,
                rotation_increments.len()
            )));
        }
        let mut control_rotations = Vec::with_capacity(n);
        control_rotations.push(rotation_base);
        for inc in &rotation_increments {
            let prev = *control_rotations.last().unwrap();
            control_rotations.push(prev.compose(&Rotation::exp(inc)));
        }
        Ok(SplineTrajectory {
            grid,
            translation_cps,
            control_rotations,
            rotation_increments,
            gyro_bias: Vector3::zeros(),
            accel_bias: Vector3::zeros(),
            gravity: Vector3::from(DEFAULT_GRAVITY),
        })
    }

    /// Builds a trajectory directly from control rotations.
    pub fn from_control_rotations(
        grid: KnotGrid,
        translation_cps: Vec<Vector3<f64>>,
        control_rotations: Vec<Rotation>,
    ) -> Result<Self> {
        let n = grid.num_control_points();
        if translation_cps.len() != n || control_rotations.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} control points, got {} translations / {} rotations",
                translation_cps.len(),
                control_rotations.len()
            )));
        }
        let mut rotation_increments = Vec::with_capacity(n - 1);
        for j in 0..n - 1 {
            let rel = control_rotations[j]
                .transpose()
                .compose(&control_rotations[j + 1]);
            rotation_increments.push(so3_log(&rel)?);
        }
        Ok(SplineTrajectory {
            grid,
            translation_cps,
            control_rotations,
            rotation_increments,
            gyro_bias: Vector3::zeros(),
            accel_bias: Vector3::zeros(),
            gravity: Vector3::from(DEFAULT_GRAVITY),
        })
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn translation_cps(&self) -> &[Vector3<f64>] {
        &self.translation_cps
    }

    pub fn control_rotations(&self) -> &[Rotation] {
        &self.control_rotations
    }

    pub fn rotation_base(&self) -> Rotation {
        self.control_rotations[0]
    }

    pub fn rotation_increments(&self) -> &[Vector3<f64>] {
        &self.rotation_increments
    }

    pub fn gyro_bias(&self) -> Vector3<f64> {
        self.gyro_bias
    }

    pub fn accel_bias(&self) -> Vector3<f64> {
        self.accel_bias
    }

    pub fn gravity(&self) -> Vector3<f64> {
        self.gravity
    }

    pub fn set_gyro_bias(&mut self, b: Vector3<f64>) {
        self.gyro_bias = b;
    }

    pub fn set_accel_bias(&mut self, b: Vector3<f64>) {
        self.accel_bias = b;
    }

    pub fn set_gravity(&mut self, g: Vector3<f64>) {
        self.gravity = g;
    }

    pub fn set_translation_cp(&mut self, j: usize, p: Vector3<f64>) {
        self.translation_cps[j] = p;
    }

    pub fn add_translation_delta(&mut self, j: usize, delta: &Vector3<f64>) {
        self.translation_cps[j] += delta;
    }

    /// Right-multiplies control rotation `j` by `exp(delta)` and refreshes the
    /// two adjacent increments. Fails only if an increment lands on the log
    /// branch cut, which means neighbouring control rotations are half a turn
    /// apart.
    pub fn apply_rotation_delta(&mut self, j: usize, delta: &Vector3<f64>) -> Result<()> {
        self.control_rotations[j] = self.control_rotations[j].compose(&Rotation::exp(delta));
        if j > 0 {
            let rel = self.control_rotations[j - 1]
                .transpose()
                .compose(&self.control_rotations[j]);
            self.rotation_increments[j - 1] = so3_log(&rel)?;
        }
        if j + 1 < self.control_rotations.len() {
            let rel = self.control_rotations[j]
                .transpose()
                .compose(&self.control_rotations[j + 1]);
            self.rotation_increments[j] = so3_log(&rel)?;
        }
        Ok(())
    }

    /// Saved state of one control rotation and its two adjacent increments,
    /// for exact restore after an in-place finite-difference probe.
    pub(crate) fn rotation_state(&self, j: usize) -> RotationState {
        RotationState {
            rotation: self.control_rotations[j],
            inc_left: if j > 0 {
                Some(self.rotation_increments[j - 1])
            } else {
                None
            },
            inc_right: if j + 1 < self.control_rotations.len() {
                Some(self.rotation_increments[j])
            } else {
                None
            },
        }
    }

    pub(crate) fn restore_rotation_state(&mut self, j: usize, state: RotationState) {
        self.control_rotations[j] = state.rotation;
        if let Some(inc) = state.inc_left {
            self.rotation_increments[j - 1] = inc;
        }
        if let Some(inc) = state.inc_right {
            self.rotation_increments[j] = inc;
        }
    }

    pub fn eval_position(&self, t: f64) -> Result<Vector3<f64>> {
        let (i, u) = self.grid.segment_and_u(t)?;
        let (b, _, _) = basis_unchecked(u);
        let mut p = Vector3::zeros();
        for j in 0..4 {
            p += self.translation_cps[i + j] * b[j];
        }
        Ok(p)
    }

    pub fn eval_velocity(&self, t: f64) -> Result<Vector3<f64>> {
        let (i, u) = self.grid.segment_and_u(t)?;
        let (_, db, _) = basis_unchecked(u);
        let mut v = Vector3::zeros();
        for j in 0..4 {
            v += self.translation_cps[i + j] * db[j];
        }
        Ok(v / self.grid.h)
    }

    pub fn eval_acceleration(&self, t: f64) -> Result<Vector3<f64>> {
        let (i, u) = self.grid.segment_and_u(t)?;
        let (_, _, ddb) = basis_unchecked(u);
        let mut a = Vector3::zeros();
        for j in 0..4 {
            a += self.translation_cps[i + j] * ddb[j];
        }
        Ok(a / (self.grid.h * self.grid.h))
    }

    /// Cumulative SO(3) spline:
    /// `R(t) = R_i exp(bt_1 phi_{i+1}) exp(bt_2 phi_{i+2}) exp(bt_3 phi_{i+3})`.
    pub fn eval_rotation(&self, t: f64) -> Result<Rotation> {
        let (i, u) = self.grid.segment_and_u(t)?;
        let (bt, _) = cumulative_basis(u);
        let mut r = self.control_rotations[i];
        for j in 0..3 {
            r = r.compose(&Rotation::exp(&(self.rotation_increments[i + j] * bt[j + 1])));
        }
        Ok(r)
    }

    /// Body angular velocity `(R^T dR/dt)^vee`, evaluated analytically from
    /// the cumulative form.
    pub fn body_angular_velocity(&self, t: f64) -> Result<Vector3<f64>> {
        let (i, u) = self.grid.segment_and_u(t)?;
        let (bt, dbt) = cumulative_basis(u);
        let phi1 = self.rotation_increments[i];
        let phi2 = self.rotation_increments[i + 1];
        let phi3 = self.rotation_increments[i + 2];
        let a2 = Rotation::exp(&(phi2 * bt[2]));
        let a3 = Rotation::exp(&(phi3 * bt[3]));
        let w = a3
            .transpose()
            .rotate(&(a2.transpose().rotate(&(phi1 * dbt[1])) + phi2 * dbt[2]))
            + phi3 * dbt[3];
        Ok(w / self.grid.h)
    }

    pub fn eval_pose(&self, t: f64) -> Result<Pose> {
        Ok(Pose::new(self.eval_rotation(t)?, self.eval_position(t)?))
    }

    /// Initializes a trajectory from timestamped pose priors: translation
    /// control points by linear least squares against the prior positions,
    /// control rotations by interpolating the prior rotations at the knot
    /// times they dominate, biases zero.
    pub fn init_from_prior(priors: &[(f64, Pose)], grid: KnotGrid) -> Result<Self> {
        if priors.len() < 4 {
            return Err(Error::UnderConstrained(format!(
                "{} prior poses, need at least 4",
                priors.len()
            )));
        }
        let mut sorted: Vec<&(f64, Pose)> = priors.iter().collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let t_min = sorted.first().unwrap().0;
        let t_max = sorted.last().unwrap().0;
        if t_min > grid.t0() + grid.spacing() || t_max < grid.t_end() - 2.0 * grid.spacing() {
            return Err(Error::UnderConstrained(format!(
                "priors span [{t_min}, {t_max}] but the grid needs [{}, {}]",
                grid.t0(),
                grid.t_end()
            )));
        }

        let n = grid.num_control_points();
        let mut normal = DMatrix::<f64>::zeros(n, n);
        let mut rhs = [
            DVector::<f64>::zeros(n),
            DVector::<f64>::zeros(n),
            DVector::<f64>::zeros(n),
        ];
        for (t, pose) in priors {
            let (i, u) = match grid.segment_and_u(*t) {
                Ok(iu) => iu,
                Err(_) => continue, // priors slightly outside the grid are ignored
            };
            let (b, _, _) = basis_unchecked(u);
            for j in 0..4 {
                for k in 0..4 {
                    normal[(i + j, i + k)] += b[j] * b[k];
                }
                for axis in 0..3 {
                    rhs[axis][i + j] += b[j] * pose.translation[axis];
                }
            }
        }

        let solved = match normal.clone().cholesky() {
            Some(chol) => Some([
                chol.solve(&rhs[0]),
                chol.solve(&rhs[1]),
                chol.solve(&rhs[2]),
            ]),
            None => {
                // Sparse priors can leave boundary control points untouched;
                // a light second-difference penalty pins them without moving
                // the data-constrained interior.
                let scale = normal.diagonal().max().max(1.0);
                let mut reg = normal;
                let lambda = 1e-8 * scale;
                for j in 0..n {
                    reg[(j, j)] += 1e-12 * scale;
                }
                for j in 0..n.saturating_sub(2) {
                    // rows of D: (1, -2, 1)
                    let idx = [j, j + 1, j + 2];
                    let w = [1.0, -2.0, 1.0];
                    for a in 0..3 {
                        for b in 0..3 {
                            reg[(idx[a], idx[b])] += lambda * w[a] * w[b];
                        }
                    }
                }
                reg.cholesky().map(|chol| {
                    [
                        chol.solve(&rhs[0]),
                        chol.solve(&rhs[1]),
                        chol.solve(&rhs[2]),
                    ]
                })
            }
        };
        let coords = solved.ok_or_else(|| {
            Error::UnderConstrained("prior positions do not constrain the spline".into())
        })?;
        let translation_cps: Vec<Vector3<f64>> = (0..n)
            .map(|j| Vector3::new(coords[0][j], coords[1][j], coords[2][j]))
            .collect();

        // Control rotation j dominates the spline near knot j - 1.
        let mut control_rotations = Vec::with_capacity(n);
        for j in 0..n {
            let tau = (grid.t0() + (j as f64 - 1.0) * grid.spacing()).clamp(t_min, t_max);
            control_rotations.push(interpolate_rotation(&sorted, tau)?);
        }
        Self::from_control_rotations(grid, translation_cps, control_rotations)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RotationState {
    rotation: Rotation,
    inc_left: Option<Vector3<f64>>,
    inc_right: Option<Vector3<f64>>,
}

/// Geodesic interpolation of prior rotations at time `tau` (clamped to the
/// prior span). `sorted` must be ordered by time.
fn interpolate_rotation(sorted: &[&(f64, Pose)], tau: f64) -> Result<Rotation> {
    let first = sorted.first().unwrap();
    let last = sorted.last().unwrap();
    if tau <= first.0 {
        return Ok(first.1.rotation);
    }
    if tau >= last.0 {
        return Ok(last.1.rotation);
    }
    let idx = sorted.partition_point(|p| p.0 <= tau);
    let (ta, pa) = sorted[idx - 1];
    let (tb, pb) = sorted[idx];
    if (tb - ta).abs() < 1e-12 {
        return Ok(pa.rotation);
    }
    let s = (tau - ta) / (tb - ta);
    let rel = so3_log(&pa.rotation.transpose().compose(&pb.rotation))?;
    Ok(pa.rotation.compose(&Rotation::exp(&(rel * s))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::so3_exp;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Cox-de Boor recursion over an integer knot vector; the independent
    /// oracle for the closed-form basis polynomials.
    fn cox_de_boor(knots: &[f64], m: usize, k: usize, x: f64) -> f64 {
        if k == 0 {
            return if knots[m] <= x && x < knots[m + 1] {
                1.0
            } else {
                0.0
            };
        }
        let mut val = 0.0;
        let d1 = knots[m + k] - knots[m];
        if d1 > 0.0 {
            val += (x - knots[m]) / d1 * cox_de_boor(knots, m, k - 1, x);
        }
        let d2 = knots[m + k + 1] - knots[m + 1];
        if d2 > 0.0 {
            val += (knots[m + k + 1] - x) / d2 * cox_de_boor(knots, m + 1, k - 1, x);
        }
        val
    }

    #[test]
    fn basis_matches_cox_de_boor() {
        let knots: Vec<f64> = (0..=16).map(|i| i as f64).collect();
        let seg = 5usize; // interior segment, away from the open ends
        for step in 0..50 {
            let u = step as f64 / 50.0;
            let (b, _, _) = basis(u).unwrap();
            for j in 0..4 {
                let oracle = cox_de_boor(&knots, seg - 3 + j, 3, seg as f64 + u);
                assert_abs_diff_eq!(b[j], oracle, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn basis_at_zero() {
        let (b, _, _) = basis(0.0).unwrap();
        assert_abs_diff_eq!(b[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[2], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[3], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn basis_partition_of_unity() {
        let (b, _, _) = basis(0.37).unwrap();
        assert!((b.sum() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn basis_rejects_out_of_range() {
        assert!(basis(1.0).is_err());
        assert!(basis(-0.1).is_err());
    }

    #[test]
    fn basis_derivative_matches_finite_difference() {
        let delta = 1e-6;
        for step in 1..20 {
            let u = 0.05 * step as f64 - 0.025;
            let (_, db, ddb) = basis(u).unwrap();
            let (bp, dbp, _) = basis(u + delta).unwrap();
            let (bm, dbm, _) = basis(u - delta).unwrap();
            let fd = (bp - bm) / (2.0 * delta);
            let fd2 = (dbp - dbm) / (2.0 * delta);
            for j in 0..4 {
                assert_abs_diff_eq!(db[j], fd[j], epsilon = 1e-6);
                assert_abs_diff_eq!(ddb[j], fd2[j], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn cumulative_basis_is_suffix_sum() {
        for step in 0..40 {
            let u = step as f64 / 40.0;
            let (b, _, _) = basis_unchecked(u);
            let (bt, _) = cumulative_basis(u);
            for j in 0..4 {
                let suffix: f64 = (j..4).map(|l| b[l]).sum();
                assert_abs_diff_eq!(bt[j], suffix, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn grid_counts_follow_ceiling_rule() {
        let g = KnotGrid::new(0.0, 1.0, 0.05).unwrap();
        assert_eq!(g.num_intervals(), 20);
        assert_eq!(g.num_knots(), 21);

        let g = KnotGrid::new(0.0, 1.01, 0.05).unwrap();
        assert_eq!(g.num_intervals(), 21);

        let g = KnotGrid::new(0.0, 0.049, 0.05).unwrap();
        assert_eq!(g.num_intervals(), 1);
        assert!(g.t_end() >= 0.049);
    }

    #[test]
    fn grid_rejects_bad_spacing() {
        assert!(KnotGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(KnotGrid::new(0.0, 1.0, -0.1).is_err());
        assert!(KnotGrid::new(1.0, 1.0, 0.1).is_err());
    }

    fn constant_spline(c: Vector3<f64>) -> SplineTrajectory {
        let grid = KnotGrid::new(0.0, 2.0, 0.25).unwrap();
        let n = grid.num_control_points();
        SplineTrajectory::new(grid, vec![c; n], Rotation::identity(), vec![
            Vector3::zeros();
            n - 1
        ])
        .unwrap()
    }

    #[test]
    fn constant_control_points_reproduce_constant() {
        let c = Vector3::new(1.0, -2.0, 3.0);
        let traj = constant_spline(c);
        for step in 0..=40 {
            let t = 2.0 * step as f64 / 40.0;
            assert_abs_diff_eq!(traj.eval_position(t).unwrap(), c, epsilon = 1e-13);
            assert_abs_diff_eq!(
                traj.eval_velocity(t).unwrap(),
                Vector3::zeros(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn eval_rejects_out_of_span() {
        let traj = constant_spline(Vector3::zeros());
        assert!(matches!(
            traj.eval_position(-0.5),
            Err(Error::OutOfRange { .. })
        ));
        assert!(traj.eval_position(2.6).is_err());
    }

    #[test]
    fn linear_control_points_give_constant_velocity() {
        let grid = KnotGrid::new(0.0, 2.0, 0.2).unwrap();
        let n = grid.num_control_points();
        let v = Vector3::new(0.3, -0.1, 0.7);
        // Slope of v * h per control index gives velocity v.
        let cps: Vec<_> = (0..n).map(|j| v * (j as f64 * grid.spacing())).collect();
        let traj =
            SplineTrajectory::new(grid, cps, Rotation::identity(), vec![Vector3::zeros(); n - 1])
                .unwrap();
        for step in 0..=20 {
            let t = 2.0 * step as f64 / 20.0;
            assert_abs_diff_eq!(traj.eval_velocity(t).unwrap(), v, epsilon = 1e-12);
            assert_abs_diff_eq!(
                traj.eval_acceleration(t).unwrap(),
                Vector3::zeros(),
                epsilon = 1e-10
            );
        }
    }

    /// Control points sampled from an exact cubic polynomial reproduce it.
    #[test]
    fn cubic_polynomial_reproduction() {
        let grid = KnotGrid::new(0.0, 3.0, 0.25).unwrap();
        let poly = |t: f64| {
            Vector3::new(
                0.5 + 0.3 * t - 0.2 * t * t + 0.05 * t * t * t,
                -1.0 + t,
                2.0 - 0.1 * t * t * t,
            )
        };
        let priors: Vec<(f64, Pose)> = (0..=120)
            .map(|k| {
                let t = 3.0 * k as f64 / 120.0;
                (t, Pose::new(Rotation::identity(), poly(t)))
            })
            .collect();
        let traj = SplineTrajectory::init_from_prior(&priors, grid).unwrap();
        for step in 0..=97 {
            let t = 3.0 * step as f64 / 97.0;
            assert_abs_diff_eq!(traj.eval_position(t).unwrap(), poly(t), epsilon = 1e-10);
        }
    }

    fn random_spline(seed: u64, t_end: f64, h: f64) -> SplineTrajectory {
        let grid = KnotGrid::new(0.0, t_end, h).unwrap();
        let n = grid.num_control_points();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let cps: Vec<_> = (0..n)
            .map(|j| {
                Vector3::new(
                    (0.3 * j as f64).sin() + 0.05 * rng.random_range(-1.0..1.0),
                    (0.2 * j as f64).cos(),
                    0.1 * j as f64,
                )
            })
            .collect();
        let incs: Vec<_> = (0..n - 1)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                )
            })
            .collect();
        let base = Rotation::exp(&Vector3::new(0.3, -0.1, 0.2));
        SplineTrajectory::new(grid, cps, base, incs).unwrap()
    }

    #[test]
    fn continuity_across_knots() {
        let traj = random_spline(3, 2.0, 0.25);
        let eps = 1e-11;
        for i in 1..traj.grid().num_intervals() {
            let tk = traj.grid().knot_time(i);
            let (pl, pr) = (
                traj.eval_position(tk - eps).unwrap(),
                traj.eval_position(tk + eps).unwrap(),
            );
            assert!((pl - pr).norm() < 1e-8);
            let (vl, vr) = (
                traj.eval_velocity(tk - eps).unwrap(),
                traj.eval_velocity(tk + eps).unwrap(),
            );
            assert!((vl - vr).norm() < 1e-7);
            let (al, ar) = (
                traj.eval_acceleration(tk - eps).unwrap(),
                traj.eval_acceleration(tk + eps).unwrap(),
            );
            assert!((al - ar).norm() < 1e-5);
            let (rl, rr) = (
                traj.eval_rotation(tk - eps).unwrap(),
                traj.eval_rotation(tk + eps).unwrap(),
            );
            assert!((rl.matrix() - rr.matrix()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn velocity_acceleration_match_finite_differences() {
        let traj = random_spline(11, 2.0, 0.125);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let delta = 1e-6;
        let mut checked = 0;
        while checked < 100 {
            let t = rng.random_range(0.01..1.99);
            // keep the stencil inside one segment
            let (i, u) = traj.grid().segment_and_u(t).unwrap();
            let _ = i;
            if u < 0.01 || u > 0.99 {
                continue;
            }
            checked += 1;
            let v = traj.eval_velocity(t).unwrap();
            let fd_v = (traj.eval_position(t + delta).unwrap()
                - traj.eval_position(t - delta).unwrap())
                / (2.0 * delta);
            assert!((v - fd_v).norm() / v.norm().max(1e-3) < 1e-5);
            let a = traj.eval_acceleration(t).unwrap();
            let fd_a = (traj.eval_velocity(t + delta).unwrap()
                - traj.eval_velocity(t - delta).unwrap())
                / (2.0 * delta);
            assert!((a - fd_a).norm() / a.norm().max(1e-3) < 1e-5);
        }
    }

    #[test]
    fn zero_increments_hold_base_rotation() {
        let grid = KnotGrid::new(0.0, 1.0, 0.1).unwrap();
        let n = grid.num_control_points();
        let base = Rotation::exp(&Vector3::new(0.2, 0.5, -0.4));
        let traj = SplineTrajectory::new(
            grid,
            vec![Vector3::zeros(); n],
            base,
            vec![Vector3::zeros(); n - 1],
        )
        .unwrap();
        for step in 0..=20 {
            let t = step as f64 / 20.0;
            let r = traj.eval_rotation(t).unwrap();
            assert!((r.matrix() - base.matrix()).abs().max() < 1e-14);
            assert!(traj.body_angular_velocity(t).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn constant_increment_spins_at_constant_rate() {
        // Increment h * 1 rad/s about z per control index: a 1 rad/s spin.
        let grid = KnotGrid::new(0.0, 2.0, 0.1).unwrap();
        let n = grid.num_control_points();
        let inc = Vector3::new(0.0, 0.0, 0.1);
        let traj = SplineTrajectory::new(
            grid,
            vec![Vector3::zeros(); n],
            Rotation::identity(),
            vec![inc; n - 1],
        )
        .unwrap();
        for step in 0..=40 {
            let t = 2.0 * step as f64 / 40.0;
            let w = traj.body_angular_velocity(t).unwrap();
            assert_abs_diff_eq!(w, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-8);
        }
        // Rate also matches the rotation increment between sample times.
        let r0 = traj.eval_rotation(0.5).unwrap();
        let r1 = traj.eval_rotation(0.9).unwrap();
        let dphi = so3_log(&r0.transpose().compose(&r1)).unwrap();
        assert_abs_diff_eq!(dphi, Vector3::new(0.0, 0.0, 0.4), epsilon = 1e-8);
    }

    #[test]
    fn angular_velocity_matches_finite_difference() {
        let traj = random_spline(21, 2.0, 0.125);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let delta = 1e-6;
        let mut checked = 0;
        while checked < 100 {
            let t = rng.random_range(0.01..1.99);
            let (_, u) = traj.grid().segment_and_u(t).unwrap();
            if u < 0.01 || u > 0.99 {
                continue;
            }
            checked += 1;
            let w = traj.body_angular_velocity(t).unwrap();
            let r = traj.eval_rotation(t).unwrap();
            let dr = (traj.eval_rotation(t + delta).unwrap().matrix()
                - traj.eval_rotation(t - delta).unwrap().matrix())
                / (2.0 * delta);
            let m = r.matrix().transpose() * dr;
            let skew = (m - m.transpose()) / 2.0;
            let fd = Vector3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]);
            assert!(
                (w - fd).norm() / w.norm().max(1e-3) < 1e-5,
                "t={t} w={w:?} fd={fd:?}"
            );
        }
    }

    #[test]
    fn perturbation_is_local_to_support() {
        let base = random_spline(31, 2.0, 0.25);
        let mut perturbed = base.clone();
        let k = 4usize;
        perturbed.add_translation_delta(k, &Vector3::new(0.5, 0.0, 0.0));
        perturbed
            .apply_rotation_delta(k, &Vector3::new(0.0, 0.1, 0.0))
            .unwrap();
        for step in 0..200 {
            let t = 1.99 * step as f64 / 199.0;
            let (i, _) = base.grid().segment_and_u(t).unwrap();
            let touched = i <= k && k <= i + 3;
            let dp = (base.eval_position(t).unwrap() - perturbed.eval_position(t).unwrap()).norm();
            let dr = (base.eval_rotation(t).unwrap().matrix()
                - perturbed.eval_rotation(t).unwrap().matrix())
            .abs()
            .max();
            if !touched {
                assert!(dp < 1e-14, "position leaked outside support at t={t}");
                assert!(dr < 1e-14, "rotation leaked outside support at t={t}");
            }
        }
    }

    #[test]
    fn init_recovers_generating_spline() {
        let truth = random_spline(41, 2.0, 0.2);
        let priors: Vec<(f64, Pose)> = (0..=400)
            .map(|k| {
                let t = 2.0 * k as f64 / 400.0;
                (t, truth.eval_pose(t).unwrap())
            })
            .collect();
        let fitted = SplineTrajectory::init_from_prior(&priors, *truth.grid()).unwrap();
        for (t, pose) in &priors {
            let p = fitted.eval_position(*t).unwrap();
            assert!(
                (p - pose.translation).norm() < 1e-8,
                "position mismatch at t={t}"
            );
        }
    }

    #[test]
    fn init_rejects_three_poses() {
        let grid = KnotGrid::new(0.0, 1.0, 0.1).unwrap();
        let priors: Vec<(f64, Pose)> = (0..3).map(|k| (k as f64 * 0.5, Pose::identity())).collect();
        assert!(matches!(
            SplineTrajectory::init_from_prior(&priors, grid),
            Err(Error::UnderConstrained(_))
        ));
    }

    #[test]
    fn init_static_priors_give_constant_spline() {
        let grid = KnotGrid::new(0.0, 1.0, 0.1).unwrap();
        let pose = Pose::new(
            so3_exp(&Vector3::new(0.1, 0.0, 0.3)).unwrap(),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let priors: Vec<(f64, Pose)> = (0..=50).map(|k| (k as f64 * 0.02, pose)).collect();
        let traj = SplineTrajectory::init_from_prior(&priors, grid).unwrap();
        for step in 0..=20 {
            let t = step as f64 / 20.0;
            assert!((traj.eval_position(t).unwrap() - pose.translation).norm() < 1e-9);
            assert!(
                (traj.eval_rotation(t).unwrap().matrix() - pose.rotation.matrix())
                    .abs()
                    .max()
                    < 1e-9
            );
            assert!(traj.eval_velocity(t).unwrap().norm() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn prop_partition_of_unity(u in 0.0f64..1.0) {
            let (b, db, ddb) = basis(u).unwrap();
            prop_assert!((b.sum() - 1.0).abs() < 1e-12);
            prop_assert!(db.sum().abs() < 1e-12);
            prop_assert!(ddb.sum().abs() < 1e-12);
        }

        #[test]
        fn prop_rotation_stays_orthonormal(t in 0.0f64..1.99) {
            let traj = random_spline(55, 2.0, 0.25);
            let r = traj.eval_rotation(t).unwrap();
            let m = r.matrix();
            prop_assert!((m * m.transpose() - nalgebra::Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
        }
    }
}
