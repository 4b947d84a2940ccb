//! Ranging preprocessing: innovation-based median/MAD outlier rejection,
//! weighted virtual-anchor least squares, and Fisher-information plus
//! angular-diversity screening of the fitted candidates.
//!
//! The flow per physical anchor is: predict the platform position at each
//! range timestamp, compute innovations, gate outliers on normalized
//! innovations within short windows, then fit one virtual-anchor candidate
//! per window from the surviving inliers and keep it only when it adds
//! observable information and angular diversity.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, RowVector3, Vector3};

use crate::error::{Error, Result};
use crate::sim::{Anchor, AnchorKind};

/// Outlier-rejection parameters: half window, gate threshold, MAD regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionParams {
    /// Half window width in seconds; statistics pool measurements within
    /// `[t - half_window, t + half_window]`.
    pub half_window: f64,
    /// Gate on the normalized innovation.
    pub gamma: f64,
    /// Keeps the normalization finite when the MAD collapses, meters.
    pub epsilon: f64,
}

impl Default for RejectionParams {
    fn default() -> Self {
        RejectionParams {
            half_window: 0.5,
            gamma: 3.5,
            epsilon: 1e-3,
        }
    }
}

impl RejectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.half_window <= 0.0 || self.gamma <= 0.0 || self.epsilon <= 0.0 {
            return Err(Error::InvalidArgument(
                "rejection parameters must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Virtual-anchor fitting and screening parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaParams {
    /// Numerator of the innovation-based weight; weights saturate at 1 for
    /// innovations below `weight_c`.
    pub weight_c: f64,
    /// Regularizer shared with the rejection stage's innovation weighting.
    pub epsilon: f64,
    /// Floor on the smallest eigenvalue of the information increment.
    pub tau_lambda: f64,
    /// Angular-diversity floor against existing anchors, degrees.
    pub theta0_deg: f64,
    /// Physical ranging noise, meters.
    pub sigma_r: f64,
    /// Noise assigned to accepted virtual anchors, meters.
    pub sigma_va: f64,
}

impl Default for VaParams {
    fn default() -> Self {
        VaParams {
            weight_c: 0.3, // 3 * sigma_r: full weight inside the 3-sigma band
            epsilon: 1e-3,
            tau_lambda: 0.05,
            theta0_deg: 15.0,
            sigma_r: 0.10,
            sigma_va: 0.20,
        }
    }
}

impl VaParams {
    pub fn validate(&self) -> Result<()> {
        if self.weight_c <= 0.0
            || self.epsilon <= 0.0
            || self.tau_lambda <= 0.0
            || self.theta0_deg <= 0.0
            || self.sigma_r <= 0.0
            || self.sigma_va <= 0.0
        {
            return Err(Error::InvalidArgument(
                "virtual-anchor parameters must all be positive".into(),
            ));
        }
        if self.sigma_va < self.sigma_r {
            return Err(Error::InvalidArgument(
                "sigma_va must be at least sigma_r".into(),
            ));
        }
        Ok(())
    }
}

/// Predicted range and innovation for one measurement.
pub fn innovation(
    p_pred: &Vector3<f64>,
    anchor: &Vector3<f64>,
    range: f64,
) -> Result<(f64, f64)> {
    let predicted = (p_pred - anchor).norm();
    if predicted < 1e-12 {
        return Err(Error::DegenerateGeometry(
            "predicted position coincides with the anchor".into(),
        ));
    }
    Ok((predicted, range - predicted))
}

/// Per-measurement gate label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeLabel {
    pub z_score: f64,
    pub innovation: f64,
    pub is_outlier: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Labels one window of measurements `(t, range)` for a single anchor.
///
/// The normalized innovation is `|nu - median| / (mad + epsilon)`; a
/// measurement is an outlier when it exceeds `gamma`.
pub fn reject_outliers(
    anchor: &Vector3<f64>,
    window: &[(f64, f64)],
    predict: impl Fn(f64) -> Vector3<f64>,
    params: &RejectionParams,
) -> Result<Vec<RangeLabel>> {
    params.validate()?;
    if window.is_empty() {
        return Err(Error::InvalidArgument(
            "outlier rejection on an empty window".into(),
        ));
    }
    let mut innovations = Vec::with_capacity(window.len());
    for (t, r) in window {
        let (_, nu) = innovation(&predict(*t), anchor, *r)?;
        innovations.push(nu);
    }
    let med = median(&mut innovations.clone());
    let mut deviations: Vec<f64> = innovations.iter().map(|nu| (nu - med).abs()).collect();
    let mad = median(&mut deviations);
    Ok(innovations
        .into_iter()
        .map(|nu| {
            let z = (nu - med).abs() / (mad + params.epsilon);
            RangeLabel {
                z_score: z,
                innovation: nu,
                is_outlier: z > params.gamma,
            }
        })
        .collect())
}

/// Window centers tiling `[t_first, t_last]` with stride equal to the half
/// window, i.e. 50% overlap of consecutive windows.
pub(crate) fn window_center(t_first: f64, delta: f64, t: f64) -> usize {
    (((t - t_first) / delta).round().max(0.0)) as usize
}

fn num_windows(t_first: f64, t_last: f64, delta: f64) -> usize {
    window_center(t_first, delta, t_last) + 1
}

/// Labels a whole time-sorted stream for one anchor by tiling it with
/// overlapping windows; each measurement takes the label computed in the
/// window whose center is nearest.
pub fn label_ranges(
    anchor: &Vector3<f64>,
    stream: &[(f64, f64)],
    predict: impl Fn(f64) -> Vector3<f64>,
    params: &RejectionParams,
) -> Result<Vec<RangeLabel>> {
    params.validate()?;
    if stream.is_empty() {
        return Ok(Vec::new());
    }
    let t_first = stream.first().unwrap().0;
    let t_last = stream.last().unwrap().0;
    let delta = params.half_window;
    let mut labels: Vec<Option<RangeLabel>> = vec![None; stream.len()];
    for m in 0..num_windows(t_first, t_last, delta) {
        let center = t_first + m as f64 * delta;
        let members: Vec<usize> = (0..stream.len())
            .filter(|&k| (stream[k].0 - center).abs() <= delta + 1e-12)
            .collect();
        if members.is_empty() {
            continue;
        }
        let window: Vec<(f64, f64)> = members.iter().map(|&k| stream[k]).collect();
        let window_labels = reject_outliers(anchor, &window, &predict, params)?;
        for (pos, &k) in members.iter().enumerate() {
            if window_center(t_first, delta, stream[k].0) == m {
                labels[k] = Some(window_labels[pos]);
            }
        }
    }
    Ok(labels
        .into_iter()
        .map(|l| l.expect("every measurement falls in its nearest window"))
        .collect())
}

/// One (position, range, innovation) triple feeding the virtual-anchor fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaSample {
    pub position: Vector3<f64>,
    pub range: f64,
    pub innovation: f64,
}

/// Converged virtual-anchor estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaFit {
    pub position: Vector3<f64>,
    pub weighted_rms: f64,
    pub iterations: usize,
}

const GN_MAX_ITERATIONS: usize = 50;
const GN_STEP_TOL: f64 = 1e-10;

/// Weighted Gauss-Newton fit of a static beacon position to motion-range
/// pairs; weights down-rate samples with large innovations and are held fixed
/// across iterations.
pub fn fit_virtual_anchor(
    samples: &[VaSample],
    params: &VaParams,
    initial_guess: &Vector3<f64>,
) -> Result<VaFit> {
    params.validate()?;
    if samples.len() < 4 {
        return Err(Error::UnderConstrained(format!(
            "{} samples, need at least 4",
            samples.len()
        )));
    }
    check_not_collinear(samples)?;

    let weights: Vec<f64> = samples
        .iter()
        .map(|s| (params.weight_c / (s.innovation.abs() + params.epsilon)).min(1.0))
        .collect();

    let mut b = *initial_guess;
    for iteration in 0..GN_MAX_ITERATIONS {
        let mut h = Matrix3::<f64>::zeros();
        let mut g = Vector3::<f64>::zeros();
        for (s, &w) in samples.iter().zip(&weights) {
            let diff = s.position - b;
            let dist = diff.norm();
            if dist < 1e-9 {
                return Err(Error::DegenerateGeometry(
                    "candidate anchor collapsed onto a sample position".into(),
                ));
            }
            let jac = diff / dist; // d(residual)/d(b), residual = r - |p - b|
            let e = s.range - dist;
            h += w * jac * jac.transpose();
            g += w * jac * e;
        }
        let chol = h.cholesky().ok_or_else(|| {
            Error::DegenerateGeometry("normal matrix of the anchor fit is singular".into())
        })?;
        let step = -chol.solve(&g);
        b += step;
        if step.norm() < GN_STEP_TOL {
            let (mut num, mut den) = (0.0, 0.0);
            for (s, &w) in samples.iter().zip(&weights) {
                let e = s.range - (s.position - b).norm();
                num += w * e * e;
                den += w;
            }
            return Ok(VaFit {
                position: b,
                weighted_rms: (num / den).sqrt(),
                iterations: iteration + 1,
            });
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "anchor fit still moving after {GN_MAX_ITERATIONS} iterations"
    )))
}

/// Rejects sample sets whose centered positions have rank <= 1.
fn check_not_collinear(samples: &[VaSample]) -> Result<()> {
    let n = samples.len() as f64;
    let mean: Vector3<f64> = samples.iter().map(|s| s.position).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::<f64>::zeros();
    for s in samples {
        let d = s.position - mean;
        cov += d * d.transpose() / n;
    }
    let mut eigs: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.total_cmp(a));
    if eigs[1] < 1e-10 + 1e-6 * eigs[0] {
        return Err(Error::DegenerateGeometry(
            "sample positions are collinear".into(),
        ));
    }
    Ok(())
}

/// Unit row `(p - b)^T / |p - b|`: the range derivative with respect to the
/// platform position.
pub fn range_jacobian(p: &Vector3<f64>, b: &Vector3<f64>) -> Result<RowVector3<f64>> {
    let diff = p - b;
    let dist = diff.norm();
    if dist < 1e-12 {
        return Err(Error::DegenerateGeometry(
            "position coincides with the anchor".into(),
        ));
    }
    Ok((diff / dist).transpose())
}

/// Range-only Fisher information of an anchor set over a position window:
/// the sum of unit-direction outer products scaled by `1/sigma_r^2`.
pub fn fisher_information(
    anchors: &[Vector3<f64>],
    positions: &[Vector3<f64>],
    sigma_r: f64,
) -> Result<Matrix3<f64>> {
    if sigma_r <= 0.0 {
        return Err(Error::InvalidArgument("sigma_r must be positive".into()));
    }
    let inv_var = 1.0 / (sigma_r * sigma_r);
    let mut f = Matrix3::zeros();
    for p in positions {
        for b in anchors {
            let j = range_jacobian(p, b)?;
            f += j.transpose() * j * inv_var;
        }
    }
    Ok(f)
}

/// Outcome of candidate screening, with the scores that decided it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScreenDecision {
    Accept {
        lambda_min: f64,
        theta_min_deg: Option<f64>,
    },
    RejectInformation {
        lambda_min: f64,
    },
    RejectAngular {
        theta_min_deg: f64,
    },
}

impl ScreenDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, ScreenDecision::Accept { .. })
    }
}

/// Screens a fitted candidate: it must raise the smallest eigenvalue of the
/// window's Fisher information by more than `tau_lambda`, and its line of
/// sight from the mean window position must stay at least `theta0` away from
/// every existing anchor. With no existing anchors only the information test
/// applies.
pub fn screen_candidate(
    candidate: &Vector3<f64>,
    existing_anchors: &[Vector3<f64>],
    window_positions: &[Vector3<f64>],
    params: &VaParams,
) -> Result<ScreenDecision> {
    params.validate()?;
    if window_positions.is_empty() {
        return Err(Error::InvalidArgument(
            "screening needs a nonempty position window".into(),
        ));
    }
    let f_base = fisher_information(existing_anchors, window_positions, params.sigma_r)?;
    let mut with_candidate = existing_anchors.to_vec();
    with_candidate.push(*candidate);
    let f_aug = fisher_information(&with_candidate, window_positions, params.sigma_r)?;
    let delta_f = f_aug - f_base;
    let lambda_min = delta_f
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lambda_min <= params.tau_lambda {
        return Ok(ScreenDecision::RejectInformation { lambda_min });
    }
    if existing_anchors.is_empty() {
        return Ok(ScreenDecision::Accept {
            lambda_min,
            theta_min_deg: None,
        });
    }
    let n = window_positions.len() as f64;
    let mean: Vector3<f64> = window_positions.iter().copied().sum::<Vector3<f64>>() / n;
    let cand_dir = candidate - mean;
    let mut theta_min = f64::INFINITY;
    for b in existing_anchors {
        let dir = b - mean;
        let cross = cand_dir.cross(&dir).norm();
        let dot = cand_dir.dot(&dir);
        // degenerate directions count as collinear
        let angle = if cand_dir.norm() < 1e-12 || dir.norm() < 1e-12 {
            0.0
        } else {
            cross.atan2(dot)
        };
        theta_min = theta_min.min(angle);
    }
    let theta_min_deg = theta_min.to_degrees();
    if theta_min_deg < params.theta0_deg {
        return Ok(ScreenDecision::RejectAngular { theta_min_deg });
    }
    Ok(ScreenDecision::Accept {
        lambda_min,
        theta_min_deg: Some(theta_min_deg),
    })
}

/// Inlier-labeled range measurement feeding virtual-anchor construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledRange {
    pub t: f64,
    pub range: f64,
    pub innovation: f64,
    pub is_outlier: bool,
}

/// Bookkeeping from one construction pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VaBuildOutput {
    /// Accepted virtual anchors with the time window each one covers.
    pub accepted: Vec<AcceptedVa>,
    pub rejected_information: usize,
    pub rejected_angular: usize,
    /// Windows skipped for too few inliers, degeneracy, or non-convergence.
    pub skipped: usize,
    pub windows_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedVa {
    pub id: String,
    pub source_anchor: String,
    pub anchor: Anchor,
    /// Window bounds; the ranges inside constructed this anchor.
    pub t_lo: f64,
    pub t_hi: f64,
    pub lambda_min: f64,
    pub theta_min_deg: Option<f64>,
    pub fit_rms: f64,
}

/// Builds virtual anchors from inlier-labeled per-anchor range streams.
///
/// For every physical anchor, the stream is tiled with windows of width
/// `2 * half_window` at stride `half_window`; each window with at least 4
/// inliers yields one candidate fitted from the predicted positions,
/// initialized at the source anchor. Candidates are screened against the
/// other physical anchors plus every virtual anchor already accepted, so a
/// re-estimate of an anchor that adds no new geometry is dropped. Accepted
/// anchors are immutable and carry `sigma_va`.
pub fn build_virtual_anchors(
    streams: &BTreeMap<String, Vec<LabeledRange>>,
    physical: &BTreeMap<String, Anchor>,
    predict: impl Fn(f64) -> Vector3<f64>,
    existing_vas: &[Vector3<f64>],
    rej: &RejectionParams,
    params: &VaParams,
) -> Result<VaBuildOutput> {
    rej.validate()?;
    params.validate()?;
    let mut out = VaBuildOutput::default();
    let mut accepted_positions: Vec<Vector3<f64>> = existing_vas.to_vec();

    for (anchor_id, stream) in streams {
        let Some(source) = physical.get(anchor_id) else {
            return Err(Error::InvalidArgument(format!(
                "range stream references unknown anchor {anchor_id}"
            )));
        };
        let inliers: Vec<&LabeledRange> = stream.iter().filter(|r| !r.is_outlier).collect();
        if inliers.is_empty() {
            continue;
        }
        let others: Vec<Vector3<f64>> = physical
            .iter()
            .filter(|(id, _)| *id != anchor_id)
            .map(|(_, a)| a.position)
            .collect();
        let t_first = inliers.first().unwrap().t;
        let t_last = inliers.last().unwrap().t;
        let delta = rej.half_window;
        for m in 0..num_windows(t_first, t_last, delta) {
            let center = t_first + m as f64 * delta;
            let members: Vec<&&LabeledRange> = inliers
                .iter()
                .filter(|r| (r.t - center).abs() <= delta + 1e-12)
                .collect();
            out.windows_total += 1;
            if members.len() < 4 {
                out.skipped += 1;
                continue;
            }
            let samples: Vec<VaSample> = members
                .iter()
                .map(|r| VaSample {
                    position: predict(r.t),
                    range: r.range,
                    innovation: r.innovation,
                })
                .collect();
            let fit = match fit_virtual_anchor(&samples, params, &source.position) {
                Ok(fit) => fit,
                Err(Error::DegenerateGeometry(_))
                | Err(Error::ConvergenceFailure(_))
                | Err(Error::UnderConstrained(_)) => {
                    out.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mut screen_set = others.clone();
            screen_set.extend_from_slice(&accepted_positions);
            let positions: Vec<Vector3<f64>> = samples.iter().map(|s| s.position).collect();
            match screen_candidate(&fit.position, &screen_set, &positions, params)? {
                ScreenDecision::Accept {
                    lambda_min,
                    theta_min_deg,
                } => {
                    accepted_positions.push(fit.position);
                    out.accepted.push(AcceptedVa {
                        id: format!("v_{anchor_id}_{m}"),
                        source_anchor: anchor_id.clone(),
                        anchor: Anchor {
                            position: fit.position,
                            kind: AnchorKind::Virtual,
                            sigma: params.sigma_va,
                        },
                        t_lo: center - delta,
                        t_hi: center + delta,
                        lambda_min,
                        theta_min_deg,
                        fit_rms: fit.weighted_rms,
                    });
                }
                ScreenDecision::RejectInformation { .. } => out.rejected_information += 1,
                ScreenDecision::RejectAngular { .. } => out.rejected_angular += 1,
            }
        }
    }
    Ok(out)
}
