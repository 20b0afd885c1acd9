//! Feasible-direction ascent steps for one surface's position or rotation.
//!
//! Each step estimates the sum-rate gradient by central differences (with `W`
//! and `θ` fixed), solves a small LP for an ascent direction over a
//! linearization of the placement constraints, and backtracks with the Armijo
//! rule. Trial points that violate the exact constraints are rejected during
//! backtracking, so every accepted pose is feasible.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::channel::{bs_steering, sinr_or_zero, sum_rate};
use crate::geometry::{element_positions, feasibility_check, normal_jacobian, SurfacePose};
use crate::numerics::{armijo_step, finite_diff_gradient, lp_solve, LinearProgram, LpOutcome};
use crate::optimizer::{AoState, OptimizerConfig, System};
use crate::{Error, Result, C64};

/// How the minimum-distance constraint is linearized around the previous position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceLinearization {
    /// `(q⁰ − q_j)ᵀ(q − q_j) ≥ d_min ‖q⁰ − q_j‖`, an inner approximation of the ball exclusion.
    #[default]
    Normalized,
    /// `(q⁰ − q_j)ᵀ(q − q_j) / ‖q⁰ − q_j‖² ≥ d_min`.
    Literal,
}

/// Half-space `normalᵀ q ≤ offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn contains(&self, q: &Vector3<f64>, tol: f64) -> bool {
        self.normal.dot(q) <= self.offset + tol
    }

    /// The same constraint expressed in the step `d` with `q = origin + d`.
    fn shifted(&self, origin: &Vector3<f64>) -> (Vec<f64>, f64) {
        (self.normal.as_slice().to_vec(), self.offset - self.normal.dot(origin))
    }
}

/// First-order approximation of `‖q − q_j‖ ≥ d_min` around `q_prev`.
pub fn linearized_min_distance(
    q_prev: &Vector3<f64>,
    q_j: &Vector3<f64>,
    d_min: f64,
    mode: DistanceLinearization,
) -> Result<HalfSpace> {
    let delta = q_prev - q_j;
    let dist = delta.norm();
    if dist == 0.0 || !dist.is_finite() {
        return Err(Error::numerical("cannot linearize the distance between coincident surfaces"));
    }
    let rhs = match mode {
        DistanceLinearization::Normalized => d_min * dist,
        DistanceLinearization::Literal => d_min * dist * dist,
    };
    // Δᵀ(q − q_j) ≥ rhs  ⇔  −Δᵀq ≤ −Δᵀq_j − rhs
    Ok(HalfSpace { normal: -delta, offset: -delta.dot(q_j) - rhs })
}

/// Result of one position or rotation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseStep {
    pub pose: SurfacePose,
    /// Accepted Armijo step; zero when the pose did not move.
    pub step: f64,
    pub gradient: Vector3<f64>,
    pub direction: Vector3<f64>,
    pub rate_before: f64,
    pub rate_after: f64,
}

/// Sum rate as a function of one surface's pose, everything else fixed.
///
/// Evaluates `V_b diag(θ_b) g_kb` directly from the path parameters, without
/// building the per-surface channel matrices.
struct SurfaceObjective<'a> {
    system: &'a System,
    state: &'a AoState,
    b: usize,
    /// Effective channels of all other surfaces.
    others: DMatrix<C64>,
    /// `(user, f, gain)` for every user path.
    user_paths: Vec<(usize, Vector3<f64>, C64)>,
    /// `(s, a_p z_p)` for every BS path.
    bs_paths: Vec<(Vector3<f64>, DVector<C64>)>,
}

impl<'a> SurfaceObjective<'a> {
    fn new(system: &'a System, state: &'a AoState, b: usize) -> Self {
        let sc = &system.scenario;
        let user_paths = sc
            .users
            .iter()
            .enumerate()
            .flat_map(|(k, paths)| paths.iter().map(move |p| (k, p.doa(), p.gain)))
            .collect();
        let bs_paths =
            sc.bs_paths.iter().map(|p| (p.dod(), bs_steering(p.aoa, sc.bs_antennas) * p.gain)).collect();
        Self { system, state, b, others: state.channels_without(b), user_paths, bs_paths }
    }

    fn rate(&self, pose: &SurfacePose) -> Result<f64> {
        let system = self.system;
        let sc = &system.scenario;
        let n = system.layout.len();
        let k_users = sc.num_users();
        let theta = &self.state.theta[self.b * n..(self.b + 1) * n];
        let positions = element_positions(pose, &system.layout)?;
        let normal = pose.normal()?;
        let wavenumber = 2.0 * PI / sc.wavelength;

        // g[k * n + i] = i-th entry of g_k
        let mut g = vec![C64::new(0.0, 0.0); k_users * n];
        for (user, f, gain) in &self.user_paths {
            let gi = system.pattern.gain_for_normal(&normal, f)?;
            if gi > 0.0 {
                let amp = gain * gi.sqrt();
                for (slot, r) in g[user * n..(user + 1) * n].iter_mut().zip(&positions) {
                    *slot += amp * C64::from_polar(1.0, wavenumber * f.dot(r));
                }
            }
        }

        let mut h = self.others.clone();
        let mut weighted = vec![C64::new(0.0, 0.0); n];
        for (s, z) in &self.bs_paths {
            let gr = system.pattern.gain_for_normal(&normal, s)?;
            if gr <= 0.0 {
                continue;
            }
            let amp = gr.sqrt();
            for ((slot, r), t) in weighted.iter_mut().zip(&positions).zip(theta) {
                *slot = C64::from_polar(amp, -wavenumber * s.dot(r)) * t;
            }
            for user in 0..k_users {
                let y: C64 = weighted.iter().zip(&g[user * n..(user + 1) * n]).map(|(a, b)| a * b).sum();
                h.column_mut(user).axpy(y, z, C64::new(1.0, 0.0));
            }
        }
        Ok(sum_rate(&sinr_or_zero(&self.state.w, &h, &sc.powers, sc.noise_power)?))
    }

    fn rate_or_nan(&self, pose: &SurfacePose) -> f64 {
        self.rate(pose).unwrap_or(f64::NAN)
    }

    /// Sum rate at `pose` if the full placement is feasible, `-∞` otherwise.
    fn feasible_rate(&self, pose: &SurfacePose) -> f64 {
        let mut poses = self.state.poses.clone();
        poses[self.b] = *pose;
        match feasibility_check(&poses, &self.system.region, self.system.d_min) {
            Ok(rep) if rep.is_feasible() => self.rate_or_nan(pose),
            _ => f64::NEG_INFINITY,
        }
    }
}

fn solve_direction(lp: &LinearProgram, what: &str) -> Result<Vector3<f64>> {
    match lp_solve(lp)? {
        LpOutcome::Optimal { point, .. } => Ok(Vector3::from_column_slice(&point)),
        other => Err(Error::Internal(format!("{what} direction LP returned {other:?} at a feasible point"))),
    }
}

/// Direction LP for the position of surface `b`.
pub(crate) fn position_lp(
    system: &System,
    poses: &[SurfacePose],
    b: usize,
    gradient: &Vector3<f64>,
    config: &OptimizerConfig,
) -> Result<LinearProgram> {
    let q = poses[b].position;
    let lo = system.region.lower();
    let hi = system.region.upper();
    let mut lp = LinearProgram::boxed((-gradient).as_slice().to_vec(), 0.0, 0.0);
    for i in 0..3 {
        lp.lower[i] = (-config.position_box_m).max(lo[i] - q[i]);
        lp.upper[i] = config.position_box_m.min(hi[i] - q[i]);
        if lp.lower[i] > lp.upper[i] {
            // only possible when q sits outside the region by rounding
            let mid = 0.5 * (lp.lower[i] + lp.upper[i]);
            lp.lower[i] = mid;
            lp.upper[i] = mid;
        }
    }
    let nb = poses[b].normal()?;
    // facing away from the origin: −n_bᵀd ≤ n_bᵀq
    lp.push_row((-nb).as_slice().to_vec(), nb.dot(&q));
    for (j, pj) in poses.iter().enumerate() {
        if j == b {
            continue;
        }
        let row = linearized_min_distance(&q, &pj.position, system.d_min, config.distance_linearization)?;
        let (a, rhs) = row.shifted(&q);
        lp.push_row(a, rhs);
        // surface j behind b's plane: −n_bᵀd ≤ n_bᵀ(q − q_j)
        lp.push_row((-nb).as_slice().to_vec(), nb.dot(&(q - pj.position)));
        // b behind j's plane: n_jᵀd ≤ n_jᵀ(q_j − q)
        let nj = pj.normal()?;
        lp.push_row(nj.as_slice().to_vec(), nj.dot(&(pj.position - q)));
    }
    Ok(lp)
}

/// Direction LP for the rotation of surface `b`, with `n(u + δ) ≈ n(u) + J(u)δ`.
pub(crate) fn rotation_lp(
    poses: &[SurfacePose],
    b: usize,
    gradient: &Vector3<f64>,
    config: &OptimizerConfig,
) -> Result<LinearProgram> {
    let pose = &poses[b];
    let q = pose.position;
    let n = pose.normal()?;
    let jac = normal_jacobian(&pose.rotation)?;
    let box_rad = config.rotation_box_rad;
    let mut lp = LinearProgram::boxed((-gradient).as_slice().to_vec(), -box_rad, box_rad);
    // (n + Jδ)ᵀq ≥ 0
    let jq = jac.transpose() * q;
    lp.push_row((-jq).as_slice().to_vec(), n.dot(&q));
    for (j, pj) in poses.iter().enumerate() {
        if j == b {
            continue;
        }
        // (n + Jδ)ᵀ(q_j − q) ≤ 0
        let delta = pj.position - q;
        let jd = jac.transpose() * delta;
        lp.push_row(jd.as_slice().to_vec(), -n.dot(&delta));
    }
    Ok(lp)
}

/// One feasible-direction ascent step on the position of surface `b`.
pub fn position_step(system: &System, state: &AoState, b: usize, config: &OptimizerConfig) -> Result<PoseStep> {
    let pose = state.poses[b];
    let obj = SurfaceObjective::new(system, state, b);
    let rate_before = obj.rate(&pose)?;
    let xi = config.position_xi(system.scenario.wavelength);
    let at = |q: &Vector3<f64>| SurfacePose { position: *q, ..pose };
    let gradient = finite_diff_gradient(|q| obj.rate_or_nan(&at(q)), &pose.position, xi)?;
    let lp = position_lp(system, &state.poses, b, &gradient, config)?;
    let direction = solve_direction(&lp, "position")?;
    let out = armijo_step(
        |q| obj.feasible_rate(&at(q)),
        &pose.position,
        rate_before,
        &gradient,
        &direction,
        &config.step_rule,
    );
    Ok(PoseStep {
        pose: at(&out.point),
        step: out.step,
        gradient,
        direction,
        rate_before,
        rate_after: out.value,
    })
}

/// One feasible-direction ascent step on the rotation of surface `b`.
pub fn rotation_step(system: &System, state: &AoState, b: usize, config: &OptimizerConfig) -> Result<PoseStep> {
    let pose = state.poses[b];
    let obj = SurfaceObjective::new(system, state, b);
    let rate_before = obj.rate(&pose)?;
    let at = |u: &Vector3<f64>| SurfacePose { rotation: *u, ..pose };
    let gradient = finite_diff_gradient(|u| obj.rate_or_nan(&at(u)), &pose.rotation, config.rotation_xi_rad)?;
    let lp = rotation_lp(&state.poses, b, &gradient, config)?;
    let direction = solve_direction(&lp, "rotation")?;
    let out = armijo_step(
        |u| obj.feasible_rate(&at(u)),
        &pose.rotation,
        rate_before,
        &gradient,
        &direction,
        &config.step_rule,
    );
    let moved = if out.step > 0.0 { SurfacePose::new(pose.position, out.point) } else { pose };
    Ok(PoseStep { pose: moved, step: out.step, gradient, direction, rate_before, rate_after: out.value })
}

/// Central-difference sum-rate gradient with respect to the position of surface `b`.
pub fn position_gradient(system: &System, state: &AoState, b: usize, xi: f64) -> Result<Vector3<f64>> {
    let pose = state.poses[b];
    let obj = SurfaceObjective::new(system, state, b);
    finite_diff_gradient(|q| obj.rate_or_nan(&SurfacePose { position: *q, ..pose }), &pose.position, xi)
}

/// Central-difference sum-rate gradient with respect to the rotation of surface `b`.
pub fn rotation_gradient(system: &System, state: &AoState, b: usize, xi: f64) -> Result<Vector3<f64>> {
    let pose = state.poses[b];
    let obj = SurfaceObjective::new(system, state, b);
    finite_diff_gradient(|u| obj.rate_or_nan(&SurfacePose { rotation: *u, ..pose }), &pose.rotation, xi)
}
