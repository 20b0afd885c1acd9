//! Alternating optimization of receive beamforming, surface poses and
//! reflection phases.
//!
//! One outer iteration updates `W` by MMSE, then runs `T2` inner sweeps of
//! per-surface position steps, per-surface rotation steps and one pass of
//! exact per-element phase updates. Every block is monotone in the sum rate,
//! so the recorded trace is non-decreasing up to rounding.

mod beamforming;
mod pose;
mod reflection;

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use beamforming::mmse_beamformer;
pub use pose::{
    linearized_min_distance, position_gradient, position_step, rotation_gradient, rotation_step,
    DistanceLinearization, HalfSpace, PoseStep,
};
pub use reflection::{
    coupling_coefficient, fp_auxiliaries, fp_auxiliaries_from_channels, fp_quadratic, phase_coordinate_update,
    phase_sweep, FpQuadratic, ReflectionState,
};

use crate::channel::{sinr_or_zero, sum_rate, ChannelRealization, Scenario, SurfaceChannel};
use crate::geometry::{feasibility_check, FeasibilityReport, LocalLayout, SiteRegion, SurfacePose};
use crate::numerics::StepRule;
use crate::radiation::RadiationPattern;
use crate::{Error, Result, C64};

/// Deployment scheme being optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Scheme {
    /// Several movable surfaces.
    #[default]
    #[serde(rename = "distributed-6dma")]
    Distributed6dma,
    /// One movable surface holding the whole element budget.
    #[serde(rename = "centralized-6dma")]
    Centralized6dma,
    /// One surface at a fixed pose; only `W` and `θ` are optimized.
    #[serde(rename = "fixed-irs")]
    FixedIrs,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Distributed6dma => "distributed-6dma",
            Scheme::Centralized6dma => "centralized-6dma",
            Scheme::FixedIrs => "fixed-irs",
        }
    }

    pub fn moves_surfaces(&self) -> bool {
        !matches!(self, Scheme::FixedIrs)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Outer iterations `T1`.
    pub outer_iterations: usize,
    /// Inner pose/phase sweeps `T2` per outer iteration.
    pub inner_iterations: usize,
    pub step_rule: StepRule,
    /// Finite-difference step for positions; `None` means `1e-4 λ`.
    pub position_xi_m: Option<f64>,
    pub rotation_xi_rad: f64,
    /// Stop once an outer iteration gains less than this.
    pub tolerance_bps_hz: f64,
    /// Bound on each coordinate of the position direction.
    pub position_box_m: f64,
    /// Bound on each coordinate of the rotation direction.
    pub rotation_box_rad: f64,
    pub distance_linearization: DistanceLinearization,
    /// Set per run by the caller; not part of the config file.
    #[serde(skip)]
    pub scheme: Scheme,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 30,
            inner_iterations: 1,
            step_rule: StepRule::default(),
            position_xi_m: None,
            rotation_xi_rad: 1e-5,
            tolerance_bps_hz: 1e-4,
            position_box_m: 1.0,
            rotation_box_rad: 1.0,
            distance_linearization: DistanceLinearization::Normalized,
            scheme: Scheme::Distributed6dma,
        }
    }
}

impl OptimizerConfig {
    pub fn position_xi(&self, wavelength: f64) -> f64 {
        self.position_xi_m.unwrap_or(1e-4 * wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer_iterations == 0 || self.inner_iterations == 0 {
            return Err(Error::invalid("outer and inner iteration counts must be at least 1"));
        }
        self.validate_steps()
    }

    fn validate_steps(&self) -> Result<()> {
        self.step_rule.validate()?;
        if self.position_xi_m.is_some_and(|x| !(x > 0.0)) || !(self.rotation_xi_rad > 0.0) {
            return Err(Error::invalid("finite-difference steps must be positive"));
        }
        if !(self.position_box_m > 0.0) || !(self.rotation_box_rad > 0.0) {
            return Err(Error::invalid("direction boxes must be positive"));
        }
        if !(self.tolerance_bps_hz >= 0.0) {
            return Err(Error::invalid("tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// Everything fixed during one optimization run.
#[derive(Debug, Clone)]
pub struct System {
    pub scenario: Scenario,
    /// Element layout shared by all surfaces.
    pub layout: LocalLayout,
    pub pattern: RadiationPattern,
    pub region: SiteRegion,
    pub d_min: f64,
}

impl System {
    pub fn new(
        scenario: Scenario,
        layout: LocalLayout,
        pattern: RadiationPattern,
        region: SiteRegion,
        d_min: f64,
    ) -> Result<Self> {
        scenario.validate()?;
        if !(d_min >= 0.0 && d_min.is_finite()) {
            return Err(Error::invalid("d_min must be non-negative"));
        }
        Ok(Self { scenario, layout, pattern, region, d_min })
    }

    pub fn feasibility(&self, poses: &[SurfacePose]) -> Result<FeasibilityReport> {
        feasibility_check(poses, &self.region, self.d_min)
    }
}

/// Mutable optimization state with per-surface channel caches.
#[derive(Debug, Clone)]
pub struct AoState {
    pub poses: Vec<SurfacePose>,
    pub theta: Vec<C64>,
    pub w: DMatrix<C64>,
    channels: Vec<SurfaceChannel>,
    /// `V_b diag(θ_b) g_kb` for every user, one `M × K` block per surface.
    contributions: Vec<DMatrix<C64>>,
}

impl AoState {
    /// State with `W = 0`; call [`AoState::update_beamformer`] before evaluating rates.
    pub fn new(system: &System, poses: Vec<SurfacePose>, theta: Vec<C64>) -> Result<Self> {
        let n = system.layout.len();
        if poses.is_empty() {
            return Err(Error::invalid("need at least one surface"));
        }
        if theta.len() != n * poses.len() {
            return Err(Error::invalid(format!(
                "θ has {} entries for {} surfaces of {n} elements",
                theta.len(),
                poses.len()
            )));
        }
        if theta.iter().any(|t| (t.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::invalid("reflection coefficients must have unit modulus"));
        }
        let channels = poses
            .iter()
            .map(|p| SurfaceChannel::synthesize(&system.scenario, p, &system.layout, &system.pattern))
            .collect::<Result<Vec<_>>>()?;
        let w = DMatrix::zeros(system.scenario.bs_antennas, system.scenario.num_users());
        let mut state = Self { poses, theta, w, channels, contributions: Vec::new() };
        state.refresh_contributions(n)?;
        Ok(state)
    }

    fn refresh_contributions(&mut self, n: usize) -> Result<()> {
        self.contributions = self
            .channels
            .iter()
            .enumerate()
            .map(|(b, c)| c.contribution(&self.theta[b * n..(b + 1) * n]))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Effective channels `H = [h_1, …, h_K]`.
    pub fn effective_channel(&self) -> DMatrix<C64> {
        self.channels_without(usize::MAX)
    }

    /// Sum of all surfaces' contributions except surface `b`.
    pub fn channels_without(&self, b: usize) -> DMatrix<C64> {
        let mut h = DMatrix::zeros(self.w.nrows(), self.w.ncols());
        for (i, c) in self.contributions.iter().enumerate() {
            if i != b {
                h += c;
            }
        }
        h
    }

    pub fn realization(&self) -> ChannelRealization {
        ChannelRealization { surfaces: self.channels.clone() }
    }

    pub fn sum_rate(&self, system: &System) -> Result<f64> {
        let h = self.effective_channel();
        Ok(sum_rate(&sinr_or_zero(&self.w, &h, &system.scenario.powers, system.scenario.noise_power)?))
    }

    pub fn update_beamformer(&mut self, system: &System) -> Result<()> {
        let h = self.effective_channel();
        self.w = mmse_beamformer(&h, &system.scenario.powers, system.scenario.noise_power)?;
        Ok(())
    }

    pub fn set_pose(&mut self, system: &System, b: usize, pose: SurfacePose) -> Result<()> {
        let n = system.layout.len();
        let channel = SurfaceChannel::synthesize(&system.scenario, &pose, &system.layout, &system.pattern)?;
        self.contributions[b] = channel.contribution(&self.theta[b * n..(b + 1) * n])?;
        self.channels[b] = channel;
        self.poses[b] = pose;
        Ok(())
    }

    /// Refreshes `(α, ε)` and runs one sweep of exact phase updates.
    pub fn update_phases(&mut self, system: &System) -> Result<ReflectionState> {
        let s = &system.scenario;
        let h = self.effective_channel();
        let (alpha, epsilon) = fp_auxiliaries_from_channels(&h, &self.w, &s.powers, s.noise_power)?;
        let quad = fp_quadratic(&self.realization(), &self.w, &s.powers, &alpha, &epsilon)?;
        phase_sweep(&quad, &mut self.theta);
        self.refresh_contributions(system.layout.len())?;
        Ok(ReflectionState { theta: self.theta.clone(), alpha, epsilon })
    }
}

/// Which block produced an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Beamforming,
    Position(usize),
    Rotation(usize),
    Reflection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEvent {
    pub block: Block,
    pub outer_iteration: usize,
    pub rate_before: f64,
    pub rate_after: f64,
}

/// Hook called after every block update of [`ao_optimize`].
pub trait AoObserver {
    fn on_block(&mut self, _event: &BlockEvent, _state: &AoState) {}
}

/// Observer that ignores everything.
pub struct NoObserver;

impl AoObserver for NoObserver {}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub w: DMatrix<C64>,
    pub reflection: ReflectionState,
    pub poses: Vec<SurfacePose>,
    /// Sum rate at the start and after each outer iteration.
    pub trace: Vec<f64>,
    /// Sum rate after the final beamformer update.
    pub sum_rate: f64,
    pub outer_iterations: usize,
    /// Whether the run stopped on the tolerance rather than the iteration cap.
    pub converged: bool,
    pub feasibility: FeasibilityReport,
    pub runtime_s: f64,
}

/// Runs the alternating optimization from the given poses and phases.
///
/// With `outer_iterations = 0` this evaluates the initial point under the
/// MMSE beamformer.
pub fn ao_optimize(
    system: &System,
    poses: Vec<SurfacePose>,
    theta: Vec<C64>,
    config: &OptimizerConfig,
    observer: &mut dyn AoObserver,
) -> Result<RunResult> {
    let started = Instant::now();
    if config.inner_iterations == 0 {
        return Err(Error::invalid("inner iteration count must be at least 1"));
    }
    config.validate_steps()?;
    if !config.scheme.eq(&Scheme::Distributed6dma) && poses.len() != 1 {
        return Err(Error::invalid(format!("scheme {} uses exactly one surface", config.scheme)));
    }
    let report = system.feasibility(&poses)?;
    if !report.is_feasible() {
        return Err(Error::invalid(format!("initial poses are infeasible: {report:?}")));
    }

    let mut state = AoState::new(system, poses, theta)?;
    state.update_beamformer(system)?;
    let mut rate = state.sum_rate(system)?;
    let mut trace = vec![rate];
    let mut reflection = ReflectionState {
        theta: state.theta.clone(),
        alpha: vec![0.0; system.scenario.num_users()],
        epsilon: vec![C64::new(0.0, 0.0); system.scenario.num_users()],
    };
    let mut outer = 0;
    let mut converged = false;

    let emit = |observer: &mut dyn AoObserver, state: &AoState, block, t, before, after| {
        observer.on_block(&BlockEvent { block, outer_iteration: t, rate_before: before, rate_after: after }, state);
    };

    for t in 1..=config.outer_iterations {
        let start_rate = rate;
        state.update_beamformer(system)?;
        let after = state.sum_rate(system)?;
        emit(observer, &state, Block::Beamforming, t, rate, after);
        rate = after;

        for _ in 0..config.inner_iterations {
            if config.scheme.moves_surfaces() {
                for b in 0..state.poses.len() {
                    let step = position_step(system, &state, b, config)?;
                    if step.step > 0.0 {
                        state.set_pose(system, b, step.pose)?;
                    }
                    let after = state.sum_rate(system)?;
                    emit(observer, &state, Block::Position(b), t, rate, after);
                    rate = after;
                }
                for b in 0..state.poses.len() {
                    let step = rotation_step(system, &state, b, config)?;
                    if step.step > 0.0 {
                        state.set_pose(system, b, step.pose)?;
                    }
                    let after = state.sum_rate(system)?;
                    emit(observer, &state, Block::Rotation(b), t, rate, after);
                    rate = after;
                }
            }
            reflection = state.update_phases(system)?;
            let after = state.sum_rate(system)?;
            emit(observer, &state, Block::Reflection, t, rate, after);
            rate = after;
        }

        trace.push(rate);
        outer = t;
        if rate - start_rate < config.tolerance_bps_hz {
            converged = true;
            break;
        }
    }

    if outer > 0 {
        let before = rate;
        state.update_beamformer(system)?;
        rate = state.sum_rate(system)?;
        emit(observer, &state, Block::Beamforming, outer, before, rate);
    }

    let feasibility = system.feasibility(&state.poses)?;
    Ok(RunResult {
        w: state.w,
        reflection,
        poses: state.poses,
        trace,
        sum_rate: rate,
        outer_iterations: outer,
        converged,
        feasibility,
        runtime_s: started.elapsed().as_secs_f64(),
    })
}
