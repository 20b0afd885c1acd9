//! Seeded scenario generation, initial poses and per-scheme deployments.
//!
//! Every random draw comes from a ChaCha8 stream keyed by the run seed, with
//! a separate substream per user path, per BS path, for the initial poses and
//! for the initial phases. Changing the number of surfaces therefore never
//! changes the channel draws.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{BsPath, Scenario, UserPath};
use crate::geometry::{feasibility_check, LocalLayout, SiteRegion, SurfacePose};
use crate::optimizer::{Scheme, System};
use crate::radiation::{PatternKind, RadiationPattern};
use crate::{Error, Result, C64};

const USER_STREAM: u64 = 1 << 48;
const BS_STREAM: u64 = 2 << 48;
const POSE_STREAM: u64 = 3 << 48;
const PHASE_STREAM: u64 = 4 << 48;

/// Attempts allowed when rejection-sampling initial positions.
pub const MAX_INIT_ATTEMPTS: usize = 10_000;

/// Closed angle interval `[lo, hi]` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRange {
    pub lo: f64,
    pub hi: f64,
}

impl AngleRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::invalid(format!("{what}: need finite lo <= hi, got [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// How the initial surface poses are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Distributed surfaces start as the tiles of the single-surface array,
    /// so every scheme starts from the same physical aperture.
    #[default]
    Tiled,
    /// Rejection-sampled positions on the plane through the anchor, parallel
    /// normals, then small random tilts kept only when feasible.
    Random,
}

/// Parameters of one simulated drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// `M`.
    pub bs_antennas: usize,
    /// `K`.
    pub users: usize,
    /// `B` for the distributed scheme.
    pub surfaces: usize,
    /// Elements per surface along local y.
    pub elements_x: usize,
    /// Elements per surface along local z.
    pub elements_y: usize,
    pub wavelength_m: f64,
    /// `L_k`, the same for every user.
    pub user_paths: usize,
    /// `P`.
    pub bs_paths: usize,
    pub user_los_variance: f64,
    pub user_nlos_variance: f64,
    pub bs_los_variance: f64,
    pub bs_nlos_variance: f64,
    pub user_elevation_rad: AngleRange,
    pub user_azimuth_rad: AngleRange,
    pub bs_elevation_rad: AngleRange,
    pub bs_azimuth_rad: AngleRange,
    /// Angle of arrival at the BS array.
    pub bs_aoa_rad: AngleRange,
    pub power_dbm: f64,
    pub noise_power_dbm: f64,
    /// `None` means `(√2/2)λ + λ/10`.
    pub d_min_m: Option<f64>,
    pub region_center_m: [f64; 3],
    pub region_side_m: f64,
    /// Element area in m²; `None` means `(λ/2)²`.
    pub element_area_m2: Option<f64>,
    pub init: InitMode,
    /// Largest random tilt applied in [`InitMode::Random`].
    pub init_tilt_rad: f64,
    /// Offset of the anchor surface from the region center along its normal.
    pub anchor_offset_m: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            bs_antennas: 6,
            users: 6,
            surfaces: 4,
            elements_x: 2,
            elements_y: 2,
            wavelength_m: 0.125,
            user_paths: 2,
            bs_paths: 6,
            user_los_variance: 4e-6,
            user_nlos_variance: 1e-6,
            bs_los_variance: 4e-6,
            bs_nlos_variance: 1e-6,
            user_elevation_rad: AngleRange::new(0.0, FRAC_PI_2),
            user_azimuth_rad: AngleRange::new(PI, 1.5 * PI),
            bs_elevation_rad: AngleRange::new(FRAC_PI_2, PI),
            bs_azimuth_rad: AngleRange::new(-FRAC_PI_2, 0.0),
            bs_aoa_rad: AngleRange::new(0.0, FRAC_PI_2),
            power_dbm: 10.0,
            noise_power_dbm: -80.0,
            d_min_m: None,
            region_center_m: [1.5, 0.0, 0.0],
            region_side_m: 1.0,
            element_area_m2: None,
            init: InitMode::Tiled,
            init_tilt_rad: 0.05,
            anchor_offset_m: 0.05,
        }
    }
}

impl ScenarioParams {
    pub fn d_min(&self) -> f64 {
        self.d_min_m.unwrap_or(FRAC_1_SQRT_2 * self.wavelength_m + 0.1 * self.wavelength_m)
    }

    pub fn region(&self) -> Result<SiteRegion> {
        SiteRegion::new(Vector3::from(self.region_center_m), self.region_side_m)
    }

    /// Total element budget `B · N_x · N_y` shared by every scheme.
    pub fn element_budget(&self) -> usize {
        self.surfaces * self.elements_x * self.elements_y
    }

    pub fn pattern(&self, kind: PatternKind) -> Result<RadiationPattern> {
        match self.element_area_m2 {
            Some(a) => RadiationPattern::with_area(kind, a, self.wavelength_m),
            None => RadiationPattern::new(kind, self.wavelength_m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("bs_antennas", self.bs_antennas),
            ("users", self.users),
            ("surfaces", self.surfaces),
            ("elements_x", self.elements_x),
            ("elements_y", self.elements_y),
            ("user_paths", self.user_paths),
            ("bs_paths", self.bs_paths),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return Err(Error::invalid("wavelength_m must be positive"));
        }
        let variances = [
            ("user_los_variance", self.user_los_variance),
            ("user_nlos_variance", self.user_nlos_variance),
            ("bs_los_variance", self.bs_los_variance),
            ("bs_nlos_variance", self.bs_nlos_variance),
        ];
        for (name, v) in variances {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        self.user_elevation_rad.validate("user_elevation_rad")?;
        self.user_azimuth_rad.validate("user_azimuth_rad")?;
        self.bs_elevation_rad.validate("bs_elevation_rad")?;
        self.bs_azimuth_rad.validate("bs_azimuth_rad")?;
        self.bs_aoa_rad.validate("bs_aoa_rad")?;
        if !self.power_dbm.is_finite() || !self.noise_power_dbm.is_finite() {
            return Err(Error::invalid("powers in dBm must be finite"));
        }
        if !(self.d_min() >= 0.0 && self.d_min().is_finite()) {
            return Err(Error::invalid("d_min_m must be non-negative"));
        }
        self.region()?;
        if self.element_area_m2.is_some_and(|a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("element_area_m2 must be positive"));
        }
        if !(self.init_tilt_rad >= 0.0 && self.init_tilt_rad.is_finite()) {
            return Err(Error::invalid("init_tilt_rad must be non-negative"));
        }
        if !(self.anchor_offset_m.abs() < 0.5 * self.region_side_m) {
            return Err(Error::invalid("anchor_offset_m must stay inside the site region"));
        }
        Ok(())
    }
}

/// `10^((x − 30)/10)` watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly symmetric complex Gaussian `CN(0, variance)`.
fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> C64 {
    let normal = Normal::new(0.0, (0.5 * variance).sqrt()).expect("variance validated positive");
    C64::new(normal.sample(rng), normal.sample(rng))
}

/// Draws every random channel parameter of one drop.
pub fn generate_scenario(params: &ScenarioParams, seed: u64) -> Result<Scenario> {
    params.validate()?;
    let users = (0..params.users as u64)
        .map(|k| {
            (0..params.user_paths as u64)
                .map(|l| {
                    let mut rng = substream(seed, USER_STREAM | (k << 16) | l);
                    let variance = if l == 0 { params.user_los_variance } else { params.user_nlos_variance };
                    let gain = complex_gaussian(&mut rng, variance);
                    let elevation = params.user_elevation_rad.sample(&mut rng);
                    let azimuth = params.user_azimuth_rad.sample(&mut rng);
                    UserPath { gain, elevation, azimuth }
                })
                .collect()
        })
        .collect();
    let bs_paths = (0..params.bs_paths as u64)
        .map(|p| {
            let mut rng = substream(seed, BS_STREAM | p);
            let variance = if p == 0 { params.bs_los_variance } else { params.bs_nlos_variance };
            let gain = complex_gaussian(&mut rng, variance);
            let elevation = params.bs_elevation_rad.sample(&mut rng);
            let azimuth = params.bs_azimuth_rad.sample(&mut rng);
            let aoa = params.bs_aoa_rad.sample(&mut rng);
            BsPath { gain, elevation, azimuth, aoa }
        })
        .collect();
    let scenario = Scenario {
        wavelength: params.wavelength_m,
        bs_antennas: params.bs_antennas,
        users,
        bs_paths,
        powers: vec![dbm_to_watts(params.power_dbm); params.users],
        noise_power: dbm_to_watts(params.noise_power_dbm),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Unit bisector of the mean user arrival direction and the mean BS departure
/// direction, both taken from the surface's point of view (`−f`, `−s`).
pub fn mean_bisector(scenario: &Scenario) -> Result<Vector3<f64>> {
    let user_dirs: Vec<_> = scenario.users.iter().flatten().map(|p| -p.doa()).collect();
    let bs_dirs: Vec<_> = scenario.bs_paths.iter().map(|p| -p.dod()).collect();
    let mean = |dirs: &[Vector3<f64>]| dirs.iter().sum::<Vector3<f64>>() / dirs.len() as f64;
    let (a, b) = (mean(&user_dirs), mean(&bs_dirs));
    let sum = a.try_normalize(0.0).unwrap_or(a) + b.try_normalize(0.0).unwrap_or(b);
    sum.try_normalize(1e-12)
        .ok_or_else(|| Error::numerical("mean user and BS directions are opposite; no bisector"))
}

/// Pose of the single conventional surface: near the region center, normal
/// along [`mean_bisector`], tilted just enough to face away from the origin.
pub fn fixed_irs_pose(params: &ScenarioParams, scenario: &Scenario) -> Result<SurfacePose> {
    let region = params.region()?;
    let mut n = mean_bisector(scenario)?;
    if let Some(c) = region.center.try_normalize(1e-12) {
        let along = n.dot(&c);
        if along < 0.0 {
            n = (n - c * along)
                .try_normalize(1e-12)
                .ok_or_else(|| Error::numerical("bisector points straight at the origin"))?;
        }
    }
    SurfacePose::facing(region.center + n * params.anchor_offset_m, &n, 0.0)
}

/// Number of surfaces and the per-surface layout used by one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub surfaces: usize,
    pub layout: LocalLayout,
    /// Tile grid `(columns, rows)` of the distributed surfaces inside the single-surface array.
    pub tiles: (usize, usize),
}

impl Deployment {
    pub fn total_elements(&self) -> usize {
        self.surfaces * self.layout.len()
    }
}

/// Most square factorization `cols × rows = b` with `cols ≥ rows`.
fn tile_grid(b: usize) -> (usize, usize) {
    let rows = (1..=b).filter(|r| b.is_multiple_of(*r) && r * r <= b).max().unwrap_or(1);
    (b / rows, rows)
}

/// Surfaces and layout for `scheme`; every scheme gets the same element budget.
pub fn deployment(params: &ScenarioParams, scheme: Scheme) -> Result<Deployment> {
    let (cols, rows) = tile_grid(params.surfaces);
    let d = match scheme {
        Scheme::Distributed6dma => Deployment {
            surfaces: params.surfaces,
            layout: LocalLayout::uniform(params.elements_x, params.elements_y, params.wavelength_m)?,
            tiles: (cols, rows),
        },
        Scheme::Centralized6dma | Scheme::FixedIrs => Deployment {
            surfaces: 1,
            layout: LocalLayout::uniform(
                params.elements_x * cols,
                params.elements_y * rows,
                params.wavelength_m,
            )?,
            tiles: (cols, rows),
        },
    };
    if d.total_elements() != params.element_budget() {
        return Err(Error::Internal(format!(
            "{scheme} deploys {} elements instead of {}",
            d.total_elements(),
            params.element_budget()
        )));
    }
    Ok(d)
}

/// Checks that all `schemes` deploy the same total number of elements.
pub fn check_equal_budgets(params: &ScenarioParams, schemes: &[Scheme]) -> Result<()> {
    let budgets = schemes.iter().map(|s| deployment(params, *s).map(|d| d.total_elements())).collect::<Result<Vec<_>>>()?;
    if budgets.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Config(format!("schemes {schemes:?} have unequal element budgets {budgets:?}")));
    }
    Ok(())
}

/// Tile centers in the anchor's local frame, spaced by at least `d_min`.
fn tile_offsets(params: &ScenarioParams, tiles: (usize, usize)) -> Vec<Vector3<f64>> {
    let (cols, rows) = tiles;
    let pitch = 0.5 * params.wavelength_m;
    // a hair above d_min so the check never fails on rounding
    let floor = params.d_min() * (1.0 + 1e-9);
    let sy = (params.elements_x as f64 * pitch).max(floor);
    let sz = (params.elements_y as f64 * pitch).max(floor);
    let cy = 0.5 * (cols as f64 - 1.0);
    let cz = 0.5 * (rows as f64 - 1.0);
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| Vector3::new(0.0, (c as f64 - cy) * sy, (r as f64 - cz) * sz)))
        .collect()
}

/// Initial poses for `deployment`, anchored at `anchor`.
///
/// Single-surface deployments start at `anchor`. Multi-surface deployments
/// follow [`ScenarioParams::init`].
pub fn init_poses(
    params: &ScenarioParams,
    seed: u64,
    deployment: &Deployment,
    anchor: &SurfacePose,
) -> Result<Vec<SurfacePose>> {
    let region = params.region()?;
    let d_min = params.d_min();
    let feasible = |poses: &[SurfacePose]| -> Result<bool> {
        Ok(feasibility_check(poses, &region, d_min)?.is_feasible())
    };
    if deployment.surfaces == 1 {
        let poses = vec![*anchor];
        if !feasible(&poses)? {
            return Err(Error::Config("anchor pose violates the placement constraints".into()));
        }
        return Ok(poses);
    }

    let r = anchor.rotation_matrix()?;
    match params.init {
        InitMode::Tiled => {
            let poses: Vec<_> = tile_offsets(params, deployment.tiles)
                .iter()
                .map(|o| SurfacePose { position: anchor.position + r * o, rotation: anchor.rotation })
                .collect();
            if !feasible(&poses)? {
                return Err(Error::Config(
                    "tiled initial surfaces do not fit the site region; enlarge region_side_m".into(),
                ));
            }
            Ok(poses)
        }
        InitMode::Random => random_poses(params, seed, deployment.surfaces, anchor, &region, d_min),
    }
}

fn random_poses(
    params: &ScenarioParams,
    seed: u64,
    surfaces: usize,
    anchor: &SurfacePose,
    region: &SiteRegion,
    d_min: f64,
) -> Result<Vec<SurfacePose>> {
    let mut rng = substream(seed, POSE_STREAM);
    let r = anchor.rotation_matrix()?;
    let half = 0.5 * region.side * 3f64.sqrt();
    let mut poses: Vec<SurfacePose> = Vec::with_capacity(surfaces);
    let mut attempts = 0;
    while poses.len() < surfaces {
        attempts += 1;
        if attempts > MAX_INIT_ATTEMPTS {
            return Err(Error::Config(format!(
                "could not place {surfaces} surfaces {d_min} m apart after {MAX_INIT_ATTEMPTS} attempts"
            )));
        }
        // in-plane offset, so all normals stay parallel and no surface sees another
        let local = Vector3::new(0.0, rng.random_range(-half..half), rng.random_range(-half..half));
        let q = anchor.position + r * local;
        if !region.contains(&q) || poses.iter().any(|p| (p.position - q).norm() < d_min) {
            continue;
        }
        poses.push(SurfacePose { position: q, rotation: anchor.rotation });
    }
    if !feasibility_check(&poses, region, d_min)?.is_feasible() {
        return Err(Error::Config("anchor plane does not admit a feasible placement".into()));
    }
    for b in 0..surfaces {
        for _ in 0..100 {
            let tilt = Vector3::from_fn(|_, _| rng.random_range(-params.init_tilt_rad..=params.init_tilt_rad));
            let mut trial = poses.clone();
            trial[b] = SurfacePose::new(poses[b].position, poses[b].rotation + tilt);
            if feasibility_check(&trial, region, d_min)?.is_feasible() {
                poses = trial;
                break;
            }
        }
    }
    Ok(poses)
}

/// Uniform random phases for the single-surface array, reordered to the
/// element order of `deployment` so tiled surfaces start with the same
/// coefficients element by element.
pub fn init_theta(params: &ScenarioParams, seed: u64, deployment: &Deployment) -> Vec<C64> {
    let mut rng = substream(seed, PHASE_STREAM);
    let (cols, rows) = deployment.tiles;
    let (nx, ny) = (params.elements_x, params.elements_y);
    let width = nx * cols;
    let global: Vec<C64> =
        (0..params.element_budget()).map(|_| C64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))).collect();
    if deployment.surfaces == 1 {
        return global;
    }
    let mut out = Vec::with_capacity(global.len());
    for tr in 0..rows {
        for tc in 0..cols {
            for row in 0..ny {
                for col in 0..nx {
                    out.push(global[(tr * ny + row) * width + tc * nx + col]);
                }
            }
        }
    }
    out
}

/// Everything needed to start one optimization run.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub system: System,
    pub poses: Vec<SurfacePose>,
    pub theta: Vec<C64>,
}

/// Builds the system, initial poses and initial phases of one run.
pub fn setup_run(
    params: &ScenarioParams,
    scheme: Scheme,
    pattern: PatternKind,
    power_dbm: f64,
    seed: u64,
) -> Result<RunSetup> {
    let scenario = generate_scenario(params, seed)?.with_power(dbm_to_watts(power_dbm));
    let deployment = deployment(params, scheme)?;
    let anchor = fixed_irs_pose(params, &scenario)?;
    let poses = init_poses(params, seed, &deployment, &anchor)?;
    let theta = init_theta(params, seed, &deployment);
    let system = System::new(scenario, deployment.layout, params.pattern(pattern)?, params.region()?, params.d_min())?;
    Ok(RunSetup { system, poses, theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::geometry::element_positions;

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_watts(0.0), 1e-3);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-24);
        assert!((dbm_to_watts(10.0) - 1e-2).abs() < 1e-16);
        assert!((watts_to_dbm(dbm_to_watts(13.7)) - 13.7).abs() < 1e-12);
    }

    #[test]
    fn scenario_is_deterministic() {
        let p = ScenarioParams::default();
        assert_eq!(generate_scenario(&p, 11).unwrap(), generate_scenario(&p, 11).unwrap());
        assert_ne!(generate_scenario(&p, 11).unwrap(), generate_scenario(&p, 12).unwrap());
    }

    #[test]
    fn user_draws_do_not_depend_on_bs_paths() {
        let p = ScenarioParams::default();
        let q = ScenarioParams { bs_paths: 3, surfaces: 2, ..p.clone() };
        assert_eq!(generate_scenario(&p, 5).unwrap().users, generate_scenario(&q, 5).unwrap().users);
    }

    #[test]
    fn angles_stay_in_range() {
        let p = ScenarioParams::default();
        for seed in 0..200 {
            let s = generate_scenario(&p, seed).unwrap();
            for path in s.users.iter().flatten() {
                assert!((0.0..=FRAC_PI_2).contains(&path.elevation));
                assert!((PI..=1.5 * PI).contains(&path.azimuth));
            }
            for path in &s.bs_paths {
                assert!((FRAC_PI_2..=PI).contains(&path.elevation));
                assert!((-FRAC_PI_2..=0.0).contains(&path.azimuth));
                assert!((0.0..=FRAC_PI_2).contains(&path.aoa));
            }
        }
    }

    #[test]
    fn los_gain_variance() {
        let mut sum = 0.0;
        let draws = 100_000;
        for i in 0..draws {
            let mut rng = substream(9, USER_STREAM | i);
            sum += complex_gaussian(&mut rng, 4e-6).norm_sqr();
        }
        let var = sum / draws as f64;
        assert!((var - 4e-6).abs() < 0.05 * 4e-6, "{var}");
    }

    #[test]
    fn default_budgets_match() {
        let p = ScenarioParams::default();
        check_equal_budgets(&p, &[Scheme::Distributed6dma, Scheme::Centralized6dma, Scheme::FixedIrs]).unwrap();
        let c = deployment(&p, Scheme::Centralized6dma).unwrap();
        assert_eq!((c.surfaces, c.layout.nx(), c.layout.ny()), (1, 4, 4));
        let d = deployment(&p, Scheme::Distributed6dma).unwrap();
        assert_eq!((d.surfaces, d.layout.len()), (4, 4));
        assert_eq!(tile_grid(6), (3, 2));
        assert_eq!(tile_grid(7), (7, 1));
    }

    #[test]
    fn init_poses_are_feasible_and_deterministic() {
        for init in [InitMode::Tiled, InitMode::Random] {
            let p = ScenarioParams { init, ..Default::default() };
            for seed in 0..20 {
                let a = setup_run(&p, Scheme::Distributed6dma, PatternKind::Directive, 10.0, seed).unwrap();
                let b = setup_run(&p, Scheme::Distributed6dma, PatternKind::Directive, 10.0, seed).unwrap();
                assert_eq!(a.poses, b.poses);
                assert_eq!(a.theta, b.theta);
                let rep = feasibility_check(&a.poses, &p.region().unwrap(), p.d_min()).unwrap();
                assert!(rep.is_feasible(), "{init:?} seed {seed}: {rep:?}");
                for i in 0..4 {
                    for j in 0..i {
                        assert!((a.poses[i].position - a.poses[j].position).norm() >= p.d_min());
                    }
                }
            }
        }
    }

    #[test]
    fn tiled_start_reproduces_the_single_array() {
        let p = ScenarioParams::default();
        let d = setup_run(&p, Scheme::Distributed6dma, PatternKind::Directive, 10.0, 3).unwrap();
        let c = setup_run(&p, Scheme::Centralized6dma, PatternKind::Directive, 10.0, 3).unwrap();
        // same element positions, possibly in another order
        let dp: Vec<_> = d.poses.iter().flat_map(|pose| element_positions(pose, &d.system.layout).unwrap()).collect();
        let cp = element_positions(&c.poses[0], &c.system.layout).unwrap();
        for (x, t) in cp.iter().zip(&c.theta) {
            let i = dp.iter().position(|y| (x - y).norm() < 1e-12).expect("element missing");
            assert_eq!(d.theta[i], *t);
        }
        let hd = ChannelRealization::synthesize(&d.system.scenario, &d.poses, &d.system.layout, &d.system.pattern)
            .unwrap()
            .effective_channel(&d.theta)
            .unwrap();
        let hc = ChannelRealization::synthesize(&c.system.scenario, &c.poses, &c.system.layout, &c.system.pattern)
            .unwrap()
            .effective_channel(&c.theta)
            .unwrap();
        assert!((hd - &hc).norm() <= 1e-12 * hc.norm());
    }

    #[test]
    fn fixed_pose_sees_both_sides() {
        let p = ScenarioParams::default();
        for seed in 0..50 {
            let s = generate_scenario(&p, seed).unwrap();
            let pose = fixed_irs_pose(&p, &s).unwrap();
            let rep = feasibility_check(&[pose], &p.region().unwrap(), p.d_min()).unwrap();
            assert!(rep.is_feasible());
            let n = pose.normal().unwrap();
            assert!(n.dot(&pose.position) >= 0.0);
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ScenarioParams { users: 0, ..Default::default() }.validate().is_err());
        assert!(ScenarioParams { bs_los_variance: 0.0, ..Default::default() }.validate().is_err());
        let bad = AngleRange::new(1.0, 0.0);
        assert!(ScenarioParams { bs_aoa_rad: bad, ..Default::default() }.validate().is_err());
    }
}
