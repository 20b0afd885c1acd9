//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and asserts it.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sixdma::channel::{bs_steering, sinr, ChannelRealization};
use sixdma::experiment::{run_experiment, write_csv, ExperimentConfig, ExperimentResults, SeedList};
use sixdma::geometry::{element_positions, rotation_for_normal, SurfacePose, FEASIBILITY_TOL};
use sixdma::numerics::{lp_solve, LinearProgram, LpOutcome};
use sixdma::optimizer::*;
use sixdma::radiation::{PatternKind, RadiationPattern};
use sixdma::scenario::{mean_bisector, setup_run, ScenarioParams};
use sixdma::C64;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn default_config() -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    ExperimentConfig::load(&path).unwrap()
}

fn small_params() -> ScenarioParams {
    ScenarioParams { bs_antennas: 4, users: 2, surfaces: 2, elements_x: 2, elements_y: 2, ..Default::default() }
}

fn cn(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[test]
fn c1_monotone_traces() {
    let started = Instant::now();
    let params = small_params();
    let config = OptimizerConfig::default();
    let mut worst_drop = 0.0_f64;
    for seed in 0..20 {
        let setup = setup_run(&params, Scheme::Distributed6dma, PatternKind::Directive, 10.0, seed).unwrap();
        let r = ao_optimize(&setup.system, setup.poses, setup.theta, &config, &mut NoObserver).unwrap();
        for pair in r.trace.windows(2) {
            worst_drop = worst_drop.max(pair[0] - pair[1]);
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = worst_drop <= 1e-6 && elapsed < 60.0;
    report(1, "monotone outer traces", pass, format!("largest drop {worst_drop:.2e}, {elapsed:.1}s"));
    assert!(pass);
}

#[test]
fn c2_block_optimality() {
    // (a) coordinate phase updates against a phase grid
    let mut worst_gap = f64::NEG_INFINITY;
    for seed in 0..5 {
        let setup = setup_run(&small_params(), Scheme::Distributed6dma, PatternKind::Directive, 10.0, seed).unwrap();
        let system = &setup.system;
        let mut state = AoState::new(system, setup.poses, setup.theta).unwrap();
        state.update_beamformer(system).unwrap();
        let channels = state.realization();
        let s = &system.scenario;
        let (alpha, eps) = fp_auxiliaries(&channels, &state.theta, &state.w, &s.powers, s.noise_power).unwrap();
        let quad = fp_quadratic(&channels, &state.w, &s.powers, &alpha, &eps).unwrap();
        let mut theta = state.theta.clone();
        for j in 0..theta.len() {
            let mut trial = theta.clone();
            let grid_min = (0..4096)
                .map(|i| {
                    trial[j] = C64::from_polar(1.0, 2.0 * PI * i as f64 / 4096.0);
                    quad.value(&trial)
                })
                .fold(f64::INFINITY, f64::min);
            theta[j] = phase_coordinate_update(j, &quad, &theta);
            worst_gap = worst_gap.max(quad.value(&theta) - grid_min);
        }
    }
    let a = worst_gap <= 1e-6;

    // (b) MMSE against MRC
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut b = true;
    for _ in 0..100 {
        let (m, k) = (rng.random_range(2..7), rng.random_range(1..5));
        let h = DMatrix::from_fn(m, k, |_, _| cn(&mut rng));
        let powers: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        let noise = rng.random_range(0.01..1.0);
        let mmse = sinr(&mmse_beamformer(&h, &powers, noise).unwrap(), &h, &powers, noise).unwrap();
        let mrc = sinr(&h, &h, &powers, noise).unwrap();
        b &= mmse.iter().zip(&mrc).all(|(x, y)| *x >= y * (1.0 - 1e-12));
    }

    // (c) auxiliaries reproduce the SINR
    let mut c = true;
    for _ in 0..100 {
        let h = DMatrix::from_fn(4, 3, |_, _| cn(&mut rng));
        let w = DMatrix::from_fn(4, 3, |_, _| cn(&mut rng));
        let powers = [0.5, 1.0, 2.0];
        let (alpha, _) = fp_auxiliaries_from_channels(&h, &w, &powers, 0.1).unwrap();
        c &= alpha == sinr(&w, &h, &powers, 0.1).unwrap();
    }

    let pass = a && b && c;
    report(
        2,
        "block optimality",
        pass,
        format!("grid gap {worst_gap:.2e}, mmse>=mrc {b}, alpha==sinr {c}"),
    );
    assert!(pass);
}

/// Random single-surface pose that sees every user path and BS path from the front.
fn front_side_pose(rng: &mut ChaCha8Rng, system: &System) -> Option<SurfacePose> {
    let s = &system.scenario;
    let bisector = mean_bisector(s).unwrap();
    let tilt = Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let normal = (bisector + tilt).normalize();
    let lo = system.region.lower();
    let hi = system.region.upper();
    let q = Vector3::from_fn(|i, _| rng.random_range(lo[i]..hi[i]));
    let rotation = rotation_for_normal(&normal, rng.random_range(-PI..PI)).unwrap();
    let pose = SurfacePose::new(q, rotation);
    let n = pose.normal().unwrap();
    let dirs = s.users.iter().flatten().map(|p| p.doa()).chain(s.bs_paths.iter().map(|p| p.dod()));
    let front = dirs.into_iter().all(|d| -n.dot(&d) > 1e-3);
    (front && system.feasibility(std::slice::from_ref(&pose)).unwrap().is_feasible()).then_some(pose)
}

fn relative_error(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn c3_gradient_check() {
    let params = ScenarioParams::default();
    let config = OptimizerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    let mut checked = 0;
    let mut seed = 0;
    while checked < 50 {
        let setup = setup_run(&params, Scheme::Centralized6dma, PatternKind::Directive, 10.0, seed).unwrap();
        seed += 1;
        let system = &setup.system;
        let Some(pose) = (0..200).find_map(|_| front_side_pose(&mut rng, system)) else {
            continue;
        };
        let mut state = AoState::new(system, vec![pose], setup.theta).unwrap();
        state.update_beamformer(system).unwrap();
        let xq = config.position_xi(system.scenario.wavelength);
        let xu = config.rotation_xi_rad;
        let gq = position_gradient(system, &state, 0, xq).unwrap();
        let gq10 = position_gradient(system, &state, 0, xq / 10.0).unwrap();
        let gu = rotation_gradient(system, &state, 0, xu).unwrap();
        let gu10 = rotation_gradient(system, &state, 0, xu / 10.0).unwrap();
        worst = worst.max(relative_error(&gq, &gq10)).max(relative_error(&gu, &gu10));
        checked += 1;
    }
    let pass = worst <= 1e-3;
    report(3, "finite-difference gradients", pass, format!("worst relative error {worst:.2e} over {checked} poses"));
    assert!(pass);
}

#[derive(Default)]
struct Extremes {
    worst_margin: f64,
    worst_modulus: f64,
    events: usize,
}

struct FeasibilityWatch<'a> {
    system: &'a System,
    seen: &'a mut Extremes,
}

impl AoObserver for FeasibilityWatch<'_> {
    fn on_block(&mut self, _event: &BlockEvent, state: &AoState) {
        let margin = self.system.feasibility(&state.poses).unwrap().worst_margin();
        self.seen.events += 1;
        self.seen.worst_margin = self.seen.worst_margin.min(margin);
        for t in &state.theta {
            self.seen.worst_modulus = self.seen.worst_modulus.max((t.norm() - 1.0).abs());
        }
    }
}

#[test]
fn c4_feasibility_throughout() {
    let defaults = default_config();
    let mut seen = Extremes { worst_margin: f64::INFINITY, ..Default::default() };
    for scheme in [Scheme::Distributed6dma, Scheme::Centralized6dma, Scheme::FixedIrs] {
        for pattern in [PatternKind::Directive, PatternKind::Isotropic] {
            for seed in 0..2 {
                let setup = setup_run(&defaults.scenario, scheme, pattern, 15.0, seed).unwrap();
                let config = OptimizerConfig { scheme, outer_iterations: 60, ..defaults.optimizer.clone() };
                let mut watch = FeasibilityWatch { system: &setup.system, seen: &mut seen };
                ao_optimize(&setup.system, setup.poses, setup.theta, &config, &mut watch).unwrap();
            }
        }
    }
    let pass = seen.worst_margin >= -FEASIBILITY_TOL && seen.worst_modulus <= 1e-12;
    report(
        4,
        "feasibility and unit modulus",
        pass,
        format!(
            "worst margin {:.2e}, worst |θ|-1 {:.2e}, {} block updates",
            seen.worst_margin, seen.worst_modulus, seen.events
        ),
    );
    assert!(pass);
}

#[test]
fn c5_channel_oracles() {
    let params = ScenarioParams::default();
    let mut worst = 0.0_f64;
    let mut modulus = 0.0_f64;
    for seed in 0..5 {
        let setup = setup_run(&params, Scheme::Distributed6dma, PatternKind::Directive, 10.0, seed).unwrap();
        let sys = &setup.system;
        let s = &sys.scenario;
        let channels = ChannelRealization::synthesize(s, &setup.poses, &sys.layout, &sys.pattern).unwrap();
        let h = channels.effective_channel(&setup.theta).unwrap();
        let k0 = 2.0 * PI / s.wavelength;
        let mut brute = DMatrix::<C64>::zeros(s.bs_antennas, s.num_users());
        for (b, pose) in setup.poses.iter().enumerate() {
            let normal = pose.normal().unwrap();
            let positions = element_positions(pose, &sys.layout).unwrap();
            for (n, r) in positions.iter().enumerate() {
                let theta = setup.theta[b * positions.len() + n];
                for (k, paths) in s.users.iter().enumerate() {
                    for up in paths {
                        let f = up.doa();
                        let gi = sys.pattern.gain_for_normal(&normal, &f).unwrap();
                        let t = C64::from_polar(1.0, k0 * f.dot(r));
                        modulus = modulus.max((t.norm() - 1.0).abs());
                        for bp in &s.bs_paths {
                            let sd = bp.dod();
                            let gr = sys.pattern.gain_for_normal(&normal, &sd).unwrap();
                            let e = C64::from_polar(1.0, k0 * sd.dot(r));
                            let z = bs_steering(bp.aoa, s.bs_antennas);
                            for m in 0..s.bs_antennas {
                                modulus = modulus.max((z[m].norm() - 1.0).abs());
                                brute[(m, k)] +=
                                    z[m] * bp.gain * gr.sqrt() * e.conj() * theta * up.gain * gi.sqrt() * t;
                            }
                        }
                    }
                }
            }
        }
        let scale = brute.iter().map(|x| x.norm()).fold(0.0, f64::max);
        worst = worst.max((&h - &brute).iter().map(|x| x.norm()).fold(0.0, f64::max) / scale);
    }
    let lambda = params.wavelength_m;
    let n = Vector3::new(0.0, 1.0, 0.0);
    let directive = RadiationPattern::new(PatternKind::Directive, lambda).unwrap().gain_for_normal(&n, &-n).unwrap();
    let isotropic = RadiationPattern::new(PatternKind::Isotropic, lambda).unwrap().gain_for_normal(&n, &-n).unwrap();
    let gains = (directive - PI).abs() <= 1e-12 && (isotropic - 2.0 * PI).abs() <= 1e-12;
    let pass = worst <= 1e-12 && modulus <= 1e-12 && gains;
    report(
        5,
        "channel oracles",
        pass,
        format!("relative error {worst:.2e}, |a|-1 {modulus:.2e}, G_dir {directive}, G_iso {isotropic}"),
    );
    assert!(pass);
}

struct Table {
    results: ExperimentResults,
}

impl Table {
    fn rate(&self, scheme: Scheme, pattern: PatternKind, power: f64, seed: u64) -> f64 {
        self.results
            .runs
            .iter()
            .find(|r| {
                r.cell.scheme == scheme && r.cell.pattern == pattern && r.cell.power_dbm == power && r.cell.seed == seed
            })
            .map(|r| r.sum_rate)
            .unwrap()
    }

    fn mean(&self, scheme: Scheme, pattern: PatternKind, power: f64) -> f64 {
        self.results
            .aggregates
            .iter()
            .find(|a| a.scheme == scheme && a.pattern == pattern && a.power_dbm == power)
            .map(|a| a.mean)
            .unwrap()
    }
}

struct Sweeps {
    directive: Table,
    isotropic: Table,
    seeds: Vec<u64>,
    powers: Vec<f64>,
    elapsed_s: f64,
}

/// Directive sweep at every default power plus the isotropic cells at 15 dBm,
/// computed once and shared by the two figure criteria.
fn sweeps() -> &'static Sweeps {
    static SWEEPS: OnceLock<Sweeps> = OnceLock::new();
    SWEEPS.get_or_init(|| {
        let started = Instant::now();
        let base = default_config();
        let directive = ExperimentConfig { patterns: vec![PatternKind::Directive], ..base.clone() };
        let isotropic =
            ExperimentConfig { patterns: vec![PatternKind::Isotropic], powers_dbm: vec![15.0], ..base.clone() };
        Sweeps {
            directive: Table { results: run_experiment(&directive, None).unwrap() },
            isotropic: Table { results: run_experiment(&isotropic, None).unwrap() },
            seeds: base.seeds.seeds(),
            powers: base.powers_dbm,
            elapsed_s: started.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn c6_directive_ordering() {
    use PatternKind::Directive;
    use Scheme::{Centralized6dma as C, Distributed6dma as D, FixedIrs as F};

    let sw = sweeps();
    assert!(sw.seeds.len() >= 50);
    let t = &sw.directive;
    let mut mean_order = true;
    let (mut per_seed, mut draws) = (0, 0);
    let mut lines = Vec::new();
    for &p in &sw.powers {
        let (d, c, f) = (t.mean(D, Directive, p), t.mean(C, Directive, p), t.mean(F, Directive, p));
        mean_order &= d >= c && c >= f;
        let ok = sw
            .seeds
            .iter()
            .filter(|&&s| {
                let (d, c, f) = (t.rate(D, Directive, p, s), t.rate(C, Directive, p, s), t.rate(F, Directive, p, s));
                d >= c && c >= f
            })
            .count();
        per_seed += ok;
        draws += sw.seeds.len();
        lines.push(format!("{p} dBm: {d:.2}/{c:.2}/{f:.2}, {ok}/{}", sw.seeds.len()));
    }
    let fraction = per_seed as f64 / draws as f64;
    let pass = mean_order && fraction >= 0.8 && sw.elapsed_s <= 1800.0;
    report(
        6,
        "directive ordering distributed >= centralized >= fixed",
        pass,
        format!("{}; per-seed {:.1}%; sweeps took {:.0}s", lines.join("; "), 100.0 * fraction, sw.elapsed_s),
    );
    assert!(pass);
}

#[test]
fn c7_pattern_gap() {
    use PatternKind::{Directive, Isotropic};
    use Scheme::{Distributed6dma as D, FixedIrs as F};

    let sw = sweeps();
    let gap = |scheme, s: Option<u64>| match s {
        Some(s) => sw.isotropic.rate(scheme, Isotropic, 15.0, s) - sw.directive.rate(scheme, Directive, 15.0, s),
        None => sw.isotropic.mean(scheme, Isotropic, 15.0) - sw.directive.mean(scheme, Directive, 15.0),
    };
    let (gap_f, gap_d) = (gap(F, None), gap(D, None));
    let sign = sw.seeds.iter().filter(|&&s| gap(F, Some(s)) > gap(D, Some(s))).count();
    let fraction = sign as f64 / sw.seeds.len() as f64;
    let pass = gap_f > gap_d && fraction >= 0.7;
    report(
        7,
        "isotropic-minus-directive gap larger for fixed than distributed",
        pass,
        format!(
            "mean gap fixed {gap_f:.2}, distributed {gap_d:.2}; per-seed {sign}/{} ({:.1}%)",
            sw.seeds.len(),
            100.0 * fraction
        ),
    );
    assert!(pass);
}

/// Minimum over all feasible vertices of the box-bounded program.
fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.dim();
    assert_eq!(n, 3);
    let mut planes: Vec<(Vector3<f64>, f64)> =
        lp.rows.iter().map(|(a, b)| (Vector3::new(a[0], a[1], a[2]), *b)).collect();
    for i in 0..3 {
        let mut e = Vector3::zeros();
        e[i] = 1.0;
        planes.push((e, lp.upper[i]));
        planes.push((-e, -lp.lower[i]));
    }
    let mut best: Option<f64> = None;
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            for k in j + 1..planes.len() {
                let a = nalgebra::Matrix3::from_rows(&[
                    planes[i].0.transpose(),
                    planes[j].0.transpose(),
                    planes[k].0.transpose(),
                ]);
                let rhs = Vector3::new(planes[i].1, planes[j].1, planes[k].1);
                let Some(x) = a.lu().solve(&rhs) else { continue };
                if a.determinant().abs() < 1e-12 || lp.max_violation(x.as_slice()) > 1e-9 {
                    continue;
                }
                let value = lp.objective.iter().zip(x.iter()).map(|(c, x)| c * x).sum::<f64>();
                best = Some(best.map_or(value, |b: f64| b.min(value)));
            }
        }
    }
    best
}

#[test]
fn c8_lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut agree, mut infeasible) = (0, 0);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let objective: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut lp = LinearProgram::boxed(objective, -1.0, 1.0);
        let anchor: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..rng.random_range(0..7) {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let at: f64 = a.iter().zip(&anchor).map(|(x, y)| x * y).sum();
            lp.push_row(a, at + rng.random_range(-0.3..1.0));
        }
        let oracle = vertex_enumeration(&lp);
        match (lp_solve(&lp).unwrap(), oracle) {
            (LpOutcome::Optimal { point, objective }, Some(best)) => {
                let err = (objective - best).abs();
                worst = worst.max(err);
                if err <= 1e-9 && lp.max_violation(&point) <= 1e-9 {
                    agree += 1;
                }
            }
            (LpOutcome::Infeasible, None) => {
                agree += 1;
                infeasible += 1;
            }
            _ => {}
        }
    }
    let pass = agree == 1000;
    report(
        8,
        "simplex against vertex enumeration",
        pass,
        format!("{agree}/1000 agree ({infeasible} infeasible), worst objective error {worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn c9_deterministic_csv() {
    let config = ExperimentConfig { seeds: SeedList::Range { first: 0, count: 2 }, ..default_config() };
    let render = |jobs| {
        let results = run_experiment(&config, jobs).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &results, config.record_runtime).unwrap();
        buf
    };
    let first = render(None);
    let second = render(Some(1));
    let pass = first == second && !first.is_empty();
    report(9, "byte-identical CSV", pass, format!("{} bytes, {} cells", first.len(), config.cells().len()));
    assert!(pass);
}
