//! Far-field geometric multipath channel through the reflecting surfaces.
//!
//! Path angles are defined with respect to the reference origin and shared by
//! all surfaces. A surface's pose enters only through the element phases and
//! the radiation-pattern gains.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{direction_vector, element_positions, LocalLayout, SurfacePose};
use crate::radiation::RadiationPattern;
use crate::{Error, Result, C64};

/// One propagation path between a user and the surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPath {
    pub gain: C64,
    pub elevation: f64,
    pub azimuth: f64,
}

impl UserPath {
    /// Unit direction-of-arrival vector.
    pub fn doa(&self) -> Vector3<f64> {
        direction_vector(self.elevation, self.azimuth)
    }
}

/// One propagation path between the surfaces and the base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsPath {
    pub gain: C64,
    pub elevation: f64,
    pub azimuth: f64,
    /// Angle of arrival at the base-station array.
    pub aoa: f64,
}

impl BsPath {
    /// Unit direction-of-departure vector.
    pub fn dod(&self) -> Vector3<f64> {
        direction_vector(self.elevation, self.azimuth)
    }
}

/// Every random channel parameter of one drop, plus powers and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub wavelength: f64,
    pub bs_antennas: usize,
    /// `users[k]` lists the paths of user `k`, line-of-sight first.
    pub users: Vec<Vec<UserPath>>,
    /// Surface-to-BS paths, line-of-sight first.
    pub bs_paths: Vec<BsPath>,
    /// Per-user transmit power in watts.
    pub powers: Vec<f64>,
    /// Noise power in watts.
    pub noise_power: f64,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        if self.bs_antennas == 0 {
            return Err(Error::invalid("need at least one BS antenna"));
        }
        if self.users.is_empty() || self.users.iter().any(|u| u.is_empty()) {
            return Err(Error::invalid("every user needs at least one path"));
        }
        if self.bs_paths.is_empty() {
            return Err(Error::invalid("need at least one surface-to-BS path"));
        }
        if self.powers.len() != self.users.len() {
            return Err(Error::invalid("one transmit power per user is required"));
        }
        if self.powers.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::invalid("transmit powers must be positive"));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::invalid("noise power must be positive"));
        }
        let finite_user = self.users.iter().flatten().all(|p| {
            p.elevation.is_finite() && p.azimuth.is_finite() && p.gain.re.is_finite() && p.gain.im.is_finite()
        });
        let finite_bs = self.bs_paths.iter().all(|p| {
            p.elevation.is_finite()
                && p.azimuth.is_finite()
                && p.aoa.is_finite()
                && p.gain.re.is_finite()
                && p.gain.im.is_finite()
        });
        if !(finite_user && finite_bs) {
            return Err(Error::invalid("path parameters must be finite"));
        }
        Ok(())
    }

    /// Copy with every user transmitting at `power` watts.
    pub fn with_power(&self, power: f64) -> Self {
        Self { powers: vec![power; self.users.len()], ..self.clone() }
    }
}

fn check_unit(v: &Vector3<f64>) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-9 {
        Err(Error::invalid(format!("direction must be unit norm, got {}", v.norm())))
    } else {
        Ok(())
    }
}

fn response_at(positions: &[Vector3<f64>], dir: &Vector3<f64>, wavelength: f64) -> DVector<C64> {
    let k = 2.0 * PI / wavelength;
    DVector::from_iterator(
        positions.len(),
        positions.iter().map(|r| C64::from_polar(1.0, k * dir.dot(r))),
    )
}

/// Incident array response: entry `n` is `exp(j 2π/λ fᵀ r_n)`.
pub fn array_response_incident(
    pose: &SurfacePose,
    layout: &LocalLayout,
    doa: &Vector3<f64>,
    wavelength: f64,
) -> Result<DVector<C64>> {
    check_unit(doa)?;
    Ok(response_at(&element_positions(pose, layout)?, doa, wavelength))
}

/// Departure array response towards the base station (same form as the incident one).
pub fn array_response_departure(
    pose: &SurfacePose,
    layout: &LocalLayout,
    dod: &Vector3<f64>,
    wavelength: f64,
) -> Result<DVector<C64>> {
    array_response_incident(pose, layout, dod, wavelength)
}

/// Half-wavelength ULA response: entry `m` is `exp(jπ m cos ψ)`.
pub fn bs_steering(aoa: f64, antennas: usize) -> DVector<C64> {
    let c = aoa.cos();
    DVector::from_iterator(antennas, (0..antennas).map(|m| C64::from_polar(1.0, PI * m as f64 * c)))
}

/// Channels seen by one surface: `g_k` for every user and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceChannel {
    /// `user_to_surface[k]` is `g_k(q_b, u_b)`, length `N`.
    pub user_to_surface: Vec<DVector<C64>>,
    /// `V(q_b, u_b)`, `M × N`.
    pub surface_to_bs: DMatrix<C64>,
}

impl SurfaceChannel {
    pub fn num_elements(&self) -> usize {
        self.surface_to_bs.ncols()
    }

    /// Synthesizes every channel of one surface, sharing the element positions.
    pub fn synthesize(
        scenario: &Scenario,
        pose: &SurfacePose,
        layout: &LocalLayout,
        pattern: &RadiationPattern,
    ) -> Result<Self> {
        let positions = element_positions(pose, layout)?;
        let normal = pose.normal()?;
        let lambda = scenario.wavelength;
        let n = positions.len();

        let mut user_to_surface = Vec::with_capacity(scenario.num_users());
        for paths in &scenario.users {
            let mut g = DVector::<C64>::zeros(n);
            for path in paths {
                let f = path.doa();
                let gain = pattern.gain_for_normal(&normal, &f)?;
                if gain > 0.0 {
                    g.axpy(path.gain * gain.sqrt(), &response_at(&positions, &f, lambda), C64::new(1.0, 0.0));
                }
            }
            user_to_surface.push(g);
        }

        let mut v = DMatrix::<C64>::zeros(scenario.bs_antennas, n);
        for path in &scenario.bs_paths {
            let s = path.dod();
            let gain = pattern.gain_for_normal(&normal, &s)?;
            if gain > 0.0 {
                let z = bs_steering(path.aoa, scenario.bs_antennas) * (path.gain * gain.sqrt());
                let e = response_at(&positions, &s, lambda);
                v.ger(C64::new(1.0, 0.0), &z, &e.map(|x| x.conj()), C64::new(1.0, 0.0));
            }
        }
        Ok(Self { user_to_surface, surface_to_bs: v })
    }

    /// Cascaded contribution `V diag(θ_b) g_k` of this surface for every user, as `M × K`.
    pub fn contribution(&self, theta: &[C64]) -> Result<DMatrix<C64>> {
        let m = self.surface_to_bs.nrows();
        let k = self.user_to_surface.len();
        let mut out = DMatrix::<C64>::zeros(m, k);
        for (col, g) in self.user_to_surface.iter().enumerate() {
            out.set_column(col, &cascaded_channel(&self.surface_to_bs, theta, g)?);
        }
        Ok(out)
    }
}

/// `g_k(q_b, u_b) = Σ_l a_{k,l} √G^I_{k,l} t_{k,l}`.
pub fn user_to_surface_channel(
    scenario: &Scenario,
    k: usize,
    pose: &SurfacePose,
    layout: &LocalLayout,
    pattern: &RadiationPattern,
) -> Result<DVector<C64>> {
    let paths = scenario
        .users
        .get(k)
        .ok_or_else(|| Error::invalid(format!("user {k} out of range")))?;
    let normal = pose.normal()?;
    let mut g = DVector::<C64>::zeros(layout.len());
    for path in paths {
        let f = path.doa();
        let gain = pattern.gain_for_normal(&normal, &f)?;
        let t = array_response_incident(pose, layout, &f, scenario.wavelength)?;
        g += t * (path.gain * gain.sqrt());
    }
    Ok(g)
}

/// `V(q_b, u_b) = Σ_p v_p √G^R_p z_p e_pᴴ`.
pub fn surface_to_bs_channel(
    scenario: &Scenario,
    pose: &SurfacePose,
    layout: &LocalLayout,
    pattern: &RadiationPattern,
) -> Result<DMatrix<C64>> {
    let normal = pose.normal()?;
    let mut v = DMatrix::<C64>::zeros(scenario.bs_antennas, layout.len());
    for path in &scenario.bs_paths {
        let s = path.dod();
        let gain = pattern.gain_for_normal(&normal, &s)?;
        let z = bs_steering(path.aoa, scenario.bs_antennas);
        let e = array_response_departure(pose, layout, &s, scenario.wavelength)?;
        v += (z * e.adjoint()) * (path.gain * gain.sqrt());
    }
    Ok(v)
}

/// `V diag(θ) g`.
pub fn cascaded_channel(v: &DMatrix<C64>, theta: &[C64], g: &DVector<C64>) -> Result<DVector<C64>> {
    if v.ncols() != theta.len() || g.len() != theta.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: V has {} columns, θ has {}, g has {}",
            v.ncols(),
            theta.len(),
            g.len()
        )));
    }
    let weighted = DVector::from_iterator(g.len(), g.iter().zip(theta).map(|(gi, ti)| gi * ti));
    Ok(v * weighted)
}

/// Per-surface channels for all surfaces, in surface order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub surfaces: Vec<SurfaceChannel>,
}

impl ChannelRealization {
    pub fn synthesize(
        scenario: &Scenario,
        poses: &[SurfacePose],
        layout: &LocalLayout,
        pattern: &RadiationPattern,
    ) -> Result<Self> {
        let surfaces = poses
            .iter()
            .map(|p| SurfaceChannel::synthesize(scenario, p, layout, pattern))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { surfaces })
    }

    pub fn total_elements(&self) -> usize {
        self.surfaces.iter().map(SurfaceChannel::num_elements).sum()
    }

    fn check(&self) -> Result<(usize, usize)> {
        let first = self.surfaces.first().ok_or_else(|| Error::invalid("no surfaces"))?;
        let m = first.surface_to_bs.nrows();
        let k = first.user_to_surface.len();
        for s in &self.surfaces {
            if s.surface_to_bs.nrows() != m || s.user_to_surface.len() != k {
                return Err(Error::invalid("surfaces disagree on BS antennas or users"));
            }
            if s.user_to_surface.iter().any(|g| g.len() != s.num_elements()) {
                return Err(Error::invalid("user channel length differs from element count"));
            }
        }
        Ok((m, k))
    }

    /// Stacked `V(q, u) = [V_1, …, V_B]`.
    pub fn stacked_v(&self) -> Result<DMatrix<C64>> {
        let (m, _) = self.check()?;
        let mut out = DMatrix::<C64>::zeros(m, self.total_elements());
        let mut col = 0;
        for s in &self.surfaces {
            let n = s.num_elements();
            out.columns_mut(col, n).copy_from(&s.surface_to_bs);
            col += n;
        }
        Ok(out)
    }

    /// Stacked `g_k(q, u) = [g_k1; …; g_kB]`.
    pub fn stacked_g(&self, k: usize) -> Result<DVector<C64>> {
        let (_, users) = self.check()?;
        if k >= users {
            return Err(Error::invalid(format!("user {k} out of range")));
        }
        let mut out = DVector::<C64>::zeros(self.total_elements());
        let mut row = 0;
        for s in &self.surfaces {
            let n = s.num_elements();
            out.rows_mut(row, n).copy_from(&s.user_to_surface[k]);
            row += n;
        }
        Ok(out)
    }

    /// `A_k = V(q, u) diag(g_k(q, u))`, `M × NB`.
    pub fn a_matrix(&self, k: usize) -> Result<DMatrix<C64>> {
        let mut a = self.stacked_v()?;
        let g = self.stacked_g(k)?;
        for (mut col, gi) in a.column_iter_mut().zip(g.iter()) {
            col *= *gi;
        }
        Ok(a)
    }

    /// Effective channel matrix `H = [h_1, …, h_K]` with `h_k = V diag(θ) g_k`.
    pub fn effective_channel(&self, theta: &[C64]) -> Result<DMatrix<C64>> {
        let (m, k) = self.check()?;
        if theta.len() != self.total_elements() {
            return Err(Error::invalid(format!(
                "θ has {} entries, surfaces have {} elements",
                theta.len(),
                self.total_elements()
            )));
        }
        let v = self.stacked_v()?;
        let mut h = DMatrix::<C64>::zeros(m, k);
        for user in 0..k {
            h.set_column(user, &cascaded_channel(&v, theta, &self.stacked_g(user)?)?);
        }
        Ok(h)
    }
}

/// Per-user SINR for receive vectors `W` (columns `w_k`) and channels `H`.
///
/// The noise term uses the squared norm `σ²‖w_k‖²`.
pub fn sinr(w: &DMatrix<C64>, h: &DMatrix<C64>, powers: &[f64], noise_power: f64) -> Result<Vec<f64>> {
    sinr_impl(w, h, powers, noise_power, true)
}

/// Like [`sinr`], but a zero receive vector yields `γ_k = 0` instead of an error.
pub fn sinr_or_zero(w: &DMatrix<C64>, h: &DMatrix<C64>, powers: &[f64], noise_power: f64) -> Result<Vec<f64>> {
    sinr_impl(w, h, powers, noise_power, false)
}

fn sinr_impl(
    w: &DMatrix<C64>,
    h: &DMatrix<C64>,
    powers: &[f64],
    noise_power: f64,
    strict: bool,
) -> Result<Vec<f64>> {
    let k = h.ncols();
    if w.shape() != h.shape() || powers.len() != k {
        return Err(Error::invalid(format!(
            "dimension mismatch: W {:?}, H {:?}, {} powers",
            w.shape(),
            h.shape(),
            powers.len()
        )));
    }
    if !(noise_power > 0.0) || powers.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::invalid("powers and noise must be positive"));
    }
    // gram[(k, j)] = w_kᴴ h_j
    let gram = w.adjoint() * h;
    (0..k)
        .map(|user| {
            let wn = w.column(user).norm_squared();
            if wn == 0.0 {
                return if strict {
                    Err(Error::invalid(format!("receive vector of user {user} is zero")))
                } else {
                    Ok(0.0)
                };
            }
            let signal = powers[user] * gram[(user, user)].norm_sqr();
            let interference: f64 = (0..k)
                .filter(|&j| j != user)
                .map(|j| powers[j] * gram[(user, j)].norm_sqr())
                .sum();
            Ok(signal / (interference + noise_power * wn))
        })
        .collect()
}

/// `Σ_k log2(1 + γ_k)` in bps/Hz.
pub fn sum_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|g| (1.0 + g).log2()).sum()
}
