//! Reflection-phase block: quadratic-transform surrogate and exact
//! per-element phase updates.
//!
//! With auxiliaries `α_k = γ_k` and `ε_k` fixed at the current phases, the
//! sum rate is minorized by `−(θᴴUθ − 2 Re(vθ)) + const`, so any decrease of
//! the quadratic form increases the sum rate.

use nalgebra::{DMatrix, DVector};

use crate::channel::{sinr_or_zero, ChannelRealization};
use crate::{Error, Result, C64};

/// Unit-modulus reflection coefficients plus the surrogate auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionState {
    pub theta: Vec<C64>,
    pub alpha: Vec<f64>,
    pub epsilon: Vec<C64>,
}

impl ReflectionState {
    /// Coefficients `exp(jβ_n)` for the given phases, auxiliaries zeroed.
    pub fn from_phases(phases: &[f64], users: usize) -> Self {
        Self {
            theta: phases.iter().map(|b| C64::from_polar(1.0, *b)).collect(),
            alpha: vec![0.0; users],
            epsilon: vec![C64::new(0.0, 0.0); users],
        }
    }
}

/// The quadratic surrogate `θᴴUθ − 2 Re(vθ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpQuadratic {
    /// Hermitian positive semidefinite, `NB × NB`.
    pub u: DMatrix<C64>,
    /// Covector entries `v_j`, so that `vθ = Σ_j v_j θ_j`.
    pub v: DVector<C64>,
}

impl FpQuadratic {
    pub fn value(&self, theta: &[C64]) -> f64 {
        let t = DVector::from_column_slice(theta);
        let quad = t.dotc(&(&self.u * &t)).re;
        let lin: C64 = self.v.iter().zip(theta).map(|(a, b)| a * b).sum();
        quad - 2.0 * lin.re
    }
}

/// `α_k = γ_k` and the closed-form `ε_k` at effective channels `H`.
pub fn fp_auxiliaries_from_channels(
    h: &DMatrix<C64>,
    w: &DMatrix<C64>,
    powers: &[f64],
    noise_power: f64,
) -> Result<(Vec<f64>, Vec<C64>)> {
    let alpha = sinr_or_zero(w, h, powers, noise_power)?;
    // gram[(k, j)] = w_kᴴ A_j θ = w_kᴴ h_j
    let gram = w.adjoint() * h;
    let epsilon = (0..h.ncols())
        .map(|k| {
            let denom: f64 = (0..h.ncols()).map(|j| powers[j] * gram[(k, j)].norm_sqr()).sum::<f64>()
                + noise_power * w.column(k).norm_squared();
            if denom == 0.0 {
                return C64::new(0.0, 0.0);
            }
            gram[(k, k)] * (((1.0 + alpha[k]) * powers[k]).sqrt() / denom)
        })
        .collect();
    Ok((alpha, epsilon))
}

/// Optimal auxiliaries `(α, ε)` for phases `θ` and receive vectors `W`.
pub fn fp_auxiliaries(
    channels: &ChannelRealization,
    theta: &[C64],
    w: &DMatrix<C64>,
    powers: &[f64],
    noise_power: f64,
) -> Result<(Vec<f64>, Vec<C64>)> {
    let h = channels.effective_channel(theta)?;
    fp_auxiliaries_from_channels(&h, w, powers, noise_power)
}

/// Builds `U = Σ_k |ε_k|² Σ_j P_j A_jᴴ w_k w_kᴴ A_j` and
/// `v = Σ_k √((1+α_k)P_k) ε_k* w_kᴴ A_k`.
pub fn fp_quadratic(
    channels: &ChannelRealization,
    w: &DMatrix<C64>,
    powers: &[f64],
    alpha: &[f64],
    epsilon: &[C64],
) -> Result<FpQuadratic> {
    let k = w.ncols();
    if alpha.len() != k || epsilon.len() != k || powers.len() != k {
        return Err(Error::invalid("auxiliaries, powers and W disagree on the user count"));
    }
    let a: Vec<DMatrix<C64>> = (0..k).map(|j| channels.a_matrix(j)).collect::<Result<_>>()?;
    let nb = channels.total_elements();
    if a.first().is_some_and(|a0| a0.nrows() != w.nrows()) {
        return Err(Error::invalid("W and channels disagree on the BS antenna count"));
    }
    let mut u = DMatrix::<C64>::zeros(nb, nb);
    let mut v = DVector::<C64>::zeros(nb);
    for user in 0..k {
        let wk = w.column(user);
        let e2 = epsilon[user].norm_sqr();
        for (j, aj) in a.iter().enumerate() {
            // A_jᴴ w_k
            let b = aj.adjoint() * wk;
            if e2 > 0.0 {
                u.ger(C64::new(powers[j] * e2, 0.0), &b, &b.conjugate(), C64::new(1.0, 0.0));
            }
            if j == user {
                let coef = epsilon[user].conj() * ((1.0 + alpha[user]) * powers[user]).sqrt();
                // w_kᴴ A_k as a covector is the conjugate of A_kᴴ w_k
                v.axpy(coef, &b.conjugate(), C64::new(1.0, 0.0));
            }
        }
    }
    Ok(FpQuadratic { u, v })
}

/// `c_j = v_j − Σ_{i≠j} θ_i* u_{i,j}`, the linear coefficient of `θ_j` in the surrogate.
pub fn coupling_coefficient(j: usize, quad: &FpQuadratic, theta: &[C64]) -> C64 {
    let col = quad.u.column(j);
    let coupling: C64 = theta
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != j)
        .map(|(i, t)| t.conj() * col[i])
        .sum();
    quad.v[j] - coupling
}

/// Exact minimizer of `|θ_j|² u_jj − 2 Re(c_j θ_j)` over `|θ_j| = 1`: `θ_j = exp(j∠c_j*)`.
/// Returns the current `θ_j` when `c_j = 0`.
pub fn phase_coordinate_update(j: usize, quad: &FpQuadratic, theta: &[C64]) -> C64 {
    let c = coupling_coefficient(j, quad, theta);
    if c.norm() == 0.0 {
        return theta[j];
    }
    C64::from_polar(1.0, c.conj().arg())
}

/// One Gauss-Seidel sweep of coordinate updates over all elements.
pub fn phase_sweep(quad: &FpQuadratic, theta: &mut [C64]) {
    for j in 0..theta.len() {
        theta[j] = phase_coordinate_update(j, quad, theta);
    }
}
