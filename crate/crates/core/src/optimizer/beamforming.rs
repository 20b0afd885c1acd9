use nalgebra::DMatrix;

use crate::numerics::hermitian_solve;
use crate::{Error, Result, C64};

/// MMSE receive beamformer `W = (H P Hᴴ + σ² I)⁻¹ H`.
pub fn mmse_beamformer(h: &DMatrix<C64>, powers: &[f64], noise_power: f64) -> Result<DMatrix<C64>> {
    if powers.len() != h.ncols() {
        return Err(Error::invalid(format!(
            "{} powers for {} users",
            powers.len(),
            h.ncols()
        )));
    }
    if !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(Error::invalid("noise power must be positive"));
    }
    if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::invalid("channel matrix must be finite"));
    }
    let m = h.nrows();
    let mut weighted = h.clone();
    for (mut col, p) in weighted.column_iter_mut().zip(powers) {
        col *= C64::new(*p, 0.0);
    }
    let mut a = &weighted * h.adjoint();
    for i in 0..m {
        a[(i, i)] += C64::new(noise_power, 0.0);
    }
    // rounding leaves the product a hair off Hermitian
    let a = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    hermitian_solve(&a, h)
}
