//! Dense complex linear algebra and the quantum primitives built on it:
//! eigendecomposition, quantum relative entropy, POVMs, measurement maps and
//! Kraus channels.

mod channel;
mod eig;
mod entropy;
mod matrix;

pub use channel::{
    apply_channel, measurement_map, min_eigenpair, pauli, quantum_behavior, random_cptp, random_cptp_rng,
    random_density, sic_povm_qubit, KrausChannel, Povm,
};
pub use eig::{eig_hermitian, Eigen};
pub use entropy::{
    check_density, check_psd, log_derivative, quantum_relative_entropy, relative_entropy_eig, relative_entropy_psd,
    SUPPORT_CUTOFF,
};
pub use matrix::{CMatrix, C};

use crate::error::Result;
use crate::scalar::Real;

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
pub fn project_psd<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    let e = eig_hermitian(&m.hermitian_part())?;
    if e.values.first().is_none_or(|&v| v >= T::zero()) {
        return Ok(m.hermitian_part());
    }
    Ok(e.apply(|v| v.max(T::zero())))
}
