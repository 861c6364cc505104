//! Truncated Fock-space realisation of coherent states and of the optimal
//! signal/decoy USD measurement.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::poisson::{min_cutoff, poisson_tail};
use crate::source::SourceConfig;

/// Default photon-number truncation for the measurement operators.
pub const DEFAULT_CUTOFF: usize = 40;

/// Tail mass the truncation may discard from either coherent state.
pub const CUTOFF_TAIL_TOLERANCE: f64 = 1e-10;

/// Hermiticity tolerance on `max |A − A†|`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Lowest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOLERANCE: f64 = -1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("Fock cutoff must be at least 1 (got {0})")]
    ZeroCutoff(usize),
    #[error("Fock cutoff {requested} too small; at least {required} needed for tail < {tolerance:e}")]
    InsufficientCutoff {
        requested: usize,
        required: usize,
        tolerance: f64,
    },
    #[error("signal and decoy states coincide; no unambiguous measurement exists")]
    Indistinguishable,
}

/// Coherent state `|α⟩` expanded on photon numbers `0..=cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentVector {
    amplitude: Complex64,
    coeffs: DVector<Complex64>,
}

impl CoherentVector {
    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    pub fn cutoff(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &DVector<Complex64> {
        &self.coeffs
    }

    pub fn norm_squared(&self) -> f64 {
        self.coeffs.norm_squared()
    }

    /// `⟨self|other⟩` in the truncated space.
    pub fn inner(&self, other: &CoherentVector) -> Complex64 {
        self.coeffs.dotc(&other.coeffs)
    }

    /// Poisson mass of `|α|²` lost above the cutoff.
    pub fn truncated_mass(&self) -> f64 {
        poisson_tail(self.amplitude.norm_sqr(), self.cutoff() as u32)
    }
}

/// Builds the coefficients `e^{−|α|²/2} αⁿ/√(n!)` for `n = 0..=cutoff`.
pub fn coherent_vector(alpha: Complex64, cutoff: usize) -> Result<CoherentVector, FockError> {
    if cutoff < 1 {
        return Err(FockError::ZeroCutoff(cutoff));
    }
    let mut coeffs = DVector::<Complex64>::zeros(cutoff + 1);
    let mut c = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    coeffs[0] = c;
    for n in 1..=cutoff {
        c = c * alpha / (n as f64).sqrt();
        coeffs[n] = c;
    }
    Ok(CoherentVector {
        amplitude: alpha,
        coeffs,
    })
}

/// Dense operator on the truncated Fock space `span{|0⟩, …, |cutoff⟩}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    entries: DMatrix<Complex64>,
}

impl FockOperator {
    pub fn identity(cutoff: usize) -> Self {
        Self {
            entries: DMatrix::identity(cutoff + 1, cutoff + 1),
        }
    }

    /// Unnormalised projector `|φ⟩⟨φ|`.
    pub fn projector(phi: &DVector<Complex64>) -> Self {
        Self {
            entries: phi * phi.adjoint(),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.entries *= Complex64::new(k, 0.0);
        self
    }

    /// `max |A − A†|` over all entries.
    pub fn hermitian_residual(&self) -> f64 {
        let diff = &self.entries - self.entries.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_residual() <= HERMITIAN_TOLERANCE
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().min()
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= PSD_TOLERANCE
    }

    /// Real part of `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, psi: &CoherentVector) -> f64 {
        let a_psi = &self.entries * psi.coeffs();
        psi.coeffs().dotc(&a_psi).re
    }
}

impl std::ops::Sub<&FockOperator> for FockOperator {
    type Output = FockOperator;

    fn sub(self, rhs: &FockOperator) -> FockOperator {
        FockOperator {
            entries: self.entries - &rhs.entries,
        }
    }
}

impl std::ops::Add<&FockOperator> for &FockOperator {
    type Output = FockOperator;

    fn add(self, rhs: &FockOperator) -> FockOperator {
        FockOperator {
            entries: &self.entries + &rhs.entries,
        }
    }
}

/// The three outcomes of the optimal signal/decoy USD.
#[derive(Debug, Clone)]
pub struct UsdPovm {
    pub e_mu: FockOperator,
    pub e_nu: FockOperator,
    pub e_f: FockOperator,
    pub signal: CoherentVector,
    pub decoy: CoherentVector,
    /// `|⟨decoy|signal⟩|` evaluated in the truncated space.
    pub failure_probability: f64,
}

/// Cutoff needed so that both first-bin coherent states lose less than
/// [`CUTOFF_TAIL_TOLERANCE`] to truncation.
pub fn required_cutoff(cfg: &SourceConfig) -> usize {
    let mean = cfg.mu().max(cfg.nu()) / 2.0;
    min_cutoff(mean, CUTOFF_TAIL_TOLERANCE) as usize
}

/// Realises the optimal USD between the signal and decoy first bins.
///
/// `E_μ ∝ P(|s⟩ − ⟨d|s⟩|d⟩)`, `E_ν ∝ P(|d⟩ − ⟨s|d⟩|s⟩)` with the common factor
/// `1/((1+p_f)(1−p_f²))`, and `E_f = I − E_μ − E_ν`.
pub fn build_usd_povm(cfg: &SourceConfig, cutoff: usize) -> Result<UsdPovm, FockError> {
    if cutoff < 1 {
        return Err(FockError::ZeroCutoff(cutoff));
    }
    let required = required_cutoff(cfg);
    if cutoff < required {
        return Err(FockError::InsufficientCutoff {
            requested: cutoff,
            required,
            tolerance: CUTOFF_TAIL_TOLERANCE,
        });
    }
    let signal = coherent_vector(cfg.signal_amplitude(), cutoff)?;
    let decoy = coherent_vector(cfg.decoy_amplitude(), cutoff)?;

    let d_s = decoy.inner(&signal);
    let s_d = d_s.conj();
    let p_f = d_s.norm();
    if p_f >= 1.0 - 1e-15 {
        return Err(FockError::Indistinguishable);
    }
    let k = 1.0 / ((1.0 + p_f) * (1.0 - p_f * p_f));

    let signal_perp = signal.coeffs() - decoy.coeffs() * d_s;
    let decoy_perp = decoy.coeffs() - signal.coeffs() * s_d;
    let e_mu = FockOperator::projector(&signal_perp).scaled(k);
    let e_nu = FockOperator::projector(&decoy_perp).scaled(k);
    let e_f = FockOperator::identity(cutoff) - &e_mu - &e_nu;

    Ok(UsdPovm {
        e_mu,
        e_nu,
        e_f,
        signal,
        decoy,
        failure_probability: p_f,
    })
}
