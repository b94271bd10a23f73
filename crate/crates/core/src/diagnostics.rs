//! Validity warnings for approximate formulas.
//!
//! Closed-form results outside their regime of validity are still returned;
//! the warnings travel alongside the value so callers can report them.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Modulator amplitude outside the weak-coupling limit `|beta| << 1`.
    StrongModulation { beta_abs: f64 },
    /// Short-time formulas evaluated at `N_p` not much smaller than `M^-2`.
    OutsideShortTime { n_photons: f64, inverse_strength: f64 },
    /// Long-time bounds evaluated at `N_p` not much larger than `M^-2`.
    OutsideLongTime { n_photons: f64, inverse_strength: f64 },
    /// `phi * N_at` is not small.
    StrongCoupling { phi_n_atoms: f64 },
    /// Scattering probability formula used with a large contrast.
    LargeContrast { contrast: f64 },
    /// Scattering probability exceeded 1 and was clamped.
    EtaClamped { raw: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::StrongModulation { beta_abs } => {
                write!(f, "modulation amplitude |beta| = {beta_abs} exceeds 0.5")
            }
            Warning::OutsideShortTime {
                n_photons,
                inverse_strength,
            } => write!(
                f,
                "N_p = {n_photons} is not << M^-2 = {inverse_strength}; short-time formulas are approximate"
            ),
            Warning::OutsideLongTime {
                n_photons,
                inverse_strength,
            } => write!(
                f,
                "N_p = {n_photons} is not >> M^-2 = {inverse_strength}; long-time bounds are approximate"
            ),
            Warning::StrongCoupling { phi_n_atoms } => {
                write!(f, "phi * N_at = {phi_n_atoms} is not << 1")
            }
            Warning::LargeContrast { contrast } => {
                write!(f, "contrast {contrast} is not << 1")
            }
            Warning::EtaClamped { raw } => write!(f, "scattering probability {raw} clamped to 1"),
        }
    }
}

/// A value together with any validity warnings raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checked<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Checked<T> {
    pub fn clean(value: T) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn into_value(self) -> T {
        self.value
    }
}

/// Factor used to turn "much less than" into a number.
pub const MUCH_LESS: f64 = 10.0;
