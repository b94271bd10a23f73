//! Weak-coupling theory of the measurement (`phi * N_at << 1`).
//!
//! In this regime the accumulated back-action is Gaussian in `n`,
//!
//! ```text
//! |F(n)|^2 ∝ exp[-2 M^2 N_p (n^2 + 2 dphi n / phi)],   M^2 = phi^2/4 (1 - sqrt(1 - C^2)),
//! ```
//!
//! where `dphi` is the trajectory-averaged phase offset. The CSS variance
//! shrinks as `xi^2 N_at / 4` with `xi^2 = 1/(1 + kappa^2)` and
//! `kappa^2 = M^2 N_at N_p`, until `N_p ~ M^-2` where the state resolves
//! individual Dicke levels.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Checked, Warning, MUCH_LESS};
use crate::error::{Error, Result};
use crate::measurement::InterferometerParams;
use crate::spin_state::{CollectiveState, SpinMoments};

/// Bins closer than this to `C + cos(pi l / m) = 0` are reported as singular.
const SINGULAR_BIN_EPS: f64 = 1e-12;

/// Derived weak-coupling quantities for one point of a measurement sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakCouplingTheory {
    pub m_squared: f64,
    pub kappa_squared: f64,
    pub xi_squared: f64,
    pub delta_phi_bar: f64,
}

impl WeakCouplingTheory {
    pub fn new(n_atoms: u32, n_photons: f64, params: &InterferometerParams, delta_phi_bar: f64) -> Self {
        let m_squared = measurement_strength(params);
        let kappa_squared = m_squared * n_atoms as f64 * n_photons;
        Self {
            m_squared,
            kappa_squared,
            xi_squared: 1.0 / (1.0 + kappa_squared),
            delta_phi_bar,
        }
    }
}

/// Per-photon information gain `M^2 = phi^2/4 (1 - sqrt(1 - C^2))`.
pub fn measurement_strength(params: &InterferometerParams) -> f64 {
    let c = params.contrast();
    0.25 * params.phi().powi(2) * fisher_information(c)
}

/// Fisher information of one detected phase about a small phase shift:
/// `1 - sqrt(1 - C^2)`.
pub fn fisher_information(contrast: f64) -> f64 {
    let c2 = contrast * contrast;
    // 1 - sqrt(1 - c2) without cancellation at small contrast.
    c2 / (1.0 + (1.0 - c2).max(0.0).sqrt())
}

/// `M^-2`, the photon number at which single Dicke levels get resolved.
pub fn collapse_photon_number(params: &InterferometerParams) -> f64 {
    1.0 / measurement_strength(params)
}

fn coupling_warning(n_atoms: u32, params: &InterferometerParams) -> Option<Warning> {
    let x = params.phi() * n_atoms as f64;
    (x * MUCH_LESS > 1.0).then_some(Warning::StrongCoupling { phi_n_atoms: x })
}

/// Analytic short-time mean and variance of `J_z` after `n_photons`.
pub fn short_time_moments(
    n_atoms: u32,
    n_photons: f64,
    params: &InterferometerParams,
    delta_phi_bar: f64,
) -> Checked<SpinMoments> {
    let th = WeakCouplingTheory::new(n_atoms, n_photons, params, delta_phi_bar);
    let c2 = params.contrast().powi(2);
    let mean_jz = if params.phi() > 0.0 {
        -c2 * th.xi_squared * th.kappa_squared * delta_phi_bar / params.phi()
    } else {
        0.0
    };
    let mut out = Checked::clean(SpinMoments {
        mean_jz,
        var_jz: short_time_variance(n_atoms, n_photons, params),
    });
    if n_photons * th.m_squared * MUCH_LESS > 1.0 {
        out.warnings.push(Warning::OutsideShortTime {
            n_photons,
            inverse_strength: 1.0 / th.m_squared,
        });
    }
    out.warnings.extend(coupling_warning(n_atoms, params));
    out
}

/// `xi^2 N_at / 4`; deterministic, no dependence on the phase record.
pub fn short_time_variance(n_atoms: u32, n_photons: f64, params: &InterferometerParams) -> f64 {
    let n = n_atoms as f64;
    0.25 * n / (1.0 + measurement_strength(params) * n * n_photons)
}

/// Log-weight of the Gaussian back-action on level `n`.
pub fn gaussian_backaction(n_photons: f64, params: &InterferometerParams, delta_phi_bar: f64, n: f64) -> f64 {
    let m2 = measurement_strength(params);
    if m2 == 0.0 {
        return 0.0;
    }
    -2.0 * m2 * n_photons * (n * n + 2.0 * delta_phi_bar * n / params.phi())
}

/// `|c_n(0)|^2 |F(n)|^2` renormalized, with the Gaussian back-action.
pub fn gaussian_posterior(
    initial: &CollectiveState,
    n_photons: f64,
    params: &InterferometerParams,
    delta_phi_bar: f64,
) -> Checked<Vec<f64>> {
    let logs: Vec<f64> = initial
        .probabilities()
        .iter()
        .enumerate()
        .map(|(k, p)| p.ln() + gaussian_backaction(n_photons, params, delta_phi_bar, initial.eigenvalue(k)))
        .collect();
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    let mut out = Checked::clean(w);
    out.warnings.extend(coupling_warning(initial.n_atoms(), params));
    out
}

/// Long-time variance envelope `(1/4, 2 exp(-2 M^2 N_p))`: the state straddling
/// two Dicke levels, and the state centered on one.
pub fn long_time_bounds(m_squared: f64, n_photons: f64) -> Checked<(f64, f64)> {
    let mut out = Checked::clean((0.25, 2.0 * (-2.0 * m_squared * n_photons).exp()));
    if m_squared * n_photons < MUCH_LESS {
        out.warnings.push(Warning::OutsideLongTime {
            n_photons,
            inverse_strength: 1.0 / m_squared,
        });
    }
    out
}

/// Running estimators of the trajectory-averaged phase offset `dphi`.
///
/// * `demodulated`: each phase `x` is turned into the efficient estimate of a
///   small fringe shift, `C sin x / (1 + C cos x) / I` with `I` the per-photon
///   Fisher information, and averaged; the sign is flipped so that
///   `dphi = -phi <J_z>`. This is the estimator whose linear term reproduces
///   the exact back-action to second order in `phi n`.
/// * `raw_mean`: plain running mean of the detected phases, kept for reference
///   (its expectation is `-C dphi`).
/// * `jz_proxy`: running mean of `-phi <J_z>` over the states before each
///   detection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseOffsetEstimator {
    count: u64,
    sum_phase: f64,
    sum_score: f64,
    sum_proxy: f64,
}

impl PhaseOffsetEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a detection `phase` made on a state with mean `mean_jz_before`.
    pub fn push(&mut self, params: &InterferometerParams, phase: f64, mean_jz_before: f64) {
        let c = params.contrast();
        self.count += 1;
        self.sum_phase += phase;
        self.sum_score += c * phase.sin() / (1.0 + c * phase.cos());
        self.sum_proxy += -params.phi() * mean_jz_before;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn raw_mean(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sum_phase / self.count as f64
    }

    pub fn demodulated(&self, params: &InterferometerParams) -> f64 {
        let info = fisher_information(params.contrast());
        if self.count == 0 || info == 0.0 {
            return 0.0;
        }
        -self.sum_score / (self.count as f64 * info)
    }

    pub fn jz_proxy(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sum_proxy / self.count as f64
    }
}

/// Strength `M_l^2` of the stationary sub-process collecting phase bin
/// `pi l / m`.
pub fn subprocess_strength(params: &InterferometerParams, l: i64, m: i64) -> f64 {
    let c = params.contrast();
    let cos = (PI * l as f64 / m as f64).cos();
    0.25 * c * params.phi().powi(2) * (c + cos) / (1.0 + c * cos).powi(2)
}

/// Center `n_l` of the sub-process Gaussian for phase bin `pi l / m`.
pub fn subprocess_offset(params: &InterferometerParams, l: i64, m: i64) -> Result<f64> {
    let c = params.contrast();
    let theta = PI * l as f64 / m as f64;
    let denom = c + theta.cos();
    if denom.abs() < SINGULAR_BIN_EPS || params.phi() == 0.0 {
        return Err(Error::SingularBin { l, m });
    }
    if l == 0 {
        return Ok(0.0);
    }
    Ok((1.0 + c * theta.cos()) / denom * theta.sin() / params.phi())
}

/// `(M_l^2, n_l)` for bin `l` of `2m + 1` phase bins.
pub fn subprocess_quantities(params: &InterferometerParams, l: i64, m: i64) -> Result<(f64, f64)> {
    if m < 1 || l.abs() > m {
        return Err(Error::invalid(
            "l",
            format!("need -m <= l <= m with m >= 1, got l={l}, m={m}"),
        ));
    }
    Ok((subprocess_strength(params, l, m), subprocess_offset(params, l, m)?))
}

/// Centered phase density `P_0(x) = (1 + C cos x) / 2 pi`.
pub fn centered_phase_pdf(contrast: f64, x: f64) -> f64 {
    (1.0 + contrast * x.cos()) / TAU
}

/// `sum_l (pi/m) P_0(pi l/m) M_l^2` over `l = -m..=m`, the quadratic
/// coefficient per photon of the sub-process product. The two end bins both
/// sit at `|x| = pi` and get half weight (periodic trapezoid rule).
pub fn integrated_subprocess_strength(params: &InterferometerParams, m: i64) -> f64 {
    let c = params.contrast();
    let h = PI / m as f64;
    (-m..=m)
        .map(|l| {
            let w = if l.abs() == m { 0.5 } else { 1.0 };
            let cos = (h * l as f64).cos();
            // P_0 M_l^2 = C phi^2 (C + cos) / (8 pi (1 + C cos)); the ratio
            // tends to 1 at the C = 1 dark fringe, where both factors vanish.
            let denom = 1.0 + c * cos;
            let ratio = if denom == 0.0 { 1.0 } else { (c + cos) / denom };
            w * h * c * params.phi().powi(2) * ratio / (4.0 * TAU)
        })
        .sum()
}

/// Whether `N_t` photons per sub-process populate even the dark-fringe bins:
/// `N_t [(1 - C)/(2m) + pi^2 C/(12 m^3)] >= 10`.
pub fn subprocess_validity(n_t: f64, m: i64, contrast: f64) -> bool {
    let m = m as f64;
    let edge = (1.0 - contrast) / (2.0 * m) + PI * PI * contrast / (12.0 * m.powi(3));
    n_t * edge >= MUCH_LESS
}
