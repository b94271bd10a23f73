//! Spontaneous-emission budget of a dispersive probe on a real alkali line.
//!
//! The probe is detuned between the two ground hyperfine manifolds so that
//! the dispersive couplings cancel, `S_1 = -S_2 = S`. Then the phase per atom,
//! the resonant optical density `rho_0`, the scattering probability `eta` and
//! the achievable squeezing `xi^2(eta)` follow from `S`, the absorptive
//! lineshape `L` and the probe geometry.

pub mod species;
pub mod wigner;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use species::{AtomicSpecies, HyperfineLevel};
pub use wigner::{wigner_6j, Spin};

use crate::diagnostics::{Checked, Warning};
use crate::error::{Error, Result};

/// Probe beam and atomic sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGeometry {
    /// Beam area, m^2.
    pub beam_area: f64,
    pub n_atoms: f64,
    /// Population imbalance: `N_1 = N_at (1 + eps) / 2`.
    pub imbalance: f64,
}

impl ProbeGeometry {
    pub fn new(beam_area: f64, n_atoms: f64, imbalance: f64) -> Result<Self> {
        if !(beam_area > 0.0 && beam_area.is_finite()) {
            return Err(Error::invalid("beam_area", "must be positive"));
        }
        if !(n_atoms > 0.0) {
            return Err(Error::invalid("n_atoms", "must be positive"));
        }
        if !(imbalance.abs() <= 1.0) {
            return Err(Error::invalid("imbalance", "|eps| must be <= 1"));
        }
        Ok(Self {
            beam_area,
            n_atoms,
            imbalance,
        })
    }

    /// Gaussian-beam area `pi w^2` for waist `w`.
    pub fn from_waist(waist_m: f64, n_atoms: f64) -> Result<Self> {
        Self::new(PI * waist_m * waist_m, n_atoms, 0.0)
    }

    /// `(N_1, N_2)`.
    pub fn populations(&self) -> (f64, f64) {
        let n = self.n_atoms;
        (0.5 * n * (1.0 + self.imbalance), 0.5 * n * (1.0 - self.imbalance))
    }
}

/// Carrier, sideband and electronic-noise photon numbers of the detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrParams {
    pub n_carrier: f64,
    pub n_sideband: f64,
    pub n_electronic: f64,
}

/// `sqrt(N_c N_s / (N_c + N_s + N_e))`, up to a common factor.
pub fn snr(p: &SnrParams) -> f64 {
    let den = p.n_carrier + p.n_sideband + p.n_electronic;
    if den <= 0.0 {
        return 0.0;
    }
    (p.n_carrier * p.n_sideband / den).sqrt()
}

/// Relative strengths `S_FF' = (2F'+1)(2J+1) {J J' 1; F' F I}^2` from ground
/// level `f` to each listed excited level, in file order.
pub fn line_strengths(species: &AtomicSpecies, f: Spin) -> Vec<(Spin, f64)> {
    let (i, j, jp) = (species.nuclear_spin, species.j_ground, species.j_excited);
    species
        .excited
        .iter()
        .map(|lvl| {
            let fp = lvl.f;
            let w = wigner_6j(j, jp, Spin::ONE, fp, f, i);
            (fp, fp.multiplicity() * j.multiplicity() * w * w)
        })
        .collect()
}

/// One optical transition seen by the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    /// `Delta = nu_probe - nu_line`, Hz.
    pub detuning_hz: f64,
    pub strength: f64,
}

/// `sum gamma Delta / (Delta^2 + gamma^2) S`.
pub fn dispersive_coupling(gamma_hz: f64, lines: &[Line]) -> f64 {
    lines
        .iter()
        .map(|l| gamma_hz * l.detuning_hz / (l.detuning_hz.powi(2) + gamma_hz.powi(2)) * l.strength)
        .sum()
}

/// `sum gamma^2 / (Delta^2 + gamma^2) S`.
pub fn absorptive_lineshape(gamma_hz: f64, lines: &[Line]) -> f64 {
    lines
        .iter()
        .map(|l| gamma_hz.powi(2) / (l.detuning_hz.powi(2) + gamma_hz.powi(2)) * l.strength)
        .sum()
}

/// Lines from ground level `ground` for a probe at `probe_hz`.
pub fn lines_from(species: &AtomicSpecies, ground: &HyperfineLevel, probe_hz: f64) -> Vec<Line> {
    let strengths = line_strengths(species, ground.f);
    species
        .excited
        .iter()
        .zip(strengths)
        .map(|(exc, (_, strength))| Line {
            detuning_hz: probe_hz - species.transition_hz(ground, exc),
            strength,
        })
        .collect()
}

/// Dispersive coupling of each ground level and total lineshape at one probe frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeCoupling {
    pub probe_hz: f64,
    /// `S_F` per ground level, in file order.
    pub couplings: Vec<(Spin, f64)>,
    pub lineshape: f64,
}

pub fn coupling_and_lineshape(species: &AtomicSpecies, probe_hz: f64) -> ProbeCoupling {
    let mut couplings = Vec::with_capacity(species.ground.len());
    let mut lineshape = 0.0;
    for g in &species.ground {
        let lines = lines_from(species, g, probe_hz);
        couplings.push((g.f, dispersive_coupling(species.gamma_hz, &lines)));
        lineshape += absorptive_lineshape(species.gamma_hz, &lines);
    }
    ProbeCoupling {
        probe_hz,
        couplings,
        lineshape,
    }
}

/// Default search window: the gap between the two ground-state transition
/// manifolds, inset by one line width on each side.
pub fn balance_window(species: &AtomicSpecies) -> Result<(f64, f64)> {
    if species.ground.len() != 2 {
        return Err(Error::invalid("species", "balancing needs exactly two ground levels"));
    }
    let manifold = |g: &HyperfineLevel| {
        let freqs = species.excited.iter().map(|e| species.transition_hz(g, e));
        let lo = freqs.clone().fold(f64::INFINITY, f64::min);
        let hi = freqs.fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (a, b) = (manifold(&species.ground[0]), manifold(&species.ground[1]));
    let (lower, upper) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    Ok((lower.1 + species.gamma_hz, upper.0 - species.gamma_hz))
}

/// Probe frequency where `S_1 + S_2 = 0`, by bisection inside `window`
/// (defaults to [`balance_window`]).
pub fn balance_detunings(species: &AtomicSpecies, window: Option<(f64, f64)>) -> Result<f64> {
    let (lo0, hi0) = match window {
        Some(w) => w,
        None => balance_window(species)?,
    };
    if species.ground.len() != 2 {
        return Err(Error::invalid("species", "balancing needs exactly two ground levels"));
    }
    let total = |nu: f64| -> f64 {
        coupling_and_lineshape(species, nu)
            .couplings
            .iter()
            .map(|(_, s)| s)
            .sum()
    };
    let no_root = Error::NoRoot { lo: lo0, hi: hi0 };
    if !(lo0 < hi0) {
        return Err(no_root);
    }
    let (mut lo, mut hi) = (lo0, hi0);
    let (f_lo, f_hi) = (total(lo), total(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(no_root);
    }
    let tol = 1e-12 * lo0.abs().max(hi0.abs()).max(hi0 - lo0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = total(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `rho_0 = lambda^2 N_at / (4 pi A)`.
pub fn resonant_optical_density(species: &AtomicSpecies, geometry: &ProbeGeometry) -> f64 {
    species.wavelength_m.powi(2) * geometry.n_atoms / (4.0 * PI * geometry.beam_area)
}

/// Probe phase per unit population difference, `lambda^2 S / (2 pi A)`.
pub fn phase_per_atom(species: &AtomicSpecies, geometry: &ProbeGeometry, s: f64) -> f64 {
    species.wavelength_m.powi(2) * s / (2.0 * PI * geometry.beam_area)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalDephasing {
    /// `lambda^2 / (4 pi A) (N_1 S_1 + N_2 S_2)`.
    pub general: f64,
    /// `rho_0 S_1 eps`, exact only when `S_2 = -S_1`.
    pub balanced: f64,
}

pub fn optical_dephasing(species: &AtomicSpecies, geometry: &ProbeGeometry, s1: f64, s2: f64) -> OpticalDephasing {
    let (n1, n2) = geometry.populations();
    let prefactor = species.wavelength_m.powi(2) / (4.0 * PI * geometry.beam_area);
    OpticalDephasing {
        general: prefactor * (n1 * s1 + n2 * s2),
        balanced: resonant_optical_density(species, geometry) * s1 * geometry.imbalance,
    }
}

/// Probability per atom of scattering a photon during `n_photons` detections,
/// `eta = rho_0 / N_at * C^2 N_p / 2 * L` (small-contrast limit).
pub fn scattering_probability(rho0: f64, n_atoms: f64, contrast: f64, n_photons: f64, lineshape: f64) -> Checked<f64> {
    let raw = rho0 / n_atoms * contrast * contrast * n_photons / 2.0 * lineshape;
    let mut out = Checked::clean(raw);
    if contrast > 0.3 {
        out.warnings.push(Warning::LargeContrast { contrast });
    }
    if raw > 1.0 {
        out.value = 1.0;
        out.warnings.push(Warning::EtaClamped { raw });
    }
    out
}

/// Photon number giving scattering probability `eta`; inverse of
/// [`scattering_probability`].
pub fn photons_for_eta(eta: f64, rho0: f64, n_atoms: f64, contrast: f64, lineshape: f64) -> f64 {
    2.0 * eta * n_atoms / (rho0 * contrast * contrast * lineshape)
}

/// `xi^2 = (1 - eta)^2 / (1 + mu rho_0 eta) + 1 - (1 - eta)^2`.
pub fn squeezing_with_decay(mu: f64, rho0: f64, eta: f64) -> f64 {
    let keep = (1.0 - eta).powi(2);
    keep / (1.0 + mu * rho0 * eta) + 1.0 - keep
}

/// Golden-section minimum of [`squeezing_with_decay`] over `eta` in `(0, 1)`.
/// Returns `(eta*, xi^2*)`.
pub fn optimize_eta(mu: f64, rho0: f64) -> (f64, f64) {
    const TOL: f64 = 1e-6;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |eta: f64| squeezing_with_decay(mu, rho0, eta);
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let eta = 0.5 * (a + b);
    (eta, f(eta))
}

/// Everything needed to judge a probe configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingBudget {
    pub probe_hz: f64,
    pub rho0: f64,
    pub s_coupling: f64,
    pub lineshape: f64,
    pub mu: f64,
    pub phi: f64,
    pub eta: f64,
    pub xi_squared: f64,
    /// Photons needed to reach `eta` at the given contrast.
    pub n_photons: f64,
    pub contrast: f64,
}

impl SqueezingBudget {
    /// Balances the probe, then picks the decoherence that minimizes `xi^2`.
    pub fn optimal(species: &AtomicSpecies, geometry: &ProbeGeometry, contrast: f64) -> Result<Self> {
        let probe_hz = balance_detunings(species, None)?;
        let coupling = coupling_and_lineshape(species, probe_hz);
        // S = S_1 = -S_2 with ground levels in file order.
        let s = coupling.couplings[0].1;
        let rho0 = resonant_optical_density(species, geometry);
        let mu = s * s / coupling.lineshape;
        let (eta, xi_squared) = optimize_eta(mu, rho0);
        Ok(Self {
            probe_hz,
            rho0,
            s_coupling: s,
            lineshape: coupling.lineshape,
            mu,
            phi: phase_per_atom(species, geometry, s.abs()),
            eta,
            xi_squared,
            n_photons: photons_for_eta(eta, rho0, geometry.n_atoms, contrast, coupling.lineshape),
            contrast,
        })
    }
}
