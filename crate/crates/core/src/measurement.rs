//! Heterodyne QND detection of single photons.
//!
//! A photon leaves the spectral beamsplitter in a superposition of the probe
//! mode (amplitude `sqrt(T)`) and the reference mode (amplitude `sqrt(R)`). The
//! probe mode picks up the phase `phi * J_z` in the atoms, and the arrival time
//! of the photon relative to the modulation clock gives a detected phase
//! `phi_k` in `[-pi, pi)`. Given the state, `phi_k` is distributed as
//!
//! ```text
//! P(x) = 1/(2 pi) sum_n |c_n|^2 (1 + C cos(phi n - x)),   C = 2 sqrt(R T)
//! ```
//!
//! and the detection multiplies `c_n` by
//!
//! ```text
//! K(n) = (sqrt T + sqrt R) cos((phi n - x)/2) + i (sqrt T - sqrt R) sin((phi n - x)/2)
//! ```
//!
//! with `|K(n)|^2 = 1 + C cos(phi n - x)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Checked, Warning};
use crate::error::{Error, Result};
use crate::spin_state::{CollectiveState, DEGENERATE_NORM};

/// Phase sampling stops once the root is bracketed this tightly (radians).
pub const PHASE_TOLERANCE: f64 = 1e-10;
/// Levels whose probability drops below this are set to exactly zero by
/// [`Detector::apply`].
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-300;
/// Hard cap on root-finding steps per sample.
pub const MAX_SAMPLER_STEPS: usize = 60;

const SUM_RULE_TOLERANCE: f64 = 1e-12;

/// Spectral interferometer: beamsplitter probabilities and atomic coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerParams {
    t_coeff: f64,
    r_coeff: f64,
    phi: f64,
    omega: f64,
}

impl InterferometerParams {
    /// `t_coeff` and `r_coeff` are probabilities with `T + R = 1`; `phi` is
    /// the probe phase per unit of `J_z`; `omega` (rad/s) is kept as metadata.
    pub fn new(t_coeff: f64, r_coeff: f64, phi: f64, omega: f64) -> Result<Self> {
        for (name, v) in [("T", t_coeff), ("R", r_coeff)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(
                    if name == "T" { "t_coeff" } else { "r_coeff" },
                    format!("{v} not in [0, 1]"),
                ));
            }
        }
        if (t_coeff + r_coeff - 1.0).abs() > SUM_RULE_TOLERANCE {
            return Err(Error::invalid(
                "r_coeff",
                format!("R + T = {} must equal 1", t_coeff + r_coeff),
            ));
        }
        if !(phi >= 0.0 && phi.is_finite()) {
            return Err(Error::invalid("phi", format!("{phi} must be finite and >= 0")));
        }
        if !omega.is_finite() {
            return Err(Error::invalid("omega", "must be finite"));
        }
        Ok(Self {
            t_coeff,
            r_coeff,
            phi,
            omega,
        })
    }

    /// `T = 1 - R`, no modulation-frequency metadata.
    pub fn with_reflectivity(r_coeff: f64, phi: f64) -> Result<Self> {
        Self::new(1.0 - r_coeff, r_coeff, phi, 0.0)
    }

    /// `R = T = 1/2`, unit contrast.
    pub fn balanced(phi: f64) -> Result<Self> {
        Self::new(0.5, 0.5, phi, 0.0)
    }

    /// Beamsplitter set by a phase modulator of amplitude `beta = g t alpha_m`.
    pub fn from_modulation(beta: Complex64, phi: f64, omega: f64) -> Result<Checked<Self>> {
        let split = modulator_split(beta);
        let (t, r) = split.value;
        Ok(Checked {
            value: Self::new(t, r, phi, omega)?,
            warnings: split.warnings,
        })
    }

    pub fn t_coeff(&self) -> f64 {
        self.t_coeff
    }

    pub fn r_coeff(&self) -> f64 {
        self.r_coeff
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Beatnote contrast `C = 2 sqrt(R T)`.
    pub fn contrast(&self) -> f64 {
        (2.0 * (self.r_coeff * self.t_coeff).sqrt()).min(1.0)
    }

    /// Reference period `2 pi / Omega`, if a modulation frequency was given.
    pub fn period(&self) -> Option<f64> {
        (self.omega > 0.0).then(|| TAU / self.omega)
    }
}

/// Branch probabilities `(T, R)` of the modulator output
/// `|1_0, 0_1> + beta |0_0, 1_1>` after normalization.
pub fn modulator_split(beta: Complex64) -> Checked<(f64, f64)> {
    let b2 = beta.norm_sqr();
    let t = 1.0 / (1.0 + b2);
    let r = b2 / (1.0 + b2);
    let mut out = Checked::clean((t, r));
    if beta.norm() > 0.5 {
        out.warnings.push(Warning::StrongModulation { beta_abs: beta.norm() });
    }
    out
}

/// One detected photon: its beatnote phase in `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    phase: f64,
}

impl DetectionEvent {
    pub fn new(phase: f64) -> Result<Self> {
        if !(-PI..PI).contains(&phase) {
            return Err(Error::invalid("phase", format!("{phase} not in [-pi, pi)")));
        }
        Ok(Self { phase })
    }

    /// Phase reconstructed from an arrival time `t` against a reference clock
    /// of angular frequency `omega` (pulses at multiples of `2 pi / omega`),
    /// shifted into `[-pi, pi)`.
    pub fn from_arrival_time(t: f64, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !t.is_finite() {
            return Err(Error::invalid("omega", "needs a positive frequency and finite time"));
        }
        let wrapped = (omega * t).rem_euclid(TAU);
        let phase = if wrapped >= PI { wrapped - TAU } else { wrapped };
        Self::new(phase)
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }
}

/// The detected-phase distribution of a given state.
///
/// Only two numbers of the state matter: `A = <cos(phi J_z)>` and
/// `B = <sin(phi J_z)>`, so that `P(x) = (1 + C (A cos x + B sin x)) / 2 pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDistribution {
    pub contrast: f64,
    pub cos_moment: f64,
    pub sin_moment: f64,
}

impl PhaseDistribution {
    pub fn of(state: &CollectiveState, params: &InterferometerParams) -> Self {
        let phi = params.phi();
        let (mut a, mut b) = (0.0, 0.0);
        for (k, c) in state.amplitudes().iter().enumerate() {
            let p = c.norm_sqr();
            let (s, co) = (phi * state.eigenvalue(k)).sin_cos();
            a += p * co;
            b += p * s;
        }
        Self {
            contrast: params.contrast(),
            cos_moment: a,
            sin_moment: b,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (s, c) = x.sin_cos();
        (1.0 + self.contrast * (self.cos_moment * c + self.sin_moment * s)) / TAU
    }

    /// `F(x) = int_{-pi}^{x} P`, from the antiderivative
    /// `int_{-pi}^{x} cos(a - t) dt = sin(x - a) - sin(a)` summed over levels.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -PI {
            return 0.0;
        }
        if x >= PI {
            return 1.0;
        }
        let (s, c) = x.sin_cos();
        let osc = self.cos_moment * s - self.sin_moment * c - self.sin_moment;
        ((x + PI) + self.contrast * osc) / TAU
    }

    /// Inverts the CDF on `[-pi, pi]` to within [`PHASE_TOLERANCE`].
    ///
    /// Newton steps are taken from the uniform-distribution guess while they
    /// stay inside the current bracket; otherwise the bracket is bisected. The
    /// bracket always contains the root, so convergence is never worse than
    /// plain bisection.
    pub fn sample(&self, u: f64) -> DetectionEvent {
        if u <= 0.0 {
            return DetectionEvent { phase: -PI };
        }
        let (mut lo, mut hi) = (-PI, PI);
        let mut x = -PI + TAU * u.min(1.0);
        for _ in 0..MAX_SAMPLER_STEPS {
            let (s, c) = x.sin_cos();
            let osc = self.cos_moment * s - self.sin_moment * c - self.sin_moment;
            let f = ((x + PI) + self.contrast * osc) / TAU - u;
            if f == 0.0 {
                lo = x;
                hi = x;
                break;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let density = (1.0 + self.contrast * (self.cos_moment * c + self.sin_moment * s)) / TAU;
            let newton = x - f / density;
            if density > 0.0 && newton > lo && newton < hi {
                let step = (newton - x).abs();
                x = newton;
                if step <= 0.1 * PHASE_TOLERANCE {
                    lo = x;
                    hi = x;
                    break;
                }
            } else {
                x = 0.5 * (lo + hi);
            }
            if hi - lo <= PHASE_TOLERANCE {
                break;
            }
        }
        let phase = 0.5 * (lo + hi);
        DetectionEvent {
            phase: if phase >= PI { PI - PHASE_TOLERANCE } else { phase },
        }
    }
}

/// Probability density of detecting phase `phase` on the next photon.
pub fn phase_pdf(state: &CollectiveState, params: &InterferometerParams, phase: f64) -> f64 {
    PhaseDistribution::of(state, params).pdf(phase)
}

/// Cumulative distribution of the next detected phase, closed form.
pub fn phase_cdf(state: &CollectiveState, params: &InterferometerParams, phase: f64) -> f64 {
    PhaseDistribution::of(state, params).cdf(phase)
}

/// Draws the next detected phase from a uniform variate `u` in `[0, 1)`.
pub fn sample_phase(state: &CollectiveState, params: &InterferometerParams, u: f64) -> DetectionEvent {
    PhaseDistribution::of(state, params).sample(u)
}

/// Single-photon back-action kernel `K(n)` for detected phase `phase`.
pub fn detection_kernel(params: &InterferometerParams, phase: f64) -> impl Fn(f64) -> Complex64 {
    let plus = params.t_coeff().sqrt() + params.r_coeff().sqrt();
    let minus = params.t_coeff().sqrt() - params.r_coeff().sqrt();
    let phi = params.phi();
    move |n| {
        let (s, c) = (0.5 * (phi * n - phase)).sin_cos();
        Complex64::new(plus * c, minus * s)
    }
}

/// Conditional state after detecting `event`.
pub fn apply_detection(
    state: &CollectiveState,
    params: &InterferometerParams,
    event: DetectionEvent,
) -> Result<CollectiveState> {
    state.apply_diagonal_kernel(detection_kernel(params, event.phase()))
}

/// `log |F(n)|^2 = sum_k log(1 + C cos(phi n - phi_k))`, the accumulated
/// back-action on level `n` up to an `n`-independent constant.
///
/// Each factor is evaluated as `(sqrt T + sqrt R)^2 cos^2 + (sqrt T - sqrt R)^2 sin^2`
/// of the half angle, which equals `1 + C cos` without cancelling near a dark
/// fringe.
pub fn backaction_weight(params: &InterferometerParams, phases: &[f64], n: f64) -> f64 {
    let phi = params.phi();
    let plus = (params.t_coeff().sqrt() + params.r_coeff().sqrt()).powi(2);
    let minus = (params.t_coeff().sqrt() - params.r_coeff().sqrt()).powi(2);
    phases
        .iter()
        .map(|x| {
            let (s, c) = (0.5 * (phi * n - x)).sin_cos();
            (plus * c * c + minus * s * s).ln()
        })
        .sum()
}

/// Applies the product-form back-action of a whole phase record to `initial`.
pub fn apply_backaction(
    initial: &CollectiveState,
    params: &InterferometerParams,
    phases: &[f64],
) -> Result<CollectiveState> {
    let logs: Vec<f64> = initial
        .eigenvalues()
        .map(|n| backaction_weight(params, phases, n))
        .collect();
    let shift = logs
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::DegenerateKernel { norm: 0.0 });
    }
    let half = 0.5 * initial.n_atoms() as f64;
    initial.apply_diagonal_kernel(|n| {
        let k = (n + half) as usize;
        Complex64::new((0.5 * (logs[k] - shift)).exp(), 0.0)
    })
}

/// Table-driven detection step for long trajectories.
///
/// Precomputes `(sqrt T +- sqrt R) exp(i phi n / 2)` and `exp(i phi n)` per
/// level so each photon costs a few real multiplies per amplitude and no
/// trigonometry.
#[derive(Debug, Clone)]
pub struct Detector {
    params: InterferometerParams,
    /// `(sqrt T + sqrt R) cos(phi n / 2)`, `(sqrt T + sqrt R) sin(phi n / 2)`.
    plus_cos: Vec<f64>,
    plus_sin: Vec<f64>,
    /// `(sqrt T - sqrt R) cos(phi n / 2)`, `(sqrt T - sqrt R) sin(phi n / 2)`.
    minus_cos: Vec<f64>,
    minus_sin: Vec<f64>,
    rot_cos: Vec<f64>,
    rot_sin: Vec<f64>,
}

impl Detector {
    pub fn new(params: InterferometerParams, n_atoms: u32) -> Self {
        let half = 0.5 * n_atoms as f64;
        let phi = params.phi();
        let plus = params.t_coeff().sqrt() + params.r_coeff().sqrt();
        let minus = params.t_coeff().sqrt() - params.r_coeff().sqrt();
        let half_angles: Vec<(f64, f64)> = (0..=n_atoms)
            .map(|k| (0.5 * phi * (k as f64 - half)).sin_cos())
            .collect();
        let angles: Vec<(f64, f64)> = (0..=n_atoms).map(|k| (phi * (k as f64 - half)).sin_cos()).collect();
        Self {
            params,
            plus_cos: half_angles.iter().map(|h| plus * h.1).collect(),
            plus_sin: half_angles.iter().map(|h| plus * h.0).collect(),
            minus_cos: half_angles.iter().map(|h| minus * h.1).collect(),
            minus_sin: half_angles.iter().map(|h| minus * h.0).collect(),
            rot_cos: angles.iter().map(|a| a.1).collect(),
            rot_sin: angles.iter().map(|a| a.0).collect(),
        }
    }

    pub fn params(&self) -> &InterferometerParams {
        &self.params
    }

    pub fn distribution(&self, state: &CollectiveState) -> PhaseDistribution {
        debug_assert_eq!(state.dim(), self.rot_cos.len());
        let (mut a, mut b) = (0.0, 0.0);
        for ((c, rc), rs) in state.amplitudes().iter().zip(&self.rot_cos).zip(&self.rot_sin) {
            let p = c.norm_sqr();
            a += p * rc;
            b += p * rs;
        }
        PhaseDistribution {
            contrast: self.params.contrast(),
            cos_moment: a,
            sin_moment: b,
        }
    }

    /// Applies the kernel for `phase` in place, renormalizes, and returns the
    /// phase distribution and `<J_z>` of the updated state. The state is
    /// unspecified after an error.
    pub fn apply(&self, state: &mut CollectiveState, phase: f64) -> Result<StepOutcome> {
        let dim = self.rot_cos.len();
        debug_assert_eq!(state.dim(), dim);
        // K(n) = (sqrt T + sqrt R) cos(theta) + i (sqrt T - sqrt R) sin(theta)
        // with theta = (phi n - phase) / 2.
        let (ws, wc) = (-0.5 * phase).sin_cos();
        let amps = &mut state.amplitudes_mut()[..dim];
        let (pc, ps) = (&self.plus_cos[..dim], &self.plus_sin[..dim]);
        let (mc, ms) = (&self.minus_cos[..dim], &self.minus_sin[..dim]);
        let (rc, rs) = (&self.rot_cos[..dim], &self.rot_sin[..dim]);
        // Four independent accumulator lanes per moment let the reductions
        // vectorize; the lane split is fixed, so results stay deterministic.
        let (mut norm4, mut a4, mut b4, mut first4) = ([0.0f64; 4], [0.0f64; 4], [0.0f64; 4], [0.0f64; 4]);
        let body = dim - dim % 4;
        for k0 in (0..body).step_by(4) {
            for j in 0..4 {
                let k = k0 + j;
                let kr = pc[k] * wc - ps[k] * ws;
                let ki = ms[k] * wc + mc[k] * ws;
                let c = amps[k];
                let (re, im) = (c.re * kr - c.im * ki, c.re * ki + c.im * kr);
                amps[k] = Complex64::new(re, im);
                let p = re * re + im * im;
                norm4[j] += p;
                a4[j] += p * rc[k];
                b4[j] += p * rs[k];
                first4[j] += p * k as f64;
            }
        }
        for k in body..dim {
            let kr = pc[k] * wc - ps[k] * ws;
            let ki = ms[k] * wc + mc[k] * ws;
            let c = amps[k];
            let (re, im) = (c.re * kr - c.im * ki, c.re * ki + c.im * kr);
            amps[k] = Complex64::new(re, im);
            let p = re * re + im * im;
            norm4[0] += p;
            a4[0] += p * rc[k];
            b4[0] += p * rs[k];
            first4[0] += p * k as f64;
        }
        let total = |v: [f64; 4]| (v[0] + v[1]) + (v[2] + v[3]);
        let (norm, a, b, first) = (total(norm4), total(a4), total(b4), total(first4));
        if !(norm >= DEGENERATE_NORM) || !norm.is_finite() {
            return Err(Error::DegenerateKernel { norm });
        }
        let scale = norm.sqrt().recip();
        let floor = NEGLIGIBLE_PROBABILITY * norm;
        for c in amps.iter_mut() {
            // Levels this improbable only ever decay further; flushing them
            // keeps the arithmetic out of the slow subnormal range.
            *c = if c.norm_sqr() < floor {
                Complex64::new(0.0, 0.0)
            } else {
                *c * scale
            };
        }
        Ok(StepOutcome {
            distribution: PhaseDistribution {
                contrast: self.params.contrast(),
                cos_moment: a / norm,
                sin_moment: b / norm,
            },
            mean_jz: first / norm - 0.5 * (dim - 1) as f64,
        })
    }
}

/// Result of one [`Detector::apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub distribution: PhaseDistribution,
    pub mean_jz: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(r: f64, phi: f64) -> InterferometerParams {
        InterferometerParams::with_reflectivity(r, phi).unwrap()
    }

    /// Composite Simpson quadrature with many panels; independent of the
    /// closed-form CDF.
    fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn modulator_split_examples() {
        assert_eq!(modulator_split(Complex64::new(0.0, 0.0)).value, (1.0, 0.0));
        let (t, r) = modulator_split(Complex64::new(1.0, 0.0)).value;
        assert_eq!((t, r), (0.5, 0.5));
        let p = InterferometerParams::from_modulation(Complex64::new(1.0, 0.0), 1e-3, 0.0).unwrap();
        assert_eq!(p.value.contrast(), 1.0);
        assert!(!p.is_clean());

        let weak = modulator_split(Complex64::new(0.1, 0.0));
        assert!(weak.is_clean());
        let (t, r) = weak.value;
        assert!((r - 0.01 / 1.01).abs() < 1e-15);
        assert!((r - 0.0099).abs() < 1e-4);
        assert!((t + r - 1.0).abs() < 1e-15);
        let c = 2.0 * (r * t).sqrt();
        assert!((c - 0.198).abs() < 1e-3, "{c}");
    }

    #[test]
    fn params_validation() {
        assert!(InterferometerParams::new(0.6, 0.6, 1e-3, 0.0).is_err());
        assert!(InterferometerParams::new(-0.1, 1.1, 1e-3, 0.0).is_err());
        assert!(InterferometerParams::balanced(-1.0).is_err());
        let p = InterferometerParams::balanced(1e-3).unwrap();
        assert_eq!(p.contrast(), 1.0);
        assert!(params(0.3, 1e-3).contrast() < 1.0);
        assert_eq!(params(0.0, 1e-3).contrast(), 0.0);
    }

    #[test]
    fn event_from_arrival_time() {
        let omega = 2.0 * PI * 1e9;
        let e = DetectionEvent::from_arrival_time(3.25e-9, omega).unwrap();
        assert!((e.phase() - 0.5 * PI).abs() < 1e-6);
        let e = DetectionEvent::from_arrival_time(3.75e-9, omega).unwrap();
        assert!((e.phase() + 0.5 * PI).abs() < 1e-6);
        assert!(DetectionEvent::new(PI).is_err());
    }

    #[test]
    fn pdf_examples() {
        let dicke = CollectiveState::dicke(10, 0.0).unwrap();
        let p = params(0.5, 1e-3);
        assert!((phase_pdf(&dicke, &p, 0.0) - 1.0 / PI).abs() < 1e-15);
        for x in [-3.0, -1.0, 0.3, 2.0] {
            assert!((phase_pdf(&dicke, &p, x) - (1.0 + x.cos()) / TAU).abs() < 1e-15);
        }
        let css = CollectiveState::coherent(200).unwrap();
        let flat = params(0.0, 1e-3);
        for x in [-3.0, 0.0, 1.5] {
            assert!((phase_pdf(&css, &flat, x) - 1.0 / TAU).abs() < 1e-15);
        }
    }

    #[test]
    fn pdf_css_matches_direct_sum() {
        let css = CollectiveState::coherent(200).unwrap();
        let p = params(0.5, 1e-3);
        let direct: f64 = css
            .probabilities()
            .iter()
            .enumerate()
            .map(|(k, pk)| pk * (1.0 + (1e-3 * css.eigenvalue(k)).cos()))
            .sum::<f64>()
            / TAU;
        assert!((phase_pdf(&css, &p, 0.0) - direct).abs() < 1e-14);
        assert!((integrate(|x| phase_pdf(&css, &p, x), -PI, PI) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_endpoints_and_uniform() {
        let css = CollectiveState::coherent(31).unwrap();
        let p = params(0.2, 0.3);
        assert!(phase_cdf(&css, &p, -PI).abs() < 1e-12);
        assert!((phase_cdf(&css, &p, PI) - 1.0).abs() < 1e-12);
        let flat = params(0.0, 0.3);
        for x in [-2.0, 0.0, 1.0, 3.0] {
            assert!((phase_cdf(&css, &flat, x) - (x + PI) / TAU).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_matches_quadrature() {
        let dicke = CollectiveState::dicke(4, 0.0).unwrap();
        let p = params(0.5, 1e-3);
        assert!((phase_cdf(&dicke, &p, 0.0) - 0.5).abs() < 1e-12);
        let states = [
            dicke,
            CollectiveState::coherent(40).unwrap(),
            CollectiveState::dicke(40, 7.0).unwrap(),
        ];
        for s in &states {
            for pr in [params(0.5, 0.05), params(0.1, 0.2)] {
                for x in [-2.5, -1.0, 0.0, 0.7, 3.0] {
                    let q = integrate(|t| phase_pdf(s, &pr, t), -PI, x);
                    assert!((phase_cdf(s, &pr, x) - q).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sample_examples() {
        let css = CollectiveState::coherent(20).unwrap();
        assert_eq!(sample_phase(&css, &params(0.5, 1e-2), 0.0).phase(), -PI);
        let e = sample_phase(&css, &params(0.0, 1e-2), 0.75);
        assert!((e.phase() - 0.5 * PI).abs() < 1e-9);
        let dicke = CollectiveState::dicke(20, 0.0).unwrap();
        let e = sample_phase(&dicke, &params(0.5, 1e-2), 0.5);
        assert!(e.phase().abs() < 1e-9);
        let e = sample_phase(&dicke, &params(0.5, 1e-2), 1.0 - 1e-17);
        assert!(e.phase() < PI);
    }

    #[test]
    fn sample_inverts_cdf() {
        let s = CollectiveState::coherent(50).unwrap();
        let p = params(0.5, 0.1);
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let x = sample_phase(&s, &p, u).phase();
            assert!((phase_cdf(&s, &p, x) - u).abs() < 1e-10);
        }
    }

    #[test]
    fn dark_fringe_annihilates_amplitude() {
        let s = CollectiveState::coherent(4).unwrap();
        let p = params(0.5, 0.5);
        // phi n - x = pi for n = 1 with x = 0.5 - pi.
        let e = DetectionEvent::new(0.5 - PI).unwrap();
        let t = apply_detection(&s, &p, e).unwrap();
        let k = t.index_of(1.0).unwrap();
        assert!(t.amplitudes()[k].norm() < 1e-15);
    }

    #[test]
    fn no_contrast_means_no_backaction() {
        let s = CollectiveState::coherent(30).unwrap();
        let p = params(0.0, 0.3);
        let t = apply_detection(&s, &p, DetectionEvent::new(1.2).unwrap()).unwrap();
        // R = 0 leaves only a J_z rotation: moduli are untouched.
        for (a, b) in s.amplitudes().iter().zip(t.amplitudes()) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn posterior_matches_direct_computation() {
        let s = CollectiveState::coherent(200).unwrap();
        let p = params(0.5, 1e-3);
        let t = apply_detection(&s, &p, DetectionEvent::new(0.0).unwrap()).unwrap();
        let mut w: Vec<f64> = s
            .probabilities()
            .iter()
            .enumerate()
            .map(|(k, pk)| pk * (1.0 + (1e-3 * s.eigenvalue(k)).cos()))
            .collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        for (a, b) in t.probabilities().iter().zip(&w) {
            assert!((a - b).abs() < 1e-15);
        }
        let m = t.moments();
        let direct_var: f64 = w.iter().enumerate().map(|(k, x)| x * (k as f64 - 100.0).powi(2)).sum();
        assert!(m.mean_jz.abs() < 1e-12);
        assert!((m.var_jz - direct_var).abs() < 1e-10);
    }

    #[test]
    fn kernel_modulus_is_fringe() {
        let p = params(0.3, 0.2);
        let k = detection_kernel(&p, 0.4);
        for n in [-3.0, 0.0, 5.0] {
            let expected = 1.0 + p.contrast() * (0.2 * n - 0.4f64).cos();
            assert!((k(n).norm_sqr() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn backaction_weight_basics() {
        let p = params(0.3, 0.2);
        assert_eq!(backaction_weight(&p, &[], 3.0), 0.0);
        let one = backaction_weight(&p, &[0.4], 2.0);
        assert!((one - (1.0 + p.contrast() * (0.4f64 - 0.4).cos()).ln()).abs() < 1e-15);
    }

    #[test]
    fn detector_matches_generic_path() {
        let p = params(0.3, 0.07);
        let det = Detector::new(p, 40);
        let mut fast = CollectiveState::coherent(40).unwrap();
        let mut slow = fast.clone();
        for x in [0.3, -2.0, 1.1, 3.0, -0.2] {
            let out = det.apply(&mut fast, x).unwrap();
            let dist = out.distribution;
            slow = apply_detection(&slow, &p, DetectionEvent::new(x).unwrap()).unwrap();
            assert!((out.mean_jz - slow.moments().mean_jz).abs() < 1e-12);
            let d2 = PhaseDistribution::of(&slow, &p);
            assert!((dist.cos_moment - d2.cos_moment).abs() < 1e-13);
            assert!((dist.sin_moment - d2.sin_moment).abs() < 1e-13);
        }
        for (a, b) in fast.amplitudes().iter().zip(slow.amplitudes()) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
