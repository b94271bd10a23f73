//! Collective atomic state in the Dicke (`J_z` eigen-) basis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

/// Below this squared norm a kernel is considered to have annihilated the state.
pub const DEGENERATE_NORM: f64 = 1e-300;

/// Pure state `sum_n c_n |n>` of `N_at` two-level atoms in the symmetric subspace.
///
/// Amplitude `k` holds `c_n` for `n = k - N_at/2`, so `n` is half-integer
/// when `N_at` is odd.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveState {
    n_atoms: u32,
    amplitudes: Vec<Complex64>,
}

/// First two moments of the `J_z` distribution, in units of hbar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub mean_jz: f64,
    pub var_jz: f64,
}

impl CollectiveState {
    /// Coherent spin state polarized along `J_x`: binomial amplitudes
    /// `c_n = 2^{-N/2} sqrt(N! / ((N/2+n)! (N/2-n)!))`.
    pub fn coherent(n_atoms: u32) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::invalid("n_atoms", "must be at least 1"));
        }
        let n = n_atoms as f64;
        let ln_n_fact = ln_gamma(n + 1.0);
        let ln_half_pow = n * std::f64::consts::LN_2;
        let amplitudes = (0..=n_atoms)
            .map(|k| {
                let k = k as f64;
                let ln_p = ln_n_fact - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0) - ln_half_pow;
                Complex64::new((0.5 * ln_p).exp(), 0.0)
            })
            .collect();
        let mut state = Self { n_atoms, amplitudes };
        state.normalize()?;
        Ok(state)
    }

    /// Dicke state `|n>`.
    pub fn dicke(n_atoms: u32, n: f64) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::invalid("n_atoms", "must be at least 1"));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_atoms as usize + 1];
        let k = index_for(n_atoms, n)
            .ok_or_else(|| Error::invalid("n", format!("{n} is not a J_z eigenvalue for N_at={n_atoms}")))?;
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(Self { n_atoms, amplitudes })
    }

    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(n_atoms: u32, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::invalid("n_atoms", "must be at least 1"));
        }
        if amplitudes.len() != n_atoms as usize + 1 {
            return Err(Error::invalid(
                "amplitudes",
                format!("expected {} entries, got {}", n_atoms + 1, amplitudes.len()),
            ));
        }
        if amplitudes.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("amplitudes", "non-finite entry"));
        }
        let mut state = Self { n_atoms, amplitudes };
        state.normalize()?;
        Ok(state)
    }

    pub fn n_atoms(&self) -> u32 {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `J_z` eigenvalue carried by amplitude index `k`.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        k as f64 - 0.5 * self.n_atoms as f64
    }

    /// All `J_z` eigenvalues, in storage order.
    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim()).map(|k| self.eigenvalue(k))
    }

    /// Storage index of eigenvalue `n`, if it is one.
    pub fn index_of(&self, n: f64) -> Option<usize> {
        index_for(self.n_atoms, n)
    }

    /// `|c_n|^2` in storage order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        pairwise_sum(&self.probabilities())
    }

    pub fn moments(&self) -> SpinMoments {
        moments_of(self.n_atoms, &self.probabilities())
    }

    /// Multiplies each `c_n` by `kernel(n)` and renormalizes.
    pub fn apply_diagonal_kernel<K>(&self, kernel: K) -> Result<Self>
    where
        K: Fn(f64) -> Complex64,
    {
        let mut next = self.clone();
        next.apply_diagonal_kernel_in_place(kernel)?;
        Ok(next)
    }

    /// In-place form of [`apply_diagonal_kernel`](Self::apply_diagonal_kernel).
    /// On error the state is left untouched.
    pub fn apply_diagonal_kernel_in_place<K>(&mut self, kernel: K) -> Result<()>
    where
        K: Fn(f64) -> Complex64,
    {
        let half = 0.5 * self.n_atoms as f64;
        let updated: Vec<Complex64> = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, c)| c * kernel(k as f64 - half))
            .collect();
        let norm = norm_sqr_of(&updated);
        if !(norm >= DEGENERATE_NORM) || !norm.is_finite() {
            return Err(Error::DegenerateKernel { norm });
        }
        let scale = norm.sqrt().recip();
        self.amplitudes = updated.into_iter().map(|c| c * scale).collect();
        Ok(())
    }

    /// Raw access for steppers that apply kernels from lookup tables; callers
    /// must call `normalize` afterwards.
    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub(crate) fn normalize(&mut self) -> Result<()> {
        let norm = norm_sqr_of(&self.amplitudes);
        if !(norm >= DEGENERATE_NORM) || !norm.is_finite() {
            return Err(Error::DegenerateKernel { norm });
        }
        let scale = norm.sqrt().recip();
        for c in &mut self.amplitudes {
            *c *= scale;
        }
        Ok(())
    }
}

fn index_for(n_atoms: u32, n: f64) -> Option<usize> {
    let k = n + 0.5 * n_atoms as f64;
    if k < 0.0 || k > n_atoms as f64 || k.fract() != 0.0 {
        return None;
    }
    Some(k as usize)
}

fn norm_sqr_of(amplitudes: &[Complex64]) -> f64 {
    let probs: Vec<f64> = amplitudes.iter().map(|c| c.norm_sqr()).collect();
    pairwise_sum(&probs)
}

/// Moments of a normalized population distribution over the Dicke ladder.
pub fn moments_of(n_atoms: u32, probabilities: &[f64]) -> SpinMoments {
    let half = 0.5 * n_atoms as f64;
    let mut mean = 0.0;
    for (k, p) in probabilities.iter().enumerate() {
        mean += (k as f64 - half) * p;
    }
    let mut var = 0.0;
    for (k, p) in probabilities.iter().enumerate() {
        let d = k as f64 - half - mean;
        var += d * d * p;
    }
    SpinMoments {
        mean_jz: mean,
        var_jz: var,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn css_two_atoms() {
        let s = CollectiveState::coherent(2).unwrap();
        let c = s.amplitudes();
        assert!(close(c[0].re, 0.5, 1e-15));
        assert!(close(c[1].re, std::f64::consts::FRAC_1_SQRT_2, 1e-15));
        assert!(close(c[2].re, 0.5, 1e-15));
    }

    #[test]
    fn css_single_atom_is_half_integer_ladder() {
        let s = CollectiveState::coherent(1).unwrap();
        assert_eq!(s.eigenvalue(0), -0.5);
        assert_eq!(s.eigenvalue(1), 0.5);
        for c in s.amplitudes() {
            assert!(close(c.re, std::f64::consts::FRAC_1_SQRT_2, 1e-15));
        }
    }

    #[test]
    fn css_close_to_gaussian_for_200_atoms() {
        let n_at = 200u32;
        let s = CollectiveState::coherent(n_at).unwrap();
        let gauss: Vec<f64> = s.eigenvalues().map(|n| (-2.0 * n * n / n_at as f64).exp()).collect();
        let z: f64 = gauss.iter().sum();
        let max_diff = s
            .probabilities()
            .iter()
            .zip(&gauss)
            .map(|(p, g)| (p - g / z).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-3, "max diff {max_diff}");
    }

    #[test]
    fn css_is_symmetric_and_centered() {
        for n_at in [1u32, 2, 7, 200, 1001] {
            let s = CollectiveState::coherent(n_at).unwrap();
            let c = s.amplitudes();
            for k in 0..c.len() {
                assert!((c[k] - c[c.len() - 1 - k]).norm() <= 1e-12 * c[k].norm());
            }
            assert!(s.moments().mean_jz.abs() < 1e-12);
        }
    }

    #[test]
    fn css_variance_is_quarter_n() {
        for n_at in [1u32, 2, 3, 10, 200, 1234, 10_000] {
            let m = CollectiveState::coherent(n_at).unwrap().moments();
            let expected = n_at as f64 / 4.0;
            assert!(
                ((m.var_jz - expected) / expected).abs() < 1e-9,
                "N_at={n_at}: {} vs {expected}",
                m.var_jz
            );
        }
    }

    #[test]
    fn css_200_moments() {
        let m = CollectiveState::coherent(200).unwrap().moments();
        assert!(m.mean_jz.abs() < 1e-12);
        assert!(close(m.var_jz, 50.0, 1e-9));
    }

    #[test]
    fn dicke_moments() {
        let m = CollectiveState::dicke(10, 3.0).unwrap().moments();
        assert_eq!(m.mean_jz, 3.0);
        assert_eq!(m.var_jz, 0.0);
        assert!(CollectiveState::dicke(10, 5.5).is_err());
        assert!(CollectiveState::dicke(10, 6.0).is_err());
    }

    #[test]
    fn two_level_superposition_has_quarter_variance() {
        let mut amps = vec![Complex64::new(0.0, 0.0); 11];
        amps[7] = Complex64::new(1.0, 0.0);
        amps[8] = Complex64::new(1.0, 0.0);
        let s = CollectiveState::from_amplitudes(10, amps).unwrap();
        let m = s.moments();
        assert!(close(m.mean_jz, 2.5, 1e-15));
        assert!(close(m.var_jz, 0.25, 1e-15));
    }

    #[test]
    fn identity_kernel_leaves_state_unchanged() {
        let s = CollectiveState::coherent(50).unwrap();
        let t = s.apply_diagonal_kernel(|_| Complex64::new(1.0, 0.0)).unwrap();
        for (a, b) in s.amplitudes().iter().zip(t.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn indicator_kernel_projects_onto_dicke_state() {
        let s = CollectiveState::coherent(20).unwrap();
        let t = s
            .apply_diagonal_kernel(|n| Complex64::new(if n == -3.0 { 1.0 } else { 0.0 }, 0.0))
            .unwrap();
        let m = t.moments();
        assert_eq!(m.mean_jz, -3.0);
        assert_eq!(m.var_jz, 0.0);
        assert!(close(t.norm_sqr(), 1.0, 1e-15));
    }

    #[test]
    fn gaussian_kernel_variance_matches_summation() {
        let n_at = 200u32;
        let s = CollectiveState::coherent(n_at).unwrap();
        let t = s
            .apply_diagonal_kernel(|n| Complex64::new((-n * n).exp(), 0.0))
            .unwrap();
        // Brute-force: binomial weights times exp(-2 n^2), summed directly.
        let mut w = Vec::new();
        let mut ln_binom = 0.0f64;
        for k in 0..=n_at {
            if k > 0 {
                ln_binom += ((n_at - k + 1) as f64).ln() - (k as f64).ln();
            }
            let n = k as f64 - 100.0;
            w.push((ln_binom - 2.0 * n * n).exp());
        }
        let z: f64 = w.iter().sum();
        let mean: f64 = w.iter().enumerate().map(|(k, x)| (k as f64 - 100.0) * x).sum::<f64>() / z;
        let var: f64 = w
            .iter()
            .enumerate()
            .map(|(k, x)| (k as f64 - 100.0 - mean).powi(2) * x)
            .sum::<f64>()
            / z;
        assert!(close(t.moments().var_jz, var, 1e-12));
        // The continuum estimate 1/(2 (2/N + 2)) = 0.2488 does not hold on the
        // integer lattice once the width drops below one level.
        assert!(close(var, 0.2133, 1e-3), "{var}");
    }

    #[test]
    fn zero_kernel_is_degenerate() {
        let s = CollectiveState::coherent(4).unwrap();
        let before = s.clone();
        let mut t = s;
        let err = t
            .apply_diagonal_kernel_in_place(|_| Complex64::new(0.0, 0.0))
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateKernel { .. }));
        assert_eq!(t, before);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(CollectiveState::coherent(0).is_err());
        assert!(CollectiveState::from_amplitudes(3, vec![Complex64::new(1.0, 0.0); 3]).is_err());
        assert!(CollectiveState::from_amplitudes(1, vec![Complex64::new(0.0, 0.0); 2]).is_err());
    }
}
