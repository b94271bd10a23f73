//! Monte-Carlo ensembles of measurement trajectories.
//!
//! Each trajectory starts from the coherent spin state and, photon after
//! photon, samples a detected phase by inverting its CDF and applies the
//! conditional update. Trajectory `i` draws its uniforms from a ChaCha8
//! stream keyed by `(seed, i)`, so results do not depend on scheduling.
//! Ensemble sums are formed over fixed-size index blocks in a fixed order,
//! which makes them bit-identical for any worker count.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::PhaseOffsetEstimator;
use crate::error::{Error, Result};
use crate::measurement::{Detector, InterferometerParams};
use crate::spin_state::{CollectiveState, SpinMoments};
use crate::stats::pairwise_sum;

/// Trajectories aggregated per block; fixed so the reduction order is too.
const BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_atoms: u32,
    pub n_photons: u64,
    pub n_trajectories: usize,
    pub params: InterferometerParams,
    pub seed: u64,
    pub record_stride: u64,
    /// How many leading trajectories keep their full moment series in the result.
    pub keep_series: usize,
    /// Keep final amplitudes of the retained trajectories.
    pub keep_amplitudes: bool,
}

impl EnsembleConfig {
    pub fn new(n_atoms: u32, n_photons: u64, n_trajectories: usize, params: InterferometerParams, seed: u64) -> Self {
        Self {
            n_atoms,
            n_photons,
            n_trajectories,
            params,
            seed,
            record_stride: default_stride(n_photons),
            keep_series: 0,
            keep_amplitudes: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::invalid("n_atoms", "must be at least 1"));
        }
        if self.n_trajectories == 0 {
            return Err(Error::invalid("n_trajectories", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Photon counts at which moments are logged: `0, s, 2s, ...` and `N_p`.
    pub fn record_steps(&self) -> Vec<u64> {
        let mut steps: Vec<u64> = (0..=self.n_photons).step_by(self.record_stride as usize).collect();
        if *steps.last().unwrap() != self.n_photons {
            steps.push(self.n_photons);
        }
        steps
    }
}

/// 100 for long runs, otherwise every photon down to about 1000 records.
pub fn default_stride(n_photons: u64) -> u64 {
    if n_photons >= 100_000 {
        100
    } else {
        (n_photons / 1000).max(1)
    }
}

/// Moments logged at one photon count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub step: u64,
    pub mean_jz: f64,
    pub var_jz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFailure {
    pub trajectory: usize,
    pub step: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub index: usize,
    pub series: Vec<MomentRecord>,
    pub offset: PhaseOffsetEstimator,
    pub final_amplitudes: Option<Vec<Complex64>>,
    pub failure: Option<TrajectoryFailure>,
}

impl Trajectory {
    pub fn final_moments(&self) -> SpinMoments {
        let last = self.series.last().expect("series always holds step 0");
        SpinMoments {
            mean_jz: last.mean_jz,
            var_jz: last.var_jz,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Uniform stream of trajectory `index`.
pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs trajectory `index` of `config`.
pub fn run_trajectory(config: &EnsembleConfig, index: usize) -> Result<Trajectory> {
    config.validate()?;
    let steps = config.record_steps();
    Ok(simulate(config, index, &steps, config.keep_amplitudes))
}

/// Like [`run_trajectory`] but also returns the detected phases and the
/// final state. Intended for checks on single trajectories.
pub fn run_trajectory_with_record(
    config: &EnsembleConfig,
    index: usize,
) -> Result<(Trajectory, Vec<f64>, CollectiveState)> {
    config.validate()?;
    let steps = config.record_steps();
    let mut phases = Vec::with_capacity(config.n_photons as usize);
    let (traj, state) = simulate_inner(config, index, &steps, config.keep_amplitudes, Some(&mut phases));
    Ok((traj, phases, state))
}

fn simulate(config: &EnsembleConfig, index: usize, steps: &[u64], keep_amplitudes: bool) -> Trajectory {
    simulate_inner(config, index, steps, keep_amplitudes, None).0
}

fn simulate_inner(
    config: &EnsembleConfig,
    index: usize,
    steps: &[u64],
    keep_amplitudes: bool,
    mut phases: Option<&mut Vec<f64>>,
) -> (Trajectory, CollectiveState) {
    let params = config.params;
    let detector = Detector::new(params, config.n_atoms);
    let mut state = CollectiveState::coherent(config.n_atoms).expect("validated n_atoms");
    let mut rng = trajectory_rng(config.seed, index);
    let mut offset = PhaseOffsetEstimator::new();
    let mut series = Vec::with_capacity(steps.len());
    let m0 = state.moments();
    series.push(MomentRecord {
        step: 0,
        mean_jz: m0.mean_jz,
        var_jz: m0.var_jz,
    });
    let mut next_record = 1;
    let mut dist = detector.distribution(&state);
    let mut mean = m0.mean_jz;
    let mut failure = None;
    for step in 1..=config.n_photons {
        let phase = dist.sample(rng.gen::<f64>()).phase();
        offset.push(&params, phase, mean);
        if let Some(p) = phases.as_deref_mut() {
            p.push(phase);
        }
        match detector.apply(&mut state, phase) {
            Ok(out) => {
                dist = out.distribution;
                mean = out.mean_jz;
            }
            Err(e) => {
                failure = Some(TrajectoryFailure {
                    trajectory: index,
                    step,
                    error: e.to_string(),
                });
                break;
            }
        }
        if next_record < steps.len() && steps[next_record] == step {
            let m = state.moments();
            series.push(MomentRecord {
                step,
                mean_jz: m.mean_jz,
                var_jz: m.var_jz,
            });
            next_record += 1;
        }
    }
    let traj = Trajectory {
        index,
        series,
        offset,
        final_amplitudes: (keep_amplitudes && failure.is_none()).then(|| state.amplitudes().to_vec()),
        failure,
    };
    (traj, state)
}

/// Ensemble statistics at each recorded photon count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub steps: Vec<u64>,
    pub mean_var_jz: Vec<f64>,
    pub sem_var_jz: Vec<f64>,
    pub mean_mean_jz: Vec<f64>,
    pub sem_mean_jz: Vec<f64>,
}

/// Counts of final `<J_z>` rounded to the nearest Dicke level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub levels: Vec<f64>,
    pub counts: Vec<u64>,
    /// `|<n|psi(0)>|^2` for the coherent initial state.
    pub born_probability: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: EnsembleConfig,
    pub series: EnsembleSeries,
    /// Final moments per trajectory, `None` for failed ones.
    pub final_moments: Vec<Option<SpinMoments>>,
    /// Phase-offset estimators per trajectory.
    pub offsets: Vec<PhaseOffsetEstimator>,
    pub histogram: Histogram,
    pub failures: Vec<TrajectoryFailure>,
    /// The first `keep_series` trajectories in full.
    pub kept: Vec<Trajectory>,
    pub provenance: Provenance,
}

impl RunResult {
    pub fn n_succeeded(&self) -> usize {
        self.final_moments.iter().filter(|m| m.is_some()).count()
    }
}

struct BlockSums {
    count: Vec<f64>,
    var: Vec<f64>,
    var_sq: Vec<f64>,
    mean: Vec<f64>,
    mean_sq: Vec<f64>,
}

fn block_sums(trajs: &[Trajectory], n_records: usize) -> BlockSums {
    let ok: Vec<&Trajectory> = trajs.iter().filter(|t| t.is_ok()).collect();
    let column = |f: &dyn Fn(&MomentRecord) -> f64| -> Vec<f64> {
        (0..n_records)
            .map(|r| {
                let vals: Vec<f64> = ok.iter().map(|t| f(&t.series[r])).collect();
                pairwise_sum(&vals)
            })
            .collect()
    };
    BlockSums {
        count: vec![ok.len() as f64; n_records],
        var: column(&|m| m.var_jz),
        var_sq: column(&|m| m.var_jz * m.var_jz),
        mean: column(&|m| m.mean_jz),
        mean_sq: column(&|m| m.mean_jz * m.mean_jz),
    }
}

/// Runs the ensemble on the current rayon pool.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<RunResult> {
    config.validate()?;
    let steps = config.record_steps();
    let n_records = steps.len();
    let n_blocks = config.n_trajectories.div_ceil(BLOCK);

    let mut sums: Vec<BlockSums> = Vec::with_capacity(n_blocks);
    let mut final_moments = Vec::with_capacity(config.n_trajectories);
    let mut offsets = Vec::with_capacity(config.n_trajectories);
    let mut failures = Vec::new();
    let mut kept = Vec::new();

    for block in 0..n_blocks {
        let start = block * BLOCK;
        let end = (start + BLOCK).min(config.n_trajectories);
        let trajs: Vec<Trajectory> = (start..end)
            .into_par_iter()
            .map(|i| simulate(config, i, &steps, config.keep_amplitudes && i < config.keep_series))
            .collect();
        sums.push(block_sums(&trajs, n_records));
        for t in trajs {
            // A failed trajectory has a truncated series; keep it out of sums.
            final_moments.push(t.is_ok().then(|| t.final_moments()));
            offsets.push(t.offset);
            if let Some(f) = &t.failure {
                failures.push(f.clone());
            }
            if t.index < config.keep_series {
                kept.push(t);
            }
        }
    }

    let reduce = |pick: &dyn Fn(&BlockSums) -> &Vec<f64>| -> Vec<f64> {
        (0..n_records)
            .map(|r| {
                let vals: Vec<f64> = sums.iter().map(|b| pick(b)[r]).collect();
                pairwise_sum(&vals)
            })
            .collect()
    };
    let count = reduce(&|b| &b.count);
    let (var, var_sq) = (reduce(&|b| &b.var), reduce(&|b| &b.var_sq));
    let (mean, mean_sq) = (reduce(&|b| &b.mean), reduce(&|b| &b.mean_sq));
    let moments = |s: &[f64], s2: &[f64]| -> (Vec<f64>, Vec<f64>) {
        s.iter()
            .zip(s2)
            .zip(&count)
            .map(|((s, s2), n)| {
                let m = s / n;
                let sample_var = if *n > 1.0 {
                    ((s2 - n * m * m) / (n - 1.0)).max(0.0)
                } else {
                    f64::NAN
                };
                (m, (sample_var / n).sqrt())
            })
            .unzip()
    };
    let (mean_var_jz, sem_var_jz) = moments(&var, &var_sq);
    let (mean_mean_jz, sem_mean_jz) = moments(&mean, &mean_sq);

    let histogram = histogram_of(config.n_atoms, &final_moments)?;
    Ok(RunResult {
        config: config.clone(),
        series: EnsembleSeries {
            steps,
            mean_var_jz,
            sem_var_jz,
            mean_mean_jz,
            sem_mean_jz,
        },
        final_moments,
        offsets,
        histogram,
        failures,
        kept,
        provenance: Provenance {
            tool: "qndsim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
        },
    })
}

/// Runs the ensemble on a dedicated pool of `threads` workers.
pub fn run_ensemble_with_threads(config: &EnsembleConfig, threads: usize) -> Result<RunResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| run_ensemble(config))
}

/// Histogram of final means of successful trajectories over Dicke levels.
pub fn histogram_of(n_atoms: u32, final_moments: &[Option<SpinMoments>]) -> Result<Histogram> {
    let css = CollectiveState::coherent(n_atoms)?;
    let mut counts = vec![0u64; css.dim()];
    let half = 0.5 * n_atoms as f64;
    for m in final_moments.iter().flatten() {
        let k = (m.mean_jz + half).round().clamp(0.0, n_atoms as f64) as usize;
        counts[k] += 1;
    }
    Ok(Histogram {
        levels: css.eigenvalues().collect(),
        counts,
        born_probability: css.probabilities(),
    })
}
