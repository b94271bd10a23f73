//! `qndsim`: trajectory simulations, closed-form curves, probe budgets and
//! the consistency suite.
//!
//! Exit codes: 0 success, 1 failed check, 2 bad configuration or input,
//! 3 simulation failure, 4 no balanced probe frequency.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::ConfigFile;
use output::{write_csv, Cell, Manifest};
use qndsim::analytics::{long_time_bounds, measurement_strength, short_time_variance, WeakCouplingTheory};
use qndsim::decoherence::{AtomicSpecies, ProbeGeometry, SqueezingBudget};
use qndsim::ensemble::{run_ensemble, run_ensemble_with_threads, EnsembleConfig, RunResult};
use qndsim::{verify, Error, InterferometerParams};

/// Beam area giving `rho_0 ~ 2400` for 10^7 Rb-87 atoms on the D2 line.
const DEFAULT_BEAM_AREA: f64 = 2.02e-10;

#[derive(Parser)]
#[command(
    name = "qndsim",
    version,
    about = "Heterodyne QND measurement trajectories of a collective spin"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble of measurement trajectories and write CSV tables.
    Simulate(SimulateArgs),
    /// Tabulate the closed-form short- and long-time predictions.
    Analytic(AnalyticArgs),
    /// Balance the probe for an atomic species and optimize the squeezing.
    Budget(BudgetArgs),
    /// Run the cross-module consistency checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat `key = value` file with the same keys as the long flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of atoms N_at.
    #[arg(long)]
    atoms: Option<u32>,
    /// Phase shift per atom, rad.
    #[arg(long)]
    phi: Option<f64>,
    /// Interferometer reflectivity R (T = 1 - R).
    #[arg(long = "R")]
    r: Option<f64>,
    /// Detected photons per trajectory.
    #[arg(long)]
    photons: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Photons between recorded moments (default: 100 for long runs).
    #[arg(long)]
    stride: Option<u64>,
    /// Trajectories written in full to trajectories.csv.
    #[arg(long = "keep-trajectories")]
    keep_trajectories: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "QNDSIM_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, default_value_t = 200)]
    atoms: u32,
    #[arg(long, default_value_t = 1e-3)]
    phi: f64,
    #[arg(long = "R", default_value_t = 0.5)]
    r: f64,
    /// Smallest photon number of the logarithmic grid.
    #[arg(long = "np-min", default_value_t = 1e2)]
    np_min: f64,
    /// Largest photon number of the logarithmic grid.
    #[arg(long = "np-max", default_value_t = 1e7)]
    np_max: f64,
    /// Grid points (0 writes only the header).
    #[arg(long, default_value_t = 51)]
    points: usize,
    #[arg(long, default_value = "qndsim-analytic")]
    out: PathBuf,
}

#[derive(Args)]
struct BudgetArgs {
    /// Species file (default: bundled Rb-87 D2 data).
    #[arg(long)]
    species: Option<PathBuf>,
    /// Beam area, m^2.
    #[arg(long, conflicts_with = "waist")]
    area: Option<f64>,
    /// Gaussian beam waist, m (area pi w^2).
    #[arg(long)]
    waist: Option<f64>,
    #[arg(long, default_value_t = 1e7)]
    atoms: f64,
    /// Interferometer contrast, about twice the modulation depth.
    #[arg(long, default_value_t = 0.2)]
    contrast: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// List the checks and exit.
    #[arg(long)]
    list: bool,
    /// Multiplies every check threshold.
    #[arg(long = "tolerance-scale", default_value_t = 1.0)]
    tolerance_scale: f64,
    /// Run only the named check (repeatable).
    #[arg(long)]
    check: Vec<String>,
}

enum Failure {
    ChecksFailed,
    Config(String),
    Simulation(String),
    NoRoot(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::ChecksFailed => 1,
            Failure::Config(_) => 2,
            Failure::Simulation(_) => 3,
            Failure::NoRoot(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::SpeciesParse { .. } => Failure::Config(e.to_string()),
            Error::NoRoot { .. } => Failure::NoRoot(e.to_string()),
            Error::DegenerateKernel { .. } | Error::SingularBin { .. } => Failure::Simulation(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Simulation(format!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analytic(a) => analytic(a),
        Command::Budget(a) => budget(a),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::ChecksFailed => {}
                Failure::Config(m) | Failure::Simulation(m) | Failure::NoRoot(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

/// Resolved simulation settings, as recorded in the manifest.
#[derive(Debug, Serialize)]
struct SimulateSettings {
    atoms: u32,
    phi: f64,
    #[serde(rename = "R")]
    r: f64,
    photons: u64,
    trajectories: usize,
    seed: u64,
    stride: u64,
    keep_trajectories: usize,
    threads: Option<usize>,
}

const SIMULATE_KEYS: &[&str] = &[
    "atoms",
    "phi",
    "R",
    "photons",
    "trajectories",
    "seed",
    "stride",
    "keep-trajectories",
    "threads",
    "out",
];

fn resolve_simulate(a: &SimulateArgs) -> Result<(SimulateSettings, PathBuf), Failure> {
    let file = match &a.config {
        Some(p) => ConfigFile::load(p, SIMULATE_KEYS).map_err(Failure::Config)?,
        None => ConfigFile::default(),
    };
    macro_rules! pick {
        ($flag:expr, $key:literal, $default:expr) => {
            match $flag {
                Some(v) => v,
                None => file.get($key).map_err(Failure::Config)?.unwrap_or($default),
            }
        };
    }
    let photons: u64 = pick!(a.photons, "photons", 1_000_000);
    let settings = SimulateSettings {
        atoms: pick!(a.atoms, "atoms", 200),
        phi: pick!(a.phi, "phi", 1e-3),
        r: pick!(a.r, "R", 0.5),
        photons,
        trajectories: pick!(a.trajectories, "trajectories", 1000),
        seed: pick!(a.seed, "seed", 0),
        stride: pick!(a.stride, "stride", qndsim::ensemble::default_stride(photons)),
        keep_trajectories: pick!(a.keep_trajectories, "keep-trajectories", 20),
        threads: match a.threads {
            Some(t) => Some(t),
            None => file.get("threads").map_err(Failure::Config)?,
        },
    };
    let out = pick!(a.out.clone(), "out", PathBuf::from("qndsim-out"));
    Ok((settings, out))
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let (s, out) = resolve_simulate(&a)?;
    let params = InterferometerParams::with_reflectivity(s.r, s.phi)?;
    let mut config = EnsembleConfig::new(s.atoms, s.photons, s.trajectories, params, s.seed);
    config.record_stride = s.stride;
    config.keep_series = s.keep_trajectories.min(s.trajectories);
    config.validate()?;
    if s.threads == Some(0) {
        return Err(Failure::Config("`threads` must be at least 1".into()));
    }
    std::fs::create_dir_all(&out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", out.display())))?;

    let result = match s.threads {
        Some(t) => run_ensemble_with_threads(&config, t),
        None => run_ensemble(&config),
    }?;

    let mut manifest = Manifest::new("simulate", &s, Some(s.seed), &out);
    if let Some(p) = &a.config {
        manifest.inputs.push(p.display().to_string());
    }
    for path in write_simulation_tables(&out, &result).map_err(io_failure(&out))? {
        manifest.add_output(&path);
    }
    for f in &result.failures {
        manifest.warnings.push(format!(
            "trajectory {} failed at photon {}: {}",
            f.trajectory, f.step, f.error
        ));
    }
    manifest.write(&out).map_err(io_failure(&out))?;

    eprintln!(
        "{} of {} trajectories completed; tables in {}",
        result.n_succeeded(),
        s.trajectories,
        out.display()
    );
    if !result.failures.is_empty() {
        for w in &manifest.warnings {
            eprintln!("warning: {w}");
        }
        return Err(Failure::Simulation(format!(
            "{} trajectories failed",
            result.failures.len()
        )));
    }
    Ok(())
}

fn write_simulation_tables(out: &Path, r: &RunResult) -> std::io::Result<Vec<PathBuf>> {
    let params = &r.config.params;
    let m2 = measurement_strength(params);
    let trajectories = write_csv(
        out,
        "trajectories.csv",
        &["trajectory_id", "step", "mean_jz", "var_jz"],
        r.kept.iter().flat_map(|t| {
            t.series.iter().map(move |m| {
                vec![
                    Cell::Uint(t.index as u64),
                    Cell::Uint(m.step),
                    Cell::Real(m.mean_jz),
                    Cell::Real(m.var_jz),
                ]
            })
        }),
    )?;
    let ensemble = write_csv(
        out,
        "ensemble.csv",
        &["step", "mean_var_jz", "analytic_var_jz", "lower_bound", "upper_bound"],
        r.series.steps.iter().zip(&r.series.mean_var_jz).map(|(&step, &var)| {
            let n_p = step as f64;
            let (upper, lower) = long_time_bounds(m2, n_p).value;
            vec![
                Cell::Uint(step),
                Cell::Real(var),
                Cell::Real(short_time_variance(r.config.n_atoms, n_p, params)),
                Cell::Real(lower),
                Cell::Real(upper),
            ]
        }),
    )?;
    let h = &r.histogram;
    let histogram = write_csv(
        out,
        "histogram.csv",
        &["n_bin", "count", "born_probability"],
        h.levels
            .iter()
            .zip(&h.counts)
            .zip(&h.born_probability)
            .map(|((&n, &c), &p)| {
                // Levels are half-integers for odd N_at; the bin is labeled by 2n then.
                let label = if r.config.n_atoms.is_multiple_of(2) {
                    n as i64
                } else {
                    (2.0 * n) as i64
                };
                vec![Cell::Int(label), Cell::Uint(c), Cell::Real(p)]
            }),
    )?;
    Ok(vec![trajectories, ensemble, histogram])
}

#[derive(Debug, Serialize)]
struct AnalyticSettings {
    atoms: u32,
    phi: f64,
    #[serde(rename = "R")]
    r: f64,
    np_min: f64,
    np_max: f64,
    points: usize,
}

fn analytic(a: AnalyticArgs) -> Result<(), Failure> {
    let params = InterferometerParams::with_reflectivity(a.r, a.phi)?;
    if a.atoms == 0 {
        return Err(Failure::Config("`atoms` must be at least 1".into()));
    }
    if !(a.np_min > 0.0 && a.np_max >= a.np_min && a.np_max.is_finite()) {
        return Err(Failure::Config("need 0 < np-min <= np-max < inf".into()));
    }
    let grid: Vec<f64> = match a.points {
        0 => Vec::new(),
        1 => vec![a.np_min],
        n => {
            let (lo, hi) = (a.np_min.ln(), a.np_max.ln());
            (0..n)
                .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", a.out.display())))?;
    let m2 = measurement_strength(&params);
    let path = write_csv(
        &a.out,
        "analytic.csv",
        &["N_p", "xi2", "kappa2", "var_short", "lower_bound"],
        grid.iter().map(|&n_p| {
            let th = WeakCouplingTheory::new(a.atoms, n_p, &params, 0.0);
            vec![
                Cell::Real(n_p),
                Cell::Real(th.xi_squared),
                Cell::Real(th.kappa_squared),
                Cell::Real(short_time_variance(a.atoms, n_p, &params)),
                Cell::Real(long_time_bounds(m2, n_p).value.1),
            ]
        }),
    )
    .map_err(io_failure(&a.out))?;
    let settings = AnalyticSettings {
        atoms: a.atoms,
        phi: a.phi,
        r: a.r,
        np_min: a.np_min,
        np_max: a.np_max,
        points: a.points,
    };
    let mut manifest = Manifest::new("analytic", &settings, None, &a.out);
    manifest.add_output(&path);
    manifest.write(&a.out).map_err(io_failure(&a.out))?;
    Ok(())
}

fn budget(a: BudgetArgs) -> Result<(), Failure> {
    let species = match &a.species {
        Some(p) => AtomicSpecies::from_file(p)?,
        None => AtomicSpecies::rb87_d2(),
    };
    let geometry = match (a.area, a.waist) {
        (_, Some(w)) => ProbeGeometry::from_waist(w, a.atoms)?,
        (area, None) => ProbeGeometry::new(area.unwrap_or(DEFAULT_BEAM_AREA), a.atoms, 0.0)?,
    };
    if !(a.contrast > 0.0 && a.contrast <= 1.0) {
        return Err(Failure::Config(format!(
            "`contrast` must lie in (0, 1], got {}",
            a.contrast
        )));
    }
    let b = SqueezingBudget::optimal(&species, &geometry, a.contrast)?;
    let rows: [(&str, f64); 11] = [
        ("probe_hz", b.probe_hz),
        ("s_coupling", b.s_coupling),
        ("lineshape", b.lineshape),
        ("mu", b.mu),
        ("phi", b.phi),
        ("rho0", b.rho0),
        ("eta_opt", b.eta),
        ("xi2_opt", b.xi_squared),
        ("xi2_opt_db", -10.0 * b.xi_squared.log10()),
        ("contrast", b.contrast),
        ("n_photons_at_eta_opt", b.n_photons),
    ];
    println!("species = {}", species.name);
    println!("beam_area = {:.16e}", geometry.beam_area);
    println!("n_atoms = {:.16e}", geometry.n_atoms);
    for (k, v) in rows {
        println!("{k} = {v:.16e}");
    }
    Ok(())
}

fn run_verify(a: VerifyArgs) -> Result<(), Failure> {
    if a.list {
        for (name, description) in verify::CHECKS {
            println!("{name}\t{description}");
        }
        return Ok(());
    }
    if !(a.tolerance_scale >= 0.0 && a.tolerance_scale.is_finite()) {
        return Err(Failure::Config(
            "`tolerance-scale` must be finite and nonnegative".into(),
        ));
    }
    let selected: Vec<&str> = if a.check.is_empty() {
        verify::CHECKS.iter().map(|c| c.0).collect()
    } else {
        for name in &a.check {
            if !verify::CHECKS.iter().any(|c| c.0 == name) {
                return Err(Failure::Config(format!("unknown check `{name}` (see --list)")));
            }
        }
        a.check.iter().map(String::as_str).collect()
    };
    let mut all_passed = true;
    for name in selected {
        let result = match verify::run_check(name, a.tolerance_scale) {
            Ok(r) => r.expect("check names validated above"),
            Err(e) => verify::CheckResult {
                name: name.to_string(),
                passed: false,
                value: f64::NAN,
                threshold: f64::NAN,
                detail: e.to_string(),
            },
        };
        all_passed &= result.passed;
        println!("{}", serde_json::to_string(&result).expect("check result serializes"));
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}
