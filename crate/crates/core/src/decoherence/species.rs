//! Atomic species description and its text file format.
//!
//! A species file is a list of `key = value` lines. `#` starts a comment.
//! Keys are case-sensitive; repeated `ground_level` / `excited_level` lines
//! list the hyperfine levels as `F, energy_Hz`.
//!
//! ```text
//! name = Rb87 D2
//! I = 3/2
//! J_ground = 1/2
//! J_excited = 3/2
//! gamma_Hz = 3.0333e6        # half width gamma/2pi entering Delta^2 + gamma^2
//! lambda_m = 780.241209686e-9
//! ground_level = 1, -4.271676631815181e9
//! ground_level = 2, 2.563005979089109e9
//! excited_level = 0, -302.0738e6
//! ```
//!
//! Energies are frequencies in Hz relative to any common reference; only
//! differences enter the detunings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::wigner::Spin;
use crate::error::{Error, Result};

/// Rubidium-87 D2 line. External reference data (D. A. Steck, "Rubidium 87 D
/// Line Data", rev. 2.2.1), not derived in this crate.
pub const RB87_D2: &str = include_str!("../../data/rb87_d2.species");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineLevel {
    pub f: Spin,
    pub energy_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicSpecies {
    pub name: String,
    pub nuclear_spin: Spin,
    pub j_ground: Spin,
    pub j_excited: Spin,
    /// Half width `gamma / 2 pi` of each line, Hz.
    pub gamma_hz: f64,
    pub wavelength_m: f64,
    pub ground: Vec<HyperfineLevel>,
    pub excited: Vec<HyperfineLevel>,
}

impl AtomicSpecies {
    pub fn rb87_d2() -> Self {
        Self::parse(RB87_D2).expect("bundled Rb-87 data is valid")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::SpeciesParse {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut nuclear_spin = None;
        let mut j_ground = None;
        let mut j_excited = None;
        let mut gamma_hz = None;
        let mut wavelength_m = None;
        let mut ground = Vec::new();
        let mut excited = Vec::new();
        let mut last_line = 0;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| Error::SpeciesParse { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let spin = |field: &str| value.parse::<Spin>().map_err(|m| err(format!("field `{field}`: {m}")));
            let real = |field: &str| {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("field `{field}`: `{value}` is not a finite number")))
            };
            match key {
                "name" => name = Some(value.to_string()),
                "I" => nuclear_spin = Some(spin(key)?),
                "J_ground" => j_ground = Some(spin(key)?),
                "J_excited" => j_excited = Some(spin(key)?),
                "gamma_Hz" => gamma_hz = Some(real(key)?),
                "lambda_m" => wavelength_m = Some(real(key)?),
                "ground_level" | "excited_level" => {
                    let (f, e) = value
                        .split_once(',')
                        .ok_or_else(|| err(format!("field `{key}`: expected `F, energy_Hz`")))?;
                    let f = f.parse::<Spin>().map_err(|m| err(format!("field `{key}` F: {m}")))?;
                    let energy_hz =
                        e.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                            err(format!("field `{key}` energy: `{}` is not a finite number", e.trim()))
                        })?;
                    let level = HyperfineLevel { f, energy_hz };
                    if key == "ground_level" {
                        ground.push(level);
                    } else {
                        excited.push(level);
                    }
                }
                other => return Err(err(format!("unknown field `{other}`"))),
            }
        }

        let missing = |field: &str| Error::SpeciesParse {
            line: last_line,
            message: format!("missing field `{field}`"),
        };
        let species = AtomicSpecies {
            name: name.ok_or_else(|| missing("name"))?,
            nuclear_spin: nuclear_spin.ok_or_else(|| missing("I"))?,
            j_ground: j_ground.ok_or_else(|| missing("J_ground"))?,
            j_excited: j_excited.ok_or_else(|| missing("J_excited"))?,
            gamma_hz: gamma_hz.ok_or_else(|| missing("gamma_Hz"))?,
            wavelength_m: wavelength_m.ok_or_else(|| missing("lambda_m"))?,
            ground,
            excited,
        };
        species.validate().map_err(|message| Error::SpeciesParse {
            line: last_line,
            message,
        })?;
        Ok(species)
    }

    /// Checks positivity and that every listed `F` couples `I` and `J`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.gamma_hz > 0.0) {
            return Err("`gamma_Hz` must be positive".into());
        }
        if !(self.wavelength_m > 0.0) {
            return Err("`lambda_m` must be positive".into());
        }
        if self.ground.is_empty() || self.excited.is_empty() {
            return Err("need at least one `ground_level` and one `excited_level`".into());
        }
        for (levels, j, label) in [
            (&self.ground, self.j_ground, "ground_level"),
            (&self.excited, self.j_excited, "excited_level"),
        ] {
            for lvl in levels {
                if !Spin::coupled(self.nuclear_spin, j).any(|f| f == lvl.f) {
                    return Err(format!(
                        "`{label}` F={} cannot couple I={} and J={}",
                        lvl.f, self.nuclear_spin, j
                    ));
                }
            }
            for (i, a) in levels.iter().enumerate() {
                if levels[..i].iter().any(|b| b.f == a.f) {
                    return Err(format!("`{label}` F={} listed twice", a.f));
                }
            }
        }
        Ok(())
    }

    pub fn ground_level(&self, f: Spin) -> Option<&HyperfineLevel> {
        self.ground.iter().find(|l| l.f == f)
    }

    /// Transition frequency `F -> F'` relative to the common energy reference.
    pub fn transition_hz(&self, ground: &HyperfineLevel, excited: &HyperfineLevel) -> f64 {
        excited.energy_hz - ground.energy_hz
    }
}
