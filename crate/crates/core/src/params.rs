//! Physical parameter set shared by every solver.
//!
//! Units: ħ = 1 and every frequency or rate is expressed in one common
//! arbitrary unit. Detunings are stored directly:
//!
//! ```text
//! delta_c = ω_c  − ω_l
//! delta_1 = ω_31 − ω_l
//! delta_2 = ω_32 − ω_l
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cutoff used by [`SystemParams::paper_defaults`] before any adaptive
/// refinement by [`crate::lindblad::choose_cutoff`].
pub const DEFAULT_N_FOCK: usize = 10;

/// Keys accepted by the flat config format, in canonical order.
pub const CONFIG_KEYS: [&str; 11] = [
    "g",
    "omega_free",
    "eta",
    "kappa",
    "gamma31",
    "gamma32",
    "gamma21",
    "delta_c",
    "delta_1",
    "delta_2",
    "n_fock",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Atom-cavity coupling on the 1↔3 transition.
    pub g: f64,
    /// Classical drive on the 2↔3 transition.
    pub omega_free: f64,
    /// Cavity probe drive strength.
    pub eta: f64,
    /// Cavity energy decay rate.
    pub kappa: f64,
    pub gamma31: f64,
    pub gamma32: f64,
    /// Decay |2⟩→|1⟩; zero by default.
    pub gamma21: f64,
    pub delta_c: f64,
    pub delta_1: f64,
    pub delta_2: f64,
    /// Highest Fock state kept; the cavity space is |0⟩..|n_fock⟩.
    pub n_fock: usize,
}

impl SystemParams {
    /// Strongly coupled baseline: g = 3, Ω = 0.05, η = 0.0426 g, and
    /// κ = γ31 = γ32 = 3.3e-4 g, with every detuning zero.
    pub fn paper_defaults() -> Self {
        let g = 3.0;
        Self {
            g,
            omega_free: 0.05,
            eta: 0.0426 * g,
            kappa: 3.3e-4 * g,
            gamma31: 3.3e-4 * g,
            gamma32: 3.3e-4 * g,
            gamma21: 0.0,
            delta_c: 0.0,
            delta_1: 0.0,
            delta_2: 0.0,
            n_fock: DEFAULT_N_FOCK,
        }
    }

    /// The Ω = 0 limit that behaves as a two-level atom: with no decay into
    /// |2⟩ the atom cannot be shelved there, so level 2 stays empty.
    pub fn two_level_defaults() -> Self {
        Self {
            omega_free: 0.0,
            gamma32: 0.0,
            ..Self::paper_defaults()
        }
    }

    /// Composite Hilbert-space dimension 3·(n_fock + 1).
    pub fn dim(&self) -> usize {
        3 * (self.n_fock + 1)
    }

    pub fn with_detunings(mut self, delta_c: f64, delta_1: f64, delta_2: f64) -> Self {
        self.delta_c = delta_c;
        self.delta_1 = delta_1;
        self.delta_2 = delta_2;
        self
    }

    pub fn with_n_fock(mut self, n_fock: usize) -> Self {
        self.n_fock = n_fock;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("g", self.g),
            ("omega_free", self.omega_free),
            ("eta", self.eta),
            ("kappa", self.kappa),
            ("gamma31", self.gamma31),
            ("gamma32", self.gamma32),
            ("gamma21", self.gamma21),
        ];
        for (field, value) in rates {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite, got {value}"),
                });
            }
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be non-negative, got {value}"),
                });
            }
        }
        for (field, value) in [
            ("delta_c", self.delta_c),
            ("delta_1", self.delta_1),
            ("delta_2", self.delta_2),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        if self.n_fock < 1 {
            return Err(Error::InvalidParameter {
                field: "n_fock",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Reads a flat `key = value` file. Keys not present keep their
    /// [`SystemParams::paper_defaults`] value.
    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut raw: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                reason: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let Some(&canonical) = CONFIG_KEYS.iter().find(|k| **k == key) else {
                return Err(Error::UnknownKey(key.to_string()));
            };
            if raw.insert(canonical, (line_no, value)).is_some() {
                return Err(Error::Config {
                    line: line_no,
                    reason: format!("duplicate key `{key}`"),
                });
            }
        }

        let mut params = Self::paper_defaults();
        if let Some(&(line, value)) = raw.get("g") {
            params.g = value.parse().map_err(|_| Error::Config {
                line,
                reason: format!("`g` must be a plain number, got `{value}`"),
            })?;
        }
        let g = params.g;
        for (&key, &(line, value)) in &raw {
            let slot = match key {
                "g" => continue,
                "n_fock" => {
                    params.n_fock = value.parse().map_err(|_| Error::Config {
                        line,
                        reason: format!("`n_fock` must be a non-negative integer, got `{value}`"),
                    })?;
                    continue;
                }
                "omega_free" => &mut params.omega_free,
                "eta" => &mut params.eta,
                "kappa" => &mut params.kappa,
                "gamma31" => &mut params.gamma31,
                "gamma32" => &mut params.gamma32,
                "gamma21" => &mut params.gamma21,
                "delta_c" => &mut params.delta_c,
                "delta_1" => &mut params.delta_1,
                "delta_2" => &mut params.delta_2,
                _ => unreachable!("key list is closed"),
            };
            *slot = parse_scaled(value, g).map_err(|reason| Error::Config {
                line,
                reason: format!("`{key}`: {reason}"),
            })?;
        }
        params.validate()?;
        Ok(params)
    }

    /// Serializes back into the flat config format (absolute values).
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let value = match key {
                "n_fock" => self.n_fock.to_string(),
                _ => format!("{:e}", self.field(key).expect("known key")),
            };
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    fn field(&self, key: &str) -> Option<f64> {
        Some(match key {
            "g" => self.g,
            "omega_free" => self.omega_free,
            "eta" => self.eta,
            "kappa" => self.kappa,
            "gamma31" => self.gamma31,
            "gamma32" => self.gamma32,
            "gamma21" => self.gamma21,
            "delta_c" => self.delta_c,
            "delta_1" => self.delta_1,
            "delta_2" => self.delta_2,
            _ => return None,
        })
    }
}

/// Parses a decimal number, optionally suffixed with `*g` (e.g. `3.3e-4*g`),
/// into an absolute value.
pub fn parse_scaled(text: &str, g: f64) -> std::result::Result<f64, String> {
    let text = text.trim();
    let (number, scale) = match text.strip_suffix("*g") {
        Some(rest) => (rest.trim(), g),
        None => (text, 1.0),
    };
    let value: f64 = number
        .parse()
        .map_err(|_| format!("cannot parse `{text}` as a number"))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    Ok(value * scale)
}

/// C = g² / (2 γ31 κ).
pub fn cooperativity(params: &SystemParams) -> Result<f64> {
    let denom = 2.0 * params.gamma31 * params.kappa;
    if denom == 0.0 {
        return Err(Error::DivisionByZero("cooperativity (gamma31 * kappa = 0)"));
    }
    Ok(params.g * params.g / denom)
}
