//! Scenario configuration and the deterministic seeding discipline.
//!
//! A scenario file is a flat `key = value` text document; `#` starts a
//! comment. Keys are the struct field names below, with short aliases for
//! the usual symbols (`M`, `K`, `S`, `N`, `D`, `B`, `tau`, `tau_c`).
//! Unknown and duplicate keys are errors. `ap_count`, `user_count`,
//! `ris_count`, `elements_per_ris`, and `area_side_km` have no defaults and
//! must be supplied; everything else defaults to the reference system
//! parameters (1.9 GHz carrier, 20 MHz bandwidth, 9 dB noise figure,
//! 15/18/1.65 m heights, 8 dB shadowing, 200 mW powers, 10/50 m breakpoints,
//! 200-symbol coherence interval).
//!
//! All powers are handled in linear units internally; dB and dBm appear only
//! at the configuration and report boundaries.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

/// Boltzmann constant in Joule per Kelvin.
pub const BOLTZMANN_J_PER_K: f64 = 1.381e-23;
/// Reference noise temperature in Kelvin.
pub const NOISE_TEMPERATURE_K: f64 = 290.0;

/// Every physical and run-control parameter of one simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// Side of the square deployment area (km). Alias `D`.
    pub area_side_km: f64,
    /// Number of access points. Alias `M`.
    pub ap_count: usize,
    /// Number of users. Alias `K`.
    pub user_count: usize,
    /// Number of reflecting surfaces. Alias `S`.
    pub ris_count: usize,
    /// Reflecting elements per surface. Alias `N`.
    pub elements_per_ris: usize,
    pub carrier_freq_ghz: f64,
    /// Alias `B`.
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub ap_height_m: f64,
    pub ris_height_m: f64,
    pub user_height_m: f64,
    pub shadow_std_db: f64,
    /// Downlink data transmit power per AP (W).
    pub data_power_w: f64,
    /// Uplink pilot transmit power per user (W).
    pub pilot_power_w: f64,
    pub breakpoint_d0_m: f64,
    pub breakpoint_d1_m: f64,
    /// Coherence interval length in symbols. Alias `tau`.
    pub coherence_len_symbols: usize,
    /// Uplink training length in symbols. Alias `tau_c`. Defaults to
    /// `user_count`, the minimum length that keeps the pilot book orthogonal.
    pub pilot_len_symbols: usize,
    pub pathloss_exp_direct: f64,
    pub pathloss_exp_ris_user: f64,
    pub pathloss_exp_ap_ris: f64,
    /// When set, every large-scale coefficient is forced to this value and
    /// shadowing is skipped (normalized validation scenarios).
    pub beta_override: Option<f64>,
    /// Redraw the RIS phase configuration on every coherence interval of the
    /// Monte-Carlo rate instead of holding it fixed per topology.
    pub ris_phase_redraw: bool,
    pub topology_draws: usize,
    pub channel_draws_per_topology: usize,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// Thermal noise power over the configured bandwidth, in watts.
    pub fn noise_power_w(&self) -> f64 {
        noise_power_w(self.bandwidth_hz, self.noise_figure_db)
    }

    /// Normalized downlink data SNR (dimensionless transmit power).
    pub fn data_snr(&self) -> f64 {
        normalized_snr(self.data_power_w, self.noise_power_w())
    }

    /// Normalized uplink pilot SNR per symbol.
    pub fn pilot_snr(&self) -> f64 {
        normalized_snr(self.pilot_power_w, self.noise_power_w())
    }

    /// Fraction of the coherence interval carrying downlink data,
    /// `(1 - tau_c/tau) / 2`.
    pub fn prelog(&self) -> f64 {
        (1.0 - self.pilot_len_symbols as f64 / self.coherence_len_symbols as f64) / 2.0
    }

    /// Stable 16-hex-digit digest of the full configuration; embedded in
    /// every report so outputs are self-describing.
    pub fn config_hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parse a scenario document, fill defaults, and validate invariants.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut builder = ScenarioBuilder::new();
        builder.apply_document(text)?;
        builder.build()
    }

    /// Load and parse a scenario file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(path.display().to_string(), e.to_string()))?;
        Self::parse_str(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invariant {
                    field,
                    msg: format!("must be strictly positive and finite, got {v}"),
                })
            }
        }

        if self.ap_count < 1 {
            return Err(ConfigError::Invariant {
                field: "ap_count",
                msg: "at least one AP is required".into(),
            });
        }
        if self.user_count < 1 {
            return Err(ConfigError::Invariant {
                field: "user_count",
                msg: "at least one user is required".into(),
            });
        }
        if self.elements_per_ris < 1 {
            return Err(ConfigError::Invariant {
                field: "elements_per_ris",
                msg: "surfaces need at least one element".into(),
            });
        }
        if self.pilot_len_symbols < self.user_count {
            return Err(ConfigError::Invariant {
                field: "pilot_len_symbols",
                msg: format!(
                    "orthogonal pilots require pilot_len_symbols >= user_count \
                     (got tau_c = {}, K = {})",
                    self.pilot_len_symbols, self.user_count
                ),
            });
        }
        if self.pilot_len_symbols >= self.coherence_len_symbols {
            return Err(ConfigError::Invariant {
                field: "pilot_len_symbols",
                msg: format!(
                    "training must leave room for data: tau_c = {} >= tau = {}",
                    self.pilot_len_symbols, self.coherence_len_symbols
                ),
            });
        }
        positive("area_side_km", self.area_side_km)?;
        positive("carrier_freq_ghz", self.carrier_freq_ghz)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("ap_height_m", self.ap_height_m)?;
        positive("ris_height_m", self.ris_height_m)?;
        positive("user_height_m", self.user_height_m)?;
        positive("data_power_w", self.data_power_w)?;
        positive("pilot_power_w", self.pilot_power_w)?;
        positive("breakpoint_d0_m", self.breakpoint_d0_m)?;
        positive("breakpoint_d1_m", self.breakpoint_d1_m)?;
        positive("pathloss_exp_direct", self.pathloss_exp_direct)?;
        positive("pathloss_exp_ris_user", self.pathloss_exp_ris_user)?;
        positive("pathloss_exp_ap_ris", self.pathloss_exp_ap_ris)?;
        if self.breakpoint_d0_m >= self.breakpoint_d1_m {
            return Err(ConfigError::Invariant {
                field: "breakpoint_d0_m",
                msg: format!(
                    "breakpoints must satisfy 0 < d0 < d1 (got d0 = {}, d1 = {})",
                    self.breakpoint_d0_m, self.breakpoint_d1_m
                ),
            });
        }
        if !(self.shadow_std_db >= 0.0 && self.shadow_std_db.is_finite()) {
            return Err(ConfigError::Invariant {
                field: "shadow_std_db",
                msg: format!("must be nonnegative and finite, got {}", self.shadow_std_db),
            });
        }
        if let Some(b) = self.beta_override {
            positive("beta_override", b)?;
        }
        if self.topology_draws < 1 {
            return Err(ConfigError::Invariant {
                field: "topology_draws",
                msg: "need at least one topology draw".into(),
            });
        }
        if self.channel_draws_per_topology < 1 {
            return Err(ConfigError::Invariant {
                field: "channel_draws_per_topology",
                msg: "need at least one channel draw".into(),
            });
        }
        Ok(())
    }
}

/// Bandwidth × k_B × T_0 × noise figure, in watts.
pub fn noise_power_w(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    assert!(bandwidth_hz > 0.0, "bandwidth must be positive");
    bandwidth_hz * BOLTZMANN_J_PER_K * NOISE_TEMPERATURE_K * 10f64.powf(noise_figure_db / 10.0)
}

/// Dimensionless transmit SNR: transmit power divided by noise power.
pub fn normalized_snr(tx_power_w: f64, noise_power_w: f64) -> f64 {
    assert!(tx_power_w > 0.0 && noise_power_w > 0.0, "powers must be positive");
    tx_power_w / noise_power_w
}

/// Configuration loading and validation failures. The CLI maps these to
/// exit code 2; messages always name the offending key.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{0}`: {1}")]
    Io(String, String),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{key}`")]
    UnknownKey { key: String },
    #[error("duplicate configuration key `{key}`")]
    DuplicateKey { key: String },
    #[error("invalid value for `{key}`: `{value}` ({msg})")]
    InvalidValue { key: String, value: String, msg: String },
    #[error("missing required key(s): {keys}")]
    MissingRequired { keys: String },
    #[error("`{field}`: {msg}")]
    Invariant { field: &'static str, msg: String },
}

/// Incremental builder used by the file parser and by CLI `--override`
/// handling: set keys in any order, then [`ScenarioBuilder::build`] fills
/// defaults and validates.
#[derive(Debug, Default, Clone)]
pub struct ScenarioBuilder {
    set_keys: std::collections::BTreeSet<&'static str>,
    area_side_km: Option<f64>,
    ap_count: Option<usize>,
    user_count: Option<usize>,
    ris_count: Option<usize>,
    elements_per_ris: Option<usize>,
    carrier_freq_ghz: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_figure_db: Option<f64>,
    ap_height_m: Option<f64>,
    ris_height_m: Option<f64>,
    user_height_m: Option<f64>,
    shadow_std_db: Option<f64>,
    data_power_w: Option<f64>,
    pilot_power_w: Option<f64>,
    breakpoint_d0_m: Option<f64>,
    breakpoint_d1_m: Option<f64>,
    coherence_len_symbols: Option<usize>,
    pilot_len_symbols: Option<usize>,
    pathloss_exp_direct: Option<f64>,
    pathloss_exp_ris_user: Option<f64>,
    pathloss_exp_ap_ris: Option<f64>,
    beta_override: Option<f64>,
    ris_phase_redraw: Option<bool>,
    topology_draws: Option<usize>,
    channel_draws_per_topology: Option<usize>,
    master_seed: Option<u64>,
}

/// Canonical key names, one per configuration field.
pub const CONFIG_KEYS: &[&str] = &[
    "area_side_km",
    "ap_count",
    "user_count",
    "ris_count",
    "elements_per_ris",
    "carrier_freq_ghz",
    "bandwidth_hz",
    "noise_figure_db",
    "ap_height_m",
    "ris_height_m",
    "user_height_m",
    "shadow_std_db",
    "data_power_w",
    "pilot_power_w",
    "breakpoint_d0_m",
    "breakpoint_d1_m",
    "coherence_len_symbols",
    "pilot_len_symbols",
    "pathloss_exp_direct",
    "pathloss_exp_ris_user",
    "pathloss_exp_ap_ris",
    "beta_override",
    "ris_phase_redraw",
    "topology_draws",
    "channel_draws_per_topology",
    "master_seed",
];

fn canonical_key(key: &str) -> Option<&'static str> {
    match key {
        "D" => Some("area_side_km"),
        "M" => Some("ap_count"),
        "K" => Some("user_count"),
        "S" => Some("ris_count"),
        "N" => Some("elements_per_ris"),
        "B" => Some("bandwidth_hz"),
        "tau" => Some("coherence_len_symbols"),
        "tau_c" => Some("pilot_len_symbols"),
        other => CONFIG_KEYS.iter().find(|k| **k == other).copied(),
    }
}

impl ScenarioBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse a whole `key = value` document into the builder.
    pub fn apply_document(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: idx + 1, text: raw.trim().to_string() });
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Set one key. Aliases are accepted; resetting a key already set in the
    /// same builder is an error (catches accidental duplicates in files).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let canon = canonical_key(key).ok_or_else(|| ConfigError::UnknownKey { key: key.to_string() })?;

        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                key: key.to_string(),
                value: value.to_string(),
                msg: e.to_string(),
            })
        }

        fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: value.to_string(),
                    msg: "expected true/false".to_string(),
                }),
            }
        }

        macro_rules! assign {
            ($field:ident, $val:expr) => {{
                if self.$field.is_some() {
                    return Err(ConfigError::DuplicateKey { key: canon.to_string() });
                }
                self.$field = Some($val);
                self.set_keys.insert(canon);
            }};
        }

        match canon {
            "area_side_km" => assign!(area_side_km, parse::<f64>(canon, value)?),
            "ap_count" => assign!(ap_count, parse::<usize>(canon, value)?),
            "user_count" => assign!(user_count, parse::<usize>(canon, value)?),
            "ris_count" => assign!(ris_count, parse::<usize>(canon, value)?),
            "elements_per_ris" => assign!(elements_per_ris, parse::<usize>(canon, value)?),
            "carrier_freq_ghz" => assign!(carrier_freq_ghz, parse::<f64>(canon, value)?),
            "bandwidth_hz" => assign!(bandwidth_hz, parse::<f64>(canon, value)?),
            "noise_figure_db" => assign!(noise_figure_db, parse::<f64>(canon, value)?),
            "ap_height_m" => assign!(ap_height_m, parse::<f64>(canon, value)?),
            "ris_height_m" => assign!(ris_height_m, parse::<f64>(canon, value)?),
            "user_height_m" => assign!(user_height_m, parse::<f64>(canon, value)?),
            "shadow_std_db" => assign!(shadow_std_db, parse::<f64>(canon, value)?),
            "data_power_w" => assign!(data_power_w, parse::<f64>(canon, value)?),
            "pilot_power_w" => assign!(pilot_power_w, parse::<f64>(canon, value)?),
            "breakpoint_d0_m" => assign!(breakpoint_d0_m, parse::<f64>(canon, value)?),
            "breakpoint_d1_m" => assign!(breakpoint_d1_m, parse::<f64>(canon, value)?),
            "coherence_len_symbols" => assign!(coherence_len_symbols, parse::<usize>(canon, value)?),
            "pilot_len_symbols" => assign!(pilot_len_symbols, parse::<usize>(canon, value)?),
            "pathloss_exp_direct" => assign!(pathloss_exp_direct, parse::<f64>(canon, value)?),
            "pathloss_exp_ris_user" => assign!(pathloss_exp_ris_user, parse::<f64>(canon, value)?),
            "pathloss_exp_ap_ris" => assign!(pathloss_exp_ap_ris, parse::<f64>(canon, value)?),
            "beta_override" => assign!(beta_override, parse::<f64>(canon, value)?),
            "ris_phase_redraw" => assign!(ris_phase_redraw, parse_bool(canon, value)?),
            "topology_draws" => assign!(topology_draws, parse::<usize>(canon, value)?),
            "channel_draws_per_topology" => assign!(channel_draws_per_topology, parse::<usize>(canon, value)?),
            "master_seed" => assign!(master_seed, parse::<u64>(canon, value)?),
            _ => unreachable!("canonical_key covers all keys"),
        }
        Ok(())
    }

    /// Override a key that may already be set (CLI `--override` semantics).
    pub fn force(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let canon = canonical_key(key).ok_or_else(|| ConfigError::UnknownKey { key: key.to_string() })?;
        self.clear(canon);
        self.set(canon, value)
    }

    fn clear(&mut self, canon: &'static str) {
        self.set_keys.remove(canon);
        match canon {
            "area_side_km" => self.area_side_km = None,
            "ap_count" => self.ap_count = None,
            "user_count" => self.user_count = None,
            "ris_count" => self.ris_count = None,
            "elements_per_ris" => self.elements_per_ris = None,
            "carrier_freq_ghz" => self.carrier_freq_ghz = None,
            "bandwidth_hz" => self.bandwidth_hz = None,
            "noise_figure_db" => self.noise_figure_db = None,
            "ap_height_m" => self.ap_height_m = None,
            "ris_height_m" => self.ris_height_m = None,
            "user_height_m" => self.user_height_m = None,
            "shadow_std_db" => self.shadow_std_db = None,
            "data_power_w" => self.data_power_w = None,
            "pilot_power_w" => self.pilot_power_w = None,
            "breakpoint_d0_m" => self.breakpoint_d0_m = None,
            "breakpoint_d1_m" => self.breakpoint_d1_m = None,
            "coherence_len_symbols" => self.coherence_len_symbols = None,
            "pilot_len_symbols" => self.pilot_len_symbols = None,
            "pathloss_exp_direct" => self.pathloss_exp_direct = None,
            "pathloss_exp_ris_user" => self.pathloss_exp_ris_user = None,
            "pathloss_exp_ap_ris" => self.pathloss_exp_ap_ris = None,
            "beta_override" => self.beta_override = None,
            "ris_phase_redraw" => self.ris_phase_redraw = None,
            "topology_draws" => self.topology_draws = None,
            "channel_draws_per_topology" => self.channel_draws_per_topology = None,
            "master_seed" => self.master_seed = None,
            _ => {}
        }
    }

    /// Whether a key (canonical or alias) is already set.
    pub fn is_set(&self, key: &str) -> bool {
        canonical_key(key).map(|canon| self.set_keys.contains(canon)).unwrap_or(false)
    }

    /// Fill defaults, check required keys, validate invariants.
    pub fn build(self) -> Result<ScenarioConfig, ConfigError> {
        let mut missing = Vec::new();
        if self.ap_count.is_none() {
            missing.push("ap_count (M)");
        }
        if self.user_count.is_none() {
            missing.push("user_count (K)");
        }
        if self.ris_count.is_none() {
            missing.push("ris_count (S)");
        }
        if self.elements_per_ris.is_none() {
            missing.push("elements_per_ris (N)");
        }
        if self.area_side_km.is_none() {
            missing.push("area_side_km (D)");
        }
        if !missing.is_empty() {
            return Err(ConfigError::MissingRequired { keys: missing.join(", ") });
        }

        let user_count = self.user_count.unwrap();
        let cfg = ScenarioConfig {
            area_side_km: self.area_side_km.unwrap(),
            ap_count: self.ap_count.unwrap(),
            user_count,
            ris_count: self.ris_count.unwrap(),
            elements_per_ris: self.elements_per_ris.unwrap(),
            carrier_freq_ghz: self.carrier_freq_ghz.unwrap_or(1.9),
            bandwidth_hz: self.bandwidth_hz.unwrap_or(20e6),
            noise_figure_db: self.noise_figure_db.unwrap_or(9.0),
            ap_height_m: self.ap_height_m.unwrap_or(15.0),
            ris_height_m: self.ris_height_m.unwrap_or(18.0),
            user_height_m: self.user_height_m.unwrap_or(1.65),
            shadow_std_db: self.shadow_std_db.unwrap_or(8.0),
            data_power_w: self.data_power_w.unwrap_or(0.2),
            pilot_power_w: self.pilot_power_w.unwrap_or(0.2),
            breakpoint_d0_m: self.breakpoint_d0_m.unwrap_or(10.0),
            breakpoint_d1_m: self.breakpoint_d1_m.unwrap_or(50.0),
            coherence_len_symbols: self.coherence_len_symbols.unwrap_or(200),
            pilot_len_symbols: self.pilot_len_symbols.unwrap_or(user_count),
            pathloss_exp_direct: self.pathloss_exp_direct.unwrap_or(3.5),
            pathloss_exp_ris_user: self.pathloss_exp_ris_user.unwrap_or(2.8),
            pathloss_exp_ap_ris: self.pathloss_exp_ap_ris.unwrap_or(2.0),
            beta_override: self.beta_override,
            ris_phase_redraw: self.ris_phase_redraw.unwrap_or(false),
            topology_draws: self.topology_draws.unwrap_or(200),
            channel_draws_per_topology: self.channel_draws_per_topology.unwrap_or(1000),
            master_seed: self.master_seed.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Root of all randomness: a master seed from which labeled, statistically
/// independent substreams are derived.
///
/// Identical `(master_seed, purpose, labels)` always produces the identical
/// stream, so any draw can be regenerated in isolation and results never
/// depend on evaluation order or thread count.
#[derive(Debug, Clone, Copy)]
pub struct SeedContext {
    master: u64,
}

impl SeedContext {
    pub fn new(master_seed: u64) -> Self {
        Self { master: master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    /// Derive the substream for `purpose` and integer `labels`
    /// (topology index, draw index, node or link indices, ...).
    pub fn stream(&self, purpose: &str, labels: &[u64]) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update((purpose.len() as u64).to_le_bytes());
        hasher.update(purpose.as_bytes());
        for label in labels {
            hasher.update(label.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        <ChaCha8Rng as rand::SeedableRng>::from_seed(seed)
    }
}
