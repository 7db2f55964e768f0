//! Strict flat key-value configuration format and the bundled device preset.
//!
//! The format is deliberately rigid: fixed sections, explicit units in key
//! names, unknown or duplicated keys are errors with line numbers, and a
//! missing-key report covers the whole file in one pass. Example:
//!
//! ```text
//! [qubit]
//! delta_ghz = 6.0
//! ip_na = 500.0
//!
//! [mode.1]
//! omega_ghz = 3.143
//! g_ghz = 0.306
//! truncation = 8
//!
//! [mode.3]
//! omega_ghz = 9.420
//! g_ghz = 0.521
//! truncation = 6
//!
//! [drive]
//! amplitude_ghz = 1.0
//! rwa = false
//!
//! [sweep]
//! flux_start_mphi0 = -6.0
//! flux_stop_mphi0 = 6.0
//! flux_count = 121
//! ```
//!
//! `[mode.2]` is optional; the lambda mode has nearly negligible coupling
//! and stays disabled unless configured.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{ConfigErrors, Error, Result};
use crate::hamiltonian::{FluxSweep, QubitSpec, SystemConfig, DEFAULT_DIM_LIMIT};
use crate::operators::ModeSpec;

/// Bundled preset with the measured device parameters:
/// nu_1 = 3.143, nu_2 = 6.361 (disabled), nu_3 = 9.420 GHz,
/// g_1 = 0.306, g_3 = 0.521 GHz. Qubit defaults delta/h = 6.0 GHz,
/// I_p = 500 nA are runnable placeholders, not measured values.
pub fn paper_device() -> SystemConfig {
    SystemConfig {
        qubit: QubitSpec {
            gap_delta: 6.0,
            persistent_current: 500.0,
        },
        modes: vec![
            ModeSpec::new(1, 3.143, 0.306, 8),
            ModeSpec::new(3, 9.420, 0.521, 6),
        ],
        rwa: false,
        drive_amplitude: 1.0,
        flux_sweep: FluxSweep {
            start: -6.0,
            stop: 6.0,
            count: 121,
        },
        dim_limit: DEFAULT_DIM_LIMIT,
    }
}

/// The preset with the weakly coupled lambda mode enabled
/// (g_2 = 0.005 GHz, small truncation).
pub fn paper_device_with_lambda_mode() -> SystemConfig {
    let mut cfg = paper_device();
    cfg.modes.push(ModeSpec::new(2, 6.361, 0.005, 3));
    cfg.modes.sort_by_key(|m| m.index);
    cfg
}

pub fn preset(name: &str) -> Result<SystemConfig> {
    match name {
        "paper_device" => Ok(paper_device()),
        "paper_device_mode2" => Ok(paper_device_with_lambda_mode()),
        other => Err(Error::InvalidParameter(format!(
            "unknown preset `{other}` (available: paper_device, paper_device_mode2)"
        ))),
    }
}

const MODE_KEYS: [&str; 3] = ["omega_ghz", "g_ghz", "truncation"];

fn required_keys(section: &str) -> Option<&'static [&'static str]> {
    match section {
        "qubit" => Some(&["delta_ghz", "ip_na"]),
        "mode.1" | "mode.2" | "mode.3" => Some(&MODE_KEYS),
        "drive" => Some(&["amplitude_ghz", "rwa"]),
        "sweep" => Some(&["flux_start_mphi0", "flux_stop_mphi0", "flux_count"]),
        _ => None,
    }
}

const REQUIRED_SECTIONS: [&str; 5] = ["qubit", "mode.1", "mode.3", "drive", "sweep"];

/// Parse a configuration document. Issues are collected and reported
/// together; an empty file therefore lists every missing key.
pub fn parse_config_str(text: &str) -> Result<SystemConfig> {
    let mut errors = ConfigErrors::default();
    // section -> key -> (line, raw value)
    let mut values: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
    let mut current: Option<String> = None;

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if required_keys(name).is_none() {
                errors.push(Some(line_no), format!("unknown section [{name}]"));
                current = None;
            } else if values.contains_key(name) {
                errors.push(Some(line_no), format!("duplicate section [{name}]"));
                current = Some(name.to_string());
            } else {
                values.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(
                Some(line_no),
                format!("expected `key = value`, got `{line}`"),
            );
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let Some(section) = current.clone() else {
            errors.push(
                Some(line_no),
                format!("key `{key}` outside of any section"),
            );
            continue;
        };
        let allowed = required_keys(&section).expect("section checked on entry");
        if !allowed.contains(&key) {
            // distinguish a wrong unit suffix from a truly unknown key
            let base = |k: &str| k.split('_').next().unwrap_or(k).to_string();
            match allowed.iter().find(|a| base(a) == base(key)) {
                Some(expected) => errors.push(
                    Some(line_no),
                    format!("unit-suffix mismatch: key `{key}` should be `{expected}`"),
                ),
                None => errors.push(
                    Some(line_no),
                    format!("unknown key `{key}` in section [{section}]"),
                ),
            }
            continue;
        }
        let entry = values.get_mut(&section).expect("section exists");
        if entry.contains_key(key) {
            errors.push(
                Some(line_no),
                format!("duplicate key `{key}` in section [{section}]"),
            );
            continue;
        }
        entry.insert(key.to_string(), (line_no, value.to_string()));
    }

    // completeness
    for section in REQUIRED_SECTIONS {
        match values.get(section) {
            None => {
                for key in required_keys(section).unwrap() {
                    errors.push(None, format!("missing required key [{section}] {key}"));
                }
            }
            Some(map) => {
                for key in required_keys(section).unwrap() {
                    if !map.contains_key(*key) {
                        errors.push(None, format!("missing required key [{section}] {key}"));
                    }
                }
            }
        }
    }
    if let Some(map) = values.get("mode.2") {
        for key in MODE_KEYS {
            if !map.contains_key(key) {
                errors.push(None, format!("missing required key [mode.2] {key}"));
            }
        }
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }

    let mut errors = ConfigErrors::default();
    let mut get_f64 = |section: &str, key: &str| -> f64 {
        let (line, raw) = &values[section][key];
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                errors.push(
                    Some(*line),
                    format!("key `{key}`: expected a finite number, got `{raw}`"),
                );
                f64::NAN
            }
        }
    };
    let delta = get_f64("qubit", "delta_ghz");
    let ip = get_f64("qubit", "ip_na");
    let amplitude = get_f64("drive", "amplitude_ghz");
    let flux_start = get_f64("sweep", "flux_start_mphi0");
    let flux_stop = get_f64("sweep", "flux_stop_mphi0");

    let mut modes = Vec::new();
    for index in [1usize, 2, 3] {
        let section = format!("mode.{index}");
        if !values.contains_key(&section) {
            continue;
        }
        let omega = {
            let (line, raw) = &values[&section]["omega_ghz"];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    errors.push(Some(*line), format!("omega_ghz: bad number `{raw}`"));
                    f64::NAN
                }
            }
        };
        let g = {
            let (line, raw) = &values[&section]["g_ghz"];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    errors.push(Some(*line), format!("g_ghz: bad number `{raw}`"));
                    f64::NAN
                }
            }
        };
        let trunc = {
            let (line, raw) = &values[&section]["truncation"];
            match raw.parse::<usize>() {
                Ok(v) if v >= 1 => v,
                _ => {
                    errors.push(
                        Some(*line),
                        format!("truncation: expected an integer >= 1, got `{raw}`"),
                    );
                    1
                }
            }
        };
        modes.push(ModeSpec::new(index, omega, g, trunc));
    }

    let rwa = {
        let (line, raw) = &values["drive"]["rwa"];
        match raw.as_str() {
            "true" => true,
            "false" => false,
            _ => {
                errors.push(
                    Some(*line),
                    format!("rwa: expected true or false, got `{raw}`"),
                );
                false
            }
        }
    };
    let flux_count = {
        let (line, raw) = &values["sweep"]["flux_count"];
        match raw.parse::<usize>() {
            Ok(v) if v >= 1 => v,
            _ => {
                errors.push(
                    Some(*line),
                    format!("flux_count: expected an integer >= 1, got `{raw}`"),
                );
                1
            }
        }
    };
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }

    let cfg = SystemConfig {
        qubit: QubitSpec {
            gap_delta: delta,
            persistent_current: ip,
        },
        modes,
        rwa,
        drive_amplitude: amplitude,
        flux_sweep: FluxSweep {
            start: flux_start,
            stop: flux_stop,
            count: flux_count,
        },
        dim_limit: DEFAULT_DIM_LIMIT,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config_file(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Canonical text form of a resolved configuration: fixed section and key
/// order, shortest-roundtrip float formatting. Identical configurations
/// produce identical strings on every platform, so hashes of this string
/// are stable manifest keys.
pub fn canonical_string(cfg: &SystemConfig) -> String {
    let mut out = String::new();
    out.push_str("[qubit]\n");
    out.push_str(&format!("delta_ghz = {}\n", cfg.qubit.gap_delta));
    out.push_str(&format!("ip_na = {}\n", cfg.qubit.persistent_current));
    let mut modes = cfg.modes.clone();
    modes.sort_by_key(|m| m.index);
    for m in &modes {
        out.push_str(&format!("[mode.{}]\n", m.index));
        out.push_str(&format!("omega_ghz = {}\n", m.omega));
        out.push_str(&format!("g_ghz = {}\n", m.coupling_g));
        out.push_str(&format!("truncation = {}\n", m.truncation));
    }
    out.push_str("[drive]\n");
    out.push_str(&format!("amplitude_ghz = {}\n", cfg.drive_amplitude));
    out.push_str(&format!("rwa = {}\n", cfg.rwa));
    out.push_str("[sweep]\n");
    out.push_str(&format!("flux_start_mphi0 = {}\n", cfg.flux_sweep.start));
    out.push_str(&format!("flux_stop_mphi0 = {}\n", cfg.flux_sweep.stop));
    out.push_str(&format!("flux_count = {}\n", cfg.flux_sweep.count));
    out.push_str(&format!("dim_limit = {}\n", cfg.dim_limit));
    out
}

/// Render a config as a parseable document (canonical order, without the
/// CLI-level dim_limit).
pub fn to_config_string(cfg: &SystemConfig) -> String {
    let canonical = canonical_string(cfg);
    canonical
        .lines()
        .filter(|l| !l.starts_with("dim_limit"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}
