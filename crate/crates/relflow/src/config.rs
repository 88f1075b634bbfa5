//! Line-oriented `key = value` experiment configuration with strict
//! validation: unknown keys are rejected, ranges are enforced, and every
//! field has a documented default.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("key `{key}`: value {value} outside the allowed range {allowed}")]
    OutOfRange { key: String, value: String, allowed: String },
}

/// Reference mode used by certification runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    Characteristics,
    FineSolver,
}

impl std::fmt::Display for ReferenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReferenceMode::Characteristics => write!(f, "characteristics"),
            ReferenceMode::FineSolver => write!(f, "fine-solver"),
        }
    }
}

/// Fully validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub a: f64,
    pub gamma: f64,
    pub nu: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    /// Fixed time step; when absent the CFL fraction governs.
    pub dt: Option<f64>,
    /// Fraction of the stable step, in (0, 1].
    pub cfl: f64,
    pub t_end: f64,
    pub reference: ReferenceMode,
    pub epsilons: Vec<f64>,
    /// Tail exponent of the polynomial-decay scenario.
    pub alpha: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "viscous-relaxation".into(),
            a: 1.0,
            gamma: 2.0,
            nu: 0.05,
            x_min: 0.0,
            x_max: 1.0,
            n_cells: 64,
            dt: None,
            cfl: 0.9,
            t_end: 0.2,
            reference: ReferenceMode::FineSolver,
            epsilons: vec![1e-2, 1e-3, 1e-4],
            alpha: 3.0,
        }
    }
}

const KNOWN_SCENARIOS: &[&str] = &[
    "equilibrium-vacuum",
    "compact-support",
    "polynomial-decay",
    "inflow-channel",
    "viscous-relaxation",
];

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

/// Parses and validates configuration text; empty text yields the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Malformed { line, text: content.into() });
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "scenario" => {
                if !KNOWN_SCENARIOS.contains(&value) {
                    return Err(ConfigError::OutOfRange {
                        key: key.into(),
                        value: value.into(),
                        allowed: KNOWN_SCENARIOS.join(" | "),
                    });
                }
                cfg.scenario = value.into();
            }
            "a" => cfg.a = parse_f64(key, value)?,
            "gamma" => cfg.gamma = parse_f64(key, value)?,
            "nu" => cfg.nu = parse_f64(key, value)?,
            "x_min" => cfg.x_min = parse_f64(key, value)?,
            "x_max" => cfg.x_max = parse_f64(key, value)?,
            "n_cells" => {
                cfg.n_cells = value.parse().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                })?
            }
            "dt" => cfg.dt = Some(parse_f64(key, value)?),
            "cfl" => cfg.cfl = parse_f64(key, value)?,
            "t_end" => cfg.t_end = parse_f64(key, value)?,
            "alpha" => cfg.alpha = parse_f64(key, value)?,
            "reference" => {
                cfg.reference = match value {
                    "characteristics" => ReferenceMode::Characteristics,
                    "fine-solver" => ReferenceMode::FineSolver,
                    _ => {
                        return Err(ConfigError::OutOfRange {
                            key: key.into(),
                            value: value.into(),
                            allowed: "characteristics | fine-solver".into(),
                        })
                    }
                }
            }
            "epsilons" => {
                let mut eps = Vec::new();
                for part in value.split(',') {
                    eps.push(parse_f64(key, part.trim())?);
                }
                cfg.epsilons = eps;
            }
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let range = |ok: bool, key: &str, value: f64, allowed: &str| -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(ConfigError::OutOfRange {
                key: key.into(),
                value: value.to_string(),
                allowed: allowed.into(),
            })
        }
    };
    range(cfg.a > 0.0, "a", cfg.a, "(0, inf)")?;
    range(cfg.gamma > 1.0 && cfg.gamma <= 2.0, "gamma", cfg.gamma, "(1, 2]")?;
    range(cfg.nu > 0.0, "nu", cfg.nu, "(0, inf)")?;
    range(cfg.x_max > cfg.x_min, "x_max", cfg.x_max, "(x_min, inf)")?;
    range(cfg.n_cells >= 4, "n_cells", cfg.n_cells as f64, "[4, inf)")?;
    range(cfg.t_end > 0.0, "t_end", cfg.t_end, "(0, inf)")?;
    range(cfg.cfl > 0.0 && cfg.cfl <= 1.0, "cfl", cfg.cfl, "(0, 1]")?;
    if let Some(dt) = cfg.dt {
        range(dt > 0.0, "dt", dt, "(0, inf)")?;
    }
    for &e in &cfg.epsilons {
        range(e > 0.0, "epsilons", e, "(0, inf)")?;
    }
    range(cfg.alpha > 1.0, "alpha", cfg.alpha, "(1, inf)")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn parses_keys_and_comments() {
        let cfg = parse_config(
            "# experiment\ngamma = 1.5\nn_cells = 128  # fine\nreference = characteristics\nepsilons = 1e-2, 1e-3, 1e-4\n",
        )
        .unwrap();
        assert_eq!(cfg.gamma, 1.5);
        assert_eq!(cfg.n_cells, 128);
        assert_eq!(cfg.reference, ReferenceMode::Characteristics);
        assert_eq!(cfg.epsilons, vec![1e-2, 1e-3, 1e-4]);
    }

    #[test]
    fn gamma_out_of_range_rejected() {
        let err = parse_config("gamma = 2.5").unwrap_err();
        match err {
            ConfigError::OutOfRange { key, allowed, .. } => {
                assert_eq!(key, "gamma");
                assert_eq!(allowed, "(1, 2]");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            parse_config("vicosity = 0.1"),
            Err(ConfigError::UnknownKey { key, .. }) if key == "vicosity"
        ));
    }

    #[test]
    fn malformed_line_rejected() {
        assert!(matches!(parse_config("just words"), Err(ConfigError::Malformed { .. })));
    }

    #[test]
    fn bad_scenario_lists_choices() {
        let err = parse_config("scenario = warp-drive").unwrap_err();
        match err {
            ConfigError::OutOfRange { allowed, .. } => {
                assert!(allowed.contains("viscous-relaxation"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn numeric_validation() {
        assert!(parse_config("nu = 0").is_err());
        assert!(parse_config("n_cells = 2").is_err());
        assert!(parse_config("cfl = 1.5").is_err());
        assert!(parse_config("dt = -0.1").is_err());
        assert!(parse_config("gamma = abc").is_err());
    }
}
