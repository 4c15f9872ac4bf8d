//! Experiment configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//! scheme = "hyperviscous:2"
//! profile = "rough:0.4,0.05"
//! s = 0.4
//! p = 2.0
//! T = 1.0
//! norms = ["Lq0-lp2", "Linf-l2"]
//! h_list = [0.2, 0.1, 0.05, 0.025]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::NormSelector;
use crate::projectors::SpectralProfile;
use crate::symbols::SchemeKind;

pub const SCHEMA_VERSION: u32 = 1;

fn default_t() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_length() -> f64 {
    102.4
}
fn default_samples() -> usize {
    200
}
fn default_record_every() -> usize {
    10
}
fn default_norms() -> Vec<String> {
    vec!["Linf-l2".into()]
}
fn default_c_p() -> f64 {
    1.0
}
fn default_slope_tol() -> f64 {
    0.15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scheme: String,
    pub profile: String,
    /// Declared regularity of the profile.
    pub s: f64,
    /// Nonlinearity power; 0 means the linear equation.
    #[serde(default)]
    pub p: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t_final: f64,
    #[serde(default = "default_norms")]
    pub norms: Vec<String>,
    pub h_list: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Periodic domain length; must be a multiple of every h.
    #[serde(default = "default_length")]
    pub length: f64,
    /// Time samples of linear error traces.
    #[serde(default = "default_samples")]
    pub time_samples: usize,
    /// Steps between recorded states of nonlinear runs.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_c_p")]
    pub c_p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub expected_slope: Option<f64>,
    #[serde(default = "default_slope_tol")]
    pub slope_tol: f64,
    #[serde(default)]
    pub out: Option<String>,
}

/// A parsed configuration together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: String,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<LoadedConfig> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(LoadedConfig {
            config,
            raw: text.to_string(),
        })
    }

    fn field_error(field: &str, msg: impl Into<String>) -> Error {
        Error::Config {
            line: None,
            msg: format!("field `{field}`: {}", msg.into()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Self::field_error(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        self.scheme_kind()?;
        self.profile_spec()?;
        self.norm_selectors()?;
        if !(self.p == 0.0 || (self.p > 0.0 && self.p < 4.0)) {
            return Err(Self::field_error("p", "must be 0 or lie in (0, 4)"));
        }
        if !(self.t_final > 0.0) {
            return Err(Self::field_error("T", "must be positive"));
        }
        if self.h_list.len() < 3 {
            return Err(Self::field_error("h_list", "needs at least three grid steps"));
        }
        if self.h_list.windows(2).any(|w| !(w[1] < w[0])) || self.h_list.iter().any(|h| !(*h > 0.0)) {
            return Err(Self::field_error("h_list", "must be positive and strictly decreasing"));
        }
        if !(self.dt > 0.0) {
            return Err(Self::field_error("dt", "must be positive"));
        }
        if !(self.length > 0.0) {
            return Err(Self::field_error("length", "must be positive"));
        }
        if self.time_samples < 2 || self.record_every == 0 {
            return Err(Self::field_error("time_samples", "need at least two samples"));
        }
        Ok(())
    }

    pub fn scheme_kind(&self) -> Result<SchemeKind> {
        self.scheme
            .parse()
            .map_err(|e: Error| Self::field_error("scheme", e.to_string()))
    }

    pub fn profile_spec(&self) -> Result<SpectralProfile> {
        self.profile
            .parse()
            .map_err(|e: Error| Self::field_error("profile", e.to_string()))
    }

    pub fn norm_selectors(&self) -> Result<Vec<NormSelector>> {
        if self.norms.is_empty() {
            return Err(Self::field_error("norms", "at least one selector"));
        }
        let sel: Vec<NormSelector> = self
            .norms
            .iter()
            .map(|n| n.parse().map_err(|e: Error| Self::field_error("norms", e.to_string())))
            .collect::<Result<_>>()?;
        if self.p == 0.0 && sel.contains(&NormSelector::Lq0Lp2) {
            return Err(Self::field_error("norms", "Lq0-lp2 needs p > 0"));
        }
        Ok(sel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
schema_version = 1
scheme = "hyperviscous:2"
profile = "rough:0.4,0.05"
s = 0.4
p = 2.0
T = 1.0
norms = ["Lq0-lp2", "Linf-l2"]
h_list = [0.2, 0.1, 0.05, 0.025]
"#;

    #[test]
    fn parses_and_keeps_raw_text() {
        let c = ExperimentConfig::parse(GOOD).unwrap();
        assert_eq!(c.raw, GOOD);
        assert_eq!(c.config.scheme_kind().unwrap(), SchemeKind::HigherViscous { m: 2 });
        assert_eq!(c.config.dt, 1e-3);
        assert_eq!(c.config.norm_selectors().unwrap().len(), 2);
    }

    #[test]
    fn missing_field_is_named() {
        let text = GOOD.replace("scheme = \"hyperviscous:2\"\n", "");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("scheme"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = GOOD.replace("s = 0.4", "s = = 0.4");
        match ExperimentConfig::parse(&text).unwrap_err() {
            Error::Config { line, .. } => assert_eq!(line, Some(5)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_values_rejected() {
        for (from, to) in [
            ("p = 2.0", "p = 4.0"),
            ("\"hyperviscous:2\"", "\"spectral\""),
            ("[0.2, 0.1, 0.05, 0.025]", "[0.1, 0.2, 0.05]"),
            ("schema_version = 1", "schema_version = 7"),
            ("T = 1.0", "T = 1.0\nunknown = 3"),
        ] {
            assert!(ExperimentConfig::parse(&GOOD.replace(from, to)).is_err(), "{to}");
        }
    }
}
