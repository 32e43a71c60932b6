//! Run configuration: a TOML file names the Finsler model, the bundle-metric
//! profiles, optional vector fields and endomorphism sections (all as infix
//! expressions), sampling controls and report options. Expressions are parsed
//! up front so a bad config fails with the offending key path.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use finslerb_core::expr::{parse_expr, Expr};
use finslerb_core::finsler::FinslerModel;
use finslerb_core::gnat::{FNaturalSpec, ScalarProfile};
use finslerb_core::symmetry::{EndoSection, VectorFieldOnM};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    metric: RawMetric,
    #[serde(default)]
    fields: RawFields,
    #[serde(default)]
    sampling: RawSampling,
    #[serde(default)]
    report: RawReport,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    family: String,
    dimension: usize,
    /// a_ij entries for the riemannian/randers families
    metric: Option<Vec<Vec<String>>>,
    /// conformal shortcut: a_ij = factor * delta_ij
    factor: Option<String>,
    /// b_i entries for the randers family
    covector: Option<Vec<String>>,
    /// F^2 for the custom family
    f2: Option<String>,
    /// half-width of the chart box used for admissibility checks
    #[serde(default = "default_box")]
    chart_box: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetric {
    preset: Option<String>,
    alpha1: Option<String>,
    alpha2: Option<String>,
    alpha3: Option<String>,
    beta1: Option<String>,
    beta2: Option<String>,
    beta3: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFields {
    xi: Option<Vec<String>>,
    endo: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_points")]
    points: usize,
    #[serde(default = "default_shells")]
    shells: Vec<f64>,
    #[serde(default = "default_box")]
    x_box: f64,
}

impl Default for RawSampling {
    fn default() -> Self {
        RawSampling {
            seed: default_seed(),
            points: default_points(),
            shells: default_shells(),
            x_box: default_box(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReport {
    format: Option<String>,
    out: Option<String>,
}

fn default_seed() -> u64 {
    42
}

fn default_points() -> usize {
    40
}

fn default_shells() -> Vec<f64> {
    vec![0.5, 2.0]
}

fn default_box() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

/// Fully validated run configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub model: FinslerModel,
    pub spec: FNaturalSpec,
    pub xi: Option<VectorFieldOnM>,
    pub endo: Option<EndoSection>,
    pub seed: u64,
    pub points: usize,
    pub shells: Vec<f64>,
    pub x_box: f64,
    pub format: ReportFormat,
    pub out: Option<String>,
    pub tolerances: BTreeMap<String, f64>,
}

fn validation(key: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { key: key.to_string(), message: message.into() }
}

fn x_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn parse_with(key: &str, src: &str, vars: &[&str]) -> Result<Expr, CliError> {
    parse_expr(src, vars).map_err(|e| validation(key, e.to_string()))
}

fn build_model(raw: &RawModel) -> Result<FinslerModel, CliError> {
    let n = raw.dimension;
    if !(1..=4).contains(&n) {
        return Err(validation("model.dimension", "dimension must be between 1 and 4"));
    }
    let names = x_names(n);
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let parse_matrix = |key: &str, rows: &Vec<Vec<String>>| -> Result<Vec<Vec<Expr>>, CliError> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(validation(key, format!("expected a {n}x{n} matrix")));
        }
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, src)| parse_with(&format!("{key}[{i}][{j}]"), src, &refs))
                    .collect()
            })
            .collect()
    };
    match raw.family.as_str() {
        "euclidean" => Ok(FinslerModel::euclidean(n)),
        "riemannian" => {
            if let Some(factor) = &raw.factor {
                let f = parse_with("model.factor", factor, &refs)?;
                Ok(FinslerModel::conformal_euclidean(n, f))
            } else if let Some(rows) = &raw.metric {
                let m = parse_matrix("model.metric", rows)?;
                FinslerModel::riemannian(n, m)
                    .map_err(|e| validation("model.metric", e.to_string()))
            } else {
                Err(validation("model.metric", "riemannian family needs metric or factor"))
            }
        }
        "randers" => {
            let rows = raw
                .metric
                .clone()
                .unwrap_or_else(|| identity_strings(n));
            let m = parse_matrix("model.metric", &rows)?;
            let cov = raw
                .covector
                .as_ref()
                .ok_or_else(|| validation("model.covector", "randers family needs a covector"))?;
            if cov.len() != n {
                return Err(validation("model.covector", format!("expected {n} entries")));
            }
            let b = cov
                .iter()
                .enumerate()
                .map(|(i, src)| parse_with(&format!("model.covector[{i}]"), src, &refs))
                .collect::<Result<Vec<_>, _>>()?;
            FinslerModel::randers(n, m, b, raw.chart_box)
                .map_err(|e| validation("model.covector", e.to_string()))
        }
        "custom" => {
            let f2src = raw
                .f2
                .as_ref()
                .ok_or_else(|| validation("model.f2", "custom family needs f2"))?;
            let mut all = names.clone();
            all.extend((1..=n).map(|i| format!("u{i}")));
            let all_refs: Vec<&str> = all.iter().map(|s| s.as_str()).collect();
            let f2 = parse_with("model.f2", f2src, &all_refs)?;
            Ok(FinslerModel::custom(n, f2))
        }
        other => Err(validation("model.family", format!("unknown family '{other}'"))),
    }
}

fn identity_strings(n: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { "1".into() } else { "0".into() }).collect())
        .collect()
}

fn build_spec(raw: &RawMetric) -> Result<FNaturalSpec, CliError> {
    if let Some(name) = &raw.preset {
        return match name.as_str() {
            "sasaki" => Ok(FNaturalSpec::sasaki()),
            "cheeger_gromoll" => Ok(FNaturalSpec::cheeger_gromoll()),
            other => Err(validation("metric.preset", format!("unknown preset '{other}'"))),
        };
    }
    let profile = |key: &str, src: &Option<String>, default: f64| -> Result<ScalarProfile, CliError> {
        match src {
            Some(s) => ScalarProfile::parse(s).map_err(|e| validation(key, e.to_string())),
            None => Ok(ScalarProfile::constant(default)),
        }
    };
    if raw.alpha1.is_none() {
        return Err(validation("metric.alpha1", "either a preset or alpha1 is required"));
    }
    Ok(FNaturalSpec::new(
        profile("metric.alpha1", &raw.alpha1, 1.0)?,
        profile("metric.alpha2", &raw.alpha2, 0.0)?,
        profile("metric.alpha3", &raw.alpha3, 0.0)?,
        profile("metric.beta1", &raw.beta1, 0.0)?,
        profile("metric.beta2", &raw.beta2, 0.0)?,
        profile("metric.beta3", &raw.beta3, 0.0)?,
    ))
}

/// Load and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    load_config_str(&text)
}

pub fn load_config_str(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let model = build_model(&raw.model)?;
    let spec = build_spec(&raw.metric)?;
    let n = model.dim();
    let names = x_names(n);
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();

    let xi = match &raw.fields.xi {
        Some(srcs) => {
            if srcs.len() != n {
                return Err(validation("fields.xi", format!("expected {n} components")));
            }
            let coeffs = srcs
                .iter()
                .enumerate()
                .map(|(i, s)| parse_with(&format!("fields.xi[{i}]"), s, &refs))
                .collect::<Result<Vec<_>, _>>()?;
            Some(VectorFieldOnM::new(coeffs))
        }
        None => None,
    };
    let endo = match &raw.fields.endo {
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(validation("fields.endo", format!("expected a {n}x{n} matrix")));
            }
            let mut all = names.clone();
            all.extend((1..=n).map(|i| format!("u{i}")));
            let all_refs: Vec<&str> = all.iter().map(|s| s.as_str()).collect();
            let parsed = rows
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(j, s)| parse_with(&format!("fields.endo[{i}][{j}]"), s, &all_refs))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(EndoSection::new(parsed))
        }
        None => None,
    };

    if raw.sampling.points == 0 {
        return Err(validation("sampling.points", "need at least one sample point"));
    }
    if raw.sampling.shells.iter().any(|&s| s < 0.1) {
        return Err(validation("sampling.shells", "shells must stay >= 0.1"));
    }
    let format = match raw.report.format.as_deref() {
        None | Some("json") => ReportFormat::Json,
        Some("text") => ReportFormat::Text,
        Some(other) => {
            return Err(validation("report.format", format!("unknown format '{other}'")))
        }
    };
    Ok(RunConfig {
        model,
        spec,
        xi,
        endo,
        seed: raw.sampling.seed,
        points: raw.sampling.points,
        shells: raw.sampling.shells,
        x_box: raw.sampling.x_box,
        format,
        out: raw.report.out.clone(),
        tolerances: raw.tolerances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_valid() {
        let cfg = load_config_str(
            r#"
            [model]
            family = "euclidean"
            dimension = 2

            [metric]
            preset = "sasaki"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.model.dim(), 2);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.points, 40);
    }

    #[test]
    fn profile_expressions_parse() {
        let cfg = load_config_str(
            r#"
            [model]
            family = "euclidean"
            dimension = 2

            [metric]
            alpha1 = "1/(1+t)"
            alpha3 = "t/(1+t)"
            beta1 = "1/(1+t)"
            beta3 = "-1/(1+t)"
            "#,
        )
        .unwrap();
        // matches the Cheeger-Gromoll values
        assert!((cfg.spec.a1.eval(3.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((cfg.spec.b3.eval(1.0).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_preset_is_a_validation_error() {
        let err = load_config_str(
            r#"
            [model]
            family = "euclidean"
            dimension = 2

            [metric]
            preset = "oproiu"
            "#,
        )
        .unwrap_err();
        match err {
            CliError::Validation { key, .. } => assert_eq!(key, "metric.preset"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_expression_names_the_key() {
        let err = load_config_str(
            r#"
            [model]
            family = "randers"
            dimension = 2
            covector = ["0.3 + q", "0"]

            [metric]
            preset = "sasaki"
            "#,
        )
        .unwrap_err();
        match err {
            CliError::Validation { key, .. } => assert_eq!(key, "model.covector[0]"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn inadmissible_covector_rejected() {
        let err = load_config_str(
            r#"
            [model]
            family = "randers"
            dimension = 2
            covector = ["1.2", "0"]

            [metric]
            preset = "sasaki"
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Validation { .. }));
    }
}
