//! TOML spec files.
//!
//! ```toml
//! base_dim = 1
//! v_rank = 1
//! e_dim = 1
//! anchor = [["1"]]
//! gamma = [["2 + 3*y1"]]
//! declared = ["affine"]          # optional: "affine", "linear"
//!
//! [sections]                     # optional, all keys optional
//! zeta = ["1"]
//! sigma = ["x1"]
//! eta = ["x1"]
//! f = "1 + x1"
//!
//! [curve]                        # optional
//! c = ["1"]
//! x0 = [0.0]
//! t0 = 0.0
//! t1 = 1.0
//! y0 = [1.0]
//!
//! [sode]                         # optional
//! dof = 1
//! forces = ["1 + 2*v1 + 3*v1^2"]
//! ```
//!
//! The bundle keys may be left out of files that only carry a `[sode]` block.

use std::path::Path;

use rhoconn::exprlang::ParseError;
use rhoconn::sode::SodeSpec;
use rhoconn::{BundleSpec, Expr};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    base_dim: Option<usize>,
    v_rank: Option<usize>,
    e_dim: Option<usize>,
    anchor: Option<Vec<Vec<String>>>,
    gamma: Option<Vec<Vec<String>>>,
    #[serde(default)]
    declared: Vec<Declared>,
    sections: Option<RawSections>,
    curve: Option<RawCurve>,
    sode: Option<RawSode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Declared {
    Affine,
    Linear,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSections {
    zeta: Option<Vec<String>>,
    sigma: Option<Vec<String>>,
    eta: Option<Vec<String>>,
    f: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurve {
    c: Vec<String>,
    x0: Vec<f64>,
    t0: Option<f64>,
    t1: Option<f64>,
    y0: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSode {
    dof: usize,
    forces: Vec<String>,
}

/// Section expressions; validated against a spec when used.
#[derive(Debug, Clone, Default)]
pub struct Sections {
    pub zeta: Option<Vec<Expr>>,
    pub sigma: Option<Vec<Expr>>,
    pub eta: Option<Vec<Expr>>,
    pub f: Option<Expr>,
}

#[derive(Debug, Clone)]
pub struct CurveBlock {
    pub c: Vec<Expr>,
    pub x0: Vec<f64>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub y0: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SpecFile {
    pub path: String,
    pub bundle: Option<BundleSpec>,
    pub declared: Vec<Declared>,
    pub sections: Sections,
    pub curve: Option<CurveBlock>,
    pub sode: Option<SodeSpec>,
}

impl SpecFile {
    pub fn declares(&self, d: Declared) -> bool {
        self.declared.contains(&d)
    }

    /// The bundle part, which every command except `sode` needs.
    pub fn bundle(&self) -> Result<&BundleSpec, CliError> {
        self.bundle.as_ref().ok_or_else(|| CliError::Spec {
            path: self.path.clone(),
            message: "missing bundle keys (base_dim, v_rank, e_dim, anchor, gamma)".into(),
        })
    }
}

fn expr_at(path: &str, field: &str, src: &str) -> Result<Expr, CliError> {
    src.parse::<Expr>().map_err(|e: ParseError| CliError::Expr {
        path: path.into(),
        field: field.into(),
        offset: e.offset(),
        source_text: src.into(),
        message: e.to_string(),
    })
}

pub(crate) fn expr_list(path: &str, field: &str, src: &[String]) -> Result<Vec<Expr>, CliError> {
    src.iter().enumerate().map(|(i, s)| expr_at(path, &format!("{field}[{i}]"), s)).collect()
}

fn expr_matrix(path: &str, field: &str, src: &[Vec<String>]) -> Result<Vec<Vec<Expr>>, CliError> {
    src.iter().enumerate().map(|(i, row)| expr_list(path, &format!("{field}[{i}]"), row)).collect()
}

// 1-based line and column of a byte offset
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses spec-file text; `path` is used in error messages only.
pub fn parse_spec(path: &str, text: &str) -> Result<SpecFile, CliError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| {
        let (line, col) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        CliError::Toml { path: path.into(), line, col, message: e.message().to_string() }
    })?;

    let bundle = match (raw.base_dim, raw.v_rank, raw.e_dim, &raw.anchor, &raw.gamma) {
        (None, None, None, None, None) => None,
        (Some(n), Some(k), Some(m), Some(anchor), Some(gamma)) => {
            let anchor = expr_matrix(path, "anchor", anchor)?;
            let gamma = expr_matrix(path, "gamma", gamma)?;
            let spec = BundleSpec::new(n, k, m, anchor, gamma).map_err(|e| match e {
                rhoconn::Error::InvalidSpec(v) => {
                    CliError::InvalidSpec { path: path.into(), violations: v.iter().map(ToString::to_string).collect() }
                }
                other => CliError::Spec { path: path.into(), message: other.to_string() },
            })?;
            Some(spec)
        }
        _ => {
            return Err(CliError::Spec {
                path: path.into(),
                message: "base_dim, v_rank, e_dim, anchor and gamma must be given together".into(),
            })
        }
    };

    let sections = match raw.sections {
        None => Sections::default(),
        Some(s) => Sections {
            zeta: s.zeta.as_deref().map(|v| expr_list(path, "sections.zeta", v)).transpose()?,
            sigma: s.sigma.as_deref().map(|v| expr_list(path, "sections.sigma", v)).transpose()?,
            eta: s.eta.as_deref().map(|v| expr_list(path, "sections.eta", v)).transpose()?,
            f: s.f.as_deref().map(|v| expr_at(path, "sections.f", v)).transpose()?,
        },
    };

    let curve = raw
        .curve
        .map(|c| -> Result<CurveBlock, CliError> {
            Ok(CurveBlock { c: expr_list(path, "curve.c", &c.c)?, x0: c.x0, t0: c.t0, t1: c.t1, y0: c.y0 })
        })
        .transpose()?;

    let sode = raw
        .sode
        .map(|s| {
            let forces = expr_list(path, "sode.forces", &s.forces)?;
            SodeSpec::new(s.dof, forces).map_err(|e| CliError::Spec { path: path.into(), message: e.to_string() })
        })
        .transpose()?;

    Ok(SpecFile { path: path.into(), bundle, declared: raw.declared, sections, curve, sode })
}

pub fn load_spec(path: &Path) -> Result<SpecFile, CliError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: shown.clone(), message: e.to_string() })?;
    parse_spec(&shown, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const F1: &str = r#"
base_dim = 1
v_rank = 1
e_dim = 1
anchor = [["1"]]
gamma = [["2 + 3*y1"]]
declared = ["affine"]
"#;

    #[test]
    fn reads_a_bundle() {
        let spec = parse_spec("f1.toml", F1).unwrap();
        assert_eq!(spec.bundle().unwrap().gamma[0][0].to_string(), "2 + 3*y1");
        assert!(spec.declares(Declared::Affine) && !spec.declares(Declared::Linear));
        assert!(spec.curve.is_none() && spec.sode.is_none());
    }

    #[test]
    fn expression_errors_carry_field_and_offset() {
        let text = F1.replace("2 + 3*y1", "2 + * 3");
        match parse_spec("bad.toml", &text).unwrap_err() {
            CliError::Expr { field, offset, .. } => assert_eq!((field.as_str(), offset), ("gamma[0][0]", 4)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn toml_errors_carry_line_and_column() {
        let text = "base_dim = 1\nv_rank = = 2\n";
        match parse_spec("bad.toml", text).unwrap_err() {
            CliError::Toml { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_partial_bundles_and_unknown_keys() {
        assert!(matches!(parse_spec("p.toml", "base_dim = 1\n"), Err(CliError::Spec { .. })));
        assert!(matches!(parse_spec("p.toml", "colour = 1\n"), Err(CliError::Toml { .. })));
        let shape = F1.replace("[[\"1\"]]", "[[\"1\", \"0\"]]");
        assert!(matches!(parse_spec("p.toml", &shape), Err(CliError::InvalidSpec { .. })));
    }

    #[test]
    fn sode_only_files() {
        let spec = parse_spec("f3.toml", "[sode]\ndof = 1\nforces = [\"1 + 2*v1 + 3*v1^2\"]\n").unwrap();
        assert!(spec.bundle.is_none());
        assert_eq!(spec.sode.unwrap().dof, 1);
        assert!(parse_spec("x.toml", "[sode]\ndof = 1\nforces = [\"y1\"]\n").is_err());
    }
}
