//! JSON input formats. Every struct rejects unknown fields, and semantic
//! checks report the offending field path.

use std::path::Path;

use chatter_core::flow::FlowConfig;
use chatter_core::fuller::{CascadeSet, Geometry, Q};
use chatter_core::hamsym::ExtremalState;
use chatter_core::skew::SkewMatrix;
use chatter_core::vecfield::{ControlAffineSystem, Monomial, PolyVectorField};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coef: f64,
    pub exp: Vec<u32>,
}

/// `fields[i][c]` lists the monomials of component `c` of `f_i`, `i = 0, …, 2m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n: usize,
    pub m: usize,
    pub fields: Vec<Vec<Vec<MonomialSpec>>>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<ControlAffineSystem> {
        if self.fields.len() != 2 * self.m + 1 {
            return Err(CliError::field("fields", format!("expected {} fields, found {}", 2 * self.m + 1, self.fields.len())));
        }
        let mut fields = Vec::with_capacity(self.fields.len());
        for (i, f) in self.fields.iter().enumerate() {
            if f.len() != self.n {
                return Err(CliError::field(format!("fields[{i}]"), format!("expected {} components, found {}", self.n, f.len())));
            }
            for (c, comp) in f.iter().enumerate() {
                for (k, mono) in comp.iter().enumerate() {
                    if mono.exp.len() != self.n {
                        return Err(CliError::field(
                            format!("fields[{i}][{c}][{k}].exp"),
                            format!("expected {} exponents, found {}", self.n, mono.exp.len()),
                        ));
                    }
                    if !mono.coef.is_finite() {
                        return Err(CliError::field(format!("fields[{i}][{c}][{k}].coef"), "must be finite"));
                    }
                }
            }
            let comps = f
                .iter()
                .map(|comp| comp.iter().map(|m| Monomial::new(m.coef, m.exp.clone())).collect())
                .collect();
            fields.push(PolyVectorField::new(self.n, comps).map_err(|e| CliError::field(format!("fields[{i}]"), e.to_string()))?);
        }
        ControlAffineSystem::new(self.n, self.m, fields).map_err(|e| CliError::field("fields", e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl StateSpec {
    pub fn build(&self, n: usize) -> Result<ExtremalState> {
        if self.q.len() != n {
            return Err(CliError::field("q", format!("expected {n} entries, found {}", self.q.len())));
        }
        if self.p.len() != n {
            return Err(CliError::field("p", format!("expected {n} entries, found {}", self.p.len())));
        }
        ExtremalState::new(self.q.clone(), self.p.clone()).map_err(|e| CliError::field("p", e.to_string()))
    }
}

/// Every field is optional and falls back to the library default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfigSpec {
    pub horizon: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub theta: Option<f64>,
    pub goh_tol: Option<f64>,
    pub max_step: Option<f64>,
    pub normalize_p: Option<bool>,
    pub singular_gain: Option<f64>,
    pub max_events: Option<usize>,
    pub event_tol: Option<f64>,
    pub blowup: Option<f64>,
    pub feasibility_tol: Option<f64>,
}

impl FlowConfigSpec {
    pub fn build(&self) -> Result<FlowConfig> {
        let d = FlowConfig::default();
        let cfg = FlowConfig {
            horizon: self.horizon.unwrap_or(d.horizon),
            rtol: self.rtol.unwrap_or(d.rtol),
            atol: self.atol.unwrap_or(d.atol),
            theta: self.theta.or(d.theta),
            goh_tol: self.goh_tol.unwrap_or(d.goh_tol),
            max_step: self.max_step.unwrap_or(d.max_step),
            normalize_p: self.normalize_p.unwrap_or(d.normalize_p),
            singular_gain: self.singular_gain.unwrap_or(d.singular_gain),
            max_events: self.max_events.unwrap_or(d.max_events),
            event_tol: self.event_tol.unwrap_or(d.event_tol),
            blowup: self.blowup.unwrap_or(d.blowup),
            feasibility_tol: self.feasibility_tol.unwrap_or(d.feasibility_tol),
        };
        cfg.validate().map_err(|e| CliError::field("config", e.to_string()))?;
        Ok(cfg)
    }
}

/// Either the strict upper triangle (row-major) or all rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewSpec {
    pub k: Option<usize>,
    pub upper: Option<Vec<f64>>,
    pub rows: Option<Vec<Vec<f64>>>,
}

impl SkewSpec {
    pub fn build(&self) -> Result<SkewMatrix> {
        match (&self.upper, &self.rows) {
            (Some(u), None) => {
                let k = self.k.ok_or_else(|| CliError::field("k", "required with `upper`"))?;
                SkewMatrix::from_upper(k, u).map_err(|e| CliError::field("upper", e.to_string()))
            }
            (None, Some(rows)) => {
                let k = rows.len();
                if let Some(i) = rows.iter().position(|r| r.len() != k) {
                    return Err(CliError::field(format!("rows[{i}]"), format!("expected {k} entries")));
                }
                let m = chatter_core::nalgebra::DMatrix::from_fn(k, k, |i, j| rows[i][j]);
                SkewMatrix::from_dense(m).map_err(|e| CliError::field("rows", e.to_string()))
            }
            _ => Err(CliError::field("upper", "give exactly one of `upper` and `rows`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub target: String,
    pub positive: bool,
    pub scale: String,
    pub ratio: String,
    pub offset: String,
    pub width: String,
    pub child: Box<CascadeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifferenceSpec {
    pub from: Box<CascadeSpec>,
    pub remove: Box<CascadeSpec>,
}

/// Rationals are strings such as `"3/8"` or `"-2"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CascadeSpec {
    Points(Vec<String>),
    Cascade(GeometrySpec),
    Union(Vec<CascadeSpec>),
    Difference(DifferenceSpec),
}

fn rational(path: &str, s: &str) -> Result<Q> {
    s.trim().parse::<Q>().map_err(|_| CliError::field(path, format!("`{s}` is not a rational")))
}

impl CascadeSpec {
    pub fn build(&self) -> Result<CascadeSet> {
        self.build_at("$")
    }

    fn build_at(&self, path: &str) -> Result<CascadeSet> {
        match self {
            CascadeSpec::Points(p) => Ok(CascadeSet::points(
                p.iter().enumerate().map(|(i, s)| rational(&format!("{path}.points[{i}]"), s)).collect::<Result<_>>()?,
            )),
            CascadeSpec::Cascade(g) => {
                let at = |f: &str| format!("{path}.cascade.{f}");
                let geometry = Geometry {
                    target: rational(&at("target"), &g.target)?,
                    positive: g.positive,
                    scale: rational(&at("scale"), &g.scale)?,
                    ratio: rational(&at("ratio"), &g.ratio)?,
                    offset: rational(&at("offset"), &g.offset)?,
                    width: rational(&at("width"), &g.width)?,
                };
                let child = g.child.build_at(&at("child"))?;
                CascadeSet::cascade(geometry, child).map_err(|e| CliError::field(format!("{path}.cascade"), e.to_string()))
            }
            CascadeSpec::Union(ms) => {
                let members = ms
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.build_at(&format!("{path}.union[{i}]")))
                    .collect::<Result<_>>()?;
                CascadeSet::union(members).map_err(|e| CliError::field(format!("{path}.union"), e.to_string()))
            }
            CascadeSpec::Difference(d) => {
                let from = d.from.build_at(&format!("{path}.difference.from"))?;
                let remove = d.remove.build_at(&format!("{path}.difference.remove"))?;
                chatter_core::fuller::difference(&from, &remove)
                    .map_err(|e| CliError::field(format!("{path}.difference"), e.to_string()))
            }
        }
    }

    pub fn from_set(s: &CascadeSet) -> Self {
        match s {
            CascadeSet::Points(p) => CascadeSpec::Points(p.iter().map(|x| x.to_string()).collect()),
            CascadeSet::Cascade { geometry: g, child } => CascadeSpec::Cascade(GeometrySpec {
                target: g.target.to_string(),
                positive: g.positive,
                scale: g.scale.to_string(),
                ratio: g.ratio.to_string(),
                offset: g.offset.to_string(),
                width: g.width.to_string(),
                child: Box::new(CascadeSpec::from_set(child)),
            }),
            CascadeSet::Union(ms) => CascadeSpec::Union(ms.iter().map(CascadeSpec::from_set).collect()),
            CascadeSet::Difference(c, b) => CascadeSpec::Difference(DifferenceSpec {
                from: Box::new(CascadeSpec::from_set(c)),
                remove: Box::new(CascadeSpec::from_set(b)),
            }),
        }
    }
}

/// One time per row, first column; a non-numeric first row is taken as a header.
pub fn read_times(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0) else { continue };
        match field.parse::<f64>() {
            Ok(t) => out.push(t),
            Err(_) if line == 0 => {}
            Err(_) => return Err(CliError::field(format!("{}:{}", path.display(), line + 1), format!("`{field}` is not a number"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skew_from_upper_and_rows_agree() {
        let a: SkewSpec = serde_json::from_str(r#"{"k": 3, "upper": [1, 2, 3]}"#).unwrap();
        let b: SkewSpec = serde_json::from_str(r#"{"rows": [[0, 1, 2], [-1, 0, 3], [-2, -3, 0]]}"#).unwrap();
        assert_eq!(a.build().unwrap(), b.build().unwrap());
    }

    #[test]
    fn skew_rejects_ragged_and_ambiguous_input() {
        let ragged: SkewSpec = serde_json::from_str(r#"{"rows": [[0, 1], [-1]]}"#).unwrap();
        assert!(matches!(ragged.build(), Err(CliError::Field { field, .. }) if field == "rows[1]"));
        let both: SkewSpec = serde_json::from_str(r#"{"k": 2, "upper": [1], "rows": [[0, 1], [-1, 0]]}"#).unwrap();
        assert!(both.build().is_err());
        assert!(serde_json::from_str::<SkewSpec>(r#"{"k": 2, "uper": [1]}"#).is_err());
    }

    #[test]
    fn system_errors_name_the_field() {
        let spec: SystemSpec = serde_json::from_str(
            r#"{"n": 2, "m": 1, "fields": [[[], []], [[{"coef": 1, "exp": [0]}], []], [[], []]]}"#,
        )
        .unwrap();
        match spec.build() {
            Err(CliError::Field { field, .. }) => assert_eq!(field, "fields[1][0][0].exp"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cascade_round_trips_through_its_description() {
        let set = chatter_core::fuller::make_cascade(3, 9).unwrap();
        let spec = CascadeSpec::from_set(&set);
        let text = serde_json::to_string(&spec).unwrap();
        let back: CascadeSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.build().unwrap(), set);
    }

    #[test]
    fn cascade_errors_carry_the_path() {
        let spec: CascadeSpec = serde_json::from_str(
            r#"{"union": [{"points": ["0"]}, {"points": ["1/2", "x"]}]}"#,
        )
        .unwrap();
        match spec.build() {
            Err(CliError::Field { field, .. }) => assert_eq!(field, "$.union[1].points[1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = FlowConfigSpec::default().build().unwrap();
        assert_eq!(cfg, FlowConfig::default());
        let bad = FlowConfigSpec { rtol: Some(-1.0), ..FlowConfigSpec::default() };
        assert!(bad.build().is_err());
    }
}
