//! Experiment configuration read from TOML.

use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::value::MapAccessDeserializer;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use spinlab::bounds::BoundKind;
use spinlab::clifford::SplitRep;
use spinlab::models::ModelGeometry;
use spinlab::spectral::BandLimited;
use spinlab::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub split: Option<SplitSpec>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub bounds: Vec<BoundKind>,
    /// Evaluate only the eigenpairs of smallest `|λ|`; all when absent.
    #[serde(default)]
    pub eigenpairs: Option<usize>,
    /// Conformal factor `u` on the model torus.
    #[serde(default)]
    pub conformal: Option<FunctionSpec>,
    #[serde(default)]
    pub normal_curvature: Option<NormalCurvatureSpec>,
    /// Quadrature nodes per coordinate on spheres.
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_truncation() -> usize {
    4
}

fn default_nodes() -> usize {
    24
}

/// Model table; `kind` must be its first key.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Sphere(SphereSpec),
    ProductOfCircles(CirclesSpec),
    FlatTorus(FlatTorusSpec),
    AuxiliaryTorus(AuxTorusSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSpec {
    #[serde(default = "two")]
    pub m: usize,
    #[serde(default = "one")]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirclesSpec {
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatTorusSpec {
    pub m: usize,
    pub n: usize,
    pub periods: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxTorusSpec {
    pub m: usize,
    pub n: usize,
    pub periods: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
    /// `m × ⌊n/2⌋` rotation numbers, one row per circle factor.
    pub holonomy: Vec<Vec<f64>>,
    #[serde(default)]
    pub f: FunctionSpec,
}

fn two() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

/// A real band-limited function on the model torus; `kind` comes first.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionSpec {
    #[default]
    Zero,
    Constant(ConstantSpec),
    Cosine(WaveSpec),
    Sine(WaveSpec),
    Terms(TermsSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantSpec {
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub mode: Vec<i32>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermsSpec {
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub mode: Vec<i32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoFields {}

/// Tables dispatched on a leading `kind` key. The remaining entries go
/// straight to the variant's deserializer, which keeps error locations exact.
trait Tagged: Sized {
    const WHAT: &'static str;
    const KINDS: &'static [&'static str];
    fn from_kind<'de, A: MapAccess<'de>>(kind: &str, rest: A) -> Result<Self, A::Error>;
}

fn rest<'de, A: MapAccess<'de>, T: Deserialize<'de>>(map: A) -> Result<T, A::Error> {
    T::deserialize(MapAccessDeserializer::new(map))
}

struct TaggedVisitor<T>(PhantomData<T>);

impl<'de, T: Tagged> Visitor<'de> for TaggedVisitor<T> {
    type Value = T;

    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        write!(f, "a {} table", T::WHAT)
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<T, A::Error> {
        match map.next_key::<String>()? {
            Some(k) if k == "kind" => {}
            _ => return Err(de::Error::custom(format!("`kind` must be the first key of a {} table", T::WHAT))),
        }
        let kind: String = map.next_value()?;
        T::from_kind(&kind, map)
    }
}

impl Tagged for ModelSpec {
    const WHAT: &'static str = "model";
    const KINDS: &'static [&'static str] = &["sphere", "product-of-circles", "flat-torus", "auxiliary-torus"];

    fn from_kind<'de, A: MapAccess<'de>>(kind: &str, map: A) -> Result<Self, A::Error> {
        Ok(match kind {
            "sphere" => ModelSpec::Sphere(rest(map)?),
            "product-of-circles" => ModelSpec::ProductOfCircles(rest(map)?),
            "flat-torus" => ModelSpec::FlatTorus(rest(map)?),
            "auxiliary-torus" => ModelSpec::AuxiliaryTorus(rest(map)?),
            other => return Err(de::Error::unknown_variant(other, Self::KINDS)),
        })
    }
}

impl Tagged for FunctionSpec {
    const WHAT: &'static str = "function";
    const KINDS: &'static [&'static str] = &["zero", "constant", "cosine", "sine", "terms"];

    fn from_kind<'de, A: MapAccess<'de>>(kind: &str, map: A) -> Result<Self, A::Error> {
        Ok(match kind {
            "zero" => {
                rest::<A, NoFields>(map)?;
                FunctionSpec::Zero
            }
            "constant" => FunctionSpec::Constant(rest(map)?),
            "cosine" => FunctionSpec::Cosine(rest(map)?),
            "sine" => FunctionSpec::Sine(rest(map)?),
            "terms" => FunctionSpec::Terms(rest(map)?),
            other => return Err(de::Error::unknown_variant(other, Self::KINDS)),
        })
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_map(TaggedVisitor(PhantomData))
    }
}

impl<'de> Deserialize<'de> for FunctionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_map(TaggedVisitor(PhantomData))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub parity_m: u8,
    #[serde(default)]
    pub parity_n: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalCurvatureSpec {
    pub scale: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub margin: f64,
    pub hermitian: f64,
    pub square: f64,
    pub relation: f64,
    pub residual: f64,
    pub covariance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            margin: 1e-9,
            hermitian: 1e-12,
            square: 1e-10,
            relation: 1e-12,
            residual: 1e-10,
            covariance: 1e-6,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Batch {
    experiment: Vec<ExperimentConfig>,
}

impl FunctionSpec {
    pub fn build(&self, periods: &[f64]) -> Result<BandLimited> {
        let p = periods.to_vec();
        Ok(match self {
            FunctionSpec::Zero => BandLimited::zero(p),
            FunctionSpec::Constant(c) => BandLimited::constant(p, c.value),
            FunctionSpec::Cosine(w) => BandLimited::cosine(p, w.mode.clone(), w.amplitude)?,
            FunctionSpec::Sine(w) => BandLimited::sine(p, w.mode.clone(), w.amplitude)?,
            FunctionSpec::Terms(TermsSpec { terms }) => {
                BandLimited::from_terms(p, terms.iter().map(|t| (t.mode.clone(), C64::new(t.re, t.im))).collect())?
            }
        })
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<ModelGeometry> {
        let zeros = |m: usize| vec![0.0; m];
        Ok(match self {
            ModelSpec::Sphere(SphereSpec { m, radius }) => ModelGeometry::sphere(*m, *radius)?,
            ModelSpec::ProductOfCircles(CirclesSpec { radii }) => ModelGeometry::product_of_circles(radii.clone())?,
            ModelSpec::FlatTorus(FlatTorusSpec { m, n, periods, shift }) => {
                ModelGeometry::flat_torus(*m, *n, periods.clone(), shift.clone().unwrap_or_else(|| zeros(*m)))?
            }
            ModelSpec::AuxiliaryTorus(AuxTorusSpec { m, n, periods, shift, holonomy, f }) => ModelGeometry::auxiliary_torus(
                *m,
                *n,
                periods.clone(),
                shift.clone().unwrap_or_else(|| zeros(*m)),
                holonomy.clone(),
                f.build(periods).context("function f")?,
            )?,
        })
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            bail!("experiment name {:?} must be non-empty and use only [A-Za-z0-9._-]", self.name);
        }
        if self.truncation < 1 {
            bail!("truncation K must be at least 1");
        }
        let t = &self.tolerances;
        for (what, v) in [
            ("margin", t.margin),
            ("hermitian", t.hermitian),
            ("square", t.square),
            ("relation", t.relation),
            ("residual", t.residual),
            ("covariance", t.covariance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("tolerance {what} must be positive, got {v}");
            }
        }
        if self.eigenpairs == Some(0) {
            bail!("eigenpairs must be at least 1 when given");
        }
        let model = self.model.build()?;
        if let Some(s) = &self.split {
            if (s.m, s.n) != (model.m(), model.n()) {
                bail!("split (m, n) = ({}, {}) disagrees with model ({}, {})", s.m, s.n, model.m(), model.n());
            }
        }
        Ok(())
    }

    pub fn build_split(&self, model: &ModelGeometry) -> Result<SplitRep> {
        let s = self.split.unwrap_or(SplitSpec { m: model.m(), n: model.n(), parity_m: 0, parity_n: 0 });
        Ok(SplitRep::new(s.m, s.n, s.parity_m, s.parity_n)?)
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn parse_error(origin: &str, text: &str, err: toml::de::Error) -> anyhow::Error {
    match err.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            anyhow::anyhow!("{origin}:{line}:{col}: {}", err.message())
        }
        None => anyhow::anyhow!("{origin}: {}", err.message()),
    }
}

/// Parses one experiment, or a batch written as `[[experiment]]` tables.
pub fn parse_configs(origin: &str, text: &str) -> Result<Vec<ExperimentConfig>> {
    let table: toml::Table = toml::from_str(text).map_err(|e| parse_error(origin, text, e))?;
    let configs = if table.contains_key("experiment") {
        toml::from_str::<Batch>(text).map_err(|e| parse_error(origin, text, e))?.experiment
    } else {
        vec![toml::from_str::<ExperimentConfig>(text).map_err(|e| parse_error(origin, text, e))?]
    };
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        bail!("{origin}: duplicate experiment name {:?}", w[0]);
    }
    for c in &configs {
        c.validate().with_context(|| format!("{origin}: experiment {:?}", c.name))?;
    }
    Ok(configs)
}

pub fn load_configs(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_configs(&path.display().to_string(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "name = \"x\"\ntruncation = 3\n[model]\nkind = \"sphere\"\nradius = \"one\"\n";
        let err = parse_configs("cfg.toml", text).unwrap_err().to_string();
        assert!(err.starts_with("cfg.toml:5:"), "{err}");
    }

    #[test]
    fn nested_errors_point_at_the_value() {
        let text = "name = \"x\"\n[model]\nkind = \"auxiliary-torus\"\nm = 2\nn = 2\nperiods = [1.0, 1.0]\n\
                    holonomy = [[0.0], [0.0]]\nf = { kind = \"constant\", valu = 1.0 }\n";
        let err = parse_configs("c", text).unwrap_err().to_string();
        assert!(err.starts_with("c:8:"), "{err}");
        let err = parse_configs("c", "name = \"x\"\n[model]\nradius = 1.0\nkind = \"sphere\"\n").unwrap_err().to_string();
        assert!(err.contains("`kind` must be the first key"), "{err}");
    }

    #[test]
    fn split_must_match_model() {
        let text = "name = \"x\"\n[model]\nkind = \"product-of-circles\"\nradii = [1.0, 1.0]\n[split]\nm = 2\nn = 1\n";
        let err = format!("{:#}", parse_configs("c", text).unwrap_err());
        assert!(err.contains("disagrees"), "{err}");
    }

    #[test]
    fn tolerances_must_be_positive() {
        let text = "name = \"x\"\n[model]\nkind = \"sphere\"\n[tolerances]\nmargin = 0.0\n";
        assert!(parse_configs("c", text).is_err());
    }

    #[test]
    fn batches_and_aliases() {
        let text = "[[experiment]]\nname = \"a\"\nbounds = [\"thm-q\"]\n[experiment.model]\nkind = \"sphere\"\n\
                    [[experiment]]\nname = \"b\"\ntruncation = 2\n[experiment.model]\nkind = \"flat-torus\"\nm = 2\nn = 1\nperiods = [1.0, 1.0]\n";
        let cfgs = parse_configs("c", text).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[0].bounds, vec![BoundKind::EnergyMomentum]);
        assert_eq!(cfgs[1].truncation, 2);
    }

    #[test]
    fn line_columns() {
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
        assert_eq!(line_col("ab", 0), (1, 1));
    }
}
