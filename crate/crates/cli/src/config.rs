//! Line-oriented run configuration: `[section]` headers, `key = value`
//! entries, `#` comments.
//!
//! ```text
//! [chart]
//! kind = space_form
//! n = 3
//! k = 1.0
//! radius = 2.0
//!
//! [test_function]
//! a = optimal
//! ```

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use curvex_core::charts::{make_chart, ModelKind, ModelSpec, Profile};
use curvex_core::expansion::{SeriesModel, TGrid};
use curvex_core::quadrature::{QuadratureSpec, Rule};
use curvex_core::rigidity::Verdict;
use curvex_core::tensor::Sym2;
use serde::Serialize;

/// Parse or validation failure, located by line and `section.key` where known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError { line: Some(line), field: None, message: message.into() }
    }

    fn field(line: Option<usize>, field: String, message: impl Into<String>) -> Self {
        ConfigError { line, field: Some(field), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// `key = value` entries of one section, with their line numbers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Section {
    pub line: usize,
    pub entries: BTreeMap<String, (usize, String)>,
}

/// The syntactic layer: sections and raw string values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Document {
    pub sections: BTreeMap<String, Section>,
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

pub fn parse_document(text: &str) -> Result<Document, ConfigError> {
    let mut doc = Document::default();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, "section header is missing `]`"))?
                .trim();
            if !is_ident(name) {
                return Err(ConfigError::at(line, format!("invalid section name `{name}`")));
            }
            if doc.sections.contains_key(name) {
                return Err(ConfigError::at(line, format!("section [{name}] appears twice")));
            }
            doc.sections.insert(name.to_string(), Section { line, entries: BTreeMap::new() });
            current = Some(name.to_string());
            continue;
        }
        let (key, value) =
            body.split_once('=').ok_or_else(|| ConfigError::at(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let section = current
            .as_ref()
            .ok_or_else(|| ConfigError::at(line, format!("`{key}` appears before any section header")))?;
        let name = format!("{section}.{key}");
        if !is_ident(key) {
            return Err(ConfigError::field(Some(line), name, "invalid key"));
        }
        if value.is_empty() {
            return Err(ConfigError::field(Some(line), name, "empty value"));
        }
        let entries = &mut doc.sections.get_mut(section).expect("current section exists").entries;
        if let Some((first, _)) = entries.get(key) {
            return Err(ConfigError::field(Some(line), name, format!("duplicate key (first set on line {first})")));
        }
        entries.insert(key.to_string(), (line, value.to_string()));
    }
    Ok(doc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Experiment {
    #[serde(rename = "expand_L")]
    ExpandL,
    #[serde(rename = "expand_W")]
    ExpandW,
    #[serde(rename = "volume")]
    Volume,
    #[serde(rename = "isoprofile")]
    Isoprofile,
    #[serde(rename = "symmetrize")]
    Symmetrize,
    #[serde(rename = "mu")]
    Mu,
    #[serde(rename = "rigidity")]
    Rigidity,
    #[serde(rename = "moments_selftest")]
    MomentsSelftest,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::ExpandL,
        Experiment::ExpandW,
        Experiment::Volume,
        Experiment::Isoprofile,
        Experiment::Symmetrize,
        Experiment::Mu,
        Experiment::Rigidity,
        Experiment::MomentsSelftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ExpandL => "expand_L",
            Experiment::ExpandW => "expand_W",
            Experiment::Volume => "volume",
            Experiment::Isoprofile => "isoprofile",
            Experiment::Symmetrize => "symmetrize",
            Experiment::Mu => "mu",
            Experiment::Rigidity => "rigidity",
            Experiment::MomentsSelftest => "moments_selftest",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartConfig {
    pub spec: ModelSpec,
    /// Base point, in chart coordinates.
    pub point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AChoice {
    /// `Rc(p)/3`
    Optimal,
    Zero,
    Matrix(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaChoice {
    /// `-Sc(p)/3`
    Optimal,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunctionConfig {
    pub a: AChoice,
    pub alpha: AlphaChoice,
    pub support_radius: f64,
}

impl TestFunctionConfig {
    pub fn a_matrix(&self, n: usize) -> Option<Sym2> {
        match &self.a {
            AChoice::Optimal => None,
            AChoice::Zero => Some(Sym2::zeros(n)),
            AChoice::Matrix(v) => Sym2::from_row_major(n, v.clone()).ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub t_max: f64,
    pub points: usize,
    pub factor: f64,
    pub model: SeriesModel,
}

impl GridConfig {
    pub fn grid(&self) -> curvex_core::Result<TGrid> {
        TGrid::geometric(self.t_max, self.points, self.factor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolumeConfig {
    pub r_max: f64,
    pub points: usize,
    pub factor: f64,
    /// Comparison curvature for the Bishop–Gromov ratios.
    pub k_model: f64,
}

impl VolumeConfig {
    pub fn radii(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.r_max * self.factor.powf(i as f64)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoprofileConfig {
    pub k: f64,
    pub betas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetrizeConfig {
    pub t: f64,
    pub k: f64,
    pub levels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuConfig {
    pub t_values: Vec<f64>,
    pub nodes: usize,
    /// Fixed ball radius; when absent the radius is `radius_over_sqrt_t * sqrt(t)`.
    pub radius: Option<f64>,
    pub radius_over_sqrt_t: f64,
    pub gamma: f64,
    pub q_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidityConfig {
    pub k: f64,
    pub points: Vec<Vec<f64>>,
    pub betas: Vec<f64>,
    pub extended: bool,
    pub tolerance: f64,
    pub average_radius: f64,
    pub expect: Option<Verdict>,
}

/// Pass thresholds; a coefficient passes when `|got - want| <= max(rtol |want|, atol)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TolerancePolicy {
    pub c1_rtol: f64,
    pub c1_atol: f64,
    pub c2_rtol: f64,
    pub c2_atol: f64,
    pub volume_c1_rtol: f64,
    pub volume_c2_rtol: f64,
    pub moments_rtol: f64,
    pub preservation: f64,
    pub isoperimetry: f64,
    pub mu_flat_low: f64,
    pub mu_flat_high: f64,
    pub mu_q_rtol: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            c1_rtol: 5e-3,
            c1_atol: 1e-3,
            c2_rtol: 5e-2,
            c2_atol: 1e-4,
            volume_c1_rtol: 1e-2,
            volume_c2_rtol: 5e-2,
            moments_rtol: 1e-10,
            preservation: 1e-8,
            isoperimetry: 1e-6,
            mu_flat_low: -1e-6,
            mu_flat_high: 1e-3,
            mu_q_rtol: 5e-2,
        }
    }
}

impl TolerancePolicy {
    pub fn accepts(rtol: f64, atol: f64, got: f64, want: f64) -> bool {
        (got - want).abs() <= (rtol * want.abs()).max(atol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub plotdata: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentsConfig {
    pub dims: Vec<usize>,
    pub t_values: Vec<f64>,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub chart: ChartConfig,
    pub test_function: TestFunctionConfig,
    pub t_grid: GridConfig,
    pub quadrature: QuadratureSpec,
    pub volume: VolumeConfig,
    pub isoprofile: IsoprofileConfig,
    pub symmetrize: SymmetrizeConfig,
    pub mu: MuConfig,
    pub rigidity: RigidityConfig,
    pub moments: MomentsConfig,
    pub tolerance: TolerancePolicy,
    pub output: OutputConfig,
}

const SECTIONS: [&str; 13] = [
    "run",
    "chart",
    "test_function",
    "t_grid",
    "quadrature",
    "volume",
    "isoprofile",
    "symmetrize",
    "mu",
    "rigidity",
    "moments",
    "tolerance",
    "output",
];

/// Typed access to one section; keys are consumed so leftovers can be reported.
struct Reader {
    name: &'static str,
    entries: BTreeMap<String, (usize, String)>,
}

impl Reader {
    fn new(doc: &mut Document, name: &'static str) -> Self {
        let entries = doc.sections.remove(name).map(|s| s.entries).unwrap_or_default();
        Reader { name, entries }
    }

    fn take<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => parse(&v)
                .map(Some)
                .map_err(|m| ConfigError::field(Some(line), format!("{}.{key}", self.name), m)),
        }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|(l, _)| *l)
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(ConfigError::field(Some(line), format!("{}.{k}", self.name), "unknown key")),
        }
    }
}

fn float(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = float(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn count(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn seed(s: &str) -> Result<u64, String> {
    s.parse().map_err(|_| format!("`{s}` is not an unsigned 64-bit integer"))
}

fn boolean(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{s}` is not `true` or `false`")),
    }
}

fn floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|p| float(p.trim())).collect()
}

fn positives(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|p| positive(p.trim())).collect()
}

fn counts(s: &str) -> Result<Vec<usize>, String> {
    s.split(',').map(|p| count(p.trim())).collect()
}

/// `x1, y1, z1; x2, y2, z2`
fn point_list(s: &str) -> Result<Vec<Vec<f64>>, String> {
    s.split(';').map(|p| floats(p.trim())).collect()
}

fn kind(s: &str) -> Result<ModelKind, String> {
    match s {
        "flat" => Ok(ModelKind::Flat),
        "space_form" => Ok(ModelKind::SpaceForm),
        "product_sphere_line" => Ok(ModelKind::ProductSphereLine),
        "conformal_flat" => Ok(ModelKind::ConformalFlat),
        _ => Err(format!(
            "unknown chart kind `{s}` (expected flat, space_form, product_sphere_line or conformal_flat)"
        )),
    }
}

fn rule(s: &str) -> Result<Rule, String> {
    match s {
        "product_hermite" => Ok(Rule::ProductHermite),
        "radial_sphere" => Ok(Rule::RadialSphere),
        _ => Err(format!("unknown rule `{s}` (expected product_hermite or radial_sphere)")),
    }
}

fn series_model(s: &str) -> Result<SeriesModel, String> {
    match s {
        "linear" => Ok(SeriesModel::Linear),
        "with_constant" => Ok(SeriesModel::WithConstant),
        _ => Err(format!("unknown series model `{s}` (expected linear or with_constant)")),
    }
}

fn verdict(s: &str) -> Result<Verdict, String> {
    match s {
        "consistent_with_rigidity" => Ok(Verdict::ConsistentWithRigidity),
        "hypothesis_violated" => Ok(Verdict::HypothesisViolated),
        "inconclusive" => Ok(Verdict::Inconclusive),
        _ => Err(format!(
            "unknown verdict `{s}` (expected consistent_with_rigidity, hypothesis_violated or inconclusive)"
        )),
    }
}

fn a_choice(s: &str) -> Result<AChoice, String> {
    match s {
        "optimal" => Ok(AChoice::Optimal),
        "zero" => Ok(AChoice::Zero),
        _ => floats(s).map(AChoice::Matrix).map_err(|e| format!("expected optimal, zero or a row-major matrix: {e}")),
    }
}

fn alpha_choice(s: &str) -> Result<AlphaChoice, String> {
    match s {
        "optimal" => Ok(AlphaChoice::Optimal),
        _ => float(s).map(AlphaChoice::Value),
    }
}

// Caps keep a hostile config from requesting absurd allocations before any
// numerics run.
const MAX_POINTS: usize = 4096;
const MAX_NODES: usize = 1 << 22;

fn count_in(lo: usize, hi: usize) -> impl Fn(&str) -> Result<usize, String> {
    move |s| {
        let v = count(s)?;
        if v < lo || v > hi {
            Err(format!("{v} is outside {lo}..={hi}"))
        } else {
            Ok(v)
        }
    }
}

impl RunConfig {
    /// Parses and validates `text`; `experiment` (from the command line) overrides `[run] experiment`.
    pub fn from_text(text: &str, experiment: Option<Experiment>, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let mut doc = parse_document(text)?;
        if let Some((name, s)) = doc.sections.iter().find(|(k, _)| !SECTIONS.contains(&k.as_str())) {
            return Err(ConfigError::at(s.line, format!("unknown section [{name}]")));
        }
        let chart_line = doc.sections.get("chart").map(|s| s.line);

        let mut r = Reader::new(&mut doc, "run");
        let exp_line = r.line_of("experiment");
        let from_file = r.take("experiment", |s| s.parse::<Experiment>())?;
        if let (Some(cli), Some(file)) = (experiment, from_file) {
            if cli != file {
                return Err(ConfigError::field(
                    exp_line,
                    "run.experiment".into(),
                    format!("config names `{file}` but `{cli}` was requested"),
                ));
            }
        }
        let file_seed = r.take("seed", seed)?;
        r.finish()?;

        let mut r = Reader::new(&mut doc, "chart");
        let kind_line = r.line_of("kind");
        let kind = r.take("kind", kind)?.ok_or_else(|| ConfigError::field(chart_line, "chart.kind".into(), "required"))?;
        let n = r
            .take("n", count_in(2, 6))?
            .ok_or_else(|| ConfigError::field(chart_line, "chart.n".into(), "required"))?;
        let k = r.take("k", float)?.unwrap_or(0.0);
        let radius = r.take("radius", positive)?.unwrap_or(2.0);
        let eps = r.take("eps", float)?;
        let profile_line = r.line_of("profile");
        let profile = r.take("profile", |s| match s {
            "gaussian" | "plane_wave" => Ok(s.to_string()),
            _ => Err(format!("unknown profile `{s}` (expected gaussian or plane_wave)")),
        })?;
        let center = r.take("center", floats)?;
        let width = r.take("width", positive)?;
        let wavevector = r.take("wavevector", floats)?;
        let phase = r.take("phase", float)?;
        let point_line = r.line_of("point");
        let point = r.take("point", floats)?.unwrap_or_else(|| vec![0.0; n]);
        r.finish()?;
        let perturbation_field = |f: &str, m: &str| ConfigError::field(profile_line.or(kind_line), format!("chart.{f}"), m);
        let spec = match kind {
            ModelKind::ConformalFlat => {
                let eps = eps.ok_or_else(|| perturbation_field("eps", "required for conformal_flat"))?;
                let profile = match profile.as_deref() {
                    Some("gaussian") => Profile::Gaussian {
                        center: center.unwrap_or_else(|| vec![0.0; n]),
                        width: width.ok_or_else(|| perturbation_field("width", "required for a gaussian profile"))?,
                    },
                    Some(_) => Profile::PlaneWave {
                        wavevector: wavevector
                            .ok_or_else(|| perturbation_field("wavevector", "required for a plane_wave profile"))?,
                        phase: phase.unwrap_or(0.0),
                    },
                    None => return Err(perturbation_field("profile", "required for conformal_flat")),
                };
                if profile.dim() != n {
                    return Err(perturbation_field("profile", &format!("profile has dimension {}, chart has {n}", profile.dim())));
                }
                ModelSpec::conformal_flat(n, eps, profile, radius)
            }
            other => {
                if eps.is_some() || profile.is_some() {
                    return Err(perturbation_field("profile", "perturbations apply only to conformal_flat"));
                }
                if other == ModelKind::Flat && k != 0.0 {
                    return Err(ConfigError::field(kind_line, "chart.k".into(), "flat charts have k = 0"));
                }
                ModelSpec { kind: other, n, k, perturbation: None, radius }
            }
        };
        if let Err(e) = make_chart(&spec) {
            return Err(ConfigError::field(chart_line, "chart".into(), e.to_string()));
        }
        if point.len() != n {
            return Err(ConfigError::field(point_line, "chart.point".into(), format!("expected {n} coordinates, got {}", point.len())));
        }
        let chart = ChartConfig { spec, point };
        let k_default = chart.spec.k;

        let mut r = Reader::new(&mut doc, "test_function");
        let a_line = r.line_of("a");
        let a = r.take("a", a_choice)?.unwrap_or(AChoice::Optimal);
        if let AChoice::Matrix(v) = &a {
            let ok = v.len() == n * n && Sym2::from_row_major(n, v.clone()).is_ok();
            if !ok {
                return Err(ConfigError::field(a_line, "test_function.a".into(), format!("expected a symmetric {n}x{n} matrix")));
            }
        }
        let alpha = r.take("alpha", alpha_choice)?.unwrap_or(AlphaChoice::Value(0.0));
        let support_radius = r.take("support_radius", positive)?.unwrap_or(1.0);
        r.finish()?;
        let test_function = TestFunctionConfig { a, alpha, support_radius };

        let defaults = TGrid::default();
        let mut r = Reader::new(&mut doc, "t_grid");
        let t_max = r.take("t_max", positive)?.unwrap_or(defaults.values[0]);
        let points = r.take("points", count_in(2, MAX_POINTS))?.unwrap_or(defaults.values.len());
        let factor = r.take("factor", positive)?.unwrap_or(FRAC_1_SQRT_2);
        let model = r.take("model", series_model)?.unwrap_or(SeriesModel::Linear);
        r.finish()?;
        let t_grid = GridConfig { t_max, points, factor, model };
        if let Err(e) = t_grid.grid() {
            return Err(ConfigError::field(None, "t_grid".into(), e.to_string()));
        }

        let mut r = Reader::new(&mut doc, "quadrature");
        let mut quadrature = QuadratureSpec::default();
        if let Some(v) = r.take("rule", rule)? {
            quadrature.rule = v;
        }
        if let Some(v) = r.take("order", count_in(1, 512))? {
            quadrature.order = v;
        }
        if let Some(v) = r.take("c_trunc", float)? {
            quadrature.c_trunc = v;
        }
        if let Some(v) = r.take("target_tol", float)? {
            quadrature.target_tol = v;
        }
        if let Some(v) = r.take("angular_order", count_in(1, 512))? {
            quadrature.angular_order = v;
        }
        if let Some(v) = r.take("mc_samples", count_in(1, 100_000_000))? {
            quadrature.mc_samples = v;
        }
        r.finish()?;

        let seed = seed_override.or(file_seed);
        if n >= 5 && seed.is_none() {
            return Err(ConfigError::field(None, "run.seed".into(), format!("a seed is required for Monte Carlo quadrature in dimension {n}")));
        }
        quadrature.seed = seed.unwrap_or(0);
        if let Err(e) = quadrature.validate() {
            return Err(ConfigError::field(None, "quadrature".into(), e.to_string()));
        }

        let mut r = Reader::new(&mut doc, "volume");
        let volume = VolumeConfig {
            r_max: r.take("r_max", positive)?.unwrap_or(0.4),
            points: r.take("points", count_in(6, MAX_POINTS))?.unwrap_or(9),
            factor: r.take("factor", positive)?.unwrap_or(FRAC_1_SQRT_2),
            k_model: r.take("k_model", float)?.unwrap_or(k_default),
        };
        r.finish()?;
        if volume.factor >= 1.0 {
            return Err(ConfigError::field(None, "volume.factor".into(), "must lie in (0, 1)"));
        }

        let mut r = Reader::new(&mut doc, "isoprofile");
        let isoprofile = IsoprofileConfig {
            k: r.take("k", float)?.unwrap_or(k_default),
            betas: r.take("betas", positives)?.unwrap_or_else(|| vec![0.01, 0.05, 0.2]),
        };
        r.finish()?;

        let mut r = Reader::new(&mut doc, "symmetrize");
        let symmetrize = SymmetrizeConfig {
            t: r.take("t", positive)?.unwrap_or(2e-3),
            k: r.take("k", float)?.unwrap_or(k_default),
            levels: r.take("levels", count_in(curvex_core::isoperimetry::MIN_LEVELS, 1 << 16))?.unwrap_or(128),
        };
        r.finish()?;

        let mut r = Reader::new(&mut doc, "mu");
        let mu = MuConfig {
            t_values: r.take("t_values", positives)?.unwrap_or_else(|| vec![8e-3, 4e-3, 2e-3, 1e-3]),
            nodes: r.take("nodes", count_in(curvex_core::mu_solver::MIN_NODES, MAX_NODES))?.unwrap_or(1024),
            radius: r.take("radius", positive)?,
            radius_over_sqrt_t: r.take("radius_over_sqrt_t", positive)?.unwrap_or(25.0),
            gamma: r.take("gamma", float)?.unwrap_or(0.0),
            q_bound: r.take("q_bound", float)?.unwrap_or_else(|| {
                let nf = n as f64;
                nf * (nf - 1.0) * k_default * k_default / 3.0
            }),
        };
        r.finish()?;
        if mu.t_values.len() < 2 {
            return Err(ConfigError::field(None, "mu.t_values".into(), "need at least two values"));
        }

        let mut r = Reader::new(&mut doc, "rigidity");
        let pts_line = r.line_of("points");
        let rigidity = RigidityConfig {
            k: r.take("k", float)?.unwrap_or(k_default),
            points: r.take("points", point_list)?.unwrap_or_else(|| vec![chart.point.clone()]),
            betas: r.take("betas", positives)?.unwrap_or_else(|| vec![0.01]),
            extended: r.take("extended", boolean)?.unwrap_or(false),
            tolerance: r.take("tolerance", positive)?.unwrap_or(1e-6),
            average_radius: r.take("average_radius", positive)?.unwrap_or(0.1),
            expect: r.take("expect", verdict)?,
        };
        r.finish()?;
        if rigidity.points.len() > MAX_POINTS || rigidity.points.iter().any(|p| p.len() != n) {
            return Err(ConfigError::field(pts_line, "rigidity.points".into(), format!("every point needs {n} coordinates")));
        }

        let mut r = Reader::new(&mut doc, "moments");
        let dims_line = r.line_of("dims");
        let moments = MomentsConfig {
            dims: r.take("dims", counts)?.unwrap_or_else(|| vec![n]),
            t_values: r.take("t_values", positives)?.unwrap_or_else(|| vec![0.01, 0.1]),
            trials: r.take("trials", count_in(1, 10_000))?.unwrap_or(20),
        };
        if moments.dims.iter().any(|d| !(2..=6).contains(d)) {
            return Err(ConfigError::field(dims_line, "moments.dims".into(), "dimensions must lie in 2..=6"));
        }
        r.finish()?;

        let mut r = Reader::new(&mut doc, "tolerance");
        let mut tolerance = TolerancePolicy::default();
        for (key, slot) in [
            ("c1_rtol", &mut tolerance.c1_rtol),
            ("c1_atol", &mut tolerance.c1_atol),
            ("c2_rtol", &mut tolerance.c2_rtol),
            ("c2_atol", &mut tolerance.c2_atol),
            ("volume_c1_rtol", &mut tolerance.volume_c1_rtol),
            ("volume_c2_rtol", &mut tolerance.volume_c2_rtol),
            ("moments_rtol", &mut tolerance.moments_rtol),
            ("preservation", &mut tolerance.preservation),
            ("isoperimetry", &mut tolerance.isoperimetry),
            ("mu_q_rtol", &mut tolerance.mu_q_rtol),
        ] {
            if let Some(v) = r.take(key, positive)? {
                *slot = v;
            }
        }
        if let Some(v) = r.take("mu_flat_low", float)? {
            tolerance.mu_flat_low = v;
        }
        if let Some(v) = r.take("mu_flat_high", float)? {
            tolerance.mu_flat_high = v;
        }
        r.finish()?;

        let mut r = Reader::new(&mut doc, "output");
        let output = OutputConfig {
            dir: r.take("dir", |s| Ok(s.to_string()))?,
            plotdata: r.take("plotdata", boolean)?.unwrap_or(true),
        };
        r.finish()?;

        Ok(RunConfig {
            experiment: experiment.or(from_file),
            seed,
            chart,
            test_function,
            t_grid,
            quadrature,
            volume,
            isoprofile,
            symmetrize,
            mu,
            rigidity,
            moments,
            tolerance,
            output,
        })
    }
}
