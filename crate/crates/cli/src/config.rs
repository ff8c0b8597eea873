//! Scenario files: TOML with fixed sections and no unknown keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use lateral_lab::mesh::{Geometry, Mesh, TimeGrid};
use lateral_lab::presets::{CoefficientParams, CoefficientPreset, KernelParams, KernelPreset};

pub const MAX_N: usize = 513;
pub const MAX_NT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ForwardMms,
    Carleman,
    Trace,
    Terms,
    Bihari,
    Complete,
    Dependence,
    All,
}

impl Experiment {
    pub const EACH: [Experiment; 7] = [
        Experiment::ForwardMms,
        Experiment::Carleman,
        Experiment::Trace,
        Experiment::Terms,
        Experiment::Bihari,
        Experiment::Complete,
        Experiment::Dependence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ForwardMms => "forward-mms",
            Experiment::Carleman => "carleman",
            Experiment::Trace => "trace",
            Experiment::Terms => "terms",
            Experiment::Bihari => "bihari",
            Experiment::Complete => "complete",
            Experiment::Dependence => "dependence",
            Experiment::All => "all",
        }
    }

    pub fn expand(self) -> Vec<Experiment> {
        match self {
            Experiment::All => Experiment::EACH.to_vec(),
            e => vec![e],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub mesh: MeshSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub coefficients: CoefficientSection,
    #[serde(default)]
    pub kernels: KernelSection,
    #[serde(default)]
    pub weights: WeightSection,
    #[serde(default)]
    pub carleman: CarlemanSection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub terms: TermsSection,
    #[serde(default)]
    pub forward: ForwardSection,
    #[serde(default)]
    pub complete: CompleteSection,
    #[serde(default)]
    pub dependence: DependenceSection,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    #[serde(default = "default_geometry")]
    pub geometry: String,
    pub n: usize,
    pub nt: usize,
    #[serde(default = "default_gamma")]
    pub gamma: String,
}

fn default_geometry() -> String {
    "interval".into()
}
fn default_gamma() -> String {
    "right".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub horizon: f64,
    pub t1: f64,
    pub t2: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection { horizon: 1.0, t1: 0.25, t2: 0.5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientSection {
    pub preset: String,
    pub b: [f64; 2],
    pub a0: f64,
    pub variation: f64,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        let p = CoefficientParams::default();
        CoefficientSection { preset: "identity".into(), b: p.b, a0: p.a0, variation: p.variation }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub preset: String,
    pub amp: f64,
    pub width: f64,
    pub kappa: f64,
    pub f_amp: [f64; 4],
    pub rho_amp: [f64; 2],
    pub path: Option<PathBuf>,
    /// Exponent `γ` of the Holmgren factor.
    pub gamma: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        let p = KernelParams::default();
        KernelSection {
            preset: "zero".into(),
            amp: p.amp,
            width: p.width,
            kappa: p.kappa,
            f_amp: p.f_amp,
            rho_amp: p.rho_amp,
            path: None,
            gamma: 1.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightSection {
    pub lambda: f64,
    pub s0: f64,
    pub delta: f64,
    /// Carleman constant; calibrated when absent.
    pub c1: Option<f64>,
    /// `toward-gamma` or `constant`.
    pub psi: String,
}

impl Default for WeightSection {
    fn default() -> Self {
        WeightSection { lambda: 1.0, s0: 1.0, delta: 0.5, c1: None, psi: "toward-gamma".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanSection {
    pub s: Vec<f64>,
}

impl Default for CarlemanSection {
    fn default() -> Self {
        CarlemanSection { s: vec![1.0, 2.0, 4.0, 8.0] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    pub samples: usize,
    pub modes: usize,
    pub r0_max: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        TraceSection { samples: 20, modes: 4, r0_max: 5.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TermsSection {
    pub samples: usize,
    pub modes: usize,
}

impl Default for TermsSection {
    fn default() -> Self {
        TermsSection { samples: 10, modes: 4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardSection {
    pub refinements: usize,
    pub min_order_dt: f64,
    pub min_order_h: f64,
}

impl Default for ForwardSection {
    fn default() -> Self {
        ForwardSection { refinements: 3, min_order_dt: 0.9, min_order_h: 1.8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompleteSection {
    pub beta: Option<f64>,
    pub eps: f64,
    pub max_error: f64,
}

impl Default for CompleteSection {
    fn default() -> Self {
        CompleteSection { beta: Some(1e-10), eps: 0.1, max_error: 1e-3 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DependenceSection {
    pub eta: Vec<f64>,
    pub eps: Vec<f64>,
    pub seeds: usize,
    pub modes: usize,
    pub beta: Option<f64>,
}

impl Default for DependenceSection {
    fn default() -> Self {
        DependenceSection {
            eta: vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1],
            eps: vec![0.02, 0.05, 0.1],
            seeds: 5,
            modes: 4,
            beta: Some(1e-10),
        }
    }
}

impl ScenarioConfig {
    pub fn from_str(text: &str, origin: &str) -> anyhow::Result<ScenarioConfig> {
        let cfg: ScenarioConfig =
            toml::from_str(text).with_context(|| format!("malformed config {origin}"))?;
        cfg.validate().with_context(|| format!("invalid config {origin}"))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.geometry()?;
        self.coefficient_preset()?;
        self.kernel_preset()?;
        let m = &self.mesh;
        if m.n < 3 || m.n > MAX_N {
            bail!("mesh.n = {} outside [3, {MAX_N}]", m.n);
        }
        if m.nt < 2 || m.nt > MAX_NT {
            bail!("mesh.nt = {} outside [2, {MAX_NT}]", m.nt);
        }
        let t = &self.time;
        if !(0.0 < t.t1 && t.t1 < t.t2 && t.t2 < t.horizon) {
            bail!("time: need 0 < t1 < t2 < horizon, got t1 = {}, t2 = {}, horizon = {}", t.t1, t.t2, t.horizon);
        }
        if !matches!(self.weights.psi.as_str(), "toward-gamma" | "constant") {
            bail!("weights.psi = {:?} (expected toward-gamma or constant)", self.weights.psi);
        }
        if self.kernel_preset()? == KernelPreset::File && self.kernels.path.is_none() {
            bail!("kernels.path is required for the file preset");
        }
        if self.forward.refinements > 0 {
            let top = self.forward.refinements - 1;
            let n = (m.n - 1) * (1 << top) + 1;
            let nt = m.nt * (1 << (2 * top));
            if n > MAX_N || nt > MAX_NT {
                bail!("forward.refinements = {} drives the mesh to n = {n}, nt = {nt}, beyond the limits", self.forward.refinements);
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> anyhow::Result<Geometry> {
        match self.mesh.geometry.as_str() {
            "interval" => Ok(Geometry::Interval),
            "rectangle" => Ok(Geometry::Rectangle),
            g => bail!("mesh.geometry = {g:?} (expected interval or rectangle)"),
        }
    }

    pub fn coefficient_preset(&self) -> anyhow::Result<CoefficientPreset> {
        self.coefficients.preset.parse().context("coefficients.preset")
    }

    pub fn kernel_preset(&self) -> anyhow::Result<KernelPreset> {
        self.kernels.preset.parse().context("kernels.preset")
    }

    pub fn coefficient_params(&self) -> CoefficientParams {
        let c = &self.coefficients;
        CoefficientParams { b: c.b, a0: c.a0, variation: c.variation }
    }

    pub fn kernel_params(&self) -> KernelParams {
        let k = &self.kernels;
        KernelParams {
            amp: k.amp,
            width: k.width,
            kappa: k.kappa,
            f_amp: k.f_amp,
            rho_amp: k.rho_amp,
            path: k.path.clone(),
        }
    }

    pub fn mesh(&self) -> anyhow::Result<Mesh> {
        Ok(Mesh::build(self.geometry()?, self.mesh.n, &self.mesh.gamma)?)
    }

    pub fn grid(&self) -> anyhow::Result<TimeGrid> {
        Ok(TimeGrid::new(self.time.horizon, self.mesh.nt)?)
    }
}

/// Keys accepted by `sweep` besides full dotted paths.
pub fn resolve_axis(key: &str) -> &str {
    match key {
        "s0" => "weights.s0",
        "lambda" => "weights.lambda",
        "delta" => "weights.delta",
        "c1" => "weights.c1",
        "eps" => "dependence.eps",
        "eta" => "dependence.eta",
        "s" => "carleman.s",
        "n" => "mesh.n",
        "nt" => "mesh.nt",
        "beta" => "complete.beta",
        "kappa" => "kernels.kappa",
        "seed" => "seed",
        k => k,
    }
}

/// Sets a numeric key in a parsed config. List-valued keys become a
/// one-element list; integer keys require integral values.
pub fn set_numeric(doc: &mut toml::Table, key: &str, value: f64) -> anyhow::Result<()> {
    let path = resolve_axis(key);
    let parts: Vec<&str> = path.split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for s in sections {
        table = table
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow::anyhow!("sweep axis {key}: {s} is not a section"))?;
    }
    let integral = is_integer_key(path);
    let scalar = if integral {
        if value.fract() != 0.0 || value < 0.0 {
            bail!("sweep axis {key} needs nonnegative integers, got {value}");
        }
        toml::Value::Integer(value as i64)
    } else {
        toml::Value::Float(value)
    };
    let new = match table.get(*last) {
        Some(toml::Value::Array(_)) => toml::Value::Array(vec![scalar]),
        Some(toml::Value::Integer(_)) | Some(toml::Value::Float(_)) | None => scalar,
        Some(_) => bail!("sweep axis {key} is not numeric"),
    };
    if !is_numeric_key(path) {
        bail!("sweep axis {key} is not a numeric config key");
    }
    table.insert(last.to_string(), new);
    Ok(())
}

fn is_integer_key(path: &str) -> bool {
    matches!(
        path,
        "seed" | "mesh.n" | "mesh.nt" | "trace.samples" | "trace.modes" | "terms.samples" | "terms.modes"
            | "forward.refinements" | "dependence.seeds" | "dependence.modes"
    )
}

fn is_numeric_key(path: &str) -> bool {
    is_integer_key(path)
        || matches!(
            path,
            "time.horizon"
                | "time.t1"
                | "time.t2"
                | "coefficients.a0"
                | "coefficients.variation"
                | "kernels.amp"
                | "kernels.width"
                | "kernels.kappa"
                | "kernels.gamma"
                | "weights.lambda"
                | "weights.s0"
                | "weights.delta"
                | "weights.c1"
                | "carleman.s"
                | "trace.r0_max"
                | "forward.min_order_dt"
                | "forward.min_order_h"
                | "complete.beta"
                | "complete.eps"
                | "complete.max_error"
                | "dependence.eta"
                | "dependence.eps"
                | "dependence.beta"
        )
}
