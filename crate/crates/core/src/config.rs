//! Scenario configuration files (TOML) and their validation.

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::jump::ProcessSpec;
use crate::kernel::{AngularForm, CollisionKernelSpec};
use crate::lyapunov::Weight;
use crate::metrics::BinningSpec;
use crate::potential::{DriftParams, Potential};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    TorusBgk,
    TorusBoltzmann,
    ConfinedBgk,
    ConfinedBoltzmann,
    SubgeometricBgk,
    SubgeometricBoltzmann,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::TorusBgk,
        Scenario::TorusBoltzmann,
        Scenario::ConfinedBgk,
        Scenario::ConfinedBoltzmann,
        Scenario::SubgeometricBgk,
        Scenario::SubgeometricBoltzmann,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::TorusBgk => "torus-bgk",
            Scenario::TorusBoltzmann => "torus-boltzmann",
            Scenario::ConfinedBgk => "confined-bgk",
            Scenario::ConfinedBoltzmann => "confined-boltzmann",
            Scenario::SubgeometricBgk => "subgeometric-bgk",
            Scenario::SubgeometricBoltzmann => "subgeometric-boltzmann",
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Scenario::TorusBgk | Scenario::TorusBoltzmann)
    }

    pub fn is_boltzmann(&self) -> bool {
        matches!(
            self,
            Scenario::TorusBoltzmann | Scenario::ConfinedBoltzmann | Scenario::SubgeometricBoltzmann
        )
    }

    pub fn is_subgeometric(&self) -> bool {
        matches!(self, Scenario::SubgeometricBgk | Scenario::SubgeometricBoltzmann)
    }

    /// Weight of the weighted distance reported for this scenario.
    pub fn weight(&self) -> Weight {
        match self {
            Scenario::TorusBgk => Weight::Energy,
            Scenario::TorusBoltzmann => Weight::Kinetic,
            Scenario::ConfinedBgk | Scenario::ConfinedBoltzmann | Scenario::SubgeometricBgk => Weight::Confined,
            Scenario::SubgeometricBoltzmann => Weight::ConfinedLinear,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("scenario: unknown value {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub a: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// quadratic | quartic | subquadratic | superlinear | bracket.
    pub name: String,
    #[serde(default = "one")]
    pub c: f64,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub k: Option<f64>,
    /// Declared drift constants replacing the built-in ones.
    pub drift: Option<DriftConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub gamma: f64,
    /// Constant angular kernel; defaults to 1/|S^{d−1}|.
    pub b: Option<f64>,
    /// Even tabulated angular kernel on cos θ ∈ [−1, 1].
    pub angular_table: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Dirac {
        x: Vec<f64>,
        v: Vec<f64>,
    },
    /// Independent normal coordinates around (x, v).
    Gaussian {
        x: Vec<f64>,
        v: Vec<f64>,
        std: f64,
    },
    /// |x| = scale·U^{−1/shape} in a uniform direction, v Maxwellian.
    Pareto {
        scale: f64,
        shape: f64,
    },
    Equilibrium,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Geometric,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotConfig {
    /// Explicit times; overrides the generated grid.
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
    /// First positive time of a geometric grid.
    pub first: Option<f64>,
}

fn default_count() -> usize {
    40
}

fn default_spacing() -> Spacing {
    Spacing::Geometric
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        SnapshotConfig {
            times: None,
            count: default_count(),
            spacing: default_spacing(),
            first: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningConfig {
    #[serde(default = "default_bins")]
    pub bins_per_axis: usize,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub v_max: Option<f64>,
}

fn default_bins() -> usize {
    64
}

impl Default for BinningConfig {
    fn default() -> Self {
        BinningConfig {
            bins_per_axis: default_bins(),
            x_lo: None,
            x_hi: None,
            v_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    FlowConfig::default().dt
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection { dt: default_dt() }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Start of the tail window for algebraic fits; defaults to t_final/10.
    pub tail_start: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    /// Constant of the subgeometric rate curve; not certified.
    #[serde(default = "one")]
    pub subgeometric_constant: f64,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        CertificateConfig {
            subgeometric_constant: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub particles: usize,
    pub t_final: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub potential: Option<PotentialConfig>,
    pub kernel: Option<KernelConfig>,
    pub initial: InitialConfig,
    #[serde(default)]
    pub snapshots: SnapshotConfig,
    #[serde(default)]
    pub binning: BinningConfig,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub certificate: CertificateConfig,
}

fn default_dim() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn field(name: &str, msg: impl fmt::Display) -> Error {
    Error::Config(format!("{name}: {msg}"))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Field-level checks that need no numerics.
    pub fn check(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(field("dim", format!("must be 1, 2 or 3, got {}", self.dim)));
        }
        if self.particles < 10 {
            return Err(field("particles", "need at least 10"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(field("t_final", "must be positive and finite"));
        }
        if !(self.flow.dt > 0.0) {
            return Err(field("flow.dt", "must be positive"));
        }
        if self.binning.bins_per_axis < 2 {
            return Err(field("binning.bins_per_axis", "must be at least 2"));
        }
        if !self.scenario.is_torus() && self.potential.is_none() {
            return Err(field("potential", format!("required for {}", self.scenario)));
        }
        if self.scenario.is_boltzmann() {
            let k = self
                .kernel
                .as_ref()
                .ok_or_else(|| field("kernel", "required for Boltzmann scenarios"))?;
            if !(0.0..=1.0).contains(&k.gamma) {
                return Err(field("kernel.gamma", format!("must lie in [0, 1], got {}", k.gamma)));
            }
        }
        if let Some(p) = &self.potential {
            self.check_potential(p)?;
        }
        self.check_initial()?;
        let times = self.snapshot_times()?;
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field("snapshots.times", "must be strictly increasing"));
        }
        if times.first().is_some_and(|&t| t < 0.0) || times.last().is_some_and(|&t| t > self.t_final) {
            return Err(field("snapshots.times", "must lie in [0, t_final]"));
        }
        if !(self.certificate.subgeometric_constant > 0.0) {
            return Err(field("certificate.subgeometric_constant", "must be positive"));
        }
        Ok(())
    }

    fn check_potential(&self, p: &PotentialConfig) -> Result<()> {
        if !(p.c > 0.0) {
            return Err(field("potential.c", "must be positive"));
        }
        let need = |name: &str, v: Option<f64>| v.ok_or_else(|| field(&format!("potential.{name}"), "missing"));
        let exponent = match p.name.as_str() {
            "quadratic" => 2.0,
            "quartic" => 4.0,
            "subquadratic" => {
                let b = need("beta", p.beta)?;
                if !(b > 0.0 && b < 1.0) {
                    return Err(field("potential.beta", format!("must lie in (0, 1), got {b}")));
                }
                2.0 * b
            }
            "superlinear" => {
                let d = need("delta", p.delta)?;
                if !(d > 0.0 && d <= 1.0) {
                    return Err(field("potential.delta", format!("must lie in (0, 1], got {d}")));
                }
                1.0 + d
            }
            "bracket" => {
                let k = need("k", p.k)?;
                if !(k >= 1.0) {
                    return Err(field("potential.k", format!("must be at least 1, got {k}")));
                }
                k
            }
            other => return Err(field("potential.name", format!("unknown potential {other:?}"))),
        };
        let gamma = self.kernel.as_ref().map_or(0.0, |k| k.gamma);
        let geometric = if self.scenario.is_boltzmann() { gamma + 2.0 } else { 2.0 };
        match self.scenario {
            Scenario::ConfinedBgk | Scenario::ConfinedBoltzmann if exponent < geometric => Err(field(
                "potential",
                format!("{} needs growth exponent ≥ {geometric}, got {exponent}", self.scenario),
            )),
            Scenario::SubgeometricBgk if p.name != "subquadratic" => Err(field(
                "potential.name",
                "subgeometric-bgk needs the subquadratic potential with beta in (0, 1)",
            )),
            Scenario::SubgeometricBoltzmann if exponent >= geometric || exponent <= 1.0 => Err(field(
                "potential",
                format!("subgeometric-boltzmann needs growth exponent in (1, {geometric}), got {exponent}"),
            )),
            _ => Ok(()),
        }
    }

    fn check_initial(&self) -> Result<()> {
        let d = self.dim;
        let len = |name: &str, v: &[f64]| {
            if v.len() == d {
                Ok(())
            } else {
                Err(field(
                    &format!("initial.{name}"),
                    format!("needs {d} components, got {}", v.len()),
                ))
            }
        };
        match &self.initial {
            InitialConfig::Dirac { x, v } => {
                len("x", x)?;
                len("v", v)
            }
            InitialConfig::Gaussian { x, v, std } => {
                len("x", x)?;
                len("v", v)?;
                if !(*std > 0.0) {
                    return Err(field("initial.std", "must be positive"));
                }
                Ok(())
            }
            InitialConfig::Pareto { scale, shape } => {
                if self.scenario.is_torus() {
                    return Err(field("initial.law", "pareto needs a whole-space scenario"));
                }
                if !(*scale > 0.0 && *shape > 0.0) {
                    return Err(field("initial", "pareto scale and shape must be positive"));
                }
                Ok(())
            }
            InitialConfig::Equilibrium => Ok(()),
        }
    }

    /// Snapshot times including t = 0 and t_final.
    pub fn snapshot_times(&self) -> Result<Vec<f64>> {
        let s = &self.snapshots;
        if let Some(t) = &s.times {
            return Ok(t.clone());
        }
        if s.count < 2 {
            return Err(field("snapshots.count", "must be at least 2"));
        }
        let n = s.count;
        let tf = self.t_final;
        Ok(match s.spacing {
            Spacing::Linear => (0..n).map(|i| tf * i as f64 / (n - 1) as f64).collect(),
            Spacing::Geometric => {
                let first = s.first.unwrap_or(tf / 1000.0);
                if !(first > 0.0 && first < tf) {
                    return Err(field("snapshots.first", "must lie in (0, t_final)"));
                }
                let r = (tf / first).powf(1.0 / (n - 2) as f64);
                let mut t: Vec<f64> = std::iter::once(0.0)
                    .chain((0..n - 1).map(|i| first * r.powi(i as i32)))
                    .collect();
                t[n - 1] = tf;
                t
            }
        })
    }

    pub fn potential(&self) -> Result<Option<Potential>> {
        let Some(p) = &self.potential else {
            return Ok(None);
        };
        if self.scenario.is_torus() {
            return Ok(None);
        }
        let base = match p.name.as_str() {
            "quadratic" => Potential::quadratic(p.c),
            "quartic" => Potential::quartic(p.c),
            "subquadratic" => Potential::subquadratic(p.c, p.beta.unwrap_or(0.5)),
            "superlinear" => Potential::superlinear(p.c, p.delta.unwrap_or(1.0)),
            "bracket" => Potential::bracket_power(p.c, p.k.unwrap_or(2.0)),
            other => return Err(field("potential.name", format!("unknown potential {other:?}"))),
        };
        Ok(Some(match p.drift {
            Some(dc) => base.with_declared_drift(DriftParams {
                gamma1: dc.gamma1,
                gamma2: dc.gamma2,
                a: dc.a,
                p: dc.p,
            }),
            None => base,
        }))
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        Ok(match self.potential()? {
            Some(p) => DomainSpec::whole_space(self.dim, p),
            None => DomainSpec::torus(self.dim),
        })
    }

    pub fn kernel(&self) -> Result<Option<CollisionKernelSpec>> {
        if !self.scenario.is_boltzmann() {
            return Ok(None);
        }
        let k = self.kernel.as_ref().ok_or_else(|| field("kernel", "missing"))?;
        let base = CollisionKernelSpec::hard_spheres(k.gamma, self.dim);
        let angular = match (&k.angular_table, k.b) {
            (Some(values), _) => AngularForm::TabulatedEven { values: values.clone() },
            (None, Some(b)) => AngularForm::Uniform { value: b },
            (None, None) => base.angular.clone(),
        };
        let b_lower = match &angular {
            AngularForm::Uniform { value } => *value,
            other => other.min(),
        };
        let spec = CollisionKernelSpec::new(k.gamma, b_lower, angular)?;
        Ok(Some(spec))
    }

    pub fn process(&self) -> Result<ProcessSpec> {
        let domain = self.domain()?;
        let flow = FlowConfig::with_dt(self.flow.dt);
        match self.kernel()? {
            Some(k) => ProcessSpec::boltzmann(domain, k, flow),
            None => Ok(ProcessSpec::bgk(domain, flow)),
        }
    }

    /// Binning box overrides on top of the equilibrium default.
    pub fn binning_spec(&self, default: BinningSpec) -> BinningSpec {
        BinningSpec {
            bins_per_axis: self.binning.bins_per_axis,
            x_lo: self.binning.x_lo.unwrap_or(default.x_lo),
            x_hi: self.binning.x_hi.unwrap_or(default.x_hi),
            v_max: self.binning.v_max.unwrap_or(default.v_max),
            ..default
        }
    }

    /// Fields present in the file but ignored by the scenario.
    pub fn ignored_fields(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.scenario.is_torus() && self.potential.is_some() {
            out.push(format!("potential is ignored for {}", self.scenario));
        }
        if !self.scenario.is_boltzmann() && self.kernel.is_some() {
            out.push(format!("kernel is ignored for {}", self.scenario));
        }
        if !self.scenario.is_subgeometric() && self.fit.as_ref().is_some_and(|f| f.tail_start.is_some()) {
            out.push("fit.tail_start is only used by subgeometric scenarios".into());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TORUS: &str = r#"
scenario = "torus-bgk"
dim = 1
particles = 1000
t_final = 20.0
seed = 7

[initial]
law = "dirac"
x = [0.5]
v = [1.0]
"#;

    #[test]
    fn parses_minimal_torus_config() {
        let cfg = ScenarioConfig::from_toml(TORUS).unwrap();
        assert_eq!(cfg.scenario, Scenario::TorusBgk);
        let t = cfg.snapshot_times().unwrap();
        assert_eq!(t.len(), 40);
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 20.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(cfg.ignored_fields().is_empty());
    }

    #[test]
    fn rejects_out_of_range_beta_with_field_name() {
        let text = r#"
scenario = "subgeometric-bgk"
particles = 1000
t_final = 10.0
[potential]
name = "subquadratic"
beta = 1.5
[initial]
law = "equilibrium"
"#;
        let err = ScenarioConfig::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("potential.beta"), "{err}");
    }

    #[test]
    fn rejects_unknown_fields_and_scenarios() {
        assert!(ScenarioConfig::from_toml(&format!("{TORUS}\nbogus = 1\n")).is_err());
        assert!(ScenarioConfig::from_toml(&TORUS.replace("torus-bgk", "torus-xyz")).is_err());
    }

    #[test]
    fn warns_on_ignored_potential() {
        let text = format!("{TORUS}\n[potential]\nname = \"quadratic\"\n");
        let cfg = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.ignored_fields().len(), 1);
        assert!(cfg.domain().unwrap().is_torus());
    }

    #[test]
    fn confined_scenarios_check_growth() {
        let text = r#"
scenario = "confined-bgk"
particles = 1000
t_final = 10.0
[potential]
name = "subquadratic"
beta = 0.5
[initial]
law = "equilibrium"
"#;
        assert!(ScenarioConfig::from_toml(text).is_err());
        let ok = text.replace("name = \"subquadratic\"\nbeta = 0.5", "name = \"quartic\"");
        let cfg = ScenarioConfig::from_toml(&ok).unwrap();
        assert!(cfg.process().is_ok());
    }

    #[test]
    fn snapshot_times_must_be_sorted_and_bounded() {
        let bad = format!("{TORUS}\n[snapshots]\ntimes = [0.0, 2.0, 1.0]\n");
        assert!(ScenarioConfig::from_toml(&bad).is_err());
        let bad = format!("{TORUS}\n[snapshots]\ntimes = [0.0, 30.0]\n");
        assert!(ScenarioConfig::from_toml(&bad).is_err());
    }
}
