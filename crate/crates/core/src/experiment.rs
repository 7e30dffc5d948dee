//! Scenario runs: certificate, simulation, distance estimates, fits and
//! output files.

use crate::certificate::{assemble_certificate, BoundInputs, Certificate, CertificateOptions};
use crate::config::{InitialConfig, ScenarioConfig};
use crate::domain::{particle_rng, sample_maxwellian, sample_unit_sphere, wrap_torus, EquilibriumSpec, PhasePoint};
use crate::error::{Error, Result};
use crate::jump::{simulate, Ensemble};
use crate::lyapunov::{AuditEntry, LyapunovSpec};
use crate::metrics::{
    estimate_tv, estimate_weighted_tv, fit_decay, Binning, BinningSpec, DecayFit, ModelKind, TvEstimate,
};
use crate::numerics::QuadratureConfig;
use crate::potential::check_drift;
use crate::vector::Vector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

/// Exit code for an error raised before or during a run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Key offset separating initial-law streams from other uses of the seed.
const INITIAL_KEY: u64 = 0x5851_F42D_4C95_7F2D;

/// Draws the initial ensemble; particle i uses its own stream.
pub fn initial_points(cfg: &ScenarioConfig, eq: &EquilibriumSpec) -> Result<Vec<PhasePoint>> {
    let d = cfg.dim;
    let n = cfg.particles;
    let torus = cfg.scenario.is_torus();
    let place = |x: Vector, v: Vector| {
        let x = if torus { wrap_torus(&x) } else { x };
        PhasePoint::new(x, v)
    };
    match &cfg.initial {
        InitialConfig::Equilibrium => eq.sample(cfg.seed ^ INITIAL_KEY, n),
        InitialConfig::Dirac { x, v } => Ok(vec![place(Vector::from_slice(x), Vector::from_slice(v)); n]),
        InitialConfig::Gaussian { x, v, std } => Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = particle_rng(cfg.seed ^ INITIAL_KEY, i as u64);
                let mut draw = |c: &[f64]| {
                    let mut out = Vector::from_slice(c);
                    for k in 0..d {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        out[k] += std * e;
                    }
                    out
                };
                let xs = draw(x);
                let vs = draw(v);
                place(xs, vs)
            })
            .collect()),
        InitialConfig::Pareto { scale, shape } => Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = particle_rng(cfg.seed ^ INITIAL_KEY, i as u64);
                let u: f64 = 1.0 - rng.random::<f64>();
                let r = scale * u.powf(-1.0 / shape);
                let x = sample_unit_sphere(&mut rng, d).scale(r);
                let v = sample_maxwellian(&mut rng, d);
                PhasePoint::new(x, v)
            })
            .collect()),
    }
}

/// One pre-flight check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {}: {}", c.name, c.detail);
        }
        for w in &self.warnings {
            let _ = writeln!(s, "WARN {w}");
        }
        s
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }
}

/// Drift constants, kernel, Lyapunov inequality and binning coverage,
/// without simulating.
pub fn validate(cfg: &ScenarioConfig, quad: &QuadratureConfig) -> ValidationReport {
    let mut report = ValidationReport {
        warnings: cfg.ignored_fields(),
        ..Default::default()
    };
    let process = match cfg.process() {
        Ok(p) => p,
        Err(e) => {
            report.push("process", false, e.to_string());
            return report;
        }
    };
    let d = cfg.dim;
    if let Some(pot) = process.domain.potential() {
        match pot.drift_params() {
            None => report.push("drift", false, "potential has no drift constants".into()),
            Some(dp) => {
                let radius = pot.sublevel_radius(pot.lower_bound() + 100.0).max(10.0);
                let chk = check_drift(pot, &dp, d, radius, 8192, 1e-9);
                let detail = if chk.passed() {
                    format!(
                        "x·∇Φ ≥ {}|x|^{} + {}Φ − {} at {} points in B({radius:.3})",
                        dp.gamma1, dp.p, dp.gamma2, dp.a, chk.points
                    )
                } else {
                    format!(
                        "{} of {} points violate x·∇Φ ≥ {}|x|^{} + {}Φ − {}; worst residual {:.6e} at x = {:?}",
                        chk.violations, chk.points, dp.gamma1, dp.p, dp.gamma2, dp.a, chk.worst_residual, chk.worst_x
                    )
                };
                report.push("drift", chk.passed(), detail);
            }
        }
    }
    if let Ok(Some(k)) = cfg.kernel() {
        match k.validate() {
            Ok(()) if k.b_lower > 0.0 => report.push(
                "kernel",
                true,
                format!("γ = {}, angular lower bound {}", k.gamma, k.b_lower),
            ),
            Ok(()) => report.push("kernel", false, "angular kernel lower bound is not positive".into()),
            Err(e) => report.push("kernel", false, e.to_string()),
        }
    }
    match LyapunovSpec::for_process(&process) {
        Ok(lyap) => {
            let radius = process
                .domain
                .potential()
                .map_or(6.0, |p| p.sublevel_radius(p.lower_bound() + 50.0).max(6.0));
            match lyap.grid_check(&process.domain, 4096, radius, 1e-9) {
                Ok(g) => report.push(
                    "lyapunov",
                    g.passed(),
                    format!(
                        "{} violations of UV ≤ −λV + K at {} points (λ = {:.6e}, K = {:.6e})",
                        g.violations,
                        g.points,
                        lyap.drift.lambda(),
                        lyap.drift.k()
                    ),
                ),
                Err(e) => report.push("lyapunov", false, e.to_string()),
            }
        }
        Err(e) => report.push("lyapunov", false, e.to_string()),
    }
    let binning = EquilibriumSpec::new(process.domain.clone(), quad).and_then(|eq| {
        let default = BinningSpec::for_equilibrium(&eq, cfg.binning.bins_per_axis, quad)?;
        Binning::new(cfg.binning_spec(default), &eq)
    });
    match binning {
        Ok(b) => report.push(
            "binning",
            true,
            format!("box covers {:.6} of equilibrium mass", b.coverage),
        ),
        Err(e) => report.push("binning", false, e.to_string()),
    }
    if let Err(e) = cfg.snapshot_times() {
        report.push("snapshots", false, e.to_string());
    }
    report
}

/// A certificate with everything needed to evaluate its bound.
#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub certificate: Certificate,
    pub lyapunov: LyapunovSpec,
    pub audit: Vec<AuditEntry>,
}

impl CertificateReport {
    /// Audit text, one `name = value  # description` line per constant.
    pub fn render(&self) -> String {
        render_audit(&self.audit)
    }
}

pub fn render_audit(audit: &[AuditEntry]) -> String {
    let mut s = String::new();
    for e in audit {
        let _ = writeln!(s, "{} = {:.16e}  # {}", e.name, e.value, e.description);
    }
    s
}

pub fn certificate(cfg: &ScenarioConfig) -> Result<CertificateReport> {
    let process = cfg.process()?;
    let options = CertificateOptions {
        subgeometric_constant: cfg.certificate.subgeometric_constant,
        ..CertificateOptions::default()
    };
    let (certificate, lyapunov) = assemble_certificate(&process, &options)?;
    let audit = match &certificate {
        Certificate::Harris(_) => lyapunov.audit.iter().cloned().chain(certificate.audit()).collect(),
        _ => certificate.audit(),
    };
    Ok(CertificateReport {
        certificate,
        lyapunov,
        audit,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub t: f64,
    pub tv: TvEstimate,
    pub wtv: TvEstimate,
    pub bound: f64,
}

impl Row {
    /// The distance the certificate bounds.
    pub fn tracked(&self, weighted: bool) -> TvEstimate {
        if weighted {
            self.wtv
        } else {
            self.tv
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub rows: Vec<Row>,
    /// Whether bounds refer to the weighted distance.
    pub weighted: bool,
    pub certificate: std::result::Result<CertificateReport, String>,
    pub exponential: std::result::Result<DecayFit, String>,
    /// Algebraic and exponential fits on the tail window (subgeometric only).
    pub tail: Option<(
        std::result::Result<DecayFit, String>,
        std::result::Result<DecayFit, String>,
    )>,
    /// Snapshot times where tracked − 3σ exceeds the bound.
    pub violations: Vec<f64>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            EXIT_OK
        } else {
            EXIT_VIOLATION
        }
    }

    /// CSV with columns t,tv,tv_stderr,wtv,wtv_stderr,bound.
    pub fn csv(&self) -> String {
        let mut s = String::from("t,tv,tv_stderr,wtv,wtv_stderr,bound\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.tv.value, r.tv.stderr, r.wtv.value, r.wtv.stderr, r.bound
            );
        }
        s
    }

    pub fn summary(&self, cfg: &ScenarioConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", cfg.scenario);
        let _ = writeln!(s, "dim = {}", cfg.dim);
        let _ = writeln!(s, "particles = {}", cfg.particles);
        let _ = writeln!(s, "seed = {}", cfg.seed);
        let _ = writeln!(s, "t_final = {}", cfg.t_final);
        let _ = writeln!(
            s,
            "bounded_distance = {}",
            if self.weighted {
                format!("weighted ({:?})", cfg.scenario.weight())
            } else {
                "tv".into()
            }
        );
        match &self.certificate {
            Ok(c) => {
                let kind = match c.certificate {
                    Certificate::Doeblin(_) => "doeblin",
                    Certificate::Harris(_) => "harris",
                    Certificate::Subgeometric(_) => "subgeometric (constant not certified)",
                };
                let (name, value) = c.certificate.rate_summary();
                let _ = writeln!(s, "certificate = {kind}");
                let _ = writeln!(s, "certified_{name} = {value:.16e}");
            }
            Err(e) => {
                let _ = writeln!(s, "certificate = failed: {e}");
            }
        }
        let fit_line = |s: &mut String, label: &str, f: &std::result::Result<DecayFit, String>| match f {
            Ok(f) => {
                let _ = writeln!(
                    s,
                    "{label} = rate {:.6e} ± {:.2e}, prefactor {:.6e}, R² {:.6}, window [{}, {}], {} points",
                    f.rate, f.rate_stderr, f.prefactor, f.r_squared, f.window.0, f.window.1, f.points
                );
            }
            Err(e) => {
                let _ = writeln!(s, "{label} = not fitted: {e}");
            }
        };
        fit_line(&mut s, "exponential_fit", &self.exponential);
        if let Ok(c) = &self.certificate {
            if let (Ok(f), ("ln_rate", ln_rate)) = (&self.exponential, c.certificate.rate_summary()) {
                let _ = writeln!(
                    s,
                    "empirical_rate_exceeds_certified = {}  # ln λ̂ = {:.6}, ln λ_cert = {:.6}",
                    f.rate.ln() > ln_rate,
                    f.rate.ln(),
                    ln_rate
                );
            }
        }
        if let Some((alg, exp)) = &self.tail {
            fit_line(&mut s, "tail_algebraic_fit", alg);
            fit_line(&mut s, "tail_exponential_fit", exp);
        }
        let _ = writeln!(s, "bound_violations = {}", self.violations.len());
        for t in &self.violations {
            let _ = writeln!(s, "violation_at = {t}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        s
    }

    pub fn write(&self, cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let mut put = |name: &str, text: &str| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, text)?;
            out.push(p);
            Ok(())
        };
        put("distances.csv", &self.csv())?;
        put("summary.txt", &self.summary(cfg))?;
        let audit = match &self.certificate {
            Ok(c) => c.render(),
            Err(e) => format!("# certificate failed: {e}\n"),
        };
        put("certificate.txt", &audit)?;
        Ok(out)
    }
}

fn fit(rows: &[&Row], weighted: bool, model: ModelKind) -> std::result::Result<DecayFit, String> {
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let v: Vec<f64> = rows.iter().map(|r| r.tracked(weighted).corrected()).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.tracked(weighted).stderr).collect();
    fit_decay(&t, &v, &s, model).map_err(|e| e.to_string())
}

/// Validates, certifies, simulates and estimates; files are not written.
pub fn run(cfg: &ScenarioConfig, quad: &QuadratureConfig) -> Result<RunOutcome> {
    let report = validate(cfg, quad);
    if !report.passed() {
        return Err(Error::Config(format!("validation failed\n{}", report.render())));
    }
    let process = cfg.process()?;
    let eq = EquilibriumSpec::new(process.domain.clone(), quad)?;
    let binning = Binning::new(
        cfg.binning_spec(BinningSpec::for_equilibrium(&eq, cfg.binning.bins_per_axis, quad)?),
        &eq,
    )?;
    let weight = cfg.scenario.weight();
    let times = cfg.snapshot_times()?;
    let mut warnings = report.warnings;

    let cert = certificate(cfg).map_err(|e| e.to_string());
    let weighted = matches!(
        cert,
        Ok(CertificateReport {
            certificate: Certificate::Harris(_),
            ..
        })
    );

    let mut ensemble = Ensemble::new(initial_points(cfg, &eq)?, cfg.seed);
    let bound_inputs = match &cert {
        Ok(c) => {
            let (mu0_v, _) = crate::jump::mean_and_stderr(&ensemble.points, |z| c.lyapunov.value(&process.domain, z));
            let inputs = || -> Result<BoundInputs> {
                if !weighted {
                    return Ok(BoundInputs {
                        mu0_v,
                        mu_star_v: f64::NAN,
                        mu_star_w: f64::NAN,
                        weight_constant: f64::NAN,
                    });
                }
                Ok(BoundInputs {
                    mu0_v,
                    mu_star_v: c.lyapunov.form.equilibrium_mean(&eq, quad)?,
                    mu_star_w: weight.equilibrium_mean(&eq, quad)?,
                    weight_constant: weight.equivalence(&c.lyapunov.form).ok_or_else(|| {
                        Error::PreconditionViolated(format!("{weight:?} is not dominated by the Lyapunov function"))
                    })?,
                })
            };
            match inputs() {
                Ok(i) => Some(i),
                Err(e) => {
                    warnings.push(format!("bound unavailable: {e}"));
                    None
                }
            }
        }
        Err(_) => None,
    };

    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        simulate(&mut ensemble, &process, t)?;
        let tv = estimate_tv(&ensemble.points, &binning)?;
        let wtv = estimate_weighted_tv(&ensemble.points, &eq, &weight, &binning)?;
        let bound = match (&cert, &bound_inputs) {
            (Ok(c), Some(inputs)) => c.certificate.bound(t, inputs),
            _ => f64::NAN,
        };
        rows.push(Row { t, tv, wtv, bound });
    }

    let violations = rows
        .iter()
        .filter(|r| {
            let d = r.tracked(weighted);
            r.bound.is_finite() && d.corrected() - 3.0 * d.stderr > r.bound
        })
        .map(|r| r.t)
        .collect();
    let all: Vec<&Row> = rows.iter().collect();
    let exponential = fit(&all, weighted, ModelKind::Exponential);
    let tail = cfg.scenario.is_subgeometric().then(|| {
        let start = cfg
            .fit
            .as_ref()
            .and_then(|f| f.tail_start)
            .unwrap_or(cfg.t_final / 10.0);
        let window: Vec<&Row> = rows.iter().filter(|r| r.t >= start).collect();
        (
            fit(&window, weighted, ModelKind::Algebraic),
            fit(&window, weighted, ModelKind::Exponential),
        )
    });
    Ok(RunOutcome {
        rows,
        weighted,
        certificate: cert,
        exponential,
        tail,
        violations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(text).unwrap()
    }

    const SMALL_TORUS: &str = r#"
scenario = "torus-bgk"
particles = 4000
t_final = 4.0
seed = 3
[initial]
law = "dirac"
x = [0.5]
v = [1.0]
[snapshots]
count = 8
first = 0.1
[binning]
bins_per_axis = 16
"#;

    #[test]
    fn quadratic_declared_drift_validates() {
        let c = cfg(r#"
scenario = "confined-bgk"
particles = 100
t_final = 1.0
[potential]
name = "quadratic"
drift = { gamma1 = 0.5, gamma2 = 1.0, a = 0.0, p = 2.0 }
[initial]
law = "equilibrium"
"#);
        let r = validate(&c, &QuadratureConfig::default());
        assert!(r.passed(), "{}", r.render());
    }

    #[test]
    fn understated_constant_fails_with_worst_point() {
        let c = cfg(r#"
scenario = "confined-bgk"
particles = 100
t_final = 1.0
[potential]
name = "quadratic"
drift = { gamma1 = 0.5, gamma2 = 1.6, a = 0.0, p = 2.0 }
[initial]
law = "equilibrium"
"#);
        let r = validate(&c, &QuadratureConfig::default());
        assert!(!r.passed());
        let drift = r.checks.iter().find(|c| c.name == "drift").unwrap();
        assert!(
            !drift.passed && drift.detail.contains("worst residual"),
            "{}",
            drift.detail
        );
    }

    #[test]
    fn torus_potential_is_a_warning() {
        let c = cfg(&format!("{SMALL_TORUS}\n[potential]\nname = \"quadratic\"\n"));
        let r = validate(&c, &QuadratureConfig::default());
        assert!(r.passed());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn small_torus_run_is_deterministic_and_bounded() {
        let c = cfg(SMALL_TORUS);
        let q = QuadratureConfig::default();
        let a = run(&c, &q).unwrap();
        let b = run(&c, &q).unwrap();
        assert_eq!(a.csv(), b.csv());
        assert_eq!(a.rows.len(), 8);
        assert!(a.violations.is_empty());
        assert!(a.rows[0].tv.value > 1.9);
        assert!(a.rows.iter().all(|r| r.bound.is_finite() && r.bound <= 2.0));
        assert!(a.certificate.is_ok());
    }

    #[test]
    fn initial_laws_have_requested_shape() {
        let c = cfg(r#"
scenario = "subgeometric-bgk"
particles = 20000
t_final = 1.0
[potential]
name = "subquadratic"
beta = 0.5
[initial]
law = "pareto"
scale = 2.0
shape = 3.0
"#);
        let eq = EquilibriumSpec::new(c.domain().unwrap(), &QuadratureConfig::default()).unwrap();
        let pts = initial_points(&c, &eq).unwrap();
        assert!(pts.iter().all(|z| z.x.norm() >= 2.0));
        // E|x| = scale·shape/(shape − 1) = 3.
        let (m, se) = crate::jump::mean_and_stderr(&pts, |z| z.x.norm());
        assert!((m - 3.0).abs() < 4.0 * se, "{m} ± {se}");
    }
}
