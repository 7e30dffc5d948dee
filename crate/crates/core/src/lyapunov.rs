//! Lyapunov functionals, their generator, and certified drift constants.

use crate::domain::{DomainSpec, EquilibriumSpec, PhasePoint};
use crate::error::{Error, Result};
use crate::jump::{mean_and_stderr, simulate, Ensemble, ProcessKind, ProcessSpec};
use crate::kernel::{maxwellian_abs_moment, radial_flux, radial_moment, CollisionKernelSpec};
use crate::numerics::{cube_to_ball, golden_max, halton, QuadratureConfig};
use crate::potential::{DriftParams, Potential};
use crate::vector::Vector;

/// Relative pad applied to scanned infima and suprema.
const SCAN_PAD: f64 = 1e-3;

/// Shape of V.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LyapunovForm {
    /// V = 1.
    Constant,
    /// V = |v|².
    KineticEnergy,
    /// V = offset + Φ + ½|v|² + a x·v + b|x|².
    Quadratic { offset: f64, a: f64, b: f64 },
    /// V = Φ + ½|v|² + a x·v/⟨x⟩ + b⟨x⟩.
    Bracket { a: f64, b: f64 },
}

impl LyapunovForm {
    /// The modified energy used for BGK in a confining potential.
    pub fn bgk_modified() -> Self {
        LyapunovForm::Quadratic {
            offset: 1.0,
            a: 0.25,
            b: 0.125,
        }
    }

    /// Coefficient constraints keeping V comparable to the energy.
    pub fn validate(&self) -> Result<()> {
        match *self {
            LyapunovForm::Quadratic { a, b, .. } if !(a * a < 2.0 * b) => Err(Error::ConstraintViolated(format!(
                "quadratic Lyapunov form needs a² < 2b (a = {a}, b = {b})"
            ))),
            LyapunovForm::Bracket { a, b } if !(4.0 * a * a < b) => Err(Error::ConstraintViolated(format!(
                "bracket Lyapunov form needs 4a² < b (a = {a}, b = {b})"
            ))),
            _ => Ok(()),
        }
    }

    pub fn value(&self, domain: &DomainSpec, z: &PhasePoint) -> f64 {
        let v2 = z.v.norm_sq();
        match *self {
            LyapunovForm::Constant => 1.0,
            LyapunovForm::KineticEnergy => v2,
            LyapunovForm::Quadratic { offset, a, b } => {
                offset + domain.phi(&z.x) + 0.5 * v2 + a * z.x.dot(&z.v) + b * z.x.norm_sq()
            }
            LyapunovForm::Bracket { a, b } => {
                let br = z.x.bracket();
                domain.phi(&z.x) + 0.5 * v2 + a * z.x.dot(&z.v) / br + b * br
            }
        }
    }
}

/// Weight w in the weighted distance ∫ w |f − μ|.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weight {
    /// w = 1.
    Unit,
    /// w = 1 + ½|v|².
    Energy,
    /// w = 1 + |v|².
    Kinetic,
    /// w = 1 + ½|v|² + Φ + |x|².
    Confined,
    /// w = 1 + ½|v|² + Φ + |x|.
    ConfinedLinear,
}

impl Weight {
    pub fn value(&self, domain: &DomainSpec, z: &PhasePoint) -> f64 {
        let v2 = z.v.norm_sq();
        match self {
            Weight::Unit => 1.0,
            Weight::Energy => 1.0 + 0.5 * v2,
            Weight::Kinetic => 1.0 + v2,
            Weight::Confined => 1.0 + 0.5 * v2 + domain.phi(&z.x) + z.x.norm_sq(),
            Weight::ConfinedLinear => 1.0 + 0.5 * v2 + domain.phi(&z.x) + z.x.norm(),
        }
    }

    /// E_μ[w] under the equilibrium.
    pub fn equilibrium_mean(&self, eq: &EquilibriumSpec, quad: &QuadratureConfig) -> Result<f64> {
        let d = eq.dim() as f64;
        let pos = |g: &dyn Fn(f64, &Potential) -> f64| -> Result<f64> {
            match eq.domain.potential() {
                Some(p) => eq.position_expectation(|r| g(r, p), quad),
                None => Err(Error::PreconditionViolated("weight needs a confining potential".into())),
            }
        };
        Ok(match self {
            Weight::Unit => 1.0,
            Weight::Energy => 1.0 + 0.5 * d,
            Weight::Kinetic => 1.0 + d,
            Weight::Confined => 1.0 + 0.5 * d + pos(&|r, p| p.radial(r).value + r * r)?,
            Weight::ConfinedLinear => 1.0 + 0.5 * d + pos(&|r, p| p.radial(r).value + r)?,
        })
    }

    /// A constant C with w ≤ C(1 + V), assuming Φ ≥ 0; `None` if the
    /// weight is not dominated by V.
    pub fn equivalence(&self, form: &LyapunovForm) -> Option<f64> {
        match (*self, *form) {
            (Weight::Unit, _) => Some(1.0),
            (Weight::Energy | Weight::Kinetic, LyapunovForm::KineticEnergy) => Some(1.0),
            (_, LyapunovForm::Quadratic { offset, a, b }) if offset >= 0.0 => {
                // |a x·v| ≤ (|a|/2)(η|x|² + |v|²/η) with η = b/|a|.
                let (cv, cx) = if a == 0.0 {
                    (0.5, b)
                } else {
                    (0.5 - a * a / (2.0 * b), 0.5 * b)
                };
                match self {
                    Weight::Energy => Some(1f64.max(0.5 / cv)),
                    Weight::Kinetic => Some(1f64.max(1.0 / cv)),
                    Weight::Confined => Some(1f64.max(0.5 / cv).max(1.0 / cx)),
                    Weight::ConfinedLinear => Some(2f64.max(0.5 / cv).max(1.0 / cx)),
                    Weight::Unit => Some(1.0),
                }
            }
            (_, LyapunovForm::Bracket { b, .. }) => {
                // 1 + V ≥ 1 + Φ + ¼|v|² + (b/2)|x| when 4a² < b.
                match self {
                    Weight::Energy => Some(2.0),
                    Weight::ConfinedLinear => Some(2f64.max(2.0 / b)),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

impl LyapunovForm {
    /// E_μ[V] under the equilibrium.
    pub fn equilibrium_mean(&self, eq: &EquilibriumSpec, quad: &QuadratureConfig) -> Result<f64> {
        let d = eq.dim() as f64;
        let phi_plus = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
            match eq.domain.potential() {
                Some(p) => eq.position_expectation(|r| p.radial(r).value + g(r), quad),
                None => Err(Error::PreconditionViolated("form needs a confining potential".into())),
            }
        };
        Ok(match *self {
            LyapunovForm::Constant => 1.0,
            LyapunovForm::KineticEnergy => d,
            LyapunovForm::Quadratic { offset, b, .. } => offset + 0.5 * d + phi_plus(&|r| b * r * r)?,
            LyapunovForm::Bracket { b, .. } => 0.5 * d + phi_plus(&|r| b * (1.0 + r * r).sqrt())?,
        })
    }
}

/// Drift inequality satisfied by V.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Drift {
    /// UV ≤ −λV + K.
    Geometric { lambda: f64, k: f64 },
    /// UV ≤ −λV^q + K.
    Subgeometric { lambda: f64, k: f64, q: f64 },
}

impl Drift {
    pub fn lambda(&self) -> f64 {
        match *self {
            Drift::Geometric { lambda, .. } | Drift::Subgeometric { lambda, .. } => lambda,
        }
    }

    pub fn k(&self) -> f64 {
        match *self {
            Drift::Geometric { k, .. } | Drift::Subgeometric { k, .. } => k,
        }
    }

    pub fn exponent(&self) -> f64 {
        match *self {
            Drift::Geometric { .. } => 1.0,
            Drift::Subgeometric { q, .. } => q,
        }
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self, Drift::Geometric { .. })
    }
}

/// Collision moments of a linear Boltzmann kernel against M, scanned in speed.
#[derive(Clone, Debug)]
pub struct KernelMoments {
    pub kernel: CollisionKernelSpec,
    pub d: usize,
    pub angular_mass: f64,
    pub momentum_transfer: f64,
    /// Rows (s, I₀, I₁, I₂, j).
    profile: Vec<[f64; 5]>,
}

impl KernelMoments {
    pub fn new(kernel: &CollisionKernelSpec, d: usize) -> Result<Self> {
        kernel.validate()?;
        let grid = (0..500)
            .map(|i| 0.02 * i as f64)
            .chain((0..=60).map(|i| 10.0 + 0.5 * i as f64));
        let g = kernel.gamma;
        let profile = grid
            .map(|s| {
                Ok([
                    s,
                    radial_moment(0, s, g, d)?,
                    radial_moment(1, s, g, d)?,
                    radial_moment(2, s, g, d)?,
                    radial_flux(s, g, d)?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelMoments {
            kernel: kernel.clone(),
            d,
            angular_mass: kernel.angular_mass(d),
            momentum_transfer: kernel.momentum_transfer(d),
            profile,
        })
    }

    /// L*(|v|²) at speed s.
    pub fn lstar_v2(&self, s: f64) -> Result<f64> {
        let g = self.kernel.gamma;
        let i0 = radial_moment(0, s, g, self.d)?;
        let i2 = radial_moment(2, s, g, self.d)?;
        Ok(0.5 * self.angular_mass * (i2 - s * s * i0))
    }

    /// c(s) with L*(x·v) = c(|v|) x·v/|v|.
    pub fn lstar_xv(&self, s: f64) -> Result<f64> {
        let g = self.kernel.gamma;
        let i0 = radial_moment(0, s, g, self.d)?;
        Ok(0.5 * self.angular_mass * (radial_flux(s, g, self.d)? - s * i0))
    }

    /// Padded infimum of f over the scanned profile together with its limit.
    fn inf<F: Fn(&[f64; 5]) -> f64>(&self, f: F, limit: f64) -> f64 {
        let m = self.profile.iter().map(f).fold(limit, f64::min);
        m - SCAN_PAD * m.abs()
    }

    fn sup<F: Fn(&[f64; 5]) -> f64>(&self, f: F, limit: f64) -> f64 {
        let m = self.profile.iter().map(f).fold(limit, f64::max);
        m + SCAN_PAD * m.abs().max(1e-12)
    }

    /// α₁ = (m₀/4) inf I₀/⟨s⟩^γ and α₂ = sup[L*|v|² + α₁⟨s⟩^{γ+2}], so
    /// that L*|v|² ≤ −α₁⟨v⟩^{γ+2} + α₂.
    pub fn energy_dissipation(&self) -> (f64, f64) {
        let g = self.kernel.gamma;
        let m0 = self.angular_mass;
        let br = |s: f64| (1.0 + s * s).sqrt();
        let a1 = 0.25 * m0 * self.inf(|r| r[1] / br(r[0]).powf(g), 1.0);
        let a2 = self.sup(
            |r| 0.5 * m0 * (r[3] - r[0] * r[0] * r[1]) + a1 * br(r[0]).powf(g + 2.0),
            f64::NEG_INFINITY,
        );
        (a1, a2)
    }

    /// c_xv = sup |L*(x·v)| / (|x|⟨v⟩^{γ+1}).
    pub fn cross_coefficient(&self) -> f64 {
        let g = self.kernel.gamma;
        let m0 = self.angular_mass;
        self.sup(
            |r| 0.5 * m0 * (r[4] - r[0] * r[1]).abs() / (1.0 + r[0] * r[0]).sqrt().powf(g + 1.0),
            0.5 * m0,
        )
    }

    /// (A₀, C₁, C₂): inf I₀/(1+s^γ), sup I₁/(1+s^γ), sup I₂/(1+s^γ).
    pub fn torus_ratios(&self) -> (f64, f64, f64) {
        let g = self.kernel.gamma;
        let w = |s: f64| 1.0 + s.powf(g);
        let half = if g == 0.0 { 0.5 } else { 1.0 };
        let lim = |k: f64| half * maxwellian_abs_moment(k, self.d);
        let a0 = self.inf(|r| r[1] / w(r[0]), half);
        let c1 = self.sup(|r| r[2] / w(r[0]), lim(1.0));
        let c2 = self.sup(|r| r[3] / w(r[0]), lim(2.0));
        (a0, c1, c2)
    }
}

/// One named constant from a derivation, for audit output.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditEntry {
    pub name: String,
    pub value: f64,
    pub description: String,
}

impl AuditEntry {
    pub fn new(name: &str, value: f64, description: &str) -> Self {
        AuditEntry {
            name: name.to_string(),
            value,
            description: description.to_string(),
        }
    }
}

/// A Lyapunov functional with its drift constants.
#[derive(Clone, Debug)]
pub struct LyapunovSpec {
    pub form: LyapunovForm,
    pub drift: Drift,
    pub moments: Option<KernelMoments>,
    pub audit: Vec<AuditEntry>,
}

impl LyapunovSpec {
    /// Drift constants for a process, geometric when the confinement allows it.
    pub fn for_process(process: &ProcessSpec) -> Result<Self> {
        let d = process.domain.dim;
        match (&process.kind, process.domain.potential()) {
            (ProcessKind::Bgk, None) => Ok(LyapunovSpec {
                form: LyapunovForm::Constant,
                drift: Drift::Geometric { lambda: 1.0, k: 1.0 },
                moments: None,
                audit: vec![],
            }),
            (ProcessKind::LinearBoltzmann(kernel), None) => torus_boltzmann(KernelMoments::new(kernel, d)?),
            (ProcessKind::Bgk, Some(pot)) => {
                let dp = pot.drift_params().ok_or(Error::DriftParamsMissing)?;
                if dp.p >= 2.0 {
                    confined_bgk(pot, &dp, d)
                } else {
                    subgeometric_bgk(pot, &dp, d)
                }
            }
            (ProcessKind::LinearBoltzmann(kernel), Some(pot)) => {
                let dp = pot.drift_params().ok_or(Error::DriftParamsMissing)?;
                let m = KernelMoments::new(kernel, d)?;
                if dp.p >= kernel.gamma + 2.0 {
                    confined_boltzmann(pot, &dp, m)
                } else {
                    subgeometric_boltzmann(pot, &dp, m)
                }
            }
        }
    }

    pub fn value(&self, domain: &DomainSpec, z: &PhasePoint) -> f64 {
        self.form.value(domain, z)
    }

    /// UV(z) for the jump process: transport plus collision parts.
    pub fn generator(&self, domain: &DomainSpec, z: &PhasePoint) -> Result<f64> {
        let d = domain.dim as f64;
        let s = z.v.norm();
        let (lv2, lxv) = match &self.moments {
            None => (d - s * s, -s),
            Some(m) => (m.lstar_v2(s)?, m.lstar_xv(s)?),
        };
        let x_vhat = if s > 0.0 { z.x.dot(&z.v) / s } else { 0.0 };
        let x_grad = match domain.potential() {
            Some(p) => z.x.dot(&p.gradient(&z.x)),
            None => 0.0,
        };
        let xv = z.x.dot(&z.v);
        Ok(match self.form {
            LyapunovForm::Constant => 0.0,
            LyapunovForm::KineticEnergy => lv2,
            LyapunovForm::Quadratic { a, b, .. } => 0.5 * lv2 + a * (lxv * x_vhat + s * s - x_grad) + 2.0 * b * xv,
            LyapunovForm::Bracket { a, b } => {
                let br = z.x.bracket();
                0.5 * lv2 + a * (lxv * x_vhat / br + s * s / br - xv * xv / br.powi(3) - x_grad / br) + b * xv / br
            }
        })
    }

    /// UV + λV^q − K at z; nonpositive where the drift inequality holds.
    pub fn residual(&self, domain: &DomainSpec, z: &PhasePoint) -> Result<f64> {
        let v = self.value(domain, z);
        Ok(self.generator(domain, z)? + self.drift.lambda() * v.max(0.0).powf(self.drift.exponent()) - self.drift.k())
    }

    /// Pointwise drift check on `n` Halton points with |x|, |v| ≤ `radius`
    /// (x in the unit cell on the torus).
    pub fn grid_check(&self, domain: &DomainSpec, n: usize, radius: f64, tol: f64) -> Result<GridCheck> {
        let d = domain.dim;
        let mut report = GridCheck {
            points: n,
            violations: 0,
            worst_residual: f64::NEG_INFINITY,
            worst_point: None,
        };
        for i in 0..n {
            let u = halton(i as u64, 2 * d + 2);
            let x = if domain.is_torus() {
                Vector::from_slice(&u[..d])
            } else {
                cube_to_ball(&u[..d + 1], d, radius)
            };
            let v = cube_to_ball(&u[d + 1..2 * d + 2], d, radius);
            let z = PhasePoint::new(x, v);
            let g = self.generator(domain, &z)?;
            let lv = self.drift.lambda() * self.value(domain, &z).max(0.0).powf(self.drift.exponent());
            let res = g + lv - self.drift.k();
            if res > tol * (1.0 + g.abs() + lv) {
                report.violations += 1;
            }
            if res > report.worst_residual {
                report.worst_residual = res;
                report.worst_point = Some(z);
            }
        }
        Ok(report)
    }

    /// Monte Carlo check of the integrated drift along a simulation.
    pub fn empirical_check(
        &self,
        process: &ProcessSpec,
        ensemble: &mut Ensemble,
        times: &[f64],
    ) -> Result<EmpiricalDrift> {
        let domain = &process.domain;
        let (m0, _) = mean_and_stderr(&ensemble.points, |z| self.value(domain, z));
        let lambda = self.drift.lambda();
        let k = self.drift.k();
        let mut rows = Vec::with_capacity(times.len());
        for &t in times {
            simulate(ensemble, process, t)?;
            let (mean, se) = mean_and_stderr(&ensemble.points, |z| self.value(domain, z));
            let envelope = match self.drift {
                Drift::Geometric { .. } => {
                    let e = (-lambda * t).exp();
                    e * m0 + k / lambda * (1.0 - e)
                }
                Drift::Subgeometric { .. } => m0 + k * t,
            };
            rows.push(DriftRow {
                t,
                mean,
                stderr: se,
                envelope,
            });
        }
        Ok(EmpiricalDrift { initial_mean: m0, rows })
    }
}

#[derive(Clone, Debug)]
pub struct GridCheck {
    pub points: usize,
    pub violations: usize,
    pub worst_residual: f64,
    pub worst_point: Option<PhasePoint>,
}

impl GridCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftRow {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub envelope: f64,
}

#[derive(Clone, Debug)]
pub struct EmpiricalDrift {
    pub initial_mean: f64,
    pub rows: Vec<DriftRow>,
}

impl EmpiricalDrift {
    /// Every mean lies within three standard errors below its envelope.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.mean <= r.envelope + 3.0 * r.stderr)
    }
}

fn neg_part(x: f64) -> f64 {
    (-x).max(0.0)
}

/// V = 1 + Φ + ½|v|² + ¼x·v + ⅛|x|² with x·∇Φ ≥ γ₁|x|² + γ₂Φ − A, for which
/// UV = d/2 − ¼|v|² − ¼x·∇Φ.
fn confined_bgk(pot: &Potential, dp: &DriftParams, d: usize) -> Result<LyapunovSpec> {
    let dp = dp.lowered_to(2.0);
    let lambda = dp.gamma1.min(dp.gamma2).min(1.0) / 4.0;
    let k = 0.5 * d as f64 + dp.a / 4.0 + lambda + (dp.gamma2 / 4.0 - lambda) * neg_part(pot.lower_bound());
    Ok(LyapunovSpec {
        form: LyapunovForm::bgk_modified(),
        drift: Drift::Geometric { lambda, k },
        moments: None,
        audit: drift_audit(&dp),
    })
}

/// Same V as the confined case with x·∇Φ ≥ γ₁|x|^{2β} + γ₂Φ − A, β < 1, and
/// V^β ≤ 1 + Φ^β + (5/8)^β|v|^{2β} + 4^{−β}|x|^{2β}.
fn subgeometric_bgk(pot: &Potential, dp: &DriftParams, d: usize) -> Result<LyapunovSpec> {
    if !(dp.p > 0.0) {
        return Err(Error::ConstraintViolated("drift exponent must be positive".into()));
    }
    if pot.lower_bound() < 0.0 {
        return Err(Error::ConstraintViolated("subgeometric drift needs Φ ≥ 0".into()));
    }
    let beta = 0.5 * dp.p;
    let c58 = 0.625f64.powf(beta);
    let lambda = (dp.gamma2 / 4.0).min(0.25 / c58).min(dp.gamma1 / 4.0 * 4f64.powf(beta));
    let k = 0.5 * d as f64 + dp.a / 4.0 + lambda * (2.0 + c58);
    let mut audit = drift_audit(dp);
    audit.push(AuditEntry::new("beta", beta, "half the confinement exponent"));
    Ok(LyapunovSpec {
        form: LyapunovForm::bgk_modified(),
        drift: Drift::Subgeometric { lambda, k, q: beta },
        moments: None,
        audit,
    })
}

/// V = |v|² on the torus. L*|v|² = γ_b(I₂ − s²I₀) ≤ c(ε)(1+s^γ) − a(ε)s²(1+s^γ)
/// with a = A₀γ_b − εC₁(1+γ_b/2) and c = max(1,γ_b)C₂ + C₁(1+γ_b/2)/ε.
fn torus_boltzmann(m: KernelMoments) -> Result<LyapunovSpec> {
    let g = m.kernel.gamma;
    let gb = m.momentum_transfer;
    let (a0, c1, c2) = m.torus_ratios();
    let h = 1.0 + 0.5 * gb;
    let a = |e: f64| a0 * gb - e * c1 * h;
    let c = |e: f64| gb.max(1.0) * c2 + c1 * h / e;
    let k_of = |e: f64| {
        let (a, c) = (a(e), c(e));
        if g == 0.0 {
            2.0 * c
        } else {
            let s = (c * g / (a * (2.0 + g))).sqrt();
            c * (1.0 + s.powf(g)) - a * s.powf(2.0 + g)
        }
    };
    let e_max = a0 * gb / (c1 * h);
    let (eps, _) = golden_max(|e| a(e).ln() - k_of(e).ln(), 1e-3 * e_max, 0.999 * e_max, 1e-9 * e_max);
    let lambda = a(eps);
    let k = k_of(eps);
    let audit = vec![
        AuditEntry::new("A0", a0, "inf I0/(1+s^gamma)"),
        AuditEntry::new("C1", c1, "sup I1/(1+s^gamma)"),
        AuditEntry::new("C2", c2, "sup I2/(1+s^gamma)"),
        AuditEntry::new("gamma_b", gb, "momentum transfer coefficient"),
        AuditEntry::new("epsilon", eps, "Young parameter maximizing lambda/K"),
    ];
    Ok(LyapunovSpec {
        form: LyapunovForm::KineticEnergy,
        drift: Drift::Geometric { lambda, k },
        moments: Some(m),
        audit,
    })
}

/// V = Φ + ½|v|² + αx·v + α|x|² with x·∇Φ ≥ γ₁⟨x⟩^{γ+2} + γ₂Φ − A.
fn confined_boltzmann(pot: &Potential, dp: &DriftParams, m: KernelMoments) -> Result<LyapunovSpec> {
    let g = m.kernel.gamma;
    let gp = g + 2.0;
    let dp = dp.lowered_to(gp).bracket_form();
    let (a1, a2) = m.energy_dissipation();
    let cxv = m.cross_coefficient();
    let c3 = cxv + 2.0;
    let eps = 0.9 * (a1 * gp / (4.0 * c3 * (g + 1.0))).powf((g + 1.0) / gp);
    let alpha_max = (dp.gamma1 * gp * eps.powf(gp) / c3).powf(1.0 / (g + 1.0));
    let alpha = (0.9 * alpha_max).min(a1 / 4.0).min(0.45);
    let cv = a1 / 4.0 - c3 * eps.powf(gp / (g + 1.0)) * (g + 1.0) / gp;
    let cx = alpha * dp.gamma1 - c3 * alpha.powf(gp) / (gp * eps.powf(gp));
    if !(cv > 0.0 && cx > 0.0) {
        return Err(Error::ConstraintViolated(format!(
            "no admissible coefficients (c_v = {cv}, c_x = {cx})"
        )));
    }
    let lambda = (alpha * dp.gamma2)
        .min(cv / (0.5 + 0.5 * alpha))
        .min(cx / (1.5 * alpha));
    let k = 0.5 * a2 + alpha * dp.a + (alpha * dp.gamma2 - lambda) * neg_part(pot.lower_bound());
    let form = LyapunovForm::Quadratic {
        offset: 0.0,
        a: alpha,
        b: alpha,
    };
    form.validate()?;
    let mut audit = drift_audit(&dp);
    audit.extend([
        AuditEntry::new("alpha1", a1, "L*|v|^2 <= -alpha1 <v>^(gamma+2) + alpha2"),
        AuditEntry::new("alpha2", a2, "L*|v|^2 <= -alpha1 <v>^(gamma+2) + alpha2"),
        AuditEntry::new("c_xv", cxv, "sup |L*(x.v)| / (|x| <v>^(gamma+1))"),
        AuditEntry::new("epsilon", eps, "Young parameter"),
        AuditEntry::new("alpha", alpha, "cross-term coefficient"),
        AuditEntry::new("c_v", cv, "velocity dissipation margin"),
        AuditEntry::new("c_x", cx, "position dissipation margin"),
    ]);
    Ok(LyapunovSpec {
        form,
        drift: Drift::Geometric { lambda, k },
        moments: Some(m),
        audit,
    })
}

/// V = Φ + ½|v|² + αx·v/⟨x⟩ + β⟨x⟩ with x·∇Φ ≥ γ₁⟨x⟩^{1+δ} + γ₂Φ − A and
/// Φ ≤ γ₃⟨x⟩^{1+δ}; drift exponent q = δ/(1+δ).
fn subgeometric_boltzmann(pot: &Potential, dp: &DriftParams, m: KernelMoments) -> Result<LyapunovSpec> {
    if !(dp.p > 1.0) {
        return Err(Error::ConstraintViolated(format!(
            "Boltzmann confinement needs exponent > 1, got {}",
            dp.p
        )));
    }
    if pot.lower_bound() < 0.0 {
        return Err(Error::ConstraintViolated("subgeometric drift needs Φ ≥ 0".into()));
    }
    let dp = dp.bracket_form();
    let delta = dp.p - 1.0;
    let q = delta / (1.0 + delta);
    let up = pot
        .upper_growth()
        .ok_or_else(|| Error::ConstraintViolated("subgeometric Boltzmann drift needs an upper growth bound".into()))?;
    if up.exponent > dp.p {
        return Err(Error::ConstraintViolated(format!(
            "upper growth exponent {} exceeds drift exponent {}",
            up.exponent, dp.p
        )));
    }
    let (a1, a2) = m.energy_dissipation();
    let cxv = m.cross_coefficient();
    let beta = a1 / 6.0;
    let alpha = 0.9 * (0.5 * beta.sqrt()).min((0.5 * a1 - beta) / (cxv + 1.0));
    let cv = 0.5 * a1 - alpha * (cxv + 1.0) - beta;
    let cx = alpha * dp.gamma1;
    let lambda = (cv / (0.5 + 0.5 * alpha)).min(cx / (up.gamma3.powf(q) + beta.powf(q)));
    let k = 0.5 * a2 + alpha * dp.a + 2.0 * lambda;
    let form = LyapunovForm::Bracket { a: alpha, b: beta };
    form.validate()?;
    let mut audit = drift_audit(&dp);
    audit.extend([
        AuditEntry::new("alpha1", a1, "L*|v|^2 <= -alpha1 <v>^(gamma+2) + alpha2"),
        AuditEntry::new("alpha2", a2, "L*|v|^2 <= -alpha1 <v>^(gamma+2) + alpha2"),
        AuditEntry::new("c_xv", cxv, "sup |L*(x.v)| / (|x| <v>^(gamma+1))"),
        AuditEntry::new("gamma3", up.gamma3, "upper growth constant"),
        AuditEntry::new("alpha", alpha, "cross-term coefficient"),
        AuditEntry::new("beta", beta, "bracket coefficient"),
        AuditEntry::new("c_v", cv, "velocity dissipation margin"),
    ]);
    Ok(LyapunovSpec {
        form,
        drift: Drift::Subgeometric { lambda, k, q },
        moments: Some(m),
        audit,
    })
}

fn drift_audit(dp: &DriftParams) -> Vec<AuditEntry> {
    vec![
        AuditEntry::new("drift_gamma1", dp.gamma1, "confinement coefficient"),
        AuditEntry::new("drift_gamma2", dp.gamma2, "potential coefficient"),
        AuditEntry::new("drift_A", dp.a, "drift offset"),
        AuditEntry::new("drift_p", dp.p, "confinement exponent"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowConfig;
    use crate::kernel::CollisionKernelSpec;
    use approx::assert_relative_eq;

    fn point(x: f64, v: f64) -> PhasePoint {
        PhasePoint::new(Vector::from_slice(&[x]), Vector::from_slice(&[v]))
    }

    #[test]
    fn confined_bgk_constants_for_unit_quadratic() {
        let dom = DomainSpec::whole_space(1, Potential::quadratic(1.0));
        let spec = LyapunovSpec::for_process(&ProcessSpec::bgk(dom.clone(), FlowConfig::default())).unwrap();
        assert_eq!(
            spec.drift,
            Drift::Geometric {
                lambda: 0.125,
                k: 0.625
            }
        );
        let z = point(0.7, -1.3);
        let exact = 0.5 - 0.25 * 1.69 - 0.25 * 0.49;
        assert_relative_eq!(spec.generator(&dom, &z).unwrap(), exact, epsilon = 1e-14);
        assert!(spec.grid_check(&dom, 10_000, 50.0, 1e-9).unwrap().passed());
    }

    #[test]
    fn bgk_generator_matches_finite_difference() {
        // For BGK, UV = ∇V·(v, −∇Φ) + ∫V M dv − V.
        let pot = Potential::quartic(1.0);
        let dom = DomainSpec::whole_space(1, pot.clone());
        let spec = LyapunovSpec {
            form: LyapunovForm::Quadratic {
                offset: 0.3,
                a: 0.2,
                b: 0.1,
            },
            drift: Drift::Geometric { lambda: 0.0, k: 0.0 },
            moments: None,
            audit: vec![],
        };
        let (x, v) = (0.8, -0.6);
        let vv = |x: f64, v: f64| spec.value(&dom, &point(x, v));
        let h = 1e-5;
        let dx = (vv(x + h, v) - vv(x - h, v)) / (2.0 * h);
        let dv = (vv(x, v + h) - vv(x, v - h)) / (2.0 * h);
        let grad = pot.gradient(&Vector::from_slice(&[x]))[0];
        // ∫V M dv = 0.3 + Φ + ½ + b x².
        let avg = 0.3 + pot.value(&Vector::from_slice(&[x])) + 0.5 + 0.1 * x * x;
        let expect = v * dx - grad * dv + avg - vv(x, v);
        assert_relative_eq!(spec.generator(&dom, &point(x, v)).unwrap(), expect, epsilon = 1e-7);
    }

    #[test]
    fn boltzmann_identities_reduce_to_bgk_for_maxwell_molecules() {
        // γ = 0 with unit angular mass: L*|v|² = (d − |v|²)/2 and L*(x·v) = −x·v/2.
        let kernel = CollisionKernelSpec::hard_spheres(0.0, 3);
        let m = KernelMoments::new(&kernel, 3).unwrap();
        assert_relative_eq!(m.lstar_v2(1.7).unwrap(), 0.5 * (3.0 - 1.7 * 1.7), epsilon = 1e-12);
        assert_relative_eq!(m.lstar_xv(1.7).unwrap(), -0.5 * 1.7, epsilon = 1e-12);
    }

    #[test]
    fn torus_boltzmann_drift_holds_pointwise() {
        for gamma in [0.0, 0.5, 1.0] {
            let kernel = CollisionKernelSpec::hard_spheres(gamma, 1);
            let dom = DomainSpec::torus(1);
            let proc = ProcessSpec::boltzmann(dom.clone(), kernel, FlowConfig::default()).unwrap();
            let spec = LyapunovSpec::for_process(&proc).unwrap();
            assert!(spec.drift.lambda() > 0.0);
            let r = spec.grid_check(&dom, 2000, 50.0, 1e-6).unwrap();
            assert!(r.passed(), "gamma = {gamma}: {r:?}");
        }
    }

    #[test]
    fn confined_boltzmann_drift_holds_pointwise() {
        let kernel = CollisionKernelSpec::hard_spheres(1.0, 1);
        let dom = DomainSpec::whole_space(1, Potential::quartic(1.0));
        let proc = ProcessSpec::boltzmann(dom.clone(), kernel, FlowConfig::default()).unwrap();
        let spec = LyapunovSpec::for_process(&proc).unwrap();
        assert!(spec.drift.is_geometric());
        let r = spec.grid_check(&dom, 2000, 50.0, 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn subgeometric_drifts_hold_pointwise() {
        let dom = DomainSpec::whole_space(1, Potential::subquadratic(1.0, 0.5));
        let spec = LyapunovSpec::for_process(&ProcessSpec::bgk(dom.clone(), FlowConfig::default())).unwrap();
        assert_relative_eq!(spec.drift.exponent(), 0.5);
        assert!(spec.grid_check(&dom, 10_000, 50.0, 1e-9).unwrap().passed());

        let kernel = CollisionKernelSpec::hard_spheres(0.0, 1);
        let dom = DomainSpec::whole_space(1, Potential::superlinear(1.0, 0.5));
        let proc = ProcessSpec::boltzmann(dom.clone(), kernel, FlowConfig::default()).unwrap();
        let spec = LyapunovSpec::for_process(&proc).unwrap();
        assert_relative_eq!(spec.drift.exponent(), 1.0 / 3.0, epsilon = 1e-12);
        let r = spec.grid_check(&dom, 2000, 50.0, 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn weight_equivalence_holds_on_samples() {
        let dom = DomainSpec::whole_space(1, Potential::quadratic(1.0));
        let form = LyapunovForm::bgk_modified();
        let c = Weight::Confined.equivalence(&form).unwrap();
        assert_relative_eq!(c, 16.0);
        for i in 0..5000 {
            let u = halton(i, 2);
            let z = point(40.0 * (u[0] - 0.5), 40.0 * (u[1] - 0.5));
            assert!(Weight::Confined.value(&dom, &z) <= c * (1.0 + form.value(&dom, &z)) + 1e-9);
        }
        let br = LyapunovForm::Bracket { a: 0.1, b: 0.2 };
        let dom = DomainSpec::whole_space(1, Potential::superlinear(1.0, 0.5));
        let c = Weight::ConfinedLinear.equivalence(&br).unwrap();
        for i in 0..5000 {
            let u = halton(i, 2);
            let z = point(40.0 * (u[0] - 0.5), 40.0 * (u[1] - 0.5));
            assert!(Weight::ConfinedLinear.value(&dom, &z) <= c * (1.0 + br.value(&dom, &z)) + 1e-9);
        }
    }

    #[test]
    fn equilibrium_means_match_closed_forms() {
        let quad = QuadratureConfig::default();
        let dom = DomainSpec::whole_space(1, Potential::quadratic(1.0));
        let eq = EquilibriumSpec::new(dom, &quad).unwrap();
        // Standard Gaussian x: E Φ = ½, E x² = 1.
        assert_relative_eq!(
            Weight::Confined.equilibrium_mean(&eq, &quad).unwrap(),
            3.0,
            epsilon = 1e-9
        );
        let v = LyapunovForm::bgk_modified().equilibrium_mean(&eq, &quad).unwrap();
        assert_relative_eq!(v, 1.0 + 0.5 + 0.5 + 0.125, epsilon = 1e-9);
    }

    #[test]
    fn coefficient_constraints_enforced() {
        assert!(LyapunovForm::Quadratic {
            offset: 0.0,
            a: 1.0,
            b: 0.4
        }
        .validate()
        .is_err());
        assert!(LyapunovForm::Bracket { a: 0.5, b: 0.5 }.validate().is_err());
        assert!(LyapunovForm::bgk_modified().validate().is_ok());
    }

    #[test]
    fn empirical_drift_for_torus_bgk_kinetic_energy() {
        let dom = DomainSpec::torus(1);
        let proc = ProcessSpec::bgk(dom, FlowConfig::default());
        let spec = LyapunovSpec {
            form: LyapunovForm::KineticEnergy,
            drift: Drift::Geometric { lambda: 1.0, k: 1.0 },
            moments: None,
            audit: vec![],
        };
        let pts = vec![point(0.5, 3.0); 20_000];
        let mut ens = Ensemble::new(pts, 11);
        let rep = spec.empirical_check(&proc, &mut ens, &[0.5, 1.0, 2.0]).unwrap();
        assert!(rep.passed(), "{rep:?}");
        // E|v_t|² = e^{−t}·9 + (1 − e^{−t}) exactly.
        let last = rep.rows[2];
        assert!((last.mean - last.envelope).abs() < 4.0 * last.stderr);
    }
}
