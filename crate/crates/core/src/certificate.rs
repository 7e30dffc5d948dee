//! Minorisation constants, Doeblin and Harris contraction, and rate curves.
//!
//! Masses and contraction gaps are kept as logarithms: confined
//! minorisation masses routinely fall far below the smallest `f64`.

use crate::error::{Error, Result};
use crate::flow::{shooting_time_bound, transport_window_constants, TransportNet};
use crate::jump::{KappaTable, ProcessKind, ProcessSpec, THINNING_PAD};
use crate::kernel::CollisionKernelSpec;
use crate::lyapunov::{AuditEntry, Drift, LyapunovForm, LyapunovSpec};
use crate::numerics::{
    self, golden_max, integrate, integrate_with_breaks, ln_ball_volume, ln_neg_log1m, ln_one_minus_exp, log_add_exp,
    QuadratureConfig,
};
use crate::potential::Potential;
use crate::vector::Vector;
use std::f64::consts::PI;

/// Relative margin on the torus transport radius and on δ_L.
const TORUS_MARGIN: f64 = 1.01;

/// Downward pad on the gridded Carleman minimum.
const CARLEMAN_PAD: f64 = 0.95;

/// Support of the minorising measure ν (uniform on it).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MinorisingMeasure {
    /// Uniform on T^d × B(δ_V).
    TorusBall { delta_v: f64 },
    /// Uniform on B(δ_X) × B(δ_V).
    Balls { delta_x: f64, delta_v: f64 },
}

impl MinorisingMeasure {
    pub fn ln_volume(&self, d: usize) -> f64 {
        match *self {
            MinorisingMeasure::TorusBall { delta_v } => ln_ball_volume(d, delta_v),
            MinorisingMeasure::Balls { delta_x, delta_v } => ln_ball_volume(d, delta_x) + ln_ball_volume(d, delta_v),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            MinorisingMeasure::TorusBall { delta_v } => format!("uniform on T^d x B({delta_v:.6})"),
            MinorisingMeasure::Balls { delta_x, delta_v } => {
                format!("uniform on B({delta_x:.6}) x B({delta_v:.6})")
            }
        }
    }
}

/// Set on which the minorisation holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SmallSet {
    Everywhere,
    /// {V ≤ level}.
    Sublevel {
        level: f64,
    },
}

/// P_{t*}δ_z ≥ α ν for all z in `region`.
#[derive(Clone, Debug)]
pub struct MinorisationCertificate {
    pub t_star: f64,
    pub d: usize,
    pub ln_alpha: f64,
    pub nu: MinorisingMeasure,
    pub region: SmallSet,
    pub audit: Vec<AuditEntry>,
}

impl MinorisationCertificate {
    pub fn alpha(&self) -> f64 {
        self.ln_alpha.exp()
    }

    /// ln of the certified density lower bound α/|supp ν|.
    pub fn ln_density(&self) -> f64 {
        self.ln_alpha - self.nu.ln_volume(self.d)
    }
}

/// Doeblin contraction: rate −ln(1−α)/t* and prefactor 1/(1−α).
pub fn doeblin_rate(t_star: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0 && t_star > 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "Doeblin rate needs α ∈ (0,1) and t* > 0 (α = {alpha}, t* = {t_star})"
        )));
    }
    Ok((-(-alpha).ln_1p() / t_star, 1.0 / (1.0 - alpha)))
}

/// 2(1−α)^⌊t/t*⌋, the L¹ distance bound after ⌊t/t*⌋ contractions.
pub fn doeblin_iterated_bound(t: f64, t_star: f64, ln_alpha: f64) -> f64 {
    let n = (t / t_star).floor();
    2.0 * (n * ln_one_minus_exp(ln_alpha)).exp()
}

/// ln M(v) at speed |v| = s, finite far beyond the underflow of M.
pub fn ln_maxwellian(d: usize, s: f64) -> f64 {
    -0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * s * s
}

/// R = 1.01√d, a radius whose ball covers the unit cell.
pub fn torus_transport_radius(d: usize) -> f64 {
    TORUS_MARGIN * (d as f64).sqrt()
}

/// Smallest admissible δ_L = 2R/t₀ with t₀ = t*/3.
pub fn torus_delta_floor(t_star: f64, d: usize) -> f64 {
    2.0 * torus_transport_radius(d) / (t_star / 3.0)
}

fn torus_ln_alpha(t_star: f64, d: usize, delta_l: f64, loss_rate: f64, ln_alpha_l: f64) -> f64 {
    -(9f64.ln()) - loss_rate * t_star + (2.0 - d as f64) * t_star.ln() + 2.0 * ln_alpha_l + ln_ball_volume(d, delta_l)
}

/// Two-jump Doeblin constant for BGK on the torus:
/// α = ⅑e^{−t*}t*^{2−d}M(δ_L)²·|B(δ_L)|.
pub fn doeblin_alpha_torus_bgk(t_star: f64, d: usize, delta_l: f64) -> Result<MinorisationCertificate> {
    let floor = torus_delta_floor(t_star, d);
    if !(t_star > 0.0) || !(delta_l > floor) {
        return Err(Error::ConstraintViolated(format!(
            "δ_L = {delta_l} must exceed 2R/t₀ = {floor} for t* = {t_star}"
        )));
    }
    let ln_alpha_l = ln_maxwellian(d, delta_l);
    let ln_alpha = torus_ln_alpha(t_star, d, delta_l, 1.0, ln_alpha_l);
    let audit = vec![
        AuditEntry::new("t_star", t_star, "minorisation time"),
        AuditEntry::new("R", torus_transport_radius(d), "transport radius, 1.01 sqrt(d)"),
        AuditEntry::new("delta_L", delta_l, "velocity radius of the minorising measure"),
        AuditEntry::new("ln_alpha_L", ln_alpha_l, "ln of the Maxwellian at delta_L"),
        AuditEntry::new("ln_alpha", ln_alpha, "ln of the minorisation mass"),
    ];
    Ok(MinorisationCertificate {
        t_star,
        d,
        ln_alpha,
        nu: MinorisingMeasure::TorusBall { delta_v: delta_l },
        region: SmallSet::Everywhere,
        audit,
    })
}

/// Maximizes ln of a rate over ln t* on [ln 0.05, ln 50].
fn optimize_ln_t<F: Fn(f64) -> f64>(f: F) -> f64 {
    let (lo, hi) = (0.05f64.ln(), 50f64.ln());
    let (best, _) = numerics::scan_max(|y| f(y.exp()), lo, hi, 200);
    best.exp()
}

/// The torus BGK certificate maximizing −ln(1−α)/t* with δ_L = 1.01·2R/t₀.
pub fn optimize_torus_bgk(d: usize) -> Result<MinorisationCertificate> {
    let ln_rate = |t: f64| match doeblin_alpha_torus_bgk(t, d, TORUS_MARGIN * torus_delta_floor(t, d)) {
        Ok(c) => ln_neg_log1m(c.ln_alpha) - t.ln(),
        Err(_) => f64::NEG_INFINITY,
    };
    let t = optimize_ln_t(ln_rate);
    doeblin_alpha_torus_bgk(t, d, TORUS_MARGIN * torus_delta_floor(t, d))
}

/// Two-jump minorisation for the linear Boltzmann process on the torus,
/// from starting speeds |v| ≤ √level.
pub fn torus_boltzmann_minorisation(
    kernel: &CollisionKernelSpec,
    table: &KappaTable,
    d: usize,
    t_star: f64,
    level: f64,
) -> Result<MinorisationCertificate> {
    let delta_l = TORUS_MARGIN * torus_delta_floor(t_star, d);
    let r_in = level.max(0.0).sqrt().max(delta_l);
    let loss = table.sup_up_to(r_in) * (1.0 + THINNING_PAD);
    let ln_alpha_l = ln_carleman_lower_bound(r_in, delta_l, kernel, d)?;
    if !ln_alpha_l.is_finite() {
        return Err(Error::ConstraintViolated(
            "the gain kernel has no positive lower bound on the minorisation region".into(),
        ));
    }
    let ln_alpha = torus_ln_alpha(t_star, d, delta_l, loss, ln_alpha_l);
    let audit = vec![
        AuditEntry::new("t_star", t_star, "minorisation time"),
        AuditEntry::new("delta_L", delta_l, "velocity radius of the minorising measure"),
        AuditEntry::new("R_L", r_in, "incoming speed bound for the gain kernel"),
        AuditEntry::new("kappa_sup", loss, "collision rate bound on the region"),
        AuditEntry::new("ln_alpha_L", ln_alpha_l, "ln of the Carleman gain lower bound"),
        AuditEntry::new("ln_alpha", ln_alpha, "ln of the minorisation mass"),
    ];
    Ok(MinorisationCertificate {
        t_star,
        d,
        ln_alpha,
        nu: MinorisingMeasure::TorusBall { delta_v: delta_l },
        region: SmallSet::Sublevel { level },
        audit,
    })
}

/// Jump density k(w → v) of the linear Boltzmann process in the Carleman
/// form k = (2^{d−1}/|v−w|)∫_{E} |w−v*|^{γ+2−d} b(cos θ) M(v*) dS(v*), E the
/// hyperplane through v orthogonal to v − w.
pub fn carleman_kernel(kernel: &CollisionKernelSpec, w: &Vector, v: &Vector) -> Result<f64> {
    Ok(ln_carleman_kernel(kernel, w, v)?.exp())
}

/// ln k(w → v); the Gaussian factor in v·n is kept in log space so large
/// |v| does not underflow.
pub fn ln_carleman_kernel(kernel: &CollisionKernelSpec, w: &Vector, v: &Vector) -> Result<f64> {
    let d = w.dim();
    let g = kernel.gamma;
    let b = &kernel.angular;
    let rel = *v - *w;
    let l = rel.norm();
    if l < 1e-12 {
        return Ok(f64::INFINITY);
    }
    if d == 1 {
        return Ok(b.eval(-1.0).ln() + g * l.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * v.norm_sq());
    }
    let n = rel.scale(1.0 / l);
    let vn = v.dot(&n);
    let w_perp = *w - n.scale(w.dot(&n));
    let a = w_perp.norm();
    let cos_theta = |rho: f64| (rho * rho - l * l) / (rho * rho + l * l);
    let cfg = QuadratureConfig {
        abs_tol: 1e-14,
        rel_tol: 1e-10,
        max_intervals: 4000,
    };
    let ln_pref = (d as f64 - 1.0) * 2f64.ln() - l.ln() - 0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * vn * vn;
    if d == 2 {
        // v* = (v·n)n + w⊥ + t e: |w − v*|² = t² + L², |v*|² = (v·n)² + (a + t)².
        let f = |t: f64| (t * t + l * l).powf(0.5 * g) * b.eval(cos_theta(t.abs())) * (-0.5 * (a + t) * (a + t)).exp();
        let lo = -a - 12.0;
        let hi = -a + 12.0;
        let mut brk: Vec<f64> = [-l, l, 0.0].into_iter().filter(|&x| x > lo && x < hi).collect();
        brk.sort_by(f64::total_cmp);
        return Ok(ln_pref + integrate_with_breaks(f, lo, hi, &brk, &cfg)?.ln());
    }
    // d = 3, polar coordinates (ρ, φ) in E around w⊥.
    // A failed inner quadrature poisons the outer integral with NaN.
    let inner = |rho: f64| {
        let h = |phi: f64| (-0.5 * (a * a + 2.0 * a * rho * phi.cos() + rho * rho)).exp();
        integrate(h, 0.0, PI, &cfg).map_or(f64::NAN, |x| 2.0 * x)
    };
    let outer = |rho: f64| rho * (rho * rho + l * l).powf(0.5 * (g - 1.0)) * b.eval(cos_theta(rho)) * inner(rho);
    let hi = a + 12.0;
    let brk: Vec<f64> = if l < hi { vec![l] } else { vec![] };
    let ln_k = ln_pref + integrate_with_breaks(outer, 0.0, hi, &brk, &cfg)?.ln();
    if ln_k.is_nan() || ln_k == f64::INFINITY {
        return Err(Error::PreconditionViolated(format!(
            "Carleman kernel not finite at L = {l}"
        )));
    }
    Ok(ln_k)
}

/// Lower bound of k(w → v) over |w| ≤ r_in, |v| ≤ r_out, padded down 5%.
/// In d = 1 with γ > 0 the kernel vanishes on the diagonal and the bound is 0.
pub fn carleman_lower_bound(r_in: f64, r_out: f64, kernel: &CollisionKernelSpec, d: usize) -> Result<f64> {
    Ok(ln_carleman_lower_bound(r_in, r_out, kernel, d)?.exp())
}

/// ln of [`carleman_lower_bound`].
pub fn ln_carleman_lower_bound(r_in: f64, r_out: f64, kernel: &CollisionKernelSpec, d: usize) -> Result<f64> {
    kernel.validate()?;
    if d == 1 {
        if kernel.gamma > 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        return Ok(CARLEMAN_PAD.ln() + kernel.angular.eval(-1.0).ln() + ln_maxwellian(1, r_out));
    }
    // Rotation invariance: only |w|, |v| and the angle between them matter.
    let n = 9;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let rw = r_in * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let rv = r_out * j as f64 / (n - 1) as f64;
            for k in 0..n {
                let th = PI * k as f64 / (n - 1) as f64;
                let w = Vector::unit(d, 0).scale(rw);
                let v = Vector::unit(d, 0)
                    .scale(rv * th.cos())
                    .axpy(rv * th.sin(), &Vector::unit(d, 1));
                if (v - w).norm() < 1e-9 {
                    continue;
                }
                best = best.min(ln_carleman_kernel(kernel, &w, &v)?);
            }
        }
    }
    Ok(CARLEMAN_PAD.ln() + best)
}

/// Search resolution for the confined minorisation window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfinedSearch {
    /// Net used for the reported transport constants.
    pub net: TransportNet,
    /// Coarser net used while searching over windows.
    pub search_net: TransportNet,
    pub grid: usize,
}

impl Default for ConfinedSearch {
    fn default() -> Self {
        ConfinedSearch {
            net: TransportNet::default(),
            search_net: TransportNet {
                points: 256,
                ..TransportNet::default()
            },
            grid: 12,
        }
    }
}

/// Minorisation at time t in a confining potential from starting points
/// with |x|, |v| ≤ K: f_t ≥ e^{−Ct}α_L²α_T ε(b−a) on B(R/2) × B(R₂/2).
pub fn doeblin_alpha_confined(
    process: &ProcessSpec,
    t: f64,
    k_support: f64,
    search: &ConfinedSearch,
) -> Result<MinorisationCertificate> {
    let pot = process
        .domain
        .potential()
        .ok_or_else(|| Error::PreconditionViolated("confined minorisation needs a potential".into()))?;
    let d = process.domain.dim;
    if !(t > 0.0 && k_support > 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "confined minorisation needs t > 0 and K > 0 (t = {t}, K = {k_support})"
        )));
    }
    let h_max = 0.5 * k_support * k_support + pot.sup_on_ball(k_support);
    let r = pot.sublevel_radius(h_max).max(k_support.min(1.0) * 1e-3);
    let v_init = (2.0 * (h_max - pot.lower_bound())).max(0.0).sqrt();
    let t1 = shooting_time_bound(r, pot);
    let c_r = pot.grad_sup_bound(r);
    let eps_of = |r2: f64| {
        let mut e = (r / (2.0 * r2)).min(r2 / (2.0 * r));
        if c_r > 0.0 {
            e = e.min(r.sqrt() / (2.0 * c_r.sqrt())).min(r2 / (2.0 * c_r));
        }
        e
    };
    let b_cap = (0.999 * t1).min(t);
    let window = |a: f64| -> Option<(f64, f64, f64)> {
        let r2 = 4.0 * r / a;
        let eps = eps_of(r2);
        let b = b_cap.min(t - eps);
        (b > a).then_some((b, r2, eps))
    };
    // ln of the gain density bound and the loss rate along the paths.
    let ln_gain = |r2: f64, r_prime: f64| -> Result<(f64, f64)> {
        match &process.kind {
            ProcessKind::Bgk => Ok((ln_maxwellian(d, r2), 1.0)),
            ProcessKind::LinearBoltzmann(kernel) => {
                let r_in = v_init.max(r_prime);
                let table = process.kappa_table().expect("Boltzmann process has a table");
                let loss = table.sup_up_to(r_in) * (1.0 + THINNING_PAD);
                Ok((ln_carleman_lower_bound(r_in, r2, kernel, d)?, loss))
            }
        }
    };
    let objective = |a: f64, net: &TransportNet| -> Result<Option<(f64, Vec<AuditEntry>)>> {
        let Some((b, r2, eps)) = window(a) else {
            return Ok(None);
        };
        let tc = transport_window_constants(r, a, b, pot, d, net)?;
        let (ln_al, loss) = ln_gain(r2, tc.r_prime)?;
        if !ln_al.is_finite() {
            return Ok(None);
        }
        let ln_c = -loss * t + 2.0 * ln_al + tc.alpha_t.ln() + eps.ln() + (b - a).ln();
        let audit = vec![
            AuditEntry::new("t_star", t, "minorisation time"),
            AuditEntry::new("K_support", k_support, "starting set radius in x and v"),
            AuditEntry::new("H_max", h_max, "max energy on the starting set"),
            AuditEntry::new("R", r, "radius of the energy sublevel set"),
            AuditEntry::new("t1", t1, "shooting horizon for radius R"),
            AuditEntry::new("a", a, "flight window start"),
            AuditEntry::new("b", b, "flight window end"),
            AuditEntry::new("R2", r2, "velocity radius 4R/a"),
            AuditEntry::new("R_prime", tc.r_prime, "speed bound on the energy set"),
            AuditEntry::new("M", tc.m, "Jacobian bound of the position map"),
            AuditEntry::new("alpha_T", tc.alpha_t, "transport density bound 1/M"),
            AuditEntry::new("epsilon", eps, "final flight allowance"),
            AuditEntry::new("C_R", c_r, "sup of |grad Phi| on B(R)"),
            AuditEntry::new("loss_rate", loss, "collision rate bound along the paths"),
            AuditEntry::new("ln_alpha_L", ln_al, "ln of the gain density bound"),
            AuditEntry::new("ln_c", ln_c, "ln of the density lower bound"),
        ];
        Ok(Some((ln_c, audit)))
    };
    // Coarse scan then golden refinement with the search net.
    let n = search.grid.max(3);
    let mut best: Option<(f64, f64)> = None;
    let grid: Vec<f64> = (1..=n).map(|i| b_cap * i as f64 / (n + 1) as f64).collect();
    for &a in &grid {
        if let Some((v, _)) = objective(a, &search.search_net)? {
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((a, v));
            }
        }
    }
    let Some((a0, _)) = best else {
        return Err(Error::ShootingHorizonExceeded { t });
    };
    let h = b_cap / (n + 1) as f64;
    let (a_ref, v_ref) = golden_max(
        |a| match objective(a, &search.search_net) {
            Ok(Some((v, _))) => v,
            _ => f64::NEG_INFINITY,
        },
        (a0 - h).max(1e-3 * h),
        a0 + h,
        1e-3 * h,
    );
    let a = if v_ref.is_finite() { a_ref } else { a0 };
    let (ln_c, mut audit) = match objective(a, &search.net)? {
        Some(x) => x,
        None => objective(a0, &search.net)?.ok_or(Error::ShootingHorizonExceeded { t })?,
    };
    let r2 = audit
        .iter()
        .find(|e| e.name == "R2")
        .map(|e| e.value)
        .unwrap_or(f64::NAN);
    let nu = MinorisingMeasure::Balls {
        delta_x: 0.5 * r,
        delta_v: 0.5 * r2,
    };
    let ln_alpha = ln_c + nu.ln_volume(d);
    audit.push(AuditEntry::new("ln_alpha", ln_alpha, "ln of the minorisation mass"));
    Ok(MinorisationCertificate {
        t_star: t,
        d,
        ln_alpha,
        nu,
        region: SmallSet::Everywhere,
        audit,
    })
}

/// Radius K with {V ≤ level} ⊂ B(K) × B(K), assuming Φ ≥ inf Φ.
pub fn sublevel_support(form: &LyapunovForm, potential: Option<&Potential>, level: f64) -> Result<f64> {
    let inf_phi = potential.map_or(0.0, |p| p.lower_bound());
    let x_rad = |h: f64| potential.map_or(0.0, |p| p.sublevel_radius(h));
    match *form {
        LyapunovForm::KineticEnergy => Ok(level.max(0.0).sqrt()),
        LyapunovForm::Quadratic { offset, a, b } => {
            let cv = if a == 0.0 { 0.5 } else { 0.5 - a * a / (2.0 * b) };
            let e = (level - offset - inf_phi).max(0.0);
            Ok((e / cv).sqrt().max(x_rad(level - offset)))
        }
        LyapunovForm::Bracket { a, b } => {
            let e = (level - b + a * a - inf_phi).max(0.0);
            Ok((2.0 * e.sqrt()).max(x_rad(level + 0.5 * a * a)))
        }
        LyapunovForm::Constant => Err(Error::PreconditionViolated(
            "a constant Lyapunov function has no bounded sublevel sets".into(),
        )),
    }
}

/// ᾱ = max{1 − (β − β₀), (2 + Rγα₀)/(2 + Rγ)} with γ = β₀/D.
pub fn harris_alpha_bar(beta: f64, alpha_d: f64, d_const: f64, r: f64, beta0: f64, alpha0: f64) -> Result<f64> {
    let ln_gap = harris_ln_gap(beta.ln(), alpha_d, d_const, r, beta0 / beta, alpha0)?;
    Ok(1.0 - ln_gap.exp())
}

/// ln(1 − ᾱ) for β₀ = θβ, with β given by its logarithm.
pub fn harris_ln_gap(ln_beta: f64, alpha_d: f64, d_const: f64, r: f64, theta: f64, alpha0: f64) -> Result<f64> {
    if !(d_const > 0.0 && alpha_d > 0.0 && alpha_d < 1.0) {
        return Err(Error::PreconditionViolated(format!(
            "drift needs α_D ∈ (0,1) and D > 0 (α_D = {alpha_d}, D = {d_const})"
        )));
    }
    if !(r > 2.0 * d_const / (1.0 - alpha_d)) {
        return Err(Error::PreconditionViolated(format!(
            "R > 2D/(1 − α_D) violated: R = {r}, 2D/(1 − α_D) = {}",
            2.0 * d_const / (1.0 - alpha_d)
        )));
    }
    if !(theta > 0.0 && theta < 1.0) || !(ln_beta < 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "β₀ ∈ (0, β) violated: β₀/β = {theta}, ln β = {ln_beta}"
        )));
    }
    let floor = alpha_d + 2.0 * d_const / r;
    if !(alpha0 > floor && alpha0 < 1.0) {
        return Err(Error::PreconditionViolated(format!(
            "α₀ ∈ (α_D + 2D/R, 1) violated: α₀ = {alpha0}, α_D + 2D/R = {floor}"
        )));
    }
    let first = ln_beta + (-theta).ln_1p();
    let ln_rg = r.ln() + theta.ln() + ln_beta - d_const.ln();
    let second = ln_rg + (1.0 - alpha0).ln() - log_add_exp(2f64.ln(), ln_rg);
    Ok(first.min(second))
}

/// A Harris contraction certificate in the norm ∫(1 + γV)|·|.
#[derive(Clone, Debug)]
pub struct HarrisCertificate {
    pub minorisation: MinorisationCertificate,
    pub lambda: f64,
    pub k: f64,
    pub alpha_d: f64,
    pub d_const: f64,
    pub level: f64,
    pub theta: f64,
    pub alpha0: f64,
    pub ln_gamma: f64,
    /// ln(1 − ᾱ).
    pub ln_gap: f64,
}

impl HarrisCertificate {
    pub fn t_star(&self) -> f64 {
        self.minorisation.t_star
    }

    /// ln ᾱ, exact even when 1 − ᾱ underflows.
    pub fn ln_alpha_bar(&self) -> f64 {
        -ln_neg_log1m(self.ln_gap).exp()
    }

    /// ln of the continuous-time rate −ln ᾱ / t*.
    pub fn ln_rate(&self) -> f64 {
        ln_neg_log1m(self.ln_gap) - self.t_star().ln()
    }

    /// Bound on ∫w|P_t μ₀ − μ| as the smaller of the Harris contraction and
    /// the moment bound C_w(1 + e^{−λt}μ₀(V) + D) + μ(w).
    pub fn bound(&self, t: f64, inputs: &BoundInputs) -> f64 {
        let n = (t / self.t_star()).floor();
        let ln_gd = (self.ln_gamma + self.d_const.ln()).exp().ln_1p();
        let ln_init = log_add_exp(2f64.ln(), self.ln_gamma + (inputs.mu0_v + inputs.mu_star_v).ln());
        let ln_harris =
            inputs.weight_constant.ln() - self.ln_gamma.min(0.0) + ln_gd + n * self.ln_alpha_bar() + ln_init;
        let moment =
            inputs.weight_constant * (1.0 + (-self.lambda * t).exp() * inputs.mu0_v + self.d_const) + inputs.mu_star_w;
        ln_harris.exp().min(moment)
    }

    pub fn audit(&self) -> Vec<AuditEntry> {
        let mut out = self.minorisation.audit.clone();
        out.extend([
            AuditEntry::new("lambda", self.lambda, "drift rate"),
            AuditEntry::new("K", self.k, "drift offset"),
            AuditEntry::new("alpha_D", self.alpha_d, "discrete drift factor exp(-lambda t_star)"),
            AuditEntry::new("D", self.d_const, "discrete drift offset K/lambda"),
            AuditEntry::new("R_level", self.level, "small set level"),
            AuditEntry::new(
                "ln_beta",
                self.minorisation.ln_alpha,
                "ln of the small-set minorisation mass",
            ),
            AuditEntry::new("beta0_over_beta", self.theta, "tuning fraction"),
            AuditEntry::new("alpha0", self.alpha0, "tuning scalar in (alpha_D + 2D/R, 1)"),
            AuditEntry::new("ln_gamma", self.ln_gamma, "ln of the norm weight beta0/D"),
            AuditEntry::new("ln_one_minus_alpha_bar", self.ln_gap, "ln of the contraction gap"),
            AuditEntry::new("ln_rate", self.ln_rate(), "ln of -ln(alpha_bar)/t_star"),
        ]);
        out
    }
}

/// Grid searched by [`optimize_harris`].
#[derive(Clone, Debug, PartialEq)]
pub struct HarrisSearch {
    pub t_star: Vec<f64>,
    /// Multiples of 2D/(1 − α_D) used as the small-set level.
    pub level_factor: Vec<f64>,
    pub theta: Vec<f64>,
    /// α₀ = floor + φ(1 − floor), floor = α_D + 2D/R.
    pub phi: f64,
}

impl Default for HarrisSearch {
    fn default() -> Self {
        HarrisSearch {
            t_star: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            level_factor: vec![1.1, 1.5, 2.0, 4.0, 8.0],
            theta: (1..10).map(|i| 0.1 * i as f64).collect(),
            phi: 1e-3,
        }
    }
}

/// Best Harris certificate over the search grid, given a minorisation
/// oracle m(t*, level) for the small set {V ≤ level}.
pub fn optimize_harris<M>(lyap: &LyapunovSpec, minorise: M, search: &HarrisSearch) -> Result<HarrisCertificate>
where
    M: Fn(f64, f64) -> Result<MinorisationCertificate>,
{
    let Drift::Geometric { lambda, k } = lyap.drift else {
        return Err(Error::PreconditionViolated(
            "Harris assembly needs a geometric drift".into(),
        ));
    };
    let d_const = k / lambda;
    let mut best: Option<HarrisCertificate> = None;
    let mut last_err = None;
    for &t in &search.t_star {
        let alpha_d = (-lambda * t).exp();
        for &f in &search.level_factor {
            let level = f * 2.0 * d_const / (1.0 - alpha_d);
            let m = match minorise(t, level) {
                Ok(m) => m,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            };
            let floor = alpha_d + 2.0 * d_const / level;
            let alpha0 = floor + search.phi * (1.0 - floor);
            for &theta in &search.theta {
                let Ok(ln_gap) = harris_ln_gap(m.ln_alpha, alpha_d, d_const, level, theta, alpha0) else {
                    continue;
                };
                let cand = HarrisCertificate {
                    minorisation: m.clone(),
                    lambda,
                    k,
                    alpha_d,
                    d_const,
                    level,
                    theta,
                    alpha0,
                    ln_gamma: theta.ln() + m.ln_alpha - d_const.ln(),
                    ln_gap,
                };
                if best.as_ref().is_none_or(|b| cand.ln_rate() > b.ln_rate()) {
                    best = Some(cand);
                }
            }
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::PreconditionViolated("no admissible Harris parameters".into()))
    })
}

/// H_φ(u) = ∫₁^u ds/φ(s) for φ(s) = 1 + s^q.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPhi {
    pub q: f64,
}

impl HPhi {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::PreconditionViolated(format!("need q ∈ (0,1), got {q}")));
        }
        Ok(HPhi { q })
    }

    pub fn phi(&self, s: f64) -> f64 {
        1.0 + s.powf(self.q)
    }

    /// Quadrature in y = ln s, where the integrand e^y/(1 + e^{qy}) is smooth.
    pub fn h(&self, u: f64) -> f64 {
        if u <= 1.0 {
            return 0.0;
        }
        let cfg = QuadratureConfig {
            abs_tol: 0.0,
            rel_tol: 1e-13,
            max_intervals: 4000,
        };
        let q = self.q;
        let f = |y: f64| 1.0 / ((-y).exp() + ((q - 1.0) * y).exp());
        integrate(f, 0.0, u.ln(), &cfg).expect("H_phi quadrature")
    }

    /// H_φ⁻¹(t) by bisection in ln u.
    pub fn inverse(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let mut hi: f64 = 1.0;
        while self.h(hi.exp()) < t {
            hi *= 2.0;
        }
        let y = numerics::bisect(|y| self.h(y.exp()) - t, 0.0, hi).expect("bracketed");
        y.exp()
    }
}

/// min{2, C(μ₀(V)/H⁻¹(t) + 1/φ(H⁻¹(t)))}; the constant C is not certified.
#[derive(Clone, Debug)]
pub struct SubgeometricCertificate {
    pub lyapunov: LyapunovSpec,
    pub h: HPhi,
    pub constant: f64,
}

impl SubgeometricCertificate {
    pub fn curve(&self, t: f64, mu0_v: f64) -> f64 {
        let u = self.h.inverse(t);
        (self.constant * (mu0_v / u + 1.0 / self.h.phi(u))).min(2.0)
    }

    /// Algebraic decay exponent q/(1 − q) of the curve.
    pub fn exponent(&self) -> f64 {
        self.h.q / (1.0 - self.h.q)
    }
}

/// Inputs that turn a contraction into a distance bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    /// μ₀(V) of the initial law.
    pub mu0_v: f64,
    /// μ(V) under equilibrium.
    pub mu_star_v: f64,
    /// μ(w) under equilibrium.
    pub mu_star_w: f64,
    /// C_w with w ≤ C_w(1 + V).
    pub weight_constant: f64,
}

#[derive(Clone, Debug)]
pub enum Certificate {
    Doeblin(MinorisationCertificate),
    Harris(HarrisCertificate),
    Subgeometric(SubgeometricCertificate),
}

impl Certificate {
    /// Certified bound on the distance tracked for this certificate: L¹ for
    /// Doeblin and subgeometric, weighted L¹ for Harris.
    pub fn bound(&self, t: f64, inputs: &BoundInputs) -> f64 {
        match self {
            Certificate::Doeblin(m) => {
                let (rate, pre) = doeblin_rate(m.t_star, m.alpha()).unwrap_or((0.0, 1.0));
                (2.0 * pre * (-rate * t).exp()).min(2.0)
            }
            Certificate::Harris(h) => h.bound(t, inputs),
            Certificate::Subgeometric(s) => s.curve(t, inputs.mu0_v),
        }
    }

    /// ln of the certified exponential rate, or the algebraic exponent.
    pub fn rate_summary(&self) -> (&'static str, f64) {
        match self {
            Certificate::Doeblin(m) => ("ln_rate", ln_neg_log1m(m.ln_alpha) - m.t_star.ln()),
            Certificate::Harris(h) => ("ln_rate", h.ln_rate()),
            Certificate::Subgeometric(s) => ("algebraic_exponent", s.exponent()),
        }
    }

    pub fn audit(&self) -> Vec<AuditEntry> {
        match self {
            Certificate::Doeblin(m) => {
                let mut out = m.audit.clone();
                let (rate, pre) = doeblin_rate(m.t_star, m.alpha()).unwrap_or((f64::NAN, f64::NAN));
                out.push(AuditEntry::new("alpha", m.alpha(), "minorisation mass"));
                out.push(AuditEntry::new("rate", rate, "-ln(1-alpha)/t_star"));
                out.push(AuditEntry::new("prefactor", pre, "1/(1-alpha)"));
                out
            }
            Certificate::Harris(h) => h.audit(),
            Certificate::Subgeometric(s) => {
                let mut out = s.lyapunov.audit.clone();
                out.extend([
                    AuditEntry::new("lambda", s.lyapunov.drift.lambda(), "drift rate"),
                    AuditEntry::new("K", s.lyapunov.drift.k(), "drift offset"),
                    AuditEntry::new("q", s.h.q, "drift exponent, phi(s) = 1 + s^q"),
                    AuditEntry::new("exponent", s.exponent(), "algebraic decay exponent q/(1-q)"),
                    AuditEntry::new("C", s.constant, "curve constant, not certified"),
                ]);
                out
            }
        }
    }
}

/// Options for [`assemble_certificate`].
#[derive(Clone, Debug, PartialEq)]
pub struct CertificateOptions {
    pub harris: HarrisSearch,
    pub confined: ConfinedSearch,
    pub subgeometric_constant: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            harris: HarrisSearch::default(),
            confined: ConfinedSearch::default(),
            subgeometric_constant: 1.0,
        }
    }
}

/// Minorisation plus drift assembled into a decay certificate.
pub fn assemble_certificate(
    process: &ProcessSpec,
    options: &CertificateOptions,
) -> Result<(Certificate, LyapunovSpec)> {
    let d = process.domain.dim;
    let lyap = LyapunovSpec::for_process(process)?;
    let cert = match (&process.kind, process.domain.is_torus()) {
        (ProcessKind::Bgk, true) => Certificate::Doeblin(optimize_torus_bgk(d)?),
        (ProcessKind::LinearBoltzmann(kernel), true) => {
            let table = process.kappa_table().expect("Boltzmann process has a table");
            let h = optimize_harris(
                &lyap,
                |t, level| torus_boltzmann_minorisation(kernel, table, d, t, level),
                &options.harris,
            )?;
            Certificate::Harris(h)
        }
        (_, false) if lyap.drift.is_geometric() => {
            let pot = process.domain.potential();
            let h = optimize_harris(
                &lyap,
                |t, level| {
                    let k = sublevel_support(&lyap.form, pot, level)?;
                    let mut m = doeblin_alpha_confined(process, t, k, &options.confined)?;
                    m.region = SmallSet::Sublevel { level };
                    Ok(m)
                },
                &options.harris,
            )?;
            Certificate::Harris(h)
        }
        (_, false) => Certificate::Subgeometric(SubgeometricCertificate {
            lyapunov: lyap.clone(),
            h: HPhi::new(lyap.drift.exponent())?,
            constant: options.subgeometric_constant,
        }),
    };
    Ok((cert, lyap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{particle_rng, DomainSpec};
    use crate::flow::FlowConfig;
    use crate::jump::{sample_collision, KappaTable};
    use crate::kernel::kappa_direct;
    use approx::assert_relative_eq;

    #[test]
    fn doeblin_rate_examples() {
        let (rate, pre) = doeblin_rate(1.0, 1.0 - (-1f64).exp()).unwrap();
        assert_relative_eq!(rate, 1.0, max_relative = 1e-14);
        assert_relative_eq!(pre, 1f64.exp(), max_relative = 1e-14);
        let (rate, pre) = doeblin_rate(2.0, 0.5).unwrap();
        assert_relative_eq!(rate, 2f64.ln() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(pre, 2.0, max_relative = 1e-14);
        assert!(doeblin_rate(1.0, 1.0).is_err());
        assert!(doeblin_rate(0.0, 0.5).is_err());
    }

    #[test]
    fn iterated_bound_counts_whole_steps() {
        let ln_a = 0.5f64.ln();
        assert_relative_eq!(doeblin_iterated_bound(0.9, 1.0, ln_a), 2.0);
        assert_relative_eq!(doeblin_iterated_bound(3.5, 1.0, ln_a), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn torus_bgk_alpha_matches_direct_formula() {
        for d in 1..=3 {
            let t = 3.0;
            let delta = 1.2 * torus_delta_floor(t, d);
            let c = doeblin_alpha_torus_bgk(t, d, delta).unwrap();
            let m = (2.0 * PI).powf(-0.5 * d as f64) * (-0.5 * delta * delta).exp();
            let vol = match d {
                1 => 2.0 * delta,
                2 => PI * delta * delta,
                _ => 4.0 / 3.0 * PI * delta.powi(3),
            };
            let direct = (-t).exp() / 9.0 * t.powi(2 - d as i32) * m * m * vol;
            assert_relative_eq!(c.ln_alpha, direct.ln(), max_relative = 1e-12);
        }
        assert!(matches!(
            doeblin_alpha_torus_bgk(3.0, 1, 0.5 * torus_delta_floor(3.0, 1)),
            Err(Error::ConstraintViolated(_))
        ));
    }

    #[test]
    fn optimized_torus_bgk_beats_grid_neighbours() {
        let c = optimize_torus_bgk(1).unwrap();
        let ln_rate = |t: f64| {
            let m = doeblin_alpha_torus_bgk(t, 1, TORUS_MARGIN * torus_delta_floor(t, 1)).unwrap();
            ln_neg_log1m(m.ln_alpha) - t.ln()
        };
        let best = ln_rate(c.t_star);
        for f in [0.8, 0.95, 1.05, 1.25] {
            assert!(ln_rate(c.t_star * f) <= best + 1e-9);
        }
        assert!(c.alpha() > 0.0 && c.alpha() < 1.0);
    }

    #[test]
    fn harris_alpha_bar_example() {
        // γ = 0.25, Rγ = 2.5: max{0.75, (2 + 2.5·0.8)/4.5} = 8/9.
        let ab = harris_alpha_bar(0.5, 0.5, 1.0, 10.0, 0.25, 0.8).unwrap();
        assert_relative_eq!(ab, 8.0 / 9.0, max_relative = 1e-14);
        // First branch active when β − β₀ is the smaller gap.
        let ab = harris_alpha_bar(0.05, 0.5, 1.0, 10.0, 0.04, 0.8).unwrap();
        assert_relative_eq!(ab, 0.99, max_relative = 1e-14);
    }

    #[test]
    fn harris_preconditions_name_the_inequality() {
        let msg = |r: Result<f64>| match r {
            Err(Error::PreconditionViolated(m)) => m,
            other => panic!("expected precondition error, got {other:?}"),
        };
        assert!(msg(harris_alpha_bar(0.5, 0.5, 1.0, 3.0, 0.25, 0.8)).contains("R > 2D/(1 − α_D)"));
        assert!(msg(harris_alpha_bar(0.5, 0.5, 1.0, 10.0, 0.6, 0.8)).contains("β₀ ∈ (0, β)"));
        assert!(msg(harris_alpha_bar(0.5, 0.5, 1.0, 10.0, 0.25, 0.6)).contains("α₀ ∈ (α_D + 2D/R, 1)"));
    }

    #[test]
    fn harris_gap_survives_underflow() {
        let ln_gap = harris_ln_gap(-5000.0, 0.5, 1.0, 10.0, 0.5, 0.8).unwrap();
        // γR/(2 + γR) ≈ γR/2 when γ underflows.
        let expect = -5000.0 + 0.5f64.ln() + 10f64.ln() + 0.2f64.ln() - 2f64.ln();
        assert_relative_eq!(ln_gap, expect, max_relative = 1e-12);
    }

    #[test]
    fn h_phi_round_trip_and_closed_form() {
        let h = HPhi::new(0.5).unwrap();
        for &u in &[1.5f64, 10.0, 1e3, 1e6, 1e9] {
            let closed = 2.0 * (u.sqrt() - 1.0) - 2.0 * ((1.0 + u.sqrt()) / 2.0).ln();
            assert_relative_eq!(h.h(u), closed, max_relative = 1e-10);
        }
        for q in [0.25, 0.5, 1.0 / 3.0, 0.75] {
            let h = HPhi::new(q).unwrap();
            for &t in &[0.1, 1.0, 50.0, 1e4, 1e6] {
                let u = h.inverse(t);
                assert!((h.h(u) - t).abs() <= 1e-9 * t.max(1.0), "q = {q}, t = {t}");
            }
        }
    }

    #[test]
    fn subgeometric_curve_slope() {
        let lyap = LyapunovSpec::for_process(&ProcessSpec::bgk(
            DomainSpec::whole_space(1, Potential::subquadratic(1.0, 0.5)),
            FlowConfig::default(),
        ))
        .unwrap();
        let cert = SubgeometricCertificate {
            h: HPhi::new(lyap.drift.exponent()).unwrap(),
            lyapunov: lyap,
            constant: 1.0,
        };
        let t = 1e6;
        let slope = (cert.curve(t * 1.01, 3.0).ln() - cert.curve(t / 1.01, 3.0).ln()) / (1.01f64.ln() * 2.0);
        assert_relative_eq!(slope, -cert.exponent(), max_relative = 0.02);
    }

    fn carleman_mc(d: usize, gamma: f64, w: Vector, v0: Vector, radius: f64, n: usize) -> (f64, f64) {
        let kernel = CollisionKernelSpec::hard_spheres(gamma, d);
        let kappa = kappa_direct(&kernel, w.norm(), d).unwrap();
        let mut rng = particle_rng(11, d as u64);
        let mut hits = 0usize;
        for _ in 0..n {
            let (vp, _, _) = sample_collision(&w, &kernel, &mut rng).unwrap();
            if (vp - v0).norm() < radius {
                hits += 1;
            }
        }
        let vol = numerics::ball_volume(d, radius);
        let p = hits as f64 / n as f64;
        (kappa * p / vol, kappa * (p * (1.0 - p) / n as f64).sqrt() / vol)
    }

    #[test]
    fn carleman_kernel_matches_collision_histogram() {
        let cases = [
            (2, 0.0, [0.5, 0.0, 0.0], [-0.4, 0.6, 0.0]),
            (2, 1.0, [1.0, 0.0, 0.0], [0.2, -0.8, 0.0]),
            (3, 1.0, [0.8, 0.0, 0.0], [-0.3, 0.5, 0.2]),
        ];
        for (d, gamma, w, v) in cases {
            let w = Vector::from_slice(&w[..d]);
            let v = Vector::from_slice(&v[..d]);
            let kernel = CollisionKernelSpec::hard_spheres(gamma, d);
            // Average the kernel over the ball to compare with the histogram cell.
            let radius = 0.15;
            let mut avg = 0.0;
            let m = 64;
            for i in 0..m {
                let u = numerics::halton(i as u64 + 1, d);
                avg += carleman_kernel(&kernel, &w, &(v + numerics::cube_to_ball(&u[..d], d, radius))).unwrap();
            }
            avg /= m as f64;
            let (mc, se) = carleman_mc(d, gamma, w, v, radius, 400_000);
            assert!(
                (mc - avg).abs() < 4.0 * se + 0.03 * avg,
                "d = {d}, γ = {gamma}: kernel {avg}, histogram {mc} ± {se}"
            );
        }
    }

    #[test]
    fn carleman_lower_bound_is_below_kernel_samples() {
        let kernel = CollisionKernelSpec::hard_spheres(1.0, 2);
        let lb = carleman_lower_bound(1.5, 1.0, &kernel, 2).unwrap();
        assert!(lb > 0.0);
        for i in 1..200u64 {
            let u = numerics::halton(i, 4);
            let w = numerics::cube_to_ball(&u[..2], 2, 1.5);
            let v = numerics::cube_to_ball(&u[2..4], 2, 1.0);
            if (v - w).norm() > 1e-3 {
                assert!(carleman_kernel(&kernel, &w, &v).unwrap() >= lb);
            }
        }
        let k1 = CollisionKernelSpec::hard_spheres(1.0, 1);
        assert_eq!(carleman_lower_bound(1.0, 1.0, &k1, 1).unwrap(), 0.0);
    }

    #[test]
    fn torus_boltzmann_minorisation_is_positive() {
        let kernel = CollisionKernelSpec::hard_spheres(0.0, 2);
        let table = KappaTable::new(&kernel, 2).unwrap();
        let m = torus_boltzmann_minorisation(&kernel, &table, 2, 4.0, 9.0).unwrap();
        assert!(m.ln_alpha.is_finite() && m.ln_alpha < 0.0);
        assert_eq!(m.region, SmallSet::Sublevel { level: 9.0 });
    }

    #[test]
    fn sublevel_support_contains_level_set() {
        let dom = DomainSpec::whole_space(1, Potential::quadratic(1.0));
        let form = LyapunovForm::bgk_modified();
        let level = 6.0;
        let k = sublevel_support(&form, dom.potential(), level).unwrap();
        for i in 0..400 {
            for j in 0..400 {
                let x = -3.0 * k + 6.0 * k * i as f64 / 399.0;
                let v = -3.0 * k + 6.0 * k * j as f64 / 399.0;
                let z = crate::domain::PhasePoint::new(Vector::from_slice(&[x]), Vector::from_slice(&[v]));
                if form.value(&dom, &z) <= level {
                    assert!(x.abs() <= k && v.abs() <= k, "({x}, {v}) outside K = {k}");
                }
            }
        }
    }

    #[test]
    fn confined_bgk_pipeline() {
        let process = ProcessSpec::bgk(
            DomainSpec::whole_space(1, Potential::quadratic(1.0)),
            FlowConfig::default(),
        );
        let m = doeblin_alpha_confined(&process, 1.0, 2.0, &ConfinedSearch::default()).unwrap();
        assert!(m.ln_alpha.is_finite() && m.ln_alpha < 0.0);
        let names: Vec<&str> = m.audit.iter().map(|e| e.name.as_str()).collect();
        for n in ["R", "t1", "a", "b", "alpha_T", "epsilon", "ln_alpha"] {
            assert!(names.contains(&n), "missing {n}");
        }
        let options = CertificateOptions {
            harris: HarrisSearch {
                t_star: vec![1.0, 4.0],
                level_factor: vec![1.5, 4.0],
                ..HarrisSearch::default()
            },
            ..CertificateOptions::default()
        };
        let (cert, _) = assemble_certificate(&process, &options).unwrap();
        let Certificate::Harris(h) = &cert else {
            panic!("confined BGK should give a Harris certificate");
        };
        assert!(h.ln_rate().is_finite());
        assert!(h.ln_gap < 0.0 && h.ln_alpha_bar() <= 0.0);
        let inputs = BoundInputs {
            mu0_v: 5.0,
            mu_star_v: 2.125,
            mu_star_w: 3.0,
            weight_constant: 16.0,
        };
        assert!(cert.bound(0.0, &inputs) >= cert.bound(100.0, &inputs));
    }
}
