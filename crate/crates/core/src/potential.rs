//! Radially symmetric confining potentials Φ(x) = φ(|x|) with analytic
//! derivative bounds and drift parameters.

use crate::numerics::{self, ball_coords, cube_to_ball, halton};
use crate::vector::{Matrix, Vector};
use std::fmt;
use std::sync::Arc;

/// Radial profile data at one radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radial {
    pub value: f64,
    /// φ'(r).
    pub d1: f64,
    /// φ'(r)/r, finite at r = 0.
    pub d1_over_r: f64,
    /// φ''(r).
    pub d2: f64,
}

/// Constants in x·∇Φ(x) ≥ γ₁|x|^p + γ₂Φ(x) − A.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub a: f64,
    pub p: f64,
}

impl DriftParams {
    /// Equivalent constants for x·∇Φ ≥ γ₁'⟨x⟩^p + γ₂Φ − A', using
    /// ⟨x⟩^p ≤ c_p(1 + |x|^p) with c_p = max(1, 2^{p/2−1}).
    pub fn bracket_form(&self) -> DriftParams {
        let cp = 1f64.max(2f64.powf(0.5 * self.p - 1.0));
        DriftParams {
            gamma1: self.gamma1 / cp,
            gamma2: self.gamma2,
            a: self.a + self.gamma1,
            p: self.p,
        }
    }

    /// Constants for a smaller exponent q ≤ p, using |x|^p ≥ |x|^q − 1.
    pub fn lowered_to(&self, q: f64) -> DriftParams {
        assert!(q <= self.p);
        if q == self.p {
            return *self;
        }
        DriftParams {
            a: self.a + self.gamma1,
            p: q,
            ..*self
        }
    }

    /// x·∇Φ − (γ₁|x|^p + γ₂Φ − A); nonnegative where the inequality holds.
    pub fn residual(&self, potential: &Potential, x: &Vector) -> f64 {
        let g = potential.gradient(x);
        x.dot(&g) - (self.gamma1 * x.norm().powf(self.p) + self.gamma2 * potential.value(x) - self.a)
    }
}

/// Upper growth Φ(x) ≤ γ₃⟨x⟩^e.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpperGrowth {
    pub gamma3: f64,
    pub exponent: f64,
}

/// Lower bound φ(r) ≥ κ r^p − m used as a rejection envelope for e^{−Φ}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialEnvelope {
    pub kappa: f64,
    pub p: f64,
    pub m: f64,
}

/// A nondecreasing radial profile φ on [0, ∞).
pub trait RadialProfile: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn eval(&self, r: f64) -> Radial;

    fn lower_bound(&self) -> f64;

    fn drift_params(&self) -> Option<DriftParams>;

    /// max_{|x|≤R} |∇Φ|; the default scans the profile and pads by 5%.
    fn grad_sup_bound(&self, r: f64) -> f64 {
        scan_sup(r, |s| self.eval(s).d1.abs())
    }

    /// max_{|x|≤R} ‖D²Φ‖; the default scans the profile and pads by 5%.
    fn hess_sup_bound(&self, r: f64) -> f64 {
        scan_sup(r, |s| {
            let e = self.eval(s);
            e.d2.abs().max(e.d1_over_r.abs())
        })
    }

    fn upper_growth(&self) -> Option<UpperGrowth> {
        None
    }

    fn envelope(&self) -> Option<RadialEnvelope> {
        None
    }

    /// True only when ∇Φ ≡ 0.
    fn is_flat(&self) -> bool {
        false
    }
}

fn scan_sup<F: Fn(f64) -> f64>(r: f64, f: F) -> f64 {
    let n = 2000;
    let mut m: f64 = 0.0;
    for i in 0..=n {
        m = m.max(f(r * i as f64 / n as f64));
    }
    1.05 * m
}

/// Φ ≡ 0.
#[derive(Debug, Clone, Copy)]
pub struct Flat;

impl RadialProfile for Flat {
    fn name(&self) -> String {
        "zero".into()
    }
    fn eval(&self, _r: f64) -> Radial {
        Radial {
            value: 0.0,
            d1: 0.0,
            d1_over_r: 0.0,
            d2: 0.0,
        }
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn drift_params(&self) -> Option<DriftParams> {
        None
    }
    fn grad_sup_bound(&self, _r: f64) -> f64 {
        0.0
    }
    fn hess_sup_bound(&self, _r: f64) -> f64 {
        0.0
    }
    fn is_flat(&self) -> bool {
        true
    }
}

/// Φ = c|x|²/2.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub c: f64,
}

impl RadialProfile for Quadratic {
    fn name(&self) -> String {
        format!("quadratic(c={})", self.c)
    }
    fn eval(&self, r: f64) -> Radial {
        Radial {
            value: 0.5 * self.c * r * r,
            d1: self.c * r,
            d1_over_r: self.c,
            d2: self.c,
        }
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn drift_params(&self) -> Option<DriftParams> {
        // x·∇Φ = c|x|² = (c/2)|x|² + Φ.
        Some(DriftParams {
            gamma1: 0.5 * self.c,
            gamma2: 1.0,
            a: 0.0,
            p: 2.0,
        })
    }
    fn grad_sup_bound(&self, r: f64) -> f64 {
        self.c * r
    }
    fn hess_sup_bound(&self, _r: f64) -> f64 {
        self.c
    }
    fn upper_growth(&self) -> Option<UpperGrowth> {
        Some(UpperGrowth {
            gamma3: 0.5 * self.c,
            exponent: 2.0,
        })
    }
    fn envelope(&self) -> Option<RadialEnvelope> {
        Some(RadialEnvelope {
            kappa: 0.5 * self.c,
            p: 2.0,
            m: 0.0,
        })
    }
}

/// Φ = c|x|⁴/4.
#[derive(Debug, Clone, Copy)]
pub struct Quartic {
    pub c: f64,
}

impl RadialProfile for Quartic {
    fn name(&self) -> String {
        format!("quartic(c={})", self.c)
    }
    fn eval(&self, r: f64) -> Radial {
        let r2 = r * r;
        Radial {
            value: 0.25 * self.c * r2 * r2,
            d1: self.c * r2 * r,
            d1_over_r: self.c * r2,
            d2: 3.0 * self.c * r2,
        }
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn drift_params(&self) -> Option<DriftParams> {
        // x·∇Φ = c|x|⁴ = (c/2)|x|⁴ + 2Φ.
        Some(DriftParams {
            gamma1: 0.5 * self.c,
            gamma2: 2.0,
            a: 0.0,
            p: 4.0,
        })
    }
    fn grad_sup_bound(&self, r: f64) -> f64 {
        self.c * r.powi(3)
    }
    fn hess_sup_bound(&self, r: f64) -> f64 {
        3.0 * self.c * r * r
    }
    fn upper_growth(&self) -> Option<UpperGrowth> {
        Some(UpperGrowth {
            gamma3: 0.25 * self.c,
            exponent: 4.0,
        })
    }
    fn envelope(&self) -> Option<RadialEnvelope> {
        Some(RadialEnvelope {
            kappa: 0.25 * self.c,
            p: 4.0,
            m: 0.0,
        })
    }
}

/// Φ = c⟨x⟩^k with k ∈ (0, 2], covering c⟨x⟩^{2β} and c⟨x⟩^{1+δ}.
#[derive(Debug, Clone, Copy)]
pub struct BracketPower {
    pub c: f64,
    pub k: f64,
}

impl RadialProfile for BracketPower {
    fn name(&self) -> String {
        format!("bracket-power(c={}, k={})", self.c, self.k)
    }
    fn eval(&self, r: f64) -> Radial {
        let b2 = 1.0 + r * r;
        let bk2 = b2.powf(0.5 * self.k - 1.0);
        let d1_over_r = self.k * self.c * bk2;
        Radial {
            value: self.c * bk2 * b2,
            d1: d1_over_r * r,
            d1_over_r,
            d2: d1_over_r * (1.0 + (self.k - 1.0) * r * r) / b2,
        }
    }
    fn lower_bound(&self) -> f64 {
        self.c
    }
    fn drift_params(&self) -> Option<DriftParams> {
        // x·∇Φ = kc(⟨x⟩^k − ⟨x⟩^{k−2}) ≥ (k/2)c⟨x⟩^k + (k/2)Φ − kc.
        let h = 0.5 * self.k;
        Some(DriftParams {
            gamma1: h * self.c,
            gamma2: h,
            a: self.k * self.c,
            p: self.k,
        })
    }
    fn grad_sup_bound(&self, r: f64) -> f64 {
        // φ' increases up to r* = (1−k)^{−1/2} when k < 1, then decreases.
        let r_eff = if self.k < 1.0 {
            r.min(1.0 / (1.0 - self.k).sqrt())
        } else {
            r
        };
        self.eval(r_eff).d1
    }
    fn hess_sup_bound(&self, _r: f64) -> f64 {
        self.k * self.c
    }
    fn upper_growth(&self) -> Option<UpperGrowth> {
        Some(UpperGrowth {
            gamma3: self.c,
            exponent: self.k,
        })
    }
    fn envelope(&self) -> Option<RadialEnvelope> {
        Some(RadialEnvelope {
            kappa: self.c,
            p: self.k,
            m: 0.0,
        })
    }
}

/// A profile whose drift constants are declared by the user instead of derived.
#[derive(Debug)]
struct Declared {
    inner: Arc<dyn RadialProfile>,
    drift: DriftParams,
}

impl RadialProfile for Declared {
    fn name(&self) -> String {
        self.inner.name()
    }
    fn eval(&self, r: f64) -> Radial {
        self.inner.eval(r)
    }
    fn lower_bound(&self) -> f64 {
        self.inner.lower_bound()
    }
    fn drift_params(&self) -> Option<DriftParams> {
        Some(self.drift)
    }
    fn grad_sup_bound(&self, r: f64) -> f64 {
        self.inner.grad_sup_bound(r)
    }
    fn hess_sup_bound(&self, r: f64) -> f64 {
        self.inner.hess_sup_bound(r)
    }
    fn upper_growth(&self) -> Option<UpperGrowth> {
        self.inner.upper_growth()
    }
    fn envelope(&self) -> Option<RadialEnvelope> {
        self.inner.envelope()
    }
    fn is_flat(&self) -> bool {
        self.inner.is_flat()
    }
}

/// A shareable radial potential.
#[derive(Clone, Debug)]
pub struct Potential(Arc<dyn RadialProfile>);

impl Potential {
    pub fn from_profile(profile: Arc<dyn RadialProfile>) -> Self {
        Potential(profile)
    }

    pub fn zero() -> Self {
        Potential(Arc::new(Flat))
    }

    /// c|x|²/2.
    pub fn quadratic(c: f64) -> Self {
        Potential(Arc::new(Quadratic { c }))
    }

    /// c|x|⁴/4.
    pub fn quartic(c: f64) -> Self {
        Potential(Arc::new(Quartic { c }))
    }

    /// c⟨x⟩^{2β}, β ∈ (0, 1).
    pub fn subquadratic(c: f64, beta: f64) -> Self {
        Potential(Arc::new(BracketPower { c, k: 2.0 * beta }))
    }

    /// c⟨x⟩^{1+δ}, δ ∈ (0, 1].
    pub fn superlinear(c: f64, delta: f64) -> Self {
        Potential(Arc::new(BracketPower { c, k: 1.0 + delta }))
    }

    /// c⟨x⟩^k, k > 0.
    pub fn bracket_power(c: f64, k: f64) -> Self {
        Potential(Arc::new(BracketPower { c, k }))
    }

    /// The same potential with user-declared drift constants; they are
    /// trusted downstream, so check them with [`check_drift`].
    pub fn with_declared_drift(&self, drift: DriftParams) -> Self {
        Potential(Arc::new(Declared {
            inner: self.0.clone(),
            drift,
        }))
    }

    pub fn profile(&self) -> &dyn RadialProfile {
        self.0.as_ref()
    }

    pub fn name(&self) -> String {
        self.0.name()
    }

    #[inline]
    pub fn radial(&self, r: f64) -> Radial {
        self.0.eval(r)
    }

    #[inline]
    pub fn value(&self, x: &Vector) -> f64 {
        self.0.eval(x.norm()).value
    }

    #[inline]
    pub fn gradient(&self, x: &Vector) -> Vector {
        let e = self.0.eval(x.norm());
        x.scale(e.d1_over_r)
    }

    /// D²Φ = φ'' x̂x̂ᵀ + (φ'/r)(I − x̂x̂ᵀ).
    pub fn hessian(&self, x: &Vector) -> Matrix {
        let r = x.norm();
        let e = self.0.eval(r);
        if r == 0.0 {
            return Matrix::iso_plus_rank_one(e.d2, 0.0, x);
        }
        let u = x.scale(1.0 / r);
        Matrix::iso_plus_rank_one(e.d1_over_r, e.d2 - e.d1_over_r, &u)
    }

    /// Operator norm of D²Φ(x).
    pub fn hessian_norm(&self, x: &Vector) -> f64 {
        let e = self.0.eval(x.norm());
        e.d2.abs().max(e.d1_over_r.abs())
    }

    pub fn grad_sup_bound(&self, r: f64) -> f64 {
        self.0.grad_sup_bound(r)
    }

    /// True when ∇Φ ≡ 0, so the flow is free transport.
    pub fn is_flat(&self) -> bool {
        self.0.is_flat()
    }

    pub fn hess_sup_bound(&self, r: f64) -> f64 {
        self.0.hess_sup_bound(r)
    }

    pub fn lower_bound(&self) -> f64 {
        self.0.lower_bound()
    }

    pub fn drift_params(&self) -> Option<DriftParams> {
        self.0.drift_params()
    }

    pub fn upper_growth(&self) -> Option<UpperGrowth> {
        self.0.upper_growth()
    }

    pub fn envelope(&self) -> Option<RadialEnvelope> {
        self.0.envelope()
    }

    /// sup{|x| : Φ(x) ≤ h}; infinite for non-confining profiles.
    pub fn sublevel_radius(&self, h: f64) -> f64 {
        if h < self.radial(0.0).value {
            return 0.0;
        }
        numerics::monotone_level_crossing(|r| self.radial(r).value, h, 1e12)
    }

    /// max over |x| ≤ r of Φ for the nondecreasing profile.
    pub fn sup_on_ball(&self, r: f64) -> f64 {
        self.radial(r).value
    }
}

/// Outcome of sampling a drift inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftCheck {
    pub points: usize,
    pub violations: usize,
    pub worst_residual: f64,
    pub worst_x: Vector,
}

impl DriftCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Evaluates the drift inequality at `n` quasi-random points of the ball
/// {|x| ≤ radius} in R^d; a residual below −`tol` counts as a violation.
pub fn check_drift(
    potential: &Potential,
    params: &DriftParams,
    d: usize,
    radius: f64,
    n: usize,
    tol: f64,
) -> DriftCheck {
    let k = ball_coords(d);
    let mut out = DriftCheck {
        points: n,
        violations: 0,
        worst_residual: f64::INFINITY,
        worst_x: Vector::zeros(d),
    };
    for i in 0..n {
        let u = halton(i as u64, k);
        let x = cube_to_ball(&u[..k], d, radius);
        let res = params.residual(potential, &x);
        let scale = 1.0 + x.dot(&potential.gradient(&x)).abs() + params.a;
        if res < -tol * scale {
            out.violations += 1;
        }
        if res < out.worst_residual {
            out.worst_residual = res;
            out.worst_x = x;
        }
    }
    out
}
