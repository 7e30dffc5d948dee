//! The characteristic flow ẋ = v, v̇ = −∇Φ(x): velocity Verlet integration,
//! confinement horizons, the shooting fixed point and transport
//! minorisation constants.

use crate::domain::{wrap_torus, DomainSpec, Geometry, PhasePoint};
use crate::error::{Error, Result};
use crate::numerics::{self, ball_coords, cube_to_ball, halton};
use crate::potential::Potential;
use crate::vector::{Matrix, Vector};

/// Step control for the whole-space flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub dt: f64,
    /// Accepted relative energy drift |ΔH| ≤ tol_energy·(1 + |H|) per call.
    pub tol_energy: f64,
    /// Number of dt halvings before giving up.
    pub max_halvings: u32,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: 1e-2,
            tol_energy: 1e-3,
            max_halvings: 20,
        }
    }
}

impl FlowConfig {
    pub fn with_dt(dt: f64) -> Self {
        FlowConfig {
            dt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("flow dt = {} must be > 0", self.dt)));
        }
        if !(self.tol_energy > 0.0) {
            return Err(Error::Config(format!(
                "flow tol_energy = {} must be > 0",
                self.tol_energy
            )));
        }
        Ok(())
    }
}

/// Velocity Verlet with a fixed step; negative `t` runs the scheme with a
/// negative step, which inverts the forward map.
pub fn verlet(potential: &Potential, z: &PhasePoint, t: f64, dt: f64) -> PhasePoint {
    if potential.is_flat() {
        return PhasePoint {
            x: z.x.axpy(t, &z.v),
            v: z.v,
        };
    }
    let mut x = z.x;
    let mut v = z.v;
    let span = t.abs();
    let n = (span / dt).floor() as u64;
    let rem = span - n as f64 * dt;
    let sign = t.signum();
    let mut g = potential.gradient(&x);
    let step = |h: f64, x: &mut Vector, v: &mut Vector, g: &mut Vector| {
        let vh = v.axpy(-0.5 * h, g);
        *x = x.axpy(h, &vh);
        *g = potential.gradient(x);
        *v = vh.axpy(-0.5 * h, g);
    };
    for _ in 0..n {
        step(sign * dt, &mut x, &mut v, &mut g);
    }
    if rem > 1e-15 * span.max(1.0) {
        step(sign * rem, &mut x, &mut v, &mut g);
    }
    PhasePoint { x, v }
}

/// Whole-space flow with energy-monitored step halving.
pub fn flow_in_potential(potential: &Potential, z: &PhasePoint, t: f64, cfg: &FlowConfig) -> Result<PhasePoint> {
    let h0 = 0.5 * z.v.norm_sq() + potential.value(&z.x);
    let mut dt = cfg.dt;
    for _ in 0..=cfg.max_halvings {
        let out = verlet(potential, z, t, dt);
        let h1 = 0.5 * out.v.norm_sq() + potential.value(&out.x);
        if (h1 - h0).abs() <= cfg.tol_energy * (1.0 + h0.abs()) && out.x.is_finite() {
            return Ok(out);
        }
        dt *= 0.5;
    }
    Err(Error::StepUnderflow { dt_min: 2.0 * dt })
}

/// The flow on either geometry; torus flight is exact straight-line
/// transport followed by wrapping.
pub fn flow(domain: &DomainSpec, z: &PhasePoint, t: f64, cfg: &FlowConfig) -> Result<PhasePoint> {
    match &domain.geometry {
        Geometry::Torus => Ok(PhasePoint {
            x: wrap_torus(&z.x.axpy(t, &z.v)),
            v: z.v,
        }),
        Geometry::WholeSpace(p) => flow_in_potential(p, z, t, cfg),
    }
}

/// Verlet flow together with ∂X_t/∂v₀, from the exact tangent map of the
/// discrete scheme (a second-order discretization of the variational ODE).
pub fn flow_with_velocity_jacobian(potential: &Potential, z: &PhasePoint, t: f64, dt: f64) -> (PhasePoint, Matrix) {
    let d = z.dim();
    let n = (t.abs() / dt).ceil().max(1.0) as u64;
    let h = t / n as f64;
    let mut x = z.x;
    let mut v = z.v;
    let mut jx = Matrix::zeros(d);
    let mut jv = Matrix::identity(d);
    let mut g = potential.gradient(&x);
    let mut hess = potential.hessian(&x);
    for _ in 0..n {
        let vh = v.axpy(-0.5 * h, &g);
        let jvh = jv.axpy(-0.5 * h, &hess.mul_mat(&jx));
        x = x.axpy(h, &vh);
        jx = jx.axpy(h, &jvh);
        g = potential.gradient(&x);
        hess = potential.hessian(&x);
        v = vh.axpy(-0.5 * h, &g);
        jv = jvh.axpy(-0.5 * h, &hess.mul_mat(&jx));
    }
    (PhasePoint { x, v }, jx)
}

/// A time T with |X_t(x₀, v₀)| ≤ λR for |t| ≤ T whenever |x₀| ≤ R:
/// T = min{(λ−1)R/(2|v₀|), √((λ−1)R)/√(2C_{λR})}.
pub fn existence_horizon(v0: &Vector, lambda: f64, r: f64, potential: &Potential) -> f64 {
    let speed = v0.norm();
    let first = if speed > 0.0 {
        (lambda - 1.0) * r / (2.0 * speed)
    } else {
        f64::INFINITY
    };
    let c = potential.grad_sup_bound(lambda * r);
    let second = if c > 0.0 {
        ((lambda - 1.0) * r).sqrt() / (2.0 * c).sqrt()
    } else {
        f64::INFINITY
    };
    first.min(second)
}

/// Largest t₁ with C t₁² e^{C t₁²} ≤ 1/4, t₁ ≤ √R/√(2C_{2R}) and
/// t₁ ≤ 2√R/√C_{9R}, where C = sup_{|x|≤9R} ‖D²Φ‖.
pub fn shooting_time_bound(r: f64, potential: &Potential) -> f64 {
    let c = potential.hess_sup_bound(9.0 * r);
    let first = if c > 0.0 {
        // w e^w = 1/4 has its root in (0, 1/4).
        let w = numerics::bisect(|w| w * w.exp() - 0.25, 0.0, 0.25).expect("bracketed");
        (w / c).sqrt()
    } else {
        f64::INFINITY
    };
    let c2 = potential.grad_sup_bound(2.0 * r);
    let second = if c2 > 0.0 {
        r.sqrt() / (2.0 * c2).sqrt()
    } else {
        f64::INFINITY
    };
    let c9 = potential.grad_sup_bound(9.0 * r);
    let third = if c9 > 0.0 {
        2.0 * r.sqrt() / c9.sqrt()
    } else {
        f64::INFINITY
    };
    first.min(second).min(third)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootingResult {
    /// v₀ with X_t(x₀, v₀/t) = x₁.
    pub v0: Vector,
    pub iterations: usize,
    pub residual: f64,
    /// Largest observed |v^{k+1} − v^k| / |v^k − v^{k−1}|.
    pub max_contraction_ratio: f64,
}

/// Iteration cap of [`shoot`].
pub const SHOOTING_MAX_ITERATIONS: usize = 50;
/// Ratio of successive increments above which shooting is abandoned.
pub const SHOOTING_RATIO_LIMIT: f64 = 0.5;

/// Fixed-point iteration of A_t(v) = v − (X_t(x₀, v/t) − x₁) from v⁰ = x₁ − x₀.
pub fn shoot(
    x0: &Vector,
    x1: &Vector,
    t: f64,
    potential: &Potential,
    tol: f64,
    cfg: &FlowConfig,
) -> Result<ShootingResult> {
    if !(t > 0.0) {
        return Err(Error::PreconditionViolated(format!("shooting time {t} must be > 0")));
    }
    let mut v = *x1 - *x0;
    let mut prev_step: Option<f64> = None;
    let mut max_ratio: f64 = 0.0;
    let mut residual = f64::INFINITY;
    for k in 1..=SHOOTING_MAX_ITERATIONS {
        let start = PhasePoint::new(*x0, v.scale(1.0 / t));
        let end = flow_in_potential(potential, &start, t, cfg)?;
        let miss = end.x - *x1;
        residual = miss.norm();
        if residual <= tol {
            return Ok(ShootingResult {
                v0: v,
                iterations: k,
                residual,
                max_contraction_ratio: max_ratio,
            });
        }
        let step = residual;
        if let Some(p) = prev_step {
            // Ratios of increments at round-off level carry no information.
            if p > 1e-11 * (1.0 + v.norm()) {
                let ratio = step / p;
                max_ratio = max_ratio.max(ratio);
                if ratio > SHOOTING_RATIO_LIMIT {
                    return Err(Error::NoContraction { ratio });
                }
            }
        }
        prev_step = Some(step);
        v -= miss;
    }
    Err(Error::MaxIterations {
        iterations: SHOOTING_MAX_ITERATIONS,
        residual,
    })
}

/// Constants of the transport minorisation on {|x| ≤ R} at time s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportConstants {
    pub r: f64,
    /// Flight-time window [s, s_max].
    pub s: f64,
    pub s_max: f64,
    /// R₂ = 4R/s.
    pub r2: f64,
    /// E₀ = sup{H(x, v) : |x| ≤ R, |v| ≤ R₂}.
    pub e0: f64,
    /// R′ = 1.01·√(2(E₀ − inf Φ)), a speed bound on the energy set.
    pub r_prime: f64,
    /// Padded sup of |det ∂X_s/∂v|.
    pub m: f64,
    /// α_T = 1/M.
    pub alpha_t: f64,
}

/// Quasi-random net size and integration step for the Jacobian supremum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportNet {
    pub points: usize,
    pub dt: f64,
    pub pad: f64,
}

impl Default for TransportNet {
    fn default() -> Self {
        TransportNet {
            points: 2048,
            dt: 1e-3,
            pad: 1.05,
        }
    }
}

pub fn transport_minorisation_constants(
    r: f64,
    s: f64,
    potential: &Potential,
    d: usize,
    net: &TransportNet,
) -> Result<TransportConstants> {
    transport_window_constants(r, s, s, potential, d, net)
}

/// Constants valid uniformly for flight times s ∈ [a, b]: R₂ = 4R/a and M is
/// the padded sup of |det ∂X_s/∂v| over the net at five times in the window.
pub fn transport_window_constants(
    r: f64,
    a: f64,
    b: f64,
    potential: &Potential,
    d: usize,
    net: &TransportNet,
) -> Result<TransportConstants> {
    if !(r > 0.0 && a > 0.0 && b >= a) {
        return Err(Error::PreconditionViolated(format!(
            "transport constants need R > 0 and 0 < a ≤ b (R = {r}, a = {a}, b = {b})"
        )));
    }
    let r2 = 4.0 * r / a;
    let e0 = 0.5 * r2 * r2 + potential.sup_on_ball(r);
    let r_prime = 1.01 * (2.0 * (e0 - potential.lower_bound())).sqrt();
    let kc = ball_coords(d);
    let times: Vec<f64> = if b > a {
        (0..5).map(|k| a + (b - a) * k as f64 / 4.0).collect()
    } else {
        vec![a]
    };
    let sup = {
        use rayon::prelude::*;
        (0..net.points)
            .into_par_iter()
            .map(|i| {
                let u = halton(i as u64, 2 * kc);
                let x = cube_to_ball(&u[..kc], d, r);
                let v = cube_to_ball(&u[kc..2 * kc], d, r2);
                times
                    .iter()
                    .map(|&s| {
                        let dt = net.dt.min(s / 50.0);
                        let (_, j) = flow_with_velocity_jacobian(potential, &PhasePoint::new(x, v), s, dt);
                        j.determinant().abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    };
    let m = net.pad * sup;
    Ok(TransportConstants {
        r,
        s: a,
        s_max: b,
        r2,
        e0,
        r_prime,
        m,
        alpha_t: 1.0 / m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pp(x: f64, v: f64) -> PhasePoint {
        PhasePoint::new(Vector::from_slice(&[x]), Vector::from_slice(&[v]))
    }

    #[test]
    fn free_transport_is_exact() {
        let out = flow_in_potential(&Potential::zero(), &pp(0.0, 1.0), 2.0, &FlowConfig::default()).unwrap();
        assert_eq!(out.x[0], 2.0);
        assert_eq!(out.v[0], 1.0);
    }

    #[test]
    fn harmonic_quarter_period() {
        let dt = 1e-3;
        let out = verlet(
            &Potential::quadratic(1.0),
            &pp(1.0, 0.0),
            std::f64::consts::FRAC_PI_2,
            dt,
        );
        assert!(out.x[0].abs() < dt * dt);
        assert!((out.v[0] + 1.0).abs() < dt * dt);
    }

    #[test]
    fn reversibility() {
        let p = Potential::quartic(1.0);
        let z = PhasePoint::new(Vector::from_slice(&[0.3, -0.2]), Vector::from_slice(&[1.0, 0.5]));
        let dt = 1e-3;
        let fwd = verlet(&p, &z, 1.7, dt);
        let back = verlet(&p, &fwd, -1.7, dt);
        for i in 0..2 {
            assert!((back.x[i] - z.x[i]).abs() < 10.0 * dt * dt);
            assert!((back.v[i] - z.v[i]).abs() < 10.0 * dt * dt);
        }
    }

    #[test]
    fn energy_control_refines_coarse_steps() {
        let p = Potential::quartic(1.0);
        let cfg = FlowConfig {
            dt: 0.5,
            tol_energy: 1e-6,
            max_halvings: 20,
        };
        let z = pp(1.5, 0.0);
        let out = flow_in_potential(&p, &z, 3.0, &cfg).unwrap();
        let h0 = p.value(&z.x);
        let h1 = 0.5 * out.v.norm_sq() + p.value(&out.x);
        assert!((h1 - h0).abs() <= 1e-6 * (1.0 + h0));
        let cfg_tight = FlowConfig { max_halvings: 0, ..cfg };
        assert!(matches!(
            flow_in_potential(&p, &z, 3.0, &cfg_tight),
            Err(Error::StepUnderflow { .. })
        ));
    }

    #[test]
    fn horizon_examples() {
        let v1 = Vector::from_slice(&[1.0]);
        assert_relative_eq!(existence_horizon(&v1, 2.0, 1.0, &Potential::zero()), 0.5);
        let v0 = Vector::zeros(1);
        assert_relative_eq!(existence_horizon(&v0, 2.0, 1.0, &Potential::quadratic(1.0)), 0.5);
        assert!(existence_horizon(&v0, 2.0, 1.0, &Potential::zero()).is_infinite());
    }

    #[test]
    fn shooting_bound_examples() {
        assert!(shooting_time_bound(1.0, &Potential::zero()).is_infinite());
        let t1 = shooting_time_bound(1.0, &Potential::quadratic(1.0));
        let w = t1 * t1;
        assert_relative_eq!(w * w.exp(), 0.25, epsilon = 1e-12);
        assert_relative_eq!(t1, 0.451_54, epsilon = 1e-5);
        assert!(shooting_time_bound(1.0, &Potential::quadratic(1e8)) < 1e-3);
    }

    #[test]
    fn shooting_free_and_harmonic() {
        let cfg = FlowConfig::with_dt(1e-4);
        let x0 = Vector::zeros(1);
        let x1 = Vector::from_slice(&[1.0]);
        let r = shoot(&x0, &x1, 0.37, &Potential::zero(), 1e-10, &cfg).unwrap();
        assert_eq!(r.v0[0], 1.0);
        assert_eq!(r.iterations, 1);
        let x1 = Vector::from_slice(&[0.3]);
        let t = 0.4;
        let r = shoot(&x0, &x1, t, &Potential::quadratic(1.0), 1e-12, &cfg).unwrap();
        assert_relative_eq!(r.v0[0], t * 0.3 / t.sin(), epsilon = 1e-8);
        assert_relative_eq!(r.v0[0], 0.308_152, epsilon = 1e-6);
    }

    #[test]
    fn free_transport_jacobian() {
        let net = TransportNet {
            points: 64,
            ..Default::default()
        };
        let c = transport_minorisation_constants(1.0, 0.5, &Potential::zero(), 1, &net).unwrap();
        assert_eq!(c.r2, 8.0);
        assert_eq!(c.e0, 32.0);
        assert!(c.r_prime > 8.0);
        assert_relative_eq!(c.m / net.pad, 0.5, epsilon = 1e-12);
        let c3 = transport_minorisation_constants(1.0, 0.5, &Potential::zero(), 3, &net).unwrap();
        assert_relative_eq!(c3.m / net.pad, 0.125, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_jacobian_is_sine() {
        let net = TransportNet {
            points: 64,
            dt: 1e-4,
            pad: 1.05,
        };
        let s = 0.4;
        for d in 1..=2 {
            let c = transport_minorisation_constants(1.0, s, &Potential::quadratic(1.0), d, &net).unwrap();
            assert_relative_eq!(c.m / net.pad, s.sin().powi(d as i32), max_relative = 1e-7);
        }
    }
}
