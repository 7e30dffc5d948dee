//! Hard collision kernels B(|v−v*|, σ) = |v−v*|^γ b(σ·(v−v*)/|v−v*|) and
//! radial moments of |v−v*|^γ against the Maxwellian background.

use crate::error::{Error, Result};
use crate::numerics::{self, integrate_to_infinity, integrate_with_breaks, QuadratureConfig};
use std::f64::consts::PI;

/// Angular factor b on [−1, 1].
#[derive(Clone, Debug, PartialEq)]
pub enum AngularForm {
    /// b ≡ value.
    Uniform { value: f64 },
    /// Values at equispaced nodes of [−1, 1], linearly interpolated; even.
    TabulatedEven { values: Vec<f64> },
}

impl AngularForm {
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            AngularForm::Uniform { value } => *value,
            AngularForm::TabulatedEven { values } => {
                let n = values.len() - 1;
                let t = ((z.clamp(-1.0, 1.0) + 1.0) * 0.5 * n as f64).min(n as f64);
                let i = (t.floor() as usize).min(n - 1);
                let f = t - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            AngularForm::Uniform { value } => *value,
            AngularForm::TabulatedEven { values } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            AngularForm::Uniform { value } => *value,
            AngularForm::TabulatedEven { values } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            AngularForm::Uniform { .. } => vec![],
            AngularForm::TabulatedEven { values } => {
                let n = values.len() - 1;
                (1..n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect()
            }
        }
    }
}

/// Kernel parameters: relative-speed exponent γ, angular factor b and its
/// positive lower bound C_b.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionKernelSpec {
    pub gamma: f64,
    pub b_lower: f64,
    pub angular: AngularForm,
}

impl CollisionKernelSpec {
    pub fn new(gamma: f64, b_lower: f64, angular: AngularForm) -> Result<Self> {
        let k = CollisionKernelSpec {
            gamma,
            b_lower,
            angular,
        };
        k.validate()?;
        Ok(k)
    }

    /// Constant b normalized to unit angular mass on S^{d−1}.
    pub fn hard_spheres(gamma: f64, d: usize) -> Self {
        let value = 1.0 / numerics::sphere_area(d);
        CollisionKernelSpec {
            gamma,
            b_lower: value,
            angular: AngularForm::Uniform { value },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "kernel exponent gamma = {} must be finite and >= 0",
                self.gamma
            )));
        }
        if !(self.b_lower > 0.0) {
            return Err(Error::Config(format!(
                "kernel lower bound b_lower = {} must be > 0",
                self.b_lower
            )));
        }
        if let AngularForm::TabulatedEven { values } = &self.angular {
            if values.len() < 2 {
                return Err(Error::Config("tabulated b needs at least 2 nodes".into()));
            }
            let n = values.len();
            for i in 0..n {
                if !values[i].is_finite() {
                    return Err(Error::Config("tabulated b has non-finite values".into()));
                }
                if (values[i] - values[n - 1 - i]).abs() > 1e-12 * (1.0 + values[i].abs()) {
                    return Err(Error::Config("tabulated b is not even".into()));
                }
            }
        }
        if self.angular.min() < self.b_lower * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "angular factor drops to {} below b_lower = {}",
                self.angular.min(),
                self.b_lower
            )));
        }
        Ok(())
    }

    /// ∫_{S^{d−1}} b(σ·e) f(σ·e) dσ for a unit vector e.
    pub fn sphere_integral<F: Fn(f64) -> f64>(&self, d: usize, f: F) -> f64 {
        let cfg = QuadratureConfig {
            abs_tol: 1e-13,
            ..Default::default()
        };
        let b = &self.angular;
        match d {
            1 => b.eval(1.0) * f(1.0) + b.eval(-1.0) * f(-1.0),
            2 => {
                let brk: Vec<f64> = b.breakpoints().iter().map(|z| z.acos()).collect();
                2.0 * integrate_with_breaks(|p| b.eval(p.cos()) * f(p.cos()), 0.0, PI, &brk, &cfg)
                    .expect("angular quadrature")
            }
            _ => {
                2.0 * PI
                    * integrate_with_breaks(|z| b.eval(z) * f(z), -1.0, 1.0, &b.breakpoints(), &cfg)
                        .expect("angular quadrature")
            }
        }
    }

    /// m₀ = ∫_{S^{d−1}} b(σ·e) dσ.
    pub fn angular_mass(&self, d: usize) -> f64 {
        match &self.angular {
            AngularForm::Uniform { value } => value * numerics::sphere_area(d),
            _ => self.sphere_integral(d, |_| 1.0),
        }
    }

    /// γ_b = ∫ b(σ·e)(1 − σ·e)/2 dσ, so that ∫ b |v′ − v|² dσ = γ_b|v − v*|².
    pub fn momentum_transfer(&self, d: usize) -> f64 {
        self.sphere_integral(d, |z| 0.5 * (1.0 - z))
    }
}

/// Radial Maxwellian weight (2π)^{−d/2} e^{−r²/2} r^{d−1}.
#[inline]
fn radial_maxwellian(r: f64, d: usize) -> f64 {
    (2.0 * PI).powf(-0.5 * d as f64) * (-0.5 * r * r).exp() * r.powi(d as i32 - 1)
}

/// ∫_{S^{d−1}} |s e − r ω|^γ (ω·e)^j dω for j ∈ {0, 1}.
fn angular_average(s: f64, r: f64, gamma: f64, d: usize, j: u8) -> f64 {
    let cfg = QuadratureConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_intervals: 2000,
    };
    match d {
        1 => {
            let a = (s - r).abs().powf(gamma);
            let b = (s + r).powf(gamma);
            if j == 0 {
                a + b
            } else {
                a - b
            }
        }
        2 => {
            let f = |phi: f64| {
                let c = phi.cos();
                let w = (s * s + r * r - 2.0 * s * r * c).max(0.0).powf(0.5 * gamma);
                if j == 0 {
                    w
                } else {
                    w * c
                }
            };
            2.0 * numerics::integrate(f, 0.0, PI, &cfg).expect("angular quadrature")
        }
        _ => {
            if j == 0 && s * r > 1e-8 {
                let g2 = gamma + 2.0;
                2.0 * PI * ((s + r).powf(g2) - (s - r).abs().powf(g2)) / (s * r * g2)
            } else if j == 0 {
                4.0 * PI * (s * s + r * r).powf(0.5 * gamma)
            } else {
                let f = |c: f64| c * (s * s + r * r - 2.0 * s * r * c).max(0.0).powf(0.5 * gamma);
                2.0 * PI * numerics::integrate(f, -1.0, 1.0, &cfg).expect("angular quadrature")
            }
        }
    }
}

fn moment_config() -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: 1e-11,
        rel_tol: 1e-11,
        max_intervals: 4000,
    }
}

/// I_k(s) = ∫ |v*|^k M(v*) |v − v*|^γ dv* at |v| = s.
pub fn radial_moment(k: u32, s: f64, gamma: f64, d: usize) -> Result<f64> {
    if gamma == 0.0 {
        return Ok(maxwellian_abs_moment(k as f64, d));
    }
    let f = |r: f64| r.powi(k as i32) * radial_maxwellian(r, d) * angular_average(s, r, gamma, d, 0);
    radial_integral(f, s)
}

/// The coefficient j(s) in ∫ v* M(v*) |v − v*|^γ dv* = j(|v|) v/|v|.
pub fn radial_flux(s: f64, gamma: f64, d: usize) -> Result<f64> {
    if gamma == 0.0 || s == 0.0 {
        return Ok(0.0);
    }
    let f = |r: f64| r * radial_maxwellian(r, d) * angular_average(s, r, gamma, d, 1);
    radial_integral(f, s)
}

fn radial_integral<F: Fn(f64) -> f64>(f: F, s: f64) -> Result<f64> {
    let cfg = moment_config();
    let cut = s + 12.0;
    let head = integrate_with_breaks(&f, 0.0, cut, &[s], &cfg)?;
    let tail = integrate_to_infinity(&f, cut, &cfg)?;
    Ok(head + tail)
}

/// E|v*|^k for v* ~ M in R^d.
pub fn maxwellian_abs_moment(k: f64, d: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let h = 0.5 * d as f64;
    (0.5 * k * 2f64.ln() + ln_gamma(h + 0.5 * k) - ln_gamma(h)).exp()
}

/// Collision rate κ(|v|) = m₀ I₀(|v|).
pub fn kappa_direct(kernel: &CollisionKernelSpec, s: f64, d: usize) -> Result<f64> {
    Ok(kernel.angular_mass(d) * radial_moment(0, s, kernel.gamma, d)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::gamma::ln_gamma;

    /// Kummer series ₁F₁(a; b; z).
    fn hyp1f1(a: f64, b: f64, z: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 0..400 {
            let nf = n as f64;
            term *= (a + nf) / (b + nf) * z / (nf + 1.0);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    }

    /// E|v − v*|^γ with v* ~ M: a noncentral chi moment.
    fn oracle(s: f64, gamma: f64, d: usize) -> f64 {
        let h = 0.5 * d as f64;
        (0.5 * gamma * 2f64.ln() + ln_gamma(h + 0.5 * gamma) - ln_gamma(h)).exp()
            * hyp1f1(-0.5 * gamma, h, -0.5 * s * s)
    }

    #[test]
    fn zeroth_moment_matches_noncentral_chi_oracle() {
        for d in 1..=3 {
            for &g in &[0.5, 1.0, 1.7] {
                for &s in &[0.0, 0.3, 1.0, 2.5] {
                    let v = radial_moment(0, s, g, d).unwrap();
                    assert_relative_eq!(v, oracle(s, g, d), max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn mean_speed_in_three_dimensions() {
        let k = CollisionKernelSpec::hard_spheres(1.0, 3);
        assert_relative_eq!(k.angular_mass(3), 1.0, epsilon = 1e-14);
        let v = kappa_direct(&k, 0.0, 3).unwrap();
        assert_relative_eq!(v, 2.0 * (2.0 / PI).sqrt(), epsilon = 1e-9);
        let big = kappa_direct(&k, 10.0, 3).unwrap() / 10.0;
        assert!((1.0..=1.1).contains(&big), "{big}");
    }

    #[test]
    fn second_moment_at_origin() {
        // I₂(0) = E|v*|^{2+γ}.
        for d in 1..=3 {
            let v = radial_moment(2, 0.0, 1.0, d).unwrap();
            let h = 0.5 * d as f64;
            let want = (1.5 * 2f64.ln() + ln_gamma(h + 1.5) - ln_gamma(h)).exp();
            assert_relative_eq!(v, want, max_relative = 1e-9);
        }
    }

    #[test]
    fn flux_linear_in_gamma_two() {
        // γ = 2: ∫ v* M |v − v*|² dv* = −2v, so j(s) = −2s.
        for d in 1..=3 {
            for &s in &[0.5, 1.5] {
                assert_relative_eq!(radial_flux(s, 2.0, d).unwrap(), -2.0 * s, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn tabulated_mass_matches_uniform() {
        let t = AngularForm::TabulatedEven { values: vec![0.25; 9] };
        let k = CollisionKernelSpec::new(1.0, 0.25, t).unwrap();
        assert_relative_eq!(k.angular_mass(3), PI, epsilon = 1e-12);
        assert_relative_eq!(k.angular_mass(2), 0.5 * PI, epsilon = 1e-12);
        assert_relative_eq!(k.angular_mass(1), 0.5, epsilon = 1e-15);
        for d in 1..=3 {
            assert_relative_eq!(k.momentum_transfer(d), 0.5 * k.angular_mass(d), epsilon = 1e-12);
        }
    }

    #[test]
    fn odd_table_rejected() {
        let t = AngularForm::TabulatedEven {
            values: vec![1.0, 2.0, 3.0],
        };
        assert!(CollisionKernelSpec::new(0.0, 0.5, t).is_err());
    }
}
