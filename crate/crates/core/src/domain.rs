//! Phase space, geometry, Maxwellian and equilibrium measures.

use crate::error::{Error, Result};
use crate::numerics::{self, integrate_to_infinity, QuadratureConfig};
use crate::potential::Potential;
use crate::vector::Vector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use std::f64::consts::PI;

/// A position-velocity pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Vector,
    pub v: Vector,
}

impl PhasePoint {
    pub fn new(x: Vector, v: Vector) -> Self {
        assert_eq!(x.dim(), v.dim(), "position and velocity dimensions differ");
        PhasePoint { x, v }
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}

#[derive(Clone, Debug)]
pub enum Geometry {
    /// The unit torus [0, 1)^d.
    Torus,
    /// R^d with a confining potential.
    WholeSpace(Potential),
}

#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub dim: usize,
    pub geometry: Geometry,
}

impl DomainSpec {
    pub fn torus(dim: usize) -> Self {
        assert!((1..=3).contains(&dim));
        DomainSpec {
            dim,
            geometry: Geometry::Torus,
        }
    }

    pub fn whole_space(dim: usize, potential: Potential) -> Self {
        assert!((1..=3).contains(&dim));
        DomainSpec {
            dim,
            geometry: Geometry::WholeSpace(potential),
        }
    }

    pub fn potential(&self) -> Option<&Potential> {
        match &self.geometry {
            Geometry::Torus => None,
            Geometry::WholeSpace(p) => Some(p),
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.geometry, Geometry::Torus)
    }

    /// Φ(x), zero on the torus.
    #[inline]
    pub fn phi(&self, x: &Vector) -> f64 {
        match &self.geometry {
            Geometry::Torus => 0.0,
            Geometry::WholeSpace(p) => p.value(x),
        }
    }

    /// H = |v|²/2 + Φ(x).
    #[inline]
    pub fn energy(&self, z: &PhasePoint) -> f64 {
        0.5 * z.v.norm_sq() + self.phi(&z.x)
    }
}

/// M(v) = (2π)^{−d/2} e^{−|v|²/2}.
#[inline]
pub fn maxwellian_density(v: &Vector) -> f64 {
    (2.0 * PI).powf(-0.5 * v.dim() as f64) * (-0.5 * v.norm_sq()).exp()
}

/// A standard normal vector in R^d.
#[inline]
pub fn sample_maxwellian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    let mut v = Vector::zeros(d);
    for i in 0..d {
        v[i] = StandardNormal.sample(rng);
    }
    v
}

/// A uniform point on S^{d−1}.
#[inline]
pub fn sample_unit_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    if d == 1 {
        return Vector::from_slice(&[if rng.random::<bool>() { 1.0 } else { -1.0 }]);
    }
    loop {
        let g = sample_maxwellian(rng, d);
        let n = g.norm();
        if n > 1e-12 {
            return g.scale(1.0 / n);
        }
    }
}

/// Reduces each coordinate into [0, 1).
#[inline]
pub fn wrap_torus(x: &Vector) -> Vector {
    let mut out = *x;
    for c in out.as_mut_slice() {
        let w = *c - c.floor();
        // x − floor(x) rounds to 1.0 for tiny negative x.
        *c = if w >= 1.0 { 0.0 } else { w };
    }
    out
}

/// The random stream owned by particle `index` of an ensemble seeded with `seed`.
pub fn particle_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Z = ∫ e^{−Φ(x)} dx through the radial reduction.
pub fn equilibrium_normalizer(potential: &Potential, d: usize, quadrature: &QuadratureConfig) -> Result<f64> {
    let radial = radial_integral(potential, d, quadrature, |_| 1.0)?;
    Ok(radial)
}

/// |S^{d−1}| ∫₀^∞ g(r) r^{d−1} e^{−φ(r)} dr.
pub fn radial_integral<G: Fn(f64) -> f64>(
    potential: &Potential,
    d: usize,
    quadrature: &QuadratureConfig,
    g: G,
) -> Result<f64> {
    // Split at a radius where the integrand is already tiny to keep the
    // compactified tail well-conditioned.
    let phi0 = potential.radial(0.0).value;
    let cut = potential.sublevel_radius(phi0 + 40.0).min(1e6);
    let f = |r: f64| g(r) * r.powi(d as i32 - 1) * (phi0 - potential.radial(r).value).exp();
    let head = numerics::integrate(f, 0.0, cut, quadrature)?;
    let tail = integrate_to_infinity(f, cut, quadrature)?;
    Ok(numerics::sphere_area(d) * (head + tail) * (-phi0).exp())
}

/// The equilibrium μ: M(v) on the torus, M(v)e^{−Φ(x)}/Z on the whole space.
#[derive(Clone, Debug)]
pub struct EquilibriumSpec {
    pub domain: DomainSpec,
    pub z: Option<f64>,
}

/// Minimum acceptance rate of the equilibrium rejection sampler.
pub const ACCEPTANCE_FLOOR: f64 = 0.01;

impl EquilibriumSpec {
    pub fn new(domain: DomainSpec, quadrature: &QuadratureConfig) -> Result<Self> {
        let z = match domain.potential() {
            None => None,
            Some(p) => {
                if p.drift_params().is_none() {
                    return Err(Error::DriftParamsMissing);
                }
                Some(equilibrium_normalizer(p, domain.dim, quadrature)?)
            }
        };
        Ok(EquilibriumSpec { domain, z })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    /// Joint density at z.
    pub fn density(&self, z: &PhasePoint) -> f64 {
        let m = maxwellian_density(&z.v);
        match (&self.domain.geometry, self.z) {
            (Geometry::WholeSpace(p), Some(norm)) => m * (-p.value(&z.x)).exp() / norm,
            _ => m,
        }
    }

    /// E_μ[g(|x|)] for the position marginal (whole space only).
    pub fn position_expectation<G: Fn(f64) -> f64>(&self, g: G, quadrature: &QuadratureConfig) -> Result<f64> {
        match (&self.domain.geometry, self.z) {
            (Geometry::WholeSpace(p), Some(norm)) => Ok(radial_integral(p, self.dim(), quadrature, g)? / norm),
            _ => Err(Error::PreconditionViolated(
                "position expectation needs a confining potential".into(),
            )),
        }
    }

    /// One draw from μ, counting rejected proposals into `rejected`.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R, rejected: &mut u64) -> Result<PhasePoint> {
        let d = self.dim();
        let v = sample_maxwellian(rng, d);
        let x = match &self.domain.geometry {
            Geometry::Torus => {
                let mut x = Vector::zeros(d);
                for i in 0..d {
                    x[i] = rng.random::<f64>();
                }
                x
            }
            Geometry::WholeSpace(p) => sample_position(p, d, rng, rejected)?,
        };
        Ok(PhasePoint::new(x, v))
    }

    /// N i.i.d. draws, particle i using [`particle_rng`]`(seed, i)`.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<PhasePoint>> {
        use rayon::prelude::*;
        let res: Vec<(PhasePoint, u64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = particle_rng(seed, i as u64);
                let mut rej = 0;
                self.sample_one(&mut rng, &mut rej).map(|z| (z, rej))
            })
            .collect::<Result<_>>()?;
        let rejected: u64 = res.iter().map(|r| r.1).sum();
        let rate = n as f64 / (n as f64 + rejected as f64);
        if n > 0 && rate < ACCEPTANCE_FLOOR {
            return Err(Error::EnvelopeRejected {
                rate,
                floor: ACCEPTANCE_FLOOR,
            });
        }
        Ok(res.into_iter().map(|r| r.0).collect())
    }
}

/// Exact radial rejection sampling of e^{−Φ(x)}/Z: the radius is proposed
/// from r^{d−1}e^{−κ r^p} (so κ r^p ~ Gamma(d/p)) and accepted with
/// probability e^{−φ(r) + κ r^p − m} ≤ 1.
fn sample_position<R: Rng + ?Sized>(
    potential: &Potential,
    d: usize,
    rng: &mut R,
    rejected: &mut u64,
) -> Result<Vector> {
    let env = potential.envelope().ok_or_else(|| {
        Error::PreconditionViolated(format!("potential {} has no sampling envelope", potential.name()))
    })?;
    let gamma = Gamma::new(d as f64 / env.p, 1.0).expect("gamma shape");
    let max_tries = (1.0 / ACCEPTANCE_FLOOR) as u64 * 100;
    for _ in 0..max_tries {
        let u: f64 = gamma.sample(rng);
        let r = (u / env.kappa).powf(1.0 / env.p);
        let log_acc = -potential.radial(r).value + u - env.m;
        let accept: f64 = rng.random();
        if accept.ln() < log_acc {
            return Ok(sample_unit_sphere(rng, d).scale(r));
        }
        *rejected += 1;
    }
    Err(Error::EnvelopeRejected {
        rate: 1.0 / max_tries as f64,
        floor: ACCEPTANCE_FLOOR,
    })
}
