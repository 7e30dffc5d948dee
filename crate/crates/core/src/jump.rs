//! Piecewise-deterministic simulation of the BGK and linear Boltzmann jump
//! processes: deterministic flow between jumps, an Exp(1) clock with fresh
//! Maxwellian velocities for BGK, and a thinned κ(v) clock with sampled
//! collisions for linear Boltzmann.

use crate::domain::{particle_rng, sample_maxwellian, sample_unit_sphere, DomainSpec, Geometry, PhasePoint};
use crate::error::{Error, Result};
use crate::flow::{flow, FlowConfig};
use crate::kernel::{self, AngularForm, CollisionKernelSpec};
use crate::vector::Vector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use std::sync::Arc;

/// Relative padding of every thinning bound.
pub const THINNING_PAD: f64 = 0.01;
/// Proposals per v* draw before the collision sampler gives up.
pub const COLLISION_MAX_ATTEMPTS: u32 = 1000;
/// Particles per deterministic reduction block.
pub const BLOCK: usize = 1024;

/// κ(s) = m₀ I₀(s) tabulated on s ∈ [0, s_max] with linear interpolation;
/// larger speeds fall back to direct quadrature.
#[derive(Clone, Debug)]
pub struct KappaTable {
    pub kernel: CollisionKernelSpec,
    pub d: usize,
    pub angular_mass: f64,
    pub h: f64,
    values: Vec<f64>,
    /// Running maximum of `values`, so bounds stay valid if κ is not monotone.
    upper: Vec<f64>,
}

impl KappaTable {
    pub fn new(kernel: &CollisionKernelSpec, d: usize) -> Result<Self> {
        Self::with_grid(kernel, d, 0.01, 12.0)
    }

    pub fn with_grid(kernel: &CollisionKernelSpec, d: usize, h: f64, s_max: f64) -> Result<Self> {
        let m0 = kernel.angular_mass(d);
        let n = (s_max / h).ceil() as usize;
        let values: Vec<f64> = if kernel.gamma == 0.0 {
            vec![m0; n + 1]
        } else {
            (0..=n)
                .into_par_iter()
                .map(|i| kernel::radial_moment(0, i as f64 * h, kernel.gamma, d).map(|v| m0 * v))
                .collect::<Result<_>>()?
        };
        let mut upper = values.clone();
        for i in 1..upper.len() {
            upper[i] = upper[i].max(upper[i - 1]);
        }
        Ok(KappaTable {
            kernel: kernel.clone(),
            d,
            angular_mass: m0,
            h,
            values,
            upper,
        })
    }

    pub fn s_max(&self) -> f64 {
        self.h * (self.values.len() - 1) as f64
    }

    /// κ at speed `s`.
    pub fn kappa(&self, s: f64) -> f64 {
        if self.kernel.gamma == 0.0 {
            return self.angular_mass;
        }
        let t = s / self.h;
        let i = t.floor() as usize;
        if i + 1 < self.values.len() {
            let f = t - i as f64;
            self.values[i] * (1.0 - f) + self.values[i + 1] * f
        } else {
            self.angular_mass * kernel::radial_moment(0, s, self.kernel.gamma, self.d).expect("κ quadrature")
        }
    }

    /// sup{κ(s') : s' ≤ s} without padding.
    pub fn sup_up_to(&self, s: f64) -> f64 {
        if self.kernel.gamma == 0.0 {
            return self.angular_mass;
        }
        let i = (s / self.h).ceil() as usize;
        if i < self.upper.len() {
            self.upper[i]
        } else {
            // κ is nondecreasing beyond the table for γ ≥ 0.
            self.upper[self.upper.len() - 1].max(self.kappa(s))
        }
    }
}

/// κ̄ = sup{κ(v) : |v|² ≤ 2(E − inf Φ)}·(1 + pad) for a flight at energy E.
pub fn thinning_bound(segment_energy: f64, inf_phi: f64, table: &KappaTable) -> f64 {
    let s = (2.0 * (segment_energy - inf_phi)).max(0.0).sqrt();
    table.sup_up_to(s) * (1.0 + THINNING_PAD)
}

#[derive(Clone, Debug)]
pub enum ProcessKind {
    Bgk,
    LinearBoltzmann(CollisionKernelSpec),
}

#[derive(Clone, Debug)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub domain: DomainSpec,
    pub flow: FlowConfig,
    table: Option<Arc<KappaTable>>,
}

impl ProcessSpec {
    pub fn bgk(domain: DomainSpec, flow: FlowConfig) -> Self {
        ProcessSpec {
            kind: ProcessKind::Bgk,
            domain,
            flow,
            table: None,
        }
    }

    pub fn boltzmann(domain: DomainSpec, kernel: CollisionKernelSpec, flow: FlowConfig) -> Result<Self> {
        kernel.validate()?;
        let table = Arc::new(KappaTable::new(&kernel, domain.dim)?);
        Ok(ProcessSpec {
            kind: ProcessKind::LinearBoltzmann(kernel),
            domain,
            flow,
            table: Some(table),
        })
    }

    pub fn kappa_table(&self) -> Option<&KappaTable> {
        self.table.as_deref()
    }
}

/// σ-parametrized post-collision velocity v′ = (v+v*)/2 + (|v−v*|/2)σ.
#[inline]
pub fn collide(v: &Vector, v_star: &Vector, sigma: &Vector) -> Vector {
    let rel = (*v - *v_star).norm();
    (*v + *v_star).scale(0.5).axpy(0.5 * rel, sigma)
}

/// The partner velocity v′* = (v+v*)/2 − (|v−v*|/2)σ.
#[inline]
pub fn collide_partner(v: &Vector, v_star: &Vector, sigma: &Vector) -> Vector {
    let rel = (*v - *v_star).norm();
    (*v + *v_star).scale(0.5).axpy(-0.5 * rel, sigma)
}

/// Draws v* with density ∝ M(v*)|v − v*|^γ by rejection from the mixture
/// envelope c(|v|^γ + |v*|^γ)M(v*), c = max(1, 2^{γ−1}).
pub fn sample_partner<R: Rng + ?Sized>(v: &Vector, gamma: f64, rng: &mut R) -> Result<Vector> {
    let d = v.dim();
    if gamma == 0.0 {
        return Ok(sample_maxwellian(rng, d));
    }
    let c = 1f64.max(2f64.powf(gamma - 1.0));
    let wv = v.norm().powf(gamma);
    let wstar = kernel::maxwellian_abs_moment(gamma, d);
    let size_biased = Gamma::new(0.5 * (d as f64 + gamma), 2.0).expect("gamma shape");
    for _ in 0..COLLISION_MAX_ATTEMPTS {
        let vs = if rng.random::<f64>() * (wv + wstar) < wv {
            sample_maxwellian(rng, d)
        } else {
            let r2: f64 = size_biased.sample(rng);
            sample_unit_sphere(rng, d).scale(r2.sqrt())
        };
        let num = (*v - vs).norm().powf(gamma);
        let den = c * (wv + vs.norm().powf(gamma));
        if rng.random::<f64>() * den < num {
            return Ok(vs);
        }
    }
    Err(Error::EnvelopeRejected {
        rate: 1.0 / COLLISION_MAX_ATTEMPTS as f64,
        floor: 1.0 / COLLISION_MAX_ATTEMPTS as f64,
    })
}

/// Draws σ with density ∝ b(σ·û) on S^{d−1}, û the relative direction.
pub fn sample_sigma<R: Rng + ?Sized>(rel: &Vector, angular: &AngularForm, rng: &mut R) -> Result<Vector> {
    let d = rel.dim();
    match angular {
        AngularForm::Uniform { .. } => Ok(sample_unit_sphere(rng, d)),
        AngularForm::TabulatedEven { .. } => {
            let n = rel.norm();
            if n == 0.0 {
                return Ok(sample_unit_sphere(rng, d));
            }
            let u = rel.scale(1.0 / n);
            let bmax = angular.max();
            for _ in 0..COLLISION_MAX_ATTEMPTS {
                let s = sample_unit_sphere(rng, d);
                if rng.random::<f64>() * bmax < angular.eval(s.dot(&u)) {
                    return Ok(s);
                }
            }
            Err(Error::EnvelopeRejected {
                rate: 1.0 / COLLISION_MAX_ATTEMPTS as f64,
                floor: 1.0 / COLLISION_MAX_ATTEMPTS as f64,
            })
        }
    }
}

/// One post-collision velocity together with the sampled v* and σ.
pub fn sample_collision<R: Rng + ?Sized>(
    v: &Vector,
    kernel: &CollisionKernelSpec,
    rng: &mut R,
) -> Result<(Vector, Vector, Vector)> {
    let vs = sample_partner(v, kernel.gamma, rng)?;
    let sigma = sample_sigma(&(*v - vs), &kernel.angular, rng)?;
    Ok((collide(v, &vs, &sigma), vs, sigma))
}

/// Occupation time and accepted jumps per speed bin.
#[derive(Clone, Debug, PartialEq)]
pub struct RateHistogram {
    pub bin_width: f64,
    pub time: Vec<f64>,
    pub jumps: Vec<u64>,
}

impl RateHistogram {
    pub fn new(bin_width: f64, bins: usize) -> Self {
        RateHistogram {
            bin_width,
            time: vec![0.0; bins],
            jumps: vec![0; bins],
        }
    }

    #[inline]
    fn bin(&self, s: f64) -> Option<usize> {
        let i = (s / self.bin_width) as usize;
        (i < self.time.len()).then_some(i)
    }

    fn merge(&mut self, other: &RateHistogram) {
        for (a, b) in self.time.iter_mut().zip(&other.time) {
            *a += b;
        }
        for (a, b) in self.jumps.iter_mut().zip(&other.jumps) {
            *a += b;
        }
    }

    /// Empirical jump rate per bin (NaN where no time was spent).
    pub fn rates(&self) -> Vec<f64> {
        self.time.iter().zip(&self.jumps).map(|(t, j)| *j as f64 / t).collect()
    }
}

/// Counters accumulated by [`simulate`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimStats {
    pub jumps: u64,
    pub proposals: u64,
    /// Filled when the ensemble tracks speed-binned rates; occupation time
    /// is attributed to the speed at flight start, exact on the torus.
    pub rates: Option<RateHistogram>,
}

impl SimStats {
    fn merge(&mut self, other: &SimStats) {
        self.jumps += other.jumps;
        self.proposals += other.proposals;
        if let (Some(a), Some(b)) = (self.rates.as_mut(), other.rates.as_ref()) {
            a.merge(b);
        }
    }
}

/// A particle ensemble with one counter-based random stream per particle.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub points: Vec<PhasePoint>,
    pub t: f64,
    pub seed_base: u64,
    word_pos: Vec<u128>,
    pub track_rates: Option<(f64, usize)>,
}

/// Key offset separating dynamics streams from initial-law streams.
const DYNAMICS_KEY: u64 = 0x9E37_79B9_7F4A_7C15;

impl Ensemble {
    pub fn new(points: Vec<PhasePoint>, seed_base: u64) -> Self {
        let n = points.len();
        Ensemble {
            points,
            t: 0.0,
            seed_base,
            word_pos: vec![0; n],
            track_rates: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn dynamics_rng(seed_base: u64, i: usize, word_pos: u128) -> ChaCha8Rng {
    let mut rng = particle_rng(seed_base ^ DYNAMICS_KEY, i as u64);
    rng.set_word_pos(word_pos);
    rng
}

struct Walker<'a> {
    process: &'a ProcessSpec,
    inf_phi: f64,
}

impl Walker<'_> {
    fn advance(
        &self,
        z: &mut PhasePoint,
        mut t: f64,
        t_final: f64,
        rng: &mut ChaCha8Rng,
        stats: &mut SimStats,
    ) -> Result<()> {
        let domain = &self.process.domain;
        let cfg = &self.process.flow;
        while t < t_final {
            let speed = z.v.norm();
            let bound = match &self.process.kind {
                ProcessKind::Bgk => 1.0,
                ProcessKind::LinearBoltzmann(_) => {
                    let table = self.process.table.as_deref().expect("κ table");
                    let e = match domain.geometry {
                        Geometry::Torus => 0.5 * speed * speed,
                        _ => domain.energy(z),
                    };
                    thinning_bound(e, self.inf_phi, table)
                }
            };
            let tau: f64 = Exp1.sample(rng);
            let tau = tau / bound;
            let step = tau.min(t_final - t);
            if let Some(h) = stats.rates.as_mut() {
                if let Some(b) = h.bin(speed) {
                    h.time[b] += step;
                }
            }
            *z = flow(domain, z, step, cfg)?;
            if tau >= t_final - t {
                break;
            }
            t += tau;
            stats.proposals += 1;
            match &self.process.kind {
                ProcessKind::Bgk => {
                    z.v = sample_maxwellian(rng, z.dim());
                    stats.jumps += 1;
                }
                ProcessKind::LinearBoltzmann(kernel) => {
                    let table = self.process.table.as_deref().expect("κ table");
                    let s = z.v.norm();
                    let k = table.kappa(s);
                    if k > bound {
                        return Err(Error::ThinningBoundViolated { kappa: k, bound });
                    }
                    if rng.random::<f64>() * bound < k {
                        if let Some(h) = stats.rates.as_mut() {
                            if let Some(b) = h.bin(s) {
                                h.jumps[b] += 1;
                            }
                        }
                        z.v = sample_collision(&z.v, kernel, rng)?.0;
                        stats.jumps += 1;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Advances every particle from `ensemble.t` to `t_final`. Results depend
/// only on (seed_base, particle index, process), never on the worker count.
pub fn simulate(ensemble: &mut Ensemble, process: &ProcessSpec, t_final: f64) -> Result<SimStats> {
    if t_final < ensemble.t {
        return Err(Error::PreconditionViolated(format!(
            "t_final = {t_final} precedes ensemble time {}",
            ensemble.t
        )));
    }
    let walker = Walker {
        process,
        inf_phi: process.domain.potential().map_or(0.0, |p| p.lower_bound()),
    };
    let t0 = ensemble.t;
    let track = ensemble.track_rates;
    let fresh = || SimStats {
        rates: track.map(|(w, n)| RateHistogram::new(w, n)),
        ..Default::default()
    };
    let seed = ensemble.seed_base;
    let starts = &ensemble.word_pos;
    let blocks: Vec<Result<(SimStats, Vec<u128>)>> = ensemble
        .points
        .par_chunks_mut(BLOCK)
        .enumerate()
        .map(|(b, pts)| {
            let mut st = fresh();
            let mut pos = Vec::with_capacity(pts.len());
            for (j, z) in pts.iter_mut().enumerate() {
                let i = b * BLOCK + j;
                let mut rng = dynamics_rng(seed, i, starts[i]);
                walker.advance(z, t0, t_final, &mut rng, &mut st)?;
                pos.push(rng.get_word_pos());
            }
            Ok((st, pos))
        })
        .collect();
    let mut total = fresh();
    let mut offset = 0;
    for b in blocks {
        let (st, pos) = b?;
        total.merge(&st);
        ensemble.word_pos[offset..offset + pos.len()].copy_from_slice(&pos);
        offset += pos.len();
    }
    ensemble.t = t_final;
    Ok(total)
}

/// Ensemble mean and standard error of g(z), reduced in fixed block order.
pub fn mean_and_stderr<F>(points: &[PhasePoint], g: F) -> (f64, f64)
where
    F: Fn(&PhasePoint) -> f64 + Sync,
{
    let n = points.len() as f64;
    let sums: Vec<(f64, f64)> = points
        .par_chunks(BLOCK)
        .map(|c| {
            c.iter().fold((0.0, 0.0), |(s, q), z| {
                let y = g(z);
                (s + y, q + y * y)
            })
        })
        .collect();
    let (s, q) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = s / n;
    let var = ((q / n - mean * mean) * n / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}
