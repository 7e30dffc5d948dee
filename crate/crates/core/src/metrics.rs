//! Binned L¹ and weighted L¹ distances to equilibrium, and decay fits.
//!
//! Distances use the L¹ convention: mutually singular laws are at distance 2.

use crate::domain::{EquilibriumSpec, Geometry, PhasePoint};
use crate::error::{Error, Result};
use crate::lyapunov::Weight;
use crate::numerics::{self, integrate_to_infinity, QuadratureConfig};
use crate::potential::Potential;
use crate::vector::Vector;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::factorial::ln_binomial;

/// Required equilibrium mass inside the box.
pub const MIN_COVERAGE: f64 = 0.999;

/// Folds used for the Monte Carlo error of distance estimates.
pub const FOLDS: usize = 10;

/// Largest number of phase-space bins.
pub const MAX_BINS: usize = 1 << 26;

/// Gauss–Legendre nodes and weights on [−1, 1], 8 points.
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Extra cells per side used to fold position tails into the boundary bins.
const TAIL_CELLS: usize = 8;

/// Phase-space box [x_lo, x_hi]^d × [−v_max, v_max]^d with equal bins per axis.
/// Mass outside the box is folded into the nearest boundary bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinningSpec {
    pub dim: usize,
    pub bins_per_axis: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub v_max: f64,
}

impl BinningSpec {
    /// Box holding at least 99.95% of equilibrium mass, split evenly between
    /// position and velocity tails.
    pub fn for_equilibrium(eq: &EquilibriumSpec, bins_per_axis: usize, quad: &QuadratureConfig) -> Result<Self> {
        let d = eq.dim();
        let tail = 2.5e-4;
        let std = Normal::standard();
        let v_max = -std.inverse_cdf(0.5 * tail / d as f64);
        let (x_lo, x_hi) = match &eq.domain.geometry {
            Geometry::Torus => (0.0, 1.0),
            Geometry::WholeSpace(p) => {
                let z =
                    eq.z.ok_or_else(|| Error::PreconditionViolated("equilibrium not normalized".into()))?;
                let phi0 = p.radial(0.0).value;
                let mut hi = p.sublevel_radius(phi0 + 1.0).max(1.0);
                while radial_tail(p, d, hi, z, quad)? > tail {
                    hi *= 2.0;
                }
                let l = numerics::bisect(
                    |r| radial_tail(p, d, r, z, quad).map_or(f64::NAN, |m| m - tail),
                    0.0,
                    hi,
                )?;
                (-l, l)
            }
        };
        Ok(BinningSpec {
            dim: d,
            bins_per_axis,
            x_lo,
            x_hi,
            v_max,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.bins_per_axis;
        if n < 2 || !(self.x_hi > self.x_lo) || !(self.v_max > 0.0) || self.dim == 0 {
            return Err(Error::Config(format!("invalid binning {self:?}")));
        }
        match n.checked_pow(2 * self.dim as u32) {
            Some(b) if b <= MAX_BINS => Ok(()),
            _ => Err(Error::Config(format!(
                "{n} bins per axis in {}-dimensional phase space exceeds {MAX_BINS} bins",
                2 * self.dim
            ))),
        }
    }

    pub fn total_bins(&self) -> usize {
        self.bins_per_axis.pow(2 * self.dim as u32)
    }
}

/// Equilibrium mass outside the ball of radius r.
fn radial_tail(p: &Potential, d: usize, r: f64, z: f64, quad: &QuadratureConfig) -> Result<f64> {
    let f = |s: f64| s.powi(d as i32 - 1) * (-p.radial(s).value).exp();
    Ok(numerics::sphere_area(d) * integrate_to_infinity(f, r, quad)? / z)
}

/// A binning with its equilibrium bin masses.
#[derive(Clone, Debug)]
pub struct Binning {
    pub spec: BinningSpec,
    /// Mass of μ inside the box before folding.
    pub coverage: f64,
    position_mass: Vec<f64>,
    velocity_mass: Vec<f64>,
}

impl Binning {
    pub fn new(spec: BinningSpec, eq: &EquilibriumSpec) -> Result<Self> {
        spec.validate()?;
        if spec.dim != eq.dim() {
            return Err(Error::Config("binning and equilibrium dimensions differ".into()));
        }
        let n = spec.bins_per_axis;
        let d = spec.dim;
        let std = Normal::standard();
        let h = 2.0 * spec.v_max / n as f64;
        let cdf = |k: usize| match k {
            0 => 0.0,
            k if k == n => 1.0,
            k => std.cdf(-spec.v_max + h * k as f64),
        };
        let velocity_mass: Vec<f64> = (0..n).map(|k| cdf(k + 1) - cdf(k)).collect();
        let v_cov = (1.0 - 2.0 * std.cdf(-spec.v_max)).powi(d as i32);
        let (position_mass, x_cov) = match &eq.domain.geometry {
            Geometry::Torus => {
                if spec.x_lo > 0.0 || spec.x_hi < 1.0 {
                    return Err(Error::BoxCoverageInsufficient {
                        coverage: (spec.x_hi.min(1.0) - spec.x_lo.max(0.0)).max(0.0).powi(d as i32) * v_cov,
                        required: MIN_COVERAGE,
                    });
                }
                let nb = n.pow(d as u32);
                (vec![1.0 / nb as f64; nb], 1.0)
            }
            Geometry::WholeSpace(p) => position_cells(&spec, p),
        };
        let coverage = x_cov * v_cov;
        if coverage < MIN_COVERAGE {
            return Err(Error::BoxCoverageInsufficient {
                coverage,
                required: MIN_COVERAGE,
            });
        }
        Ok(Binning {
            spec,
            coverage,
            position_mass,
            velocity_mass,
        })
    }

    fn axis_index(&self, lo: f64, hi: f64, x: f64) -> usize {
        let n = self.spec.bins_per_axis;
        let k = ((x - lo) / (hi - lo) * n as f64).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(n - 1)
        }
    }

    /// Flat bin index: position axes first, then velocity axes.
    pub fn index(&self, z: &PhasePoint) -> usize {
        let s = &self.spec;
        let n = s.bins_per_axis;
        let mut idx = 0;
        for i in 0..s.dim {
            idx = idx * n + self.axis_index(s.x_lo, s.x_hi, z.x[i]);
        }
        for i in 0..s.dim {
            idx = idx * n + self.axis_index(-s.v_max, s.v_max, z.v[i]);
        }
        idx
    }

    /// Equilibrium mass of a bin, tails folded.
    pub fn mass(&self, idx: usize) -> f64 {
        let n = self.spec.bins_per_axis;
        let mut rest = idx;
        let mut m = 1.0;
        for _ in 0..self.spec.dim {
            m *= self.velocity_mass[rest % n];
            rest /= n;
        }
        m * self.position_mass[rest]
    }

    pub fn center(&self, idx: usize) -> PhasePoint {
        let s = &self.spec;
        let n = s.bins_per_axis;
        let d = s.dim;
        let mut rest = idx;
        let mut v = Vector::zeros(d);
        let mut x = Vector::zeros(d);
        let hv = 2.0 * s.v_max / n as f64;
        let hx = (s.x_hi - s.x_lo) / n as f64;
        for i in (0..d).rev() {
            v[i] = -s.v_max + hv * ((rest % n) as f64 + 0.5);
            rest /= n;
        }
        for i in (0..d).rev() {
            x[i] = s.x_lo + hx * ((rest % n) as f64 + 0.5);
            rest /= n;
        }
        PhasePoint::new(x, v)
    }

    /// Lebesgue volume of one bin.
    pub fn cell_volume(&self) -> f64 {
        let s = &self.spec;
        let n = s.bins_per_axis as f64;
        (((s.x_hi - s.x_lo) / n) * (2.0 * s.v_max / n)).powi(s.dim as i32)
    }

    /// Σ_b w(center_b) μ(b).
    fn weighted_total(&self, weight: &Weight, eq: &EquilibriumSpec) -> f64 {
        ordered_sum(self.spec.total_bins(), |b| {
            weight.value(&eq.domain, &self.center(b)) * self.mass(b)
        })
    }
}

/// Chunk length of the fixed-order parallel reductions.
const CHUNK: usize = 4096;

/// Σ_{i<n} f(i) summed in fixed chunks, independent of the worker count.
fn ordered_sum<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
    let parts: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    parts.iter().sum()
}

/// Position bin masses of e^{−Φ}/Z with tails folded, by 8-point Gauss–Legendre
/// on every cell of the box extended by [`TAIL_CELLS`] cells per side and out
/// to the e^{−40} sublevel radius. Returns (masses, mass inside the box).
fn position_cells(spec: &BinningSpec, p: &Potential) -> (Vec<f64>, f64) {
    let n = spec.bins_per_axis;
    let d = spec.dim;
    let phi0 = p.radial(0.0).value;
    let far = p.sublevel_radius(phi0 + 40.0).max(spec.x_hi.abs()).max(spec.x_lo.abs()) * 1.01;
    // Axis segments (lo, hi, bin index, inside the box).
    let mut segs: Vec<(f64, f64, usize, bool)> = Vec::new();
    let h = (spec.x_hi - spec.x_lo) / n as f64;
    if far > -spec.x_lo {
        let w = (far + spec.x_lo) / TAIL_CELLS as f64;
        for k in 0..TAIL_CELLS {
            segs.push((-far + w * k as f64, -far + w * (k + 1) as f64, 0, false));
        }
    }
    for k in 0..n {
        segs.push((spec.x_lo + h * k as f64, spec.x_lo + h * (k + 1) as f64, k, true));
    }
    if far > spec.x_hi {
        let w = (far - spec.x_hi) / TAIL_CELLS as f64;
        for k in 0..TAIL_CELLS {
            segs.push((spec.x_hi + w * k as f64, spec.x_hi + w * (k + 1) as f64, n - 1, false));
        }
    }
    // Quadrature nodes per axis: (coordinate, weight, bin, inside).
    let nodes: Vec<(f64, f64, usize, bool)> = segs
        .iter()
        .flat_map(|&(a, b, k, inside)| {
            GL8.iter()
                .map(move |&(t, w)| (0.5 * (a + b) + 0.5 * (b - a) * t, 0.5 * (b - a) * w, k, inside))
        })
        .collect();
    let m = nodes.len();
    let total_nodes = m.pow(d as u32);
    let nb = n.pow(d as u32);
    let parts: Vec<(Vec<f64>, f64)> = (0..total_nodes.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; nb];
            let mut inside = 0.0;
            for j in c * CHUNK..((c + 1) * CHUNK).min(total_nodes) {
                let mut rest = j;
                let mut x = Vector::zeros(d);
                let mut w = 1.0;
                let mut bin = 0;
                let mut all_in = true;
                for i in 0..d {
                    let (c, wi, k, ins) = nodes[rest % m];
                    rest /= m;
                    x[i] = c;
                    w *= wi;
                    bin = bin * n + k;
                    all_in &= ins;
                }
                let f = w * (phi0 - p.value(&x)).exp();
                acc[bin] += f;
                if all_in {
                    inside += f;
                }
            }
            (acc, inside)
        })
        .collect();
    let mut masses = vec![0.0; nb];
    let mut inside = 0.0;
    for (acc, ins) in &parts {
        masses.iter_mut().zip(acc).for_each(|(m, a)| *m += a);
        inside += ins;
    }
    let total: f64 = masses.iter().sum();
    (masses.iter().map(|m| m / total).collect(), inside / total)
}

/// A binned distance with its fold standard error and noise floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Expected value of the estimator when the sample is drawn from μ itself.
    pub floor: f64,
}

impl TvEstimate {
    /// Value with the noise floor removed, clamped at zero.
    pub fn corrected(&self) -> f64 {
        (self.value - self.floor).max(0.0)
    }
}

/// Sorted (bin, fold) keys of the ensemble, particle i in fold i mod 10.
fn keyed_bins(points: &[PhasePoint], binning: &Binning) -> Vec<(usize, usize)> {
    let mut keys: Vec<(usize, usize)> = points
        .par_iter()
        .enumerate()
        .map(|(i, z)| (binning.index(z), i % FOLDS))
        .collect();
    keys.par_sort_unstable();
    keys
}

/// Σ_b w_b|p̂_b − μ_b| from sorted keys, per fold and for the whole sample.
fn weighted_l1<W: Fn(usize) -> f64>(
    keys: &[(usize, usize)],
    fold_sizes: &[usize; FOLDS],
    binning: &Binning,
    w: W,
    wtotal: f64,
) -> (f64, [f64; FOLDS]) {
    let n = keys.len() as f64;
    let mut all = wtotal;
    let mut folds = [wtotal; FOLDS];
    let mut i = 0;
    while i < keys.len() {
        let bin = keys[i].0;
        let mut j = i;
        let mut per_fold = [0usize; FOLDS];
        while j < keys.len() && keys[j].0 == bin {
            per_fold[keys[j].1] += 1;
            j += 1;
        }
        let mu = binning.mass(bin);
        let wb = w(bin);
        all += wb * (((j - i) as f64 / n - mu).abs() - mu);
        for f in 0..FOLDS {
            if per_fold[f] > 0 {
                folds[f] += wb * ((per_fold[f] as f64 / fold_sizes[f] as f64 - mu).abs() - mu);
            }
        }
        i = j;
    }
    (all, folds)
}

/// E|X/n − μ| for X ~ Binomial(n, μ), by de Moivre's closed form
/// 2(m+1)C(n, m+1)μ^{m+1}(1−μ)^{n−m}/n with m = ⌊nμ⌋.
pub fn binomial_mad(n: usize, mu: f64) -> f64 {
    if !(mu > 0.0 && mu < 1.0) || n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let m = ((nf * mu).floor() as u64).min(n as u64 - 1);
    let ln = 2f64.ln()
        + ((m + 1) as f64).ln()
        + ln_binomial(n as u64, m + 1)
        + (m + 1) as f64 * mu.ln()
        + (n as u64 - m) as f64 * (-mu).ln_1p()
        - nf.ln();
    ln.exp()
}

fn estimate<W: Fn(usize) -> f64 + Sync>(
    points: &[PhasePoint],
    binning: &Binning,
    w: W,
    wtotal: f64,
) -> Result<TvEstimate> {
    if points.len() < FOLDS {
        return Err(Error::InsufficientSignal {
            usable: points.len(),
            required: FOLDS,
        });
    }
    let keys = keyed_bins(points, binning);
    let mut sizes = [0usize; FOLDS];
    for i in 0..points.len() {
        sizes[i % FOLDS] += 1;
    }
    let (value, folds) = weighted_l1(&keys, &sizes, binning, &w, wtotal);
    let mean = folds.iter().sum::<f64>() / FOLDS as f64;
    let var = folds.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (FOLDS - 1) as f64;
    let floor = ordered_sum(binning.spec.total_bins(), |b| {
        w(b) * binomial_mad(points.len(), binning.mass(b))
    });
    Ok(TvEstimate {
        value,
        stderr: (var / FOLDS as f64).sqrt(),
        floor,
    })
}

/// Binned ∫|f − μ| for the ensemble law f.
pub fn estimate_tv(points: &[PhasePoint], binning: &Binning) -> Result<TvEstimate> {
    estimate(points, binning, |_| 1.0, 1.0)
}

/// Binned ∫ w |f − μ| with w evaluated at bin centres.
pub fn estimate_weighted_tv(
    points: &[PhasePoint],
    eq: &EquilibriumSpec,
    weight: &Weight,
    binning: &Binning,
) -> Result<TvEstimate> {
    if *weight == Weight::Unit {
        return estimate_tv(points, binning);
    }
    let wtotal = binning.weighted_total(weight, eq);
    estimate(
        points,
        binning,
        |b| weight.value(&eq.domain, &binning.center(b)),
        wtotal,
    )
}

/// Binned ∫|f − g| between two ensembles.
pub fn estimate_tv_between(a: &[PhasePoint], b: &[PhasePoint], binning: &Binning) -> f64 {
    let count = |pts: &[PhasePoint]| {
        let mut idx: Vec<usize> = pts.par_iter().map(|z| binning.index(z)).collect();
        idx.par_sort_unstable();
        idx
    };
    let (ia, ib) = (count(a), count(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < ia.len() || j < ib.len() {
        let bin = match (ia.get(i), ib.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let (mut ca, mut cb) = (0usize, 0usize);
        while i < ia.len() && ia[i] == bin {
            ca += 1;
            i += 1;
        }
        while j < ib.len() && ib[j] == bin {
            cb += 1;
            j += 1;
        }
        sum += (ca as f64 / na - cb as f64 / nb).abs();
    }
    sum
}

/// Occupied bins of the ensemble with their counts, sorted by bin.
pub fn bin_counts(points: &[PhasePoint], binning: &Binning) -> Vec<(usize, u64)> {
    let mut idx: Vec<usize> = points.par_iter().map(|z| binning.index(z)).collect();
    idx.par_sort_unstable();
    let mut out: Vec<(usize, u64)> = Vec::new();
    for b in idx {
        match out.last_mut() {
            Some((last, c)) if *last == b => *c += 1,
            _ => out.push((b, 1)),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// d(t) = C e^{−λt}.
    Exponential,
    /// d(t) = C (1 + t)^{−p}.
    Algebraic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub model: ModelKind,
    /// λ̂ or p̂.
    pub rate: f64,
    pub rate_stderr: f64,
    pub prefactor: f64,
    /// Weighted coefficient of determination of the log-linear fit.
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

impl DecayFit {
    /// Two-sided 95% interval for the rate.
    pub fn rate_ci95(&self) -> (f64, f64) {
        let dof = (self.points - 2) as f64;
        let q = StudentsT::new(0.0, 1.0, dof).map_or(1.96, |t| t.inverse_cdf(0.975));
        (self.rate - q * self.rate_stderr, self.rate + q * self.rate_stderr)
    }

    pub fn predict(&self, t: f64) -> f64 {
        match self.model {
            ModelKind::Exponential => self.prefactor * (-self.rate * t).exp(),
            ModelKind::Algebraic => self.prefactor * (1.0 + t).powf(-self.rate),
        }
    }
}

/// Weighted least squares of ln d against t or ln(1 + t) on the leading run
/// of points with d ≥ 5·stderr. Weights (d/stderr)², or uniform if any
/// stderr is zero; the slope error is inflated by the reduced χ² when it
/// exceeds one.
pub fn fit_decay(times: &[f64], values: &[f64], stderrs: &[f64], model: ModelKind) -> Result<DecayFit> {
    if times.len() != values.len() || times.len() != stderrs.len() {
        return Err(Error::PreconditionViolated("fit inputs differ in length".into()));
    }
    let usable = times
        .iter()
        .zip(values)
        .zip(stderrs)
        .take_while(|((_, &v), &s)| v > 0.0 && v >= 5.0 * s)
        .count();
    if usable < 5 {
        return Err(Error::InsufficientSignal { usable, required: 5 });
    }
    let (t, v, s) = (&times[..usable], &values[..usable], &stderrs[..usable]);
    let unit = s.iter().any(|&e| e <= 0.0);
    let xs: Vec<f64> = t
        .iter()
        .map(|&t| match model {
            ModelKind::Exponential => t,
            ModelKind::Algebraic => t.ln_1p(),
        })
        .collect();
    let ys: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let ws: Vec<f64> = v
        .iter()
        .zip(s)
        .map(|(v, e)| if unit { 1.0 } else { (v / e).powi(2) })
        .collect();
    let sw: f64 = ws.iter().sum();
    let xm = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = ws
        .iter()
        .zip(&xs)
        .zip(&ys)
        .map(|((w, x), y)| w * (x - xm) * (y - ym))
        .sum();
    let syy: f64 = ws.iter().zip(&ys).map(|(w, y)| w * (y - ym).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::PreconditionViolated("fit abscissae are degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = ws
        .iter()
        .zip(&xs)
        .zip(&ys)
        .map(|((w, x), y)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let dof = (usable - 2) as f64;
    let scale = if unit { ss_res / dof } else { (ss_res / dof).max(1.0) };
    Ok(DecayFit {
        model,
        rate: -slope,
        rate_stderr: (scale / sxx).sqrt(),
        prefactor: intercept.exp(),
        r_squared: if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 },
        window: (t[0], t[usable - 1]),
        points: usable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{particle_rng, DomainSpec};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn torus_eq(d: usize) -> EquilibriumSpec {
        EquilibriumSpec::new(DomainSpec::torus(d), &quad()).unwrap()
    }

    #[test]
    fn bin_masses_sum_to_one() {
        for eq in [
            torus_eq(1),
            EquilibriumSpec::new(DomainSpec::whole_space(1, Potential::quadratic(1.0)), &quad()).unwrap(),
            EquilibriumSpec::new(DomainSpec::whole_space(2, Potential::subquadratic(1.0, 0.5)), &quad()).unwrap(),
        ] {
            let spec = BinningSpec::for_equilibrium(&eq, 16, &quad()).unwrap();
            let b = Binning::new(spec, &eq).unwrap();
            let total: f64 = (0..spec.total_bins()).map(|i| b.mass(i)).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
            assert!(b.coverage >= 0.9995 - 1e-9, "coverage {}", b.coverage);
        }
    }

    #[test]
    fn gaussian_position_masses_match_erf() {
        let eq = EquilibriumSpec::new(DomainSpec::whole_space(1, Potential::quadratic(1.0)), &quad()).unwrap();
        let spec = BinningSpec {
            dim: 1,
            bins_per_axis: 16,
            x_lo: -4.0,
            x_hi: 4.0,
            v_max: 4.0,
        };
        let std = Normal::standard();
        let b = Binning::new(spec, &eq).unwrap();
        for k in 0..16 {
            let lo = if k == 0 {
                f64::NEG_INFINITY
            } else {
                -4.0 + 0.5 * k as f64
            };
            let hi = if k == 15 {
                f64::INFINITY
            } else {
                -4.0 + 0.5 * (k + 1) as f64
            };
            let pos = std.cdf(hi) - std.cdf(lo);
            // Velocity bin 6 spans [−1, −0.5].
            let vel = std.cdf(-0.5) - std.cdf(-1.0);
            assert_relative_eq!(b.mass(k * 16 + 6), pos * vel, max_relative = 1e-9);
        }
    }

    #[test]
    fn narrow_box_is_rejected() {
        let eq = EquilibriumSpec::new(DomainSpec::whole_space(1, Potential::quadratic(1.0)), &quad()).unwrap();
        let spec = BinningSpec {
            dim: 1,
            bins_per_axis: 8,
            x_lo: -1.0,
            x_hi: 1.0,
            v_max: 4.0,
        };
        assert!(matches!(
            Binning::new(spec, &eq),
            Err(Error::BoxCoverageInsufficient { .. })
        ));
    }

    #[test]
    fn index_and_center_round_trip() {
        let eq = torus_eq(2);
        let spec = BinningSpec::for_equilibrium(&eq, 8, &quad()).unwrap();
        let b = Binning::new(spec, &eq).unwrap();
        for i in (0..spec.total_bins()).step_by(37) {
            assert_eq!(b.index(&b.center(i)), i);
        }
    }

    #[test]
    fn dirac_is_at_distance_two() {
        let eq = torus_eq(1);
        let b = Binning::new(BinningSpec::for_equilibrium(&eq, 64, &quad()).unwrap(), &eq).unwrap();
        let z = PhasePoint::new(Vector::from_slice(&[0.5]), Vector::from_slice(&[1.0]));
        let est = estimate_tv(&vec![z; 1000], &b).unwrap();
        assert_relative_eq!(est.value, 2.0 - 2.0 * b.mass(b.index(&z)), epsilon = 1e-12);
        assert!(est.value > 1.99);
    }

    #[test]
    fn disjoint_ensembles_are_at_distance_two() {
        let eq = torus_eq(1);
        let b = Binning::new(BinningSpec::for_equilibrium(&eq, 32, &quad()).unwrap(), &eq).unwrap();
        let mut rng = particle_rng(5, 0);
        let mut box_law = |lo: f64| -> Vec<PhasePoint> {
            (0..5000)
                .map(|_| {
                    PhasePoint::new(
                        Vector::from_slice(&[lo + 0.2 * rng.random::<f64>()]),
                        Vector::from_slice(&[rng.random::<f64>()]),
                    )
                })
                .collect()
        };
        let (a, c) = (box_law(0.1), box_law(0.6));
        assert_relative_eq!(estimate_tv_between(&a, &c, &b), 2.0, epsilon = 1e-3);
    }

    #[test]
    fn binomial_mad_matches_direct_sum() {
        use statrs::distribution::{Binomial, Discrete};
        for n in [1usize, 7, 50, 400] {
            for mu in [1e-4, 0.013, 0.25, 0.5, 0.9] {
                let b = Binomial::new(mu, n as u64).unwrap();
                let direct: f64 = (0..=n as u64)
                    .map(|k| b.pmf(k) * (k as f64 / n as f64 - mu).abs())
                    .sum();
                assert_relative_eq!(binomial_mad(n, mu), direct, max_relative = 1e-10);
            }
        }
        assert_eq!(binomial_mad(10, 0.0), 0.0);
        assert_eq!(binomial_mad(10, 1.0), 0.0);
        // Large nμ: the normal limit √(2μ(1−μ)/(πn)).
        let (n, mu) = (1_000_000, 0.3);
        let normal = (2.0 * mu * (1.0 - mu) / (std::f64::consts::PI * n as f64)).sqrt();
        assert_relative_eq!(binomial_mad(n, mu), normal, max_relative = 1e-3);
    }

    #[test]
    fn equilibrium_sample_sits_at_floor_and_halves() {
        let eq = torus_eq(1);
        let b = Binning::new(BinningSpec::for_equilibrium(&eq, 32, &quad()).unwrap(), &eq).unwrap();
        let small = estimate_tv(&eq.sample(1, 100_000).unwrap(), &b).unwrap();
        let large = estimate_tv(&eq.sample(2, 400_000).unwrap(), &b).unwrap();
        assert!((small.value - small.floor).abs() < 0.1 * small.floor, "{small:?}");
        let ratio = small.value / large.value;
        assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn weighted_dominates_and_unit_reduces() {
        let eq = EquilibriumSpec::new(DomainSpec::whole_space(1, Potential::quadratic(1.0)), &quad()).unwrap();
        let b = Binning::new(BinningSpec::for_equilibrium(&eq, 32, &quad()).unwrap(), &eq).unwrap();
        let pts: Vec<PhasePoint> = eq
            .sample(3, 20_000)
            .unwrap()
            .into_iter()
            .map(|z| PhasePoint::new(z.x.scale(0.7), z.v))
            .collect();
        let tv = estimate_tv(&pts, &b).unwrap();
        assert_eq!(estimate_weighted_tv(&pts, &eq, &Weight::Unit, &b).unwrap(), tv);
        for w in [
            Weight::Energy,
            Weight::Kinetic,
            Weight::Confined,
            Weight::ConfinedLinear,
        ] {
            let wt = estimate_weighted_tv(&pts, &eq, &w, &b).unwrap();
            assert!(wt.value >= tv.value, "{w:?}");
        }
    }

    #[test]
    fn weighted_equilibrium_sample_sits_at_weighted_floor() {
        let eq = EquilibriumSpec::new(DomainSpec::whole_space(1, Potential::quadratic(1.0)), &quad()).unwrap();
        let b = Binning::new(BinningSpec::for_equilibrium(&eq, 32, &quad()).unwrap(), &eq).unwrap();
        let pts = eq.sample(9, 200_000).unwrap();
        let tv = estimate_tv(&pts, &b).unwrap();
        let wt = estimate_weighted_tv(&pts, &eq, &Weight::Confined, &b).unwrap();
        // The floor weights bins by w√μ, so the ratio exceeds E_μ w.
        let mean_w = Weight::Confined.equilibrium_mean(&eq, &quad()).unwrap();
        let ratio = wt.value / tv.value;
        assert!(ratio > mean_w, "ratio {ratio}, E w = {mean_w}");
        assert_relative_eq!(ratio, wt.floor / tv.floor, max_relative = 0.15);
        assert!((wt.value - wt.floor).abs() < 0.15 * wt.floor);
    }

    #[test]
    fn exact_models_are_recovered() {
        let times: Vec<f64> = (0..20).map(|i| 0.5 * i as f64).collect();
        let zeros = vec![0.0; times.len()];
        let exp: Vec<f64> = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let fit = fit_decay(&times, &exp, &zeros, ModelKind::Exponential).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-6);
        assert_relative_eq!(fit.prefactor, 3.0, max_relative = 1e-6);
        let alg: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let fit = fit_decay(&times, &alg, &zeros, ModelKind::Algebraic).unwrap();
        assert!((fit.rate - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noisy_fit_interval_covers_truth() {
        let times: Vec<f64> = (0..20).map(|i| 0.5 * i as f64).collect();
        let mut covered = 0;
        for rep in 0..100 {
            let mut rng = particle_rng(77, rep);
            let truth: Vec<f64> = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
            let vals: Vec<f64> = truth
                .iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v * (1.0 + 0.05 * e)
                })
                .collect();
            let se: Vec<f64> = vals.iter().map(|v| 0.05 * v).collect();
            let fit = fit_decay(&times, &vals, &se, ModelKind::Exponential).unwrap();
            assert!((fit.rate - 0.7).abs() < 0.05 * 0.7);
            let (lo, hi) = fit.rate_ci95();
            if lo <= 0.7 && 0.7 <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 88, "coverage {covered}/100");
    }

    #[test]
    fn fit_window_stops_at_noise() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let vals: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let se = vec![0.01; 10];
        // e^{-t} ≥ 0.05 only for t ≤ 2: three points.
        assert!(matches!(
            fit_decay(&times, &vals, &se, ModelKind::Exponential),
            Err(Error::InsufficientSignal { usable: 3, .. })
        ));
        let se = vec![1e-4; 10];
        let fit = fit_decay(&times, &vals, &se, ModelKind::Exponential).unwrap();
        // e^{-t} ≥ 5e-4 up to t = 7.
        assert_eq!(fit.window, (0.0, 7.0));
    }
}
