//! Scalar numerical utilities: adaptive Gauss–Kronrod quadrature, bracketed
//! root finding, golden-section search, Halton points and log-space helpers.

use crate::vector::Vector;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("quadrature did not reach tolerance {tol:e} (estimate {value:e}, error {error:e})")]
    NonConvergedQuadrature { value: f64, error: f64, tol: f64 },
    #[error("root not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },
}

/// Tolerances and budget for adaptive quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadratureConfig {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        QuadratureConfig {
            abs_tol,
            ..Default::default()
        }
    }
}

// Kronrod 15-point nodes (nonnegative half) and weights, with the embedded
// 7-point Gauss weights on the odd-indexed nodes.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WK[7] * fc;
    let mut rg = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive G7–K15 quadrature of `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64, NumericsError> {
    if a == b {
        return Ok(0.0);
    }
    let (first, err) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, first, err)];
    let mut total = first;
    let mut total_err = err;
    while total_err > cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        if intervals.len() >= cfg.max_intervals {
            return Err(NumericsError::NonConvergedQuadrature {
                value: total,
                error: total_err,
                tol: cfg.abs_tol,
            });
        }
        let (idx, _) =
            intervals.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (i, iv)| {
                    if iv.3 > best.1 {
                        (i, iv.3)
                    } else {
                        best
                    }
                },
            );
        let (lo, hi, val, e) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(NumericsError::NonConvergedQuadrature {
                value: total,
                error: total_err,
                tol: cfg.abs_tol,
            });
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - val;
        total_err += e1 + e2 - e;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        if total_err < 0.0 {
            total_err = intervals.iter().map(|iv| iv.3).sum();
        }
    }
    // Re-sum for accuracy after many incremental updates.
    Ok(intervals.iter().map(|iv| iv.2).sum())
}

/// Integral of `f` over `[a, b]` split at the interior `breaks`.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64, NumericsError> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|p| *p > a && *p < b).collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut edges = vec![a];
    edges.extend(pts);
    edges.push(b);
    let n = (edges.len() - 1) as f64;
    let sub = QuadratureConfig {
        abs_tol: cfg.abs_tol / n,
        ..*cfg
    };
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += integrate(&mut f, w[0], w[1], &sub)?;
    }
    Ok(total)
}

/// Integral of `f` over `[a, ∞)` through the substitution x = a + t/(1−t).
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, NumericsError> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let y = f(a + t / s) / (s * s);
            if y.is_finite() {
                y
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        cfg,
    )
}

/// Integral of `f` over `(−∞, b]`.
pub fn integrate_from_neg_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, NumericsError> {
    integrate_to_infinity(|x| f(2.0 * b - x), b, cfg)
}

/// Integral over an interval whose endpoints may be infinite.
pub fn integrate_interval<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, NumericsError> {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate(f, a, b, cfg),
        (true, false) => integrate_to_infinity(f, a, cfg),
        (false, true) => integrate_from_neg_infinity(f, b, cfg),
        (false, false) => {
            let half = QuadratureConfig {
                abs_tol: 0.5 * cfg.abs_tol,
                ..*cfg
            };
            Ok(integrate_from_neg_infinity(&mut f, 0.0, &half)? + integrate_to_infinity(&mut f, 0.0, &half)?)
        }
    }
}

/// Root of `f` on `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64, NumericsError> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(NumericsError::NotBracketed { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest `t ≥ 0` with `g(t) ≤ level` for a nondecreasing `g`, searching by
/// doubling then bisection. Returns `+∞` when `g` never exceeds `level`
/// below `t_cap`.
pub fn monotone_level_crossing<F: FnMut(f64) -> f64>(mut g: F, level: f64, t_cap: f64) -> f64 {
    let mut hi = 1.0;
    while g(hi) <= level {
        hi *= 2.0;
        if hi > t_cap {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Maximizer of a unimodal `f` on `[a, b]` by golden-section search.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Maximum of `f` over `[a, b]`: a uniform scan of `n` cells followed by
/// golden-section refinement around the best cell.
pub fn scan_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> (f64, f64) {
    let h = (b - a) / n as f64;
    let mut best = (a, f(a));
    for i in 1..=n {
        let x = a + h * i as f64;
        let y = f(x);
        if y > best.1 {
            best = (x, y);
        }
    }
    let lo = (best.0 - h).max(a);
    let hi = (best.0 + h).min(b);
    let refined = golden_max(&mut f, lo, hi, 1e-10 * (1.0 + best.0.abs()));
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// The `i`-th point of the Halton sequence in `[0,1)^dim`, `dim ≤ 8`.
pub fn halton(i: u64, dim: usize) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (k, slot) in out.iter_mut().enumerate().take(dim) {
        *slot = radical_inverse(i + 1, PRIMES[k]);
    }
    out
}

/// Maps a point of `[0,1)^d` onto the closed ball of radius `r` in R^d,
/// preserving uniformity (radius via the d-th root, direction via the
/// remaining coordinates).
pub fn cube_to_ball(u: &[f64], d: usize, r: f64) -> Vector {
    let rad = r * u[0].powf(1.0 / d as f64);
    match d {
        1 => Vector::from_slice(&[if u[1] < 0.5 { -rad } else { rad }]),
        2 => {
            let th = 2.0 * std::f64::consts::PI * u[1];
            Vector::from_slice(&[rad * th.cos(), rad * th.sin()])
        }
        _ => {
            let z = 2.0 * u[1] - 1.0;
            let ph = 2.0 * std::f64::consts::PI * u[2];
            let s = (1.0 - z * z).max(0.0).sqrt();
            Vector::from_slice(&[rad * s * ph.cos(), rad * s * ph.sin(), rad * z])
        }
    }
}

/// Number of unit-cube coordinates consumed by [`cube_to_ball`].
pub fn ball_coords(d: usize) -> usize {
    match d {
        1 | 2 => 2,
        _ => 3,
    }
}

/// Surface area |S^{n−1}| of the unit sphere in R^n.
pub fn sphere_area(n: usize) -> f64 {
    let h = 0.5 * n as f64;
    2.0 * std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// Volume of the ball of radius `r` in R^n.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    sphere_area(n) * r.powi(n as i32) / n as f64
}

/// ln |B_r| in R^n, finite for radii whose volume would overflow.
pub fn ln_ball_volume(n: usize, r: f64) -> f64 {
    let h = 0.5 * n as f64;
    h * std::f64::consts::PI.ln() - statrs::function::gamma::ln_gamma(h + 1.0) + n as f64 * r.ln()
}

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// ln(1 − e^x) for x < 0.
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// ln(−ln(1 − g)) given ln g, for g ∈ (0, 1); stable when g underflows.
pub fn ln_neg_log1m(ln_g: f64) -> f64 {
    if ln_g < -30.0 {
        // −ln(1−g) = g + g²/2 + …, relative correction below 1e-13.
        ln_g + (0.5 * ln_g.exp()).ln_1p()
    } else {
        (-(-ln_g.exp()).ln_1p()).ln()
    }
}
