//! Independent reference computations used to validate the fast paths.
//!
//! Nothing here shares code with `orthant.rs` or calls `erf`: the quadrature
//! routines integrate the Gaussian density directly with adaptive
//! Gauss-Kronrod rules, and the Monte-Carlo routines count samples.

use super::normal::LN_SQRT_2PI;
use super::orthant::OrthantInputs;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
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

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol || depth == 0 || (b - a).abs() < 1e-12 {
        return val;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`, starting from
/// `panels` equal sub-intervals so narrow features are not missed.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + w * i as f64;
            let hi = if i + 1 == panels { b } else { lo + w };
            adapt(&f, lo, hi, tol / panels as f64, 30)
        })
        .sum()
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Beyond this many standard deviations the density contributes < 1e-19.
const TAIL: f64 = 9.0;

fn unit_panels(a: f64, b: f64) -> usize {
    ((b - a).ceil() as usize).max(1)
}

/// Phi(x) by integrating the density on `[-40, x]`.
pub fn quad_norm_cdf(x: f64) -> f64 {
    let b = x.min(40.0);
    integrate(density, -40.0, b, unit_panels(-40.0, b), 1e-15)
}

/// `P(Z >= lo)` for standard normal Z, by quadrature.
fn quad_upper_tail(lo: f64) -> f64 {
    if lo >= TAIL {
        return 0.0;
    }
    let a = lo.max(-TAIL);
    integrate(density, a, TAIL, unit_panels(a, TAIL), 1e-15)
}

/// `P(X >= h, Y >= k)` by nested adaptive quadrature of the bivariate
/// density: the inner integral runs over `y` conditional on `x`.
pub fn quad_orthant_upper(h: f64, k: f64, rho: f64) -> f64 {
    if rho.abs() >= 1.0 {
        // degenerate: the density is concentrated on a line
        return if rho > 0.0 {
            quad_upper_tail(h.max(k))
        } else {
            (quad_upper_tail(h) - quad_upper_tail(-k)).max(0.0)
        };
    }
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let inner = |x: f64| quad_upper_tail((k - rho * x) / s);
    let a = h.max(-TAIL);
    integrate(|x| density(x) * inner(x), a, TAIL, 4 * unit_panels(a, TAIL), 1e-13)
}

/// `P(Y >= k | X >= h)` by quadrature, valid deep in the upper tail.
///
/// With `x = h + u` the truncated density is proportional to
/// `exp(-h u - u^2 / 2)`, so both numerator and normaliser are integrated in
/// that form.
pub fn quad_orthant_conditional(h: f64, k: f64, rho: f64) -> f64 {
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let upper = -h + (h * h + 92.0).sqrt();
    let weight = |u: f64| (-h * u - 0.5 * u * u).exp();
    let inner = |u: f64| {
        let x = h + u;
        if s == 0.0 {
            let hit = if rho > 0.0 { x >= k } else { -x >= k };
            return if hit { 1.0 } else { 0.0 };
        }
        quad_upper_tail((k - rho * x) / s)
    };
    let num = integrate(|u| weight(u) * inner(u), 0.0, upper, 32, 1e-14);
    let den = integrate(weight, 0.0, upper, 32, 1e-15);
    num / den
}

/// A Monte-Carlo estimate and its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl McEstimate {
    fn from_count(hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        Self { estimate: p, std_error: (p * (1.0 - p) / n as f64).sqrt() }
    }

    /// `|value - estimate| <= sigmas * std_error`, with the standard error
    /// floored at one sample's worth so that empty counts stay comparable.
    pub fn agrees(&self, value: f64, sigmas: f64, n: u64) -> bool {
        let se = self.std_error.max(1.0 / n as f64);
        (value - self.estimate).abs() <= sigmas * se
    }
}

/// Monte-Carlo estimate of the upper orthant probability from correlated
/// Gaussian pairs `(z1, rho z1 + sqrt(1 - rho^2) z2)`.
pub fn mc_orthant_oracle(inputs: OrthantInputs, n_samples: u64, seed: u64) -> McEstimate {
    assert!(n_samples >= 1, "n_samples must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = ((1.0 - inputs.rho) * (1.0 + inputs.rho)).max(0.0).sqrt();
    let mut hits = 0u64;
    for _ in 0..n_samples {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let y = inputs.rho * z1 + s * z2;
        if z1 >= inputs.h && y >= inputs.k {
            hits += 1;
        }
    }
    McEstimate::from_count(hits, n_samples)
}

/// One Monte-Carlo pass that estimates the orthant probability at every
/// `(h, k)` pair of a grid for a fixed `rho`. Row-major in `(hs, ks)`.
///
/// `hs` and `ks` must be sorted ascending.
pub fn mc_orthant_grid(hs: &[f64], ks: &[f64], rho: f64, n_samples: u64, seed: u64) -> Vec<McEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = ((1.0 - rho) * (1.0 + rho)).max(0.0).sqrt();
    // cell (i, j) counts samples with hs[i] <= x < hs[i+1] and ks[j] <= y < ks[j+1]
    let (nh, nk) = (hs.len(), ks.len());
    let mut cells = vec![0u64; nh * nk];
    for _ in 0..n_samples {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let y = rho * z1 + s * z2;
        let i = hs.partition_point(|&t| t <= z1);
        let j = ks.partition_point(|&t| t <= y);
        if i > 0 && j > 0 {
            cells[(i - 1) * nk + (j - 1)] += 1;
        }
    }
    // suffix sums turn cell counts into orthant counts
    let mut counts = vec![0u64; nh * nk];
    for i in (0..nh).rev() {
        for j in (0..nk).rev() {
            let mut c = cells[i * nk + j];
            if i + 1 < nh {
                c += counts[(i + 1) * nk + j];
            }
            if j + 1 < nk {
                c += counts[i * nk + j + 1];
            }
            if i + 1 < nh && j + 1 < nk {
                c -= counts[(i + 1) * nk + j + 1];
            }
            counts[i * nk + j] = c;
        }
    }
    counts.into_iter().map(|c| McEstimate::from_count(c, n_samples)).collect()
}

/// Direct N-dimensional Monte-Carlo estimate of the Gaussian measure of
/// `V(a) ∩ V(b)` where `V(x) = {y : (y - x)^T x > 0}`, for many pairs at once
/// from one shared sample stream.
pub fn mc_halfspace_joint(pairs: &[(Vec<f64>, Vec<f64>)], n_samples: u64, seed: u64) -> Vec<McEstimate> {
    let dim = pairs.first().map(|p| p.0.len()).unwrap_or(0);
    let thresholds: Vec<(f64, f64)> = pairs
        .iter()
        .map(|(a, b)| (a.iter().map(|v| v * v).sum(), b.iter().map(|v| v * v).sum()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0u64; pairs.len()];
    let mut z = vec![0.0f64; dim];
    for _ in 0..n_samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for (p, ((a, b), (ta, tb))) in pairs.iter().zip(&thresholds).enumerate() {
            let da: f64 = a.iter().zip(&z).map(|(x, y)| x * y).sum();
            if da > *ta {
                let db: f64 = b.iter().zip(&z).map(|(x, y)| x * y).sum();
                if db > *tb {
                    hits[p] += 1;
                }
            }
        }
    }
    hits.into_iter().map(|c| McEstimate::from_count(c, n_samples)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_of_polynomial_is_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1, 1e-14);
        assert!((v - 0.0).abs() < 1e-13);
    }

    #[test]
    fn density_integrates_to_one() {
        assert!((quad_norm_cdf(40.0) - 1.0).abs() < 1e-14);
        assert!((quad_norm_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn independent_quadrant_by_quadrature() {
        assert!((quad_orthant_upper(0.0, 0.0, 0.0) - 0.25).abs() < 1e-12);
        let sf1 = 1.0 - quad_norm_cdf(1.0);
        assert!((quad_orthant_upper(1.0, 1.0, 1.0) - sf1).abs() < 1e-12);
    }

    #[test]
    fn mc_matches_simple_cases() {
        let n = 1_000_000;
        let e = mc_orthant_oracle(OrthantInputs::new(0.0, 0.0, 0.0).unwrap(), n, 7);
        assert!(e.agrees(0.25, 4.0, n));
        let again = mc_orthant_oracle(OrthantInputs::new(0.0, 0.0, 0.0).unwrap(), n, 7);
        assert_eq!(e, again);
    }

    #[test]
    fn grid_counts_match_single_point_definition() {
        let hs = [-1.0, 0.0, 0.5];
        let ks = [-0.5, 0.25];
        let grid = mc_orthant_grid(&hs, &ks, 0.3, 200_000, 3);
        for (i, &h) in hs.iter().enumerate() {
            for (j, &k) in ks.iter().enumerate() {
                let q = quad_orthant_upper(h, k, 0.3);
                assert!(grid[i * ks.len() + j].agrees(q, 5.0, 200_000));
            }
        }
    }
}
