//! Random-design observations `Y_i = T_mu f(theta_i, s_i) + eps_i` and the
//! kernel estimator
//! `f*_n(x) = (1/n) sum_i exp(-mu x.theta_i_perp) K_rho(x.theta_i - s_i) Y_i`.
//!
//! Design points are uniform on `S^1 x [-1, 1]` (density `1/(4 pi)`), which
//! supplies the `1/(4 pi)` of the reconstruction formula, so the estimator
//! needs no normalization beyond `1/n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, ErtError, Result};
use crate::ert::{forward_point, Ray};
use crate::filter::{chord_moment_trig, kernel_value, FilterParams};
use crate::model::{norm, ImageGrid, Phantom, Point};
use crate::numeric::pairwise_sum;
use crate::quad::{adaptive, Tolerance};
use crate::rng::{CounterStream, ItemRng, DESIGN_STREAM, NOISE_STREAM};

/// Items generated per parallel task; any value gives the same output.
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    None,
}

/// Additive noise with zero mean and variance `sigma^2`.
///
/// For `Uniform` the half-width is `sigma * sqrt(3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("noise level must be a nonnegative number, got {sigma}")));
        }
        Ok(Self { kind, sigma: if kind == NoiseKind::None { 0.0 } else { sigma } })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn uniform(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Uniform, sigma)
    }

    pub fn none() -> Self {
        Self { kind: NoiseKind::None, sigma: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn half_width(&self) -> f64 {
        self.sigma * 3f64.sqrt()
    }

    /// Draws one value; consumes exactly the item's two draws.
    pub fn sample(&self, rng: &mut ItemRng) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => self.sigma * rng.normal(),
            NoiseKind::Uniform => {
                let (u, _) = rng.pair();
                self.half_width() * (2.0 * u - 1.0)
            }
            NoiseKind::None => 0.0,
        }
    }

    /// Log density, or `None` for the degenerate noiseless model.
    pub fn log_density(&self, u: f64) -> Option<f64> {
        match self.kind {
            NoiseKind::Gaussian if self.sigma > 0.0 => {
                let z = u / self.sigma;
                Some(-0.5 * z * z - (self.sigma * (2.0 * PI).sqrt()).ln())
            }
            NoiseKind::Uniform if self.sigma > 0.0 => {
                let a = self.half_width();
                Some(if u.abs() <= a { -(2.0 * a).ln() } else { f64::NEG_INFINITY })
            }
            _ => None,
        }
    }

    /// The constant `I0` in `KL(G, G(. + v)) <= I0 v^2`; infinite when no
    /// finite constant exists.
    pub fn kl_constant(&self) -> Option<f64> {
        match self.kind {
            NoiseKind::Gaussian if self.sigma > 0.0 => Some(1.0 / (2.0 * self.variance())),
            NoiseKind::Uniform if self.sigma > 0.0 => Some(f64::INFINITY),
            _ => None,
        }
    }
}

/// Draws `n` design points uniform on `[0, 2 pi) x [-1, 1]`.
///
/// Point `i` is a function of `(seed, i)` alone.
pub fn sample_design(n: usize, seed: u64) -> Result<Vec<Ray>> {
    if n < 1 {
        return Err(invalid("design needs at least one point"));
    }
    let stream = CounterStream::new(seed, DESIGN_STREAM);
    Ok(chunked(n, |start, len| {
        stream.generate(start as u64, len, |rng| {
            let (u, v) = rng.pair();
            Ray::new_unchecked(2.0 * PI * u, 2.0 * v - 1.0)
        })
    }))
}

fn chunked<T: Send>(n: usize, f: impl Fn(usize, usize) -> Vec<T> + Sync) -> Vec<T> {
    let chunks: Vec<Vec<T>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            f(start, CHUNK.min(n - start))
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Noisy exponential Radon data at random design points.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    rays: Vec<Ray>,
    y: Vec<f64>,
    mu: f64,
    seed: u64,
    noise: NoiseModel,
    /// `(sin phi, cos phi)` per ray.
    trig: Vec<(f64, f64)>,
}

impl ObservationSet {
    pub fn new(rays: Vec<Ray>, y: Vec<f64>, mu: f64, seed: u64, noise: NoiseModel) -> Result<Self> {
        if rays.is_empty() {
            return Err(invalid("observation set is empty"));
        }
        if rays.len() != y.len() {
            return Err(invalid(format!("{} rays but {} values", rays.len(), y.len())));
        }
        if !mu.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observation values must be finite"));
        }
        let trig = rays.iter().map(|r| r.phi().sin_cos()).collect();
        Ok(Self { rays, y, mu, seed, noise, trig })
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }
}

/// `Y_i = T_mu f(ray_i) + eps_i`, with noise drawn from the noise stream of
/// `seed` (independent of the design stream).
pub fn observe(phantom: &Phantom, rays: &[Ray], mu: f64, noise: NoiseModel, seed: u64) -> Result<ObservationSet> {
    if rays.is_empty() {
        return Err(invalid("no rays to observe"));
    }
    let stream = CounterStream::new(seed, NOISE_STREAM);
    let y = chunked(rays.len(), |start, len| {
        let mut rng = stream.at(start as u64);
        rays[start..start + len]
            .iter()
            .map(|&r| {
                let eps = noise.sample(&mut rng);
                forward_point(phantom, r, mu) + eps
            })
            .collect()
    });
    ObservationSet::new(rays.to_vec(), y, mu, seed, noise)
}

/// Design and observations from one seed.
pub fn simulate(phantom: &Phantom, n: usize, mu: f64, noise: NoiseModel, seed: u64) -> Result<ObservationSet> {
    let rays = sample_design(n, seed)?;
    observe(phantom, &rays, mu, noise, seed)
}

/// Bandwidth for pointwise risk, `alpha n^{-1/(2 beta + 1)}`.
pub fn bandwidth_mse(n: u64, beta: f64, alpha: f64) -> f64 {
    alpha * (n as f64).powf(-1.0 / (2.0 * beta + 1.0))
}

/// Bandwidth for integrated risk, `alpha n^{-1/(2 beta + 3)}`.
pub fn bandwidth_mise(n: u64, beta: f64, alpha: f64) -> f64 {
    alpha * (n as f64).powf(-1.0 / (2.0 * beta + 3.0))
}

/// Estimator settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub mu: f64,
    pub rho_n: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl EstimatorConfig {
    pub fn new(mu: f64, rho_n: f64, beta: f64, alpha: f64) -> Result<Self> {
        if !(beta > 1.0) {
            return Err(invalid(format!("beta must exceed 1, got {beta}")));
        }
        if !(alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        FilterParams::new(rho_n, mu)?;
        Ok(Self { mu, rho_n, beta, alpha })
    }

    /// Pointwise-risk bandwidth for `n` observations.
    pub fn for_mse(n: u64, mu: f64, beta: f64, alpha: f64) -> Result<Self> {
        Self::new(mu, bandwidth_mse(n.max(1), beta, alpha), beta, alpha)
    }

    /// Integrated-risk bandwidth for `n` observations.
    pub fn for_mise(n: u64, mu: f64, beta: f64, alpha: f64) -> Result<Self> {
        Self::new(mu, bandwidth_mise(n.max(1), beta, alpha), beta, alpha)
    }

    pub fn filter(&self) -> FilterParams {
        FilterParams::new(self.rho_n, self.mu).expect("validated at construction")
    }
}

fn check_mu(obs: &ObservationSet, cfg: &EstimatorConfig) -> Result<()> {
    if (obs.mu - cfg.mu).abs() > 1e-12 * obs.mu.abs().max(1.0) {
        return Err(invalid(format!("estimator mu {} does not match data mu {}", cfg.mu, obs.mu)));
    }
    Ok(())
}

/// Kernel estimate at `x`, summed pairwise in index order.
pub fn estimator_eval(obs: &ObservationSet, cfg: &EstimatorConfig, x: Point) -> Result<f64> {
    check_mu(obs, cfg)?;
    if norm(x) > 1.0 + 1e-12 {
        return Err(ErtError::OutOfDomain(format!("({}, {})", x[0], x[1])));
    }
    let p = cfg.filter();
    let mu = cfg.mu;
    let sum = pairwise_sum(obs.len(), &mut |i| {
        let (sin, cos) = obs.trig[i];
        let along = x[0] * cos + x[1] * sin;
        let perp = -x[0] * sin + x[1] * cos;
        (-mu * perp).exp() * kernel_value(&p, along - obs.rays[i].s()) * obs.y[i]
    });
    Ok(sum / obs.len() as f64)
}

/// Observations processed together by [`estimate_grid`].
const GRID_BLOCK: usize = 512;

/// Kernel estimate at every pixel center inside the unit ball (zero
/// outside).
///
/// Uses the separable structure of the terms on a tensor grid: for pixel
/// `(x_j, y_k)` the weight factors as `exp(mu x_j sin phi) exp(-mu y_k cos phi)`
/// and the kernel phases `exp(i c (x.theta - s))` as products of per-column
/// and per-row factors, so only `O(n_side)` transcendental calls are made
/// per observation. Each pixel accumulates its terms in index order.
pub fn estimate_grid(obs: &ObservationSet, cfg: &EstimatorConfig, n_side: usize) -> Result<ImageGrid> {
    check_mu(obs, cfg)?;
    if n_side < 2 {
        return Err(invalid(format!("grid side must be at least 2, got {n_side}")));
    }
    let p = cfg.filter();
    let mu = cfg.mu;
    let b = p.band_edge();
    let m = mu.abs();
    let inv_rho2 = 1.0 / (p.rho() * p.rho());
    let h = 2.0 / n_side as f64;
    let coords: Vec<f64> = (0..n_side).map(|j| -1.0 + (j as f64 + 0.5) * h).collect();
    let inside: Vec<bool> = (0..n_side * n_side)
        .map(|idx| {
            let (x, y) = (coords[idx / n_side], coords[idx % n_side]);
            x * x + y * y <= 1.0
        })
        .collect();

    let mut acc = vec![0.0f64; n_side * n_side];
    // per observation, per row/column: weight factor and the two phases
    #[derive(Clone, Copy, Default)]
    struct Factor {
        w: f64,
        cb: (f64, f64),
        cm: (f64, f64),
        along: f64,
    }
    let mut cols = vec![Factor::default(); GRID_BLOCK * n_side];
    let mut rows = vec![Factor::default(); GRID_BLOCK * n_side];
    for start in (0..obs.len()).step_by(GRID_BLOCK) {
        let len = GRID_BLOCK.min(obs.len() - start);
        let fill = |out: &mut [Factor], first: bool| {
            out.par_chunks_mut(n_side).take(len).enumerate().for_each(|(i, dst)| {
                let (sin, cos) = obs.trig[start + i];
                let s = obs.rays[start + i].s();
                for (slot, &c) in dst.iter_mut().zip(&coords) {
                    // first coordinate x_j carries the offset -s
                    let (along, perp) = if first { (c * cos - s, -c * sin) } else { (c * sin, c * cos) };
                    let (sb, cb) = (b * along).sin_cos();
                    let (sm, cm) = (m * along).sin_cos();
                    *slot = Factor { w: (-mu * perp).exp(), cb: (cb, sb), cm: (cm, sm), along };
                }
            });
        };
        fill(&mut cols, true);
        fill(&mut rows, false);
        let y = &obs.y[start..start + len];
        acc.par_chunks_mut(n_side).enumerate().for_each(|(j, dst)| {
            for (k, slot) in dst.iter_mut().enumerate() {
                if !inside[j * n_side + k] {
                    continue;
                }
                let mut sum = *slot;
                for (i, &yi) in y.iter().enumerate() {
                    let fx = cols[i * n_side + j];
                    let fy = rows[i * n_side + k];
                    let u = fx.along + fy.along;
                    let (cb, sb) = cmul(fx.cb, fy.cb);
                    let gb = chord_moment_trig(u * b, sb, cb);
                    let inner = if m == 0.0 {
                        0.0
                    } else {
                        let (cm, sm) = cmul(fx.cm, fy.cm);
                        m * m * (gb - chord_moment_trig(u * m, sm, cm))
                    };
                    let kern = (gb * inv_rho2 + inner) / PI;
                    sum += fx.w * fy.w * kern * yi;
                }
                *slot = sum;
            }
        });
    }
    let n = obs.len() as f64;
    ImageGrid::new(n_side, acc.into_iter().map(|v| v / n).collect())
}

#[inline]
fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Kullback distance between the noise law and its shift by `v`, with the
/// quadratic bound `I0 v^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlGap {
    pub kl: f64,
    pub bound: f64,
}

/// `KL(G, G(. + v))` (closed form for Gaussian noise, quadrature otherwise)
/// and the bound `I0 v^2`.
pub fn kl_gap_check(noise: &NoiseModel, v: f64) -> Result<KlGap> {
    let i0 = noise
        .kl_constant()
        .ok_or_else(|| ErtError::Unsupported("noise model has no density".into()))?;
    let kl = match noise.kind {
        NoiseKind::Gaussian => v * v / (2.0 * noise.variance()),
        _ => kl_divergence_numeric(noise, v)?,
    };
    let bound = if v == 0.0 { 0.0 } else { i0 * v * v };
    Ok(KlGap { kl, bound })
}

/// `integral ln(g(u) / g(u + v)) g(u) du` by adaptive quadrature over the
/// support of `g` (truncated at 40 sigma for Gaussian noise).
pub fn kl_divergence_numeric(noise: &NoiseModel, v: f64) -> Result<f64> {
    if noise.log_density(0.0).is_none() {
        return Err(ErtError::Unsupported("noise model has no density".into()));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    // the shifted uniform density vanishes on part of the support
    if noise.kind == NoiseKind::Uniform {
        return Ok(f64::INFINITY);
    }
    let (lo, hi) = (-40.0 * noise.sigma, 40.0 * noise.sigma);
    let q = adaptive(
        |u| {
            let lp = noise.log_density(u).unwrap_or(f64::NEG_INFINITY);
            let lq = noise.log_density(u + v).unwrap_or(f64::NEG_INFINITY);
            if lp == f64::NEG_INFINITY {
                0.0
            } else {
                lp.exp() * (lp - lq)
            }
        },
        lo,
        hi,
        Tolerance::absolute(1e-14).with_rel(1e-12),
    );
    Ok(q.value)
}
