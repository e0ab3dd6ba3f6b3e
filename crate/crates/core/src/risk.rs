//! Monte Carlo risk of the kernel estimator and log-log rate fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fbp::SmoothedPhantom;
use crate::model::{eval_phantom, norm, ImageGrid, Phantom, Point};
use crate::numeric::{mean_var, pairwise_sum};
use crate::rng::derive_seed;
use crate::stochastic::{
    bandwidth_mise, bandwidth_mse, estimate_grid, estimator_eval, simulate, EstimatorConfig, NoiseModel,
    ObservationSet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Squared error at a single point.
    Mse,
    /// Squared L2 error over the unit ball.
    Mise,
}

impl Criterion {
    /// Exponent of `n` in the optimal squared rate over `H(beta, L)`.
    pub fn theory_slope(self, beta: f64) -> f64 {
        match self {
            Criterion::Mse => -(2.0 * beta - 2.0) / (2.0 * beta + 1.0),
            Criterion::Mise => -2.0 * beta / (2.0 * beta + 3.0),
        }
    }

    pub fn bandwidth(self, n: u64, beta: f64, alpha: f64) -> f64 {
        match self {
            Criterion::Mse => bandwidth_mse(n, beta, alpha),
            Criterion::Mise => bandwidth_mise(n, beta, alpha),
        }
    }
}

fn default_alpha() -> f64 {
    1.0
}

fn default_x0() -> Point {
    [0.1, 0.2]
}

fn default_n_side() -> usize {
    32
}

fn default_noise() -> NoiseModel {
    NoiseModel { kind: crate::stochastic::NoiseKind::Gaussian, sigma: 0.05 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskStudyConfig {
    pub phantom: Phantom,
    pub mu: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub n_values: Vec<u64>,
    pub trials: usize,
    /// Evaluation point for the pointwise criterion.
    #[serde(default = "default_x0")]
    pub x0: Point,
    /// Grid side for the integrated criterion.
    #[serde(default = "default_n_side")]
    pub n_side: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub criterion: Criterion,
}

impl RiskStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(invalid("n_values is empty"));
        }
        if self.n_values.iter().any(|&n| n < 10) {
            return Err(invalid("every sample size must be at least 10"));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_values must be strictly increasing"));
        }
        if self.trials < 2 {
            return Err(invalid(format!("need at least 2 trials, got {}", self.trials)));
        }
        if !(norm(self.x0) <= 1.0) {
            return Err(invalid("x0 must lie in the unit ball"));
        }
        if self.n_side < 2 {
            return Err(invalid("n_side must be at least 2"));
        }
        NoiseModel::new(self.noise.kind, self.noise.sigma)?;
        for &n in &self.n_values {
            self.estimator(n)?;
        }
        Ok(())
    }

    fn estimator(&self, n: u64) -> Result<EstimatorConfig> {
        let rho = self.criterion.bandwidth(n, self.beta, self.alpha);
        EstimatorConfig::new(self.mu, rho, self.beta, self.alpha)
    }

    fn observations(&self, n: u64, trial: usize) -> Result<ObservationSet> {
        let seed = derive_seed(self.master_seed, &[n, trial as u64]);
        simulate(&self.phantom, n as usize, self.mu, self.noise, seed)
    }
}

/// Risk at one sample size; `risk = bias_sq + variance` up to rounding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub n: u64,
    pub rho_n: f64,
    pub risk: f64,
    pub stderr: f64,
    pub bias_sq: f64,
    pub variance: f64,
}

/// Least-squares fit of `ln risk = intercept + slope ln n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theory_slope: f64,
}

/// Runs the study named by `cfg.criterion`.
pub fn run_study(cfg: &RiskStudyConfig) -> Result<Vec<RiskRow>> {
    match cfg.criterion {
        Criterion::Mse => run_mse_study(cfg),
        Criterion::Mise => run_mise_study(cfg),
    }
}

fn check_criterion(cfg: &RiskStudyConfig, want: Criterion) -> Result<()> {
    if cfg.criterion != want {
        return Err(invalid(format!("config criterion is {:?}, expected {want:?}", cfg.criterion)));
    }
    cfg.validate()
}

fn sample_stderr(sq_errors: &[f64]) -> f64 {
    let m = sq_errors.len() as f64;
    let (_, var) = mean_var(sq_errors);
    (var * m / (m - 1.0)).sqrt() / m.sqrt()
}

/// Pointwise risk `E (f*_n(x0) - f(x0))^2` along `cfg.n_values`.
pub fn run_mse_study(cfg: &RiskStudyConfig) -> Result<Vec<RiskRow>> {
    check_criterion(cfg, Criterion::Mse)?;
    let truth = eval_phantom(&cfg.phantom, cfg.x0);
    cfg.n_values
        .iter()
        .map(|&n| {
            let est = cfg.estimator(n)?;
            let values = (0..cfg.trials)
                .into_par_iter()
                .map(|t| estimator_eval(&cfg.observations(n, t)?, &est, cfg.x0))
                .collect::<Result<Vec<f64>>>()?;
            let sq: Vec<f64> = values.iter().map(|v| (v - truth) * (v - truth)).collect();
            let (mean, variance) = mean_var(&values);
            Ok(RiskRow {
                n,
                rho_n: est.rho_n,
                risk: mean_var(&sq).0,
                stderr: sample_stderr(&sq),
                bias_sq: (mean - truth) * (mean - truth),
                variance,
            })
        })
        .collect()
}

/// Pixels of an `n_side` grid whose centers lie in the unit ball.
fn ball_pixels(n_side: usize) -> Result<Vec<usize>> {
    let grid = ImageGrid::zeros(n_side)?;
    Ok((0..n_side * n_side).filter(|&i| norm(grid.center(i / n_side, i % n_side)) <= 1.0).collect())
}

/// Integrated risk `E sum_pixels (f*_n - f)^2 h^2` over pixels in the
/// unit ball, along `cfg.n_values`.
pub fn run_mise_study(cfg: &RiskStudyConfig) -> Result<Vec<RiskRow>> {
    check_criterion(cfg, Criterion::Mise)?;
    let n_side = cfg.n_side;
    let pixels = ball_pixels(n_side)?;
    let grid = ImageGrid::zeros(n_side)?;
    let area = grid.pixel_area();
    let truth: Vec<f64> = pixels
        .iter()
        .map(|&i| eval_phantom(&cfg.phantom, grid.center(i / n_side, i % n_side)))
        .collect();
    cfg.n_values
        .iter()
        .map(|&n| {
            let est = cfg.estimator(n)?;
            let images = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let img = estimate_grid(&cfg.observations(n, t)?, &est, n_side)?;
                    Ok(pixels.iter().map(|&i| img.values()[i]).collect::<Vec<f64>>())
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            let sq: Vec<f64> = images
                .iter()
                .map(|img| area * pairwise_sum(img.len(), &mut |p| (img[p] - truth[p]).powi(2)))
                .collect();
            let mut bias_sq = 0.0;
            let mut variance = 0.0;
            let mut column = vec![0.0; cfg.trials];
            for (p, &f) in truth.iter().enumerate() {
                for (c, img) in column.iter_mut().zip(&images) {
                    *c = img[p];
                }
                let (mean, var) = mean_var(&column);
                bias_sq += area * (mean - f) * (mean - f);
                variance += area * var;
            }
            Ok(RiskRow {
                n,
                rho_n: est.rho_n,
                risk: mean_var(&sq).0,
                stderr: sample_stderr(&sq),
                bias_sq,
                variance,
            })
        })
        .collect()
}

/// Ordinary least squares of `ln risk` on `ln n`.
pub fn fit_rate(rows: &[RiskRow], theory_slope: f64) -> Result<RateFit> {
    if rows.len() < 3 {
        return Err(invalid(format!("need at least 3 rows to fit a rate, got {}", rows.len())));
    }
    if let Some(r) = rows.iter().find(|r| !(r.risk > 0.0)) {
        return Err(invalid(format!("risk at n = {} is {}, cannot take logarithms", r.n, r.risk)));
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.risk.ln()).collect();
    let (mx, vx) = mean_var(&x);
    let (my, vy) = mean_var(&y);
    if vx == 0.0 {
        return Err(invalid("all rows have the same n"));
    }
    let m = x.len() as f64;
    let cov = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / m;
    let slope = cov / vx;
    let intercept = my - slope * mx;
    let r_squared = if vy == 0.0 { 1.0 } else { (cov * cov / (vx * vy)).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared, theory_slope })
}

/// One bandwidth of a bias-variance sweep at fixed `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub rho: f64,
    /// Squared error of the Monte Carlo mean.
    pub bias_sq: f64,
    /// Squared error of the smoothed phantom, the exact expectation.
    pub smoothing_bias_sq: f64,
    pub variance: f64,
    /// Standard error of `variance`.
    pub variance_stderr: f64,
}

/// Bias and variance of the pointwise estimate at `cfg.x0` for each
/// bandwidth, reusing the same `cfg.trials` observation sets across
/// bandwidths.
pub fn bias_variance_profile(cfg: &RiskStudyConfig, rho_values: &[f64], n: u64) -> Result<Vec<ProfileRow>> {
    if rho_values.is_empty() || rho_values.iter().any(|&r| !(r > 0.0)) {
        return Err(invalid("bandwidths must be positive"));
    }
    if cfg.trials < 2 {
        return Err(invalid("need at least 2 trials"));
    }
    if n < 1 {
        return Err(invalid("n must be positive"));
    }
    let ests = rho_values
        .iter()
        .map(|&rho| EstimatorConfig::new(cfg.mu, rho, cfg.beta, cfg.alpha))
        .collect::<Result<Vec<_>>>()?;
    let truth = eval_phantom(&cfg.phantom, cfg.x0);
    // values[t][r]
    let values = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let obs = cfg.observations(n, t)?;
            ests.iter().map(|e| estimator_eval(&obs, e, cfg.x0)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let m = cfg.trials as f64;
    rho_values
        .iter()
        .enumerate()
        .map(|(r, &rho)| {
            let column: Vec<f64> = values.iter().map(|v| v[r]).collect();
            let (mean, variance) = mean_var(&column);
            let dev4: Vec<f64> = column.iter().map(|v| (v - mean).powi(4)).collect();
            let m4 = mean_var(&dev4).0;
            let smoothed = SmoothedPhantom::new(&cfg.phantom, rho)?.eval(cfg.x0);
            Ok(ProfileRow {
                rho,
                bias_sq: (mean - truth) * (mean - truth),
                smoothing_bias_sq: (smoothed - truth) * (smoothed - truth),
                variance,
                variance_stderr: ((m4 - variance * variance).max(0.0) / m).sqrt(),
            })
        })
        .collect()
}
