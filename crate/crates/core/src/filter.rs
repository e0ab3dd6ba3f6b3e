//! The band-limited reconstruction kernel
//! `K(s) = (1/pi) integral_{|mu|}^{B} r cos(s r) dr`, `B = sqrt(1/rho^2 + mu^2)`,
//! whose Fourier transform is `|t|` on the band `|mu| < |t| < B`.

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::model::Sinogram;

/// Bandwidth and attenuation of the kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterParams {
    rho: f64,
    mu: f64,
}

impl FilterParams {
    /// Requires `rho > 0` and either `mu = 0` or `0 < |mu| < 1/rho`.
    pub fn new(rho: f64, mu: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(invalid(format!("bandwidth must be positive, got {rho}")));
        }
        if !mu.is_finite() {
            return Err(invalid("attenuation is not finite"));
        }
        if mu.abs() * rho >= 1.0 {
            return Err(invalid(format!("need |mu| < 1/rho, got mu={mu}, rho={rho}")));
        }
        Ok(Self { rho, mu })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Upper band edge `B`.
    pub fn band_edge(&self) -> f64 {
        (1.0 / (self.rho * self.rho) + self.mu * self.mu).sqrt()
    }

    /// `integral |K~(t)|^2 dt` over both halves of the band, `(2/3)(B^3 - |mu|^3)`.
    pub fn fourier_energy(&self) -> f64 {
        2.0 * self.fourier_energy_one_sided()
    }

    /// The same integral over `t > 0` only, `(1/3)(B^3 - |mu|^3)`.
    pub fn fourier_energy_one_sided(&self) -> f64 {
        let b = self.band_edge();
        let m = self.mu.abs();
        (b * b * b - m * m * m) / 3.0
    }
}

/// `(x sin x + cos x - 1) / x^2`, continuous at 0 with value 1/2.
fn chord_moment(x: f64) -> f64 {
    if x * x < 0.25 {
        chord_moment_series(x)
    } else {
        let (sin, cos) = x.sin_cos();
        chord_moment_trig(x, sin, cos)
    }
}

/// [`chord_moment`] with `sin x` and `cos x` supplied by the caller.
#[inline]
pub(crate) fn chord_moment_trig(x: f64, sin: f64, cos: f64) -> f64 {
    let x2 = x * x;
    if x2 < 0.25 {
        chord_moment_series(x)
    } else {
        (x * sin + cos - 1.0) / x2
    }
}

#[inline]
fn chord_moment_series(x: f64) -> f64 {
    let x2 = x * x;
    // sum_k (-1)^k (2k+1) x^{2k} / (2k+2)!
    let mut term = 0.5;
    let mut sum = 0.5;
    for k in 1..10 {
        let kf = k as f64;
        term *= -x2 / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
        sum += term * (2.0 * kf + 1.0);
    }
    sum
}

/// Closed-form kernel value.
///
/// With `G(x) = (x sin x + cos x - 1)/x^2` the antiderivative gives
/// `K(s) = (B^2 G(sB) - mu^2 G(s|mu|)) / pi`, evaluated as
/// `(G(sB)/rho^2 + mu^2 (G(sB) - G(s|mu|))) / pi` so the `s -> 0` limit
/// `1/(2 pi rho^2)` carries no cancellation.
pub fn kernel_value(p: &FilterParams, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0 / (2.0 * PI * p.rho * p.rho);
    }
    let gb = chord_moment(s * p.band_edge());
    let inner = if p.mu == 0.0 { 0.0 } else { p.mu * p.mu * (gb - chord_moment(s * p.mu.abs())) };
    (gb / (p.rho * p.rho) + inner) / PI
}

/// Fourier transform of the kernel: `|t|` inside the band, else 0.
pub fn kernel_fourier(p: &FilterParams, t: f64) -> f64 {
    let a = t.abs();
    if a > p.mu.abs() && a < p.band_edge() {
        a
    } else {
        0.0
    }
}

/// Filters every angle row: `(K * g)(s_k) ~ ds sum_j K(s_k - s_j) g(s_j)`.
///
/// Direct summation. The kernel is tabulated once on the `n_s` lattice
/// offsets. Data outside `[-1, 1]` are zero, so no padding is needed.
pub fn convolve_sinogram(g: &Sinogram, p: &FilterParams) -> Result<Sinogram> {
    if (g.mu() - p.mu).abs() > 1e-12 * g.mu().abs().max(1.0) {
        return Err(invalid(format!(
            "sinogram attenuation {} does not match filter attenuation {}",
            g.mu(),
            p.mu
        )));
    }
    let n = g.n_s();
    let ds = g.ds();
    let table: Vec<f64> = (0..n).map(|m| ds * kernel_value(p, m as f64 * ds)).collect();
    let mut out = vec![0.0; g.values().len()];
    out.par_chunks_mut(n).zip(g.values().par_chunks(n)).for_each(|(dst, row)| {
        for (k, slot) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &v) in row.iter().enumerate() {
                acc += table[k.abs_diff(j)] * v;
            }
            *slot = acc;
        }
    });
    g.with_values(out)
}

/// `I_rho(t)`: 1 for `|t| < 1/rho`, else 0.
pub fn indicator(rho: f64, t: f64) -> f64 {
    if t.abs() < 1.0 / rho {
        1.0
    } else {
        0.0
    }
}

/// `|I_rho(t) - 1|`, which is 0 or 1.
pub fn indicator_gap(rho: f64, t: f64) -> f64 {
    (indicator(rho, t) - 1.0).abs()
}

/// Power bound `(|t| rho)^beta` on the indicator gap.
pub fn gap_power_bound(rho: f64, t: f64, beta: f64) -> f64 {
    (t.abs() * rho).powf(beta)
}

/// Saturating bound `(2 |t| rho / (1 + |t| rho))^beta` on the indicator gap.
pub fn gap_ratio_bound(rho: f64, t: f64, beta: f64) -> f64 {
    let x = t.abs() * rho;
    (2.0 * x / (1.0 + x)).powf(beta)
}
