//! Filtered backprojection `f_rho = (1/4pi) T#_{-mu}(K_rho * T_mu f)` and the
//! band-limited smoothing `delta^{1/rho} * f` it reproduces exactly.
//!
//! The approximate delta is normalized as
//! `delta^{1/rho}(x) = (2pi)^{-2} integral_{|t| < 1/rho} exp(i x.t) dt`,
//! the two-dimensional inverse transform of the disk indicator, which is
//! radial with value `J1(r/rho) / (2 pi rho r)`.

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::filter::{convolve_sinogram, FilterParams};
use crate::model::{norm, ImageGrid, Phantom, PhantomComponent, Point, Sinogram};
use crate::quad::{adaptive, GaussLegendre, Tolerance};

/// Reconstructs `f_rho` on an `n_side` grid from exponential Radon data.
///
/// Pixels outside the unit ball are set to zero.
pub fn reconstruct(g: &Sinogram, p: &FilterParams, n_side: usize) -> Result<ImageGrid> {
    let filtered = convolve_sinogram(g, p)?;
    backproject(&filtered, -p.mu(), 1.0 / (4.0 * PI), n_side)
}

/// `scale * T#_mu g` at every pixel center inside the unit ball.
pub fn backproject(g: &Sinogram, mu: f64, scale: f64, n_side: usize) -> Result<ImageGrid> {
    let trig: Vec<(f64, f64)> = (0..g.n_theta()).map(|j| g.phi(j).sin_cos()).collect();
    let dphi = g.dphi();
    ImageGrid::from_fn(n_side, |x| {
        if x[0] * x[0] + x[1] * x[1] > 1.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (j, &(sin, cos)) in trig.iter().enumerate() {
            let s = x[0] * cos + x[1] * sin;
            let perp = -x[0] * sin + x[1] * cos;
            acc += (mu * perp).exp() * g.interp(j, s);
        }
        scale * acc * dphi
    })
}

/// Bessel function of the first kind, order 0.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order 1.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// Radial profile of the approximate delta at radius `r`.
pub fn approx_delta(rho: f64, r: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid(format!("bandwidth must be positive, got {rho}")));
    }
    if !(r >= 0.0) {
        return Err(invalid(format!("radius must be nonnegative, got {r}")));
    }
    Ok(delta_profile(rho, r))
}

fn delta_profile(rho: f64, r: f64) -> f64 {
    if r <= 1e-12 {
        1.0 / (4.0 * PI * rho * rho)
    } else {
        bessel_j1(r / rho) / (2.0 * PI * rho * r)
    }
}

/// `(delta^{1/rho} * f)(x)` for an analytic phantom.
///
/// See [`SmoothedPhantom`] for the method; build one directly when many
/// points share the same bandwidth.
pub fn approx_smoothed(phantom: &Phantom, rho: f64, x: Point) -> Result<f64> {
    Ok(SmoothedPhantom::new(phantom, rho)?.eval(x))
}

/// Evaluator for `delta^{1/rho} * f` at a fixed bandwidth.
///
/// Each component is radial about its center, so its transform is a Hankel
/// transform `F(k) = 2 pi integral_0^R p(r) J0(k r) r dr`, and the
/// band-limited inverse reduces to
/// `(1/2pi) integral_0^{1/rho} F(k) J0(k |x - c|) k dk`.
/// `F` is tabulated once at composite Gauss-Legendre nodes on `[0, 1/rho]`.
#[derive(Clone, Debug)]
pub struct SmoothedPhantom {
    rho: f64,
    nodes: Vec<f64>,
    /// Per component: center and `w_i F(k_i) k_i / (2 pi)` at every node.
    weighted: Vec<(Point, Vec<f64>)>,
}

const HANKEL_PANEL: f64 = 0.5;
const HANKEL_ORDER: usize = 10;

impl SmoothedPhantom {
    pub fn new(phantom: &Phantom, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(invalid(format!("bandwidth must be positive, got {rho}")));
        }
        let k_max = 1.0 / rho;
        let panels = (k_max / HANKEL_PANEL).ceil().max(1.0) as usize;
        let rule = GaussLegendre::new(HANKEL_ORDER);
        let mut nodes = Vec::with_capacity(panels * HANKEL_ORDER);
        let mut weights = Vec::with_capacity(panels * HANKEL_ORDER);
        for i in 0..panels {
            let a = k_max * i as f64 / panels as f64;
            let b = k_max * (i + 1) as f64 / panels as f64;
            for (k, w) in rule.mapped(a, b) {
                nodes.push(k);
                weights.push(w);
            }
        }
        let weighted = phantom
            .components()
            .iter()
            .map(|c| {
                let vals: Vec<f64> = nodes
                    .par_iter()
                    .zip(&weights)
                    .map(|(&k, &w)| w * hankel(c, k) * k / (2.0 * PI))
                    .collect();
                (c.center(), vals)
            })
            .collect();
        Ok(Self { rho, nodes, weighted })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.weighted
            .iter()
            .map(|(c, vals)| {
                let d = norm([x[0] - c[0], x[1] - c[1]]);
                self.nodes.iter().zip(vals).map(|(&k, &v)| v * bessel_j0(k * d)).sum::<f64>()
            })
            .sum()
    }

    /// Values at the pixel centers of an `n_side` grid; zero outside the
    /// unit ball, matching [`reconstruct`].
    pub fn image(&self, n_side: usize) -> Result<ImageGrid> {
        ImageGrid::from_fn(n_side, |x| {
            if x[0] * x[0] + x[1] * x[1] > 1.0 {
                0.0
            } else {
                self.eval(x)
            }
        })
    }
}

/// `2 pi integral_0^R p(r) J0(k r) r dr` for one component.
fn hankel(c: &PhantomComponent, k: f64) -> f64 {
    match *c {
        PhantomComponent::Disk { radius, amplitude, .. } => {
            if k * radius < 1e-8 {
                PI * radius * radius * amplitude
            } else {
                2.0 * PI * amplitude * radius * bessel_j1(k * radius) / k
            }
        }
        PhantomComponent::Bump { .. } => {
            let r_max = c.extent();
            let q = adaptive(
                |r| c.radial_value(r * r) * bessel_j0(k * r) * r,
                0.0,
                r_max,
                Tolerance::absolute(1e-14).with_rel(1e-12),
            );
            2.0 * PI * q.value
        }
    }
}

/// `(delta^{1/rho} * f)(x)` by direct two-dimensional quadrature in polar
/// coordinates around `x`, to absolute tolerance `tol`.
///
/// Independent of [`SmoothedPhantom`]: it integrates the spatial profile of
/// the delta against the phantom rather than working in the frequency
/// domain. Slow; meant for spot checks.
pub fn approx_smoothed_spatial(phantom: &Phantom, rho: f64, x: Point, tol: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(invalid(format!("bandwidth must be positive, got {rho}")));
    }
    let mut total = 0.0;
    for c in phantom.components() {
        let center = c.center();
        let dist = norm([x[0] - center[0], x[1] - center[1]]);
        let r_sup = c.extent();
        let lo = (dist - r_sup).max(0.0);
        let hi = dist + r_sup;
        let ring = |r: f64| ring_integral(c, dist, r, tol);
        // the kernel r delta(r) = J1(r/rho) / (2 pi rho)
        let q = adaptive(
            |r| bessel_j1(r / rho) / (2.0 * PI * rho) * ring(r),
            lo,
            hi,
            Tolerance::absolute(tol),
        );
        total += q.value;
    }
    Ok(total)
}

/// `integral_0^{2pi} p(|x + r e(a) - c|) da` with `|x - c| = dist`.
fn ring_integral(c: &PhantomComponent, dist: f64, r: f64, tol: f64) -> f64 {
    let r_sup = c.extent();
    // squared distance to the center along the ring: dist^2 + r^2 + 2 r dist cos a
    let base = dist * dist + r * r;
    let cross = 2.0 * r * dist;
    // the ring is inside the support for a in (a0, pi] (by symmetry, doubled)
    let a0 = if cross == 0.0 {
        if base < r_sup * r_sup {
            0.0
        } else {
            return 0.0;
        }
    } else {
        let cos_a0 = (r_sup * r_sup - base) / cross;
        if cos_a0 <= -1.0 {
            return 0.0;
        }
        if cos_a0 >= 1.0 {
            0.0
        } else {
            cos_a0.acos()
        }
    };
    match *c {
        PhantomComponent::Disk { amplitude, .. } => 2.0 * (PI - a0) * amplitude,
        PhantomComponent::Bump { .. } => {
            let q = adaptive(
                |a| c.radial_value((base + cross * a.cos()).max(0.0)),
                a0,
                PI,
                Tolerance::absolute(tol * 1e-2),
            );
            2.0 * q.value
        }
    }
}
