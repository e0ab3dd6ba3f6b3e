//! Forward exponential Radon transform and its dual.
//!
//! Lines are `{x : x.theta = s}` with `theta = (cos phi, sin phi)`. The
//! weight is `exp(mu x.theta_perp)` with `theta_perp = (-sin phi, cos phi)`,
//! the +90 degree rotation; flipping that orientation is the same as
//! negating `mu`.

use std::sync::OnceLock;

use crate::error::{invalid, ErtError, Result};
use crate::model::{norm, ImageGrid, Phantom, PhantomComponent, Point, Sinogram};
use crate::quad::{adaptive, Tolerance};

/// Below this `|mu w|` the chord weight uses its `mu -> 0` limit.
const SINH_SERIES_CUTOFF: f64 = 1e-8;

/// Absolute tolerance of the bump line quadrature.
pub const BUMP_LINE_TOL: f64 = 1e-10;

/// A line on the cylinder: direction angle and signed offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    phi: f64,
    s: f64,
}

impl Ray {
    pub fn new(phi: f64, s: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&s) {
            return Err(invalid(format!("ray offset {s} outside [-1, 1]")));
        }
        if !phi.is_finite() {
            return Err(invalid("ray angle is not finite"));
        }
        Ok(Self { phi, s })
    }

    /// Constructor for values already known to be in range.
    pub(crate) fn new_unchecked(phi: f64, s: f64) -> Self {
        debug_assert!((-1.0..=1.0).contains(&s));
        Self { phi, s }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn theta(&self) -> Point {
        let (sin, cos) = self.phi.sin_cos();
        [cos, sin]
    }

    pub fn theta_perp(&self) -> Point {
        let (sin, cos) = self.phi.sin_cos();
        [-sin, cos]
    }

    /// The point `s theta + t theta_perp`.
    pub fn point(&self, t: f64) -> Point {
        let (sin, cos) = self.phi.sin_cos();
        [self.s * cos - t * sin, self.s * sin + t * cos]
    }
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `2 sinh(mu w) / mu`, the exponentially weighted length of a chord of
/// half-length `w` centered on the weight origin.
pub fn weighted_chord(mu: f64, w: f64) -> f64 {
    let z = mu * w;
    if z.abs() < SINH_SERIES_CUTOFF {
        // series 2w (1 + z^2/6); the correction is below rounding here
        2.0 * w * (1.0 + z * z / 6.0)
    } else {
        2.0 * z.sinh() / mu
    }
}

/// Exponential Radon transform of an analytic phantom along one ray.
///
/// Disks use the closed form. Bumps are integrated numerically along their
/// chord with absolute tolerance [`BUMP_LINE_TOL`].
pub fn forward_point(phantom: &Phantom, ray: Ray, mu: f64) -> f64 {
    let theta = ray.theta();
    let perp = ray.theta_perp();
    phantom
        .components()
        .iter()
        .map(|c| component_line_integral(c, theta, perp, ray.s, mu))
        .sum()
}

fn component_line_integral(c: &PhantomComponent, theta: Point, perp: Point, s: f64, mu: f64) -> f64 {
    let center = c.center();
    let a = c.extent();
    let d = s - dot(center, theta);
    if d.abs() >= a {
        return 0.0;
    }
    let w = ((a - d) * (a + d)).sqrt();
    let shift = (mu * dot(center, perp)).exp();
    match *c {
        PhantomComponent::Disk { amplitude, .. } => amplitude * shift * weighted_chord(mu, w),
        PhantomComponent::Bump { amplitude, .. } => amplitude * shift * bump_chord(a, w, mu, BUMP_LINE_TOL),
    }
}

/// `integral_{-w}^{w} exp(mu t) eta(sqrt(d^2 + t^2) / a) dt` with
/// `w^2 = a^2 - d^2`, for the unit-amplitude bump profile `eta`.
///
/// With `t = w tanh(v)` the profile becomes `exp(1 - A cosh^2 v)`,
/// `A = (a / w)^2`, which decays double-exponentially in `v`. The even
/// integrand is integrated on `[0, inf)` by the trapezoid rule, halving the
/// step until successive estimates agree to `tol`. If the halving budget
/// runs out, adaptive Gauss-Legendre in the original variable takes over.
pub fn bump_chord(a: f64, w: f64, mu: f64, tol: f64) -> f64 {
    let big_a = (a / w) * (a / w);
    let mw = mu * w;
    let peak = (1.0 - big_a).exp() * mw.cosh();
    if 2.0 * w * peak < 1e-3 * tol {
        return 0.0;
    }
    let table = tanh_table();
    let integrand = |k: usize| -> f64 {
        let (u, c2, sech2) = table[k];
        let base = 1.0 - big_a * c2;
        ((base + mw * u).exp() + (base - mw * u).exp()) * sech2
    };
    // beyond v with A sinh^2 v = 60 the integrand is below exp(-60) of its peak
    let cutoff = (60.0 / big_a).sqrt().asinh() * TANH_STEPS_PER_UNIT as f64;
    let last = (cutoff.ceil() as usize).min(table.len() - 1);
    let mut stride = TANH_STEPS_PER_UNIT / 4;
    let mut sum = 0.5 * integrand(0);
    let mut k = stride;
    while k <= last {
        sum += integrand(k);
        k += stride;
    }
    let mut estimate = sum * stride as f64 / TANH_STEPS_PER_UNIT as f64;
    while stride > 1 {
        let half = stride / 2;
        let mut k = half;
        while k <= last {
            sum += integrand(k);
            k += stride;
        }
        stride = half;
        let refined = sum * stride as f64 / TANH_STEPS_PER_UNIT as f64;
        let change = (refined - estimate).abs();
        estimate = refined;
        if w * change <= tol && stride <= TANH_STEPS_PER_UNIT / 8 {
            return w * estimate;
        }
    }
    bump_chord_adaptive(big_a, w, mw, tol)
}

fn bump_chord_adaptive(big_a: f64, w: f64, mw: f64, tol: f64) -> f64 {
    let q = adaptive(
        |u| {
            let one_minus = 1.0 - u * u;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let base = 1.0 - big_a / one_minus;
            (base + mw * u).exp() + (base - mw * u).exp()
        },
        0.0,
        1.0,
        Tolerance::absolute(tol / w),
    );
    w * q.value
}

const TANH_STEPS_PER_UNIT: usize = 64;
const TANH_RANGE: usize = 4;

/// `(tanh v, cosh^2 v, sech^2 v)` at `v = k / 64`, `k = 0..=256`.
fn tanh_table() -> &'static [(f64, f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=TANH_STEPS_PER_UNIT * TANH_RANGE)
            .map(|k| {
                let v = k as f64 / TANH_STEPS_PER_UNIT as f64;
                let c = v.cosh();
                (v.tanh(), c * c, 1.0 / (c * c))
            })
            .collect()
    })
}

/// Exponential Radon transform of a sampled image along one ray.
///
/// Composite midpoint rule with step at most half a pixel over the chord of
/// the unit disk, sampling the image bilinearly.
pub fn forward_grid_point(image: &ImageGrid, ray: Ray, mu: f64) -> f64 {
    let half = (1.0 - ray.s * ray.s).max(0.0).sqrt();
    if half == 0.0 {
        return 0.0;
    }
    let h_target = 0.5 * image.pixel_size();
    let steps = ((2.0 * half) / h_target).ceil().max(1.0) as usize;
    let h = 2.0 * half / steps as f64;
    let mut acc = 0.0;
    for i in 0..steps {
        let t = -half + (i as f64 + 0.5) * h;
        acc += (mu * t).exp() * image.bilinear(ray.point(t));
    }
    acc * h
}

/// Anything with a line integral along a ray.
pub trait RaySource: Sync {
    fn ray_integral(&self, ray: Ray, mu: f64) -> f64;
}

impl RaySource for Phantom {
    fn ray_integral(&self, ray: Ray, mu: f64) -> f64 {
        forward_point(self, ray, mu)
    }
}

impl RaySource for ImageGrid {
    fn ray_integral(&self, ray: Ray, mu: f64) -> f64 {
        forward_grid_point(self, ray, mu)
    }
}

/// Samples the transform of `source` on the standard sinogram lattice.
///
/// Every cell is computed independently, so the result does not depend on
/// the thread schedule.
pub fn forward_sinogram<S: RaySource + ?Sized>(source: &S, n_theta: usize, n_s: usize, mu: f64) -> Result<Sinogram> {
    if !mu.is_finite() {
        return Err(invalid("attenuation is not finite"));
    }
    Sinogram::from_fn(n_theta, n_s, mu, |phi, s| source.ray_integral(Ray::new_unchecked(phi, s), mu))
}

/// Dual transform `integral over S^1 of exp(mu x.theta_perp) g(theta, x.theta)`
/// by the trapezoid rule over the sinogram angles.
pub fn dual_point(g: &Sinogram, x: Point, mu: f64) -> Result<f64> {
    if norm(x) > 1.0 + 1e-12 {
        return Err(ErtError::OutOfDomain(format!("({}, {})", x[0], x[1])));
    }
    Ok(dual_unchecked(g, x, mu))
}

pub(crate) fn dual_unchecked(g: &Sinogram, x: Point, mu: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..g.n_theta() {
        let (sin, cos) = g.phi(j).sin_cos();
        let s = x[0] * cos + x[1] * sin;
        let perp = -x[0] * sin + x[1] * cos;
        acc += (mu * perp).exp() * g.interp(j, s);
    }
    acc * g.dphi()
}
