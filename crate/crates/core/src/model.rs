//! Phantoms, sampled grids and the Sobolev smoothness class.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, ErtError, Result};

/// A point in the plane.
pub type Point = [f64; 2];

/// Slack allowed when checking that a component fits in the unit ball.
const SUPPORT_SLACK: f64 = 1e-12;

pub(crate) fn norm(x: Point) -> f64 {
    x[0].hypot(x[1])
}

/// The class of functions supported in the unit ball whose
/// `(1 + |xi|^2)^beta`-weighted Fourier energy is at most `big_l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClass {
    beta: f64,
    big_l: f64,
}

impl SmoothnessClass {
    pub fn new(beta: f64, big_l: f64) -> Result<Self> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(invalid(format!("smoothness exponent must exceed 1, got {beta}")));
        }
        if !(big_l > 0.0) || !big_l.is_finite() {
            return Err(invalid(format!("class bound must be positive, got {big_l}")));
        }
        Ok(Self { beta, big_l })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn big_l(&self) -> f64 {
        self.big_l
    }

    /// Whether a sampled function's weighted energy is within the bound.
    pub fn contains(&self, image: &ImageGrid) -> Result<bool> {
        Ok(sobolev_weight_integral(image, self.beta)? <= self.big_l)
    }

    /// Certifies membership of `phantom` by measuring its weighted energy on
    /// two grids and returning the class with `L` set to 1.1 times the finer
    /// measurement. Fails if the two grids disagree by more than 1%.
    pub fn certify(phantom: &Phantom, beta: f64, n_side: usize) -> Result<Self> {
        let coarse = sobolev_weight_integral(&rasterize(phantom, n_side)?, beta)?;
        let fine = sobolev_weight_integral(&rasterize(phantom, 2 * n_side)?, beta)?;
        if !fine.is_finite() || (fine - coarse).abs() > 0.01 * fine.abs().max(f64::MIN_POSITIVE) {
            return Err(ErtError::Unsupported(format!(
                "weighted Fourier energy is not grid-stable ({coarse} vs {fine}); phantom is not in the class for beta={beta}"
            )));
        }
        Self::new(beta, 1.1 * fine.max(f64::MIN_POSITIVE))
    }
}

/// One additive piece of a phantom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PhantomComponent {
    /// Constant `amplitude` on the closed disk of `radius` around `center`.
    Disk { center: Point, radius: f64, amplitude: f64 },
    /// `amplitude * exp(1 - 1/(1 - r^2))` with `r = |x - center| / scale`.
    Bump { center: Point, scale: f64, amplitude: f64 },
}

impl PhantomComponent {
    pub fn center(&self) -> Point {
        match *self {
            Self::Disk { center, .. } | Self::Bump { center, .. } => center,
        }
    }

    /// Radius of the support.
    pub fn extent(&self) -> f64 {
        match *self {
            Self::Disk { radius, .. } => radius,
            Self::Bump { scale, .. } => scale,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Self::Disk { amplitude, .. } | Self::Bump { amplitude, .. } => amplitude,
        }
    }

    fn validate(&self) -> Result<()> {
        let c = self.center();
        let r = self.extent();
        if !(c[0].is_finite() && c[1].is_finite() && self.amplitude().is_finite()) {
            return Err(invalid("phantom component has non-finite parameters"));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid(format!("component radius/scale must be positive, got {r}")));
        }
        if norm(c) + r > 1.0 + SUPPORT_SLACK {
            return Err(invalid(format!(
                "component at ({}, {}) with extent {r} leaves the unit ball",
                c[0], c[1]
            )));
        }
        Ok(())
    }

    /// Value at squared distance `d2` from the center.
    pub fn radial_value(&self, d2: f64) -> f64 {
        match *self {
            Self::Disk { radius, amplitude, .. } => {
                if d2 <= radius * radius {
                    amplitude
                } else {
                    0.0
                }
            }
            Self::Bump { scale, amplitude, .. } => amplitude * bump_profile(d2 / (scale * scale)),
        }
    }

    pub fn eval(&self, x: Point) -> f64 {
        let c = self.center();
        let dx = x[0] - c[0];
        let dy = x[1] - c[1];
        self.radial_value(dx * dx + dy * dy)
    }
}

/// `exp(1 - 1/(1 - r2))` for `r2 < 1`, else 0.
pub fn bump_profile(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

/// A test function built from disks and bumps inside the unit ball.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPhantom", into = "RawPhantom")]
pub struct Phantom {
    components: Vec<PhantomComponent>,
}

#[derive(Serialize, Deserialize)]
struct RawPhantom {
    components: Vec<PhantomComponent>,
}

impl TryFrom<RawPhantom> for Phantom {
    type Error = ErtError;
    fn try_from(raw: RawPhantom) -> Result<Self> {
        Phantom::new(raw.components)
    }
}

impl From<Phantom> for RawPhantom {
    fn from(p: Phantom) -> Self {
        RawPhantom { components: p.components }
    }
}

impl Phantom {
    pub fn new(components: Vec<PhantomComponent>) -> Result<Self> {
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components })
    }

    /// The zero function.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn disk(center: Point, radius: f64, amplitude: f64) -> Result<Self> {
        Self::new(vec![PhantomComponent::Disk { center, radius, amplitude }])
    }

    pub fn bump(center: Point, scale: f64, amplitude: f64) -> Result<Self> {
        Self::new(vec![PhantomComponent::Bump { center, scale, amplitude }])
    }

    pub fn components(&self) -> &[PhantomComponent] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// True when every component is a bump, i.e. the phantom is smooth.
    pub fn is_smooth(&self) -> bool {
        self.components.iter().all(|c| matches!(c, PhantomComponent::Bump { .. }))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("phantom serializes")
    }
}

/// Pointwise value of the phantom; zero outside the unit ball.
pub fn eval_phantom(phantom: &Phantom, x: Point) -> f64 {
    if x[0] * x[0] + x[1] * x[1] > 1.0 {
        return 0.0;
    }
    phantom.components.iter().map(|c| c.eval(x)).sum()
}

/// Samples on a uniform `n_side x n_side` grid over `[-1, 1]^2`.
///
/// Sample `(j, k)` sits at the pixel center
/// `(-1 + (j + 1/2) h, -1 + (k + 1/2) h)` with `h = 2 / n_side` and is
/// stored at `values[j * n_side + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    n_side: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(n_side: usize, values: Vec<f64>) -> Result<Self> {
        if n_side < 2 {
            return Err(invalid(format!("grid side must be at least 2, got {n_side}")));
        }
        if values.len() != n_side * n_side {
            return Err(invalid(format!(
                "grid of side {n_side} needs {} values, got {}",
                n_side * n_side,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("grid value {v} is not finite")));
        }
        Ok(Self { n_side, values })
    }

    pub fn zeros(n_side: usize) -> Result<Self> {
        Self::new(n_side, vec![0.0; n_side * n_side])
    }

    /// Builds a grid by evaluating `f` at every pixel center.
    pub fn from_fn(n_side: usize, f: impl Fn(Point) -> f64 + Sync) -> Result<Self> {
        use rayon::prelude::*;
        if n_side < 2 {
            return Err(invalid(format!("grid side must be at least 2, got {n_side}")));
        }
        let h = 2.0 / n_side as f64;
        let values = (0..n_side * n_side)
            .into_par_iter()
            .map(|idx| f(pixel_center(n_side, h, idx)))
            .collect();
        Self::new(n_side, values)
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn pixel_size(&self) -> f64 {
        2.0 / self.n_side as f64
    }

    pub fn pixel_area(&self) -> f64 {
        let h = self.pixel_size();
        h * h
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.n_side + k]
    }

    pub fn center(&self, j: usize, k: usize) -> Point {
        pixel_center(self.n_side, self.pixel_size(), j * self.n_side + k)
    }

    /// Pixel centers in storage order.
    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        let h = self.pixel_size();
        (0..self.values.len()).map(move |i| pixel_center(self.n_side, h, i))
    }

    /// Bilinear interpolation between pixel centers; samples beyond the grid
    /// count as zero.
    pub fn bilinear(&self, x: Point) -> f64 {
        let n = self.n_side as isize;
        let h = self.pixel_size();
        let fx = (x[0] + 1.0) / h - 0.5;
        let fy = (x[1] + 1.0) / h - 0.5;
        if !(fx > -1.0 && fy > -1.0 && fx < n as f64 && fy < n as f64) {
            return 0.0;
        }
        let j0 = fx.floor();
        let k0 = fy.floor();
        let tx = fx - j0;
        let ty = fy - k0;
        let (j0, k0) = (j0 as isize, k0 as isize);
        let at = |j: isize, k: isize| -> f64 {
            if j < 0 || k < 0 || j >= n || k >= n {
                0.0
            } else {
                self.values[(j * n + k) as usize]
            }
        };
        let v00 = at(j0, k0);
        let v10 = at(j0 + 1, k0);
        let v01 = at(j0, k0 + 1);
        let v11 = at(j0 + 1, k0 + 1);
        (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11)
    }

    /// Largest absolute value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

fn pixel_center(n_side: usize, h: f64, idx: usize) -> Point {
    let j = idx / n_side;
    let k = idx % n_side;
    [-1.0 + (j as f64 + 0.5) * h, -1.0 + (k as f64 + 0.5) * h]
}

/// Samples the phantom at the pixel centers of an `n_side` grid.
pub fn rasterize(phantom: &Phantom, n_side: usize) -> Result<ImageGrid> {
    ImageGrid::from_fn(n_side, |x| eval_phantom(phantom, x))
}

/// Discrete approximation of `integral (1 + |xi|^2)^beta |f~(xi)|^2 d xi`.
///
/// `f~(xi) = integral f(x) exp(-i xi.x) dx`, approximated by the grid DFT
/// times the pixel area. The grid spans length 2, so frequencies are spaced
/// by `pi` and the integral becomes a sum weighted by `pi^2`.
pub fn sobolev_weight_integral(image: &ImageGrid, beta: f64) -> Result<f64> {
    let n = image.n_side;
    if !n.is_power_of_two() {
        return Err(invalid(format!("grid side {n} is not a power of two")));
    }
    if !(beta >= 0.0) {
        return Err(invalid(format!("beta must be nonnegative, got {beta}")));
    }
    let mut data: Vec<Complex64> = image.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        for j in 0..n {
            col[j] = data[j * n + k];
        }
        fft.process(&mut col);
        for j in 0..n {
            data[j * n + k] = col[j];
        }
    }
    let area = image.pixel_area();
    let dxi = PI; // 2 pi / (domain length 2)
    let signed = |m: usize| -> f64 {
        if m < n / 2 {
            m as f64
        } else {
            m as f64 - n as f64
        }
    };
    let mut total = 0.0;
    for p in 0..n {
        let xi1 = dxi * signed(p);
        for q in 0..n {
            let xi2 = dxi * signed(q);
            let weight = (1.0 + xi1 * xi1 + xi2 * xi2).powf(beta);
            total += weight * data[p * n + q].norm_sqr();
        }
    }
    Ok(total * area * area * dxi * dxi)
}

/// Samples of a function on the cylinder of directions and offsets.
///
/// Row `j` holds angle `phi_j = 2 pi j / n_theta`; column `k` holds offset
/// `s_k = -1 + (k + 1/2) 2 / n_s`. `mu` records the attenuation the data
/// were generated with.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    n_theta: usize,
    n_s: usize,
    mu: f64,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn new(n_theta: usize, n_s: usize, mu: f64, values: Vec<f64>) -> Result<Self> {
        check_sinogram_dims(n_theta, n_s)?;
        if !mu.is_finite() {
            return Err(invalid(format!("attenuation {mu} is not finite")));
        }
        if values.len() != n_theta * n_s {
            return Err(invalid(format!(
                "sinogram {n_theta}x{n_s} needs {} values, got {}",
                n_theta * n_s,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("sinogram value {v} is not finite")));
        }
        Ok(Self { n_theta, n_s, mu, values })
    }

    pub fn zeros(n_theta: usize, n_s: usize, mu: f64) -> Result<Self> {
        Self::new(n_theta, n_s, mu, vec![0.0; n_theta * n_s])
    }

    /// Sinogram whose value at `(phi, s)` is `f(phi, s)`.
    pub fn from_fn(n_theta: usize, n_s: usize, mu: f64, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        use rayon::prelude::*;
        check_sinogram_dims(n_theta, n_s)?;
        let values = (0..n_theta * n_s)
            .into_par_iter()
            .map(|idx| f(angle(n_theta, idx / n_s), offset(n_s, idx % n_s)))
            .collect();
        Self::new(n_theta, n_s, mu, values)
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn phi(&self, j: usize) -> f64 {
        angle(self.n_theta, j)
    }

    pub fn s(&self, k: usize) -> f64 {
        offset(self.n_s, k)
    }

    pub fn ds(&self) -> f64 {
        2.0 / self.n_s as f64
    }

    pub fn dphi(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.n_s + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_s..(j + 1) * self.n_s]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_s)
    }

    /// Linear interpolation of row `j` in `s`. Between the outermost sample
    /// and the edge of `[-1, 1]` the edge sample is held; beyond the edge the
    /// data are zero.
    pub fn interp(&self, j: usize, s: f64) -> f64 {
        if !(-1.0..=1.0).contains(&s) {
            return 0.0;
        }
        let row = self.row(j);
        let pos = (s + 1.0) / self.ds() - 0.5;
        if pos <= 0.0 {
            return row[0];
        }
        let last = self.n_s - 1;
        if pos >= last as f64 {
            return row[last];
        }
        let k = pos.floor() as usize;
        let t = pos - k as f64;
        (1.0 - t) * row[k] + t * row[k + 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.n_theta, self.n_s, self.mu, values)
    }
}

fn check_sinogram_dims(n_theta: usize, n_s: usize) -> Result<()> {
    if n_theta < 2 || n_s < 2 {
        return Err(invalid(format!("sinogram needs at least 2x2 samples, got {n_theta}x{n_s}")));
    }
    Ok(())
}

fn angle(n_theta: usize, j: usize) -> f64 {
    2.0 * PI * j as f64 / n_theta as f64
}

fn offset(n_s: usize, k: usize) -> f64 {
    -1.0 + (k as f64 + 0.5) * 2.0 / n_s as f64
}
