//! Uniform-grid fields on the periodic square, atomic measures, and the
//! norm / quasinorm / distribution-function computations shared by every
//! other module.
//!
//! Fields are cell-centred: the value at flat index `iy * N + ix` lives at
//! `((ix + 1/2) h, (iy + 1/2) h)` with `h = L / N`. All quadrature is the
//! midpoint rule.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Square periodic torus `[0, L)²` discretised by `N × N` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain2D {
    side_length: f64,
    resolution: usize,
}

impl Domain2D {
    pub fn new(side_length: f64, resolution: usize) -> Result<Self> {
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "side length must be positive, got {side_length}"
            )));
        }
        if resolution < 4 || !resolution.is_power_of_two() {
            return Err(Error::InvalidDomain(format!(
                "resolution must be a power of two >= 4, got {resolution}"
            )));
        }
        Ok(Self {
            side_length,
            resolution,
        })
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Cell width `h = L / N`.
    pub fn spacing(&self) -> f64 {
        self.side_length / self.resolution as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn area(&self) -> f64 {
        self.side_length * self.side_length
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.resolution + ix
    }

    #[inline]
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        let h = self.spacing();
        [(ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h]
    }

    /// Centre of the cell with flat index `k`.
    #[inline]
    pub fn center_of(&self, k: usize) -> [f64; 2] {
        self.cell_center(k % self.resolution, k / self.resolution)
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|k| self.center_of(k)).collect()
    }

    /// Reduce a coordinate into `[0, L)`.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.side_length);
        if r >= self.side_length {
            0.0
        } else {
            r
        }
    }

    /// Minimum-image displacement `a - b` on the torus.
    #[inline]
    pub fn displacement(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let l = self.side_length;
        let mut dx = a[0] - b[0];
        let mut dy = a[1] - b[1];
        dx -= l * (dx / l).round();
        dy -= l * (dy / l).round();
        [dx, dy]
    }

    pub fn torus_distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.displacement(a, b);
        d[0].hypot(d[1])
    }

    /// Signed integer wavenumber index for FFT slot `k`.
    #[inline]
    pub fn mode(&self, k: usize) -> i64 {
        let n = self.resolution as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Physical wavenumber `2π m / L` for FFT slot `k`.
    #[inline]
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.mode(k) as f64 / self.side_length
    }
}

/// Scalar quantity (density, vorticity, ...) sampled at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    domain: Domain2D,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn new(domain: Domain2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                domain.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Domain2D) -> Self {
        Self {
            domain,
            values: vec![0.0; domain.len()],
        }
    }

    pub fn constant(domain: Domain2D, c: f64) -> Self {
        Self {
            domain,
            values: vec![c; domain.len()],
        }
    }

    /// Samples `f(x, y)` at every cell centre.
    pub fn from_fn(domain: Domain2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..domain.len())
            .map(|k| {
                let [x, y] = domain.center_of(k);
                f(x, y)
            })
            .collect();
        Self::new(domain, values)
    }

    pub(crate) fn from_raw(domain: Domain2D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self { domain, values }
    }

    pub fn domain(&self) -> &Domain2D {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.domain.index(ix, iy)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Midpoint-rule integral `h² Σ f`.
    pub fn integral(&self) -> f64 {
        self.domain.cell_area() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn l1_norm(&self) -> f64 {
        self.domain.cell_area() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.domain.cell_area() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Weighted samples with the Lebesgue cell weights.
    pub fn samples(&self) -> WeightedSamples {
        WeightedSamples {
            values: self.values.clone(),
            weights: vec![self.domain.cell_area(); self.values.len()],
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.domain, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(Self::from_raw(
            self.domain,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// Removes the mean so the field integrates to zero.
    pub fn zero_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Periodic bilinear interpolation at an arbitrary point.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        bilinear(&self.domain, &self.values, x, y)
    }

    /// Inner product `h² Σ f g`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.domain.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

/// Periodic bilinear interpolation of cell-centred `values`.
pub(crate) fn bilinear(domain: &Domain2D, values: &[f64], x: f64, y: f64) -> f64 {
    let n = domain.resolution();
    let h = domain.spacing();
    let gx = x / h - 0.5;
    let gy = y / h - 0.5;
    let fx = gx.floor();
    let fy = gy.floor();
    let tx = gx - fx;
    let ty = gy - fy;
    let ni = n as i64;
    let i0 = (fx as i64).rem_euclid(ni) as usize;
    let j0 = (fy as i64).rem_euclid(ni) as usize;
    let i1 = (i0 + 1) % n;
    let j1 = (j0 + 1) % n;
    let v00 = values[j0 * n + i0];
    let v10 = values[j0 * n + i1];
    let v01 = values[j1 * n + i0];
    let v11 = values[j1 * n + i1];
    (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
}

/// Two-component velocity at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField2D {
    domain: Domain2D,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl VelocityField2D {
    pub fn new(domain: Domain2D, ux: Vec<f64>, uy: Vec<f64>) -> Result<Self> {
        if ux.len() != domain.len() || uy.len() != domain.len() {
            return Err(Error::InvalidArgument(
                "velocity components must have N² entries".into(),
            ));
        }
        if ux.iter().chain(&uy).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { domain, ux, uy })
    }

    pub fn zeros(domain: Domain2D) -> Self {
        Self {
            domain,
            ux: vec![0.0; domain.len()],
            uy: vec![0.0; domain.len()],
        }
    }

    pub fn from_fn(domain: Domain2D, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Self> {
        let (ux, uy) = (0..domain.len())
            .map(|k| {
                let [x, y] = domain.center_of(k);
                let v = f(x, y);
                (v[0], v[1])
            })
            .unzip();
        Self::new(domain, ux, uy)
    }

    pub(crate) fn from_raw(domain: Domain2D, ux: Vec<f64>, uy: Vec<f64>) -> Self {
        Self { domain, ux, uy }
    }

    pub fn domain(&self) -> &Domain2D {
        &self.domain
    }

    pub fn ux(&self) -> &[f64] {
        &self.ux
    }

    pub fn uy(&self) -> &[f64] {
        &self.uy
    }

    #[inline]
    pub fn at(&self, k: usize) -> [f64; 2] {
        [self.ux[k], self.uy[k]]
    }

    pub fn max_speed(&self) -> f64 {
        self.ux
            .iter()
            .zip(&self.uy)
            .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Largest component magnitude `max(|u_x|, |u_y|)`.
    pub fn max_component(&self) -> f64 {
        self.ux
            .iter()
            .chain(&self.uy)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn speed(&self) -> ScalarField2D {
        ScalarField2D::from_raw(
            self.domain,
            self.ux
                .iter()
                .zip(&self.uy)
                .map(|(a, b)| a.hypot(*b))
                .collect(),
        )
    }

    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f64; 2] {
        [
            bilinear(&self.domain, &self.ux, x, y),
            bilinear(&self.domain, &self.uy, x, y),
        ]
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_raw(
            self.domain,
            self.ux.iter().map(|v| a * v).collect(),
            self.uy.iter().map(|v| a * v).collect(),
        )
    }

    /// `(1 - s) self + s other`.
    pub fn lerp(&self, other: &Self, s: f64) -> Self {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| (1.0 - s) * x + s * y)
                .collect()
        };
        Self::from_raw(self.domain, mix(&self.ux, &other.ux), mix(&self.uy, &other.uy))
    }
}

/// Finite weighted point cloud.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicMeasure {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidMeasure(format!(
                "weights must be strictly positive, got {w}"
            )));
        }
        if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidMeasure("non-finite point".into()));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert((p[0].to_bits(), p[1].to_bits())) {
                return Err(Error::InvalidMeasure(format!(
                    "duplicate point ({}, {})",
                    p[0], p[1]
                )));
            }
        }
        Ok(Self { points, weights })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

/// Values of a function together with the masses of a finite measure.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSamples {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSamples {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::InvalidArgument(
                "values and weights differ in length".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { values, weights })
    }

    /// Values of `f` at the atoms of `mu`.
    pub fn on_measure(mu: &AtomicMeasure, values: Vec<f64>) -> Result<Self> {
        Self::new(values, mu.weights().to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_finite(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            Err(Error::NonFinite)
        } else {
            Ok(())
        }
    }

    /// Distinct levels `a` of `|f|` (descending) paired with `μ(|f| ≥ a)`.
    fn upper_levels(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self
            .values
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(v, w)| (v.abs(), *w))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut acc = 0.0;
        for (a, w) in pairs {
            acc += w;
            match out.last_mut() {
                Some(last) if last.0 == a => last.1 = acc,
                _ => out.push((a, acc)),
            }
        }
        out
    }
}

/// Exponent for `L^p` norms; `f64::INFINITY` selects the sup norm.
pub fn lp_norm(f: &WeightedSamples, p: f64) -> Result<f64> {
    f.check_finite()?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::OutOfRange(format!("p must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f
            .values
            .iter()
            .zip(&f.weights)
            .filter(|(_, w)| **w > 0.0)
            .fold(0.0_f64, |m, (v, _)| m.max(v.abs())));
    }
    let s: f64 = f
        .values
        .iter()
        .zip(&f.weights)
        .map(|(v, w)| v.abs().powf(p) * w)
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Weak `L^p` quasinorm `sup_λ λ μ(|f| > λ)^{1/p}`.
///
/// On discrete data the supremum is the maximum over achieved levels `a` of
/// `a μ(|f| ≥ a)^{1/p}` (approached as `λ ↑ a`). For `p = ∞` this is the
/// sup norm.
pub fn weak_lp_quasinorm(f: &WeightedSamples, p: f64) -> Result<f64> {
    f.check_finite()?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::OutOfRange(format!("p must be >= 1, got {p}")));
    }
    let levels = f.upper_levels();
    if p.is_infinite() {
        return Ok(levels.first().map_or(0.0, |l| l.0));
    }
    Ok(levels
        .iter()
        .map(|&(a, m)| a * m.powf(1.0 / p))
        .fold(0.0_f64, f64::max))
}

/// `m(λ) = μ({|f| > λ})`.
pub fn distribution_function(f: &WeightedSamples, lambda: f64) -> Result<f64> {
    f.check_finite()?;
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::OutOfRange(format!("λ must be >= 0, got {lambda}")));
    }
    Ok(f.values
        .iter()
        .zip(&f.weights)
        .filter(|(v, _)| v.abs() > lambda)
        .map(|(_, w)| w)
        .sum())
}

/// `(λ, m(λ))` rows for the requested levels.
pub fn distribution_table(f: &WeightedSamples, levels: &[f64]) -> Result<Vec<(f64, f64)>> {
    f.check_finite()?;
    let mut sorted: Vec<(f64, f64)> = f
        .values
        .iter()
        .zip(&f.weights)
        .map(|(v, w)| (v.abs(), *w))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // suffix sums: mass strictly above each sorted position
    let mut suffix = vec![0.0; sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        suffix[i] = suffix[i + 1] + sorted[i].1;
    }
    levels
        .iter()
        .map(|&lambda| {
            if lambda.is_nan() || lambda < 0.0 {
                return Err(Error::OutOfRange(format!("λ must be >= 0, got {lambda}")));
            }
            let first_above = sorted.partition_point(|(a, _)| *a <= lambda);
            Ok((lambda, suffix[first_above]))
        })
        .collect()
}

const FIELD_MAGIC: &[u8; 8] = b"VLFIELD1";

/// Binary field file: magic, `L` (f64 LE), `N` (u64 LE), `N²` row-major f64 LE.
pub fn write_field(path: impl AsRef<Path>, field: &ScalarField2D) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + 8 * field.values.len());
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&field.domain.side_length().to_le_bytes());
    buf.extend_from_slice(&(field.domain.resolution() as u64).to_le_bytes());
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField2D> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 24 || &bytes[..8] != FIELD_MAGIC {
        return Err(Error::Format("not a field file".into()));
    }
    let l = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let n = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let domain = Domain2D::new(l, n)?;
    if bytes.len() != 24 + 8 * domain.len() {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            8 * domain.len(),
            bytes.len() - 24
        )));
    }
    let values = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    ScalarField2D::new(domain, values)
}

/// CSV with header `lambda,m` and one row per level.
pub fn distribution_csv(table: &[(f64, f64)]) -> String {
    let mut s = String::from("lambda,m\n");
    for (l, m) in table {
        s.push_str(&format!("{l:e},{m:e}\n"));
    }
    s
}
