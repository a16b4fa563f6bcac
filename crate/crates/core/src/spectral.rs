//! Periodic 2D FFT helpers: transforms, wavenumbers, spectral derivatives
//! and the 2/3 dealiasing mask.
//!
//! Odd-order derivative multipliers zero the Nyquist slot so that the
//! inverse of a real field's derivative stays real.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::fields::{Domain2D, ScalarField2D};

pub struct Spectral2D {
    domain: Domain2D,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Derivative wavenumbers per slot (Nyquist zeroed).
    kd: Vec<f64>,
    /// Full wavenumbers per slot.
    kf: Vec<f64>,
    keep: Vec<bool>,
}

type Cache = Mutex<HashMap<(u64, usize), Arc<Spectral2D>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Spectral2D {
    pub fn new(domain: Domain2D) -> Self {
        let n = domain.resolution();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let kf: Vec<f64> = (0..n).map(|k| domain.wavenumber(k)).collect();
        let kd = (0..n)
            .map(|k| if k == n / 2 { 0.0 } else { kf[k] })
            .collect();
        let keep = (0..n)
            .map(|k| (domain.mode(k).unsigned_abs() as f64) < n as f64 / 3.0)
            .collect();
        Self {
            domain,
            forward,
            inverse,
            kd,
            kf,
            keep,
        }
    }

    /// Shared transform object for `domain`.
    pub fn for_domain(domain: &Domain2D) -> Arc<Self> {
        let key = (domain.side_length().to_bits(), domain.resolution());
        let mut map = cache().lock().expect("spectral cache poisoned");
        map.entry(key)
            .or_insert_with(|| Arc::new(Self::new(*domain)))
            .clone()
    }

    pub fn domain(&self) -> &Domain2D {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.resolution()
    }

    /// Derivative wavenumber (Nyquist zeroed) for slot `k`.
    #[inline]
    pub fn kd(&self, k: usize) -> f64 {
        self.kd[k]
    }

    #[inline]
    pub fn k2(&self, kx: usize, ky: usize) -> f64 {
        self.kf[kx] * self.kf[kx] + self.kf[ky] * self.kf[ky]
    }

    #[inline]
    pub fn keeps(&self, kx: usize, ky: usize) -> bool {
        self.keep[kx] && self.keep[ky]
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n();
        plan.process(data);
        transpose(data, n);
        plan.process(data);
        transpose(data, n);
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform (normalised) returning the real part.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, &self.inverse);
        let scale = 1.0 / (self.domain.len() as f64);
        spec.iter().map(|c| c.re * scale).collect()
    }

    /// Applies `mult(kx_slot, ky_slot)` to every coefficient in place.
    pub fn apply(&self, spec: &mut [Complex64], mult: impl Fn(usize, usize) -> Complex64) {
        let n = self.n();
        for ky in 0..n {
            for kx in 0..n {
                spec[ky * n + kx] *= mult(kx, ky);
            }
        }
    }

    pub fn ddx(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        spec.iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::new(0.0, self.kd[i % n]))
            .collect()
    }

    pub fn ddy(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        spec.iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::new(0.0, self.kd[i / n]))
            .collect()
    }

    pub fn dealias(&self, spec: &mut [Complex64]) {
        let n = self.n();
        for ky in 0..n {
            for kx in 0..n {
                if !self.keeps(kx, ky) {
                    spec[ky * n + kx] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Spectral gradient `(∂x f, ∂y f)` at cell centres.
    pub fn gradient(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s = self.forward(f);
        (self.inverse(self.ddx(&s)), self.inverse(self.ddy(&s)))
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut s = self.forward(f);
        self.apply(&mut s, |kx, ky| Complex64::new(-self.k2(kx, ky), 0.0));
        self.inverse(s)
    }

    /// Evaluates the trigonometric interpolant at cell centres shifted by
    /// `(sx, sy)` (in units of `h`).
    pub fn shifted(&self, f: &[f64], sx: f64, sy: f64) -> Vec<f64> {
        let h = self.domain.spacing();
        let mut s = self.forward(f);
        self.apply(&mut s, |kx, ky| {
            let phase = self.kd[kx] * sx * h + self.kd[ky] * sy * h;
            Complex64::new(phase.cos(), phase.sin())
        });
        self.inverse(s)
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Spectral divergence of a cell-centred velocity.
pub fn divergence(ux: &[f64], uy: &[f64], domain: &Domain2D) -> ScalarField2D {
    let sp = Spectral2D::for_domain(domain);
    let ax = sp.ddx(&sp.forward(ux));
    let ay = sp.ddy(&sp.forward(uy));
    let sum = ax.iter().zip(&ay).map(|(a, b)| a + b).collect();
    ScalarField2D::from_raw(*domain, sp.inverse(sum))
}

/// Gaussian smoothing `f * G_σ` with `Ĝ = exp(-σ²|k|²/2)`.
pub fn gaussian_smooth(f: &ScalarField2D, sigma: f64) -> ScalarField2D {
    let sp = Spectral2D::for_domain(f.domain());
    let mut s = sp.forward(f.values());
    sp.apply(&mut s, |kx, ky| {
        Complex64::new((-0.5 * sigma * sigma * sp.k2(kx, ky)).exp(), 0.0)
    });
    ScalarField2D::from_raw(*f.domain(), sp.inverse(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn roundtrip_and_derivative() {
        let d = Domain2D::new(2.0 * PI, 32).unwrap();
        let sp = Spectral2D::new(d);
        let f = ScalarField2D::from_fn(d, |x, y| (3.0 * x).sin() * (2.0 * y).cos()).unwrap();
        let back = sp.inverse(sp.forward(f.values()));
        for (a, b) in back.iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let (gx, gy) = sp.gradient(f.values());
        for k in 0..d.len() {
            let [x, y] = d.center_of(k);
            assert!((gx[k] - 3.0 * (3.0 * x).cos() * (2.0 * y).cos()).abs() < 1e-12);
            assert!((gy[k] + 2.0 * (3.0 * x).sin() * (2.0 * y).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn half_cell_shift() {
        let d = Domain2D::new(1.0, 32).unwrap();
        let sp = Spectral2D::new(d);
        let f = ScalarField2D::from_fn(d, |x, y| (2.0 * PI * x).sin() + (4.0 * PI * y).cos()).unwrap();
        let g = sp.shifted(f.values(), 0.5, 0.5);
        let h = d.spacing();
        for k in 0..d.len() {
            let [x, y] = d.center_of(k);
            let exact = (2.0 * PI * (x + h / 2.0)).sin() + (4.0 * PI * (y + h / 2.0)).cos();
            assert!((g[k] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn dealias_mask_is_two_thirds() {
        let d = Domain2D::new(1.0, 12usize.next_power_of_two()).unwrap();
        let sp = Spectral2D::new(d);
        // N = 16: keep |m| <= 5
        assert!(sp.keeps(5, 0));
        assert!(!sp.keeps(6, 0));
        assert!(sp.keeps(11, 0)); // m = -5
        assert!(!sp.keeps(10, 0)); // m = -6
    }
}
