//! Divergence-free velocity `u = k * ω`, `k(x) = x⊥ / (2π |x|²)`.
//!
//! On the torus the convolution is the Fourier multiplier `i k⊥ / |k|²`
//! (zero at `k = 0`), i.e. `u = ∇⊥ψ = (-∂yψ, ∂xψ)` with `Δψ = ω`. The
//! direct free-space sum is an O(N⁴) cross-check with a fourth-order
//! Gaussian-blob mollification of radius one cell.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{Domain2D, ScalarField2D, VelocityField2D};
use crate::spectral::Spectral2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiotSavartMethod {
    Spectral,
    /// Free-space summation over the source cells and `images` layers of
    /// periodic copies in each direction.
    Direct { images: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiotSavartConfig {
    pub method: BiotSavartMethod,
    /// Truncate the output to the 2/3 band.
    pub dealias: bool,
}

impl Default for BiotSavartConfig {
    fn default() -> Self {
        Self {
            method: BiotSavartMethod::Spectral,
            dealias: false,
        }
    }
}

impl BiotSavartConfig {
    pub fn spectral() -> Self {
        Self::default()
    }

    pub fn direct(images: usize) -> Self {
        Self {
            method: BiotSavartMethod::Direct { images },
            dealias: false,
        }
    }
}

pub(crate) fn check_zero_mean(omega: &ScalarField2D) -> Result<()> {
    let sum: f64 = omega.values().iter().sum();
    let abs: f64 = omega.values().iter().map(|v| v.abs()).sum();
    if sum.abs() > 1e-12 * abs {
        return Err(Error::NonZeroMean {
            mean: sum / omega.values().len() as f64,
        });
    }
    Ok(())
}

pub fn velocity_from_vorticity(
    omega: &ScalarField2D,
    cfg: &BiotSavartConfig,
) -> Result<VelocityField2D> {
    match cfg.method {
        BiotSavartMethod::Spectral => {
            check_zero_mean(omega)?;
            let sp = Spectral2D::for_domain(omega.domain());
            let w = sp.forward(omega.values());
            Ok(spectral_velocity(&sp, &w, cfg.dealias))
        }
        BiotSavartMethod::Direct { images } => {
            let d = *omega.domain();
            let targets = d.centers();
            let vel = direct_velocity(omega, &targets, d.spacing(), images);
            let (ux, uy): (Vec<f64>, Vec<f64>) = vel.into_iter().map(|v| (v[0], v[1])).unzip();
            let u = VelocityField2D::from_raw(d, ux, uy);
            if cfg.dealias {
                let sp = Spectral2D::for_domain(&d);
                let mut sx = sp.forward(u.ux());
                let mut sy = sp.forward(u.uy());
                sp.dealias(&mut sx);
                sp.dealias(&mut sy);
                return Ok(VelocityField2D::from_raw(d, sp.inverse(sx), sp.inverse(sy)));
            }
            Ok(u)
        }
    }
}

/// Velocity from vorticity coefficients `ŵ` (the zero mode is ignored).
pub(crate) fn spectral_velocity(sp: &Spectral2D, w: &[Complex64], dealias: bool) -> VelocityField2D {
    let (sx, sy) = velocity_coefficients(sp, w, dealias);
    VelocityField2D::from_raw(*sp.domain(), sp.inverse(sx), sp.inverse(sy))
}

pub(crate) fn velocity_coefficients(
    sp: &Spectral2D,
    w: &[Complex64],
    dealias: bool,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = sp.n();
    let mut sx = vec![Complex64::new(0.0, 0.0); n * n];
    let mut sy = vec![Complex64::new(0.0, 0.0); n * n];
    for ky in 0..n {
        for kx in 0..n {
            let k2 = sp.k2(kx, ky);
            if k2 == 0.0 || (dealias && !sp.keeps(kx, ky)) {
                continue;
            }
            let i = ky * n + kx;
            // ψ̂ = -ŵ/|k|², u = (-∂yψ, ∂xψ)
            let psi = -w[i] / k2;
            sx[i] = -Complex64::new(0.0, sp.kd(ky)) * psi;
            sy[i] = Complex64::new(0.0, sp.kd(kx)) * psi;
        }
    }
    (sx, sy)
}

/// Streamfunction `ψ` with `Δψ = ω` and zero mean.
pub fn streamfunction(omega: &ScalarField2D) -> Result<ScalarField2D> {
    check_zero_mean(omega)?;
    let sp = Spectral2D::for_domain(omega.domain());
    let mut w = sp.forward(omega.values());
    sp.apply(&mut w, |kx, ky| {
        let k2 = sp.k2(kx, ky);
        if k2 == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(-1.0 / k2, 0.0)
        }
    });
    Ok(ScalarField2D::from_raw(*omega.domain(), sp.inverse(w)))
}

/// Spectral curl `∂x u_y - ∂y u_x`.
pub fn curl(u: &VelocityField2D) -> ScalarField2D {
    let sp = Spectral2D::for_domain(u.domain());
    let dx = sp.ddx(&sp.forward(u.uy()));
    let dy = sp.ddy(&sp.forward(u.ux()));
    let c = dx.iter().zip(&dy).map(|(a, b)| a - b).collect();
    ScalarField2D::from_raw(*u.domain(), sp.inverse(c))
}

/// Point-vortex kernel `x⊥ / (2π |x|²)`.
pub fn kernel(z: [f64; 2]) -> [f64; 2] {
    let r2 = z[0] * z[0] + z[1] * z[1];
    if r2 == 0.0 {
        return [0.0, 0.0];
    }
    let f = 1.0 / (2.0 * std::f64::consts::PI * r2);
    [-z[1] * f, z[0] * f]
}

/// Kernel regularised by the fourth-order Gaussian blob of radius `eta`:
/// `k(z) [1 - (1 - |z|²/η²) exp(-|z|²/η²)]`.
pub fn mollified_kernel(z: [f64; 2], eta: f64) -> [f64; 2] {
    let r2 = z[0] * z[0] + z[1] * z[1];
    if r2 == 0.0 {
        return [0.0, 0.0];
    }
    let s = r2 / (eta * eta);
    let factor = 1.0 - (1.0 - s) * (-s).exp();
    let f = factor / (2.0 * std::f64::consts::PI * r2);
    [-z[1] * f, z[0] * f]
}

/// Direct summation of the mollified kernel at arbitrary `targets`.
pub fn direct_velocity(
    omega: &ScalarField2D,
    targets: &[[f64; 2]],
    eta: f64,
    images: usize,
) -> Vec<[f64; 2]> {
    let d: Domain2D = *omega.domain();
    let area = d.cell_area();
    let l = d.side_length();
    let sources: Vec<([f64; 2], f64)> = omega
        .values()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(k, w)| (d.center_of(k), w * area))
        .collect();
    let m = images as i64;
    targets
        .par_iter()
        .map(|x| {
            let mut u = [0.0, 0.0];
            for ix in -m..=m {
                for iy in -m..=m {
                    let shift = [ix as f64 * l, iy as f64 * l];
                    for (y, q) in &sources {
                        let z = [x[0] - y[0] - shift[0], x[1] - y[1] - shift[1]];
                        let k = mollified_kernel(z, eta);
                        u[0] += k[0] * q;
                        u[1] += k[1] * q;
                    }
                }
            }
            u
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::divergence;
    use std::f64::consts::PI;

    fn band_limited(d: Domain2D) -> ScalarField2D {
        let l = d.side_length();
        ScalarField2D::from_fn(d, |x, y| {
            let a = 2.0 * PI / l;
            (a * x).sin() * (2.0 * a * y).cos() + 0.3 * (3.0 * a * x + a * y).cos()
                - 0.7 * (5.0 * a * y).sin()
        })
        .unwrap()
    }

    #[test]
    fn zero_vorticity_gives_zero_velocity() {
        let d = Domain2D::new(1.0, 16).unwrap();
        let u = velocity_from_vorticity(&ScalarField2D::zeros(d), &BiotSavartConfig::spectral()).unwrap();
        assert_eq!(u.max_speed(), 0.0);
    }

    #[test]
    fn nonzero_mean_rejected() {
        let d = Domain2D::new(1.0, 16).unwrap();
        let w = ScalarField2D::constant(d, 1.0);
        let err = velocity_from_vorticity(&w, &BiotSavartConfig::spectral()).unwrap_err();
        assert!(err.to_string().contains("torus Biot–Savart requires zero mean"));
    }

    #[test]
    fn curl_inverts_and_divergence_vanishes() {
        let d = Domain2D::new(2.0, 64).unwrap();
        let w = band_limited(d);
        let u = velocity_from_vorticity(&w, &BiotSavartConfig::spectral()).unwrap();
        let c = curl(&u);
        let err = c.sub(&w).unwrap().l2_norm() / w.l2_norm();
        assert!(err < 1e-12, "{err}");
        let div = divergence(u.ux(), u.uy(), &d);
        assert!(div.max_abs() <= 1e-10 * u.max_component());
    }

    #[test]
    fn curl_of_constant_is_zero() {
        let d = Domain2D::new(1.0, 16).unwrap();
        let u = VelocityField2D::from_fn(d, |_, _| [0.3, -1.2]).unwrap();
        assert!(curl(&u).max_abs() < 1e-14);
    }

    #[test]
    fn curl_of_windowed_rotation_is_two() {
        let d = Domain2D::new(1.0, 128).unwrap();
        // smooth periodic window equal to one near the centre
        let win = |x: f64, y: f64| {
            let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
            (-(r2 / 0.1).powi(6)).exp()
        };
        let u = VelocityField2D::from_fn(d, |x, y| {
            let w = win(x, y);
            [-(y - 0.5) * w, (x - 0.5) * w]
        })
        .unwrap();
        let c = curl(&u);
        // finite-difference oracle in the flat region
        let h = d.spacing();
        for &(ix, iy) in &[(64usize, 64usize), (60, 70), (70, 58)] {
            let k = d.index(ix, iy);
            let fd = (u.uy()[d.index(ix + 1, iy)] - u.uy()[d.index(ix - 1, iy)]) / (2.0 * h)
                - (u.ux()[d.index(ix, iy + 1)] - u.ux()[d.index(ix, iy - 1)]) / (2.0 * h);
            assert!((c.values()[k] - 2.0).abs() < 1e-6, "{}", c.values()[k]);
            assert!((fd - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn linearity() {
        let d = Domain2D::new(1.0, 32).unwrap();
        let a = band_limited(d);
        let b = ScalarField2D::from_fn(d, |x, y| (2.0 * PI * (x + 2.0 * y)).cos()).unwrap();
        let cfg = BiotSavartConfig::spectral();
        let ua = velocity_from_vorticity(&a, &cfg).unwrap();
        let ub = velocity_from_vorticity(&b, &cfg).unwrap();
        let mix = a.scaled(2.0).add(&b.scaled(-0.5)).unwrap();
        let um = velocity_from_vorticity(&mix, &cfg).unwrap();
        for k in 0..d.len() {
            let ex = 2.0 * ua.ux()[k] - 0.5 * ub.ux()[k];
            let ey = 2.0 * ua.uy()[k] - 0.5 * ub.uy()[k];
            assert!((um.ux()[k] - ex).abs() < 1e-13);
            assert!((um.uy()[k] - ey).abs() < 1e-13);
        }
    }

    #[test]
    fn far_field_of_smoothed_point_vortex() {
        let d = Domain2D::new(1.0, 64).unwrap();
        let sigma = 2.0 * d.spacing();
        let gamma = 0.8;
        let w = ScalarField2D::from_fn(d, |x, y| {
            let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
            gamma / (2.0 * PI * sigma * sigma) * (-r2 / (2.0 * sigma * sigma)).exp()
        })
        .unwrap();
        for r in [0.2, 0.3, 0.4] {
            let p = [0.5 + r * 0.6, 0.5 + r * 0.8];
            let u = direct_velocity(&w, &[p], d.spacing(), 0)[0];
            let speed = u[0].hypot(u[1]);
            assert!((speed - gamma / (2.0 * PI * r)).abs() < 1e-6 * speed.max(1.0), "r={r}");
            // tangential: orthogonal to the radius
            let radial = u[0] * 0.6 + u[1] * 0.8;
            assert!(radial.abs() < 1e-9);
        }
    }

    #[test]
    fn mollified_kernel_matches_point_kernel_far_away() {
        let z = [0.3, -0.4];
        let a = kernel(z);
        let b = mollified_kernel(z, 0.01);
        assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        assert_eq!(mollified_kernel([0.0, 0.0], 0.1), [0.0, 0.0]);
    }
}
