//! Initial data and velocity fields used by the experiments and tests.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{Domain2D, ScalarField2D, VelocityField2D};

/// C∞ step: 0 for `s <= 0`, 1 for `s >= 1`.
pub fn smooth_step(s: f64) -> f64 {
    let f = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        f(s) / (f(s) + f(1.0 - s))
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let f = |t: f64| (-1.0 / t).exp();
    let df = |t: f64| f(t) / (t * t);
    let (a, b) = (f(s), f(1.0 - s));
    (df(s) * b + a * df(1.0 - s)) / ((a + b) * (a + b))
}

/// Radial window equal to 1 on `r <= r_in` and 0 on `r >= r_out`.
pub fn radial_window(r: f64, r_in: f64, r_out: f64) -> f64 {
    1.0 - smooth_step((r - r_in) / (r_out - r_in))
}

/// Compactly supported C∞ bump `a·exp(1 - 1/(1 - (r/R)²))`.
pub fn bump(d: Domain2D, center: [f64; 2], radius: f64, amplitude: f64) -> ScalarField2D {
    ScalarField2D::from_fn(d, |x, y| {
        let r = d.torus_distance([x, y], center) / radius;
        if r >= 1.0 {
            0.0
        } else {
            amplitude * (1.0 - 1.0 / (1.0 - r * r)).exp()
        }
    })
    .expect("bump is finite")
}

/// Gaussian `a·exp(-|x - c|²/(2σ²))` in the minimum-image metric.
pub fn gaussian(d: Domain2D, center: [f64; 2], sigma: f64, amplitude: f64) -> ScalarField2D {
    ScalarField2D::from_fn(d, |x, y| {
        let r = d.torus_distance([x, y], center);
        amplitude * (-r * r / (2.0 * sigma * sigma)).exp()
    })
    .expect("gaussian is finite")
}

/// Rigid rotation with angular velocity `omega` about `center`, cut off
/// smoothly between `r_in` and `r_out`. Divergence free.
pub fn windowed_rotation(
    d: Domain2D,
    center: [f64; 2],
    omega: f64,
    r_in: f64,
    r_out: f64,
) -> VelocityField2D {
    VelocityField2D::from_fn(d, |x, y| {
        let z = d.displacement([x, y], center);
        let w = omega * radial_window(z[0].hypot(z[1]), r_in, r_out);
        [-w * z[1], w * z[0]]
    })
    .expect("rotation is finite")
}

/// Shear flow `(a sin(2πy/L), 0)`.
pub fn shear(d: Domain2D, amplitude: f64) -> VelocityField2D {
    let l = d.side_length();
    VelocityField2D::from_fn(d, |_, y| [amplitude * (2.0 * PI * y / l).sin(), 0.0])
        .expect("shear is finite")
}

/// Three Gaussian vortices of strengths `(+1, +1, -2)·a` near the centre;
/// zero circulation, width `σ = L·width`.
pub fn vortex_triple(d: Domain2D, amplitude: f64, width: f64) -> ScalarField2D {
    let l = d.side_length();
    let s = width * l;
    let c = 0.5 * l;
    let parts = [
        ([c - 0.08 * l, c], 1.0),
        ([c + 0.08 * l, c], 1.0),
        ([c, c + 0.1 * l], -2.0),
    ];
    let mut f = ScalarField2D::zeros(d);
    for (p, a) in parts {
        let g = gaussian(d, p, s, a * amplitude);
        for (v, w) in f.values_mut().iter_mut().zip(g.values()) {
            *v += w;
        }
    }
    f.zero_mean()
}

/// Truncated power-law spike `a·min(|x - c|^{-α}, cap)` windowed to radius
/// `r_out`, with mean removed.
pub fn power_spike(
    d: Domain2D,
    center: [f64; 2],
    alpha: f64,
    cap: f64,
    r_out: f64,
) -> Result<ScalarField2D> {
    if !(0.0..2.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("spike exponent {alpha} not in [0, 2)")));
    }
    let f = ScalarField2D::from_fn(d, |x, y| {
        let r = d.torus_distance([x, y], center).max(1e-300);
        r.powf(-alpha).min(cap) * radial_window(r, 0.5 * r_out, r_out)
    })?;
    Ok(f.zero_mean())
}

/// Names accepted by [`initial_vorticity`].
pub const PRESETS: &[(&str, &str)] = &[
    ("gaussian", "radial Gaussian at the centre, mean removed"),
    ("wide_gaussian", "radial Gaussian of width 0.15 L, mean removed"),
    ("triple", "three Gaussian vortices with zero circulation"),
    ("bump", "compact C∞ bump at the centre, mean removed"),
    ("spike", "truncated |x|^-1.5 power-law spike, mean removed"),
    ("pair", "two unequal same-sign C∞ bumps, mean removed"),
];

/// Builds a named initial vorticity on `d`.
pub fn initial_vorticity(name: &str, d: Domain2D) -> Result<ScalarField2D> {
    let l = d.side_length();
    let c = [0.5 * l, 0.5 * l];
    match name {
        "gaussian" => Ok(gaussian(d, c, 0.05 * l, 1.0).zero_mean()),
        "wide_gaussian" => Ok(gaussian(d, c, 0.15 * l, 1.0).zero_mean()),
        "triple" => Ok(vortex_triple(d, 1.0, 0.03)),
        "bump" => Ok(bump(d, c, 0.15 * l, 1.0).zero_mean()),
        "spike" => power_spike(d, c, 1.5, (d.spacing()).powf(-1.5), 0.2 * l),
        "pair" => {
            let mut f = bump(d, [0.45 * l, c[1]], 0.19 * l, 3.0);
            let g = bump(d, [0.62 * l, c[1]], 0.16 * l, 2.1);
            for (v, w) in f.values_mut().iter_mut().zip(g.values()) {
                *v += w;
            }
            Ok(f.zero_mean())
        }
        other => Err(Error::InvalidArgument(format!("unknown preset '{other}'"))),
    }
}
