//! Particle flow maps `X(t, x)`, their inverses and Lagrangian solutions.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{bilinear, Domain2D, ScalarField2D};

use super::eulerian::check_times;
use super::{schedule, VelocitySource};

/// Flow map sampled at cell-centre seeds. Positions are unwrapped (not
/// reduced modulo `L`).
#[derive(Debug, Clone)]
pub struct FlowMap {
    domain: Domain2D,
    dt: f64,
    times: Vec<f64>,
    positions: Vec<Vec<[f64; 2]>>,
    jacobian: Vec<Vec<f64>>,
}

/// State `(x, y, log J)`.
type State = [f64; 3];

fn rk4(u: &dyn VelocitySource, t: f64, h: f64, s: State) -> State {
    let f = |t: f64, s: State| -> State {
        let (v, div) = u.sample(t, [s[0], s[1]]);
        [v[0], v[1], div]
    };
    let add = |s: State, k: State, a: f64| [s[0] + a * k[0], s[1] + a * k[1], s[2] + a * k[2]];
    let k1 = f(t, s);
    let k2 = f(t + 0.5 * h, add(s, k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, add(s, k2, 0.5 * h));
    let k4 = f(t + h, add(s, k3, h));
    [
        s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        s[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

/// RK4 particle flow from every cell centre, recorded at `times`.
pub fn compute_flow(u: &dyn VelocitySource, times: &[f64], dt: f64) -> Result<FlowMap> {
    if !(dt > 0.0) {
        return Err(Error::OutOfRange(format!("dt = {dt} must be positive")));
    }
    check_times(times)?;
    let d = *u.domain();
    let sch = schedule(times, dt);
    let seeds = d.centers();
    let trajectories: Vec<Result<Vec<State>>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut s = [x[0], x[1], 0.0];
            let mut out = Vec::with_capacity(times.len());
            if times[0] == 0.0 {
                out.push(s);
            }
            for &(t0, h, rec) in &sch {
                s = rk4(u, t0, h, s);
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::ParticleNotFinite { seed: i });
                }
                if rec.is_some() {
                    out.push(s);
                }
            }
            Ok(out)
        })
        .collect();
    let mut positions = vec![Vec::with_capacity(seeds.len()); times.len()];
    let mut jacobian = vec![Vec::with_capacity(seeds.len()); times.len()];
    for tr in trajectories {
        for (k, s) in tr?.into_iter().enumerate() {
            positions[k].push([s[0], s[1]]);
            jacobian[k].push(s[2].exp());
        }
    }
    Ok(FlowMap {
        domain: d,
        dt,
        times: times.to_vec(),
        positions,
        jacobian,
    })
}

impl FlowMap {
    pub fn domain(&self) -> &Domain2D {
        &self.domain
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `X(t_k, x_i)` for every seed.
    pub fn positions(&self, k: usize) -> &[[f64; 2]] {
        &self.positions[k]
    }

    /// `JX(t_k, x_i)` for every seed.
    pub fn jacobian(&self, k: usize) -> &[f64] {
        &self.jacobian[k]
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(Error::UnknownTime(t))
    }

    /// Measured compressibility constant `max JX` over all samples (at
    /// least 1, since `X(0) = id`).
    pub fn compressibility(&self) -> f64 {
        self.jacobian
            .iter()
            .flatten()
            .fold(1.0_f64, |m, &j| m.max(j))
    }

    /// Periodic displacement field `X(t_k, x) - x` sampled at `p`.
    fn displacement_at(&self, k: usize, p: [f64; 2]) -> [f64; 2] {
        let d = &self.domain;
        let (dx, dy): (Vec<f64>, Vec<f64>) = self.positions[k]
            .iter()
            .zip(d.centers())
            .map(|(x, c)| (x[0] - c[0], x[1] - c[1]))
            .unzip();
        [bilinear(d, &dx, p[0], p[1]), bilinear(d, &dy, p[0], p[1])]
    }
}

/// `X⁻¹(t, ·)` at cell centres, from the reversed-time ODE.
#[derive(Debug, Clone)]
pub struct InverseMap {
    pub t: f64,
    /// Unwrapped preimages of the cell centres.
    pub preimages: Vec<[f64; 2]>,
    /// `JX(t, X⁻¹(t, x))` integrated along the backward path.
    pub jacobian: Vec<f64>,
    /// `max |X(t, X⁻¹(t, x)) - x|` (torus metric, bilinear in `X`).
    pub composition_defect: f64,
}

/// Integrates `dX/ds = u(s, X)` from `s = t` back to 0 for every cell
/// centre, on the same step schedule as the forward flow.
pub fn invert_flow(flow: &FlowMap, u: &dyn VelocitySource, t: f64) -> Result<InverseMap> {
    let k = flow.time_index(t)?;
    let d = flow.domain;
    let t = flow.times[k];
    let sch = schedule(&flow.times[..=k], flow.dt);
    let centers = d.centers();
    let back: Vec<State> = centers
        .par_iter()
        .map(|x| {
            let mut s = [x[0], x[1], 0.0];
            for &(t0, h, _) in sch.iter().rev() {
                s = rk4(u, t0 + h, -h, s);
            }
            s
        })
        .collect();
    if let Some(i) = back.iter().position(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(Error::ParticleNotFinite { seed: i });
    }
    // Going backward accumulates -∫ div u, i.e. -log J.
    let preimages: Vec<[f64; 2]> = back.iter().map(|s| [s[0], s[1]]).collect();
    let jacobian: Vec<f64> = back.iter().map(|s| (-s[2]).exp()).collect();
    let defect = preimages
        .par_iter()
        .zip(&centers)
        .map(|(y, x)| {
            let yw = [d.wrap(y[0]), d.wrap(y[1])];
            let disp = flow.displacement_at(k, yw);
            let z = [yw[0] + disp[0], yw[1] + disp[1]];
            let e = d.displacement(z, *x);
            e[0].abs().max(e[1].abs())
        })
        .reduce(|| 0.0, f64::max);
    let limit = 10.0 * d.spacing();
    if defect > limit {
        return Err(Error::NotInvertible { defect, limit });
    }
    Ok(InverseMap {
        t,
        preimages,
        jacobian,
        composition_defect: defect,
    })
}

/// `ρ(t, x) = ρ₀(X⁻¹(t, x)) / JX(t, X⁻¹(t, x))` with bilinear sampling of
/// `ρ₀` and of the forward Jacobian.
pub fn lagrangian_solution(
    rho0: &ScalarField2D,
    flow: &FlowMap,
    inverse: &InverseMap,
) -> Result<ScalarField2D> {
    if rho0.domain() != flow.domain() {
        return Err(Error::DomainMismatch);
    }
    let k = flow.time_index(inverse.t)?;
    if inverse.t == 0.0 {
        return Ok(rho0.clone());
    }
    let d = flow.domain;
    let jac = flow.jacobian(k);
    let values = inverse
        .preimages
        .iter()
        .map(|y| {
            let (x, y) = (d.wrap(y[0]), d.wrap(y[1]));
            rho0.sample_bilinear(x, y) / bilinear(&d, jac, x, y)
        })
        .collect();
    ScalarField2D::new(d, values)
}

/// `exp(∫₀ᵀ ‖div u‖∞ dt)` by the trapezoid rule on steps of `dt`.
pub fn compressibility_bound(u: &dyn VelocitySource, t_final: f64, dt: f64) -> f64 {
    if u.is_steady() {
        return (u.divergence_sup(0.0) * t_final).exp();
    }
    let integral: f64 = schedule(&[t_final], dt)
        .iter()
        .map(|&(t0, h, _)| 0.5 * h * (u.divergence_sup(t0) + u.divergence_sup(t0 + h)))
        .sum();
    integral.exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressibilityReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `|B| / (L̂ (|X⁻¹(B)| + slack))` seen.
    pub worst_ratio: f64,
}

/// Monte-Carlo check of `|B| ≤ L̂ |X(t)⁻¹(B)|` on random grid-aligned
/// rectangles. `|X⁻¹(B)|` is estimated by counting seeds that land in `B`,
/// with a slack of one cell per unit of perimeter for the counting error.
pub fn compressibility_check(
    flow: &FlowMap,
    k: usize,
    l_hat: f64,
    trials: usize,
    rng: &mut impl Rng,
) -> CompressibilityReport {
    let d = flow.domain;
    let n = d.resolution();
    let h = d.spacing();
    let cells: Vec<(usize, usize)> = flow.positions[k]
        .iter()
        .map(|p| {
            let i = ((d.wrap(p[0]) / h).floor() as usize).min(n - 1);
            let j = ((d.wrap(p[1]) / h).floor() as usize).min(n - 1);
            (i, j)
        })
        .collect();
    let mut violations = 0;
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let x0 = rng.random_range(0..n);
        let y0 = rng.random_range(0..n);
        let w = rng.random_range(1..=n / 2);
        let hgt = rng.random_range(1..=n / 2);
        let inside = |i: usize, j: usize| (i + n - x0) % n < w && (j + n - y0) % n < hgt;
        let count = cells.iter().filter(|&&(i, j)| inside(i, j)).count();
        let area = (w * hgt) as f64 * h * h;
        let pre = count as f64 * h * h;
        let slack = 2.0 * (w + hgt) as f64 * h * h;
        let ratio = area / (l_hat * (pre + slack));
        worst = worst.max(ratio);
        if ratio > 1.0 {
            violations += 1;
        }
    }
    CompressibilityReport {
        trials,
        violations,
        worst_ratio: worst,
    }
}
