//! Linear transport `∂t ω + u·∇ω = νΔω` with a prescribed velocity, its
//! exact discrete transpose, and an independently discretized backward
//! problem `-∂t φ - νΔφ - div(uφ) = χ`, `φ(T) = 0`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{Domain2D, ScalarField2D, VelocityField2D};
use crate::spectral::Spectral2D;
use crate::transport::TimeSeriesField;

/// Spatial operators shared by the forward and backward solvers.
pub struct LinearTransport {
    sp: Arc<Spectral2D>,
    nu: f64,
    dealias: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointMethod {
    /// Transpose of the forward step, `φ_n = A_nᵀ φ_{n+1} + Δt χ_n`.
    Exact,
    /// IF-RK4 on the backward equation with velocity frozen at `t_{n+1}`
    /// and `χ` interpolated linearly in time.
    Independent,
}

impl LinearTransport {
    pub fn new(domain: &Domain2D, nu: f64, dealias: bool) -> Self {
        Self {
            sp: Spectral2D::for_domain(domain),
            nu,
            dealias,
        }
    }

    fn project(&self, x: &[f64]) -> Vec<Complex64> {
        let mut s = self.sp.forward(x);
        if self.dealias {
            self.sp.dealias(&mut s);
        }
        s
    }

    fn back(&self, mut s: Vec<Complex64>) -> Vec<f64> {
        if self.dealias {
            self.sp.dealias(&mut s);
        }
        self.sp.inverse(s)
    }

    /// `L x = -P(u_x ∂x Px + u_y ∂y Px)`.
    pub fn advect(&self, u: &VelocityField2D, x: &[f64]) -> Vec<f64> {
        let s = self.project(x);
        let gx = self.sp.inverse(self.sp.ddx(&s));
        let gy = self.sp.inverse(self.sp.ddy(&s));
        let prod: Vec<f64> = (0..x.len())
            .map(|i| -(u.ux()[i] * gx[i] + u.uy()[i] * gy[i]))
            .collect();
        self.back(self.sp.forward(&prod))
    }

    /// `Lᵀ y = P(∂x(u_x Py) + ∂y(u_y Py))`.
    pub fn advect_transpose(&self, u: &VelocityField2D, y: &[f64]) -> Vec<f64> {
        let p = self.sp.inverse(self.project(y));
        let fx: Vec<f64> = p.iter().zip(u.ux()).map(|(a, b)| a * b).collect();
        let fy: Vec<f64> = p.iter().zip(u.uy()).map(|(a, b)| a * b).collect();
        let dx = self.sp.ddx(&self.sp.forward(&fx));
        let dy = self.sp.ddy(&self.sp.forward(&fy));
        self.back(dx.iter().zip(&dy).map(|(a, b)| a + b).collect())
    }

    /// `exp(ν Δ s) x`.
    pub fn heat(&self, x: &[f64], s: f64) -> Vec<f64> {
        if self.nu == 0.0 {
            return x.to_vec();
        }
        let mut f = self.sp.forward(x);
        let nu = self.nu;
        self.sp
            .apply(&mut f, |kx, ky| Complex64::new((-nu * self.sp.k2(kx, ky) * s).exp(), 0.0));
        self.sp.inverse(f)
    }

    /// IF-RK4 step `x ↦ A x` for `x' = νΔx + Lx + f(t)`; `f` gives the
    /// source at the start, middle and end of the step.
    fn if_rk4(
        &self,
        x: &[f64],
        dt: f64,
        op: impl Fn(&[f64]) -> Vec<f64>,
        src: Option<[&[f64]; 3]>,
    ) -> Vec<f64> {
        let m = x.len();
        let n = |y: &[f64], k: usize| -> Vec<f64> {
            let mut v = op(y);
            if let Some(s) = src {
                for (a, b) in v.iter_mut().zip(s[k]) {
                    *a += b;
                }
            }
            v.iter().map(|a| a * dt).collect()
        };
        let lin = |a: &[f64], b: &[f64], cb: f64| -> Vec<f64> {
            (0..m).map(|i| a[i] + cb * b[i]).collect()
        };
        let a = n(x, 0);
        let b = n(&self.heat(&lin(x, &a, 0.5), 0.5 * dt), 1);
        let c = n(&lin(&self.heat(x, 0.5 * dt), &b, 0.5), 1);
        let d = n(&lin(&self.heat(x, dt), &self.heat(&c, 0.5 * dt), 1.0), 2);
        let ex = self.heat(x, dt);
        let ea = self.heat(&a, dt);
        let bc = self.heat(&lin(&b, &c, 1.0), 0.5 * dt);
        (0..m)
            .map(|i| ex[i] + (ea[i] + 2.0 * bc[i] + d[i]) / 6.0)
            .collect()
    }

    /// Forward step with velocity `u` frozen over the step.
    pub fn step(&self, u: &VelocityField2D, x: &[f64], dt: f64) -> Vec<f64> {
        self.if_rk4(x, dt, |y| self.advect(u, y), None)
    }

    /// `Aᵀ y` for the map of [`LinearTransport::step`] (reverse-mode sweep
    /// through the RK stages; `exp(νΔs)` is symmetric).
    pub fn step_transpose(&self, u: &VelocityField2D, y: &[f64], dt: f64) -> Vec<f64> {
        let m = y.len();
        let lt = |v: &[f64]| -> Vec<f64> {
            self.advect_transpose(u, v).iter().map(|a| a * dt).collect()
        };
        let add = |acc: &mut Vec<f64>, v: &[f64], c: f64| {
            for i in 0..m {
                acc[i] += c * v[i];
            }
        };
        // cotangents of the stage outputs
        let ey = self.heat(y, dt);
        let ehy = self.heat(y, 0.5 * dt);
        let mut xb = ey.clone();
        let mut ab: Vec<f64> = ey.iter().map(|v| v / 6.0).collect();
        let mut bb: Vec<f64> = ehy.iter().map(|v| v / 3.0).collect();
        let mut cb: Vec<f64> = bb.clone();
        let db: Vec<f64> = y.iter().map(|v| v / 6.0).collect();
        // d = τL(E x + E½ c)
        let zd = lt(&db);
        add(&mut xb, &self.heat(&zd, dt), 1.0);
        add(&mut cb, &self.heat(&zd, 0.5 * dt), 1.0);
        // c = τL(E½ x + b/2)
        let zc = lt(&cb);
        add(&mut xb, &self.heat(&zc, 0.5 * dt), 1.0);
        add(&mut bb, &zc, 0.5);
        // b = τL E½(x + a/2)
        let zb = self.heat(&lt(&bb), 0.5 * dt);
        add(&mut xb, &zb, 1.0);
        add(&mut ab, &zb, 0.5);
        // a = τL x
        add(&mut xb, &lt(&ab), 1.0);
        xb
    }

    /// One step of the backward problem in reversed time `s = T - t`:
    /// `∂s φ = νΔφ + Lᵀφ + χ`, with `χ` at the three stage times.
    fn backward_step(
        &self,
        u: &VelocityField2D,
        phi: &[f64],
        dt: f64,
        chi: [&[f64]; 3],
    ) -> Vec<f64> {
        self.if_rk4(phi, dt, |y| self.advect_transpose(u, y), Some(chi))
    }
}

fn check_grid(
    times: &[f64],
    velocities: &[VelocityField2D],
    need: usize,
    d: &Domain2D,
) -> Result<()> {
    if times.len() < 2 || times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "step times must start at 0 and increase".into(),
        ));
    }
    if velocities.len() < need {
        return Err(Error::InvalidArgument(format!(
            "need {need} velocity fields, got {}",
            velocities.len()
        )));
    }
    if velocities.iter().any(|v| v.domain() != d) {
        return Err(Error::DomainMismatch);
    }
    Ok(())
}

/// Forward linear transport of `omega0` on the step grid `times`
/// (`t_0 = 0`), with `velocities[n]` used over `[t_n, t_{n+1}]`.
pub fn transport_run(
    omega0: &ScalarField2D,
    velocities: &[VelocityField2D],
    times: &[f64],
    nu: f64,
    dealias: bool,
) -> Result<TimeSeriesField> {
    let d = *omega0.domain();
    check_grid(times, velocities, times.len() - 1, &d)?;
    let op = LinearTransport::new(&d, nu, dealias);
    let mut x = omega0.values().to_vec();
    let mut snaps = vec![omega0.clone()];
    for n in 0..times.len() - 1 {
        x = op.step(&velocities[n], &x, times[n + 1] - times[n]);
        snaps.push(ScalarField2D::new(d, x.clone())?);
    }
    TimeSeriesField::new(times.to_vec(), snaps)
}

/// Backward solve with `φ(T) = 0`; `chi` is sampled on the step grid.
/// `velocities` holds `u(t_n)` for `n = 0..=M` (the exact method uses
/// `0..M`, the independent one `1..=M`).
pub fn adjoint_solve(
    chi: &TimeSeriesField,
    velocities: &[VelocityField2D],
    nu: f64,
    dealias: bool,
    method: AdjointMethod,
) -> Result<TimeSeriesField> {
    let d = *chi.domain();
    let times = chi.times();
    let m = times.len() - 1;
    check_grid(
        times,
        velocities,
        if method == AdjointMethod::Exact { m } else { m + 1 },
        &d,
    )?;
    let op = LinearTransport::new(&d, nu, dealias);
    let c = chi.snapshots();
    let mut phi = vec![0.0; d.len()];
    let mut out = vec![ScalarField2D::zeros(d)];
    for n in (0..m).rev() {
        let dt = times[n + 1] - times[n];
        phi = match method {
            AdjointMethod::Exact => {
                let mut p = op.step_transpose(&velocities[n], &phi, dt);
                for (a, b) in p.iter_mut().zip(c[n].values()) {
                    *a += dt * b;
                }
                p
            }
            AdjointMethod::Independent => {
                let mid: Vec<f64> = c[n]
                    .values()
                    .iter()
                    .zip(c[n + 1].values())
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                op.backward_step(
                    &velocities[n + 1],
                    &phi,
                    dt,
                    [c[n + 1].values(), &mid, c[n].values()],
                )
            }
        };
        out.push(ScalarField2D::new(d, phi.clone())?);
    }
    out.reverse();
    TimeSeriesField::new(times.to_vec(), out)
}

/// `|Σ_{n<M} Δt_n ⟨χ_n, ω_n⟩ - ⟨ω₀, φ_0⟩|`.
pub fn duality_residual(
    omega_run: &TimeSeriesField,
    phi_run: &TimeSeriesField,
    chi: &TimeSeriesField,
    omega0: &ScalarField2D,
) -> Result<f64> {
    let d = omega0.domain();
    for s in [omega_run, phi_run, chi] {
        if s.domain() != d {
            return Err(Error::DomainMismatch);
        }
        if s.times() != chi.times() {
            return Err(Error::InvalidArgument("time grids differ".into()));
        }
    }
    let t = chi.times();
    let lhs: f64 = (0..t.len() - 1)
        .map(|n| (t[n + 1] - t[n]) * chi.snapshots()[n].dot(&omega_run.snapshots()[n]))
        .sum();
    let rhs = omega0.dot(phi_run.first());
    Ok((lhs - rhs).abs())
}
