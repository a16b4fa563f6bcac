//! Pseudo-spectral 2D Navier–Stokes in vorticity form,
//! `∂t ω + u·∇ω = νΔω`, `u = k * ω`, with RK4 for advection and an exact
//! integrating factor for diffusion.

mod adjoint;
mod equi;

pub use adjoint::{
    adjoint_solve, duality_residual, transport_run, AdjointMethod, LinearTransport,
};
pub use equi::{equi_integrability_report, weak_velocity_ratio, EquiReport, Gauge};

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::biot_savart::{check_zero_mean, velocity_coefficients};
use crate::error::{Error, Result};
use crate::fields::{Domain2D, ScalarField2D, VelocityField2D};
use crate::spectral::{gaussian_smooth, Spectral2D};
use crate::transport::{schedule, TimeSeriesField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NSConfig {
    pub nu: f64,
    pub dt: f64,
    pub t_final: f64,
    pub dealias: bool,
    /// Advective limit on `dt·max(|u_x| + |u_y|)/h`.
    pub cfl: f64,
}

impl Default for NSConfig {
    fn default() -> Self {
        Self {
            nu: 0.0,
            dt: 1e-3,
            t_final: 1.0,
            dealias: true,
            cfl: 0.8,
        }
    }
}

impl NSConfig {
    fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::OutOfRange(format!("viscosity {} must be >= 0", self.nu)));
        }
        if !(self.dt > 0.0 && self.t_final >= 0.0 && self.cfl > 0.0) {
            return Err(Error::OutOfRange("dt, T and cfl must be positive".into()));
        }
        Ok(())
    }
}

/// One solver per domain and configuration; integrating factors are
/// cached for the last step size used.
pub struct NsSolver {
    sp: Arc<Spectral2D>,
    cfg: NSConfig,
    k2: Vec<f64>,
}

/// Diagnostics at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsDiagnostics {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    /// `½‖ω‖₂²`.
    pub enstrophy: f64,
    /// `½‖∇ω‖₂²`.
    pub palinstrophy: f64,
    pub min: f64,
    pub max: f64,
    /// `ν∫₀ᵗ‖∇ω‖₂²` by the trapezoid rule over steps.
    pub dissipated: f64,
}

impl NsSolver {
    pub fn new(domain: &Domain2D, cfg: NSConfig) -> Result<Self> {
        cfg.validate()?;
        let sp = Spectral2D::for_domain(domain);
        let n = domain.resolution();
        let k2 = (0..n * n).map(|i| sp.k2(i % n, i / n)).collect();
        Ok(Self { sp, cfg, k2 })
    }

    pub fn config(&self) -> &NSConfig {
        &self.cfg
    }

    fn factors(&self, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let nu = self.cfg.nu;
        let e = self.k2.iter().map(|k| (-nu * k * dt).exp()).collect();
        let eh = self.k2.iter().map(|k| (-0.5 * nu * k * dt).exp()).collect();
        (e, eh)
    }

    /// Velocity at cell centres from vorticity coefficients.
    pub fn velocity(&self, w: &[Complex64]) -> VelocityField2D {
        let mut wd = w.to_vec();
        if self.cfg.dealias {
            self.sp.dealias(&mut wd);
        }
        let (sx, sy) = velocity_coefficients(&self.sp, &wd, false);
        VelocityField2D::from_raw(*self.sp.domain(), self.sp.inverse(sx), self.sp.inverse(sy))
    }

    /// `-P(u·∇ω)` and `max(|u_x| + |u_y|)`.
    fn nonlinear(&self, w: &[Complex64]) -> (Vec<Complex64>, f64) {
        let sp = &self.sp;
        let mut wd = w.to_vec();
        if self.cfg.dealias {
            sp.dealias(&mut wd);
        }
        let (sx, sy) = velocity_coefficients(sp, &wd, false);
        let ux = sp.inverse(sx);
        let uy = sp.inverse(sy);
        let wx = sp.inverse(sp.ddx(&wd));
        let wy = sp.inverse(sp.ddy(&wd));
        let mut speed = 0.0_f64;
        let adv: Vec<f64> = (0..ux.len())
            .map(|i| {
                speed = speed.max(ux[i].abs() + uy[i].abs());
                -(ux[i] * wx[i] + uy[i] * wy[i])
            })
            .collect();
        let mut out = sp.forward(&adv);
        if self.cfg.dealias {
            sp.dealias(&mut out);
        }
        out[0] = Complex64::new(0.0, 0.0);
        (out, speed)
    }

    /// Advances `w` by one IF-RK4 step of size `dt`.
    pub fn step_spectral(&self, w: &mut Vec<Complex64>, dt: f64) -> Result<()> {
        let (e, eh) = self.factors(dt);
        self.step_with(w, dt, &e, &eh)
    }

    fn step_with(&self, w: &mut Vec<Complex64>, dt: f64, e: &[f64], eh: &[f64]) -> Result<()> {
        let h = self.sp.domain().spacing();
        let (na, speed) = self.nonlinear(w);
        if dt * speed / h > self.cfg.cfl {
            return Err(Error::CflViolation {
                requested: dt,
                suggested: 0.9 * self.cfg.cfl * h / speed,
            });
        }
        let m = w.len();
        let a: Vec<Complex64> = na.iter().map(|v| v * dt).collect();
        let s: Vec<Complex64> = (0..m).map(|i| (w[i] + 0.5 * a[i]) * eh[i]).collect();
        let b: Vec<Complex64> = self.nonlinear(&s).0.iter().map(|v| v * dt).collect();
        let s: Vec<Complex64> = (0..m).map(|i| w[i] * eh[i] + 0.5 * b[i]).collect();
        let c: Vec<Complex64> = self.nonlinear(&s).0.iter().map(|v| v * dt).collect();
        let s: Vec<Complex64> = (0..m).map(|i| w[i] * e[i] + c[i] * eh[i]).collect();
        let d: Vec<Complex64> = self.nonlinear(&s).0.iter().map(|v| v * dt).collect();
        for i in 0..m {
            w[i] = w[i] * e[i] + (a[i] * e[i] + 2.0 * (b[i] + c[i]) * eh[i] + d[i]) / 6.0;
        }
        Ok(())
    }

    fn diagnostics(&self, t: f64, w: &[Complex64], dissipated: f64) -> (NsDiagnostics, ScalarField2D) {
        let d = *self.sp.domain();
        let field = ScalarField2D::from_raw(d, self.sp.inverse(w.to_vec()));
        // Parseval: h² Σ f² = (h²/N²) Σ |f̂|²
        let scale = d.cell_area() / d.len() as f64;
        let grad2: f64 = w
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let n = d.resolution();
                let kx = self.sp.kd(i % n);
                let ky = self.sp.kd(i / n);
                (kx * kx + ky * ky) * c.norm_sqr()
            })
            .sum::<f64>()
            * scale;
        let l2 = field.l2_norm();
        (
            NsDiagnostics {
                t,
                l1: field.l1_norm(),
                l2,
                enstrophy: 0.5 * l2 * l2,
                palinstrophy: 0.5 * grad2,
                min: field.min(),
                max: field.max(),
                dissipated,
            },
            field,
        )
    }
}

/// One IF-RK4 step of size `cfg.dt`.
pub fn step_ns(omega: &ScalarField2D, cfg: &NSConfig) -> Result<ScalarField2D> {
    check_zero_mean(omega)?;
    let solver = NsSolver::new(omega.domain(), *cfg)?;
    let mut w = solver.sp.forward(omega.values());
    solver.step_spectral(&mut w, cfg.dt)?;
    Ok(ScalarField2D::from_raw(*omega.domain(), solver.sp.inverse(w)))
}

/// A single viscosity run.
#[derive(Debug, Clone)]
pub struct NsRun {
    pub nu: f64,
    pub initial: ScalarField2D,
    pub series: TimeSeriesField,
    /// Per-step diagnostics, starting at `t = 0`.
    pub diagnostics: Vec<NsDiagnostics>,
    /// Velocity at the start of every step and at the final time, when
    /// requested.
    pub step_velocities: Option<(Vec<f64>, Vec<VelocityField2D>)>,
}

impl NsRun {
    pub fn final_field(&self) -> &ScalarField2D {
        self.series.last()
    }

    /// `max_t |½‖ω(t)‖² - ½‖ω₀‖² + ν∫₀ᵗ‖∇ω‖²| / (‖ω₀‖₂² max(t, 1))`.
    pub fn enstrophy_balance_residual(&self) -> f64 {
        let d0 = self.diagnostics[0];
        let norm = 2.0 * d0.enstrophy;
        if norm == 0.0 {
            return 0.0;
        }
        self.diagnostics
            .iter()
            .map(|d| (d.enstrophy - d0.enstrophy + d.dissipated).abs() / (norm * d.t.max(1.0)))
            .fold(0.0, f64::max)
    }

    /// Largest relative one-step increase of `‖ω‖₁`.
    pub fn l1_increase(&self) -> f64 {
        self.diagnostics
            .windows(2)
            .map(|w| (w[1].l1 - w[0].l1) / w[0].l1.max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }
}

/// Integrates from `omega0` and records snapshots at `times`.
pub fn integrate(
    omega0: &ScalarField2D,
    cfg: &NSConfig,
    times: &[f64],
    record_velocity: bool,
) -> Result<NsRun> {
    check_zero_mean(omega0)?;
    crate::transport::check_times(times)?;
    let solver = NsSolver::new(omega0.domain(), *cfg)?;
    let mut w = solver.sp.forward(omega0.values());
    let mut snaps = Vec::with_capacity(times.len());
    let (d0, f0) = solver.diagnostics(0.0, &w, 0.0);
    if times[0] == 0.0 {
        snaps.push(f0);
    }
    let mut diags = vec![d0];
    let mut vel_t = Vec::new();
    let mut vel = Vec::new();
    let mut cache: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut dissipated = 0.0;
    let mut t = 0.0;
    for (t0, h, rec) in schedule(times, cfg.dt) {
        if record_velocity {
            vel_t.push(t0);
            vel.push(solver.velocity(&w));
        }
        if cache.as_ref().map(|c| c.0) != Some(h) {
            let (e, eh) = solver.factors(h);
            cache = Some((h, e, eh));
        }
        let (_, e, eh) = cache.as_ref().expect("factors");
        let before = diags.last().expect("nonempty").palinstrophy;
        solver.step_with(&mut w, h, e, eh)?;
        t = t0 + h;
        let (mut dg, field) = solver.diagnostics(t, &w, 0.0);
        dissipated += cfg.nu * h * (before + dg.palinstrophy);
        dg.dissipated = dissipated;
        if !(dg.l2.is_finite()) {
            return Err(Error::NonFinite);
        }
        diags.push(dg);
        if rec.is_some() {
            snaps.push(field);
        }
    }
    if record_velocity {
        vel_t.push(t);
        vel.push(solver.velocity(&w));
    }
    Ok(NsRun {
        nu: cfg.nu,
        initial: omega0.clone(),
        series: TimeSeriesField::new(times.to_vec(), snaps)?,
        diagnostics: diags,
        step_velocities: record_velocity.then_some((vel_t, vel)),
    })
}

/// `ω₀ * G_σ` with `σ = c₀√ν`, `c₀ = 1`.
pub fn mollify(omega0: &ScalarField2D, nu: f64) -> ScalarField2D {
    if nu == 0.0 {
        return omega0.clone();
    }
    gaussian_smooth(omega0, nu.sqrt())
}

#[derive(Debug, Clone)]
pub struct ViscositySweep {
    pub viscosities: Vec<f64>,
    pub initial: ScalarField2D,
    pub runs: Vec<NsRun>,
}

/// Runs every viscosity from mollified data, members in parallel.
pub fn run_sweep(
    omega0: &ScalarField2D,
    template: &NSConfig,
    viscosities: &[f64],
    times: &[f64],
) -> Result<ViscositySweep> {
    if viscosities.is_empty() || viscosities.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::OutOfRange("viscosities must be positive".into()));
    }
    if viscosities.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::OutOfRange("viscosities must decrease".into()));
    }
    check_zero_mean(omega0)?;
    let runs = viscosities
        .par_iter()
        .map(|&nu| {
            let cfg = NSConfig { nu, ..*template };
            integrate(&mollify(omega0, nu), &cfg, times, false)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ViscositySweep {
        viscosities: viscosities.to_vec(),
        initial: omega0.clone(),
        runs,
    })
}

/// CSV with header `t,L1,L2,enstrophy,palinstrophy,min,max`.
pub fn diagnostics_csv(diags: &[NsDiagnostics]) -> String {
    let mut s = String::from("t,L1,L2,enstrophy,palinstrophy,min,max\n");
    for d in diags {
        writeln!(
            s,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            d.t, d.l1, d.l2, d.enstrophy, d.palinstrophy, d.min, d.max
        )
        .expect("write to string");
    }
    s
}
