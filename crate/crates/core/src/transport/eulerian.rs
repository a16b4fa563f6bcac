//! Donor-cell upwind finite volumes on the periodic grid.

use std::sync::Arc;

use crate::biot_savart::{curl, streamfunction};
use crate::error::{Error, Result};
use crate::fields::{Domain2D, ScalarField2D, VelocityField2D};
use crate::spectral::Spectral2D;

use super::{schedule, TimeSeriesField, VelocitySource};

/// How cell-centred velocities are turned into face-normal velocities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceMode {
    /// Arithmetic mean of the two neighbouring cells.
    Average,
    /// Differences of a corner streamfunction (plus the mean flow), so the
    /// discrete divergence vanishes identically. Only meaningful for
    /// divergence-free `u`.
    Streamfunction,
}

/// Normal velocities on the east and north face of every cell.
#[derive(Debug, Clone)]
pub struct FaceVelocity {
    domain: Domain2D,
    east: Vec<f64>,
    north: Vec<f64>,
}

impl FaceVelocity {
    pub fn from_velocity(u: &VelocityField2D, mode: FaceMode) -> Self {
        match mode {
            FaceMode::Average => Self::averaged(u),
            FaceMode::Streamfunction => Self::from_streamfunction_of(u),
        }
    }

    fn averaged(u: &VelocityField2D) -> Self {
        let d = *u.domain();
        let n = d.resolution();
        let mut east = vec![0.0; d.len()];
        let mut north = vec![0.0; d.len()];
        for iy in 0..n {
            for ix in 0..n {
                let k = iy * n + ix;
                east[k] = 0.5 * (u.ux()[k] + u.ux()[iy * n + (ix + 1) % n]);
                north[k] = 0.5 * (u.uy()[k] + u.uy()[((iy + 1) % n) * n + ix]);
            }
        }
        Self {
            domain: d,
            east,
            north,
        }
    }

    fn from_streamfunction_of(u: &VelocityField2D) -> Self {
        let d = *u.domain();
        let w = curl(u);
        let psi = streamfunction(&w.zero_mean()).expect("zero-mean curl");
        let n = d.len() as f64;
        let mean = [
            u.ux().iter().sum::<f64>() / n,
            u.uy().iter().sum::<f64>() / n,
        ];
        Self::from_streamfunction(&psi, mean)
    }

    /// Faces from a cell-centred streamfunction `ψ` (with `u = ∇⊥ψ`) and a
    /// constant mean flow.
    pub fn from_streamfunction(psi: &ScalarField2D, mean: [f64; 2]) -> Self {
        let d = *psi.domain();
        let n = d.resolution();
        let h = d.spacing();
        let sp = Spectral2D::for_domain(&d);
        // corner value at the top-right of each cell
        let c = sp.shifted(psi.values(), 0.5, 0.5);
        let mut east = vec![0.0; d.len()];
        let mut north = vec![0.0; d.len()];
        for iy in 0..n {
            for ix in 0..n {
                let k = iy * n + ix;
                let below = ((iy + n - 1) % n) * n + ix;
                let left = iy * n + (ix + n - 1) % n;
                east[k] = mean[0] - (c[k] - c[below]) / h;
                north[k] = mean[1] + (c[k] - c[left]) / h;
            }
        }
        Self {
            domain: d,
            east,
            north,
        }
    }

    pub fn domain(&self) -> &Domain2D {
        &self.domain
    }

    pub fn east(&self) -> &[f64] {
        &self.east
    }

    pub fn north(&self) -> &[f64] {
        &self.north
    }

    /// Finite-volume divergence per cell.
    pub fn discrete_divergence(&self) -> Vec<f64> {
        let n = self.domain.resolution();
        let h = self.domain.spacing();
        (0..self.domain.len())
            .map(|k| {
                let (ix, iy) = (k % n, k / n);
                let w = iy * n + (ix + n - 1) % n;
                let s = ((iy + n - 1) % n) * n + ix;
                (self.east[k] - self.east[w] + self.north[k] - self.north[s]) / h
            })
            .collect()
    }

    /// Largest total outgoing face speed of any cell.
    pub fn max_outflow(&self) -> f64 {
        let n = self.domain.resolution();
        (0..self.domain.len())
            .map(|k| {
                let (ix, iy) = (k % n, k / n);
                let w = iy * n + (ix + n - 1) % n;
                let s = ((iy + n - 1) % n) * n + ix;
                self.east[k].max(0.0)
                    + (-self.east[w]).max(0.0)
                    + self.north[k].max(0.0)
                    + (-self.north[s]).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Largest stable step for the given CFL number.
    pub fn stable_dt(&self, cfl: f64) -> f64 {
        let out = self.max_outflow();
        if out == 0.0 {
            f64::INFINITY
        } else {
            cfl * self.domain.spacing() / out
        }
    }

    /// One forward-Euler donor-cell step.
    pub fn step(&self, rho: &[f64], dt: f64) -> Vec<f64> {
        let n = self.domain.resolution();
        let r = dt / self.domain.spacing();
        let mut fe = vec![0.0; rho.len()];
        let mut fn_ = vec![0.0; rho.len()];
        for iy in 0..n {
            for ix in 0..n {
                let k = iy * n + ix;
                let e = iy * n + (ix + 1) % n;
                let no = ((iy + 1) % n) * n + ix;
                let ue = self.east[k];
                let un = self.north[k];
                fe[k] = ue * if ue > 0.0 { rho[k] } else { rho[e] };
                fn_[k] = un * if un > 0.0 { rho[k] } else { rho[no] };
            }
        }
        let mut out = vec![0.0; rho.len()];
        for iy in 0..n {
            for ix in 0..n {
                let k = iy * n + ix;
                let w = iy * n + (ix + n - 1) % n;
                let s = ((iy + n - 1) % n) * n + ix;
                out[k] = rho[k] - r * (fe[k] - fe[w] + fn_[k] - fn_[s]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerianConfig {
    /// Courant number in `(0, 1]`.
    pub cfl: f64,
    /// Fixed step; `None` picks the largest stable step each step.
    pub dt: Option<f64>,
    pub faces: FaceMode,
}

impl Default for EulerianConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            dt: None,
            faces: FaceMode::Average,
        }
    }
}

/// Upwind solution of the continuity equation recorded at `times`
/// (strictly increasing, nonnegative; the face velocity of each step is
/// taken at the step's start).
pub fn solve_continuity_eulerian(
    u: &dyn VelocitySource,
    rho0: &ScalarField2D,
    times: &[f64],
    cfg: &EulerianConfig,
) -> Result<TimeSeriesField> {
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
        return Err(Error::OutOfRange(format!("cfl = {} not in (0, 1]", cfg.cfl)));
    }
    check_times(times)?;
    if u.domain() != rho0.domain() {
        return Err(Error::DomainMismatch);
    }
    if !rho0.is_finite() {
        return Err(Error::NonFinite);
    }
    let steady: Option<Arc<FaceVelocity>> = u
        .is_steady()
        .then(|| Arc::new(FaceVelocity::from_velocity(&u.velocity(0.0), cfg.faces)));
    let faces_at = |t: f64| -> Arc<FaceVelocity> {
        match &steady {
            Some(f) => f.clone(),
            None => Arc::new(FaceVelocity::from_velocity(&u.velocity(t), cfg.faces)),
        }
    };

    let mut snaps = Vec::with_capacity(times.len());
    let mut rho = rho0.values().to_vec();
    if times[0] == 0.0 {
        snaps.push(rho0.clone());
    }
    let mut t = 0.0;
    for (k, &t_out) in times.iter().enumerate() {
        if t_out == 0.0 {
            continue;
        }
        match cfg.dt {
            Some(dt) => {
                for (t0, h, _) in schedule(&[t_out - t], dt) {
                    let f = faces_at(t + t0);
                    let limit = f.stable_dt(cfg.cfl);
                    if h > limit * (1.0 + 1e-12) {
                        return Err(Error::CflViolation {
                            requested: dt,
                            suggested: limit,
                        });
                    }
                    rho = f.step(&rho, h);
                }
            }
            None => {
                while t < t_out {
                    let f = faces_at(t);
                    let mut h = f.stable_dt(cfg.cfl).min(t_out - t);
                    // avoid a sliver step at the end of the interval
                    if t_out - t - h < 1e-12 * t_out {
                        h = t_out - t;
                    }
                    rho = f.step(&rho, h);
                    t += h;
                }
            }
        }
        t = t_out;
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        debug_assert_eq!(snaps.len(), k);
        snaps.push(ScalarField2D::from_raw(*rho0.domain(), rho.clone()));
    }
    TimeSeriesField::new(times.to_vec(), snaps)
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] < 0.0 || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(
            "output times must be finite and nonnegative".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("output times must increase".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{bump, windowed_rotation};
    use crate::transport::SteadyVelocity;

    #[test]
    fn zero_velocity_is_identity() {
        let d = Domain2D::new(1.0, 16).unwrap();
        let rho = bump(d, [0.5, 0.5], 0.3, 1.0);
        let u = SteadyVelocity::new(VelocityField2D::zeros(d));
        let s = solve_continuity_eulerian(&u, &rho, &[0.0, 1.0], &EulerianConfig::default()).unwrap();
        assert_eq!(s.last().values(), rho.values());
    }

    #[test]
    fn streamfunction_faces_are_discretely_solenoidal() {
        let d = Domain2D::new(1.0, 32).unwrap();
        let u = windowed_rotation(d, [0.5, 0.5], 1.0, 0.1, 0.4);
        let f = FaceVelocity::from_velocity(&u, FaceMode::Streamfunction);
        let div = f.discrete_divergence();
        let scale = f.max_outflow() / d.spacing();
        assert!(div.iter().all(|v| v.abs() < 1e-12 * scale));
    }

    #[test]
    fn mass_and_max_principle() {
        let d = Domain2D::new(1.0, 32).unwrap();
        let u = SteadyVelocity::new(windowed_rotation(d, [0.5, 0.5], 2.0, 0.1, 0.45));
        let rho = bump(d, [0.6, 0.5], 0.15, 1.0);
        let cfg = EulerianConfig {
            faces: FaceMode::Streamfunction,
            ..Default::default()
        };
        let s = solve_continuity_eulerian(&u, &rho, &[0.0, 0.5, 1.0], &cfg).unwrap();
        let m0 = rho.integral();
        for snap in s.snapshots() {
            assert!((snap.integral() - m0).abs() < 1e-12 * m0);
            assert!(snap.min() >= -1e-12 && snap.max() <= rho.max() + 1e-12);
        }
    }

    #[test]
    fn cfl_violation_suggests_dt() {
        let d = Domain2D::new(1.0, 16).unwrap();
        let u = SteadyVelocity::new(VelocityField2D::from_fn(d, |_, _| [1.0, 0.0]).unwrap());
        let rho = bump(d, [0.5, 0.5], 0.3, 1.0);
        let cfg = EulerianConfig {
            cfl: 0.5,
            dt: Some(0.1),
            faces: FaceMode::Average,
        };
        match solve_continuity_eulerian(&u, &rho, &[1.0], &cfg) {
            Err(Error::CflViolation { suggested, .. }) => {
                assert!((suggested - 0.5 / 16.0).abs() < 1e-14)
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }
}
