//! Continuity equation `∂t ρ + div(uρ) = 0`: Eulerian finite volumes,
//! Lagrangian flow maps and renormalization diagnostics.

mod eulerian;
mod flow;
mod renormalization;

pub(crate) use eulerian::check_times;
pub use eulerian::{solve_continuity_eulerian, EulerianConfig, FaceMode, FaceVelocity};
pub use flow::{
    compressibility_bound, compressibility_check, compute_flow, invert_flow,
    lagrangian_solution, CompressibilityReport, FlowMap, InverseMap,
};
pub use renormalization::{distribution_check, renormalization_defect, LevelCheck, Renormalization};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{bilinear, write_field, Domain2D, ScalarField2D, VelocityField2D};
use crate::spectral::divergence;

/// Time-dependent velocity with spatial and temporal interpolation.
pub trait VelocitySource: Sync {
    fn domain(&self) -> &Domain2D;

    /// Cell-centred velocity at time `t`.
    fn velocity(&self, t: f64) -> VelocityField2D;

    /// Spectral divergence at time `t`.
    fn divergence(&self, t: f64) -> ScalarField2D;

    /// Velocity and divergence at an arbitrary point (bilinear in space).
    fn sample(&self, t: f64, x: [f64; 2]) -> ([f64; 2], f64);

    /// `‖div u(t)‖∞`.
    fn divergence_sup(&self, t: f64) -> f64 {
        self.divergence(t).max_abs()
    }

    fn is_steady(&self) -> bool {
        false
    }
}

/// Time-independent velocity.
#[derive(Debug, Clone)]
pub struct SteadyVelocity {
    u: VelocityField2D,
    div: ScalarField2D,
}

impl SteadyVelocity {
    pub fn new(u: VelocityField2D) -> Self {
        let div = divergence(u.ux(), u.uy(), u.domain());
        Self { u, div }
    }

    pub fn field(&self) -> &VelocityField2D {
        &self.u
    }
}

impl VelocitySource for SteadyVelocity {
    fn domain(&self) -> &Domain2D {
        self.u.domain()
    }

    fn velocity(&self, _t: f64) -> VelocityField2D {
        self.u.clone()
    }

    fn divergence(&self, _t: f64) -> ScalarField2D {
        self.div.clone()
    }

    fn sample(&self, _t: f64, x: [f64; 2]) -> ([f64; 2], f64) {
        let d = self.u.domain();
        (
            self.u.sample_bilinear(x[0], x[1]),
            bilinear(d, self.div.values(), x[0], x[1]),
        )
    }

    fn divergence_sup(&self, _t: f64) -> f64 {
        self.div.max_abs()
    }

    fn is_steady(&self) -> bool {
        true
    }
}

/// Velocity snapshots with linear interpolation in time (held constant
/// outside the sampled interval).
#[derive(Debug, Clone)]
pub struct SampledVelocity {
    times: Vec<f64>,
    fields: Vec<VelocityField2D>,
    divs: Vec<ScalarField2D>,
}

impl SampledVelocity {
    pub fn new(times: Vec<f64>, fields: Vec<VelocityField2D>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::InvalidArgument(
                "need one velocity field per sample time".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("sample times must increase".into()));
        }
        let d = *fields[0].domain();
        if fields.iter().any(|f| *f.domain() != d) {
            return Err(Error::DomainMismatch);
        }
        let divs = fields
            .iter()
            .map(|u| divergence(u.ux(), u.uy(), u.domain()))
            .collect();
        Ok(Self {
            times,
            fields,
            divs,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[VelocityField2D] {
        &self.fields
    }

    /// Bracketing indices and weight of the upper one.
    fn locate(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let j = self.times.partition_point(|&s| s <= t);
        let i = j - 1;
        let s = (t - self.times[i]) / (self.times[j] - self.times[i]);
        (i, j, s)
    }
}

impl VelocitySource for SampledVelocity {
    fn domain(&self) -> &Domain2D {
        self.fields[0].domain()
    }

    fn velocity(&self, t: f64) -> VelocityField2D {
        let (i, j, s) = self.locate(t);
        if s == 0.0 {
            return self.fields[i].clone();
        }
        self.fields[i].lerp(&self.fields[j], s)
    }

    fn divergence(&self, t: f64) -> ScalarField2D {
        let (i, j, s) = self.locate(t);
        if s == 0.0 {
            return self.divs[i].clone();
        }
        self.divs[i]
            .zip_with(&self.divs[j], |a, b| (1.0 - s) * a + s * b)
            .expect("same domain")
    }

    fn sample(&self, t: f64, x: [f64; 2]) -> ([f64; 2], f64) {
        let (i, j, s) = self.locate(t);
        let d = self.domain();
        let at = |k: usize| {
            (
                self.fields[k].sample_bilinear(x[0], x[1]),
                bilinear(d, self.divs[k].values(), x[0], x[1]),
            )
        };
        let (u0, d0) = at(i);
        if s == 0.0 {
            return (u0, d0);
        }
        let (u1, d1) = at(j);
        (
            [(1.0 - s) * u0[0] + s * u1[0], (1.0 - s) * u0[1] + s * u1[1]],
            (1.0 - s) * d0 + s * d1,
        )
    }
}

/// Snapshots `ρ(t_k, ·)` on a common domain.
#[derive(Debug, Clone)]
pub struct TimeSeriesField {
    times: Vec<f64>,
    snapshots: Vec<ScalarField2D>,
}

impl TimeSeriesField {
    pub fn new(times: Vec<f64>, snapshots: Vec<ScalarField2D>) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(Error::InvalidArgument(
                "need one snapshot per time".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("snapshot times must not decrease".into()));
        }
        let d = *snapshots[0].domain();
        if snapshots.iter().any(|s| *s.domain() != d) {
            return Err(Error::DomainMismatch);
        }
        Ok(Self { times, snapshots })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[ScalarField2D] {
        &self.snapshots
    }

    pub fn domain(&self) -> &Domain2D {
        self.snapshots[0].domain()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> &ScalarField2D {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &ScalarField2D {
        &self.snapshots[self.snapshots.len() - 1]
    }

    /// Snapshot recorded at `t` (to relative tolerance 1e-12).
    pub fn at_time(&self, t: f64) -> Option<&ScalarField2D> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|k| &self.snapshots[k])
    }

    /// Writes `snap_XXXX.field` files and an `index.csv` manifest.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut index = String::from("k,t,file\n");
        for (k, (t, s)) in self.times.iter().zip(&self.snapshots).enumerate() {
            let name = format!("snap_{k:04}.field");
            write_field(dir.join(&name), s)?;
            writeln!(index, "{k},{t:e},{name}").expect("write to string");
        }
        std::fs::write(dir.join("index.csv"), index)?;
        Ok(())
    }
}

/// Splits `[0, times.last]` into steps of at most `dt` that land exactly on
/// every sample time. Yields `(t_start, step, output_index_after)`.
pub(crate) fn schedule(times: &[f64], dt: f64) -> Vec<(f64, f64, Option<usize>)> {
    let mut out = Vec::new();
    let mut t0 = 0.0;
    for (k, &t1) in times.iter().enumerate() {
        let span = t1 - t0;
        if span <= 0.0 {
            continue;
        }
        let n = (span / dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for i in 0..n {
            let last = i + 1 == n;
            out.push((t0 + i as f64 * h, h, if last { Some(k) } else { None }));
        }
        t0 = t1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_velocity_interpolates_linearly() {
        let d = Domain2D::new(1.0, 8).unwrap();
        let a = VelocityField2D::from_fn(d, |_, _| [1.0, 0.0]).unwrap();
        let b = VelocityField2D::from_fn(d, |_, _| [3.0, 2.0]).unwrap();
        let s = SampledVelocity::new(vec![0.0, 1.0], vec![a, b]).unwrap();
        let (u, div) = s.sample(0.25, [0.3, 0.7]);
        assert!((u[0] - 1.5).abs() < 1e-14 && (u[1] - 0.5).abs() < 1e-14);
        assert!(div.abs() < 1e-12);
        assert_eq!(s.velocity(5.0).ux()[0], 3.0);
        assert_eq!(s.velocity(-1.0).ux()[0], 1.0);
    }

    #[test]
    fn schedule_hits_sample_times() {
        let sch = schedule(&[0.0, 0.3, 1.0], 0.1);
        let hits: Vec<_> = sch.iter().filter_map(|s| s.2).collect();
        assert_eq!(hits, vec![1, 2]);
        let total: f64 = sch.iter().map(|s| s.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(sch.iter().all(|s| s.1 <= 0.1 + 1e-12));
    }

    #[test]
    fn series_lookup() {
        let d = Domain2D::new(1.0, 4).unwrap();
        let s = TimeSeriesField::new(
            vec![0.0, 0.5],
            vec![ScalarField2D::zeros(d), ScalarField2D::constant(d, 1.0)],
        )
        .unwrap();
        assert_eq!(s.at_time(0.5).unwrap().values()[0], 1.0);
        assert!(s.at_time(0.25).is_none());
        let dir = tempfile::tempdir().unwrap();
        s.write_dir(dir.path()).unwrap();
        assert!(dir.path().join("snap_0001.field").exists());
    }
}
