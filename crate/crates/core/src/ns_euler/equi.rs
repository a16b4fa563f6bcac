//! Equi-integrability diagnostics for vorticity runs.

use std::fmt;
use std::sync::Arc;

use crate::biot_savart::{velocity_from_vorticity, BiotSavartConfig};
use crate::error::{Error, Result};
use crate::fields::{weak_lp_quasinorm, ScalarField2D};
use crate::transport::TimeSeriesField;

/// Convex, increasing, superlinear `G` with `G(0) = 0`.
#[derive(Clone)]
pub struct Gauge {
    name: String,
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gauge").field("name", &self.name).finish()
    }
}

impl Gauge {
    pub fn square() -> Self {
        Self {
            name: "s^2".into(),
            g: Arc::new(|s| s * s),
        }
    }

    pub fn s_log_s() -> Self {
        Self {
            name: "s*log(1+s)".into(),
            g: Arc::new(|s| s * s.ln_1p()),
        }
    }

    pub fn custom(name: &str, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let gauge = Self {
            name: name.into(),
            g: Arc::new(g),
        };
        gauge.check_admissible()?;
        Ok(gauge)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.g)(s)
    }

    /// Checks `G(0) = 0`, monotonicity, convexity (second differences) and
    /// growth of `G(s)/s` on a logarithmic grid.
    pub fn check_admissible(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InadmissibleGauge(format!("{}: {m}", self.name)));
        if self.eval(0.0) != 0.0 {
            return bad("G(0) != 0");
        }
        let grid: Vec<f64> = std::iter::once(0.0)
            .chain((0..=240).map(|i| 10f64.powf(-6.0 + i as f64 * 0.05)))
            .collect();
        let v: Vec<f64> = grid.iter().map(|&s| self.eval(s)).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return bad("non-finite values");
        }
        if v.windows(2).any(|w| w[1] < w[0]) {
            return bad("not increasing");
        }
        for i in 1..grid.len() - 1 {
            let (a, b, c) = (grid[i - 1], grid[i], grid[i + 1]);
            let slope_l = (v[i] - v[i - 1]) / (b - a);
            let slope_r = (v[i + 1] - v[i]) / (c - b);
            if slope_r < slope_l - 1e-9 * slope_l.abs().max(1e-300) {
                return bad("not convex");
            }
        }
        let q = |s: f64| self.eval(s) / s;
        if q(1e6) < 10.0 * q(1.0) {
            return bad("not superlinear");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquiReport {
    pub times: Vec<f64>,
    /// `∫G(|ω(t)|)`.
    pub integrals: Vec<f64>,
    /// `sup_t ∫G(|ω(t)|) <= ∫G(|ω(0)|)·(1 + 10⁻²)`.
    pub bounded: bool,
    /// Largest relative increase between consecutive snapshots.
    pub max_increase: f64,
    /// `∫_{|x - c| > 2r} |ω(t)|`.
    pub tail_masses: Vec<f64>,
}

/// Gauge integrals and tail masses of a run whose first snapshot is `t = 0`.
pub fn equi_integrability_report(
    run: &TimeSeriesField,
    gauge: &Gauge,
    center: [f64; 2],
    r: f64,
) -> Result<EquiReport> {
    gauge.check_admissible()?;
    if run.times()[0] != 0.0 {
        return Err(Error::InvalidArgument("run must start at t = 0".into()));
    }
    let d = *run.domain();
    let area = d.cell_area();
    let centers = d.centers();
    let integrals: Vec<f64> = run
        .snapshots()
        .iter()
        .map(|w| area * w.values().iter().map(|v| gauge.eval(v.abs())).sum::<f64>())
        .collect();
    let tail_masses = run
        .snapshots()
        .iter()
        .map(|w| {
            area * w
                .values()
                .iter()
                .zip(&centers)
                .filter(|(_, x)| d.torus_distance(**x, center) > 2.0 * r)
                .map(|(v, _)| v.abs())
                .sum::<f64>()
        })
        .collect();
    let i0 = integrals[0];
    let bounded = integrals.iter().all(|&v| v <= i0 * (1.0 + 1e-2));
    let max_increase = integrals
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(EquiReport {
        times: run.times().to_vec(),
        integrals,
        bounded,
        max_increase,
        tail_masses,
    })
}

/// `‖ |u| ‖_{L^{2,∞}} / ‖ω‖₁` with `u` from spectral Biot–Savart.
pub fn weak_velocity_ratio(omega: &ScalarField2D) -> Result<f64> {
    let u = velocity_from_vorticity(omega, &BiotSavartConfig::spectral())?;
    let l1 = omega.l1_norm();
    if l1 == 0.0 {
        return Ok(0.0);
    }
    Ok(weak_lp_quasinorm(&u.speed().samples(), 2.0)? / l1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Domain2D;

    #[test]
    fn gauges() {
        Gauge::square().check_admissible().unwrap();
        Gauge::s_log_s().check_admissible().unwrap();
        assert!(Gauge::custom("linear", |s| s).is_err());
        assert!(Gauge::custom("concave", |s: f64| s.sqrt()).is_err());
        assert!(Gauge::custom("shifted", |s| 1.0 + s * s).is_err());
    }

    #[test]
    fn square_gauge_is_twice_enstrophy() {
        let d = Domain2D::new(1.0, 8).unwrap();
        let w = ScalarField2D::from_fn(d, |x, y| x - y).unwrap();
        let s = TimeSeriesField::new(vec![0.0], vec![w.clone()]).unwrap();
        let r = equi_integrability_report(&s, &Gauge::square(), [0.5, 0.5], 1.0).unwrap();
        assert!((r.integrals[0] - w.l2_norm().powi(2)).abs() < 1e-14);
        assert_eq!(r.tail_masses, vec![0.0]);
    }
}
