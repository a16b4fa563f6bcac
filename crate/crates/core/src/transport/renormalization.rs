//! Admissible renormalizations `β` and the defect of `∫β(ρ)` against the
//! chain-rule balance `d/dt ∫β(ρ) = -∫ div u (β'(ρ)ρ - β(ρ))`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{distribution_table, ScalarField2D};
use crate::spectral::Spectral2D;
use crate::presets::{smooth_step, smooth_step_derivative};

use super::{TimeSeriesField, VelocitySource};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A `C¹`, bounded `β` vanishing near 0 with `s β'(s)` bounded.
#[derive(Clone)]
pub struct Renormalization {
    name: String,
    beta: Scalar,
    dbeta: Scalar,
}

impl fmt::Debug for Renormalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Renormalization")
            .field("name", &self.name)
            .finish()
    }
}

/// `g(s)·χ(s)` with `χ` a C∞ cut that is 0 on `|s| <= a` and 1 on `|s| >= 2a`.
fn cut(
    a: f64,
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    dg: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> (Scalar, Scalar) {
    let g = Arc::new(g);
    let g2 = g.clone();
    let beta = move |s: f64| g(s) * smooth_step((s.abs() - a) / a);
    let dbeta = move |s: f64| {
        let t = (s.abs() - a) / a;
        dg(s) * smooth_step(t) + g2(s) * s.signum() * smooth_step_derivative(t) / a
    };
    (Arc::new(beta), Arc::new(dbeta))
}

impl Renormalization {
    /// Validates a user-supplied pair `(β, β')`.
    pub fn custom(
        name: &str,
        beta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dbeta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let r = Self {
            name: name.to_string(),
            beta: Arc::new(beta),
            dbeta: Arc::new(dbeta),
        };
        r.check_admissible()?;
        Ok(r)
    }

    /// `tanh(s²)` cut off below `a`.
    pub fn tanh_square(a: f64) -> Self {
        let (beta, dbeta) = cut(
            a,
            |s| (s * s).tanh(),
            |s| 2.0 * s / (s * s).cosh().powi(2),
        );
        Self::builtin(format!("tanh_square(a={a})"), beta, dbeta)
    }

    /// `s²/(1 + s²)` cut off below `a`.
    pub fn rational_square(a: f64) -> Self {
        let (beta, dbeta) = cut(
            a,
            |s| s * s / (1.0 + s * s),
            |s| 2.0 * s / (1.0 + s * s).powi(2),
        );
        Self::builtin(format!("rational_square(a={a})"), beta, dbeta)
    }

    /// `1 - exp(-s²)` cut off below `a`.
    pub fn exp_square(a: f64) -> Self {
        let (beta, dbeta) = cut(
            a,
            |s| -(-s * s).exp_m1(),
            |s| 2.0 * s * (-s * s).exp(),
        );
        Self::builtin(format!("exp_square(a={a})"), beta, dbeta)
    }

    /// The three built-in choices with a common cut.
    pub fn standard(a: f64) -> Vec<Self> {
        vec![Self::tanh_square(a), Self::rational_square(a), Self::exp_square(a)]
    }

    fn builtin(name: String, beta: Scalar, dbeta: Scalar) -> Self {
        let r = Self { name, beta, dbeta };
        debug_assert!(r.check_admissible().is_ok());
        r
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.beta)(s)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        (self.dbeta)(s)
    }

    /// Numerical admissibility test on a logarithmic grid of `±s`.
    pub fn check_admissible(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InadmissibleRenormalization(format!("{}: {m}", self.name)));
        let mut grid = vec![0.0];
        for i in 0..=480 {
            let s = 10f64.powf(-12.0 + i as f64 * 0.05);
            grid.push(s);
            grid.push(-s);
        }
        let b = |s: f64| self.eval(s);
        let db = |s: f64| self.derivative(s);
        if grid.iter().any(|&s| !b(s).is_finite() || !db(s).is_finite()) {
            return bad("non-finite values");
        }
        if grid.iter().filter(|s| s.abs() <= 1e-9).any(|&s| b(s) != 0.0) {
            return bad("does not vanish near 0");
        }
        let sup = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
            grid.iter()
                .filter(|s| s.abs() >= lo && s.abs() <= hi)
                .fold(0.0_f64, |m, &s| m.max(f(s).abs()))
        };
        let near = sup(&b, 0.0, 1e6);
        let far = sup(&b, 1e6, 1e12);
        if far > 1.5 * near + f64::MIN_POSITIVE {
            return bad("unbounded");
        }
        let sdb = |s: f64| s * db(s);
        if sup(&sdb, 1e6, 1e12) > 1.5 * sup(&sdb, 0.0, 1e6) + 1e-12 {
            return bad("s·β'(s) unbounded");
        }
        for &s in grid.iter().filter(|s| s.abs() >= 1e-3 && s.abs() <= 1e3) {
            let e = 1e-6 * s.abs();
            let fd = (b(s + e) - b(s - e)) / (2.0 * e);
            if (fd - db(s)).abs() > 1e-4 * (1.0 + db(s).abs()) * (1.0 + 1.0 / s.abs()) {
                return bad("derivative inconsistent with β");
            }
        }
        Ok(())
    }
}

/// `|∫β(ρ_t) - ∫β(ρ_0) + ∫₀ᵗ∫ div u (β'(ρ)ρ - β(ρ))|` per snapshot, the
/// time integral by the trapezoid rule over the snapshots.
pub fn renormalization_defect(
    series: &TimeSeriesField,
    beta: &Renormalization,
    u: &dyn VelocitySource,
) -> Result<Vec<f64>> {
    beta.check_admissible()?;
    if series.domain() != u.domain() {
        return Err(Error::DomainMismatch);
    }
    let area = series.domain().cell_area();
    let mut integrals = Vec::with_capacity(series.len());
    let mut sources = Vec::with_capacity(series.len());
    for (t, rho) in series.times().iter().zip(series.snapshots()) {
        integrals.push(area * rho.values().iter().map(|&s| beta.eval(s)).sum::<f64>());
        let div = u.divergence(*t);
        let src: f64 = rho
            .values()
            .iter()
            .zip(div.values())
            .map(|(&s, &d)| d * (beta.derivative(s) * s - beta.eval(s)))
            .sum();
        sources.push(area * src);
    }
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for k in 0..series.len() {
        if k > 0 {
            let dt = series.times()[k] - series.times()[k - 1];
            acc += 0.5 * dt * (sources[k] + sources[k - 1]);
        }
        out.push((integrals[k] - integrals[0] + acc).abs());
    }
    Ok(out)
}

/// Distribution function of a transported field at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCheck {
    pub lambda: f64,
    pub initial: f64,
    pub transported: f64,
    /// `μ(||ρ₀| − λ| <= h‖∇ρ₀‖∞)`, the measure swept by a one-cell shift of
    /// the level set.
    pub tolerance: f64,
    pub ok: bool,
}

/// Compares `m(λ) = μ(|ρ| > λ)` of `transported` against `initial` at
/// `levels`.
pub fn distribution_check(
    initial: &ScalarField2D,
    transported: &ScalarField2D,
    levels: &[f64],
) -> Result<Vec<LevelCheck>> {
    if initial.domain() != transported.domain() {
        return Err(Error::DomainMismatch);
    }
    let d = initial.domain();
    let sp = Spectral2D::for_domain(d);
    let (gx, gy) = sp.gradient(initial.values());
    let grad = gx
        .iter()
        .zip(&gy)
        .map(|(a, b)| a.hypot(*b))
        .fold(0.0, f64::max);
    let eta = d.spacing() * grad;
    let s0 = initial.samples();
    let a = distribution_table(&s0, levels)?;
    let b = distribution_table(&transported.samples(), levels)?;
    let area = d.cell_area();
    a.iter()
        .zip(&b)
        .map(|(&(lambda, m0), &(_, mt))| {
            let band = area
                * initial
                    .values()
                    .iter()
                    .filter(|v| (v.abs() - lambda).abs() <= eta)
                    .count() as f64;
            Ok(LevelCheck {
                lambda,
                initial: m0,
                transported: mt,
                tolerance: band,
                ok: (mt - m0).abs() <= band,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Domain2D, VelocityField2D};
    use crate::transport::SteadyVelocity;

    #[test]
    fn builtins_are_admissible() {
        for b in Renormalization::standard(0.05) {
            b.check_admissible().unwrap();
            assert_eq!(b.eval(0.04), 0.0);
            assert!(b.eval(10.0) > 0.9);
        }
    }

    #[test]
    fn inadmissible_rejected() {
        assert!(Renormalization::custom("square", |s| s * s, |s| 2.0 * s).is_err());
        assert!(Renormalization::custom("tanh", |s: f64| s.tanh(), |s: f64| 1.0 / s.cosh().powi(2)).is_err());
        let wrong = Renormalization::custom(
            "wrong-derivative",
            |s| Renormalization::tanh_square(0.1).eval(s),
            |_| 0.0,
        );
        assert!(wrong.is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for b in Renormalization::standard(0.1) {
            for &s in &[0.13, 0.17, -0.19, 0.5, 2.0] {
                let fd = (b.eval(s + 1e-7) - b.eval(s - 1e-7)) / 2e-7;
                assert!((fd - b.derivative(s)).abs() < 1e-6, "{} at {s}", b.name());
            }
        }
    }

    #[test]
    fn static_density_has_no_defect() {
        let d = Domain2D::new(1.0, 16).unwrap();
        let rho = ScalarField2D::from_fn(d, |x, y| x + y).unwrap();
        let s = TimeSeriesField::new(vec![0.0, 1.0], vec![rho.clone(), rho]).unwrap();
        let u = SteadyVelocity::new(VelocityField2D::zeros(d));
        let def = renormalization_defect(&s, &Renormalization::tanh_square(0.1), &u).unwrap();
        assert_eq!(def, vec![0.0, 0.0]);
    }

    #[test]
    fn identical_fields_pass_distribution_check() {
        let d = Domain2D::new(1.0, 32).unwrap();
        let f = crate::presets::gaussian(d, [0.5, 0.5], 0.1, 1.0);
        let shifted = crate::presets::gaussian(d, [0.5 + 0.5 / 32.0, 0.5], 0.1, 1.0);
        let levels: Vec<f64> = (1..20).map(|k| k as f64 / 20.0).collect();
        for c in distribution_check(&f, &f, &levels).unwrap() {
            assert!(c.ok && c.initial == c.transported);
        }
        assert!(distribution_check(&f, &shifted, &levels).unwrap().iter().all(|c| c.ok));
        let doubled = f.scaled(2.0);
        assert!(!distribution_check(&f, &doubled, &levels).unwrap().iter().all(|c| c.ok));
    }
}
