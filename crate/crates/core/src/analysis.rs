//! Maximal function, difference-quotient diagnostic and the weak-space
//! inequalities, with seeded randomized campaigns.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Pareto};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{
    lp_norm, weak_lp_quasinorm, Domain2D, ScalarField2D, VelocityField2D, WeightedSamples,
};
use crate::kr_ot::{extra_lemma_check, SignedAtoms};
use crate::spectral::Spectral2D;

/// Finite measure space sampled at atoms.
pub type WeightedSampleSpace = WeightedSamples;

/// Constant of the product bound (`p/(p − 1)` at `p = 2`).
pub const C20: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64, rel: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + rel),
        }
    }

    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            if self.lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lhs / self.rhs
        }
    }
}

/// Radii `{h/2, h, 2h, 4h, …}` up to `L/2`; `h/2` selects the cell alone.
pub fn maximal_radii(d: &Domain2D) -> Vec<f64> {
    let h = d.spacing();
    let mut out = vec![0.5 * h];
    let mut r = h;
    while r <= 0.5 * d.side_length() * (1.0 + 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out
}

/// Indicator of the discrete ball of radius `r` around cell 0 and its size.
fn ball_kernel(d: &Domain2D, r: f64) -> (Vec<f64>, f64) {
    let n = d.resolution();
    let h = d.spacing();
    let off = |i: usize| i.min(n - i) as f64 * h;
    let r2 = r * r * (1.0 + 1e-12);
    let mut k = vec![0.0; n * n];
    let mut count = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = (off(ix), off(iy));
            if x * x + y * y <= r2 {
                k[d.index(ix, iy)] = 1.0;
                count += 1.0;
            }
        }
    }
    (k, count)
}

/// `Mf(x) = max_r` mean of `|f|` over the discrete ball `B_r(x)`, radii from
/// [`maximal_radii`].
pub fn maximal_function(f: &ScalarField2D) -> ScalarField2D {
    let d = *f.domain();
    let sp = Spectral2D::for_domain(&d);
    let a: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let fa = sp.forward(&a);
    let mut m = a.clone();
    for &r in &maximal_radii(&d)[1..] {
        let (k, count) = ball_kernel(&d, r);
        let fk = sp.forward(&k);
        let prod: Vec<_> = fa.iter().zip(&fk).map(|(x, y)| x * y).collect();
        let means = sp.inverse(prod);
        for (mv, s) in m.iter_mut().zip(means) {
            *mv = mv.max(s / count);
        }
    }
    ScalarField2D::from_raw(d, m)
}

/// Frobenius norm of the spectral Jacobian of `u`.
pub fn gradient_magnitude(u: &VelocityField2D) -> ScalarField2D {
    let d = *u.domain();
    let sp = Spectral2D::for_domain(&d);
    let (a, b) = sp.gradient(u.ux());
    let (c, e) = sp.gradient(u.uy());
    let v = (0..d.len())
        .map(|k| (a[k] * a[k] + b[k] * b[k] + c[k] * c[k] + e[k] * e[k]).sqrt())
        .collect();
    ScalarField2D::from_raw(d, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceQuotientReport {
    /// Smallest `C` valid on every sampled pair.
    pub constant: f64,
    /// `|u(x) − u(y)|/|x − y| / (M|∇u|(x) + M|∇u|(y))` per pair.
    pub ratios: Vec<f64>,
    pub max_gradient: f64,
}

impl DifferenceQuotientReport {
    /// Fraction of pairs exceeding `c`.
    pub fn violation_rate(&self, c: f64) -> f64 {
        if self.ratios.is_empty() {
            return 0.0;
        }
        self.ratios.iter().filter(|&&r| r > c).count() as f64 / self.ratios.len() as f64
    }
}

/// Samples `pairs` cell-centre pairs at torus distance `>= 2h`.
pub fn difference_quotient_report(
    u: &VelocityField2D,
    pairs: usize,
    seed: u64,
) -> Result<DifferenceQuotientReport> {
    let d = *u.domain();
    if d.resolution() < 3 {
        return Err(Error::InvalidDomain("need at least 3 cells per side".into()));
    }
    let g = gradient_magnitude(u);
    let m = maximal_function(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = d.spacing();
    let mut ratios = Vec::with_capacity(pairs);
    while ratios.len() < pairs {
        let i = rng.random_range(0..d.len());
        let j = rng.random_range(0..d.len());
        let dist = d.torus_distance(d.center_of(i), d.center_of(j));
        if dist < 2.0 * h * (1.0 - 1e-12) {
            continue;
        }
        let (a, b) = (u.at(i), u.at(j));
        let lhs = (a[0] - b[0]).hypot(a[1] - b[1]) / dist;
        let den = m.values()[i] + m.values()[j];
        ratios.push(if lhs == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            lhs / den
        });
    }
    Ok(DifferenceQuotientReport {
        constant: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
        max_gradient: g.max_abs(),
    })
}

/// `‖f‖_r^r <= p/(p − r) μ(X)^{1 − r/p} ‖f‖_{p,∞}^r`.
pub fn weak_embedding_check(f: &WeightedSampleSpace, r: f64, p: f64) -> Result<InequalityCheck> {
    if !(r >= 1.0 && r < p && p.is_finite()) {
        return Err(Error::OutOfRange(format!("need 1 <= r < p < ∞, got r = {r}, p = {p}")));
    }
    let lhs = lp_norm(f, r)?.powf(r);
    let mu = f.total_mass();
    let rhs = p / (p - r) * mu.powf(1.0 - r / p) * weak_lp_quasinorm(f, p)?.powf(r);
    Ok(InequalityCheck::new(lhs, rhs, 1e-10))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationCheck {
    pub check: InequalityCheck,
    pub alpha: f64,
    pub beta: f64,
    /// `α <= β`, i.e. `‖f‖_{1,∞} <= μ(X)^{1−1/p} ‖f‖_{p,∞}`.
    pub admissible: bool,
    /// `f ≡ 0` on the support of `μ`.
    pub degenerate: bool,
}

/// `‖f‖₁ <= p/(p − 1) ‖f‖_{1,∞} [1 + log(μ(X)^{1−1/p} ‖f‖_{p,∞} / ‖f‖_{1,∞})]`.
pub fn log_interpolation_check(f: &WeightedSampleSpace, p: f64) -> Result<InterpolationCheck> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::OutOfRange(format!("need 1 < p < ∞, got {p}")));
    }
    let lhs = lp_norm(f, 1.0)?;
    let n1 = weak_lp_quasinorm(f, 1.0)?;
    if n1 == 0.0 {
        return Ok(InterpolationCheck {
            check: InequalityCheck::new(0.0, 0.0, 0.0),
            alpha: 0.0,
            beta: 0.0,
            admissible: true,
            degenerate: true,
        });
    }
    let np = weak_lp_quasinorm(f, p)?;
    let mu = f.total_mass();
    let scale = mu.powf(1.0 - 1.0 / p) * np;
    let rhs = p / (p - 1.0) * n1 * (1.0 + (scale / n1).ln());
    let alpha = n1 / mu;
    let beta = (np.powf(p) / n1).powf(1.0 / (p - 1.0));
    Ok(InterpolationCheck {
        check: InequalityCheck::new(lhs, rhs, 1e-10),
        alpha,
        beta,
        admissible: alpha <= beta * (1.0 + 1e-10) && n1 <= scale * (1.0 + 1e-10),
        degenerate: false,
    })
}

/// `∫|u||ρ| <= C₂₀ ‖ρ‖₁^{1/2} ‖ρ‖∞^{1/2} ‖u‖_{L^{2,∞}(dx)}`.
pub fn product_integrability_bound(u: &VelocityField2D, rho: &ScalarField2D) -> Result<InequalityCheck> {
    if u.domain() != rho.domain() {
        return Err(Error::DomainMismatch);
    }
    let area = rho.domain().cell_area();
    let speed = u.speed();
    let lhs = area
        * speed
            .values()
            .iter()
            .zip(rho.values())
            .map(|(s, r)| s * r.abs())
            .sum::<f64>();
    let weak = weak_lp_quasinorm(&speed.samples(), 2.0)?;
    let rhs = C20 * (rho.l1_norm() * rho.max_abs()).sqrt() * weak;
    Ok(InequalityCheck::new(lhs, rhs, 1e-10))
}

/// One randomized trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignRow {
    pub trial_id: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    WeakEmbedding,
    LogInterpolation,
    ExtraLemma,
    Product,
}

impl Inequality {
    pub const ALL: [Inequality; 4] = [
        Self::WeakEmbedding,
        Self::LogInterpolation,
        Self::ExtraLemma,
        Self::Product,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::WeakEmbedding => "weak_embedding",
            Self::LogInterpolation => "log_interpolation",
            Self::ExtraLemma => "extra_lemma",
            Self::Product => "product",
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

/// Random samples with light-, heavy-tailed and tied value distributions.
pub fn random_samples(rng: &mut ChaCha8Rng) -> WeightedSamples {
    let n = rng.random_range(1..=200);
    let kind = rng.random_range(0..5);
    let pareto = Pareto::new(1.0, rng.random_range(0.3..3.0)).unwrap();
    let lognormal = LogNormal::new(0.0, rng.random_range(0.1..3.0)).unwrap();
    let exp = Exp::new(1.0).unwrap();
    let values = (0..n)
        .map(|_| {
            let v: f64 = match kind {
                0 => rng.random_range(-1.0..1.0),
                1 => pareto.sample(rng),
                2 => lognormal.sample(rng),
                3 => (rng.random_range(0.0..4.0_f64)).floor(),
                _ => {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        exp.sample(rng)
                    }
                }
            };
            if rng.random_bool(0.5) {
                -v
            } else {
                v
            }
        })
        .collect();
    let weights = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                exp.sample(rng)
            } else {
                rng.random_range(0.0..1.0)
            }
        })
        .collect();
    WeightedSamples::new(values, weights).expect("valid random samples")
}

fn random_signed_atoms(rng: &mut ChaCha8Rng) -> SignedAtoms {
    let np = rng.random_range(1..=6);
    let nm = rng.random_range(1..=6);
    let scale = 10f64.powf(rng.random_range(-2.0..0.5));
    let mut pts = Vec::new();
    let mut w = Vec::new();
    for _ in 0..np {
        pts.push([scale * rng.random::<f64>(), scale * rng.random::<f64>()]);
        w.push(rng.random_range(0.1..1.0));
    }
    let total: f64 = w.iter().sum();
    let raw: Vec<f64> = (0..nm).map(|_| rng.random_range(0.1..1.0)).collect();
    let rs: f64 = raw.iter().sum();
    for r in raw {
        pts.push([scale * rng.random::<f64>(), scale * rng.random::<f64>()]);
        w.push(-r * total / rs);
    }
    SignedAtoms::from_signed(&pts, &w).expect("balanced by construction")
}

fn random_product_instance(rng: &mut ChaCha8Rng) -> (VelocityField2D, ScalarField2D) {
    let d = Domain2D::new(1.0, 16).unwrap();
    let alpha = rng.random_range(0.2..1.5);
    let c = [rng.random::<f64>(), rng.random::<f64>()];
    let amp = rng.random_range(0.1..10.0);
    let u = VelocityField2D::from_fn(d, |x, y| {
        let dd = d.displacement([x, y], c);
        let r = dd[0].hypot(dd[1]).max(0.5 * d.spacing());
        let s = amp * r.powf(-alpha);
        [-s * dd[1] / r, s * dd[0] / r]
    })
    .unwrap();
    let values: Vec<f64> = (0..d.len())
        .map(|_| {
            if rng.random_bool(0.6) {
                0.0
            } else {
                rng.random_range(-5.0..5.0)
            }
        })
        .collect();
    (u, ScalarField2D::new(d, values).unwrap())
}

fn one_trial(which: Inequality, seed: u64, trial: usize) -> Result<CampaignRow> {
    let mut rng = trial_rng(seed, trial);
    let c = match which {
        Inequality::WeakEmbedding => {
            let f = random_samples(&mut rng);
            let p = rng.random_range(1.05..6.0);
            let r = rng.random_range(1.0..p);
            weak_embedding_check(&f, r, p)?
        }
        Inequality::LogInterpolation => {
            let f = random_samples(&mut rng);
            let p = rng.random_range(1.05..6.0);
            let r = log_interpolation_check(&f, p)?;
            InequalityCheck {
                holds: r.check.holds && r.admissible,
                ..r.check
            }
        }
        Inequality::ExtraLemma => {
            let rho = random_signed_atoms(&mut rng);
            let gamma = rng.random_range(0.01..0.99);
            let delta = 10f64.powf(rng.random_range(-3.0..0.0));
            extra_lemma_check(&rho, gamma, delta)?
        }
        Inequality::Product => {
            let (u, rho) = random_product_instance(&mut rng);
            product_integrability_bound(&u, &rho)?
        }
    };
    Ok(CampaignRow {
        trial_id: trial,
        lhs: c.lhs,
        rhs: c.rhs,
        ratio: c.ratio(),
        holds: c.holds,
    })
}

/// `trials` seeded draws of one inequality, ordered by trial id.
pub fn run_campaign(which: Inequality, trials: usize, seed: u64) -> Result<Vec<CampaignRow>> {
    (0..trials)
        .into_par_iter()
        .map(|t| one_trial(which, seed, t))
        .collect()
}

/// `trial_id,lhs,rhs,ratio,holds`.
pub fn campaign_csv(rows: &[CampaignRow]) -> String {
    let mut s = String::from("trial_id,lhs,rhs,ratio,holds\n");
    for r in rows {
        writeln!(
            s,
            "{},{:.12e},{:.12e},{:.12e},{}",
            r.trial_id, r.lhs, r.rhs, r.ratio, r.holds
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::gaussian;
    use proptest::{prop_assert, proptest};

    #[test]
    fn maximal_of_constant() {
        let d = Domain2D::new(1.0, 16).unwrap();
        let m = maximal_function(&ScalarField2D::constant(d, -2.5));
        assert!(m.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn maximal_of_spike_matches_direct_count() {
        let d = Domain2D::new(1.0, 16).unwrap();
        let mut f = ScalarField2D::zeros(d);
        let k0 = d.index(5, 9);
        f.values_mut()[k0] = 1.0;
        let m = maximal_function(&f);
        let radii = maximal_radii(&d);
        for k in 0..d.len() {
            let dist = d.torus_distance(d.center_of(k), d.center_of(k0));
            // smallest admissible ball containing the spike
            let expected = radii
                .iter()
                .filter(|&&r| dist <= r * (1.0 + 1e-12))
                .map(|&r| 1.0 / ball_kernel(&d, r).1)
                .fold(0.0, f64::max);
            assert!((m.values()[k] - expected).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn maximal_operator_constant_is_stable() {
        let mut fitted = Vec::new();
        for n in [32, 64] {
            let d = Domain2D::new(1.0, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut c = 0.0_f64;
            for _ in 0..100 {
                let mut f = ScalarField2D::zeros(d);
                for _ in 0..3 {
                    let g = gaussian(
                        d,
                        [rng.random(), rng.random()],
                        rng.random_range(0.03..0.2),
                        rng.random_range(-1.0..1.0),
                    );
                    f = f.add(&g).unwrap();
                }
                c = c.max(maximal_function(&f).l2_norm() / f.l2_norm());
            }
            fitted.push(c);
        }
        assert!((fitted[1] / fitted[0] - 1.0).abs() < 0.1, "{fitted:?}");
    }

    #[test]
    fn difference_quotients() {
        let d = Domain2D::new(1.0, 16).unwrap();
        let r = difference_quotient_report(&VelocityField2D::from_fn(d, |_, _| [1.0, -2.0]).unwrap(), 1000, 1).unwrap();
        assert_eq!(r.constant, 0.0);
        let mut cs = Vec::new();
        for n in [32, 64, 128] {
            let d = Domain2D::new(1.0, n).unwrap();
            let w = gaussian(d, [0.5, 0.5], 0.1, 1.0).zero_mean();
            let u = crate::biot_savart::velocity_from_vorticity(&w, &crate::biot_savart::BiotSavartConfig::spectral()).unwrap();
            cs.push(difference_quotient_report(&u, 100_000, 2).unwrap().constant);
        }
        assert!(cs.iter().all(|c| *c > 0.0 && *c < 10.0), "{cs:?}");
        assert!((cs[2] / cs[1] - 1.0).abs() < 0.2, "{cs:?}");
    }

    #[test]
    fn closed_form_cases() {
        let one = WeightedSamples::new(vec![1.0], vec![1.0]).unwrap();
        let e = weak_embedding_check(&one, 1.0, 2.0).unwrap();
        assert_eq!((e.lhs, e.rhs, e.holds), (1.0, 2.0, true));
        assert!(weak_embedding_check(&one, 2.0, 2.0).is_err());
        let l = log_interpolation_check(&one, 2.0).unwrap();
        assert_eq!((l.check.lhs, l.check.rhs), (1.0, 2.0));
        let zero = WeightedSamples::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert!(log_interpolation_check(&zero, 3.0).unwrap().degenerate);
        let z = weak_embedding_check(&zero, 1.0, 2.0).unwrap();
        assert!(z.lhs == 0.0 && z.rhs == 0.0 && z.holds);

        // u ≡ 1 and ρ an indicator of m cells: lhs = m h², rhs = 2 m h²
        let d = Domain2D::new(1.0, 8).unwrap();
        let u = VelocityField2D::from_fn(d, |_, _| [1.0, 0.0]).unwrap();
        let rho = ScalarField2D::from_fn(d, |x, _| if x < 0.3 { 1.0 } else { 0.0 }).unwrap();
        let p = product_integrability_bound(&u, &rho).unwrap();
        assert!((p.lhs - rho.l1_norm()).abs() < 1e-15);
        assert!((p.rhs - 2.0 * rho.l1_norm().sqrt()).abs() < 1e-15);
        assert!(p.holds);
    }

    #[test]
    fn campaigns_are_reproducible() {
        let a = run_campaign(Inequality::WeakEmbedding, 50, 42).unwrap();
        let b = run_campaign(Inequality::WeakEmbedding, 50, 42).unwrap();
        assert_eq!(campaign_csv(&a), campaign_csv(&b));
        assert!(a.iter().all(|r| r.holds));
    }

    proptest! {
        #[test]
        fn maximal_is_sublinear_and_dominates(seed in 0u64..1000) {
            let d = Domain2D::new(1.0, 8).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = ScalarField2D::new(d, (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let g = ScalarField2D::new(d, (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let (mf, mg) = (maximal_function(&f), maximal_function(&g));
            let mfg = maximal_function(&f.add(&g).unwrap());
            for k in 0..64 {
                prop_assert!(mf.values()[k] >= f.values()[k].abs());
                prop_assert!(mfg.values()[k] <= mf.values()[k] + mg.values()[k] + 1e-12);
            }
        }

        #[test]
        fn interpolation_admissible(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_samples(&mut rng);
            let r = log_interpolation_check(&f, 1.5).unwrap();
            prop_assert!(r.check.holds && r.admissible);
        }
    }
}
