//! Kantorovich–Rubinstein distances with concave costs, optimal plans,
//! dual potentials and the time-dependent stability functionals.

mod entropic;
mod simplex;
mod stability;

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::analysis::InequalityCheck;
use crate::error::{Error, Result};
use crate::fields::{AtomicMeasure, ScalarField2D};

pub use stability::{
    stability_functional, StabilityOptions, StabilityReport, StabilityRow,
};

/// Atom limit per side for [`Solver::ExactLp`].
pub const EXACT_ATOM_LIMIT: usize = 2000;

/// Cost `c(|x − y|)` of the KR norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConcaveCost {
    /// `log(tanh(z)/δ + 1)`.
    LogDelta { delta: f64 },
    /// `tanh(z)`.
    Tanh,
}

impl ConcaveCost {
    pub fn log_delta(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::OutOfRange(format!("δ = {delta} must be positive")));
        }
        Ok(Self::LogDelta { delta })
    }

    pub fn tanh() -> Self {
        Self::Tanh
    }

    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Self::LogDelta { delta } => (z.tanh() / delta).ln_1p(),
            Self::Tanh => z.tanh(),
        }
    }

    /// `c'(z)`.
    pub fn derivative(&self, z: f64) -> f64 {
        let t = z.tanh();
        match *self {
            Self::LogDelta { delta } => (1.0 - t * t) / (delta + t),
            Self::Tanh => 1.0 - t * t,
        }
    }

    /// `sup c`.
    pub fn bound(&self) -> f64 {
        match *self {
            Self::LogDelta { delta } => (1.0 / delta).ln_1p(),
            Self::Tanh => 1.0,
        }
    }

    pub fn between(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.eval(dist(x, y))
    }

    /// `∇ₓ c(|x − y|)`; zero at `x = y`.
    pub fn gradient(&self, x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
        let r = dist(x, y);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let s = self.derivative(r) / r;
        [s * (x[0] - y[0]), s * (x[1] - y[1])]
    }
}

pub(crate) fn dist(x: [f64; 2], y: [f64; 2]) -> f64 {
    (x[0] - y[0]).hypot(x[1] - y[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    ExactLp,
    Entropic,
}

/// Sparse plan between `source` (`ρ⁺`) and `target` (`ρ⁻`).
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub source: AtomicMeasure,
    pub target: AtomicMeasure,
    /// `(i, j, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost_value: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.source.len()];
        for &(i, _, m) in &self.entries {
            r[i] += m;
        }
        r
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.target.len()];
        for &(_, j, m) in &self.entries {
            c[j] += m;
        }
        c
    }

    /// Largest absolute marginal error.
    pub fn marginal_error(&self) -> f64 {
        let r = self
            .row_sums()
            .iter()
            .zip(self.source.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        self.column_sums()
            .iter()
            .zip(self.target.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(r, f64::max)
    }

    /// `(i, j)` source and target points of each entry.
    pub fn pairs(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2], f64)> + '_ {
        self.entries
            .iter()
            .map(|&(i, j, m)| (self.source.points()[i], self.target.points()[j], m))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,mass\n");
        for &(i, j, m) in &self.entries {
            writeln!(s, "{i},{j},{m:.17e}").unwrap();
        }
        s
    }
}

/// Potential `ζ` extended off the support by the c-transform
/// `ζ(z) = min_j [s_j + c(|z − y_j|)] − offset` over the target atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotential {
    cost: ConcaveCost,
    sinks: Vec<[f64; 2]>,
    sink_values: Vec<f64>,
    offset: f64,
    /// Union of source and target points.
    pub points: Vec<[f64; 2]>,
    /// `ζ` at `points`, with `ζ(points[0]) = 0`.
    pub values: Vec<f64>,
}

impl DualPotential {
    fn from_sinks(
        cost: ConcaveCost,
        sinks: Vec<[f64; 2]>,
        sink_values: Vec<f64>,
        points: Vec<[f64; 2]>,
    ) -> Self {
        let mut p = Self {
            cost,
            sinks,
            sink_values,
            offset: 0.0,
            points,
            values: Vec::new(),
        };
        if let Some(&anchor) = p.points.first() {
            p.offset = p.eval(anchor);
        }
        p.values = p.points.iter().map(|&z| p.eval(z)).collect();
        p
    }

    /// Potential from explicit values at points (no extension beyond them).
    pub fn from_values(cost: ConcaveCost, points: Vec<[f64; 2]>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidArgument("points and values differ in length".into()));
        }
        let mut p = Self::from_sinks(cost, points.clone(), values.clone(), points);
        let v0 = values.first().copied().unwrap_or(0.0);
        p.values = values.iter().map(|v| v - v0).collect();
        Ok(p)
    }

    fn zero(cost: ConcaveCost) -> Self {
        Self::from_sinks(cost, Vec::new(), Vec::new(), Vec::new())
    }

    pub fn cost(&self) -> ConcaveCost {
        self.cost
    }

    /// `ζ(z)`; zero when there are no target atoms.
    pub fn eval(&self, z: [f64; 2]) -> f64 {
        if self.sinks.is_empty() {
            return 0.0;
        }
        self.sinks
            .iter()
            .zip(&self.sink_values)
            .map(|(&y, s)| s + self.cost.between(z, y))
            .fold(f64::INFINITY, f64::min)
            - self.offset
    }

    /// Forward-difference gradient with step `h`.
    pub fn gradient_fd(&self, z: [f64; 2], h: f64) -> [f64; 2] {
        let f0 = self.eval(z);
        [
            (self.eval([z[0] + h, z[1]]) - f0) / h,
            (self.eval([z[0], z[1] + h]) - f0) / h,
        ]
    }

    /// `Σζ dρ⁺ − Σζ dρ⁻`.
    pub fn pairing(&self, plus: &AtomicMeasure, minus: &AtomicMeasure) -> f64 {
        let s = |mu: &AtomicMeasure| {
            mu.points()
                .iter()
                .zip(mu.weights())
                .map(|(&p, w)| w * self.eval(p))
                .sum::<f64>()
        };
        s(plus) - s(minus)
    }
}

/// Optimality certificate of a distance computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Dual objective of the feasible potential.
    pub lower: f64,
    /// Cost of the returned feasible plan.
    pub upper: f64,
    /// Entropic regularization of the last stage, if any.
    pub epsilon: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrResult {
    pub value: f64,
    pub plan: TransportPlan,
    pub potential: DualPotential,
    pub certificate: Certificate,
}

fn union_points(plus: &AtomicMeasure, minus: &AtomicMeasure) -> Vec<[f64; 2]> {
    let mut seen = std::collections::HashSet::new();
    plus.points()
        .iter()
        .chain(minus.points())
        .filter(|p| seen.insert((p[0].to_bits(), p[1].to_bits())))
        .copied()
        .collect()
}

fn cost_matrix(plus: &AtomicMeasure, minus: &AtomicMeasure, cost: ConcaveCost) -> Vec<f64> {
    let mut c = Vec::with_capacity(plus.len() * minus.len());
    for &x in plus.points() {
        for &y in minus.points() {
            c.push(cost.between(x, y));
        }
    }
    c
}

/// `D_c(ρ⁺, ρ⁻)` with an optimal (or rounded entropic) plan and a dual
/// potential.
pub fn kr_distance(
    plus: &AtomicMeasure,
    minus: &AtomicMeasure,
    cost: ConcaveCost,
    solver: Solver,
) -> Result<KrResult> {
    let (mp, mm) = (plus.total_mass(), minus.total_mass());
    if (mp - mm).abs() > 1e-10 * mp.max(mm).max(1.0) {
        return Err(Error::MassMismatch {
            source_mass: mp,
            target_mass: mm,
        });
    }
    if plus.is_empty() || minus.is_empty() {
        return Ok(KrResult {
            value: 0.0,
            plan: TransportPlan {
                source: plus.clone(),
                target: minus.clone(),
                entries: Vec::new(),
                cost_value: 0.0,
            },
            potential: DualPotential::zero(cost),
            certificate: Certificate {
                lower: 0.0,
                upper: 0.0,
                epsilon: None,
                iterations: 0,
            },
        });
    }
    let c = cost_matrix(plus, minus, cost);
    let n = minus.len();
    let (flows, v, certificate) = match solver {
        Solver::ExactLp => {
            let got = plus.len().max(minus.len());
            if got > EXACT_ATOM_LIMIT {
                return Err(Error::TooManyAtoms {
                    limit: EXACT_ATOM_LIMIT,
                    got,
                });
            }
            // rescale the smaller side's total onto the larger for exact balance
            let a = plus.weights().to_vec();
            let mut b = minus.weights().to_vec();
            let drift = a.iter().sum::<f64>() - b.iter().sum::<f64>();
            let heavy = (0..n).max_by(|&i, &j| b[i].total_cmp(&b[j])).unwrap();
            b[heavy] += drift;
            let s = simplex::solve(&a, &b, &c)?;
            let dual = a.iter().zip(&s.u).map(|(x, y)| x * y).sum::<f64>()
                + b.iter().zip(&s.v).map(|(x, y)| x * y).sum::<f64>();
            let primal: f64 = s.flows.iter().map(|&(i, j, m)| m * c[i * n + j]).sum();
            (
                s.flows,
                s.v,
                Certificate {
                    lower: dual,
                    upper: primal,
                    epsilon: None,
                    iterations: s.iterations,
                },
            )
        }
        Solver::Entropic => {
            let mut sorted = c.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[sorted.len() / 2].max(1e-12 * cost.bound());
            let schedule = [1e-1 * median, 1e-2 * median, 1e-3 * median];
            let s = entropic::solve(plus.weights(), minus.weights(), &c, &schedule, 5000)?;
            (
                s.flows,
                s.v,
                Certificate {
                    lower: s.lower,
                    upper: s.upper,
                    epsilon: Some(s.epsilon),
                    iterations: s.iterations,
                },
            )
        }
    };
    let cost_value = flows.iter().map(|&(i, j, m)| m * c[i * n + j]).sum();
    let potential = DualPotential::from_sinks(
        cost,
        minus.points().to_vec(),
        v.iter().map(|x| -x).collect(),
        union_points(plus, minus),
    );
    Ok(KrResult {
        value: cost_value,
        plan: TransportPlan {
            source: plus.clone(),
            target: minus.clone(),
            entries: flows,
            cost_value,
        },
        potential,
        certificate,
    })
}

/// Positive and negative parts of a signed atomic measure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedAtoms {
    pub plus: AtomicMeasure,
    pub minus: AtomicMeasure,
}

impl SignedAtoms {
    /// Merges coincident points (summing signed weights), drops zeros and
    /// splits by sign. The residual imbalance, if within `10⁻⁸‖ρ‖₁`, is
    /// added to the heaviest atom of the lighter side.
    pub fn from_signed(points: &[[f64; 2]], weights: &[f64]) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidArgument("points and weights differ in length".into()));
        }
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut pts: Vec<[f64; 2]> = Vec::new();
        let mut w: Vec<f64> = Vec::new();
        for (p, &x) in points.iter().zip(weights) {
            if !x.is_finite() {
                return Err(Error::NonFinite);
            }
            let key = (p[0].to_bits(), p[1].to_bits());
            match index.get(&key) {
                Some(&k) => w[k] += x,
                None => {
                    index.insert(key, pts.len());
                    pts.push(*p);
                    w.push(x);
                }
            }
        }
        let total: f64 = w.iter().sum();
        let l1: f64 = w.iter().map(|x| x.abs()).sum();
        if total.abs() > 1e-8 * l1 {
            return Err(Error::Unbalanced { imbalance: total });
        }
        let mut plus = (Vec::new(), Vec::new());
        let mut minus = (Vec::new(), Vec::new());
        for (p, x) in pts.into_iter().zip(w) {
            if x > 0.0 {
                plus.0.push(p);
                plus.1.push(x);
            } else if x < 0.0 {
                minus.0.push(p);
                minus.1.push(-x);
            }
        }
        let mut out = Self {
            plus: AtomicMeasure::new(plus.0, plus.1)?,
            minus: AtomicMeasure::new(minus.0, minus.1)?,
        };
        out.rebalance()?;
        Ok(out)
    }

    fn rebalance(&mut self) -> Result<()> {
        let r = self.plus.total_mass() - self.minus.total_mass();
        if r == 0.0 {
            return Ok(());
        }
        let lighter = if r > 0.0 { &mut self.minus } else { &mut self.plus };
        if lighter.is_empty() {
            return Err(Error::Unbalanced { imbalance: r });
        }
        let w = lighter.weights_mut();
        let k = (0..w.len()).max_by(|&i, &j| w[i].total_cmp(&w[j])).unwrap();
        w[k] += r.abs();
        Ok(())
    }

    /// `‖ρ‖₁ = |ρ⁺| + |ρ⁻|`.
    pub fn l1_norm(&self) -> f64 {
        self.plus.total_mass() + self.minus.total_mass()
    }

    pub fn is_zero(&self) -> bool {
        self.plus.is_empty() && self.minus.is_empty()
    }

    /// Largest side.
    pub fn atoms(&self) -> usize {
        self.plus.len().max(self.minus.len())
    }

    /// Aggregates each part into square bins of side `bin` (anchored at the
    /// origin), placing each bin's mass at its barycentre, then re-splits.
    pub fn coarsened(&self, bin: f64) -> Result<Self> {
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for (mu, sign) in [(&self.plus, 1.0), (&self.minus, -1.0)] {
            let mut bins: HashMap<(i64, i64), (f64, f64, f64)> = HashMap::new();
            let mut order = Vec::new();
            for (p, &m) in mu.points().iter().zip(mu.weights()) {
                let key = ((p[0] / bin).floor() as i64, (p[1] / bin).floor() as i64);
                let e = bins.entry(key).or_insert_with(|| {
                    order.push(key);
                    (0.0, 0.0, 0.0)
                });
                e.0 += m;
                e.1 += m * p[0];
                e.2 += m * p[1];
            }
            for key in order {
                let (m, sx, sy) = bins[&key];
                pts.push([sx / m, sy / m]);
                w.push(sign * m);
            }
        }
        Self::from_signed(&pts, &w)
    }

    /// Drops atoms lighter than `rel` times the heaviest atom, then moves the
    /// resulting imbalance onto the heaviest atom of the lighter side.
    pub fn pruned(&self, rel: f64) -> Result<Self> {
        let cut = rel
            * self
                .plus
                .weights()
                .iter()
                .chain(self.minus.weights())
                .fold(0.0_f64, |m, w| m.max(*w));
        let keep = |mu: &AtomicMeasure| -> Result<AtomicMeasure> {
            let (p, w): (Vec<_>, Vec<_>) = mu
                .points()
                .iter()
                .zip(mu.weights())
                .filter(|(_, w)| **w >= cut)
                .map(|(p, w)| (*p, *w))
                .unzip();
            AtomicMeasure::new(p, w)
        };
        let mut out = Self {
            plus: keep(&self.plus)?,
            minus: keep(&self.minus)?,
        };
        out.rebalance()?;
        Ok(out)
    }

    /// Doubles the bin size from `bin` until at most `limit` atoms remain
    /// per side.
    pub fn fit_to_limit(&self, limit: usize, bin: f64) -> Result<Self> {
        let mut out = self.clone();
        let mut b = bin;
        while out.atoms() > limit {
            out = self.coarsened(b)?;
            b *= 2.0;
        }
        Ok(out)
    }
}

/// `(ρ⁺, ρ⁻)` of a zero-average field; atoms at cell centres with masses
/// `|ρ|·h²`.
pub fn signed_split(rho: &ScalarField2D) -> Result<SignedAtoms> {
    let d = rho.domain();
    let a = d.cell_area();
    let (pts, w): (Vec<_>, Vec<_>) = rho
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| (d.center_of(k), v * a))
        .unzip();
    SignedAtoms::from_signed(&pts, &w)
}

/// Removes the common mass `min(μ, ν)` at coincident points.
pub fn cancel_common_mass(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<SignedAtoms> {
    let pts: Vec<[f64; 2]> = mu.points().iter().chain(nu.points()).copied().collect();
    let w: Vec<f64> = mu
        .weights()
        .iter()
        .copied()
        .chain(nu.weights().iter().map(|x| -x))
        .collect();
    SignedAtoms::from_signed(&pts, &w)
}

/// `D_c(ρ)` of a signed measure.
pub fn kr_norm(rho: &SignedAtoms, cost: ConcaveCost, solver: Solver) -> Result<KrResult> {
    kr_distance(&rho.plus, &rho.minus, cost, solver)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// Primal cost minus `Σζ(ρ⁺ − ρ⁻)`.
    pub gap: f64,
    /// `max (|ζ(x) − ζ(y)| − c(|x − y|))⁺` over all support pairs.
    pub max_violation: f64,
    /// `max |ζ(x) − ζ(y) − c(|x − y|)|` over plan entries.
    pub max_support_slack: f64,
}

pub fn dual_feasibility_gap(plan: &TransportPlan, potential: &DualPotential, cost: ConcaveCost) -> FeasibilityReport {
    let gap = plan.cost_value - potential.pairing(&plan.source, &plan.target);
    let pts = &potential.points;
    let vals = &potential.values;
    let mut max_violation = 0.0_f64;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let v = (vals[a] - vals[b]).abs() - cost.between(pts[a], pts[b]);
            max_violation = max_violation.max(v);
        }
    }
    let max_support_slack = plan
        .pairs()
        .map(|(x, y, _)| (potential.eval(x) - potential.eval(y) - cost.between(x, y)).abs())
        .fold(0.0, f64::max);
    FeasibilityReport {
        gap,
        max_violation,
        max_support_slack,
    }
}

/// Optimal potential that is tight only on plan entries: non-plan pairs
/// keep a slack of at least `η`, the largest power-of-two fraction of
/// `sup c` for which the difference constraints stay feasible. Source
/// atoms are then points of differentiability of the c-transform
/// extension. Falls back to `η = 0` when no positive margin exists.
pub fn strictly_complementary_potential(plan: &TransportPlan, cost: ConcaveCost) -> DualPotential {
    let (m, n) = (plan.source.len(), plan.target.len());
    let xs = plan.source.points();
    let ys = plan.target.points();
    let mut support = vec![false; m * n];
    for &(i, j, _) in &plan.entries {
        support[i * n + j] = true;
    }
    let c: Vec<f64> = (0..m * n).map(|k| cost.between(xs[k / n], ys[k % n])).collect();
    // ζ(x_i) ≤ ζ(y_j) + c_ij − η (off plan), ζ(y_j) ≤ ζ(x_i) − c_ij (on plan)
    let solve = |eta: f64| -> Option<Vec<f64>> {
        let mut z = vec![0.0; m + n];
        for _ in 0..=(m + n) {
            let mut changed = false;
            for i in 0..m {
                for j in 0..n {
                    let k = i * n + j;
                    let w = if support[k] { c[k] } else { c[k] - eta };
                    if z[m + j] + w < z[i] - 1e-15 {
                        z[i] = z[m + j] + w;
                        changed = true;
                    }
                    if support[k] && z[i] - c[k] < z[m + j] - 1e-15 {
                        z[m + j] = z[i] - c[k];
                        changed = true;
                    }
                }
            }
            if !changed {
                return Some(z);
            }
        }
        None
    };
    let mut eta = 0.1 * cost.bound();
    let z = loop {
        if let Some(z) = solve(eta) {
            break z;
        }
        eta *= 0.5;
        if eta < 1e-12 * cost.bound() {
            break solve(0.0).expect("optimal plan admits a feasible potential");
        }
    };
    DualPotential::from_sinks(
        cost,
        ys.to_vec(),
        z[m..].to_vec(),
        union_points(&plan.source, &plan.target),
    )
}

/// Largest `‖∇_fd ζ(x) − c'(|x−y|)(x−y)/|x−y|‖` over plan entries with
/// `|x − y| > 3h`.
pub fn gradient_identity_check(plan: &TransportPlan, potential: &DualPotential, h: f64) -> f64 {
    let cost = potential.cost();
    plan.pairs()
        .filter(|(x, y, _)| dist(*x, *y) > 3.0 * h)
        .map(|(x, y, _)| {
            let g = potential.gradient_fd(x, h);
            let p = cost.gradient(x, y);
            (g[0] - p[0]).hypot(g[1] - p[1])
        })
        .fold(0.0, f64::max)
}

/// `D(ρ) ≤ D_δ(ρ)/log(1/γ) + (δ/γ)‖ρ‖₁` with exact solves.
pub fn extra_lemma_check(rho: &SignedAtoms, gamma: f64, delta: f64) -> Result<InequalityCheck> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::OutOfRange(format!("γ = {gamma} must lie in (0, 1)")));
    }
    let cd = ConcaveCost::log_delta(delta)?;
    let lhs = kr_norm(rho, ConcaveCost::Tanh, Solver::ExactLp)?.value;
    let dd = kr_norm(rho, cd, Solver::ExactLp)?.value;
    let rhs = dd / (1.0 / gamma).ln() + delta / gamma * rho.l1_norm();
    Ok(InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-8),
    })
}
