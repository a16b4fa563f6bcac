//! `D_δ(ρ_t)` along a signed solution, with the plan-integral majorant and
//! the plan form of its time derivative.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{dist, kr_norm, ConcaveCost, SignedAtoms, Solver, EXACT_ATOM_LIMIT};
use crate::error::{Error, Result};
use crate::transport::VelocitySource;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    pub solver: Solver,
    /// Relative discretization slack on the majorant.
    pub slack: f64,
    /// Snapshots with more atoms per side are binned (see
    /// [`SignedAtoms::fit_to_limit`]) before an exact solve.
    pub atom_limit: usize,
    /// First bin size tried when coarsening.
    pub bin: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            solver: Solver::ExactLp,
            slack: 5e-2,
            atom_limit: EXACT_ATOM_LIMIT,
            bin: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub t: f64,
    pub d_delta: f64,
    /// `D_δ(ρ₀) + ∫₀ᵗ ∬ |u(x) − u(y)|/(δ + |x − y|) dπ_s ds`.
    pub majorant: f64,
    /// The inner plan integral at `t`.
    pub integrand: f64,
    /// `∬ c'(|x−y|) (x−y)/|x−y| · (u(x) − u(y)) dπ_t`.
    pub rate_plan: f64,
    /// Finite-difference `dD_δ/dt` (central inside, one-sided at the ends).
    pub rate_fd: f64,
    pub atoms: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub delta: f64,
    pub rows: Vec<StabilityRow>,
    /// `D_δ(ρ_t) <= majorant·(1 + slack)` at every snapshot.
    pub holds: bool,
    /// Largest `|rate_fd − rate_plan|` over interior snapshots.
    pub max_rate_residual: f64,
}

impl StabilityReport {
    /// `t,delta,D_delta,majorant,ratio_log`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,delta,D_delta,majorant,ratio_log\n");
        self.write_rows(&mut s);
        s
    }

    pub(crate) fn write_rows(&self, s: &mut String) {
        let l = self.delta.ln().abs();
        for r in &self.rows {
            writeln!(
                s,
                "{:.10e},{:.6e},{:.10e},{:.10e},{:.10e}",
                r.t,
                self.delta,
                r.d_delta,
                r.majorant,
                r.d_delta / l
            )
            .unwrap();
        }
    }

    pub fn max_ratio_log(&self) -> f64 {
        let l = self.delta.ln().abs();
        self.rows.iter().map(|r| r.d_delta / l).fold(0.0, f64::max)
    }
}

/// Evaluates the stability functionals for `states[k]` at `times[k]` under
/// the common velocity `u`.
pub fn stability_functional(
    times: &[f64],
    states: &[SignedAtoms],
    u: &dyn VelocitySource,
    delta: f64,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    if times.len() != states.len() || times.is_empty() {
        return Err(Error::InvalidArgument(
            "need one signed state per time".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must increase".into()));
    }
    let cost = ConcaveCost::log_delta(delta)?;
    let d = *u.domain();
    let vel = |t: f64, p: [f64; 2]| u.sample(t, [d.wrap(p[0]), d.wrap(p[1])]).0;
    let per: Vec<Result<(f64, f64, f64, usize)>> = times
        .par_iter()
        .zip(states)
        .map(|(&t, s)| {
            let s = if opts.solver == Solver::ExactLp && s.atoms() > opts.atom_limit {
                s.fit_to_limit(opts.atom_limit, opts.bin)?
            } else {
                s.clone()
            };
            let r = kr_norm(&s, cost, opts.solver)?;
            let mut integrand = 0.0;
            let mut rate = 0.0;
            for (x, y, m) in r.plan.pairs() {
                let (ux, uy) = (vel(t, x), vel(t, y));
                let du = [ux[0] - uy[0], ux[1] - uy[1]];
                let r = dist(x, y);
                integrand += m * du[0].hypot(du[1]) / (delta + r);
                let g = cost.gradient(x, y);
                rate += m * (g[0] * du[0] + g[1] * du[1]);
            }
            Ok((r.value, integrand, rate, s.atoms()))
        })
        .collect();
    let per: Vec<(f64, f64, f64, usize)> = per.into_iter().collect::<Result<_>>()?;
    let n = times.len();
    let mut rows = Vec::with_capacity(n);
    let mut acc = per[0].0;
    for k in 0..n {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (per[k].1 + per[k - 1].1);
        }
        let rate_fd = if n == 1 {
            0.0
        } else if k == 0 {
            (per[1].0 - per[0].0) / (times[1] - times[0])
        } else if k == n - 1 {
            (per[k].0 - per[k - 1].0) / (times[k] - times[k - 1])
        } else {
            (per[k + 1].0 - per[k - 1].0) / (times[k + 1] - times[k - 1])
        };
        rows.push(StabilityRow {
            t: times[k],
            d_delta: per[k].0,
            majorant: acc,
            integrand: per[k].1,
            rate_plan: per[k].2,
            rate_fd,
            atoms: per[k].3,
        });
    }
    let holds = rows
        .iter()
        .all(|r| r.d_delta <= r.majorant * (1.0 + opts.slack));
    let max_rate_residual = if n > 2 {
        rows[1..n - 1]
            .iter()
            .map(|r| (r.rate_fd - r.rate_plan).abs())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(StabilityReport {
        delta,
        rows,
        holds,
        max_rate_residual,
    })
}
