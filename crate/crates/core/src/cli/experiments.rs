//! The four scripted experiments. Each returns its artifacts in memory
//! together with the outcome of its declared assertions.

use std::fmt::Write as _;

use crate::analysis::{campaign_csv, run_campaign, Inequality};
use crate::biot_savart::{velocity_from_vorticity, BiotSavartConfig};
use crate::error::Result;
use crate::fields::Domain2D;
use crate::kr_ot::{stability_functional, SignedAtoms, StabilityOptions, StabilityReport};
use crate::ns_euler::{
    diagnostics_csv, equi_integrability_report, run_sweep, weak_velocity_ratio, Gauge, NSConfig,
};
use crate::presets::{bump, initial_vorticity};
use crate::transport::{
    compute_flow, distribution_check, invert_flow, lagrangian_solution, solve_continuity_eulerian,
    EulerianConfig, FaceMode, Renormalization, SampledVelocity, SteadyVelocity,
};

use super::config::{ExperimentConfig, ExperimentKind, SolverKind};
use super::svg::{histogram, line_plot, Scale, Series};

#[derive(Debug, Clone, PartialEq)]
pub struct AssertionOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    /// `(file name, contents)`, in write order.
    pub artifacts: Vec<(String, String)>,
    pub assertions: Vec<AssertionOutcome>,
}

impl ExperimentOutput {
    fn file(&mut self, name: impl Into<String>, body: String) {
        self.artifacts.push((name.into(), body));
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(AssertionOutcome {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.experiment {
        ExperimentKind::UniquenessDemo => uniqueness_demo(cfg),
        ExperimentKind::VanishingViscosity => vanishing_viscosity(cfg),
        ExperimentKind::Renormalization => renormalization(cfg),
        ExperimentKind::Inequalities => inequalities(cfg),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn snapshot_times(t_final: f64, snapshots: usize) -> Vec<f64> {
    (0..=snapshots)
        .map(|k| t_final * k as f64 / snapshots as f64)
        .collect()
}

fn uniqueness_demo(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    let times = snapshot_times(cfg.t_final, cfg.snapshots);
    let l = cfg.side_length;
    let mut summary = String::from("n,delta,max_D_delta,max_ratio_log,bound_holds,rate_residual\n");
    // reports[i][j]: resolution i, delta j
    let mut reports: Vec<Vec<StabilityReport>> = Vec::new();
    for &n in &cfg.resolutions {
        let d = Domain2D::new(l, n)?;
        let w = initial_vorticity(&cfg.velocity_preset, d)?.scaled(cfg.velocity_amplitude);
        let src = SteadyVelocity::new(velocity_from_vorticity(&w, &BiotSavartConfig::spectral())?);
        let rho0 = bump(
            d,
            [cfg.density_center[0] * l, cfg.density_center[1] * l],
            cfg.density_radius * l,
            1.0,
        );
        let area = d.cell_area();
        let eulerian = cfg
            .solvers
            .contains(&SolverKind::Eulerian)
            .then(|| {
                let ec = EulerianConfig {
                    cfl: cfg.cfl,
                    faces: FaceMode::Streamfunction,
                    ..Default::default()
                };
                solve_continuity_eulerian(&src, &rho0, &times, &ec)
            })
            .transpose()?;
        let flow = cfg
            .solvers
            .contains(&SolverKind::Lagrangian)
            .then(|| compute_flow(&src, &times, 0.25 * d.spacing()))
            .transpose()?;
        let atoms_of = |kind: SolverKind, k: usize, sign: f64, pts: &mut Vec<[f64; 2]>, wts: &mut Vec<f64>| {
            match kind {
                SolverKind::Eulerian => {
                    let e = eulerian.as_ref().expect("eulerian run");
                    for (i, v) in e.snapshots()[k].values().iter().enumerate() {
                        if *v != 0.0 {
                            pts.push(d.center_of(i));
                            wts.push(sign * v * area);
                        }
                    }
                }
                SolverKind::Lagrangian => {
                    let f = flow.as_ref().expect("particle flow");
                    for (i, v) in rho0.values().iter().enumerate() {
                        if *v != 0.0 {
                            pts.push(f.positions(k)[i]);
                            wts.push(sign * v * area);
                        }
                    }
                }
            }
        };
        let states = (0..times.len())
            .map(|k| {
                let (mut pts, mut wts) = (Vec::new(), Vec::new());
                atoms_of(cfg.solvers[0], k, 1.0, &mut pts, &mut wts);
                atoms_of(cfg.solvers[1], k, -1.0, &mut pts, &mut wts);
                SignedAtoms::from_signed(&pts, &wts)?.pruned(cfg.prune)
            })
            .collect::<Result<Vec<_>>>()?;
        let opts = StabilityOptions::default();
        let per_delta = cfg
            .deltas
            .iter()
            .map(|&delta| stability_functional(&times, &states, &src, delta, &opts))
            .collect::<Result<Vec<_>>>()?;

        let mut csv = String::from("t,delta,D_delta,majorant,ratio_log\n");
        for r in &per_delta {
            r.write_rows(&mut csv);
            let max_d = r.rows.iter().map(|x| x.d_delta).fold(0.0, f64::max);
            writeln!(
                summary,
                "{n},{:.6e},{:.10e},{:.10e},{},{:.6e}",
                r.delta,
                max_d,
                r.max_ratio_log(),
                r.holds,
                r.max_rate_residual
            )
            .unwrap();
        }
        out.file(format!("distance_n{n}.csv"), csv);
        let series: Vec<Series> = per_delta
            .iter()
            .map(|r| Series {
                label: format!("δ = {:e}", r.delta),
                points: r.rows.iter().map(|x| (x.t, x.d_delta)).collect(),
            })
            .collect();
        out.file(
            format!("distance_n{n}.svg"),
            line_plot(&format!("D_δ(t), N = {n}"), "t", "D_δ", &series, Scale::Linear, Scale::Linear),
        );
        reports.push(per_delta);
    }
    out.file("summary.csv", summary);
    let ratio_series: Vec<Series> = cfg
        .resolutions
        .iter()
        .zip(&reports)
        .map(|(n, rs)| Series {
            label: format!("N = {n}"),
            points: rs.iter().map(|r| (r.delta, r.max_ratio_log())).collect(),
        })
        .collect();
    out.file(
        "ratio.svg",
        line_plot("max_t D_δ / |log δ|", "δ", "ratio", &ratio_series, Scale::Log, Scale::Linear),
    );

    if cfg.resolutions.len() > 1 {
        let mut bad = Vec::new();
        for (j, delta) in cfg.deltas.iter().enumerate() {
            let r: Vec<f64> = reports.iter().map(|rs| rs[j].max_ratio_log()).collect();
            let ok = r.iter().all(|&x| x == 0.0) || r.windows(2).all(|w| w[1] < w[0]);
            if !ok {
                bad.push(format!("δ={delta:e}: {}", fmt_list(&r)));
            }
        }
        out.check(
            "refinement_trend",
            bad.is_empty(),
            if bad.is_empty() { "ratio decreases under refinement".into() } else { bad.join("; ") },
        );
    }
    if cfg.assert_delta_trend {
        let mut order: Vec<usize> = (0..cfg.deltas.len()).collect();
        order.sort_by(|&a, &b| cfg.deltas[b].total_cmp(&cfg.deltas[a]));
        let mut bad = Vec::new();
        for (n, rs) in cfg.resolutions.iter().zip(&reports) {
            let r: Vec<f64> = order.iter().map(|&j| rs[j].max_ratio_log()).collect();
            let ok = r.iter().all(|&x| x == 0.0) || r.windows(2).all(|w| w[1] < w[0]);
            if !ok {
                bad.push(format!("N={n}: {}", fmt_list(&r)));
            }
        }
        out.check(
            "delta_trend",
            bad.is_empty(),
            if bad.is_empty() { "ratio decreases as δ decreases".into() } else { bad.join("; ") },
        );
    }
    Ok(out)
}

fn vanishing_viscosity(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    let l = cfg.side_length;
    let d = Domain2D::new(l, cfg.resolutions[0])?;
    let w0 = initial_vorticity(&cfg.preset, d)?.scaled(cfg.amplitude);
    let times = snapshot_times(cfg.t_final, cfg.snapshots);
    let ns = NSConfig {
        dt: cfg.dt,
        t_final: cfg.t_final,
        ..Default::default()
    };
    let sweep = run_sweep(&w0, &ns, &cfg.viscosities, &times)?;
    let gauge = Gauge::s_log_s();
    let mut summary = String::from(
        "nu,l1_increase,enstrophy_residual,gauge_bounded,gauge_max_increase,weak_velocity_ratio\n",
    );
    let mut equi = String::from("nu,t,gauge_integral,tail_mass\n");
    let mut series = Vec::new();
    let (mut l1_bad, mut ens_bad, mut equi_bad) = (Vec::new(), Vec::new(), Vec::new());
    for run in &sweep.runs {
        let nu = run.nu;
        out.file(format!("diagnostics_nu_{nu:e}.csv"), diagnostics_csv(&run.diagnostics));
        let rep = equi_integrability_report(&run.series, &gauge, [0.5 * l, 0.5 * l], 0.25 * l)?;
        for ((t, g), m) in rep.times.iter().zip(&rep.integrals).zip(&rep.tail_masses) {
            writeln!(equi, "{nu:e},{t:.10e},{g:.10e},{m:.10e}").unwrap();
        }
        let inc = run.l1_increase();
        let res = run.enstrophy_balance_residual();
        let wv = weak_velocity_ratio(run.final_field())?;
        writeln!(
            summary,
            "{nu:e},{inc:.6e},{res:.6e},{},{:.6e},{wv:.6e}",
            rep.bounded, rep.max_increase
        )
        .unwrap();
        if inc > 1e-3 {
            l1_bad.push(format!("ν={nu:e}: {inc:.3e}"));
        }
        if res > 1e-4 {
            ens_bad.push(format!("ν={nu:e}: {res:.3e}"));
        }
        if !rep.bounded {
            equi_bad.push(format!("ν={nu:e}: {:.3e}", rep.max_increase));
        }
        series.push(Series {
            label: format!("ν = {nu:e}"),
            points: run.diagnostics.iter().map(|x| (x.t, x.enstrophy)).collect(),
        });
    }
    out.file("summary.csv", summary);
    out.file("equi_integrability.csv", equi);
    out.file(
        "enstrophy.svg",
        line_plot("enstrophy decay", "t", "½‖ω‖²", &series, Scale::Linear, Scale::Linear),
    );
    let join = |v: &[String], ok: &str| if v.is_empty() { ok.to_string() } else { v.join("; ") };
    out.check("l1_nonincreasing", l1_bad.is_empty(), join(&l1_bad, "relative one-step increase <= 1e-3"));
    out.check("enstrophy_balance", ens_bad.is_empty(), join(&ens_bad, "residual <= 1e-4 per unit time"));
    out.check("equi_integrability", equi_bad.is_empty(), join(&equi_bad, "s log s gauge bounded"));
    Ok(out)
}

fn renormalization(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    let l = cfg.side_length;
    let d = Domain2D::new(l, cfg.resolutions[0])?;
    let w0 = initial_vorticity(&cfg.preset, d)?.scaled(cfg.amplitude);
    let times = snapshot_times(cfg.t_final, cfg.snapshots);
    let ns = NSConfig {
        dt: cfg.dt,
        t_final: cfg.t_final,
        ..Default::default()
    };
    let sweep = run_sweep(&w0, &ns, &cfg.viscosities, &times)?;
    let area = d.cell_area();
    let integral = |b: &Renormalization, f: &[f64]| area * f.iter().map(|&s| b.eval(s)).sum::<f64>();

    let betas = Renormalization::standard(cfg.beta_cut);
    let mut csv = String::from("nu,beta,initial,final,rel_defect\n");
    let mut series = Vec::new();
    let (mut tol_bad, mut trend_bad) = (Vec::new(), Vec::new());
    for b in &betas {
        let i0 = integral(b, w0.values());
        let mut defects = Vec::new();
        for run in &sweep.runs {
            let it = integral(b, run.final_field().values());
            let rel = (it - i0).abs() / i0;
            writeln!(csv, "{:e},{},{i0:.10e},{it:.10e},{rel:.10e}", run.nu, b.name()).unwrap();
            defects.push((run.nu, rel));
        }
        let last = defects.last().expect("nonempty sweep").1;
        if last > cfg.renorm_tolerance {
            tol_bad.push(format!("{}: {last:.3e}", b.name()));
        }
        if defects.windows(2).any(|w| w[1].1 > w[0].1) {
            trend_bad.push(format!("{}: {}", b.name(), fmt_list(&defects.iter().map(|x| x.1).collect::<Vec<_>>())));
        }
        series.push(Series {
            label: b.name().to_string(),
            points: defects,
        });
    }
    out.file("beta_integrals.csv", csv);
    out.file(
        "beta_defects.svg",
        line_plot("relative ∫β defect at T", "ν", "defect", &series, Scale::Log, Scale::Log),
    );

    // Lagrangian reconstruction of the least viscous member
    let run = sweep.runs.last().expect("nonempty sweep");
    let vels = run
        .series
        .snapshots()
        .iter()
        .map(|w| velocity_from_vorticity(w, &BiotSavartConfig::spectral()))
        .collect::<Result<Vec<_>>>()?;
    let src = SampledVelocity::new(run.series.times().to_vec(), vels)?;
    let flow = compute_flow(&src, &[0.0, cfg.t_final], cfg.particle_dt)?;
    let inv = invert_flow(&flow, &src, cfg.t_final)?;
    let lag = lagrangian_solution(&run.initial, &flow, &inv)?;
    let mx = run.initial.max_abs();
    let levels: Vec<f64> = (1..=cfg.levels)
        .map(|k| mx * k as f64 / (cfg.levels + 1) as f64)
        .collect();
    let checks = distribution_check(&run.initial, &lag, &levels)?;
    let mut dist = String::from("lambda,initial,transported,tolerance,ok\n");
    for c in &checks {
        writeln!(
            dist,
            "{:.10e},{:.10e},{:.10e},{:.10e},{}",
            c.lambda, c.initial, c.transported, c.tolerance, c.ok
        )
        .unwrap();
    }
    out.file("distribution.csv", dist);
    out.file(
        "distribution.svg",
        line_plot(
            "distribution function m(λ)",
            "λ",
            "m(λ)",
            &[
                Series { label: "initial".into(), points: checks.iter().map(|c| (c.lambda, c.initial)).collect() },
                Series { label: "Lagrangian at T".into(), points: checks.iter().map(|c| (c.lambda, c.transported)).collect() },
            ],
            Scale::Linear,
            Scale::Linear,
        ),
    );

    let join = |v: &[String], ok: &str| if v.is_empty() { ok.to_string() } else { v.join("; ") };
    out.check(
        "beta_convergence",
        tol_bad.is_empty(),
        join(&tol_bad, &format!("smallest-ν defects <= {:e}", cfg.renorm_tolerance)),
    );
    out.check("beta_trend", trend_bad.is_empty(), join(&trend_bad, "defects decrease with ν"));
    let off: Vec<String> = checks
        .iter()
        .filter(|c| !c.ok)
        .map(|c| format!("λ={:.3e}: {:.3e} vs {:.3e}", c.lambda, c.initial, c.transported))
        .collect();
    out.check("distribution_preserved", off.is_empty(), join(&off, "all levels within tolerance"));
    Ok(out)
}

fn inequalities(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    let mut summary = String::from("inequality,trials,violations,max_ratio\n");
    for which in Inequality::ALL {
        let rows = run_campaign(which, cfg.trials, cfg.seed)?;
        let viol = rows.iter().filter(|r| !r.holds).count();
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        let max = ratios.iter().copied().fold(0.0, f64::max);
        writeln!(summary, "{},{},{viol},{max:.10e}", which.name(), rows.len()).unwrap();
        out.file(format!("campaign_{}.csv", which.name()), campaign_csv(&rows));
        out.file(
            format!("ratio_{}.svg", which.name()),
            histogram(&format!("lhs/rhs, {}", which.name()), "ratio", &ratios, 30),
        );
        out.check(
            &format!("{}_holds", which.name()),
            viol == 0,
            format!("{viol} violations in {} trials, max ratio {max:.4}", rows.len()),
        );
    }
    out.file("summary.csv", summary);
    Ok(out)
}
