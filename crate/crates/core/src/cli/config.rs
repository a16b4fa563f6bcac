//! Flat `key = value` experiment configuration with dotted section keys.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::presets::PRESETS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    UniquenessDemo,
    VanishingViscosity,
    Renormalization,
    Inequalities,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::UniquenessDemo => "uniqueness_demo",
            Self::VanishingViscosity => "vanishing_viscosity",
            Self::Renormalization => "renormalization",
            Self::Inequalities => "inequalities",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Self::UniquenessDemo,
            Self::VanishingViscosity,
            Self::Renormalization,
            Self::Inequalities,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Eulerian,
    Lagrangian,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Eulerian => "eulerian",
            Self::Lagrangian => "lagrangian",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Resolved experiment configuration. Unset keys take the defaults of the
/// chosen experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output: PathBuf,
    pub side_length: f64,
    pub resolutions: Vec<usize>,
    pub t_final: f64,
    pub dt: f64,
    pub cfl: f64,
    pub snapshots: usize,
    pub viscosities: Vec<f64>,
    pub deltas: Vec<f64>,
    pub gamma: f64,
    pub preset: String,
    pub amplitude: f64,
    pub velocity_preset: String,
    pub velocity_amplitude: f64,
    pub density_center: [f64; 2],
    pub density_radius: f64,
    pub solvers: [SolverKind; 2],
    pub prune: f64,
    pub beta_cut: f64,
    pub renorm_tolerance: f64,
    pub levels: usize,
    pub particle_dt: f64,
    pub trials: usize,
    pub assert_delta_trend: bool,
    resolved: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "experiment",
    "seed",
    "output",
    "domain.l",
    "domain.n",
    "time.t_final",
    "time.dt",
    "time.cfl",
    "time.snapshots",
    "physics.nu",
    "physics.delta",
    "physics.gamma",
    "initial.preset",
    "initial.amplitude",
    "velocity.preset",
    "velocity.amplitude",
    "density.center",
    "density.radius",
    "solvers",
    "kr.prune",
    "renorm.beta_cut",
    "renorm.tolerance",
    "renorm.levels",
    "renorm.particle_dt",
    "campaign.trials",
    "assert.delta_trend",
];

fn defaults(kind: ExperimentKind) -> BTreeMap<&'static str, &'static str> {
    let mut m = BTreeMap::from([
        ("seed", "42"),
        ("output", "out"),
        ("time.cfl", "0.5"),
        ("physics.gamma", "0.5"),
        ("physics.delta", "0.1, 0.01, 0.001"),
        ("kr.prune", "1e-8"),
        ("assert.delta_trend", "false"),
        ("campaign.trials", "1000"),
        ("solvers", "eulerian, lagrangian"),
        ("velocity.preset", "wide_gaussian"),
        ("velocity.amplitude", "10"),
        ("density.center", "0.35, 0.5"),
        ("density.radius", "0.08"),
        ("initial.amplitude", "1"),
        ("renorm.beta_cut", "0.3"),
        ("renorm.tolerance", "0.02"),
        ("renorm.levels", "20"),
        ("renorm.particle_dt", "0.01"),
    ]);
    let per: &[(&str, &str)] = match kind {
        ExperimentKind::UniquenessDemo => &[
            ("domain.l", "1"),
            ("domain.n", "64, 128"),
            ("time.t_final", "0.5"),
            ("time.dt", "0"),
            ("time.snapshots", "5"),
            ("physics.nu", "0"),
            ("initial.preset", "bump"),
        ],
        ExperimentKind::VanishingViscosity | ExperimentKind::Renormalization => &[
            ("domain.l", "6.283185307179586"),
            ("domain.n", "128"),
            ("time.t_final", "1"),
            ("time.dt", "0.002"),
            ("time.snapshots", "50"),
            ("physics.nu", "0.01, 0.005, 0.0025"),
            ("initial.preset", "pair"),
        ],
        ExperimentKind::Inequalities => &[
            ("domain.l", "1"),
            ("domain.n", "16"),
            ("time.t_final", "0"),
            ("time.dt", "0"),
            ("time.snapshots", "0"),
            ("physics.nu", "0"),
            ("initial.preset", "gaussian"),
        ],
    };
    m.extend(per.iter().copied());
    m
}

fn err(line: usize, msg: impl fmt::Display) -> Error {
    Error::Format(format!("line {line}: {msg}"))
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(n, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(err(n, format!("unknown key '{k}'")));
            }
            if k.matches('.').count() > 1 {
                return Err(err(n, "keys nest at most one level"));
            }
            if raw.insert(k.to_string(), (v.to_string(), n)).is_some() {
                return Err(err(n, format!("duplicate key '{k}'")));
            }
        }
        let (kind_s, kind_line) = raw
            .get("experiment")
            .cloned()
            .ok_or_else(|| Error::Format("missing key 'experiment'".into()))?;
        let kind = ExperimentKind::parse(&kind_s)
            .ok_or_else(|| err(kind_line, format!("unknown experiment '{kind_s}'")))?;
        let mut resolved: BTreeMap<String, (String, usize)> = defaults(kind)
            .into_iter()
            .map(|(k, v)| (k.to_string(), (v.to_string(), 0)))
            .collect();
        resolved.extend(raw);

        let get = |k: &str| -> (&str, usize) {
            let (v, n) = &resolved[k];
            (v.as_str(), *n)
        };
        let num = |k: &str| -> Result<f64> {
            let (v, n) = get(k);
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(n, format!("{k}: expected a number, got '{v}'")))
        };
        let int = |k: &str| -> Result<usize> {
            let (v, n) = get(k);
            v.parse::<usize>()
                .map_err(|_| err(n, format!("{k}: expected a nonnegative integer, got '{v}'")))
        };
        let list = |k: &str| -> Result<Vec<f64>> {
            let (v, n) = get(k);
            v.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| err(n, format!("{k}: bad list entry '{}'", s.trim())))
                })
                .collect()
        };
        let line_of = |k: &str| get(k).1;

        let resolutions: Vec<usize> = {
            let (v, n) = get("domain.n");
            v.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|&x| x >= 4)
                        .ok_or_else(|| err(n, format!("domain.n: bad resolution '{}'", s.trim())))
                })
                .collect::<Result<_>>()?
        };
        let center = list("density.center")?;
        if center.len() != 2 {
            return Err(err(line_of("density.center"), "density.center needs two entries"));
        }
        let solvers: Vec<SolverKind> = get("solvers")
            .0
            .split(',')
            .map(|s| match s.trim() {
                "eulerian" => Ok(SolverKind::Eulerian),
                "lagrangian" => Ok(SolverKind::Lagrangian),
                o => Err(err(line_of("solvers"), format!("unknown solver '{o}'"))),
            })
            .collect::<Result<_>>()?;
        if solvers.len() != 2 {
            return Err(err(line_of("solvers"), "solvers needs exactly two entries"));
        }
        let flag = |k: &str| -> Result<bool> {
            match get(k).0 {
                "true" => Ok(true),
                "false" => Ok(false),
                o => Err(err(line_of(k), format!("{k}: expected true or false, got '{o}'"))),
            }
        };
        let preset_ok = |k: &str| -> Result<String> {
            let (v, n) = get(k);
            if PRESETS.iter().any(|(p, _)| *p == v) {
                Ok(v.to_string())
            } else {
                Err(err(n, format!("unknown preset '{v}'")))
            }
        };

        let cfg = Self {
            experiment: kind,
            seed: get("seed")
                .0
                .parse()
                .map_err(|_| err(line_of("seed"), "seed: expected an unsigned integer"))?,
            output: PathBuf::from(get("output").0),
            side_length: num("domain.l")?,
            resolutions,
            t_final: num("time.t_final")?,
            dt: num("time.dt")?,
            cfl: num("time.cfl")?,
            snapshots: int("time.snapshots")?,
            viscosities: list("physics.nu")?,
            deltas: list("physics.delta")?,
            gamma: num("physics.gamma")?,
            preset: preset_ok("initial.preset")?,
            amplitude: num("initial.amplitude")?,
            velocity_preset: preset_ok("velocity.preset")?,
            velocity_amplitude: num("velocity.amplitude")?,
            density_center: [center[0], center[1]],
            density_radius: num("density.radius")?,
            solvers: [solvers[0], solvers[1]],
            prune: num("kr.prune")?,
            beta_cut: num("renorm.beta_cut")?,
            renorm_tolerance: num("renorm.tolerance")?,
            levels: int("renorm.levels")?,
            particle_dt: num("renorm.particle_dt")?,
            trials: int("campaign.trials")?,
            assert_delta_trend: flag("assert.delta_trend")?,
            resolved: resolved.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect(),
        };
        cfg.check(&|k| line_of(k))?;
        Ok(cfg)
    }

    fn check(&self, line_of: &dyn Fn(&str) -> usize) -> Result<()> {
        let bad = |k: &str, m: &str| Err(err(line_of(k), format!("{k}: {m}")));
        if !(self.side_length > 0.0) {
            return bad("domain.l", "must be positive");
        }
        if self.t_final < 0.0 {
            return bad("time.t_final", "must be nonnegative");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("time.cfl", "must lie in (0, 1]");
        }
        if self.deltas.iter().any(|&d| !(d > 0.0)) {
            return bad("physics.delta", "entries must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("physics.gamma", "must lie in (0, 1)");
        }
        if !(self.prune >= 0.0 && self.prune < 1.0) {
            return bad("kr.prune", "must lie in [0, 1)");
        }
        match self.experiment {
            ExperimentKind::VanishingViscosity | ExperimentKind::Renormalization => {
                if !(self.dt > 0.0) {
                    return bad("time.dt", "must be positive");
                }
                if self.snapshots == 0 {
                    return bad("time.snapshots", "must be positive");
                }
                if self.viscosities.is_empty()
                    || self.viscosities.iter().any(|&v| !(v > 0.0))
                    || self.viscosities.windows(2).any(|w| w[1] >= w[0])
                {
                    return bad("physics.nu", "needs positive, strictly decreasing entries");
                }
                if self.resolutions.len() != 1 {
                    return bad("domain.n", "takes a single resolution for this experiment");
                }
            }
            ExperimentKind::UniquenessDemo => {
                if self.snapshots == 0 || !(self.t_final > 0.0) {
                    return bad("time.snapshots", "needs positive snapshots and t_final");
                }
                if self.deltas.is_empty() {
                    return bad("physics.delta", "needs at least one entry");
                }
            }
            ExperimentKind::Inequalities => {
                if self.trials == 0 {
                    return bad("campaign.trials", "must be positive");
                }
            }
        }
        Ok(())
    }

    /// Canonical `key = value` listing of every resolved key.
    pub fn canonical(&self) -> String {
        self.resolved
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::parse("experiment = inequalities\nseed = 7 # comment\n").unwrap();
        assert_eq!(c.experiment, ExperimentKind::Inequalities);
        assert_eq!(c.seed, 7);
        assert_eq!(c.trials, 1000);
        assert_eq!(c.hash().len(), 64);
        let d = ExperimentConfig::parse("seed = 7\nexperiment = inequalities\n").unwrap();
        assert_eq!(c.hash(), d.hash());
    }

    #[test]
    fn errors_name_the_line() {
        let e = ExperimentConfig::parse("experiment = inequalities\n\nfoo = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = ExperimentConfig::parse("experiment = renormalization\nphysics.nu = 0.001, 0.01\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = ExperimentConfig::parse("experiment = uniqueness_demo\ninitial.preset = nope\n").unwrap_err();
        assert!(e.to_string().contains("unknown preset"), "{e}");
        assert!(ExperimentConfig::parse("seed = 1\n").is_err());
        assert!(ExperimentConfig::parse("experiment inequalities\n").is_err());
    }
}
