//! Strict flat key-value run configuration.
//!
//! The format is `section.key = value`, one per line, `#` to end of line is
//! a comment. The parseable keys are exactly the fields of [`RunConfig`];
//! an unknown or duplicated key is a hard error naming the offender, so a
//! typo can never silently fall back to a default. Missing keys take the
//! documented defaults. The example config shipped at the repository root
//! is the documentation of record for every key.

use axbq::fields::MeridianGrid;
use axbq::presets::{initial_state, InitKind, InitParams, PresetError};
use axbq::solver::{Scheme, SimState, StepConfig};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `section.key = value`, got `{text}`")]
    NotKeyValue { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {why} (got `{got}`)")]
    BadValue {
        line: usize,
        key: String,
        got: String,
        why: String,
    },
    #[error("grid: {0}")]
    Grid(#[from] axbq::fields::FieldError),
    #[error("init: {0}")]
    Init(#[from] PresetError),
    #[error(
        "output.snapshot_every = {snap} is not a multiple of output.observe_every = {obs}; \
         snapshots are written at observation moments"
    )]
    SnapshotCadence { snap: usize, obs: usize },
}

/// Which of the a-priori-estimate checks run after a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSet {
    pub energy: bool,
    pub density: bool,
    pub omega_over_r: bool,
    pub gamma: bool,
}

impl CheckSet {
    pub const ALL: CheckSet = CheckSet {
        energy: true,
        density: true,
        omega_over_r: true,
        gamma: true,
    };
    pub const NONE: CheckSet = CheckSet {
        energy: false,
        density: false,
        omega_over_r: false,
        gamma: false,
    };

    /// Accepts `all`, `none`, or a comma list of check names.
    fn parse(v: &str) -> Result<CheckSet, String> {
        match v {
            "all" => return Ok(CheckSet::ALL),
            "none" => return Ok(CheckSet::NONE),
            _ => {}
        }
        let mut set = CheckSet::NONE;
        for name in v.split(',').map(str::trim) {
            match name {
                "energy" => set.energy = true,
                "density" => set.density = true,
                "omega_over_r" => set.omega_over_r = true,
                "gamma" => set.gamma = true,
                _ => {
                    return Err(format!(
                        "unknown check `{name}`; expected all, none, or a comma list of \
                         energy, density, omega_over_r, gamma"
                    ))
                }
            }
        }
        Ok(set)
    }

    /// Whether the named diagnostics check is enabled.
    pub fn enables(&self, name: &str) -> bool {
        match name {
            "energy" => self.energy,
            "density" => self.density,
            "omega_over_r" => self.omega_over_r,
            "gamma" => self.gamma,
            _ => false,
        }
    }

    pub fn any(&self) -> bool {
        self.energy || self.density || self.omega_over_r || self.gamma
    }
}

/// One simulation run, fully specified.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub nr: usize,
    pub nz: usize,
    pub r_extent: f64,
    pub z_period: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub init_kind: InitKind,
    pub r0: f64,
    /// Bump height; defaults to mid-period when the key is absent.
    pub z0: Option<f64>,
    pub sigma: f64,
    pub amplitude: f64,
    pub out_dir: PathBuf,
    /// Snapshot cadence in steps; 0 disables snapshots.
    pub snapshot_every: usize,
    /// Diagnostics cadence in steps.
    pub observe_every: usize,
    pub checks: CheckSet,
    /// Multiplies every check tolerance; 1 keeps the pinned values.
    pub tolerance_scale: f64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            nr: 64,
            nz: 64,
            r_extent: 2.5,
            z_period: std::f64::consts::TAU,
            dt: 2e-3,
            t_end: 1.0,
            scheme: Scheme::Cnab2,
            init_kind: InitKind::DensityBubble,
            r0: 0.0,
            z0: None,
            sigma: 0.5,
            amplitude: 1.0,
            out_dir: PathBuf::from("out"),
            snapshot_every: 0,
            observe_every: 1,
            checks: CheckSet::ALL,
            tolerance_scale: 1.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: BTreeSet<String> = BTreeSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| {
                ConfigError::NotKeyValue {
                    line,
                    text: stripped.to_string(),
                }
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            cfg.apply(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |why: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            got: value.to_string(),
            why,
        };
        macro_rules! num {
            ($ty:ty) => {
                value
                    .parse::<$ty>()
                    .map_err(|e| bad(format!("not a valid number: {e}")))?
            };
        }
        match key {
            "grid.nr" => self.nr = num!(usize),
            "grid.nz" => self.nz = num!(usize),
            "grid.R" => self.r_extent = num!(f64),
            "grid.Lz" => self.z_period = num!(f64),
            "time.dt" => self.dt = num!(f64),
            "time.t_end" => self.t_end = num!(f64),
            "time.scheme" => {
                self.scheme = match value {
                    "cnab2" => Scheme::Cnab2,
                    "rk3" => Scheme::Rk3Imex,
                    _ => return Err(bad("expected cnab2 or rk3".to_string())),
                }
            }
            "init.kind" => {
                self.init_kind = match value {
                    "zero" => InitKind::Zero,
                    "density_bubble" => InitKind::DensityBubble,
                    "vortex_ring" => InitKind::VortexRing,
                    "combined" => InitKind::Combined,
                    _ => {
                        return Err(bad(
                            "expected zero, density_bubble, vortex_ring, or combined".to_string(),
                        ))
                    }
                }
            }
            "init.r0" => self.r0 = num!(f64),
            "init.z0" => self.z0 = Some(num!(f64)),
            "init.sigma" => self.sigma = num!(f64),
            "init.amplitude" => self.amplitude = num!(f64),
            "output.dir" => self.out_dir = PathBuf::from(value),
            "output.snapshot_every" => self.snapshot_every = num!(usize),
            "output.observe_every" => self.observe_every = num!(usize),
            "verify.checks" => self.checks = CheckSet::parse(value).map_err(bad)?,
            "verify.tolerance_scale" => self.tolerance_scale = num!(f64),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, got: String, why: &str| ConfigError::BadValue {
            line: 0,
            key: key.to_string(),
            got,
            why: why.to_string(),
        };
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("time.dt", format!("{}", self.dt), "must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(bad(
                "time.t_end",
                format!("{}", self.t_end),
                "must be nonnegative",
            ));
        }
        if self.observe_every == 0 {
            return Err(bad(
                "output.observe_every",
                "0".to_string(),
                "must be at least 1",
            ));
        }
        if self.snapshot_every != 0 && self.snapshot_every % self.observe_every != 0 {
            return Err(ConfigError::SnapshotCadence {
                snap: self.snapshot_every,
                obs: self.observe_every,
            });
        }
        if !(self.tolerance_scale > 0.0 && self.tolerance_scale.is_finite()) {
            return Err(bad(
                "verify.tolerance_scale",
                format!("{}", self.tolerance_scale),
                "must be positive",
            ));
        }
        Ok(())
    }

    /// Grid, initial state, and step configuration for this run.
    pub fn build(&self) -> Result<(Arc<MeridianGrid>, SimState, StepConfig), ConfigError> {
        let grid = MeridianGrid::new(self.nr, self.nz, self.r_extent, self.z_period)?;
        let params = InitParams {
            kind: self.init_kind,
            r0: self.r0,
            z0: self.z0.unwrap_or(0.5 * self.z_period),
            sigma: self.sigma,
            amplitude: self.amplitude,
        };
        let state = initial_state(&grid, &params)?;
        let mut step = StepConfig::new(self.dt);
        step.scheme = self.scheme;
        step.record_every = self.observe_every;
        Ok((grid, state, step))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_any_keys() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.nr, 64);
        assert_eq!(cfg.checks, CheckSet::ALL);
        assert!(matches!(cfg.scheme, Scheme::Cnab2));
    }

    #[test]
    fn parses_every_key() {
        let text = "\
grid.nr = 32          # comment after a value
grid.nz = 16
grid.R = 2.0
grid.Lz = 6.0
time.dt = 0.001
time.t_end = 0.5
time.scheme = rk3
init.kind = vortex_ring
init.r0 = 0.7
init.z0 = 3.0
init.sigma = 0.3
init.amplitude = -2.0
output.dir = results/run1
output.snapshot_every = 10
output.observe_every = 5
verify.checks = energy, gamma
verify.tolerance_scale = 2.5
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!((cfg.nr, cfg.nz), (32, 16));
        assert!(matches!(cfg.scheme, Scheme::Rk3Imex));
        assert!(matches!(cfg.init_kind, InitKind::VortexRing));
        assert_eq!(cfg.z0, Some(3.0));
        assert_eq!(cfg.out_dir, PathBuf::from("results/run1"));
        assert!(cfg.checks.energy && cfg.checks.gamma);
        assert!(!cfg.checks.density && !cfg.checks.omega_over_r);
        assert_eq!(cfg.tolerance_scale, 2.5);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("grid.nx = 32\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 1);
                assert_eq!(key, "grid.nx");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = RunConfig::parse("grid.nr = 32\ngrid.nr = 64\n").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 2, .. }));
    }

    #[test]
    fn malformed_line_rejected() {
        let err = RunConfig::parse("grid.nr 32\n").unwrap_err();
        assert!(matches!(err, ConfigError::NotKeyValue { line: 1, .. }));
    }

    #[test]
    fn bad_enum_values_name_the_choices() {
        let err = RunConfig::parse("time.scheme = euler\n").unwrap_err();
        assert!(err.to_string().contains("cnab2 or rk3"));
        let err = RunConfig::parse("verify.checks = energy, vorticity\n").unwrap_err();
        assert!(err.to_string().contains("unknown check `vorticity`"));
    }

    #[test]
    fn snapshot_cadence_must_align_with_observations() {
        let err =
            RunConfig::parse("output.snapshot_every = 3\noutput.observe_every = 2\n").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::SnapshotCadence { snap: 3, obs: 2 }
        ));
        RunConfig::parse("output.snapshot_every = 4\noutput.observe_every = 2\n").unwrap();
    }

    #[test]
    fn build_produces_matching_grid_and_state() {
        let cfg = RunConfig::parse("grid.nr = 16\ngrid.nz = 8\ninit.kind = zero\n").unwrap();
        let (grid, state, step) = cfg.build().unwrap();
        assert_eq!(grid.nr(), 16);
        assert_eq!(grid.nz(), 8);
        assert_eq!(state.omega().max_abs(), 0.0);
        assert_eq!(step.record_every, 1);
    }
}
