//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::grid::Grid;
use crate::model::PhysicalParams;
use crate::scalar::ScalarStepConfig;

use super::DriverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    /// Thermal couplings off and zero initial temperature.
    Isothermal,
    /// Temperature only, velocity frozen at zero.
    HeatOnly,
    /// Phase field only, velocity frozen at zero.
    PhaseOnly,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Isothermal => "isothermal",
            Mode::HeatOnly => "heat_only",
            Mode::PhaseOnly => "phase_only",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Mode::Full),
            "isothermal" => Ok(Mode::Isothermal),
            "heat_only" => Ok(Mode::HeatOnly),
            "phase_only" => Ok(Mode::PhaseOnly),
            _ => Err(format!("unknown mode '{s}' (expected full, isothermal, heat_only or phase_only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Flat,
    Bubble,
    Stratified,
    EigenmodeTheta,
    Random,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Flat => "flat",
            Preset::Bubble => "bubble",
            Preset::Stratified => "stratified",
            Preset::EigenmodeTheta => "eigenmode-theta",
            Preset::Random => "random",
        }
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flat" => Ok(Preset::Flat),
            "bubble" => Ok(Preset::Bubble),
            "stratified" => Ok(Preset::Stratified),
            "eigenmode-theta" => Ok(Preset::EigenmodeTheta),
            "random" => Ok(Preset::Random),
            _ => Err(format!("unknown initial condition '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcSpec {
    pub preset: Preset,
    /// Bubble radius.
    pub radius: f64,
    /// Interface height of the stratified preset, as a fraction of ly.
    pub height: f64,
    /// Peak initial temperature.
    pub theta_amp: f64,
    /// Radial perturbation of the bubble, relative to its radius.
    pub wobble: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub trace_path: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    /// Snapshot cadence in steps; 0 writes only the first and last state.
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    pub poisson_tol: f64,
    pub helmholtz_tol: f64,
    pub newton_tol: f64,
    pub tol_phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dt: f64,
    pub t_end: f64,
    pub params: PhysicalParams,
    pub eta1: f64,
    pub stab: f64,
    pub mode: Mode,
    pub ic: IcSpec,
    pub output: OutputSpec,
    pub tolerances: SolverTolerances,
    pub seed: u64,
    /// Fraction of the run excluded from decay fits.
    pub burn_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            lx: 1.0,
            ly: 1.0,
            dt: 1e-4,
            t_end: 0.1,
            params: PhysicalParams::default(),
            eta1: 1.0,
            stab: 2.0,
            mode: Mode::Full,
            ic: IcSpec {
                preset: Preset::Bubble,
                radius: 0.25,
                height: 0.5,
                theta_amp: 0.5,
                wobble: 0.0,
            },
            output: OutputSpec {
                trace_path: None,
                snapshot_dir: None,
                snapshot_every: 0,
            },
            tolerances: SolverTolerances {
                poisson_tol: 1e-10,
                helmholtz_tol: 1e-10,
                newton_tol: 1e-8,
                tol_phi: 1e-3,
            },
            seed: 0,
            burn_fraction: 0.1,
        }
    }
}

/// Every accepted key, in serialization order.
pub const KEYS: [&str; 34] = [
    "nx",
    "ny",
    "lx",
    "ly",
    "dt",
    "t_end",
    "nu",
    "gamma",
    "k",
    "lambda0",
    "a",
    "b",
    "alpha",
    "g",
    "eps",
    "c1_estimate",
    "omega",
    "eta1",
    "stab",
    "mode",
    "ic",
    "ic_radius",
    "ic_height",
    "ic_theta_amp",
    "ic_wobble",
    "seed",
    "trace_path",
    "snapshot_dir",
    "snapshot_every",
    "poisson_tol",
    "helmholtz_tol",
    "newton_tol",
    "tol_phi",
    "burn_fraction",
];

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, DriverError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| DriverError::Parse {
        line,
        message: format!("{key}: {e}"),
    })
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, DriverError> {
        Grid::new(self.nx, self.ny, self.lx, self.ly).map_err(|e| DriverError::Validation(e.to_string()))
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Coefficients actually used: isothermal mode switches off the
    /// thermal couplings.
    pub fn effective_params(&self) -> PhysicalParams {
        match self.mode {
            Mode::Isothermal => self.params.isothermal(),
            _ => self.params,
        }
    }

    pub fn step_config(&self) -> ScalarStepConfig {
        ScalarStepConfig {
            dt: self.dt,
            stab: self.stab,
            helmholtz_tol: self.tolerances.helmholtz_tol,
            poisson_tol: self.tolerances.poisson_tol,
        }
    }

    pub fn parse_str(text: &str) -> Result<Self, DriverError> {
        let mut c = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(DriverError::Parse {
                    line,
                    message: format!("expected 'key = value', got '{body}'"),
                });
            };
            let (key, v) = (key.trim(), value.trim());
            let p = &mut c.params;
            match key {
                "nx" => c.nx = parse(line, key, v)?,
                "ny" => c.ny = parse(line, key, v)?,
                "lx" => c.lx = parse(line, key, v)?,
                "ly" => c.ly = parse(line, key, v)?,
                "dt" => c.dt = parse(line, key, v)?,
                "t_end" => c.t_end = parse(line, key, v)?,
                "nu" => p.nu = parse(line, key, v)?,
                "gamma" => p.gamma = parse(line, key, v)?,
                "k" => p.k = parse(line, key, v)?,
                "lambda0" => p.lambda0 = parse(line, key, v)?,
                "a" => p.a = parse(line, key, v)?,
                "b" => p.b = parse(line, key, v)?,
                "alpha" => p.alpha = parse(line, key, v)?,
                "g" => p.g = parse(line, key, v)?,
                "eps" => p.eps = parse(line, key, v)?,
                "c1_estimate" => p.c1_estimate = parse(line, key, v)?,
                "omega" => p.omega_weight = parse(line, key, v)?,
                "eta1" => c.eta1 = parse(line, key, v)?,
                "stab" => c.stab = parse(line, key, v)?,
                "mode" => c.mode = parse(line, key, v)?,
                "ic" => c.ic.preset = parse(line, key, v)?,
                "ic_radius" => c.ic.radius = parse(line, key, v)?,
                "ic_height" => c.ic.height = parse(line, key, v)?,
                "ic_theta_amp" => c.ic.theta_amp = parse(line, key, v)?,
                "ic_wobble" => c.ic.wobble = parse(line, key, v)?,
                "seed" => c.seed = parse(line, key, v)?,
                "trace_path" => c.output.trace_path = opt_path(v),
                "snapshot_dir" => c.output.snapshot_dir = opt_path(v),
                "snapshot_every" => c.output.snapshot_every = parse(line, key, v)?,
                "poisson_tol" => c.tolerances.poisson_tol = parse(line, key, v)?,
                "helmholtz_tol" => c.tolerances.helmholtz_tol = parse(line, key, v)?,
                "newton_tol" => c.tolerances.newton_tol = parse(line, key, v)?,
                "tol_phi" => c.tolerances.tol_phi = parse(line, key, v)?,
                "burn_fraction" => c.burn_fraction = parse(line, key, v)?,
                _ => {
                    return Err(DriverError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        self.params.validate().map_err(|e| DriverError::Validation(e.to_string()))?;
        self.grid()?;
        let positive = [
            ("dt", self.dt),
            ("eta1", self.eta1),
            ("poisson_tol", self.tolerances.poisson_tol),
            ("helmholtz_tol", self.tolerances.helmholtz_tol),
            ("newton_tol", self.tolerances.newton_tol),
            ("tol_phi", self.tolerances.tol_phi),
            ("ic_radius", self.ic.radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DriverError::Validation(format!("{name} must be positive")));
            }
        }
        let nonneg = [
            ("t_end", self.t_end),
            ("stab", self.stab),
            ("ic_theta_amp", self.ic.theta_amp),
            ("ic_wobble", self.ic.wobble),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DriverError::Validation(format!("{name} must be non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&self.ic.height) {
            return Err(DriverError::Validation("ic_height must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.burn_fraction) {
            return Err(DriverError::Validation("burn_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Rejects output locations that cannot be created or written.
    pub fn check_outputs(&self) -> Result<(), DriverError> {
        if let Some(t) = &self.output.trace_path {
            if t.is_dir() {
                return Err(DriverError::Validation(format!("trace path {} is a directory", t.display())));
            }
            if let Some(parent) = t.parent().filter(|d| !d.as_os_str().is_empty()) {
                writable_ancestor(parent)?;
            }
        }
        if let Some(d) = &self.output.snapshot_dir {
            writable_ancestor(d)?;
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an identical config.
    pub fn serialize(&self) -> String {
        let p = &self.params;
        let path = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("nx", self.nx.to_string());
        put("ny", self.ny.to_string());
        put("lx", self.lx.to_string());
        put("ly", self.ly.to_string());
        put("dt", self.dt.to_string());
        put("t_end", self.t_end.to_string());
        put("nu", p.nu.to_string());
        put("gamma", p.gamma.to_string());
        put("k", p.k.to_string());
        put("lambda0", p.lambda0.to_string());
        put("a", p.a.to_string());
        put("b", p.b.to_string());
        put("alpha", p.alpha.to_string());
        put("g", p.g.to_string());
        put("eps", p.eps.to_string());
        put("c1_estimate", p.c1_estimate.to_string());
        put("omega", p.omega_weight.to_string());
        put("eta1", self.eta1.to_string());
        put("stab", self.stab.to_string());
        put("mode", self.mode.name().to_string());
        put("ic", self.ic.preset.name().to_string());
        put("ic_radius", self.ic.radius.to_string());
        put("ic_height", self.ic.height.to_string());
        put("ic_theta_amp", self.ic.theta_amp.to_string());
        put("ic_wobble", self.ic.wobble.to_string());
        put("seed", self.seed.to_string());
        put("trace_path", path(&self.output.trace_path));
        put("snapshot_dir", path(&self.output.snapshot_dir));
        put("snapshot_every", self.output.snapshot_every.to_string());
        put("poisson_tol", self.tolerances.poisson_tol.to_string());
        put("helmholtz_tol", self.tolerances.helmholtz_tol.to_string());
        put("newton_tol", self.tolerances.newton_tol.to_string());
        put("tol_phi", self.tolerances.tol_phi.to_string());
        put("burn_fraction", self.burn_fraction.to_string());
        s
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, DriverError> {
    let text = std::fs::read_to_string(path).map_err(|source| DriverError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = RunConfig::parse_str(&text)?;
    cfg.check_outputs()?;
    Ok(cfg)
}

/// Nearest existing ancestor of `p`, which must be a writable directory.
fn writable_ancestor(p: &Path) -> Result<(), DriverError> {
    let mut cur = Some(p);
    while let Some(c) = cur {
        if let Ok(meta) = std::fs::metadata(c) {
            if !meta.is_dir() || meta.permissions().readonly() {
                return Err(DriverError::Validation(format!("output path {} is not writable", p.display())));
            }
            return Ok(());
        }
        cur = c.parent().filter(|d| !d.as_os_str().is_empty());
    }
    Ok(())
}
