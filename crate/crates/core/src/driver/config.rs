//! Run configuration: flat `key = value` lines with dotted section
//! prefixes. `#` starts a comment. Unknown keys are rejected.
//!
//! ```text
//! mode = dynamic            # uniform | static | dynamic
//! physics = euler           # euler | advection
//! mesh.nx = 29
//! mesh.ny = 29
//! mesh.bounds = -14.5, 14.5, -14.5, 14.5
//! ic.kind = pulse
//! time.t_final = 29
//! adapt.tau_max = 1e-2
//! adapt.dt_e = 1
//! output.dir = out/dyn
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adapt::{AdaptPolicy, Approach, Combine, JumpRule};
use crate::error::{Error, Result};
use crate::mesh::{Bounds, Mesh};
use crate::physics::Model;
use crate::tauest::Formulation;
use crate::timeloop::TimeControls;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Uniform,
    Static,
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialKind {
    /// `rho = density + amplitude * exp(-decay * r^2)`
    Pulse,
    FreeStream,
    /// One sine period per domain length.
    Sine,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialCondition {
    pub kind: InitialKind,
    pub center: [f64; 2],
    pub amplitude: f64,
    pub decay: f64,
    pub density: f64,
    pub velocity: [f64; 2],
    pub pressure: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
    pub periodic: [bool; 2],
}

impl MeshConfig {
    pub fn build(&self) -> Result<Mesh> {
        Mesh::cartesian(self.nx, self.ny, self.bounds, self.periodic)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Snapshot every this many events (0: final snapshot only).
    pub snapshot_every: usize,
    pub layouts: bool,
    pub maps: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: Model,
    pub mesh: MeshConfig,
    pub ic: InitialCondition,
    pub time: TimeControls,
    /// Degree of uniform runs.
    pub degree: usize,
    pub policy: AdaptPolicy,
    /// Uniform reference degree of the static estimation run.
    pub estimation_degree: usize,
    /// Uniform starting degree of dynamic runs.
    pub initial_degree: usize,
    /// Adapt the initial condition once before time stepping (dynamic).
    pub initial_adapt: bool,
    pub output: OutputConfig,
    /// Write a monitor row every this many steps.
    pub monitor_every: usize,
    pub dispersion: bool,
}

/// Raw `key -> (value, line)` table.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
    source: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: source.to_path_buf(),
                line: k + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            if entries.insert(key.clone(), (value.trim().to_string(), k + 1)).is_some() {
                return Err(Error::Parse {
                    path: source.to_path_buf(),
                    line: k + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            entries,
            source: source.to_path_buf(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Applies a `key=value` override (replacing or adding the key).
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(spec, "override must be `key=value`"))?;
        self.entries
            .insert(key.trim().to_string(), (value.trim().to_string(), 0));
        Ok(())
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|v| v.0)
    }

    fn get<T: FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            Some(v) => v
                .parse()
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
            None => default.ok_or_else(|| Error::config(key, "required key missing")),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str, len: usize, default: Option<Vec<T>>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            Some(v) => {
                let items: Vec<T> = v
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|e| Error::config(key, format!("cannot parse `{s}`: {e}")))
                    })
                    .collect::<Result<_>>()?;
                if items.len() != len {
                    return Err(Error::config(key, format!("expected {len} comma-separated values")));
                }
                Ok(items)
            }
            None => default.ok_or_else(|| Error::config(key, "required key missing")),
        }
    }

    fn pair(&mut self, key: &str, default: [f64; 2]) -> Result<[f64; 2]> {
        let v = self.list(key, 2, Some(default.to_vec()))?;
        Ok([v[0], v[1]])
    }

    /// Builds and validates the run configuration, consuming every key.
    pub fn into_run_config(mut self) -> Result<RunConfig> {
        let mode = match self.get::<String>("mode", None)?.as_str() {
            "uniform" => Mode::Uniform,
            "static" => Mode::Static,
            "dynamic" => Mode::Dynamic,
            other => return Err(Error::config("mode", format!("unknown mode `{other}`"))),
        };
        let physics: String = self.get("physics", Some("euler".into()))?;

        let nx: usize = self.get("mesh.nx", None)?;
        let ny: usize = self.get("mesh.ny", Some(nx))?;
        let b = self.list::<f64>("mesh.bounds", 4, None)?;
        let bounds = Bounds::new(b[0], b[1], b[2], b[3]);
        let periodic = match self.take("mesh.periodic") {
            None => [true, true],
            Some(v) => {
                let items: Vec<&str> = v.split(',').map(str::trim).collect();
                let parse = |s: &str| {
                    s.parse::<bool>()
                        .map_err(|e| Error::config("mesh.periodic", format!("`{s}`: {e}")))
                };
                match items.as_slice() {
                    [a] => [parse(a)?; 2],
                    [a, b] => [parse(a)?, parse(b)?],
                    _ => return Err(Error::config("mesh.periodic", "one or two booleans")),
                }
            }
        };
        if nx == 0 || ny == 0 {
            return Err(Error::config("mesh.nx", "need at least one element per direction"));
        }
        if !(b[1] > b[0] && b[3] > b[2]) {
            return Err(Error::config("mesh.bounds", "expected x_min < x_max, y_min < y_max"));
        }

        let kind = match self.get::<String>("ic.kind", Some("pulse".into()))?.as_str() {
            "pulse" => InitialKind::Pulse,
            "freestream" => InitialKind::FreeStream,
            "sine" => InitialKind::Sine,
            other => return Err(Error::config("ic.kind", format!("unknown initial condition `{other}`"))),
        };
        let ic = InitialCondition {
            kind,
            center: self.pair("ic.center", [0.0, 0.0])?,
            amplitude: self.get("ic.amplitude", Some(1.0))?,
            decay: self.get("ic.decay", Some(5.0))?,
            density: self.get("ic.density", Some(1.0))?,
            velocity: self.pair("ic.velocity", [1.0, 0.0])?,
            pressure: self.get("ic.pressure", Some(1.0))?,
        };
        if ic.decay <= 0.0 {
            return Err(Error::config("ic.decay", "must be positive"));
        }

        let model = match physics.as_str() {
            "euler" => {
                let mut m = Model::euler();
                if let Model::Euler(e) = &mut m {
                    e.gamma = self.get("euler.gamma", Some(e.gamma))?;
                    if !(e.gamma > 1.0) {
                        return Err(Error::config("euler.gamma", "must exceed 1"));
                    }
                }
                if !(ic.density > 0.0 && ic.pressure > 0.0) {
                    return Err(Error::config("ic.pressure", "density and pressure must be positive"));
                }
                m
            }
            "advection" => Model::advection(ic.velocity),
            other => return Err(Error::config("physics", format!("unknown physics `{other}`"))),
        };

        let t_final: f64 = self.get("time.t_final", None)?;
        let dt_e: f64 = self.get("adapt.dt_e", Some(1.0f64.min(t_final)))?;
        let time = TimeControls {
            cfl: self.get("time.cfl", Some(0.4))?,
            t_final,
            dt_e,
            t_e: self.get("adapt.t_e", Some(t_final))?,
        };
        time.validate()?;

        let policy = AdaptPolicy {
            tau_max: self.get("adapt.tau_max", Some(1e-2))?,
            formulation: self.get::<Formulation>("adapt.formulation", Some(Formulation::New))?,
            isolated: self.get("adapt.isolated", Some(true))?,
            jump_rule: self.get::<JumpRule>("adapt.jump_rule", Some(JumpRule::TwoThirds))?,
            combine: self.get::<Combine>("adapt.combine", Some(Combine::Max))?,
            approach: self.get::<Approach>("adapt.approach", Some(Approach::Two))?,
            max_decrease: self.get("adapt.max_decrease", Some(1))?,
            n_min: self.get("adapt.n_min", Some(1))?,
            n_max: self.get("adapt.n_max", Some(8))?,
        };
        policy.validate()?;
        let degree: usize = self.get("uniform.degree", if mode == Mode::Uniform { None } else { Some(1) })?;
        let estimation_degree: usize = self.get("adapt.estimation_degree", Some(3))?;
        let initial_degree: usize = self.get("adapt.initial_degree", Some(3))?;
        let initial_adapt: bool = self.get("adapt.initial_adapt", Some(true))?;
        for (key, d) in [
            ("uniform.degree", degree),
            ("adapt.estimation_degree", estimation_degree),
            ("adapt.initial_degree", initial_degree),
        ] {
            if d == 0 || d > crate::basis::MAX_DEGREE {
                return Err(Error::config(key, format!("degree must lie in 1..={}", crate::basis::MAX_DEGREE)));
            }
        }
        if mode == Mode::Static && estimation_degree < 2 {
            return Err(Error::config("adapt.estimation_degree", "estimation needs degree >= 2"));
        }
        if mode == Mode::Static && time.t_e < time.dt_e {
            return Err(Error::config("adapt.t_e", "no estimation stage before t_e"));
        }

        let output = OutputConfig {
            dir: PathBuf::from(self.get::<String>("output.dir", Some("out".into()))?),
            snapshot_every: self.get("output.snapshot_every", Some(0))?,
            layouts: self.get("output.layouts", Some(true))?,
            maps: self.get("output.maps", Some(false))?,
        };
        let monitor_every: usize = self.get("monitor.every", Some(1))?;
        if monitor_every == 0 {
            return Err(Error::config("monitor.every", "must be at least 1"));
        }
        let dispersion: bool = self.get("monitor.dispersion", Some(true))?;

        if let Some((key, (_, line))) = self.entries.iter().next() {
            let at = if *line > 0 {
                format!(" ({}:{line})", self.source.display())
            } else {
                " (override)".into()
            };
            return Err(Error::config(key.clone(), format!("unknown key{at}")));
        }
        Ok(RunConfig {
            mode,
            model,
            mesh: MeshConfig {
                nx,
                ny,
                bounds,
                periodic,
            },
            ic,
            time,
            degree,
            policy,
            estimation_degree,
            initial_degree,
            initial_adapt,
            output,
            monitor_every,
            dispersion,
        })
    }
}

impl RunConfig {
    pub fn from_str_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut raw = RawConfig::parse(text, Path::new("<config>"))?;
        for o in overrides {
            raw.set_override(o)?;
        }
        raw.into_run_config()
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut raw = RawConfig::read(path)?;
        for o in overrides {
            raw.set_override(o)?;
        }
        raw.into_run_config()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "mode = uniform\nmesh.nx = 4\nmesh.bounds = -2, 2, -2, 2\ntime.t_final = 1\nuniform.degree = 3\n";

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::from_str_with_overrides(BASE, &["adapt.tau_max=1e-3".into()]).unwrap();
        assert_eq!(c.mode, Mode::Uniform);
        assert_eq!((c.mesh.nx, c.mesh.ny), (4, 4));
        assert_eq!(c.policy.tau_max, 1e-3);
        assert_eq!(c.time.cfl, 0.4);
        assert_eq!(c.ic.kind, InitialKind::Pulse);
        assert!(c.policy.isolated);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = RunConfig::from_str_with_overrides(&format!("{BASE}adapt.tua_max = 1\n"), &[]).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "adapt.tua_max"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_and_malformed_keys() {
        let err = RunConfig::from_str_with_overrides("mode = uniform\n", &[]).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "mesh.nx"));
        let err = RunConfig::from_str_with_overrides(BASE, &["adapt.jump_rule=three-quarters".into()]).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "adapt.jump_rule"));
        let err = RunConfig::from_str_with_overrides(BASE, &["time.cfl=-1".into()]).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "time.cfl"));
        let err = RunConfig::from_str_with_overrides("mode = uniform\nmode = static\n", &[]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
