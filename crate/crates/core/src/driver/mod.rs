//! Experiment orchestration: uniform, static and dynamic runs with their
//! monitors and output files.
//!
//! Output directory layout:
//!
//! ```text
//! monitors.csv        one row per monitored step (and t = 0)
//! events.csv          one row per event time (every dt_e)
//! layouts/NNNN.csv    degree layout after each adaptation
//! maps/NNNN.csv       truncation-error maps (if output.maps)
//! snapshots/NNNN.txt  snapshot every `output.snapshot_every` events (0: none)
//! final.txt           final snapshot
//! summary.txt         key = value summary
//! ```

mod config;
mod monitor;
mod snapshot;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

pub use config::{
    InitialCondition, InitialKind, MeshConfig, Mode, OutputConfig, RawConfig, RunConfig,
};
pub use monitor::{
    density_at, dissipation_dispersion, locate_peak, MonitorRecord, MonitorWriter, Pulse,
    MONITOR_HEADER,
};
pub use snapshot::{read_snapshot, write_snapshot};

use crate::adapt::{dynamic_stage, static_campaign, write_layout_csv};
use crate::dgsem::NodalField;
use crate::error::{Error, Result};
use crate::mesh::{DegreeLayout, Mesh};
use crate::physics::{EulerState, Model};
use crate::timeloop::{Integrator, StepInfo};

/// Process exit code for an error: 2 for configuration problems, 3 for
/// everything that goes wrong while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Parse { .. } => 2,
        _ => 3,
    }
}

/// Samples the initial condition on a layout.
pub fn initial_field(mesh: &Mesh, model: &Model, ic: &InitialCondition, layout: &DegreeLayout) -> NodalField {
    let [lx, ly] = mesh.bounds.extent();
    let (x0, y0) = (mesh.bounds.x_min, mesh.bounds.y_min);
    let two_pi = 2.0 * std::f64::consts::PI;
    let profile = |p: [f64; 2]| -> f64 {
        match ic.kind {
            InitialKind::Pulse => {
                let d = mesh.displacement(ic.center, p);
                ic.amplitude * (-ic.decay * (d[0] * d[0] + d[1] * d[1])).exp()
            }
            InitialKind::FreeStream => 0.0,
            InitialKind::Sine => ic.amplitude * (two_pi * (p[0] - x0) / lx).sin() * (two_pi * (p[1] - y0) / ly).sin(),
        }
    };
    match model {
        Model::Euler(e) => NodalField::from_fn(mesh, layout, 4, |p, o| {
            let rho = ic.density + profile(p);
            let s = EulerState::from_primitive(rho, ic.velocity[0], ic.velocity[1], ic.pressure, e.gamma);
            o.copy_from_slice(&s.to_array());
        }),
        Model::Advection(_) => NodalField::from_fn(mesh, layout, 1, |p, o| o[0] = ic.density + profile(p)),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WallTimes {
    pub estimation: Duration,
    pub adaptation: Duration,
    pub integration: Duration,
    pub monitors: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub mode: Mode,
    pub t_final: f64,
    pub steps: usize,
    /// Steps of the static estimation run.
    pub estimation_steps: usize,
    /// Adaptation events during the run (not counting the initial one).
    pub events: usize,
    pub stages: usize,
    /// NDOF of the final layout.
    pub ndof: usize,
    /// Average NDOF over all time steps of the run.
    pub ndof_dyn: f64,
    pub max_dissipation: f64,
    pub final_dissipation: f64,
    pub final_dispersion: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub wall: WallTimes,
    pub layout: DegreeLayout,
}

impl Summary {
    /// The NDOF figure reported for the run: layout NDOF for uniform and
    /// static runs, the time average for dynamic ones.
    pub fn effective_ndof(&self) -> f64 {
        match self.mode {
            Mode::Dynamic => self.ndof_dyn,
            _ => self.ndof as f64,
        }
    }

    pub fn render(&self) -> String {
        let mode = match self.mode {
            Mode::Uniform => "uniform",
            Mode::Static => "static",
            Mode::Dynamic => "dynamic",
        };
        let mut s = String::new();
        let w = &self.wall;
        let _ = writeln!(s, "mode = {mode}");
        let _ = writeln!(s, "t_final = {}", self.t_final);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "estimation_steps = {}", self.estimation_steps);
        let _ = writeln!(s, "events = {}", self.events);
        let _ = writeln!(s, "stages = {}", self.stages);
        let _ = writeln!(s, "ndof = {}", self.ndof);
        let _ = writeln!(s, "ndof_dyn = {:.6}", self.ndof_dyn);
        let _ = writeln!(s, "effective_ndof = {:.6}", self.effective_ndof());
        let _ = writeln!(s, "max_dissipation = {:.6e}", self.max_dissipation);
        let _ = writeln!(s, "final_dissipation = {:.6e}", self.final_dissipation);
        let _ = writeln!(s, "final_dispersion = {:.6e}", self.final_dispersion);
        let _ = writeln!(s, "mass_drift = {:.3e}", self.mass_drift);
        let _ = writeln!(s, "energy_drift = {:.3e}", self.energy_drift);
        let _ = writeln!(s, "wall_estimation = {:.3}", w.estimation.as_secs_f64());
        let _ = writeln!(s, "wall_adaptation = {:.3}", w.adaptation.as_secs_f64());
        let _ = writeln!(s, "wall_integration = {:.3}", w.integration.as_secs_f64());
        let _ = writeln!(s, "wall_monitors = {:.3}", w.monitors.as_secs_f64());
        s
    }
}

/// Where (and whether) to write files.
struct Outputs {
    dir: Option<PathBuf>,
    layouts: bool,
    maps: bool,
    snapshot_every: usize,
}

impl Outputs {
    fn new(cfg: &OutputConfig, files: bool) -> Result<Self> {
        let dir = if files { Some(cfg.dir.clone()) } else { None };
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
            if cfg.layouts {
                fs::create_dir_all(d.join("layouts"))?;
            }
            if cfg.maps {
                fs::create_dir_all(d.join("maps"))?;
            }
            if cfg.snapshot_every > 0 {
                fs::create_dir_all(d.join("snapshots"))?;
            }
        }
        Ok(Self {
            dir,
            layouts: cfg.layouts,
            maps: cfg.maps,
            snapshot_every: cfg.snapshot_every,
        })
    }

    fn path(&self, rel: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(rel))
    }

    fn layout(&self, k: usize, layout: &DegreeLayout) -> Result<()> {
        match self.path(&format!("layouts/{k:04}.csv")) {
            Some(p) if self.layouts => write_layout_csv(layout, &p),
            _ => Ok(()),
        }
    }

    fn map(&self, name: &str, map: &crate::tauest::TruncErrorMap) -> Result<()> {
        match self.path(&format!("maps/{name}.csv")) {
            Some(p) if self.maps => map.write_csv(&p),
            _ => Ok(()),
        }
    }
}

/// Per-step monitor bookkeeping.
struct Monitors<'a> {
    mesh: &'a Mesh,
    pulse: Option<Pulse>,
    dispersion: bool,
    every: usize,
    writer: Option<MonitorWriter>,
    error: Option<Error>,
    ndof_series: Vec<usize>,
    max_dissipation: f64,
    last: Option<MonitorRecord>,
    initial_totals: Vec<f64>,
    time: Duration,
}

impl<'a> Monitors<'a> {
    fn record(&mut self, t: f64, dt: f64, field: &NodalField) -> MonitorRecord {
        let clock = Instant::now();
        let totals = field.integrate(self.mesh);
        let (dissipation, dispersion) = match &self.pulse {
            Some(p) => dissipation_dispersion(self.mesh, field, t, p, self.dispersion),
            None => (f64::NAN, f64::NAN),
        };
        let r = MonitorRecord {
            t,
            dt,
            ndof: field.ndof(),
            rho_total: totals[0],
            energy_total: totals[totals.len() - 1],
            dissipation,
            dispersion,
        };
        if dissipation.is_finite() {
            self.max_dissipation = self.max_dissipation.max(dissipation);
        }
        if let Some(w) = &mut self.writer {
            if let Err(e) = w.write(&r) {
                self.error.get_or_insert(e);
            }
        }
        self.last = Some(r);
        self.time += clock.elapsed();
        r
    }

    fn on_step(&mut self, info: &StepInfo, field: &NodalField) {
        self.ndof_series.push(field.ndof());
        if info.step % self.every == 0 {
            self.record(info.t, info.dt, field);
        }
    }

    fn finish(&mut self, t: f64, field: &NodalField) -> Result<MonitorRecord> {
        let last = match self.last {
            Some(r) if r.t == t => r,
            _ => self.record(t, 0.0, field),
        };
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        if let Some(w) = self.writer.take() {
            w.finish()?;
        }
        Ok(last)
    }
}

fn relative_drift(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
}

/// Executes a run. With `files = false` nothing is written to disk.
pub fn run(cfg: &RunConfig, files: bool) -> Result<Summary> {
    let mesh = cfg.mesh.build()?;
    let model = cfg.model;
    let out = Outputs::new(&cfg.output, files)?;
    let mut wall = WallTimes::default();
    let ic = &cfg.ic;
    let pulse = (ic.kind == InitialKind::Pulse).then(|| Pulse {
        center: ic.center,
        velocity: ic.velocity,
        peak: ic.density + ic.amplitude,
    });

    // initial layout
    let mut estimation_steps = 0;
    let mut stages = 0;
    let layout = match cfg.mode {
        Mode::Uniform => DegreeLayout::uniform(mesh.len(), cfg.degree),
        Mode::Dynamic => DegreeLayout::uniform(mesh.len(), cfg.initial_degree),
        Mode::Static => {
            let start = Instant::now();
            let q = initial_field(&mesh, &model, ic, &DegreeLayout::uniform(mesh.len(), cfg.estimation_degree));
            let outcome = static_campaign(
                &mesh,
                &model,
                &q,
                cfg.time.cfl,
                cfg.time.dt_e,
                cfg.time.t_e,
                &cfg.policy,
                |_, _| {},
            )?;
            // time stepping of the estimation run is part of its cost
            wall.estimation += start.elapsed() - outcome.adaptation;
            wall.adaptation += outcome.adaptation;
            estimation_steps = outcome.steps;
            stages = outcome.stages;
            if let Some(c) = &outcome.combined {
                out.map("combined", c)?;
            }
            out.layout(0, &outcome.layout)?;
            outcome.layout
        }
    };
    let mut field = initial_field(&mesh, &model, ic, &layout);
    if cfg.mode == Mode::Dynamic && cfg.initial_adapt {
        let o = dynamic_stage(&mesh, &model, &field, &cfg.policy)?;
        wall.estimation += o.estimation;
        wall.adaptation += o.adaptation;
        out.map("0000", &o.map)?;
        out.layout(0, &o.layout)?;
        // the initial condition is known exactly: sample rather than transfer
        field = initial_field(&mesh, &model, ic, &o.layout);
    }

    let mut monitors = Monitors {
        mesh: &mesh,
        pulse,
        dispersion: cfg.dispersion,
        every: cfg.monitor_every,
        writer: match out.path("monitors.csv") {
            Some(p) => Some(MonitorWriter::create(&p)?),
            None => None,
        },
        error: None,
        ndof_series: Vec::new(),
        max_dissipation: 0.0,
        last: None,
        initial_totals: Vec::new(),
        time: Duration::ZERO,
    };
    let first = monitors.record(0.0, 0.0, &field);
    monitors.initial_totals = vec![first.rho_total, first.energy_total];

    let mut events_file = match out.path("events.csv") {
        Some(p) => {
            let mut f = std::io::BufWriter::new(fs::File::create(p)?);
            writeln!(f, "event,t,NDOF_before,NDOF_after")?;
            Some(f)
        }
        None => None,
    };
    let mut events = 0;
    let mut event_time = Duration::ZERO;
    let mut t = 0.0;
    let t_final = cfg.time.t_final;
    let mut integrator = Integrator::new(&mesh, &model, cfg.time.cfl);
    let loop_start = Instant::now();
    let policy = &cfg.policy;
    integrator.run_with_events(
        &mut field,
        &mut t,
        t_final,
        cfg.time.dt_e,
        |info, q| monitors.on_step(info, q),
        |k, te, q| {
            let clock = Instant::now();
            let before = q.ndof();
            if cfg.mode == Mode::Dynamic && te < t_final {
                let o = dynamic_stage(&mesh, &model, q, policy)?;
                wall.estimation += o.estimation;
                wall.adaptation += o.adaptation;
                out.map(&format!("{k:04}"), &o.map)?;
                out.layout(k, &o.layout)?;
                *q = o.field;
                events += 1;
            }
            if let Some(f) = &mut events_file {
                writeln!(f, "{k},{te:.17e},{before},{}", q.ndof())?;
            }
            if out.snapshot_every > 0 && k % out.snapshot_every == 0 {
                if let Some(p) = out.path(&format!("snapshots/{k:04}.txt")) {
                    write_snapshot(&p, &mesh, te, q)?;
                }
            }
            event_time += clock.elapsed();
            Ok(())
        },
    )?;
    let last = monitors.finish(t, &field)?;
    wall.monitors = monitors.time;
    wall.integration = loop_start.elapsed().saturating_sub(event_time + monitors.time);
    wall.adaptation += Duration::ZERO;
    if let Some(mut f) = events_file {
        f.flush()?;
    }
    if let Some(p) = out.path("final.txt") {
        write_snapshot(&p, &mesh, t, &field)?;
    }

    let series = &monitors.ndof_series;
    let summary = Summary {
        mode: cfg.mode,
        t_final: t,
        steps: integrator.steps(),
        estimation_steps,
        events,
        stages,
        ndof: field.ndof(),
        ndof_dyn: crate::adapt::ndof_dyn(series),
        max_dissipation: if pulse.is_some() { monitors.max_dissipation } else { f64::NAN },
        final_dissipation: last.dissipation,
        final_dispersion: last.dispersion,
        mass_drift: relative_drift(monitors.initial_totals[0], last.rho_total),
        energy_drift: relative_drift(monitors.initial_totals[1], last.energy_total),
        wall,
        layout: field.layout(),
    };
    if let Some(p) = out.path("summary.txt") {
        fs::write(p, summary.render())?;
    }
    Ok(summary)
}

/// Trims and resamples one monitor column; returns the output path and the
/// mean of the resampled signal.
pub fn resample_monitor(
    input: &Path,
    column: &str,
    window: f64,
    factor: usize,
    output: Option<&Path>,
) -> Result<(PathBuf, f64, bool)> {
    use crate::postproc::{mean, read_signal_csv, resample_uniform, trim_to_periods, write_signal_csv};
    let s = read_signal_csv(input, column)?;
    let trimmed = trim_to_periods(&s, window)?;
    let r = resample_uniform(&trimmed.signal, factor)?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("monitor");
            input.with_file_name(format!("{stem}.{column}.resampled.csv"))
        }
    };
    write_signal_csv(&r, column, &path)?;
    Ok((path, mean(&r), trimmed.untrimmed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> RunConfig {
        let text = format!(
            "mesh.nx = 5\nmesh.bounds = -2.5, 2.5, -2.5, 2.5\n{extra}"
        );
        RunConfig::from_str_with_overrides(&text, &[]).unwrap()
    }

    #[test]
    fn free_stream_uniform_run_is_exact() {
        let cfg = config("mode = uniform\nuniform.degree = 3\nic.kind = freestream\ntime.t_final = 1\n");
        let s = run(&cfg, false).unwrap();
        assert!(s.mass_drift < 1e-12 && s.energy_drift < 1e-12);
        assert!(s.max_dissipation.is_nan());
        assert_eq!(s.t_final, 1.0);
    }

    #[test]
    fn dynamic_event_count() {
        let cfg = config("mode = dynamic\ntime.t_final = 4\nadapt.dt_e = 1\nadapt.initial_degree = 3\n");
        let s = run(&cfg, false).unwrap();
        assert_eq!(s.events, 3);
        assert!(s.ndof_dyn > 0.0);
    }

    #[test]
    fn files_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let mk = |name: &str| {
            config(&format!(
                "mode = dynamic\ntime.t_final = 2\nadapt.dt_e = 0.5\noutput.dir = {}\noutput.snapshot_every = 2\n",
                dir.path().join(name).display()
            ))
        };
        let a = run(&mk("a"), true).unwrap();
        run(&mk("b"), true).unwrap();
        let read = |n: &str, f: &str| fs::read_to_string(dir.path().join(n).join(f)).unwrap();
        assert_eq!(read("a", "monitors.csv"), read("b", "monitors.csv"));
        assert_eq!(read("a", "events.csv").lines().count(), 1 + 4);
        // event rows land exactly on multiples of dt_e
        let monitors = read("a", "monitors.csv");
        for k in 1..=4 {
            let te = format!("{:.17e},", k as f64 * 0.5);
            assert!(monitors.lines().any(|l| l.starts_with(&te)), "{te}");
        }
        let mesh = mk("a").mesh.build().unwrap();
        let (t, q) = read_snapshot(&dir.path().join("a/final.txt"), &mesh).unwrap();
        assert_eq!(t, 2.0);
        assert_eq!(q.layout(), a.layout);
        assert!(dir.path().join("a/snapshots/0002.txt").exists());
        assert!(dir.path().join("a/layouts/0003.csv").exists());
        assert!(read("a", "summary.txt").contains("mode = dynamic"));
    }

    #[test]
    fn pulse_diagnostics_at_start() {
        let cfg = config("mode = uniform\nuniform.degree = 6\ntime.t_final = 0.01\n");
        let mesh = cfg.mesh.build().unwrap();
        let q = initial_field(&mesh, &cfg.model, &cfg.ic, &DegreeLayout::uniform(25, 6));
        let pulse = Pulse { center: [0.0; 2], velocity: [1.0, 0.0], peak: 2.0 };
        let (dis, disp) = dissipation_dispersion(&mesh, &q, 0.0, &pulse, true);
        assert!(dis < 1e-4, "{dis}");
        assert!(disp < 1.0 / 7.0, "{disp}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::config("k", "m")), 2);
        assert_eq!(exit_code(&Error::Layout("x".into())), 3);
    }
}
