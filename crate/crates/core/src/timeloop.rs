//! Williamson's low-storage three-stage Runge–Kutta scheme with a CFL
//! time-step restriction and exactly-landed event times.

use crate::dgsem::{time_derivative, NodalField};
use crate::error::{Error, Result};
use crate::mesh::{Axis, Mesh};
use crate::physics::Model;

/// 2N-storage coefficients: `g = A_s g + dt L(q)`, `q = q + B_s g`.
pub const RK3_A: [f64; 3] = [0.0, -5.0 / 9.0, -153.0 / 128.0];
pub const RK3_B: [f64; 3] = [1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0];
/// Stage times as fractions of `dt`.
pub const RK3_C: [f64; 3] = [0.0, 1.0 / 3.0, 3.0 / 4.0];

/// State vectors the integrator can update in place.
pub trait StageVector: Clone {
    fn zeros_like(&self) -> Self;
    /// `self = a * self + b * x`
    fn scale_add(&mut self, a: f64, b: f64, x: &Self);
}

impl StageVector for NodalField {
    fn zeros_like(&self) -> Self {
        NodalField::zeros(&self.layout(), self.nvar())
    }

    fn scale_add(&mut self, a: f64, b: f64, x: &Self) {
        NodalField::scale_add(self, a, b, x)
    }
}

impl StageVector for Vec<f64> {
    fn zeros_like(&self) -> Self {
        vec![0.0; self.len()]
    }

    fn scale_add(&mut self, a: f64, b: f64, x: &Self) {
        for (p, q) in self.iter_mut().zip(x) {
            *p = a * *p + b * q;
        }
    }
}

/// One step of the low-storage RK3 scheme. `rhs(t, q)` returns `dq/dt`.
/// A failing stage is reported with its index (1-based).
pub fn rk3_step<V, F>(q: &mut V, t: f64, dt: f64, mut rhs: F) -> Result<()>
where
    V: StageVector,
    F: FnMut(f64, &V) -> Result<V>,
{
    let mut g = q.zeros_like();
    for s in 0..3 {
        let time = t + RK3_C[s] * dt;
        let dq = rhs(time, q).map_err(|e| Error::StepFailure {
            stage: s + 1,
            time,
            source: Box::new(e),
        })?;
        g.scale_add(RK3_A[s], dt, &dq);
        q.scale_add(1.0, RK3_B[s], &g);
    }
    Ok(())
}

/// Time-stepping parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeControls {
    pub cfl: f64,
    pub t_final: f64,
    /// Interval between estimation/adaptation events.
    pub dt_e: f64,
    /// Final estimation time (static adaptation).
    pub t_e: f64,
}

impl TimeControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0) {
            return Err(Error::config("time.cfl", "must be positive"));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::config("time.t_final", "must be positive"));
        }
        if !(self.dt_e > 0.0 && self.dt_e <= self.t_final) {
            return Err(Error::config("adapt.dt_e", "must satisfy 0 < dt_e <= t_final"));
        }
        Ok(())
    }
}

/// CFL-limited step: `cfl * min_e min_i dx_i / (lambda_i (N_i + 1)^2)`.
pub fn compute_dt(mesh: &Mesh, model: &Model, field: &NodalField, cfl: f64) -> Result<f64> {
    let nvar = field.nvar();
    let mut dt = f64::INFINITY;
    for (el, data) in mesh.elements.iter().zip(field.elements()) {
        for axis in [Axis::X, Axis::Y] {
            let a = axis.index();
            let lambda = data
                .values
                .chunks_exact(nvar)
                .map(|q| model.max_wave_speed(q, axis))
                .fold(0.0, f64::max);
            let n1 = (data.degree[a] + 1) as f64;
            if lambda > 0.0 {
                dt = dt.min(el.extent[a] / (lambda * n1 * n1));
            }
        }
    }
    let dt = cfl * dt;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config(
            "time.cfl",
            format!("time step {dt} is not a positive finite number"),
        ));
    }
    Ok(dt)
}

/// Clips `dt` so the step does not overshoot `t_event`.
pub fn clip_to_event(t: f64, dt: f64, t_event: f64) -> f64 {
    if t + dt >= t_event {
        t_event - t
    } else {
        dt
    }
}

/// Per-step information handed to monitors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
}

/// Explicit integrator for the non-isolated semi-discrete system.
pub struct Integrator<'a> {
    pub mesh: &'a Mesh,
    pub model: &'a Model,
    pub cfl: f64,
    steps: usize,
}

impl<'a> Integrator<'a> {
    pub fn new(mesh: &'a Mesh, model: &'a Model, cfl: f64) -> Self {
        Self {
            mesh,
            model,
            cfl,
            steps: 0,
        }
    }

    /// Total steps taken so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self, field: &mut NodalField, t: f64, dt: f64) -> Result<()> {
        let (mesh, model) = (self.mesh, self.model);
        rk3_step(field, t, dt, |_, q| time_derivative(mesh, model, q))?;
        self.steps += 1;
        Ok(())
    }

    /// Integrates from `*t` to exactly `t_target`, recomputing `dt` every step.
    /// `monitor` runs after each step.
    pub fn advance_until<M>(
        &mut self,
        field: &mut NodalField,
        t: &mut f64,
        t_target: f64,
        mut monitor: M,
    ) -> Result<()>
    where
        M: FnMut(&StepInfo, &NodalField),
    {
        while *t < t_target {
            let dt = compute_dt(self.mesh, self.model, field, self.cfl)?;
            let dt = clip_to_event(*t, dt, t_target);
            self.step(field, *t, dt)?;
            let landed = *t + dt >= t_target;
            *t = if landed { t_target } else { *t + dt };
            monitor(
                &StepInfo {
                    step: self.steps,
                    t: *t,
                    dt,
                },
                field,
            );
        }
        Ok(())
    }

    /// Integrates to `t_final`, stopping at every multiple of `dt_e` (and at
    /// `t_final`) to call `on_event(index, t, field)`. Event `k` (1-based)
    /// happens at `min(k * dt_e, t_final)`.
    pub fn run_with_events<M, E>(
        &mut self,
        field: &mut NodalField,
        t: &mut f64,
        t_final: f64,
        dt_e: f64,
        mut monitor: M,
        mut on_event: E,
    ) -> Result<usize>
    where
        M: FnMut(&StepInfo, &NodalField),
        E: FnMut(usize, f64, &mut NodalField) -> Result<()>,
    {
        let mut k = (*t / dt_e).floor() as usize;
        let mut fired = 0;
        while *t < t_final {
            k += 1;
            let mut t_event = (k as f64 * dt_e).min(t_final);
            if t_final - t_event <= 1e-12 * t_final {
                t_event = t_final;
            }
            if t_event <= *t {
                continue;
            }
            self.advance_until(field, t, t_event, &mut monitor)?;
            on_event(k, t_event, field)?;
            fired += 1;
        }
        Ok(fired)
    }
}

/// Number of events `run_with_events` fires between 0 and `t_final`.
pub fn event_count(t_final: f64, dt_e: f64) -> usize {
    (t_final / dt_e - 1e-12).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Bounds, DegreeLayout};
    use crate::physics::EulerState;
    use std::f64::consts::PI;

    #[test]
    fn zero_rhs_leaves_state_bitwise_unchanged() {
        let mut q = vec![1.0, -2.5, 3.25e-7];
        let orig = q.clone();
        rk3_step(&mut q, 0.0, 0.1, |_, v: &Vec<f64>| Ok(vec![0.0; v.len()])).unwrap();
        assert_eq!(q, orig);
    }

    fn decay_error(steps: usize) -> f64 {
        let dt = 1.0 / steps as f64;
        let mut q = vec![1.0];
        let mut t = 0.0;
        for _ in 0..steps {
            rk3_step(&mut q, t, dt, |_, v: &Vec<f64>| Ok(vec![-v[0]])).unwrap();
            t += dt;
        }
        (q[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn scalar_decay_is_third_order() {
        // one step: local error O(dt^4)
        let mut q = vec![1.0];
        rk3_step(&mut q, 0.0, 0.1, |_, v: &Vec<f64>| Ok(vec![-v[0]])).unwrap();
        let local = (q[0] - (-0.1f64).exp()).abs();
        assert!(local < 0.1f64.powi(4) / 24.0 * 1.5, "{local}");

        let e: Vec<f64> = [10, 20, 40, 80].iter().map(|&n| decay_error(n)).collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((2.8..=3.2).contains(&order), "order {order}");
        }
    }

    #[test]
    fn stage_failure_carries_stage_index() {
        let mut q = vec![1.0];
        let mut calls = 0;
        let err = rk3_step(&mut q, 0.0, 0.1, |_, v: &Vec<f64>| {
            calls += 1;
            if calls == 2 {
                Err(Error::Signal("boom".into()))
            } else {
                Ok(v.clone())
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::StepFailure { stage: 2, .. }));
    }

    fn free_stream(mesh: &Mesh, layout: &DegreeLayout) -> NodalField {
        NodalField::from_fn(mesh, layout, 4, |_, o| {
            o.copy_from_slice(&EulerState::from_primitive(1.0, 1.0, 0.0, 1.0, 1.4).to_array())
        })
    }

    #[test]
    fn dt_matches_closed_form_and_scales_with_degree() {
        let mesh = Mesh::cartesian(4, 4, Bounds::centered_square(4.0), [true; 2]).unwrap();
        let model = Model::euler();
        let mut layout = DegreeLayout::uniform(16, 3);
        let q = free_stream(&mesh, &layout);
        let dt = compute_dt(&mesh, &model, &q, 0.4).unwrap();
        let c = (1.4f64).sqrt();
        let expected = 0.4 * 1.0 / ((1.0 + c) * 16.0);
        assert!((dt - expected).abs() < 1e-15);

        layout.set(5, [7, 3]);
        let q2 = free_stream(&mesh, &layout);
        let dt2 = compute_dt(&mesh, &model, &q2, 0.4).unwrap();
        assert!(dt2 <= 0.5 * dt);
        assert!((dt2 - 0.4 / ((1.0 + c) * 64.0)).abs() < 1e-15);
    }

    #[test]
    fn clipping_lands_on_events() {
        assert_eq!(clip_to_event(0.95, 0.1, 1.0), 1.0 - 0.95);
        assert_eq!(clip_to_event(0.5, 0.1, 1.0), 0.1);
    }

    #[test]
    fn free_stream_holds_and_events_fire() {
        let mesh = Mesh::cartesian(3, 3, Bounds::centered_square(3.0), [true; 2]).unwrap();
        let model = Model::euler();
        let layout = DegreeLayout::uniform(9, 3);
        let mut q = free_stream(&mesh, &layout);
        let q0 = q.clone();
        let mut integ = Integrator::new(&mesh, &model, 0.4);
        let mut t = 0.0;
        let mut times = Vec::new();
        let mut last = 0.0;
        let n = integ
            .run_with_events(
                &mut q,
                &mut t,
                1.0,
                0.3,
                |s, _| {
                    assert!(s.t > last);
                    last = s.t;
                },
                |_, te, _| {
                    times.push(te);
                    Ok(())
                },
            )
            .unwrap();
        assert_eq!(n, event_count(1.0, 0.3));
        assert_eq!(n, 4);
        assert_eq!(times, vec![0.3, 2.0 * 0.3, 3.0 * 0.3, 1.0]);
        assert_eq!(t, 1.0);
        assert!(q.max_abs_diff(&q0) < 1e-12);
    }

    fn sine_run(n: usize, steps_per_unit: usize, t_end: f64) -> NodalField {
        let l = 2.0;
        let mesh = Mesh::cartesian(4, 4, Bounds::new(0.0, l, 0.0, l), [true; 2]).unwrap();
        let model = Model::advection([1.0, 1.0]);
        let layout = DegreeLayout::uniform(16, n);
        let mut q = NodalField::from_fn(&mesh, &layout, 1, |p, o| {
            o[0] = (PI * p[0]).sin() * (PI * p[1]).sin()
        });
        let mut integ = Integrator::new(&mesh, &model, 1.0);
        let steps = (steps_per_unit as f64 * t_end).round() as usize;
        let dt = t_end / steps as f64;
        for s in 0..steps {
            integ.step(&mut q, s as f64 * dt, dt).unwrap();
        }
        q
    }

    #[test]
    fn sine_advection_over_one_period() {
        let l = 2.0;
        let mesh = Mesh::cartesian(4, 4, Bounds::new(0.0, l, 0.0, l), [true; 2]).unwrap();
        let model = Model::advection([1.0, 0.0]);
        let layout = DegreeLayout::uniform(16, 6);
        let init = |p: [f64; 2]| (PI * p[0]).sin() * (PI * p[1]).sin();
        let mut q = NodalField::from_fn(&mesh, &layout, 1, |p, o| o[0] = init(p));
        let q0 = q.clone();
        let mut integ = Integrator::new(&mesh, &model, 0.2);
        let mut t = 0.0;
        integ.advance_until(&mut q, &mut t, l, |_, _| {}).unwrap();
        assert_eq!(t, l);
        let err = q.max_abs_diff(&q0);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn advection_time_order_under_dt_halving() {
        let a = sine_run(8, 400, 0.5);
        let b = sine_run(8, 800, 0.5);
        let c = sine_run(8, 1600, 0.5);
        let order = (a.max_abs_diff(&b) / b.max_abs_diff(&c)).log2();
        assert!((2.8..=3.2).contains(&order), "order {order}");
    }
}
