//! Polynomial-degree selection and the static / dynamic adaptation
//! controllers.
//!
//! Per element, the feasible set is every `(N1, N2)` whose truncation-error
//! map entry is below `tau_max`; the chosen degree is the feasible one with
//! fewest degrees of freedom. Several estimation stages can be merged either
//! before selection (entrywise over maps, "approach 2") or after it
//! (componentwise over the selected degrees, "approach 1").

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::dgsem::NodalField;
use crate::error::{Error, Result};
use crate::mesh::{element_ndof, DegreeLayout, Mesh};
use crate::physics::Model;
use crate::tauest::{
    build_map, extrapolate_map, ElementMap, Formulation, Provenance, Reference, TruncErrorMap,
    SENTINEL,
};
use crate::timeloop::{Integrator, StepInfo};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpRule {
    /// `N >= floor(2/3 N_neighbor)`
    TwoThirds,
    /// `N >= N_neighbor - 1`
    MinusOne,
}

impl JumpRule {
    /// Smallest degree an element may have next to a neighbor of degree `n`.
    pub fn bound(self, n: usize) -> usize {
        match self {
            JumpRule::TwoThirds => 2 * n / 3,
            JumpRule::MinusOne => n.saturating_sub(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    Max,
    Average,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Approach {
    /// Select per stage, then combine the selected degrees.
    One,
    /// Combine the maps, then select once.
    Two,
}

macro_rules! keyword_enum {
    ($ty:ty, $($name:literal => $variant:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(format!("expected one of {}, got `{s}`", [$($name),+].join(" | "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(JumpRule, "two-thirds" => JumpRule::TwoThirds, "minus-one" => JumpRule::MinusOne);
keyword_enum!(Combine, "max" => Combine::Max, "average" => Combine::Average);
keyword_enum!(Approach, "1" => Approach::One, "2" => Approach::Two);

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptPolicy {
    pub tau_max: f64,
    pub formulation: Formulation,
    pub isolated: bool,
    pub jump_rule: JumpRule,
    pub combine: Combine,
    pub approach: Approach,
    /// Largest degree decrease per direction in one dynamic stage.
    pub max_decrease: usize,
    pub n_min: usize,
    pub n_max: usize,
}

impl Default for AdaptPolicy {
    fn default() -> Self {
        Self {
            tau_max: 1e-2,
            formulation: Formulation::New,
            isolated: true,
            jump_rule: JumpRule::TwoThirds,
            combine: Combine::Max,
            approach: Approach::Two,
            max_decrease: 1,
            n_min: 1,
            n_max: 8,
        }
    }
}

impl AdaptPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_max > 0.0 && self.tau_max.is_finite()) {
            return Err(Error::config("adapt.tau_max", "must be positive and finite"));
        }
        if self.n_min < 1 || self.n_min > self.n_max {
            return Err(Error::config("adapt.n_min", "need 1 <= n_min <= n_max"));
        }
        if self.n_max > crate::basis::MAX_DEGREE {
            return Err(Error::config(
                "adapt.n_max",
                format!("at most {}", crate::basis::MAX_DEGREE),
            ));
        }
        Ok(())
    }
}

/// Feasible degree with fewest degrees of freedom (ties: smaller `N1 + N2`,
/// then smaller `N1`). Sentinel entries are never feasible. An empty
/// feasible set gives `(n_max, n_max)`.
pub fn select_element(map: &ElementMap, tau_max: f64, n_min: usize, n_max: usize) -> [usize; 2] {
    let mut best: Option<(usize, usize, usize, [usize; 2])> = None;
    for n1 in n_min..=n_max {
        for n2 in n_min..=n_max {
            let d = [n1, n2];
            if map.provenance(d) == Provenance::Sentinel || !(map.get(d) <= tau_max) {
                continue;
            }
            let key = (element_ndof(d), n1 + n2, n1, d);
            if best.map_or(true, |b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                best = Some(key);
            }
        }
    }
    best.map_or([n_max, n_max], |b| b.3)
}

pub fn select_degrees(map: &TruncErrorMap, policy: &AdaptPolicy) -> DegreeLayout {
    DegreeLayout::new(
        map.elements
            .iter()
            .map(|m| select_element(m, policy.tau_max, policy.n_min, policy.n_max))
            .collect(),
    )
}

/// Entrywise combination of stage maps; each entry keeps the least
/// trustworthy provenance among the stages, and sentinels stay sentinels.
pub fn combine_stages_approach2(maps: &[TruncErrorMap], f: Combine) -> Result<TruncErrorMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Layout("no estimation stages to combine".into()))?;
    let mut out = first.clone();
    for (e, m) in out.elements.iter_mut().enumerate() {
        let n_max = m.n_max;
        for n1 in 1..=n_max {
            for n2 in 1..=n_max {
                let d = [n1, n2];
                let mut acc = 0.0f64;
                let mut prov = Provenance::Measured;
                for s in maps {
                    let sm = &s.elements[e];
                    if sm.n_max != n_max {
                        return Err(Error::Layout("stage maps differ in shape".into()));
                    }
                    let v = sm.get(d);
                    acc = match f {
                        Combine::Max => acc.max(v),
                        Combine::Average => acc + v,
                    };
                    prov = prov.max(sm.provenance(d));
                }
                if f == Combine::Average {
                    acc /= maps.len() as f64;
                }
                if prov == Provenance::Sentinel {
                    acc = SENTINEL;
                }
                m.set(d, acc, prov);
            }
        }
    }
    Ok(out)
}

/// Componentwise combination of per-stage selections; averages round up.
pub fn combine_stages_approach1(layouts: &[DegreeLayout], f: Combine) -> Result<DegreeLayout> {
    let first = layouts
        .first()
        .ok_or_else(|| Error::Layout("no estimation stages to combine".into()))?;
    if layouts.iter().any(|l| l.len() != first.len()) {
        return Err(Error::Layout("stage layouts differ in length".into()));
    }
    let s = layouts.len();
    let degrees = (0..first.len())
        .map(|e| {
            let mut d = [0usize; 2];
            for i in 0..2 {
                let it = layouts.iter().map(|l| l.get(e)[i]);
                d[i] = match f {
                    Combine::Max => it.max().unwrap_or(0),
                    Combine::Average => it.sum::<usize>().div_ceil(s),
                };
            }
            d
        })
        .collect();
    Ok(DegreeLayout::new(degrees))
}

/// Raises degrees until every element satisfies the jump rule against all
/// of its face neighbors, direction by direction. The result is the least
/// such layout that is not below the input.
pub fn enforce_jump_condition(
    layout: &DegreeLayout,
    mesh: &Mesh,
    rule: JumpRule,
    n_max: usize,
) -> Result<DegreeLayout> {
    let mut out = layout.clone();
    let neighbors: Vec<Vec<usize>> = (0..mesh.len())
        .map(|e| mesh.neighbors(e))
        .collect::<Result<_>>()?;
    let mut queue: std::collections::VecDeque<usize> = (0..mesh.len()).collect();
    let mut queued = vec![true; mesh.len()];
    // a raised element can only tighten the bound of its neighbors
    while let Some(e) = queue.pop_front() {
        queued[e] = false;
        let d = out.get(e);
        for &n in &neighbors[e] {
            let mut nd = out.get(n);
            let mut raised = false;
            for i in 0..2 {
                let b = rule.bound(d[i]).min(n_max);
                if nd[i] < b {
                    nd[i] = b;
                    raised = true;
                }
            }
            if raised {
                out.set(n, nd);
                if !queued[n] {
                    queued[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    Ok(out)
}

/// Whether every face satisfies the rule in both directions.
pub fn satisfies_jump_condition(layout: &DegreeLayout, mesh: &Mesh, rule: JumpRule) -> bool {
    (0..mesh.len()).all(|e| {
        let d = layout.get(e);
        mesh.neighbors(e).unwrap_or_default().iter().all(|&n| {
            let nd = layout.get(n);
            (0..2).all(|i| d[i] >= rule.bound(nd[i]))
        })
    })
}

/// Per-direction Lagrange transfer onto the new degrees.
pub fn transfer_solution(field: &NodalField, layout: &DegreeLayout) -> Result<NodalField> {
    field.interpolate(layout)
}

pub fn ndof(layout: &DegreeLayout) -> usize {
    layout.ndof()
}

/// Time average of the per-step NDOF series.
pub fn ndof_dyn(series: &[usize]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    series.iter().map(|&n| n as f64).sum::<f64>() / series.len() as f64
}

pub struct DynamicOutcome {
    pub layout: DegreeLayout,
    pub field: NodalField,
    /// The extrapolated map the selection was made from.
    pub map: TruncErrorMap,
    /// Wall time spent building the map.
    pub estimation: Duration,
    /// Wall time spent selecting, enforcing and transferring.
    pub adaptation: Duration,
}

/// One estimate-and-adapt step, using the current solution as reference.
pub fn dynamic_stage(
    mesh: &Mesh,
    model: &Model,
    field: &NodalField,
    policy: &AdaptPolicy,
) -> Result<DynamicOutcome> {
    let clock = Instant::now();
    let current = field.layout();
    let reference = Reference::new(mesh, model, field.clone())?;
    let measured = build_map(
        mesh,
        model,
        &reference,
        policy.formulation,
        policy.isolated,
        policy.n_max,
    )?;
    let map = extrapolate_map(&measured, policy.n_max);
    let estimation = clock.elapsed();
    let clock = Instant::now();
    let degrees = map
        .elements
        .iter()
        .zip(current.degrees())
        .map(|(m, &cur)| {
            if !m.has_measurements() {
                return cur;
            }
            let sel = select_element(m, policy.tau_max, policy.n_min, policy.n_max);
            [0, 1].map(|i| sel[i].max(cur[i].saturating_sub(policy.max_decrease)))
        })
        .collect();
    let layout = enforce_jump_condition(
        &DegreeLayout::new(degrees),
        mesh,
        policy.jump_rule,
        policy.n_max,
    )?;
    let field = transfer_solution(field, &layout)?;
    Ok(DynamicOutcome {
        layout,
        field,
        map,
        estimation,
        adaptation: clock.elapsed(),
    })
}

pub struct StaticOutcome {
    pub layout: DegreeLayout,
    pub stages: usize,
    /// Time steps taken by the estimation run.
    pub steps: usize,
    /// Combined map, for approach 2.
    pub combined: Option<TruncErrorMap>,
    /// Wall time spent building maps (excluding time stepping).
    pub estimation: Duration,
    /// Wall time spent combining, selecting and enforcing.
    pub adaptation: Duration,
}

/// Runs the estimation simulation from `initial` (uniform reference degree)
/// up to `t_e`, estimating every `dt_e`, and returns the adapted layout for
/// the production run.
#[allow(clippy::too_many_arguments)]
pub fn static_campaign<M>(
    mesh: &Mesh,
    model: &Model,
    initial: &NodalField,
    cfl: f64,
    dt_e: f64,
    t_e: f64,
    policy: &AdaptPolicy,
    monitor: M,
) -> Result<StaticOutcome>
where
    M: FnMut(&StepInfo, &NodalField),
{
    if !(dt_e > 0.0) || t_e < dt_e {
        return Err(Error::config(
            "adapt.t_e",
            format!("estimation horizon {t_e} admits no stage at interval {dt_e}"),
        ));
    }
    let mut field = initial.clone();
    let mut t = 0.0;
    let mut integrator = Integrator::new(mesh, model, cfl);
    let mut maps = Vec::new();
    let mut picks = Vec::new();
    let mut estimation = Duration::ZERO;
    integrator.run_with_events(&mut field, &mut t, t_e, dt_e, monitor, |_, _, q| {
        let clock = Instant::now();
        let reference = Reference::new(mesh, model, q.clone())?;
        let measured = build_map(mesh, model, &reference, policy.formulation, policy.isolated, policy.n_max)?;
        let map = extrapolate_map(&measured, policy.n_max);
        match policy.approach {
            Approach::One => picks.push(select_degrees(&map, policy)),
            Approach::Two => maps.push(map),
        }
        estimation += clock.elapsed();
        Ok(())
    })?;
    let clock = Instant::now();
    let (selected, combined) = match policy.approach {
        Approach::One => (combine_stages_approach1(&picks, policy.combine)?, None),
        Approach::Two => {
            let c = combine_stages_approach2(&maps, policy.combine)?;
            (select_degrees(&c, policy), Some(c))
        }
    };
    let layout = enforce_jump_condition(&selected, mesh, policy.jump_rule, policy.n_max)?;
    Ok(StaticOutcome {
        layout,
        stages: maps.len() + picks.len(),
        steps: integrator.steps(),
        combined,
        estimation,
        adaptation: clock.elapsed(),
    })
}

pub fn write_layout_csv(layout: &DegreeLayout, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "element,N1,N2")?;
    for (e, d) in layout.degrees().iter().enumerate() {
        writeln!(out, "{e},{},{}", d[0], d[1])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_layout_csv(path: &Path) -> Result<DegreeLayout> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut degrees = Vec::new();
    for (k, line) in file.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if k == 0 || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(parse_err(k + 1, format!("expected 3 columns, got {}", cols.len())));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| parse_err(k + 1, format!("`{s}`: {e}")));
        let (e, n1, n2) = (num(cols[0])?, num(cols[1])?, num(cols[2])?);
        if e != degrees.len() {
            return Err(parse_err(k + 1, format!("element {e} out of order")));
        }
        if n1 == 0 || n2 == 0 || n1 > crate::basis::MAX_DEGREE || n2 > crate::basis::MAX_DEGREE {
            return Err(parse_err(k + 1, format!("degree ({n1},{n2}) out of range")));
        }
        degrees.push([n1, n2]);
    }
    Ok(DegreeLayout::new(degrees))
}
