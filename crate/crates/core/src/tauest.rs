//! Truncation-error estimation for unsteady problems.
//!
//! A solution `q^P` on the current (reference) layout stands in for the
//! exact solution. Its discrete time derivative `(M^P)^{-1} F^P(q^P)`
//! stands in for the continuous operator. Both are injected into coarser
//! anisotropic layouts `N < P`, where the truncation error is
//!
//! ```text
//! new:         tau~ = (M^N)^{-1} F^N(I^N q^P) - I^N [(M^P)^{-1} F^P(q^P)]
//! traditional: tau  = F^N(I^N q^P) - M^N I^N [(M^P)^{-1} F^P(q^P)]
//! ```
//!
//! so that `tau = M^N tau~` node by node. Per element, the infinity norms
//! over every measured `(N1, N2)` form a truncation-error map, which is
//! extended beyond `P` by fitting an exponential decay to each direction.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::dgsem::{
    interpolate_element, mass_apply, mass_solve, spatial_operator, NodalField, Surface,
};
use crate::error::{Error, Result};
use crate::mesh::{DegreeLayout, Mesh};
use crate::physics::Model;

/// Value given to map entries that must never satisfy a threshold.
pub const SENTINEL: f64 = 1e30;
/// Lower bound on extrapolated entries.
pub const TAU_FLOOR: f64 = 1e-16;
/// Round-off level below which a direction counts as converged.
pub const CONVERGED: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// Mass-matrix weighted, `tau = F^N(I q) - M^N I F(q)`.
    Traditional,
    /// Pointwise, `tau~ = (M^N)^{-1} F^N(I q) - I F(q)`.
    New,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Traditional => "traditional",
            Formulation::New => "new",
        })
    }
}

impl std::str::FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "traditional" => Ok(Formulation::Traditional),
            "new" => Ok(Formulation::New),
            _ => Err(format!("expected `traditional` or `new`, got `{s}`")),
        }
    }
}

/// Per-direction Lagrange injection onto a coarser (or equal) layout.
pub fn inject(field: &NodalField, target: &DegreeLayout) -> Result<NodalField> {
    if target.len() != field.len() {
        return Err(Error::Layout(format!(
            "target layout has {} elements, field {}",
            target.len(),
            field.len()
        )));
    }
    let mut elements = Vec::with_capacity(field.len());
    for (e, (data, &to)) in field.elements().iter().zip(target.degrees()).enumerate() {
        if to[0] > data.degree[0] || to[1] > data.degree[1] {
            return Err(Error::InvalidRestriction {
                element: e,
                from: data.degree,
                to,
            });
        }
        elements.push(interpolate_element(data, to, field.nvar()));
    }
    Ok(NodalField::from_elements(field.nvar(), elements))
}

/// The high-order solution and its discrete time derivative
/// `(M^P)^{-1} F^P(q^P)`, computed once per estimation stage.
pub struct Reference {
    pub solution: NodalField,
    pub operator: NodalField,
}

impl Reference {
    pub fn new(mesh: &Mesh, model: &Model, solution: NodalField) -> Result<Self> {
        let f = spatial_operator(mesh, model, &solution, Surface::NonIsolated)?;
        let operator = mass_solve(mesh, &f);
        Ok(Self { solution, operator })
    }

    pub fn degrees(&self) -> DegreeLayout {
        self.solution.layout()
    }
}

/// Nodal truncation error on a target layout.
#[derive(Clone, Debug)]
pub struct TauField {
    pub values: NodalField,
    pub formulation: Formulation,
    pub isolated: bool,
}

impl TauField {
    /// Infinity norm over nodes and components, per element.
    pub fn element_norms(&self) -> Vec<f64> {
        self.values
            .elements()
            .iter()
            .map(|e| e.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
            .collect()
    }
}

pub fn estimate_tau(
    mesh: &Mesh,
    model: &Model,
    reference: &Reference,
    target: &DegreeLayout,
    formulation: Formulation,
    isolated: bool,
) -> Result<TauField> {
    let injected = inject(&reference.solution, target)?;
    let surface = if isolated {
        Surface::Isolated
    } else {
        Surface::NonIsolated
    };
    let discrete = spatial_operator(mesh, model, &injected, surface)?;
    let continuous = inject(&reference.operator, target)?;
    let values = match formulation {
        Formulation::New => {
            let mut v = mass_solve(mesh, &discrete);
            v.scale_add(1.0, -1.0, &continuous);
            v
        }
        Formulation::Traditional => {
            let mut v = discrete;
            v.scale_add(1.0, -1.0, &mass_apply(mesh, &continuous));
            v
        }
    };
    Ok(TauField {
        values,
        formulation,
        isolated,
    })
}

/// Where a map entry came from. Ordered from most to least trustworthy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Measured,
    Extrapolated,
    Sentinel,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Measured => "measured",
            Provenance::Extrapolated => "extrapolated",
            Provenance::Sentinel => "sentinel",
        })
    }
}

/// Truncation-error map of one element over `(N1, N2) in [1, n_max]^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementMap {
    /// Reference degrees the map was measured from.
    pub reference: [usize; 2],
    pub n_max: usize,
    values: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl ElementMap {
    /// A map with every entry set to the sentinel.
    pub fn empty(reference: [usize; 2], n_max: usize) -> Self {
        Self {
            reference,
            n_max,
            values: vec![SENTINEL; n_max * n_max],
            provenance: vec![Provenance::Sentinel; n_max * n_max],
        }
    }

    fn slot(&self, n: [usize; 2]) -> usize {
        assert!(
            (1..=self.n_max).contains(&n[0]) && (1..=self.n_max).contains(&n[1]),
            "map entry {n:?} outside [1, {}]^2",
            self.n_max
        );
        (n[0] - 1) * self.n_max + (n[1] - 1)
    }

    pub fn get(&self, n: [usize; 2]) -> f64 {
        self.values[self.slot(n)]
    }

    pub fn provenance(&self, n: [usize; 2]) -> Provenance {
        self.provenance[self.slot(n)]
    }

    pub fn set(&mut self, n: [usize; 2], value: f64, provenance: Provenance) {
        let k = self.slot(n);
        self.values[k] = value;
        self.provenance[k] = provenance;
    }

    /// Whether any entry was measured (both reference degrees >= 2).
    pub fn has_measurements(&self) -> bool {
        self.reference[0] >= 2 && self.reference[1] >= 2
    }

    /// Every `(N1, N2)` in `[1, n_max]^2`, N2 fastest.
    pub fn entries(&self) -> impl Iterator<Item = ([usize; 2], f64, Provenance)> + '_ {
        let n = self.n_max;
        (1..=n)
            .flat_map(move |a| (1..=n).map(move |b| [a, b]))
            .map(move |d| (d, self.get(d), self.provenance(d)))
    }
}

/// One [`ElementMap`] per mesh element.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncErrorMap {
    pub elements: Vec<ElementMap>,
}

impl TruncErrorMap {
    pub fn n_max(&self) -> usize {
        self.elements.first().map_or(0, |e| e.n_max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "element,N1,N2,tau_inf,provenance")?;
        for (e, m) in self.elements.iter().enumerate() {
            for (d, v, p) in m.entries() {
                writeln!(out, "{e},{},{},{v:.17e},{p}", d[0], d[1])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Measures every map entry `(N1, N2) in [1, P1 - 1] x [1, P2 - 1]` by
/// estimating on the layout `N_e = min(N, P_e)`. Entries that cannot be
/// measured are left as sentinels.
pub fn build_map(
    mesh: &Mesh,
    model: &Model,
    reference: &Reference,
    formulation: Formulation,
    isolated: bool,
    n_max: usize,
) -> Result<TruncErrorMap> {
    let refs = reference.degrees();
    let mut maps: Vec<ElementMap> = refs
        .degrees()
        .iter()
        .map(|&p| ElementMap::empty(p, n_max))
        .collect();
    let p_max = refs
        .degrees()
        .iter()
        .fold([0, 0], |m, p| [m[0].max(p[0]), m[1].max(p[1])]);
    for n1 in 1..p_max[0] {
        for n2 in 1..p_max[1] {
            let target = DegreeLayout::new(
                refs.degrees()
                    .iter()
                    .map(|p| [n1.min(p[0]), n2.min(p[1])])
                    .collect(),
            );
            let tau = estimate_tau(mesh, model, reference, &target, formulation, isolated)?;
            for ((m, p), norm) in maps.iter_mut().zip(refs.degrees()).zip(tau.element_norms()) {
                if n1 < p[0] && n2 < p[1] && n1 <= n_max && n2 <= n_max {
                    m.set([n1, n2], norm, Provenance::Measured);
                }
            }
        }
    }
    Ok(TruncErrorMap { elements: maps })
}

/// Least-squares line through `(N, log10 tau)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub intercept: f64,
    /// Change of `log10 tau` per unit degree.
    pub slope: f64,
}

impl DecayFit {
    pub fn eval(&self, n: usize) -> f64 {
        10f64.powf(self.intercept + self.slope * n as f64).max(TAU_FLOOR)
    }
}

/// Fits `log10 tau = a + b N` to the points. Needs at least two.
pub fn fit_log_decay(points: &[(usize, f64)]) -> Option<DecayFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.max(TAU_FLOOR).log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some(DecayFit {
        intercept: my - slope * mx,
        slope,
    })
}

/// Fit of one direction, present only in the asymptotic range (at least two
/// points, strictly decreasing). A direction whose measured error is at
/// round-off level is converged and extrapolates to its largest value.
fn directional_fit(points: &[(usize, f64)]) -> Option<DecayFit> {
    if !points.is_empty() && points.iter().all(|p| p.1 <= CONVERGED) {
        let top = points.iter().fold(TAU_FLOOR, |m, p| m.max(p.1));
        return Some(DecayFit {
            intercept: top.log10(),
            slope: 0.0,
        });
    }
    let decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
    if points.len() >= 2 && decreasing {
        fit_log_decay(points)
    } else {
        None
    }
}

/// Fills the entries of a measured element map beyond the reference degree
/// with `g1(N1) + g2(N2)`, where `g1(N) = map(N, P2 - 1)` and
/// `g2(N) = map(P1 - 1, N)` are taken as measured when available and from an
/// exponential fit otherwise. A direction that is not asymptotic gets the
/// sentinel wherever its degree reaches the reference degree.
pub fn extrapolate_element(map: &ElementMap, n_max: usize) -> ElementMap {
    let [p1, p2] = map.reference;
    let mut out = ElementMap::empty(map.reference, n_max);
    if !map.has_measurements() {
        return out;
    }
    for (d, v, p) in map.entries() {
        if p == Provenance::Measured && d[0] <= n_max && d[1] <= n_max {
            out.set(d, v, p);
        }
    }
    let g1: Vec<(usize, f64)> = (1..p1).map(|n| (n, map.get([n, p2 - 1]))).collect();
    let g2: Vec<(usize, f64)> = (1..p2).map(|n| (n, map.get([p1 - 1, n]))).collect();
    let fits = [directional_fit(&g1), directional_fit(&g2)];
    let gens = [&g1, &g2];
    let generator = |dir: usize, n: usize| -> Option<f64> {
        let p = map.reference[dir];
        if n < p {
            Some(gens[dir][n - 1].1)
        } else {
            fits[dir].map(|f| f.eval(n))
        }
    };
    for n1 in 1..=n_max {
        for n2 in 1..=n_max {
            if n1 < p1 && n2 < p2 {
                continue;
            }
            match (generator(0, n1), generator(1, n2)) {
                (Some(a), Some(b)) => out.set([n1, n2], (a + b).max(TAU_FLOOR), Provenance::Extrapolated),
                _ => out.set([n1, n2], SENTINEL, Provenance::Sentinel),
            }
        }
    }
    out
}

pub fn extrapolate_map(map: &TruncErrorMap, n_max: usize) -> TruncErrorMap {
    TruncErrorMap {
        elements: map
            .elements
            .iter()
            .map(|m| extrapolate_element(m, n_max))
            .collect(),
    }
}
