use crate::basis::{lagrange_basis_at, library};
use crate::error::{Error, Result};
use crate::mesh::{DegreeLayout, Mesh};

/// Nodal values of one element: `(N1 + 1) x (N2 + 1)` Gauss nodes, each
/// carrying `nvar` components. Node `(i, j)` (i along x) starts at
/// `((j * (N1 + 1)) + i) * nvar`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementData {
    pub degree: [usize; 2],
    pub values: Vec<f64>,
}

impl ElementData {
    pub fn zeros(degree: [usize; 2], nvar: usize) -> Self {
        Self {
            degree,
            values: vec![0.0; (degree[0] + 1) * (degree[1] + 1) * nvar],
        }
    }

    pub fn n_nodes(&self) -> usize {
        (self.degree[0] + 1) * (self.degree[1] + 1)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.degree[0] + 1) + i
    }
}

/// Per-element tensor-product nodal field.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    nvar: usize,
    elements: Vec<ElementData>,
}

impl NodalField {
    pub fn zeros(layout: &DegreeLayout, nvar: usize) -> Self {
        Self {
            nvar,
            elements: layout
                .degrees()
                .iter()
                .map(|&d| ElementData::zeros(d, nvar))
                .collect(),
        }
    }

    pub fn from_elements(nvar: usize, elements: Vec<ElementData>) -> Self {
        Self { nvar, elements }
    }

    /// Samples `f(x, y, out)` at every Gauss node.
    pub fn from_fn<F>(mesh: &Mesh, layout: &DegreeLayout, nvar: usize, mut f: F) -> Self
    where
        F: FnMut([f64; 2], &mut [f64]),
    {
        let lib = library();
        let mut field = Self::zeros(layout, nvar);
        for (el, data) in mesh.elements.iter().zip(field.elements.iter_mut()) {
            let [n1, n2] = data.degree;
            let xs = lib.ops(n1).nodes();
            let ys = lib.ops(n2).nodes();
            for j in 0..=n2 {
                for i in 0..=n1 {
                    let p = el.map(xs[i], ys[j]);
                    let k = (j * (n1 + 1) + i) * nvar;
                    f(p, &mut data.values[k..k + nvar]);
                }
            }
        }
        field
    }

    pub fn nvar(&self) -> usize {
        self.nvar
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ElementData] {
        &self.elements
    }

    pub fn elements_mut(&mut self) -> &mut [ElementData] {
        &mut self.elements
    }

    pub fn element(&self, e: usize) -> &ElementData {
        &self.elements[e]
    }

    pub fn element_mut(&mut self, e: usize) -> &mut ElementData {
        &mut self.elements[e]
    }

    pub fn layout(&self) -> DegreeLayout {
        DegreeLayout::new(self.elements.iter().map(|e| e.degree).collect())
    }

    pub fn ndof(&self) -> usize {
        self.elements.iter().map(|e| e.n_nodes()).sum()
    }

    pub fn same_shape(&self, other: &NodalField) -> bool {
        self.nvar == other.nvar
            && self.elements.len() == other.elements.len()
            && self
                .elements
                .iter()
                .zip(&other.elements)
                .all(|(a, b)| a.degree == b.degree)
    }

    pub fn max_abs(&self) -> f64 {
        self.elements
            .iter()
            .flat_map(|e| e.values.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a - b|` over nodes and components, per component.
    pub fn max_abs_diff_per_var(&self, other: &NodalField) -> Vec<f64> {
        assert!(self.same_shape(other));
        let mut out = vec![0.0f64; self.nvar];
        for (a, b) in self.elements.iter().zip(&other.elements) {
            for (k, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
                let v = k % self.nvar;
                out[v] = out[v].max((x - y).abs());
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &NodalField) -> f64 {
        self.max_abs_diff_per_var(other).into_iter().fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.elements
            .iter()
            .all(|e| e.values.iter().all(|v| v.is_finite()))
    }

    /// `self = a * self + b * other`
    pub fn scale_add(&mut self, a: f64, b: f64, other: &NodalField) {
        debug_assert!(self.same_shape(other));
        for (x, y) in self.elements.iter_mut().zip(&other.elements) {
            for (p, q) in x.values.iter_mut().zip(&y.values) {
                *p = a * *p + b * q;
            }
        }
    }

    /// Interpolates every element onto a new degree layout (per-direction
    /// Lagrange transfer).
    pub fn interpolate(&self, layout: &DegreeLayout) -> Result<NodalField> {
        if layout.len() != self.len() {
            return Err(Error::Layout(format!(
                "{} elements in layout, {} in field",
                layout.len(),
                self.len()
            )));
        }
        let elements = self
            .elements
            .iter()
            .zip(layout.degrees())
            .map(|(e, &to)| interpolate_element(e, to, self.nvar))
            .collect();
        Ok(NodalField {
            nvar: self.nvar,
            elements,
        })
    }

    /// Value of the element interpolant at reference coordinates.
    pub fn evaluate(&self, e: usize, xi: [f64; 2]) -> Vec<f64> {
        let lib = library();
        let data = &self.elements[e];
        let [n1, n2] = data.degree;
        let lx = lagrange_basis_at(lib.ops(n1).nodes(), xi[0]);
        let ly = lagrange_basis_at(lib.ops(n2).nodes(), xi[1]);
        let mut out = vec![0.0; self.nvar];
        for j in 0..=n2 {
            for i in 0..=n1 {
                let w = lx[i] * ly[j];
                let k = data.node(i, j) * self.nvar;
                for v in 0..self.nvar {
                    out[v] += w * data.values[k + v];
                }
            }
        }
        out
    }

    /// Integral of every component over the domain (Gauss quadrature).
    pub fn integrate(&self, mesh: &Mesh) -> Vec<f64> {
        let lib = library();
        let mut total = vec![0.0; self.nvar];
        for (el, data) in mesh.elements.iter().zip(&self.elements) {
            let [n1, n2] = data.degree;
            let wx = lib.ops(n1).weights();
            let wy = lib.ops(n2).weights();
            for j in 0..=n2 {
                for i in 0..=n1 {
                    let w = el.jacobian * wx[i] * wy[j];
                    let k = data.node(i, j) * self.nvar;
                    for v in 0..self.nvar {
                        total[v] += w * data.values[k + v];
                    }
                }
            }
        }
        total
    }
}

/// Per-direction Lagrange transfer of one element to degree `to`.
/// Differences from the first node are interpolated, so constants are
/// reproduced bitwise.
pub fn interpolate_element(data: &ElementData, to: [usize; 2], nvar: usize) -> ElementData {
    if data.degree == to {
        return data.clone();
    }
    let lib = library();
    let [n1, n2] = data.degree;
    let [m1, m2] = to;
    let tx = lib.transfer(n1, m1);
    let ty = lib.transfer(n2, m2);
    // x direction: (m1+1) x (n2+1)
    let mut tmp = vec![0.0; (m1 + 1) * (n2 + 1) * nvar];
    for j in 0..=n2 {
        for a in 0..=m1 {
            let row = tx.row(a);
            let dst = (j * (m1 + 1) + a) * nvar;
            let base = j * (n1 + 1) * nvar;
            for (i, &t) in row.iter().enumerate() {
                let src = (j * (n1 + 1) + i) * nvar;
                for v in 0..nvar {
                    tmp[dst + v] += t * (data.values[src + v] - data.values[base + v]);
                }
            }
            for v in 0..nvar {
                tmp[dst + v] += data.values[base + v];
            }
        }
    }
    let mut out = ElementData::zeros(to, nvar);
    for b in 0..=m2 {
        let row = ty.row(b);
        for a in 0..=m1 {
            let dst = (b * (m1 + 1) + a) * nvar;
            let base = a * nvar;
            for (j, &t) in row.iter().enumerate() {
                let src = (j * (m1 + 1) + a) * nvar;
                for v in 0..nvar {
                    out.values[dst + v] += t * (tmp[src + v] - tmp[base + v]);
                }
            }
            for v in 0..nvar {
                out.values[dst + v] += tmp[base + v];
            }
        }
    }
    out
}
