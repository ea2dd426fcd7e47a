use rayon::prelude::*;

use super::field::{ElementData, NodalField};
use crate::basis::library;
use crate::error::{Error, Result};
use crate::mesh::{Axis, Face, Mesh};
use crate::physics::Model;

/// How the surface integral of the weak form is closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surface {
    /// Numerical (Roe / upwind) flux on face mortars.
    NonIsolated,
    /// Physical flux of each element's own trace.
    Isolated,
    /// No surface contribution at all.
    VolumeOnly,
}

/// Face traces of one element: west, east, south, north. West/east traces
/// have `N2 + 1` points, south/north `N1 + 1`.
struct Traces([Vec<f64>; 4]);

fn element_traces(data: &ElementData, nvar: usize) -> Traces {
    let lib = library();
    let [n1, n2] = data.degree;
    let ox = lib.ops(n1);
    let oy = lib.ops(n2);
    let mut west = vec![0.0; (n2 + 1) * nvar];
    let mut east = vec![0.0; (n2 + 1) * nvar];
    let mut south = vec![0.0; (n1 + 1) * nvar];
    let mut north = vec![0.0; (n1 + 1) * nvar];
    for j in 0..=n2 {
        for i in 0..=n1 {
            let k = data.node(i, j) * nvar;
            let (lx, rx, ly, ry) = (ox.left[i], ox.right[i], oy.left[j], oy.right[j]);
            for v in 0..nvar {
                let q = data.values[k + v];
                west[j * nvar + v] += lx * q;
                east[j * nvar + v] += rx * q;
                south[i * nvar + v] += ly * q;
                north[i * nvar + v] += ry * q;
            }
        }
    }
    Traces([west, east, south, north])
}

fn check_field(model: &Model, field: &NodalField) -> Result<()> {
    let nvar = field.nvar();
    let bad = field
        .elements()
        .par_iter()
        .enumerate()
        .find_map_first(|(e, data)| {
            data.values
                .chunks_exact(nvar)
                .enumerate()
                .find_map(|(node, q)| model.check(q).err().map(|r| (e, node, r)))
        });
    match bad {
        Some((element, node, r)) => Err(Error::Admissibility {
            element,
            node,
            reason: r.reason(),
        }),
        None => Ok(()),
    }
}

/// Flux through one face along `+axis`, expressed on each side's trace nodes.
struct FaceFlux {
    minus: Vec<f64>,
    plus: Vec<f64>,
}

/// Tangential trace degree of element data for a face normal to `axis`.
fn trace_degree(data: &ElementData, axis: Axis) -> usize {
    data.degree[axis.other().index()]
}

fn physical_trace_flux(model: &Model, trace: &[f64], axis: Axis, nvar: usize) -> Vec<f64> {
    let mut out = vec![0.0; trace.len()];
    for (q, f) in trace.chunks_exact(nvar).zip(out.chunks_exact_mut(nvar)) {
        model.flux(q, axis, f);
    }
    out
}

/// Interpolates a side trace to the mortar nodes.
fn to_mortar(trace: &[f64], from: usize, to: usize, nvar: usize) -> Vec<f64> {
    if from == to {
        return trace.to_vec();
    }
    let t = library().transfer(from, to);
    let mut out = vec![0.0; (to + 1) * nvar];
    for b in 0..=to {
        for (a, &w) in t.row(b).iter().enumerate() {
            for v in 0..nvar {
                out[b * nvar + v] += w * trace[a * nvar + v];
            }
        }
    }
    out
}

/// L2 projection of mortar data back onto a side of degree `to`:
/// `c_a = (1 / w_a) sum_b w^m_b l_a(x^m_b) f_b`.
fn from_mortar(mortar: &[f64], from: usize, to: usize, nvar: usize) -> Vec<f64> {
    if from == to {
        return mortar.to_vec();
    }
    let lib = library();
    let t = lib.transfer(to, from);
    let wm = lib.ops(from).weights();
    let ws = lib.ops(to).weights();
    let mut out = vec![0.0; (to + 1) * nvar];
    for b in 0..=from {
        for (a, &l) in t.row(b).iter().enumerate() {
            for v in 0..nvar {
                out[a * nvar + v] += wm[b] * l * mortar[b * nvar + v];
            }
        }
    }
    for a in 0..=to {
        for v in 0..nvar {
            out[a * nvar + v] /= ws[a];
        }
    }
    out
}

fn face_flux(
    model: &Model,
    face: &Face,
    field: &NodalField,
    traces: &[Traces],
) -> Result<FaceFlux> {
    let nvar = field.nvar();
    let axis = face.axis;
    // slot of the face in the minus element (east/north) and plus element (west/south)
    let (minus_slot, plus_slot) = match axis {
        Axis::X => (1, 0),
        Axis::Y => (3, 2),
    };
    match (face.minus, face.plus) {
        (Some(m), Some(p)) => {
            let nm_side = trace_degree(field.element(m), axis);
            let np_side = trace_degree(field.element(p), axis);
            let n_mortar = nm_side.max(np_side);
            let qm = to_mortar(&traces[m].0[minus_slot], nm_side, n_mortar, nvar);
            let qp = to_mortar(&traces[p].0[plus_slot], np_side, n_mortar, nvar);
            let mut f = vec![0.0; qm.len()];
            for (node, ((a, b), out)) in qm
                .chunks_exact(nvar)
                .zip(qp.chunks_exact(nvar))
                .zip(f.chunks_exact_mut(nvar))
                .enumerate()
            {
                model.numerical_flux(a, b, axis, out).map_err(|r| Error::Admissibility {
                    element: m,
                    node,
                    reason: r.reason(),
                })?;
            }
            Ok(FaceFlux {
                minus: from_mortar(&f, n_mortar, nm_side, nvar),
                plus: from_mortar(&f, n_mortar, np_side, nvar),
            })
        }
        // open boundary: each existing side sees its own physical flux
        (Some(m), None) => Ok(FaceFlux {
            minus: physical_trace_flux(model, &traces[m].0[minus_slot], axis, nvar),
            plus: Vec::new(),
        }),
        (None, Some(p)) => Ok(FaceFlux {
            minus: Vec::new(),
            plus: physical_trace_flux(model, &traces[p].0[plus_slot], axis, nvar),
        }),
        (None, None) => unreachable!("face without elements"),
    }
}

/// The discrete operator `F^N(Q)` of the weak form, with
/// `M dQ/dt + F^N(Q) = 0`.
///
/// Every node is checked for admissibility before any flux is evaluated.
pub fn spatial_operator(
    mesh: &Mesh,
    model: &Model,
    field: &NodalField,
    surface: Surface,
) -> Result<NodalField> {
    if field.len() != mesh.len() {
        return Err(Error::Layout(format!(
            "field has {} elements, mesh {}",
            field.len(),
            mesh.len()
        )));
    }
    check_field(model, field)?;
    let nvar = field.nvar();

    let traces: Vec<Traces> = field
        .elements()
        .par_iter()
        .map(|d| element_traces(d, nvar))
        .collect();

    let face_fluxes: Vec<FaceFlux> = if surface == Surface::NonIsolated {
        mesh.faces
            .par_iter()
            .map(|f| face_flux(model, f, field, &traces))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let elements: Vec<ElementData> = mesh
        .elements
        .par_iter()
        .zip(field.elements().par_iter())
        .enumerate()
        .map(|(e, (el, data))| {
            // surface fluxes along +axis on this element's four faces
            let fluxes: [Vec<f64>; 4] = match surface {
                Surface::NonIsolated => [
                    face_fluxes[el.faces[0]].plus.clone(),
                    face_fluxes[el.faces[1]].minus.clone(),
                    face_fluxes[el.faces[2]].plus.clone(),
                    face_fluxes[el.faces[3]].minus.clone(),
                ],
                Surface::Isolated => {
                    let t = &traces[e].0;
                    [
                        physical_trace_flux(model, &t[0], Axis::X, nvar),
                        physical_trace_flux(model, &t[1], Axis::X, nvar),
                        physical_trace_flux(model, &t[2], Axis::Y, nvar),
                        physical_trace_flux(model, &t[3], Axis::Y, nvar),
                    ]
                }
                Surface::VolumeOnly => {
                    let [n1, n2] = data.degree;
                    [
                        vec![0.0; (n2 + 1) * nvar],
                        vec![0.0; (n2 + 1) * nvar],
                        vec![0.0; (n1 + 1) * nvar],
                        vec![0.0; (n1 + 1) * nvar],
                    ]
                }
            };
            assemble_element(model, data, el.extent, &fluxes, nvar)
        })
        .collect();

    Ok(NodalField::from_elements(nvar, elements))
}

/// Weak-form residual of one element:
///
/// `F(i,j) = dy/2 w_j [ -sum_k w_k l_i'(x_k) fx(k,j) + l_i(1) f_E(j) - l_i(-1) f_W(j) ]
///         + dx/2 w_i [ -sum_l w_l l_j'(y_l) fy(i,l) + l_j(1) f_N(i) - l_j(-1) f_S(i) ]`
fn assemble_element(
    model: &Model,
    data: &ElementData,
    extent: [f64; 2],
    fluxes: &[Vec<f64>; 4],
    nvar: usize,
) -> ElementData {
    let lib = library();
    let [n1, n2] = data.degree;
    let ox = lib.ops(n1);
    let oy = lib.ops(n2);
    let hx = 0.5 * extent[0];
    let hy = 0.5 * extent[1];
    let nn = data.n_nodes();

    let mut fx = vec![0.0; nn * nvar];
    let mut fy = vec![0.0; nn * nvar];
    for (k, q) in data.values.chunks_exact(nvar).enumerate() {
        model.flux(q, Axis::X, &mut fx[k * nvar..(k + 1) * nvar]);
        model.flux(q, Axis::Y, &mut fy[k * nvar..(k + 1) * nvar]);
    }

    let mut out = ElementData::zeros(data.degree, nvar);
    let [fw, fe, fs, fn_] = fluxes;
    for j in 0..=n2 {
        for i in 0..=n1 {
            let dst = data.node(i, j) * nvar;
            let sx = hy * oy.weights()[j];
            let sy = hx * ox.weights()[i];
            let wx = ox.weak_derivative.row(i);
            let wy = oy.weak_derivative.row(j);
            for v in 0..nvar {
                let mut vol_x = 0.0;
                for (k, &w) in wx.iter().enumerate() {
                    vol_x += w * fx[data.node(k, j) * nvar + v];
                }
                let mut vol_y = 0.0;
                for (l, &w) in wy.iter().enumerate() {
                    vol_y += w * fy[data.node(i, l) * nvar + v];
                }
                let surf_x = ox.right[i] * fe[j * nvar + v] - ox.left[i] * fw[j * nvar + v];
                let surf_y = oy.right[j] * fn_[i * nvar + v] - oy.left[j] * fs[i * nvar + v];
                out.values[dst + v] = sx * (surf_x - vol_x) + sy * (surf_y - vol_y);
            }
        }
    }
    out
}

/// Diagonal DGSEM mass matrix entries `J w_i w_j`, one per node.
pub fn mass_entries(mesh: &Mesh, degree: [usize; 2], element: usize) -> Vec<f64> {
    let lib = library();
    let [n1, n2] = degree;
    let wx = lib.ops(n1).weights();
    let wy = lib.ops(n2).weights();
    let j = mesh.elements[element].jacobian;
    let mut out = Vec::with_capacity((n1 + 1) * (n2 + 1));
    for b in 0..=n2 {
        for a in 0..=n1 {
            out.push(j * wx[a] * wy[b]);
        }
    }
    out
}

fn scale_by_mass(mesh: &Mesh, field: &NodalField, invert: bool) -> NodalField {
    let nvar = field.nvar();
    let elements = field
        .elements()
        .par_iter()
        .enumerate()
        .map(|(e, data)| {
            let m = mass_entries(mesh, data.degree, e);
            let mut out = data.clone();
            for (node, chunk) in out.values.chunks_exact_mut(nvar).enumerate() {
                for v in chunk {
                    if invert {
                        *v /= m[node];
                    } else {
                        *v *= m[node];
                    }
                }
            }
            out
        })
        .collect();
    NodalField::from_elements(nvar, elements)
}

/// `M r`
pub fn mass_apply(mesh: &Mesh, field: &NodalField) -> NodalField {
    scale_by_mass(mesh, field, false)
}

/// `M^{-1} r`
pub fn mass_solve(mesh: &Mesh, field: &NodalField) -> NodalField {
    scale_by_mass(mesh, field, true)
}

/// `dQ/dt = -M^{-1} F^N(Q)` with the numerical-flux surface term.
pub fn time_derivative(mesh: &Mesh, model: &Model, field: &NodalField) -> Result<NodalField> {
    let mut r = mass_solve(mesh, &spatial_operator(mesh, model, field, Surface::NonIsolated)?);
    for e in r.elements_mut() {
        for v in e.values.iter_mut() {
            *v = -*v;
        }
    }
    Ok(r)
}
