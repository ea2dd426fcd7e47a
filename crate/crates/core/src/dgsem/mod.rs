//! Discontinuous Galerkin spectral element operator on Cartesian meshes.
//!
//! The semi-discrete system is `M dQ/dt + F^N(Q) = 0`, with `M` the
//! diagonal mass matrix (`J w_i w_j` per node) and `F^N` the weak-form
//! operator: volume term integrated by parts plus a surface term.
//!
//! Faces between elements of different tangential degree are coupled
//! through a mortar of the larger degree. Both traces are interpolated to
//! the mortar Gauss nodes, the numerical flux is evaluated there, and the
//! result is L2-projected back onto each side. The projection keeps the
//! face integral of the flux identical on both sides, so the scheme stays
//! conservative and free-stream preserving for any degree layout.

mod field;
mod operator;

pub use field::{interpolate_element, ElementData, NodalField};
pub use operator::{
    mass_apply, mass_entries, mass_solve, spatial_operator, time_derivative, Surface,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::library;
    use crate::mesh::{Bounds, DegreeLayout, Mesh};
    use crate::physics::{EulerState, Model};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn periodic_mesh(n: usize, side: f64) -> Mesh {
        Mesh::cartesian(n, n, Bounds::new(0.0, side, 0.0, side), [true, true]).unwrap()
    }

    fn random_layout(n: usize, lo: usize, hi: usize, seed: u64) -> DegreeLayout {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DegreeLayout::new(
            (0..n)
                .map(|_| [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)])
                .collect(),
        )
    }

    fn euler_field(mesh: &Mesh, layout: &DegreeLayout, f: impl Fn([f64; 2]) -> [f64; 4]) -> NodalField {
        NodalField::from_fn(mesh, layout, 4, |p, out| {
            let [r, u, v, pr] = f(p);
            out.copy_from_slice(&EulerState::from_primitive(r, u, v, pr, 1.4).to_array());
        })
    }

    #[test]
    fn free_stream_is_preserved_on_mixed_layouts() {
        let mesh = periodic_mesh(6, 3.0);
        let model = Model::euler();
        for seed in 0..4 {
            let layout = random_layout(mesh.len(), 1, 8, seed);
            let q = euler_field(&mesh, &layout, |_| [1.0, 1.0, 0.3, 1.0]);
            for surface in [Surface::NonIsolated, Surface::Isolated] {
                let r = spatial_operator(&mesh, &model, &q, surface).unwrap();
                assert!(r.max_abs() < 1e-12, "{surface:?}: {}", r.max_abs());
            }
        }
    }

    fn sine(l: f64) -> impl Fn([f64; 2]) -> f64 {
        move |p| (2.0 * PI * p[0] / l).sin() * (2.0 * PI * p[1] / l).sin()
    }

    fn sine_divergence(l: f64, a: [f64; 2]) -> impl Fn([f64; 2]) -> f64 {
        let k = 2.0 * PI / l;
        move |p| {
            k * (a[0] * (k * p[0]).cos() * (k * p[1]).sin() + a[1] * (k * p[0]).sin() * (k * p[1]).cos())
        }
    }

    fn advection_residual_error(n: usize, elements: usize) -> f64 {
        let l = 2.0;
        let a = [1.0, 0.5];
        let mesh = periodic_mesh(elements, l);
        let model = Model::advection(a);
        let layout = DegreeLayout::uniform(mesh.len(), n);
        let q = NodalField::from_fn(&mesh, &layout, 1, |p, o| o[0] = sine(l)(p));
        let div = sine_divergence(l, a);
        let exact = NodalField::from_fn(&mesh, &layout, 1, |p, o| o[0] = -div(p));
        let dq = time_derivative(&mesh, &model, &q).unwrap();
        dq.max_abs_diff(&exact)
    }

    #[test]
    fn advection_matches_analytic_divergence() {
        let err = advection_residual_error(6, 12);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn advection_residual_converges_spectrally() {
        let errs: Vec<f64> = (2..=8).map(|n| advection_residual_error(n, 4)).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= 0.5 * w[0], "{errs:?}");
        }
    }

    #[test]
    fn single_element_isolated_equals_non_isolated() {
        // even in both directions: periodic traces coincide
        let mesh = periodic_mesh(1, 2.0);
        let model = Model::euler();
        let layout = DegreeLayout::new(vec![[4, 5]]);
        let q = euler_field(&mesh, &layout, |p| {
            let (x, y) = (p[0] - 1.0, p[1] - 1.0);
            [1.0 + 0.2 * x * x * y * y, 0.5, 0.2, 1.0 + 0.1 * x * x]
        });
        let a = spatial_operator(&mesh, &model, &q, Surface::NonIsolated).unwrap();
        let b = spatial_operator(&mesh, &model, &q, Surface::Isolated).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12, "{}", a.max_abs_diff(&b));
        assert!(a.max_abs() > 1e-3);
    }

    #[test]
    fn isolated_and_non_isolated_share_the_volume_term() {
        let mesh = periodic_mesh(3, 3.0);
        let model = Model::euler();
        let layout = random_layout(mesh.len(), 2, 6, 11);
        let q = euler_field(&mesh, &layout, |p| {
            [1.0 + 0.3 * (p[0] * 1.3).sin() * p[1].cos(), 0.7, -0.2, 1.0]
        });
        let vol = spatial_operator(&mesh, &model, &q, Surface::VolumeOnly).unwrap();
        let iso = spatial_operator(&mesh, &model, &q, Surface::Isolated).unwrap();
        let lib = library();
        // isolated surface term rebuilt from traces of the nodal data
        for (e, (el, data)) in mesh.elements.iter().zip(q.elements()).enumerate() {
            let [n1, n2] = data.degree;
            let (ox, oy) = (lib.ops(n1), lib.ops(n2));
            let tr = |xi: f64, eta: f64| q.evaluate(e, [xi, eta]);
            for j in 0..=n2 {
                for i in 0..=n1 {
                    let k = data.node(i, j) * 4;
                    let mut fe = [0.0; 4];
                    let mut fw = [0.0; 4];
                    let mut fnn = [0.0; 4];
                    let mut fs = [0.0; 4];
                    model.flux(&tr(1.0, oy.nodes()[j]), crate::mesh::Axis::X, &mut fe);
                    model.flux(&tr(-1.0, oy.nodes()[j]), crate::mesh::Axis::X, &mut fw);
                    model.flux(&tr(ox.nodes()[i], 1.0), crate::mesh::Axis::Y, &mut fnn);
                    model.flux(&tr(ox.nodes()[i], -1.0), crate::mesh::Axis::Y, &mut fs);
                    for v in 0..4 {
                        let s = 0.5 * el.extent[1] * oy.weights()[j] * (ox.right[i] * fe[v] - ox.left[i] * fw[v])
                            + 0.5 * el.extent[0] * ox.weights()[i] * (oy.right[j] * fnn[v] - oy.left[j] * fs[v]);
                        let got = iso.element(e).values[k + v] - vol.element(e).values[k + v];
                        assert!((got - s).abs() < 1e-12, "{got} vs {s}");
                    }
                }
            }
        }
    }

    #[test]
    fn discrete_conservation_conforming_and_mixed() {
        let mesh = periodic_mesh(5, 5.0);
        let model = Model::euler();
        for layout in [DegreeLayout::uniform(mesh.len(), 4), random_layout(mesh.len(), 1, 8, 5)] {
            let q = euler_field(&mesh, &layout, |p| {
                let r2 = (p[0] - 2.5).powi(2) + (p[1] - 2.5).powi(2);
                [1.0 + (-2.0 * r2).exp(), 1.0, 0.3, 1.0 + 0.2 * (-r2).exp()]
            });
            let dq = time_derivative(&mesh, &model, &q).unwrap();
            let total = dq.integrate(&mesh);
            for t in total {
                assert!(t.abs() < 1e-12, "{t}");
            }
        }
    }

    #[test]
    fn mass_matrix_examples() {
        let mesh = periodic_mesh(1, 1.0);
        let layout = DegreeLayout::uniform(1, 1);
        let ones = NodalField::from_fn(&mesh, &layout, 1, |_, o| o[0] = 1.0);
        let m = mass_apply(&mesh, &ones);
        let w = library().ops(1).weights();
        for j in 0..2 {
            for i in 0..2 {
                let v = m.element(0).values[m.element(0).node(i, j)];
                assert!((v - 0.25 * w[i] * w[j]).abs() < 1e-15);
            }
        }

        let mesh = periodic_mesh(3, 7.5);
        let layout = random_layout(mesh.len(), 1, 8, 3);
        let ones = NodalField::from_fn(&mesh, &layout, 1, |_, o| o[0] = 1.0);
        let m = mass_apply(&mesh, &ones);
        for (el, data) in mesh.elements.iter().zip(m.elements()) {
            let s: f64 = data.values.iter().sum();
            assert!((s - el.area()).abs() < 1e-13 * el.area());
            assert!(data.values.iter().all(|v| *v > 0.0));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = NodalField::from_fn(&mesh, &layout, 4, |_, o| {
            for v in o.iter_mut() {
                *v = rng_value(&mut rng);
            }
        });
        let back = mass_solve(&mesh, &mass_apply(&mesh, &r));
        for (a, b) in back.elements().iter().zip(r.elements()) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-14 * y.abs().max(1.0));
            }
        }
    }

    fn rng_value(rng: &mut ChaCha8Rng) -> f64 {
        rng.gen_range(-10.0..10.0)
    }

    #[test]
    fn inadmissible_state_reports_location() {
        let mesh = periodic_mesh(2, 2.0);
        let layout = DegreeLayout::uniform(4, 2);
        let mut q = euler_field(&mesh, &layout, |_| [1.0, 0.0, 0.0, 1.0]);
        q.element_mut(3).values[4 * 5] = -1.0;
        match spatial_operator(&mesh, &Model::euler(), &q, Surface::NonIsolated) {
            Err(crate::Error::Admissibility { element, node, .. }) => {
                assert_eq!((element, node), (3, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interpolation_commutes_between_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = ElementData {
            degree: [7, 5],
            values: (0..8 * 6 * 2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let xy = interpolate_element(&interpolate_element(&data, [3, 5], 2), [3, 2], 2);
        let yx = interpolate_element(&interpolate_element(&data, [7, 2], 2), [3, 2], 2);
        let direct = interpolate_element(&data, [3, 2], 2);
        for ((a, b), c) in xy.values.iter().zip(&yx.values).zip(&direct.values) {
            assert!((a - b).abs() < 1e-14);
            assert!((a - c).abs() < 1e-14);
        }
    }
}
