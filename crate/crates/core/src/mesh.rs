//! Cartesian quadrilateral meshes with optional periodic wrap.
//!
//! Elements are numbered row by row: `index = iy * nx + ix`. Each element
//! keeps the indices of its four faces in the order west, east, south,
//! north. A face has a minus side (lower coordinate) and a plus side; on a
//! non-periodic boundary one of the two is absent.

use crate::error::{Error, Result};

/// Reference direction of a tensor-product element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Square `[-side/2, side/2]^2`.
    pub fn centered_square(side: f64) -> Self {
        Self::new(-side / 2.0, side / 2.0, -side / 2.0, side / 2.0)
    }

    pub fn extent(&self) -> [f64; 2] {
        [self.x_max - self.x_min, self.y_max - self.y_min]
    }

    pub fn area(&self) -> f64 {
        let [lx, ly] = self.extent();
        lx * ly
    }
}

#[derive(Clone, Debug)]
pub struct Element {
    pub index: usize,
    pub ix: usize,
    pub iy: usize,
    /// Lower-left corner.
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    /// `dx * dy / 4`
    pub jacobian: f64,
    /// Face indices: west, east, south, north.
    pub faces: [usize; 4],
}

impl Element {
    pub fn center(&self) -> [f64; 2] {
        [
            self.origin[0] + 0.5 * self.extent[0],
            self.origin[1] + 0.5 * self.extent[1],
        ]
    }

    pub fn area(&self) -> f64 {
        self.extent[0] * self.extent[1]
    }

    /// Physical coordinates of a reference point.
    pub fn map(&self, xi: f64, eta: f64) -> [f64; 2] {
        [
            self.origin[0] + 0.5 * (xi + 1.0) * self.extent[0],
            self.origin[1] + 0.5 * (eta + 1.0) * self.extent[1],
        ]
    }

    /// Reference coordinates of a physical point (not clipped).
    pub fn inverse_map(&self, p: [f64; 2]) -> [f64; 2] {
        [
            2.0 * (p[0] - self.origin[0]) / self.extent[0] - 1.0,
            2.0 * (p[1] - self.origin[1]) / self.extent[1] - 1.0,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Face {
    /// Direction of the face normal.
    pub axis: Axis,
    /// Element on the low-coordinate side.
    pub minus: Option<usize>,
    /// Element on the high-coordinate side.
    pub plus: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none() || self.plus.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
    pub periodic: [bool; 2],
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
}

impl Mesh {
    pub fn cartesian(nx: usize, ny: usize, bounds: Bounds, periodic: [bool; 2]) -> Result<Self> {
        build_cartesian_mesh(nx, ny, bounds, periodic)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn neighbors(&self, e: usize) -> Result<Vec<usize>> {
        neighbors(self, e)
    }

    /// Neighbors across the two faces normal to `axis`.
    pub fn axis_neighbors(&self, e: usize, axis: Axis) -> [Option<usize>; 2] {
        let el = &self.elements[e];
        let (lo, hi) = match axis {
            Axis::X => (el.faces[0], el.faces[1]),
            Axis::Y => (el.faces[2], el.faces[3]),
        };
        [self.faces[lo].minus, self.faces[hi].plus]
    }

    /// Element containing a physical point, wrapping periodic axes.
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        let p = self.wrap(p);
        let [lx, ly] = self.bounds.extent();
        let fx = (p[0] - self.bounds.x_min) / lx * self.nx as f64;
        let fy = (p[1] - self.bounds.y_min) / ly * self.ny as f64;
        if !(0.0..=self.nx as f64).contains(&fx) || !(0.0..=self.ny as f64).contains(&fy) {
            return None;
        }
        let ix = (fx.floor() as usize).min(self.nx - 1);
        let iy = (fy.floor() as usize).min(self.ny - 1);
        Some(self.element_index(ix, iy))
    }

    /// Maps a point into the domain along periodic axes.
    pub fn wrap(&self, p: [f64; 2]) -> [f64; 2] {
        let mins = [self.bounds.x_min, self.bounds.y_min];
        let ext = self.bounds.extent();
        let mut out = p;
        for a in 0..2 {
            if self.periodic[a] {
                out[a] = mins[a] + (p[a] - mins[a]).rem_euclid(ext[a]);
            }
        }
        out
    }

    /// Shortest displacement `b - a`, using periodic images where they apply.
    pub fn displacement(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let ext = self.bounds.extent();
        let mut d = [b[0] - a[0], b[1] - a[1]];
        for k in 0..2 {
            if self.periodic[k] {
                d[k] -= ext[k] * (d[k] / ext[k]).round();
            }
        }
        d
    }
}

pub fn build_cartesian_mesh(
    nx: usize,
    ny: usize,
    bounds: Bounds,
    periodic: [bool; 2],
) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Mesh(format!("element counts must be positive, got {nx}x{ny}")));
    }
    let [lx, ly] = bounds.extent();
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
        return Err(Error::Mesh(format!("degenerate bounds {bounds:?}")));
    }
    let dx = lx / nx as f64;
    let dy = ly / ny as f64;
    let idx = |ix: usize, iy: usize| iy * nx + ix;

    let mut faces = Vec::new();
    let mut west = vec![usize::MAX; nx * ny];
    let mut east = vec![usize::MAX; nx * ny];
    let mut south = vec![usize::MAX; nx * ny];
    let mut north = vec![usize::MAX; nx * ny];

    for iy in 0..ny {
        if !periodic[0] {
            west[idx(0, iy)] = faces.len();
            faces.push(Face {
                axis: Axis::X,
                minus: None,
                plus: Some(idx(0, iy)),
            });
        }
        for ix in 0..nx {
            let plus = if ix + 1 < nx {
                Some(idx(ix + 1, iy))
            } else if periodic[0] {
                Some(idx(0, iy))
            } else {
                None
            };
            let f = faces.len();
            faces.push(Face {
                axis: Axis::X,
                minus: Some(idx(ix, iy)),
                plus,
            });
            east[idx(ix, iy)] = f;
            if let Some(p) = plus {
                west[p] = f;
            }
        }
    }
    for ix in 0..nx {
        if !periodic[1] {
            south[idx(ix, 0)] = faces.len();
            faces.push(Face {
                axis: Axis::Y,
                minus: None,
                plus: Some(idx(ix, 0)),
            });
        }
        for iy in 0..ny {
            let plus = if iy + 1 < ny {
                Some(idx(ix, iy + 1))
            } else if periodic[1] {
                Some(idx(ix, 0))
            } else {
                None
            };
            let f = faces.len();
            faces.push(Face {
                axis: Axis::Y,
                minus: Some(idx(ix, iy)),
                plus,
            });
            north[idx(ix, iy)] = f;
            if let Some(p) = plus {
                south[p] = f;
            }
        }
    }

    let elements = (0..ny)
        .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| {
            let e = idx(ix, iy);
            Element {
                index: e,
                ix,
                iy,
                origin: [bounds.x_min + ix as f64 * dx, bounds.y_min + iy as f64 * dy],
                extent: [dx, dy],
                jacobian: dx * dy / 4.0,
                faces: [west[e], east[e], south[e], north[e]],
            }
        })
        .collect();

    Ok(Mesh {
        nx,
        ny,
        bounds,
        periodic,
        elements,
        faces,
    })
}

/// Face-adjacent neighbors of `e` in the order west, east, south, north.
/// Repeated neighbors are reported once, except an element that is its own
/// neighbor across a single-element periodic axis.
pub fn neighbors(mesh: &Mesh, e: usize) -> Result<Vec<usize>> {
    if e >= mesh.len() {
        return Err(Error::OutOfRange {
            index: e,
            len: mesh.len(),
        });
    }
    let mut out = Vec::with_capacity(4);
    for axis in [Axis::X, Axis::Y] {
        for n in mesh.axis_neighbors(e, axis).into_iter().flatten() {
            if n == e || !out.contains(&n) {
                out.push(n);
            }
        }
    }
    Ok(out)
}

/// Per-element polynomial degrees `(N1, N2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeLayout {
    degrees: Vec<[usize; 2]>,
}

impl DegreeLayout {
    pub fn new(degrees: Vec<[usize; 2]>) -> Self {
        Self { degrees }
    }

    pub fn uniform(n_elements: usize, degree: usize) -> Self {
        Self::new(vec![[degree, degree]; n_elements])
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn get(&self, e: usize) -> [usize; 2] {
        self.degrees[e]
    }

    pub fn set(&mut self, e: usize, degree: [usize; 2]) {
        self.degrees[e] = degree;
    }

    pub fn degrees(&self) -> &[[usize; 2]] {
        &self.degrees
    }

    pub fn ndof(&self) -> usize {
        self.degrees.iter().map(|&d| element_ndof(d)).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().flat_map(|d| d.iter().copied()).max().unwrap_or(0)
    }
}

/// `(N1 + 1)(N2 + 1)`
pub fn element_ndof(d: [usize; 2]) -> usize {
    (d[0] + 1) * (d[1] + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic(n: usize) -> Mesh {
        Mesh::cartesian(n, n, Bounds::centered_square(n as f64), [true, true]).unwrap()
    }

    #[test]
    fn pulse_mesh() {
        let m = periodic(29);
        assert_eq!(m.len(), 841);
        let total: f64 = m.elements.iter().map(|e| e.area()).sum();
        assert!((total - m.bounds.area()).abs() / m.bounds.area() < 1e-12);
        for e in &m.elements {
            assert!((e.extent[0] - 1.0).abs() < 1e-14);
            assert!((e.extent[1] - 1.0).abs() < 1e-14);
            assert!((e.jacobian - 0.25).abs() < 1e-14);
            assert_eq!(m.neighbors(e.index).unwrap().len(), 4);
        }
        // center element is centered on the origin
        let c = m.elements[m.element_index(14, 14)].center();
        assert!(c[0].abs() < 1e-14 && c[1].abs() < 1e-14);
    }

    #[test]
    fn single_periodic_element_neighbors_itself() {
        let m = periodic(1);
        assert_eq!(m.neighbors(0).unwrap(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn two_elements_periodic_in_x() {
        let m = Mesh::cartesian(2, 1, Bounds::new(0.0, 2.0, 0.0, 1.0), [true, false]).unwrap();
        assert_eq!(m.axis_neighbors(0, Axis::X), [Some(1), Some(1)]);
        assert_eq!(m.axis_neighbors(1, Axis::X), [Some(0), Some(0)]);
        assert_eq!(m.neighbors(0).unwrap(), vec![1]);
        assert_eq!(m.neighbors(1).unwrap(), vec![0]);
    }

    #[test]
    fn center_of_three_by_three() {
        let m = periodic(3);
        let mut n = m.neighbors(4).unwrap();
        n.sort();
        assert_eq!(n, vec![1, 3, 5, 7]);
    }

    #[test]
    fn corner_wraps() {
        let m = periodic(29);
        let mut n = m.neighbors(0).unwrap();
        n.sort();
        // brute force: neighbors by modular index arithmetic
        let mut expected = vec![
            m.element_index(28, 0),
            m.element_index(1, 0),
            m.element_index(0, 28),
            m.element_index(0, 1),
        ];
        expected.sort();
        assert_eq!(n, expected);
    }

    #[test]
    fn non_periodic_two_by_two() {
        let m = Mesh::cartesian(2, 2, Bounds::new(0.0, 1.0, 0.0, 1.0), [false, false]).unwrap();
        for e in 0..4 {
            assert_eq!(m.neighbors(e).unwrap().len(), 2);
        }
        assert!(m.neighbors(4).is_err());
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Mesh::cartesian(0, 3, Bounds::new(0.0, 1.0, 0.0, 1.0), [true; 2]).is_err());
        assert!(Mesh::cartesian(2, 3, Bounds::new(1.0, 1.0, 0.0, 1.0), [true; 2]).is_err());
        assert!(Mesh::cartesian(2, 3, Bounds::new(0.0, 1.0, 2.0, 1.0), [true; 2]).is_err());
    }

    #[test]
    fn face_pairing_is_consistent() {
        for (nx, ny) in [(1, 1), (2, 1), (3, 4), (5, 5)] {
            let m = Mesh::cartesian(nx, ny, Bounds::new(0.0, 1.0, 0.0, 2.0), [true; 2]).unwrap();
            for el in &m.elements {
                let f = &m.faces;
                assert_eq!(f[el.faces[1]].minus, Some(el.index));
                assert_eq!(f[el.faces[0]].plus, Some(el.index));
                assert_eq!(f[el.faces[3]].minus, Some(el.index));
                assert_eq!(f[el.faces[2]].plus, Some(el.index));
                // east neighbor's west face is this element's east face
                let east = f[el.faces[1]].plus.unwrap();
                assert_eq!(m.elements[east].faces[0], el.faces[1]);
                let north = f[el.faces[3]].plus.unwrap();
                assert_eq!(m.elements[north].faces[2], el.faces[3]);
            }
            assert!(m.faces.iter().all(|f| !f.is_boundary()));
            assert_eq!(m.faces.len(), 2 * nx * ny);
        }
    }

    #[test]
    fn ndof_matches_brute_force() {
        let degrees: Vec<[usize; 2]> = (0..25).map(|e| [1 + e % 8, 1 + (e * 7) % 8]).collect();
        let layout = DegreeLayout::new(degrees.clone());
        let mut brute = 0;
        for d in &degrees {
            for _ in 0..=d[0] {
                for _ in 0..=d[1] {
                    brute += 1;
                }
            }
        }
        assert_eq!(layout.ndof(), brute);
        assert_eq!(DegreeLayout::uniform(841, 3).ndof(), 13456);
    }

    #[test]
    fn locate_and_wrap() {
        let m = periodic(29);
        assert_eq!(m.locate([0.0, 0.0]), Some(m.element_index(14, 14)));
        assert_eq!(m.locate([29.0, 0.0]), Some(m.element_index(14, 14)));
        let d = m.displacement([14.0, 0.0], [-14.0, 0.0]);
        assert!((d[0] - 1.0).abs() < 1e-12);
    }
}
