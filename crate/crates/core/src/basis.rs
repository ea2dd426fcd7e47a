//! One-dimensional Legendre–Gauss nodal bases.
//!
//! Every tensor-product operator in the solver is assembled from the
//! objects in this module: quadrature nodes and weights, the collocation
//! differentiation matrix, boundary interpolation rows `l(-1)`, `l(+1)`,
//! and Lagrange transfer matrices between two degrees.
//!
//! All bases up to [`MAX_DEGREE`] are built once and shared through
//! [`library`].

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Highest polynomial degree supported by the precomputed library.
pub const MAX_DEGREE: usize = 10;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Legendre–Gauss rule with `degree + 1` points on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Quadrature1D {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates nodal samples.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Legendre polynomial `L_n(x)` and its derivative.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    match n {
        0 => (1.0, 0.0),
        1 => (x, 1.0),
        _ => {
            let (mut p_prev, mut p) = (1.0, x);
            let (mut d_prev, mut d) = (0.0, 1.0);
            for k in 2..=n {
                let kf = k as f64;
                let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
                let d_next = d_prev + (2.0 * kf - 1.0) * p;
                p_prev = p;
                p = p_next;
                d_prev = d;
                d = d_next;
            }
            (p, d)
        }
    }
}

/// Legendre–Gauss nodes and weights for a polynomial degree `n`
/// (`n + 1` points, exact up to degree `2n + 1`).
pub fn gauss_quadrature(n: usize) -> Quadrature1D {
    let npts = n + 1;
    let mut nodes = vec![0.0; npts];
    let mut weights = vec![0.0; npts];
    if n == 0 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
        return Quadrature1D {
            degree: 0,
            nodes,
            weights,
        };
    }
    // Roots come in symmetric pairs; solve for the negative half and mirror.
    for j in 0..npts.div_ceil(2) {
        let mut x = -(PI * (2 * j + 1) as f64 / (2 * n + 2) as f64).cos();
        let mut dp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_and_derivative(npts, x);
            let delta = p / d;
            x -= delta;
            dp = d;
            if delta.abs() <= NEWTON_TOL * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(npts, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[j] = x;
        nodes[n - j] = -x;
        weights[j] = w;
        weights[n - j] = w;
    }
    if npts % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Quadrature1D {
        degree: n,
        nodes,
        weights,
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = (0..nodes.len())
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product();
            1.0 / prod
        })
        .collect()
}

/// Values of every Lagrange basis polynomial on `nodes` at the point `x`.
pub fn lagrange_basis_at(nodes: &[f64], x: f64) -> Vec<f64> {
    if let Some(k) = nodes.iter().position(|&n| n == x) {
        let mut out = vec![0.0; nodes.len()];
        out[k] = 1.0;
        return out;
    }
    let bw = barycentric_weights(nodes);
    let terms: Vec<f64> = bw
        .iter()
        .zip(nodes)
        .map(|(w, n)| w / (x - n))
        .collect();
    let denom: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / denom).collect()
}

/// Matrix that evaluates the interpolant on `from` nodes at the `to` nodes.
pub fn lagrange_transfer(from: &Quadrature1D, to: &Quadrature1D) -> Matrix {
    if from.degree == to.degree {
        return Matrix::identity(from.len());
    }
    let mut m = Matrix::zeros(to.len(), from.len());
    for (i, &x) in to.nodes.iter().enumerate() {
        for (j, v) in lagrange_basis_at(&from.nodes, x).into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

/// Collocation derivative: `D[(i, j)] = l_j'(x_i)`.
pub fn differentiation_matrix(q: &Quadrature1D) -> Matrix {
    let n = q.len();
    let bw = barycentric_weights(&q.nodes);
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = bw[j] / bw[i] / (q.nodes[i] - q.nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        // negative-sum trick keeps D * 1 = 0 to round-off
        d[(i, i)] = diag;
    }
    d
}

/// Operators for one degree.
#[derive(Clone, Debug)]
pub struct Operators1D {
    pub quadrature: Quadrature1D,
    /// `D[(i, j)] = l_j'(x_i)`
    pub derivative: Matrix,
    /// `weak[(i, k)] = w_k l_i'(x_k)`, used by the weak-form volume term.
    pub weak_derivative: Matrix,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl Operators1D {
    pub fn new(degree: usize) -> Self {
        let quadrature = gauss_quadrature(degree);
        let derivative = differentiation_matrix(&quadrature);
        let n = quadrature.len();
        let mut weak_derivative = Matrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                weak_derivative[(i, k)] = quadrature.weights[k] * derivative[(k, i)];
            }
        }
        let left = lagrange_basis_at(&quadrature.nodes, -1.0);
        let right = lagrange_basis_at(&quadrature.nodes, 1.0);
        Self {
            quadrature,
            derivative,
            weak_derivative,
            left,
            right,
        }
    }

    pub fn degree(&self) -> usize {
        self.quadrature.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.quadrature.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.quadrature.weights
    }
}

/// Precomputed operators for every degree `0..=MAX_DEGREE` and every
/// transfer pair between them.
pub struct BasisLibrary {
    ops: Vec<Operators1D>,
    transfers: Vec<Matrix>,
}

impl BasisLibrary {
    fn build() -> Self {
        let ops: Vec<Operators1D> = (0..=MAX_DEGREE).map(Operators1D::new).collect();
        let mut transfers = Vec::with_capacity(ops.len() * ops.len());
        for from in &ops {
            for to in &ops {
                transfers.push(lagrange_transfer(&from.quadrature, &to.quadrature));
            }
        }
        Self { ops, transfers }
    }

    pub fn ops(&self, degree: usize) -> &Operators1D {
        &self.ops[degree]
    }

    /// Transfer matrix from degree `from` nodes to degree `to` nodes.
    pub fn transfer(&self, from: usize, to: usize) -> &Matrix {
        &self.transfers[from * (MAX_DEGREE + 1) + to]
    }
}

/// Shared basis library.
pub fn library() -> &'static BasisLibrary {
    static LIB: OnceLock<BasisLibrary> = OnceLock::new();
    LIB.get_or_init(BasisLibrary::build)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_monomial_integral(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            2.0 / (k as f64 + 1.0)
        }
    }

    #[test]
    fn low_degree_rules() {
        let q0 = gauss_quadrature(0);
        assert_eq!(q0.nodes, vec![0.0]);
        assert_eq!(q0.weights, vec![2.0]);

        let q1 = gauss_quadrature(1);
        let s = 1.0 / 3f64.sqrt();
        assert!((q1.nodes[0] + s).abs() < 1e-15);
        assert!((q1.nodes[1] - s).abs() < 1e-15);
        assert!((q1.weights[0] - 1.0).abs() < 1e-15);
        assert!((q1.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degree_five_integrates_x10() {
        let q = gauss_quadrature(5);
        let v: Vec<f64> = q.nodes.iter().map(|x| x.powi(10)).collect();
        assert!((q.integrate(&v) - 2.0 / 11.0).abs() < 1e-13);
    }

    #[test]
    fn exactness_and_symmetry_up_to_degree_ten() {
        for n in 0..=MAX_DEGREE {
            let q = gauss_quadrature(n);
            assert!((q.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14, "N={n}");
            for w in q.nodes.windows(2) {
                assert!(w[0] < w[1]);
            }
            for j in 0..=n {
                assert!((q.nodes[j] + q.nodes[n - j]).abs() < 1e-14);
                assert!(q.weights[j] > 0.0);
            }
            for k in 0..=(2 * n as u32 + 1) {
                let v: Vec<f64> = q.nodes.iter().map(|x| x.powi(k as i32)).collect();
                let err = (q.integrate(&v) - exact_monomial_integral(k)).abs();
                assert!(err < 1e-12, "N={n} k={k} err={err}");
            }
        }
    }

    #[test]
    fn transfer_identity_and_partition_of_unity() {
        let lib = library();
        for a in 0..=MAX_DEGREE {
            assert_eq!(lib.transfer(a, a), &Matrix::identity(a + 1));
            for b in 0..=MAX_DEGREE {
                let t = lib.transfer(a, b);
                for i in 0..t.rows() {
                    let s: f64 = t.row(i).iter().sum();
                    assert!((s - 1.0).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn transfer_reproduces_quadratic() {
        let q4 = gauss_quadrature(4);
        let q2 = gauss_quadrature(2);
        let t = lagrange_transfer(&q4, &q2);
        let src: Vec<f64> = q4.nodes.iter().map(|x| x * x).collect();
        let out = t.apply(&src);
        for (o, x) in out.iter().zip(&q2.nodes) {
            assert!((o - x * x).abs() < 1e-13);
        }
    }

    #[test]
    fn restrict_after_prolong_is_identity() {
        let lib = library();
        for n in 0..=MAX_DEGREE {
            for p in n..=MAX_DEGREE {
                let round = lib.transfer(p, n).matmul(lib.transfer(n, p));
                assert!(round.max_abs_diff(&Matrix::identity(n + 1)) < 1e-13, "{n}->{p}");
            }
        }
    }

    #[test]
    fn differentiation() {
        let q3 = gauss_quadrature(3);
        let d3 = differentiation_matrix(&q3);
        let ones = d3.apply(&q3.nodes);
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let zero = d3.apply(&[1.0; 4]);
        assert!(zero.iter().all(|v| v.abs() < 1e-13));

        let q4 = gauss_quadrature(4);
        let d4 = differentiation_matrix(&q4);
        let cubic: Vec<f64> = q4.nodes.iter().map(|x| x.powi(3)).collect();
        for (v, x) in d4.apply(&cubic).iter().zip(&q4.nodes) {
            assert!((v - 3.0 * x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn differentiation_exact_for_monomials() {
        for n in 1..=MAX_DEGREE {
            let ops = library().ops(n);
            for k in 0..=n as i32 {
                let v: Vec<f64> = ops.nodes().iter().map(|x| x.powi(k)).collect();
                let dv = ops.derivative.apply(&v);
                for (d, x) in dv.iter().zip(ops.nodes()) {
                    let exact = if k == 0 { 0.0 } else { k as f64 * x.powi(k - 1) };
                    assert!((d - exact).abs() < 1e-12, "N={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn boundary_rows_interpolate_endpoints() {
        for n in 1..=MAX_DEGREE {
            let ops = library().ops(n);
            let v: Vec<f64> = ops.nodes().iter().map(|x| x.powi(n as i32)).collect();
            let r: f64 = ops.right.iter().zip(&v).map(|(a, b)| a * b).sum();
            let l: f64 = ops.left.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((r - 1.0).abs() < 1e-12);
            assert!((l - (-1f64).powi(n as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn library_is_deterministic() {
        let a = BasisLibrary::build();
        let b = library();
        for n in 0..=MAX_DEGREE {
            assert_eq!(a.ops(n).nodes(), b.ops(n).nodes());
            assert_eq!(a.ops(n).derivative, b.ops(n).derivative);
        }
    }
}
