//! Conservation-law models: 2D compressible Euler with a Roe interface
//! flux, and scalar linear advection with pure upwinding.

use crate::mesh::Axis;

pub const DEFAULT_GAMMA: f64 = 1.4;
pub const DEFAULT_ENTROPY_FIX: f64 = 0.05;

/// Conserved Euler variables `(rho, rho*u, rho*v, E)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerState {
    pub rho: f64,
    pub rho_u: f64,
    pub rho_v: f64,
    pub energy: f64,
}

impl EulerState {
    pub fn from_primitive(rho: f64, u: f64, v: f64, p: f64, gamma: f64) -> Self {
        Self {
            rho,
            rho_u: rho * u,
            rho_v: rho * v,
            energy: p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v),
        }
    }

    pub fn from_slice(q: &[f64]) -> Self {
        Self {
            rho: q[0],
            rho_u: q[1],
            rho_v: q[2],
            energy: q[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.rho, self.rho_u, self.rho_v, self.energy]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.rho_u / self.rho, self.rho_v / self.rho]
    }

    pub fn pressure(&self, gamma: f64) -> f64 {
        (gamma - 1.0) * (self.energy - 0.5 * (self.rho_u * self.rho_u + self.rho_v * self.rho_v) / self.rho)
    }

    /// `(rho, u, v, p)`
    pub fn to_primitive(&self, gamma: f64) -> [f64; 4] {
        let [u, v] = self.velocity();
        [self.rho, u, v, self.pressure(gamma)]
    }

    pub fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.pressure(gamma) / self.rho).sqrt()
    }
}

/// Physical flux in each coordinate direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxPair<T> {
    pub fx: T,
    pub fy: T,
}

/// Why a state or Roe average was rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inadmissible {
    NonPositiveDensity,
    NonPositivePressure,
    NonFinite,
    RoeSoundSpeed,
}

impl Inadmissible {
    pub fn reason(self) -> &'static str {
        match self {
            Inadmissible::NonPositiveDensity => "non-positive density",
            Inadmissible::NonPositivePressure => "non-positive pressure",
            Inadmissible::NonFinite => "non-finite value",
            Inadmissible::RoeSoundSpeed => "vanishing Roe-average sound speed",
        }
    }
}

fn flux_normal(q: &EulerState, n: [f64; 2], gamma: f64) -> [f64; 4] {
    let [u, v] = q.velocity();
    let p = q.pressure(gamma);
    let un = u * n[0] + v * n[1];
    [
        q.rho * un,
        q.rho_u * un + p * n[0],
        q.rho_v * un + p * n[1],
        (q.energy + p) * un,
    ]
}

pub fn euler_flux(q: &EulerState, gamma: f64) -> FluxPair<[f64; 4]> {
    FluxPair {
        fx: flux_normal(q, [1.0, 0.0], gamma),
        fy: flux_normal(q, [0.0, 1.0], gamma),
    }
}

pub fn check_euler(q: &EulerState, gamma: f64) -> Result<(), Inadmissible> {
    let arr = q.to_array();
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(Inadmissible::NonFinite);
    }
    if q.rho <= 0.0 {
        return Err(Inadmissible::NonPositiveDensity);
    }
    if q.pressure(gamma) <= 0.0 {
        return Err(Inadmissible::NonPositivePressure);
    }
    Ok(())
}

/// Harten's smoothing of `|lambda|` below `delta`.
fn harten(lambda: f64, delta: f64) -> f64 {
    let a = lambda.abs();
    if a < delta && delta > 0.0 {
        (lambda * lambda + delta * delta) / (2.0 * delta)
    } else {
        a
    }
}

/// Roe flux through a face with unit normal `normal`, `left` on the side the
/// normal points away from.
///
/// The acoustic eigenvalues get a Harten entropy fix with threshold
/// `entropy_fix * (|u_n| + c)` evaluated at the Roe average.
pub fn roe_flux(
    left: &EulerState,
    right: &EulerState,
    normal: [f64; 2],
    gamma: f64,
    entropy_fix: f64,
) -> Result<[f64; 4], Inadmissible> {
    let [nx, ny] = normal;
    let fl = flux_normal(left, normal, gamma);
    let fr = flux_normal(right, normal, gamma);

    let [ul, vl] = left.velocity();
    let [ur, vr] = right.velocity();
    let pl = left.pressure(gamma);
    let pr = right.pressure(gamma);
    let hl = (left.energy + pl) / left.rho;
    let hr = (right.energy + pr) / right.rho;

    let sl = left.rho.sqrt();
    let sr = right.rho.sqrt();
    let inv = 1.0 / (sl + sr);
    let rho = sl * sr;
    let u = (sl * ul + sr * ur) * inv;
    let v = (sl * vl + sr * vr) * inv;
    let h = (sl * hl + sr * hr) * inv;
    let ke = 0.5 * (u * u + v * v);
    let c2 = (gamma - 1.0) * (h - ke);
    if !(c2 > 0.0) {
        return Err(Inadmissible::RoeSoundSpeed);
    }
    let c = c2.sqrt();
    let un = u * nx + v * ny;
    let ut = -u * ny + v * nx;

    let d_rho = right.rho - left.rho;
    let d_p = pr - pl;
    let d_un = (ur - ul) * nx + (vr - vl) * ny;
    let d_ut = -(ur - ul) * ny + (vr - vl) * nx;

    let delta = entropy_fix * (un.abs() + c);
    let l1 = harten(un - c, delta);
    let l2 = un.abs();
    let l4 = harten(un + c, delta);

    let a1 = (d_p - rho * c * d_un) / (2.0 * c2);
    let a2 = d_rho - d_p / c2;
    let a3 = rho * d_ut;
    let a4 = (d_p + rho * c * d_un) / (2.0 * c2);

    let r1 = [1.0, u - c * nx, v - c * ny, h - un * c];
    let r2 = [1.0, u, v, ke];
    let r3 = [0.0, -ny, nx, ut];
    let r4 = [1.0, u + c * nx, v + c * ny, h + un * c];

    let mut out = [0.0; 4];
    for k in 0..4 {
        let diss = l1 * a1 * r1[k] + l2 * a2 * r2[k] + l2 * a3 * r3[k] + l4 * a4 * r4[k];
        out[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * diss;
    }
    Ok(out)
}

/// Linear advection flux `(a_x q, a_y q)`.
pub fn advection_flux(q: f64, velocity: [f64; 2]) -> FluxPair<f64> {
    FluxPair {
        fx: velocity[0] * q,
        fy: velocity[1] * q,
    }
}

/// Upwind flux through a face whose normal has advection speed `a_n`.
pub fn upwind_flux(left: f64, right: f64, a_n: f64) -> f64 {
    if a_n >= 0.0 {
        a_n * left
    } else {
        a_n * right
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Euler {
    pub gamma: f64,
    pub entropy_fix: f64,
}

impl Default for Euler {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            entropy_fix: DEFAULT_ENTROPY_FIX,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Advection {
    pub velocity: [f64; 2],
}

/// The conservation law being solved. States are passed as slices of
/// length [`Model::nvar`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    Euler(Euler),
    Advection(Advection),
}

impl Model {
    pub fn euler() -> Self {
        Model::Euler(Euler::default())
    }

    pub fn advection(velocity: [f64; 2]) -> Self {
        Model::Advection(Advection { velocity })
    }

    pub fn nvar(&self) -> usize {
        match self {
            Model::Euler(_) => 4,
            Model::Advection(_) => 1,
        }
    }

    /// Physical flux along `axis`.
    pub fn flux(&self, q: &[f64], axis: Axis, out: &mut [f64]) {
        match self {
            Model::Euler(m) => {
                let n = axis_normal(axis);
                out[..4].copy_from_slice(&flux_normal(&EulerState::from_slice(q), n, m.gamma));
            }
            Model::Advection(m) => out[0] = m.velocity[axis.index()] * q[0],
        }
    }

    /// Numerical flux along `+axis` between a minus-side and a plus-side state.
    pub fn numerical_flux(
        &self,
        minus: &[f64],
        plus: &[f64],
        axis: Axis,
        out: &mut [f64],
    ) -> Result<(), Inadmissible> {
        match self {
            Model::Euler(m) => {
                let f = roe_flux(
                    &EulerState::from_slice(minus),
                    &EulerState::from_slice(plus),
                    axis_normal(axis),
                    m.gamma,
                    m.entropy_fix,
                )?;
                out[..4].copy_from_slice(&f);
            }
            Model::Advection(m) => out[0] = upwind_flux(minus[0], plus[0], m.velocity[axis.index()]),
        }
        Ok(())
    }

    /// Largest characteristic speed magnitude along `axis`.
    pub fn max_wave_speed(&self, q: &[f64], axis: Axis) -> f64 {
        match self {
            Model::Euler(m) => {
                let s = EulerState::from_slice(q);
                s.velocity()[axis.index()].abs() + s.sound_speed(m.gamma)
            }
            Model::Advection(m) => m.velocity[axis.index()].abs(),
        }
    }

    pub fn check(&self, q: &[f64]) -> Result<(), Inadmissible> {
        match self {
            Model::Euler(m) => check_euler(&EulerState::from_slice(q), m.gamma),
            Model::Advection(_) => {
                if q[0].is_finite() {
                    Ok(())
                } else {
                    Err(Inadmissible::NonFinite)
                }
            }
        }
    }
}

fn axis_normal(axis: Axis) -> [f64; 2] {
    match axis {
        Axis::X => [1.0, 0.0],
        Axis::Y => [0.0, 1.0],
    }
}
