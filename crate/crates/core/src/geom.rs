//! Small fixed-size linear algebra, the rotation exponential and trapezoid quadrature.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A vector in R^3.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const E1: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const E2: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const E3: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction. Returns `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Some unit vector orthogonal to `self` (which must be nonzero).
    pub fn any_orthogonal(self) -> Vec3 {
        let a = self.x.abs();
        let b = self.y.abs();
        let c = self.z.abs();
        let helper = if a <= b && a <= c {
            Vec3::E1
        } else if b <= c {
            Vec3::E2
        } else {
            Vec3::E3
        };
        self.cross(helper).normalized().unwrap_or(Vec3::E1)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a.dot(b)
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    a.cross(b)
}

/// A 3x3 matrix stored row-major; produced by [`rodrigues`] it is a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3 {
    pub m: [[f64; 3]; 3],
}

impl Rot3 {
    pub const IDENTITY: Rot3 = Rot3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    #[inline]
    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Rot3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[j][i];
            }
        }
        Rot3 { m: out }
    }

    pub fn matmul(&self, other: &Rot3) -> Rot3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Rot3 { m: out }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry of |R^T R - I|.
    pub fn orthogonality_defect(&self) -> f64 {
        let p = self.transpose().matmul(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.m[i][j] - target).abs());
            }
        }
        worst
    }
}

/// Skew-symmetric matrix `A` with `A v = omega x v`.
pub fn skew(omega: Vec3) -> [[f64; 3]; 3] {
    [
        [0.0, -omega.z, omega.y],
        [omega.z, 0.0, -omega.x],
        [-omega.y, omega.x, 0.0],
    ]
}

/// `sin(theta)/theta` and `(1 - cos(theta))/theta^2`, written in terms of
/// `sin(theta/2)` so the second stays accurate for small angles.
fn rotation_coefficients(theta2: f64) -> (f64, f64) {
    if theta2 < 1e-16 {
        return (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0);
    }
    let theta = theta2.sqrt();
    let half = (0.5 * theta).sin() / theta;
    (theta.sin() / theta, 2.0 * half * half)
}

/// Rotation exp(skew(omega)): rotation by angle |omega| about omega/|omega|.
pub fn rodrigues(omega: Vec3) -> Rot3 {
    let theta2 = omega.norm_squared();
    let (a, b) = rotation_coefficients(theta2);
    let k = skew(omega);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // A^2 = omega omega^T - |omega|^2 I
            let outer = omega.to_array()[i] * omega.to_array()[j];
            let a2 = if i == j { outer - theta2 } else { outer };
            let id = if i == j { 1.0 } else { 0.0 };
            m[i][j] = id + a * k[i][j] + b * a2;
        }
    }
    Rot3 { m }
}

/// Rotate `v` by exp(skew(omega)) without forming the matrix.
#[inline]
pub fn rotate(omega: Vec3, v: Vec3) -> Vec3 {
    let (a, b) = rotation_coefficients(omega.norm_squared());
    let wxv = omega.cross(v);
    v + wxv * a + omega.cross(wxv) * b
}

/// Applies the transpose of the left Jacobian of the rotation exponential at
/// `omega` to `x`.
///
/// The left Jacobian `J` satisfies `exp(omega + d) = exp(J d) exp(omega)` to
/// first order in `d`, so `d/d omega [x . exp(omega) v] = J^T ((exp(omega) v) x x)`.
pub fn left_jacobian_transpose(omega: Vec3, x: Vec3) -> Vec3 {
    let theta2 = omega.norm_squared();
    let (a, b) = rotation_coefficients(theta2);
    let c = if theta2 < 1e-4 {
        1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0
    } else {
        (1.0 - a) / theta2
    };
    let wx = omega.cross(x);
    x - wx * b + omega.cross(wx) * c
}

/// Nodes `s_0 < ... < s_N` with composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Usage("quadrature grid needs at least one node".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage("quadrature nodes must be strictly increasing".into()));
        }
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            let h = nodes[i + 1] - nodes[i];
            weights[i] += 0.5 * h;
            weights[i + 1] += 0.5 * h;
        }
        Ok(Self { nodes, weights })
    }

    /// `count` nodes `start, start + h, ...`.
    pub fn uniform(start: f64, h: f64, count: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Usage("grid spacing must be positive".into()));
        }
        Self::new((0..count).map(|i| start + h * i as f64).collect())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Values that can be integrated by quadrature.
pub trait Integrand: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Integrand for Vec3 {
    fn zero() -> Self {
        Vec3::ZERO
    }
}

/// Composite trapezoid rule over the whole grid.
pub fn trapezoid<T: Integrand>(values: &[T], grid: &QuadratureGrid) -> Result<T> {
    if values.len() != grid.len() {
        return Err(Error::Usage(format!(
            "trapezoid: {} values for {} nodes",
            values.len(),
            grid.len()
        )));
    }
    Ok(values
        .iter()
        .zip(grid.weights())
        .fold(T::zero(), |acc, (&v, &w)| acc + v * w))
}

/// Running trapezoid integrals on a uniform grid of spacing `h`:
/// `out[i]` approximates the integral over `[s_0, s_i]`.
pub fn cumulative_trapezoid<T: Integrand>(values: &[T], h: f64) -> Vec<T> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::zero();
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            acc = acc + (values[i - 1] + v) * (0.5 * h);
        }
        out.push(acc);
    }
    out
}
