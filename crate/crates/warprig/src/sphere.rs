//! Discretization of the 2-sphere: Gauss-Legendre product grids, real
//! orthonormal spherical harmonics, rotations, and star-shaped surface
//! descriptions.
//!
//! Harmonics use the Condon-Shortley-free real convention normalized by
//! `int Y_lm^2 dsigma = 1`. They are evaluated in Cartesian form on the
//! unit sphere,
//!
//! ```text
//! Y_l0  = N_l0 P_l(z),
//! Y_lm  = sqrt(2) N_lm Q_lm(z) A_m(x, y)   (m > 0, cosine type)
//! Y_l-m = sqrt(2) N_lm Q_lm(z) B_m(x, y)   (m > 0, sine type)
//! ```
//!
//! with `Q_lm = d^m P_l / dz^m`, `A_m + i B_m = (x + i y)^m`. The Cartesian
//! form is smooth across the poles, so pulled-back evaluations (rotations)
//! never pass through an angle chart.

use crate::error::{Error, Result};
use crate::jet::{Jet, Real};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes
// ---------------------------------------------------------------------------

/// Nodes (ascending, strictly inside (-1,1)) and weights of the n-point
/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_value(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - k] = x;
        weights[n - 1 - k] = w;
        nodes[k] = -x;
        weights[k] = w;
    }
    if n % 2 == 1 {
        let mid = n / 2;
        nodes[mid] = 0.0;
        let (_, d) = legendre_value(n, 0.0);
        weights[mid] = 2.0 / (d * d);
    }
    (nodes, weights)
}

type GlTable = &'static (Vec<f64>, Vec<f64>);

/// Cached Gauss-Legendre tables for repeatedly used orders.
pub fn gauss_legendre_cached(n: usize) -> GlTable {
    use std::collections::BTreeMap;
    use std::sync::Mutex;
    static CACHE: OnceLock<Mutex<BTreeMap<usize, GlTable>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().expect("GL cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(gauss_legendre(n))))
}

fn legendre_value(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// ---------------------------------------------------------------------------
// Quadrature grid
// ---------------------------------------------------------------------------

/// Product quadrature grid: Gauss-Legendre in cos(theta), uniform in phi.
/// Node ordering is latitude-major with cos(theta) ascending; weights
/// integrate `d(cos theta) d phi` (they sum to 4 pi).
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub n_lat: usize,
    pub n_lon: usize,
    pub theta: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
    pub w_lat: Vec<f64>,
    pub phi: Vec<f64>,
    pub d_phi: f64,
}

impl QuadratureGrid {
    pub fn build(n_lat: usize, n_lon: usize) -> Result<Self> {
        if n_lat < 8 {
            return Err(Error::InvalidInput(format!("grid lat {n_lat} < 8")));
        }
        if n_lon < 16 || !n_lon.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "grid lon {n_lon} must be even and >= 16"
            )));
        }
        let (x, w) = gauss_legendre(n_lat);
        let theta: Vec<f64> = x.iter().map(|&c| c.acos()).collect();
        let sin_theta: Vec<f64> = x.iter().map(|&c| (1.0 - c * c).sqrt()).collect();
        let d_phi = 2.0 * std::f64::consts::PI / n_lon as f64;
        let phi: Vec<f64> = (0..n_lon).map(|j| j as f64 * d_phi).collect();
        Ok(QuadratureGrid {
            n_lat,
            n_lon,
            theta,
            cos_theta: x,
            sin_theta,
            w_lat: w,
            phi,
            d_phi,
        })
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_lat * self.n_lon
    }

    #[inline]
    pub fn node(&self, idx: usize) -> (f64, f64) {
        (self.theta[idx / self.n_lon], self.phi[idx % self.n_lon])
    }

    /// Product weight for `d(cos theta) d phi`.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.w_lat[idx / self.n_lon] * self.d_phi
    }

    #[inline]
    pub fn sin_theta_at(&self, idx: usize) -> f64 {
        self.sin_theta[idx / self.n_lon]
    }

    /// Largest |cos theta| over the nodes (pole-conditioning monitor).
    pub fn max_abs_cos_theta(&self) -> f64 {
        self.cos_theta.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Integral over the round unit sphere (measure `d sigma`), Kahan
    /// compensated in node order.
    pub fn integrate_round(&self, field: impl Fn(usize) -> f64) -> f64 {
        let mut sum = 0.0;
        let mut carry = 0.0;
        for idx in 0..self.n_nodes() {
            let term = self.weight(idx) * field(idx) - carry;
            let t = sum + term;
            carry = (t - sum) - term;
            sum = t;
        }
        sum
    }
}

// ---------------------------------------------------------------------------
// Real spherical harmonics
// ---------------------------------------------------------------------------

const L_MAX: usize = 16;

fn norms() -> &'static Vec<Vec<f64>> {
    static NORMS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    NORMS.get_or_init(|| {
        let mut norm = Vec::with_capacity(L_MAX + 1);
        for l in 0..=L_MAX {
            let mut nl = Vec::with_capacity(l + 1);
            for m in 0..=l {
                let mut ratio = 1.0f64; // (l-m)!/(l+m)!
                for k in (l - m + 1)..=(l + m) {
                    ratio /= k as f64;
                }
                nl.push(((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) * ratio).sqrt());
            }
            norm.push(nl);
        }
        norm
    })
}

/// `d^k P_l / dz^k` for `k = 0..=k_max`, by the k-times differentiated
/// Legendre recurrence (numerically stable at every l, unlike monomial
/// coefficient evaluation).
fn legendre_derivs<S: Real>(l: usize, k_max: usize, z: S) -> [S; L_MAX + 2] {
    let zero = S::of(0.0);
    let mut cur = [zero; L_MAX + 2];
    cur[0] = S::of(1.0);
    if l == 0 {
        return cur;
    }
    let mut prev = cur;
    cur = [zero; L_MAX + 2];
    cur[0] = z;
    if k_max >= 1 {
        cur[1] = S::of(1.0);
    }
    for j in 2..=l {
        let jf = j as f64;
        let a = (2.0 * jf - 1.0) / jf;
        let b = (jf - 1.0) / jf;
        let mut next = [zero; L_MAX + 2];
        for k in 0..=k_max.min(j) {
            let mut t = z * cur[k];
            if k >= 1 {
                t = t + cur[k - 1].scale_by(k as f64);
            }
            next[k] = t.scale_by(a) - prev[k].scale_by(b);
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Harmonic index `(l, m)` with the real convention: `m > 0` cosine type,
/// `m < 0` sine type, `m = 0` zonal.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Harmonic {
    pub l: usize,
    pub m: i32,
}

impl Harmonic {
    pub fn new(l: usize, m: i32) -> Result<Self> {
        if l > L_MAX || m.unsigned_abs() as usize > l {
            return Err(Error::InvalidInput(format!(
                "harmonic (l={l}, m={m}) out of range (l <= {L_MAX}, |m| <= l)"
            )));
        }
        Ok(Harmonic { l, m })
    }

    /// Value on the unit sphere from Cartesian components.
    pub fn eval<S: Real>(&self, p: [S; 3]) -> S {
        let m = self.m.unsigned_abs() as usize;
        let qz = legendre_derivs(self.l, m, p[2])[m];
        if self.m == 0 {
            return qz.scale_by(norms()[self.l][0]);
        }
        let (am, bm) = chebyshev_ab(m, p[0], p[1]);
        let trig = if self.m > 0 { am } else { bm };
        (qz * trig).scale_by(std::f64::consts::SQRT_2 * norms()[self.l][m])
    }

    /// Value and Cartesian gradient of the (non-extended) formula; dotted
    /// with tangent vectors it yields exact surface derivatives.
    pub fn eval_grad<S: Real>(&self, p: [S; 3]) -> (S, [S; 3]) {
        let m = self.m.unsigned_abs() as usize;
        let derivs = legendre_derivs(self.l, (m + 1).min(self.l), p[2]);
        let qz = derivs[m];
        let dqz = if m + 1 > self.l {
            S::of(0.0)
        } else {
            derivs[m + 1]
        };
        if self.m == 0 {
            let n = norms()[self.l][0];
            return (qz.scale_by(n), [S::of(0.0), S::of(0.0), dqz.scale_by(n)]);
        }
        let (am, bm) = chebyshev_ab(m, p[0], p[1]);
        let (am1, bm1) = chebyshev_ab(m - 1, p[0], p[1]);
        let s = std::f64::consts::SQRT_2 * norms()[self.l][m];
        let mf = m as f64;
        if self.m > 0 {
            let val = (qz * am).scale_by(s);
            let gx = (qz * am1).scale_by(s * mf);
            let gy = (qz * bm1).scale_by(-s * mf);
            let gz = (dqz * am).scale_by(s);
            (val, [gx, gy, gz])
        } else {
            let val = (qz * bm).scale_by(s);
            let gx = (qz * bm1).scale_by(s * mf);
            let gy = (qz * am1).scale_by(s * mf);
            let gz = (dqz * bm).scale_by(s);
            (val, [gx, gy, gz])
        }
    }

    /// Value and angular derivatives `(Y, dY/dtheta, dY/dphi)` at chart
    /// angles (no rotation).
    pub fn eval_angular<S: Real>(&self, theta: S, phi: S) -> (S, S, S) {
        let p = unit_vector(theta, phi);
        let dt = d_theta_unit(theta, phi);
        let dp = d_phi_unit(theta, phi);
        let (val, g) = self.eval_grad(p);
        (
            val,
            g[0] * dt[0] + g[1] * dt[1] + g[2] * dt[2],
            g[0] * dp[0] + g[1] * dp[1] + g[2] * dp[2],
        )
    }
}

fn chebyshev_ab<S: Real>(m: usize, x: S, y: S) -> (S, S) {
    // A_m + i B_m = (x + i y)^m
    let mut a = S::of(1.0);
    let mut b = S::of(0.0);
    for _ in 0..m {
        let na = a * x - b * y;
        let nb = a * y + b * x;
        a = na;
        b = nb;
    }
    (a, b)
}

/// Unit direction vector of chart angles.
pub fn unit_vector<S: Real>(theta: S, phi: S) -> [S; 3] {
    let st = theta.sin_r();
    let ct = theta.cos_r();
    [st * phi.cos_r(), st * phi.sin_r(), ct]
}

/// d(unit vector)/d theta.
pub fn d_theta_unit<S: Real>(theta: S, phi: S) -> [S; 3] {
    let st = theta.sin_r();
    let ct = theta.cos_r();
    [ct * phi.cos_r(), ct * phi.sin_r(), -st]
}

/// d(unit vector)/d phi.
pub fn d_phi_unit<S: Real>(theta: S, phi: S) -> [S; 3] {
    let st = theta.sin_r();
    [-st * phi.sin_r(), st * phi.cos_r(), S::of(0.0)]
}

// ---------------------------------------------------------------------------
// Rotations
// ---------------------------------------------------------------------------

/// Proper rotation of the sphere factor, stored as a 3x3 matrix.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub matrix: [[f64; 3]; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Rodrigues rotation about `axis` by `angle` (radians).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Err(Error::InvalidInput("rotation axis must be nonzero".into()));
        }
        let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Ok(Rotation {
            matrix: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        })
    }

    /// Validate an explicit matrix: orthogonal within 1e-12 and det = +1.
    pub fn from_matrix(matrix: [[f64; 3]; 3]) -> Result<Self> {
        let r = Rotation { matrix };
        let rt = r.transpose();
        let prod = r.compose(&rt);
        let id = Rotation::identity();
        let mut dev = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                dev = dev.max((prod.matrix[i][j] - id.matrix[i][j]).abs());
            }
        }
        if dev > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "matrix is not orthogonal (deviation {dev})"
            )));
        }
        let det = r.det();
        if (det - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "matrix is not a proper rotation (det = {det})"
            )));
        }
        Ok(r)
    }

    pub fn det(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn transpose(&self) -> Rotation {
        let m = &self.matrix;
        Rotation {
            matrix: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn inverse(&self) -> Rotation {
        self.transpose()
    }

    /// `self . other` (apply `other` first).
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, row) in other.matrix.iter().enumerate() {
                    out[i][j] += self.matrix[i][k] * row[j];
                }
            }
        }
        Rotation { matrix: out }
    }

    pub fn apply<S: Real>(&self, v: [S; 3]) -> [S; 3] {
        let m = &self.matrix;
        [
            v[0].scale_by(m[0][0]) + v[1].scale_by(m[0][1]) + v[2].scale_by(m[0][2]),
            v[0].scale_by(m[1][0]) + v[1].scale_by(m[1][1]) + v[2].scale_by(m[1][2]),
            v[0].scale_by(m[2][0]) + v[1].scale_by(m[2][1]) + v[2].scale_by(m[2][2]),
        ]
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let id = Rotation::identity();
        for i in 0..3 {
            for j in 0..3 {
                if (self.matrix[i][j] - id.matrix[i][j]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Star-shaped surface description
// ---------------------------------------------------------------------------

/// One harmonic term of a radial graph.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub l: usize,
    pub m: i32,
    pub c: f64,
}

/// Star-shaped radial graph `r(xi) = b (1 + sum c_lm Y_lm(R^-1 xi))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub base_radius: f64,
    pub harmonics: Vec<HarmonicTerm>,
    pub rotation: Rotation,
}

const POLE_GUARD: f64 = 1.0 - 1e-10;

impl SurfaceSpec {
    pub fn round(base_radius: f64) -> Self {
        SurfaceSpec {
            base_radius,
            harmonics: Vec::new(),
            rotation: Rotation::identity(),
        }
    }

    pub fn new(base_radius: f64, harmonics: Vec<HarmonicTerm>, rotation: Rotation) -> Result<Self> {
        if !(base_radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "base radius {base_radius} must be positive"
            )));
        }
        for t in &harmonics {
            Harmonic::new(t.l, t.m)?;
        }
        Ok(SurfaceSpec {
            base_radius,
            harmonics,
            rotation,
        })
    }

    /// Compose a rotation: the returned spec's radial field is
    /// `r_new(xi) = r_old(R^-1 xi)`.
    pub fn rotate(&self, r: &Rotation) -> SurfaceSpec {
        SurfaceSpec {
            base_radius: self.base_radius,
            harmonics: self.harmonics.clone(),
            rotation: r.compose(&self.rotation),
        }
    }

    /// Radial value at a direction, generic over scalars/jets. The
    /// direction is pulled back through the rotation in unit-vector form.
    pub fn radius<S: Real>(&self, theta: S, phi: S) -> S {
        let p = self.rotation.inverse().apply(unit_vector(theta, phi));
        let mut acc = S::of(1.0);
        for t in &self.harmonics {
            let h = Harmonic { l: t.l, m: t.m };
            acc = acc + h.eval(p).scale_by(t.c);
        }
        acc.scale_by(self.base_radius)
    }

    /// Jet-valued radius with a pole guard on the chart angles.
    pub fn eval_radius(&self, theta: Jet, phi: Jet) -> Result<Jet> {
        if theta.value().cos().abs() > POLE_GUARD {
            return Err(Error::DegenerateGeometry {
                theta: theta.value(),
                phi: phi.value(),
                detail: "chart angle too close to a pole".into(),
            });
        }
        Ok(self.radius(theta, phi))
    }

    /// Radius and its chart derivatives `(r, dr/dtheta, dr/dphi)`, each as a
    /// full-order jet. The derivative fields are evaluated from closed
    /// forms (harmonic gradients chained through the pulled-back direction),
    /// not by truncation-losing coefficient extraction.
    pub fn eval_radius_d1(&self, theta: Jet, phi: Jet) -> Result<(Jet, Jet, Jet)> {
        if theta.value().cos().abs() > POLE_GUARD {
            return Err(Error::DegenerateGeometry {
                theta: theta.value(),
                phi: phi.value(),
                detail: "chart angle too close to a pole".into(),
            });
        }
        let inv = self.rotation.inverse();
        let p = inv.apply(unit_vector(theta, phi));
        let dt = inv.apply(d_theta_unit(theta, phi));
        let dp = inv.apply(d_phi_unit(theta, phi));
        let mut val = Jet::constant(1.0);
        let mut d_theta = Jet::zero();
        let mut d_phi = Jet::zero();
        for t in &self.harmonics {
            let h = Harmonic { l: t.l, m: t.m };
            let (y, g) = h.eval_grad(p);
            val = val + y.scale(t.c);
            d_theta = d_theta + (g[0] * dt[0] + g[1] * dt[1] + g[2] * dt[2]).scale(t.c);
            d_phi = d_phi + (g[0] * dp[0] + g[1] * dp[1] + g[2] * dp[2]).scale(t.c);
        }
        Ok((
            val.scale(self.base_radius),
            d_theta.scale(self.base_radius),
            d_phi.scale(self.base_radius),
        ))
    }

    /// Extreme radii over a grid (plain values).
    pub fn radius_range(&self, grid: &QuadratureGrid) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for idx in 0..grid.n_nodes() {
            let (t, p) = grid.node(idx);
            let r = self.radius(t, p);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        (lo, hi)
    }
}
