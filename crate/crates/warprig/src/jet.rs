//! Truncated-Taylor (jet) arithmetic in two chart variables and one
//! deformation parameter.
//!
//! A [`Jet`] carries the Taylor expansion of a scalar quantity at a point:
//! chart variables `x1`, `x2` to total order 3 and the deformation parameter
//! `eps` to order 1, i.e. the 20 monomials `x1^a x2^b eps^c` with
//! `a + b <= 3`, `c <= 1`. Each stored coefficient is the mixed partial
//! divided by `a! b! c!`.
//!
//! Monomial order is fixed lexicographically by `(c, a, b)`:
//! the ten chart monomials `(0,0),(0,1),(0,2),(0,3),(1,0),(1,1),(1,2),
//! (2,0),(2,1),(3,0)` first with `c = 0`, then the same ten with `c = 1`.
//! All arithmetic walks coefficients in this order, so results are
//! bit-reproducible for identical inputs.
//!
//! Elementary functions go through a univariate Taylor composition: the
//! outer function is expanded to order 4 (the maximal total degree
//! `a + b + c` present in the index set) and composed with the inner jet by
//! Horner evaluation in `delta = inner - value`.

use crate::error::{Error, Result};

/// Number of chart monomials (`a + b <= 3`).
pub const CHART_COUNT: usize = 10;
/// Total number of jet coefficients.
pub const COEFF_COUNT: usize = 20;

/// Chart monomial exponents in storage order.
pub const MONOMIALS: [(usize, usize); CHART_COUNT] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 0),
    (1, 1),
    (1, 2),
    (2, 0),
    (2, 1),
    (3, 0),
];

// CHART_IDX[a][b]; usize::MAX marks monomials outside the index set.
const X: usize = usize::MAX;
const CHART_IDX: [[usize; 4]; 4] = [[0, 1, 2, 3], [4, 5, 6, X], [7, 8, X, X], [9, X, X, X]];

/// Chart variable selector for seeding and derivative access.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
}

/// Truncated Taylor expansion: chart order 3, deformation order 1.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Jet {
    c: [f64; COEFF_COUNT],
}

impl Default for Jet {
    fn default() -> Self {
        Jet::zero()
    }
}

impl Jet {
    #[inline]
    pub fn zero() -> Self {
        Jet {
            c: [0.0; COEFF_COUNT],
        }
    }

    /// Constant jet: value `v`, all derivative coefficients zero.
    #[inline]
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; COEFF_COUNT];
        c[0] = v;
        Jet { c }
    }

    /// Chart variable seeded at `v` (unit first derivative in `var`).
    #[inline]
    pub fn var(v: f64, var: Var) -> Self {
        let mut c = [0.0; COEFF_COUNT];
        c[0] = v;
        match var {
            Var::X1 => c[CHART_IDX[1][0]] = 1.0,
            Var::X2 => c[CHART_IDX[0][1]] = 1.0,
        }
        Jet { c }
    }

    /// The deformation parameter itself (value 0, unit eps coefficient).
    #[inline]
    pub fn eps() -> Self {
        let mut c = [0.0; COEFF_COUNT];
        c[CHART_COUNT] = 1.0;
        Jet { c }
    }

    #[inline]
    pub fn coefficients(&self) -> &[f64; COEFF_COUNT] {
        &self.c
    }

    /// Jet with explicit coefficients in storage order.
    #[inline]
    pub fn from_coefficients(c: [f64; COEFF_COUNT]) -> Self {
        Jet { c }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// First chart partial.
    #[inline]
    pub fn d1(&self, var: Var) -> f64 {
        match var {
            Var::X1 => self.c[CHART_IDX[1][0]],
            Var::X2 => self.c[CHART_IDX[0][1]],
        }
    }

    /// Mixed second chart partial `d^2 / (dx_i dx_j)`.
    #[inline]
    pub fn d2(&self, i: Var, j: Var) -> f64 {
        match (i, j) {
            (Var::X1, Var::X1) => 2.0 * self.c[CHART_IDX[2][0]],
            (Var::X2, Var::X2) => 2.0 * self.c[CHART_IDX[0][2]],
            _ => self.c[CHART_IDX[1][1]],
        }
    }

    /// Value of the eps-derivative (the linearization of the quantity).
    #[inline]
    pub fn deps_value(&self) -> f64 {
        self.c[CHART_COUNT]
    }

    /// Coefficient by explicit exponents; exponents must lie in the index set.
    #[inline]
    pub fn coeff(&self, a: usize, b: usize, c_eps: usize) -> f64 {
        self.c[c_eps * CHART_COUNT + CHART_IDX[a][b]]
    }

    /// The eps-block as a chart jet: exact first derivative in the
    /// deformation parameter, all chart orders retained.
    pub fn deps(&self) -> Jet {
        let mut out = Jet::zero();
        out.c[..CHART_COUNT].copy_from_slice(&self.c[CHART_COUNT..]);
        out
    }

    /// Chart jet with the eps-block dropped (the base-point expansion).
    pub fn chart_part(&self) -> Jet {
        let mut out = *self;
        for k in CHART_COUNT..COEFF_COUNT {
            out.c[k] = 0.0;
        }
        out
    }

    /// Multiply by the deformation parameter: shifts the chart block into
    /// the eps block. Any existing eps content is annihilated (eps^2 = 0).
    pub fn mul_eps(&self) -> Jet {
        let mut out = Jet::zero();
        out.c[CHART_COUNT..].copy_from_slice(&self.c[..CHART_COUNT]);
        out
    }

    /// Chart derivative extraction. The result is a jet whose coefficients
    /// are exact through chart order 2 (top-order coefficients of the
    /// derivative are outside the truncation and set to zero); the eps block
    /// is treated identically.
    pub fn dx(&self, var: Var) -> Jet {
        let mut out = Jet::zero();
        for blk in 0..2 {
            let o = blk * CHART_COUNT;
            for (k, &(a, b)) in MONOMIALS.iter().enumerate() {
                let src = match var {
                    Var::X1 => {
                        if a + 1 + b > 3 {
                            continue;
                        }
                        CHART_IDX[a + 1][b]
                    }
                    Var::X2 => {
                        if a + b + 1 > 3 {
                            continue;
                        }
                        CHART_IDX[a][b + 1]
                    }
                };
                let factor = match var {
                    Var::X1 => (a + 1) as f64,
                    Var::X2 => (b + 1) as f64,
                };
                out.c[o + k] = factor * self.c[o + src];
            }
        }
        out
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Jet {
        let mut out = *self;
        for v in out.c.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// Truncated product; order-3 coefficients are the exact convolution of
    /// the operand coefficients.
    pub fn mul(&self, rhs: &Jet) -> Jet {
        let mut out = Jet::zero();
        for i in 0..CHART_COUNT {
            let (ai, bi) = MONOMIALS[i];
            let s0 = self.c[i];
            let s1 = self.c[CHART_COUNT + i];
            if s0 == 0.0 && s1 == 0.0 {
                continue;
            }
            for j in 0..CHART_COUNT {
                let (a, b) = (ai + MONOMIALS[j].0, bi + MONOMIALS[j].1);
                if a + b > 3 {
                    continue;
                }
                let k = CHART_IDX[a][b];
                out.c[k] += s0 * rhs.c[j];
                out.c[CHART_COUNT + k] += s0 * rhs.c[CHART_COUNT + j] + s1 * rhs.c[j];
            }
        }
        out
    }

    /// Horner evaluation of an order-4 univariate Taylor series at this jet.
    /// `series[k]` is the k-th Taylor coefficient (derivative / k!) of the
    /// outer function at `self.value()`.
    pub fn compose(&self, series: &[f64; 5]) -> Jet {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut acc = Jet::constant(series[4]);
        for k in (0..4).rev() {
            acc = acc.mul(&delta);
            acc.c[0] += series[k];
        }
        acc
    }

    /// Raw reciprocal (IEEE semantics at zero value; see `checked_div`).
    pub fn recip_raw(&self) -> Jet {
        self.compose(&series_recip(self.c[0]))
    }

    /// Division with a degenerate-evaluation check on the divisor value.
    pub fn checked_div(&self, rhs: &Jet) -> Result<Jet> {
        if rhs.c[0] == 0.0 || !rhs.c[0].is_finite() {
            return Err(Error::degenerate("jet division", rhs.c[0]));
        }
        Ok(self.mul(&rhs.recip_raw()))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let v = self.c[0];
        if !(v > 0.0) {
            return Err(Error::degenerate("jet sqrt of non-positive value", v));
        }
        Ok(self.compose(&series_sqrt(v)))
    }

    pub fn sin(&self) -> Jet {
        self.compose(&series_sin(self.c[0]))
    }

    pub fn cos(&self) -> Jet {
        self.compose(&series_cos(self.c[0]))
    }

    /// Real power `self^alpha`; requires a positive value.
    pub fn pow_real(&self, alpha: f64) -> Result<Jet> {
        let v = self.c[0];
        if !(v > 0.0) {
            return Err(Error::degenerate("jet pow of non-positive value", v));
        }
        Ok(self.compose(&series_pow(v, alpha)))
    }

    pub fn acos(&self) -> Result<Jet> {
        let v = self.c[0];
        if !(v > -1.0 && v < 1.0) {
            return Err(Error::degenerate("jet acos outside (-1, 1)", v));
        }
        Ok(self.compose(&series_acos(v)))
    }

    pub fn atan(&self) -> Jet {
        self.compose(&series_atan(self.c[0]))
    }

    /// Four-quadrant arctangent of a jet pair `(y, x)`.
    ///
    /// Reduced to a univariate `atan` on the smaller ratio; the quadrant
    /// offset is a constant, so all derivative coefficients are exact.
    pub fn atan2(y: &Jet, x: &Jet) -> Result<Jet> {
        use std::f64::consts::{FRAC_PI_2, PI};
        let (yv, xv) = (y.c[0], x.c[0]);
        if yv == 0.0 && xv == 0.0 {
            return Err(Error::degenerate("jet atan2 at the origin", 0.0));
        }
        if xv.abs() >= yv.abs() {
            let t = y.checked_div(x)?.atan();
            if xv > 0.0 {
                Ok(t)
            } else if yv >= 0.0 {
                Ok(t + Jet::constant(PI))
            } else {
                Ok(t - Jet::constant(PI))
            }
        } else {
            let t = x.checked_div(y)?.atan();
            if yv > 0.0 {
                Ok(Jet::constant(FRAC_PI_2) - t)
            } else {
                Ok(Jet::constant(-FRAC_PI_2) - t)
            }
        }
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(self, rhs: Jet) -> Jet {
        let mut out = self;
        for k in 0..COEFF_COUNT {
            out.c[k] += rhs.c[k];
        }
        out
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, rhs: Jet) -> Jet {
        let mut out = self;
        for k in 0..COEFF_COUNT {
            out.c[k] -= rhs.c[k];
        }
        out
    }
}

impl std::ops::Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        Jet::mul(&self, &rhs)
    }
}

// ---------------------------------------------------------------------------
// Order-4 Taylor coefficients of the elementary functions.
// ---------------------------------------------------------------------------

fn series_recip(v: f64) -> [f64; 5] {
    let i = 1.0 / v;
    [i, -i * i, i * i * i, -i * i * i * i, i * i * i * i * i]
}

fn series_sqrt(v: f64) -> [f64; 5] {
    let s = v.sqrt();
    let i = 1.0 / v;
    [
        s,
        0.5 * s * i,
        -0.125 * s * i * i,
        0.0625 * s * i * i * i,
        -0.0390625 * s * i * i * i * i,
    ]
}

fn series_sin(v: f64) -> [f64; 5] {
    let (s, c) = v.sin_cos();
    [s, c, -s / 2.0, -c / 6.0, s / 24.0]
}

fn series_cos(v: f64) -> [f64; 5] {
    let (s, c) = v.sin_cos();
    [c, -s, -c / 2.0, s / 6.0, c / 24.0]
}

fn series_pow(v: f64, alpha: f64) -> [f64; 5] {
    let p = v.powf(alpha);
    let mut out = [p, 0.0, 0.0, 0.0, 0.0];
    let mut coeff = p;
    for k in 0..4usize {
        coeff *= (alpha - k as f64) / ((k + 1) as f64 * v);
        out[k + 1] = coeff;
    }
    out
}

fn series_atan(v: f64) -> [f64; 5] {
    let d = 1.0 + v * v;
    let d2 = d * d;
    let d3 = d2 * d;
    let d4 = d3 * d;
    [
        v.atan(),
        1.0 / d,
        -v / d2,
        (6.0 * v * v - 2.0) / (6.0 * d3),
        (24.0 * v - 24.0 * v * v * v) / (24.0 * d4),
    ]
}

fn series_acos(v: f64) -> [f64; 5] {
    let s = 1.0 - v * v;
    let s12 = s.sqrt();
    let s32 = s * s12;
    let s52 = s * s32;
    let s72 = s * s52;
    [
        v.acos(),
        -1.0 / s12,
        -v / (2.0 * s32),
        -(1.0 + 2.0 * v * v) / (6.0 * s52),
        -(9.0 * v + 6.0 * v * v * v) / (24.0 * s72),
    ]
}

// ---------------------------------------------------------------------------
// Generic scalar abstraction: lets closed-form geometry (harmonics, radial
// functions, rotations) evaluate either as plain f64 or as jets.
// ---------------------------------------------------------------------------

/// Minimal scalar interface shared by `f64` and [`Jet`].
pub trait Real:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn of(v: f64) -> Self;
    fn val(&self) -> f64;
    fn scale_by(self, s: f64) -> Self;
    fn sin_r(self) -> Self;
    fn cos_r(self) -> Self;
    fn sqrt_raw(self) -> Self;
    fn recip_r(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(&self) -> f64 {
        *self
    }
    #[inline]
    fn scale_by(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn sin_r(self) -> Self {
        self.sin()
    }
    #[inline]
    fn cos_r(self) -> Self {
        self.cos()
    }
    #[inline]
    fn sqrt_raw(self) -> Self {
        self.sqrt()
    }
    #[inline]
    fn recip_r(self) -> Self {
        1.0 / self
    }
}

impl Real for Jet {
    #[inline]
    fn of(v: f64) -> Self {
        Jet::constant(v)
    }
    #[inline]
    fn val(&self) -> f64 {
        self.value()
    }
    #[inline]
    fn scale_by(self, s: f64) -> Self {
        self.scale(s)
    }
    #[inline]
    fn sin_r(self) -> Self {
        self.sin()
    }
    #[inline]
    fn cos_r(self) -> Self {
        self.cos()
    }
    #[inline]
    fn sqrt_raw(self) -> Self {
        self.compose(&series_sqrt(self.value()))
    }
    #[inline]
    fn recip_r(self) -> Self {
        self.recip_raw()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        let denom = 1.0 + a.abs().max(b.abs());
        assert!(
            (a - b).abs() / denom <= tol,
            "{what}: {a} vs {b} (rel {})",
            (a - b).abs() / denom
        );
    }

    #[test]
    fn square_of_variable() {
        let x = Jet::var(3.0, Var::X1);
        let sq = x * x;
        assert_eq!(sq.value(), 9.0);
        assert_eq!(sq.d1(Var::X1), 6.0);
        assert_eq!(sq.coeff(2, 0, 0), 1.0);
        assert_eq!(sq.coeff(3, 0, 0), 0.0);
    }

    #[test]
    fn self_division_is_one() {
        let mut a = Jet::var(1.7, Var::X1);
        a = a * a + Jet::var(0.4, Var::X2).sin() + Jet::constant(2.0);
        let q = a.checked_div(&a).unwrap();
        let mut expect = [0.0; COEFF_COUNT];
        expect[0] = 1.0;
        for (k, (&got, &want)) in q.coefficients().iter().zip(expect.iter()).enumerate() {
            assert!((got - want).abs() < 1e-14, "coeff {k}: {got}");
        }
    }

    #[test]
    fn algebraic_equivalence_products() {
        // (x1 + x2)(x1 - x2) == x1^2 - x2^2, full coefficient arrays.
        let pts = [(1.3, 0.7), (0.2, -1.1), (2.4, 0.9), (-0.6, 0.35)];
        for &(p, q) in &pts {
            let x1 = Jet::var(p, Var::X1) + Jet::eps().scale(0.3);
            let x2 = Jet::var(q, Var::X2) - Jet::eps().scale(0.11);
            let lhs = (x1 + x2) * (x1 - x2);
            let rhs = x1 * x1 - x2 * x2;
            for k in 0..COEFF_COUNT {
                assert!(
                    (lhs.coefficients()[k] - rhs.coefficients()[k]).abs() <= 1e-15,
                    "coeff {k} at ({p},{q})"
                );
            }
        }
    }

    #[test]
    fn sqrt_of_constant() {
        let s = Jet::constant(4.0).sqrt().unwrap();
        assert_eq!(s.value(), 2.0);
        assert!(s.coefficients()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sin_maclaurin() {
        let s = Jet::var(0.0, Var::X1).sin();
        assert_eq!(s.value(), 0.0);
        assert_eq!(s.d1(Var::X1), 1.0);
        assert_eq!(s.coeff(2, 0, 0), 0.0);
        assert_close(s.coeff(3, 0, 0), -1.0 / 6.0, 1e-15, "sin x^3 coeff");
    }

    #[test]
    fn division_by_zero_value_is_an_error() {
        let a = Jet::var(1.0, Var::X1);
        let b = Jet::var(0.0, Var::X2);
        assert!(a.checked_div(&b).is_err());
        assert!(Jet::constant(-1.0).sqrt().is_err());
        assert!(Jet::constant(1.0).acos().is_err());
        assert!(Jet::atan2(&Jet::constant(0.0), &Jet::constant(0.0)).is_err());
    }

    /// Central finite differences of the first chart partials, step 1e-5.
    fn fd_check<F: Fn(Jet, Jet) -> Jet>(f: F, p: f64, q: f64, tol: f64, what: &str) {
        let h = 1e-5;
        let eval = |p: f64, q: f64| f(Jet::var(p, Var::X1), Jet::var(q, Var::X2));
        let j = eval(p, q);
        let d1 = (eval(p + h, q).value() - eval(p - h, q).value()) / (2.0 * h);
        let d2 = (eval(p, q + h).value() - eval(p, q - h).value()) / (2.0 * h);
        assert_close(
            j.d1(Var::X1),
            d1,
            tol,
            &format!("{what} d/dx1 at ({p},{q})"),
        );
        assert_close(
            j.d1(Var::X2),
            d2,
            tol,
            &format!("{what} d/dx2 at ({p},{q})"),
        );
    }

    #[test]
    fn unary_functions_match_finite_differences() {
        // Deterministic low-discrepancy sweep of 50 base points.
        for k in 0..50 {
            let p = 0.15 + 0.55 * ((k as f64) * 0.6180339887498949).fract();
            let q = 0.2 + 0.5 * ((k as f64) * 0.4142135623730951).fract();
            fd_check(|x, y| (x * x + y).sqrt().unwrap(), p, q, 1e-9, "sqrt");
            fd_check(|x, y| (x * y).sin(), p, q, 1e-9, "sin");
            fd_check(|x, y| (x + y).cos(), p, q, 1e-9, "cos");
            fd_check(
                |x, y| x.checked_div(&(y + Jet::constant(1.0))).unwrap(),
                p,
                q,
                1e-9,
                "div",
            );
            fd_check(|x, y| (x + y).pow_real(1.7).unwrap(), p, q, 1e-9, "pow");
            fd_check(
                |x, y| (x * y).scale_by(0.9).acos().unwrap(),
                p,
                q,
                3e-9,
                "acos",
            );
            fd_check(|x, y| Jet::atan2(&y, &x).unwrap(), p, q, 1e-9, "atan2");
            fd_check(
                |x, y| Jet::atan2(&x, &(y - Jet::constant(1.0))).unwrap(),
                p,
                q,
                1e-9,
                "atan2 quadrant",
            );
            fd_check(
                |x, y| (x + y * y + Jet::constant(0.5)).recip_raw(),
                p,
                q,
                1e-9,
                "recip",
            );
        }
    }

    #[test]
    fn trig_identity_full_coefficients() {
        // sin^2 + cos^2 == 1 exercises every order of the composition.
        let x = Jet::var(0.83, Var::X1)
            + Jet::var(0.0, Var::X2).scale(0.0)
            + Jet::var(-0.37, Var::X2) * Jet::eps().scale(0.5)
            + Jet::eps().scale(0.21);
        let id = x.sin() * x.sin() + x.cos() * x.cos();
        assert_close(id.value(), 1.0, 1e-15, "value");
        for k in 1..COEFF_COUNT {
            assert!(
                id.coefficients()[k].abs() < 1e-14,
                "coeff {k} = {}",
                id.coefficients()[k]
            );
        }
    }

    #[test]
    fn acos_inverts_cos_to_full_order() {
        // acos(cos(x)) == x on (0, pi) including the eps-carrying block.
        let x = Jet::var(1.1, Var::X1)
            + Jet::var(0.3, Var::X2).scale(0.4)
            + (Jet::var(0.2, Var::X1) * Jet::var(0.15, Var::X2)).mul_eps();
        let back = x.cos().acos().unwrap();
        for k in 0..COEFF_COUNT {
            assert!(
                (back.coefficients()[k] - x.coefficients()[k]).abs() < 1e-12,
                "coeff {k}: {} vs {}",
                back.coefficients()[k],
                x.coefficients()[k]
            );
        }
    }

    #[test]
    fn atan2_recovers_angle_in_all_quadrants() {
        for &t0 in &[0.4, 1.9, 2.9, -0.4, -1.9, -2.9] {
            let t = Jet::var(t0, Var::X1) + (Jet::var(0.1, Var::X2)).mul_eps();
            let a = Jet::atan2(&t.sin(), &t.cos()).unwrap();
            for k in 0..COEFF_COUNT {
                assert!(
                    (a.coefficients()[k] - t.coefficients()[k]).abs() < 1e-12,
                    "quadrant {t0}, coeff {k}"
                );
            }
        }
    }

    #[test]
    fn eps_block_is_directional_derivative() {
        // For an expression linear in eps the eps block is exactly the
        // directional derivative block of the perturbation field.
        let base = Jet::var(0.7, Var::X1);
        let dir = Jet::var(0.7, Var::X1).sin() * Jet::var(0.2, Var::X2);
        let expr = (base + dir.mul_eps()) * (base + dir.mul_eps());
        let expect = (base * dir).scale(2.0);
        let got = expr.deps();
        for k in 0..CHART_COUNT {
            assert!(
                (got.coefficients()[k] - expect.coefficients()[k]).abs() < 1e-14,
                "eps-block coeff {k}"
            );
        }
    }

    #[test]
    fn derivative_extraction_tracks_series() {
        // d/dx1 of x1^2 x2 = 2 x1 x2: check low-order coefficients.
        let x1 = Jet::var(1.4, Var::X1);
        let x2 = Jet::var(-0.6, Var::X2);
        let e = x1 * x1 * x2;
        let d = e.dx(Var::X1);
        assert_close(d.value(), 2.0 * 1.4 * -0.6, 1e-15, "value");
        assert_close(d.d1(Var::X1), 2.0 * -0.6, 1e-15, "d1");
        assert_close(d.d1(Var::X2), 2.0 * 1.4, 1e-15, "d2");
        assert_close(d.d2(Var::X1, Var::X2), 2.0, 1e-15, "d12");
    }

    #[test]
    fn mul_bit_reproducible() {
        let a = Jet::var(0.9, Var::X1).sin()
            + Jet::var(0.4, Var::X2).cos().scale(1.3)
            + (Jet::var(0.9, Var::X1) * Jet::var(0.4, Var::X2)).mul_eps();
        let b = (Jet::var(0.4, Var::X2) + Jet::constant(2.0))
            .sqrt()
            .unwrap();
        let p1 = a * b;
        let p2 = a * b;
        assert_eq!(p1.coefficients(), p2.coefficients());
    }
}
