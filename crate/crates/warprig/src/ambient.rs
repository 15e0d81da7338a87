//! Warped-product ambient spaces `(I x S^n, f(r)^-2 dr^2 + r^2 dsigma)`.
//!
//! Everything radial derives from the squared warp `q(r) = f(r)^2`:
//!
//! * `rho = r^2 / 2`, `du = d rho / f` (so `d/du = (f/r) d/dr`),
//! * `f_u = q'(r) / (2r)`, `f_uu = f d(f_u)/d rho`,
//! * `Phi = q'(r)/(2 r^3) - (q(r) - 1)/r^4`, `Phi_u = f dPhi/d rho`.
//!
//! These are produced as exact univariate Taylor series at a base radius so
//! that jets of chart variables can be composed through them without any
//! finite differencing. The coordinate `u` is normalized by `u(r_lo) = 0`
//! and accumulated on a refinement-controlled quadrature table.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Warp presets. `custom_radial` takes polynomial coefficients of
/// `f^2 = sum_k c_k rho^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Preset {
    SpaceForm { kappa: f64 },
    Schwarzschild { mass: f64 },
    AdsSchwarzschild { mass: f64, kappa: f64 },
    CubicWarp,
    CustomRadial { coefficients: Vec<f64> },
}

impl Preset {
    pub fn euclidean() -> Self {
        Preset::SpaceForm { kappa: 0.0 }
    }

    pub fn hyperbolic() -> Self {
        Preset::SpaceForm { kappa: 1.0 }
    }

    fn rho_polynomial(&self) -> Option<Vec<f64>> {
        match self {
            Preset::SpaceForm { kappa } => Some(vec![1.0, 2.0 * kappa]),
            Preset::CubicWarp => Some(vec![1.0, 0.0, 0.0, 1.0]),
            Preset::CustomRadial { coefficients } => Some(coefficients.clone()),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Univariate Taylor series at a base radius, order 6 (7 coefficients).
// Order 6 leaves order >= 4 intact after the two derivative extractions
// needed for f_uu and Phi_u.
// ---------------------------------------------------------------------------

const SN: usize = 7;

#[derive(Copy, Clone, Debug)]
struct RSeries {
    c: [f64; SN],
}

impl RSeries {
    fn constant(v: f64) -> Self {
        let mut c = [0.0; SN];
        c[0] = v;
        RSeries { c }
    }

    fn var(r0: f64) -> Self {
        let mut c = [0.0; SN];
        c[0] = r0;
        c[1] = 1.0;
        RSeries { c }
    }

    fn add(&self, o: &RSeries) -> RSeries {
        let mut c = self.c;
        for k in 0..SN {
            c[k] += o.c[k];
        }
        RSeries { c }
    }

    fn sub(&self, o: &RSeries) -> RSeries {
        let mut c = self.c;
        for k in 0..SN {
            c[k] -= o.c[k];
        }
        RSeries { c }
    }

    fn scale(&self, s: f64) -> RSeries {
        let mut c = self.c;
        for v in c.iter_mut() {
            *v *= s;
        }
        RSeries { c }
    }

    fn mul(&self, o: &RSeries) -> RSeries {
        let mut c = [0.0; SN];
        for i in 0..SN {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..SN - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        RSeries { c }
    }

    fn div(&self, o: &RSeries) -> RSeries {
        let mut c = [0.0; SN];
        let inv = 1.0 / o.c[0];
        for k in 0..SN {
            let mut acc = self.c[k];
            for j in 0..k {
                acc -= c[j] * o.c[k - j];
            }
            c[k] = acc * inv;
        }
        RSeries { c }
    }

    fn sqrt(&self) -> RSeries {
        let mut c = [0.0; SN];
        c[0] = self.c[0].sqrt();
        let inv = 1.0 / (2.0 * c[0]);
        for k in 1..SN {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= c[j] * c[k - j];
            }
            c[k] = acc * inv;
        }
        RSeries { c }
    }

    /// d/dr; the top coefficient of the result is unknown and set to zero.
    fn deriv(&self) -> RSeries {
        let mut c = [0.0; SN];
        for k in 0..SN - 1 {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        RSeries { c }
    }

    /// Antiderivative in r with the given constant term.
    fn integrate(&self, c0: f64) -> RSeries {
        let mut c = [0.0; SN];
        c[0] = c0;
        for k in 0..SN - 1 {
            c[k + 1] = self.c[k] / (k + 1) as f64;
        }
        RSeries { c }
    }

    fn head5(&self) -> [f64; 5] {
        [self.c[0], self.c[1], self.c[2], self.c[3], self.c[4]]
    }
}

/// Order-4 Taylor data of every radial function used by the geometry chain,
/// at one base radius. Arrays are ready for `Jet::compose`.
#[derive(Copy, Clone, Debug)]
pub struct RadialTaylor {
    pub f: [f64; 5],
    pub f_u: [f64; 5],
    pub f_uu: [f64; 5],
    pub big_phi: [f64; 5],
    pub big_phi_u: [f64; 5],
    pub u: [f64; 5],
}

/// Scalar diagnostics at one radius.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct RadialDiagnostics {
    pub r: f64,
    pub rho: f64,
    pub f: f64,
    pub f_r: f64,
    pub f_rho: f64,
    pub f_u: f64,
    pub f_uu: f64,
    pub big_phi: f64,
    pub big_phi_rho: f64,
    pub big_phi_u: f64,
    pub u: f64,
}

/// Sign classification of Phi over the working interval.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSign {
    Positive,
    Negative,
    Zero,
    Mixed,
}

/// Summary of the super-static inequality and Phi-sign hypotheses.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisSummary {
    pub max_super_static_residual: f64,
    pub min_super_static_residual: f64,
    pub phi_sign: PhiSign,
    pub super_static_holds: bool,
    pub hypotheses_hold: bool,
    pub samples: usize,
}

/// A warped-product ambient space over a closed radial interval.
///
/// Immutable after construction; the `u`-table is built eagerly so
/// evaluation is read-only and freely shareable across threads.
#[derive(Clone, Debug)]
pub struct AmbientSpace {
    preset: Preset,
    n: usize,
    r_lo: f64,
    r_hi: f64,
    u_tol: f64,
    u_knots: Vec<f64>,
    u_cum: Vec<f64>,
}

const HORIZON_MARGIN: f64 = 1e-10;

impl AmbientSpace {
    pub fn new(preset: Preset, interval: [f64; 2], n: usize) -> Result<Self> {
        Self::with_quadrature_tol(preset, interval, n, 1e-13)
    }

    pub fn with_quadrature_tol(
        preset: Preset,
        interval: [f64; 2],
        n: usize,
        u_tol: f64,
    ) -> Result<Self> {
        let [r_lo, r_hi] = interval;
        if !(r_lo > 0.0 && r_hi > r_lo) {
            return Err(Error::InvalidAmbient(format!(
                "interval [{r_lo}, {r_hi}] must satisfy 0 < r_lo < r_hi"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidAmbient(format!("dimension n = {n} < 2")));
        }
        if let Preset::CustomRadial { coefficients } = &preset {
            if coefficients.is_empty() {
                return Err(Error::InvalidAmbient(
                    "custom_radial requires at least one coefficient".into(),
                ));
            }
        }
        let mut space = AmbientSpace {
            preset,
            n,
            r_lo,
            r_hi,
            u_tol,
            u_knots: Vec::new(),
            u_cum: Vec::new(),
        };
        // Warp positivity with a horizon safety margin, on a dense sample.
        for k in 0..=2048 {
            let r = r_lo + (r_hi - r_lo) * k as f64 / 2048.0;
            let q = space.q_value(r);
            if !(q > HORIZON_MARGIN) {
                return Err(Error::InvalidAmbient(format!(
                    "f^2 = {q} at r = {r} is below the horizon margin {HORIZON_MARGIN}"
                )));
            }
        }
        space.build_u_table()?;
        Ok(space)
    }

    pub fn preset(&self) -> &Preset {
        &self.preset
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn interval(&self) -> [f64; 2] {
        [self.r_lo, self.r_hi]
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.r_lo && r <= self.r_hi
    }

    fn check_range(&self, r: f64) -> Result<()> {
        if !self.contains(r) {
            return Err(Error::RadiusRange {
                value: r,
                lo: self.r_lo,
                hi: self.r_hi,
            });
        }
        Ok(())
    }

    /// f(r)^2 as a plain value.
    pub fn q_value(&self, r: f64) -> f64 {
        match &self.preset {
            Preset::Schwarzschild { mass } => 1.0 - 2.0 * mass * r.powi(1 - self.n as i32),
            Preset::AdsSchwarzschild { mass, kappa } => {
                1.0 - 2.0 * mass * r.powi(1 - self.n as i32) + kappa * r * r
            }
            other => {
                let rho = 0.5 * r * r;
                let coeffs = other.rho_polynomial().expect("rho polynomial presets");
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * rho + c;
                }
                acc
            }
        }
    }

    pub fn f_value(&self, r: f64) -> f64 {
        self.q_value(r).sqrt()
    }

    fn q_series(&self, r0: f64) -> RSeries {
        match &self.preset {
            Preset::Schwarzschild { mass } => {
                let mut s = RSeries::constant(1.0);
                s = s.sub(&inv_power_series(r0, self.n - 1).scale(2.0 * mass));
                s
            }
            Preset::AdsSchwarzschild { mass, kappa } => {
                let mut s = RSeries::constant(1.0);
                s = s.sub(&inv_power_series(r0, self.n - 1).scale(2.0 * mass));
                let r = RSeries::var(r0);
                s.add(&r.mul(&r).scale(*kappa))
            }
            other => {
                let coeffs = other.rho_polynomial().expect("rho polynomial presets");
                let r = RSeries::var(r0);
                let rho = r.mul(&r).scale(0.5);
                let mut acc = RSeries::constant(0.0);
                for &c in coeffs.iter().rev() {
                    acc = acc.mul(&rho).add(&RSeries::constant(c));
                }
                acc
            }
        }
    }

    /// Order-4 Taylor data of all radial functions at `r`.
    pub fn radial_taylor(&self, r: f64) -> Result<RadialTaylor> {
        self.check_range(r)?;
        let rs = RSeries::var(r);
        let q = self.q_series(r);
        let f = q.sqrt();
        // f_u = q'/(2r)
        let f_u = q.deriv().div(&rs.scale(2.0));
        // f_uu = f * d(f_u)/d rho = f * f_u' / r
        let f_uu = f.mul(&f_u.deriv().div(&rs));
        // Phi = q'/(2 r^3) - (q - 1)/r^4
        let r2 = rs.mul(&rs);
        let r3 = r2.mul(&rs);
        let r4 = r2.mul(&r2);
        let big_phi = q
            .deriv()
            .div(&r3.scale(2.0))
            .sub(&q.sub(&RSeries::constant(1.0)).div(&r4));
        let big_phi_u = f.mul(&big_phi.deriv().div(&rs));
        // u' = r / f
        let u = rs.div(&f).integrate(self.u_value_unchecked(r));
        Ok(RadialTaylor {
            f: f.head5(),
            f_u: f_u.head5(),
            f_uu: f_uu.head5(),
            big_phi: big_phi.head5(),
            big_phi_u: big_phi_u.head5(),
            u: u.head5(),
        })
    }

    /// All scalar diagnostics at `r`.
    pub fn eval_radial(&self, r: f64) -> Result<RadialDiagnostics> {
        let t = self.radial_taylor(r)?;
        let f = t.f[0];
        Ok(RadialDiagnostics {
            r,
            rho: 0.5 * r * r,
            f,
            f_r: t.f[1],
            f_rho: t.f[1] / r,
            f_u: t.f_u[0],
            f_uu: t.f_uu[0],
            big_phi: t.big_phi[0],
            big_phi_rho: t.big_phi_u[0] / f,
            big_phi_u: t.big_phi_u[0],
            u: t.u[0],
        })
    }

    /// `f_uu + (n-1) Phi f`; identically zero exactly when the space is static.
    pub fn static_residual(&self, r: f64) -> Result<f64> {
        let t = self.radial_taylor(r)?;
        Ok(t.f_uu[0] + (self.n as f64 - 1.0) * t.big_phi[0] * t.f[0])
    }

    /// The left-hand side of the super-static inequality (same scalar as
    /// `static_residual`; the hypothesis asks it to be <= 0).
    pub fn super_static_residual(&self, r: f64) -> Result<f64> {
        self.static_residual(r)
    }

    /// `Ric(E1,E1) - Ric(V,V) = -(n-1) 2 rho Phi`.
    pub fn ricci_gap(&self, r: f64) -> Result<f64> {
        let t = self.radial_taylor(r)?;
        Ok(-(self.n as f64 - 1.0) * r * r * t.big_phi[0])
    }

    /// Tangential component of the static operator:
    /// `2 rho [f_uu + (n-1) Phi f]`.
    pub fn static_operator_tangent(&self, r: f64) -> Result<f64> {
        Ok(r * r * self.static_residual(r)?)
    }

    /// Phi-sign classification over the interval (>= 200 samples).
    pub fn phi_sign(&self) -> PhiSign {
        self.phi_sign_sampled(512)
    }

    pub fn phi_sign_sampled(&self, samples: usize) -> PhiSign {
        let samples = samples.max(200);
        let mut max_phi = f64::NEG_INFINITY;
        let mut min_phi = f64::INFINITY;
        let mut scale = 0.0f64;
        for k in 0..=samples {
            let r = self.r_lo + (self.r_hi - self.r_lo) * k as f64 / samples as f64;
            let phi = self.radial_taylor(r).expect("in-range sample").big_phi[0];
            max_phi = max_phi.max(phi);
            min_phi = min_phi.min(phi);
            scale = scale.max(phi.abs());
        }
        let tol = 1e-12 * (1.0 + scale);
        if scale <= tol {
            PhiSign::Zero
        } else if min_phi >= -tol {
            PhiSign::Positive
        } else if max_phi <= tol {
            PhiSign::Negative
        } else {
            PhiSign::Mixed
        }
    }

    /// Super-static residual scan plus the Theorem hypotheses summary.
    pub fn hypothesis_summary(&self, samples: usize) -> HypothesisSummary {
        let samples = samples.max(200);
        let mut max_res = f64::NEG_INFINITY;
        let mut min_res = f64::INFINITY;
        let mut scale = 0.0f64;
        for k in 0..=samples {
            let r = self.r_lo + (self.r_hi - self.r_lo) * k as f64 / samples as f64;
            let res = self.static_residual(r).expect("in-range sample");
            max_res = max_res.max(res);
            min_res = min_res.min(res);
            scale = scale.max(res.abs());
        }
        let phi_sign = self.phi_sign_sampled(samples);
        let tol = 1e-12 * (1.0 + scale);
        let super_static_holds = max_res <= tol;
        HypothesisSummary {
            max_super_static_residual: max_res,
            min_super_static_residual: min_res,
            phi_sign,
            super_static_holds,
            hypotheses_hold: super_static_holds && phi_sign != PhiSign::Mixed,
            samples,
        }
    }

    // -- u quadrature -------------------------------------------------------

    fn du_dr(&self, r: f64) -> f64 {
        r / self.f_value(r)
    }

    fn build_u_table(&mut self) -> Result<()> {
        // Refine the knot count until the GL15-vs-GL7 discrepancy of every
        // panel is below the tolerance.
        let mut k = 64usize;
        loop {
            let (knots, cum, err) = self.integrate_table(k);
            if err < self.u_tol || k >= 65536 {
                self.u_knots = knots;
                self.u_cum = cum;
                if err >= self.u_tol {
                    return Err(Error::InvalidAmbient(format!(
                        "u-quadrature stalled at error {err}"
                    )));
                }
                return Ok(());
            }
            k *= 2;
        }
    }

    fn integrate_table(&self, panels: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let mut knots = Vec::with_capacity(panels + 1);
        let mut cum = Vec::with_capacity(panels + 1);
        let h = (self.r_hi - self.r_lo) / panels as f64;
        let mut acc = 0.0;
        let mut err = 0.0f64;
        knots.push(self.r_lo);
        cum.push(0.0);
        for i in 0..panels {
            let a = self.r_lo + i as f64 * h;
            let b = a + h;
            let fine = gl_fixed::<15>(|r| self.du_dr(r), a, b);
            let coarse = gl_fixed::<7>(|r| self.du_dr(r), a, b);
            err = err.max((fine - coarse).abs());
            acc += fine;
            knots.push(b);
            cum.push(acc);
        }
        (knots, cum, err)
    }

    fn u_value_unchecked(&self, r: f64) -> f64 {
        let h = (self.r_hi - self.r_lo) / (self.u_knots.len() - 1) as f64;
        let idx = (((r - self.r_lo) / h) as usize).min(self.u_knots.len() - 2);
        let a = self.u_knots[idx];
        self.u_cum[idx] + gl_fixed::<15>(|s| self.du_dr(s), a, r)
    }

    /// `u(r)` with `u(r_lo) = 0`.
    pub fn u_value(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        Ok(self.u_value_unchecked(r))
    }
}

fn inv_power_series(r0: f64, k: usize) -> RSeries {
    // Taylor of r^{-k} at r0: coefficient j = (-1)^j C(k+j-1, j) r0^{-k-j}.
    let mut c = [0.0; SN];
    if k == 0 {
        c[0] = 1.0;
        return RSeries { c };
    }
    let mut binom = 1.0f64;
    let mut pow = r0.powi(-(k as i32));
    for (j, slot) in c.iter_mut().enumerate() {
        *slot = if j % 2 == 0 {
            binom * pow
        } else {
            -binom * pow
        };
        binom *= (k + j) as f64 / (j + 1) as f64;
        pow /= r0;
    }
    RSeries { c }
}

/// Fixed-order Gauss-Legendre quadrature on [a, b].
pub fn gl_fixed<const N: usize>(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = crate::sphere::gauss_legendre(N);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for k in 0..N {
        acc += weights[k] * f(mid + half * nodes[k]);
    }
    acc * half
}
