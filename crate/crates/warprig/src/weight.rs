//! The auxiliary weight ODE `w_uu + (n-1) Phi w = 0`.
//!
//! Integration runs in the radial coordinate through the exact chain-rule
//! factors (`dw/dr = w_u r/f`, `dw_u/dr = -(n-1) Phi w r/f`), with an
//! adaptive embedded Dormand-Prince 5(4) pair and cubic Hermite dense
//! output over the accepted steps. In a static space `w = f` solves the
//! equation, so the exact static potential is also available as a
//! `WeightSolution` without integration error.

use crate::ambient::{AmbientSpace, PhiSign};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Initial conditions: automatic (per the Phi-sign branch) or explicit
/// `(w0, w_u0)` applied at the starting end of the chosen direction.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightIc {
    Auto,
    Explicit { w0: f64, wu0: f64 },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    Positive,
    Negative,
    Zero,
    Mixed,
}

/// Dense solution of the weight ODE over `[r0, r1]`.
#[derive(Clone, Debug)]
pub struct WeightSolution {
    kind: Kind,
    r_lo: f64,
    r_hi: f64,
    pub ic_used: (f64, f64),
    pub direction: Direction,
    pub tol: f64,
    knots: Vec<f64>,
    w: Vec<f64>,
    wu: Vec<f64>,
    dw: Vec<f64>,
    dwu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Dense,
    /// `w = f` in closed form (valid in static spaces).
    StaticPotential,
}

/// Condition flags of the positivity/Wronskian argument.
#[derive(Clone, Debug, Serialize)]
pub struct WeightConditions {
    pub w_positive: bool,
    pub w_min: f64,
    /// Radius of the first non-positive sample of w, if any.
    pub first_nonpositive_r: Option<f64>,
    pub wronskian_sign: SignClass,
    pub wronskian_min: f64,
    pub wronskian_max: f64,
    pub w_over_f_monotone: bool,
    pub monotone_margin: f64,
    /// Integrated-form residual of the identity
    /// `(w_u f - w f_u)_u = -w (f_uu + (n-1) Phi f)`.
    pub increase_residual: f64,
    pub samples: usize,
}

const DEFAULT_TOL: f64 = 1e-11;

/// The exact static potential `w = f` as a weight solution.
pub fn from_static_potential(space: &AmbientSpace, r0: f64, r1: f64) -> Result<WeightSolution> {
    check_interval(space, r0, r1)?;
    let d = space.eval_radial(r0)?;
    Ok(WeightSolution {
        kind: Kind::StaticPotential,
        r_lo: r0,
        r_hi: r1,
        ic_used: (d.f, d.f_u),
        direction: Direction::Forward,
        tol: 0.0,
        knots: Vec::new(),
        w: Vec::new(),
        wu: Vec::new(),
        dw: Vec::new(),
        dwu: Vec::new(),
    })
}

fn check_interval(space: &AmbientSpace, r0: f64, r1: f64) -> Result<()> {
    let [lo, hi] = space.interval();
    if !(r0 >= lo && r1 <= hi && r0 < r1) {
        return Err(Error::RadiusRange {
            value: if r0 < lo { r0 } else { r1 },
            lo,
            hi,
        });
    }
    Ok(())
}

/// Solve the weight ODE with the default tolerance 1e-11.
pub fn solve_weight(
    space: &AmbientSpace,
    r0: f64,
    r1: f64,
    ic: WeightIc,
    direction: Direction,
) -> Result<WeightSolution> {
    solve_weight_tol(space, r0, r1, ic, direction, DEFAULT_TOL)
}

pub fn solve_weight_tol(
    space: &AmbientSpace,
    r0: f64,
    r1: f64,
    ic: WeightIc,
    direction: Direction,
    tol: f64,
) -> Result<WeightSolution> {
    check_interval(space, r0, r1)?;
    let (ic_used, direction) = match ic {
        WeightIc::Explicit { w0, wu0 } => ((w0, wu0), direction),
        WeightIc::Auto => match space.phi_sign() {
            PhiSign::Positive | PhiSign::Zero => {
                let d = space.eval_radial(r0)?;
                let delta = (1e-3f64).max(d.f_u.abs() * 1e-2);
                ((d.f, d.f_u + delta), Direction::Forward)
            }
            PhiSign::Negative => {
                let d = space.eval_radial(r1)?;
                let delta = (1e-3f64).max(d.f_u.abs() * 1e-2);
                ((d.f, d.f_u - delta), Direction::Backward)
            }
            PhiSign::Mixed => {
                return Err(Error::Hypothesis(
                    "auto initial conditions require a definite Phi sign; \
                     specify explicit (w0, wu0)"
                        .into(),
                ))
            }
        },
    };
    let (start, end) = match direction {
        Direction::Forward => (r0, r1),
        Direction::Backward => (r1, r0),
    };
    let n = space.dimension() as f64;
    let rhs = |r: f64, y: [f64; 2]| -> Result<[f64; 2]> {
        let d = space.eval_radial(r)?;
        let jac = r / d.f;
        Ok([y[1] * jac, -(n - 1.0) * d.big_phi * y[0] * jac])
    };

    let mut knots = vec![start];
    let mut y = [ic_used.0, ic_used.1];
    let mut ws = vec![y[0]];
    let mut wus = vec![y[1]];
    let mut k1 = rhs(start, y)?;
    let mut dws = vec![k1[0]];
    let mut dwus = vec![k1[1]];

    let span = end - start;
    // Error-per-unit-step control: the stated tolerance bounds the global
    // solution error, not just a per-step residual. The step cap keeps the
    // cubic Hermite dense-output error (~ h^4/384 |y''''|) below tolerance.
    let h_max = (span.abs() / 160.0 * (tol / 1e-11).powf(0.25)).min(span.abs() / 8.0);
    let mut h: f64 = span * 1e-3;
    let mut r = start;
    let mut steps = 0usize;
    while (end - r) * span.signum() > 0.0 {
        if h.abs() > h_max {
            h = h_max * span.signum();
        }
        if (r + h - end) * span.signum() > 0.0 {
            h = end - r;
        }
        let (y5, y4, k_last) = dp45_step(&rhs, r, y, h, k1)?;
        let mut err = 0.0f64;
        for i in 0..2 {
            let sc = 1e-14 + tol * y[i].abs().max(y5[i].abs()).max(1.0);
            err = err.max((y5[i] - y4[i]).abs() / sc);
        }
        let err_pus = err * (span / h).abs();
        if err_pus <= 1.0 {
            r += h;
            y = y5;
            k1 = k_last; // FSAL
            knots.push(r);
            ws.push(y[0]);
            wus.push(y[1]);
            dws.push(k1[0]);
            dwus.push(k1[1]);
        }
        let factor = if err_pus > 0.0 {
            (0.9 * err_pus.powf(-0.25)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h.abs() < 1e-14 * span.abs() {
            return Err(Error::SolverFailure {
                location: r,
                detail: "step size collapsed".into(),
            });
        }
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::SolverFailure {
                location: r,
                detail: "step budget exhausted".into(),
            });
        }
    }

    if direction == Direction::Backward {
        knots.reverse();
        ws.reverse();
        wus.reverse();
        dws.reverse();
        dwus.reverse();
    }
    Ok(WeightSolution {
        kind: Kind::Dense,
        r_lo: r0,
        r_hi: r1,
        ic_used,
        direction,
        tol,
        knots,
        w: ws,
        wu: wus,
        dw: dws,
        dwu: dwus,
    })
}

type Rhs<'a> = dyn Fn(f64, [f64; 2]) -> Result<[f64; 2]> + 'a;

/// One Dormand-Prince 5(4) step; returns (5th-order, 4th-order, k7=FSAL).
fn dp45_step(
    rhs: &Rhs,
    r: f64,
    y: [f64; 2],
    h: f64,
    k1: [f64; 2],
) -> Result<([f64; 2], [f64; 2], [f64; 2])> {
    const A2: [f64; 1] = [1.0 / 5.0];
    const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
    const A5: [f64; 4] = [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ];
    const A6: [f64; 5] = [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ];
    const B5: [f64; 6] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

    let stage = |coeffs: &[f64], ks: &[[f64; 2]]| -> [f64; 2] {
        let mut out = y;
        for (c, k) in coeffs.iter().zip(ks) {
            out[0] += h * c * k[0];
            out[1] += h * c * k[1];
        }
        out
    };
    let k2 = rhs(r + C[0] * h, stage(&A2, &[k1]))?;
    let k3 = rhs(r + C[1] * h, stage(&A3, &[k1, k2]))?;
    let k4 = rhs(r + C[2] * h, stage(&A4, &[k1, k2, k3]))?;
    let k5 = rhs(r + C[3] * h, stage(&A5, &[k1, k2, k3, k4]))?;
    let k6 = rhs(r + C[4] * h, stage(&A6, &[k1, k2, k3, k4, k5]))?;
    let y5 = stage(&B5, &[k1, k2, k3, k4, k5, k6]);
    let k7 = rhs(r + h, y5)?;
    let y4 = stage(&B4, &[k1, k2, k3, k4, k5, k6, k7]);
    Ok((y5, y4, k7))
}

impl WeightSolution {
    pub fn domain(&self) -> [f64; 2] {
        [self.r_lo, self.r_hi]
    }

    pub fn is_static_potential(&self) -> bool {
        self.kind == Kind::StaticPotential
    }

    /// `(w, w_u)` at a radius inside the solved interval.
    pub fn eval(&self, space: &AmbientSpace, r: f64) -> Result<(f64, f64)> {
        if !(r >= self.r_lo - 1e-12 && r <= self.r_hi + 1e-12) {
            return Err(Error::RadiusRange {
                value: r,
                lo: self.r_lo,
                hi: self.r_hi,
            });
        }
        match self.kind {
            Kind::StaticPotential => {
                let d = space.eval_radial(r.clamp(self.r_lo, self.r_hi))?;
                Ok((d.f, d.f_u))
            }
            Kind::Dense => {
                let r = r.clamp(self.knots[0], *self.knots.last().unwrap());
                let i = match self.knots.binary_search_by(|k| k.partial_cmp(&r).unwrap()) {
                    Ok(i) => i.min(self.knots.len() - 2),
                    Err(i) => i.saturating_sub(1).min(self.knots.len() - 2),
                };
                let (a, b) = (self.knots[i], self.knots[i + 1]);
                let t = (r - a) / (b - a);
                let w = hermite(
                    t,
                    b - a,
                    self.w[i],
                    self.dw[i],
                    self.w[i + 1],
                    self.dw[i + 1],
                );
                let wu = hermite(
                    t,
                    b - a,
                    self.wu[i],
                    self.dwu[i],
                    self.wu[i + 1],
                    self.dwu[i + 1],
                );
                Ok((w, wu))
            }
        }
    }

    /// `w_uu` at a radius: exact `f_uu` for the static potential, the
    /// Hermite derivative of the `w_u` component otherwise.
    pub fn eval_wuu(&self, space: &AmbientSpace, r: f64) -> Result<f64> {
        match self.kind {
            Kind::StaticPotential => Ok(space.eval_radial(r)?.f_uu),
            Kind::Dense => {
                let r = r.clamp(self.knots[0], *self.knots.last().unwrap());
                let i = match self.knots.binary_search_by(|k| k.partial_cmp(&r).unwrap()) {
                    Ok(i) => i.min(self.knots.len() - 2),
                    Err(i) => i.saturating_sub(1).min(self.knots.len() - 2),
                };
                let (a, b) = (self.knots[i], self.knots[i + 1]);
                let t = (r - a) / (b - a);
                let dwu_dr = hermite_deriv(
                    t,
                    b - a,
                    self.wu[i],
                    self.dwu[i],
                    self.wu[i + 1],
                    self.dwu[i + 1],
                );
                let d = space.eval_radial(r)?;
                Ok(dwu_dr * d.f / r)
            }
        }
    }
}

fn hermite(t: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + d0 * h * (t3 - 2.0 * t2 + t)
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + d1 * h * (t3 - t2)
}

fn hermite_deriv(t: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t2 = t * t;
    (y0 * (6.0 * t2 - 6.0 * t)
        + d0 * h * (3.0 * t2 - 4.0 * t + 1.0)
        + y1 * (-6.0 * t2 + 6.0 * t)
        + d1 * h * (3.0 * t2 - 2.0 * t))
        / h
}

/// Recompute the positivity/Wronskian/monotonicity flags from dense samples.
pub fn check_conditions(space: &AmbientSpace, sol: &WeightSolution) -> Result<WeightConditions> {
    const SAMPLES: usize = 1024;
    let [r0, r1] = sol.domain();
    let n = space.dimension() as f64;

    let mut w_min = f64::INFINITY;
    let mut first_nonpositive = None;
    let mut wr_min = f64::INFINITY;
    let mut wr_max = f64::NEG_INFINITY;
    let mut wr_scale = 0.0f64;
    let mut ratio_prev = f64::NEG_INFINITY;
    let mut monotone_margin = f64::INFINITY;
    let mut increase_residual = 0.0f64;

    // Cumulative integral of w (f_uu + (n-1) Phi f) du for the integrated
    // form of the (increase) identity.
    let mut cumulative = 0.0;
    let d0 = space.eval_radial(r0)?;
    let (w0, wu0) = sol.eval(space, r0)?;
    let wron0 = wu0 * d0.f - w0 * d0.f_u;

    let mut prev_r = r0;
    for k in 0..=SAMPLES {
        let r = r0 + (r1 - r0) * k as f64 / SAMPLES as f64;
        let d = space.eval_radial(r)?;
        let (w, wu) = sol.eval(space, r)?;
        if w < w_min {
            w_min = w;
        }
        if w <= 0.0 && first_nonpositive.is_none() {
            first_nonpositive = Some(r);
        }
        let wron = wu * d.f - w * d.f_u;
        wr_min = wr_min.min(wron);
        wr_max = wr_max.max(wron);
        wr_scale = wr_scale.max(wron.abs());

        let ratio = w / d.f;
        if k > 0 {
            let diff = ratio - ratio_prev;
            monotone_margin = monotone_margin.min(diff);
        }
        ratio_prev = ratio;

        if k > 0 {
            cumulative += crate::ambient::gl_fixed::<7>(
                |s| {
                    let ds = space.eval_radial(s).expect("in range");
                    let (ws, _) = sol.eval(space, s).expect("in range");
                    ws * (ds.f_uu + (n - 1.0) * ds.big_phi * ds.f) * s / ds.f
                },
                prev_r,
                r,
            );
        }
        prev_r = r;
        // (increase): W(r) - W(r0) + int w (f_uu + (n-1) Phi f) du = 0.
        increase_residual = increase_residual.max((wron - wron0 + cumulative).abs());
    }

    let tol = 1e-12 * (1.0 + wr_scale);
    let wronskian_sign = if wr_scale <= tol {
        SignClass::Zero
    } else if wr_min >= -tol {
        SignClass::Positive
    } else if wr_max <= tol {
        SignClass::Negative
    } else {
        SignClass::Mixed
    };

    Ok(WeightConditions {
        w_positive: w_min > 0.0,
        w_min,
        first_nonpositive_r: first_nonpositive,
        wronskian_sign,
        wronskian_min: wr_min,
        wronskian_max: wr_max,
        w_over_f_monotone: monotone_margin >= -1e-12,
        monotone_margin,
        increase_residual,
        samples: SAMPLES + 1,
    })
}
