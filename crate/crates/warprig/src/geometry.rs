//! Full geometric state of an immersed hypersurface (and of one-parameter
//! families) at a sample point.
//!
//! Positions are evaluated as jets of the chart angles and the deformation
//! parameter; the chain below then produces the induced metric, the unit
//! normal (positive radial component), the second fundamental form in the
//! convention `D_{e_i} e_j = -h_ij nu` (so round spheres have h > 0), the
//! support function `phi = X . nu`, the radial stack `u, f, Phi, ...`
//! composed through the ambient Taylor data, intrinsic curvature from the
//! metric jets alone, and the covariant-derivative quantities needed by the
//! Codazzi identities. Every epsilon block is an exact first derivative of
//! the corresponding field along the deformation.
//!
//! Ambient Christoffel symbols of `ds^2 = f^-2 dr^2 + r^2 dsigma` in the
//! chart `(r, theta, phi)`:
//!
//! ```text
//! G^r_rr = -f_r/f = -r f_u/f^2     G^r_tt = -r f^2      G^r_pp = -r f^2 sin^2
//! G^t_rt = 1/r                     G^t_pp = -sin cos
//! G^p_rp = 1/r                     G^p_tp = cos/sin
//! ```

use crate::ambient::AmbientSpace;
use crate::error::{Error, Result};
use crate::jet::{Jet, Var};
use crate::sphere::{
    d_phi_unit, d_theta_unit, unit_vector, Harmonic, QuadratureGrid, Rotation, SurfaceSpec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// First-order deformation field along a radial graph, in the decomposition
/// `V = a nu + W` with `W` an ambient angular field (zero radial component).
/// Angular fields are round-sphere harmonic gradients and their 90-degree
/// rotations, so the three `HarmonicRotation { l: 1, .. }` fields are exactly
/// the ambient rotation generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeformationField {
    /// Normal speed `a = Y_lm`, no angular part.
    HarmonicNormal { l: usize, m: i32 },
    /// `W = grad_sigma Y_lm` (round metric), `a = 0`.
    HarmonicGradient { l: usize, m: i32 },
    /// `W = star grad_sigma Y_lm` (divergence-free), `a = 0`.
    HarmonicRotation { l: usize, m: i32 },
    /// Pure radial speed `V^r = b Y_lm(R_spec^-1 xi)`: the derivative of a
    /// radial graph with respect to one harmonic coefficient.
    RadialHarmonic { l: usize, m: i32 },
    /// Translation-type Killing field of a space form,
    /// `V = f(r) [ (d.n) d_r + r^-1 grad_sigma (d.n) ]`.
    SpaceFormTranslation { direction: [f64; 3] },
    /// Weighted combination of fields.
    Combination(Vec<(f64, DeformationField)>),
}

/// An immersion of the parameter sphere into the ambient space.
///
/// Deformations act on radial-graph bases; to deform a rotated surface,
/// rotate the spec first (same image, reparametrized).
#[derive(Clone, Debug)]
pub enum Immersion {
    /// Star-shaped radial graph `xi -> (r(xi), xi)`.
    RadialGraph { spec: SurfaceSpec },
    /// Ambient rotation of the image of a radial graph, sharing the domain
    /// parametrization: `xi -> (r(xi), R xi)`.
    RotatedImage {
        spec: SurfaceSpec,
        rotation: Rotation,
    },
    /// One-parameter family `xi -> base(xi) + eps V(xi)` with a live eps slot.
    Deformed {
        base: SurfaceSpec,
        field: DeformationField,
    },
}

impl Immersion {
    pub fn graph(spec: SurfaceSpec) -> Self {
        Immersion::RadialGraph { spec }
    }

    pub fn base_spec(&self) -> &SurfaceSpec {
        match self {
            Immersion::RadialGraph { spec } => spec,
            Immersion::RotatedImage { spec, .. } => spec,
            Immersion::Deformed { base, .. } => base,
        }
    }

    pub fn has_variation(&self) -> bool {
        matches!(self, Immersion::Deformed { .. })
    }

    /// Ambient position `(r, theta_amb, phi_amb)` as jets of the chart
    /// angles (and eps for families).
    pub fn position_jets(&self, space: &AmbientSpace, theta: f64, phi: f64) -> Result<[Jet; 3]> {
        let jt = Jet::var(theta, Var::X1);
        let jp = Jet::var(phi, Var::X2);
        match self {
            Immersion::RadialGraph { spec } => {
                let r = spec.eval_radius(jt, jp)?;
                Ok([r, jt, jp])
            }
            Immersion::RotatedImage { spec, rotation } => {
                let r = spec.eval_radius(jt, jp)?;
                let q = rotation.apply(unit_vector(jt, jp));
                if q[2].value().abs() > 1.0 - 1e-10 {
                    return Err(Error::DegenerateGeometry {
                        theta,
                        phi,
                        detail: "rotated image point too close to an ambient pole".into(),
                    });
                }
                let ta = q[2].acos()?;
                let pa = Jet::atan2(&q[1], &q[0])?;
                Ok([r, ta, pa])
            }
            Immersion::Deformed { base, field } => {
                let r = base.eval_radius(jt, jp)?;
                let v = variation_vector(space, base, field, jt, jp)?;
                Ok([r + v[0].mul_eps(), jt + v[1].mul_eps(), jp + v[2].mul_eps()])
            }
        }
    }
}

/// Coordinate components of a deformation field as full-order chart jets.
/// Everything is closed form, so no truncation order is lost.
pub fn variation_vector(
    space: &AmbientSpace,
    base: &SurfaceSpec,
    field: &DeformationField,
    jt: Jet,
    jp: Jet,
) -> Result<[Jet; 3]> {
    match field {
        DeformationField::HarmonicNormal { l, m } => {
            let h = Harmonic::new(*l, *m)?;
            let a = h.eval(unit_vector(jt, jp));
            let nu = radial_graph_normal(space, base, jt, jp)?;
            Ok([a * nu[0], a * nu[1], a * nu[2]])
        }
        DeformationField::HarmonicGradient { l, m } => {
            let h = Harmonic::new(*l, *m)?;
            let (_, dt, dp) = h.eval_angular(jt, jp);
            let inv_sin2 = (jt.sin() * jt.sin()).recip_raw();
            Ok([Jet::zero(), dt, dp * inv_sin2])
        }
        DeformationField::HarmonicRotation { l, m } => {
            let h = Harmonic::new(*l, *m)?;
            let (_, dt, dp) = h.eval_angular(jt, jp);
            let inv_sin = jt.sin().recip_raw();
            Ok([Jet::zero(), -(dp * inv_sin), dt * inv_sin])
        }
        DeformationField::RadialHarmonic { l, m } => {
            let h = Harmonic::new(*l, *m)?;
            let p = base.rotation.inverse().apply(unit_vector(jt, jp));
            let y = h.eval(p);
            Ok([y.scale(base.base_radius), Jet::zero(), Jet::zero()])
        }
        DeformationField::SpaceFormTranslation { direction } => {
            let d = *direction;
            let n = unit_vector(jt, jp);
            let s = n[0].scale(d[0]) + n[1].scale(d[1]) + n[2].scale(d[2]);
            let dt_n = d_theta_unit(jt, jp);
            let dp_n = d_phi_unit(jt, jp);
            let s_t = dt_n[0].scale(d[0]) + dt_n[1].scale(d[1]) + dt_n[2].scale(d[2]);
            let s_p = dp_n[0].scale(d[0]) + dp_n[1].scale(d[1]) + dp_n[2].scale(d[2]);
            let r = base.eval_radius(jt, jp)?;
            let rt = space.radial_taylor(r.value())?;
            let f = r.compose(&rt.f);
            let inv_r = r.recip_raw();
            let inv_sin2 = (jt.sin() * jt.sin()).recip_raw();
            Ok([f * s, f * inv_r * s_t, f * inv_r * s_p * inv_sin2])
        }
        DeformationField::Combination(parts) => {
            let mut acc = [Jet::zero(), Jet::zero(), Jet::zero()];
            for (w, part) in parts {
                let v = variation_vector(space, base, part, jt, jp)?;
                for k in 0..3 {
                    acc[k] = acc[k] + v[k].scale(*w);
                }
            }
            Ok(acc)
        }
    }
}

/// Outward unit normal of a radial graph as full-order jets, from the
/// closed-form gradient of `F = r - R(theta, phi)`.
pub fn radial_graph_normal(
    space: &AmbientSpace,
    spec: &SurfaceSpec,
    jt: Jet,
    jp: Jet,
) -> Result<[Jet; 3]> {
    let (r, r_t, r_p) = spec.eval_radius_d1(jt, jp)?;
    let rt = space.radial_taylor(r.value())?;
    let f = r.compose(&rt.f);
    let f2 = f * f;
    let inv_r2 = (r * r).recip_raw();
    let inv_sin2 = (jt.sin() * jt.sin()).recip_raw();
    let grad = [f2, -(r_t * inv_r2), -(r_p * inv_r2 * inv_sin2)];
    let norm2 = f2 + r_t * r_t * inv_r2 + r_p * r_p * inv_r2 * inv_sin2;
    let inv_norm = norm2.sqrt()?.recip_raw();
    Ok([grad[0] * inv_norm, grad[1] * inv_norm, grad[2] * inv_norm])
}

// ---------------------------------------------------------------------------
// Evaluation chain
// ---------------------------------------------------------------------------

/// Metric/shape stage: everything through `h`, `H`, `sigma2`, `phi`.
/// Sufficient for operator columns and the search objective.
pub(crate) struct ShapeEval {
    pub pos: [Jet; 3],
    pub f: Jet,
    pub f_u: Jet,
    pub g: [[Jet; 2]; 2],
    pub det_g: Jet,
    pub sqrt_det_g: Jet,
    pub g_inv: [[Jet; 2]; 2],
    pub h: [[Jet; 2]; 2],
    pub nu: [Jet; 3],
    pub phi: Jet,
    pub mean_h: Jet,
    pub sigma2: Jet,
}

/// Full stage: adds the radial stack, intrinsic curvature, and the surface
/// connection.
pub(crate) struct FullEval {
    pub shape: ShapeEval,
    pub f_uu: Jet,
    pub big_phi: Jet,
    pub big_phi_u: Jet,
    pub u: Jet,
    pub rho: Jet,
    pub gauss_k: Jet,
    pub gamma: [[[Jet; 2]; 2]; 2], // gamma[c][a][b] = Gamma^c_ab (surface)
}

fn dot_ambient(gm: &[Jet; 3], a: &[Jet; 3], b: &[Jet; 3]) -> Jet {
    gm[0] * a[0] * b[0] + gm[1] * a[1] * b[1] + gm[2] * a[2] * b[2]
}

impl ShapeEval {
    pub fn compute(space: &AmbientSpace, pos: [Jet; 3]) -> Result<Self> {
        let r = pos[0];
        let ta = pos[1];
        let r_val = r.value();
        if !space.contains(r_val) {
            let [lo, hi] = space.interval();
            return Err(Error::RadiusRange {
                value: r_val,
                lo,
                hi,
            });
        }
        let taylor = space.radial_taylor(r_val)?;
        let f = r.compose(&taylor.f);
        let f_u = r.compose(&taylor.f_u);
        let st = ta.sin();
        let ct = ta.cos();
        let inv_f = f.recip_raw();
        let f2 = f * f;
        let r2 = r * r;

        // Ambient metric diagonal (G_rr, G_tt, G_pp) at the position.
        let gm = [inv_f * inv_f, r2, r2 * st * st];

        // Tangents T_a^mu = d_a pos^mu.
        let t_th = [pos[0].dx(Var::X1), pos[1].dx(Var::X1), pos[2].dx(Var::X1)];
        let t_ph = [pos[0].dx(Var::X2), pos[1].dx(Var::X2), pos[2].dx(Var::X2)];
        let tang = [t_th, t_ph];

        let mut g = [[Jet::zero(); 2]; 2];
        for a in 0..2 {
            for b in a..2 {
                g[a][b] = dot_ambient(&gm, &tang[a], &tang[b]);
                g[b][a] = g[a][b];
            }
        }
        let det_g = g[0][0] * g[1][1] - g[0][1] * g[0][1];
        if !(det_g.value() > 0.0) || !det_g.is_finite() {
            return Err(Error::DegenerateGeometry {
                theta: ta.value(),
                phi: pos[2].value(),
                detail: format!("det g = {} (not an immersion point)", det_g.value()),
            });
        }
        let sqrt_det_g = det_g.sqrt()?;
        let inv_det = det_g.recip_raw();
        let g_inv = [
            [g[1][1] * inv_det, -(g[0][1] * inv_det)],
            [-(g[0][1] * inv_det), g[0][0] * inv_det],
        ];

        // Covariant normal n_mu = sqrt(det G) eps_{mu nu la} T_th^nu T_ph^la
        // with sqrt(det G) = r^2 sin(theta)/f, then raised and normalized.
        let sdet = r2 * st * inv_f;
        let n_cov = [
            sdet * (t_th[1] * t_ph[2] - t_th[2] * t_ph[1]),
            sdet * (t_th[2] * t_ph[0] - t_th[0] * t_ph[2]),
            sdet * (t_th[0] * t_ph[1] - t_th[1] * t_ph[0]),
        ];
        let mut nu = [
            f2 * n_cov[0],
            n_cov[1] * r2.recip_raw(),
            n_cov[2] * (r2 * st * st).recip_raw(),
        ];
        let norm2 = nu[0] * n_cov[0] + nu[1] * n_cov[1] + nu[2] * n_cov[2];
        if !(norm2.value() > 0.0) {
            return Err(Error::DegenerateGeometry {
                theta: ta.value(),
                phi: pos[2].value(),
                detail: "vanishing normal".into(),
            });
        }
        let inv_norm = norm2.sqrt()?.recip_raw();
        for v in nu.iter_mut() {
            *v = *v * inv_norm;
        }
        if nu[0].value() < 0.0 {
            for v in nu.iter_mut() {
                *v = -*v;
            }
        }

        // Support function phi = X . nu = r nu^r / f.
        let phi = r * nu[0] * inv_f;

        // Ambient Christoffels at the position.
        let c_r_rr = -(r * f_u * inv_f * inv_f);
        let c_r_tt = -(r * f2);
        let c_r_pp = -(r * f2 * st * st);
        let c_t_rt = r.recip_raw();
        let c_p_rp = c_t_rt;
        let c_t_pp = -(st * ct);
        let c_p_tp = ct * st.recip_raw();

        // Second fundamental form h_ab = -(D_{T_a} T_b) . nu.
        let mut h = [[Jet::zero(); 2]; 2];
        let vars = [Var::X1, Var::X2];
        for a in 0..2 {
            for b in a..2 {
                let dd = [
                    pos[0].dx(vars[a]).dx(vars[b]),
                    pos[1].dx(vars[a]).dx(vars[b]),
                    pos[2].dx(vars[a]).dx(vars[b]),
                ];
                let (ta_, tb_) = (&tang[a], &tang[b]);
                let dr = dd[0]
                    + c_r_rr * ta_[0] * tb_[0]
                    + c_r_tt * ta_[1] * tb_[1]
                    + c_r_pp * ta_[2] * tb_[2];
                let dt =
                    dd[1] + c_t_rt * (ta_[0] * tb_[1] + ta_[1] * tb_[0]) + c_t_pp * ta_[2] * tb_[2];
                let dp = dd[2]
                    + c_p_rp * (ta_[0] * tb_[2] + ta_[2] * tb_[0])
                    + c_p_tp * (ta_[1] * tb_[2] + ta_[2] * tb_[1]);
                let dn = gm[0] * dr * nu[0] + gm[1] * dt * nu[1] + gm[2] * dp * nu[2];
                h[a][b] = -dn;
                h[b][a] = h[a][b];
            }
        }

        let mean_h =
            g_inv[0][0] * h[0][0] + g_inv[1][1] * h[1][1] + (g_inv[0][1] * h[0][1]).scale(2.0);
        let sigma2 = (h[0][0] * h[1][1] - h[0][1] * h[0][1]) * inv_det;

        Ok(ShapeEval {
            pos,
            f,
            f_u,
            g,
            det_g,
            sqrt_det_g,
            g_inv,
            h,
            nu,
            phi,
            mean_h,
            sigma2,
        })
    }
}

impl FullEval {
    pub fn compute(space: &AmbientSpace, pos: [Jet; 3]) -> Result<Self> {
        let shape = ShapeEval::compute(space, pos)?;
        let r = shape.pos[0];
        let taylor = space.radial_taylor(r.value())?;
        let f_uu = r.compose(&taylor.f_uu);
        let big_phi = r.compose(&taylor.big_phi);
        let big_phi_u = r.compose(&taylor.big_phi_u);
        let u = r.compose(&taylor.u);
        let rho = (r * r).scale(0.5);

        // Surface Christoffels from the metric jets.
        let vars = [Var::X1, Var::X2];
        let mut dg = [[[Jet::zero(); 2]; 2]; 2]; // dg[c][a][b] = d_c g_ab
        for c in 0..2 {
            for a in 0..2 {
                for b in a..2 {
                    dg[c][a][b] = shape.g[a][b].dx(vars[c]);
                    dg[c][b][a] = dg[c][a][b];
                }
            }
        }
        let mut gamma = [[[Jet::zero(); 2]; 2]; 2];
        for c in 0..2 {
            for a in 0..2 {
                for b in a..2 {
                    let mut acc = Jet::zero();
                    for d in 0..2 {
                        acc = acc
                            + shape.g_inv[c][d]
                                * (dg[a][d][b] + dg[b][d][a] - dg[d][a][b]).scale(0.5);
                    }
                    gamma[c][a][b] = acc;
                    gamma[c][b][a] = acc;
                }
            }
        }

        // Intrinsic curvature from the metric alone.
        let mut riem = Jet::zero();
        for c in 0..2 {
            let mut term = gamma[c][1][1].dx(Var::X1) - gamma[c][0][1].dx(Var::X2);
            for e in 0..2 {
                term = term + gamma[c][0][e] * gamma[e][1][1] - gamma[c][1][e] * gamma[e][0][1];
            }
            riem = riem + shape.g[0][c] * term;
        }
        let gauss_k = riem * shape.det_g.recip_raw();

        Ok(FullEval {
            shape,
            f_uu,
            big_phi,
            big_phi_u,
            u,
            rho,
            gauss_k,
            gamma,
        })
    }
}

// ---------------------------------------------------------------------------
// Value-level views
// ---------------------------------------------------------------------------

type M2 = [[f64; 2]; 2];
type T3 = [[[f64; 2]; 2]; 2];

/// All first/second/third-order surface quantities at one sample point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub theta: f64,
    pub phi_angle: f64,
    pub r: f64,
    pub g: M2,
    pub g_inv: M2,
    pub det_g: f64,
    pub sqrt_det_g: f64,
    pub h: M2,
    pub h_frame: M2,
    pub mean_h: f64,
    pub sigma2: f64,
    pub gauss_k: f64,
    pub nu: [f64; 3],
    pub support_phi: f64,
    pub phi_grad_frame: [f64; 2],
    pub u: f64,
    /// Chart components of the surface gradient of u.
    pub u_grad: [f64; 2],
    pub u_grad_frame: [f64; 2],
    pub grad_u_sq: f64,
    pub u_hess_frame: M2,
    /// `h_{ij;k}` in the orthonormal frame, indexed `[i][j][k]`.
    pub h_cov_frame: T3,
    /// `H_{,i}` in the orthonormal frame.
    pub h_grad_frame: [f64; 2],
    /// Chart-to-frame map (rows are the frame vectors).
    pub frame: M2,
    pub f: f64,
    pub f_u: f64,
    pub f_uu: f64,
    pub big_phi: f64,
    pub big_phi_u: f64,
    pub rho: f64,
}

/// Epsilon blocks of the point quantities for a one-parameter family, in the
/// orthonormal frame of the base metric.
#[derive(Clone, Debug)]
pub struct VariationGeometry {
    pub g_dot_frame: M2,
    pub h_dot_frame: M2,
    pub mean_h_dot: f64,
    pub sigma2_dot: f64,
    pub u_dot: f64,
    pub phi_dot: f64,
    pub u_dot_grad_frame: [f64; 2],
    /// Covariant Hessian of `u_dot` with the base-metric connection.
    pub u_dot_hess_frame: M2,
    /// Covariant derivative of `h_dot` with the base-metric connection,
    /// indexed `[i][j][k]`.
    pub h_dot_cov_frame: T3,
}

/// Lower-triangular chart-to-frame map from the Cholesky factor of g.
fn frame_from_metric(g: &M2) -> M2 {
    let l00 = g[0][0].sqrt();
    let l10 = g[0][1] / l00;
    let l11 = (g[1][1] - l10 * l10).sqrt();
    [[1.0 / l00, 0.0], [-l10 / (l00 * l11), 1.0 / l11]]
}

fn frame_vec(a: &M2, v: &[f64; 2]) -> [f64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

fn frame_mat(a: &M2, t: &M2) -> M2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    acc += a[i][p] * a[j][q] * t[p][q];
                }
            }
            out[i][j] = acc;
        }
    }
    out
}

fn frame_t3(a: &M2, t: &T3) -> T3 {
    let mut out = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let mut acc = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        for s in 0..2 {
                            acc += a[i][p] * a[j][q] * a[k][s] * t[p][q][s];
                        }
                    }
                }
                out[i][j][k] = acc;
            }
        }
    }
    out
}

fn values2(j: &[[Jet; 2]; 2]) -> M2 {
    [
        [j[0][0].value(), j[0][1].value()],
        [j[1][0].value(), j[1][1].value()],
    ]
}

fn deps2(j: &[[Jet; 2]; 2]) -> M2 {
    [
        [j[0][0].deps_value(), j[0][1].deps_value()],
        [j[1][0].deps_value(), j[1][1].deps_value()],
    ]
}

impl PointGeometry {
    fn from_eval(eval: &FullEval, theta: f64, phi_angle: f64) -> Self {
        let s = &eval.shape;
        let vars = [Var::X1, Var::X2];
        let g = values2(&s.g);
        let frame = frame_from_metric(&g);
        let mut gamma_val = [[[0.0; 2]; 2]; 2];
        for c in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    gamma_val[c][a][b] = eval.gamma[c][a][b].value();
                }
            }
        }
        let h = values2(&s.h);

        let u_grad = [eval.u.d1(Var::X1), eval.u.d1(Var::X2)];
        let g_inv = values2(&s.g_inv);
        let mut grad_u_sq = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                grad_u_sq += g_inv[a][b] * u_grad[a] * u_grad[b];
            }
        }
        let mut u_hess = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut v = eval.u.d2(vars[a], vars[b]);
                for c in 0..2 {
                    v -= gamma_val[c][a][b] * u_grad[c];
                }
                u_hess[a][b] = v;
            }
        }

        let mut h_cov = [[[0.0; 2]; 2]; 2]; // [a][b][c] = h_{ab;c}
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let mut v = s.h[a][b].d1(vars[c]);
                    for d in 0..2 {
                        v -= gamma_val[d][c][a] * h[d][b] + gamma_val[d][c][b] * h[a][d];
                    }
                    h_cov[a][b][c] = v;
                }
            }
        }

        let phi_grad = [s.phi.d1(Var::X1), s.phi.d1(Var::X2)];
        let h_grad = [s.mean_h.d1(Var::X1), s.mean_h.d1(Var::X2)];

        PointGeometry {
            theta,
            phi_angle,
            r: s.pos[0].value(),
            g,
            g_inv,
            det_g: s.det_g.value(),
            sqrt_det_g: s.sqrt_det_g.value(),
            h,
            h_frame: frame_mat(&frame, &h),
            mean_h: s.mean_h.value(),
            sigma2: s.sigma2.value(),
            gauss_k: eval.gauss_k.value(),
            nu: [s.nu[0].value(), s.nu[1].value(), s.nu[2].value()],
            support_phi: s.phi.value(),
            phi_grad_frame: frame_vec(&frame, &phi_grad),
            u: eval.u.value(),
            u_grad,
            u_grad_frame: frame_vec(&frame, &u_grad),
            grad_u_sq,
            u_hess_frame: frame_mat(&frame, &u_hess),
            h_cov_frame: frame_t3(&frame, &h_cov),
            h_grad_frame: frame_vec(&frame, &h_grad),
            frame,
            f: s.f.value(),
            f_u: s.f_u.value(),
            f_uu: eval.f_uu.value(),
            big_phi: eval.big_phi.value(),
            big_phi_u: eval.big_phi_u.value(),
            rho: eval.rho.value(),
        }
    }
}

impl VariationGeometry {
    fn from_eval(eval: &FullEval, frame: &M2) -> Self {
        let s = &eval.shape;
        let vars = [Var::X1, Var::X2];
        let mut gamma_val = [[[0.0; 2]; 2]; 2];
        for c in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    gamma_val[c][a][b] = eval.gamma[c][a][b].value();
                }
            }
        }

        // Covariant Hessian of u_dot with the base connection.
        let u_dot_jet = eval.u.deps();
        let u_dot_grad = [u_dot_jet.d1(Var::X1), u_dot_jet.d1(Var::X2)];
        let mut u_dot_hess = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut v = u_dot_jet.d2(vars[a], vars[b]);
                for c in 0..2 {
                    v -= gamma_val[c][a][b] * u_dot_grad[c];
                }
                u_dot_hess[a][b] = v;
            }
        }

        // Covariant derivative of h_dot with the base connection.
        let h_dot_val = deps2(&s.h);
        let mut h_dot_cov = [[[0.0; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let hd_jet_ab = s.h[a][b].deps();
                for c in 0..2 {
                    let mut v = hd_jet_ab.d1(vars[c]);
                    for d in 0..2 {
                        v -= gamma_val[d][c][a] * h_dot_val[d][b]
                            + gamma_val[d][c][b] * h_dot_val[a][d];
                    }
                    h_dot_cov[a][b][c] = v;
                }
            }
        }

        VariationGeometry {
            g_dot_frame: frame_mat(frame, &deps2(&s.g)),
            h_dot_frame: frame_mat(frame, &h_dot_val),
            mean_h_dot: s.mean_h.deps_value(),
            sigma2_dot: s.sigma2.deps_value(),
            u_dot: eval.u.deps_value(),
            phi_dot: s.phi.deps_value(),
            u_dot_grad_frame: frame_vec(frame, &u_dot_grad),
            u_dot_hess_frame: frame_mat(frame, &u_dot_hess),
            h_dot_cov_frame: frame_t3(frame, &h_dot_cov),
        }
    }
}

/// Geometry at one chart point.
pub fn eval_point(
    space: &AmbientSpace,
    imm: &Immersion,
    theta: f64,
    phi: f64,
) -> Result<PointGeometry> {
    require_surface_dim(space)?;
    let pos = imm.position_jets(space, theta, phi)?;
    let eval = FullEval::compute(space, pos)?;
    Ok(PointGeometry::from_eval(&eval, theta, phi))
}

/// Point geometry plus the exact first eps-derivatives for a family.
pub fn eval_variation(
    space: &AmbientSpace,
    family: &Immersion,
    theta: f64,
    phi: f64,
) -> Result<(PointGeometry, VariationGeometry)> {
    require_surface_dim(space)?;
    if !family.has_variation() {
        return Err(Error::InvalidInput(
            "eval_variation requires an immersion with a live deformation slot".into(),
        ));
    }
    let pos = family.position_jets(space, theta, phi)?;
    let eval = FullEval::compute(space, pos)?;
    let point = PointGeometry::from_eval(&eval, theta, phi);
    let variation = VariationGeometry::from_eval(&eval, &point.frame);
    Ok((point, variation))
}

fn require_surface_dim(space: &AmbientSpace) -> Result<()> {
    if space.dimension() != 2 {
        return Err(Error::InvalidInput(format!(
            "grid machinery is specialized to n = 2 (got n = {})",
            space.dimension()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Whole-surface evaluation and integration
// ---------------------------------------------------------------------------

/// Point geometries over a grid with the area density per node.
pub struct SurfaceGeometry {
    pub points: Vec<PointGeometry>,
    /// `sqrt(det g) / sin(theta)` per node (area density against the
    /// quadrature weights).
    pub density: Vec<f64>,
    pub area: f64,
    pub mean_radius: f64,
}

pub fn evaluate_surface(
    space: &AmbientSpace,
    imm: &Immersion,
    grid: &QuadratureGrid,
) -> Result<SurfaceGeometry> {
    require_surface_dim(space)?;
    let points: Vec<PointGeometry> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|idx| {
            let (t, p) = grid.node(idx);
            eval_point(space, imm, t, p)
        })
        .collect::<Result<Vec<_>>>()?;
    let density: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(idx, pt)| pt.sqrt_det_g / grid.sin_theta_at(idx))
        .collect();
    let area = integrate_with(grid, &density, |_| 1.0);
    let mean_radius = integrate_with(grid, &density, |idx| points[idx].r) / area;
    Ok(SurfaceGeometry {
        points,
        density,
        area,
        mean_radius,
    })
}

/// `sum_q w_q field(q) (sqrt(det g)/sin theta)(q)`, Kahan-compensated in
/// fixed node order.
pub fn integrate_with(grid: &QuadratureGrid, density: &[f64], field: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for idx in 0..grid.n_nodes() {
        let term = grid.weight(idx) * density[idx] * field(idx) - carry;
        let t = sum + term;
        carry = (t - sum) - term;
        sum = t;
    }
    sum
}

impl SurfaceGeometry {
    pub fn integrate(&self, grid: &QuadratureGrid, field: impl Fn(usize) -> f64) -> f64 {
        integrate_with(grid, &self.density, field)
    }
}

/// Variation geometries over a grid (node-parallel, deterministic order).
pub fn evaluate_variations(
    space: &AmbientSpace,
    family: &Immersion,
    grid: &QuadratureGrid,
) -> Result<Vec<(PointGeometry, VariationGeometry)>> {
    (0..grid.n_nodes())
        .into_par_iter()
        .map(|idx| {
            let (t, p) = grid.node(idx);
            eval_variation(space, family, t, p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::Preset;
    use crate::sphere::HarmonicTerm;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn euclidean_unit_sphere() {
        let space = AmbientSpace::new(Preset::euclidean(), [0.3, 4.0], 2).unwrap();
        let imm = Immersion::graph(SurfaceSpec::round(1.0));
        for &(t, p) in &[(0.7, 0.3), (1.2, 2.0), (2.3, 5.1)] {
            let pt = eval_point(&space, &imm, t, p).unwrap();
            assert!(rel(pt.g[0][0], 1.0) < 1e-14);
            assert!(rel(pt.g[1][1], t.sin().powi(2)) < 1e-14);
            assert!(pt.g[0][1].abs() < 1e-14);
            for a in 0..2 {
                for b in 0..2 {
                    assert!((pt.h[a][b] - pt.g[a][b]).abs() < 1e-13, "h = g fails");
                }
            }
            assert!(rel(pt.mean_h, 2.0) < 1e-13);
            assert!(rel(pt.sigma2, 1.0) < 1e-13);
            assert!(rel(pt.gauss_k, 1.0) < 1e-12, "K = {}", pt.gauss_k);
            assert!(rel(pt.support_phi, 1.0) < 1e-14);
            assert!(pt.grad_u_sq.abs() < 1e-26);
            let len = pt.nu[0] * pt.nu[0]
                + pt.r * pt.r * (pt.nu[1] * pt.nu[1] + (t.sin() * pt.nu[2]).powi(2));
            assert!(rel(len, 1.0) < 1e-13);
        }
    }

    #[test]
    fn schwarzschild_round_sphere_closed_forms() {
        let space = AmbientSpace::new(Preset::Schwarzschild { mass: 0.1 }, [0.5, 6.0], 2).unwrap();
        let imm = Immersion::graph(SurfaceSpec::round(2.0));
        let f = 0.9f64.sqrt();
        let pt = eval_point(&space, &imm, 1.1, 0.6).unwrap();
        assert!((pt.support_phi - 2.0).abs() < 1e-12);
        assert!((pt.mean_h - f).abs() < 1e-9, "H = {}", pt.mean_h);
        assert!((pt.sigma2 - 0.225).abs() < 1e-10);
        assert!((pt.gauss_k - 0.25).abs() < 1e-10);
    }

    fn perturbed_spec() -> SurfaceSpec {
        SurfaceSpec::new(
            2.0,
            vec![
                HarmonicTerm {
                    l: 2,
                    m: 2,
                    c: 0.08,
                },
                HarmonicTerm {
                    l: 3,
                    m: 1,
                    c: 0.06,
                },
            ],
            Rotation::identity(),
        )
        .unwrap()
    }

    #[test]
    fn identity_chain_on_perturbed_surface() {
        // (0.1), (h-phi), (var), Gauss (2.5), Codazzi (2.6), trace identity.
        let space = AmbientSpace::new(Preset::Schwarzschild { mass: 0.5 }, [1.05, 6.0], 2).unwrap();
        let imm = Immersion::graph(perturbed_spec());
        let grid = QuadratureGrid::build(12, 24).unwrap();
        for idx in 0..grid.n_nodes() {
            let (t, p) = grid.node(idx);
            let pt = eval_point(&space, &imm, t, p).unwrap();
            let n = 2.0;

            let r01 = pt.support_phi.powi(2) - (2.0 * pt.rho - pt.grad_u_sq);
            assert!(
                r01.abs() / (1.0 + 2.0 * pt.rho) < 1e-12,
                "(0.1) at {idx}: {r01}"
            );

            for i in 0..2 {
                for j in 0..2 {
                    let lhs = pt.h_frame[i][j] * pt.support_phi + pt.u_hess_frame[i][j]
                        - if i == j { pt.f } else { 0.0 };
                    assert!(
                        lhs.abs() / (1.0 + pt.f.abs()) < 1e-11,
                        "(h-phi) {i}{j}: {lhs}"
                    );
                }
            }

            for i in 0..2 {
                let mut rhs = 0.0;
                for k in 0..2 {
                    rhs += pt.h_frame[i][k] * pt.u_grad_frame[k];
                }
                let res = pt.phi_grad_frame[i] - rhs;
                assert!(res.abs() / (1.0 + rhs.abs()) < 1e-11, "(var) {i}: {res}");
            }

            let gauss = pt.sigma2
                - pt.gauss_k
                - (n - 1.0) * (n / 2.0 * pt.f_u - pt.support_phi.powi(2) * pt.big_phi);
            assert!(
                gauss.abs() / (1.0 + pt.sigma2.abs()) < 1e-10,
                "(2.5) at {idx}: {gauss}"
            );

            for j in 0..2 {
                let mut div_h = 0.0;
                for i in 0..2 {
                    div_h += pt.h_cov_frame[i][j][i];
                }
                let res = div_h - pt.h_grad_frame[j]
                    + (n - 1.0) * pt.support_phi * pt.big_phi * pt.u_grad_frame[j];
                assert!(
                    res.abs() / (1.0 + pt.h_grad_frame[j].abs()) < 2e-10,
                    "(2.6) at {idx} comp {j}: {res}"
                );
            }

            let lap_u = pt.u_hess_frame[0][0] + pt.u_hess_frame[1][1];
            let trace = pt.mean_h * pt.support_phi + lap_u - n * pt.f;
            assert!(
                trace.abs() / (1.0 + n * pt.f) < 1e-11,
                "trace at {idx}: {trace}"
            );
        }
    }

    #[test]
    fn uniform_inflation_variation() {
        // Family (1+eps) xi on the Euclidean unit sphere (scaled by Y00):
        // g_dot = 2 g Y00, H_dot = -2 Y00, u_dot = Y00.
        let space = AmbientSpace::new(Preset::euclidean(), [0.3, 4.0], 2).unwrap();
        let imm = Immersion::Deformed {
            base: SurfaceSpec::round(1.0),
            field: DeformationField::HarmonicNormal { l: 0, m: 0 },
        };
        let y00 = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        let (_, var) = eval_variation(&space, &imm, 0.9, 1.4).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 2.0 * y00 } else { 0.0 };
                assert!(
                    (var.g_dot_frame[i][j] - expect).abs() < 1e-12,
                    "g_dot {i}{j} = {}",
                    var.g_dot_frame[i][j]
                );
            }
        }
        assert!((var.mean_h_dot + 2.0 * y00).abs() < 1e-12);
        assert!((var.u_dot - y00).abs() < 1e-13);
        assert!((var.phi_dot - y00).abs() < 1e-12);
    }

    #[test]
    fn ambient_rotation_is_killing_everywhere() {
        let space = AmbientSpace::new(Preset::Schwarzschild { mass: 0.5 }, [1.05, 6.0], 2).unwrap();
        for m in [-1, 0, 1] {
            let imm = Immersion::Deformed {
                base: perturbed_spec(),
                field: DeformationField::HarmonicRotation { l: 1, m },
            };
            for &(t, p) in &[(0.8, 0.4), (1.7, 3.3), (2.4, 5.9)] {
                let (_, var) = eval_variation(&space, &imm, t, p).unwrap();
                let mut worst = 0.0f64;
                for i in 0..2 {
                    for j in 0..2 {
                        worst = worst.max(var.g_dot_frame[i][j].abs());
                        worst = worst.max(var.h_dot_frame[i][j].abs());
                    }
                }
                worst = worst.max(var.mean_h_dot.abs());
                worst = worst.max(var.u_dot.abs());
                worst = worst.max(var.phi_dot.abs());
                assert!(worst < 1e-10, "rotation m={m} at ({t},{p}): {worst}");
            }
        }
    }

    #[test]
    fn translations_are_killing_in_space_forms() {
        let dirs = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, -0.7, 0.3],
        ];
        for (preset, name) in [
            (Preset::euclidean(), "euclidean"),
            (Preset::hyperbolic(), "hyperbolic"),
            (Preset::SpaceForm { kappa: -0.04 }, "spherical"),
        ] {
            let space = AmbientSpace::new(preset, [0.4, 4.0], 2).unwrap();
            let base = SurfaceSpec::new(
                1.5,
                vec![
                    HarmonicTerm {
                        l: 2,
                        m: 1,
                        c: 0.05,
                    },
                    HarmonicTerm {
                        l: 3,
                        m: -2,
                        c: 0.03,
                    },
                ],
                Rotation::identity(),
            )
            .unwrap();
            for d in dirs {
                let imm = Immersion::Deformed {
                    base: base.clone(),
                    field: DeformationField::SpaceFormTranslation { direction: d },
                };
                for &(t, p) in &[(0.9, 0.5), (2.0, 2.8)] {
                    let (_, var) = eval_variation(&space, &imm, t, p).unwrap();
                    let mut worst = var.mean_h_dot.abs();
                    for i in 0..2 {
                        for j in 0..2 {
                            worst = worst.max(var.g_dot_frame[i][j].abs());
                            worst = worst.max(var.h_dot_frame[i][j].abs());
                        }
                    }
                    assert!(
                        worst < 1e-10,
                        "{name} translation {d:?} at ({t},{p}): {worst}"
                    );
                }
            }
        }
    }

    #[test]
    fn area_and_linearity() {
        let grid = QuadratureGrid::build(16, 32).unwrap();
        for preset in [Preset::euclidean(), Preset::Schwarzschild { mass: 0.1 }] {
            let space = AmbientSpace::new(preset, [0.5, 6.0], 2).unwrap();
            let imm = Immersion::graph(SurfaceSpec::round(2.0));
            let sg = evaluate_surface(&space, &imm, &grid).unwrap();
            assert!(
                (sg.area - 16.0 * std::f64::consts::PI).abs() < 1e-10,
                "area {}",
                sg.area
            );
            assert!((sg.area - 50.26548246).abs() < 1e-7);
            let f1 = sg.integrate(&grid, |i| sg.points[i].u);
            let f2 = sg.integrate(&grid, |i| sg.points[i].mean_h);
            let combo = sg.integrate(&grid, |i| 2.5 * sg.points[i].u - 0.7 * sg.points[i].mean_h);
            assert!((combo - (2.5 * f1 - 0.7 * f2)).abs() < 1e-13 * (1.0 + combo.abs()));
        }
    }

    #[test]
    fn rotated_image_preserves_scalar_geometry() {
        // Rotations preserve r, u, phi, g, h pointwise in the shared chart.
        let space = AmbientSpace::new(Preset::Schwarzschild { mass: 0.5 }, [1.05, 6.0], 2).unwrap();
        let spec = perturbed_spec();
        let rot = Rotation::from_axis_angle([0.0, 0.0, 1.0], 0.8).unwrap();
        let base = Immersion::graph(spec.clone());
        let rotated = Immersion::RotatedImage {
            spec,
            rotation: rot,
        };
        for &(t, p) in &[(0.6, 0.2), (1.5, 2.2), (2.6, 4.4)] {
            let a = eval_point(&space, &base, t, p).unwrap();
            let b = eval_point(&space, &rotated, t, p).unwrap();
            assert!((a.r - b.r).abs() < 1e-13);
            assert!((a.u - b.u).abs() < 1e-13);
            assert!((a.support_phi - b.support_phi).abs() < 1e-11);
            assert!((a.mean_h - b.mean_h).abs() < 1e-10);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a.g[i][j] - b.g[i][j]).abs() < 1e-11);
                    assert!((a.h[i][j] - b.h[i][j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn radius_out_of_range_is_detected() {
        let space = AmbientSpace::new(Preset::euclidean(), [0.5, 1.5], 2).unwrap();
        let imm = Immersion::graph(SurfaceSpec::round(2.0));
        assert!(matches!(
            eval_point(&space, &imm, 1.0, 1.0),
            Err(Error::RadiusRange { .. })
        ));
    }
}
