//! Rigidity theorems as numerical experiments: kernels of the linearized
//! `(g_dot, H_dot)` and `(g_dot, sigma2_dot)` operators over a harmonic
//! deformation basis, the sign-definite integral functionals with an
//! auxiliary weight, the global pair identity, and the space-form checks.

use crate::ambient::AmbientSpace;
use crate::error::{Error, Result};
use crate::geometry::{
    eval_point, evaluate_surface, evaluate_variations, integrate_with, DeformationField, Immersion,
    PointGeometry, ShapeEval, SurfaceGeometry,
};
use crate::jet::{Jet, Var};
use crate::sphere::{QuadratureGrid, SurfaceSpec};
use crate::weight::WeightSolution;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

// ---------------------------------------------------------------------------
// Deformation basis
// ---------------------------------------------------------------------------

/// Harmonic deformation basis: normal speeds `Y_lm` for `l <= L`, angular
/// gradient fields and divergence-free rotations for `1 <= l <= L`.
/// Total dimension `(L+1)^2 + 2((L+1)^2 - 1)`.
#[derive(Clone, Debug)]
pub struct DeformationBasis {
    pub degree: usize,
    pub fields: Vec<DeformationField>,
    pub labels: Vec<String>,
    /// Column indices of the three ambient rotation generators
    /// (`HarmonicRotation` with l = 1).
    pub rotation_columns: [usize; 3],
}

impl DeformationBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidInput(
                "deformation degree must be >= 1".into(),
            ));
        }
        let mut fields = Vec::new();
        let mut labels = Vec::new();
        for l in 0..=degree {
            for m in -(l as i32)..=(l as i32) {
                fields.push(DeformationField::HarmonicNormal { l, m });
                labels.push(format!("normal_{l}_{m}"));
            }
        }
        for l in 1..=degree {
            for m in -(l as i32)..=(l as i32) {
                fields.push(DeformationField::HarmonicGradient { l, m });
                labels.push(format!("gradient_{l}_{m}"));
            }
        }
        let mut rotation_columns = [0usize; 3];
        for l in 1..=degree {
            for m in -(l as i32)..=(l as i32) {
                if l == 1 {
                    rotation_columns[(m + 1) as usize] = fields.len();
                }
                fields.push(DeformationField::HarmonicRotation { l, m });
                labels.push(format!("rotation_{l}_{m}"));
            }
        }
        Ok(DeformationBasis {
            degree,
            fields,
            labels,
            rotation_columns,
        })
    }

    pub fn dimension(&self) -> usize {
        self.fields.len()
    }

    /// Weighted combination of the basis fields.
    pub fn combination(&self, coeffs: &[f64]) -> DeformationField {
        DeformationField::Combination(
            coeffs
                .iter()
                .zip(&self.fields)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, f)| (*c, f.clone()))
                .collect(),
        )
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorMode {
    MeanCurvature,
    Sigma2,
}

/// Assembled linearized operator with its row scaling context.
pub struct AssembledOperator {
    pub matrix: DMatrix<f64>,
    pub mode: OperatorMode,
    pub mean_radius: f64,
    /// Condition number of the basis Gram matrix (L2 inner products of the
    /// deformation fields over the surface).
    pub gram_condition: f64,
    /// Theorem hypothesis diagnostics: checked, not assumed.
    pub min_support_phi: f64,
    pub min_abs_mean_h: f64,
    base_spec: SurfaceSpec,
}

/// Resolve the radial-graph spec an immersion's image corresponds to.
fn graph_spec(imm: &Immersion) -> Result<SurfaceSpec> {
    match imm {
        Immersion::RadialGraph { spec } => Ok(spec.clone()),
        Immersion::RotatedImage { spec, rotation } => Ok(spec.rotate(rotation)),
        Immersion::Deformed { .. } => Err(Error::InvalidInput(
            "operator assembly requires an undeformed immersion".into(),
        )),
    }
}

/// Column j = eps-derivatives of the orthonormal-frame metric components
/// (3 rows per node, off-diagonal weighted by sqrt 2) and of H (or sigma2,
/// scaled by the mean radius), all times the square root of the quadrature
/// measure.
pub fn assemble_operator(
    space: &AmbientSpace,
    imm: &Immersion,
    basis: &DeformationBasis,
    grid: &QuadratureGrid,
    mode: OperatorMode,
) -> Result<AssembledOperator> {
    let base_spec = graph_spec(imm)?;
    let base_imm = Immersion::graph(base_spec.clone());
    let sg = evaluate_surface(space, &base_imm, grid)?;
    let n_nodes = grid.n_nodes();
    let rows = 4 * n_nodes;
    let dim = basis.dimension();
    let r_bar = sg.mean_radius;

    let sqrt_measure: Vec<f64> = (0..n_nodes)
        .map(|idx| (grid.weight(idx) * sg.density[idx]).sqrt())
        .collect();
    let frames: Vec<[[f64; 2]; 2]> = sg.points.iter().map(|p| p.frame).collect();

    let columns: Vec<Vec<f64>> = basis
        .fields
        .par_iter()
        .map(|field| -> Result<Vec<f64>> {
            let mut col = vec![0.0; rows];
            for idx in 0..n_nodes {
                let (theta, phi) = grid.node(idx);
                let family = Immersion::Deformed {
                    base: base_spec.clone(),
                    field: field.clone(),
                };
                let pos = family.position_jets(space, theta, phi)?;
                let shape = ShapeEval::compute(space, pos)?;
                let a = &frames[idx];
                let gd = [
                    [shape.g[0][0].deps_value(), shape.g[0][1].deps_value()],
                    [shape.g[0][1].deps_value(), shape.g[1][1].deps_value()],
                ];
                let mut gdf = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let mut acc = 0.0;
                        for p in 0..2 {
                            for q in 0..2 {
                                acc += a[i][p] * a[j][q] * gd[p][q];
                            }
                        }
                        gdf[i][j] = acc;
                    }
                }
                let s = sqrt_measure[idx];
                col[4 * idx] = gdf[0][0] * s;
                col[4 * idx + 1] = gdf[0][1] * s * std::f64::consts::SQRT_2;
                col[4 * idx + 2] = gdf[1][1] * s;
                let curv_dot = match mode {
                    OperatorMode::MeanCurvature => shape.mean_h.deps_value(),
                    OperatorMode::Sigma2 => shape.sigma2.deps_value(),
                };
                col[4 * idx + 3] = curv_dot * s * r_bar;
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut matrix = DMatrix::zeros(rows, dim);
    for (j, col) in columns.iter().enumerate() {
        matrix.column_mut(j).copy_from_slice(col);
    }

    // Gram condition of the deformation fields in the surface L2 metric.
    let gram_condition = gram_condition(space, &base_spec, basis, grid, &sg)?;

    let min_support_phi = sg
        .points
        .iter()
        .map(|p| p.support_phi)
        .fold(f64::INFINITY, f64::min);
    let min_abs_mean_h = sg
        .points
        .iter()
        .map(|p| p.mean_h.abs())
        .fold(f64::INFINITY, f64::min);
    Ok(AssembledOperator {
        matrix,
        mode,
        mean_radius: r_bar,
        gram_condition,
        min_support_phi,
        min_abs_mean_h,
        base_spec,
    })
}

fn gram_condition(
    space: &AmbientSpace,
    base: &SurfaceSpec,
    basis: &DeformationBasis,
    grid: &QuadratureGrid,
    sg: &SurfaceGeometry,
) -> Result<f64> {
    let n_nodes = grid.n_nodes();
    let dim = basis.dimension();
    // Ambient components of every field at every node (values only).
    let comps: Vec<Vec<[f64; 3]>> = basis
        .fields
        .par_iter()
        .map(|field| -> Result<Vec<[f64; 3]>> {
            let mut vals = Vec::with_capacity(n_nodes);
            for idx in 0..n_nodes {
                let (theta, phi) = grid.node(idx);
                let jt = Jet::var(theta, Var::X1);
                let jp = Jet::var(phi, Var::X2);
                let v = crate::geometry::variation_vector(space, base, field, jt, jp)?;
                vals.push([v[0].value(), v[1].value(), v[2].value()]);
            }
            Ok(vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut gram = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let val = integrate_with(grid, &sg.density, |idx| {
                let pt = &sg.points[idx];
                let st2 = grid.sin_theta_at(idx).powi(2);
                let (a, b) = (&comps[i][idx], &comps[j][idx]);
                a[0] * b[0] / (pt.f * pt.f) + pt.r * pt.r * (a[1] * b[1] + st2 * a[2] * b[2])
            });
            gram[(i, j)] = val;
            gram[(j, i)] = val;
        }
    }
    let svals = gram.svd(false, false).singular_values;
    let max = svals.iter().cloned().fold(0.0f64, f64::max);
    let min = svals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}

// ---------------------------------------------------------------------------
// Kernel spectrum
// ---------------------------------------------------------------------------

/// Per-kernel-vector diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct KernelVectorReport {
    pub coefficients: Vec<f64>,
    /// L2 norm of the deformation field itself (the scale the response
    /// norms below are measured against).
    pub field_l2: f64,
    pub g_dot_l2: f64,
    pub h_dot_l2: f64,
    pub mean_h_dot_l2: f64,
    pub sigma2_dot_l2: f64,
    pub u_dot_l2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functional_1_19: Option<Functional119>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub singular_values: Vec<f64>,
    pub sigma_max: f64,
    pub tau_rel: f64,
    pub gap_min: f64,
    /// None when the spectral-gap certificate fails ("ambiguous kernel").
    pub kernel_dimension: Option<usize>,
    pub kernel_candidate_dimension: usize,
    pub spectral_gap: Option<f64>,
    pub ambiguous: bool,
    /// Principal angles (radians) between the numerical kernel and the
    /// ambient-rotation subspace.
    pub principal_angles_rotation: Vec<f64>,
    pub kernel_vectors: Vec<KernelVectorReport>,
    /// Weighted operator image norm of the three flat translation-type
    /// fields (x, y, z): zero exactly in a space form, bounded away from
    /// zero when the mass breaks translational symmetry.
    pub translation_image_norms: [f64; 3],
    pub gram_condition: f64,
    pub mean_radius: f64,
    /// Minimum of the support function over the surface (the positivity
    /// hypothesis of the rigidity theorems, checked rather than assumed).
    pub min_support_phi: f64,
    /// Minimum of |H| over the surface (sigma2-mode hypothesis).
    pub min_abs_mean_h: f64,
}

/// SVD kernel analysis with a relative threshold and a mandatory
/// spectral-gap certificate.
pub fn kernel_spectrum(
    space: &AmbientSpace,
    op: &AssembledOperator,
    basis: &DeformationBasis,
    grid: &QuadratureGrid,
    tau_rel: f64,
    gap_min: f64,
    weight: Option<&WeightSolution>,
) -> Result<SpectrumReport> {
    let svd = op
        .matrix
        .clone()
        .try_svd(false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Linalg("SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Linalg("SVD missing V^T".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = singular_values[0];
    let dim = singular_values.len();

    let threshold = tau_rel * sigma_max;
    let kernel_candidate_dimension = singular_values.iter().filter(|&&s| s < threshold).count();

    let (spectral_gap, ambiguous) = if kernel_candidate_dimension == 0 {
        (None, false)
    } else if kernel_candidate_dimension == dim {
        (None, true)
    } else {
        let kept = singular_values[dim - kernel_candidate_dimension - 1];
        let largest_kernel = singular_values[dim - kernel_candidate_dimension];
        let gap = if largest_kernel > 0.0 {
            kept / largest_kernel
        } else {
            f64::INFINITY
        };
        (Some(gap), gap < gap_min)
    };
    let kernel_dimension = if ambiguous {
        None
    } else {
        Some(kernel_candidate_dimension)
    };

    // Kernel coefficient vectors (rows of V^T for the smallest singular
    // values, in descending singular-value order).
    let kernel_rows: Vec<usize> = order
        .iter()
        .rev()
        .take(kernel_candidate_dimension)
        .cloned()
        .collect();
    let mut kernel_vectors = Vec::new();
    for &row in &kernel_rows {
        let coeffs: Vec<f64> = (0..dim).map(|j| v_t[(row, j)]).collect();
        kernel_vectors.push(kernel_vector_report(
            space, op, basis, grid, coeffs, weight,
        )?);
    }

    // Principal angles between the kernel span and the rotation columns.
    // The principal directions come from the SVD of the rotation-column
    // block; each angle is then atan2(complement norm, rotation norm) of
    // the direction, which stays accurate near zero where acos of a
    // singular value loses half the digits.
    let mut principal_angles_rotation = Vec::new();
    if kernel_candidate_dimension > 0 {
        let k = kernel_candidate_dimension;
        let dim_b = basis.dimension();
        let mut cross = DMatrix::zeros(k, 3);
        for (a, kv) in kernel_vectors.iter().enumerate() {
            for (b, &col) in basis.rotation_columns.iter().enumerate() {
                cross[(a, b)] = kv.coefficients[col];
            }
        }
        let svd_c = cross
            .clone()
            .try_svd(true, false, f64::EPSILON, 0)
            .ok_or_else(|| Error::Linalg("principal-angle SVD failed".into()))?;
        let u = svd_c.u.as_ref().expect("u requested");
        let n_angles = k.min(3);
        let mut angles = Vec::with_capacity(n_angles);
        for i in 0..n_angles {
            // Principal kernel-side direction in coefficient space.
            let mut dir = vec![0.0; dim_b];
            for (a, kv) in kernel_vectors.iter().enumerate() {
                let w = u[(a, i)];
                for (slot, c) in dir.iter_mut().zip(&kv.coefficients) {
                    *slot += w * c;
                }
            }
            let mut par = 0.0;
            for &col in &basis.rotation_columns {
                par += dir[col] * dir[col];
            }
            let total: f64 = dir.iter().map(|v| v * v).sum();
            let perp = (total - par).max(0.0);
            angles.push(perp.sqrt().atan2(par.sqrt()));
        }
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        principal_angles_rotation = angles;
    }

    // Flat translation-type fields pushed through the same row map.
    let mut translation_image_norms = [0.0; 3];
    let dirs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for (k, d) in dirs.iter().enumerate() {
        translation_image_norms[k] = variation_row_norm(
            space,
            op,
            grid,
            &DeformationField::SpaceFormTranslation { direction: *d },
        )?;
    }

    Ok(SpectrumReport {
        singular_values,
        sigma_max,
        tau_rel,
        gap_min,
        kernel_dimension,
        kernel_candidate_dimension,
        spectral_gap,
        ambiguous,
        principal_angles_rotation,
        kernel_vectors,
        translation_image_norms,
        gram_condition: op.gram_condition,
        mean_radius: op.mean_radius,
        min_support_phi: op.min_support_phi,
        min_abs_mean_h: op.min_abs_mean_h,
    })
}

fn kernel_vector_report(
    space: &AmbientSpace,
    op: &AssembledOperator,
    basis: &DeformationBasis,
    grid: &QuadratureGrid,
    coefficients: Vec<f64>,
    weight: Option<&WeightSolution>,
) -> Result<KernelVectorReport> {
    let field = basis.combination(&coefficients);
    let family = Immersion::Deformed {
        base: op.base_spec.clone(),
        field: field.clone(),
    };
    let data = evaluate_variations(space, &family, grid)?;
    let density: Vec<f64> = data
        .iter()
        .enumerate()
        .map(|(idx, (pt, _))| pt.sqrt_det_g / grid.sin_theta_at(idx))
        .collect();
    let tensor_sq =
        |m: &[[f64; 2]; 2]| m[0][0] * m[0][0] + 2.0 * m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let g_dot_l2 = integrate_with(grid, &density, |i| tensor_sq(&data[i].1.g_dot_frame)).sqrt();
    let h_dot_l2 = integrate_with(grid, &density, |i| tensor_sq(&data[i].1.h_dot_frame)).sqrt();
    let mean_h_dot_l2 = integrate_with(grid, &density, |i| data[i].1.mean_h_dot.powi(2)).sqrt();
    let sigma2_dot_l2 = integrate_with(grid, &density, |i| data[i].1.sigma2_dot.powi(2)).sqrt();
    let u_dot_l2 = integrate_with(grid, &density, |i| data[i].1.u_dot.powi(2)).sqrt();
    let field_sq: Vec<f64> = (0..grid.n_nodes())
        .map(|idx| -> Result<f64> {
            let (t, p) = grid.node(idx);
            let jt = Jet::var(t, Var::X1);
            let jp = Jet::var(p, Var::X2);
            let v = crate::geometry::variation_vector(space, &op.base_spec, &field, jt, jp)?;
            let pt = &data[idx].0;
            let st2 = grid.sin_theta_at(idx).powi(2);
            Ok(v[0].value().powi(2) / (pt.f * pt.f)
                + pt.r * pt.r * (v[1].value().powi(2) + st2 * v[2].value().powi(2)))
        })
        .collect::<Result<Vec<_>>>()?;
    let field_l2 = integrate_with(grid, &density, |i| field_sq[i]).sqrt();
    let functional_1_19 = match weight {
        Some(sol) => Some(functional_1_19(space, &op.base_spec, &field, sol, grid)?),
        None => None,
    };
    Ok(KernelVectorReport {
        coefficients,
        field_l2,
        g_dot_l2,
        h_dot_l2,
        mean_h_dot_l2,
        sigma2_dot_l2,
        u_dot_l2,
        functional_1_19,
    })
}

/// Norm of the operator-row image of an arbitrary deformation field
/// (same row scaling as the assembled matrix).
fn variation_row_norm(
    space: &AmbientSpace,
    op: &AssembledOperator,
    grid: &QuadratureGrid,
    field: &DeformationField,
) -> Result<f64> {
    let family = Immersion::Deformed {
        base: op.base_spec.clone(),
        field: field.clone(),
    };
    let data = evaluate_variations(space, &family, grid)?;
    let mut acc = 0.0;
    for (idx, (pt, var)) in data.iter().enumerate() {
        let m = grid.weight(idx) * pt.sqrt_det_g / grid.sin_theta_at(idx);
        let gd = &var.g_dot_frame;
        let curv_dot = match op.mode {
            OperatorMode::MeanCurvature => var.mean_h_dot,
            OperatorMode::Sigma2 => var.sigma2_dot,
        };
        acc += m
            * (gd[0][0] * gd[0][0]
                + 2.0 * gd[0][1] * gd[0][1]
                + gd[1][1] * gd[1][1]
                + (curv_dot * op.mean_radius).powi(2));
    }
    Ok(acc.sqrt())
}

// ---------------------------------------------------------------------------
// Integral functionals
// ---------------------------------------------------------------------------

/// Terms of the infinitesimal integral identity: T1 = int |h_dot|^2 phi w,
/// T2 = int (w_uu + (n-1) Phi w) u_dot u_i u_j h_dot_ij,
/// T3 = n(n-1) int u_dot^2 phi Phi (w_u f - w f_u); the identity says the
/// sum vanishes for isometric mean-curvature-preserving variations.
#[derive(Clone, Debug, Serialize)]
pub struct Functional119 {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub sum: f64,
    pub g_dot_l2: f64,
    pub mean_h_dot_l2: f64,
    pub variation_scale: f64,
}

pub fn functional_1_19(
    space: &AmbientSpace,
    base: &SurfaceSpec,
    field: &DeformationField,
    sol: &WeightSolution,
    grid: &QuadratureGrid,
) -> Result<Functional119> {
    let family = Immersion::Deformed {
        base: base.clone(),
        field: field.clone(),
    };
    let data = evaluate_variations(space, &family, grid)?;
    let n = space.dimension() as f64;
    let density: Vec<f64> = data
        .iter()
        .enumerate()
        .map(|(idx, (pt, _))| pt.sqrt_det_g / grid.sin_theta_at(idx))
        .collect();

    let mut wvals = Vec::with_capacity(data.len());
    for (pt, _) in &data {
        let (w, wu) = sol.eval(space, pt.r)?;
        let wuu = sol.eval_wuu(space, pt.r)?;
        wvals.push((w, wu, wuu));
    }

    let t1 = integrate_with(grid, &density, |i| {
        let (pt, var) = &data[i];
        let hd = &var.h_dot_frame;
        let sq = hd[0][0] * hd[0][0] + 2.0 * hd[0][1] * hd[0][1] + hd[1][1] * hd[1][1];
        sq * pt.support_phi * wvals[i].0
    });
    let t2 = integrate_with(grid, &density, |i| {
        let (pt, var) = &data[i];
        let (w, _, wuu) = wvals[i];
        let mut uuh = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                uuh += pt.u_grad_frame[a] * pt.u_grad_frame[b] * var.h_dot_frame[a][b];
            }
        }
        (wuu + (n - 1.0) * pt.big_phi * w) * var.u_dot * uuh
    });
    let t3 = integrate_with(grid, &density, |i| {
        let (pt, var) = &data[i];
        let (w, wu, _) = wvals[i];
        n * (n - 1.0) * var.u_dot.powi(2) * pt.support_phi * pt.big_phi * (wu * pt.f - w * pt.f_u)
    });

    let tensor_sq =
        |m: &[[f64; 2]; 2]| m[0][0] * m[0][0] + 2.0 * m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let g_dot_l2 = integrate_with(grid, &density, |i| tensor_sq(&data[i].1.g_dot_frame)).sqrt();
    let mean_h_dot_l2 = integrate_with(grid, &density, |i| data[i].1.mean_h_dot.powi(2)).sqrt();
    let h_dot_l2 = integrate_with(grid, &density, |i| tensor_sq(&data[i].1.h_dot_frame)).sqrt();
    let u_dot_l2 = integrate_with(grid, &density, |i| data[i].1.u_dot.powi(2)).sqrt();

    Ok(Functional119 {
        t1,
        t2,
        t3,
        sum: t1 + t2 + t3,
        g_dot_l2,
        mean_h_dot_l2,
        variation_scale: h_dot_l2.max(u_dot_l2).max(g_dot_l2),
    })
}

// ---------------------------------------------------------------------------
// Pair functional (global identity)
// ---------------------------------------------------------------------------

/// Terms of the global pair identity and the hypothesis mismatch norms.
/// All tensors are expressed in the orthonormal frame of the first
/// immersion's metric (the shared metric, up to the reported mismatch).
#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub sum: f64,
    pub max_term: [f64; 4],
    pub g_mismatch_l2: f64,
    pub mean_h_mismatch_l2: f64,
    /// Pointwise max of the sigma2-route pair residual (eq-u-ud form).
    pub sigma2_pair_residual_max: f64,
    pub v_l2: f64,
}

pub fn functional_3_16(
    space: &AmbientSpace,
    imm_a: &Immersion,
    imm_b: &Immersion,
    sol: &WeightSolution,
    grid: &QuadratureGrid,
) -> Result<PairReport> {
    let n = space.dimension() as f64;
    let pts_a = surface_points(space, imm_a, grid)?;
    let pts_b = surface_points(space, imm_b, grid)?;
    let density: Vec<f64> = pts_a
        .iter()
        .enumerate()
        .map(|(idx, pt)| pt.sqrt_det_g / grid.sin_theta_at(idx))
        .collect();

    let [w_lo, w_hi] = sol.domain();
    let mut per_node = Vec::with_capacity(pts_a.len());
    for (a, b) in pts_a.iter().zip(&pts_b) {
        if a.r < w_lo || a.r > w_hi || b.r < w_lo || b.r > w_hi {
            return Err(Error::RadiusRange {
                value: a.r.min(b.r),
                lo: w_lo,
                hi: w_hi,
            });
        }
        per_node.push(pair_node_terms(space, sol, a, b, n)?);
    }

    let t1 = integrate_with(grid, &density, |i| per_node[i].t1);
    let t2 = integrate_with(grid, &density, |i| per_node[i].t2);
    let t3 = integrate_with(grid, &density, |i| per_node[i].t3);
    let t4 = integrate_with(grid, &density, |i| per_node[i].t4);
    let g_mismatch_l2 = integrate_with(grid, &density, |i| per_node[i].g_mismatch_sq).sqrt();
    let mean_h_mismatch_l2 = integrate_with(grid, &density, |i| per_node[i].h_mismatch_sq).sqrt();
    let v_l2 = integrate_with(grid, &density, |i| per_node[i].v_sq).sqrt();
    let sigma2_pair_residual_max = per_node
        .iter()
        .map(|t| t.sigma2_residual.abs())
        .fold(0.0f64, f64::max);

    Ok(PairReport {
        t1,
        t2,
        t3,
        t4,
        sum: t1 + t2 + t3 + t4,
        max_term: [t1.abs(), t2.abs(), t3.abs(), t4.abs()],
        g_mismatch_l2,
        mean_h_mismatch_l2,
        sigma2_pair_residual_max,
        v_l2,
    })
}

fn surface_points(
    space: &AmbientSpace,
    imm: &Immersion,
    grid: &QuadratureGrid,
) -> Result<Vec<PointGeometry>> {
    (0..grid.n_nodes())
        .into_par_iter()
        .map(|idx| {
            let (t, p) = grid.node(idx);
            eval_point(space, imm, t, p)
        })
        .collect()
}

struct PairNodeTerms {
    t1: f64,
    t2: f64,
    t3: f64,
    t4: f64,
    g_mismatch_sq: f64,
    h_mismatch_sq: f64,
    v_sq: f64,
    sigma2_residual: f64,
}

fn pair_node_terms(
    space: &AmbientSpace,
    sol: &WeightSolution,
    a: &PointGeometry,
    b: &PointGeometry,
    n: f64,
) -> Result<PairNodeTerms> {
    // Everything in the frame of a's metric.
    let fr = &a.frame;
    let frame2 = |t: &[[f64; 2]; 2]| {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        acc += fr[i][p] * fr[j][q] * t[p][q];
                    }
                }
                out[i][j] = acc;
            }
        }
        out
    };
    let h_b = frame2(&b.h);
    let g_b = frame2(&b.g);
    let mut v = [[0.0; 2]; 2];
    let mut g_mismatch_sq = 0.0;
    let mut v_sq = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            v[i][j] = h_b[i][j] - a.h_frame[i][j];
            let gdiff = g_b[i][j] - if i == j { 1.0 } else { 0.0 };
            let wgt = if i != j { 2.0 } else { 1.0 };
            g_mismatch_sq += 0.5 * wgt * gdiff * gdiff;
            v_sq += 0.5 * wgt * v[i][j] * v[i][j];
        }
    }
    g_mismatch_sq *= 2.0; // account for symmetric double count
    v_sq *= 2.0;
    let sum_v_sq = v[0][0] * v[0][0] + 2.0 * v[0][1] * v[0][1] + v[1][1] * v[1][1];

    let (w_a, _) = sol.eval(space, a.r)?;
    let (w_b, _) = sol.eval(space, b.r)?;

    // Inner integrals from u(a) to u(b) via the radial substitution
    // ds = (t/f) dt, 16-point Gauss-Legendre.
    let quad = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let (nodes, weights) = crate::sphere::gauss_legendre_cached(16);
        let half = 0.5 * (b.r - a.r);
        let mid = 0.5 * (a.r + b.r);
        let mut acc = 0.0;
        for k in 0..16 {
            let t = mid + half * nodes[k];
            acc += weights[k] * f(t)?;
        }
        Ok(acc * half)
    };
    let ode_defect = quad(&|t| {
        let d = space.eval_radial(t)?;
        let (w, _) = sol.eval(space, t)?;
        let wuu = sol.eval_wuu(space, t)?;
        Ok((wuu + (n - 1.0) * d.big_phi * w) * t / d.f)
    })?;
    let int_w_phi = quad(&|t| {
        let d = space.eval_radial(t)?;
        let (w, _) = sol.eval(space, t)?;
        Ok(w * d.big_phi * t / d.f)
    })?;
    let int_f_phi = quad(&|t| {
        let d = space.eval_radial(t)?;
        Ok(d.big_phi * t)
    })?;

    let t1 = 0.5 * (w_a * b.support_phi + w_b * a.support_phi) * sum_v_sq;

    let u_grad_b = frame_vec2(fr, &b.u_grad);
    let mut uuv = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            uuv += a.u_grad_frame[i] * u_grad_b[j] * v[i][j];
        }
    }
    let t2 = uuv * ode_defect;

    let t3 = n * (n - 1.0) * b.support_phi * (a.f * int_w_phi - w_a * int_f_phi);
    let t4 = n * (n - 1.0) * a.support_phi * (w_b * int_f_phi - b.f * int_w_phi);

    let h_mismatch = b.mean_h - a.mean_h;

    // sigma2-route pair residual (eq-u-ud):
    // n int f Phi ds - Phi(u) grad(u-u~).grad(u+u~) + |grad u~|^2 (Phi(u~)-Phi(u)).
    let grad_ub_sq = u_grad_b[0] * u_grad_b[0] + u_grad_b[1] * u_grad_b[1];
    let ip = a.grad_u_sq - grad_ub_sq;
    let sigma2_residual = n * int_f_phi - a.big_phi * ip + grad_ub_sq * (b.big_phi - a.big_phi);

    Ok(PairNodeTerms {
        t1,
        t2,
        t3,
        t4,
        g_mismatch_sq,
        h_mismatch_sq: h_mismatch * h_mismatch,
        v_sq,
        sigma2_residual,
    })
}

fn frame_vec2(a: &[[f64; 2]; 2], v: &[f64; 2]) -> [f64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

// ---------------------------------------------------------------------------
// sigma2 checks
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct Sigma2Report {
    /// Max of the pointwise maximum-principle residual
    /// `n f Phi u_dot + 2 Phi grad u . grad u_dot + |grad u|^2 Phi_u u_dot`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointwise_residual_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variation_scale: Option<f64>,
    /// Max of the pair residual (eq-u-ud form).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_residual_max: Option<f64>,
    pub phi_phi_u_positive: bool,
}

/// Subject of the sigma2 experiments: a family or a pair.
pub enum Sigma2Subject<'a> {
    Variation(&'a Immersion),
    Pair(&'a Immersion, &'a Immersion, &'a WeightSolution),
}

pub fn sigma2_checks(
    space: &AmbientSpace,
    subject: Sigma2Subject<'_>,
    grid: &QuadratureGrid,
) -> Result<Sigma2Report> {
    let n = space.dimension() as f64;
    // Verify the Theorem hypothesis Phi Phi_u > 0 on the working interval.
    let [lo, hi] = space.interval();
    let mut phi_phi_u_positive = true;
    for k in 0..=256 {
        let r = lo + (hi - lo) * k as f64 / 256.0;
        let d = space.eval_radial(r)?;
        if d.big_phi * d.big_phi_u <= 0.0 {
            phi_phi_u_positive = false;
            break;
        }
    }
    match subject {
        Sigma2Subject::Variation(family) => {
            let data = evaluate_variations(space, family, grid)?;
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for (pt, var) in &data {
                let mut du_dudot = 0.0;
                for i in 0..2 {
                    du_dudot += pt.u_grad_frame[i] * var.u_dot_grad_frame[i];
                }
                let res = n * pt.f * pt.big_phi * var.u_dot
                    + 2.0 * pt.big_phi * du_dudot
                    + pt.grad_u_sq * pt.big_phi_u * var.u_dot;
                worst = worst.max(res.abs());
                scale = scale.max(var.u_dot.abs()).max(du_dudot.abs());
            }
            Ok(Sigma2Report {
                pointwise_residual_max: Some(worst),
                variation_scale: Some(scale),
                pair_residual_max: None,
                phi_phi_u_positive,
            })
        }
        Sigma2Subject::Pair(imm_a, imm_b, sol) => {
            let report = functional_3_16(space, imm_a, imm_b, sol, grid)?;
            Ok(Sigma2Report {
                pointwise_residual_max: None,
                variation_scale: None,
                pair_residual_max: Some(report.sigma2_pair_residual_max),
                phi_phi_u_positive,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Space-form checks
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct SpaceFormReport {
    /// Max over nodes of the linearized-Gauss combination
    /// `h11 hd22 + h22 hd11 - 2 h12 hd12` (variations) or its pair version
    /// with `h + h~` against `v`.
    pub gauss_residual_max: f64,
    /// `int (hd11 hd22 - hd12^2) phi` (variations) or
    /// `int (v11 v22 - v12^2) (f(u~) phi + f(u) phi~)` (pairs).
    pub det_integral: f64,
    /// Max over nodes of `det - bound` where bound is the perturbation
    /// estimate `|residual| |x11| / kappa_min` in the diagonalizing frame.
    pub sign_violation_max: f64,
    /// Max of the reported bound constant `|x11| / kappa_min`.
    pub bound_constant_max: f64,
    pub min_principal_curvature: f64,
    pub variation_scale: f64,
}

pub enum SpaceFormSubject<'a> {
    Variation(&'a Immersion),
    Pair(&'a Immersion, &'a Immersion),
}

pub fn spaceform_checks(
    space: &AmbientSpace,
    subject: SpaceFormSubject<'_>,
    grid: &QuadratureGrid,
) -> Result<SpaceFormReport> {
    // Precondition: the ambient is a space form (Phi == 0).
    let [lo, hi] = space.interval();
    for k in 0..=128 {
        let r = lo + (hi - lo) * k as f64 / 128.0;
        let d = space.eval_radial(r)?;
        if d.big_phi.abs() > 1e-12 {
            return Err(Error::Hypothesis(format!(
                "ambient is not a space form: Phi({r}) = {}",
                d.big_phi
            )));
        }
    }

    match subject {
        SpaceFormSubject::Variation(family) => {
            let data = evaluate_variations(space, family, grid)?;
            let density: Vec<f64> = data
                .iter()
                .enumerate()
                .map(|(idx, (pt, _))| pt.sqrt_det_g / grid.sin_theta_at(idx))
                .collect();
            let mut min_kappa = f64::INFINITY;
            for (pt, _) in &data {
                min_kappa = min_kappa.min(min_eigen2(&pt.h_frame));
            }
            if min_kappa <= 0.0 {
                return Err(Error::Hypothesis(format!(
                    "surface is not strictly convex (min principal curvature {min_kappa})"
                )));
            }
            let mut gauss_residual_max = 0.0f64;
            let mut sign_violation_max = f64::NEG_INFINITY;
            let mut bound_constant_max = 0.0f64;
            let mut scale = 0.0f64;
            for (pt, var) in &data {
                let h = &pt.h_frame;
                let x = &var.h_dot_frame;
                let res = h[0][0] * x[1][1] + h[1][1] * x[0][0] - 2.0 * h[0][1] * x[0][1];
                gauss_residual_max = gauss_residual_max.max(res.abs());
                let det = x[0][0] * x[1][1] - x[0][1] * x[0][1];
                let (c, viol) = sign_bound(h, x, res, det);
                bound_constant_max = bound_constant_max.max(c);
                sign_violation_max = sign_violation_max.max(viol);
                for i in 0..2 {
                    for j in 0..2 {
                        scale = scale.max(x[i][j].abs());
                    }
                }
            }
            let det_integral = integrate_with(grid, &density, |i| {
                let x = &data[i].1.h_dot_frame;
                (x[0][0] * x[1][1] - x[0][1] * x[0][1]) * data[i].0.support_phi
            });
            Ok(SpaceFormReport {
                gauss_residual_max,
                det_integral,
                sign_violation_max,
                bound_constant_max,
                min_principal_curvature: min_kappa,
                variation_scale: scale,
            })
        }
        SpaceFormSubject::Pair(imm_a, imm_b) => {
            let pts_a = surface_points(space, imm_a, grid)?;
            let pts_b = surface_points(space, imm_b, grid)?;
            let density: Vec<f64> = pts_a
                .iter()
                .enumerate()
                .map(|(idx, pt)| pt.sqrt_det_g / grid.sin_theta_at(idx))
                .collect();
            let mut min_kappa = f64::INFINITY;
            let mut gauss_residual_max = 0.0f64;
            let mut sign_violation_max = f64::NEG_INFINITY;
            let mut bound_constant_max = 0.0f64;
            let mut scale = 0.0f64;
            let mut dets = Vec::with_capacity(pts_a.len());
            for (a, b) in pts_a.iter().zip(&pts_b) {
                let fr = &a.frame;
                let mut h_b = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let mut acc = 0.0;
                        for p in 0..2 {
                            for q in 0..2 {
                                acc += fr[i][p] * fr[j][q] * b.h[p][q];
                            }
                        }
                        h_b[i][j] = acc;
                    }
                }
                min_kappa = min_kappa.min(min_eigen2(&a.h_frame)).min(min_eigen2(&h_b));
                let mut v = [[0.0; 2]; 2];
                let mut hs = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        v[i][j] = h_b[i][j] - a.h_frame[i][j];
                        hs[i][j] = h_b[i][j] + a.h_frame[i][j];
                        scale = scale.max(v[i][j].abs());
                    }
                }
                let res = hs[0][0] * v[1][1] + hs[1][1] * v[0][0] - 2.0 * hs[0][1] * v[0][1];
                gauss_residual_max = gauss_residual_max.max(res.abs());
                let det = v[0][0] * v[1][1] - v[0][1] * v[0][1];
                let (c, viol) = sign_bound(&hs, &v, res, det);
                bound_constant_max = bound_constant_max.max(c);
                sign_violation_max = sign_violation_max.max(viol);
                let (w_a, w_b) = (space.eval_radial(a.r)?.f, space.eval_radial(b.r)?.f);
                dets.push(det * (w_b * a.support_phi + w_a * b.support_phi));
            }
            if min_kappa <= 0.0 {
                return Err(Error::Hypothesis(format!(
                    "surface is not strictly convex (min principal curvature {min_kappa})"
                )));
            }
            let det_integral = integrate_with(grid, &density, |i| dets[i]);
            Ok(SpaceFormReport {
                gauss_residual_max,
                det_integral,
                sign_violation_max,
                bound_constant_max,
                min_principal_curvature: min_kappa,
                variation_scale: scale,
            })
        }
    }
}

fn min_eigen2(m: &[[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    tr / 2.0 - disc
}

/// Perturbation bound for the space-form sign property: in the frame that
/// diagonalizes `h` (eigenvalues kappa1 <= kappa2), the linearized Gauss
/// relation gives `det x <= |res| |x'_11| / kappa`, so
/// `det x - bound <= 0` up to roundoff. Returns `(bound constant, det - bound)`.
fn sign_bound(h: &[[f64; 2]; 2], x: &[[f64; 2]; 2], res: f64, det: f64) -> (f64, f64) {
    // Rotation diagonalizing the symmetric 2x2 h.
    let half_angle = 0.5 * (2.0 * h[0][1]).atan2(h[0][0] - h[1][1]);
    let (s, c) = half_angle.sin_cos();
    // x'_11 = c^2 x11 + 2 s c x12 + s^2 x22 in the rotated frame.
    let x11 = c * c * x[0][0] + 2.0 * s * c * x[0][1] + s * s * x[1][1];
    let kappa_min = min_eigen2(h);
    let constant = x11.abs() / kappa_min;
    (constant, det - res.abs() * constant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::Preset;
    use crate::sphere::{HarmonicTerm, Rotation};
    use crate::weight;

    fn tiny_perturbed(b: f64, eps: f64) -> SurfaceSpec {
        SurfaceSpec::new(
            b,
            vec![
                HarmonicTerm { l: 2, m: 1, c: eps },
                HarmonicTerm {
                    l: 3,
                    m: -2,
                    c: 0.7 * eps,
                },
            ],
            Rotation::identity(),
        )
        .unwrap()
    }

    #[test]
    fn basis_dimension_and_rotation_columns() {
        assert_eq!(DeformationBasis::new(2).unwrap().dimension(), 25);
        let basis = DeformationBasis::new(3).unwrap();
        assert_eq!(basis.dimension(), 16 + 2 * 15);
        for (k, &col) in basis.rotation_columns.iter().enumerate() {
            match &basis.fields[col] {
                DeformationField::HarmonicRotation { l: 1, m } => {
                    assert_eq!(*m, k as i32 - 1);
                }
                other => panic!("unexpected field {other:?}"),
            }
        }
    }

    #[test]
    fn rotation_columns_vanish_and_kernel_is_three_in_schwarzschild() {
        let space = AmbientSpace::new(Preset::Schwarzschild { mass: 0.5 }, [1.05, 6.0], 2).unwrap();
        let spec = SurfaceSpec::new(
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
        .unwrap();
        let grid = QuadratureGrid::build(16, 32).unwrap();
        let basis = DeformationBasis::new(3).unwrap();
        let op = assemble_operator(
            &space,
            &Immersion::graph(spec),
            &basis,
            &grid,
            OperatorMode::MeanCurvature,
        )
        .unwrap();
        // Killing containment: rotation columns are zero columns.
        let sigma_max_proxy = op.matrix.norm();
        for &col in &basis.rotation_columns {
            let norm = op.matrix.column(col).norm();
            assert!(
                norm <= 1e-10 * sigma_max_proxy,
                "rotation column {col} has norm {norm}"
            );
        }
        let report = kernel_spectrum(&space, &op, &basis, &grid, 1e-8, 1e3, None).unwrap();
        assert_eq!(report.kernel_dimension, Some(3), "sv tail: {:?}", {
            let k = report.singular_values.len();
            &report.singular_values[k.saturating_sub(6)..]
        });
        assert!(report.spectral_gap.unwrap() >= 1e3);
        for angle in &report.principal_angles_rotation {
            assert!(*angle <= 1e-6, "principal angle {angle}");
        }
        for kv in &report.kernel_vectors {
            assert!(kv.h_dot_l2 <= 1e-8, "kernel h_dot {}", kv.h_dot_l2);
            assert!(kv.u_dot_l2 <= 1e-8, "kernel u_dot {}", kv.u_dot_l2);
        }
        // Mass breaks translations.
        for t in report.translation_image_norms {
            assert!(t > 1e-3, "translation image norm {t}");
        }
    }

    #[test]
    fn euclidean_kernel_is_six() {
        // Translation fields live in the basis span only up to the analytic
        // tail of their (a, W) decomposition; the perturbation is sized so
        // the degree-(>4) tail sits far below tau * sigma_max.
        let space = AmbientSpace::new(Preset::euclidean(), [0.4, 4.0], 2).unwrap();
        let spec = tiny_perturbed(1.5, 1e-5);
        let grid = QuadratureGrid::build(16, 32).unwrap();
        let basis = DeformationBasis::new(4).unwrap();
        let op = assemble_operator(
            &space,
            &Immersion::graph(spec),
            &basis,
            &grid,
            OperatorMode::MeanCurvature,
        )
        .unwrap();
        let report = kernel_spectrum(&space, &op, &basis, &grid, 1e-8, 1e3, None).unwrap();
        assert_eq!(report.kernel_dimension, Some(6), "sv tail: {:?}", {
            let k = report.singular_values.len();
            &report.singular_values[k.saturating_sub(9)..]
        });
        for t in report.translation_image_norms {
            assert!(t <= 1e-10, "translation image norm {t}");
        }
    }

    #[test]
    fn functional_vanishes_on_killing_fields() {
        let space = AmbientSpace::new(Preset::Schwarzschild { mass: 0.1 }, [0.5, 6.0], 2).unwrap();
        let spec = SurfaceSpec::new(
            2.0,
            vec![HarmonicTerm {
                l: 2,
                m: 2,
                c: 0.08,
            }],
            Rotation::identity(),
        )
        .unwrap();
        let grid = QuadratureGrid::build(12, 24).unwrap();
        let sol = weight::from_static_potential(&space, 0.5, 6.0).unwrap();
        let f = functional_1_19(
            &space,
            &spec,
            &DeformationField::HarmonicRotation { l: 1, m: 0 },
            &sol,
            &grid,
        )
        .unwrap();
        assert!(f.t1.abs() <= 1e-10, "t1 = {}", f.t1);
        assert!(f.t2.abs() <= 1e-10, "t2 = {}", f.t2);
        assert!(f.t3.abs() <= 1e-10, "t3 = {}", f.t3);
    }

    #[test]
    fn pair_identity_on_rotation_pairs() {
        let space = AmbientSpace::new(Preset::Schwarzschild { mass: 0.5 }, [1.05, 6.0], 2).unwrap();
        let spec = SurfaceSpec::new(
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
        .unwrap();
        let grid = QuadratureGrid::build(16, 32).unwrap();
        let sol = weight::solve_weight(
            &space,
            1.05,
            6.0,
            weight::WeightIc::Auto,
            weight::Direction::Forward,
        )
        .unwrap();
        let imm_a = Immersion::graph(spec.clone());
        let rot = Rotation::from_axis_angle([0.0, 0.0, 1.0], 0.8).unwrap();
        let imm_b = Immersion::RotatedImage {
            spec,
            rotation: rot,
        };
        let report = functional_3_16(&space, &imm_a, &imm_b, &sol, &grid).unwrap();
        for (k, t) in report.max_term.iter().enumerate() {
            assert!(*t <= 1e-10, "term {k} = {t}");
        }
        assert!(
            report.g_mismatch_l2 <= 1e-12,
            "g mismatch {}",
            report.g_mismatch_l2
        );
        assert!(
            report.mean_h_mismatch_l2 <= 1e-12,
            "H mismatch {}",
            report.mean_h_mismatch_l2
        );
        assert!(report.sigma2_pair_residual_max <= 1e-10);
        // Identical pair: exactly zero.
        let same = functional_3_16(&space, &imm_a, &imm_a, &sol, &grid).unwrap();
        assert!(same.sum.abs() <= 1e-14);
    }

    #[test]
    fn spaceform_checks_on_killing_variation() {
        let space = AmbientSpace::new(Preset::euclidean(), [0.4, 4.0], 2).unwrap();
        let spec = tiny_perturbed(1.5, 1e-2);
        let grid = QuadratureGrid::build(12, 24).unwrap();
        let family = Immersion::Deformed {
            base: spec,
            field: DeformationField::SpaceFormTranslation {
                direction: [0.3, -0.5, 0.8],
            },
        };
        let report = spaceform_checks(&space, SpaceFormSubject::Variation(&family), &grid).unwrap();
        assert!(report.gauss_residual_max <= 1e-10);
        assert!(report.det_integral.abs() <= 1e-10);
        assert!(report.min_principal_curvature > 0.0);
        // Non-space-form ambient is rejected.
        let schw = AmbientSpace::new(Preset::Schwarzschild { mass: 0.1 }, [0.5, 6.0], 2).unwrap();
        let family2 = Immersion::Deformed {
            base: tiny_perturbed(2.0, 1e-2),
            field: DeformationField::HarmonicRotation { l: 1, m: 0 },
        };
        assert!(matches!(
            spaceform_checks(&schw, SpaceFormSubject::Variation(&family2), &grid),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn sigma2_mode_kernel_in_cubic_warp() {
        let space = AmbientSpace::new(Preset::CubicWarp, [0.4, 2.2], 2).unwrap();
        let spec = SurfaceSpec::new(
            1.0,
            vec![
                HarmonicTerm {
                    l: 2,
                    m: 2,
                    c: 0.05,
                },
                HarmonicTerm {
                    l: 3,
                    m: 1,
                    c: 0.04,
                },
            ],
            Rotation::identity(),
        )
        .unwrap();
        let grid = QuadratureGrid::build(16, 32).unwrap();
        let basis = DeformationBasis::new(3).unwrap();
        let op = assemble_operator(
            &space,
            &Immersion::graph(spec.clone()),
            &basis,
            &grid,
            OperatorMode::Sigma2,
        )
        .unwrap();
        let report = kernel_spectrum(&space, &op, &basis, &grid, 1e-8, 1e3, None).unwrap();
        assert_eq!(report.kernel_dimension, Some(3), "sv tail: {:?}", {
            let k = report.singular_values.len();
            &report.singular_values[k.saturating_sub(6)..]
        });
        // Rotation pair residual of (eq-u-ud) vanishes.
        let rot = Rotation::from_axis_angle([0.0, 0.0, 1.0], 0.45).unwrap();
        let sol = weight::solve_weight(
            &space,
            0.4,
            2.2,
            weight::WeightIc::Auto,
            weight::Direction::Forward,
        )
        .unwrap();
        let imm_a = Immersion::graph(spec.clone());
        let imm_b = Immersion::RotatedImage {
            spec,
            rotation: rot,
        };
        let s2 = sigma2_checks(&space, Sigma2Subject::Pair(&imm_a, &imm_b, &sol), &grid).unwrap();
        assert!(s2.phi_phi_u_positive);
        assert!(s2.pair_residual_max.unwrap() <= 1e-10);
    }

    #[test]
    fn row_scaling_invariance() {
        // Scaling the curvature rows must not change the kernel dimension.
        let space = AmbientSpace::new(Preset::euclidean(), [0.4, 4.0], 2).unwrap();
        let spec = tiny_perturbed(1.5, 1e-3);
        let grid = QuadratureGrid::build(12, 24).unwrap();
        let basis = DeformationBasis::new(2).unwrap();
        let mut op = assemble_operator(
            &space,
            &Immersion::graph(spec),
            &basis,
            &grid,
            OperatorMode::MeanCurvature,
        )
        .unwrap();
        let before = kernel_spectrum(&space, &op, &basis, &grid, 1e-8, 1e3, None).unwrap();
        for idx in 0..grid.n_nodes() {
            let row = 4 * idx + 3;
            for j in 0..basis.dimension() {
                op.matrix[(row, j)] *= 10.0;
            }
        }
        let after = kernel_spectrum(&space, &op, &basis, &grid, 1e-8, 1e3, None).unwrap();
        assert_eq!(before.kernel_dimension, after.kernel_dimension);
        for (a, b) in before
            .principal_angles_rotation
            .iter()
            .zip(&after.principal_angles_rotation)
        {
            assert!((a - b).abs() < 1e-8, "angle moved: {a} -> {b}");
        }
    }
}
