//! In-plane drill rotations `Q = rodrigues(α, n0)` acting on a reference
//! surface: integrability defect, its decomposition in the rotated tangent
//! frame, obstruction and rigidity checks, and the associate family.

use rayon::prelude::*;
use serde::Serialize;

use crate::compat::{
    curl_residual, integrate_path, max_distance, max_distance_aligned, pair_rotation_extract,
    CompatReport, PairTolerance, PathOrder, Tangents,
};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::grid::{
    fd_derivative, sample_surface, stencil_weights, BoundaryMask, CsvValue, Dir, DomainGrid, Field,
    SurfaceBundle,
};
use crate::rotalg::{
    angle_about_axis, nearest_branch, rodrigues_unchecked, Mat2, Mat3, Rotation, Vec3,
};
use crate::scalar::Real;
use crate::surface::{
    drill_shape_matrix, fundamental_forms, gauss_map_metric, tangent_frame, SurfaceJet,
    SurfaceSpec,
};

/// Smallest node count per direction for residual diagnostics.
pub const MIN_DRILL_NODES: usize = 5;
/// Default classification threshold.
pub const CLASSIFY_TOL: f64 = 1e-6;

/// Drill angle field over a sampled reference surface.
#[derive(Debug, Clone)]
pub struct DrillField<'a, T> {
    pub surface: &'a SurfaceBundle<T>,
    pub alpha: Field<T, T>,
    exact_gradient: Option<(Field<T, T>, Field<T, T>)>,
}

impl<'a, T: Real> DrillField<'a, T> {
    pub fn new(surface: &'a SurfaceBundle<T>, alpha: Field<T, T>) -> Result<Self> {
        alpha.check_same_grid(&surface.jets)?;
        if let Some(k) = alpha.values().iter().position(|a| !a.is_finite()) {
            return Err(Error::Format(format!("non-finite drill angle at node {k}")));
        }
        Ok(Self {
            surface,
            alpha,
            exact_gradient: None,
        })
    }

    pub fn constant(surface: &'a SurfaceBundle<T>, alpha: T) -> Result<Self> {
        let zero = Field::constant(*surface.grid(), T::zero());
        let mut df = Self::new(surface, Field::constant(*surface.grid(), alpha))?;
        df.exact_gradient = Some((zero.clone(), zero));
        Ok(df)
    }

    /// Samples `α(x1, x2)` and keeps its exact gradient.
    pub fn from_expr(surface: &'a SurfaceBundle<T>, alpha: &Expr) -> Result<Self> {
        let g = *surface.grid();
        let (d1, d2) = (alpha.diff(Var::X1), alpha.diff(Var::X2));
        let mut df = Self::new(surface, Field::from_fn(g, |x1, x2| alpha.eval(x1, x2)))?;
        df.exact_gradient = Some((
            Field::from_fn(g, |x1, x2| d1.eval(x1, x2)),
            Field::from_fn(g, |x1, x2| d2.eval(x1, x2)),
        ));
        Ok(df)
    }

    pub fn grid(&self) -> &DomainGrid<T> {
        self.surface.grid()
    }

    /// `(∂1α, ∂2α)`: exact when known, finite differences otherwise.
    pub fn gradient(&self) -> Result<(Field<T, T>, Field<T, T>)> {
        match &self.exact_gradient {
            Some(g) => Ok(g.clone()),
            None => Ok((
                fd_derivative(&self.alpha, Dir::X1)?,
                fd_derivative(&self.alpha, Dir::X2)?,
            )),
        }
    }
}

/// `Q = (1 − cos α) n0⊗n0 + cos α Id + sin α Anti(n0)` at every node.
pub fn build_drill_rotation<T: Real>(df: &DrillField<'_, T>) -> Field<T, Rotation<T>> {
    let jets = df.surface.jets.values();
    let alpha = df.alpha.values();
    Field::from_index_fn(*df.grid(), |k| rodrigues_unchecked(alpha[k], jets[k].n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// Finite rotations.
    Exact,
    /// First order in `α`.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    RigidIdentity,
    Flipped,
    ConstantAngleMinimal,
    Obstructed,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RigidIdentity => "rigid_identity",
            Self::Flipped => "flipped",
            Self::ConstantAngleMinimal => "constant_angle_minimal",
            Self::Obstructed => "obstructed",
        }
    }
}

/// Residual coefficients in the frame `(X_α, Y_α, n0)`:
/// `r = c1·X_α + c2·Y_α − cn·n0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(bound = "T: Real")]
pub struct FrameCoeffs<T> {
    pub c1: T,
    pub c2: T,
    pub cn: T,
}

impl<T: Real> CsvValue<T> for FrameCoeffs<T> {
    fn columns() -> Vec<String> {
        vec!["c1".into(), "c2".into(), "cn".into()]
    }

    fn push_components(&self, out: &mut Vec<T>) {
        out.extend([self.c1, self.c2, self.cn]);
    }

    fn from_components(c: &[T]) -> Result<Self> {
        Ok(Self {
            c1: c[0],
            c2: c[1],
            cn: c[2],
        })
    }
}

/// Classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct ClassifyTol<T> {
    pub sin: T,
    pub grad: T,
    pub mean_curvature: T,
}

impl<T: Real> ClassifyTol<T> {
    pub fn uniform(t: T) -> Self {
        Self {
            sin: t,
            grad: t,
            mean_curvature: t,
        }
    }
}

impl<T: Real> Default for ClassifyTol<T> {
    fn default() -> Self {
        Self::uniform(T::tol(CLASSIFY_TOL))
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct DrillDiagnostics<T> {
    pub mode: ResidualMode,
    #[serde(skip)]
    pub residual: Field<T, Vec3<T>>,
    #[serde(skip)]
    pub coeffs: Field<T, FrameCoeffs<T>>,
    #[serde(skip)]
    pub mean_curvature: Field<T, T>,
    pub residual_linf: T,
    pub residual_linf_interior: T,
    pub grad_alpha_norm: T,
    pub max_abs_sin: T,
    pub max_abs_mean_curvature: T,
    /// `max ‖r − (c1 X + c2 Y − cn n0)‖`.
    pub reconstruction_defect: T,
    pub classification: Classification,
    /// `max ‖Q − Id‖` over the clamped boundary nodes.
    pub boundary_defect: Option<T>,
    pub tolerances: ClassifyTol<T>,
}

/// Drill fields `a_i = (Q − Id)∂i y0` (exact) or `α n0 × ∂i y0`
/// (linearized). The residual `∂2a1 − ∂1a2` equals the integrability defect
/// of `Q∇y0` because `∂2∂1y0 = ∂1∂2y0` holds exactly.
fn drill_columns<T: Real>(df: &DrillField<'_, T>, mode: ResidualMode) -> (Field<T, Vec3<T>>, Field<T, Vec3<T>>) {
    let jets = &df.surface.jets;
    let col = |pick: fn(&SurfaceJet<T>) -> Vec3<T>| {
        jets.zip_map(&df.alpha, |j, &a| {
            let d = pick(j);
            let nd = j.n.cross(d);
            match mode {
                ResidualMode::Exact => {
                    let (s, c) = a.sin_cos();
                    d * (c - T::one()) + nd * s
                }
                ResidualMode::Linearized => nd * a,
            }
        })
        .expect("same grid")
    };
    (col(|j| j.d1), col(|j| j.d2))
}

fn solve_frame<T: Real>(x: Vec3<T>, y: Vec3<T>, n: Vec3<T>, r: Vec3<T>, node: usize) -> Result<FrameCoeffs<T>> {
    let m = Mat3::from_cols(x, y, n);
    let scale = x.norm() * y.norm();
    if !(m.det().abs() > T::tol(1e-12) * scale) {
        return Err(Error::FrameDegenerate { node });
    }
    let c = m.inverse().ok_or(Error::FrameDegenerate { node })? * r;
    Ok(FrameCoeffs {
        c1: c.x,
        c2: c.y,
        cn: -c.z,
    })
}

pub fn drill_residual<T: Real>(df: &DrillField<'_, T>, mode: ResidualMode) -> Result<DrillDiagnostics<T>> {
    drill_residual_with(df, mode, ClassifyTol::default(), None)
}

pub fn drill_residual_with<T: Real>(
    df: &DrillField<'_, T>,
    mode: ResidualMode,
    tol: ClassifyTol<T>,
    mask: Option<&BoundaryMask>,
) -> Result<DrillDiagnostics<T>> {
    let g = *df.grid();
    for n in [g.n1(), g.n2()] {
        if n < MIN_DRILL_NODES {
            return Err(Error::GridTooSmall {
                n,
                min: MIN_DRILL_NODES,
            });
        }
    }
    let (a1, a2) = drill_columns(df, mode);
    let residual = fd_derivative(&a1, Dir::X2)?.try_sub(&fd_derivative(&a2, Dir::X1)?)?;
    let jets = df.surface.jets.values();
    let alpha = df.alpha.values();
    let coeffs: Vec<Result<(FrameCoeffs<T>, T)>> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let j = &jets[k];
            let frame_angle = match mode {
                ResidualMode::Exact => alpha[k],
                ResidualMode::Linearized => T::zero(),
            };
            let (x, y) = tangent_frame(j, frame_angle);
            let r = residual.values()[k];
            let c = solve_frame(x, y, j.n, r, k)?;
            let back = x * c.c1 + y * c.c2 - j.n * c.cn;
            Ok((c, (back - r).norm()))
        })
        .collect();
    let mut cs = Vec::with_capacity(g.len());
    let mut reconstruction_defect = T::zero();
    for c in coeffs {
        let (c, d) = c?;
        cs.push(c);
        reconstruction_defect = reconstruction_defect.max(d);
    }
    let (g1, g2) = df.gradient()?;
    let grad_alpha_norm = g1
        .values()
        .iter()
        .zip(g2.values())
        .fold(T::zero(), |m, (a, b)| m.max(a.hypot(*b)));
    let max_abs_sin = alpha.iter().fold(T::zero(), |m, a| m.max(a.sin().abs()));
    let max_cos_gap = alpha
        .iter()
        .fold(T::zero(), |m, a| m.max((a.cos() + T::one()).abs()));
    let min_cos = alpha.iter().fold(T::one(), |m, a| m.min(a.cos()));
    let mean_curvature = df.surface.mean_curvature.clone();
    let max_abs_h = mean_curvature
        .values()
        .iter()
        .fold(T::zero(), |m, h| m.max(h.abs()));
    let classification = if grad_alpha_norm <= tol.grad && max_abs_sin <= tol.sin && min_cos > T::zero() {
        Classification::RigidIdentity
    } else if max_cos_gap <= tol.sin {
        Classification::Flipped
    } else if grad_alpha_norm <= tol.grad && max_abs_h <= tol.mean_curvature {
        Classification::ConstantAngleMinimal
    } else {
        Classification::Obstructed
    };
    let residual_linf = residual.values().iter().fold(T::zero(), |m, r| m.max(r.norm()));
    let residual_linf_interior = g
        .interior()
        .fold(T::zero(), |m, k| m.max(residual.values()[k].norm()));
    let boundary_defect = mask.map(|mask| {
        let q = build_drill_rotation(df);
        mask.gamma_nodes()
            .into_iter()
            .fold(T::zero(), |m, k| m.max((*q.values()[k].matrix() - Mat3::identity()).norm()))
    });
    Ok(DrillDiagnostics {
        mode,
        coeffs: Field::from_values(g, cs)?,
        residual,
        mean_curvature,
        residual_linf,
        residual_linf_interior,
        grad_alpha_norm,
        max_abs_sin,
        max_abs_mean_curvature: max_abs_h,
        reconstruction_defect,
        classification,
        boundary_defect,
        tolerances: tol,
    })
}

/// Closed-form integrability defect
/// `∂1α X_α + ∂2α Y_α − sin α (∂1n0×∂2y0 − ∂2n0×∂1y0)` at one point.
pub fn analytic_residual<T: Real>(j: &SurfaceJet<T>, alpha: T, grad: (T, T)) -> Vec3<T> {
    let (x, y) = tangent_frame(j, alpha);
    let (a, b) = j.normal_twist_vectors();
    x * grad.0 + y * grad.1 - (a - b) * alpha.sin()
}

/// Linearized counterpart of [`analytic_residual`].
pub fn analytic_residual_linear<T: Real>(j: &SurfaceJet<T>, alpha: T, grad: (T, T)) -> Vec3<T> {
    let (x, y) = tangent_frame(j, T::zero());
    let (a, b) = j.normal_twist_vectors();
    x * grad.0 + y * grad.1 - (a - b) * alpha
}

/// Pointwise test of the dichotomy `sin α = 0 or H = 0` (or `α = 0 or
/// H = 0` linearized) under the hypothesis that the residual vanishes.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct ObstructionReport<T> {
    pub mode: ResidualMode,
    pub nodes: usize,
    /// Nodes where `min(|sin α|, |H|)` exceeds the tolerance.
    pub violations: usize,
    /// Largest normal residual `|2 sin α · H · ‖∂1y0×∂2y0‖|`; no choice of
    /// `∇α` can cancel it.
    pub certified_defect: T,
    /// Largest closed-form residual of the given field.
    pub analytic_residual_linf: T,
    /// Nodes where the closed-form residual vanishes although the dichotomy
    /// fails; zero unless the geometry is inconsistent.
    pub contradictions: usize,
    /// `max ‖skew(sin α [∇y0]ᵀ Anti(n0) ∇n0)‖`.
    pub sff_asymmetry: T,
    pub tolerance: T,
    pub impossible: bool,
}

pub fn obstruction_report<T: Real>(df: &DrillField<'_, T>, mode: ResidualMode, tol: T) -> Result<ObstructionReport<T>> {
    let (g1, g2) = df.gradient()?;
    let jets = df.surface.jets.values();
    let h = df.surface.mean_curvature.values();
    let alpha = df.alpha.values();
    let per: Vec<(bool, T, T, bool, T)> = (0..jets.len())
        .into_par_iter()
        .map(|k| {
            let j = &jets[k];
            let a = alpha[k];
            let grad = (g1.values()[k], g2.values()[k]);
            let (s, r) = match mode {
                ResidualMode::Exact => (a.sin(), analytic_residual(j, a, grad)),
                ResidualMode::Linearized => (a, analytic_residual_linear(j, a, grad)),
            };
            let violated = s.abs().min(h[k].abs()) > tol;
            let normal = (T::lit(2.0) * s * h[k] * j.area_element()).abs();
            let rn = r.norm();
            let asym = drill_shape_matrix(j).skew().scale(s).norm();
            (violated, normal, rn, violated && rn <= tol, asym)
        })
        .collect();
    let violations = per.iter().filter(|p| p.0).count();
    let fold = |f: fn(&(bool, T, T, bool, T)) -> T| per.iter().fold(T::zero(), |m, p| m.max(f(p)));
    Ok(ObstructionReport {
        mode,
        nodes: per.len(),
        violations,
        certified_defect: fold(|p| p.1),
        analytic_residual_linf: fold(|p| p.2),
        contradictions: per.iter().filter(|p| p.3).count(),
        sff_asymmetry: fold(|p| p.4),
        tolerance: tol,
        impossible: violations > 0,
    })
}

/// Boundary behaviour of a rotation field on the clamped part.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryLemmaReport<T> {
    /// `max ‖Q − Id‖` over the clamped nodes.
    pub defect: T,
    /// `max ‖∂t m − Q ∂t y0‖ / ‖∂t y0‖` along the clamped edges.
    pub consistency_defect: T,
    /// `max ‖m − y0‖` over the clamped nodes.
    pub placement_defect: T,
    /// `max ‖Q n0 − n0‖` over the clamped nodes.
    pub axis_defect: T,
    pub preconditions_hold: bool,
    pub tolerance: T,
}

/// Checks that a rotation field which fixes `n0` and maps `∇y0` to `∇m`
/// reduces to the identity where `m = y0`.
pub fn boundary_lemma_check<T: Real>(
    m: &Field<T, Vec3<T>>,
    y0: &SurfaceBundle<T>,
    q: &Field<T, Rotation<T>>,
    mask: &BoundaryMask,
    tol: T,
) -> Result<BoundaryLemmaReport<T>> {
    m.check_same_grid(&y0.jets)?;
    q.check_same_grid(&y0.jets)?;
    let g = *y0.grid();
    if !mask.matches(&g) {
        return Err(Error::GridMismatch);
    }
    let jets = y0.jets.values();
    let tangents = Tangents::from_positions(m)?;
    let reference = Tangents::from_positions(&y0.positions())?;
    let mut report = BoundaryLemmaReport {
        defect: T::zero(),
        consistency_defect: T::zero(),
        placement_defect: T::zero(),
        axis_defect: T::zero(),
        preconditions_hold: true,
        tolerance: tol,
    };
    for k in mask.gamma_nodes() {
        let (i, j) = g.ij(k);
        let qk = q.values()[k];
        let jet = &jets[k];
        report.defect = report.defect.max((*qk.matrix() - Mat3::identity()).norm());
        report.placement_defect = report.placement_defect.max((m.values()[k] - jet.y).norm());
        report.axis_defect = report.axis_defect.max((qk.apply(jet.n) - jet.n).norm());
        // edge tangents: x2 along vertical edges, x1 along horizontal edges
        let along_x2 = i == 0 || i == g.n1() - 1;
        let along_x1 = j == 0 || j == g.n2() - 1;
        let mut check = |dm: Vec3<T>, dy: Vec3<T>| {
            let d = (dm - qk.apply(dy)).norm() / dy.norm();
            report.consistency_defect = report.consistency_defect.max(d);
        };
        if along_x2 {
            check(tangents.d2.values()[k], reference.d2.values()[k]);
        }
        if along_x1 {
            check(tangents.d1.values()[k], reference.d1.values()[k]);
        }
    }
    report.preconditions_hold = report.placement_defect <= tol && report.axis_defect <= tol;
    Ok(report)
}

/// `max ‖A‖` over the clamped nodes for an infinitesimal rotation field.
pub fn boundary_lemma_check_linear<T: Real>(a: &Field<T, Mat3<T>>, mask: &BoundaryMask) -> Result<T> {
    if !mask.matches(a.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(mask
        .gamma_nodes()
        .into_iter()
        .fold(T::zero(), |m, k| m.max(a.values()[k].norm())))
}

/// `α Anti(n0)` at every node.
pub fn infinitesimal_rotation<T: Real>(df: &DrillField<'_, T>) -> Field<T, Mat3<T>> {
    df.surface
        .jets
        .zip_map(&df.alpha, |j, &a| crate::rotalg::anti(j.n).scale(a))
        .expect("same grid")
}

/// Largest distance between two nodes of a position field.
pub fn diameter<T: Real>(y: &Field<T, Vec3<T>>) -> T {
    let v = y.values();
    (0..v.len())
        .into_par_iter()
        .map(|i| v[i + 1..].iter().fold(T::zero(), |m, w| m.max((v[i] - *w).norm())))
        .reduce(T::zero, T::max)
}

/// Reconstruction of `m` with `∇m = Q∇y0` and `m = y0` at the anchor, and
/// its distance to `y0`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct RigidityReport<T> {
    pub compat: CompatReport<T>,
    #[serde(skip)]
    pub m: Field<T, Vec3<T>>,
    pub anchor: usize,
    /// `max ‖m − y0‖`.
    pub deviation: T,
    /// `max ‖m + b − y0‖` for the mean offset `b`.
    pub aligned_deviation: T,
    pub path_discrepancy: T,
    /// `max |α|` on the clamped boundary, when one is given.
    pub alpha_on_gamma: Option<T>,
    pub h: T,
    pub diameter: T,
    /// `10·h²·diam`.
    pub bound: T,
    pub rigid: bool,
}

pub fn rigidity_certificate<T: Real>(
    y0: &SurfaceBundle<T>,
    df: &DrillField<'_, T>,
    mask: Option<&BoundaryMask>,
) -> Result<RigidityReport<T>> {
    let g = *y0.grid();
    df.alpha.check_same_grid(&y0.jets)?;
    if let Some(mask) = mask {
        if !mask.matches(&g) {
            return Err(Error::GridMismatch);
        }
    }
    // m = y0 + u with ∇u = (Q − Id)∇y0, so α ≡ 0 reconstructs y0 exactly
    let (v, w) = drill_columns(df, ResidualMode::Exact);
    let compat = curl_residual(&v, &w)?;
    if !compat.is_compatible {
        return Err(Error::Incompatible {
            residual_linf: compat.residual_linf.as_f64(),
            tolerance: compat.tolerance.as_f64(),
        });
    }
    let anchor = mask.and_then(|m| m.gamma_nodes().first().copied()).unwrap_or(0);
    let y = y0.positions();
    let u = integrate_path(&v, &w, anchor, Vec3::zero(), PathOrder::X1First)?;
    let u_alt = integrate_path(&v, &w, anchor, Vec3::zero(), PathOrder::X2First)?;
    let m = y.try_add(&u)?;
    let alpha_on_gamma = mask.map(|mask| {
        mask.gamma_nodes()
            .into_iter()
            .fold(T::zero(), |mx, k| mx.max(df.alpha.values()[k].abs()))
    });
    let h = g.h1().max(g.h2());
    let diameter = diameter(&y);
    let bound = T::lit(10.0) * h * h * diameter;
    let deviation = max_distance(&m, &y);
    Ok(RigidityReport {
        compat,
        anchor,
        deviation,
        aligned_deviation: max_distance_aligned(&m, &y),
        path_discrepancy: max_distance(&u, &u_alt),
        alpha_on_gamma,
        h,
        diameter,
        bound,
        rigid: deviation <= bound,
        m,
    })
}

/// Drill angle of every node of a rotation field about `n0`, continued
/// from `seed` at `anchor` along its row and then along every column.
pub fn angle_field<T: Real>(
    q: &Field<T, Rotation<T>>,
    normals: &Field<T, Vec3<T>>,
    anchor: usize,
    seed: T,
) -> Result<Field<T, T>> {
    q.check_same_grid(normals)?;
    let g = *q.grid();
    let (ia, ja) = g.ij(anchor);
    let at = |k: usize, hint: T| angle_about_axis(q.values()[k].matrix(), normals.values()[k], hint).alpha;
    let mut out = vec![T::zero(); g.len()];
    out[anchor] = at(anchor, seed);
    for i in ia + 1..g.n1() {
        out[g.index(i, ja)] = at(g.index(i, ja), out[g.index(i - 1, ja)]);
    }
    for i in (0..ia).rev() {
        out[g.index(i, ja)] = at(g.index(i, ja), out[g.index(i + 1, ja)]);
    }
    for i in 0..g.n1() {
        for j in ja + 1..g.n2() {
            out[g.index(i, j)] = at(g.index(i, j), out[g.index(i, j - 1)]);
        }
        for j in (0..ja).rev() {
            out[g.index(i, j)] = at(g.index(i, j), out[g.index(i, j + 1)]);
        }
    }
    Field::from_values(g, out)
}

/// Checks of the catenoid-to-`X^θ` isometric deformation.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct AssociateReport<T> {
    pub theta: T,
    /// `max ‖∇X^θ − Q^θ ∇X^cat‖`.
    pub gradient_defect: T,
    /// `max ‖n^θ − n^cat‖`.
    pub normal_defect: T,
    /// `max ‖I_{X^θ} − cosh²x1 Id‖`.
    pub metric_defect: T,
    /// `max ‖∇nᵀ∇n − Id / cosh²x1‖`.
    pub gauss_metric_defect: T,
    /// Mean extracted drill angle, on the branch nearest `−θ`.
    pub drill_angle: T,
    /// `max |α − (−θ)|` with `α` extracted from the pair `(X^θ, X^cat)`.
    pub angle_defect: T,
    /// `max |(Q^θ e3)_3 − (cos θ + cosh²x1 − 1)/cosh²x1|`.
    pub e3_entry_defect: T,
    /// `max ‖[∇X^cat]ᵀ∇X^θ − cosh²x1 R(θ)ᵀ‖`.
    pub cross_gradient_defect: T,
    /// `max ‖skew([∇X^cat]ᵀ∇X^θ)‖`; positive unless `θ ∈ {0, π}`.
    pub cross_gradient_skew: T,
    pub pure_stretch: bool,
    /// `max ‖Q^θ − Id‖`.
    pub identity_distance: T,
    /// `max ‖X^θ − X^hel‖`.
    pub helicoid_distance: T,
}

impl<T: Real> AssociateReport<T> {
    pub fn passes(&self, tol: T, angle_tol: T) -> bool {
        self.gradient_defect <= tol
            && self.normal_defect <= tol
            && self.metric_defect <= tol
            && self.angle_defect <= angle_tol
            && self.e3_entry_defect <= tol
            && self.cross_gradient_defect <= tol
    }
}

pub fn associate_verify<T: Real>(theta: T, grid: &DomainGrid<T>) -> Result<AssociateReport<T>> {
    if !(theta >= T::zero() && theta <= T::TAU()) {
        return Err(Error::InvalidParams(format!("theta {theta} outside [0, 2π]")));
    }
    let dom = grid.bounds();
    let cat = sample_surface(&SurfaceSpec::catenoid().with_domain(dom), grid)?;
    let xt = sample_surface(&SurfaceSpec::associate(theta).with_domain(dom), grid)?;
    let hel = sample_surface(&SurfaceSpec::helicoid().with_domain(dom), grid)?;
    let df = DrillField::constant(&cat, -theta)?;
    let q = build_drill_rotation(&df);
    let extracted = pair_rotation_extract(&Tangents::from_bundle(&xt), &cat, PairTolerance::default())?;
    let ct = theta.cos();
    let rot_t = Mat2::rotation(theta).transpose();
    let per: Vec<[T; 10]> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (jc, jt) = (&cat.jets.values()[k], &xt.jets.values()[k]);
            let qk = q.values()[k];
            let ch2 = grid.point(k).0.cosh().powi(2);
            let grad = (jt.d1 - qk.apply(jc.d1)).norm().max((jt.d2 - qk.apply(jc.d2)).norm());
            let (it, _) = fundamental_forms(jt);
            let metric = (it - Mat2::identity().scale(ch2)).max_abs();
            let gauss = (gauss_map_metric(jt) - Mat2::identity().scale(T::one() / ch2)).max_abs();
            let alpha = angle_about_axis(extracted.values()[k].matrix(), jc.n, -theta).alpha;
            let e3 = (extracted.values()[k].matrix().m[2][2] - (ct + ch2 - T::one()) / ch2).abs();
            let cross = Mat2::new(jc.d1.dot(jt.d1), jc.d1.dot(jt.d2), jc.d2.dot(jt.d1), jc.d2.dot(jt.d2));
            [
                grad,
                (jt.n - jc.n).norm(),
                metric,
                gauss,
                alpha,
                (alpha + theta).abs(),
                e3,
                (cross - rot_t.scale(ch2)).max_abs(),
                cross.skew().max_abs(),
                (*qk.matrix() - Mat3::identity()).max_abs(),
            ]
        })
        .collect();
    let max_of = |c: usize| per.iter().fold(T::zero(), |m, p| m.max(p[c]));
    let angles: Vec<T> = per.iter().map(|p| p[4]).collect();
    let drill_angle = crate::scalar::pairwise_sum(&angles) / T::lit(angles.len() as f64);
    let helicoid_distance = xt
        .jets
        .values()
        .iter()
        .zip(hel.jets.values())
        .fold(T::zero(), |m, (a, b)| m.max((a.y - b.y).norm()));
    let cross_gradient_skew = max_of(8);
    Ok(AssociateReport {
        theta,
        gradient_defect: max_of(0),
        normal_defect: max_of(1),
        metric_defect: max_of(2),
        gauss_metric_defect: max_of(3),
        drill_angle: nearest_branch(drill_angle, -theta),
        angle_defect: max_of(5),
        e3_entry_defect: max_of(6),
        cross_gradient_defect: max_of(7),
        cross_gradient_skew,
        pure_stretch: cross_gradient_skew <= T::tol(1e-10),
        identity_distance: max_of(9),
        helicoid_distance,
    })
}

/// Gauss–Newton (Levenberg–Marquardt) search for a drill field with
/// vanishing exact-mode residual and `α` held fixed on the clamped nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions<T> {
    pub max_iters: usize,
    /// Stop when `‖r‖∞` falls below this value.
    pub residual_tol: T,
    pub damping: T,
}

impl<T: Real> Default for RelaxOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 100,
            residual_tol: T::tol(1e-12),
            damping: T::lit(1e-3),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelaxOutcome<T> {
    pub alpha: Field<T, T>,
    pub iterations: usize,
    /// `‖r‖∞` after every accepted iterate, starting with the initial field.
    pub trace: Vec<T>,
    pub converged: bool,
}

/// Symmetric positive definite band matrix, lower band storage.
struct Band<T> {
    n: usize,
    bw: usize,
    a: Vec<T>,
}

impl<T: Real> Band<T> {
    fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            a: vec![T::zero(); n * (bw + 1)],
        }
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut T {
        debug_assert!(j <= i && i - j <= self.bw);
        &mut self.a[i * (self.bw + 1) + (i - j)]
    }

    /// In-place Cholesky followed by two triangular solves.
    fn solve(mut self, mut b: Vec<T>) -> Option<Vec<T>> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = *self.at(i, j);
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= *self.at(i, k) * *self.at(j, k);
                }
                if i == j {
                    if !(s > T::zero()) {
                        return None;
                    }
                    *self.at(i, i) = s.sqrt();
                } else {
                    let d = *self.at(j, j);
                    *self.at(i, j) = s / d;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for k in lo..i {
                s -= *self.at(i, k) * b[k];
            }
            b[i] = s / *self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= *self.at(k, i) * b[k];
            }
            b[i] = s / *self.at(i, i);
        }
        Some(b)
    }
}

/// Residual of the exact drill condition and its sparse Jacobian
/// (`(node, ∂r/∂α_node)` entries per residual node).
fn relax_system<T: Real>(
    surface: &SurfaceBundle<T>,
    alpha: &[T],
) -> (Vec<Vec3<T>>, Vec<Vec<(usize, Vec3<T>)>>) {
    let g = *surface.grid();
    let jets = surface.jets.values();
    let cols: Vec<[Vec3<T>; 4]> = (0..g.len())
        .map(|k| {
            let j = &jets[k];
            let (s, c) = alpha[k].sin_cos();
            let (n1, n2) = (j.n.cross(j.d1), j.n.cross(j.d2));
            [
                j.d1 * (c - T::one()) + n1 * s,
                j.d2 * (c - T::one()) + n2 * s,
                n1 * c - j.d1 * s,
                n2 * c - j.d2 * s,
            ]
        })
        .collect();
    (0..g.len())
        .into_par_iter()
        .map(|p| {
            let (i, j) = g.ij(p);
            let mut r = Vec3::zero();
            let mut jac: Vec<(usize, Vec3<T>)> = Vec::with_capacity(6);
            let mut add = |k: usize, coef: T, a: Vec3<T>, da: Vec3<T>| {
                if coef == T::zero() {
                    return;
                }
                r += a * coef;
                match jac.iter_mut().find(|e| e.0 == k) {
                    Some(e) => e.1 += da * coef,
                    None => jac.push((k, da * coef)),
                }
            };
            for (jj, c) in stencil_weights(j, g.n2(), g.h2()) {
                let k = g.index(i, jj);
                add(k, c, cols[k][0], cols[k][2]);
            }
            for (ii, c) in stencil_weights(i, g.n1(), g.h1()) {
                let k = g.index(ii, j);
                add(k, -c, cols[k][1], cols[k][3]);
            }
            jac.sort_by_key(|e| e.0);
            (r, jac)
        })
        .unzip()
}

pub fn drill_relax<T: Real>(
    surface: &SurfaceBundle<T>,
    mask: &BoundaryMask,
    alpha0: &Field<T, T>,
    opts: RelaxOptions<T>,
) -> Result<RelaxOutcome<T>> {
    alpha0.check_same_grid(&surface.jets)?;
    let g = *surface.grid();
    if !mask.matches(&g) {
        return Err(Error::GridMismatch);
    }
    let mut unknown = vec![usize::MAX; g.len()];
    let mut free = 0;
    for (k, u) in unknown.iter_mut().enumerate() {
        if !mask.is_gamma(k) {
            *u = free;
            free += 1;
        }
    }
    let bw = 2 * g.n1() + 2;
    let mut alpha = alpha0.values().to_vec();
    let objective = |r: &[Vec3<T>]| {
        let sq: Vec<T> = r.iter().map(|v| v.norm_squared()).collect();
        crate::scalar::pairwise_sum(&sq)
    };
    let linf = |r: &[Vec3<T>]| r.iter().fold(T::zero(), |m, v| m.max(v.norm()));
    let (mut r, mut jac) = relax_system(surface, &alpha);
    let mut f = objective(&r);
    let mut trace = vec![linf(&r)];
    let mut lambda = opts.damping;
    let mut iterations = 0;
    while iterations < opts.max_iters && *trace.last().unwrap() > opts.residual_tol && free > 0 {
        iterations += 1;
        let mut normal = Band::new(free, bw);
        let mut grad = vec![T::zero(); free];
        for (p, row) in jac.iter().enumerate() {
            for (a, &(ka, va)) in row.iter().enumerate() {
                let ua = unknown[ka];
                if ua == usize::MAX {
                    continue;
                }
                grad[ua] += va.dot(r[p]);
                for &(kb, vb) in &row[..=a] {
                    let ub = unknown[kb];
                    if ub == usize::MAX {
                        continue;
                    }
                    let (hi, lo) = if ua >= ub { (ua, ub) } else { (ub, ua) };
                    *normal.at(hi, lo) += va.dot(vb);
                }
            }
        }
        let diag: Vec<T> = (0..free).map(|u| *normal.at(u, u)).collect();
        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = Band {
                n: normal.n,
                bw: normal.bw,
                a: normal.a.clone(),
            };
            for (u, d) in diag.iter().enumerate() {
                *damped.at(u, u) += lambda * d.max(T::tol(1e-12));
            }
            let rhs: Vec<T> = grad.iter().map(|&x| -x).collect();
            let Some(step) = damped.solve(rhs) else {
                lambda = lambda * T::lit(10.0);
                continue;
            };
            let mut trial = alpha.clone();
            for (k, &u) in unknown.iter().enumerate() {
                if u != usize::MAX {
                    trial[k] += step[u];
                }
            }
            let (tr, tj) = relax_system(surface, &trial);
            let tf = objective(&tr);
            if tf < f {
                alpha = trial;
                r = tr;
                jac = tj;
                f = tf;
                lambda = (lambda / T::lit(3.0)).max(T::tol(1e-15));
                accepted = true;
                break;
            }
            lambda = lambda * T::lit(4.0);
        }
        trace.push(linf(&r));
        if !accepted {
            break;
        }
    }
    let converged = *trace.last().unwrap() <= opts.residual_tol;
    Ok(RelaxOutcome {
        alpha: Field::from_values(g, alpha)?,
        iterations,
        trace,
        converged,
    })
}
