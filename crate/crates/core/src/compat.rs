//! Discrete integrability of candidate differentials `(v | w)` and
//! reconstruction of their potentials.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fd_derivative, Dir, DomainGrid, Field, SurfaceBundle};
use crate::rotalg::{polar3, Mat3, Rotation, Vec3};
use crate::scalar::{pairwise_sum, Real};

/// Floor of the compatibility tolerance.
pub const COMPAT_FLOOR: f64 = 1e-8;
/// Multiplier of `h²·scale` in the compatibility tolerance.
pub const COMPAT_FACTOR: f64 = 10.0;

/// Mixed-derivative defect `∂2v − ∂1w` and its norms over interior nodes.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct CompatReport<T> {
    #[serde(skip)]
    pub residual: Field<T, Vec3<T>>,
    pub residual_linf: T,
    pub residual_l2: T,
    pub tolerance: T,
    pub is_compatible: bool,
    /// Nodes where `v` and `w` are (numerically) parallel.
    pub rank_deficient_nodes: usize,
}

/// `max(1e-8, 10·h²·scale)`, `h` the larger spacing and `scale` the largest
/// node norm of `v` and `w`.
pub fn compat_tolerance<T: Real>(v: &Field<T, Vec3<T>>, w: &Field<T, Vec3<T>>) -> T {
    let g = v.grid();
    let h = g.h1().max(g.h2());
    let scale = v
        .values()
        .iter()
        .chain(w.values())
        .fold(T::zero(), |m, x| m.max(x.norm()));
    T::lit(COMPAT_FLOOR).max(T::lit(COMPAT_FACTOR) * h * h * scale)
}

pub fn curl_residual<T: Real>(v: &Field<T, Vec3<T>>, w: &Field<T, Vec3<T>>) -> Result<CompatReport<T>> {
    let tol = if v.grid() == w.grid() {
        compat_tolerance(v, w)
    } else {
        return Err(Error::GridMismatch);
    };
    curl_residual_with_tol(v, w, tol)
}

pub fn curl_residual_with_tol<T: Real>(
    v: &Field<T, Vec3<T>>,
    w: &Field<T, Vec3<T>>,
    tolerance: T,
) -> Result<CompatReport<T>> {
    v.check_same_grid(w)?;
    let residual = fd_derivative(v, Dir::X2)?.try_sub(&fd_derivative(w, Dir::X1)?)?;
    let g = *v.grid();
    let interior: Vec<usize> = g.interior().collect();
    let residual_linf = interior
        .iter()
        .fold(T::zero(), |m, &k| m.max(residual.values()[k].norm()));
    let sq: Vec<T> = interior
        .iter()
        .map(|&k| residual.values()[k].norm_squared())
        .collect();
    let residual_l2 = (pairwise_sum(&sq) * g.h1() * g.h2()).sqrt();
    let rank_deficient_nodes = v
        .values()
        .iter()
        .zip(w.values())
        .filter(|(a, b)| a.cross(**b).norm() <= T::tol(1e-12) * a.norm() * b.norm() + T::min_positive_value())
        .count();
    Ok(CompatReport {
        residual,
        residual_linf,
        residual_l2,
        tolerance,
        is_compatible: residual_linf <= tolerance,
        rank_deficient_nodes,
    })
}

/// Order in which the trapezoid line integrals are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOrder {
    /// Along `x1` on the anchor row, then along `x2` in every column.
    X1First,
    /// Along `x2` on the anchor column, then along `x1` in every row.
    X2First,
}

/// Refuses incompatible data, then integrates along `x1` first.
pub fn reconstruct_potential<T: Real>(
    v: &Field<T, Vec3<T>>,
    w: &Field<T, Vec3<T>>,
    anchor: usize,
    anchor_value: Vec3<T>,
) -> Result<Field<T, Vec3<T>>> {
    let report = curl_residual(v, w)?;
    if !report.is_compatible {
        return Err(Error::Incompatible {
            residual_linf: report.residual_linf.as_f64(),
            tolerance: report.tolerance.as_f64(),
        });
    }
    integrate_path(v, w, anchor, anchor_value, PathOrder::X1First)
}

fn line_integral<T: Real>(
    len: usize,
    start: usize,
    start_value: Vec3<T>,
    h: T,
    deriv: impl Fn(usize) -> Vec3<T>,
) -> Vec<Vec3<T>> {
    let half_h = h * T::lit(0.5);
    let mut out = vec![Vec3::zero(); len];
    out[start] = start_value;
    for i in start + 1..len {
        out[i] = out[i - 1] + (deriv(i - 1) + deriv(i)) * half_h;
    }
    for i in (0..start).rev() {
        out[i] = out[i + 1] - (deriv(i) + deriv(i + 1)) * half_h;
    }
    out
}

/// Trapezoid line integration without the compatibility gate.
pub fn integrate_path<T: Real>(
    v: &Field<T, Vec3<T>>,
    w: &Field<T, Vec3<T>>,
    anchor: usize,
    anchor_value: Vec3<T>,
    order: PathOrder,
) -> Result<Field<T, Vec3<T>>> {
    v.check_same_grid(w)?;
    let g = *v.grid();
    if anchor >= g.len() {
        return Err(Error::Format(format!("anchor node {anchor} outside grid")));
    }
    let (ia, ja) = g.ij(anchor);
    let (n1, n2) = (g.n1(), g.n2());
    let (vv, ww) = (v.values(), w.values());
    let mut values = vec![Vec3::zero(); g.len()];
    match order {
        PathOrder::X1First => {
            let row = line_integral(n1, ia, anchor_value, g.h1(), |i| vv[g.index(i, ja)]);
            let cols: Vec<Vec<Vec3<T>>> = (0..n1)
                .into_par_iter()
                .map(|i| line_integral(n2, ja, row[i], g.h2(), |j| ww[g.index(i, j)]))
                .collect();
            for (i, col) in cols.into_iter().enumerate() {
                for (j, x) in col.into_iter().enumerate() {
                    values[g.index(i, j)] = x;
                }
            }
        }
        PathOrder::X2First => {
            let col = line_integral(n2, ja, anchor_value, g.h2(), |j| ww[g.index(ia, j)]);
            let rows: Vec<Vec<Vec3<T>>> = (0..n2)
                .into_par_iter()
                .map(|j| line_integral(n1, ia, col[j], g.h1(), |i| vv[g.index(i, j)]))
                .collect();
            for (j, row) in rows.into_iter().enumerate() {
                values[j * n1..(j + 1) * n1].copy_from_slice(&row);
            }
        }
    }
    Field::from_values(g, values)
}

/// Largest nodewise difference between the two integration orders.
pub fn path_discrepancy<T: Real>(
    v: &Field<T, Vec3<T>>,
    w: &Field<T, Vec3<T>>,
    anchor: usize,
) -> Result<T> {
    let a = integrate_path(v, w, anchor, Vec3::zero(), PathOrder::X1First)?;
    let b = integrate_path(v, w, anchor, Vec3::zero(), PathOrder::X2First)?;
    Ok(max_distance(&a, &b))
}

/// `max_k ‖a_k − b_k‖`; the fields must share a grid.
pub fn max_distance<T: Real>(a: &Field<T, Vec3<T>>, b: &Field<T, Vec3<T>>) -> T {
    a.values()
        .iter()
        .zip(b.values())
        .fold(T::zero(), |m, (x, y)| m.max((*x - *y).norm()))
}

/// Like [`max_distance`] after removing the mean offset `b − a`.
pub fn max_distance_aligned<T: Real>(a: &Field<T, Vec3<T>>, b: &Field<T, Vec3<T>>) -> T {
    let n = T::lit(a.len() as f64);
    let comp = |c: usize| {
        let d: Vec<T> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (*y - *x)[c])
            .collect();
        pairwise_sum(&d) / n
    };
    let shift = Vec3::new(comp(0), comp(1), comp(2));
    a.values()
        .iter()
        .zip(b.values())
        .fold(T::zero(), |m, (x, y)| m.max((*x + shift - *y).norm()))
}

/// Tangent fields of a deformed surface.
#[derive(Debug, Clone)]
pub struct Tangents<T> {
    pub d1: Field<T, Vec3<T>>,
    pub d2: Field<T, Vec3<T>>,
}

impl<T: Real> Tangents<T> {
    pub fn from_bundle(b: &SurfaceBundle<T>) -> Self {
        Self {
            d1: b.d1(),
            d2: b.d2(),
        }
    }

    /// Second-order finite differences of sampled positions.
    pub fn from_positions(m: &Field<T, Vec3<T>>) -> Result<Self> {
        Ok(Self {
            d1: fd_derivative(m, Dir::X1)?,
            d2: fd_derivative(m, Dir::X2)?,
        })
    }

    pub fn grid(&self) -> &DomainGrid<T> {
        self.d1.grid()
    }
}

/// Tolerances for the isometry and normal preconditions of
/// [`pair_rotation_extract`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTolerance<T> {
    pub metric: T,
    pub normal: T,
}

impl<T: Real> Default for PairTolerance<T> {
    fn default() -> Self {
        Self {
            metric: T::tol(1e-8),
            normal: T::tol(1e-8),
        }
    }
}

/// `Q = (∇m | n)(∇y0 | n0)⁻¹`, projected onto rotations by the polar
/// decomposition.
pub fn pair_rotation_extract<T: Real>(
    m: &Tangents<T>,
    y0: &SurfaceBundle<T>,
    tol: PairTolerance<T>,
) -> Result<Field<T, Rotation<T>>> {
    m.d1.check_same_grid(&y0.jets)?;
    m.d2.check_same_grid(&y0.jets)?;
    let g = *y0.grid();
    let results: Vec<Result<(Rotation<T>, T, T)>> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let j = &y0.jets.values()[k];
            let (a, b) = (m.d1.values()[k], m.d2.values()[k]);
            let c = a.cross(b);
            let n = c.normalized().ok_or(Error::FrameDegenerate { node: k })?;
            let im = [a.dot(a), a.dot(b), b.dot(b)];
            let iy = [j.d1.dot(j.d1), j.d1.dot(j.d2), j.d2.dot(j.d2)];
            let scale = T::one().max(iy[0].abs()).max(iy[2].abs());
            let metric = (0..3).fold(T::zero(), |mx, t| mx.max((im[t] - iy[t]).abs())) / scale;
            let normal = (n - j.n).norm();
            let lifted_m = Mat3::from_cols(a, b, n);
            let inv = j
                .lifted_jacobian()
                .inverse()
                .ok_or(Error::FrameDegenerate { node: k })?;
            let (q, _) = polar3(&(lifted_m * inv))?;
            Ok((q, metric, normal))
        })
        .collect();
    let mut rots = Vec::with_capacity(g.len());
    let (mut metric, mut normal) = (T::zero(), T::zero());
    for r in results {
        let (q, dm, dn) = r?;
        metric = metric.max(dm);
        normal = normal.max(dn);
        rots.push(q);
    }
    if !(metric <= tol.metric) {
        return Err(Error::NonIsometric {
            defect: metric.as_f64(),
        });
    }
    if !(normal <= tol.normal) {
        return Err(Error::NormalMismatch {
            defect: normal.as_f64(),
        });
    }
    Field::from_values(g, rots)
}
