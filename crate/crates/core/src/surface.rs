//! Parametrized surfaces with exact first and second derivatives.
//!
//! The unit normal is `∂1y × ∂2y` normalized. Every curvature sign in the
//! crate follows from that orientation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::rotalg::{anti, polar3, Mat2, Mat3, Rotation, Vec3};
use crate::scalar::Real;

/// Default colatitude margin keeping sphere patches away from the poles.
pub const SPHERE_POLE_MARGIN: f64 = 0.2;

/// Rectangular chart `[a1, b1] × [a2, b2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ChartDomain<T> {
    pub x1: (T, T),
    pub x2: (T, T),
}

impl<T: Real> ChartDomain<T> {
    pub fn new(x1: (T, T), x2: (T, T)) -> Result<Self> {
        let d = Self { x1, x2 };
        for (a, b) in [x1, x2] {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidSurface(format!(
                    "degenerate chart interval [{a}, {b}]"
                )));
            }
        }
        Ok(d)
    }

    pub fn unit_square() -> Self {
        Self {
            x1: (T::zero(), T::one()),
            x2: (T::zero(), T::one()),
        }
    }

    fn slack(a: T, b: T) -> T {
        T::tol(1e-12) * (T::one() + (b - a).abs() + a.abs().max(b.abs()))
    }

    pub fn contains(&self, x1: T, x2: T) -> bool {
        let s1 = Self::slack(self.x1.0, self.x1.1);
        let s2 = Self::slack(self.x2.0, self.x2.1);
        x1 >= self.x1.0 - s1 && x1 <= self.x1.1 + s1 && x2 >= self.x2.0 - s2 && x2 <= self.x2.1 + s2
    }

    pub fn contains_domain(&self, other: &Self) -> bool {
        self.contains(other.x1.0, other.x2.0) && self.contains(other.x1.1, other.x2.1)
    }
}

/// Height samples on a uniform grid, interpolated by bicubic Hermite patches
/// whose corner slopes come from second-order finite differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SampledHeights<T> {
    pub n1: usize,
    pub n2: usize,
    /// Row-major, `values[j * n1 + i]` at `(x1_i, x2_j)`.
    pub values: Vec<T>,
}

#[derive(Debug, Clone)]
struct HermiteData<T> {
    domain: ChartDomain<T>,
    n1: usize,
    n2: usize,
    h1: T,
    h2: T,
    f: Vec<T>,
    fx: Vec<T>,
    fy: Vec<T>,
    fxy: Vec<T>,
}

fn fd_line<T: Real>(vals: &[T], h: T) -> Vec<T> {
    let n = vals.len();
    let two_h = T::lit(2.0) * h;
    (0..n)
        .map(|i| {
            if i == 0 {
                (-T::lit(3.0) * vals[0] + T::lit(4.0) * vals[1] - vals[2]) / two_h
            } else if i == n - 1 {
                (T::lit(3.0) * vals[n - 1] - T::lit(4.0) * vals[n - 2] + vals[n - 3]) / two_h
            } else {
                (vals[i + 1] - vals[i - 1]) / two_h
            }
        })
        .collect()
}

impl<T: Real> HermiteData<T> {
    fn new(domain: ChartDomain<T>, s: &SampledHeights<T>) -> Result<Self> {
        if s.n1 < 3 || s.n2 < 3 {
            return Err(Error::InvalidSurface(
                "sampled heights need at least 3×3 samples".into(),
            ));
        }
        if s.values.len() != s.n1 * s.n2 || s.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSurface(format!(
                "expected {} finite height samples, got {}",
                s.n1 * s.n2,
                s.values.len()
            )));
        }
        let (n1, n2) = (s.n1, s.n2);
        let h1 = (domain.x1.1 - domain.x1.0) / T::lit((n1 - 1) as f64);
        let h2 = (domain.x2.1 - domain.x2.0) / T::lit((n2 - 1) as f64);
        let f = s.values.clone();
        let along1 = |data: &[T]| -> Vec<T> {
            let mut out = vec![T::zero(); n1 * n2];
            for j in 0..n2 {
                let row = &data[j * n1..(j + 1) * n1];
                out[j * n1..(j + 1) * n1].copy_from_slice(&fd_line(row, h1));
            }
            out
        };
        let along2 = |data: &[T]| -> Vec<T> {
            let mut out = vec![T::zero(); n1 * n2];
            for i in 0..n1 {
                let col: Vec<T> = (0..n2).map(|j| data[j * n1 + i]).collect();
                for (j, v) in fd_line(&col, h2).into_iter().enumerate() {
                    out[j * n1 + i] = v;
                }
            }
            out
        };
        let fx = along1(&f);
        let fy = along2(&f);
        let fxy = along2(&fx);
        Ok(Self {
            domain,
            n1,
            n2,
            h1,
            h2,
            f,
            fx,
            fy,
            fxy,
        })
    }

    /// Height and its derivatives `[f, fx, fy, fxx, fxy, fyy]`.
    fn eval(&self, x1: T, x2: T) -> [T; 6] {
        let locate = |x: T, a: T, h: T, n: usize| -> (usize, T) {
            let s = ((x - a) / h).max(T::zero());
            let cell = s.floor().to_usize().unwrap_or(0).min(n - 2);
            (cell, s - T::lit(cell as f64))
        };
        let (ci, u) = locate(x1, self.domain.x1.0, self.h1, self.n1);
        let (cj, v) = locate(x2, self.domain.x2.0, self.h2, self.n2);
        // cubic Hermite basis [value at 0, value at 1, slope at 0, slope at 1]
        // with first and second derivatives
        let basis = |t: T| -> [[T; 3]; 4] {
            let (t2, t3) = (t * t, t * t * t);
            let c = |x: f64| T::lit(x);
            [
                [c(2.0) * t3 - c(3.0) * t2 + c(1.0), c(6.0) * t2 - c(6.0) * t, c(12.0) * t - c(6.0)],
                [-c(2.0) * t3 + c(3.0) * t2, -c(6.0) * t2 + c(6.0) * t, -c(12.0) * t + c(6.0)],
                [t3 - c(2.0) * t2 + t, c(3.0) * t2 - c(4.0) * t + c(1.0), c(6.0) * t - c(4.0)],
                [t3 - t2, c(3.0) * t2 - c(2.0) * t, c(6.0) * t - c(2.0)],
            ]
        };
        let bu = basis(u);
        let bv = basis(v);
        let mut out = [T::zero(); 6];
        // derivative orders (du, dv) for f, fx, fy, fxx, fxy, fyy
        let orders = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
        for (a, di) in [0usize, 1].iter().zip([0usize, 1]) {
            for (b, dj) in [0usize, 1].iter().zip([0usize, 1]) {
                let k = (cj + dj) * self.n1 + (ci + di);
                let corner = [
                    (self.f[k], *a, *b),
                    (self.fx[k] * self.h1, 2 + *a, *b),
                    (self.fy[k] * self.h2, *a, 2 + *b),
                    (self.fxy[k] * self.h1 * self.h2, 2 + *a, 2 + *b),
                ];
                for (val, iu, iv) in corner {
                    for (o, &(du, dv)) in orders.iter().enumerate() {
                        out[o] += val * bu[iu][du] * bv[iv][dv];
                    }
                }
            }
        }
        let (h1, h2) = (self.h1, self.h2);
        out[1] = out[1] / h1;
        out[2] = out[2] / h2;
        out[3] = out[3] / (h1 * h1);
        out[4] = out[4] / (h1 * h2);
        out[5] = out[5] / (h2 * h2);
        out
    }
}

#[derive(Debug, Clone)]
struct SymbolicHeight {
    f: Expr,
    derivs: [Expr; 5],
}

impl SymbolicHeight {
    fn new(f: Expr) -> Self {
        let fx = f.diff(Var::X1);
        let fy = f.diff(Var::X2);
        let fxx = fx.diff(Var::X1);
        let fxy = fx.diff(Var::X2);
        let fyy = fy.diff(Var::X2);
        Self {
            f,
            derivs: [fx, fy, fxx, fxy, fyy],
        }
    }
}

#[derive(Debug, Clone)]
enum GraphData<T> {
    Symbolic(SymbolicHeight),
    Sampled(HermiteData<T>),
}

/// Catalog of supported surfaces.
#[derive(Debug, Clone)]
pub enum SurfaceKind<T> {
    /// `y = (x1, x2, 0)`.
    Plane,
    /// Colatitude `x1`, longitude `x2`.
    SpherePatch { radius: T },
    Catenoid,
    Helicoid,
    /// `cos θ · catenoid + sin θ · helicoid`.
    Associate { theta: T },
    /// `y = (x1, x2, f(x1, x2))`.
    Graph(GraphHeight<T>),
}

#[derive(Debug, Clone)]
pub struct GraphHeight<T>(GraphData<T>);

#[derive(Debug, Clone)]
pub struct SurfaceSpec<T> {
    pub kind: SurfaceKind<T>,
    pub domain: ChartDomain<T>,
}

/// Position, first and second partial derivatives, unit normal and its
/// derivatives at one chart point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SurfaceJet<T> {
    pub y: Vec3<T>,
    pub d1: Vec3<T>,
    pub d2: Vec3<T>,
    pub d11: Vec3<T>,
    pub d12: Vec3<T>,
    pub d22: Vec3<T>,
    pub n: Vec3<T>,
    pub dn1: Vec3<T>,
    pub dn2: Vec3<T>,
}

struct RawJet<T> {
    y: Vec3<T>,
    d1: Vec3<T>,
    d2: Vec3<T>,
    d11: Vec3<T>,
    d12: Vec3<T>,
    d22: Vec3<T>,
}

impl<T: Real> RawJet<T> {
    fn combine(a: &Self, ca: T, b: &Self, cb: T) -> Self {
        let mix = |p: Vec3<T>, q: Vec3<T>| p * ca + q * cb;
        Self {
            y: mix(a.y, b.y),
            d1: mix(a.d1, b.d1),
            d2: mix(a.d2, b.d2),
            d11: mix(a.d11, b.d11),
            d12: mix(a.d12, b.d12),
            d22: mix(a.d22, b.d22),
        }
    }

    fn graph(x1: T, x2: T, h: [T; 6]) -> Self {
        let z = T::zero();
        Self {
            y: Vec3::new(x1, x2, h[0]),
            d1: Vec3::new(T::one(), z, h[1]),
            d2: Vec3::new(z, T::one(), h[2]),
            d11: Vec3::new(z, z, h[3]),
            d12: Vec3::new(z, z, h[4]),
            d22: Vec3::new(z, z, h[5]),
        }
    }
}

fn catenoid_raw<T: Real>(x1: T, x2: T) -> RawJet<T> {
    let (s2, c2) = x2.sin_cos();
    let (sh, ch) = (x1.sinh(), x1.cosh());
    let z = T::zero();
    RawJet {
        y: Vec3::new(c2 * ch, s2 * ch, x1),
        d1: Vec3::new(c2 * sh, s2 * sh, T::one()),
        d2: Vec3::new(-s2 * ch, c2 * ch, z),
        d11: Vec3::new(c2 * ch, s2 * ch, z),
        d12: Vec3::new(-s2 * sh, c2 * sh, z),
        d22: Vec3::new(-c2 * ch, -s2 * ch, z),
    }
}

fn helicoid_raw<T: Real>(x1: T, x2: T) -> RawJet<T> {
    let (s2, c2) = x2.sin_cos();
    let (sh, ch) = (x1.sinh(), x1.cosh());
    let z = T::zero();
    RawJet {
        y: Vec3::new(s2 * sh, -c2 * sh, x2),
        d1: Vec3::new(s2 * ch, -c2 * ch, z),
        d2: Vec3::new(c2 * sh, s2 * sh, T::one()),
        d11: Vec3::new(s2 * sh, -c2 * sh, z),
        d12: Vec3::new(c2 * ch, s2 * ch, z),
        d22: Vec3::new(-s2 * sh, c2 * sh, z),
    }
}

fn sphere_raw<T: Real>(radius: T, x1: T, x2: T) -> RawJet<T> {
    let (sp, cp) = x1.sin_cos();
    let (st, ct) = x2.sin_cos();
    let r = radius;
    let z = T::zero();
    let y = Vec3::new(sp * ct, sp * st, cp) * r;
    RawJet {
        y,
        d1: Vec3::new(cp * ct, cp * st, -sp) * r,
        d2: Vec3::new(-sp * st, sp * ct, z) * r,
        d11: -y,
        d12: Vec3::new(-cp * st, cp * ct, z) * r,
        d22: Vec3::new(-sp * ct, -sp * st, z) * r,
    }
}

impl<T: Real> SurfaceSpec<T> {
    pub fn plane() -> Self {
        Self {
            kind: SurfaceKind::Plane,
            domain: ChartDomain::unit_square(),
        }
    }

    pub fn catenoid() -> Self {
        Self::associate(T::zero())
            .with_kind(SurfaceKind::Catenoid)
    }

    pub fn helicoid() -> Self {
        Self::associate(T::zero()).with_kind(SurfaceKind::Helicoid)
    }

    /// Associate family member over `[−1, 1] × [0, 2π]`.
    pub fn associate(theta: T) -> Self {
        Self {
            kind: SurfaceKind::Associate { theta },
            domain: ChartDomain {
                x1: (-T::one(), T::one()),
                x2: (T::zero(), T::TAU()),
            },
        }
    }

    /// Sphere patch over the default pole-free colatitude band and `[0, π]`.
    pub fn sphere(radius: T) -> Self {
        let eps = T::lit(SPHERE_POLE_MARGIN);
        Self {
            kind: SurfaceKind::SpherePatch { radius },
            domain: ChartDomain {
                x1: (eps, T::PI() - eps),
                x2: (T::zero(), T::PI()),
            },
        }
    }

    pub fn graph_expr(f: Expr, domain: ChartDomain<T>) -> Self {
        Self {
            kind: SurfaceKind::Graph(GraphHeight(GraphData::Symbolic(SymbolicHeight::new(f)))),
            domain,
        }
    }

    pub fn graph_sampled(samples: &SampledHeights<T>, domain: ChartDomain<T>) -> Result<Self> {
        let data = HermiteData::new(domain, samples)?;
        Ok(Self {
            kind: SurfaceKind::Graph(GraphHeight(GraphData::Sampled(data))),
            domain,
        })
    }

    pub fn with_domain(mut self, domain: ChartDomain<T>) -> Self {
        self.domain = domain;
        self
    }

    fn with_kind(mut self, kind: SurfaceKind<T>) -> Self {
        self.kind = kind;
        self
    }

    /// Checks parameters and regularity on a coarse sample of the chart.
    pub fn validate(&self) -> Result<()> {
        ChartDomain::new(self.domain.x1, self.domain.x2)?;
        match &self.kind {
            SurfaceKind::SpherePatch { radius } => {
                if !(*radius > T::zero() && radius.is_finite()) {
                    return Err(Error::InvalidSurface(format!(
                        "sphere radius must be positive, got {radius}"
                    )));
                }
                let (a, b) = self.domain.x1;
                if !(a > T::zero() && b < T::PI()) {
                    return Err(Error::InvalidSurface(format!(
                        "colatitude band [{a}, {b}] touches a pole"
                    )));
                }
            }
            SurfaceKind::Associate { theta } if !theta.is_finite() => {
                return Err(Error::InvalidSurface("theta must be finite".into()));
            }
            _ => {}
        }
        const PROBES: usize = 9;
        let d = &self.domain;
        for i in 0..PROBES {
            for j in 0..PROBES {
                let t1 = T::lit(i as f64 / (PROBES - 1) as f64);
                let t2 = T::lit(j as f64 / (PROBES - 1) as f64);
                let x1 = d.x1.0 + (d.x1.1 - d.x1.0) * t1;
                let x2 = d.x2.0 + (d.x2.1 - d.x2.0) * t2;
                let jet = self.jet(x1, x2)?;
                if !jet.y.is_finite() {
                    return Err(Error::InvalidSurface(format!(
                        "non-finite position at ({x1}, {x2})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn raw(&self, x1: T, x2: T) -> RawJet<T> {
        match &self.kind {
            SurfaceKind::Plane => RawJet::graph(x1, x2, [T::zero(); 6]),
            SurfaceKind::SpherePatch { radius } => sphere_raw(*radius, x1, x2),
            SurfaceKind::Catenoid => catenoid_raw(x1, x2),
            SurfaceKind::Helicoid => helicoid_raw(x1, x2),
            SurfaceKind::Associate { theta } => {
                let (s, c) = theta.sin_cos();
                RawJet::combine(&catenoid_raw(x1, x2), c, &helicoid_raw(x1, x2), s)
            }
            SurfaceKind::Graph(GraphHeight(GraphData::Symbolic(g))) => {
                let mut h = [T::zero(); 6];
                h[0] = g.f.eval(x1, x2);
                for (k, e) in g.derivs.iter().enumerate() {
                    h[k + 1] = e.eval(x1, x2);
                }
                RawJet::graph(x1, x2, h)
            }
            SurfaceKind::Graph(GraphHeight(GraphData::Sampled(h))) => {
                RawJet::graph(x1, x2, h.eval(x1, x2))
            }
        }
    }

    /// Exact jet at `(x1, x2)`; the normal derivatives come from
    /// differentiating the normalized cross product.
    pub fn jet(&self, x1: T, x2: T) -> Result<SurfaceJet<T>> {
        if !self.domain.contains(x1, x2) {
            return Err(Error::OutsideDomain {
                x1: x1.as_f64(),
                x2: x2.as_f64(),
            });
        }
        let r = self.raw(x1, x2);
        let c = r.d1.cross(r.d2);
        let cn = c.norm();
        let scale = r.d1.norm() * r.d2.norm();
        if !(cn > T::tol(1e-12) * scale) {
            return Err(Error::Degenerate {
                x1: x1.as_f64(),
                x2: x2.as_f64(),
            });
        }
        let n = c * (T::one() / cn);
        let dc1 = r.d11.cross(r.d2) + r.d1.cross(r.d12);
        let dc2 = r.d12.cross(r.d2) + r.d1.cross(r.d22);
        let project = |dc: Vec3<T>| (dc - n * n.dot(dc)) * (T::one() / cn);
        Ok(SurfaceJet {
            y: r.y,
            d1: r.d1,
            d2: r.d2,
            d11: r.d11,
            d12: r.d12,
            d22: r.d22,
            n,
            dn1: project(dc1),
            dn2: project(dc2),
        })
    }
}

impl<T: Real> SurfaceJet<T> {
    /// `∂1y × ∂2y`.
    pub fn area_vector(&self) -> Vec3<T> {
        self.d1.cross(self.d2)
    }

    /// `‖∂1y × ∂2y‖`.
    pub fn area_element(&self) -> T {
        self.area_vector().norm()
    }

    /// `(∂1y | ∂2y | n)`.
    pub fn lifted_jacobian(&self) -> Mat3<T> {
        Mat3::from_cols(self.d1, self.d2, self.n)
    }

    /// The mixed-derivative vectors `A = ∂1n × ∂2y` and `B = ∂2n × ∂1y`.
    pub fn normal_twist_vectors(&self) -> (Vec3<T>, Vec3<T>) {
        (self.dn1.cross(self.d2), self.dn2.cross(self.d1))
    }
}

/// First and second fundamental forms `I = ∇yᵀ∇y`, `II = −∇yᵀ∇n`.
pub fn fundamental_forms<T: Real>(j: &SurfaceJet<T>) -> (Mat2<T>, Mat2<T>) {
    let i = Mat2::new(j.d1.dot(j.d1), j.d1.dot(j.d2), j.d2.dot(j.d1), j.d2.dot(j.d2));
    let ii = Mat2::new(
        -j.d1.dot(j.dn1),
        -j.d1.dot(j.dn2),
        -j.d2.dot(j.dn1),
        -j.d2.dot(j.dn2),
    );
    (i, ii)
}

/// First fundamental form of the Gauss map, `∇nᵀ∇n`.
pub fn gauss_map_metric<T: Real>(j: &SurfaceJet<T>) -> Mat2<T> {
    Mat2::new(
        j.dn1.dot(j.dn1),
        j.dn1.dot(j.dn2),
        j.dn2.dot(j.dn1),
        j.dn2.dot(j.dn2),
    )
}

/// Mean curvature from `∂1n×∂2y − ∂2n×∂1y = −2H‖∂1y×∂2y‖ n`.
pub fn mean_curvature<T: Real>(j: &SurfaceJet<T>) -> T {
    let (a, b) = j.normal_twist_vectors();
    -(a - b).dot(j.n) / (T::lit(2.0) * j.area_element())
}

/// Mean curvature as half the trace of the shape operator `I⁻¹ II`.
pub fn mean_curvature_shape_operator<T: Real>(j: &SurfaceJet<T>) -> T {
    let (i, ii) = fundamental_forms(j);
    match i.inverse() {
        Some(inv) => T::lit(0.5) * (inv * ii).trace(),
        None => T::nan(),
    }
}

/// Darboux frame `Q0 = polar(∇y | n)`; its third column is `n` and
/// `(Q0₁|Q0₂)ᵀ∇y` is symmetric.
pub fn darboux_frame<T: Real>(j: &SurfaceJet<T>) -> Result<Rotation<T>> {
    polar3(&j.lifted_jacobian()).map(|(r, _)| r)
}

/// `(Q0₁|Q0₂)ᵀ∇y = sqrt(I)`, the drill-free reference stretch.
pub fn darboux_stretch<T: Real>(j: &SurfaceJet<T>, q0: &Rotation<T>) -> Mat2<T> {
    let (c1, c2) = (q0.col(0), q0.col(1));
    Mat2::new(c1.dot(j.d1), c1.dot(j.d2), c2.dot(j.d1), c2.dot(j.d2))
}

/// Rotated tangent frame
/// `X_α = sin α ∂2y − cos α (n×∂2y)`, `Y_α = −sin α ∂1y + cos α (n×∂1y)`,
/// which satisfies `X_α × Y_α = ∂1y × ∂2y` for every `α`.
pub fn tangent_frame<T: Real>(j: &SurfaceJet<T>, alpha: T) -> (Vec3<T>, Vec3<T>) {
    let (s, c) = alpha.sin_cos();
    let nx1 = j.n.cross(j.d1);
    let nx2 = j.n.cross(j.d2);
    (j.d2 * s - nx2 * c, nx1 * c - j.d1 * s)
}

/// `[∇y]ᵀ Anti(n) ∇n`, whose symmetry decides `sin α = 0 or H = 0`.
pub fn drill_shape_matrix<T: Real>(j: &SurfaceJet<T>) -> Mat2<T> {
    let a = anti(j.n);
    let t1 = a * j.dn1;
    let t2 = a * j.dn2;
    Mat2::new(j.d1.dot(t1), j.d1.dot(t2), j.d2.dot(t1), j.d2.dot(t2))
}

/// Surface selection as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Colatitude band for sphere patches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<(f64, f64)>,
    /// `[[a1, b1], [a2, b2]]`; defaults per kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[(f64, f64); 2]>,
    /// Height expression for `graph`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<Expr>,
    /// Sampled heights for `graph`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<SampledHeights<f64>>,
}

/// Builds and validates a surface from its configuration.
pub fn make_surface<T: Real>(cfg: &SurfaceConfig) -> Result<SurfaceSpec<T>> {
    let lit = |v: f64| T::lit(v);
    let mut spec = match cfg.kind.as_str() {
        "plane" => SurfaceSpec::plane(),
        "catenoid" => SurfaceSpec::catenoid(),
        "helicoid" => SurfaceSpec::helicoid(),
        "associate" => {
            let theta = cfg.theta.ok_or_else(|| {
                Error::InvalidSurface("associate surface needs `theta`".into())
            })?;
            SurfaceSpec::associate(lit(theta))
        }
        "sphere" | "sphere_patch" => {
            let mut s = SurfaceSpec::sphere(lit(cfg.radius.unwrap_or(1.0)));
            if let Some((a, b)) = cfg.band {
                s.domain.x1 = (lit(a), lit(b));
            }
            s
        }
        "graph" => {
            let domain = ChartDomain::unit_square();
            match (&cfg.height, &cfg.samples) {
                (Some(f), None) => SurfaceSpec::graph_expr(f.clone(), domain),
                (None, Some(_)) => SurfaceSpec {
                    kind: SurfaceKind::Plane,
                    domain,
                },
                _ => {
                    return Err(Error::InvalidSurface(
                        "graph needs exactly one of `height` or `samples`".into(),
                    ))
                }
            }
        }
        other => return Err(Error::UnknownKind(other.to_string())),
    };
    if let Some([d1, d2]) = cfg.domain {
        if cfg.kind.starts_with("sphere") && cfg.band.is_some() {
            return Err(Error::InvalidSurface(
                "give either `band` or `domain` for a sphere patch".into(),
            ));
        }
        spec.domain = ChartDomain::new((lit(d1.0), lit(d1.1)), (lit(d2.0), lit(d2.1)))?;
    }
    if let (Some(samples), "graph") = (&cfg.samples, cfg.kind.as_str()) {
        let converted = SampledHeights {
            n1: samples.n1,
            n2: samples.n2,
            values: samples.values.iter().map(|&v| lit(v)).collect(),
        };
        spec = SurfaceSpec::graph_sampled(&converted, spec.domain)?;
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn vclose(a: Vec3<f64>, b: Vec3<f64>, tol: f64) -> bool {
        (a - b).norm_inf() <= tol
    }

    #[test]
    fn catenoid_second_tangent() {
        let s = SurfaceSpec::<f64>::catenoid();
        let (x1, x2) = (0.4, 1.1);
        let j = s.jet(x1, x2).unwrap();
        let want = Vec3::new(-x2.sin() * x1.cosh(), x2.cos() * x1.cosh(), 0.0);
        assert!(vclose(j.d2, want, 1e-15));
    }

    #[test]
    fn plane_normal_and_forms() {
        let s = SurfaceSpec::<f64>::plane();
        let j = s.jet(0.3, 0.8).unwrap();
        assert_eq!(j.n, Vec3::e3());
        let (i, ii) = fundamental_forms(&j);
        assert_eq!(i, Mat2::identity());
        assert_eq!(ii, Mat2::zeros());
        assert_eq!(mean_curvature(&j), 0.0);
    }

    #[test]
    fn associate_derivative_relation() {
        let theta = 0.7;
        let a = SurfaceSpec::<f64>::associate(theta);
        let c = SurfaceSpec::<f64>::catenoid();
        let ja = a.jet(0.3, 2.0).unwrap();
        let jc = c.jet(0.3, 2.0).unwrap();
        let want1 = jc.d1 * theta.cos() - jc.d2 * theta.sin();
        let want2 = jc.d1 * theta.sin() + jc.d2 * theta.cos();
        assert!(vclose(ja.d1, want1, 1e-14));
        assert!(vclose(ja.d2, want2, 1e-14));
    }

    #[test]
    fn associate_metric_is_conformal() {
        let x1 = 0.6;
        for theta in [0.0, PI / 25.0, FRAC_PI_4, FRAC_PI_2] {
            let j = SurfaceSpec::<f64>::associate(theta).jet(x1, 1.0).unwrap();
            let (i, _) = fundamental_forms(&j);
            let ch2 = x1.cosh().powi(2);
            assert!((i - Mat2::identity().scale(ch2)).max_abs() < 1e-13);
            let g = gauss_map_metric(&j);
            assert!((g - Mat2::identity().scale(1.0 / ch2)).max_abs() < 1e-13);
        }
    }

    #[test]
    fn minimal_surfaces_have_zero_mean_curvature() {
        for s in [
            SurfaceSpec::<f64>::catenoid(),
            SurfaceSpec::helicoid(),
            SurfaceSpec::associate(1.234),
        ] {
            for (x1, x2) in [(-0.9, 0.1), (0.0, 3.0), (0.8, 6.0)] {
                let j = s.jet(x1, x2).unwrap();
                assert!(mean_curvature(&j).abs() < 1e-14);
                assert!(mean_curvature_shape_operator(&j).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_mean_curvature_magnitude() {
        let s = SurfaceSpec::<f64>::sphere(2.0);
        for (x1, x2) in [(0.3, 0.2), (1.5, 2.0), (2.7, 3.0)] {
            let j = s.jet(x1, x2).unwrap();
            // independent oracle: half-trace of the shape operator
            let oracle = mean_curvature_shape_operator(&j);
            assert!((oracle.abs() - 0.5).abs() < 1e-14);
            assert!((mean_curvature(&j) - oracle).abs() < 1e-14);
        }
    }

    #[test]
    fn darboux_frame_properties() {
        let j = SurfaceSpec::<f64>::plane().jet(0.5, 0.5).unwrap();
        let q0 = darboux_frame(&j).unwrap();
        assert!((*q0.matrix() - Mat3::identity()).max_abs() < 1e-15);

        let j = SurfaceSpec::<f64>::catenoid().jet(0.0, 0.0).unwrap();
        let q0 = darboux_frame(&j).unwrap();
        assert!(vclose(q0.col(2), j.n, 1e-14));
        let s = darboux_stretch(&j, &q0);
        assert!(s.skew().max_abs() < 1e-14);

        let j = SurfaceSpec::<f64>::sphere(1.5).jet(0.7, 0.4).unwrap();
        let q0 = darboux_frame(&j).unwrap();
        assert!(darboux_stretch(&j, &q0).skew().max_abs() < 1e-14);
    }

    #[test]
    fn tangent_frame_identities() {
        let j = SurfaceSpec::<f64>::plane().jet(0.2, 0.2).unwrap();
        let (x0, y0) = tangent_frame(&j, 0.0);
        // X0 = −n×∂2y, Y0 = n×∂1y by direct cross products
        assert!(vclose(x0, -(Vec3::e3().cross(Vec3::e2())), 0.0));
        assert!(vclose(y0, Vec3::e3().cross(Vec3::e1()), 0.0));
        assert_eq!(x0, Vec3::e1());
        assert_eq!(y0, Vec3::e2());

        let j = SurfaceSpec::<f64>::catenoid().jet(0.5, 1.0).unwrap();
        let (x, y) = tangent_frame(&j, 0.7);
        assert!(vclose(x.cross(y), j.area_vector(), 1e-13));
        assert!(x.dot(j.n).abs() < 1e-14 && y.dot(j.n).abs() < 1e-14);
        let (x0, y0) = tangent_frame(&j, 0.0);
        assert!(vclose(j.d2.cross(y0) - x0.cross(j.d1), Vec3::zero(), 1e-13));
    }

    #[test]
    fn cauchy_riemann_exact() {
        let c = SurfaceSpec::<f64>::catenoid();
        let h = SurfaceSpec::<f64>::helicoid();
        let jc = c.jet(0.3, 0.9).unwrap();
        let jh = h.jet(0.3, 0.9).unwrap();
        assert_eq!(jc.d1, jh.d2);
        assert_eq!(jc.d2, -jh.d1);
    }

    #[test]
    fn jet_rejects_outside_points() {
        let s = SurfaceSpec::<f64>::plane();
        assert!(matches!(s.jet(1.5, 0.0), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn degenerate_graph_detected() {
        // cone apex parametrization has rank 1 at the origin
        let s = SurfaceSpec {
            kind: SurfaceKind::SpherePatch { radius: 1.0 },
            domain: ChartDomain {
                x1: (0.0, 1.0),
                x2: (0.0, 1.0),
            },
        };
        assert!(matches!(s.jet(0.0, 0.5), Err(Error::Degenerate { .. })));
        assert!(s.validate().is_err());
    }

    #[test]
    fn make_surface_configs() {
        let cfg: SurfaceConfig = serde_json::from_str(r#"{"kind":"associate","theta":0}"#).unwrap();
        let a = make_surface::<f64>(&cfg).unwrap();
        let c = SurfaceSpec::<f64>::catenoid();
        let (ja, jc) = (a.jet(0.2, 0.3).unwrap(), c.jet(0.2, 0.3).unwrap());
        assert_eq!(ja.y, jc.y);

        let cfg: SurfaceConfig =
            serde_json::from_str(r#"{"kind":"associate","theta":1.5707963}"#).unwrap();
        let a = make_surface::<f64>(&cfg).unwrap();
        let h = SurfaceSpec::<f64>::helicoid();
        let (ja, jh) = (a.jet(0.2, 0.3).unwrap(), h.jet(0.2, 0.3).unwrap());
        assert!(vclose(ja.y, jh.y, 1e-7));

        let cfg: SurfaceConfig = serde_json::from_str(r#"{"kind":"plane"}"#).unwrap();
        let p = make_surface::<f64>(&cfg).unwrap();
        let j = p.jet(0.1, 0.9).unwrap();
        assert_eq!((j.d1, j.d2), (Vec3::e1(), Vec3::e2()));

        let bad: SurfaceConfig = serde_json::from_str(r#"{"kind":"torus"}"#).unwrap();
        assert!(matches!(make_surface::<f64>(&bad), Err(Error::UnknownKind(_))));
        let pole: SurfaceConfig =
            serde_json::from_str(r#"{"kind":"sphere","radius":1,"band":[0.0,1.0]}"#).unwrap();
        assert!(make_surface::<f64>(&pole).is_err());
    }

    #[test]
    fn symbolic_graph_is_exact() {
        let f = Expr::parse("0.5*(x1*x1 + x2*x2)").unwrap();
        let s = SurfaceSpec::<f64>::graph_expr(f, ChartDomain::unit_square());
        let j = s.jet(0.0, 0.0).unwrap();
        // paraboloid apex: principal curvatures both 1 with upward normal
        let (_, ii) = fundamental_forms(&j);
        assert!((ii - Mat2::identity()).max_abs() < 1e-15);
        assert!((mean_curvature(&j) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_graph_second_order() {
        let f = |x: f64, y: f64| (1.3 * x).sin() * (0.7 * y).cos();
        let err_at = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let values = (0..n * n)
                .map(|k| f((k % n) as f64 * h, (k / n) as f64 * h))
                .collect();
            let samples = SampledHeights { n1: n, n2: n, values };
            let s = SurfaceSpec::graph_sampled(&samples, ChartDomain::unit_square()).unwrap();
            let mut worst = 0.0f64;
            for &(x, y) in &[(0.33, 0.47), (0.71, 0.12), (0.5, 0.9)] {
                let j = s.jet(x, y).unwrap();
                let fx = 1.3 * (1.3 * x).cos() * (0.7 * y).cos();
                worst = worst.max((j.d1.z - fx).abs()).max((j.y.z - f(x, y)).abs());
            }
            worst
        };
        let (e1, e2) = (err_at(11), err_at(21));
        assert!(e1 < 1e-2 && e2 < e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn sampled_graph_interpolates_nodes() {
        let samples = SampledHeights::<f64> {
            n1: 3,
            n2: 3,
            values: vec![0.0, 1.0, 4.0, 1.0, 2.0, 5.0, 4.0, 5.0, 8.0],
        };
        let s = SurfaceSpec::graph_sampled(&samples, ChartDomain::unit_square()).unwrap();
        let j = s.jet(0.5, 1.0).unwrap();
        assert!((j.y.z - 5.0).abs() < 1e-14);
    }
}
