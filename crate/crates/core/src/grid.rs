//! Uniform tensor grids over a chart, node fields, finite differences,
//! trapezoid quadrature and boundary selections.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotalg::{Mat3, Rotation, Vec3};
use crate::scalar::{pairwise_sum, Real};
use crate::surface::{
    darboux_frame, mean_curvature, ChartDomain, SurfaceJet, SurfaceSpec,
};

pub const MIN_NODES: usize = 3;

/// Uniform `n1 × n2` node lattice on `[x1.0, x1.1] × [x2.0, x2.1]`.
/// Node `(i, j)` is stored at index `j * n1 + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "GridRepr<T>")]
pub struct DomainGrid<T> {
    n1: usize,
    n2: usize,
    x1: (T, T),
    x2: (T, T),
}

#[derive(Deserialize)]
#[serde(bound = "T: Real")]
struct GridRepr<T> {
    n1: usize,
    n2: usize,
    x1: (T, T),
    x2: (T, T),
}

impl<T: Real> TryFrom<GridRepr<T>> for DomainGrid<T> {
    type Error = Error;

    fn try_from(r: GridRepr<T>) -> Result<Self> {
        DomainGrid::new(r.n1, r.n2, r.x1, r.x2)
    }
}

/// Differentiation direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    X1,
    X2,
}

impl<T: Real> DomainGrid<T> {
    pub fn new(n1: usize, n2: usize, x1: (T, T), x2: (T, T)) -> Result<Self> {
        for n in [n1, n2] {
            if n < MIN_NODES {
                return Err(Error::GridTooSmall { n, min: MIN_NODES });
            }
        }
        ChartDomain::new(x1, x2)?;
        Ok(Self { n1, n2, x1, x2 })
    }

    /// Grid covering the whole chart of `domain`.
    pub fn over(domain: &ChartDomain<T>, n1: usize, n2: usize) -> Result<Self> {
        Self::new(n1, n2, domain.x1, domain.x2)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn bounds(&self) -> ChartDomain<T> {
        ChartDomain {
            x1: self.x1,
            x2: self.x2,
        }
    }

    pub fn h1(&self) -> T {
        (self.x1.1 - self.x1.0) / T::lit((self.n1 - 1) as f64)
    }

    pub fn h2(&self) -> T {
        (self.x2.1 - self.x2.0) / T::lit((self.n2 - 1) as f64)
    }

    pub fn h(&self, dir: Dir) -> T {
        match dir {
            Dir::X1 => self.h1(),
            Dir::X2 => self.h2(),
        }
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n1, k / self.n1)
    }

    fn coord(a: T, b: T, i: usize, n: usize) -> T {
        if i == n - 1 {
            b
        } else {
            a + (b - a) * T::lit(i as f64) / T::lit((n - 1) as f64)
        }
    }

    pub fn x1_at(&self, i: usize) -> T {
        Self::coord(self.x1.0, self.x1.1, i, self.n1)
    }

    pub fn x2_at(&self, j: usize) -> T {
        Self::coord(self.x2.0, self.x2.1, j, self.n2)
    }

    /// Chart coordinates of node `k`.
    pub fn point(&self, k: usize) -> (T, T) {
        let (i, j) = self.ij(k);
        (self.x1_at(i), self.x2_at(j))
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        i == 0 || j == 0 || i == self.n1 - 1 || j == self.n2 - 1
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| !self.is_boundary(k))
    }

    /// Boundary nodes in counter-clockwise order starting at `(0, 0)`.
    pub fn boundary_cycle(&self) -> Vec<usize> {
        let (n1, n2) = (self.n1, self.n2);
        let mut out = Vec::with_capacity(2 * (n1 + n2) - 4);
        out.extend((0..n1).map(|i| self.index(i, 0)));
        out.extend((1..n2).map(|j| self.index(n1 - 1, j)));
        out.extend((0..n1 - 1).rev().map(|i| self.index(i, n2 - 1)));
        out.extend((1..n2 - 1).rev().map(|j| self.index(0, j)));
        out
    }

    /// Trapezoid weight of node `k`, including `h1·h2`.
    pub fn quad_weight(&self, k: usize) -> T {
        let (i, j) = self.ij(k);
        let half = T::lit(0.5);
        let w1 = if i == 0 || i == self.n1 - 1 { half } else { T::one() };
        let w2 = if j == 0 || j == self.n2 - 1 { half } else { T::one() };
        w1 * w2 * self.h1() * self.h2()
    }
}

/// Values that can be differenced and combined linearly.
pub trait Linear<T>:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self>
{
    fn lin_zero() -> Self;
}

impl<T: Real> Linear<T> for T {
    fn lin_zero() -> Self {
        T::zero()
    }
}

impl<T: Real> Linear<T> for Vec3<T> {
    fn lin_zero() -> Self {
        Vec3::zero()
    }
}

impl<T: Real> Linear<T> for Mat3<T> {
    fn lin_zero() -> Self {
        Mat3::zeros()
    }
}

/// One value per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    bound(serialize = "T: Real, V: Serialize", deserialize = "T: Real, V: DeserializeOwned"),
    try_from = "FieldRepr<T, V>"
)]
pub struct Field<T, V> {
    grid: DomainGrid<T>,
    values: Vec<V>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Real, V: DeserializeOwned"))]
struct FieldRepr<T, V> {
    grid: DomainGrid<T>,
    values: Vec<V>,
}

impl<T: Real, V> TryFrom<FieldRepr<T, V>> for Field<T, V> {
    type Error = Error;

    fn try_from(r: FieldRepr<T, V>) -> Result<Self> {
        Field::from_values(r.grid, r.values)
    }
}

impl<T: Real, V> Field<T, V> {
    pub fn from_values(grid: DomainGrid<T>, values: Vec<V>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &DomainGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn into_values(self) -> Vec<V> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize, j: usize) -> &V {
        &self.values[self.grid.index(i, j)]
    }

    pub fn map<U>(&self, f: impl Fn(&V) -> U) -> Field<T, U> {
        Field {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn zip_map<W, U>(&self, other: &Field<T, W>, f: impl Fn(&V, &W) -> U) -> Result<Field<T, U>> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn check_same_grid<W>(&self, other: &Field<T, W>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

impl<T: Real, V: Send> Field<T, V> {
    /// Samples `f(x1, x2)` at every node in parallel.
    pub fn from_fn(grid: DomainGrid<T>, f: impl Fn(T, T) -> V + Sync + Send) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (x1, x2) = grid.point(k);
                f(x1, x2)
            })
            .collect();
        Self { grid, values }
    }

    /// Builds a field from a per-node closure in parallel.
    pub fn from_index_fn(grid: DomainGrid<T>, f: impl Fn(usize) -> V + Sync + Send) -> Self {
        let values = (0..grid.len()).into_par_iter().map(f).collect();
        Self { grid, values }
    }
}

impl<T: Real, V: Linear<T>> Field<T, V> {
    pub fn constant(grid: DomainGrid<T>, v: V) -> Self {
        Self {
            grid,
            values: vec![v; grid.len()],
        }
    }

    pub fn try_add(&self, o: &Self) -> Result<Self> {
        self.zip_map(o, |&a, &b| a + b)
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self> {
        self.zip_map(o, |&a, &b| a - b)
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|&a| a * s)
    }
}

/// `(node offset index, weight)` pairs of the derivative stencil at position
/// `i` of a line with `n` nodes and spacing `h`; unused slots carry weight 0.
pub fn stencil_weights<T: Real>(i: usize, n: usize, h: T) -> [(usize, T); 3] {
    let c = T::one() / (T::lit(2.0) * h);
    let (three, four) = (T::lit(3.0), T::lit(4.0));
    if i == 0 {
        [(0, -three * c), (1, four * c), (2, -c)]
    } else if i == n - 1 {
        [(n - 1, three * c), (n - 2, -four * c), (n - 3, c)]
    } else {
        [(i - 1, -c), (i + 1, c), (i, T::zero())]
    }
}

fn stencil<T: Real, V: Linear<T>>(vals: &dyn Fn(usize) -> V, i: usize, n: usize, inv_2h: T) -> V {
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    if i == 0 {
        (vals(1) * four - vals(0) * three - vals(2)) * inv_2h
    } else if i == n - 1 {
        (vals(n - 1) * three - vals(n - 2) * four + vals(n - 3)) * inv_2h
    } else {
        (vals(i + 1) - vals(i - 1)) * inv_2h
    }
}

/// Finite-difference derivative of a single node: central inside,
/// one-sided three-point at the boundary.
pub fn fd_at<T: Real, V: Linear<T>>(f: &Field<T, V>, dir: Dir, k: usize) -> V {
    let g = &f.grid;
    let (i, j) = g.ij(k);
    let inv_2h = T::one() / (T::lit(2.0) * g.h(dir));
    match dir {
        Dir::X1 => stencil(&|ii| f.values[g.index(ii, j)], i, g.n1, inv_2h),
        Dir::X2 => stencil(&|jj| f.values[g.index(i, jj)], j, g.n2, inv_2h),
    }
}

/// Second-order finite-difference derivative of a field.
pub fn fd_derivative<T: Real, V: Linear<T>>(f: &Field<T, V>, dir: Dir) -> Result<Field<T, V>> {
    let n = match dir {
        Dir::X1 => f.grid.n1,
        Dir::X2 => f.grid.n2,
    };
    if n < MIN_NODES {
        return Err(Error::GridTooSmall { n, min: MIN_NODES });
    }
    Ok(Field::from_index_fn(f.grid, |k| fd_at(f, dir, k)))
}

/// Tensor-product trapezoid rule with pairwise summation.
pub fn integrate<T: Real>(f: &Field<T, T>) -> T {
    let terms: Vec<T> = (0..f.len())
        .map(|k| f.values[k] * f.grid.quad_weight(k))
        .collect();
    pairwise_sum(&terms)
}

/// Nodewise samples of a surface: exact jets, mean curvature and Darboux
/// frames.
#[derive(Debug, Clone)]
pub struct SurfaceBundle<T> {
    pub jets: Field<T, SurfaceJet<T>>,
    pub mean_curvature: Field<T, T>,
    pub darboux: Field<T, Rotation<T>>,
}

impl<T: Real> SurfaceBundle<T> {
    pub fn grid(&self) -> &DomainGrid<T> {
        self.jets.grid()
    }

    pub fn positions(&self) -> Field<T, Vec3<T>> {
        self.jets.map(|j| j.y)
    }

    pub fn d1(&self) -> Field<T, Vec3<T>> {
        self.jets.map(|j| j.d1)
    }

    pub fn d2(&self) -> Field<T, Vec3<T>> {
        self.jets.map(|j| j.d2)
    }

    pub fn normals(&self) -> Field<T, Vec3<T>> {
        self.jets.map(|j| j.n)
    }

    pub fn area_elements(&self) -> Field<T, T> {
        self.jets.map(|j| j.area_element())
    }

    /// Surface area `∫ ‖∂1y × ∂2y‖`.
    pub fn area(&self) -> T {
        integrate(&self.area_elements())
    }
}

/// Evaluates the exact jets of `spec` at every node of `grid`.
pub fn sample_surface<T: Real>(spec: &SurfaceSpec<T>, grid: &DomainGrid<T>) -> Result<SurfaceBundle<T>> {
    if !spec.domain.contains_domain(&grid.bounds()) {
        return Err(Error::DomainMismatch);
    }
    let raw: Vec<Result<(SurfaceJet<T>, Rotation<T>)>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (x1, x2) = grid.point(k);
            let jet = spec.jet(x1, x2)?;
            Ok((jet, darboux_frame(&jet)?))
        })
        .collect();
    let mut jets = Vec::with_capacity(raw.len());
    let mut frames = Vec::with_capacity(raw.len());
    for r in raw {
        let (j, q) = r?;
        jets.push(j);
        frames.push(q);
    }
    let jets = Field::from_values(*grid, jets)?;
    let mean_curvature = jets.map(mean_curvature);
    Ok(SurfaceBundle {
        mean_curvature,
        darboux: Field::from_values(*grid, frames)?,
        jets,
    })
}

/// Role of a node with respect to the clamped boundary part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Interior,
    GammaD,
    FreeBoundary,
}

/// Per-node roles; the clamped part is a nonempty connected arc of the
/// boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMask {
    n1: usize,
    n2: usize,
    roles: Vec<NodeRole>,
}

impl BoundaryMask {
    pub fn role(&self, k: usize) -> NodeRole {
        self.roles[k]
    }

    pub fn is_gamma(&self, k: usize) -> bool {
        self.roles[k] == NodeRole::GammaD
    }

    pub fn gamma_nodes(&self) -> Vec<usize> {
        (0..self.roles.len()).filter(|&k| self.is_gamma(k)).collect()
    }

    pub fn gamma_count(&self) -> usize {
        self.roles.iter().filter(|&&r| r == NodeRole::GammaD).count()
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn matches<T: Real>(&self, g: &DomainGrid<T>) -> bool {
        self.n1 == g.n1() && self.n2 == g.n2()
    }
}

/// Selects the clamped boundary from a comma separated list of
/// `left_edge`, `right_edge`, `bottom_edge`, `top_edge` (each optionally
/// `:fraction`, rounded up, counted from the edge's first node) or `all`.
pub fn make_mask<T: Real>(g: &DomainGrid<T>, selection: &str) -> Result<BoundaryMask> {
    let (n1, n2) = (g.n1(), g.n2());
    let mut gamma = vec![false; g.len()];
    let mut any = false;
    for item in selection.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        any = true;
        let (name, frac) = match item.split_once(':') {
            Some((a, b)) => {
                let f: f64 = b
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidMask(format!("bad fraction in `{item}`")))?;
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::InvalidMask(format!(
                        "fraction must lie in (0, 1], got {f}"
                    )));
                }
                (a.trim(), f)
            }
            None => (item, 1.0),
        };
        let edge: Vec<usize> = match name {
            "left_edge" => (0..n2).map(|j| g.index(0, j)).collect(),
            "right_edge" => (0..n2).map(|j| g.index(n1 - 1, j)).collect(),
            "bottom_edge" => (0..n1).map(|i| g.index(i, 0)).collect(),
            "top_edge" => (0..n1).map(|i| g.index(i, n2 - 1)).collect(),
            "all" if frac == 1.0 => g.boundary_cycle(),
            _ => return Err(Error::InvalidMask(format!("unknown selection `{item}`"))),
        };
        let take = ((frac * edge.len() as f64) - 1e-9).ceil().max(1.0) as usize;
        for &k in edge.iter().take(take) {
            gamma[k] = true;
        }
    }
    if !any {
        return Err(Error::InvalidMask("empty selection".into()));
    }
    let cycle = g.boundary_cycle();
    let flags: Vec<bool> = cycle.iter().map(|&k| gamma[k]).collect();
    let runs = (0..flags.len())
        .filter(|&p| flags[p] && !flags[(p + flags.len() - 1) % flags.len()])
        .count();
    if runs > 1 {
        return Err(Error::InvalidMask(format!(
            "selection `{selection}` splits into {runs} disconnected boundary arcs"
        )));
    }
    let roles = (0..g.len())
        .map(|k| {
            if gamma[k] {
                NodeRole::GammaD
            } else if g.is_boundary(k) {
                NodeRole::FreeBoundary
            } else {
                NodeRole::Interior
            }
        })
        .collect();
    Ok(BoundaryMask { n1, n2, roles })
}

/// Node values with a fixed number of scalar CSV columns.
pub trait CsvValue<T>: Sized {
    fn columns() -> Vec<String>;
    fn push_components(&self, out: &mut Vec<T>);
    fn from_components(c: &[T]) -> Result<Self>;
}

impl<T: Real> CsvValue<T> for T {
    fn columns() -> Vec<String> {
        vec!["value".into()]
    }

    fn push_components(&self, out: &mut Vec<T>) {
        out.push(*self);
    }

    fn from_components(c: &[T]) -> Result<Self> {
        Ok(c[0])
    }
}

impl<T: Real> CsvValue<T> for Vec3<T> {
    fn columns() -> Vec<String> {
        ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
    }

    fn push_components(&self, out: &mut Vec<T>) {
        out.extend(self.to_array());
    }

    fn from_components(c: &[T]) -> Result<Self> {
        Ok(Vec3::new(c[0], c[1], c[2]))
    }
}

fn matrix_columns(prefix: &str) -> Vec<String> {
    (1..=3)
        .flat_map(|r| (1..=3).map(move |c| format!("{prefix}{r}{c}")))
        .collect()
}

impl<T: Real> CsvValue<T> for Mat3<T> {
    fn columns() -> Vec<String> {
        matrix_columns("m")
    }

    fn push_components(&self, out: &mut Vec<T>) {
        out.extend(self.m.iter().flatten().copied());
    }

    fn from_components(c: &[T]) -> Result<Self> {
        Ok(Mat3::from_fn(|r, s| c[3 * r + s]))
    }
}

impl<T: Real> CsvValue<T> for Rotation<T> {
    fn columns() -> Vec<String> {
        matrix_columns("q")
    }

    fn push_components(&self, out: &mut Vec<T>) {
        self.matrix().push_components(out);
    }

    fn from_components(c: &[T]) -> Result<Self> {
        Rotation::new(Mat3::from_components(c)?)
    }
}

fn fmt17<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

impl<T: Real, V: CsvValue<T>> Field<T, V> {
    /// CSV with `#` header lines (caller metadata, then the grid) and
    /// columns `node,x1,x2,<components>`; 17 significant digits.
    pub fn to_csv(&self, meta: &[(&str, String)]) -> String {
        let g = &self.grid;
        let mut s = String::new();
        for (k, v) in meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(
            s,
            "# grid: {} {} {} {} {} {}",
            g.n1,
            g.n2,
            fmt17(g.x1.0),
            fmt17(g.x1.1),
            fmt17(g.x2.0),
            fmt17(g.x2.1)
        );
        let _ = writeln!(s, "node,x1,x2,{}", V::columns().join(","));
        let mut comps = Vec::new();
        for (k, v) in self.values.iter().enumerate() {
            let (x1, x2) = g.point(k);
            comps.clear();
            v.push_components(&mut comps);
            let _ = write!(s, "{k},{},{}", fmt17(x1), fmt17(x2));
            for &c in &comps {
                let _ = write!(s, ",{}", fmt17(c));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Format(m);
        let num = |t: &str| -> Result<T> {
            t.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::Format(format!("bad number `{t}`")))
        };
        let mut grid = None;
        let mut values = Vec::new();
        let width = V::columns().len();
        let mut seen_header = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(spec) = rest.trim().strip_prefix("grid:") {
                    let p: Vec<&str> = spec.split_whitespace().collect();
                    if p.len() != 6 {
                        return Err(bad(format!("bad grid header `{line}`")));
                    }
                    let n = |t: &str| {
                        t.parse::<usize>()
                            .map_err(|_| Error::Format(format!("bad node count `{t}`")))
                    };
                    grid = Some(DomainGrid::new(
                        n(p[0])?,
                        n(p[1])?,
                        (num(p[2])?, num(p[3])?),
                        (num(p[4])?, num(p[5])?),
                    )?);
                }
                continue;
            }
            if !seen_header {
                seen_header = true;
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 + width {
                return Err(bad(format!(
                    "expected {} columns, found {}",
                    3 + width,
                    cells.len()
                )));
            }
            let comps = cells[3..].iter().map(|c| num(c)).collect::<Result<Vec<T>>>()?;
            values.push(V::from_components(&comps)?);
        }
        let grid = grid.ok_or_else(|| bad("missing `# grid:` header".into()))?;
        Field::from_values(grid, values)
    }
}
