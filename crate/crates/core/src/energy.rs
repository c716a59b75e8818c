//! Discrete planar Cosserat shell energy, its finite-difference gradient,
//! a line-search minimizer and the torsional-spring probe of the drill term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::error::{Error, Result};
use crate::grid::{stencil_weights, BoundaryMask, DomainGrid, Field, SurfaceBundle};
use crate::rotalg::{angle_about_axis, exp_so3, rodrigues_unchecked, Mat2, Mat3, Rotation, Vec3};
use crate::scalar::{pairwise_sum, Real};
use crate::surface::darboux_stretch;

/// Relative finite-difference step for gradients.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct MaterialParams<T> {
    pub mu: T,
    pub lambda: T,
    pub mu_c: T,
    pub h: T,
    #[serde(default = "zero")]
    pub l_c: T,
    #[serde(default = "zero")]
    pub q: T,
}

fn zero<T: Real>() -> T {
    T::zero()
}

impl<T: Real> MaterialParams<T> {
    pub fn new(mu: T, lambda: T, mu_c: T, h: T, l_c: T, q: T) -> Result<Self> {
        let p = Self {
            mu,
            lambda,
            mu_c,
            h,
            l_c,
            q,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu, self.lambda, self.mu_c, self.h, self.l_c, self.q];
        let fail = |m: &str| Err(Error::InvalidParams(m.into()));
        if all.iter().any(|v| !v.is_finite()) {
            return fail("parameters must be finite");
        }
        if !(self.mu > T::zero()) {
            return fail("mu must be positive");
        }
        if !(T::lit(2.0) * self.mu + self.lambda > T::zero()) {
            return fail("2 mu + lambda must be positive");
        }
        if self.mu_c < T::zero() {
            return fail("mu_c must be non-negative");
        }
        if !(self.h > T::zero()) {
            return fail("thickness h must be positive");
        }
        if self.l_c < T::zero() || self.q < T::zero() {
            return fail("L_c and q must be non-negative");
        }
        Ok(())
    }

    /// `μλ / (2μ + λ)`.
    pub fn trace_modulus(&self) -> T {
        self.mu * self.lambda / (T::lit(2.0) * self.mu + self.lambda)
    }
}

/// Midsurface deformation and independent rotation field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ShellState<T> {
    pub m: Field<T, Vec3<T>>,
    pub r: Field<T, Rotation<T>>,
}

impl<T: Real> ShellState<T> {
    pub fn new(m: Field<T, Vec3<T>>, r: Field<T, Rotation<T>>) -> Result<Self> {
        m.check_same_grid(&r)?;
        Ok(Self { m, r })
    }

    /// `m = y0`, `R = Q0`.
    pub fn reference(b: &SurfaceBundle<T>) -> Self {
        Self {
            m: b.positions(),
            r: b.darboux.clone(),
        }
    }

    /// `m = y0`, `R = rodrigues(α, n0) Q0`.
    pub fn with_drill(b: &SurfaceBundle<T>, alpha: &Field<T, T>) -> Result<Self> {
        let r = b
            .jets
            .zip_map(alpha, |j, &a| rodrigues_unchecked(a, j.n))?
            .zip_map(&b.darboux, |q, q0| q.compose(q0))?;
        Ok(Self {
            m: b.positions(),
            r,
        })
    }

    pub fn grid(&self) -> &DomainGrid<T> {
        self.m.grid()
    }

    /// Drill angle `∠(R Q0ᵀ)` about `n0` at every node.
    pub fn drill_angles(&self, b: &SurfaceBundle<T>) -> Field<T, T> {
        Field::from_index_fn(*self.grid(), |k| {
            let rel = *self.r.values()[k].matrix() * b.darboux.values()[k].matrix().transpose();
            angle_about_axis(&rel, b.jets.values()[k].n, T::zero()).alpha
        })
    }
}

/// Energy (or energy density) split by term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EnergyBreakdown<T> {
    pub shear_stretch: T,
    pub drill: T,
    pub transverse_shear: T,
    pub stretch_trace: T,
    pub curvature_s: T,
    pub curvature_b: T,
    pub total: T,
}

/// Selects the whole energy or one of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Total,
    ShearStretch,
    Drill,
    TransverseShear,
    StretchTrace,
    CurvatureS,
    CurvatureB,
}

impl<T: Real> EnergyBreakdown<T> {
    fn from_parts(p: [T; 6]) -> Self {
        Self {
            shear_stretch: p[0],
            drill: p[1],
            transverse_shear: p[2],
            stretch_trace: p[3],
            curvature_s: p[4],
            curvature_b: p[5],
            total: pairwise_sum(&p),
        }
    }

    pub fn parts(&self) -> [T; 6] {
        [
            self.shear_stretch,
            self.drill,
            self.transverse_shear,
            self.stretch_trace,
            self.curvature_s,
            self.curvature_b,
        ]
    }

    pub fn get(&self, part: Part) -> T {
        match part {
            Part::Total => self.total,
            Part::ShearStretch => self.shear_stretch,
            Part::Drill => self.drill,
            Part::TransverseShear => self.transverse_shear,
            Part::StretchTrace => self.stretch_trace,
            Part::CurvatureS => self.curvature_s,
            Part::CurvatureB => self.curvature_b,
        }
    }
}

/// Nodal derivative of a field given through an accessor, with the grid's
/// stencils.
fn fd_node<T: Real, V>(g: &DomainGrid<T>, k: usize, get: &dyn Fn(usize) -> V, comb: impl Fn(V) -> Vec3<T>) -> [Vec3<T>; 2] {
    let (i, j) = g.ij(k);
    let mut out = [Vec3::zero(); 2];
    for (ii, w) in stencil_weights(i, g.n1(), g.h1()) {
        if w != T::zero() {
            out[0] += comb(get(g.index(ii, j))) * w;
        }
    }
    for (jj, w) in stencil_weights(j, g.n2(), g.h2()) {
        if w != T::zero() {
            out[1] += comb(get(g.index(i, jj))) * w;
        }
    }
    out
}

/// `K_i = Rᵀ(∇(R e_i) | 0)` at one node; returns `([K_1, K_2, K_3], K_b = K_3)`.
pub fn curvature_tensors<T: Real>(r: &Field<T, Rotation<T>>, node: usize) -> ([Mat3<T>; 3], Mat3<T>) {
    let get = |k: usize| *r.values()[k].matrix();
    let ks = curvature_blocks(r.grid(), node, &get, [true; 3]);
    (ks, ks[2])
}

fn curvature_blocks<T: Real>(g: &DomainGrid<T>, k: usize, rot: &dyn Fn(usize) -> Mat3<T>, which: [bool; 3]) -> [Mat3<T>; 3] {
    let rk = rot(k);
    let mut out = [Mat3::zeros(); 3];
    for (c, block) in out.iter_mut().enumerate() {
        if !which[c] {
            continue;
        }
        let d = fd_node(g, k, rot, |m: Mat3<T>| m.col(c));
        let z = Vec3::zero();
        *block = rk.transpose() * Mat3::from_cols(d[0], d[1], z);
    }
    out
}

/// Reference data the energy is measured against.
#[derive(Debug, Clone)]
pub struct Reference<T> {
    /// `(Q0₁|Q0₂)ᵀ∇y0`; the identity on the flat chart.
    pub stretch: Vec<Mat2<T>>,
    pub weights: Vec<T>,
    pub grid: DomainGrid<T>,
}

impl<T: Real> Reference<T> {
    pub fn new(b: &SurfaceBundle<T>) -> Self {
        let g = *b.grid();
        Self {
            stretch: b
                .jets
                .values()
                .iter()
                .zip(b.darboux.values())
                .map(|(j, q)| darboux_stretch(j, q))
                .collect(),
            weights: (0..g.len()).map(|k| g.quad_weight(k)).collect(),
            grid: g,
        }
    }
}

/// Energy density at node `k` of the state given through `get`.
fn density_with<T: Real>(
    reference: &Reference<T>,
    p: &MaterialParams<T>,
    k: usize,
    get: &dyn Fn(usize) -> (Vec3<T>, Mat3<T>),
) -> [T; 6] {
    let g = &reference.grid;
    let dm = fd_node(g, k, get, |(m, _)| m);
    let rk = get(k).1;
    let (r1, r2, r3) = (rk.col(0), rk.col(1), rk.col(2));
    let e = Mat2::new(r1.dot(dm[0]), r1.dot(dm[1]), r2.dot(dm[0]), r2.dot(dm[1]));
    let strain = (e - reference.stretch[k]).sym();
    let two = T::lit(2.0);
    let tm = p.trace_modulus();
    let h = p.h;
    let shear_stretch = h * p.mu * strain.norm_squared();
    let drill = h * p.mu_c * e.skew().norm_squared();
    let transverse = h * (p.mu + p.mu_c) / two * (r3.dot(dm[0]).powi(2) + r3.dot(dm[1]).powi(2));
    let stretch_trace = h * tm * strain.trace().powi(2);
    let need_s = p.l_c > T::zero();
    let rot = |i: usize| get(i).1;
    let blocks = curvature_blocks(g, k, &rot, [need_s, need_s, true]);
    let curvature_s = if need_s {
        let ks2: T = blocks.iter().map(|b| b.norm_squared()).sum();
        h * p.mu * (p.l_c.powi(2) * ks2 + p.l_c.powf(two + p.q) * ks2.powf(T::one() + p.q / two))
    } else {
        T::zero()
    };
    let kb = blocks[2];
    let curvature_b = h.powi(3) / T::lit(12.0)
        * (p.mu * kb.sym().norm_squared() + p.mu_c * kb.skew().norm_squared() + tm * kb.trace().powi(2));
    [shear_stretch, drill, transverse, stretch_trace, curvature_s, curvature_b]
}

/// Energy density of `state` at `node`.
pub fn energy_density<T: Real>(
    state: &ShellState<T>,
    reference: &Reference<T>,
    params: &MaterialParams<T>,
    node: usize,
) -> EnergyBreakdown<T> {
    let get = |i: usize| (state.m.values()[i], *state.r.values()[i].matrix());
    EnergyBreakdown::from_parts(density_with(reference, params, node, &get))
}

/// Trapezoid integral of every term.
pub fn total_energy<T: Real>(
    state: &ShellState<T>,
    params: &MaterialParams<T>,
    b: &SurfaceBundle<T>,
) -> Result<EnergyBreakdown<T>> {
    state.m.check_same_grid(&b.jets)?;
    state.r.check_same_grid(&b.jets)?;
    Ok(integrate_energy(state, &Reference::new(b), params))
}

fn integrate_energy<T: Real>(state: &ShellState<T>, reference: &Reference<T>, params: &MaterialParams<T>) -> EnergyBreakdown<T> {
    let get = |i: usize| (state.m.values()[i], *state.r.values()[i].matrix());
    let dens: Vec<[T; 6]> = (0..reference.grid.len())
        .into_par_iter()
        .map(|k| {
            let d = density_with(reference, params, k, &get);
            d.map(|x| x * reference.weights[k])
        })
        .collect();
    let mut parts = [T::zero(); 6];
    for (t, part) in parts.iter_mut().enumerate() {
        let col: Vec<T> = dens.iter().map(|d| d[t]).collect();
        *part = pairwise_sum(&col);
    }
    EnergyBreakdown::from_parts(parts)
}

/// Gradient blocks: displacement and body-frame rotation coordinates per
/// node; zero on the clamped part.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Gradient<T> {
    pub m: Vec<Vec3<T>>,
    pub w: Vec<Vec3<T>>,
}

impl<T: Real> Gradient<T> {
    fn zeros(n: usize) -> Self {
        Self {
            m: vec![Vec3::zero(); n],
            w: vec![Vec3::zero(); n],
        }
    }

    pub fn dot(&self, o: &Self) -> T {
        let terms: Vec<T> = self
            .m
            .iter()
            .zip(&o.m)
            .chain(self.w.iter().zip(&o.w))
            .map(|(a, b)| a.dot(*b))
            .collect();
        pairwise_sum(&terms)
    }

    pub fn norm_inf(&self) -> T {
        self.m.iter().chain(&self.w).fold(T::zero(), |m, v| m.max(v.norm_inf()))
    }

    fn axpy(&mut self, a: T, x: &Self) {
        for (s, v) in self.m.iter_mut().zip(&x.m) {
            *s += *v * a;
        }
        for (s, v) in self.w.iter_mut().zip(&x.w) {
            *s += *v * a;
        }
    }

    fn scale(&mut self, a: T) {
        for v in self.m.iter_mut().chain(self.w.iter_mut()) {
            *v = *v * a;
        }
    }
}

/// `(m + t·dm, R·exp(Anti(t·dw)))`.
pub fn retract<T: Real>(state: &ShellState<T>, dir: &Gradient<T>, t: T) -> ShellState<T> {
    let g = *state.grid();
    ShellState {
        m: Field::from_index_fn(g, |k| state.m.values()[k] + dir.m[k] * t),
        r: Field::from_index_fn(g, |k| {
            let w = dir.w[k];
            if w == Vec3::zero() {
                state.r.values()[k]
            } else {
                state.r.values()[k].compose(&exp_so3(w * t))
            }
        }),
    }
}

fn affected_nodes<T: Real>(g: &DomainGrid<T>, k: usize) -> Vec<usize> {
    let (i, j) = g.ij(k);
    let mut out = Vec::with_capacity(9);
    for ii in i.saturating_sub(2)..(i + 3).min(g.n1()) {
        out.push(g.index(ii, j));
    }
    for jj in j.saturating_sub(2)..(j + 3).min(g.n2()) {
        if jj != j {
            out.push(g.index(i, jj));
        }
    }
    out
}

/// Central-difference gradient of one energy part. Only densities whose
/// stencils touch the perturbed node are re-evaluated.
pub fn fd_gradient_part<T: Real>(
    state: &ShellState<T>,
    reference: &Reference<T>,
    params: &MaterialParams<T>,
    mask: Option<&BoundaryMask>,
    part: Part,
) -> Gradient<T> {
    let g = reference.grid;
    let scale = T::one().max(
        state
            .m
            .values()
            .iter()
            .fold(T::zero(), |m, v| m.max(v.norm_inf())),
    );
    let dm = T::lit(FD_STEP) * scale;
    let dr = T::lit(FD_STEP);
    let pick = |d: [T; 6]| match part {
        Part::Total => pairwise_sum(&d),
        Part::ShearStretch => d[0],
        Part::Drill => d[1],
        Part::TransverseShear => d[2],
        Part::StretchTrace => d[3],
        Part::CurvatureS => d[4],
        Part::CurvatureB => d[5],
    };
    let per_node: Vec<(Vec3<T>, Vec3<T>)> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            if mask.is_some_and(|m| m.is_gamma(k)) {
                return (Vec3::zero(), Vec3::zero());
            }
            let nodes = affected_nodes(&g, k);
            let (m0, r0) = (state.m.values()[k], *state.r.values()[k].matrix());
            let local = |mk: Vec3<T>, rk: Mat3<T>| {
                let get = |i: usize| {
                    if i == k {
                        (mk, rk)
                    } else {
                        (state.m.values()[i], *state.r.values()[i].matrix())
                    }
                };
                let terms: Vec<T> = nodes
                    .iter()
                    .map(|&p| pick(density_with(reference, params, p, &get)) * reference.weights[p])
                    .collect();
                pairwise_sum(&terms)
            };
            let mut gm = [T::zero(); 3];
            let mut gw = [T::zero(); 3];
            for c in 0..3 {
                let mut e = Vec3::zero().to_array();
                e[c] = T::one();
                let e = Vec3::from_array(e);
                gm[c] = (local(m0 + e * dm, r0) - local(m0 - e * dm, r0)) / (T::lit(2.0) * dm);
                let rp = r0 * *exp_so3(e * dr).matrix();
                let rm = r0 * *exp_so3(e * -dr).matrix();
                gw[c] = (local(m0, rp) - local(m0, rm)) / (T::lit(2.0) * dr);
            }
            (Vec3::from_array(gm), Vec3::from_array(gw))
        })
        .collect();
    let mut out = Gradient::zeros(g.len());
    for (k, (a, b)) in per_node.into_iter().enumerate() {
        out.m[k] = a;
        out.w[k] = b;
    }
    out
}

/// Gradient of the total energy; clamped entries are zero.
pub fn fd_gradient<T: Real>(
    state: &ShellState<T>,
    params: &MaterialParams<T>,
    b: &SurfaceBundle<T>,
    mask: Option<&BoundaryMask>,
) -> Result<Gradient<T>> {
    state.m.check_same_grid(&b.jets)?;
    state.r.check_same_grid(&b.jets)?;
    Ok(fd_gradient_part(state, &Reference::new(b), params, mask, Part::Total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Steepest descent.
    GradientDescent,
    /// Limited-memory BFGS directions with the same Armijo backtracking.
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct MinimizeOptions<T> {
    pub gtol: T,
    pub max_iters: usize,
    pub armijo: T,
    pub shrink: T,
    pub max_halvings: usize,
    pub initial_step: T,
    pub reorthonormalize_every: usize,
    pub method: Method,
    pub memory: usize,
    /// Stop once the largest drill angle falls below this value.
    pub drill_tol: Option<T>,
}

impl<T: Real> Default for MinimizeOptions<T> {
    fn default() -> Self {
        Self {
            gtol: T::tol(1e-8),
            max_iters: 500,
            armijo: T::lit(1e-4),
            shrink: T::lit(0.5),
            max_halvings: 60,
            initial_step: T::one(),
            reorthonormalize_every: 50,
            method: Method::Lbfgs,
            memory: 10,
            drill_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct TraceEntry<T> {
    pub iter: usize,
    pub energy: T,
    pub grad_norm: T,
    pub drill_norm: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    Drill,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome<T> {
    pub state: ShellState<T>,
    pub trace: Vec<TraceEntry<T>>,
    pub termination: Termination,
}

#[derive(Debug, ThisError)]
pub enum MinimizeError<T: Real> {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("line search failed after {halvings} halvings at iteration {iter}")]
    Stall {
        iter: usize,
        halvings: usize,
        state: Box<ShellState<T>>,
        trace: Vec<TraceEntry<T>>,
    },
}

/// Writes `iter,energy,grad_norm,drill_norm` rows.
pub fn trace_csv<T: Real>(trace: &[TraceEntry<T>]) -> String {
    let mut s = String::from("iter,energy,grad_norm,drill_norm\n");
    for t in trace {
        s.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            t.iter,
            t.energy.as_f64(),
            t.grad_norm.as_f64(),
            t.drill_norm.as_f64()
        ));
    }
    s
}

fn drill_norm<T: Real>(state: &ShellState<T>, b: &SurfaceBundle<T>) -> T {
    state.drill_angles(b).values().iter().fold(T::zero(), |m, a| m.max(a.abs()))
}

/// Line-search descent on the shell energy with clamped nodes held fixed.
pub fn minimize<T: Real>(
    state0: &ShellState<T>,
    params: &MaterialParams<T>,
    b: &SurfaceBundle<T>,
    mask: Option<&BoundaryMask>,
    opts: &MinimizeOptions<T>,
) -> std::result::Result<MinimizeOutcome<T>, MinimizeError<T>> {
    params.validate()?;
    state0.m.check_same_grid(&b.jets)?;
    state0.r.check_same_grid(&b.jets)?;
    if let Some(mask) = mask {
        if !mask.matches(b.grid()) {
            return Err(Error::GridMismatch.into());
        }
    }
    let reference = Reference::new(b);
    let energy = |s: &ShellState<T>| integrate_energy(s, &reference, params).total;
    let gradient = |s: &ShellState<T>| fd_gradient_part(s, &reference, params, mask, Part::Total);
    let mut state = state0.clone();
    let mut e = energy(&state);
    let mut grad = gradient(&state);
    let mut trace = vec![TraceEntry {
        iter: 0,
        energy: e,
        grad_norm: grad.norm_inf(),
        drill_norm: drill_norm(&state, b),
    }];
    let mut history: Vec<(Gradient<T>, Gradient<T>, T)> = Vec::new();
    let mut step = opts.initial_step;
    let mut iter = 0;
    let termination = loop {
        let last = trace.last().unwrap();
        if last.grad_norm <= opts.gtol {
            break Termination::Gradient;
        }
        if opts.drill_tol.is_some_and(|t| last.drill_norm <= t) {
            break Termination::Drill;
        }
        if iter >= opts.max_iters {
            break Termination::MaxIters;
        }
        iter += 1;
        let mut dir = match opts.method {
            Method::GradientDescent => {
                let mut d = grad.clone();
                d.scale(-T::one());
                d
            }
            Method::Lbfgs => lbfgs_direction(&grad, &history),
        };
        let mut slope = grad.dot(&dir);
        if !(slope < T::zero()) {
            history.clear();
            dir = grad.clone();
            dir.scale(-T::one());
            slope = grad.dot(&dir);
        }
        let mut t = match opts.method {
            Method::Lbfgs if !history.is_empty() => T::one(),
            Method::Lbfgs => opts.initial_step.min(T::one() / grad.norm_inf().max(T::min_positive_value())),
            Method::GradientDescent => step,
        };
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = retract(&state, &dir, t);
            let et = energy(&trial);
            if et <= e + opts.armijo * t * slope {
                accepted = Some((trial, et));
                break;
            }
            t = t * opts.shrink;
        }
        let Some((mut next, en)) = accepted else {
            return Err(MinimizeError::Stall {
                iter,
                halvings: opts.max_halvings,
                state: Box::new(state),
                trace,
            });
        };
        if opts.reorthonormalize_every > 0 && iter % opts.reorthonormalize_every == 0 {
            next.r = next.r.map(|r| r.reorthonormalize());
        }
        let next_grad = gradient(&next);
        if opts.method == Method::Lbfgs {
            let mut s = dir.clone();
            s.scale(t);
            let mut y = next_grad.clone();
            y.axpy(-T::one(), &grad);
            let sy = s.dot(&y);
            if sy > T::epsilon() * s.dot(&s).sqrt() * y.dot(&y).sqrt() {
                history.push((s, y, T::one() / sy));
                if history.len() > opts.memory {
                    history.remove(0);
                }
            }
        } else {
            step = (t / opts.shrink).min(opts.initial_step.max(t));
        }
        state = next;
        e = en;
        grad = next_grad;
        trace.push(TraceEntry {
            iter,
            energy: e,
            grad_norm: grad.norm_inf(),
            drill_norm: drill_norm(&state, b),
        });
    };
    Ok(MinimizeOutcome {
        state,
        trace,
        termination,
    })
}

fn lbfgs_direction<T: Real>(grad: &Gradient<T>, history: &[(Gradient<T>, Gradient<T>, T)]) -> Gradient<T> {
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * s.dot(&q);
        q.axpy(-a, y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.last() {
        q.scale(s.dot(y) / y.dot(y));
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * y.dot(&q);
        q.axpy(a - b, s);
    }
    q.scale(-T::one());
    q
}

/// Drill energy under uniform superposed drill and its fitted spring
/// constant `k` in `E ≈ k α² + c α⁴`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct SpringProbe<T> {
    pub table: Vec<(T, T)>,
    pub stiffness: T,
    pub quartic: T,
}

pub fn spring_probe<T: Real>(
    b: &SurfaceBundle<T>,
    alphas: &[T],
    params: &MaterialParams<T>,
) -> Result<SpringProbe<T>> {
    params.validate()?;
    let reference = Reference::new(b);
    let mut table = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let state = ShellState::with_drill(b, &Field::constant(*b.grid(), a))?;
        table.push((a, integrate_energy(&state, &reference, params).drill));
    }
    let (stiffness, quartic) = fit_even_quadratic(&table);
    Ok(SpringProbe {
        table,
        stiffness,
        quartic,
    })
}

/// Least squares `E ≈ k α² + c α⁴`; falls back to `k` alone for a single
/// distinct amplitude.
fn fit_even_quadratic<T: Real>(table: &[(T, T)]) -> (T, T) {
    let (mut s44, mut s46, mut s66, mut b4, mut b6) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for &(a, e) in table {
        let (a2, a4, a6) = (a * a, a.powi(4), a.powi(6));
        s44 += a4;
        s46 += a6;
        s66 += a.powi(8);
        b4 += e * a2;
        b6 += e * a4;
    }
    let det = s44 * s66 - s46 * s46;
    if det.abs() <= T::tol(1e-12) * s44 * s66 {
        let k = if s44 > T::zero() { b4 / s44 } else { T::zero() };
        return (k, T::zero());
    }
    ((b4 * s66 - b6 * s46) / det, (s44 * b6 - s46 * b4) / det)
}

/// Quadratic coefficient `(E(ε) + E(−ε) − 2E(0)) / (2ε²)` of the total
/// energy along uniform drill `R = rodrigues(ε, n0) Q0` applied off the
/// clamped part, with `m = y0`.
pub fn drill_hessian_probe<T: Real>(
    b: &SurfaceBundle<T>,
    params: &MaterialParams<T>,
    mask: Option<&BoundaryMask>,
    eps: T,
) -> Result<T> {
    params.validate()?;
    let reference = Reference::new(b);
    let g = *b.grid();
    let at = |a: T| -> Result<T> {
        let alpha = Field::from_index_fn(g, |k| {
            if mask.is_some_and(|m| m.is_gamma(k)) {
                T::zero()
            } else {
                a
            }
        });
        let s = ShellState::with_drill(b, &alpha)?;
        Ok(integrate_energy(&s, &reference, params).total)
    };
    Ok((at(eps)? + at(-eps)? - T::lit(2.0) * at(T::zero())?) / (T::lit(2.0) * eps * eps))
}

/// Uniform drill about `e3`; used by probes and tests on the plane.
pub fn planar_drill_rotation<T: Real>(alpha: T) -> Rotation<T> {
    exp_so3(Vec3::e3() * alpha)
}

/// Drill angles uniform in `[-amplitude, amplitude]` off the clamped part,
/// zero on it. Reproducible for a given seed.
pub fn seeded_drill<T: Real>(grid: &DomainGrid<T>, mask: Option<&BoundaryMask>, amplitude: T, seed: u64) -> Field<T, T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|k| {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            if mask.is_some_and(|m| m.is_gamma(k)) {
                T::zero()
            } else {
                amplitude * T::lit(u)
            }
        })
        .collect();
    Field::from_values(*grid, values).expect("length matches grid")
}
