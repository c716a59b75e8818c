use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt::Write as _;

use drillrig::compat::{curl_residual, curl_residual_with_tol, integrate_path, max_distance, max_distance_aligned, PathOrder};
use drillrig::drill::{
    associate_verify, boundary_lemma_check, build_drill_rotation, drill_residual_with, obstruction_report,
    rigidity_certificate, AssociateReport, BoundaryLemmaReport, ClassifyTol, DrillDiagnostics, DrillField,
    ObstructionReport, ResidualMode, RigidityReport, CLASSIFY_TOL,
};
use drillrig::energy::{
    minimize, seeded_drill, spring_probe, total_energy, trace_csv, EnergyBreakdown, MinimizeError, ShellState,
    Termination, TraceEntry,
};
use drillrig::grid::{DomainGrid, Field};
use drillrig::{fundamental_forms, sample_surface, SurfaceBundle, SurfaceSpec};
use serde::Serialize;

use crate::output::{fmt17, grid_spec, Header, Named, RowNames, Writer, TOOL};
use crate::scenario::{Loaded, DEFAULT_PROBE_ALPHAS};
use crate::Failure;

pub struct Ctx<'a> {
    pub loaded: &'a Loaded,
    pub out: std::path::PathBuf,
    pub command: &'static str,
}

impl Ctx<'_> {
    fn writer(&self, grid: Option<&DomainGrid<f64>>) -> Result<Writer, Failure> {
        Writer::new(
            &self.out,
            Header {
                tool: TOOL,
                command: self.command,
                scenario: self.loaded.scenario.name.clone(),
                scenario_sha256: self.loaded.sha256.clone(),
                grid: grid.map(grid_spec),
                seed: self.loaded.overrides.seed,
            },
        )
    }
}

pub struct GeometryCols;
impl RowNames<13> for GeometryCols {
    const NAMES: [&'static str; 13] = [
        "y1", "y2", "y3", "n1", "n2", "n3", "H", "I11", "I12", "I22", "II11", "II12", "II22",
    ];
}

#[derive(Serialize)]
struct GeometrySummary {
    surface: String,
    min_mean_curvature: f64,
    max_mean_curvature: f64,
    max_abs_mean_curvature: f64,
    /// Smallest area element `‖∂1y × ∂2y‖`.
    regularity_margin: f64,
    area: f64,
}

pub fn geometry(ctx: &Ctx) -> Result<(), Failure> {
    let b = ctx.loaded.bundle()?;
    let rows = b.jets.zip_map(&b.mean_curvature, |j, &h| {
        let (i, ii) = fundamental_forms(j);
        Named::<GeometryCols, 13>::new([
            j.y.x, j.y.y, j.y.z, j.n.x, j.n.y, j.n.z, h, i.m[0][0], i.m[0][1], i.m[1][1], ii.m[0][0], ii.m[0][1], ii.m[1][1],
        ])
    })?;
    let hs = b.mean_curvature.values();
    let summary = GeometrySummary {
        surface: surface_label(ctx.loaded),
        min_mean_curvature: hs.iter().copied().fold(f64::INFINITY, f64::min),
        max_mean_curvature: hs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_abs_mean_curvature: hs.iter().fold(0.0, |m, h| m.max(h.abs())),
        regularity_margin: b.jets.values().iter().map(|j| j.area_element()).fold(f64::INFINITY, f64::min),
        area: b.area(),
    };
    let w = ctx.writer(Some(b.grid()))?;
    w.field("geometry.csv", &rows)?;
    w.json("summary.json", &summary)
}

fn surface_label(l: &Loaded) -> String {
    l.scenario.surface.as_ref().map(|s| s.kind.clone()).unwrap_or_default()
}

pub struct PotentialCols;
impl RowNames<6> for PotentialCols {
    const NAMES: [&'static str; 6] = ["m1", "m2", "m3", "r1", "r2", "r3"];
}

#[derive(Serialize)]
struct CompatOut {
    residual_linf: f64,
    residual_l2: f64,
    tolerance: f64,
    is_compatible: bool,
    rank_deficient_nodes: usize,
    anchor: usize,
    /// `max ‖m − y0‖` when reconstructed.
    deviation: Option<f64>,
    aligned_deviation: Option<f64>,
}

/// Gate and reconstruct `m` from `∇m = Q∇y0` for the scenario drill.
pub fn compat(ctx: &Ctx) -> Result<(), Failure> {
    let b = ctx.loaded.bundle()?;
    let g = *b.grid();
    let mask = ctx.loaded.mask(&g)?;
    let df = DrillField::from_expr(&b, ctx.loaded.drill()?)?;
    let q = build_drill_rotation(&df);
    let v = q.zip_map(&b.jets, |q, j| q.apply(j.d1))?;
    let w = q.zip_map(&b.jets, |q, j| q.apply(j.d2))?;
    let report = match ctx.loaded.tol() {
        Some(t) => curl_residual_with_tol(&v, &w, t)?,
        None => curl_residual(&v, &w)?,
    };
    let anchor = mask.as_ref().and_then(|m| m.gamma_nodes().first().copied()).unwrap_or(0);
    let y = b.positions();
    let m = if report.is_compatible {
        Some(integrate_path(&v, &w, anchor, y.values()[anchor], PathOrder::X1First)?)
    } else {
        None
    };
    let out = CompatOut {
        residual_linf: report.residual_linf,
        residual_l2: report.residual_l2,
        tolerance: report.tolerance,
        is_compatible: report.is_compatible,
        rank_deficient_nodes: report.rank_deficient_nodes,
        anchor,
        deviation: m.as_ref().map(|m| max_distance(m, &y)),
        aligned_deviation: m.as_ref().map(|m| max_distance_aligned(m, &y)),
    };
    let rows = match &m {
        Some(m) => m.zip_map(&report.residual, |p, r| Named::<PotentialCols, 6>::new([p.x, p.y, p.z, r.x, r.y, r.z]))?,
        None => report
            .residual
            .map(|r| Named::new([f64::NAN, f64::NAN, f64::NAN, r.x, r.y, r.z])),
    };
    let wr = ctx.writer(Some(&g))?;
    wr.field("potential.csv", &rows)?;
    wr.json("compat.json", &out)
}

pub struct ResidualCols;
impl RowNames<11> for ResidualCols {
    const NAMES: [&'static str; 11] = [
        "alpha", "r1", "r2", "r3", "c1", "c2", "cn", "cn_predicted", "H", "area_element", "r_linear_norm",
    ];
}

#[derive(Serialize)]
struct DrillVerifyOut {
    classification: &'static str,
    exact: DrillDiagnostics<f64>,
    linearized: DrillDiagnostics<f64>,
    obstruction: ObstructionReport<f64>,
    /// `max |cn − (−2 sin α H ‖∂1y0 × ∂2y0‖)|` over interior nodes.
    normal_coefficient_defect: f64,
    rigidity: Option<RigidityReport<f64>>,
    rigidity_refused: Option<String>,
    boundary: Option<BoundaryLemmaReport<f64>>,
}

pub fn drill_verify(ctx: &Ctx) -> Result<(), Failure> {
    let b = ctx.loaded.bundle()?;
    let g = *b.grid();
    let mask = ctx.loaded.mask(&g)?;
    let df = DrillField::from_expr(&b, ctx.loaded.drill()?)?;
    let tol = ctx.loaded.tol().unwrap_or(CLASSIFY_TOL);
    let ct = ClassifyTol::uniform(tol);
    let exact = drill_residual_with(&df, ResidualMode::Exact, ct, mask.as_ref())?;
    let linearized = drill_residual_with(&df, ResidualMode::Linearized, ct, mask.as_ref())?;
    let obstruction = obstruction_report(&df, ResidualMode::Exact, tol)?;
    let (rigidity, rigidity_refused) = match rigidity_certificate(&b, &df, mask.as_ref()) {
        Ok(r) => (Some(r), None),
        Err(e @ drillrig::Error::Incompatible { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let boundary = match (&rigidity, &mask) {
        (Some(r), Some(mask)) => Some(boundary_lemma_check(&r.m, &b, &build_drill_rotation(&df), mask, tol)?),
        _ => None,
    };
    let predicted = |k: usize| {
        let j = &b.jets.values()[k];
        -2.0 * df.alpha.values()[k].sin() * b.mean_curvature.values()[k] * j.area_element()
    };
    let normal_coefficient_defect = g
        .interior()
        .map(|k| (exact.coeffs.values()[k].cn - predicted(k)).abs())
        .fold(0.0, f64::max);
    let rows = Field::from_index_fn(g, |k| {
        let r = exact.residual.values()[k];
        let c = exact.coeffs.values()[k];
        Named::<ResidualCols, 11>::new([
            df.alpha.values()[k],
            r.x,
            r.y,
            r.z,
            c.c1,
            c.c2,
            c.cn,
            predicted(k),
            b.mean_curvature.values()[k],
            b.jets.values()[k].area_element(),
            linearized.residual.values()[k].norm(),
        ])
    });
    let out = DrillVerifyOut {
        classification: exact.classification.as_str(),
        exact,
        linearized,
        obstruction,
        normal_coefficient_defect,
        rigidity,
        rigidity_refused,
        boundary,
    };
    let w = ctx.writer(Some(&g))?;
    w.field("residual.csv", &rows)?;
    w.json("diagnostics.json", &out)
}

pub struct AssociateCols;
impl RowNames<6> for AssociateCols {
    const NAMES: [&'static str; 6] = ["X1", "X2", "X3", "n1", "n2", "n3"];
}

#[derive(Serialize)]
struct AssociateOut {
    tolerance: f64,
    angle_tolerance: f64,
    reports: Vec<AssociateEntry>,
}

#[derive(Serialize)]
struct AssociateEntry {
    passes: bool,
    #[serde(flatten)]
    report: AssociateReport<f64>,
}

pub const FIGURE_THETAS: [f64; 4] = [0.0, PI / 25.0, FRAC_PI_4, FRAC_PI_2];

pub fn associate(ctx: &Ctx) -> Result<(), Failure> {
    let l = ctx.loaded;
    let spec = match &l.scenario.surface {
        Some(_) => l.surface_spec()?,
        None => SurfaceSpec::catenoid(),
    };
    let (n1, n2) = l.grid_dims().unwrap_or((61, 61));
    let grid = DomainGrid::over(&spec.domain, n1, n2)?;
    let thetas = l
        .scenario
        .associate
        .as_ref()
        .map(|a| a.thetas.clone())
        .unwrap_or_else(|| FIGURE_THETAS.to_vec());
    let tol = l.tol().unwrap_or(1e-10);
    let angle_tol = tol * 10.0;
    let w = ctx.writer(Some(&grid))?;
    let mut reports = Vec::with_capacity(thetas.len());
    let mut table = String::from(
        "theta,gradient_defect,normal_defect,metric_defect,drill_angle,angle_defect,helicoid_distance,passes\n",
    );
    for (i, &theta) in thetas.iter().enumerate() {
        let report = associate_verify(theta, &grid)?;
        let passes = report.passes(tol, angle_tol);
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{}",
            fmt17(theta),
            fmt17(report.gradient_defect),
            fmt17(report.normal_defect),
            fmt17(report.metric_defect),
            fmt17(report.drill_angle),
            fmt17(report.angle_defect),
            fmt17(report.helicoid_distance),
            passes
        );
        let surf = sample_surface(&SurfaceSpec::associate(theta).with_domain(grid.bounds()), &grid)?;
        let rows = surf
            .jets
            .map(|j| Named::<AssociateCols, 6>::new([j.y.x, j.y.y, j.y.z, j.n.x, j.n.y, j.n.z]));
        w.field(&format!("associate_{i}.csv"), &rows)?;
        reports.push(AssociateEntry { passes, report });
    }
    w.csv("associate_table.csv", &table)?;
    w.json(
        "associate.json",
        &AssociateOut {
            tolerance: tol,
            angle_tolerance: angle_tol,
            reports,
        },
    )
}

pub struct StateCols;
impl RowNames<4> for StateCols {
    const NAMES: [&'static str; 4] = ["m1", "m2", "m3", "alpha"];
}

#[derive(Serialize)]
struct MinimizeOut {
    termination: Option<Termination>,
    stalled: bool,
    iterations: usize,
    initial: EnergyBreakdown<f64>,
    last: EnergyBreakdown<f64>,
    last_trace: Option<TraceEntry<f64>>,
    max_abs_drill: f64,
}

pub fn minimize_cmd(ctx: &Ctx) -> Result<(), Failure> {
    let l = ctx.loaded;
    let b = l.bundle()?;
    let g = *b.grid();
    let mask = l.mask(&g)?;
    let p = l.material()?;
    let section = l.scenario.minimize.clone().unwrap_or_default();
    let mut opts = section.options;
    if let Some(t) = l.tol() {
        opts.gtol = t;
    }
    let base = match &l.scenario.drill {
        Some(e) => Field::from_fn(g, |x1, x2| e.eval(x1, x2)),
        None => Field::constant(g, 0.0),
    };
    let noise = seeded_drill(&g, mask.as_ref(), section.noise, l.overrides.seed);
    let alpha = base.zip_map(&noise, |a, n| a + n)?;
    let alpha = Field::from_index_fn(g, |k| {
        if mask.as_ref().is_some_and(|m| m.is_gamma(k)) {
            0.0
        } else {
            alpha.values()[k]
        }
    });
    let s0 = ShellState::with_drill(&b, &alpha)?;
    let initial = total_energy(&s0, &p, &b)?;
    let w = ctx.writer(Some(&g))?;
    let (state, trace, termination, stall) = match minimize(&s0, &p, &b, mask.as_ref(), &opts) {
        Ok(o) => (o.state, o.trace, Some(o.termination), None),
        Err(MinimizeError::Stall {
            iter,
            halvings,
            state,
            trace,
        }) => (*state, trace, None, Some(format!("line search failed after {halvings} halvings at iteration {iter}"))),
        Err(MinimizeError::Invalid(e)) => return Err(e.into()),
    };
    let angles = state.drill_angles(&b);
    let rows = state
        .m
        .zip_map(&angles, |m, &a| Named::<StateCols, 4>::new([m.x, m.y, m.z, a]))?;
    let last = total_energy(&state, &p, &b)?;
    w.csv("trace.csv", &trace_csv(&trace))?;
    w.field("final_state.csv", &rows)?;
    w.json(
        "breakdown.json",
        &MinimizeOut {
            termination,
            stalled: stall.is_some(),
            iterations: trace.len().saturating_sub(1),
            initial,
            last,
            last_trace: trace.last().copied(),
            max_abs_drill: angles.values().iter().fold(0.0, |m, a| m.max(a.abs())),
        },
    )?;
    if section.probe {
        write_probe(&w, &b, l)?;
    }
    match stall {
        Some(msg) => Err(Failure::Stall(msg)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct ProbeOut {
    stiffness: f64,
    quartic: f64,
    area: f64,
    /// `2 h μ_c · area`.
    planar_stiffness: f64,
    relative_to_planar: f64,
}

fn write_probe(w: &Writer, b: &SurfaceBundle<f64>, l: &Loaded) -> Result<(), Failure> {
    let p = l.material()?;
    let alphas = l
        .scenario
        .probe
        .as_ref()
        .map(|s| s.alphas.clone())
        .unwrap_or_else(|| DEFAULT_PROBE_ALPHAS.to_vec());
    let probe = spring_probe(b, &alphas, &p)?;
    let mut table = String::from("alpha,drill_energy\n");
    for (a, e) in &probe.table {
        let _ = writeln!(table, "{},{}", fmt17(*a), fmt17(*e));
    }
    w.csv("probe.csv", &table)?;
    let area = b.area();
    let planar = 2.0 * p.h * p.mu_c * area;
    w.json(
        "probe.json",
        &ProbeOut {
            stiffness: probe.stiffness,
            quartic: probe.quartic,
            area,
            planar_stiffness: planar,
            relative_to_planar: if planar > 0.0 { probe.stiffness / planar } else { f64::NAN },
        },
    )
}

pub fn probe_spring(ctx: &Ctx) -> Result<(), Failure> {
    let b = ctx.loaded.bundle()?;
    let w = ctx.writer(Some(b.grid()))?;
    write_probe(&w, &b, ctx.loaded)
}
