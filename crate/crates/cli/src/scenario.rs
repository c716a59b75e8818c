use std::path::{Path, PathBuf};

use drillrig::energy::{MaterialParams, MinimizeOptions};
use drillrig::grid::{make_mask, BoundaryMask, DomainGrid};
use drillrig::{make_surface, sample_surface, Expr, SurfaceBundle, SurfaceConfig, SurfaceSpec};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::Failure;

/// One JSON scenario document. Sections a command does not use are ignored
/// by that command but still validated on load.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub surface: Option<SurfaceConfig>,
    /// `[n1, n2]`.
    #[serde(default)]
    pub grid: Option<[usize; 2]>,
    /// Clamped-boundary selection, e.g. `"left_edge"` or `"all"`.
    #[serde(default)]
    pub mask: Option<String>,
    /// Drill angle: a number or an expression in `x1`, `x2`.
    #[serde(default)]
    pub drill: Option<Expr>,
    #[serde(default)]
    pub material: Option<MaterialParams<f64>>,
    #[serde(default)]
    pub minimize: Option<MinimizeSection>,
    #[serde(default)]
    pub probe: Option<ProbeSection>,
    #[serde(default)]
    pub associate: Option<AssociateSection>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeSection {
    #[serde(default)]
    pub options: MinimizeOptions<f64>,
    /// Amplitude of seeded uniform noise added to the initial drill.
    #[serde(default)]
    pub noise: f64,
    /// Also write the spring-probe table.
    #[serde(default)]
    pub probe: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociateSection {
    pub thetas: Vec<f64>,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub grid: Option<(usize, usize)>,
    pub tol: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub sha256: String,
    pub overrides: Overrides,
}

pub const DEFAULT_PROBE_ALPHAS: [f64; 5] = [0.01, 0.02, 0.03, 0.04, 0.05];

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

impl Loaded {
    pub fn read(path: &Path, overrides: Overrides) -> Result<Self, Failure> {
        let bytes = std::fs::read(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let scenario: Scenario =
            serde_json::from_slice(&bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let loaded = Self {
            sha256: format!("{:x}", Sha256::digest(&bytes)),
            scenario,
            overrides,
        };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<(), Failure> {
        let s = &self.scenario;
        if let Some(cfg) = &s.surface {
            make_surface::<f64>(cfg)?;
        }
        if let Some(m) = &s.material {
            m.validate()?;
        }
        if let Some(t) = self.tol() {
            if !(t.is_finite() && t > 0.0) {
                return Err(invalid(format!("tolerance must be positive, got {t}")));
            }
        }
        if let Some(p) = &s.probe {
            if p.alphas.is_empty() || p.alphas.iter().any(|a| !a.is_finite()) {
                return Err(invalid("probe.alphas must be a non-empty list of finite numbers"));
            }
        }
        if let Some(a) = &s.associate {
            if a.thetas.is_empty() || a.thetas.iter().any(|t| !t.is_finite()) {
                return Err(invalid("associate.thetas must be a non-empty list of finite numbers"));
            }
        }
        if let Some(m) = &s.minimize {
            if !(m.noise.is_finite() && m.noise >= 0.0) {
                return Err(invalid("minimize.noise must be non-negative"));
            }
            let o = &m.options;
            if !(o.armijo > 0.0 && o.armijo < 1.0 && o.shrink > 0.0 && o.shrink < 1.0 && o.initial_step > 0.0) {
                return Err(invalid("minimize.options: armijo and shrink must lie in (0, 1), initial_step > 0"));
            }
        }
        Ok(())
    }

    pub fn tol(&self) -> Option<f64> {
        self.overrides.tol.or(self.scenario.tol)
    }

    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        self.overrides.grid.or(self.scenario.grid.map(|[a, b]| (a, b)))
    }

    pub fn surface_spec(&self) -> Result<SurfaceSpec<f64>, Failure> {
        let cfg = self
            .scenario
            .surface
            .as_ref()
            .ok_or_else(|| invalid("scenario has no `surface` section"))?;
        Ok(make_surface(cfg)?)
    }

    pub fn grid_over(&self, spec: &SurfaceSpec<f64>) -> Result<DomainGrid<f64>, Failure> {
        let (n1, n2) = self
            .grid_dims()
            .ok_or_else(|| invalid("scenario has no `grid` and none was given with --grid"))?;
        Ok(DomainGrid::over(&spec.domain, n1, n2)?)
    }

    pub fn bundle(&self) -> Result<SurfaceBundle<f64>, Failure> {
        let spec = self.surface_spec()?;
        let grid = self.grid_over(&spec)?;
        Ok(sample_surface(&spec, &grid)?)
    }

    pub fn mask(&self, grid: &DomainGrid<f64>) -> Result<Option<BoundaryMask>, Failure> {
        match &self.scenario.mask {
            Some(sel) => Ok(Some(make_mask(grid, sel)?)),
            None => Ok(None),
        }
    }

    pub fn drill(&self) -> Result<&Expr, Failure> {
        self.scenario
            .drill
            .as_ref()
            .ok_or_else(|| invalid("scenario has no `drill` section"))
    }

    pub fn material(&self) -> Result<MaterialParams<f64>, Failure> {
        self.scenario
            .material
            .ok_or_else(|| invalid("scenario has no `material` section"))
    }
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected N1xN2, got `{s}`"))?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad node count `{t}`"));
    Ok((n(a)?, n(b)?))
}
