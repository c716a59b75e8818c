use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use drillrig::grid::{CsvValue, DomainGrid, Field};
use serde::Serialize;

use crate::Failure;

pub const TOOL: &str = concat!("drillrig ", env!("CARGO_PKG_VERSION"));

/// Provenance block carried by every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub scenario_sha256: String,
    pub grid: Option<String>,
    pub seed: u64,
}

impl Header {
    fn lines(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("tool", self.tool.to_string()), ("command", self.command.to_string())];
        if let Some(n) = &self.scenario {
            out.push(("scenario", n.clone()));
        }
        out.push(("scenario_sha256", self.scenario_sha256.clone()));
        if let Some(g) = &self.grid {
            out.push(("grid_spec", g.clone()));
        }
        out.push(("seed", self.seed.to_string()));
        out
    }
}

pub fn grid_spec(g: &DomainGrid<f64>) -> String {
    let b = g.bounds();
    format!("{}x{} [{}, {}]x[{}, {}]", g.n1(), g.n2(), b.x1.0, b.x1.1, b.x2.0, b.x2.1)
}

pub struct Writer {
    dir: PathBuf,
    pub header: Header,
}

#[derive(Serialize)]
struct WithHeader<'a, B: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a B,
}

impl Writer {
    pub fn new(dir: &Path, header: Header) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header,
        })
    }

    fn write(&self, name: &str, text: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }

    /// Pretty JSON object with the header under `"header"`.
    pub fn json<B: Serialize>(&self, name: &str, body: &B) -> Result<(), Failure> {
        let doc = WithHeader {
            header: &self.header,
            body,
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn field<V: CsvValue<f64>>(&self, name: &str, f: &Field<f64, V>) -> Result<(), Failure> {
        self.write(name, &f.to_csv(&self.header.lines()))
    }

    /// CSV with the header as `#` lines followed by `body`.
    pub fn csv(&self, name: &str, body: &str) -> Result<(), Failure> {
        let mut text = String::new();
        for (k, v) in self.header.lines() {
            let _ = writeln!(text, "# {k}: {v}");
        }
        text.push_str(body);
        self.write(name, &text)
    }
}

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column names of a [`Named`] row type.
pub trait RowNames<const N: usize> {
    const NAMES: [&'static str; N];
}

/// A row type bound to its column names.
#[derive(Debug, Clone)]
pub struct Named<S, const N: usize> {
    pub values: [f64; N],
    _names: std::marker::PhantomData<S>,
}

impl<S, const N: usize> Named<S, N> {
    pub fn new(values: [f64; N]) -> Self {
        Self {
            values,
            _names: std::marker::PhantomData,
        }
    }
}

impl<S: RowNames<N>, const N: usize> CsvValue<f64> for Named<S, N> {
    fn columns() -> Vec<String> {
        S::NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn push_components(&self, out: &mut Vec<f64>) {
        out.extend(self.values);
    }

    fn from_components(c: &[f64]) -> drillrig::Result<Self> {
        let values = c
            .try_into()
            .map_err(|_| drillrig::Error::Format(format!("expected {N} columns")))?;
        Ok(Self::new(values))
    }
}
