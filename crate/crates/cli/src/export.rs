//! CSV, VTK and the artifact directory.
//!
//! Floats go out as `{:.16e}` (17 significant digits), which re-parses to the
//! identical `f64`. Every file is staged in a temporary file next to its
//! destination and renamed into place, so a reader never sees a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sps_core::multiplicity::CatalogEntry;
use sps_core::solver::TraceRecord;
use sps_core::grid::vtk::vtk_string;
use sps_core::{ScalarField, SweepRecord};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn to_csv<R: CsvRow>(rows: &[R]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(R::HEADER).expect("in-memory CSV");
    for row in rows {
        w.write_record(row.fields()).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
}

fn from_csv<R: CsvRow + for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<R>, csv::Error> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != R::HEADER {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected header {header:?}"),
        )));
    }
    r.deserialize().collect()
}

pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub lambda: f64,
    pub resolution: usize,
    pub m_p: f64,
    pub m_tilde_p: f64,
    pub t_star_simple: f64,
    pub t_star_full: f64,
    #[serde(rename = "R_est")]
    pub r_est: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_s: f64,
}

impl From<&SweepRecord> for SweepRow {
    fn from(s: &SweepRecord) -> Self {
        SweepRow {
            p: s.p,
            lambda: s.lambda,
            resolution: s.resolution,
            m_p: s.m_p,
            m_tilde_p: s.m_tilde_p,
            t_star_simple: s.t_star_simple,
            t_star_full: s.t_star_full,
            r_est: s.r_est,
            iterations: s.iterations,
            converged: s.converged,
            runtime_s: s.runtime_s,
        }
    }
}

impl CsvRow for SweepRow {
    const HEADER: &'static [&'static str] = &[
        "p",
        "lambda",
        "resolution",
        "m_p",
        "m_tilde_p",
        "t_star_simple",
        "t_star_full",
        "R_est",
        "iterations",
        "converged",
        "runtime_s",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.p),
            fmt_f64(self.lambda),
            self.resolution.to_string(),
            fmt_f64(self.m_p),
            fmt_f64(self.m_tilde_p),
            fmt_f64(self.t_star_simple),
            fmt_f64(self.t_star_full),
            fmt_f64(self.r_est),
            self.iterations.to_string(),
            self.converged.to_string(),
            fmt_f64(self.runtime_s),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogRow {
    pub id: usize,
    pub m: f64,
    pub g_residual: f64,
    pub ps_residual: f64,
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
    pub membership: String,
    pub sublevel: bool,
}

impl CatalogRow {
    pub fn new(id: usize, e: &CatalogEntry) -> Self {
        CatalogRow {
            id,
            m: e.state.m,
            g_residual: e.state.nehari_residual,
            ps_residual: e.state.ps_residual,
            bx: e.barycenter[0],
            by: e.barycenter[1],
            bz: e.barycenter[2],
            membership: e.membership.as_str().to_owned(),
            sublevel: e.sublevel,
        }
    }
}

impl CsvRow for CatalogRow {
    const HEADER: &'static [&'static str] =
        &["id", "m", "g_residual", "ps_residual", "bx", "by", "bz", "membership", "sublevel"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.id.to_string(),
            fmt_f64(self.m),
            fmt_f64(self.g_residual),
            fmt_f64(self.ps_residual),
            fmt_f64(self.bx),
            fmt_f64(self.by),
            fmt_f64(self.bz),
            self.membership.clone(),
            self.sublevel.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub nehari_residual: f64,
    pub ps_residual: f64,
    pub step: f64,
}

impl From<&TraceRecord> for TraceRow {
    fn from(t: &TraceRecord) -> Self {
        TraceRow {
            iteration: t.iteration,
            energy: t.energy,
            nehari_residual: t.nehari_residual,
            ps_residual: t.ps_residual,
            step: t.step,
        }
    }
}

impl CsvRow for TraceRow {
    const HEADER: &'static [&'static str] = &["iteration", "energy", "nehari_residual", "ps_residual", "step"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.iteration.to_string(),
            fmt_f64(self.energy),
            fmt_f64(self.nehari_residual),
            fmt_f64(self.ps_residual),
            fmt_f64(self.step),
        ]
    }
}

/// One row per instanton scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstantonRow {
    pub scale: f64,
    pub peak: f64,
    pub grad_energy: f64,
    pub crit_norm: f64,
    pub s: f64,
    pub tail_bound: f64,
}

impl CsvRow for InstantonRow {
    const HEADER: &'static [&'static str] = &["scale", "peak", "grad_energy", "crit_norm", "s", "tail_bound"];

    fn fields(&self) -> Vec<String> {
        [self.scale, self.peak, self.grad_energy, self.crit_norm, self.s, self.tail_bound]
            .into_iter()
            .map(fmt_f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonRow {
    pub sample: usize,
    pub energy_form: f64,
    pub coupling: f64,
    pub green_rel: f64,
    pub min_phi: f64,
    pub homogeneity_rel: f64,
    pub cg_iterations: usize,
}

impl CsvRow for PoissonRow {
    const HEADER: &'static [&'static str] =
        &["sample", "energy_form", "coupling", "green_rel", "min_phi", "homogeneity_rel", "cg_iterations"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.sample.to_string(),
            fmt_f64(self.energy_form),
            fmt_f64(self.coupling),
            fmt_f64(self.green_rel),
            fmt_f64(self.min_phi),
            fmt_f64(self.homogeneity_rel),
            self.cg_iterations.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRow {
    pub p: f64,
    pub pair: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

impl CsvRow for GradcheckRow {
    const HEADER: &'static [&'static str] = &["p", "pair", "analytic", "finite_difference", "rel_error"];

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.p),
            self.pair.to_string(),
            fmt_f64(self.analytic),
            fmt_f64(self.finite_difference),
            fmt_f64(self.rel_error),
        ]
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    to_csv(rows)
}

pub fn catalog_csv(rows: &[CatalogRow]) -> String {
    to_csv(rows)
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    to_csv(rows)
}

pub fn instanton_csv(rows: &[InstantonRow]) -> String {
    to_csv(rows)
}

pub fn poisson_csv(rows: &[PoissonRow]) -> String {
    to_csv(rows)
}

pub fn gradcheck_csv(rows: &[GradcheckRow]) -> String {
    to_csv(rows)
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>, csv::Error> {
    from_csv(text)
}

pub fn parse_catalog_csv(text: &str) -> Result<Vec<CatalogRow>, csv::Error> {
    from_csv(text)
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, csv::Error> {
    from_csv(text)
}

pub fn field_vtk(field: &ScalarField, name: &str, title: &str) -> String {
    vtk_string(field, name, title)
}

/// Sum of the values in the `SCALARS` block of a legacy VTK file.
pub fn vtk_scalar_sum(text: &str) -> Option<f64> {
    let mut lines = text.lines();
    lines.by_ref().find(|l| l.starts_with("LOOKUP_TABLE"))?;
    lines.map(|l| l.trim().parse::<f64>().ok()).sum()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Writes files into one directory and remembers their hashes.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(ArtifactDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> std::io::Result<()> {
        write_atomic(&self.root.join(name), contents)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord {
            path: name.to_owned(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents),
        });
        Ok(())
    }

    /// Deletes every file written so far.
    pub fn discard(&mut self) {
        for f in self.files.drain(..) {
            let _ = std::fs::remove_file(self.root.join(&f.path));
        }
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
