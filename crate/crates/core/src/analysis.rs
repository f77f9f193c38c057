//! Post-processing of sweep tables: finite-difference sensitivity maps and
//! minimum-squeezing phase boundaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{self, DomainError};
use crate::sweep::{fmt_f64, SweepTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("axis {axis} has {len} point(s); finite differences need at least 2")]
    DegenerateAxis { axis: &'static str, len: usize },
    #[error("distance d={0} is not in the table")]
    UnknownDistance(u32),
    #[error("no successful trials at s_db={s_db}, p_base={p_base}, d={d}; logical fidelity is undefined")]
    MissingFidelity { s_db: f64, p_base: f64, d: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difference {
    Central,
    Forward,
    Backward,
}

impl Difference {
    pub fn as_str(&self) -> &'static str {
        match self {
            Difference::Central => "central",
            Difference::Forward => "forward",
            Difference::Backward => "backward",
        }
    }
}

/// Derivative of `values` against `xs` at index `i`, using neighbouring grid
/// points. Returns `(gradient, half-width of the stencil, scheme)`.
fn grid_derivative(xs: &[f64], values: &[f64], i: usize) -> (f64, f64, Difference) {
    let last = xs.len() - 1;
    if i == 0 {
        let h = xs[1] - xs[0];
        ((values[1] - values[0]) / h, h, Difference::Forward)
    } else if i == last {
        let h = xs[last] - xs[last - 1];
        ((values[last] - values[last - 1]) / h, h, Difference::Backward)
    } else {
        let span = xs[i + 1] - xs[i - 1];
        ((values[i + 1] - values[i - 1]) / span, span / 2.0, Difference::Central)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityCell {
    pub s_db: f64,
    pub p_base: f64,
    /// ∂F_log/∂p_base, 1/probability.
    pub df_dloss: f64,
    /// ∂F_log/∂s, 1/dB.
    pub df_dsqueeze: f64,
    pub loss_step: f64,
    pub squeeze_step: f64,
    pub loss_scheme: Difference,
    pub squeeze_scheme: Difference,
}

impl SensitivityCell {
    pub fn scheme_label(&self) -> String {
        format!(
            "loss={};squeeze={}",
            self.loss_scheme.as_str(),
            self.squeeze_scheme.as_str()
        )
    }
}

/// Gradients of the logical fidelity for one distance, in `(p_base, s_db)`
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityGrid {
    pub d: u32,
    pub s_db: Vec<f64>,
    pub p_base: Vec<f64>,
    pub cells: Vec<SensitivityCell>,
    /// Whether the source sweep used common random numbers.
    pub common_random_numbers: bool,
}

impl SensitivityGrid {
    pub fn get(&self, si: usize, pi: usize) -> &SensitivityCell {
        &self.cells[pi * self.s_db.len() + si]
    }

    pub fn max_abs_dloss(&self) -> f64 {
        self.cells.iter().map(|c| c.df_dloss.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_dsqueeze(&self) -> f64 {
        self.cells.iter().map(|c| c.df_dsqueeze.abs()).fold(0.0, f64::max)
    }
}

pub fn sensitivity_maps(table: &SweepTable, d: u32) -> Result<SensitivityGrid, AnalysisError> {
    let (ns, np) = (table.s_db.len(), table.p_base.len());
    if ns < 2 {
        return Err(AnalysisError::DegenerateAxis { axis: "s_db", len: ns });
    }
    if np < 2 {
        return Err(AnalysisError::DegenerateAxis { axis: "p_base", len: np });
    }
    let di = table.distance_index(d).ok_or(AnalysisError::UnknownDistance(d))?;

    let mut f = vec![0.0; ns * np];
    for pi in 0..np {
        for si in 0..ns {
            let r = table.get(si, pi, di);
            f[pi * ns + si] = r.f_log.ok_or(AnalysisError::MissingFidelity {
                s_db: r.s_db,
                p_base: r.p_base,
                d,
            })?;
        }
    }

    let mut cells = Vec::with_capacity(ns * np);
    for pi in 0..np {
        let row: Vec<f64> = (0..ns).map(|si| f[pi * ns + si]).collect();
        for si in 0..ns {
            let col: Vec<f64> = (0..np).map(|pj| f[pj * ns + si]).collect();
            let (df_dsqueeze, squeeze_step, squeeze_scheme) = grid_derivative(&table.s_db, &row, si);
            let (df_dloss, loss_step, loss_scheme) = grid_derivative(&table.p_base, &col, pi);
            cells.push(SensitivityCell {
                s_db: table.s_db[si],
                p_base: table.p_base[pi],
                df_dloss,
                df_dsqueeze,
                loss_step,
                squeeze_step,
                loss_scheme,
                squeeze_scheme,
            });
        }
    }
    Ok(SensitivityGrid {
        d,
        s_db: table.s_db.clone(),
        p_base: table.p_base.clone(),
        cells,
        common_random_numbers: table.common_random_numbers,
    })
}

pub const SENSITIVITY_COLUMNS: [&str; 5] = ["s_db", "p_base", "dF_dloss", "dF_dsqueeze", "scheme"];

pub fn write_sensitivity_to<W: Write>(grid: &SensitivityGrid, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SENSITIVITY_COLUMNS)?;
    for c in &grid.cells {
        w.write_record([
            fmt_f64(c.s_db),
            fmt_f64(c.p_base),
            fmt_f64(c.df_dloss),
            fmt_f64(c.df_dsqueeze),
            c.scheme_label(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundaryTargets {
    /// Minimum success probability.
    pub p_star: f64,
    /// Minimum logical fidelity.
    pub f_star: f64,
}

impl Default for BoundaryTargets {
    fn default() -> Self {
        Self {
            p_star: 0.95,
            f_star: 0.79,
        }
    }
}

impl BoundaryTargets {
    pub fn validate(&self) -> Result<(), DomainError> {
        for (name, v) in [("p_star", self.p_star), ("f_star", self.f_star)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DomainError::new(name, v, format!("0 <= {name} <= 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub p_base: f64,
    pub d: u32,
    /// Smallest grid squeezing meeting both targets; `None` if unattainable.
    pub s_min: Option<f64>,
}

/// Minimum squeezing per `(p_base, d)`, in `(d, p_base)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBoundary {
    pub points: Vec<BoundaryPoint>,
}

impl PhaseBoundary {
    pub fn s_min(&self, p_base: f64, d: u32) -> Option<Option<f64>> {
        self.points
            .iter()
            .find(|b| b.p_base == p_base && b.d == d)
            .map(|b| b.s_min)
    }
}

pub fn phase_boundary(table: &SweepTable, targets: &BoundaryTargets) -> PhaseBoundary {
    let mut points = Vec::with_capacity(table.distances.len() * table.p_base.len());
    for (di, &d) in table.distances.iter().enumerate() {
        for (pi, &p_base) in table.p_base.iter().enumerate() {
            let s_min = (0..table.s_db.len())
                .map(|si| table.get(si, pi, di))
                .find(|r| r.p_succ >= targets.p_star && r.f_log.is_some_and(|f| f >= targets.f_star))
                .map(|r| r.s_db);
            points.push(BoundaryPoint { p_base, d, s_min });
        }
    }
    PhaseBoundary { points }
}

pub const BOUNDARY_COLUMNS: [&str; 4] = ["p_base", "d", "s_min_db", "attainable"];

pub fn write_boundary_to<W: Write>(boundary: &PhaseBoundary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUNDARY_COLUMNS)?;
    for b in &boundary.points {
        w.write_record([
            fmt_f64(b.p_base),
            b.d.to_string(),
            b.s_min.map(fmt_f64).unwrap_or_default(),
            b.s_min.is_some().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(std::io::BufWriter<std::fs::File>) -> csv::Result<()>) -> error::Result<()> {
    let file = std::fs::File::create(path).map_err(|source| error::Error::Io {
        path: path.to_owned(),
        source,
    })?;
    f(std::io::BufWriter::new(file)).map_err(|source| error::Error::Csv {
        path: path.to_owned(),
        source,
    })
}

pub fn write_sensitivity_csv(grid: &SensitivityGrid, path: &Path) -> error::Result<()> {
    write_file(path, |w| write_sensitivity_to(grid, w))
}

pub fn write_boundary_csv(boundary: &PhaseBoundary, path: &Path) -> error::Result<()> {
    write_file(path, |w| write_boundary_to(boundary, w))
}
