//! Subcommand implementations. Each writes its CSV outputs plus a manifest
//! and returns a short human-readable summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::analysis::{phase_boundary, sensitivity_maps, write_boundary_csv, write_sensitivity_csv};
use crate::calibrate::calibrate;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::sweep::{read_csv, run_sweep, write_csv, SweepTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct CommandReport {
    pub summary: String,
    pub outputs: Vec<PathBuf>,
    /// False if a constraint was violated even though outputs were written.
    pub ok: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(cfg.to_json().as_bytes())
}

fn ensure_dir(cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes `<command>.manifest.txt` next to the outputs. Nothing in it depends
/// on the clock or the worker count.
fn write_manifest(cfg: &RunConfig, command: &str, outputs: &[PathBuf], notes: &[String]) -> Result<PathBuf> {
    let mut s = String::new();
    let _ = writeln!(s, "lidmas {VERSION}");
    let _ = writeln!(s, "command: {command}");
    let _ = writeln!(s, "master_seed: {}", cfg.grid.master_seed);
    let _ = writeln!(s, "config_sha256: {}", config_hash(cfg));
    let _ = writeln!(s, "common_random_numbers: {}", cfg.grid.common_random_numbers);
    for n in notes {
        let _ = writeln!(s, "{n}");
    }
    let _ = writeln!(s, "outputs:");
    for p in outputs {
        let bytes = std::fs::read(p).map_err(io_err(p))?;
        let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
        let _ = writeln!(s, "  {name} sha256={}", sha256_hex(&bytes));
    }
    let path = cfg.output.manifest_path(command);
    std::fs::write(&path, s).map_err(io_err(&path))?;
    Ok(path)
}

fn sweep_table(cfg: &RunConfig) -> Result<SweepTable> {
    run_sweep(&cfg.grid, &cfg.noise, &cfg.code, &cfg.rus_config())
}

/// Loads the sweep table from the output directory, or runs the sweep when
/// `regenerate` is set.
fn load_or_regenerate(cfg: &RunConfig, regenerate: bool) -> Result<(SweepTable, Vec<PathBuf>)> {
    let path = cfg.output.sweep_path();
    if regenerate {
        let table = sweep_table(cfg)?;
        write_csv(&table, &path)?;
        return Ok((table, vec![path]));
    }
    if !path.exists() {
        return Err(Error::MissingTable { path });
    }
    Ok((read_csv(&path)?, Vec::new()))
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<CommandReport> {
    ensure_dir(cfg)?;
    let table = sweep_table(cfg)?;
    let path = cfg.output.sweep_path();
    write_csv(&table, &path)?;
    let above = table.cells.iter().filter(|r| r.above_threshold).count();
    let manifest = write_manifest(cfg, "sweep", std::slice::from_ref(&path), &[])?;
    let summary = format!(
        "sweep: wrote {} rows ({} s_db × {} p_base × {} d) with {} trials per point, master seed {}, \
         common random numbers {}; {} rows at or above threshold. Table: {}",
        table.len(),
        table.s_db.len(),
        table.p_base.len(),
        table.distances.len(),
        cfg.grid.n_trials,
        cfg.grid.master_seed,
        if table.common_random_numbers { "on" } else { "off" },
        above,
        path.display(),
    );
    Ok(CommandReport {
        summary,
        outputs: vec![path, manifest],
        ok: true,
    })
}

pub fn cmd_sensitivity(cfg: &RunConfig, regenerate: bool) -> Result<CommandReport> {
    ensure_dir(cfg)?;
    let (table, mut outputs) = load_or_regenerate(cfg, regenerate)?;
    let mut lines = Vec::new();
    let mut rows = 0;
    for &d in &table.distances {
        let grid = sensitivity_maps(&table, d)?;
        let path = cfg.output.sensitivity_path(d);
        write_sensitivity_csv(&grid, &path)?;
        rows += grid.cells.len();
        lines.push(format!(
            "d={d}: max|dF/dp_base|={:.3e}, max|dF/ds|={:.3e}",
            grid.max_abs_dloss(),
            grid.max_abs_dsqueeze()
        ));
        outputs.push(path);
    }
    let notes = vec![
        "finite_differences: grid-spacing steps; central at interior points, one-sided at edges (see scheme column)".to_string(),
        format!("source_table_crn: {}", table.common_random_numbers),
    ];
    let manifest = write_manifest(cfg, "sensitivity", &outputs, &notes)?;
    let summary = format!(
        "sensitivity: wrote {} files with {rows} rows in total from {} sweep rows, master seed {}{}; {}.",
        table.distances.len(),
        table.len(),
        cfg.grid.master_seed,
        if table.common_random_numbers { "" } else { " (no common random numbers: gradients carry extra MC noise)" },
        lines.join("; "),
    );
    outputs.push(manifest);
    Ok(CommandReport {
        summary,
        outputs,
        ok: true,
    })
}

pub fn cmd_boundary(cfg: &RunConfig, regenerate: bool) -> Result<CommandReport> {
    ensure_dir(cfg)?;
    let (table, mut outputs) = load_or_regenerate(cfg, regenerate)?;
    let boundary = phase_boundary(&table, &cfg.targets);
    let path = cfg.output.boundary_path();
    write_boundary_csv(&boundary, &path)?;
    outputs.push(path.clone());
    let notes = vec![format!("targets: p_star={} f_star={}", cfg.targets.p_star, cfg.targets.f_star)];
    let manifest = write_manifest(cfg, "boundary", &outputs, &notes)?;
    outputs.push(manifest);
    let attainable = boundary.points.iter().filter(|b| b.s_min.is_some()).count();
    let summary = format!(
        "boundary: {} of {} (p_base, d) pairs reach P_succ >= {} and F_log >= {} on the grid; \
         read {} sweep rows, master seed {}. Table: {}",
        attainable,
        boundary.points.len(),
        cfg.targets.p_star,
        cfg.targets.f_star,
        table.len(),
        cfg.grid.master_seed,
        path.display(),
    );
    Ok(CommandReport {
        summary,
        outputs,
        ok: true,
    })
}

pub fn cmd_calibrate(cfg: &RunConfig) -> Result<CommandReport> {
    ensure_dir(cfg)?;
    let outcome = calibrate(cfg)?;
    let calibrated = cfg.output.calibrated_path();
    std::fs::write(&calibrated, outcome.config.to_json() + "\n").map_err(io_err(&calibrated))?;
    let report = cfg.output.report_path();
    let text = outcome.report();
    std::fs::write(&report, &text).map_err(io_err(&report))?;
    let outputs = vec![calibrated.clone(), report];
    let manifest = write_manifest(cfg, "calibrate", &outputs, &[])?;
    let failing: Vec<&str> = outcome.brackets.iter().filter(|b| !b.passed).map(|b| b.name).collect();
    let summary = format!(
        "calibrate: {} after {} objective evaluations, master seed {}; {}. Constants: {}\n{}",
        if outcome.identity { "targets already met, constants unchanged" } else { "search finished" },
        outcome.evaluations,
        cfg.grid.master_seed,
        if failing.is_empty() { "all brackets met".to_string() } else { format!("failing brackets: {}", failing.join(", ")) },
        calibrated.display(),
        text.trim_end(),
    );
    let mut outputs = outputs;
    outputs.push(manifest);
    Ok(CommandReport {
        summary,
        outputs,
        ok: outcome.passed(),
    })
}
