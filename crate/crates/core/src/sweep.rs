//! Parameter-grid sweep engine and its CSV table format.
//!
//! The Monte Carlo part of a grid point depends only on `(s_db, p_base)`, so
//! each such cell is simulated once and post-processed for every distance.
//! Under common random numbers every cell draws trial `i` from the same
//! substream, which makes differences between neighbouring cells smooth.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::injection::{estimate_point, InjectionNoise, PointAggregate, RusConfig};
use crate::noise::NoiseParams;
use crate::outer_code::{effective_phys_rate, logical_error_rate, protect_fidelity, OuterCodeParams};
use crate::stream::Substreams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub s_db: Vec<f64>,
    pub p_base: Vec<f64>,
    pub distances: Vec<u32>,
    pub n_trials: u64,
    pub master_seed: u64,
    /// Reuse trial substream `i` at every grid point.
    pub common_random_numbers: bool,
}

pub const DEFAULT_MASTER_SEED: u64 = 20_240_601;

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            s_db: vec![8.0, 10.0, 12.0, 14.0, 16.0],
            p_base: vec![0.01, 0.02, 0.03],
            distances: vec![1, 3, 5, 7],
            n_trials: 5000,
            master_seed: DEFAULT_MASTER_SEED,
            common_random_numbers: true,
        }
    }
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Spec(msg));
        if self.s_db.is_empty() || self.p_base.is_empty() || self.distances.is_empty() {
            return fail("s_db, p_base and distances must be non-empty".into());
        }
        if self.n_trials < 1 {
            return fail("n_trials must be >= 1".into());
        }
        if !strictly_increasing(&self.s_db) || !strictly_increasing(&self.p_base) || !strictly_increasing(&self.distances) {
            return fail("grid axes must be strictly increasing".into());
        }
        if let Some(s) = self.s_db.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return fail(format!("s_db value {s} is not a finite non-negative number"));
        }
        if let Some(p) = self.p_base.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return fail(format!("p_base value {p} is outside [0, 1]"));
        }
        if let Some(d) = self.distances.iter().find(|d| *d % 2 == 0) {
            return fail(format!("distance {d} is not odd"));
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.s_db.len() * self.p_base.len() * self.distances.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub s_db: f64,
    pub p_base: f64,
    pub d: u32,
    pub p_succ: f64,
    pub p_succ_se: f64,
    /// `None` when no trial succeeded.
    pub avg_rounds: Option<f64>,
    pub avg_rounds_se: Option<f64>,
    pub f_inj: Option<f64>,
    pub f_inj_se: Option<f64>,
    pub p_phys: f64,
    pub p_l: f64,
    pub f_log: Option<f64>,
    pub above_threshold: bool,
    pub n_trials: u64,
    pub point_seed: u64,
}

/// A complete sweep over `s_db × p_base × d`, stored in `(d, p_base, s_db)`
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub s_db: Vec<f64>,
    pub p_base: Vec<f64>,
    pub distances: Vec<u32>,
    pub cells: Vec<SweepResult>,
    pub common_random_numbers: bool,
}

impl SweepTable {
    fn index(&self, si: usize, pi: usize, di: usize) -> usize {
        (di * self.p_base.len() + pi) * self.s_db.len() + si
    }

    pub fn get(&self, si: usize, pi: usize, di: usize) -> &SweepResult {
        &self.cells[self.index(si, pi, di)]
    }

    pub fn distance_index(&self, d: u32) -> Option<usize> {
        self.distances.iter().position(|&x| x == d)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Runs every grid point. Output is identical for any worker count.
pub fn run_sweep(
    grid: &GridSpec,
    noise_template: &NoiseParams,
    code_template: &OuterCodeParams,
    rus: &RusConfig,
) -> Result<SweepTable> {
    grid.validate()?;
    noise_template.validate()?;
    rus.validate()?;
    for &d in &grid.distances {
        code_template.with_distance(d).validate()?;
    }

    let ns = grid.s_db.len();
    let mc_cells: Vec<(usize, usize)> = (0..grid.p_base.len())
        .flat_map(|pi| (0..ns).map(move |si| (pi, si)))
        .collect();

    // (p_z, aggregate, seed) per (p_base, s_db) cell
    let mc: Vec<(f64, PointAggregate, u64)> = mc_cells
        .par_iter()
        .map(|&(pi, si)| -> Result<_> {
            let params = NoiseParams {
                s_db: grid.s_db[si],
                p_base: grid.p_base[pi],
                ..*noise_template
            };
            let noise = InjectionNoise::from_params(&params)?;
            let point_index = if grid.common_random_numbers {
                0
            } else {
                (pi * ns + si) as u64
            };
            let streams = Substreams::for_point(grid.master_seed, point_index);
            let agg = estimate_point(rus, &noise, grid.n_trials, &streams);
            Ok((noise.data.p_z(), agg, streams.point_seed()))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(grid.n_points());
    for &d in &grid.distances {
        let code = code_template.with_distance(d);
        for (pi, &p_base) in grid.p_base.iter().enumerate() {
            for (si, &s_db) in grid.s_db.iter().enumerate() {
                let (p_z, agg, seed) = &mc[pi * ns + si];
                let p_phys = effective_phys_rate(*p_z, noise_template.p_dep_out, &code);
                let lr = logical_error_rate(p_phys, &code);
                let f_inj = agg.f_inj();
                cells.push(SweepResult {
                    s_db,
                    p_base,
                    d,
                    p_succ: agg.p_succ(),
                    p_succ_se: agg.p_succ_se(),
                    avg_rounds: agg.avg_rounds(),
                    avg_rounds_se: agg.avg_rounds_se(),
                    f_inj,
                    f_inj_se: agg.f_inj_se(),
                    p_phys,
                    p_l: lr.p_l,
                    f_log: f_inj.map(|f| protect_fidelity(f, lr.p_l)),
                    above_threshold: lr.above_threshold,
                    n_trials: agg.n_trials,
                    point_seed: *seed,
                });
            }
        }
    }

    Ok(SweepTable {
        s_db: grid.s_db.clone(),
        p_base: grid.p_base.clone(),
        distances: grid.distances.clone(),
        cells,
        common_random_numbers: grid.common_random_numbers,
    })
}

pub const SWEEP_COLUMNS: [&str; 15] = [
    "s_db",
    "p_base",
    "d",
    "p_succ",
    "p_succ_se",
    "avg_rounds",
    "avg_rounds_se",
    "f_inj",
    "f_inj_se",
    "p_phys",
    "p_l",
    "f_log",
    "above_threshold",
    "n_trials",
    "point_seed",
];

/// 17 significant digits; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv_to<W: Write>(table: &SweepTable, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in &table.cells {
        w.write_record([
            fmt_f64(r.s_db),
            fmt_f64(r.p_base),
            r.d.to_string(),
            fmt_f64(r.p_succ),
            fmt_f64(r.p_succ_se),
            fmt_opt(r.avg_rounds),
            fmt_opt(r.avg_rounds_se),
            fmt_opt(r.f_inj),
            fmt_opt(r.f_inj_se),
            fmt_f64(r.p_phys),
            fmt_f64(r.p_l),
            fmt_opt(r.f_log),
            r.above_threshold.to_string(),
            r.n_trials.to_string(),
            r.point_seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    write_csv_to(table, std::io::BufWriter::new(file)).map_err(|source| Error::Csv {
        path: path.to_owned(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<SweepTable> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    read_csv_from(file).map_err(|e| match e {
        Error::Table { msg, .. } => Error::Table {
            path: path.to_owned(),
            msg,
        },
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

pub fn read_csv_from<R: std::io::Read>(input: R) -> Result<SweepTable> {
    let bad = |msg: String| Error::Table {
        path: Default::default(),
        msg,
    };
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|source| Error::Csv {
        path: Default::default(),
        source,
    })?;
    if headers.iter().ne(SWEEP_COLUMNS) {
        return Err(bad(format!(
            "expected columns {}, found {}",
            SWEEP_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv {
            path: Default::default(),
            source,
        })?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let f = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {}: {e}", line + 1, SWEEP_COLUMNS[i])))
        };
        let of = |i: usize| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse::<u64>()
                .map_err(|e| bad(format!("row {}: {}: {e}", line + 1, SWEEP_COLUMNS[i])))
        };
        let above = match field(12) {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("row {}: above_threshold: {other:?}", line + 1))),
        };
        rows.push(SweepResult {
            s_db: f(0)?,
            p_base: f(1)?,
            d: int(2)? as u32,
            p_succ: f(3)?,
            p_succ_se: f(4)?,
            avg_rounds: of(5)?,
            avg_rounds_se: of(6)?,
            f_inj: of(7)?,
            f_inj_se: of(8)?,
            p_phys: f(9)?,
            p_l: f(10)?,
            f_log: of(11)?,
            above_threshold: above,
            n_trials: int(13)?,
            point_seed: int(14)?,
        });
    }
    table_from_rows(rows).map_err(bad)
}

/// Rebuilds axes from rows and checks the grid is complete.
pub fn table_from_rows(mut rows: Vec<SweepResult>) -> std::result::Result<SweepTable, String> {
    if rows.is_empty() {
        return Err("table has no rows".into());
    }
    let mut s_db: Vec<f64> = rows.iter().map(|r| r.s_db).collect();
    let mut p_base: Vec<f64> = rows.iter().map(|r| r.p_base).collect();
    let mut distances: Vec<u32> = rows.iter().map(|r| r.d).collect();
    s_db.sort_by(f64::total_cmp);
    s_db.dedup();
    p_base.sort_by(f64::total_cmp);
    p_base.dedup();
    distances.sort_unstable();
    distances.dedup();
    let expected = s_db.len() * p_base.len() * distances.len();
    if rows.len() != expected {
        return Err(format!(
            "incomplete grid: {} rows for {}×{}×{} axes",
            rows.len(),
            s_db.len(),
            p_base.len(),
            distances.len()
        ));
    }
    rows.sort_by(|a, b| {
        a.d.cmp(&b.d)
            .then(a.p_base.total_cmp(&b.p_base))
            .then(a.s_db.total_cmp(&b.s_db))
    });
    let mut i = 0;
    for &d in &distances {
        for &p in &p_base {
            for &s in &s_db {
                let r = &rows[i];
                if r.d != d || r.p_base != p || r.s_db != s {
                    return Err(format!("missing or duplicate cell near s_db={s}, p_base={p}, d={d}"));
                }
                i += 1;
            }
        }
    }
    let common_random_numbers = rows.iter().all(|r| r.point_seed == rows[0].point_seed);
    Ok(SweepTable {
        s_db,
        p_base,
        distances,
        cells: rows,
        common_random_numbers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::injection::BranchPolicy;
    use proptest::prelude::*;

    fn small_grid() -> GridSpec {
        GridSpec {
            s_db: vec![8.0, 12.0],
            p_base: vec![0.01, 0.03],
            distances: vec![1, 5],
            n_trials: 300,
            ..GridSpec::default()
        }
    }

    #[test]
    fn noiseless_single_point() {
        let grid = GridSpec {
            s_db: vec![10.0],
            p_base: vec![0.0],
            distances: vec![3],
            n_trials: 200,
            ..GridSpec::default()
        };
        let rus = RusConfig {
            branch_policy: BranchPolicy::Designated { p_branch_fail: 0.0 },
            ..RusConfig::default()
        };
        let noise = NoiseParams::noiseless();
        let t = run_sweep(&grid, &noise, &OuterCodeParams::default(), &rus).unwrap();
        assert_eq!(t.len(), 1);
        let r = &t.cells[0];
        assert_eq!(r.p_succ, 1.0);
        assert_eq!(r.avg_rounds, Some(1.0));
        assert!((r.f_inj.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.p_phys, 0.0);
        assert_eq!(r.p_l, 0.0);
        assert!((r.f_log.unwrap() - 1.0).abs() < 1e-12);

        let mut buf = Vec::new();
        write_csv_to(&t, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = GridSpec::default();
        let cases = [
            GridSpec { n_trials: 0, ..base.clone() },
            GridSpec { s_db: vec![], ..base.clone() },
            GridSpec { s_db: vec![10.0, 8.0], ..base.clone() },
            GridSpec { distances: vec![2], ..base.clone() },
            GridSpec { p_base: vec![1.5], ..base.clone() },
        ];
        for g in cases {
            let err = run_sweep(&g, &NoiseParams::default(), &OuterCodeParams::default(), &RusConfig::default());
            assert!(matches!(err, Err(Error::Spec(_))), "{g:?}");
        }
    }

    #[test]
    fn rows_sorted_and_reproducible() {
        let grid = small_grid();
        let run = || {
            run_sweep(&grid, &NoiseParams::default(), &OuterCodeParams::default(), &RusConfig::default()).unwrap()
        };
        let a = run();
        let keys: Vec<_> = a.cells.iter().map(|r| (r.d, r.p_base, r.s_db)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2)));
        assert_eq!(keys, sorted);

        let mut x = Vec::new();
        let mut y = Vec::new();
        write_csv_to(&a, &mut x).unwrap();
        write_csv_to(&run(), &mut y).unwrap();
        assert_eq!(x, y);

        let back = read_csv_from(&x[..]).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn crn_flag_controls_point_seeds() {
        let mut grid = small_grid();
        let t = run_sweep(&grid, &NoiseParams::default(), &OuterCodeParams::default(), &RusConfig::default()).unwrap();
        assert!(t.cells.iter().all(|r| r.point_seed == t.cells[0].point_seed));
        grid.common_random_numbers = false;
        let t = run_sweep(&grid, &NoiseParams::default(), &OuterCodeParams::default(), &RusConfig::default()).unwrap();
        assert!(t.cells.iter().any(|r| r.point_seed != t.cells[0].point_seed));
        let mut buf = Vec::new();
        write_csv_to(&t, &mut buf).unwrap();
        assert!(!read_csv_from(&buf[..]).unwrap().common_random_numbers);
    }

    #[test]
    fn reader_rejects_bad_tables() {
        assert!(read_csv_from("a,b\n1,2\n".as_bytes()).is_err());
        let grid = small_grid();
        let t = run_sweep(&grid, &NoiseParams::default(), &OuterCodeParams::default(), &RusConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        let err = read_csv_from(truncated.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("incomplete grid"), "{err}");
    }

    proptest! {
        #[test]
        fn float_format_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
