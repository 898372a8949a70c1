use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use fracpredict_core::rng::{derive_seed, tag};
use fracpredict_core::ErrorStats;
use rayon::prelude::*;

use super::experiment::{run_experiment, Method};
use crate::config::{ExperimentConfig, ProcessSpec, Scale, TrainSection};
use crate::error::{Error, Result};

/// Table layouts: 1 and 3 sweep `(s, N, H)` at `T = 10`; 2 and 4 sweep
/// `(T, H)` at `s = 5`. Tables 1–2 use fBm, 3–4 the standard fOU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Table1,
    Table2,
    Table3,
    Table4,
}

impl Template {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Template::Table1),
            2 => Ok(Template::Table2),
            3 => Ok(Template::Table3),
            4 => Ok(Template::Table4),
            _ => Err(Error::Config(format!("no table {n}; expected 1, 2, 3 or 4"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Template::Table1 => 1,
            Template::Table2 => 2,
            Template::Table3 => 3,
            Template::Table4 => 4,
        }
    }

    fn process(self) -> ProcessSpec {
        match self {
            Template::Table1 | Template::Table2 => ProcessSpec::Fbm,
            Template::Table3 | Template::Table4 => ProcessSpec::standard_fou(),
        }
    }

    /// Whether the table sweeps `(T, H)` rather than `(s, N, H)`.
    fn sweeps_horizon(self) -> bool {
        matches!(self, Template::Table2 | Template::Table4)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "table{}", self.number())
    }
}

pub const TABLE_HURST: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const HORIZON_TABLE_HURST: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const TABLE_S: [f64; 3] = [2.0, 5.0, 8.0];

pub fn table_horizons() -> Vec<f64> {
    (0..10).map(|k| 5.5 + 0.5 * k as f64).collect()
}

/// Observation counts per scale: desk `{2⁴, 2⁵, 2⁶}`, paper `{2⁹, …, 2¹⁶}`.
pub fn table_n_obs(scale: Scale) -> Vec<usize> {
    match scale {
        Scale::Desk => vec![16, 32, 64],
        Scale::Paper => (9..=16).map(|k| 1 << k).collect(),
    }
}

/// Observation count of the `(T, H)` tables: desk 2⁵, paper 2¹².
pub fn horizon_table_n_obs(scale: Scale) -> usize {
    match scale {
        Scale::Desk => 32,
        Scale::Paper => 1 << 12,
    }
}

/// Cell configurations of a table, in output order. Each cell's seed is
/// derived from the master seed and the cell's coordinates.
pub fn table_cells(template: Template, scale: Scale, seed: u64) -> Vec<ExperimentConfig> {
    let base = ExperimentConfig {
        process: template.process(),
        train: TrainSection::for_scale(scale),
        ..ExperimentConfig::default()
    };
    let mut cells = Vec::new();
    let mut push = |s: f64, horizon: f64, n_obs: usize, hurst: f64| {
        let label = format!("{template}/s={s}/T={horizon}/N={n_obs}/H={hurst}");
        cells.push(ExperimentConfig {
            s,
            horizon,
            n_obs,
            hurst,
            seed: derive_seed(seed, tag(&label)),
            ..base.clone()
        });
    };
    if template.sweeps_horizon() {
        for t in table_horizons() {
            for h in HORIZON_TABLE_HURST {
                push(5.0, t, horizon_table_n_obs(scale), h);
            }
        }
    } else {
        for s in TABLE_S {
            for n in table_n_obs(scale) {
                for h in TABLE_HURST {
                    push(s, 10.0, n, h);
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub s: f64,
    pub horizon: f64,
    pub n_obs: usize,
    pub hurst: f64,
    /// `"ok"` or the error that stopped the cell.
    pub status: String,
    pub nn: Option<ErrorStats>,
    pub exact: Option<ErrorStats>,
    pub theoretical_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub header: String,
    pub rows: Vec<SweepRow>,
    pub wall_time: Duration,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# config: {}", self.header)?;
        writeln!(w, "# wall_time_s: {:.3}", self.wall_time.as_secs_f64())?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "s", "T", "N", "H", "status", "me", "mse", "se_me", "se_mse", "mse_exact", "se_mse_exact",
            "theoretical_mse",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let nn = r.nn.as_ref();
            let ex = r.exact.as_ref();
            out.write_record([
                r.s.to_string(),
                r.horizon.to_string(),
                r.n_obs.to_string(),
                r.hurst.to_string(),
                r.status.clone(),
                opt(nn.map(|s| s.me)),
                opt(nn.map(|s| s.mse)),
                opt(nn.map(|s| s.se_me)),
                opt(nn.map(|s| s.se_mse)),
                opt(ex.map(|s| s.mse)),
                opt(ex.map(|s| s.se_mse)),
                opt(r.theoretical_mse),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Worker pool capped by `FRACPREDICT_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("FRACPREDICT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("FRACPREDICT_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

/// Run every cell (in parallel); a failing cell becomes a row with its error
/// in the status column.
pub fn run_cells(cells: &[ExperimentConfig]) -> Result<Vec<SweepRow>> {
    let pool = thread_pool()?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let mut row = SweepRow {
                    s: c.s,
                    horizon: c.horizon,
                    n_obs: c.n_obs,
                    hurst: c.hurst,
                    status: "ok".into(),
                    nn: None,
                    exact: None,
                    theoretical_mse: None,
                };
                match run_experiment(c) {
                    Ok(r) => {
                        row.nn = r.row(Method::Nn).map(|m| m.stats);
                        row.exact = r.row(Method::Exact).map(|m| m.stats);
                        row.theoretical_mse = r.theoretical_mse;
                    }
                    Err(e) => row.status = format!("error: {e}"),
                }
                row
            })
            .collect()
    }))
}

pub fn run_table_sweep(template: Template, scale: Scale, seed: u64) -> Result<SweepReport> {
    let start = Instant::now();
    let cells = table_cells(template, scale, seed);
    let rows = run_cells(&cells)?;
    let c = &cells[0];
    let hidden: Vec<String> = c.hidden.iter().map(usize::to_string).collect();
    let header = format!(
        "{template} scale={scale} seed={seed} process={} hidden={} batches={}x{} n_test={} sim_refinement={} n_obs={:?}",
        c.process,
        hidden.join("x"),
        c.train.n_batches,
        c.train.batch_size,
        c.n_test,
        c.sim_refinement,
        if template.sweeps_horizon() { vec![horizon_table_n_obs(scale)] } else { table_n_obs(scale) },
    );
    Ok(SweepReport { header, rows, wall_time: start.elapsed() })
}
