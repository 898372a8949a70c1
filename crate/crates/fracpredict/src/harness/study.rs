use std::io::Write;

use fracpredict_core::continuous::{ContinuousPredictor, ContinuousTarget};
use fracpredict_core::exact::{build_fbm_predictor, build_fou_predictor};
use fracpredict_core::metrics::paired_mse_difference;
use fracpredict_core::rng::{derive_seed, tag};
use fracpredict_core::simulation::PathSimulator;
use fracpredict_core::{Coefficient, CovarianceModel, TimeGrid};
use rayon::prelude::*;

use super::experiment::{run_experiment, simulation_grid, Method};
use super::sweep::thread_pool;
use crate::config::{ContinuousSection, ExperimentConfig, ProcessSpec};
use crate::error::{Error, Result, Stage};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    /// `Fbm` or `Fou`.
    pub process: ProcessSpec,
    pub hurst: f64,
    pub s: f64,
    pub horizon: f64,
    /// Increasing observation counts; each must divide `max · refinement`.
    pub n_list: Vec<usize>,
    /// Fine-grid steps per interval of the largest observation count.
    pub refinement: usize,
    pub seed: u64,
    pub continuous: ContinuousSection,
}

impl ConvergenceConfig {
    /// `N ∈ {2⁴, …, 2¹⁰}` with two fine steps per finest interval.
    pub fn new(process: ProcessSpec, hurst: f64, seed: u64) -> Self {
        Self {
            process,
            hurst,
            s: 5.0,
            horizon: 10.0,
            n_list: (4..=10).map(|k| 1 << k).collect(),
            refinement: 2,
            seed,
            continuous: ContinuousSection::default(),
        }
    }

    fn echo(&self) -> String {
        format!(
            "convergence process={} H={} s={} T={} n_list={:?} refinement={} seed={} inner_nodes={} fou_kernel_variant={:?}",
            self.process,
            self.hurst,
            self.s,
            self.horizon,
            self.n_list,
            self.refinement,
            self.seed,
            self.continuous.inner_nodes,
            self.continuous.fou_kernel_variant
        )
        .to_lowercase()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_obs: usize,
    pub discrete: f64,
    pub continuous: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub header: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# config: {}", self.header)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["N", "discrete_prediction", "continuous_prediction", "gap"])?;
        for r in &self.rows {
            out.write_record([r.n_obs.to_string(), r.discrete.to_string(), r.continuous.to_string(), r.gap.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One fine path, predicted from `N` equally spaced observations for every
/// `N` in the list and from its whole past on `[0, s]`.
pub fn run_convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    let hurst = fracpredict_core::HurstIndex::new(cfg.hurst).map_err(|e| Error::Config(e.to_string()))?;
    if cfg.n_list.is_empty() || cfg.n_list.windows(2).any(|w| w[0] >= w[1]) || cfg.refinement == 0 {
        return Err(Error::Config("n_list must be non-empty and increasing, refinement positive".into()));
    }
    let n_max = *cfg.n_list.last().expect("non-empty");
    let fine = n_max * cfg.refinement;
    if let Some(n) = cfg.n_list.iter().find(|&&n| fine % n != 0) {
        return Err(Error::Config(format!("N = {n} does not divide the fine grid of {fine} steps")));
    }
    let (grid, _) = simulation_grid(cfg.s, cfg.horizon, fine, 1)?;
    let (target, model) = match cfg.process {
        ProcessSpec::Fbm => (ContinuousTarget::Fbm, CovarianceModel::Fbm { hurst }),
        ProcessSpec::Fou { .. } => (ContinuousTarget::Fou, cfg.process.model(hurst, &grid)),
        _ => return Err(Error::Config("convergence study supports fbm and fou only".into())),
    };
    let sim = PathSimulator::new(model, grid.clone()).stage("simulator")?;
    let mut path = vec![0.0; grid.len()];
    sim.path(derive_seed(cfg.seed, tag("convergence")), 0, &mut sim.scratch(), &mut path);

    let pcfg = cfg.continuous.predictor_config(&cfg.process, cfg.s, cfg.horizon, hurst)?;
    let continuous = ContinuousPredictor::new(target, &grid, &pcfg)
        .and_then(|c| c.predict(&path))
        .stage("continuous predictor")?;

    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let stride = fine / n;
        let idx: Vec<usize> = (1..=n).map(|k| k * stride).collect();
        let obs = TimeGrid::new(idx.iter().map(|&i| grid.points()[i]).collect()).stage("observation grid")?;
        let x: Vec<f64> = idx.iter().map(|&i| path[i]).collect();
        let predictor = match cfg.process {
            ProcessSpec::Fbm => build_fbm_predictor(hurst, &obs, cfg.horizon),
            ProcessSpec::Fou { level, decay, volatility, initial } => build_fou_predictor(
                Coefficient::Constant(level),
                Coefficient::Constant(decay),
                Coefficient::Constant(volatility),
                initial,
                hurst,
                &obs,
                cfg.horizon,
                &grid,
            ),
            _ => unreachable!("checked above"),
        }
        .stage("exact predictor")?;
        let discrete = predictor.predict(&x).stage("exact prediction")?;
        rows.push(ConvergenceRow { n_obs: n, discrete, continuous, gap: (discrete - continuous).abs() });
    }
    Ok(ConvergenceReport { header: cfg.echo(), rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub horizon: f64,
    pub mse_exact: f64,
    pub se_exact: f64,
    pub mse_nn: f64,
    pub se_nn: f64,
    /// `mse_nn − mse_exact` on the same test paths.
    pub difference: f64,
    /// Paired standard error of the difference.
    pub se_difference: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub header: String,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# config: {}", self.header)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["T", "mse_exact", "se_exact", "mse_nn", "se_nn", "difference", "se_difference"])?;
        for r in &self.rows {
            out.write_record([
                r.horizon.to_string(),
                r.mse_exact.to_string(),
                r.se_exact.to_string(),
                r.mse_nn.to_string(),
                r.se_nn.to_string(),
                r.difference.to_string(),
                r.se_difference.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Exact and trained predictors side by side for each horizon in `horizons`
/// (cells run in parallel, each with a seed derived from its horizon).
pub fn compare_exact_vs_nn(base: &ExperimentConfig, horizons: &[f64]) -> Result<CompareReport> {
    if horizons.is_empty() {
        return Err(Error::Config("need at least one horizon".into()));
    }
    let cells: Vec<ExperimentConfig> = horizons
        .iter()
        .map(|&t| ExperimentConfig {
            horizon: t,
            seed: derive_seed(base.seed, tag(&format!("compare/T={t}"))),
            ..base.clone()
        })
        .collect();
    let pool = thread_pool()?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let r = run_experiment(c)?;
                let nn = r.row(Method::Nn).expect("NN row is always present");
                let ex = r.row(Method::Exact).expect("EXACT row is always present");
                let (difference, se_difference) =
                    paired_mse_difference(&ex.predictions, &nn.predictions, &r.test_targets).stage("comparison")?;
                Ok(CompareRow {
                    horizon: c.horizon,
                    mse_exact: ex.stats.mse,
                    se_exact: ex.stats.se_mse,
                    mse_nn: nn.stats.mse,
                    se_nn: nn.stats.se_mse,
                    difference,
                    se_difference,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let header = format!("compare horizons={horizons:?} {}", base.echo());
    Ok(CompareReport { header, rows })
}
