use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use fracpredict_core::continuous::{ContinuousPredictor, ContinuousTarget};
use fracpredict_core::exact::{
    build_fbm_predictor, build_fcir_predictor, build_fou_predictor, build_integral_predictor,
    fcir_predict_orthant_mc, theoretical_mse, ExactPredictor, OrthantSampling,
};
use fracpredict_core::nn::{mlp_init, train, LossTrace, MlpNetwork};
use fracpredict_core::rng::{derive_seed, tag};
use fracpredict_core::simulation::PathSimulator;
use fracpredict_core::{evaluate_me_mse, Error as CoreError, ErrorStats, Matrix, TimeGrid};

use crate::config::{ExperimentConfig, ProcessSpec};
use crate::error::{Error, Result, Stage};

/// Simulation grid with step `s / (n_obs · refinement)` from 0, extended
/// with the same step while it stays below `horizon`, then `horizon` itself.
/// Returns the grid and the observation times `s·k/n_obs` (exact grid points).
pub fn simulation_grid(s: f64, horizon: f64, n_obs: usize, refinement: usize) -> Result<(TimeGrid, TimeGrid)> {
    let m = n_obs * refinement;
    let step = s / m as f64;
    let mut pts: Vec<f64> = (0..=m).map(|j| s * j as f64 / m as f64).collect();
    let mut j = m + 1;
    loop {
        let t = s * j as f64 / m as f64;
        if t >= horizon * (1.0 - 1e-12) {
            break;
        }
        pts.push(t);
        j += 1;
    }
    pts.push(horizon);
    if (pts[pts.len() - 1] - pts[pts.len() - 2]) < 1e-9 * step {
        return Err(Error::Config("horizon collides with a grid point".into()));
    }
    let obs: Vec<f64> = (1..=n_obs).map(|k| pts[k * refinement]).collect();
    Ok((TimeGrid::new(pts).stage("simulation grid")?, TimeGrid::new(obs).stage("observation grid")?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Nn,
    Exact,
    Continuous,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Nn => "NN",
            Method::Exact => "EXACT",
            Method::Continuous => "CONTINUOUS",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub stats: ErrorStats,
    /// Per-path predictions on the shared test set.
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PredictionReport {
    pub config: ExperimentConfig,
    pub rows: Vec<MethodRow>,
    pub test_targets: Vec<f64>,
    /// Conditional variance of the exact predictor (identity transform only).
    pub theoretical_mse: Option<f64>,
    pub network: MlpNetwork,
    pub loss_trace: LossTrace,
    pub wall_time: Duration,
}

impl PredictionReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// CSV with `# config:` header; wall time appears only as a comment.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# config: {}", self.config.echo())?;
        if let Some(m) = self.theoretical_mse {
            writeln!(w, "# theoretical_mse: {m}")?;
        }
        writeln!(w, "# wall_time_s: {:.3}", self.wall_time.as_secs_f64())?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["method", "me", "mse", "se_me", "se_mse", "n"])?;
        for r in &self.rows {
            let s = &r.stats;
            out.write_record([
                r.method.to_string(),
                s.me.to_string(),
                s.mse.to_string(),
                s.se_me.to_string(),
                s.se_mse.to_string(),
                s.n.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Features and targets of a set of paths, plus the path prefixes on `[0, s]`
/// when the continuous predictor needs them.
pub struct Sample {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub prefix: Option<Matrix>,
}

/// A configured experiment: grid, simulator and the derived seeds.
pub struct Experiment {
    config: ExperimentConfig,
    grid: TimeGrid,
    obs: TimeGrid,
    obs_idx: Vec<usize>,
    target_idx: usize,
    s_idx: usize,
    sim: PathSimulator,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let hurst = config.hurst_index()?;
        let (grid, obs) = simulation_grid(config.s, config.horizon, config.n_obs, config.sim_refinement)?;
        let sim = match config.process {
            ProcessSpec::Fcir { lambda, sigma, r0 } => PathSimulator::fcir(lambda, sigma, r0, hurst, grid.clone()),
            p => PathSimulator::new(p.model(hurst, &grid), grid.clone()),
        }
        .stage("simulator")?;
        let obs_idx = grid.indices_of(obs.points()).stage("simulator")?;
        let target_idx = grid.len() - 1;
        let s_idx = *obs_idx.last().expect("n_obs >= 1");
        Ok(Self { config, grid, obs, obs_idx, target_idx, s_idx, sim })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn observation_times(&self) -> &TimeGrid {
        &self.obs
    }

    pub fn simulator(&self) -> &PathSimulator {
        &self.sim
    }

    pub fn train_seed(&self) -> u64 {
        derive_seed(self.config.seed, tag("train"))
    }

    pub fn test_seed(&self) -> u64 {
        derive_seed(self.config.seed, tag("test"))
    }

    fn init_seed(&self) -> u64 {
        derive_seed(self.config.seed, tag("init"))
    }

    fn has_continuous(&self) -> bool {
        matches!(self.config.process, ProcessSpec::Fbm | ProcessSpec::Fou { .. })
            && self.s_idx + 1 >= fracpredict_core::continuous::MIN_PATH_POINTS
    }

    /// Paths `range` of the stream keyed by `seed`, reduced to features.
    pub fn sample(&self, seed: u64, range: std::ops::Range<u64>, keep_prefix: bool) -> Sample {
        let n = (range.end - range.start) as usize;
        let mut x = Matrix::zeros(n, self.obs_idx.len());
        let mut y = Vec::with_capacity(n);
        let mut prefix = keep_prefix.then(|| Matrix::zeros(n, self.s_idx + 1));
        let mut scratch = self.sim.scratch();
        let mut path = vec![0.0; self.grid.len()];
        for (r, index) in range.enumerate() {
            self.sim.path(seed, index, &mut scratch, &mut path);
            for (o, &j) in x.row_mut(r).iter_mut().zip(&self.obs_idx) {
                *o = path[j];
            }
            y.push(path[self.target_idx]);
            if let Some(p) = prefix.as_mut() {
                p.row_mut(r).copy_from_slice(&path[..=self.s_idx]);
            }
        }
        Sample { x, y, prefix }
    }

    /// Training batch `b`: paths `b·batch_size ..` of the training stream.
    pub fn training_batch(&self, b: usize) -> (Matrix, Vec<f64>) {
        let bs = self.config.train.batch_size as u64;
        let s = self.sample(self.train_seed(), b as u64 * bs..(b as u64 + 1) * bs, false);
        (s.x, s.y)
    }

    pub fn test_sample(&self) -> Sample {
        self.sample(self.test_seed(), 0..self.config.n_test as u64, self.has_continuous())
    }

    pub fn train_network(&self) -> Result<(MlpNetwork, LossTrace)> {
        let net = mlp_init(&self.config.widths(), self.init_seed()).stage("network init")?;
        let cfg = self.config.train.training_config(self.train_seed());
        train(net, &cfg, |b| Ok(self.training_batch(b))).stage("training")
    }

    pub fn exact_predictor(&self) -> Result<ExactPredictor> {
        let hurst = self.config.hurst_index()?;
        let (obs, t, grid) = (&self.obs, self.config.horizon, &self.grid);
        match self.config.process {
            ProcessSpec::Fbm => build_fbm_predictor(hurst, obs, t),
            ProcessSpec::Integral { integrand } => {
                build_integral_predictor(integrand.coefficient(grid), hurst, obs, t, grid)
            }
            ProcessSpec::Fou { .. } => match self.sim.model().clone() {
                fracpredict_core::CovarianceModel::Fou { level, decay, volatility, initial, .. } => {
                    build_fou_predictor(level, decay, volatility, initial, hurst, obs, t, grid)
                }
                _ => unreachable!("fOU spec builds an fOU model"),
            },
            ProcessSpec::Fcir { lambda, sigma, r0 } => build_fcir_predictor(lambda, sigma, r0, hurst, obs, t, grid),
        }
        .stage("exact predictor")
    }

    pub fn continuous_predictor(&self) -> Result<Option<ContinuousPredictor>> {
        if !self.has_continuous() {
            return Ok(None);
        }
        let target = match self.config.process {
            ProcessSpec::Fbm => ContinuousTarget::Fbm,
            _ => ContinuousTarget::Fou,
        };
        let hurst = self.config.hurst_index()?;
        let cfg = self.config.continuous.predictor_config(&self.config.process, self.config.s, self.config.horizon, hurst)?;
        ContinuousPredictor::new(target, &self.grid, &cfg).stage("continuous predictor").map(Some)
    }

    fn exact_predictions(&self, p: &ExactPredictor, x: &Matrix) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let v = match p.predict(x.row(i)) {
                Err(CoreError::OrthantCaseRequired { .. }) => self.orthant_prediction(i, x.row(i))?,
                other => other.stage("exact prediction")?,
            };
            out.push(v);
        }
        Ok(out)
    }

    fn orthant_prediction(&self, path: usize, observed: &[f64]) -> Result<f64> {
        let ProcessSpec::Fcir { lambda, sigma, r0 } = self.config.process else {
            unreachable!("only fCIR predictors require the orthant estimator");
        };
        let sampling = OrthantSampling::new(
            self.config.orthant_n_mc,
            derive_seed(derive_seed(self.config.seed, tag("orthant")), path as u64),
        );
        let hurst = self.config.hurst_index()?;
        fcir_predict_orthant_mc(lambda, sigma, r0, hurst, &self.obs, observed, self.config.horizon, &self.grid, sampling)
            .stage("orthant estimate")
            .map(|e| e.value)
    }

    /// Train, then evaluate every applicable method on one shared test set.
    pub fn run(&self) -> Result<PredictionReport> {
        let start = Instant::now();
        let (net, trace) = self.train_network()?;
        self.evaluate(net, trace, start)
    }

    /// Evaluate a given (already trained) network alongside the other methods.
    pub fn evaluate(&self, network: MlpNetwork, loss_trace: LossTrace, start: Instant) -> Result<PredictionReport> {
        if network.input_dim() != self.config.n_obs {
            return Err(Error::Config(format!(
                "network expects {} inputs, experiment has {} observations",
                network.input_dim(),
                self.config.n_obs
            )));
        }
        let exact = self.exact_predictor()?;
        let continuous = self.continuous_predictor()?;
        let test = self.test_sample();
        let stats = |p: &[f64]| evaluate_me_mse(p, &test.y).stage("evaluation");

        let mut rows = Vec::new();
        let nn = network.forward_rows(&test.x).stage("network evaluation")?;
        rows.push(MethodRow { method: Method::Nn, stats: stats(&nn)?, predictions: nn });
        let ex = self.exact_predictions(&exact, &test.x)?;
        rows.push(MethodRow { method: Method::Exact, stats: stats(&ex)?, predictions: ex });
        if let (Some(c), Some(prefix)) = (continuous, test.prefix.as_ref()) {
            let pred = (0..prefix.rows())
                .map(|i| c.predict(prefix.row(i)))
                .collect::<fracpredict_core::Result<Vec<_>>>()
                .stage("continuous prediction")?;
            rows.push(MethodRow { method: Method::Continuous, stats: stats(&pred)?, predictions: pred });
        }
        let theoretical = match theoretical_mse(&exact) {
            Ok(v) => Some(v),
            Err(CoreError::Unsupported(_)) => None,
            Err(e) => return Err(Error::Numerical { stage: "theoretical mse", source: e }),
        };
        Ok(PredictionReport {
            config: self.config.clone(),
            rows,
            test_targets: test.y,
            theoretical_mse: theoretical,
            network,
            loss_trace,
            wall_time: start.elapsed(),
        })
    }
}

/// Simulate, train, build the exact (and, for fBm and fOU, continuous)
/// predictors and evaluate all of them on the same fresh test paths.
pub fn run_experiment(config: &ExperimentConfig) -> Result<PredictionReport> {
    Experiment::new(config.clone())?.run()
}
