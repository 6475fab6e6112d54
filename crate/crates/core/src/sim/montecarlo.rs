use rayon::prelude::*;

use super::{simulate_run, tracking_error, Disturbance, Feedback, SimConfig};
use crate::motor::PlantModel;
use crate::{Error, Result};

/// Aggregate statistics of a batch of disturbed runs.
///
/// Statistics over time pool the non-diverged runs; standard deviations use
/// the `n − 1` denominator (zero for a single run).
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub n_runs: usize,
    pub diverged_count: usize,
    /// Tracking error at the final sample, `None` for diverged runs.
    pub terminal_errors: Vec<Option<f64>>,
    pub terminal_error_mean: f64,
    pub terminal_error_std: f64,
    /// Largest `|x_i|` over every sample of every non-diverged run.
    pub max_abs_state: [f64; 3],
    pub max_abs_torque: f64,
    pub time: Vec<f64>,
    pub error_mean: Vec<f64>,
    pub error_std: Vec<f64>,
}

struct RunOutcome {
    errors: Vec<f64>,
    max_abs_state: [f64; 3],
    max_abs_torque: f64,
}

/// Runs `n_runs` disturbed simulations; run `i` draws from RNG stream `i`.
///
/// Runs execute in parallel but are reduced in index order, so the summary
/// is bit-reproducible for a given `(cfg, n_runs)`.
pub fn run_monte_carlo(
    model: &PlantModel,
    gain: &Feedback,
    cfg: &SimConfig,
    n_runs: usize,
) -> Result<MonteCarloSummary> {
    if n_runs == 0 {
        return Err(Error::InvalidInput(
            "monte_carlo.n_runs must be at least 1".into(),
        ));
    }
    if !matches!(cfg.disturbance, Disturbance::Gaussian { .. }) {
        return Err(Error::InvalidInput(
            "Monte Carlo runs need a Gaussian disturbance".into(),
        ));
    }
    cfg.validate()?;

    let samples = cfg.steps() + 1;
    let time: Vec<f64> = (0..samples).map(|k| k as f64 * cfg.dt).collect();
    let mut per_time = vec![Welford::default(); samples];
    let mut ok = 0usize;
    let mut terminal_errors = Vec::with_capacity(n_runs);
    let mut max_abs_state = [0.0f64; 3];
    let mut max_abs_torque = 0.0f64;

    let chunk = (2 * rayon::current_num_threads()).max(1);
    for start in (0..n_runs).step_by(chunk) {
        let end = (start + chunk).min(n_runs);
        let outcomes: Vec<Result<Option<RunOutcome>>> = (start..end)
            .into_par_iter()
            .map(|run| one_run(model, gain, cfg, run as u64))
            .collect();
        for outcome in outcomes {
            match outcome? {
                Some(o) => {
                    ok += 1;
                    terminal_errors.push(o.errors.last().copied());
                    for (acc, &e) in per_time.iter_mut().zip(&o.errors) {
                        acc.push(e);
                    }
                    for (m, &v) in max_abs_state.iter_mut().zip(&o.max_abs_state) {
                        *m = m.max(v);
                    }
                    max_abs_torque = max_abs_torque.max(o.max_abs_torque);
                }
                None => terminal_errors.push(None),
            }
        }
    }

    let (error_mean, error_std): (Vec<f64>, Vec<f64>) = per_time.iter().map(Welford::mean_std).unzip();
    let mut terminal = Welford::default();
    terminal_errors.iter().flatten().for_each(|&e| terminal.push(e));
    let (terminal_error_mean, terminal_error_std) = terminal.mean_std();

    Ok(MonteCarloSummary {
        n_runs,
        diverged_count: n_runs - ok,
        terminal_errors,
        terminal_error_mean,
        terminal_error_std,
        max_abs_state,
        max_abs_torque,
        time,
        error_mean,
        error_std,
    })
}

fn one_run(model: &PlantModel, gain: &Feedback, cfg: &SimConfig, run: u64) -> Result<Option<RunOutcome>> {
    let trace = match simulate_run(model, gain, cfg, run) {
        Ok(t) => t,
        Err(Error::Divergence { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let errors = trace
        .state
        .iter()
        .map(|x| tracking_error(&cfg.reference, x))
        .collect();
    let mut max_abs_state = [0.0f64; 3];
    for x in &trace.state {
        for i in 0..3 {
            max_abs_state[i] = max_abs_state[i].max(x[i].abs());
        }
    }
    Ok(Some(RunOutcome {
        errors,
        max_abs_state,
        max_abs_torque: trace.max_abs_torque(),
    }))
}

/// Running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn mean_std(&self) -> (f64, f64) {
        match self.n {
            0 => (f64::NAN, f64::NAN),
            1 => (self.mean, 0.0),
            n => (self.mean, (self.m2 / (n as f64 - 1.0)).sqrt()),
        }
    }
}
