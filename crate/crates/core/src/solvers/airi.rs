use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_iterate, Callback, DivergenceRule, IterationInfo, Problem, SolverConfig, SolverError, SolverReport,
    StopReason, Timings,
};
use crate::denoiser::{apply_equivariant, Denoiser};

struct DivergenceMonitor {
    rule: DivergenceRule,
    min_change: f64,
    above: usize,
    growing: usize,
    streak_start: f64,
    last_norm: f64,
}

impl DivergenceMonitor {
    fn new(rule: DivergenceRule, norm: f64) -> Self {
        DivergenceMonitor {
            rule,
            min_change: f64::INFINITY,
            above: 0,
            growing: 0,
            streak_start: norm,
            last_norm: norm,
        }
    }

    fn observe(&mut self, change: f64, norm: f64) -> Option<String> {
        let w = self.rule.window;
        let f = self.rule.factor;
        if change > f * self.min_change {
            self.above += 1;
        } else {
            self.above = 0;
        }
        self.min_change = self.min_change.min(change);
        if norm > self.last_norm {
            if self.growing == 0 {
                self.streak_start = self.last_norm;
            }
            self.growing += 1;
        } else {
            self.growing = 0;
        }
        self.last_norm = norm;
        if self.above >= w {
            return Some(format!(
                "relative change stayed above {f} times its minimum {:.3e} for {w} iterations",
                self.min_change
            ));
        }
        if self.growing >= w && norm > f * self.streak_start {
            return Some(format!(
                "image norm grew for {w} consecutive iterations, from {:.3e} to {norm:.3e}",
                self.streak_start
            ));
        }
        None
    }
}

/// Plug-and-play forward-backward: `x ← D(x − γ∇f(x))` until the relative
/// change drops below `xi3`.
///
/// With equivariant randomisation on, each denoiser call is conjugated by
/// a flip or rotation drawn from a generator seeded with `config.seed`.
pub fn run_airi(
    problem: &Problem,
    denoiser: &dyn Denoiser,
    config: &SolverConfig,
    mut callback: Option<Callback>,
) -> Result<SolverReport, SolverError> {
    config.validate()?;
    let gamma = problem.step_size(config);
    let cap = config.iteration_cap();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut x = problem.initial_image()?;
    check_iterate(&x, 0)?;
    let mut monitor = DivergenceMonitor::new(config.divergence, x.norm());
    let mut trace = Vec::new();
    let mut timings = Timings::default();
    let mut stop = StopReason::MaxIterations;

    while trace.len() < cap {
        let t = Instant::now();
        let z = x.axpy(-gamma, &problem.gradient(&x)?);
        timings.gradient += t.elapsed();
        let t = Instant::now();
        let next = apply_equivariant(denoiser, &z, config.equivariant, &mut rng)?;
        timings.regularizer += t.elapsed();
        let iteration = trace.len() + 1;
        check_iterate(&next, iteration)?;
        let change = next.relative_change_from(&x);
        x = next;
        trace.push(change);
        if let Some(cb) = callback.as_mut() {
            cb(&IterationInfo {
                iteration,
                relative_change: change,
                image: &x,
            });
        }
        if change < config.xi3 {
            stop = StopReason::Converged;
            break;
        }
        if let Some(reason) = monitor.observe(change, x.norm()) {
            let report = SolverReport {
                image: x,
                iterations: trace.len(),
                trace,
                timings,
                converged: false,
                stop: StopReason::MaxIterations,
                reweights: 0,
                gamma,
            };
            return Err(SolverError::Diverged {
                iteration,
                reason,
                report: Box::new(report),
            });
        }
    }

    Ok(SolverReport {
        image: x,
        iterations: trace.len(),
        trace,
        timings,
        converged: stop == StopReason::Converged,
        stop,
        reweights: 0,
        gamma,
    })
}
