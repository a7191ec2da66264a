use std::time::Instant;

use super::{
    check_iterate, Callback, IterationInfo, Problem, SolverConfig, SolverError, SolverReport, StopReason,
    Timings,
};
use crate::prox::{prox_weighted_l1, update_weights, DualFbOptions, DualState, WeightMatrix};
use crate::sara::Dictionary;

/// Re-weighted forward-backward for the average-sparsity prior.
///
/// Each reweighting runs exactly `inner_iters` FB steps with the current
/// weights, then refreshes them from the last iterate. The run stops once
/// the last FB step of a block changed the image by less than `xi1`.
pub fn run_usara(
    problem: &Problem,
    dict: &Dictionary,
    config: &SolverConfig,
    mut callback: Option<Callback>,
) -> Result<SolverReport, SolverError> {
    config.validate()?;
    let dims = problem.operator().image_dims();
    dict.check_dims(dims)?;
    let gamma = problem.step_size(config);
    let threshold = gamma * config.lambda;
    let prox_opts = DualFbOptions {
        xi2: config.xi2,
        max_iter: config.prox_max_iter,
    };
    let cap = config.iteration_cap();

    let mut x = problem.initial_image()?;
    check_iterate(&x, 0)?;
    let mut weights = WeightMatrix::identity(dict.coeff_len(dims));
    let mut dual = DualState::zeros(dict, dims);
    let mut trace = Vec::new();
    let mut timings = Timings::default();
    let mut reweights = 0;
    let mut stop = StopReason::MaxIterations;

    'outer: loop {
        let mut last = f64::INFINITY;
        for _ in 0..config.inner_iters {
            if trace.len() == cap {
                break 'outer;
            }
            let t = Instant::now();
            let z = x.axpy(-gamma, &problem.gradient(&x)?);
            timings.gradient += t.elapsed();
            let t = Instant::now();
            let next = prox_weighted_l1(dict, &z, threshold, &weights, &mut dual, &prox_opts)?.image;
            timings.regularizer += t.elapsed();
            let iteration = trace.len() + 1;
            check_iterate(&next, iteration)?;
            last = next.relative_change_from(&x);
            x = next;
            trace.push(last);
            if let Some(cb) = callback.as_mut() {
                cb(&IterationInfo {
                    iteration,
                    relative_change: last,
                    image: &x,
                });
            }
        }
        if last < config.xi1 {
            stop = StopReason::Converged;
            break;
        }
        if trace.len() == cap {
            break;
        }
        weights = update_weights(dict, &x, config.rho)?;
        reweights += 1;
    }

    Ok(SolverReport {
        image: x,
        iterations: trace.len(),
        trace,
        timings,
        converged: stop == StopReason::Converged,
        stop,
        reweights,
        gamma,
    })
}
