//! Time-stepping driver: startup, stepping, observable sampling and
//! blow-up bookkeeping.

use std::time::Instant;

use num_complex::Complex;

use crate::assembly::{Operators, StateVector};
use crate::error::{Error, Result};
use crate::observables::{sample_state, ErrorNorms, ObservableSample};
use crate::scalar::Real;
use crate::steppers::{ReInit, SchemeId, StepParams, Stepper, StepperState};

#[derive(Debug, Clone, Copy)]
pub struct EvolutionOptions<T> {
    pub scheme: SchemeId,
    pub params: StepParams<T>,
    pub n_steps: usize,
    /// Observables are sampled every `stride` steps and at the final step.
    pub stride: usize,
    pub re_init: ReInit,
    /// Blow-up when `|E| > energy_ceiling * |E0|`.
    pub energy_ceiling: f64,
}

impl<T: Real> EvolutionOptions<T> {
    pub fn new(scheme: SchemeId, params: StepParams<T>, n_steps: usize) -> Self {
        Self { scheme, params, n_steps, stride: 1, re_init: ReInit::Simple, energy_ceiling: 1e6 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub scheme: Option<SchemeId>,
    pub samples: Vec<ObservableSample>,
    /// First sampled time at which the energy left the ceiling or became
    /// non-finite.
    pub blow_up_time: Option<f64>,
    pub steps_taken: usize,
    pub newton_iterations: usize,
    pub max_newton_iterations: usize,
    pub linear_solves: usize,
    pub linear_iterations: usize,
    /// Time spent inside stepping calls only.
    pub step_wall_s: f64,
    pub wall_s: f64,
    /// Stepper error that ended a run after blow-up.
    pub failure: Option<String>,
}

/// Run `opts.n_steps` steps from `u0`, sampling observables along the way.
///
/// `errors` is called at every sample with the time and state, and may
/// return error norms against an exact or reference solution. A stepper
/// error is returned as `Err` unless the energy has already blown up or the
/// state became non-finite; then the run stops and the error is recorded.
pub fn run_evolution<T, F>(
    ops: &Operators<T>,
    u0: StateVector<T>,
    opts: &EvolutionOptions<T>,
    mut errors: F,
) -> Result<(RunReport, StepperState<T>)>
where
    T: Real,
    F: FnMut(T, &[Complex<T>]) -> Option<ErrorNorms<T>>,
{
    if opts.stride == 0 {
        return Err(Error::InvalidArgument("observer stride must be at least 1".into()));
    }
    let start = Instant::now();
    let stepper = Stepper::new(ops, opts.scheme, opts.params).with_re_init(opts.re_init);
    let mut state = stepper.start(u0)?;
    let mut report = RunReport { scheme: Some(opts.scheme), ..Default::default() };
    let beta = opts.params.beta;
    let mut observe = |state: &StepperState<T>, report: &mut RunReport, e0: Option<f64>| -> Result<f64> {
        let mut s = sample_state(ops, state, beta)?;
        s.errors = errors(state.t, &state.u).map(|e| ErrorNorms {
            l2: e.l2.to_f64_lossy(),
            h1: e.h1.to_f64_lossy(),
            l1_density: e.l1_density.to_f64_lossy(),
        });
        s.wall_s = start.elapsed().as_secs_f64();
        if let Some(e0) = e0 {
            s.blown_up = !s.energy.is_finite() || s.energy.abs() > opts.energy_ceiling * e0.abs();
            if s.blown_up && report.blow_up_time.is_none() {
                report.blow_up_time = Some(s.t);
            }
        }
        let e = s.energy;
        report.samples.push(s);
        Ok(e)
    };
    let e0 = observe(&state, &mut report, None)?;
    for k in 1..=opts.n_steps {
        let t0 = Instant::now();
        let res = stepper.step(&mut state);
        report.step_wall_s += t0.elapsed().as_secs_f64();
        match res {
            Ok(stats) => {
                report.steps_taken += 1;
                report.newton_iterations += stats.newton_iterations;
                report.max_newton_iterations = report.max_newton_iterations.max(stats.newton_iterations);
                report.linear_solves += stats.linear_solves;
                report.linear_iterations += stats.linear_iterations;
            }
            Err(err) => {
                let fatal_after_blow_up = report.blow_up_time.is_some() || matches!(err, Error::NonFinite(_));
                if !fatal_after_blow_up {
                    return Err(err);
                }
                if report.blow_up_time.is_none() {
                    report.blow_up_time = Some(state.t.to_f64_lossy());
                }
                report.failure = Some(err.to_string());
                break;
            }
        }
        if k % opts.stride == 0 || k == opts.n_steps {
            let e = observe(&state, &mut report, Some(e0))?;
            if !e.is_finite() {
                report.failure = Some("non-finite energy".into());
                break;
            }
        }
    }
    report.wall_s = start.elapsed().as_secs_f64();
    Ok((report, state))
}
