//! Weighted measures, posterior normalization, and the two inference drivers.
//!
//! Weights live in log space everywhere; `-inf` is zero likelihood. Sums of
//! exponentials are shifted by the running maximum before exponentiating.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::base::BaseMeasure;
use crate::error::{MeasureError, NormError};
use crate::measure::{Measure, Value};
use crate::source::RandomSource;

/// Largest log-weight whose exponential is still finite.
const MAX_LOG_WEIGHT: f64 = 709.782_712_893_384;
pub const DEFAULT_MAX_RESTARTS: usize = 10_000;

/// Lineage of the split that produced a sample site.
pub type Address = Vec<u32>;

/// Log-weight contribution of observing `x` under `d`: the log density for
/// continuous `d`, the log mass for atomic `d`.
pub fn observe(d: &BaseMeasure, x: f64) -> f64 {
    match d {
        BaseMeasure::PointMass(loc) => {
            if x == *loc {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        BaseMeasure::FiniteAtoms(atoms) => atoms.mass_at(x).ln(),
        _ => d.log_density(x).expect("continuous variants have densities"),
    }
}

/// A measure over `(value, log-weight)` pairs.
pub struct WeightedMeasure<X> {
    inner: Measure<(X, f64)>,
}

impl<X> Clone for WeightedMeasure<X> {
    fn clone(&self) -> Self {
        WeightedMeasure { inner: self.inner.clone() }
    }
}

impl<X: Value> WeightedMeasure<X> {
    pub fn new(inner: Measure<(X, f64)>) -> Self {
        WeightedMeasure { inner }
    }

    /// Pushes `prior` forward along `x ↦ (x, log_likelihood(x))`.
    pub fn from_likelihood(prior: &Measure<X>, log_likelihood: impl Fn(&X) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(prior.map(move |x| (x.clone(), log_likelihood(x))))
    }

    pub fn inner(&self) -> &Measure<(X, f64)> {
        &self.inner
    }

    /// Importance-sampling estimate of the normalizing constant `Z`.
    pub fn evidence(&self, n: u64, seed: u64) -> Result<f64, MeasureError> {
        self.inner.integrate(|(_, lw)| lw.exp(), crate::Method::Mc { n, seed })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMethod {
    Exact,
    Lw { n: u64, seed: u64 },
}

/// Divides a weighted measure by its total mass.
pub fn norm<X: Value>(wm: &WeightedMeasure<X>, method: NormMethod) -> Result<Measure<X>, NormError> {
    match method {
        NormMethod::Exact => {
            let atoms = wm.inner.enumerate().ok_or_else(|| {
                MeasureError::MethodMismatch("exact normalization needs a finite measure".into())
            })?;
            check_log_weights(atoms.iter().map(|a| a.0 .1))?;
            let logs: Vec<f64> = atoms.iter().map(|((_, lw), w)| lw + w.ln()).collect();
            let values = atoms.into_iter().map(|((x, _), _)| x);
            normalize(values.zip(logs).collect())
        }
        NormMethod::Lw { n, seed } => {
            if n == 0 {
                return Err(MeasureError::MethodMismatch("likelihood weighting with zero samples".into()).into());
            }
            let samples: Vec<(X, f64)> =
                (0..n).into_par_iter().map(|i| wm.inner.sample(&RandomSource::for_index(seed, i))).collect();
            posterior(samples)
        }
    }
}

/// Self-normalized finite measure over weighted samples.
pub fn posterior<X: Value>(samples: Vec<(X, f64)>) -> Result<Measure<X>, NormError> {
    check_log_weights(samples.iter().map(|s| s.1))?;
    normalize(samples)
}

/// `Ok` when the weights describe a normalizable, nonzero mass.
pub fn check_log_weights(logs: impl Iterator<Item = f64>) -> Result<(), NormError> {
    let mut any_mass = false;
    for lw in logs {
        if lw.is_nan() {
            return Err(MeasureError::NonFinite(lw).into());
        }
        if lw > MAX_LOG_WEIGHT {
            return Err(NormError::InfiniteMass);
        }
        any_mass |= lw > f64::NEG_INFINITY;
    }
    if any_mass {
        Ok(())
    } else {
        Err(NormError::ZeroMass)
    }
}

fn normalize<X: Value>(samples: Vec<(X, f64)>) -> Result<Measure<X>, NormError> {
    let max = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(NormError::ZeroMass);
    }
    let shifted = samples.into_iter().map(|(x, lw)| (x, (lw - max).exp())).collect();
    Measure::weighted(shifted).map_err(|e| NormError::Measure(e.into()))
}

/// Normalized weights `exp(lw_i) / Σ exp(lw_j)`.
pub fn normalized_weights(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; log_weights.len()];
    }
    let w: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Effective sample size `(Σw)² / Σw²` of a self-normalized sample.
pub fn ess(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let (sum, sq) = log_weights.iter().fold((0.0, 0.0), |(s, q), lw| {
        let w = (lw - max).exp();
        (s + w, q + w * w)
    });
    sum * sum / sq
}

/// `log Σ exp(lw_i)`.
pub fn log_sum_exp(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + log_weights.iter().map(|lw| (lw - max).exp()).sum::<f64>().ln()
}

/// Systematic resampling: `n` indices drawn in proportion to the weights
/// with a single uniform offset.
pub fn systematic_resample(log_weights: &[f64], n: usize, src: &RandomSource) -> Result<Vec<usize>, NormError> {
    check_log_weights(log_weights.iter().copied())?;
    let w = normalized_weights(log_weights);
    let offset = src.clone().draw_open();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = w[0];
    let mut i = 0;
    for k in 0..n {
        let target = (k as f64 + offset) / n as f64;
        while cumulative < target && i + 1 < w.len() {
            i += 1;
            cumulative += w[i];
        }
        out.push(i);
    }
    Ok(out)
}

/// Mean, sample standard deviation, and effective sample size of a weighted sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedSummary {
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
}

impl WeightedSummary {
    pub fn std_error(&self) -> f64 {
        self.sd / self.ess.sqrt()
    }
}

pub fn weighted_summary(values: &[f64], log_weights: &[f64]) -> WeightedSummary {
    let w = normalized_weights(log_weights);
    let mean: f64 = w.iter().zip(values).map(|(w, x)| w * x).sum();
    let var: f64 = w.iter().zip(values).map(|(w, x)| w * (x - mean).powi(2)).sum();
    WeightedSummary { mean, sd: var.sqrt(), ess: ess(log_weights) }
}

/// Effective sample size of a correlated chain, using Geyer's initial
/// monotone positive sequence of autocorrelation pair sums.
pub fn chain_ess(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let var = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * var)
    };
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64)
}

/// Evaluation context handed to a [`Model`]: hands out one fresh child
/// source per sample site and accumulates the log-weight.
pub struct SampleContext<'a> {
    source: RandomSource,
    log_weight: f64,
    sites: Vec<(Address, f64)>,
    replay: Option<&'a HashMap<Address, f64>>,
}

impl<'a> SampleContext<'a> {
    pub fn new(source: RandomSource) -> Self {
        SampleContext { source, log_weight: 0.0, sites: Vec::new(), replay: None }
    }

    /// Sites found in `replay` reuse the stored value instead of drawing.
    pub fn replaying(source: RandomSource, replay: &'a HashMap<Address, f64>) -> Self {
        SampleContext { replay: Some(replay), ..Self::new(source) }
    }

    /// A uniform draw in `(0, 1)` from the next fresh child source.
    pub fn sample_unit(&mut self) -> f64 {
        let (site, rest) = self.source.split();
        self.source = rest;
        let address = site.path().to_vec();
        let u = match self.replay.and_then(|r| r.get(&address)) {
            Some(&u) => u,
            None => site.clone().draw_open(),
        };
        self.sites.push((address, u));
        u
    }

    pub fn score(&mut self, log_weight: f64) {
        self.log_weight += log_weight;
    }

    pub fn observe(&mut self, d: &BaseMeasure, x: f64) -> f64 {
        let lw = observe(d, x);
        self.score(lw);
        lw
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    /// Number of sample sites visited so far.
    pub fn draws(&self) -> usize {
        self.sites.len()
    }
}

/// A program in sampler form: a deterministic map from a random source to an
/// output and a log-weight.
pub trait Model: Sync {
    type Output: Clone + Send;
    type Error: std::error::Error + Send + 'static;

    fn simulate(&self, ctx: &mut SampleContext<'_>) -> Result<Self::Output, Self::Error>;
}

/// Every sample site visited by one run, with its weight and output.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<O> {
    pub sites: Vec<(Address, f64)>,
    pub log_weight: f64,
    pub output: O,
}

impl<O> Trace<O> {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

pub fn run_model<M: Model>(model: &M, source: RandomSource) -> Result<Trace<M::Output>, M::Error> {
    run_in(model, SampleContext::new(source))
}

/// Re-runs `model` reusing the values stored in `trace`.
pub fn replay<M: Model>(model: &M, trace: &Trace<M::Output>, source: RandomSource) -> Result<Trace<M::Output>, M::Error> {
    let map: HashMap<Address, f64> = trace.sites.iter().cloned().collect();
    run_in(model, SampleContext::replaying(source, &map))
}

fn run_in<M: Model>(model: &M, mut ctx: SampleContext<'_>) -> Result<Trace<M::Output>, M::Error> {
    let output = model.simulate(&mut ctx)?;
    Ok(Trace { sites: ctx.sites, log_weight: ctx.log_weight, output })
}

#[derive(Debug, Error)]
pub enum InferenceError<E: std::error::Error + 'static> {
    #[error(transparent)]
    Model(E),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("no trace with nonzero weight after {0} restarts")]
    StuckChain(usize),
    #[error("model has no sample sites")]
    NoSampleSites,
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Output of a likelihood-weighting run.
#[derive(Clone, Debug)]
pub struct LwRun<O> {
    pub samples: Vec<(O, f64)>,
    pub ess: f64,
    /// `log` of the importance-sampling estimate of the normalizing constant.
    pub log_evidence: f64,
}

impl<O> LwRun<O> {
    pub fn log_weights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }
}

/// Runs the model `n` times from the prior; sample `i` uses the source
/// derived from `(seed, i)`.
pub fn likelihood_weighting<M: Model>(model: &M, n: usize, seed: u64) -> Result<LwRun<M::Output>, InferenceError<M::Error>> {
    if n == 0 {
        return Err(InferenceError::Config("likelihood weighting needs at least one sample".into()));
    }
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|i| run_model(model, RandomSource::for_index(seed, i)).map(|t| (t.output, t.log_weight)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(InferenceError::Model)?;
    let logs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let log_evidence = log_sum_exp(&logs) - (n as f64).ln();
    Ok(LwRun { ess: ess(&logs), log_evidence, samples })
}

/// Output of a lightweight Metropolis–Hastings run.
#[derive(Clone, Debug)]
pub struct LmhRun<O> {
    /// Outputs of the post-burn-in states, one per step.
    pub samples: Vec<O>,
    pub accepted: usize,
    pub steps: usize,
}

impl<O> LmhRun<O> {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.steps as f64
    }
}

const FRESH_STREAM: u64 = 0x5851_f42d_4c95_7f2d;
const PROPOSAL_STREAM: u64 = 0x1405_7b7e_f767_814f;

/// Single-site trace Metropolis–Hastings. Each step picks one site of the
/// current trace uniformly, redraws its uniform value, replays the model
/// reusing every other stored site, and accepts with probability
/// `min(1, exp(w' − w) · |t| / |t'|)`.
pub fn lmh<M: Model>(model: &M, steps: usize, burnin: usize, seed: u64) -> Result<LmhRun<M::Output>, InferenceError<M::Error>> {
    lmh_with_restarts(model, steps, burnin, seed, DEFAULT_MAX_RESTARTS)
}

pub fn lmh_with_restarts<M: Model>(
    model: &M,
    steps: usize,
    burnin: usize,
    seed: u64,
    max_restarts: usize,
) -> Result<LmhRun<M::Output>, InferenceError<M::Error>> {
    if steps <= burnin {
        return Err(InferenceError::Config(format!("steps ({steps}) must exceed burn-in ({burnin})")));
    }
    let mut current = None;
    for j in 0..max_restarts {
        let trace = run_model(model, RandomSource::for_index(seed, j as u64)).map_err(InferenceError::Model)?;
        if trace.log_weight > f64::NEG_INFINITY {
            current = Some(trace);
            break;
        }
    }
    let mut current = current.ok_or(InferenceError::StuckChain(max_restarts))?;
    if current.is_empty() {
        return Err(InferenceError::NoSampleSites);
    }

    let mut proposal_rng = RandomSource::for_index(seed.wrapping_add(PROPOSAL_STREAM), u64::MAX);
    let fresh_seed = seed.wrapping_add(FRESH_STREAM);
    let mut samples = Vec::with_capacity(steps - burnin);
    let mut accepted = 0;
    for step in 0..steps {
        let len = current.len();
        let pick = ((proposal_rng.draw_open() * len as f64) as usize).min(len - 1);
        let mut replay_map: HashMap<Address, f64> = current.sites.iter().cloned().collect();
        replay_map.insert(current.sites[pick].0.clone(), proposal_rng.draw_open());
        let ctx = SampleContext::replaying(RandomSource::for_index(fresh_seed, step as u64), &replay_map);
        let proposed = run_in(model, ctx).map_err(InferenceError::Model)?;
        let log_ratio = proposed.log_weight - current.log_weight + (len as f64).ln()
            - (proposed.len().max(1) as f64).ln();
        if !proposed.is_empty() && proposal_rng.draw_open().ln() < log_ratio {
            current = proposed;
            accepted += 1;
        }
        if step >= burnin {
            samples.push(current.output.clone());
        }
    }
    Ok(LmhRun { samples, accepted, steps })
}
