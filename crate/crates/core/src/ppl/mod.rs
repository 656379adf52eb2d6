//! A small Anglican-style language: `defquery`, `let`, `fn`, `sample`,
//! `observe`, `predict`, arithmetic, and four distributions.
//!
//! ```
//! use qbs::ppl::{parse, run, Algorithm};
//!
//! let q = parse("(defquery coin (let [p (sample (beta 1 1))] (observe (bernoulli p) 1) (predict :p p)))").unwrap();
//! let result = run(&q, Algorithm::Lw { samples: 1000 }, 7).unwrap();
//! assert_eq!(result.samples.len(), 1000);
//! ```

mod ast;
mod eval;
mod parser;

use std::collections::BTreeMap;

pub use ast::{Ast, DistKind, PrimOp, Query};
pub use eval::{Dist, EvalError, Outcome, Value};
pub use parser::{parse, ParseError, Pos};

use crate::inference::{self, check_log_weights, InferenceError, Model, SampleContext, Trace};
use crate::source::RandomSource;

/// The Bayesian linear regression program, verbatim.
pub const LINEAR_REGRESSION: &str = include_str!("../../corpus/ok/linear_regression.qppl");

/// A query in sampler form: source in, outcome and log-weight out.
#[derive(Clone, Debug)]
pub struct Denotation {
    query: Query,
}

pub fn denote(query: &Query) -> Denotation {
    Denotation { query: query.clone() }
}

impl Denotation {
    pub fn query(&self) -> &Query {
        &self.query
    }

    /// One run at `source`.
    pub fn at(&self, source: RandomSource) -> Result<Trace<Outcome>, EvalError> {
        inference::run_model(self, source)
    }
}

impl Model for Denotation {
    type Output = Outcome;
    type Error = EvalError;

    fn simulate(&self, ctx: &mut SampleContext<'_>) -> Result<Outcome, EvalError> {
        let mut interp = eval::Interp { ctx, predicts: BTreeMap::new() };
        let value = interp.eval(&self.query.body, &eval::Env::default())?;
        Ok(Outcome { value, predicts: interp.predicts })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Lw { samples: usize },
    Lmh { steps: usize, burnin: usize },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Lw { .. } => "lw",
            Algorithm::Lmh { .. } => "lmh",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunSample {
    pub predicts: BTreeMap<String, Value>,
    /// `None` for Markov chain states, which are unweighted.
    pub log_weight: Option<f64>,
}

impl RunSample {
    /// Predicts flattened to numeric columns, see [`Value::flatten`].
    pub fn columns(&self) -> Vec<(String, Option<f64>)> {
        self.predicts.iter().flat_map(|(label, v)| v.flatten(label)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub query: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Effective sample size of the importance weights (likelihood weighting only).
    pub ess: Option<f64>,
    pub samples: Vec<RunSample>,
}

impl RunResult {
    /// Values of one flattened column across samples, with the sample's log-weight
    /// (`0` for chain states).
    pub fn column(&self, name: &str) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter_map(|s| {
                let x = s.columns().into_iter().find(|(n, _)| n == name)?.1?;
                Some((x, s.log_weight.unwrap_or(0.0)))
            })
            .collect()
    }
}

pub type RunError = InferenceError<EvalError>;

pub fn run(query: &Query, algorithm: Algorithm, seed: u64) -> Result<RunResult, RunError> {
    let model = denote(query);
    let (ess, samples) = match algorithm {
        Algorithm::Lw { samples } => {
            let out = inference::likelihood_weighting(&model, samples, seed)?;
            check_log_weights(out.samples.iter().map(|s| s.1))?;
            let samples = out
                .samples
                .into_iter()
                .map(|(o, lw)| RunSample { predicts: o.predicts, log_weight: Some(lw) })
                .collect();
            (Some(out.ess), samples)
        }
        Algorithm::Lmh { steps, burnin } => {
            let out = inference::lmh(&model, steps, burnin, seed)?;
            let samples = out.samples.into_iter().map(|o| RunSample { predicts: o.predicts, log_weight: None }).collect();
            (None, samples)
        }
    };
    Ok(RunResult { query: query.name.clone(), algorithm, seed, ess, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::NormError;

    fn q(text: &str) -> Query {
        parse(text).unwrap()
    }

    #[test]
    fn arithmetic_has_no_weight() {
        let t = denote(&q("(defquery q (+ 1 2))")).at(RandomSource::new(5)).unwrap();
        assert_eq!(t.output.value, Value::Num(3.0));
        assert!(t.output.predicts.is_empty());
        assert_eq!(t.log_weight, 0.0);
    }

    #[test]
    fn observe_constant_weight() {
        let m = denote(&q("(defquery q (observe (normal 0 0.5) 0))"));
        let expected = (2.0 / std::f64::consts::PI).sqrt().ln();
        for seed in 0..5 {
            assert!((m.at(RandomSource::new(seed)).unwrap().log_weight - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn regression_program_shape() {
        let query = q(LINEAR_REGRESSION);
        assert_eq!(query.name, "Bayesian-linear-regression");
        let counts = query.body.form_counts();
        assert_eq!(counts["observe"], 5);
        assert_eq!(counts["predict"], 1);
        assert_eq!(counts["sample"], 2);
    }

    #[test]
    fn closure_reuses_its_draws() {
        let m = denote(&q(LINEAR_REGRESSION));
        let t = m.at(RandomSource::new(3)).unwrap();
        assert_eq!(t.sites.len(), 2);
        let cols = RunSample { predicts: t.output.predicts, log_weight: None }.columns();
        let names: Vec<_> = cols.iter().map(|c| c.0.as_str()).collect();
        assert_eq!(names, ["f.b", "f.s"]);
    }

    #[test]
    fn runtime_errors() {
        let e = denote(&q("(defquery q (let [x 1] (x 2)))")).at(RandomSource::new(0)).unwrap_err();
        assert!(matches!(e, EvalError::RuntimeType(_)));
        let e = denote(&q("(defquery q (sample (normal 0 (- 1 1))))")).at(RandomSource::new(0)).unwrap_err();
        assert!(matches!(e, EvalError::DistParam(_)));
        let e = denote(&q("(defquery q (observe (normal 0 1) (/ 0 0)))")).at(RandomSource::new(0)).unwrap_err();
        assert!(matches!(e, EvalError::NanWeight(_)));
    }

    #[test]
    fn impossible_evidence() {
        let query = q("(defquery q (let [x (sample (normal 0 1))] (observe (bernoulli 1.0) 0) (predict :x x)))");
        let e = run(&query, Algorithm::Lw { samples: 100 }, 1).unwrap_err();
        assert!(matches!(e, InferenceError::Norm(NormError::ZeroMass)));
        let query = q("(defquery q (observe (normal 0 1e-310) 0))");
        let e = run(&query, Algorithm::Lw { samples: 10 }, 1).unwrap_err();
        assert!(matches!(e, InferenceError::Norm(NormError::InfiniteMass)));
    }

    #[test]
    fn last_predict_wins() {
        let query = q("(defquery q (let [a (predict :x 1) b (predict :x 2)] (predict :y 3)))");
        assert_eq!(query.duplicate_labels(), ["x"]);
        let t = denote(&query).at(RandomSource::new(0)).unwrap();
        assert_eq!(t.output.predicts["x"], Value::Num(2.0));
        assert_eq!(t.output.predicts.len(), 2);
    }

    #[test]
    fn normal_prior_mean() {
        let query = q("(defquery q (predict :x (sample (normal 0 1))))");
        let r = run(&query, Algorithm::Lw { samples: 10_000 }, 11).unwrap();
        let xs: Vec<f64> = r.column("x").into_iter().map(|c| c.0).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 3.0 / 100.0, "{mean}");
        assert_eq!(r.ess, Some(10_000.0));
    }
}
