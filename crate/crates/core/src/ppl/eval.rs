use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::ast::{Ast, DistKind};
use crate::base::BaseMeasure;
use crate::inference::{observe, SampleContext};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("type error: {0}")]
    RuntimeType(String),
    #[error("invalid distribution parameters: {0}")]
    DistParam(String),
    #[error("observe produced an undefined (NaN) log-weight: {0}")]
    NanWeight(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dist {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Bernoulli(f64),
    Beta { a: f64, b: f64 },
}

impl Dist {
    pub fn new(kind: DistKind, args: &[f64]) -> Result<Self, EvalError> {
        let bad = || EvalError::DistParam(format!("{}{:?}", kind.name(), args));
        let finite = args.iter().all(|a| a.is_finite());
        let d = match (kind, args) {
            (DistKind::Normal, &[mean, sd]) if finite && sd > 0.0 => Dist::Normal { mean, sd },
            (DistKind::Uniform, &[lo, hi]) if finite && lo < hi => Dist::Uniform { lo, hi },
            (DistKind::Bernoulli, &[p]) if (0.0..=1.0).contains(&p) => Dist::Bernoulli(p),
            (DistKind::Beta, &[a, b]) if finite && a > 0.0 && b > 0.0 => Dist::Beta { a, b },
            _ => return Err(bad()),
        };
        Ok(d)
    }

    fn base(&self) -> BaseMeasure {
        match *self {
            Dist::Normal { mean, sd } => BaseMeasure::Normal { mean, sd },
            Dist::Uniform { .. } => BaseMeasure::Uniform01,
            Dist::Bernoulli(p) => BaseMeasure::bernoulli(p).expect("checked on construction"),
            Dist::Beta { a, b } => BaseMeasure::Beta { a, b },
        }
    }

    /// The draw at quantile level `u ∈ (0, 1)`.
    pub fn sample_at(&self, u: f64) -> f64 {
        let v = self.base().quantile(u).expect("levels from draw_open are interior");
        match *self {
            Dist::Uniform { lo, hi } => lo + (hi - lo) * v,
            _ => v,
        }
    }

    pub fn log_prob(&self, x: f64) -> f64 {
        match *self {
            Dist::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    -(hi - lo).ln()
                } else if x.is_nan() {
                    f64::NAN
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ => observe(&self.base(), x),
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Normal { mean, sd } => write!(f, "(normal {mean:?} {sd:?})"),
            Dist::Uniform { lo, hi } => write!(f, "(uniform {lo:?} {hi:?})"),
            Dist::Bernoulli(p) => write!(f, "(bernoulli {p:?})"),
            Dist::Beta { a, b } => write!(f, "(beta {a:?} {b:?})"),
        }
    }
}

/// Persistent environment: a shared linked list of frames, innermost first.
#[derive(Clone, Default)]
pub struct Env(Option<Arc<Frame>>);

struct Frame {
    name: String,
    value: Value,
    next: Env,
}

impl Env {
    pub fn extend(&self, name: &str, value: Value) -> Env {
        Env(Some(Arc::new(Frame { name: name.to_string(), value, next: self.clone() })))
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        let mut cur = self.0.as_deref();
        while let Some(frame) = cur {
            if frame.name == name {
                return Some(&frame.value);
            }
            cur = frame.next.0.as_deref();
        }
        None
    }
}

pub struct Closure {
    pub params: Vec<String>,
    pub body: Arc<Ast>,
    env: Env,
}

#[derive(Clone)]
pub enum Value {
    Num(f64),
    Closure(Arc<Closure>),
    Dist(Dist),
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x:?}"),
            Value::Closure(c) => write!(f, "<fn [{}]>", c.params.join(" ")),
            Value::Dist(d) => write!(f, "{d}"),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.to_bits() == b.to_bits(),
            (Value::Closure(a), Value::Closure(b)) => Arc::ptr_eq(a, b),
            (Value::Dist(a), Value::Dist(b)) => a == b,
            _ => false,
        }
    }
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Value::Num(_) => "a number",
            Value::Closure(_) => "a function",
            Value::Dist(_) => "a distribution",
        }
    }

    /// Numeric columns for output. A number is one column under `label`; a
    /// function contributes the numbers it closes over, as `label.var`
    /// (recursively for captured functions); a distribution has no numeric
    /// reading and yields a single empty column.
    pub fn flatten(&self, label: &str) -> Vec<(String, Option<f64>)> {
        match self {
            Value::Num(x) => vec![(label.to_string(), Some(*x))],
            Value::Dist(_) => vec![(label.to_string(), None)],
            Value::Closure(c) => {
                let free = Ast::Fn { params: c.params.clone(), body: c.body.clone() }.free_vars();
                let mut out = Vec::new();
                for var in free {
                    if let Some(v) = c.env.lookup(&var) {
                        out.extend(v.flatten(&format!("{label}.{var}")));
                    }
                }
                out
            }
        }
    }
}

/// What one run of a query produces besides its log-weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub value: Value,
    pub predicts: BTreeMap<String, Value>,
}

pub(crate) struct Interp<'c, 'r> {
    pub ctx: &'c mut SampleContext<'r>,
    pub predicts: BTreeMap<String, Value>,
}

impl Interp<'_, '_> {
    fn num(&mut self, e: &Ast, env: &Env, what: &str) -> Result<f64, EvalError> {
        match self.eval(e, env)? {
            Value::Num(x) => Ok(x),
            v => Err(EvalError::RuntimeType(format!("{what} expects a number, got {}", v.kind()))),
        }
    }

    fn dist(&mut self, e: &Ast, env: &Env, what: &str) -> Result<Dist, EvalError> {
        match self.eval(e, env)? {
            Value::Dist(d) => Ok(d),
            v => Err(EvalError::RuntimeType(format!("{what} expects a distribution, got {}", v.kind()))),
        }
    }

    pub fn eval(&mut self, e: &Ast, env: &Env) -> Result<Value, EvalError> {
        match e {
            Ast::Number(x) => Ok(Value::Num(*x)),
            Ast::Var(v) => env
                .lookup(v)
                .cloned()
                .ok_or_else(|| EvalError::RuntimeType(format!("unbound variable '{v}'"))),
            Ast::Let { bindings, body } => {
                let mut env = env.clone();
                for (name, value) in bindings {
                    let v = self.eval(value, &env)?;
                    env = env.extend(name, v);
                }
                let mut last = None;
                for b in body {
                    last = Some(self.eval(b, &env)?);
                }
                Ok(last.expect("parser rejects empty let bodies"))
            }
            Ast::Sample(d) => {
                let d = self.dist(d, env, "sample")?;
                let u = self.ctx.sample_unit();
                Ok(Value::Num(d.sample_at(u)))
            }
            Ast::Observe { dist, value } => {
                let d = self.dist(dist, env, "observe")?;
                let x = self.num(value, env, "observe")?;
                let lw = d.log_prob(x);
                if lw.is_nan() {
                    return Err(EvalError::NanWeight(format!("observing {x:?} under {d}")));
                }
                self.ctx.score(lw);
                Ok(Value::Num(x))
            }
            Ast::Fn { params, body } => {
                Ok(Value::Closure(Arc::new(Closure { params: params.clone(), body: body.clone(), env: env.clone() })))
            }
            Ast::App { func, args } => {
                let f = self.eval(func, env)?;
                let args = args.iter().map(|a| self.eval(a, env)).collect::<Result<Vec<_>, _>>()?;
                let Value::Closure(c) = f else {
                    return Err(EvalError::RuntimeType(format!("cannot apply {}", f.kind())));
                };
                if c.params.len() != args.len() {
                    return Err(EvalError::RuntimeType(format!(
                        "function of {} argument(s) applied to {}",
                        c.params.len(),
                        args.len()
                    )));
                }
                let mut inner = c.env.clone();
                for (p, a) in c.params.iter().zip(args) {
                    inner = inner.extend(p, a);
                }
                self.eval(&c.body, &inner)
            }
            Ast::Prim { op, args } => {
                let a = self.num(&args[0], env, op.symbol())?;
                let b = self.num(&args[1], env, op.symbol())?;
                Ok(Value::Num(op.apply(a, b)))
            }
            Ast::Dist { kind, args } => {
                let xs = args.iter().map(|a| self.num(a, env, kind.name())).collect::<Result<Vec<_>, _>>()?;
                Ok(Value::Dist(Dist::new(*kind, &xs)?))
            }
            Ast::Predict { label, value } => {
                let v = self.eval(value, env)?;
                self.predicts.insert(label.clone(), v.clone());
                Ok(v)
            }
        }
    }
}
