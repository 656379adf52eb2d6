//! Probability measures as pairs of a random variable and a base measure.
//!
//! A [`Measure<X>`] pairs a map out of the sample space with the law of the
//! sample-space point. Three shapes of that map are kept apart because they
//! admit different integration routes:
//!
//! * a function of one real coordinate drawn from `base` (exact enumeration
//!   when `base` is atomic, quadrature when it is continuous),
//! * a family of measures indexed by that coordinate, which is what `bind`
//!   produces from the first shape and keeps quadrature available,
//! * a function of a whole uniform stream, the canonical form every
//!   continuous bind can fall back on.
//!
//! Finite measures stay finite under `map`, `bind`, and `product` whenever
//! every kernel result is finite, with weights multiplied exactly.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::base::{unit_interval_rule, BaseMeasure};
use crate::error::{BaseError, MeasureError};
use crate::source::RandomSource;

/// Anything a measure can range over.
pub trait Value: Clone + Send + Sync + 'static {}
impl<T: Clone + Send + Sync + 'static> Value for T {}

type CoordFn<X> = Arc<dyn Fn(f64) -> X + Send + Sync>;
type FamilyFn<X> = Arc<dyn Fn(f64) -> Measure<X> + Send + Sync>;
type StreamFn<X> = Arc<dyn Fn(&RandomSource) -> X + Send + Sync>;

/// A parameterized measure `X → P(Y)`.
pub type Kernel<X, Y> = Arc<dyn Fn(&X) -> Measure<Y> + Send + Sync>;

/// A real-valued test function used for integration and equivalence checks.
pub type TestFn<'a, X> = &'a (dyn Fn(&X) -> f64 + Sync);

const MC_CHUNK: u64 = 4096;
const DEFAULT_EQUIV_SAMPLES: u64 = 20_000;

enum Alpha<X> {
    Coord(CoordFn<X>),
    Family(FamilyFn<X>),
    Stream(StreamFn<X>),
}

impl<X> Clone for Alpha<X> {
    fn clone(&self) -> Self {
        match self {
            Alpha::Coord(f) => Alpha::Coord(f.clone()),
            Alpha::Family(f) => Alpha::Family(f.clone()),
            Alpha::Stream(f) => Alpha::Stream(f.clone()),
        }
    }
}

pub struct Measure<X> {
    alpha: Alpha<X>,
    base: BaseMeasure,
}

impl<X> Clone for Measure<X> {
    fn clone(&self) -> Self {
        Measure { alpha: self.alpha.clone(), base: self.base.clone() }
    }
}

impl<X> fmt::Debug for Measure<X> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match self.alpha {
            Alpha::Coord(_) => "coord",
            Alpha::Family(_) => "family",
            Alpha::Stream(_) => "stream",
        };
        write!(f, "Measure({shape} over {})", self.base)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    /// Sample-space atoms `(location, weight)`.
    Finite(Vec<(f64, f64)>),
    Continuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Exact,
    Quadrature(usize),
    Mc { n: u64, seed: u64 },
}

/// A Monte Carlo estimate and its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    const EMPTY: Moments = Moments { n: 0.0, mean: 0.0, m2: 0.0 };

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }
}

fn check_finite(v: f64) -> Result<f64, MeasureError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(MeasureError::NonFinite(v))
    }
}

impl<X: Value> Measure<X> {
    /// Dirac measure: constant map over a point-mass base.
    pub fn unit(x: X) -> Self {
        Self::from_base(BaseMeasure::PointMass(0.0), move |_| x.clone())
    }

    /// The pushforward of `base` along `f`.
    pub fn from_base(base: BaseMeasure, f: impl Fn(f64) -> X + Send + Sync + 'static) -> Self {
        Measure { alpha: Alpha::Coord(Arc::new(f)), base }
    }

    /// A measure given by a map out of the uniform stream.
    pub fn from_stream(f: impl Fn(&RandomSource) -> X + Send + Sync + 'static) -> Self {
        Measure { alpha: Alpha::Stream(Arc::new(f)), base: BaseMeasure::Uniform01 }
    }

    /// Finite measure from `(value, weight)` pairs whose weights sum to one.
    pub fn atoms(atoms: Vec<(X, f64)>) -> Result<Self, BaseError> {
        let base = BaseMeasure::atoms(atoms.iter().enumerate().map(|(i, a)| (i as f64, a.1)))?;
        let table: Vec<X> = atoms.into_iter().map(|a| a.0).collect();
        Ok(Self::table(base, table))
    }

    /// Finite measure from nonnegative weights, normalized; zero weights drop out.
    pub fn weighted(atoms: Vec<(X, f64)>) -> Result<Self, BaseError> {
        if atoms.iter().any(|a| !(a.1 >= 0.0) || !a.1.is_finite()) {
            return Err(BaseError::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(BaseError::InvalidParameter("weights sum to zero".into()));
        }
        Self::from_positive(atoms.into_iter().map(|(x, w)| (x, w / total)).collect())
    }

    /// Uniform over the given values.
    pub fn uniform_atoms(values: Vec<X>) -> Result<Self, BaseError> {
        let w = 1.0 / values.len() as f64;
        Self::weighted(values.into_iter().map(|x| (x, w)).collect())
    }

    fn from_positive(atoms: Vec<(X, f64)>) -> Result<Self, BaseError> {
        let atoms: Vec<(X, f64)> = atoms.into_iter().filter(|a| a.1 > 0.0).collect();
        if atoms.len() == 1 {
            let x = atoms.into_iter().next().expect("one atom").0;
            return Ok(Self::unit(x));
        }
        Self::atoms(atoms)
    }

    fn table(base: BaseMeasure, table: Vec<X>) -> Self {
        let last = table.len() - 1;
        Self::from_base(base, move |r| table[(r.max(0.0) as usize).min(last)].clone())
    }

    pub fn base(&self) -> &BaseMeasure {
        &self.base
    }

    pub fn support(&self) -> Support {
        match (&self.alpha, self.base.atom_list()) {
            (Alpha::Coord(_), Some(atoms)) => Support::Finite(atoms),
            _ => Support::Continuous,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.alpha, Alpha::Coord(_)) && self.base.is_atomic()
    }

    /// Values and weights of a finite measure, in sample-space order.
    pub fn enumerate(&self) -> Option<Vec<(X, f64)>> {
        match (&self.alpha, self.base.atom_list()) {
            (Alpha::Coord(f), Some(atoms)) => Some(atoms.into_iter().map(|(r, w)| (f(r), w)).collect()),
            _ => None,
        }
    }

    /// The random variable evaluated at a sample-space point.
    pub fn sample(&self, src: &RandomSource) -> X {
        match &self.alpha {
            Alpha::Coord(f) => f(self.coordinate(&mut src.clone())),
            Alpha::Family(family) => {
                let (mut first, second) = src.split();
                family(self.coordinate(&mut first)).sample(&second)
            }
            Alpha::Stream(f) => f(src),
        }
    }

    fn coordinate(&self, src: &mut RandomSource) -> f64 {
        let u = src.draw_open();
        self.base.quantile(u).expect("draw_open lies in (0, 1)")
    }

    pub fn map<Y: Value>(&self, f: impl Fn(&X) -> Y + Send + Sync + 'static) -> Measure<Y> {
        self.map_arc(Arc::new(f))
    }

    fn map_arc<Y: Value>(&self, f: Arc<dyn Fn(&X) -> Y + Send + Sync>) -> Measure<Y> {
        let alpha = match &self.alpha {
            Alpha::Coord(g) => {
                let g = g.clone();
                Alpha::Coord(Arc::new(move |r| f(&g(r))) as CoordFn<Y>)
            }
            Alpha::Family(family) => {
                let family = family.clone();
                Alpha::Family(Arc::new(move |r| family(r).map_arc(f.clone())) as FamilyFn<Y>)
            }
            Alpha::Stream(g) => {
                let g = g.clone();
                Alpha::Stream(Arc::new(move |src: &RandomSource| f(&g(src))) as StreamFn<Y>)
            }
        };
        Measure { alpha, base: self.base.clone() }
    }

    pub fn bind<Y: Value>(&self, k: impl Fn(&X) -> Measure<Y> + Send + Sync + 'static) -> Measure<Y> {
        self.bind_arc(Arc::new(k))
    }

    pub fn bind_arc<Y: Value>(&self, k: Kernel<X, Y>) -> Measure<Y> {
        if let Some(atoms) = self.enumerate() {
            let inner: Vec<(f64, Measure<Y>)> = atoms.into_iter().map(|(x, w)| (w, k(&x))).collect();
            if let Some(flat) = flatten_finite(&inner) {
                return flat;
            }
        }
        let alpha = match &self.alpha {
            Alpha::Coord(g) => {
                let g = g.clone();
                Alpha::Family(Arc::new(move |r| k(&g(r))) as FamilyFn<Y>)
            }
            Alpha::Family(family) => {
                let family = family.clone();
                Alpha::Family(Arc::new(move |r| family(r).bind_arc(k.clone())) as FamilyFn<Y>)
            }
            Alpha::Stream(_) => {
                let outer = self.clone();
                let stream = move |src: &RandomSource| {
                    let (first, second) = src.split();
                    k(&outer.sample(&first)).sample(&second)
                };
                return Measure::from_stream(stream);
            }
        };
        Measure { alpha, base: self.base.clone() }
    }

    pub fn product<Y: Value>(&self, other: &Measure<Y>) -> Measure<(X, Y)> {
        let other = other.clone();
        self.bind(move |x| {
            let x = x.clone();
            other.map(move |y| (x.clone(), y.clone()))
        })
    }

    pub fn integrate(&self, f: impl Fn(&X) -> f64 + Sync, method: Method) -> Result<f64, MeasureError> {
        self.integrate_dyn(&f, method)
    }

    fn integrate_dyn(&self, f: TestFn<'_, X>, method: Method) -> Result<f64, MeasureError> {
        match method {
            Method::Exact => self.integrate_exact(f),
            Method::Quadrature(nodes) => self.integrate_quadrature(f, nodes),
            Method::Mc { n, seed } => self.mc_dyn(f, n, seed).map(|e| e.value),
        }
    }

    fn integrate_exact(&self, f: TestFn<'_, X>) -> Result<f64, MeasureError> {
        let atoms = self
            .base
            .atom_list()
            .ok_or_else(|| MeasureError::MethodMismatch(format!("exact integration over {}", self.base)))?;
        let mut total = 0.0;
        for (r, w) in atoms {
            let v = match &self.alpha {
                Alpha::Coord(g) => check_finite(f(&g(r)))?,
                Alpha::Family(family) => family(r).integrate_exact(f)?,
                Alpha::Stream(_) => {
                    return Err(MeasureError::MethodMismatch("exact integration of a stream measure".into()))
                }
            };
            total += w * v;
        }
        Ok(total)
    }

    fn integrate_quadrature(&self, f: TestFn<'_, X>, nodes: usize) -> Result<f64, MeasureError> {
        if nodes == 0 {
            return Err(MeasureError::MethodMismatch("quadrature with zero nodes".into()));
        }
        let inner = |m: &Measure<X>| {
            if m.is_finite() {
                m.integrate_exact(f)
            } else {
                m.integrate_quadrature(f, nodes)
            }
        };
        match (&self.alpha, self.base.atom_list()) {
            (Alpha::Stream(_), _) => {
                Err(MeasureError::MethodMismatch("quadrature needs a single real coordinate".into()))
            }
            (Alpha::Coord(_), Some(_)) => {
                Err(MeasureError::MethodMismatch(format!("quadrature over atomic base {}", self.base)))
            }
            (Alpha::Family(family), Some(atoms)) => {
                let mut total = 0.0;
                for (r, w) in atoms {
                    total += w * inner(&family(r))?;
                }
                Ok(total)
            }
            (alpha, None) => {
                let mut total = 0.0;
                for (u, w) in unit_interval_rule(nodes) {
                    let r = self.base.quantile(u)?;
                    let v = match alpha {
                        Alpha::Coord(g) => check_finite(f(&g(r)))?,
                        Alpha::Family(family) => inner(&family(r))?,
                        Alpha::Stream(_) => unreachable!(),
                    };
                    total += w * v;
                }
                Ok(total)
            }
        }
    }

    /// Monte Carlo mean of `f` with its standard error. Index `i` always uses
    /// the source derived from `(seed, i)`, and partial sums are combined in a
    /// fixed order, so the result does not depend on the worker count.
    pub fn mc_estimate(&self, f: impl Fn(&X) -> f64 + Sync, n: u64, seed: u64) -> Result<Estimate, MeasureError> {
        self.mc_dyn(&f, n, seed)
    }

    fn mc_dyn(&self, f: TestFn<'_, X>, n: u64, seed: u64) -> Result<Estimate, MeasureError> {
        if n == 0 {
            return Err(MeasureError::MethodMismatch("Monte Carlo with zero samples".into()));
        }
        let chunks = n.div_ceil(MC_CHUNK);
        let partials: Vec<Result<Moments, MeasureError>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut m = Moments::EMPTY;
                for i in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(n) {
                    m.push(check_finite(f(&self.sample(&RandomSource::for_index(seed, i))))?);
                }
                Ok(m)
            })
            .collect();
        let mut total = Moments::EMPTY;
        for p in partials {
            total = total.merge(p?);
        }
        let variance = if total.n > 1.0 { total.m2 / (total.n - 1.0) } else { 0.0 };
        Ok(Estimate { value: total.mean, std_error: (variance / total.n).sqrt() })
    }

    /// Probability of an event.
    pub fn probability(&self, event: impl Fn(&X) -> bool + Sync, method: Method) -> Result<f64, MeasureError> {
        self.integrate(|x| if event(x) { 1.0 } else { 0.0 }, method)
    }

    /// Equivalence on a finite family of test functions; see [`Measure::equivalent_with`].
    pub fn equivalent(&self, other: &Measure<X>, tests: &[TestFn<'_, X>], tol: f64) -> bool {
        self.equivalent_with(other, tests, tol, DEFAULT_EQUIV_SAMPLES, 0)
    }

    /// True iff every test function integrates to the same value under both
    /// measures within `tol`. Two finite measures are compared exactly; other
    /// pairs by Monte Carlo with `n` samples, where the tolerance is widened by
    /// three combined standard errors.
    pub fn equivalent_with(&self, other: &Measure<X>, tests: &[TestFn<'_, X>], tol: f64, n: u64, seed: u64) -> bool {
        tests.iter().all(|f| {
            if self.is_finite() && other.is_finite() {
                match (self.integrate_exact(*f), other.integrate_exact(*f)) {
                    (Ok(a), Ok(b)) => (a - b).abs() <= tol,
                    _ => false,
                }
            } else {
                match (self.mc_dyn(*f, n, seed), other.mc_dyn(*f, n, seed)) {
                    (Ok(a), Ok(b)) => {
                        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
                        (a.value - b.value).abs() <= tol + 3.0 * se
                    }
                    _ => false,
                }
            }
        })
    }
}

fn flatten_finite<Y: Value>(inner: &[(f64, Measure<Y>)]) -> Option<Measure<Y>> {
    let mut atoms = Vec::new();
    for (w, m) in inner {
        for (y, v) in m.enumerate()? {
            atoms.push((y, w * v));
        }
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    Measure::from_positive(atoms.into_iter().map(|(y, w)| (y, w / total)).collect()).ok()
}

impl Measure<f64> {
    pub fn normal(mean: f64, sd: f64) -> Result<Self, BaseError> {
        Ok(Self::from_base(BaseMeasure::normal(mean, sd)?, |r| r))
    }

    pub fn uniform() -> Self {
        Self::from_base(BaseMeasure::Uniform01, |r| r)
    }

    pub fn beta(a: f64, b: f64) -> Result<Self, BaseError> {
        Ok(Self::from_base(BaseMeasure::beta(a, b)?, |r| r))
    }

    /// The base measure itself, as a measure on the reals.
    pub fn of_base(base: BaseMeasure) -> Self {
        Self::from_base(base, |r| r)
    }
}

impl Measure<u8> {
    /// Coin with `P(1) = p` as a finite measure.
    pub fn bernoulli(p: f64) -> Result<Self, BaseError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(BaseError::InvalidParameter(format!("bernoulli({p})")));
        }
        Self::from_positive(vec![(0, 1.0 - p), (1, p)])
    }
}
