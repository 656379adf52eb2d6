//! Finite iid sequences, exchangeability, and mixtures of iid measures.
//!
//! Events are rectangles, products of one predicate per coordinate. That is
//! the product σ-algebra on finite prefixes and nothing larger.

use std::sync::Arc;

use crate::base::BaseMeasure;
use crate::error::{BaseError, MeasureError};
use crate::measure::{Measure, Method, Value};

const EXCHANGE_QUADRATURE_NODES: usize = 64;
const EXCHANGE_MC_SAMPLES: u64 = 20_000;

/// One coordinate's predicate in a [`Rectangle`].
pub type Side<X> = Arc<dyn Fn(&X) -> bool + Send + Sync>;

/// A measure on sequences of length exactly `n`.
pub struct SeqMeasure<X> {
    n: usize,
    inner: Measure<Vec<X>>,
}

impl<X> Clone for SeqMeasure<X> {
    fn clone(&self) -> Self {
        SeqMeasure { n: self.n, inner: self.inner.clone() }
    }
}

impl<X: Value> SeqMeasure<X> {
    /// Wraps a measure on vectors; every sampled vector must have length `n`.
    pub fn new(n: usize, inner: Measure<Vec<X>>) -> Self {
        SeqMeasure { n, inner }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn measure(&self) -> &Measure<Vec<X>> {
        &self.inner
    }

    pub fn into_measure(self) -> Measure<Vec<X>> {
        self.inner
    }

    /// Law of coordinate `i`.
    pub fn marginal(&self, i: usize) -> Measure<X> {
        self.inner.map(move |v| v[i].clone())
    }

    pub fn probability(&self, event: &Rectangle<X>, method: Method) -> Result<f64, MeasureError> {
        self.inner.probability(|v| event.contains(v), method)
    }
}

fn domain(msg: impl Into<String>) -> BaseError {
    BaseError::Domain(msg.into())
}

/// `n` independent copies of `m`. Finite measures give the exact product;
/// otherwise coordinate `i` reads the `i`-th source of an `n`-way split.
pub fn iid_n<X: Value>(m: &Measure<X>, n: usize) -> Result<SeqMeasure<X>, BaseError> {
    if n == 0 {
        return Err(domain("iid sequence of length zero"));
    }
    if let Some(atoms) = m.enumerate() {
        let mut seqs: Vec<(Vec<X>, f64)> = vec![(Vec::with_capacity(n), 1.0)];
        for _ in 0..n {
            seqs = seqs
                .into_iter()
                .flat_map(|(prefix, w)| {
                    atoms.iter().map(move |(x, v)| {
                        let mut next = prefix.clone();
                        next.push(x.clone());
                        (next, w * v)
                    })
                })
                .collect();
        }
        return Ok(SeqMeasure::new(n, Measure::weighted(seqs)?));
    }
    let m = m.clone();
    let inner = Measure::from_stream(move |src| {
        src.split_n(n).expect("n >= 1").iter().map(|s| m.sample(s)).collect()
    });
    Ok(SeqMeasure::new(n, inner))
}

fn check_permutation(perm: &[usize], n: usize) -> Result<(), BaseError> {
    if perm.len() != n {
        return Err(domain(format!("permutation of length {} on sequences of length {n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(domain(format!("{perm:?} is not a bijection on 0..{n}")));
        }
    }
    Ok(())
}

/// Reindexes coordinates: position `i` of the result holds coordinate `perm[i]`.
pub fn permute<X: Value>(s: &SeqMeasure<X>, perm: &[usize]) -> Result<SeqMeasure<X>, BaseError> {
    check_permutation(perm, s.n)?;
    let perm = perm.to_vec();
    let inner = s.inner.map(move |v| perm.iter().map(|&p| v[p].clone()).collect());
    Ok(SeqMeasure::new(s.n, inner))
}

/// A product event: one predicate per coordinate.
pub struct Rectangle<X> {
    sides: Vec<Side<X>>,
}

impl<X> Clone for Rectangle<X> {
    fn clone(&self) -> Self {
        Rectangle { sides: self.sides.clone() }
    }
}

impl<X: Value> Rectangle<X> {
    pub fn new(sides: Vec<Side<X>>) -> Self {
        Rectangle { sides }
    }

    pub fn contains(&self, v: &[X]) -> bool {
        v.len() == self.sides.len() && self.sides.iter().zip(v).all(|(side, x)| side(x))
    }
}

impl<X: Value + PartialEq> Rectangle<X> {
    /// The single sequence `values`.
    pub fn point(values: &[X]) -> Self {
        Rectangle::new(
            values
                .iter()
                .map(|x| {
                    let x = x.clone();
                    Arc::new(move |y: &X| *y == x) as Arc<dyn Fn(&X) -> bool + Send + Sync>
                })
                .collect(),
        )
    }
}

/// Whether every event has the same probability under `s` and under each
/// permutation of `s`. Finite measures are compared exactly, others by
/// quadrature when it applies and by Monte Carlo (tolerance widened by three
/// standard errors) when it does not. An invalid permutation answers false.
pub fn is_exchangeable<X: Value>(s: &SeqMeasure<X>, perms: &[Vec<usize>], events: &[Rectangle<X>], tol: f64) -> bool {
    perms.iter().all(|perm| {
        let Ok(moved) = permute(s, perm) else {
            return false;
        };
        events.iter().all(|event| match event_gap(s, &moved, event) {
            Ok((gap, slack)) => gap <= tol + slack,
            Err(_) => false,
        })
    })
}

fn event_gap<X: Value>(a: &SeqMeasure<X>, b: &SeqMeasure<X>, event: &Rectangle<X>) -> Result<(f64, f64), MeasureError> {
    if a.inner.is_finite() {
        let pa = a.probability(event, Method::Exact)?;
        let pb = b.probability(event, Method::Exact)?;
        return Ok(((pa - pb).abs(), 0.0));
    }
    let quad = Method::Quadrature(EXCHANGE_QUADRATURE_NODES);
    match (a.probability(event, quad), b.probability(event, quad)) {
        (Ok(pa), Ok(pb)) => Ok(((pa - pb).abs(), 0.0)),
        (Err(MeasureError::MethodMismatch(_)), _) | (_, Err(MeasureError::MethodMismatch(_))) => {
            let ind = |v: &Vec<X>| if event.contains(v) { 1.0 } else { 0.0 };
            let ea = a.inner.mc_estimate(ind, EXCHANGE_MC_SAMPLES, 0)?;
            let eb = b.inner.mc_estimate(ind, EXCHANGE_MC_SAMPLES, 0)?;
            let se = (ea.std_error.powi(2) + eb.std_error.powi(2)).sqrt();
            Ok(((ea.value - eb.value).abs(), 3.0 * se))
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// `bind(prior, m ↦ iid_n(m, n))`.
pub fn mix_iid<X: Value>(prior: &Measure<Measure<X>>, n: usize) -> Result<SeqMeasure<X>, BaseError> {
    if n == 0 {
        return Err(domain("iid sequence of length zero"));
    }
    let inner = prior.bind(move |m| iid_n(m, n).expect("n >= 1").into_measure());
    Ok(SeqMeasure::new(n, inner))
}

/// Pólya urn started with `a` ones and `b` zeros, run for `n` draws, as an
/// exact finite measure on bit sequences.
pub fn polya_urn(a: f64, b: f64, n: usize) -> Result<SeqMeasure<u8>, BaseError> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(domain(format!("urn parameters must be positive, got ({a}, {b})")));
    }
    if n == 0 {
        return Err(domain("urn sequence of length zero"));
    }
    let atoms = all_sequences(n)
        .into_iter()
        .map(|seq| {
            let ones = seq.iter().filter(|&&x| x == 1).count();
            let zeros = n - ones;
            let num: f64 = (0..ones).map(|i| a + i as f64).product::<f64>()
                * (0..zeros).map(|j| b + j as f64).product::<f64>();
            let den: f64 = (0..n).map(|t| a + b + t as f64).product();
            (seq, num / den)
        })
        .collect();
    Ok(SeqMeasure::new(n, Measure::atoms(atoms)?))
}

/// Coin whose bias is drawn from `Beta(a, b)`, as a measure on coin measures.
pub fn beta_bernoulli_mixture(a: f64, b: f64) -> Result<Measure<Measure<u8>>, BaseError> {
    let base = BaseMeasure::beta(a, b).map_err(|_| domain(format!("beta parameters must be positive, got ({a}, {b})")))?;
    Ok(Measure::from_base(base, |p| Measure::bernoulli(p).expect("beta quantiles lie in [0, 1]")))
}

/// All `2^n` bit sequences in lexicographic order.
pub fn all_sequences(n: usize) -> Vec<Vec<u8>> {
    (0..1u64 << n).map(|code| (0..n).map(|i| ((code >> (n - 1 - i)) & 1) as u8).collect()).collect()
}

/// All `n!` permutations of `0..n`.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                extend(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Singleton rectangles for every bit sequence of length `n`.
pub fn all_bit_events(n: usize) -> Vec<Rectangle<u8>> {
    all_sequences(n).iter().map(|s| Rectangle::point(s)).collect()
}
