//! Generated checks of the algebraic laws, run by `qbs laws`.
//!
//! Every suite compares two computations on generated finite measures by
//! integrating a fixed family of test functions, and reports the largest
//! absolute difference seen. Finite cases are enumerated exactly, so the
//! tolerance is a rounding budget, not a statistical one.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::base::BaseMeasure;
use crate::definetti::{
    all_bit_events, all_permutations, all_sequences, beta_bernoulli_mixture, iid_n, mix_iid, permute, polya_urn,
    Rectangle,
};
use crate::inference::{observe, weighted_summary};
use crate::measure::{Kernel, Measure, Method};
use crate::randomization::{kernel_of, randomize};
use crate::source::RandomSource;

pub const EXACT_TOL: f64 = 1e-12;
pub const QUADRATURE_TOL: f64 = 1e-6;
pub const MAX_ATOMS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub max_dev: f64,
    pub tol: f64,
    pub passed: bool,
}

impl SuiteReport {
    fn new(name: &'static str, cases: usize, max_dev: f64, tol: f64) -> Self {
        SuiteReport { name, cases, max_dev, tol, passed: max_dev <= tol }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        if self.cases == 0 {
            write!(f, "{status} {:<16} 0 cases (vacuous)", self.name)
        } else {
            write!(f, "{status} {:<16} cases={:<5} max_dev={:.3e} tol={:.0e}", self.name, self.cases, self.max_dev, self.tol)
        }
    }
}

/// Draws from a counter-based stream; generation is a pure function of the seed.
struct Gen(RandomSource);

impl Gen {
    fn new(seed: u64, case: usize) -> Self {
        Gen(RandomSource::for_index(seed, case as u64))
    }

    fn unit(&mut self) -> f64 {
        self.0.draw_open()
    }

    fn below(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    /// Integer-valued locations keep ties and equality tests meaningful.
    fn location(&mut self) -> f64 {
        self.below(21) as f64 - 10.0
    }

    fn finite(&mut self, max_atoms: usize) -> Measure<f64> {
        let k = 1 + self.below(max_atoms);
        let atoms = (0..k).map(|_| (self.location(), 0.05 + self.unit())).collect();
        Measure::weighted(atoms).expect("positive weights")
    }

    /// A kernel given by a table of finite measures indexed by location.
    fn kernel(&mut self, max_atoms: usize) -> Kernel<f64, f64> {
        let shift = self.location();
        let table: Vec<Measure<f64>> = (0..4).map(|_| self.finite(max_atoms)).collect();
        Arc::new(move |x: &f64| {
            let (x, i) = (*x, (x + shift).rem_euclid(4.0) as usize);
            table[i].map(move |y| y + x * 0.5)
        })
    }
}

type TestFunction = Box<dyn Fn(&f64) -> f64 + Sync>;

fn test_functions() -> Vec<TestFunction> {
    vec![
        Box::new(|_| 1.0),
        Box::new(|x| *x),
        Box::new(|x| x * x),
        Box::new(|x| (0.3 * x).sin()),
        Box::new(|x| if *x > 0.0 { 1.0 } else { 0.0 }),
        Box::new(|x| (-0.1 * x * x).exp()),
    ]
}

fn gap(a: &Measure<f64>, b: &Measure<f64>) -> f64 {
    test_functions()
        .iter()
        .map(|f| {
            let ia = a.integrate(f, Method::Exact).expect("finite");
            let ib = b.integrate(f, Method::Exact).expect("finite");
            (ia - ib).abs()
        })
        .fold(0.0, f64::max)
}

fn max_over(cases: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    (0..cases).into_par_iter().map(f).reduce(|| 0.0, f64::max)
}

/// Left identity, right identity and associativity of bind.
pub fn monad_laws(cases: usize, seed: u64) -> SuiteReport {
    let dev = max_over(cases, |case| {
        let mut g = Gen::new(seed, case);
        let m = g.finite(MAX_ATOMS);
        let k = g.kernel(MAX_ATOMS);
        let h = g.kernel(MAX_ATOMS);
        let x = g.location();

        let left = gap(&Measure::unit(x).bind_arc(k.clone()), &k(&x));
        let right = gap(&m.bind(|x| Measure::unit(*x)), &m);
        let k2 = k.clone();
        let h2 = h.clone();
        let assoc = gap(&m.bind_arc(k).bind_arc(h), &m.bind(move |x| k2(x).bind_arc(h2.clone())));
        left.max(right).max(assoc)
    });
    SuiteReport::new("monad", cases, dev, EXACT_TOL)
}

/// Sequencing two independent finite measures in either order.
pub fn commutativity(cases: usize, seed: u64) -> SuiteReport {
    let dev = max_over(cases, |case| {
        let mut g = Gen::new(seed ^ 0xc0ff_ee00, case);
        let m1 = g.finite(MAX_ATOMS);
        let m2 = g.finite(MAX_ATOMS);
        let k = g.kernel(4);
        let (a2, k1) = (m2.clone(), k.clone());
        let xy = m1.bind(move |&x| {
            let k = k1.clone();
            a2.bind(move |&y| k(&(x - y)))
        });
        let (a1, k2) = (m1.clone(), k.clone());
        let yx = m2.bind(move |&y| {
            let k = k2.clone();
            a1.bind(move |&x| k(&(x - y)))
        });
        gap(&xy, &yx)
    });
    SuiteReport::new("commutativity", cases, dev, EXACT_TOL)
}

/// Posterior means of `x` from the two sequencing orders of
/// `x ~ N(0, 1)`, `y ~ N(1, 2)` with `0.5` observed from `N(x + y, 1)`.
/// Returns `(mean, se)` for each order, each from `n` weighted samples.
pub fn commutativity_continuous(n: u64, seed: u64) -> [(f64, f64); 2] {
    let lik = |x: f64, y: f64| observe(&BaseMeasure::Normal { mean: x + y, sd: 1.0 }, 0.5);
    let nx = Measure::normal(0.0, 1.0).expect("valid");
    let ny = Measure::normal(1.0, 2.0).expect("valid");
    let ny1 = ny.clone();
    let xy = nx.bind(move |&x| ny1.map(move |&y| (x, lik(x, y))));
    let nx1 = nx.clone();
    let yx = ny.bind(move |&y| nx1.map(move |&x| (x, lik(x, y))));
    [(xy, seed), (yx, seed.wrapping_add(1))].map(|(m, s)| {
        let draws: Vec<(f64, f64)> = (0..n).into_par_iter().map(|i| m.sample(&RandomSource::for_index(s, i))).collect();
        let (xs, lws): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
        let summary = weighted_summary(&xs, &lws);
        (summary.mean, summary.std_error())
    })
}

/// Each coordinate of `iid_n(m, n)` has law `m`.
pub fn iid_marginals(cases: usize, seed: u64) -> SuiteReport {
    let dev = max_over(cases, |case| {
        let mut g = Gen::new(seed ^ 0x11d0, case);
        let n = 1 + g.below(6);
        // keep the product table small: atoms^n stays below a few thousand
        let max_atoms = match n {
            1..=3 => MAX_ATOMS,
            4 => 6,
            _ => 3,
        };
        let m = g.finite(max_atoms);
        let s = iid_n(&m, n).expect("n >= 1");
        (0..n).map(|i| gap(&s.marginal(i), &m)).fold(0.0, f64::max)
    });
    SuiteReport::new("iid-marginals", cases, dev, EXACT_TOL)
}

fn exchange_gap(s: &crate::definetti::SeqMeasure<u8>, events: &[Rectangle<u8>]) -> f64 {
    let n = s.len();
    let base: Vec<f64> = events.iter().map(|e| s.probability(e, Method::Exact).expect("finite")).collect();
    all_permutations(n)
        .iter()
        .flat_map(|p| {
            let moved = permute(s, p).expect("valid permutation");
            events
                .iter()
                .zip(&base)
                .map(|(e, pb)| (moved.probability(e, Method::Exact).expect("finite") - pb).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Permutation invariance of iid bit sequences and of Pólya urns, over all
/// permutations and all singleton events.
pub fn exchangeability(cases: usize, seed: u64) -> SuiteReport {
    let dev = max_over(cases, |case| {
        let mut g = Gen::new(seed ^ 0xe8c4, case);
        let n = 1 + g.below(5);
        let events = all_bit_events(n);
        let coin = Measure::bernoulli(0.05 + 0.9 * g.unit()).expect("p in (0, 1)");
        let iid = iid_n(&coin, n).expect("n >= 1");
        let urn = polya_urn(0.2 + 3.0 * g.unit(), 0.2 + 3.0 * g.unit(), n).expect("positive parameters");
        exchange_gap(&iid, &events).max(exchange_gap(&urn, &events))
    });
    SuiteReport::new("exchangeability", cases, dev, EXACT_TOL)
}

/// Randomizing a finite table of atomic kernels and reading the kernel back
/// off the random function recovers every atom's mass.
pub fn randomization_round_trip(cases: usize, seed: u64) -> SuiteReport {
    let dev = max_over(cases, |case| {
        let mut g = Gen::new(seed ^ 0x7a4d, case);
        let domain = 1 + g.below(4);
        let table: Vec<BaseMeasure> = (0..domain)
            .map(|_| {
                let k = 1 + g.below(MAX_ATOMS);
                let mut locs: Vec<f64> = (0..k).map(|_| g.location()).collect();
                locs.sort_by(f64::total_cmp);
                locs.dedup();
                let atoms: Vec<(f64, f64)> = locs.into_iter().map(|l| (l, 0.05 + g.unit())).collect();
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                BaseMeasure::atoms(atoms.into_iter().map(|(l, w)| (l, w / total))).expect("valid atoms")
            })
            .collect();
        let table2 = table.clone();
        let points: Vec<usize> = (0..domain).collect();
        let rf = randomize(move |x: &usize| table2[*x].clone()).lift_finite(&points).expect("atomic kernels");
        let k = kernel_of(&rf);
        let mut worst = 0.0f64;
        for x in points {
            let back = k(&x);
            for (loc, _) in table[x].atom_list().expect("atomic") {
                let p = back.probability(|y| *y == loc, Method::Exact).expect("finite");
                let want = observe(&table[x], loc).exp();
                worst = worst.max((p - want).abs());
            }
        }
        worst
    });
    SuiteReport::new("randomization", cases, dev, EXACT_TOL)
}

/// Beta parameter pairs of the de Finetti check.
pub const BETA_PAIRS: [(f64, f64); 3] = [(1.0, 1.0), (2.0, 1.0), (0.5, 0.5)];

/// `mix_iid` of a Beta-mixed coin integrated by quadrature against the Pólya
/// urn, over every bit sequence of length at most `max_len`.
pub fn de_finetti(max_len: usize, pairs: &[(f64, f64)]) -> SuiteReport {
    let mut cases = 0;
    let mut dev = 0.0f64;
    for &(a, b) in pairs {
        let prior = beta_bernoulli_mixture(a, b).expect("positive parameters");
        for n in 1..=max_len {
            let mix = mix_iid(&prior, n).expect("n >= 1");
            let urn = polya_urn(a, b, n).expect("positive parameters");
            for seq in all_sequences(n) {
                let event = Rectangle::point(&seq);
                let pm = mix.probability(&event, Method::Quadrature(64)).expect("quadrature applies");
                let pu = urn.probability(&event, Method::Exact).expect("finite");
                dev = dev.max((pm - pu).abs());
                cases += 1;
            }
        }
    }
    SuiteReport::new("de-finetti", cases, dev, QUADRATURE_TOL)
}

/// Every suite, in a fixed order. `cases` sizes the generated suites; the de
/// Finetti suite always covers lengths up to 5, or nothing when `cases` is 0.
pub fn run_all(cases: usize, seed: u64) -> Vec<SuiteReport> {
    let finetti_len = if cases == 0 { 0 } else { 5 };
    vec![
        monad_laws(cases, seed),
        commutativity(cases, seed),
        iid_marginals(cases, seed),
        exchangeability(cases, seed),
        randomization_round_trip(cases, seed),
        de_finetti(finetti_len, &BETA_PAIRS),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        for report in run_all(10, 3) {
            assert!(report.passed, "{report}");
            assert!(report.cases > 0);
        }
    }

    #[test]
    fn zero_cases_is_vacuous() {
        for report in run_all(0, 0) {
            assert!(report.passed);
            assert_eq!(report.cases, 0);
            assert!(report.to_string().contains("0 cases"));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(monad_laws(5, 9), monad_laws(5, 9));
    }

    #[test]
    fn continuous_orders_agree() {
        let [(m1, s1), (m2, s2)] = commutativity_continuous(20_000, 4);
        assert!((m1 - m2).abs() < 3.0 * (s1 * s1 + s2 * s2).sqrt());
    }
}
