use std::fs;
use std::path::Path;

use qbs::ppl::{self, denote, parse, Algorithm, Ast, Value};
use qbs::{BaseMeasure, RandomSource};

const DATA: [(f64, f64); 5] = [(1.0, 2.5), (2.0, 3.8), (3.0, 4.5), (4.0, 6.2), (5.0, 8.0)];

fn log_normal_density(x: f64, mean: f64, sd: f64) -> f64 {
    -0.5 * ((x - mean) / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// A source whose first two sample sites draw exactly `s` and `b` through
/// the `Normal(0, 3)` quantile (up to 53-bit truncation of the level).
fn forcing_source(s: f64, b: f64) -> RandomSource {
    let prior = BaseMeasure::normal(0.0, 3.0).unwrap();
    let first = RandomSource::exact_unit(prior.cdf(s)).unwrap();
    let second = RandomSource::exact_unit(prior.cdf(b)).unwrap();
    // site k reads the left child of the k-th right child
    let rest = RandomSource::interleave(&second, &RandomSource::exact_bits(Vec::new())).unwrap();
    RandomSource::interleave(&first, &rest).unwrap()
}

fn fig1_at(s: f64, b: f64) -> (f64, f64, f64) {
    let model = denote(&parse(ppl::LINEAR_REGRESSION).unwrap());
    let t = model.at(forcing_source(s, b)).unwrap();
    let Value::Closure(_) = &t.output.predicts["f"] else { panic!("f is a function") };
    let cols = t.output.predicts["f"].flatten("f");
    let get = |name: &str| cols.iter().find(|c| c.0 == name).unwrap().1.unwrap();
    (get("f.s"), get("f.b"), t.log_weight)
}

#[test]
fn forced_latents_give_closed_form_weight() {
    let (s, b, lw) = fig1_at(1.3, 1.2);
    assert!((s - 1.3).abs() < 1e-12, "s = {s}");
    assert!((b - 1.2).abs() < 1e-12, "b = {b}");
    let expected: f64 = DATA.iter().map(|&(x, y)| log_normal_density(y, 1.3 * x + 1.2, 0.5)).sum();
    assert!((lw - expected).abs() < 1e-12, "{lw} vs {expected}");
}

#[test]
fn weight_is_sum_of_single_observes() {
    let (s, b, lw) = fig1_at(0.7, -0.4);
    let singles: f64 = DATA
        .iter()
        .map(|&(x, y)| {
            let text = format!("(defquery one (observe (normal (+ (* {s:?} {x:?}) {b:?}) 0.5) {y:?}))");
            denote(&parse(&text).unwrap()).at(RandomSource::new(0)).unwrap().log_weight
        })
        .sum();
    assert!((lw - singles).abs() < 1e-12);
}

#[test]
fn closure_applications_draw_nothing() {
    let model = denote(&parse(ppl::LINEAR_REGRESSION).unwrap());
    let prior_only = denote(
        &parse("(defquery p (let [s (sample (normal 0.0 3.0)) b (sample (normal 0.0 3.0))] (fn [x] (+ (* s x) b))))").unwrap(),
    );
    for seed in 0..20 {
        let full = model.at(RandomSource::new(seed)).unwrap();
        let prior = prior_only.at(RandomSource::new(seed)).unwrap();
        assert_eq!(full.sites.len(), 2);
        assert_eq!(full.sites, prior.sites);
    }
}

#[test]
fn denotation_is_deterministic() {
    for path in corpus("ok") {
        let q = parse(&fs::read_to_string(&path).unwrap()).unwrap();
        let m = denote(&q);
        for seed in [0, 1, 99] {
            let a = m.at(RandomSource::new(seed)).unwrap();
            let b = m.at(RandomSource::new(seed)).unwrap();
            assert_eq!(a.log_weight.to_bits(), b.log_weight.to_bits());
            assert_eq!(a.sites, b.sites);
            let cols = |t: &qbs::inference::Trace<ppl::Outcome>| -> Vec<(String, Option<u64>)> {
                t.output.predicts.iter().flat_map(|(l, v)| v.flatten(l)).map(|(k, v)| (k, v.map(f64::to_bits))).collect()
            };
            assert_eq!(cols(&a), cols(&b), "{}", path.display());
        }
    }
}

#[test]
fn lmh_replay_reproduces_weights() {
    let q = parse(ppl::LINEAR_REGRESSION).unwrap();
    let m = denote(&q);
    let t = m.at(RandomSource::new(4)).unwrap();
    let again = qbs::inference::replay(&m, &t, RandomSource::new(77)).unwrap();
    assert_eq!(again.log_weight.to_bits(), t.log_weight.to_bits());
    assert_eq!(again.sites, t.sites);
}

fn corpus(kind: &str) -> Vec<std::path::PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(kind);
    let mut v: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn corpus_round_trips_and_runs() {
    for path in corpus("ok") {
        let q = parse(&fs::read_to_string(&path).unwrap()).unwrap();
        let printed = q.to_string();
        let again = parse(&printed).unwrap_or_else(|e| panic!("{}: {e}\n{printed}", path.display()));
        assert_eq!(again, q);
        assert_eq!(again.to_string(), printed);
        let r = ppl::run(&q, Algorithm::Lw { samples: 200 }, 3).unwrap();
        assert_eq!(r.samples.len(), 200);
        let r = ppl::run(&q, Algorithm::Lmh { steps: 200, burnin: 50 }, 3).unwrap();
        assert_eq!(r.samples.len(), 150);
    }
}

#[test]
fn broken_corpus_reports_lines() {
    let files = corpus("broken");
    assert!(files.len() >= 5);
    for path in files {
        let text = fs::read_to_string(&path).unwrap();
        let want: usize = text.lines().next().unwrap().trim_start_matches("; error-line:").trim().parse().unwrap();
        let e = parse(&text).unwrap_err();
        assert_eq!(e.line(), want, "{}: {e}", path.display());
    }
}

#[test]
fn coin_posterior_mean() {
    // Beta(1,1) prior, three ones and one zero: posterior Beta(4, 2), mean 2/3
    let q = parse(&fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/ok/coin.qppl")).unwrap()).unwrap();
    let r = ppl::run(&q, Algorithm::Lw { samples: 50_000 }, 21).unwrap();
    let (xs, lws): (Vec<f64>, Vec<f64>) = r.column("p").into_iter().unzip();
    let s = qbs::inference::weighted_summary(&xs, &lws);
    assert!((s.mean - 2.0 / 3.0).abs() < 3.0 * s.std_error(), "{} ± {}", s.mean, s.std_error());
}

#[test]
fn figure_counts() {
    let q = parse(ppl::LINEAR_REGRESSION).unwrap();
    let counts = q.body.form_counts();
    assert_eq!((counts["observe"], counts["predict"]), (5, 1));
    assert!(q.body.free_vars().is_empty());
    assert!(matches!(q.body, Ast::Let { .. }));
}
