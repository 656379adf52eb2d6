//! Browser bindings for three demos: regression lines from the prior or
//! posterior, the randomization pushforward, and de Finetti's mixture
//! against the Pólya urn. Every export returns a flat `Float64Array`.

use qbs::definetti::{all_sequences, beta_bernoulli_mixture, mix_iid, polya_urn, Rectangle};
use qbs::inference::systematic_resample;
use qbs::ppl::{self, Algorithm};
use qbs::randomization::randomize;
use qbs::{BaseMeasure, Method, RandomSource};
use wasm_bindgen::prelude::*;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `n` lines `(s, b)` interleaved as `[s0, b0, s1, b1, …]`. Posterior lines
/// are resampled from `pool` likelihood-weighted prior draws.
#[wasm_bindgen]
pub fn regression_lines(n: usize, posterior: bool, pool: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let query = ppl::parse(ppl::LINEAR_REGRESSION).map_err(fail)?;
    let samples = if posterior { pool.max(n) } else { n };
    let run = ppl::run(&query, Algorithm::Lw { samples }, seed).map_err(fail)?;
    let s = run.column("f.s");
    let b = run.column("f.b");
    let picks: Vec<usize> = if posterior {
        let lws: Vec<f64> = s.iter().map(|c| c.1).collect();
        systematic_resample(&lws, n, &RandomSource::for_index(seed, u64::MAX)).map_err(fail)?
    } else {
        (0..n).collect()
    };
    Ok(picks.into_iter().flat_map(|i| [s[i].0, b[i].0]).collect())
}

/// Histogram of `n` pushforward draws `f(u, x)` for the kernel
/// `x ↦ Normal(x, sd)`, over `bins` equal cells on `[x − 4sd, x + 4sd]`.
/// Returns `[centre, empirical density, target density]` per bin.
#[wasm_bindgen]
pub fn randomization_histogram(x: f64, sd: f64, n: usize, bins: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let target = BaseMeasure::normal(x, sd).map_err(fail)?;
    if bins == 0 || n == 0 {
        return Err(JsError::new("bins and n must be positive"));
    }
    let f = randomize(move |x: &f64| BaseMeasure::Normal { mean: *x, sd });
    let (lo, width) = (x - 4.0 * sd, 8.0 * sd / bins as f64);
    let mut counts = vec![0usize; bins];
    let mut src = RandomSource::new(seed);
    for _ in 0..n {
        let y = f.eval(src.draw_open(), &x).map_err(fail)?;
        let cell = ((y - lo) / width).floor();
        if cell >= 0.0 && (cell as usize) < bins {
            counts[cell as usize] += 1;
        }
    }
    Ok(counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| {
            let centre = lo + (i as f64 + 0.5) * width;
            let density = c as f64 / (n as f64 * width);
            [centre, density, target.log_density(centre).map_or(0.0, f64::exp)]
        })
        .collect())
}

/// For each of the `2^n` bit sequences in lexicographic order, the
/// probability under the Beta(a, b)-mixed iid coin (by quadrature) and under
/// the Pólya urn: `[mixture, urn]` per sequence.
#[wasm_bindgen]
pub fn de_finetti_table(a: f64, b: f64, n: usize) -> Result<Vec<f64>, JsError> {
    if !(1..=8).contains(&n) {
        return Err(JsError::new("sequence length must be between 1 and 8"));
    }
    let mix = mix_iid(&beta_bernoulli_mixture(a, b).map_err(fail)?, n).map_err(fail)?;
    let urn = polya_urn(a, b, n).map_err(fail)?;
    let mut out = Vec::with_capacity(2 << n);
    for seq in all_sequences(n) {
        let event = Rectangle::point(&seq);
        out.push(mix.probability(&event, Method::Quadrature(64)).map_err(fail)?);
        out.push(urn.probability(&event, Method::Exact).map_err(fail)?);
    }
    Ok(out)
}
