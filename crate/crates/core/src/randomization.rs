//! Kernels into the reals as deterministic functions of a uniform variable,
//! and the map from random functions back to kernels.

use std::sync::Arc;

use crate::base::BaseMeasure;
use crate::error::BaseError;
use crate::measure::{Measure, Value};

/// A random function `X → ℝ`: a measure whose values are closures.
pub type RandomFunction<X> = Measure<Arc<dyn Fn(&X) -> f64 + Send + Sync>>;

/// `f(u, x) = quantile(k(x), u)`, so pushing the uniform measure through
/// `f(·, x)` gives back `k(x)`.
pub struct Randomized<X> {
    kernel: Arc<dyn Fn(&X) -> BaseMeasure + Send + Sync>,
}

impl<X> Clone for Randomized<X> {
    fn clone(&self) -> Self {
        Randomized { kernel: self.kernel.clone() }
    }
}

pub fn randomize<X>(kernel: impl Fn(&X) -> BaseMeasure + Send + Sync + 'static) -> Randomized<X> {
    Randomized { kernel: Arc::new(kernel) }
}

impl<X: Value> Randomized<X> {
    pub fn eval(&self, u: f64, x: &X) -> Result<f64, BaseError> {
        (self.kernel)(x).quantile(u)
    }

    pub fn kernel_at(&self, x: &X) -> BaseMeasure {
        (self.kernel)(x)
    }

    /// The random function `u ↦ f(u, ·)` under the uniform base measure.
    pub fn lift(&self) -> RandomFunction<X> {
        let this = self.clone();
        Measure::from_base(BaseMeasure::Uniform01, move |u| {
            let this = this.clone();
            // quantile levels from the base are interior; the clamp guards
            // sample-space points supplied by hand
            let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            Arc::new(move |x: &X| this.eval(u, x).expect("level clamped into (0, 1)")) as Arc<dyn Fn(&X) -> f64 + Send + Sync>
        })
    }

    /// Exact lift over a finite domain of atomic kernels. The level `u` only
    /// matters through which cell of the union of all cumulative weights it
    /// falls in, so the random function is a finite measure over those cells.
    /// Off the domain the closures still evaluate, but only the domain points
    /// carry the exact law.
    pub fn lift_finite(&self, domain: &[X]) -> Result<RandomFunction<X>, BaseError> {
        let mut breaks = vec![0.0, 1.0];
        for x in domain {
            let k = self.kernel_at(x);
            let atoms = k
                .atom_list()
                .ok_or_else(|| BaseError::InvalidParameter(format!("{k} is not atomic")))?;
            breaks.extend(atoms[..atoms.len() - 1].iter().map(|(loc, _)| k.cdf(*loc)));
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let cells: Vec<(f64, f64)> = breaks
            .windows(2)
            .filter(|c| c[1] > c[0])
            .map(|c| (0.5 * (c[0] + c[1]), c[1] - c[0]))
            .collect();
        let atoms = cells
            .into_iter()
            .map(|(mid, width)| {
                let this = self.clone();
                let g = Arc::new(move |x: &X| this.eval(mid, x).expect("cell midpoints are interior"))
                    as Arc<dyn Fn(&X) -> f64 + Send + Sync>;
                (g, width)
            })
            .collect();
        Measure::weighted(atoms)
    }
}

/// The kernel `x ↦ [λr. α(r)(x), μ]` of a random function.
pub fn kernel_of<X: Value>(rf: &RandomFunction<X>) -> impl Fn(&X) -> Measure<f64> + Send + Sync + 'static {
    let rf = rf.clone();
    move |x: &X| {
        let x = x.clone();
        rf.map(move |g| g(&x))
    }
}
