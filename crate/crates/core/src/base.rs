//! Probability measures on the real line.
//!
//! A [`BaseMeasure`] is the law of the sample-space coordinate underneath every
//! [`Measure`](crate::Measure). The catalog is closed: uniform on `[0, 1]`,
//! normal, point mass, finitely many atoms, and beta.

use std::f64::consts::PI;
use std::fmt;

use crate::error::BaseError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Finitely many atoms, sorted by location, with strictly positive weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Atoms {
    locations: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Atoms {
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, BaseError> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms.is_empty() {
            return Err(BaseError::InvalidParameter("finite atoms: empty atom list".into()));
        }
        for &(loc, w) in &atoms {
            if !loc.is_finite() {
                return Err(BaseError::InvalidParameter(format!("finite atoms: location {loc}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(BaseError::InvalidParameter(format!("finite atoms: weight {w}")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        if atoms.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(BaseError::InvalidParameter("finite atoms: duplicate location".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(BaseError::InvalidParameter(format!(
                "finite atoms: weights sum to {total}, expected 1"
            )));
        }
        let (locations, weights): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        // Pin the last partial sum so the cdf reaches exactly one.
        *cumulative.last_mut().expect("nonempty") = 1.0;
        Ok(Atoms { locations, weights, cumulative })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locations.iter().copied().zip(self.weights.iter().copied())
    }

    /// Mass at exactly `x`, zero when `x` is not an atom.
    pub fn mass_at(&self, x: f64) -> f64 {
        match self.locations.binary_search_by(|l| l.total_cmp(&x)) {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        let below = self.locations.partition_point(|&l| l <= x);
        if below == 0 {
            0.0
        } else {
            self.cumulative[below - 1]
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        let i = self.cumulative.partition_point(|&c| c < u);
        self.locations[i.min(self.locations.len() - 1)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaseMeasure {
    Uniform01,
    Normal { mean: f64, sd: f64 },
    PointMass(f64),
    FiniteAtoms(Atoms),
    Beta { a: f64, b: f64 },
}

impl BaseMeasure {
    pub fn normal(mean: f64, sd: f64) -> Result<Self, BaseError> {
        if !mean.is_finite() || !(sd > 0.0) || !sd.is_finite() {
            return Err(BaseError::InvalidParameter(format!("normal({mean}, {sd})")));
        }
        Ok(BaseMeasure::Normal { mean, sd })
    }

    pub fn beta(a: f64, b: f64) -> Result<Self, BaseError> {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(BaseError::InvalidParameter(format!("beta({a}, {b})")));
        }
        Ok(BaseMeasure::Beta { a, b })
    }

    pub fn point(location: f64) -> Result<Self, BaseError> {
        if !location.is_finite() {
            return Err(BaseError::InvalidParameter(format!("point mass at {location}")));
        }
        Ok(BaseMeasure::PointMass(location))
    }

    pub fn atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, BaseError> {
        Atoms::new(atoms).map(BaseMeasure::FiniteAtoms)
    }

    /// Atoms at 0 and 1; degenerates to a point mass when `p` is 0 or 1.
    pub fn bernoulli(p: f64) -> Result<Self, BaseError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(BaseError::InvalidParameter(format!("bernoulli({p})")));
        }
        if p == 0.0 {
            Ok(BaseMeasure::PointMass(0.0))
        } else if p == 1.0 {
            Ok(BaseMeasure::PointMass(1.0))
        } else {
            Self::atoms([(0.0, 1.0 - p), (1.0, p)])
        }
    }

    /// Re-checks the parameter invariants, for values built from the public variants.
    pub fn validate(&self) -> Result<(), BaseError> {
        match *self {
            BaseMeasure::Uniform01 | BaseMeasure::FiniteAtoms(_) => Ok(()),
            BaseMeasure::Normal { mean, sd } => Self::normal(mean, sd).map(drop),
            BaseMeasure::Beta { a, b } => Self::beta(a, b).map(drop),
            BaseMeasure::PointMass(x) => Self::point(x).map(drop),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, BaseMeasure::PointMass(_) | BaseMeasure::FiniteAtoms(_))
    }

    /// The atoms of an atomic measure as `(location, weight)` pairs.
    pub fn atom_list(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            BaseMeasure::PointMass(x) => Some(vec![(*x, 1.0)]),
            BaseMeasure::FiniteAtoms(atoms) => Some(atoms.iter().collect()),
            _ => None,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            BaseMeasure::Uniform01 => x.clamp(0.0, 1.0),
            BaseMeasure::Normal { mean, sd } => normal_cdf((x - mean) / sd),
            BaseMeasure::PointMass(loc) => {
                if x >= *loc {
                    1.0
                } else {
                    0.0
                }
            }
            BaseMeasure::FiniteAtoms(atoms) => atoms.cdf(x),
            BaseMeasure::Beta { a, b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    regularized_incomplete_beta(*a, *b, x)
                }
            }
        }
    }

    /// Generalized inverse of the cdf on the open unit interval.
    pub fn quantile(&self, u: f64) -> Result<f64, BaseError> {
        if !(u > 0.0 && u < 1.0) {
            return Err(BaseError::Domain(format!("quantile level {u} outside (0, 1)")));
        }
        Ok(match self {
            BaseMeasure::Uniform01 => u,
            BaseMeasure::Normal { mean, sd } => mean + sd * standard_normal_quantile(u),
            BaseMeasure::PointMass(loc) => *loc,
            BaseMeasure::FiniteAtoms(atoms) => atoms.quantile(u),
            BaseMeasure::Beta { a, b } => beta_quantile(*a, *b, u),
        })
    }

    pub fn log_density(&self, x: f64) -> Result<f64, BaseError> {
        match *self {
            BaseMeasure::Uniform01 => Ok(if (0.0..=1.0).contains(&x) { 0.0 } else { f64::NEG_INFINITY }),
            BaseMeasure::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                Ok(-LN_SQRT_2PI - sd.ln() - 0.5 * z * z)
            }
            BaseMeasure::Beta { a, b } => Ok(beta_log_density(a, b, x)),
            BaseMeasure::PointMass(_) | BaseMeasure::FiniteAtoms(_) => {
                Err(BaseError::UnsupportedDensity(self.to_string()))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            BaseMeasure::Uniform01 => 0.5,
            BaseMeasure::Normal { mean, .. } => *mean,
            BaseMeasure::PointMass(x) => *x,
            BaseMeasure::FiniteAtoms(atoms) => atoms.iter().map(|(l, w)| l * w).sum(),
            BaseMeasure::Beta { a, b } => a / (a + b),
        }
    }
}

impl fmt::Display for BaseMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseMeasure::Uniform01 => write!(f, "uniform(0, 1)"),
            BaseMeasure::Normal { mean, sd } => write!(f, "normal({mean}, {sd})"),
            BaseMeasure::PointMass(x) => write!(f, "point({x})"),
            BaseMeasure::FiniteAtoms(atoms) => write!(f, "atoms[{}]", atoms.len()),
            BaseMeasure::Beta { a, b } => write!(f, "beta({a}, {b})"),
        }
    }
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// Acklam's rational approximation followed by one Newton step against the
/// erfc-based cdf.
pub(crate) fn standard_normal_quantile(u: f64) -> f64 {
    if u > 0.5 {
        // 1 - u is exact here, and the lower tail keeps full relative precision.
        return -standard_normal_quantile(1.0 - u);
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if u < P_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let pdf = normal_pdf(x);
    if pdf > 0.0 {
        x - (normal_cdf(x) - u) / pdf
    } else {
        x
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

fn beta_log_density(a: f64, b: f64, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    let term = |p: f64, y: f64| {
        if p == 1.0 {
            0.0
        } else if y == 0.0 {
            if p < 1.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        } else {
            (p - 1.0) * y.ln()
        }
    };
    term(a, x) + term(b, 1.0 - x) - ln_beta(a, b)
}

/// Regularized incomplete beta `I_x(a, b)` by the modified Lentz continued fraction.
pub(crate) fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Bisection on the regularized incomplete beta. Stops on a relative bracket
/// width of 1e-15, well inside the 1e-9 target.
fn beta_quantile(a: f64, b: f64, u: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if regularized_incomplete_beta(a, b, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            deriv = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / deriv;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * deriv * deriv)));
    }
    out
}

/// Nodes and weights for `∫₀¹ g(u) du`, mapped through `u = t²(3 − 2t)` so
/// quantile maps with square-root behaviour at the endpoints stay smooth.
pub(crate) fn unit_interval_rule(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| {
            let t = 0.5 * (x + 1.0);
            let u = t * t * (3.0 - 2.0 * t);
            (u, 0.5 * w * 6.0 * t * (1.0 - t))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_point_cdf() {
        assert_eq!(BaseMeasure::Uniform01.cdf(0.25), 0.25);
        let p = BaseMeasure::point(2.0).unwrap();
        assert_eq!(p.cdf(1.9), 0.0);
        assert_eq!(p.cdf(2.0), 1.0);
        assert_eq!(p.quantile(0.3).unwrap(), 2.0);
    }

    #[test]
    fn quantile_domain() {
        for u in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(BaseMeasure::Uniform01.quantile(u), Err(BaseError::Domain(_))));
        }
        assert_eq!(BaseMeasure::Uniform01.quantile(0.5).unwrap(), 0.5);
        assert_eq!(BaseMeasure::normal(0.0, 3.0).unwrap().quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn atoms_validation() {
        assert!(BaseMeasure::atoms([(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(BaseMeasure::atoms([(0.0, 0.5), (0.0, 0.5)]).is_err());
        assert!(BaseMeasure::atoms([(0.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(BaseMeasure::normal(0.0, 0.0).is_err());
        assert!(BaseMeasure::beta(0.0, 1.0).is_err());
        let d = BaseMeasure::atoms([(3.0, 0.25), (-1.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(d.cdf(-2.0), 0.0);
        assert_eq!(d.cdf(-1.0), 0.5);
        assert_eq!(d.cdf(2.5), 0.75);
        assert_eq!(d.cdf(3.0), 1.0);
        assert_eq!(d.quantile(0.5).unwrap(), -1.0);
        assert_eq!(d.quantile(0.5000001).unwrap(), 2.0);
        assert_eq!(d.quantile(0.99).unwrap(), 3.0);
    }

    #[test]
    fn densities() {
        let d = BaseMeasure::normal(2.5, 0.5).unwrap();
        let expected = (2.0 / PI).sqrt().ln();
        assert!((d.log_density(2.5).unwrap() - expected).abs() < 1e-12);
        assert!((d.log_density(2.5).unwrap() + 0.2258).abs() < 1e-4);
        // the half-sd closed form away from the mode
        let x = 3.1;
        assert!((d.log_density(x).unwrap() - (expected - 2.0 * (x - 2.5f64).powi(2))).abs() < 1e-12);
        assert_eq!(BaseMeasure::Uniform01.log_density(0.3).unwrap(), 0.0);
        assert_eq!(BaseMeasure::Uniform01.log_density(1.5).unwrap(), f64::NEG_INFINITY);
        let std = BaseMeasure::normal(0.0, 1.0).unwrap();
        assert!((std.log_density(0.0).unwrap() + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        assert!(matches!(
            BaseMeasure::PointMass(1.0).log_density(1.0),
            Err(BaseError::UnsupportedDensity(_))
        ));
        let flat = BaseMeasure::beta(1.0, 1.0).unwrap();
        assert!(flat.log_density(0.0).unwrap().abs() < 1e-15);
        assert_eq!(BaseMeasure::beta(0.5, 0.5).unwrap().log_density(0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let rule = gauss_legendre(8);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-14);
        let x14: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((x14 - 2.0 / 15.0).abs() < 1e-14);
        let unit: f64 = unit_interval_rule(64).iter().map(|(u, w)| w * u * u).sum();
        assert!((unit - 1.0 / 3.0).abs() < 1e-14);
    }
}
