//! Deterministic, splittable randomness.
//!
//! A [`RandomSource`] stands for a point of the sample space. In `Prng` mode
//! every draw is a counter-based hash of `(seed, path, counter)`, so draw `i`
//! of any lineage is addressable without replaying earlier draws. In
//! `ExactDigits` mode the point is a finite binary expansion and `split`
//! de-interleaves its digits, which makes the isomorphism between the sample
//! space and its square checkable bit for bit.

use std::fmt;
use std::sync::Arc;

use crate::error::SourceError;

/// Bits consumed by one draw in exact mode; matches the f64 mantissa.
const DRAW_BITS: usize = 53;
const TWO_POW_53: f64 = 9_007_199_254_740_992.0;

#[derive(Clone, PartialEq, Eq)]
pub enum Mode {
    Prng,
    ExactDigits(Arc<[bool]>),
}

#[derive(Clone, PartialEq, Eq)]
pub struct RandomSource {
    seed: u64,
    path: Vec<u32>,
    counter: u64,
    mode: Mode,
    key: u64,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn root_key(seed: u64) -> u64 {
    mix64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
}

fn child_key(key: u64, child: u32) -> u64 {
    mix64(key ^ mix64((child as u64).wrapping_add(0xd1b5_4a32_d192_ed03)))
}

fn parse_bits(digits: &str) -> Result<Vec<bool>, SourceError> {
    digits
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(SourceError::InvalidDigit(other)),
        })
        .collect()
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource { seed, path: Vec::new(), counter: 0, mode: Mode::Prng, key: root_key(seed) }
    }

    /// Root source for index `index` of a Monte Carlo run seeded with `seed`.
    pub fn for_index(seed: u64, index: u64) -> Self {
        Self::new(mix64(seed ^ mix64(index.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    /// A source whose point has the given binary digits after the radix point.
    pub fn exact(digits: &str) -> Result<Self, SourceError> {
        parse_bits(digits).map(Self::exact_bits)
    }

    pub fn exact_bits(bits: Vec<bool>) -> Self {
        RandomSource {
            seed: 0,
            path: Vec::new(),
            counter: 0,
            mode: Mode::ExactDigits(bits.into()),
            key: root_key(0),
        }
    }

    /// Exact source whose first draw is `u` truncated to 53 binary digits.
    pub fn exact_unit(u: f64) -> Result<Self, SourceError> {
        if !(0.0..1.0).contains(&u) {
            return Err(SourceError::Domain(format!("{u} outside [0, 1)")));
        }
        let scaled = (u * TWO_POW_53) as u64;
        let bits = (0..DRAW_BITS).map(|i| (scaled >> (DRAW_BITS - 1 - i)) & 1 == 1).collect();
        Ok(Self::exact_bits(bits))
    }

    /// Inverse of [`split`](Self::split) on exact sources: interleaves the
    /// digits of `left` and `right`, padding the shorter with zeros.
    pub fn interleave(left: &RandomSource, right: &RandomSource) -> Result<Self, SourceError> {
        let (Mode::ExactDigits(l), Mode::ExactDigits(r)) = (&left.mode, &right.mode) else {
            return Err(SourceError::Domain("interleave needs two exact sources".into()));
        };
        let len = l.len().max(r.len());
        let mut bits = Vec::with_capacity(2 * len);
        for i in 0..len {
            bits.push(l.get(i).copied().unwrap_or(false));
            bits.push(r.get(i).copied().unwrap_or(false));
        }
        Ok(Self::exact_bits(bits))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u32] {
        &self.path
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.mode, Mode::ExactDigits(_))
    }

    /// Digits not yet consumed, for exact sources.
    pub fn remaining_digits(&self) -> Option<String> {
        match &self.mode {
            Mode::Prng => None,
            Mode::ExactDigits(bits) => {
                Some(bits.iter().map(|&b| if b { '1' } else { '0' }).collect())
            }
        }
    }

    /// Next value in `[0, 1)` and the advanced source.
    pub fn draw(&self) -> Result<(f64, RandomSource), SourceError> {
        let mut next = self.clone();
        let value = next.next_value()?;
        Ok((value, next))
    }

    fn next_value(&mut self) -> Result<f64, SourceError> {
        let value = match &self.mode {
            Mode::Prng => {
                let bits = mix64(self.key ^ mix64(self.counter.wrapping_add(0x2545_f491_4f6c_dd1d)));
                // Midpoint of the 2^-53 cell, so the value is never exactly zero.
                ((bits >> 11) as f64 + 0.5) / TWO_POW_53
            }
            Mode::ExactDigits(bits) => {
                if bits.is_empty() {
                    return Err(SourceError::ExactDigitsExhausted);
                }
                let take = bits.len().min(DRAW_BITS);
                let value = bits[..take]
                    .iter()
                    .rev()
                    .fold(0.0, |acc, &b| (acc + if b { 1.0 } else { 0.0 }) * 0.5);
                self.mode = Mode::ExactDigits(bits[take..].into());
                value
            }
        };
        self.counter += 1;
        Ok(value)
    }

    /// A draw strictly inside `(0, 1)`, for quantile transforms. Exhausted
    /// exact digits read as trailing zeros; a zero is nudged to `2^-54`.
    pub fn draw_open(&mut self) -> f64 {
        let u = self.next_value().unwrap_or_else(|_| {
            self.counter += 1;
            0.0
        });
        if u > 0.0 {
            u
        } else {
            0.5 / TWO_POW_53
        }
    }

    fn child(&self, index: u32, mode: Mode) -> RandomSource {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        RandomSource { seed: self.seed, path, counter: 0, mode, key: child_key(self.key, index) }
    }

    /// Two independent children with paths extended by 0 and 1.
    pub fn split(&self) -> (RandomSource, RandomSource) {
        match &self.mode {
            Mode::Prng => (self.child(0, Mode::Prng), self.child(1, Mode::Prng)),
            Mode::ExactDigits(bits) => {
                let odd: Vec<bool> = bits.iter().step_by(2).copied().collect();
                let even: Vec<bool> = bits.iter().skip(1).step_by(2).copied().collect();
                (
                    self.child(0, Mode::ExactDigits(odd.into())),
                    self.child(1, Mode::ExactDigits(even.into())),
                )
            }
        }
    }

    /// `n` independent sources by iterated splitting along a left-leaning tree.
    pub fn split_n(&self, n: usize) -> Result<Vec<RandomSource>, SourceError> {
        if n == 0 {
            return Err(SourceError::Domain("cannot split into zero sources".into()));
        }
        let mut out = Vec::with_capacity(n);
        let mut current = self.clone();
        for _ in 1..n {
            let (left, right) = current.split();
            out.push(right);
            current = left;
        }
        out.push(current);
        out.reverse();
        Ok(out)
    }
}

impl fmt::Debug for RandomSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("RandomSource");
        s.field("seed", &self.seed).field("path", &self.path).field("counter", &self.counter);
        if let Some(digits) = self.remaining_digits() {
            s.field("digits", &digits);
        }
        s.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_draws() {
        let s = RandomSource::new(7);
        let (a, s1) = s.draw().unwrap();
        let (b, _) = s.draw().unwrap();
        assert_eq!(a, b);
        assert_eq!(s1.counter(), 1);
        let (c, _) = s1.draw().unwrap();
        assert_ne!(a, c);
        assert!((0.0..1.0).contains(&a));
    }

    #[test]
    fn exact_digits() {
        let s = RandomSource::exact("11").unwrap();
        let (u, rest) = s.draw().unwrap();
        assert_eq!(u, 0.75);
        assert_eq!(rest.draw(), Err(SourceError::ExactDigitsExhausted));
        assert_eq!(RandomSource::exact("10a").unwrap_err(), SourceError::InvalidDigit('a'));
    }

    #[test]
    fn exact_split_deinterleaves() {
        let s = RandomSource::exact("110100").unwrap();
        let (l, r) = s.split();
        // odd-position digits go left, even-position digits go right
        assert_eq!(l.remaining_digits().unwrap(), "100");
        assert_eq!(r.remaining_digits().unwrap(), "110");
        assert_eq!(l.draw().unwrap().0, 0.5);
        assert_eq!(r.draw().unwrap().0, 0.75);
        assert_eq!(l.path(), &[0]);
        assert_eq!(r.path(), &[1]);
        let back = RandomSource::interleave(&l, &r).unwrap();
        assert_eq!(back.remaining_digits().unwrap(), "110100");
    }

    #[test]
    fn split_is_pure_and_paths_distinct() {
        let s = RandomSource::new(3);
        assert_eq!(s.split(), s.split());
        let (l, r) = s.split();
        assert_ne!(l.path(), r.path());
        assert_ne!(l.path(), s.path());
        assert_ne!(l.draw().unwrap().0, r.draw().unwrap().0);
    }

    #[test]
    fn split_n_shapes() {
        let s = RandomSource::new(9);
        assert_eq!(s.split_n(1).unwrap(), vec![s.clone()]);
        let (l, r) = s.split();
        assert_eq!(s.split_n(2).unwrap(), vec![l.clone(), r.clone()]);
        let (ll, lr) = l.split();
        assert_eq!(s.split_n(3).unwrap(), vec![ll, lr, r]);
        assert!(matches!(s.split_n(0), Err(SourceError::Domain(_))));
        let e = RandomSource::exact("110100").unwrap();
        assert_eq!(e.split_n(2).unwrap(), {
            let (a, b) = e.split();
            vec![a, b]
        });
    }

    #[test]
    fn exact_unit_round_trips() {
        let u = 0.123_456_789_012_345_6;
        let s = RandomSource::exact_unit(u).unwrap();
        assert_eq!(s.draw().unwrap().0, (u * TWO_POW_53).floor() / TWO_POW_53);
    }

    #[test]
    fn draw_open_never_zero() {
        let mut s = RandomSource::exact("000").unwrap();
        let u = s.draw_open();
        assert!(u > 0.0 && u < 1e-15);
        // exhausted digits pad with zeros instead of failing
        assert!(s.draw_open() > 0.0);
    }
}
