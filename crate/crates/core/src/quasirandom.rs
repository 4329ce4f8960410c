//! Plain (unscrambled) Halton sequences in the open unit hypercube.

use crate::error::{Error, Result};

const EXACT_LIMIT: u128 = 1 << 53;

/// Mirror the base-`base` digits of `t` across the radix point.
///
/// The digit-reversed numerator and the power-of-base denominator are kept as
/// integers, so the result is the correctly rounded quotient whenever the
/// denominator fits in 53 bits.
pub fn radical_inverse(t: u64, base: u32) -> f64 {
    assert!(base >= 2, "radical inverse base must be >= 2");
    let b = base as u128;
    let mut i = t as u128;
    let mut num: u128 = 0;
    let mut den: u128 = 1;
    while i > 0 {
        if den * b > EXACT_LIMIT {
            return approximate_tail(num, den, i, base);
        }
        num = num * b + i % b;
        den *= b;
        i /= b;
    }
    num as f64 / den as f64
}

// Digits beyond 2^53 in the denominator are below double resolution relative
// to the leading ones; fold them in with floating arithmetic.
fn approximate_tail(num: u128, den: u128, mut i: u128, base: u32) -> f64 {
    let b = base as u128;
    let mut h = num as f64 / den as f64;
    let mut ib = 1.0 / den as f64 / base as f64;
    while i > 0 {
        h += (i % b) as f64 * ib;
        ib /= base as f64;
        i /= b;
    }
    h.min(1.0 - f64::EPSILON / 2.0)
}

/// The first `n` primes in increasing order.
pub fn first_primes(n: usize) -> Vec<u32> {
    let mut primes: Vec<u32> = Vec::with_capacity(n);
    let mut candidate = 2u32;
    while primes.len() < n {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// An ordered list of Halton points; point `j` (0-based) is the radical
/// inverse of `j + 1` in each of the first `dim` prime bases.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiSequence {
    dim: usize,
    bases: Vec<u32>,
    coords: Vec<f64>,
}

impl QuasiSequence {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn bases(&self) -> &[u32] {
        &self.bases
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Short provenance name recorded in code files.
    pub fn name(&self) -> &'static str {
        "halton"
    }
}

pub fn halton(m: usize, n: usize) -> Result<QuasiSequence> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "halton sequence needs m >= 1 and n >= 1, got m={m}, n={n}"
        )));
    }
    let bases = first_primes(n);
    let mut coords = Vec::with_capacity(m * n);
    for t in 1..=m as u64 {
        coords.extend(bases.iter().map(|&b| radical_inverse(t, b)));
    }
    Ok(QuasiSequence {
        dim: n,
        bases,
        coords,
    })
}
