//! Exact arithmetic over cyclic groups `Z_q` and prime fields `GF(p)`,
//! plus the combinatorial helpers (binomials, subset enumeration) used
//! throughout the crate.
//!
//! Only prime fields are supported. Extension fields are never needed at
//! the scales this crate targets: alphabet sizes are small and can always
//! be chosen prime where field structure matters.

use crate::error::{Error, Result};

/// Binomial coefficient `C(a, b)` with the usual conventions:
/// returns 0 when `b < 0`, `a < 0`, or `a < b`.
pub fn binom(a: i64, b: i64) -> u128 {
    if b < 0 || a < 0 || a < b {
        return 0;
    }
    let b = b.min(a - b) as u128;
    let a = a as u128;
    let mut r: u128 = 1;
    for i in 1..=b {
        // Exact at every step: r * (a-b+i) is divisible by i because the
        // intermediate value is itself a binomial coefficient.
        r = r * (a - b + i) / i;
    }
    r
}

/// Trial-division primality test; q is small everywhere we call this.
pub fn field_is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    if q.is_multiple_of(2) {
        return q == 2;
    }
    let mut f = 3u64;
    while f * f <= q {
        if q.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}

/// The cyclic group `Z_q` with elements `0..q-1` and identity 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CyclicGroup {
    q: u32,
}

impl CyclicGroup {
    pub fn new(q: u32) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParams(format!(
                "cyclic group needs modulus >= 2, got {q}"
            )));
        }
        Ok(Self { q })
    }

    pub fn modulus(&self) -> u32 {
        self.q
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.q as u64) as u32
    }

    pub fn neg(&self, a: u32) -> u32 {
        (self.q - a % self.q) % self.q
    }
}

/// The prime field `GF(p)` with elements `0..p-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    p: u32,
}

impl PrimeField {
    pub fn new(p: u32) -> Result<Self> {
        if !field_is_prime(p as u64) {
            return Err(Error::InvalidParams(format!(
                "{p} is not prime; only prime fields are supported"
            )));
        }
        Ok(Self { p })
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.p as u64) as u32
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    pub fn neg(&self, a: u32) -> u32 {
        (self.p - a % self.p) % self.p
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    pub fn pow(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1u32;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u32) -> Option<u32> {
        if a.is_multiple_of(self.p) {
            return None;
        }
        // Fermat: a^(p-2) for prime p.
        Some(self.pow(a, self.p as u64 - 2))
    }
}

/// Horner evaluation of `sum_i coeffs[i] * point^i` in `GF(p)`.
pub fn poly_eval(coeffs: &[u32], point: u32, field: &PrimeField) -> u32 {
    let mut acc = 0u32;
    for &c in coeffs.iter().rev() {
        acc = field.add(field.mul(acc, point), c);
    }
    acc
}

/// Iterator over the size-`k` subsets of `{0, .., n-1}` in lexicographic
/// order, each yielded as a strictly increasing vector.
#[derive(Debug, Clone)]
pub struct SubsetIter {
    n: usize,
    k: usize,
    state: Option<Vec<usize>>,
}

impl SubsetIter {
    pub fn new(n: usize, k: usize) -> Self {
        let state = if k <= n {
            Some((0..k).collect())
        } else {
            None
        };
        Self { n, k, state }
    }
}

impl Iterator for SubsetIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.state.clone()?;
        // Advance: find the rightmost index that can still move up.
        let mut next = cur.clone();
        let mut i = self.k;
        loop {
            if i == 0 {
                self.state = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - (self.k - i) {
                next[i] += 1;
                for j in i + 1..self.k {
                    next[j] = next[j - 1] + 1;
                }
                self.state = Some(next);
                break;
            }
        }
        Some(cur)
    }
}

/// All size-`k` subsets of `{0, .., n-1}`, lexicographic.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    SubsetIter::new(n, k).collect()
}
