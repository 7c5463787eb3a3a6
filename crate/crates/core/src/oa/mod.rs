//! Orthogonal arrays, per-subset collections, and the search problem they
//! induce: `f(x) = 1` iff some size-`k` window of the input lies in its
//! array.
//!
//! Symbols are integers `0..q-1`. The single value `q` is reserved as a
//! dummy symbol for pattern arrays; it is never part of the input
//! alphabet, so a tuple containing it can never match an input window.

pub mod format;

use std::collections::BTreeMap;
use std::fmt;

use crate::algebra::{binom, subsets, CyclicGroup, PrimeField, SubsetIter};
use crate::error::{Error, Result};

/// A set of distinct k-tuples over `0..=q` (the value `q` being the dummy
/// symbol), stored in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalArray {
    q: u32,
    k: usize,
    rows: Vec<Vec<u16>>,
}

impl OrthogonalArray {
    pub fn new(q: u32, k: usize, mut rows: Vec<Vec<u16>>) -> Result<Self> {
        if q < 2 || q > u16::MAX as u32 {
            return Err(Error::InvalidParams(format!("alphabet size {q} unsupported")));
        }
        if k == 0 {
            return Err(Error::InvalidParams("factor count k must be >= 1".into()));
        }
        for row in &rows {
            if row.len() != k {
                return Err(Error::InvalidParams(format!(
                    "row length {} != k = {k}",
                    row.len()
                )));
            }
            for &s in row {
                if s as u32 > q {
                    return Err(Error::SymbolOutOfRange { symbol: s as u32, q });
                }
            }
        }
        rows.sort();
        let before = rows.len();
        rows.dedup();
        if rows.len() != before {
            return Err(Error::InvalidParams("duplicate rows in array".into()));
        }
        if rows.is_empty() {
            return Err(Error::InvalidParams("array has no rows".into()));
        }
        Ok(Self { q, k, rows })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Rows in lexicographic order; a row's position here is its canonical
    /// rank, used as the row index of the block operators.
    pub fn rows(&self) -> &[Vec<u16>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dummy_symbol(&self) -> u16 {
        self.q as u16
    }

    pub fn has_dummy(&self) -> bool {
        let d = self.dummy_symbol();
        self.rows.iter().any(|r| r.contains(&d))
    }

    pub fn contains(&self, t: &[u16]) -> bool {
        self.rows.binary_search_by(|r| r.as_slice().cmp(t)).is_ok()
    }

    /// Flat index of a row in `[q]^k`, most significant coordinate first.
    /// Only defined for dummy-free rows.
    pub fn row_flat_index(&self, row: &[u16]) -> Result<usize> {
        let mut idx = 0usize;
        for &s in row {
            if s as u32 >= self.q {
                return Err(Error::SymbolOutOfRange { symbol: s as u32, q: self.q });
            }
            idx = idx * self.q as usize + s as usize;
        }
        Ok(idx)
    }
}

/// Outcome of a strength check: the verified `(d, lambda)` or the first
/// violating `(D, y)` pattern in scan order.
#[derive(Debug, Clone, PartialEq)]
pub enum StrengthOutcome {
    Certificate(StrengthCertificate),
    Violation(StrengthWitness),
}

impl StrengthOutcome {
    pub fn certificate(&self) -> Option<&StrengthCertificate> {
        match self {
            StrengthOutcome::Certificate(c) => Some(c),
            StrengthOutcome::Violation(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrengthCertificate {
    pub d: usize,
    pub lambda: usize,
    /// `Some(b)` once linearity has been checked, `None` otherwise.
    pub linear: Option<bool>,
}

/// A `(D, y)` pattern whose match count differs from the expected index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrengthWitness {
    pub positions: Vec<usize>,
    pub pattern: Vec<u16>,
    pub count: usize,
    pub expected: usize,
}

impl fmt::Display for StrengthWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "positions {:?} pattern {:?}: {} rows match, expected {}",
            self.positions, self.pattern, self.count, self.expected
        )
    }
}

/// Brute-force strength check: for every size-`d` position set `D` and
/// every `y` in `[q]^d`, count the rows matching `y` on `D`. All counts
/// must equal `|rows| / q^d`.
///
/// Scan order is `D` lexicographic, then `y` lexicographic; the first
/// violation is returned.
pub fn verify_strength(array: &OrthogonalArray, d: usize) -> Result<StrengthOutcome> {
    if d >= array.k() {
        return Err(Error::InvalidParams(format!(
            "strength d = {d} must be < k = {}",
            array.k()
        )));
    }
    let q = array.q() as usize;
    let qd = q.checked_pow(d as u32).ok_or_else(|| {
        Error::InvalidParams("q^d overflows".into())
    })?;
    if !array.len().is_multiple_of(qd) {
        return Err(Error::InvalidParams(format!(
            "|rows| = {} is not a multiple of q^d = {qd}: no integer index exists",
            array.len()
        )));
    }
    let lambda = array.len() / qd;
    for positions in SubsetIter::new(array.k(), d) {
        let mut counts = vec![0usize; qd];
        'rows: for row in array.rows() {
            let mut idx = 0usize;
            for &p in &positions {
                let s = row[p] as usize;
                if s >= q {
                    // Dummy projections match no real pattern.
                    continue 'rows;
                }
                idx = idx * q + s;
            }
            counts[idx] += 1;
        }
        for (flat, &count) in counts.iter().enumerate() {
            if count != lambda {
                let mut pattern = vec![0u16; d];
                let mut rest = flat;
                for j in (0..d).rev() {
                    pattern[j] = (rest % q) as u16;
                    rest /= q;
                }
                return Ok(StrengthOutcome::Violation(StrengthWitness {
                    positions,
                    pattern,
                    count,
                    expected: lambda,
                }));
            }
        }
    }
    Ok(StrengthOutcome::Certificate(StrengthCertificate {
        d,
        lambda,
        linear: None,
    }))
}

/// True iff the rows form a linear subspace of `GF(p)^k`: closed under
/// pairwise addition and under scaling by every field element.
pub fn verify_linear(array: &OrthogonalArray, field: &PrimeField) -> Result<bool> {
    if array.q() != field.characteristic() {
        return Err(Error::InvalidParams(format!(
            "field characteristic {} != alphabet size {}",
            field.characteristic(),
            array.q()
        )));
    }
    if array.has_dummy() {
        return Err(Error::InvalidParams(
            "linearity is undefined for arrays with dummy symbols".into(),
        ));
    }
    let mut scratch = vec![0u16; array.k()];
    for r1 in array.rows() {
        for r2 in array.rows() {
            for (j, s) in scratch.iter_mut().enumerate() {
                *s = field.add(r1[j] as u32, r2[j] as u32) as u16;
            }
            if !array.contains(&scratch) {
                return Ok(false);
            }
        }
        for c in 0..field.characteristic() {
            for (j, s) in scratch.iter_mut().enumerate() {
                *s = field.mul(c, r1[j] as u32) as u16;
            }
            if !array.contains(&scratch) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// One strength-`d`, index-1 array per size-`k` subset of `{0..n-1}`.
#[derive(Debug, Clone)]
pub struct OACollection {
    n: usize,
    q: u32,
    k: usize,
    d: usize,
    arrays: BTreeMap<Vec<usize>, OrthogonalArray>,
}

impl OACollection {
    /// Validates: every size-`k` subset carries exactly one array, all
    /// arrays share `(q, k)`, every array verifies at strength `d` with
    /// index 1, and pattern tuples are all-real or all-dummy.
    pub fn new(
        n: usize,
        q: u32,
        k: usize,
        d: usize,
        arrays: BTreeMap<Vec<usize>, OrthogonalArray>,
    ) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParams(format!("need 1 <= k <= n, got k={k} n={n}")));
        }
        if d >= k {
            return Err(Error::InvalidParams(format!("need d < k, got d={d} k={k}")));
        }
        let expected: Vec<Vec<usize>> = subsets(n, k);
        if arrays.len() != expected.len() {
            return Err(Error::InvalidParams(format!(
                "collection has {} arrays, expected {}",
                arrays.len(),
                expected.len()
            )));
        }
        for s in &expected {
            let arr = arrays.get(s).ok_or_else(|| {
                Error::InvalidParams(format!("missing array for subset {s:?}"))
            })?;
            if arr.q() != q || arr.k() != k {
                return Err(Error::InvalidParams(format!(
                    "array for {s:?} has (q, k) = ({}, {}), expected ({q}, {k})",
                    arr.q(),
                    arr.k()
                )));
            }
            if s.iter().any(|&e| e >= n) {
                return Err(Error::InvalidParams(format!("subset {s:?} out of range")));
            }
            for row in arr.rows() {
                let dummies = row.iter().filter(|&&x| x == arr.dummy_symbol()).count();
                if dummies != 0 && dummies != k {
                    return Err(Error::InvalidParams(format!(
                        "row {row:?} mixes dummy and real symbols"
                    )));
                }
            }
            match verify_strength(arr, d)? {
                StrengthOutcome::Certificate(c) if c.lambda == 1 => {}
                StrengthOutcome::Certificate(c) => {
                    return Err(Error::InvalidParams(format!(
                        "array for {s:?} has index {} != 1",
                        c.lambda
                    )));
                }
                StrengthOutcome::Violation(w) => {
                    return Err(Error::InvalidParams(format!(
                        "array for {s:?} fails strength {d}: {w}"
                    )));
                }
            }
        }
        Ok(Self { n, q, k, d, arrays })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn arrays(&self) -> &BTreeMap<Vec<usize>, OrthogonalArray> {
        &self.arrays
    }

    pub fn array(&self, s: &[usize]) -> Option<&OrthogonalArray> {
        self.arrays.get(s)
    }
}

/// Outcome of the pairwise overlap check of a collection.
#[derive(Debug, Clone, PartialEq)]
pub enum ConsistencyOutcome {
    Consistent,
    Witness(ConsistencyWitness),
}

impl ConsistencyOutcome {
    pub fn is_consistent(&self) -> bool {
        matches!(self, ConsistencyOutcome::Consistent)
    }
}

/// Two arrays whose unique rows matching `pattern` on `positions` disagree
/// somewhere on the intersection of their subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyWitness {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub positions: Vec<usize>,
    pub pattern: Vec<u16>,
    pub row1: Vec<u16>,
    pub row2: Vec<u16>,
}

impl fmt::Display for ConsistencyWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "arrays on {:?} and {:?} disagree: rows {:?} and {:?} both match {:?} on {:?}",
            self.s1, self.s2, self.row1, self.row2, self.pattern, self.positions
        )
    }
}

/// Checks every pair `S1 < S2` with `|S1 ∩ S2| >= d`: for each size-`d`
/// position set `D` inside the intersection and each `y` in `[q]^d`, the
/// unique rows matching `y` on `D` must agree on the whole intersection.
///
/// Scan order: pairs lexicographic, then `D` lexicographic, then `y`
/// lexicographic; the first violation is returned.
pub fn check_consistency(collection: &OACollection) -> ConsistencyOutcome {
    let d = collection.d();
    let q = collection.q() as usize;
    let keys: Vec<&Vec<usize>> = collection.arrays().keys().collect();
    for (a, s1) in keys.iter().enumerate() {
        for s2 in keys.iter().skip(a + 1) {
            let inter: Vec<usize> = s1.iter().copied().filter(|e| s2.contains(e)).collect();
            if inter.len() < d {
                continue;
            }
            let arr1 = &collection.arrays()[*s1];
            let arr2 = &collection.arrays()[*s2];
            for dsel in SubsetIter::new(inter.len(), d) {
                let positions: Vec<usize> = dsel.iter().map(|&i| inter[i]).collect();
                let loc1: Vec<usize> = positions
                    .iter()
                    .map(|p| s1.iter().position(|e| e == p).unwrap())
                    .collect();
                let loc2: Vec<usize> = positions
                    .iter()
                    .map(|p| s2.iter().position(|e| e == p).unwrap())
                    .collect();
                let qd = q.pow(d as u32);
                // Index-1 strength-d arrays project bijectively onto any
                // d positions, so each map below is total on [q]^d.
                let project = |arr: &OrthogonalArray, loc: &[usize]| -> Vec<Option<usize>> {
                    let mut map = vec![None; qd];
                    'rows: for (ri, row) in arr.rows().iter().enumerate() {
                        let mut idx = 0usize;
                        for &l in loc {
                            let s = row[l] as usize;
                            if s >= q {
                                continue 'rows;
                            }
                            idx = idx * q + s;
                        }
                        map[idx] = Some(ri);
                    }
                    map
                };
                let map1 = project(arr1, &loc1);
                let map2 = project(arr2, &loc2);
                for flat in 0..qd {
                    let (Some(r1), Some(r2)) = (map1[flat], map2[flat]) else {
                        continue;
                    };
                    let row1 = &arr1.rows()[r1];
                    let row2 = &arr2.rows()[r2];
                    let agree = inter.iter().all(|e| {
                        let l1 = s1.iter().position(|x| x == e).unwrap();
                        let l2 = s2.iter().position(|x| x == e).unwrap();
                        row1[l1] == row2[l2]
                    });
                    if !agree {
                        let mut pattern = vec![0u16; d];
                        let mut rest = flat;
                        for j in (0..d).rev() {
                            pattern[j] = (rest % q) as u16;
                            rest /= q;
                        }
                        return ConsistencyOutcome::Witness(ConsistencyWitness {
                            s1: (*s1).clone(),
                            s2: (*s2).clone(),
                            positions,
                            pattern,
                            row1: row1.clone(),
                            row2: row2.clone(),
                        });
                    }
                }
            }
        }
    }
    ConsistencyOutcome::Consistent
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// k-sum arrays over `Z_q`: every subset carries
/// `T = { x in [q]^k : sum_i x_i = t }`, a strength-`(k-1)` index-1 array.
pub fn gen_ksum(group: &CyclicGroup, k: usize, t: u32, n: usize) -> Result<OACollection> {
    if k == 0 || n < k {
        return Err(Error::InvalidParams(format!("need n >= k >= 1, got n={n} k={k}")));
    }
    let q = group.modulus();
    let t = t % q;
    let count = (q as usize).pow(k as u32 - 1);
    let mut rows = Vec::with_capacity(count);
    for flat in 0..count {
        let mut row = vec![0u16; k];
        let mut rest = flat;
        for j in (0..k - 1).rev() {
            row[j] = (rest % q as usize) as u16;
            rest /= q as usize;
        }
        let sum = row[..k - 1]
            .iter()
            .fold(0u32, |acc, &s| group.add(acc, s as u32));
        row[k - 1] = group.add(t, group.neg(sum)) as u16;
        rows.push(row);
    }
    let array = OrthogonalArray::new(q, k, rows)?;
    let arrays = subsets(n, k)
        .into_iter()
        .map(|s| (s, array.clone()))
        .collect();
    OACollection::new(n, q, k, k - 1, arrays)
}

/// k-distinctness arrays: every subset carries the constant tuples
/// `{ (x, .., x) : x in [q] }`, a strength-1 index-1 array.
pub fn gen_kdist(q: u32, k: usize, n: usize) -> Result<OACollection> {
    if k < 2 || n < k {
        return Err(Error::InvalidParams(format!("need n >= k >= 2, got n={n} k={k}")));
    }
    let rows: Vec<Vec<u16>> = (0..q).map(|x| vec![x as u16; k]).collect();
    let array = OrthogonalArray::new(q, k, rows)?;
    let arrays = subsets(n, k)
        .into_iter()
        .map(|s| (s, array.clone()))
        .collect();
    OACollection::new(n, q, k, 1, arrays)
}

fn ddegree_collection(
    field: &PrimeField,
    deg: usize,
    k: usize,
    n: usize,
    rank_indexed: bool,
) -> Result<OACollection> {
    let p = field.characteristic();
    if (p as usize) < n {
        return Err(Error::InvalidParams(format!(
            "need p >= n for distinct evaluation points, got p={p} n={n}"
        )));
    }
    if n < k || k < deg + 2 {
        return Err(Error::InvalidParams(format!(
            "need n >= k >= deg+2, got n={n} k={k} deg={deg}"
        )));
    }
    let mut arrays = BTreeMap::new();
    for s in subsets(n, k) {
        let points: Vec<u32> = if rank_indexed {
            (0..k as u32).collect()
        } else {
            s.iter().map(|&e| e as u32 % p).collect()
        };
        let count = (p as usize).pow(deg as u32 + 1);
        let mut rows = Vec::with_capacity(count);
        let mut coeffs = vec![0u32; deg + 1];
        for _ in 0..count {
            let row: Vec<u16> = points
                .iter()
                .map(|&pt| crate::algebra::poly_eval(&coeffs, pt, field) as u16)
                .collect();
            rows.push(row);
            for c in coeffs.iter_mut() {
                *c += 1;
                if *c < p {
                    break;
                }
                *c = 0;
            }
        }
        arrays.insert(s, OrthogonalArray::new(p, k, rows)?);
    }
    OACollection::new(n, p, k, deg + 1, arrays)
}

/// Degree-`<= deg` polynomial evaluations at the subset's own elements
/// (as field points), a linear strength-`(deg+1)` index-1 array per subset.
/// Requires `p >= n` so the points are distinct.
pub fn gen_ddegree(field: &PrimeField, deg: usize, k: usize, n: usize) -> Result<OACollection> {
    ddegree_collection(field, deg, k, n, false)
}

/// The inconsistent variant: polynomials are evaluated at the *ranks*
/// `0..k-1` of the sorted subset instead of at its elements. Each array is
/// still a valid strength-`(deg+1)` index-1 array, but overlapping subsets
/// place intersection elements at different ranks, so the collection fails
/// the overlap check once `k >= deg + 3`.
pub fn gen_ddegree_rank_indexed(
    field: &PrimeField,
    deg: usize,
    k: usize,
    n: usize,
) -> Result<OACollection> {
    ddegree_collection(field, deg, k, n, true)
}

/// Single-pattern arrays `T_S = { y^S }`, strength 0, index 1. Pattern
/// tuples must be all-real or all-dummy.
pub fn gen_pattern(
    n: usize,
    k: usize,
    q: u32,
    patterns: &BTreeMap<Vec<usize>, Vec<u16>>,
) -> Result<OACollection> {
    let mut arrays = BTreeMap::new();
    for s in subsets(n, k) {
        let pat = patterns.get(&s).ok_or_else(|| {
            Error::InvalidParams(format!("missing pattern for subset {s:?}"))
        })?;
        arrays.insert(s, OrthogonalArray::new(q, k, vec![pat.clone()])?);
    }
    OACollection::new(n, q, k, 0, arrays)
}

/// Consistent patterns induced by a single global string: `y^S = y|_S`.
pub fn gen_pattern_from_global(n: usize, k: usize, q: u32, y: &[u16]) -> Result<OACollection> {
    if y.len() != n {
        return Err(Error::InvalidParams(format!(
            "global pattern has length {}, expected {n}",
            y.len()
        )));
    }
    let patterns = subsets(n, k)
        .into_iter()
        .map(|s| {
            let pat = s.iter().map(|&e| y[e]).collect();
            (s, pat)
        })
        .collect();
    gen_pattern(n, k, q, &patterns)
}

// ---------------------------------------------------------------------------
// The problem function
// ---------------------------------------------------------------------------

/// Valid-column counts: inputs `y` with `f(y) = 0` out of `q^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Census {
    pub valid: u128,
    pub total: u128,
    pub fraction: f64,
}

/// The decision problem induced by a collection.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    collection: OACollection,
}

impl ProblemInstance {
    pub fn new(collection: OACollection) -> Self {
        Self { collection }
    }

    pub fn collection(&self) -> &OACollection {
        &self.collection
    }

    pub fn n(&self) -> usize {
        self.collection.n()
    }

    pub fn q(&self) -> u32 {
        self.collection.q()
    }

    pub fn k(&self) -> usize {
        self.collection.k()
    }

    pub fn d(&self) -> usize {
        self.collection.d()
    }

    /// Evaluates `f(x)` and returns every witness subset `S` with
    /// `x_S ∈ T_S`. Inputs must use real symbols only.
    pub fn evaluate(&self, x: &[u16]) -> Result<(bool, Vec<Vec<usize>>)> {
        let n = self.n();
        let q = self.q();
        if x.len() != n {
            return Err(Error::InvalidParams(format!(
                "input length {} != n = {n}",
                x.len()
            )));
        }
        for &s in x {
            if s as u32 >= q {
                return Err(Error::SymbolOutOfRange { symbol: s as u32, q });
            }
        }
        let mut witnesses = Vec::new();
        let mut window = vec![0u16; self.k()];
        for (s, arr) in self.collection.arrays() {
            for (j, &e) in s.iter().enumerate() {
                window[j] = x[e];
            }
            if arr.contains(&window) {
                witnesses.push(s.clone());
            }
        }
        Ok((!witnesses.is_empty(), witnesses))
    }

    /// Per-input validity over all of `[q]^n`: entry `i` is true iff the
    /// input with flat index `i` (most significant coordinate first) has
    /// `f = 0`.
    pub fn validity_mask(&self, cap: u128) -> Result<Vec<bool>> {
        let n = self.n();
        let q = self.q() as usize;
        let total = (q as u128).checked_pow(n as u32).ok_or(Error::CapExceeded {
            what: "input enumeration",
            value: u128::MAX,
            cap,
        })?;
        if total > cap {
            return Err(Error::CapExceeded {
                what: "input enumeration",
                value: total,
                cap,
            });
        }
        let blocks: Vec<(&Vec<usize>, &OrthogonalArray)> = self.collection.arrays().iter().collect();
        let mut mask = vec![true; total as usize];
        let mut digits = vec![0u16; n];
        let mut window = vec![0u16; self.k()];
        for m in mask.iter_mut() {
            'blocks: for (s, arr) in &blocks {
                for (j, &e) in s.iter().enumerate() {
                    window[j] = digits[e];
                }
                if arr.contains(&window) {
                    *m = false;
                    break 'blocks;
                }
            }
            // Odometer, least significant coordinate last.
            for j in (0..n).rev() {
                digits[j] += 1;
                if (digits[j] as usize) < q {
                    break;
                }
                digits[j] = 0;
            }
        }
        Ok(mask)
    }

    /// Counts valid columns by full enumeration.
    pub fn valid_column_census(&self, cap: u128) -> Result<Census> {
        let mask = self.validity_mask(cap)?;
        let valid = mask.iter().filter(|&&v| v).count() as u128;
        let total = mask.len() as u128;
        Ok(Census {
            valid,
            total,
            fraction: valid as f64 / total as f64,
        })
    }

    /// The union-bound floor `1 - C(n,k) q^{d-k}` on the valid fraction.
    pub fn valid_fraction_floor(&self) -> f64 {
        let c = binom(self.n() as i64, self.k() as i64) as f64;
        let q = self.q() as f64;
        1.0 - c * q.powi(self.d() as i32 - self.k() as i32)
    }
}

#[cfg(test)]
mod tests;
