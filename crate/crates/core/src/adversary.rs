//! Block-structured adversary operators for orthogonal-array problems.
//!
//! The stacked operator has one block per size-`k` subset `S`. A block is
//! the tensor product of a small dense `q^d x q^k` kernel acting on the
//! `S` coordinates (a scaled row-restriction of the weight-at-most-`d`
//! projector to the rows of `T_S`) with a weight-graded combination
//! `sum_m alpha_m E_m` acting on the remaining `n-k` coordinates.
//!
//! All variants used by the certificate share one matrix-free core: the
//! complement factor is diagonal in the coordinate eigenbasis, so a block
//! application is gather, small dense multiply, per-coordinate transform,
//! diagonal scale, transform back.
//!
//! Row layout: blocks in lexicographic subset order; within a block, row
//! `t * q^(n-k) + z` is the pair (array row of rank `t`, complement
//! assignment `z`). Columns are flat indices over `[q]^n`, most
//! significant coordinate first. Blocks whose array contains dummy tuples
//! match no real input and are skipped entirely.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::oa::{OrthogonalArray, ProblemInstance};
use crate::scheme::{weight_table, CoordBasis};
use crate::Caps;

/// The weight-graded coefficients `alpha_0 .. alpha_{n-k}`:
/// `alpha_m = max(2 - m / n^e, 0) * n^(e - k/2)` with `e = (d+1)/(d+2)`.
///
/// Values beyond `m = n-k` follow the same closed form; they only enter
/// difference expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSchedule {
    n: usize,
    k: usize,
    d: usize,
    scale: f64,
    values: Vec<f64>,
}

impl CoefficientSchedule {
    pub fn new(n: usize, k: usize, d: usize) -> Result<Self> {
        if k == 0 || k > n || d >= k {
            return Err(Error::InvalidParams(format!(
                "schedule needs 0 <= d < k <= n, got n={n} k={k} d={d}"
            )));
        }
        let mut s = Self { n, k, d, scale: 1.0, values: Vec::new() };
        s.values = (0..=n - k).map(|m| s.alpha(m)).collect();
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The kink location `n^((d+1)/(d+2))` of the profile.
    pub fn radius(&self) -> f64 {
        (self.n as f64).powf((self.d as f64 + 1.0) / (self.d as f64 + 2.0))
    }

    /// Closed-form `alpha_m`, defined for every `m >= 0`.
    pub fn alpha(&self, m: usize) -> f64 {
        let e = (self.d as f64 + 1.0) / (self.d as f64 + 2.0);
        let n = self.n as f64;
        let profile = (2.0 - m as f64 / n.powf(e)).max(0.0);
        self.scale * profile * n.powf(e - self.k as f64 / 2.0)
    }

    /// Stored values for `m = 0 ..= n-k`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The same schedule multiplied by a constant; the certificate ratio
    /// is invariant under this.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.scale *= factor;
        s.values = (0..=s.n - s.k).map(|m| s.alpha(m)).collect();
        s
    }
}

// ---------------------------------------------------------------------------
// Small dense kernels on the S coordinates
// ---------------------------------------------------------------------------

/// Coefficients of `z^0..z^max_deg` in `prod_j (E0[x_j,y_j] + E1[x_j,y_j] z)`,
/// the per-entry weight expansion on the listed coordinates.
fn weight_poly(
    row: &[u16],
    col_digits: &[usize],
    skip: Option<usize>,
    q: f64,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|c| *c = 0.0);
    out[0] = 1.0;
    let max_deg = out.len() - 1;
    for (j, (&xj, &yj)) in row.iter().zip(col_digits).enumerate() {
        if Some(j) == skip {
            continue;
        }
        let a = 1.0 / q;
        let b = if xj as usize == yj { 1.0 - 1.0 / q } else { -1.0 / q };
        // Multiply by (a + b z), truncating above max_deg.
        for deg in (0..=max_deg).rev() {
            let c = out[deg];
            if deg < max_deg {
                out[deg + 1] += c * b;
            }
            out[deg] = c * a;
        }
    }
}

fn check_index_one(array: &OrthogonalArray, d: usize) -> Result<usize> {
    let qd = (array.q() as usize).pow(d as u32);
    if array.len() != qd {
        return Err(Error::InvalidParams(format!(
            "array has {} rows; index-1 strength-{d} arrays need exactly q^d = {qd}",
            array.len()
        )));
    }
    Ok(qd)
}

/// The `q^d x q^k` kernel: `q^((k-d)/2)` times the rows of the
/// weight-at-most-`d` projector on `[q]^k` indexed by the array rows, in
/// lexicographic row order.
pub fn build_f(array: &OrthogonalArray, d: usize, cap: usize) -> Result<Array2<f64>> {
    let q = array.q() as usize;
    let k = array.k();
    let qk = q.pow(k as u32);
    if qk > cap {
        return Err(Error::CapExceeded {
            what: "dense kernel columns",
            value: qk as u128,
            cap: cap as u128,
        });
    }
    let qd = check_index_one(array, d)?;
    if array.has_dummy() {
        return Err(Error::InvalidParams(
            "dense kernels are undefined for arrays with dummy tuples".into(),
        ));
    }
    let scale = (q as f64).powf((k - d) as f64 / 2.0);
    let mut out = Array2::zeros((qd, qk));
    let mut poly = vec![0.0; d + 1];
    let mut col_digits = vec![0usize; k];
    for (t, row) in array.rows().iter().enumerate() {
        for y in 0..qk {
            let mut rest = y;
            for j in (0..k).rev() {
                col_digits[j] = rest % q;
                rest /= q;
            }
            weight_poly(row, &col_digits, None, q as f64, &mut poly);
            out[(t, y)] = scale * poly.iter().sum::<f64>();
        }
    }
    Ok(out)
}

/// The coordinate-mapped kernel: `q^((k-d)/2)` times the array rows of the
/// operator that is `E_0` at `local_pos` tensored with the exact-weight-`d`
/// projector on the other `k-1` factors. Agrees with [`build_f`] on every
/// entry whose row and column differ at `local_pos`.
pub fn build_f_mapped(
    array: &OrthogonalArray,
    d: usize,
    local_pos: usize,
    cap: usize,
) -> Result<Array2<f64>> {
    let q = array.q() as usize;
    let k = array.k();
    if local_pos >= k {
        return Err(Error::InvalidParams(format!(
            "mapped position {local_pos} out of range for k = {k}"
        )));
    }
    let qk = q.pow(k as u32);
    if qk > cap {
        return Err(Error::CapExceeded {
            what: "dense kernel columns",
            value: qk as u128,
            cap: cap as u128,
        });
    }
    let qd = check_index_one(array, d)?;
    if array.has_dummy() {
        return Err(Error::InvalidParams(
            "dense kernels are undefined for arrays with dummy tuples".into(),
        ));
    }
    let scale = (q as f64).powf((k - d) as f64 / 2.0);
    let mut out = Array2::zeros((qd, qk));
    let mut poly = vec![0.0; d + 1];
    let mut col_digits = vec![0usize; k];
    for (t, row) in array.rows().iter().enumerate() {
        for y in 0..qk {
            let mut rest = y;
            for j in (0..k).rev() {
                col_digits[j] = rest % q;
                rest /= q;
            }
            weight_poly(row, &col_digits, Some(local_pos), q as f64, &mut poly);
            out[(t, y)] = scale * poly[d] / q as f64;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The stacked operator
// ---------------------------------------------------------------------------

/// Operator variant to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// The full stacked operator over all columns.
    Plain,
    /// The coordinate-`i` rewrite that agrees with the plain operator on
    /// entries whose labels differ at `i` (coordinates are 0-based).
    MappedAt(usize),
    /// The plain operator with invalid columns (inputs with `f = 1`)
    /// zeroed out.
    Masked,
}

/// Entry-wise mask that keeps exactly the entries whose row and column
/// labels differ at one coordinate (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeltaMask {
    pub coordinate: usize,
}

impl DeltaMask {
    pub fn new(coordinate: usize) -> Self {
        Self { coordinate }
    }

    pub fn entry(&self, row_digit: u16, col_digit: u16) -> f64 {
        if row_digit == col_digit {
            0.0
        } else {
            1.0
        }
    }
}

/// How the complement factor scales weight-`w` components; all variants
/// are diagonal in the coordinate eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq)]
enum CompMult {
    /// `alpha_w`
    Alpha,
    /// Mapped at complement position `pos`:
    /// `[w_pos = 0] * (alpha_w - alpha_{w+1})`
    MappedDiff { pos: usize },
    /// Entry-wise delta at complement position `pos`:
    /// `(1 - 1/q)(alpha_w - alpha_{w+1})` on `w_pos = 0`,
    /// `(1/q)(alpha_w - alpha_{w-1})` otherwise.
    DeltaDiag { pos: usize },
}

#[derive(Debug, Clone)]
struct Block {
    subset: Vec<usize>,
    comp: Vec<usize>,
    /// Variant-resolved kernel, `q^d x q^k`.
    f: Array2<f64>,
    /// Global flat offset of each `y_S` in `[q]^k`.
    off_s: Vec<usize>,
    /// Global flat offset of each `y_C` in `[q]^(n-k)`.
    off_c: Vec<usize>,
    rows: Vec<Vec<u16>>,
    mult: CompMult,
    /// Index into the operator's precomputed diagonal tables.
    table: usize,
    /// Length of the contiguous global runs in `off_c` (a power of q,
    /// from the trailing coordinates the complement owns).
    run_len: usize,
}

/// The stacked block operator with optional column mask, supporting
/// matrix-free application in both directions.
#[derive(Debug, Clone)]
pub struct AdversaryOperator {
    n: usize,
    q: u32,
    k: usize,
    variant: Variant,
    delta: Option<usize>,
    schedule: CoefficientSchedule,
    blocks: Vec<Block>,
    /// Validity of each column; `None` means all columns kept.
    column_mask: Option<Vec<bool>>,
    basis: CoordBasis,
    comp_weights: Vec<u8>,
    /// One diagonal (in the coordinate eigenbasis) per distinct complement
    /// factor among the blocks.
    tables: Vec<Vec<f64>>,
    qk: usize,
    qnc: usize,
    qd: usize,
}

/// Builds the requested operator variant for an instance and schedule.
pub fn build_operator(
    instance: &ProblemInstance,
    schedule: &CoefficientSchedule,
    variant: Variant,
    caps: &Caps,
) -> Result<AdversaryOperator> {
    let n = instance.n();
    let q = instance.q();
    let k = instance.k();
    let d = instance.d();
    if schedule.n() != n || schedule.k() != k || schedule.d() != d {
        return Err(Error::InvalidParams(format!(
            "schedule is for (n, k, d) = ({}, {}, {}), instance has ({n}, {k}, {d})",
            schedule.n(),
            schedule.k(),
            schedule.d()
        )));
    }
    let qn = (q as u128).pow(n as u32);
    if qn > caps.qn {
        return Err(Error::CapExceeded { what: "q^n", value: qn, cap: caps.qn });
    }
    if let Variant::MappedAt(i) = variant {
        if i >= n {
            return Err(Error::InvalidParams(format!(
                "mapped coordinate {i} out of range 0..{n}"
            )));
        }
    }
    let qk = (q as usize).pow(k as u32);
    let qnc = (q as usize).pow((n - k) as u32);
    let qd = (q as usize).pow(d as u32);

    let column_mask = match variant {
        Variant::Masked => Some(instance.validity_mask(caps.enumeration)?),
        _ => None,
    };

    let mut blocks = Vec::new();
    for (s, arr) in instance.collection().arrays() {
        if arr.has_dummy() {
            // No real input matches a dummy tuple; the block has no rows.
            continue;
        }
        let comp: Vec<usize> = (0..n).filter(|e| !s.contains(e)).collect();
        let (f, mult) = match variant {
            Variant::Plain | Variant::Masked => {
                (build_f(arr, d, caps.dense_projector)?, CompMult::Alpha)
            }
            Variant::MappedAt(i) => {
                if let Some(local) = s.iter().position(|&e| e == i) {
                    (build_f_mapped(arr, d, local, caps.dense_projector)?, CompMult::Alpha)
                } else {
                    let pos = comp.iter().position(|&e| e == i).unwrap();
                    (build_f(arr, d, caps.dense_projector)?, CompMult::MappedDiff { pos })
                }
            }
        };
        let off_s = flat_offsets(s, n, q);
        let off_c = flat_offsets(&comp, n, q);
        // Trailing coordinates owned by the complement give contiguous
        // global runs, letting gathers degrade to block copies.
        let mut suffix = 0usize;
        while suffix < comp.len() && comp[comp.len() - 1 - suffix] == n - 1 - suffix {
            suffix += 1;
        }
        let run_len = (q as usize).pow(suffix as u32);
        blocks.push(Block {
            subset: s.clone(),
            comp,
            f,
            off_s,
            off_c,
            rows: arr.rows().to_vec(),
            mult,
            table: 0,
            run_len,
        });
    }

    let mut op = AdversaryOperator {
        n,
        q,
        k,
        variant,
        delta: None,
        schedule: schedule.clone(),
        blocks,
        column_mask,
        basis: CoordBasis::helmert(q),
        comp_weights: weight_table(q, n - k),
        tables: Vec::new(),
        qk,
        qnc,
        qd,
    };
    op.rebuild_tables();
    Ok(op)
}

/// Global flat offsets contributed by every assignment to the listed
/// coordinates (most significant list position first).
fn flat_offsets(coords: &[usize], n: usize, q: u32) -> Vec<usize> {
    let q = q as usize;
    let strides: Vec<usize> = coords.iter().map(|&e| q.pow((n - 1 - e) as u32)).collect();
    let count = q.pow(coords.len() as u32);
    let mut out = vec![0usize; count];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut rest = flat;
        let mut acc = 0usize;
        for &st in strides.iter().rev() {
            acc += (rest % q) * st;
            rest /= q;
        }
        *slot = acc;
    }
    out
}

impl AdversaryOperator {
    pub fn rows(&self) -> usize {
        self.blocks.len() * self.qd * self.qnc
    }

    pub fn cols(&self) -> usize {
        self.qk * self.qnc
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn delta_coordinate(&self) -> Option<usize> {
        self.delta
    }

    pub fn is_masked(&self) -> bool {
        self.column_mask.is_some()
    }

    pub fn column_mask(&self) -> Option<&[bool]> {
        self.column_mask.as_deref()
    }

    /// The operator with the entry-wise delta mask at coordinate `i`
    /// folded in. Blocks whose subset contains `i` swap their kernel for
    /// its label-agreement-zeroed version; other blocks fold the mask into
    /// the complement diagonal. Only defined on the plain or masked base.
    pub fn with_delta(&self, i: usize) -> Result<AdversaryOperator> {
        if !matches!(self.variant, Variant::Plain | Variant::Masked) {
            return Err(Error::InvalidParams(
                "delta folding is defined on the plain or masked operator".into(),
            ));
        }
        if self.delta.is_some() {
            return Err(Error::InvalidParams(
                "operator already carries a delta mask".into(),
            ));
        }
        if i >= self.n {
            return Err(Error::InvalidParams(format!(
                "delta coordinate {i} out of range 0..{}",
                self.n
            )));
        }
        let q = self.q as usize;
        let mut out = self.clone();
        out.delta = Some(i);
        for block in &mut out.blocks {
            if let Some(local) = block.subset.iter().position(|&e| e == i) {
                // Zero the kernel entries whose row tuple and column
                // assignment agree at the masked coordinate.
                let stride = q.pow((self.k - 1 - local) as u32);
                for (t, row) in block.rows.iter().enumerate() {
                    let xd = row[local] as usize;
                    for y in 0..self.qk {
                        if (y / stride) % q == xd {
                            block.f[(t, y)] = 0.0;
                        }
                    }
                }
            } else {
                let pos = block.comp.iter().position(|&e| e == i).unwrap();
                block.mult = CompMult::DeltaDiag { pos };
            }
        }
        out.rebuild_tables();
        Ok(out)
    }

    /// Diagonal factor for one transformed complement component.
    fn mult_factor(&self, mult: CompMult, idx: usize) -> f64 {
        let w = self.comp_weights[idx] as usize;
        let a = &self.schedule;
        match mult {
            CompMult::Alpha => a.alpha(w),
            CompMult::MappedDiff { pos } => {
                let stride = (self.q as usize).pow((self.n - self.k - 1 - pos) as u32);
                if (idx / stride).is_multiple_of(self.q as usize) {
                    a.alpha(w) - a.alpha(w + 1)
                } else {
                    0.0
                }
            }
            CompMult::DeltaDiag { pos } => {
                let qf = self.q as f64;
                let stride = (self.q as usize).pow((self.n - self.k - 1 - pos) as u32);
                if (idx / stride).is_multiple_of(self.q as usize) {
                    (1.0 - 1.0 / qf) * (a.alpha(w) - a.alpha(w + 1))
                } else {
                    (a.alpha(w) - a.alpha(w - 1)) / qf
                }
            }
        }
    }

    /// Precomputes one diagonal per distinct complement factor and points
    /// each block at its table.
    fn rebuild_tables(&mut self) {
        let mut kinds: Vec<CompMult> = Vec::new();
        for block in &self.blocks {
            if !kinds.contains(&block.mult) {
                kinds.push(block.mult);
            }
        }
        let tables: Vec<Vec<f64>> = kinds
            .iter()
            .map(|&mult| (0..self.qnc).map(|idx| self.mult_factor(mult, idx)).collect())
            .collect();
        for block in &mut self.blocks {
            block.table = kinds.iter().position(|&m| m == block.mult).unwrap();
        }
        self.tables = tables;
    }

    /// Applies the complement factor to one length-`q^(n-k)` slice.
    fn apply_comp(&self, table: usize, slice: &mut [f64]) {
        let nc = self.n - self.k;
        self.basis.transform_all(slice, nc, true);
        for (x, &f) in slice.iter_mut().zip(&self.tables[table]) {
            *x *= f;
        }
        self.basis.transform_all(slice, nc, false);
    }

    fn gather_block(&self, block: &Block, vv: &[f64], g: &mut [f64]) {
        let l = block.run_len;
        if l > 1 {
            let runs = self.qnc / l;
            for (ys, &base) in block.off_s.iter().enumerate() {
                let dst = &mut g[ys * self.qnc..(ys + 1) * self.qnc];
                for r in 0..runs {
                    let src = base + block.off_c[r * l];
                    dst[r * l..(r + 1) * l].copy_from_slice(&vv[src..src + l]);
                }
            }
        } else {
            for (ys, &base) in block.off_s.iter().enumerate() {
                let dst = &mut g[ys * self.qnc..(ys + 1) * self.qnc];
                for (slot, &off) in dst.iter_mut().zip(&block.off_c) {
                    *slot = vv[base + off];
                }
            }
        }
    }

    fn scatter_block(&self, block: &Block, src: &[f64], out: &mut [f64]) {
        let l = block.run_len;
        if l > 1 {
            let runs = self.qnc / l;
            for (ys, &base) in block.off_s.iter().enumerate() {
                let row = &src[ys * self.qnc..(ys + 1) * self.qnc];
                for r in 0..runs {
                    let dst = base + block.off_c[r * l];
                    for (o, &x) in out[dst..dst + l].iter_mut().zip(&row[r * l..(r + 1) * l]) {
                        *o += x;
                    }
                }
            }
        } else {
            for (ys, &base) in block.off_s.iter().enumerate() {
                let row = &src[ys * self.qnc..(ys + 1) * self.qnc];
                for (&x, &off) in row.iter().zip(&block.off_c) {
                    out[base + off] += x;
                }
            }
        }
    }

    /// Fused `out = Op^T Op v`; returns `|Op v|^2`. One gather, one small
    /// multiply pair, and one transform round-trip per block.
    pub fn normal_apply(&self, v: &[f64], out: &mut [f64]) -> f64 {
        assert_eq!(v.len(), self.cols());
        assert_eq!(out.len(), self.cols());
        let masked;
        let vv: &[f64] = match &self.column_mask {
            Some(mask) => {
                masked = v
                    .iter()
                    .zip(mask)
                    .map(|(&x, &keep)| if keep { x } else { 0.0 })
                    .collect::<Vec<f64>>();
                &masked
            }
            None => v,
        };
        out.iter_mut().for_each(|x| *x = 0.0);
        let nc = self.n - self.k;
        let mut gathered = Array2::zeros((self.qk, self.qnc));
        let mut w = Array2::zeros((self.qd, self.qnc));
        let mut scat = Array2::zeros((self.qk, self.qnc));
        let mut lambda = 0.0;
        for block in &self.blocks {
            self.gather_block(block, vv, gathered.as_slice_mut().unwrap());
            general_mat_mul(1.0, &block.f, &gathered, 0.0, &mut w);
            let table = &self.tables[block.table];
            for row in w.as_slice_mut().unwrap().chunks_mut(self.qnc) {
                self.basis.transform_all(row, nc, true);
                let mut part = 0.0;
                for (x, &fac) in row.iter_mut().zip(table) {
                    *x *= fac;
                    part += *x * *x;
                    *x *= fac;
                }
                lambda += part;
                self.basis.transform_all(row, nc, false);
            }
            general_mat_mul(1.0, &block.f.t(), &w, 0.0, &mut scat);
            self.scatter_block(block, scat.as_slice().unwrap(), out);
        }
        if let Some(mask) = &self.column_mask {
            for (x, &keep) in out.iter_mut().zip(mask) {
                if !keep {
                    *x = 0.0;
                }
            }
        }
        lambda
    }

    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.cols());
        assert_eq!(out.len(), self.rows());
        let masked;
        let vv: &[f64] = match &self.column_mask {
            Some(mask) => {
                masked = v
                    .iter()
                    .zip(mask)
                    .map(|(&x, &keep)| if keep { x } else { 0.0 })
                    .collect::<Vec<f64>>();
                &masked
            }
            None => v,
        };
        let mut gathered = Array2::zeros((self.qk, self.qnc));
        let mut w = Array2::zeros((self.qd, self.qnc));
        let block_rows = self.qd * self.qnc;
        for (b, block) in self.blocks.iter().enumerate() {
            self.gather_block(block, vv, gathered.as_slice_mut().unwrap());
            general_mat_mul(1.0, &block.f, &gathered, 0.0, &mut w);
            let ws = w.as_slice_mut().unwrap();
            for row in ws.chunks_mut(self.qnc) {
                self.apply_comp(block.table, row);
            }
            out[b * block_rows..(b + 1) * block_rows].copy_from_slice(ws);
        }
    }

    pub fn rmatvec(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.rows());
        assert_eq!(out.len(), self.cols());
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut w = Array2::zeros((self.qd, self.qnc));
        let mut scattered = Array2::zeros((self.qk, self.qnc));
        let block_rows = self.qd * self.qnc;
        for (b, block) in self.blocks.iter().enumerate() {
            {
                let ws = w.as_slice_mut().unwrap();
                ws.copy_from_slice(&u[b * block_rows..(b + 1) * block_rows]);
                // The complement factor is symmetric (diagonal in the
                // coordinate eigenbasis), so the adjoint reuses it.
                for row in ws.chunks_mut(self.qnc) {
                    self.apply_comp(block.table, row);
                }
            }
            general_mat_mul(1.0, &block.f.t(), &w, 0.0, &mut scattered);
            self.scatter_block(block, scattered.as_slice().unwrap(), out);
        }
        if let Some(mask) = &self.column_mask {
            for (x, &keep) in out.iter_mut().zip(mask) {
                if !keep {
                    *x = 0.0;
                }
            }
        }
    }

    /// The digit of the positive-input label of a row at a coordinate.
    pub fn row_digit(&self, row: usize, coord: usize) -> u16 {
        let block_rows = self.qd * self.qnc;
        let block = &self.blocks[row / block_rows];
        let within = row % block_rows;
        let t = within / self.qnc;
        let z = within % self.qnc;
        if let Some(local) = block.subset.iter().position(|&e| e == coord) {
            block.rows[t][local]
        } else {
            let pos = block.comp.iter().position(|&e| e == coord).unwrap();
            let stride = (self.q as usize).pow((self.n - self.k - 1 - pos) as u32);
            ((z / stride) % self.q as usize) as u16
        }
    }

    /// The digit of the column label (input `y`) at a coordinate.
    pub fn col_digit(&self, col: usize, coord: usize) -> u16 {
        let stride = (self.q as usize).pow((self.n - 1 - coord) as u32);
        ((col / stride) % self.q as usize) as u16
    }

    /// Exact dense materialization, assembled entry by entry from the
    /// dense kernels and dense complement factors; an independent route
    /// from the matrix-free application. Rows are grouped by subset in
    /// lexicographic order.
    pub fn dense(&self, caps: &Caps) -> Result<Array2<f64>> {
        let entries = self.rows() as u128 * self.cols() as u128;
        if entries > caps.dense_entries {
            return Err(Error::CapExceeded {
                what: "dense operator entries",
                value: entries,
                cap: caps.dense_entries,
            });
        }
        let mut out = Array2::zeros((self.rows(), self.cols()));
        let block_rows = self.qd * self.qnc;
        for (b, block) in self.blocks.iter().enumerate() {
            let comp_dense = self.comp_dense(block.mult)?;
            for t in 0..self.qd {
                for z in 0..self.qnc {
                    let row = b * block_rows + t * self.qnc + z;
                    for ys in 0..self.qk {
                        let fv = block.f[(t, ys)];
                        if fv == 0.0 {
                            continue;
                        }
                        let base = block.off_s[ys];
                        for yc in 0..self.qnc {
                            out[(row, base + block.off_c[yc])] = fv * comp_dense[(z, yc)];
                        }
                    }
                }
            }
        }
        if let Some(i) = self.delta {
            for row in 0..self.rows() {
                let rd = self.row_digit(row, i);
                for col in 0..self.cols() {
                    if self.col_digit(col, i) == rd {
                        out[(row, col)] = 0.0;
                    }
                }
            }
        }
        if let Some(mask) = &self.column_mask {
            for (col, &keep) in mask.iter().enumerate() {
                if !keep {
                    out.column_mut(col).fill(0.0);
                }
            }
        }
        Ok(out)
    }

    /// Dense complement factor via the dense projector route.
    fn comp_dense(&self, mult: CompMult) -> Result<Array2<f64>> {
        use crate::scheme::{weight_projector_dense, WeightProjectorSpec};
        let nc = self.n - self.k;
        let a = &self.schedule;
        let dim = self.qnc;
        match mult {
            CompMult::Alpha => {
                let mut out = Array2::zeros((dim, dim));
                for m in 0..=nc {
                    let p =
                        weight_projector_dense(&WeightProjectorSpec::exact(nc, m), self.q, dim)?;
                    out = out + p * a.alpha(m);
                }
                Ok(out)
            }
            CompMult::MappedDiff { pos } => {
                let (e0, _) = crate::scheme::e0_e1_dense(self.q);
                let mut rest = Array2::zeros((dim / self.q as usize, dim / self.q as usize));
                for m in 0..nc {
                    let p = weight_projector_dense(
                        &WeightProjectorSpec::exact(nc - 1, m),
                        self.q,
                        dim,
                    )?;
                    rest = rest + p * (a.alpha(m) - a.alpha(m + 1));
                }
                Ok(expand_at_position(&e0, &rest, pos, nc, self.q))
            }
            CompMult::DeltaDiag { pos } => {
                let q = self.q as usize;
                let qf = self.q as f64;
                let (e0, e1) = crate::scheme::e0_e1_dense(self.q);
                let mut off0 = e0;
                let mut off1 = e1;
                for x in 0..q {
                    off0[(x, x)] -= 1.0 / qf;
                    off1[(x, x)] -= 1.0 - 1.0 / qf;
                }
                let small = dim / q;
                let mut m0 = Array2::zeros((small, small));
                let mut m1 = Array2::zeros((small, small));
                for m in 0..nc {
                    let p = weight_projector_dense(
                        &WeightProjectorSpec::exact(nc - 1, m),
                        self.q,
                        dim,
                    )?;
                    m0 = m0 + &p * a.alpha(m);
                    m1 = m1 + &p * a.alpha(m + 1);
                }
                let part0 = expand_at_position(&off0, &m0, pos, nc, self.q);
                let part1 = expand_at_position(&off1, &m1, pos, nc, self.q);
                Ok(part0 + part1)
            }
        }
    }
}

/// Tensor product with the small `q x q` factor inserted at coordinate
/// `pos` of `nc` coordinates and `rest` on the remaining `nc - 1`.
fn expand_at_position(
    small: &Array2<f64>,
    rest: &Array2<f64>,
    pos: usize,
    nc: usize,
    q: u32,
) -> Array2<f64> {
    let q = q as usize;
    let dim = q.pow(nc as u32);
    let stride = q.pow((nc - 1 - pos) as u32);
    let strip = |idx: usize| -> (usize, usize) {
        let digit = (idx / stride) % q;
        let high = idx / (stride * q);
        let low = idx % stride;
        (digit, high * stride + low)
    };
    let mut out = Array2::zeros((dim, dim));
    for x in 0..dim {
        let (xd, xr) = strip(x);
        for y in 0..dim {
            let (yd, yr) = strip(y);
            out[(x, y)] = small[(xd, yd)] * rest[(xr, yr)];
        }
    }
    out
}

/// `(Op ∘ Δ_i) v` via the generic row/column digit decomposition:
/// `Op v - sum_a RowSel_a Op (ColSel_a v)`.
pub fn delta_mask_apply(op: &AdversaryOperator, i: usize, v: &[f64]) -> Vec<f64> {
    let mut result = vec![0.0; op.rows()];
    op.matvec(v, &mut result);
    let mut va = vec![0.0; op.cols()];
    let mut ta = vec![0.0; op.rows()];
    for a in 0..op.q() as u16 {
        for (col, slot) in va.iter_mut().enumerate() {
            *slot = if op.col_digit(col, i) == a { v[col] } else { 0.0 };
        }
        op.matvec(&va, &mut ta);
        for (row, r) in result.iter_mut().enumerate() {
            if op.row_digit(row, i) == a {
                *r -= ta[row];
            }
        }
    }
    result
}

/// Text dump of a dense matrix: `rows cols` header, then one row per line
/// with 17 significant digits.
pub fn write_dense_dump(mat: &ArrayView2<f64>) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", mat.nrows(), mat.ncols()));
    for row in mat.rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Entry-wise delta mask of a dense materialization, via the operator's
/// row and column labels.
pub fn dense_delta_mask(op: &AdversaryOperator, dense: &mut ArrayViewMut2<f64>, i: usize) {
    let mask = DeltaMask::new(i);
    for row in 0..dense.nrows() {
        let rd = op.row_digit(row, i);
        for col in 0..dense.ncols() {
            let cd = op.col_digit(col, i);
            let m = mask.entry(rd, cd);
            if m == 0.0 {
                dense[(row, col)] = 0.0;
            }
        }
    }
}
