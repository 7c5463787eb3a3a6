//! Weight projectors of the Hamming association scheme on `[q]^n`.
//!
//! Fix an orthonormal basis `e_0, .., e_{q-1}` of `R^q` whose first vector
//! is uniform. Products `e_{v_1} x .. x e_{v_n}` span `R^{q^n}`; the
//! *weight* of such a product is the number of non-uniform factors. The
//! projector `E_m^(n)` keeps exactly the weight-`m` span and depends only
//! on the span of the uniform vector, not on the chosen completion.
//!
//! Two routes are provided: a dense assembly from `E_0`/`E_1` factor
//! products, and a matrix-free application (per-coordinate basis change,
//! zero the disallowed weights, change back) that scales to large `q^n`.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Flat real vector over `[q]^n`, most significant coordinate first.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorVector {
    n_coords: usize,
    q: u32,
    data: Vec<f64>,
}

impl TensorVector {
    pub fn new(n_coords: usize, q: u32, data: Vec<f64>) -> Result<Self> {
        let expected = (q as usize)
            .checked_pow(n_coords as u32)
            .ok_or_else(|| Error::InvalidParams("q^n overflows".into()))?;
        if data.len() != expected {
            return Err(Error::InvalidParams(format!(
                "tensor data length {} != q^n = {expected}",
                data.len()
            )));
        }
        Ok(Self { n_coords, q, data })
    }

    pub fn n_coords(&self) -> usize {
        self.n_coords
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// `E_0` (all entries `1/q`) and `E_1 = I - E_0`.
pub fn e0_e1_dense(q: u32) -> (Array2<f64>, Array2<f64>) {
    let qq = q as usize;
    let e0 = Array2::from_elem((qq, qq), 1.0 / q as f64);
    let mut e1 = Array2::from_elem((qq, qq), -1.0 / q as f64);
    for i in 0..qq {
        e1[(i, i)] += 1.0;
    }
    (e0, e1)
}

/// A deterministic real orthonormal basis of `R^q` whose column 0 is the
/// uniform vector. Column `j >= 1` is the Helmert vector with `j` entries
/// `1/sqrt(j(j+1))`, then `-j/sqrt(j(j+1))`, then zeros.
#[derive(Debug, Clone)]
pub struct CoordBasis {
    q: u32,
    mat: Array2<f64>,
}

impl CoordBasis {
    pub fn helmert(q: u32) -> Self {
        let qq = q as usize;
        let mut mat = Array2::zeros((qq, qq));
        for r in 0..qq {
            mat[(r, 0)] = 1.0 / (q as f64).sqrt();
        }
        for j in 1..qq {
            let norm = 1.0 / ((j * (j + 1)) as f64).sqrt();
            for r in 0..j {
                mat[(r, j)] = norm;
            }
            mat[(j, j)] = -(j as f64) * norm;
        }
        Self { q, mat }
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Column `c` is basis vector `e_c`.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.mat
    }

    /// In-place basis change of one tensor coordinate. `forward` computes
    /// coefficients (`B^T x`), otherwise synthesizes back (`B c`).
    pub fn transform_coord(&self, data: &mut [f64], n_coords: usize, coord: usize, forward: bool) {
        let q = self.q as usize;
        debug_assert_eq!(data.len(), q.pow(n_coords as u32));
        debug_assert!(coord < n_coords);
        let mat = self.mat.as_slice().expect("basis matrix is contiguous");
        let stride = q.pow((n_coords - 1 - coord) as u32);
        let block = stride * q;
        let mut tmp = vec![0.0; q];
        let mut acc = vec![0.0; q];
        let mut outer = 0;
        while outer < data.len() {
            for inner in 0..stride {
                let base = outer + inner;
                for (t, slot) in tmp.iter_mut().enumerate() {
                    *slot = data[base + t * stride];
                }
                if forward {
                    // acc[c] = sum_t mat[t, c] * tmp[t]
                    acc.iter_mut().for_each(|x| *x = 0.0);
                    for (t, &val) in tmp.iter().enumerate() {
                        let row = &mat[t * q..(t + 1) * q];
                        for (a, &b) in acc.iter_mut().zip(row) {
                            *a += b * val;
                        }
                    }
                } else {
                    // acc[r] = sum_c mat[r, c] * tmp[c]
                    for (r, a) in acc.iter_mut().enumerate() {
                        let row = &mat[r * q..(r + 1) * q];
                        *a = row.iter().zip(&tmp).map(|(&b, &v)| b * v).sum();
                    }
                }
                for (out_idx, &a) in acc.iter().enumerate() {
                    data[base + out_idx * stride] = a;
                }
            }
            outer += block;
        }
    }

    /// Basis change of every coordinate.
    pub fn transform_all(&self, data: &mut [f64], n_coords: usize, forward: bool) {
        for coord in 0..n_coords {
            self.transform_coord(data, n_coords, coord, forward);
        }
    }
}

/// Which weights a projector keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSelect {
    Exact(usize),
    AtMost(usize),
}

impl WeightSelect {
    pub fn allows(&self, w: usize) -> bool {
        match *self {
            WeightSelect::Exact(m) => w == m,
            WeightSelect::AtMost(d) => w <= d,
        }
    }

    fn max_weight(&self) -> usize {
        match *self {
            WeightSelect::Exact(m) | WeightSelect::AtMost(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightProjectorSpec {
    pub n_coords: usize,
    pub select: WeightSelect,
}

impl WeightProjectorSpec {
    pub fn exact(n_coords: usize, m: usize) -> Self {
        Self { n_coords, select: WeightSelect::Exact(m) }
    }

    pub fn at_most(n_coords: usize, d: usize) -> Self {
        Self { n_coords, select: WeightSelect::AtMost(d) }
    }
}

/// Number of non-zero digits of every flat index in `[q]^n`.
pub fn weight_table(q: u32, n_coords: usize) -> Vec<u8> {
    let q = q as usize;
    let len = q.pow(n_coords as u32);
    let mut w = vec![0u8; len];
    for idx in 1..len {
        w[idx] = w[idx / q] + u8::from(idx % q != 0);
    }
    w
}

/// Orthogonal projection of `v` onto the selected weight span, matrix-free.
pub fn apply_weight_projector(spec: &WeightProjectorSpec, v: &TensorVector) -> Result<TensorVector> {
    if spec.n_coords != v.n_coords() {
        return Err(Error::InvalidParams(format!(
            "projector on {} coordinates applied to a {}-coordinate tensor",
            spec.n_coords,
            v.n_coords()
        )));
    }
    if spec.select.max_weight() > spec.n_coords {
        return Err(Error::InvalidParams(format!(
            "weight {} exceeds coordinate count {}",
            spec.select.max_weight(),
            spec.n_coords
        )));
    }
    let basis = CoordBasis::helmert(v.q());
    let weights = weight_table(v.q(), v.n_coords());
    let mut data = v.data().to_vec();
    basis.transform_all(&mut data, v.n_coords(), true);
    for (x, &w) in data.iter_mut().zip(&weights) {
        if !spec.select.allows(w as usize) {
            *x = 0.0;
        }
    }
    basis.transform_all(&mut data, v.n_coords(), false);
    TensorVector::new(v.n_coords(), v.q(), data)
}

/// Dense realization of the weight projector, assembled from `E_0`/`E_1`
/// factor products: the entry at `(x, y)` is the sum over allowed weights
/// `m` of the coefficient of `z^m` in `prod_j (E_0[x_j,y_j] + E_1[x_j,y_j] z)`.
pub fn weight_projector_dense(spec: &WeightProjectorSpec, q: u32, cap: usize) -> Result<Array2<f64>> {
    let n = spec.n_coords;
    let dim = (q as usize)
        .checked_pow(n as u32)
        .ok_or_else(|| Error::InvalidParams("q^n overflows".into()))?;
    if dim > cap {
        return Err(Error::CapExceeded {
            what: "dense projector dimension",
            value: dim as u128,
            cap: cap as u128,
        });
    }
    let qf = q as f64;
    let strides: Vec<usize> = (0..n).map(|j| (q as usize).pow((n - 1 - j) as u32)).collect();
    let mut out = Array2::zeros((dim, dim));
    let mut poly = vec![0.0f64; n + 1];
    for x in 0..dim {
        for y in 0..dim {
            poly.iter_mut().for_each(|c| *c = 0.0);
            poly[0] = 1.0;
            for (j, &st) in strides.iter().enumerate() {
                let xj = (x / st) % q as usize;
                let yj = (y / st) % q as usize;
                let a = 1.0 / qf; // E_0 entry
                let b = if xj == yj { 1.0 - 1.0 / qf } else { -1.0 / qf }; // E_1 entry
                for deg in (0..=j).rev() {
                    poly[deg + 1] += poly[deg] * b;
                    poly[deg] *= a;
                }
            }
            let mut acc = 0.0;
            for (m, &c) in poly.iter().enumerate() {
                if spec.select.allows(m) {
                    acc += c;
                }
            }
            out[(x, y)] = acc;
        }
    }
    Ok(out)
}
