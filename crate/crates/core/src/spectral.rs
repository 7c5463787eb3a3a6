//! Spectral norms of the block operators and the certificate they induce.
//!
//! Norms come from power iteration on `Op^T Op` with a seeded start
//! vector; the Rayleigh estimate is monotone non-decreasing, and
//! convergence is judged by its relative change over a probe window.
//! Non-convergence is reported, never hidden.
//!
//! The certificate evaluates one fixed operator family per instance: the
//! ratio `|Gamma| / max_i |Gamma ∘ Delta_i|` is a valid lower bound on the
//! adversary bound of the problem, up to the numerical tolerance of the
//! norm estimates.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{build_operator, AdversaryOperator, CoefficientSchedule, Variant};
use crate::algebra::binom;
use crate::error::Result;
use crate::oa::ProblemInstance;
use crate::Caps;

/// Anything that can be applied in both directions.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn matvec(&self, v: &[f64], out: &mut [f64]);
    fn rmatvec(&self, u: &[f64], out: &mut [f64]);

    /// `out = Op^T Op v`; returns `|Op v|^2`. Implementations may fuse the
    /// two applications.
    fn normal_apply(&self, v: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.resize(self.rows(), 0.0);
        self.matvec(v, scratch);
        let lambda = scratch.iter().map(|x| x * x).sum();
        self.rmatvec(scratch, out);
        lambda
    }
}

impl LinearOperator for AdversaryOperator {
    fn rows(&self) -> usize {
        AdversaryOperator::rows(self)
    }

    fn cols(&self) -> usize {
        AdversaryOperator::cols(self)
    }

    fn matvec(&self, v: &[f64], out: &mut [f64]) {
        AdversaryOperator::matvec(self, v, out)
    }

    fn rmatvec(&self, u: &[f64], out: &mut [f64]) {
        AdversaryOperator::rmatvec(self, u, out)
    }

    fn normal_apply(&self, v: &[f64], out: &mut [f64], _scratch: &mut Vec<f64>) -> f64 {
        AdversaryOperator::normal_apply(self, v, out)
    }
}

/// Power-iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerOpts {
    pub tolerance: f64,
    pub max_iter: usize,
    pub probe_window: usize,
    pub seed: u64,
}

impl Default for PowerOpts {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iter: 20_000, probe_window: 10, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormResult {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

fn seeded_unit_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..len)
        .map(|_| (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) - 0.5)
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Largest singular value via power iteration on `Op^T Op`, plus the
/// Rayleigh history (singular-value scale) for diagnostics.
pub fn spectral_norm_with_history(
    op: &dyn LinearOperator,
    opts: &PowerOpts,
) -> (NormResult, Vec<f64>) {
    if op.rows() == 0 || op.cols() == 0 {
        return (
            NormResult { value: 0.0, iterations: 0, converged: true, residual: 0.0 },
            Vec::new(),
        );
    }
    let mut v = seeded_unit_vector(op.cols(), opts.seed);
    let mut u = vec![0.0; op.cols()];
    let mut scratch = Vec::new();
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        // v is a unit vector, so |Op v|^2 is the Rayleigh quotient of
        // Op^T Op at v.
        let lambda = op.normal_apply(&v, &mut u, &mut scratch);
        let value = lambda.sqrt();
        history.push(value);
        if value == 0.0 {
            residual = 0.0;
            converged = true;
            break;
        }
        if iterations > opts.probe_window {
            let prev = history[iterations - 1 - opts.probe_window];
            residual = (value - prev).abs() / value.max(f64::MIN_POSITIVE);
            if residual <= opts.tolerance {
                converged = true;
                break;
            }
        }
        let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if unorm == 0.0 {
            // Op^T annihilates the image; the estimate cannot move.
            converged = true;
            residual = 0.0;
            break;
        }
        for (vd, &us) in v.iter_mut().zip(&u) {
            *vd = us / unorm;
        }
    }
    let value = history.last().copied().unwrap_or(0.0);
    (NormResult { value, iterations, converged, residual }, history)
}

pub fn spectral_norm(op: &dyn LinearOperator, opts: &PowerOpts) -> NormResult {
    spectral_norm_with_history(op, opts).0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub power: f64,
    pub max_iter: usize,
    pub probe_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMeta {
    pub family: Option<String>,
    pub n: usize,
    pub q: u32,
    pub k: usize,
    pub d: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CensusReport {
    pub valid: u64,
    pub total: u64,
    pub fraction: f64,
}

/// Everything the pipeline measures for one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub schema: u32,
    pub meta: ReportMeta,
    pub gamma_tilde_norm: NormResult,
    pub gamma_norm: NormResult,
    /// `|Gamma ∘ Delta_i|` (masked), indexed by coordinate.
    pub delta_norms: Vec<NormResult>,
    /// `|Gamma~_i|` (unmasked coordinate rewrites), indexed by coordinate.
    pub mapped_norms: Vec<NormResult>,
    /// `|Gamma~ ∘ Delta_i|` (unmasked), indexed by coordinate.
    pub tilde_delta_norms: Vec<NormResult>,
    pub census: CensusReport,
    pub ratio: f64,
    pub lemmas: Vec<LemmaCheck>,
}

impl SpectralReport {
    pub fn all_converged(&self) -> bool {
        let mut all = self.gamma_tilde_norm.converged && self.gamma_norm.converged;
        for n in self
            .delta_norms
            .iter()
            .chain(&self.mapped_norms)
            .chain(&self.tilde_delta_norms)
        {
            all = all && n.converged;
        }
        all
    }

    pub fn all_lemmas_pass(&self) -> bool {
        self.lemmas.iter().all(|c| c.pass)
    }

    pub fn max_delta_norm(&self) -> f64 {
        self.delta_norms.iter().map(|n| n.value).fold(0.0, f64::max)
    }
}

fn derive_seed(base: u64, tag: u64) -> u64 {
    base ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(tag.wrapping_add(1))
}

/// Builds the operator family for an instance and measures every norm the
/// report needs. Per-coordinate norms run in parallel; each is internally
/// deterministic, so the report is reproducible for a fixed seed.
pub fn certificate(
    instance: &ProblemInstance,
    schedule: &CoefficientSchedule,
    opts: &PowerOpts,
    caps: &Caps,
) -> Result<SpectralReport> {
    let n = instance.n();
    let plain = build_operator(instance, schedule, Variant::Plain, caps)?;
    let masked = build_operator(instance, schedule, Variant::Masked, caps)?;
    let census = instance.valid_column_census(caps.enumeration)?;

    let gamma_tilde_norm =
        spectral_norm(&plain, &PowerOpts { seed: derive_seed(opts.seed, 0), ..*opts });
    let gamma_norm =
        spectral_norm(&masked, &PowerOpts { seed: derive_seed(opts.seed, 1), ..*opts });

    let per_coord: Vec<Result<(NormResult, NormResult, NormResult)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mapped = build_operator(instance, schedule, Variant::MappedAt(i), caps)?;
            let mapped_norm = spectral_norm(
                &mapped,
                &PowerOpts { seed: derive_seed(opts.seed, 2 + i as u64), ..*opts },
            );
            let tilde_delta = plain.with_delta(i)?;
            let tilde_delta_norm = spectral_norm(
                &tilde_delta,
                &PowerOpts { seed: derive_seed(opts.seed, 2 + (n + i) as u64), ..*opts },
            );
            let masked_delta = masked.with_delta(i)?;
            let masked_delta_norm = spectral_norm(
                &masked_delta,
                &PowerOpts { seed: derive_seed(opts.seed, 2 + (2 * n + i) as u64), ..*opts },
            );
            Ok((mapped_norm, tilde_delta_norm, masked_delta_norm))
        })
        .collect();

    let mut mapped_norms = Vec::with_capacity(n);
    let mut tilde_delta_norms = Vec::with_capacity(n);
    let mut delta_norms = Vec::with_capacity(n);
    for r in per_coord {
        let (m, t, d) = r?;
        mapped_norms.push(m);
        tilde_delta_norms.push(t);
        delta_norms.push(d);
    }

    let max_delta = delta_norms.iter().map(|r| r.value).fold(0.0, f64::max);
    let ratio = if max_delta > 0.0 { gamma_norm.value / max_delta } else { f64::NAN };

    Ok(SpectralReport {
        schema: 1,
        meta: ReportMeta {
            family: None,
            n,
            q: instance.q(),
            k: instance.k(),
            d: instance.d(),
            seed: opts.seed,
            tolerances: Tolerances {
                power: opts.tolerance,
                max_iter: opts.max_iter,
                probe_window: opts.probe_window,
            },
        },
        gamma_tilde_norm,
        gamma_norm,
        delta_norms,
        mapped_norms,
        tilde_delta_norms,
        census: CensusReport {
            valid: census.valid as u64,
            total: census.total as u64,
            fraction: census.fraction,
        },
        ratio,
        lemmas: Vec::new(),
    })
}

/// The inequality suite, evaluated from the measured norms with explicit
/// constants. Margins are reported so a failure can be told apart from a
/// merely loose constant.
pub fn lemma_suite(
    instance: &ProblemInstance,
    schedule: &CoefficientSchedule,
    report: &SpectralReport,
) -> Vec<LemmaCheck> {
    let n = instance.n() as i64;
    let k = instance.k() as i64;
    let d = instance.d() as i64;
    let nk = (n - k) as usize;
    let slack = 1e-8;
    let c_nk = binom(n, k) as f64;
    let c_kd = binom(k, k - d) as f64;
    let alpha0 = schedule.alpha(0);
    let mut checks = Vec::new();

    // Lower bounds are written lhs >= rhs, upper bounds lhs <= rhs; the
    // margin is the slack of the inequality either way.
    let push_lower = |checks: &mut Vec<LemmaCheck>, name: String, lhs: f64, rhs: f64| {
        let margin = lhs - rhs;
        checks.push(LemmaCheck { name, lhs, rhs, margin, pass: margin >= -slack });
    };
    let push_upper = |checks: &mut Vec<LemmaCheck>, name: String, lhs: f64, rhs: f64| {
        let margin = rhs - lhs;
        checks.push(LemmaCheck { name, lhs, rhs, margin, pass: margin >= -slack });
    };

    // L1: |Gamma~| >= alpha_0 sqrt(C(n,k))  (uniform bilinear witness)
    push_lower(
        &mut checks,
        "L1".into(),
        report.gamma_tilde_norm.value,
        alpha0 * c_nk.sqrt(),
    );

    // L2: |Gamma~| <= C(k,k-d) sqrt(C(n,k)) max_m alpha_m
    let max_alpha = (0..=nk).map(|m| schedule.alpha(m)).fold(0.0, f64::max);
    push_upper(
        &mut checks,
        "L2".into(),
        report.gamma_tilde_norm.value,
        c_kd * c_nk.sqrt() * max_alpha,
    );

    // L3: |Gamma~_i| <= C(k,k-d) sqrt( max_m alpha_m^2 C(m+d,d) C(n-m-d-1,k-1-d)
    //                                 + max_m (alpha_m - alpha_{m+1})^2 C(n-1,k) )
    let s1 = (0..=nk)
        .map(|m| {
            let a = schedule.alpha(m);
            a * a
                * binom(m as i64 + d, d) as f64
                * binom(n - m as i64 - d - 1, k - 1 - d) as f64
        })
        .fold(0.0, f64::max);
    let s2_range = if nk == 0 { 0..=0 } else { 0..=nk - 1 };
    let s2 = s2_range
        .map(|m| {
            let diff = schedule.alpha(m) - schedule.alpha(m + 1);
            diff * diff
        })
        .fold(0.0, f64::max)
        * binom(n - 1, k) as f64;
    let l3_rhs = c_kd * (s1 + s2).sqrt();
    for (i, norm) in report.mapped_norms.iter().enumerate() {
        push_upper(&mut checks, format!("L3[i={i}]"), norm.value, l3_rhs);
    }

    // L4: |Gamma~ ∘ Delta_i| <= 2 |Gamma~_i|
    for (i, norm) in report.tilde_delta_norms.iter().enumerate() {
        push_upper(
            &mut checks,
            format!("L4[i={i}]"),
            norm.value,
            2.0 * report.mapped_norms[i].value,
        );
    }

    // L5: |Gamma ∘ Delta_i| <= |Gamma~ ∘ Delta_i|
    for (i, norm) in report.delta_norms.iter().enumerate() {
        push_upper(
            &mut checks,
            format!("L5[i={i}]"),
            norm.value,
            report.tilde_delta_norms[i].value,
        );
    }

    // L6: |Gamma| >= sqrt(C(n,k)) alpha_0 sqrt(|V| / q^n)
    push_lower(
        &mut checks,
        "L6".into(),
        report.gamma_norm.value,
        c_nk.sqrt() * alpha0 * report.census.fraction.sqrt(),
    );

    // L7: |V| / q^n >= 1 - C(n,k) q^(d-k), decided exactly on integers:
    // |V| q^k >= q^(n+k) - C(n,k) q^(n+d).
    let q = instance.q() as i128;
    let lhs_int = report.census.valid as i128 * q.pow(instance.k() as u32);
    let rhs_int = q.pow((instance.n() + instance.k()) as u32)
        - binom(n, k) as i128 * q.pow((instance.n() + instance.d()) as u32);
    let lhs = report.census.fraction;
    let rhs = 1.0 - c_nk * (instance.q() as f64).powi((d - k) as i32);
    checks.push(LemmaCheck {
        name: "L7".into(),
        lhs,
        rhs,
        margin: lhs - rhs,
        pass: lhs_int >= rhs_int,
    });

    checks
}

/// Convenience: certificate plus attached lemma checks.
pub fn certified_report(
    instance: &ProblemInstance,
    schedule: &CoefficientSchedule,
    opts: &PowerOpts,
    caps: &Caps,
) -> Result<SpectralReport> {
    let mut report = certificate(instance, schedule, opts, caps)?;
    report.lemmas = lemma_suite(instance, schedule, &report);
    Ok(report)
}

#[cfg(test)]
mod tests;
