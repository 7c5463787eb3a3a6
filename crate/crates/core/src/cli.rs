//! Command implementations behind the `oalab` binary: generate and verify
//! collections, run the certificate and inequality suite, and sweep the
//! certificate ratio across input sizes.
//!
//! Exit-code convention (mapped by the binary): 0 pass, 1 property
//! violation, 2 usage/parse/cap error, 3 numerical non-convergence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adversary::CoefficientSchedule;
use crate::algebra::{field_is_prime, CyclicGroup, PrimeField};
use crate::error::{Error, Result};
use crate::oa::format::{self, ParsedFile};
use crate::oa::{
    check_consistency, gen_ddegree, gen_ddegree_rank_indexed, gen_kdist, gen_ksum, gen_pattern,
    gen_pattern_from_global, verify_linear, verify_strength, ConsistencyOutcome, OACollection,
    ProblemInstance, StrengthOutcome,
};
use crate::spectral::{certified_report, PowerOpts, SpectralReport};
use crate::Caps;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Ksum,
    Kdist,
    Ddegree,
    Pattern,
    File,
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Ksum => "ksum",
            Family::Kdist => "kdist",
            Family::Ddegree => "ddegree",
            Family::Pattern => "pattern",
            Family::File => "file",
        }
    }
}

/// Parameters shared by the generating commands.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n: usize,
    pub q: u32,
    pub k: usize,
    pub t: u32,
    pub deg: usize,
    pub rank_indexed: bool,
    pub pattern_global: Option<Vec<u16>>,
    pub pattern_file: Option<PathBuf>,
    pub file: Option<PathBuf>,
    pub seed: u64,
    pub tolerance: f64,
    pub max_iter: usize,
    pub caps: Caps,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: Family::Kdist,
            n: 3,
            q: 3,
            k: 2,
            t: 0,
            deg: 0,
            rank_indexed: false,
            pattern_global: None,
            pattern_file: None,
            file: None,
            seed: 1,
            tolerance: 1e-9,
            max_iter: 20_000,
            caps: Caps::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn build_collection(&self) -> Result<OACollection> {
        match self.family {
            Family::Ksum => {
                let g = CyclicGroup::new(self.q)?;
                gen_ksum(&g, self.k, self.t, self.n)
            }
            Family::Kdist => gen_kdist(self.q, self.k, self.n),
            Family::Ddegree => {
                let f = PrimeField::new(self.q)?;
                if self.rank_indexed {
                    gen_ddegree_rank_indexed(&f, self.deg, self.k, self.n)
                } else {
                    gen_ddegree(&f, self.deg, self.k, self.n)
                }
            }
            Family::Pattern => {
                if let Some(y) = &self.pattern_global {
                    gen_pattern_from_global(self.n, self.k, self.q, y)
                } else if let Some(path) = &self.pattern_file {
                    let coll = load_collection(path)?;
                    if coll.d() != 0 {
                        return Err(Error::InvalidParams(
                            "pattern files must have strength 0".into(),
                        ));
                    }
                    let patterns: BTreeMap<Vec<usize>, Vec<u16>> = coll
                        .arrays()
                        .iter()
                        .map(|(s, arr)| (s.clone(), arr.rows()[0].clone()))
                        .collect();
                    gen_pattern(coll.n(), coll.k(), coll.q(), &patterns)
                } else {
                    Err(Error::InvalidParams(
                        "pattern family needs --pattern-global or --pattern-file".into(),
                    ))
                }
            }
            Family::File => {
                let path = self.file.as_ref().ok_or_else(|| {
                    Error::InvalidParams("file family needs --file".into())
                })?;
                load_collection(path)
            }
        }
    }

    pub fn build_instance(&self) -> Result<ProblemInstance> {
        Ok(ProblemInstance::new(self.build_collection()?))
    }

    pub fn power_opts(&self) -> PowerOpts {
        PowerOpts {
            tolerance: self.tolerance,
            max_iter: self.max_iter,
            seed: self.seed,
            ..PowerOpts::default()
        }
    }
}

pub fn load_collection(path: &Path) -> Result<OACollection> {
    let text = fs::read_to_string(path)?;
    format::parse(&text)?.into_collection()
}

/// True iff the alphabet meets the size floor `q^(k-d) >= n^k` under which
/// the certificate constants are meaningful.
pub fn alphabet_bound_holds(n: usize, q: u32, k: usize, d: usize) -> bool {
    (q as u128).pow((k - d) as u32) >= (n as u128).pow(k as u32)
}

/// Smallest admissible alphabet size for the strict sweep rule: the least
/// `q >= 2` with `q^(k-d) >= n^k`, bumped to the next prime at least `n`
/// for polynomial-evaluation families.
pub fn strict_q(n: usize, k: usize, d: usize, needs_prime_geq_n: bool) -> u32 {
    let mut q = 2u32;
    loop {
        let size_ok = alphabet_bound_holds(n, q, k, d);
        let field_ok = !needs_prime_geq_n || (field_is_prime(q as u64) && q as usize >= n);
        if size_ok && field_ok {
            return q;
        }
        q += 1;
    }
}

/// Command outcome, mapped to an exit code by the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdOutcome {
    Pass,
    PropertyViolation,
    NonConvergence,
}

fn write_output(path: Option<&Path>, content: &str, out: &mut impl std::io::Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => out.write_all(content.as_bytes())?,
    }
    Ok(())
}

/// Generates a collection, writes it in the text format, and prints a
/// summary (array sizes, verified strength, consistency).
pub fn cmd_gen(
    config: &ExperimentConfig,
    out_path: Option<&Path>,
    out: &mut impl std::io::Write,
) -> Result<CmdOutcome> {
    let coll = config.build_collection()?;
    let text = format::write_collection(&coll);
    write_output(out_path, &text, out)?;
    let sizes: Vec<usize> = coll.arrays().values().map(|a| a.len()).collect();
    let consistency = match check_consistency(&coll) {
        ConsistencyOutcome::Consistent => "consistent".to_string(),
        ConsistencyOutcome::Witness(w) => format!("inconsistent ({w})"),
    };
    writeln!(
        out,
        "generated {} arrays (n={} q={} k={} d={}), |T_S| = {}, index 1 verified, {}",
        coll.arrays().len(),
        coll.n(),
        coll.q(),
        coll.k(),
        coll.d(),
        sizes[0],
        consistency
    )?;
    if !alphabet_bound_holds(coll.n(), coll.q(), coll.k(), coll.d()) {
        writeln!(
            out,
            "warning: q = {} is below the alphabet floor n^(k/(k-d)) for n = {}",
            coll.q(),
            coll.n()
        )?;
    }
    Ok(CmdOutcome::Pass)
}

/// Verifies a collection file: per-array strength at the advertised `d`
/// (with the implied index), linearity where defined, and the pairwise
/// overlap check. The exit gate is the strength/index verification;
/// consistency is reported but not gated, since inconsistent collections
/// are legitimate problems.
pub fn cmd_verify(path: &Path, out: &mut impl std::io::Write) -> Result<CmdOutcome> {
    let text = fs::read_to_string(path)?;
    let parsed = format::parse(&text)?;
    let data = match parsed {
        ParsedFile::Generator(spec) => {
            let coll = spec.expand()?;
            writeln!(out, "generator shorthand expanded to {} arrays", coll.arrays().len())?;
            format::CollectionData {
                n: coll.n(),
                q: coll.q(),
                k: coll.k(),
                d: coll.d(),
                arrays: coll.arrays().clone(),
            }
        }
        ParsedFile::Collection(data) => data,
    };

    let field = if field_is_prime(data.q as u64) {
        Some(PrimeField::new(data.q)?)
    } else {
        None
    };
    let mut all_ok = true;
    let mut lambdas = Vec::new();
    for (s, arr) in &data.arrays {
        match verify_strength(arr, data.d) {
            Ok(StrengthOutcome::Certificate(c)) => {
                lambdas.push(c.lambda);
                let linear = match &field {
                    Some(f) if !arr.has_dummy() => match verify_linear(arr, f)? {
                        true => ", linear",
                        false => ", not linear",
                    },
                    _ => "",
                };
                writeln!(
                    out,
                    "S {:?}: strength {} index {} verified ({} rows{})",
                    s,
                    c.d,
                    c.lambda,
                    arr.len(),
                    linear
                )?;
            }
            Ok(StrengthOutcome::Violation(w)) => {
                all_ok = false;
                writeln!(out, "S {s:?}: strength {} FAILS: {w}", data.d)?;
            }
            Err(e) => {
                all_ok = false;
                writeln!(out, "S {s:?}: strength {} FAILS: {e}", data.d)?;
            }
        }
    }
    lambdas.sort_unstable();
    lambdas.dedup();
    if lambdas.len() > 1 {
        all_ok = false;
        writeln!(out, "index differs across arrays: {lambdas:?}")?;
    }

    if all_ok && lambdas == [1] {
        let coll = data.verify()?;
        match check_consistency(&coll) {
            ConsistencyOutcome::Consistent => writeln!(out, "collection is consistent")?,
            ConsistencyOutcome::Witness(w) => {
                writeln!(out, "collection is inconsistent: {w}")?;
            }
        }
    } else if all_ok {
        writeln!(out, "consistency check skipped (index != 1)")?;
    }

    Ok(if all_ok { CmdOutcome::Pass } else { CmdOutcome::PropertyViolation })
}

/// Runs the certificate and the inequality suite, writes the JSON report,
/// and prints one line per check.
pub fn cmd_lemmas(
    config: &ExperimentConfig,
    out_path: Option<&Path>,
    out: &mut impl std::io::Write,
) -> Result<CmdOutcome> {
    let instance = config.build_instance()?;
    if !alphabet_bound_holds(instance.n(), instance.q(), instance.k(), instance.d()) {
        writeln!(
            out,
            "warning: q = {} is below the alphabet floor n^(k/(k-d)) for n = {}",
            instance.q(),
            instance.n()
        )?;
    }
    let schedule = CoefficientSchedule::new(instance.n(), instance.k(), instance.d())?;
    let mut report = certified_report(&instance, &schedule, &config.power_opts(), &config.caps)?;
    report.meta.family = Some(config.family.label().to_string());
    let json = report_json(&report);
    write_output(out_path, &json, out)?;
    print_report_lines(&report, out)?;
    Ok(report_outcome(&report))
}

pub fn report_json(report: &SpectralReport) -> String {
    let mut json = serde_json::to_string_pretty(report).expect("report serialization");
    json.push('\n');
    json
}

pub fn report_outcome(report: &SpectralReport) -> CmdOutcome {
    if !report.all_converged() {
        CmdOutcome::NonConvergence
    } else if !report.all_lemmas_pass() {
        CmdOutcome::PropertyViolation
    } else {
        CmdOutcome::Pass
    }
}

fn print_report_lines(report: &SpectralReport, out: &mut impl std::io::Write) -> Result<()> {
    writeln!(
        out,
        "gamma_tilde_norm = {:.12} (converged: {})",
        report.gamma_tilde_norm.value, report.gamma_tilde_norm.converged
    )?;
    writeln!(
        out,
        "gamma_norm       = {:.12} (converged: {})",
        report.gamma_norm.value, report.gamma_norm.converged
    )?;
    writeln!(out, "ratio            = {:.12}", report.ratio)?;
    for check in &report.lemmas {
        writeln!(
            out,
            "{}: {} (lhs = {:.12}, rhs = {:.12}, margin = {:.3e})",
            check.name,
            if check.pass { "pass" } else { "FAIL" },
            check.lhs,
            check.rhs,
            check.margin
        )?;
    }
    if !report.all_converged() {
        writeln!(out, "warning: some power iterations did not converge")?;
    }
    Ok(())
}

/// Materializes an operator variant and writes the dense text dump
/// (`rows cols` header, one row per line, 17 significant digits).
pub fn cmd_dump(
    config: &ExperimentConfig,
    variant: &str,
    coordinate: Option<usize>,
    out_path: Option<&Path>,
    out: &mut impl std::io::Write,
) -> Result<CmdOutcome> {
    let instance = config.build_instance()?;
    let schedule = CoefficientSchedule::new(instance.n(), instance.k(), instance.d())?;
    let (base, delta) = match (variant, coordinate) {
        ("plain", None) => (crate::adversary::Variant::Plain, None),
        ("masked", None) => (crate::adversary::Variant::Masked, None),
        ("mapped", Some(i)) => (crate::adversary::Variant::MappedAt(i), None),
        ("delta", Some(i)) => (crate::adversary::Variant::Plain, Some(i)),
        ("masked-delta", Some(i)) => (crate::adversary::Variant::Masked, Some(i)),
        ("mapped" | "delta" | "masked-delta", None) => {
            return Err(Error::InvalidParams(format!(
                "variant `{variant}` needs --coordinate"
            )));
        }
        _ => {
            return Err(Error::InvalidParams(format!(
                "unknown variant `{variant}` (plain, masked, mapped, delta, masked-delta)"
            )));
        }
    };
    let op = crate::adversary::build_operator(&instance, &schedule, base, &config.caps)?;
    let op = match delta {
        Some(i) => op.with_delta(i)?,
        None => op,
    };
    let dense = op.dense(&config.caps)?;
    let dump = crate::adversary::write_dense_dump(&dense.view());
    write_output(out_path, &dump, out)?;
    if out_path.is_some() {
        writeln!(out, "wrote {} x {} dense dump", op.rows(), op.cols())?;
    }
    Ok(CmdOutcome::Pass)
}

/// One sweep row of `cmd_scaling`.
#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub n: usize,
    pub q: u32,
    pub report: Option<SpectralReport>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct ScalingOutput {
    pub rows: Vec<ScalingRow>,
    pub slope: Option<f64>,
    pub residual: Option<f64>,
    pub csv: String,
    pub any_nonconverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QRule {
    Strict,
    Fixed(u32),
}

/// Sweeps the certificate over input sizes, emitting a CSV of norms and
/// the fitted log-log slope of the ratio.
#[allow(clippy::too_many_arguments)]
pub fn cmd_scaling(
    family: Family,
    k: usize,
    d: usize,
    n_list: &[usize],
    q_rule: QRule,
    config: &ExperimentConfig,
    out_path: Option<&Path>,
    out: &mut impl std::io::Write,
) -> Result<ScalingOutput> {
    let mut rows = Vec::new();
    let mut any_nonconverged = false;
    for &n in n_list {
        if k > n {
            rows.push(ScalingRow {
                n,
                q: 0,
                report: None,
                status: "skipped_invalid".into(),
            });
            continue;
        }
        let needs_prime = matches!(family, Family::Ddegree);
        let q = match q_rule {
            QRule::Strict => strict_q(n, k, d, needs_prime),
            QRule::Fixed(q) => q,
        };
        let cfg = ExperimentConfig {
            family,
            n,
            q,
            k,
            deg: d.saturating_sub(1),
            ..config.clone()
        };
        let cfg = match family {
            Family::Ksum => {
                if d != k - 1 {
                    return Err(Error::InvalidParams(format!(
                        "ksum has strength k-1 = {}, got d = {d}",
                        k - 1
                    )));
                }
                cfg
            }
            Family::Kdist => {
                if d != 1 {
                    return Err(Error::InvalidParams("kdist has strength 1".into()));
                }
                cfg
            }
            Family::Ddegree => {
                if d == 0 {
                    return Err(Error::InvalidParams(
                        "ddegree strength is deg+1 >= 1".into(),
                    ));
                }
                cfg
            }
            Family::Pattern | Family::File => {
                return Err(Error::InvalidParams(
                    "scaling sweeps need a parametric family".into(),
                ));
            }
        };
        let qn = (q as u128).pow(n as u32);
        if qn > config.caps.qn || qn > config.caps.enumeration {
            rows.push(ScalingRow { n, q, report: None, status: "skipped_cap".into() });
            continue;
        }
        let instance = cfg.build_instance()?;
        let schedule = CoefficientSchedule::new(n, k, d)?;
        let report = certified_report(&instance, &schedule, &cfg.power_opts(), &cfg.caps)?;
        if !report.all_converged() {
            any_nonconverged = true;
        }
        rows.push(ScalingRow { n, q, report: Some(report), status: "ok".into() });
    }

    // Least squares for log(ratio) against log(n) over the usable rows.
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.report
                .as_ref()
                .filter(|rep| rep.ratio.is_finite() && rep.ratio > 0.0)
                .map(|rep| ((r.n as f64).ln(), rep.ratio.ln()))
        })
        .collect();
    let (slope, residual) = fit_slope(&points);

    let mut csv = String::new();
    csv.push_str(
        "n,q,gamma_tilde_norm,max_mapped_norm,gamma_norm,max_masked_delta_norm,ratio,status\n",
    );
    for r in &rows {
        match &r.report {
            Some(rep) => {
                let max_mapped =
                    rep.mapped_norms.iter().map(|x| x.value).fold(0.0, f64::max);
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    r.n,
                    r.q,
                    rep.gamma_tilde_norm.value,
                    max_mapped,
                    rep.gamma_norm.value,
                    rep.max_delta_norm(),
                    rep.ratio,
                    r.status
                )
                .unwrap();
            }
            None => {
                writeln!(csv, "{},{},,,,,,{}", r.n, r.q, r.status).unwrap();
            }
        }
    }
    match (slope, residual) {
        (Some(s), Some(res)) => {
            writeln!(csv, "# slope={s} residual={res} target={}", target_exponent(d)).unwrap()
        }
        _ => writeln!(csv, "# slope=null residual=null target={}", target_exponent(d)).unwrap(),
    }

    write_output(out_path, &csv, out)?;
    if out_path.is_some() {
        // Echo the summary when the CSV went to a file.
        match slope {
            Some(s) => writeln!(out, "fitted slope {s:.4} over {} rows", points.len())?,
            None => writeln!(out, "slope undefined ({} usable rows)", points.len())?,
        }
    }
    Ok(ScalingOutput { rows, slope, residual, csv, any_nonconverged })
}

fn target_exponent(d: usize) -> f64 {
    (d as f64 + 1.0) / (d as f64 + 2.0)
}

fn fit_slope(points: &[(f64, f64)]) -> (Option<f64>, Option<f64>) {
    if points.len() < 2 {
        return (None, None);
    }
    let n = points.len() as f64;
    let xm = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
    if sxx == 0.0 {
        return (None, None);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = points
        .iter()
        .map(|p| {
            let e = p.1 - (slope * p.0 + intercept);
            e * e
        })
        .sum();
    (Some(slope), Some((rss / n).sqrt()))
}
