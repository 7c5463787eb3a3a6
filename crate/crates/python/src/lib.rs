//! Python bindings: build instances, evaluate the problem function, and
//! run the spectral certificate in-process.
//!
//! Usage from Python:
//!
//!     import oalab_py as oal
//!     inst = oal.Instance.kdist(q=9, k=2, n=3)
//!     value, witnesses = inst.evaluate([0, 1, 0])
//!     report = json.loads(inst.certificate_json(seed=1))

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use oalab::adversary::{
    build_operator, AdversaryOperator, CoefficientSchedule, Variant,
};
use oalab::algebra::{self, CyclicGroup, PrimeField};
use oalab::cli::report_json;
use oalab::oa::{self, check_consistency, ConsistencyOutcome, ProblemInstance};
use oalab::spectral::{certified_report, spectral_norm, PowerOpts};
use oalab::Caps;

fn err(e: oalab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_variant(variant: &str, coordinate: Option<usize>) -> PyResult<(Variant, Option<usize>)> {
    match (variant, coordinate) {
        ("plain", None) => Ok((Variant::Plain, None)),
        ("masked", None) => Ok((Variant::Masked, None)),
        ("mapped", Some(i)) => Ok((Variant::MappedAt(i), None)),
        ("delta", Some(i)) => Ok((Variant::Plain, Some(i))),
        ("masked_delta", Some(i)) => Ok((Variant::Masked, Some(i))),
        ("mapped" | "delta" | "masked_delta", None) => Err(PyValueError::new_err(
            "this variant needs a coordinate",
        )),
        ("plain" | "masked", Some(_)) => Err(PyValueError::new_err(
            "plain/masked variants take no coordinate",
        )),
        _ => Err(PyValueError::new_err(format!(
            "unknown variant `{variant}` (expected plain, masked, mapped, delta, masked_delta)"
        ))),
    }
}

/// An orthogonal-array search problem over `[q]^n`.
#[pyclass]
struct Instance {
    inner: ProblemInstance,
}

impl Instance {
    fn operator(
        &self,
        variant: &str,
        coordinate: Option<usize>,
    ) -> PyResult<AdversaryOperator> {
        let (base, delta) = parse_variant(variant, coordinate)?;
        let schedule = self.schedule()?;
        let op = build_operator(&self.inner, &schedule, base, &Caps::default()).map_err(err)?;
        match delta {
            Some(i) => op.with_delta(i).map_err(err),
            None => Ok(op),
        }
    }

    fn schedule(&self) -> PyResult<CoefficientSchedule> {
        CoefficientSchedule::new(self.inner.n(), self.inner.k(), self.inner.d()).map_err(err)
    }
}

#[pymethods]
impl Instance {
    /// Windows summing to t in Z_q.
    #[staticmethod]
    fn ksum(q: u32, k: usize, t: u32, n: usize) -> PyResult<Self> {
        let g = CyclicGroup::new(q).map_err(err)?;
        Ok(Self { inner: ProblemInstance::new(oa::gen_ksum(&g, k, t, n).map_err(err)?) })
    }

    /// Windows of k equal symbols.
    #[staticmethod]
    fn kdist(q: u32, k: usize, n: usize) -> PyResult<Self> {
        Ok(Self { inner: ProblemInstance::new(oa::gen_kdist(q, k, n).map_err(err)?) })
    }

    /// Windows matching a degree-<=deg polynomial at the window's own
    /// positions, over GF(q).
    #[staticmethod]
    #[pyo3(signature = (q, deg, k, n, rank_indexed = false))]
    fn ddegree(q: u32, deg: usize, k: usize, n: usize, rank_indexed: bool) -> PyResult<Self> {
        let f = PrimeField::new(q).map_err(err)?;
        let coll = if rank_indexed {
            oa::gen_ddegree_rank_indexed(&f, deg, k, n)
        } else {
            oa::gen_ddegree(&f, deg, k, n)
        }
        .map_err(err)?;
        Ok(Self { inner: ProblemInstance::new(coll) })
    }

    /// One fixed pattern per window, induced by a global string.
    #[staticmethod]
    fn pattern_global(n: usize, k: usize, q: u32, y: Vec<u16>) -> PyResult<Self> {
        let coll = oa::gen_pattern_from_global(n, k, q, &y).map_err(err)?;
        Ok(Self { inner: ProblemInstance::new(coll) })
    }

    /// Load a collection file (explicit listing or generator shorthand).
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        let coll = oa::format::parse(&text)
            .and_then(|p| p.into_collection())
            .map_err(err)?;
        Ok(Self { inner: ProblemInstance::new(coll) })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn q(&self) -> u32 {
        self.inner.q()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    /// The collection in the text file format.
    fn to_text(&self) -> String {
        oa::format::write_collection(self.inner.collection())
    }

    /// Evaluate f on an input; returns (value, witness subsets).
    fn evaluate(&self, x: Vec<u16>) -> PyResult<(bool, Vec<Vec<usize>>)> {
        self.inner.evaluate(&x).map_err(err)
    }

    /// None when consistent, else a witness description.
    fn consistency(&self) -> Option<String> {
        match check_consistency(self.inner.collection()) {
            ConsistencyOutcome::Consistent => None,
            ConsistencyOutcome::Witness(w) => Some(w.to_string()),
        }
    }

    /// (valid, total, fraction) over all q^n inputs.
    #[pyo3(signature = (cap = 10_000_000))]
    fn census(&self, cap: u128) -> PyResult<(u64, u64, f64)> {
        let c = self.inner.valid_column_census(cap).map_err(err)?;
        Ok((c.valid as u64, c.total as u64, c.fraction))
    }

    /// The weight-graded coefficients alpha_0 .. alpha_{n-k}.
    fn alphas(&self) -> PyResult<Vec<f64>> {
        Ok(self.schedule()?.values().to_vec())
    }

    /// (rows, cols) of an operator variant.
    #[pyo3(signature = (variant, coordinate = None))]
    fn operator_shape(&self, variant: &str, coordinate: Option<usize>) -> PyResult<(usize, usize)> {
        let op = self.operator(variant, coordinate)?;
        Ok((op.rows(), op.cols()))
    }

    /// Apply an operator variant to a vector of length q^n.
    #[pyo3(signature = (variant, v, coordinate = None))]
    fn matvec(&self, variant: &str, v: Vec<f64>, coordinate: Option<usize>) -> PyResult<Vec<f64>> {
        let op = self.operator(variant, coordinate)?;
        if v.len() != op.cols() {
            return Err(PyValueError::new_err(format!(
                "vector length {} != {}",
                v.len(),
                op.cols()
            )));
        }
        let mut out = vec![0.0; op.rows()];
        op.matvec(&v, &mut out);
        Ok(out)
    }

    /// Dense materialization of an operator variant as nested lists.
    #[pyo3(signature = (variant, coordinate = None))]
    fn dense(&self, variant: &str, coordinate: Option<usize>) -> PyResult<Vec<Vec<f64>>> {
        let op = self.operator(variant, coordinate)?;
        let dense = op.dense(&Caps::default()).map_err(err)?;
        Ok(dense.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    /// Power-iteration norm of an operator variant.
    #[pyo3(signature = (variant, coordinate = None, seed = 1, tolerance = 1e-9, max_iter = 20_000))]
    fn norm(
        &self,
        variant: &str,
        coordinate: Option<usize>,
        seed: u64,
        tolerance: f64,
        max_iter: usize,
    ) -> PyResult<(f64, usize, bool)> {
        let op = self.operator(variant, coordinate)?;
        let r = spectral_norm(&op, &PowerOpts { seed, tolerance, max_iter, ..PowerOpts::default() });
        Ok((r.value, r.iterations, r.converged))
    }

    /// Full certificate + inequality suite as a JSON string.
    #[pyo3(signature = (seed = 1, tolerance = 1e-9, max_iter = 20_000))]
    fn certificate_json(&self, seed: u64, tolerance: f64, max_iter: usize) -> PyResult<String> {
        let schedule = self.schedule()?;
        let opts = PowerOpts { seed, tolerance, max_iter, ..PowerOpts::default() };
        let report =
            certified_report(&self.inner, &schedule, &opts, &Caps::default()).map_err(err)?;
        Ok(report_json(&report))
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n={}, q={}, k={}, d={})",
            self.inner.n(),
            self.inner.q(),
            self.inner.k(),
            self.inner.d()
        )
    }
}

#[pyfunction]
fn binom(a: i64, b: i64) -> u128 {
    algebra::binom(a, b)
}

#[pyfunction]
fn is_prime(q: u64) -> bool {
    algebra::field_is_prime(q)
}

/// Closed-form schedule values alpha_0 .. alpha_{n-k} for (n, k, d).
#[pyfunction]
fn alphas(n: usize, k: usize, d: usize) -> PyResult<Vec<f64>> {
    Ok(CoefficientSchedule::new(n, k, d).map_err(err)?.values().to_vec())
}

#[pymodule]
fn oalab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Instance>()?;
    m.add_function(wrap_pyfunction!(binom, m)?)?;
    m.add_function(wrap_pyfunction!(is_prime, m)?)?;
    m.add_function(wrap_pyfunction!(alphas, m)?)?;
    Ok(())
}
