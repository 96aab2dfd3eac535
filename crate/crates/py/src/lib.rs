//! Python bindings for `geodex`. Reports and other structured results are
//! returned as plain Python dicts decoded from their JSON form.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use geodex::hypothesis::{self, DiagnosticConfig, TestKind};
use geodex::report::{self, RunConfig};
use geodex::stats::{self, PairedSample};
use geodex::synthetic::{self, SyntheticSpec};
use geodex::{graph, Point};

create_exception!(geodex_py, GeodexError, PyException, "Error raised by the geodex library.");

fn err(e: geodex::GeodexError) -> PyErr {
    GeodexError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A feature metric space declared by a JSON manifest.
#[pyclass(name = "MetricSpace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMetricSpace(geodex::MetricSpace);

impl PyMetricSpace {
    fn point(&self, value: &Bound<'_, PyAny>) -> PyResult<Point> {
        if let Ok(label) = value.extract::<String>() {
            return self.0.parse_point(&label).map_err(err);
        }
        let p = if self.0.is_scalar() {
            Point::Scalar(value.extract::<f64>()?)
        } else {
            Point::Node(value.extract::<usize>()?)
        };
        self.0.check_point(p).map_err(err)
    }
}

#[pymethods]
impl PyMetricSpace {
    #[new]
    fn new(manifest_json: &str) -> PyResult<Self> {
        geodex::MetricSpace::from_json(manifest_json).map(Self).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }

    #[getter]
    fn is_orderable(&self) -> bool {
        self.0.is_orderable()
    }

    /// Distance between two feature values: reals for scalar spaces, node
    /// indices or labels for labelled ones.
    fn distance(&self, a: &Bound<'_, PyAny>, b: &Bound<'_, PyAny>) -> PyResult<f64> {
        self.0.distance(self.point(a)?, self.point(b)?).map_err(err)
    }

    fn manifest<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.0.manifest())
    }

    fn __repr__(&self) -> String {
        format!("MetricSpace(kind={:?})", self.0.kind())
    }
}

/// Representation rows with a label and feature value per row.
#[pyclass(name = "EmbeddingSet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEmbeddingSet(geodex::EmbeddingSet);

#[pymethods]
impl PyEmbeddingSet {
    /// Builds a set from rows and values checked against `space`. Labels
    /// default to the row index.
    #[new]
    #[pyo3(signature = (rows, values, space, labels=None))]
    fn new(
        rows: Vec<Vec<f64>>,
        values: Vec<Bound<'_, PyAny>>,
        space: &PyMetricSpace,
        labels: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let labels = labels.unwrap_or_else(|| (0..rows.len()).map(|i| i.to_string()).collect());
        let values = values.iter().map(|v| space.point(v)).collect::<PyResult<Vec<_>>>()?;
        geodex::EmbeddingSet::new(rows, labels, values)
            .and_then(|s| s.bind(&space.0))
            .map(Self)
            .map_err(err)
    }

    /// Reads a dataset file bound to a manifest; `data` overrides the
    /// manifest's own data path.
    #[staticmethod]
    #[pyo3(signature = (manifest, data=None))]
    fn load(manifest: PathBuf, data: Option<PathBuf>) -> PyResult<(Self, PyMetricSpace)> {
        let (set, space, _, _) = report::load_inputs(data.as_deref(), &manifest).map_err(err)?;
        Ok((Self(set), PyMetricSpace(space)))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.0.labels().to_vec()
    }

    #[getter]
    fn is_normalized(&self) -> bool {
        self.0.is_normalized()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.to_rows()
    }

    /// Feature values: floats for scalar spaces, node indices otherwise.
    fn values<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.values())
    }

    fn normalize_rows(&self) -> PyResult<Self> {
        geodex::normalize_rows(&self.0).map(Self).map_err(err)
    }

    /// Projection onto the top `k` uncentered principal components, and the
    /// matching singular values.
    fn uncentered_pca(&self, k: usize) -> PyResult<(Self, Vec<f64>)> {
        let p = geodex::uncentered_pca(&self.0, k).map_err(err)?;
        Ok((Self(p.projected), p.singular_values))
    }

    fn __repr__(&self) -> String {
        format!("EmbeddingSet(n={}, dim={})", self.0.len(), self.0.dim())
    }
}

fn sample(x: Vec<f64>, y: Vec<f64>) -> PyResult<PairedSample> {
    PairedSample::new(x, y).map_err(err)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    stats::pearson(&sample(x, y)?).map_err(err)
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    stats::spearman(&sample(x, y)?).map_err(err)
}

#[pyfunction]
fn kendall_tau_b(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    stats::kendall_tau_b(&sample(x, y)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (x, y, seed=0))]
fn chatterjee_xi(x: Vec<f64>, y: Vec<f64>, seed: u64) -> PyResult<f64> {
    stats::chatterjee_xi(&sample(x, y)?, seed).map_err(err)
}

/// Smallest K whose union K-NN graph is connected, with that graph's edges
/// as `(i, j, weight)` triples.
#[pyfunction]
fn minimal_connected_k(rows: Vec<Vec<f64>>) -> PyResult<(usize, Vec<(usize, usize, f64)>)> {
    let points: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let (k, g) = graph::minimal_connected_k(&points).map_err(err)?;
    Ok((k, g.edges().to_vec()))
}

/// Graph geodesic distances from `source` on the union K-NN graph.
#[pyfunction]
fn shortest_paths(rows: Vec<Vec<f64>>, k: usize, source: usize) -> PyResult<Vec<f64>> {
    let points: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let g = graph::build_knn(&points, k).map_err(err)?;
    graph::shortest_paths_from(&g, source).map_err(err)
}

fn diagnostic_config(
    k: Option<usize>,
    components: Option<usize>,
    eps_pct: f64,
    seed: u64,
    pairs_budget: usize,
) -> DiagnosticConfig {
    DiagnosticConfig {
        k,
        components,
        eps_pct,
        seed,
        pair_budget: pairs_budget,
        ..DiagnosticConfig::default()
    }
}

macro_rules! diagnostic {
    ($name:ident, $op:path) => {
        #[pyfunction]
        #[pyo3(signature = (set, space, k=None, eps_pct=10.0, seed=0, pairs_budget=250_000))]
        fn $name<'py>(
            py: Python<'py>,
            set: &PyEmbeddingSet,
            space: &PyMetricSpace,
            k: Option<usize>,
            eps_pct: f64,
            seed: u64,
            pairs_budget: usize,
        ) -> PyResult<Bound<'py, PyAny>> {
            let config = diagnostic_config(k, None, eps_pct, seed, pairs_budget);
            let r = py.detach(|| $op(&set.0, &space.0, &config)).map_err(err)?;
            to_py(py, &r)
        }
    };
}

diagnostic!(homeomorphism_rank_test, hypothesis::homeomorphism_rank_test);
diagnostic!(direct_isometry_test, hypothesis::direct_isometry_test);
diagnostic!(geodesic_isometry_test, hypothesis::geodesic_isometry_test);

/// Full pipeline on files. Writes the report bundle when `out` is given and
/// returns the report either way.
#[pyfunction]
#[pyo3(signature = (data, manifest, out=None, k=None, components=Some(3), eps_pct=10.0, seed=0, pairs_budget=250_000))]
#[allow(clippy::too_many_arguments)]
fn run_diagnostics<'py>(
    py: Python<'py>,
    data: PathBuf,
    manifest: PathBuf,
    out: Option<PathBuf>,
    k: Option<usize>,
    components: Option<usize>,
    eps_pct: f64,
    seed: u64,
    pairs_budget: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mut config = RunConfig::new(data, manifest);
    config.tests = vec![
        TestKind::Homeomorphism,
        TestKind::DirectIsometry,
        TestKind::GeodesicIsometry,
    ];
    config.diagnostics = diagnostic_config(k, components, eps_pct, seed, pairs_budget);
    let r = py
        .detach(|| match &out {
            Some(dir) => report::cmd_run_diagnostics(&config, dir),
            None => report::run_diagnostics(&config),
        })
        .map_err(err)?;
    to_py(py, &r)
}

/// Generates a synthetic dataset from a JSON spec such as
/// `{"kind": "arc", "alpha": 2, "n": 200, "dim": 64, "seed": 0}`.
#[pyfunction]
fn generate(spec_json: &str) -> PyResult<(PyEmbeddingSet, PyMetricSpace)> {
    let spec: SyntheticSpec = serde_json::from_str(spec_json).map_err(|e| err(e.into()))?;
    let g = synthetic::generate(&spec).map_err(err)?;
    Ok((PyEmbeddingSet(g.set), PyMetricSpace(g.space)))
}

/// Curve-length check for an arc or plane circle spec.
#[pyfunction]
#[pyo3(signature = (spec_json, resolution=10_000))]
fn validate_theorem1<'py>(py: Python<'py>, spec_json: &str, resolution: usize) -> PyResult<Bound<'py, PyAny>> {
    let spec: SyntheticSpec = serde_json::from_str(spec_json).map_err(|e| err(e.into()))?;
    let check = synthetic::validate_theorem1(&spec, resolution).map_err(err)?;
    to_py(py, &check)
}

#[pymodule]
fn geodex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", geodex::VERSION)?;
    m.add("GeodexError", m.py().get_type::<GeodexError>())?;
    m.add_class::<PyMetricSpace>()?;
    m.add_class::<PyEmbeddingSet>()?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau_b, m)?)?;
    m.add_function(wrap_pyfunction!(chatterjee_xi, m)?)?;
    m.add_function(wrap_pyfunction!(minimal_connected_k, m)?)?;
    m.add_function(wrap_pyfunction!(shortest_paths, m)?)?;
    m.add_function(wrap_pyfunction!(homeomorphism_rank_test, m)?)?;
    m.add_function(wrap_pyfunction!(direct_isometry_test, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic_isometry_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(validate_theorem1, m)?)?;
    Ok(())
}
