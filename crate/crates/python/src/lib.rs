//! Python bindings: outcome cdfs, target functionals, the closed-form toy
//! model, lambda sweeps with budget selection, and the simulation harness.

use std::fs::File;
use std::io::BufReader;

use fairpol::distributions::{StepCdf, SupportInterval};
use fairpol::functionals::{self, SimilarityMeasure, TargetFunctional};
use fairpol::io::{read_sample_csv, write_sample_csv, SampleCsvOptions};
use fairpol::optimizer::OptimizerConfig;
use fairpol::oracle::{self, Mechanism, ToyParams};
use fairpol::selection::{self, interpolate_value, select_lambda_budget, Estimator, LambdaGrid, LambdaPath};
use fairpol::simharness::{self, SimConfig};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: fairpol::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn support(bounds: (f64, f64)) -> PyResult<SupportInterval> {
    SupportInterval::new(bounds.0, bounds.1).map_err(err)
}

fn toy(p: f64, lam: f64) -> PyResult<ToyParams> {
    ToyParams::new(p, lam).map_err(err)
}

/// Right-continuous step cdf on a bounded support.
#[pyclass(name = "StepCdf", module = "fairpol", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyStepCdf {
    inner: StepCdf,
}

#[pymethods]
impl PyStepCdf {
    #[new]
    #[pyo3(signature = (points, masses, support = (0.0, 1.0)))]
    fn new(points: Vec<f64>, masses: Vec<f64>, support: (f64, f64)) -> PyResult<Self> {
        if points.len() != masses.len() {
            return Err(PyValueError::new_err("points and masses differ in length"));
        }
        let inner = StepCdf::from_atoms(self::support(support)?, points.into_iter().zip(masses)).map_err(err)?;
        Ok(Self { inner })
    }

    /// Empirical cdf of `values`.
    #[staticmethod]
    #[pyo3(signature = (values, support = (0.0, 1.0)))]
    fn from_samples(values: Vec<f64>, support: (f64, f64)) -> PyResult<Self> {
        let inner = StepCdf::from_samples(&values, self::support(support)?).map_err(err)?;
        Ok(Self { inner })
    }

    fn __call__(&self, y: f64) -> f64 {
        self.inner.eval(y)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn points(&self) -> Vec<f64> {
        self.inner.points().to_vec()
    }

    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.inner.masses().to_vec()
    }

    fn ks_distance(&self, other: &PyStepCdf) -> PyResult<f64> {
        self.inner.ks_distance(&other.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("StepCdf(atoms={})", self.inner.len())
    }
}

#[pyfunction]
fn gini_welfare(cdf: &PyStepCdf) -> f64 {
    functionals::gini_welfare(&cdf.inner)
}

#[pyfunction]
fn mean(cdf: &PyStepCdf) -> f64 {
    functionals::mean(&cdf.inner)
}

#[pyfunction]
fn quantile(cdf: &PyStepCdf, tau: f64) -> PyResult<f64> {
    functionals::quantile(&cdf.inner, tau).map_err(err)
}

/// Penalty weight at which the toy optimum jumps from 0 to 1/2.
#[pyfunction]
#[pyo3(signature = (p = 0.75))]
fn toy_threshold(p: f64) -> f64 {
    oracle::toy_threshold(p)
}

#[pyfunction]
fn toy_objective(delta: f64, p: f64, lam: f64) -> PyResult<f64> {
    Ok(oracle::toy_objective(delta, toy(p, lam)?))
}

#[pyfunction]
fn toy_max_value(p: f64, lam: f64) -> PyResult<f64> {
    Ok(oracle::toy_max_value(toy(p, lam)?))
}

#[pyfunction]
fn toy_argmax(p: f64, lam: f64) -> PyResult<Vec<f64>> {
    Ok(oracle::toy_argmax(toy(p, lam)?))
}

/// Training sample with outcome `y`, covariate `x`, group `z` and treatment `d`.
#[pyclass(name = "Sample", module = "fairpol", frozen)]
pub struct PySample {
    inner: fairpol::estimation::TrainingSample,
}

#[pymethods]
impl PySample {
    /// Reads a `y,x,z,d` CSV file.
    #[staticmethod]
    #[pyo3(signature = (path, support = (0.0, 1.0), rescale = false))]
    fn read_csv(path: &str, support: (f64, f64), rescale: bool) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        let opts = SampleCsvOptions { support: self::support(support)?, rescale, ..Default::default() };
        let inner = read_sample_csv(BufReader::new(file), &opts).map_err(err)?;
        Ok(Self { inner })
    }

    /// Draws from the two-group toy model.
    #[staticmethod]
    #[pyo3(signature = (n, p = 0.75, mechanism = "A1", seed = 0))]
    fn toy(n: usize, p: f64, mechanism: &str, seed: u64) -> PyResult<Self> {
        let mechanism: Mechanism = mechanism.parse().map_err(PyValueError::new_err)?;
        let inner = oracle::toy_sample(n, p, mechanism, seed).map_err(err)?;
        Ok(Self { inner })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        let file = File::create(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        write_sample_csv(&self.inner, file).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn x_levels(&self) -> Vec<String> {
        self.inner.space().x_levels().to_vec()
    }

    #[getter]
    fn z_levels(&self) -> Vec<String> {
        self.inner.space().z_levels().to_vec()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.space().k()
    }
}

/// Maximizers of the penalized objective along a lambda grid.
#[pyclass(name = "LambdaPath", module = "fairpol", frozen)]
pub struct PyLambdaPath {
    inner: LambdaPath,
}

#[pymethods]
impl PyLambdaPath {
    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.grid.values().to_vec()
    }

    #[getter]
    fn obj_values(&self) -> Vec<f64> {
        self.inner.obj_values()
    }

    #[getter]
    fn target_values(&self) -> Vec<f64> {
        self.inner.target_values()
    }

    #[getter]
    fn max_unfairness(&self) -> Vec<f64> {
        self.inner.entries.iter().map(|e| e.max_unfairness).collect()
    }

    /// Rule at grid index `i` as a covariate-by-treatment matrix.
    fn rule(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        let entry = self.inner.entries.get(i).ok_or_else(|| PyValueError::new_err(format!("no grid index {i}")))?;
        Ok(entry.rule.rows().map(<[f64]>::to_vec).collect())
    }

    /// Piecewise-linear value function at `lam`.
    fn interpolate(&self, lam: f64) -> PyResult<f64> {
        interpolate_value(&self.inner, lam).map_err(err)
    }

    /// Largest grid lambda whose estimated welfare loss stays within budget.
    fn select<'py>(&self, py: Python<'py>, beta: f64) -> PyResult<Bound<'py, PyDict>> {
        let sel = select_lambda_budget(&self.inner, beta).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("beta", sel.beta)?;
        d.set_item("c_n", sel.c_n)?;
        d.set_item("threshold", sel.threshold)?;
        d.set_item("chosen_lambda", sel.chosen_lambda)?;
        d.set_item("chosen_index", sel.chosen_index)?;
        d.set_item("deltas", sel.deltas.iter().map(|&(_, v)| v).collect::<Vec<f64>>())?;
        Ok(d)
    }

    fn __len__(&self) -> usize {
        self.inner.entries.len()
    }
}

#[pyfunction]
#[pyo3(signature = (sample, m = 49, target = "gini", similarity = "ks", estimator = "plugin", seed = 0))]
fn sweep(
    sample: &PySample,
    m: usize,
    target: &str,
    similarity: &str,
    estimator: &str,
    seed: u64,
) -> PyResult<PyLambdaPath> {
    let target: TargetFunctional = target.parse().map_err(PyValueError::new_err)?;
    let similarity: SimilarityMeasure = similarity.parse().map_err(PyValueError::new_err)?;
    let estimator = match estimator {
        "plugin" => Estimator::Plugin,
        "ipw-estimated" => Estimator::IpwEstimated,
        other => return Err(PyValueError::new_err(format!("unknown estimator {other:?}"))),
    };
    let grid = LambdaGrid::uniform(m).map_err(err)?;
    let cfg = OptimizerConfig::with_seed(seed);
    let inner = selection::sweep(&sample.inner, &grid, &target, &similarity, &cfg, &estimator).map_err(err)?;
    Ok(PyLambdaPath { inner })
}

/// Monte Carlo regret study; returns one dict per (n, mechanism, lambda) cell.
#[pyfunction]
#[pyo3(signature = (sizes, mechanisms = vec!["A1".to_owned(), "A2".to_owned()], replications = 100, m = 4, p = 0.75, seed = 0))]
fn simulate<'py>(
    py: Python<'py>,
    sizes: Vec<usize>,
    mechanisms: Vec<String>,
    replications: usize,
    m: usize,
    p: f64,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mechanisms = mechanisms
        .iter()
        .map(|s| s.parse::<Mechanism>().map_err(PyValueError::new_err))
        .collect::<PyResult<Vec<_>>>()?;
    let cfg = SimConfig {
        sample_sizes: sizes,
        mechanisms,
        grid: LambdaGrid::uniform(m).map_err(err)?,
        replications,
        p,
        seed,
        optimizer: OptimizerConfig::with_seed(seed),
    };
    let result = py.detach(|| simharness::run_simulation(&cfg)).map_err(err)?;
    result
        .aggregates
        .iter()
        .map(|a| {
            let d = PyDict::new(py);
            d.set_item("n", a.n)?;
            d.set_item("mechanism", a.mechanism.to_string())?;
            d.set_item("lambda", a.lambda)?;
            d.set_item("median_delta_hat", a.delta_hat.median)?;
            d.set_item("mean_regret", a.regret.mean)?;
            d.set_item("sd_regret", a.regret.sd)?;
            Ok(d)
        })
        .collect()
}

#[pymodule(name = "fairpol")]
fn fairpol_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStepCdf>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyLambdaPath>()?;
    m.add_function(wrap_pyfunction!(gini_welfare, m)?)?;
    m.add_function(wrap_pyfunction!(mean, m)?)?;
    m.add_function(wrap_pyfunction!(quantile, m)?)?;
    m.add_function(wrap_pyfunction!(toy_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(toy_objective, m)?)?;
    m.add_function(wrap_pyfunction!(toy_max_value, m)?)?;
    m.add_function(wrap_pyfunction!(toy_argmax, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
