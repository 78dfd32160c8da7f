//! Python bindings: meshes, problem data, the P1 space with its solvers, and
//! the experiment runner.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mixedctl::harness::{self, Experiment, ExperimentConfig, FieldExpr};
use mixedctl::optctl::{self, FixedPointOptions, OptimalSolution};
use mixedctl::pde::{self, Field};
use mixedctl::{estimate_constants, Error, FeSpace, NodalField, NormKind, ProblemSpec, Side, TraceField};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NotConverged { .. } | Error::FixedPointMaxIter { .. } | Error::NotPositiveDefinite { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for mixedctl::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "Mesh", frozen, module = "pymixedctl")]
struct PyMesh {
    inner: Arc<mixedctl::Mesh>,
}

#[pymethods]
impl PyMesh {
    #[new]
    #[pyo3(signature = (n, gamma1_sides = vec!["bottom".to_string()]))]
    fn new(n: usize, gamma1_sides: Vec<String>) -> PyResult<Self> {
        let sides = gamma1_sides
            .iter()
            .map(|s| s.parse::<Side>())
            .collect::<mixedctl::Result<Vec<_>>>()
            .py()?;
        Ok(Self {
            inner: mixedctl::Mesh::structured(n, &sides).py()?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_triangles(&self) -> usize {
        self.inner.triangles().len()
    }

    #[getter]
    fn num_trace_dofs(&self) -> usize {
        self.inner.dofs().num_trace()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|v| (v[0], v[1])).collect()
    }

    fn triangles(&self) -> Vec<(usize, usize, usize)> {
        self.inner.triangles().iter().map(|t| (t[0], t[1], t[2])).collect()
    }

    fn gamma2_trace_dofs(&self) -> Vec<usize> {
        self.inner.dofs().gamma2_trace_dofs.clone()
    }

    fn refine(&self) -> Self {
        Self {
            inner: self.inner.refine(),
        }
    }

    /// Nodal interpolant of a Python callable `f(x, y)`.
    fn interpolate(&self, f: Bound<'_, PyAny>) -> PyResult<Vec<f64>> {
        let mut out = Vec::with_capacity(self.inner.num_vertices());
        for v in self.inner.vertices() {
            out.push(f.call1((v[0], v[1]))?.extract::<f64>()?);
        }
        Ok(NodalField::new(self.inner.clone(), out).py()?.into_coeffs())
    }

    fn __repr__(&self) -> String {
        format!("Mesh(n={}, gamma1_sides={:?})", self.inner.n(), self.inner.gamma1_sides())
    }
}

/// A float, a JSON expression string, or a Python callable `f(x, y)`.
fn field_from_py(obj: &Bound<'_, PyAny>) -> PyResult<Field> {
    if let Ok(v) = obj.extract::<f64>() {
        return Ok(Arc::new(move |_, _| v));
    }
    if let Ok(s) = obj.extract::<String>() {
        let e: FieldExpr = serde_json::from_str(&s).map_err(|e| PyValueError::new_err(e.to_string()))?;
        return Ok(e.expr().to_field());
    }
    if obj.is_callable() {
        let f: Py<PyAny> = obj.clone().unbind();
        // Python errors surface as NaN, which the assembly rejects
        return Ok(Arc::new(move |x, y| {
            Python::attach(|py| f.call1(py, (x, y)).and_then(|r| r.extract::<f64>(py)).unwrap_or(f64::NAN))
        }));
    }
    Err(PyValueError::new_err("field must be a float, a JSON expression string or a callable"))
}

#[pyclass(name = "Problem", frozen, module = "pymixedctl")]
struct PyProblem {
    inner: ProblemSpec,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (g, z_d, b, m, alpha = None))]
    fn new(g: Bound<'_, PyAny>, z_d: Bound<'_, PyAny>, b: f64, m: f64, alpha: Option<f64>) -> PyResult<Self> {
        let spec = ProblemSpec::new(field_from_py(&g)?, field_from_py(&z_d)?, b, m).py()?;
        let spec = match alpha {
            Some(a) => spec.with_alpha(a).py()?,
            None => spec,
        };
        Ok(Self { inner: spec })
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    #[pyo3(name = "M")]
    fn m(&self) -> f64 {
        self.inner.m
    }

    #[getter]
    fn alpha(&self) -> Option<f64> {
        self.inner.alpha
    }

    fn with_alpha(&self, alpha: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_alpha(alpha).py()?,
        })
    }

    fn dirichlet(&self) -> Self {
        Self {
            inner: self.inner.dirichlet(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Problem(b={}, M={}, alpha={:?})", self.inner.b, self.inner.m, self.inner.alpha)
    }
}

fn norm_kind(s: &str) -> PyResult<NormKind> {
    match s {
        "H" | "h" => Ok(NormKind::H),
        "V" | "v" => Ok(NormKind::V),
        "Q" | "q" => Ok(NormKind::Q),
        _ => Err(PyValueError::new_err(format!("unknown norm {s:?}; expected H, V or Q"))),
    }
}

fn solution_dict<'py>(py: Python<'py>, s: OptimalSolution) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("q", s.q_opt.into_coeffs())?;
    d.set_item("u", s.u_opt.into_coeffs())?;
    d.set_item("p", s.p_opt.into_coeffs())?;
    d.set_item("cost", s.cost)?;
    d.set_item("gradient_norm", s.gradient_norm)?;
    d.set_item("iterations", s.iterations)?;
    d.set_item("contraction_ratios", s.contraction_ratios)?;
    d.set_item("cost_history", s.cost_history)?;
    Ok(d)
}

/// The P1 space on a mesh, with its assembled matrices and factor caches.
#[pyclass(name = "Space", frozen, module = "pymixedctl")]
struct PySpace {
    inner: Arc<FeSpace>,
}

impl PySpace {
    fn trace(&self, q: Vec<f64>) -> PyResult<TraceField> {
        TraceField::new(self.inner.mesh().clone(), q).py()
    }

    fn nodal(&self, u: Vec<f64>) -> PyResult<NodalField> {
        NodalField::new(self.inner.mesh().clone(), u).py()
    }
}

#[pymethods]
impl PySpace {
    #[new]
    fn new(mesh: &PyMesh) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(FeSpace::new(mesh.inner.clone()).py()?),
        })
    }

    #[getter]
    fn mesh(&self) -> PyMesh {
        PyMesh {
            inner: self.inner.mesh().clone(),
        }
    }

    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = py.detach(|| estimate_constants(&self.inner)).py()?;
        let d = PyDict::new(py);
        d.set_item("lambda_h", c.lambda_h)?;
        d.set_item("lambda1_h", c.lambda1_h)?;
        d.set_item("gamma0_norm_h", c.gamma0_norm_h)?;
        d.set_item("threshold", c.contraction_threshold())?;
        d.set_item("n", c.mesh_n)?;
        Ok(d)
    }

    fn norm(&self, u: Vec<f64>, kind: &str) -> PyResult<f64> {
        self.inner.norm(&self.nodal(u)?, norm_kind(kind)?).py()
    }

    fn norm_q(&self, q: Vec<f64>) -> PyResult<f64> {
        self.inner.norm_q(&self.trace(q)?).py()
    }

    fn solve_state(&self, problem: &PyProblem, q: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(pde::solve_state(&self.inner, &problem.inner, &self.trace(q)?).py()?.into_coeffs())
    }

    fn solve_adjoint(&self, problem: &PyProblem, u: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(pde::solve_adjoint(&self.inner, &problem.inner, &self.nodal(u)?).py()?.into_coeffs())
    }

    fn cost(&self, problem: &PyProblem, q: Vec<f64>) -> PyResult<f64> {
        optctl::cost(&self.inner, &problem.inner, &self.trace(q)?).py()
    }

    fn gradient(&self, problem: &PyProblem, q: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(optctl::gradient(&self.inner, &problem.inner, &self.trace(q)?).py()?.into_coeffs())
    }

    fn fixed_point_map(&self, problem: &PyProblem, q: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(optctl::fixed_point_map(&self.inner, &problem.inner, &self.trace(q)?).py()?.into_coeffs())
    }

    #[pyo3(signature = (problem, q0 = None, tol = optctl::DEFAULT_TOL, max_iter = optctl::DEFAULT_MAX_ITER))]
    fn solve_fixed_point<'py>(
        &self,
        py: Python<'py>,
        problem: &PyProblem,
        q0: Option<Vec<f64>>,
        tol: f64,
        max_iter: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let opts = FixedPointOptions {
            q0: q0.map(|q| self.trace(q)).transpose()?,
            tol,
            max_iter,
            constants: None,
        };
        let sol = optctl::solve_optimal_fixed_point(&self.inner, &problem.inner, &opts).py()?;
        solution_dict(py, sol)
    }

    fn solve_reduced<'py>(&self, py: Python<'py>, problem: &PyProblem) -> PyResult<Bound<'py, PyDict>> {
        let sol = optctl::solve_optimal_reduced(&self.inner, &problem.inner).py()?;
        solution_dict(py, sol)
    }
}

fn experiment(name: &str) -> PyResult<Experiment> {
    Ok(match name.replace('_', "-").as_str() {
        "state-conv" => Experiment::StateConv,
        "control-conv" => Experiment::ControlConv,
        "alpha-sweep" => Experiment::AlphaSweep,
        "diagram" => Experiment::Diagram,
        "constants" => Experiment::Constants,
        _ => return Err(PyValueError::new_err(format!("unknown experiment {name:?}"))),
    })
}

/// Runs an experiment; returns `(passed, report_csv, verdicts_csv)`.
#[pyfunction]
#[pyo3(signature = (name, config = None, seed = 0))]
fn run_experiment(py: Python<'_>, name: &str, config: Option<&str>, seed: u64) -> PyResult<(bool, String, String)> {
    let exp = experiment(name)?;
    let cfg = match config {
        Some(text) => ExperimentConfig::from_json_overlay(exp, text),
        None => Ok(ExperimentConfig::default_for(exp)),
    }
    .py()?;
    let report = py.detach(|| harness::run(exp, &cfg, seed)).py()?;
    Ok((report.passed(), report.to_csv(), report.verdicts_csv()))
}

#[pymodule]
fn pymixedctl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySpace>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
