//! Python bindings for the revradon core.

use numpy::{IntoPyArray, PyArray1, PyArray2, PyArray3, PyReadonlyArray3, PyReadonlyArrayDyn};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::revradon::experiments::{self, PhantomSpec};
use ::revradon::geometry::{MuSpec, Profile as CoreProfile};
use ::revradon::inversion::{InversionConfig, MSolver};
use ::revradon::microlocal;
use ::revradon::operators::{volterra_matrix, FactoredModel, SinoGrid, Sinogram, Volume, VolumeGrid};
use ::revradon::Error;

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        4 => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A surface family in its `mu` form: sphere, spheroid or lemon.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Family {
    inner: MuSpec,
}

#[pymethods]
impl Family {
    #[staticmethod]
    fn sphere() -> Self {
        Family { inner: MuSpec::Sphere }
    }

    #[staticmethod]
    #[pyo3(signature = (c=2.0))]
    fn spheroid(c: f64) -> PyResult<Self> {
        let inner = MuSpec::Spheroid { c };
        inner.validate().map_err(py_err)?;
        Ok(Family { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (alpha=2.0))]
    fn lemon(alpha: f64) -> PyResult<Self> {
        let inner = MuSpec::Lemon { alpha };
        inner.validate().map_err(py_err)?;
        Ok(Family { inner })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn mu(&self, s: f64, t: f64) -> f64 {
        self.inner.mu(s, t)
    }

    fn tau(&self, s: f64, t: f64) -> f64 {
        self.inner.tau(s, t)
    }

    fn kappa(&self, s: f64, t: f64) -> f64 {
        self.inner.kappa(s, t)
    }

    fn profile(&self) -> Profile {
        Profile {
            inner: self.inner.profile(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Family({:?})", self.inner)
    }
}

/// A revolution profile `h(s, x)`.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Profile {
    inner: CoreProfile,
}

#[pymethods]
impl Profile {
    #[staticmethod]
    fn sphere() -> Self {
        Profile { inner: CoreProfile::Sphere }
    }

    #[staticmethod]
    #[pyo3(signature = (c=2.0))]
    fn spheroid(c: f64) -> Self {
        Profile {
            inner: CoreProfile::Spheroid { c },
        }
    }

    #[staticmethod]
    #[pyo3(signature = (alpha=2.0))]
    fn lemon(alpha: f64) -> Self {
        Profile {
            inner: CoreProfile::Lemon { alpha },
        }
    }

    #[staticmethod]
    fn cone() -> Self {
        Profile { inner: CoreProfile::Cone }
    }

    /// Parse the JSON form used in run configurations.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: CoreProfile =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(py_err)?;
        Ok(Profile { inner })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn h(&self, s: f64, x: f64) -> PyResult<f64> {
        self.inner.h(s, x).map_err(py_err)
    }

    /// `(h_s, h_x)`.
    fn grad(&self, s: f64, x: f64) -> PyResult<(f64, f64)> {
        self.inner.grad(s, x).map_err(py_err)
    }

    fn ratio_deriv(&self, s: f64, x: f64) -> PyResult<f64> {
        self.inner.ratio_deriv(s, x).map_err(py_err)
    }

    /// Audit the Bolker conditions; returns a dict with `passed` and
    /// per-condition verdicts.
    #[pyo3(signature = (s_range=None, x_resolution=64))]
    fn check_bolker<'py>(
        &self,
        py: Python<'py>,
        s_range: Option<(f64, f64)>,
        x_resolution: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let range = s_range.unwrap_or_else(|| microlocal::default_param_range(&self.inner));
        let r = microlocal::check_bolker(&self.inner, range, x_resolution, None).map_err(py_err)?;
        let out = PyDict::new(py);
        out.set_item("profile", &r.profile)?;
        out.set_item("passed", r.passed())?;
        let verdicts = PyDict::new(py);
        for v in &r.verdicts {
            let d = PyDict::new(py);
            d.set_item("passed", v.passed)?;
            d.set_item("witness", (v.witness_s, v.witness_x))?;
            d.set_item("worst_value", v.worst_value)?;
            verdicts.set_item(v.condition.label(), d)?;
        }
        out.set_item("verdicts", verdicts)?;
        Ok(out)
    }
}

/// `V_xi` assembled on the uniform grid `s`.
#[pyfunction]
fn volterra<'py>(
    py: Python<'py>,
    family: &Family,
    xi: f64,
    s: Vec<f64>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let v = volterra_matrix(&family.inner, xi, &s).map_err(py_err)?;
    let n = v.n();
    let arr = ndarray::Array2::from_shape_fn((n, n), |(i, j)| v.entries[(i, j)]);
    Ok(arr.into_pyarray(py))
}

/// `cond2(V_xi)` for each `xi`; `inf` marks numerically singular systems.
#[pyfunction]
fn condition_curve<'py>(
    py: Python<'py>,
    family: &Family,
    s: Vec<f64>,
    xi: Vec<f64>,
) -> PyResult<Bound<'py, PyArray1<f64>>> {
    let c = experiments::condition_curve(&family.inner, &s, &xi).map_err(py_err)?;
    let v: Vec<f64> = c.points.iter().map(|p| p.cond).collect();
    Ok(v.into_pyarray(py))
}

/// Mirror images of `point` in the tangent planes of the unit cylinder, as
/// rows `(theta, x1, x2, x3)`; the last row closes the curve.
#[pyfunction]
#[pyo3(signature = (point, theta_samples=360))]
fn predict_artifact_curve<'py>(
    py: Python<'py>,
    point: [f64; 3],
    theta_samples: usize,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let c = microlocal::predict_artifact_curve(point, theta_samples, &Default::default())
        .map_err(py_err)?;
    let arr = ndarray::Array2::from_shape_fn((c.samples.len(), 4), |(i, j)| {
        let s = &c.samples[i];
        if j == 0 {
            s.theta
        } else {
            s.point[j - 1]
        }
    });
    Ok(arr.into_pyarray(py))
}

/// Relative L2 error of two equally shaped arrays.
#[pyfunction]
fn rel_error(rec: PyReadonlyArrayDyn<'_, f64>, truth: PyReadonlyArrayDyn<'_, f64>) -> PyResult<f64> {
    let (r, t) = (rec.as_array(), truth.as_array());
    if r.shape() != t.shape() {
        return Err(PyValueError::new_err("shape mismatch"));
    }
    let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if tn == 0.0 {
        return Err(PyRuntimeError::new_err("relative error of a zero ground truth"));
    }
    Ok(r.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / tn)
}

/// Factored forward model and its inversion on one grid.
#[pyclass(frozen)]
struct Model {
    inner: FactoredModel,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (family, n=33, half_width_xy=1.0, half_width_z=5.0, s_min=0.2, s_max=2.2, n_theta=None, n_z=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        family: &Family,
        n: usize,
        half_width_xy: f64,
        half_width_z: f64,
        s_min: f64,
        s_max: f64,
        n_theta: Option<usize>,
        n_z: Option<usize>,
    ) -> PyResult<Self> {
        let g = VolumeGrid {
            n_xy: n,
            n_z: n_z.unwrap_or(n),
            half_width_xy,
            half_width_z,
        };
        let sg = SinoGrid::for_volume(&g, s_min, s_max, n_theta.unwrap_or(2 * n.max(2) - 2))
            .map_err(py_err)?;
        let inner = FactoredModel::new(&family.inner, &g, &sg).map_err(py_err)?;
        Ok(Model { inner })
    }

    #[getter]
    fn volume_shape(&self) -> [usize; 3] {
        self.inner.volume.shape()
    }

    #[getter]
    fn sinogram_shape(&self) -> [usize; 3] {
        self.inner.sino.shape()
    }

    /// Hollow cuboid (default) or, with `delta` set, a unit delta.
    #[pyo3(signature = (delta=None, half_widths=[0.45, 0.45, 0.9], wall=0.15))]
    fn phantom<'py>(
        &self,
        py: Python<'py>,
        delta: Option<[f64; 3]>,
        half_widths: [f64; 3],
        wall: f64,
    ) -> PyResult<Bound<'py, PyArray3<f64>>> {
        let spec = match delta {
            Some(position) => PhantomSpec::Delta { position },
            None => PhantomSpec::HollowCuboid {
                half_widths,
                wall,
                center: [0.0; 3],
            },
        };
        let v = experiments::make_phantom(
            &spec,
            self.inner.volume,
            self.inner.sino.s.min,
            &self.inner.sino.surface(),
        )
        .map_err(py_err)?;
        Ok(v.values.into_pyarray(py))
    }

    fn project<'py>(
        &self,
        py: Python<'py>,
        volume: PyReadonlyArray3<'_, f64>,
    ) -> PyResult<Bound<'py, PyArray3<f64>>> {
        let vol = Volume::new(volume.as_array().to_owned(), self.inner.volume).map_err(py_err)?;
        let sino = py.detach(|| self.inner.project(&vol)).map_err(py_err)?;
        Ok(sino.values.into_pyarray(py))
    }

    #[pyo3(signature = (sinogram, gamma, seed=0))]
    fn add_noise<'py>(
        &self,
        py: Python<'py>,
        sinogram: PyReadonlyArray3<'_, f64>,
        gamma: f64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyArray3<f64>>> {
        let s = Sinogram::new(sinogram.as_array().to_owned(), self.inner.sino).map_err(py_err)?;
        let n = experiments::add_noise(&s, gamma, seed).map_err(py_err)?;
        Ok(n.values.into_pyarray(py))
    }

    /// Invert data. `solver` is `"cgls_tv"` or `"landweber"`.
    #[pyo3(signature = (sinogram, alpha=1e-3, solver="cgls_tv", iterations=None, tv_weight=0.01))]
    fn reconstruct<'py>(
        &self,
        py: Python<'py>,
        sinogram: PyReadonlyArray3<'_, f64>,
        alpha: f64,
        solver: &str,
        iterations: Option<usize>,
        tv_weight: f64,
    ) -> PyResult<Bound<'py, PyArray3<f64>>> {
        let m_solver = match solver {
            "cgls_tv" => MSolver::CglsTv {
                cg_iterations: iterations.unwrap_or(30),
                tv_weight,
                denoise_interval: 5,
                tv_inner_iterations: 20,
            },
            "landweber" => MSolver::Landweber {
                iterations: iterations.unwrap_or(200),
                relaxation: None,
            },
            other => return Err(PyValueError::new_err(format!("unknown solver {other:?}"))),
        };
        let cfg = InversionConfig {
            volterra_alpha: alpha,
            alpha_schedule: None,
            m_solver,
        };
        let s = Sinogram::new(sinogram.as_array().to_owned(), self.inner.sino).map_err(py_err)?;
        let rec = py
            .detach(|| ::revradon::inversion::reconstruct_with(&self.inner, &s, &cfg))
            .map_err(py_err)?;
        Ok(rec.volume.values.into_pyarray(py))
    }
}

#[pymodule(name = "revradon")]
fn revradon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Family>()?;
    m.add_class::<Profile>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(volterra, m)?)?;
    m.add_function(wrap_pyfunction!(condition_curve, m)?)?;
    m.add_function(wrap_pyfunction!(predict_artifact_curve, m)?)?;
    m.add_function(wrap_pyfunction!(rel_error, m)?)?;
    Ok(())
}
