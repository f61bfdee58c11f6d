//! Python bindings: images are 2D float64 numpy arrays, operators are
//! opaque handles.

use numpy::ndarray::Array2;
use numpy::{IntoPyArray, PyArray1, PyArray2, PyReadonlyArray1, PyReadonlyArray2};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wavblur::kernel::Kernel1d;
use wavblur::pattern::{build_theta_masked, generate_mask};
use wavblur::restore::{estimate_operator_norm, tv_value};
use wavblur::theta::decay::verify_decay_1d;
use wavblur::theta::{
    build_theta, build_theta_thresholded, load_theta, operator_error, save_theta,
    threshold_theta, ThetaOperator,
};
use wavblur::wavelet::{self, default_levels};
use wavblur::{Error, ExactOperator, Image, Layout, NeighborhoodSpec, SparseTheta, WaveletCoeffs, WaveletFamily};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_image(a: PyReadonlyArray2<'_, f64>) -> PyResult<Image> {
    let view = a.as_array();
    let (h, w) = view.dim();
    Image::new(h, w, view.iter().copied().collect()).map_err(err)
}

fn to_array<'py>(py: Python<'py>, img: Image) -> Bound<'py, PyArray2<f64>> {
    let (h, w) = (img.height(), img.width());
    Array2::from_shape_vec((h, w), img.into_data())
        .expect("image length is height * width")
        .into_pyarray(py)
}

fn family(name: &str) -> PyResult<WaveletFamily> {
    WaveletFamily::from_name(name).map_err(err)
}

/// Spatially varying Gaussian blur on an `n x n` grid.
#[pyclass(name = "KernelSpec", frozen)]
struct PyKernel {
    spec: wavblur::KernelSpec,
    exact: ExactOperator,
}

impl PyKernel {
    fn wrap(spec: wavblur::KernelSpec) -> Self {
        let exact = ExactOperator::new(&spec);
        PyKernel { spec, exact }
    }
}

#[pymethods]
impl PyKernel {
    /// Variance grows linearly from `sigma_min^2` (top row) to
    /// `sigma_max^2` (bottom row).
    #[staticmethod]
    #[pyo3(signature = (size, sigma_min=0.8, sigma_max=3.0, truncation=4.0))]
    fn vertical(size: usize, sigma_min: f64, sigma_max: f64, truncation: f64) -> PyResult<Self> {
        wavblur::KernelSpec::vertical(size, sigma_min, sigma_max, truncation)
            .map(Self::wrap)
            .map_err(err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        wavblur::KernelSpec::parse(text).map(Self::wrap).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        wavblur::KernelSpec::load(path).map(Self::wrap).map_err(err)
    }

    #[getter]
    fn size(&self) -> usize {
        self.spec.size
    }

    fn to_text(&self) -> String {
        self.spec.to_text(None)
    }

    fn apply<'py>(&self, py: Python<'py>, img: PyReadonlyArray2<'py, f64>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let out = self.exact.apply(&to_image(img)?).map_err(err)?;
        Ok(to_array(py, out))
    }

    fn apply_adjoint<'py>(&self, py: Python<'py>, img: PyReadonlyArray2<'py, f64>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let out = self.exact.apply_adjoint(&to_image(img)?).map_err(err)?;
        Ok(to_array(py, out))
    }

    fn __repr__(&self) -> String {
        format!("KernelSpec({})", self.spec.id())
    }
}

/// Sparse wavelet-domain operator matrix.
#[pyclass(name = "Theta", frozen)]
struct PyTheta {
    theta: SparseTheta,
}

#[pymethods]
impl PyTheta {
    /// Full operator, or only the `k * n^2` largest entries when `k` is given.
    #[staticmethod]
    #[pyo3(signature = (kernel, wavelet="db2", levels=None, k=None))]
    fn build(py: Python<'_>, kernel: &PyKernel, wavelet: &str, levels: Option<usize>, k: Option<usize>) -> PyResult<Self> {
        let fam = family(wavelet)?;
        let levels = levels.unwrap_or_else(|| default_levels(kernel.spec.size));
        let spec = kernel.spec.clone();
        let theta = py
            .detach(|| match k {
                Some(k) => build_theta_thresholded(&spec, &fam, levels, k),
                None => build_theta(&spec, &fam, levels),
            })
            .map_err(err)?;
        Ok(PyTheta { theta })
    }

    /// Operator restricted to the pattern of a neighbourhood text.
    #[staticmethod]
    #[pyo3(signature = (kernel, neighborhood, wavelet="db2", levels=None))]
    fn from_pattern(py: Python<'_>, kernel: &PyKernel, neighborhood: &str, wavelet: &str, levels: Option<usize>) -> PyResult<Self> {
        let fam = family(wavelet)?;
        let n = kernel.spec.size;
        let levels = levels.unwrap_or_else(|| default_levels(n));
        let hood = NeighborhoodSpec::parse(neighborhood).map_err(err)?;
        let mask = generate_mask(&hood, &Layout::new(n, n, levels).map_err(err)?).map_err(err)?;
        let spec = kernel.spec.clone();
        let theta = py.detach(|| build_theta_masked(&spec, &mask, &fam, levels)).map_err(err)?;
        Ok(PyTheta { theta })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        load_theta(path).map(|theta| PyTheta { theta }).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_theta(&self.theta, path).map_err(err)
    }

    fn threshold(&self, k: usize) -> PyResult<Self> {
        threshold_theta(&self.theta, k).map(|theta| PyTheta { theta }).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.theta.dim()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.theta.nnz()
    }

    #[getter]
    fn density(&self) -> f64 {
        self.theta.density()
    }

    #[getter]
    fn wavelet(&self) -> String {
        self.theta.meta().family.clone()
    }

    #[getter]
    fn levels(&self) -> usize {
        self.theta.meta().levels
    }

    fn apply<'py>(&self, py: Python<'py>, img: PyReadonlyArray2<'py, f64>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let mut op = ThetaOperator::from_theta(&self.theta).map_err(err)?;
        let out = op.apply_image(&to_image(img)?).map_err(err)?;
        Ok(to_array(py, out))
    }

    fn apply_adjoint<'py>(&self, py: Python<'py>, img: PyReadonlyArray2<'py, f64>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let mut op = ThetaOperator::from_theta(&self.theta).map_err(err)?;
        let out = op.apply_adjoint_image(&to_image(img)?).map_err(err)?;
        Ok(to_array(py, out))
    }

    /// Largest relative error `|Hu - H~u| / |Hu|` over random unit inputs.
    #[pyo3(signature = (kernel, trials=10, seed=0))]
    fn operator_error(&self, kernel: &PyKernel, trials: usize, seed: u64) -> PyResult<f64> {
        operator_error(&self.theta, &kernel.spec, trials, seed).map_err(err)
    }

    #[pyo3(signature = (iters=50))]
    fn operator_norm(&self, iters: usize) -> PyResult<f64> {
        estimate_operator_norm(&self.theta, iters).map_err(err)
    }

    /// `(rows, cols, values)` of the stored entries.
    #[allow(clippy::type_complexity)]
    fn triplets<'py>(
        &self,
        py: Python<'py>,
    ) -> (Bound<'py, PyArray1<u64>>, Bound<'py, PyArray1<u64>>, Bound<'py, PyArray1<f64>>) {
        let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for (row, col, val) in self.theta.matrix().iter() {
            r.push(row as u64);
            c.push(col as u64);
            v.push(val);
        }
        (r.into_pyarray(py), c.into_pyarray(py), v.into_pyarray(py))
    }

    fn __repr__(&self) -> String {
        let m = self.theta.meta();
        format!("Theta(dim={}, nnz={}, wavelet={}, levels={}, budget={})", self.theta.dim(), self.theta.nnz(), m.family, m.levels, m.budget)
    }
}

/// Piecewise-smooth synthetic test image.
#[pyfunction]
fn test_scene(py: Python<'_>, n: usize) -> PyResult<Bound<'_, PyArray2<f64>>> {
    Ok(to_array(py, Image::test_scene(n).map_err(err)?))
}

/// Forward transform; coefficients in canonical order.
#[pyfunction]
#[pyo3(signature = (img, wavelet="db2", levels=None))]
fn dwt<'py>(py: Python<'py>, img: PyReadonlyArray2<'py, f64>, wavelet: &str, levels: Option<usize>) -> PyResult<Bound<'py, PyArray1<f64>>> {
    let img = to_image(img)?;
    let levels = levels.unwrap_or_else(|| default_levels(img.width()));
    let coeffs = wavelet::forward(&img, &family(wavelet)?, levels).map_err(err)?;
    Ok(coeffs.into_data().into_pyarray(py))
}

#[pyfunction]
#[pyo3(signature = (coeffs, shape, wavelet="db2", levels=None))]
fn idwt<'py>(
    py: Python<'py>,
    coeffs: PyReadonlyArray1<'py, f64>,
    shape: (usize, usize),
    wavelet: &str,
    levels: Option<usize>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let levels = levels.unwrap_or_else(|| default_levels(shape.1));
    let layout = Layout::new(shape.0, shape.1, levels).map_err(err)?;
    let coeffs = WaveletCoeffs::new(layout, coeffs.as_array().to_vec()).map_err(err)?;
    Ok(to_array(py, wavelet::inverse(&coeffs, &family(wavelet)?).map_err(err)?))
}

#[pyfunction]
fn add_noise<'py>(py: Python<'py>, img: PyReadonlyArray2<'py, f64>, sigma: f64, seed: u64) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let noise = wavblur::NoiseModel::new(sigma, seed).map_err(err)?;
    Ok(to_array(py, wavblur::add_noise(&to_image(img)?, noise)))
}

#[pyfunction]
fn snr_db(candidate: PyReadonlyArray2<'_, f64>, reference: PyReadonlyArray2<'_, f64>) -> PyResult<f64> {
    wavblur::snr_db(&to_image(candidate)?, &to_image(reference)?).map_err(err)
}

/// Isotropic total variation with periodic forward differences.
#[pyfunction]
fn tv(img: PyReadonlyArray2<'_, f64>) -> PyResult<f64> {
    Ok(tv_value(&to_image(img)?))
}

/// TV-L2 restoration of `v` through `theta`. Returns a dict with the image
/// and solver diagnostics.
#[pyfunction]
#[pyo3(signature = (v, theta, sigma=0.02, max_iters=5000, tol=1e-4))]
fn restore<'py>(
    py: Python<'py>,
    v: PyReadonlyArray2<'py, f64>,
    theta: &PyTheta,
    sigma: f64,
    max_iters: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let v = to_image(v)?;
    let cfg = wavblur::SolverConfig {
        max_iters,
        tol,
        ..wavblur::SolverConfig::with_sigma(sigma)
    };
    let t = &theta.theta;
    let r = py.detach(|| wavblur::restore(&v, t, &cfg)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("status", format!("{:?}", r.status).to_lowercase())?;
    out.set_item("iterations", r.iterations)?;
    out.set_item("residual", r.residual)?;
    out.set_item("radius", r.radius)?;
    out.set_item("tv", r.tv)?;
    out.set_item("image", to_array(py, r.image))?;
    Ok(out)
}

/// Off-diagonal decay of the 1D operator matrix: fitted slope, constant
/// and far-pair counts.
#[pyfunction]
#[pyo3(signature = (size=256, sigma_min=0.8, sigma_max=3.0, truncation=8.0, wavelet="db2", levels=None))]
fn verify_decay<'py>(
    py: Python<'py>,
    size: usize,
    sigma_min: f64,
    sigma_max: f64,
    truncation: f64,
    wavelet: &str,
    levels: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let kernel = Kernel1d::new(size, sigma_min, sigma_max, truncation).map_err(err)?;
    let report = verify_decay_1d(&kernel, &family(wavelet)?, levels.unwrap_or_else(|| default_levels(size))).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("slope", report.slope)?;
    out.set_item("fitted_constant", report.fitted_constant)?;
    out.set_item("vanishing_moments", report.vanishing_moments)?;
    out.set_item("far_pairs", report.far_pairs)?;
    out.set_item("far_nonzero", report.far_nonzero)?;
    Ok(out)
}

#[pymodule]
fn pywavblur(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyTheta>()?;
    m.add_function(wrap_pyfunction!(test_scene, m)?)?;
    m.add_function(wrap_pyfunction!(dwt, m)?)?;
    m.add_function(wrap_pyfunction!(idwt, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(tv, m)?)?;
    m.add_function(wrap_pyfunction!(restore, m)?)?;
    m.add_function(wrap_pyfunction!(verify_decay, m)?)?;
    Ok(())
}
