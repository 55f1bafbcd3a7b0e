//! Python bindings. Cubes cross the boundary as flat float lists in
//! mode-1-fastest order plus a `(h, w, p)` shape.

use lrtdahl::io::{normalize_bands, parse_noise_spec, parse_run_config};
use lrtdahl::tucker::{low_rank_approx as tucker_approx, TuckerRanks};
use lrtdahl::{Error, HsiCube, NoiseSpec};
use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList, PyTuple};

fn to_py(err: Error) -> PyErr {
    if err.is_io() {
        PyIOError::new_err(err.to_string())
    } else {
        PyValueError::new_err(err.to_string())
    }
}

/// A hyperspectral cube of shape `(h, w, p)`.
#[pyclass(name = "Cube", module = "lrtdahl_py", from_py_object)]
#[derive(Clone)]
pub struct Cube {
    inner: HsiCube,
}

impl From<HsiCube> for Cube {
    fn from(inner: HsiCube) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl Cube {
    #[new]
    fn new(shape: (usize, usize, usize), data: Vec<f64>) -> PyResult<Self> {
        HsiCube::new([shape.0, shape.1, shape.2], data).map(Self::from).map_err(to_py)
    }

    #[staticmethod]
    fn zeros(shape: (usize, usize, usize)) -> PyResult<Self> {
        HsiCube::zeros([shape.0, shape.1, shape.2]).map(Self::from).map_err(to_py)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let [h, w, p] = self.inner.dims();
        (h, w, p)
    }

    /// Flat copy of the values, mode-1 fastest.
    fn data(&self) -> Vec<f64> {
        self.inner.as_slice().to_vec()
    }

    fn band(&self, k: usize) -> PyResult<Vec<f64>> {
        if k >= self.inner.dims()[2] {
            return Err(PyIndexError::new_err(format!("band {k} out of range")));
        }
        Ok(self.inner.band(k).to_vec())
    }

    fn __getitem__(&self, idx: (usize, usize, usize)) -> PyResult<f64> {
        let [h, w, p] = self.inner.dims();
        if idx.0 >= h || idx.1 >= w || idx.2 >= p {
            return Err(PyIndexError::new_err(format!("index {idx:?} out of range for {:?}", [h, w, p])));
        }
        Ok(self.inner.get(idx.0, idx.1, idx.2))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn fro_norm(&self) -> f64 {
        self.inner.fro_norm()
    }

    /// Per-band min-max scaling to [0, 1].
    fn normalized(&self) -> Self {
        normalize_bands(&self.inner).into()
    }

    fn __sub__(&self, other: &Cube) -> PyResult<Self> {
        self.inner.zip_map(&other.inner, |a, b| a - b).map(Self::from).map_err(to_py)
    }

    fn __add__(&self, other: &Cube) -> PyResult<Self> {
        self.inner.zip_map(&other.inner, |a, b| a + b).map(Self::from).map_err(to_py)
    }

    fn __eq__(&self, other: &Cube) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Cube(shape={:?})", self.shape())
    }
}

#[pyfunction]
fn read_cube(path: &str) -> PyResult<Cube> {
    lrtdahl::read_cube(path).map(Cube::from).map_err(to_py)
}

#[pyfunction]
fn write_cube(path: &str, cube: &Cube) -> PyResult<()> {
    lrtdahl::write_cube(path, &cube.inner).map_err(to_py)
}

/// Smooth synthetic scene with exact low multilinear rank.
#[pyfunction]
#[pyo3(signature = (shape, seed = 0))]
fn synth(shape: (usize, usize, usize), seed: u64) -> PyResult<Cube> {
    lrtdahl::synthetic::low_rank_scene([shape.0, shape.1, shape.2], seed).map(Cube::from).map_err(to_py)
}

/// Degrades `truth` with a preset noise case (1..=6) or a key=value noise spec.
/// Returns `(noisy, components)` where components maps names to cubes.
#[pyfunction]
#[pyo3(signature = (truth, case = 1, seed = 0, spec = None))]
fn simulate<'py>(
    py: Python<'py>,
    truth: &Cube,
    case: u8,
    seed: u64,
    spec: Option<&str>,
) -> PyResult<(Cube, Bound<'py, PyDict>)> {
    let spec = match spec {
        Some(text) => parse_noise_spec(text).map_err(PyValueError::new_err)?,
        None => NoiseSpec::case(case, seed).map_err(to_py)?,
    };
    let (noisy, parts) = lrtdahl::simulate_case(&truth.inner, &spec).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("gaussian", Cube::from(parts.gaussian))?;
    out.set_item("impulse_mask", Cube::from(parts.impulse_mask))?;
    out.set_item("stripe_field", Cube::from(parts.stripe_field))?;
    out.set_item("deadline_mask", Cube::from(parts.deadline_mask))?;
    Ok((noisy.into(), out))
}

fn config_text(config: Option<&Bound<'_, PyAny>>) -> PyResult<String> {
    let Some(config) = config else {
        return Ok(String::new());
    };
    if let Ok(text) = config.extract::<String>() {
        return Ok(text);
    }
    let dict = config.cast::<PyDict>().map_err(|_| PyValueError::new_err("config must be a str or dict"))?;
    let mut lines = Vec::new();
    for (key, value) in dict.iter() {
        let value = if value.is_instance_of::<PyList>() || value.is_instance_of::<PyTuple>() {
            let parts: Vec<String> =
                value.try_iter()?.map(|v| v.and_then(|v| v.str().map(|s| s.to_string()))).collect::<PyResult<_>>()?;
            parts.join(",")
        } else if let Ok(flag) = value.extract::<bool>() {
            flag.to_string()
        } else {
            value.str()?.to_string()
        };
        lines.push(format!("{} = {}", key.str()?, value));
    }
    Ok(lines.join("\n"))
}

/// Restores `observed`. `config` is key=value text or a dict of the same keys.
/// Returns a dict with the four component cubes and solver diagnostics.
/// The components sum back to `observed` exactly when it holds f32-precision
/// values, as cubes read from disk do.
#[pyfunction]
#[pyo3(signature = (observed, config = None))]
fn solve<'py>(py: Python<'py>, observed: &Cube, config: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyDict>> {
    let run = parse_run_config(&config_text(config)?).map_err(PyValueError::new_err)?;
    let (parts, diag) = py.detach(|| lrtdahl::solve(&observed.inner, &run.solver)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("clean", Cube::from(parts.clean))?;
    out.set_item("sparse", Cube::from(parts.sparse))?;
    out.set_item("stripes", Cube::from(parts.stripes))?;
    out.set_item("residual", Cube::from(parts.residual))?;
    out.set_item("p", diag.p.to_vec())?;
    out.set_item("iterations", diag.iterations)?;
    out.set_item("converged", diag.converged)?;
    out.set_item("rel_change", diag.rel_change_history())?;
    out.set_item("seconds", diag.wall_time.as_secs_f64())?;
    Ok(out)
}

/// MPSNR, MSSIM and MSAM plus per-band and per-pixel values.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, reference: &Cube, test: &Cube) -> PyResult<Bound<'py, PyDict>> {
    let r = lrtdahl::evaluate(&reference.inner, &test.inner).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("mpsnr", r.mpsnr)?;
    out.set_item("mssim", r.mssim)?;
    out.set_item("msam", r.msam)?;
    out.set_item("psnr_per_band", r.psnr_per_band)?;
    out.set_item("ssim_per_band", r.ssim_per_band)?;
    out.set_item("sam_per_pixel", r.sam_per_pixel)?;
    Ok(out)
}

/// Fits a hyper-Laplacian to the gradients along each direction.
/// Returns one dict per direction (h, w, p) with sigma, k, p and residual.
#[pyfunction]
fn estimate_p<'py>(py: Python<'py>, cube: &Cube) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let fit = py.detach(|| lrtdahl::estimate_p(&cube.inner)).map_err(to_py)?;
    fit.directions
        .iter()
        .map(|d| {
            let out = PyDict::new(py);
            out.set_item("sigma", d.sigma)?;
            out.set_item("k", d.k)?;
            out.set_item("p", d.p)?;
            out.set_item("residual", d.residual)?;
            Ok(out)
        })
        .collect()
}

/// Rank-`ranks` Tucker approximation by HOOI.
#[pyfunction]
#[pyo3(signature = (cube, ranks, max_iter = 20, tol = 1e-8))]
fn low_rank_approx(cube: &Cube, ranks: (usize, usize, usize), max_iter: usize, tol: f64) -> PyResult<Cube> {
    let ranks = TuckerRanks::new(ranks.0, ranks.1, ranks.2).map_err(to_py)?;
    tucker_approx(&cube.inner, ranks, max_iter, tol).map(Cube::from).map_err(to_py)
}

#[pymodule]
fn lrtdahl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Cube>()?;
    m.add_function(wrap_pyfunction!(read_cube, m)?)?;
    m.add_function(wrap_pyfunction!(write_cube, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_p, m)?)?;
    m.add_function(wrap_pyfunction!(low_rank_approx, m)?)?;
    Ok(())
}
