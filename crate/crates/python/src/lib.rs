//! Python bindings: tensors, label maps, networks, phantom data, training
//! and the DSC / Wilcoxon evaluation helpers.

use std::path::PathBuf;

use dilseg::data::PhantomParams;
use dilseg::eval::WilcoxonResult;
use dilseg::net::Variant;
use dilseg::ops::{self, ConvBackend, ConvSpec};
use dilseg::train::HyperParams;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: dilseg::Error) -> PyErr {
    match e {
        dilseg::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Row-major float64 tensor of rank 1 to 4.
#[pyclass(name = "Tensor", module = "dilseg", from_py_object)]
#[derive(Clone)]
struct PyTensor(dilseg::Tensor);

#[pymethods]
impl PyTensor {
    #[new]
    fn new(shape: Vec<usize>, values: Vec<f64>) -> PyResult<Self> {
        dilseg::Tensor::from_values(&shape, values).map(Self).map_err(err)
    }

    #[staticmethod]
    fn zeros(shape: Vec<usize>) -> PyResult<Self> {
        dilseg::Tensor::zeros(&shape).map(Self).map_err(err)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.shape().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn at(&self, coords: Vec<usize>) -> PyResult<f64> {
        self.0.at(&coords).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.0.shape())
    }
}

/// Per-pixel class labels.
#[pyclass(name = "LabelMap", module = "dilseg", from_py_object)]
#[derive(Clone)]
struct PyLabelMap(dilseg::LabelMap);

#[pymethods]
impl PyLabelMap {
    #[new]
    fn new(height: usize, width: usize, values: Vec<u8>) -> PyResult<Self> {
        dilseg::LabelMap::from_values(height, width, values).map(Self).map_err(err)
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn values(&self) -> Vec<u8> {
        self.0.values().to_vec()
    }

    fn histogram(&self) -> Vec<usize> {
        self.0.histogram().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("LabelMap({}x{})", self.0.height(), self.0.width())
    }
}

#[pyclass(name = "Slice", module = "dilseg", from_py_object)]
#[derive(Clone)]
struct PySlice(dilseg::data::Slice);

#[pymethods]
impl PySlice {
    #[new]
    fn new(id: String, image: PyTensor, labels: PyLabelMap) -> PyResult<Self> {
        dilseg::data::Slice::new(id, image.0, labels.0).map(Self).map_err(err)
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id.clone()
    }

    #[getter]
    fn image(&self) -> PyTensor {
        PyTensor(self.0.image.clone())
    }

    #[getter]
    fn labels(&self) -> PyLabelMap {
        PyLabelMap(self.0.labels.clone())
    }
}

#[pyclass(name = "Network", module = "dilseg", from_py_object)]
#[derive(Clone)]
struct PyNetwork(dilseg::Network);

#[pymethods]
impl PyNetwork {
    /// `variant` is "standard-fcn" or "dilated-fcn".
    #[staticmethod]
    #[pyo3(signature = (variant, num_classes = 8, base_channels = 12, seed = 7))]
    fn build(variant: &str, num_classes: usize, base_channels: usize, seed: u64) -> PyResult<Self> {
        let variant: Variant = variant.parse().map_err(err)?;
        dilseg::net::build(variant, num_classes, base_channels, seed)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        dilseg::net::load_model(path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dilseg::net::save_model(&self.0, path).map_err(err)
    }

    #[getter]
    fn variant(&self) -> String {
        self.0.variant().to_string()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    #[getter]
    fn output_stride(&self) -> usize {
        self.0.output_stride()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.0.parameter_count()
    }

    fn receptive_field(&self, depth: usize) -> usize {
        self.0.receptive_field(depth)
    }

    /// "direct" or "lowered".
    fn set_backend(&mut self, backend: &str) -> PyResult<()> {
        let backend: ConvBackend = backend.parse().map_err(err)?;
        self.0.set_backend(backend);
        Ok(())
    }

    /// Logits for a `[B, C, H, W]` batch or a single `[C, H, W]` image.
    fn forward(&self, input: &PyTensor) -> PyResult<PyTensor> {
        let out = if input.0.rank() == 4 {
            self.0.forward(&input.0)
        } else {
            self.0.forward_image(&input.0)
        };
        out.map(PyTensor).map_err(err)
    }

    fn predict(&self, image: &PyTensor) -> PyResult<PyLabelMap> {
        self.0.predict(&image.0).map(PyLabelMap).map_err(err)
    }

    fn loss(&self, image: &PyTensor, labels: &PyLabelMap) -> PyResult<f64> {
        self.0.loss(&image.0, &labels.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(variant={}, num_classes={}, parameters={})",
            self.0.variant(),
            self.0.num_classes(),
            self.0.parameter_count()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (input, kernel, bias, dilation = 1))]
fn dilated_conv2d(input: &PyTensor, kernel: &PyTensor, bias: &PyTensor, dilation: usize) -> PyResult<PyTensor> {
    let ks = kernel.0.shape();
    if ks.len() != 4 {
        return Err(PyValueError::new_err("kernel must be [C_out, C_in, M, M]"));
    }
    let spec = ConvSpec::new(ks[1], ks[0], ks[2], dilation);
    ops::dilated_conv2d_forward(&input.0, &kernel.0, &bias.0, &spec)
        .map(PyTensor)
        .map_err(err)
}

#[pyfunction]
fn upsample_kernel(kernel: &PyTensor, dilation: usize) -> PyResult<PyTensor> {
    ops::upsample_kernel(&kernel.0, dilation).map(PyTensor).map_err(err)
}

#[pyfunction]
fn dice(pred: &PyLabelMap, truth: &PyLabelMap, class_id: u8) -> PyResult<f64> {
    dilseg::eval::dice(&pred.0, &truth.0, class_id).map_err(err)
}

fn wilcoxon_dict<'py>(py: Python<'py>, r: &WilcoxonResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("statistic", r.statistic)?;
    d.set_item("w_plus", r.w_plus)?;
    d.set_item("w_minus", r.w_minus)?;
    d.set_item("n", r.n)?;
    d.set_item("p_two_sided", r.p_two_sided)?;
    d.set_item("exact", r.exact)?;
    Ok(d)
}

#[pyfunction]
fn wilcoxon_signed_rank<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = dilseg::eval::wilcoxon_signed_rank(&a, &b).map_err(err)?;
    wilcoxon_dict(py, &r)
}

/// Pooled per-class DSC with mean, sample std, min and max.
#[pyfunction]
fn dsc_report<'py>(
    py: Python<'py>,
    predictions: Vec<PyLabelMap>,
    truths: Vec<PyLabelMap>,
) -> PyResult<Bound<'py, PyDict>> {
    let p: Vec<_> = predictions.into_iter().map(|m| m.0).collect();
    let t: Vec<_> = truths.into_iter().map(|m| m.0).collect();
    let r = dilseg::eval::dsc_report(&p, &t).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("classes", r.class_names)?;
    d.set_item("dsc", r.dsc)?;
    d.set_item("mean", r.mean)?;
    d.set_item("std_dev", r.std_dev)?;
    d.set_item("min", r.min)?;
    d.set_item("max", r.max)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (n_slices = 64, image_size = 96, seed = 7, shift = false))]
fn generate_phantom(n_slices: usize, image_size: usize, seed: u64, shift: bool) -> PyResult<Vec<PySlice>> {
    let params = PhantomParams {
        n_slices,
        image_size,
        seed,
        shift,
        ..Default::default()
    };
    let slices = dilseg::data::generate_phantom(&params).map_err(err)?;
    Ok(slices.into_iter().map(PySlice).collect())
}

/// Trains in place and returns the per-epoch mean loss.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (network, slices, epochs = 60, learning_rate = 0.01, momentum = 0.9, batch_size = 4, seed = 0))]
fn train(
    py: Python<'_>,
    network: &mut PyNetwork,
    slices: Vec<PySlice>,
    epochs: usize,
    learning_rate: f64,
    momentum: f64,
    batch_size: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let hp = HyperParams {
        learning_rate,
        momentum,
        epochs,
        batch_size,
        seed,
    };
    let set: Vec<_> = slices.into_iter().map(|s| s.0).collect();
    let net = network.0.clone();
    let (net, log) = py
        .detach(|| dilseg::train::train(net, &set, &hp))
        .map_err(err)?;
    network.0 = net;
    Ok(log)
}

#[pymodule(name = "dilseg")]
fn dilseg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NUM_CLASSES", dilseg::NUM_CLASSES)?;
    m.add("CLASS_NAMES", dilseg::CLASS_NAMES.to_vec())?;
    m.add_class::<PyTensor>()?;
    m.add_class::<PyLabelMap>()?;
    m.add_class::<PySlice>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(dilated_conv2d, m)?)?;
    m.add_function(wrap_pyfunction!(upsample_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add_function(wrap_pyfunction!(dsc_report, m)?)?;
    m.add_function(wrap_pyfunction!(generate_phantom, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
