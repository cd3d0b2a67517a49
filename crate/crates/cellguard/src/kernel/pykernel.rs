//! Live Python kernel backend (feature `pykernel`): replay executed cells in
//! a fresh embedded interpreter and introspect the resulting namespace
//! through the same read-only handle protocol the synthetic kernel uses.
//!
//! All threads share one embedded interpreter; every handle operation takes
//! the GIL. Value materialization is capped so extraction latency stays
//! bounded on large arrays; missing-data checks go through the host's native
//! vectorized predicates where available.

use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyTuple};

use super::{CallableSignature, HandleRef, KernelObject, KernelSession, ParamSpec, Scalar};

/// Elements materialized from one array/series at most.
const MATERIALIZE_CAP: u64 = 10_000_000;

/// A cell that failed during replay.
#[derive(Debug, Clone)]
pub struct ReplayFailure {
    pub cell_index: usize,
    pub execution_count: u64,
    pub message: String,
}

/// A namespace produced by replaying executed cells in a fresh interpreter.
pub struct PyKernelSession {
    namespace: Py<PyDict>,
}

impl PyKernelSession {
    /// Run `(execution_count, cell_index, source)` triples in order in a
    /// fresh namespace. The first raising cell aborts the replay.
    pub fn replay(cells: &[(u64, usize, String)]) -> Result<Self, ReplayFailure> {
        Python::with_gil(|py| {
            let namespace = PyDict::new_bound(py);
            for (execution_count, cell_index, source) in cells {
                let code = std::ffi::CString::new(source.as_str()).map_err(|_| ReplayFailure {
                    cell_index: *cell_index,
                    execution_count: *execution_count,
                    message: "cell source contains a NUL byte".into(),
                })?;
                let code_str = code.to_str().expect("source was valid UTF-8");
                if let Err(err) = py.run_bound(code_str, Some(&namespace), Some(&namespace)) {
                    return Err(ReplayFailure {
                        cell_index: *cell_index,
                        execution_count: *execution_count,
                        message: render_pyerr(py, &err),
                    });
                }
            }
            Ok(Self {
                namespace: namespace.unbind(),
            })
        })
    }
}

fn render_pyerr(py: Python<'_>, err: &PyErr) -> String {
    let kind = err
        .get_type_bound(py)
        .name()
        .map(|n| n.to_string())
        .unwrap_or_else(|_| "Exception".into());
    format!("{kind}: {}", err.value_bound(py))
}

impl KernelSession for PyKernelSession {
    fn lookup(&self, name: &str) -> Option<HandleRef> {
        Python::with_gil(|py| {
            let namespace = self.namespace.bind(py);
            namespace
                .get_item(name)
                .ok()
                .flatten()
                .map(|obj| std::sync::Arc::new(PyHandle { obj: obj.unbind() }) as HandleRef)
        })
    }
}

/// One live object viewed through the handle protocol.
pub struct PyHandle {
    obj: Py<PyAny>,
}

impl PyHandle {
    pub fn new(obj: Py<PyAny>) -> Self {
        Self { obj }
    }

    fn wrap(obj: Bound<'_, PyAny>) -> HandleRef {
        std::sync::Arc::new(PyHandle { obj: obj.unbind() })
    }

    fn with<R>(&self, f: impl FnOnce(&Bound<'_, PyAny>) -> R) -> R {
        Python::with_gil(|py| f(self.obj.bind(py)))
    }

    fn is_builtin_container(type_name: &str) -> bool {
        matches!(
            type_name,
            "str" | "bytes" | "bytearray" | "dict" | "list" | "tuple" | "set" | "frozenset"
                | "range"
        )
    }
}

fn to_scalar(obj: &Bound<'_, PyAny>) -> Option<Scalar> {
    if obj.is_none() {
        return Some(Scalar::Missing);
    }
    if obj.is_instance_of::<PyBool>() {
        return obj.extract::<bool>().ok().map(Scalar::Bool);
    }
    if let Ok(value) = obj.extract::<i64>() {
        return Some(Scalar::Int(value));
    }
    if let Ok(value) = obj.extract::<f64>() {
        return Some(Scalar::Float(value));
    }
    if let Ok(value) = obj.extract::<String>() {
        return Some(Scalar::Text(value));
    }
    // NumPy scalars expose item(); unwrap one level.
    if let Ok(item) = obj.call_method0("item") {
        if !item.is(obj) {
            return to_scalar(&item);
        }
    }
    None
}

impl KernelObject for PyHandle {
    fn class_name(&self) -> String {
        self.with(|obj| {
            obj.get_type()
                .name()
                .map(|n| n.to_string())
                .unwrap_or_else(|_| "object".into())
        })
    }

    fn repr_text(&self) -> String {
        self.with(|obj| {
            obj.repr()
                .map(|r| r.to_string())
                .unwrap_or_else(|_| format!("<unreprable {}>", self.class_name()))
        })
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        self.with(|obj| match obj.getattr(name) {
            Ok(value) => Some(Self::wrap(value)),
            Err(_) => None,
        })
    }

    fn attr_names(&self) -> Vec<String> {
        self.with(|obj| {
            let Ok(names) = obj.dir() else {
                return Vec::new();
            };
            names
                .iter()
                .filter_map(|n| n.extract::<String>().ok())
                .filter(|n| !n.starts_with('_'))
                .take(60)
                .collect()
        })
    }

    fn as_scalar(&self) -> Option<Scalar> {
        self.with(|obj| to_scalar(obj))
    }

    fn items(&self) -> Option<Vec<HandleRef>> {
        self.with(|obj| {
            if let Ok(tuple) = obj.downcast::<PyTuple>() {
                return Some(tuple.iter().map(Self::wrap).collect());
            }
            if let Ok(list) = obj.downcast::<PyList>() {
                return Some(list.iter().map(Self::wrap).collect());
            }
            // TensorShape and Index objects iterate without consuming.
            let type_name = obj.get_type().name().ok()?.to_string();
            if type_name == "TensorShape" || type_name == "Index" {
                let items: Vec<HandleRef> = obj.iter().ok()?.flatten().map(Self::wrap).collect();
                return Some(items);
            }
            None
        })
    }

    fn sequence_len(&self) -> Option<u64> {
        self.with(|obj| obj.len().ok().map(|l| l as u64))
    }

    fn supports_index_access(&self) -> bool {
        self.with(|obj| {
            let type_name = obj
                .get_type()
                .name()
                .map(|n| n.to_string())
                .unwrap_or_default();
            if Self::is_builtin_container(&type_name) {
                return false;
            }
            obj.hasattr("__getitem__").unwrap_or(false) && obj.hasattr("__len__").unwrap_or(false)
        })
    }

    fn get_index(&self, index: u64) -> Option<Result<HandleRef, String>> {
        if !self.supports_index_access() {
            return None;
        }
        Some(self.with(|obj| {
            obj.get_item(index)
                .map(Self::wrap)
                .map_err(|err| Python::with_gil(|py| render_pyerr(py, &err)))
        }))
    }

    fn scalar_elements(&self) -> Option<Box<dyn Iterator<Item = Scalar> + '_>> {
        let values = self.with(|obj| -> Option<Vec<Scalar>> {
            let type_name = obj.get_type().name().ok()?.to_string();
            let flat = match type_name.as_str() {
                "ndarray" => {
                    let size: u64 = obj.getattr("size").ok()?.extract().ok()?;
                    if size > MATERIALIZE_CAP {
                        return None;
                    }
                    obj.call_method0("ravel").ok()?.call_method0("tolist").ok()?
                }
                "Series" => {
                    let size: u64 = obj.len().ok()? as u64;
                    if size > MATERIALIZE_CAP {
                        return None;
                    }
                    obj.call_method0("tolist").ok()?
                }
                "Tensor" | "EagerTensor" | "Parameter" => {
                    let numel = obj
                        .call_method0("numel")
                        .or_else(|_| obj.getattr("size"))
                        .ok()?;
                    let size: u64 = numel.extract().unwrap_or(u64::MAX);
                    if size > MATERIALIZE_CAP {
                        return None;
                    }
                    obj.call_method0("flatten").ok()?.call_method0("tolist").ok()?
                }
                _ => return None,
            };
            let list = flat.downcast::<PyList>().ok()?;
            Some(
                list.iter()
                    .map(|v| to_scalar(&v).unwrap_or(Scalar::Missing))
                    .collect(),
            )
        })?;
        Some(Box::new(values.into_iter()))
    }

    fn labeled_columns(&self) -> Option<Vec<(String, HandleRef)>> {
        self.with(|obj| {
            let type_name = obj.get_type().name().ok()?.to_string();
            if type_name != "DataFrame" {
                return None;
            }
            let columns = obj.getattr("columns").ok()?;
            let names: Vec<String> = columns
                .iter()
                .ok()?
                .flatten()
                .filter_map(|c| c.str().ok().map(|s| s.to_string()))
                .collect();
            let mut out = Vec::with_capacity(names.len());
            for name in names {
                let column = obj.get_item(&name).ok()?;
                out.push((name, Self::wrap(column)));
            }
            Some(out)
        })
    }

    fn is_callable(&self) -> bool {
        self.with(|obj| obj.is_callable())
    }

    fn signature(&self) -> Option<CallableSignature> {
        self.with(|obj| {
            let py = obj.py();
            let inspect = py.import_bound("inspect").ok()?;
            let signature = inspect.call_method1("signature", (obj,)).ok()?;
            let empty = inspect.getattr("Parameter").ok()?.getattr("empty").ok()?;
            let parameters = signature.getattr("parameters").ok()?;
            let values = parameters.call_method0("values").ok()?;
            let mut params = Vec::new();
            for param in values.iter().ok()?.flatten() {
                let name: String = param.getattr("name").ok()?.extract().ok()?;
                let kind = param.getattr("kind").ok()?;
                let kind_name: String = kind
                    .getattr("name")
                    .ok()
                    .and_then(|n| n.extract().ok())
                    .unwrap_or_default();
                if kind_name == "VAR_POSITIONAL" {
                    params.push(ParamSpec {
                        name: format!("*{name}"),
                        required: false,
                        default_repr: None,
                        keyword_only: false,
                        annotation: None,
                    });
                    continue;
                }
                if kind_name == "VAR_KEYWORD" {
                    params.push(ParamSpec {
                        name: format!("**{name}"),
                        required: false,
                        default_repr: None,
                        keyword_only: false,
                        annotation: None,
                    });
                    continue;
                }
                let default = param.getattr("default").ok()?;
                let has_default = !default.is(&empty);
                let annotation = param.getattr("annotation").ok()?;
                let annotation_text = if annotation.is(&empty) {
                    None
                } else {
                    annotation.str().ok().map(|s| s.to_string())
                };
                params.push(ParamSpec {
                    name,
                    required: !has_default,
                    default_repr: has_default
                        .then(|| default.repr().map(|r| r.to_string()).unwrap_or_default()),
                    keyword_only: kind_name == "KEYWORD_ONLY",
                    annotation: annotation_text,
                });
            }
            let return_annotation = signature.getattr("return_annotation").ok().and_then(|r| {
                if r.is(&empty) {
                    None
                } else {
                    r.str().ok().map(|s| s.to_string())
                }
            });
            Some(CallableSignature {
                params,
                return_annotation,
            })
        })
    }

    fn docstring(&self) -> Option<String> {
        self.with(|obj| {
            let doc = obj.getattr("__doc__").ok()?;
            doc.extract::<String>().ok()
        })
    }

    fn native_missing_scan(&self) -> Option<bool> {
        self.with(|obj| {
            // Pandas objects answer isna() natively.
            if obj.hasattr("isna").unwrap_or(false) {
                let missing = obj.call_method0("isna").ok()?;
                let any = missing.call_method0("any").ok()?;
                let any = match any.extract::<bool>() {
                    Ok(b) => b,
                    // DataFrame.isna().any() returns a Series; reduce again.
                    Err(_) => any
                        .call_method0("any")
                        .ok()?
                        .extract::<bool>()
                        .ok()?,
                };
                return Some(any);
            }
            let type_name = obj.get_type().name().ok()?.to_string();
            if type_name == "ndarray" {
                let py = obj.py();
                let dtype_kind: String = obj
                    .getattr("dtype")
                    .ok()?
                    .getattr("kind")
                    .ok()?
                    .extract()
                    .ok()?;
                if dtype_kind != "f" && dtype_kind != "c" {
                    return Some(false);
                }
                let numpy = py.import_bound("numpy").ok()?;
                let isnan = numpy.call_method1("isnan", (obj,)).ok()?;
                return isnan
                    .call_method0("any")
                    .ok()?
                    .call_method0("item")
                    .ok()?
                    .extract::<bool>()
                    .ok();
            }
            if obj.hasattr("isnan").unwrap_or(false) && obj.hasattr("dtype").unwrap_or(false) {
                let is_float: bool = obj
                    .getattr("dtype")
                    .ok()?
                    .getattr("is_floating_point")
                    .ok()?
                    .extract()
                    .unwrap_or(false);
                if !is_float {
                    return Some(false);
                }
                return obj
                    .call_method0("isnan")
                    .ok()?
                    .call_method0("any")
                    .ok()?
                    .call_method0("item")
                    .ok()?
                    .extract::<bool>()
                    .ok();
            }
            None
        })
    }
}

/// Raise a Python exception text for tests.
#[allow(dead_code)]
pub(crate) fn py_exception(message: &str) -> PyErr {
    PyException::new_err(message.to_string())
}
