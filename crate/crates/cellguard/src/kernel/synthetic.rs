//! In-memory kernel objects emulating the notebook host's object protocol.
//!
//! These back the test suites and the offline CLI path: a fixture file
//! describes the namespace and `kernel_from_fixture` builds it. Stream
//! datasets and map-style datasets carry access counters so tests can prove
//! extraction consumed nothing.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::{CallableSignature, HandleRef, KernelObject, KernelSession, ParamSpec, Scalar};

/// A synthetic kernel namespace.
#[derive(Default)]
pub struct SyntheticKernel {
    globals: BTreeMap<String, HandleRef>,
}

impl SyntheticKernel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: &str, obj: HandleRef) {
        self.globals.insert(name.to_string(), obj);
    }
}

impl KernelSession for SyntheticKernel {
    fn lookup(&self, name: &str) -> Option<HandleRef> {
        self.globals.get(name).cloned()
    }
}

/// Plain value.
pub struct ScalarObject(pub Scalar);

impl KernelObject for ScalarObject {
    fn class_name(&self) -> String {
        match &self.0 {
            Scalar::Missing => "NoneType",
            Scalar::Bool(_) => "bool",
            Scalar::Int(_) => "int",
            Scalar::Float(_) => "float",
            Scalar::Text(_) => "str",
        }
        .to_string()
    }

    fn repr_text(&self) -> String {
        self.0.render()
    }

    fn as_scalar(&self) -> Option<Scalar> {
        Some(self.0.clone())
    }
}

pub fn scalar(value: Scalar) -> HandleRef {
    Arc::new(ScalarObject(value))
}

/// Tuple/list of handles.
pub struct TupleObject {
    pub class_name: String,
    pub elements: Vec<HandleRef>,
}

impl KernelObject for TupleObject {
    fn class_name(&self) -> String {
        self.class_name.clone()
    }

    fn repr_text(&self) -> String {
        let inner: Vec<String> = self.elements.iter().map(|e| e.repr_text()).collect();
        format!("({})", inner.join(", "))
    }

    fn items(&self) -> Option<Vec<HandleRef>> {
        Some(self.elements.clone())
    }

    fn sequence_len(&self) -> Option<u64> {
        Some(self.elements.len() as u64)
    }
}

pub fn int_tuple(values: &[u64]) -> HandleRef {
    Arc::new(TupleObject {
        class_name: "tuple".into(),
        elements: values
            .iter()
            .map(|&v| scalar(Scalar::Int(v as i64)))
            .collect(),
    })
}

/// Element storage for synthetic tensors; large tensors stay lazy.
#[derive(Clone)]
pub enum TensorData {
    /// Every element equals `fill`.
    Fill(f64),
    /// Integer fill for integer dtypes.
    FillInt(i64),
    /// Float fill with NaNs planted at the given flat indices.
    WithNans { fill: f64, nan_at: Vec<u64> },
    /// Explicit small element list.
    Explicit(Vec<Scalar>),
}

/// N-dimensional array/tensor with `shape`/`dtype` attributes.
pub struct SynTensor {
    pub class_name: String,
    pub shape: Vec<u64>,
    pub dtype: String,
    pub data: TensorData,
}

impl SynTensor {
    pub fn new(class_name: &str, shape: &[u64], dtype: &str, data: TensorData) -> Arc<Self> {
        Arc::new(Self {
            class_name: class_name.to_string(),
            shape: shape.to_vec(),
            dtype: dtype.to_string(),
            data,
        })
    }

    pub fn element_count(&self) -> u64 {
        self.shape.iter().product()
    }
}

impl KernelObject for SynTensor {
    fn class_name(&self) -> String {
        self.class_name.clone()
    }

    fn repr_text(&self) -> String {
        format!("<{} shape={:?} dtype={}>", self.class_name, self.shape, self.dtype)
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        match name {
            "shape" => Some(int_tuple(&self.shape)),
            "dtype" => Some(scalar(Scalar::Text(self.dtype.clone()))),
            "ndim" => Some(scalar(Scalar::Int(self.shape.len() as i64))),
            "size" => Some(scalar(Scalar::Int(self.element_count() as i64))),
            _ => None,
        }
    }

    fn attr_names(&self) -> Vec<String> {
        ["shape", "dtype", "ndim", "size"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn sequence_len(&self) -> Option<u64> {
        self.shape.first().copied()
    }

    fn scalar_elements(&self) -> Option<Box<dyn Iterator<Item = Scalar> + '_>> {
        let count = self.element_count();
        match &self.data {
            TensorData::Fill(fill) => {
                let fill = *fill;
                Some(Box::new((0..count).map(move |_| Scalar::Float(fill))))
            }
            TensorData::FillInt(fill) => {
                let fill = *fill;
                Some(Box::new((0..count).map(move |_| Scalar::Int(fill))))
            }
            TensorData::WithNans { fill, nan_at } => {
                let fill = *fill;
                let nan_at = nan_at.clone();
                Some(Box::new((0..count).map(move |i| {
                    if nan_at.contains(&i) {
                        Scalar::Float(f64::NAN)
                    } else {
                        Scalar::Float(fill)
                    }
                })))
            }
            TensorData::Explicit(values) => Some(Box::new(values.iter().cloned())),
        }
    }
}

/// One-dimensional labeled array of values.
pub struct SynSeries {
    pub name: Option<String>,
    pub dtype: String,
    pub values: Vec<Scalar>,
}

impl SynSeries {
    pub fn new(name: Option<&str>, dtype: &str, values: Vec<Scalar>) -> Arc<Self> {
        Arc::new(Self {
            name: name.map(str::to_string),
            dtype: dtype.to_string(),
            values,
        })
    }
}

impl KernelObject for SynSeries {
    fn class_name(&self) -> String {
        "Series".to_string()
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        match name {
            "dtype" => Some(scalar(Scalar::Text(self.dtype.clone()))),
            "shape" => Some(int_tuple(&[self.values.len() as u64])),
            "name" => self
                .name
                .as_ref()
                .map(|n| scalar(Scalar::Text(n.clone()))),
            _ => None,
        }
    }

    fn attr_names(&self) -> Vec<String> {
        ["dtype", "shape", "name"].iter().map(|s| s.to_string()).collect()
    }

    fn sequence_len(&self) -> Option<u64> {
        Some(self.values.len() as u64)
    }

    fn scalar_elements(&self) -> Option<Box<dyn Iterator<Item = Scalar> + '_>> {
        Some(Box::new(self.values.iter().cloned()))
    }
}

/// Two-dimensional labeled table.
pub struct SynFrame {
    pub columns: Vec<(String, Arc<SynSeries>)>,
    pub rows: u64,
}

impl SynFrame {
    pub fn new(columns: Vec<(String, Arc<SynSeries>)>) -> Arc<Self> {
        let rows = columns.first().map(|(_, s)| s.values.len() as u64).unwrap_or(0);
        Arc::new(Self { columns, rows })
    }
}

impl KernelObject for SynFrame {
    fn class_name(&self) -> String {
        "DataFrame".to_string()
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        match name {
            "shape" => Some(int_tuple(&[self.rows, self.columns.len() as u64])),
            "columns" => Some(Arc::new(TupleObject {
                class_name: "Index".into(),
                elements: self
                    .columns
                    .iter()
                    .map(|(n, _)| scalar(Scalar::Text(n.clone())))
                    .collect(),
            })),
            _ => None,
        }
    }

    fn attr_names(&self) -> Vec<String> {
        ["shape", "columns"].iter().map(|s| s.to_string()).collect()
    }

    fn sequence_len(&self) -> Option<u64> {
        Some(self.rows)
    }

    fn labeled_columns(&self) -> Option<Vec<(String, HandleRef)>> {
        Some(
            self.columns
                .iter()
                .map(|(n, s)| (n.clone(), s.clone() as HandleRef))
                .collect(),
        )
    }
}

/// Image-data iterator with public counters (directory/frame iterators).
pub struct SynImageIterator {
    pub class_name: String,
    pub samples: Option<u64>,
    pub num_classes: Option<u64>,
    pub batch_size: Option<u64>,
    pub image_shape: Option<Vec<u64>>,
    pub target_size: Option<Vec<u64>>,
}

impl KernelObject for SynImageIterator {
    fn class_name(&self) -> String {
        self.class_name.clone()
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        match name {
            "samples" => self.samples.map(|v| scalar(Scalar::Int(v as i64))),
            "num_classes" => self.num_classes.map(|v| scalar(Scalar::Int(v as i64))),
            "batch_size" => self.batch_size.map(|v| scalar(Scalar::Int(v as i64))),
            "image_shape" => self.image_shape.as_ref().map(|s| int_tuple(s)),
            "target_size" => self.target_size.as_ref().map(|s| int_tuple(s)),
            _ => None,
        }
    }

    fn attr_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.samples.is_some() {
            out.push("samples".into());
        }
        if self.num_classes.is_some() {
            out.push("num_classes".into());
        }
        if self.batch_size.is_some() {
            out.push("batch_size".into());
        }
        if self.image_shape.is_some() {
            out.push("image_shape".into());
        }
        if self.target_size.is_some() {
            out.push("target_size".into());
        }
        out
    }

    fn sequence_len(&self) -> Option<u64> {
        // Iterators report batches-per-epoch from len(); not an element count.
        match (self.samples, self.batch_size) {
            (Some(s), Some(b)) if b > 0 => Some(s.div_ceil(b)),
            _ => None,
        }
    }
}

/// Shape/dtype spec of one stream element component.
pub struct SynTensorSpec {
    pub shape: Vec<Option<i64>>,
    pub dtype: String,
}

impl KernelObject for SynTensorSpec {
    fn class_name(&self) -> String {
        "TensorSpec".to_string()
    }

    fn repr_text(&self) -> String {
        let dims: Vec<String> = self
            .shape
            .iter()
            .map(|d| d.map(|v| v.to_string()).unwrap_or_else(|| "None".into()))
            .collect();
        format!("TensorSpec(shape=({}), dtype={})", dims.join(", "), self.dtype)
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        match name {
            "shape" => Some(Arc::new(TupleObject {
                class_name: "TensorShape".into(),
                elements: self
                    .shape
                    .iter()
                    .map(|d| match d {
                        Some(v) => scalar(Scalar::Int(*v)),
                        None => scalar(Scalar::Missing),
                    })
                    .collect(),
            })),
            "dtype" => Some(scalar(Scalar::Text(self.dtype.clone()))),
            _ => None,
        }
    }
}

/// Pipeline/iterable dataset whose elements are consumed on access.
///
/// The only way to consume elements is the concrete `consume` method, which
/// the trait surface does not expose; the counter proves non-consumption.
pub struct SynStreamDataset {
    pub class_name: String,
    pub element_spec: Option<Vec<(Vec<Option<i64>>, String)>>,
    pub batch_size: Option<u64>,
    pub dataset: Option<HandleRef>,
    pub consumed: AtomicU64,
}

impl SynStreamDataset {
    pub fn pipeline(
        class_name: &str,
        element_spec: Vec<(Vec<Option<i64>>, String)>,
    ) -> Arc<Self> {
        Arc::new(Self {
            class_name: class_name.to_string(),
            element_spec: Some(element_spec),
            batch_size: None,
            dataset: None,
            consumed: AtomicU64::new(0),
        })
    }

    pub fn bare(class_name: &str) -> Arc<Self> {
        Arc::new(Self {
            class_name: class_name.to_string(),
            element_spec: None,
            batch_size: None,
            dataset: None,
            consumed: AtomicU64::new(0),
        })
    }

    /// Test-side element draw; bumps the counter the way iteration would.
    pub fn consume(&self) {
        self.consumed.fetch_add(1, Ordering::SeqCst);
    }

    pub fn consumed_count(&self) -> u64 {
        self.consumed.load(Ordering::SeqCst)
    }
}

impl KernelObject for SynStreamDataset {
    fn class_name(&self) -> String {
        self.class_name.clone()
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        match name {
            "element_spec" => self.element_spec.as_ref().map(|specs| {
                Arc::new(TupleObject {
                    class_name: "tuple".into(),
                    elements: specs
                        .iter()
                        .map(|(shape, dtype)| {
                            Arc::new(SynTensorSpec {
                                shape: shape.clone(),
                                dtype: dtype.clone(),
                            }) as HandleRef
                        })
                        .collect(),
                }) as HandleRef
            }),
            "batch_size" => self.batch_size.map(|v| scalar(Scalar::Int(v as i64))),
            "dataset" => self.dataset.clone(),
            _ => None,
        }
    }

    fn attr_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.element_spec.is_some() {
            out.push("element_spec".into());
        }
        if self.batch_size.is_some() {
            out.push("batch_size".into());
        }
        if self.dataset.is_some() {
            out.push("dataset".into());
        }
        out
    }
}

/// Batch-loading wrapper over an underlying dataset.
pub struct SynDataLoader {
    pub batch_size: u64,
    pub dataset: HandleRef,
    pub consumed: AtomicU64,
}

impl SynDataLoader {
    pub fn new(batch_size: u64, dataset: HandleRef) -> Arc<Self> {
        Arc::new(Self {
            batch_size,
            dataset,
            consumed: AtomicU64::new(0),
        })
    }

    pub fn consumed_count(&self) -> u64 {
        self.consumed.load(Ordering::SeqCst)
    }
}

impl KernelObject for SynDataLoader {
    fn class_name(&self) -> String {
        "DataLoader".to_string()
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        match name {
            "batch_size" => Some(scalar(Scalar::Int(self.batch_size as i64))),
            "dataset" => Some(self.dataset.clone()),
            _ => None,
        }
    }

    fn attr_names(&self) -> Vec<String> {
        vec!["batch_size".into(), "dataset".into()]
    }
}

/// Map-style dataset: `len()` plus per-index access, counted.
pub struct SynMapDataset {
    pub class_name: String,
    pub length: u64,
    pub sample_shape: Vec<u64>,
    pub labels: Vec<i64>,
    pub fail_at: Option<u64>,
    pub accesses: AtomicU64,
}

impl SynMapDataset {
    pub fn new(class_name: &str, length: u64, sample_shape: &[u64], labels: &[i64]) -> Arc<Self> {
        Arc::new(Self {
            class_name: class_name.to_string(),
            length,
            sample_shape: sample_shape.to_vec(),
            labels: labels.to_vec(),
            fail_at: None,
            accesses: AtomicU64::new(0),
        })
    }

    pub fn failing_at(
        class_name: &str,
        length: u64,
        sample_shape: &[u64],
        fail_at: u64,
    ) -> Arc<Self> {
        Arc::new(Self {
            class_name: class_name.to_string(),
            length,
            sample_shape: sample_shape.to_vec(),
            labels: vec![0],
            fail_at: Some(fail_at),
            accesses: AtomicU64::new(0),
        })
    }

    pub fn access_count(&self) -> u64 {
        self.accesses.load(Ordering::SeqCst)
    }
}

impl KernelObject for SynMapDataset {
    fn class_name(&self) -> String {
        self.class_name.clone()
    }

    fn sequence_len(&self) -> Option<u64> {
        Some(self.length)
    }

    fn supports_index_access(&self) -> bool {
        true
    }

    fn get_index(&self, index: u64) -> Option<Result<HandleRef, String>> {
        self.accesses.fetch_add(1, Ordering::SeqCst);
        if index >= self.length {
            return Some(Err(format!("index {index} out of range")));
        }
        if self.fail_at == Some(index) {
            return Some(Err(format!(
                "RuntimeError: corrupt sample at index {index}"
            )));
        }
        let input = SynTensor::new("Tensor", &self.sample_shape, "float32", TensorData::Fill(0.5));
        let label = self.labels[(index as usize) % self.labels.len().max(1)];
        Some(Ok(Arc::new(TupleObject {
            class_name: "tuple".into(),
            elements: vec![input as HandleRef, scalar(Scalar::Int(label))],
        })))
    }
}

/// Estimator or label encoder with sklearn-style fitted attributes.
pub struct SynEstimator {
    pub class_name: String,
    pub fitted: bool,
    pub n_features_in: Option<u64>,
    pub n_outputs: Option<u64>,
    pub n_classes: Option<u64>,
    pub classes: Option<(Vec<Scalar>, String)>,
}

impl SynEstimator {
    pub fn unfitted(class_name: &str) -> Arc<Self> {
        Arc::new(Self {
            class_name: class_name.to_string(),
            fitted: false,
            n_features_in: None,
            n_outputs: None,
            n_classes: None,
            classes: None,
        })
    }

    pub fn fitted_regressor(class_name: &str, n_features_in: u64, n_outputs: u64) -> Arc<Self> {
        Arc::new(Self {
            class_name: class_name.to_string(),
            fitted: true,
            n_features_in: Some(n_features_in),
            n_outputs: Some(n_outputs),
            n_classes: None,
            classes: None,
        })
    }

    pub fn fitted_encoder(class_name: &str, classes: Vec<Scalar>, dtype: &str) -> Arc<Self> {
        Arc::new(Self {
            class_name: class_name.to_string(),
            fitted: true,
            n_features_in: None,
            n_outputs: None,
            n_classes: Some(classes.len() as u64),
            classes: Some((classes, dtype.to_string())),
        })
    }

    fn method(&self, name: &str) -> HandleRef {
        Arc::new(SynCallable {
            name: name.to_string(),
            signature: CallableSignature {
                params: vec![
                    ParamSpec {
                        name: "X".into(),
                        required: true,
                        default_repr: None,
                        keyword_only: false,
                        annotation: None,
                    },
                    ParamSpec {
                        name: "y".into(),
                        required: false,
                        default_repr: Some("None".into()),
                        keyword_only: false,
                        annotation: None,
                    },
                ],
                return_annotation: None,
            },
            doc: None,
        })
    }
}

impl KernelObject for SynEstimator {
    fn class_name(&self) -> String {
        self.class_name.clone()
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        match name {
            "fit" | "predict" | "transform" => Some(self.method(name)),
            "n_features_in_" if self.fitted => {
                self.n_features_in.map(|v| scalar(Scalar::Int(v as i64)))
            }
            "n_outputs_" if self.fitted => self.n_outputs.map(|v| scalar(Scalar::Int(v as i64))),
            "n_classes_" if self.fitted => self.n_classes.map(|v| scalar(Scalar::Int(v as i64))),
            "classes_" if self.fitted => self.classes.as_ref().map(|(values, dtype)| {
                SynTensor::new(
                    "ndarray",
                    &[values.len() as u64],
                    dtype,
                    TensorData::Explicit(values.clone()),
                ) as HandleRef
            }),
            _ => None,
        }
    }

    fn attr_names(&self) -> Vec<String> {
        let mut out = vec!["fit".to_string(), "predict".to_string(), "transform".to_string()];
        if self.fitted {
            if self.n_features_in.is_some() {
                out.push("n_features_in_".into());
            }
            if self.n_outputs.is_some() {
                out.push("n_outputs_".into());
            }
            if self.n_classes.is_some() {
                out.push("n_classes_".into());
            }
            if self.classes.is_some() {
                out.push("classes_".into());
            }
        }
        out
    }
}

/// Callable with a declared signature and docstring.
pub struct SynCallable {
    pub name: String,
    pub signature: CallableSignature,
    pub doc: Option<String>,
}

impl SynCallable {
    pub fn new(name: &str, signature: CallableSignature, doc: Option<&str>) -> Arc<Self> {
        Arc::new(Self {
            name: name.to_string(),
            signature,
            doc: doc.map(str::to_string),
        })
    }
}

impl KernelObject for SynCallable {
    fn class_name(&self) -> String {
        "function".to_string()
    }

    fn repr_text(&self) -> String {
        format!("<function {}>", self.name)
    }

    fn is_callable(&self) -> bool {
        true
    }

    fn signature(&self) -> Option<CallableSignature> {
        Some(self.signature.clone())
    }

    fn docstring(&self) -> Option<String> {
        self.doc.clone()
    }
}

/// Module-like namespace object (`sns`, `np`, ...).
pub struct SynModule {
    pub name: String,
    pub attrs: BTreeMap<String, HandleRef>,
}

impl SynModule {
    pub fn new(name: &str, attrs: Vec<(&str, HandleRef)>) -> Arc<Self> {
        Arc::new(Self {
            name: name.to_string(),
            attrs: attrs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        })
    }
}

impl KernelObject for SynModule {
    fn class_name(&self) -> String {
        "module".to_string()
    }

    fn repr_text(&self) -> String {
        format!("<module '{}'>", self.name)
    }

    fn get_attr(&self, name: &str) -> Option<HandleRef> {
        self.attrs.get(name).cloned()
    }

    fn attr_names(&self) -> Vec<String> {
        self.attrs.keys().cloned().collect()
    }
}

/// Anything else: only a class name and a repr.
pub struct SynOpaque {
    pub class_name: String,
    pub repr: String,
}

impl SynOpaque {
    pub fn new(class_name: &str, repr: &str) -> Arc<Self> {
        Arc::new(Self {
            class_name: class_name.to_string(),
            repr: repr.to_string(),
        })
    }
}

impl KernelObject for SynOpaque {
    fn class_name(&self) -> String {
        self.class_name.clone()
    }

    fn repr_text(&self) -> String {
        self.repr.clone()
    }
}

/// Errors from the fixture loader.
#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("fixture is not a JSON object of name -> object description")]
    NotAnObject,
    #[error("object `{name}`: {message}")]
    BadObject { name: String, message: String },
    #[error("fixture JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn fixture_scalar(v: &serde_json::Value) -> Scalar {
    match v {
        serde_json::Value::Null => Scalar::Missing,
        serde_json::Value::Bool(b) => Scalar::Bool(*b),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Scalar::Int(i)
            } else {
                Scalar::Float(n.as_f64().unwrap_or(f64::NAN))
            }
        }
        serde_json::Value::String(s) => Scalar::Text(s.clone()),
        other => Scalar::Text(other.to_string()),
    }
}

fn shape_of(v: &serde_json::Value, field: &str) -> Result<Vec<u64>, String> {
    v.get(field)
        .and_then(|s| s.as_array())
        .map(|arr| {
            arr.iter()
                .map(|d| d.as_u64().ok_or_else(|| format!("{field} must be nonnegative integers")))
                .collect()
        })
        .unwrap_or_else(|| Err(format!("missing `{field}` array")))
}

/// Build one synthetic object from its fixture description.
fn fixture_object(name: &str, desc: &serde_json::Value) -> Result<HandleRef, FixtureError> {
    let bad = |message: String| FixtureError::BadObject {
        name: name.to_string(),
        message,
    };
    let kind = desc
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| bad("missing `kind`".into()))?;
    let text = |field: &str, default: &str| -> String {
        desc.get(field)
            .and_then(|v| v.as_str())
            .unwrap_or(default)
            .to_string()
    };
    let int = |field: &str| desc.get(field).and_then(|v| v.as_u64());

    let handle: HandleRef = match kind {
        "tensor" => {
            let shape = shape_of(desc, "shape").map_err(&bad)?;
            let nan_count = int("nan_count").unwrap_or(0);
            let data = if let Some(values) = desc.get("values").and_then(|v| v.as_array()) {
                TensorData::Explicit(values.iter().map(fixture_scalar).collect())
            } else if nan_count > 0 {
                TensorData::WithNans {
                    fill: 0.0,
                    nan_at: (0..nan_count).collect(),
                }
            } else if text("dtype", "float32").starts_with("int") {
                TensorData::FillInt(0)
            } else {
                TensorData::Fill(0.0)
            };
            SynTensor::new(&text("class", "ndarray"), &shape, &text("dtype", "float32"), data)
        }
        "series" => {
            let values = desc
                .get("values")
                .and_then(|v| v.as_array())
                .ok_or_else(|| bad("series needs `values`".into()))?
                .iter()
                .map(fixture_scalar)
                .collect();
            SynSeries::new(
                desc.get("name").and_then(|v| v.as_str()),
                &text("dtype", "object"),
                values,
            )
        }
        "frame" => {
            let columns = desc
                .get("columns")
                .and_then(|v| v.as_array())
                .ok_or_else(|| bad("frame needs `columns`".into()))?;
            let mut cols = Vec::with_capacity(columns.len());
            for col in columns {
                let col_name = col
                    .get("name")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| bad("column needs `name`".into()))?;
                let values: Vec<Scalar> = col
                    .get("values")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| bad(format!("column `{col_name}` needs `values`")))?
                    .iter()
                    .map(fixture_scalar)
                    .collect();
                let dtype = col.get("dtype").and_then(|v| v.as_str()).unwrap_or("object");
                cols.push((col_name.to_string(), SynSeries::new(Some(col_name), dtype, values)));
            }
            SynFrame::new(cols)
        }
        "image_iterator" => Arc::new(SynImageIterator {
            class_name: text("class", "DirectoryIterator"),
            samples: int("samples"),
            num_classes: int("num_classes"),
            batch_size: int("batch_size"),
            image_shape: desc.get("image_shape").map(|_| shape_of(desc, "image_shape")).transpose().map_err(&bad)?,
            target_size: desc.get("target_size").map(|_| shape_of(desc, "target_size")).transpose().map_err(&bad)?,
        }),
        "stream" => {
            let element_spec = desc.get("element_spec").and_then(|v| v.as_array()).map(|specs| {
                specs
                    .iter()
                    .filter_map(|spec| {
                        let shape = spec.get("shape")?.as_array()?;
                        let dtype = spec.get("dtype")?.as_str()?;
                        Some((
                            shape.iter().map(|d| d.as_i64()).collect::<Vec<_>>(),
                            dtype.to_string(),
                        ))
                    })
                    .collect::<Vec<_>>()
            });
            Arc::new(SynStreamDataset {
                class_name: text("class", "PrefetchDataset"),
                element_spec,
                batch_size: int("batch_size"),
                dataset: None,
                consumed: AtomicU64::new(0),
            })
        }
        "data_loader" => {
            let dataset = desc
                .get("dataset")
                .map(|inner| fixture_object(&format!("{name}.dataset"), inner))
                .transpose()?
                .ok_or_else(|| bad("data_loader needs `dataset`".into()))?;
            SynDataLoader::new(int("batch_size").unwrap_or(1), dataset)
        }
        "map_dataset" => {
            let shape = shape_of(desc, "sample_shape").map_err(&bad)?;
            let labels: Vec<i64> = desc
                .get("labels")
                .and_then(|v| v.as_array())
                .map(|arr| arr.iter().filter_map(|x| x.as_i64()).collect())
                .unwrap_or_else(|| vec![0, 1]);
            SynMapDataset::new(
                &text("class", "TensorDataset"),
                int("length").unwrap_or(0),
                &shape,
                &labels,
            )
        }
        "estimator" => Arc::new(SynEstimator {
            class_name: text("class", "RandomForestRegressor"),
            fitted: desc.get("fitted").and_then(|v| v.as_bool()).unwrap_or(false),
            n_features_in: int("n_features_in"),
            n_outputs: int("n_outputs"),
            n_classes: int("n_classes"),
            classes: desc.get("classes").and_then(|v| v.as_array()).map(|arr| {
                (
                    arr.iter().map(fixture_scalar).collect(),
                    text("classes_dtype", "int64"),
                )
            }),
        }),
        "scalar" => scalar(fixture_scalar(
            desc.get("value").unwrap_or(&serde_json::Value::Null),
        )),
        "opaque" => SynOpaque::new(&text("class", "object"), &text("repr", "<object>")),
        other => return Err(bad(format!("unknown object kind `{other}`"))),
    };
    Ok(handle)
}

/// Load a synthetic kernel namespace from fixture JSON.
///
/// The fixture is an object mapping symbol names to object descriptions;
/// see the repository README for the schema.
pub fn kernel_from_fixture(json: &str) -> Result<SyntheticKernel, FixtureError> {
    let doc: serde_json::Value = serde_json::from_str(json)?;
    let map = doc.as_object().ok_or(FixtureError::NotAnObject)?;
    let mut kernel = SyntheticKernel::new();
    for (name, desc) in map {
        kernel.bind(name, fixture_object(name, desc)?);
    }
    Ok(kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{int_attr, int_list};

    #[test]
    fn tensor_attrs() {
        let t = SynTensor::new("ndarray", &[10, 3], "float32", TensorData::Fill(1.0));
        let h: HandleRef = t;
        assert_eq!(h.class_name(), "ndarray");
        assert_eq!(int_list(&h.get_attr("shape").unwrap()), Some(vec![10, 3]));
        assert_eq!(h.scalar_elements().unwrap().count(), 30);
    }

    #[test]
    fn map_dataset_counts_accesses() {
        let ds = SynMapDataset::new("TensorDataset", 5, &[3], &[0, 1]);
        let h: HandleRef = ds.clone();
        assert_eq!(h.sequence_len(), Some(5));
        let _ = h.get_index(0);
        let _ = h.get_index(1);
        assert_eq!(ds.access_count(), 2);
    }

    #[test]
    fn stream_counter_starts_at_zero() {
        let ds = SynStreamDataset::pipeline(
            "PrefetchDataset",
            vec![(vec![None, Some(28), Some(28)], "float32".into())],
        );
        assert_eq!(ds.consumed_count(), 0);
        ds.consume();
        assert_eq!(ds.consumed_count(), 1);
    }

    #[test]
    fn fixture_round_trip() {
        let json = r#"{
            "X": {"kind": "tensor", "shape": [4, 2], "dtype": "float64"},
            "names": {"kind": "series", "dtype": "object", "values": ["a", "b"]},
            "model": {"kind": "estimator", "class": "LinearRegression", "fitted": true, "n_features_in": 2}
        }"#;
        let kernel = kernel_from_fixture(json).unwrap();
        let x = kernel.lookup("X").unwrap();
        assert_eq!(int_list(&x.get_attr("shape").unwrap()), Some(vec![4, 2]));
        let model = kernel.lookup("model").unwrap();
        assert_eq!(int_attr(&model, "n_features_in_"), Some(2));
        assert!(kernel.resolve("model.fit").unwrap().is_callable());
    }

    #[test]
    fn fixture_rejects_unknown_kind() {
        let err = match kernel_from_fixture(r#"{"x": {"kind": "wat"}}"#) {
            Err(e) => e,
            Ok(_) => panic!("expected error"),
        };
        assert!(matches!(err, FixtureError::BadObject { .. }));
    }
}
