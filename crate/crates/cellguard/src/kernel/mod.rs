//! Kernel-session abstraction: a read-only view of a live notebook
//! namespace.
//!
//! Extraction never mutates kernel state. The only operations a handle
//! offers are attribute reads plus two documented read-only accessors:
//! length, and per-index element access on map-style datasets. There is no
//! way to iterate a stream through this interface, so extraction cannot
//! consume data even by accident.

#[cfg(feature = "pykernel")]
mod pykernel;
mod synthetic;

use std::sync::Arc;

#[cfg(feature = "pykernel")]
pub use pykernel::{PyHandle, PyKernelSession, ReplayFailure};
pub use synthetic::{
    scalar, TensorData, TupleObject,
    kernel_from_fixture, FixtureError, SynCallable, SynDataLoader, SynEstimator, SynFrame,
    SynImageIterator, SynMapDataset, SynModule, SynOpaque, SynSeries, SynStreamDataset, SynTensor,
    SyntheticKernel,
};

/// One primitive value observed in the kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    /// None / NA markers.
    Missing,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Scalar {
    /// Missing markers and float NaNs both count as missing data.
    pub fn is_missing(&self) -> bool {
        match self {
            Scalar::Missing => true,
            Scalar::Float(f) => f.is_nan(),
            _ => false,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Scalar::Bool(_) | Scalar::Int(_) | Scalar::Float(_))
    }

    /// Canonical text rendering, used for example values and unique counting
    /// over mixed types.
    pub fn render(&self) -> String {
        match self {
            Scalar::Missing => "NaN".to_string(),
            Scalar::Bool(b) => if *b { "True" } else { "False" }.to_string(),
            Scalar::Int(i) => i.to_string(),
            Scalar::Float(f) => {
                if f.is_nan() {
                    "NaN".to_string()
                } else if f.fract() == 0.0 && f.abs() < 1e15 {
                    format!("{f:.1}")
                } else {
                    format!("{f}")
                }
            }
            Scalar::Text(s) => s.clone(),
        }
    }
}

/// One parameter of an introspected callable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub required: bool,
    pub default_repr: Option<String>,
    pub keyword_only: bool,
    pub annotation: Option<String>,
}

/// Declared signature of a callable, as introspection reports it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallableSignature {
    pub params: Vec<ParamSpec>,
    pub return_annotation: Option<String>,
}

pub type HandleRef = Arc<dyn KernelObject>;

/// Read-only view of one object in the kernel namespace.
///
/// Adapters recognize objects by class name and attribute probing, so a
/// handle only needs to answer the protocol questions below; everything has
/// a sensible "not supported" default.
pub trait KernelObject: Send + Sync {
    fn class_name(&self) -> String;

    fn repr_text(&self) -> String {
        format!("<{} object>", self.class_name())
    }

    /// Attribute read. Never executes user code.
    fn get_attr(&self, _name: &str) -> Option<HandleRef> {
        None
    }

    /// Public attribute names of the object (non-underscore-prefixed).
    fn attr_names(&self) -> Vec<String> {
        Vec::new()
    }

    /// Primitive view, when the object is a plain value.
    fn as_scalar(&self) -> Option<Scalar> {
        None
    }

    /// Tuple/list view, when the object is a small fixed collection.
    fn items(&self) -> Option<Vec<HandleRef>> {
        None
    }

    /// The host `len()` protocol, when supported.
    fn sequence_len(&self) -> Option<u64> {
        None
    }

    /// Whether the object supports per-index element access. Recognition
    /// probes this flag instead of performing a counted access.
    fn supports_index_access(&self) -> bool {
        false
    }

    /// Per-index element access for map-style datasets. `None` means the
    /// object does not support random access; `Some(Err(_))` mirrors user
    /// code raising.
    fn get_index(&self, _index: u64) -> Option<Result<HandleRef, String>> {
        None
    }

    /// Non-consuming element stream of a one-dimensional or flattened
    /// n-dimensional value collection (arrays, series, frame columns).
    fn scalar_elements(&self) -> Option<Box<dyn Iterator<Item = Scalar> + '_>> {
        None
    }

    /// Host-native missing-data answer, when the backend can compute one
    /// without streaming elements.
    fn native_missing_scan(&self) -> Option<bool> {
        None
    }

    /// Labeled-column view of a two-dimensional table, in storage order.
    fn labeled_columns(&self) -> Option<Vec<(String, HandleRef)>> {
        None
    }

    fn is_callable(&self) -> bool {
        false
    }

    /// Introspected signature, when the object is callable.
    fn signature(&self) -> Option<CallableSignature> {
        None
    }

    fn docstring(&self) -> Option<String> {
        None
    }
}

/// A live kernel namespace that names can be resolved against.
pub trait KernelSession: Send + Sync {
    /// Look up a top-level name in the namespace.
    fn lookup(&self, name: &str) -> Option<HandleRef>;

    /// Resolve a name or dotted path by attribute reads only.
    fn resolve(&self, path: &str) -> Option<HandleRef> {
        let mut parts = path.split('.');
        let mut handle = self.lookup(parts.next()?)?;
        for part in parts {
            handle = handle.get_attr(part)?;
        }
        Some(handle)
    }
}

/// Read a tuple/list-of-ints view (shapes, sizes) off a handle.
pub fn int_list(handle: &HandleRef) -> Option<Vec<u64>> {
    let items = handle.items()?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        match item.as_scalar()? {
            Scalar::Int(i) if i >= 0 => out.push(i as u64),
            _ => return None,
        }
    }
    Some(out)
}

/// Read a plain integer attribute off a handle.
pub fn int_attr(handle: &HandleRef, name: &str) -> Option<u64> {
    match handle.get_attr(name)?.as_scalar()? {
        Scalar::Int(i) if i >= 0 => Some(i as u64),
        _ => None,
    }
}

/// Read a text attribute (or the text rendering of an object attribute).
pub fn text_attr(handle: &HandleRef, name: &str) -> Option<String> {
    let attr = handle.get_attr(name)?;
    match attr.as_scalar() {
        Some(Scalar::Text(s)) => Some(s),
        Some(other) => Some(other.render()),
        None => Some(attr.repr_text()),
    }
}
