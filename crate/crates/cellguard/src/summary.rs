//! Structured runtime summaries of kernel objects and their canonical JSON
//! form.
//!
//! Typed summaries are what the extractor produces; a [`SummaryDoc`] is the
//! same information as an ordered field list, which is what configuration
//! filtering, rendering, and the wire format operate on. The canonical JSON
//! document is a top-level map `symbol -> {"kind": tag, ...fields}` with
//! sorted keys, shapes as integer arrays, and dtypes as lowercase text.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde_json::{json, Map, Value};

use crate::kernel::Scalar;

/// Classification of a one-dimensional value collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Binary,
    Categorical,
    Continuous,
}

impl ValueKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValueKind::Binary => "binary",
            ValueKind::Categorical => "categorical",
            ValueKind::Continuous => "continuous",
        }
    }
}

/// Summary of an n-dimensional tensor or array.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSummary {
    pub shape: Vec<u64>,
    pub dtype: String,
    pub has_missing: bool,
    /// Present when the missing-value scan sampled instead of reading fully.
    pub scan_note: Option<String>,
}

/// Summary of a one-dimensional labeled array.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub length: u64,
    pub dtype: String,
    pub has_missing: bool,
    pub value_kind: ValueKind,
    /// Present exactly for binary/categorical kinds.
    pub unique_count: Option<u64>,
    /// Present exactly for the continuous kind.
    pub value_range: Option<(f64, f64)>,
    pub example_values: Vec<Scalar>,
}

/// Per-column summary inside a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSummary {
    pub name: String,
    pub value_kind: ValueKind,
    pub unique_count: Option<u64>,
    pub value_range: Option<(f64, f64)>,
    pub has_missing: bool,
    pub example_values: Vec<Scalar>,
    /// Failure note when this column could not be summarized.
    pub note: Option<String>,
}

/// Summary of a two-dimensional labeled table.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSummary {
    pub shape: (u64, u64),
    pub columns: Vec<ColumnSummary>,
    /// True exactly when the original column count exceeds the cap.
    pub truncated: bool,
}

/// Summary of an image-data iterator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IteratorSummary {
    pub samples: Option<u64>,
    pub num_classes: Option<u64>,
    pub batch_size: Option<u64>,
    pub image_shape: Option<Vec<u64>>,
    pub target_size: Option<Vec<u64>>,
    /// Names any public attributes that were missing.
    pub note: Option<String>,
}

/// Shape/dtype of one stream element component; `None` dims are unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementSpec {
    pub shape: Vec<Option<i64>>,
    pub dtype: String,
}

/// Summary of a consumed-on-access dataset or data loader.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSummary {
    pub class_name: String,
    pub element_spec: Option<Vec<ElementSpec>>,
    pub batch_size: Option<u64>,
    /// `[batch_size] + sample shape`, derived from an accessible underlying
    /// map-style dataset; never from drawing a batch.
    pub batch_shape: Option<Vec<u64>>,
    pub schema_note: String,
}

/// Summary of a map-style dataset probed by index.
#[derive(Debug, Clone, PartialEq)]
pub struct MapDatasetSummary {
    pub length: u64,
    pub probed: u64,
    pub sample_input_shape: Vec<u64>,
    pub sample_label_summary: String,
    pub batch_shape: Option<Vec<u64>>,
    pub error_note: Option<String>,
}

/// Summary of an estimator or label encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub class_name: String,
    pub fitted: bool,
    pub n_features_in: Option<u64>,
    pub n_outputs_or_classes: Option<u64>,
    /// `(class count, class dtype)` for label encoders.
    pub encoder_classes: Option<(u64, String)>,
}

/// Fallback summary: class name and truncated repr only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpaqueSummary {
    pub class_name: String,
    pub repr_prefix: String,
}

/// Tagged union over every summary variant.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectSummary {
    Tensor(TensorSummary),
    Series(SeriesSummary),
    Frame(FrameSummary),
    ImageIterator(IteratorSummary),
    Stream(StreamSummary),
    MapDataset(MapDatasetSummary),
    Estimator(EstimatorSummary),
    Opaque(OpaqueSummary),
}

impl ObjectSummary {
    pub fn kind(&self) -> &'static str {
        match self {
            ObjectSummary::Tensor(_) => "tensor",
            ObjectSummary::Series(_) => "series",
            ObjectSummary::Frame(_) => "frame",
            ObjectSummary::ImageIterator(_) => "iterator",
            ObjectSummary::Stream(_) => "stream",
            ObjectSummary::MapDataset(_) => "map_dataset",
            ObjectSummary::Estimator(_) => "estimator",
            ObjectSummary::Opaque(_) => "opaque",
        }
    }

    /// Project into the canonical ordered field-list form.
    pub fn to_doc(&self) -> SummaryDoc {
        let mut fields: Vec<(String, Value)> = Vec::new();
        let mut push = |name: &str, value: Value| fields.push((name.to_string(), value));
        match self {
            ObjectSummary::Tensor(t) => {
                push("shape", json!(t.shape));
                push("dtype", json!(t.dtype.to_lowercase()));
                push("has_missing", json!(t.has_missing));
                if let Some(note) = &t.scan_note {
                    push("scan_note", json!(note));
                }
            }
            ObjectSummary::Series(s) => {
                push("length", json!(s.length));
                push("dtype", json!(s.dtype.to_lowercase()));
                push("has_missing", json!(s.has_missing));
                push("value_kind", json!(s.value_kind.as_str()));
                if let Some(u) = s.unique_count {
                    push("unique_count", json!(u));
                }
                if let Some((lo, hi)) = s.value_range {
                    push("value_range", json!([lo, hi]));
                }
                push(
                    "example_values",
                    Value::Array(s.example_values.iter().map(scalar_to_json).collect()),
                );
            }
            ObjectSummary::Frame(f) => {
                push("shape", json!([f.shape.0, f.shape.1]));
                push(
                    "columns",
                    Value::Array(f.columns.iter().map(column_to_json).collect()),
                );
                push("truncated", json!(f.truncated));
            }
            ObjectSummary::ImageIterator(it) => {
                if let Some(v) = it.samples {
                    push("samples", json!(v));
                }
                if let Some(v) = it.num_classes {
                    push("num_classes", json!(v));
                }
                if let Some(v) = it.batch_size {
                    push("batch_size", json!(v));
                }
                if let Some(v) = &it.image_shape {
                    push("image_shape", json!(v));
                }
                if let Some(v) = &it.target_size {
                    push("target_size", json!(v));
                }
                if let Some(note) = &it.note {
                    push("note", json!(note));
                }
            }
            ObjectSummary::Stream(st) => {
                push("class_name", json!(st.class_name));
                if let Some(specs) = &st.element_spec {
                    push(
                        "element_spec",
                        Value::Array(
                            specs
                                .iter()
                                .map(|spec| {
                                    json!({
                                        "shape": spec.shape,
                                        "dtype": spec.dtype.to_lowercase(),
                                    })
                                })
                                .collect(),
                        ),
                    );
                }
                if let Some(v) = st.batch_size {
                    push("batch_size", json!(v));
                }
                if let Some(v) = &st.batch_shape {
                    push("batch_shape", json!(v));
                }
                push("schema_note", json!(st.schema_note));
            }
            ObjectSummary::MapDataset(m) => {
                push("length", json!(m.length));
                push("probed", json!(m.probed));
                push("sample_input_shape", json!(m.sample_input_shape));
                push("sample_label_summary", json!(m.sample_label_summary));
                if let Some(v) = &m.batch_shape {
                    push("batch_shape", json!(v));
                }
                if let Some(note) = &m.error_note {
                    push("error_note", json!(note));
                }
            }
            ObjectSummary::Estimator(e) => {
                push("class_name", json!(e.class_name));
                push("fitted", json!(e.fitted));
                if let Some(v) = e.n_features_in {
                    push("n_features_in", json!(v));
                }
                if let Some(v) = e.n_outputs_or_classes {
                    push("n_outputs_or_classes", json!(v));
                }
                if let Some((count, dtype)) = &e.encoder_classes {
                    push(
                        "encoder_classes",
                        json!({"count": count, "dtype": dtype.to_lowercase()}),
                    );
                }
            }
            ObjectSummary::Opaque(o) => {
                push("class_name", json!(o.class_name));
                push("repr_prefix", json!(o.repr_prefix));
            }
        }
        SummaryDoc {
            kind: self.kind().to_string(),
            fields,
        }
    }
}

fn scalar_to_json(s: &Scalar) -> Value {
    match s {
        Scalar::Missing => Value::Null,
        Scalar::Bool(b) => json!(b),
        Scalar::Int(i) => json!(i),
        Scalar::Float(f) => {
            if f.is_nan() || f.is_infinite() {
                Value::Null
            } else {
                json!(f)
            }
        }
        Scalar::Text(t) => json!(t),
    }
}

fn column_to_json(c: &ColumnSummary) -> Value {
    let mut obj = Map::new();
    obj.insert("name".into(), json!(c.name));
    obj.insert("value_kind".into(), json!(c.value_kind.as_str()));
    if let Some(u) = c.unique_count {
        obj.insert("unique_count".into(), json!(u));
    }
    if let Some((lo, hi)) = c.value_range {
        obj.insert("value_range".into(), json!([lo, hi]));
    }
    obj.insert("has_missing".into(), json!(c.has_missing));
    obj.insert(
        "example_values".into(),
        Value::Array(c.example_values.iter().map(scalar_to_json).collect()),
    );
    if let Some(note) = &c.note {
        obj.insert("note".into(), json!(note));
    }
    Value::Object(obj)
}

/// A summary as an ordered field list under a variant tag. Configuration
/// filtering drops fields from this form without invalidating any typed
/// invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryDoc {
    pub kind: String,
    pub fields: Vec<(String, Value)>,
}

impl SummaryDoc {
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("kind".into(), json!(self.kind));
        for (name, value) in &self.fields {
            obj.insert(name.clone(), value.clone());
        }
        Value::Object(obj)
    }

    pub fn from_json(value: &Value) -> Option<Self> {
        let obj = value.as_object()?;
        let kind = obj.get("kind")?.as_str()?.to_string();
        let fields = obj
            .iter()
            .filter(|(k, _)| k.as_str() != "kind")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Some(SummaryDoc { kind, fields })
    }
}

impl From<&ObjectSummary> for SummaryDoc {
    fn from(summary: &ObjectSummary) -> Self {
        summary.to_doc()
    }
}

/// The filtered, ordered runtime context for one target cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuntimeContext {
    /// Symbol -> summary, ordered lexicographically by symbol.
    pub entries: BTreeMap<String, SummaryDoc>,
    /// Referenced symbols that did not resolve in the kernel.
    pub undefined_symbols: BTreeSet<String>,
    /// Wall time of extraction; excluded from the canonical document.
    pub extraction_time: Duration,
}

impl RuntimeContext {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.undefined_symbols.is_empty()
    }

    /// Canonical JSON document: symbol -> tagged summary object, keys
    /// sorted; undefined symbols appear as `{"kind": "undefined"}`.
    pub fn to_canonical_json(&self) -> String {
        let mut keys: Vec<&String> = self
            .entries
            .keys()
            .chain(self.undefined_symbols.iter())
            .collect();
        keys.sort();
        keys.dedup();
        let mut top = Map::new();
        for symbol in keys {
            match self.entries.get(symbol) {
                Some(doc) => top.insert(symbol.clone(), doc.to_json()),
                None => top.insert(
                    symbol.clone(),
                    json!({"kind": "undefined", "note": "name not defined in kernel"}),
                ),
            };
        }
        serde_json::to_string_pretty(&Value::Object(top)).expect("JSON maps always serialize")
    }

    pub fn from_canonical_json(text: &str) -> Result<Self, serde_json::Error> {
        let doc: Value = serde_json::from_str(text)?;
        let mut ctx = RuntimeContext::default();
        if let Some(obj) = doc.as_object() {
            for (symbol, value) in obj {
                match SummaryDoc::from_json(value) {
                    Some(doc) if doc.kind == "undefined" => {
                        ctx.undefined_symbols.insert(symbol.clone());
                    }
                    Some(doc) => {
                        ctx.entries.insert(symbol.clone(), doc);
                    }
                    None => {}
                }
            }
        }
        Ok(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor_doc() -> SummaryDoc {
        ObjectSummary::Tensor(TensorSummary {
            shape: vec![10, 3, 256, 256],
            dtype: "float32".into(),
            has_missing: false,
            scan_note: None,
        })
        .to_doc()
    }

    #[test]
    fn tensor_doc_field_order() {
        let doc = tensor_doc();
        let names: Vec<&str> = doc.fields.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, vec!["shape", "dtype", "has_missing"]);
    }

    #[test]
    fn dtype_lowercased() {
        let doc = ObjectSummary::Tensor(TensorSummary {
            shape: vec![2],
            dtype: "Float32".into(),
            has_missing: false,
            scan_note: None,
        })
        .to_doc();
        assert_eq!(doc.fields[1].1, json!("float32"));
    }

    #[test]
    fn canonical_json_sorted_with_undefined() {
        let mut ctx = RuntimeContext::default();
        ctx.entries.insert("b".into(), tensor_doc());
        ctx.undefined_symbols.insert("a".into());
        let text = ctx.to_canonical_json();
        let a_pos = text.find("\"a\"").unwrap();
        let b_pos = text.find("\"b\"").unwrap();
        assert!(a_pos < b_pos);
        assert!(text.contains("\"kind\": \"undefined\""));

        let back = RuntimeContext::from_canonical_json(&text).unwrap();
        assert_eq!(back.entries, ctx.entries);
        assert_eq!(back.undefined_symbols, ctx.undefined_symbols);
    }

    #[test]
    fn series_optional_fields() {
        let doc = ObjectSummary::Series(SeriesSummary {
            length: 3,
            dtype: "object".into(),
            has_missing: false,
            value_kind: ValueKind::Categorical,
            unique_count: Some(3),
            value_range: None,
            example_values: vec![Scalar::Text("a".into())],
        })
        .to_doc();
        let names: Vec<&str> = doc.fields.iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"unique_count"));
        assert!(!names.contains(&"value_range"));
    }
}
