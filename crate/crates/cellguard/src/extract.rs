//! Runtime information extraction: convert kernel objects referenced by the
//! target cell into structured summaries.
//!
//! Objects are recognized by class name and attribute probing, never by
//! importing frameworks. Dispatch tries tensor, series, frame, image
//! iterator, stream, map-style dataset, estimator, then falls back to an
//! opaque summary; per-object failures degrade instead of aborting.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kernel::{int_attr, int_list, HandleRef, KernelSession, Scalar};
use crate::summary::{
    ColumnSummary, ElementSpec, EstimatorSummary, FrameSummary, IteratorSummary,
    MapDatasetSummary, ObjectSummary, OpaqueSummary, RuntimeContext, SeriesSummary, StreamSummary,
    TensorSummary, ValueKind,
};
use crate::symbols::SymbolSet;

/// Extraction knobs, with the defaults the tool ships with.
#[derive(Debug, Clone)]
pub struct ExtractionConfig {
    /// Frame columns summarized before truncation.
    pub column_cap: usize,
    /// Elements probed from a map-style dataset.
    pub probe_count: u64,
    /// Example values recorded per series/column.
    pub example_cap: usize,
    /// Numeric collections with more uniques than this are continuous.
    pub categorical_unique_cap: u64,
    /// Full missing-value scan up to this many elements; above it, a
    /// fixed-seed uniform sample is scanned instead.
    pub full_scan_limit: u64,
    /// Sample size for the sampled missing-value scan.
    pub sample_scan_size: u64,
    /// Character cap for opaque repr prefixes.
    pub repr_prefix_cap: usize,
    /// When set, simulate batching on map-style datasets with this size.
    pub simulate_batch: Option<u64>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            column_cap: 20,
            probe_count: 10,
            example_cap: 3,
            categorical_unique_cap: 20,
            full_scan_limit: 10_000_000,
            sample_scan_size: 1_000_000,
            repr_prefix_cap: 120,
            simulate_batch: None,
        }
    }
}

const TENSOR_CLASS_NAMES: &[&str] = &[
    "ndarray",
    "Tensor",
    "EagerTensor",
    "ResourceVariable",
    "Variable",
    "Parameter",
    "masked_array",
];

fn has_attr(h: &HandleRef, name: &str) -> bool {
    h.get_attr(name).is_some()
}

/// Normalize a dtype rendering to the bare lowercase name: `float32` from
/// `dtype('float32')`, `<dtype: 'float32'>`, or `torch.float32`.
fn normalize_dtype(raw: &str) -> String {
    let mut text = raw.trim().to_lowercase();
    if let (Some(start), Some(end)) = (text.find('\''), text.rfind('\'')) {
        if start < end {
            text = text[start + 1..end].to_string();
        }
    }
    if let Some(stripped) = text.strip_prefix("torch.") {
        text = stripped.to_string();
    }
    text
}

/// Read a dtype off a handle attribute: a plain string, the object's `name`
/// attribute, or a normalized repr, in that order.
fn dtype_text(h: &HandleRef, attr: &str) -> Option<String> {
    let value = h.get_attr(attr)?;
    if let Some(Scalar::Text(t)) = value.as_scalar() {
        return Some(normalize_dtype(&t));
    }
    if let Some(name) = value.get_attr("name") {
        if let Some(Scalar::Text(t)) = name.as_scalar() {
            return Some(normalize_dtype(&t));
        }
    }
    match value.as_scalar() {
        Some(other) => Some(normalize_dtype(&other.render())),
        None => Some(normalize_dtype(&value.repr_text())),
    }
}

fn is_tensor_like(h: &HandleRef) -> bool {
    let class = h.class_name();
    if TENSOR_CLASS_NAMES.contains(&class.as_str()) {
        return true;
    }
    class != "Series"
        && class != "DataFrame"
        && has_attr(h, "shape")
        && has_attr(h, "dtype")
        && !has_attr(h, "columns")
}

fn is_series_like(h: &HandleRef) -> bool {
    h.class_name() == "Series"
}

fn is_frame_like(h: &HandleRef) -> bool {
    h.class_name() == "DataFrame" || h.labeled_columns().is_some()
}

fn is_image_iterator_like(h: &HandleRef) -> bool {
    let class = h.class_name();
    class.ends_with("Iterator")
        || (has_attr(h, "num_classes") && has_attr(h, "samples") && has_attr(h, "batch_size"))
}

fn is_stream_like(h: &HandleRef) -> bool {
    has_attr(h, "element_spec")
        || (has_attr(h, "dataset") && has_attr(h, "batch_size"))
        || h.class_name().contains("Iterable")
}

fn is_map_dataset_like(h: &HandleRef) -> bool {
    h.sequence_len().is_some() && h.supports_index_access()
}

fn is_estimator_like(h: &HandleRef) -> bool {
    let callable = |name: &str| h.get_attr(name).map(|a| a.is_callable()).unwrap_or(false);
    callable("fit") && (callable("predict") || callable("transform"))
}

fn opaque(h: &HandleRef, cfg: &ExtractionConfig) -> ObjectSummary {
    let mut repr: String = h.repr_text();
    if repr.chars().count() > cfg.repr_prefix_cap {
        repr = repr.chars().take(cfg.repr_prefix_cap).collect::<String>() + "...";
    }
    ObjectSummary::Opaque(OpaqueSummary {
        class_name: h.class_name(),
        repr_prefix: repr,
    })
}

/// Missing-value scan over an element stream of known size.
///
/// Up to `full_scan_limit` elements are read exhaustively; beyond that a
/// fixed-seed uniform sample of `sample_scan_size` positions is checked and
/// the result is flagged as sampled.
fn scan_missing(
    elements: Box<dyn Iterator<Item = Scalar> + '_>,
    total: u64,
    cfg: &ExtractionConfig,
) -> (bool, bool) {
    if total <= cfg.full_scan_limit {
        (elements.into_iter().any(|s| s.is_missing()), false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let chosen: HashSet<u64> =
            index_sample(&mut rng, total as usize, cfg.sample_scan_size as usize)
                .into_iter()
                .map(|i| i as u64)
                .collect();
        let found = elements
            .into_iter()
            .enumerate()
            .any(|(i, s)| chosen.contains(&(i as u64)) && s.is_missing());
        (found, true)
    }
}

/// Summarize an n-dimensional tensor/array; degrades to opaque when shape or
/// dtype attributes are unreadable.
pub fn summarize_tensor(h: &HandleRef, cfg: &ExtractionConfig) -> ObjectSummary {
    let shape = match h.get_attr("shape").and_then(|s| int_list(&s)) {
        Some(shape) => shape,
        None => return opaque(h, cfg),
    };
    let dtype = match dtype_text(h, "dtype") {
        Some(d) => d,
        None => return opaque(h, cfg),
    };
    let total: u64 = shape.iter().product();
    let (has_missing, sampled) = match h.native_missing_scan() {
        Some(found) => (found, false),
        None => match h.scalar_elements() {
            Some(iter) => scan_missing(iter, total, cfg),
            None => (false, false),
        },
    };
    ObjectSummary::Tensor(TensorSummary {
        shape,
        dtype,
        has_missing,
        scan_note: sampled.then(|| "missing-value scan sampled".to_string()),
    })
}

/// Single-pass profile of a one-dimensional value collection.
struct ValueProfile {
    length: u64,
    has_missing: bool,
    any_text: bool,
    numeric_min: Option<f64>,
    numeric_max: Option<f64>,
    uniques: HashSet<String>,
    examples: Vec<Scalar>,
}

fn profile_values<I: Iterator<Item = Scalar>>(values: I, example_cap: usize) -> ValueProfile {
    let mut profile = ValueProfile {
        length: 0,
        has_missing: false,
        any_text: false,
        numeric_min: None,
        numeric_max: None,
        uniques: HashSet::new(),
        examples: Vec::new(),
    };
    for value in values {
        profile.length += 1;
        if value.is_missing() {
            profile.has_missing = true;
            continue;
        }
        if profile.examples.len() < example_cap {
            profile.examples.push(value.clone());
        }
        let numeric = match &value {
            Scalar::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            Scalar::Int(i) => Some(*i as f64),
            Scalar::Float(f) => Some(*f),
            _ => None,
        };
        match numeric {
            Some(x) => {
                profile.numeric_min = Some(profile.numeric_min.map_or(x, |m: f64| m.min(x)));
                profile.numeric_max = Some(profile.numeric_max.map_or(x, |m: f64| m.max(x)));
            }
            None => profile.any_text = true,
        }
        profile.uniques.insert(value.render());
    }
    profile
}

impl ValueProfile {
    /// Numeric with exactly two uniques is binary; non-numeric values, or
    /// numeric with few uniques, are categorical; everything else is
    /// continuous.
    fn classify(&self, cfg: &ExtractionConfig) -> ValueKind {
        let unique = self.uniques.len() as u64;
        if !self.any_text && unique == 2 {
            ValueKind::Binary
        } else if self.any_text || unique <= cfg.categorical_unique_cap {
            ValueKind::Categorical
        } else {
            ValueKind::Continuous
        }
    }
}

/// Summarize a one-dimensional labeled array.
pub fn summarize_series(h: &HandleRef, cfg: &ExtractionConfig) -> ObjectSummary {
    let values = match h.scalar_elements() {
        Some(iter) => iter,
        None => return opaque(h, cfg),
    };
    let profile = profile_values(values, cfg.example_cap);
    let dtype = dtype_text(h, "dtype")
        .unwrap_or_else(|| if profile.any_text { "object" } else { "float64" }.to_string());
    let value_kind = profile.classify(cfg);
    let (unique_count, value_range) = match value_kind {
        ValueKind::Binary | ValueKind::Categorical => (Some(profile.uniques.len() as u64), None),
        ValueKind::Continuous => (
            None,
            match (profile.numeric_min, profile.numeric_max) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                _ => None,
            },
        ),
    };
    ObjectSummary::Series(SeriesSummary {
        length: profile.length,
        dtype,
        has_missing: profile.has_missing,
        value_kind,
        unique_count,
        value_range,
        example_values: profile.examples,
    })
}

fn summarize_column(name: &str, column: &HandleRef, cfg: &ExtractionConfig) -> ColumnSummary {
    let values = match column.scalar_elements() {
        Some(iter) => iter,
        None => {
            return ColumnSummary {
                name: name.to_string(),
                value_kind: ValueKind::Categorical,
                unique_count: None,
                value_range: None,
                has_missing: false,
                example_values: Vec::new(),
                note: Some("column values unreadable".to_string()),
            }
        }
    };
    let profile = profile_values(values, cfg.example_cap);
    let value_kind = profile.classify(cfg);
    let (unique_count, value_range) = match value_kind {
        ValueKind::Binary | ValueKind::Categorical => (Some(profile.uniques.len() as u64), None),
        ValueKind::Continuous => (
            None,
            match (profile.numeric_min, profile.numeric_max) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                _ => None,
            },
        ),
    };
    ColumnSummary {
        name: name.to_string(),
        value_kind,
        unique_count,
        value_range,
        has_missing: profile.has_missing,
        example_values: profile.examples,
        note: None,
    }
}

/// Summarize a two-dimensional labeled table, capping the column list.
pub fn summarize_frame(h: &HandleRef, cfg: &ExtractionConfig) -> ObjectSummary {
    let columns = match h.labeled_columns() {
        Some(cols) => cols,
        None => return opaque(h, cfg),
    };
    let shape = h
        .get_attr("shape")
        .and_then(|s| int_list(&s))
        .and_then(|dims| match dims.as_slice() {
            [rows, cols] => Some((*rows, *cols)),
            _ => None,
        })
        .unwrap_or_else(|| {
            let rows = h.sequence_len().unwrap_or(0);
            (rows, columns.len() as u64)
        });
    let truncated = columns.len() > cfg.column_cap;
    let summaries = columns
        .iter()
        .take(cfg.column_cap)
        .map(|(name, col)| summarize_column(name, col, cfg))
        .collect();
    ObjectSummary::Frame(FrameSummary {
        shape,
        columns: summaries,
        truncated,
    })
}

/// Summarize an image-data iterator from its public metadata; no batch is
/// ever drawn, and missing attributes are omitted with a note.
pub fn summarize_image_iterator(h: &HandleRef, _cfg: &ExtractionConfig) -> ObjectSummary {
    let samples = int_attr(h, "samples");
    let num_classes = int_attr(h, "num_classes");
    let batch_size = int_attr(h, "batch_size");
    let image_shape = h.get_attr("image_shape").and_then(|s| int_list(&s));
    let target_size = h.get_attr("target_size").and_then(|s| int_list(&s));

    let mut missing = Vec::new();
    for (present, name) in [
        (samples.is_some(), "samples"),
        (num_classes.is_some(), "num_classes"),
        (batch_size.is_some(), "batch_size"),
        (image_shape.is_some(), "image_shape"),
        (target_size.is_some(), "target_size"),
    ] {
        if !present {
            missing.push(name);
        }
    }
    ObjectSummary::ImageIterator(IteratorSummary {
        samples,
        num_classes,
        batch_size,
        image_shape,
        target_size,
        note: (!missing.is_empty()).then(|| format!("missing attributes: {}", missing.join(", "))),
    })
}

fn read_element_spec(h: &HandleRef) -> Option<Vec<ElementSpec>> {
    let spec_attr = h.get_attr("element_spec")?;
    // A single spec object or a tuple of them.
    let specs = spec_attr
        .items()
        .unwrap_or_else(|| vec![spec_attr.clone()]);
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let shape = spec.get_attr("shape")?.items()?;
        let dims = shape
            .iter()
            .map(|d| match d.as_scalar() {
                Some(Scalar::Int(i)) => Some(i),
                _ => None,
            })
            .collect();
        let dtype = dtype_text(&spec, "dtype").unwrap_or_else(|| "unknown".to_string());
        out.push(ElementSpec { shape: dims, dtype });
    }
    Some(out)
}

/// Shape of one probed sample: for `(input, label)` tuples, the input part.
fn sample_input_shape(sample: &HandleRef) -> Option<Vec<u64>> {
    let input = match sample.items() {
        Some(parts) if !parts.is_empty() => parts[0].clone(),
        _ => sample.clone(),
    };
    input.get_attr("shape").and_then(|s| int_list(&s))
}

/// Summarize a consumed-on-access dataset or data loader without touching
/// its iterator position. A loader's batch shape is derived from the
/// underlying map-style dataset when one is accessible.
pub fn summarize_stream(h: &HandleRef, _cfg: &ExtractionConfig) -> ObjectSummary {
    let class_name = h.class_name();
    let element_spec = read_element_spec(h);
    let batch_size = int_attr(h, "batch_size");

    let mut batch_shape = None;
    let schema_note;
    if element_spec.is_some() {
        schema_note = "element_spec metadata; no elements consumed".to_string();
    } else if let Some(dataset) = h.get_attr("dataset") {
        if dataset.supports_index_access() && dataset.sequence_len().is_some() {
            match dataset.get_index(0) {
                Some(Ok(sample)) => match (batch_size, sample_input_shape(&sample)) {
                    (Some(b), Some(shape)) => {
                        let mut dims = vec![b];
                        dims.extend(shape);
                        batch_shape = Some(dims);
                        schema_note =
                            "batch shape derived from underlying map-style dataset".to_string();
                    }
                    _ => {
                        schema_note =
                            "underlying dataset sample has no readable shape".to_string();
                    }
                },
                Some(Err(err)) => {
                    schema_note = format!("underlying dataset probe failed: {err}");
                }
                None => {
                    schema_note = "metadata-only: loader over inaccessible source".to_string();
                }
            }
        } else {
            schema_note = "metadata-only: loader over inaccessible source".to_string();
        }
    } else {
        schema_note = "metadata-only: iterable source".to_string();
    }
    ObjectSummary::Stream(StreamSummary {
        class_name,
        element_spec,
        batch_size,
        batch_shape,
        schema_note,
    })
}

/// Summarize a map-style dataset by probing the first `probe_count`
/// elements. Element access raising stops the probe and is reported in the
/// summary instead of failing extraction.
pub fn summarize_map_dataset(h: &HandleRef, cfg: &ExtractionConfig) -> ObjectSummary {
    let length = match h.sequence_len() {
        Some(n) => n,
        None => return opaque(h, cfg),
    };
    let to_probe = cfg.probe_count.min(length);

    let mut probed = 0;
    let mut error_note = None;
    let mut input_shape: Option<Vec<u64>> = None;
    let mut labels: Vec<String> = Vec::new();
    let mut labeled = false;
    for i in 0..to_probe {
        match h.get_index(i) {
            Some(Ok(sample)) => {
                probed += 1;
                if input_shape.is_none() {
                    input_shape = sample_input_shape(&sample);
                }
                if let Some(parts) = sample.items() {
                    if parts.len() >= 2 {
                        labeled = true;
                        if let Some(s) = parts[1].as_scalar() {
                            labels.push(s.render());
                        }
                    }
                }
            }
            Some(Err(err)) => {
                error_note = Some(format!(
                    "element access failed at index {i} after probing indices 0..{i}: {err}"
                ));
                break;
            }
            None => {
                error_note = Some(format!("index access unsupported at index {i}"));
                break;
            }
        }
    }

    let sample_label_summary = if !labeled {
        "no explicit labels".to_string()
    } else {
        let mut seen = Vec::new();
        for label in &labels {
            if !seen.contains(label) {
                seen.push(label.clone());
            }
        }
        let shown: Vec<String> = seen.iter().take(5).cloned().collect();
        format!("{} unique label(s) in probe: {}", seen.len(), shown.join(", "))
    };

    let batch_shape = match (cfg.simulate_batch, &input_shape) {
        (Some(batch), Some(shape)) if probed > 0 => {
            let mut dims = vec![batch.min(length)];
            dims.extend(shape.iter().copied());
            Some(dims)
        }
        _ => None,
    };

    ObjectSummary::MapDataset(MapDatasetSummary {
        length,
        probed,
        sample_input_shape: input_shape.unwrap_or_default(),
        sample_label_summary,
        batch_shape,
        error_note,
    })
}

/// Summarize an estimator or label encoder from its class name and fitted
/// attributes.
pub fn summarize_estimator(h: &HandleRef, _cfg: &ExtractionConfig) -> ObjectSummary {
    let class_name = h.class_name();
    let n_features_in = int_attr(h, "n_features_in_");
    let classes_attr = h.get_attr("classes_");
    let n_outputs_or_classes = int_attr(h, "n_classes_")
        .or_else(|| int_attr(h, "n_outputs_"))
        .or_else(|| classes_attr.as_ref().and_then(|c| c.sequence_len()));
    let encoder_classes = classes_attr.as_ref().and_then(|c| {
        let count = c.sequence_len()?;
        let dtype = dtype_text(c, "dtype").unwrap_or_else(|| "object".to_string());
        Some((count, dtype))
    });
    let fitted =
        n_features_in.is_some() || n_outputs_or_classes.is_some() || encoder_classes.is_some();
    ObjectSummary::Estimator(EstimatorSummary {
        class_name,
        fitted,
        n_features_in,
        n_outputs_or_classes,
        encoder_classes,
    })
}

/// Adapter dispatch: first matching kind wins; anything unmatched is opaque.
pub fn summarize_object(h: &HandleRef, cfg: &ExtractionConfig) -> ObjectSummary {
    if is_tensor_like(h) {
        summarize_tensor(h, cfg)
    } else if is_series_like(h) {
        summarize_series(h, cfg)
    } else if is_frame_like(h) {
        summarize_frame(h, cfg)
    } else if is_image_iterator_like(h) {
        summarize_image_iterator(h, cfg)
    } else if is_stream_like(h) {
        summarize_stream(h, cfg)
    } else if is_map_dataset_like(h) {
        summarize_map_dataset(h, cfg)
    } else if is_estimator_like(h) {
        summarize_estimator(h, cfg)
    } else {
        opaque(h, cfg)
    }
}

/// Summarize every root symbol the target cell references.
///
/// Resolvable symbols get one summary each; unresolvable ones are listed in
/// `undefined_symbols` for the model to reason about. Per-object failures
/// degrade to opaque summaries rather than aborting extraction.
pub fn extract_runtime_info(
    session: &dyn KernelSession,
    syms: &SymbolSet,
    cfg: &ExtractionConfig,
) -> RuntimeContext {
    let started = Instant::now();
    let mut ctx = RuntimeContext::default();
    for name in &syms.names {
        match session.lookup(name) {
            Some(handle) => {
                let summary = summarize_object(&handle, cfg);
                ctx.entries.insert(name.clone(), summary.to_doc());
            }
            None => {
                ctx.undefined_symbols.insert(name.clone());
            }
        }
    }
    ctx.extraction_time = started.elapsed();
    ctx
}
