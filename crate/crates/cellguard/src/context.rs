//! Runtime-information categories, experiment configurations, and context
//! rendering.
//!
//! Every summary field belongs to exactly one category: structural (S),
//! representation/type semantics (R), or value semantics (V). The shipped
//! field-category table is a data file so the ablation semantics stay
//! auditable. Configurations remove whole categories (`+RT-S`, `+RT-R`,
//! `+RT-V`), drop runtime information entirely (`-RT`), or add API
//! documentation grounding (`+D`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use serde_json::Value;

use crate::error::ConfigError;
use crate::summary::{ObjectSummary, RuntimeContext, SummaryDoc};

/// The shipped field-category table.
pub const FIELD_CATEGORY_TABLE: &str = include_str!("../data/field_categories.tsv");

/// Runtime-information category of one summary field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    /// Sizes, shapes, counts.
    Structural,
    /// Object/data types, dtypes, schema-level properties.
    Representation,
    /// Concrete values, ranges, missing data, readiness.
    Value,
}

impl Category {
    pub fn letter(&self) -> char {
        match self {
            Category::Structural => 'S',
            Category::Representation => 'R',
            Category::Value => 'V',
        }
    }

    pub fn from_letter(letter: &str) -> Option<Self> {
        match letter {
            "S" => Some(Category::Structural),
            "R" => Some(Category::Representation),
            "V" => Some(Category::Value),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Parsed field-category table: `kind.field` (with `columns.` nesting for
/// frames) to category.
#[derive(Debug, Clone)]
pub struct FieldCategoryTable {
    map: BTreeMap<String, Category>,
}

impl FieldCategoryTable {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = raw.splitn(2, '\t');
            let key = parts.next().unwrap_or_default().trim();
            let cat = parts.next().map(str::trim).ok_or(ConfigError::BadLine {
                line: idx + 1,
                message: "expected <kind>.<field><TAB><S|R|V>".into(),
            })?;
            let category = Category::from_letter(cat).ok_or(ConfigError::BadLine {
                line: idx + 1,
                message: format!("unknown category `{cat}`"),
            })?;
            if !key.contains('.') {
                return Err(ConfigError::BadLine {
                    line: idx + 1,
                    message: format!("key `{key}` is not of the form kind.field"),
                });
            }
            map.insert(key.to_string(), category);
        }
        Ok(Self { map })
    }

    /// The table compiled into the binary.
    pub fn shipped() -> &'static Self {
        static TABLE: OnceLock<FieldCategoryTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            FieldCategoryTable::parse(FIELD_CATEGORY_TABLE)
                .expect("shipped field-category table parses")
        })
    }

    pub fn category_of(&self, kind: &str, field: &str) -> Option<Category> {
        self.map.get(&format!("{kind}.{field}")).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Category)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Category map over every present field of a summary, using the shipped
/// table. Nested frame-column fields are keyed `columns.<field>`.
pub fn categorize_fields(
    summary: &ObjectSummary,
) -> Result<BTreeMap<String, Category>, ConfigError> {
    categorize_doc(&summary.to_doc(), FieldCategoryTable::shipped())
}

/// Category map over the present fields of a summary doc.
pub fn categorize_doc(
    doc: &SummaryDoc,
    table: &FieldCategoryTable,
) -> Result<BTreeMap<String, Category>, ConfigError> {
    let mut out = BTreeMap::new();
    for (field, value) in &doc.fields {
        if field == "columns" {
            if let Value::Array(columns) = value {
                for column in columns {
                    if let Value::Object(obj) = column {
                        for name in obj.keys() {
                            let key = format!("columns.{name}");
                            let category = table
                                .category_of(&doc.kind, &key)
                                .ok_or_else(|| {
                                    ConfigError::UnknownField(format!("{}.{key}", doc.kind))
                                })?;
                            out.insert(key, category);
                        }
                    }
                }
                continue;
            }
        }
        let category = table
            .category_of(&doc.kind, field)
            .ok_or_else(|| ConfigError::UnknownField(format!("{}.{}", doc.kind, field)))?;
        out.insert(field.clone(), category);
    }
    Ok(out)
}

/// An experiment configuration controlling what the prompt carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextConfig {
    pub use_runtime: bool,
    pub excluded_categories: BTreeSet<Category>,
    pub include_api_docs: bool,
}

impl Default for ContextConfig {
    /// The default configuration: full runtime information, no API docs.
    fn default() -> Self {
        Self {
            use_runtime: true,
            excluded_categories: BTreeSet::new(),
            include_api_docs: false,
        }
    }
}

impl ContextConfig {
    /// Parse a configuration token: `+RT`, `-RT`, `+RT-S`, `+RT-R`, `+RT-V`,
    /// `+RT+D`, or combinations of the suffixes.
    pub fn parse(token: &str) -> Result<Self, ConfigError> {
        let rest = if let Some(rest) = token.strip_prefix("+RT") {
            rest
        } else if let Some(rest) = token.strip_prefix("-RT") {
            let mut cfg = Self {
                use_runtime: false,
                excluded_categories: BTreeSet::new(),
                include_api_docs: false,
            };
            let mut tail = rest;
            while let Some(next) = tail.strip_prefix("+D") {
                cfg.include_api_docs = true;
                tail = next;
            }
            if !tail.is_empty() {
                return Err(ConfigError::UnknownConfig(token.to_string()));
            }
            return Ok(cfg);
        } else {
            return Err(ConfigError::UnknownConfig(token.to_string()));
        };

        let mut cfg = Self::default();
        let mut tail = rest;
        while !tail.is_empty() {
            if let Some(next) = tail.strip_prefix("+D") {
                cfg.include_api_docs = true;
                tail = next;
            } else if let Some(next) = tail.strip_prefix("-S") {
                cfg.excluded_categories.insert(Category::Structural);
                tail = next;
            } else if let Some(next) = tail.strip_prefix("-R") {
                cfg.excluded_categories.insert(Category::Representation);
                tail = next;
            } else if let Some(next) = tail.strip_prefix("-V") {
                cfg.excluded_categories.insert(Category::Value);
                tail = next;
            } else {
                return Err(ConfigError::UnknownConfig(token.to_string()));
            }
        }
        Ok(cfg)
    }

    /// Canonical token for this configuration.
    pub fn name(&self) -> String {
        if !self.use_runtime {
            return if self.include_api_docs { "-RT+D".into() } else { "-RT".into() };
        }
        let mut out = String::from("+RT");
        for cat in &self.excluded_categories {
            out.push('-');
            out.push(cat.letter());
        }
        if self.include_api_docs {
            out.push_str("+D");
        }
        out
    }

    /// Whether this configuration appears in the reported experiments
    /// (at most one category excluded).
    pub fn is_paper_configuration(&self) -> bool {
        self.excluded_categories.len() <= 1 && (self.use_runtime || !self.include_api_docs)
    }

    /// Stable text the prompt fingerprint is derived from.
    pub fn fingerprint_material(&self) -> String {
        format!(
            "use_runtime={};excluded={};docs={}",
            self.use_runtime,
            self.excluded_categories
                .iter()
                .map(|c| c.letter().to_string())
                .collect::<Vec<_>>()
                .join(","),
            self.include_api_docs
        )
    }
}

fn filter_doc(
    doc: &SummaryDoc,
    excluded: &BTreeSet<Category>,
    table: &FieldCategoryTable,
) -> SummaryDoc {
    let keep = |category: Option<Category>| match category {
        // Fields without a table entry cannot be ablated; the shipped table
        // is total, checked by test.
        None => true,
        Some(cat) => !excluded.contains(&cat),
    };
    let mut fields = Vec::new();
    for (name, value) in &doc.fields {
        if name == "columns" {
            if let Value::Array(columns) = value {
                let filtered: Vec<Value> = columns
                    .iter()
                    .filter_map(|column| {
                        let obj = column.as_object()?;
                        let kept: serde_json::Map<String, Value> = obj
                            .iter()
                            .filter(|(k, _)| {
                                keep(table.category_of(&doc.kind, &format!("columns.{k}")))
                            })
                            .map(|(k, v)| (k.clone(), v.clone()))
                            .collect();
                        (!kept.is_empty()).then_some(Value::Object(kept))
                    })
                    .collect();
                if !filtered.is_empty() {
                    fields.push((name.clone(), Value::Array(filtered)));
                }
                continue;
            }
        }
        if keep(table.category_of(&doc.kind, name)) {
            fields.push((name.clone(), value.clone()));
        }
    }
    SummaryDoc {
        kind: doc.kind.clone(),
        fields,
    }
}

/// Apply an experiment configuration to a runtime context.
///
/// `-RT` empties the context; category exclusions drop the matching fields,
/// and summaries left with zero fields disappear entirely. Undefined-symbol
/// markers carry value semantics (a readiness signal), so `-V` removes them.
pub fn apply_config(ctx: &RuntimeContext, cfg: &ContextConfig) -> RuntimeContext {
    apply_config_with(ctx, cfg, FieldCategoryTable::shipped())
}

pub fn apply_config_with(
    ctx: &RuntimeContext,
    cfg: &ContextConfig,
    table: &FieldCategoryTable,
) -> RuntimeContext {
    if !cfg.use_runtime {
        return RuntimeContext {
            extraction_time: ctx.extraction_time,
            ..RuntimeContext::default()
        };
    }
    let mut out = RuntimeContext {
        extraction_time: ctx.extraction_time,
        ..RuntimeContext::default()
    };
    for (symbol, doc) in &ctx.entries {
        let filtered = filter_doc(doc, &cfg.excluded_categories, table);
        if !filtered.fields.is_empty() {
            out.entries.insert(symbol.clone(), filtered);
        }
    }
    if !cfg.excluded_categories.contains(&Category::Value) {
        out.undefined_symbols = ctx.undefined_symbols.clone();
    }
    out
}

fn render_value(value: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match value {
        Value::Array(items) if items.iter().any(|v| v.is_object()) => {
            out.push_str("[\n");
            for item in items {
                match item {
                    Value::Object(obj) => {
                        out.push_str(&pad);
                        out.push_str("  {\n");
                        for (k, v) in obj {
                            out.push_str(&pad);
                            out.push_str("    ");
                            out.push_str(&format!("\"{k}\": "));
                            render_value(v, indent + 2, out);
                            out.push('\n');
                        }
                        out.push_str(&pad);
                        out.push_str("  }\n");
                    }
                    other => {
                        out.push_str(&pad);
                        out.push_str("  ");
                        render_value(other, indent + 1, out);
                        out.push('\n');
                    }
                }
            }
            out.push_str(&pad);
            out.push(']');
        }
        other => {
            // Compact JSON for scalars and scalar arrays.
            out.push_str(&serde_json::to_string(other).expect("JSON value serializes"));
        }
    }
}

/// Render a context as deterministic prompt text: one section per symbol in
/// lexicographic order, fields in canonical order, one field per line.
///
/// Field lines carry no separators, so removing fields or symbols leaves the
/// remaining lines byte-identical; an empty context renders as the empty
/// string.
pub fn render_context(ctx: &RuntimeContext) -> String {
    if ctx.is_empty() {
        return String::new();
    }
    let mut keys: Vec<&String> = ctx
        .entries
        .keys()
        .chain(ctx.undefined_symbols.iter())
        .collect();
    keys.sort();
    keys.dedup();

    let mut out = String::new();
    for symbol in keys {
        out.push_str("### ");
        out.push_str(symbol);
        out.push_str("\n{\n");
        match ctx.entries.get(symbol) {
            Some(doc) => {
                out.push_str(&format!("  \"kind\": \"{}\"\n", doc.kind));
                for (name, value) in &doc.fields {
                    out.push_str(&format!("  \"{name}\": "));
                    render_value(value, 1, &mut out);
                    out.push('\n');
                }
            }
            None => {
                out.push_str("  \"kind\": \"undefined\"\n");
                out.push_str("  \"note\": \"name not defined in kernel\"\n");
            }
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::{SeriesSummary, TensorSummary, ValueKind};
    use serde_json::json;

    fn tensor_summary() -> ObjectSummary {
        ObjectSummary::Tensor(TensorSummary {
            shape: vec![10, 3],
            dtype: "float32".into(),
            has_missing: false,
            scan_note: None,
        })
    }

    fn ctx_of(pairs: &[(&str, ObjectSummary)]) -> RuntimeContext {
        let mut ctx = RuntimeContext::default();
        for (name, summary) in pairs {
            ctx.entries.insert(name.to_string(), summary.to_doc());
        }
        ctx
    }

    #[test]
    fn tensor_shape_is_structural() {
        let cats = categorize_fields(&tensor_summary()).unwrap();
        assert_eq!(cats["shape"], Category::Structural);
        assert_eq!(cats["dtype"], Category::Representation);
        assert_eq!(cats["has_missing"], Category::Value);
    }

    #[test]
    fn series_dtype_is_representation() {
        let summary = ObjectSummary::Series(SeriesSummary {
            length: 3,
            dtype: "int64".into(),
            has_missing: false,
            value_kind: ValueKind::Binary,
            unique_count: Some(2),
            value_range: None,
            example_values: vec![],
        });
        let cats = categorize_fields(&summary).unwrap();
        assert_eq!(cats["dtype"], Category::Representation);
        assert_eq!(cats["value_kind"], Category::Value);
    }

    #[test]
    fn estimator_fitted_is_value() {
        let summary = ObjectSummary::Estimator(crate::summary::EstimatorSummary {
            class_name: "SVC".into(),
            fitted: true,
            n_features_in: Some(4),
            n_outputs_or_classes: Some(3),
            encoder_classes: None,
        });
        let cats = categorize_fields(&summary).unwrap();
        assert_eq!(cats["fitted"], Category::Value);
        assert_eq!(cats["n_features_in"], Category::Structural);
    }

    #[test]
    fn unknown_field_rejected() {
        let doc = SummaryDoc {
            kind: "tensor".into(),
            fields: vec![("mystery".into(), json!(1))],
        };
        assert!(matches!(
            categorize_doc(&doc, FieldCategoryTable::shipped()),
            Err(ConfigError::UnknownField(_))
        ));
    }

    #[test]
    fn full_config_is_identity() {
        let ctx = ctx_of(&[("x", tensor_summary())]);
        let out = apply_config(&ctx, &ContextConfig::default());
        assert_eq!(out.entries, ctx.entries);
    }

    #[test]
    fn no_runtime_empties_context() {
        let mut ctx = ctx_of(&[("x", tensor_summary())]);
        ctx.undefined_symbols.insert("ghost".into());
        let out = apply_config(&ctx, &ContextConfig::parse("-RT").unwrap());
        assert!(out.is_empty());
    }

    #[test]
    fn minus_s_keeps_dtype_and_missing() {
        let ctx = ctx_of(&[("x", tensor_summary())]);
        let out = apply_config(&ctx, &ContextConfig::parse("+RT-S").unwrap());
        let fields: Vec<&str> = out.entries["x"].fields.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(fields, vec!["dtype", "has_missing"]);
    }

    #[test]
    fn exhaustion_empties_everything() {
        let mut ctx = ctx_of(&[("x", tensor_summary())]);
        ctx.undefined_symbols.insert("ghost".into());
        let s = apply_config(&ctx, &ContextConfig::parse("+RT-S").unwrap());
        let sr = apply_config(&s, &ContextConfig::parse("+RT-R").unwrap());
        let srv = apply_config(&sr, &ContextConfig::parse("+RT-V").unwrap());
        assert!(srv.is_empty());
    }

    #[test]
    fn idempotent_filtering() {
        let ctx = ctx_of(&[("x", tensor_summary())]);
        let cfg = ContextConfig::parse("+RT-R").unwrap();
        let once = apply_config(&ctx, &cfg);
        let twice = apply_config(&once, &cfg);
        assert_eq!(once, twice);
    }

    #[test]
    fn render_empty_is_empty_string() {
        assert_eq!(render_context(&RuntimeContext::default()), "");
    }

    #[test]
    fn render_orders_symbols() {
        let ctx = ctx_of(&[("b", tensor_summary()), ("a", tensor_summary())]);
        let text = render_context(&ctx);
        assert!(text.find("### a").unwrap() < text.find("### b").unwrap());
    }

    #[test]
    fn filtered_rendering_is_line_subsequence() {
        let mut ctx = ctx_of(&[("x", tensor_summary())]);
        ctx.undefined_symbols.insert("ghost".into());
        let full: Vec<String> = render_context(&ctx).lines().map(str::to_string).collect();
        for token in ["+RT-S", "+RT-R", "+RT-V", "+RT-S-V"] {
            let cfg = ContextConfig::parse(token).unwrap();
            let filtered = apply_config(&ctx, &cfg);
            let lines = render_context(&filtered);
            let mut cursor = 0;
            for line in lines.lines() {
                let found = full[cursor..].iter().position(|f| f == line);
                assert!(found.is_some(), "line `{line}` not in order for {token}");
                cursor += found.unwrap() + 1;
            }
        }
    }

    #[test]
    fn config_tokens_round_trip() {
        for token in ["+RT", "-RT", "+RT-S", "+RT-R", "+RT-V", "+RT+D", "+RT-S-V"] {
            let cfg = ContextConfig::parse(token).unwrap();
            assert_eq!(cfg.name(), token);
        }
        assert!(ContextConfig::parse("RT").is_err());
        assert!(ContextConfig::parse("-RT-S").is_err());
        assert!(ContextConfig::parse("+RT-X").is_err());
    }

    #[test]
    fn paper_configurations_flagged() {
        assert!(ContextConfig::parse("+RT-S").unwrap().is_paper_configuration());
        assert!(!ContextConfig::parse("+RT-S-V").unwrap().is_paper_configuration());
    }
}
