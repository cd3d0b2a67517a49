//! Property tests over the core invariants.

use proptest::prelude::*;

use cellguard::context::{apply_config, render_context, ContextConfig};
use cellguard::eval::{cohens_kappa, sample_size_with};
use cellguard::notebook::{executed_cells, parse_notebook, DuplicatePolicy};
use cellguard::prompt::{parse_response, ParseStatus};
use cellguard::summary::{ObjectSummary, RuntimeContext, TensorSummary};
use cellguard::symbols::referenced_symbols;

fn notebook_bytes(counts: &[Option<u64>]) -> Vec<u8> {
    let cells: Vec<serde_json::Value> = counts
        .iter()
        .enumerate()
        .map(|(i, count)| {
            serde_json::json!({
                "cell_type": "code",
                "execution_count": count,
                "source": format!("x{i} = {i}"),
            })
        })
        .collect();
    serde_json::to_vec(&serde_json::json!({
        "nbformat": 4, "nbformat_minor": 5, "cells": cells,
    }))
    .unwrap()
}

proptest! {
    /// Executed cells are exactly the cells with a count, ordered with
    /// strictly increasing counts.
    #[test]
    fn executed_cells_is_ordered_permutation(counts in proptest::collection::vec(
        proptest::option::of(1u64..50), 0..12)) {
        let nb = parse_notebook(&notebook_bytes(&counts), "t.ipynb").unwrap();
        match executed_cells(&nb, DuplicatePolicy::Error) {
            Ok(order) => {
                let expected = counts.iter().filter(|c| c.is_some()).count();
                prop_assert_eq!(order.len(), expected);
                prop_assert!(order
                    .windows(2)
                    .all(|w| w[0].execution_count.unwrap() < w[1].execution_count.unwrap()));
            }
            Err(_) => {
                // Only duplicate counts may fail.
                let mut seen: Vec<u64> = counts.iter().flatten().copied().collect();
                let before = seen.len();
                seen.sort_unstable();
                seen.dedup();
                prop_assert!(seen.len() < before);
            }
        }
    }

    /// Symbol extraction is purely syntactic: trailing comments never change
    /// the result.
    #[test]
    fn trailing_comment_is_invisible(name in "[a-z][a-z0-9_]{0,8}") {
        let base = format!("y = {name} + 1");
        let commented = format!("{base}  # note");
        let a = referenced_symbols(&base).unwrap();
        let b = referenced_symbols(&commented).unwrap();
        prop_assert_eq!(a, b);
    }

    /// Valid prediction JSON always round-trips exactly.
    #[test]
    fn prediction_round_trip(reasoning in ".{0,60}", detection in any::<bool>()) {
        let raw = serde_json::json!({
            "reasoning": reasoning,
            "detection": detection,
        })
        .to_string();
        let parsed = parse_response(&raw);
        prop_assert_eq!(parsed.parse_status, ParseStatus::Ok);
        prop_assert_eq!(parsed.reasoning, reasoning);
        prop_assert_eq!(parsed.detection, detection);
    }

    /// Abstention soundness: arbitrary text never yields failed-with-true.
    #[test]
    fn abstention_is_sound(raw in ".{0,200}") {
        let parsed = parse_response(&raw);
        if parsed.parse_status == ParseStatus::Failed {
            prop_assert!(!parsed.detection);
        }
    }

    /// Sample size stays within its infinite-population bound.
    #[test]
    fn sample_size_bounded(n in 1u64..10_000_000, e in 0.01f64..0.5) {
        let bound = (1.96f64 * 1.96 * 0.25 / (e * e)).ceil() as u64;
        prop_assert!(sample_size_with(n, 1.96, 0.5, e) <= bound);
    }

    /// Kappa stays in [-1, 1] and is 1 on self-agreement.
    #[test]
    fn kappa_range(labels in proptest::collection::vec(0u8..4, 1..50)) {
        let kappa = cohens_kappa(&labels, &labels).unwrap();
        prop_assert!((kappa - 1.0).abs() < 1e-12);
    }

    /// Ablation filtering is idempotent and rendering stays a line
    /// subsequence, over tensor contexts of any shape.
    #[test]
    fn filtering_idempotent(shape in proptest::collection::vec(1u64..64, 0..4),
                            has_missing in any::<bool>()) {
        let mut ctx = RuntimeContext::default();
        ctx.entries.insert(
            "x".to_string(),
            ObjectSummary::Tensor(TensorSummary {
                shape,
                dtype: "float32".into(),
                has_missing,
                scan_note: None,
            })
            .to_doc(),
        );
        for token in ["+RT-S", "+RT-R", "+RT-V"] {
            let cfg = ContextConfig::parse(token).unwrap();
            let once = apply_config(&ctx, &cfg);
            let twice = apply_config(&once, &cfg);
            prop_assert_eq!(&once, &twice);

            let full_text = render_context(&ctx);
            let filtered = render_context(&once);
            let full_lines: Vec<&str> = full_text.lines().collect();
            let mut cursor = 0usize;
            for line in filtered.lines() {
                let offset = full_lines[cursor..].iter().position(|l| *l == line);
                prop_assert!(offset.is_some());
                cursor += offset.unwrap() + 1;
            }
        }
    }
}
