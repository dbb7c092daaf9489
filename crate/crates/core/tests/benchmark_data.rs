use std::path::Path;

use tsqa_core::eval::{keyword_coverage, load_benchmark, unsupported_fraction, EXPECTED_ITEM_COUNT};
use tsqa_core::ToolRegistry;

#[test]
fn shipped_benchmark_is_self_consistent() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/benchmark.tsv");
    let items = load_benchmark(&path, &ToolRegistry::standard()).unwrap();
    assert_eq!(items.len(), EXPECTED_ITEM_COUNT);
    let mut nlqs = std::collections::HashSet::new();
    for item in &items {
        assert!(nlqs.insert(item.nlq.to_lowercase()), "duplicate question {}", item.nlq);
        assert_eq!(
            keyword_coverage(&item.expected_nlr, &item.expected_keywords),
            1.0,
            "{}",
            item.item_id
        );
        assert_eq!(unsupported_fraction(&item.expected_nlr, item), 0.0, "{}", item.item_id);
        assert!(!item.expected_calls.is_empty(), "{}", item.item_id);
    }
}
