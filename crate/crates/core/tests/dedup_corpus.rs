mod common;

use common::synth_config;
use lesionkit::catalog::scan_dataset;
use lesionkit::dedup::{deduplicate, write_removed};
use lesionkit::synth::{generate_corpus, SynthSpec};

#[test]
fn byte_copies_are_removed_and_first_occurrence_kept() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        per_class: vec![30, 20, 25],
        size: 24,
        duplicates: 9,
        seed: 3,
    };
    generate_corpus(dir.path(), &spec).unwrap();
    let cfg = synth_config(dir.path(), 3);
    let scan = scan_dataset(&cfg.corpus_root, &cfg.class_map).unwrap();
    assert_eq!(scan.manifest.records.len(), 84);
    let out = deduplicate(&scan.manifest, 0).unwrap();
    assert_eq!(out.kept.records.len(), 75);
    assert_eq!(out.removed.len(), 9);
    for pair in &out.removed {
        assert_eq!(pair.distance, 0);
        let dup_pos = scan
            .manifest
            .records
            .iter()
            .rposition(|r| r.id == pair.duplicate)
            .unwrap();
        let kept_pos = scan
            .manifest
            .records
            .iter()
            .position(|r| r.id == pair.retained)
            .unwrap();
        assert!(kept_pos < dup_pos);
    }
    assert!(out.kept.records.iter().all(|r| r.hash.is_some()));
    let mut tsv = Vec::new();
    write_removed(&out.removed, &mut tsv).unwrap();
    assert_eq!(String::from_utf8(tsv).unwrap().lines().count(), 9);
}

#[test]
fn larger_threshold_never_keeps_more() {
    let dir = tempfile::tempdir().unwrap();
    generate_corpus(
        dir.path(),
        &SynthSpec {
            per_class: vec![25, 25],
            size: 20,
            duplicates: 4,
            seed: 8,
        },
    )
    .unwrap();
    let cfg = synth_config(dir.path(), 2);
    let m = scan_dataset(&cfg.corpus_root, &cfg.class_map)
        .unwrap()
        .manifest;
    let mut last = usize::MAX;
    for t in [0, 2, 6, 12, 24, 64] {
        let kept = deduplicate(&m, t).unwrap().kept.records.len();
        assert!(kept <= last);
        last = kept;
    }
    assert_eq!(last, 1);
}
