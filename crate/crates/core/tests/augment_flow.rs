mod common;

use std::borrow::Cow;

use common::synth_config;
use lesionkit::augment::{apply_raster, AugmentDraw, AugmentPolicy, SampleSeed, Size};
use lesionkit::catalog::scan_dataset;
use lesionkit::extract::{decode_manifest, extract_table, AugmentedFeatures, PixelExtractor};
use lesionkit::refmodel::TrainFeatures;
use lesionkit::synth::{generate_corpus, SynthSpec};

fn extractor() -> PixelExtractor {
    PixelExtractor {
        policy: AugmentPolicy {
            target_size: Size {
                width: 16,
                height: 16,
            },
            ..AugmentPolicy::default()
        },
        grid: Size {
            width: 4,
            height: 4,
        },
    }
}

#[test]
fn training_rows_change_per_epoch_evaluation_rows_do_not() {
    let dir = tempfile::tempdir().unwrap();
    generate_corpus(
        dir.path(),
        &SynthSpec {
            per_class: vec![6, 6],
            size: 20,
            duplicates: 0,
            seed: 1,
        },
    )
    .unwrap();
    let cfg = synth_config(dir.path(), 2);
    let m = scan_dataset(&cfg.corpus_root, &cfg.class_map)
        .unwrap()
        .manifest;
    let images = decode_manifest(&m).unwrap();
    let refs: Vec<_> = images.iter().collect();
    let ex = extractor();

    let eval_a = extract_table(&refs, &ex, &m.classes).unwrap();
    let eval_b = extract_table(&refs, &ex, &m.classes).unwrap();
    assert_eq!(eval_a, eval_b);

    let train = AugmentedFeatures {
        images: refs.clone(),
        extractor: &ex,
        master_seed: 42,
    };
    let e1: Cow<_> = train.rows_for_epoch(1).unwrap();
    let e1_again = train.rows_for_epoch(1).unwrap();
    let e2 = train.rows_for_epoch(2).unwrap();
    assert_eq!(e1, e1_again);
    assert_ne!(e1, e2);
    assert!(e1
        .iter()
        .zip(&eval_a.rows)
        .any(|(t, v)| t.features != v.features));
    assert_eq!(train.dim(), eval_a.dim);
}

#[test]
fn identity_policy_is_a_plain_resize() {
    let dir = tempfile::tempdir().unwrap();
    generate_corpus(
        dir.path(),
        &SynthSpec {
            per_class: vec![2],
            size: 12,
            duplicates: 0,
            seed: 2,
        },
    )
    .unwrap();
    let cfg = synth_config(dir.path(), 1);
    let m = scan_dataset(&cfg.corpus_root, &cfg.class_map)
        .unwrap()
        .manifest;
    let img = &decode_manifest(&m).unwrap()[0];
    let policy = AugmentPolicy::identity(Size {
        width: 12,
        height: 12,
    });
    let seed = SampleSeed {
        master_seed: 5,
        record_id: &img.id,
        epoch: 3,
    };
    let trained = apply_raster(&img.raster, img.depth, &policy, &seed, true);
    let evaluated = apply_raster(&img.raster, img.depth, &policy, &seed, false);
    assert_eq!(trained, evaluated);
    assert!(trained.data.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn draws_stay_within_policy_bounds() {
    let policy = AugmentPolicy::default();
    let mut flips = 0;
    for epoch in 0..400 {
        let d = AugmentDraw::sample(
            &policy,
            &SampleSeed {
                master_seed: 1,
                record_id: "abc",
                epoch,
            },
        );
        assert!(d.angle_deg.abs() <= policy.rotation_max_deg);
        flips += usize::from(d.hflip);
    }
    assert!(
        (120..280).contains(&flips),
        "{flips} horizontal flips in 400 draws"
    );
}
