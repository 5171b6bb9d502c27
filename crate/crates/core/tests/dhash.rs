mod common;

use common::{dhash_oracle, two_tone, TWO_TONE_HASH};
use image::{DynamicImage, GrayImage, Luma, RgbImage};
use lesionkit::dedup::{compute_dhash, hamming_distance, hash_file, PerceptualHash};
use proptest::prelude::*;

fn rgb(buf: Vec<u8>, w: usize, h: usize) -> DynamicImage {
    DynamicImage::ImageRgb8(RgbImage::from_raw(w as u32, h as u32, buf).unwrap())
}

#[test]
fn uniform_image_hashes_to_zero() {
    for v in [0u8, 77, 255] {
        let img = DynamicImage::ImageLuma8(GrayImage::from_pixel(40, 30, Luma([v])));
        assert_eq!(compute_dhash(&img), PerceptualHash(0));
    }
}

#[test]
fn strictly_decreasing_rows_hash_to_all_ones() {
    let img = GrayImage::from_fn(90, 16, |x, _| Luma([255 - (x * 2) as u8]));
    assert_eq!(
        compute_dhash(&DynamicImage::ImageLuma8(img)),
        PerceptualHash(u64::MAX)
    );
}

#[test]
fn strictly_increasing_rows_hash_to_zero() {
    let img = GrayImage::from_fn(90, 16, |x, _| Luma([(x * 2) as u8]));
    assert_eq!(
        compute_dhash(&DynamicImage::ImageLuma8(img)),
        PerceptualHash(0)
    );
}

#[test]
fn two_tone_matches_oracle_and_frozen_value() {
    let (buf, w, h) = two_tone();
    let oracle = dhash_oracle(&buf, w, h);
    assert_eq!(oracle, TWO_TONE_HASH);
    assert_eq!(compute_dhash(&rgb(buf, w, h)).0, oracle);
}

#[test]
fn png_file_hash_matches_in_memory_hash() {
    let dir = tempfile::tempdir().unwrap();
    let (buf, w, h) = two_tone();
    let img = rgb(buf, w, h);
    let path = dir.path().join("t.png");
    img.save(&path).unwrap();
    assert_eq!(hash_file(&path).unwrap(), compute_dhash(&img));
}

#[test]
fn hex_form_is_sixteen_lowercase_digits() {
    assert_eq!(PerceptualHash(TWO_TONE_HASH).to_hex(), "1818181818181818");
    assert_eq!(PerceptualHash(0xab).to_hex(), "00000000000000ab");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_images_match_oracle(w in 9usize..48, h in 8usize..40, seed in any::<u64>()) {
        let mut state = seed | 1;
        let buf: Vec<u8> = (0..w * h * 3)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 56) as u8
            })
            .collect();
        let expected = dhash_oracle(&buf, w, h);
        prop_assert_eq!(compute_dhash(&rgb(buf, w, h)).0, expected);
    }

    #[test]
    fn flipping_one_comparison_changes_distance_by_one(a in any::<u64>(), bit in 0u32..64) {
        let b = a ^ (1u64 << bit);
        prop_assert_eq!(hamming_distance(PerceptualHash(a), PerceptualHash(b)), 1);
    }
}
