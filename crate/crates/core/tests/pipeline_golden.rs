use std::path::PathBuf;

use flarecast_core::preprocess::{Outcome, Pipeline};
use flarecast_core::{BitmapMask, ByteImage, Raster};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(stem: &str) -> Outcome {
    let r = Raster::read_mgr(fixture(&format!("{stem}.mgr"))).unwrap();
    let m = BitmapMask::read_msk(fixture(&format!("{stem}.msk"))).unwrap();
    Pipeline::default().process(&r, &m).unwrap()
}

fn kept_image(stem: &str) -> ByteImage {
    match run(stem) {
        Outcome::Kept { image, .. } => image,
        other => panic!("{stem} was not kept: {other:?}"),
    }
}

#[test]
fn fixtures_match_golden_pgms_bit_for_bit() {
    for stem in ["small_patch", "wide_patch", "tall_patch"] {
        let golden = std::fs::read(fixture(&format!("{stem}.golden.pgm"))).unwrap();
        let image = kept_image(stem);
        assert_eq!((image.width(), image.height()), (512, 512));
        assert!(
            image.encode_pgm() == golden,
            "{stem} differs from its golden file"
        );
    }
}

#[test]
fn narrow_fixture_is_dropped() {
    assert_eq!(
        run("narrow_patch"),
        Outcome::Dropped {
            crop_width: 69,
            crop_height: 70
        }
    );
}

#[test]
fn boundary_values_land_on_expected_bytes() {
    // Row 10, columns 10..20 of the small fixture hold hand-placed values:
    // 256, -256, 25, -25, 25.5, -25.5, 0, 1000, -1000, 255.5. The crop starts
    // at (5, 5) and is 111x81, so padding offsets it by (215, 200).
    let image = kept_image("small_patch");
    let row: Vec<u8> = (205..215).map(|c| image.get(220, c)).collect();
    assert_eq!(row, [255, 0, 128, 128, 140, 115, 128, 255, 0, 255]);
}

#[test]
fn kept_outcome_reports_crop_shape() {
    match run("wide_patch") {
        Outcome::Kept {
            crop_width,
            crop_height,
            raster,
            ..
        } => {
            assert_eq!((crop_width, crop_height), (600, 537));
            assert!(raster.values().iter().all(|v| v.abs() <= 256.0));
        }
        other => panic!("unexpected {other:?}"),
    }
}
