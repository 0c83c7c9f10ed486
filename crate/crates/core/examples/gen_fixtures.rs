//! Regenerates the bundled test fixtures under `tests/fixtures/`.
//!
//! ```text
//! cargo run -p npseg --example gen_fixtures
//! ```

use std::fs;
use std::path::Path;

use npseg::patch::{extract_patches, write_annotations_xml, PATCH_SIZE};
use npseg::raster::io::write_image;
use npseg::synth::plaque_slide;

const SLIDE_SIZE: usize = 512;
const PLAQUES: usize = 3;

fn main() -> npseg::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    for dir in ["slides", "annotations", "images", "masks"] {
        fs::create_dir_all(root.join(dir)).expect("create fixture directory");
    }

    // two annotated slides for the patch pipeline
    for (subject, seed) in [("S01", 101), ("S02", 102)] {
        let (slide, set) = plaque_slide(SLIDE_SIZE, SLIDE_SIZE, PLAQUES, subject, seed);
        write_image(&slide, &root.join(format!("slides/{subject}.png")))?;
        fs::write(root.join(format!("annotations/{subject}.xml")), write_annotations_xml(&set))
            .expect("write annotation file");
    }

    // centered image/mask patches from four more subjects
    for (subject, seed) in [("P01", 201), ("P02", 202), ("P03", 203), ("P04", 204)] {
        let (slide, set) = plaque_slide(SLIDE_SIZE, SLIDE_SIZE, PLAQUES, subject, seed);
        for r in extract_patches(&slide, &set, PATCH_SIZE)?.records {
            write_image(&r.image, &root.join(format!("images/{}_{}.png", subject, r.annotation_index)))?;
            write_image(&r.mask, &root.join(format!("masks/{}_{}.png", subject, r.annotation_index)))?;
        }
    }

    // normalization reference
    let (reference, _) = plaque_slide(PATCH_SIZE, PATCH_SIZE, 2, "R", 300);
    write_image(&reference, &root.join("reference.png"))?;
    Ok(())
}
