//! Annotation ingestion, mask rasterization, region-guided patch
//! extraction, corner translation augmentation and subject-level splits.

mod annotation;
mod extract;
mod rasterize;
mod split;

pub use annotation::{
    clean_polygon, is_self_intersecting, parse_annotations_xml, polygon_area,
    write_annotations_xml, Annotation, AnnotationFormat, AnnotationSet, NativeXml,
    ParsedAnnotations,
};
pub use extract::{
    extract_patches, patch_id, Extraction, PatchEntry, PatchRecord, PatchSource, PixelBox,
    Provenance, CORNER_MARGIN, PATCH_SIZE,
};
pub use rasterize::{contains_point, polygon_pixels, rasterize_mask, MASK_ON};
pub use split::{
    split_by_subject, DatasetManifest, ExtractionParams, ManifestPatch, Split, SplitCounts,
};
