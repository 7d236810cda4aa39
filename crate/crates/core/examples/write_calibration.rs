//! Regenerates `data/calibration_lte_45rb.json` from the built-in anchors.

use cran_outage::link_model::{synthesize, CalibrationFile, WaterfallProfile, LTE_45RB_ANCHORS};

fn main() {
    let profile = WaterfallProfile::default();
    let catalog = synthesize(&LTE_45RB_ANCHORS, &profile).expect("anchors are consistent");
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/data/calibration_lte_45rb.json"
    );
    std::fs::write(
        path,
        CalibrationFile::from_catalog(&catalog, Some(profile)).to_json(),
    )
    .expect("write calibration file");
    println!("wrote {path}");
}
