use crate::error::{Error, Result};
use crate::raster::{
    decorrelated_lab_to_rgb, rgb_to_decorrelated_lab, ChannelStats, ColorSpace, PlanarImage,
};
use crate::stain::{Method, NormalizationTarget, NormalizeStatus, Normalized};

/// Per-channel statistics transfer in lαβ. Channels with zero source spread
/// only receive the mean shift; the returned flag reports whether that happened.
pub fn reinhard_transfer(
    src_lab: &PlanarImage,
    src: &ChannelStats,
    tgt: &ChannelStats,
) -> Result<(PlanarImage, bool)> {
    src_lab.expect_space(ColorSpace::LabDecorrelated)?;
    if src.mean.len() != 3 || tgt.mean.len() != 3 || src.std.len() != 3 || tgt.std.len() != 3 {
        return Err(Error::InvalidParameter("lαβ statistics need 3 channels".into()));
    }
    let mut degenerate = false;
    let planes = (0..3)
        .map(|c| {
            let plane = src_lab.plane_f64(c).expect("lαβ plane");
            let gain = if src.std[c] > 0.0 {
                tgt.std[c] / src.std[c]
            } else {
                degenerate = true;
                0.0
            };
            plane
                .iter()
                .map(|&x| {
                    let d = x - src.mean[c];
                    if gain == 0.0 {
                        d + tgt.mean[c]
                    } else {
                        d * gain + tgt.mean[c]
                    }
                })
                .collect()
        })
        .collect();
    let out = PlanarImage::from_f64_planes(
        src_lab.width(),
        src_lab.height(),
        ColorSpace::LabDecorrelated,
        planes,
    )?;
    Ok((out, degenerate))
}

pub fn reinhard_normalize(src: &PlanarImage, tgt: &NormalizationTarget) -> Result<Normalized> {
    src.expect_space(ColorSpace::Rgb8)?;
    if tgt.method != Method::Reinhard {
        return Err(Error::InvalidParameter(format!(
            "Reinhard normalization given a {} target",
            tgt.method
        )));
    }
    let Some(tgt_stats) = &tgt.reinhard_stats else {
        return Err(Error::InvalidParameter("Reinhard target without statistics".into()));
    };
    let lab = rgb_to_decorrelated_lab(src)?;
    let src_stats = ChannelStats::of(&lab);
    let (out, degenerate) = reinhard_transfer(&lab, &src_stats, tgt_stats)?;
    let status = if degenerate {
        let reason = Error::DegenerateSource(format!(
            "lαβ standard deviations {:?}; mean shift only",
            src_stats.std
        ))
        .to_string();
        log::warn!("{reason}");
        NormalizeStatus::MeanShiftOnly(reason)
    } else {
        NormalizeStatus::Normalized
    };
    Ok(Normalized {
        image: decorrelated_lab_to_rgb(&out)?,
        status,
    })
}
