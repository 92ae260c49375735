//! Lossy 8-bit PGM preview export. Values are clipped at percentiles and
//! scaled linearly; intended for eyeballing results, never for metrics.

use crate::image::Image;
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Write a binary PGM (P5) preview. `lo_pct` / `hi_pct` are clip percentiles
/// in [0, 1], e.g. 0.01 and 0.99.
pub fn write_pgm(path: &Path, img: &Image, lo_pct: f64, hi_pct: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lo_pct) || !(0.0..=1.0).contains(&hi_pct) || lo_pct >= hi_pct {
        return Err(Error::InvalidArgument(format!(
            "bad clip percentiles {lo_pct}..{hi_pct}"
        )));
    }
    let mut sorted = img.values().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    let lo = pick(lo_pct);
    let hi = pick(hi_pct);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(32 + img.len());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    for &v in img.values() {
        let t = ((v - lo) / span).clamp(0.0, 1.0);
        out.push((t * 255.0).round() as u8);
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}
