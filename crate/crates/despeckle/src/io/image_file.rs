//! Bit-exact float image container.
//!
//! ```text
//! magic   4 bytes  "S2S1"
//! version u16 LE   currently 1
//! domain  u8       0 reflectivity, 1 intensity, 2 amplitude, 3 log intensity
//! dtype   u8       0 = float32
//! width   u32 LE
//! height  u32 LE
//! payload width*height float32 LE, row-major
//! ```

use crate::image::{Domain, Image};
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"S2S1";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 4 + 4;

pub fn to_bytes(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + img.len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(img.domain().tag());
    out.push(0); // dtype float32
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    for &v in img.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn from_bytes(buf: &[u8], path: &Path) -> Result<Image> {
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if buf.len() < HEADER_LEN {
        return Err(bad("file shorter than the header"));
    }
    if buf[0..4] != MAGIC {
        return Err(bad("bad magic, not an image file"));
    }
    let version = u16::from_le_bytes(buf[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let domain = Domain::from_tag(buf[6]).ok_or_else(|| bad(&format!("bad domain tag {}", buf[6])))?;
    if buf[7] != 0 {
        return Err(bad(&format!("unsupported dtype {}", buf[7])));
    }
    let width = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
    let expect = HEADER_LEN + width * height * 4;
    if buf.len() != expect {
        return Err(bad(&format!(
            "payload length {} does not match {width}x{height} ({} expected)",
            buf.len() - HEADER_LEN,
            expect - HEADER_LEN
        )));
    }
    let values = buf[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Image::new(width, height, domain, values)
}

pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    let bytes = to_bytes(img);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_image(path: &Path) -> Result<Image> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    from_bytes(&buf, path)
}
