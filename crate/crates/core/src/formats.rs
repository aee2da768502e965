//! On-disk video formats.
//!
//! * `.vdt` container: `b"VDRP"`, version byte `0x01`, then `T, w, h, c` as
//!   little-endian `u32`, then `T·w·h·c` bytes in canonical tensor layout.
//! * Frame directory: one binary PPM (`P6`, three channels) or PGM (`P5`,
//!   one channel) per frame with maxval 255, read in lexicographic order
//!   and written as `frame_%05d.ppm` / `frame_%05d.pgm`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{DprpError, Result};
use crate::video::{FrameShape, VideoTensor};

pub const VDT_MAGIC: &[u8; 4] = b"VDRP";
pub const VDT_VERSION: u8 = 0x01;
const VDT_HEADER_LEN: usize = 4 + 1 + 16;

/// Loads a video from a `.vdt` file or a frame directory.
pub fn load_video(path: &Path) -> Result<VideoTensor> {
    if path.is_dir() {
        load_frame_dir(path)
    } else {
        decode_vdt(&fs::read(path)?)
    }
}

/// Stores a video as a `.vdt` file when `path` has that extension,
/// otherwise as a frame directory at `path`.
pub fn store_video(video: &VideoTensor, path: &Path) -> Result<()> {
    if is_vdt_path(path) {
        let mut f = fs::File::create(path)?;
        f.write_all(&encode_vdt(video))?;
        f.sync_all()?;
        Ok(())
    } else {
        store_frame_dir(video, path)
    }
}

pub fn is_vdt_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("vdt"))
}

pub fn encode_vdt(video: &VideoTensor) -> Vec<u8> {
    let s = video.shape();
    let mut out = Vec::with_capacity(VDT_HEADER_LEN + video.data().len());
    out.extend_from_slice(VDT_MAGIC);
    out.push(VDT_VERSION);
    for v in [video.frames() as u32, s.width, s.height, s.channels] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(video.data());
    out
}

pub fn decode_vdt(bytes: &[u8]) -> Result<VideoTensor> {
    if bytes.len() < VDT_HEADER_LEN {
        return Err(DprpError::CorruptHeader(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != VDT_MAGIC {
        return Err(DprpError::CorruptHeader("missing VDRP magic".into()));
    }
    if bytes[4] != VDT_VERSION {
        return Err(DprpError::CorruptHeader(format!("unknown container version {:#04x}", bytes[4])));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[5 + 4 * i..9 + 4 * i].try_into().unwrap());
    let (t, w, h, c) = (field(0), field(1), field(2), field(3));
    if c != 1 && c != 3 {
        return Err(DprpError::UnsupportedChannelCount(c));
    }
    if t == 0 || w == 0 || h == 0 {
        return Err(DprpError::CorruptHeader(format!("degenerate dimensions {t}x{w}x{h}x{c}")));
    }
    let expected = (t as u64) * (w as u64) * (h as u64) * (c as u64);
    let payload = &bytes[VDT_HEADER_LEN..];
    if payload.len() as u64 != expected {
        return Err(DprpError::CorruptHeader(format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    VideoTensor::new(t as usize, FrameShape::new(w, h, c)?, payload.to_vec())
}

/// Encodes one frame as binary PPM or PGM depending on the channel count.
pub fn encode_pnm(shape: FrameShape, pixels: &[u8]) -> Vec<u8> {
    let magic = if shape.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", shape.width, shape.height).into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Decodes a binary PPM (`P6`) or PGM (`P5`) frame with maxval 255.
pub fn decode_pnm(bytes: &[u8]) -> Result<(FrameShape, Vec<u8>)> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)?;
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(DprpError::CorruptHeader(format!("unsupported image magic {other:?}"))),
    };
    let width = parse_header_int(bytes, &mut pos)?;
    let height = parse_header_int(bytes, &mut pos)?;
    let maxval = parse_header_int(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(DprpError::CorruptHeader(format!("maxval {maxval} (only 8-bit 255 is supported)")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(DprpError::CorruptHeader("truncated header".into()));
    }
    pos += 1;
    let shape = FrameShape::new(width, height, channels)
        .map_err(|_| DprpError::CorruptHeader(format!("degenerate frame size {width}x{height}")))?;
    let raster = &bytes[pos..];
    if raster.len() < shape.dim() {
        return Err(DprpError::CorruptHeader(format!(
            "raster has {} bytes, expected {}",
            raster.len(),
            shape.dim()
        )));
    }
    Ok((shape, raster[..shape.dim()].to_vec()))
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(DprpError::CorruptHeader("truncated header".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_header_int(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let tok = next_token(bytes, pos)?;
    tok.parse()
        .map_err(|_| DprpError::CorruptHeader(format!("expected an integer, found {tok:?}")))
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn load_frame_dir(dir: &Path) -> Result<VideoTensor> {
    let files = frame_files(dir)?;
    if files.is_empty() {
        return Err(DprpError::CorruptHeader(format!("{} contains no PPM/PGM frames", dir.display())));
    }
    let mut shape: Option<FrameShape> = None;
    let mut data = Vec::new();
    for path in &files {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let (s, pixels) = decode_pnm(&bytes)?;
        match shape {
            None => shape = Some(s),
            Some(expected) if expected != s => {
                return Err(DprpError::InconsistentFrameSize {
                    path: path.clone(),
                    expected_w: expected.width,
                    expected_h: expected.height,
                    expected_c: expected.channels,
                    found_w: s.width,
                    found_h: s.height,
                    found_c: s.channels,
                })
            }
            Some(_) => {}
        }
        data.extend_from_slice(&pixels);
    }
    VideoTensor::new(files.len(), shape.expect("at least one frame"), data)
}

fn store_frame_dir(video: &VideoTensor, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let shape = video.shape();
    let ext = if shape.channels == 3 { "ppm" } else { "pgm" };
    for t in 0..video.frames() {
        let path = dir.join(format!("frame_{t:05}.{ext}"));
        fs::write(path, encode_pnm(shape, video.frame(t)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(channels: u32) -> VideoTensor {
        let s = FrameShape::new(8, 8, channels).unwrap();
        VideoTensor::from_fn(4, s, |t, x, y, c| (t * 61 + x * 13 + y * 7 + c * 3) as u8).unwrap()
    }

    #[test]
    fn vdt_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vdt");
        let v = sample(3);
        store_video(&v, &path).unwrap();
        assert_eq!(load_video(&path).unwrap(), v);
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"VDRP\x01");
        assert_eq!(&bytes[5..9], &4u32.to_le_bytes());
        assert_eq!(bytes.len(), 21 + 4 * 8 * 8 * 3);
    }

    #[test]
    fn frame_dir_round_trip_rgb_and_gray() {
        for c in [1, 3] {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("frames");
            let v = sample(c);
            store_video(&v, &path).unwrap();
            let ext = if c == 3 { "ppm" } else { "pgm" };
            assert!(path.join(format!("frame_00003.{ext}")).is_file());
            assert_eq!(load_video(&path).unwrap(), v);
        }
    }

    #[test]
    fn mixed_frame_sizes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = FrameShape::new(2, 2, 3).unwrap();
        let b = FrameShape::new(3, 2, 3).unwrap();
        fs::write(dir.path().join("frame_00000.ppm"), encode_pnm(a, &[0; 12])).unwrap();
        fs::write(dir.path().join("frame_00001.ppm"), encode_pnm(b, &[0; 18])).unwrap();
        assert!(matches!(load_video(dir.path()), Err(DprpError::InconsistentFrameSize { .. })));
    }

    #[test]
    fn empty_directory_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_video(dir.path()), Err(DprpError::CorruptHeader(_))));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(decode_vdt(b"VDRP"), Err(DprpError::CorruptHeader(_))));
        let mut bytes = encode_vdt(&sample(1));
        bytes[0] = b'X';
        assert!(matches!(decode_vdt(&bytes), Err(DprpError::CorruptHeader(_))));
        let mut bytes = encode_vdt(&sample(1));
        bytes[17..21].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(decode_vdt(&bytes), Err(DprpError::UnsupportedChannelCount(2))));
        let mut bytes = encode_vdt(&sample(1));
        bytes.pop();
        assert!(matches!(decode_vdt(&bytes), Err(DprpError::CorruptHeader(_))));
    }

    #[test]
    fn pnm_with_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# depth\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 20]);
        let (s, px) = decode_pnm(&bytes).unwrap();
        assert_eq!((s.width, s.height, s.channels), (2, 1, 1));
        assert_eq!(px, vec![10, 20]);
        assert!(decode_pnm(b"P5\n2 1\n65535\n\0\0\0\0").is_err());
        assert!(decode_pnm(b"P3\n1 1\n255\n0 0 0").is_err());
    }
}
