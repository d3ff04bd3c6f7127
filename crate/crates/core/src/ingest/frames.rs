use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};

use crate::tensor::Tensor;

use super::IngestError;

/// An ordered frame sequence with its label. All frames share dims `[C, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoClip {
    id: String,
    label: String,
    frames: Vec<Tensor>,
}

impl VideoClip {
    pub fn new(id: impl Into<String>, label: impl Into<String>, frames: Vec<Tensor>) -> Result<Self, IngestError> {
        let id = id.into();
        let first = frames.first().ok_or_else(|| IngestError::Frame {
            path: PathBuf::from(&id),
            msg: "video has no frames".into(),
        })?;
        if first.rank() != 3 {
            return Err(IngestError::Frame {
                path: PathBuf::from(&id),
                msg: format!("frames must be [C, H, W], got {:?}", first.dims()),
            });
        }
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != first.dims()) {
            return Err(IngestError::Frame {
                path: PathBuf::from(&id),
                msg: format!("frame {i} has dims {:?}, frame 0 has {:?}", f.dims(), first.dims()),
            });
        }
        Ok(Self {
            id,
            label: label.into(),
            frames,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn frames(&self) -> &[Tensor] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub(crate) fn with_frames(&self, frames: Vec<Tensor>) -> Self {
        Self {
            id: self.id.clone(),
            label: self.label.clone(),
            frames,
        }
    }
}

fn is_frame_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("ppm" | "pgm")
    )
}

/// Frame files (`*.ppm`, `*.pgm`) in `dir`, sorted by file name.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let read = std::fs::read_dir(dir).map_err(|e| IngestError::Frame {
        path: dir.to_path_buf(),
        msg: e.to_string(),
    })?;
    let mut files = Vec::new();
    for entry in read {
        let entry = entry.map_err(|e| IngestError::Frame {
            path: dir.to_path_buf(),
            msg: e.to_string(),
        })?;
        let path = entry.path();
        if path.is_file() && is_frame_file(&path) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Decodes an 8-bit binary PPM (P6) or PGM (P5) into `[3, H, W]` with values
/// in `[0, 1]`; gray images are replicated across the three channels.
pub fn decode_frame(path: &Path) -> Result<Tensor, IngestError> {
    let err = |msg: String| IngestError::Frame {
        path: path.to_path_buf(),
        msg,
    };
    let mut file = File::open(path).map_err(|e| err(e.to_string()))?;
    let mut magic = [0u8; 2];
    file.read_exact(&mut magic)
        .map_err(|e| err(format!("cannot read header: {e}")))?;
    if &magic != b"P5" && &magic != b"P6" {
        return Err(err("not a binary PGM (P5) or PPM (P6) file".into()));
    }
    let file = File::open(path).map_err(|e| err(e.to_string()))?;
    let decoder = PnmDecoder::new(BufReader::new(file)).map_err(|e| err(e.to_string()))?;
    let image = DynamicImage::from_decoder(decoder).map_err(|e| err(e.to_string()))?;
    let (w, h) = (image.width() as usize, image.height() as usize);
    let plane = w * h;
    let mut data = vec![0f32; 3 * plane];
    match image {
        DynamicImage::ImageLuma8(gray) => {
            for (i, p) in gray.as_raw().iter().enumerate() {
                let v = *p as f32 / 255.0;
                data[i] = v;
                data[plane + i] = v;
                data[2 * plane + i] = v;
            }
        }
        DynamicImage::ImageRgb8(rgb) => {
            for (i, px) in rgb.as_raw().chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[c * plane + i] = px[c] as f32 / 255.0;
                }
            }
        }
        other => {
            return Err(err(format!(
                "unsupported sample format {:?}, only 8-bit images are accepted",
                other.color()
            )))
        }
    }
    Tensor::new(vec![3, h, w], data).map_err(|e| err(e.to_string()))
}

/// Loads every frame of `dir` in file-name order.
pub fn load_frames(dir: &Path, id: &str, label: &str) -> Result<VideoClip, IngestError> {
    let files = list_frame_files(dir)?;
    if files.is_empty() {
        return Err(IngestError::Frame {
            path: dir.to_path_buf(),
            msg: "no .ppm/.pgm frames found".into(),
        });
    }
    let mut frames = Vec::with_capacity(files.len());
    for path in &files {
        let frame = decode_frame(path)?;
        if let Some(first) = frames.first().map(|f: &Tensor| f.dims().to_vec()) {
            if frame.dims() != first.as_slice() {
                return Err(IngestError::Frame {
                    path: path.clone(),
                    msg: format!(
                        "frame dims {:?} differ from the first frame's {:?}",
                        frame.dims(),
                        first
                    ),
                });
            }
        }
        frames.push(frame);
    }
    VideoClip::new(id, label, frames)
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a `[3, H, W]` (P6) or `[1, H, W]` (P5) tensor in `[0, 1]` as 8-bit PNM.
pub fn write_frame(path: &Path, frame: &Tensor) -> Result<(), IngestError> {
    let err = |msg: String| IngestError::Frame {
        path: path.to_path_buf(),
        msg,
    };
    let (c, h, w) = frame
        .chw("write_frame")
        .map_err(|e| err(e.to_string()))?;
    let plane = h * w;
    let src = frame.data();
    let (subtype, color, bytes): (_, _, Vec<u8>) = match c {
        1 => (
            PnmSubtype::Graymap(SampleEncoding::Binary),
            ExtendedColorType::L8,
            src.iter().map(|&v| to_u8(v)).collect(),
        ),
        3 => (
            PnmSubtype::Pixmap(SampleEncoding::Binary),
            ExtendedColorType::Rgb8,
            (0..plane)
                .flat_map(|i| (0..3).map(move |ch| to_u8(src[ch * plane + i])))
                .collect(),
        ),
        _ => return Err(err(format!("cannot write {c}-channel frame"))),
    };
    let file = File::create(path).map_err(|e| err(e.to_string()))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(subtype)
        .write_image(&bytes, w as u32, h as u32, color)
        .map_err(|e| err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_frame_promoted_and_scaled() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::write(tmp.path().join("f0.pgm"), b"P5\n2 2\n255\n\xff\xff\xff\xff").unwrap();
        let clip = load_frames(tmp.path(), "v", "c").unwrap();
        assert_eq!(clip.frame_count(), 1);
        assert_eq!(clip.frames()[0].dims(), &[3, 2, 2]);
        assert!(clip.frames()[0].data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mixed_sizes_rejected_naming_file() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::write(tmp.path().join("a.pgm"), b"P5\n2 2\n255\n\x00\x00\x00\x00").unwrap();
        std::fs::write(tmp.path().join("b.pgm"), b"P5\n3 1\n255\n\x00\x00\x00").unwrap();
        match load_frames(tmp.path(), "v", "c") {
            Err(IngestError::Frame { path, .. }) => assert!(path.ends_with("b.pgm")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undecodable_file_is_error() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::write(tmp.path().join("a.ppm"), b"P6\n2 2\n255\n\x00").unwrap();
        assert!(load_frames(tmp.path(), "v", "c").is_err());
        std::fs::write(tmp.path().join("a.ppm"), b"P3\n1 1\n255\n0 0 0\n").unwrap();
        assert!(load_frames(tmp.path(), "v", "c").is_err());
    }

    #[test]
    fn ppm_write_read_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let data: Vec<f32> = (0..3 * 4 * 5).map(|i| (i * 4) as f32 / 255.0).collect();
        let frame = Tensor::new(vec![3, 4, 5], data).unwrap();
        let path = tmp.path().join("x.ppm");
        write_frame(&path, &frame).unwrap();
        let back = decode_frame(&path).unwrap();
        assert_eq!(back, frame);
    }
}
