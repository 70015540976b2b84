//! The color application: image I/O, pixel-cloud extraction, direct
//! pixel-space palette transfer by SW gradient descent, and a
//! histogram-matching baseline.

mod histmatch;
mod transfer;

pub use histmatch::histogram_match;
pub use transfer::{
    transfer_palette, transfer_palette_traced, PaletteTransferConfig, TransferTraceRow,
};

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ot::PointCloud;
use crate::rng::stream_rng;

/// An H x W x 3 color raster with channels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

const SWIM_MAGIC: &[u8; 4] = b"SWIM";

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("image dimensions must be >= 1".into()));
        }
        if data.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(data.len(), width * height * 3));
        }
        if data.iter().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(Error::NonFinite("ImageBuffer channel outside [0,1]"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * 3..(i + 1) * 3]
    }

    /// n pixels sampled uniformly with replacement; this is the feature
    /// extractor mapping an image to its color cloud.
    pub fn sample_pixels(&self, n: usize, seed: u64) -> Result<PointCloud> {
        if n == 0 {
            return Err(Error::EmptyDistribution);
        }
        let mut rng = stream_rng(seed, 0x5049_5853);
        let total = self.pixel_count();
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            let i = rng.gen_range(0..total);
            data.extend_from_slice(self.pixel(i));
        }
        PointCloud::new(n, 3, data)
    }

    /// The exact multiset of all pixels.
    pub fn all_pixels(&self) -> PointCloud {
        PointCloud::new(self.pixel_count(), 3, self.data.clone()).expect("validated buffer")
    }

    // ---- internal lossless float format ----

    pub fn write_swim<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(SWIM_MAGIC)?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_swim<R: Read>(r: &mut R) -> Result<ImageBuffer> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SWIM_MAGIC {
            return Err(Error::CorruptHeader(format!("bad magic {magic:?}")));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let w = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let h = u32::from_le_bytes(b4) as usize;
        if w == 0 || h == 0 {
            return Err(Error::CorruptHeader(format!("{w}x{h}")));
        }
        let mut data = vec![0.0; w * h * 3];
        let mut b8 = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        ImageBuffer::new(w, h, data)
    }

    fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<ImageBuffer> {
        let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
        ImageBuffer::new(width, height, data)
    }

    fn write_ppm<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.to_u8())?;
        Ok(())
    }

    fn read_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
        let header_err = |m: &str| Error::CorruptHeader(format!("ppm: {m}"));
        // parse "P6" <w> <h> <maxval> separated by whitespace, then raw data
        let mut pos = 0usize;
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(header_err("truncated header"));
            }
            fields.push(
                std::str::from_utf8(&bytes[start..pos])
                    .map_err(|_| header_err("non-ascii header"))?
                    .to_string(),
            );
        }
        pos += 1; // single whitespace after maxval
        if fields[0] != "P6" {
            return Err(header_err(&format!("magic {}", fields[0])));
        }
        let w: usize = fields[1].parse().map_err(|_| header_err("width"))?;
        let h: usize = fields[2].parse().map_err(|_| header_err("height"))?;
        let maxval: usize = fields[3].parse().map_err(|_| header_err("maxval"))?;
        if maxval != 255 {
            return Err(header_err(&format!("maxval {maxval}, expected 255")));
        }
        let need = w * h * 3;
        let body = bytes.get(pos..pos + need).ok_or_else(|| header_err("short body"))?;
        ImageBuffer::from_u8(w, h, body)
    }
}

/// Load a raster by extension: .png and .ppm quantize to the 1/255 grid,
/// .swim is the lossless 64-bit float format.
pub fn load_image<P: AsRef<Path>>(path: P) -> Result<ImageBuffer> {
    let path = path.as_ref();
    match extension(path)?.as_str() {
        "swim" => {
            let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
            ImageBuffer::read_swim(&mut f)
        }
        "ppm" => {
            let bytes = std::fs::read(path)?;
            ImageBuffer::read_ppm(&bytes)
        }
        "png" => {
            let img = image::open(path)
                .map_err(|e| Error::CorruptHeader(format!("png: {e}")))?
                .to_rgb8();
            ImageBuffer::from_u8(img.width() as usize, img.height() as usize, img.as_raw())
        }
        other => Err(Error::UnsupportedFormat(other.to_string())),
    }
}

pub fn save_image<P: AsRef<Path>>(img: &ImageBuffer, path: P) -> Result<()> {
    let path = path.as_ref();
    match extension(path)?.as_str() {
        "swim" => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            img.write_swim(&mut f)
        }
        "ppm" => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            img.write_ppm(&mut f)
        }
        "png" => {
            let buf: image::RgbImage = image::ImageBuffer::from_raw(
                img.width() as u32,
                img.height() as u32,
                img.to_u8(),
            )
            .expect("buffer size");
            buf.save(path)
                .map_err(|e| Error::Config(format!("png save: {e}")))
        }
        other => Err(Error::UnsupportedFormat(other.to_string())),
    }
}

fn extension(path: &Path) -> Result<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .ok_or_else(|| Error::UnsupportedFormat(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
        let mut rng = stream_rng(seed, 0);
        let data = (0..w * h * 3).map(|_| rng.gen::<f64>()).collect();
        ImageBuffer::new(w, h, data).unwrap()
    }

    #[test]
    fn swim_roundtrip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.swim");
        let img = random_image(7, 5, 1);
        save_image(&img, &p).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn ppm_quantization_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ppm");
        let p2 = dir.path().join("b.ppm");
        let img = random_image(9, 4, 2);
        save_image(&img, &p1).unwrap();
        let first = load_image(&p1).unwrap();
        save_image(&first, &p2).unwrap();
        assert_eq!(load_image(&p2).unwrap(), first);
    }

    #[test]
    fn png_roundtrip_matches_ppm_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.png");
        let p2 = dir.path().join("a.ppm");
        let img = random_image(6, 6, 3);
        save_image(&img, &p1).unwrap();
        save_image(&img, &p2).unwrap();
        assert_eq!(load_image(&p1).unwrap(), load_image(&p2).unwrap());
    }

    #[test]
    fn one_by_one_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::new(1, 1, vec![0.5, 0.25, 1.0]).unwrap();
        for name in ["x.swim", "x.ppm", "x.png"] {
            let p = dir.path().join(name);
            save_image(&img, &p).unwrap();
            let back = load_image(&p).unwrap();
            assert_eq!(back.width(), 1);
            assert_eq!(back.height(), 1);
        }
    }

    #[test]
    fn unsupported_format_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.gif");
        let img = random_image(2, 2, 4);
        assert!(matches!(
            save_image(&img, &p),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn corrupt_header_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ppm");
        std::fs::write(&p, b"P5\n2 2\n255\nxxxx").unwrap();
        assert!(matches!(load_image(&p), Err(Error::CorruptHeader(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_image("/nonexistent/path/a.ppm"),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn constant_image_gives_constant_cloud() {
        let img = ImageBuffer::new(4, 4, vec![0.25; 48]).unwrap();
        let cloud = img.sample_pixels(10, 3).unwrap();
        for p in cloud.iter_points() {
            assert_eq!(p, &[0.25, 0.25, 0.25]);
        }
    }

    #[test]
    fn exhaustive_pixels_exact_multiset() {
        let img = random_image(3, 2, 5);
        let cloud = img.all_pixels();
        assert_eq!(cloud.len(), 6);
        assert_eq!(cloud.data(), img.data());
    }

    #[test]
    fn sample_means_close_across_seeds() {
        let img = random_image(32, 32, 6);
        let n = 4096;
        let a = img.sample_pixels(n, 1).unwrap();
        let b = img.sample_pixels(n, 2).unwrap();
        // channel std is <= ~0.3 for uniform data; 3 sigma / sqrt(n)
        let bound = 3.0 * 0.3 / (n as f64).sqrt();
        for (ma, mb) in a.mean().iter().zip(b.mean()) {
            assert!((ma - mb).abs() < bound * 2.0, "{ma} vs {mb}");
        }
    }
}
