//! Grayscale image container, PGM/PNG I/O, Gaussian noise synthesis and
//! quality metrics.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Row-major grayscale image with nominal intensities in `[0, 1]`.
///
/// Both sides are powers of two; the wavelet transform relies on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if !height.is_power_of_two() || !width.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "image sides must be powers of two, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "{} samples for a {height}x{width} image",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Builds an image from a function of `(row, col)`.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Self::new(height, width, data)
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Deterministic piecewise-smooth test scene: a shaded background, a few
    /// flat shapes with sharp edges and a textured patch.
    pub fn test_scene(n: usize) -> Result<Self> {
        let s = n as f64;
        Self::from_fn(n, n, |r, c| {
            let y = (r as f64 + 0.5) / s;
            let x = (c as f64 + 0.5) / s;
            let mut v = 0.25 + 0.2 * x + 0.1 * y;
            if (x - 0.3).powi(2) + (y - 0.35).powi(2) < 0.18f64.powi(2) {
                v = 0.85;
            }
            if (0.55..0.9).contains(&x) && (0.15..0.4).contains(&y) {
                v = 0.1;
            }
            if (0.5..0.85).contains(&x) && (0.55..0.85).contains(&y) {
                v = 0.5 + 0.3 * (x * 6.0 * std::f64::consts::TAU).sin() * (y * 4.0 * std::f64::consts::TAU).cos();
            }
            if (0.1..0.4).contains(&x) && (0.7..0.78).contains(&y) {
                v = 0.95;
            }
            v
        })
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("pgm") => Ok(Self::Pgm),
            Some("png") => Ok(Self::Png),
            _ => Err(Error::Format(format!(
                "cannot infer image format of {}",
                path.display()
            ))),
        }
    }
}

pub fn load_image(path: impl AsRef<Path>, format: ImageFormat) -> Result<Image> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let (height, width, samples) = match format {
        ImageFormat::Pgm => decode_pgm(&bytes)?,
        ImageFormat::Png => decode_png(&bytes)?,
    };
    let data = samples.into_iter().map(|s| s as f64 / 255.0).collect();
    Image::new(height, width, data)
}

/// Clamps to `[0, 1]` and quantizes with `floor(255 x + 0.5)`.
pub fn quantize(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0) + 0.5).floor() as u8
}

pub fn save_image(img: &Image, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let samples: Vec<u8> = img.data.iter().copied().map(quantize).collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ImageFormat::Pgm => {
            write!(out, "P5\n{} {}\n255\n", img.width, img.height)
                .and_then(|_| out.write_all(&samples))
                .map_err(|e| Error::io(path, e))?;
        }
        ImageFormat::Png => {
            let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc
                .write_header()
                .map_err(|e| Error::Format(format!("png encode: {e}")))?;
            writer
                .write_image_data(&samples)
                .map_err(|e| Error::Format(format!("png encode: {e}")))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format("not a binary PGM (missing P5 magic)".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed PGM header".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "unsupported PGM maxval {maxval} (only 255)"
        )));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("malformed PGM header".into()));
    }
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(Error::Format("truncated PGM raster".into()));
    }
    Ok((height, width, bytes[pos..pos + n].to_vec()))
}

fn decode_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png decode: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "only 8-bit grayscale PNG is supported, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(width * height)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png decode: {e}")))?;
    buf.truncate(frame.buffer_size());
    if buf.len() != width * height {
        return Err(Error::Format("unexpected PNG raster size".into()));
    }
    Ok((height, width, buf))
}

/// Additive white Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }
}

/// Standard normal stream: ChaCha20 seeded from a `u64`, Box–Muller on pairs
/// of 53-bit uniforms in the open interval (0, 1).
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * self.uniform().ln()).sqrt();
        let phi = std::f64::consts::TAU * self.uniform();
        self.spare = Some(r * phi.sin());
        r * phi.cos()
    }

    pub fn fill(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample()).collect()
    }
}

/// Returns `img + eta` with `eta ~ N(0, sigma^2)` iid. The result is not
/// clamped.
pub fn add_noise(img: &Image, noise: NoiseModel) -> Image {
    if noise.sigma == 0.0 {
        return img.clone();
    }
    let mut stream = GaussianStream::new(noise.seed);
    let data = img
        .data
        .iter()
        .map(|&v| v + noise.sigma * stream.sample())
        .collect();
    Image::from_raw(img.height, img.width, data)
}

/// `20 log10(|reference| / |candidate - reference|)`, `+inf` for an exact
/// match.
pub fn snr_db(candidate: &Image, reference: &Image) -> Result<f64> {
    if !candidate.same_shape(reference) {
        return Err(Error::Dimension(format!(
            "snr of {}x{} against {}x{}",
            candidate.height, candidate.width, reference.height, reference.width
        )));
    }
    let err: f64 = candidate
        .data
        .iter()
        .zip(&reference.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (reference.norm() / err).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        (dir, p)
    }

    #[test]
    fn pgm_full_scale_and_zero() {
        for (sample, expected) in [(255u8, 1.0), (0, 0.0)] {
            let (_d, p) = tmp("a.pgm");
            let mut bytes = b"P5\n# comment\n64 64\n255\n".to_vec();
            bytes.extend(std::iter::repeat_n(sample, 64 * 64));
            std::fs::write(&p, bytes).unwrap();
            let img = load_image(&p, ImageFormat::Pgm).unwrap();
            assert_eq!((img.height(), img.width()), (64, 64));
            assert!(img.data().iter().all(|&v| v == expected));
        }
    }

    #[test]
    fn non_power_of_two_png_rejected() {
        let (_d, p) = tmp("a.png");
        let f = File::create(&p).unwrap();
        let mut enc = png::Encoder::new(f, 64, 65);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header()
            .unwrap()
            .write_image_data(&vec![7u8; 64 * 65])
            .unwrap();
        assert!(matches!(
            load_image(&p, ImageFormat::Png),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rgb_png_and_bad_pgm_rejected() {
        let (_d, p) = tmp("a.png");
        let f = File::create(&p).unwrap();
        let mut enc = png::Encoder::new(f, 4, 4);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header().unwrap().write_image_data(&[0u8; 48]).unwrap();
        assert!(matches!(load_image(&p, ImageFormat::Png), Err(Error::Format(_))));

        let (_d2, q) = tmp("b.pgm");
        std::fs::write(&q, b"P2\n4 4\n255\n").unwrap();
        assert!(matches!(load_image(&q, ImageFormat::Pgm), Err(Error::Format(_))));
        std::fs::write(&q, b"P5\n4 4\n65535\n").unwrap();
        assert!(matches!(load_image(&q, ImageFormat::Pgm), Err(Error::Format(_))));
        std::fs::write(&q, b"P5\n4 4\n255\n123").unwrap();
        assert!(matches!(load_image(&q, ImageFormat::Pgm), Err(Error::Format(_))));
        assert!(matches!(
            load_image("/nonexistent/x.pgm", ImageFormat::Pgm),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn save_quantization_rules() {
        let (_d, p) = tmp("half.pgm");
        let img = Image::filled(4, 4, 0.5).unwrap();
        save_image(&img, &p, ImageFormat::Pgm).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.ends_with(&[128u8; 16]));
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(-0.2), 0);
    }

    #[test]
    fn png_round_trip_within_one_level() {
        let mut g = GaussianStream::new(3);
        let data = (0..32 * 16)
            .map(|_| (0.5 + 0.2 * g.sample()).clamp(0.0, 1.0))
            .collect();
        let img = Image::new(32, 16, data).unwrap();
        for (name, fmt) in [("r.png", ImageFormat::Png), ("r.pgm", ImageFormat::Pgm)] {
            let (_d, p) = tmp(name);
            save_image(&img, &p, fmt).unwrap();
            let back = load_image(&p, fmt).unwrap();
            let max = img
                .data()
                .iter()
                .zip(back.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max <= 1.0 / 255.0, "{max}");
        }
    }

    #[test]
    fn noise_zero_sigma_is_identity() {
        let img = Image::test_scene(16).unwrap();
        assert_eq!(add_noise(&img, NoiseModel::new(0.0, 9).unwrap()), img);
        assert!(NoiseModel::new(-1.0, 0).is_err());
    }

    #[test]
    fn noise_statistics_and_reproducibility() {
        let img = Image::zeros(1024, 1024).unwrap();
        let noise = NoiseModel::new(0.02, 42).unwrap();
        let a = add_noise(&img, noise);
        let b = add_noise(&img, noise);
        assert_eq!(a, b);
        let n = a.len() as f64;
        let mean = a.data().iter().sum::<f64>() / n;
        let sd = (a.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd / 0.02 - 1.0).abs() < 0.01, "{sd}");
        assert!(mean.abs() < 1e-4);
    }

    #[test]
    fn gaussian_stream_is_frozen() {
        // Regression values for the documented stream; changing the
        // generator breaks bit-reproducibility of stored experiments.
        let mut g = GaussianStream::new(0);
        let first: Vec<f64> = g.fill(4);
        let mut h = GaussianStream::new(0);
        assert_eq!(first, h.fill(4));
        let expected = GAUSSIAN_SEED0;
        for (a, b) in first.iter().zip(expected) {
            assert_eq!(a.to_bits(), b.to_bits(), "{a} vs {b}");
        }
    }

    const GAUSSIAN_SEED0: [f64; 4] = [2.7082598213737836, -0.307305151917225, 0.21486562813574886, 0.5036753864812076];

    #[test]
    fn snr_examples() {
        let r = Image::filled(8, 8, 1.0).unwrap();
        assert_eq!(snr_db(&r, &r).unwrap(), f64::INFINITY);
        let c = Image::filled(8, 8, 1.1).unwrap();
        assert!((snr_db(&c, &r).unwrap() - 20.0).abs() < 1e-9);
        let s = Image::test_scene(8).unwrap();
        let d = Image::new(8, 8, s.data().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!(snr_db(&d, &s).unwrap().abs() < 1e-12);
        let small = Image::zeros(4, 4).unwrap();
        assert!(matches!(snr_db(&small, &r), Err(Error::Dimension(_))));
    }

    proptest! {
        #[test]
        fn snr_scale_invariant(seed in 0u64..1000, scale in 0.01f64..100.0) {
            let r = Image::test_scene(8).unwrap();
            let c = add_noise(&r, NoiseModel::new(0.1, seed).unwrap());
            let rs = Image::new(8, 8, r.data().iter().map(|v| v * scale).collect()).unwrap();
            let cs = Image::new(8, 8, c.data().iter().map(|v| v * scale).collect()).unwrap();
            let a = snr_db(&c, &r).unwrap();
            let b = snr_db(&cs, &rs).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
