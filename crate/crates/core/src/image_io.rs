//! Grayscale image input, contrast normalization and the regularized
//! probability field that the encoder inverts.
//!
//! Pixel `(row r, column c)` (0-based) covers the unit square
//! `[c, c + 1] x [r, r + 1]` in continuous pixel coordinates.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default background lighting constant.
pub const DEFAULT_LAMBDA: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "pgm" | "pnm" => Ok(ImageFormat::Pgm),
            "png" => Ok(ImageFormat::Png),
            other => Err(Error::UnsupportedFormat(format!(
                "extension {other:?} of {}",
                path.display()
            ))),
        }
    }
}

/// Which side of the contrast holds the figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    LightOnDark,
    DarkOnLight,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::LightOnDark => "light-on-dark",
            Polarity::DarkOnLight => "dark-on-light",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "light-on-dark" => Ok(Polarity::LightOnDark),
            "dark-on-light" => Ok(Polarity::DarkOnLight),
            other => Err(Error::InvalidArgument(format!(
                "unknown polarity {other:?} (expected light-on-dark or dark-on-light)"
            ))),
        }
    }
}

/// A scalar image with finite nonnegative pixel values, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::ImageTooSmall { width, height });
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidPixels(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidPixels(format!(
                "pixel values must be finite and >= 0, found {bad}"
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Build an image from a per-pixel function of `(row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut value: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(value(r, c));
            }
        }
        GrayImage::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Contrast-normalized image: values in `[0, 1]`, min exactly 0, max exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    foreground_mass: f64,
    polarity: Polarity,
}

impl NormalizedImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Sum of all normalized pixel values.
    pub fn foreground_mass(&self) -> f64 {
        self.foreground_mass
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    /// View as a plain image, e.g. to renormalize it.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.clone(),
        }
    }
}

/// Rescale the image so the figure spans `[0, 1]`.
pub fn normalize(img: &GrayImage, polarity: Polarity) -> Result<NormalizedImage> {
    let (lo, hi) = img.min_max();
    if hi <= lo {
        return Err(Error::DegenerateContrast(lo));
    }
    let range = hi - lo;
    let pixels: Vec<f64> = match polarity {
        Polarity::LightOnDark => img.pixels.iter().map(|&h| (h - lo) / range).collect(),
        Polarity::DarkOnLight => img.pixels.iter().map(|&h| (hi - h) / range).collect(),
    };
    let foreground_mass = pixels.iter().sum();
    Ok(NormalizedImage {
        width: img.width,
        height: img.height,
        pixels,
        foreground_mass,
        polarity,
    })
}

/// Discrete probability array `f = (g + c) / sum(g + c)` with its row-marginal CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    width: usize,
    height: usize,
    f: Vec<f64>,
    c: f64,
    lambda: f64,
    row_cdf: Vec<f64>,
    foreground_mass: f64,
    polarity: Polarity,
}

impl DensityField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Probability cells, row-major.
    pub fn cells(&self) -> &[f64] {
        &self.f
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.f[r * self.width..(r + 1) * self.width]
    }

    /// The background constant added to every normalized pixel.
    pub fn background(&self) -> f64 {
        self.c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Foreground mass of the normalized image this field was built from.
    pub fn foreground_mass(&self) -> f64 {
        self.foreground_mass
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    /// `row_cdf[r]` is the probability mass of rows `0..=r`; the last entry is 1.
    pub fn row_cdf(&self) -> &[f64] {
        &self.row_cdf
    }
}

pub fn make_density_field(nimg: &NormalizedImage, lambda: f64) -> Result<DensityField> {
    build_field(
        nimg.width,
        nimg.height,
        &nimg.pixels,
        nimg.foreground_mass,
        nimg.polarity,
        lambda,
    )
}

impl DensityField {
    /// Build a field from nonnegative weights used directly in place of the
    /// normalized image, skipping contrast normalization. This is the only
    /// way to obtain a uniform field, since flat images cannot be normalized.
    pub fn from_weights(width: usize, height: usize, weights: &[f64], lambda: f64) -> Result<Self> {
        let img = GrayImage::new(width, height, weights.to_vec())?;
        let mass = img.pixels.iter().sum();
        build_field(width, height, &img.pixels, mass, Polarity::LightOnDark, lambda)
    }
}

fn build_field(
    width: usize,
    height: usize,
    g: &[f64],
    foreground_mass: f64,
    polarity: Polarity,
    lambda: f64,
) -> Result<DensityField> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidLambda(lambda));
    }
    if !(foreground_mass > 0.0) {
        return Err(Error::DegenerateContrast(0.0));
    }
    let c = lambda * foreground_mass / (width * height) as f64;
    let total: f64 = g.iter().map(|g| g + c).sum();
    let f: Vec<f64> = g.iter().map(|g| (g + c) / total).collect();

    let mut row_cdf = Vec::with_capacity(height);
    let mut acc = 0.0;
    for row in f.chunks_exact(width) {
        acc += row.iter().sum::<f64>();
        row_cdf.push(acc);
    }
    let last = acc;
    for p in &mut row_cdf {
        *p /= last;
    }

    Ok(DensityField {
        width,
        height,
        f,
        c,
        lambda,
        row_cdf,
        foreground_mass,
        polarity,
    })
}

pub fn load_image(path: &Path, format: ImageFormat) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        ImageFormat::Pgm => decode_pgm(&bytes),
        ImageFormat::Png => decode_png(&bytes),
    }
}

/// Decode a P2 (ASCII) or P5 (binary) PGM. Values keep their native integer scale.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut header = HeaderReader { bytes, pos: 0 };
    let magic = header.token()?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "netpbm magic {:?}, only P2/P5 graymaps are supported",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedImage(format!("maxval {maxval} out of range 1..=65535")));
    }
    if width < 2 || height < 2 {
        return Err(Error::ImageTooSmall { width, height });
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedImage("dimensions overflow".into()))?;

    let mut pixels = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        match bytes.get(header.pos) {
            Some(b) if b.is_ascii_whitespace() => header.pos += 1,
            _ => return Err(Error::MalformedImage("missing raster separator".into())),
        }
        let raster = &bytes[header.pos..];
        let sample_bytes = if maxval < 256 { 1 } else { 2 };
        if raster.len() < count * sample_bytes {
            return Err(Error::MalformedImage(format!(
                "raster has {} bytes, {} expected",
                raster.len(),
                count * sample_bytes
            )));
        }
        if sample_bytes == 1 {
            pixels.extend(raster[..count].iter().map(|&b| b as usize));
        } else {
            pixels.extend(
                raster[..count * 2]
                    .chunks_exact(2)
                    .map(|p| u16::from_be_bytes([p[0], p[1]]) as usize),
            );
        }
    } else {
        for _ in 0..count {
            pixels.push(header.number("sample")?);
        }
    }
    if let Some(v) = pixels.iter().find(|&&v| v > maxval) {
        return Err(Error::MalformedImage(format!("sample {v} exceeds maxval {maxval}")));
    }
    GrayImage::new(width, height, pixels.into_iter().map(|v| v as f64).collect())
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_blanks(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_blanks();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedImage("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::MalformedImage(format!(
                    "bad {what}: {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::MalformedImage(e.to_string()))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let sixteen_bit = matches!(
        decoded.color(),
        image::ColorType::L16 | image::ColorType::La16 | image::ColorType::Rgb16 | image::ColorType::Rgba16
    );
    let pixels: Vec<f64> = if sixteen_bit {
        decoded.to_luma16().into_raw().into_iter().map(f64::from).collect()
    } else {
        decoded.to_luma8().into_raw().into_iter().map(f64::from).collect()
    };
    GrayImage::new(width, height, pixels)
}

/// Encode as binary PGM. Pixels are rounded and must lie in `0..=maxval`.
pub fn encode_pgm(img: &GrayImage, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::InvalidArgument("maxval must be >= 1".into()));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    for &v in &img.pixels {
        let s = v.round();
        if s > maxval as f64 {
            return Err(Error::InvalidPixels(format!("value {v} exceeds maxval {maxval}")));
        }
        let s = s as u16;
        if maxval < 256 {
            out.push(s as u8);
        } else {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn write_pgm(img: &GrayImage, maxval: u16, path: &Path) -> Result<()> {
    let bytes = encode_pgm(img, maxval)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |r, c| (r * w + c) as f64).unwrap()
    }

    #[test]
    fn decodes_tiny_binary_pgm() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\xff\x00";
        let img = decode_pgm(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0.0, 255.0, 255.0, 0.0]);
    }

    #[test]
    fn ascii_and_binary_agree() {
        let ascii = b"P2\n# comment line\n3 2\n# another\n1000\n0 1 2\n999 1000 7\n";
        let mut binary = b"P5 3 2 1000\n".to_vec();
        for v in [0u16, 1, 2, 999, 1000, 7] {
            binary.extend_from_slice(&v.to_be_bytes());
        }
        assert_eq!(decode_pgm(ascii).unwrap(), decode_pgm(&binary).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            decode_pgm(b"P5\n1 4\n255\n\x00\x00\x00\x00"),
            Err(Error::ImageTooSmall { .. })
        ));
        assert!(matches!(
            decode_pgm(b"P6\n2 2\n255\n"),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_pgm(b"P5\n2 2\n255\n\x00\x00"),
            Err(Error::MalformedImage(_))
        ));
        assert!(matches!(
            decode_pgm(b"P2\n2 2\n10\n0 1 2 11\n"),
            Err(Error::MalformedImage(_))
        ));
        assert!(GrayImage::new(2, 2, vec![0.0, 1.0, -1.0, 0.0]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn pgm_write_read_round_trip() {
        let img = ramp(5, 3);
        for maxval in [255u16, 65535] {
            let bytes = encode_pgm(&img, maxval).unwrap();
            assert_eq!(decode_pgm(&bytes).unwrap(), img);
        }
    }

    #[test]
    fn normalize_maps_endpoints_and_midpoint() {
        let img = GrayImage::new(2, 2, vec![10.0, 110.0, 210.0, 60.0]).unwrap();
        let n = normalize(&img, Polarity::LightOnDark).unwrap();
        assert_eq!(n.pixels(), &[0.0, 0.5, 1.0, 0.25]);
        assert_eq!(n.foreground_mass(), 1.75);
        let d = normalize(&img, Polarity::DarkOnLight).unwrap();
        for (a, b) in n.pixels().iter().zip(d.pixels()) {
            assert_eq!(*b, 1.0 - a);
        }
    }

    #[test]
    fn flat_image_is_rejected() {
        let img = GrayImage::new(3, 3, vec![4.0; 9]).unwrap();
        assert!(matches!(
            normalize(&img, Polarity::LightOnDark),
            Err(Error::DegenerateContrast(_))
        ));
    }

    #[test]
    fn background_constant_matches_formula() {
        // 256x256 image whose normalized mass is exactly 100
        let mut pixels = vec![0.0; 256 * 256];
        for p in pixels.iter_mut().take(100) {
            *p = 1.0;
        }
        let img = GrayImage::new(256, 256, pixels).unwrap();
        let field = make_density_field(&normalize(&img, Polarity::LightOnDark).unwrap(), 1e-4).unwrap();
        let expected = 1e-4 * 100.0 / 65536.0;
        assert!((field.background() - expected).abs() < 1e-20);
        assert!((field.background() - 1.5259e-7).abs() < 1e-11);
    }

    #[test]
    fn uniform_normalized_image_gives_uniform_field() {
        let n = NormalizedImage {
            width: 4,
            height: 3,
            pixels: vec![0.5; 12],
            foreground_mass: 6.0,
            polarity: Polarity::LightOnDark,
        };
        let field = make_density_field(&n, 1e-4).unwrap();
        for &v in field.cells() {
            assert!((v - 1.0 / 12.0).abs() < 1e-15);
        }
    }

    #[test]
    fn field_is_positive_and_normalized() {
        let img = ramp(7, 5);
        let n = normalize(&img, Polarity::LightOnDark).unwrap();
        let field = make_density_field(&n, 1e-4).unwrap();
        let total: f64 = n.pixels().iter().map(|g| g + field.background()).sum();
        let floor = field.background() / total;
        assert!(field.cells().iter().all(|&v| v >= floor * (1.0 - 1e-12) && v > 0.0));
        let sum: f64 = field.cells().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        let cdf = field.row_cdf();
        assert!(cdf.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*cdf.last().unwrap(), 1.0);
    }

    #[test]
    fn lambda_must_be_positive() {
        let n = normalize(&ramp(3, 3), Polarity::LightOnDark).unwrap();
        assert!(matches!(make_density_field(&n, 0.0), Err(Error::InvalidLambda(_))));
        assert!(matches!(make_density_field(&n, -1.0), Err(Error::InvalidLambda(_))));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(ImageFormat::from_path(Path::new("a.PGM")).unwrap(), ImageFormat::Pgm);
        assert_eq!(ImageFormat::from_path(Path::new("a.png")).unwrap(), ImageFormat::Png);
        assert!(ImageFormat::from_path(Path::new("a.jpg")).is_err());
    }
}
