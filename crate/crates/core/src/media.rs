//! Image front-end: 3-level Haar DWT, host statistics, perceptual weights,
//! metrics and binary PGM I/O.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, invalid, Error, Result};

pub const LEVELS: usize = 3;
pub const SIGMA_FLOOR: f64 = 1e-6;
pub const WPSNR_CAP_DB: f64 = 99.0;

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaPlane {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl MediaPlane {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_len("pixels", width * height, pixels.len())?;
        if width == 0 || height == 0 {
            return invalid("image dimensions must be positive");
        }
        Ok(Self { width, height, pixels })
    }

    /// Round and clamp real samples to 8 bits.
    pub fn from_f64(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        check_len("samples", width * height, values.len())?;
        let pixels = values.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Mirror-pad right and bottom edges up to multiples of `block`.
    pub fn pad_reflect(&self, block: usize) -> MediaPlane {
        let w = self.width.div_ceil(block) * block;
        let h = self.height.div_ceil(block) * block;
        let mirror = |i: usize, len: usize| -> usize {
            if i < len {
                i
            } else {
                let period = 2 * len;
                let k = i % period;
                if k < len {
                    k
                } else {
                    period - 1 - k
                }
            }
        };
        let mut pixels = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                pixels.push(self.get(mirror(r, self.height), mirror(c, self.width)));
            }
        }
        MediaPlane { width: w, height: h, pixels }
    }

    pub fn crop(&self, width: usize, height: usize) -> Result<MediaPlane> {
        if width > self.width || height > self.height {
            return invalid("crop larger than image");
        }
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            pixels.extend_from_slice(&self.pixels[r * self.width..r * self.width + width]);
        }
        MediaPlane::new(width, height, pixels)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    let unit = 1 << LEVELS;
    if width < unit || height < unit || width % unit != 0 || height % unit != 0 {
        return invalid(format!(
            "image dimensions {width}×{height} must be positive multiples of {unit}"
        ));
    }
    Ok(())
}

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn haar_forward(buf: &mut [f64], tmp: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (a, b) = (buf[2 * i], buf[2 * i + 1]);
        tmp[i] = (a + b) * SQRT_HALF;
        tmp[half + i] = (a - b) * SQRT_HALF;
    }
    buf.copy_from_slice(&tmp[..buf.len()]);
}

fn haar_inverse(buf: &mut [f64], tmp: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (s, d) = (buf[i], buf[half + i]);
        tmp[2 * i] = (s + d) * SQRT_HALF;
        tmp[2 * i + 1] = (s - d) * SQRT_HALF;
    }
    buf.copy_from_slice(&tmp[..buf.len()]);
}

fn level_pass(data: &mut [f64], width: usize, w: usize, h: usize, f: fn(&mut [f64], &mut [f64]), rows_first: bool) {
    let mut line = vec![0.0; w.max(h)];
    let mut tmp = vec![0.0; w.max(h)];
    let rows = |data: &mut [f64], line: &mut [f64], tmp: &mut [f64]| {
        for r in 0..h {
            let row = &mut data[r * width..r * width + w];
            line[..w].copy_from_slice(row);
            f(&mut line[..w], tmp);
            row.copy_from_slice(&line[..w]);
        }
    };
    let cols = |data: &mut [f64], line: &mut [f64], tmp: &mut [f64]| {
        for c in 0..w {
            for r in 0..h {
                line[r] = data[r * width + c];
            }
            f(&mut line[..h], tmp);
            for r in 0..h {
                data[r * width + c] = line[r];
            }
        }
    };
    if rows_first {
        rows(data, &mut line, &mut tmp);
        cols(data, &mut line, &mut tmp);
    } else {
        cols(data, &mut line, &mut tmp);
        rows(data, &mut line, &mut tmp);
    }
}

/// Orthonormal 3-level Haar transform, row-major Mallat layout.
pub fn dwt3(samples: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
    check_dims(width, height)?;
    check_len("samples", width * height, samples.len())?;
    let mut data = samples.to_vec();
    for level in 0..LEVELS {
        level_pass(&mut data, width, width >> level, height >> level, haar_forward, true);
    }
    Ok(data)
}

/// Inverse of [`dwt3`].
pub fn idwt3(coeffs: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
    check_dims(width, height)?;
    check_len("coefficients", width * height, coeffs.len())?;
    let mut data = coeffs.to_vec();
    for level in (0..LEVELS).rev() {
        level_pass(&mut data, width, width >> level, height >> level, haar_inverse, false);
    }
    Ok(data)
}

/// Rectangle of one subband in the Mallat layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subband {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

/// The ten subbands of a 3-level decomposition: the coarse approximation
/// first, then horizontal, vertical and diagonal details from coarse to fine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubbandLayout {
    width: usize,
    height: usize,
    bands: Vec<Subband>,
}

impl SubbandLayout {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        let (cw, ch) = (width >> LEVELS, height >> LEVELS);
        let mut bands = vec![Subband { row: 0, col: 0, rows: ch, cols: cw }];
        for level in (1..=LEVELS).rev() {
            let (w, h) = (width >> level, height >> level);
            bands.push(Subband { row: 0, col: w, rows: h, cols: w });
            bands.push(Subband { row: h, col: 0, rows: h, cols: w });
            bands.push(Subband { row: h, col: w, rows: h, cols: w });
        }
        Ok(Self { width, height, bands })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> &[Subband] {
        &self.bands
    }

    /// Subband index of every coefficient.
    pub fn map(&self) -> Vec<u8> {
        let mut map = vec![0u8; self.width * self.height];
        for (b, band) in self.bands.iter().enumerate() {
            for r in band.row..band.row + band.rows {
                for c in band.col..band.col + band.cols {
                    map[r * self.width + c] = b as u8;
                }
            }
        }
        map
    }
}

/// Local RMS of each coefficient over a `window × window` neighbourhood
/// clipped to its subband, floored at [`SIGMA_FLOOR`].
pub fn estimate_sigma(coeffs: &[f64], layout: &SubbandLayout, window: usize) -> Result<Vec<f64>> {
    check_len("coefficients", layout.width * layout.height, coeffs.len())?;
    if window < 3 || window % 2 == 0 {
        return invalid(format!("window must be odd and at least 3, got {window}"));
    }
    let half = window / 2;
    let width = layout.width;
    let mut out = vec![SIGMA_FLOOR; coeffs.len()];
    for band in &layout.bands {
        // Summed-area table of squares, (rows+1)×(cols+1).
        let sw = band.cols + 1;
        let mut sat = vec![0.0; (band.rows + 1) * sw];
        for r in 0..band.rows {
            let mut acc = 0.0;
            for c in 0..band.cols {
                let v = coeffs[(band.row + r) * width + band.col + c];
                acc += v * v;
                sat[(r + 1) * sw + c + 1] = sat[r * sw + c + 1] + acc;
            }
        }
        for r in 0..band.rows {
            let (r0, r1) = (r.saturating_sub(half), (r + half + 1).min(band.rows));
            for c in 0..band.cols {
                let (c0, c1) = (c.saturating_sub(half), (c + half + 1).min(band.cols));
                let sum = sat[r1 * sw + c1] - sat[r0 * sw + c1] - sat[r1 * sw + c0] + sat[r0 * sw + c0];
                let count = ((r1 - r0) * (c1 - c0)) as f64;
                let rms = (sum.max(0.0) / count).sqrt();
                out[(band.row + r) * width + band.col + c] = rms.max(SIGMA_FLOOR);
            }
        }
    }
    Ok(out)
}

/// Perceptual weights `φ_i = ρ / sqrt(σ̄_i + 1)`, where the activity
/// `σ̄_i = σ_Xi² / E[σ_X²]` is taken over the whole host and `ρ` makes the
/// weights average to one.
///
/// High-activity coefficients mask distortion and get small weights, so a
/// coarse approximation band with large local energy is both cheap to mark
/// and lightly weighted at the correlator.
pub fn perceptual_phi(sigma_x: &[f64]) -> Result<(Vec<f64>, f64)> {
    if sigma_x.is_empty() {
        return invalid("empty host");
    }
    if sigma_x.iter().any(|s| !(*s >= 0.0)) {
        return invalid("σ_X must be non-negative");
    }
    let mean_sq = sigma_x.iter().map(|s| s * s).sum::<f64>() / sigma_x.len() as f64;
    let raw: Vec<f64> = sigma_x
        .iter()
        .map(|&s| {
            let rel = if mean_sq > 0.0 { s * s / mean_sq } else { 0.0 };
            1.0 / (rel + 1.0).sqrt()
        })
        .collect();
    let rho = raw.len() as f64 / raw.iter().sum::<f64>();
    Ok((raw.iter().map(|r| r * rho).collect(), rho))
}

/// DWT-domain host with per-coefficient statistics.
#[derive(Debug, Clone)]
pub struct HostModel {
    pub coeffs: Vec<f64>,
    pub sigma_x: Vec<f64>,
    pub phi: Vec<f64>,
    pub rho: f64,
    pub layout: SubbandLayout,
}

pub const DEFAULT_WINDOW: usize = 5;

impl HostModel {
    pub fn from_plane(plane: &MediaPlane, window: usize) -> Result<Self> {
        let layout = SubbandLayout::new(plane.width, plane.height)?;
        let coeffs = dwt3(&plane.to_f64(), plane.width, plane.height)?;
        let sigma_x = estimate_sigma(&coeffs, &layout, window)?;
        let (phi, rho) = perceptual_phi(&sigma_x)?;
        Ok(Self { coeffs, sigma_x, phi, rho, layout })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Back to pixels, rounded and clamped.
    pub fn to_plane(&self, coeffs: &[f64]) -> Result<MediaPlane> {
        let (w, h) = (self.layout.width, self.layout.height);
        MediaPlane::from_f64(w, h, &idwt3(coeffs, w, h)?)
    }
}

/// Weighted mean squared error `(1/m) Σ φ²(a-b)²`.
pub fn d_xy(a: &[f64], b: &[f64], phi: &[f64]) -> Result<f64> {
    check_len("signal", a.len(), b.len())?;
    check_len("phi", a.len(), phi.len())?;
    if a.is_empty() {
        return invalid("empty signals");
    }
    Ok(a.iter().zip(b).zip(phi).map(|((x, y), f)| (f * (x - y)).powi(2)).sum::<f64>() / a.len() as f64)
}

/// `10 log10(255²/D)`, capped at [`WPSNR_CAP_DB`].
pub fn wpsnr_from_distortion(d: f64) -> f64 {
    if d <= 0.0 {
        return WPSNR_CAP_DB;
    }
    (10.0 * (255.0f64 * 255.0 / d).log10()).min(WPSNR_CAP_DB)
}

pub fn wpsnr(a: &[f64], b: &[f64], phi: &[f64]) -> Result<f64> {
    Ok(wpsnr_from_distortion(d_xy(a, b, phi)?))
}

pub fn psnr(a: &[f64], b: &[f64]) -> Result<f64> {
    wpsnr(a, b, &vec![1.0; a.len()])
}

/// Fraction of differing bits.
pub fn ber(a: &[u8], b: &[u8]) -> Result<f64> {
    check_len("message", a.len(), b.len())?;
    if a.is_empty() {
        return invalid("empty messages");
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64)
}

fn pgm_err<T>(offset: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Pgm { offset, msg: msg.into() })
}

/// Parse a binary (P5) PGM with maxval 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<MediaPlane> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return pgm_err(0, "not a binary PGM (expected magic P5)");
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (idx, field) in fields.iter_mut().enumerate() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return pgm_err(pos, format!("expected header field {}", ["width", "height", "maxval"][idx]));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .or_else(|_| pgm_err(start, format!("header value {text} out of range")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return pgm_err(pos, format!("unsupported maxval {maxval} (only 255)"));
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return pgm_err(pos, "missing whitespace after header"),
    }
    let need = width * height;
    if bytes.len() - pos < need {
        return pgm_err(bytes.len(), format!("truncated payload: need {need} bytes, found {}", bytes.len() - pos));
    }
    MediaPlane::new(width, height, bytes[pos..pos + need].to_vec())
}

pub fn encode_pgm(plane: &MediaPlane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width, plane.height).into_bytes();
    out.extend_from_slice(&plane.pixels);
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<MediaPlane> {
    parse_pgm(&std::fs::read(path)?)
}

pub fn write_pgm(plane: &MediaPlane, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&encode_pgm(plane))?;
    f.flush()?;
    Ok(())
}

/// Test image with smooth shading, a textured disc and a noisy band.
pub fn synthetic_image(width: usize, height: usize, seed: u64) -> Result<MediaPlane> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fw, fh) = (width as f64, height as f64);
    let mut pixels = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let (x, y) = (c as f64 / fw, r as f64 / fh);
            let mut v = 60.0 + 120.0 * x * (1.0 - 0.5 * y);
            let d = ((x - 0.6).powi(2) + (y - 0.4).powi(2)).sqrt();
            if d < 0.25 {
                v += 40.0 * ((c as f64 * 0.7).sin() * (r as f64 * 0.45).cos());
            }
            if y > 0.75 {
                v += rng.random_range(-30.0..30.0);
            }
            v += rng.random_range(-2.0..2.0);
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    MediaPlane::new(width, height, pixels)
}
