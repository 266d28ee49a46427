//! Attack channels applied to the marked signal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, invalid, Result};
use crate::media::MediaPlane;
use crate::optimizer::{solve_attack, ChannelParams};

/// Attack selection for the benchmark and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackSpec {
    None,
    Awgn { noise_power: f64, seed: u64 },
    /// Worst-case SAWGN meeting a weighted distortion budget.
    Optimal { max_attack: f64, seed: u64 },
    Jpeg { quality: u8 },
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackSpec::Awgn { noise_power, .. } if !(noise_power >= 0.0) => {
                invalid(format!("noise power must be non-negative, got {noise_power}"))
            }
            AttackSpec::Optimal { max_attack, .. } if !(max_attack > 0.0) => {
                invalid(format!("attack budget must be positive, got {max_attack}"))
            }
            AttackSpec::Jpeg { quality } if !(1..=100).contains(&quality) => {
                invalid(format!("JPEG quality must be in 1..=100, got {quality}"))
            }
            _ => Ok(()),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `y + δ` with `δ` i.i.d. `N(0, noise_power)`.
pub fn awgn(y: &[f64], noise_power: f64, seed: u64) -> Result<Vec<f64>> {
    AttackSpec::Awgn { noise_power, seed }.validate()?;
    if noise_power == 0.0 {
        return Ok(y.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = noise_power.sqrt();
    Ok(y.iter().map(|v| v + s * gaussian(&mut rng)).collect())
}

/// `y'_i = γ^a_i y_i + σ_Zi ε_i`.
pub fn sawgn(y: &[f64], gamma_a: &[f64], sigma_z: &[f64], seed: u64) -> Result<Vec<f64>> {
    check_len("gamma_a", y.len(), gamma_a.len())?;
    check_len("sigma_z", y.len(), sigma_z.len())?;
    if gamma_a.iter().any(|g| !(*g >= 0.0)) || sigma_z.iter().any(|s| !(*s >= 0.0)) {
        return invalid("SAWGN needs non-negative gains and noise levels");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(y.iter()
        .zip(gamma_a)
        .zip(sigma_z)
        .map(|((v, g), s)| {
            let e = gaussian(&mut rng);
            g * v + s * e
        })
        .collect())
}

/// Received signal and the attack parameters that produced it.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub received: Vec<f64>,
    pub params: ChannelParams,
}

/// Worst-case SAWGN against allocation `σ_W`, spending `max_attack`.
pub fn optimal_attack(
    y: &[f64],
    sigma_x: &[f64],
    phi: &[f64],
    sigma_w: &[f64],
    max_attack: f64,
    seed: u64,
) -> Result<AttackOutcome> {
    check_len("signal", sigma_x.len(), y.len())?;
    let lambda = solve_attack(sigma_x, phi, sigma_w, max_attack)?;
    let params = ChannelParams::from_allocation(sigma_x.to_vec(), phi.to_vec(), sigma_w.to_vec())?.with_attack(lambda);
    let received = sawgn(y, &params.gamma_a, &params.sigma_z, seed)?;
    Ok(AttackOutcome { received, params })
}

/// Standard JPEG luminance quantization table, row-major.
pub const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Quantization table for a quality factor: percent scale `5000/q` below
/// 50 and `200 - 2q` above, entries clamped to `1..=255`.
pub fn quant_table(quality: u8) -> Result<[f64; 64]> {
    AttackSpec::Jpeg { quality }.validate()?;
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut t = [0.0; 64];
    for (dst, &base) in t.iter_mut().zip(&LUMA_TABLE) {
        *dst = ((base as u32 * scale + 50) / 100).clamp(1, 255) as f64;
    }
    Ok(t)
}

fn dct_basis() -> [[f64; 8]; 8] {
    let mut c = [[0.0; 8]; 8];
    for (k, row) in c.iter_mut().enumerate() {
        let a = if k == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        for (x, v) in row.iter_mut().enumerate() {
            *v = a * (std::f64::consts::PI * (2 * x + 1) as f64 * k as f64 / 16.0).cos();
        }
    }
    c
}

/// Blockwise DCT quantization surrogate for JPEG compression.
///
/// Images whose sides are not multiples of 8 are mirror-padded and cropped
/// back afterwards.
pub fn jpeg_surrogate(image: &MediaPlane, quality: u8) -> Result<MediaPlane> {
    let table = quant_table(quality)?;
    let basis = dct_basis();
    let padded = image.pad_reflect(8);
    let (w, h) = (padded.width(), padded.height());
    let src = padded.pixels();
    let mut out = vec![0u8; w * h];
    let mut block = [[0.0f64; 8]; 8];
    let mut tmp = [[0.0f64; 8]; 8];
    for br in (0..h).step_by(8) {
        for bc in (0..w).step_by(8) {
            for r in 0..8 {
                for c in 0..8 {
                    block[r][c] = src[(br + r) * w + bc + c] as f64 - 128.0;
                }
            }
            // Forward: C · B · Cᵀ.
            for u in 0..8 {
                for c in 0..8 {
                    tmp[u][c] = (0..8).map(|r| basis[u][r] * block[r][c]).sum();
                }
            }
            for u in 0..8 {
                for v in 0..8 {
                    let coef: f64 = (0..8).map(|c| tmp[u][c] * basis[v][c]).sum();
                    let q = table[u * 8 + v];
                    block[u][v] = (coef / q).round() * q;
                }
            }
            // Inverse: Cᵀ · F · C.
            for r in 0..8 {
                for v in 0..8 {
                    tmp[r][v] = (0..8).map(|u| basis[u][r] * block[u][v]).sum();
                }
            }
            for r in 0..8 {
                for c in 0..8 {
                    let px: f64 = (0..8).map(|v| tmp[r][v] * basis[v][c]).sum::<f64>() + 128.0;
                    out[(br + r) * w + bc + c] = px.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    MediaPlane::new(w, h, out)?.crop(image.width(), image.height())
}
