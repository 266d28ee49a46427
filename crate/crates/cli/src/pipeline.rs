//! Host loading, configuration, signal I/O and message encoding shared by
//! the sub-commands.

use std::path::Path;

use sidemark::bench::{default_n, synthetic_host};
use sidemark::dp_codebook::{index_bit_count, CodebookSpec};
use sidemark::media::{dwt3, read_pgm, write_pgm, HostModel, MediaPlane, DEFAULT_WINDOW};
use sidemark::optimizer::{solve_game, DistortionBudget};
use sidemark::spread::{beta_perceptual, gen_carriers, subspace_energies, CarrierMode};
use sidemark::watermarker::EmbedConfig;

use crate::failure::{CliResult, Failure};
use crate::sidecar::{HostSource, SignalFormat};

/// Host samples in the embedding domain with their statistics.
pub struct Host {
    pub x: Vec<f64>,
    pub sigma_x: Vec<f64>,
    pub phi: Vec<f64>,
    /// DWT model for image hosts, used to go back to pixels.
    pub model: Option<HostModel>,
}

pub fn load_host(src: &HostSource) -> CliResult<Host> {
    match src {
        HostSource::Synthetic { m, sigma_x, seed } => {
            let h = synthetic_host(*m, *sigma_x, *seed)?;
            Ok(Host { x: h.x, sigma_x: h.sigma_x, phi: h.phi, model: None })
        }
        HostSource::Image { path, width, height } => {
            let plane = read_pgm(path)?;
            if (plane.width(), plane.height()) != (*width, *height) {
                return Err(Failure::config(format!(
                    "host image {} is {}x{}, expected {width}x{height}",
                    path.display(),
                    plane.width(),
                    plane.height()
                )));
            }
            host_from_plane(&plane)
        }
    }
}

pub fn host_from_plane(plane: &MediaPlane) -> CliResult<Host> {
    let model = HostModel::from_plane(plane, DEFAULT_WINDOW)?;
    Ok(Host {
        x: model.coeffs.clone(),
        sigma_x: model.sigma_x.clone(),
        phi: model.phi.clone(),
        model: Some(model),
    })
}

/// Codebook sizes and carrier choice for a run.
#[derive(Debug, Clone, Copy)]
pub struct Design {
    pub k: usize,
    pub dxy: f64,
    pub dxyp: f64,
    pub carrier_seed: u64,
    pub carriers: CarrierMode,
}

/// Solve the game for the host, size the index bits for the solved attack
/// and build the embedding configuration.
pub fn build_config(host: &Host, design: &Design) -> CliResult<EmbedConfig> {
    if design.k == 0 {
        return Err(Failure::config("k must be positive"));
    }
    let budget = DistortionBudget::new(design.dxy, design.dxyp)?;
    let params = solve_game(&host.sigma_x, &host.phi, budget)?;
    let beta = beta_perceptual(&params.phi, &params.sigma_x)?;
    let n = default_n(design.k);
    let e = subspace_energies(&beta, &params.gamma, &params.sigma_x, &params.sigma_z, &params.sigma_w, n)?;
    let i = index_bit_count(e.p, e.q, e.noise, n, design.k)?;
    let spec = CodebookSpec::new(design.k, i, n)?;
    let carriers = gen_carriers(design.carrier_seed, host.x.len(), n, design.carriers)?;
    Ok(EmbedConfig::new(spec, carriers, params, beta)?)
}

pub fn parse_rate(rate: &str) -> CliResult<()> {
    match rate.trim() {
        "1/2" | "0.5" => Ok(()),
        other => Err(Failure::config(format!("unsupported rate '{other}': the code is rate 1/2"))),
    }
}

/// Read a marked or attacked signal in the embedding domain.
pub fn read_signal(path: &Path, src: &HostSource) -> CliResult<(Vec<f64>, Option<MediaPlane>)> {
    match src.format() {
        SignalFormat::RawF64 => {
            let bytes = std::fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            if bytes.len() != 8 * src.len() {
                return Err(Failure::config(format!(
                    "{} holds {} bytes, expected {} samples",
                    path.display(),
                    bytes.len(),
                    src.len()
                )));
            }
            let v = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            Ok((v, None))
        }
        SignalFormat::Pgm => {
            let plane = read_pgm(path)?;
            if plane.width() * plane.height() != src.len() {
                return Err(Failure::config(format!(
                    "{} is {}x{}, sidecar expects {} pixels",
                    path.display(),
                    plane.width(),
                    plane.height(),
                    src.len()
                )));
            }
            Ok((dwt3(&plane.to_f64(), plane.width(), plane.height())?, Some(plane)))
        }
    }
}

pub fn write_raw(path: &Path, v: &[f64]) -> CliResult<()> {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// Write embedding-domain samples; image hosts go back to 8-bit pixels.
/// Returns what a reader of the file will see.
pub fn write_signal(path: &Path, v: &[f64], host: &Host) -> CliResult<Vec<f64>> {
    match &host.model {
        None => {
            write_raw(path, v)?;
            Ok(v.to_vec())
        }
        Some(model) => {
            let plane = model.to_plane(v)?;
            write_pgm(&plane, path)?;
            Ok(dwt3(&plane.to_f64(), plane.width(), plane.height())?)
        }
    }
}

/// Bits to hex, first bit in the most significant position; a trailing
/// partial nibble is zero-filled.
pub fn bits_to_hex(bits: &[u8]) -> String {
    bits.chunks(4)
        .map(|c| {
            let v = c.iter().enumerate().fold(0u32, |a, (j, &b)| a | ((b as u32) << (3 - j)));
            char::from_digit(v, 16).expect("nibble")
        })
        .collect()
}

pub fn hex_to_bits(hex: &str, k: usize) -> CliResult<Vec<u8>> {
    let hex = hex.trim().trim_start_matches("0x");
    if hex.len() != k.div_ceil(4) {
        return Err(Failure::config(format!(
            "message needs {} hex digits for k = {k}, got {}",
            k.div_ceil(4),
            hex.len()
        )));
    }
    let mut bits = Vec::with_capacity(4 * hex.len());
    for c in hex.chars() {
        let v = c
            .to_digit(16)
            .ok_or_else(|| Failure::config(format!("'{c}' is not a hex digit")))?;
        bits.extend((0..4).map(|j| ((v >> (3 - j)) & 1) as u8));
    }
    if bits[k..].iter().any(|&b| b != 0) {
        return Err(Failure::config("bits beyond k must be zero"));
    }
    bits.truncate(k);
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip() {
        let bits = vec![1, 0, 1, 1, 0, 0, 0, 1, 1];
        let hex = bits_to_hex(&bits);
        assert_eq!(hex, "b18");
        assert_eq!(hex_to_bits(&hex, 9).unwrap(), bits);
        assert!(hex_to_bits("b19", 9).is_err());
        assert!(hex_to_bits("b1", 9).is_err());
        assert!(hex_to_bits("zz", 8).is_err());
    }
}
