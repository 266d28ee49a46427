//! Plain-text `key = value` metadata written next to a marked signal.
//!
//! The sidecar holds everything the receiver needs to rebuild the embedding
//! configuration: seeds, codebook sizes, distortion budgets, where the host
//! statistics come from and, unless blind, the solved game parameters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sidemark::bench::CancelMode;
use sidemark::spread::CarrierMode;

use crate::failure::{CliResult, Failure};

pub const SIDECAR_VERSION: &str = "# sidemark sidecar v1";

/// On-disk encoding of the marked signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    Pgm,
    /// Little-endian `f64` samples, no header.
    RawF64,
}

/// Where the host statistics come from.
#[derive(Debug, Clone, PartialEq)]
pub enum HostSource {
    Synthetic { m: usize, sigma_x: f64, seed: u64 },
    Image { path: PathBuf, width: usize, height: usize },
}

impl HostSource {
    pub fn len(&self) -> usize {
        match self {
            HostSource::Synthetic { m, .. } => *m,
            HostSource::Image { width, height, .. } => width * height,
        }
    }

    pub fn format(&self) -> SignalFormat {
        match self {
            HostSource::Synthetic { .. } => SignalFormat::RawF64,
            HostSource::Image { .. } => SignalFormat::Pgm,
        }
    }
}

/// Attack applied since embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackRecord {
    None,
    Awgn { level: f64, seed: u64 },
    Optimal { level: f64, seed: u64 },
    Jpeg { quality: u8 },
}

/// Solved game parameters, present unless the embedding was blind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenieRecord {
    pub lambda: f64,
    pub chi: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub host: HostSource,
    pub seed: u64,
    pub k: usize,
    pub i: usize,
    pub n: usize,
    pub padding: usize,
    pub carrier_seed: u64,
    pub carriers: CarrierMode,
    pub cancel: CancelMode,
    pub dxy: f64,
    pub dxyp: f64,
    pub genie: Option<GenieRecord>,
    /// Embedded message as hex, the ground truth for BER.
    pub message: String,
    pub attack: AttackRecord,
}

/// `<signal path>.sidecar`.
pub fn default_path(signal: &Path) -> PathBuf {
    let mut s = signal.as_os_str().to_owned();
    s.push(".sidecar");
    PathBuf::from(s)
}

impl Sidecar {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.host {
            HostSource::Synthetic { m, sigma_x, seed } => {
                kv("format", &"raw-f64");
                kv("host", &"synthetic");
                kv("m", m);
                kv("sigma_x", sigma_x);
                kv("host_seed", seed);
            }
            HostSource::Image { path, width, height } => {
                kv("format", &"pgm");
                kv("host", &"image");
                kv("host_path", &path.display());
                kv("width", width);
                kv("height", height);
                kv("m", &(width * height));
            }
        }
        kv("seed", &self.seed);
        kv("k", &self.k);
        kv("i", &self.i);
        kv("rate", &"1/2");
        kv("n", &self.n);
        kv("padding", &self.padding);
        kv("carrier_seed", &self.carrier_seed);
        kv("carriers", &self.carriers);
        kv("cancel", &self.cancel);
        kv("dxy", &self.dxy);
        kv("dxyp", &self.dxyp);
        kv("beta", &"perceptual");
        match &self.genie {
            Some(g) => {
                kv("genie", &true);
                kv("lambda", &g.lambda);
                kv("chi", &g.chi);
                kv("p", &g.p);
            }
            None => kv("genie", &false),
        }
        kv("message", &self.message);
        match self.attack {
            AttackRecord::None => kv("attack", &"none"),
            AttackRecord::Awgn { level, seed } => {
                kv("attack", &"awgn");
                kv("attack_level", &level);
                kv("attack_seed", &seed);
            }
            AttackRecord::Optimal { level, seed } => {
                kv("attack", &"optimal");
                kv("attack_level", &level);
                kv("attack_seed", &seed);
            }
            AttackRecord::Jpeg { quality } => {
                kv("attack", &"jpeg");
                kv("attack_quality", &quality);
            }
        }
        format!("{SIDECAR_VERSION}\n{out}")
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(SIDECAR_VERSION) {
            return Err(Failure::config(format!("sidecar does not start with '{SIDECAR_VERSION}'")));
        }
        let mut map = BTreeMap::new();
        for (no, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::config(format!("sidecar line {}: expected 'key = value'", no + 2)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let f = Fields(map);
        let host = match f.str("host")? {
            "synthetic" => HostSource::Synthetic {
                m: f.num("m")?,
                sigma_x: f.num("sigma_x")?,
                seed: f.num("host_seed")?,
            },
            "image" => {
                let host = HostSource::Image {
                    path: PathBuf::from(f.str("host_path")?),
                    width: f.num("width")?,
                    height: f.num("height")?,
                };
                if f.num::<usize>("m")? != host.len() {
                    return Err(Failure::config("sidecar m disagrees with width × height"));
                }
                host
            }
            other => return Err(Failure::config(format!("unknown host kind '{other}'"))),
        };
        let expected_format = match host.format() {
            SignalFormat::Pgm => "pgm",
            SignalFormat::RawF64 => "raw-f64",
        };
        if f.str("format")? != expected_format {
            return Err(Failure::config("sidecar format does not match its host kind"));
        }
        if f.str("rate")? != "1/2" {
            return Err(Failure::config("only rate 1/2 is supported"));
        }
        let genie = if f.num::<bool>("genie")? {
            Some(GenieRecord {
                lambda: f.num("lambda")?,
                chi: f.num("chi")?,
                p: f.num("p")?,
            })
        } else {
            None
        };
        let attack = match f.str("attack")? {
            "none" => AttackRecord::None,
            "awgn" => AttackRecord::Awgn {
                level: f.num("attack_level")?,
                seed: f.num("attack_seed")?,
            },
            "optimal" => AttackRecord::Optimal {
                level: f.num("attack_level")?,
                seed: f.num("attack_seed")?,
            },
            "jpeg" => AttackRecord::Jpeg {
                quality: f.num("attack_quality")?,
            },
            other => return Err(Failure::config(format!("unknown attack '{other}'"))),
        };
        Ok(Sidecar {
            host,
            seed: f.num("seed")?,
            k: f.num("k")?,
            i: f.num("i")?,
            n: f.num("n")?,
            padding: f.num("padding")?,
            carrier_seed: f.num("carrier_seed")?,
            carriers: f.str("carriers")?.parse().map_err(Failure::Config)?,
            cancel: f.str("cancel")?.parse()?,
            dxy: f.num("dxy")?,
            dxyp: f.num("dxyp")?,
            genie,
            message: f.str("message")?.to_string(),
            attack,
        })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("cannot read sidecar {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.render())
            .map_err(|e| Failure::Io(format!("cannot write sidecar {}: {e}", path.display())))
    }
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn str(&self, key: &str) -> CliResult<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Failure::config(format!("sidecar is missing '{key}'")))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> CliResult<T> {
        let v = self.str(key)?;
        v.parse()
            .map_err(|_| Failure::config(format!("sidecar field '{key}' has bad value '{v}'")))
    }
}
