//! Benchmark harness: synthetic hosts, per-mode embedding and extraction,
//! measured and theoretical `E_b/N_0`, and AWGN sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{awgn, optimal_attack, AttackSpec};
use crate::dp_codebook::{default_codeword_len, index_bit_count, nearest_any, CodebookSpec, CodewordMatch};
use crate::error::{check_len, invalid, Result};
use crate::media::{ber, d_xy};
use crate::optimizer::ChannelParams;
use crate::spread::{
    beta_perceptual, direct_gain, forward_received, gen_carriers, isi_energy, subspace_energies, CarrierMode,
};
use crate::watermarker::{embed, embed_informed, extract_isi_cancel, EmbedConfig, EmbedOutcome, Genie};
use crate::conv_trellis::TrellisCode;

/// Where inter-symbol interference is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CancelMode {
    None,
    /// Iterative cancellation at the receiver.
    Decoder,
    /// Interference folded into the side information at the embedder.
    Embedder,
    /// Both of the above.
    Both,
}

impl CancelMode {
    pub const ALL: [CancelMode; 4] = [CancelMode::None, CancelMode::Decoder, CancelMode::Embedder, CancelMode::Both];

    pub fn informed_embedding(self) -> bool {
        matches!(self, CancelMode::Embedder | CancelMode::Both)
    }

    pub fn cancelling_decoder(self) -> bool {
        matches!(self, CancelMode::Decoder | CancelMode::Both)
    }
}

impl std::str::FromStr for CancelMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CancelMode::None),
            "decoder" => Ok(CancelMode::Decoder),
            "embedder" => Ok(CancelMode::Embedder),
            "both" => Ok(CancelMode::Both),
            _ => invalid(format!("unknown cancellation mode '{s}' (none|decoder|embedder|both)")),
        }
    }
}

impl std::fmt::Display for CancelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CancelMode::None => "none",
            CancelMode::Decoder => "decoder",
            CancelMode::Embedder => "embedder",
            CancelMode::Both => "both",
        })
    }
}

/// SplitMix64 step, used to derive independent seeds from a base seed.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `k` uniformly random bits.
pub fn random_message(k: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| rng.random_range(0..2u8)).collect()
}

/// I.i.d. Gaussian host with a common standard deviation.
#[derive(Debug, Clone)]
pub struct SyntheticHost {
    pub x: Vec<f64>,
    pub sigma_x: Vec<f64>,
    pub phi: Vec<f64>,
}

pub fn synthetic_host(m: usize, sigma_x: f64, seed: u64) -> Result<SyntheticHost> {
    if m == 0 || !(sigma_x > 0.0) {
        return invalid("synthetic host needs m > 0 and σ_X > 0");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..m)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            sigma_x * e
        })
        .collect();
    Ok(SyntheticHost {
        x,
        sigma_x: vec![sigma_x; m],
        phi: vec![1.0; m],
    })
}

/// Parameters of the AWGN benchmark with a uniform watermark level.
#[derive(Debug, Clone, PartialEq)]
pub struct AwgnPreset {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub sigma_x: f64,
    pub sigma_w: f64,
    /// AWGN powers per host sample.
    pub levels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub carrier_seed: u64,
}

impl AwgnPreset {
    /// 512² host, 162 symbols, 64 message bits, `σ_W = 2.5` everywhere.
    pub fn fig4() -> Self {
        Self {
            m: 512 * 512,
            n: 162,
            k: 64,
            sigma_x: 10.0,
            sigma_w: 2.5,
            levels: (0..11).map(|j| 0.25 * 2f64.powi(j)).collect(),
            seeds: vec![1, 2, 3, 4],
            carrier_seed: 2004,
        }
    }

    /// Embedding config for the preset and carrier mode. Index bits are
    /// sized for the lowest attack level.
    pub fn config(&self, mode: CarrierMode) -> Result<EmbedConfig> {
        let m = self.m;
        let params = ChannelParams::from_allocation(vec![self.sigma_x; m], vec![1.0; m], vec![self.sigma_w; m])?;
        let beta = beta_perceptual(&params.phi, &params.sigma_x)?;
        let design_noise = self.levels.iter().cloned().fold(f64::INFINITY, f64::min);
        let design_noise = if design_noise.is_finite() { design_noise } else { 0.0 };
        let sigma_z = vec![design_noise.sqrt(); m];
        let e = subspace_energies(&beta, &params.gamma, &params.sigma_x, &sigma_z, &params.sigma_w, self.n)?;
        let i = index_bit_count(e.p, e.q, e.noise, self.n, self.k)?;
        let spec = CodebookSpec::new(self.k, i, self.n)?;
        let carriers = gen_carriers(self.carrier_seed, m, self.n, mode)?;
        EmbedConfig::new(spec, carriers, params, beta)
    }
}

impl Default for AwgnPreset {
    fn default() -> Self {
        Self::fig4()
    }
}

/// Codeword length for `k` message bits with the standard code.
pub fn default_n(k: usize) -> usize {
    default_codeword_len(k, &TrellisCode::standard())
}

/// Embed with or without interference feedback.
pub fn embed_for_mode(x: &[f64], message: &[u8], config: &EmbedConfig, mode: CancelMode) -> Result<EmbedOutcome> {
    if mode.informed_embedding() {
        embed_informed(x, message, config)
    } else {
        embed(x, message, config)
    }
}

/// Decoded codeword and the correlator output it was decoded from.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub matched: CodewordMatch,
    pub y_st: Vec<f64>,
    pub iterations: usize,
}

pub fn extract_for_mode(received: &[f64], genie: &Genie, spec: &CodebookSpec, config: &EmbedConfig, mode: CancelMode) -> Result<Extraction> {
    if mode.cancelling_decoder() {
        let d = extract_isi_cancel(received, genie, spec, &config.carriers)?;
        Ok(Extraction {
            matched: d.matched,
            y_st: d.y_st,
            iterations: d.iterations,
        })
    } else {
        let y_st = forward_received(received, &genie.beta, &config.carriers)?;
        Ok(Extraction {
            matched: nearest_any(&y_st, spec)?,
            y_st,
            iterations: 0,
        })
    }
}

/// Signal and residual energies behind a measured `E_b/N_0`.
///
/// The reference is what the embedder intended the correlator to see: its
/// final side information plus the directly coupled watermark. Whatever
/// else reaches the correlator (attack noise, uncancelled interference)
/// counts as noise.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EbN0Sample {
    pub signal: f64,
    pub residual: f64,
}

impl EbN0Sample {
    pub fn ratio(&self) -> f64 {
        self.signal / self.residual
    }

    pub fn db(&self) -> f64 {
        10.0 * self.ratio().log10()
    }

    pub fn pooled(samples: &[EbN0Sample]) -> EbN0Sample {
        samples.iter().fold(EbN0Sample::default(), |a, s| EbN0Sample {
            signal: a.signal + s.signal,
            residual: a.residual + s.residual,
        })
    }
}

pub fn measure_ebn0(config: &EmbedConfig, embedded: &EmbedOutcome, y_st: &[f64], gain_scale: f64) -> Result<EbN0Sample> {
    check_len("correlator output", config.spec.n(), y_st.len())?;
    let gain = direct_gain(&config.beta, &config.model_gain, &config.params.sigma_w, config.p, &config.carriers)?;
    let n = y_st.len() as f64;
    let mut signal = 0.0;
    let mut residual = 0.0;
    for j in 0..y_st.len() {
        let s = gain_scale * gain[j] * embedded.w_st[j];
        let r = y_st[j] - gain_scale * embedded.x_st[j] - s;
        signal += s * s;
        residual += r * r;
    }
    Ok(EbN0Sample {
        signal: signal / n,
        residual: residual / n,
    })
}

/// Theoretical `(P/(N+I), P/N)` for subspace noise energy `noise`.
pub fn theory_ebn0(config: &EmbedConfig, noise: f64) -> Result<(f64, f64)> {
    let i = isi_energy(&config.beta, &config.model_gain, &config.params.sigma_w, config.spec.n(), config.p)?;
    Ok((config.p / (noise + i), config.p / noise))
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mode: CancelMode,
    pub carriers: CarrierMode,
    pub attack: String,
    pub level: f64,
    pub d_xy: f64,
    pub d_xyp: f64,
    pub ebn0_db: f64,
    pub ebn0_isi_theory_db: f64,
    pub ebn0_orth_theory_db: f64,
    pub ber: f64,
    pub iterations: f64,
}

pub const SWEEP_CSV_VERSION: &str = "# sweep-csv v1";
pub const SWEEP_CSV_HEADER: [&str; 11] = [
    "mode",
    "carriers",
    "attack",
    "level",
    "d_xy",
    "d_xyp",
    "ebn0_db",
    "ebn0_isi_theory_db",
    "ebn0_orth_theory_db",
    "ber",
    "iterations",
];

impl SweepRow {
    pub fn fields(&self) -> [String; 11] {
        [
            self.mode.to_string(),
            self.carriers.to_string(),
            self.attack.clone(),
            format!("{}", self.level),
            format!("{:.6}", self.d_xy),
            format!("{:.6}", self.d_xyp),
            format!("{:.4}", self.ebn0_db),
            format!("{:.4}", self.ebn0_isi_theory_db),
            format!("{:.4}", self.ebn0_orth_theory_db),
            format!("{:.6}", self.ber),
            format!("{:.3}", self.iterations),
        ]
    }
}

#[derive(Default, Clone)]
struct Accum {
    ebn0: Vec<EbN0Sample>,
    d_xy: f64,
    d_xyp: f64,
    ber: f64,
    iterations: f64,
    noise: f64,
    count: usize,
}

/// Attack applied at each sweep level of a synthetic-host sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAttack {
    /// Level is the noise power per host sample.
    Awgn,
    /// Level is the weighted attack distortion budget.
    Optimal,
}

/// Run a synthetic-host sweep: for every seed draw a host and a message,
/// embed once per embedding flavour, then attack and decode at each level.
///
/// Rows come out ordered by level, then by mode.
pub fn run_sweep(
    preset: &AwgnPreset,
    config: &EmbedConfig,
    modes: &[CancelMode],
    attack: SweepAttack,
) -> Result<Vec<SweepRow>> {
    if preset.levels.is_empty() || modes.is_empty() || preset.seeds.is_empty() {
        return invalid("sweep needs at least one level, mode and seed");
    }
    let mut acc = vec![vec![Accum::default(); modes.len()]; preset.levels.len()];
    let beta_sq: f64 = config.beta.iter().map(|b| b * b).sum();
    for &seed in &preset.seeds {
        let host = synthetic_host(preset.m, preset.sigma_x, derive_seed(seed, 1))?;
        let message = random_message(config.spec.k(), derive_seed(seed, 2));
        let plain = if modes.iter().any(|m| !m.informed_embedding()) {
            Some(embed(&host.x, &message, config)?)
        } else {
            None
        };
        let informed = if modes.iter().any(|m| m.informed_embedding()) {
            Some(embed_informed(&host.x, &message, config)?)
        } else {
            None
        };
        for (li, &level) in preset.levels.iter().enumerate() {
            let noise_seed = derive_seed(seed, 1000 + li as u64);
            for (mi, &mode) in modes.iter().enumerate() {
                let embedded = if mode.informed_embedding() { informed.as_ref() } else { plain.as_ref() }.expect("embedded");
                let (received, genie, noise) = match attack {
                    SweepAttack::Awgn => {
                        AttackSpec::Awgn { noise_power: level, seed: noise_seed }.validate()?;
                        (awgn(&embedded.marked, level, noise_seed)?, config.genie(), level * beta_sq)
                    }
                    SweepAttack::Optimal => {
                        let out = optimal_attack(
                            &embedded.marked,
                            &config.params.sigma_x,
                            &config.params.phi,
                            &config.params.sigma_w,
                            level,
                            noise_seed,
                        )?;
                        let noise: f64 = config.beta.iter().zip(&out.params.sigma_z).map(|(b, z)| (b * z).powi(2)).sum();
                        let genie = Genie {
                            sigma_w: config.params.sigma_w.clone(),
                            gamma: out.params.gamma.clone(),
                            beta: config.beta.clone(),
                            p: config.p,
                        };
                        (out.received, genie, noise)
                    }
                };
                let ext = extract_for_mode(&received, &genie, &config.spec, config, mode)?;
                let a = &mut acc[li][mi];
                a.ebn0.push(measure_ebn0(config, embedded, &ext.y_st, 1.0)?);
                a.d_xy += d_xy(&host.x, &embedded.marked, &host.phi)?;
                a.d_xyp += d_xy(&host.x, &received, &host.phi)?;
                a.ber += ber(&ext.matched.message, &message)?;
                a.iterations += if mode.informed_embedding() { embedded.iterations } else { ext.iterations } as f64;
                a.noise += noise;
                a.count += 1;
            }
        }
    }
    let attack_name = match attack {
        SweepAttack::Awgn => "awgn",
        SweepAttack::Optimal => "optimal",
    };
    let mut rows = Vec::new();
    for (li, &level) in preset.levels.iter().enumerate() {
        for (mi, &mode) in modes.iter().enumerate() {
            let a = &acc[li][mi];
            let c = a.count as f64;
            let (isi, orth) = theory_ebn0(config, a.noise / c)?;
            rows.push(SweepRow {
                mode,
                carriers: config.carriers.mode(),
                attack: attack_name.to_string(),
                level,
                d_xy: a.d_xy / c,
                d_xyp: a.d_xyp / c,
                ebn0_db: EbN0Sample::pooled(&a.ebn0).db(),
                ebn0_isi_theory_db: to_db(isi),
                ebn0_orth_theory_db: to_db(orth),
                ber: a.ber / c,
                iterations: a.iterations / c,
            });
        }
    }
    Ok(rows)
}

/// Moving average over full windows; the output has `len - width + 1`
/// entries.
pub fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    if width == 0 || values.len() < width {
        return Vec::new();
    }
    values.windows(width).map(|w| w.iter().sum::<f64>() / width as f64).collect()
}
