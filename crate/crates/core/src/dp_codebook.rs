//! Structured dirty-paper codebook built on the punctured trellis code.
//!
//! A codeword carries `k` message bits interleaved with `i` index bits and,
//! when the frame is short, forced-zero padding at the tail. Every message
//! owns a sub-codebook of `2^i` codewords. Embedding searches the
//! sub-codebook for the codeword closest to the host (message bits forced in
//! the trellis, index bits free); extraction searches the whole codebook.
//! Codewords are BPSK so every one has norm `sqrt(n)`, which makes the
//! decision invariant to a positive rescaling of the received vector.

use crate::conv_trellis::{
    bpsk, encode, expand, puncture, viterbi_soft, BitConstraint, BitConstraintMask, PunctureMask,
    TrellisCode,
};
use crate::error::{check_len, invalid, Result};

/// Number of index bits for subspace energies `(P, Q, N)`, rounded and
/// clamped to `[0, n - k]` so the overall rate stays fixed.
pub fn index_bit_count(p: f64, q: f64, noise: f64, n: usize, k: usize) -> Result<usize> {
    if !(p > 0.0) || !(noise > 0.0) {
        return invalid(format!("index bits need P > 0 and N > 0 (P={p}, N={noise})"));
    }
    if q < 0.0 {
        return invalid(format!("host energy Q must be non-negative, got {q}"));
    }
    let bits = 0.5 * n as f64 * (1.0 + p * q / ((p + noise) * (p + noise))).log2();
    Ok((bits.round() as usize).min(n.saturating_sub(k)))
}

/// Half-angle of the robustness cone, from `tan^-2(θ) = 2^(2(k+i)/n) - 1`.
pub fn cone_angle(k: usize, i: usize, n: usize) -> Result<f64> {
    if n == 0 || k + i == 0 {
        return invalid("cone angle needs n > 0 and k + i > 0");
    }
    let inv_tan2 = (2.0 * (k + i) as f64 / n as f64).exp2() - 1.0;
    Ok((1.0 / inv_tan2.sqrt()).atan())
}

/// Default codeword length for a `k`-bit message: the message is padded to
/// a multiple of the code memory and multiplied by the inverse rate
/// (`k = 64` at rate 1/2 gives 132).
pub fn default_codeword_len(k: usize, code: &TrellisCode) -> usize {
    let memory = code.tail_len();
    k.div_ceil(memory) * memory * code.rate_inverse()
}

/// Layout of the structured codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSpec {
    code: TrellisCode,
    k: usize,
    i: usize,
    n: usize,
    padding: usize,
    interleave: Vec<usize>,
    puncture: PunctureMask,
    theta: f64,
}

impl CodebookSpec {
    /// Build the codebook for `k` message bits, `i` index bits and final
    /// codeword length `n` with the standard code.
    pub fn new(k: usize, i: usize, n: usize) -> Result<Self> {
        Self::with_code(TrellisCode::standard(), k, i, n)
    }

    pub fn with_code(code: TrellisCode, k: usize, i: usize, n: usize) -> Result<Self> {
        if k == 0 {
            return invalid("message length k must be positive");
        }
        if k + i > n {
            return invalid(format!("k + i = {} exceeds codeword length n = {n}", k + i));
        }
        let ri = code.rate_inverse();
        let padding = n.div_ceil(ri).saturating_sub(k + i);
        let input_len = k + i + padding;
        let full = code.encoded_len(input_len);
        let puncture = PunctureMask::evenly_spaced(full, full - n)?;
        let total = k + i;
        let interleave = (0..k).map(|j| j * total / k).collect();
        let theta = cone_angle(k, i, n)?;
        Ok(Self {
            code,
            k,
            i,
            n,
            padding,
            interleave,
            puncture,
            theta,
        })
    }

    pub fn code(&self) -> &TrellisCode {
        &self.code
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn index_bits(&self) -> usize {
        self.i
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn padding(&self) -> usize {
        self.padding
    }
    /// Trellis input length: message, index and padding bits.
    pub fn input_len(&self) -> usize {
        self.k + self.i + self.padding
    }
    /// Positions of the message bits within the trellis input.
    pub fn interleave(&self) -> &[usize] {
        &self.interleave
    }
    pub fn puncture_mask(&self) -> &PunctureMask {
        &self.puncture
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn tan2_theta(&self) -> f64 {
        self.theta.tan().powi(2)
    }

    fn base_mask(&self) -> BitConstraintMask {
        let mut mask = BitConstraintMask::free(self.input_len());
        for p in self.k + self.i..self.input_len() {
            mask.set(p, BitConstraint::Zero);
        }
        mask
    }

    /// Mask used by the receiver: message and index bits free, padding
    /// forced to zero.
    pub fn decoder_mask(&self) -> BitConstraintMask {
        self.base_mask()
    }

    /// Extract the message bits from a trellis input word.
    pub fn message_of(&self, bits: &[u8]) -> Vec<u8> {
        self.interleave.iter().map(|&p| bits[p]).collect()
    }

    /// Punctured BPSK codeword (length `n`) for a trellis input word.
    pub fn codeword(&self, bits: &[u8]) -> Vec<f64> {
        let coded = encode(bits, &self.code);
        bpsk(&puncture(&coded, &self.puncture).expect("encoded length matches mask"))
    }
}

/// Constraint mask for the sub-codebook of `message`.
pub fn build_pattern(message: &[u8], spec: &CodebookSpec) -> Result<BitConstraintMask> {
    check_len("message", spec.k, message.len())?;
    let mut mask = spec.base_mask();
    for (&pos, &bit) in spec.interleave.iter().zip(message) {
        mask.set(pos, BitConstraint::forced(bit));
    }
    Ok(mask)
}

/// A codeword selected by one of the searches.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordMatch {
    /// Trellis input word (message, index and padding bits).
    pub bits: Vec<u8>,
    /// Message bits read from the interleave positions.
    pub message: Vec<u8>,
    /// BPSK codeword, length `n`, norm `sqrt(n)`.
    pub codeword: Vec<f64>,
    /// Correlation between the search input and `codeword`.
    pub metric: f64,
}

fn search(signal: &[f64], spec: &CodebookSpec, mask: &BitConstraintMask) -> Result<CodewordMatch> {
    check_len("subspace signal", spec.n, signal.len())?;
    let obs = expand(signal, &spec.puncture)?;
    let dec = viterbi_soft(&obs, &spec.code, mask)?;
    Ok(CodewordMatch {
        message: spec.message_of(&dec.bits),
        codeword: spec.codeword(&dec.bits),
        bits: dec.bits,
        metric: dec.metric,
    })
}

/// Closest codeword to `x_st` among those carrying `message`.
pub fn nearest_in_subcodebook(
    x_st: &[f64],
    message: &[u8],
    spec: &CodebookSpec,
) -> Result<CodewordMatch> {
    let mask = build_pattern(message, spec)?;
    search(x_st, spec, &mask)
}

/// Closest codeword to `y_st` in the whole codebook.
pub fn nearest_any(y_st: &[f64], spec: &CodebookSpec) -> Result<CodewordMatch> {
    search(y_st, spec, &spec.decoder_mask())
}
