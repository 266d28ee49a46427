//! Feed-forward convolutional code with zero-tail termination, puncturing,
//! and a soft-decision Viterbi decoder that honours per-position bit
//! constraints.
//!
//! Bits are `u8` values in `{0, 1}`. Soft observations follow the BPSK
//! convention used throughout the crate: a positive value favours bit 1,
//! a negative value favours bit 0 and `0.0` is neutral (punctured).

use std::ops::Deref;

use crate::error::{check_len, invalid, Error, Result};

/// Largest supported constraint length; decisions are packed one bit per
/// state into a `u64`.
pub const MAX_CONSTRAINT_LENGTH: usize = 7;

/// A rate `1/rate_inverse` feed-forward convolutional code, zero-tail
/// terminated.
///
/// Generator polynomials are given in the usual octal reading: the most
/// significant of the `constraint_length` bits taps the current input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrellisCode {
    constraint_length: usize,
    generators: Vec<u32>,
}

impl TrellisCode {
    pub fn new(constraint_length: usize, generators: Vec<u32>) -> Result<Self> {
        if !(2..=MAX_CONSTRAINT_LENGTH).contains(&constraint_length) {
            return invalid(format!(
                "constraint length {constraint_length} outside 2..={MAX_CONSTRAINT_LENGTH}"
            ));
        }
        if generators.len() < 2 {
            return invalid("at least two generators are required (rate 1/2 or lower)");
        }
        let limit = 1u32 << constraint_length;
        for (idx, &g) in generators.iter().enumerate() {
            if g == 0 || g >= limit {
                return invalid(format!("generator {g:o} does not fit constraint length"));
            }
            if generators[..idx].contains(&g) {
                return invalid(format!("generator {g:o} repeated"));
            }
        }
        Ok(Self {
            constraint_length,
            generators,
        })
    }

    /// The K=7 rate-1/2 code with generators 171/133 (octal).
    pub fn standard() -> Self {
        Self::new(7, vec![0o171, 0o133]).expect("standard code is valid")
    }

    pub fn constraint_length(&self) -> usize {
        self.constraint_length
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn rate_inverse(&self) -> usize {
        self.generators.len()
    }

    /// Tail bits appended by zero-tail termination.
    pub fn tail_len(&self) -> usize {
        self.constraint_length - 1
    }

    /// Encoded length for `input_len` information bits.
    pub fn encoded_len(&self, input_len: usize) -> usize {
        self.rate_inverse() * (input_len + self.tail_len())
    }

    fn num_states(&self) -> usize {
        1 << self.tail_len()
    }

    /// Output bits for a transition out of `state` on `input`.
    fn branch_bits(&self, state: usize, input: u8) -> impl Iterator<Item = u8> + '_ {
        let reg = ((input as u32) << self.tail_len()) | state as u32;
        self.generators
            .iter()
            .map(move |g| ((reg & g).count_ones() & 1) as u8)
    }

    fn next_state(&self, state: usize, input: u8) -> usize {
        ((input as usize) << (self.tail_len() - 1)) | (state >> 1)
    }
}

/// Zero-tail encode `bits`.
pub fn encode(bits: &[u8], code: &TrellisCode) -> Vec<u8> {
    let mut out = Vec::with_capacity(code.encoded_len(bits.len()));
    let mut state = 0usize;
    let tail = std::iter::repeat_n(0u8, code.tail_len());
    for b in bits.iter().copied().chain(tail) {
        debug_assert!(b <= 1);
        out.extend(code.branch_bits(state, b));
        state = code.next_state(state, b);
    }
    out
}

/// Map bits to BPSK symbols: 1 → +1, 0 → −1.
pub fn bpsk(bits: &[u8]) -> Vec<f64> {
    bits.iter()
        .map(|&b| if b == 1 { 1.0 } else { -1.0 })
        .collect()
}

/// Soft observation vector; positive favours 1, negative favours 0, zero is
/// neutral.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftWord(Vec<f64>);

impl SoftWord {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("soft value at {pos} is not finite"));
        }
        Ok(Self(values))
    }

    pub fn neutral(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SoftWord {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A-priori knowledge about one decoder input bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitConstraint {
    Free,
    Zero,
    One,
}

impl BitConstraint {
    fn allows(self, bit: u8) -> bool {
        match self {
            BitConstraint::Free => true,
            BitConstraint::Zero => bit == 0,
            BitConstraint::One => bit == 1,
        }
    }

    pub fn forced(bit: u8) -> Self {
        if bit == 0 {
            BitConstraint::Zero
        } else {
            BitConstraint::One
        }
    }
}

/// Per-input-position constraints for [`viterbi_soft`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitConstraintMask(Vec<BitConstraint>);

impl BitConstraintMask {
    pub fn free(len: usize) -> Self {
        Self(vec![BitConstraint::Free; len])
    }

    /// Every position forced to the given bit.
    pub fn forcing(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| BitConstraint::forced(b)).collect())
    }

    pub fn from_constraints(constraints: Vec<BitConstraint>) -> Self {
        Self(constraints)
    }

    pub fn set(&mut self, pos: usize, c: BitConstraint) {
        self.0[pos] = c;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn constraints(&self) -> &[BitConstraint] {
        &self.0
    }

    pub fn forced_count(&self) -> usize {
        self.0.iter().filter(|c| **c != BitConstraint::Free).count()
    }
}

/// Result of a Viterbi search.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Information bits (tail excluded).
    pub bits: Vec<u8>,
    /// Correlation of the observation with the BPSK codeword of `bits`.
    pub metric: f64,
}

/// Maximum-correlation decoding restricted to paths consistent with `mask`.
///
/// Forbidden branches are removed from the trellis rather than penalised, so
/// forced positions always come out with their forced value. With an
/// all-free mask this is the ordinary soft Viterbi decoder. Ties are broken
/// towards the predecessor with the lower state index.
pub fn viterbi_soft(obs: &[f64], code: &TrellisCode, mask: &BitConstraintMask) -> Result<Decoded> {
    let input_len = mask.len();
    check_len("viterbi observation", code.encoded_len(input_len), obs.len())?;
    if let Some(pos) = obs.iter().position(|v| !v.is_finite()) {
        return invalid(format!("observation at {pos} is not finite"));
    }

    let ns = code.num_states();
    let ri = code.rate_inverse();
    let high = code.tail_len() - 1;
    let low_mask = (1usize << high) - 1;

    // labels[state * 2 + input][out] in ±1
    let labels: Vec<Vec<f64>> = (0..ns)
        .flat_map(|s| [0u8, 1u8].map(|b| bpsk(&code.branch_bits(s, b).collect::<Vec<_>>())))
        .collect();

    let steps = input_len + code.tail_len();
    let mut metric = vec![f64::NEG_INFINITY; ns];
    metric[0] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; ns];
    let mut decisions: Vec<u64> = Vec::with_capacity(steps);

    for t in 0..steps {
        let constraint = if t < input_len {
            mask.0[t]
        } else {
            BitConstraint::Zero
        };
        let chunk = &obs[t * ri..(t + 1) * ri];
        let mut dec = 0u64;
        for (target, slot) in next.iter_mut().enumerate() {
            let input = (target >> high) as u8;
            if !constraint.allows(input) {
                *slot = f64::NEG_INFINITY;
                continue;
            }
            let p0 = (target & low_mask) << 1;
            let p1 = p0 | 1;
            let bm = |p: usize| -> f64 {
                labels[p * 2 + input as usize]
                    .iter()
                    .zip(chunk)
                    .map(|(l, o)| l * o)
                    .sum()
            };
            let m0 = metric[p0] + bm(p0);
            let m1 = metric[p1] + bm(p1);
            if m1 > m0 {
                *slot = m1;
                dec |= 1 << target;
            } else {
                *slot = m0;
            }
        }
        decisions.push(dec);
        std::mem::swap(&mut metric, &mut next);
    }

    let final_metric = metric[0];
    if final_metric == f64::NEG_INFINITY {
        return Err(Error::Infeasible(
            "no trellis path satisfies the bit constraints".into(),
        ));
    }

    let mut bits = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        bits[t] = (state >> high) as u8;
        let low = ((decisions[t] >> state) & 1) as usize;
        state = ((state & low_mask) << 1) | low;
    }
    bits.truncate(input_len);
    Ok(Decoded {
        bits,
        metric: final_metric,
    })
}

/// Sorted set of positions removed by puncturing, together with the length
/// of the unpunctured word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PunctureMask {
    full_len: usize,
    positions: Vec<usize>,
}

impl PunctureMask {
    pub fn new(full_len: usize, mut positions: Vec<usize>) -> Result<Self> {
        positions.sort_unstable();
        positions.dedup();
        if let Some(&last) = positions.last() {
            if last >= full_len {
                return invalid(format!(
                    "puncture position {last} out of range for length {full_len}"
                ));
            }
        }
        Ok(Self {
            full_len,
            positions,
        })
    }

    /// `count` positions spread evenly over `full_len`.
    pub fn evenly_spaced(full_len: usize, count: usize) -> Result<Self> {
        if count > full_len {
            return invalid(format!("cannot puncture {count} of {full_len} positions"));
        }
        let positions = (0..count)
            .map(|j| ((2 * j + 1) * full_len) / (2 * count))
            .collect();
        Self::new(full_len, positions)
    }

    pub fn empty(full_len: usize) -> Self {
        Self {
            full_len,
            positions: Vec::new(),
        }
    }

    pub fn full_len(&self) -> usize {
        self.full_len
    }

    pub fn punctured_len(&self) -> usize {
        self.full_len - self.positions.len()
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }
}

/// Remove the masked positions from a full-length word.
pub fn puncture<T: Copy>(word: &[T], mask: &PunctureMask) -> Result<Vec<T>> {
    check_len("puncture input", mask.full_len, word.len())?;
    let mut out = Vec::with_capacity(mask.punctured_len());
    let mut holes = mask.positions.iter().peekable();
    for (idx, &v) in word.iter().enumerate() {
        if holes.peek() == Some(&&idx) {
            holes.next();
        } else {
            out.push(v);
        }
    }
    Ok(out)
}

/// Insert neutral zeros at the masked positions.
pub fn expand(word: &[f64], mask: &PunctureMask) -> Result<SoftWord> {
    check_len("expand input", mask.punctured_len(), word.len())?;
    let mut out = Vec::with_capacity(mask.full_len);
    let mut src = word.iter();
    let mut holes = mask.positions.iter().peekable();
    for idx in 0..mask.full_len {
        if holes.peek() == Some(&&idx) {
            holes.next();
            out.push(0.0);
        } else {
            out.push(*src.next().expect("length checked"));
        }
    }
    SoftWord::new(out)
}
