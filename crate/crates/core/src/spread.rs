//! Spread transform between the `m`-dimensional host domain and the
//! `n`-dimensional embedding subspace.
//!
//! Carriers are stored row-major as `i8` signs with a common amplitude.
//! Dense carriers are i.i.d. ±1 with amplitude 1. Orthogonal carriers give
//! each host coefficient to exactly one symbol; their amplitude is `sqrt(n)`
//! so that every row has the same energy `n` as a dense row, which keeps the
//! per-coefficient watermark variance at `σ_W²` and the subspace gain of
//! each symbol close to one in both modes.
//!
//! Random signs come from ChaCha8 seeded with the published 64-bit seed.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarrierMode {
    Dense,
    Orthogonal,
}

impl std::str::FromStr for CarrierMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dense" => Ok(CarrierMode::Dense),
            "orthogonal" => Ok(CarrierMode::Orthogonal),
            other => Err(format!("unknown carrier mode {other:?}")),
        }
    }
}

impl std::fmt::Display for CarrierMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CarrierMode::Dense => "dense",
            CarrierMode::Orthogonal => "orthogonal",
        })
    }
}

/// The `m × n` spreading matrix `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierMatrix {
    m: usize,
    n: usize,
    seed: u64,
    mode: CarrierMode,
    amplitude: f64,
    entries: Vec<i8>,
}

/// Generate carriers; deterministic in `seed`.
pub fn gen_carriers(seed: u64, m: usize, n: usize, mode: CarrierMode) -> Result<CarrierMatrix> {
    if n == 0 || m < n {
        return invalid(format!("carriers need m >= n >= 1 (m={m}, n={n})"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (entries, amplitude) = match mode {
        CarrierMode::Dense => {
            let mut entries = vec![0i8; m * n];
            for chunk in entries.chunks_mut(64) {
                let bits = rng.next_u64();
                for (b, e) in chunk.iter_mut().enumerate() {
                    *e = if (bits >> b) & 1 == 1 { 1 } else { -1 };
                }
            }
            (entries, 1.0)
        }
        CarrierMode::Orthogonal => {
            let mut rows: Vec<usize> = (0..m).collect();
            rows.shuffle(&mut rng);
            let mut entries = vec![0i8; m * n];
            for (t, &row) in rows.iter().enumerate() {
                let sign = if rng.next_u32() & 1 == 1 { 1 } else { -1 };
                entries[row * n + t % n] = sign;
            }
            (entries, (n as f64).sqrt())
        }
    };
    Ok(CarrierMatrix {
        m,
        n,
        seed,
        mode,
        amplitude,
        entries,
    })
}

impl CarrierMatrix {
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn mode(&self) -> CarrierMode {
        self.mode
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Sign pattern of row `i`.
    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.amplitude * self.entries[i * self.n + j] as f64
    }

    /// `out_j = Σ_i a_i G_ij`, summed in row order.
    pub fn correlate(&self, a: &[f64]) -> Vec<f64> {
        debug_assert_eq!(a.len(), self.m);
        let mut out = vec![0.0; self.n];
        for (row, &ai) in self.entries.chunks_exact(self.n).zip(a) {
            if ai == 0.0 {
                continue;
            }
            for (o, &g) in out.iter_mut().zip(row) {
                *o += ai * g as f64;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.amplitude);
        out
    }

    /// `Σ_j w_j G_ij` for row `i`.
    pub fn spread_row(&self, i: usize, w: &[f64]) -> f64 {
        self.amplitude
            * self
                .row(i)
                .iter()
                .zip(w)
                .map(|(&g, &v)| g as f64 * v)
                .sum::<f64>()
    }

    /// `s_i = Σ_j w_j G_ij` for every row.
    pub fn spread(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.n);
        (0..self.m).map(|i| self.spread_row(i, w)).collect()
    }

    /// `d_j = Σ_i a_i G_ij²`: the direct (same-symbol) gain of each column.
    pub fn diagonal(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &ai) in self.entries.chunks_exact(self.n).zip(a) {
            for (o, &g) in out.iter_mut().zip(row) {
                if g != 0 {
                    *o += ai;
                }
            }
        }
        let a2 = self.amplitude * self.amplitude;
        out.iter_mut().for_each(|o| *o *= a2);
        out
    }
}

fn hadamard3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).collect()
}

/// `x_st_j = Σ_i β_i γ_i x_i G_ij`.
pub fn forward_host(x: &[f64], beta: &[f64], gamma: &[f64], g: &CarrierMatrix) -> Result<Vec<f64>> {
    check_len("host", g.m, x.len())?;
    check_len("beta", g.m, beta.len())?;
    check_len("gamma", g.m, gamma.len())?;
    Ok(g.correlate(&hadamard3(x, beta, gamma)))
}

/// `y'_st_j = Σ_i β_i y'_i G_ij`.
pub fn forward_received(y: &[f64], beta: &[f64], g: &CarrierMatrix) -> Result<Vec<f64>> {
    check_len("received", g.m, y.len())?;
    check_len("beta", g.m, beta.len())?;
    let a: Vec<f64> = y.iter().zip(beta).map(|(v, b)| v * b).collect();
    Ok(g.correlate(&a))
}

/// Per-row scale `σ_Wi / sqrt(nP)` mapping subspace symbols to host samples.
pub fn spreading_scale(sigma_w: &[f64], n: usize, p: f64) -> Vec<f64> {
    sigma_w
        .iter()
        .map(|&s| {
            if s == 0.0 {
                0.0
            } else {
                s / (n as f64 * p).sqrt()
            }
        })
        .collect()
}

/// Marked host samples `y_i = γ^w_i [x_i + σ_Wi/sqrt(nP) Σ_j w_st_j G_ij]`.
pub fn embed_spatial(
    x: &[f64],
    w_st: &[f64],
    sigma_w: &[f64],
    gamma_w: &[f64],
    g: &CarrierMatrix,
    p: f64,
) -> Result<Vec<f64>> {
    check_len("host", g.m, x.len())?;
    check_len("watermark", g.n, w_st.len())?;
    check_len("sigma_w", g.m, sigma_w.len())?;
    check_len("gamma_w", g.m, gamma_w.len())?;
    let energy: f64 = w_st.iter().map(|v| v * v).sum();
    let budget = g.n as f64 * p;
    if energy > budget * (1.0 + 1e-9) + 1e-12 {
        return invalid(format!(
            "watermark energy {energy} exceeds n·P = {budget}"
        ));
    }
    let scale = spreading_scale(sigma_w, g.n, p);
    Ok((0..g.m)
        .map(|i| {
            let mark = if scale[i] == 0.0 {
                0.0
            } else {
                scale[i] * g.spread_row(i, w_st)
            };
            gamma_w[i] * (x[i] + mark)
        })
        .collect())
}

/// Subspace energies of host, noise and watermark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceEnergies {
    /// Host energy `Q = Σ β²γ²σ_X²`.
    pub q: f64,
    /// Noise energy `N = Σ β²σ_Z²`.
    pub noise: f64,
    /// Watermark energy per symbol `P = (Σ βγσ_W)² / n`.
    pub p: f64,
}

pub fn subspace_energies(
    beta: &[f64],
    gamma: &[f64],
    sigma_x: &[f64],
    sigma_z: &[f64],
    sigma_w: &[f64],
    n: usize,
) -> Result<SubspaceEnergies> {
    let m = beta.len();
    check_len("gamma", m, gamma.len())?;
    check_len("sigma_x", m, sigma_x.len())?;
    check_len("sigma_z", m, sigma_z.len())?;
    check_len("sigma_w", m, sigma_w.len())?;
    if n == 0 {
        return invalid("n must be positive");
    }
    let mut q = 0.0;
    let mut noise = 0.0;
    let mut amp = 0.0;
    for i in 0..m {
        let bg = beta[i] * gamma[i];
        q += bg * bg * sigma_x[i] * sigma_x[i];
        noise += beta[i] * beta[i] * sigma_z[i] * sigma_z[i];
        amp += bg * sigma_w[i];
    }
    Ok(SubspaceEnergies {
        q,
        noise,
        p: amp * amp / n as f64,
    })
}

/// Inter-symbol interference energy per symbol at the correlator output.
///
/// Each of the `n - 1` other symbols carries energy `P` and leaks through
/// with power `Σ β²γ²σ_W²/(nP)`, so `I = (n-1)/n · Σ β²γ²σ_W²`.
pub fn isi_energy(beta: &[f64], gamma: &[f64], sigma_w: &[f64], n: usize, p: f64) -> Result<f64> {
    check_len("gamma", beta.len(), gamma.len())?;
    check_len("sigma_w", beta.len(), sigma_w.len())?;
    if !(p > 0.0) {
        return invalid(format!("ISI energy needs P > 0, got {p}"));
    }
    if n == 0 {
        return invalid("n must be positive");
    }
    let leak: f64 = beta
        .iter()
        .zip(gamma)
        .zip(sigma_w)
        .map(|((b, g), s)| (b * g * s).powi(2))
        .sum::<f64>()
        / (n as f64 * p);
    Ok(leak * (n - 1) as f64 * p)
}

/// Decomposition of the watermark as seen by the correlator.
#[derive(Debug, Clone, PartialEq)]
pub struct WatermarkResponse {
    /// Direct gain of each symbol on its own correlator.
    pub gain: Vec<f64>,
    /// Crosstalk from the other symbols.
    pub isi: Vec<f64>,
}

/// Direct gain `Σ_i β_i γ_i σ_Wi/sqrt(nP) G_ij²` of each symbol.
pub fn direct_gain(beta: &[f64], gamma: &[f64], sigma_w: &[f64], p: f64, g: &CarrierMatrix) -> Result<Vec<f64>> {
    check_len("beta", g.m, beta.len())?;
    check_len("gamma", g.m, gamma.len())?;
    check_len("sigma_w", g.m, sigma_w.len())?;
    Ok(g.diagonal(&hadamard3(beta, gamma, &spreading_scale(sigma_w, g.n, p))))
}

/// Correlator response to subspace watermark `w_st` spread with per-row
/// amplitude `γ_i σ_Wi/sqrt(nP)` and read back with weights `β`.
///
/// `isi_j = Σ_i β_i c_i (Σ_{k≠j} w_k G_ik) G_ij` with `c_i = γ_i σ_Wi/sqrt(nP)`.
pub fn watermark_response(
    beta: &[f64],
    gamma: &[f64],
    sigma_w: &[f64],
    p: f64,
    w_st: &[f64],
    g: &CarrierMatrix,
) -> Result<WatermarkResponse> {
    check_len("beta", g.m, beta.len())?;
    check_len("gamma", g.m, gamma.len())?;
    check_len("sigma_w", g.m, sigma_w.len())?;
    check_len("watermark", g.n, w_st.len())?;
    let weights: Vec<f64> = hadamard3(beta, gamma, &spreading_scale(sigma_w, g.n, p));
    let mut gain = vec![0.0; g.n];
    let mut isi = vec![0.0; g.n];
    for (row, &a) in g.entries.chunks_exact(g.n).zip(&weights) {
        if a == 0.0 {
            continue;
        }
        let s: f64 = row.iter().zip(w_st).map(|(&e, &v)| e as f64 * v).sum();
        for ((j, &e), &v) in row.iter().enumerate().zip(w_st) {
            if e != 0 {
                let e = e as f64;
                // Rows with a single non-zero entry contribute exactly 0.
                isi[j] += a * e * (s - e * v);
                gain[j] += a;
            }
        }
    }
    let a2 = g.amplitude * g.amplitude;
    gain.iter_mut().for_each(|v| *v *= a2);
    isi.iter_mut().for_each(|v| *v *= a2);
    Ok(WatermarkResponse { gain, isi })
}

fn normalize_beta(mut beta: Vec<f64>) -> Result<Vec<f64>> {
    let m = beta.len() as f64;
    let mean_sq = beta.iter().map(|b| b * b).sum::<f64>() / m;
    if !(mean_sq > 0.0) {
        return invalid("β weights vanish everywhere");
    }
    let s = mean_sq.sqrt();
    beta.iter_mut().for_each(|b| *b /= s);
    Ok(beta)
}

/// Matched weights `β_i ∝ γ_i σ_Wi / σ_Zi²`, normalized to mean square one.
pub fn beta_matched(gamma: &[f64], sigma_w: &[f64], sigma_z: &[f64]) -> Result<Vec<f64>> {
    check_len("sigma_w", gamma.len(), sigma_w.len())?;
    check_len("sigma_z", gamma.len(), sigma_z.len())?;
    if let Some(pos) = sigma_z.iter().position(|s| !(*s > 0.0)) {
        return invalid(format!("matched β needs σ_Z > 0 (index {pos})"));
    }
    normalize_beta(
        gamma
            .iter()
            .zip(sigma_w)
            .zip(sigma_z)
            .map(|((g, w), z)| g * w / (z * z))
            .collect(),
    )
}

/// Perceptual weights `β_i ∝ φ_i`, zero where the host has no energy.
pub fn beta_perceptual(phi: &[f64], sigma_x: &[f64]) -> Result<Vec<f64>> {
    check_len("sigma_x", phi.len(), sigma_x.len())?;
    normalize_beta(
        phi.iter()
            .zip(sigma_x)
            .map(|(&f, &s)| if s > 0.0 { f } else { 0.0 })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn carriers_are_deterministic() {
        let a = gen_carriers(7, 300, 12, CarrierMode::Dense).unwrap();
        let b = gen_carriers(7, 300, 12, CarrierMode::Dense).unwrap();
        assert_eq!(a, b);
        let c = gen_carriers(8, 300, 12, CarrierMode::Dense).unwrap();
        assert_ne!(a, c);
        assert!(a.entries.iter().all(|&e| e == 1 || e == -1));
        assert!(gen_carriers(1, 4, 5, CarrierMode::Dense).is_err());
    }

    #[test]
    fn orthogonal_carriers_have_diagonal_gram() {
        let g = gen_carriers(3, 103, 10, CarrierMode::Orthogonal).unwrap();
        for i in 0..g.m() {
            assert_eq!(g.row(i).iter().filter(|&&e| e != 0).count(), 1);
        }
        let mut counts = vec![0; 10];
        for j in 0..10 {
            for k in 0..10 {
                let gram: f64 = (0..g.m()).map(|i| g.get(i, j) * g.get(i, k)).sum();
                if j != k {
                    assert_eq!(gram, 0.0);
                } else {
                    counts[j] = (gram / 10.0).round() as usize;
                }
            }
        }
        assert!(counts.iter().all(|&c| c == 10 || c == 11));
    }

    #[test]
    fn dense_column_correlation_statistics() {
        // Monte Carlo over seeds: normalized inner products of distinct
        // columns have mean 0 and variance 1/m.
        let m = 1 << 16;
        let n = 4;
        let mut samples = Vec::new();
        for seed in 0..20 {
            let g = gen_carriers(seed, m, n, CarrierMode::Dense).unwrap();
            for j in 0..n {
                for k in j + 1..n {
                    let c: f64 = (0..m).map(|i| g.get(i, j) * g.get(i, k)).sum::<f64>() / m as f64;
                    samples.push(c);
                }
            }
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|c| c * c).sum::<f64>() / samples.len() as f64;
        assert!(mean.abs() < 4.0 / (m as f64 * samples.len() as f64).sqrt());
        assert!((var * m as f64 - 1.0).abs() < 0.5, "var*m = {}", var * m as f64);
    }

    #[test]
    fn forward_transform_hand_example() {
        let g = CarrierMatrix {
            m: 4,
            n: 1,
            seed: 0,
            mode: CarrierMode::Dense,
            amplitude: 1.0,
            entries: vec![1, -1, 1, -1],
        };
        let ones = [1.0; 4];
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(forward_host(&x, &ones, &ones, &g).unwrap(), vec![-2.0]);
        assert_eq!(forward_host(&[0.0; 4], &ones, &ones, &g).unwrap(), vec![0.0]);
        assert_eq!(forward_received(&x, &ones, &g).unwrap(), vec![-2.0]);
        let scaled: Vec<f64> = x.iter().map(|v| 2.5 * v).collect();
        assert_eq!(forward_received(&scaled, &ones, &g).unwrap(), vec![-5.0]);
        assert!(forward_received(&x[..3], &ones, &g).is_err());
    }

    #[test]
    fn embed_spatial_hand_example() {
        let g = CarrierMatrix {
            m: 2,
            n: 2,
            seed: 0,
            mode: CarrierMode::Dense,
            amplitude: 1.0,
            entries: vec![1, -1, 1, 1],
        };
        let x = [10.0, -4.0];
        let w = [1.0, 2.0];
        let sigma_w = [1.0, 2.0];
        let gw = [0.5, 0.8];
        let p = 2.5; // ‖w‖² = 5 = nP
        let y = embed_spatial(&x, &w, &sigma_w, &gw, &g, p).unwrap();
        let s = (2.0 * p).sqrt();
        assert_relative_eq!(y[0], 0.5 * (10.0 + 1.0 / s * (1.0 - 2.0)), epsilon = 1e-12);
        assert_relative_eq!(y[1], 0.8 * (-4.0 + 2.0 / s * (1.0 + 2.0)), epsilon = 1e-12);

        let zero = embed_spatial(&x, &[0.0; 2], &sigma_w, &gw, &g, p).unwrap();
        assert_eq!(zero, vec![5.0, -3.2]);
        let unmarked = embed_spatial(&x, &w, &[0.0; 2], &[1.0; 2], &g, p).unwrap();
        assert_eq!(unmarked, x.to_vec());
        assert!(embed_spatial(&x, &[3.0, 3.0], &sigma_w, &gw, &g, p).is_err());
    }

    #[test]
    fn energies_examples() {
        let one = [1.0; 2];
        let e = subspace_energies(&one, &one, &one, &one, &one, 1).unwrap();
        assert_eq!((e.q, e.noise, e.p), (2.0, 2.0, 4.0));
        let e0 = subspace_energies(&one, &one, &one, &one, &[0.0; 2], 1).unwrap();
        assert_eq!(e0.p, 0.0);
        let two = [2.0; 2];
        let e2 = subspace_energies(&two, &one, &one, &one, &one, 1).unwrap();
        assert_eq!((e2.q, e2.noise, e2.p), (8.0, 8.0, 16.0));
    }

    #[test]
    fn isi_energy_edge_cases() {
        let one = [1.0; 5];
        assert_eq!(isi_energy(&one, &one, &one, 1, 3.0).unwrap(), 0.0);
        assert!(isi_energy(&one, &one, &one, 4, 0.0).is_err());
        assert_relative_eq!(isi_energy(&one, &one, &one, 4, 3.0).unwrap(), 5.0 * 0.75);
    }

    #[test]
    fn orthogonal_carriers_have_no_isi() {
        let m = 2000;
        let n = 16;
        let g = gen_carriers(9, m, n, CarrierMode::Orthogonal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sigma_w: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..3.0)).collect();
        let beta = vec![1.0; m];
        let gamma = vec![0.9; m];
        let p = subspace_energies(&beta, &gamma, &sigma_w, &sigma_w, &sigma_w, n)
            .unwrap()
            .p;
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = watermark_response(&beta, &gamma, &sigma_w, p, &w, &g).unwrap();
        assert!(r.isi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_isi_power_matches_formula() {
        let m = 1 << 13;
        let n = 32;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sigma_w: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..3.0)).collect();
        let beta: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
        let gamma = vec![0.8; m];
        let p = subspace_energies(&beta, &gamma, &sigma_w, &sigma_w, &sigma_w, n)
            .unwrap()
            .p;
        let predicted = isi_energy(&beta, &gamma, &sigma_w, n, p).unwrap();
        let mut measured = 0.0;
        let runs = 40;
        for seed in 0..runs {
            let g = gen_carriers(100 + seed, m, n, CarrierMode::Dense).unwrap();
            let normal = Normal::new(0.0, 1.0).unwrap();
            let mut w: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let s = (n as f64 * p / dot(&w, &w)).sqrt();
            w.iter_mut().for_each(|v| *v *= s);
            let r = watermark_response(&beta, &gamma, &sigma_w, p, &w, &g).unwrap();
            measured += dot(&r.isi, &r.isi) / n as f64;
            for d in &r.gain {
                assert_relative_eq!(*d, 1.0, epsilon = 1e-9);
            }
        }
        measured /= runs as f64;
        assert!((measured / predicted - 1.0).abs() < 0.1, "{measured} vs {predicted}");
    }

    #[test]
    fn correlator_snr_matches_energy_model() {
        // Non-informed spread spectrum: y_st = x_st + w_st + isi + noise,
        // so the measured SNR should be P/(Q+N+I).
        let m = 1 << 14;
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let sigma_x = vec![3.0; m];
        let sigma_w = vec![1.0; m];
        let sigma_z = vec![2.0; m];
        let ones = vec![1.0; m];
        let e = subspace_energies(&ones, &ones, &sigma_x, &sigma_z, &sigma_w, n).unwrap();
        let isi = isi_energy(&ones, &ones, &sigma_w, n, e.p).unwrap();
        let predicted = e.p / (e.q + e.noise + isi);
        let (mut sig, mut err) = (0.0, 0.0);
        for seed in 0..20 {
            let g = gen_carriers(seed, m, n, CarrierMode::Dense).unwrap();
            let x: Vec<f64> = sigma_x.iter().map(|s| s * normal.sample(&mut rng)).collect();
            let w: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 } * e.p.sqrt())
                .collect();
            let y = embed_spatial(&x, &w, &sigma_w, &ones, &g, e.p).unwrap();
            let yp: Vec<f64> = y
                .iter()
                .zip(&sigma_z)
                .map(|(v, s)| v + s * normal.sample(&mut rng))
                .collect();
            let yst = forward_received(&yp, &ones, &g).unwrap();
            sig += dot(&w, &w);
            err += yst.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        let measured = sig / err;
        assert!((measured / predicted - 1.0).abs() < 0.05, "{measured} vs {predicted}");
    }

    #[test]
    fn forward_is_adjoint_of_spread() {
        let g = gen_carriers(5, 64, 8, CarrierMode::Dense).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = dot(&g.correlate(&a), &w);
        let rhs = dot(&a, &g.spread(&w));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn beta_examples() {
        let b = beta_perceptual(&[1.0, 2.0], &[1.0, 1.0]).unwrap();
        let c = (2.0f64 / 5.0).sqrt();
        assert_relative_eq!(b[0], c, epsilon = 1e-15);
        assert_relative_eq!(b[1], 2.0 * c, epsilon = 1e-15);
        let flat = beta_matched(&[0.5; 3], &[2.0; 3], &[1.5; 3]).unwrap();
        assert!(flat.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let gamma = [0.9, 0.5, 0.7];
        let sw = [1.0, 2.0, 3.0];
        let b1 = beta_matched(&gamma, &sw, &[1.0, 2.0, 0.5]).unwrap();
        let b2 = beta_matched(&gamma, &sw, &[2.0, 4.0, 1.0]).unwrap();
        for (x, y) in b1.iter().zip(&b2) {
            assert_relative_eq!(x, y, epsilon = 1e-14);
        }
        assert!(beta_matched(&gamma, &sw, &[1.0, 0.0, 1.0]).is_err());
        let support = beta_perceptual(&[1.0, 1.0], &[0.0, 2.0]).unwrap();
        assert_eq!(support[0], 0.0);
    }

    #[test]
    fn ratios_invariant_under_beta_scaling() {
        let beta = [0.3, 1.2, 0.7];
        let gamma = [0.9, 0.8, 1.0];
        let sx = [2.0, 1.0, 4.0];
        let sz = [1.0, 0.5, 2.0];
        let sw = [0.4, 0.9, 1.1];
        let e1 = subspace_energies(&beta, &gamma, &sx, &sz, &sw, 2).unwrap();
        let big: Vec<f64> = beta.iter().map(|b| b * 7.0).collect();
        let e2 = subspace_energies(&big, &gamma, &sx, &sz, &sw, 2).unwrap();
        assert_relative_eq!(e1.p / e1.noise, e2.p / e2.noise, epsilon = 1e-12);
        assert_relative_eq!(e1.p / e1.q, e2.p / e2.q, epsilon = 1e-12);
        let i1 = isi_energy(&beta, &gamma, &sw, 2, e1.p).unwrap();
        let i2 = isi_energy(&big, &gamma, &sw, 2, e2.p).unwrap();
        assert_relative_eq!(e1.p / i1, e2.p / i2, epsilon = 1e-12);
    }
}
