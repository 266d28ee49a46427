//! Power allocation as a min-max game between embedder and attacker.
//!
//! The attacker applies per-coefficient scaling `γ^a` and Gaussian noise of
//! variance `σ_Z²` (SAWGN) to minimize `E_b/N_0` under a perceptually
//! weighted distortion budget; the embedder picks `σ_W` to maximize it under
//! its own budget. Both best responses are closed forms; the Lagrange
//! multipliers `λ` (attack) and `χ` (embedding) are tuned by nested
//! monotone root finding so both budgets are met.

use crate::error::{check_len, invalid, Error, Result};

/// `½ log2(1 + P/(Q+N))`: capacity when the host is treated as noise.
pub fn capacity_classic(p: f64, q: f64, noise: f64) -> Result<f64> {
    check_powers(p, q, noise)?;
    Ok(0.5 * (1.0 + p / (q + noise)).log2())
}

/// `½ log2(1 + P/N)`: capacity with the host known at the embedder.
pub fn capacity_costa(p: f64, noise: f64) -> Result<f64> {
    check_powers(p, 0.0, noise)?;
    Ok(0.5 * (1.0 + p / noise).log2())
}

/// Optimal inflation factor `α = P/(P+N)`.
pub fn costa_alpha(p: f64, noise: f64) -> Result<f64> {
    check_powers(p, 0.0, noise)?;
    Ok(p / (p + noise))
}

/// Correlator output SNR `P(P+Q+N) / (N(P+N))` of the ideal informed scheme.
pub fn output_snr(p: f64, q: f64, noise: f64) -> Result<f64> {
    check_powers(p, q, noise)?;
    Ok(p * (p + q + noise) / (noise * (p + noise)))
}

fn check_powers(p: f64, q: f64, noise: f64) -> Result<()> {
    if !(noise > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise power must be positive (capacity is unbounded at N = {noise})"
        )));
    }
    if !(p >= 0.0) || !(q >= 0.0) {
        return invalid(format!("powers must be non-negative (P={p}, Q={q})"));
    }
    Ok(())
}

/// Wiener gain `σ_X²/(σ_X²+σ_W²)` applied at embedding.
pub fn wiener_gain(sigma_x: f64, sigma_w: f64) -> Result<f64> {
    if sigma_x < 0.0 || sigma_w < 0.0 {
        return invalid("standard deviations must be non-negative");
    }
    let den = sigma_x * sigma_x + sigma_w * sigma_w;
    if den == 0.0 {
        return invalid("Wiener gain undefined when σ_X = σ_W = 0");
    }
    Ok(sigma_x * sigma_x / den)
}

fn wiener_or_unit(sigma_x: f64, sigma_w: f64) -> f64 {
    wiener_gain(sigma_x, sigma_w).unwrap_or(1.0)
}

/// Attacker's per-coefficient choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackResponse {
    /// Total gain `γ = γ^a γ^w` seen by the receiver.
    pub gamma: f64,
    pub sigma_z: f64,
}

/// Attacker Lagrangian `γ²σ_W²/σ_Z² + λφ²(σ_X²(1-γ)² + γ²σ_W² + σ_Z²)`.
///
/// The ratio term is taken as 0 when `γσ_W = 0` and infinite when only
/// `σ_Z` vanishes.
pub fn attacker_cost(gamma: f64, sigma_z: f64, sigma_w: f64, sigma_x: f64, phi: f64, lambda: f64) -> f64 {
    let signal = gamma * gamma * sigma_w * sigma_w;
    let ratio = if signal == 0.0 {
        0.0
    } else if sigma_z == 0.0 {
        f64::INFINITY
    } else {
        signal / (sigma_z * sigma_z)
    };
    ratio + lambda * phi * phi * attack_term(sigma_x, sigma_w, gamma, sigma_z)
}

fn attack_term(sigma_x: f64, sigma_w: f64, gamma: f64, sigma_z: f64) -> f64 {
    sigma_x * sigma_x * (1.0 - gamma).powi(2) + gamma * gamma * sigma_w * sigma_w + sigma_z * sigma_z
}

fn embed_term(sigma_x: f64, sigma_w: f64) -> f64 {
    let a = sigma_x * sigma_x;
    let w2 = sigma_w * sigma_w;
    if a + w2 == 0.0 {
        0.0
    } else {
        a * w2 / (a + w2)
    }
}

/// Closed-form minimizer of [`attacker_cost`] over `γ ∈ [0, γ^w]` and
/// `σ_Z ≥ 0`. Coefficients with `σ_W > sqrt(λ) φ σ_X²` are erased.
pub fn attack_best_response(sigma_w: f64, sigma_x: f64, phi: f64, lambda: f64) -> AttackResponse {
    debug_assert!(lambda > 0.0 && phi > 0.0);
    let a = sigma_x * sigma_x;
    let w2 = sigma_w * sigma_w;
    if a + w2 == 0.0 {
        return AttackResponse {
            gamma: 1.0,
            sigma_z: 0.0,
        };
    }
    let root = lambda.sqrt() * phi;
    let gamma = if sigma_w <= root * a {
        ((a - sigma_w / root) / (a + w2)).max(0.0)
    } else {
        0.0
    };
    let gw = a / (a + w2);
    let z2 = gamma * (gw - gamma) * (a + w2);
    debug_assert!(z2 >= -1e-9 * (a + w2), "negative attack noise variance {z2}");
    AttackResponse {
        gamma,
        sigma_z: z2.max(0.0).sqrt(),
    }
}

/// Embedder Lagrangian at the attacker's best response:
/// `J_λ(γ*, σ_Z*) - χ φ² σ_X²σ_W²/(σ_X²+σ_W²)`.
pub fn embedder_objective(sigma_w: f64, sigma_x: f64, phi: f64, lambda: f64, chi: f64) -> f64 {
    let r = attack_best_response(sigma_w, sigma_x, phi, lambda);
    attacker_cost(r.gamma, r.sigma_z, sigma_w, sigma_x, phi, lambda)
        - chi * phi * phi * embed_term(sigma_x, sigma_w)
}

/// Closed-form maximizer of [`embedder_objective`] over `σ_W ≥ 0`.
///
/// Valid for every `χ ≥ 0`; the multiplier is not required to stay below
/// `λ` (for weak attacks the embedding budget is only reachable with
/// `χ > λ`).
pub fn embed_best_response(sigma_x: f64, phi: f64, lambda: f64, chi: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(chi >= 0.0) || !(phi > 0.0) || sigma_x < 0.0 {
        return invalid(format!(
            "embed best response needs λ > 0, χ ≥ 0, φ > 0, σ_X ≥ 0 (λ={lambda}, χ={chi}, φ={phi}, σ_X={sigma_x})"
        ));
    }
    Ok(embed_response_unchecked(sigma_x, phi, lambda, chi))
}

fn embed_response_unchecked(sigma_x: f64, phi: f64, lambda: f64, chi: f64) -> f64 {
    let a = sigma_x * sigma_x;
    let f2 = phi * phi;
    let lin = f2 * (lambda - chi) * a - 1.0;
    let disc = lin * lin + 4.0 * lambda * f2 * a;
    let den = 2.0 * lambda.sqrt() * phi;
    // Rationalized when lin < 0 to avoid cancellation.
    let w = if lin >= 0.0 {
        (lin + disc.sqrt()) / den
    } else {
        4.0 * lambda * f2 * a / ((disc.sqrt() - lin) * den)
    };
    w.max(0.0)
}

/// Mean weighted embedding distortion `(1/m) Σ φ² σ_X²σ_W²/(σ_X²+σ_W²)`.
pub fn distortion_embed(phi: &[f64], sigma_x: &[f64], sigma_w: &[f64]) -> Result<f64> {
    check_len("sigma_x", phi.len(), sigma_x.len())?;
    check_len("sigma_w", phi.len(), sigma_w.len())?;
    Ok(mean(phi.iter().zip(sigma_x).zip(sigma_w).map(|((f, x), w)| f * f * embed_term(*x, *w))))
}

/// Mean weighted attack distortion
/// `(1/m) Σ φ²(σ_X²(1-γ)² + γ²σ_W² + σ_Z²)`.
pub fn distortion_attack(
    phi: &[f64],
    sigma_x: &[f64],
    sigma_w: &[f64],
    gamma: &[f64],
    sigma_z: &[f64],
) -> Result<f64> {
    let m = phi.len();
    check_len("sigma_x", m, sigma_x.len())?;
    check_len("sigma_w", m, sigma_w.len())?;
    check_len("gamma", m, gamma.len())?;
    check_len("sigma_z", m, sigma_z.len())?;
    Ok(mean((0..m).map(|i| {
        phi[i] * phi[i] * attack_term(sigma_x[i], sigma_w[i], gamma[i], sigma_z[i])
    })))
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Maximum mean weighted distortions for embedding and attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionBudget {
    pub embed: f64,
    pub attack: f64,
}

impl DistortionBudget {
    pub fn new(embed: f64, attack: f64) -> Result<Self> {
        if !(embed > 0.0) || !(attack >= embed) {
            return invalid(format!(
                "budgets need 0 < D_xy ≤ D_xy' (got {embed}, {attack})"
            ));
        }
        Ok(Self { embed, attack })
    }
}

/// Per-coefficient embedding and attack parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub sigma_x: Vec<f64>,
    pub phi: Vec<f64>,
    pub sigma_w: Vec<f64>,
    pub gamma_w: Vec<f64>,
    pub gamma_a: Vec<f64>,
    /// `γ = γ^a γ^w`.
    pub gamma: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub lambda: f64,
    pub chi: f64,
}

impl ChannelParams {
    /// Embedder-side parameters for a given allocation `σ_W`, with attack
    /// fields set to the identity channel.
    pub fn from_allocation(sigma_x: Vec<f64>, phi: Vec<f64>, sigma_w: Vec<f64>) -> Result<Self> {
        let m = sigma_x.len();
        check_len("phi", m, phi.len())?;
        check_len("sigma_w", m, sigma_w.len())?;
        let gamma_w: Vec<f64> = sigma_x
            .iter()
            .zip(&sigma_w)
            .map(|(x, w)| wiener_or_unit(*x, *w))
            .collect();
        Ok(Self {
            gamma: gamma_w.clone(),
            gamma_w,
            gamma_a: vec![1.0; m],
            sigma_z: vec![0.0; m],
            sigma_x,
            phi,
            sigma_w,
            lambda: f64::INFINITY,
            chi: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.sigma_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_x.is_empty()
    }

    pub fn distortion_embed(&self) -> f64 {
        distortion_embed(&self.phi, &self.sigma_x, &self.sigma_w).expect("consistent lengths")
    }

    pub fn distortion_attack(&self) -> f64 {
        distortion_attack(&self.phi, &self.sigma_x, &self.sigma_w, &self.gamma, &self.sigma_z)
            .expect("consistent lengths")
    }

    /// Replace the attack fields with the best response at `lambda`.
    pub fn with_attack(mut self, lambda: f64) -> Self {
        for i in 0..self.len() {
            let r = attack_best_response(self.sigma_w[i], self.sigma_x[i], self.phi[i], lambda);
            self.gamma[i] = r.gamma;
            self.sigma_z[i] = r.sigma_z;
            self.gamma_a[i] = if self.gamma_w[i] > 0.0 {
                r.gamma / self.gamma_w[i]
            } else {
                0.0
            };
        }
        self.lambda = lambda;
        self
    }

    /// `E_b/N_0 = (1/n) Σ γ²σ_W²/σ_Z²` over coefficients that carry signal.
    pub fn eb_n0(&self, n: usize) -> f64 {
        (0..self.len())
            .map(|i| {
                let s = self.gamma[i] * self.gamma[i] * self.sigma_w[i] * self.sigma_w[i];
                if s == 0.0 {
                    0.0
                } else {
                    s / (self.sigma_z[i] * self.sigma_z[i])
                }
            })
            .sum::<f64>()
            / n as f64
    }
}

/// Root of a monotone function on `[lo, hi]` by the Illinois variant of
/// regula falsi, performed on `ln x` when `log_scale` is set.
fn solve_monotone(
    mut f: impl FnMut(f64) -> f64,
    target: f64,
    lo: f64,
    hi: f64,
    log_scale: bool,
) -> f64 {
    let (to, from): (fn(f64) -> f64, fn(f64) -> f64) = if log_scale {
        (f64::ln, f64::exp)
    } else {
        (|x| x, |x| x)
    };
    let (mut a, mut b) = (to(lo), to(hi));
    let mut fa = f(from(a)) - target;
    let mut fb = f(from(b)) - target;
    if fa == 0.0 {
        return from(a);
    }
    if fb == 0.0 {
        return from(b);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(from(c)) - target;
        if fc.abs() <= 1e-9 * target.abs() || (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            return from(c);
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    from(0.5 * (a + b))
}

fn allocation(sigma_x: &[f64], phi: &[f64], lambda: f64, chi: f64) -> Vec<f64> {
    sigma_x
        .iter()
        .zip(phi)
        .map(|(&x, &f)| {
            if x == 0.0 {
                0.0
            } else {
                embed_response_unchecked(x, f, lambda, chi)
            }
        })
        .collect()
}

fn attack_distortion_at(sigma_x: &[f64], phi: &[f64], sigma_w: &[f64], lambda: f64) -> f64 {
    mean((0..sigma_x.len()).map(|i| {
        let r = attack_best_response(sigma_w[i], sigma_x[i], phi[i], lambda);
        phi[i] * phi[i] * attack_term(sigma_x[i], sigma_w[i], r.gamma, r.sigma_z)
    }))
}

fn check_host(sigma_x: &[f64], phi: &[f64]) -> Result<()> {
    check_len("phi", sigma_x.len(), phi.len())?;
    if sigma_x.is_empty() || !sigma_x.iter().any(|&s| s > 0.0) {
        return invalid("host has no energy");
    }
    if sigma_x.iter().any(|s| !(*s >= 0.0)) || phi.iter().any(|f| !(*f > 0.0)) {
        return invalid("σ_X must be non-negative and φ positive");
    }
    Ok(())
}

/// Grow `x` geometrically until `pred(x)` holds.
fn expand_until(mut x: f64, factor: f64, pred: impl Fn(f64) -> bool) -> Option<f64> {
    for _ in 0..400 {
        if pred(x) {
            return Some(x);
        }
        x *= factor;
        if x == 0.0 || !x.is_finite() {
            return None;
        }
    }
    None
}

/// Attacker multiplier `λ` whose best response against allocation `σ_W`
/// spends exactly `max_attack` distortion.
pub fn solve_attack(sigma_x: &[f64], phi: &[f64], sigma_w: &[f64], max_attack: f64) -> Result<f64> {
    check_host(sigma_x, phi)?;
    check_len("sigma_w", sigma_x.len(), sigma_w.len())?;
    let floor = distortion_embed(phi, sigma_x, sigma_w)?;
    let erase = mean(phi.iter().zip(sigma_x).map(|(f, x)| f * f * x * x));
    if !(max_attack > floor) {
        return Err(Error::Infeasible(format!(
            "attack budget {max_attack} is not above the Wiener floor {floor}"
        )));
    }
    if max_attack >= erase {
        return Err(Error::Infeasible(format!(
            "attack budget {max_attack} reaches full erasure distortion {erase}"
        )));
    }
    let d = |l: f64| attack_distortion_at(sigma_x, phi, sigma_w, l);
    let hi = expand_until(1.0, 4.0, |l| d(l) < max_attack)
        .ok_or_else(|| Error::Infeasible("attack budget too close to the floor".into()))?;
    let lo = expand_until(hi, 0.25, |l| d(l) > max_attack)
        .ok_or_else(|| Error::Infeasible("attack budget too close to erasure".into()))?;
    Ok(solve_monotone(d, max_attack, lo, hi, true))
}

/// Solve the embedding/attack game for a host and distortion budgets.
///
/// Outer search on `λ` meets the attack budget; for each `λ` the inner
/// search on `χ` meets the embedding budget. The returned parameters carry
/// the attacker's best response at the final `λ`.
pub fn solve_game(sigma_x: &[f64], phi: &[f64], budget: DistortionBudget) -> Result<ChannelParams> {
    check_host(sigma_x, phi)?;
    let erase = mean(phi.iter().zip(sigma_x).map(|(f, x)| f * f * x * x));
    if budget.attack >= erase {
        return Err(Error::Infeasible(format!(
            "attack budget {} reaches full erasure distortion {erase}",
            budget.attack
        )));
    }
    if budget.embed >= erase {
        return Err(Error::Infeasible(format!(
            "embedding budget {} exceeds host energy {erase}",
            budget.embed
        )));
    }
    if budget.attack <= budget.embed {
        return Err(Error::Infeasible(format!(
            "attack budget {} is not above the Wiener floor {}",
            budget.attack, budget.embed
        )));
    }

    let d_embed = |l: f64, c: f64| distortion_embed(phi, sigma_x, &allocation(sigma_x, phi, l, c)).unwrap();

    // With χ = 0 the allocation sits exactly on the erasure threshold, and
    // the embedding distortion increases with λ: below this λ the embedding
    // budget cannot be spent.
    let lambda_min = {
        let g = |l: f64| d_embed(l, 0.0);
        let hi = expand_until(1.0, 4.0, |l| g(l) > budget.embed)
            .ok_or_else(|| Error::Infeasible("embedding budget unreachable".into()))?;
        let lo = expand_until(hi, 0.25, |l| g(l) < budget.embed)
            .ok_or_else(|| Error::Infeasible("embedding budget unreachable".into()))?;
        solve_monotone(g, budget.embed, lo, hi, true)
    };

    let chi_for = |l: f64| -> f64 {
        if d_embed(l, 0.0) <= budget.embed {
            return 0.0;
        }
        let hi = expand_until(l.max(1e-12), 4.0, |c| d_embed(l, c) < budget.embed)
            .expect("embedding distortion vanishes as χ grows");
        solve_monotone(|c| d_embed(l, c), budget.embed, 0.0, hi, false)
    };
    let attack_at = |l: f64| {
        let c = chi_for(l);
        attack_distortion_at(sigma_x, phi, &allocation(sigma_x, phi, l, c), l)
    };

    let lo = lambda_min * (1.0 + 1e-9);
    if attack_at(lo) <= budget.attack {
        return Err(Error::Infeasible(format!(
            "attack budget {} exceeds what the attacker can spend",
            budget.attack
        )));
    }
    let hi = expand_until(lo * 2.0, 4.0, |l| attack_at(l) < budget.attack)
        .ok_or_else(|| Error::Infeasible("attack budget too close to the Wiener floor".into()))?;
    let lambda = solve_monotone(attack_at, budget.attack, lo, hi, true);
    let chi = chi_for(lambda);
    let sigma_w = allocation(sigma_x, phi, lambda, chi);
    let mut params =
        ChannelParams::from_allocation(sigma_x.to_vec(), phi.to_vec(), sigma_w)?.with_attack(lambda);
    params.chi = chi;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Grid minimization of the attacker Lagrangian over (γ, σ_Z) with a
    /// local refinement around the best cell.
    fn grid_attack(sw: f64, sx: f64, phi: f64, lambda: f64) -> (f64, f64, f64) {
        let gw = wiener_or_unit(sx, sw);
        let zmax = (gw * (sx * sx + sw * sw)).sqrt().max(1e-3) * 2.0;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let (mut g0, mut g1, mut z0, mut z1) = (0.0, 1.2, 0.0, zmax);
        for _ in 0..4 {
            for a in 0..=200 {
                let g = g0 + (g1 - g0) * a as f64 / 200.0;
                for b in 0..=200 {
                    let z = z0 + (z1 - z0) * b as f64 / 200.0;
                    let j = attacker_cost(g, z, sw, sx, phi, lambda);
                    if j < best.0 {
                        best = (j, g, z);
                    }
                }
            }
            let dg = (g1 - g0) / 20.0;
            let dz = (z1 - z0) / 20.0;
            g0 = (best.1 - dg).max(0.0);
            g1 = best.1 + dg;
            z0 = (best.2 - dz).max(0.0);
            z1 = best.2 + dz;
        }
        best
    }

    fn grid_embed(sx: f64, phi: f64, lambda: f64, chi: f64) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0);
        let (mut lo, mut hi) = (0.0, 4.0 * sx.max(1.0));
        for _ in 0..5 {
            for a in 0..=2000 {
                let w = lo + (hi - lo) * a as f64 / 2000.0;
                let j = embedder_objective(w, sx, phi, lambda, chi);
                if j > best.0 {
                    best = (j, w);
                }
            }
            let d = (hi - lo) / 100.0;
            lo = (best.1 - d).max(0.0);
            hi = best.1 + d;
        }
        best
    }

    #[test]
    fn capacity_examples() {
        assert_relative_eq!(capacity_costa(2.0, 2.0).unwrap(), 0.5);
        assert_relative_eq!(costa_alpha(2.0, 2.0).unwrap(), 0.5);
        assert_relative_eq!(capacity_classic(1.0, 1.0, 1.0).unwrap(), 0.292_481_250_360_578, epsilon = 1e-12);
        assert_relative_eq!(capacity_classic(3.0, 0.0, 1.5).unwrap(), capacity_costa(3.0, 1.5).unwrap());
        assert!(capacity_costa(1.0, 0.0).is_err());
        assert!(capacity_classic(-1.0, 1.0, 1.0).is_err());
        assert_eq!(costa_alpha(3.0, 1.0).unwrap(), 0.75);
    }

    #[test]
    fn output_snr_matches_scalar_informed_scheme() {
        // u = w + αx with w independent of x; the receiver sees y' = x + w + z.
        let (p, q, noise) = (2.0f64, 5.0f64, 1.0f64);
        let alpha = costa_alpha(p, noise).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let std = Normal::new(0.0, 1.0).unwrap();
        let (mut suu, mut syy, mut suy) = (0.0, 0.0, 0.0);
        for _ in 0..200_000 {
            let x = q.sqrt() * std.sample(&mut rng);
            let w = p.sqrt() * std.sample(&mut rng);
            let z = noise.sqrt() * std.sample(&mut rng);
            let u = w + alpha * x;
            let y = x + w + z;
            suu += u * u;
            syy += y * y;
            suy += u * y;
        }
        let rho2 = suy * suy / (suu * syy);
        let measured = rho2 / (1.0 - rho2);
        let predicted = output_snr(p, q, noise).unwrap();
        assert!((measured / predicted - 1.0).abs() < 0.1, "{measured} vs {predicted}");
    }

    #[test]
    fn wiener_examples() {
        assert_eq!(wiener_gain(3.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(wiener_gain(2.0, 1.0).unwrap(), 0.8);
        assert_relative_eq!(wiener_gain(1.7, 1.7).unwrap(), 0.5);
        assert!(wiener_gain(0.0, 0.0).is_err());
    }

    #[test]
    fn attack_erases_strong_watermark() {
        let r = attack_best_response(3.0, 1.0, 1.0, 4.0);
        assert_eq!(r.gamma, 0.0);
        assert_eq!(r.sigma_z, 0.0);
    }

    #[test]
    fn attack_vanishes_as_lambda_grows() {
        let gw = wiener_gain(1.0, 0.5).unwrap();
        let r = attack_best_response(0.5, 1.0, 1.0, 1e12);
        assert!((r.gamma - gw).abs() < 1e-5);
        assert!(r.sigma_z < 1e-2);
    }

    #[test]
    fn attack_closed_form_beats_grid() {
        let r = attack_best_response(0.5, 1.0, 1.0, 4.0);
        let j = attacker_cost(r.gamma, r.sigma_z, 0.5, 1.0, 1.0, 4.0);
        let (jg, gg, zg) = grid_attack(0.5, 1.0, 1.0, 4.0);
        assert!(j <= jg + 1e-9);
        assert!((j - jg).abs() < 1e-3);
        assert!((r.gamma - gg).abs() < 1e-2 && (r.sigma_z - zg).abs() < 1e-2);
    }

    #[test]
    fn embed_response_examples() {
        assert_eq!(embed_best_response(0.0, 1.0, 2.0, 0.5).unwrap(), 0.0);
        let w = embed_best_response(1.0, 1.0, 1.0, 0.0).unwrap();
        // χ = 0 places σ_W on the erasure threshold sqrt(λ)φσ_X².
        assert_relative_eq!(w, 1.0, epsilon = 1e-12);
        let (jg, wg) = grid_embed(1.0, 1.0, 1.0, 0.0);
        assert!((embedder_objective(w, 1.0, 1.0, 1.0, 0.0) - jg).abs() < 1e-3);
        assert!((w - wg).abs() < 1e-2);
        assert!(embed_best_response(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(embed_best_response(1.0, 1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn embed_response_is_stationary_and_continuous() {
        let (sx, phi, lambda) = (2.0, 0.7, 0.3);
        let mut prev: Option<f64> = None;
        for step in 0..=400 {
            let chi = lambda * 2.0 * step as f64 / 400.0;
            let w = embed_best_response(sx, phi, lambda, chi).unwrap();
            let h = 1e-5;
            let d = (embedder_objective(w + h, sx, phi, lambda, chi)
                - embedder_objective(w - h, sx, phi, lambda, chi))
                / (2.0 * h);
            assert!(d.abs() < 1e-5, "derivative {d} at χ={chi}");
            if let Some(p) = prev {
                assert!((w - p).abs() < 0.05, "jump at χ={chi}");
            }
            prev = Some(w);
        }
    }

    #[test]
    fn distortion_examples() {
        assert_eq!(distortion_embed(&[1.0], &[2.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(distortion_attack(&[1.0], &[2.0], &[0.0], &[1.0], &[0.0]).unwrap(), 0.0);
        assert_relative_eq!(distortion_embed(&[1.0], &[2.0], &[1.0]).unwrap(), 0.8);
        assert!(distortion_embed(&[1.0, 1.0], &[2.0], &[1.0]).is_err());
    }

    #[test]
    fn distortion_formulas_match_sampling() {
        let m = 1 << 16;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let std = Normal::new(0.0, 1.0).unwrap();
        let sx: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..5.0)).collect();
        let phi: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
        let sw: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..2.0)).collect();
        let params = ChannelParams::from_allocation(sx.clone(), phi.clone(), sw.clone())
            .unwrap()
            .with_attack(0.8);
        let (mut de, mut da) = (0.0, 0.0);
        for i in 0..m {
            let x = sx[i] * std.sample(&mut rng);
            let w = sw[i] * std.sample(&mut rng);
            let y = params.gamma_w[i] * (x + w);
            let yp = params.gamma_a[i] * y + params.sigma_z[i] * std.sample(&mut rng);
            de += phi[i].powi(2) * (x - y).powi(2);
            da += phi[i].powi(2) * (x - yp).powi(2);
        }
        de /= m as f64;
        da /= m as f64;
        assert!((de / params.distortion_embed() - 1.0).abs() < 0.02);
        assert!((da / params.distortion_attack() - 1.0).abs() < 0.02);
    }

    #[test]
    fn uniform_host_game_has_analytic_allocation() {
        let sx = vec![10.0; 500];
        let phi = vec![1.0; 500];
        let budget = DistortionBudget::new(7.0, 20.0).unwrap();
        let p = solve_game(&sx, &phi, budget).unwrap();
        let expected = (7.0f64 * 100.0 / 93.0).sqrt();
        for w in &p.sigma_w {
            assert_relative_eq!(*w, expected, max_relative = 1e-4);
        }
        assert!((p.distortion_embed() / 7.0 - 1.0).abs() < 5e-3);
        assert!((p.distortion_attack() / 20.0 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn game_concentrates_energy_on_strong_coefficients() {
        let sx: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { 10.0 }).collect();
        let phi = vec![1.0; 1000];
        let p = solve_game(&sx, &phi, DistortionBudget::new(2.0, 6.0).unwrap()).unwrap();
        assert!(p.sigma_w[1] > 2.0 * p.sigma_w[0]);
        let ws: f64 = p.sigma_w.iter().map(|w| w * w).sum();
        let strong: f64 = p.sigma_w.iter().skip(1).step_by(2).map(|w| w * w).sum();
        assert!(strong / ws > 0.8);
    }

    #[test]
    fn game_rejects_infeasible_budgets() {
        let sx = vec![3.0; 10];
        let phi = vec![1.0; 10];
        assert!(matches!(
            solve_game(&sx, &phi, DistortionBudget { embed: 2.0, attack: 1.5 }),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            solve_game(&sx, &phi, DistortionBudget { embed: 2.0, attack: 9.5 }),
            Err(Error::Infeasible(_))
        ));
        assert!(DistortionBudget::new(0.0, 1.0).is_err());
        assert!(solve_game(&[0.0; 4], &[1.0; 4], DistortionBudget::new(1.0, 2.0).unwrap()).is_err());
    }

    #[test]
    fn solved_game_is_a_local_saddle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sx: Vec<f64> = (0..300).map(|_| rng.random_range(1.0..20.0)).collect();
        let phi: Vec<f64> = (0..300).map(|_| rng.random_range(0.5..1.5)).collect();
        let p = solve_game(&sx, &phi, DistortionBudget::new(5.0, 15.0).unwrap()).unwrap();
        let (l, c) = (p.lambda, p.chi);
        let attacker = |g: &[f64], z: &[f64]| -> f64 {
            (0..300).map(|i| attacker_cost(g[i], z[i], p.sigma_w[i], sx[i], phi[i], l)).sum()
        };
        let embedder = |w: &[f64]| -> f64 {
            (0..300).map(|i| embedder_objective(w[i], sx[i], phi[i], l, c)).sum()
        };
        let base_a = attacker(&p.gamma, &p.sigma_z);
        let base_e = embedder(&p.sigma_w);
        for _ in 0..50 {
            let g: Vec<f64> = p.gamma.iter().map(|v| (v * (1.0 + rng.random_range(-0.01..0.01))).max(0.0)).collect();
            let z: Vec<f64> = p.sigma_z.iter().map(|v| v * (1.0 + rng.random_range(-0.01..0.01))).collect();
            assert!(attacker(&g, &z) >= base_a - 1e-9);
            let w: Vec<f64> = p.sigma_w.iter().map(|v| v * (1.0 + rng.random_range(-0.01..0.01))).collect();
            assert!(embedder(&w) <= base_e + 1e-9);
        }
    }

    #[test]
    fn larger_attack_budget_never_helps_embedder() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sx: Vec<f64> = (0..400).map(|_| rng.random_range(2.0..30.0)).collect();
        let phi = vec![1.0; 400];
        let mut prev = f64::INFINITY;
        for attack in [8.0, 10.0, 15.0, 25.0, 40.0, 80.0] {
            let p = solve_game(&sx, &phi, DistortionBudget::new(7.0, attack).unwrap()).unwrap();
            let e = p.eb_n0(132);
            assert!(e <= prev * (1.0 + 1e-6), "Eb/N0 rose from {prev} to {e} at D'={attack}");
            prev = e;
        }
    }

    #[test]
    fn solve_attack_hits_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sx: Vec<f64> = (0..400).map(|_| rng.random_range(2.0..30.0)).collect();
        let phi = vec![1.0; 400];
        let sw = vec![2.5; 400];
        let l = solve_attack(&sx, &phi, &sw, 30.0).unwrap();
        let p = ChannelParams::from_allocation(sx.clone(), phi.clone(), sw.clone()).unwrap().with_attack(l);
        assert!((p.distortion_attack() / 30.0 - 1.0).abs() < 1e-6);
        let floor = p.distortion_embed();
        assert!(solve_attack(&sx, &phi, &sw, floor * 0.99).is_err());
    }
}
