//! Informed embedding and extraction in the spread-transform subspace.

use crate::dp_codebook::{nearest_any, nearest_in_subcodebook, CodebookSpec, CodewordMatch};
use crate::error::{check_len, invalid, Result};
use crate::optimizer::ChannelParams;
use crate::spread::{
    embed_spatial, forward_host, forward_received, subspace_energies, watermark_response, CarrierMatrix,
};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Robustness of `v` against codeword `u` for a cone with `tan²θ = tan2`:
/// `tan²θ · a|a| - ‖v⊥‖²` where `a` is the projection of `v` on `u/‖u‖`.
///
/// Positive inside the cone. Equals `(v·û)²(1+tan²θ) - ‖v‖²` whenever
/// `v·u ≥ 0`; the sign of `a` keeps the mirrored cone around `-u` out.
pub fn robustness(v: &[f64], u: &[f64], tan2: f64) -> f64 {
    let un = norm(u);
    let a = dot(v, u) / un;
    let perp2 = (dot(v, v) - a * a).max(0.0);
    tan2 * a * a.abs() - perp2
}

/// Watermark of norm `sqrt(nP)` maximizing [`robustness`] of `x_st + w`.
///
/// The optimum lies in the plane spanned by `x_st` and `u`, so the search is
/// over a single rotation angle: a dense grid, then bisection on the
/// derivative (golden section as fallback) around the best cell.
pub fn max_robust_watermark(x_st: &[f64], u: &[f64], tan2: f64, p: f64) -> Result<Vec<f64>> {
    check_len("codeword", x_st.len(), u.len())?;
    if !(p > 0.0) || !(tan2 > 0.0) || !tan2.is_finite() {
        return invalid(format!("max-robust watermark needs P > 0 and tan²θ in (0, ∞), got P={p}, tan²θ={tan2}"));
    }
    let n = x_st.len();
    let un = norm(u);
    if !(un > 0.0) {
        return invalid("codeword has zero norm");
    }
    let radius = (n as f64 * p).sqrt();
    let uhat: Vec<f64> = u.iter().map(|v| v / un).collect();
    let ax = dot(x_st, &uhat);
    let perp: Vec<f64> = x_st.iter().zip(&uhat).map(|(x, h)| x - ax * h).collect();
    let bx = norm(&perp);
    if bx <= 1e-12 * (norm(x_st) + radius) {
        return Ok(uhat.iter().map(|h| radius * h).collect());
    }
    let e: Vec<f64> = perp.iter().map(|v| v / bx).collect();
    let f = |phi: f64| {
        let a = ax + radius * phi.cos();
        let b = bx + radius * phi.sin();
        tan2 * a * a.abs() - b * b
    };
    const GRID: usize = 4096;
    let step = std::f64::consts::TAU / GRID as f64;
    let best = (0..GRID)
        .map(|k| -std::f64::consts::PI + k as f64 * step)
        .map(|phi| (phi, f(phi)))
        .fold((0.0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let slope = |phi: f64| {
        let a = ax + radius * phi.cos();
        let b = bx + radius * phi.sin();
        -2.0 * radius * (tan2 * a.abs() * phi.sin() + b * phi.cos())
    };
    let (lo, hi) = (best.0 - step, best.0 + step);
    let phi = if slope(lo) > 0.0 && slope(hi) < 0.0 {
        bisect_root(&slope, lo, hi)
    } else {
        golden_max(&f, lo, hi)
    };
    let phi = if f(phi) >= best.1 { phi } else { best.0 };
    let (c, s) = (phi.cos(), phi.sin());
    let mut w: Vec<f64> = uhat.iter().zip(&e).map(|(h, v)| radius * (c * h + s * v)).collect();
    let scale = radius / norm(&w);
    w.iter_mut().for_each(|v| *v *= scale);
    Ok(w)
}

fn bisect_root(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if hi - lo < 1e-14 {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Everything the embedder needs.
#[derive(Debug, Clone)]
pub struct EmbedConfig {
    pub spec: CodebookSpec,
    pub carriers: CarrierMatrix,
    pub params: ChannelParams,
    pub beta: Vec<f64>,
    /// Gain assumed between embedding and the correlator when predicting
    /// the host and interference seen by the receiver.
    pub model_gain: Vec<f64>,
    /// Subspace watermark energy per symbol.
    pub p: f64,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl EmbedConfig {
    /// Config with `P` derived from the parameters, model gain `γ`,
    /// `ε = 1e-3·sqrt(nP)` and an iteration cap of 10.
    pub fn new(spec: CodebookSpec, carriers: CarrierMatrix, params: ChannelParams, beta: Vec<f64>) -> Result<Self> {
        let m = carriers.m();
        check_len("channel parameters", m, params.len())?;
        check_len("beta", m, beta.len())?;
        check_len("carrier columns", spec.n(), carriers.n())?;
        let energies = subspace_energies(
            &beta,
            &params.gamma,
            &params.sigma_x,
            &params.sigma_z,
            &params.sigma_w,
            spec.n(),
        )?;
        if !(energies.p > 0.0) {
            return invalid("watermark carries no energy in the subspace");
        }
        let p = energies.p;
        Ok(Self {
            epsilon: 1e-3 * (spec.n() as f64 * p).sqrt(),
            model_gain: params.gamma.clone(),
            max_iters: 10,
            spec,
            carriers,
            params,
            beta,
            p,
        })
    }

    pub fn with_model_gain(mut self, gain: Vec<f64>) -> Result<Self> {
        check_len("model gain", self.carriers.m(), gain.len())?;
        self.model_gain = gain;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return invalid("epsilon must be positive");
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Result<Self> {
        if max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        self.max_iters = max_iters;
        Ok(self)
    }

    /// Receiver-side parameters matching this embedding with the attack
    /// recorded in `params`.
    pub fn genie(&self) -> Genie {
        Genie {
            sigma_w: self.params.sigma_w.clone(),
            gamma: self.params.gamma.clone(),
            beta: self.beta.clone(),
            p: self.p,
        }
    }
}

/// Result of an embedding.
#[derive(Debug, Clone)]
pub struct EmbedOutcome {
    /// Marked host samples.
    pub marked: Vec<f64>,
    /// Subspace watermark actually embedded, `‖w_st‖ = sqrt(nP)`.
    pub w_st: Vec<f64>,
    /// Final side information (host plus predicted interference).
    pub x_st: Vec<f64>,
    pub codeword: CodewordMatch,
    /// Loop passes after the initial watermark (0 for the plain embedder).
    pub iterations: usize,
    pub converged: bool,
    /// Robustness of each watermark iterate under the final side information.
    pub objective_history: Vec<f64>,
}

fn side_step(x_st: &[f64], message: &[u8], config: &EmbedConfig) -> Result<(CodewordMatch, Vec<f64>, f64)> {
    let cw = nearest_in_subcodebook(x_st, message, &config.spec)?;
    let w = max_robust_watermark(x_st, &cw.codeword, config.spec.tan2_theta(), config.p)?;
    let v: Vec<f64> = x_st.iter().zip(&w).map(|(a, b)| a + b).collect();
    let obj = robustness(&v, &cw.codeword, config.spec.tan2_theta());
    Ok((cw, w, obj))
}

/// Embedding without interference feedback: host projection, sub-codebook
/// search, maximum-robustness watermark.
pub fn embed(x: &[f64], message: &[u8], config: &EmbedConfig) -> Result<EmbedOutcome> {
    check_len("message", config.spec.k(), message.len())?;
    let x_st = forward_host(x, &config.beta, &config.model_gain, &config.carriers)?;
    let (codeword, w_st, obj) = side_step(&x_st, message, config)?;
    let marked = spatial(x, &w_st, config)?;
    Ok(EmbedOutcome {
        marked,
        w_st,
        x_st,
        codeword,
        iterations: 0,
        converged: true,
        objective_history: vec![obj],
    })
}

fn spatial(x: &[f64], w_st: &[f64], config: &EmbedConfig) -> Result<Vec<f64>> {
    embed_spatial(
        x,
        w_st,
        &config.params.sigma_w,
        &config.params.gamma_w,
        &config.carriers,
        config.p,
    )
}

/// Embedding that treats its own inter-symbol interference as side
/// information and iterates until the watermark moves less than `ε`.
///
/// Hitting the iteration cap is reported through `converged`, not an error.
/// The objective history scores every watermark iterate against the final
/// side information and codeword.
pub fn embed_informed(x: &[f64], message: &[u8], config: &EmbedConfig) -> Result<EmbedOutcome> {
    check_len("message", config.spec.k(), message.len())?;
    let host_st = forward_host(x, &config.beta, &config.model_gain, &config.carriers)?;
    let (mut codeword, mut w_next, _) = side_step(&host_st, message, config)?;
    let mut iterates = vec![w_next.clone()];
    let mut x_st = host_st.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        iterations += 1;
        let w = w_next;
        let resp = watermark_response(
            &config.beta,
            &config.model_gain,
            &config.params.sigma_w,
            config.p,
            &w,
            &config.carriers,
        )?;
        x_st = host_st.iter().zip(&resp.isi).map(|(h, i)| h + i).collect();
        let (cw, wt, _) = side_step(&x_st, message, config)?;
        codeword = cw;
        w_next = wt;
        iterates.push(w_next.clone());
        let moved: f64 = w_next.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if moved <= config.epsilon {
            converged = true;
            break;
        }
    }
    let tan2 = config.spec.tan2_theta();
    let history = iterates
        .iter()
        .map(|w| {
            let v: Vec<f64> = x_st.iter().zip(w).map(|(a, b)| a + b).collect();
            robustness(&v, &codeword.codeword, tan2)
        })
        .collect();
    let marked = spatial(x, &w_next, config)?;
    Ok(EmbedOutcome {
        marked,
        w_st: w_next,
        x_st,
        codeword,
        iterations,
        converged,
        objective_history: history,
    })
}

/// Correlate the received signal and decode the nearest codeword over the
/// full codebook.
pub fn extract_plain(received: &[f64], beta: &[f64], spec: &CodebookSpec, carriers: &CarrierMatrix) -> Result<CodewordMatch> {
    let y_st = forward_received(received, beta, carriers)?;
    nearest_any(&y_st, spec)
}

/// Embedding and attack parameters handed to the receiver by the harness.
#[derive(Debug, Clone, PartialEq)]
pub struct Genie {
    pub sigma_w: Vec<f64>,
    /// Total gain between the unmarked host and the received signal.
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub p: f64,
}

/// Result of interference-cancelling extraction.
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub matched: CodewordMatch,
    /// Received subspace vector after the final cancellation.
    pub y_st: Vec<f64>,
    pub iterations: usize,
    /// False when the loop stopped on a codeword cycle or the cap.
    pub converged: bool,
}

const CANCEL_CAP: usize = 10;

/// Decoder-side interference cancellation: decode, rebuild the crosstalk
/// of `sqrt(P)·u`, subtract it from the correlator output, decode again,
/// until the codeword stops changing.
pub fn extract_isi_cancel(
    received: &[f64],
    genie: &Genie,
    spec: &CodebookSpec,
    carriers: &CarrierMatrix,
) -> Result<DecodeOutcome> {
    check_len("sigma_w", carriers.m(), genie.sigma_w.len())?;
    check_len("gamma", carriers.m(), genie.gamma.len())?;
    if !(genie.p > 0.0) {
        return invalid("genie P must be positive");
    }
    let y0 = forward_received(received, &genie.beta, carriers)?;
    let mut current = nearest_any(&y0, spec)?;
    let mut current_y = y0.clone();
    let mut tried: Vec<(CodewordMatch, Vec<f64>)> = Vec::new();
    let amp = genie.p.sqrt();
    for it in 1..=CANCEL_CAP {
        let guess: Vec<f64> = current.codeword.iter().map(|u| amp * u).collect();
        let resp = watermark_response(&genie.beta, &genie.gamma, &genie.sigma_w, genie.p, &guess, carriers)?;
        let y_st: Vec<f64> = y0.iter().zip(&resp.isi).map(|(y, i)| y - i).collect();
        let next = nearest_any(&y_st, spec)?;
        if next.codeword == current.codeword {
            return Ok(DecodeOutcome {
                matched: next,
                y_st,
                iterations: it,
                converged: true,
            });
        }
        let cycled = tried.iter().any(|(m, _)| m.codeword == next.codeword);
        tried.push((current, current_y));
        current = next;
        current_y = y_st;
        if cycled {
            break;
        }
    }
    let iterations = tried.len();
    tried.push((current, current_y));
    let (matched, y_st) = tried
        .into_iter()
        .fold(None::<(CodewordMatch, Vec<f64>)>, |best, c| match best {
            Some(b) if b.0.metric >= c.0.metric => Some(b),
            _ => Some(c),
        })
        .expect("at least one iterate");
    Ok(DecodeOutcome {
        matched,
        y_st,
        iterations,
        converged: false,
    })
}
