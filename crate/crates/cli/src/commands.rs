use std::io::Write;
use std::path::Path;

use sidemark::bench::{
    default_n, derive_seed, embed_for_mode, extract_for_mode, measure_ebn0, random_message, run_sweep, theory_ebn0,
    to_db, AwgnPreset, CancelMode, EbN0Sample, SweepAttack, SweepRow, SWEEP_CSV_HEADER, SWEEP_CSV_VERSION,
};
use sidemark::channel::{awgn, jpeg_surrogate, optimal_attack};
use sidemark::dp_codebook::CodebookSpec;
use sidemark::media::{ber, d_xy, dwt3, read_pgm, wpsnr_from_distortion, MediaPlane};
use sidemark::optimizer::{solve_attack, ChannelParams};
use sidemark::spread::{beta_perceptual, forward_received, gen_carriers, isi_energy, subspace_energies};
use sidemark::watermarker::{embed, embed_informed, extract_plain, EmbedConfig, EmbedOutcome, Genie};

use crate::args::{AttackArgs, AttackKind, EmbedArgs, ExtractArgs, HostArgs, SolveArgs, SweepArgs};
use crate::failure::{CliResult, Failure};
use crate::pipeline::{
    bits_to_hex, build_config, hex_to_bits, host_from_plane, load_host, parse_rate, read_signal, write_raw,
    write_signal, Design, Host,
};
use crate::sidecar::{default_path, AttackRecord, GenieRecord, HostSource, Sidecar};

const HOST_TAG: u64 = 1;
const MESSAGE_TAG: u64 = 2;
const CARRIER_TAG: u64 = 3;

fn report(out: &mut impl Write, key: &str, value: impl std::fmt::Display) -> CliResult<()> {
    writeln!(out, "{key} = {value}")?;
    Ok(())
}

fn host_source(args: &HostArgs, seed: u64) -> CliResult<HostSource> {
    match (&args.input, args.synthetic) {
        (Some(path), None) => {
            let plane = read_pgm(path)?;
            let path = std::fs::canonicalize(path)?;
            Ok(HostSource::Image { path, width: plane.width(), height: plane.height() })
        }
        (None, Some(m)) => Ok(HostSource::Synthetic {
            m,
            sigma_x: args.sigma_x,
            seed: derive_seed(seed, HOST_TAG),
        }),
        _ => Err(Failure::config("give exactly one of --input or --synthetic")),
    }
}

fn design_of(sc: &Sidecar) -> Design {
    Design {
        k: sc.k,
        dxy: sc.dxy,
        dxyp: sc.dxyp,
        carrier_seed: sc.carrier_seed,
        carriers: sc.carriers,
    }
}

fn check_codebook(sc: &Sidecar) -> CliResult<CodebookSpec> {
    if sc.k == 0 || sc.n != default_n(sc.k) {
        return Err(Failure::config(format!(
            "sidecar mismatch: n = {} does not belong to k = {}",
            sc.n, sc.k
        )));
    }
    let spec = CodebookSpec::new(sc.k, sc.i, sc.n)
        .map_err(|e| Failure::config(format!("sidecar mismatch: {e}")))?;
    if spec.padding() != sc.padding {
        return Err(Failure::config("sidecar mismatch: padding"));
    }
    Ok(spec)
}

/// Rebuild the embedder's configuration from the sidecar and check it
/// against what was recorded.
fn rebuild(sc: &Sidecar, host: &Host) -> CliResult<EmbedConfig> {
    let spec = check_codebook(sc)?;
    let config = build_config(host, &design_of(sc))?;
    if config.spec.index_bits() != spec.index_bits() {
        return Err(Failure::config(format!(
            "sidecar mismatch: i = {} but the host gives {}",
            sc.i,
            config.spec.index_bits()
        )));
    }
    if let Some(g) = sc.genie {
        if ((config.p - g.p) / g.p).abs() > 1e-9 {
            return Err(Failure::config(format!("sidecar mismatch: P = {} but the host gives {}", g.p, config.p)));
        }
    }
    Ok(config)
}

pub fn cmd_embed(args: &EmbedArgs, out: &mut impl Write) -> CliResult<()> {
    parse_rate(&args.rate)?;
    let src = host_source(&args.host, args.seed)?;
    let host = load_host(&src)?;
    let design = Design {
        k: args.k,
        dxy: args.dxy,
        dxyp: args.dxyp,
        carrier_seed: derive_seed(args.seed, CARRIER_TAG),
        carriers: args.carriers,
    };
    let config = build_config(&host, &design)?;
    let message = match &args.message_hex {
        Some(h) => hex_to_bits(h, args.k)?,
        None => random_message(args.k, derive_seed(args.seed, MESSAGE_TAG)),
    };
    let marked = embed_for_mode(&host.x, &message, &config, args.cancel)?;
    let seen = write_signal(&args.out, &marked.marked, &host)?;
    let dist = d_xy(&host.x, &seen, &host.phi)?;
    let sidecar = Sidecar {
        host: src,
        seed: args.seed,
        k: args.k,
        i: config.spec.index_bits(),
        n: config.spec.n(),
        padding: config.spec.padding(),
        carrier_seed: design.carrier_seed,
        carriers: args.carriers,
        cancel: args.cancel,
        dxy: args.dxy,
        dxyp: args.dxyp,
        genie: (!args.blind).then_some(GenieRecord {
            lambda: config.params.lambda,
            chi: config.params.chi,
            p: config.p,
        }),
        message: bits_to_hex(&message),
        attack: AttackRecord::None,
    };
    let sidecar_path = args.sidecar.clone().unwrap_or_else(|| default_path(&args.out));
    sidecar.write(&sidecar_path)?;
    report(out, "message", &sidecar.message)?;
    report(out, "k", config.spec.k())?;
    report(out, "i", config.spec.index_bits())?;
    report(out, "n", config.spec.n())?;
    report(out, "padding", config.spec.padding())?;
    report(out, "d_xy", format!("{dist:.6}"))?;
    report(out, "wpsnr_db", format!("{:.3}", wpsnr_from_distortion(dist)))?;
    report(out, "iterations", marked.iterations)?;
    report(out, "converged", marked.converged)?;
    report(out, "sidecar", sidecar_path.display())?;
    Ok(())
}

/// Correlator amplitude `A = y·û/n` and `A²/var(y - A·û)` in dB.
fn correlator_snr_db(y: &[f64], u: &[f64]) -> f64 {
    let n = y.len() as f64;
    let a = y.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / n;
    let r: Vec<f64> = y.iter().zip(u).map(|(y, u)| y - a * u).collect();
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    to_db(a * a / var)
}

/// Gain between the unmarked host and what the receiver holds.
fn received_gain(sc: &Sidecar, config: &EmbedConfig, host: &Host) -> CliResult<Vec<f64>> {
    match sc.attack {
        AttackRecord::Optimal { level, .. } => {
            let lambda = solve_attack(&host.sigma_x, &host.phi, &config.params.sigma_w, level)?;
            let p = ChannelParams::from_allocation(host.sigma_x.clone(), host.phi.clone(), config.params.sigma_w.clone())?
                .with_attack(lambda);
            Ok(p.gamma)
        }
        _ => Ok(config.params.gamma_w.clone()),
    }
}

pub fn cmd_extract(args: &ExtractArgs, out: &mut impl Write) -> CliResult<()> {
    let sidecar_path = args.sidecar.clone().unwrap_or_else(|| default_path(&args.input));
    let sc = Sidecar::read(&sidecar_path)?;
    let spec = check_codebook(&sc)?;
    let (received, plane) = read_signal(&args.input, &sc.host)?;
    let blind = args.blind || sc.genie.is_none();
    let mode = args.cancel.unwrap_or(sc.cancel);
    let (matched, y_st, iterations) = if blind {
        let beta = match &plane {
            Some(p) => {
                let h = host_from_plane(p)?;
                beta_perceptual(&h.phi, &h.sigma_x)?
            }
            None => beta_perceptual(&vec![1.0; received.len()], &vec![1.0; received.len()])?,
        };
        let carriers = gen_carriers(sc.carrier_seed, received.len(), sc.n, sc.carriers)?;
        let matched = extract_plain(&received, &beta, &spec, &carriers)?;
        (matched, forward_received(&received, &beta, &carriers)?, 0)
    } else {
        let host = load_host(&sc.host)?;
        let config = rebuild(&sc, &host)?;
        let genie = Genie {
            sigma_w: config.params.sigma_w.clone(),
            gamma: received_gain(&sc, &config, &host)?,
            beta: config.beta.clone(),
            p: config.p,
        };
        let ext = extract_for_mode(&received, &genie, &config.spec, &config, mode)?;
        (ext.matched, ext.y_st, ext.iterations)
    };
    let hex = bits_to_hex(&matched.message);
    report(out, "message", &hex)?;
    if let Ok(truth) = hex_to_bits(&sc.message, sc.k) {
        report(out, "ber", format!("{:.6}", ber(&matched.message, &truth)?))?;
    }
    report(out, "snr_db", format!("{:.4}", correlator_snr_db(&y_st, &matched.codeword)))?;
    report(out, "cancel", if blind { "blind".to_string() } else { mode.to_string() })?;
    report(out, "iterations", iterations)?;
    Ok(())
}

pub fn cmd_attack(args: &AttackArgs, out: &mut impl Write) -> CliResult<()> {
    let sidecar_path = args.sidecar.clone().unwrap_or_else(|| default_path(&args.input));
    let sc = Sidecar::read(&sidecar_path)?;
    if sc.attack != AttackRecord::None {
        return Err(Failure::config("signal was already attacked; attack the marked signal instead"));
    }
    let (signal, plane) = read_signal(&args.input, &sc.host)?;
    let host = load_host(&sc.host)?;
    let level = || args.level.ok_or_else(|| Failure::config("this attack needs --level"));
    let (attacked, record) = match args.attack {
        AttackKind::Awgn => {
            let level = level()?;
            let record = AttackRecord::Awgn { level, seed: args.seed };
            let seen = match &plane {
                // The transform is orthonormal, so pixel noise has the same
                // power in the coefficient domain.
                Some(p) => {
                    let noisy = MediaPlane::from_f64(p.width(), p.height(), &awgn(&p.to_f64(), level, args.seed)?)?;
                    sidemark::media::write_pgm(&noisy, &args.out)?;
                    dwt3(&noisy.to_f64(), noisy.width(), noisy.height())?
                }
                None => {
                    let v = awgn(&signal, level, args.seed)?;
                    write_raw(&args.out, &v)?;
                    v
                }
            };
            (seen, record)
        }
        AttackKind::Jpeg => {
            let quality = args.quality.ok_or_else(|| Failure::config("jpeg needs --quality"))?;
            let p = plane.as_ref().ok_or_else(|| Failure::config("jpeg applies to image hosts only"))?;
            let compressed = jpeg_surrogate(p, quality)?;
            sidemark::media::write_pgm(&compressed, &args.out)?;
            let seen = dwt3(&compressed.to_f64(), compressed.width(), compressed.height())?;
            (seen, AttackRecord::Jpeg { quality })
        }
        AttackKind::Optimal => {
            let level = level()?;
            let config = rebuild(&sc, &host)?;
            let o = optimal_attack(&signal, &host.sigma_x, &host.phi, &config.params.sigma_w, level, args.seed)?;
            let seen = write_signal(&args.out, &o.received, &host)?;
            (seen, AttackRecord::Optimal { level, seed: args.seed })
        }
    };
    let new_sidecar = Sidecar { attack: record, ..sc };
    let new_path = args.sidecar_out.clone().unwrap_or_else(|| default_path(&args.out));
    new_sidecar.write(&new_path)?;
    report(out, "d_xyp", format!("{:.6}", d_xy(&host.x, &attacked, &host.phi)?))?;
    report(out, "sidecar", new_path.display())?;
    Ok(())
}

pub fn cmd_solve(args: &SolveArgs, out: &mut impl Write) -> CliResult<()> {
    parse_rate(&args.rate)?;
    let src = host_source(&args.host, args.seed)?;
    let host = load_host(&src)?;
    let design = Design {
        k: args.k,
        dxy: args.dxy,
        dxyp: args.dxyp,
        carrier_seed: derive_seed(args.seed, CARRIER_TAG),
        carriers: args.carriers,
    };
    let config = build_config(&host, &design)?;
    let p = &config.params;
    let n = config.spec.n();
    let e = subspace_energies(&config.beta, &p.gamma, &p.sigma_x, &p.sigma_z, &p.sigma_w, n)?;
    let isi = isi_energy(&config.beta, &p.gamma, &p.sigma_w, n, config.p)?;
    let (with_isi, orth) = theory_ebn0(&config, e.noise)?;
    report(out, "lambda", format!("{:.6e}", p.lambda))?;
    report(out, "chi", format!("{:.6e}", p.chi))?;
    report(out, "d_xy", format!("{:.6}", p.distortion_embed()))?;
    report(out, "d_xyp", format!("{:.6}", p.distortion_attack()))?;
    report(out, "wpsnr_db", format!("{:.3}", wpsnr_from_distortion(p.distortion_embed())))?;
    report(out, "k", config.spec.k())?;
    report(out, "i", config.spec.index_bits())?;
    report(out, "n", n)?;
    report(out, "padding", config.spec.padding())?;
    report(out, "p", format!("{:.6e}", config.p))?;
    report(out, "q", format!("{:.6e}", e.q))?;
    report(out, "noise", format!("{:.6e}", e.noise))?;
    report(out, "isi", format!("{:.6e}", isi))?;
    report(out, "ebn0_isi_db", format!("{:.4}", to_db(with_isi)))?;
    report(out, "ebn0_orth_db", format!("{:.4}", to_db(orth)))?;
    Ok(())
}

fn parse_levels(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::config(format!("bad sweep level '{s}'")))
        })
        .collect()
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut impl Write) -> CliResult<()> {
    let modes: Vec<CancelMode> = match args.cancel {
        Some(m) => vec![m],
        None => CancelMode::ALL.to_vec(),
    };
    if args.seeds == 0 {
        return Err(Failure::config("--seeds must be at least 1"));
    }
    let seeds: Vec<u64> = (0..args.seeds as u64).map(|j| args.seed.wrapping_add(j)).collect();
    let levels = match &args.levels {
        Some(t) => parse_levels(t)?,
        None if args.host.input.is_none() => AwgnPreset::fig4().levels,
        None => return Err(Failure::config("image sweeps need --levels")),
    };
    if levels.len() < 2 {
        return Err(Failure::config("a sweep needs at least two levels"));
    }
    let rows = match &args.host.input {
        None => {
            let attack = match args.attack {
                AttackKind::Awgn => SweepAttack::Awgn,
                AttackKind::Optimal => SweepAttack::Optimal,
                AttackKind::Jpeg => return Err(Failure::config("jpeg sweeps need an image host (--input)")),
            };
            let preset = if args.fig4 {
                AwgnPreset { levels, seeds, ..AwgnPreset::fig4() }
            } else {
                AwgnPreset {
                    m: args.host.synthetic.unwrap_or(1 << 16),
                    n: default_n(args.k),
                    k: args.k,
                    sigma_x: args.host.sigma_x,
                    sigma_w: args.sigma_w,
                    levels,
                    seeds,
                    carrier_seed: derive_seed(args.seed, CARRIER_TAG),
                }
            };
            let config = preset.config(args.carriers)?;
            run_sweep(&preset, &config, &modes, attack)?
        }
        Some(path) => {
            if args.host.synthetic.is_some() {
                return Err(Failure::config("give exactly one of --input or --synthetic"));
            }
            image_sweep(path, args, &modes, &levels, &seeds)?
        }
    };
    match &args.out {
        Some(path) => {
            let mut f = std::fs::File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            write_csv(&mut f, &rows)?;
        }
        None => write_csv(out, &rows)?,
    }
    Ok(())
}

pub fn write_csv(out: &mut impl Write, rows: &[SweepRow]) -> CliResult<()> {
    writeln!(out, "{SWEEP_CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

struct Marked {
    outcome: EmbedOutcome,
    plane: MediaPlane,
    coeffs: Vec<f64>,
}

#[derive(Default)]
struct Tally {
    ebn0: Vec<EbN0Sample>,
    d_xy: f64,
    d_xyp: f64,
    ber: f64,
    iterations: f64,
    noise: f64,
}

/// Sweep over one image: the game sets the allocation, each seed draws a
/// message, and every level attacks the 8-bit marked image.
fn image_sweep(path: &Path, args: &SweepArgs, modes: &[CancelMode], levels: &[f64], seeds: &[u64]) -> CliResult<Vec<SweepRow>> {
    let host = host_from_plane(&read_pgm(path)?)?;
    let model = host.model.as_ref().expect("image host");
    let design = Design {
        k: args.k,
        dxy: args.dxy,
        dxyp: args.dxyp,
        carrier_seed: derive_seed(args.seed, CARRIER_TAG),
        carriers: args.carriers,
    };
    let config = build_config(&host, &design)?;
    if args.attack == AttackKind::Jpeg && levels.iter().any(|q| q.fract() != 0.0 || !(1.0..=100.0).contains(q)) {
        return Err(Failure::config("jpeg levels are qualities in 1..=100"));
    }
    let beta_sq: Vec<f64> = config.beta.iter().map(|b| b * b).collect();
    let mut tallies: Vec<Vec<Tally>> = levels.iter().map(|_| modes.iter().map(|_| Tally::default()).collect()).collect();
    for &seed in seeds {
        let message = random_message(args.k, derive_seed(seed, MESSAGE_TAG));
        let flavour = |informed: bool| -> CliResult<Option<Marked>> {
            if !modes.iter().any(|m| m.informed_embedding() == informed) {
                return Ok(None);
            }
            let outcome = if informed {
                embed_informed(&host.x, &message, &config)?
            } else {
                embed(&host.x, &message, &config)?
            };
            let plane = model.to_plane(&outcome.marked)?;
            let coeffs = dwt3(&plane.to_f64(), plane.width(), plane.height())?;
            Ok(Some(Marked { outcome, plane, coeffs }))
        };
        let plain = flavour(false)?;
        let informed = flavour(true)?;
        for (li, &level) in levels.iter().enumerate() {
            let attack_seed = derive_seed(seed, 1000 + li as u64);
            for (mi, &mode) in modes.iter().enumerate() {
                let marked = if mode.informed_embedding() { &informed } else { &plain };
                let marked = marked.as_ref().expect("embedded flavour");
                let mut gamma = config.params.gamma_w.clone();
                let received = match args.attack {
                    AttackKind::Awgn => {
                        let noisy = awgn(&marked.plane.to_f64(), level, attack_seed)?;
                        let p = MediaPlane::from_f64(marked.plane.width(), marked.plane.height(), &noisy)?;
                        dwt3(&p.to_f64(), p.width(), p.height())?
                    }
                    AttackKind::Jpeg => {
                        let p = jpeg_surrogate(&marked.plane, level as u8)?;
                        dwt3(&p.to_f64(), p.width(), p.height())?
                    }
                    AttackKind::Optimal => {
                        let o = optimal_attack(&marked.coeffs, &host.sigma_x, &host.phi, &config.params.sigma_w, level, attack_seed)?;
                        gamma = o.params.gamma.clone();
                        let p = model.to_plane(&o.received)?;
                        dwt3(&p.to_f64(), p.width(), p.height())?
                    }
                };
                let genie = Genie {
                    sigma_w: config.params.sigma_w.clone(),
                    gamma,
                    beta: config.beta.clone(),
                    p: config.p,
                };
                let ext = extract_for_mode(&received, &genie, &config.spec, &config, mode)?;
                let t = &mut tallies[li][mi];
                t.ebn0.push(measure_ebn0(&config, &marked.outcome, &ext.y_st, 1.0)?);
                t.d_xy += d_xy(&host.x, &marked.coeffs, &host.phi)?;
                t.d_xyp += d_xy(&host.x, &received, &host.phi)?;
                t.ber += ber(&ext.matched.message, &message)?;
                t.iterations += if mode.informed_embedding() { marked.outcome.iterations } else { ext.iterations } as f64;
                // Empirical subspace noise: what the attack changed,
                // weighted like the correlator weights it.
                t.noise += beta_sq
                    .iter()
                    .zip(&received)
                    .zip(&marked.coeffs)
                    .map(|((b, r), y)| b * (r - y).powi(2))
                    .sum::<f64>();
            }
        }
    }
    let attack = match args.attack {
        AttackKind::Awgn => "awgn",
        AttackKind::Jpeg => "jpeg",
        AttackKind::Optimal => "optimal",
    };
    let c = seeds.len() as f64;
    let mut rows = Vec::new();
    for (li, &level) in levels.iter().enumerate() {
        for (mi, &mode) in modes.iter().enumerate() {
            let t = &tallies[li][mi];
            let (isi, orth) = theory_ebn0(&config, t.noise / c)?;
            rows.push(SweepRow {
                mode,
                carriers: args.carriers,
                attack: attack.to_string(),
                level,
                d_xy: t.d_xy / c,
                d_xyp: t.d_xyp / c,
                ebn0_db: EbN0Sample::pooled(&t.ebn0).db(),
                ebn0_isi_theory_db: to_db(isi),
                ebn0_orth_theory_db: to_db(orth),
                ber: t.ber / c,
                iterations: t.iterations / c,
            });
        }
    }
    Ok(rows)
}
