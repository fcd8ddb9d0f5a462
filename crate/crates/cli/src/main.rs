mod args;

use std::io::Write;
use std::time::Instant;

use clap::Parser;
use num_complex::Complex64;
use serde_json::{json, Value};

use args::{Cli, Command, Format, KArgs, PotentialArgs};
use tbg_core::bands::{
    band_path, pseudospectrum_grid, resolvent_scan_alpha, squeeze_check,
};
use tbg_core::certify::{guarantee, verify_guarantee, CertStatus};
use tbg_core::fourier_ops::Truncation;
use tbg_core::lattice::{complex_from_rect, k_star, KPoint};
use tbg_core::magic::{magic_alphas, resonant_set};
use tbg_core::potential::{bracket_field, PotentialSpec};
use tbg_core::theta::{bloch_recipe, eval_kernel, kernel_vector};
use tbg_core::traces::{richardson_n2, tr_a2_direct, tr_a2_exact, trace_t_power};
use tbg_core::Error;

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NotConverged { .. } | Error::CertificationFailed { .. } => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> i32 {
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("TBG_THREADS")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    faer::set_global_parallelism(faer::Par::rayon(threads));

    let start = Instant::now();
    let result = dispatch(&cli);
    match result {
        Ok((payload_key, payload, config, csv)) => {
            let text = match cli.format {
                Format::Json => {
                    let doc = json!({
                        "meta": {
                            "tool": "tbg",
                            "version": env!("CARGO_PKG_VERSION"),
                            "command": command_name(&cli.command),
                            "seed": cli.seed,
                            "config": config,
                        },
                        payload_key: payload,
                    });
                    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
                    s.push('\n');
                    s
                }
                Format::Csv => {
                    let mut s = format!(
                        "# tool=tbg version={} command={} seed={} config={}\n",
                        env!("CARGO_PKG_VERSION"),
                        command_name(&cli.command),
                        cli.seed,
                        serde_json::to_string(&config).expect("serializable"),
                    );
                    s.push_str(&csv);
                    s
                }
            };
            let wrote = match &cli.out {
                Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string()),
                None => std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| e.to_string()),
            };
            eprintln!("# wall time: {:.3}s", start.elapsed().as_secs_f64());
            match wrote {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error writing output: {e}");
                    2
                }
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Magic { .. } => "magic",
        Command::Bands { .. } => "bands",
        Command::ResolventScan { .. } => "resolvent-scan",
        Command::Pseudospectrum { .. } => "pseudospectrum",
        Command::TraceCheck { .. } => "trace-check",
        Command::Certify { .. } => "certify",
        Command::Eigenfunction { .. } => "eigenfunction",
        Command::SqueezeCheck { .. } => "squeeze-check",
        Command::BracketField { .. } => "bracket-field",
    }
}

fn parse_potential(p: &PotentialArgs) -> Result<PotentialSpec, Error> {
    if let Some(path) = &p.potential_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {path}: {e}")))?;
        return serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("bad potential file: {e}")));
    }
    if p.potential == "std" {
        Ok(PotentialSpec::standard())
    } else if let Some(mu) = p.potential.strip_prefix("mu=") {
        let mu: f64 = mu
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad mu in --potential {}", p.potential)))?;
        Ok(PotentialSpec::mu_family(mu))
    } else {
        Err(Error::InvalidInput(format!(
            "unknown potential preset {:?} (use std, mu=<float>, or --potential-file)",
            p.potential
        )))
    }
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64), Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidInput(format!("{what} must be `a,b`, got {s:?}")));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad number in {what}: {s:?}")))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad number in {what}: {s:?}")))?;
    Ok((a, b))
}

fn parse_colon_list(s: &str, n: usize, what: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != n {
        return Err(Error::InvalidInput(format!(
            "{what} needs {n} colon-separated numbers, got {s:?}"
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad number in {what}: {s:?}")))
        })
        .collect()
}

fn parse_k(k: &KArgs, default: Option<KPoint>) -> Result<KPoint, Error> {
    if let Some(kc) = &k.k_complex {
        let (re, im) = parse_pair(kc, "--k-complex")?;
        return Ok(KPoint::from_complex(Complex64::new(re, im)));
    }
    if let Some(kk) = &k.k {
        let (k1, k2) = parse_pair(kk, "--k")?;
        return Ok(KPoint::from_coords(k1, k2));
    }
    default.ok_or_else(|| Error::InvalidInput("a momentum (--k or --k-complex) is required".into()))
}

type Artifact = (&'static str, Value, Value, String);

fn dispatch(cli: &Cli) -> Result<Artifact, Error> {
    match &cli.command {
        Command::Magic {
            potential,
            k,
            n,
            count,
        } => {
            let spec = parse_potential(potential)?;
            let kp = parse_k(k, Some(KPoint::from_coords(0.5, 0.0)))?;
            let rs = resonant_set(Truncation::new(*n), &kp, &spec, *count)?;
            let (k1, k2) = kp.coords_or_computed();
            let config = json!({
                "potential": spec, "N": n, "k": [k1, k2], "count": count,
                "source": rs.source,
            });
            let payload = json!({
                "alphas": rs.entries,
                "N": rs.n_used,
                "k": [k1, k2],
                "magic": magic_alphas(&rs, rs.magic_sublist().len().min(13)).ok(),
            });
            let csv = rs.to_csv();
            Ok(("resonant_set", payload, config, csv))
        }
        Command::Bands {
            potential,
            k,
            alpha,
            n,
            count,
            kpath,
        } => {
            let spec = parse_potential(potential)?;
            let trunc = Truncation::new(*n);
            let path = if k.k.is_some() || k.k_complex.is_some() {
                vec![parse_k(k, None)?]
            } else {
                let p = parse_colon_list(kpath, 3, "--kpath")?;
                let steps = p[2] as usize;
                if steps < 1 {
                    return Err(Error::InvalidInput("kpath needs >= 1 steps".into()));
                }
                (0..steps)
                    .map(|i| {
                        let t = if steps == 1 {
                            p[0]
                        } else {
                            p[0] + (p[1] - p[0]) * i as f64 / (steps - 1) as f64
                        };
                        KPoint::from_complex(tbg_core::lattice::omega() / tbg_core::lattice::SQRT_3 * t)
                    })
                    .collect()
            };
            let table = band_path(trunc, &path, *alpha, *count, &spec)?;
            let config = json!({
                "potential": spec, "N": n, "alpha": alpha, "count": count,
                "kpath": kpath,
            });
            let csv = table.to_csv();
            Ok(("bands", serde_json::to_value(&table).unwrap(), config, csv))
        }
        Command::ResolventScan {
            potential,
            k,
            alpha_range,
            n,
        } => {
            let spec = parse_potential(potential)?;
            let kp = parse_k(k, Some(k_star()))?;
            let r = parse_colon_list(alpha_range, 3, "--alpha-range")?;
            let scan = resolvent_scan_alpha(&kp, r[0], r[1], r[2], Truncation::new(*n), &spec)?;
            let (k1, k2) = kp.coords_or_computed();
            let config = json!({
                "potential": spec, "N": n, "k": [k1, k2], "alpha_range": alpha_range,
            });
            let mut csv = String::from("alpha,log_resolvent_norm\n");
            for (a, l) in &scan {
                csv.push_str(&format!("{a:.15e},{l:.15e}\n"));
            }
            Ok((
                "resolvent_scan",
                json!(scan
                    .iter()
                    .map(|(a, l)| json!({"alpha": a, "log_norm": l}))
                    .collect::<Vec<_>>()),
                config,
                csv,
            ))
        }
        Command::Pseudospectrum {
            potential,
            alpha,
            window,
            resolution,
            levels,
            n,
        } => {
            let spec = parse_potential(potential)?;
            let w = parse_colon_list(window, 4, "--window")?;
            let grid = pseudospectrum_grid(
                *alpha,
                (w[0], w[1], w[2], w[3]),
                *resolution,
                Truncation::new(*n),
                *levels,
                &spec,
            )?;
            let config = json!({
                "potential": spec, "N": n, "alpha": alpha, "window": window,
                "resolution": resolution, "levels": levels,
            });
            let mut csv = String::from("k_re,k_im,lognorm,marked\n");
            for (re, im, ln, marked) in &grid.points {
                csv.push_str(&format!("{re:.15e},{im:.15e},{ln:.15e},{}\n", *marked as u8));
            }
            Ok((
                "pseudospectrum",
                serde_json::to_value(&grid).unwrap(),
                config,
                csv,
            ))
        }
        Command::TraceCheck { power, n, radius } => {
            let kp = KPoint::from_coords(0.5, 0.0);
            let spec = PotentialSpec::standard();
            let exact = match power {
                4 => 72.0 * std::f64::consts::PI / tbg_core::lattice::SQRT_3,
                8 => 740.0 * std::f64::consts::PI / tbg_core::lattice::SQRT_3,
                _ => return Err(Error::InvalidInput("power must be 4 or 8".into())),
            };
            let n2 = 2 * n;
            let t1 = trace_t_power(Truncation::new(*n), &kp, *power, &spec)?;
            let t2 = trace_t_power(Truncation::new(n2), &kp, *power, &spec)?;
            let extrap = richardson_n2(*n, t1, n2, t2);
            let rel = (extrap.re - exact).abs() / exact;
            let a2 = (*power == 4).then(|| {
                let direct = tr_a2_direct(*radius).ok();
                json!({
                    "tr_a2_exact": tr_a2_exact(),
                    "tr_a2_direct": direct.map(|d| [d.re, d.im]),
                })
            });
            let config = json!({"power": power, "N": n, "N2": n2, "radius": radius});
            let payload = json!({
                "exact": exact,
                "truncated": {"N": n, "value": [t1.re, t1.im]},
                "truncated2": {"N": n2, "value": [t2.re, t2.im]},
                "extrapolated": [extrap.re, extrap.im],
                "relative_error": rel,
                "a2_checks": a2,
            });
            let mut csv = String::from("quantity,value\n");
            csv.push_str(&format!("exact,{exact:.15e}\n"));
            csv.push_str(&format!("truncated_N{n},{:.15e}\n", t1.re));
            csv.push_str(&format!("truncated_N{n2},{:.15e}\n", t2.re));
            csv.push_str(&format!("extrapolated,{:.15e}\n", extrap.re));
            csv.push_str(&format!("relative_error,{rel:.6e}\n"));
            Ok(("trace_check", payload, config, csv))
        }
        Command::Certify {
            delta,
            target,
            probe_n,
            verify,
        } => {
            let cert = guarantee(*delta, *target, *probe_n)?;
            let cert = if *verify { verify_guarantee(&cert)? } else { cert };
            if *verify && cert.status != CertStatus::Certified {
                return Err(Error::CertificationFailed {
                    inequality: "verification did not certify".into(),
                    lhs: 1.0,
                    rhs: 1.0,
                });
            }
            let config = json!({
                "delta": delta, "target": target, "probe_n": probe_n, "verify": verify,
            });
            let payload = serde_json::to_value(&cert).unwrap();
            let mut csv = String::from("field,value\n");
            csv.push_str(&format!("n_required,{}\n", cert.n_required));
            csv.push_str(&format!("epsilon,{:.15e}\n", cert.epsilon));
            csv.push_str(&format!("c_n_eps,{:.15e}\n", cert.c_n_eps));
            csv.push_str(&format!("status,{:?}\n", cert.status));
            Ok(("certificate", payload, config, csv))
        }
        Command::Eigenfunction { alpha, n, k, grid } => {
            if *grid < 2 {
                return Err(Error::InvalidInput("grid must be >= 2".into()));
            }
            let u = kernel_vector(Truncation::new(*n), *alpha)?;
            if u.is_pseudospectrally_delicate() {
                eprintln!(
                    "warning: near a resonant alpha pseudospectral effects make \
                     the exact eigenfunction difficult to compute (|W| = {:.2e})",
                    u.wronskian_probe
                );
            }
            let bloch = match (&k.k, &k.k_complex) {
                (None, None) => None,
                _ => {
                    let kp = parse_k(k, None)?;
                    Some(bloch_recipe(&u, &kp)?)
                }
            };
            let mut csv = String::from("x1,x2,log_abs_u\n");
            let mut rows = Vec::new();
            for i in 0..*grid {
                for j in 0..*grid {
                    let y1 = std::f64::consts::TAU * i as f64 / *grid as f64;
                    let y2 = std::f64::consts::TAU * j as f64 / *grid as f64;
                    let z = complex_from_rect(y1, y2);
                    let (p1, p2) = match &bloch {
                        None => eval_kernel(&u, z),
                        Some(b) => b.eval(z)?,
                    };
                    let mag = (p1.norm_sqr() + p2.norm_sqr()).sqrt().max(1e-300);
                    csv.push_str(&format!("{:.15e},{:.15e},{:.15e}\n", z.re, z.im, mag.ln()));
                    rows.push(json!([z.re, z.im, mag.ln()]));
                }
            }
            let config = json!({
                "alpha": alpha, "N": n, "grid": grid,
                "k": bloch.as_ref().map(|b| b.kpoint.coords_or_computed()),
            });
            let payload = json!({
                "sigma_min": u.sigma_min,
                "bloch_residual": bloch.as_ref().map(|b| b.residual),
                "points": rows,
            });
            Ok(("eigenfunction", payload, config, csv))
        }
        Command::SqueezeCheck {
            potential,
            k,
            alphas,
            n,
            c0,
            c1,
        } => {
            let spec = parse_potential(potential)?;
            let kp = parse_k(k, Some(k_star()))?;
            let list: Result<Vec<f64>, Error> = alphas
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad alpha list {alphas:?}")))
                })
                .collect();
            let report = squeeze_check(&kp, &list?, Truncation::new(*n), *c0, *c1, &spec)?;
            let (k1, k2) = kp.coords_or_computed();
            let config = json!({
                "potential": spec, "N": n, "k": [k1, k2], "alphas": alphas,
                "c0": c0, "c1": c1,
            });
            let mut csv = String::from("alpha,E0,bound,pass\n");
            for r in &report.rows {
                csv.push_str(&format!(
                    "{:.15e},{:.15e},{:.15e},{}\n",
                    r.alpha, r.e0, r.bound, r.pass as u8
                ));
            }
            Ok((
                "squeeze_check",
                serde_json::to_value(&report).unwrap(),
                config,
                csv,
            ))
        }
        Command::BracketField {
            potential,
            window,
            grid,
        } => {
            let spec = parse_potential(potential)?;
            if *grid < 2 {
                return Err(Error::InvalidInput("grid must be >= 2".into()));
            }
            let w = parse_colon_list(window, 4, "--window")?;
            let mut csv = String::from("x1,x2,field\n");
            let mut rows = Vec::new();
            for i in 0..*grid {
                for j in 0..*grid {
                    let x = w[0] + (w[1] - w[0]) * i as f64 / (*grid - 1) as f64;
                    let y = w[2] + (w[3] - w[2]) * j as f64 / (*grid - 1) as f64;
                    let v = bracket_field(&spec, Complex64::new(x, y));
                    csv.push_str(&format!("{x:.15e},{y:.15e},{v:.15e}\n"));
                    rows.push(json!([x, y, v]));
                }
            }
            let config = json!({"potential": spec, "window": window, "grid": grid});
            Ok(("bracket_field", json!(rows), config, csv))
        }
    }
}
