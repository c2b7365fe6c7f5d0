//! `lelek`: reproducible runs of the Lelek fan combinatorics.
//!
//! Exit codes: 0 success or a true decision, 1 a checked property failed or
//! a decision came out false, 2 usage or input errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use lelek_core::conjugacy::{fplus_witness, refute, SRelation};
use lelek_core::fraisse::verify_family;
use lelek_core::geometry::{cells, cover_cantor, endpoint_gaps, render};
use lelek_core::homeo::{ensure_star, factorize, FactorInput, HomeoError};
use lelek_core::morphisms::FanMorphism;
use lelek_core::sequence::{build, envelope};
use lelek_core::structures::Structure;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "lelek", version, about = "Finite approximations of the Lelek fan")]
struct Cli {
    /// Progress messages on standard error.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct BuildArgs {
    /// Number of bonds in the sequence.
    #[arg(long, default_value_t = 6)]
    depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustive JPP and amalgamation checks on small fans.
    VerifyFamily {
        #[arg(long, default_value_t = 2)]
        max_height: usize,
        #[arg(long, default_value_t = 2)]
        max_width: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds and verifies a sequence and its envelope.
    Build {
        #[command(flatten)]
        build: BuildArgs,
        /// Sequence JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Envelope JSON.
        #[arg(long)]
        envelope: Option<PathBuf>,
    },
    /// SVG of the approximation at one level.
    Render {
        #[command(flatten)]
        build: BuildArgs,
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cell assignment of one envelope level.
    Cells {
        #[command(flatten)]
        build: BuildArgs,
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Table of endpoint_gap(n, m) for m = n..=depth.
    Gap {
        #[command(flatten)]
        build: BuildArgs,
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cover of the Cantor fan with its (C1)-(C4) report.
    Cover {
        /// Number of height intervals.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Number of Cantor clopens.
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Factor chain between two epimorphisms.
    Factorize {
        /// `{"beta0": ..., "beta": ...}`.
        #[arg(long, conflicts_with_all = ["beta0", "beta"])]
        chain: Option<PathBuf>,
        #[arg(long, requires = "beta")]
        beta0: Option<PathBuf>,
        #[arg(long, requires = "beta0")]
        beta: Option<PathBuf>,
        /// Duplicate carrier branches first so that (*) holds.
        #[arg(long)]
        ensure_star: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decides membership in F⁺ and writes a witness.
    Fplus {
        #[arg(long)]
        check: PathBuf,
        /// Witness path; defaults to `<input>.witness.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A run outcome: the report printed on stdout and whether it is a success.
struct Outcome {
    ok: bool,
    report: Value,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let text = serde_json::to_string_pretty(&out.report).unwrap();
            // A closed pipe downstream is not an error of ours.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn log(cli: &Cli, msg: impl AsRef<str>) {
    if cli.verbose > 0 {
        eprintln!("{}", msg.as_ref());
    }
}

/// Writes through a temporary sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().context("output path has no file name")?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn distinct(inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    let all: Vec<&Path> = inputs.iter().chain(outputs).copied().collect();
    for (i, a) in all.iter().enumerate() {
        if all[i + 1..].contains(a) {
            bail!("path {} is used twice", a.display());
        }
    }
    Ok(())
}

fn report(command: &str, ok: bool, body: Value) -> Outcome {
    let mut report = json!({ "schema_version": SCHEMA_VERSION, "command": command, "ok": ok });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
        dst.extend(src);
    }
    Outcome { ok, report }
}

fn level_or_depth(b: &BuildArgs, level: Option<usize>) -> Result<usize> {
    let level = level.unwrap_or(b.depth);
    if level > b.depth {
        bail!("level {level} exceeds depth {}", b.depth);
    }
    Ok(level)
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::VerifyFamily { max_height, max_width, out } => {
            log(cli, format!("checking fans up to F({max_height},{max_width})"));
            let r = verify_family(*max_height, *max_width);
            if let Some(path) = out {
                write_json(path, &r)?;
            }
            Ok(report(
                "verify-family",
                r.passed(),
                json!({
                    "fans": r.fans,
                    "jpp_checked": r.jpp_checked,
                    "jpp_failures": r.jpp_failures.len(),
                    "amalgams_checked": r.amalgams_checked,
                    "amalgam_failures": r.amalgam_failures.len(),
                }),
            ))
        }
        Command::Build { build: b, out, envelope: env_out } => {
            let outs: Vec<&Path> = [out, env_out].into_iter().flatten().map(PathBuf::as_path).collect();
            distinct(&[], &outs)?;
            log(cli, format!("building depth {} seed {}", b.depth, b.seed));
            let seq = build(b.depth, b.seed);
            let seq_report = seq.verify();
            log(cli, "building envelope");
            let env = envelope(&seq);
            let env_report = env.verify();
            if let Some(path) = out {
                write_json(path, &seq)?;
            }
            if let Some(path) = env_out {
                write_json(path, &env)?;
            }
            let levels: Vec<Value> = (0..=seq.depth())
                .map(|n| {
                    let t = seq.level(n);
                    json!({ "level": n, "height": t.height(), "width": t.width(), "nodes": t.len(),
                            "envelope_nodes": env.level(n).len() })
                })
                .collect();
            let ok = seq_report.passed() && env_report.passed();
            Ok(report(
                "build",
                ok,
                json!({
                    "depth": b.depth,
                    "seed": b.seed,
                    "levels": levels,
                    "sequence_violations": seq_report.violations,
                    "certificates_checked": seq_report.certificates_checked,
                    "envelope_violations": env_report.violations,
                }),
            ))
        }
        Command::Render { build: b, level, out } => {
            let n = level_or_depth(b, *level)?;
            let env = envelope(&build(b.depth, b.seed));
            let svg = render(&env, n)?;
            write_atomic(out, svg.as_bytes())?;
            Ok(report("render", true, json!({ "level": n, "bytes": svg.len(), "out": out })))
        }
        Command::Cells { build: b, level, out } => {
            let n = level_or_depth(b, *level)?;
            let env = envelope(&build(b.depth, b.seed));
            let c = cells(&env, n)?;
            write_json(out, &c.to_doc())?;
            Ok(report(
                "cells",
                c.check_tiling().is_empty(),
                json!({ "level": n, "nodes": c.spider().len(), "mesh": c.mesh(), "out": out }),
            ))
        }
        Command::Gap { build: b, level, out } => {
            if *level > b.depth {
                bail!("level {level} exceeds depth {}", b.depth);
            }
            let env = envelope(&build(b.depth, b.seed));
            let gaps = endpoint_gaps(&env, *level)?;
            let table: Vec<Value> =
                gaps.iter().enumerate().map(|(k, g)| json!({ "m": level + k, "gap": g })).collect();
            let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
            if let Some(path) = out {
                write_json(path, &table)?;
            }
            Ok(report("gap", monotone, json!({ "n": level, "table": table })))
        }
        Command::Cover { n, m, out } => {
            let cover = cover_cantor(*n, *m)?;
            let r = cover.verify();
            if let Some(path) = out {
                write_json(path, &cover)?;
            }
            Ok(report(
                "cover",
                r.passed(),
                json!({ "n": n, "m": m, "nodes": cover.a.len(), "epsilon": cover.epsilon.to_string(), "check": r }),
            ))
        }
        Command::Factorize { chain, beta0, beta, ensure_star: star, out } => {
            let input: FactorInput = match (chain, beta0, beta) {
                (Some(path), _, _) => {
                    distinct(&[path], &[out])?;
                    read_json(path)?
                }
                (None, Some(a), Some(b)) => {
                    distinct(&[a, b], &[out])?;
                    FactorInput { beta0: read_json::<FanMorphism>(a)?, beta: read_json::<FanMorphism>(b)? }
                }
                _ => bail!("give --chain, or both --beta0 and --beta"),
            };
            let (beta0, beta) = if *star {
                let k = input.beta0.target().width();
                match ensure_star(&input.beta0, k) {
                    Ok((_, lift, lifted)) => (lifted, input.beta.after(&lift)?),
                    Err(e) => return Ok(report("factorize", false, json!({ "error": e.to_string() }))),
                }
            } else {
                (input.beta0, input.beta)
            };
            match factorize(&beta0, &beta) {
                Ok(fc) => {
                    let check = fc.verify(&beta0, &beta);
                    write_json(out, &fc)?;
                    Ok(report("factorize", check.passed(), json!({ "check": check, "out": out })))
                }
                Err(e @ (HomeoError::Mismatch | HomeoError::Morphism(_))) => Err(e.into()),
                Err(e) => Ok(report("factorize", false, json!({ "error": e.to_string() }))),
            }
        }
        Command::Fplus { check, out } => {
            let out = out.clone().unwrap_or_else(|| {
                let stem = check.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                check.with_file_name(format!("{stem}.witness.json"))
            });
            distinct(&[check], &[&out])?;
            let rel: SRelation = read_json(check)?;
            match refute(&rel) {
                None => {
                    let w = fplus_witness(&rel)?;
                    let verified = w.verify(&rel);
                    write_json(&out, &w)?;
                    Ok(report(
                        "fplus",
                        verified,
                        json!({ "in_fplus": true, "witness": out, "witness_nodes": w.s.len(), "witness_verified": verified }),
                    ))
                }
                Some(why) => Ok(report(
                    "fplus",
                    false,
                    json!({ "in_fplus": false, "refutation": why, "message": why.to_string() }),
                )),
            }
        }
    }
}
