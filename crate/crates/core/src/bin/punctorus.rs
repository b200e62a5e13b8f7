//! Command-line front end: seeded experiments, the acceptance suite,
//! calibration, and single-point queries.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use punctorus::battery::{self, Calibration};
use punctorus::bridge::flatten;
use punctorus::experiments::{
    bc_vs_cobounded, contraction_sweep, fellow_travel_sweep, lift_geodesic, project_point,
    ExperimentReport, Format, Metric, BRIDGE_TOL,
};
use punctorus::flat::{flat_systole, FlatPoint, TeichGeodesic};
use punctorus::metrics::{lipschitz_brute, lipschitz_candidates};
use punctorus::{Config, Error, Result, Slope, TracePoint};

#[derive(Parser)]
#[command(
    name = "punctorus",
    version,
    about = "Lipschitz and Teichmüller geometry of the punctured torus"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// RNG seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample count.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Denominator bound for brute-force sups (overrides the config file).
    #[arg(long = "N", global = true)]
    big_n: Option<i64>,
    /// Grid step along geodesics (overrides the config file).
    #[arg(long, global = true)]
    grid: Option<f64>,
    /// Output path: a directory for experiment reports, a file otherwise.
    /// Standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key=value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Brute-force and candidate Lipschitz distance between two points.
    Dist {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Hyperbolic lengths of the slopes with |p|, q ≤ N (default 5).
    Lengths {
        #[arg(long)]
        x: String,
    },
    /// Lifts the Teichmüller geodesic between two conformal points.
    Geodesic {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Closest-point projection of a point to a lifted geodesic.
    Project {
        #[arg(long)]
        x: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value = "lipschitz")]
        metric: Metric,
    },
    /// Contraction sweep over n configurations (default 100).
    Contract {
        #[arg(long, default_value = "lipschitz")]
        metric: Metric,
        /// Ball samples per configuration.
        #[arg(long, default_value_t = 8)]
        balls: usize,
    },
    /// Fellow-traveling sweep over n endpoint pairs (default 100).
    Fellow,
    /// Bounded combinatorics against coboundedness over n pairs (default 200).
    Bc,
    /// The acceptance battery with a summary table.
    Suite {
        /// Run all thirteen criteria.
        #[arg(long)]
        all: bool,
        /// Comma-separated criterion numbers.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<usize>,
    },
    /// Measures the calibrated constants with n samples (default 1000).
    Calibrate,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_precondition() { 1 } else { 2 })
        }
    }
}

fn config(g: &Global) -> Result<Config> {
    let mut cfg = match &g.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(s) = g.seed {
        cfg.rng_seed = s;
    }
    if let Some(n) = g.big_n {
        cfg.denominator_bound = n;
    }
    if let Some(step) = g.grid {
        cfg.grid_step = step;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A point given as `modular`, `fn:<len>,<t>` or a JSON file path.
fn trace_point(spec: &str) -> Result<TracePoint> {
    if spec == "modular" {
        return Ok(TracePoint::modular());
    }
    if let Some(rest) = spec.strip_prefix("fn:") {
        let (len, t) = pair(rest)?;
        return TracePoint::from_fn(len, t);
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(spec)?)?)
}

/// A conformal point given as `tau:<re>,<im>` or a JSON file path.
fn flat_point(spec: &str) -> Result<FlatPoint> {
    if let Some(rest) = spec.strip_prefix("tau:") {
        let (re, im) = pair(rest)?;
        return FlatPoint::new(re, im);
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(spec)?)?)
}

fn pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Parse(format!("expected two comma-separated numbers, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_report(g: &Global, report: &ExperimentReport) -> Result<()> {
    match &g.out {
        Some(dir) => {
            let path = report.write(dir, g.format)?;
            println!("{}", path.display());
            Ok(())
        }
        None => emit(None, &report.render(g.format)?),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let cfg = config(g)?;
    match cli.command {
        Command::Dist { x, y } => {
            let (x, y) = (trace_point(&x)?, trace_point(&y)?);
            let n = g.big_n.unwrap_or(cfg.denominator_bound);
            let (brute, maximizer) = lipschitz_brute(&x, &y, n);
            let (candidate, cand_slope) = lipschitz_candidates(&x, &y);
            let v = json!({
                "brute": brute,
                "candidate": candidate,
                "maximizer": maximizer,
                "candidate_maximizer": cand_slope,
                "N": n,
            });
            emit(
                g.out.as_deref(),
                &(serde_json::to_string_pretty(&v)? + "\n"),
            )?;
        }
        Command::Lengths { x } => {
            let x = trace_point(&x)?;
            let n = g.big_n.unwrap_or(5);
            let mut rows: Vec<(Slope, f64)> = Vec::new();
            x.visit_slopes(n, |s, t| rows.push((s, t.length())));
            rows.sort_by(|a, b| a.0.tie_cmp(&b.0));
            let text = match g.format {
                Format::Csv => {
                    let mut s = String::from("slope,length\n");
                    for (a, l) in &rows {
                        s += &format!("{a},{l:?}\n");
                    }
                    s
                }
                Format::Json => {
                    let (sys, len) = x.systole_with_length();
                    let m = x.short_marking();
                    let v = json!({
                        "systole": sys,
                        "systole_length": len,
                        "short_marking": [m.pants, m.dual],
                        "lengths": rows.iter().map(|(a, l)| json!({"slope": a, "length": l})).collect::<Vec<_>>(),
                    });
                    serde_json::to_string_pretty(&v)? + "\n"
                }
            };
            emit(g.out.as_deref(), &text)?;
        }
        Command::Geodesic { a, b } => {
            let (a, b) = (flat_point(&a)?, flat_point(&b)?);
            let lg = lift_geodesic(&TeichGeodesic::through(&a, &b)?, &cfg)?;
            let rows: Vec<(f64, f64, f64, f64, f64)> = lg
                .times
                .iter()
                .zip(&lg.flat)
                .zip(&lg.points)
                .map(|((&t, f), p)| {
                    (
                        t,
                        f.re(),
                        f.im(),
                        flat_systole(f).1,
                        p.systole_with_length().1,
                    )
                })
                .collect();
            let text = match g.format {
                Format::Csv => {
                    let mut s = format!(
                        "# config_hash={} seed={}\nt,re,im,ext_systole,hyp_systole\n",
                        cfg.hash(),
                        cfg.rng_seed
                    );
                    for r in &rows {
                        s += &format!("{:?},{:?},{:?},{:?},{:?}\n", r.0, r.1, r.2, r.3, r.4);
                    }
                    s
                }
                Format::Json => {
                    let v = json!({
                        "config_hash": cfg.hash(),
                        "seed": cfg.rng_seed,
                        "length": lg.geodesic.length(),
                        "nodes": rows.iter().zip(&lg.points).map(|(r, p)| json!({
                            "t": r.0, "re": r.1, "im": r.2, "ext_systole": r.3, "hyp_systole": r.4, "point": p,
                        })).collect::<Vec<_>>(),
                    });
                    serde_json::to_string_pretty(&v)? + "\n"
                }
            };
            emit(g.out.as_deref(), &text)?;
        }
        Command::Project { x, a, b, metric } => {
            let x = trace_point(&x)?;
            // Refuses thin input before lifting.
            flatten(&x, BRIDGE_TOL, &cfg)?;
            let (a, b) = (flat_point(&a)?, flat_point(&b)?);
            let lg = lift_geodesic(&TeichGeodesic::through(&a, &b)?, &cfg)?;
            let p = project_point(&x, &lg, metric, &cfg)?;
            let v = json!({
                "metric": metric.to_string(),
                "times": p.times,
                "distance": p.distance,
                "span": [p.span().0, p.span().1],
                "config_hash": cfg.hash(),
            });
            emit(
                g.out.as_deref(),
                &(serde_json::to_string_pretty(&v)? + "\n"),
            )?;
        }
        Command::Contract { metric, balls } => {
            emit_report(
                g,
                &contraction_sweep(&cfg, g.n.unwrap_or(100), balls, metric)?,
            )?;
        }
        Command::Fellow => emit_report(g, &fellow_travel_sweep(&cfg, g.n.unwrap_or(100))?)?,
        Command::Bc => emit_report(g, &bc_vs_cobounded(&cfg, g.n.unwrap_or(200))?)?,
        Command::Suite { all, criteria } => {
            let ids: Vec<usize> = if all || criteria.is_empty() {
                (1..=13).collect()
            } else {
                criteria
            };
            let mut checks = Vec::new();
            for id in ids {
                let c = battery::run_check(id, &cfg)?;
                println!("{}", c.line());
                if let Some(dir) = &g.out {
                    for r in &c.reports {
                        r.write(dir, g.format)?;
                    }
                }
                checks.push(c);
            }
            let table = battery::summary_table(&checks);
            print!("\n{table}");
            if let Some(dir) = &g.out {
                std::fs::write(
                    dir.join(format!("suite_seed{}_{}.txt", cfg.rng_seed, cfg.hash())),
                    &table,
                )?;
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Calibrate => {
            let cal = battery::calibrate(&cfg, g.n.unwrap_or(1000))?;
            let text = cal.to_text();
            debug_assert_eq!(Calibration::parse(&text).ok().as_ref(), Some(&cal));
            emit(g.out.as_deref(), &text)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
