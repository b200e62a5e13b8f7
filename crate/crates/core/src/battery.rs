//! The acceptance battery: thirteen numbered checks with pinned thresholds,
//! shared by `punctorus suite` and the acceptance test target, plus the
//! calibration file written by `punctorus calibrate`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use num_bigint::BigUint;
use num_integer::Integer;
use rand::Rng;
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::experiments::{
    asymmetry_stat, balanced_lemma_stat, bc_vs_cobounded, candidate_gap_stat, contraction_sweep,
    fellow_travel_sweep, length_formula_stat, minsky_gap_stat, random_slope, random_thick_flat,
    sample_rng, ExperimentReport, Metric,
};
use crate::flat::{
    ext_length, flat_systole, kerckhoff_profile, teich_distance, BalancedTime, TeichGeodesic,
};
use crate::fricke::{random_point, TracePoint};
use crate::slopes::Slope;

/// Markov residual bound for the trace coordinates.
pub const MARKOV_TOL: f64 = 1e-9;
/// Relative error allowed against exact integer traces.
pub const INTEGER_TRACE_TOL: f64 = 1e-9;
/// Relative deviation allowed from the closed-form cosh profile.
pub const COSH_TOL: f64 = 1e-9;
/// Gap allowed between the truncated Kerckhoff sup and `d_T`.
pub const KERCKHOFF_TOL: f64 = 0.05;
/// Upper bound on `brute − candidate`.
pub const CANDIDATE_GAP: f64 = 1.5;
/// Allowed change of the brute estimate between the two box sizes.
pub const CANDIDATE_STABILITY: f64 = 0.1;
/// Two-sided multiplicative bound for the short-marking length formulas.
pub const LENGTH_RATIO: f64 = 8.0;
/// Upper bound for the any-marking length formula.
pub const ANY_MARKING_RATIO: f64 = 16.0;
/// Allowed change of the Minsky minima under sample doubling.
pub const MINSKY_STABILITY: f64 = 0.2;
/// Bound on the projection/balanced-time gap.
pub const BALANCED_GAP: f64 = 2.0;
/// Bound on the bridge residual.
pub const BRIDGE_RESIDUAL: f64 = 1.0;
/// Smallest asymmetry ratio of the thin witness.
pub const WITNESS_RATIO: f64 = 3.0;
/// Allowed change of `C_asym` under sample doubling.
pub const ASYMMETRY_STABILITY: f64 = 0.5;
/// Largest least-squares slope of `R` or `Q` against endpoint distance
/// counted as "no growth"; linear growth would show slopes of order one.
pub const TREND_SLOPE: f64 = 0.05;
/// Upper bound for the quasi-geodesic constant.
pub const QUASI_CONSTANT: f64 = 4.0;

/// Titles of the checks, indexed from 1.
pub const TITLES: [&str; 13] = [
    "Markov identity",
    "integer trace oracle",
    "cosh law",
    "Kerckhoff convergence",
    "candidate curves",
    "short-marking length formulas",
    "any-marking length formula",
    "Minsky gap constants",
    "projection near balanced times",
    "contraction",
    "asymmetry and bridge",
    "fellow traveling",
    "determinism",
];

/// The outcome of one check.
#[derive(Clone, Debug)]
pub struct Check {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub reports: Vec<ExperimentReport>,
}

impl Check {
    /// `criterion  N PASS  title: detail (time)`.
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {}  {}: {} ({:.1}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds
        )
    }
}

struct Outcome {
    passed: bool,
    detail: String,
    reports: Vec<ExperimentReport>,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome {
            passed,
            detail,
            reports: Vec::new(),
        }
    }

    fn with(mut self, reports: Vec<ExperimentReport>) -> Self {
        self.reports = reports;
        self
    }
}

/// Runs check `id` (1 to 13). Errors inside a check are reported as a
/// failure with the error message.
pub fn run_check(id: usize, cfg: &Config) -> Result<Check> {
    if !(1..=13).contains(&id) {
        return Err(Error::InvalidArgument(format!(
            "no criterion {id}; expected 1 to 13"
        )));
    }
    cfg.validate()?;
    let start = Instant::now();
    let out = match id {
        1 => markov_identity(cfg),
        2 => integer_traces(),
        3 => cosh_law(cfg),
        4 => kerckhoff(cfg),
        5 => candidate_curves(cfg),
        6 => short_marking_lengths(cfg),
        7 => any_marking_lengths(cfg),
        8 => minsky_gap(cfg),
        9 => balanced_times(cfg),
        10 => contraction(cfg),
        11 => asymmetry(cfg),
        12 => fellow_traveling(cfg),
        _ => determinism(cfg),
    };
    let out = out.unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
    Ok(Check {
        id,
        title: TITLES[id - 1],
        passed: out.passed,
        detail: out.detail,
        seconds: start.elapsed().as_secs_f64(),
        reports: out.reports,
    })
}

/// Runs the given checks in order.
pub fn run_checks(ids: &[usize], cfg: &Config) -> Result<Vec<Check>> {
    ids.iter().map(|&id| run_check(id, cfg)).collect()
}

/// A fixed-width summary table of finished checks.
pub fn summary_table(checks: &[Check]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>2}  {:<32} {:<6} {:>8}",
        "#", "criterion", "result", "seconds"
    );
    for c in checks {
        let _ = writeln!(
            s,
            "{:>2}  {:<32} {:<6} {:>8.1}",
            c.id,
            c.title,
            if c.passed { "PASS" } else { "FAIL" },
            c.seconds
        );
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let _ = writeln!(s, "{passed}/{} passed", checks.len());
    s
}

// ---------------------------------------------------------------------------
// Exact checks

fn log_residual(lx: f64, ly: f64, lz: f64) -> f64 {
    let s = lx + ly + lz;
    (2.0 * lx - s).exp() + (2.0 * ly - s).exp() + (2.0 * lz - s).exp() - 1.0
}

/// A Farey neighbour `a` of `(p, q)` with `(p, q) − a` also a neighbour.
fn farey_parents(p: i64, q: i64) -> ((i64, i64), (i64, i64)) {
    // Solve p·q' − q·p' = 1 by the extended Euclidean algorithm.
    let e = p.extended_gcd(&q);
    let (pp, qq) = (-e.y * e.gcd.signum(), e.x * e.gcd.signum());
    ((pp, qq), (p - pp, q - qq))
}

fn markov_identity(cfg: &Config) -> Result<Outcome> {
    const CHART_POINTS: u64 = 10_000;
    const STEP_BUDGET: usize = 10_000;
    let chart_worst = (0..CHART_POINTS)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = sample_rng(cfg, "markov", i);
            let len = rng.gen_range(1e-3f64.ln()..20f64.ln()).exp();
            let t = rng.gen_range(-5.0..5.0);
            Ok(TracePoint::from_fn(len, t)?.markov_residual().abs())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    // Every trace produced by the recursion closes a Farey triangle with
    // two earlier ones; check the identity on each such triangle.
    let mut starts = vec![TracePoint::modular()];
    starts.extend((0..4).map(|k| random_point(&cfg.with_seed(cfg.rng_seed + k), 3)));
    let (mut steps, mut recursion_worst) = (0usize, 0.0f64);
    'points: for pt in &starts {
        let mut slopes = Vec::new();
        pt.visit_slopes(40, |s, t| slopes.push((s, t)));
        for (s, t) in slopes {
            if steps == STEP_BUDGET {
                break 'points;
            }
            if s.q() == 0 || s.p() == 0 {
                continue;
            }
            let (a, b) = farey_parents(s.p(), s.q());
            let ta = pt.trace_of(Slope::from_primitive(a.0, a.1)).ln();
            let tb = pt.trace_of(Slope::from_primitive(b.0, b.1)).ln();
            recursion_worst = recursion_worst.max(log_residual(ta, tb, t.ln()).abs());
            steps += 1;
        }
    }
    let passed = chart_worst <= MARKOV_TOL && recursion_worst <= MARKOV_TOL;
    Ok(Outcome::new(
        passed,
        format!(
            "max residual {chart_worst:.2e} on {CHART_POINTS} chart points, \
             {recursion_worst:.2e} on {steps} recursion triangles (bound {MARKOV_TOL:e})"
        ),
    ))
}

/// Natural log of a positive big integer.
fn big_ln(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        let digits = n.to_u64_digits();
        digits
            .iter()
            .rev()
            .fold(0.0f64, |acc, &d| acc * 2f64.powi(64) + d as f64)
            .ln()
    } else {
        let shift = bits - 64;
        let top = (n >> shift).to_u64_digits()[0] as f64;
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// Exact traces of the modular torus `(3, 3, 3)` for all slopes with
/// `|p|, q ≤ bound`, by the integer Fricke recursion
/// `tr(a + b) = tr(a)·tr(b) − tr(a − b)` over Farey neighbours.
pub fn integer_modular_traces(bound: i64) -> BTreeMap<(i64, i64), BigUint> {
    let three = BigUint::from(3u32);
    let mut out = BTreeMap::new();
    out.insert((0, 1), three.clone());
    out.insert((1, 0), three.clone());
    // (a, b, tr a, tr b, tr(a − b)); a + b is the next slope.
    let mut stack = vec![
        (
            (1i64, 0i64),
            (0i64, 1i64),
            three.clone(),
            three.clone(),
            BigUint::from(6u32),
        ),
        ((-1, 0), (0, 1), three.clone(), three.clone(), three),
    ];
    while let Some((a, b, ta, tb, td)) = stack.pop() {
        let c = (a.0 + b.0, a.1 + b.1);
        if c.0.abs() > bound || c.1 > bound {
            continue;
        }
        let tc = &ta * &tb - &td;
        out.insert(c, tc.clone());
        stack.push((a, c, ta.clone(), tc.clone(), tb.clone()));
        stack.push((c, b, tc, tb, ta));
    }
    out
}

fn integer_traces() -> Result<Outcome> {
    const BOUND: i64 = 200;
    let exact = integer_modular_traces(BOUND);
    let pt = TracePoint::modular();
    let worst = exact
        .par_iter()
        .map(|(&(p, q), t)| {
            let got = pt.trace_of(Slope::from_primitive(p, q)).ln();
            (got - big_ln(t)).exp_m1().abs()
        })
        .reduce(|| 0.0, f64::max);
    let head: Vec<String> = [(1, 1), (-1, 1), (2, 1), (-2, 1), (-3, 2)]
        .iter()
        .filter_map(|k| exact.get(k).map(|t| t.to_string()))
        .collect();
    Ok(Outcome::new(
        worst <= INTEGER_TRACE_TOL,
        format!(
            "max relative error {worst:.2e} over {} slopes (traces {}, …; bound {INTEGER_TRACE_TOL:e})",
            exact.len(),
            head.join(", ")
        ),
    ))
}

fn cosh_law(cfg: &Config) -> Result<Outcome> {
    let worst = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg, "cosh", i);
            let a = random_thick_flat(&mut rng);
            let g = TeichGeodesic::from_direction(&a, rng.gen_range(0.0..std::f64::consts::PI));
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let s = random_slope(&mut rng, 20);
                let BalancedTime::Finite(ts) = g.balanced_time(s) else {
                    continue;
                };
                let m = g.ext_min(s);
                for k in 0..50 {
                    let t = -2.5 + 0.1 * k as f64;
                    let direct = ext_length(&g.point(t), s);
                    let law = m * (2.0 * (t - ts)).cosh();
                    worst = worst.max((direct / law - 1.0).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(Outcome::new(
        worst <= COSH_TOL,
        format!("max relative deviation {worst:.2e} over 100 geodesics x 20 slopes x 50 times (bound {COSH_TOL:e})"),
    ))
}

fn kerckhoff(cfg: &Config) -> Result<Outcome> {
    const BOUNDS: [i64; 5] = [10, 50, 100, 200, 500];
    let rows: Vec<(f64, bool)> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg, "kerckhoff", i);
            loop {
                let a = random_thick_flat(&mut rng);
                let theta = rng.gen_range(0.0..std::f64::consts::PI);
                let d = rng.gen_range(0.05..2.0);
                let b = TeichGeodesic::from_direction(&a, theta).point(d);
                if flat_systole(&b).1 < cfg.ext_floor() {
                    continue;
                }
                let dt = teich_distance(&a, &b);
                let prof = kerckhoff_profile(&a, &b, &BOUNDS);
                let monotone = prof.windows(2).all(|w| w[1] >= w[0]) && prof[4] <= dt + 1e-9;
                return ((dt - prof[4]).abs(), monotone);
            }
        })
        .collect();
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let monotone = rows.iter().all(|r| r.1);
    Ok(Outcome::new(
        worst <= KERCKHOFF_TOL && monotone,
        format!(
            "max |sup_500 - d_T| = {worst:.2e} over 200 thick pairs (bound {KERCKHOFF_TOL}), monotone in N: {monotone}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Sweeps

fn constant(r: &ExperimentReport, key: &str) -> Result<f64> {
    r.constant(key)
        .ok_or_else(|| Error::InvalidArgument(format!("report {} has no constant {key}", r.name)))
}

fn candidate_curves(cfg: &Config) -> Result<Outcome> {
    let r = candidate_gap_stat(cfg, 1000, 200, 400)?;
    let (gap, stab, viol) = (
        constant(&r, "D_cand")?,
        constant(&r, "stability")?,
        constant(&r, "violations")?,
    );
    Ok(Outcome::new(
        viol == 0.0 && gap <= CANDIDATE_GAP && stab <= CANDIDATE_STABILITY,
        format!(
            "violations {viol}, D_cand {gap:.3} (bound {CANDIDATE_GAP}), N=200->400 change {stab:.3} (bound {CANDIDATE_STABILITY})"
        ),
    )
    .with(vec![r]))
}

fn short_marking_lengths(cfg: &Config) -> Result<Outcome> {
    let r = length_formula_stat(cfg, 10_000)?;
    let (c, ce) = (constant(&r, "C")?, constant(&r, "C_ext")?);
    Ok(Outcome::new(
        c <= LENGTH_RATIO && ce <= LENGTH_RATIO,
        format!("hyperbolic ratio within 1/{c:.3}..{c:.3}, extremal within 1/{ce:.3}..{ce:.3} (bound {LENGTH_RATIO})"),
    )
    .with(vec![r]))
}

fn any_marking_lengths(cfg: &Config) -> Result<Outcome> {
    let r = length_formula_stat(cfg, 10_000)?;
    let any = constant(&r, "C_any")?;
    let violations = r
        .values("any_ratio")
        .iter()
        .filter(|&&v| v > ANY_MARKING_RATIO)
        .count();
    Ok(Outcome::new(
        violations == 0 && any <= ANY_MARKING_RATIO,
        format!("violations {violations}, C_any {any:.4} (bound {ANY_MARKING_RATIO})"),
    )
    .with(vec![r]))
}

fn minsky_gap(cfg: &Config) -> Result<Outcome> {
    let r1 = minsky_gap_stat(cfg, 10_000)?;
    let r2 = minsky_gap_stat(cfg, 20_000)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for key in ["log_c1", "log_c2"] {
        let (a, b) = (constant(&r1, key)?, constant(&r2, key)?);
        ok &= a.is_finite() && b.is_finite() && (a - b).abs() <= MINSKY_STABILITY;
        parts.push(format!("{key} {a:.4} -> {b:.4}"));
    }
    let pairs = constant(&r1, "pairs")?;
    Ok(Outcome::new(
        ok,
        format!(
            "{} on {pairs} filtered pairs, doubled (bound {MINSKY_STABILITY})",
            parts.join(", ")
        ),
    )
    .with(vec![r1, r2]))
}

fn balanced_times(cfg: &Config) -> Result<Outcome> {
    let r = balanced_lemma_stat(&cfg.with_grid(0.05), 500)?;
    let gap = constant(&r, "gap_max")?;
    let n = constant(&r, "gaps")?;
    Ok(Outcome::new(
        gap <= BALANCED_GAP,
        format!("max gap {gap:.3} over {n} curves of 500 samples (bound {BALANCED_GAP})"),
    )
    .with(vec![r]))
}

fn contraction(cfg: &Config) -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut reports = Vec::new();
    for metric in [Metric::Lipschitz, Metric::Teichmuller] {
        let r = contraction_sweep(cfg, 100, 8, metric)?;
        let (b, near, far, used) = (
            constant(&r, "b")?,
            constant(&r, "b_near")?,
            constant(&r, "b_far")?,
            constant(&r, "configurations")?,
        );
        ok &= b.is_finite() && used >= 100.0 && far <= near + cfg.grid_step;
        parts.push(format!(
            "{metric}: b {b:.3} (near {near:.3}, far {far:.3}) over {used} configurations"
        ));
        reports.push(r);
    }
    Ok(Outcome::new(ok, parts.join("; ")).with(reports))
}

fn asymmetry(cfg: &Config) -> Result<Outcome> {
    let r1 = asymmetry_stat(cfg, 500)?;
    let r2 = asymmetry_stat(cfg, 1000)?;
    let (a1, a2) = (constant(&r1, "C_asym")?, constant(&r2, "C_asym")?);
    let bridge = constant(&r1, "c_bridge")?;
    let witness = constant(&r1, "witness_ratio")?;
    let ok = a1.is_finite()
        && (a1 - a2).abs() <= ASYMMETRY_STABILITY
        && bridge <= BRIDGE_RESIDUAL
        && witness >= WITNESS_RATIO;
    Ok(Outcome::new(
        ok,
        format!(
            "C_asym {a1:.3} -> {a2:.3} doubled (bound {ASYMMETRY_STABILITY}), c_bridge {bridge:.3} \
             (bound {BRIDGE_RESIDUAL}), thin witness ratio {witness:.3} (bound {WITNESS_RATIO})"
        ),
    )
    .with(vec![r1, r2]))
}

fn fellow_traveling(cfg: &Config) -> Result<Outcome> {
    let r = fellow_travel_sweep(cfg, 100)?;
    let get = |k| constant(&r, k);
    let (rr, q, rt, qt, floor, pairs) = (
        get("R")?,
        get("Q")?,
        get("R_trend")?,
        get("Q_trend")?,
        get("systole_floor")?,
        get("pairs")?,
    );
    let ok = pairs >= 100.0
        && rt <= TREND_SLOPE
        && qt <= TREND_SLOPE
        && q <= QUASI_CONSTANT
        && floor > 0.0
        && rr.is_finite();
    Ok(Outcome::new(
        ok,
        format!(
            "R {rr:.3} (trend {rt:.4}), Q {q:.3} (trend {qt:.4}; bounds {TREND_SLOPE}, Q <= {QUASI_CONSTANT}), \
             systole floor {floor:.3} over {pairs} pairs"
        ),
    )
    .with(vec![r]))
}

/// Every seeded experiment at a reduced size, as rendered CSV and JSON.
fn experiment_outputs(cfg: &Config) -> Result<Vec<(String, String)>> {
    let reports = vec![
        balanced_lemma_stat(cfg, 40)?,
        minsky_gap_stat(cfg, 200)?,
        asymmetry_stat(cfg, 40)?,
        bc_vs_cobounded(cfg, 40)?,
        length_formula_stat(cfg, 200)?,
        candidate_gap_stat(cfg, 20, 60, 120)?,
        contraction_sweep(cfg, 4, 4, Metric::Lipschitz)?,
        contraction_sweep(cfg, 4, 4, Metric::Teichmuller)?,
        fellow_travel_sweep(cfg, 4)?,
    ];
    reports
        .into_iter()
        .map(|r| Ok((r.to_csv(), r.to_json()?)))
        .collect()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn determinism(cfg: &Config) -> Result<Outcome> {
    let first = in_pool(4, || experiment_outputs(cfg))??;
    let second = in_pool(4, || experiment_outputs(cfg))??;
    let single = in_pool(1, || experiment_outputs(cfg))??;
    let same_runs = first == second;
    let same_threads = first == single;
    let bytes: usize = first.iter().map(|(c, j)| c.len() + j.len()).sum();
    Ok(Outcome::new(
        same_runs && same_threads,
        format!(
            "{} experiments ({bytes} bytes): identical across runs {same_runs}, 1 vs 4 threads {same_threads}",
            first.len()
        ),
    ))
}

// ---------------------------------------------------------------------------
// Calibration

/// Format version of calibration files.
pub const CALIBRATION_VERSION: u32 = 1;

/// One measured constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibrated {
    pub name: String,
    pub value: f64,
    pub samples: usize,
}

/// Measured constants with the config they were measured under.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub constants: Vec<Calibrated>,
}

/// Runs the constant-measuring sweeps with `n` samples each (a tenth of
/// that, at least two, for the contraction and fellow-traveling sweeps).
pub fn calibrate(cfg: &Config, n: usize) -> Result<Calibration> {
    cfg.validate()?;
    let n = n.max(1);
    let small = (n / 10).max(2);
    let lengths = length_formula_stat(cfg, n)?;
    let cand = candidate_gap_stat(cfg, n, cfg.denominator_bound, 2 * cfg.denominator_bound)?;
    let con = contraction_sweep(cfg, small, 8, Metric::Lipschitz)?;
    let minsky = minsky_gap_stat(cfg, n)?;
    let asym = asymmetry_stat(cfg, n)?;
    let fellow = fellow_travel_sweep(cfg, small)?;
    let mut constants = Vec::new();
    let mut push = |name: &str, r: &ExperimentReport, key: &str, samples: usize| -> Result<()> {
        constants.push(Calibrated {
            name: name.to_string(),
            value: constant(r, key)?,
            samples,
        });
        Ok(())
    };
    push("C", &lengths, "C", n)?;
    push("C_any", &lengths, "C_any", n)?;
    push("C_ext", &lengths, "C_ext", n)?;
    push("D_cand", &cand, "D_cand", n)?;
    push("b", &con, "b", small)?;
    push("log_c1", &minsky, "log_c1", n)?;
    push("log_c2", &minsky, "log_c2", n)?;
    push("C_asym", &asym, "C_asym", n)?;
    push("c_bridge", &asym, "c_bridge", n)?;
    push("R", &fellow, "R", small)?;
    push("Q", &fellow, "Q", small)?;
    Ok(Calibration {
        version: CALIBRATION_VERSION,
        seed: cfg.rng_seed,
        config_hash: cfg.hash(),
        constants,
    })
}

impl Calibration {
    /// `# punctorus calibration v1`, seed and hash lines, then one
    /// `name=value samples=n` line per constant.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# punctorus calibration v{}", self.version);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "config_hash={}", self.config_hash);
        for c in &self.constants {
            let _ = writeln!(s, "{}={:?} samples={}", c.name, c.value, c.samples);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Config {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let version = match lines.next() {
            Some((_, l)) => l
                .strip_prefix("# punctorus calibration v")
                .and_then(|v| v.trim().parse::<u32>().ok())
                .ok_or_else(|| bad(1, "missing calibration header"))?,
            None => return Err(bad(1, "empty calibration file")),
        };
        if version != CALIBRATION_VERSION {
            return Err(bad(
                1,
                &format!("unsupported calibration version {version}"),
            ));
        }
        let (mut seed, mut hash, mut constants) = (None, None, Vec::new());
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line
                .split_once('=')
                .ok_or_else(|| bad(i + 1, "expected key=value"))?;
            match key {
                "seed" => seed = Some(rest.parse().map_err(|_| bad(i + 1, "bad seed"))?),
                "config_hash" => hash = Some(rest.to_string()),
                _ => {
                    let (v, samples) = rest
                        .split_once(" samples=")
                        .ok_or_else(|| bad(i + 1, "expected value samples=n"))?;
                    constants.push(Calibrated {
                        name: key.to_string(),
                        value: v.parse().map_err(|_| bad(i + 1, "bad value"))?,
                        samples: samples
                            .parse()
                            .map_err(|_| bad(i + 1, "bad sample count"))?,
                    });
                }
            }
        }
        Ok(Calibration {
            version,
            seed: seed.ok_or_else(|| Error::Parse("calibration has no seed line".into()))?,
            config_hash: hash
                .ok_or_else(|| Error::Parse("calibration has no config_hash line".into()))?,
            constants,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_traces_start_like_the_markov_tree() {
        let t = integer_modular_traces(5);
        let get = |p, q| t[&(p, q)].to_string();
        assert_eq!(get(1, 1), "3");
        assert_eq!(get(-1, 1), "6");
        assert_eq!(get(2, 1), "6");
        assert_eq!(get(1, 2), "6");
        assert_eq!(get(-2, 1), "15");
        assert_eq!(get(3, 2), "15");
        // Slopes with |p|, q ≤ 5: 1/0 plus the primitive (p, q), q ≥ 1.
        let primitive = (1..=5i64)
            .flat_map(|q| (-5..=5i64).map(move |p| (p, q)))
            .filter(|&(p, q)| p.gcd(&q) == 1)
            .count();
        assert_eq!(t.len(), primitive + 1);
    }

    #[test]
    fn farey_parents_are_neighbours() {
        for (p, q) in [(3, 7), (-5, 8), (13, 5), (1, 1), (-1, 4)] {
            let (a, b) = farey_parents(p, q);
            assert_eq!((a.0 + b.0, a.1 + b.1), (p, q));
            assert_eq!((a.0 * b.1 - a.1 * b.0).abs(), 1, "{p}/{q}");
        }
    }

    #[test]
    fn big_log_matches_small_values() {
        assert!((big_ln(&BigUint::from(87u32)) - 87f64.ln()).abs() < 1e-15);
        let big = BigUint::from(3u32).pow(2000);
        assert!((big_ln(&big) - 2000.0 * 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn calibration_text_round_trips() {
        let c = Calibration {
            version: CALIBRATION_VERSION,
            seed: 7,
            config_hash: "abc".into(),
            constants: vec![Calibrated {
                name: "C".into(),
                value: 1.25,
                samples: 100,
            }],
        };
        assert_eq!(Calibration::parse(&c.to_text()).unwrap(), c);
        assert!(Calibration::parse("seed=1\n").is_err());
    }

    #[test]
    fn unknown_criterion_is_rejected() {
        assert!(run_check(0, &Config::default()).is_err());
        assert!(run_check(14, &Config::default()).is_err());
    }
}
