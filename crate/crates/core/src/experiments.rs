//! Seeded experiments: Teichmüller geodesics lifted to the hyperbolic
//! model, closest-point projections, Lipschitz balls, quasi-geodesics and
//! the statistical sweeps that measure the uniform constants of the theory.
//!
//! Every sample draws from its own random stream, derived from the
//! configured seed, the experiment tag and the sample index, and sweeps
//! merge results in sample-index order, so reports do not depend on
//! scheduling or thread count.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{flatten, uniformize};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::flat::{
    ext_length, flat_marking, flat_systole, min_systole_along, shortest_slopes, teich_distance,
    BalancedTime, FlatPoint, TeichGeodesic,
};
use crate::fricke::TracePoint;
use crate::metrics::{
    ext_marking_formula, length_estimate_short, length_upper_any, lipschitz_brute,
    lipschitz_brute_nested, lipschitz_candidates, lipschitz_over, minsky_length_hyp,
};
use crate::slopes::{bc_constant, intersection, MappingClass, Marking, Slope};

/// Matching tolerance used whenever an experiment calls the bridge.
pub const BRIDGE_TOL: f64 = 1e-6;

/// Proposals per requested sample before ball sampling gives up.
pub const BALL_ATTEMPTS: usize = 400;

/// Minimum separation `|t_α − t_β|` of the balanced-time pairs.
pub const GAP_D0: f64 = 2.0;

/// Nominal hop length of the greedy quasi-geodesics.
pub const PATH_STEP: f64 = 0.5;

/// Directions tried at every greedy hop.
const PATH_DIRECTIONS: usize = 8;

/// Which distance drives a projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `d̂_L(x, ·)` from the candidate curves of `x`.
    Lipschitz,
    /// The Teichmüller distance after flattening.
    Teichmuller,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Lipschitz => "lipschitz",
            Metric::Teichmuller => "teichmuller",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lipschitz" => Ok(Metric::Lipschitz),
            "teichmuller" | "teich" => Ok(Metric::Teichmuller),
            other => Err(Error::Parse(format!(
                "unknown metric {other:?} (expected lipschitz or teichmuller)"
            ))),
        }
    }
}

/// Output format of a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!(
                "unknown format {other:?} (expected csv or json)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Reports

/// One measured quantity of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sample_index: usize,
    pub quantity: String,
    pub value: f64,
}

impl Record {
    pub fn new(sample_index: usize, quantity: &str, value: f64) -> Self {
        Record {
            sample_index,
            quantity: quantity.to_string(),
            value,
        }
    }
}

/// Order statistics of the finite values of one quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            return Summary {
                count: 0,
                min: f64::NAN,
                max: f64::NAN,
                mean: f64::NAN,
                q05: f64::NAN,
                q50: f64::NAN,
                q95: f64::NAN,
            };
        }
        // Nearest-rank quantiles.
        let q = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Summary {
            count: v.len(),
            min: v[0],
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q05: q(0.05),
            q50: q(0.5),
            q95: q(0.95),
        }
    }
}

/// The result of one experiment: per-sample records, their summaries and
/// the calibrated constants, stamped with the seed and config hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: Config,
    pub records: Vec<Record>,
    pub summary: BTreeMap<String, Summary>,
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(
        name: &str,
        cfg: &Config,
        records: Vec<Record>,
        constants: BTreeMap<String, f64>,
        notes: Vec<String>,
    ) -> Self {
        let mut by_quantity: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &records {
            by_quantity
                .entry(r.quantity.clone())
                .or_default()
                .push(r.value);
        }
        let summary = by_quantity
            .into_iter()
            .map(|(k, v)| (k, Summary::of(&v)))
            .collect();
        ExperimentReport {
            name: name.to_string(),
            seed: cfg.rng_seed,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            records,
            summary,
            constants,
            notes,
        }
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }

    /// Values of one quantity in sample order.
    pub fn values(&self, quantity: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.quantity == quantity)
            .map(|r| r.value)
            .collect()
    }

    /// `name_seed<seed>_<hash>`.
    pub fn file_stem(&self) -> String {
        format!("{}_seed{}_{}", self.name, self.seed, self.config_hash)
    }

    /// Per-sample rows `seed,sample_index,quantity,value` after a comment
    /// header carrying the experiment name, seed, hash and full config.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# experiment={} seed={} config_hash={}",
            self.name, self.seed, self.config_hash
        );
        for line in self.config.to_kv().lines() {
            let _ = writeln!(s, "# config {line}");
        }
        for (k, v) in &self.constants {
            let _ = writeln!(s, "# constant {k}={v:?}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "# note {n}");
        }
        s.push_str("seed,sample_index,quantity,value\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{:?}",
                self.seed, r.sample_index, r.quantity, r.value
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => Ok(self.to_csv()),
            Format::Json => self.to_json(),
        }
    }

    /// Writes the report into `dir` under [`Self::file_stem`].
    pub fn write(&self, dir: &Path, format: Format) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.{}", self.file_stem(), format.extension()));
        std::fs::write(&path, self.render(format)?)?;
        Ok(path)
    }
}

/// Checks that a written report carries a config hash that matches the
/// config embedded in it and, when given, the expected config. Returns the
/// embedded seed and hash.
pub fn verify_output(text: &str, expected: Option<&Config>) -> Result<(u64, String)> {
    let (seed, hash, cfg) = if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let field = |k: &str| {
            v.get(k)
                .cloned()
                .ok_or_else(|| Error::Parse(format!("report has no {k:?} field")))
        };
        let seed = field("seed")?
            .as_u64()
            .ok_or_else(|| Error::Parse("seed is not an integer".into()))?;
        let hash = field("config_hash")?
            .as_str()
            .ok_or_else(|| Error::Parse("config_hash is not a string".into()))?
            .to_string();
        let cfg: Config = serde_json::from_value(field("config")?)?;
        (seed, hash, cfg)
    } else {
        let mut header = None;
        let mut kv = String::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some(rest) = line.strip_prefix("# config ") {
                kv.push_str(rest);
                kv.push('\n');
            } else if line.starts_with("# experiment=") {
                let mut seed = None;
                let mut hash = None;
                for part in line[2..].split_whitespace() {
                    if let Some(v) = part.strip_prefix("seed=") {
                        seed = v.parse::<u64>().ok();
                    } else if let Some(v) = part.strip_prefix("config_hash=") {
                        hash = Some(v.to_string());
                    }
                }
                header = seed.zip(hash);
            }
        }
        let (seed, hash) =
            header.ok_or_else(|| Error::Parse("missing experiment header line".into()))?;
        (seed, hash, Config::from_kv(&kv)?)
    };
    if cfg.hash() != hash {
        return Err(Error::Parse(format!(
            "config hash mismatch: file says {hash}, embedded config hashes to {}",
            cfg.hash()
        )));
    }
    if cfg.rng_seed != seed {
        return Err(Error::Parse(format!(
            "seed mismatch: header {seed}, embedded config {}",
            cfg.rng_seed
        )));
    }
    if let Some(e) = expected {
        if e.hash() != hash {
            return Err(Error::Parse(format!(
                "report was produced with config {hash}, expected {}",
                e.hash()
            )));
        }
    }
    Ok((seed, hash))
}

// ---------------------------------------------------------------------------
// Sampling

/// The random stream of sample `index` of the experiment `tag`.
pub fn sample_rng(cfg: &Config, tag: &str, index: u64) -> ChaCha8Rng {
    // FNV-1a keeps tags apart without depending on std's hasher.
    let h = tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ h);
    rng.set_stream(index);
    rng
}

/// A product of `len` random letters from the Dehn twists about `0/1`
/// and `1/0` and their inverses.
pub fn random_word(rng: &mut impl Rng, len: usize) -> MappingClass {
    let letters = [
        MappingClass::twist_zero(),
        MappingClass::twist_zero().inverse(),
        MappingClass::twist_infinity(),
        MappingClass::twist_infinity().inverse(),
    ];
    (0..len).fold(MappingClass::IDENTITY, |w, _| {
        w.compose(&letters[rng.gen_range(0..4)])
    })
}

/// A conformal point with reduced representative in the thick region
/// `|Re τ| ≤ 1/2`, `Im τ ∈ [0.9, 1.9]`, moved by a short random word.
pub fn random_thick_flat(rng: &mut impl Rng) -> FlatPoint {
    let re = rng.gen_range(-0.5..0.5);
    let im = rng.gen_range(0.9..1.9);
    let w = rng.gen_range(0..=3);
    FlatPoint::new(re, im)
        .expect("sampled point is in the upper half-plane")
        .act(&random_word(rng, w))
}

/// A hyperbolic point with `ln len` uniform in `[ln_len_min, ln 4]`,
/// fibre position within one twist, moved by a word of up to four letters.
pub fn random_trace_point(rng: &mut impl Rng, ln_len_min: f64) -> TracePoint {
    let len = rng.gen_range(ln_len_min..4f64.ln()).exp();
    let t = rng.gen_range(-0.5..0.5) * len;
    let w = rng.gen_range(0..=4);
    TracePoint::from_fn(len, t)
        .expect("sampled length is positive")
        .pullback(&random_word(rng, w))
}

/// A primitive slope with `|p| ≤ bound`, `1 ≤ q ≤ bound`.
pub fn random_slope(rng: &mut impl Rng, bound: i64) -> Slope {
    loop {
        let p = rng.gen_range(-bound..=bound);
        let q = rng.gen_range(1..=bound);
        if let Ok(s) = Slope::new(p, q) {
            return s;
        }
    }
}

/// `[0; a₁, a₂, …]` with 24 partial quotients in `1..=max_quotient`.
fn bounded_continued_fraction(rng: &mut impl Rng, max_quotient: u32) -> f64 {
    let quotients: Vec<u32> = (0..24).map(|_| rng.gen_range(1..=max_quotient)).collect();
    quotients
        .iter()
        .rev()
        .fold(0.0, |tail, &a| 1.0 / (a as f64 + tail))
}

/// A Teichmüller geodesic segment of the given length whose flat systole
/// stays at least `cfg.eps_thick` on the grid: the endpoints of the full
/// geodesic have continued fractions with quotients 1 and 2, so the whole
/// geodesic is cobounded, and the segment is centred where it passes
/// closest to `i` before being moved by a random word.
pub fn cobounded_geodesic(rng: &mut impl Rng, len: f64, cfg: &Config) -> Result<TeichGeodesic> {
    const ATTEMPTS: usize = 200;
    for _ in 0..ATTEMPTS {
        let forward = bounded_continued_fraction(rng, 2);
        let backward = -(rng.gen_range(1..=2) as f64 + bounded_continued_fraction(rng, 2));
        let (b, f) = if rng.gen_bool(0.5) {
            (backward, forward)
        } else {
            (forward, backward)
        };
        let w = rng.gen_range(0..=3);
        let g = TeichGeodesic::from_endpoints(b, f)?
            .restricted(-0.5 * len, 0.5 * len)
            .act(&random_word(rng, w));
        if min_systole_along(&g, cfg.grid_step)? >= cfg.eps_thick {
            return Ok(g);
        }
    }
    Err(Error::SamplingFailed(ATTEMPTS))
}

// ---------------------------------------------------------------------------
// Lifted geodesics and projections

/// A Teichmüller geodesic together with the uniformized hyperbolic points
/// at the grid times `t0 + k·step`.
#[derive(Clone, Debug, Serialize)]
pub struct LiftedGeodesic {
    pub geodesic: TeichGeodesic,
    pub step: f64,
    pub times: Vec<f64>,
    pub flat: Vec<FlatPoint>,
    pub points: Vec<TracePoint>,
}

/// Grid times `t0 + k·step` inside `[t0, t1]`.
pub fn node_times(g: &TeichGeodesic, step: f64) -> Vec<f64> {
    let n = ((g.t1 - g.t0) / step + 1e-9).floor().max(0.0) as usize;
    (0..=n).map(|k| g.t0 + k as f64 * step).collect()
}

/// Uniformizes every grid node of `g` (step `cfg.grid_step`). A node in the
/// thin part fails with [`Error::ThinAlong`] at its time.
pub fn lift_geodesic(g: &TeichGeodesic, cfg: &Config) -> Result<LiftedGeodesic> {
    cfg.validate()?;
    let times = node_times(g, cfg.grid_step);
    let flat: Vec<FlatPoint> = times.iter().map(|&t| g.point(t)).collect();
    let points = flat
        .par_iter()
        .zip(times.par_iter())
        .map(|(p, &t)| {
            uniformize(p, None, BRIDGE_TOL, cfg).map_err(|e| match e {
                Error::Thin { systole, floor } => Error::ThinAlong { t, systole, floor },
                e => e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LiftedGeodesic {
        geodesic: *g,
        step: cfg.grid_step,
        times,
        flat,
        points,
    })
}

/// Relative tolerance under which two node distances count as tied.
const TIE_RTOL: f64 = 1e-9;

/// Grid nodes minimizing a distance: the time resolution is the grid step,
/// and nodes whose distances tie the minimum (to `TIE_RTOL`) are all kept.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Projection {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    /// The minimal distance.
    pub distance: f64,
}

impl Projection {
    fn from_distances(d: &[f64], times: &[f64]) -> Self {
        let (best, distance) =
            d.iter().enumerate().fold(
                (0, f64::INFINITY),
                |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc },
            );
        let mut indices = vec![best];
        let tol = TIE_RTOL * distance.abs().max(1.0);
        indices.extend((0..d.len()).filter(|&k| k != best && d[k] <= distance + tol));
        let times = indices.iter().map(|&k| times[k]).collect();
        Projection {
            indices,
            times,
            distance,
        }
    }

    /// The time of the exact minimizer (the first listed).
    pub fn time(&self) -> f64 {
        self.times[0]
    }

    /// `(min, max)` of the projected times.
    pub fn span(&self) -> (f64, f64) {
        self.times
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
                (lo.min(t), hi.max(t))
            })
    }
}

/// Closest-point projection of `x` to the lifted geodesic, resolved to the
/// grid: the minimizing grid times (several only on ties). The Teichmüller flag
/// flattens `x` first and so needs a thick `x`.
pub fn project_point(
    x: &TracePoint,
    lg: &LiftedGeodesic,
    metric: Metric,
    cfg: &Config,
) -> Result<Projection> {
    match metric {
        Metric::Lipschitz => {
            let m = x.short_marking();
            let d: Vec<f64> = lg
                .points
                .iter()
                .map(|n| lipschitz_over(x, n, &m).0)
                .collect();
            Ok(Projection::from_distances(&d, &lg.times))
        }
        Metric::Teichmuller => Ok(project_flat(&flatten(x, BRIDGE_TOL, cfg)?, lg)),
    }
}

/// Teichmüller closest-point projection of a conformal point.
pub fn project_flat(x: &FlatPoint, lg: &LiftedGeodesic) -> Projection {
    let d: Vec<f64> = lg.flat.iter().map(|n| teich_distance(x, n)).collect();
    Projection::from_distances(&d, &lg.times)
}

// ---------------------------------------------------------------------------
// Balls

/// `n` points of the Lipschitz ball of radius `r` about `x`, certified by
/// `lipschitz_brute(x, y, cfg.denominator_bound) ≤ r`. Proposals perturb
/// the chart of `x` (log-length and twist, scaled by `spread·r`) and add a
/// full twist about the short curve a quarter of the time. With
/// `spread = 0` every sample is `x` itself.
pub fn sample_ball(
    x: &TracePoint,
    r: f64,
    n: usize,
    spread: f64,
    cfg: &Config,
) -> Result<Vec<TracePoint>> {
    sample_ball_with(x, r, n, spread, &mut sample_rng(cfg, "ball", 0), cfg)
}

fn check_ball(r: f64, n: usize, spread: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "ball sample count must be positive".into(),
        ));
    }
    if !(r > 0.0 && r.is_finite()) || !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need a positive radius and non-negative spread, got {r} and {spread}"
        )));
    }
    Ok(())
}

pub fn sample_ball_with(
    x: &TracePoint,
    r: f64,
    n: usize,
    spread: f64,
    rng: &mut impl Rng,
    cfg: &Config,
) -> Result<Vec<TracePoint>> {
    check_ball(r, n, spread)?;
    if spread == 0.0 {
        return Ok(vec![*x; n]);
    }
    let (len, t, frame) = x.anchor_chart();
    let cap = BALL_ATTEMPTS * n;
    let mut out = Vec::with_capacity(n);
    for _ in 0..cap {
        let du = spread * r * rng.gen_range(-1.0..=1.0);
        let mut dt = spread * r * rng.gen_range(-1.0..=1.0) * len.max(1.0);
        if rng.gen_bool(0.25) {
            dt += if rng.gen_bool(0.5) { len } else { -len };
        }
        let y = TracePoint::from_chart(len * du.exp(), t + dt, &frame)?;
        if lipschitz_brute(x, &y, cfg.denominator_bound).0 <= r {
            out.push(y);
            if out.len() == n {
                return Ok(out);
            }
        }
    }
    Err(Error::SamplingFailed(cap))
}

/// `n` points of the Teichmüller ball of radius `r` about `x`, exact:
/// random directions and radii `r·spread·√u` capped at `r`.
pub fn sample_flat_ball(
    x: &FlatPoint,
    r: f64,
    n: usize,
    spread: f64,
    rng: &mut impl Rng,
) -> Result<Vec<FlatPoint>> {
    check_ball(r, n, spread)?;
    Ok((0..n)
        .map(|_| {
            let theta = rng.gen_range(0.0..2.0 * PI);
            let rho = (spread * r * rng.gen::<f64>().sqrt()).min(r);
            TeichGeodesic::from_direction(x, theta).point(rho)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Contraction

/// Distance from `x` to the lifted geodesic in the chosen metric.
pub fn distance_to_geodesic(
    x: &TracePoint,
    lg: &LiftedGeodesic,
    metric: Metric,
    cfg: &Config,
) -> Result<f64> {
    Ok(project_point(x, lg, metric, cfg)?.distance)
}

/// Projections of a ball about `x`: the spread of the projected times
/// (exact minimizers, one per sample).
#[derive(Clone, Debug, Serialize)]
pub struct ContractionOutcome {
    pub distance: f64,
    pub radius: f64,
    /// Projected time of each ball sample, `x` first.
    pub times: Vec<f64>,
    /// Diameter in `t` of the projected times.
    pub diameter_t: f64,
    /// The same diameter measured by `teich_distance` along the geodesic.
    pub diameter_teich: f64,
    /// Largest `t`-diameter of a single near-minimizer set.
    pub set_diameter: f64,
}

fn contraction_outcome(
    lg: &LiftedGeodesic,
    x: &TracePoint,
    r: f64,
    n: usize,
    metric: Metric,
    rng: &mut impl Rng,
    cfg: &Config,
) -> Result<ContractionOutcome> {
    let projections = match metric {
        Metric::Lipschitz => {
            let px = project_point(x, lg, metric, cfg)?;
            let mut all = vec![px];
            if n > 1 {
                for y in sample_ball_with(x, r, n - 1, 1.0, rng, cfg)? {
                    all.push(project_point(&y, lg, metric, cfg)?);
                }
            }
            all
        }
        Metric::Teichmuller => {
            let fx = flatten(x, BRIDGE_TOL, cfg)?;
            let mut all = vec![project_flat(&fx, lg)];
            if n > 1 {
                for y in sample_flat_ball(&fx, r, n - 1, 1.0, rng)? {
                    all.push(project_flat(&y, lg));
                }
            }
            all
        }
    };
    let distance = projections[0].distance;
    if !(r < distance) {
        return Err(Error::InvalidArgument(format!(
            "ball radius {r} is not below the distance {distance} to the geodesic"
        )));
    }
    let times: Vec<f64> = projections.iter().map(Projection::time).collect();
    let (lo, hi) = times
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| {
            (a.min(t), b.max(t))
        });
    let set_diameter = projections
        .iter()
        .map(|p| {
            let (l, h) = p.span();
            h - l
        })
        .fold(0.0, f64::max);
    let g = &lg.geodesic;
    Ok(ContractionOutcome {
        distance,
        radius: r,
        times,
        diameter_t: hi - lo,
        diameter_teich: teich_distance(&g.point(lo), &g.point(hi)),
        set_diameter,
    })
}

/// Projects `x` and `n − 1` samples of its radius-`r` ball to the lifted
/// geodesic and reports the diameter of the projection set as `b`.
/// Requires `r` below the distance from `x` to the geodesic.
pub fn contraction_experiment(
    lg: &LiftedGeodesic,
    x: &TracePoint,
    r: f64,
    n: usize,
    metric: Metric,
    cfg: &Config,
) -> Result<ExperimentReport> {
    let mut rng = sample_rng(cfg, "contract-single", 0);
    let out = contraction_outcome(lg, x, r, n.max(1), metric, &mut rng, cfg)?;
    let mut records: Vec<Record> = out
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| Record::new(k, "projection_time", t))
        .collect();
    records.push(Record::new(0, "distance", out.distance));
    records.push(Record::new(0, "set_diameter", out.set_diameter));
    let constants = BTreeMap::from([
        ("b".to_string(), out.diameter_t),
        ("b_teich".to_string(), out.diameter_teich),
        ("distance".to_string(), out.distance),
        ("radius".to_string(), r),
    ]);
    Ok(ExperimentReport::new(
        &format!("contract_{metric}"),
        cfg,
        records,
        constants,
        vec![format!("metric={metric}")],
    ))
}

/// The point reached by twisting `node` about its short curve by `s` full
/// twists (fractional allowed).
fn twisted(node: &TracePoint, s: f64) -> Result<TracePoint> {
    let (len, t, frame) = node.anchor_chart();
    TracePoint::from_chart(len, t + s * len, &frame)
}

/// Twist amount at which the distance to the geodesic reaches `target`,
/// by doubling then bisection; `None` when it cannot be reached.
fn twist_to_distance(
    node: &TracePoint,
    sign: f64,
    target: f64,
    lg: &LiftedGeodesic,
    metric: Metric,
    cfg: &Config,
) -> Result<Option<TracePoint>> {
    let dist = |s: f64| -> Result<f64> {
        distance_to_geodesic(&twisted(node, sign * s)?, lg, metric, cfg)
    };
    let mut hi = 0.5;
    while dist(hi)? < target {
        hi *= 2.0;
        if hi > 4096.0 {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if dist(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(twisted(node, sign * hi)?))
}

/// Per-configuration contraction data at distance `D` and `2D` for a fixed
/// radius `R = D/2`.
fn contraction_config(
    i: usize,
    n: usize,
    metric: Metric,
    cfg: &Config,
) -> Result<Option<(ContractionOutcome, ContractionOutcome)>> {
    let mut rng = sample_rng(cfg, "contraction", i as u64);
    let len = rng.gen_range(2.0..4.0);
    let g = cobounded_geodesic(&mut rng, len, cfg)?;
    let lg = lift_geodesic(&g, cfg)?;
    let m = lg.points.len();
    let node = lg.points[rng.gen_range(m / 3..=(2 * m) / 3)];
    let d0 = rng.gen_range(1.0..1.5);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let r = 0.5 * d0;
    let near = twist_to_distance(&node, sign, d0, &lg, metric, cfg)?;
    let far = twist_to_distance(&node, sign, 2.0 * d0, &lg, metric, cfg)?;
    let (Some(near), Some(far)) = (near, far) else {
        return Ok(None);
    };
    let a = contraction_outcome(&lg, &near, r, n, metric, &mut rng, cfg)?;
    let b = contraction_outcome(&lg, &far, r, n, metric, &mut rng, cfg)?;
    Ok(Some((a, b)))
}

/// Strong contraction over `configs` random configurations: a cobounded
/// segment, a point twisted off it to distance `D` and to `2D`, and balls
/// of radius `D/2` with `n` points each. Reports `b` (largest projection
/// diameter) and separately `b_near`, `b_far`.
pub fn contraction_sweep(
    cfg: &Config,
    configs: usize,
    n: usize,
    metric: Metric,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let outcomes: Vec<_> = (0..configs)
        .into_par_iter()
        .map(|i| contraction_config(i, n.max(1), metric, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let (mut b_near, mut b_far, mut used) = (0.0f64, 0.0f64, 0usize);
    let mut set_diameter = 0.0f64;
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            Some((a, b)) => {
                used += 1;
                b_near = b_near.max(a.diameter_t);
                b_far = b_far.max(b.diameter_t);
                records.push(Record::new(i, "distance_near", a.distance));
                records.push(Record::new(i, "diameter_near", a.diameter_t));
                records.push(Record::new(i, "distance_far", b.distance));
                records.push(Record::new(i, "diameter_far", b.diameter_t));
                records.push(Record::new(i, "diameter_teich_near", a.diameter_teich));
                records.push(Record::new(i, "diameter_teich_far", b.diameter_teich));
                records.push(Record::new(
                    i,
                    "set_diameter",
                    a.set_diameter.max(b.set_diameter),
                ));
                set_diameter = set_diameter.max(a.set_diameter.max(b.set_diameter));
            }
            None => records.push(Record::new(i, "skipped", 1.0)),
        }
    }
    let constants = BTreeMap::from([
        ("b".to_string(), b_near.max(b_far)),
        ("b_near".to_string(), b_near),
        ("b_far".to_string(), b_far),
        ("set_diameter".to_string(), set_diameter),
        ("configurations".to_string(), used as f64),
    ]);
    Ok(ExperimentReport::new(
        &format!("contraction_{metric}"),
        cfg,
        records,
        constants,
        vec![
            format!("metric={metric}"),
            "balls are certified by the truncated Thurston sup".into(),
        ],
    ))
}

// ---------------------------------------------------------------------------
// Balanced times

/// `|projection time − t_α|` for the short-marking curves of points near
/// random cobounded segments. Curves whose balanced time falls outside
/// the segment are counted under `outside` and skipped.
pub fn balanced_lemma_stat(cfg: &Config, n: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    let per: Vec<Vec<Record>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<Record>> {
            let mut rng = sample_rng(cfg, "balanced", i as u64);
            let len = rng.gen_range(2.0..4.0);
            let g = cobounded_geodesic(&mut rng, len, cfg)?;
            let lg = lift_geodesic(&g, cfg)?;
            let node = lg.points[rng.gen_range(0..lg.points.len())];
            let x = if rng.gen_bool(0.1) {
                node
            } else {
                let (l, t, frame) = node.anchor_chart();
                let l2 = l * rng.gen_range(-1.5f64..1.0).exp();
                TracePoint::from_chart(l2, t + rng.gen_range(-2.0..2.0) * l, &frame)?
            };
            let p = project_point(&x, &lg, Metric::Lipschitz, cfg)?;
            let mut out = vec![Record::new(i, "distance", p.distance)];
            for a in x.short_marking().curves() {
                match g.balanced_time(a) {
                    BalancedTime::Finite(t) if t >= g.t0 && t <= g.t1 => {
                        out.push(Record::new(i, "gap", (p.time() - t).abs()));
                    }
                    _ => out.push(Record::new(i, "outside", 1.0)),
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<Record> = per.into_iter().flatten().collect();
    let gaps: Vec<f64> = records
        .iter()
        .filter(|r| r.quantity == "gap")
        .map(|r| r.value)
        .collect();
    let constants = BTreeMap::from([
        ("gap_max".to_string(), Summary::of(&gaps).max),
        ("gaps".to_string(), gaps.len() as f64),
    ]);
    Ok(ExperimentReport::new(
        "balanced",
        cfg,
        records,
        constants,
        vec![],
    ))
}

// ---------------------------------------------------------------------------
// Intersection versus balanced times

/// Pairs of slopes that are short somewhere on `g`, with finite balanced
/// times inside the segment at least `GAP_D0` apart.
fn separated_pairs(g: &TeichGeodesic) -> Vec<(Slope, Slope, f64, f64)> {
    let mut pool = BTreeMap::new();
    for t in crate::flat::grid(g.t0, g.t1, 0.25) {
        for s in shortest_slopes(&g.point(t), 3) {
            pool.insert(s.tie_key(), s);
        }
    }
    let timed: Vec<(Slope, f64)> = pool
        .into_values()
        .filter_map(|s| match g.balanced_time(s) {
            BalancedTime::Finite(t) if t >= g.t0 && t <= g.t1 => Some((s, t)),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (k, &(a, ta)) in timed.iter().enumerate() {
        for &(b, tb) in &timed[k + 1..] {
            if (ta - tb).abs() >= GAP_D0 {
                out.push((a, b, ta, tb));
            }
        }
    }
    out
}

/// For `n` slope pairs on random cobounded segments with
/// `|t_α − t_β| ≥ 2`, records `log i(α,β)² − 2|t_α − t_β| − log(Ext·Ext)`
/// (extremal lengths at the balanced times) and the length analogue
/// `log i − |t_α − t_β| − log(ℓ̂ ℓ̂)` with `ℓ̂ = √Ext`. The minima are
/// `log c₁` and `log c₂`.
pub fn minsky_gap_stat(cfg: &Config, n: usize) -> Result<ExperimentReport> {
    const PER_SEGMENT: usize = 8;
    cfg.validate()?;
    let segments = n.div_ceil(PER_SEGMENT);
    let per: Vec<Vec<(f64, f64, f64)>> = (0..segments)
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, f64, f64)>> {
            let mut rng = sample_rng(cfg, "minsky", i as u64);
            let len = rng.gen_range(5.0..8.0);
            let g = cobounded_geodesic(&mut rng, len, cfg)?;
            let mut pairs = separated_pairs(&g);
            pairs.shuffle(&mut rng);
            Ok(pairs
                .into_iter()
                .take(PER_SEGMENT)
                .map(|(a, b, ta, tb)| {
                    let i = intersection(a, b) as f64;
                    let dt = (ta - tb).abs();
                    let ln_ext = (g.ext_min(a) * g.ext_min(b)).ln();
                    let c1 = 2.0 * i.ln() - 2.0 * dt - ln_ext;
                    let c2 = i.ln() - dt - 0.5 * ln_ext;
                    (dt, c1, c2)
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut k = 0;
    'outer: for group in per {
        for (dt, c1, c2) in group {
            if k == n {
                break 'outer;
            }
            records.push(Record::new(k, "dt", dt));
            records.push(Record::new(k, "log_c1", c1));
            records.push(Record::new(k, "log_c2", c2));
            k += 1;
        }
    }
    let min = |q: &str| {
        records
            .iter()
            .filter(|r| r.quantity == q)
            .map(|r| r.value)
            .fold(f64::INFINITY, f64::min)
    };
    let constants = BTreeMap::from([
        ("log_c1".to_string(), min("log_c1")),
        ("log_c2".to_string(), min("log_c2")),
        ("pairs".to_string(), k as f64),
    ]);
    Ok(ExperimentReport::new(
        "minsky_gap",
        cfg,
        records,
        constants,
        vec![format!("D0={GAP_D0}")],
    ))
}

// ---------------------------------------------------------------------------
// Asymmetry and the bridge

fn thick_pair(
    rng: &mut impl Rng,
    cfg: &Config,
) -> Result<(FlatPoint, FlatPoint, TracePoint, TracePoint)> {
    const ATTEMPTS: usize = 200;
    for _ in 0..ATTEMPTS {
        let a = random_thick_flat(rng);
        let b = TeichGeodesic::from_direction(&a, rng.gen_range(0.0..2.0 * PI))
            .point(rng.gen_range(0.5..2.5));
        if flat_systole(&b).1 < cfg.ext_floor() {
            continue;
        }
        let x = uniformize(&a, None, BRIDGE_TOL, cfg)?;
        if x.systole_with_length().1 < cfg.eps_thick {
            continue;
        }
        let y = uniformize(&b, None, BRIDGE_TOL, cfg)?;
        return Ok((a, b, x, y));
    }
    Err(Error::SamplingFailed(ATTEMPTS))
}

/// The thin witness of asymmetry: `x` with a curve of length `0.001`, `y`
/// the thick point with the same marking.
pub fn asymmetry_witness(cfg: &Config) -> Result<(f64, f64)> {
    let x = TracePoint::from_fn(0.001, 0.0)?;
    let y = TracePoint::from_fn(1.0, 0.0)?;
    let n = cfg.denominator_bound;
    Ok((lipschitz_brute(&x, &y, n).0, lipschitz_brute(&y, &x, n).0))
}

/// Over `n` pairs with thick `x`: the ratio `brute(x,y)/brute(y,x)` (half
/// of the pairs pinch `y` into the thin part) and, for thick pairs, the
/// bridge residual `|d_T(a,b) − max(d̂_L(x,y), d̂_L(y,x))|`. Adds the thin
/// witness as a constant.
pub fn asymmetry_stat(cfg: &Config, n: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    let nb = cfg.denominator_bound;
    let per: Vec<Vec<Record>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<Record>> {
            let mut rng = sample_rng(cfg, "asymmetry", i as u64);
            let (a, b, x, mut y) = thick_pair(&mut rng, cfg)?;
            let mut out = Vec::new();
            if rng.gen_bool(0.5) {
                let d_t = teich_distance(&a, &b);
                let f = lipschitz_candidates(&x, &y).0;
                let r = lipschitz_candidates(&y, &x).0;
                out.push(Record::new(i, "teich", d_t));
                out.push(Record::new(i, "bridge_residual", (d_t - f.max(r)).abs()));
            } else {
                let (len, t, frame) = y.anchor_chart();
                y = TracePoint::from_chart(len * (-rng.gen_range(0.0..4.0f64)).exp(), t, &frame)?;
            }
            let fwd = lipschitz_brute(&x, &y, nb).0;
            let bwd = lipschitz_brute(&y, &x, nb).0;
            out.push(Record::new(i, "forward", fwd));
            out.push(Record::new(i, "backward", bwd));
            out.push(Record::new(i, "ratio", fwd / bwd));
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<Record> = per.into_iter().flatten().collect();
    let max = |q: &str| {
        records
            .iter()
            .filter(|r| r.quantity == q)
            .map(|r| r.value)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (wf, wb) = asymmetry_witness(cfg)?;
    let constants = BTreeMap::from([
        ("C_asym".to_string(), max("ratio")),
        ("c_bridge".to_string(), max("bridge_residual")),
        ("witness_forward".to_string(), wf),
        ("witness_backward".to_string(), wb),
        ("witness_ratio".to_string(), wf / wb),
    ]);
    Ok(ExperimentReport::new(
        "asymmetry",
        cfg,
        records,
        constants,
        vec!["witness: x = from_fn(0.001, 0), y = from_fn(1, 0)".into()],
    ))
}

// ---------------------------------------------------------------------------
// Bounded combinatorics and coboundedness

/// Over `n` endpoint pairs `a`, `b = a·(W·T_α^k)` (α the flat systole of
/// `a`, `k = i mod 9`, `W` a short random word): the bounded-combinatorics
/// constant of the flat markings against the least flat systole along the
/// connecting geodesic. Constants `min_systole_bc_le_K` are the running
/// minima over `bc ≤ K`.
pub fn bc_vs_cobounded(cfg: &Config, n: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    let rows: Vec<(u64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(u64, f64)> {
            let mut rng = sample_rng(cfg, "bc", i as u64);
            let a = random_thick_flat(&mut rng);
            let (alpha, _) = flat_systole(&a);
            let w = rng.gen_range(0..=2);
            let m = random_word(&mut rng, w)
                .compose(&MappingClass::twist_about(alpha).pow((i % 9) as i64));
            let b = a.act(&m);
            let bc = bc_constant(&flat_marking(&a), &flat_marking(&b), cfg.denominator_bound);
            let sys = if teich_distance(&a, &b) < 1e-12 {
                flat_systole(&a).1
            } else {
                min_systole_along(&TeichGeodesic::through(&a, &b)?, cfg.grid_step)?
            };
            Ok((bc, sys))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut by_bc: BTreeMap<u64, f64> = BTreeMap::new();
    for (i, &(bc, sys)) in rows.iter().enumerate() {
        records.push(Record::new(i, "bc", bc as f64));
        records.push(Record::new(i, "min_systole", sys));
        let e = by_bc.entry(bc).or_insert(f64::INFINITY);
        *e = e.min(sys);
    }
    let mut constants = BTreeMap::new();
    let mut running = f64::INFINITY;
    for (bc, m) in by_bc {
        running = running.min(m);
        constants.insert(format!("min_systole_bc_le_{bc:03}"), running);
    }
    Ok(ExperimentReport::new(
        "bc_cobounded",
        cfg,
        records,
        constants,
        vec!["no claim about the converse direction is tested".into()],
    ))
}

// ---------------------------------------------------------------------------
// Quasi-geodesics and fellow traveling

/// A discrete path built by greedy descent of the distance to its target.
#[derive(Clone, Debug, Serialize)]
pub struct QuasiGeodesic {
    pub points: Vec<TracePoint>,
    /// `brute(z_k, z_{k+1})`.
    pub hops: Vec<f64>,
    /// `brute(x, y)`.
    pub distance: f64,
    /// Sum of the hops.
    pub length: f64,
    /// `length / (distance + 1)`, so `length ≤ Q·distance + Q`.
    pub q: f64,
}

/// Greedy quasi-geodesic from `x` to `y` in the truncated Thurston
/// distance `brute(·,·, cfg.denominator_bound)`. Each hop picks, among
/// chart moves of length in `[step/2, 2·step]` in eight directions, the one
/// closest to `y`, and must gain at least `step/4`; the final hop to `y`
/// may be shorter. Both endpoints must be thick with bounded combinatorics
/// (`bc ≤ cfg.k_bc`).
pub fn build_quasi_geodesic(x: &TracePoint, y: &TracePoint, cfg: &Config) -> Result<QuasiGeodesic> {
    cfg.validate()?;
    for (name, p) in [("x", x), ("y", y)] {
        let sys = p.systole_with_length().1;
        if sys < cfg.eps_thick {
            return Err(Error::Thin {
                systole: sys,
                floor: cfg.eps_thick,
            });
        }
        let _ = name;
    }
    let bc = bc_constant(
        &x.short_marking(),
        &y.short_marking(),
        cfg.denominator_bound,
    );
    if bc > cfg.k_bc {
        return Err(Error::InvalidArgument(format!(
            "endpoints have combinatorics {bc} above k_bc = {}",
            cfg.k_bc
        )));
    }
    let nb = cfg.denominator_bound;
    let step = PATH_STEP;
    let dist = |a: &TracePoint, b: &TracePoint| framed_brute(a, b, nb);
    let total = dist(x, y);
    let mut points = vec![*x];
    let mut hops = Vec::new();
    if x == y || total == 0.0 {
        return Ok(QuasiGeodesic {
            points,
            hops,
            distance: total,
            length: 0.0,
            q: 0.0,
        });
    }
    let cap = 4 * (total / step).ceil() as usize + 20;
    // Proposals along the conformal geodesic toward y complement the chart
    // directions, which lose alignment with y when the anchor chart switches.
    let fy = flatten(y, BRIDGE_TOL, cfg)?;
    let mut z = *x;
    let mut dz = total;
    let mut radii = [step; PATH_DIRECTIONS];
    let mut heading = step;
    while dz > 2.0 * step {
        if hops.len() == cap {
            return Err(Error::NonConvergence(cap));
        }
        let (len, t, frame) = z.anchor_chart();
        let mut best: Option<(f64, f64, TracePoint)> = None;
        let consider = |h: f64, c: TracePoint, best: &mut Option<(f64, f64, TracePoint)>| {
            let dc = dist(&c, y);
            if best.as_ref().is_none_or(|b| dc < b.0) {
                *best = Some((dc, h, c));
            }
        };
        // Eight chart directions at z.
        for (j, r) in radii.iter_mut().enumerate() {
            let phi = 2.0 * PI * j as f64 / PATH_DIRECTIONS as f64;
            let propose = |r: f64| {
                TracePoint::from_chart(len * (r * phi.cos()).exp(), t + r * phi.sin() * len, &frame)
            };
            if let Some((h, c)) = adapt_hop(r, 1.0, step, propose, |c| dist(&z, c)) {
                consider(h, c, &mut best);
            }
        }
        // Along the conformal geodesic from z toward y.
        if let Ok(fz) = flatten(&z, BRIDGE_TOL, cfg) {
            if let Ok(g) = TeichGeodesic::through(&fz, &fy) {
                let d = g.length();
                let propose = |s: f64| uniformize(&g.point(s.min(d)), None, BRIDGE_TOL, cfg);
                if let Some((h, c)) = adapt_hop(&mut heading, d, step, propose, |c| dist(&z, c)) {
                    consider(h, c, &mut best);
                }
            }
        }
        match best {
            Some((dc, h, c)) if dc < dz - 0.25 * step => {
                let c = recentre(&c)?;
                points.push(c);
                hops.push(h);
                z = c;
                dz = dc;
            }
            _ => return Err(Error::NonConvergence(hops.len())),
        }
    }
    // Finish at y; drop a last point that would leave a too-short hop when
    // its predecessor reaches y within the hop bound.
    if dz < 0.5 * step && points.len() > 1 {
        let prev = points[points.len() - 2];
        let dp = dist(&prev, y);
        if dp <= 2.0 * step {
            points.pop();
            hops.pop();
            dz = dp;
        }
    }
    points.push(*y);
    hops.push(dz);
    let length: f64 = hops.iter().sum();
    Ok(QuasiGeodesic {
        points,
        hops,
        distance: total,
        length,
        q: length / (total + 1.0),
    })
}

/// `d̂_L(a, b)` by brute force in the frames of both short markings. The
/// distance is invariant under mapping classes, and each frame centres the
/// height box on one of the points, so a point that wandered far from the
/// basis cannot hide its longest ratios outside the box.
fn framed_brute(a: &TracePoint, b: &TracePoint, bound: i64) -> f64 {
    [a, b]
        .into_iter()
        .filter_map(|p| {
            let m = p.short_marking();
            MappingClass::sending_edge_to_basis(m.pants, m.dual).ok()
        })
        .map(|f| lipschitz_brute(&a.pushforward(&f), &b.pushforward(&f), bound).0)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The same structure charted on its own short marking, which keeps the
/// anchor well conditioned as chart proposals wander.
fn recentre(z: &TracePoint) -> Result<TracePoint> {
    let m = z.short_marking();
    let frame = MappingClass::sending_edge_to_basis(m.pants, m.dual)?;
    let (len, t) = z.pushforward(&frame).chart();
    TracePoint::from_chart(len, t, &frame)
}

/// Rescales a proposal parameter (by factors of 1.6, at most eight times)
/// until the hop length lands in `[step/2, 2·step]`; the parameter is kept
/// for the next hop. `None` when no admissible hop was found or a
/// proposal could not be built.
fn adapt_hop(
    param: &mut f64,
    max_param: f64,
    step: f64,
    propose: impl Fn(f64) -> Result<TracePoint>,
    hop: impl Fn(&TracePoint) -> f64,
) -> Option<(f64, TracePoint)> {
    for _ in 0..8 {
        let c = propose(*param).ok()?;
        let h = hop(&c);
        if h < 0.5 * step {
            if *param >= max_param {
                return None;
            }
            *param *= 1.6;
        } else if h > 2.0 * step {
            *param /= 1.6;
        } else {
            return Some((h, c));
        }
    }
    None
}

/// `max(d̂_L(a, b), d̂_L(b, a))`.
fn symmetric_candidates(a: &TracePoint, b: &TracePoint) -> f64 {
    lipschitz_candidates(a, b)
        .0
        .max(lipschitz_candidates(b, a).0)
}

/// Fellow-traveling data of one endpoint pair.
#[derive(Clone, Debug, Serialize)]
pub struct FellowOutcome {
    pub distance: f64,
    /// Largest symmetrized distance from a path point to the nearest node.
    pub r: f64,
    pub q: f64,
    /// Least hyperbolic systole over both paths.
    pub min_systole: f64,
    /// Two-sided symmetrized distance between the two paths.
    pub hausdorff: f64,
    pub hops: usize,
}

fn fellow_outcome(x: &TracePoint, y: &TracePoint, cfg: &Config) -> Result<FellowOutcome> {
    let forward = build_quasi_geodesic(x, y, cfg)?;
    let backward = build_quasi_geodesic(y, x, cfg)?;
    let fx = flatten(x, BRIDGE_TOL, cfg)?;
    let fy = flatten(y, BRIDGE_TOL, cfg)?;
    let lg = lift_geodesic(&TeichGeodesic::through(&fx, &fy)?, cfg)?;
    let all: Vec<&TracePoint> = forward.points.iter().chain(&backward.points).collect();
    let r = all
        .iter()
        .map(|z| {
            lg.points
                .iter()
                .map(|n| symmetric_candidates(z, n))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let min_systole = all
        .iter()
        .map(|z| z.systole_with_length().1)
        .fold(f64::INFINITY, f64::min);
    let one_sided = |a: &[TracePoint], b: &[TracePoint]| {
        a.iter()
            .map(|z| {
                b.iter()
                    .map(|w| symmetric_candidates(z, w))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    let hausdorff = one_sided(&forward.points, &backward.points)
        .max(one_sided(&backward.points, &forward.points));
    Ok(FellowOutcome {
        distance: forward.distance,
        r,
        q: forward.q.max(backward.q),
        min_systole,
        hausdorff,
        hops: forward.hops.len() + backward.hops.len(),
    })
}

/// Fellow traveling for one pair: quasi-geodesics both ways, the lifted
/// Teichmüller geodesic between the flattened endpoints, and the constants
/// `R`, `Q`, the systole floor and the Hausdorff bound.
pub fn fellow_travel_experiment(
    x: &TracePoint,
    y: &TracePoint,
    cfg: &Config,
) -> Result<ExperimentReport> {
    let o = fellow_outcome(x, y, cfg)?;
    let records = vec![
        Record::new(0, "distance", o.distance),
        Record::new(0, "R", o.r),
        Record::new(0, "Q", o.q),
        Record::new(0, "min_systole", o.min_systole),
        Record::new(0, "hausdorff", o.hausdorff),
    ];
    let constants = BTreeMap::from([
        ("R".to_string(), o.r),
        ("Q".to_string(), o.q),
        ("systole_floor".to_string(), o.min_systole),
        ("hausdorff".to_string(), o.hausdorff),
    ]);
    Ok(ExperimentReport::new(
        "fellow_pair",
        cfg,
        records,
        constants,
        vec!["quasi-geodesics stand in for Lipschitz geodesics".into()],
    ))
}

/// Least-squares slope of `ys` against `xs`.
pub fn trend(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Fellow traveling over `n` thick bounded-combinatorics pairs taken on
/// cobounded segments of Teichmüller length in `[2, 8]`, plus a contrast
/// set of heavily twisted pairs whose geodesics leave the thick part.
pub fn fellow_travel_sweep(cfg: &Config, n: usize) -> Result<ExperimentReport> {
    const ATTEMPTS: usize = 50;
    cfg.validate()?;
    let rows: Vec<Option<FellowOutcome>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Option<FellowOutcome>> {
            let mut rng = sample_rng(cfg, "fellow", i as u64);
            for _ in 0..ATTEMPTS {
                let sep = rng.gen_range(2.0..8.0);
                let g = cobounded_geodesic(&mut rng, sep, cfg)?;
                let x = uniformize(&g.start(), None, BRIDGE_TOL, cfg)?;
                let y = uniformize(&g.end(), None, BRIDGE_TOL, cfg)?;
                match fellow_outcome(&x, &y, cfg) {
                    Ok(o) => return Ok(Some(o)),
                    Err(Error::Thin { .. } | Error::InvalidArgument(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?;
    let contrast: Vec<(u64, f64)> = (0..n.min(10))
        .into_par_iter()
        .map(|i| -> Result<(u64, f64)> {
            let mut rng = sample_rng(cfg, "fellow-contrast", i as u64);
            let a = random_thick_flat(&mut rng);
            let (alpha, _) = flat_systole(&a);
            let b = a.act(&MappingClass::twist_about(alpha).pow(20 + 5 * i as i64));
            let bc = bc_constant(&flat_marking(&a), &flat_marking(&b), cfg.denominator_bound);
            Ok((
                bc,
                min_systole_along(&TeichGeodesic::through(&a, &b)?, cfg.grid_step)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let (mut ds, mut rs, mut qs) = (Vec::new(), Vec::new(), Vec::new());
    let mut floor = f64::INFINITY;
    let mut hausdorff = 0.0f64;
    for (i, row) in rows.iter().enumerate() {
        match row {
            Some(o) => {
                records.push(Record::new(i, "distance", o.distance));
                records.push(Record::new(i, "R", o.r));
                records.push(Record::new(i, "Q", o.q));
                records.push(Record::new(i, "min_systole", o.min_systole));
                records.push(Record::new(i, "hausdorff", o.hausdorff));
                records.push(Record::new(i, "hops", o.hops as f64));
                ds.push(o.distance);
                rs.push(o.r);
                qs.push(o.q);
                floor = floor.min(o.min_systole);
                hausdorff = hausdorff.max(o.hausdorff);
            }
            None => records.push(Record::new(i, "skipped", 1.0)),
        }
    }
    let mut contrast_floor = f64::INFINITY;
    for (i, &(bc, sys)) in contrast.iter().enumerate() {
        records.push(Record::new(i, "contrast_bc", bc as f64));
        records.push(Record::new(i, "contrast_min_systole", sys));
        contrast_floor = contrast_floor.min(sys);
    }
    let constants = BTreeMap::from([
        ("R".to_string(), rs.iter().copied().fold(0.0, f64::max)),
        ("Q".to_string(), qs.iter().copied().fold(0.0, f64::max)),
        ("R_trend".to_string(), trend(&ds, &rs)),
        ("Q_trend".to_string(), trend(&ds, &qs)),
        ("systole_floor".to_string(), floor),
        ("hausdorff".to_string(), hausdorff),
        ("pairs".to_string(), ds.len() as f64),
        ("contrast_systole_floor".to_string(), contrast_floor),
    ]);
    Ok(ExperimentReport::new(
        "fellow",
        cfg,
        records,
        constants,
        vec!["quasi-geodesics stand in for Lipschitz geodesics".into()],
    ))
}

// ---------------------------------------------------------------------------
// Distance and length formulas

/// Candidate-curve estimate against the truncated sup at `n1` and `n2 > n1`
/// over `n` pairs: `x` thick or thin (length down to `e^{-7}`), `y` random.
/// Records `gap = brute(n1) − candidate`, `stability = brute(n2) −
/// brute(n1)` and sandwich violations (`candidate > brute(n1)` when `n1`
/// covers the short marking).
pub fn candidate_gap_stat(cfg: &Config, n: usize, n1: i64, n2: i64) -> Result<ExperimentReport> {
    cfg.validate()?;
    let rows: Vec<(f64, f64, f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg, "candidate", i as u64);
            let lo = if i % 2 == 0 { 0.2f64.ln() } else { -7.0 };
            let x = random_trace_point(&mut rng, lo);
            let y = random_trace_point(&mut rng, 0.05f64.ln());
            let (c, _) = lipschitz_candidates(&x, &y);
            let b = lipschitz_brute_nested(&x, &y, &[n1, n2]);
            let m = x.short_marking();
            let covered = m.curves().iter().all(|s| s.p().abs() <= n1 && s.q() <= n1);
            (c, b[0].0, b[1].0, covered)
        })
        .collect();
    let mut records = Vec::new();
    let (mut gap, mut stab, mut violations) = (f64::NEG_INFINITY, 0.0f64, 0usize);
    for (i, &(c, b1, b2, covered)) in rows.iter().enumerate() {
        records.push(Record::new(i, "candidate", c));
        records.push(Record::new(i, "brute", b1));
        records.push(Record::new(i, "gap", b1 - c));
        records.push(Record::new(i, "stability", b2 - b1));
        if covered {
            gap = gap.max(b1 - c);
            if c > b1 {
                violations += 1;
            }
        }
        stab = stab.max(b2 - b1);
    }
    let constants = BTreeMap::from([
        ("D_cand".to_string(), gap),
        ("stability".to_string(), stab),
        ("violations".to_string(), violations as f64),
        ("N1".to_string(), n1 as f64),
        ("N2".to_string(), n2 as f64),
    ]);
    Ok(ExperimentReport::new(
        "candidate",
        cfg,
        records,
        constants,
        vec![],
    ))
}

/// A marking far from `m` in the Farey graph: the image of `m` under
/// `F·W·F⁻¹`, where `F` carries the basis marking to `m` and `W` is an
/// alternating product of seven twist powers `T^k` with `2 ≤ |k| ≤ 4`, all
/// of one sign.
/// Continued fractions with all quotients at least 2 are Farey geodesics,
/// so every curve of the result is at distance at least 5 from `m`.
pub fn far_marking(rng: &mut impl Rng, m: &Marking) -> Marking {
    let f = MappingClass::sending_edge_to_basis(m.pants, m.dual)
        .expect("a marking is a Farey edge")
        .inverse();
    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
    let mut w = MappingClass::IDENTITY;
    for k in 0..7 {
        let e = sign * rng.gen_range(2..=4);
        let letter = if k % 2 == 0 {
            MappingClass::twist_infinity()
        } else {
            MappingClass::twist_zero()
        };
        w = w.compose(&letter.pow(e));
    }
    Marking::new(Slope::ZERO, Slope::INFINITY)
        .expect("basis marking")
        .apply(&f.compose(&w))
}

/// Ratios of true lengths to the marking formulas over `n` samples:
/// `hyp_ratio = ℓ/est_short`, `ext_ratio = Ext/est_ext`,
/// `any_ratio = ℓ/upper_any` for markings far from the short marking, and
/// `minsky_ratio = ℓ/minsky`. Marking curves themselves are skipped.
pub fn length_formula_stat(cfg: &Config, n: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    let rows: Vec<Vec<Record>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg, "lengths", i as u64);
            let x = random_trace_point(&mut rng, -7.0);
            let g = random_slope(&mut rng, 40);
            let mut out = Vec::new();
            let m = x.short_marking();
            let l = x.hyp_length(g);
            if !m.curves().contains(&g) {
                out.push(Record::new(
                    i,
                    "hyp_ratio",
                    l / length_estimate_short(&x, g),
                ));
                out.push(Record::new(
                    i,
                    "minsky_ratio",
                    l / minsky_length_hyp(&x, g, cfg),
                ));
            }
            let far = far_marking(&mut rng, &m);
            out.push(Record::new(
                i,
                "any_ratio",
                l / length_upper_any(&x, &far, g),
            ));
            let im = rng.gen_range(0.0f64..50f64.ln()).exp().max(0.9);
            let w = rng.gen_range(0..=4);
            let pt = FlatPoint::new(rng.gen_range(-0.5..0.5), im)
                .expect("sampled point is in the upper half-plane")
                .act(&random_word(&mut rng, w));
            let g2 = random_slope(&mut rng, 40);
            if !flat_marking(&pt).curves().contains(&g2) {
                out.push(Record::new(
                    i,
                    "ext_ratio",
                    ext_length(&pt, g2) / ext_marking_formula(&pt, g2),
                ));
            }
            out
        })
        .collect();
    let records: Vec<Record> = rows.into_iter().flatten().collect();
    let two_sided = |q: &str| {
        records
            .iter()
            .filter(|r| r.quantity == q)
            .map(|r| r.value.max(1.0 / r.value))
            .fold(1.0, f64::max)
    };
    let any_max = records
        .iter()
        .filter(|r| r.quantity == "any_ratio")
        .map(|r| r.value)
        .fold(0.0, f64::max);
    let constants = BTreeMap::from([
        ("C".to_string(), two_sided("hyp_ratio")),
        ("C_ext".to_string(), two_sided("ext_ratio")),
        ("C_minsky".to_string(), two_sided("minsky_ratio")),
        ("C_any".to_string(), any_max),
    ]);
    Ok(ExperimentReport::new(
        "lengths",
        cfg,
        records,
        constants,
        vec![],
    ))
}
