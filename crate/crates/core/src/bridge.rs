//! Coarse uniformization between conformal points (τ in the upper
//! half-plane) and hyperbolic points (Fricke traces) by matching length
//! spectra on a finite set of short curves.
//!
//! The mismatch of a pair is measured through the log-ratios
//! `r_c = ln ℓ(c) − ln √Ext(c)` over candidate slopes `c`: the objective is
//! `min_λ max_c |r_c − ln λ|`, i.e. half the spread of the `r_c`. The free
//! scale `λ` absorbs the multiplicative constant relating hyperbolic length
//! to `√Ext` in the thick part, so only the shape of the spectrum is
//! matched.
//!
//! Both directions first move the input to a reduced position (τ in the
//! modular fundamental domain, or traces whose short marking is the basis
//! `(0/1, 1/0)`), solve there, and carry the answer back with the same
//! mapping class, so the bridge commutes with the mapping class group.

use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::flat::{ext_length, flat_systole, shortest_slopes, FlatPoint};
use crate::fricke::TracePoint;
use crate::slopes::{apply_mapping_class, MappingClass, Slope};

/// Number of candidate slopes used by default in both directions.
pub const DEFAULT_CANDIDATES: usize = 12;

/// Cap on coordinate-descent moves before reporting non-convergence.
const MAX_MOVES: usize = 20_000;

/// Coarse grid for the hyperbolic side: `ln len` and the fibre position in
/// units of half-twists, `s = t / (len/2)`.
const LN_LEN_RANGE: (f64, f64) = (-1.609_437_912_434_100_3, 1.791_759_469_228_055); // ln 0.2, ln 6
const LN_LEN_NODES: usize = 13;
const S_RANGE: (f64, f64) = (-1.25, 1.25);
const S_NODES: usize = 9;

/// Result of a matching run.
#[derive(Clone, Debug, Serialize)]
pub struct Fit<P> {
    pub point: P,
    /// Half-spread of the log-ratios at the returned point.
    pub objective: f64,
    /// Coordinate-descent moves taken after the coarse grid.
    pub moves: usize,
}

/// Half the spread of `ln ℓ(c) − ½ ln Ext(c)` over the candidates.
pub fn mismatch(
    hyp: impl Fn(Slope) -> f64,
    ext: impl Fn(Slope) -> f64,
    candidates: &[Slope],
) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &c in candidates {
        let r = hyp(c).ln() - 0.5 * ext(c).ln();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let v = 0.5 * (hi - lo);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Deterministic minimization of `f` over `ℝ²`: the best node of `grid`
/// followed by coordinate descent with step halving down to `tol`.
fn descend(
    f: impl Fn(f64, f64) -> f64,
    grid: impl Iterator<Item = (f64, f64)>,
    steps: (f64, f64),
    tol: f64,
) -> Result<((f64, f64), f64, usize)> {
    let mut best = (f64::NAN, f64::NAN);
    let mut val = f64::INFINITY;
    for (u, v) in grid {
        let fv = f(u, v);
        if fv < val {
            val = fv;
            best = (u, v);
        }
    }
    if !val.is_finite() {
        return Err(Error::NonConvergence(0));
    }
    let (mut hu, mut hv) = steps;
    let mut moves = 0;
    while hu.max(hv) > tol {
        let mut improved = false;
        for (du, dv) in [(hu, 0.0), (-hu, 0.0), (0.0, hv), (0.0, -hv)] {
            let cand = (best.0 + du, best.1 + dv);
            let fv = f(cand.0, cand.1);
            if fv < val {
                val = fv;
                best = cand;
                improved = true;
                moves += 1;
                if moves > MAX_MOVES {
                    return Err(Error::NonConvergence(moves));
                }
                break;
            }
        }
        if !improved {
            hu *= 0.5;
            hv *= 0.5;
        }
    }
    Ok((best, val, moves))
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

fn chart_point(ln_len: f64, s: f64) -> Option<TracePoint> {
    let len = ln_len.exp();
    TracePoint::from_fn(len, 0.5 * s * len).ok()
}

/// Nodes of the coarse `(ln len, s)` grid used by [`uniformize`].
pub fn uniformize_grid() -> Vec<(f64, f64)> {
    linspace(LN_LEN_RANGE.0, LN_LEN_RANGE.1, LN_LEN_NODES)
        .flat_map(|u| linspace(S_RANGE.0, S_RANGE.1, S_NODES).map(move |v| (u, v)))
        .collect()
}

/// The hyperbolic point whose length spectrum best matches `√Ext` at `pt`.
///
/// `candidates` defaults to the [`DEFAULT_CANDIDATES`] slopes of least
/// extremal length. Fails with [`Error::Thin`] when the flat systole is
/// below `cfg.ext_floor()`.
pub fn uniformize(
    pt: &FlatPoint,
    candidates: Option<&[Slope]>,
    tol: f64,
    cfg: &Config,
) -> Result<TracePoint> {
    Ok(uniformize_fit(pt, candidates, tol, cfg)?.point)
}

pub fn uniformize_fit(
    pt: &FlatPoint,
    candidates: Option<&[Slope]>,
    tol: f64,
    cfg: &Config,
) -> Result<Fit<TracePoint>> {
    check_tol(tol)?;
    let (_, sys) = flat_systole(pt);
    if sys < cfg.ext_floor() {
        return Err(Error::Thin {
            systole: sys,
            floor: cfg.ext_floor(),
        });
    }
    if candidates.is_some_and(|c| c.is_empty()) {
        return Err(Error::InvalidArgument("candidate set is empty".into()));
    }
    let (reduced, m) = pt.reduce();
    let cands: Vec<Slope> = match candidates {
        Some(c) => c.iter().map(|&s| apply_mapping_class(&m, s)).collect(),
        None => shortest_slopes(&reduced, DEFAULT_CANDIDATES),
    };
    let objective = |u: f64, v: f64| match chart_point(u, v) {
        Some(x) => mismatch(|c| x.hyp_length(c), |c| ext_length(&reduced, c), &cands),
        None => f64::INFINITY,
    };
    let du = (LN_LEN_RANGE.1 - LN_LEN_RANGE.0) / (LN_LEN_NODES - 1) as f64;
    let dv = (S_RANGE.1 - S_RANGE.0) / (S_NODES - 1) as f64;
    let ((u, v), val, moves) = descend(objective, uniformize_grid().into_iter(), (du, dv), tol)?;
    let local = chart_point(u, v).ok_or(Error::NonConvergence(moves))?;
    Ok(Fit {
        point: local.pullback(&m),
        objective: val,
        moves,
    })
}

/// The conformal point whose `√Ext` spectrum best matches the hyperbolic
/// lengths at `pt`. Fails with [`Error::Thin`] when the hyperbolic systole
/// is below `cfg.eps_thick`.
pub fn flatten(pt: &TracePoint, tol: f64, cfg: &Config) -> Result<FlatPoint> {
    Ok(flatten_fit(pt, tol, cfg)?.point)
}

pub fn flatten_fit(pt: &TracePoint, tol: f64, cfg: &Config) -> Result<Fit<FlatPoint>> {
    check_tol(tol)?;
    let marking = pt.short_marking();
    let sys = pt.hyp_length(marking.pants);
    if sys < cfg.eps_thick {
        return Err(Error::Thin {
            systole: sys,
            floor: cfg.eps_thick,
        });
    }
    // Move the short marking to (0/1, 1/0).
    let m = MappingClass::sending_edge_to_basis(marking.pants, marking.dual)?;
    let x = pt.pushforward(&m);
    let cands = shortest_hyperbolic(&x, DEFAULT_CANDIDATES);

    // Initial guess from the marking: |τ| from the length ratio of the
    // marking curves, Re τ from the lengths of 1/1 and −1/1.
    let l0 = x.hyp_length(Slope::ZERO);
    let modulus = x.hyp_length(Slope::INFINITY) / l0;
    let lp = x.hyp_length(Slope::ONE);
    let lm = x.hyp_length(Slope::from_primitive(-1, 1));
    let re0 = ((lp * lp - lm * lm) / (4.0 * l0 * l0)).clamp(-0.5, 0.5);
    let im0 = (modulus * modulus - re0 * re0).max(0.75).sqrt();

    let objective = |re: f64, ln_im: f64| match FlatPoint::new(re, ln_im.exp()) {
        Ok(tau) => mismatch(|c| x.hyp_length(c), |c| ext_length(&tau, c), &cands),
        Err(_) => f64::INFINITY,
    };
    let grid = (-2..=2)
        .flat_map(|i| (-2..=2).map(move |j| (re0 + 0.1 * i as f64, im0.ln() + 0.1 * j as f64)));
    let ((re, ln_im), val, moves) = descend(objective, grid, (0.05, 0.05), tol)?;
    let local = FlatPoint::new(re, ln_im.exp())?;
    Ok(Fit {
        point: local.act(&m.inverse()),
        objective: val,
        moves,
    })
}

/// The `n` shortest slopes of a point whose short marking is `(0/1, 1/0)`.
fn shortest_hyperbolic(x: &TracePoint, n: usize) -> Vec<Slope> {
    let mut all = Vec::new();
    x.visit_slopes(6, |s, t| all.push((s, t.length())));
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.tie_cmp(&b.0)));
    all.truncate(n);
    all.into_iter().map(|c| c.0).collect()
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat::teich_distance;

    const TOL: f64 = 1e-7;

    #[test]
    fn square_torus_has_equal_basis_lengths() {
        let cfg = Config::default();
        let x = uniformize(&FlatPoint::square(), None, TOL, &cfg).unwrap();
        let (a, b) = (x.hyp_length(Slope::ZERO), x.hyp_length(Slope::INFINITY));
        assert!((a - b).abs() < 1e-5, "{a} {b}");
    }

    /// `e^{2πi/3}`, whose three shortest slopes are `0/1`, `1/0`, `1/1`.
    fn hexagonal_plus() -> FlatPoint {
        FlatPoint::new(-0.5, 0.75f64.sqrt()).unwrap()
    }

    #[test]
    fn hexagonal_tori_are_modular() {
        let cfg = Config::default();
        let x = uniformize(&hexagonal_plus(), None, TOL, &cfg).unwrap();
        for t in x.basis() {
            assert!((t.value() - 3.0).abs() < 1e-4, "{}", t.value());
        }
        // e^{iπ/3} is the same torus with 1/1 and −1/1 exchanging roles.
        let x = uniformize(&FlatPoint::hexagonal(), None, TOL, &cfg).unwrap();
        for a in [Slope::ZERO, Slope::INFINITY, Slope::new(-1, 1).unwrap()] {
            assert!((x.trace_of(a).value() - 3.0).abs() < 1e-4);
        }
        assert!((x.trace_of(Slope::ONE).value() - 6.0).abs() < 1e-3);
    }

    #[test]
    fn returned_point_beats_every_grid_node() {
        let cfg = Config::default();
        let pt = FlatPoint::new(0.21, 1.37).unwrap();
        let fit = uniformize_fit(&pt, None, TOL, &cfg).unwrap();
        let (r, _) = pt.reduce();
        let cands = shortest_slopes(&r, DEFAULT_CANDIDATES);
        for (u, v) in uniformize_grid() {
            let x = chart_point(u, v).unwrap();
            let node = mismatch(|c| x.hyp_length(c), |c| ext_length(&r, c), &cands);
            assert!(fit.objective <= node);
        }
    }

    #[test]
    fn round_trips() {
        let cfg = Config::default();
        for pt in [
            FlatPoint::square(),
            FlatPoint::hexagonal(),
            FlatPoint::new(0.3, 1.9).unwrap(),
            FlatPoint::new(-0.45, 0.85).unwrap(),
        ] {
            let x = uniformize(&pt, None, TOL, &cfg).unwrap();
            let back = flatten(&x, TOL, &cfg).unwrap();
            assert!(teich_distance(&pt, &back) < 0.1, "{pt:?} -> {back:?}");
        }
        let back = flatten(&TracePoint::modular(), TOL, &cfg).unwrap();
        assert!(teich_distance(&hexagonal_plus(), &back) < 0.1);
    }

    #[test]
    fn equivariant_under_mapping_classes() {
        let cfg = Config::default();
        let pt = FlatPoint::new(0.17, 1.2).unwrap();
        let m = MappingClass::new(3, 1, 2, 1).unwrap();
        let x = uniformize(&pt, None, TOL, &cfg).unwrap();
        let y = uniformize(&pt.act(&m), None, TOL, &cfg).unwrap();
        for a in [Slope::ZERO, Slope::ONE, Slope::new(2, 5).unwrap()] {
            let (u, v) = (x.hyp_length(a), y.hyp_length(apply_mapping_class(&m, a)));
            assert!((u - v).abs() < 1e-9 * u);
        }
    }

    #[test]
    fn thin_inputs_are_refused() {
        let cfg = Config::default();
        let thin = FlatPoint::new(0.0, 10.0).unwrap();
        assert!(matches!(
            uniformize(&thin, None, TOL, &cfg),
            Err(Error::Thin { .. })
        ));
        let x = TracePoint::from_fn(0.05, 0.0).unwrap();
        assert!(matches!(flatten(&x, TOL, &cfg), Err(Error::Thin { .. })));
        assert!(uniformize(&FlatPoint::square(), Some(&[]), TOL, &cfg).is_err());
    }

    #[test]
    fn deterministic() {
        let cfg = Config::default();
        let pt = FlatPoint::new(-0.2, 1.1).unwrap();
        let a = uniformize(&pt, None, TOL, &cfg).unwrap();
        let b = uniformize(&pt, None, TOL, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
