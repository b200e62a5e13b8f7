//! Distance and length estimators: Thurston's sup formula truncated to a
//! box of slopes, the candidate-curve estimate from a short marking, and
//! the marking-based length formulas.

use std::cmp::Ordering;

use crate::config::Config;
use crate::flat::{ext_length, flat_marking, FlatPoint};
use crate::fricke::{lengths_tied, TracePoint};
use crate::slopes::{annular_twist, intersection, Marking, Slope};

/// Hyperbolic lengths of every slope with `|p|, q ≤ bound` at one point,
/// stored densely for repeated distance evaluations.
#[derive(Clone, Debug)]
pub struct LengthTable {
    bound: i64,
    lengths: Vec<f64>,
}

impl LengthTable {
    pub fn new(x: &TracePoint, bound: i64) -> Self {
        let bound = bound.max(1);
        let width = (bound + 1) as usize;
        let mut lengths = vec![f64::NAN; (2 * bound + 1) as usize * width];
        x.visit_slopes(bound, |s, t| {
            lengths[Self::index(bound, s)] = t.length();
        });
        LengthTable { bound, lengths }
    }

    fn index(bound: i64, s: Slope) -> usize {
        ((s.p() + bound) * (bound + 1) + s.q()) as usize
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    /// The stored length, if `s` lies in the box.
    pub fn get(&self, s: Slope) -> Option<f64> {
        (s.p().abs() <= self.bound && s.q() <= self.bound)
            .then(|| self.lengths[Self::index(self.bound, s)])
    }
}

/// `ln(ℓ_y/ℓ_x)`, written once so every estimator rounds identically.
fn log_ratio(lx: f64, ly: f64) -> f64 {
    (ly / lx).ln()
}

/// Keeps the larger value, breaking ties by the slope tie key.
fn better(cand: (f64, Slope), best: Option<(f64, Slope)>) -> bool {
    match best {
        None => true,
        Some((v, s)) => {
            if cand.0 == v || lengths_tied(cand.0.exp(), v.exp()) {
                cand.1.tie_cmp(&s) == Ordering::Less
            } else {
                cand.0 > v
            }
        }
    }
}

/// `ln max ℓ_y(s)/ℓ_x(s)` over slopes with `|p|, q ≤ n`, and a maximizing
/// slope. A lower bound for the Lipschitz distance `d_L(x, y)`,
/// nondecreasing in `n`.
pub fn lipschitz_brute(x: &TracePoint, y: &TracePoint, n: i64) -> (f64, Slope) {
    lipschitz_brute_table(&LengthTable::new(x, n), y)
}

/// [`lipschitz_brute`] against a precomputed table for `x`.
pub fn lipschitz_brute_table(tx: &LengthTable, y: &TracePoint) -> (f64, Slope) {
    let mut best: Option<(f64, Slope)> = None;
    y.visit_slopes(tx.bound, |s, t| {
        let lx = tx.get(s).expect("both walks cover the same box");
        let cand = (log_ratio(lx, t.length()), s);
        if better(cand, best) {
            best = Some(cand);
        }
    });
    best.expect("the box is non-empty")
}

/// [`lipschitz_brute`] at several bounds from one walk at the largest:
/// entry `k` equals `lipschitz_brute(x, y, bounds[k])` exactly.
pub fn lipschitz_brute_nested(x: &TracePoint, y: &TracePoint, bounds: &[i64]) -> Vec<(f64, Slope)> {
    let top = bounds.iter().copied().max().unwrap_or(1).max(1);
    let tx = LengthTable::new(x, top);
    let mut best: Vec<Option<(f64, Slope)>> = vec![None; bounds.len()];
    y.visit_slopes(top, |s, t| {
        let lx = tx.get(s).expect("both walks cover the same box");
        let cand = (log_ratio(lx, t.length()), s);
        for (b, slot) in bounds.iter().zip(best.iter_mut()) {
            let n = (*b).max(1);
            if s.p().abs() <= n && s.q() <= n && better(cand, *slot) {
                *slot = Some(cand);
            }
        }
    });
    best.into_iter()
        .map(|b| b.expect("the box is non-empty"))
        .collect()
}

/// `ln max ℓ_y/ℓ_x` over the two curves of the short marking of `x`, and
/// the maximizing (candidate) curve.
pub fn lipschitz_candidates(x: &TracePoint, y: &TracePoint) -> (f64, Slope) {
    lipschitz_over(x, y, &x.short_marking())
}

/// `ln max ℓ_y/ℓ_x` over the curves of a given marking.
pub fn lipschitz_over(x: &TracePoint, y: &TracePoint, m: &Marking) -> (f64, Slope) {
    let mut best: Option<(f64, Slope)> = None;
    for s in m.curves() {
        let cand = (log_ratio(x.hyp_length(s), y.hyp_length(s)), s);
        if better(cand, best) {
            best = Some(cand);
        }
    }
    best.expect("a marking has two curves")
}

/// `Σ_{α ∈ m} i(g, α)·ℓ(ᾱ)` with `ᾱ` the other curve of `m`, for any
/// length function. For a marking curve `g` this is `ℓ(g)` itself.
pub fn marking_sum(m: &Marking, g: Slope, len: impl Fn(Slope) -> f64) -> f64 {
    intersection(g, m.pants) as f64 * len(m.dual) + intersection(g, m.dual) as f64 * len(m.pants)
}

/// The short-marking length estimate `Σ i(g, α)·ℓ_x(ᾱ)`.
pub fn length_estimate_short(x: &TracePoint, g: Slope) -> f64 {
    marking_sum(&x.short_marking(), g, |s| x.hyp_length(s))
}

/// The same sum for an arbitrary marking; an upper bound for `ℓ_x(g)`.
pub fn length_upper_any(x: &TracePoint, m: &Marking, g: Slope) -> f64 {
    marking_sum(m, g, |s| x.hyp_length(s))
}

/// The thick–thin length estimate. When the systole `α` is shorter than
/// `eps1` the collar term `i(g, α)·[ln(1/ℓ(α)) + ℓ(α)·tw_α(ᾱ, g)]` plus
/// `i(g, ᾱ)·ℓ(α)` is returned; otherwise the intersection count
/// `i(g, α) + i(g, ᾱ)` with the short marking.
pub fn minsky_length_hyp(x: &TracePoint, g: Slope, cfg: &Config) -> f64 {
    let m = x.short_marking();
    let (alpha, dual) = (m.pants, m.dual);
    let la = x.hyp_length(alpha);
    let ia = intersection(g, alpha) as f64;
    let id = intersection(g, dual) as f64;
    if la < cfg.eps1 {
        let twist = annular_twist(alpha, dual, g).unwrap_or(0) as f64;
        ia * ((1.0 / la).ln() + la * twist) + id * la
    } else {
        ia + id
    }
}

/// `Σ i(g, α)²·Ext(ᾱ)` over the flat short marking.
pub fn ext_marking_formula(pt: &FlatPoint, g: Slope) -> f64 {
    let m = flat_marking(pt);
    let (ip, id) = (
        intersection(g, m.pants) as f64,
        intersection(g, m.dual) as f64,
    );
    ip * ip * ext_length(pt, m.dual) + id * id * ext_length(pt, m.pants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fricke::random_point;

    fn s(p: i64, q: i64) -> Slope {
        Slope::new(p, q).unwrap()
    }

    #[test]
    fn brute_from_a_point_to_itself() {
        let x = random_point(&Config::default(), 3);
        let (v, arg) = lipschitz_brute(&x, &x, 30);
        assert_eq!(v, 0.0);
        assert_eq!(arg, Slope::ZERO);
        let (v, _) = lipschitz_candidates(&x, &x);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn brute_is_monotone_and_dominates_candidates() {
        for k in 0..12 {
            let x = random_point(&Config::default().with_seed(k), (k % 5) as usize);
            let y = random_point(&Config::default().with_seed(100 + k), 2);
            let (a, _) = lipschitz_brute(&x, &y, 20);
            let (b, _) = lipschitz_brute(&x, &y, 40);
            assert!(b >= a);
            let m = x.short_marking();
            let n = m.pants.height().max(m.dual.height()).max(20);
            let (c, _) = lipschitz_candidates(&x, &y);
            assert!(c <= lipschitz_brute(&x, &y, n).0);
        }
    }

    #[test]
    fn brute_table_matches_direct_evaluation() {
        let x = TracePoint::from_fn(1.0, 0.0).unwrap();
        let y = TracePoint::from_fn(1.0, 3.0).unwrap();
        let mut best = f64::NEG_INFINITY;
        for a in crate::slopes::slopes_up_to_height(25) {
            best = best.max((y.hyp_length(a) / x.hyp_length(a)).ln());
        }
        assert_eq!(lipschitz_brute(&x, &y, 25).0, best);
    }

    #[test]
    fn stretched_collar_candidate() {
        let thin = TracePoint::from_fn(0.001, 0.0).unwrap();
        let thick = TracePoint::from_fn(1.0, 0.0).unwrap();
        // Thin to thick: the short curve is stretched a thousandfold.
        let (v, c) = lipschitz_candidates(&thin, &thick);
        assert_eq!(c, Slope::ZERO);
        assert!((v - 1000f64.ln()).abs() < 1e-9);
        // Thick to thin: the dual crosses the long collar.
        let (v, c) = lipschitz_candidates(&thick, &thin);
        assert_eq!(c, Slope::INFINITY);
        let direct = (thin.hyp_length(Slope::INFINITY) / thick.hyp_length(Slope::INFINITY)).ln();
        assert_eq!(v, direct);
    }

    #[test]
    fn short_estimate_examples() {
        let x = TracePoint::modular();
        let est = length_estimate_short(&x, Slope::ONE);
        assert!((est - 2.0 * 1.924_847_300_238_3).abs() < 1e-9);
        // A marking curve: the estimate is its own length.
        assert_eq!(
            length_estimate_short(&x, Slope::ZERO),
            x.hyp_length(Slope::ZERO)
        );
    }

    #[test]
    fn upper_bound_for_far_marking() {
        let x = TracePoint::modular();
        let m = Marking::new(s(5, 8), s(8, 13)).unwrap();
        let v = length_upper_any(&x, &m, Slope::ZERO);
        // i(0/1, 5/8) = 5 and i(0/1, 8/13) = 8.
        let expect = 5.0 * x.hyp_length(s(8, 13)) + 8.0 * x.hyp_length(s(5, 8));
        assert_eq!(v, expect);
        assert!(x.hyp_length(Slope::ZERO) <= v);
        assert_eq!(
            length_upper_any(&x, &x.short_marking(), s(3, 7)),
            length_estimate_short(&x, s(3, 7))
        );
    }

    #[test]
    fn thin_collar_formula() {
        let cfg = Config::default();
        let x = TracePoint::from_fn(0.01, 0.0).unwrap();
        let v = minsky_length_hyp(&x, Slope::INFINITY, &cfg);
        assert!((v - 100f64.ln()).abs() < 1e-9);
        let ratio = x.hyp_length(Slope::INFINITY) / v;
        assert!(ratio > 0.25 && ratio < 4.0);
        // The short curve itself: the remainder term is its length.
        assert_eq!(
            minsky_length_hyp(&x, Slope::ZERO, &cfg),
            x.hyp_length(Slope::ZERO)
        );
        let thick = TracePoint::modular();
        assert_eq!(minsky_length_hyp(&thick, s(2, 3), &cfg), 5.0);
    }

    #[test]
    fn extremal_formula_examples() {
        let i = FlatPoint::square();
        assert!((ext_marking_formula(&i, Slope::ONE) - 2.0).abs() < 1e-15);
        assert!((ext_marking_formula(&i, Slope::ZERO) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nested_bounds_match_separate_walks() {
        let x = random_point(&Config::default(), 2);
        let y = random_point(&Config::default().with_seed(3), 4);
        let v = lipschitz_brute_nested(&x, &y, &[10, 40, 25]);
        for (k, n) in [10, 40, 25].into_iter().enumerate() {
            assert_eq!(v[k], lipschitz_brute(&x, &y, n));
        }
    }
}
