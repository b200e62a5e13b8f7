//! Conformal structures on the once-punctured torus as points of the upper
//! half-plane: extremal lengths, the Teichmüller metric and its geodesics.
//!
//! The slope `p/q` corresponds to the lattice vector `q + p·τ`, so
//! `Ext_τ(p/q) = |q + pτ|² / Im τ`. The Teichmüller metric is half the
//! hyperbolic metric of the upper half-plane, and along the geodesic
//! `G(t) = g·(i e^{2t})` every extremal length has the exact form
//! `A e^{2t} + B e^{−2t}`.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fricke::{lengths_tied, shorter, shortest_neighbour};
use crate::slopes::{apply_mapping_class, MappingClass, Marking, Slope};

/// A point `τ` of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatPoint {
    tau: Complex64,
}

impl FlatPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0 && im.is_finite() && re.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "τ = {re} + {im}i is not in the upper half-plane"
            )));
        }
        Ok(FlatPoint {
            tau: Complex64::new(re, im),
        })
    }

    pub fn from_complex(tau: Complex64) -> Result<Self> {
        Self::new(tau.re, tau.im)
    }

    /// The square torus `τ = i`.
    pub fn square() -> Self {
        FlatPoint {
            tau: Complex64::new(0.0, 1.0),
        }
    }

    /// The hexagonal torus `τ = e^{iπ/3}`.
    pub fn hexagonal() -> Self {
        FlatPoint {
            tau: Complex64::new(0.5, 0.75f64.sqrt()),
        }
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn re(&self) -> f64 {
        self.tau.re
    }

    pub fn im(&self) -> f64 {
        self.tau.im
    }

    /// The lattice vector `q + pτ` of a slope.
    pub fn vector(&self, a: Slope) -> Complex64 {
        a.q() as f64 + a.p() as f64 * self.tau
    }

    /// The image `M·τ` under a mapping class, characterized by
    /// `Ext_{M·τ}(M·a) = Ext_τ(a)`: the Möbius action of `(M⁻¹)ᵀ`.
    pub fn act(&self, m: &MappingClass) -> FlatPoint {
        let [[a, b], [c, d]] = m.entries();
        let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
        FlatPoint {
            tau: (d * self.tau - c) / (a - b * self.tau),
        }
    }

    /// Reduces `τ` by Gauss–Lagrange lattice reduction. Returns the reduced
    /// point `τ_r = M·τ` (with `|Re τ_r| ≤ 1/2`, `|τ_r| ≥ 1`) and `M`, so
    /// that `Ext_τ(a) = Ext_{τ_r}(M·a)`.
    pub fn reduce(&self) -> (FlatPoint, MappingClass) {
        let (s1, s2) = self.reduced_basis();
        let m = MappingClass::new(s2.0, s1.0, s2.1, s1.1)
            .expect("reduced basis is unimodular")
            .inverse();
        (self.act(&m), m)
    }

    /// A Gauss-reduced basis `(s1, s2)` of slope vectors, positively
    /// oriented (`Im(w2/w1) > 0`) with `|w1| ≤ |w2|` and
    /// `|Re(w2 w̄1)| ≤ |w1|²/2`.
    fn reduced_basis(&self) -> ((i64, i64), (i64, i64)) {
        let w = |s: (i64, i64)| s.1 as f64 + s.0 as f64 * self.tau;
        let (mut s1, mut s2) = ((0i64, 1i64), (1i64, 0i64));
        for _ in 0..10_000 {
            if w(s2).norm_sqr() < w(s1).norm_sqr() {
                std::mem::swap(&mut s1, &mut s2);
            }
            let (w1, w2) = (w(s1), w(s2));
            let m = ((w2 * w1.conj()).re / w1.norm_sqr()).round();
            if m == 0.0 {
                break;
            }
            let m = m as i64;
            s2 = (s2.0 - m * s1.0, s2.1 - m * s1.1);
        }
        if (w(s2) / w(s1)).im < 0.0 {
            s2 = (-s2.0, -s2.1);
        }
        (s1, s2)
    }
}

impl Serialize for FlatPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            re: f64,
            im: f64,
        }
        Repr {
            re: self.tau.re,
            im: self.tau.im,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FlatPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            re: f64,
            im: f64,
        }
        let r = Repr::deserialize(d)?;
        FlatPoint::new(r.re, r.im).map_err(serde::de::Error::custom)
    }
}

/// `|q + pτ|² / Im τ`.
pub fn ext_length(pt: &FlatPoint, a: Slope) -> f64 {
    pt.vector(a).norm_sqr() / pt.im()
}

/// `√Ext`, the thick-part stand-in for hyperbolic length.
pub fn proxy_length(pt: &FlatPoint, a: Slope) -> f64 {
    ext_length(pt, a).sqrt()
}

/// Half the hyperbolic distance in the upper half-plane.
pub fn teich_distance(a: &FlatPoint, b: &FlatPoint) -> f64 {
    let num = (a.tau - b.tau).norm();
    let den = 2.0 * (a.im() * b.im()).sqrt();
    // d_H = 2·asinh(|Δτ| / (2√(Im a · Im b)))
    (num / den).asinh()
}

/// `½ ln max Ext_b/Ext_a` over slopes with `|p|, q ≤ bounds[k]`, for each
/// bound in increasing order: the finite version of Kerckhoff's formula.
pub fn kerckhoff_profile(a: &FlatPoint, b: &FlatPoint, bounds: &[i64]) -> Vec<f64> {
    let max_bound = bounds.iter().copied().max().unwrap_or(0).max(1);
    // Best ratio among slopes of height exactly h.
    let mut by_height = vec![f64::NEG_INFINITY; max_bound as usize + 1];
    let mut consider = |s: Slope| {
        let r = ext_length(b, s) / ext_length(a, s);
        let h = s.height() as usize;
        if r > by_height[h] {
            by_height[h] = r;
        }
    };
    consider(Slope::INFINITY);
    for q in 1..=max_bound {
        for p in -max_bound..=max_bound {
            if num_integer::gcd(p, q) == 1 {
                consider(Slope::from_primitive(p, q));
            }
        }
    }
    let mut prefix = Vec::with_capacity(by_height.len());
    let mut best = f64::NEG_INFINITY;
    for r in by_height {
        best = best.max(r);
        prefix.push(best);
    }
    bounds
        .iter()
        .map(|&n| 0.5 * prefix[n.max(1) as usize].ln())
        .collect()
}

/// The slope of least extremal length and that length, ties broken by
/// [`Slope::tie_key`].
pub fn flat_systole(pt: &FlatPoint) -> (Slope, f64) {
    let (s1, s2) = pt.reduced_basis();
    let mut best: Option<(Slope, f64)> = None;
    for v in [
        s1,
        s2,
        (s1.0 + s2.0, s1.1 + s2.1),
        (s1.0 - s2.0, s1.1 - s2.1),
    ] {
        let s = Slope::from_primitive(v.0, v.1);
        let c = (s, ext_length(pt, s));
        if best.is_none_or(|b| shorter(c, b)) {
            best = Some(c);
        }
    }
    best.expect("candidates are non-empty")
}

/// Systole plus its Farey neighbour of least extremal length.
pub fn flat_marking(pt: &FlatPoint) -> Marking {
    let (pants, _) = flat_systole(pt);
    let dual = shortest_neighbour(pants, |s| ext_length(pt, s));
    Marking { pants, dual }
}

/// The `n` slopes of least extremal length, in increasing order (ties by
/// tie key).
pub fn shortest_slopes(pt: &FlatPoint, n: usize) -> Vec<Slope> {
    let (r, m) = pt.reduce();
    let back = m.inverse();
    // In the fundamental domain every slope among the n shortest has
    // coefficients bounded by roughly n in the reduced basis.
    let bound = (n as i64).max(2) + 1;
    let mut cands: Vec<(Slope, f64)> = Vec::new();
    for q in 0..=bound {
        for p in -bound..=bound {
            if (q == 0 && p != 1) || num_integer::gcd(p, q) != 1 {
                continue;
            }
            let s = Slope::from_primitive(p, q);
            cands.push((apply_mapping_class(&back, s), ext_length(&r, s)));
        }
    }
    cands.sort_by(|a, b| {
        if lengths_tied(a.1, b.1) {
            a.0.tie_cmp(&b.0)
        } else {
            a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal)
        }
    });
    cands.truncate(n);
    cands.into_iter().map(|c| c.0).collect()
}

/// Where along a geodesic a slope is shortest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "t", rename_all = "snake_case")]
pub enum BalancedTime {
    Finite(f64),
    /// Extremal length decreases forever: the slope is the vertical
    /// (contracted) direction of the geodesic.
    PlusInfinity,
    /// Extremal length increases forever.
    MinusInfinity,
}

impl BalancedTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            BalancedTime::Finite(t) => Some(t),
            _ => None,
        }
    }

    /// The time clamped into `[t0, t1]`, with a flag set when clamping
    /// happened.
    pub fn clamp(self, t0: f64, t1: f64) -> (f64, bool) {
        match self {
            BalancedTime::Finite(t) if t < t0 => (t0, true),
            BalancedTime::Finite(t) if t > t1 => (t1, true),
            BalancedTime::Finite(t) => (t, false),
            BalancedTime::PlusInfinity => (t1, true),
            BalancedTime::MinusInfinity => (t0, true),
        }
    }
}

/// A unit-speed Teichmüller geodesic `G(t) = g·(i e^{2t})`, `t ∈ [t0, t1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeichGeodesic {
    g: [[f64; 2]; 2],
    pub t0: f64,
    pub t1: f64,
}

impl TeichGeodesic {
    /// `G(t) = i e^{2t}` on `[t0, t1]`.
    pub fn vertical(t0: f64, t1: f64) -> Self {
        TeichGeodesic {
            g: [[1.0, 0.0], [0.0, 1.0]],
            t0,
            t1,
        }
    }

    /// The geodesic with `G(0) = a` and `G(d) = b`, `d = d_T(a, b)`,
    /// restricted to `[0, d]`.
    pub fn through(a: &FlatPoint, b: &FlatPoint) -> Result<Self> {
        let d = teich_distance(a, b);
        if d == 0.0 {
            return Err(Error::InvalidArgument(
                "a geodesic needs two distinct endpoints".into(),
            ));
        }
        // h sends i to a.
        let s = a.im().sqrt();
        let h = [[s, a.re() / s], [0.0, 1.0 / s]];
        let b1 = mobius(&inverse(&h), b.tau);
        // In the disc model the rotation k_θ about i acts as w ↦ e^{2iθ}w;
        // turn the imaginary axis above i onto the ray through b1.
        let i = Complex64::new(0.0, 1.0);
        let phi = ((b1 - i) / (b1 + i)).arg();
        let theta = 0.5 * phi;
        let k = [[theta.cos(), theta.sin()], [-theta.sin(), theta.cos()]];
        Ok(TeichGeodesic {
            g: mul(&h, &k),
            t0: 0.0,
            t1: d,
        })
    }

    /// The unit-speed geodesic leaving `a` at `t = 0` in the direction
    /// making angle `theta` with the upward vertical (counterclockwise),
    /// restricted to `[0, 0]`.
    pub fn from_direction(a: &FlatPoint, theta: f64) -> Self {
        let s = a.im().sqrt();
        let h = [[s, a.re() / s], [0.0, 1.0 / s]];
        // k_θ turns the tangent at i by 2θ.
        let half = 0.5 * theta;
        let k = [[half.cos(), -half.sin()], [half.sin(), half.cos()]];
        TeichGeodesic {
            g: mul(&h, &k),
            t0: 0.0,
            t1: 0.0,
        }
    }

    /// The full geodesic from the boundary point `backward` to `forward`,
    /// parametrized so that `G(0)` is the point closest to `i`, and
    /// restricted to `[0, 0]`.
    pub fn from_endpoints(backward: f64, forward: f64) -> Result<Self> {
        if !(backward.is_finite() && forward.is_finite() && backward != forward) {
            return Err(Error::InvalidArgument(format!(
                "need two distinct finite endpoints, got {backward} and {forward}"
            )));
        }
        let (det, g) = if forward > backward {
            (forward - backward, [[forward, backward], [1.0, 1.0]])
        } else {
            (backward - forward, [[forward, -backward], [1.0, -1.0]])
        };
        let r = det.sqrt();
        let g = [[g[0][0] / r, g[0][1] / r], [g[1][0] / r, g[1][1] / r]];
        let i = FlatPoint::square();
        let dist = |s: f64| {
            let tau = mobius(&g, Complex64::new(0.0, (2.0 * s).exp()));
            teich_distance(&FlatPoint { tau }, &i)
        };
        // Distance to a point is convex along a geodesic.
        let (mut lo, mut hi) = (-40.0f64, 40.0f64);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if dist(a) <= dist(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let s = 0.5 * (lo + hi);
        let shift = [[s.exp(), 0.0], [0.0, (-s).exp()]];
        Ok(TeichGeodesic {
            g: mul(&g, &shift),
            t0: 0.0,
            t1: 0.0,
        })
    }

    /// The image geodesic `t ↦ M·G(t)`.
    pub fn act(&self, m: &MappingClass) -> Self {
        let [[a, b], [c, d]] = m.entries();
        let h = [[d as f64, -c as f64], [-b as f64, a as f64]];
        TeichGeodesic {
            g: mul(&h, &self.g),
            ..*self
        }
    }

    pub fn restricted(&self, t0: f64, t1: f64) -> Self {
        TeichGeodesic { t0, t1, ..*self }
    }

    pub fn length(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn point(&self, t: f64) -> FlatPoint {
        let sigma = Complex64::new(0.0, (2.0 * t).exp());
        FlatPoint {
            tau: mobius(&self.g, sigma),
        }
    }

    pub fn start(&self) -> FlatPoint {
        self.point(self.t0)
    }

    pub fn end(&self) -> FlatPoint {
        self.point(self.t1)
    }

    /// Boundary points `g(0)` and `g(∞)` on `ℝ ∪ {∞}` (`None` is `∞`):
    /// the backward and forward ends of the full geodesic.
    pub fn endpoints(&self) -> (Option<f64>, Option<f64>) {
        let [[a, b], [c, d]] = self.g;
        let at = |num: f64, den: f64| (den != 0.0).then(|| num / den);
        (at(b, d), at(a, c))
    }

    /// `(A, B)` with `Ext_{G(t)}(a) = A e^{2t} + B e^{−2t}`.
    pub fn ext_coefficients(&self, a: Slope) -> (f64, f64) {
        let (u, v) = self.uv(a);
        (u * u, v * v)
    }

    fn uv(&self, a: Slope) -> (f64, f64) {
        let [[ga, gb], [gc, gd]] = self.g;
        let (p, q) = (a.p() as f64, a.q() as f64);
        (p * ga + q * gc, p * gb + q * gd)
    }

    pub fn ext_at(&self, t: f64, a: Slope) -> f64 {
        let (aa, bb) = self.ext_coefficients(a);
        aa * (2.0 * t).exp() + bb * (-2.0 * t).exp()
    }

    /// The time minimizing `Ext_{G(t)}(a)`: `t_α = ¼ ln(B/A)`.
    pub fn balanced_time(&self, a: Slope) -> BalancedTime {
        let (u, v) = self.uv(a);
        let scale = self.g.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
            * (a.p().unsigned_abs() + a.q().unsigned_abs()) as f64;
        let tiny = 1e-13 * scale;
        match (u.abs() <= tiny, v.abs() <= tiny) {
            (true, _) => BalancedTime::PlusInfinity,
            (_, true) => BalancedTime::MinusInfinity,
            _ => BalancedTime::Finite(0.5 * (v / u).abs().ln()),
        }
    }

    /// The least extremal length of `a` along the full geodesic,
    /// `2|uv|`, attained at the balanced time.
    pub fn ext_min(&self, a: Slope) -> f64 {
        let (u, v) = self.uv(a);
        2.0 * (u * v).abs()
    }
}

/// Minimum over the grid `t0, t0 + step, …` (and `t1`) of the flat
/// systole's extremal length.
pub fn min_systole_along(g: &TeichGeodesic, step: f64) -> Result<f64> {
    if !(step > 0.0) || !(g.t1 >= g.t0) || !g.t1.is_finite() || !g.t0.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need step > 0 on a finite interval, got step {step} on [{}, {}]",
            g.t0, g.t1
        )));
    }
    let mut best = flat_systole(&g.point(g.t1)).1;
    for t in grid(g.t0, g.t1, step) {
        best = best.min(flat_systole(&g.point(t)).1);
    }
    Ok(best)
}

/// Grid times `t0 + k·step` in `[t0, t1]`; `t1` itself is appended when it
/// is not (numerically) a grid point.
pub fn grid(t0: f64, t1: f64, step: f64) -> Vec<f64> {
    let n = ((t1 - t0) / step + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * step).collect();
    if t1 - out[n] > 1e-9 * step {
        out.push(t1);
    }
    out
}

fn mobius(m: &[[f64; 2]; 2], z: Complex64) -> Complex64 {
    (m[0][0] * z + m[0][1]) / (m[1][0] * z + m[1][1])
}

fn mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn inverse(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slopes::intersection;

    fn s(p: i64, q: i64) -> Slope {
        Slope::new(p, q).unwrap()
    }

    fn fp(re: f64, im: f64) -> FlatPoint {
        FlatPoint::new(re, im).unwrap()
    }

    #[test]
    fn extremal_length_examples() {
        let i = FlatPoint::square();
        assert!((ext_length(&i, s(0, 1)) - 1.0).abs() < 1e-15);
        assert!((ext_length(&i, s(1, 1)) - 2.0).abs() < 1e-15);
        assert!((ext_length(&fp(0.0, 2.0), s(1, 0)) - 2.0).abs() < 1e-15);
        assert!((proxy_length(&i, s(1, 1)) - 2f64.sqrt()).abs() < 1e-15);
        assert!(FlatPoint::new(0.3, 0.0).is_err());
    }

    #[test]
    fn lattice_convention_matches_intersection() {
        // Area of the parallelogram spanned by two lattice vectors, over
        // the covolume Im τ, is the intersection number.
        let pt = fp(0.37, 1.3);
        for (a, b) in [(s(0, 1), s(1, 0)), (s(2, 3), s(-1, 4)), (s(5, 2), s(1, 1))] {
            let (u, v) = (pt.vector(a), pt.vector(b));
            let area = (u.conj() * v).im.abs() / pt.im();
            assert!((area - intersection(a, b) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_examples() {
        let i = FlatPoint::square();
        let e2i = fp(0.0, 1f64.exp().powi(2));
        assert!((teich_distance(&i, &e2i) - 1.0).abs() < 1e-14);
        assert_eq!(teich_distance(&i, &i), 0.0);
        let d = teich_distance(&i, &fp(1.0, 1.0));
        assert!((d - 0.5 * 1.5f64.acosh()).abs() < 1e-14);
        assert!((d - 0.481_211_825_059_603_4).abs() < 1e-12);
    }

    #[test]
    fn modular_invariance() {
        let pt = fp(-0.31, 0.77);
        for m in [
            MappingClass::twist_zero(),
            MappingClass::twist_infinity(),
            MappingClass::new(2, 3, 1, 2).unwrap(),
            MappingClass::new(5, -2, 3, -1).unwrap(),
        ] {
            let moved = pt.act(&m);
            for a in [s(0, 1), s(1, 0), s(3, -7), s(2, 5)] {
                let (u, v) = (
                    ext_length(&pt, a),
                    ext_length(&moved, apply_mapping_class(&m, a)),
                );
                assert!((u - v).abs() < 1e-10 * u, "{m} {a}: {u} {v}");
            }
        }
    }

    #[test]
    fn geodesic_examples() {
        let i = FlatPoint::square();
        let b = fp(0.0, 1f64.exp().powi(2));
        let g = TeichGeodesic::through(&i, &b).unwrap();
        for t in [0.0, 0.3, 1.0] {
            let p = g.point(t);
            assert!(p.re().abs() < 1e-12 && (p.im() - (2.0 * t).exp()).abs() < 1e-12);
        }
        assert!(TeichGeodesic::through(&i, &i).is_err());
        for (a, b) in [(fp(0.2, 0.9), fp(-1.3, 2.2)), (fp(3.0, 0.1), fp(-0.5, 0.4))] {
            let g = TeichGeodesic::through(&a, &b).unwrap();
            let d = teich_distance(&a, &b);
            assert!((g.start().tau() - a.tau()).norm() < 1e-10);
            assert!((g.point(d).tau() - b.tau()).norm() < 1e-10 * b.tau().norm());
            assert!((teich_distance(&a, &g.point(d / 2.0)) - d / 2.0).abs() < 1e-10);
            assert!((teich_distance(&g.point(0.1), &g.point(0.35)) - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn balanced_time_examples() {
        let g = TeichGeodesic::vertical(-5.0, 5.0);
        assert_eq!(g.balanced_time(s(1, 1)), BalancedTime::Finite(0.0));
        let t = g.balanced_time(s(2, 1)).finite().unwrap();
        assert!((t + 4f64.ln() / 4.0).abs() < 1e-14);
        assert!((t + 0.346_573_590_279_972_6).abs() < 1e-12);
        assert_eq!(g.balanced_time(s(0, 1)), BalancedTime::PlusInfinity);
        assert_eq!(g.balanced_time(s(1, 0)), BalancedTime::MinusInfinity);
    }

    #[test]
    fn coefficients_agree_with_two_sample_solve() {
        let g = TeichGeodesic::through(&fp(0.2, 0.9), &fp(-1.3, 2.2)).unwrap();
        for a in [s(1, 1), s(2, -3), s(0, 1), s(4, 1)] {
            // Ext(t) = A e^{2t} + B e^{−2t} sampled at t = 0 and t = ½.
            let (e0, e1) = (ext_length(&g.point(0.0), a), ext_length(&g.point(0.5), a));
            let (k, kinv) = (1f64.exp(), (-1f64).exp());
            let aa = (e1 - kinv * e0) / (k - kinv);
            let bb = e0 - aa;
            let (ca, cb) = g.ext_coefficients(a);
            assert!((aa - ca).abs() < 1e-9 * (ca + cb), "{a}");
            assert!((bb - cb).abs() < 1e-9 * (ca + cb), "{a}");
        }
    }

    #[test]
    fn cosh_law_is_exact() {
        let g = TeichGeodesic::through(&fp(0.4, 0.6), &fp(-2.0, 1.7)).unwrap();
        for a in [s(1, 1), s(3, 2), s(-1, 2)] {
            let ta = g.balanced_time(a).finite().unwrap();
            let emin = g.ext_min(a);
            for k in 0..20 {
                let t = -2.0 + 0.2 * k as f64;
                let direct = ext_length(&g.point(t), a);
                let law = emin * (2.0 * (t - ta)).cosh();
                assert!(((direct - law) / direct).abs() < 1e-9);
            }
        }
    }

    fn scan_systole(pt: &FlatPoint, bound: i64) -> (Slope, f64) {
        let mut best: Option<(Slope, f64)> = None;
        for a in crate::slopes::slopes_up_to_height(bound) {
            let c = (a, ext_length(pt, a));
            if best.is_none_or(|b| shorter(c, b)) {
                best = Some(c);
            }
        }
        best.unwrap()
    }

    #[test]
    fn systole_examples() {
        assert_eq!(flat_systole(&FlatPoint::square()), (Slope::ZERO, 1.0));
        let pt = fp(0.5, 2.0);
        let (a, e) = flat_systole(&pt);
        assert_eq!((a, e), scan_systole(&pt, 50));
        assert_eq!(a, Slope::ZERO);
        let shifted = fp(1.5, 2.0);
        assert!((flat_systole(&shifted).1 - e).abs() < 1e-12);
        for (re, im) in [
            (0.31, 0.05),
            (-7.2, 0.013),
            (0.5, 0.8660254037844386),
            (2.0, 3.0),
        ] {
            let pt = fp(re, im);
            assert_eq!(flat_systole(&pt), scan_systole(&pt, 120), "{re} {im}");
        }
    }

    #[test]
    fn marking_examples() {
        let m = flat_marking(&FlatPoint::square());
        assert_eq!((m.pants, m.dual), (Slope::ZERO, Slope::INFINITY));
        let m = flat_marking(&FlatPoint::hexagonal());
        assert_eq!(intersection(m.pants, m.dual), 1);
        assert_eq!(m.pants, Slope::ZERO);
        for (re, im) in [(0.31, 0.05), (-7.2, 0.013), (2.0, 3.0)] {
            let m = flat_marking(&fp(re, im));
            assert_eq!(intersection(m.pants, m.dual), 1);
        }
    }

    #[test]
    fn reduction_lands_in_fundamental_domain() {
        for (re, im) in [(0.31, 0.05), (-7.2, 0.013), (2.0, 3.0), (0.1, 1.1)] {
            let pt = fp(re, im);
            let (r, m) = pt.reduce();
            assert!(r.re().abs() <= 0.5 + 1e-9 && r.tau().norm() >= 1.0 - 1e-9);
            for a in [s(0, 1), s(1, 0), s(2, 7)] {
                let (u, v) = (
                    ext_length(&pt, a),
                    ext_length(&r, apply_mapping_class(&m, a)),
                );
                assert!((u - v).abs() < 1e-9 * u);
            }
        }
    }

    #[test]
    fn shortest_slopes_are_sorted_and_complete() {
        let pt = fp(0.23, 0.41);
        let got = shortest_slopes(&pt, 12);
        assert_eq!(got.len(), 12);
        let mut all: Vec<(Slope, f64)> = crate::slopes::slopes_up_to_height(60)
            .into_iter()
            .map(|a| (a, ext_length(&pt, a)))
            .collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        for (k, a) in got.iter().enumerate() {
            assert!((ext_length(&pt, *a) - all[k].1).abs() < 1e-9, "{k}");
        }
    }

    #[test]
    fn kerckhoff_sup_approaches_distance() {
        let (a, b) = (fp(0.1, 1.2), fp(-0.4, 0.9));
        let prof = kerckhoff_profile(&a, &b, &[5, 20, 100, 300]);
        for w in prof.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let d = teich_distance(&a, &b);
        assert!(prof[3] <= d + 1e-12 && d - prof[3] < 0.05);
    }

    #[test]
    fn systole_along_geodesic() {
        let g = TeichGeodesic::vertical(0.0, 0.0);
        assert_eq!(min_systole_along(&g, 0.1).unwrap(), 1.0);
        let g = TeichGeodesic::through(&fp(0.2, 1.0), &fp(0.2, 50.0)).unwrap();
        let coarse = min_systole_along(&g, 0.2).unwrap();
        let fine = min_systole_along(&g, 0.1).unwrap();
        assert!(fine <= coarse);
        assert!(coarse < 0.05);
        assert!(min_systole_along(&g, 0.0).is_err());
    }

    #[test]
    fn json_shape() {
        let text = serde_json::to_string(&fp(0.5, 2.0)).unwrap();
        assert_eq!(text, r#"{"re":0.5,"im":2.0}"#);
        assert!(serde_json::from_str::<FlatPoint>(r#"{"re":0.5,"im":-2.0}"#).is_err());
    }

    #[test]
    fn geodesic_from_endpoints() {
        let g = TeichGeodesic::from_endpoints(-1.0, 1.0).unwrap();
        assert!(teich_distance(&g.point(0.0), &FlatPoint::square()) < 1e-12);
        let (b, f) = g.endpoints();
        assert!((b.unwrap() + 1.0).abs() < 1e-9 && (f.unwrap() - 1.0).abs() < 1e-9);
        let g = TeichGeodesic::from_endpoints(0.4, -2.5).unwrap();
        let (b, f) = g.endpoints();
        assert!((b.unwrap() - 0.4).abs() < 1e-9 && (f.unwrap() + 2.5).abs() < 1e-9);
        let d = teich_distance(&g.point(0.3), &g.point(1.1));
        assert!((d - 0.8).abs() < 1e-9);
        assert!(TeichGeodesic::from_endpoints(1.0, 1.0).is_err());
    }

    #[test]
    fn geodesic_action_matches_pointwise_action() {
        let g = TeichGeodesic::from_endpoints(-1.7, 0.6)
            .unwrap()
            .restricted(-1.0, 1.0);
        let m = MappingClass::twist_infinity()
            .compose(&MappingClass::twist_zero().inverse())
            .compose(&MappingClass::twist_infinity());
        let h = g.act(&m);
        for t in [-1.0, 0.2, 0.9] {
            let (a, b) = (h.point(t), g.point(t).act(&m));
            assert!(teich_distance(&a, &b) < 1e-9);
            assert!(
                (h.ext_at(t, apply_mapping_class(&m, s(2, 3))) - g.ext_at(t, s(2, 3))).abs() < 1e-9
            );
        }
    }

    #[test]
    fn geodesic_from_direction() {
        let a = fp(0.3, 1.4);
        for k in 0..8 {
            let g = TeichGeodesic::from_direction(&a, 0.8 * k as f64);
            assert!(teich_distance(&g.point(0.0), &a) < 1e-12);
            assert!((teich_distance(&g.point(0.7), &a) - 0.7).abs() < 1e-9);
        }
        let up = TeichGeodesic::from_direction(&a, 0.0).point(0.5);
        assert!((up.re() - 0.3).abs() < 1e-12 && up.im() > 1.4);
    }
}
