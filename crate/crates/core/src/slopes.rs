//! Simple closed curves on the once-punctured torus as primitive slopes.
//!
//! A curve is recorded by its homology class `(p, q)` up to sign, written
//! `p/q`. Intersection numbers are determinants, the curve graph is the
//! Farey graph, and the mapping class group `SL(2, Z)` acts linearly.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Returns `(g, s, t)` with `s·a + t·b = g = gcd(a, b)`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i64, 0i64);
    let (mut old_t, mut t) = (0i64, 1i64);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// The curve of slope `p/q` in canonical form: `q > 0`, or `(p, q) = (1, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Slope {
    p: i64,
    q: i64,
}

impl Slope {
    /// Normalizes `(p, q)` to canonical form. Fails on non-primitive pairs.
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if (p, q) == (0, 0) || gcd(p, q) != 1 {
            return Err(Error::InvalidSlope(format!("{p}/{q} is not primitive")));
        }
        Ok(Self::from_primitive(p, q))
    }

    /// Canonical form of a pair already known to be primitive.
    pub(crate) fn from_primitive(p: i64, q: i64) -> Self {
        debug_assert_eq!(gcd(p, q), 1);
        if q < 0 || (q == 0 && p < 0) {
            Slope { p: -p, q: -q }
        } else {
            Slope { p, q }
        }
    }

    pub const ZERO: Slope = Slope { p: 0, q: 1 };
    pub const INFINITY: Slope = Slope { p: 1, q: 0 };
    pub const ONE: Slope = Slope { p: 1, q: 1 };

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    /// `max(|p|, q)`.
    pub fn height(&self) -> i64 {
        self.p.abs().max(self.q)
    }

    /// Ordering used to break ties between equally short curves:
    /// height, then `|p|`, then `q`, then `p`.
    pub fn tie_key(&self) -> (i64, i64, i64, i64) {
        (self.height(), self.p.abs(), self.q, self.p)
    }

    pub fn tie_cmp(&self, other: &Slope) -> Ordering {
        self.tie_key().cmp(&other.tie_key())
    }

    /// The slope as an extended rational; `1/0` maps to `+∞`.
    pub fn value(&self) -> f64 {
        if self.q == 0 {
            f64::INFINITY
        } else {
            self.p as f64 / self.q as f64
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl FromStr for Slope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSlope(format!("cannot parse slope {s:?}"));
        let (p, q) = s.trim().split_once('/').ok_or_else(bad)?;
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        Slope::new(p, q)
    }
}

impl Serialize for Slope {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Slope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Geometric intersection number `|p_a q_b − q_a p_b|`.
pub fn intersection(a: Slope, b: Slope) -> u64 {
    (a.p as i128 * b.q as i128 - a.q as i128 * b.p as i128).unsigned_abs() as u64
}

/// An element of `SL(2, Z)` acting on slopes by `(p, q) ↦ M (p, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MappingClass {
    m: [[i64; 2]; 2],
}

impl MappingClass {
    pub const IDENTITY: MappingClass = MappingClass {
        m: [[1, 0], [0, 1]],
    };

    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a as i128 * d as i128 - b as i128 * c as i128 != 1 {
            return Err(Error::InvalidMappingClass(format!(
                "[[{a},{b}],[{c},{d}]] does not have determinant 1"
            )));
        }
        Ok(MappingClass {
            m: [[a, b], [c, d]],
        })
    }

    /// Left-handed Dehn twist about `1/0`: `[[1,1],[0,1]]`.
    pub fn twist_infinity() -> Self {
        MappingClass {
            m: [[1, 1], [0, 1]],
        }
    }

    /// Dehn twist about `0/1`: `[[1,0],[1,1]]`.
    pub fn twist_zero() -> Self {
        MappingClass {
            m: [[1, 0], [1, 1]],
        }
    }

    /// The Dehn twist about `core`, conjugate of [`Self::twist_infinity`].
    pub fn twist_about(core: Slope) -> Self {
        let to = Self::sending_to_infinity(core);
        to.inverse().compose(&Self::twist_infinity()).compose(&to)
    }

    /// A mapping class sending `core` to `1/0`.
    pub fn sending_to_infinity(core: Slope) -> Self {
        let (_, s, t) = ext_gcd(core.p, core.q);
        // s·p + t·q = 1, and (−q, p) is annihilated.
        MappingClass {
            m: [[s, t], [-core.q, core.p]],
        }
    }

    /// A mapping class sending the Farey edge `(a, b)` to `(0/1, 1/0)`.
    pub fn sending_edge_to_basis(a: Slope, b: Slope) -> Result<Self> {
        let det = b.p as i128 * a.q as i128 - a.p as i128 * b.q as i128;
        // Inverse has columns b, a (so that (1,0) ↦ b and (0,1) ↦ a).
        let inv = match det {
            1 => MappingClass {
                m: [[b.p, a.p], [b.q, a.q]],
            },
            -1 => MappingClass {
                m: [[-b.p, a.p], [-b.q, a.q]],
            },
            _ => {
                return Err(Error::InvalidSlope(format!(
                    "{a} and {b} are not Farey neighbours"
                )))
            }
        };
        Ok(inv.inverse())
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.m
    }

    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.m;
        MappingClass {
            m: [[d, -b], [-c, a]],
        }
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        let [[a, b], [c, d]] = self.m;
        let [[e, f], [g, h]] = other.m;
        MappingClass {
            m: [
                [a * e + b * g, a * f + b * h],
                [c * e + d * g, c * f + d * h],
            ],
        }
    }

    pub fn pow(&self, n: i64) -> Self {
        let base = if n < 0 { self.inverse() } else { *self };
        let mut out = Self::IDENTITY;
        for _ in 0..n.unsigned_abs() {
            out = out.compose(&base);
        }
        out
    }

    /// Raw linear action on a vector, without sign normalization.
    pub(crate) fn apply_vec(&self, p: i64, q: i64) -> (i64, i64) {
        let [[a, b], [c, d]] = self.m;
        (a * p + b * q, c * p + d * q)
    }
}

impl fmt::Display for MappingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[a, b], [c, d]] = self.m;
        write!(f, "[[{a},{b}],[{c},{d}]]")
    }
}

impl FromStr for MappingClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidMappingClass(format!("cannot parse {s:?}"));
        let digits: String = s
            .chars()
            .map(|c| if c == '[' || c == ']' { ' ' } else { c })
            .collect();
        let nums: Vec<i64> = digits
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match nums.as_slice() {
            &[a, b, c, d] => MappingClass::new(a, b, c, d),
            _ => Err(bad()),
        }
    }
}

impl Serialize for MappingClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MappingClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn apply_mapping_class(m: &MappingClass, a: Slope) -> Slope {
    let (p, q) = m.apply_vec(a.p, a.q);
    Slope::from_primitive(p, q)
}

/// Pants curve plus a dual transverse curve meeting it once.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Marking {
    pub pants: Slope,
    pub dual: Slope,
}

impl Marking {
    pub fn new(pants: Slope, dual: Slope) -> Result<Self> {
        if intersection(pants, dual) != 1 {
            return Err(Error::InvalidMarking(format!(
                "{pants} and {dual} intersect {} times",
                intersection(pants, dual)
            )));
        }
        Ok(Marking { pants, dual })
    }

    pub fn curves(&self) -> [Slope; 2] {
        [self.pants, self.dual]
    }

    /// The curve of the marking transverse to `a`.
    pub fn transverse(&self, a: Slope) -> Option<Slope> {
        if a == self.pants {
            Some(self.dual)
        } else if a == self.dual {
            Some(self.pants)
        } else {
            None
        }
    }

    pub fn apply(&self, m: &MappingClass) -> Marking {
        Marking {
            pants: apply_mapping_class(m, self.pants),
            dual: apply_mapping_class(m, self.dual),
        }
    }
}

/// Distance in the Farey graph. After moving `a` to `1/0`, every vertex
/// of a Farey geodesic from `1/0` to the image `x` of `b` is a convergent
/// of the regular continued fraction of `x`, so the search runs on the
/// convergents alone.
pub fn farey_distance(a: Slope, b: Slope) -> u32 {
    if a == b {
        return 0;
    }
    let x = apply_mapping_class(&MappingClass::sending_to_infinity(a), b);
    // Convergents h/k of x = p/q, preceded by 1/0.
    let mut nodes = vec![(1i128, 0i128)];
    let (mut p, mut q) = (x.p as i128, x.q as i128);
    let (mut h1, mut h2, mut k1, mut k2) = (1i128, 0i128, 0i128, 1i128);
    while q != 0 {
        let c = p.div_euclid(q);
        let (h, k) = (c * h1 + h2, c * k1 + k2);
        nodes.push((h, k));
        (h2, h1, k2, k1) = (h1, h, k1, k);
        (p, q) = (q, p - c * q);
    }
    let target = nodes.len() - 1;
    let mut dist = vec![u32::MAX; nodes.len()];
    dist[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..nodes.len() {
            let det = nodes[u].0 * nodes[v].1 - nodes[v].0 * nodes[u].1;
            if dist[v] == u32::MAX && det.abs() == 1 {
                dist[v] = dist[u] + 1;
                if v == target {
                    return dist[v];
                }
                queue.push_back(v);
            }
        }
    }
    unreachable!("consecutive convergents are Farey neighbours")
}

/// Relative twisting of `b` and `c` around `core`: send `core` to `1/0` and
/// compare the integer parts of the images. Agrees with the annular curve
/// graph distance up to an additive error of at most 2.
pub fn annular_twist(core: Slope, b: Slope, c: Slope) -> Result<u64> {
    if intersection(core, b) == 0 || intersection(core, c) == 0 {
        return Err(Error::DisjointFromCore(core));
    }
    let m = MappingClass::sending_to_infinity(core);
    let floor_of = |s: Slope| {
        let t = apply_mapping_class(&m, s);
        t.p.div_euclid(t.q)
    };
    Ok((floor_of(b) - floor_of(c)).unsigned_abs())
}

/// All slopes of height at most `bound`.
pub fn slopes_up_to_height(bound: i64) -> Vec<Slope> {
    let mut out = vec![Slope::INFINITY];
    for q in 1..=bound {
        for p in -bound..=bound {
            if gcd(p, q) == 1 {
                out.push(Slope { p, q });
            }
        }
    }
    out
}

/// Largest annular projection distance between two markings, over core
/// curves of height at most `denominator_bound`. For each core the closest
/// pair of crossing curves (one from each marking) is compared.
pub fn bc_constant(m1: &Marking, m2: &Marking, denominator_bound: i64) -> u64 {
    let mut best = 0;
    for core in slopes_up_to_height(denominator_bound.max(1)) {
        let crossing = |m: &Marking| {
            m.curves()
                .into_iter()
                .filter(|s| intersection(core, *s) > 0)
                .collect::<Vec<_>>()
        };
        let (c1, c2) = (crossing(m1), crossing(m2));
        let closest = c1
            .iter()
            .flat_map(|u| c2.iter().map(move |v| (u, v)))
            .filter_map(|(u, v)| annular_twist(core, *u, *v).ok())
            .min();
        if let Some(t) = closest {
            best = best.max(t);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(p: i64, q: i64) -> Slope {
        Slope::new(p, q).unwrap()
    }

    #[test]
    fn canonical_form() {
        assert_eq!(s(-1, -2), s(1, 2));
        assert_eq!(s(-1, 0), Slope::INFINITY);
        assert_eq!(s(3, -5).to_string(), "-3/5");
        assert!(Slope::new(2, 4).is_err());
        assert!(Slope::new(0, 0).is_err());
        assert!(Slope::new(0, 2).is_err());
    }

    #[test]
    fn parse_roundtrip() {
        let a: Slope = "-3/5".parse().unwrap();
        assert_eq!(a, s(-3, 5));
        assert_eq!("3/-5".parse::<Slope>().unwrap(), s(-3, 5));
        assert!("3".parse::<Slope>().is_err());
        let m: MappingClass = "[[2,1],[1,1]]".parse().unwrap();
        assert_eq!(m.to_string(), "[[2,1],[1,1]]");
        assert!("[[2,1],[1,2]]".parse::<MappingClass>().is_err());
        let json = serde_json::to_string(&s(5, 8)).unwrap();
        assert_eq!(json, "\"5/8\"");
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(intersection(s(0, 1), s(1, 0)), 1);
        assert_eq!(intersection(s(3, 5), s(3, 5)), 0);
        assert_eq!(intersection(s(1, 0), s(3, 5)), 5);
    }

    /// Counts intersection points of straight representatives on the unit
    /// square torus: the curve `p/q` runs along `(q, p)`; a small offset keeps
    /// the two lines in general position.
    fn crossing_count(a: Slope, b: Slope) -> u64 {
        let (ax, ay) = (a.q() as f64, a.p() as f64);
        let (bx, by) = (b.q() as f64, b.p() as f64);
        let (ox, oy) = (0.137, 0.291);
        let det = ax * (-by) - (-bx) * ay;
        if det == 0.0 {
            return 0;
        }
        let mut count = 0;
        let r = a.height() + b.height() + 2;
        for k1 in -r..=r {
            for k2 in -r..=r {
                // s·A + o − u·B = (k1, k2)
                let (rx, ry) = (k1 as f64 - ox, k2 as f64 - oy);
                let s = (rx * (-by) - (-bx) * ry) / det;
                let u = (ax * ry - ay * rx) / det;
                if (0.0..1.0).contains(&s) && (0.0..1.0).contains(&u) {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn intersection_matches_crossing_count_on_the_square() {
        assert_eq!(crossing_count(Slope::INFINITY, s(3, 5)), 5);
        let all = slopes_up_to_height(4);
        for &a in &all {
            for &b in &all {
                assert_eq!(intersection(a, b), crossing_count(a, b), "{a} {b}");
            }
        }
    }

    #[test]
    fn mapping_class_action() {
        let t = MappingClass::twist_infinity();
        assert_eq!(apply_mapping_class(&t, Slope::ZERO), Slope::ONE);
        assert_eq!(apply_mapping_class(&t, Slope::INFINITY), Slope::INFINITY);
        assert_eq!(
            apply_mapping_class(&MappingClass::IDENTITY, s(5, 8)),
            s(5, 8)
        );
        let tw = MappingClass::twist_about(s(1, 2));
        assert_eq!(apply_mapping_class(&tw, s(1, 2)), s(1, 2));
        let m = MappingClass::sending_edge_to_basis(s(2, 3), s(1, 1)).unwrap();
        assert_eq!(apply_mapping_class(&m, s(2, 3)), Slope::ZERO);
        assert_eq!(apply_mapping_class(&m, s(1, 1)), Slope::INFINITY);
    }

    #[test]
    fn farey_small_cases() {
        assert_eq!(farey_distance(s(0, 1), s(1, 0)), 1);
        assert_eq!(farey_distance(s(2, 7), s(2, 7)), 0);
        assert_eq!(farey_distance(s(1, 2), s(5, 2)), 3);
        assert_eq!(farey_distance(Slope::INFINITY, s(5, 8)), 3);
    }

    #[test]
    fn twist_examples() {
        for n in 0..6 {
            assert_eq!(
                annular_twist(Slope::INFINITY, Slope::ZERO, s(n, 1)).unwrap(),
                n as u64
            );
        }
        assert_eq!(annular_twist(s(2, 5), s(1, 3), s(1, 3)).unwrap(), 0);
        assert!(annular_twist(s(1, 2), s(1, 2), s(0, 1)).is_err());
    }

    #[test]
    fn twist_about_half_by_explicit_matrix() {
        // [[1,0],[-2,1]] sends (1,2) to (1,0); images of 0/1 and 1/1 are
        // 0/1 and 1/(-1) = -1/1, floors 0 and -1.
        let m = MappingClass::new(1, 0, -2, 1).unwrap();
        assert_eq!(apply_mapping_class(&m, s(1, 2)), Slope::INFINITY);
        let b = apply_mapping_class(&m, s(0, 1));
        let c = apply_mapping_class(&m, s(1, 1));
        let expected = (b.p().div_euclid(b.q()) - c.p().div_euclid(c.q())).unsigned_abs();
        assert_eq!(expected, 1);
        assert_eq!(annular_twist(s(1, 2), s(0, 1), s(1, 1)).unwrap(), expected);
    }

    #[test]
    fn bc_examples() {
        let m = Marking::new(Slope::INFINITY, Slope::ZERO).unwrap();
        assert_eq!(bc_constant(&m, &m, 8), 0);
        for n in [1i64, 3, 6, 10] {
            let t = MappingClass::twist_about(m.pants).pow(n);
            let m2 = m.apply(&t);
            let bc = bc_constant(&m, &m2, 8);
            assert_eq!(bc, n as u64, "n = {n}");
        }
    }

    #[test]
    fn marking_requires_single_intersection() {
        assert!(Marking::new(s(0, 1), s(2, 1)).is_err());
        assert!(Marking::new(s(1, 2), s(1, 1)).is_ok());
    }

    /// Breadth-first search over every slope of height at most `bound`.
    fn farey_distance_in_box(a: Slope, b: Slope, bound: i64) -> u32 {
        let all = slopes_up_to_height(bound);
        let mut dist = std::collections::HashMap::from([(a, 0u32)]);
        let mut queue = VecDeque::from([a]);
        while let Some(u) = queue.pop_front() {
            if u == b {
                return dist[&u];
            }
            for &v in &all {
                if intersection(u, v) == 1 && !dist.contains_key(&v) {
                    dist.insert(v, dist[&u] + 1);
                    queue.push_back(v);
                }
            }
        }
        panic!("{b} not reached from {a} inside height {bound}");
    }

    #[test]
    fn farey_distance_matches_box_search() {
        let pool = slopes_up_to_height(9);
        for (k, &a) in pool.iter().enumerate().step_by(7) {
            for &b in pool.iter().skip(k % 5).step_by(11) {
                assert_eq!(
                    farey_distance(a, b),
                    farey_distance_in_box(a, b, 12),
                    "{a} {b}"
                );
                assert_eq!(farey_distance(a, b), farey_distance(b, a));
            }
        }
    }

    #[test]
    fn farey_distance_of_long_fractions() {
        // Quotients of at least 2 give geodesic continued fractions.
        assert_eq!(farey_distance(Slope::INFINITY, s(30, 71)), 5);
        let x = s(5741, 13860); // [0; 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2]
        assert_eq!(farey_distance(Slope::INFINITY, x), 12);
        assert_eq!(farey_distance(Slope::ZERO, x), 11);
    }
}
