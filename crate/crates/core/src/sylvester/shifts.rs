use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Closed real interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    /// Smallest interval holding every value.
    pub fn hull_of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty spectrum".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn encloses(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn negated(&self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }

    /// Minkowski sum.
    pub fn plus(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo + other.lo, hi: self.hi + other.hi }
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn is_disjoint(&self, other: &Interval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Zeros `p` (near `E`) and poles `q` (near `F`) of the rational function
/// `r(z) = Π (z − p_j)/(z − q_j)`, with `predicted[k−1]` the a-priori bound
/// on `sup_E |r| / inf_F |r|` after `k` shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftParameters {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub e: Interval,
    pub f: Interval,
    pub predicted: Vec<f64>,
}

impl ShiftParameters {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Predicted bound at the full length.
    pub fn bound(&self) -> f64 {
        self.predicted.last().copied().unwrap_or(1.0)
    }

    /// `sup_E |r| / inf_F |r|` sampled on `points` nodes per interval.
    pub fn grid_ratio(&self, points: usize) -> f64 {
        rational_ratio(&self.p, &self.q, &interval_grid(self.e, points), &interval_grid(self.f, points))
    }
}

/// Endpoints ordered as `a ≤ b < c ≤ d`, plus whether `E` was mirrored.
fn ordered(e: Interval, f: Interval) -> Result<(f64, f64, f64, f64, bool)> {
    if e.hi < f.lo {
        Ok((e.lo, e.hi, f.lo, f.hi, false))
    } else if f.hi < e.lo {
        Ok((-e.hi, -e.lo, -f.hi, -f.lo, true))
    } else {
        Err(Error::OverlappingIntervals { e_lo: e.lo, e_hi: e.hi, f_lo: f.lo, f_hi: f.hi })
    }
}

/// `γ ≥ 1` such that a Möbius map takes `[−γ, −1] ∪ [1, γ]` onto `E ∪ F`.
pub fn mobius_gamma(e: Interval, f: Interval) -> Result<f64> {
    let (a, b, c, d, _) = ordered(e, f)?;
    let m = (c - a) * (d - b) / ((c - b) * (d - a));
    Ok((-1.0 + 2.0 * m + 2.0 * (m * m - m).max(0.0).sqrt()).max(1.0))
}

/// `4 exp(−π² k / log 16γ)`.
pub fn zolotarev_bound(gamma: f64, k: usize) -> f64 {
    4.0 * (-PI * PI * k as f64 / (16.0 * gamma).ln()).exp()
}

/// Number of shifts for which the predicted bound drops below `eps`.
pub fn shift_count(e: Interval, f: Interval, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidTolerance(eps));
    }
    let gamma = mobius_gamma(e, f)?;
    Ok((((4.0 / eps).ln() * (16.0 * gamma).ln() / (PI * PI)).ceil() as usize).max(1))
}

/// Zolotarev-optimal real shifts for `E` and `F` with predicted bound ≤ `eps`.
pub fn zolotarev_shifts(e: Interval, f: Interval, eps: f64) -> Result<ShiftParameters> {
    zolotarev_shifts_with_count(e, f, shift_count(e, f, eps)?)
}

/// The `ℓ`-shift Zolotarev construction: elliptic `dn` nodes on the
/// canonical pair `[−γ, −1] ∪ [1, γ]`, mapped back by a Möbius transform.
pub fn zolotarev_shifts_with_count(e: Interval, f: Interval, l: usize) -> Result<ShiftParameters> {
    if l == 0 {
        return Err(Error::InvalidArgument("at least one shift is required".into()));
    }
    let (a, b, c, d, mirrored) = ordered(e, f)?;
    let gamma = mobius_gamma(e, f)?;
    let (mut p, mut q): (Vec<f64>, Vec<f64>) = if a == b || c == d {
        // a point set is annihilated exactly by one repeated node
        let zero = if a == b { a } else { 0.5 * (a + b) };
        let pole = if c == d { c } else { 0.5 * (c + d) };
        (vec![zero; l], vec![pole; l])
    } else {
        let kp = 1.0 / gamma;
        let big_k = PI / (2.0 * agm(1.0, kp));
        let map = Mobius::through([-gamma, -1.0, 1.0], [a, b, c]);
        (1..=l)
            .map(|j| {
                let u = (2 * j - 1) as f64 * big_k / (2 * l) as f64;
                let node = gamma * jacobi_dn(u, kp);
                (map.apply(-node), map.apply(node))
            })
            .unzip()
    };
    if mirrored {
        p.iter_mut().chain(q.iter_mut()).for_each(|x| *x = -*x);
    }
    Ok(ShiftParameters { p, q, e, f, predicted: (1..=l).map(|k| zolotarev_bound(gamma, k)).collect() })
}

/// Möbius map fixed by three point pairs.
struct Mobius {
    z: [f64; 3],
    w: [f64; 3],
}

impl Mobius {
    fn through(z: [f64; 3], w: [f64; 3]) -> Self {
        Mobius { z, w }
    }

    fn apply(&self, x: f64) -> f64 {
        // equal cross ratios (w, w1; w2, w3) = (x, z1; z2, z3)
        let [z1, z2, z3] = self.z;
        let [w1, w2, w3] = self.w;
        let cr = (x - z1) * (z2 - z3) / ((x - z3) * (z2 - z1));
        (w1 * (w2 - w3) - cr * (w2 - w1) * w3) / ((w2 - w3) - cr * (w2 - w1))
    }
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    while (a - b).abs() > 1e-15 * a {
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    a
}

/// Jacobi `dn(u)` for complementary modulus `kp` by descending Landen
/// transformations.
pub fn jacobi_dn(u: f64, kp: f64) -> f64 {
    let k = (1.0 - kp * kp).max(0.0).sqrt();
    if k == 0.0 {
        return 1.0;
    }
    let (mut a, mut b) = (1.0, kp);
    let mut ratios = Vec::new();
    let mut c = k;
    while c.abs() > f64::EPSILON * a && ratios.len() < 40 {
        let (an, bn) = (0.5 * (a + b), (a * b).sqrt());
        c = 0.5 * (a - b);
        a = an;
        b = bn;
        ratios.push(c / a);
    }
    let mut phi = 2f64.powi(ratios.len() as i32) * a * u;
    for r in ratios.iter().rev() {
        phi = 0.5 * (phi + (r * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    (cn * cn + kp * kp * sn * sn).sqrt()
}

/// `sup_{z∈E} |r(z)| / inf_{z∈F} |r(z)|` over the given sample points.
pub fn rational_ratio(p: &[f64], q: &[f64], e_points: &[f64], f_points: &[f64]) -> f64 {
    let log_r = |z: f64| -> f64 { p.iter().zip(q).map(|(&pj, &qj)| ((z - pj) / (z - qj)).abs().ln()).sum() };
    let sup = e_points.iter().map(|&z| log_r(z)).fold(f64::NEG_INFINITY, f64::max);
    let inf = f_points.iter().map(|&z| log_r(z)).fold(f64::INFINITY, f64::min);
    (sup - inf).exp()
}

/// Uniform nodes plus nodes clustered geometrically at both endpoints.
pub fn interval_grid(iv: Interval, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let w = iv.width();
    let mut out: Vec<f64> = (0..points).map(|i| iv.lo + w * i as f64 / (points - 1) as f64).collect();
    if w > 0.0 {
        for i in 0..points {
            let t = w * 1e-8f64.powf(i as f64 / (points - 1) as f64);
            out.push(iv.lo + t);
            out.push(iv.hi - t);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn dn_matches_known_values() {
        // dn(0) = 1, dn(K) = k'
        let kp = 0.3;
        let big_k = PI / (2.0 * agm(1.0, kp));
        assert!((jacobi_dn(0.0, kp) - 1.0).abs() < 1e-14);
        assert!((jacobi_dn(big_k, kp) - kp).abs() < 1e-12);
        // dn(K/2) = sqrt(k')
        assert!((jacobi_dn(0.5 * big_k, kp) - kp.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mobius_hits_all_four_endpoints() {
        let (e, f) = (iv(-3.0, -0.2), iv(0.5, 7.0));
        let g = mobius_gamma(e, f).unwrap();
        let m = Mobius::through([-g, -1.0, 1.0], [-3.0, -0.2, 0.5]);
        assert!((m.apply(g) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn single_shift_symmetric_optimum() {
        let (a, b) = (0.1, 2.0);
        let s = zolotarev_shifts_with_count(iv(-b, -a), iv(a, b), 1).unwrap();
        let opt = (a * b).sqrt();
        assert!((s.p[0] + opt).abs() < 1e-12 && (s.q[0] - opt).abs() < 1e-12);
        // no single shift pair from a dense sweep does better
        let eg = interval_grid(s.e, 400);
        let fg = interval_grid(s.f, 400);
        let best = rational_ratio(&s.p, &s.q, &eg, &fg);
        for i in 1..200 {
            let t = a + (b - a) * i as f64 / 200.0;
            assert!(rational_ratio(&[-t], &[t], &eg, &fg) >= best * (1.0 - 1e-12));
        }
    }

    #[test]
    fn count_formula_and_monotone_in_eps() {
        let (e, f) = (iv(-1.0, -1.0 / 300.0), iv(1.0 / 300.0, 1.0));
        let mut last = 0;
        for k in 1..30 {
            let eps = 0.5f64.powi(k);
            let l = shift_count(e, f, eps).unwrap();
            assert!(l >= last);
            last = l;
        }
        let s = zolotarev_shifts(e, f, 1e-10).unwrap();
        assert!(s.bound() <= 1e-10);
        assert!(s.grid_ratio(2000) <= 1.1 * s.bound());
        assert!(s.p.iter().all(|&p| e.contains(p)) && s.q.iter().all(|&q| f.contains(q)));
    }

    #[test]
    fn asymmetric_and_mirrored_intervals() {
        let (e, f) = (iv(-5.0, -0.01), iv(0.3, 2.0));
        for (e, f) in [(e, f), (f.negated(), e.negated()), (f, e)] {
            let s = zolotarev_shifts(e, f, 1e-8).unwrap();
            assert!(s.p.iter().all(|&p| e.contains(p)) && s.q.iter().all(|&q| f.contains(q)));
            let g = s.grid_ratio(2000);
            assert!(g <= 1.1 * s.bound(), "{g} vs {}", s.bound());
        }
        assert!(matches!(
            zolotarev_shifts(iv(-1.0, 0.5), iv(0.2, 1.0), 1e-6),
            Err(Error::OverlappingIntervals { .. })
        ));
    }

    #[test]
    fn point_sets_are_exact() {
        let s = zolotarev_shifts_with_count(iv(-1.0, -1.0), iv(0.5, 2.0), 2).unwrap();
        assert_eq!(s.grid_ratio(50), 0.0);
    }
}
