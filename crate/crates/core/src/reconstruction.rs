//! Recovery of the boundary nonlinearity from continued Γ₁ traces.
//!
//! On a piece of Γ₁ where the potential `v` is strictly monotone, the pairs
//! `(v(t), w(t))` with `w = ∂u/∂ν` are samples of the graph of `f`, since
//! `w = f(v)` there.

use thiserror::Error;

use crate::forward::NonlinearityModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("profile arrays differ in length: t={t}, v={v}, w={w}, dv={dv}")]
    LengthMismatch { t: usize, v: usize, w: usize, dv: usize },
    #[error("profile needs at least two samples")]
    TooShort,
    #[error("no monotone segment with |dv/dt| >= {0}")]
    NoMonotoneSegment(f64),
    #[error("trim {trim} leaves nothing of the potential range [{lo}, {hi}]")]
    EmptyInterval { trim: f64, lo: f64, hi: f64 },
    #[error("value {0} lies outside the inverse map domain [{1}, {2}]")]
    OutOfRange(f64, f64, f64),
    #[error("reconstruction intervals do not overlap")]
    Disjoint,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Potential `v`, flux `w` and tangential derivative `dv` along Γ₁.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub dv: Vec<f64>,
}

impl BoundaryProfile {
    pub fn new(t: Vec<f64>, v: Vec<f64>, w: Vec<f64>, dv: Vec<f64>) -> Result<Self, ReconstructError> {
        let p = BoundaryProfile { t, v, w, dv };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ReconstructError> {
        let n = self.t.len();
        if self.v.len() != n || self.w.len() != n || self.dv.len() != n {
            return Err(ReconstructError::LengthMismatch { t: n, v: self.v.len(), w: self.w.len(), dv: self.dv.len() });
        }
        if n < 2 {
            return Err(ReconstructError::TooShort);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// The same profile traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let rev = |x: &[f64], s: f64| x.iter().rev().map(|v| s * v).collect();
        BoundaryProfile { t: rev(&self.t, -1.0), v: rev(&self.v, 1.0), w: rev(&self.w, 1.0), dv: rev(&self.dv, -1.0) }
    }
}

/// `max v - min v` over the samples.
pub fn oscillation(profile: &BoundaryProfile) -> f64 {
    let max = profile.v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = profile.v.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// A quarter of the largest tangential slope.
pub fn default_threshold(profile: &BoundaryProfile) -> f64 {
    0.25 * profile.dv.iter().fold(0.0f64, |m, d| m.max(d.abs()))
}

/// Sample interval `[start, end]` on which `v` is strictly monotone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneSegment {
    pub start: usize,
    pub end: usize,
    pub t_a: f64,
    pub t_b: f64,
    /// `+1` if `v` increases with `t`, `-1` otherwise.
    pub orientation: i8,
    pub min_slope: f64,
}

impl MonotoneSegment {
    pub fn length(&self) -> f64 {
        self.t_b - self.t_a
    }

    /// `min |dv/dt| · (t_b - t_a)`, the quantity the segment maximizes.
    pub fn score(&self) -> f64 {
        self.min_slope * self.length()
    }
}

/// Sample interval maximizing `min |dv/dt| · (t_b - t_a)` among those where
/// every `|dv/dt|` reaches `threshold` and consecutive values of `v` move in
/// one strict direction. Ties go to the smaller `t_a`.
pub fn find_monotone_segment(profile: &BoundaryProfile, threshold: f64) -> Result<MonotoneSegment, ReconstructError> {
    profile.validate()?;
    if !(threshold >= 0.0) {
        return Err(ReconstructError::InvalidArgument(format!("threshold must be nonnegative, got {threshold}")));
    }
    let n = profile.len();
    let slope: Vec<f64> = profile.dv.iter().map(|d| d.abs()).collect();
    let dir = |k: usize| (profile.v[k + 1] - profile.v[k]).partial_cmp(&0.0).map_or(0i8, |o| o as i8);
    let good_pair = |k: usize| slope[k] >= threshold && slope[k + 1] >= threshold && dir(k) != 0;
    let mut best: Option<MonotoneSegment> = None;
    let mut k = 0;
    while k + 1 < n {
        if !good_pair(k) {
            k += 1;
            continue;
        }
        let sign = dir(k);
        let mut j = k;
        while j + 1 < n && good_pair(j) && dir(j) == sign {
            j += 1;
        }
        // maximal run [k, j]: every sample acts once as the interval minimum
        for m in k..=j {
            let (mut l, mut r) = (m, m);
            while l > k && slope[l - 1] >= slope[m] {
                l -= 1;
            }
            while r < j && slope[r + 1] >= slope[m] {
                r += 1;
            }
            if r == l {
                continue;
            }
            let cand = MonotoneSegment {
                start: l,
                end: r,
                t_a: profile.t[l],
                t_b: profile.t[r],
                orientation: sign,
                min_slope: slope[m],
            };
            let better = match &best {
                None => true,
                Some(b) => cand.score() > b.score() || (cand.score() == b.score() && cand.t_a < b.t_a),
            };
            if better {
                best = Some(cand);
            }
        }
        k = j;
    }
    best.ok_or(ReconstructError::NoMonotoneSegment(threshold))
}

/// Piecewise-linear inverse `u ↦ t` of `v` restricted to a monotone segment.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseMap {
    /// Potential values, increasing.
    pub u: Vec<f64>,
    pub t: Vec<f64>,
}

impl InverseMap {
    pub fn domain(&self) -> (f64, f64) {
        (self.u[0], *self.u.last().unwrap())
    }

    pub fn eval(&self, u: f64) -> Result<f64, ReconstructError> {
        let (lo, hi) = self.domain();
        if !(u >= lo && u <= hi) {
            return Err(ReconstructError::OutOfRange(u, lo, hi));
        }
        Ok(interp(&self.u, &self.t, u))
    }
}

pub fn invert_on_segment(profile: &BoundaryProfile, seg: &MonotoneSegment) -> InverseMap {
    let mut u: Vec<f64> = profile.v[seg.start..=seg.end].to_vec();
    let mut t: Vec<f64> = profile.t[seg.start..=seg.end].to_vec();
    if seg.orientation < 0 {
        u.reverse();
        t.reverse();
    }
    InverseMap { u, t }
}

/// Linear interpolation in increasing abscissae `x`, clamped to the ends.
fn interp(x: &[f64], y: &[f64], at: f64) -> f64 {
    let i = x.partition_point(|&xi| xi <= at);
    if i == 0 {
        return y[0];
    }
    if i == x.len() {
        return *y.last().unwrap();
    }
    let s = (at - x[i - 1]) / (x[i] - x[i - 1]);
    y[i - 1] + s * (y[i] - y[i - 1])
}

/// Point `i` of `m` equispaced points on `[lo, hi]`, hitting `hi` exactly.
pub fn grid_point(lo: f64, hi: f64, m: usize, i: usize) -> f64 {
    if i + 1 == m { hi } else { lo + (hi - lo) * i as f64 / (m - 1) as f64 }
}

/// Piecewise-linear estimate of `f` on a closed interval `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedNonlinearity {
    pub interval: (f64, f64),
    /// `(u, f(u))` knots with `u` increasing across `V`.
    pub knots: Vec<(f64, f64)>,
    /// Arc-length range of the source segment, if any.
    pub source: Option<(f64, f64)>,
    pub trim: f64,
}

impl ReconstructedNonlinearity {
    pub fn eval(&self, u: f64) -> Option<f64> {
        let (lo, hi) = self.interval;
        if !(u >= lo && u <= hi) {
            return None;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = self.knots.iter().copied().unzip();
        Some(interp(&x, &y, u))
    }

    /// Exact model values on `samples` equispaced knots of `interval`.
    pub fn from_model(model: &NonlinearityModel, interval: (f64, f64), samples: usize) -> Self {
        let (lo, hi) = interval;
        let m = samples.max(2);
        let knots = (0..m)
            .map(|i| {
                let u = grid_point(lo, hi, m, i);
                (u, model.eval(u))
            })
            .collect();
        ReconstructedNonlinearity { interval, knots, source: None, trim: 0.0 }
    }
}

/// Knots `(v, w)` of the segment, restricted to the potential range shrunk
/// by `trim` on both ends, with interpolated knots at the new endpoints.
pub fn extract_f(profile: &BoundaryProfile, seg: &MonotoneSegment, trim: f64) -> Result<ReconstructedNonlinearity, ReconstructError> {
    if !(trim >= 0.0 && trim.is_finite()) {
        return Err(ReconstructError::InvalidArgument(format!("trim must be finite and nonnegative, got {trim}")));
    }
    let mut pairs: Vec<(f64, f64)> = (seg.start..=seg.end).map(|k| (profile.v[k], profile.w[k])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = (pairs[0].0, pairs.last().unwrap().0);
    let (a, b) = (lo + trim, hi - trim);
    if !(a < b) {
        return Err(ReconstructError::EmptyInterval { trim, lo, hi });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let mut knots = vec![(a, interp(&x, &y, a))];
    knots.extend(pairs.iter().copied().filter(|&(u, _)| u > a && u < b));
    knots.push((b, interp(&x, &y, b)));
    Ok(ReconstructedNonlinearity { interval: (a, b), knots, source: Some((seg.t_a, seg.t_b)), trim })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub interval: (f64, f64),
    pub sup_error: f64,
}

pub const OVERLAP_GRID: usize = 1000;

/// Largest pointwise difference on a uniform grid of the common interval.
pub fn overlap_and_error(a: &ReconstructedNonlinearity, b: &ReconstructedNonlinearity) -> Result<Overlap, ReconstructError> {
    let lo = a.interval.0.max(b.interval.0);
    let hi = a.interval.1.min(b.interval.1);
    if !(lo < hi) {
        return Err(ReconstructError::Disjoint);
    }
    let mut sup = 0.0f64;
    for i in 0..OVERLAP_GRID {
        let u = grid_point(lo, hi, OVERLAP_GRID, i);
        let (fa, fb) = (a.eval(u).unwrap(), b.eval(u).unwrap());
        sup = sup.max((fa - fb).abs());
    }
    Ok(Overlap { interval: (lo, hi), sup_error: sup })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(n: usize, v: impl Fn(f64) -> f64, dv: impl Fn(f64) -> f64, w: impl Fn(f64) -> f64) -> BoundaryProfile {
        let t: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        BoundaryProfile::new(t.clone(), t.iter().map(|&s| v(s)).collect(), t.iter().map(|&s| w(v(s))).collect(), t.iter().map(|&s| dv(s)).collect())
            .unwrap()
    }

    #[test]
    fn linear_profile_uses_everything() {
        let p = profile(11, |t| t, |_| 1.0, |u| 2.0 * u);
        assert!((oscillation(&p) - 1.0).abs() < 1e-15);
        let seg = find_monotone_segment(&p, 0.5).unwrap();
        assert_eq!((seg.start, seg.end, seg.orientation), (0, 10, 1));
        let r = extract_f(&p, &seg, 0.0).unwrap();
        assert_eq!(r.knots.len(), 11);
        assert_eq!(r.interval, (0.0, 1.0));
        assert_eq!(r.eval(0.35), Some(0.7));
    }

    #[test]
    fn constant_profile_has_no_segment() {
        let p = profile(11, |_| 0.3, |_| 0.0, |u| u);
        assert_eq!(oscillation(&p), 0.0);
        assert!(matches!(find_monotone_segment(&p, 0.0), Err(ReconstructError::NoMonotoneSegment(_))));
    }

    #[test]
    fn sine_segment() {
        use std::f64::consts::PI;
        let p = profile(201, |t| (2.0 * PI * t).sin(), |t| 2.0 * PI * (2.0 * PI * t).cos(), |u| u);
        let seg = find_monotone_segment(&p, default_threshold(&p)).unwrap();
        // decreasing branch around t = 1/2, inside the region where |cos| >= 1/4
        assert_eq!(seg.orientation, -1);
        let edge = (0.25f64).acos() / (2.0 * PI);
        assert!(seg.t_a >= edge && seg.t_b <= 1.0 - edge, "{seg:?}");
        // brute-force optimum of min |v'| times length over that branch
        let (i0, i1) = (p.t.iter().position(|&t| t >= edge).unwrap(), p.t.iter().rposition(|&t| t <= 1.0 - edge).unwrap());
        let mut best = 0.0f64;
        for a in i0..=i1 {
            for b in a + 1..=i1 {
                let m = p.dv[a..=b].iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
                best = best.max(m * (p.t[b] - p.t[a]));
            }
        }
        assert_eq!(seg.score(), best);
    }

    #[test]
    fn trim_and_empty_interval() {
        let p = profile(11, |t| t, |_| 1.0, |u| u * u);
        let seg = find_monotone_segment(&p, 0.1).unwrap();
        let r = extract_f(&p, &seg, 0.25).unwrap();
        assert_eq!(r.interval, (0.25, 0.75));
        assert!((r.knots[0].1 - (0.2 * 0.2 + 0.5 * (0.09 - 0.04))).abs() < 1e-15);
        assert!(r.knots.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(matches!(extract_f(&p, &seg, 0.5), Err(ReconstructError::EmptyInterval { .. })));
    }

    #[test]
    fn inverse_map() {
        let p = profile(21, |t| 1.0 - t * t, |t| -2.0 * t, |u| u);
        let seg = find_monotone_segment(&p, 0.5).unwrap();
        let inv = invert_on_segment(&p, &seg);
        let (lo, hi) = inv.domain();
        assert!(lo < hi);
        let t = inv.eval(0.5 * (lo + hi)).unwrap();
        assert!((1.0 - t * t - 0.5 * (lo + hi)).abs() < 1e-2);
        assert!(inv.eval(hi + 1.0).is_err());
    }

    #[test]
    fn reversal_gives_same_reconstruction() {
        let p = profile(51, |t| (3.0 * t).sin(), |t| 3.0 * (3.0 * t).cos(), |u| u.exp() - 1.0);
        let th = default_threshold(&p);
        let a = extract_f(&p, &find_monotone_segment(&p, th).unwrap(), 0.05).unwrap();
        let q = p.reversed();
        let b = extract_f(&q, &find_monotone_segment(&q, th).unwrap(), 0.05).unwrap();
        assert_eq!(a.interval, b.interval);
        assert_eq!(a.knots, b.knots);
    }

    #[test]
    fn overlap_error() {
        let m = NonlinearityModel::Linear { slope: 2.0 };
        let a = ReconstructedNonlinearity::from_model(&m, (0.0, 1.0), 3);
        let mut b = ReconstructedNonlinearity::from_model(&m, (0.5, 2.0), 4);
        let ov = overlap_and_error(&a, &b).unwrap();
        assert_eq!(ov.interval, (0.5, 1.0));
        assert!(ov.sup_error < 1e-15);
        b.knots.iter_mut().for_each(|k| k.1 += 0.1);
        assert!((overlap_and_error(&a, &b).unwrap().sup_error - 0.1).abs() < 1e-14);
        let c = ReconstructedNonlinearity::from_model(&m, (3.0, 4.0), 2);
        assert_eq!(overlap_and_error(&a, &c).unwrap_err(), ReconstructError::Disjoint);
    }
}
