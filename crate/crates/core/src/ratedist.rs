//! Rate-distortion functions of uniform sources under Hamming distortion,
//! piecewise-linear approximations and convex envelopes of tradeoff curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fmt_sig;

const DOMAIN_TOL: f64 = 1e-12;

/// Binary entropy in bits, with Hb(0) = Hb(1) = 0.
pub fn hb(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveKind {
    BinaryHamming,
    KaryHamming(u32),
    PiecewiseLinear(Vec<(f64, f64)>),
}

/// A nonincreasing convex function D -> R on [0, D_max].
#[derive(Debug, Clone, PartialEq)]
pub struct RateDistortionCurve {
    kind: CurveKind,
}

impl RateDistortionCurve {
    pub fn binary() -> Self {
        Self { kind: CurveKind::BinaryHamming }
    }

    /// Uniform source on `k` symbols with Hamming distortion. `k = 2` gives the binary curve.
    pub fn kary(k: u32) -> Result<Self> {
        match k {
            0 | 1 => Err(Error::Invalid(format!("alphabet size {k} < 2"))),
            2 => Ok(Self::binary()),
            _ => Ok(Self { kind: CurveKind::KaryHamming(k) }),
        }
    }

    pub fn piecewise_linear(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::Invalid("a piecewise-linear curve needs at least two breakpoints".into()));
        }
        if breakpoints[0].0 != 0.0 {
            return Err(Error::Invalid("first breakpoint must be at D = 0".into()));
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Invalid("breakpoint distortions must be strictly increasing".into()));
            }
            if w[1].1 > w[0].1 + 1e-9 {
                return Err(Error::Invalid("piecewise-linear rate must be nonincreasing".into()));
            }
        }
        if breakpoints.iter().any(|&(d, r)| !d.is_finite() || !r.is_finite() || r < -1e-12) {
            return Err(Error::Invalid("breakpoints must be finite with nonnegative rate".into()));
        }
        for w in breakpoints.windows(3) {
            let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            if s2 < s1 - 1e-9 {
                return Err(Error::Invalid("piecewise-linear rate must be convex".into()));
            }
        }
        Ok(Self { kind: CurveKind::PiecewiseLinear(breakpoints) })
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn breakpoints(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            CurveKind::PiecewiseLinear(b) => Some(b),
            _ => None,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.kind, CurveKind::PiecewiseLinear(_))
    }

    /// Alphabet size for the analytic kinds.
    pub fn alphabet_size(&self) -> Option<u32> {
        match self.kind {
            CurveKind::BinaryHamming => Some(2),
            CurveKind::KaryHamming(k) => Some(k),
            CurveKind::PiecewiseLinear(_) => None,
        }
    }

    pub fn d_max(&self) -> f64 {
        match &self.kind {
            CurveKind::BinaryHamming => 0.5,
            CurveKind::KaryHamming(k) => 1.0 - 1.0 / *k as f64,
            CurveKind::PiecewiseLinear(b) => b[b.len() - 1].0,
        }
    }

    fn check_domain(&self, d: f64) -> Result<f64> {
        let dm = self.d_max();
        if !(d >= -DOMAIN_TOL && d <= dm + DOMAIN_TOL) {
            return Err(Error::Domain(format!("distortion {d} outside [0, {dm}]")));
        }
        Ok(d.clamp(0.0, dm))
    }

    pub fn eval(&self, d: f64) -> Result<f64> {
        let d = self.check_domain(d)?;
        Ok(match &self.kind {
            CurveKind::BinaryHamming => (1.0 - hb(d)).max(0.0),
            CurveKind::KaryHamming(k) => {
                let k = *k as f64;
                (k.log2() - hb(d) - d * (k - 1.0).log2()).max(0.0)
            }
            CurveKind::PiecewiseLinear(b) => pwl_eval(b, d),
        })
    }

    /// Slope dR/dD on the open interval (0, D_max).
    pub fn derivative(&self, d: f64) -> Result<f64> {
        let dm = self.d_max();
        if !(d > 0.0 && d <= dm) {
            return Err(Error::Domain(format!("derivative undefined at D = {d}")));
        }
        match &self.kind {
            CurveKind::BinaryHamming => Ok((d / (1.0 - d)).log2()),
            CurveKind::KaryHamming(k) => Ok((d / (1.0 - d)).log2() - ((*k - 1) as f64).log2()),
            CurveKind::PiecewiseLinear(_) => {
                Err(Error::Unsupported("derivative of a piecewise-linear curve".into()))
            }
        }
    }

    /// The distortion at which the slope equals `slope` (< 0); inverse of `derivative`.
    pub fn derivative_inverse(&self, slope: f64) -> Result<f64> {
        let shift = match &self.kind {
            CurveKind::BinaryHamming => 1.0,
            CurveKind::KaryHamming(k) => (*k - 1) as f64,
            CurveKind::PiecewiseLinear(_) => {
                return Err(Error::Unsupported("derivative of a piecewise-linear curve".into()))
            }
        };
        if slope >= 0.0 {
            return Ok(self.d_max());
        }
        // log2(D/(1-D)) - log2(shift) = slope  =>  D = t/(1+t), t = shift * 2^slope
        let t = shift * slope.exp2();
        Ok(t / (1.0 + t))
    }

    /// Smallest distortion reaching rate `r` (generalized inverse, by bisection).
    pub fn inverse(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::Domain(format!("negative rate {r}")));
        }
        let (mut lo, mut hi) = (0.0, self.d_max());
        if self.eval(0.0)? <= r {
            return Ok(0.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid)? > r {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        Ok(hi)
    }
}

fn pwl_eval(b: &[(f64, f64)], d: f64) -> f64 {
    let i = b.partition_point(|p| p.0 <= d);
    if i == 0 {
        return b[0].1;
    }
    if i >= b.len() {
        return b[b.len() - 1].1;
    }
    let (d0, r0) = b[i - 1];
    let (d1, r1) = b[i];
    r0 + (r1 - r0) * (d - d0) / (d1 - d0)
}

/// Uniform grid of `s` points on [0, d_max]; endpoints included exactly.
pub fn uniform_grid(d_max: f64, s: usize) -> Vec<f64> {
    assert!(s >= 2, "grid needs at least two points");
    (0..s)
        .map(|j| if j + 1 == s { d_max } else { d_max * j as f64 / (s - 1) as f64 })
        .collect()
}

/// Linear interpolation of `curve` through `grid`, together with the supremum of the
/// interpolation error. The chord over a convex function lies above it, and the gap is
/// concave on each segment, so its maximum is found by ternary search.
pub fn pwl_approximate(curve: &RateDistortionCurve, grid: &[f64]) -> Result<(RateDistortionCurve, f64)> {
    let dm = curve.d_max();
    if grid.len() < 2 || grid[0] != 0.0 || (grid[grid.len() - 1] - dm).abs() > DOMAIN_TOL {
        return Err(Error::Invalid(format!("grid must start at 0 and end at D_max = {dm}")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("grid must be strictly increasing".into()));
    }
    let mut bps = Vec::with_capacity(grid.len());
    for (i, &d) in grid.iter().enumerate() {
        let d = if i + 1 == grid.len() { dm } else { d };
        bps.push((d, curve.eval(d)?));
    }
    let mut err: f64 = 0.0;
    for w in bps.windows(2) {
        let (d0, r0) = w[0];
        let (d1, r1) = w[1];
        let gap = |d: f64| r0 + (r1 - r0) * (d - d0) / (d1 - d0) - curve.eval(d).unwrap_or(f64::NAN);
        let (mut lo, mut hi) = (d0, d1);
        for _ in 0..100 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if gap(a) < gap(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        err = err.max(gap(0.5 * (lo + hi))).max(gap(0.5 * (d0 + d1)));
    }
    // float rounding in the evaluations
    if err > 0.0 {
        err += 1e-13;
    }
    let approx = RateDistortionCurve { kind: CurveKind::PiecewiseLinear(bps) };
    Ok((approx, err.max(0.0)))
}

#[derive(Serialize, Deserialize)]
struct CurveJson {
    kind: String,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none", default)]
    k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    breakpoints: Option<Vec<(f64, f64)>>,
}

impl Serialize for RateDistortionCurve {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let j = match &self.kind {
            CurveKind::BinaryHamming => CurveJson { kind: "binary-hamming".into(), k: Some(2), breakpoints: None },
            CurveKind::KaryHamming(k) => CurveJson { kind: "kary-hamming".into(), k: Some(*k), breakpoints: None },
            CurveKind::PiecewiseLinear(b) => {
                CurveJson { kind: "piecewise-linear".into(), k: None, breakpoints: Some(b.clone()) }
            }
        };
        j.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RateDistortionCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = CurveJson::deserialize(d)?;
        let res = match j.kind.as_str() {
            "binary-hamming" => Ok(Self::binary()),
            "kary-hamming" => Self::kary(j.k.ok_or_else(|| D::Error::custom("missing K"))?),
            "piecewise-linear" => {
                Self::piecewise_linear(j.breakpoints.ok_or_else(|| D::Error::custom("missing breakpoints"))?)
            }
            other => return Err(D::Error::custom(format!("unknown curve kind '{other}'"))),
        };
        res.map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub distortion: f64,
    pub rate: f64,
    pub leakage: f64,
}

/// Piecewise-linear curve of rate against distortion, points sorted by distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub label: String,
    pub points: Vec<TradeoffPoint>,
}

impl TradeoffCurve {
    pub fn new(label: impl Into<String>, mut points: Vec<TradeoffPoint>) -> Self {
        points.sort_by(|a, b| a.distortion.total_cmp(&b.distortion));
        Self { label: label.into(), points }
    }

    pub fn from_fn(label: &str, leakage: f64, grid: &[f64], f: impl Fn(f64) -> f64) -> Self {
        let points = grid.iter().map(|&d| TradeoffPoint { distortion: d, rate: f(d), leakage }).collect();
        Self::new(label, points)
    }

    pub fn domain(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.distortion, self.points.last()?.distortion))
    }

    /// Linear interpolation; `None` outside the domain.
    pub fn eval(&self, d: f64) -> Option<f64> {
        let (lo, hi) = self.domain()?;
        if d < lo - DOMAIN_TOL || d > hi + DOMAIN_TOL {
            return None;
        }
        let i = self.points.partition_point(|p| p.distortion <= d);
        if i == 0 {
            return Some(self.points[0].rate);
        }
        if i >= self.points.len() {
            return Some(self.points[self.points.len() - 1].rate);
        }
        let (a, b) = (self.points[i - 1], self.points[i]);
        if b.distortion == a.distortion {
            return Some(a.rate.min(b.rate));
        }
        Some(a.rate + (b.rate - a.rate) * (d - a.distortion) / (b.distortion - a.distortion))
    }

    /// First violation of monotonicity or convexity beyond `tol`, as a message.
    pub fn check_convex_nonincreasing(&self, tol: f64) -> std::result::Result<(), String> {
        let p = &self.points;
        for w in p.windows(2) {
            if w[1].rate > w[0].rate + tol {
                return Err(format!("rate increases between D={} and D={}", w[0].distortion, w[1].distortion));
            }
        }
        for w in p.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            if c.distortion <= a.distortion {
                continue;
            }
            let t = (b.distortion - a.distortion) / (c.distortion - a.distortion);
            let chord = a.rate + t * (c.rate - a.rate);
            if b.rate > chord + tol {
                return Err(format!("curve not convex at D={}", b.distortion));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        curves_to_csv(std::slice::from_ref(self))
    }
}

pub const CSV_HEADER: &str = "distortion,rate,leakage,label";

pub fn curves_to_csv(curves: &[TradeoffCurve]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in curves {
        for p in &c.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_sig(p.distortion, 12),
                fmt_sig(p.rate, 12),
                fmt_sig(p.leakage, 12),
                c.label
            ));
        }
    }
    out
}

/// Lower convex hull of a point set in the (distortion, rate) plane, sorted by distortion.
pub fn lower_hull(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let mut pts: Vec<TradeoffPoint> = points.iter().copied().filter(|p| p.rate.is_finite()).collect();
    pts.sort_by(|a, b| a.distortion.total_cmp(&b.distortion).then(a.rate.total_cmp(&b.rate)));
    pts.dedup_by(|b, a| (a.distortion - b.distortion).abs() <= DOMAIN_TOL);
    let mut hull: Vec<TradeoffPoint> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.distortion - a.distortion) * (p.rate - a.rate) - (b.rate - a.rate) * (p.distortion - a.distortion);
            if cross <= 1e-15 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Lower convex envelope of the pointwise minimum of several curves on a common interval.
pub fn lower_convex_envelope(curves: &[TradeoffCurve], label: &str) -> Result<TradeoffCurve> {
    let first = curves.first().ok_or_else(|| Error::Invalid("no curves given".into()))?;
    let (lo, hi) = first.domain().ok_or_else(|| Error::Invalid("empty curve".into()))?;
    for c in curves {
        let (a, b) = c.domain().ok_or_else(|| Error::Invalid("empty curve".into()))?;
        if (a - lo).abs() > 1e-9 || (b - hi).abs() > 1e-9 {
            return Err(Error::Dimension(format!("curve '{}' spans [{a}, {b}], expected [{lo}, {hi}]", c.label)));
        }
    }
    let mut pts: Vec<TradeoffPoint> = curves.iter().flat_map(|c| c.points.iter().copied()).collect();
    for (i, c1) in curves.iter().enumerate() {
        for c2 in &curves[i + 1..] {
            pts.extend(segment_intersections(c1, c2));
        }
    }
    Ok(TradeoffCurve::new(label, lower_hull(&pts)))
}

fn segment_intersections(c1: &TradeoffCurve, c2: &TradeoffCurve) -> Vec<TradeoffPoint> {
    let mut out = Vec::new();
    for s in c1.points.windows(2) {
        for t in c2.points.windows(2) {
            let lo = s[0].distortion.max(t[0].distortion);
            let hi = s[1].distortion.min(t[1].distortion);
            if !(hi > lo) {
                continue;
            }
            let f = |seg: &[TradeoffPoint], d: f64| {
                seg[0].rate + (seg[1].rate - seg[0].rate) * (d - seg[0].distortion) / (seg[1].distortion - seg[0].distortion)
            };
            let g0 = f(s, lo) - f(t, lo);
            let g1 = f(s, hi) - f(t, hi);
            if g0 * g1 < 0.0 {
                let d = lo + (hi - lo) * g0 / (g0 - g1);
                out.push(TradeoffPoint { distortion: d, rate: f(s, d), leakage: s[0].leakage });
            }
        }
    }
    out
}
