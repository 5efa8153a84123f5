//! Observation domains bounded by four monotone arcs.
//!
//! A domain is described by abscissae `0 < a < b1, b2 < c` and four curves:
//! `gamma12` (decreasing on `[a, b1]`) and `gamma1` (increasing on `[b1, c]`)
//! form the lower boundary, `gamma2` (increasing on `[a, b2]`) and `gamma0`
//! (decreasing on `[b2, c]`) the upper one. The domain is the union of the
//! three vertical strips `G1`, `G2`, `G3` they enclose.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CurveId, Error, Result};
use crate::jet::{ExpWarp, TransformMode};

type Map = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

/// A strictly monotone map `[lo, hi] → ℝ` with its inverse.
#[derive(Clone)]
pub struct Curve {
    map: Map,
    inverse: Map,
    lo: f64,
    hi: f64,
    direction: Monotonicity,
    closed_form_inverse: bool,
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Curve")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("direction", &self.direction)
            .field("closed_form_inverse", &self.closed_form_inverse)
            .finish()
    }
}

impl Curve {
    /// Curve with a closed-form inverse.
    pub fn new(
        map: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
        direction: Monotonicity,
    ) -> Self {
        Self {
            map: Arc::new(map),
            inverse: Arc::new(inverse),
            lo,
            hi,
            direction,
            closed_form_inverse: true,
        }
    }

    /// Curve whose inverse is found by bisection.
    pub fn with_bisection(
        map: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
        direction: Monotonicity,
    ) -> Self {
        let map: Map = Arc::new(map);
        let m = map.clone();
        let inverse: Map = Arc::new(move |t| bisect_inverse(&*m, t, lo, hi, direction));
        Self {
            map,
            inverse,
            lo,
            hi,
            direction,
            closed_form_inverse: false,
        }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.map)(s)
    }

    #[inline]
    pub fn inverse(&self, t: f64) -> f64 {
        (self.inverse)(t)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn direction(&self) -> Monotonicity {
        self.direction
    }

    pub fn has_closed_form_inverse(&self) -> bool {
        self.closed_form_inverse
    }

    /// Ordinate interval `[min, max]` swept by the curve.
    pub fn ordinate_range(&self) -> (f64, f64) {
        let (x, y) = (self.eval(self.lo), self.eval(self.hi));
        (x.min(y), x.max(y))
    }

    /// Image of the curve under an exponential warp of both coordinates.
    fn warped(&self, warp: ExpWarp) -> Curve {
        let src = self.clone();
        let src_inv = self.clone();
        let (lo, hi) = (self.lo, self.hi);
        let (t_lo, t_hi) = self.ordinate_range();
        Curve {
            map: Arc::new(move |u| {
                let s = snap(warp.back_s(u), lo, hi);
                warp.forward_t(src.eval(s))
            }),
            inverse: Arc::new(move |v| {
                let t = snap(warp.back_t(v), t_lo, t_hi);
                warp.forward_s(src_inv.inverse(t))
            }),
            lo: warp.forward_s(lo),
            hi: warp.forward_s(hi),
            direction: self.direction,
            closed_form_inverse: self.closed_form_inverse,
        }
    }
}

/// Pulls round-off excursions back onto `[lo, hi]`.
fn snap(x: f64, lo: f64, hi: f64) -> f64 {
    let tol = 1e-13 * lo.abs().max(hi.abs()).max(1.0);
    if x < lo + tol && x > lo - tol {
        lo
    } else if x > hi - tol && x < hi + tol {
        hi
    } else {
        x
    }
}

fn bisect_inverse(f: &dyn Fn(f64) -> f64, t: f64, lo: f64, hi: f64, dir: Monotonicity) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let below = |x: f64| match dir {
        Monotonicity::Increasing => f(x) < t,
        Monotonicity::Decreasing => f(x) > t,
    };
    if !below(a) {
        return lo;
    }
    if below(b) {
        return hi;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if below(m) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Unvalidated description of an observation domain.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    pub gamma12: Curve,
    pub gamma1: Curve,
    pub gamma2: Curve,
    pub gamma0: Curve,
    /// Width of the inner boundary strips used for the disjointness check;
    /// `None` means `min(b1−a, c−b1, b2−a, c−b2)/10`.
    pub strip_epsilon: Option<f64>,
}

impl DomainSpec {
    pub fn curve(&self, id: CurveId) -> &Curve {
        match id {
            CurveId::Gamma12 => &self.gamma12,
            CurveId::Gamma1 => &self.gamma1,
            CurveId::Gamma2 => &self.gamma2,
            CurveId::Gamma0 => &self.gamma0,
        }
    }

    pub fn default_epsilon(&self) -> f64 {
        (self.b1 - self.a)
            .min(self.c - self.b1)
            .min(self.b2 - self.a)
            .min(self.c - self.b2)
            / 10.0
    }

    /// Interval each arc must cover.
    fn required_interval(&self, id: CurveId) -> (f64, f64) {
        match id {
            CurveId::Gamma12 => (self.a, self.b1),
            CurveId::Gamma1 => (self.b1, self.c),
            CurveId::Gamma2 => (self.a, self.b2),
            CurveId::Gamma0 => (self.b2, self.c),
        }
    }

    fn expected_direction(id: CurveId) -> Monotonicity {
        match id {
            CurveId::Gamma12 | CurveId::Gamma0 => Monotonicity::Decreasing,
            CurveId::Gamma1 | CurveId::Gamma2 => Monotonicity::Increasing,
        }
    }

    /// Checks every structural invariant on a grid of `grid_points`
    /// abscissae per arc and returns an immutable validated domain.
    pub fn validate(&self, grid_points: usize) -> Result<ValidatedDomain> {
        if grid_points < 16 {
            return Err(Error::InvalidArgument(format!(
                "grid_points must be at least 16, got {grid_points}"
            )));
        }
        let (a, b1, b2, c) = (self.a, self.b1, self.b2, self.c);
        if ![a, b1, b2, c].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("breakpoints must be finite".into()));
        }
        if a <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "domain must lie in the open positive quadrant (a = {a})"
            )));
        }
        if !(a < b1 && b1 < c && a < b2 && b2 < c) {
            return Err(Error::InvalidArgument(format!(
                "breakpoints must satisfy a < b1, b2 < c (got a={a}, b1={b1}, b2={b2}, c={c})"
            )));
        }
        let eps = self.strip_epsilon.unwrap_or_else(|| self.default_epsilon());
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "strip epsilon must be positive, got {eps}"
            )));
        }

        let ids = [CurveId::Gamma12, CurveId::Gamma1, CurveId::Gamma2, CurveId::Gamma0];

        for id in ids {
            let curve = self.curve(id);
            let (lo, hi) = self.required_interval(id);
            let slack = 1e-12 * hi.abs().max(1.0);
            if curve.lo > lo + slack || curve.hi < hi - slack {
                return Err(Error::InvalidArgument(format!(
                    "{id} is defined on [{}, {}] but must cover [{lo}, {hi}]",
                    curve.lo, curve.hi
                )));
            }
            if curve.direction != Self::expected_direction(id) {
                return Err(Error::MonotonicityViolation { curve: id, at: lo });
            }
            let grid = grid_on(lo, hi, grid_points);
            let mut prev: Option<(f64, f64)> = None;
            for &s in &grid {
                let t = curve.eval(s);
                if !t.is_finite() {
                    return Err(Error::NonPositiveOrdinate { curve: id, at: s, value: t });
                }
                if let Some((_, pt)) = prev {
                    let ok = match curve.direction {
                        Monotonicity::Increasing => t > pt,
                        Monotonicity::Decreasing => t < pt,
                    };
                    if !ok {
                        return Err(Error::MonotonicityViolation { curve: id, at: s });
                    }
                }
                prev = Some((s, t));
            }
        }

        for id in ids {
            let curve = self.curve(id);
            let (lo, hi) = self.required_interval(id);
            for s in grid_on(lo, hi, grid_points) {
                let t = curve.eval(s);
                if t <= 0.0 {
                    return Err(Error::NonPositiveOrdinate { curve: id, at: s, value: t });
                }
            }
        }

        let matches = [
            (CurveId::Gamma12, CurveId::Gamma1, b1),
            (CurveId::Gamma2, CurveId::Gamma0, b2),
            (CurveId::Gamma12, CurveId::Gamma2, a),
            (CurveId::Gamma1, CurveId::Gamma0, c),
        ];
        for (l, r, at) in matches {
            let (left, right) = (self.curve(l).eval(at), self.curve(r).eval(at));
            if (left - right).abs() > 1e-10 * left.abs().max(1.0) {
                return Err(Error::EndpointMismatch {
                    left_curve: l,
                    right_curve: r,
                    at,
                    left,
                    right,
                });
            }
        }

        for id in ids {
            let curve = self.curve(id);
            let (lo, hi) = self.required_interval(id);
            for s in grid_on(lo, hi, grid_points) {
                let t = curve.eval(s);
                let back = curve.inverse(t);
                let scale = s.abs().max(1.0);
                // where the curve is nearly flat the abscissa is ill-conditioned;
                // the ordinate round trip then decides
                let ok = (back - s).abs() <= 1e-12 * scale
                    || (curve.eval(back) - t).abs() <= 1e-12 * t.abs().max(1.0);
                if !ok {
                    return Err(Error::InverseMismatch { curve: id, at: s, got: back });
                }
            }
        }

        let lower_of = |s: f64| if s <= b1 { self.gamma12.eval(s) } else { self.gamma1.eval(s) };
        let upper_of = |s: f64| if s <= b2 { self.gamma2.eval(s) } else { self.gamma0.eval(s) };
        for s in grid_on(a, c, 4 * grid_points) {
            if lower_of(s) > upper_of(s) {
                let first = if s <= b1 { CurveId::Gamma12 } else { CurveId::Gamma1 };
                let second = if s <= b2 { CurveId::Gamma2 } else { CurveId::Gamma0 };
                return Err(Error::StripOverlap { first, second, at: s });
            }
        }

        // Γ₁ vs Γ₂ share abscissae [b1, b2]; Γ₁,₂ vs Γ₀ share [b2, b1]
        if b1 <= b2 {
            self.check_strips(CurveId::Gamma1, CurveId::Gamma2, b1, b2, eps, grid_points)?;
        }
        if b2 <= b1 {
            self.check_strips(CurveId::Gamma12, CurveId::Gamma0, b2, b1, eps, grid_points)?;
        }

        Ok(ValidatedDomain {
            inner: Arc::new(Validated {
                spec: self.clone(),
                epsilon: eps,
            }),
        })
    }

    /// Vertical extent of the inner ε-strip of an arc at abscissa `s`.
    fn strip_at(&self, id: CurveId, s: f64, eps: f64) -> (f64, f64) {
        let (a, c) = (self.a, self.c);
        match id {
            CurveId::Gamma12 => {
                let g = &self.gamma12;
                if s <= a + eps {
                    (g.eval(s), g.eval(a))
                } else {
                    (g.eval(s), g.eval(s) + eps)
                }
            }
            CurveId::Gamma1 => {
                let g = &self.gamma1;
                if s >= c - eps {
                    (g.eval(s), g.eval(c))
                } else {
                    (g.eval(s), g.eval(s) + eps)
                }
            }
            CurveId::Gamma2 => {
                let g = &self.gamma2;
                if s <= a + eps {
                    (g.eval(a), g.eval(s))
                } else {
                    (g.eval(s) - eps, g.eval(s))
                }
            }
            CurveId::Gamma0 => {
                let g = &self.gamma0;
                if s >= c - eps {
                    (g.eval(c), g.eval(s))
                } else {
                    (g.eval(s) - eps, g.eval(s))
                }
            }
        }
    }

    fn check_strips(
        &self,
        first: CurveId,
        second: CurveId,
        lo: f64,
        hi: f64,
        eps: f64,
        grid_points: usize,
    ) -> Result<()> {
        let grid = if hi > lo { grid_on(lo, hi, grid_points) } else { vec![lo] };
        for s in grid {
            let (l1, h1) = self.strip_at(first, s, eps);
            let (l2, h2) = self.strip_at(second, s, eps);
            if !(h1 < l2 || h2 < l1) {
                return Err(Error::StripOverlap { first, second, at: s });
            }
        }
        Ok(())
    }

    /// Image of the domain under `u = e^{2αs}` (stationary) or
    /// `u = e^{2αs} − 1` (zero-start), with ordinates mapped the same way
    /// with rate `β`.
    pub fn transformed(&self, alpha: f64, beta: f64, mode: TransformMode) -> Result<DomainSpec> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "transform rates must be positive (alpha={alpha}, beta={beta})"
            )));
        }
        let warp = ExpWarp {
            alpha,
            beta,
            sigma: 1.0,
            mode,
        };
        Ok(DomainSpec {
            a: warp.forward_s(self.a),
            b1: warp.forward_s(self.b1),
            b2: warp.forward_s(self.b2),
            c: warp.forward_s(self.c),
            gamma12: self.gamma12.warped(warp),
            gamma1: self.gamma1.warped(warp),
            gamma2: self.gamma2.warped(warp),
            gamma0: self.gamma0.warped(warp),
            strip_epsilon: None,
        })
    }
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
fn grid_on(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug)]
struct Validated {
    spec: DomainSpec,
    epsilon: f64,
}

/// A domain whose invariants have been checked. Cheap to clone and safe to
/// share between threads.
#[derive(Debug, Clone)]
pub struct ValidatedDomain {
    inner: Arc<Validated>,
}

impl ValidatedDomain {
    pub fn spec(&self) -> &DomainSpec {
        &self.inner.spec
    }

    pub fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    pub fn a(&self) -> f64 {
        self.inner.spec.a
    }
    pub fn b1(&self) -> f64 {
        self.inner.spec.b1
    }
    pub fn b2(&self) -> f64 {
        self.inner.spec.b2
    }
    pub fn c(&self) -> f64 {
        self.inner.spec.c
    }
    pub fn gamma12(&self) -> &Curve {
        &self.inner.spec.gamma12
    }
    pub fn gamma1(&self) -> &Curve {
        &self.inner.spec.gamma1
    }
    pub fn gamma2(&self) -> &Curve {
        &self.inner.spec.gamma2
    }
    pub fn gamma0(&self) -> &Curve {
        &self.inner.spec.gamma0
    }

    /// Lower boundary ordinate at `s ∈ [a, c]`.
    #[inline]
    pub fn lower(&self, s: f64) -> f64 {
        let d = &self.inner.spec;
        if s <= d.b1 {
            d.gamma12.eval(s)
        } else {
            d.gamma1.eval(s)
        }
    }

    /// Upper boundary ordinate at `s ∈ [a, c]`.
    #[inline]
    pub fn upper(&self, s: f64) -> f64 {
        let d = &self.inner.spec;
        if s <= d.b2 {
            d.gamma2.eval(s)
        } else {
            d.gamma0.eval(s)
        }
    }

    /// `[a, b1∧b2, b1∨b2, c]`.
    pub fn s_breakpoints(&self) -> [f64; 4] {
        let d = &self.inner.spec;
        [d.a, d.b1.min(d.b2), d.b1.max(d.b2), d.c]
    }

    /// Membership in the closed set `G = G1 ∪ G2 ∪ G3`.
    pub fn contains(&self, s: f64, t: f64) -> bool {
        let d = &self.inner.spec;
        if !(s >= d.a && s <= d.c) {
            return false;
        }
        self.lower(s) <= t && t <= self.upper(s)
    }

    /// The lower corner `(b1, γ₁,₂(b1))` shared by `Γ₁,₂` and `Γ₁`.
    pub fn lower_corner(&self) -> (f64, f64) {
        let d = &self.inner.spec;
        (d.b1, d.gamma12.eval(d.b1))
    }

    /// Axis-aligned bounding box `(s_min, s_max, t_min, t_max)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let d = &self.inner.spec;
        let t_min = d.gamma12.ordinate_range().0.min(d.gamma1.ordinate_range().0);
        let t_max = d.gamma2.ordinate_range().1.max(d.gamma0.ordinate_range().1);
        (d.a, d.c, t_min, t_max)
    }

    /// Validated image under the exponential coordinate change used to map
    /// Ornstein–Uhlenbeck problems onto Wiener ones.
    pub fn transform(&self, alpha: f64, beta: f64, mode: TransformMode, grid_points: usize) -> Result<ValidatedDomain> {
        self.spec().transformed(alpha, beta, mode)?.validate(grid_points)
    }
}

/// Disc of radius `r` centred at `(cx, cy)`, split at `s = cx` into the four
/// quarter arcs. Requires the disc to sit inside the open positive quadrant.
pub fn circle_domain(cx: f64, cy: f64, r: f64) -> Result<DomainSpec> {
    if !(r > 0.0 && cx.is_finite() && cy.is_finite() && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid circle ({cx}, {cy}, {r})")));
    }
    if cx - r <= 0.0 || cy - r <= 0.0 {
        return Err(Error::CircleNotInPositiveQuadrant { cx, cy, r });
    }
    let (a, c) = (cx - r, cx + r);
    let (t_lo, t_hi) = (cy - r, cy + r);
    // half-chord written as a product of distances to the ends so the
    // endpoints come out exactly
    let half = move |s: f64| ((s - a).max(0.0) * (c - s).max(0.0)).sqrt();
    let half_t = move |t: f64| ((t - t_lo).max(0.0) * (t_hi - t).max(0.0)).sqrt();

    let gamma12 = Curve::new(
        move |s| cy - half(s),
        move |t| cx - half_t(t),
        a,
        cx,
        Monotonicity::Decreasing,
    );
    let gamma1 = Curve::new(
        move |s| cy - half(s),
        move |t| cx + half_t(t),
        cx,
        c,
        Monotonicity::Increasing,
    );
    let gamma2 = Curve::new(
        move |s| cy + half(s),
        move |t| cx - half_t(t),
        a,
        cx,
        Monotonicity::Increasing,
    );
    let gamma0 = Curve::new(
        move |s| cy + half(s),
        move |t| cx + half_t(t),
        cx,
        c,
        Monotonicity::Decreasing,
    );
    Ok(DomainSpec {
        a,
        b1: cx,
        b2: cx,
        c,
        gamma12,
        gamma1,
        gamma2,
        gamma0,
        strip_epsilon: None,
    })
}

/// One polynomial piece `Σ coeffs[i]·(s − lo)^i` on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyPiece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl PolyPiece {
    fn eval(&self, s: f64) -> f64 {
        let x = s - self.lo;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Piecewise polynomial curve; pieces must be sorted and contiguous.
pub fn piecewise_curve(pieces: Vec<PolyPiece>, direction: Monotonicity) -> Result<Curve> {
    if pieces.is_empty() {
        return Err(Error::InvalidArgument("curve needs at least one piece".into()));
    }
    for w in pieces.windows(2) {
        if (w[0].hi - w[1].lo).abs() > 1e-12 * w[0].hi.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "curve pieces are not contiguous at {} / {}",
                w[0].hi, w[1].lo
            )));
        }
    }
    for p in &pieces {
        if !(p.hi > p.lo) || p.coeffs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "bad curve piece on [{}, {}]",
                p.lo, p.hi
            )));
        }
    }
    let lo = pieces[0].lo;
    let hi = pieces[pieces.len() - 1].hi;
    let pieces = Arc::new(pieces);
    Ok(Curve::with_bisection(
        move |s| {
            let idx = pieces
                .iter()
                .rposition(|p| s >= p.lo)
                .unwrap_or(0);
            pieces[idx].eval(s)
        },
        lo,
        hi,
        direction,
    ))
}

/// JSON form of a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainConfig {
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
    },
    Curves {
        a: f64,
        b1: f64,
        b2: f64,
        c: f64,
        gamma12: Vec<PolyPiece>,
        gamma1: Vec<PolyPiece>,
        gamma2: Vec<PolyPiece>,
        gamma0: Vec<PolyPiece>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        strip_epsilon: Option<f64>,
    },
}

impl DomainConfig {
    pub fn build(&self) -> Result<DomainSpec> {
        match self {
            DomainConfig::Circle { cx, cy, r } => circle_domain(*cx, *cy, *r),
            DomainConfig::Curves {
                a,
                b1,
                b2,
                c,
                gamma12,
                gamma1,
                gamma2,
                gamma0,
                strip_epsilon,
            } => Ok(DomainSpec {
                a: *a,
                b1: *b1,
                b2: *b2,
                c: *c,
                gamma12: piecewise_curve(gamma12.clone(), Monotonicity::Decreasing)?,
                gamma1: piecewise_curve(gamma1.clone(), Monotonicity::Increasing)?,
                gamma2: piecewise_curve(gamma2.clone(), Monotonicity::Increasing)?,
                gamma0: piecewise_curve(gamma0.clone(), Monotonicity::Decreasing)?,
                strip_epsilon: *strip_epsilon,
            }),
        }
    }
}

/// Default grid density used when validating domains from configuration.
pub const DEFAULT_GRID_POINTS: usize = 256;

#[cfg(test)]
mod tests {
    use super::*;

    fn line(lo: f64, hi: f64, at_lo: f64, slope: f64) -> Vec<PolyPiece> {
        vec![PolyPiece { lo, hi, coeffs: vec![at_lo, slope] }]
    }

    /// Diamond with vertices (1,2), (2,1), (3,2), (2,3).
    pub(crate) fn diamond() -> DomainConfig {
        DomainConfig::Curves {
            a: 1.0,
            b1: 2.0,
            b2: 2.0,
            c: 3.0,
            gamma12: line(1.0, 2.0, 2.0, -1.0),
            gamma1: line(2.0, 3.0, 1.0, 1.0),
            gamma2: line(1.0, 2.0, 2.0, 1.0),
            gamma0: line(2.0, 3.0, 3.0, -1.0),
            strip_epsilon: None,
        }
    }

    #[test]
    fn circle_geometry() {
        let d = circle_domain(6.0, 6.0, 2.0).unwrap();
        assert_eq!((d.a, d.b1, d.b2, d.c), (4.0, 6.0, 6.0, 8.0));
        assert_eq!(d.gamma12.eval(4.0), 6.0);
        assert_eq!(d.gamma12.eval(6.0), 4.0);
        assert_eq!(d.gamma2.eval(4.0), 6.0);
        assert_eq!(d.gamma0.eval(8.0), 6.0);
        let d = circle_domain(2.0, 2.0, 1.0).unwrap();
        assert_eq!((d.a, d.c), (1.0, 3.0));
        assert_eq!(d.gamma1.eval(3.0), 2.0);
    }

    #[test]
    fn circle_outside_quadrant() {
        assert!(matches!(
            circle_domain(1.0, 1.0, 2.0),
            Err(Error::CircleNotInPositiveQuadrant { .. })
        ));
    }

    #[test]
    fn circle_validates() {
        let d = circle_domain(6.0, 6.0, 2.0).unwrap().validate(64).unwrap();
        assert!((d.epsilon() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn grid_too_coarse() {
        let d = circle_domain(6.0, 6.0, 2.0).unwrap();
        assert!(matches!(d.validate(8), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn contains_examples() {
        let d = circle_domain(6.0, 6.0, 2.0).unwrap().validate(64).unwrap();
        assert!(d.contains(6.0, 6.0));
        assert!(!d.contains(6.0, 8.01));
        assert!(d.contains(4.0, 6.0));
        assert!(!d.contains(3.99, 6.0));
    }

    #[test]
    fn zero_corner_is_rejected() {
        // lower corner pushed down to the axis
        let cfg = DomainConfig::Curves {
            a: 1.0,
            b1: 2.0,
            b2: 2.0,
            c: 3.0,
            gamma12: line(1.0, 2.0, 2.0, -2.0),
            gamma1: line(2.0, 3.0, 0.0, 2.0),
            gamma2: line(1.0, 2.0, 2.0, 1.0),
            gamma0: line(2.0, 3.0, 3.0, -1.0),
            strip_epsilon: None,
        };
        let err = cfg.build().unwrap().validate(32).unwrap_err();
        assert!(matches!(err, Error::NonPositiveOrdinate { .. }), "{err}");
    }

    #[test]
    fn endpoint_mismatch_detected() {
        // gamma2(b2) = 5 but gamma0(b2) = 5.01
        let cfg = DomainConfig::Curves {
            a: 1.0,
            b1: 2.0,
            b2: 2.0,
            c: 3.0,
            gamma12: line(1.0, 2.0, 2.0, -1.0),
            gamma1: line(2.0, 3.0, 1.0, 1.0),
            gamma2: line(1.0, 2.0, 2.0, 3.0),
            gamma0: line(2.0, 3.0, 5.01, -3.01),
            strip_epsilon: None,
        };
        let err = cfg.build().unwrap().validate(32).unwrap_err();
        match err {
            Error::EndpointMismatch { left, right, .. } => {
                assert_eq!(left, 5.0);
                assert_eq!(right, 5.01);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_direction_detected() {
        let cfg = DomainConfig::Curves {
            a: 1.0,
            b1: 2.0,
            b2: 2.0,
            c: 3.0,
            gamma12: line(1.0, 2.0, 2.0, -1.0),
            gamma1: vec![
                PolyPiece { lo: 2.0, hi: 2.5, coeffs: vec![1.0, 1.0] },
                PolyPiece { lo: 2.5, hi: 3.0, coeffs: vec![1.5, -0.2] },
            ],
            gamma2: line(1.0, 2.0, 2.0, 1.0),
            gamma0: line(2.0, 3.0, 3.0, -1.0),
            strip_epsilon: None,
        };
        let err = cfg.build().unwrap().validate(32).unwrap_err();
        assert!(matches!(err, Error::MonotonicityViolation { curve: CurveId::Gamma1, .. }), "{err}");
    }

    #[test]
    fn thin_domain_strips_overlap() {
        // lower and upper arcs only 0.1 apart at b1 = b2, with a wide strip
        let cfg = DomainConfig::Curves {
            a: 1.0,
            b1: 2.0,
            b2: 2.0,
            c: 3.0,
            gamma12: line(1.0, 2.0, 2.0, -0.05),
            gamma1: line(2.0, 3.0, 1.95, 0.05),
            gamma2: line(1.0, 2.0, 2.0, 0.05),
            gamma0: line(2.0, 3.0, 2.05, -0.05),
            strip_epsilon: Some(0.2),
        };
        let err = cfg.build().unwrap().validate(32).unwrap_err();
        assert!(matches!(err, Error::StripOverlap { .. }), "{err}");
    }

    #[test]
    fn diamond_validates_and_contains() {
        let d = diamond().build().unwrap().validate(64).unwrap();
        assert!(d.contains(2.0, 2.0));
        assert!(d.contains(1.5, 1.5));
        assert!(!d.contains(1.2, 1.5));
        assert!(d.gamma12().inverse(1.5) - 1.5 < 1e-12);
    }

    #[test]
    fn transform_examples() {
        let d = circle_domain(2.0, 2.0, 1.0).unwrap().validate(64).unwrap();
        let st = d.transform(1.0, 1.0, TransformMode::Stationary, 64).unwrap();
        assert!((st.a() - 2f64.exp()).abs() < 1e-12);
        assert!((st.c() - 6f64.exp()).abs() < 1e-9);
        let zs = d.transform(1.0, 1.0, TransformMode::ZeroStart, 64).unwrap();
        assert!((zs.a() - (2f64.exp() - 1.0)).abs() < 1e-12);
        assert!((zs.c() - (6f64.exp() - 1.0)).abs() < 1e-9);
        // endpoint image
        let g = st.gamma12().eval(st.a());
        assert_eq!(g, (2.0 * d.gamma12().eval(1.0)).exp());
    }

    #[test]
    fn json_round_trip() {
        let cfg = DomainConfig::Circle { cx: 6.0, cy: 6.0, r: 2.0 };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(text, r#"{"kind":"circle","cx":6.0,"cy":6.0,"r":2.0}"#);
        let back: DomainConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let diamond_text = serde_json::to_string(&diamond()).unwrap();
        let back: DomainConfig = serde_json::from_str(&diamond_text).unwrap();
        assert_eq!(back, diamond());
    }
}
