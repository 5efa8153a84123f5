//! Recursive adaptive Simpson quadrature on intervals, and iterated
//! integration over the curved observation domain.
//!
//! Integrands may be scalar or vector valued (`Vec<f64>`); vector integrands
//! are refined until every component meets the tolerance, which lets a whole
//! Fisher matrix or a score vector share one set of nodes.

use std::cell::Cell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ValidatedDomain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Number of equal panels the interval is cut into before adaptive
    /// refinement starts. Raise it for oscillatory integrands.
    pub initial_panels: usize,
    /// Hard cap on integrand evaluations for a single 1-D integral.
    pub max_evals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_depth: 40,
            initial_panels: 2,
            max_evals: 20_000_000,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.initial_panels == 0 {
            return Err(Error::InvalidArgument(
                "initial_panels must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Tolerances for inner integrals of an iterated integral whose outer
    /// range has length `outer_len`.
    pub(crate) fn inner(&self, outer_len: f64) -> QuadConfig {
        let shrink = 0.1 / outer_len.max(1.0);
        QuadConfig {
            abs_tol: self.abs_tol * shrink,
            rel_tol: self.rel_tol * 0.1,
            ..*self
        }
    }
}

/// Values that adaptive Simpson can integrate.
pub trait QuadValue: Clone {
    /// `x·a + y·b + z·c`.
    fn lin3(a: &Self, x: f64, b: &Self, y: f64, c: &Self, z: f64) -> Self;
    fn add_assign(&mut self, other: &Self);
    fn max_abs(&self) -> f64;
    fn scale(&self, k: f64) -> Self;
}

impl QuadValue for f64 {
    #[inline]
    fn lin3(a: &f64, x: f64, b: &f64, y: f64, c: &f64, z: f64) -> f64 {
        x * a + y * b + z * c
    }
    #[inline]
    fn add_assign(&mut self, other: &f64) {
        *self += other;
    }
    #[inline]
    fn max_abs(&self) -> f64 {
        if self.is_nan() {
            f64::NAN
        } else {
            self.abs()
        }
    }
    #[inline]
    fn scale(&self, k: f64) -> f64 {
        self * k
    }
}

impl QuadValue for Vec<f64> {
    fn lin3(a: &Vec<f64>, x: f64, b: &Vec<f64>, y: f64, c: &Vec<f64>, z: f64) -> Vec<f64> {
        debug_assert!(a.len() == b.len() && b.len() == c.len());
        a.iter()
            .zip(b)
            .zip(c)
            .map(|((a, b), c)| x * a + y * b + z * c)
            .collect()
    }
    fn add_assign(&mut self, other: &Vec<f64>) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }
    fn max_abs(&self) -> f64 {
        let mut m = 0.0_f64;
        for x in self {
            if x.is_nan() {
                return f64::NAN;
            }
            m = m.max(x.abs());
        }
        m
    }
    fn scale(&self, k: f64) -> Vec<f64> {
        self.iter().map(|x| x * k).collect()
    }
}

/// Result of an adaptive integration together with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature<V> {
    pub value: V,
    /// Some panel was accepted at `max_depth` (or the evaluation budget ran
    /// out) without meeting the tolerance.
    pub depth_exceeded: bool,
    /// The integrand produced a NaN or infinity somewhere.
    pub non_finite: bool,
    pub evals: usize,
}

impl<V> Quadrature<V> {
    pub fn is_clean(&self) -> bool {
        !self.depth_exceeded && !self.non_finite
    }

    pub fn map<W>(self, f: impl FnOnce(V) -> W) -> Quadrature<W> {
        Quadrature {
            value: f(self.value),
            depth_exceeded: self.depth_exceeded,
            non_finite: self.non_finite,
            evals: self.evals,
        }
    }
}

impl Quadrature<f64> {
    /// Converts the diagnostic flags into an error.
    pub fn strict(self) -> Result<f64> {
        if self.non_finite {
            return Err(Error::QuadratureFailure(
                "integrand is not finite on the integration range".into(),
            ));
        }
        if self.depth_exceeded {
            return Err(Error::MaxDepthExceeded {
                estimate: self.value,
            });
        }
        Ok(self.value)
    }
}

/// Aggregated quadrature flags, carried through estimation results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadFlags {
    pub depth_exceeded: bool,
    pub non_finite: bool,
    pub evals: usize,
}

impl QuadFlags {
    pub fn absorb<V>(&mut self, q: &Quadrature<V>) {
        self.depth_exceeded |= q.depth_exceeded;
        self.non_finite |= q.non_finite;
        self.evals += q.evals;
    }

    pub fn merge(&mut self, other: QuadFlags) {
        self.depth_exceeded |= other.depth_exceeded;
        self.non_finite |= other.non_finite;
        self.evals += other.evals;
    }

    pub fn is_clean(&self) -> bool {
        !self.depth_exceeded && !self.non_finite
    }
}

struct State {
    evals: usize,
    depth_exceeded: bool,
    non_finite: bool,
    max_depth: u32,
    max_evals: usize,
}

/// Adaptive Simpson over `[lo, hi]` for scalar or vector integrands.
///
/// A panel is accepted when `|S_whole − S_left − S_right| ≤ 15·tol` and the
/// Richardson-corrected value `S_left + S_right + Δ/15` is returned for it.
/// The global tolerance is `max(abs_tol, rel_tol·|coarse estimate|)`, shared
/// between panels in proportion to their width.
pub fn adaptive_simpson<V, F>(f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Quadrature<V>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    if hi < lo {
        return adaptive_simpson(f, hi, lo, cfg).map(|v| v.scale(-1.0));
    }
    let panels = cfg.initial_panels.max(1);
    let width = (hi - lo) / panels as f64;

    let mut state = State {
        evals: 0,
        depth_exceeded: false,
        non_finite: false,
        max_depth: cfg.max_depth,
        max_evals: cfg.max_evals,
    };

    if hi == lo {
        let y = f(lo);
        state.non_finite = !y.max_abs().is_finite();
        return Quadrature {
            value: y.scale(0.0),
            depth_exceeded: false,
            non_finite: state.non_finite,
            evals: 1,
        };
    }

    // coarse pass: one Simpson panel per initial piece
    let mut nodes = Vec::with_capacity(panels);
    let mut fa = f(lo);
    state.evals += 1;
    let mut estimate: Option<V> = None;
    for i in 0..panels {
        let a = lo + width * i as f64;
        let b = if i + 1 == panels { hi } else { lo + width * (i + 1) as f64 };
        let m = 0.5 * (a + b);
        let fm = f(m);
        let fb = f(b);
        state.evals += 2;
        let whole = V::lin3(&fa, (b - a) / 6.0, &fm, 4.0 * (b - a) / 6.0, &fb, (b - a) / 6.0);
        match estimate.as_mut() {
            Some(e) => e.add_assign(&whole),
            None => estimate = Some(whole.clone()),
        }
        nodes.push((a, fa.clone(), m, fm, b, fb.clone(), whole));
        fa = fb;
    }
    let estimate = estimate.expect("at least one panel");
    let scale = estimate.max_abs();
    if !scale.is_finite() {
        return Quadrature {
            value: estimate,
            depth_exceeded: false,
            non_finite: true,
            evals: state.evals,
        };
    }
    let tol = cfg.abs_tol.max(cfg.rel_tol * scale);

    let mut total: Option<V> = None;
    for (a, fa, m, fm, b, fb, whole) in nodes {
        let panel_tol = tol * (b - a) / (hi - lo);
        let part = refine(&f, a, &fa, m, &fm, b, &fb, whole, panel_tol, 0, &mut state);
        match total.as_mut() {
            Some(t) => t.add_assign(&part),
            None => total = Some(part),
        }
    }
    Quadrature {
        value: total.expect("at least one panel"),
        depth_exceeded: state.depth_exceeded,
        non_finite: state.non_finite,
        evals: state.evals,
    }
}

#[allow(clippy::too_many_arguments)]
fn refine<V, F>(
    f: &F,
    a: f64,
    fa: &V,
    m: f64,
    fm: &V,
    b: f64,
    fb: &V,
    whole: V,
    tol: f64,
    depth: u32,
    state: &mut State,
) -> V
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    state.evals += 2;
    let hl = (m - a) / 6.0;
    let hr = (b - m) / 6.0;
    let left = V::lin3(fa, hl, &flm, 4.0 * hl, fm, hl);
    let right = V::lin3(fm, hr, &frm, 4.0 * hr, fb, hr);
    let delta = V::lin3(&left, 1.0, &right, 1.0, &whole, -1.0);
    let err = delta.max_abs();

    if !err.is_finite() {
        state.non_finite = true;
        return V::lin3(&left, 1.0, &right, 1.0, &whole, 0.0);
    }
    let converged = err <= 15.0 * tol;
    // panels this narrow cannot be split further in floating point
    let exhausted = depth >= state.max_depth
        || state.evals >= state.max_evals
        || lm <= a
        || rm >= b
        || lm >= m;
    if converged || exhausted {
        if !converged {
            state.depth_exceeded = true;
        }
        return V::lin3(&left, 1.0, &right, 1.0, &delta, 1.0 / 15.0);
    }
    let mut out = refine(f, a, fa, lm, &flm, m, fm, left, 0.5 * tol, depth + 1, state);
    let r = refine(f, m, fm, rm, &frm, b, fb, right, 0.5 * tol, depth + 1, state);
    out.add_assign(&r);
    out
}

/// `∫_lo^hi f(x) dx` by adaptive Simpson. `lo == hi` gives zero.
pub fn integrate_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cfg: &QuadConfig) -> Quadrature<f64> {
    adaptive_simpson(f, lo, hi, cfg)
}

/// `∫_lo^hi f(x) dx` after the substitution `x = lo + (hi−lo)(1 − cos θ)/2`,
/// which clusters nodes at both ends. Integrands that behave like
/// `√(x − lo)` there, as anything evaluated along a circular arc does near
/// a vertical or horizontal tangent, become smooth in `θ`.
pub fn integrate_clustered<V, F>(f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Quadrature<V>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    let half = 0.5 * (hi - lo);
    adaptive_simpson(
        |th: f64| {
            let (sn, cs) = th.sin_cos();
            // pin the ends so that curve endpoints are hit exactly
            let x = if th == 0.0 {
                lo
            } else if th == PI {
                hi
            } else {
                lo + half * (1.0 - cs)
            };
            f(x).scale(half * sn)
        },
        0.0,
        PI,
        cfg,
    )
}

/// Iterated integral `∫_{s_lo}^{s_hi} ∫_{lower(s)}^{upper(s)} f(s)(t) dt ds`.
///
/// `f` is curried so that callers can do per-abscissa work once for every
/// inner integral.
pub fn integrate_region<V, F, R>(
    f: &F,
    s_lo: f64,
    s_hi: f64,
    lower: impl Fn(f64) -> f64,
    upper: impl Fn(f64) -> f64,
    cfg: &QuadConfig,
) -> Quadrature<V>
where
    V: QuadValue,
    F: Fn(f64) -> R,
    R: Fn(f64) -> V,
{
    let inner_cfg = cfg.inner(s_hi - s_lo);
    let depth_exceeded = Cell::new(false);
    let non_finite = Cell::new(false);
    let evals = Cell::new(0usize);
    let outer = integrate_clustered(
        |s| {
            let row = f(s);
            let q = adaptive_simpson(row, lower(s), upper(s), &inner_cfg);
            depth_exceeded.set(depth_exceeded.get() | q.depth_exceeded);
            non_finite.set(non_finite.get() | q.non_finite);
            evals.set(evals.get() + q.evals);
            q.value
        },
        s_lo,
        s_hi,
        cfg,
    );
    Quadrature {
        value: outer.value,
        depth_exceeded: outer.depth_exceeded | depth_exceeded.get(),
        non_finite: outer.non_finite | non_finite.get(),
        evals: evals.get(),
    }
}

/// `∬_G f ds dt` as an iterated integral: outer over `s`, split at the
/// breakpoints `a, b1∧b2, b1∨b2, c`; inner over `t` between the lower and
/// upper boundary curves of the strip.
pub fn integrate_over_g<V, F, R>(f: F, domain: &ValidatedDomain, cfg: &QuadConfig) -> Quadrature<V>
where
    V: QuadValue,
    F: Fn(f64) -> R,
    R: Fn(f64) -> V,
{
    let cuts = domain.s_breakpoints();
    let mut total: Option<Quadrature<V>> = None;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let q = integrate_region(&f, lo, hi, |s| domain.lower(s), |s| domain.upper(s), cfg);
        total = Some(match total {
            None => q,
            Some(mut acc) => {
                acc.value.add_assign(&q.value);
                acc.depth_exceeded |= q.depth_exceeded;
                acc.non_finite |= q.non_finite;
                acc.evals += q.evals;
                acc
            }
        });
    }
    total.expect("a validated domain has a ≤ c with a < c")
}

/// Scalar convenience wrapper around [`integrate_over_g`].
pub fn integrate_over_g_scalar(
    f: impl Fn(f64, f64) -> f64,
    domain: &ValidatedDomain,
    cfg: &QuadConfig,
) -> Quadrature<f64> {
    integrate_over_g(|s| { let f = &f; move |t| f(s, t) }, domain, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circle_domain;
    use std::f64::consts::PI;

    #[test]
    fn cubic_is_exact() {
        let q = integrate_1d(|x| x * x, 0.0, 1.0, &QuadConfig::default());
        assert_eq!(q.value, 1.0 / 3.0);
        let q = integrate_1d(|x| x * x * x - 2.0 * x, -1.0, 2.0, &QuadConfig::default());
        assert!((q.value - (15.0 / 4.0 - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn empty_interval_is_zero() {
        let q = integrate_1d(|x| x.exp(), 1.5, 1.5, &QuadConfig::default());
        assert_eq!(q.value, 0.0);
        assert!(q.is_clean());
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let cfg = QuadConfig::default();
        let a = integrate_1d(|x| x.sin(), 0.0, 2.0, &cfg).value;
        let b = integrate_1d(|x| x.sin(), 2.0, 0.0, &cfg).value;
        assert_eq!(a, -b);
    }

    #[test]
    fn lower_left_arc_of_circle() {
        // ∫_4^6 (6 − √(4 − (s−6)²)) ds = 12 − π
        let cfg = QuadConfig::default();
        let q = integrate_1d(|s| 6.0 - (4.0 - (s - 6.0) * (s - 6.0)).max(0.0).sqrt(), 4.0, 6.0, &cfg);
        assert!((q.value - (12.0 - PI)).abs() < 1e-8, "{}", q.value);
        assert!(q.is_clean());
    }

    #[test]
    fn nan_is_flagged_not_recursed() {
        let cfg = QuadConfig::default();
        let q = integrate_1d(|x| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, &cfg);
        assert!(q.non_finite);
        assert!(q.evals < 1000);
        assert!(q.strict().is_err());
    }

    #[test]
    fn depth_limit_is_flagged() {
        let cfg = QuadConfig {
            max_depth: 2,
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            ..QuadConfig::default()
        };
        let q = integrate_1d(|x| (40.0 * x).sin(), 0.0, 3.0, &cfg);
        assert!(q.depth_exceeded);
        assert!(matches!(q.strict(), Err(Error::MaxDepthExceeded { .. })));
    }

    #[test]
    fn vector_integrand_matches_componentwise() {
        let cfg = QuadConfig::default();
        let v = adaptive_simpson(|x: f64| vec![x.exp(), x.cos(), 1.0], 0.0, 1.0, &cfg).value;
        assert!((v[0] - (1f64.exp() - 1.0)).abs() < 1e-9);
        assert!((v[1] - 1f64.sin()).abs() < 1e-9);
        assert!((v[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn disc_area() {
        let d = circle_domain(6.0, 6.0, 2.0).unwrap().validate(64).unwrap();
        let q = integrate_over_g_scalar(|_, _| 1.0, &d, &QuadConfig::default());
        assert!(((q.value - 4.0 * PI) / (4.0 * PI)).abs() < 1e-7, "{}", q.value);
    }

    #[test]
    fn halving_tolerance_is_self_consistent() {
        let f = |x: f64| (3.0 * x).sin() * (-x).exp() + x.sqrt();
        let c1 = QuadConfig { abs_tol: 1e-6, rel_tol: 1e-6, ..QuadConfig::default() };
        let c2 = QuadConfig { abs_tol: 5e-7, rel_tol: 5e-7, ..QuadConfig::default() };
        let a = integrate_1d(f, 0.0, 4.0, &c1).value;
        let b = integrate_1d(f, 0.0, 4.0, &c2).value;
        assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
    }
}
