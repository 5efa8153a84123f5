//! Integrals of an observed field and its increments along boundary curves
//! and over the domain.
//!
//! Along a curve `t = γ(s)` the increment integral `∫ y(s) Z(ds, γ(s))` is
//! the limit of `h⁻¹ ∫ y(s) [Z(s+h, γ(s)) − Z(s, γ(s))] ds`. In
//! [`Method::Analytic`] mode the limit is taken exactly through the field's
//! partial derivatives; [`Method::FiniteDifference`] keeps a finite step.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Curve, ValidatedDomain};
use crate::jet::Jet;
use crate::quadrature::{integrate_clustered, integrate_over_g, QuadConfig, QuadValue, Quadrature};
use crate::random_fields::{Column, Field};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StochIntConfig {
    pub method: Method,
    /// Step of the difference quotients; only used by
    /// [`Method::FiniteDifference`].
    pub fd_step: f64,
    pub quad: QuadConfig,
}

impl Default for StochIntConfig {
    fn default() -> Self {
        Self {
            method: Method::Analytic,
            fd_step: 1e-5,
            quad: QuadConfig::default(),
        }
    }
}

impl StochIntConfig {
    pub fn finite_difference(h: f64) -> Self {
        Self {
            method: Method::FiniteDifference,
            fd_step: h,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference step must be positive, got {}",
                self.fd_step
            )));
        }
        self.quad.validate()
    }

    /// Quadrature settings for integrands holding mixed differences.
    pub fn effective_quad(&self) -> QuadConfig {
        self.effective_quad_for(2)
    }

    /// Quadrature settings for integrands whose differences have the given
    /// order. A difference quotient of order `k` carries round-off of order
    /// `ε|Z|/hᵏ`, which adaptive refinement must not chase: a panel is only
    /// accepted once that noise is below about `15·rel_tol` of the
    /// integrand, so the tolerances are floored.
    pub fn effective_quad_for(&self, order: i32) -> QuadConfig {
        match self.method {
            Method::Analytic => self.quad,
            Method::FiniteDifference => QuadConfig {
                abs_tol: self.quad.abs_tol.max(1e-8),
                rel_tol: self
                    .quad
                    .rel_tol
                    .max(1e-6)
                    .max(FD_NOISE_FACTOR * f64::EPSILON / self.fd_step.powi(order)),
                max_depth: self.quad.max_depth.min(FD_MAX_DEPTH),
                ..self.quad
            },
        }
    }
}

/// Ratio of the assumed round-off level of a difference quotient of order
/// `k` to `ε/hᵏ`.
const FD_NOISE_FACTOR: f64 = 32.0;
/// Depth cap for noisy difference-quotient integrands.
const FD_MAX_DEPTH: u32 = 16;

/// The field as seen through the chosen method: jets whose `d1`, `d2`,
/// `d12` are either exact partials or forward difference quotients.
#[derive(Clone, Copy)]
pub struct Observer<'a> {
    field: &'a dyn Field,
    cfg: &'a StochIntConfig,
}

impl<'a> Observer<'a> {
    pub fn new(field: &'a dyn Field, cfg: &'a StochIntConfig) -> Self {
        Self { field, cfg }
    }

    pub fn jet(&self, s: f64, t: f64) -> Result<Jet> {
        match self.cfg.method {
            Method::Analytic => self.field.jet(s, t),
            Method::FiniteDifference => fd_jet(self.field, s, t, self.cfg.fd_step),
        }
    }

    pub fn column(&self, s: f64) -> Result<ObservedColumn<'a>> {
        Ok(match self.cfg.method {
            Method::Analytic => ObservedColumn::Exact(self.field.column(s)?),
            Method::FiniteDifference => ObservedColumn::Differenced {
                field: self.field,
                s,
                h: self.cfg.fd_step,
            },
        })
    }
}

pub enum ObservedColumn<'a> {
    Exact(Box<dyn Column + 'a>),
    Differenced { field: &'a dyn Field, s: f64, h: f64 },
}

impl ObservedColumn<'_> {
    pub fn jet(&self, t: f64) -> Result<Jet> {
        match self {
            ObservedColumn::Exact(c) => c.jet(t),
            ObservedColumn::Differenced { field, s, h } => fd_jet(*field, *s, t, *h),
        }
    }
}

fn fd_jet(field: &dyn Field, s: f64, t: f64, h: f64) -> Result<Jet> {
    let z = field.value_near(s, t)?;
    let zs = field.value_near(s + h, t)?;
    let zt = field.value_near(s, t + h)?;
    let zst = field.value_near(s + h, t + h)?;
    Ok(Jet::new(z, (zs - z) / h, (zt - z) / h, (zst - zs - zt + z) / (h * h)))
}

/// Holds the first error raised inside a quadrature callback; the callback
/// itself returns NaN so the integrator stops refining.
#[derive(Default)]
pub(crate) struct ErrorSlot(RefCell<Option<Error>>);

impl ErrorSlot {
    pub(crate) fn catch<V: QuadValue>(&self, r: Result<V>, nan: impl FnOnce() -> V) -> V {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut slot = self.0.borrow_mut();
                if slot.is_none() {
                    *slot = Some(e);
                }
                nan()
            }
        }
    }

    pub(crate) fn check<V>(self, q: Quadrature<V>) -> Result<Quadrature<V>> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(q),
        }
    }
}

fn finish(slot: ErrorSlot, q: Quadrature<f64>) -> Result<f64> {
    slot.check(q)?.strict()
}

/// `∫_lo^hi y(s) Z(ds, γ(s))`.
pub fn line_ds(
    field: &dyn Field,
    y: impl Fn(f64) -> f64,
    curve: &Curve,
    lo: f64,
    hi: f64,
    cfg: &StochIntConfig,
) -> Result<f64> {
    cfg.validate()?;
    let obs = Observer::new(field, cfg);
    let slot = ErrorSlot::default();
    let q = integrate_clustered(
        |s| slot.catch(obs.jet(s, curve.eval(s)).map(|j| y(s) * j.d1), || f64::NAN),
        lo,
        hi,
        &cfg.effective_quad_for(1),
    );
    finish(slot, q)
}

/// `∫_{t_lo}^{t_hi} y(γ⁻¹(t)) Z(γ⁻¹(t), dt)`.
pub fn line_dt(
    field: &dyn Field,
    y: impl Fn(f64) -> f64,
    curve: &Curve,
    t_lo: f64,
    t_hi: f64,
    cfg: &StochIntConfig,
) -> Result<f64> {
    cfg.validate()?;
    let obs = Observer::new(field, cfg);
    let slot = ErrorSlot::default();
    let q = integrate_clustered(
        |t| {
            let s = curve.inverse(t);
            slot.catch(obs.jet(s, t).map(|j| y(s) * j.d2), || f64::NAN)
        },
        t_lo,
        t_hi,
        &cfg.effective_quad_for(1),
    );
    finish(slot, q)
}

fn area_with(
    field: &dyn Field,
    y: impl Fn(f64, f64) -> f64,
    pick: impl Fn(&Jet) -> f64,
    order: i32,
    domain: &ValidatedDomain,
    cfg: &StochIntConfig,
) -> Result<f64> {
    cfg.validate()?;
    let obs = Observer::new(field, cfg);
    let slot = ErrorSlot::default();
    let (y, pick, slot_ref) = (&y, &pick, &slot);
    let q = integrate_over_g(
        move |s| {
            let col = obs.column(s);
            move |t| {
                let r = match &col {
                    Ok(c) => c.jet(t).map(|j| y(s, t) * pick(&j)),
                    // re-raise the column's error with its original variant
                    Err(_) => obs.jet(s, t).map(|j| y(s, t) * pick(&j)),
                };
                slot_ref.catch(r, || f64::NAN)
            }
        },
        domain,
        &cfg.effective_quad_for(order),
    );
    finish(slot, q)
}

/// `∬_G y(s,t) Z(ds, dt)`.
pub fn area_d1d2(
    field: &dyn Field,
    y: impl Fn(f64, f64) -> f64,
    domain: &ValidatedDomain,
    cfg: &StochIntConfig,
) -> Result<f64> {
    area_with(field, y, |j| j.d12, 2, domain, cfg)
}

/// `∬_G y(s,t) Z(ds, t) dt`.
pub fn area_d1(
    field: &dyn Field,
    y: impl Fn(f64, f64) -> f64,
    domain: &ValidatedDomain,
    cfg: &StochIntConfig,
) -> Result<f64> {
    area_with(field, y, |j| j.d1, 1, domain, cfg)
}

/// `∬_G y(s,t) Z(s, dt) ds`.
pub fn area_d2(
    field: &dyn Field,
    y: impl Fn(f64, f64) -> f64,
    domain: &ValidatedDomain,
    cfg: &StochIntConfig,
) -> Result<f64> {
    area_with(field, y, |j| j.d2, 1, domain, cfg)
}

/// `∬_G y(s,t) Z(s,t) ds dt`.
pub fn area_plain(
    field: &dyn Field,
    y: impl Fn(f64, f64) -> f64,
    domain: &ValidatedDomain,
    cfg: &StochIntConfig,
) -> Result<f64> {
    area_with(field, y, |j| j.v, 0, domain, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circle_domain;
    use crate::random_fields::{draw_kl, FieldModel, FieldSample};
    use crate::regressors::RegressorSet;
    use std::f64::consts::PI;

    fn deterministic(expr: &str) -> FieldSample {
        FieldSample::drift_only(
            FieldModel::Wiener,
            10.0,
            10.0,
            RegressorSet::from_exprs(&[expr]).unwrap(),
            vec![1.0],
        )
        .unwrap()
    }

    fn disc() -> ValidatedDomain {
        circle_domain(6.0, 6.0, 2.0).unwrap().validate(64).unwrap()
    }

    #[test]
    fn line_integrals_of_coordinates() {
        let d = disc();
        let cfg = StochIntConfig::default();
        let zs = deterministic("s");
        let v = line_ds(&zs, |_| 1.0, d.gamma1(), 6.0, 8.0, &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        assert_eq!(line_dt(&zs, |_| 1.0, d.gamma2(), 6.0, 8.0, &cfg).unwrap(), 0.0);
        let zt = deterministic("t");
        let v = line_dt(&zt, |_| 1.0, d.gamma2(), 6.0, 8.0, &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        let c = deterministic("3");
        assert_eq!(line_ds(&c, |_| 1.0, d.gamma12(), 4.0, 6.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn area_integrals() {
        let d = disc();
        let cfg = StochIntConfig::default();
        let v = area_d1d2(&deterministic("s*t"), |_, _| 1.0, &d, &cfg).unwrap();
        assert!((v - 4.0 * PI).abs() < 1e-6);
        let c = deterministic("2.5");
        for f in [area_d1, area_d2, area_d1d2] {
            assert_eq!(f(&c, |_, _| 1.0, &d, &cfg).unwrap(), 0.0);
        }
        let g1 = deterministic("s^2+t^2");
        assert_eq!(area_d1d2(&g1, |_, _| 1.0, &d, &cfg).unwrap(), 0.0);
        // ∬ t ds dt over the disc = 6·4π
        let v = area_plain(&deterministic("t"), |_, _| 1.0, &d, &cfg).unwrap();
        assert!((v - 24.0 * PI).abs() < 1e-5);
    }

    #[test]
    fn out_of_rectangle_propagates() {
        let d = disc();
        let kl = draw_kl(3, 7.0, 7.0, 1).unwrap();
        let f = FieldSample::new(FieldModel::Wiener, kl).unwrap();
        let r = area_plain(&f, |_, _| 1.0, &d, &StochIntConfig::default());
        assert!(matches!(r, Err(Error::OutOfRectangle { .. })), "{r:?}");
    }

    #[test]
    fn finite_difference_approaches_analytic() {
        let d = disc();
        let kl = draw_kl(6, 8.0, 8.0, 5).unwrap();
        let f = FieldSample::new(FieldModel::Wiener, kl).unwrap();
        let exact = line_ds(&f, |s| s, d.gamma1(), 6.0, 8.0, &StochIntConfig::default()).unwrap();
        let mut prev = f64::INFINITY;
        for h in [1e-3, 1e-4, 1e-5] {
            let v = line_ds(&f, |s| s, d.gamma1(), 6.0, 8.0, &StochIntConfig::finite_difference(h)).unwrap();
            let err = (v - exact).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev <= 1e-4 * exact.abs());
    }

    #[test]
    fn rejects_bad_step() {
        let d = disc();
        let f = deterministic("s");
        let cfg = StochIntConfig::finite_difference(0.0);
        assert!(line_ds(&f, |_| 1.0, d.gamma1(), 6.0, 8.0, &cfg).is_err());
    }
}
