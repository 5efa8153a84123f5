//! Fisher matrices, score vectors and maximum likelihood estimates for the
//! Wiener and Ornstein–Uhlenbeck regression models.
//!
//! Ornstein–Uhlenbeck problems can also be solved by mapping them onto a
//! Wiener problem on an exponentially warped domain; [`fisher_via_transform`]
//! and [`score_via_transform`] do that, and serve as an independent check of
//! the direct formulas.

mod basis;
mod forms;
mod mle;

use nalgebra::{DMatrix, DVector};

pub use basis::KlScoreBasis;
pub use mle::{mle, EstimationResult};

use crate::error::{Error, Result};
use crate::geometry::{ValidatedDomain, DEFAULT_GRID_POINTS};
use crate::jet::{ExpWarp, Jet};
use crate::quadrature::{integrate_clustered, integrate_over_g, QuadConfig, QuadFlags, QuadValue, Quadrature};
use crate::random_fields::{Field, FieldModel};
use crate::regressors::RegressorSet;
use crate::stochastic_integrals::{ErrorSlot, Method, Observer, StochIntConfig};

use forms::{fisher_terms, score_terms, Place};

/// Integrates a curried integrand `g(s)(t)` over one term's support.
pub(crate) fn integrate_place<V, F, R>(place: Place, domain: &ValidatedDomain, g: F, cfg: &QuadConfig) -> Quadrature<V>
where
    V: QuadValue,
    F: Fn(f64) -> R,
    R: Fn(f64) -> V,
{
    match place {
        Place::Point { s, t } => {
            let v = g(s)(t);
            Quadrature {
                non_finite: !v.max_abs().is_finite(),
                value: v,
                depth_exceeded: false,
                evals: 1,
            }
        }
        Place::SLine { curve, lo, hi } => {
            let c = domain.spec().curve(curve);
            integrate_clustered(|s| g(s)(c.eval(s)), lo, hi, cfg)
        }
        Place::TLine { curve, lo, hi } => {
            let c = domain.spec().curve(curve);
            integrate_clustered(
                |t| {
                    let s = c.inverse(t);
                    g(s)(t)
                },
                lo,
                hi,
                cfg,
            )
        }
        Place::Area => integrate_over_g(g, domain, cfg),
    }
}

fn strict_flags(flags: &QuadFlags, estimate: f64) -> Result<()> {
    if flags.non_finite {
        return Err(Error::QuadratureFailure("integrand is not finite on the domain".into()));
    }
    if flags.depth_exceeded {
        return Err(Error::MaxDepthExceeded { estimate });
    }
    Ok(())
}

fn upper_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|k| (k..p).map(move |l| (k, l))).collect()
}

/// Fisher matrix of `model` together with the quadrature diagnostics. Only
/// errors that make the result meaningless are raised.
pub fn fisher_with_flags(
    model: &FieldModel,
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    quad: &QuadConfig,
) -> Result<(DMatrix<f64>, QuadFlags)> {
    model.validate()?;
    quad.validate()?;
    let p = regs.p();
    if p == 0 {
        return Err(Error::InvalidArgument("at least one regressor is required".into()));
    }
    let pairs = upper_pairs(p);
    let mut flags = QuadFlags::default();
    let mut total = vec![0.0; pairs.len()];
    for term in fisher_terms(model, domain) {
        let form = &term.form;
        let pairs = &pairs;
        let q = integrate_place(
            term.place,
            domain,
            |s| {
                move |t| {
                    let mut h = vec![Jet::ZERO; p];
                    regs.jets_into(s, t, &mut h);
                    pairs.iter().map(|&(k, l)| form(s, t, &h[k], &h[l])).collect::<Vec<f64>>()
                }
            },
            quad,
        );
        flags.absorb(&q);
        total.add_assign(&q.value);
    }
    let mut a = DMatrix::zeros(p, p);
    for (&(k, l), v) in pairs.iter().zip(&total) {
        a[(k, l)] = *v;
        a[(l, k)] = *v;
    }
    Ok((a, flags))
}

/// Fisher matrix of `model`; quadrature that fails to converge is an error.
pub fn fisher(model: &FieldModel, domain: &ValidatedDomain, regs: &RegressorSet, quad: &QuadConfig) -> Result<DMatrix<f64>> {
    let (a, flags) = fisher_with_flags(model, domain, regs, quad)?;
    strict_flags(&flags, a.amax())?;
    Ok(a)
}

pub fn fisher_wiener(domain: &ValidatedDomain, regs: &RegressorSet, quad: &QuadConfig) -> Result<DMatrix<f64>> {
    fisher(&FieldModel::Wiener, domain, regs, quad)
}

/// The stationary Ornstein–Uhlenbeck Fisher matrix does not involve `σ`.
pub fn fisher_stationary_ou(
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    alpha: f64,
    beta: f64,
    quad: &QuadConfig,
) -> Result<DMatrix<f64>> {
    fisher(&FieldModel::StationaryOu { alpha, beta, sigma: 1.0 }, domain, regs, quad)
}

pub fn fisher_zero_start_ou(
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    alpha: f64,
    beta: f64,
    quad: &QuadConfig,
) -> Result<DMatrix<f64>> {
    fisher(&FieldModel::ZeroStartOu { alpha, beta, sigma: 1.0 }, domain, regs, quad)
}

/// Score vector of the observed field `z` together with the quadrature
/// diagnostics.
pub fn score_with_flags(
    model: &FieldModel,
    z: &dyn Field,
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    cfg: &StochIntConfig,
) -> Result<(DVector<f64>, QuadFlags)> {
    model.validate()?;
    cfg.validate()?;
    let p = regs.p();
    if p == 0 {
        return Err(Error::InvalidArgument("at least one regressor is required".into()));
    }
    let obs = Observer::new(z, cfg);
    let quad = cfg.effective_quad();
    let mut flags = QuadFlags::default();
    let mut total = vec![0.0; p];
    for term in score_terms(model, domain) {
        let form = &term.form;
        let slot = ErrorSlot::default();
        let slot_ref = &slot;
        let q = integrate_place(
            term.place,
            domain,
            |s| {
                let col = obs.column(s);
                move |t| {
                    let zj = match &col {
                        Ok(c) => c.jet(t),
                        Err(_) => obs.jet(s, t),
                    };
                    let r = zj.map(|zj| {
                        let mut h = vec![Jet::ZERO; p];
                        regs.jets_into(s, t, &mut h);
                        h.iter().map(|hk| form(s, t, hk, &zj)).collect::<Vec<f64>>()
                    });
                    slot_ref.catch(r, || vec![f64::NAN; p])
                }
            },
            &quad,
        );
        let q = slot.check(q)?;
        flags.absorb(&q);
        total.add_assign(&q.value);
    }
    Ok((DVector::from_vec(total), flags))
}

/// Flags that make a score unusable. With difference quotients the depth
/// limit is reached by round-off noise alone, so it is only a diagnostic.
fn strict_score_flags(flags: &QuadFlags, estimate: f64, cfg: &StochIntConfig) -> Result<()> {
    match cfg.method {
        Method::Analytic => strict_flags(flags, estimate),
        Method::FiniteDifference => strict_flags(&QuadFlags { depth_exceeded: false, ..*flags }, estimate),
    }
}

/// Score vector of the observed field `z`; quadrature that fails to
/// converge is an error.
pub fn score(
    model: &FieldModel,
    z: &dyn Field,
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    cfg: &StochIntConfig,
) -> Result<DVector<f64>> {
    let (zeta, flags) = score_with_flags(model, z, domain, regs, cfg)?;
    strict_score_flags(&flags, zeta.amax(), cfg)?;
    Ok(zeta)
}

pub fn score_wiener(z: &dyn Field, domain: &ValidatedDomain, regs: &RegressorSet, cfg: &StochIntConfig) -> Result<DVector<f64>> {
    score(&FieldModel::Wiener, z, domain, regs, cfg)
}

pub fn score_stationary_ou(
    z: &dyn Field,
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    alpha: f64,
    beta: f64,
    cfg: &StochIntConfig,
) -> Result<DVector<f64>> {
    score(&FieldModel::StationaryOu { alpha, beta, sigma: 1.0 }, z, domain, regs, cfg)
}

pub fn score_zero_start_ou(
    z: &dyn Field,
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    alpha: f64,
    beta: f64,
    cfg: &StochIntConfig,
) -> Result<DVector<f64>> {
    score(&FieldModel::ZeroStartOu { alpha, beta, sigma: 1.0 }, z, domain, regs, cfg)
}

/// Fisher matrix, score and estimate in one call.
pub fn estimate(
    model: &FieldModel,
    z: &dyn Field,
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    cfg: &StochIntConfig,
) -> Result<EstimationResult> {
    let (a, mut flags) = fisher_with_flags(model, domain, regs, &cfg.quad)?;
    strict_flags(&flags, a.amax())?;
    let (zeta, zflags) = score_with_flags(model, z, domain, regs, cfg)?;
    strict_score_flags(&zflags, zeta.amax(), cfg)?;
    flags.merge(zflags);
    let mut out = mle(&a, &zeta, model)?;
    out.diagnostics = flags;
    Ok(out)
}

/// An observed field seen in warped coordinates:
/// `Y(u,v) = 2√(αβ(u+k)(v+k))/σ · Z(back_s(u), back_t(v))`.
pub struct TransformedField<'a> {
    inner: &'a dyn Field,
    warp: ExpWarp,
}

impl<'a> TransformedField<'a> {
    pub fn new(inner: &'a dyn Field, warp: ExpWarp) -> Self {
        Self { inner, warp }
    }
}

impl Field for TransformedField<'_> {
    fn jet(&self, u: f64, v: f64) -> Result<Jet> {
        if !self.warp.admissible(u, v) {
            return Err(Error::NonPositiveCoordinate { u, v });
        }
        let h = self.inner.jet(self.warp.back_s(u), self.warp.back_t(v))?;
        Ok(self.warp.lift(h, u, v))
    }

    fn value_near(&self, u: f64, v: f64) -> Result<f64> {
        if !self.warp.admissible(u, v) {
            return Err(Error::NonPositiveCoordinate { u, v });
        }
        let z = self.inner.value_near(self.warp.back_s(u), self.warp.back_t(v))?;
        Ok(self.warp.lift(Jet::new(z, 0.0, 0.0, 0.0), u, v).v)
    }
}

struct Warped {
    warp: ExpWarp,
    domain: ValidatedDomain,
    regs: RegressorSet,
}

fn warped(model: &FieldModel, domain: &ValidatedDomain, regs: &RegressorSet) -> Result<Warped> {
    model.validate()?;
    let warp = model
        .warp()
        .ok_or(Error::WrongModelVariant { expected: "an Ornstein-Uhlenbeck model", found: model.name() })?;
    Ok(Warped {
        warp,
        domain: domain.transform(warp.alpha, warp.beta, warp.mode, DEFAULT_GRID_POINTS)?,
        regs: regs.transformed(warp.alpha, warp.beta, warp.sigma, warp.mode)?,
    })
}

/// Ornstein–Uhlenbeck Fisher matrix computed as `σ²/(αβ)` times the Wiener
/// Fisher matrix of the warped regressors on the warped domain.
pub fn fisher_via_transform(
    model: &FieldModel,
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    quad: &QuadConfig,
) -> Result<DMatrix<f64>> {
    let w = warped(model, domain, regs)?;
    Ok(fisher_wiener(&w.domain, &w.regs, quad)? * model.scale())
}

/// Ornstein–Uhlenbeck score computed as `σ²/(αβ)` times the Wiener score of
/// the warped field.
pub fn score_via_transform(
    model: &FieldModel,
    z: &dyn Field,
    domain: &ValidatedDomain,
    regs: &RegressorSet,
    cfg: &StochIntConfig,
) -> Result<DVector<f64>> {
    let w = warped(model, domain, regs)?;
    let y = TransformedField::new(z, w.warp);
    Ok(score_wiener(&y, &w.domain, &w.regs, cfg)? * model.scale())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circle_domain;
    use crate::random_fields::{draw_kl, FieldSample};
    use crate::regressors::polynomial_example_basis;

    fn disc(cx: f64, cy: f64, r: f64) -> ValidatedDomain {
        circle_domain(cx, cy, r).unwrap().validate(DEFAULT_GRID_POINTS).unwrap()
    }

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax() / b.amax()
    }

    const M: [f64; 3] = [5.0, 8.0, 3.0];

    fn models() -> [FieldModel; 3] {
        [
            FieldModel::Wiener,
            FieldModel::StationaryOu { alpha: 1.0, beta: 1.0, sigma: 1.0 },
            FieldModel::ZeroStartOu { alpha: 1.0, beta: 1.0, sigma: 1.0 },
        ]
    }

    #[test]
    fn constant_regressor() {
        // g ≡ 1 leaves the corner and the 1/(s²γ₁,₂(s)) line term
        let d = disc(6.0, 6.0, 2.0);
        let regs = RegressorSet::from_exprs(&["1"]).unwrap();
        let a = fisher_wiener(&d, &regs, &QuadConfig::default()).unwrap();
        let (b1, corner) = d.lower_corner();
        // composite Gauss–Legendre, 3 nodes per panel, in the variable
        // θ of s = 6 − 2cos θ, where the integrand is smooth
        let nodes = [(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)];
        let panels = 2000;
        let h = std::f64::consts::FRAC_PI_2 / panels as f64;
        let mut line = 0.0;
        for i in 0..panels {
            for (x, w) in nodes {
                let th = (i as f64 + 0.5 + 0.5 * x) * h;
                let s = 6.0 - 2.0 * th.cos();
                let t = 6.0 - 2.0 * th.sin();
                line += 0.5 * h * w * 2.0 * th.sin() / (s * s * t);
            }
        }
        let want = 1.0 / (b1 * corner) + line;
        assert!((a[(0, 0)] - want).abs() < 1e-8 * want, "{} vs {want}", a[(0, 0)]);
    }

    #[test]
    fn wiener_example_entries() {
        let d = disc(6.0, 6.0, 2.0);
        let a = fisher_wiener(&d, &polynomial_example_basis(), &QuadConfig::default()).unwrap();
        assert_eq!(a, a.transpose());
        for (i, j, v) in [(0, 0, 339.0895), (0, 1, 38.6688), (0, 2, 128.0), (1, 1, 5.9115), (1, 2, 16.0)] {
            assert!((a[(i, j)] - v).abs() < 5e-4, "A[{i}{j}] = {}", a[(i, j)]);
        }
    }

    #[test]
    fn score_of_drift_is_a_times_m() {
        let d = disc(2.0, 2.0, 1.0);
        let regs = polynomial_example_basis();
        for model in models() {
            let a = fisher(&model, &d, &regs, &QuadConfig::default()).unwrap();
            let z = FieldSample::drift_only(model, 4.0, 4.0, regs.clone(), M.to_vec()).unwrap();
            let zeta = score(&model, &z, &d, &regs, &StochIntConfig::default()).unwrap();
            let am = &a * DVector::from_column_slice(&M);
            assert!((&zeta - &am).amax() < 1e-7 * am.amax(), "{}: {zeta} vs {am}", model.name());
        }
    }

    #[test]
    fn zero_field_has_zero_score() {
        let d = disc(2.0, 2.0, 1.0);
        let regs = polynomial_example_basis();
        let z = FieldSample::drift_only(FieldModel::Wiener, 4.0, 4.0, regs.clone(), vec![0.0; 3]).unwrap();
        for model in models() {
            let zeta = score(&model, &z, &d, &regs, &StochIntConfig::default()).unwrap();
            assert_eq!(zeta.amax(), 0.0);
        }
    }

    #[test]
    fn transform_route_agrees() {
        let d = disc(2.0, 2.0, 1.0);
        let regs = polynomial_example_basis();
        let cfg = StochIntConfig::default();
        for model in &models()[1..] {
            let direct = fisher(model, &d, &regs, &cfg.quad).unwrap();
            let via = fisher_via_transform(model, &d, &regs, &cfg.quad).unwrap();
            assert!(rel(&via, &direct) < 1e-6, "{}: {direct} vs {via}", model.name());

            let kl = draw_kl(12, 4.0, 4.0, 3).unwrap();
            let z = FieldSample::new(*model, kl).unwrap().with_drift(regs.clone(), M.to_vec()).unwrap();
            let zd = score(model, &z, &d, &regs, &cfg).unwrap();
            let zt = score_via_transform(model, &z, &d, &regs, &cfg).unwrap();
            assert!((&zd - &zt).amax() < 1e-6 * zd.amax(), "{}: {zd} vs {zt}", model.name());
        }
    }

    #[test]
    fn transform_rejects_wiener() {
        let d = disc(2.0, 2.0, 1.0);
        let err = fisher_via_transform(&FieldModel::Wiener, &d, &polynomial_example_basis(), &QuadConfig::default());
        assert!(matches!(err, Err(Error::WrongModelVariant { .. })));
    }

    #[test]
    fn zero_start_approaches_stationary_for_fast_rates() {
        let d = disc(2.0, 2.0, 1.0);
        let regs = polynomial_example_basis();
        let q = QuadConfig::default();
        let zs = fisher_zero_start_ou(&d, &regs, 20.0, 20.0, &q).unwrap();
        let st = fisher_stationary_ou(&d, &regs, 20.0, 20.0, &q).unwrap();
        assert!(rel(&zs, &st) < 1e-3);
    }

    #[test]
    fn sigma_does_not_enter_direct_fisher() {
        let d = disc(2.0, 2.0, 1.0);
        let regs = polynomial_example_basis();
        let q = QuadConfig::default();
        let a = fisher(&FieldModel::StationaryOu { alpha: 0.5, beta: 2.0, sigma: 1.0 }, &d, &regs, &q).unwrap();
        let b = fisher(&FieldModel::StationaryOu { alpha: 0.5, beta: 2.0, sigma: 3.0 }, &d, &regs, &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_recovers_drift() {
        let d = disc(6.0, 6.0, 2.0);
        let regs = polynomial_example_basis();
        let z = FieldSample::drift_only(FieldModel::Wiener, 8.0, 8.0, regs.clone(), M.to_vec()).unwrap();
        let mut cfg = StochIntConfig::default();
        cfg.quad.rel_tol = 1e-10;
        cfg.quad.abs_tol = 1e-10;
        let r = estimate(&FieldModel::Wiener, &z, &d, &regs, &cfg).unwrap();
        for (got, want) in r.m_hat.iter().zip(M) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(r.diagnostics.is_clean());
    }

    #[test]
    fn field_outside_rectangle_is_reported() {
        let d = disc(6.0, 6.0, 2.0);
        let regs = polynomial_example_basis();
        let z = FieldSample::drift_only(FieldModel::Wiener, 5.0, 5.0, regs.clone(), M.to_vec()).unwrap();
        let err = score_wiener(&z, &d, &regs, &StochIntConfig::default());
        assert!(matches!(err, Err(Error::OutOfRectangle { .. })), "{err:?}");
    }
}
