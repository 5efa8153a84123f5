use std::cell::Cell;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::ValidatedDomain;
use crate::jet::Jet;
use crate::quadrature::{adaptive_simpson, integrate_clustered, QuadConfig, QuadFlags, QuadValue};
use crate::random_fields::{FieldModel, KlSample, ModeSystem};
use crate::regressors::RegressorSet;

use super::forms::{score_terms, Form, Place};
use super::integrate_place;

/// Scores of the individual KL modes `C·b_j(t)·a_k(s)`.
///
/// The score is linear in the observed field, so the score of a simulated
/// field is the score of its drift plus `λ·Σ ω_jk B_jk`. Modes do not depend
/// on the truncation order, so one basis built for `n` serves every
/// truncation up to `n`.
#[derive(Debug, Clone)]
pub struct KlScoreBasis {
    p: usize,
    n: usize,
    s_max: f64,
    t_max: f64,
    /// Indexed `(r·n + j)·n + k`.
    b: Vec<f64>,
    flags: QuadFlags,
}

/// Coefficients `c` with `form(s, t, h, z) = c·z`.
fn coefficients(form: &Form, s: f64, t: f64, h: &Jet) -> Jet {
    Jet::new(
        form(s, t, h, &Jet::new(1.0, 0.0, 0.0, 0.0)),
        form(s, t, h, &Jet::new(0.0, 1.0, 0.0, 0.0)),
        form(s, t, h, &Jet::new(0.0, 0.0, 1.0, 0.0)),
        form(s, t, h, &Jet::new(0.0, 0.0, 0.0, 1.0)),
    )
}

struct Modes {
    sys: ModeSystem,
    n: usize,
}

impl Modes {
    fn s(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut a, mut da) = (vec![0.0; self.n], vec![0.0; self.n]);
        self.sys.s_modes.eval(s, &mut a, &mut da);
        (a, da)
    }

    fn t(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut b, mut db) = (vec![0.0; self.n], vec![0.0; self.n]);
        self.sys.t_modes.eval(t, &mut b, &mut db);
        (b, db)
    }

    /// `[u_rj ; w_rj]` with `u = c.v b + c.d2 b′`, `w = c.d1 b + c.d12 b′`:
    /// the mode score at `(s,t)` is then `C(u_rj a_k + w_rj a′_k)`.
    fn t_part(&self, form: &Form, regs: &RegressorSet, s: f64, t: f64) -> Vec<f64> {
        let p = regs.p();
        let n = self.n;
        let mut h = vec![Jet::ZERO; p];
        regs.jets_into(s, t, &mut h);
        let (b, db) = self.t(t);
        let mut out = vec![0.0; 2 * p * n];
        for (r, hr) in h.iter().enumerate() {
            let c = coefficients(form, s, t, hr);
            for j in 0..n {
                out[r * n + j] = c.v * b[j] + c.d2 * db[j];
                out[(p + r) * n + j] = c.d1 * b[j] + c.d12 * db[j];
            }
        }
        out
    }

    fn expand(&self, uw: &[f64], p: usize, s: f64) -> Vec<f64> {
        let n = self.n;
        let (a, da) = self.s(s);
        let c = self.sys.prefactor;
        let mut out = vec![0.0; p * n * n];
        for r in 0..p {
            for j in 0..n {
                let u = c * uw[r * n + j];
                let w = c * uw[(p + r) * n + j];
                let row = &mut out[(r * n + j) * n..(r * n + j + 1) * n];
                for k in 0..n {
                    row[k] = u * a[k] + w * da[k];
                }
            }
        }
        out
    }
}

impl KlScoreBasis {
    /// Builds the basis for truncation orders up to `n` on `[0,S]×[0,T]`.
    pub fn new(
        model: &FieldModel,
        domain: &ValidatedDomain,
        regs: &RegressorSet,
        s_max: f64,
        t_max: f64,
        n: usize,
        quad: &QuadConfig,
    ) -> Result<Self> {
        model.validate()?;
        quad.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument("truncation order must be at least 1".into()));
        }
        let (s0, s1, t0, t1) = domain.bounding_box();
        for (s, t) in [(s0, t0), (s1, t1)] {
            if s > s_max || t > t_max {
                return Err(Error::OutOfRectangle { s, t, s_max, t_max });
            }
        }
        let p = regs.p();
        let modes = Modes {
            sys: ModeSystem::new(model, s_max, t_max),
            n,
        };
        // enough starting panels to resolve the fastest mode
        let quad = QuadConfig {
            initial_panels: quad.initial_panels.max(n),
            ..*quad
        };
        let mut flags = QuadFlags::default();
        let mut b = vec![0.0; p * n * n];
        for term in score_terms(model, domain) {
            let form = &term.form;
            let modes = &modes;
            let value = match term.place {
                Place::Area => {
                    let (v, f) = area(modes, form, regs, domain, &quad);
                    flags.merge(f);
                    v
                }
                place => {
                    let q = integrate_place(
                        place,
                        domain,
                        |s| move |t| modes.expand(&modes.t_part(form, regs, s, t), p, s),
                        &quad,
                    );
                    flags.absorb(&q);
                    q.value
                }
            };
            b.add_assign(&value);
        }
        if flags.non_finite {
            return Err(Error::QuadratureFailure("mode scores are not finite".into()));
        }
        Ok(Self { p, n, s_max, t_max, b, flags })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn flags(&self) -> QuadFlags {
        self.flags
    }

    /// Score of the unit mode `C·b_j(t)·a_k(s)` against regressor `r`.
    pub fn entry(&self, r: usize, j: usize, k: usize) -> f64 {
        self.b[(r * self.n + j) * self.n + k]
    }

    /// `Σ_jk ω_jk B_jk`, the score of the noise of `kl` at unit scale.
    pub fn noise_score(&self, kl: &KlSample) -> Result<DVector<f64>> {
        if kl.n > self.n {
            return Err(Error::InvalidArgument(format!(
                "sample has order {} but the basis only {}",
                kl.n, self.n
            )));
        }
        if kl.s_max != self.s_max || kl.t_max != self.t_max {
            return Err(Error::InvalidArgument("sample and basis use different rectangles".into()));
        }
        let m = kl.n;
        Ok(DVector::from_fn(self.p, |r, _| {
            let mut acc = 0.0;
            for j in 0..m {
                for k in 0..m {
                    acc += kl.omega(j, k) * self.entry(r, j, k);
                }
            }
            acc
        }))
    }
}

/// The area term, integrated in `t` at `2pn` components and only then
/// expanded to `p·n²` for the outer integral over `s`.
fn area(
    modes: &Modes,
    form: &Form,
    regs: &RegressorSet,
    domain: &ValidatedDomain,
    quad: &QuadConfig,
) -> (Vec<f64>, QuadFlags) {
    let p = regs.p();
    let cuts = domain.s_breakpoints();
    let mut total = vec![0.0; p * modes.n * modes.n];
    let mut flags = QuadFlags::default();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let inner_cfg = quad.inner(hi - lo);
        let depth = Cell::new(false);
        let bad = Cell::new(false);
        let evals = Cell::new(0usize);
        let q = integrate_clustered(
            |s| {
                let qi = adaptive_simpson(
                    |t| modes.t_part(form, regs, s, t),
                    domain.lower(s),
                    domain.upper(s),
                    &inner_cfg,
                );
                depth.set(depth.get() | qi.depth_exceeded);
                bad.set(bad.get() | qi.non_finite);
                evals.set(evals.get() + qi.evals);
                modes.expand(&qi.value, p, s)
            },
            lo,
            hi,
            quad,
        );
        flags.absorb(&q);
        flags.depth_exceeded |= depth.get();
        flags.non_finite |= bad.get();
        flags.evals += evals.get();
        total.add_assign(&q.value);
    }
    (total, flags)
}
