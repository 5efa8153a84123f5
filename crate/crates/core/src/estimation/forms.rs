//! The Fisher matrix and score vector of each model, written as lists of
//! boundary-point, boundary-line and area terms.
//!
//! Every Fisher term is a symmetric bilinear form in the jets of two
//! regressors; every score term is bilinear in the jet of one regressor and
//! the jet of the observed field. Line terms along `t = γ(s)` are
//! integrated in `s`; line terms along `s = γ⁻¹(t)` are integrated in `t`.

use crate::error::CurveId;
use crate::geometry::ValidatedDomain;
use crate::jet::Jet;
use crate::random_fields::FieldModel;

/// `(s, t, left jet, right jet) ↦ value`.
pub(crate) type Form = Box<dyn Fn(f64, f64, &Jet, &Jet) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Place {
    Point { s: f64, t: f64 },
    /// Along `(s, γ(s))`, `s` from `lo` to `hi`.
    SLine { curve: CurveId, lo: f64, hi: f64 },
    /// Along `(γ⁻¹(t), t)`, `t` from `lo` to `hi`.
    TLine { curve: CurveId, lo: f64, hi: f64 },
    Area,
}

pub(crate) struct Term {
    pub place: Place,
    pub form: Form,
}

fn term(place: Place, form: impl Fn(f64, f64, &Jet, &Jet) -> f64 + Send + Sync + 'static) -> Term {
    Term {
        place,
        form: Box::new(form),
    }
}

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

struct Frame {
    a: f64,
    b1: f64,
    b2: f64,
    c: f64,
    g12: [f64; 2],
    g1: [f64; 2],
    g2: [f64; 2],
    g0: [f64; 2],
}

/// Curve values at the ends of each arc.
fn frame(d: &ValidatedDomain) -> Frame {
    let (a, b1, b2, c) = (d.a(), d.b1(), d.b2(), d.c());
    Frame {
        a,
        b1,
        b2,
        c,
        g12: [d.gamma12().eval(a), d.gamma12().eval(b1)],
        g1: [d.gamma1().eval(b1), d.gamma1().eval(c)],
        g2: [d.gamma2().eval(a), d.gamma2().eval(b2)],
        g0: [d.gamma0().eval(b2), d.gamma0().eval(c)],
    }
}

use CurveId::{Gamma0 as G0, Gamma1 as G1, Gamma12 as G12, Gamma2 as G2};

pub(crate) fn fisher_terms(model: &FieldModel, d: &ValidatedDomain) -> Vec<Term> {
    match *model {
        FieldModel::Wiener => wiener_fisher(d),
        FieldModel::StationaryOu { alpha, beta, .. } => stationary_fisher(d, alpha, beta),
        FieldModel::ZeroStartOu { alpha, beta, .. } => zero_start_fisher(d, alpha, beta),
    }
}

pub(crate) fn score_terms(model: &FieldModel, d: &ValidatedDomain) -> Vec<Term> {
    match *model {
        FieldModel::Wiener => wiener_score(d),
        FieldModel::StationaryOu { alpha, beta, .. } => stationary_score(d, alpha, beta),
        FieldModel::ZeroStartOu { alpha, beta, .. } => zero_start_score(d, alpha, beta),
    }
}

fn wiener_fisher(d: &ValidatedDomain) -> Vec<Term> {
    let f = frame(d);
    let corner = f.g12[1];
    let w = 1.0 / (f.b1 * corner);
    vec![
        term(Place::Point { s: f.b1, t: corner }, move |_, _, k, l| w * k.v * l.v),
        term(Place::SLine { curve: G12, lo: f.a, hi: f.b1 }, |s, t, k, l| {
            (k.v - s * k.d1) * (l.v - s * l.d1) / (s * s * t)
        }),
        term(Place::SLine { curve: G1, lo: f.b1, hi: f.c }, |_, t, k, l| k.d1 * l.d1 / t),
        term(Place::TLine { curve: G2, lo: f.g2[0], hi: f.g2[1] }, |s, _, k, l| k.d2 * l.d2 / s),
        term(Place::TLine { curve: G12, lo: f.g12[1], hi: f.g12[0] }, |s, _, k, l| k.d2 * l.d2 / s),
        term(Place::Area, |_, _, k, l| k.d12 * l.d12),
    ]
}

fn wiener_score(d: &ValidatedDomain) -> Vec<Term> {
    let f = frame(d);
    let corner = f.g12[1];
    let w = 1.0 / (f.b1 * corner);
    vec![
        term(Place::Point { s: f.b1, t: corner }, move |_, _, h, z| w * h.v * z.v),
        term(Place::SLine { curve: G1, lo: f.b1, hi: f.c }, |_, t, h, z| h.d1 / t * z.d1),
        term(Place::SLine { curve: G12, lo: f.a, hi: f.b1 }, |s, t, h, z| {
            (h.v - s * h.d1) / (s * s * t) * (z.v - s * z.d1)
        }),
        term(Place::TLine { curve: G2, lo: f.g2[0], hi: f.g2[1] }, |s, _, h, z| h.d2 / s * z.d2),
        term(Place::TLine { curve: G12, lo: f.g12[1], hi: f.g12[0] }, |s, _, h, z| h.d2 / s * z.d2),
        term(Place::Area, |_, _, h, z| h.d12 * z.d12),
    ]
}

/// `αβ hh + α⁻¹β ∂₁h∂₁h + αβ⁻¹ ∂₂h∂₂h + α⁻¹β⁻¹ ∂₁₂h∂₁₂h`, shared by both
/// Ornstein–Uhlenbeck Fisher matrices.
fn ou_area(al: f64, be: f64) -> Term {
    term(Place::Area, move |_, _, k, l| {
        al * be * k.v * l.v + be / al * k.d1 * l.d1 + al / be * k.d2 * l.d2 + k.d12 * l.d12 / (al * be)
    })
}

/// `[αβh + β∂₁h + α∂₂h + ∂₁₂h]·[Z + α⁻¹Z₁ + β⁻¹Z₂ + α⁻¹β⁻¹Z₁₂]`.
fn ou_area_score(al: f64, be: f64) -> Term {
    term(Place::Area, move |_, _, h, z| {
        (al * be * h.v + be * h.d1 + al * h.d2 + h.d12) * (z.v + z.d1 / al + z.d2 / be + z.d12 / (al * be))
    })
}

fn stationary_fisher(d: &ValidatedDomain, al: f64, be: f64) -> Vec<Term> {
    let f = frame(d);
    let point = |s, t| term(Place::Point { s, t }, |_, _, k, l| k.v * l.v);
    vec![
        point(f.a, f.g2[0]),
        point(f.c, f.g1[1]),
        point(f.b1, f.g1[0]),
        point(f.b2, f.g2[1]),
        term(Place::SLine { curve: G12, lo: f.a, hi: f.b1 }, move |_, _, k, l| {
            al * k.v * l.v + k.d1 * l.d1 / al
        }),
        term(Place::SLine { curve: G1, lo: f.b1, hi: f.c }, move |_, _, k, l| {
            (al * k.v + k.d1) * (l.v + l.d1 / al)
        }),
        term(Place::SLine { curve: G2, lo: f.a, hi: f.b2 }, move |_, _, k, l| {
            (al * k.v - k.d1) * (l.v - l.d1 / al)
        }),
        term(Place::SLine { curve: G0, lo: f.b2, hi: f.c }, move |_, _, k, l| {
            al * k.v * l.v + k.d1 * l.d1 / al
        }),
        term(Place::TLine { curve: G12, lo: f.g12[1], hi: f.g12[0] }, move |_, _, k, l| {
            (be * k.v - k.d2) * (l.v - l.d2 / be)
        }),
        term(Place::TLine { curve: G1, lo: f.g1[0], hi: f.g1[1] }, move |_, _, k, l| {
            be * k.v * l.v + k.d2 * l.d2 / be
        }),
        term(Place::TLine { curve: G2, lo: f.g2[0], hi: f.g2[1] }, move |_, _, k, l| {
            be * k.v * l.v + k.d2 * l.d2 / be
        }),
        term(Place::TLine { curve: G0, lo: f.g0[1], hi: f.g0[0] }, move |_, _, k, l| {
            (be * k.v + k.d2) * (l.v + l.d2 / be)
        }),
        ou_area(al, be),
    ]
}

fn stationary_score(d: &ValidatedDomain, al: f64, be: f64) -> Vec<Term> {
    let f = frame(d);
    // the lower corner, shared by γ₁,₂ and γ₁
    let corner = f.g12[1];
    vec![
        term(Place::Point { s: f.b1, t: corner }, |_, _, h, z| 4.0 * h.v * z.v),
        term(Place::SLine { curve: G1, lo: f.b1, hi: f.c }, move |_, _, h, z| {
            2.0 * (al * h.v + h.d1) * (z.v + z.d1 / al)
        }),
        term(Place::SLine { curve: G12, lo: f.a, hi: f.b1 }, move |_, _, h, z| {
            2.0 * (al * h.v - h.d1) * (z.v - z.d1 / al)
        }),
        term(Place::TLine { curve: G2, lo: f.g2[0], hi: f.g2[1] }, move |_, _, h, z| {
            2.0 * (be * h.v + h.d2) * (z.v + z.d2 / be)
        }),
        term(Place::TLine { curve: G12, lo: f.g12[1], hi: f.g12[0] }, move |_, _, h, z| {
            2.0 * (be * h.v + h.d2) * (z.v + z.d2 / be)
        }),
        ou_area_score(al, be),
    ]
}

fn zero_start_fisher(d: &ValidatedDomain, al: f64, be: f64) -> Vec<Term> {
    let f = frame(d);
    let point = |s, t, w: f64| term(Place::Point { s, t }, move |_, _, k, l| w * k.v * l.v);
    vec![
        point(f.a, f.g2[0], coth(al * f.a) * coth(be * f.g2[0])),
        point(f.c, f.g1[1], 1.0),
        point(f.b1, f.g1[0], coth(be * f.g1[0])),
        point(f.b2, f.g2[1], coth(al * f.b2)),
        term(Place::SLine { curve: G12, lo: f.a, hi: f.b1 }, move |_, t, k, l| {
            coth(be * t) * (al * k.v * l.v + k.d1 * l.d1 / al)
        }),
        term(Place::SLine { curve: G1, lo: f.b1, hi: f.c }, move |_, t, k, l| {
            coth(be * t) * (al * k.v + k.d1) * (l.v + l.d1 / al)
        }),
        term(Place::SLine { curve: G2, lo: f.a, hi: f.b2 }, move |s, _, k, l| {
            let cs = coth(al * s);
            (al * cs * k.v - k.d1) * (cs * l.v - l.d1 / al)
        }),
        term(Place::SLine { curve: G0, lo: f.b2, hi: f.c }, move |_, _, k, l| {
            al * k.v * l.v + k.d1 * l.d1 / al
        }),
        term(Place::TLine { curve: G12, lo: f.g12[1], hi: f.g12[0] }, move |s, t, k, l| {
            let ct = coth(be * t);
            coth(al * s) * (be * ct * k.v - k.d2) * (ct * l.v - l.d2 / be)
        }),
        term(Place::TLine { curve: G1, lo: f.g1[0], hi: f.g1[1] }, move |_, _, k, l| {
            be * k.v * l.v + k.d2 * l.d2 / be
        }),
        term(Place::TLine { curve: G2, lo: f.g2[0], hi: f.g2[1] }, move |s, _, k, l| {
            coth(al * s) * (be * k.v * l.v + k.d2 * l.d2 / be)
        }),
        term(Place::TLine { curve: G0, lo: f.g0[1], hi: f.g0[0] }, move |_, _, k, l| {
            (be * k.v + k.d2) * (l.v + l.d2 / be)
        }),
        ou_area(al, be),
    ]
}

fn zero_start_score(d: &ValidatedDomain, al: f64, be: f64) -> Vec<Term> {
    let f = frame(d);
    let corner = f.g12[1];
    let w = (1.0 + coth(al * f.b1)) * (1.0 + coth(be * corner));
    vec![
        term(Place::Point { s: f.b1, t: corner }, move |_, _, h, z| w * h.v * z.v),
        term(Place::SLine { curve: G1, lo: f.b1, hi: f.c }, move |_, t, h, z| {
            (1.0 + coth(be * t)) * (al * h.v + h.d1) * (z.v + z.d1 / al)
        }),
        term(Place::SLine { curve: G12, lo: f.a, hi: f.b1 }, move |s, t, h, z| {
            let cs = coth(al * s);
            (1.0 + coth(be * t)) * (al * cs * h.v - h.d1) * (cs * z.v - z.d1 / al)
        }),
        term(Place::TLine { curve: G2, lo: f.g2[0], hi: f.g2[1] }, move |s, _, h, z| {
            (1.0 + coth(al * s)) * (be * h.v + h.d2) * (z.v + z.d2 / be)
        }),
        term(Place::TLine { curve: G12, lo: f.g12[1], hi: f.g12[0] }, move |s, _, h, z| {
            (1.0 + coth(al * s)) * (be * h.v + h.d2) * (z.v + z.d2 / be)
        }),
        ou_area_score(al, be),
    ]
}
