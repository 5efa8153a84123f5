//! Driving sheets, observed fields and their pointwise evaluation.

mod grid;
mod kl;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use grid::GridField;
pub use kl::{draw_kl, omega_entry, AxisModes, KlSample, ModeSystem};

use crate::error::{Error, Result};
use crate::jet::{ExpWarp, Jet, TransformMode};
use crate::regressors::RegressorSet;

/// Which Gaussian sheet drives the observed field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldModel {
    Wiener,
    StationaryOu { alpha: f64, beta: f64, sigma: f64 },
    ZeroStartOu { alpha: f64, beta: f64, sigma: f64 },
}

impl FieldModel {
    pub fn name(&self) -> &'static str {
        match self {
            FieldModel::Wiener => "wiener",
            FieldModel::StationaryOu { .. } => "stationary_ou",
            FieldModel::ZeroStartOu { .. } => "zero_start_ou",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FieldModel::Wiener => Ok(()),
            FieldModel::StationaryOu { alpha, beta, sigma }
            | FieldModel::ZeroStartOu { alpha, beta, sigma } => {
                if alpha > 0.0 && beta > 0.0 && sigma > 0.0 && (alpha * beta * sigma).is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "{} requires alpha, beta, sigma > 0 (got {alpha}, {beta}, {sigma})",
                        self.name()
                    )))
                }
            }
        }
    }

    /// `(α, β, σ)` for the Ornstein–Uhlenbeck variants.
    pub fn rates(&self) -> Option<(f64, f64, f64)> {
        match *self {
            FieldModel::Wiener => None,
            FieldModel::StationaryOu { alpha, beta, sigma }
            | FieldModel::ZeroStartOu { alpha, beta, sigma } => Some((alpha, beta, sigma)),
        }
    }

    /// The coordinate change taking this model to a Wiener one.
    pub fn warp(&self) -> Option<ExpWarp> {
        match *self {
            FieldModel::Wiener => None,
            FieldModel::StationaryOu { alpha, beta, sigma } => Some(ExpWarp {
                alpha,
                beta,
                sigma,
                mode: TransformMode::Stationary,
            }),
            FieldModel::ZeroStartOu { alpha, beta, sigma } => Some(ExpWarp {
                alpha,
                beta,
                sigma,
                mode: TransformMode::ZeroStart,
            }),
        }
    }

    /// Factor `σ²/(αβ)` relating this model's Fisher matrix to the Wiener
    /// one on the transformed domain (1 for Wiener).
    pub fn scale(&self) -> f64 {
        match self.rates() {
            None => 1.0,
            Some((a, b, s)) => s * s / (a * b),
        }
    }
}

/// Something that can be observed at points of the plane, with partials.
pub trait Field: Send + Sync {
    /// `(Z, ∂₁Z, ∂₂Z, ∂₁∂₂Z)` at `(s, t)`.
    fn jet(&self, s: f64, t: f64) -> Result<Jet>;

    /// Value for difference quotients, which may step just past the region
    /// where `jet` is defined.
    fn value_near(&self, s: f64, t: f64) -> Result<f64> {
        Ok(self.jet(s, t)?.v)
    }

    /// Evaluator for a fixed abscissa, letting implementations reuse work
    /// across many ordinates.
    fn column(&self, s: f64) -> Result<Box<dyn Column + '_>> {
        Ok(Box::new(PointwiseColumn { field: self, s }))
    }
}

/// The restriction of a [`Field`] to one vertical line.
pub trait Column {
    fn jet(&self, t: f64) -> Result<Jet>;
}

struct PointwiseColumn<'a, F: ?Sized> {
    field: &'a F,
    s: f64,
}

impl<F: Field + ?Sized> Column for PointwiseColumn<'_, F> {
    fn jet(&self, t: f64) -> Result<Jet> {
        self.field.jet(self.s, t)
    }
}

#[derive(Debug, Clone)]
struct Drift {
    regressors: RegressorSet,
    m: Vec<f64>,
}

/// An observed sheet `Z = Σ m_k g_k + λ·U`, with `U` a truncated KL sum.
#[derive(Debug, Clone)]
pub struct FieldSample {
    model: FieldModel,
    kl: Option<KlSample>,
    modes: ModeSystem,
    s_max: f64,
    t_max: f64,
    drift: Option<Drift>,
    noise_scale: f64,
}

/// Relative slack for points that land on the rectangle edge after round-off.
const EDGE_SLACK: f64 = 1e-12;
/// How far difference quotients may reach past the rectangle.
const NEAR_SLACK: f64 = 1e-2;

impl FieldSample {
    pub fn new(model: FieldModel, kl: KlSample) -> Result<Self> {
        model.validate()?;
        let modes = ModeSystem::new(&model, kl.s_max, kl.t_max);
        Ok(Self {
            model,
            s_max: kl.s_max,
            t_max: kl.t_max,
            kl: Some(kl),
            modes,
            drift: None,
            noise_scale: 1.0,
        })
    }

    /// A noise-free field `Σ m_k g_k` on `[0,S]×[0,T]`.
    pub fn drift_only(
        model: FieldModel,
        s_max: f64,
        t_max: f64,
        regressors: RegressorSet,
        m: Vec<f64>,
    ) -> Result<Self> {
        model.validate()?;
        if !(s_max > 0.0 && t_max > 0.0) {
            return Err(Error::InvalidArgument("simulation rectangle must be positive".into()));
        }
        Self {
            model,
            kl: None,
            modes: ModeSystem::new(&model, s_max, t_max),
            s_max,
            t_max,
            drift: None,
            noise_scale: 0.0,
        }
        .with_drift(regressors, m)
    }

    pub fn with_drift(mut self, regressors: RegressorSet, m: Vec<f64>) -> Result<Self> {
        if regressors.p() != m.len() {
            return Err(Error::InvalidArgument(format!(
                "{} regressors but {} coefficients",
                regressors.p(),
                m.len()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        self.drift = Some(Drift { regressors, m });
        Ok(self)
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        self.noise_scale = scale;
        self
    }

    pub fn model(&self) -> &FieldModel {
        &self.model
    }

    pub fn kl(&self) -> Option<&KlSample> {
        self.kl.as_ref()
    }

    pub fn rectangle(&self) -> (f64, f64) {
        (self.s_max, self.t_max)
    }

    fn check(&self, s: f64, t: f64, slack: f64) -> Result<()> {
        let es = slack * self.s_max;
        let et = slack * self.t_max;
        if s >= -es && s <= self.s_max + es && t >= -et && t <= self.t_max + et {
            Ok(())
        } else {
            Err(Error::OutOfRectangle {
                s,
                t,
                s_max: self.s_max,
                t_max: self.t_max,
            })
        }
    }

    fn has_noise(&self) -> bool {
        self.kl.is_some() && self.noise_scale != 0.0
    }

    /// Jet of the noise part only, without range checks.
    pub fn noise_jet(&self, s: f64, t: f64) -> Jet {
        let Some(kl) = self.kl.as_ref() else {
            return Jet::ZERO;
        };
        let n = kl.n;
        let (mut a, mut da, mut b, mut db) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.modes.s_modes.eval(s, &mut a, &mut da);
        self.modes.t_modes.eval(t, &mut b, &mut db);
        let mut out = Jet::ZERO;
        for j in 0..n {
            let row = &kl.omega[j * n..(j + 1) * n];
            let (mut u, mut du) = (0.0, 0.0);
            for k in 0..n {
                u += row[k] * a[k];
                du += row[k] * da[k];
            }
            out.v += b[j] * u;
            out.d1 += b[j] * du;
            out.d2 += db[j] * u;
            out.d12 += db[j] * du;
        }
        out * (self.modes.prefactor * self.noise_scale)
    }

    fn drift_jet(&self, s: f64, t: f64) -> Jet {
        match &self.drift {
            Some(d) => d.regressors.combine(&d.m, s, t),
            None => Jet::ZERO,
        }
    }

    fn raw_jet(&self, s: f64, t: f64) -> Jet {
        let mut j = self.drift_jet(s, t);
        if self.has_noise() {
            j = j + self.noise_jet(s, t);
        }
        j
    }
}

impl Field for FieldSample {
    fn jet(&self, s: f64, t: f64) -> Result<Jet> {
        self.check(s, t, EDGE_SLACK)?;
        Ok(self.raw_jet(s, t))
    }

    fn value_near(&self, s: f64, t: f64) -> Result<f64> {
        // the truncated series is entire, so a short step outside is harmless
        self.check(s, t, NEAR_SLACK)?;
        Ok(self.raw_jet(s, t).v)
    }

    fn column(&self, s: f64) -> Result<Box<dyn Column + '_>> {
        self.check(s, 0.0, EDGE_SLACK)?;
        let mut u = Vec::new();
        let mut du = Vec::new();
        if self.has_noise() {
            let kl = self.kl.as_ref().expect("noise implies coefficients");
            let n = kl.n;
            let (mut a, mut da) = (vec![0.0; n], vec![0.0; n]);
            self.modes.s_modes.eval(s, &mut a, &mut da);
            let scale = self.modes.prefactor * self.noise_scale;
            u = (0..n)
                .map(|j| scale * kl.omega[j * n..(j + 1) * n].iter().zip(&a).map(|(w, x)| w * x).sum::<f64>())
                .collect();
            du = (0..n)
                .map(|j| scale * kl.omega[j * n..(j + 1) * n].iter().zip(&da).map(|(w, x)| w * x).sum::<f64>())
                .collect();
        }
        Ok(Box::new(KlColumn { sample: self, s, u, du }))
    }
}

struct KlColumn<'a> {
    sample: &'a FieldSample,
    s: f64,
    u: Vec<f64>,
    du: Vec<f64>,
}

impl Column for KlColumn<'_> {
    fn jet(&self, t: f64) -> Result<Jet> {
        self.sample.check(self.s, t, EDGE_SLACK)?;
        let mut out = self.sample.drift_jet(self.s, t);
        let n = self.u.len();
        if n > 0 {
            let (mut b, mut db) = (vec![0.0; n], vec![0.0; n]);
            self.sample.modes.t_modes.eval(t, &mut b, &mut db);
            for j in 0..n {
                out.v += b[j] * self.u[j];
                out.d1 += b[j] * self.du[j];
                out.d2 += db[j] * self.u[j];
                out.d12 += db[j] * self.du[j];
            }
        }
        Ok(out)
    }
}

fn check_rect(kl: &KlSample, s: f64, t: f64) -> Result<()> {
    let (es, et) = (EDGE_SLACK * kl.s_max, EDGE_SLACK * kl.t_max);
    if s >= -es && s <= kl.s_max + es && t >= -et && t <= kl.t_max + et {
        Ok(())
    } else {
        Err(Error::OutOfRectangle {
            s,
            t,
            s_max: kl.s_max,
            t_max: kl.t_max,
        })
    }
}

fn eval_series(kl: &KlSample, model: &FieldModel, s: f64, t: f64) -> Result<f64> {
    check_rect(kl, s, t)?;
    Ok(FieldSample::new(*model, kl.clone())?.noise_jet(s, t).v)
}

/// Truncated Wiener sheet at `(s, t)`.
pub fn eval_wiener(kl: &KlSample, s: f64, t: f64) -> Result<f64> {
    eval_series(kl, &FieldModel::Wiener, s, t)
}

/// Truncated stationary Ornstein–Uhlenbeck sheet at `(s, t)`.
pub fn eval_stationary_ou(kl: &KlSample, model: &FieldModel, s: f64, t: f64) -> Result<f64> {
    if !matches!(model, FieldModel::StationaryOu { .. }) {
        return Err(Error::WrongModelVariant {
            expected: "stationary_ou",
            found: model.name(),
        });
    }
    eval_series(kl, model, s, t)
}

/// Truncated zero-start Ornstein–Uhlenbeck sheet at `(s, t)`.
pub fn eval_zero_start_ou(kl: &KlSample, model: &FieldModel, s: f64, t: f64) -> Result<f64> {
    if !matches!(model, FieldModel::ZeroStartOu { .. }) {
        return Err(Error::WrongModelVariant {
            expected: "zero_start_ou",
            found: model.name(),
        });
    }
    eval_series(kl, model, s, t)
}

pub fn eval_field(sample: &FieldSample, s: f64, t: f64) -> Result<f64> {
    Ok(sample.jet(s, t)?.v)
}

pub fn eval_d1(sample: &FieldSample, s: f64, t: f64) -> Result<f64> {
    Ok(sample.jet(s, t)?.d1)
}

pub fn eval_d2(sample: &FieldSample, s: f64, t: f64) -> Result<f64> {
    Ok(sample.jet(s, t)?.d2)
}

pub fn eval_d12(sample: &FieldSample, s: f64, t: f64) -> Result<f64> {
    Ok(sample.jet(s, t)?.d12)
}

/// Writes `s,t,z` rows of a field sampled on a regular `ns × nt` grid over
/// `[s0,s1]×[t0,t1]`, `s` varying slowest.
pub fn dump_grid_csv(
    field: &dyn Field,
    (s0, s1): (f64, f64),
    (t0, t1): (f64, f64),
    ns: usize,
    nt: usize,
    out: impl Write,
) -> Result<()> {
    if ns < 2 || nt < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points per axis".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "t", "z"])?;
    for i in 0..ns {
        let s = s0 + (s1 - s0) * i as f64 / (ns - 1) as f64;
        for j in 0..nt {
            let t = t0 + (t1 - t0) * j as f64 / (nt - 1) as f64;
            let z = field.jet(s, t)?.v;
            w.write_record([s.to_string(), t.to_string(), z.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
