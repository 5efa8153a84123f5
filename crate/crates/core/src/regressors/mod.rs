//! Known regression functions `g₁..g_p` together with their first and
//! mixed partial derivatives.

mod expr;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use expr::{Expr, Var};

use crate::error::{Error, Result};
use crate::jet::{ExpWarp, Jet, TransformMode};

/// A twice continuously differentiable function of `(s, t)`.
pub trait Regressor: Send + Sync + fmt::Debug {
    /// `(h, ∂₁h, ∂₂h, ∂₁∂₂h)` at `(s, t)`.
    fn jet(&self, s: f64, t: f64) -> Jet;
}

/// Regressor given by an expression; partials are derived symbolically.
#[derive(Debug, Clone)]
pub struct ExprRegressor {
    source: String,
    f: Expr,
    d1: Expr,
    d2: Expr,
    d12: Expr,
}

impl ExprRegressor {
    pub fn parse(source: &str) -> Result<Self> {
        let f = Expr::parse(source)?;
        let d1 = f.derivative(Var::S);
        let d2 = f.derivative(Var::T);
        let d12 = d1.derivative(Var::T);
        Ok(Self {
            source: source.to_string(),
            f,
            d1,
            d2,
            d12,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl Regressor for ExprRegressor {
    fn jet(&self, s: f64, t: f64) -> Jet {
        Jet::new(
            self.f.eval(s, t),
            self.d1.eval(s, t),
            self.d2.eval(s, t),
            self.d12.eval(s, t),
        )
    }
}

type Scalar2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Regressor from closures for the value and each partial.
#[derive(Clone)]
pub struct FnRegressor {
    pub value: Scalar2,
    pub d1: Scalar2,
    pub d2: Scalar2,
    pub d12: Scalar2,
}

impl fmt::Debug for FnRegressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnRegressor")
    }
}

impl Regressor for FnRegressor {
    fn jet(&self, s: f64, t: f64) -> Jet {
        Jet::new(
            (self.value)(s, t),
            (self.d1)(s, t),
            (self.d2)(s, t),
            (self.d12)(s, t),
        )
    }
}

/// Wraps a value-only function; partials come from central differences.
#[derive(Clone)]
pub struct FiniteDifferenceRegressor {
    f: Scalar2,
    h: f64,
}

impl FiniteDifferenceRegressor {
    pub const DEFAULT_STEP: f64 = 1e-5;

    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::with_step(f, Self::DEFAULT_STEP)
    }

    pub fn with_step(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, h: f64) -> Self {
        Self { f: Arc::new(f), h }
    }
}

impl fmt::Debug for FiniteDifferenceRegressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteDifferenceRegressor(h = {})", self.h)
    }
}

impl Regressor for FiniteDifferenceRegressor {
    fn jet(&self, s: f64, t: f64) -> Jet {
        let (f, h) = (&self.f, self.h);
        let d1 = (f(s + h, t) - f(s - h, t)) / (2.0 * h);
        let d2 = (f(s, t + h) - f(s, t - h)) / (2.0 * h);
        let d12 = (f(s + h, t + h) - f(s + h, t - h) - f(s - h, t + h) + f(s - h, t - h)) / (4.0 * h * h);
        Jet::new(f(s, t), d1, d2, d12)
    }
}

/// `g(u, v) = 2√(αβ(u+k)(v+k))/σ · h(back(u), back(v))`, with `k = 0`
/// (stationary) or `k = 1` (zero-start).
#[derive(Debug, Clone)]
pub struct TransformedRegressor {
    inner: Arc<dyn Regressor>,
    warp: ExpWarp,
}

impl Regressor for TransformedRegressor {
    fn jet(&self, u: f64, v: f64) -> Jet {
        if !self.warp.admissible(u, v) {
            return Jet::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);
        }
        let h = self.inner.jet(self.warp.back_s(u), self.warp.back_t(v));
        self.warp.lift(h, u, v)
    }
}

/// JSON form of one regressor: `{"expr": "s^2+t^2"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub expr: String,
}

/// An ordered set of regressors.
#[derive(Debug, Clone)]
pub struct RegressorSet {
    items: Vec<Arc<dyn Regressor>>,
    labels: Vec<String>,
    warp: Option<ExpWarp>,
}

impl RegressorSet {
    pub fn new(items: Vec<Arc<dyn Regressor>>) -> Self {
        let labels = (1..=items.len()).map(|k| format!("g{k}")).collect();
        Self {
            items,
            labels,
            warp: None,
        }
    }

    pub fn from_specs(specs: &[RegressorSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidArgument("at least one regressor is required".into()));
        }
        let mut items: Vec<Arc<dyn Regressor>> = Vec::with_capacity(specs.len());
        let mut labels = Vec::with_capacity(specs.len());
        for spec in specs {
            items.push(Arc::new(ExprRegressor::parse(&spec.expr)?));
            labels.push(spec.expr.clone());
        }
        Ok(Self {
            items,
            labels,
            warp: None,
        })
    }

    pub fn from_exprs(exprs: &[&str]) -> Result<Self> {
        let specs: Vec<RegressorSpec> = exprs
            .iter()
            .map(|e| RegressorSpec { expr: e.to_string() })
            .collect();
        Self::from_specs(&specs)
    }

    pub fn p(&self) -> usize {
        self.items.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, k: usize) -> &Arc<dyn Regressor> {
        &self.items[k]
    }

    /// Jet of regressor `k`, with the coordinate check of transformed sets.
    pub fn jet(&self, k: usize, s: f64, t: f64) -> Result<Jet> {
        self.check(s, t)?;
        Ok(self.items[k].jet(s, t))
    }

    /// Jets of all regressors at `(s, t)` written into `out` (length `p`).
    /// Transformed sets yield NaN outside their admissible half-plane.
    #[inline]
    pub fn jets_into(&self, s: f64, t: f64, out: &mut [Jet]) {
        for (o, g) in out.iter_mut().zip(&self.items) {
            *o = g.jet(s, t);
        }
    }

    pub fn jets(&self, s: f64, t: f64) -> Result<Vec<Jet>> {
        self.check(s, t)?;
        let mut out = vec![Jet::ZERO; self.p()];
        self.jets_into(s, t, &mut out);
        Ok(out)
    }

    /// `Σ m_k g_k` and its partials at `(s, t)`.
    pub fn combine(&self, m: &[f64], s: f64, t: f64) -> Jet {
        self.items
            .iter()
            .zip(m)
            .fold(Jet::ZERO, |acc, (g, &mk)| acc + g.jet(s, t) * mk)
    }

    fn check(&self, u: f64, v: f64) -> Result<()> {
        match self.warp {
            Some(w) if !w.admissible(u, v) => Err(Error::NonPositiveCoordinate { u, v }),
            _ => Ok(()),
        }
    }

    /// Regressors composed with the exponential coordinate change that maps
    /// an Ornstein–Uhlenbeck model to a Wiener one.
    pub fn transformed(&self, alpha: f64, beta: f64, sigma: f64, mode: TransformMode) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha, beta, sigma must be positive (got {alpha}, {beta}, {sigma})"
            )));
        }
        let warp = ExpWarp { alpha, beta, sigma, mode };
        let items = self
            .items
            .iter()
            .map(|h| {
                Arc::new(TransformedRegressor {
                    inner: h.clone(),
                    warp,
                }) as Arc<dyn Regressor>
            })
            .collect();
        Ok(Self {
            items,
            labels: self.labels.iter().map(|l| format!("~{l}")).collect(),
            warp: Some(warp),
        })
    }
}

/// `{s² + t², s + t, s·t}` with closed-form partials.
pub fn polynomial_example_basis() -> RegressorSet {
    let g1 = FnRegressor {
        value: Arc::new(|s, t| s * s + t * t),
        d1: Arc::new(|s, _| 2.0 * s),
        d2: Arc::new(|_, t| 2.0 * t),
        d12: Arc::new(|_, _| 0.0),
    };
    let g2 = FnRegressor {
        value: Arc::new(|s, t| s + t),
        d1: Arc::new(|_, _| 1.0),
        d2: Arc::new(|_, _| 1.0),
        d12: Arc::new(|_, _| 0.0),
    };
    let g3 = FnRegressor {
        value: Arc::new(|s, t| s * t),
        d1: Arc::new(|_, t| t),
        d2: Arc::new(|s, _| s),
        d12: Arc::new(|_, _| 1.0),
    };
    let mut set = RegressorSet::new(vec![Arc::new(g1), Arc::new(g2), Arc::new(g3)]);
    set.labels = vec!["s^2+t^2".into(), "s+t".into(), "s*t".into()];
    set
}
