use std::ops::{Add, Mul, Sub};

/// Value of a function of `(s, t)` together with `∂₁`, `∂₂` and `∂₁∂₂`.
///
/// Used both for regressors and for observed fields; the stochastic
/// integrals only ever need these four quantities.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet {
        v: 0.0,
        d1: 0.0,
        d2: 0.0,
        d12: 0.0,
    };

    pub fn new(v: f64, d1: f64, d2: f64, d12: f64) -> Self {
        Self { v, d1, d2, d12 }
    }

    /// Contracts a coefficient jet with a field jet: `c.v·z + c.d1·∂₁z + ...`.
    #[inline]
    pub fn dot(&self, other: &Jet) -> f64 {
        self.v * other.v + self.d1 * other.d1 + self.d2 * other.d2 + self.d12 * other.d12
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d1.is_finite() && self.d2.is_finite() && self.d12.is_finite()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2, self.d12 + o.d12)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2, self.d12 - o.d12)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, k: f64) -> Jet {
        Jet::new(self.v * k, self.d1 * k, self.d2 * k, self.d12 * k)
    }
}

/// Coordinate change applied when an Ornstein–Uhlenbeck problem is mapped to
/// a Wiener problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformMode {
    /// `u = e^{2αs}`, `v = e^{2βt}`.
    Stationary,
    /// `u = e^{2αs} − 1`, `v = e^{2βt} − 1`.
    ZeroStart,
}

/// Rate and scale parameters of an exponential coordinate change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpWarp {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub mode: TransformMode,
}

impl ExpWarp {
    /// Offset added to transformed coordinates before taking logs.
    fn shift(&self) -> f64 {
        match self.mode {
            TransformMode::Stationary => 0.0,
            TransformMode::ZeroStart => 1.0,
        }
    }

    pub fn forward_s(&self, s: f64) -> f64 {
        match self.mode {
            TransformMode::Stationary => (2.0 * self.alpha * s).exp(),
            TransformMode::ZeroStart => (2.0 * self.alpha * s).exp_m1(),
        }
    }

    pub fn forward_t(&self, t: f64) -> f64 {
        match self.mode {
            TransformMode::Stationary => (2.0 * self.beta * t).exp(),
            TransformMode::ZeroStart => (2.0 * self.beta * t).exp_m1(),
        }
    }

    pub fn back_s(&self, u: f64) -> f64 {
        match self.mode {
            TransformMode::Stationary => u.ln() / (2.0 * self.alpha),
            TransformMode::ZeroStart => u.ln_1p() / (2.0 * self.alpha),
        }
    }

    pub fn back_t(&self, v: f64) -> f64 {
        match self.mode {
            TransformMode::Stationary => v.ln() / (2.0 * self.beta),
            TransformMode::ZeroStart => v.ln_1p() / (2.0 * self.beta),
        }
    }

    /// True when `(u, v)` lies where the transformed function is defined.
    pub fn admissible(&self, u: f64, v: f64) -> bool {
        let k = self.shift();
        u + k > 0.0 && v + k > 0.0
    }

    /// Lifts the jet of `h` at `(back_s(u), back_t(v))` to the jet of
    /// `g(u, v) = 2√(αβ(u+k)(v+k))/σ · h(back_s(u), back_t(v))`.
    pub fn lift(&self, h: Jet, u: f64, v: f64) -> Jet {
        let (a, b, sig) = (self.alpha, self.beta, self.sigma);
        let k = self.shift();
        let (uu, vv) = (u + k, v + k);
        let root = (a * b * uu * vv).sqrt();
        let value = 2.0 * root / sig * h.v;
        let d1 = (b * vv).sqrt() / (sig * (a * uu).sqrt()) * (a * h.v + h.d1);
        let d2 = (a * uu).sqrt() / (sig * (b * vv).sqrt()) * (b * h.v + h.d2);
        let d12 = (a * b * h.v + a * h.d2 + b * h.d1 + h.d12) / (2.0 * sig * root);
        Jet::new(value, d1, d2, d12)
    }
}
