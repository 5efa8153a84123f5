//! Truncated Karhunen–Loève sums for the Wiener sheet and the two
//! Ornstein–Uhlenbeck sheets.
//!
//! All three are separable: `U(s,t) = C · Σ_j Σ_k ω_{jk} b_j(t) a_k(s)`,
//! with one set of one-dimensional mode functions per axis.

use std::f64::consts::PI;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::FieldModel;
use crate::error::{Error, Result};

/// Standard normal coefficients of a truncated expansion on `[0,S]×[0,T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSample {
    pub n: usize,
    pub s_max: f64,
    pub t_max: f64,
    /// Row-major `n×n`; entry `(j, k)` multiplies `b_j(t)·a_k(s)`.
    pub omega: Vec<f64>,
    pub seed: u64,
}

impl KlSample {
    #[inline]
    pub fn omega(&self, j: usize, k: usize) -> f64 {
        self.omega[j * self.n + k]
    }
}

fn unit_interval(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// The single draw `ω_{jk}` of a given seed, computed without generating
/// any other entry.
pub fn omega_entry(seed: u64, j: usize, k: usize) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    rng.set_word_pos(2 * k as u128);
    standard_normal().inverse_cdf(unit_interval(rng.next_u64()))
}

/// Draws an `n×n` coefficient matrix. Row `j` is stream `j` of a ChaCha20
/// generator keyed by `seed`, and entry `k` is its `k`-th 64-bit output, so
/// every entry is a pure function of `(seed, j, k)`.
pub fn draw_kl(n: usize, s_max: f64, t_max: f64, seed: u64) -> Result<KlSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("truncation order must be at least 1".into()));
    }
    if !(s_max > 0.0 && t_max > 0.0 && s_max.is_finite() && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "simulation rectangle must be positive (S = {s_max}, T = {t_max})"
        )));
    }
    let normal = standard_normal();
    let mut omega = Vec::with_capacity(n * n);
    for j in 0..n {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        for _ in 0..n {
            omega.push(normal.inverse_cdf(unit_interval(rng.next_u64())));
        }
    }
    Ok(KlSample {
        n,
        s_max,
        t_max,
        omega,
        seed,
    })
}

/// One-dimensional mode family along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisModes {
    /// `sin(ν x/L)/(2k−1)`.
    Wiener { len: f64 },
    /// `e^{r(L−x)} sin(ν e^{2r(x−L)})/(2k−1)`.
    Stationary { rate: f64, len: f64 },
    /// `e^{−rx} sin(ν (e^{2rx}−1)/(e^{2rL}−1))/(2k−1)`.
    ZeroStart { rate: f64, len: f64 },
}

/// `sin((2k+1)θ)` and `cos((2k+1)θ)` for `k < n`, by the angle-addition
/// recurrence.
fn odd_multiples(theta: f64, sn: &mut [f64], cs: &mut [f64]) {
    let (s1, c1) = theta.sin_cos();
    let (s2, c2) = (2.0 * s1 * c1, 1.0 - 2.0 * s1 * s1);
    let (mut s, mut c) = (s1, c1);
    for k in 0..sn.len() {
        // resynchronise now and then so rounding cannot build up
        if k % 32 == 0 && k > 0 {
            (s, c) = ((2 * k + 1) as f64 * theta).sin_cos();
        }
        sn[k] = s;
        cs[k] = c;
        (s, c) = (s * c2 + c * s2, c * c2 - s * s2);
    }
}

impl AxisModes {
    /// Values and derivatives of the first `n` modes at `x`.
    pub fn eval(&self, x: f64, val: &mut [f64], der: &mut [f64]) {
        let n = val.len();
        debug_assert_eq!(der.len(), n);
        // sines into `val` and cosines into `der`, then combined in place
        match *self {
            AxisModes::Wiener { len } => {
                let slope = PI / (2.0 * len);
                odd_multiples(slope * x, val, der);
                for k in 0..n {
                    let m = (2 * k + 1) as f64;
                    val[k] /= m;
                    der[k] *= slope;
                }
            }
            AxisModes::Stationary { rate, len } => {
                let w = (2.0 * rate * (x - len)).exp();
                let env = (rate * (len - x)).exp();
                odd_multiples(PI / 2.0 * w, val, der);
                for k in 0..n {
                    let m = (2 * k + 1) as f64;
                    let nu = m * PI / 2.0;
                    let (sn, cs) = (val[k], der[k]);
                    val[k] = env * sn / m;
                    der[k] = rate * env * (2.0 * nu * w * cs - sn) / m;
                }
            }
            AxisModes::ZeroStart { rate, len } => {
                let span = (2.0 * rate * len).exp_m1();
                let w = (2.0 * rate * x).exp_m1() / span;
                let grow = (2.0 * rate * x).exp() / span;
                let env = (-rate * x).exp();
                odd_multiples(PI / 2.0 * w, val, der);
                for k in 0..n {
                    let m = (2 * k + 1) as f64;
                    let nu = m * PI / 2.0;
                    let (sn, cs) = (val[k], der[k]);
                    val[k] = env * sn / m;
                    der[k] = rate * env * (2.0 * nu * grow * cs - sn) / m;
                }
            }
        }
    }
}

/// The separable structure of a model's expansion on a rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSystem {
    pub prefactor: f64,
    pub s_modes: AxisModes,
    pub t_modes: AxisModes,
}

impl ModeSystem {
    pub fn new(model: &FieldModel, s_max: f64, t_max: f64) -> Self {
        match *model {
            FieldModel::Wiener => ModeSystem {
                prefactor: 8.0 * (s_max * t_max).sqrt() / (PI * PI),
                s_modes: AxisModes::Wiener { len: s_max },
                t_modes: AxisModes::Wiener { len: t_max },
            },
            FieldModel::StationaryOu { alpha, beta, sigma } => ModeSystem {
                prefactor: 4.0 * sigma / (PI * PI * (alpha * beta).sqrt()),
                s_modes: AxisModes::Stationary { rate: alpha, len: s_max },
                t_modes: AxisModes::Stationary { rate: beta, len: t_max },
            },
            FieldModel::ZeroStartOu { alpha, beta, sigma } => {
                let span = ((2.0 * alpha * s_max).exp_m1() * (2.0 * beta * t_max).exp_m1()).sqrt();
                ModeSystem {
                    prefactor: 4.0 * sigma * span / (PI * PI * (alpha * beta).sqrt()),
                    s_modes: AxisModes::ZeroStart { rate: alpha, len: s_max },
                    t_modes: AxisModes::ZeroStart { rate: beta, len: t_max },
                }
            }
        }
    }

    /// Covariance of the `n`-term truncated sheet between two points.
    pub fn truncated_covariance(&self, n: usize, p1: (f64, f64), p2: (f64, f64)) -> f64 {
        let mut a1 = vec![0.0; n];
        let mut a2 = vec![0.0; n];
        let mut b1 = vec![0.0; n];
        let mut b2 = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        self.s_modes.eval(p1.0, &mut a1, &mut scratch);
        self.s_modes.eval(p2.0, &mut a2, &mut scratch);
        self.t_modes.eval(p1.1, &mut b1, &mut scratch);
        self.t_modes.eval(p2.1, &mut b2, &mut scratch);
        let sa: f64 = a1.iter().zip(&a2).map(|(x, y)| x * y).sum();
        let sb: f64 = b1.iter().zip(&b2).map(|(x, y)| x * y).sum();
        self.prefactor * self.prefactor * sa * sb
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_keyed() {
        let a = draw_kl(6, 8.0, 8.0, 17).unwrap();
        let b = draw_kl(6, 8.0, 8.0, 17).unwrap();
        assert_eq!(a, b);
        for j in 0..6 {
            for k in 0..6 {
                assert_eq!(a.omega(j, k), omega_entry(17, j, k));
            }
        }
        // a larger truncation extends rather than reshuffles
        let big = draw_kl(9, 8.0, 8.0, 17).unwrap();
        assert_eq!(big.omega(3, 4), a.omega(3, 4));
        let c = draw_kl(6, 8.0, 8.0, 18).unwrap();
        assert_ne!(a.omega, c.omega);
    }

    #[test]
    fn single_draw() {
        let s = draw_kl(1, 3.0, 3.0, 5).unwrap();
        assert_eq!(s.omega.len(), 1);
        assert!(s.omega[0].is_finite());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(draw_kl(0, 1.0, 1.0, 0).is_err());
        assert!(draw_kl(3, 0.0, 1.0, 0).is_err());
        assert!(draw_kl(3, 1.0, f64::NAN, 0).is_err());
    }

    #[test]
    fn pooled_moments() {
        // 10⁵ pooled entries: mean within 0.01, variance within 0.02
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut count = 0usize;
        for seed in 0..40u64 {
            let s = draw_kl(50, 1.0, 1.0, seed).unwrap();
            for &x in &s.omega {
                sum += x;
                sq += x * x;
                count += 1;
            }
        }
        assert_eq!(count, 100_000);
        let mean = sum / count as f64;
        let var = sq / count as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn recurrence_matches_direct() {
        let n = 300;
        let (mut sn, mut cs) = (vec![0.0; n], vec![0.0; n]);
        for theta in [0.0, 0.37, 1.5, 2.9] {
            odd_multiples(theta, &mut sn, &mut cs);
            for k in 0..n {
                let (s, c) = ((2 * k + 1) as f64 * theta).sin_cos();
                assert!((sn[k] - s).abs() < 1e-12 && (cs[k] - c).abs() < 1e-12, "k={k} θ={theta}");
            }
        }
    }

    #[test]
    fn mode_derivatives_match_differences() {
        let systems = [
            AxisModes::Wiener { len: 8.0 },
            AxisModes::Stationary { rate: 1.0, len: 3.0 },
            AxisModes::ZeroStart { rate: 0.7, len: 3.0 },
        ];
        let n = 12;
        let (mut v, mut d, mut vp, mut vm, mut scratch) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let h = 1e-6;
        for m in systems {
            for x in [0.3, 1.1, 2.7] {
                m.eval(x, &mut v, &mut d);
                m.eval(x + h, &mut vp, &mut scratch);
                m.eval(x - h, &mut vm, &mut scratch);
                for k in 0..n {
                    let fd = (vp[k] - vm[k]) / (2.0 * h);
                    assert!((fd - d[k]).abs() < 1e-6 * d[k].abs().max(1.0), "{m:?} k={k}");
                }
            }
        }
    }
}
