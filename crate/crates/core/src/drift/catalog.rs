//! Built-in drifts, addressable by key.

use std::sync::Arc;

use super::{DeterministicDrift, PhiOfNoise, RandomDrift, WienerIntegral, ZeroRandom};

pub fn zero() -> DeterministicDrift {
    DeterministicDrift::new("zero", 0.0, |_, _| 0.0).with_derivative(|_, _| 0.0)
}

pub fn constant(c: f64) -> DeterministicDrift {
    DeterministicDrift::new("constant", c.abs(), move |_, _| c).with_derivative(|_, _| 0.0)
}

/// Ornstein–Uhlenbeck drift `a x`.
pub fn linear(a: f64) -> DeterministicDrift {
    DeterministicDrift::new("ou", a.abs(), move |_, x| a * x).with_derivative(move |_, _| a)
}

/// `a · clamp(x, -r, r)`: bounded OU drift, Lipschitz with a kink at `±r`.
pub fn linear_truncated(a: f64, r: f64) -> DeterministicDrift {
    DeterministicDrift::new("ou-truncated", a.abs(), move |_, x: f64| a * x.clamp(-r, r))
        .with_derivative(move |_, x: f64| if x.abs() < r { a } else { 0.0 })
}

/// `-k sign(x)`; mean-reverting for `k > 0`.
pub fn sign(k: f64) -> DeterministicDrift {
    DeterministicDrift::new("sign", k.abs(), move |_, x: f64| {
        if x > 0.0 {
            -k
        } else if x < 0.0 {
            k
        } else {
            0.0
        }
    })
    .with_jumps(vec![0.0])
}

/// `h · 1_{[lo, hi]}(x)`
pub fn step(lo: f64, hi: f64, h: f64) -> DeterministicDrift {
    DeterministicDrift::new("step", h.abs(), move |_, x| {
        if (lo..=hi).contains(&x) {
            h
        } else {
            0.0
        }
    })
    .with_jumps(vec![lo, hi])
}

/// `a sin(x)`
pub fn sine(a: f64) -> DeterministicDrift {
    DeterministicDrift::new("sin", a.abs(), move |_, x: f64| a * x.sin())
        .with_derivative(move |_, x: f64| a * x.cos())
}

/// `exp(-1 / (1 - x²))` on `|x| < 1`, zero outside: smooth with compact support.
pub fn bump() -> DeterministicDrift {
    fn both(x: f64) -> (f64, f64) {
        if x.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - x * x;
        let v = (-1.0 / q).exp();
        (v, -2.0 * x * v / (q * q))
    }
    DeterministicDrift::new("bump", (-1f64).exp(), |_, _| 0.0).with_joint(|_, x| both(x))
}

pub const DETERMINISTIC_KEYS: [&str; 8] = [
    "zero",
    "constant",
    "ou",
    "ou-truncated",
    "sign",
    "step",
    "sin",
    "bump",
];

pub fn deterministic_keys() -> &'static [&'static str] {
    &DETERMINISTIC_KEYS
}

/// Catalog lookup with default parameters: `constant` is `1`, `ou` is `-x`,
/// `ou-truncated` is `-clamp(x, -10, 10)`, `sign` is `-sign(x)`, `step` is
/// `1_{[-1, 1]}`, `sin` is `sin(x)` and `bump` is [`bump`].
pub fn deterministic(key: &str) -> Option<DeterministicDrift> {
    Some(match key {
        "zero" => zero(),
        "constant" => constant(1.0),
        "ou" => linear(-1.0),
        "ou-truncated" => linear_truncated(-1.0, 10.0),
        "sign" => sign(1.0),
        "step" => step(-1.0, 1.0, 1.0),
        "sin" => sine(1.0),
        "bump" => bump(),
        _ => return None,
    })
}

/// `tanh(B^1_t)`: x-independent, `D_s b2(t) = sech²(B_t) 1_{s ≤ t}`.
pub fn tanh_noise() -> PhiOfNoise {
    PhiOfNoise::new(
        "tanh-b",
        0,
        |_, _, y: f64| y.tanh(),
        |_, _, _| 0.0,
        |_, _, y: f64| 1.0 / y.cosh().powi(2),
        2.0,
        1.0,
        false,
    )
}

/// `tanh(x + B^1_t)`
pub fn tanh_shifted_noise() -> PhiOfNoise {
    PhiOfNoise::new(
        "tanh-x-b",
        0,
        |_, x: f64, y: f64| (x + y).tanh(),
        |_, x: f64, y: f64| 1.0 / (x + y).cosh().powi(2),
        |_, x: f64, y: f64| 1.0 / (x + y).cosh().powi(2),
        3.0,
        1.0,
        true,
    )
}

/// `Σ_i ∫_0^t α dB^i` with constant `α`.
pub fn wiener_integral(alpha: f64) -> WienerIntegral {
    WienerIntegral::new("wiener-integral-b2", move |_, _| alpha, alpha.abs())
}

pub const RANDOM_KEYS: [&str; 4] = ["zero", "tanh-b", "tanh-x-b", "wiener-integral-b2"];

pub fn random_keys() -> &'static [&'static str] {
    &RANDOM_KEYS
}

pub fn random(key: &str) -> Option<Arc<dyn RandomDrift>> {
    Some(match key {
        "zero" => Arc::new(ZeroRandom),
        "tanh-b" => Arc::new(tanh_noise()),
        "tanh-x-b" => Arc::new(tanh_shifted_noise()),
        "wiener-integral-b2" => Arc::new(wiener_integral(1.0)),
        _ => return None,
    })
}
