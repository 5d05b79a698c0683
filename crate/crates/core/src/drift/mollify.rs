//! Spatial mollification `b1,n = (b1(t, ·) ∗ ρ_{1/n}) · χ_n`.
//!
//! `ρ(y) ∝ exp(-1 / (1 - y²))` on `(-1, 1)`; `χ_n` equals one on `[-n, n]`
//! and vanishes outside `[-n-1, n+1]`. The convolution is computed in the
//! variable `s = atanh(y)`, where the kernel becomes
//! `exp(-cosh² s) sech² s` and decays doubly exponentially: the trapezoid rule
//! is then spectrally accurate. When `b1` has declared jumps inside the
//! window the integral is split there and each piece uses Gauss–Legendre in
//! `s`. The derivative moves onto the kernel:
//! `∂_x (b ∗ ρ_ε) = ε⁻¹ ∫ b(x - ε y) ρ'(y) dy`.

use std::sync::{Arc, OnceLock};

use crate::quadrature::GaussLegendre;

use super::DeterministicDrift;

/// Half-width of the `s` window; `exp(-cosh² S)` is below `1e-19` there.
const S_MAX: f64 = 2.6;
/// Step `0.1`: the kernel stays bounded in the strip `|Im s| < π/4`, so the
/// trapezoid error is of order `exp(-π² / 0.2)`.
const TRAPEZOID_NODES: usize = 53;
const PIECE_NODES: usize = 40;

/// The normalised bump `ρ` with its quadrature tables.
#[derive(Debug)]
pub struct Bump {
    norm: f64,
    /// `(y, w ρ(y), w ρ'(y))` for the full-window rule.
    table: Vec<(f64, f64, f64)>,
    piece: GaussLegendre,
}

impl Bump {
    pub fn shared() -> Arc<Bump> {
        static BUMP: OnceLock<Arc<Bump>> = OnceLock::new();
        BUMP.get_or_init(|| Arc::new(Bump::new())).clone()
    }

    fn new() -> Self {
        let h = 2.0 * S_MAX / (TRAPEZOID_NODES - 1) as f64;
        let raw: Vec<(f64, f64, f64)> = (0..TRAPEZOID_NODES)
            .map(|j| {
                let s = -S_MAX + h * j as f64;
                let (y, k0, k1) = kernel_in_s(s);
                (y, h * k0, h * k1)
            })
            .collect();
        let norm: f64 = raw.iter().map(|r| r.1).sum();
        let table = raw
            .into_iter()
            .map(|(y, a, b)| (y, a / norm, b / norm))
            .collect();
        Self {
            norm,
            table,
            piece: GaussLegendre::new(PIECE_NODES),
        }
    }

    /// `ρ(y)`
    pub fn rho(&self, y: f64) -> f64 {
        raw_bump(y) / self.norm
    }

    /// `ρ'(y)`
    pub fn rho_dy(&self, y: f64) -> f64 {
        raw_bump_dy(y) / self.norm
    }

    /// `(∫ g(y) ρ(y) dy, ∫ g(y) ρ'(y) dy)` for `g` smooth between `breaks`.
    fn moments(&self, breaks: &[f64], g: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        if breaks.is_empty() {
            for &(y, a, b) in &self.table {
                let v = g(y);
                m0 += a * v;
                m1 += b * v;
            }
            return (m0, m1);
        }
        let mut lo = -S_MAX;
        for hi in breaks
            .iter()
            .map(|y| y.atanh().clamp(-S_MAX, S_MAX))
            .chain(std::iter::once(S_MAX))
        {
            if hi <= lo {
                continue;
            }
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (u, w) in self.piece.nodes.iter().zip(&self.piece.weights) {
                let (y, k0, k1) = kernel_in_s(mid + half * u);
                let v = g(y) * w * half / self.norm;
                m0 += v * k0;
                m1 += v * k1;
            }
            lo = hi;
        }
        (m0, m1)
    }
}

/// `(y, ρ̃(y) dy/ds, ρ̃'(y) dy/ds)` at `y = tanh s`, unnormalised.
fn kernel_in_s(s: f64) -> (f64, f64, f64) {
    let y = s.tanh();
    let c2 = s.cosh().powi(2);
    let e = (-c2).exp();
    // 1 - y² = sech² s
    (y, e / c2, -2.0 * y * c2 * e)
}

fn raw_bump(y: f64) -> f64 {
    let q = 1.0 - y * y;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

fn raw_bump_dy(y: f64) -> f64 {
    let q = 1.0 - y * y;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp() * (-2.0 * y / (q * q))
    }
}

/// Smooth step: 0 for `u <= 0`, 1 for `u >= 1`. Returns `(S(u), S'(u))`.
fn smooth_step(u: f64) -> (f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    let s = a + b;
    let ds = a * b * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u))) / (s * s);
    (a / s, ds)
}

/// Cutoff `χ_R(x)` and its derivative: one on `[-R, R]`, zero outside `[-R-1, R+1]`.
pub fn cutoff(radius: f64, x: f64) -> (f64, f64) {
    let (s, ds) = smooth_step(radius + 1.0 - x.abs());
    (s, -x.signum() * ds)
}

/// Smooth, compactly supported approximation of `b1` at level `n`
/// (mollifier width `1/n`, cutoff radius `n`).
pub fn mollify(b1: &DeterministicDrift, n: u32) -> DeterministicDrift {
    let n = n.max(1);
    let eps = 1.0 / n as f64;
    let radius = n as f64;
    let bump = Bump::shared();
    let base = b1.clone();
    let jumps: Vec<f64> = b1.jumps().to_vec();

    let name = format!("{}@{}", b1.name(), n);
    DeterministicDrift::new(name, b1.growth() * (1.0 + eps), |_, _| 0.0)
        .with_joint(move |t: f64, x: f64| -> (f64, f64) {
            if x.abs() >= radius + 1.0 {
                return (0.0, 0.0);
            }
            let mut breaks: Vec<f64> = jumps
                .iter()
                .map(|z| (x - z) / eps)
                .filter(|y| y.abs() < 1.0)
                .collect();
            breaks.sort_by(|a, b| a.total_cmp(b));
            let (conv, conv_dx) = bump.moments(&breaks, |y| base.eval(t, x - eps * y));
            let conv_dx = conv_dx / eps;
            let (chi, chi_dx) = cutoff(radius, x);
            (conv * chi, conv_dx * chi + conv * chi_dx)
        })
        .with_level(n)
}

/// `n ↦ b1,n` for a fixed base drift.
#[derive(Debug, Clone)]
pub struct MollifiedFamily {
    base: DeterministicDrift,
}

impl MollifiedFamily {
    pub fn new(base: DeterministicDrift) -> Self {
        Self { base }
    }

    pub fn base(&self) -> &DeterministicDrift {
        &self.base
    }

    pub fn level(&self, n: u32) -> DeterministicDrift {
        mollify(&self.base, n)
    }

    pub fn width(n: u32) -> f64 {
        1.0 / n.max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::catalog;
    use crate::drift::VerificationBox;

    #[test]
    fn bump_is_normalised() {
        let bump = Bump::shared();
        let g = GaussLegendre::new(40);
        let total = g.integrate_composite(-1.0, 1.0, 64, |y| bump.rho(y));
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn zero_drift_stays_zero() {
        let b = catalog::zero();
        for n in [1, 10, 1000] {
            let m = mollify(&b, n);
            for x in [-3.0, 0.0, 0.2, 7.0] {
                assert_eq!(m.eval(0.0, x), 0.0);
                assert_eq!(m.eval_dx(0.0, x), Some(0.0));
            }
        }
    }

    #[test]
    fn linear_function_is_a_fixed_point_inside_cutoff() {
        let b = catalog::linear(1.0);
        let m = mollify(&b, 100);
        assert!((m.eval(0.0, 0.5) - 0.5).abs() < 1e-2);
        // symmetric kernel: exact up to quadrature
        assert!((m.eval(0.0, 0.5) - 0.5).abs() < 1e-12);
        assert!((m.eval_dx(0.0, 0.5).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mollified_sign_is_one_away_from_origin() {
        let b = catalog::sign(-1.0);
        let m = mollify(&b, 1000);
        assert!((m.eval(0.0, 1.0) - 1.0).abs() < 1e-2);
        assert!((m.eval(0.0, 2e-3) - 1.0).abs() < 1e-12);
        assert!(m.eval(0.0, 0.0).abs() < 1e-12);
    }

    #[test]
    fn mollified_sign_derivative_is_twice_the_kernel() {
        // d/dx (sign ∗ ρ_ε) = 2 ρ_ε(x)
        let bump = Bump::shared();
        let n = 1000;
        let eps = 1.0 / n as f64;
        let m = mollify(&catalog::sign(-1.0), n);
        let peak = 2.0 * bump.rho(0.0) / eps;
        for x in [0.0, 1e-4, -3e-4, 7e-4, 9.9e-4] {
            let exact = 2.0 * bump.rho(x / eps) / eps;
            let got = m.eval_dx(0.0, x).unwrap();
            assert!(
                (got - exact).abs() <= 1e-10 * peak,
                "x = {x}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn cutoff_limits() {
        assert_eq!(cutoff(5.0, 4.9), (1.0, 0.0));
        assert_eq!(cutoff(5.0, -6.5), (0.0, 0.0));
        let (c, _) = cutoff(5.0, 5.5);
        assert!(c > 0.0 && c < 1.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = mollify(&catalog::step(-1.0, 1.0, 1.0), 10);
        for x in [-1.05, -0.97, 0.0, 0.93, 1.02, 10.4] {
            let h = 1e-6;
            let fd = (m.eval(0.0, x + h) - m.eval(0.0, x - h)) / (2.0 * h);
            let an = m.eval_dx(0.0, x).unwrap();
            assert!(
                (fd - an).abs() < 1e-4 * an.abs().max(1.0),
                "x = {x}: {fd} vs {an}"
            );
        }
    }

    #[test]
    fn mollification_preserves_linear_growth() {
        let region = VerificationBox {
            nt: 3,
            nx: 2001,
            ..VerificationBox::standard(0.0, 1.0)
        };
        for key in catalog::deterministic_keys() {
            let b = catalog::deterministic(key).unwrap();
            let norm = crate::drift::linear_growth_norm(&b, &region).unwrap();
            for n in [1, 3, 10] {
                let m = mollify(&b, n);
                for x in region.points() {
                    assert!(
                        m.eval(0.0, x).abs() <= norm * (1.0 + x.abs()) + 1.0,
                        "{key}@{n} x = {x}"
                    );
                }
            }
        }
    }

    #[test]
    fn sign_convergence_is_monotone_in_level() {
        let b = catalog::sign(-1.0);
        let mut prev = f64::INFINITY;
        for n in [10u32, 100, 1000] {
            let m = mollify(&b, n);
            let lo = 2.0 / n as f64;
            let err = (0..2000)
                .map(|i| lo + (3.0 - lo) * i as f64 / 1999.0)
                .flat_map(|x| [x, -x])
                .map(|x| (m.eval(0.0, x) - b.eval(0.0, x)).abs())
                .fold(0.0, f64::max);
            assert!(err <= prev, "n = {n}: {err} > {prev}");
            prev = err;
        }
        assert!(prev < 1e-12);
    }
}
