//! Exact flow of the damped oscillator `c'' + g c' + lam c = 0` for one mode.

use alloc::vec::Vec;

use libm::{cos, cosh, exp, sin, sinh, sqrt};

/// Row-major `[m00, m01, m10, m11]` mapping `(c, c')(0)` to `(c, c')(tau)`.
pub type Flow2 = [f64; 4];

/// `exp(A tau)` with `A = [[0, 1], [-lam, -g]]`.
///
/// Writing `B = A + g/2 I` gives `B^2 = (g^2/4 - lam) I`, so
/// `exp(A tau) = e^{-g tau/2} (C I + S B)` with `C, S` the cosine/sine-like
/// pair of `mu^2 = lam - g^2/4` (trigonometric, hyperbolic, or `(1, tau)`).
pub fn oscillator_flow(lam: f64, g: f64, tau: f64) -> Flow2 {
    let half_g = 0.5 * g;
    let mu2 = lam - half_g * half_g;
    // damped cosine/sine-like pair, already multiplied by e^{-g tau/2}
    let (ec, es) = if mu2 > 0.0 {
        let mu = sqrt(mu2);
        let decay = exp(-half_g * tau);
        (decay * cos(mu * tau), decay * sin(mu * tau) / mu)
    } else if mu2 < 0.0 {
        let nu = sqrt(-mu2);
        let x = nu * tau;
        if x < 20.0 {
            let decay = exp(-half_g * tau);
            let s = if x < 1e-8 {
                tau * (1.0 + x * x / 6.0)
            } else {
                sinh(x) / nu
            };
            (decay * cosh(x), decay * s)
        } else {
            // e^{-g tau/2} cosh(nu tau) overflows separately; combine exponents
            let e1 = exp((nu - half_g) * tau);
            let e2 = exp((-nu - half_g) * tau);
            (0.5 * (e1 + e2), 0.5 * (e1 - e2) / nu)
        }
    } else {
        let decay = exp(-half_g * tau);
        (decay, decay * tau)
    };
    [ec + half_g * es, es, -lam * es, ec - half_g * es]
}

/// Per-mode flows for one `tau`, cached by the stepper.
#[derive(Debug, Clone)]
pub(crate) struct LinearFlow {
    pub tau: f64,
    pub m: Vec<Flow2>,
}

impl LinearFlow {
    pub fn new(eigenvalues: &[f64], a: f64, b: f64, tau: f64) -> Self {
        let m = eigenvalues
            .iter()
            .map(|&lam| oscillator_flow(lam, a * lam + b, tau))
            .collect();
        LinearFlow { tau, m }
    }

    pub fn apply(&self, c: &mut [f64], d: &mut [f64]) {
        for ((ck, dk), m) in c.iter_mut().zip(d.iter_mut()).zip(&self.m) {
            let (x, v) = (*ck, *dk);
            *ck = m[0] * x + m[1] * v;
            *dk = m[2] * x + m[3] * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference: composition of many tiny RK4 steps.
    fn rk4(lam: f64, g: f64, tau: f64, x0: f64, v0: f64) -> (f64, f64) {
        let n = 20000;
        let h = tau / n as f64;
        let f = |x: f64, v: f64| (v, -lam * x - g * v);
        let (mut x, mut v) = (x0, v0);
        for _ in 0..n {
            let k1 = f(x, v);
            let k2 = f(x + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
            let k3 = f(x + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
            let k4 = f(x + h * k3.0, v + h * k3.1);
            x += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (x, v)
    }

    #[test]
    fn all_root_regimes_match_rk4() {
        // underdamped, critically damped, overdamped, negative friction
        for &(lam, g) in &[(1.0, 0.5), (4.0, 4.0), (1.0, 10.0), (2.0, -0.3), (9.0, 0.0)] {
            let m = oscillator_flow(lam, g, 0.7);
            for &(x0, v0) in &[(1.0, 0.0), (0.0, 1.0), (0.3, -2.0)] {
                let (x, v) = rk4(lam, g, 0.7, x0, v0);
                assert!((m[0] * x0 + m[1] * v0 - x).abs() < 1e-12, "lam={lam} g={g}");
                assert!((m[2] * x0 + m[3] * v0 - v).abs() < 1e-12, "lam={lam} g={g}");
            }
        }
    }

    #[test]
    fn damped_closed_form_at_t1() {
        // lam = 1, g = 0.5: c(1) = e^{-1/4}(cos w + sin w / (4w)), w = sqrt(15/16)
        let w = (15.0f64 / 16.0).sqrt();
        let expect = (-0.25f64).exp() * (w.cos() + 0.25 / w * w.sin());
        let m = oscillator_flow(1.0, 0.5, 1.0);
        assert!((m[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn stiff_mode_does_not_overflow() {
        let lam = 255.0f64 * 255.0;
        let m = oscillator_flow(lam, 0.1 * lam + 0.1, 0.5);
        assert!(m.iter().all(|v| v.is_finite()));
        assert!(m[0].abs() <= 1.0 && m[3].abs() <= 1.0);
    }

    #[test]
    fn semigroup_property() {
        let (lam, g) = (3.0, 0.8);
        let a = oscillator_flow(lam, g, 0.3);
        let b = oscillator_flow(lam, g, 0.6);
        let ab = [
            a[0] * a[0] + a[1] * a[2],
            a[0] * a[1] + a[1] * a[3],
            a[2] * a[0] + a[3] * a[2],
            a[2] * a[1] + a[3] * a[3],
        ];
        for (x, y) in ab.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
