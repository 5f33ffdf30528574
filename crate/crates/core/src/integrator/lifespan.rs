//! Blow-up time extrapolation from geometric threshold crossings.
//!
//! Crossing times `t_j` of levels `M_j` are fitted to `t_j = T - c M_j^{-gamma}`
//! with `c, gamma > 0`. The fit is separable: for fixed `gamma` the model is
//! linear in `(T, c)`, so `gamma` is found by a 1D search on the projected
//! residual and then all three parameters are polished by damped
//! Gauss-Newton. Aitken extrapolation of the last three crossings is the
//! fallback.

use alloc::vec::Vec;

use libm::{exp, log, pow, sqrt};

use crate::error::{Error, Result};

/// Time at which a monitored quantity first reached `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Crossing {
    pub level: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ExtrapolationMethod {
    PowerLawFit,
    Aitken,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LifespanFit {
    pub t_star: f64,
    /// Coefficient `c` of the model, for levels measured in units of `M_0`.
    pub scale: f64,
    pub gamma: f64,
    /// Root-mean-square residual of the crossing times.
    pub residual: f64,
    pub method: ExtrapolationMethod,
}

const GAMMA_MIN: f64 = 1e-3;
const GAMMA_MAX: f64 = 20.0;

/// Estimates the blow-up time from at least three crossings with strictly
/// increasing levels and times.
pub fn estimate_lifespan(crossings: &[Crossing]) -> Result<LifespanFit> {
    if crossings.len() < 3 {
        return Err(Error::InsufficientCrossings(crossings.len()));
    }
    let ordered = crossings
        .windows(2)
        .all(|w| w[1].level > w[0].level && w[1].t > w[0].t);
    if !ordered
        || crossings
            .iter()
            .any(|c| !(c.level > 0.0 && c.t.is_finite()))
    {
        return Err(Error::StepControl(
            "crossings must have increasing levels and times",
        ));
    }
    let t_last = crossings[crossings.len() - 1].t;
    if let Some(fit) = power_law_fit(crossings) {
        if fit.t_star > t_last && fit.t_star.is_finite() {
            return Ok(fit);
        }
    }
    aitken(crossings).ok_or(Error::StepControl("crossing times do not converge"))
}

fn power_law_fit(crossings: &[Crossing]) -> Option<LifespanFit> {
    let m0 = crossings[0].level;
    let ln_s: Vec<f64> = crossings.iter().map(|c| log(c.level / m0)).collect();
    let ts: Vec<f64> = crossings.iter().map(|c| c.t).collect();

    // coarse scan in log(gamma)
    let n_scan = 240;
    let (lo, hi) = (log(GAMMA_MIN), log(GAMMA_MAX));
    let at = |i: usize| lo + (hi - lo) * i as f64 / n_scan as f64;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..=n_scan {
        let r = projected(&ln_s, &ts, exp(at(i))).map_or(f64::INFINITY, |p| p.2);
        if r < best.0 {
            best = (r, i);
        }
    }
    if !best.0.is_finite() {
        return None;
    }
    // golden-section refinement inside the bracketing cells
    let (mut a, mut b) = (at(best.1.saturating_sub(1)), at((best.1 + 1).min(n_scan)));
    let phi = 0.5 * (sqrt(5.0) - 1.0);
    let f = |x: f64| projected(&ln_s, &ts, exp(x)).map_or(f64::INFINITY, |p| p.2);
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    let gamma = exp(0.5 * (a + b));
    let (t_star, scale, _) = projected(&ln_s, &ts, gamma)?;
    let (t_star, scale, gamma) = polish(&ln_s, &ts, [t_star, scale, gamma]);
    // minimum pinned at the search boundary means the model does not fit
    if !(gamma > GAMMA_MIN * 1.01 && gamma < GAMMA_MAX * 0.99 && scale > 0.0) {
        return None;
    }
    let rss = rss(&ln_s, &ts, [t_star, scale, gamma]);
    Some(LifespanFit {
        t_star,
        scale,
        gamma,
        residual: sqrt(rss / ts.len() as f64),
        method: ExtrapolationMethod::PowerLawFit,
    })
}

/// Least-squares `(T, c, rss)` of `t = T - c x`, `x = s^{-gamma}`.
fn projected(ln_s: &[f64], ts: &[f64], gamma: f64) -> Option<(f64, f64, f64)> {
    let n = ts.len() as f64;
    let xs: Vec<f64> = ln_s.iter().map(|l| exp(-gamma * l)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let mt = ts.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxt: f64 = xs.iter().zip(ts).map(|(x, t)| (x - mx) * (t - mt)).sum();
    let slope = sxt / sxx;
    let t_star = mt - slope * mx;
    let c = -slope;
    let r = xs
        .iter()
        .zip(ts)
        .map(|(x, t)| {
            let e = t_star - c * x - t;
            e * e
        })
        .sum();
    Some((t_star, c, r))
}

fn rss(ln_s: &[f64], ts: &[f64], th: [f64; 3]) -> f64 {
    ln_s.iter()
        .zip(ts)
        .map(|(l, t)| {
            let e = th[0] - th[1] * exp(-th[2] * l) - t;
            e * e
        })
        .sum()
}

/// Levenberg-Marquardt iterations on the full three-parameter model.
fn polish(ln_s: &[f64], ts: &[f64], mut th: [f64; 3]) -> (f64, f64, f64) {
    let mut mu = 1e-6;
    let mut cur = rss(ln_s, ts, th);
    for _ in 0..50 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (l, t) in ln_s.iter().zip(ts) {
            let x = exp(-th[2] * l);
            let r = th[0] - th[1] * x - t;
            let j = [1.0, -x, th[1] * x * l];
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..10 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] *= 1.0 + mu;
            }
            let Some(delta) = solve3(m, [-jtr[0], -jtr[1], -jtr[2]]) else {
                mu *= 10.0;
                continue;
            };
            let cand = [th[0] + delta[0], th[1] + delta[1], th[2] + delta[2]];
            let r = rss(ln_s, ts, cand);
            if r.is_finite() && r <= cur {
                let small = delta
                    .iter()
                    .zip(&cand)
                    .all(|(d, c)| d.abs() <= 1e-15 * c.abs().max(1e-300));
                th = cand;
                cur = r;
                mu = (mu * 0.3).max(1e-12);
                improved = !small;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (th[0], th[1], th[2])
}

fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Aitken delta-squared extrapolation on the last three crossing times.
fn aitken(crossings: &[Crossing]) -> Option<LifespanFit> {
    let n = crossings.len();
    let (t0, t1, t2) = (crossings[n - 3].t, crossings[n - 2].t, crossings[n - 1].t);
    let (d1, d2) = (t1 - t0, t2 - t1);
    let q = d2 / d1;
    if !(q > 0.0 && q < 1.0) {
        return None;
    }
    let t_star = t2 + d2 * q / (1.0 - q);
    // implied exponent for the level ratio between the last two crossings
    let ratio = crossings[n - 1].level / crossings[n - 2].level;
    let gamma = -log(q) / log(ratio);
    Some(LifespanFit {
        t_star,
        scale: d1 / (1.0 - q) / pow(crossings[n - 3].level / crossings[0].level, -gamma),
        gamma,
        residual: 0.0,
        method: ExtrapolationMethod::Aitken,
    })
}
