//! Independent finite-difference reference solver.
//!
//! Second-order central differences in space on the same interior nodes, and
//! an explicit velocity-Verlet update in time. Both damping terms are explicit;
//! the closing half kick is trapezoidal in the velocity, resolved by one
//! predictor pass, which keeps the scheme second order with damping present.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use super::{
    finish_estimate, lp_levels, LevelTracker, LifespanEstimate, LifespanStatus, Thresholds,
};
use crate::error::{Error, Result};
use crate::functionals::{sample, source_term, Trajectory, TrajectoryMeta};
use crate::model::{Coefficients, State};
use crate::spectral::{DomainSpec, SpectralBasis};

/// Largest step accepted by [`fd_oracle_step`]: `h²/(2 a d)` for the explicit
/// strong damping (when `a > 0`) and `h/sqrt(d)` for the wave part.
pub fn fd_max_stable_dt(coeffs: &Coefficients, domain: &DomainSpec) -> f64 {
    let d = domain.dim as f64;
    let h = (0..domain.dim)
        .map(|ax| domain.spacing(ax))
        .fold(f64::INFINITY, f64::min);
    let wave = h / sqrt(d);
    if coeffs.a() > 0.0 {
        wave.min(h * h / (2.0 * coeffs.a() * d))
    } else {
        wave
    }
}

fn fd_laplacian(u: &[f64], domain: &DomainSpec, out: &mut [f64]) {
    let n = domain.n_grid;
    let at = |v: &[f64], i: usize| v[i];
    match domain.dim {
        1 => {
            let inv = 1.0 / (domain.spacing(0) * domain.spacing(0));
            for i in 0..n {
                let l = if i > 0 { at(u, i - 1) } else { 0.0 };
                let r = if i + 1 < n { at(u, i + 1) } else { 0.0 };
                out[i] = (l - 2.0 * u[i] + r) * inv;
            }
        }
        _ => {
            let ix = 1.0 / (domain.spacing(0) * domain.spacing(0));
            let iy = 1.0 / (domain.spacing(1) * domain.spacing(1));
            for i in 0..n {
                for j in 0..n {
                    let k = i * n + j;
                    let xm = if i > 0 { u[k - n] } else { 0.0 };
                    let xp = if i + 1 < n { u[k + n] } else { 0.0 };
                    let ym = if j > 0 { u[k - 1] } else { 0.0 };
                    let yp = if j + 1 < n { u[k + 1] } else { 0.0 };
                    out[k] = (xm - 2.0 * u[k] + xp) * ix + (ym - 2.0 * u[k] + yp) * iy;
                }
            }
        }
    }
}

struct FdScratch {
    lap_u: Vec<f64>,
    lap_v: Vec<f64>,
    acc: Vec<f64>,
    v_half: Vec<f64>,
    v_pred: Vec<f64>,
}

impl FdScratch {
    fn new(n: usize) -> Self {
        FdScratch {
            lap_u: vec![0.0; n],
            lap_v: vec![0.0; n],
            acc: vec![0.0; n],
            v_half: vec![0.0; n],
            v_pred: vec![0.0; n],
        }
    }
}

fn acceleration(
    u: &[f64],
    v: &[f64],
    coeffs: &Coefficients,
    domain: &DomainSpec,
    s: &mut FdScratch,
) {
    fd_laplacian(u, domain, &mut s.lap_u);
    fd_laplacian(v, domain, &mut s.lap_v);
    let (a, b, p) = (coeffs.a(), coeffs.b(), coeffs.p());
    for i in 0..u.len() {
        s.acc[i] = s.lap_u[i] + a * s.lap_v[i] - b * v[i] + source_term(u[i], p);
    }
}

fn fd_advance(
    state: &mut State,
    coeffs: &Coefficients,
    domain: &DomainSpec,
    dt: f64,
    s: &mut FdScratch,
) {
    let half = 0.5 * dt;
    acceleration(&state.psi, &state.psi_t, coeffs, domain, s);
    for i in 0..state.len() {
        s.v_half[i] = state.psi_t[i] + half * s.acc[i];
        state.psi[i] += dt * s.v_half[i];
    }
    let v_half = core::mem::take(&mut s.v_half);
    acceleration(&state.psi, &v_half, coeffs, domain, s);
    for i in 0..state.len() {
        s.v_pred[i] = v_half[i] + half * s.acc[i];
    }
    let v_pred = core::mem::take(&mut s.v_pred);
    acceleration(&state.psi, &v_pred, coeffs, domain, s);
    for i in 0..state.len() {
        state.psi_t[i] = v_half[i] + half * s.acc[i];
    }
    s.v_half = v_half;
    s.v_pred = v_pred;
    state.t += dt;
}

fn check_dt(coeffs: &Coefficients, domain: &DomainSpec, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let max_dt = fd_max_stable_dt(coeffs, domain);
    if dt > max_dt {
        return Err(Error::StabilityBound {
            dt,
            suggested: 0.5 * max_dt,
        });
    }
    Ok(())
}

/// One explicit finite-difference step; refuses steps above the stability
/// bound.
pub fn fd_oracle_step(
    state: &State,
    coeffs: &Coefficients,
    basis: &SpectralBasis,
    dt: f64,
) -> Result<State> {
    let n = basis.len();
    for f in [&state.psi, &state.psi_t] {
        if f.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: f.len(),
            });
        }
    }
    check_dt(coeffs, basis.domain(), dt)?;
    let mut out = state.clone();
    fd_advance(&mut out, coeffs, basis.domain(), dt, &mut FdScratch::new(n));
    if !out.is_finite() {
        return Err(Error::BlowupOverflow { t: out.t });
    }
    Ok(out)
}

/// Result of a fixed-step finite-difference run.
#[derive(Debug, Clone)]
pub struct FdRun {
    pub trajectory: Trajectory,
    pub lifespan: LifespanEstimate,
    pub final_state: State,
}

/// Fixed-step finite-difference run to `t_end`, sampling every `stride`
/// steps and tracking the same `Y` levels as the spectral driver.
pub fn fd_integrate(
    state0: &State,
    coeffs: &Coefficients,
    basis: &SpectralBasis,
    dt: f64,
    t_end: f64,
    stride: usize,
    thresholds: &Thresholds,
    rho: f64,
) -> Result<FdRun> {
    check_dt(coeffs, basis.domain(), dt)?;
    thresholds.validate()?;
    if stride == 0 {
        return Err(Error::StepControl("sampling stride must be at least 1"));
    }
    let n = basis.len();
    let mut scratch = FdScratch::new(n);
    let mut state = state0.clone();
    let mut traj = Trajectory::new(TrajectoryMeta::new(coeffs, rho));
    let first = sample(&state, coeffs, basis)?;
    let mut y = first.y;
    let mut lp = first.lp_norm;
    traj.push(first);
    let mut y_track = LevelTracker::new(thresholds.levels(y), (coeffs.p() - 2.0) / 2.0);
    let mut lp_track = LevelTracker::new(lp_levels(thresholds, lp), coeffs.p() - 2.0);

    let total = libm::ceil((t_end - state0.t) / dt - 1e-9) as usize;
    let mut status = LifespanStatus::SurvivedToHorizon;
    let mut steps = 0;
    for k in 1..=total {
        let t_old = state.t;
        fd_advance(&mut state, coeffs, basis.domain(), dt, &mut scratch);
        state.t = state0.t + k as f64 * dt;
        steps = k;
        if !state.is_finite() {
            status = LifespanStatus::Stalled;
            break;
        }
        let mut s = sample(&state, coeffs, basis)?;
        s.dt = dt;
        y_track.update(t_old, y, state.t, s.y);
        lp_track.update(t_old, lp, state.t, s.lp_norm);
        y = s.y;
        lp = s.lp_norm;
        if k % stride == 0 || k == total {
            traj.push(s);
        }
        if y_track.complete() {
            traj.push(s);
            status = LifespanStatus::BlowupDetected;
            break;
        }
    }
    let lifespan = finish_estimate(
        status,
        thresholds.fit_window,
        y_track.into_hits(),
        lp_track.into_hits(),
        y,
        state.t,
        steps,
    );
    Ok(FdRun {
        trajectory: traj,
        lifespan,
        final_state: state,
    })
}
