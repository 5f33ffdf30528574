//! Time integration of `psi_tt - Δpsi - aΔpsi_t + b psi_t = |psi|^{p-2} psi`.
//!
//! In sine space every mode obeys `c'' + (a λ_k + b) c' + λ_k c = f_k`. One
//! step is a Strang splitting: exact linear flow over `dt/2`, a velocity kick
//! `d += dt f(psi)` evaluated at the half step, exact linear flow over `dt/2`.
//! The stiff strong-damping term is therefore never discretized.

mod fd;
mod lifespan;
mod propagator;

use alloc::vec;
use alloc::vec::Vec;

use libm::pow;

use crate::error::{Error, Result};
use crate::functionals::{sample_parts, source_term, Trajectory, TrajectoryMeta};
use crate::model::{Coefficients, State};
use crate::spectral::{lq_norm_weighted, SpectralBasis};

pub use fd::{fd_integrate, fd_max_stable_dt, fd_oracle_step, FdRun};
pub use lifespan::{estimate_lifespan, Crossing, ExtrapolationMethod, LifespanFit};
pub use propagator::{oscillator_flow, Flow2};

use propagator::LinearFlow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StepMode {
    Full,
    LinearOnly,
}

/// Adaptive step-size policy and horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepControl {
    pub dt0: f64,
    pub dt_min: f64,
    /// Largest accepted relative increase of `Y` over one step; larger
    /// increases halve `dt`.
    pub growth_ratio: f64,
    pub t_max: f64,
    /// Time between stored samples. Steps are shortened to land on sample
    /// times, so the stored grid is uniform.
    pub sample_interval: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt0: 1e-3,
            dt_min: 1e-12,
            growth_ratio: 0.1,
            t_max: 10.0,
            sample_interval: 1e-2,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.dt_min) || !pos(self.dt0) || self.dt_min > self.dt0 {
            return Err(Error::StepControl("require 0 < dt_min <= dt0"));
        }
        if !pos(self.t_max) {
            return Err(Error::StepControl("require t_max > 0"));
        }
        if !pos(self.growth_ratio) {
            return Err(Error::StepControl("require growth_ratio > 0"));
        }
        if !pos(self.sample_interval) {
            return Err(Error::StepControl("require sample_interval > 0"));
        }
        Ok(())
    }
}

/// Geometric blow-up levels `M_j = base_factor * Y(0) * level_factor^j`.
///
/// The extrapolation uses only the last `fit_window` crossings: the first
/// levels of a large-amplitude run are crossed while the solution is still
/// accelerating away from its initial data, well before the power-law regime.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Thresholds {
    pub base_factor: f64,
    pub count: usize,
    pub level_factor: f64,
    pub fit_window: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            base_factor: 100.0,
            count: 12,
            level_factor: 4.0,
            fit_window: 5,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_factor > 1.0 && self.base_factor.is_finite()) {
            return Err(Error::StepControl("threshold base_factor must exceed 1"));
        }
        if !(self.level_factor > 1.0 && self.level_factor.is_finite()) {
            return Err(Error::StepControl("threshold level_factor must exceed 1"));
        }
        if self.count < 3 {
            return Err(Error::StepControl("need at least 3 threshold levels"));
        }
        if self.fit_window < 3 || self.fit_window > self.count {
            return Err(Error::StepControl("fit_window must lie in 3..=count"));
        }
        Ok(())
    }

    pub fn levels(&self, reference: f64) -> Vec<f64> {
        if !(reference > 0.0) {
            return Vec::new();
        }
        (0..self.count)
            .map(|j| self.base_factor * reference * pow(self.level_factor, j as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LifespanStatus {
    #[cfg_attr(feature = "serde", serde(rename = "blow-up-detected"))]
    BlowupDetected,
    SurvivedToHorizon,
    /// `dt_min` reached before the threshold sequence completed.
    Stalled,
}

impl LifespanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            LifespanStatus::BlowupDetected => "blow-up-detected",
            LifespanStatus::SurvivedToHorizon => "survived-to-horizon",
            LifespanStatus::Stalled => "stalled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "blow-up-detected" => Some(LifespanStatus::BlowupDetected),
            "survived-to-horizon" => Some(LifespanStatus::SurvivedToHorizon),
            "stalled" => Some(LifespanStatus::Stalled),
            _ => None,
        }
    }
}

/// Outcome of a run with respect to finite-time blow-up.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LifespanEstimate {
    pub status: LifespanStatus,
    /// Extrapolated blow-up time, present iff blow-up was detected.
    pub t_star_est: Option<f64>,
    /// Crossings of the `Y` levels.
    pub thresholds_hit: Vec<Crossing>,
    /// Crossings of the `‖psi‖_p` levels `‖psi(0)‖_p * sqrt(level_factor)^{j+1}`.
    pub lp_thresholds_hit: Vec<Crossing>,
    pub extrapolation_residual: Option<f64>,
    pub extrapolation: Option<LifespanFit>,
    pub last_y: f64,
    pub last_t: f64,
    pub steps: usize,
}

/// Spectral state plus the scratch space and flow cache one run needs.
struct Stepper<'a> {
    basis: &'a SpectralBasis,
    coeffs: Coefficients,
    flows: [Option<LinearFlow>; 2],
    next_slot: usize,
    grid: Vec<f64>,
    spec: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(basis: &'a SpectralBasis, coeffs: &Coefficients) -> Self {
        Stepper {
            basis,
            coeffs: *coeffs,
            flows: [None, None],
            next_slot: 0,
            grid: Vec::with_capacity(basis.len()),
            spec: Vec::with_capacity(basis.len()),
        }
    }

    fn flow(&mut self, tau: f64) -> usize {
        if let Some(i) = self
            .flows
            .iter()
            .position(|f| f.as_ref().is_some_and(|f| f.tau == tau))
        {
            return i;
        }
        let slot = self.next_slot;
        self.flows[slot] = Some(LinearFlow::new(
            self.basis.eigenvalues(),
            self.coeffs.a(),
            self.coeffs.b(),
            tau,
        ));
        self.next_slot = 1 - slot;
        slot
    }

    fn advance(&mut self, c: &mut [f64], d: &mut [f64], dt: f64, mode: StepMode) {
        match mode {
            StepMode::LinearOnly => {
                let i = self.flow(dt);
                self.flows[i].as_ref().unwrap().apply(c, d);
            }
            StepMode::Full => {
                let i = self.flow(0.5 * dt);
                self.flows[i].as_ref().unwrap().apply(c, d);
                self.basis.inverse_into(c, &mut self.grid);
                let p = self.coeffs.p();
                self.grid.iter_mut().for_each(|u| *u = source_term(*u, p));
                self.basis.forward_into(&self.grid, &mut self.spec);
                for (dk, fk) in d.iter_mut().zip(&self.spec) {
                    *dk += dt * fk;
                }
                let i = self.flow(0.5 * dt);
                self.flows[i].as_ref().unwrap().apply(c, d);
            }
        }
    }

    /// `Y` from coefficients via the discrete Parseval identity.
    fn y(&self, c: &[f64], d: &[f64]) -> f64 {
        self.basis.grad_norm_sq_coeffs(c) + self.basis.l2_norm_sq_coeffs(d)
    }

    fn lp_norm(&mut self, c: &[f64]) -> f64 {
        self.basis.inverse_into(c, &mut self.grid);
        lq_norm_weighted(&self.grid, self.coeffs.p(), self.basis.weight())
    }
}

fn check_sizes(state: &State, basis: &SpectralBasis) -> Result<()> {
    for f in [&state.psi, &state.psi_t] {
        if f.len() != basis.len() {
            return Err(Error::SizeMismatch {
                expected: basis.len(),
                found: f.len(),
            });
        }
    }
    Ok(())
}

/// Advances `state` by one splitting step of size `dt`.
pub fn step(
    state: &State,
    coeffs: &Coefficients,
    basis: &SpectralBasis,
    dt: f64,
    mode: StepMode,
) -> Result<State> {
    check_sizes(state, basis)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let mut c = basis.forward(&state.psi)?;
    let mut d = basis.forward(&state.psi_t)?;
    Stepper::new(basis, coeffs).advance(&mut c, &mut d, dt, mode);
    let out = State {
        psi: basis.inverse(&c)?,
        psi_t: basis.inverse(&d)?,
        t: state.t + dt,
    };
    if !out.is_finite() {
        return Err(Error::BlowupOverflow { t: out.t });
    }
    Ok(out)
}

/// `‖psi‖_p` grows more slowly than `Y^{1/2}` once the solution
/// concentrates, so its levels start right above the initial norm.
pub(crate) fn lp_levels(thresholds: &Thresholds, lp0: f64) -> Vec<f64> {
    if !(lp0 > 0.0) {
        return Vec::new();
    }
    let r = libm::sqrt(thresholds.level_factor);
    (1..=thresholds.count)
        .map(|j| lp0 * pow(r, j as f64))
        .collect()
}

/// Tracks crossings of one geometric level sequence.
///
/// Crossing times are interpolated linearly in `value^{-k}` between the two
/// bracketing steps; near a power-law blow-up that quantity is close to
/// linear in time.
#[derive(Debug, Clone)]
pub(crate) struct LevelTracker {
    levels: Vec<f64>,
    exponent: f64,
    hits: Vec<Crossing>,
}

impl LevelTracker {
    pub fn new(levels: Vec<f64>, exponent: f64) -> Self {
        LevelTracker {
            levels,
            exponent,
            hits: Vec::new(),
        }
    }

    pub fn update(&mut self, t0: f64, v0: f64, t1: f64, v1: f64) {
        while let Some(&level) = self.levels.get(self.hits.len()) {
            if !(v1 >= level) {
                break;
            }
            let t = if v0 >= level || !(v0 > 0.0) || !v1.is_finite() {
                t1
            } else {
                let (z0, z1, zl) = (
                    pow(v0, -self.exponent),
                    pow(v1, -self.exponent),
                    pow(level, -self.exponent),
                );
                let frac = ((z0 - zl) / (z0 - z1)).clamp(0.0, 1.0);
                t0 + frac * (t1 - t0)
            };
            // keep crossing times strictly increasing
            let t = match self.hits.last() {
                Some(prev) if t <= prev.t => prev.t + 1e-15 * prev.t.abs().max(1e-300),
                _ => t,
            };
            self.hits.push(Crossing { level, t });
        }
    }

    pub fn complete(&self) -> bool {
        !self.levels.is_empty() && self.hits.len() == self.levels.len()
    }

    pub fn into_hits(self) -> Vec<Crossing> {
        self.hits
    }
}

pub(crate) fn finish_estimate(
    status: LifespanStatus,
    fit_window: usize,
    y_hits: Vec<Crossing>,
    lp_hits: Vec<Crossing>,
    last_y: f64,
    last_t: f64,
    steps: usize,
) -> LifespanEstimate {
    let mut est = LifespanEstimate {
        status,
        t_star_est: None,
        thresholds_hit: y_hits,
        lp_thresholds_hit: lp_hits,
        extrapolation_residual: None,
        extrapolation: None,
        last_y,
        last_t,
        steps,
    };
    if status == LifespanStatus::BlowupDetected {
        let hits = &est.thresholds_hit;
        match estimate_lifespan(&hits[hits.len().saturating_sub(fit_window)..]) {
            Ok(fit) => {
                est.t_star_est = Some(fit.t_star);
                est.extrapolation_residual = Some(fit.residual);
                est.extrapolation = Some(fit);
            }
            Err(_) => est.status = LifespanStatus::Stalled,
        }
    }
    est
}

/// Runs the adaptive solver until the horizon, a `dt_min` stall, or the top
/// blow-up level is crossed.
pub fn integrate(
    state0: &State,
    coeffs: &Coefficients,
    basis: &SpectralBasis,
    control: &StepControl,
    thresholds: &Thresholds,
    rho: f64,
) -> Result<(Trajectory, LifespanEstimate)> {
    control.validate()?;
    thresholds.validate()?;
    check_sizes(state0, basis)?;
    if !state0.is_finite() {
        return Err(Error::BlowupOverflow { t: state0.t });
    }

    let p = coeffs.p();
    let mut stepper = Stepper::new(basis, coeffs);
    let mut c = basis.forward(&state0.psi)?;
    let mut d = basis.forward(&state0.psi_t)?;
    let mut traj = Trajectory::new(TrajectoryMeta::new(coeffs, rho));

    let mut t = state0.t;
    let t_end = state0.t + control.t_max;
    let mut y = stepper.y(&c, &d);
    let mut lp = lq_norm_weighted(&state0.psi, p, basis.weight());
    let z_exp = (p - 2.0) / 2.0;
    let mut y_track = LevelTracker::new(thresholds.levels(y), z_exp);
    let mut lp_track = LevelTracker::new(lp_levels(thresholds, lp), p - 2.0);

    let mut dt = control.dt0;
    let record = |traj: &mut Trajectory, c: &[f64], d: &[f64], t: f64, dt: f64| -> Result<()> {
        let state = State {
            psi: basis.inverse(c)?,
            psi_t: basis.inverse(d)?,
            t,
        };
        let mut s = sample_parts(&state, c, d, coeffs, basis);
        s.dt = dt;
        traj.push(s);
        Ok(())
    };
    record(&mut traj, &c, &d, t, dt)?;

    let interval = control.sample_interval;
    let mut sample_idx: u64 = 1;
    let sample_time = |k: u64| state0.t + k as f64 * interval;
    let mut steps = 0usize;
    let mut last_h = dt;
    let (mut c_new, mut d_new) = (vec![0.0; c.len()], vec![0.0; d.len()]);

    let status = loop {
        let eps = 1e-12 * interval;
        if t >= t_end - eps {
            break LifespanStatus::SurvivedToHorizon;
        }
        let next_sample = sample_time(sample_idx);
        let h = dt
            .min(next_sample - t)
            .min(t_end - t)
            .max(f64::MIN_POSITIVE);
        c_new.copy_from_slice(&c);
        d_new.copy_from_slice(&d);
        stepper.advance(&mut c_new, &mut d_new, h, StepMode::Full);
        let y_new = stepper.y(&c_new, &d_new);
        let rel = if y > 0.0 {
            (y_new - y) / y
        } else if y_new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if !y_new.is_finite() || rel > control.growth_ratio {
            if h > control.dt_min {
                dt = (0.5 * h).max(control.dt_min);
                continue;
            }
            break LifespanStatus::Stalled;
        }

        let mut t_new = t + h;
        let target = next_sample.min(t_end);
        if (target - t_new).abs() <= 1e-9 * interval {
            t_new = target;
        }
        y_track.update(t, y, t_new, y_new);
        let lp_new = stepper.lp_norm(&c_new);
        lp_track.update(t, lp, t_new, lp_new);
        core::mem::swap(&mut c, &mut c_new);
        core::mem::swap(&mut d, &mut d_new);
        t = t_new;
        y = y_new;
        lp = lp_new;
        last_h = h;
        steps += 1;

        if t >= next_sample - 1e-9 * interval {
            record(&mut traj, &c, &d, t, h)?;
            while sample_time(sample_idx) <= t + 1e-9 * interval {
                sample_idx += 1;
            }
        }
        if y_track.complete() {
            break LifespanStatus::BlowupDetected;
        }
        if h == dt && rel < 0.25 * control.growth_ratio {
            dt = (2.0 * dt).min(control.dt0);
        }
    };
    if traj.last().is_some_and(|s| s.t < t) {
        record(&mut traj, &c, &d, t, last_h)?;
    }
    let est = finish_estimate(
        status,
        thresholds.fit_window,
        y_track.into_hits(),
        lp_track.into_hits(),
        y,
        t,
        steps,
    );
    Ok((traj, est))
}
