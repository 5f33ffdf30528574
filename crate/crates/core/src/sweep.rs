//! Amplitude sweeps and the log-log fit of blow-up time against amplitude.

use alloc::boxed::Box;
use alloc::vec::Vec;

use libm::{log, pow};

use crate::error::{Error, Result};
use crate::functionals::Trajectory;
use crate::integrator::{
    finish_estimate, integrate, LevelTracker, LifespanEstimate, LifespanStatus, StepControl,
    Thresholds,
};
use crate::model::{scale_initial_state, Coefficients, ProfilePair};
use crate::spectral::SpectralBasis;
use crate::theory::{measured_chain_constant, predicted_lifespan_floor, ConstantEstimates};

/// Geometric amplitude grid `rho_min * factor^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AmplitudeGrid {
    pub rho_min: f64,
    pub factor: f64,
    pub count: usize,
}

impl AmplitudeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_min > 0.0 && self.rho_min.is_finite()) {
            return Err(Error::NonpositiveAmplitude(self.rho_min));
        }
        if self.count == 0 {
            return Err(Error::InsufficientRows(0));
        }
        if self.count > 1 && !(self.factor > 1.0 && self.factor.is_finite()) {
            return Err(Error::StepControl("amplitude factor must exceed 1"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.rho_min * pow(self.factor, k as f64))
            .collect()
    }
}

/// Everything one sweep needs apart from the amplitude.
#[derive(Debug, Clone)]
pub struct SweepSetup<'a> {
    pub basis: &'a SpectralBasis,
    pub coeffs: &'a Coefficients,
    pub profiles: &'a ProfilePair,
    pub control: StepControl,
    pub thresholds: Thresholds,
    pub constants: &'a ConstantEstimates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub rho: f64,
    pub status: LifespanStatus,
    pub t_star_est: Option<f64>,
    /// Time of the last threshold crossing, logged beside the extrapolation.
    pub t_last_threshold: Option<f64>,
    pub y0: f64,
    pub z0: f64,
    pub t_lower_bound: f64,
}

impl SweepRow {
    fn blowup_time(&self) -> Option<f64> {
        match self.status {
            LifespanStatus::BlowupDetected => self.t_star_est,
            _ => None,
        }
    }

    pub fn from_run(
        rho: f64,
        traj: &Trajectory,
        est: &LifespanEstimate,
        t_lower_bound: f64,
    ) -> Result<Self> {
        let first = traj.first().ok_or(Error::InsufficientSamples(0))?;
        Ok(SweepRow {
            rho,
            status: est.status,
            t_star_est: est.t_star_est,
            t_last_threshold: est.thresholds_hit.last().map(|c| c.t),
            y0: first.y,
            z0: first.z,
            t_lower_bound,
        })
    }
}

/// Least-squares fit of `log t_star_est` against `log rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub rows_used: usize,
    pub upper_half: bool,
    /// `-(p-2)`
    pub target_slope: f64,
    /// `|slope - target_slope|`
    pub slope_error: f64,
    /// `min t_star_est * rho^{p-2}` over all blow-up rows.
    pub c0: f64,
    /// `c0` divided by the same product at the largest blow-up amplitude.
    pub floor_ratio_min: f64,
    /// Every blow-up row satisfies `t_star_est >= t_lower_bound`.
    pub floor_holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepResult {
    pub p: f64,
    pub rows: Vec<SweepRow>,
    pub fit: Option<ScalingFit>,
}

impl SweepResult {
    /// Sort rows by amplitude and fit when at least three rows qualify.
    pub fn assemble(mut rows: Vec<SweepRow>, p: f64, upper_half: bool) -> Self {
        rows.sort_by(|x, y| x.rho.total_cmp(&y.rho));
        let fit = fit_scaling(&rows, p, upper_half).ok();
        SweepResult { p, rows, fit }
    }
}

/// One finished run of a sweep: its row (floor from the analysis constants)
/// and the largest `Y'/Y^{p/2}` it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub row: SweepRow,
    pub measured: f64,
}

/// One sweep point: integrate from `(rho phi, rho h)` and summarize.
pub fn run_sweep_point(setup: &SweepSetup<'_>, rho: f64) -> Result<SweepPoint> {
    let wrap = |e: Error| Error::SweepRun {
        rho,
        source: Box::new(e),
    };
    let state0 = scale_initial_state(setup.profiles, rho).map_err(wrap)?;
    let (traj, est) = integrate(
        &state0,
        setup.coeffs,
        setup.basis,
        &setup.control,
        &setup.thresholds,
        rho,
    )
    .map_err(wrap)?;
    let floor = predicted_lifespan_floor(setup.profiles, setup.basis, rho, setup.constants)
        .map_err(wrap)?;
    let row = SweepRow::from_run(rho, &traj, &est, floor).map_err(wrap)?;
    Ok(SweepPoint {
        row,
        measured: measured_chain_constant(&traj),
    })
}

/// Fold the ensemble's measured chain constant into the working constant and
/// recompute every floor with it; input order does not matter.
pub fn finalize_sweep(
    setup: &SweepSetup<'_>,
    points: &[SweepPoint],
    upper_half: bool,
) -> Result<(SweepResult, ConstantEstimates)> {
    let measured = points.iter().map(|pt| pt.measured).fold(0.0, f64::max);
    let constants = setup.constants.with_measured(measured);
    let rows = points
        .iter()
        .map(|pt| {
            let floor =
                predicted_lifespan_floor(setup.profiles, setup.basis, pt.row.rho, &constants)?;
            Ok(SweepRow {
                t_lower_bound: floor,
                ..pt.row
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        SweepResult::assemble(rows, setup.coeffs.p(), upper_half),
        constants,
    ))
}

/// Sequential sweep over the grid; the first failing amplitude aborts it.
pub fn amplitude_sweep(
    setup: &SweepSetup<'_>,
    grid: &AmplitudeGrid,
    upper_half: bool,
) -> Result<(SweepResult, ConstantEstimates)> {
    grid.validate()?;
    let points = grid
        .values()
        .into_iter()
        .map(|rho| run_sweep_point(setup, rho))
        .collect::<Result<Vec<_>>>()?;
    finalize_sweep(setup, &points, upper_half)
}

/// Ordinary least squares on `(log rho, log t_star_est)` over blow-up rows,
/// restricted to the larger half of the (sorted) grid when `upper_half`.
pub fn fit_scaling(rows: &[SweepRow], p: f64, upper_half: bool) -> Result<ScalingFit> {
    let start = if upper_half { rows.len() / 2 } else { 0 };
    let pts: Vec<(f64, f64)> = rows[start..]
        .iter()
        .filter_map(|r| r.blowup_time().map(|t| (log(r.rho), log(t))))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientRows(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|v| v.0).sum::<f64>() / n;
    let my = pts.iter().map(|v| v.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|v| (v.0 - mx) * (v.0 - mx)).sum::<f64>();
    let sxy = pts.iter().map(|v| (v.0 - mx) * (v.1 - my)).sum::<f64>();
    let syy = pts.iter().map(|v| (v.1 - my) * (v.1 - my)).sum::<f64>();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientRows(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = pts
        .iter()
        .map(|v| {
            let r = v.1 - intercept - slope * v.0;
            r * r
        })
        .sum::<f64>();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };

    let blow: Vec<&SweepRow> = rows.iter().filter(|r| r.blowup_time().is_some()).collect();
    let product = |r: &SweepRow| r.blowup_time().unwrap_or(f64::NAN) * pow(r.rho, p - 2.0);
    let c0 = blow
        .iter()
        .map(|r| product(r))
        .fold(f64::INFINITY, f64::min);
    let top = blow
        .iter()
        .max_by(|x, y| x.rho.total_cmp(&y.rho))
        .map(|r| product(r))
        .unwrap_or(f64::NAN);
    let target_slope = -(p - 2.0);
    Ok(ScalingFit {
        slope,
        intercept,
        r2,
        rows_used: pts.len(),
        upper_half,
        target_slope,
        slope_error: (slope - target_slope).abs(),
        c0,
        floor_ratio_min: c0 / top,
        floor_holds: blow
            .iter()
            .all(|r| r.blowup_time().is_some_and(|t| t >= r.t_lower_bound)),
    })
}

/// The comparison problem `y' = c y^{p/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarOde {
    pub c: f64,
    pub p: f64,
}

impl ScalarOde {
    /// Closed-form blow-up time `2 y0^{-(p-2)/2} / ((p-2) c)`.
    pub fn blowup_time(&self, y0: f64) -> f64 {
        2.0 * pow(y0, -0.5 * (self.p - 2.0)) / ((self.p - 2.0) * self.c)
    }

    fn rhs(&self, y: f64) -> f64 {
        self.c * pow(y, 0.5 * self.p)
    }

    /// Brute-force RK4 with steps limiting the relative change of `y` to
    /// `rel_step`, threshold tracking and the same extrapolation as the PDE
    /// driver.
    pub fn integrate(
        &self,
        y0: f64,
        thresholds: &Thresholds,
        rel_step: f64,
    ) -> Result<LifespanEstimate> {
        thresholds.validate()?;
        if !(y0 > 0.0 && self.c > 0.0 && self.p > 2.0) {
            return Err(Error::NonpositiveY(y0));
        }
        let levels = thresholds.levels(y0);
        let mut track = LevelTracker::new(levels, 0.5 * (self.p - 2.0));
        let (mut t, mut y, mut steps) = (0.0, y0, 0usize);
        while !track.complete() {
            let h = rel_step * y / self.rhs(y);
            let k1 = self.rhs(y);
            let k2 = self.rhs(y + 0.5 * h * k1);
            let k3 = self.rhs(y + 0.5 * h * k2);
            let k4 = self.rhs(y + h * k3);
            let y_new = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !y_new.is_finite() {
                break;
            }
            track.update(t, y, t + h, y_new);
            t += h;
            y = y_new;
            steps += 1;
        }
        let status = if track.complete() {
            LifespanStatus::BlowupDetected
        } else {
            LifespanStatus::Stalled
        };
        let est = finish_estimate(
            status,
            thresholds.fit_window,
            track.into_hits(),
            Vec::new(),
            y,
            t,
            steps,
        );
        Ok(est)
    }

    /// Sweep rows for `y(0) = kappa rho^2` from the brute-force integration.
    pub fn sweep(
        &self,
        kappa: f64,
        rhos: &[f64],
        thresholds: &Thresholds,
        rel_step: f64,
    ) -> Result<Vec<SweepRow>> {
        rhos.iter()
            .map(|&rho| {
                let y0 = kappa * rho * rho;
                let est = self.integrate(y0, thresholds, rel_step)?;
                Ok(SweepRow {
                    rho,
                    status: est.status,
                    t_star_est: est.t_star_est,
                    t_last_threshold: est.thresholds_hit.last().map(|c| c.t),
                    y0,
                    z0: pow(y0, -0.5 * (self.p - 2.0)),
                    t_lower_bound: self.blowup_time(y0),
                })
            })
            .collect()
    }
}
