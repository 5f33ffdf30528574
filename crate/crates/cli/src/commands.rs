use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use sdwave_core::functionals::{z0_prediction, TrajectoryMeta};
use sdwave_core::integrator::{integrate, LifespanEstimate};
use sdwave_core::model::scale_initial_state;
use sdwave_core::sweep::{
    finalize_sweep, run_sweep_point, AmplitudeGrid, SweepPoint, SweepResult, SweepSetup,
};
use sdwave_core::theory::{
    check_chain, estimate_constants, measured_chain_constant, predicted_lifespan_floor,
    ConstantEstimates, InequalityReport,
};

use crate::config::Setup;
use crate::error::{CliError, CliResult};
use crate::io::{
    ensure_dir, read_json_value, read_trajectory_csv, write_json, write_sweep_csv,
    write_trajectory_csv,
};
use crate::svg::sweep_chart;

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl Overrides {
    pub fn out_dir(&self, setup: &Setup) -> PathBuf {
        self.out
            .clone()
            .or_else(|| setup.config.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("sdwave-out"))
    }

    fn seed(&self, setup: &Setup) -> u64 {
        self.seed.unwrap_or(setup.config.constants.seed)
    }

    fn jobs(&self, setup: &Setup) -> usize {
        self.jobs.unwrap_or(setup.config.amplitude.jobs).max(1)
    }
}

pub fn constants_for(setup: &Setup, seed: u64) -> CliResult<ConstantEstimates> {
    let c = &setup.config.constants;
    Ok(estimate_constants(
        &setup.basis,
        setup.coeffs.p(),
        c.budget,
        c.starts,
        seed,
    )?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub rho: f64,
    pub y0: f64,
    pub z0: f64,
    pub z0_prediction: f64,
    pub t_lower_bound: f64,
    pub lifespan: LifespanEstimate,
    pub chain: Option<InequalityReport>,
    pub constants: ConstantEstimates,
}

pub fn cmd_simulate(setup: &Setup, ov: &Overrides) -> CliResult<(SimulateReport, String)> {
    let rho = setup.single_rho()?;
    let out = ov.out_dir(setup);
    ensure_dir(&out)?;
    let constants = constants_for(setup, ov.seed(setup))?;
    let state0 = scale_initial_state(&setup.profiles, rho)?;
    let (mut traj, lifespan) = integrate(
        &state0,
        &setup.coeffs,
        &setup.basis,
        &setup.control,
        &setup.thresholds,
        rho,
    )?;
    traj.meta.seed = Some(ov.seed(setup));
    write_trajectory_csv(&out.join("trajectory.csv"), &traj)?;
    let first = traj
        .first()
        .copied()
        .ok_or(CliError::Format("empty trajectory".into()))?;
    let chain = check_chain(&traj, &constants, Some(&lifespan)).ok();
    let report = SimulateReport {
        rho,
        y0: first.y,
        z0: first.z,
        z0_prediction: z0_prediction(&setup.profiles, &setup.basis, rho, setup.coeffs.p())?,
        t_lower_bound: predicted_lifespan_floor(&setup.profiles, &setup.basis, rho, &constants)?,
        lifespan,
        chain,
        constants,
    };
    write_json(&out.join("simulate.json"), &report)?;
    let summary = format!(
        "status = {}\nt_star_est = {}\nt_lower_bound = {:?}\nsamples = {}\n",
        report.lifespan.status.as_str(),
        report
            .lifespan
            .t_star_est
            .map(|t| format!("{t:?}"))
            .unwrap_or_else(|| "none".into()),
        report.t_lower_bound,
        traj.len()
    );
    Ok((report, summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub grid: AmplitudeGrid,
    pub result: SweepResult,
    pub constants: ConstantEstimates,
    /// `t_last_threshold` per row, beside the extrapolated `t_star_est`.
    pub t_last_threshold: Vec<Option<f64>>,
}

pub fn run_sweep(setup: &Setup, seed: u64, jobs: usize) -> CliResult<SweepReport> {
    let grid = setup.grid();
    let constants = constants_for(setup, seed)?;
    let core_setup = SweepSetup {
        basis: &setup.basis,
        coeffs: &setup.coeffs,
        profiles: &setup.profiles,
        control: setup.control,
        thresholds: setup.thresholds,
        constants: &constants,
    };
    let rhos = grid.values();
    let points: Vec<SweepPoint> = if jobs <= 1 {
        rhos.iter()
            .map(|&r| run_sweep_point(&core_setup, r))
            .collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| {
            rhos.par_iter()
                .map(|&r| run_sweep_point(&core_setup, r))
                .collect::<Result<_, _>>()
        })?
    };
    let (result, constants) =
        finalize_sweep(&core_setup, &points, setup.config.amplitude.fit_upper_half)?;
    let t_last_threshold = result.rows.iter().map(|r| r.t_last_threshold).collect();
    Ok(SweepReport {
        grid,
        result,
        constants,
        t_last_threshold,
    })
}

pub fn cmd_sweep(setup: &Setup, ov: &Overrides) -> CliResult<(SweepReport, String)> {
    let out = ov.out_dir(setup);
    ensure_dir(&out)?;
    let report = run_sweep(setup, ov.seed(setup), ov.jobs(setup))?;
    write_sweep_csv(&out.join("sweep.csv"), &report.result.rows)?;
    write_json(&out.join("sweep.json"), &report)?;
    if setup.config.output.svg {
        let path = out.join("sweep.svg");
        std::fs::write(&path, sweep_chart(&report.result)).map_err(|e| CliError::io(&path, e))?;
    }
    let mut summary = String::from("rho,status,t_star_est,t_lower_bound\n");
    for r in &report.result.rows {
        summary.push_str(&format!(
            "{:?},{},{},{:?}\n",
            r.rho,
            r.status.as_str(),
            r.t_star_est.map(|t| format!("{t:?}")).unwrap_or_default(),
            r.t_lower_bound
        ));
    }
    match &report.result.fit {
        Some(f) => summary.push_str(&format!(
            "slope = {:?} (target {:?}), r2 = {:?}, floor holds = {}\n",
            f.slope, f.target_slope, f.r2, f.floor_holds
        )),
        None => summary.push_str("fit: fewer than 3 blow-up rows\n"),
    }
    Ok((report, summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub trajectory: String,
    pub chain: InequalityReport,
    pub measured_chain_constant: f64,
    pub constants: ConstantEstimates,
}

pub fn cmd_check(
    setup: &Setup,
    ov: &Overrides,
    trajectory: &Path,
    lifespan: Option<&Path>,
) -> CliResult<(CheckReport, String)> {
    let out = ov.out_dir(setup);
    ensure_dir(&out)?;
    let rho = setup.single_rho().unwrap_or(f64::NAN);
    let meta = TrajectoryMeta {
        seed: Some(ov.seed(setup)),
        ..TrajectoryMeta::new(&setup.coeffs, rho)
    };
    let traj = read_trajectory_csv(trajectory, meta)?;
    let lifespan: Option<LifespanEstimate> = match lifespan {
        Some(path) => {
            let v = read_json_value(path)?;
            let v = v.get("lifespan").cloned().unwrap_or(v);
            Some(serde_json::from_value(v).map_err(|e| {
                CliError::Format(format!("{}: not a lifespan report: {e}", path.display()))
            })?)
        }
        None => None,
    };
    let measured = measured_chain_constant(&traj);
    let constants = constants_for(setup, ov.seed(setup))?.with_measured(measured);
    let chain = check_chain(&traj, &constants, lifespan.as_ref())?;
    let report = CheckReport {
        trajectory: trajectory.display().to_string(),
        chain,
        measured_chain_constant: measured,
        constants,
    };
    write_json(&out.join("check.json"), &report)?;
    let summary = format!(
        "identity_residual = {:?}\ndissipation_min = {:?}\nhoelder_margin = {:?}\nscalar_sup = {:?}\n\
         z_margin = {:?}\nt_lower_bound = {:?}\nt_bound_satisfied = {}\n",
        chain.identity_residual,
        chain.dissipation_min,
        chain.hoelder_margin,
        chain.scalar_sup,
        chain.z_margin,
        chain.t_lower_bound,
        chain.t_bound_satisfied
    );
    Ok((report, summary))
}

pub fn cmd_constants(setup: &Setup, ov: &Overrides) -> CliResult<(ConstantEstimates, String)> {
    let out = ov.out_dir(setup);
    ensure_dir(&out)?;
    let c = constants_for(setup, ov.seed(setup))?;
    write_json(&out.join("constants.json"), &c)?;
    let summary = format!(
        "C_p = {:?}\nC_2p2 = {:?}\nC_chain = {:?}\nC_final = {:?}\n",
        c.c_p.working, c.c_2p2.working, c.c_chain, c.c_final
    );
    Ok((c, summary))
}

/// `lambda_1` and the lowest `rows` modes sorted by eigenvalue.
pub fn cmd_basis(setup: &Setup, rows: usize) -> String {
    let b = &setup.basis;
    let mut idx: Vec<usize> = (0..b.len()).collect();
    idx.sort_by(|&i, &j| {
        b.eigenvalues()[i]
            .total_cmp(&b.eigenvalues()[j])
            .then(i.cmp(&j))
    });
    let mut s = format!("lambda_1 = {:?}\nmodes = {}\n", b.lambda_1(), b.len());
    s.push_str(if b.dim() == 1 {
        "rank,k,lambda\n"
    } else {
        "rank,kx,ky,lambda\n"
    });
    for (rank, &i) in idx.iter().take(rows).enumerate() {
        let (kx, ky) = b.mode_numbers(i);
        let lam = b.eigenvalues()[i];
        match b.dim() {
            1 => s.push_str(&format!("{},{kx},{lam:?}\n", rank + 1)),
            _ => s.push_str(&format!("{},{kx},{ky},{lam:?}\n", rank + 1)),
        }
    }
    s
}
