//! File formats: trajectory and sweep CSV, profile files, JSON reports.

use std::fs;
use std::path::Path;

use serde::Serialize;

use sdwave_core::functionals::{FunctionalSample, Trajectory, TrajectoryMeta};
use sdwave_core::integrator::LifespanStatus;
use sdwave_core::model::{ProfilePair, Provenance};
use sdwave_core::spectral::SpectralBasis;
use sdwave_core::sweep::SweepRow;

use crate::error::{CliError, CliResult};

pub const TRAJECTORY_HEADER: [&str; 11] = [
    "t",
    "dt",
    "Y",
    "Z",
    "lp_norm",
    "l2p2_norm",
    "dissipation",
    "dissipation_floor",
    "source_pairing",
    "grad_norm",
    "vel_norm",
];

pub const SWEEP_HEADER: [&str; 6] = ["rho", "status", "t_star_est", "y0", "z0", "t_lower_bound"];

/// 17 significant digits, locale independent.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Format(format!("{}: {other:?}", path.display())),
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(TRAJECTORY_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for s in traj.samples() {
        let rec = [
            s.t,
            s.dt,
            s.y,
            s.z,
            s.lp_norm,
            s.l2p2_norm,
            s.dissipation,
            s.dissipation_floor,
            s.source_pairing,
            s.grad_norm,
            s.vel_norm,
        ]
        .map(fmt_f64);
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Read a trajectory CSV. `source_abs` is not stored, so it is set to
/// `|source_pairing|`.
pub fn read_trajectory_csv(path: &Path, meta: TrajectoryMeta) -> CliResult<Trajectory> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(CliError::Format(format!(
            "{}: expected header {}",
            path.display(),
            TRAJECTORY_HEADER.join(",")
        )));
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let mut v = [0.0; 11];
        for (k, field) in rec.iter().enumerate().take(11) {
            v[k] = field.trim().parse().map_err(|_| {
                CliError::Format(format!(
                    "{}: row {}: bad number {field:?}",
                    path.display(),
                    line + 2
                ))
            })?;
        }
        if rec.len() != 11 {
            return Err(CliError::Format(format!(
                "{}: row {} has {} fields",
                path.display(),
                line + 2,
                rec.len()
            )));
        }
        samples.push(FunctionalSample {
            t: v[0],
            dt: v[1],
            y: v[2],
            z: v[3],
            lp_norm: v[4],
            l2p2_norm: v[5],
            dissipation: v[6],
            dissipation_floor: v[7],
            source_pairing: v[8],
            source_abs: v[8].abs(),
            grad_norm: v[9],
            vel_norm: v[10],
        });
    }
    Ok(Trajectory::from_samples(samples, meta)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(SWEEP_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let rec = [
            fmt_f64(r.rho),
            r.status.as_str().to_string(),
            opt(r.t_star_est),
            fmt_f64(r.y0),
            fmt_f64(r.z0),
            fmt_f64(r.t_lower_bound),
        ];
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `(rho, status, t_star_est)` triples from a sweep CSV.
pub fn read_sweep_csv(path: &Path) -> CliResult<Vec<(f64, LifespanStatus, Option<f64>)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let bad = |what: &str| CliError::Format(format!("{}: {what}", path.display()));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let rho = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad rho"))?;
        let status = rec
            .get(1)
            .and_then(LifespanStatus::parse)
            .ok_or_else(|| bad("bad status"))?;
        let t = match rec.get(2) {
            Some("") | None => None,
            Some(s) => Some(s.parse().map_err(|_| bad("bad t_star_est"))?),
        };
        out.push((rho, status, t));
    }
    Ok(out)
}

/// Profile file: a header line `dim n_grid length [length_y]`, then one
/// `phi h` pair per grid node in storage order. `#` starts a comment.
pub fn read_profile_file(path: &Path, basis: &SpectralBasis) -> CliResult<ProfilePair> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |what: String| CliError::Format(format!("{}: {what}", path.display()));
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad("empty profile file".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let dom = basis.domain();
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| bad(format!("bad header field {s:?}")))
    };
    if head.len() != 2 + dom.dim {
        return Err(bad(format!(
            "header must be `dim n_grid` plus {} length(s)",
            dom.dim
        )));
    }
    let (dim, n_grid) = (parse_usize(head[0])?, parse_usize(head[1])?);
    let lengths_match = head[2..].iter().zip(&dom.lengths).all(|(s, &l)| {
        crate::config::Length::Text(s.to_string())
            .value()
            .is_ok_and(|v| (v - l).abs() <= 1e-12 * l)
    });
    if dim != dom.dim || n_grid != dom.n_grid || !lengths_match {
        return Err(bad(format!(
            "header {header:?} does not match the configured domain (dim {}, n_grid {}, lengths {:?})",
            dom.dim, dom.n_grid, dom.lengths
        )));
    }
    let n = basis.len();
    let (mut phi, mut h) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (lineno, l) in lines {
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(format!("line {lineno}: expected two numbers")))?;
        if vals.len() != 2 {
            return Err(bad(format!("line {lineno}: expected two numbers")));
        }
        phi.push(vals[0]);
        h.push(vals[1]);
    }
    if phi.len() != n {
        return Err(bad(format!("expected {n} data lines, found {}", phi.len())));
    }
    Ok(ProfilePair::new(
        phi,
        h,
        Provenance::File(path.display().to_string()),
        basis,
    )?)
}

pub fn write_profile_file(
    path: &Path,
    basis: &SpectralBasis,
    profiles: &ProfilePair,
) -> CliResult<()> {
    let dom = basis.domain();
    let mut out = format!("{} {}", dom.dim, dom.n_grid);
    for l in &dom.lengths {
        out.push(' ');
        out.push_str(&fmt_f64(*l));
    }
    out.push('\n');
    for (a, b) in profiles.phi().iter().zip(profiles.h()) {
        out.push_str(&format!("{} {}\n", fmt_f64(*a), fmt_f64(*b)));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json_value(path: &Path) -> CliResult<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}
