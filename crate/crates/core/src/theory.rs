//! Step-by-step checks of the energy argument along computed trajectories,
//! and explicit estimates of the constants it uses.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, pow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functionals::{z0_prediction, Trajectory};
use crate::integrator::{LifespanEstimate, LifespanStatus};
use crate::model::ProfilePair;
use crate::spectral::{lq_norm_weighted, SpectralBasis};

/// Inflation applied to optimizer values before they are used as constants.
pub const SAFETY_FACTOR: f64 = 1.05;

/// Number of random starts used by [`estimate_embedding_constant`].
pub const DEFAULT_STARTS: usize = 8;

/// Result of maximizing `‖u‖_q / ‖∇u‖₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmbeddingEstimate {
    pub q: f64,
    /// Best ratio found; a lower bound on the true constant.
    pub optimum: f64,
    /// `SAFETY_FACTOR * optimum`
    pub working: f64,
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
}

/// Whether `H¹₀ → L^q` is available for the chain in dimension `dim`.
pub fn embedding_admissible(q: f64, dim: usize) -> bool {
    if !(q >= 2.0) || !q.is_finite() {
        return false;
    }
    dim <= 2 || q <= 2.0 * dim as f64 / (dim as f64 - 2.0)
}

struct Ratio {
    s: f64,
    grad: Vec<f64>,
}

fn eval_ratio(
    basis: &SpectralBasis,
    c: &[f64],
    q: f64,
    u: &mut Vec<f64>,
    g: &mut Vec<f64>,
) -> Ratio {
    basis.inverse_into(c, u);
    let w = basis.weight();
    let s = w * u.iter().map(|v| pow(fabs(*v), q)).sum::<f64>();
    g.clear();
    g.extend(u.iter().map(|&v| {
        if v == 0.0 {
            0.0
        } else {
            pow(fabs(v), q - 2.0) * v
        }
    }));
    let mut grad = Vec::new();
    basis.forward_into(g, &mut grad);
    Ratio { s, grad }
}

/// Rescale so that `‖∇u‖₂ = 1`.
fn normalize(basis: &SpectralBasis, c: &mut [f64]) -> bool {
    let g = basis.grad_norm_sq_coeffs(c);
    if !(g > 0.0) || !g.is_finite() {
        return false;
    }
    let inv = 1.0 / libm::sqrt(g);
    c.iter_mut().for_each(|v| *v *= inv);
    true
}

fn ascend(
    basis: &SpectralBasis,
    q: f64,
    mut c: Vec<f64>,
    mask: &[bool],
    budget: usize,
) -> (f64, usize) {
    let lam = basis.eigenvalues();
    let (mut u, mut g) = (Vec::new(), Vec::new());
    if !normalize(basis, &mut c) {
        return (0.0, 0);
    }
    let mut cur = eval_ratio(basis, &c, q, &mut u, &mut g);
    let mut eta = 1.0;
    let mut trial = vec![0.0; c.len()];
    let mut used = 0;
    for _ in 0..budget {
        used += 1;
        // gradient of log R preconditioned by the inverse Laplacian; eta = 1
        // is the normalized nonlinear power iteration
        let dir: Vec<f64> = (0..c.len())
            .map(|k| {
                if mask[k] {
                    cur.grad[k] / (lam[k] * cur.s) - c[k]
                } else {
                    0.0
                }
            })
            .collect();
        let mut accepted = false;
        for _ in 0..40 {
            for k in 0..c.len() {
                trial[k] = c[k] + eta * dir[k];
            }
            if normalize(basis, &mut trial) {
                let next = eval_ratio(basis, &trial, q, &mut u, &mut g);
                if next.s > cur.s {
                    let gain = (next.s - cur.s) / cur.s;
                    core::mem::swap(&mut c, &mut trial);
                    cur = next;
                    accepted = gain > 1e-15;
                    eta = (2.0 * eta).min(4.0);
                    break;
                }
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (pow(cur.s, 1.0 / q), used)
}

/// Estimate `sup ‖u‖_q / ‖∇u‖₂` over fields band-limited to the lower half of
/// the mode range, by projected gradient ascent from `starts` seeded random
/// starts (start 0 is the first mode). `budget` caps the iterations per
/// start. Ties go to the lowest start index.
pub fn estimate_embedding_constant(
    basis: &SpectralBasis,
    q: f64,
    budget: usize,
    starts: usize,
    seed: u64,
) -> Result<EmbeddingEstimate> {
    let dim = basis.dim();
    if !embedding_admissible(q, dim) {
        return Err(Error::InadmissibleExponent { q, dim });
    }
    if budget == 0 || starts == 0 {
        return Err(Error::StepControl(
            "embedding estimate needs a positive budget and start count",
        ));
    }
    let n = basis.len();
    let kmax = (basis.domain().n_grid / 2).max(2);
    let mask: Vec<bool> = (0..n)
        .map(|i| {
            let (kx, ky) = basis.mode_numbers(i);
            kx <= kmax && ky <= kmax
        })
        .collect();
    let lam = basis.eigenvalues();
    let mut best = 0.0;
    let mut iterations = 0;
    for s in 0..starts {
        let mut c = vec![0.0; n];
        if s == 0 {
            c[0] = 1.0;
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            for k in 0..n {
                let r: f64 = rng.random();
                if mask[k] {
                    c[k] = (2.0 * r - 1.0) / lam[k];
                }
            }
        }
        let (r, used) = ascend(basis, q, c, &mask, budget);
        iterations += used;
        if r > best {
            best = r;
        }
    }
    Ok(EmbeddingEstimate {
        q,
        optimum: best,
        working: SAFETY_FACTOR * best,
        starts,
        iterations,
        seed,
    })
}

/// Constants of the energy chain for one exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstantEstimates {
    pub p: f64,
    /// `H¹₀ → L^p`
    pub c_p: EmbeddingEstimate,
    /// `H¹₀ → L^{2p-2}`
    pub c_2p2: EmbeddingEstimate,
    /// Analysis constant `2 * c_2p2^{p-1}` of `Y' <= C Y^{p/2}`.
    pub c_chain: f64,
    /// Largest `Y'/Y^{p/2}` seen on a trajectory ensemble, if measured.
    pub c_measured: Option<f64>,
    /// `max(c_chain, c_measured)`
    pub c_working: f64,
    /// `(p-2)/2 * c_working`, so that `T* >= Z(0)/c_final`.
    pub c_final: f64,
}

impl ConstantEstimates {
    pub fn from_parts(
        p: f64,
        c_p: EmbeddingEstimate,
        c_2p2: EmbeddingEstimate,
        c_measured: Option<f64>,
    ) -> Self {
        let c_chain = 2.0 * pow(c_2p2.working, p - 1.0);
        let c_working = match c_measured {
            Some(m) if m > c_chain => m,
            _ => c_chain,
        };
        ConstantEstimates {
            p,
            c_p,
            c_2p2,
            c_chain,
            c_measured,
            c_working,
            c_final: 0.5 * (p - 2.0) * c_working,
        }
    }

    /// Same analysis constants with a measured chain constant folded in.
    pub fn with_measured(&self, c_measured: f64) -> Self {
        Self::from_parts(self.p, self.c_p, self.c_2p2, Some(c_measured))
    }
}

/// Estimate `C_p` and `C_{2p-2}` for `p`; see [`estimate_embedding_constant`].
pub fn estimate_constants(
    basis: &SpectralBasis,
    p: f64,
    budget: usize,
    starts: usize,
    seed: u64,
) -> Result<ConstantEstimates> {
    let c_p = estimate_embedding_constant(basis, p, budget, starts, seed)?;
    let c_2p2 = estimate_embedding_constant(basis, 2.0 * p - 2.0, budget, starts, seed)?;
    Ok(ConstantEstimates::from_parts(p, c_p, c_2p2, None))
}

/// `Y'` at interior samples by three-point centered differences (exact for
/// quadratics on nonuniform grids).
pub fn centered_derivative(traj: &Trajectory) -> Result<Vec<(usize, f64)>> {
    let s = traj.samples();
    if s.len() < 3 {
        return Err(Error::InsufficientSamples(s.len()));
    }
    Ok((1..s.len() - 1)
        .map(|i| {
            let (h1, h2) = (s[i].t - s[i - 1].t, s[i + 1].t - s[i].t);
            let d = -h2 / (h1 * (h1 + h2)) * s[i - 1].y
                + (h2 - h1) / (h1 * h2) * s[i].y
                + h1 / (h2 * (h1 + h2)) * s[i + 1].y;
            (i, d)
        })
        .collect())
}

/// `max |Y' + 2 dissipation - 2 source_pairing| / max(1, |Y'|)` over
/// interior samples, with `Y'` from [`centered_derivative`].
pub fn energy_identity_residual(traj: &Trajectory) -> Result<f64> {
    let s = traj.samples();
    Ok(centered_derivative(traj)?
        .into_iter()
        .map(|(i, d)| {
            fabs(d + 2.0 * s[i].dissipation - 2.0 * s[i].source_pairing) / d.abs().max(1.0)
        })
        .fold(0.0, f64::max))
}

/// Largest positive `Y'/Y^{p/2}` on the samples, with `Y'` from the identity.
pub fn measured_chain_constant(traj: &Trajectory) -> f64 {
    let p = traj.meta.p;
    traj.samples()
        .iter()
        .filter(|s| s.y > 0.0)
        .map(|s| s.identity_derivative() / pow(s.y, 0.5 * p))
        .fold(0.0, f64::max)
}

/// Per-trajectory verdicts on each step of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InequalityReport {
    pub samples: usize,
    pub identity_residual: f64,
    /// `min(dissipation - floor, floor)` over samples.
    pub dissipation_min: f64,
    /// `min(‖ψ‖_{2p-2}^{p-1}‖ψ_t‖₂ - ∫|ψ|^{p-1}|ψ_t|)` over samples.
    pub hoelder_margin: f64,
    /// `hoelder_margin` divided by the largest Hölder right-hand side.
    pub hoelder_margin_rel: f64,
    /// `sup Y'/Y^{p/2}`
    pub scalar_sup: f64,
    /// `min Z(t) - (Z(0) - (p-2)/2 c_working (t - t0))`
    pub z_margin: f64,
    /// `Z(0)/c_final`
    pub t_lower_bound: f64,
    pub t_star_est: Option<f64>,
    /// `t_star_est / t_lower_bound` for blow-up runs.
    pub bound_ratio: Option<f64>,
    pub t_bound_satisfied: bool,
    pub c_working: f64,
    pub c_final: f64,
}

/// Evaluate every chain step on a trajectory. `lifespan` supplies the blow-up
/// verdict; without it the bound is judged vacuously satisfied.
pub fn check_chain(
    traj: &Trajectory,
    constants: &ConstantEstimates,
    lifespan: Option<&LifespanEstimate>,
) -> Result<InequalityReport> {
    let s = traj.samples();
    let p = traj.meta.p;
    if let Some(bad) = s.iter().find(|x| !(x.y > 0.0)) {
        return Err(Error::DegenerateTrajectory { t: bad.t });
    }
    let identity_residual = energy_identity_residual(traj)?;
    let (t0, z0) = (s[0].t, s[0].z);
    let rate = 0.5 * (p - 2.0) * constants.c_working;

    let mut dissipation_min = f64::INFINITY;
    let mut hoelder_margin = f64::INFINITY;
    let mut hoelder_scale: f64 = 0.0;
    let mut scalar_sup = f64::NEG_INFINITY;
    let mut z_margin = f64::INFINITY;
    for x in s {
        dissipation_min = dissipation_min
            .min(x.dissipation - x.dissipation_floor)
            .min(x.dissipation_floor);
        let rhs = pow(x.l2p2_norm, p - 1.0) * x.vel_norm;
        hoelder_margin = hoelder_margin.min(rhs - x.source_abs);
        hoelder_scale = hoelder_scale.max(rhs);
        scalar_sup = scalar_sup.max(x.identity_derivative() / pow(x.y, 0.5 * p));
        z_margin = z_margin.min(x.z - (z0 - rate * (x.t - t0)));
    }
    let t_lower_bound = z0 / constants.c_final;
    let blowup = lifespan.filter(|l| l.status == LifespanStatus::BlowupDetected);
    let t_star_est = lifespan.and_then(|l| l.t_star_est);
    let (bound_ratio, t_bound_satisfied) = match blowup {
        Some(l) => match l.t_star_est {
            Some(t) => (Some((t - t0) / t_lower_bound), t - t0 >= t_lower_bound),
            None => (None, false),
        },
        None => (None, true),
    };
    Ok(InequalityReport {
        samples: s.len(),
        identity_residual,
        dissipation_min,
        hoelder_margin,
        hoelder_margin_rel: if hoelder_scale > 0.0 {
            hoelder_margin / hoelder_scale
        } else {
            hoelder_margin
        },
        scalar_sup,
        z_margin,
        t_lower_bound,
        t_star_est,
        bound_ratio,
        t_bound_satisfied,
        c_working: constants.c_working,
        c_final: constants.c_final,
    })
}

/// `Z(0)/c_final` for data `(rho phi, rho h)`.
pub fn predicted_lifespan_floor(
    profiles: &ProfilePair,
    basis: &SpectralBasis,
    rho: f64,
    constants: &ConstantEstimates,
) -> Result<f64> {
    Ok(z0_prediction(profiles, basis, rho, constants.p)? / constants.c_final)
}

/// `‖u‖_q / ‖∇u‖₂` for a grid field.
pub fn embedding_ratio(basis: &SpectralBasis, field: &[f64], q: f64) -> Result<f64> {
    let g = basis.grad_norm_sq(field)?;
    if !(g > 0.0) {
        return Err(Error::NontrivialityViolated);
    }
    Ok(lq_norm_weighted(field, q, basis.weight()) / libm::sqrt(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{FunctionalSample, TrajectoryMeta};
    use crate::model::{make_profile, ProfileKind};
    use crate::spectral::DomainSpec;
    use core::f64::consts::PI;

    fn basis1(n: usize) -> SpectralBasis {
        SpectralBasis::new(DomainSpec::interval(PI, n)).unwrap()
    }

    #[test]
    fn poincare_constant_1d_and_2d() {
        let e = estimate_embedding_constant(&basis1(63), 2.0, 200, 4, 7).unwrap();
        assert!((e.optimum - 1.0).abs() < 1e-3, "{e:?}");
        assert!((e.working - 1.05 * e.optimum).abs() < 1e-15);
        let b2 = SpectralBasis::new(DomainSpec::rectangle(PI, PI, 31)).unwrap();
        let e = estimate_embedding_constant(&b2, 2.0, 200, 4, 7).unwrap();
        assert!((e.optimum - 0.5f64.sqrt()).abs() < 1e-3, "{e:?}");
    }

    #[test]
    fn quartic_constant_beats_first_mode() {
        let b = basis1(127);
        let certified = (3.0 * PI / 8.0).powf(0.25) / (PI / 2.0).sqrt();
        let sin_ratio = embedding_ratio(&b, &b.sample_fn(|x, _| x.sin()), 4.0).unwrap();
        assert!((sin_ratio - certified).abs() < 1e-10);
        let e = estimate_embedding_constant(&b, 4.0, 300, 6, 1).unwrap();
        assert!(
            e.optimum >= certified - 1e-12,
            "{} < {certified}",
            e.optimum
        );
    }

    #[test]
    fn estimate_is_seed_deterministic() {
        let b = basis1(63);
        let x = estimate_embedding_constant(&b, 4.0, 50, 5, 42).unwrap();
        let y = estimate_embedding_constant(&b, 4.0, 50, 5, 42).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn rejects_inadmissible_q() {
        let b = basis1(31);
        for q in [1.5, f64::INFINITY, f64::NAN] {
            assert!(matches!(
                estimate_embedding_constant(&b, q, 10, 1, 0),
                Err(Error::InadmissibleExponent { .. })
            ));
        }
        assert!(embedding_admissible(6.0, 3) && !embedding_admissible(6.5, 3));
    }

    fn synthetic(ts: &[f64], y: impl Fn(f64) -> f64, dy: impl Fn(f64) -> f64) -> Trajectory {
        let meta = TrajectoryMeta {
            a: 0.0,
            b: 0.0,
            p: 3.0,
            rho: 1.0,
            lambda_1: 1.0,
            seed: None,
        };
        let samples = ts
            .iter()
            .map(|&t| FunctionalSample {
                t,
                dt: 0.0,
                y: y(t),
                z: y(t).powf(-0.5),
                lp_norm: 0.0,
                l2p2_norm: 0.0,
                dissipation: 0.0,
                dissipation_floor: 0.0,
                source_pairing: 0.5 * dy(t),
                source_abs: 0.0,
                grad_norm: 0.0,
                vel_norm: 0.0,
            })
            .collect();
        Trajectory::from_samples(samples, meta).unwrap()
    }

    #[test]
    fn centered_differences_exact_on_quadratics() {
        let ts = [0.0, 0.1, 0.25, 0.3, 0.7];
        let tr = synthetic(&ts, |t| 1.0 + 2.0 * t + 3.0 * t * t, |t| 2.0 + 6.0 * t);
        assert!(energy_identity_residual(&tr).unwrap() < 1e-12);
        let short = synthetic(&ts[..2], |t| t + 1.0, |_| 1.0);
        assert!(matches!(
            energy_identity_residual(&short),
            Err(Error::InsufficientSamples(2))
        ));
    }

    #[test]
    fn residual_is_second_order() {
        let r = |h: f64| {
            let ts: Vec<f64> = (0..=20).map(|i| i as f64 * h).collect();
            let tr = synthetic(&ts, |t| t.exp(), |t| t.exp());
            energy_identity_residual(&tr).unwrap()
        };
        let ratio = r(0.02) / r(0.01);
        assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn floor_scales_with_amplitude() {
        let b = basis1(63);
        let pair = make_profile(&ProfileKind::FirstMode, &b).unwrap();
        for (p, rho, expect) in [(3.0, 2.0, 2.0), (4.0, 10.0, 100.0)] {
            let c = estimate_constants(&b, p, 50, DEFAULT_STARTS, 3).unwrap();
            let f1 = predicted_lifespan_floor(&pair, &b, 1.0, &c).unwrap();
            let f2 = predicted_lifespan_floor(&pair, &b, rho, &c).unwrap();
            assert!((f1 / f2 / expect - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn working_constant_takes_the_larger() {
        let b = basis1(31);
        let c = estimate_constants(&b, 3.0, 30, DEFAULT_STARTS, 0).unwrap();
        assert!((c.c_chain - 2.0 * c.c_2p2.working.powf(2.0)).abs() < 1e-15);
        assert_eq!(c.with_measured(0.0).c_working, c.c_chain);
        let big = c.with_measured(10.0 * c.c_chain);
        assert_eq!(big.c_working, 10.0 * c.c_chain);
        assert!((big.c_final - 0.5 * big.c_working).abs() < 1e-15);
    }
}
