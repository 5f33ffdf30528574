//! Scalar functionals of a state: the phase-space norm `Y`, its decreasing
//! power `Z`, Lebesgue norms, the dissipation and the source pairing.

use alloc::vec::Vec;

use libm::pow;

use crate::error::{Error, Result};
use crate::model::{Coefficients, ProfilePair, State};
use crate::spectral::{lq_norm_weighted, SpectralBasis};

/// Every scalar the energy chain needs at one time instant.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunctionalSample {
    pub t: f64,
    /// Step size in use when the sample was recorded.
    pub dt: f64,
    /// `‖∇ψ‖₂² + ‖ψ_t‖₂²`
    pub y: f64,
    /// `Y^{-(p-2)/2}`, `+inf` when `Y = 0`.
    pub z: f64,
    pub lp_norm: f64,
    pub l2p2_norm: f64,
    /// `a‖∇ψ_t‖₂² + b‖ψ_t‖₂²`
    pub dissipation: f64,
    /// `(a*lambda_1 + b)‖ψ_t‖₂²`
    pub dissipation_floor: f64,
    /// `∫|ψ|^{p-2}ψ ψ_t`
    pub source_pairing: f64,
    /// `∫|ψ|^{p-1}|ψ_t|`. Not part of the CSV schema; trajectories read back
    /// from CSV carry `|source_pairing|` here.
    pub source_abs: f64,
    pub grad_norm: f64,
    pub vel_norm: f64,
}

impl FunctionalSample {
    /// `Y'` implied by the energy identity at this instant.
    pub fn identity_derivative(&self) -> f64 {
        -2.0 * self.dissipation + 2.0 * self.source_pairing
    }
}

/// Run parameters carried alongside a trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryMeta {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub rho: f64,
    pub lambda_1: f64,
    pub seed: Option<u64>,
}

impl TrajectoryMeta {
    pub fn new(coeffs: &Coefficients, rho: f64) -> Self {
        TrajectoryMeta {
            a: coeffs.a(),
            b: coeffs.b(),
            p: coeffs.p(),
            rho,
            lambda_1: coeffs.lambda_1(),
            seed: None,
        }
    }
}

/// Time-ordered functional samples of one run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    samples: Vec<FunctionalSample>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta) -> Self {
        Trajectory {
            samples: Vec::new(),
            meta,
        }
    }

    /// Builds a trajectory from stored samples, rejecting empty or
    /// non-increasing time sequences.
    pub fn from_samples(samples: Vec<FunctionalSample>, meta: TrajectoryMeta) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientSamples(0));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::StepControl(
                "trajectory times must be strictly increasing",
            ));
        }
        Ok(Trajectory { samples, meta })
    }

    /// Appends a sample; samples that do not advance time are dropped.
    pub fn push(&mut self, s: FunctionalSample) -> bool {
        if self.samples.last().is_some_and(|last| !(s.t > last.t)) {
            return false;
        }
        self.samples.push(s);
        true
    }

    pub fn samples(&self) -> &[FunctionalSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&FunctionalSample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&FunctionalSample> {
        self.samples.last()
    }
}

/// `|u|^{p-2} u`, extended by 0 at `u = 0`.
#[inline]
pub fn source_term(u: f64, p: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    if p == 3.0 {
        u * u.abs()
    } else if p == 4.0 {
        u * u * u
    } else {
        pow(u.abs(), p - 2.0) * u
    }
}

/// `Z = Y^{-(p-2)/2}`.
pub fn z_of_y(y: f64, p: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::NonpositiveY(y));
    }
    if !(p > 2.0) {
        return Err(Error::ExponentRange { p, n: 1 });
    }
    Ok(pow(y, -(p - 2.0) / 2.0))
}

fn z_or_sentinel(y: f64, p: f64) -> f64 {
    z_of_y(y, p).unwrap_or(f64::INFINITY)
}

/// Closed-form `Z(0) = rho^{-(p-2)} (‖∇phi‖₂² + ‖h‖₂²)^{-(p-2)/2}`.
pub fn z0_prediction(
    profiles: &ProfilePair,
    basis: &SpectralBasis,
    rho: f64,
    p: f64,
) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::NonpositiveAmplitude(rho));
    }
    let norm = profiles.data_norm(basis);
    if !(norm > 0.0) {
        return Err(Error::NontrivialityViolated);
    }
    Ok(pow(rho, -(p - 2.0)) * z_of_y(norm, p)?)
}

pub fn sample(
    state: &State,
    coeffs: &Coefficients,
    basis: &SpectralBasis,
) -> Result<FunctionalSample> {
    let n = basis.len();
    for f in [&state.psi, &state.psi_t] {
        if f.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: f.len(),
            });
        }
    }
    let mut psi_c = Vec::with_capacity(n);
    let mut vel_c = Vec::with_capacity(n);
    basis.forward_into(&state.psi, &mut psi_c);
    basis.forward_into(&state.psi_t, &mut vel_c);
    Ok(sample_parts(state, &psi_c, &vel_c, coeffs, basis))
}

/// Sample from grid values and their already computed sine coefficients.
pub(crate) fn sample_parts(
    state: &State,
    psi_c: &[f64],
    vel_c: &[f64],
    coeffs: &Coefficients,
    basis: &SpectralBasis,
) -> FunctionalSample {
    let w = basis.weight();
    let p = coeffs.p();
    let grad_sq = basis.grad_norm_sq_coeffs(psi_c);
    let vel_sq = w * state.psi_t.iter().map(|v| v * v).sum::<f64>();
    let y = grad_sq + vel_sq;

    // a‖∇ψ_t‖² = a*lambda_1‖ψ_t‖² + a*sum (λ_k - lambda_1) d_k², split so the
    // Poincaré excess is a sum of nonnegative terms
    let lam1 = basis.lambda_1();
    let excess = basis.parseval_factor()
        * vel_c
            .iter()
            .zip(basis.eigenvalues())
            .map(|(d, lam)| (lam - lam1) * d * d)
            .sum::<f64>();
    let dissipation_floor = coeffs.damping_floor_rate() * vel_sq;
    let dissipation = dissipation_floor + coeffs.a() * excess;

    let (mut pairing, mut abs_pairing) = (0.0, 0.0);
    for (u, v) in state.psi.iter().zip(&state.psi_t) {
        let f = source_term(*u, p);
        pairing += f * v;
        abs_pairing += (f * v).abs();
    }

    FunctionalSample {
        t: state.t,
        dt: 0.0,
        y,
        z: z_or_sentinel(y, p),
        lp_norm: lq_norm_weighted(&state.psi, p, w),
        l2p2_norm: lq_norm_weighted(&state.psi, 2.0 * p - 2.0, w),
        dissipation,
        dissipation_floor,
        source_pairing: w * pairing,
        source_abs: w * abs_pairing,
        grad_norm: libm::sqrt(grad_sq),
        vel_norm: libm::sqrt(vel_sq),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_profile, scale_initial_state, ProfileKind, Provenance};
    use crate::spectral::DomainSpec;
    use core::f64::consts::PI;
    use libm::sin;
    use std::vec;

    fn setup(n: usize) -> (SpectralBasis, Coefficients) {
        let b = SpectralBasis::new(DomainSpec::interval(PI, n)).unwrap();
        let c = Coefficients::for_basis(1.0, -0.5, 3.0, &b).unwrap();
        (b, c)
    }

    #[test]
    fn static_first_mode() {
        let (b, c) = setup(255);
        let s = State {
            psi: b.sample_fn(|x, _| sin(x)),
            psi_t: vec![0.0; 255],
            t: 0.0,
        };
        let f = sample(&s, &c, &b).unwrap();
        assert!((f.y - PI / 2.0).abs() < 1e-4);
        assert_eq!(f.dissipation, 0.0);
        assert_eq!(f.source_pairing, 0.0);
        assert!((f.y - (f.grad_norm.powi(2) + f.vel_norm.powi(2))).abs() < 1e-14);
    }

    #[test]
    fn zero_state_uses_infinite_sentinel() {
        let (b, c) = setup(31);
        let f = sample(&State::zeros(31), &c, &b).unwrap();
        assert_eq!(f.y, 0.0);
        assert_eq!(f.z, f64::INFINITY);
        assert_eq!(f.source_pairing, 0.0);
    }

    #[test]
    fn dissipation_equality_on_first_mode() {
        let (b, c) = setup(255);
        let s = State {
            psi: vec![0.0; 255],
            psi_t: b.sample_fn(|x, _| sin(x)),
            t: 0.0,
        };
        let f = sample(&s, &c, &b).unwrap();
        assert!((f.dissipation - PI / 4.0).abs() < 1e-4);
        assert!((f.dissipation_floor - PI / 4.0).abs() < 1e-4);
        assert!((f.dissipation - f.dissipation_floor).abs() < 1e-12);
    }

    #[test]
    fn z_values() {
        assert_eq!(z_of_y(1.0, 3.7).unwrap(), 1.0);
        assert!((z_of_y(4.0, 4.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((z_of_y(4.0, 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(z_of_y(0.0, 3.0).unwrap_err(), Error::NonpositiveY(0.0));
        assert!(z_of_y(2.0, 3.0).unwrap() > z_of_y(2.5, 3.0).unwrap());
    }

    #[test]
    fn z0_closed_form() {
        let (b, _) = setup(255);
        let pair = make_profile(&ProfileKind::FirstMode, &b).unwrap();
        let half_pi = PI / 2.0;
        assert!((z0_prediction(&pair, &b, 1.0, 4.0).unwrap() - 1.0 / half_pi).abs() < 1e-4);
        assert!((z0_prediction(&pair, &b, 2.0, 4.0).unwrap() - 0.25 / half_pi).abs() < 1e-4);
        let expect = 0.1 / half_pi.sqrt();
        assert!((z0_prediction(&pair, &b, 10.0, 3.0).unwrap() - expect).abs() < 1e-4);
        assert!(z0_prediction(&pair, &b, 0.0, 3.0).is_err());
    }

    #[test]
    fn z0_matches_sampled_state() {
        let (b, c) = setup(127);
        let pair = make_profile(
            &ProfileKind::Gaussian {
                center: [1.2, 0.0],
                width: 0.3,
            },
            &b,
        )
        .unwrap();
        for rho in [0.5, 3.0, 40.0] {
            let s = scale_initial_state(&pair, rho).unwrap();
            let direct = sample(&s, &c, &b).unwrap().z;
            let pred = z0_prediction(&pair, &b, rho, 3.0).unwrap();
            assert!((direct - pred).abs() <= 1e-12 * pred);
        }
    }

    #[test]
    fn source_term_continuous_extension() {
        assert_eq!(source_term(0.0, 2.5), 0.0);
        assert_eq!(source_term(-2.0, 3.0), -4.0);
        assert_eq!(source_term(2.0, 4.0), 8.0);
        assert!((source_term(-4.0, 2.5) + 8.0).abs() < 1e-14);
    }

    #[test]
    fn trajectory_rejects_nonincreasing_time() {
        let meta = TrajectoryMeta {
            a: 0.0,
            b: 1.0,
            p: 3.0,
            rho: 1.0,
            lambda_1: 1.0,
            seed: None,
        };
        let (b, c) = setup(15);
        let mut s = sample(&State::zeros(15), &c, &b).unwrap();
        let mut traj = Trajectory::new(meta.clone());
        assert!(traj.push(s));
        assert!(!traj.push(s));
        s.t = 1.0;
        assert!(traj.push(s));
        assert!(Trajectory::from_samples(vec![s, s], meta.clone()).is_err());
        assert!(Trajectory::from_samples(vec![], meta).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_pair(b: &SpectralBasis, seed: &[f64]) -> ProfilePair {
            let n = b.len();
            let phi: Vec<f64> = (0..n)
                .map(|i| seed[i % seed.len()] * sin((i + 1) as f64 * 0.3))
                .collect();
            let h: Vec<f64> = (0..n).map(|i| seed[(i + 3) % seed.len()] * 0.5).collect();
            ProfilePair::new(phi, h, Provenance::Grid, b).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn y_scales_quadratically(seed in proptest::collection::vec(0.1f64..2.0, 7), rho in 0.01f64..100.0) {
                let (b, c) = setup(63);
                let pair = random_pair(&b, &seed);
                let y1 = sample(&scale_initial_state(&pair, 1.0).unwrap(), &c, &b).unwrap().y;
                let yr = sample(&scale_initial_state(&pair, rho).unwrap(), &c, &b).unwrap().y;
                prop_assert!((yr - rho * rho * y1).abs() <= 1e-12 * yr);
            }

            #[test]
            fn z0_times_rho_power_is_constant(seed in proptest::collection::vec(0.1f64..2.0, 5), p in 2.1f64..6.0) {
                let (b, _) = setup(31);
                let pair = random_pair(&b, &seed);
                let base = z0_prediction(&pair, &b, 1.0, p).unwrap();
                for rho in [1.0, 2.0, 10.0, 100.0] {
                    let v = z0_prediction(&pair, &b, rho, p).unwrap() * pow(rho, p - 2.0);
                    prop_assert!((v - base).abs() <= 1e-12 * base);
                }
            }

            #[test]
            fn dissipation_dominates_floor(seed in proptest::collection::vec(-2.0f64..2.0, 9), a in 0.0f64..2.0, db in 0.01f64..2.0) {
                let b = SpectralBasis::new(DomainSpec::interval(2.0, 40)).unwrap();
                let bcoef = -a * b.lambda_1() + db;
                let c = Coefficients::for_basis(a, bcoef, 3.0, &b).unwrap();
                let psi_t: Vec<f64> = (0..40).map(|i| seed[i % 9] * sin(i as f64)).collect();
                let s = State { psi: vec![0.0; 40], psi_t, t: 0.0 };
                let f = sample(&s, &c, &b).unwrap();
                prop_assert!(f.dissipation >= f.dissipation_floor);
                prop_assert!(f.dissipation_floor >= 0.0);
            }
        }
    }
}
