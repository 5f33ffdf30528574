use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdwave_core::integrator::{integrate, LifespanStatus, StepControl, Thresholds};
use sdwave_core::model::{
    make_profile, scale_initial_state, Coefficients, ProfileKind, ProfilePair,
};
use sdwave_core::spectral::{DomainSpec, SpectralBasis};
use sdwave_core::sweep::{amplitude_sweep, AmplitudeGrid, SweepSetup};
use sdwave_core::theory::{
    embedding_ratio, estimate_constants, predicted_lifespan_floor, ConstantEstimates,
};

fn interval(n: usize) -> SpectralBasis {
    SpectralBasis::new(DomainSpec::interval(PI, n)).unwrap()
}

fn first_mode(basis: &SpectralBasis) -> ProfilePair {
    make_profile(&ProfileKind::FirstMode, basis).unwrap()
}

#[test]
fn floor_regression_at_rho_10() {
    let basis = interval(255);
    let c = estimate_constants(&basis, 3.0, 200, 8, 2024).unwrap();
    let floor = predicted_lifespan_floor(&first_mode(&basis), &basis, 10.0, &c).unwrap();
    assert!((floor - 0.103178797745).abs() < 1e-9, "{floor}");
    assert!((c.c_final - 0.5 * c.c_chain).abs() < 1e-15);
}

#[test]
fn embedding_bound_holds_on_random_fields() {
    let basis = interval(127);
    let n = basis.len();
    let p = 4.0;
    let c = estimate_constants(&basis, p, 200, 8, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let x: Vec<f64> = (1..=n).map(|j| j as f64 * PI / (n + 1) as f64).collect();
    for _ in 0..200 {
        let modes = rng.random_range(1..=12usize);
        let coef: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shift: f64 = rng.random_range(-0.5..0.5);
        let field: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let s: f64 = coef
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * ((k + 1) as f64 * xi).sin())
                    .sum();
                s + shift * s * s
            })
            .collect();
        for (q, est) in [(p, c.c_p), (2.0 * p - 2.0, c.c_2p2)] {
            let r = embedding_ratio(&basis, &field, q).unwrap();
            assert!(
                r <= est.optimum * (1.0 + 1e-9),
                "q {q}: {r} > {}",
                est.optimum
            );
            assert!(r <= est.working);
        }
    }
}

#[test]
fn embedding_bound_holds_along_a_trajectory() {
    let basis = interval(127);
    let coeffs = Coefficients::for_basis(0.1, 0.1, 3.0, &basis).unwrap();
    let c = estimate_constants(&basis, 3.0, 200, 8, 2024).unwrap();
    let profiles = make_profile(
        &ProfileKind::Gaussian {
            center: [1.2, 0.0],
            width: 0.3,
        },
        &basis,
    )
    .unwrap();
    let s0 = scale_initial_state(&profiles, 20.0).unwrap();
    let control = StepControl {
        t_max: 1.0,
        ..Default::default()
    };
    let (traj, _) =
        integrate(&s0, &coeffs, &basis, &control, &Thresholds::default(), 20.0).unwrap();
    assert!(traj.len() > 10);
    for s in traj.samples() {
        assert!(
            s.lp_norm <= c.c_p.working * s.grad_norm,
            "t {}: {} > {}",
            s.t,
            s.lp_norm,
            c.c_p.working * s.grad_norm
        );
    }
}

fn sweep_setup<'a>(
    basis: &'a SpectralBasis,
    coeffs: &'a Coefficients,
    profiles: &'a ProfilePair,
    constants: &'a ConstantEstimates,
    t_max: f64,
) -> SweepSetup<'a> {
    SweepSetup {
        basis,
        coeffs,
        profiles,
        control: StepControl {
            t_max,
            ..Default::default()
        },
        thresholds: Thresholds::default(),
        constants,
    }
}

#[test]
fn tiny_amplitudes_survive() {
    let basis = interval(63);
    let coeffs = Coefficients::for_basis(0.1, 0.1, 3.0, &basis).unwrap();
    let profiles = first_mode(&basis);
    let c = estimate_constants(&basis, 3.0, 60, 4, 1).unwrap();
    let setup = sweep_setup(&basis, &coeffs, &profiles, &c, 10.0);
    let grid = AmplitudeGrid {
        rho_min: 0.001,
        factor: 2.0,
        count: 2,
    };
    let (res, _) = amplitude_sweep(&setup, &grid, true).unwrap();
    assert_eq!(res.rows.len(), 2);
    for r in &res.rows {
        assert_eq!(r.status, LifespanStatus::SurvivedToHorizon);
        assert!(r.t_star_est.is_none());
    }
    assert!(res.fit.is_none());
}

#[test]
fn blowup_time_decreases_with_amplitude() {
    let basis = interval(127);
    let coeffs = Coefficients::for_basis(0.1, 0.1, 3.0, &basis).unwrap();
    let profiles = first_mode(&basis);
    let c = estimate_constants(&basis, 3.0, 60, 4, 1).unwrap();
    let setup = sweep_setup(&basis, &coeffs, &profiles, &c, 10.0);
    let grid = AmplitudeGrid {
        rho_min: 8.0,
        factor: 2.0,
        count: 6,
    };
    let (res, c2) = amplitude_sweep(&setup, &grid, true).unwrap();
    let t: Vec<f64> = res.rows.iter().map(|r| r.t_star_est.unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
    assert!(c2.c_measured.is_some() && c2.c_working >= c2.c_chain);
    let fit = res.fit.unwrap();
    assert!(fit.floor_holds);
    assert!(fit.r2 > 0.99);
}
