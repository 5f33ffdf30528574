//! Coefficients, initial profiles and the evolving state.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{exp, sin};

use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

/// Damping coefficients, source exponent and spatial dimension.
///
/// Only constructible through [`Coefficients::validate`], so holding one means
/// `a >= 0`, `b > -a*lambda_1` and `p` lies in the admissible range for `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Coefficients {
    a: f64,
    b: f64,
    p: f64,
    n: usize,
    lambda_1: f64,
}

impl Coefficients {
    pub fn validate(a: f64, b: f64, p: f64, n: usize, lambda_1: f64) -> Result<Self> {
        if !(lambda_1 > 0.0 && lambda_1.is_finite()) {
            return Err(Error::NonpositiveEigenvalue(lambda_1));
        }
        if n == 0 {
            return Err(Error::InvalidDimension(n));
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::NonnegativityViolated { a });
        }
        if !exponent_admissible(p, n) {
            return Err(Error::ExponentRange { p, n });
        }
        if !(b > -a * lambda_1 && b.is_finite()) {
            return Err(Error::DampingThreshold { a, b, lambda_1 });
        }
        Ok(Coefficients {
            a,
            b,
            p,
            n,
            lambda_1,
        })
    }

    /// Validates against the first eigenvalue and dimension of `basis`.
    pub fn for_basis(a: f64, b: f64, p: f64, basis: &SpectralBasis) -> Result<Self> {
        Self::validate(a, b, p, basis.dim(), basis.lambda_1())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// The `lambda_1` these coefficients were validated against.
    pub fn lambda_1(&self) -> f64 {
        self.lambda_1
    }

    /// `a*lambda_1 + b`, the Poincaré floor of the linear damping rate.
    pub fn damping_floor_rate(&self) -> f64 {
        self.a * self.lambda_1 + self.b
    }
}

/// `2 < p < inf` for `n <= 2`, `2 < p <= (2n-2)/(n-2)` for `n >= 3`.
pub fn exponent_admissible(p: f64, n: usize) -> bool {
    if !(p > 2.0) || !p.is_finite() {
        return false;
    }
    if n <= 2 {
        return true;
    }
    let n = n as f64;
    p <= (2.0 * n - 2.0) / (n - 2.0)
}

/// Named analytic initial profiles.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProfileKind {
    /// `phi` = first Dirichlet eigenfunction, `h = 0`.
    FirstMode,
    /// `phi = sin(kx*pi*x/Lx)` (times `sin(ky*pi*y/Ly)` in 2D), `h = 0`.
    Mode { kx: usize, ky: usize },
    /// Gaussian bump shifted down by its largest boundary value and clipped
    /// at zero, normalized to peak 1; `h = 0`.
    Gaussian { center: [f64; 2], width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Provenance {
    Analytic(ProfileKind),
    File(String),
    Grid,
}

/// Fixed displacement and velocity profiles `(phi, h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePair {
    phi: Vec<f64>,
    h: Vec<f64>,
    provenance: Provenance,
}

impl ProfilePair {
    /// Builds a profile pair from grid values and checks nontriviality.
    pub fn new(
        phi: Vec<f64>,
        h: Vec<f64>,
        provenance: Provenance,
        basis: &SpectralBasis,
    ) -> Result<Self> {
        let pair = Self::new_unchecked(phi, h, provenance, basis)?;
        if !(pair.data_norm(basis) > 0.0) {
            return Err(Error::NontrivialityViolated);
        }
        Ok(pair)
    }

    /// Like [`ProfilePair::new`] but accepts trivial data. Sizes are still
    /// checked.
    pub fn new_unchecked(
        phi: Vec<f64>,
        h: Vec<f64>,
        provenance: Provenance,
        basis: &SpectralBasis,
    ) -> Result<Self> {
        for f in [&phi, &h] {
            if f.len() != basis.len() {
                return Err(Error::SizeMismatch {
                    expected: basis.len(),
                    found: f.len(),
                });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidProfile("non-finite grid value"));
            }
        }
        Ok(ProfilePair { phi, h, provenance })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `‖∇phi‖₂² + ‖h‖₂²`.
    pub fn data_norm(&self, basis: &SpectralBasis) -> f64 {
        let mut coeffs = Vec::new();
        basis.forward_into(&self.phi, &mut coeffs);
        basis.grad_norm_sq_coeffs(&coeffs)
            + basis.weight() * self.h.iter().map(|v| v * v).sum::<f64>()
    }
}

pub fn make_profile(kind: &ProfileKind, basis: &SpectralBasis) -> Result<ProfilePair> {
    let dom = basis.domain();
    let lx = dom.lengths[0];
    let ly = if dom.dim == 2 { dom.lengths[1] } else { 1.0 };
    let phi = match *kind {
        ProfileKind::FirstMode => mode_field(basis, 1, 1, lx, ly),
        ProfileKind::Mode { kx, ky } => {
            if kx == 0 || (dom.dim == 2 && ky == 0) {
                return Err(Error::InvalidProfile("mode numbers start at 1"));
            }
            mode_field(basis, kx, ky, lx, ly)
        }
        ProfileKind::Gaussian { center, width } => {
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::InvalidProfile("gaussian width must be positive"));
            }
            let inside = |c: f64, l: f64| c > 0.0 && c < l;
            if !inside(center[0], lx) || (dom.dim == 2 && !inside(center[1], ly)) {
                return Err(Error::InvalidProfile(
                    "gaussian center must lie inside the domain",
                ));
            }
            let mut d_min = center[0].min(lx - center[0]);
            if dom.dim == 2 {
                d_min = d_min.min(center[1]).min(ly - center[1]);
            }
            let two_s2 = 2.0 * width * width;
            let edge = exp(-d_min * d_min / two_s2);
            if edge >= 1.0 {
                return Err(Error::InvalidProfile(
                    "gaussian is flat at machine precision",
                ));
            }
            basis.sample_fn(|x, y| {
                let dy = if dom.dim == 2 { y - center[1] } else { 0.0 };
                let dx = x - center[0];
                let g = exp(-(dx * dx + dy * dy) / two_s2);
                ((g - edge) / (1.0 - edge)).max(0.0)
            })
        }
    };
    let h = alloc::vec![0.0; basis.len()];
    ProfilePair::new(phi, h, Provenance::Analytic(kind.clone()), basis)
}

fn mode_field(basis: &SpectralBasis, kx: usize, ky: usize, lx: f64, ly: f64) -> Vec<f64> {
    let two_d = basis.dim() == 2;
    basis.sample_fn(|x, y| {
        let fx = sin(kx as f64 * PI * x / lx);
        if two_d {
            fx * sin(ky as f64 * PI * y / ly)
        } else {
            fx
        }
    })
}

/// Displacement, velocity and time on the interior grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub psi: Vec<f64>,
    pub psi_t: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn zeros(len: usize) -> Self {
        State {
            psi: alloc::vec![0.0; len],
            psi_t: alloc::vec![0.0; len],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().chain(&self.psi_t).all(|v| v.is_finite())
    }
}

/// Initial state `(rho*phi, rho*h)` at `t = 0`.
pub fn scale_initial_state(profiles: &ProfilePair, rho: f64) -> Result<State> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::NonpositiveAmplitude(rho));
    }
    Ok(State {
        psi: profiles.phi.iter().map(|v| rho * v).collect(),
        psi_t: profiles.h.iter().map(|v| rho * v).collect(),
        t: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DomainSpec;
    use std::vec;

    fn basis(n: usize) -> SpectralBasis {
        SpectralBasis::new(DomainSpec::interval(PI, n)).unwrap()
    }

    #[test]
    fn coefficient_admissibility() {
        assert!(Coefficients::validate(1.0, -0.5, 3.0, 1, 1.0).is_ok());
        assert_eq!(
            Coefficients::validate(0.0, 0.0, 3.0, 1, 1.0).unwrap_err(),
            Error::DampingThreshold {
                a: 0.0,
                b: 0.0,
                lambda_1: 1.0
            }
        );
        // (2n-2)/(n-2) = 4 at n = 3, boundary accepted
        assert!(Coefficients::validate(1.0, 1.0, 4.0, 3, 1.0).is_ok());
        assert_eq!(
            Coefficients::validate(1.0, 1.0, 5.0, 3, 1.0).unwrap_err(),
            Error::ExponentRange { p: 5.0, n: 3 }
        );
        assert!(matches!(
            Coefficients::validate(-0.1, 1.0, 3.0, 1, 1.0),
            Err(Error::NonnegativityViolated { .. })
        ));
        assert!(matches!(
            Coefficients::validate(1.0, 1.0, 2.0, 1, 1.0),
            Err(Error::ExponentRange { .. })
        ));
        assert!(matches!(
            Coefficients::validate(1.0, 1.0, f64::NAN, 2, 1.0),
            Err(Error::ExponentRange { .. })
        ));
        assert!(Coefficients::validate(1.0, 1.0, 100.0, 2, 1.0).is_ok());
        assert!(Coefficients::validate(1.0, 1.0, 3.0, 1, 0.0).is_err());
    }

    #[test]
    fn rejection_messages_name_the_condition() {
        let e = Coefficients::validate(0.5, -1.0, 3.0, 1, 2.0).unwrap_err();
        let msg = std::format!("{e}");
        assert!(msg.contains("b <= -a*lambda1"), "{msg}");
        let e = Coefficients::validate(1.0, 1.0, 5.0, 3, 1.0).unwrap_err();
        assert!(std::format!("{e}").contains("(2n-2)/(n-2)"));
    }

    #[test]
    fn first_mode_profile() {
        let b = basis(255);
        let pair = make_profile(&ProfileKind::FirstMode, &b).unwrap();
        assert!(pair.h().iter().all(|&v| v == 0.0));
        assert!((pair.phi()[127] - 1.0).abs() < 1e-12);
        assert!((pair.data_norm(&b) - PI / 2.0).abs() < 1e-4);
    }

    #[test]
    fn trivial_profiles_rejected() {
        let b = basis(31);
        let err = ProfilePair::new(vec![0.0; 31], vec![0.0; 31], Provenance::Grid, &b).unwrap_err();
        assert_eq!(err, Error::NontrivialityViolated);
        assert!(
            ProfilePair::new_unchecked(vec![0.0; 31], vec![0.0; 31], Provenance::Grid, &b).is_ok()
        );
        assert!(ProfilePair::new(vec![0.0; 30], vec![0.0; 31], Provenance::Grid, &b).is_err());
    }

    #[test]
    fn velocity_only_profile_is_nontrivial() {
        let b = basis(31);
        let h = b.sample_fn(|x, _| sin(x));
        assert!(ProfilePair::new(vec![0.0; 31], h, Provenance::Grid, &b).is_ok());
    }

    #[test]
    fn gaussian_bump() {
        let b = basis(127);
        let kind = ProfileKind::Gaussian {
            center: [PI / 2.0, 0.0],
            width: 0.4,
        };
        let pair = make_profile(&kind, &b).unwrap();
        assert!(pair.data_norm(&b) > 0.0);
        assert!(pair.phi().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let bad = ProfileKind::Gaussian {
            center: [4.0, 0.0],
            width: 0.4,
        };
        assert!(make_profile(&bad, &b).is_err());

        let b2 = SpectralBasis::new(DomainSpec::rectangle(PI, PI, 31)).unwrap();
        let kind = ProfileKind::Gaussian {
            center: [1.0, 2.0],
            width: 0.5,
        };
        assert!(make_profile(&kind, &b2).unwrap().data_norm(&b2) > 0.0);
    }

    #[test]
    fn scaling_initial_state() {
        let b = basis(255);
        let pair = make_profile(&ProfileKind::FirstMode, &b).unwrap();
        let s1 = scale_initial_state(&pair, 1.0).unwrap();
        assert_eq!(s1.psi, pair.phi());
        assert_eq!(s1.psi_t, pair.h());
        assert_eq!(s1.t, 0.0);
        let s2 = scale_initial_state(&pair, 2.0).unwrap();
        let y0 = b.grad_norm_sq(&s2.psi).unwrap() + b.inner(&s2.psi_t, &s2.psi_t).unwrap();
        assert!((y0 - 2.0 * PI).abs() < 1e-3);
        assert_eq!(
            scale_initial_state(&pair, 0.0).unwrap_err(),
            Error::NonpositiveAmplitude(0.0)
        );
        assert!(scale_initial_state(&pair, -1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_b(a in 0.0f64..5.0, b in -5.0f64..5.0, db in 0.0f64..10.0, lam in 0.1f64..10.0) {
                if Coefficients::validate(a, b, 3.0, 1, lam).is_ok() {
                    prop_assert!(Coefficients::validate(a, b + db, 3.0, 1, lam).is_ok());
                }
            }
        }
    }
}
