//! Interval and rectangle domains with their Dirichlet-Laplacian sine basis.
//!
//! Fields live on interior nodes only, so the homogeneous Dirichlet condition
//! is structural. In 1D the nodes are `x_i = i*h`, `i = 1..=N`, `h = L/(N+1)`.
//! In 2D the same node count is used on both axes and values are stored with
//! the x index as the slow one: `idx = (i-1)*N + (j-1)`.
//!
//! Spectral coefficients use the convention `f(x) = sum_k c_k sin(k*pi*x/L)`
//! (products of such factors in 2D), so the sampled first mode has the
//! coefficient vector `e_1`. Mode `(kx, ky)` sits at the same storage index
//! as grid node `(kx, ky)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, pow, sin};

use crate::error::{Error, Result};

/// Geometry and resolution of the computational domain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainSpec {
    pub dim: usize,
    /// One length per axis.
    pub lengths: Vec<f64>,
    /// Interior nodes per axis.
    pub n_grid: usize,
}

impl DomainSpec {
    pub fn interval(length: f64, n_grid: usize) -> Self {
        DomainSpec {
            dim: 1,
            lengths: vec![length],
            n_grid,
        }
    }

    pub fn rectangle(lx: f64, ly: f64, n_grid: usize) -> Self {
        DomainSpec {
            dim: 2,
            lengths: vec![lx, ly],
            n_grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidDimension(self.dim));
        }
        if self.lengths.len() != self.dim {
            return Err(Error::SizeMismatch {
                expected: self.dim,
                found: self.lengths.len(),
            });
        }
        if let Some(&l) = self.lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::NonpositiveLength(l));
        }
        if self.n_grid < 8 {
            return Err(Error::GridTooSmall(self.n_grid));
        }
        Ok(())
    }

    /// Mesh width along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / (self.n_grid + 1) as f64
    }

    /// Number of stored values per field.
    pub fn len(&self) -> usize {
        match self.dim {
            1 => self.n_grid,
            _ => self.n_grid * self.n_grid,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dirichlet-Laplacian eigenstructure plus the transform and quadrature
/// shared by every other module.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    domain: DomainSpec,
    eigenvalues: Vec<f64>,
    lambda_1: f64,
    weight: f64,
    parseval: f64,
    dst: Dst,
}

impl SpectralBasis {
    pub fn new(domain: DomainSpec) -> Result<Self> {
        domain.validate()?;
        let n = domain.n_grid;
        let axis_eig = |axis: usize, k: usize| {
            let w = k as f64 * PI / domain.lengths[axis];
            w * w
        };
        let eigenvalues: Vec<f64> = match domain.dim {
            1 => (1..=n).map(|k| axis_eig(0, k)).collect(),
            _ => {
                let mut ev = Vec::with_capacity(n * n);
                for kx in 1..=n {
                    for ky in 1..=n {
                        ev.push(axis_eig(0, kx) + axis_eig(1, ky));
                    }
                }
                ev
            }
        };
        let lambda_1 = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let weight: f64 = (0..domain.dim).map(|a| domain.spacing(a)).product();
        let parseval: f64 = domain.lengths.iter().map(|l| 0.5 * l).product();
        Ok(SpectralBasis {
            dst: Dst::new(n),
            domain,
            eigenvalues,
            lambda_1,
            weight,
            parseval,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    /// Number of grid values (equal to the number of retained modes).
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues of `-Δ`, laid out like the spectral coefficients.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_1(&self) -> f64 {
        self.lambda_1
    }

    /// Quadrature weight of every interior node (`h` or `h_x*h_y`).
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `∫ sin(...)^2` over the domain; the discrete Parseval factor linking
    /// grid quadrature and coefficient sums.
    pub fn parseval_factor(&self) -> f64 {
        self.parseval
    }

    /// Mode numbers `(kx, ky)` of storage index `idx` (`ky = 0` in 1D).
    pub fn mode_numbers(&self, idx: usize) -> (usize, usize) {
        match self.domain.dim {
            1 => (idx + 1, 0),
            _ => (idx / self.domain.n_grid + 1, idx % self.domain.n_grid + 1),
        }
    }

    /// Physical coordinates of grid node `idx` (`y = 0` in 1D).
    pub fn node(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.mode_numbers(idx);
        let x = i as f64 * self.domain.spacing(0);
        let y = if self.domain.dim == 2 {
            j as f64 * self.domain.spacing(1)
        } else {
            0.0
        };
        (x, y)
    }

    /// Samples `f(x, y)` on the interior nodes.
    pub fn sample_fn(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let (x, y) = self.node(idx);
                f(x, y)
            })
            .collect()
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }

    /// Grid values to sine coefficients.
    pub fn forward(&self, field: &[f64]) -> Result<Vec<f64>> {
        self.check_len(field.len())?;
        let mut out = field.to_vec();
        let scale = 2.0 / (self.domain.n_grid + 1) as f64;
        self.transform_in_place(&mut out, pow(scale, self.domain.dim as f64));
        Ok(out)
    }

    /// Sine coefficients to grid values.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        let mut out = coeffs.to_vec();
        self.transform_in_place(&mut out, 1.0);
        Ok(out)
    }

    pub(crate) fn forward_into(&self, field: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(field);
        let scale = 2.0 / (self.domain.n_grid + 1) as f64;
        self.transform_in_place(out, pow(scale, self.domain.dim as f64));
    }

    pub(crate) fn inverse_into(&self, coeffs: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(coeffs);
        self.transform_in_place(out, 1.0);
    }

    fn transform_in_place(&self, data: &mut [f64], scale: f64) {
        let n = self.domain.n_grid;
        let mut line = vec![0.0; n];
        let mut work = DstWork::new(&self.dst);
        match self.domain.dim {
            1 => {
                self.dst.apply(data, &mut line, &mut work);
                data.copy_from_slice(&line);
            }
            _ => {
                for row in data.chunks_exact_mut(n) {
                    self.dst.apply(row, &mut line, &mut work);
                    row.copy_from_slice(&line);
                }
                let mut col = vec![0.0; n];
                for j in 0..n {
                    for i in 0..n {
                        col[i] = data[i * n + j];
                    }
                    self.dst.apply(&col, &mut line, &mut work);
                    for i in 0..n {
                        data[i * n + j] = line[i];
                    }
                }
            }
        }
        if scale != 1.0 {
            data.iter_mut().for_each(|v| *v *= scale);
        }
    }

    /// `Δ field`, computed by multiplying the sine coefficients by `-λ_k`.
    pub fn apply_laplacian(&self, field: &[f64]) -> Result<Vec<f64>> {
        let mut coeffs = self.forward(field)?;
        for (c, lam) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= -lam;
        }
        self.inverse(&coeffs)
    }

    /// Equal-weight interior quadrature (trapezoid with zero boundary values).
    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        self.check_len(field.len())?;
        Ok(self.weight * field.iter().sum::<f64>())
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        Ok(self.weight * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Discrete `L^q` norm with the node quadrature.
    pub fn lq_norm(&self, field: &[f64], q: f64) -> Result<f64> {
        self.check_len(field.len())?;
        Ok(lq_norm_weighted(field, q, self.weight))
    }

    /// `‖∇f‖₂²` from the sine coefficients of `f`.
    pub fn grad_norm_sq_coeffs(&self, coeffs: &[f64]) -> f64 {
        self.parseval
            * coeffs
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, lam)| lam * c * c)
                .sum::<f64>()
    }

    /// `‖f‖₂²` from the sine coefficients of `f`.
    pub fn l2_norm_sq_coeffs(&self, coeffs: &[f64]) -> f64 {
        self.parseval * coeffs.iter().map(|c| c * c).sum::<f64>()
    }

    /// `‖∇f‖₂²` of a grid field, with the gradient taken spectrally.
    pub fn grad_norm_sq(&self, field: &[f64]) -> Result<f64> {
        let coeffs = self.forward(field)?;
        Ok(self.grad_norm_sq_coeffs(&coeffs))
    }
}

pub(crate) fn lq_norm_weighted(field: &[f64], q: f64, weight: f64) -> f64 {
    if q == 2.0 {
        return libm::sqrt(weight * field.iter().map(|v| v * v).sum::<f64>());
    }
    let s: f64 = field.iter().map(|v| pow(v.abs(), q)).sum();
    pow(weight * s, 1.0 / q)
}

/// Unnormalized DST-I: `S_k = sum_{j=1}^{N} f_j sin(pi*j*k/(N+1))`.
///
/// Uses a radix-2 FFT of the odd extension when `N+1` is a power of two and
/// a precomputed sine table otherwise.
#[derive(Debug, Clone)]
struct Dst {
    n: usize,
    kind: DstKind,
}

#[derive(Debug, Clone)]
enum DstKind {
    Fft {
        m: usize,
        tw_re: Vec<f64>,
        tw_im: Vec<f64>,
        rev: Vec<usize>,
    },
    Table(Vec<f64>),
}

struct DstWork {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl DstWork {
    fn new(dst: &Dst) -> Self {
        let m = match &dst.kind {
            DstKind::Fft { m, .. } => *m,
            DstKind::Table(_) => 0,
        };
        DstWork {
            re: vec![0.0; m],
            im: vec![0.0; m],
        }
    }
}

impl Dst {
    fn new(n: usize) -> Self {
        let kind = if (n + 1).is_power_of_two() {
            let m = 2 * (n + 1);
            let bits = m.trailing_zeros();
            let rev = (0..m)
                .map(|i| i.reverse_bits() >> (usize::BITS - bits))
                .collect();
            let (tw_re, tw_im) = (0..m / 2)
                .map(|k| {
                    let ang = -2.0 * PI * k as f64 / m as f64;
                    (cos(ang), sin(ang))
                })
                .unzip();
            DstKind::Fft {
                m,
                tw_re,
                tw_im,
                rev,
            }
        } else {
            let mut table = vec![0.0; n * n];
            let denom = (n + 1) as f64;
            for k in 1..=n {
                for j in 1..=n {
                    // reduce j*k mod 2(N+1) so the argument stays small
                    let r = (j * k) % (2 * (n + 1));
                    table[(k - 1) * n + (j - 1)] = sin(PI * r as f64 / denom);
                }
            }
            DstKind::Table(table)
        };
        Dst { n, kind }
    }

    fn apply(&self, input: &[f64], out: &mut [f64], work: &mut DstWork) {
        let n = self.n;
        match &self.kind {
            DstKind::Table(table) => {
                for (k, o) in out.iter_mut().enumerate() {
                    let row = &table[k * n..(k + 1) * n];
                    *o = row.iter().zip(input).map(|(s, f)| s * f).sum();
                }
            }
            DstKind::Fft {
                m,
                tw_re,
                tw_im,
                rev,
            } => {
                let m = *m;
                let (re, im) = (&mut work.re, &mut work.im);
                // odd extension, written directly in bit-reversed order
                let ext = |i: usize| -> f64 {
                    if i == 0 || i == n + 1 {
                        0.0
                    } else if i <= n {
                        input[i - 1]
                    } else {
                        -input[m - i - 1]
                    }
                };
                for i in 0..m {
                    re[rev[i]] = ext(i);
                    im[rev[i]] = 0.0;
                }
                let mut len = 2;
                while len <= m {
                    let half = len / 2;
                    let stride = m / len;
                    for start in (0..m).step_by(len) {
                        for k in 0..half {
                            let (wr, wi) = (tw_re[k * stride], tw_im[k * stride]);
                            let (a, b) = (start + k, start + k + half);
                            let xr = re[b] * wr - im[b] * wi;
                            let xi = re[b] * wi + im[b] * wr;
                            re[b] = re[a] - xr;
                            im[b] = im[a] - xi;
                            re[a] += xr;
                            im[a] += xi;
                        }
                    }
                    len *= 2;
                }
                // Y_k = -2i S_k
                for (k, o) in out.iter_mut().enumerate() {
                    *o = -0.5 * im[k + 1];
                }
            }
        }
    }
}
