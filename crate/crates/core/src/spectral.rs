//! Mean-zero fields on the unit torus in the trigonometric eigenbasis of the
//! Laplacian.
//!
//! Mode `k > 0` is the cosine mode `√2 cos(2πkξ)` and mode `k < 0` the sine
//! mode `√2 sin(2π|k|ξ)`. Both have eigenvalue `λ_k = 4π²k²` under `-A`.
//! Coefficients are stored flat as `[c_1..c_m, s_1..s_m]`, which is also the
//! column order used by the trajectory files.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

/// Smallest eigenvalue of `-A`, `4π²`.
pub const LAMBDA_1: f64 = 4.0 * PI * PI;

/// `λ_k = 4π²k²` for `|k| = k`.
#[inline]
pub fn eigenvalue(k: usize) -> f64 {
    let k = k as f64;
    LAMBDA_1 * k * k
}

/// Eigenvalues laid out like [`SpectralField::coeffs`].
pub fn eigenvalues(m: usize) -> Vec<f64> {
    (0..2 * m).map(|i| eigenvalue(i % m + 1)).collect()
}

/// Flat storage index of signed mode `k` (`1 <= |k| <= m`).
#[inline]
pub fn mode_index(m: usize, k: i64) -> Option<usize> {
    let a = k.unsigned_abs() as usize;
    if k == 0 || a > m {
        None
    } else if k > 0 {
        Some(a - 1)
    } else {
        Some(m + a - 1)
    }
}

/// Signed mode of flat index `i`.
#[inline]
pub fn index_mode(m: usize, i: usize) -> i64 {
    if i < m {
        (i + 1) as i64
    } else {
        -((i - m + 1) as i64)
    }
}

/// Smallest power-of-two grid on which the projection of the cube of an
/// `m`-mode field is alias-free. The cube reaches mode `3m`, which folds onto
/// mode `n - 3m`; that stays outside `1..=m` iff `n >= 4m + 1`.
pub fn dealiased_grid_size(m: usize) -> usize {
    (4 * m + 1).next_power_of_two()
}

#[derive(Clone, PartialEq)]
pub struct SpectralField {
    m: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("m", &self.m)
            .field("cos", &self.cos())
            .field("sin", &self.sin())
            .finish()
    }
}

impl SpectralField {
    pub fn zeros(m: usize) -> Self {
        SpectralField {
            m,
            coeffs: vec![0.0; 2 * m],
        }
    }

    /// The basis vector `e_k`.
    pub fn basis(m: usize, k: i64) -> Result<Self> {
        let mut field = Self::zeros(m);
        field.set(k, 1.0)?;
        Ok(field)
    }

    /// Builds a field from flat `[c_1..c_m, s_1..s_m]` storage.
    pub fn from_coeffs(m: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 2 * m {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients for m = {m}, got {}",
                2 * m,
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite coefficient {bad}"
            )));
        }
        Ok(SpectralField { m, coeffs })
    }

    /// Builds a field from cosine and sine coefficient lists, zero-padded to
    /// `m` modes.
    pub fn from_parts(m: usize, cos: &[f64], sin: &[f64]) -> Result<Self> {
        if cos.len() > m || sin.len() > m {
            return Err(Error::InvalidArgument(format!(
                "{} cosine / {} sine coefficients do not fit in {m} modes",
                cos.len(),
                sin.len()
            )));
        }
        let mut coeffs = vec![0.0; 2 * m];
        coeffs[..cos.len()].copy_from_slice(cos);
        coeffs[m..m + sin.len()].copy_from_slice(sin);
        Self::from_coeffs(m, coeffs)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn cos(&self) -> &[f64] {
        &self.coeffs[..self.m]
    }

    pub fn sin(&self) -> &[f64] {
        &self.coeffs[self.m..]
    }

    /// Coefficient of `e_k`; zero for modes outside the truncation.
    pub fn coeff(&self, k: i64) -> f64 {
        mode_index(self.m, k).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn set(&mut self, k: i64, value: f64) -> Result<()> {
        let i = mode_index(self.m, k).ok_or_else(|| {
            Error::InvalidArgument(format!("mode {k} outside 1..={} (k = 0 excluded)", self.m))
        })?;
        self.coeffs[i] = value;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Iterates `(k, u_k)` over all signed modes.
    pub fn modes(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (index_mode(self.m, i), c))
    }

    /// The `L²` norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// `‖u‖_s = ‖(-A)^{s/2} u‖ = sqrt(Σ λ_k^s u_k²)`, over the truncated modes
    /// (also for negative `s`).
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        if s == 0.0 {
            return self.norm();
        }
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| eigenvalue(i % self.m + 1).powf(s) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Applies the heat semigroup `e^{tA}`.
    pub fn semigroup_apply(&self, t: f64) -> Result<SpectralField> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "semigroup time must be nonnegative, got {t}"
            )));
        }
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            *c *= (-eigenvalue(i % self.m + 1) * t).exp();
        }
        Ok(out)
    }

    /// Truncates or zero-pads to `m` modes.
    pub fn resized(&self, m: usize) -> SpectralField {
        let keep = m.min(self.m);
        let mut out = SpectralField::zeros(m);
        out.coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        out.coeffs[m..m + keep].copy_from_slice(&self.coeffs[self.m..self.m + keep]);
        out
    }

    pub fn scaled(&self, factor: f64) -> SpectralField {
        SpectralField {
            m: self.m,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `‖self - other‖`, padding the coarser field with zeros.
    pub fn distance(&self, other: &SpectralField) -> f64 {
        let m = self.m.max(other.m);
        let (a, b) = (self.resized(m), other.resized(m));
        a.coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    fn zip_with(
        &self,
        other: &SpectralField,
        op: impl Fn(f64, f64) -> f64,
    ) -> Result<SpectralField> {
        self.check_same(other)?;
        Ok(SpectralField {
            m: self.m,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    fn check_same(&self, other: &SpectralField) -> Result<()> {
        if self.m != other.m {
            return Err(Error::ModeMismatch(self.m, other.m));
        }
        Ok(())
    }
}

/// Point values `x(j/n)`, `j = 0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalGrid {
    pub values: Vec<f64>,
}

impl PhysicalGrid {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Quadrature of `∫_T x(ξ) dξ`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Reusable real FFT pair between `m`-mode coefficients and an `n`-point grid.
///
/// Owns its scratch buffers, so each path simulation keeps its own instance.
pub struct Transform {
    m: usize,
    n: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    spectrum: Vec<Complex<f64>>,
    scratch_fwd: Vec<Complex<f64>>,
    scratch_inv: Vec<Complex<f64>>,
}

impl Clone for Transform {
    fn clone(&self) -> Self {
        Transform {
            m: self.m,
            n: self.n,
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            spectrum: self.spectrum.clone(),
            scratch_fwd: self.scratch_fwd.clone(),
            scratch_inv: self.scratch_inv.clone(),
        }
    }
}

impl Transform {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if n < 2 * m + 1 {
            return Err(Error::GridTooSmall {
                n,
                m,
                need: 2 * m + 1,
            });
        }
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let spectrum = forward.make_output_vec();
        let scratch_fwd = forward.make_scratch_vec();
        let scratch_inv = inverse.make_scratch_vec();
        Ok(Transform {
            m,
            n,
            forward,
            inverse,
            spectrum,
            scratch_fwd,
            scratch_inv,
        })
    }

    /// Transform on the alias-free grid for cubic nonlinearities.
    pub fn dealiased(m: usize) -> Self {
        Self::new(m, dealiased_grid_size(m)).expect("dealiased grid always resolves m")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Evaluates flat coefficients on the grid.
    pub fn to_grid(&mut self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), 2 * self.m);
        debug_assert_eq!(out.len(), self.n);
        let m = self.m;
        for z in self.spectrum.iter_mut() {
            *z = Complex::new(0.0, 0.0);
        }
        for k in 1..=m {
            self.spectrum[k] = Complex::new(coeffs[k - 1], -coeffs[m + k - 1]) / SQRT_2;
        }
        self.inverse
            .process_with_scratch(&mut self.spectrum, out, &mut self.scratch_inv)
            .expect("spectrum has zero DC and Nyquist imaginary parts");
    }

    /// Galerkin projection of grid values onto the `m` modes; the mean is
    /// discarded. `grid` is used as scratch and left unspecified.
    pub fn project(&mut self, grid: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(grid.len(), self.n);
        debug_assert_eq!(out.len(), 2 * self.m);
        let m = self.m;
        self.forward
            .process_with_scratch(grid, &mut self.spectrum, &mut self.scratch_fwd)
            .expect("buffer sizes match the plan");
        let norm = SQRT_2 / self.n as f64;
        for k in 1..=m {
            let z = self.spectrum[k];
            out[k - 1] = z.re * norm;
            out[m + k - 1] = -z.im * norm;
        }
    }
}

/// Evaluates `field` at `ξ_j = j/n`.
pub fn to_physical(field: &SpectralField, n: usize) -> Result<PhysicalGrid> {
    let mut transform = Transform::new(field.m(), n)?;
    let mut values = vec![0.0; n];
    transform.to_grid(field.coeffs(), &mut values);
    Ok(PhysicalGrid { values })
}

/// Projects grid values onto `m` modes (`π_m`), dropping the mean.
pub fn from_physical(grid: &PhysicalGrid, m: usize) -> Result<SpectralField> {
    let mut transform = Transform::new(m, grid.n())?;
    let mut scratch = grid.values.clone();
    let mut out = SpectralField::zeros(m);
    transform.project(&mut scratch, out.coeffs_mut());
    Ok(out)
}

/// `π_m N(x)` with `N(x)(ξ) = x(ξ) - x(ξ)³`, evaluated without aliasing.
pub fn apply_n(field: &SpectralField) -> SpectralField {
    let mut transform = Transform::dealiased(field.m());
    let mut grid = vec![0.0; transform.n()];
    transform.to_grid(field.coeffs(), &mut grid);
    for v in grid.iter_mut() {
        *v -= *v * *v * *v;
    }
    let mut out = SpectralField::zeros(field.m());
    transform.project(&mut grid, out.coeffs_mut());
    out
}

/// `N(x)` without projection: all `3m` modes of `x - x³`, exact on a
/// `6m+1`-point grid.
pub fn apply_n_full(field: &SpectralField) -> SpectralField {
    let wide = field.resized(3 * field.m());
    let n = (6 * field.m() + 1).next_power_of_two();
    let mut transform = Transform::new(wide.m(), n).expect("grid is large enough");
    let mut grid = vec![0.0; n];
    transform.to_grid(wide.coeffs(), &mut grid);
    for v in grid.iter_mut() {
        *v -= *v * *v * *v;
    }
    let mut out = SpectralField::zeros(wide.m());
    transform.project(&mut grid, out.coeffs_mut());
    out
}

/// `‖N(x)‖_{-σ} / (1 + ‖x‖³_{(1-σ)/3})`.
pub fn growth_ratio(x: &SpectralField, sigma: f64) -> f64 {
    apply_n_full(x).sobolev_norm(-sigma) / (1.0 + x.sobolev_norm((1.0 - sigma) / 3.0).powi(3))
}

/// `‖N(x) - N(y)‖ / [(1 + ‖x‖²_{1/2} + ‖y‖²_{1/2}) ‖x - y‖]`; zero when `x = y`.
pub fn local_lipschitz_ratio(x: &SpectralField, y: &SpectralField) -> f64 {
    let d = x.distance(y);
    if d == 0.0 {
        return 0.0;
    }
    let num = apply_n_full(x).distance(&apply_n_full(y));
    num / ((1.0 + x.sobolev_norm(0.5).powi(2) + y.sobolev_norm(0.5).powi(2)) * d)
}

/// `⟨x, N(x)⟩` against the unprojected cubic, by `n`-point quadrature.
pub fn cubic_inner_product(field: &SpectralField, n: usize) -> Result<f64> {
    let grid = to_physical(field, n)?;
    Ok(grid
        .values
        .iter()
        .map(|&x| x * x - x * x * x * x)
        .sum::<f64>()
        / n as f64)
}
