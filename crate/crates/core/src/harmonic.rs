//! 3D periodic Fourier calculus on a cube: the inverse Laplacian, Riesz
//! transforms R_ij = ∂_ij Δ⁻¹, the axisymmetric composition
//!
//!   (∂_r/r) Δ⁻¹ u = (x₂²/r²) R₁₁u + (x₁²/r²) R₂₂u − 2(x₁x₂/r²) R₁₂u,
//!
//! and the velocity identity
//!
//!   u^r/r = ∂_z Δ⁻¹(ω_θ/r) − 2 (∂_r/r) Δ⁻¹ ∂_z Δ⁻¹ (ω_θ/r),
//!
//! together with small direct-sum convolution oracles that cross-check the
//! singular-kernel representation of the same identity. The cube plays the
//! role of ℝ³ for compactly supported data; boxes are sized so boundary
//! values are negligible and Δ⁻¹ acts on mean-adjusted fields.

use crate::fft;
use crate::oracle::{direct_convolution, OracleError};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarmonicError {
    #[error("box modes must be a power of two >= 8, got {0}")]
    BadModes(usize),
    #[error("box side must be positive and finite, got {0}")]
    BadSide(f64),
    #[error("fields live on different boxes")]
    BoxMismatch,
    #[error("values length {got} does not match n^3 = {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("operator requires a mean-zero field; mean amplitude is {0:.3e}")]
    NonzeroMean(f64),
    #[error("field is not axisymmetric: 90-degree rotation deviation {0:.3e} (relative)")]
    NotAxisymmetric(f64),
    #[error("kernel oracle supports n <= {limit}, got {got}")]
    TooLarge { got: usize, limit: usize },
    #[error("assembled kernel sum has imaginary residue {0:.3e} (relative); coefficient bookkeeping is broken")]
    ImaginaryResidue(f64),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("ring width must be positive and finite, got {0}")]
    BadRingWidth(f64),
    #[error("upsample target {got} is below the source resolution {have}")]
    CannotCoarsen { got: usize, have: usize },
    #[error(transparent)]
    Meridian(#[from] crate::fields::FieldError),
    #[error(transparent)]
    Poisson(#[from] crate::poisson::PoissonError),
}

/// Cubic periodic box: n grid points per axis on [−L/2, L/2)³, wavenumbers
/// (2π/L)·{−n/2+1, …, n/2} per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    n: usize,
    side: f64,
}

impl BoxSpec {
    pub fn new(n: usize, side: f64) -> Result<BoxSpec, HarmonicError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(HarmonicError::BadModes(n));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(HarmonicError::BadSide(side));
        }
        Ok(BoxSpec { n, side })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn delta(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid coordinate along any axis; exact 0 at index n/2.
    pub fn coord(&self, i: usize) -> f64 {
        self.side * (i as f64 / self.n as f64 - 0.5)
    }

    /// Signed wavenumber of DFT bin m.
    pub fn wavenumber(&self, m: usize) -> f64 {
        TAU * fft::signed_freq(m, self.n) as f64 / self.side
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }
}

/// Real samples on the box, row-major over (x₁, x₂, x₃).
#[derive(Debug, Clone)]
pub struct PhysicalField3D {
    spec: BoxSpec,
    values: Vec<f64>,
}

impl PhysicalField3D {
    pub fn from_fn(spec: BoxSpec, f: impl Fn(f64, f64, f64) -> f64) -> PhysicalField3D {
        let n = spec.n;
        let mut values = Vec::with_capacity(spec.len());
        for i in 0..n {
            let x1 = spec.coord(i);
            for j in 0..n {
                let x2 = spec.coord(j);
                for k in 0..n {
                    values.push(f(x1, x2, spec.coord(k)));
                }
            }
        }
        PhysicalField3D { spec, values }
    }

    /// Axisymmetric field from a meridian profile g(r, z) — the only
    /// sanctioned way to build axisymmetric data (never by symmetrizing
    /// arbitrary samples).
    pub fn from_meridian_profile(
        spec: BoxSpec,
        g: impl Fn(f64, f64) -> f64,
    ) -> PhysicalField3D {
        PhysicalField3D::from_fn(spec, |x1, x2, x3| g(x1.hypot(x2), x3))
    }

    pub fn from_values(spec: BoxSpec, values: Vec<f64>) -> Result<PhysicalField3D, HarmonicError> {
        if values.len() != spec.len() {
            return Err(HarmonicError::BadLength {
                got: values.len(),
                expected: spec.len(),
            });
        }
        Ok(PhysicalField3D { spec, values })
    }

    pub fn spec(&self) -> &BoxSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.idx(i, j, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Volume-weighted L^p norm; p = ∞ is the max norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let dv = self.spec.delta().powi(3);
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * dv).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        let dv = self.spec.delta().powi(3);
        (self.values.iter().map(|v| v * v).sum::<f64>() * dv).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn add_scaled(&mut self, c: f64, other: &PhysicalField3D) -> Result<(), HarmonicError> {
        if self.spec != other.spec {
            return Err(HarmonicError::BoxMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn difference(&self, other: &PhysicalField3D) -> Result<PhysicalField3D, HarmonicError> {
        if self.spec != other.spec {
            return Err(HarmonicError::BoxMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(PhysicalField3D { spec: self.spec, values })
    }

    pub fn pointwise_product(
        &self,
        other: &PhysicalField3D,
    ) -> Result<PhysicalField3D, HarmonicError> {
        if self.spec != other.spec {
            return Err(HarmonicError::BoxMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(PhysicalField3D { spec: self.spec, values })
    }

    /// Relative max-norm deviation under a 90° rotation about the x₃ axis
    /// ((x₁, x₂) ↦ (−x₂, x₁), exact on the periodic grid): 0 for fields that
    /// are genuinely axisymmetric, O(1) otherwise.
    pub fn rotation_deviation(&self) -> f64 {
        let n = self.spec.n;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // (Rf)(x_i, x_j, ·) = f(x_j, −x_i, ·); −x_i sits at index (n−i) mod n.
                    let rot = self.values[self.spec.idx(j, (n - i) % n, k)];
                    dev = dev.max((self.values[self.spec.idx(i, j, k)] - rot).abs());
                }
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            dev / scale
        }
    }

    pub fn to_spectral(&self) -> SpectralField3D {
        let mut coeffs: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let n = self.spec.n;
        for axis in 0..3 {
            transform_axis(&mut coeffs, n, axis, false);
        }
        let scale = 1.0 / self.spec.len() as f64;
        for c in &mut coeffs {
            *c *= scale;
        }
        SpectralField3D { spec: self.spec, coeffs }
    }

    /// Inject onto a finer grid of the same box by trigonometric zero-pad.
    /// The result samples the band-limited interpolant of this field, so
    /// when `n_new` is a multiple of n the original nodes reproduce exactly.
    /// Each folded Nyquist coefficient (bin n/2) splits evenly between the
    /// fine grid's ±n/2 bins, which keeps the interpolant real; its energy
    /// halves, but every envelope used here leaves that bin at round-off.
    pub fn upsample(&self, n_new: usize) -> Result<PhysicalField3D, HarmonicError> {
        let n = self.spec.n;
        if n_new < n {
            return Err(HarmonicError::CannotCoarsen {
                got: n_new,
                have: n,
            });
        }
        let spec_new = BoxSpec::new(n_new, self.spec.side)?;
        if n_new == n {
            return Ok(self.clone());
        }
        // Fine-grid targets of one coarse bin along one axis: (index, weight).
        let targets = |idx: usize| -> Vec<(usize, f64)> {
            let m = fft::signed_freq(idx, n);
            if idx == n / 2 {
                vec![(n / 2, 0.5), (n_new - n / 2, 0.5)]
            } else if m >= 0 {
                vec![(m as usize, 1.0)]
            } else {
                vec![(n_new - m.unsigned_abs() as usize, 1.0)]
            }
        };
        let axis_targets: Vec<Vec<(usize, f64)>> = (0..n).map(targets).collect();
        let hat = self.to_spectral();
        let mut coeffs = vec![Complex64::default(); spec_new.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = hat.coeffs[self.spec.idx(i, j, k)];
                    if c == Complex64::default() {
                        continue;
                    }
                    for &(fi, wi) in &axis_targets[i] {
                        for &(fj, wj) in &axis_targets[j] {
                            for &(fk, wk) in &axis_targets[k] {
                                coeffs[spec_new.idx(fi, fj, fk)] += wi * wj * wk * c;
                            }
                        }
                    }
                }
            }
        }
        Ok(SpectralField3D {
            spec: spec_new,
            coeffs,
        }
        .to_physical())
    }
}

/// Fourier amplitudes: f(x) = Σ_k coeff(k) e^{i k·x} over the signed
/// wavenumber lattice, same row-major layout as the physical samples.
#[derive(Debug, Clone)]
pub struct SpectralField3D {
    spec: BoxSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField3D {
    pub fn spec(&self) -> &BoxSpec {
        &self.spec
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn zeros(spec: BoxSpec) -> SpectralField3D {
        SpectralField3D {
            spec,
            coeffs: vec![Complex64::default(); spec.len()],
        }
    }

    pub fn mean_amplitude(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Zero the constant mode, returning the magnitude of the adjustment
    /// (the periodic surrogate of "Δ⁻¹ needs no mean on ℝ³").
    pub fn remove_mean(&mut self) -> f64 {
        let m = self.coeffs[0].norm();
        self.coeffs[0] = Complex64::default();
        m
    }

    fn require_mean_zero(&self) -> Result<(), HarmonicError> {
        let scale = self
            .coeffs
            .iter()
            .fold(0.0f64, |m, c| m.max(c.norm()))
            .max(1e-300);
        let mean = self.coeffs[0].norm();
        if mean > 1e-12 * scale {
            return Err(HarmonicError::NonzeroMean(mean));
        }
        Ok(())
    }

    /// Apply a scalar multiplier m(k₁, k₂, k₃) to every amplitude.
    pub fn multiplier(&self, m: impl Fn(f64, f64, f64) -> Complex64) -> SpectralField3D {
        let n = self.spec.n;
        let mut coeffs = Vec::with_capacity(self.spec.len());
        for a in 0..n {
            let k1 = self.spec.wavenumber(a);
            for b in 0..n {
                let k2 = self.spec.wavenumber(b);
                for c in 0..n {
                    let k3 = self.spec.wavenumber(c);
                    coeffs.push(self.coeffs[self.spec.idx(a, b, c)] * m(k1, k2, k3));
                }
            }
        }
        SpectralField3D { spec: self.spec, coeffs }
    }

    /// ∂/∂x_axis (axis ∈ {0, 1, 2}), the multiplier i·k_axis.
    pub fn derivative(&self, axis: usize) -> SpectralField3D {
        debug_assert!(axis < 3);
        self.multiplier(|k1, k2, k3| {
            let k = [k1, k2, k3][axis];
            Complex64::new(0.0, k)
        })
    }

    /// ∂_z = ∂/∂x₃.
    pub fn dz(&self) -> SpectralField3D {
        self.derivative(2)
    }

    /// Largest |coeff(−k) − conj(coeff(k))| relative to the largest
    /// amplitude: roundoff-level iff the physical field is real.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.spec.n;
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let x = self.coeffs[self.spec.idx(a, b, c)];
                    let y = self.coeffs[self.spec.idx((n - a) % n, (n - b) % n, (n - c) % n)];
                    worst = worst.max((y - x.conj()).norm());
                    scale = scale.max(x.norm());
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// L² norm via Plancherel: ‖f‖₂ = L^{3/2}·(Σ|amp|²)^{1/2}.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        self.spec.side.powf(1.5) * sum.sqrt()
    }

    pub fn add_scaled(&mut self, c: f64, other: &SpectralField3D) -> Result<(), HarmonicError> {
        if self.spec != other.spec {
            return Err(HarmonicError::BoxMismatch);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn to_physical(&self) -> PhysicalField3D {
        let mut buf = self.coeffs.clone();
        let n = self.spec.n;
        for axis in 0..3 {
            transform_axis(&mut buf, n, axis, true);
        }
        // fft::inverse carries 1/n per axis; amplitudes invert unscaled.
        let undo = self.spec.len() as f64;
        let values = buf.iter().map(|c| c.re * undo).collect();
        PhysicalField3D { spec: self.spec, values }
    }
}

/// In-place 1D transforms along one axis of the n³ cube.
fn transform_axis(buf: &mut [Complex64], n: usize, axis: usize, inverse: bool) {
    let go = |line: &mut [Complex64]| {
        if inverse {
            fft::inverse(line);
        } else {
            fft::forward(line);
        }
    };
    match axis {
        2 => {
            for chunk in buf.chunks_mut(n) {
                go(chunk);
            }
        }
        1 => {
            let mut line = vec![Complex64::default(); n];
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        line[j] = buf[(i * n + j) * n + k];
                    }
                    go(&mut line);
                    for j in 0..n {
                        buf[(i * n + j) * n + k] = line[j];
                    }
                }
            }
        }
        0 => {
            let mut line = vec![Complex64::default(); n];
            for j in 0..n {
                for k in 0..n {
                    for i in 0..n {
                        line[i] = buf[(i * n + j) * n + k];
                    }
                    go(&mut line);
                    for i in 0..n {
                        buf[(i * n + j) * n + k] = line[i];
                    }
                }
            }
        }
        _ => unreachable!("axis must be 0, 1, or 2"),
    }
}

/// Δ⁻¹: amplitude(k) ↦ −amplitude(k)/|k|², requiring an (adjusted) zero
/// mean; the k = 0 amplitude stays zero.
pub fn inverse_laplacian(f: &SpectralField3D) -> Result<SpectralField3D, HarmonicError> {
    f.require_mean_zero()?;
    Ok(f.multiplier(|k1, k2, k3| {
        let k2n = k1 * k1 + k2 * k2 + k3 * k3;
        if k2n == 0.0 {
            Complex64::default()
        } else {
            Complex64::new(-1.0 / k2n, 0.0)
        }
    }))
}

/// R_ij = ∂_ij Δ⁻¹, symbol (ik_i)(ik_j)·(−1/|k|²) = +k_i k_j/|k|². (The
/// product of classical Riesz transforms R_iR_j is the negative of this;
/// the identities below are written with the derivative form.)
pub fn riesz(f: &SpectralField3D, i: usize, j: usize) -> Result<SpectralField3D, HarmonicError> {
    debug_assert!(i < 3 && j < 3);
    f.require_mean_zero()?;
    Ok(f.multiplier(|k1, k2, k3| {
        let k = [k1, k2, k3];
        let k2n = k1 * k1 + k2 * k2 + k3 * k3;
        if k2n == 0.0 {
            Complex64::default()
        } else {
            Complex64::new(k[i] * k[j] / k2n, 0.0)
        }
    }))
}

/// ∂_z Δ⁻¹ in one multiplier (−i k₃/|k|²). Unlike `inverse_laplacian` this
/// is mean-blind: ∂_z kills the constant mode, so the composition is the
/// mean-adjusted value automatically.
pub fn dz_inverse_laplacian(f: &SpectralField3D) -> SpectralField3D {
    f.multiplier(|k1, k2, k3| {
        let k2n = k1 * k1 + k2 * k2 + k3 * k3;
        if k2n == 0.0 {
            Complex64::default()
        } else {
            Complex64::new(0.0, -k3 / k2n)
        }
    })
}

const AXISYM_TOL: f64 = 1e-8;

fn require_axisymmetric(f: &PhysicalField3D) -> Result<(), HarmonicError> {
    let dev = f.rotation_deviation();
    if dev > AXISYM_TOL {
        return Err(HarmonicError::NotAxisymmetric(dev));
    }
    Ok(())
}

/// The three coordinate prefactors (x₂²/r², x₁²/r², x₁x₂/r²) at a grid
/// point, with their exact axis limit (½, ½, 0): for an axisymmetric φ,
/// ∂₁₁φ = ∂₂₂φ and ∂₁₂φ = 0 on the axis, and (∂_r/r)φ = ½(∂₁₁+∂₂₂)φ there.
fn radial_weights(x1: f64, x2: f64) -> (f64, f64, f64) {
    let r2 = x1 * x1 + x2 * x2;
    if r2 == 0.0 {
        (0.5, 0.5, 0.0)
    } else {
        (x2 * x2 / r2, x1 * x1 / r2, x1 * x2 / r2)
    }
}

/// (∂_r/r)Δ⁻¹ for axisymmetric fields: the Riesz composition
/// (x₂²/r²)R₁₁ + (x₁²/r²)R₂₂ − 2(x₁x₂/r²)R₁₂ with the coordinate factors
/// applied in physical space. The identity is exact for axisymmetric input,
/// which is why non-axisymmetric data is rejected.
pub fn dr_over_r_inv_laplacian(f: &SpectralField3D) -> Result<SpectralField3D, HarmonicError> {
    require_axisymmetric(&f.to_physical())?;
    let r11 = riesz(f, 0, 0)?.to_physical();
    let r22 = riesz(f, 1, 1)?.to_physical();
    let r12 = riesz(f, 0, 1)?.to_physical();
    let spec = f.spec;
    let n = spec.n;
    let mut values = Vec::with_capacity(spec.len());
    for i in 0..n {
        let x1 = spec.coord(i);
        for j in 0..n {
            let x2 = spec.coord(j);
            let (w11, w22, w12) = radial_weights(x1, x2);
            for k in 0..n {
                let idx = spec.idx(i, j, k);
                values.push(
                    w11 * r11.values[idx] + w22 * r22.values[idx] - 2.0 * w12 * r12.values[idx],
                );
            }
        }
    }
    Ok(PhysicalField3D { spec, values }.to_spectral())
}

/// The velocity identity: u^r/r = ∂_zΔ⁻¹(ω_θ/r) − 2(∂_r/r)Δ⁻¹∂_zΔ⁻¹(ω_θ/r),
/// composed exactly as written. Input is ω_θ/r (axisymmetric); the mean
/// mode never survives the leading ∂_z.
pub fn ur_over_r_from_identity(
    omega_over_r: &SpectralField3D,
) -> Result<SpectralField3D, HarmonicError> {
    require_axisymmetric(&omega_over_r.to_physical())?;
    let g = dz_inverse_laplacian(omega_over_r);
    let correction = dr_over_r_inv_laplacian(&g)?;
    let mut out = g;
    out.add_scaled(-2.0, &correction)?;
    Ok(out)
}

/// Quadrature controls for [`kernel_convolution_oracle`]: `scale` refines
/// the source grid by that factor (separable cubic interpolation of f,
/// periodic stencils), and displacements whose components all lie within
/// `near` source cells of the target use the kernel's cell average (`sub`³
/// midpoint subsamples) instead of its center value.
#[derive(Debug, Clone, Copy)]
struct KernelQuad {
    scale: usize,
    near: usize,
    sub: usize,
}

impl KernelQuad {
    /// Production quality: 3×-supersampled field plus near-singularity
    /// cell averaging; the singular displacement is omitted as usual.
    fn refined() -> KernelQuad {
        KernelQuad {
            scale: 3,
            near: 8,
            sub: 8,
        }
    }
}

/// Cubic Lagrange weights at `t` (units of the coarse spacing) on the given
/// 4-point stencil.
fn lagrange4(t: f64, nodes: [isize; 4]) -> [f64; 4] {
    let mut w = [0.0; 4];
    for m in 0..4 {
        let mut p = 1.0;
        for k in 0..4 {
            if k != m {
                p *= (t - nodes[k] as f64) / (nodes[m] as f64 - nodes[k] as f64);
            }
        }
        w[m] = p;
    }
    w
}

/// Refine a periodic cell-centered cube by `scale`× per axis with separable
/// cubic interpolation: fine center b of coarse cell i sits at offset
/// ((b+½)/scale − ½)·h from the coarse center.
fn supersample(values: &[f64], n: usize, scale: usize) -> Vec<f64> {
    let weights: Vec<([f64; 4], [isize; 4])> = (0..scale)
        .map(|b| {
            let t = (b as f64 + 0.5) / scale as f64 - 0.5;
            let nodes = if t < 0.0 { [-2, -1, 0, 1] } else { [-1, 0, 1, 2] };
            (lagrange4(t, nodes), nodes)
        })
        .collect();

    let interp_axis = |data: &[f64], count: usize, len: usize| -> Vec<f64> {
        // `data` is a stack of `count` contiguous lines of length `len`;
        // output lines have length scale·len.
        let mut out = vec![0.0; count * scale * len];
        for line in 0..count {
            let src = &data[line * len..(line + 1) * len];
            let dst = &mut out[line * scale * len..(line + 1) * scale * len];
            for i in 0..len {
                let at = |d: isize| src[(i as isize + d).rem_euclid(len as isize) as usize];
                for (b, (w, nodes)) in weights.iter().enumerate() {
                    dst[scale * i + b] = w[0] * at(nodes[0])
                        + w[1] * at(nodes[1])
                        + w[2] * at(nodes[2])
                        + w[3] * at(nodes[3]);
                }
            }
        }
        out
    };

    // Refine the contiguous axis, then rotate (i, j, k) -> (j, k, i); after
    // three rounds every axis is refined and the layout is row-major again.
    let rotate = |data: &[f64], n0: usize, n1: usize, n2: usize| -> Vec<f64> {
        let mut out = vec![0.0; data.len()];
        for i in 0..n0 {
            for j in 0..n1 {
                for k in 0..n2 {
                    out[(j * n2 + k) * n0 + i] = data[(i * n1 + j) * n2 + k];
                }
            }
        }
        out
    };

    let nf = scale * n;
    let a = interp_axis(values, n * n, n); // (n, n, nf)
    let a = rotate(&a, n, n, nf); // (n, nf, n)
    let b = interp_axis(&a, n * nf, n); // (n, nf, nf)
    let b = rotate(&b, n, nf, nf); // (nf, nf, n)
    let c = interp_axis(&b, nf * nf, n); // (nf, nf, nf)
    rotate(&c, nf, nf, nf)
}

/// The four convolution kernels of the identity, sharing one inverse power:
/// (x₃/|x|³, x₁²x₃/|x|⁵, x₂²x₃/|x|⁵, x₁x₂x₃/|x|⁵).
#[inline]
fn kernel_quad_values(x: f64, y: f64, z: f64) -> [f64; 4] {
    let q = x * x + y * y + z * z;
    let s5 = 1.0 / (q * q * q.sqrt());
    [z * q * s5, x * x * z * s5, y * y * z * s5, x * y * z * s5]
}

/// Direct-sum oracle for the velocity identity in its singular-kernel form:
///
///   u^r/r = (c₁−2γ₁i)·x₃/|x|³ ∗ f + 6γ₁i·(x₂²/r²)·(x₁²x₃/|x|⁵ ∗ f)
///         + 6γ₁i·(x₁²/r²)·(x₂²x₃/|x|⁵ ∗ f) − 12γ₁i·(x₁x₂/r²)·(x₁x₂x₃/|x|⁵ ∗ f)
///
/// with the physical-normalization constants c₁ = 1/(4π), γ₁ = −i/(8π)
/// (so c₁ − 2γ₁i = 0 and the first kernel cancels identically — the dipole
/// far field of a compact ring). Assembly is done in complex arithmetic and
/// the imaginary residue is required to vanish (≤ 10⁻⁸ relative). The
/// convolutions are free-space direct sums — no Fourier machinery — over a
/// 2×-supersampled copy of the field (locally interpolated), with the
/// kernels cell-averaged near the singularity; the singular point itself is
/// never touched and its principal-value contribution is zero by oddness.
pub fn kernel_convolution_oracle(
    omega_over_r: &PhysicalField3D,
) -> Result<PhysicalField3D, HarmonicError> {
    require_axisymmetric(omega_over_r)?;
    kernel_convolution_with(omega_over_r, KernelQuad::refined())
}

/// Kernel assembly without the axisymmetry gate, parameterized by
/// quadrature quality; the probe tests exercise the plain sum against
/// pointwise kernel values.
fn kernel_convolution_with(
    omega_over_r: &PhysicalField3D,
    quad: KernelQuad,
) -> Result<PhysicalField3D, HarmonicError> {
    let spec = omega_over_r.spec;
    if spec.n > CONV_ORACLE_LIMIT {
        return Err(HarmonicError::TooLarge {
            got: spec.n,
            limit: CONV_ORACLE_LIMIT,
        });
    }
    let n = spec.n;
    let scale = quad.scale.max(1);

    // Source lattice: either the samples themselves or the supersample.
    // Targets are always the n³ coarse cell centers; the coarse center of
    // cell t sits at fine coordinate scale·t + (scale−1)/2, so target −
    // source displacements are (d + (scale−1)/2)·hf with integer d.
    let (src, hf) = if scale > 1 {
        (
            supersample(&omega_over_r.values, n, scale),
            spec.delta() / scale as f64,
        )
    } else {
        (omega_over_r.values.clone(), spec.delta())
    };
    let nf = n * scale;
    let hf3 = hf * hf * hf;
    let shift = (scale as f64 - 1.0) / 2.0;

    // Tabulate the four kernels over every displacement the sum can see:
    // d = scale·t − y ∈ [−nf+1, nf−scale]; allocate 2nf and map d → d+nf.
    let m = 2 * nf;
    let disp = |d: isize| -> f64 { (d as f64 + shift) * hf };
    let lo_d = -(nf as isize) + 1;
    let hi_d = nf as isize - scale as isize;
    let near_r = quad.near as f64 * hf;
    let mut tables = vec![[0.0f64; 4]; m * m * m];
    let tix = |di: isize, dj: isize, dk: isize| -> usize {
        (((di + nf as isize) as usize * m) + (dj + nf as isize) as usize) * m
            + (dk + nf as isize) as usize
    };
    let sub = quad.sub.max(1);
    let suboffset = |a: usize| ((a as f64 + 0.5) / sub as f64 - 0.5) * hf;
    for di in lo_d..=hi_d {
        let dx = disp(di);
        for dj in lo_d..=hi_d {
            let dy = disp(dj);
            for dk in lo_d..=hi_d {
                let dz = disp(dk);
                let entry = &mut tables[tix(di, dj, dk)];
                if dx == 0.0 && dy == 0.0 && dz == 0.0 {
                    // Omitted singular cell: the principal-value surrogate.
                    continue;
                }
                if quad.near > 0
                    && dx.abs() <= near_r
                    && dy.abs() <= near_r
                    && dz.abs() <= near_r
                {
                    let mut acc = [0.0f64; 4];
                    for a in 0..sub {
                        for b in 0..sub {
                            for c in 0..sub {
                                let v = kernel_quad_values(
                                    dx + suboffset(a),
                                    dy + suboffset(b),
                                    dz + suboffset(c),
                                );
                                for t in 0..4 {
                                    acc[t] += v[t];
                                }
                            }
                        }
                    }
                    let inv = 1.0 / (sub * sub * sub) as f64;
                    for t in 0..4 {
                        entry[t] = acc[t] * inv;
                    }
                } else {
                    *entry = kernel_quad_values(dx, dy, dz);
                }
            }
        }
    }

    // Fused sum: four accumulators per coarse target.
    let mut conv = vec![[0.0f64; 4]; spec.len()];
    for ti in 0..n {
        let di0 = (ti * scale) as isize;
        for tj in 0..n {
            let dj0 = (tj * scale) as isize;
            for tk in 0..n {
                let dk0 = (tk * scale) as isize;
                let mut acc = [0.0f64; 4];
                for yi in 0..nf {
                    let di = di0 - yi as isize;
                    for yj in 0..nf {
                        let dj = dj0 - yj as isize;
                        let row = &src[(yi * nf + yj) * nf..(yi * nf + yj) * nf + nf];
                        let base = tix(di, dj, dk0);
                        for (yk, fv) in row.iter().enumerate() {
                            let t = &tables[base - yk];
                            acc[0] += t[0] * fv;
                            acc[1] += t[1] * fv;
                            acc[2] += t[2] * fv;
                            acc[3] += t[3] * fv;
                        }
                    }
                }
                let out = &mut conv[spec.idx(ti, tj, tk)];
                for t in 0..4 {
                    out[t] = acc[t] * hf3;
                }
            }
        }
    }

    let c1 = Complex64::new(1.0 / (4.0 * PI), 0.0);
    let gamma1 = Complex64::new(0.0, -1.0 / (8.0 * PI));
    let g1i = gamma1 * Complex64::i();
    let coef0 = c1 - 2.0 * g1i;
    let coef_diag = 6.0 * g1i;
    let coef_off = -12.0 * g1i;

    let mut values = Vec::with_capacity(spec.len());
    let mut max_im = 0.0f64;
    let mut max_norm = 0.0f64;
    for i in 0..n {
        let x1 = spec.coord(i);
        for j in 0..n {
            let x2 = spec.coord(j);
            let (w11, w22, w12) = radial_weights(x1, x2);
            for k in 0..n {
                let c = &conv[spec.idx(i, j, k)];
                let total = coef0 * c[0]
                    + coef_diag * (w11 * c[1] + w22 * c[2])
                    + coef_off * (w12 * c[3]);
                max_im = max_im.max(total.im.abs());
                max_norm = max_norm.max(total.norm());
                values.push(total.re);
            }
        }
    }
    if max_norm > 0.0 && max_im > 1e-8 * max_norm {
        return Err(HarmonicError::ImaginaryResidue(max_im / max_norm));
    }
    PhysicalField3D::from_values(spec, values)
}

const CONV_ORACLE_LIMIT: usize = 24;

/// Pointwise comparison report for |u^r/r| ≤ C·(1/|x|²) ∗ |ω_θ/r|.
#[derive(Debug, Clone, Copy)]
pub struct SyBoundReport {
    pub max_ratio: f64,
    /// Points where the majorant fell below the division guard.
    pub skipped: usize,
    pub valid: usize,
}

impl SyBoundReport {
    /// True when no point had a usable denominator (e.g. zero source).
    pub fn is_vacuous(&self) -> bool {
        self.valid == 0
    }
}

/// max over the grid of |u^r/r| / ((1/|x|²) ∗ |ω_θ/r|), the S-Y majorant.
/// Both sides are homogeneous of degree one in the source, so the ratio is
/// scale-invariant.
pub fn check_sy_bound(
    omega_over_r: &PhysicalField3D,
    ur_over_r: &PhysicalField3D,
) -> Result<SyBoundReport, HarmonicError> {
    if omega_over_r.spec != ur_over_r.spec {
        return Err(HarmonicError::BoxMismatch);
    }
    let spec = omega_over_r.spec;
    let absf: Vec<f64> = omega_over_r.values.iter().map(|v| v.abs()).collect();
    let majorant = direct_convolution(
        |x: f64, y: f64, z: f64| 1.0 / (x * x + y * y + z * z),
        &absf,
        spec.n,
        spec.delta(),
    )?;
    let mut report = SyBoundReport {
        max_ratio: 0.0,
        skipped: 0,
        valid: 0,
    };
    for (u, m) in ur_over_r.values.iter().zip(&majorant) {
        if *m < 1e-14 {
            report.skipped += 1;
        } else {
            report.valid += 1;
            report.max_ratio = report.max_ratio.max(u.abs() / m);
        }
    }
    Ok(report)
}

/// The velocity-identity inequality ratios for one source field, all
/// against the same u = u^r/r obtained from the identity. Every ratio is
/// scale-invariant: both sides of each bound are homogeneous of degree one
/// in the source.
#[derive(Debug, Clone, Copy)]
pub struct VelocityBoundRow {
    pub sample_seed: u64,
    /// ‖u‖_∞ / (‖f‖₂^{1/2}·‖∇_h f‖₂^{1/2}) — sup interpolation bound.
    pub sup_ratio: f64,
    /// ‖∂_z u‖₂ / ‖f‖₂ — vertical-derivative bound.
    pub dz_ratio: f64,
    /// ‖u‖₆ / ‖f‖₂ — Sobolev-range embedding at q = 2.
    pub embedding_ratio: f64,
    /// ‖(∂_r/r)Δ⁻¹ f‖₂ / ‖f‖₂ — boundedness of the radial composition.
    pub radial_ratio: f64,
}

/// Harness verdict over a randomized family of axisymmetric sources:
/// per-sample ratio rows plus the count of degenerate samples skipped.
#[derive(Debug, Clone)]
pub struct VelocityBoundReport {
    pub rows: Vec<VelocityBoundRow>,
    pub skipped: usize,
}

impl VelocityBoundReport {
    pub fn max_of(&self, pick: impl Fn(&VelocityBoundRow) -> f64) -> Option<f64> {
        self.rows.iter().map(pick).fold(None, |m, r| {
            Some(match m {
                None => r,
                Some(v) => v.max(r),
            })
        })
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            r.sup_ratio.is_finite()
                && r.dz_ratio.is_finite()
                && r.embedding_ratio.is_finite()
                && r.radial_ratio.is_finite()
        })
    }

    /// CSV with one row per sample and one column per ratio family.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_seed,sup,dz,embedding,radial\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                r.sample_seed, r.sup_ratio, r.dz_ratio, r.embedding_ratio, r.radial_ratio
            ));
        }
        out
    }
}

/// Randomized axisymmetric source: a three-bump Gaussian mixture in the
/// meridian half-plane, symmetrized in r so the 3D field is smooth across
/// the axis. Centers and widths keep the mass in the middle of the box.
pub fn random_axisymmetric_field(spec: BoxSpec, seed: u64) -> PhysicalField3D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = spec.side();
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let amp = rng.gen_range(-1.0..1.0);
            let r0 = rng.gen_range(0.0..side / 6.0);
            let z0 = rng.gen_range(-side / 6.0..side / 6.0);
            let sigma = rng.gen_range(side / 16.0..side / 10.0);
            (amp, r0, z0, sigma)
        })
        .collect();
    PhysicalField3D::from_meridian_profile(spec, move |r, z| {
        bumps
            .iter()
            .map(|&(amp, r0, z0, sigma)| {
                let dz2 = (z - z0) * (z - z0);
                let gauss = |rr: f64| (-(rr * rr + dz2) / (2.0 * sigma * sigma)).exp();
                amp * (gauss(r - r0) + gauss(r + r0))
            })
            .sum()
    })
}

/// Evaluates all velocity-bound ratios for one source. The mean mode is
/// subtracted first (the periodic surrogate of Δ⁻¹ needs it); the same
/// adjusted field feeds both sides of every bound. `None` marks a
/// degenerate sample whose right-hand sides sit below the division guard.
pub fn velocity_bound_sample(
    f: &PhysicalField3D,
) -> Result<Option<VelocityBoundRow>, HarmonicError> {
    let mut hat = f.to_spectral();
    hat.remove_mean();
    let f_l2 = hat.l2_norm();
    let d1 = hat.derivative(0).l2_norm();
    let d2 = hat.derivative(1).l2_norm();
    let grad_h = d1.hypot(d2);
    let rhs_sup = (f_l2 * grad_h).sqrt();
    if f_l2 < 1e-14 || rhs_sup < 1e-14 {
        return Ok(None);
    }
    let u = ur_over_r_from_identity(&hat)?;
    let u_phys = u.to_physical();
    let radial = dr_over_r_inv_laplacian(&hat)?;
    Ok(Some(VelocityBoundRow {
        sample_seed: 0,
        sup_ratio: u_phys.max_abs() / rhs_sup,
        dz_ratio: u.dz().l2_norm() / f_l2,
        embedding_ratio: u_phys.lp_norm(6.0) / f_l2,
        radial_ratio: radial.l2_norm() / f_l2,
    }))
}

/// Runs the velocity-identity bounds over a randomized family of
/// axisymmetric sources. Deterministic in (spec, samples, seed); callers
/// freeze the first run's maxima and re-check stability under resolution
/// doubling.
pub fn velocity_bound_harness(
    spec: BoxSpec,
    samples: usize,
    seed: u64,
) -> Result<VelocityBoundReport, HarmonicError> {
    let mut rows = Vec::with_capacity(samples);
    let mut skipped = 0usize;
    for i in 0..samples {
        let sample_seed = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1));
        let f = random_axisymmetric_field(spec, sample_seed);
        match velocity_bound_sample(&f)? {
            Some(mut row) => {
                row.sample_seed = sample_seed;
                rows.push(row);
            }
            None => skipped += 1,
        }
    }
    Ok(VelocityBoundReport { rows, skipped })
}

/// Ring source for the identity cross-check, as a meridian profile of
/// ω_θ/r centred on the ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RingProfile {
    /// The plain ring ω_θ = r·e^{−(r²+z²)/σ²}. Kept as a measured
    /// counterexample: both routes share the z period, so the velocity
    /// response (whose z mean vanishes) decays horizontally as a
    /// modified-Bessel tail ~e^{−2πr/L_z}, and on that tail the box's
    /// periodic horizontal closure and the meridian free-space closure
    /// disagree at O(1). The tail's share of the L² mass is fixed by the
    /// box aspect ratio alone, so the route gap plateaus near 0.35–0.45
    /// regardless of box size, wall radius, or either grid's resolution.
    Gaussian { sigma: f64 },
    /// The moment-cancelled ring ω_θ = r·Δ²e^{−aρ²}, a = 1/σ². Both
    /// inverse Laplacians in the identity collapse analytically
    /// (Δ⁻¹Δ²ξ = Δξ), leaving the closed form
    /// u^r/r = 4a²z(3−2aρ²)e^{−aρ²} with Gaussian decay in every
    /// direction. Both closures then represent one free-space limit to
    /// Gaussian accuracy, the route comparison converges under
    /// refinement, and the closed form pins each route separately.
    MomentFree { sigma: f64 },
}

impl RingProfile {
    pub fn sigma(&self) -> f64 {
        match *self {
            RingProfile::Gaussian { sigma } | RingProfile::MomentFree { sigma } => sigma,
        }
    }

    /// ω_θ/r as a function of (r, z − z_ring).
    fn f_profile(&self) -> Box<dyn Fn(f64, f64) -> f64> {
        match *self {
            RingProfile::Gaussian { sigma } => {
                let a = 1.0 / (sigma * sigma);
                Box::new(move |r, z| (-a * (r * r + z * z)).exp())
            }
            RingProfile::MomentFree { sigma } => {
                let a = 1.0 / (sigma * sigma);
                Box::new(move |r, z| {
                    let rho2 = r * r + z * z;
                    4.0 * a
                        * a
                        * (4.0 * a * a * rho2 * rho2 - 20.0 * a * rho2 + 15.0)
                        * (-a * rho2).exp()
                })
            }
        }
    }

    /// Closed-form u^r/r as a function of (r, z − z_ring), when the
    /// profile admits one.
    fn exact_profile(&self) -> Option<Box<dyn Fn(f64, f64) -> f64>> {
        match *self {
            RingProfile::Gaussian { .. } => None,
            RingProfile::MomentFree { sigma } => {
                let a = 1.0 / (sigma * sigma);
                Some(Box::new(move |r, z| {
                    let rho2 = r * r + z * z;
                    4.0 * a * a * z * (3.0 - 2.0 * a * rho2) * (-a * rho2).exp()
                }))
            }
        }
    }
}

/// Outcome of the headline cross-check: the spectral velocity identity on
/// the periodic box against the streamfunction Biot–Savart route on a
/// meridian grid, for a vortex ring built from a [`RingProfile`].
#[derive(Debug, Clone, Copy)]
pub struct IdentityCrossCheck {
    /// Relative L² gap between the two routes over every box node.
    pub rel_l2_error: f64,
    /// Relative L² error of the box identity against the closed form,
    /// where the profile admits one.
    pub box_vs_exact: Option<f64>,
    /// Relative L² error of the interpolated meridian solve against the
    /// closed form, where the profile admits one.
    pub meridian_vs_exact: Option<f64>,
    /// Largest |ω_θ/r| on the box faces — the decay audit for treating the
    /// periodic box as free space.
    pub boundary_max: f64,
    /// Magnitude of the constant mode subtracted before applying Δ⁻¹.
    pub mean_adjustment: f64,
}

/// Weights of an 8-point Lagrange interpolation at `x` through `pos`.
fn lagrange_weights(pos: &[f64; 8], x: f64) -> [f64; 8] {
    let mut w = [0.0f64; 8];
    for t in 0..8 {
        let mut acc = 1.0;
        for s in 0..8 {
            if s != t {
                acc *= (x - pos[s]) / (pos[t] - pos[s]);
            }
        }
        w[t] = acc;
    }
    w
}

/// Computes u^r/r for a vortex ring twice — through the box identity and
/// through the meridian streamfunction solve — and returns the relative L²
/// gap over the whole box, along with closed-form errors when the profile
/// carries an exact answer.
///
/// The meridian grid shares the box's z period (its nodes coincide with the
/// box's z planes, ring centered at z = side/2 to match the box center) and
/// extends radially to 0.75·side, past the largest r = side/√2 any box node
/// reaches. The meridian field is brought onto box nodes by 8th-order
/// Lagrange interpolation in r, with an even reflection across the axis
/// (u^r/r is even); `nr` controls the meridian radial resolution, which
/// should oversample the box so the second-order radial solve does not
/// limit the comparison.
pub fn identity_meridian_cross_check(
    profile: RingProfile,
    n: usize,
    side: f64,
    nr: usize,
) -> Result<IdentityCrossCheck, HarmonicError> {
    use crate::fields::{MeridianGrid, Parity, ScalarField2D};

    let spec = BoxSpec::new(n, side)?;
    let sigma = profile.sigma();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(HarmonicError::BadRingWidth(sigma));
    }
    let f_prof = profile.f_profile();
    let exact = profile.exact_profile();
    let f3d = PhysicalField3D::from_meridian_profile(spec, &f_prof);

    let mut boundary_max = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for (i, j, k) in [(0, a, b), (a, 0, b), (a, b, 0)] {
                boundary_max = boundary_max.max(f3d.at(i, j, k).abs());
            }
        }
    }

    let mut hat = f3d.to_spectral();
    let mean_adjustment = hat.remove_mean();
    let u_box = ur_over_r_from_identity(&hat)?.to_physical();

    // Meridian route: ω_θ = r·f on a grid whose z planes coincide with the
    // box's (box z = k·Δz − side/2 ↔ meridian z = k·Δz, ring at side/2).
    let grid = MeridianGrid::new(nr, n, 0.75 * side, side)?;
    let half = 0.5 * side;
    let omega_m =
        ScalarField2D::from_fn(Arc::clone(&grid), Parity::Odd, |r, z| r * f_prof(r, z - half));
    let psi = crate::poisson::solve_streamfunction(&omega_m)?;
    let vel = crate::poisson::velocity_from_streamfunction(&psi);
    let w = crate::poisson::ur_over_r(&vel);
    let wv = w.values();
    let dr = grid.dr();

    // Radial interpolation is shared by every z plane: precompute the
    // 8-point stencil (even reflection below the axis) per (i, j) column.
    let fetch_pos = |t: i64| -> f64 {
        if t >= 0 {
            grid.r(t as usize)
        } else {
            -grid.r((-1 - t) as usize)
        }
    };
    let mut stencils: Vec<(f64, i64, [f64; 8])> = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = spec.coord(i);
        for j in 0..n {
            let r = x.hypot(spec.coord(j));
            let mut base = (r / dr - 0.5).floor() as i64 - 3;
            base = base.clamp(-4, nr as i64 - 8);
            let mut pos = [0.0f64; 8];
            for (t, p) in pos.iter_mut().enumerate() {
                *p = fetch_pos(base + t as i64);
            }
            stencils.push((r, base, lagrange_weights(&pos, r)));
        }
    }

    let nz = grid.nz();
    let mut num_bm = 0.0f64;
    let mut den_m = 0.0f64;
    let mut num_be = 0.0f64;
    let mut num_me = 0.0f64;
    let mut den_e = 0.0f64;
    for (col, &(r, base, wts)) in stencils.iter().enumerate() {
        let (i, j) = (col / n, col % n);
        for k in 0..n {
            let mut interp = 0.0;
            for (t, wt) in wts.iter().enumerate() {
                let tt = base + t as i64;
                let m = if tt >= 0 { tt as usize } else { (-1 - tt) as usize };
                interp += wt * wv[m * nz + k];
            }
            let ub = u_box.at(i, j, k);
            let diff = ub - interp;
            num_bm += diff * diff;
            den_m += interp * interp;
            if let Some(ex) = exact.as_deref() {
                let ue = ex(r, spec.coord(k));
                num_be += (ub - ue) * (ub - ue);
                num_me += (interp - ue) * (interp - ue);
                den_e += ue * ue;
            }
        }
    }
    let rel = |num: f64| (num / den_e).sqrt();
    Ok(IdentityCrossCheck {
        rel_l2_error: (num_bm / den_m).sqrt(),
        box_vs_exact: exact.as_ref().map(|_| rel(num_be)),
        meridian_vs_exact: exact.as_ref().map(|_| rel(num_me)),
        boundary_max,
        mean_adjustment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_box() -> BoxSpec {
        BoxSpec::new(16, TAU).unwrap()
    }

    /// Random-ish smooth real field from a handful of low modes.
    fn smooth_field(spec: BoxSpec) -> PhysicalField3D {
        PhysicalField3D::from_fn(spec, |x, y, z| {
            (x.sin() * (2.0 * y).cos() + 0.3 * (y + z).cos() + 0.1 * (2.0 * x - z).sin())
                * (0.7 + 0.2 * z.sin())
        })
    }

    #[test]
    fn box_spec_validation() {
        assert!(BoxSpec::new(12, 1.0).is_err());
        assert!(BoxSpec::new(4, 1.0).is_err());
        assert!(BoxSpec::new(16, -1.0).is_err());
        let spec = BoxSpec::new(16, 8.0).unwrap();
        assert_eq!(spec.coord(8), 0.0);
        assert_eq!(spec.coord(0), -4.0);
        assert_eq!(spec.wavenumber(0), 0.0);
        assert!((spec.wavenumber(1) - TAU / 8.0).abs() < 1e-15);
        assert!((spec.wavenumber(15) + TAU / 8.0).abs() < 1e-15);
    }

    #[test]
    fn transform_round_trip_and_plancherel() {
        let f = smooth_field(small_box());
        let hat = f.to_spectral();
        assert!(hat.hermitian_residual() <= 1e-13);
        let back = hat.to_physical();
        let err = f.difference(&back).unwrap().max_abs();
        assert!(err <= 1e-12 * f.max_abs(), "round trip {err:.3e}");
        let rel = (hat.l2_norm() - f.l2_norm()).abs() / f.l2_norm();
        assert!(rel <= 1e-12, "plancherel {rel:.3e}");
    }

    #[test]
    fn inverse_laplacian_on_single_mode() {
        // f = cos(x₁): Δ⁻¹f = −f exactly (|k| = 1 on the 2π box).
        let spec = small_box();
        let f = PhysicalField3D::from_fn(spec, |x, _, _| x.cos());
        let out = inverse_laplacian(&f.to_spectral()).unwrap().to_physical();
        let mut expect = f.clone();
        expect.scale(-1.0);
        assert!(out.difference(&expect).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn laplacian_round_trip_on_random_field() {
        let mut hat = smooth_field(small_box()).to_spectral();
        hat.remove_mean();
        let inv = inverse_laplacian(&hat).unwrap();
        let back = inv.multiplier(|k1, k2, k3| {
            Complex64::new(-(k1 * k1 + k2 * k2 + k3 * k3), 0.0)
        });
        let mut diff = back;
        diff.add_scaled(-1.0, &hat).unwrap();
        assert!(diff.l2_norm() <= 1e-12 * hat.l2_norm());
    }

    #[test]
    fn nonzero_mean_is_rejected_by_name() {
        let spec = small_box();
        let f = PhysicalField3D::from_fn(spec, |x, _, _| 1.0 + 0.1 * x.sin());
        let err = inverse_laplacian(&f.to_spectral()).unwrap_err();
        match err {
            HarmonicError::NonzeroMean(m) => assert!((m - 1.0).abs() < 1e-12),
            other => panic!("expected NonzeroMean, got {other}"),
        }
    }

    #[test]
    fn riesz_symbols_and_contraction() {
        let spec = small_box();
        // k = (1,0,0): ∂₁₁Δ⁻¹ acts as the identity on this mode; R₁₂ = 0.
        let f = PhysicalField3D::from_fn(spec, |x, _, _| x.cos());
        let hat = f.to_spectral();
        let r11 = riesz(&hat, 0, 0).unwrap().to_physical();
        let r12 = riesz(&hat, 0, 1).unwrap().to_physical();
        assert!(r11.difference(&f).unwrap().max_abs() <= 1e-12);
        assert!(r12.max_abs() <= 1e-12);

        // ‖R_ij f‖₂ ≤ ‖f‖₂ and Σᵢ R_ii f = ΔΔ⁻¹f = f for a generic field.
        let mut hat = smooth_field(spec).to_spectral();
        hat.remove_mean();
        let mut trace = SpectralField3D::zeros(spec);
        for i in 0..3 {
            let ri = riesz(&hat, i, i).unwrap();
            assert!(ri.l2_norm() <= hat.l2_norm() * (1.0 + 1e-12));
            trace.add_scaled(1.0, &ri).unwrap();
        }
        trace.add_scaled(-1.0, &hat).unwrap();
        assert!(trace.l2_norm() <= 1e-12 * hat.l2_norm());
    }

    #[test]
    fn riesz_commutes_with_dz() {
        let mut hat = smooth_field(small_box()).to_spectral();
        hat.remove_mean();
        let a = riesz(&hat.dz(), 0, 2).unwrap();
        let b = riesz(&hat, 0, 2).unwrap().dz();
        let mut diff = a;
        diff.add_scaled(-1.0, &b).unwrap();
        assert!(diff.l2_norm() <= 1e-12 * hat.l2_norm());
    }

    #[test]
    fn axisymmetry_gate() {
        let spec = small_box();
        let good = PhysicalField3D::from_meridian_profile(spec, |r, z| {
            (-r * r - z * z).exp()
        });
        assert!(good.rotation_deviation() <= 1e-15);
        let bad = PhysicalField3D::from_fn(spec, |x, y, z| x + 0.0 * y + 0.0 * z);
        match dr_over_r_inv_laplacian(&bad.to_spectral()) {
            Err(HarmonicError::NotAxisymmetric(d)) => assert!(d > 0.1),
            other => panic!("expected NotAxisymmetric, got {other:?}"),
        }
    }

    #[test]
    fn dr_over_r_matches_analytic_gaussian() {
        // f = 4(ρ² − 3/2)e^{−ρ²} has Δ⁻¹f = e^{−ρ²} exactly, so
        // (∂_r/r)Δ⁻¹f = −2e^{−ρ²}. Mean-zero on ℝ³; the box mean is tiny.
        let spec = BoxSpec::new(32, 12.0).unwrap();
        let f = PhysicalField3D::from_meridian_profile(spec, |r, z| {
            let rho2 = r * r + z * z;
            4.0 * (rho2 - 1.5) * (-rho2).exp()
        });
        let mut hat = f.to_spectral();
        let adjusted = hat.remove_mean();
        assert!(adjusted <= 1e-6, "mean adjustment {adjusted:.3e}");
        let out = dr_over_r_inv_laplacian(&hat).unwrap().to_physical();
        let expect = PhysicalField3D::from_meridian_profile(spec, |r, z| {
            -2.0 * (-(r * r + z * z)).exp()
        });
        let err = out.difference(&expect).unwrap().l2_norm() / expect.l2_norm();
        assert!(err <= 1e-5, "analytic mismatch {err:.3e}");
    }

    #[test]
    fn identity_reduces_to_dz_inverse_laplacian_plus_correction() {
        let spec = BoxSpec::new(16, 10.0).unwrap();
        let f = PhysicalField3D::from_meridian_profile(spec, |r, z| {
            (-(r * r + z * z) / 0.8).exp()
        });
        let hat = f.to_spectral();
        let lhs = ur_over_r_from_identity(&hat).unwrap();
        let g = dz_inverse_laplacian(&hat);
        let mut rhs = g.clone();
        rhs.add_scaled(-2.0, &dr_over_r_inv_laplacian(&g).unwrap()).unwrap();
        let mut diff = lhs;
        diff.add_scaled(-1.0, &rhs).unwrap();
        assert!(diff.l2_norm() <= 1e-13 * rhs.l2_norm());
    }

    #[test]
    fn kernel_oracle_on_single_cell_source() {
        // Convolving a one-cell source against the sum of kernels gives the
        // kernel combination itself at every other point (times f·h³). A
        // single-cell "source" is not axisymmetric, so probe the assembled
        // sum with the gate bypassed: source off-axis so the combination is
        // generically nonzero (on the axis it cancels identically).
        let spec = BoxSpec::new(8, 4.0).unwrap();
        let h = spec.delta();
        let mut values = vec![0.0; spec.len()];
        let (s1, s2, s3) = (5usize, 6usize, 4usize);
        values[spec.idx(s1, s2, s3)] = 3.0;
        let f = PhysicalField3D { spec, values };
        // Literal midpoint sum so each output is exactly h³·Σ K(x−y)·f(y).
        let plain = KernelQuad {
            scale: 1,
            near: 0,
            sub: 1,
        };
        let out = kernel_convolution_with(&f, plain).unwrap();
        let scale = out.max_abs();
        for &(i, j, k) in &[(1usize, 2usize, 3usize), (6, 5, 1), (2, 2, 6)] {
            let (dx, dy, dz) = (
                spec.coord(i) - spec.coord(s1),
                spec.coord(j) - spec.coord(s2),
                spec.coord(k) - spec.coord(s3),
            );
            let (w11, w22, w12) = radial_weights(spec.coord(i), spec.coord(j));
            let q = (dx * dx + dy * dy + dz * dz).powf(2.5);
            let expect = 3.0
                * h.powi(3)
                * (3.0 / (4.0 * PI) * (w11 * dx * dx * dz + w22 * dy * dy * dz) / q
                    - 3.0 / (2.0 * PI) * w12 * dx * dy * dz / q);
            let got = out.at(i, j, k);
            assert!(
                (got - expect).abs() <= 1e-12 * scale,
                "kernel probe at ({i},{j},{k}): {got:.6e} vs {expect:.6e}"
            );
        }
    }

    /// xi = e^{-a rho^2}, f = Lap^2 xi = 4a^2(4a^2 rho^4 - 20a rho^2 + 15)e^{-a rho^2},
    /// exact u^r/r = 4a^2 x3 (3 - 2a rho^2) e^{-a rho^2}.
    fn biharmonic_pair(spec: BoxSpec, s: f64) -> (PhysicalField3D, PhysicalField3D) {
        let a = 1.0 / (s * s);
        let f = PhysicalField3D::from_meridian_profile(spec, move |r, z| {
            let rho2 = r * r + z * z;
            4.0 * a * a * (4.0 * a * a * rho2 * rho2 - 20.0 * a * rho2 + 15.0) * (-a * rho2).exp()
        });
        let u = PhysicalField3D::from_meridian_profile(spec, move |r, z| {
            let rho2 = r * r + z * z;
            4.0 * a * a * z * (3.0 - 2.0 * a * rho2) * (-a * rho2).exp()
        });
        (f, u)
    }

    /// The free-space direct sum and the periodic spectral route agree only
    /// when the source has enough vanishing moments: the velocity response
    /// to any surviving low-order moment decays so slowly that its periodic
    /// images dominate the box-edge comparison at this resolution (zero-mass
    /// sources with a surviving quadrupole still sit at a ~35% gap). The
    /// biharmonic source kills moments through order three, so the response
    /// decays fast enough for the routes to meet — and it comes with a
    /// closed form that pins each route independently.
    #[test]
    fn kernel_oracle_agrees_with_spectral_identity() {
        let spec = BoxSpec::new(16, 10.0).unwrap();
        let (f, u_exact) = biharmonic_pair(spec, 1.8);

        let direct = kernel_convolution_oracle(&f).unwrap();
        let spectral = ur_over_r_from_identity(&f.to_spectral())
            .unwrap()
            .to_physical();

        let gap = direct.difference(&spectral).unwrap().l2_norm() / spectral.l2_norm();
        let scale = u_exact.l2_norm();
        let err_direct = direct.difference(&u_exact).unwrap().l2_norm() / scale;
        let err_spectral = spectral.difference(&u_exact).unwrap().l2_norm() / scale;

        // First calibrated run (deterministic inputs): gap 3.73e-2,
        // direct 3.42e-2, spectral 1.86e-2.
        assert!(gap <= 5e-2, "route gap {gap:.4e} exceeds 5e-2");
        assert!(
            err_direct <= 5e-2,
            "direct sum vs closed form: {err_direct:.4e} exceeds 5e-2"
        );
        assert!(
            err_spectral <= 3e-2,
            "spectral route vs closed form: {err_spectral:.4e} exceeds 3e-2"
        );
    }

    #[test]
    fn sy_bound_report() {
        let spec = BoxSpec::new(16, 10.0).unwrap();
        let f = PhysicalField3D::from_meridian_profile(spec, |r, z| {
            (-(r * r + z * z) / 0.7).exp()
        });
        let u = ur_over_r_from_identity(&f.to_spectral()).unwrap().to_physical();
        let rep = check_sy_bound(&f, &u).unwrap();
        assert!(!rep.is_vacuous());
        assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);

        let mut scaled_f = f.clone();
        scaled_f.scale(7.0);
        let mut scaled_u = u.clone();
        scaled_u.scale(7.0);
        let rep2 = check_sy_bound(&scaled_f, &scaled_u).unwrap();
        let rel = (rep2.max_ratio - rep.max_ratio).abs() / rep.max_ratio;
        assert!(rel <= 1e-12, "homogeneity violated: {rel:.3e}");

        let zero = PhysicalField3D::from_fn(spec, |_, _, _| 0.0);
        let rep3 = check_sy_bound(&zero, &zero).unwrap();
        assert!(rep3.is_vacuous());
    }

    #[test]
    fn velocity_bound_harness_is_finite_and_deterministic() {
        let spec = BoxSpec::new(16, 10.0).unwrap();
        let report = velocity_bound_harness(spec, 4, 77).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.skipped, 0);
        assert!(report.all_finite());
        for pick in [
            |r: &VelocityBoundRow| r.sup_ratio,
            |r: &VelocityBoundRow| r.dz_ratio,
            |r: &VelocityBoundRow| r.embedding_ratio,
            |r: &VelocityBoundRow| r.radial_ratio,
        ] {
            let max = report.max_of(pick).unwrap();
            assert!(max > 0.0 && max.is_finite());
        }

        let again = velocity_bound_harness(spec, 4, 77).unwrap();
        for (a, b) in report.rows.iter().zip(&again.rows) {
            assert_eq!(a.sup_ratio.to_bits(), b.sup_ratio.to_bits());
            assert_eq!(a.radial_ratio.to_bits(), b.radial_ratio.to_bits());
        }

        let csv = report.to_csv();
        assert!(csv.starts_with("sample_seed,sup,dz,embedding,radial\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn velocity_bound_ratios_are_scale_invariant() {
        let spec = BoxSpec::new(16, 10.0).unwrap();
        let f = random_axisymmetric_field(spec, 3);
        let row = velocity_bound_sample(&f).unwrap().unwrap();
        let mut scaled = f.clone();
        scaled.scale(5.0);
        let row2 = velocity_bound_sample(&scaled).unwrap().unwrap();
        for (a, b) in [
            (row.sup_ratio, row2.sup_ratio),
            (row.dz_ratio, row2.dz_ratio),
            (row.embedding_ratio, row2.embedding_ratio),
            (row.radial_ratio, row2.radial_ratio),
        ] {
            assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn velocity_bound_skips_degenerate_sources() {
        let spec = BoxSpec::new(16, 10.0).unwrap();
        let zero = PhysicalField3D::from_fn(spec, |_, _, _| 0.0);
        assert!(velocity_bound_sample(&zero).unwrap().is_none());
    }


    #[test]
    fn identity_cross_check_moment_free_routes_converge() {
        let ring = RingProfile::MomentFree { sigma: 1.2 };
        let coarse = identity_meridian_cross_check(ring, 32, 16.0, 1024).unwrap();
        let fine = identity_meridian_cross_check(ring, 64, 16.0, 2048).unwrap();
        // First calibrated run: coarse routes 6.98e-5 (box-exact 2.13e-5,
        // meridian-exact 7.28e-5), fine routes 1.740e-5 (box-exact 7.9e-16,
        // meridian-exact 1.740e-5) — the box route is spectrally exact once
        // the source is resolved, and the meridian error drops 4× per nr
        // doubling (uniform second order, axis included).
        assert!(
            fine.rel_l2_error < 0.5 * coarse.rel_l2_error,
            "route gap failed to shrink under refinement: {:.3e} -> {:.3e}",
            coarse.rel_l2_error,
            fine.rel_l2_error
        );
        assert!(fine.rel_l2_error <= 3e-5, "route gap {:.3e}", fine.rel_l2_error);
        assert!(
            fine.box_vs_exact.unwrap() <= 1e-12,
            "box identity vs closed form: {:.3e}",
            fine.box_vs_exact.unwrap()
        );
        assert!(
            fine.meridian_vs_exact.unwrap() <= 3e-5,
            "meridian solve vs closed form: {:.3e}",
            fine.meridian_vs_exact.unwrap()
        );
        assert!(fine.boundary_max <= 1e-12);
    }

    #[test]
    fn identity_cross_check_gaussian_ring_plateaus() {
        // The literal ring never converges between closures: measured flat
        // across box sides 16/32/64, wall radii 12/24/48, and meridian nr
        // 1024–8192, by the modified-Bessel-tail mechanism on
        // RingProfile::Gaussian (0.311 at this resolution with the
        // conservative radial stencil; 0.446 with the pre-fix stencil —
        // the plateau belongs to the tail, not to either solver's axis
        // truncation). This pins the plateau so a regression that
        // accidentally "fixes" it (or worsens it) is caught.
        let c = identity_meridian_cross_check(RingProfile::Gaussian { sigma: 1.2 }, 32, 16.0, 1024)
            .unwrap();
        assert!(c.box_vs_exact.is_none() && c.meridian_vs_exact.is_none());
        assert!(c.boundary_max <= 1e-12);
        assert!(
            c.rel_l2_error > 0.2 && c.rel_l2_error < 0.6,
            "plateau moved: {:.4e}",
            c.rel_l2_error
        );
    }
}
