//! Meridian-plane grid and scalar/vector fields.
//!
//! The domain is the half-plane slab (r, z) ∈ (0, R] × [0, Lz): cell-centered
//! nodes in r (so r = 0 is never a node), periodic uniform nodes in z. Every
//! smooth axisymmetric field carries a reflection parity across the axis which
//! derivative stencils honour through ghost values; all integral norms carry
//! the cylindrical measure 2πr dr dz.

use crate::fft;
use num_complex::Complex64;
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("nr must be at least 4, got {0}")]
    RadialResolution(usize),
    #[error("nz must be a power of two at least 4, got {0}")]
    AxialResolution(usize),
    #[error("domain extents must be positive and finite, got R={r_extent}, Lz={z_period}")]
    DomainExtent { r_extent: f64, z_period: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("value count {got} does not match grid size {expected}")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("Lp exponent must satisfy p >= 1, got {0}")]
    BadExponent(f64),
}

/// Reflection behavior across the axis r = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// f(-r) = f(r)
    Even,
    /// f(-r) = -f(r)
    Odd,
}

impl Parity {
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// Sign of the ghost value across the axis.
    fn axis_sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Uniform meridian grid: nr cell-centered radial nodes on (0, R],
/// nz periodic axial nodes on [0, Lz).
#[derive(Debug)]
pub struct MeridianGrid {
    nr: usize,
    nz: usize,
    r_extent: f64,
    z_period: f64,
    dr: f64,
    dz: f64,
    r_nodes: Vec<f64>,
    z_nodes: Vec<f64>,
}

impl MeridianGrid {
    pub fn new(
        nr: usize,
        nz: usize,
        r_extent: f64,
        z_period: f64,
    ) -> Result<Arc<MeridianGrid>, FieldError> {
        if nr < 4 {
            return Err(FieldError::RadialResolution(nr));
        }
        if nz < 4 || !nz.is_power_of_two() {
            return Err(FieldError::AxialResolution(nz));
        }
        if !(r_extent > 0.0 && r_extent.is_finite() && z_period > 0.0 && z_period.is_finite()) {
            return Err(FieldError::DomainExtent { r_extent, z_period });
        }
        let dr = r_extent / nr as f64;
        let dz = z_period / nz as f64;
        let r_nodes = (0..nr).map(|i| (i as f64 + 0.5) * dr).collect();
        let z_nodes = (0..nz).map(|j| j as f64 * dz).collect();
        Ok(Arc::new(MeridianGrid {
            nr,
            nz,
            r_extent,
            z_period,
            dr,
            dz,
            r_nodes,
            z_nodes,
        }))
    }

    pub fn nr(&self) -> usize {
        self.nr
    }
    pub fn nz(&self) -> usize {
        self.nz
    }
    pub fn r_extent(&self) -> f64 {
        self.r_extent
    }
    pub fn z_period(&self) -> f64 {
        self.z_period
    }
    pub fn dr(&self) -> f64 {
        self.dr
    }
    pub fn dz(&self) -> f64 {
        self.dz
    }
    pub fn r(&self, i: usize) -> f64 {
        self.r_nodes[i]
    }
    pub fn z(&self, j: usize) -> f64 {
        self.z_nodes[j]
    }
    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }
    pub fn z_nodes(&self) -> &[f64] {
        &self.z_nodes
    }
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Radial coordinate of the face between nodes i-1 and i (face 0 is the axis).
    pub fn r_face(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    /// Angular z-wavenumber of DFT bin m.
    pub fn kz(&self, m: usize) -> f64 {
        TAU * fft::signed_freq(m, self.nz) as f64 / self.z_period
    }

    /// Quadrature weight of node (i, ·): 2π r_i Δr Δz.
    pub fn cell_weight(&self, i: usize) -> f64 {
        TAU * self.r_nodes[i] * self.dr * self.dz
    }

    pub fn same_layout(&self, other: &MeridianGrid) -> bool {
        self.nr == other.nr
            && self.nz == other.nz
            && self.r_extent == other.r_extent
            && self.z_period == other.z_period
    }
}

/// Scalar field on a [`MeridianGrid`], stored row-major: `values[i * nz + j]`.
#[derive(Debug, Clone)]
pub struct ScalarField2D {
    grid: Arc<MeridianGrid>,
    parity: Parity,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn zeros(grid: Arc<MeridianGrid>, parity: Parity) -> ScalarField2D {
        let values = vec![0.0; grid.len()];
        ScalarField2D {
            grid,
            parity,
            values,
        }
    }

    pub fn from_fn(
        grid: Arc<MeridianGrid>,
        parity: Parity,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> ScalarField2D {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nr() {
            let r = grid.r(i);
            for j in 0..grid.nz() {
                values.push(f(r, grid.z(j)));
            }
        }
        ScalarField2D {
            grid,
            parity,
            values,
        }
    }

    pub fn from_values(
        grid: Arc<MeridianGrid>,
        parity: Parity,
        values: Vec<f64>,
    ) -> Result<ScalarField2D, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::ShapeMismatch {
                got: values.len(),
                expected: grid.len(),
            });
        }
        Ok(ScalarField2D {
            grid,
            parity,
            values,
        })
    }

    pub fn grid(&self) -> &Arc<MeridianGrid> {
        &self.grid
    }
    pub fn parity(&self) -> Parity {
        self.parity
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nz() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.grid.nz() + j] = v;
    }

    fn check_grid(&self, other: &ScalarField2D) -> Result<(), FieldError> {
        if self.grid.same_layout(&other.grid) {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weighted Lp norm with the cylindrical measure 2πr dr dz;
    /// `p = f64::INFINITY` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64, FieldError> {
        if p.is_infinite() && p > 0.0 {
            return Ok(self.max_abs());
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(FieldError::BadExponent(p));
        }
        let nz = self.grid.nz();
        let mut acc = 0.0;
        for i in 0..self.grid.nr() {
            let w = self.grid.cell_weight(i);
            let mut row = 0.0;
            for j in 0..nz {
                row += self.values[i * nz + j].abs().powf(p);
            }
            acc += w * row;
        }
        Ok(acc.powf(1.0 / p))
    }

    pub fn l2_norm(&self) -> f64 {
        let nz = self.grid.nz();
        let mut acc = 0.0;
        for i in 0..self.grid.nr() {
            let w = self.grid.cell_weight(i);
            let mut row = 0.0;
            for j in 0..nz {
                let v = self.values[i * nz + j];
                row += v * v;
            }
            acc += w * row;
        }
        acc.sqrt()
    }

    /// Weighted inner product ⟨self, other⟩ = Σ f g · 2πr ΔrΔz.
    pub fn inner(&self, other: &ScalarField2D) -> Result<f64, FieldError> {
        self.check_grid(other)?;
        let nz = self.grid.nz();
        let mut acc = 0.0;
        for i in 0..self.grid.nr() {
            let w = self.grid.cell_weight(i);
            let mut row = 0.0;
            for j in 0..nz {
                row += self.values[i * nz + j] * other.values[i * nz + j];
            }
            acc += w * row;
        }
        Ok(acc)
    }

    /// Centered radial derivative: parity ghost across the axis, 2nd-order
    /// one-sided closure at r = R. Output parity flips.
    pub fn d_r(&self) -> ScalarField2D {
        let nr = self.grid.nr();
        let nz = self.grid.nz();
        let inv2dr = 1.0 / (2.0 * self.grid.dr());
        let s = self.parity.axis_sign();
        let mut out = vec![0.0; self.values.len()];
        for (j, slot) in out.iter_mut().enumerate().take(nz) {
            // axis node: ghost f(-Δr/2) = s · f(Δr/2)
            *slot = (self.values[nz + j] - s * self.values[j]) * inv2dr;
        }
        for i in 1..nr - 1 {
            for j in 0..nz {
                out[i * nz + j] =
                    (self.values[(i + 1) * nz + j] - self.values[(i - 1) * nz + j]) * inv2dr;
            }
        }
        let l = nr - 1;
        for j in 0..nz {
            out[l * nz + j] = (3.0 * self.values[l * nz + j] - 4.0 * self.values[(l - 1) * nz + j]
                + self.values[(l - 2) * nz + j])
                * inv2dr;
        }
        ScalarField2D {
            grid: self.grid.clone(),
            parity: self.parity.flip(),
            values: out,
        }
    }

    /// Spectral axial derivative (exact on band-limited data). Parity unchanged.
    pub fn d_z(&self) -> ScalarField2D {
        let mut out = self.clone();
        out.apply_z_multiplier(|k| Complex64::new(0.0, k));
        out
    }

    /// Apply a z-Fourier multiplier m(k_z) row by row, keeping the real part.
    pub fn apply_z_multiplier(&mut self, m: impl Fn(f64) -> Complex64) {
        let nr = self.grid.nr();
        let nz = self.grid.nz();
        let mult: Vec<Complex64> = (0..nz).map(|mm| m(self.grid.kz(mm))).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); nz];
        for i in 0..nr {
            let row = &mut self.values[i * nz..(i + 1) * nz];
            for (b, v) in buf.iter_mut().zip(row.iter()) {
                *b = Complex64::new(*v, 0.0);
            }
            fft::forward(&mut buf);
            for (b, mu) in buf.iter_mut().zip(&mult) {
                *b *= mu;
            }
            fft::inverse(&mut buf);
            for (v, b) in row.iter_mut().zip(&buf) {
                *v = b.re;
            }
        }
    }

    /// Zero axial modes with |k index| > nz/3 (the 2/3 rule).
    pub fn dealias_z(&mut self) {
        let nz = self.grid.nz();
        let cut = (nz / 3) as i64;
        let scale = self.z_index_scale();
        self.apply_z_multiplier(|k| {
            let idx = (k * scale).round() as i64;
            if idx.abs() > cut {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
    }

    fn z_index_scale(&self) -> f64 {
        self.grid.z_period() / TAU
    }

    /// Conservative horizontal Laplacian (1/r)∂_r(r ∂_r f): zero-area axis face,
    /// quadratic-extrapolation ghost at r = R. Exact on f = a + b r².
    pub fn laplacian_h(&self) -> ScalarField2D {
        let nr = self.grid.nr();
        let nz = self.grid.nz();
        let inv_dr2 = 1.0 / (self.grid.dr() * self.grid.dr());
        let mut out = vec![0.0; self.values.len()];
        for i in 0..nr {
            let r_lo = self.grid.r_face(i);
            let r_hi = self.grid.r_face(i + 1);
            let inv_r = 1.0 / self.grid.r(i);
            for j in 0..nz {
                let f = self.values[i * nz + j];
                let f_hi = if i + 1 < nr {
                    self.values[(i + 1) * nz + j]
                } else {
                    // quadratic extrapolation through the last three nodes
                    3.0 * self.values[(nr - 1) * nz + j] - 3.0 * self.values[(nr - 2) * nz + j]
                        + self.values[(nr - 3) * nz + j]
                };
                let flux_hi = r_hi * (f_hi - f);
                let flux_lo = if i == 0 {
                    0.0 // axis face has zero area
                } else {
                    r_lo * (f - self.values[(i - 1) * nz + j])
                };
                out[i * nz + j] = (flux_hi - flux_lo) * inv_r * inv_dr2;
            }
        }
        ScalarField2D {
            grid: self.grid.clone(),
            parity: self.parity,
            values: out,
        }
    }

    /// Pointwise division by r (cell-centered nodes keep r > 0). Parity flips.
    pub fn divide_by_r(&self) -> ScalarField2D {
        let nz = self.grid.nz();
        let mut out = self.clone();
        for i in 0..self.grid.nr() {
            let inv_r = 1.0 / self.grid.r(i);
            for j in 0..nz {
                out.values[i * nz + j] *= inv_r;
            }
        }
        out.parity = self.parity.flip();
        out
    }

    /// Pointwise multiplication by r. Parity flips.
    pub fn multiply_by_r(&self) -> ScalarField2D {
        let nz = self.grid.nz();
        let mut out = self.clone();
        for i in 0..self.grid.nr() {
            let r = self.grid.r(i);
            for j in 0..nz {
                out.values[i * nz + j] *= r;
            }
        }
        out.parity = self.parity.flip();
        out
    }

    /// Pointwise product; parities multiply (Odd·Odd = Even, etc.).
    pub fn pointwise_mul(&self, other: &ScalarField2D) -> Result<ScalarField2D, FieldError> {
        self.check_grid(other)?;
        let parity = if self.parity == other.parity {
            Parity::Even
        } else {
            Parity::Odd
        };
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(ScalarField2D {
            grid: self.grid.clone(),
            parity,
            values,
        })
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// self += c · other
    pub fn add_scaled(&mut self, c: f64, other: &ScalarField2D) -> Result<(), FieldError> {
        self.check_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// self - other as a new field.
    pub fn difference(&self, other: &ScalarField2D) -> Result<ScalarField2D, FieldError> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ScalarField2D {
            grid: self.grid.clone(),
            parity: self.parity,
            values,
        })
    }
}

/// Meridian velocity (u^r odd, u^z even), normally built from a streamfunction.
#[derive(Debug, Clone)]
pub struct VelocityField2D {
    pub ur: ScalarField2D,
    pub uz: ScalarField2D,
}

impl VelocityField2D {
    pub fn zeros(grid: Arc<MeridianGrid>) -> VelocityField2D {
        VelocityField2D {
            ur: ScalarField2D::zeros(grid.clone(), Parity::Odd),
            uz: ScalarField2D::zeros(grid, Parity::Even),
        }
    }

    pub fn grid(&self) -> &Arc<MeridianGrid> {
        self.ur.grid()
    }

    pub fn max_ur(&self) -> f64 {
        self.ur.max_abs()
    }

    pub fn max_uz(&self) -> f64 {
        self.uz.max_abs()
    }

    /// √(‖u^r‖₂² + ‖u^z‖₂²)
    pub fn l2_norm(&self) -> f64 {
        let a = self.ur.l2_norm();
        let b = self.uz.l2_norm();
        (a * a + b * b).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.ur.is_finite() && self.uz.is_finite()
    }

    /// Node-centered discrete divergence (1/r)D_r(r u^r) + D_z u^z.
    /// Vanishes to roundoff for streamfunction-derived velocities.
    pub fn divergence(&self) -> ScalarField2D {
        let r_ur = self.ur.multiply_by_r();
        let mut div = r_ur.d_r().divide_by_r();
        let dz_uz = self.uz.d_z();
        div.add_scaled(1.0, &dz_uz).expect("same grid");
        div
    }
}
