//! Time integration of the coupled vorticity–density system
//!
//!   ∂_t ω + u·∇ω − Δ_h ω + ω/r² = −∂_r ρ + (u^r/r) ω + F_ω,
//!   ∂_t ρ + u·∇ρ − Δ_h ρ = F_ρ,
//!
//! with the horizontal diffusion Δ_h = ∂_rr + (1/r)∂_r (and the −1/r² twist
//! in the ω equation) treated implicitly by Crank–Nicolson and everything
//! else explicitly, either Adams–Bashforth 2 (CNAB2, the default) or a
//! three-stage IMEX Runge–Kutta. Because Δ_h contains no z-derivative the
//! implicit operator is block diagonal over z: one tridiagonal system per
//! z-column with the *same* matrix for every column, which is also exactly
//! what a per-z-wavenumber solve would compute (the matrix is wavenumber
//! independent, so the solve commutes with the z-transform).
//!
//! Advection uses an energy-neutral skew form, ½[u·∇f + ∇·(u f)] written in
//! cylindrical flux coordinates: a radial face flux that telescopes exactly
//! in the r·dr·dz inner product for *any* velocity, and a spectral z half
//! that is skew because D_z is a real antisymmetric operator. That makes
//! the L² monotonicity statements testable at roundoff-level tolerance.

use crate::diagnostics::{self, DiagnosticsError, DiagnosticsRecord};
use crate::fields::{FieldError, MeridianGrid, Parity, ScalarField2D, VelocityField2D};
use crate::poisson::{self, PoissonError, StreamSolveWorkspace};
use crate::tridiag::{banded_apply, TridiagError, TridiagFactor};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("{what} expected {expected:?} parity, found {found:?}")]
    WrongParity {
        what: &'static str,
        expected: Parity,
        found: Parity,
    },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid step configuration: {0}")]
    BadConfig(String),
    #[error("{what} lost finiteness at t = {t}")]
    NotFinite { what: &'static str, t: f64 },
    #[error("advective CFL {cfl:.3} exceeds limit {limit} at t = {t}")]
    CflViolation { cfl: f64, limit: f64, t: f64 },
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Tridiag(#[from] TridiagError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Time-stepping scheme for the explicit terms. Diffusion is always
/// Crank–Nicolson within each (sub)step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Crank–Nicolson + Adams–Bashforth 2, forward-Euler bootstrap.
    Cnab2,
    /// Three-stage IMEX Runge–Kutta (Spalart–Moser–Rogers coefficients),
    /// self-starting, three implicit factorizations.
    Rk3Imex,
}

/// Time-dependent source term, sampled on the solver grid.
pub type ForcingFn = Arc<dyn Fn(&Arc<MeridianGrid>, f64) -> ScalarField2D + Send + Sync>;

/// Everything a `Stepper` needs to know besides the grid.
#[derive(Clone)]
pub struct StepConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Zero the top third of z-modes after forming nonlinear tendencies.
    pub dealias: bool,
    /// Freeze the advecting velocity at zero (pure reaction–diffusion runs).
    /// The state's cached velocity still tracks the streamfunction solve.
    pub pin_velocity: bool,
    /// Step aborts when dt·max(|u^r|/Δr, |u^z|/Δz) exceeds this.
    pub cfl_limit: f64,
    /// `run` records a diagnostics row every this many steps (≥ 1).
    pub record_every: usize,
    pub forcing_omega: Option<ForcingFn>,
    pub forcing_rho: Option<ForcingFn>,
}

impl StepConfig {
    pub fn new(dt: f64) -> StepConfig {
        StepConfig {
            dt,
            scheme: Scheme::Cnab2,
            dealias: true,
            pin_velocity: false,
            cfl_limit: 0.5,
            record_every: 1,
            forcing_omega: None,
            forcing_rho: None,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SolverError::BadConfig(format!("dt = {} must be positive", self.dt)));
        }
        if self.cfl_limit <= 0.0 || self.cfl_limit.is_nan() {
            return Err(SolverError::BadConfig("cfl_limit must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(SolverError::BadConfig("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

impl fmt::Debug for StepConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StepConfig")
            .field("dt", &self.dt)
            .field("scheme", &self.scheme)
            .field("dealias", &self.dealias)
            .field("pin_velocity", &self.pin_velocity)
            .field("cfl_limit", &self.cfl_limit)
            .field("record_every", &self.record_every)
            .field("forcing_omega", &self.forcing_omega.is_some())
            .field("forcing_rho", &self.forcing_rho.is_some())
            .finish()
    }
}

/// Simulation state: time, the two evolved scalars, the cached velocity
/// (always the streamfunction solve of the current vorticity), and the
/// previous explicit tendencies for multistep schemes.
#[derive(Debug, Clone)]
pub struct SimState {
    t: f64,
    omega: ScalarField2D,
    rho: ScalarField2D,
    velocity: VelocityField2D,
    prev_tendency: Option<(ScalarField2D, ScalarField2D)>,
}

impl SimState {
    /// State at t = 0. `omega` must be odd, `rho` even, both finite and on
    /// the same grid; the velocity cache is solved immediately.
    pub fn new(omega: ScalarField2D, rho: ScalarField2D) -> Result<SimState, SolverError> {
        SimState::with_time(0.0, omega, rho)
    }

    pub fn with_time(t: f64, omega: ScalarField2D, rho: ScalarField2D) -> Result<SimState, SolverError> {
        if omega.parity() != Parity::Odd {
            return Err(SolverError::WrongParity {
                what: "omega",
                expected: Parity::Odd,
                found: omega.parity(),
            });
        }
        if rho.parity() != Parity::Even {
            return Err(SolverError::WrongParity {
                what: "rho",
                expected: Parity::Even,
                found: rho.parity(),
            });
        }
        if !omega.grid().same_layout(rho.grid()) {
            return Err(SolverError::GridMismatch);
        }
        if !omega.is_finite() {
            return Err(SolverError::NotFinite { what: "omega", t });
        }
        if !rho.is_finite() {
            return Err(SolverError::NotFinite { what: "rho", t });
        }
        let psi = poisson::solve_streamfunction(&omega)?;
        let velocity = poisson::velocity_from_streamfunction(&psi);
        Ok(SimState {
            t,
            omega,
            rho,
            velocity,
            prev_tendency: None,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn omega(&self) -> &ScalarField2D {
        &self.omega
    }

    pub fn rho(&self) -> &ScalarField2D {
        &self.rho
    }

    pub fn velocity(&self) -> &VelocityField2D {
        &self.velocity
    }

    pub fn grid(&self) -> &Arc<MeridianGrid> {
        self.omega.grid()
    }

    /// Max-norm gap between the cached velocity and a fresh streamfunction
    /// solve — roundoff-level whenever the cache-coherence invariant holds.
    pub fn velocity_cache_residual(&self) -> Result<f64, SolverError> {
        let psi = poisson::solve_streamfunction(&self.omega)?;
        let fresh = poisson::velocity_from_streamfunction(&psi);
        let dur = self.velocity.ur.difference(&fresh.ur)?.max_abs();
        let duz = self.velocity.uz.difference(&fresh.uz)?.max_abs();
        Ok(dur.max(duz))
    }
}

/// Energy-neutral advection tendency adv(u, f) ≈ u·∇f.
///
/// Radial part: (G_{i+½} f_{i+1} − G_{i−½} f_{i−1}) / (2 r_i Δr) with face
/// coefficients G_{i+½} = r_{i+½}·(u^r_i + u^r_{i+1})/2, zero at the axis
/// (r = 0) and wall faces. Pairing f_{i±1} against the shared face value
/// makes ⟨f, adv_r⟩ telescope to zero exactly for any u, while a Taylor
/// expansion shows it is a second-order discretization of
/// ½[u^r ∂_r f + (1/r)∂_r(r u^r f)] = u^r ∂_r f + f·(∇·u)_r/2.
/// The z part is the spectral skew pair ½[u^z ⊙ D_z f + D_z(u^z ⊙ f)].
/// Both halves preserve the parity of f.
pub fn advect(u: &VelocityField2D, f: &ScalarField2D) -> Result<ScalarField2D, SolverError> {
    let grid = f.grid();
    if !grid.same_layout(u.grid()) {
        return Err(SolverError::GridMismatch);
    }
    let (nr, nz) = (grid.nr(), grid.nz());
    let dr = grid.dr();
    let ur = u.ur.values();
    let fv = f.values();

    let mut out = vec![0.0; grid.len()];
    for i in 0..nr {
        let inv = 1.0 / (2.0 * grid.r(i) * dr);
        for j in 0..nz {
            let idx = i * nz + j;
            let hi = if i + 1 < nr {
                grid.r_face(i + 1) * 0.5 * (ur[idx] + ur[idx + nz]) * fv[idx + nz]
            } else {
                0.0
            };
            let lo = if i > 0 {
                grid.r_face(i) * 0.5 * (ur[idx - nz] + ur[idx]) * fv[idx - nz]
            } else {
                0.0
            };
            out[idx] = (hi - lo) * inv;
        }
    }
    let mut adv = ScalarField2D::from_values(Arc::clone(grid), f.parity(), out)?;

    let uz_dzf = u.uz.pointwise_mul(&f.d_z())?;
    let dz_uzf = u.uz.pointwise_mul(f)?.d_z();
    adv.add_scaled(0.5, &uz_dzf)?;
    adv.add_scaled(0.5, &dz_uzf)?;
    Ok(adv)
}

/// Explicit (non-diffusive) tendencies at the state's own time, without
/// forcing: T_ω = −adv(u, ω) − ∂_r ρ + (u^r/r)·ω and T_ρ = −adv(u, ρ).
/// `Stepper::explicit_tendency` layers configured forcing and dealiasing
/// on top of this.
pub fn explicit_tendency(state: &SimState) -> Result<(ScalarField2D, ScalarField2D), SolverError> {
    tendency_parts(&state.omega, &state.rho, &state.velocity, None, None, state.t)
}

fn tendency_parts(
    omega: &ScalarField2D,
    rho: &ScalarField2D,
    u: &VelocityField2D,
    forcing_omega: Option<&ForcingFn>,
    forcing_rho: Option<&ForcingFn>,
    t: f64,
) -> Result<(ScalarField2D, ScalarField2D), SolverError> {
    let grid = omega.grid();

    let mut tw = advect(u, omega)?;
    tw.scale(-1.0);
    tw.add_scaled(-1.0, &rho.d_r())?;
    let stretch = poisson::ur_over_r(u).pointwise_mul(omega)?;
    tw.add_scaled(1.0, &stretch)?;
    if let Some(f) = forcing_omega {
        tw.add_scaled(1.0, &f(grid, t))?;
    }

    let mut tr = advect(u, rho)?;
    tr.scale(-1.0);
    if let Some(f) = forcing_rho {
        tr.add_scaled(1.0, &f(grid, t))?;
    }
    Ok((tw, tr))
}

/// Tridiagonal bands of a radial operator (row i couples i−1, i, i+1).
struct Bands {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

#[derive(Clone, Copy)]
enum WallBc {
    /// Ghost value −f_last: the field vanishes at the wall face (ω).
    Dirichlet,
    /// Zero diffusive flux through the wall face (ρ).
    Neumann,
}

/// Conservative flux form of Δ_h (plus an optional extra diagonal):
/// (Δ_h f)_i = [r_{i+½}(f_{i+1}−f_i) − r_{i−½}(f_i−f_{i−1})] / (r_i Δr²).
/// The axis face carries zero area (r_{−½} = 0), so the i = 0 row needs no
/// ghost; it is self-adjoint in the r_i-weighted inner product, which makes
/// Crank–Nicolson dissipative row-for-row.
fn laplacian_bands(grid: &MeridianGrid, wall: WallBc, extra_diag: impl Fn(usize) -> f64) -> Bands {
    let nr = grid.nr();
    let dr2 = grid.dr() * grid.dr();
    let mut sub = vec![0.0; nr - 1];
    let mut diag = vec![0.0; nr];
    let mut sup = vec![0.0; nr - 1];
    for i in 0..nr {
        let inv = 1.0 / (grid.r(i) * dr2);
        let lo = grid.r_face(i) * inv;
        let hi = grid.r_face(i + 1) * inv;
        if i > 0 {
            sub[i - 1] = lo;
        }
        if i + 1 < nr {
            sup[i] = hi;
            diag[i] = -(lo + hi) + extra_diag(i);
        } else {
            diag[i] = match wall {
                WallBc::Dirichlet => -(lo + 2.0 * hi),
                WallBc::Neumann => -lo,
            } + extra_diag(i);
        }
    }
    Bands { sub, diag, sup }
}

/// (I − c·L) factorized for the implicit halves; c > 0 keeps it strictly
/// diagonally dominant, hence nonsingular.
fn shifted_factor(l: &Bands, c: f64) -> Result<TridiagFactor, TridiagError> {
    let sub: Vec<f64> = l.sub.iter().map(|&v| -c * v).collect();
    let diag: Vec<f64> = l.diag.iter().map(|&v| 1.0 - c * v).collect();
    let sup: Vec<f64> = l.sup.iter().map(|&v| -c * v).collect();
    TridiagFactor::new(&sub, &diag, &sup)
}

/// Spalart–Moser–Rogers three-stage IMEX coefficients; each stage advances
/// by (α_s + β_s)dt = (γ_s + ζ_s)dt, totalling dt.
const RK3_ALPHA: [f64; 3] = [29.0 / 96.0, -3.0 / 40.0, 1.0 / 6.0];
const RK3_BETA: [f64; 3] = [37.0 / 160.0, 5.0 / 24.0, 1.0 / 6.0];
const RK3_GAMMA: [f64; 3] = [8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0];
const RK3_ZETA: [f64; 3] = [0.0, -17.0 / 60.0, -5.0 / 12.0];
const RK3_STAGE_TIME: [f64; 3] = [0.0, 8.0 / 15.0, 2.0 / 3.0];

/// Reusable time-advance machinery for one grid + config: streamfunction
/// workspace, Laplacian bands for both fields, and the per-scheme implicit
/// factorizations. Immutable after construction; stepping mutates only the
/// state passed in.
pub struct Stepper {
    grid: Arc<MeridianGrid>,
    cfg: StepConfig,
    stream: StreamSolveWorkspace,
    lap_omega: Bands,
    lap_rho: Bands,
    fac_omega: Vec<TridiagFactor>,
    fac_rho: Vec<TridiagFactor>,
}

impl Stepper {
    pub fn new(grid: Arc<MeridianGrid>, cfg: StepConfig) -> Result<Stepper, SolverError> {
        cfg.validate()?;
        let stream = StreamSolveWorkspace::new(Arc::clone(&grid))?;
        let lap_omega = laplacian_bands(&grid, WallBc::Dirichlet, |i| {
            let r = grid.r(i);
            -1.0 / (r * r)
        });
        let lap_rho = laplacian_bands(&grid, WallBc::Neumann, |_| 0.0);
        let coeffs: Vec<f64> = match cfg.scheme {
            Scheme::Cnab2 => vec![0.5 * cfg.dt],
            Scheme::Rk3Imex => RK3_BETA.iter().map(|&b| b * cfg.dt).collect(),
        };
        let mut fac_omega = Vec::with_capacity(coeffs.len());
        let mut fac_rho = Vec::with_capacity(coeffs.len());
        for &c in &coeffs {
            fac_omega.push(shifted_factor(&lap_omega, c)?);
            fac_rho.push(shifted_factor(&lap_rho, c)?);
        }
        Ok(Stepper {
            grid,
            cfg,
            stream,
            lap_omega,
            lap_rho,
            fac_omega,
            fac_rho,
        })
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Arc<MeridianGrid> {
        &self.grid
    }

    /// Advective CFL number dt·max(|u^r|/Δr, |u^z|/Δz) of the velocity the
    /// dynamics will actually see this step.
    pub fn cfl(&self, state: &SimState) -> f64 {
        if self.cfg.pin_velocity {
            return 0.0;
        }
        let u = &state.velocity;
        self.cfg.dt * (u.max_ur() / self.grid.dr()).max(u.max_uz() / self.grid.dz())
    }

    /// Explicit tendencies including configured forcing and dealiasing.
    pub fn explicit_tendency(
        &self,
        state: &SimState,
    ) -> Result<(ScalarField2D, ScalarField2D), SolverError> {
        let zero;
        let u = if self.cfg.pin_velocity {
            zero = VelocityField2D::zeros(Arc::clone(&self.grid));
            &zero
        } else {
            &state.velocity
        };
        self.tendency(&state.omega, &state.rho, u, state.t)
    }

    fn tendency(
        &self,
        omega: &ScalarField2D,
        rho: &ScalarField2D,
        u: &VelocityField2D,
        t: f64,
    ) -> Result<(ScalarField2D, ScalarField2D), SolverError> {
        let (mut tw, mut tr) = tendency_parts(
            omega,
            rho,
            u,
            self.cfg.forcing_omega.as_ref(),
            self.cfg.forcing_rho.as_ref(),
            t,
        )?;
        if self.cfg.dealias {
            tw.dealias_z();
            tr.dealias_z();
        }
        Ok((tw, tr))
    }

    /// Advance the state by one step of cfg.dt. Transactional: on error the
    /// state is left exactly as it was. Returns the step's CFL number.
    pub fn step(&self, state: &mut SimState) -> Result<f64, SolverError> {
        if !self.grid.same_layout(state.grid()) {
            return Err(SolverError::GridMismatch);
        }
        let cfl = self.cfl(state);
        if !cfl.is_finite() || cfl > self.cfg.cfl_limit {
            return Err(SolverError::CflViolation {
                cfl,
                limit: self.cfg.cfl_limit,
                t: state.t,
            });
        }
        match self.cfg.scheme {
            Scheme::Cnab2 => self.step_cnab2(state)?,
            Scheme::Rk3Imex => self.step_rk3(state)?,
        }
        Ok(cfl)
    }

    fn step_cnab2(&self, state: &mut SimState) -> Result<(), SolverError> {
        let dt = self.cfg.dt;
        let zero;
        let u = if self.cfg.pin_velocity {
            zero = VelocityField2D::zeros(Arc::clone(&self.grid));
            &zero
        } else {
            &state.velocity
        };
        let (tw, tr) = self.tendency(&state.omega, &state.rho, u, state.t)?;

        // dt·E with E the AB2 extrapolant (plain Euler on the first step).
        let (mut ew, mut er) = (tw.clone(), tr.clone());
        match &state.prev_tendency {
            Some((pw, pr)) => {
                ew.scale(1.5 * dt);
                ew.add_scaled(-0.5 * dt, pw)?;
                er.scale(1.5 * dt);
                er.add_scaled(-0.5 * dt, pr)?;
            }
            None => {
                ew.scale(dt);
                er.scale(dt);
            }
        }

        let omega = self.implicit_update(&state.omega, &self.lap_omega, &self.fac_omega[0], 0.5 * dt, &ew)?;
        let rho = self.implicit_update(&state.rho, &self.lap_rho, &self.fac_rho[0], 0.5 * dt, &er)?;
        self.commit(state, omega, rho, Some((tw, tr)), state.t + dt)
    }

    fn step_rk3(&self, state: &mut SimState) -> Result<(), SolverError> {
        let dt = self.cfg.dt;
        let t0 = state.t;
        let mut omega = state.omega.clone();
        let mut rho = state.rho.clone();
        let mut u = if self.cfg.pin_velocity {
            VelocityField2D::zeros(Arc::clone(&self.grid))
        } else {
            state.velocity.clone()
        };
        let mut prev: Option<(ScalarField2D, ScalarField2D)> = None;

        for s in 0..3 {
            let t_stage = t0 + RK3_STAGE_TIME[s] * dt;
            let (nw, nr) = self.tendency(&omega, &rho, &u, t_stage)?;

            let mut add_w = nw.clone();
            add_w.scale(RK3_GAMMA[s] * dt);
            let mut add_r = nr.clone();
            add_r.scale(RK3_GAMMA[s] * dt);
            if let Some((pw, pr)) = &prev {
                add_w.add_scaled(RK3_ZETA[s] * dt, pw)?;
                add_r.add_scaled(RK3_ZETA[s] * dt, pr)?;
            }

            omega = self.implicit_update(&omega, &self.lap_omega, &self.fac_omega[s], RK3_ALPHA[s] * dt, &add_w)?;
            rho = self.implicit_update(&rho, &self.lap_rho, &self.fac_rho[s], RK3_ALPHA[s] * dt, &add_r)?;
            if !self.cfg.pin_velocity {
                let psi = self.stream.solve(&omega)?;
                u = poisson::velocity_from_streamfunction(&psi);
            }
            prev = Some((nw, nr));
        }
        // RK3 is self-starting; no multistep history to keep.
        self.commit(state, omega, rho, None, t0 + dt)
    }

    /// Solve (I − c·L) f_new = f + c·(L f) + add, one tridiagonal system per
    /// z-column. `add` arrives pre-scaled by dt.
    fn implicit_update(
        &self,
        f: &ScalarField2D,
        l: &Bands,
        fac: &TridiagFactor,
        c: f64,
        add: &ScalarField2D,
    ) -> Result<ScalarField2D, SolverError> {
        let (nr, nz) = (self.grid.nr(), self.grid.nz());
        let fv = f.values();
        let av = add.values();
        let mut out = vec![0.0; self.grid.len()];
        let mut col = vec![0.0; nr];
        let mut lcol = vec![0.0; nr];
        for j in 0..nz {
            for i in 0..nr {
                col[i] = fv[i * nz + j];
            }
            banded_apply(&l.sub, &l.diag, &l.sup, &col, &mut lcol);
            for i in 0..nr {
                col[i] += c * lcol[i] + av[i * nz + j];
            }
            fac.solve_in_place(&mut col)?;
            for i in 0..nr {
                out[i * nz + j] = col[i];
            }
        }
        Ok(ScalarField2D::from_values(Arc::clone(&self.grid), f.parity(), out)?)
    }

    /// Final phase of a step: scan for lost finiteness, refresh the velocity
    /// cache, and only then mutate the state.
    fn commit(
        &self,
        state: &mut SimState,
        omega: ScalarField2D,
        rho: ScalarField2D,
        prev_tendency: Option<(ScalarField2D, ScalarField2D)>,
        t_new: f64,
    ) -> Result<(), SolverError> {
        if !omega.is_finite() {
            return Err(SolverError::NotFinite { what: "omega", t: t_new });
        }
        if !rho.is_finite() {
            return Err(SolverError::NotFinite { what: "rho", t: t_new });
        }
        let psi = self.stream.solve(&omega)?;
        let velocity = poisson::velocity_from_streamfunction(&psi);
        if !velocity.is_finite() {
            return Err(SolverError::NotFinite { what: "velocity", t: t_new });
        }
        state.omega = omega;
        state.rho = rho;
        state.velocity = velocity;
        state.prev_tendency = prev_tendency;
        state.t = t_new;
        Ok(())
    }
}

/// One step with a throwaway stepper; prefer `Stepper` + `run` in loops.
pub fn step(state: &SimState, cfg: &StepConfig) -> Result<SimState, SolverError> {
    let stepper = Stepper::new(Arc::clone(state.grid()), cfg.clone())?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// Callback invoked on every *recorded* state (same cadence as the
/// diagnostics rows); `step` is the global step index, 0 for the initial
/// state.
pub trait Observer {
    fn observe(&mut self, state: &SimState, step: usize);
}

#[derive(Debug)]
pub struct RunOutcome {
    pub state: SimState,
    pub record: DiagnosticsRecord,
}

/// A failed run: which step failed and the last coherent state before it,
/// so callers can dump a post-mortem snapshot.
#[derive(Debug, Error)]
#[error("step {step} failed at t = {t}: {source}")]
pub struct RunError {
    pub step: usize,
    pub t: f64,
    #[source]
    pub source: SolverError,
    pub last_good: Box<SimState>,
}

/// March from the initial state to t_end, recording diagnostics every
/// cfg.record_every steps (plus the initial and final states). The span is
/// divided into ceil(span/dt) equal steps so the endpoint lands exactly.
pub fn run(
    initial: &SimState,
    cfg: &StepConfig,
    t_end: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutcome, RunError> {
    let fail = |step: usize, state: &SimState, source: SolverError| RunError {
        step,
        t: state.t,
        source,
        last_good: Box::new(state.clone()),
    };

    let mut state = initial.clone();
    let span = t_end - state.t;
    if !span.is_finite() || span < 0.0 {
        return Err(fail(
            0,
            &state,
            SolverError::BadConfig(format!("t_end = {t_end} precedes initial t = {}", state.t)),
        ));
    }
    if span == 0.0 {
        return Ok(RunOutcome {
            state,
            record: DiagnosticsRecord::new(),
        });
    }

    let n_steps = (span / cfg.dt).ceil().max(1.0) as usize;
    let mut cfg_run = cfg.clone();
    cfg_run.dt = span / n_steps as f64;
    let record_every = cfg_run.record_every;
    let stepper =
        Stepper::new(Arc::clone(state.grid()), cfg_run).map_err(|e| fail(0, &state, e))?;

    let mut record = DiagnosticsRecord::new();
    record
        .push(diagnostics::record_state(&state, 0.0))
        .map_err(|e| fail(0, &state, e.into()))?;
    for obs in observers.iter_mut() {
        obs.observe(&state, 0);
    }

    for k in 1..=n_steps {
        let cfl = match stepper.step(&mut state) {
            Ok(cfl) => cfl,
            Err(e) => return Err(fail(k, &state, e)),
        };
        if k % record_every == 0 || k == n_steps {
            record
                .push(diagnostics::record_state(&state, cfl))
                .map_err(|e| fail(k, &state, e.into()))?;
            for obs in observers.iter_mut() {
                obs.observe(&state, k);
            }
        }
    }
    Ok(RunOutcome { state, record })
}

/// Relative L² errors of a forced run against the closed-form solution the
/// forcing was built from, at one resolution.
#[derive(Debug, Clone, Copy)]
pub struct MmsErrorRow {
    pub n: usize,
    pub dt: f64,
    pub err_omega: f64,
    pub err_rho: f64,
}

/// Drive the solver with manufactured forcing on square n×n grids and
/// measure final-time errors; dt scales with Δr so the observed order is the
/// joint space–time order.
pub fn mms_convergence_study(
    mms: &crate::oracle::ManufacturedSolution,
    resolutions: &[usize],
    r_extent: f64,
    z_period: f64,
    t_end: f64,
    dt_over_dr: f64,
    scheme: Scheme,
) -> Result<Vec<MmsErrorRow>, SolverError> {
    let mut rows = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let grid = MeridianGrid::new(n, n, r_extent, z_period)?;
        let omega0 = mms.sample_omega(&grid, 0.0);
        let rho0 = mms.sample_rho(&grid, 0.0);
        let state = SimState::new(omega0, rho0)?;

        let m_omega = *mms;
        let m_rho = *mms;
        let mut cfg = StepConfig::new(dt_over_dr * grid.dr());
        cfg.scheme = scheme;
        cfg.record_every = usize::MAX;
        cfg.forcing_omega = Some(Arc::new(move |g: &Arc<MeridianGrid>, t: f64| {
            m_omega.sample_forcing_omega(g, t)
        }));
        cfg.forcing_rho = Some(Arc::new(move |g: &Arc<MeridianGrid>, t: f64| {
            m_rho.sample_forcing_rho(g, t)
        }));

        let outcome = run(&state, &cfg, t_end, &mut []).map_err(|e| e.source)?;
        let t = outcome.state.t();
        let exact_omega = mms.sample_omega(&grid, t);
        let exact_rho = mms.sample_rho(&grid, t);
        let err_omega = outcome.state.omega().difference(&exact_omega)?.l2_norm()
            / exact_omega.l2_norm();
        let err_rho = outcome.state.rho().difference(&exact_rho)?.l2_norm() / exact_rho.l2_norm();
        rows.push(MmsErrorRow {
            n,
            dt: dt_over_dr * grid.dr(),
            err_omega,
            err_rho,
        });
    }
    Ok(rows)
}

/// log₂ error ratios between consecutive rows: the observed orders.
pub fn convergence_orders(rows: &[MmsErrorRow]) -> Vec<(f64, f64)> {
    rows.windows(2)
        .map(|w| {
            (
                (w[0].err_omega / w[1].err_omega).log2(),
                (w[0].err_rho / w[1].err_rho).log2(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{bessel_j0, ManufacturedSolution, J1_FIRST_ZERO};
    use std::f64::consts::TAU;

    fn grid(nr: usize, nz: usize, r_extent: f64, z_period: f64) -> Arc<MeridianGrid> {
        MeridianGrid::new(nr, nz, r_extent, z_period).unwrap()
    }

    fn zero_state(g: &Arc<MeridianGrid>) -> SimState {
        SimState::new(
            ScalarField2D::zeros(Arc::clone(g), Parity::Odd),
            ScalarField2D::zeros(Arc::clone(g), Parity::Even),
        )
        .unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid(16, 8, 1.0, 1.0);
        let state = zero_state(&g);
        let cfg = StepConfig::new(1e-2);
        let out = run(&state, &cfg, 0.1, &mut []).unwrap();
        assert_eq!(out.state.omega().max_abs(), 0.0);
        assert_eq!(out.state.rho().max_abs(), 0.0);
        assert_eq!(out.record.len(), 11);
        assert!((out.state.t() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn zero_span_returns_empty_record() {
        let g = grid(16, 8, 1.0, 1.0);
        let state = zero_state(&g);
        let out = run(&state, &StepConfig::new(1e-2), 0.0, &mut []).unwrap();
        assert!(out.record.is_empty());
        assert_eq!(out.state.t(), 0.0);
    }

    #[test]
    fn z_only_density_is_steady() {
        // ρ = ρ(z), ω = 0: no buoyancy torque (∂_r ρ = 0), no diffusion
        // (Δ_h of an r-constant vanishes on the flux stencil exactly).
        let g = grid(24, 16, 1.0, TAU);
        let rho0 = ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |_, z| 1.0 + 0.3 * z.cos());
        let state = SimState::new(ScalarField2D::zeros(Arc::clone(&g), Parity::Odd), rho0.clone()).unwrap();
        let out = run(&state, &StepConfig::new(1e-3), 0.02, &mut []).unwrap();
        assert!(out.state.omega().max_abs() <= 1e-13);
        let drift = out.state.rho().difference(&rho0).unwrap().max_abs();
        assert!(drift <= 1e-12, "hydrostatic drift {drift:.3e}");
    }

    #[test]
    fn buoyancy_torque_matches_stencil() {
        // ρ = r²·cos z with ω = 0 (so u = 0): T_ω = −∂_r ρ = −2 r cos z,
        // exactly, because d_r is stencil-exact on even quadratics.
        let g = grid(16, 8, 1.0, TAU);
        let rho = ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |r, z| r * r * z.cos());
        let state = SimState::new(ScalarField2D::zeros(Arc::clone(&g), Parity::Odd), rho).unwrap();
        let (tw, tr) = explicit_tendency(&state).unwrap();
        let expect = ScalarField2D::from_fn(Arc::clone(&g), Parity::Odd, |r, z| -2.0 * r * z.cos());
        assert!(tw.difference(&expect).unwrap().max_abs() <= 1e-12);
        assert_eq!(tr.max_abs(), 0.0);
    }

    #[test]
    fn advection_is_energy_neutral() {
        // ⟨f, adv(u, f)⟩_w telescopes to roundoff for ANY velocity field —
        // not only divergence-free ones — by the face-pairing construction.
        let g = grid(48, 32, 2.0, TAU);
        let f = ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |r, z| {
            (-(r - 0.9f64).powi(2) / 0.1).exp() * (2.0 * z).sin() + 0.4 * (-r * r / 0.3).exp() * z.cos()
        });
        // Solenoidal u from a streamfunction…
        let psi = ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |r, z| {
            r * r * (-(r * r) / 0.5).exp() * z.sin()
        });
        let u1 = poisson::velocity_from_streamfunction(&psi);
        // …and a deliberately non-solenoidal one.
        let u2 = VelocityField2D {
            ur: ScalarField2D::from_fn(Arc::clone(&g), Parity::Odd, |r, z| r * (1.0 - r / 2.0) * (z.sin() + 0.2)),
            uz: ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |r, z| (r + z.cos()) * 0.7),
        };
        for u in [&u1, &u2] {
            let adv = advect(u, &f).unwrap();
            let ip = f.inner(&adv).unwrap().abs();
            let scale = f.l2_norm() * adv.l2_norm();
            assert!(ip <= 1e-12 * scale, "neutrality {:.3e}", ip / scale);
        }
    }

    #[test]
    fn advection_transports_along_z() {
        // Uniform u^z = c with f = f(z): adv = c ∂_z f to spectral accuracy.
        let g = grid(8, 64, 1.0, TAU);
        let f = ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |_, z| (3.0 * z).sin());
        let u = VelocityField2D {
            ur: ScalarField2D::zeros(Arc::clone(&g), Parity::Odd),
            uz: ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |_, _| 0.7),
        };
        let adv = advect(&u, &f).unwrap();
        let expect = ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |_, z| 2.1 * (3.0 * z).cos());
        assert!(adv.difference(&expect).unwrap().max_abs() <= 1e-11);
    }

    #[test]
    fn bessel_mode_decays_at_eigenrate() {
        // ρ₀ = J₀(j₁,₁ r/R) is a Neumann-compatible Δ_h eigenfunction
        // (J₀' = −J₁ vanishes at the wall), so ‖ρ(t)‖₂ = e^{−α²t}‖ρ₀‖₂ with
        // α = j₁,₁/R, up to O(dt²) + O(Δr²). z-independent data keeps the
        // k = 0 mode pure even with the velocity free (u ≡ 0 since ω ≡ 0).
        let g = grid(64, 4, 1.0, 1.0);
        let alpha = J1_FIRST_ZERO;
        let rho0 = ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |r, _| bessel_j0(alpha * r));
        let state = SimState::new(ScalarField2D::zeros(Arc::clone(&g), Parity::Odd), rho0.clone()).unwrap();
        let t_end = 0.05;
        let out = run(&state, &StepConfig::new(5e-4), t_end, &mut []).unwrap();
        let ratio = out.state.rho().l2_norm() / rho0.l2_norm();
        let exact = (-alpha * alpha * t_end).exp();
        assert!(
            (ratio / exact - 1.0).abs() <= 2e-3,
            "decay ratio {ratio:.6} vs {exact:.6}"
        );
    }

    #[test]
    fn density_norm_never_increases() {
        // Buoyant bubble: ρ is transported and diffused; its L² norm must
        // not grow between recorded steps beyond roundoff.
        let g = grid(32, 32, 1.0, TAU);
        let rho0 = ScalarField2D::from_fn(Arc::clone(&g), Parity::Even, |r, z| {
            (-(r * r + (z - 3.0).powi(2)) / 0.25).exp()
        });
        let state = SimState::new(ScalarField2D::zeros(Arc::clone(&g), Parity::Odd), rho0).unwrap();
        let out = run(&state, &StepConfig::new(1e-3), 0.05, &mut []).unwrap();
        let rho_initial = out.record.rows()[0].rho_l2;
        let mut prev = f64::INFINITY;
        for row in out.record.rows() {
            assert!(
                row.rho_l2 <= prev + 1e-10 * rho_initial,
                "rho_l2 grew at t = {}",
                row.t
            );
            prev = row.rho_l2;
        }
        // The bubble stirs up motion: the velocity must be nonzero and the
        // cache coherent with the final vorticity.
        assert!(out.state.velocity().l2_norm() > 0.0);
        assert!(out.state.velocity_cache_residual().unwrap() <= 1e-13);
    }

    #[test]
    fn vortex_ring_energy_never_increases() {
        let g = grid(32, 32, 1.0, TAU);
        let omega0 = ScalarField2D::from_fn(Arc::clone(&g), Parity::Odd, |r, z| {
            r * (-(r * r + (z - 3.0).powi(2)) / 0.2).exp()
        });
        let state = SimState::new(omega0, ScalarField2D::zeros(Arc::clone(&g), Parity::Even)).unwrap();
        let out = run(&state, &StepConfig::new(1e-3), 0.05, &mut []).unwrap();
        let u_initial = out.record.rows()[0].u_l2;
        let mut prev = f64::INFINITY;
        for row in out.record.rows() {
            assert!(
                row.u_l2 <= prev + 1e-8 * u_initial,
                "kinetic energy grew at t = {}",
                row.t
            );
            prev = row.u_l2;
        }
    }

    #[test]
    fn mms_error_shrinks_at_second_order() {
        // Short-horizon manufactured run at two resolutions; the full
        // three-level study lives in the acceptance suite.
        let mms = ManufacturedSolution::standard();
        let rows = mms_convergence_study(&mms, &[32, 64], 2.0, TAU, 0.1, 0.25, Scheme::Cnab2).unwrap();
        let orders = convergence_orders(&rows);
        assert!(
            orders[0].0 >= 1.7 && orders[0].1 >= 1.7,
            "orders {:?} from errors {:?}",
            orders,
            rows
        );
    }

    #[test]
    fn rk3_matches_cnab2_closely() {
        // Same manufactured problem, both schemes: each must land near the
        // exact solution, so they must land near each other.
        let mms = ManufacturedSolution::standard();
        let g = grid(32, 32, 2.0, TAU);
        let state = SimState::new(mms.sample_omega(&g, 0.0), mms.sample_rho(&g, 0.0)).unwrap();
        let m1 = mms;
        let m2 = mms;
        let mut cfg = StepConfig::new(0.01);
        cfg.forcing_omega = Some(Arc::new(move |g: &Arc<MeridianGrid>, t: f64| {
            m1.sample_forcing_omega(g, t)
        }));
        cfg.forcing_rho = Some(Arc::new(move |g: &Arc<MeridianGrid>, t: f64| {
            m2.sample_forcing_rho(g, t)
        }));
        let out_ab = run(&state, &cfg, 0.1, &mut []).unwrap();
        cfg.scheme = Scheme::Rk3Imex;
        let out_rk = run(&state, &cfg, 0.1, &mut []).unwrap();
        let gap = out_ab
            .state
            .omega()
            .difference(out_rk.state.omega())
            .unwrap()
            .l2_norm();
        let scale = out_ab.state.omega().l2_norm();
        assert!(gap <= 1e-3 * scale, "scheme gap {:.3e}", gap / scale);
        // RK3 should be at least as accurate as CNAB2 against the truth.
        let exact = mms.sample_omega(&g, out_rk.state.t());
        let err_rk = out_rk.state.omega().difference(&exact).unwrap().l2_norm();
        let err_ab = out_ab.state.omega().difference(&exact).unwrap().l2_norm();
        assert!(err_rk <= 2.0 * err_ab, "rk3 {err_rk:.3e} vs ab2 {err_ab:.3e}");
    }

    #[test]
    fn cfl_violation_reports_and_preserves_state() {
        let g = grid(24, 16, 1.0, TAU);
        let omega0 = ScalarField2D::from_fn(Arc::clone(&g), Parity::Odd, |r, z| {
            40.0 * r * (-(r * r + (z - 3.0).powi(2)) / 0.2).exp()
        });
        let state = SimState::new(omega0, ScalarField2D::zeros(Arc::clone(&g), Parity::Even)).unwrap();
        let err = run(&state, &StepConfig::new(0.5), 1.0, &mut []).unwrap_err();
        assert!(matches!(err.source, SolverError::CflViolation { .. }));
        assert_eq!(err.step, 1);
        // last_good is the untouched initial state.
        assert_eq!(err.last_good.t(), state.t());
        let d = err.last_good.omega().difference(state.omega()).unwrap().max_abs();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn observers_fire_on_record_cadence() {
        struct Count(Vec<usize>);
        impl Observer for Count {
            fn observe(&mut self, _state: &SimState, step: usize) {
                self.0.push(step);
            }
        }
        let g = grid(16, 8, 1.0, 1.0);
        let state = zero_state(&g);
        let mut cfg = StepConfig::new(1e-2);
        cfg.record_every = 4;
        let mut counter = Count(Vec::new());
        let out = run(&state, &cfg, 0.1, &mut [&mut counter]).unwrap();
        assert_eq!(counter.0, vec![0, 4, 8, 10]);
        assert_eq!(out.record.len(), 4);
    }

    #[test]
    fn parity_is_enforced_and_preserved() {
        let g = grid(16, 8, 1.0, 1.0);
        let bad = SimState::new(
            ScalarField2D::zeros(Arc::clone(&g), Parity::Even),
            ScalarField2D::zeros(Arc::clone(&g), Parity::Even),
        );
        assert!(matches!(bad, Err(SolverError::WrongParity { what: "omega", .. })));

        let mms = ManufacturedSolution::standard();
        let g2 = grid(24, 16, 2.0, TAU);
        let state = SimState::new(mms.sample_omega(&g2, 0.0), mms.sample_rho(&g2, 0.0)).unwrap();
        let next = step(&state, &StepConfig::new(1e-3)).unwrap();
        assert_eq!(next.omega().parity(), Parity::Odd);
        assert_eq!(next.rho().parity(), Parity::Even);
        assert_eq!(next.velocity().ur.parity(), Parity::Odd);
        assert_eq!(next.velocity().uz.parity(), Parity::Even);
    }
}
