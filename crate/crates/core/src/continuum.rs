//! The continuum field equation and its Lax-coefficient bookkeeping.
//!
//! Evolves u_{xt} + α u_x u_{xx} + 3β u_x² u_{xx} + γ u_{xxxx} = δ sin u in
//! the once-integrated form
//!
//! ```text
//! u_t = ∂_x⁻¹(S(u)) − (α/2) u_x² − (cubic term) − γ u_{xxx}
//! ```
//!
//! where S(u) = δ sin u for the undeformed model and the cubic term is
//! β u_x³ (deformations modify both; see [`crate::qideform`]).  The
//! antiderivative is pinned at the *right* end of the domain: the first
//! integral is evaluated as F − F(x_max).  The operator convention itself
//! (F(x_min) = 0) is unchanged; subtracting the right-end value merely fixes
//! the integration constant so the right plateau of a kink is held, which is
//! the stable choice under the boundary clamp for topological data
//! interpolating 0 → 2π.
//!
//! Time stepping is classical RK4 with a hard clamp of the outermost cells
//! (their u_t is zeroed) and an optional absorbing sponge that relaxes the
//! strip near each boundary toward the initial data.

use crate::error::{Error, Result};
use crate::numerics::{antiderivative, diff, rk4_step, Grid1D, RealField};
use crate::qideform::{source_and_cubic, DeformationSpec};
use serde::{Deserialize, Serialize};

/// Model parameters of the field equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Asserts the zero-curvature sector α = 0, γ = 2β.
    pub integrable: bool,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64, integrable: bool) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            delta,
            integrable,
        };
        if integrable && (alpha != 0.0 || gamma != 2.0 * beta) {
            return Err(Error::InvalidParams {
                reason: format!(
                    "integrable flag requires α = 0 and γ = 2β exactly, got α={alpha}, β={beta}, γ={gamma}"
                ),
            });
        }
        Ok(p)
    }

    /// The integrable sector: α = 0, γ = 2β.
    pub fn integrable(beta: f64, delta: f64) -> Self {
        Self {
            alpha: 0.0,
            beta,
            gamma: 2.0 * beta,
            delta,
            integrable: true,
        }
    }
}

/// A field configuration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: RealField,
    pub t: f64,
}

impl FieldState {
    pub fn new(u: RealField, t: f64) -> Self {
        Self { u, t }
    }

    /// True when both ends sit within `tol` of a vacuum (multiple of 2π) —
    /// the admissibility condition for soliton runs.
    pub fn boundary_near_vacuum(&self, tol: f64) -> bool {
        let tau = std::f64::consts::TAU;
        let near = |v: f64| {
            let r = (v / tau).round() * tau;
            (v - r).abs() <= tol
        };
        near(self.u.values[0]) && near(*self.u.values.last().unwrap())
    }
}

/// Coefficient fields of the zero-curvature (Lax) connection, organised by
/// powers of the spectral parameter.
///
/// The B/C pairs satisfy B₀ + C₀ = 0, B₂ + C₂ = 0, B₋₁ = C₋₁, B₁ = C₁ by
/// construction, and q + r = 0.
#[derive(Debug, Clone)]
pub struct LaxCoeffs {
    pub a_m1: RealField,
    pub a1: RealField,
    /// λ³ coefficient 8β — state-independent.
    pub a3: f64,
    pub b_m1: RealField,
    pub b0: RealField,
    pub b1: RealField,
    pub b2: RealField,
    pub c_m1: RealField,
    pub c0: RealField,
    pub c1: RealField,
    pub c2: RealField,
    pub q: RealField,
    pub r: RealField,
}

impl LaxCoeffs {
    /// Sum the λ-ladder A = A₋₁(iλ)⁻¹ + A₁(iλ) + A₃(iλ)³ at λ = iμ,
    /// where (iλ) = −μ.  Returns (A, B, C) fields.
    pub fn ladder_at_imu(&self, mu: f64) -> (RealField, RealField, RealField) {
        let il = -mu;
        let a = self
            .a_m1
            .map(|v| v / il)
            .zip_map(&self.a1, |acc, v| acc + v * il)
            .map(|v| v + self.a3 * il.powi(3));
        let b = self
            .b_m1
            .map(|v| v / il)
            .zip_map(&self.b0, |acc, v| acc + v)
            .zip_map(&self.b1, |acc, v| acc + v * il)
            .zip_map(&self.b2, |acc, v| acc + v * il * il);
        let c = self
            .c_m1
            .map(|v| v / il)
            .zip_map(&self.c0, |acc, v| acc + v)
            .zip_map(&self.c1, |acc, v| acc + v * il)
            .zip_map(&self.c2, |acc, v| acc + v * il * il);
        (a, b, c)
    }
}

/// Fill the Lax coefficient fields from a snapshot.  Requires the
/// integrable sector.
pub fn lax_coeffs(s: &FieldState, p: &ModelParams) -> Result<LaxCoeffs> {
    if !p.integrable || p.alpha != 0.0 || p.gamma != 2.0 * p.beta {
        return Err(Error::InvalidParams {
            reason: "lax_coeffs requires the integrable sector (α=0, γ=2β)".into(),
        });
    }
    let ux = diff(&s.u, 1)?;
    let uxx = diff(&s.u, 2)?;
    let uxxx = diff(&s.u, 3)?;
    let (beta, delta) = (p.beta, p.delta);
    let a_m1 = s.u.map(|u| -delta / 4.0 * u.cos());
    let a1 = ux.map(|v| beta * v * v);
    let b_m1 = s.u.map(|u| -delta / 4.0 * u.sin());
    let b0 = uxxx.zip_map(&ux, |w, v| beta * w + beta / 2.0 * v * v * v);
    let b1 = uxx.map(|v| -2.0 * beta * v);
    let b2 = ux.map(|v| 4.0 * beta * v);
    let c_m1 = b_m1.clone();
    let c0 = b0.map(|v| -v);
    let c1 = b1.clone();
    let c2 = b2.map(|v| -v);
    let q = ux.map(|v| -v / 2.0);
    let r = ux.map(|v| v / 2.0);
    Ok(LaxCoeffs {
        a_m1,
        a1,
        a3: 8.0 * beta,
        b_m1,
        b0,
        b1,
        b2,
        c_m1,
        c0,
        c1,
        c2,
        q,
        r,
    })
}

/// u_t from the once-integrated equation, with the deformation applied.
pub fn pde_rhs(s: &FieldState, p: &ModelParams, d: &DeformationSpec) -> Result<RealField> {
    if !s.u.all_finite() {
        return Err(Error::NonFiniteInput { context: "pde_rhs" });
    }
    let ux = diff(&s.u, 1)?;
    let uxxx = diff(&s.u, 3)?;
    let (source, cubic) = source_and_cubic(&s.u, &ux, p, d)?;
    rhs_from_parts(&s.u, &ux, &uxxx, &source, &cubic, p)
}

/// Assemble u_t from a precomputed source field (used by the deformed
/// integrator where the source is frozen once per step).
pub(crate) fn rhs_from_parts(
    u: &RealField,
    ux: &RealField,
    uxxx: &RealField,
    source: &RealField,
    cubic: &RealField,
    p: &ModelParams,
) -> Result<RealField> {
    let big_f = antiderivative(source)?;
    let pin = *big_f.values.last().unwrap();
    let n = u.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(
            (big_f.values[i] - pin)
                - 0.5 * p.alpha * ux.values[i] * ux.values[i]
                - cubic.values[i]
                - p.gamma * uxxx.values[i],
        );
    }
    RealField::new(u.grid, out)
}

/// Pointwise residual of the field equation:
/// u_{xt} + α u_x u_{xx} + 3β u_x² u_{xx} + γ u_{xxxx} − δ sin u,
/// with u_{xt} = ∂_x(u_t).
pub fn pde_residual(s: &FieldState, u_t: &RealField, p: &ModelParams) -> Result<RealField> {
    let uxt = diff(u_t, 1)?;
    let ux = diff(&s.u, 1)?;
    let uxx = diff(&s.u, 2)?;
    let uxxxx = diff(&s.u, 4)?;
    let n = s.u.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(
            uxt.values[i]
                + p.alpha * ux.values[i] * uxx.values[i]
                + 3.0 * p.beta * ux.values[i] * ux.values[i] * uxx.values[i]
                + p.gamma * uxxxx.values[i]
                - p.delta * s.u.values[i].sin(),
        );
    }
    RealField::new(s.u.grid, out)
}

/// One stored snapshot: the state plus cached derivatives u_x..u_{xxxx}.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: FieldState,
    pub ux: RealField,
    pub uxx: RealField,
    pub uxxx: RealField,
    pub uxxxx: RealField,
}

impl Snapshot {
    pub fn build(u: RealField, t: f64) -> Result<Self> {
        Ok(Self {
            ux: diff(&u, 1)?,
            uxx: diff(&u, 2)?,
            uxxx: diff(&u, 3)?,
            uxxxx: diff(&u, 4)?,
            state: FieldState::new(u, t),
        })
    }
}

/// Blow-up diagnostics: the step at which a non-finite value appeared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUpInfo {
    pub step: usize,
    pub t: f64,
}

/// Result of a PDE evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// Set when dt exceeded the stability heuristic c_stab·Δx³/γ.
    pub stability_warning: bool,
    /// Set when the run aborted on non-finite values; snapshots hold every
    /// stored state up to the last good one.
    pub blow_up: Option<BlowUpInfo>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.state.t).collect()
    }
}

/// Boundary/stability options for [`pde_evolve`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Snapshots are stored every `stride` steps (and at t = 0).
    pub snapshot_stride: usize,
    /// Hard-clamped cells at the left end (u_t zeroed there).  Must be 0
    /// when the source does not integrate to zero: the gauge pins the right
    /// end, so ∫S ≠ 0 moves the left plateau at rate −∫S dx, and a clamp
    /// fighting that climb grows a corner that poisons the stencils.
    pub n_clamp_left: usize,
    /// Hard-clamped cells at the right (gauge-pinned) end.
    pub n_clamp_right: usize,
    /// Absorbing-strip width in x units; 0 disables the sponge.
    pub sponge_width: f64,
    /// Sponge relaxation rate toward the initial data.
    pub sponge_strength: f64,
    /// Stability-heuristic constant: warn when dt > c_stab·Δx³/γ.
    pub c_stab: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            snapshot_stride: 100,
            n_clamp_left: 4,
            n_clamp_right: 4,
            sponge_width: 0.0,
            sponge_strength: 25.0,
            c_stab: 0.1,
        }
    }
}

/// Smoothstep-profiled sponge coefficient σ(x), nonzero in a strip of the
/// given width at each end of the domain.
pub(crate) fn sponge_sigma(grid: &Grid1D, width: f64, strength: f64) -> Vec<f64> {
    let n = grid.n_points;
    let mut sig = vec![0.0; n];
    if width <= 0.0 || strength <= 0.0 {
        return sig;
    }
    let smoothstep = |s: f64| {
        let s = s.clamp(0.0, 1.0);
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    };
    for (i, v) in sig.iter_mut().enumerate() {
        let x = grid.x(i);
        let from_left = (x - grid.x_min) / width;
        let from_right = (grid.x_max - x) / width;
        *v = strength * (smoothstep(1.0 - from_left) + smoothstep(1.0 - from_right));
    }
    sig
}

/// RK4 evolution of the (possibly deformed) field equation.
///
/// Returns the trajectory; a blow-up aborts the loop and is reported in
/// [`Trajectory::blow_up`] together with every snapshot stored so far.
pub fn pde_evolve(
    s: &FieldState,
    p: &ModelParams,
    d: &DeformationSpec,
    dt: f64,
    n_steps: usize,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParams {
            reason: format!("dt must be finite and nonzero, got {dt}"),
        });
    }
    if !s.u.all_finite() {
        return Err(Error::NonFiniteInput { context: "pde_evolve" });
    }
    let grid = s.u.grid;
    let dx = grid.dx();
    let stability_warning = p.gamma != 0.0 && dt.abs() > opts.c_stab * dx.powi(3) / p.gamma.abs();
    let sig = sponge_sigma(&grid, opts.sponge_width, opts.sponge_strength);
    let u_ref = s.u.values.clone();
    let nb_l = opts.n_clamp_left.min(grid.n_points / 2);
    let nb_r = opts.n_clamp_right.min(grid.n_points / 2);
    let stride = opts.snapshot_stride.max(1);

    let mut rhs = |v: &[f64]| -> Vec<f64> {
        let u = RealField {
            grid,
            values: v.to_vec(),
        };
        let state = FieldState::new(u, 0.0);
        let mut out = match pde_rhs(&state, p, d) {
            Ok(f) => f.values,
            Err(_) => vec![f64::NAN; v.len()],
        };
        for i in 0..v.len() {
            if sig[i] != 0.0 {
                out[i] -= sig[i] * (v[i] - u_ref[i]);
            }
        }
        for i in 0..nb_l {
            out[i] = 0.0;
        }
        for i in 0..nb_r {
            out[v.len() - 1 - i] = 0.0;
        }
        out
    };

    let mut u = s.u.values.clone();
    let mut snapshots = vec![Snapshot::build(s.u.clone(), s.t)?];
    let mut blow_up = None;
    for step in 1..=n_steps {
        match rk4_step(&mut rhs, &u, dt) {
            Ok(next) => u = next,
            Err(_) => {
                blow_up = Some(BlowUpInfo {
                    step,
                    t: s.t + dt * step as f64,
                });
                break;
            }
        }
        if step % stride == 0 {
            let t = s.t + dt * step as f64;
            snapshots.push(Snapshot::build(
                RealField {
                    grid,
                    values: u.clone(),
                },
                t,
            )?);
        }
    }
    Ok(Trajectory {
        snapshots,
        stability_warning,
        blow_up,
    })
}
