//! The mixed anharmonic/on-site chain: masses coupled by bonds with
//! potential V(Δ) = kΔ²/2 + αΔ³/3 + βΔ⁴/4 sitting in a periodic substrate
//! potential of period a and strength f₀,
//!
//! ```text
//! ÿ_i = (y_{i+1} − 2y_i + y_{i−1})·[k + α(y_{i+1} − y_{i−1})
//!        + β(y_{i+1}² + y_i² + y_{i−1}² − y_{i+1}y_i − y_{i+1}y_{i−1} − y_i y_{i−1})]
//!        − f₀ sin(2π y_i / a),
//! ```
//!
//! which is the force form of V′(y_{i+1} − y_i) − V′(y_i − y_{i−1}) minus
//! the substrate gradient.  α = β = 0 reduces it to the discrete
//! sine-Gordon chain; f₀ = β = 0 to the cubic anharmonic chain.
//!
//! [`ContinuumMap`] realizes a continuum parameter set (α, β, γ, δ) on the
//! chain: to fourth order in the spacing h the multiple-scales limit
//! (moving frame ξ = x − c₀τ, slow time T = τ/(2c₀), c₀ = h√k) is
//! u_{ξT} + α̂u_ξu_ξξ + 3β̂u_ξ²u_ξξ + γ̂u_ξξξξ = δ̂ sin u with α̂ = 2α_l h³,
//! β̂ = β_l h⁴, γ̂ = k h⁴/12, δ̂ = f₀ at substrate period a = 2π.

use crate::continuum::{BlowUpInfo, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::rk4_step;
use serde::{Deserialize, Serialize};

const TAU: f64 = std::f64::consts::TAU;

/// Ghost-site rule at the chain ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LatticeBoundary {
    /// Ghost sites pinned to the given asymptote values (kink runs pin the
    /// ends to the two substrate minima the profile connects).
    FixedEnds { left: f64, right: f64 },
    /// Ghost sites copy their neighbors — zero-strain ends.
    FreeEnds,
}

/// Chain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub f0: f64,
    /// Substrate period; must be positive whenever f₀ ≠ 0.
    pub a: f64,
    pub boundary: LatticeBoundary,
}

impl LatticeParams {
    pub fn new(
        k: f64,
        alpha: f64,
        beta: f64,
        f0: f64,
        a: f64,
        boundary: LatticeBoundary,
    ) -> Result<Self> {
        for (name, v) in [("k", k), ("alpha", alpha), ("beta", beta), ("f0", f0), ("a", a)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams {
                    reason: format!("lattice parameter {name} must be finite, got {v}"),
                });
            }
        }
        if f0 != 0.0 && a <= 0.0 {
            return Err(Error::InvalidParams {
                reason: format!("substrate period a must be positive when f₀ ≠ 0, got a = {a}"),
            });
        }
        Ok(Self {
            k,
            alpha,
            beta,
            f0,
            a,
            boundary,
        })
    }
}

/// Displacements and velocities of the chain at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl LatticeState {
    pub fn new(y: Vec<f64>, v: Vec<f64>, t: f64) -> Result<Self> {
        if y.len() != v.len() {
            return Err(Error::InvalidParams {
                reason: format!(
                    "displacement and velocity lengths differ: {} vs {}",
                    y.len(),
                    v.len()
                ),
            });
        }
        if y.len() < 2 {
            return Err(Error::InvalidParams {
                reason: format!("chain needs at least 2 sites, got {}", y.len()),
            });
        }
        if !(y.iter().all(|x| x.is_finite()) && v.iter().all(|x| x.is_finite()) && t.is_finite()) {
            return Err(Error::NonFiniteInput { context: "LatticeState" });
        }
        Ok(Self { y, v, t })
    }

    /// Chain at rest in the given displacement profile.
    pub fn at_rest(y: Vec<f64>) -> Result<Self> {
        let v = vec![0.0; y.len()];
        Self::new(y, v, 0.0)
    }

    pub fn n_sites(&self) -> usize {
        self.y.len()
    }
}

fn ghosts(y: &[f64], boundary: &LatticeBoundary) -> (f64, f64) {
    match *boundary {
        LatticeBoundary::FixedEnds { left, right } => (left, right),
        LatticeBoundary::FreeEnds => (y[0], *y.last().unwrap()),
    }
}

/// Accelerations ÿ_i of every site.
pub fn lattice_accel(s: &LatticeState, p: &LatticeParams) -> Result<Vec<f64>> {
    let y = &s.y;
    let n = y.len();
    let (gl, gr) = ghosts(y, &p.boundary);
    let mut acc = Vec::with_capacity(n);
    for i in 0..n {
        let yl = if i == 0 { gl } else { y[i - 1] };
        let yc = y[i];
        let yr = if i == n - 1 { gr } else { y[i + 1] };
        let d2 = yr - 2.0 * yc + yl;
        let bracket = p.k
            + p.alpha * (yr - yl)
            + p.beta * (yr * yr + yc * yc + yl * yl - yr * yc - yr * yl - yc * yl);
        let onsite = if p.f0 == 0.0 {
            0.0
        } else {
            p.f0 * (TAU * yc / p.a).sin()
        };
        let a_i = d2 * bracket - onsite;
        if !a_i.is_finite() {
            return Err(Error::NonFiniteInput { context: "lattice_accel" });
        }
        acc.push(a_i);
    }
    Ok(acc)
}

/// Bond potential V(Δ) = kΔ²/2 + αΔ³/3 + βΔ⁴/4.
fn bond_v(d: f64, p: &LatticeParams) -> f64 {
    p.k * d * d / 2.0 + p.alpha * d * d * d / 3.0 + p.beta * d * d * d * d / 4.0
}

/// Total energy: kinetic + bond potentials + substrate potential.
///
/// Fixed ends contribute their two ghost bonds (the ghosts are part of the
/// potential, which is what makes −∂E/∂y_i reproduce [`lattice_accel`]
/// exactly); free ends have zero-strain ghost bonds that drop out.
pub fn lattice_energy(s: &LatticeState, p: &LatticeParams) -> f64 {
    let kinetic: f64 = s.v.iter().map(|&v| v * v / 2.0).sum();
    let y = &s.y;
    let n = y.len();
    let mut pot = 0.0;
    for i in 0..n - 1 {
        pot += bond_v(y[i + 1] - y[i], p);
    }
    if let LatticeBoundary::FixedEnds { left, right } = p.boundary {
        pot += bond_v(y[0] - left, p) + bond_v(right - y[n - 1], p);
    }
    if p.f0 != 0.0 {
        let scale = p.a * p.f0 / TAU;
        pot += y
            .iter()
            .map(|&yi| scale * (1.0 - (TAU * yi / p.a).cos()))
            .sum::<f64>();
    }
    kinetic + pot
}

/// A chain trajectory with snapshots every `stride` steps.
#[derive(Debug, Clone)]
pub struct LatticeTrajectory {
    pub snapshots: Vec<LatticeState>,
    pub blow_up: Option<BlowUpInfo>,
}

impl LatticeTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

/// RK4 evolution of the chain written as first-order pairs (y, v).
///
/// A non-finite state aborts the loop; the step index is reported and every
/// snapshot stored so far is kept.
pub fn lattice_evolve(
    s: &LatticeState,
    p: &LatticeParams,
    dt: f64,
    n_steps: usize,
    stride: usize,
) -> Result<LatticeTrajectory> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParams {
            reason: format!("dt must be finite and nonzero, got {dt}"),
        });
    }
    let n = s.n_sites();
    let stride = stride.max(1);
    let mut rhs = |state: &[f64]| -> Vec<f64> {
        let (y, v) = state.split_at(n);
        let trial = LatticeState {
            y: y.to_vec(),
            v: v.to_vec(),
            t: 0.0,
        };
        match lattice_accel(&trial, p) {
            Ok(acc) => {
                let mut out = v.to_vec();
                out.extend(acc);
                out
            }
            Err(_) => vec![f64::NAN; 2 * n],
        }
    };

    let mut state: Vec<f64> = s.y.iter().chain(s.v.iter()).copied().collect();
    let mut snapshots = vec![s.clone()];
    let mut blow_up = None;
    for step in 1..=n_steps {
        match rk4_step(&mut rhs, &state, dt) {
            Ok(next) => state = next,
            Err(_) => {
                blow_up = Some(BlowUpInfo {
                    step,
                    t: s.t + dt * step as f64,
                });
                break;
            }
        }
        if step % stride == 0 {
            snapshots.push(LatticeState {
                y: state[..n].to_vec(),
                v: state[n..].to_vec(),
                t: s.t + dt * step as f64,
            });
        }
    }
    Ok(LatticeTrajectory { snapshots, blow_up })
}

/// Chain realization of a continuum parameter set at spacing h.
///
/// k = 12γ/h⁴, α_l = α/(2h³), β_l = β/h⁴, f₀ = δ, a = 2π; in the
/// integrable sector γ = 2β this gives β_l = k/24.  A continuum feature
/// moving at frame velocity c appears on the chain at lab velocity
/// c₀ + c/(2c₀) with c₀ = h√k.
#[derive(Debug, Clone, Copy)]
pub struct ContinuumMap {
    pub params: LatticeParams,
    pub h: f64,
    pub c0: f64,
}

impl ContinuumMap {
    pub fn new(p: &ModelParams, h: f64, boundary: LatticeBoundary) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParams {
                reason: format!("lattice spacing h must be positive, got {h}"),
            });
        }
        if !(p.gamma > 0.0) {
            return Err(Error::InvalidParams {
                reason: format!("continuum map needs γ > 0 for a positive bond constant, got {}", p.gamma),
            });
        }
        let h4 = h.powi(4);
        let k = 12.0 * p.gamma / h4;
        let params = LatticeParams::new(
            k,
            p.alpha / (2.0 * h * h * h),
            p.beta / h4,
            p.delta,
            TAU,
            boundary,
        )?;
        Ok(Self {
            params,
            h,
            c0: h * k.sqrt(),
        })
    }

    /// Lab-frame chain velocity of a continuum feature with frame velocity c.
    pub fn lab_velocity(&self, c: f64) -> f64 {
        self.c0 + c / (2.0 * self.c0)
    }

    /// Sample continuum data u(x), u_t(x) onto chain sites x_i = x_min + i·h.
    /// Site velocities combine the frame drift and the slow-time rate:
    /// ẏ_i = −c₀·u_x(x_i) + u_t(x_i)/(2c₀).
    pub fn sample(
        &self,
        x_min: f64,
        n_sites: usize,
        u: impl Fn(f64) -> f64,
        ux: impl Fn(f64) -> f64,
        ut: impl Fn(f64) -> f64,
    ) -> Result<LatticeState> {
        let mut y = Vec::with_capacity(n_sites);
        let mut v = Vec::with_capacity(n_sites);
        for i in 0..n_sites {
            let x = x_min + self.h * i as f64;
            y.push(u(x));
            v.push(-self.c0 * ux(x) + ut(x) / (2.0 * self.c0));
        }
        LatticeState::new(y, v, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::{kink, kink_ut, KinkParams};
    use approx::assert_abs_diff_eq;

    fn free(k: f64, alpha: f64, beta: f64, f0: f64, a: f64) -> LatticeParams {
        LatticeParams::new(k, alpha, beta, f0, a, LatticeBoundary::FreeEnds).unwrap()
    }

    #[test]
    fn zero_state_has_zero_force_and_energy() {
        let s = LatticeState::at_rest(vec![0.0; 16]).unwrap();
        let p = free(1.3, 0.2, 0.1, 0.7, 2.0);
        assert!(lattice_accel(&s, &p).unwrap().iter().all(|&a| a == 0.0));
        assert_eq!(lattice_energy(&s, &p), 0.0);
    }

    #[test]
    fn harmonic_middle_site_feels_minus_two() {
        let s = LatticeState::at_rest(vec![0.0, 1.0, 0.0]).unwrap();
        let p = LatticeParams::new(
            1.0,
            0.0,
            0.0,
            0.0,
            1.0,
            LatticeBoundary::FixedEnds { left: 0.0, right: 0.0 },
        )
        .unwrap();
        let acc = lattice_accel(&s, &p).unwrap();
        assert_eq!(acc[1], -2.0, "harmonic second difference at the peak");
    }

    #[test]
    fn uniform_state_feels_only_the_substrate() {
        let c = 0.3;
        let s = LatticeState::at_rest(vec![c; 12]).unwrap();
        let p = free(1.0, 0.5, 0.25, 1.0, 1.0);
        for &a in &lattice_accel(&s, &p).unwrap() {
            assert_abs_diff_eq!(a, -(TAU * c).sin(), epsilon = 1e-15);
        }
    }

    #[test]
    fn single_free_bond_stores_half() {
        let s = LatticeState::at_rest(vec![0.0, 1.0]).unwrap();
        let p = free(1.0, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(lattice_energy(&s, &p), 0.5);
    }

    #[test]
    fn force_is_minus_gradient_of_energy() {
        // central differences of E against lattice_accel on an irregular
        // small state, both boundary rules
        let y0 = [0.11, -0.23, 0.31, 0.05, -0.17, 0.29, -0.02, 0.13];
        for boundary in [
            LatticeBoundary::FreeEnds,
            LatticeBoundary::FixedEnds { left: 0.04, right: -0.08 },
        ] {
            let p = LatticeParams::new(1.7, 0.4, 0.9, 0.6, 2.5, boundary).unwrap();
            let s = LatticeState::at_rest(y0.to_vec()).unwrap();
            let acc = lattice_accel(&s, &p).unwrap();
            let eps = 1e-6;
            for i in 0..y0.len() {
                let mut yp = y0.to_vec();
                let mut ym = y0.to_vec();
                yp[i] += eps;
                ym[i] -= eps;
                let ep = lattice_energy(&LatticeState::at_rest(yp).unwrap(), &p);
                let em = lattice_energy(&LatticeState::at_rest(ym).unwrap(), &p);
                let grad = (ep - em) / (2.0 * eps);
                assert_abs_diff_eq!(acc[i], -grad, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn sine_gordon_chain_reduction_is_bitwise() {
        let y: Vec<f64> = (0..32).map(|i| 0.4 * (0.37 * i as f64).sin()).collect();
        let s = LatticeState::at_rest(y.clone()).unwrap();
        let p = free(2.1, 0.0, 0.0, 0.8, 3.0);
        let acc = lattice_accel(&s, &p).unwrap();
        for i in 0..y.len() {
            let yl = if i == 0 { y[0] } else { y[i - 1] };
            let yr = if i == y.len() - 1 { y[i] } else { y[i + 1] };
            let d2 = yr - 2.0 * y[i] + yl;
            let expected = d2 * p.k - p.f0 * (TAU * y[i] / p.a).sin();
            assert_eq!(acc[i], expected, "site {i}: α=β=0 must collapse exactly");
        }
    }

    #[test]
    fn anharmonic_chain_reduction_drops_substrate() {
        let y: Vec<f64> = (0..24).map(|i| 0.2 * (0.61 * i as f64).cos()).collect();
        let s = LatticeState::at_rest(y.clone()).unwrap();
        let p = free(1.0, 0.7, 0.0, 0.0, 1.0);
        let acc = lattice_accel(&s, &p).unwrap();
        for i in 1..y.len() - 1 {
            let d2 = y[i + 1] - 2.0 * y[i] + y[i - 1];
            let expected = d2 * (p.k + p.alpha * (y[i + 1] - y[i - 1]));
            assert_eq!(acc[i], expected, "site {i}: cubic chain force");
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let s = LatticeState::at_rest(vec![0.0; 10]).unwrap();
        let p = free(1.0, 0.3, 0.2, 0.5, 1.0);
        let traj = lattice_evolve(&s, &p, 1e-2, 200, 50).unwrap();
        assert!(traj.blow_up.is_none());
        for snap in &traj.snapshots {
            assert!(snap.y.iter().all(|&v| v == 0.0));
            assert!(snap.v.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn plucked_harmonic_chain_conserves_energy_to_1e8() {
        let n = 64;
        let mut y = vec![0.0; n];
        y[n / 2] = 1.0;
        let s = LatticeState::at_rest(y).unwrap();
        let p = LatticeParams::new(
            1.0,
            0.0,
            0.0,
            0.0,
            1.0,
            LatticeBoundary::FixedEnds { left: 0.0, right: 0.0 },
        )
        .unwrap();
        let e0 = lattice_energy(&s, &p);
        let traj = lattice_evolve(&s, &p, 1e-3, 10_000, 1000).unwrap();
        assert!(traj.blow_up.is_none());
        let drift = traj
            .snapshots
            .iter()
            .map(|snap| (lattice_energy(snap, &p) - e0).abs() / e0)
            .fold(0.0_f64, f64::max);
        assert!(drift < 1e-8, "harmonic pluck energy drift {drift:.3e}");
    }

    #[test]
    fn nonlinear_substrate_chain_conserves_energy_to_1e6() {
        let n = 48;
        let y: Vec<f64> = (0..n).map(|i| 0.15 * (0.43 * i as f64).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| 0.05 * (0.29 * i as f64).cos()).collect();
        let s = LatticeState::new(y, v, 0.0).unwrap();
        let p = free(1.0, 0.3, 0.5, 0.4, TAU);
        let e0 = lattice_energy(&s, &p);
        let traj = lattice_evolve(&s, &p, 1e-3, 10_000, 1000).unwrap();
        assert!(traj.blow_up.is_none());
        let drift = traj
            .snapshots
            .iter()
            .map(|snap| (lattice_energy(snap, &p) - e0).abs() / e0.abs())
            .fold(0.0_f64, f64::max);
        assert!(drift < 1e-6, "nonlinear chain energy drift {drift:.3e}");
    }

    #[test]
    fn blow_up_reports_the_step() {
        // negative bond constant with a large pluck runs away
        let mut y = vec![0.0; 16];
        y[8] = 1.0;
        let s = LatticeState::at_rest(y).unwrap();
        let p = free(-50.0, 0.0, -50.0, 0.0, 1.0);
        let traj = lattice_evolve(&s, &p, 0.5, 5_000, 100).unwrap();
        let info = traj.blow_up.expect("runaway chain must flag blow-up");
        assert!(info.step >= 1);
    }

    #[test]
    fn continuum_map_reproduces_integrable_ratios() {
        let p = ModelParams::integrable(1.0, 1.0);
        let map = ContinuumMap::new(&p, 0.25, LatticeBoundary::FreeEnds).unwrap();
        let lp = map.params;
        assert_abs_diff_eq!(lp.beta, lp.k / 24.0, epsilon = 1e-12);
        assert_eq!(lp.alpha, 0.0);
        assert_eq!(lp.f0, 1.0);
        assert_eq!(lp.a, TAU);
        assert_abs_diff_eq!(map.c0, 0.25 * lp.k.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn sampled_kink_travels_at_the_mapped_velocity() {
        // kink-sampled chain: track the π-crossing over a short run and
        // compare against c₀ + c/(2c₀)
        let kp = KinkParams::new(0.5, 1, 0.0, 1.0, 1.0);
        let p = ModelParams::integrable(1.0, 1.0);
        let h = 0.2;
        let n = 301;
        let x_min = -30.0;
        let map = ContinuumMap::new(
            &p,
            h,
            LatticeBoundary::FixedEnds { left: 0.0, right: TAU },
        )
        .unwrap();
        let s = map
            .sample(
                x_min,
                n,
                |x| kink(x, 0.0, &kp),
                |x| kp.sign as f64 * 4.0 * kp.mu / kp.theta(x, 0.0).cosh(),
                |x| kink_ut(x, 0.0, &kp),
            )
            .unwrap();
        // k = 12γ/h⁴ = 15000 ⇒ c₀ ≈ 24.5: the kink crosses ~12 units in
        // t = 0.5, safely inside the 60-unit chain
        let v_lab = map.lab_velocity(kp.velocity());
        let dt = 1e-3;
        let n_steps = 500;
        let t_end = dt * n_steps as f64;
        let traj = lattice_evolve(&s, &map.params, dt, n_steps, n_steps).unwrap();
        assert!(traj.blow_up.is_none());
        let cross = |state: &LatticeState| -> f64 {
            let pi = std::f64::consts::PI;
            for i in 0..state.y.len() - 1 {
                if state.y[i] < pi && state.y[i + 1] >= pi {
                    let frac = (pi - state.y[i]) / (state.y[i + 1] - state.y[i]);
                    return x_min + h * (i as f64 + frac);
                }
            }
            f64::NAN
        };
        let x0 = cross(&traj.snapshots[0]);
        let x1 = cross(traj.snapshots.last().unwrap());
        let measured = (x1 - x0) / t_end;
        let rel = (measured - v_lab).abs() / v_lab.abs();
        assert!(
            rel < 0.05,
            "chain kink speed {measured:.4} vs mapped {v_lab:.4} ({:.1}% off)",
            rel * 100.0
        );
    }
}
