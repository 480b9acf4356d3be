//! Zero trajectories `ż_j = (1/N) Σ_{k≠j} 1/(z_j - z_k)` between collisions.

use std::fmt::Write as _;

use num_complex::Complex64;
use pathfinding::prelude::{kuhn_munkres_min, Matrix};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::polyheat::{default_precision, expand_power, heat_evolve, HeatTime, PolyError, PolySpec};
use crate::roots::{find_all_roots, RootError};

type C = Complex64;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("particles {i} and {j} collide near t = {t:.6e} (gap {gap:.3e})")]
    Collision { i: usize, j: usize, t: f64, gap: f64 },
    #[error("step size underflow at t = {0:.6e}")]
    StepUnderflow(f64),
    #[error("step budget exhausted at t = {0:.6e}")]
    MaxSteps(f64),
    #[error("invalid time interval [{0}, {1}]")]
    Interval(f64, f64),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Roots(#[from] RootError),
}

/// Closest pair `(i, j, gap)`.
pub fn min_gap(pos: &[C]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            let g = (pos[i] - pos[j]).norm();
            if g < best.2 {
                best = (i, j, g);
            }
        }
    }
    best
}

/// Velocities for total degree `n_total`; errors when two particles are
/// closer than `guard`.
pub fn ode_rhs(pos: &[C], n_total: usize, guard: f64) -> Result<Vec<C>, (usize, usize, f64)> {
    let (i, j, g) = min_gap(pos);
    if pos.len() > 1 && g < guard {
        return Err((i, j, g));
    }
    let scale = 1.0 / n_total as f64;
    let v = |j: usize| -> C { pos.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, z)| 1.0 / (pos[j] - z)).sum::<C>() * scale };
    Ok(if pos.len() > 256 { (0..pos.len()).into_par_iter().map(v).collect() } else { (0..pos.len()).map(v).collect() })
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryBundle {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<C>>,
    pub min_gaps: Vec<f64>,
    pub guard: f64,
    /// Steps rejected by the error test or the collision guard.
    pub rejected: usize,
}

impl TrajectoryBundle {
    pub fn endpoint(&self) -> &[C] {
        self.positions.last().expect("non-empty bundle")
    }

    /// Rows `t,j,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,j,re,im\n");
        for (t, ps) in self.times.iter().zip(&self.positions) {
            for (j, z) in ps.iter().enumerate() {
                let _ = writeln!(out, "{t:.17e},{j},{:.17e},{:.17e}", z.re, z.im);
            }
        }
        out
    }

    /// Largest deviation of `Σz_j/N` from its initial value.
    pub fn center_of_mass_drift(&self) -> f64 {
        let com = |p: &[C]| p.iter().sum::<C>() / p.len() as f64;
        let c0 = com(&self.positions[0]);
        self.positions.iter().map(|p| (com(p) - c0).norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Collision guard relative to the initial minimum gap.
    pub guard_factor: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { rtol: 1e-11, atol: 1e-13, guard_factor: 1e-4, max_steps: 1_000_000 }
    }
}

/// `10⁻³·δ²`, or `10⁻³` when there is a single zero.
pub fn default_t0(spec: &PolySpec) -> f64 {
    if spec.d() == 1 {
        1e-3
    } else {
        1e-3 * spec.delta().powi(2)
    }
}

/// Roots of `P_{t0}^n`.
pub fn initial_positions(spec: &PolySpec, t0: f64) -> Result<Vec<C>, DynamicsError> {
    let prec = default_precision(spec.degree());
    let p = heat_evolve(&expand_power(spec, prec)?, HeatTime::real(t0), spec.degree())?;
    Ok(find_all_roots(&p, 1e-30)?.points)
}

/// Integrate from the roots at `t0` to `t_end`.
pub fn integrate(spec: &PolySpec, t0: f64, t_end: f64, opts: &IntegrateOptions) -> Result<TrajectoryBundle, DynamicsError> {
    let pos = initial_positions(spec, t0)?;
    integrate_from(pos, spec.degree() as usize, t0, t_end, opts)
}

// Dormand–Prince 5(4) tableau
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Adaptive Dormand–Prince integration; a step whose stages come closer than
/// the guard is rejected and retried with half the step.
pub fn integrate_from(pos: Vec<C>, n_total: usize, t0: f64, t_end: f64, opts: &IntegrateOptions) -> Result<TrajectoryBundle, DynamicsError> {
    if !(t_end >= t0) {
        return Err(DynamicsError::Interval(t0, t_end));
    }
    let guard = opts.guard_factor * min_gap(&pos).2;
    let mut bundle = TrajectoryBundle { times: vec![t0], min_gaps: vec![min_gap(&pos).2], positions: vec![pos.clone()], guard, rejected: 0 };
    if t_end == t0 {
        return Ok(bundle);
    }
    let mut y = pos;
    let mut t = t0;
    let collision = |t: f64, (i, j, gap): (usize, usize, f64)| DynamicsError::Collision { i, j, t, gap };
    let mut k1 = ode_rhs(&y, n_total, guard).map_err(|e| collision(t, e))?;
    let mut h = 0.01 * min_gap(&y).2.powi(2) * n_total as f64;
    h = h.clamp(1e-14 * (t_end - t0).max(1.0), t_end - t0);
    let mut steps = 0;
    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(DynamicsError::MaxSteps(t));
        }
        if h < 1e-15 * t.abs().max(1e-300) {
            return Err(match ode_rhs(&y, n_total, guard) {
                Err(e) => collision(t, e),
                Ok(_) => DynamicsError::StepUnderflow(t),
            });
        }
        let h_try = h.min(t_end - t);
        let mut ks = vec![k1.clone()];
        let mut blocked = None;
        for (s, row) in A.iter().enumerate() {
            let stage: Vec<C> = (0..y.len()).map(|q| y[q] + h_try * (0..=s).map(|r| row[r] * ks[r][q]).sum::<C>()).collect();
            match ode_rhs(&stage, n_total, guard) {
                Ok(k) => ks.push(k),
                Err(e) => {
                    blocked = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = blocked {
            bundle.rejected += 1;
            h = 0.5 * h_try;
            if h < 1e-15 * t.abs().max(1e-300) {
                return Err(collision(t, e));
            }
            continue;
        }
        // ks[6] is evaluated at the 5th-order solution (first-same-as-last)
        let y5: Vec<C> = (0..y.len()).map(|q| y[q] + h_try * (0..7).map(|r| B5[r] * ks[r][q]).sum::<C>()).collect();
        let err = (0..y.len())
            .map(|q| {
                let e = h_try * (0..7).map(|r| (B5[r] - B4[r]) * ks[r][q]).sum::<C>();
                e.norm() / (opts.atol + opts.rtol * y[q].norm().max(y5[q].norm()))
            })
            .fold(0.0, f64::max);
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            t = if h_try == t_end - t { t_end } else { t + h_try };
            y = y5;
            k1 = ks.pop().expect("seven stages");
            bundle.times.push(t);
            bundle.min_gaps.push(min_gap(&y).2);
            bundle.positions.push(y.clone());
            h = h_try * factor;
        } else {
            bundle.rejected += 1;
            h = h_try * factor.min(1.0);
        }
    }
    Ok(bundle)
}

/// Optimal assignment `a[k] ↔ b[perm[k]]` minimising the summed distance,
/// with the largest matched distance.
pub fn match_points(a: &[C], b: &[C]) -> (Vec<usize>, f64) {
    assert_eq!(a.len(), b.len(), "equal point counts");
    if a.is_empty() {
        return (Vec::new(), 0.0);
    }
    // integer weights at 1e-12 resolution
    let w = Matrix::from_fn(a.len(), b.len(), |(i, j)| ((a[i] - b[j]).norm() * 1e12).round() as i64);
    let (_, perm) = kuhn_munkres_min(&w);
    let worst = perm.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm()).fold(0.0, f64::max);
    (perm, worst)
}

/// ODE endpoint against the roots of `P_{t_end}^n`.
#[derive(Clone, Debug, Serialize)]
pub struct EndpointCheck {
    pub max_distance: f64,
    pub center_of_mass_drift: f64,
    pub rejected: usize,
    pub steps: usize,
}

pub fn endpoint_check(spec: &PolySpec, t0: f64, t_end: f64, opts: &IntegrateOptions) -> Result<EndpointCheck, DynamicsError> {
    let bundle = integrate(spec, t0, t_end, opts)?;
    let exact = initial_positions(spec, t_end)?;
    let (_, max_distance) = match_points(bundle.endpoint(), &exact);
    Ok(EndpointCheck { max_distance, center_of_mass_drift: bundle.center_of_mass_drift(), rejected: bundle.rejected, steps: bundle.times.len() - 1 })
}
