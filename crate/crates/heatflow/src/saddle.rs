//! Saddle points of `g(z,u) = (1/α)Σα_j log(u-λ_j) + (z-u)²/(2t)`, their
//! heights, the branch locus and analytic continuation of single sheets.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::polyheat::PolySpec;
use crate::roots::roots_f64;

type C = Complex64;

/// Branch-point tolerance `10³·√u` for double precision.
pub const BRANCH_TOL: f64 = 1e3 * 1.490_116_119_384_765_6e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SaddleError {
    #[error("sheet ambiguity at z = {z}: nearest saddle {nearest:.3e} away, second-nearest gap {gap:.3e}")]
    SheetAmbiguity { z: C, nearest: f64, gap: f64 },
    #[error("branch locus needs t != 0")]
    ZeroTime,
    #[error("branch locus has {found} points, more than 2d = {bound}")]
    TooManyBranchPoints { found: usize, bound: usize },
}

/// Ascending coefficients of a polynomial with the given roots.
pub fn poly_from_roots(roots: &[C]) -> Vec<C> {
    let mut p = vec![C::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![C::new(0.0, 0.0); p.len() + 1];
        for (k, c) in p.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * r;
        }
        p = next;
    }
    p
}

pub fn poly_eval(c: &[C], x: C) -> C {
    c.iter().rev().fold(C::new(0.0, 0.0), |acc, a| acc * x + a)
}

pub fn poly_derivative(c: &[C]) -> Vec<C> {
    if c.len() <= 1 {
        return vec![C::new(0.0, 0.0)];
    }
    c.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect()
}

/// `Σ_j α_j ∏_{k≠j}(u-λ_k)`, ascending.
fn weighted_partials(spec: &PolySpec) -> Vec<C> {
    let lam = spec.lambdas();
    let mut s = vec![C::new(0.0, 0.0); lam.len()];
    for (j, &a) in spec.alphas().iter().enumerate() {
        let others: Vec<C> = lam.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, l)| *l).collect();
        for (k, c) in poly_from_roots(&others).iter().enumerate() {
            s[k] += c * a as f64;
        }
    }
    s
}

/// Ascending coefficients of
/// `Q_{z,t}(u) = (u-z)∏(u-λ_j) + (t/α)Σ_j α_j∏_{k≠j}(u-λ_k)`, monic of degree `d+1`.
pub fn q_coeffs(spec: &PolySpec, z: C, t: C) -> Vec<C> {
    let pi = poly_from_roots(spec.lambdas());
    let s = weighted_partials(spec);
    let scale = t / spec.alpha() as f64;
    let mut q = vec![C::new(0.0, 0.0); pi.len() + 1];
    for (k, c) in pi.iter().enumerate() {
        q[k + 1] += c;
        q[k] -= z * c;
    }
    for (k, c) in s.iter().enumerate() {
        q[k] += scale * c;
    }
    q
}

/// `G(z,u) = (1/α)Σα_j log|u-λ_j| + Re((z-u)²/(2t))`, `-inf` at a zero `λ_j`.
///
/// For complex `t` this equals the value in the frame rotated by `e^{-iθ/2}`.
pub fn height_g(spec: &PolySpec, z: C, t: C, u: C) -> f64 {
    let alpha = spec.alpha() as f64;
    let mut s = 0.0;
    for (l, &a) in spec.lambdas().iter().zip(spec.alphas()) {
        let d = (u - l).norm();
        if d == 0.0 {
            return f64::NEG_INFINITY;
        }
        s += a as f64 * d.ln();
    }
    s / alpha + ((z - u) * (z - u) / (2.0 * t)).re
}

/// `∂²_u g(z,u) = -(1/α)Σα_j/(u-λ_j)² + 1/t`.
pub fn g_second(spec: &PolySpec, t: C, u: C) -> C {
    let alpha = spec.alpha() as f64;
    let s: C = spec.lambdas().iter().zip(spec.alphas()).map(|(l, &a)| a as f64 / ((u - l) * (u - l))).sum();
    -s / alpha + 1.0 / t
}

/// Saddle-equation residual `u + (t/α)Σα_j/(u-λ_j) - z`.
fn saddle_eq(spec: &PolySpec, z: C, t: C, u: C) -> (C, C) {
    let alpha = spec.alpha() as f64;
    let mut s = C::new(0.0, 0.0);
    let mut ds = C::new(0.0, 0.0);
    for (l, &a) in spec.lambdas().iter().zip(spec.alphas()) {
        let r = 1.0 / (u - l);
        s += a as f64 * r;
        ds -= a as f64 * r * r;
    }
    (u + t / alpha * s - z, 1.0 + t / alpha * ds)
}

/// The `d+1` saddles at one `(z,t)` with heights.
#[derive(Clone, Debug, Serialize)]
pub struct SaddleFan {
    pub z: C,
    pub t: C,
    pub saddles: Vec<C>,
    pub heights: Vec<f64>,
    /// `ln|Q_{z,t}(u_j)|`.
    pub log_residuals: Vec<f64>,
    /// Two saddles closer than the branch-point tolerance.
    pub degenerate: bool,
    pub min_gap: f64,
}

impl SaddleFan {
    pub fn len(&self) -> usize {
        self.saddles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.saddles.is_empty()
    }
}

/// Length scale `1 + |z| + max|λ| + √|t|` used for relative tolerances.
pub fn scale(spec: &PolySpec, z: C, t: C) -> f64 {
    1.0 + z.norm() + spec.lambda_max() + t.norm().sqrt()
}

/// Roots of `Q_{z,t}` polished on the rational form of the saddle equation.
pub fn solve_saddles(spec: &PolySpec, z: C, t: C) -> SaddleFan {
    let q = q_coeffs(spec, z, t);
    let mut saddles = roots_f64(&q);
    let raw = saddles.clone();
    for (i, u) in saddles.iter_mut().enumerate() {
        let sep = raw
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| (v - raw[i]).norm())
            .fold(f64::INFINITY, f64::min);
        for _ in 0..3 {
            let (f, df) = saddle_eq(spec, z, t, *u);
            if df.norm() == 0.0 || !f.re.is_finite() || !f.im.is_finite() {
                break;
            }
            let step = f / df;
            let next = *u - step;
            if step.norm() < 0.1 * sep && poly_eval(&q, next).norm() <= poly_eval(&q, *u).norm() {
                *u = next;
            } else {
                break;
            }
        }
    }
    let heights = saddles.iter().map(|&u| height_g(spec, z, t, u)).collect();
    let log_residuals = saddles.iter().map(|&u| poly_eval(&q, u).norm().ln()).collect();
    let mut min_gap = f64::INFINITY;
    for i in 0..saddles.len() {
        for j in i + 1..saddles.len() {
            min_gap = min_gap.min((saddles[i] - saddles[j]).norm());
        }
    }
    SaddleFan {
        z,
        t,
        degenerate: min_gap < BRANCH_TOL * scale(spec, z, t),
        saddles,
        heights,
        log_residuals,
        min_gap,
    }
}

/// Permutation `perm` with `next[perm[i]]` the continuation of `prev[i]`,
/// minimising the total displacement.
pub fn match_sheets(prev: &[C], next: &[C]) -> Vec<usize> {
    let n = prev.len();
    if n <= 6 {
        let mut best = (f64::INFINITY, (0..n).collect::<Vec<_>>());
        let mut perm: Vec<usize> = (0..n).collect();
        permute(&mut perm, 0, &mut |p| {
            let cost: f64 = p.iter().enumerate().map(|(i, &j)| (prev[i] - next[j]).norm()).sum();
            if cost < best.0 {
                best = (cost, p.to_vec());
            }
        });
        return best.1;
    }
    let mut used = vec![false; n];
    prev.iter()
        .map(|p| {
            let j = (0..n)
                .filter(|&j| !used[j])
                .min_by(|&a, &b| (next[a] - p).norm().total_cmp(&(next[b] - p).norm()))
                .expect("sizes agree");
            used[j] = true;
            j
        })
        .collect()
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Point of `B` where `order` saddles coalesce.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BranchPoint {
    pub z: C,
    pub order: usize,
    pub coalesced_u: C,
}

/// Output of [`branch_locus`].
#[derive(Clone, Debug, Serialize)]
pub struct BranchLocus {
    pub points: Vec<BranchPoint>,
    /// Ascending coefficients of `R(z) = res_u(Q, ∂_uQ)` after trimming.
    pub resultant: Vec<C>,
    /// Relative disagreement of the interpolant at the check node.
    pub consistency: f64,
    pub unstable: bool,
}

impl BranchLocus {
    /// JSON `[{"z":[re,im],"order":r,"u":[re,im]},...]`.
    pub fn to_json(&self) -> String {
        let v: Vec<serde_json::Value> = self
            .points
            .iter()
            .map(|b| {
                serde_json::json!({
                    "z": [b.z.re, b.z.im],
                    "order": b.order,
                    "u": [b.coalesced_u.re, b.coalesced_u.im],
                })
            })
            .collect();
        serde_json::to_string(&v).expect("json")
    }
}

/// Determinant of the Sylvester matrix of two ascending coefficient vectors.
pub fn sylvester_resultant(p: &[C], q: &[C]) -> C {
    let (m, n) = (p.len() - 1, q.len() - 1);
    let size = m + n;
    let mut s = DMatrix::<C>::zeros(size, size);
    for r in 0..n {
        for (k, c) in p.iter().rev().enumerate() {
            s[(r, r + k)] = *c;
        }
    }
    for r in 0..m {
        for (k, c) in q.iter().rev().enumerate() {
            s[(n + r, r + k)] = *c;
        }
    }
    s.lu().determinant()
}

fn discriminant_at(spec: &PolySpec, z: C, t: C) -> C {
    let q = q_coeffs(spec, z, t);
    sylvester_resultant(&q, &poly_derivative(&q))
}

/// `k`-th `u`-derivatives of `Q_{z,t}` at `u`, `k = 0..count`.
pub fn q_derivatives(spec: &PolySpec, z: C, t: C, u: C, count: usize) -> Vec<C> {
    let mut c = q_coeffs(spec, z, t);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(poly_eval(&c, u));
        c = poly_derivative(&c);
    }
    out
}

/// `∂_z` of the `u`-derivatives of `Q`: `Q = (u-z)Π + ...` so `∂_z Q^{(k)} = -Π^{(k)}`.
fn qz_derivatives(spec: &PolySpec, u: C, count: usize) -> Vec<C> {
    let mut c = poly_from_roots(spec.lambdas());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(-poly_eval(&c, u));
        c = poly_derivative(&c);
    }
    out
}

/// Gauss–Newton on `Q^{(k)}(z,u) = 0`, `k < order`.
fn refine_branch_point(spec: &PolySpec, t: C, mut z: C, mut u: C, order: usize) -> (C, C, f64) {
    let sc = scale(spec, z, t);
    let mut res = f64::INFINITY;
    for _ in 0..50 {
        let f = q_derivatives(spec, z, t, u, order + 1);
        let fz = qz_derivatives(spec, u, order);
        let r: Vec<C> = f[..order].to_vec();
        res = r.iter().map(|x| x.norm()).fold(0.0, f64::max);
        // columns: d/dz, d/du ; row k: (fz[k], f[k+1])
        let (mut a11, mut a12, mut a22) = (0.0, C::new(0.0, 0.0), 0.0);
        let (mut b1, mut b2) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
        for k in 0..order {
            let (jz, ju) = (fz[k], f[k + 1]);
            a11 += jz.norm_sqr();
            a12 += jz.conj() * ju;
            a22 += ju.norm_sqr();
            b1 += jz.conj() * r[k];
            b2 += ju.conj() * r[k];
        }
        let detm = a11 * a22 - a12.norm_sqr();
        if detm.abs() < 1e-300 {
            break;
        }
        let dz = (a22 * b1 - a12 * b2) / detm;
        let du = (a11 * b2 - a12.conj() * b1) / detm;
        z -= dz;
        u -= du;
        if dz.norm() + du.norm() < 1e-15 * sc {
            break;
        }
    }
    let f = q_derivatives(spec, z, t, u, order);
    res = res.min(f.iter().map(|x| x.norm()).fold(0.0, f64::max));
    (z, u, res)
}

/// Zeros of the discriminant `R(z) = res_u(Q_{z,t}, ∂_uQ_{z,t})`, interpolated
/// from `2d+1` values on a circle with one extra node as a consistency check.
pub fn branch_locus(spec: &PolySpec, t: C) -> Result<BranchLocus, SaddleError> {
    if t.norm() == 0.0 {
        return Err(SaddleError::ZeroTime);
    }
    let d = spec.d();
    let m = 2 * d + 1;
    let rho = 2.0 * (1.0 + spec.lambda_max() + t.norm().sqrt());
    let w = |k: f64| C::from_polar(1.0, 2.0 * std::f64::consts::PI * k / m as f64);
    let vals: Vec<C> = (0..m).map(|k| discriminant_at(spec, w(k as f64) * rho, t)).collect();
    let mut coeffs: Vec<C> = (0..m)
        .map(|j| {
            let s: C = vals.iter().enumerate().map(|(k, v)| v * w(-((j * k) as f64))).sum();
            s / m as f64 / rho.powi(j as i32)
        })
        .collect();
    let extra_z = w(0.5) * rho * 1.07;
    let extra = discriminant_at(spec, extra_z, t);
    let vmax = vals.iter().map(|v| v.norm()).fold(0.0, f64::max).max(extra.norm());
    let consistency = (poly_eval(&coeffs, extra_z) - extra).norm() / vmax;
    let unstable = consistency > 1e-8;
    let top = coeffs.iter().enumerate().map(|(j, c)| c.norm() * rho.powi(j as i32)).fold(0.0, f64::max);
    while coeffs.len() > 1 && coeffs.last().map(|c| c.norm() * rho.powi(coeffs.len() as i32 - 1)).unwrap_or(0.0) < 1e-11 * top {
        coeffs.pop();
    }
    let raw = roots_f64(&coeffs);

    // merge coincident discriminant zeros; multiplicity k means k+1 coalescing saddles
    let sc = 1.0 + spec.lambda_max() + t.norm().sqrt();
    let mut groups: Vec<Vec<C>> = Vec::new();
    for r in raw {
        match groups.iter_mut().find(|g| (g[0] - r).norm() < 1e-4 * sc) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    let mut points = Vec::new();
    for g in groups {
        let z0 = g.iter().sum::<C>() / g.len() as f64;
        let fan = solve_saddles(spec, z0, t);
        let order = g.len() + 1;
        // start from the tightest group of `order` saddles
        let u0 = tightest_group(&fan.saddles, order);
        let (z1, u1, res) = refine_branch_point(spec, t, z0, u0, order);
        let ok = res < 1e-8 * sc.powi(d as i32 + 1);
        if ok || g.len() == 1 {
            points.push(BranchPoint { z: z1, order, coalesced_u: u1 });
        } else {
            for r in g {
                let fan = solve_saddles(spec, r, t);
                let u0 = tightest_group(&fan.saddles, 2);
                let (z1, u1, _) = refine_branch_point(spec, t, r, u0, 2);
                points.push(BranchPoint { z: z1, order: 2, coalesced_u: u1 });
            }
        }
    }
    points.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
    let distinct = points.len();
    if distinct > 2 * d {
        return Err(SaddleError::TooManyBranchPoints { found: distinct, bound: 2 * d });
    }
    Ok(BranchLocus { points, resultant: coeffs, consistency, unstable })
}

/// Centroid of the `k` saddles with the smallest diameter.
fn tightest_group(u: &[C], k: usize) -> C {
    let n = u.len();
    let k = k.min(n);
    let mut best = (f64::INFINITY, C::new(0.0, 0.0));
    for i in 0..n {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| (u[a] - u[i]).norm().total_cmp(&(u[b] - u[i]).norm()));
        let pick = &idx[..k];
        let diam = pick.iter().map(|&a| (u[a] - u[i]).norm()).fold(0.0, f64::max);
        if diam < best.0 {
            best = (diam, pick.iter().map(|&a| u[a]).sum::<C>() / k as f64);
        }
    }
    best.1
}

/// Zeros `λ'_k` of `Σ_j α_j∏_{k≠j}(u-λ_k)`, the critical points of
/// `(1/α)Σα_j log(u-λ_j)`.
pub fn critical_points(spec: &PolySpec) -> Vec<C> {
    roots_f64(&weighted_partials(spec))
}

/// One saddle sheet followed along a polyline of `z` samples.
#[derive(Clone, Debug, Serialize)]
pub struct BranchTrack {
    pub t: C,
    pub path: Vec<C>,
    pub history: Vec<C>,
    /// Index of the followed saddle in the fan at the first sample.
    pub sheet: usize,
}

impl BranchTrack {
    pub fn new(spec: &PolySpec, z0: C, t: C, sheet: usize) -> Self {
        let fan = solve_saddles(spec, z0, t);
        Self { t, path: vec![z0], history: vec![fan.saddles[sheet]], sheet }
    }

    /// Start from a known saddle value.
    pub fn from_saddle(z0: C, t: C, u0: C) -> Self {
        Self { t, path: vec![z0], history: vec![u0], sheet: 0 }
    }

    pub fn current(&self) -> (C, C) {
        (*self.path.last().expect("nonempty"), *self.history.last().expect("nonempty"))
    }
}

/// Nearest-root step of a [`BranchTrack`] to `next_z`; refuses when the
/// nearest root is not clearly separated from the second nearest.
pub fn continue_branch(spec: &PolySpec, track: &mut BranchTrack, next_z: C) -> Result<C, SaddleError> {
    let (_, u_prev) = track.current();
    let fan = solve_saddles(spec, next_z, track.t);
    let u = pick_nearest(&fan.saddles, u_prev, next_z)?;
    track.path.push(next_z);
    track.history.push(u);
    Ok(u)
}

/// Nearest saddle to `u_prev`, accepted only when its distance is below half
/// the gap to the second nearest.
pub fn pick_nearest(saddles: &[C], u_prev: C, z: C) -> Result<C, SaddleError> {
    let mut d: Vec<(f64, C)> = saddles.iter().map(|&u| ((u - u_prev).norm(), u)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    if d.len() >= 2 {
        let gap = (d[1].1 - d[0].1).norm();
        if d[0].0 > 0.5 * gap {
            return Err(SaddleError::SheetAmbiguity { z, nearest: d[0].0, gap });
        }
    }
    Ok(d[0].1)
}

/// Walk from the current end of `track` to `target` with automatic
/// subdivision, `max_step` the largest straight step.
pub fn continue_to(spec: &PolySpec, track: &mut BranchTrack, target: C, max_step: f64) -> Result<C, SaddleError> {
    let (mut z, _) = track.current();
    let mut depth = 0;
    while (target - z).norm() > 0.0 {
        let remaining = target - z;
        let len = remaining.norm();
        let step_len = max_step.min(len) / 2f64.powi(depth);
        let next = if step_len >= len { target } else { z + remaining / len * step_len };
        let mut trial = track.clone();
        match continue_branch(spec, &mut trial, next) {
            Ok(_) => {
                *track = trial;
                z = next;
                depth = depth.saturating_sub(1);
            }
            Err(e) => {
                depth += 1;
                if depth > 30 {
                    return Err(e);
                }
            }
        }
    }
    Ok(track.current().1)
}
