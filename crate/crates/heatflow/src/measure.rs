//! Limit objects: Stieltjes transform, logarithmic potential, support arcs
//! with their densities, and semicircle reference functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::polyheat::PolySpec;
use crate::relevance::{relevance_field, select_max_relevant, FieldOptions, GridOptions, Region, RelevanceError};
use crate::saddle::{branch_locus, height_g, match_sheets, solve_saddles, BranchPoint, SaddleError};

type C = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    Relevance(#[from] RelevanceError),
    #[error(transparent)]
    Saddle(#[from] SaddleError),
    #[error("z = {0} lies on the branch cut of the Joukowsky map")]
    BranchCut(C),
    #[error("branch point of order {0} is not simple")]
    NotSimple(usize),
    #[error("no saddles coalesce at {z} (closest pair {gap:.3e} apart)")]
    NotBranchPoint { z: C, gap: f64 },
    #[error("regime error: {0}")]
    Regime(String),
}

/// `m_t(z)` with the self-consistency residual.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StieltjesValue {
    pub m: C,
    pub residual: f64,
    pub saddle: C,
}

/// `|m - (1/α)Σα_j/(z - tm - λ_j)|`.
pub fn self_consistency_residual(spec: &PolySpec, z: C, t: C, m: C) -> f64 {
    let w = z - t * m;
    let s: C = spec.lambdas().iter().zip(spec.alphas()).map(|(l, &a)| a as f64 / (w - l)).sum();
    (m - s / spec.alpha() as f64).norm()
}

pub fn stieltjes(spec: &PolySpec, z: C, t: C, opts: &GridOptions) -> Result<StieltjesValue, MeasureError> {
    let cert = select_max_relevant(spec, z, t, opts)?;
    let m = (z - cert.saddle) / t;
    Ok(StieltjesValue { m, residual: self_consistency_residual(spec, z, t, m), saddle: cert.saddle })
}

pub fn log_potential(spec: &PolySpec, z: C, t: C, opts: &GridOptions) -> Result<f64, MeasureError> {
    let cert = select_max_relevant(spec, z, t, opts)?;
    Ok(cert.heights[cert.chosen])
}

/// `i·√(-w)`: the square root with values in the closed upper half plane,
/// cut along `[0, ∞)`.
pub fn sqrt_upper(w: C) -> C {
    C::new(0.0, 1.0) * (-w).sqrt()
}

/// `√(ζ² - c)` continued off the rays `|Re ζ| ≥ √c`, `Im ζ = 0`, using the
/// limit from the upper half plane on the rays themselves.
fn root_off_rays(zeta: C, c: f64) -> C {
    if zeta.im == 0.0 && zeta.re * zeta.re > c {
        return C::new(zeta.re.signum() * (zeta.re * zeta.re - c).sqrt(), 0.0);
    }
    sqrt_upper(zeta * zeta - c)
}

/// `u_t^±(z) = (z ± √(z²-4t))/2` with `u⁺ ~ z` in the upper and `u⁻ ~ z` in
/// the lower half plane.
pub fn joukowski_pm(z: C, t: f64) -> Result<(C, C), MeasureError> {
    if z.im == 0.0 && z.re.abs() >= 2.0 * t.sqrt() {
        return Err(MeasureError::BranchCut(z));
    }
    let s = sqrt_upper(z * z - 4.0 * t);
    Ok(((z + s) / 2.0, (z - s) / 2.0))
}

/// Closed-form `m_t(z)` for a single zero `a`, real `t > 0`.
pub fn d1_stieltjes(a: C, z: C, t: f64) -> C {
    let zeta = z - a;
    let s = root_off_rays(zeta, 4.0 * t);
    if zeta.im >= 0.0 {
        (zeta - s) / (2.0 * t)
    } else {
        (zeta + s) / (2.0 * t)
    }
}

/// Closed-form `U_t(z) = log|u* - a| + Re(t m²)/2` for a single zero.
pub fn d1_potential(a: C, z: C, t: f64) -> f64 {
    let m = d1_stieltjes(a, z, t);
    let u = z - t * m;
    (u - a).norm().ln() + (t * m * m).re / 2.0
}

/// Semicircle density of variance `t`.
pub fn sc_density(x: f64, t: f64) -> f64 {
    let v = 4.0 * t - x * x;
    if v <= 0.0 {
        0.0
    } else {
        v.sqrt() / (2.0 * PI * t)
    }
}

/// Distribution function of `sc₁`.
pub fn sc1_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
    }
}

/// Logarithmic potential of `sc₁`.
pub fn psi(z: C) -> f64 {
    let z = if z.im < 0.0 { z.conj() } else { z };
    let s = root_off_rays(z, 4.0);
    ((z + s) / 2.0).norm().ln() + (z * z - z * s).re / 4.0 - 0.5
}

/// Height difference of the two saddles for `d = 1`, `a = 0`, `t = 1`.
pub fn h_fn(z: C) -> f64 {
    let s = root_off_rays(z, 4.0);
    2.0 * ((z + s) / 2.0).norm().ln() - (z * s).re / 2.0
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SemicircleRefs {
    pub density: f64,
    pub psi: f64,
    pub h: f64,
}

/// `sc_t` density at `Re z̃` (zero off the real line), `Ψ(z̃)` and `H(z̃)`.
pub fn semicircle_refs(z: C, t: f64) -> SemicircleRefs {
    let density = if z.im == 0.0 { sc_density(z.re, t) } else { 0.0 };
    SemicircleRefs { density, psi: psi(z), h: h_fn(z) }
}

/// Kolmogorov–Smirnov distance of a sample to `sc₁`.
pub fn ks_to_semicircle(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = sc1_cdf(x);
            (f - k as f64 / n).abs().max((f - (k + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}


/// Fan at `z` relabelled to follow `prev`; `None` when a sheet is not
/// clearly separated from its neighbours.
fn solve_labeled(spec: &PolySpec, z: C, t: C, prev: &[C]) -> Option<Vec<C>> {
    let fan = solve_saddles(spec, z, t).saddles;
    let perm = match_sheets(prev, &fan);
    for (i, &p) in prev.iter().enumerate() {
        let u = fan[perm[i]];
        let gap = fan.iter().enumerate().filter(|(k, _)| *k != perm[i]).map(|(_, v)| (v - u).norm()).fold(f64::INFINITY, f64::min);
        if (u - p).norm() > 0.5 * gap {
            return None;
        }
    }
    Some(perm.iter().map(|&k| fan[k]).collect())
}

/// One point of a traced arc.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ArcSample {
    pub z: C,
    pub ui: C,
    pub uj: C,
    pub rho: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub enum Endpoint {
    Branch { index: usize, z: C },
    Triple { z: C },
    Boundary { z: C },
    Closed,
    Stall { z: C },
}

impl Endpoint {
    pub fn is_closed(&self) -> bool {
        matches!(self, Endpoint::Branch { .. } | Endpoint::Triple { .. } | Endpoint::Closed)
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Endpoint::Branch { index, z } => serde_json::json!({"kind": "branch", "index": index, "z": [z.re, z.im]}),
            Endpoint::Triple { z } => serde_json::json!({"kind": "triple", "z": [z.re, z.im]}),
            Endpoint::Boundary { z } => serde_json::json!({"kind": "boundary", "z": [z.re, z.im]}),
            Endpoint::Closed => serde_json::json!({"kind": "closed"}),
            Endpoint::Stall { z } => serde_json::json!({"kind": "stall", "z": [z.re, z.im]}),
        }
    }
}

/// Piece of the nodal set `G(z,u_i) = G(z,u_j)`.
#[derive(Clone, Debug, Serialize)]
pub struct SupportArc {
    pub samples: Vec<ArcSample>,
    /// Sheet labels in the fan at the first sample.
    pub pair: (usize, usize),
    pub endpoints: [Endpoint; 2],
    /// Composite trapezoid `∫ρ ds`.
    pub mass: f64,
    pub mass_richardson: f64,
    /// `|ΔIm(g_i - g_j)|/2π` along the arc.
    pub mass_phase: f64,
    /// Side-selection votes `(switching, not switching)`.
    pub votes: (usize, usize),
    pub switching: bool,
}

impl SupportArc {
    pub fn length(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1].z - w[0].z).norm()).sum()
    }

    pub fn is_closed(&self) -> bool {
        self.endpoints.iter().all(Endpoint::is_closed)
    }

    /// Distance from `z` to the sample polyline.
    pub fn distance(&self, z: C) -> f64 {
        if self.samples.len() == 1 {
            return (self.samples[0].z - z).norm();
        }
        self.samples.windows(2).map(|w| segment_distance(z, w[0].z, w[1].z)).fold(f64::INFINITY, f64::min)
    }

    fn nearest_sample(&self, z: C) -> usize {
        (0..self.samples.len())
            .min_by(|&a, &b| (self.samples[a].z - z).norm().total_cmp(&(self.samples[b].z - z).norm()))
            .unwrap_or(0)
    }
}

fn segment_distance(p: C, a: C, b: C) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a) * d.conj()).re / l2;
    (p - (a + d * s.clamp(0.0, 1.0))).norm()
}

/// Composite trapezoid; a segment touching a zero of the density is
/// integrated with the square-root profile `ρ ∝ √s` instead.
fn trapezoid(samples: &[ArcSample], stride: usize) -> f64 {
    let mut idx: Vec<usize> = (0..samples.len()).step_by(stride).collect();
    if *idx.last().unwrap_or(&0) != samples.len() - 1 {
        idx.push(samples.len() - 1);
    }
    idx.windows(2)
        .map(|w| {
            let (a, b) = (samples[w[0]].rho, samples[w[1]].rho);
            let len = (samples[w[1]].z - samples[w[0]].z).norm();
            if a == 0.0 || b == 0.0 {
                2.0 / 3.0 * (a + b) * len
            } else {
                0.5 * (a + b) * len
            }
        })
        .sum()
}

/// Traced support of `μ_t`.
#[derive(Clone, Debug, Serialize)]
pub struct LimitMeasure {
    pub t: C,
    pub arcs: Vec<SupportArc>,
    /// Richardson-extrapolated total.
    pub total_mass: f64,
    pub total_mass_trapezoid: f64,
    pub total_mass_phase: f64,
    pub branch_points: Vec<BranchPoint>,
    /// Traced nodal arcs discarded by the switching test.
    pub rejected: usize,
    pub warnings: Vec<String>,
}

impl LimitMeasure {
    pub fn to_json(&self) -> String {
        let arcs: Vec<serde_json::Value> = self
            .arcs
            .iter()
            .map(|a| {
                serde_json::json!({
                    "pair": [a.pair.0, a.pair.1],
                    "samples": a.samples.iter().map(|s| [s.z.re, s.z.im, s.rho]).collect::<Vec<_>>(),
                    "mass": a.mass_richardson,
                    "mass_trapezoid": a.mass,
                    "mass_phase": a.mass_phase,
                    "endpoints": a.endpoints.iter().map(Endpoint::to_json).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "t": [self.t.re, self.t.im],
            "arcs": arcs,
            "total_mass": self.total_mass,
            "total_mass_trapezoid": self.total_mass_trapezoid,
            "total_mass_phase": self.total_mass_phase,
            "branch_points": self.branch_points.iter().map(|b| serde_json::json!({"z": [b.z.re, b.z.im], "order": b.order})).collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
        .to_string()
    }

    /// Distance from `z` to the nearest arc.
    pub fn distance_to_support(&self, z: C) -> f64 {
        self.arcs.iter().map(|a| a.distance(z)).fold(f64::INFINITY, f64::min)
    }

    /// Density at the point of the support nearest `z`, returned with that point.
    pub fn density_at(&self, spec: &PolySpec, z: C) -> Option<(C, f64)> {
        let arc = self.arcs.iter().min_by(|a, b| a.distance(z).total_cmp(&b.distance(z)))?;
        let s = arc.samples[arc.nearest_sample(z)];
        let fan = solve_saddles(spec, z, self.t).saddles;
        let pick = |u: C| fan.iter().copied().min_by(|a, b| (a - u).norm().total_cmp(&(b - u).norm())).expect("fan");
        let (mut ui, mut uj) = (pick(s.ui), pick(s.uj));
        let mut zc = z;
        for _ in 0..20 {
            let h = height_g(spec, zc, self.t, ui) - height_g(spec, zc, self.t, uj);
            let fp = (uj - ui) / self.t;
            let dz = -h * fp.conj() / fp.norm_sqr();
            zc += dz;
            let f = solve_labeled(spec, zc, self.t, &[ui, uj]).or_else(|| {
                let fan = solve_saddles(spec, zc, self.t).saddles;
                let p = |u: C| fan.iter().copied().min_by(|a, b| (a - u).norm().total_cmp(&(b - u).norm())).expect("fan");
                Some(vec![p(ui), p(uj)])
            })?;
            ui = f[0];
            uj = f[1];
            if dz.norm() < 1e-15 * (1.0 + zc.norm()) {
                break;
            }
        }
        Some((zc, (ui - uj).norm() / (2.0 * PI * self.t.norm())))
    }
}

/// Union of disks in which arcs are traced.
#[derive(Clone, Debug, Serialize)]
pub struct TraceRegion {
    pub disks: Vec<(C, f64)>,
}

impl TraceRegion {
    /// `∪_j B(λ_j, 1.1·2√|t| + 0.02)`; contains the support bound.
    pub fn default_for(spec: &PolySpec, t: C) -> Self {
        let r = 2.2 * t.norm().sqrt() + 0.02;
        Self { disks: spec.lambdas().iter().map(|l| (*l, r)).collect() }
    }

    pub fn from_region(r: &Region) -> Self {
        Self { disks: vec![(r.center, r.radius)] }
    }

    pub fn contains(&self, z: C) -> bool {
        self.disks.iter().any(|(c, r)| (z - c).norm() <= *r)
    }

    /// Smallest disk containing every component disk.
    pub fn bounding(&self) -> Region {
        let n = self.disks.len() as f64;
        let c = self.disks.iter().map(|d| d.0).sum::<C>() / n;
        let r = self.disks.iter().map(|(d, r)| (d - c).norm() + r).fold(0.0, f64::max);
        Region::disk(c, r)
    }
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub region: Option<TraceRegion>,
    /// Largest arclength step in units of `√|t|`.
    pub max_step: f64,
    pub grid: GridOptions,
    /// Lattice size of the relevance field used for extra seeds; 0 disables it.
    pub field_cells: usize,
    pub seed: u64,
    pub max_arcs: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { region: None, max_step: 0.02, grid: GridOptions::default(), field_cells: 0, seed: 0, max_arcs: 200 }
    }
}

struct Tracer<'a> {
    spec: &'a PolySpec,
    t: C,
    region: TraceRegion,
    bps: Vec<BranchPoint>,
    scale: f64,
    max_step: f64,
}

/// Starting point on a nodal curve.
#[derive(Clone, Debug)]
struct Seed {
    z: C,
    fan: Vec<C>,
    i: usize,
    j: usize,
    dir: C,
    /// Prepended sample and start endpoint when the arc emanates from a point.
    origin: Option<(C, C, C, Endpoint)>,
}

enum Stop {
    Arc(Vec<ArcSample>, Endpoint, f64),
    Triple(Vec<ArcSample>, C, Vec<C>, f64),
}

impl<'a> Tracer<'a> {
    fn h(&self, z: C, fan: &[C], i: usize, j: usize) -> f64 {
        height_g(self.spec, z, self.t, fan[i]) - height_g(self.spec, z, self.t, fan[j])
    }

    fn rho(&self, ui: C, uj: C) -> f64 {
        (ui - uj).norm() / (2.0 * PI * self.t.norm())
    }

    fn bp_distance(&self, z: C) -> (f64, Option<usize>) {
        self.bps
            .iter()
            .enumerate()
            .map(|(k, b)| ((b.z - z).norm(), Some(k)))
            .fold((f64::INFINITY, None), |a, b| if b.0 < a.0 { b } else { a })
    }

    /// Newton correction onto `h_ij = 0` keeping sheet labels.
    fn correct(&self, mut z: C, prev: &[C], i: usize, j: usize) -> Option<(C, Vec<C>)> {
        let mut fan = solve_labeled(self.spec, z, self.t, prev)?;
        for _ in 0..8 {
            let h = self.h(z, &fan, i, j);
            let fp = (fan[j] - fan[i]) / self.t;
            if fp.norm() == 0.0 {
                return None;
            }
            let dz = -h * fp.conj() / fp.norm_sqr();
            z += dz;
            fan = solve_labeled(self.spec, z, self.t, &fan)?;
            if dz.norm() < 1e-14 * self.scale {
                break;
            }
        }
        let h = self.h(z, &fan, i, j);
        let gi = height_g(self.spec, z, self.t, fan[i]).abs();
        if h.abs() > 1e-10 * (1.0 + gi) {
            return None;
        }
        Some((z, fan))
    }

    fn phase_increment(&self, z0: C, f0: &[C], z1: C, f1: &[C], i: usize, j: usize) -> f64 {
        let alpha = self.spec.alpha() as f64;
        let mut d = 0.0;
        for (sheet, sign) in [(i, 1.0), (j, -1.0)] {
            for (l, &a) in self.spec.lambdas().iter().zip(self.spec.alphas()) {
                let r = (f1[sheet] - l) / (f0[sheet] - l);
                d += sign * a as f64 / alpha * r.arg();
            }
            let q = |z: C, u: C| ((z - u) * (z - u) / (2.0 * self.t)).im;
            d += sign * (q(z1, f1[sheet]) - q(z0, f0[sheet]));
        }
        d
    }

    /// Follow the nodal curve of `(i,j)` from `z` in direction `dir`.
    fn trace(&self, z0: C, fan0: Vec<C>, i: usize, j: usize, dir: C) -> Stop {
        let mut z = z0;
        let mut fan = fan0;
        let mut samples = vec![ArcSample { z, ui: fan[i], uj: fan[j], rho: self.rho(fan[i], fan[j]) }];
        let mut dir = dir / dir.norm();
        let mut phase = 0.0;
        let mut length = 0.0;
        let max_step = self.max_step * self.t.norm().sqrt();
        let min_step = 1e-10 * self.scale;
        let snap = 1e-6 * self.scale;
        let mut step = max_step.min(0.1 * self.bp_distance(z).0).max(min_step);
        let n = fan.len();
        loop {
            if samples.len() > 40_000 || length > 100.0 * self.scale {
                return Stop::Arc(samples, Endpoint::Stall { z }, phase);
            }
            let fp = (fan[j] - fan[i]) / self.t;
            let mut tau = C::new(0.0, 1.0) * fp.conj() / fp.norm();
            if (tau * dir.conj()).re < 0.0 {
                tau = -tau;
            }
            let (dbp, kbp) = self.bp_distance(z);
            let cap = max_step.min(0.1 * dbp).max(min_step);
            step = step.min(cap);
            let trial = z + tau * step;
            let next = self.correct(trial, &fan, i, j);
            let Some((zn, fann)) = next else {
                if step <= min_step {
                    return Stop::Arc(samples, Endpoint::Stall { z }, phase);
                }
                step *= 0.5;
                continue;
            };
            let chord = zn - z;
            if (chord * tau.conj()).re <= 0.0 || (chord.norm() - step).abs() > 0.5 * step {
                if step <= min_step {
                    return Stop::Arc(samples, Endpoint::Stall { z }, phase);
                }
                step *= 0.5;
                continue;
            }
            // a third height crossing the pair marks a triple point
            let hi = |zz: C, f: &[C], k: usize| height_g(self.spec, zz, self.t, f[k]) - height_g(self.spec, zz, self.t, f[i]);
            let crossing = (0..n).filter(|&k| k != i && k != j).find(|&k| hi(z, &fan, k).signum() != hi(zn, &fann, k).signum());
            if let Some(k) = crossing {
                let (mut a, mut b) = ((z, fan.clone()), (zn, fann.clone()));
                for _ in 0..60 {
                    let mid = (a.0 + b.0) / 2.0;
                    let Some((zm, fm)) = self.correct(mid, &a.1, i, j) else { break };
                    if hi(zm, &fm, k).signum() == hi(a.0, &a.1, k).signum() {
                        a = (zm, fm);
                    } else {
                        b = (zm, fm);
                    }
                    if (b.0 - a.0).norm() < 1e-13 * self.scale {
                        break;
                    }
                }
                let (zt, ft) = b;
                phase += self.phase_increment(z, &fan, zt, &ft, i, j);
                samples.push(ArcSample { z: zt, ui: ft[i], uj: ft[j], rho: self.rho(ft[i], ft[j]) });
                return Stop::Triple(samples, zt, ft, phase);
            }
            if !self.region.contains(zn) {
                return Stop::Arc(samples, Endpoint::Boundary { z }, phase);
            }
            phase += self.phase_increment(z, &fan, zn, &fann, i, j);
            length += chord.norm();
            dir = chord / chord.norm();
            z = zn;
            fan = fann;
            samples.push(ArcSample { z, ui: fan[i], uj: fan[j], rho: self.rho(fan[i], fan[j]) });
            // snap onto a branch point where this pair coalesces
            if let Some(kb) = kbp {
                let b = &self.bps[kb];
                let d = (b.z - z).norm();
                if d < snap {
                    let sep = (fan[i] - fan[j]).norm();
                    if sep < 0.05 * self.scale {
                        let mut fb = fan.clone();
                        fb[i] = b.coalesced_u;
                        fb[j] = b.coalesced_u;
                        phase += self.phase_increment(z, &fan, b.z, &fb, i, j);
                        samples.push(ArcSample { z: b.z, ui: b.coalesced_u, uj: b.coalesced_u, rho: 0.0 });
                        return Stop::Arc(samples, Endpoint::Branch { index: kb, z: b.z }, phase);
                    }
                    step = 3.0 * snap;
                    continue;
                }
            }
            if samples.len() > 20 && length > 20.0 * step && (z - z0).norm() < 1.5 * step {
                samples.push(samples[0]);
                return Stop::Arc(samples, Endpoint::Closed, phase);
            }
            step = (step * 1.5).min(max_step);
        }
    }

    /// Nodal crossings of every sheet pair on a small circle around `center`.
    fn circle_seeds(&self, center: C, radius: f64, points: usize) -> Vec<Seed> {
        let at = |k: usize| center + C::from_polar(radius, 2.0 * PI * k as f64 / points as f64);
        let mut fans = Vec::with_capacity(points + 1);
        let mut prev = solve_saddles(self.spec, at(0), self.t).saddles;
        fans.push(prev.clone());
        for k in 1..=points {
            let f = match solve_labeled(self.spec, at(k), self.t, &prev) {
                Some(f) => f,
                None => {
                    let raw = solve_saddles(self.spec, at(k), self.t).saddles;
                    let p = match_sheets(&prev, &raw);
                    p.iter().map(|&q| raw[q]).collect()
                }
            };
            fans.push(f.clone());
            prev = f;
        }
        let n = fans[0].len();
        let mut seeds = Vec::new();
        for k in 0..points {
            let (za, zb) = (at(k), at(k + 1));
            for i in 0..n {
                for j in i + 1..n {
                    let ha = self.h(za, &fans[k], i, j);
                    let hb = self.h(zb, &fans[k + 1], i, j);
                    if ha.signum() == hb.signum() {
                        continue;
                    }
                    // bisect in angle, then correct onto the curve
                    let (mut lo, mut hi) = (k as f64, (k + 1) as f64);
                    let mut flo = fans[k].clone();
                    let mut hlo = ha;
                    for _ in 0..50 {
                        let mid = 0.5 * (lo + hi);
                        let zm = center + C::from_polar(radius, 2.0 * PI * mid / points as f64);
                        let Some(fm) = solve_labeled(self.spec, zm, self.t, &flo) else { break };
                        let hm = self.h(zm, &fm, i, j);
                        if hm.signum() == hlo.signum() {
                            lo = mid;
                            flo = fm;
                            hlo = hm;
                        } else {
                            hi = mid;
                        }
                    }
                    let zs = center + C::from_polar(radius, 2.0 * PI * lo / points as f64);
                    let Some((zc, fc)) = self.correct(zs, &flo, i, j) else { continue };
                    seeds.push(Seed { z: zc, fan: fc, i, j, dir: zc - center, origin: None });
                }
            }
        }
        seeds
    }

    fn bp_seeds(&self, k: usize) -> Vec<Seed> {
        let b = &self.bps[k];
        let others = self.bps.iter().enumerate().filter(|(q, _)| *q != k).map(|(_, o)| (o.z - b.z).norm()).fold(f64::INFINITY, f64::min);
        let r = (1e-3 * self.scale).min(0.1 * others);
        let mut seeds = self.circle_seeds(b.z, r, 720);
        for s in seeds.iter_mut() {
            // pairs that coalesce at the branch point start exactly there
            let mut near: Vec<usize> = (0..s.fan.len()).collect();
            near.sort_by(|&a, &c| (s.fan[a] - b.coalesced_u).norm().total_cmp(&(s.fan[c] - b.coalesced_u).norm()));
            let group = &near[..b.order.min(near.len())];
            if group.contains(&s.i) && group.contains(&s.j) {
                s.origin = Some((b.z, b.coalesced_u, b.coalesced_u, Endpoint::Branch { index: k, z: b.z }));
            }
        }
        seeds
    }

    fn triple_seeds(&self, zt: C, ft: &[C]) -> Vec<Seed> {
        let (dbp, _) = self.bp_distance(zt);
        let r = (1e-4 * self.scale).min(0.05 * dbp);
        let mut seeds = self.circle_seeds(zt, r, 360);
        for s in seeds.iter_mut() {
            // label the sheets at the triple point by nearest value
            let pick = |u: C| ft.iter().copied().min_by(|a, b| (a - u).norm().total_cmp(&(b - u).norm())).expect("fan");
            s.origin = Some((zt, pick(s.fan[s.i]), pick(s.fan[s.j]), Endpoint::Triple { z: zt }));
        }
        seeds
    }

    /// Whether an existing arc already covers `z` for the same sheet pair.
    fn covered(&self, arcs: &[SupportArc], z: C, ui: C, uj: C, tol: f64) -> bool {
        arcs.iter().any(|a| {
            if a.distance(z) > tol {
                return false;
            }
            let s = a.samples[a.nearest_sample(z)];
            let sep = (ui - uj).norm();
            let d1 = (s.ui - ui).norm().max((s.uj - uj).norm());
            let d2 = (s.ui - uj).norm().max((s.uj - ui).norm());
            d1.min(d2) < 0.25 * sep + 1e-6 * self.scale
        })
    }

    fn finish(&self, mut samples: Vec<ArcSample>, pair: (usize, usize), endpoints: [Endpoint; 2], phase: f64) -> SupportArc {
        samples.dedup_by(|a, b| (a.z - b.z).norm() == 0.0);
        let (mass, mass_richardson) = if samples.len() >= 2 {
            let fine = trapezoid(&samples, 1);
            let coarse = trapezoid(&samples, 2);
            (fine, fine + (fine - coarse) / 3.0)
        } else {
            (0.0, 0.0)
        };
        SupportArc {
            samples,
            pair,
            endpoints,
            mass,
            mass_richardson,
            mass_phase: phase.abs() / (2.0 * PI),
            votes: (0, 0),
            switching: false,
        }
    }

    /// Selection on both sides of the arc at interior samples.
    fn switching_votes(&self, arc: &SupportArc, grid: &GridOptions) -> (usize, usize) {
        let n = arc.samples.len();
        if n < 3 {
            return (0, 0);
        }
        let mut yes = 0;
        let mut no = 0;
        for frac in [0.25, 0.5, 0.75] {
            let k = ((n - 1) as f64 * frac).round() as usize;
            let k = k.clamp(1, n - 2);
            let s = arc.samples[k];
            let local = (arc.samples[k + 1].z - arc.samples[k - 1].z).norm();
            let (dbp, _) = self.bp_distance(s.z);
            let nu = (1e-3 * self.scale).min(0.05 * dbp).min(0.25 * local);
            let fp = (s.uj - s.ui) / self.t;
            let normal = fp.conj() / fp.norm();
            let side = |z: C| -> Option<C> {
                let fan = solve_saddles(self.spec, z, self.t).saddles;
                let cert = crate::relevance::select_in_fan(self.spec, &crate::saddle::SaddleFan { z, t: self.t, heights: fan.iter().map(|&u| height_g(self.spec, z, self.t, u)).collect(), saddles: fan, log_residuals: vec![], degenerate: false, min_gap: 0.0 }, grid).ok()?;
                Some(cert.saddle)
            };
            let (Some(up), Some(dn)) = (side(s.z + normal * nu), side(s.z - normal * nu)) else { continue };
            let label = |u: C, z: C| {
                let fan = solve_saddles(self.spec, z, self.t).saddles;
                let _ = fan;
                if (u - s.ui).norm() < (u - s.uj).norm() {
                    ((u - s.ui).norm(), 0)
                } else {
                    ((u - s.uj).norm(), 1)
                }
            };
            let (du, lu) = label(up, s.z + normal * nu);
            let (dd, ld) = label(dn, s.z - normal * nu);
            let sep = (s.ui - s.uj).norm();
            let on_pair = du < 0.25 * sep && dd < 0.25 * sep;
            if on_pair && lu != ld {
                yes += 1;
            } else {
                no += 1;
            }
        }
        (yes, no)
    }
}

/// Trace the support of `μ_t` as switching nodal arcs.
pub fn trace_support(spec: &PolySpec, t: C, opts: &TraceOptions) -> Result<LimitMeasure, MeasureError> {
    let locus = branch_locus(spec, t)?;
    let region = opts.region.clone().unwrap_or_else(|| TraceRegion::default_for(spec, t));
    let scale = 1.0 + spec.lambda_max() + t.norm().sqrt();
    let tracer = Tracer { spec, t, region, bps: locus.points.clone(), scale, max_step: opts.max_step };
    let mut warnings = Vec::new();
    if locus.unstable {
        warnings.push(format!("branch-locus interpolation consistency {:.2e}", locus.consistency));
    }

    let mut queue: Vec<Seed> = (0..tracer.bps.len()).filter(|&k| tracer.region.contains(tracer.bps[k].z)).flat_map(|k| tracer.bp_seeds(k)).collect();
    let mut arcs: Vec<SupportArc> = Vec::new();
    let mut triples: Vec<C> = Vec::new();
    let mut field_done = opts.field_cells == 0;
    loop {
        while let Some(seed) = queue.pop() {
            if arcs.len() >= opts.max_arcs {
                warnings.push("arc limit reached".into());
                queue.clear();
                break;
            }
            let tol = 0.05 * (seed.z - seed.origin.as_ref().map(|o| o.0).unwrap_or(seed.z)).norm().max(1e-7 * scale);
            let tol = if seed.origin.is_some() { tol } else { 1e-3 * scale };
            if tracer.covered(&arcs, seed.z, seed.fan[seed.i], seed.fan[seed.j], tol) {
                continue;
            }
            let pair = (seed.i, seed.j);
            let mut pieces = Vec::new();
            let directions: Vec<C> = if seed.origin.is_some() { vec![seed.dir] } else { vec![seed.dir, -seed.dir] };
            for d in directions {
                match tracer.trace(seed.z, seed.fan.clone(), seed.i, seed.j, d) {
                    Stop::Arc(s, e, p) => pieces.push((s, e, p)),
                    Stop::Triple(s, zt, ft, p) => {
                        if !triples.iter().any(|q| (q - zt).norm() < 1e-8 * scale) {
                            triples.push(zt);
                            queue.extend(tracer.triple_seeds(zt, &ft));
                        }
                        pieces.push((s, Endpoint::Triple { z: zt }, p));
                    }
                }
            }
            let (samples, ends, phase) = if let Some((oz, oui, ouj, oe)) = seed.origin.clone() {
                let (s, e, p) = pieces.pop().expect("one direction");
                let mut all = vec![ArcSample { z: oz, ui: oui, uj: ouj, rho: tracer.rho(oui, ouj) }];
                all.extend(s);
                let head = tracer.phase_increment(oz, &[oui, ouj], seed.z, &[seed.fan[seed.i], seed.fan[seed.j]], 0, 1);
                (all, [oe, e], head + p)
            } else {
                let (s2, e2, p2) = pieces.pop().expect("two directions");
                let (mut s1, e1, p1) = pieces.pop().expect("two directions");
                s1.reverse();
                s1.pop();
                s1.extend(s2);
                (s1, [e1, e2], p1.abs() + p2.abs())
            };
            if matches!(ends[1], Endpoint::Closed) {
                // loops are closed in one direction; nothing to do
            }
            arcs.push(tracer.finish(samples, pair, ends, phase));
        }
        if field_done {
            break;
        }
        field_done = true;
        queue.extend(field_seeds(&tracer, &arcs, opts));
    }

    let votes: Vec<(usize, usize)> = arcs.par_iter().map(|a| tracer.switching_votes(a, &opts.grid)).collect();
    let mut kept = Vec::new();
    let mut rejected = 0;
    for (mut a, v) in arcs.into_iter().zip(votes) {
        a.votes = v;
        a.switching = v.0 > v.1;
        if a.switching {
            if !a.is_closed() {
                warnings.push(format!("open support arc ending at {:?}", a.endpoints));
            }
            kept.push(a);
        } else {
            rejected += 1;
        }
    }
    let total_mass = kept.iter().map(|a| a.mass_richardson).sum();
    let total_mass_trapezoid = kept.iter().map(|a| a.mass).sum();
    let total_mass_phase = kept.iter().map(|a| a.mass_phase).sum();
    Ok(LimitMeasure { t, arcs: kept, total_mass, total_mass_trapezoid, total_mass_phase, branch_points: locus.points, rejected, warnings })
}

/// Seeds on relevance-field edges where the selected sheet switches and no
/// traced arc passes nearby.
fn field_seeds(tracer: &Tracer, arcs: &[SupportArc], opts: &TraceOptions) -> Vec<Seed> {
    let region = tracer.region.bounding();
    let anchor = region.center + C::new(0.0, 2.0 * region.radius);
    let Ok(seed) = select_max_relevant(tracer.spec, anchor, tracer.t, &opts.grid) else { return Vec::new() };
    let fopts = FieldOptions { cells: opts.field_cells, spot_rate: 0.05, seed: opts.seed, grid: opts.grid };
    let field = relevance_field(tracer.spec, tracer.t, region, &seed, &fopts);
    let h = field.spacing();
    let mut out = Vec::new();
    for (a, b) in field.switch_edges() {
        let (ca, cb) = (&field.cells[a], &field.cells[b]);
        let (Some(ka), Some(kb)) = (ca.chosen, cb.chosen) else { continue };
        if !tracer.region.contains(ca.z) || !tracer.region.contains(cb.z) {
            continue;
        }
        let ui = ca.fan[ka];
        let Some(fb) = solve_labeled(tracer.spec, cb.z, tracer.t, &ca.fan) else { continue };
        let Some(j) = (0..fb.len()).find(|&q| (fb[q] - cb.fan[kb]).norm() < 1e-9 * tracer.scale) else { continue };
        let i = ka;
        if i == j {
            continue;
        }
        let mid = (ca.z + cb.z) / 2.0;
        if tracer.covered(arcs, mid, ui, ca.fan[j], 2.0 * h) {
            continue;
        }
        let Some((zc, fc)) = tracer.correct(mid, &ca.fan, i, j) else { continue };
        if (zc - mid).norm() > 2.0 * h {
            continue;
        }
        let fp = (fc[j] - fc[i]) / tracer.t;
        let dir = C::new(0.0, 1.0) * fp.conj();
        out.push(Seed { z: zc, fan: fc, i, j, dir, origin: None });
    }
    out
}

/// Nodal-ray count around a simple branch point.
#[derive(Clone, Debug, Serialize)]
pub struct RayReport {
    pub z: C,
    pub radius: f64,
    /// Ray directions in degrees in `[0, 360)`.
    pub angles: Vec<f64>,
    /// Consecutive angular gaps in degrees.
    pub gaps: Vec<f64>,
    /// Rays along which the relevant sheet switches.
    pub support_rays: usize,
    pub pass: bool,
}

/// Count zero crossings of `h` for the coalescing pair on a small circle and
/// compare the gaps with `120°`.
pub fn equiangular_ray_check(spec: &PolySpec, t: C, bp: &BranchPoint, grid: &GridOptions) -> Result<RayReport, MeasureError> {
    if bp.order != 2 {
        return Err(MeasureError::NotSimple(bp.order));
    }
    let scale = 1.0 + spec.lambda_max() + t.norm().sqrt();
    let fan = solve_saddles(spec, bp.z, t);
    if fan.min_gap > 1e-3 * scale {
        return Err(MeasureError::NotBranchPoint { z: bp.z, gap: fan.min_gap });
    }
    let radius = 1e-5 * scale;
    let points = 3600;
    let at = |k: usize| bp.z + C::from_polar(radius, 2.0 * PI * k as f64 / points as f64);
    let mut prev = solve_saddles(spec, at(0), t).saddles;
    let mut near: Vec<usize> = (0..prev.len()).collect();
    near.sort_by(|&a, &b| (prev[a] - bp.coalesced_u).norm().total_cmp(&(prev[b] - bp.coalesced_u).norm()));
    let (i, j) = (near[0], near[1]);
    let h = |z: C, f: &[C]| height_g(spec, z, t, f[i]) - height_g(spec, z, t, f[j]);
    let mut h_prev = h(at(0), &prev);
    let mut angles = Vec::new();
    for k in 1..=points {
        let raw = solve_saddles(spec, at(k), t).saddles;
        let perm = match_sheets(&prev, &raw);
        let f: Vec<C> = perm.iter().map(|&q| raw[q]).collect();
        let hk = h(at(k), &f);
        if hk.signum() != h_prev.signum() {
            let frac = h_prev / (h_prev - hk);
            angles.push(360.0 * ((k - 1) as f64 + frac) / points as f64);
        }
        prev = f;
        h_prev = hk;
    }
    let mut gaps: Vec<f64> = angles.windows(2).map(|w| w[1] - w[0]).collect();
    if let (Some(first), Some(last)) = (angles.first(), angles.last()) {
        gaps.push(360.0 - last + first);
    }
    // support rays: the selected sheet, continued across the ray, changes
    let r2 = 1e-2 * scale;
    let support_rays = angles
        .iter()
        .filter(|&&a| {
            let at = |da: f64| bp.z + C::from_polar(r2, (a + da).to_radians());
            let (Ok(lo), Ok(hi)) = (select_max_relevant(spec, at(-30.0), t, grid), select_max_relevant(spec, at(30.0), t, grid)) else {
                return false;
            };
            let mut fan = solve_saddles(spec, at(-30.0), t).saddles;
            let nearest = |f: &[C], u: C| (0..f.len()).min_by(|&x, &y| (f[x] - u).norm().total_cmp(&(f[y] - u).norm())).expect("fan");
            let start = nearest(&fan, lo.saddle);
            let mut mid = None;
            for k in 1..=120 {
                let raw = solve_saddles(spec, at(-30.0 + k as f64 * 0.5), t).saddles;
                fan = match_sheets(&fan, &raw).iter().map(|&q| raw[q]).collect();
                if k == 60 {
                    mid = Some(fan.clone());
                }
            }
            let end = nearest(&fan, hi.saddle);
            let mid = mid.expect("midpoint");
            let mut order: Vec<usize> = (0..mid.len()).collect();
            order.sort_by(|&x, &y| (mid[x] - bp.coalesced_u).norm().total_cmp(&(mid[y] - bp.coalesced_u).norm()));
            start != end && order[..2].contains(&start) && order[..2].contains(&end)
        })
        .count();
    let pass = angles.len() == 3 && gaps.iter().all(|g| (g - 120.0).abs() <= 5.0);
    Ok(RayReport { z: bp.z, radius, angles, gaps, support_rays, pass })
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub enum Regime {
    Small,
    Large,
}

/// Conjectured end of the small-time regime, `δ²/2`; informational only.
pub fn conjectured_small_t_threshold(spec: &PolySpec) -> f64 {
    spec.delta().powi(2) / 2.0
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterReport {
    pub index: usize,
    pub mass: f64,
    /// Hausdorff distance of the rescaled arcs to `[-2,2]`.
    pub hausdorff: f64,
    /// Sup-norm deviation of the rescaled density from `(α_j/α)·sc₁`.
    pub density_dev: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub regime: Regime,
    pub t: f64,
    pub clusters: Vec<ClusterReport>,
    /// `max|Im z - Im com|` over support samples in `B₃(com)`.
    pub max_im_deviation: Option<f64>,
    pub ks: Option<f64>,
}

/// Small-`t` cluster rescaling or large-`t` centre-of-mass checks.
pub fn asymptotic_checks(spec: &PolySpec, t: f64, regime: Regime, measure: &LimitMeasure, zeros: Option<&[C]>) -> Result<AsymptoticReport, MeasureError> {
    let weights = spec.weights();
    let nearest = |z: C| {
        (0..spec.d()).min_by(|&a, &b| (spec.lambdas()[a] - z).norm().total_cmp(&(spec.lambdas()[b] - z).norm())).expect("d ≥ 1")
    };
    match regime {
        Regime::Small => {
            let mut clusters = Vec::new();
            for j in 0..spec.d() {
                let arcs: Vec<&SupportArc> = measure.arcs.iter().filter(|a| nearest(a.samples[a.samples.len() / 2].z) == j).collect();
                for a in &arcs {
                    if a.samples.iter().any(|s| nearest(s.z) != j) {
                        return Err(MeasureError::Regime(format!("arc near λ_{j} reaches another cluster; clusters have merged")));
                    }
                }
                let sc = (t * weights[j]).sqrt();
                let lam = spec.lambdas()[j];
                let pts: Vec<(C, f64)> = arcs.iter().flat_map(|a| a.samples.iter().map(|s| ((s.z - lam) / sc, s.rho * sc))).collect();
                if pts.is_empty() {
                    return Err(MeasureError::Regime(format!("no support arc near λ_{j}")));
                }
                let to_segment = pts.iter().map(|(z, _)| segment_distance(*z, C::new(-2.0, 0.0), C::new(2.0, 0.0))).fold(0.0, f64::max);
                let from_segment = (0..=400)
                    .map(|k| {
                        let x = C::new(-2.0 + 4.0 * k as f64 / 400.0, 0.0);
                        arcs.iter()
                            .flat_map(|a| a.samples.windows(2).map(move |w| segment_distance(x, (w[0].z - lam) / sc, (w[1].z - lam) / sc)))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(0.0, f64::max);
                let density_dev = pts.iter().map(|(z, r)| (r - weights[j] * sc_density(z.re, 1.0)).abs()).fold(0.0, f64::max);
                clusters.push(ClusterReport {
                    index: j,
                    mass: arcs.iter().map(|a| a.mass_richardson).sum(),
                    hausdorff: to_segment.max(from_segment),
                    density_dev,
                });
            }
            Ok(AsymptoticReport { regime, t, clusters, max_im_deviation: None, ks: None })
        }
        Regime::Large => {
            let com = spec.center_of_mass();
            let inside: Vec<&ArcSample> = measure.arcs.iter().flat_map(|a| a.samples.iter()).filter(|s| (s.z - com).norm() < 3.0).collect();
            if inside.is_empty() {
                return Err(MeasureError::Regime("no support near the centre of mass; arcs have not merged".into()));
            }
            let dev = inside.iter().map(|s| (s.z.im - com.im).abs()).fold(0.0, f64::max);
            let ks = zeros.map(|zs| ks_to_semicircle(&zs.iter().map(|z| (z - com).re / t.sqrt()).collect::<Vec<_>>()));
            Ok(AsymptoticReport { regime, t, clusters: Vec::new(), max_im_deviation: Some(dev), ks })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn mono() -> PolySpec {
        PolySpec::monomial(c(0.0, 0.0), 1)
    }

    fn pm_i() -> PolySpec {
        PolySpec::new(vec![c(0.0, 1.0), c(0.0, -1.0)], vec![1, 1], 1).unwrap()
    }

    // independent branch: ζ√(1-4t/ζ²) is analytic off [-2√t, 2√t]
    fn oracle_m(a: C, z: C, t: f64) -> C {
        let zeta = z - a;
        (zeta - zeta * (1.0 - 4.0 * t / (zeta * zeta)).sqrt()) / (2.0 * t)
    }

    #[test]
    fn stieltjes_examples() {
        let o = GridOptions::default();
        let v = stieltjes(&mono(), c(3.0, 0.0), c(1.0, 0.0), &o).unwrap();
        assert!((v.m - c((3.0 - 5f64.sqrt()) / 2.0, 0.0)).norm() < 1e-14);
        assert!(v.residual < 1e-12);
        let v = stieltjes(&mono(), c(0.0, 1.0), c(1.0, 0.0), &o).unwrap();
        assert!((v.m - c(0.0, -0.618_033_988_749_895)).norm() < 1e-14);
        let z = c(40.0, 25.0);
        let v = stieltjes(&pm_i(), z, c(2.0, 0.0), &o).unwrap();
        assert!((v.m * z - 1.0).norm() < 2e-3);
    }

    #[test]
    fn potential_examples() {
        let o = GridOptions::default();
        let u = log_potential(&mono(), c(3.0, 0.0), c(1.0, 0.0), &o).unwrap();
        let want = ((3.0 + 5f64.sqrt()) / 2.0).ln() + ((3.0 - 5f64.sqrt()) / 2.0).powi(2) / 2.0;
        assert!((u - want).abs() < 1e-14);
        assert!((u - 1.0354).abs() < 1e-4);
        let a = c(1.0, -2.0);
        let z = c(2.5, 1.0);
        let shifted = log_potential(&PolySpec::monomial(a, 1), z, c(0.7, 0.0), &o).unwrap();
        let base = log_potential(&mono(), z - a, c(0.7, 0.0), &o).unwrap();
        assert!((shifted - base).abs() < 1e-13);
        let far = c(300.0, -200.0);
        let u = log_potential(&pm_i(), far, c(2.0, 0.0), &o).unwrap();
        assert!((u - far.norm().ln()).abs() < 1e-2);
    }

    #[test]
    fn d1_closed_forms_agree_with_oracle() {
        for t in [0.5f64, 1.0, 3.0] {
            for a in [c(0.0, 0.0), c(1.0, 1.0)] {
                for k in 0..64 {
                    let z = a + C::from_polar(2.0 * t.sqrt() + 0.7, 2.0 * PI * (k as f64 + 0.3) / 64.0);
                    assert!((d1_stieltjes(a, z, t) - oracle_m(a, z, t)).norm() < 1e-13);
                }
                let x = a + 2.0 * t.sqrt() + 0.5;
                assert!((d1_stieltjes(a, x, t) - oracle_m(a, x, t)).norm() < 1e-14);
                let x = a - 2.0 * t.sqrt() - 0.5;
                assert!((d1_stieltjes(a, x, t) - oracle_m(a, x, t)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn joukowski_examples() {
        let (p, m) = joukowski_pm(c(0.0, 0.0), 1.0).unwrap();
        assert!((p - c(0.0, 1.0)).norm() < 1e-15 && (m - c(0.0, -1.0)).norm() < 1e-15);
        for z in [c(0.3, 0.2), c(-4.0, 1e-3), c(1.0, -3.0), c(5.0, 5.0)] {
            let (p, m) = joukowski_pm(z, 2.0).unwrap();
            assert!((p * m - 2.0).norm() < 1e-12);
        }
        let z = c(300.0, 400.0);
        let (p, _) = joukowski_pm(z, 1.0).unwrap();
        assert!((p - (z - 1.0 / z)).norm() < 2.0 / z.norm_sqr());
        let z = c(300.0, -400.0);
        let (_, m) = joukowski_pm(z, 1.0).unwrap();
        assert!((m - (z - 1.0 / z)).norm() < 2.0 / z.norm_sqr());
        assert!(matches!(joukowski_pm(c(3.0, 0.0), 1.0), Err(MeasureError::BranchCut(_))));
    }

    #[test]
    fn semicircle_reference_values() {
        assert!((sc_density(0.0, 1.0) - 1.0 / PI).abs() < 1e-15);
        for x in [-1.9, -0.5, 0.0, 1.3] {
            assert!(h_fn(c(x, 0.0)).abs() < 1e-14);
        }
        let want = ((3.0 + 5f64.sqrt()) / 2.0).ln() + (9.0 - 3.0 * 5f64.sqrt()) / 4.0 - 0.5;
        assert!((psi(c(3.0, 0.0)) - want).abs() < 1e-14);
        assert!((psi(c(3.0, 0.0)) - d1_potential(c(0.0, 0.0), c(3.0, 0.0), 1.0)).abs() < 1e-14);
        for z in [c(0.4, 1.2), c(-2.5, -0.3), c(0.0, -3.0)] {
            assert!((psi(z) - d1_potential(c(0.0, 0.0), z, 1.0)).abs() < 1e-13);
        }
        let r = semicircle_refs(c(0.0, 0.0), 1.0);
        assert!((r.density - 1.0 / PI).abs() < 1e-15 && r.h.abs() < 1e-15);
        // H is the height difference of the two d = 1 saddles
        let z = c(0.7, 0.9);
        let fan = solve_saddles(&mono(), z, c(1.0, 0.0));
        let s = (z * z - 4.0).sqrt();
        let (u1, u2) = ((z + s) / 2.0, (z - s) / 2.0);
        let _ = fan;
        let g = |u: C| height_g(&mono(), z, c(1.0, 0.0), u);
        assert!((h_fn(z).abs() - (g(u1) - g(u2)).abs()).abs() < 1e-13);
    }

    #[test]
    fn ks_is_small_for_semicircle_quantiles() {
        let xs: Vec<f64> = (0..2000)
            .map(|k| {
                let p = (k as f64 + 0.5) / 2000.0;
                let (mut lo, mut hi) = (-2.0, 2.0);
                for _ in 0..60 {
                    let m = 0.5 * (lo + hi);
                    if sc1_cdf(m) < p {
                        lo = m
                    } else {
                        hi = m
                    }
                }
                lo
            })
            .collect();
        assert!(ks_to_semicircle(&xs) < 1e-3);
        assert!(ks_to_semicircle(&[0.0; 10]) > 0.4);
    }

    #[test]
    fn d1_support_is_the_semicircle_segment() {
        let lm = trace_support(&mono(), c(1.0, 0.0), &TraceOptions::default()).unwrap();
        assert_eq!(lm.arcs.len(), 1, "{:?}", lm.arcs.iter().map(|a| (&a.endpoints, a.votes)).collect::<Vec<_>>());
        let arc = &lm.arcs[0];
        assert!(arc.samples.iter().all(|s| s.z.im.abs() < 1e-12 && s.z.re.abs() <= 2.0 + 1e-12));
        assert!((lm.total_mass - 1.0).abs() < 1e-4, "{}", lm.total_mass);
        assert!((lm.total_mass_phase - 1.0).abs() < 1e-10, "{}", lm.total_mass_phase);
        for s in &arc.samples {
            assert!((s.rho - sc_density(s.z.re, 1.0)).abs() < 1e-8);
        }
        let (z, rho) = lm.density_at(&mono(), c(0.3, 1e-3)).unwrap();
        assert!(z.im.abs() < 1e-14 && (rho - sc_density(z.re, 1.0)).abs() < 1e-13 && (z.re - 0.3).abs() < 1e-6);
    }

    #[test]
    fn d1_rays_at_simple_branch_point() {
        let loc = branch_locus(&mono(), c(1.0, 0.0)).unwrap();
        let bp = loc.points.iter().find(|b| b.z.re > 0.0).unwrap();
        let r = equiangular_ray_check(&mono(), c(1.0, 0.0), bp, &GridOptions::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.support_rays, 1);
        let off = BranchPoint { z: c(2.5, 0.3), order: 2, coalesced_u: c(1.2, 0.0) };
        assert!(matches!(equiangular_ray_check(&mono(), c(1.0, 0.0), &off, &GridOptions::default()), Err(MeasureError::NotBranchPoint { .. })));
        let triple = BranchPoint { z: c(0.0, 0.0), order: 3, coalesced_u: c(0.0, 0.0) };
        assert!(matches!(equiangular_ray_check(&mono(), c(1.0, 0.0), &triple, &GridOptions::default()), Err(MeasureError::NotSimple(3))));
    }

    #[test]
    fn json_shape() {
        let lm = trace_support(&mono(), c(1.0, 0.0), &TraceOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&lm.to_json()).unwrap();
        assert!(v["arcs"][0]["samples"][0].as_array().unwrap().len() == 3);
        assert!((v["total_mass"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    }
}
