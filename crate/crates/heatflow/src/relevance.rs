//! Maximally relevant saddle selection by sublevel-set connectivity.
//!
//! For fixed `z` the sublevel set `Σ(h) = {u : G(z,u) ≤ h}` is sampled on a
//! rectilinear grid graded towards the saddles. The relevant saddle is the one
//! at whose height the components containing `±i∞` first merge. Connectivity
//! only changes at saddle heights, so probes are placed halfway between
//! consecutive distinct heights where the sublevel necks are widest.

use std::collections::VecDeque;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::polyheat::PolySpec;
use crate::saddle::{g_second, height_g, match_sheets, pick_nearest, solve_saddles, SaddleFan};

type C = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelevanceError {
    #[error("saddle heights tie at z = {z} (gap {gap:.3e}); z is on or too close to the nodal set")]
    Tie { z: C, gap: f64 },
    #[error("connectivity undecided at z = {z} after {refinements} refinements")]
    Undecided { z: C, refinements: usize },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridOptions {
    /// Base cells across the width of the box.
    pub resolution: usize,
    /// Resolution doublings allowed before giving up.
    pub max_refinements: usize,
    /// Relative height gap below which two saddles count as tied.
    pub tie_tol: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { resolution: 128, max_refinements: 3, tie_tol: 1e-9 }
    }
}

/// Outcome of a single flood fill.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fill {
    Connected,
    Disconnected,
    /// The box is too small: sublevel cells touch the side columns or no
    /// anchor row cell is in the set.
    Leaky,
}

/// Sampled `G(z,·)` on a rectilinear grid over `[-2R,2R]×[-R,R]` in the
/// frame where `t > 0`.
#[derive(Clone, Debug)]
pub struct ConnectivityGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major `G` at cell centres, `ys.len()-1` rows.
    pub values: Vec<f64>,
    pub half_height: f64,
    pub resolution: usize,
}

fn graded_lines(base: &[f64], lo: f64, hi: f64, centers: &[(f64, f64)], coarse: f64) -> Vec<f64> {
    let mut v: Vec<f64> = base.to_vec();
    for &(c, w) in centers {
        if !(w > 0.0) || w >= coarse {
            continue;
        }
        let mut step = w;
        let mut off = 0.5 * w;
        while step < coarse {
            v.push(c - off);
            v.push(c + off);
            step *= 1.3;
            off += step;
        }
    }
    v.retain(|x| *x > lo && *x < hi);
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    let tiny = 1e-13 * (hi - lo);
    v.dedup_by(|a, b| (*a - *b).abs() < tiny);
    v
}

impl ConnectivityGrid {
    /// `spec`, `z` in the rotated frame; `targets` are `(point, cell size)`.
    pub fn build(spec: &PolySpec, z: C, t: f64, half_height: f64, resolution: usize, targets: &[(C, f64)]) -> Self {
        let r = half_height;
        let nx = resolution.max(8);
        let hx = 4.0 * r / nx as f64;
        let ny = (nx / 2).max(4);
        let bx: Vec<f64> = (0..=nx).map(|k| -2.0 * r + hx * k as f64).collect();
        let by: Vec<f64> = (0..=ny).map(|k| -r + 2.0 * r / ny as f64 * k as f64).collect();
        let cx: Vec<(f64, f64)> = targets.iter().map(|(p, w)| (p.re, *w)).collect();
        let cy: Vec<(f64, f64)> = targets.iter().map(|(p, w)| (p.im, *w)).collect();
        let xs = graded_lines(&bx, -2.0 * r, 2.0 * r, &cx, hx);
        let ys = graded_lines(&by, -r, r, &cy, hx);
        let tc = C::new(t, 0.0);
        let values: Vec<f64> = (0..ys.len() - 1)
            .into_par_iter()
            .flat_map_iter(|j| {
                let y = 0.5 * (ys[j] + ys[j + 1]);
                let xs = &xs;
                (0..xs.len() - 1).map(move |i| height_g(spec, z, tc, C::new(0.5 * (xs[i] + xs[i + 1]), y)))
            })
            .collect();
        Self { xs, ys, values, half_height: r, resolution }
    }

    pub fn nx(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.ys.len() - 1
    }

    /// 8-connected flood fill from the top row to the bottom row of `G ≤ h`.
    pub fn connected(&self, h: f64) -> Fill {
        let (nx, ny) = (self.nx(), self.ny());
        let inside = |i: usize, j: usize| self.values[j * nx + i] <= h;
        if (0..ny).any(|j| inside(0, j) || inside(nx - 1, j)) {
            return Fill::Leaky;
        }
        let top = ny - 1;
        if !(0..nx).any(|i| inside(i, top)) || !(0..nx).any(|i| inside(i, 0)) {
            return Fill::Leaky;
        }
        let mut seen = vec![false; nx * ny];
        let mut queue = VecDeque::new();
        for i in 0..nx {
            if inside(i, top) {
                seen[top * nx + i] = true;
                queue.push_back((i, top));
            }
        }
        while let Some((i, j)) = queue.pop_front() {
            if j == 0 {
                return Fill::Connected;
            }
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    let (a, b) = (a as usize, b as usize);
                    if !seen[b * nx + a] && inside(a, b) {
                        seen[b * nx + a] = true;
                        queue.push_back((a, b));
                    }
                }
            }
        }
        Fill::Disconnected
    }
}

/// Problem transported to the frame where `t` is real and positive.
struct Frame {
    spec: PolySpec,
    z: C,
    t: f64,
    saddles: Vec<C>,
    heights: Vec<f64>,
}

fn frame(spec: &PolySpec, z: C, t: C, fan: &SaddleFan) -> Frame {
    let w = C::from_polar(1.0, t.arg() / 2.0);
    let wi = w.conj();
    Frame {
        spec: spec.rotated(wi),
        z: z * wi,
        t: t.norm(),
        saddles: fan.saddles.iter().map(|u| u * wi).collect(),
        heights: fan.heights.clone(),
    }
}

fn box_half_height(f: &Frame) -> f64 {
    let base = 4.0 * (f.spec.lambda_max() + f.t.sqrt() + f.z.norm());
    let margin = 2.0 * (f.t.sqrt() + 1.0);
    let mut need = 0.0f64;
    for p in f.saddles.iter().chain(f.spec.lambdas()).chain(std::iter::once(&f.z)) {
        need = need.max(p.re.abs() / 2.0 + margin).max(p.im.abs() + margin);
    }
    base.max(need).max(1.0)
}

/// Probe levels with the cell-size targets that resolve the necks at those levels.
fn targets(f: &Frame, levels: &[f64], scale: f64) -> Vec<(C, f64)> {
    let tc = C::new(f.t, 0.0);
    let mut out = Vec::new();
    for (u, h) in f.saddles.iter().zip(&f.heights) {
        let delta = levels.iter().map(|l| (l - h).abs()).fold(f64::INFINITY, f64::min);
        let a = 0.5 * g_second(&f.spec, tc, *u).norm();
        if delta.is_finite() && a > 0.0 {
            out.push((*u, scale * (delta / a).sqrt()));
        }
    }
    for l in f.spec.lambdas() {
        let near = f.saddles.iter().map(|u| (u - l).norm()).fold(f64::INFINITY, f64::min);
        out.push((*l, 0.05 * scale * near));
    }
    out
}

/// Flood fills at every level, enlarging the box while it leaks.
fn probe(f: &Frame, levels: &[f64], resolution: usize, scale: f64) -> Option<Vec<bool>> {
    let mut r = box_half_height(f);
    let tg = targets(f, levels, scale);
    for _ in 0..6 {
        let grid = ConnectivityGrid::build(&f.spec, f.z, f.t, r, resolution, &tg);
        let fills: Vec<Fill> = levels.iter().map(|&h| grid.connected(h)).collect();
        if fills.iter().any(|x| *x == Fill::Leaky) {
            r *= 1.5;
            continue;
        }
        return Some(fills.iter().map(|x| *x == Fill::Connected).collect());
    }
    None
}

/// Connectivity at several levels, refined until two consecutive resolutions agree.
fn stable_probe(f: &Frame, z: C, levels: &[f64], opts: &GridOptions) -> Result<(Vec<bool>, Vec<usize>), RelevanceError> {
    let mut res = opts.resolution;
    let mut scale = 0.1;
    let mut used = vec![res];
    let mut prev = probe(f, levels, res, scale);
    for _ in 0..opts.max_refinements {
        res *= 2;
        scale *= 0.5;
        used.push(res);
        let next = probe(f, levels, res, scale);
        if let (Some(a), Some(b)) = (&prev, &next) {
            let monotone = b.windows(2).all(|w| w[0] <= w[1]);
            if a == b && monotone {
                return Ok((b.clone(), used));
            }
        }
        prev = next;
    }
    Err(RelevanceError::Undecided { z, refinements: opts.max_refinements })
}

/// Whether `Σ(h)` joins `-i∞` to `+i∞`, stable under one refinement.
pub fn sublevel_connected(spec: &PolySpec, z: C, t: C, h: f64, opts: &GridOptions) -> Result<bool, RelevanceError> {
    let fan = solve_saddles(spec, z, t);
    let f = frame(spec, z, t, &fan);
    stable_probe(&f, z, &[h], opts).map(|(v, _)| v[0])
}

/// Selected saddle with the bracketing levels of the connection height.
#[derive(Clone, Debug, Serialize)]
pub struct RelevanceCertificate {
    pub z: C,
    pub t: C,
    /// Index into `saddles`.
    pub chosen: usize,
    pub saddle: C,
    pub h_low: f64,
    pub h_high: f64,
    /// Levels actually flood-filled; same topology as `h_low`/`h_high`.
    pub probe_low: f64,
    pub probe_high: f64,
    pub resolutions: Vec<usize>,
    pub irrelevant: Vec<usize>,
    pub saddles: Vec<C>,
    pub heights: Vec<f64>,
}

impl RelevanceCertificate {
    /// `m_t(z) = (z - u*)/t`.
    pub fn stieltjes(&self) -> C {
        (self.z - self.saddle) / self.t
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "z": [self.z.re, self.z.im],
            "chosen": self.chosen,
            "h_low": self.h_low,
            "h_high": self.h_high,
            "irrelevant": self.irrelevant,
            "saddle": [self.saddle.re, self.saddle.im],
            "probe_levels": [self.probe_low, self.probe_high],
            "resolutions": self.resolutions,
        })
        .to_string()
    }
}

/// Certified choice of the maximally relevant saddle at `(z,t)`.
pub fn select_max_relevant(spec: &PolySpec, z: C, t: C, opts: &GridOptions) -> Result<RelevanceCertificate, RelevanceError> {
    let fan = solve_saddles(spec, z, t);
    select_in_fan(spec, &fan, opts)
}

/// Same as [`select_max_relevant`] reusing an already solved fan.
pub fn select_in_fan(spec: &PolySpec, fan: &SaddleFan, opts: &GridOptions) -> Result<RelevanceCertificate, RelevanceError> {
    let (z, t) = (fan.z, fan.t);
    let f = frame(spec, z, t, fan);
    let n = fan.heights.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fan.heights[a].total_cmp(&fan.heights[b]));
    let hmax = fan.heights.iter().fold(0.0f64, |m, h| m.max(h.abs()));
    let tie = opts.tie_tol * (1.0 + hmax);

    // groups of tied heights, ascending
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &k in &order {
        match groups.last_mut() {
            Some(g) if fan.heights[k] - fan.heights[*g.last().expect("nonempty")] < tie => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    let mids: Vec<f64> = groups
        .windows(2)
        .map(|w| 0.5 * (fan.heights[*w[0].last().expect("nonempty")] + fan.heights[w[1][0]]))
        .collect();

    let (conn, used) = if mids.is_empty() { (Vec::new(), vec![]) } else { stable_probe(&f, z, &mids, opts)? };
    // probe k sits between group k and k+1; the chosen group is the first one
    // whose upper probe is connected
    let gk = conn.iter().position(|&c| c).unwrap_or(groups.len() - 1);
    let group = &groups[gk];
    let min_gap = order.windows(2).map(|w| fan.heights[w[1]] - fan.heights[w[0]]).fold(f64::INFINITY, f64::min);
    if group.len() > 1 {
        return Err(RelevanceError::Tie { z, gap: min_gap.max(0.0) });
    }
    let chosen = group[0];
    let h = fan.heights[chosen];
    let eps = if min_gap.is_finite() { (1e-3 * min_gap).max(1e-6) } else { 1e-6 };
    let probe_low = if gk > 0 { mids[gk - 1] } else { h - 1.0 };
    let probe_high = if gk < mids.len() { mids[gk] } else { h + 1.0 };
    let irrelevant = groups[gk + 1..].iter().flatten().copied().collect();
    Ok(RelevanceCertificate {
        z,
        t,
        chosen,
        saddle: fan.saddles[chosen],
        h_low: h - eps,
        h_high: h + eps,
        probe_low,
        probe_high,
        resolutions: used,
        irrelevant,
        saddles: fan.saddles.clone(),
        heights: fan.heights.clone(),
    })
}

/// Disk or annulus in the `z`-plane.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Region {
    pub center: C,
    pub radius: f64,
    pub inner: f64,
}

impl Region {
    pub fn disk(center: C, radius: f64) -> Self {
        Self { center, radius, inner: 0.0 }
    }

    pub fn annulus(center: C, inner: f64, radius: f64) -> Self {
        Self { center, radius, inner }
    }

    pub fn contains(&self, z: C) -> bool {
        let r = (z - self.center).norm();
        r <= self.radius && r >= self.inner
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub enum CellStatus {
    Outside,
    Propagated,
    Selected,
    Tie,
    Undecided,
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldCell {
    pub z: C,
    pub fan: Vec<C>,
    pub heights: Vec<f64>,
    /// Index into `fan`.
    pub chosen: Option<usize>,
    pub status: CellStatus,
}

impl FieldCell {
    pub fn saddle(&self) -> Option<C> {
        self.chosen.map(|k| self.fan[k])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FieldOptions {
    /// Lattice points per side of the bounding square.
    pub cells: usize,
    pub spot_rate: f64,
    pub seed: u64,
    pub grid: GridOptions,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { cells: 32, spot_rate: 0.05, seed: 0, grid: GridOptions::default() }
    }
}

/// Branch assignment on a lattice covering a region.
#[derive(Clone, Debug, Serialize)]
pub struct RelevanceField {
    pub t: C,
    pub region: Region,
    pub n: usize,
    pub cells: Vec<FieldCell>,
    pub selections: usize,
    pub spot_checks: usize,
    /// Cells where a spot check overrode the propagated branch.
    pub inconsistencies: Vec<C>,
}

impl RelevanceField {
    /// Lattice spacing.
    pub fn spacing(&self) -> f64 {
        2.0 * self.region.radius / (self.n - 1) as f64
    }

    pub fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = ((k % self.n) as i64, (k / self.n) as i64);
        let n = self.n as i64;
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(move |(di, dj)| (i + di, j + dj))
            .filter(move |(a, b)| *a >= 0 && *b >= 0 && *a < n && *b < n)
            .map(move |(a, b)| (b * n + a) as usize)
    }

    /// Neighbouring cell pairs where the selected sheet changes, with the
    /// saddle values on each side.
    pub fn switch_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.cells.len() {
            let ca = &self.cells[a];
            let Some(ka) = ca.chosen else { continue };
            for b in self.neighbours(a).filter(|&b| b > a) {
                let cb = &self.cells[b];
                let Some(kb) = cb.chosen else { continue };
                let perm = match_sheets(&ca.fan, &cb.fan);
                if perm[ka] != kb {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Distinct selected branch labels after continuation, counted as sets of
    /// switch-free connected components.
    pub fn components(&self) -> usize {
        let switched: std::collections::HashSet<(usize, usize)> = self.switch_edges().into_iter().collect();
        let mut seen = vec![false; self.cells.len()];
        let mut count = 0;
        for s in 0..self.cells.len() {
            if seen[s] || self.cells[s].chosen.is_none() {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(a) = stack.pop() {
                for b in self.neighbours(a) {
                    let key = (a.min(b), a.max(b));
                    if !seen[b] && self.cells[b].chosen.is_some() && !switched.contains(&key) {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        count
    }
}

fn heights_order_changed(pa: &[f64], pb: &[f64], perm: &[usize]) -> bool {
    let n = pa.len();
    for a in 0..n {
        for b in a + 1..n {
            let s1 = pa[a] - pa[b];
            let s2 = pb[perm[a]] - pb[perm[b]];
            if s1.signum() != s2.signum() {
                return true;
            }
        }
    }
    false
}

/// Propagates the branch of `seed` over a lattice on `region`.
///
/// Selection is rerun only where the height order of two sheets flips between
/// neighbours or sheet matching is ambiguous; a seeded random sample of the
/// remaining cells is re-selected as a spot check.
pub fn relevance_field(spec: &PolySpec, t: C, region: Region, seed: &RelevanceCertificate, opts: &FieldOptions) -> RelevanceField {
    let n = opts.cells.max(2);
    let h = 2.0 * region.radius / (n - 1) as f64;
    let origin = region.center - C::new(region.radius, region.radius);
    let mut cells: Vec<FieldCell> = (0..n * n)
        .map(|k| {
            let z = origin + C::new(h * (k % n) as f64, h * (k / n) as f64);
            FieldCell { z, fan: Vec::new(), heights: Vec::new(), chosen: None, status: CellStatus::Outside }
        })
        .collect();
    let inside: Vec<usize> = (0..n * n).filter(|&k| region.contains(cells[k].z)).collect();
    let mut field = RelevanceField { t, region, n, cells: Vec::new(), selections: 0, spot_checks: 0, inconsistencies: Vec::new() };
    if inside.is_empty() {
        field.cells = cells;
        return field;
    }
    for &k in &inside {
        let fan = solve_saddles(spec, cells[k].z, t);
        cells[k].fan = fan.saddles;
        cells[k].heights = fan.heights;
    }
    let select = |cell: &FieldCell| -> (Option<usize>, CellStatus) {
        let fan = SaddleFan {
            z: cell.z,
            t,
            saddles: cell.fan.clone(),
            heights: cell.heights.clone(),
            log_residuals: vec![],
            degenerate: false,
            min_gap: 0.0,
        };
        match select_in_fan(spec, &fan, &opts.grid) {
            Ok(c) => (Some(c.chosen), CellStatus::Selected),
            Err(RelevanceError::Tie { .. }) => (None, CellStatus::Tie),
            Err(RelevanceError::Undecided { .. }) => (None, CellStatus::Undecided),
        }
    };

    let start = *inside
        .iter()
        .min_by(|&&a, &&b| (cells[a].z - seed.z).norm().total_cmp(&(cells[b].z - seed.z).norm()))
        .expect("nonempty");
    let (sel, status) = select(&cells[start]);
    field.selections += 1;
    let carried = pick_nearest(&cells[start].fan, seed.saddle, cells[start].z).ok();
    if let (Some(k), Some(u)) = (sel, carried) {
        if (cells[start].fan[k] - u).norm() > 1e-8 * (1.0 + u.norm()) && (seed.z - cells[start].z).norm() < 0.5 * h {
            field.inconsistencies.push(cells[start].z);
        }
    }
    cells[start].chosen = sel;
    cells[start].status = status;

    let mut visited = vec![false; n * n];
    visited[start] = true;
    let mut queue = VecDeque::from([start]);
    let neighbours = |k: usize| {
        let (i, j) = ((k % n) as i64, (k / n) as i64);
        [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(move |(di, dj)| (i + di, j + dj))
            .filter(move |(a, b)| *a >= 0 && *b >= 0 && *a < n as i64 && *b < n as i64)
            .map(move |(a, b)| (b * n as i64 + a) as usize)
    };
    let mut pending: Vec<usize> = Vec::new();
    loop {
        while let Some(p) = queue.pop_front() {
            for c in neighbours(p) {
                if visited[c] || !region.contains(cells[c].z) {
                    continue;
                }
                let Some(kp) = cells[p].chosen else { continue };
                visited[c] = true;
                let perm = match_sheets(&cells[p].fan, &cells[c].fan);
                let ambiguous = cells[p].fan.iter().any(|&u| pick_nearest(&cells[c].fan, u, cells[c].z).is_err());
                let flip = heights_order_changed(&cells[p].heights, &cells[c].heights, &perm);
                if ambiguous || flip {
                    let (sel, status) = select(&cells[c]);
                    field.selections += 1;
                    cells[c].chosen = sel;
                    cells[c].status = status;
                } else {
                    cells[c].chosen = Some(perm[kp]);
                    cells[c].status = CellStatus::Propagated;
                }
                queue.push_back(c);
            }
        }
        // cells cut off by ties or undecided cells get their own selection
        pending.clear();
        pending.extend(inside.iter().copied().filter(|&k| !visited[k]));
        let Some(&next) = pending.first() else { break };
        visited[next] = true;
        let (sel, status) = select(&cells[next]);
        field.selections += 1;
        cells[next].chosen = sel;
        cells[next].status = status;
        queue.push_back(next);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sample: Vec<usize> = inside
        .iter()
        .copied()
        .filter(|&k| cells[k].status == CellStatus::Propagated)
        .filter(|_| rng.gen::<f64>() < opts.spot_rate)
        .collect();
    let checks: Vec<(usize, Option<usize>, CellStatus)> = sample
        .par_iter()
        .map(|&k| {
            let (sel, status) = select(&cells[k]);
            (k, sel, status)
        })
        .collect();
    field.spot_checks = checks.len();
    for (k, sel, status) in checks {
        if sel.is_some() && sel != cells[k].chosen {
            field.inconsistencies.push(cells[k].z);
            cells[k].chosen = sel;
            cells[k].status = status;
        }
    }
    field.cells = cells;
    field
}
