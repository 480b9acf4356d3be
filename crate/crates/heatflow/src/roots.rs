//! Simultaneous root finding (Aberth–Ehrlich) and the empirical zero measure.

use std::fmt::Write as _;

use num_complex::Complex64;
use rug::{Assign, Float};
use serde::Serialize;
use thiserror::Error;

use crate::mp::{horner, MpComplex};
use crate::polyheat::{PolySpec, ScaledCoeffPoly};

#[derive(Debug, Error)]
pub enum RootError {
    #[error("degree must be at least one")]
    Degree,
    #[error("tolerance must be positive")]
    Tolerance,
    #[error("Aberth iteration did not converge after {iterations} sweeps; unconverged indices {indices:?}")]
    MaxIterations { iterations: usize, indices: Vec<usize> },
    #[error("precision exhausted: {0}")]
    Precision(String),
}

/// Group of computed roots that approximate one multiple (or near-multiple) root.
#[derive(Clone, Debug, Serialize)]
pub struct Cluster {
    pub center: Complex64,
    pub members: Vec<usize>,
    pub multiplicity: usize,
    pub radius: f64,
}

/// Zeros of a polynomial with uniform weights `1/N`.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalMeasure {
    pub points: Vec<Complex64>,
    pub weight: f64,
    /// `ln|p(z_k)|` evaluated with 64 guard bits.
    pub log_residuals: Vec<f64>,
    /// `|p(z_k)| / Σ|c_i||z_k|^i`.
    pub backward_errors: Vec<f64>,
    /// Accept threshold applied to `backward_errors`.
    pub threshold: f64,
    /// Clusters with more than one member.
    pub clusters: Vec<Cluster>,
    pub iterations: usize,
    pub precision: u32,
}

impl EmpiricalMeasure {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> Complex64 {
        self.points.iter().sum::<Complex64>() * self.weight
    }

    /// Rows `re,im,log_residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,log_residual\n");
        for (p, r) in self.points.iter().zip(&self.log_residuals) {
            let _ = writeln!(out, "{:.17e},{:.17e},{:.17e}", p.re, p.im, r);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serialises")
    }
}

/// Options for [`find_all_roots_with`].
#[derive(Clone, Debug, Default)]
pub struct RootOptions {
    pub max_iter: Option<usize>,
    /// Starting points, e.g. the roots at a nearby time.
    pub warm_start: Option<Vec<Complex64>>,
}

/// All roots of `p` with default options.
pub fn find_all_roots(p: &ScaledCoeffPoly, tol: f64) -> Result<EmpiricalMeasure, RootError> {
    find_all_roots_with(p, tol, &RootOptions::default())
}

/// Aberth–Ehrlich iteration in the working precision of `p`.
///
/// `tol` sets the cluster radius `tol^{1/2}`; convergence is judged by the
/// backward error `|p(z)|/Σ|c_i||z|^i < 10(N+1)u`, `u = 2^{1-prec}`.
pub fn find_all_roots_with(p: &ScaledCoeffPoly, tol: f64, opts: &RootOptions) -> Result<EmpiricalMeasure, RootError> {
    let n = p.degree();
    if n == 0 {
        return Err(RootError::Degree);
    }
    if !(tol > 0.0) {
        return Err(RootError::Tolerance);
    }
    let prec = p.prec();
    let unit = 2f64.powi(1 - prec.min(1000) as i32);
    let threshold = 10.0 * (n as f64 + 1.0) * unit;
    let stop = 4.0 * n as f64 * unit;
    let coeffs = p.coeffs();
    let abs_coeffs: Vec<Float> = coeffs.iter().map(|c| c.abs()).collect();

    let mut z: Vec<MpComplex> = match &opts.warm_start {
        Some(w) if w.len() == n => w.iter().map(|&x| MpComplex::from_c64(prec, x)).collect(),
        _ => initial_guess(p),
    };
    let mut frozen = vec![false; n];
    let max_iter = opts.max_iter.unwrap_or(200 + 10 * n);
    let mut ws = Workspace::new(prec);
    let mut iterations = 0;
    while iterations < max_iter && frozen.iter().any(|f| !f) {
        iterations += 1;
        for k in 0..n {
            if frozen[k] {
                continue;
            }
            ws.horner_deriv(coeffs, &z[k]);
            let be = backward_error(&ws.p, &abs_coeffs, &z[k]);
            if ws.p.is_zero() || be < stop {
                frozen[k] = true;
                continue;
            }
            let ratio = ws.p.div(&ws.dp);
            ws.reciprocal_sum(&z, k);
            // w = ratio / (1 - ratio * sum)
            let mut den = MpComplex::one(prec);
            den = den.sub(&ratio.mul(&ws.sum));
            let w = ratio.div(&den);
            if !w.is_finite() {
                z[k] = z[k].add(&MpComplex::from_c64(prec, Complex64::new(1e-3, 1e-3)));
                continue;
            }
            let step = w.abs();
            z[k] = z[k].sub(&w);
            let size = z[k].abs();
            if step <= Float::with_val(prec, &size * (unit * 4.0)) {
                frozen[k] = true;
            }
        }
    }

    // certify with guard bits
    let hp = prec + 64;
    let hcoeffs: Vec<MpComplex> = coeffs.iter().map(|c| c.with_prec(hp)).collect();
    let habs: Vec<Float> = hcoeffs.iter().map(|c| c.abs()).collect();
    let mut log_residuals = Vec::with_capacity(n);
    let mut backward_errors = Vec::with_capacity(n);
    let mut bad = Vec::new();
    for (k, zk) in z.iter().enumerate() {
        let zh = zk.with_prec(hp);
        let v = horner(&hcoeffs, &zh);
        let be = backward_error(&v, &habs, &zh);
        log_residuals.push(v.ln_abs());
        backward_errors.push(be);
        if !(be < threshold) {
            bad.push(k);
        }
    }
    if !bad.is_empty() {
        return Err(RootError::MaxIterations { iterations, indices: bad });
    }
    let clusters = clusters(&z, coeffs, tol);
    Ok(EmpiricalMeasure {
        points: z.iter().map(|x| x.to_c64()).collect(),
        weight: 1.0 / n as f64,
        log_residuals,
        backward_errors,
        threshold,
        clusters,
        iterations,
        precision: prec,
    })
}

struct Workspace {
    p: MpComplex,
    dp: MpComplex,
    sum: MpComplex,
    t1: Float,
    t2: Float,
    t3: Float,
    t4: Float,
}

impl Workspace {
    fn new(prec: u32) -> Self {
        Self {
            p: MpComplex::zero(prec),
            dp: MpComplex::zero(prec),
            sum: MpComplex::zero(prec),
            t1: Float::new(prec),
            t2: Float::new(prec),
            t3: Float::new(prec),
            t4: Float::new(prec),
        }
    }

    /// In-place Horner for `p` and `p'` at `z`.
    fn horner_deriv(&mut self, coeffs: &[MpComplex], z: &MpComplex) {
        self.p.re.assign(0);
        self.p.im.assign(0);
        self.dp.re.assign(0);
        self.dp.im.assign(0);
        for c in coeffs.iter().rev() {
            // dp = dp*z + p
            self.t1.assign(&self.dp.re * &z.re);
            self.t2.assign(&self.dp.im * &z.im);
            self.t3.assign(&self.dp.re * &z.im);
            self.t4.assign(&self.dp.im * &z.re);
            self.dp.re.assign(&self.t1 - &self.t2);
            self.dp.re += &self.p.re;
            self.dp.im.assign(&self.t3 + &self.t4);
            self.dp.im += &self.p.im;
            // p = p*z + c
            self.t1.assign(&self.p.re * &z.re);
            self.t2.assign(&self.p.im * &z.im);
            self.t3.assign(&self.p.re * &z.im);
            self.t4.assign(&self.p.im * &z.re);
            self.p.re.assign(&self.t1 - &self.t2);
            self.p.re += &c.re;
            self.p.im.assign(&self.t3 + &self.t4);
            self.p.im += &c.im;
        }
    }

    /// `Σ_{j≠k} 1/(z_k - z_j)` into `self.sum`.
    fn reciprocal_sum(&mut self, z: &[MpComplex], k: usize) {
        self.sum.re.assign(0);
        self.sum.im.assign(0);
        let zk = &z[k];
        for (j, zj) in z.iter().enumerate() {
            if j == k {
                continue;
            }
            self.t1.assign(&zk.re - &zj.re);
            self.t2.assign(&zk.im - &zj.im);
            self.t3.assign(self.t1.square_ref());
            self.t4.assign(self.t2.square_ref());
            self.t3 += &self.t4;
            if self.t3.is_zero() {
                continue;
            }
            self.t1 /= &self.t3;
            self.t2 /= &self.t3;
            self.sum.re += &self.t1;
            self.sum.im -= &self.t2;
        }
    }
}

fn backward_error(value: &MpComplex, abs_coeffs: &[Float], z: &MpComplex) -> f64 {
    let prec = 64;
    let r = Float::with_val(prec, z.abs());
    let mut s = Float::new(prec);
    for a in abs_coeffs.iter().rev() {
        s *= &r;
        s += a;
    }
    if s.is_zero() {
        return 0.0;
    }
    let v = Float::with_val(prec, value.abs());
    Float::with_val(prec, v / s).to_f64()
}

/// Starting points on circles read off the Newton polygon of `p(z + c)`,
/// `c` the root centroid.
fn initial_guess(p: &ScaledCoeffPoly) -> Vec<MpComplex> {
    let n = p.degree();
    let prec = p.prec();
    let coeffs = p.coeffs();
    let centroid = coeffs[n - 1].div(&coeffs[n]).div_real(&Float::with_val(prec, n as u64)).neg();
    let shifted = taylor_shift(coeffs, &centroid);
    let logs: Vec<f64> = shifted.iter().map(|c| c.ln_abs()).collect();
    let hull = upper_hull(&logs);
    let mut out = Vec::with_capacity(n);
    let golden = 2.399_963_229_728_653;
    for w in hull.windows(2) {
        let (i, j) = (w[0], w[1]);
        let m = j - i;
        let radius = ((logs[i] - logs[j]) / m as f64).exp();
        let radius = if radius.is_finite() && radius > 0.0 { radius } else { 1.0 };
        for q in 0..m {
            let ang = 2.0 * std::f64::consts::PI * q as f64 / m as f64 + golden * out.len() as f64 / n as f64 + 0.4;
            let pt = MpComplex::from_c64(prec, Complex64::from_polar(radius, ang));
            out.push(pt.add(&centroid));
        }
    }
    out
}

/// Coefficients of `p(z + c)`.
fn taylor_shift(coeffs: &[MpComplex], c: &MpComplex) -> Vec<MpComplex> {
    let mut a: Vec<MpComplex> = coeffs.to_vec();
    let n = a.len() - 1;
    if c.is_zero() {
        return a;
    }
    for i in 0..n {
        for k in (i..n).rev() {
            let t = a[k + 1].mul(c);
            a[k].add_assign(&t);
        }
    }
    a
}

/// Indices of the upper convex hull of `(k, v_k)`, skipping `-inf` entries.
fn upper_hull(v: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for k in 0..v.len() {
        if !v[k].is_finite() {
            continue;
        }
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b as f64 - a as f64) * (v[k] - v[a]) - (v[b] - v[a]) * (k as f64 - a as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    // zero low coefficients mean roots at the origin of the shifted polynomial
    if hull[0] > 0 {
        let mut h = vec![0];
        h.extend(hull);
        return h;
    }
    hull
}

fn clusters(z: &[MpComplex], coeffs: &[MpComplex], tol: f64) -> Vec<Cluster> {
    let n = z.len();
    let lead = coeffs[n].ln_abs();
    let near = tol.sqrt();
    // Weierstrass inclusion radii N|W_k|
    let mut radius = vec![0.0; n];
    for k in 0..n {
        let pk = horner(coeffs, &z[k]).ln_abs();
        if pk == f64::NEG_INFINITY {
            continue;
        }
        let mut s = 0.0;
        for j in 0..n {
            if j != k {
                s += z[k].sub(&z[j]).ln_abs();
            }
        }
        radius[k] = (n as f64).ln().exp() * (pk - lead - s).exp();
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let pts: Vec<Complex64> = z.iter().map(|x| x.to_c64()).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d = z[i].sub(&z[j]).abs().to_f64();
            if d < near || d <= radius[i] + radius[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups
        .into_values()
        .filter(|g| g.len() > 1)
        .map(|members| {
            let center = members.iter().map(|&i| pts[i]).sum::<Complex64>() / members.len() as f64;
            let radius = members.iter().map(|&i| (pts[i] - center).norm()).fold(0.0, f64::max);
            Cluster { center, multiplicity: members.len(), members, radius }
        })
        .collect()
}

/// Roots of a low-degree polynomial in double precision (ascending
/// coefficients), Aberth iteration followed by Newton polishing.
pub fn roots_f64(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = coeffs.to_vec();
    while c.len() > 1 && c.last().map(|x| x.norm() == 0.0).unwrap_or(false) {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let a: Vec<Complex64> = c.iter().map(|x| x / lead).collect();
    if n == 1 {
        return vec![-a[0]];
    }
    let centroid = -a[n - 1] / n as f64;
    let mut radius: f64 = 0.0;
    for k in 1..=n {
        radius = radius.max(a[n - k].norm().powf(1.0 / k as f64));
    }
    let radius = if radius > 0.0 { radius } else { 1.0 };
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| centroid + Complex64::from_polar(radius, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    let eval = |x: Complex64| {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for ak in a.iter().rev() {
            dp = dp * x + p;
            p = p * x + ak;
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = eval(z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let s: Complex64 = (0..n).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            if w.re.is_finite() && w.im.is_finite() {
                z[k] -= w;
                moved = moved.max(w.norm() / (1.0 + z[k].norm()));
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
    for zk in z.iter_mut() {
        let mut best = eval(*zk).0.norm();
        for _ in 0..3 {
            let (p, dp) = eval(*zk);
            if dp.norm() == 0.0 {
                break;
            }
            let cand = *zk - p / dp;
            let v = eval(cand).0.norm();
            if v < best {
                best = v;
                *zk = cand;
            } else {
                break;
            }
        }
    }
    z
}

/// Outcome of [`support_bound_check`].
#[derive(Clone, Debug, Serialize)]
pub struct SupportBoundReport {
    pub radius: f64,
    pub violations: Vec<usize>,
    pub max_excess: f64,
    pub disjoint: bool,
    pub counts: Vec<usize>,
    pub expected: Vec<usize>,
    pub pass: bool,
}

/// Every zero must lie in `∪_j B_r(λ_j)`, `r = 2√t·√(1+1/(2nα))`; for
/// disjoint disks each must hold exactly `α_j n` zeros.
pub fn support_bound_check(em: &EmpiricalMeasure, spec: &PolySpec, t: f64) -> SupportBoundReport {
    let na = spec.degree() as f64;
    let radius = 2.0 * t.sqrt() * (1.0 + 1.0 / (2.0 * na)).sqrt();
    let lam = spec.lambdas();
    let disjoint = spec.d() == 1 || spec.delta() > 2.0 * radius;
    let mut counts = vec![0usize; lam.len()];
    let mut violations = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for (k, z) in em.points.iter().enumerate() {
        let (j, dist) = lam
            .iter()
            .enumerate()
            .map(|(j, l)| (j, (z - l).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one zero");
        max_excess = max_excess.max(dist - radius);
        if dist > radius {
            violations.push(k);
        } else {
            counts[j] += 1;
        }
    }
    let expected: Vec<usize> = spec.alphas().iter().map(|&a| (a * spec.n()) as usize).collect();
    let counts_ok = !disjoint || counts == expected;
    SupportBoundReport {
        radius,
        pass: violations.is_empty() && counts_ok,
        violations,
        max_excess,
        disjoint,
        counts,
        expected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyheat::{expand_power, heat_evolve, HeatTime};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn square_root_pair() {
        let p = ScaledCoeffPoly::from_c64(128, &[c(-0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let em = find_all_roots(&p, 1e-20).unwrap();
        let r = sorted(em.points.clone());
        let h = 0.5f64.sqrt();
        assert!((r[0] - c(-h, 0.0)).norm() < 1e-15 && (r[1] - c(h, 0.0)).norm() < 1e-15);
        assert!(em.clusters.is_empty());
        assert_eq!(em.weight, 0.5);
    }

    #[test]
    fn multiple_root_is_clustered() {
        let a = c(0.3, -0.7);
        let m = 5;
        let tol = 1e-20;
        let p = expand_power(&PolySpec::monomial(a, m), 128).unwrap();
        let em = find_all_roots(&p, tol).unwrap();
        assert_eq!(em.clusters.len(), 1);
        assert_eq!(em.clusters[0].multiplicity, m as usize);
        // roots of a perturbed m-fold root spread like u^{1/m}
        let spread = 2f64.powf(-127.0 / m as f64) * 10.0;
        for z in &em.points {
            assert!((z - a).norm() < spread.max(tol.powf(1.0 / m as f64)));
        }
    }

    #[test]
    fn expanded_spec_recovers_zeros_as_clusters() {
        let s = PolySpec::new(vec![c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)], vec![1, 2, 1], 2).unwrap();
        let p = expand_power(&s, 160).unwrap();
        let em = find_all_roots(&p, 1e-12).unwrap();
        let mut mult: Vec<(Complex64, usize)> =
            em.clusters.iter().map(|cl| (cl.center, cl.multiplicity)).collect();
        mult.sort_by(|a, b| a.0.im.total_cmp(&b.0.im).then(a.0.re.total_cmp(&b.0.re)));
        assert_eq!(mult.len(), 3);
        assert_eq!(mult[0].1, 4);
        assert!((mult[0].0 - c(0.0, -1.0)).norm() < 1e-6);
        assert_eq!(mult[1].1, 2);
        assert_eq!(mult[2].1, 2);
    }

    #[test]
    fn hermite_zeros_inside_bound() {
        let s = PolySpec::monomial(c(0.0, 0.0), 10);
        let p = heat_evolve(&expand_power(&s, 128).unwrap(), HeatTime::real(1.0), 10).unwrap();
        let em = find_all_roots(&p, 1e-20).unwrap();
        let rep = support_bound_check(&em, &s, 1.0);
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.counts, vec![10]);
        assert!((rep.radius - 2.0 * 1.05f64.sqrt()).abs() < 1e-15);
        for z in &em.points {
            assert!(z.im.abs() < 1e-12);
        }
    }

    #[test]
    fn degree_one_root_at_lambda() {
        let s = PolySpec::monomial(c(1.5, -2.0), 1);
        let p = heat_evolve(&expand_power(&s, 128).unwrap(), HeatTime::real(0.7), 1).unwrap();
        let em = find_all_roots(&p, 1e-20).unwrap();
        assert_eq!(em.points, vec![c(1.5, -2.0)]);
        let rep = support_bound_check(&em, &s, 0.7);
        assert!(rep.pass && rep.max_excess < 0.0);
    }

    #[test]
    fn csv_header() {
        let p = ScaledCoeffPoly::from_c64(128, &[c(-1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let em = find_all_roots(&p, 1e-20).unwrap();
        assert!(em.to_csv().starts_with("re,im,log_residual\n1.0"));
    }

    #[test]
    fn f64_roots_small_degree() {
        // (u-1)(u+2)(u-i)
        let r = sorted(roots_f64(&[c(0.0, 2.0), c(-2.0, -1.0), c(1.0, -1.0), c(1.0, 0.0)]));
        let w = sorted(vec![c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0)]);
        for (a, b) in r.iter().zip(&w) {
            assert!((a - b).norm() < 1e-14, "{r:?}");
        }
        assert_eq!(roots_f64(&[c(2.0, 0.0), c(4.0, 0.0)]), vec![c(-0.5, 0.0)]);
        assert!(roots_f64(&[c(3.0, 0.0)]).is_empty());
    }

    #[test]
    fn upper_hull_basic() {
        assert_eq!(upper_hull(&[0.0, -5.0, 0.0]), vec![0, 2]);
        assert_eq!(upper_hull(&[f64::NEG_INFINITY, 1.0, 0.0]), vec![0, 1, 2]);
    }
}
