//! Polynomial powers `P^n = ∏(z-λ_j)^{nα_j}`, the backward heat operator
//! `exp(-(t/2N)∂²)` at finite degree `N = αn`, log-scaled evaluation, and a
//! contour-integral oracle for the evolved polynomial.

use std::fmt::Write as _;

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mp::{horner, max_exponent, MpComplex};

/// Environment variable that overrides the default working precision.
pub const PRECISION_ENV: &str = "HEATFLOW_PRECISION";

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("invalid polynomial spec: {0}")]
    InvalidSpec(String),
    #[error("working precision {bits} bits cannot represent the coefficient range ({reason})")]
    PrecisionExhausted { bits: u32, reason: String },
    #[error("malformed polynomial file: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Deserialize, Serialize)]
struct SpecFile {
    lambdas: Vec<[f64; 2]>,
    alphas: Vec<u32>,
    n: u32,
}

/// Zeros `λ_j`, multiplicities `α_j` and power `n` of `P^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecFile", into = "SpecFile")]
pub struct PolySpec {
    lambdas: Vec<Complex64>,
    alphas: Vec<u32>,
    n: u32,
    delta: f64,
    lambda_max: f64,
}

impl TryFrom<SpecFile> for PolySpec {
    type Error = PolyError;
    fn try_from(f: SpecFile) -> Result<Self, PolyError> {
        let lambdas = f.lambdas.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        PolySpec::new(lambdas, f.alphas, f.n)
    }
}

impl From<PolySpec> for SpecFile {
    fn from(s: PolySpec) -> Self {
        SpecFile { lambdas: s.lambdas.iter().map(|l| [l.re, l.im]).collect(), alphas: s.alphas, n: s.n }
    }
}

impl PolySpec {
    pub fn new(lambdas: Vec<Complex64>, alphas: Vec<u32>, n: u32) -> Result<Self, PolyError> {
        if lambdas.is_empty() {
            return Err(PolyError::InvalidSpec("at least one zero is required".into()));
        }
        if lambdas.len() != alphas.len() {
            return Err(PolyError::InvalidSpec(format!(
                "{} zeros but {} multiplicities",
                lambdas.len(),
                alphas.len()
            )));
        }
        if alphas.iter().any(|&a| a == 0) {
            return Err(PolyError::InvalidSpec("multiplicities must be positive".into()));
        }
        if n == 0 {
            return Err(PolyError::InvalidSpec("power n must be positive".into()));
        }
        if lambdas.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
            return Err(PolyError::InvalidSpec("zeros must be finite".into()));
        }
        let mut delta = f64::INFINITY;
        for i in 0..lambdas.len() {
            for j in i + 1..lambdas.len() {
                delta = delta.min((lambdas[i] - lambdas[j]).norm());
            }
        }
        if delta == 0.0 {
            return Err(PolyError::InvalidSpec("zeros must be pairwise distinct".into()));
        }
        let degree = alphas.iter().map(|&a| a as u64).sum::<u64>() * n as u64;
        if degree > u32::MAX as u64 {
            return Err(PolyError::InvalidSpec("total degree overflows".into()));
        }
        let lambda_max = lambdas.iter().map(|l| l.norm()).fold(0.0, f64::max);
        Ok(Self { lambdas, alphas, n, delta, lambda_max })
    }

    /// Single zero of multiplicity one raised to the `n`-th power: `(z-a)^n`.
    pub fn monomial(a: Complex64, n: u32) -> Self {
        Self::new(vec![a], vec![1], n).expect("single zero is always valid")
    }

    pub fn from_json(text: &str) -> Result<Self, PolyError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serialises")
    }

    pub fn lambdas(&self) -> &[Complex64] {
        &self.lambdas
    }

    pub fn alphas(&self) -> &[u32] {
        &self.alphas
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of distinct zeros `d`.
    pub fn d(&self) -> usize {
        self.lambdas.len()
    }

    /// `α = Σ α_j`.
    pub fn alpha(&self) -> u32 {
        self.alphas.iter().sum()
    }

    /// Total degree `N = αn`.
    pub fn degree(&self) -> u32 {
        self.alpha() * self.n
    }

    /// Minimal pairwise distance of the zeros; `+inf` when `d = 1`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Weights `α_j/α`.
    pub fn weights(&self) -> Vec<f64> {
        let a = self.alpha() as f64;
        self.alphas.iter().map(|&x| x as f64 / a).collect()
    }

    /// Center of mass `(1/α)Σ α_j λ_j`.
    pub fn center_of_mass(&self) -> Complex64 {
        let w = self.weights();
        self.lambdas.iter().zip(&w).map(|(l, w)| l * w).sum()
    }

    /// Same zeros and multiplicities with a different power.
    pub fn with_n(&self, n: u32) -> Result<Self, PolyError> {
        Self::new(self.lambdas.clone(), self.alphas.clone(), n)
    }

    /// Zeros mapped by `λ ↦ rot·λ`.
    pub fn rotated(&self, rot: Complex64) -> Self {
        let lambdas = self.lambdas.iter().map(|l| l * rot).collect();
        Self::new(lambdas, self.alphas.clone(), self.n).expect("rotation keeps zeros distinct")
    }
}

/// Complex heat time `t = |t|e^{iθ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatTime {
    pub t: Complex64,
}

impl HeatTime {
    pub fn new(t: Complex64) -> Self {
        Self { t }
    }

    pub fn real(t: f64) -> Self {
        Self { t: Complex64::new(t, 0.0) }
    }

    pub fn abs(&self) -> f64 {
        self.t.norm()
    }

    pub fn theta(&self) -> f64 {
        self.t.arg()
    }

    pub fn is_zero(&self) -> bool {
        self.t == Complex64::new(0.0, 0.0)
    }

    pub fn to_mp(&self, prec: u32) -> MpComplex {
        MpComplex::from_c64(prec, self.t)
    }

    /// `|t|` in extended precision, computed from the stored components.
    pub fn abs_mp(&self, prec: u32) -> Float {
        self.to_mp(prec).abs()
    }

    /// `e^{iθ/2}` in extended precision.
    pub fn half_phase_mp(&self, prec: u32) -> MpComplex {
        let m = self.to_mp(prec);
        let phi = Float::with_val(prec, m.arg() / 2u32);
        MpComplex::cis(&phi)
    }
}

/// `max(128, ⌈2.5·N⌉)` bits.
pub fn default_precision(degree: u32) -> u32 {
    128u32.max((2.5 * degree as f64).ceil() as u32)
}

/// Explicit request, then `HEATFLOW_PRECISION`, then [`default_precision`].
pub fn resolve_precision(explicit: Option<u32>, degree: u32) -> u32 {
    if let Some(p) = explicit {
        return p;
    }
    if let Some(p) = std::env::var(PRECISION_ENV).ok().and_then(|v| v.trim().parse::<u32>().ok()) {
        return p;
    }
    default_precision(degree)
}

/// Ascending coefficient vector in MPFR complex arithmetic.
///
/// Each coefficient carries its own binary exponent, which is what keeps the
/// `exp(c·N)` dynamic range of `P^n` representable.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledCoeffPoly {
    coeffs: Vec<MpComplex>,
}

impl ScaledCoeffPoly {
    /// Builds from ascending coefficients; the leading one must be nonzero.
    pub fn from_coeffs(coeffs: Vec<MpComplex>) -> Result<Self, PolyError> {
        match coeffs.last() {
            None => Err(PolyError::InvalidSpec("empty coefficient vector".into())),
            Some(c) if c.is_zero() => Err(PolyError::InvalidSpec("leading coefficient is zero".into())),
            Some(_) => {
                let p = Self { coeffs };
                p.check_range()?;
                Ok(p)
            }
        }
    }

    pub fn from_c64(prec: u32, coeffs: &[Complex64]) -> Result<Self, PolyError> {
        Self::from_coeffs(coeffs.iter().map(|&c| MpComplex::from_c64(prec, c)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn prec(&self) -> u32 {
        self.coeffs[0].prec()
    }

    pub fn coeffs(&self) -> &[MpComplex] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &MpComplex {
        &self.coeffs[k]
    }

    pub fn leading(&self) -> &MpComplex {
        self.coeffs.last().expect("nonempty")
    }

    /// `ln|c_k|`, `-inf` for a zero coefficient.
    pub fn log_modulus(&self, k: usize) -> f64 {
        self.coeffs[k].ln_abs()
    }

    /// Unit phase of `c_k` (`1` for a zero coefficient).
    pub fn phase(&self, k: usize) -> Complex64 {
        self.coeffs[k].phase()
    }

    pub fn to_c64(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| c.to_c64()).collect()
    }

    /// Coefficients rounded to another precision.
    pub fn with_prec(&self, prec: u32) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c.with_prec(prec)).collect() }
    }

    /// Rows `k,log_modulus,phase_re,phase_im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,log_modulus,phase_re,phase_im\n");
        for k in 0..self.coeffs.len() {
            let ph = self.phase(k);
            let _ = writeln!(out, "{},{:.17e},{:.17e},{:.17e}", k, self.log_modulus(k), ph.re, ph.im);
        }
        out
    }

    fn check_range(&self) -> Result<(), PolyError> {
        let limit = max_exponent() / 2;
        for c in &self.coeffs {
            if !c.is_finite() {
                return Err(PolyError::PrecisionExhausted { bits: self.prec(), reason: "non-finite coefficient".into() });
            }
            for part in [&c.re, &c.im] {
                if let Some(e) = part.get_exp() {
                    if (e as i64).abs() > limit {
                        return Err(PolyError::PrecisionExhausted {
                            bits: self.prec(),
                            reason: format!("binary exponent {e} near the representable limit"),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Coefficients of `∏(z-λ_j)^{nα_j}`.
pub fn expand_power(spec: &PolySpec, prec: u32) -> Result<ScaledCoeffPoly, PolyError> {
    let lambdas: Vec<MpComplex> = spec.lambdas().iter().map(|&l| MpComplex::from_c64(prec, l)).collect();
    let mults: Vec<u32> = spec.alphas().iter().map(|a| a * spec.n()).collect();
    expand_power_with(&lambdas, &mults, &MpComplex::one(prec))
}

/// Coefficients of `lead · ∏(z-λ_j)^{m_j}` for extended-precision zeros.
pub fn expand_power_with(
    lambdas: &[MpComplex],
    mults: &[u32],
    lead: &MpComplex,
) -> Result<ScaledCoeffPoly, PolyError> {
    let prec = lead.prec();
    if prec < 16 {
        return Err(PolyError::PrecisionExhausted { bits: prec, reason: "fewer than 16 bits".into() });
    }
    let mut acc = vec![lead.clone()];
    for (lam, &m) in lambdas.iter().zip(mults) {
        let factor = binomial_factor(lam, m, prec);
        acc = convolve(&acc, &factor);
    }
    ScaledCoeffPoly::from_coeffs(acc)
}

/// Ascending coefficients of `(z-λ)^m`.
fn binomial_factor(lam: &MpComplex, m: u32, prec: u32) -> Vec<MpComplex> {
    let m = m as usize;
    let neg = lam.neg().with_prec(prec);
    let mut out = vec![MpComplex::zero(prec); m + 1];
    out[m] = MpComplex::one(prec);
    for k in (0..m).rev() {
        let ratio = Float::with_val(prec, (k + 1) as u64) / Float::with_val(prec, (m - k) as u64);
        out[k] = out[k + 1].mul(&neg).mul_real(&ratio);
    }
    out
}

fn convolve(a: &[MpComplex], b: &[MpComplex]) -> Vec<MpComplex> {
    let prec = a[0].prec();
    let mut out = vec![MpComplex::zero(prec); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if !y.is_zero() {
                out[i + j].add_mul(x, y);
            }
        }
    }
    out
}

/// `exp(-(t/2N)∂²)p` with `N = alpha_n`, via the scaled Hermite basis
/// `H_m(z) = s^{m/2}He_m(z/√s)`, `s = t/N`, built from
/// `H_{m+1} = zH_m - m s H_{m-1}`.
///
/// `alpha_n` is normally the degree of `p`; a different value decouples the
/// heat scale from the degree.
pub fn heat_evolve(p: &ScaledCoeffPoly, t: HeatTime, alpha_n: u32) -> Result<ScaledCoeffPoly, PolyError> {
    heat_evolve_mp(p, &t.to_mp(p.prec()), alpha_n)
}

/// [`heat_evolve`] with the time given in extended precision.
pub fn heat_evolve_mp(p: &ScaledCoeffPoly, t: &MpComplex, alpha_n: u32) -> Result<ScaledCoeffPoly, PolyError> {
    let deg = p.degree();
    if deg == 0 {
        return Ok(p.clone());
    }
    if alpha_n == 0 {
        return Err(PolyError::InvalidSpec("heat scale degree must be positive".into()));
    }
    let prec = p.prec();
    let s = t.with_prec(prec).div_real(&Float::with_val(prec, alpha_n));
    let mut out = vec![MpComplex::zero(prec); deg + 1];
    let mut prev: Vec<MpComplex> = vec![MpComplex::one(prec)];
    let mut cur: Vec<MpComplex> = vec![MpComplex::zero(prec), MpComplex::one(prec)];
    out[0] = p.coeff(0).clone();
    for (j, h) in cur.iter().enumerate() {
        out[j].add_mul(p.coeff(1), h);
    }
    for m in 1..deg {
        // H_{m+1} = z H_m - m s H_{m-1}; only entries of parity m+1 are nonzero.
        let ms = s.mul_real(&Float::with_val(prec, m as u64));
        let mut next = vec![MpComplex::zero(prec); m + 2];
        for j in ((m + 1) % 2..=m + 1).step_by(2) {
            let mut v = if j >= 1 { cur[j - 1].clone() } else { MpComplex::zero(prec) };
            if j < prev.len() {
                v = v.sub(&ms.mul(&prev[j]));
            }
            next[j] = v;
        }
        let c = p.coeff(m + 1);
        if !c.is_zero() {
            for j in ((m + 1) % 2..=m + 1).step_by(2) {
                out[j].add_mul(c, &next[j]);
            }
        }
        prev = cur;
        cur = next;
    }
    ScaledCoeffPoly::from_coeffs(out)
}

/// Same operator through the terminating series
/// `c'_j = Σ_k c_{j+2k} (j+2k)!/(k! j!) (-s/2)^k`.
pub fn heat_evolve_series(p: &ScaledCoeffPoly, t: HeatTime, alpha_n: u32) -> Result<ScaledCoeffPoly, PolyError> {
    let deg = p.degree();
    if deg == 0 {
        return Ok(p.clone());
    }
    if alpha_n == 0 {
        return Err(PolyError::InvalidSpec("heat scale degree must be positive".into()));
    }
    let prec = p.prec();
    let half_s = t.to_mp(prec).div_real(&Float::with_val(prec, 2 * alpha_n as u64)).neg();
    let mut out = Vec::with_capacity(deg + 1);
    for j in 0..=deg {
        let mut acc = p.coeff(j).clone();
        let mut w = MpComplex::one(prec);
        let mut k = 1usize;
        while j + 2 * k <= deg {
            let num = Float::with_val(prec, ((j + 2 * k) * (j + 2 * k - 1)) as u64);
            w = w.mul(&half_s).mul_real(&Float::with_val(prec, num / k as u64));
            acc.add_mul(p.coeff(j + 2 * k), &w);
            k += 1;
        }
        out.push(acc);
    }
    ScaledCoeffPoly::from_coeffs(out)
}

/// `(ln|p(z)|, p(z)/|p(z)|)`; the modulus is `-inf` only for an exact zero.
pub fn eval_log(p: &ScaledCoeffPoly, z: Complex64) -> (f64, Complex64) {
    eval_log_mp(p, &MpComplex::from_c64(p.prec(), z))
}

pub fn eval_log_mp(p: &ScaledCoeffPoly, z: &MpComplex) -> (f64, Complex64) {
    let v = horner(p.coeffs(), &z.with_prec(p.prec()));
    (v.ln_abs(), v.phase())
}

/// Tuning for [`contour_eval`].
#[derive(Clone, Debug)]
pub struct QuadParams {
    /// Target relative accuracy `ε`.
    pub tol: f64,
    /// Half-width of the truncated integration range on `iR`; derived when `None`.
    pub truncation: Option<f64>,
    /// Maximum number of step halvings of the tanh-sinh rule.
    pub max_level: u32,
    /// Initial working precision in bits.
    pub base_prec: u32,
    /// Degree that fixes the heat scale `s = t/N`; defaults to the spec degree.
    pub scale_degree: Option<u32>,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self { tol: 1e-12, truncation: None, max_level: 14, base_prec: 128, scale_degree: None }
    }
}

/// Result of [`contour_eval`].
#[derive(Clone, Debug)]
pub struct ContourValue {
    pub log_modulus: f64,
    pub phase: Complex64,
    pub value: MpComplex,
    /// `false` when successive refinements never agreed to `tol`.
    pub converged: bool,
    pub level: u32,
    pub nodes: usize,
    pub precision: u32,
    /// `log2` of (integrand mass)/(result), the cancellation absorbed by extra bits.
    pub cancellation_bits: f64,
    pub truncation: f64,
}

/// `(-i/√(2πs)) ∫_{iR} exp((z-u)²/(2s)) P^n(u) du`, `s = t/N`, by tanh-sinh
/// quadrature on a truncated segment of `iR` in MPFR arithmetic.
///
/// Working precision is raised until it covers the cancellation of the
/// oscillating integrand.
pub fn contour_eval(spec: &PolySpec, t: f64, z: Complex64, quad: &QuadParams) -> Result<ContourValue, PolyError> {
    if !(t > 0.0) {
        return Err(PolyError::InvalidSpec("contour representation needs t > 0".into()));
    }
    let n_deg = quad.scale_degree.unwrap_or(spec.degree()) as f64;
    let s = t / n_deg;
    let mut prec = quad.base_prec.max(64) + 32;
    let mut loss_bits = 0.0f64;
    let mut last = None;
    for _ in 0..6 {
        let half_width = quad.truncation.unwrap_or_else(|| truncation(spec, s, t, z, quad.tol, loss_bits));
        let r = tanh_sinh(spec, s, z, half_width, quad, prec);
        let needed = r.cancellation_bits + (1.0 / quad.tol).log2() + 40.0;
        let done = needed <= prec as f64 && r.cancellation_bits <= loss_bits + 8.0;
        loss_bits = loss_bits.max(r.cancellation_bits);
        let raise = needed.ceil() as u32 + 16;
        last = Some(r);
        if done {
            break;
        }
        prec = prec.max(raise);
    }
    Ok(last.expect("at least one pass"))
}

fn truncation(spec: &PolySpec, s: f64, t: f64, z: Complex64, tol: f64, loss_bits: f64) -> f64 {
    let base = z.im.abs() + spec.lambda_max();
    let deg = spec.degree() as f64;
    let mut w = (2.0 * s).sqrt();
    for _ in 0..4 {
        let nats = (1.0 / tol).ln()
            + loss_bits * std::f64::consts::LN_2
            + deg * (2.0 + z.norm() + spec.lambda_max() + t.sqrt() + w).ln()
            + 10.0;
        w = (2.0 * s * nats).sqrt();
    }
    base + w
}

fn integrand(spec: &PolySpec, s: &Float, z: &MpComplex, y: &Float, prec: u32) -> MpComplex {
    // u = iy; exp((z-iy)^2/(2s)) P(iy) / sqrt(2πs)
    let iy = MpComplex::from_parts(Float::new(prec), y.clone());
    let d = z.sub(&iy);
    let two_s = Float::with_val(prec, s * 2u32);
    let e = d.mul(&d).div_real(&two_s).exp();
    let mut p = MpComplex::one(prec);
    for (lam, &a) in spec.lambdas().iter().zip(spec.alphas()) {
        let f = iy.sub(&MpComplex::from_c64(prec, *lam));
        p = p.mul(&f.powu(a * spec.n()));
    }
    e.mul(&p)
}

fn tanh_sinh(spec: &PolySpec, s: f64, z: Complex64, half_width: f64, quad: &QuadParams, prec: u32) -> ContourValue {
    let sm = Float::with_val(prec, s);
    let zm = MpComplex::from_c64(prec, z);
    let r = Float::with_val(prec, half_width);
    let pi_half = Float::with_val(prec, rug::float::Constant::Pi) / 2u32;
    let tau_max = 4.5f64;
    // node at τ: y = r tanh(π/2 sinh τ), weight r (π/2) cosh τ / cosh²(π/2 sinh τ)
    let node = |tau: f64| -> (MpComplex, Float) {
        let tau = Float::with_val(prec, tau);
        let sh = Float::with_val(prec, tau.sinh_ref());
        let ch = Float::with_val(prec, tau.cosh_ref());
        let arg = Float::with_val(prec, &pi_half * &sh);
        let y = Float::with_val(prec, &r * Float::with_val(prec, arg.tanh_ref()));
        let c2 = Float::with_val(prec, arg.cosh_ref()).square();
        let w = Float::with_val(prec, &r * &pi_half) * ch / c2;
        (integrand(spec, &sm, &zm, &y, prec), w)
    };
    let mut h = 0.5f64;
    let mut sum = MpComplex::zero(prec);
    let mut mass = Float::new(prec);
    let mut nodes = 0usize;
    let mut k: i64 = 0;
    while (k as f64) * h <= tau_max {
        let taus: Vec<f64> = if k == 0 { vec![0.0] } else { vec![k as f64 * h, -(k as f64) * h] };
        for tau in taus {
            let (f, w) = node(tau);
            mass += Float::with_val(prec, f.abs() * &w);
            sum.add_assign(&f.mul_real(&w));
            nodes += 1;
        }
        k += 1;
    }
    let mut prev = sum.mul_f64(h);
    let mut converged = false;
    let mut level = 0;
    while level < quad.max_level {
        level += 1;
        h /= 2.0;
        let mut k: i64 = 1;
        while (k as f64) * h <= tau_max {
            for tau in [k as f64 * h, -(k as f64) * h] {
                let (f, w) = node(tau);
                mass += Float::with_val(prec, f.abs() * &w);
                sum.add_assign(&f.mul_real(&w));
                nodes += 1;
            }
            k += 2;
        }
        let cur = sum.mul_f64(h);
        let diff = cur.sub(&prev).abs();
        let scale = cur.abs();
        prev = cur;
        if level >= 3 && diff <= Float::with_val(prec, &scale * quad.tol) {
            converged = true;
            break;
        }
    }
    let norm = Float::with_val(prec, Float::with_val(prec, &sm * 2u32) * Float::with_val(prec, rug::float::Constant::Pi))
        .sqrt();
    let value = prev.div_real(&norm);
    let total_mass = Float::with_val(prec, &mass * h) / &norm;
    let cancellation_bits = if value.is_zero() {
        prec as f64
    } else {
        (total_mass.ln().to_f64() - value.ln_abs()).max(0.0) / std::f64::consts::LN_2
    };
    ContourValue {
        log_modulus: value.ln_abs(),
        phase: value.phase(),
        value,
        converged,
        level,
        nodes,
        precision: prec,
        cancellation_bits,
        truncation: half_width,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn approx(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn spec_validation() {
        assert!(PolySpec::new(vec![c(0.0, 0.0), c(0.0, 0.0)], vec![1, 1], 1).is_err());
        assert!(PolySpec::new(vec![c(0.0, 0.0)], vec![0], 1).is_err());
        assert!(PolySpec::new(vec![c(0.0, 0.0)], vec![1], 0).is_err());
        assert!(PolySpec::new(vec![c(0.0, 0.0)], vec![1, 2], 1).is_err());
        let s = PolySpec::new(vec![c(0.0, 1.0), c(0.0, -1.0)], vec![1, 2], 3).unwrap();
        assert_eq!(s.degree(), 9);
        assert_eq!(s.delta(), 2.0);
        assert_eq!(s.lambda_max(), 1.0);
        assert!(approx(s.center_of_mass(), c(0.0, -1.0 / 3.0), 1e-15));
    }

    #[test]
    fn json_round_trip() {
        let s = PolySpec::from_json(r#"{"lambdas":[[0,1],[0,-1]],"alphas":[1,1],"n":60}"#).unwrap();
        assert_eq!(s.degree(), 120);
        assert_eq!(PolySpec::from_json(&s.to_json()).unwrap(), s);
        assert!(PolySpec::from_json(r#"{"lambdas":[[0,1]],"alphas":[1,1],"n":1}"#).is_err());
    }

    #[test]
    fn precision_defaults() {
        assert_eq!(default_precision(10), 128);
        assert_eq!(default_precision(200), 500);
        assert_eq!(resolve_precision(Some(77), 1000), 77);
    }

    #[test]
    fn expand_monomial_and_difference_of_squares() {
        let p = expand_power(&PolySpec::monomial(c(0.0, 0.0), 3), 128).unwrap();
        assert_eq!(p.to_c64(), vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let s = PolySpec::new(vec![c(1.0, 0.0), c(-1.0, 0.0)], vec![1, 1], 1).unwrap();
        assert_eq!(expand_power(&s, 128).unwrap().to_c64(), vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn heat_on_linear_and_square() {
        let p = ScaledCoeffPoly::from_c64(128, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let q = heat_evolve(&p, HeatTime::new(c(3.0, -2.0)), 1).unwrap();
        assert_eq!(q.to_c64(), p.to_c64());
        let p = expand_power(&PolySpec::monomial(c(0.0, 0.0), 2), 128).unwrap();
        let q = heat_evolve(&p, HeatTime::real(1.0), 2).unwrap();
        assert_eq!(q.to_c64(), vec![c(-0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn zero_degree_unchanged() {
        let p = ScaledCoeffPoly::from_c64(128, &[c(2.0, 1.0)]).unwrap();
        assert_eq!(heat_evolve(&p, HeatTime::real(5.0), 3).unwrap(), p);
    }

    #[test]
    fn eval_log_cases() {
        let sq = expand_power(&PolySpec::monomial(c(0.0, 0.0), 2), 128).unwrap();
        let (lm, ph) = eval_log(&sq, c(10.0, 0.0));
        assert!((lm - 2.0 * 10f64.ln()).abs() < 1e-15);
        assert!(approx(ph, c(1.0, 0.0), 1e-15));
        let cube = expand_power(&PolySpec::monomial(c(0.0, 0.0), 3), 128).unwrap();
        let (lm, ph) = eval_log(&cube, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_3));
        assert!(lm.abs() < 1e-15);
        assert!(approx(ph, c(-1.0, 0.0), 1e-15));
        // z² - 1/4 vanishes exactly at the representable point 1/2.
        let q = heat_evolve(&sq, HeatTime::real(0.25), 1).unwrap();
        assert_eq!(q.to_c64()[0], c(-0.25, 0.0));
        assert_eq!(eval_log(&q, c(0.5, 0.0)).0, f64::NEG_INFINITY);
    }

    #[test]
    fn eval_at_rounded_irrational_root_is_at_roundoff() {
        let prec = 200;
        let sq = expand_power(&PolySpec::monomial(c(0.0, 0.0), 2), prec).unwrap();
        let q = heat_evolve(&sq, HeatTime::real(1.0), 2).unwrap();
        let r = Float::with_val(prec, 0.5f64).sqrt();
        let (lm, _) = eval_log_mp(&q, &MpComplex::from_parts(r, Float::new(prec)));
        assert!(lm < -(prec as f64 - 4.0) * std::f64::consts::LN_2);
    }

    #[test]
    fn contour_small_cases() {
        let q = QuadParams::default();
        let v = contour_eval(&PolySpec::monomial(c(0.0, 0.0), 2), 1.0, c(0.0, 0.0), &q).unwrap();
        assert!(v.converged);
        assert!(approx(v.value.to_c64(), c(-0.5, 0.0), 1e-12), "{:?}", v.value.to_c64());
        let v = contour_eval(&PolySpec::monomial(c(0.0, 0.0), 1), 1.0, c(5.0, 0.0), &q).unwrap();
        assert!(approx(v.value.to_c64(), c(5.0, 0.0), 1e-12));
    }

    #[test]
    fn csv_rows() {
        let p = ScaledCoeffPoly::from_c64(64, &[c(0.0, 0.0), c(0.0, -2.0)]).unwrap();
        let csv = p.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,log_modulus,phase_re,phase_im");
        assert!(lines[1].starts_with("0,-inf"));
        assert!(lines[2].starts_with("1,6.93147180559945"));
    }
}
