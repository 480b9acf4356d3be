//! Complex numbers over MPFR floats.
//!
//! The float feature of `rug` is the only MPFR surface linked here, so the
//! complex layer is a pair of [`Float`]s with the handful of operations the
//! polynomial code needs.

use num_complex::Complex64;
use rug::float::Round;
use rug::{Assign, Float};

/// Largest binary exponent MPFR will represent with the current settings.
pub fn max_exponent() -> i64 {
    // SAFETY: reads a process-global MPFR setting, no pointers involved.
    unsafe { gmp_mpfr_sys::mpfr::get_emax() as i64 }
}

/// Complex number with MPFR real and imaginary parts of a common precision.
#[derive(Clone, Debug, PartialEq)]
pub struct MpComplex {
    pub re: Float,
    pub im: Float,
}

impl MpComplex {
    pub fn zero(prec: u32) -> Self {
        Self { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn one(prec: u32) -> Self {
        Self { re: Float::with_val(prec, 1), im: Float::new(prec) }
    }

    pub fn from_c64(prec: u32, z: Complex64) -> Self {
        Self { re: Float::with_val(prec, z.re), im: Float::with_val(prec, z.im) }
    }

    pub fn from_parts(re: Float, im: Float) -> Self {
        Self { re, im }
    }

    pub fn real(prec: u32, x: f64) -> Self {
        Self { re: Float::with_val(prec, x), im: Float::new(prec) }
    }

    /// `e^{iφ}` with φ given in extended precision.
    pub fn cis(phi: &Float) -> Self {
        let prec = phi.prec();
        let (s, c) = phi.clone().sin_cos(Float::new(prec));
        Self { re: c, im: s }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        Self { re: Float::with_val(prec, &self.re), im: Float::with_val(prec, &self.im) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn add(&self, o: &Self) -> Self {
        let p = self.prec();
        Self { re: Float::with_val(p, &self.re + &o.re), im: Float::with_val(p, &self.im + &o.im) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let p = self.prec();
        Self { re: Float::with_val(p, &self.re - &o.re), im: Float::with_val(p, &self.im - &o.im) }
    }

    pub fn neg(&self) -> Self {
        Self { re: -self.re.clone(), im: -self.im.clone() }
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn add_assign(&mut self, o: &Self) {
        self.re += &o.re;
        self.im += &o.im;
    }

    pub fn mul(&self, o: &Self) -> Self {
        let p = self.prec();
        let ac = Float::with_val(p, &self.re * &o.re);
        let bd = Float::with_val(p, &self.im * &o.im);
        let ad = Float::with_val(p, &self.re * &o.im);
        let bc = Float::with_val(p, &self.im * &o.re);
        Self { re: ac - bd, im: ad + bc }
    }

    /// `self += a * b`.
    pub fn add_mul(&mut self, a: &Self, b: &Self) {
        let p = self.prec();
        let mut tmp = Float::new(p);
        tmp.assign(&a.re * &b.re);
        self.re += &tmp;
        tmp.assign(&a.im * &b.im);
        self.re -= &tmp;
        tmp.assign(&a.re * &b.im);
        self.im += &tmp;
        tmp.assign(&a.im * &b.re);
        self.im += &tmp;
    }

    pub fn mul_real(&self, x: &Float) -> Self {
        let p = self.prec();
        Self { re: Float::with_val(p, &self.re * x), im: Float::with_val(p, &self.im * x) }
    }

    pub fn mul_f64(&self, x: f64) -> Self {
        let p = self.prec();
        Self { re: Float::with_val(p, &self.re * x), im: Float::with_val(p, &self.im * x) }
    }

    pub fn div_real(&self, x: &Float) -> Self {
        let p = self.prec();
        Self { re: Float::with_val(p, &self.re / x), im: Float::with_val(p, &self.im / x) }
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        let a = Float::with_val(p, self.re.square_ref());
        let b = Float::with_val(p, self.im.square_ref());
        a + b
    }

    pub fn abs(&self) -> Float {
        self.re.clone().hypot(&self.im)
    }

    pub fn recip(&self) -> Self {
        let n = self.norm_sqr();
        Self { re: Float::with_val(self.prec(), &self.re / &n), im: -Float::with_val(self.prec(), &self.im / &n) }
    }

    /// Division scaled through the larger component to avoid overflow in `|o|²`.
    pub fn div(&self, o: &Self) -> Self {
        let p = self.prec();
        if Float::with_val(p, o.re.abs_ref()) >= Float::with_val(p, o.im.abs_ref()) {
            let r = Float::with_val(p, &o.im / &o.re);
            let den = Float::with_val(p, &o.re + Float::with_val(p, &r * &o.im));
            let re = Float::with_val(p, &self.re + Float::with_val(p, &self.im * &r)) / &den;
            let im = Float::with_val(p, &self.im - Float::with_val(p, &self.re * &r)) / &den;
            Self { re, im }
        } else {
            let r = Float::with_val(p, &o.re / &o.im);
            let den = Float::with_val(p, &o.im + Float::with_val(p, &r * &o.re));
            let re = Float::with_val(p, Float::with_val(p, &self.re * &r) + &self.im) / &den;
            let im = Float::with_val(p, Float::with_val(p, &self.im * &r) - &self.re) / &den;
            Self { re, im }
        }
    }

    pub fn powu(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.prec());
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let m = self.re.clone().exp();
        let (s, c) = self.im.clone().sin_cos(Float::new(p));
        Self { re: Float::with_val(p, &m * &c), im: Float::with_val(p, &m * &s) }
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        let p = self.prec();
        if self.is_zero() {
            return Self::zero(p);
        }
        let r = self.abs();
        let re_abs = Float::with_val(p, self.re.abs_ref());
        let half = Float::with_val(p, Float::with_val(p, &r + &re_abs) / 2u32).sqrt();
        if self.re >= 0 {
            let im = Float::with_val(p, &self.im / Float::with_val(p, &half * 2u32));
            Self { re: half, im }
        } else {
            let re = Float::with_val(p, self.im.abs_ref()) / Float::with_val(p, &half * 2u32);
            let im = if self.im >= 0 { half } else { -half };
            Self { re, im }
        }
    }

    /// Natural log of the modulus as `f64`; `-inf` only for an exact zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.abs().ln().to_f64()
    }

    /// `ln|z|` in working precision.
    pub fn ln_abs_mp(&self) -> Float {
        self.abs().ln()
    }

    /// Unit phase `z/|z|` as `f64`; `1` for zero.
    pub fn phase(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(1.0, 0.0);
        }
        let r = self.abs();
        let re = Float::with_val(self.prec(), &self.re / &r).to_f64_round(Round::Nearest);
        let im = Float::with_val(self.prec(), &self.im / &r).to_f64_round(Round::Nearest);
        Complex64::new(re, im)
    }

    pub fn arg(&self) -> Float {
        self.im.clone().atan2(&self.re)
    }
}

/// Horner evaluation of ascending coefficients at `z`.
pub fn horner(coeffs: &[MpComplex], z: &MpComplex) -> MpComplex {
    let prec = z.prec();
    let mut acc = MpComplex::zero(prec);
    for c in coeffs.iter().rev() {
        acc = acc.mul(z);
        acc.add_assign(c);
    }
    acc
}

/// Horner evaluation returning `(p(z), p'(z))`.
pub fn horner_with_derivative(coeffs: &[MpComplex], z: &MpComplex) -> (MpComplex, MpComplex) {
    let prec = z.prec();
    let mut p = MpComplex::zero(prec);
    let mut dp = MpComplex::zero(prec);
    for c in coeffs.iter().rev() {
        dp = dp.mul(z);
        dp.add_assign(&p);
        p = p.mul(z);
        p.add_assign(c);
    }
    (p, dp)
}
