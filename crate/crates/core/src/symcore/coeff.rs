//! Gaussian-rational coefficients: exact a + b*i with rational a, b.

use num::complex::Complex;
use num::{BigInt, BigRational, One, Signed, Zero};
use std::fmt;

pub type Coeff = Complex<BigRational>;

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn from_int(n: i64) -> Coeff {
    Complex::new(rat(n, 1), BigRational::zero())
}

pub fn from_rat(n: i64, d: i64) -> Coeff {
    Complex::new(rat(n, d), BigRational::zero())
}

pub fn imag_unit() -> Coeff {
    Complex::new(BigRational::zero(), BigRational::one())
}

pub fn conj(c: &Coeff) -> Coeff {
    Complex::new(c.re.clone(), -c.im.clone())
}

pub fn is_zero(c: &Coeff) -> bool {
    c.re.is_zero() && c.im.is_zero()
}

pub fn to_f64_pair(c: &Coeff) -> (f64, f64) {
    (rational_to_f64(&c.re), rational_to_f64(&c.im))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let n = r.numer();
    let d = r.denom();
    // Exact for the small integers of the reference displays; falls back to
    // string parsing for large values.
    let nf: f64 = n.to_string().parse().unwrap_or(f64::NAN);
    let df: f64 = d.to_string().parse().unwrap_or(f64::NAN);
    nf / df
}

fn fmt_rational(r: &BigRational, out: &mut String) {
    out.push_str(&r.numer().to_string());
    if !r.denom().is_one() {
        out.push('/');
        out.push_str(&r.denom().to_string());
    }
}

/// Canonical coefficient rendering used by the expression grammar:
/// `3`, `-3/2`, `i`, `-2*i`, `(1+2*i)`.
pub struct CoeffDisplay<'a>(pub &'a Coeff);

impl fmt::Display for CoeffDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.0;
        let mut s = String::new();
        if c.im.is_zero() {
            fmt_rational(&c.re, &mut s);
        } else if c.re.is_zero() {
            if c.im.is_one() {
                s.push('i');
            } else if (-c.im.clone()).is_one() {
                s.push_str("-i");
            } else {
                fmt_rational(&c.im, &mut s);
                s.push_str("*i");
            }
        } else {
            s.push('(');
            fmt_rational(&c.re, &mut s);
            if c.im.is_positive() {
                s.push('+');
            }
            fmt_rational(&c.im, &mut s);
            s.push_str("*i)");
        }
        f.write_str(&s)
    }
}
