//! Exact multivariate polynomials over the symbol alphabet.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::complex::Complex;
use num::{BigRational, Zero};

use super::alphabet::{Alphabet, DiffRule, Generator, Var};
use super::coeff::{self, Coeff, CoeffDisplay};
use crate::error::{Error, Result};

/// Exponent vector over the alphabet, ordered graded-lexicographically.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct Monomial(pub Vec<u8>);

impl Monomial {
    pub fn unit(len: usize) -> Self {
        Monomial(vec![0; len])
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.checked_add(*b).expect("monomial exponent overflow"))
                .collect(),
        )
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Polynomial with Gaussian-rational coefficients; canonical by
/// construction (no zero coefficients stored, monomials ordered).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DiffPoly {
    alph: Arc<Alphabet>,
    terms: BTreeMap<Monomial, Coeff>,
}

impl DiffPoly {
    pub fn zero(alph: &Arc<Alphabet>) -> Self {
        DiffPoly { alph: alph.clone(), terms: BTreeMap::new() }
    }

    pub fn scalar(alph: &Arc<Alphabet>, c: Coeff) -> Self {
        let mut p = Self::zero(alph);
        if !coeff::is_zero(&c) {
            p.terms.insert(Monomial::unit(alph.len()), c);
        }
        p
    }

    pub fn int(alph: &Arc<Alphabet>, n: i64) -> Self {
        Self::scalar(alph, coeff::from_int(n))
    }

    pub fn one(alph: &Arc<Alphabet>) -> Self {
        Self::int(alph, 1)
    }

    pub fn generator(alph: &Arc<Alphabet>, g: Generator) -> Self {
        let idx = alph.index_of(g).expect("generator not in alphabet");
        Self::generator_idx(alph, idx)
    }

    pub fn generator_idx(alph: &Arc<Alphabet>, idx: usize) -> Self {
        let mut m = Monomial::unit(alph.len());
        m.0[idx] = 1;
        let mut p = Self::zero(alph);
        p.terms.insert(m, coeff::from_int(1));
        p
    }

    pub fn monomial(alph: &Arc<Alphabet>, m: Monomial, c: Coeff) -> Self {
        let mut p = Self::zero(alph);
        if !coeff::is_zero(&c) {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alph
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .next()
                .map(|(m, c)| m.is_unit() && *c == coeff::from_int(1))
                .unwrap_or(false)
    }

    /// True when every coefficient is real.
    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.im.is_zero())
    }

    fn check_alphabet(&self, other: &DiffPoly) -> Result<()> {
        if self.alph == other.alph {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch)
        }
    }

    fn insert_term(&mut self, m: Monomial, c: Coeff) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                if !coeff::is_zero(&c) {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                let s = e.get().clone() + c;
                if coeff::is_zero(&s) {
                    e.remove();
                } else {
                    e.insert(s);
                }
            }
        }
    }

    pub fn add(&self, other: &DiffPoly) -> Result<DiffPoly> {
        self.check_alphabet(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DiffPoly) -> Result<DiffPoly> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DiffPoly {
        let mut out = Self::zero(&self.alph);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &DiffPoly) -> Result<DiffPoly> {
        self.check_alphabet(other)?;
        let mut out = Self::zero(&self.alph);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.insert_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Coeff) -> DiffPoly {
        let mut out = Self::zero(&self.alph);
        if coeff::is_zero(c) {
            return out;
        }
        for (m, a) in &self.terms {
            out.terms.insert(m.clone(), a.clone() * c.clone());
        }
        out
    }

    pub fn pow(&self, n: u32) -> DiffPoly {
        let mut out = Self::one(&self.alph);
        for _ in 0..n {
            out = out.mul(self).expect("same alphabet");
        }
        out
    }

    /// Complex conjugation; all generators are real-valued.
    pub fn conj(&self) -> DiffPoly {
        let mut out = Self::zero(&self.alph);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), coeff::conj(c));
        }
        out
    }

    /// Partial derivative following the alphabet's differentiation table.
    pub fn diff(&self, var: Var) -> Result<DiffPoly> {
        let alph = &self.alph;
        let mut out = Self::zero(alph);
        for (m, c) in &self.terms {
            for (gi, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let rule = alph.diff_rule(gi, var)?;
                let factor: Option<Monomial> = match rule {
                    DiffRule::Zero => None,
                    DiffRule::One => Some(Monomial::unit(alph.len())),
                    DiffRule::Gen(k) => {
                        let mut f = Monomial::unit(alph.len());
                        f.0[k] = 1;
                        Some(f)
                    }
                    DiffRule::GenProduct(k, l) => {
                        let mut f = Monomial::unit(alph.len());
                        f.0[k] += 1;
                        f.0[l] += 1;
                        Some(f)
                    }
                    DiffRule::Closure => unreachable!(),
                };
                if let Some(f) = factor {
                    let mut base = m.clone();
                    base.0[gi] -= 1;
                    out.insert_term(base.mul(&f), c.clone() * coeff::from_int(e as i64));
                }
            }
        }
        Ok(out)
    }

    pub fn diff_multi(&self, index: &[u8]) -> Result<DiffPoly> {
        let mut p = self.clone();
        for (slot, &k) in index.iter().enumerate() {
            let var = if slot == 0 { Var::T } else { Var::X(slot as u8) };
            for _ in 0..k {
                p = p.diff(var)?;
            }
        }
        Ok(p)
    }

    /// Substitute a polynomial for one generator.
    pub fn substitute(&self, gen_idx: usize, value: &DiffPoly) -> Result<DiffPoly> {
        self.check_alphabet(value)?;
        let mut out = Self::zero(&self.alph);
        for (m, c) in &self.terms {
            let e = m.0[gen_idx];
            let mut rest = m.clone();
            rest.0[gen_idx] = 0;
            let term = DiffPoly::monomial(&self.alph, rest, c.clone());
            let repl = value.pow(e as u32);
            out = out.add(&term.mul(&repl)?)?;
        }
        Ok(out)
    }

    /// Numeric evaluation with a real value per generator.
    pub fn eval(&self, gen_vals: &[f64]) -> Complex<f64> {
        assert_eq!(gen_vals.len(), self.alph.len());
        let mut acc = Complex::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut v = 1.0f64;
            for (gi, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    v *= gen_vals[gi];
                }
            }
            let (re, im) = coeff::to_f64_pair(c);
            acc += Complex::new(re * v, im * v);
        }
        acc
    }

    /// Real part of every coefficient, as a real polynomial.
    pub fn re_part(&self) -> DiffPoly {
        let mut out = Self::zero(&self.alph);
        for (m, c) in &self.terms {
            if !c.re.is_zero() {
                out.terms.insert(
                    m.clone(),
                    Complex::new(c.re.clone(), BigRational::zero()),
                );
            }
        }
        out
    }

    /// Imaginary part of every coefficient, as a real polynomial.
    pub fn im_part(&self) -> DiffPoly {
        let mut out = Self::zero(&self.alph);
        for (m, c) in &self.terms {
            if !c.im.is_zero() {
                out.terms.insert(
                    m.clone(),
                    Complex::new(c.im.clone(), BigRational::zero()),
                );
            }
        }
        out
    }

    /// Maximum exponent of one generator across all monomials.
    pub fn degree_in(&self, gen_idx: usize) -> u8 {
        self.terms.keys().map(|m| m.0[gen_idx]).max().unwrap_or(0)
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        // Descending graded-lex order, matching the reference display style.
        for (m, c) in self.terms.iter().rev() {
            let neg = c.im.is_zero() && c.re < BigRational::zero()
                || c.re.is_zero() && c.im < BigRational::zero();
            let c_abs = if neg { -c.clone() } else { c.clone() };
            if first {
                if neg {
                    f.write_str("-")?;
                }
                first = false;
            } else if neg {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            let mut parts: Vec<String> = Vec::new();
            let coeff_is_one = c_abs == coeff::from_int(1);
            if !coeff_is_one || m.is_unit() {
                parts.push(format!("{}", CoeffDisplay(&c_abs)));
            }
            for (gi, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let name = self.alph.generator(gi).name();
                if e == 1 {
                    parts.push(name);
                } else {
                    parts.push(format!("{name}^{e}"));
                }
            }
            f.write_str(&parts.join("*"))?;
        }
        Ok(())
    }
}
