//! Differential operators: finite sums of (polynomial coefficient) x
//! (mixed partial derivative), with composition, formal space-time L2
//! adjoints, commutators and the symmetric/antisymmetric split.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::alphabet::{Alphabet, Var};
use super::coeff::{self, Coeff};
use super::poly::DiffPoly;
use crate::error::{Error, Result};

/// Multi-index (a_t, a_1, .., a_d) of derivative orders.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct DerivIndex(pub Vec<u8>);

impl DerivIndex {
    pub fn zero(num_vars: usize) -> Self {
        DerivIndex(vec![0; num_vars])
    }

    pub fn single(num_vars: usize, slot: usize, order: u8) -> Self {
        let mut v = vec![0; num_vars];
        v[slot] = order;
        DerivIndex(v)
    }

    pub fn total_order(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn add(&self, other: &DerivIndex) -> DerivIndex {
        DerivIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise comparison (partial order).
    pub fn leq(&self, other: &DerivIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl Ord for DerivIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_order()
            .cmp(&other.total_order())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for DerivIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Iterate all sub-indices c <= a with the multinomial factor
/// prod_v binom(a_v, c_v).
fn sub_indices(a: &DerivIndex) -> Vec<(DerivIndex, u64)> {
    let mut out: Vec<(Vec<u8>, u64)> = vec![(Vec::new(), 1)];
    for &av in &a.0 {
        let mut next = Vec::new();
        for (prefix, w) in &out {
            for c in 0..=av {
                let mut p = prefix.clone();
                p.push(c);
                next.push((p, w * binom(av as u64, c as u64)));
            }
        }
        out = next;
    }
    out.into_iter().map(|(v, w)| (DerivIndex(v), w)).collect()
}

fn binom(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut r = 1u64;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Finite sum of (DiffPoly) * (partial-derivative multi-index) terms.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DiffOp {
    alph: Arc<Alphabet>,
    terms: BTreeMap<DerivIndex, DiffPoly>,
}

impl DiffOp {
    pub fn zero(alph: &Arc<Alphabet>) -> Self {
        DiffOp { alph: alph.clone(), terms: BTreeMap::new() }
    }

    /// Multiplication by a polynomial.
    pub fn mult(p: DiffPoly) -> Self {
        let alph = p.alphabet().clone();
        let mut op = Self::zero(&alph);
        if !p.is_zero() {
            op.terms.insert(DerivIndex::zero(alph.num_vars()), p);
        }
        op
    }

    pub fn scalar(alph: &Arc<Alphabet>, c: Coeff) -> Self {
        Self::mult(DiffPoly::scalar(alph, c))
    }

    pub fn identity(alph: &Arc<Alphabet>) -> Self {
        Self::mult(DiffPoly::one(alph))
    }

    /// The first-order partial derivative in one variable.
    pub fn partial(alph: &Arc<Alphabet>, var: Var, order: u8) -> Self {
        let slot = alph.var_slot(var).expect("variable outside alphabet dimension");
        let mut op = Self::zero(alph);
        op.terms.insert(
            DerivIndex::single(alph.num_vars(), slot, order),
            DiffPoly::one(alph),
        );
        op
    }

    pub fn term(p: DiffPoly, index: DerivIndex) -> Self {
        let alph = p.alphabet().clone();
        let mut op = Self::zero(&alph);
        if !p.is_zero() {
            op.terms.insert(index, p);
        }
        op
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alph
    }

    pub fn terms(&self) -> impl Iterator<Item = (&DerivIndex, &DiffPoly)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, index: &DerivIndex) -> Option<&DiffPoly> {
        self.terms.get(index)
    }

    pub fn max_order(&self) -> u32 {
        self.terms.keys().map(|a| a.total_order()).max().unwrap_or(0)
    }

    fn check_alphabet(&self, other: &DiffOp) -> Result<()> {
        if self.alph == other.alph {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch)
        }
    }

    fn insert_term(&mut self, index: DerivIndex, p: DiffPoly) {
        if p.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(index) {
            Entry::Vacant(e) => {
                e.insert(p);
            }
            Entry::Occupied(mut e) => {
                let s = e.get().add(&p).expect("same alphabet");
                if s.is_zero() {
                    e.remove();
                } else {
                    e.insert(s);
                }
            }
        }
    }

    pub fn add(&self, other: &DiffOp) -> Result<DiffOp> {
        self.check_alphabet(other)?;
        let mut out = self.clone();
        for (a, p) in &other.terms {
            out.insert_term(a.clone(), p.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DiffOp) -> Result<DiffOp> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DiffOp {
        let mut out = Self::zero(&self.alph);
        for (a, p) in &self.terms {
            out.terms.insert(a.clone(), p.neg());
        }
        out
    }

    pub fn scale(&self, c: &Coeff) -> DiffOp {
        let mut out = Self::zero(&self.alph);
        for (a, p) in &self.terms {
            let q = p.scale(c);
            if !q.is_zero() {
                out.terms.insert(a.clone(), q);
            }
        }
        out
    }

    pub fn scale_poly(&self, q: &DiffPoly) -> Result<DiffOp> {
        let mut out = Self::zero(&self.alph);
        for (a, p) in &self.terms {
            out.insert_term(a.clone(), p.mul(q)?);
        }
        Ok(out)
    }

    /// Operator composition: (self . other) f = self(other(f)).
    pub fn compose(&self, other: &DiffOp) -> Result<DiffOp> {
        self.check_alphabet(other)?;
        let mut out = Self::zero(&self.alph);
        for (a, p) in &self.terms {
            for (b, q) in &other.terms {
                // d^a (q g) = sum_{c <= a} binom(a,c) (d^c q) d^{a-c} g
                for (c, w) in sub_indices(a) {
                    let dq = q.diff_multi(&c.0)?;
                    if dq.is_zero() {
                        continue;
                    }
                    let rem = DerivIndex(
                        a.0.iter().zip(&c.0).map(|(x, y)| x - y).collect(),
                    );
                    let coeff = p.mul(&dq)?.scale(&coeff::from_int(w as i64));
                    out.insert_term(rem.add(b), coeff);
                }
            }
        }
        Ok(out)
    }

    /// Formal space-time L2 adjoint under compact support:
    /// (p d^a)* = (-1)^{|a|} d^a (conj(p) . ), expanded to canonical form.
    pub fn adjoint(&self) -> Result<DiffOp> {
        let mut out = Self::zero(&self.alph);
        for (a, p) in &self.terms {
            let sign = if a.total_order() % 2 == 0 { 1 } else { -1 };
            let pc = p.conj();
            for (c, w) in sub_indices(a) {
                let dq = pc.diff_multi(&c.0)?;
                if dq.is_zero() {
                    continue;
                }
                let rem = DerivIndex(a.0.iter().zip(&c.0).map(|(x, y)| x - y).collect());
                out.insert_term(rem, dq.scale(&coeff::from_int(sign * w as i64)));
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &DiffOp) -> Result<DiffOp> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// Split into symmetric and antisymmetric parts:
    /// sym = (op + op*)/2, anti = (op - op*)/2.
    pub fn split(&self) -> Result<(DiffOp, DiffOp)> {
        let adj = self.adjoint()?;
        let half = coeff::from_rat(1, 2);
        let sym = self.add(&adj)?.scale(&half);
        let anti = self.sub(&adj)?.scale(&half);
        Ok((sym, anti))
    }

    /// Substitute a polynomial for a generator inside every coefficient.
    pub fn substitute(&self, gen_idx: usize, value: &DiffPoly) -> Result<DiffOp> {
        let mut out = Self::zero(&self.alph);
        for (a, p) in &self.terms {
            out.insert_term(a.clone(), p.substitute(gen_idx, value)?);
        }
        Ok(out)
    }

    /// Map coefficients through an arbitrary polynomial transform.
    pub fn map_coeffs<F>(&self, mut f: F) -> Result<DiffOp>
    where
        F: FnMut(&DiffPoly) -> Result<DiffPoly>,
    {
        let mut out = Self::zero(&self.alph);
        for (a, p) in &self.terms {
            out.insert_term(a.clone(), f(p)?);
        }
        Ok(out)
    }
}

pub fn fmt_deriv_index(_alph: &Alphabet, a: &DerivIndex) -> String {
    let mut parts = Vec::new();
    for (slot, &e) in a.0.iter().enumerate() {
        if e == 0 {
            continue;
        }
        let name = if slot == 0 { "t".to_string() } else { format!("x{slot}") };
        if e == 1 {
            parts.push(format!("D[{name}]"));
        } else {
            parts.push(format!("D[{name}]^{e}"));
        }
    }
    parts.join("*")
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        // Highest derivative order first.
        let mut first = true;
        for (a, p) in self.terms.iter().rev() {
            let ds = fmt_deriv_index(&self.alph, a);
            let ps = p.to_string();
            let multi = ps.contains(" + ") || ps.contains(" - ");
            // A leading minus may only be pulled out of a one-term coefficient.
            let (sign, body) = if multi {
                ("+", format!("({ps})"))
            } else if let Some(rest) = ps.strip_prefix('-') {
                ("-", rest.to_string())
            } else {
                ("+", ps)
            };
            if first {
                if sign == "-" {
                    f.write_str("-")?;
                }
                first = false;
            } else {
                write!(f, " {sign} ")?;
            }
            let coeff_part = if a.is_zero() || body != "1" {
                Some(body)
            } else {
                None
            };
            match (coeff_part, ds.is_empty()) {
                (Some(c), true) => f.write_str(&c)?,
                (Some(c), false) => write!(f, "{c}*{ds}")?,
                (None, false) => f.write_str(&ds)?,
                (None, true) => f.write_str("1")?,
            }
        }
        Ok(())
    }
}
