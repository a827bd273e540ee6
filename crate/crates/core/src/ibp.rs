//! Integration-by-parts normal forms for sesquilinear forms <f, Op f>
//! over compactly supported f.
//!
//! A form is a sum of weighted terms |d^a f|^2, Re(d^a fbar d^b f),
//! Im(d^a fbar d^b f).  Internally each index pair carries one complex
//! weight w under implicit-real-part semantics:
//! value(a, b, w) = Re INT w * conj(d^a f) * d^b f,
//! so ReCross carries Re(w) and ImCross carries -Im(w).  Boundary terms
//! vanish by the compact-support contract; the numeric bridge enforces a
//! support margin instead of trusting callers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::symcore::op::fmt_deriv_index;
use crate::symcore::parse::{lex, Parser, Tok};
use crate::symcore::{coeff, Alphabet, DerivIndex, DiffOp, DiffPoly, Var};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TermKind {
    Square,
    ReCross,
    ImCross,
}

/// One rendered term of a quadratic form; `weight` is always real.
#[derive(Clone, Debug)]
pub struct FormTerm {
    pub kind: TermKind,
    pub a: DerivIndex,
    pub b: DerivIndex,
    pub weight: DiffPoly,
}

/// Canonical sesquilinear form.  Index pairs are stored with a <= b;
/// swapping conjugates the weight, and the imaginary part of a diagonal
/// weight is dropped (its real-part value is identically zero).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QuadForm {
    alph: Arc<Alphabet>,
    terms: BTreeMap<(DerivIndex, DerivIndex), DiffPoly>,
}

impl QuadForm {
    pub fn zero(alph: &Arc<Alphabet>) -> Self {
        QuadForm { alph: alph.clone(), terms: BTreeMap::new() }
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alph
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Insert value(a, b, w); canonicalizes the index pair.
    pub fn add_complex(&mut self, a: DerivIndex, b: DerivIndex, w: DiffPoly) {
        if w.is_zero() {
            return;
        }
        let (a, b, mut w) = if a <= b { (a, b, w) } else { (b, a, w.conj()) };
        if a == b {
            w = w.re_part();
            if w.is_zero() {
                return;
            }
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry((a, b)) {
            Entry::Vacant(e) => {
                e.insert(w);
            }
            Entry::Occupied(mut e) => {
                let s = e.get().add(&w).expect("same alphabet");
                if s.is_zero() {
                    e.remove();
                } else {
                    e.insert(s);
                }
            }
        }
    }

    pub fn add_square(&mut self, a: DerivIndex, w: DiffPoly) {
        self.add_complex(a.clone(), a, w.re_part());
    }

    pub fn add_recross(&mut self, a: DerivIndex, b: DerivIndex, w: DiffPoly) {
        self.add_complex(a, b, w.re_part());
    }

    pub fn add_imcross(&mut self, a: DerivIndex, b: DerivIndex, w: DiffPoly) {
        // ImCross weight u is stored as the complex weight -i*u
        let iu = w.re_part().scale(&coeff::imag_unit());
        self.add_complex(a, b, iu.neg());
    }

    /// Raw complex-weight entries (canonical index pairs).
    pub fn raw_terms(&self) -> impl Iterator<Item = (&(DerivIndex, DerivIndex), &DiffPoly)> {
        self.terms.iter()
    }

    /// Terms rendered with real weights, Squares on the diagonal.
    pub fn form_terms(&self) -> Vec<FormTerm> {
        let mut out = Vec::new();
        for ((a, b), w) in &self.terms {
            if a == b {
                out.push(FormTerm {
                    kind: TermKind::Square,
                    a: a.clone(),
                    b: b.clone(),
                    weight: w.re_part(),
                });
                continue;
            }
            let re = w.re_part();
            if !re.is_zero() {
                out.push(FormTerm {
                    kind: TermKind::ReCross,
                    a: a.clone(),
                    b: b.clone(),
                    weight: re,
                });
            }
            let im = w.im_part();
            if !im.is_zero() {
                out.push(FormTerm {
                    kind: TermKind::ImCross,
                    a: a.clone(),
                    b: b.clone(),
                    weight: im.neg(),
                });
            }
        }
        out
    }

    /// Balanced: every term has |b| - |a| in {0, 1} and gap-1 terms
    /// carry no real cross part.
    pub fn is_balanced(&self) -> bool {
        self.terms.iter().all(|((a, b), w)| {
            let gap = b.total_order() - a.total_order();
            gap == 0 || (gap == 1 && w.re_part().is_zero())
        })
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }
}

/// The form <f, op f> as unreduced terms conj(f) * (coefficient d^b f).
/// Requires op symmetric so the form is real.
pub fn form_from_operator(op: &DiffOp) -> Result<QuadForm> {
    if op.adjoint()? != *op {
        return Err(Error::NotSymmetric);
    }
    let alph = op.alphabet();
    let mut form = QuadForm::zero(alph);
    let zero = DerivIndex::zero(alph.num_vars());
    for (b, p) in op.terms() {
        form.add_complex(zero.clone(), b.clone(), p.clone());
    }
    form.normalize()
}

impl QuadForm {
    /// Balanced normal form: moves derivatives one at a time from the
    /// higher to the lower side (largest upper index first), then
    /// converts gap-1 real cross terms into squares via
    /// INT w d_v |g|^2 = -INT (d_v w) |g|^2.  Value-preserving for
    /// compactly supported f and idempotent.
    pub fn normalize(&self) -> Result<QuadForm> {
        let alph = &self.alph;
        let mut work = self.terms.clone();
        loop {
            // largest upper index first, then largest lower
            let key = work
                .keys()
                .filter(|(a, b)| b.total_order() >= a.total_order() + 2)
                .max_by(|(a1, b1), (a2, b2)| (b1, a1).cmp(&(b2, a2)))
                .cloned();
            let Some((a, b)) = key else { break };
            let w = work.remove(&(a.clone(), b.clone())).unwrap();
            // move one derivative in the slot with the widest margin
            let (v, margin) = b
                .0
                .iter()
                .zip(&a.0)
                .map(|(bv, av)| *bv as i32 - *av as i32)
                .enumerate()
                .max_by_key(|&(_, m)| m)
                .unwrap();
            if margin < 2 {
                return Err(Error::HypothesisUnmet(
                    "cross term mixes directions; cannot balance by single moves".into(),
                ));
            }
            let var = if v == 0 { Var::T } else { Var::X(v as u8) };
            let mut b_lower = b.clone();
            b_lower.0[v] -= 1;
            let mut a_upper = a.clone();
            a_upper.0[v] += 1;
            let mut insert = |key: (DerivIndex, DerivIndex), val: DiffPoly| {
                if val.is_zero() {
                    return;
                }
                use std::collections::btree_map::Entry;
                match work.entry(key) {
                    Entry::Vacant(e) => {
                        e.insert(val);
                    }
                    Entry::Occupied(mut e) => {
                        let s = e.get().add(&val).expect("same alphabet");
                        if s.is_zero() {
                            e.remove();
                        } else {
                            e.insert(s);
                        }
                    }
                }
            };
            insert((a.clone(), b_lower.clone()), w.diff(var)?.neg());
            insert((a_upper, b_lower), w.neg());
        }
        // gap-1 real cross parts become squares; diagonal keeps Re only
        let mut out = QuadForm::zero(alph);
        for ((a, b), w) in work {
            let gap = b.total_order() as i64 - a.total_order() as i64;
            if gap == 0 {
                debug_assert_eq!(a, b);
                out.add_square(a, w);
                continue;
            }
            debug_assert_eq!(gap, 1);
            let v = b
                .0
                .iter()
                .zip(&a.0)
                .position(|(bv, av)| bv > av)
                .expect("gap-1 term with ordered indices");
            debug_assert_eq!(b.0[v], a.0[v] + 1);
            let var = if v == 0 { Var::T } else { Var::X(v as u8) };
            let re = w.re_part();
            if !re.is_zero() {
                // Re(g conj d_v g) = (1/2) d_v |g|^2
                out.add_square(
                    a.clone(),
                    re.diff(var)?.scale(&coeff::from_rat(-1, 2)),
                );
            }
            let im = w.im_part();
            if !im.is_zero() {
                out.add_imcross(a, b, im.neg());
            }
        }
        Ok(out)
    }
}

/// The transcribed normalized form of <f, [S,A] f> for d in 1..=3.
pub fn reference_commutator_form(d: usize) -> Result<QuadForm> {
    let text = match d {
        1 => include_str!("../refs/form_summary_d1.txt"),
        2 => include_str!("../refs/form_summary_d2.txt"),
        3 => include_str!("../refs/form_summary_d3.txt"),
        _ => {
            return Err(Error::Config(format!(
                "no transcribed commutator form at dimension {d}"
            )))
        }
    };
    parse_form(text, &Alphabet::new(d))
}

// ---------------------------------------------------------------------
// text serialization: the operator grammar extended with the tokens
// Sq[IDX], Re[IDX, IDX], Im[IDX, IDX], where IDX is 1 or a product of
// D[var]^k factors.

fn fmt_index(alph: &Alphabet, a: &DerivIndex) -> String {
    let s = fmt_deriv_index(alph, a);
    if s.is_empty() {
        "1".into()
    } else {
        s
    }
}

impl fmt::Display for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.form_terms();
        if terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for t in terms {
            let token = match t.kind {
                TermKind::Square => format!("Sq[{}]", fmt_index(&self.alph, &t.a)),
                TermKind::ReCross => format!(
                    "Re[{}, {}]",
                    fmt_index(&self.alph, &t.a),
                    fmt_index(&self.alph, &t.b)
                ),
                TermKind::ImCross => format!(
                    "Im[{}, {}]",
                    fmt_index(&self.alph, &t.a),
                    fmt_index(&self.alph, &t.b)
                ),
            };
            let ws = t.weight.to_string();
            let multi = ws.contains(" + ") || ws.contains(" - ");
            let (sign, body) = if multi {
                ("+", format!("({ws})"))
            } else if let Some(rest) = ws.strip_prefix('-') {
                ("-", rest.to_string())
            } else {
                ("+", ws)
            };
            if first {
                if sign == "-" {
                    f.write_str("-")?;
                }
                first = false;
            } else {
                write!(f, " {sign} ")?;
            }
            if body == "1" {
                f.write_str(&token)?;
            } else {
                write!(f, "{body}*{token}")?;
            }
        }
        Ok(())
    }
}

/// Parse the quadratic-form grammar.
pub fn parse_form(input: &str, alph: &Arc<Alphabet>) -> Result<QuadForm> {
    let toks = lex(input)?;
    let mut form = QuadForm::zero(alph);
    // split into top-level terms at +/- outside parens/brackets
    let mut depth = 0i32;
    let mut start = 0usize;
    let mut sign = 1i64;
    let flush = |from: usize, to: usize, sign: i64, form: &mut QuadForm| -> Result<()> {
        if from == to {
            return Err(Error::Parse {
                pos: toks.get(from).map(|(p, _)| *p).unwrap_or(0),
                msg: "empty form term".into(),
            });
        }
        parse_form_term(&toks[from..to], sign, alph, form)
    };
    let mut i = 0;
    while i < toks.len() {
        match toks[i].1 {
            Tok::LParen | Tok::LBrack => depth += 1,
            Tok::RParen | Tok::RBrack => depth -= 1,
            Tok::Plus | Tok::Minus if depth == 0 => {
                if i > start {
                    flush(start, i, sign, &mut form)?;
                }
                sign = if toks[i].1 == Tok::Minus { -1 } else { 1 };
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    if start < toks.len() {
        flush(start, toks.len(), sign, &mut form)?;
    } else if toks.is_empty() {
        return Err(Error::Parse { pos: 0, msg: "empty form".into() });
    }
    Ok(form)
}

fn parse_form_term(
    toks: &[(usize, Tok)],
    sign: i64,
    alph: &Arc<Alphabet>,
    form: &mut QuadForm,
) -> Result<()> {
    // locate the single Sq/Re/Im token factor
    let mut token_at = None;
    for (i, (pos, t)) in toks.iter().enumerate() {
        if let Tok::Name(n) = t {
            if (n == "Sq" || n == "Re" || n == "Im")
                && matches!(toks.get(i + 1), Some((_, Tok::LBrack)))
            {
                if token_at.is_some() {
                    return Err(Error::Parse {
                        pos: *pos,
                        msg: "multiple form tokens in one term".into(),
                    });
                }
                token_at = Some(i);
            }
        }
    }
    let Some(ti) = token_at else {
        return Err(Error::Parse {
            pos: toks[0].0,
            msg: "form term without Sq/Re/Im token".into(),
        });
    };
    // matching bracket
    let mut depth = 0i32;
    let mut tj = None;
    for (j, (_, t)) in toks.iter().enumerate().skip(ti + 1) {
        match t {
            Tok::LBrack => depth += 1,
            Tok::RBrack => {
                depth -= 1;
                if depth == 0 {
                    tj = Some(j);
                    break;
                }
            }
            _ => {}
        }
    }
    let tj = tj.ok_or(Error::Parse {
        pos: toks[ti].0,
        msg: "unterminated form token".into(),
    })?;
    let kind = match &toks[ti].1 {
        Tok::Name(n) if n == "Sq" => TermKind::Square,
        Tok::Name(n) if n == "Re" => TermKind::ReCross,
        _ => TermKind::ImCross,
    };
    let inner = &toks[ti + 2..tj];
    let (a, b) = parse_token_indices(inner, kind, alph)?;

    // the weight is everything else, with one adjacent '*' removed
    let mut weight_toks: Vec<(usize, Tok)> = Vec::new();
    weight_toks.extend_from_slice(&toks[..ti]);
    weight_toks.extend_from_slice(&toks[tj + 1..]);
    if ti > 0 && matches!(toks[ti - 1].1, Tok::Star) {
        weight_toks.remove(ti - 1);
    } else if matches!(toks.get(tj + 1), Some((_, Tok::Star))) {
        weight_toks.remove(ti);
    }
    let weight = if weight_toks.is_empty() {
        DiffPoly::one(alph)
    } else {
        let mut p = Parser::from_tokens(weight_toks, alph);
        let op = p.expr()?;
        p.finish()?;
        crate::symcore::parse::op_as_poly(&op)?
    };
    let weight = weight.scale(&coeff::from_int(sign));
    match kind {
        TermKind::Square => form.add_square(a, weight),
        TermKind::ReCross => form.add_recross(a, b, weight),
        TermKind::ImCross => form.add_imcross(a, b, weight),
    }
    Ok(())
}

fn parse_token_indices(
    inner: &[(usize, Tok)],
    kind: TermKind,
    alph: &Arc<Alphabet>,
) -> Result<(DerivIndex, DerivIndex)> {
    let split_at = inner
        .iter()
        .position(|(_, t)| matches!(t, Tok::Comma));
    match (kind, split_at) {
        (TermKind::Square, None) => {
            let a = parse_index(inner, alph)?;
            Ok((a.clone(), a))
        }
        (TermKind::Square, Some(_)) => Err(Error::Parse {
            pos: inner.first().map(|(p, _)| *p).unwrap_or(0),
            msg: "Sq takes a single index".into(),
        }),
        (_, Some(k)) => {
            let a = parse_index(&inner[..k], alph)?;
            let b = parse_index(&inner[k + 1..], alph)?;
            Ok((a, b))
        }
        (_, None) => Err(Error::Parse {
            pos: inner.first().map(|(p, _)| *p).unwrap_or(0),
            msg: "cross token needs two indices".into(),
        }),
    }
}

/// IDX := '1' | D '[' var ']' ('^' uint)? ('*' IDX)?
fn parse_index(toks: &[(usize, Tok)], alph: &Arc<Alphabet>) -> Result<DerivIndex> {
    let pos0 = toks.first().map(|(p, _)| *p).unwrap_or(0);
    let mut idx = DerivIndex::zero(alph.num_vars());
    if toks.len() == 1 {
        if let Tok::Int(1) = toks[0].1 {
            return Ok(idx);
        }
    }
    let mut p = Parser::from_tokens(toks.to_vec(), alph);
    loop {
        match p.next() {
            Some(Tok::Name(n)) if n == "D" => {
                p.expect(Tok::LBrack)?;
                let v = p.var()?;
                p.expect(Tok::RBrack)?;
                let mut k = 1u8;
                if p.peek() == Some(&Tok::Caret) {
                    p.next();
                    match p.next() {
                        Some(Tok::Int(n)) if n <= u8::MAX as u64 => k = n as u8,
                        _ => {
                            return Err(Error::Parse {
                                pos: pos0,
                                msg: "bad derivative power".into(),
                            })
                        }
                    }
                }
                let slot = alph.var_slot(v).unwrap();
                idx.0[slot] += k;
            }
            other => {
                return Err(Error::Parse {
                    pos: pos0,
                    msg: format!("expected derivative factor, found {other:?}"),
                })
            }
        }
        match p.next() {
            None => return Ok(idx),
            Some(Tok::Star) => continue,
            other => {
                return Err(Error::Parse {
                    pos: pos0,
                    msg: format!("unexpected {other:?} in index"),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse_op;

    fn d1() -> Arc<Alphabet> {
        Alphabet::new(1)
    }

    #[test]
    fn zeroth_and_second_order() {
        let a = d1();
        let p = parse_op("2*alpha*psi", &a).unwrap();
        let f = form_from_operator(&p).unwrap();
        assert_eq!(f, parse_form("2*alpha*psi*Sq[1]", &a).unwrap());

        let dxx = parse_op("D[x1]^2", &a).unwrap();
        let f2 = form_from_operator(&dxx).unwrap();
        assert_eq!(f2, parse_form("-Sq[D[x1]]", &a).unwrap());
    }

    #[test]
    fn sixth_order_to_square() {
        let a = d1();
        let op = parse_op("-32*alpha*rinv^2*D[x1]^6", &a).unwrap();
        let f = form_from_operator(&op).unwrap();
        assert_eq!(f, parse_form("32*alpha*rinv^2*Sq[D[x1]^3]", &a).unwrap());
    }

    #[test]
    fn fourth_order_recross_reduces_to_square() {
        let a = d1();
        let f = parse_form("Re[1, D[x1]^4]", &a).unwrap();
        assert_eq!(f.normalize().unwrap(), parse_form("Sq[D[x1]^2]", &a).unwrap());
    }

    #[test]
    fn recross_reduction_pattern() {
        // w on Re(fbar d^2 f) -> -w |df|^2 + (1/2) w'' |f|^2
        let a = d1();
        let f = parse_form(
            "(384*alpha^3*rinv^6 - 1536*alpha^5*psi^4*rinv^6)*Re[1, D[x1]^2]",
            &a,
        )
        .unwrap();
        let n = f.normalize().unwrap();
        // w'' = -12*1536*alpha^5*psi^2*rinv^8; half of it on |f|^2
        let expect = parse_form(
            "(-384*alpha^3*rinv^6 + 1536*alpha^5*psi^4*rinv^6)*Sq[D[x1]]
             - 9216*alpha^5*psi^2*rinv^8*Sq[1]",
            &a,
        )
        .unwrap();
        assert_eq!(n, expect);
    }

    #[test]
    fn normalize_is_idempotent() {
        let a = d1();
        let f = parse_form(
            "3*Sq[D[x1]] - 16*alpha*phi1*rinv*Im[D[x1], D[x1]^2] + psi*Sq[1]",
            &a,
        )
        .unwrap();
        assert!(f.is_balanced());
        assert_eq!(f.normalize().unwrap(), f);
    }

    #[test]
    fn rejects_asymmetric_operators() {
        let a = d1();
        let op = parse_op("D[x1]", &a).unwrap();
        assert!(matches!(form_from_operator(&op), Err(Error::NotSymmetric)));
    }

    #[test]
    fn print_parse_round_trip() {
        let a = Alphabet::new(2);
        let f = parse_form(
            "(2*alpha*psi*phi2 + 2*alpha*phi1^2)*Sq[1]
             + 192*alpha^3*psi^2*phi1*rinv^3*Im[1, D[x1]]
             - 3/2*Re[D[x2], D[x2]^2] + Sq[D[x2]^3]",
            &a,
        )
        .unwrap();
        let s = f.to_string();
        let back = parse_form(&s, &a).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_string(), s);
    }
}
