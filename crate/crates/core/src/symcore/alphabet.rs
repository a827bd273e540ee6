//! The symbol alphabet of the Carleman weight calculus.
//!
//! Generators, in canonical order: the Carleman parameter `alpha`, the
//! inverse radius `rinv` (= 1/R), the tilted coordinate `psi`
//! (= x1/R + phi(t)), the transverse coordinates `x2..xd`, the time
//! profile and its derivatives `phi, phi1, .., phiK`, and optionally the
//! uninterpreted cutoff chains `eta..eta4`, `theta..theta4` and the
//! Cauchy-Schwarz splitter symbols.  Every generator carries a total
//! differentiation rule per variable; differentiating past the closure
//! order is an error rather than a silent extension of the alphabet.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default closure order for the phi-derivative chain (phi .. phi''').
pub const DEFAULT_PHI_ORDER: u8 = 3;
/// Formal cutoff derivatives are capped at this order.
pub const CUTOFF_ORDER: u8 = 4;

/// A differentiation variable: time or one of the spatial coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Var {
    T,
    /// 1-based spatial index (X(1) is the tilted direction).
    X(u8),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::X(j) => write!(f, "x{j}"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Generator {
    Alpha,
    RInv,
    Psi,
    /// Transverse coordinate x_j, j >= 2.
    Coord(u8),
    /// phi^(k), k = 0..=phi_order.
    PhiDeriv(u8),
    /// Formal k-th derivative of the eta cutoff (a function of psi).
    Eta(u8),
    /// Formal k-th derivative of the theta cutoff.
    Theta(u8),
    /// Cauchy-Schwarz splitter omega and its formal inverse.
    SplitOmega,
    SplitOmegaInv,
    /// Cauchy-Schwarz splitter rho and its formal inverse.
    SplitRho,
    SplitRhoInv,
}

impl Generator {
    pub fn name(&self) -> String {
        match self {
            Generator::Alpha => "alpha".into(),
            Generator::RInv => "rinv".into(),
            Generator::Psi => "psi".into(),
            Generator::Coord(j) => format!("x{j}"),
            Generator::PhiDeriv(0) => "phi".into(),
            Generator::PhiDeriv(k) => format!("phi{k}"),
            Generator::Eta(0) => "eta".into(),
            Generator::Eta(k) => format!("eta{k}"),
            Generator::Theta(0) => "theta".into(),
            Generator::Theta(k) => format!("theta{k}"),
            Generator::SplitOmega => "omega".into(),
            Generator::SplitOmegaInv => "omegainv".into(),
            Generator::SplitRho => "rho".into(),
            Generator::SplitRhoInv => "rhoinv".into(),
        }
    }
}

/// How a single differentiation of one generator reads in the alphabet:
/// zero, a constant, or a product of generators times a constant.
#[derive(Clone, Debug)]
pub enum DiffRule {
    Zero,
    One,
    /// The generator at this index.
    Gen(usize),
    /// Product of the two generators at these indices.
    GenProduct(usize, usize),
    Closure,
}

#[derive(Debug)]
pub struct Alphabet {
    d: usize,
    phi_order: u8,
    with_cutoffs: bool,
    with_splitters: bool,
    gens: Vec<Generator>,
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.phi_order == other.phi_order
            && self.with_cutoffs == other.with_cutoffs
            && self.with_splitters == other.with_splitters
    }
}
impl Eq for Alphabet {}

impl Alphabet {
    pub fn new(d: usize) -> Arc<Self> {
        Self::with_options(d, DEFAULT_PHI_ORDER, false, false)
    }

    pub fn with_cutoffs(d: usize) -> Arc<Self> {
        Self::with_options(d, DEFAULT_PHI_ORDER, true, false)
    }

    pub fn with_splitters(d: usize) -> Arc<Self> {
        Self::with_options(d, DEFAULT_PHI_ORDER, false, true)
    }

    pub fn with_options(d: usize, phi_order: u8, cutoffs: bool, splitters: bool) -> Arc<Self> {
        assert!(d >= 1, "dimension must be positive");
        let mut gens = vec![Generator::Alpha, Generator::RInv, Generator::Psi];
        for j in 2..=d {
            gens.push(Generator::Coord(j as u8));
        }
        for k in 0..=phi_order {
            gens.push(Generator::PhiDeriv(k));
        }
        if cutoffs {
            for k in 0..=CUTOFF_ORDER {
                gens.push(Generator::Eta(k));
            }
            for k in 0..=CUTOFF_ORDER {
                gens.push(Generator::Theta(k));
            }
        }
        if splitters {
            gens.push(Generator::SplitOmega);
            gens.push(Generator::SplitOmegaInv);
            gens.push(Generator::SplitRho);
            gens.push(Generator::SplitRhoInv);
        }
        Arc::new(Alphabet { d, phi_order, with_cutoffs: cutoffs, with_splitters: splitters, gens })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    /// Number of differentiation variables (t plus d coordinates).
    pub fn num_vars(&self) -> usize {
        self.d + 1
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn generators(&self) -> &[Generator] {
        &self.gens
    }

    pub fn generator(&self, idx: usize) -> Generator {
        self.gens[idx]
    }

    pub fn index_of(&self, g: Generator) -> Option<usize> {
        self.gens.iter().position(|&h| h == g)
    }

    pub fn index_by_name(&self, name: &str) -> Option<usize> {
        self.gens.iter().position(|g| g.name() == name)
    }

    /// Index of a differentiation variable in a derivative multi-index.
    pub fn var_slot(&self, v: Var) -> Option<usize> {
        match v {
            Var::T => Some(0),
            Var::X(j) if (j as usize) >= 1 && (j as usize) <= self.d => Some(j as usize),
            _ => None,
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut vs = vec![Var::T];
        for j in 1..=self.d {
            vs.push(Var::X(j as u8));
        }
        vs
    }

    /// The differentiation table: d(gen)/d(var).
    pub fn diff_rule(&self, gen_idx: usize, var: Var) -> Result<DiffRule> {
        let closure = |g: Generator| Error::ClosureExceeded {
            generator: g.name(),
            var: var.to_string(),
        };
        let gen = self.gens[gen_idx];
        Ok(match (gen, var) {
            (Generator::Psi, Var::T) => DiffRule::Gen(self.index_of(Generator::PhiDeriv(1)).unwrap()),
            (Generator::Psi, Var::X(1)) => DiffRule::Gen(self.index_of(Generator::RInv).unwrap()),
            (Generator::Coord(j), Var::X(v)) if j == v => DiffRule::One,
            (Generator::PhiDeriv(k), Var::T) => {
                if k < self.phi_order {
                    DiffRule::Gen(self.index_of(Generator::PhiDeriv(k + 1)).unwrap())
                } else {
                    return Err(closure(gen));
                }
            }
            // eta is a function of psi; the chain rule goes through psi.
            (Generator::Eta(k), Var::X(1)) => {
                if k < CUTOFF_ORDER {
                    DiffRule::GenProduct(
                        self.index_of(Generator::RInv).unwrap(),
                        self.index_of(Generator::Eta(k + 1)).unwrap(),
                    )
                } else {
                    return Err(closure(gen));
                }
            }
            (Generator::Eta(k), Var::T) => {
                if k < CUTOFF_ORDER {
                    DiffRule::GenProduct(
                        self.index_of(Generator::PhiDeriv(1)).unwrap(),
                        self.index_of(Generator::Eta(k + 1)).unwrap(),
                    )
                } else {
                    return Err(closure(gen));
                }
            }
            // theta derivatives are tracked as one formal chain per order,
            // without recording the direction; sufficient for the support
            // classification of remainder terms.
            (Generator::Theta(k), Var::X(_)) => {
                if k < CUTOFF_ORDER {
                    DiffRule::Gen(self.index_of(Generator::Theta(k + 1)).unwrap())
                } else {
                    return Err(closure(gen));
                }
            }
            _ => DiffRule::Zero,
        })
    }
}
