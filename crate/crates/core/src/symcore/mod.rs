//! Exact differential-operator algebra over the weight-calculus alphabet.

pub mod alphabet;
pub mod coeff;
pub mod op;
pub mod parse;
pub mod poly;

pub use alphabet::{Alphabet, Generator, Var};
pub use coeff::Coeff;
pub use op::{DerivIndex, DiffOp};
pub use parse::{parse_op, parse_poly};
pub use poly::{DiffPoly, Monomial};
