//! `.ham` text format: one `coefficient label` pair per line, `#` comments.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Hamiltonian, Term};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::scalar::Real;

pub fn parse_hamiltonian<T: Real>(text: &str) -> Result<Hamiltonian<T>> {
    let mut terms: Vec<Term<T>> = Vec::new();
    let mut lines_of: Vec<usize> = Vec::new();
    let mut seen: HashMap<PauliString, usize> = HashMap::new();
    let mut n: Option<usize> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let (Some(c), Some(label), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse { line, reason: "expected `coefficient label`".into() });
        };
        let value: f64 = c
            .parse()
            .map_err(|_| Error::Parse { line, reason: format!("bad coefficient {c:?}") })?;
        let pauli = PauliString::parse(label).map_err(|e| Error::Parse { line, reason: e.to_string() })?;
        match n {
            None => n = Some(pauli.num_qubits()),
            Some(n) if n != pauli.num_qubits() => {
                return Err(Error::Parse {
                    line,
                    reason: format!("label has {} qubits, expected {n}", pauli.num_qubits()),
                });
            }
            _ => {}
        }
        if pauli.is_identity() {
            return Err(Error::Parse { line, reason: Error::IdentityTerm.to_string() });
        }
        if value == 0.0 || !value.is_finite() {
            return Err(Error::Parse {
                line,
                reason: Error::ZeroCoefficient { pauli: pauli.label() }.to_string(),
            });
        }
        if let Some(&first) = seen.get(&pauli) {
            return Err(Error::DuplicateTerm { pauli: pauli.label(), first, second: line });
        }
        seen.insert(pauli.clone(), line);
        lines_of.push(line);
        terms.push(Term { coeff: T::of(value), pauli });
    }
    let n = n.ok_or(Error::EmptyHamiltonian)?;
    Hamiltonian::new(n, terms)
}

pub fn write_hamiltonian<T: Real>(h: &Hamiltonian<T>) -> String {
    let mut out = String::new();
    for t in h.terms() {
        writeln!(out, "{} {}", t.coeff, t.pauli).expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intro_example() {
        let h: Hamiltonian<f64> = parse_hamiltonian("1.0 ZI\n0.9 ZZ\n0.8 XX").unwrap();
        assert_eq!(h.num_qubits(), 2);
        assert_eq!(h.len(), 3);
        assert_eq!(h.coefficient(1), 0.9);
    }

    #[test]
    fn comments_and_blank_lines() {
        let h: Hamiltonian<f64> = parse_hamiltonian("# header\n\n -0.5  XYZ # trailing\n2e-1 ZZI\n").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.coefficient(0), -0.5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse_hamiltonian::<f64>(""), Err(Error::EmptyHamiltonian)));
        assert!(matches!(parse_hamiltonian::<f64>("# only\n"), Err(Error::EmptyHamiltonian)));
        match parse_hamiltonian::<f64>("0.5 ZZ\n0.5 ZZ") {
            Err(Error::DuplicateTerm { first: 1, second: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_hamiltonian::<f64>("1 ZZ\n1 Z"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_hamiltonian::<f64>("0 ZZ"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_hamiltonian::<f64>("1 II"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_hamiltonian::<f64>("abc ZZ"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_hamiltonian::<f64>("1 ZQ"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_hamiltonian::<f64>("1 ZZ extra"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let h: Hamiltonian<f64> = parse_hamiltonian("0.1 XI\n-0.3333333333333333 ZY\n1e-7 YY").unwrap();
        let again: Hamiltonian<f64> = parse_hamiltonian(&write_hamiltonian(&h)).unwrap();
        assert_eq!(h, again);
    }
}
