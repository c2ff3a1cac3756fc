//! Pauli-sum Hamiltonians and their abstract commutation graphs.

mod generators;
mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use generators::{gen_hubbard_spinless_2xn, gen_ising_all_to_all, gen_random, hubbard_lattice};
pub use io::{parse_hamiltonian, write_hamiltonian};

use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Term<T: Real> {
    #[serde(rename = "c")]
    pub coeff: T,
    pub pauli: PauliString,
}

/// `H = Σ c_i P_i` with distinct non-identity Paulis and non-zero coefficients.
#[derive(Clone, Debug)]
pub struct Hamiltonian<T: Real> {
    n: usize,
    terms: Vec<Term<T>>,
    index: HashMap<PauliString, usize>,
}

impl<T: Real> PartialEq for Hamiltonian<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.terms == other.terms
    }
}

impl<T: Real> Hamiltonian<T> {
    pub fn new(n: usize, terms: Vec<Term<T>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyHamiltonian);
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if t.pauli.num_qubits() != n {
                return Err(Error::Dimension { expected: n, found: t.pauli.num_qubits() });
            }
            if t.pauli.is_identity() {
                return Err(Error::IdentityTerm);
            }
            if t.coeff == T::zero() || !t.coeff.is_finite() {
                return Err(Error::ZeroCoefficient { pauli: t.pauli.label() });
            }
            if let Some(&first) = index.get(&t.pauli) {
                return Err(Error::DuplicateTerm { pauli: t.pauli.label(), first, second: i });
            }
            index.insert(t.pauli.clone(), i);
        }
        Ok(Hamiltonian { n, terms, index })
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: &[(f64, S)]) -> Result<Self> {
        let terms = pairs
            .iter()
            .map(|(c, l)| Ok(Term { coeff: T::of(*c), pauli: PauliString::parse(l.as_ref())? }))
            .collect::<Result<Vec<_>>>()?;
        let n = terms.first().map(|t| t.pauli.num_qubits()).ok_or(Error::EmptyHamiltonian)?;
        Hamiltonian::new(n, terms)
    }

    /// Sum repeated Paulis, then drop identity and numerically-zero entries.
    /// Order follows first appearance.
    pub fn from_accumulated(n: usize, items: impl IntoIterator<Item = (T, PauliString)>) -> Result<Self> {
        let mut order: Vec<PauliString> = Vec::new();
        let mut sums: HashMap<PauliString, T> = HashMap::new();
        for (c, p) in items {
            if p.num_qubits() != n {
                return Err(Error::Dimension { expected: n, found: p.num_qubits() });
            }
            match sums.get_mut(&p) {
                Some(s) => *s += c,
                None => {
                    order.push(p.clone());
                    sums.insert(p, c);
                }
            }
        }
        let scale = sums.values().fold(T::zero(), |m, c| m.max(c.abs()));
        let cutoff = scale * T::epsilon() * T::of(64.0);
        let terms = order
            .into_iter()
            .filter(|p| !p.is_identity())
            .filter_map(|p| {
                let c = sums[&p];
                (c.abs() > cutoff).then_some(Term { coeff: c, pauli: p })
            })
            .collect();
        Hamiltonian::new(n, terms)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term<T>] {
        &self.terms
    }

    pub fn coefficient(&self, i: usize) -> T {
        self.terms[i].coeff
    }

    pub fn coefficients(&self) -> Vec<T> {
        self.terms.iter().map(|t| t.coeff).collect()
    }

    pub fn pauli(&self, i: usize) -> &PauliString {
        &self.terms[i].pauli
    }

    pub fn index_of(&self, p: &PauliString) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// `‖c‖₂²`.
    pub fn coefficient_norm_sq(&self) -> T {
        self.terms.iter().map(|t| t.coeff * t.coeff).sum()
    }

    pub fn to_abstract(&self) -> AbstractHamiltonian<T> {
        let n = self.len();
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            adj[i][i] = true;
            for k in i + 1..n {
                let c = self.terms[i].pauli.commutes_unchecked(&self.terms[k].pauli);
                adj[i][k] = c;
                adj[k][i] = c;
            }
        }
        AbstractHamiltonian::new(self.coefficients(), &adj).expect("symplectic adjacency is valid")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(HamiltonianFile { n: self.n, terms: self.terms.clone() })
            .expect("serializable")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let f: HamiltonianFile<T> = serde_json::from_value(value.clone())?;
        Hamiltonian::new(f.n, f.terms)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct HamiltonianFile<T: Real> {
    n: usize,
    terms: Vec<Term<T>>,
}

/// Coefficients plus a commutation graph, with no concrete Paulis behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct AbstractHamiltonian<T: Real> {
    coefficients: Vec<T>,
    adjacency: Vec<Vec<u64>>,
}

impl<T: Real> AbstractHamiltonian<T> {
    /// `adjacency[i][k]` must be symmetric with a true diagonal.
    pub fn new(coefficients: Vec<T>, adjacency: &[Vec<bool>]) -> Result<Self> {
        let n = coefficients.len();
        if n == 0 {
            return Err(Error::EmptyHamiltonian);
        }
        if adjacency.len() != n {
            return Err(Error::Dimension { expected: n, found: adjacency.len() });
        }
        let words = n.div_ceil(64);
        let mut packed = vec![vec![0u64; words]; n];
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension { expected: n, found: row.len() });
            }
            if !row[i] {
                return Err(Error::InvalidArgument(format!("adjacency[{i}][{i}] must be true")));
            }
            for (k, &a) in row.iter().enumerate() {
                if a != adjacency[k][i] {
                    return Err(Error::InvalidArgument(format!("adjacency not symmetric at ({i},{k})")));
                }
                if a {
                    packed[i][k / 64] |= 1 << (k % 64);
                }
            }
        }
        for (i, c) in coefficients.iter().enumerate() {
            if *c == T::zero() || !c.is_finite() {
                return Err(Error::ZeroCoefficient { pauli: format!("#{i}") });
            }
        }
        Ok(AbstractHamiltonian { coefficients, adjacency: packed })
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    #[inline]
    pub fn adjacent(&self, i: usize, k: usize) -> bool {
        (self.adjacency[i][k / 64] >> (k % 64)) & 1 == 1
    }

    /// Row `i` of the adjacency matrix as little-endian 64-bit words.
    pub fn packed_row(&self, i: usize) -> &[u64] {
        &self.adjacency[i]
    }
}
