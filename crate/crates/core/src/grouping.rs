//! Groupings, overlapped groupings and the sorted-insertion heuristic.
//!
//! Groups hold term indices into a Hamiltonian (concrete or abstract), never
//! copies of the Paulis, so one term can sit in many groups.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{AbstractHamiltonian, Hamiltonian};
use crate::scalar::Real;

/// Answers "do terms `i` and `k` commute" and exposes the coefficients.
pub trait CommutationOracle<T: Real> {
    fn term_count(&self) -> usize;
    fn coefficient(&self, i: usize) -> T;
    fn commutes(&self, i: usize, k: usize) -> bool;

    fn coefficient_vec(&self) -> Vec<T> {
        (0..self.term_count()).map(|i| self.coefficient(i)).collect()
    }

    /// True iff term `i` commutes with every member of `group`.
    fn compatible(&self, i: usize, group: &[usize]) -> bool {
        group.iter().all(|&k| self.commutes(i, k))
    }
}

impl<T: Real> CommutationOracle<T> for Hamiltonian<T> {
    fn term_count(&self) -> usize {
        self.len()
    }

    fn coefficient(&self, i: usize) -> T {
        Hamiltonian::coefficient(self, i)
    }

    #[inline]
    fn commutes(&self, i: usize, k: usize) -> bool {
        self.pauli(i).commutes_unchecked(self.pauli(k))
    }
}

impl<T: Real> CommutationOracle<T> for AbstractHamiltonian<T> {
    fn term_count(&self) -> usize {
        self.len()
    }

    fn coefficient(&self, i: usize) -> T {
        self.coefficients()[i]
    }

    #[inline]
    fn commutes(&self, i: usize, k: usize) -> bool {
        self.adjacent(i, k)
    }
}

/// Anything that covers the terms with a list of groups.
pub trait Cover {
    fn n_terms(&self) -> usize;
    fn groups(&self) -> &[Vec<usize>];

    fn num_groups(&self) -> usize {
        self.groups().len()
    }

    /// `Γ(i)`: the groups containing term `i`, ascending.
    fn membership(&self) -> Vec<Vec<usize>> {
        membership_map(self.n_terms(), self.groups())
    }
}

pub fn membership_map(n_terms: usize, groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut gamma = vec![Vec::new(); n_terms];
    for (j, g) in groups.iter().enumerate() {
        for &i in g {
            gamma[i].push(j);
        }
    }
    gamma
}

/// A grouping (`disjoint = true`) or an overlapped grouping.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    pub disjoint: bool,
    pub groups: Vec<Vec<usize>>,
    #[serde(skip)]
    n_terms: usize,
}

impl Grouping {
    pub fn new(n_terms: usize, groups: Vec<Vec<usize>>, disjoint: bool) -> Result<Self> {
        for g in &groups {
            for &i in g {
                if i >= n_terms {
                    return Err(Error::IndexOutOfRange { index: i, len: n_terms });
                }
            }
        }
        Ok(Grouping { disjoint, groups, n_terms })
    }

    pub fn from_json(value: &serde_json::Value, n_terms: usize) -> Result<Self> {
        let g: Grouping = serde_json::from_value(value.clone())?;
        Grouping::new(n_terms, g.groups, g.disjoint)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

impl Cover for Grouping {
    fn n_terms(&self) -> usize {
        self.n_terms
    }

    fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Uncovered { term: usize },
    NotCommuting { group: usize, a: usize, b: usize },
    Overlap { term: usize, first: usize, second: usize },
    RepeatedMember { group: usize, term: usize },
    EmptyGroup { group: usize },
}

/// Check covering, commutation and (if claimed) disjointness.
pub fn validate_grouping<T: Real, O: CommutationOracle<T> + ?Sized>(
    oracle: &O,
    groups: &[Vec<usize>],
    disjoint: bool,
) -> Result<Vec<Violation>> {
    let n = oracle.term_count();
    let mut out = Vec::new();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (j, g) in groups.iter().enumerate() {
        if g.is_empty() {
            out.push(Violation::EmptyGroup { group: j });
        }
        let mut seen = std::collections::HashSet::new();
        for (pos, &a) in g.iter().enumerate() {
            if a >= n {
                return Err(Error::IndexOutOfRange { index: a, len: n });
            }
            if !seen.insert(a) {
                out.push(Violation::RepeatedMember { group: j, term: a });
                continue;
            }
            for &b in &g[pos + 1..] {
                if b < n && a != b && !oracle.commutes(a, b) {
                    out.push(Violation::NotCommuting { group: j, a, b });
                }
            }
            match owner[a] {
                Some(first) if disjoint && first != j => {
                    out.push(Violation::Overlap { term: a, first, second: j })
                }
                None => owner[a] = Some(j),
                _ => {}
            }
        }
    }
    for (i, o) in owner.iter().enumerate() {
        if o.is_none() {
            out.push(Violation::Uncovered { term: i });
        }
    }
    Ok(out)
}

/// Terms in descending `|c_i|`, ties by ascending index.
pub fn insertion_order<T: Real>(coefficients: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..coefficients.len()).collect();
    order.sort_by(|&a, &b| {
        coefficients[b]
            .abs()
            .partial_cmp(&coefficients[a].abs())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Greedy sorted insertion: each term, in descending `|c|`, joins the first
/// group it fully commutes with, or opens a new group.
pub fn sorted_insertion<T: Real, O: CommutationOracle<T> + ?Sized>(oracle: &O) -> Grouping {
    let coeffs = oracle.coefficient_vec();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in insertion_order(&coeffs) {
        match groups.iter_mut().find(|g| oracle.compatible(i, g)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    Grouping { disjoint: true, groups, n_terms: coeffs.len() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct GroupNorm<T: Real> {
    /// `S_j = Σ c_i²`
    pub sum_sq: T,
    /// `Σ |c_i|`
    pub l1: T,
}

pub fn group_norms<T: Real>(coefficients: &[T], groups: &[Vec<usize>]) -> Vec<GroupNorm<T>> {
    groups
        .iter()
        .map(|g| GroupNorm {
            sum_sq: g.iter().map(|&i| coefficients[i] * coefficients[i]).sum(),
            l1: g.iter().map(|&i| coefficients[i].abs()).sum(),
        })
        .collect()
}
