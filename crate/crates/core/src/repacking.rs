//! Repacking: adding terms to existing groups of a grouping.
//!
//! Post-hoc repacking keeps each group's measurement circuit and adds every
//! term that circuit already diagonalizes. Ad-hoc repacking greedily inserts
//! terms into further compatible groups before circuits are chosen.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{diagonalize, CliffordCircuit, Tableau};
use crate::error::{Error, Result};
use crate::estimator::{shot_weighted_variance, Moments, ShotAllocation};
use crate::grouping::{membership_map, CommutationOracle, Cover, Grouping};
use crate::hamiltonian::Hamiltonian;
use crate::pauli::Sign;
use crate::scalar::{Ordered, Real};

/// An overlapped grouping obtained from `base` by only adding members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepackedGrouping {
    pub base: Grouping,
    pub groups: Vec<Vec<usize>>,
    /// Conjugation sign of every member under its group's circuit, aligned
    /// with `groups`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<Vec<Sign>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuits: Option<Vec<CliffordCircuit>>,
}

impl RepackedGrouping {
    /// Checks the group count and that every base group is kept.
    pub fn new(base: Grouping, groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.len() != base.groups.len() {
            return Err(Error::Dimension { expected: base.groups.len(), found: groups.len() });
        }
        let n = base.n_terms();
        for (j, (b, g)) in base.groups.iter().zip(&groups).enumerate() {
            if let Some(&i) = g.iter().find(|&&i| i >= n) {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if let Some(i) = b.iter().find(|i| !g.contains(i)) {
                return Err(Error::InvalidArgument(format!("group {j} dropped base member {i}")));
            }
        }
        Ok(RepackedGrouping { base, groups, signs: None, circuits: None })
    }

    /// The trivial repacking `R = G`.
    pub fn from_base(base: Grouping) -> Self {
        let groups = base.groups.clone();
        RepackedGrouping { base, groups, signs: None, circuits: None }
    }

    /// `μ_i`: number of groups containing term `i`.
    pub fn multiplicity(&self) -> Vec<usize> {
        self.membership().iter().map(Vec::len).collect()
    }

    pub fn as_grouping(&self) -> Grouping {
        Grouping::new(self.n_terms(), self.groups.clone(), false).expect("indices checked on construction")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("serializable");
        let obj = v.as_object_mut().expect("object");
        obj.insert("disjoint".into(), serde_json::Value::Bool(false));
        obj.insert("multiplicity".into(), serde_json::to_value(self.multiplicity()).expect("serializable"));
        v
    }

    pub fn from_json(value: &serde_json::Value, n_terms: usize) -> Result<Self> {
        let r: RepackedGrouping = serde_json::from_value(value.clone())?;
        let base = Grouping::new(n_terms, r.base.groups, r.base.disjoint)?;
        let mut out = RepackedGrouping::new(base, r.groups)?;
        if let Some(signs) = &r.signs {
            if signs.len() != out.groups.len() || signs.iter().zip(&out.groups).any(|(s, g)| s.len() != g.len()) {
                return Err(Error::InvalidArgument("sign table does not match groups".into()));
            }
        }
        if let Some(c) = &r.circuits {
            if c.len() != out.groups.len() {
                return Err(Error::Dimension { expected: out.groups.len(), found: c.len() });
            }
        }
        out.signs = r.signs;
        out.circuits = r.circuits;
        Ok(out)
    }
}

impl Cover for RepackedGrouping {
    fn n_terms(&self) -> usize {
        self.base.n_terms()
    }

    fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// Post-hoc repacking with one fixed circuit per base group.
pub fn posthoc_repack<T: Real>(h: &Hamiltonian<T>, base: &Grouping, circuits: &[CliffordCircuit]) -> Result<RepackedGrouping> {
    if circuits.len() != base.groups.len() {
        return Err(Error::Dimension { expected: base.groups.len(), found: circuits.len() });
    }
    if base.n_terms() != h.len() {
        return Err(Error::Dimension { expected: h.len(), found: base.n_terms() });
    }
    if let Some(c) = circuits.iter().find(|c| c.num_qubits() != h.num_qubits()) {
        return Err(Error::Dimension { expected: h.num_qubits(), found: c.num_qubits() });
    }
    let per_group: Vec<(Vec<usize>, Vec<Sign>)> = base
        .groups
        .par_iter()
        .zip(circuits.par_iter())
        .enumerate()
        .map(|(j, (g, c))| {
            let tab = Tableau::new(c);
            if let Some(&i) = g.iter().find(|&&i| !tab.maps_to_diagonal(h.pauli(i))) {
                return Err(Error::InvalidDiagonalizer { group: j, term: i });
            }
            let mut members = g.clone();
            let mut in_base = vec![false; h.len()];
            for &i in g {
                in_base[i] = true;
            }
            members.extend((0..h.len()).filter(|&i| !in_base[i] && tab.maps_to_diagonal(h.pauli(i))));
            let signs = members
                .iter()
                .map(|&i| {
                    let img = c.conjugate(h.pauli(i))?;
                    debug_assert!(img.pauli.is_z_diagonal());
                    Ok(img.sign)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((members, signs))
        })
        .collect::<Result<Vec<_>>>()?;
    let (groups, signs): (Vec<_>, Vec<_>) = per_group.into_iter().unzip();
    let mut r = RepackedGrouping::new(base.clone(), groups)?;
    r.signs = Some(signs);
    r.circuits = Some(circuits.to_vec());
    Ok(r)
}

/// Synthesize a diagonalizing circuit for every base group, then repack.
pub fn posthoc_repack_synthesized<T: Real>(h: &Hamiltonian<T>, base: &Grouping) -> Result<RepackedGrouping> {
    let circuits = base
        .groups
        .par_iter()
        .map(|g| {
            let paulis: Vec<_> = g.iter().map(|&i| h.pauli(i).clone()).collect();
            diagonalize(&paulis).map(|d| d.circuit)
        })
        .collect::<Result<Vec<_>>>()?;
    posthoc_repack(h, base, &circuits)
}

/// Greedy ad-hoc repacking.
///
/// Repeatedly takes the term with the largest score `c_i² / μ_i` that still
/// has a compatible group it is not in, and inserts it into the lowest such
/// group. Score ties go to the lower term index. Each term keeps the set of
/// groups it could still join; a group growing can only shrink those sets,
/// so a term whose set empties is never revisited. The result is maximal.
pub fn adhoc_repack<T: Real, O: CommutationOracle<T> + Sync + ?Sized>(oracle: &O, base: &Grouping) -> Result<RepackedGrouping> {
    let n = oracle.term_count();
    if base.n_terms() != n {
        return Err(Error::Dimension { expected: n, found: base.n_terms() });
    }
    let mut groups = base.groups.clone();
    let m = groups.len();
    let member: Vec<Vec<bool>> = {
        let mut v = vec![vec![false; m]; n];
        for (j, g) in groups.iter().enumerate() {
            for &i in g {
                v[i][j] = true;
            }
        }
        v
    };
    let mut compat: Vec<BTreeSet<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (0..m).filter(|&j| !member[i][j] && oracle.compatible(i, &groups[j])).collect())
        .collect();
    // candidates[j]: terms that may still join group j
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, c) in compat.iter().enumerate() {
        for &j in c {
            candidates[j].push(i);
        }
    }
    let mut mu: Vec<usize> = membership_map(n, &groups).iter().map(Vec::len).collect();
    if let Some(i) = mu.iter().position(|&k| k == 0) {
        return Err(Error::InvalidArgument(format!("base grouping does not cover term {i}")));
    }
    let score = |i: usize, mu: usize| {
        let c = oracle.coefficient(i);
        Ordered(c * c / T::of_usize(mu))
    };
    let mut heap: BinaryHeap<(Ordered<T>, Reverse<usize>, usize)> =
        (0..n).filter(|&i| !compat[i].is_empty()).map(|i| (score(i, mu[i]), Reverse(i), mu[i])).collect();

    while let Some((_, Reverse(i), stamp)) = heap.pop() {
        if stamp != mu[i] {
            continue;
        }
        let Some(&j) = compat[i].iter().next() else { continue };
        groups[j].push(i);
        mu[i] += 1;
        compat[i].remove(&j);
        let cand = std::mem::take(&mut candidates[j]);
        let mut keep = Vec::with_capacity(cand.len());
        for t in cand {
            if t == i {
                continue;
            }
            if oracle.commutes(t, i) {
                keep.push(t);
            } else {
                compat[t].remove(&j);
            }
        }
        candidates[j] = keep;
        if !compat[i].is_empty() {
            heap.push((score(i, mu[i]), Reverse(i), mu[i]));
        }
    }
    RepackedGrouping::new(base.clone(), groups)
}

/// True iff `fine[j] ⊇ coarse[j]` for every `j`.
pub fn is_refinement(coarse: &[Vec<usize>], fine: &[Vec<usize>]) -> Result<bool> {
    if coarse.len() != fine.len() {
        return Err(Error::Dimension { expected: coarse.len(), found: fine.len() });
    }
    Ok(coarse.iter().zip(fine).all(|(a, b)| {
        let b: std::collections::HashSet<_> = b.iter().collect();
        a.iter().all(|i| b.contains(i))
    }))
}

/// Refinement with at least one group strictly larger.
pub fn is_proper_refinement(coarse: &[Vec<usize>], fine: &[Vec<usize>]) -> Result<bool> {
    Ok(is_refinement(coarse, fine)? && coarse.iter().zip(fine).any(|(a, b)| set_len(b) > set_len(a)))
}

fn set_len(g: &[usize]) -> usize {
    g.iter().collect::<std::collections::HashSet<_>>().len()
}

/// First `(term, group)` pair that could legally be inserted, if any.
pub fn find_insertion<T: Real, O: CommutationOracle<T> + ?Sized>(oracle: &O, groups: &[Vec<usize>]) -> Option<(usize, usize)> {
    for i in 0..oracle.term_count() {
        for (j, g) in groups.iter().enumerate() {
            if !g.contains(&i) && oracle.compatible(i, g) {
                return Some((i, j));
            }
        }
    }
    None
}

pub fn is_maximal<T: Real, O: CommutationOracle<T> + ?Sized>(oracle: &O, groups: &[Vec<usize>]) -> bool {
    find_insertion(oracle, groups).is_none()
}

/// Sweep the terms in index order, adding each to every group it fits.
/// Groups only grow, so one sweep leaves nothing insertable.
pub fn complete_to_maximal<T: Real, O: CommutationOracle<T> + ?Sized>(oracle: &O, r: &RepackedGrouping) -> RepackedGrouping {
    let mut groups = r.groups.clone();
    for i in 0..oracle.term_count() {
        for g in groups.iter_mut() {
            if !g.contains(&i) && oracle.compatible(i, g) {
                g.push(i);
            }
        }
    }
    RepackedGrouping { base: r.base.clone(), groups, signs: None, circuits: None }
}

/// Effect of inserting term `s` into group `ℓ` under fixed shot counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct OneStepDelta<T: Real> {
    pub var_before: T,
    pub var_after: T,
    /// `Var(before) - Var(after)`, recomputed directly.
    pub delta: T,
    pub decreases: bool,
    /// `½ c_s² σ²_s`
    pub lemma_lhs: T,
    pub lemma_rhs: T,
    /// `delta` as predicted in closed form from `lhs - rhs`.
    pub lemma_delta: T,
    /// The closed-form and direct signs agree (up to a relative 1e-10 band).
    pub consistent: bool,
}

pub fn one_step_delta<T: Real, O: CommutationOracle<T> + ?Sized, Mo: Moments<T> + ?Sized>(
    oracle: &O,
    groups: &[Vec<usize>],
    l: usize,
    s: usize,
    moments: &Mo,
    alloc: &ShotAllocation<T>,
) -> Result<OneStepDelta<T>> {
    let n = oracle.term_count();
    if l >= groups.len() {
        return Err(Error::IndexOutOfRange { index: l, len: groups.len() });
    }
    if s >= n {
        return Err(Error::IndexOutOfRange { index: s, len: n });
    }
    if groups[l].contains(&s) {
        return Err(Error::InvalidArgument(format!("term {s} is already in group {l}")));
    }
    if let Some(&k) = groups[l].iter().find(|&&k| !oracle.commutes(s, k)) {
        return Err(Error::NotCommuting { a: s, b: k });
    }
    let coeffs = oracle.coefficient_vec();
    let before = Grouping::new(n, groups.to_vec(), false)?;
    let mut after_groups = groups.to_vec();
    after_groups[l].push(s);
    let after = Grouping::new(n, after_groups, false)?;
    let var_before = shot_weighted_variance(&coeffs, &before, alloc, moments)?.total;
    let var_after = shot_weighted_variance(&coeffs, &after, alloc, moments)?.total;
    let delta = var_before - var_after;

    let gamma = before.membership();
    let m = alloc.shots();
    let alpha = |i: usize| gamma[i].iter().map(|&j| m[j]).sum::<T>();
    let alpha_s = alpha(s);
    let ml = m[l];
    let cs = coeffs[s];
    let lemma_lhs = T::of(0.5) * cs * cs * moments.var(s);
    let mut in_l = vec![false; n];
    for &i in &groups[l] {
        in_l[i] = true;
    }
    let mut rhs = T::zero();
    for i in (0..n).filter(|&i| i != s) {
        let alpha_is: T = gamma[i].iter().filter(|j| gamma[s].contains(j)).map(|&j| m[j]).sum();
        if in_l[i] {
            let b = coeffs[i] * cs * moments.cov(i, s)?;
            rhs += b * (alpha_s - alpha_is) / alpha(i);
        } else if alpha_is > T::zero() {
            let b = coeffs[i] * cs * moments.cov(i, s)?;
            rhs -= b * alpha_is / alpha(i);
        }
    }
    let lemma_delta = T::of(2.0) * ml / (alpha_s * (alpha_s + ml)) * (lemma_lhs - rhs);
    let tol = T::of(1e-10) * var_before.abs().max(var_after.abs()).max(T::min_positive_value());
    let side = |x: T| if x > tol { 1 } else if x < -tol { -1 } else { 0 };
    let consistent = side(delta) == side(lemma_delta) || (delta - lemma_delta).abs() <= tol;
    Ok(OneStepDelta {
        var_before,
        var_after,
        delta,
        decreases: delta > T::zero(),
        lemma_lhs,
        lemma_rhs: rhs,
        lemma_delta,
        consistent,
    })
}
