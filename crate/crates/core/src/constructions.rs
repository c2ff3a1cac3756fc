//! A family of abstract Hamiltonians on which sorted insertion is a factor
//! `Θ(L)` worse than an overlapped grouping.
//!
//! Terms carry labels over an uppercase alphabet `U` and a lowercase alphabet
//! `L` of size `L` each: every pair `Uℓ`, plus a lowercase-only term `ℓ` for
//! all letters but the last. Uppercase-labelled terms commute with each other;
//! `ℓ` commutes only with the terms ending in `ℓ`.

use serde::{Deserialize, Serialize};

use crate::allocation::{alloc_l2, alloc_optimize, min_variance_disjoint, AllocOptions};
use crate::error::{Error, Result};
use crate::estimator::ZeroCovariance;
use crate::grouping::{CommutationOracle, Grouping};
use crate::hamiltonian::AbstractHamiltonian;
use crate::repacking::RepackedGrouping;
use crate::scalar::Real;

/// What a term's label is made of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem1Label {
    Lower(usize),
    Pair { upper: usize, lower: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Instance<T: Real> {
    pub l: usize,
    pub hamiltonian: AbstractHamiltonian<T>,
    pub labels: Vec<Theorem1Label>,
}

fn letter(i: usize, upper: bool) -> String {
    let base = if upper { b'A' } else { b'a' };
    let c = (base + (i % 26) as u8) as char;
    if i < 26 {
        c.to_string()
    } else {
        format!("{c}{}", i / 26)
    }
}

impl Theorem1Label {
    pub fn name(&self) -> String {
        match *self {
            Theorem1Label::Lower(l) => letter(l, false),
            Theorem1Label::Pair { upper, lower } => format!("{}{}", letter(upper, true), letter(lower, false)),
        }
    }

    fn is_pair(&self) -> bool {
        matches!(self, Theorem1Label::Pair { .. })
    }

    fn lower(&self) -> usize {
        match *self {
            Theorem1Label::Lower(l) | Theorem1Label::Pair { lower: l, .. } => l,
        }
    }
}

/// Labels in descending-coefficient order: for each letter `ℓ`, the term `ℓ`
/// (absent for the last letter) followed by `Aℓ, Bℓ, …`.
fn labels(l: usize) -> Vec<Theorem1Label> {
    let mut out = Vec::with_capacity(l * l + l - 1);
    for lower in 0..l {
        if lower + 1 < l {
            out.push(Theorem1Label::Lower(lower));
        }
        for upper in 0..l {
            out.push(Theorem1Label::Pair { upper, lower });
        }
    }
    out
}

fn adjacent(a: &Theorem1Label, b: &Theorem1Label) -> bool {
    a == b || (a.is_pair() && b.is_pair()) || a.lower() == b.lower()
}

/// Builds the instance with `|c_k| = 1 + (N - 1 - k) δ`, `δ = 1/(2N(2L+1))`,
/// so descending magnitude visits terms in index order. With `unit` every
/// coefficient is 1 and index order breaks the ties the same way.
pub fn build_theorem1<T: Real>(l: usize, unit: bool) -> Result<Theorem1Instance<T>> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("need L >= 2, got {l}")));
    }
    let labels = labels(l);
    let n = labels.len();
    let delta = 1.0 / (2.0 * n as f64 * (2 * l + 1) as f64);
    let coefficients = (0..n)
        .map(|k| if unit { T::one() } else { T::of(1.0 + (n - 1 - k) as f64 * delta) })
        .collect();
    let adjacency: Vec<Vec<bool>> =
        labels.iter().map(|a| labels.iter().map(|b| adjacent(a, b)).collect()).collect();
    Ok(Theorem1Instance { l, hamiltonian: AbstractHamiltonian::new(coefficients, &adjacency)?, labels })
}

impl<T: Real> Theorem1Instance<T> {
    pub fn n_terms(&self) -> usize {
        self.labels.len()
    }

    pub fn label_names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.name()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.n_terms();
        let adjacency: Vec<Vec<u64>> = (0..n).map(|i| self.hamiltonian.packed_row(i).to_vec()).collect();
        let coefficients: Vec<f64> = self.hamiltonian.coefficients().iter().map(|c| c.to_f64_lossy()).collect();
        serde_json::json!({
            "L": self.l,
            "labels": self.label_names(),
            "coefficients": coefficients,
            "adjacency": adjacency,
        })
    }
}

/// The three groupings of the construction.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalGroupings {
    /// One group per letter: `ℓ` with every `Uℓ`.
    pub g: Grouping,
    /// All uppercase-labelled terms, then each `ℓ` alone.
    pub g_prime: Grouping,
    /// `G` with its last group grown to every uppercase-labelled term.
    pub r: RepackedGrouping,
    /// The same groups as `r`, ordered to extend `g_prime` group by group.
    pub r_over_g_prime: RepackedGrouping,
}

pub fn canonical_groupings<T: Real>(inst: &Theorem1Instance<T>) -> Result<CanonicalGroupings> {
    let l = inst.l;
    let n = inst.n_terms();
    let mut g = vec![Vec::new(); l];
    let mut upper = Vec::new();
    let mut singles = Vec::new();
    for (i, lab) in inst.labels.iter().enumerate() {
        g[lab.lower()].push(i);
        match lab {
            Theorem1Label::Pair { .. } => upper.push(i),
            Theorem1Label::Lower(_) => singles.push(vec![i]),
        }
    }
    let mut r = g.clone();
    r[l - 1] = upper.clone();
    let mut gp = vec![upper];
    gp.extend(singles);
    let mut r_perm = vec![r[l - 1].clone()];
    r_perm.extend(r[..l - 1].iter().cloned());

    let g = Grouping::new(n, g, true)?;
    let g_prime = Grouping::new(n, gp, true)?;
    Ok(CanonicalGroupings {
        r: RepackedGrouping::new(g.clone(), r)?,
        r_over_g_prime: RepackedGrouping::new(g_prime.clone(), r_perm)?,
        g,
        g_prime,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Variances {
    #[serde(rename = "L")]
    pub l: usize,
    pub n_terms: usize,
    pub var_g: f64,
    pub var_g_prime: f64,
    pub var_r: f64,
    pub ratio_g_r: f64,
    pub ratio_g_prime_r: f64,
    pub ratio_g_g_prime: f64,
    pub kkt_residual: f64,
}

/// Optimal variances under unit variances and zero covariance. `Var*(R)` is
/// optimized from both inherited allocations and the better result kept.
pub fn theorem1_variances<T: Real>(inst: &Theorem1Instance<T>, m_tot: T) -> Result<Theorem1Variances> {
    let c = inst.hamiltonian.coefficient_vec();
    let cg = canonical_groupings(inst)?;
    let var_g = min_variance_disjoint(&c, &cg.g, m_tot);
    let var_gp = min_variance_disjoint(&c, &cg.g_prime, m_tot);
    let moments = ZeroCovariance::unit(c.len());

    let from_g = alloc_l2(&c, &cg.g, m_tot)?;
    let from_gp = alloc_l2(&c, &cg.g_prime, m_tot)?;
    // G' group 0 is R's last group, G' group ℓ+1 is R's group ℓ
    let l = inst.l;
    let mut gp_start = vec![0.0; l];
    gp_start[l - 1] = from_gp.shots()[0].to_f64_lossy();
    for j in 0..l - 1 {
        gp_start[j] = from_gp.shots()[j + 1].to_f64_lossy();
    }
    let starts = [from_g.shots().iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(), gp_start];
    let mut best = None;
    for s in starts {
        let opts = AllocOptions { start: Some(s), ..AllocOptions::default() };
        let o = alloc_optimize(&c, &cg.r, &moments, m_tot, &opts)?;
        if best.as_ref().is_none_or(|b: &crate::allocation::OptimizedAllocation<T>| o.variance < b.variance) {
            best = Some(o);
        }
    }
    let best = best.expect("two starts");
    let var_r = best.variance.to_f64_lossy();
    let (vg, vgp) = (var_g.to_f64_lossy(), var_gp.to_f64_lossy());
    Ok(Theorem1Variances {
        l,
        n_terms: c.len(),
        var_g: vg,
        var_g_prime: vgp,
        var_r,
        ratio_g_r: vg / var_r,
        ratio_g_prime_r: vgp / var_r,
        ratio_g_g_prime: vg / vgp,
        kkt_residual: best.kkt_residual.to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::{sorted_insertion, validate_grouping};
    use crate::repacking::is_refinement;

    fn names(inst: &Theorem1Instance<f64>, groups: &[Vec<usize>]) -> Vec<Vec<String>> {
        groups.iter().map(|g| g.iter().map(|&i| inst.labels[i].name()).collect()).collect()
    }

    #[test]
    fn sizes() {
        for l in 2..=6 {
            let inst = build_theorem1::<f64>(l, false).unwrap();
            assert_eq!(inst.n_terms(), l * l + l - 1);
        }
        assert!(build_theorem1::<f64>(1, false).is_err());
    }

    #[test]
    fn l2_groupings_by_name() {
        let inst = build_theorem1::<f64>(2, false).unwrap();
        let cg = canonical_groupings(&inst).unwrap();
        assert_eq!(names(&inst, &cg.g.groups), vec![vec!["a", "Aa", "Ba"], vec!["Ab", "Bb"]]);
        assert_eq!(names(&inst, &cg.g_prime.groups), vec![vec!["Aa", "Ba", "Ab", "Bb"], vec!["a"]]);
        assert_eq!(names(&inst, &cg.r.groups), vec![vec!["a", "Aa", "Ba"], vec!["Aa", "Ba", "Ab", "Bb"]]);
    }

    #[test]
    fn adjacency_invariants() {
        for l in 2..=4 {
            let inst = build_theorem1::<f64>(l, false).unwrap();
            let h = &inst.hamiltonian;
            for (i, a) in inst.labels.iter().enumerate() {
                for (k, b) in inst.labels.iter().enumerate() {
                    let expect = match (a, b) {
                        _ if i == k => true,
                        (Theorem1Label::Pair { .. }, Theorem1Label::Pair { .. }) => true,
                        (Theorem1Label::Lower(x), Theorem1Label::Pair { lower, .. })
                        | (Theorem1Label::Pair { lower, .. }, Theorem1Label::Lower(x)) => x == lower,
                        _ => false,
                    };
                    assert_eq!(h.commutes(i, k), expect, "{} {}", a.name(), b.name());
                }
            }
            let c = h.coefficients();
            assert!(c.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn groupings_are_valid_and_nested() {
        for l in 2..=8 {
            let inst = build_theorem1::<f64>(l, false).unwrap();
            let cg = canonical_groupings(&inst).unwrap();
            assert_eq!(sorted_insertion(&inst.hamiltonian), cg.g, "L={l}");
            for g in [&cg.g.groups, &cg.g_prime.groups, &cg.r.groups, &cg.r_over_g_prime.groups] {
                assert!(validate_grouping(&inst.hamiltonian, g, false).unwrap().is_empty());
            }
            assert!(is_refinement(&cg.g.groups, &cg.r.groups).unwrap());
            assert!(is_refinement(&cg.g_prime.groups, &cg.r_over_g_prime.groups).unwrap());
            let unit = build_theorem1::<f64>(l, true).unwrap();
            assert_eq!(sorted_insertion(&unit.hamiltonian), cg.g);
        }
    }

    #[test]
    fn l2_unit_closed_forms() {
        let inst = build_theorem1::<f64>(2, true).unwrap();
        let v = theorem1_variances(&inst, 1.0).unwrap();
        let expect_g = (3f64.sqrt() + 2f64.sqrt()).powi(2);
        assert!((v.var_g - expect_g).abs() < 1e-12);
        assert!((v.var_g_prime - 9.0).abs() < 1e-12);
        assert!(v.var_r <= 9.0 + 1e-9);
    }

    #[test]
    fn ratios_grow() {
        let mut prev = 0.0;
        for l in [4, 8, 16] {
            let v = theorem1_variances(&build_theorem1::<f64>(l, false).unwrap(), 1.0).unwrap();
            assert!(v.var_r <= v.var_g_prime * (1.0 + 1e-9));
            assert!(v.ratio_g_r > prev);
            prev = v.ratio_g_r;
        }
    }

    #[test]
    fn json_shape() {
        let inst = build_theorem1::<f64>(3, false).unwrap();
        let j = inst.to_json();
        assert_eq!(j["L"], 3);
        assert_eq!(j["labels"].as_array().unwrap().len(), 11);
        assert_eq!(j["adjacency"].as_array().unwrap().len(), 11);
    }
}
