use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng as _;

use super::{Hamiltonian, Term};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::rng;
use crate::scalar::Real;

/// Random Hamiltonian: `round(density * (4^n - 1))` distinct non-identity
/// strings, coefficients uniform on `[-1, 1]` (exact zeros redrawn).
/// Terms are listed in ascending base-4 string index.
pub fn gen_random<T: Real>(n: usize, density: f64, seed: u64) -> Result<Hamiltonian<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one qubit".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!("density {density} not in (0, 1]")));
    }
    if n > 31 {
        return Err(Error::InvalidArgument(format!("{n} qubits exceeds the generator pool limit")));
    }
    let pool = (1usize << (2 * n)) - 1;
    let count = (density * pool as f64).round() as usize;
    if count == 0 {
        return Err(Error::EmptyHamiltonian);
    }
    let mut rng = rng::seeded(seed);
    let mut picks: Vec<usize> = index::sample(&mut rng, pool, count).into_vec();
    picks.sort_unstable();
    let terms = picks
        .into_iter()
        .map(|k| {
            let c = loop {
                let c: f64 = rng.random_range(-1.0..=1.0);
                if c != 0.0 {
                    break c;
                }
            };
            Term { coeff: T::of(c), pauli: PauliString::from_index(n, (k + 1) as u128) }
        })
        .collect();
    Hamiltonian::new(n, terms)
}

/// `-Σ_{i<j} Z_i Z_j` on `n` qubits.
pub fn gen_ising_all_to_all<T: Real>(n: usize) -> Result<Hamiltonian<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Ising chain needs n >= 2, got {n}")));
    }
    let mut terms = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let mut p = PauliString::identity(n);
            p.set(i, Pauli::Z);
            p.set(j, Pauli::Z);
            terms.push(Term { coeff: -T::one(), pauli: p });
        }
    }
    Hamiltonian::new(n, terms)
}

/// Site numbering and bond list of the periodic 2 x `n` lattice.
///
/// Sites are numbered in a row-major snake: row 0 left to right, row 1 right
/// to left. Bonds are unique unordered pairs `(i, j)` with `i < j`; the
/// wrap-around bond of a length-2 direction coincides with the direct bond
/// and is counted once.
pub fn hubbard_lattice(n: usize) -> (usize, Vec<(usize, usize)>) {
    let site = |r: usize, c: usize| if r == 0 { c } else { n + (n - 1 - c) };
    let mut bonds = BTreeSet::new();
    for r in 0..2 {
        for c in 0..n {
            let (a, b) = (site(r, c), site(r, (c + 1) % n));
            if a != b {
                bonds.insert((a.min(b), a.max(b)));
            }
        }
    }
    for c in 0..n {
        let (a, b) = (site(0, c), site(1, c));
        bonds.insert((a.min(b), a.max(b)));
    }
    (2 * n, bonds.into_iter().collect())
}

/// Spinless Fermi-Hubbard model on the periodic 2 x `n` lattice under the
/// Jordan-Wigner map, `-t Σ (a†_i a_j + h.c.) + V Σ n_i n_j` over bonds, with
/// the constant shift dropped.
pub fn gen_hubbard_spinless_2xn<T: Real>(n: usize, t: T, v: T) -> Result<Hamiltonian<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("lattice needs n >= 2, got {n}")));
    }
    let (sites, bonds) = hubbard_lattice(n);
    let half = T::of(0.5);
    let quarter = T::of(0.25);
    let mut items: Vec<(T, PauliString)> = Vec::new();
    for &(i, j) in &bonds {
        if t != T::zero() {
            for f in [Pauli::X, Pauli::Y] {
                let mut p = PauliString::identity(sites);
                p.set(i, f);
                for q in i + 1..j {
                    p.set(q, Pauli::Z);
                }
                p.set(j, f);
                items.push((-t * half, p));
            }
        }
        if v != T::zero() {
            // n_i n_j = (1 - Z_i - Z_j + Z_i Z_j) / 4
            items.push((-v * quarter, PauliString::single(sites, i, Pauli::Z)));
            items.push((-v * quarter, PauliString::single(sites, j, Pauli::Z)));
            let mut zz = PauliString::single(sites, i, Pauli::Z);
            zz.set(j, Pauli::Z);
            items.push((v * quarter, zz));
        }
    }
    Hamiltonian::from_accumulated(sites, items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_pool_and_rounding() {
        let h: Hamiltonian<f64> = gen_random(2, 1.0, 1).unwrap();
        assert_eq!(h.len(), 15);
        for seed in 0..20 {
            let h: Hamiltonian<f64> = gen_random(2, 0.1, seed).unwrap();
            assert_eq!(h.len(), 2);
        }
        let a: Hamiltonian<f64> = gen_random(4, 0.1, 99).unwrap();
        let b: Hamiltonian<f64> = gen_random(4, 0.1, 99).unwrap();
        assert_eq!(a, b);
        assert!(gen_random::<f64>(3, 0.0, 0).is_err());
        assert!(gen_random::<f64>(3, 1.5, 0).is_err());
        assert!(gen_random::<f64>(1, 0.1, 0).is_err());
    }

    #[test]
    fn random_coefficients_are_centred() {
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..60 {
            let h: Hamiltonian<f64> = gen_random(5, 0.2, seed).unwrap();
            for c in h.coefficients() {
                assert!(c != 0.0 && (-1.0..=1.0).contains(&c));
                sum += c;
                count += 1;
            }
        }
        assert!(count >= 10_000);
        let se = (1.0 / 3.0 / count as f64).sqrt();
        assert!((sum / count as f64).abs() < 5.0 * se);
    }

    #[test]
    fn ising_instances() {
        let h: Hamiltonian<f64> = gen_ising_all_to_all(2).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!((h.coefficient(0), h.pauli(0).label()), (-1.0, "ZZ".to_string()));
        let h: Hamiltonian<f64> = gen_ising_all_to_all(3).unwrap();
        let labels: Vec<String> = h.terms().iter().map(|t| t.pauli.label()).collect();
        assert_eq!(labels, ["ZZI", "ZIZ", "IZZ"]);
        assert_eq!(gen_ising_all_to_all::<f64>(6).unwrap().len(), 15);
        assert!(gen_ising_all_to_all::<f64>(1).is_err());
    }

    #[test]
    fn hubbard_lattice_bonds() {
        assert_eq!(hubbard_lattice(2).1, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert_eq!(hubbard_lattice(3).1.len(), 9);
        assert_eq!(hubbard_lattice(5).1.len(), 15);
    }

    #[test]
    fn hubbard_hopping_only() {
        let h: Hamiltonian<f64> = gen_hubbard_spinless_2xn(2, 1.0, 0.0).unwrap();
        for t in h.terms() {
            assert_eq!(t.coeff.abs(), 0.5);
            assert!(t.coeff.is_finite());
        }
        assert_eq!(h.len(), 8);
    }

    #[test]
    fn hubbard_interaction_only_is_diagonal() {
        let h: Hamiltonian<f64> = gen_hubbard_spinless_2xn(3, 0.0, 1.0).unwrap();
        assert!(h.terms().iter().all(|t| t.pauli.is_z_diagonal()));
        assert!(gen_hubbard_spinless_2xn::<f64>(1, 1.0, 1.0).is_err());
    }
}
