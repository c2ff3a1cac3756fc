mod common;

use common::*;
use overgroup::hamiltonian::hubbard_lattice;
use overgroup::rng::seeded;
use overgroup::*;
use proptest::prelude::*;
use rand::Rng as _;

fn label_strategy(n: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(prop_oneof![Just('I'), Just('X'), Just('Y'), Just('Z')], n)
        .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #[test]
    fn product_phase_matches_matrices((a, b) in (1usize..5).prop_flat_map(|n| (label_strategy(n), label_strategy(n)))) {
        let pa: PauliString = a.parse().unwrap();
        let pb: PauliString = b.parse().unwrap();
        let (phase, q) = pa.multiply(&pb).unwrap();
        let (re, im) = phase.to_complex_parts();
        let lhs = pauli_matrix(&a) * pauli_matrix(&b);
        let rhs = pauli_of(&q) * c(re as f64, im as f64);
        prop_assert!(approx_eq(&lhs, &rhs, 1e-12));
        let comm = pauli_matrix(&a) * pauli_matrix(&b) - pauli_matrix(&b) * pauli_matrix(&a);
        prop_assert_eq!(pa.commutes(&pb).unwrap(), comm.iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn conjugation_matches_unitary(seed in any::<u64>(), label in (1usize..5).prop_flat_map(label_strategy)) {
        let n = label.len();
        let mut r = seeded(seed);
        let circ = random_circuit(n, 12, &mut r);
        let u = circuit_matrix(&circ);
        let p: PauliString = label.parse().unwrap();
        let img = circ.conjugate(&p).unwrap();
        let lhs = &u * pauli_of(&p) * u.adjoint();
        let rhs = pauli_of(&img.pauli) * c(signed(img.sign), 0.0);
        prop_assert!(approx_eq(&lhs, &rhs, 1e-10));
        let back = circ.inverse().conjugate_signed(&img).unwrap();
        prop_assert_eq!(back, SignedPauli::plus(p));
    }

    #[test]
    fn statevector_matches_dense(seed in any::<u64>(), label in (1usize..5).prop_flat_map(label_strategy)) {
        let n = label.len();
        let mut r = seeded(seed);
        let s: StateVector64 = ProductState::random_with(n, &mut r).unwrap().to_state_vector().unwrap();
        let circ = random_circuit(n, 10, &mut r);
        let rotated = s.apply_circuit(&circ).unwrap();
        let psi = state_column(&s);
        prop_assert!(approx_eq(&state_column(&rotated), &(circuit_matrix(&circ) * &psi), 1e-10));
        let p: PauliString = label.parse().unwrap();
        let e = expect(&psi, &pauli_of(&p));
        prop_assert!((s.expectation(&p).unwrap() - e.re).abs() < 1e-10);
        let applied = StateVector64::normalized(n, s.apply_pauli(&p).unwrap()).unwrap();
        prop_assert!(approx_eq(&state_column(&applied), &(pauli_of(&p) * &psi), 1e-10));
    }
}

#[test]
fn diagonalizers_on_random_stabilizer_subsets() {
    let mut r = seeded(77);
    for trial in 0..120 {
        let n = 1 + trial % 5;
        let size = r.random_range(1..=2 * n);
        let group = random_commuting_set(n, size, &mut r);
        let d = diagonalize(&group).unwrap();
        let u = circuit_matrix(&d.circuit);
        for (p, img) in group.iter().zip(&d.images) {
            assert!(img.pauli.is_z_diagonal());
            let lhs = &u * pauli_of(p) * u.adjoint();
            assert!(approx_eq(&lhs, &(pauli_of(&img.pauli) * c(signed(img.sign), 0.0)), 1e-10));
        }
        assert!(d.circuit.len() <= 2 * n * n, "{} gates for n={n}", d.circuit.len());
    }
}

#[test]
fn variance_split_matches_dense() {
    let mut r = seeded(5);
    for n in 2..=4 {
        let h: Hamiltonian64 = gen_random(n, 0.3, n as u64).unwrap();
        let s: StateVector64 = ProductState::random_with(n, &mut r).unwrap().to_state_vector().unwrap();
        let v = variance_covariance_split(&s, &h).unwrap();
        let hm = hamiltonian_matrix(&h);
        let psi = state_column(&s);
        let mean = expect(&psi, &hm).re;
        let second = expect(&psi, &(&hm * &hm)).re;
        assert!((v.total - (second - mean * mean)).abs() < 1e-10);
        let d: f64 = h
            .terms()
            .iter()
            .map(|t| {
                let e = expect(&psi, &pauli_of(&t.pauli)).re;
                t.coeff * t.coeff * (1.0 - e * e)
            })
            .sum();
        assert!((v.diagonal - d).abs() < 1e-10);
    }
}

#[test]
fn exact_moments_match_dense_covariances() {
    let h: Hamiltonian64 = gen_random(3, 0.4, 9).unwrap();
    let g = sorted_insertion(&h);
    let s: StateVector64 = product_state_seeded(3, 4).unwrap();
    let m = exact_moments_for_cover(&s, &h, &g).unwrap();
    let psi = state_column(&s);
    for grp in &g.groups {
        for (a, &i) in grp.iter().enumerate() {
            for &k in &grp[a + 1..] {
                let pi = pauli_of(h.pauli(i));
                let pk = pauli_of(h.pauli(k));
                let cov = expect(&psi, &(&pi * &pk)).re - expect(&psi, &pi).re * expect(&psi, &pk).re;
                assert!((m.cov(i, k).unwrap() - cov).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn witness_state_matches_dense_ising() {
    for n in [2usize, 4, 6] {
        let h: Hamiltonian64 = gen_ising_all_to_all(n).unwrap();
        let s: StateVector64 = ising_witness_state(n).unwrap();
        let hm = hamiltonian_matrix(&h);
        let psi = state_column(&s);
        let mean = expect(&psi, &hm).re;
        let var = expect(&psi, &(&hm * &hm)).re - mean * mean;
        assert!((var - (n as f64).powi(4) / 16.0).abs() < 1e-9);
    }
}

/// Jordan-Wigner annihilation operator on site `j`: `Z…Z (X + iY)/2`.
fn annihilation(sites: usize, j: usize) -> Mat {
    let mut m = Mat::from_element(1, 1, c(1.0, 0.0));
    for q in 0..sites {
        let f = if q < j {
            single('Z')
        } else if q == j {
            (single('X') + single('Y') * c(0.0, 1.0)) * c(0.5, 0.0)
        } else {
            single('I')
        };
        m = m.kronecker(&f);
    }
    m
}

#[test]
fn hubbard_matches_fermionic_operators() {
    for (n, t, v) in [(2usize, 1.0, 1.0), (3, 0.7, -1.3)] {
        let h: Hamiltonian64 = gen_hubbard_spinless_2xn(n, t, v).unwrap();
        let (sites, bonds) = hubbard_lattice(n);
        let dim = 1 << sites;
        let a: Vec<Mat> = (0..sites).map(|j| annihilation(sites, j)).collect();
        let mut f = Mat::zeros(dim, dim);
        for &(i, j) in &bonds {
            let hop = a[i].adjoint() * &a[j];
            f -= (&hop + hop.adjoint()) * c(t, 0.0);
            let ni = a[i].adjoint() * &a[i];
            let nj = a[j].adjoint() * &a[j];
            f += ni * nj * c(v, 0.0);
        }
        // the constant V/4 per bond is dropped by the generator
        f -= identity(dim) * c(v * bonds.len() as f64 / 4.0, 0.0);
        assert!(approx_eq(&hamiltonian_matrix(&h), &f, 1e-10), "n={n}");
    }
}

#[test]
fn hubbard_bond_counts() {
    assert_eq!(hubbard_lattice(2).1.len(), 4);
    assert_eq!(hubbard_lattice(3).1.len(), 9);
    assert_eq!(hubbard_lattice(4).1.len(), 12);
}
