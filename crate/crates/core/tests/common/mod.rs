//! Dense-matrix reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use overgroup::{CliffordCircuit, Gate, Hamiltonian64, PauliString, Sign, StateVector64};
use rand::Rng;

pub type Mat = DMatrix<C>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn single(ch: char) -> Mat {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match ch {
        'I' => Mat::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => Mat::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => Mat::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => Mat::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("bad pauli {ch}"),
    }
}

/// Kronecker product of the label's factors, leftmost factor first.
pub fn pauli_matrix(label: &str) -> Mat {
    let mut m = Mat::from_element(1, 1, c(1.0, 0.0));
    for ch in label.chars() {
        m = m.kronecker(&single(ch));
    }
    m
}

pub fn pauli_of(p: &PauliString) -> Mat {
    pauli_matrix(&p.label())
}

pub fn identity(dim: usize) -> Mat {
    Mat::identity(dim, dim)
}

fn embed(n: usize, q: usize, g: &Mat) -> Mat {
    identity(1 << q).kronecker(g).kronecker(&identity(1 << (n - q - 1)))
}

fn bit(n: usize, b: usize, q: usize) -> usize {
    (b >> (n - 1 - q)) & 1
}

pub fn gate_matrix(n: usize, g: &Gate) -> Mat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let dim = 1 << n;
    match *g {
        Gate::H(q) => embed(n, q, &Mat::from_row_slice(2, 2, &[c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0)])),
        Gate::S(q) => embed(n, q, &Mat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)])),
        Gate::X(q) => embed(n, q, &single('X')),
        Gate::Z(q) => embed(n, q, &single('Z')),
        Gate::Cnot { control, target } => {
            let mut m = Mat::zeros(dim, dim);
            for b in 0..dim {
                let out = if bit(n, b, control) == 1 { b ^ (1 << (n - 1 - target)) } else { b };
                m[(out, b)] = c(1.0, 0.0);
            }
            m
        }
        Gate::Cz(a, bq) => {
            let mut m = Mat::zeros(dim, dim);
            for b in 0..dim {
                let s = if bit(n, b, a) == 1 && bit(n, b, bq) == 1 { -1.0 } else { 1.0 };
                m[(b, b)] = c(s, 0.0);
            }
            m
        }
    }
}

/// `U = G_k ⋯ G_1` for gates listed first to last.
pub fn circuit_matrix(circ: &CliffordCircuit) -> Mat {
    let n = circ.num_qubits();
    let mut u = identity(1 << n);
    for g in circ.gates() {
        u = gate_matrix(n, g) * u;
    }
    u
}

pub fn approx_eq(a: &Mat, b: &Mat, tol: f64) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < tol)
}

pub fn signed(sign: Sign) -> f64 {
    sign.value() as f64
}

pub fn hamiltonian_matrix(h: &Hamiltonian64) -> Mat {
    let dim = 1 << h.num_qubits();
    let mut m = Mat::zeros(dim, dim);
    for t in h.terms() {
        m += pauli_of(&t.pauli) * c(t.coeff, 0.0);
    }
    m
}

pub fn state_column(s: &StateVector64) -> DMatrix<C> {
    DMatrix::from_column_slice(s.amplitudes().len(), 1, s.amplitudes())
}

/// `⟨ψ|M|ψ⟩`
pub fn expect(psi: &DMatrix<C>, m: &Mat) -> C {
    (psi.adjoint() * m * psi)[(0, 0)]
}

pub fn random_circuit<R: Rng>(n: usize, len: usize, rng: &mut R) -> CliffordCircuit {
    let mut circ = CliffordCircuit::new(n);
    for _ in 0..len {
        let q = rng.random_range(0..n);
        let g = match rng.random_range(0..6) {
            0 => Gate::H(q),
            1 => Gate::S(q),
            2 => Gate::X(q),
            3 => Gate::Z(q),
            k if n > 1 => {
                let mut t = rng.random_range(0..n - 1);
                if t >= q {
                    t += 1;
                }
                if k == 4 {
                    Gate::Cnot { control: q, target: t }
                } else {
                    Gate::Cz(q, t)
                }
            }
            _ => Gate::H(q),
        };
        circ.push(g).unwrap();
    }
    circ
}

/// A random subset of a random stabilizer group: `Z_q` conjugated by a
/// random Clifford gives generators; members are random non-identity
/// products of generators, deduplicated.
pub fn random_commuting_set<R: Rng>(n: usize, size: usize, rng: &mut R) -> Vec<PauliString> {
    let circ = random_circuit(n, 6 * n * n, rng);
    let gens: Vec<PauliString> = (0..n)
        .map(|q| circ.conjugate(&PauliString::single(n, q, overgroup::Pauli::Z)).unwrap().pauli)
        .collect();
    let mut out: Vec<PauliString> = Vec::new();
    let mut tries = 0;
    while out.len() < size && tries < 50 * size {
        tries += 1;
        let mask: u32 = rng.random_range(1..(1u32 << n));
        let mut p = PauliString::identity(n);
        for (q, g) in gens.iter().enumerate() {
            if mask >> q & 1 == 1 {
                p = p.multiply(g).unwrap().1;
            }
        }
        if !p.is_identity() && !out.contains(&p) {
            out.push(p);
        }
    }
    out
}
