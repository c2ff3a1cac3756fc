//! Clifford circuits that diagonalize commuting Pauli sets.
//!
//! Conjugation follows the Heisenberg picture: for a circuit `U = g_k ⋯ g_1`
//! the image of `P` is `U P U†`, computed gate by gate with the standard
//! symplectic update rules and an exact sign bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliString, Sign, SignedPauli};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GateJson", into = "GateJson")]
pub enum Gate {
    H(usize),
    S(usize),
    Cnot { control: usize, target: usize },
    Cz(usize, usize),
    X(usize),
    Z(usize),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::S(q) | Gate::X(q) | Gate::Z(q) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::Cz(a, b) => vec![a, b],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::S(_) => "s",
            Gate::Cnot { .. } => "cx",
            Gate::Cz(..) => "cz",
            Gate::X(_) => "x",
            Gate::Z(_) => "z",
        }
    }

    /// `P -> g P g†` in place.
    fn conjugate_in_place(&self, p: &mut PauliString, sign: &mut Sign) {
        match *self {
            Gate::H(q) => {
                let (x, z) = (p.x_bit(q), p.z_bit(q));
                *sign = sign.flipped_if(x && z);
                p.set_x(q, z);
                p.set_z(q, x);
            }
            Gate::S(q) => {
                let (x, z) = (p.x_bit(q), p.z_bit(q));
                *sign = sign.flipped_if(x && z);
                p.set_z(q, z ^ x);
            }
            Gate::X(q) => *sign = sign.flipped_if(p.z_bit(q)),
            Gate::Z(q) => *sign = sign.flipped_if(p.x_bit(q)),
            Gate::Cnot { control: c, target: t } => {
                let (xc, zc, xt, zt) = (p.x_bit(c), p.z_bit(c), p.x_bit(t), p.z_bit(t));
                *sign = sign.flipped_if(xc && zt && !(xt ^ zc));
                p.set_x(t, xt ^ xc);
                p.set_z(c, zc ^ zt);
            }
            Gate::Cz(a, b) => {
                Gate::H(b).conjugate_in_place(p, sign);
                Gate::Cnot { control: a, target: b }.conjugate_in_place(p, sign);
                Gate::H(b).conjugate_in_place(p, sign);
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GateJson {
    gate: String,
    qubits: Vec<usize>,
}

impl From<Gate> for GateJson {
    fn from(g: Gate) -> Self {
        GateJson { gate: g.name().to_string(), qubits: g.qubits() }
    }
}

impl TryFrom<GateJson> for Gate {
    type Error = String;
    fn try_from(j: GateJson) -> std::result::Result<Self, String> {
        let arity = |k: usize| {
            if j.qubits.len() == k {
                Ok(())
            } else {
                Err(format!("gate {} takes {k} qubit(s), got {}", j.gate, j.qubits.len()))
            }
        };
        let q = &j.qubits;
        match j.gate.as_str() {
            "h" => arity(1).map(|_| Gate::H(q[0])),
            "s" => arity(1).map(|_| Gate::S(q[0])),
            "x" => arity(1).map(|_| Gate::X(q[0])),
            "z" => arity(1).map(|_| Gate::Z(q[0])),
            "cx" => arity(2).map(|_| Gate::Cnot { control: q[0], target: q[1] }),
            "cz" => arity(2).map(|_| Gate::Cz(q[0], q[1])),
            other => Err(format!("unknown gate {other:?}")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CircuitJson")]
pub struct CliffordCircuit {
    n: usize,
    gates: Vec<Gate>,
}

#[derive(Deserialize)]
struct CircuitJson {
    n: usize,
    gates: Vec<Gate>,
}

impl TryFrom<CircuitJson> for CliffordCircuit {
    type Error = Error;
    fn try_from(j: CircuitJson) -> Result<Self> {
        CliffordCircuit::from_gates(j.n, j.gates)
    }
}

impl CliffordCircuit {
    pub fn new(n: usize) -> Self {
        CliffordCircuit { n, gates: Vec::new() }
    }

    pub fn from_gates(n: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = CliffordCircuit::new(n);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        for &q in &qs {
            if q >= self.n {
                return Err(Error::IndexOutOfRange { index: q, len: self.n });
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidArgument(format!("two-qubit gate on a single qubit {}", qs[0])));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// `U†` expressed in the same gate set (`S† = Z S`).
    pub fn inverse(&self) -> CliffordCircuit {
        let mut gates = Vec::with_capacity(self.gates.len());
        for g in self.gates.iter().rev() {
            match *g {
                Gate::S(q) => {
                    gates.push(Gate::S(q));
                    gates.push(Gate::Z(q));
                }
                other => gates.push(other),
            }
        }
        CliffordCircuit { n: self.n, gates }
    }

    /// Heisenberg image `U P U†`.
    pub fn conjugate(&self, p: &PauliString) -> Result<SignedPauli> {
        self.conjugate_signed(&SignedPauli::plus(p.clone()))
    }

    pub fn conjugate_signed(&self, p: &SignedPauli) -> Result<SignedPauli> {
        if p.pauli.num_qubits() != self.n {
            return Err(Error::Dimension { expected: self.n, found: p.pauli.num_qubits() });
        }
        let mut pauli = p.pauli.clone();
        let mut sign = p.sign;
        for g in &self.gates {
            g.conjugate_in_place(&mut pauli, &mut sign);
        }
        Ok(SignedPauli { sign, pauli })
    }
}

/// Images of the single-qubit generators `X_q`, `Z_q` under a circuit.
///
/// Conjugation is linear on the x/z bits (up to sign), so whether a string
/// lands on a Z/I string can be read off by XOR-ing generator images.
#[derive(Clone, Debug)]
pub struct Tableau {
    n: usize,
    x_img: Vec<PauliString>,
    z_img: Vec<PauliString>,
}

impl Tableau {
    pub fn new(circuit: &CliffordCircuit) -> Self {
        let n = circuit.num_qubits();
        let image = |f| {
            (0..n)
                .map(|q| circuit.conjugate(&PauliString::single(n, q, f)).expect("same width").pauli)
                .collect()
        };
        Tableau { n, x_img: image(crate::pauli::Pauli::X), z_img: image(crate::pauli::Pauli::Z) }
    }

    /// True iff `U p U†` has no X or Y factor.
    pub fn maps_to_diagonal(&self, p: &PauliString) -> bool {
        debug_assert_eq!(p.num_qubits(), self.n);
        let mut acc = vec![0u64; self.n.div_ceil(64)];
        for q in 0..self.n {
            if p.x_bit(q) {
                acc.iter_mut().zip(self.x_img[q].x_words()).for_each(|(a, w)| *a ^= w);
            }
            if p.z_bit(q) {
                acc.iter_mut().zip(self.z_img[q].x_words()).for_each(|(a, w)| *a ^= w);
            }
        }
        acc.iter().all(|&w| w == 0)
    }
}

pub fn is_z_diagonal(p: &PauliString) -> bool {
    p.is_z_diagonal()
}

/// A circuit together with the signed Z-string images of the group it was
/// built for, in group order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagonalizer {
    pub circuit: CliffordCircuit,
    pub group: Vec<PauliString>,
    pub images: Vec<SignedPauli>,
}

impl Diagonalizer {
    pub fn image_of(&self, p: &PauliString) -> Option<&SignedPauli> {
        self.group.iter().position(|g| g == p).map(|k| &self.images[k])
    }
}

/// Synthesize a Clifford circuit mapping every member of a commuting set to
/// a signed Z/I string.
///
/// Members are processed in order. Each independent member, after being
/// reduced against earlier pivots, is mapped onto a single `Z` on the lowest
/// free qubit using CNOT, CZ, S and H gates acting only on free qubits, so
/// earlier images are untouched. Qubits never chosen as pivots complete the
/// group to a maximal abelian one (their `Z`s pulled back through `U`).
/// Each pivot costs at most `2(n-1) + 2` gates, so the circuit has at most
/// `2n²` gates.
pub fn diagonalize(group: &[PauliString]) -> Result<Diagonalizer> {
    let first = group.first().ok_or_else(|| Error::InvalidArgument("empty group".into()))?;
    let n = first.num_qubits();
    for (a, p) in group.iter().enumerate() {
        if p.num_qubits() != n {
            return Err(Error::Dimension { expected: n, found: p.num_qubits() });
        }
        for (b, q) in group.iter().enumerate().skip(a + 1) {
            if !p.commutes_unchecked(q) {
                return Err(Error::NotCommuting { a, b });
            }
        }
    }

    let mut circuit = CliffordCircuit::new(n);
    let mut pivot = vec![false; n];
    for p in group {
        let mut row = circuit.conjugate(p)?.pauli;
        for q in 0..n {
            if pivot[q] {
                debug_assert!(!row.x_bit(q), "commuting row has X on a pivot");
                row.set_z(q, false);
            }
        }
        if row.is_identity() {
            continue;
        }
        let mut emit = |g: Gate, row: &mut PauliString| {
            let mut s = Sign::Plus;
            g.conjugate_in_place(row, &mut s);
            circuit.gates.push(g);
        };
        let free = |q: usize| !pivot[q];
        let q = if let Some(q) = (0..n).find(|&q| free(q) && row.x_bit(q)) {
            for t in (0..n).filter(|&t| t != q && free(t)) {
                if row.x_bit(t) {
                    emit(Gate::Cnot { control: q, target: t }, &mut row);
                }
            }
            for t in (0..n).filter(|&t| t != q && free(t)) {
                if row.z_bit(t) {
                    emit(Gate::Cz(q, t), &mut row);
                }
            }
            if row.z_bit(q) {
                emit(Gate::S(q), &mut row);
            }
            emit(Gate::H(q), &mut row);
            q
        } else {
            let q = (0..n).find(|&q| free(q) && row.z_bit(q)).expect("non-identity row");
            for t in (0..n).filter(|&t| t != q && free(t)) {
                if row.z_bit(t) {
                    emit(Gate::Cnot { control: t, target: q }, &mut row);
                }
            }
            q
        };
        debug_assert!(row.is_z_diagonal() && row.weight() == 1 && row.z_bit(q));
        pivot[q] = true;
    }

    let images = group.iter().map(|p| circuit.conjugate(p)).collect::<Result<Vec<_>>>()?;
    assert!(images.iter().all(|i| i.pauli.is_z_diagonal()), "synthesis left an off-diagonal image");
    Ok(Diagonalizer { circuit, group: group.to_vec(), images })
}
