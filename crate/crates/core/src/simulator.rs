//! Dense statevector simulation for small systems.
//!
//! Basis index bit `n - 1 - q` holds qubit `q`, so the label `"XZ"` acts with
//! `X` on the most significant bit.

use std::collections::HashMap;
use std::io::{Read, Write};

use num_complex::Complex;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordCircuit, Gate};
use crate::error::{Error, Result};
use crate::estimator::{MomentsFlavor, TabulatedMoments};
use crate::grouping::Cover;
use crate::hamiltonian::Hamiltonian;
use crate::pauli::{PauliString, Sign};
use crate::rng::{self, Rng};
use crate::scalar::Real;

pub const MAX_QUBITS: usize = 14;

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("statevector needs 1..={MAX_QUBITS} qubits, got {n}")));
    }
    Ok(())
}

fn norm_tol<T: Real>() -> T {
    T::of(1e-12).max(T::epsilon() * T::of(1e3))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    n: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(n: usize, amps: Vec<Complex<T>>) -> Result<Self> {
        check_qubits(n)?;
        if amps.len() != 1 << n {
            return Err(Error::Dimension { expected: 1 << n, found: amps.len() });
        }
        let norm: T = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - T::one()).abs() > norm_tol() {
            return Err(Error::InvalidArgument(format!("state has squared norm {norm}, expected 1")));
        }
        Ok(StateVector { n, amps })
    }

    pub fn normalized(n: usize, mut amps: Vec<Complex<T>>) -> Result<Self> {
        check_qubits(n)?;
        let norm: T = amps.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
        if !(norm > T::zero()) {
            return Err(Error::InvalidArgument("zero vector cannot be normalized".into()));
        }
        for a in &mut amps {
            *a /= norm;
        }
        StateVector::new(n, amps)
    }

    pub fn zero(n: usize) -> Result<Self> {
        StateVector::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        if index >= 1 << n {
            return Err(Error::IndexOutOfRange { index, len: 1 << n });
        }
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n];
        amps[index] = Complex::new(T::one(), T::zero());
        Ok(StateVector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_pauli(&self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension { expected: self.n, found: p.num_qubits() });
        }
        Ok(())
    }

    /// `P|ψ⟩` as a raw amplitude vector.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<Vec<Complex<T>>> {
        self.check_pauli(p)?;
        let (xm, zm) = p.basis_masks();
        let phase = i_power::<T>(p.count_y());
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            let s = if (b as u64 & zm).count_ones().is_multiple_of(2) { a } else { -a };
            out[b ^ xm as usize] = s * phase;
        }
        Ok(out)
    }

    /// `⟨ψ|P|ψ⟩`.
    pub fn expectation(&self, p: &PauliString) -> Result<T> {
        self.check_pauli(p)?;
        let (xm, zm) = p.basis_masks();
        let mut acc = Complex::new(T::zero(), T::zero());
        for (b, &a) in self.amps.iter().enumerate() {
            let term = self.amps[b ^ xm as usize].conj() * a;
            if (b as u64 & zm).count_ones().is_multiple_of(2) {
                acc += term;
            } else {
                acc -= term;
            }
        }
        Ok((acc * i_power::<T>(p.count_y())).re)
    }

    pub fn apply_circuit(&self, circuit: &CliffordCircuit) -> Result<StateVector<T>> {
        if circuit.num_qubits() != self.n {
            return Err(Error::Dimension { expected: self.n, found: circuit.num_qubits() });
        }
        let mut amps = self.amps.clone();
        let bit = |q: usize| 1usize << (self.n - 1 - q);
        let r = T::FRAC_1_SQRT_2();
        for g in circuit.gates() {
            match *g {
                Gate::H(q) => {
                    let m = bit(q);
                    for b in (0..amps.len()).filter(|b| b & m == 0) {
                        let (a0, a1) = (amps[b], amps[b | m]);
                        amps[b] = (a0 + a1) * r;
                        amps[b | m] = (a0 - a1) * r;
                    }
                }
                Gate::S(q) => {
                    let m = bit(q);
                    let i = Complex::new(T::zero(), T::one());
                    amps.iter_mut().enumerate().filter(|(b, _)| b & m != 0).for_each(|(_, a)| *a *= i);
                }
                Gate::X(q) => {
                    let m = bit(q);
                    for b in (0..amps.len()).filter(|b| b & m == 0) {
                        amps.swap(b, b | m);
                    }
                }
                Gate::Z(q) => {
                    let m = bit(q);
                    amps.iter_mut().enumerate().filter(|(b, _)| b & m != 0).for_each(|(_, a)| *a = -*a);
                }
                Gate::Cnot { control, target } => {
                    let (c, t) = (bit(control), bit(target));
                    for b in (0..amps.len()).filter(|b| b & c != 0 && b & t == 0) {
                        amps.swap(b, b | t);
                    }
                }
                Gate::Cz(a, b) => {
                    let m = bit(a) | bit(b);
                    amps.iter_mut().enumerate().filter(|(x, _)| x & m == m).for_each(|(_, v)| *v = -*v);
                }
            }
        }
        Ok(StateVector { n: self.n, amps })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let amps: Vec<[f64; 2]> = self.amps.iter().map(|a| [a.re.to_f64_lossy(), a.im.to_f64_lossy()]).collect();
        serde_json::json!({ "n": self.n, "amplitudes": amps })
    }

    /// Reads `{"n": .., "amplitudes": [[re, im], ..]}` and renormalizes.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            n: usize,
            amplitudes: Vec<[f64; 2]>,
        }
        let f: File = serde_json::from_value(value.clone())?;
        let amps = f.amplitudes.iter().map(|&[re, im]| Complex::new(T::of(re), T::of(im))).collect();
        StateVector::normalized(f.n, amps)
    }
}

fn i_power<T: Real>(k: usize) -> Complex<T> {
    match k % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

/// A product of single-qubit pure states given by Bloch angles `(θ, φ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ProductState<T: Real> {
    angles: Vec<(T, T)>,
}

impl<T: Real> ProductState<T> {
    pub fn new(angles: Vec<(T, T)>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidArgument("product state over zero qubits".into()));
        }
        Ok(ProductState { angles })
    }

    /// Each qubit uniform on the Bloch sphere.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut r = rng::seeded(seed);
        ProductState::random_with(n, &mut r)
    }

    pub fn random_with(n: usize, r: &mut Rng) -> Result<Self> {
        let angles = (0..n)
            .map(|_| {
                let u: f64 = r.random();
                let v: f64 = r.random();
                (T::of((1.0 - 2.0 * u).acos()), T::of(2.0 * std::f64::consts::PI * v))
            })
            .collect();
        ProductState::new(angles)
    }

    pub fn num_qubits(&self) -> usize {
        self.angles.len()
    }

    /// `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of qubit `q`.
    pub fn bloch(&self, q: usize) -> [T; 3] {
        let (t, p) = self.angles[q];
        [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
    }

    /// Closed form `Π_q ⟨σ_q⟩`, valid at any size.
    pub fn expectation(&self, p: &PauliString) -> Result<T> {
        if p.num_qubits() != self.num_qubits() {
            return Err(Error::Dimension { expected: self.num_qubits(), found: p.num_qubits() });
        }
        let mut e = T::one();
        for q in p.support() {
            let b = self.bloch(q);
            e *= match (p.x_bit(q), p.z_bit(q)) {
                (true, false) => b[0],
                (true, true) => b[1],
                _ => b[2],
            };
        }
        Ok(e)
    }

    pub fn to_state_vector(&self) -> Result<StateVector<T>> {
        let n = self.num_qubits();
        check_qubits(n)?;
        let factors: Vec<[Complex<T>; 2]> = self
            .angles
            .iter()
            .map(|&(t, p)| {
                let half = t * T::of(0.5);
                [Complex::new(half.cos(), T::zero()), Complex::from_polar(half.sin(), p)]
            })
            .collect();
        let amps = (0..1usize << n)
            .map(|b| {
                (0..n).fold(Complex::new(T::one(), T::zero()), |acc, q| acc * factors[q][(b >> (n - 1 - q)) & 1])
            })
            .collect();
        StateVector::normalized(n, amps)
    }
}

pub fn product_state<T: Real>(angles: &[(T, T)]) -> Result<StateVector<T>> {
    ProductState::new(angles.to_vec())?.to_state_vector()
}

pub fn product_state_seeded<T: Real>(n: usize, seed: u64) -> Result<StateVector<T>> {
    check_qubits(n)?;
    ProductState::random(n, seed)?.to_state_vector()
}

/// Exact variances for every term and covariances for the listed pairs.
pub fn exact_moments<T: Real>(state: &StateVector<T>, h: &Hamiltonian<T>, pairs: &[(usize, usize)]) -> Result<TabulatedMoments<T>> {
    if h.num_qubits() != state.num_qubits() {
        return Err(Error::Dimension { expected: state.num_qubits(), found: h.num_qubits() });
    }
    moments_from(|p| state.expectation(p), h, pairs)
}

fn moments_from<T: Real>(
    expect: impl Fn(&PauliString) -> Result<T>,
    h: &Hamiltonian<T>,
    pairs: &[(usize, usize)],
) -> Result<TabulatedMoments<T>> {
    let means: Vec<T> = h.terms().iter().map(|t| expect(&t.pauli)).collect::<Result<_>>()?;
    let vars = means.iter().map(|m| (T::one() - *m * *m).max(T::zero())).collect();
    let mut out = TabulatedMoments::new(MomentsFlavor::ExactState, vars)?;
    let mut cache: HashMap<PauliString, T> = HashMap::new();
    for &(i, k) in pairs {
        if i >= h.len() || k >= h.len() {
            return Err(Error::IndexOutOfRange { index: i.max(k), len: h.len() });
        }
        if i == k {
            continue;
        }
        let (phase, q) = h.pauli(i).multiply(h.pauli(k))?;
        let sign = phase.as_sign().ok_or(Error::NotCommuting { a: i, b: k })?;
        let eq = match cache.get(&q) {
            Some(&v) => v,
            None => {
                let v = expect(&q)?;
                cache.insert(q, v);
                v
            }
        };
        let cov = T::of(sign.value() as f64) * eq - means[i] * means[k];
        out.set_cov(i, k, cov)?;
    }
    Ok(out)
}

fn cover_pairs<C: Cover + ?Sized>(cover: &C) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for g in cover.groups() {
        for (p, &i) in g.iter().enumerate() {
            for &k in &g[p + 1..] {
                pairs.push((i.min(k), i.max(k)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Exact moments with covariances for every pair sharing a group.
pub fn exact_moments_for_cover<T: Real, C: Cover + ?Sized>(
    state: &StateVector<T>,
    h: &Hamiltonian<T>,
    cover: &C,
) -> Result<TabulatedMoments<T>> {
    exact_moments(state, h, &cover_pairs(cover))
}

impl<T: Real> ProductState<T> {
    /// Exact moments from the closed-form expectations; no size cap.
    pub fn moments_for_cover<C: Cover + ?Sized>(&self, h: &Hamiltonian<T>, cover: &C) -> Result<TabulatedMoments<T>> {
        if h.num_qubits() != self.num_qubits() {
            return Err(Error::Dimension { expected: self.num_qubits(), found: h.num_qubits() });
        }
        moments_from(|p| self.expectation(p), h, &cover_pairs(cover))
    }
}

/// Empirical means of every member of one group from `shots` measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GroupSampleRecord<T: Real> {
    pub group: usize,
    pub shots: u64,
    pub members: Vec<usize>,
    pub means: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<u64>>,
}

impl<T: Real> GroupSampleRecord<T> {
    pub fn mean_of(&self, term: usize) -> Option<T> {
        self.members.iter().position(|&i| i == term).map(|p| self.means[p])
    }
}

/// One group's measurement: the rotated state's outcome distribution and,
/// for every member, the sign and Z-support of its image.
#[derive(Clone, Debug)]
pub struct GroupSampler {
    group: usize,
    members: Vec<usize>,
    cdf: Vec<f64>,
    probs: Vec<f64>,
    masks: Vec<u64>,
    signs: Vec<Sign>,
}

impl GroupSampler {
    /// `signs`, when given (e.g. from a stored repacking), must agree with
    /// the conjugation signs.
    pub fn new<T: Real>(
        state: &StateVector<T>,
        h: &Hamiltonian<T>,
        group: usize,
        members: &[usize],
        circuit: &CliffordCircuit,
        signs: Option<&[Sign]>,
    ) -> Result<Self> {
        if h.num_qubits() != state.num_qubits() {
            return Err(Error::Dimension { expected: state.num_qubits(), found: h.num_qubits() });
        }
        let mut masks = Vec::with_capacity(members.len());
        let mut out_signs = Vec::with_capacity(members.len());
        for (p, &i) in members.iter().enumerate() {
            if i >= h.len() {
                return Err(Error::IndexOutOfRange { index: i, len: h.len() });
            }
            let img = circuit.conjugate(h.pauli(i))?;
            if !img.pauli.is_z_diagonal() {
                return Err(Error::InvalidDiagonalizer { group, term: i });
            }
            if let Some(s) = signs {
                if s.get(p) != Some(&img.sign) {
                    return Err(Error::InvalidDiagonalizer { group, term: i });
                }
            }
            masks.push(img.pauli.basis_masks().1);
            out_signs.push(img.sign);
        }
        let rotated = state.apply_circuit(circuit)?;
        let probs: Vec<f64> = rotated.probabilities().iter().map(|p| p.to_f64_lossy()).collect();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        Ok(GroupSampler { group, members: members.to_vec(), cdf, probs, masks, signs: out_signs })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Exact `⟨P_i⟩` for each member from the rotated distribution.
    pub fn exact_means(&self) -> Vec<f64> {
        (0..self.members.len())
            .map(|p| self.probs.iter().enumerate().map(|(b, &pr)| pr * self.value(p, b as u64)).sum())
            .collect()
    }

    #[inline]
    fn value(&self, p: usize, outcome: u64) -> f64 {
        let parity = if (outcome & self.masks[p]).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        parity * self.signs[p].value() as f64
    }

    fn draw(&self, r: &mut Rng) -> u64 {
        let total = *self.cdf.last().expect("non-empty");
        let u: f64 = r.random::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1) as u64
    }

    /// Outcome counts for `shots` measurements.
    pub fn counts(&self, shots: u64, r: &mut Rng) -> Vec<u64> {
        let dim = self.probs.len();
        let mut counts = vec![0u64; dim];
        if shots >= 16 * dim as u64 {
            let mut left = shots;
            let mut mass: f64 = self.probs.iter().sum();
            for (b, &p) in self.probs.iter().enumerate() {
                if left == 0 {
                    break;
                }
                if b == dim - 1 || mass <= 0.0 {
                    counts[b] = left;
                    break;
                }
                let q = (p / mass).clamp(0.0, 1.0);
                let k = Binomial::new(left, q).expect("valid binomial").sample(r);
                counts[b] = k;
                left -= k;
                mass -= p;
            }
        } else {
            for _ in 0..shots {
                counts[self.draw(r) as usize] += 1;
            }
        }
        counts
    }

    pub fn sample<T: Real>(&self, shots: u64, r: &mut Rng, keep_raw: bool) -> Result<GroupSampleRecord<T>> {
        if shots == 0 {
            return Err(Error::InvalidArgument("need at least one shot".into()));
        }
        let (counts, raw) = if keep_raw {
            let raw: Vec<u64> = (0..shots).map(|_| self.draw(r)).collect();
            let mut counts = vec![0u64; self.probs.len()];
            for &b in &raw {
                counts[b as usize] += 1;
            }
            (counts, Some(raw))
        } else {
            (self.counts(shots, r), None)
        };
        let means = (0..self.members.len())
            .map(|p| {
                let s: f64 = counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(b, &c)| c as f64 * self.value(p, b as u64))
                    .sum();
                T::of(s / shots as f64)
            })
            .collect();
        Ok(GroupSampleRecord { group: self.group, shots, members: self.members.clone(), means, raw })
    }
}

/// `(|0…0⟩ + |0^{n/2} 1^{n/2}⟩)/√2`: an equal superposition of a lowest and
/// a highest energy state of the all-to-all Ising model.
pub fn ising_witness_state<T: Real>(n: usize) -> Result<StateVector<T>> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("witness state needs even n, got {n}")));
    }
    check_qubits(n)?;
    let r = Complex::new(T::FRAC_1_SQRT_2(), T::zero());
    let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n];
    amps[0] = r;
    amps[(1 << (n / 2)) - 1] = r;
    StateVector::new(n, amps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct VarianceSplit<T: Real> {
    /// `D = Σ c_i² Var(P_i)`
    pub diagonal: T,
    pub covariance: T,
    /// `⟨H²⟩ - ⟨H⟩²`
    pub total: T,
}

pub fn variance_covariance_split<T: Real>(state: &StateVector<T>, h: &Hamiltonian<T>) -> Result<VarianceSplit<T>> {
    if h.num_qubits() != state.num_qubits() {
        return Err(Error::Dimension { expected: state.num_qubits(), found: h.num_qubits() });
    }
    let mut diagonal = T::zero();
    let mut hpsi = vec![Complex::new(T::zero(), T::zero()); state.amps.len()];
    for t in h.terms() {
        let e = state.expectation(&t.pauli)?;
        diagonal += t.coeff * t.coeff * (T::one() - e * e);
        for (acc, v) in hpsi.iter_mut().zip(state.apply_pauli(&t.pauli)?) {
            *acc += v * t.coeff;
        }
    }
    let mean: T = state.amps.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum();
    let second: T = hpsi.iter().map(|v| v.norm_sqr()).sum();
    let total = second - mean * mean;
    Ok(VarianceSplit { diagonal, covariance: total - diagonal, total })
}

/// Header of a raw bitstring dump.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDumpHeader {
    pub n: usize,
    #[serde(rename = "M")]
    pub shots: u64,
    pub group: usize,
    pub seed: u64,
}

/// One JSON header line, then each outcome as `ceil(n/8)` big-endian bytes.
pub fn write_raw_dump<W: Write>(mut w: W, header: &RawDumpHeader, outcomes: &[u64]) -> Result<()> {
    if outcomes.len() as u64 != header.shots {
        return Err(Error::Dimension { expected: header.shots as usize, found: outcomes.len() });
    }
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    let width = header.n.div_ceil(8);
    for &b in outcomes {
        w.write_all(&b.to_be_bytes()[8 - width..])?;
    }
    Ok(())
}

pub fn read_raw_dump<R: Read>(mut r: R) -> Result<(RawDumpHeader, Vec<u64>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::InvalidArgument("missing dump header".into()))?;
    let header: RawDumpHeader = serde_json::from_slice(&bytes[..nl])?;
    let width = header.n.div_ceil(8);
    let body = &bytes[nl + 1..];
    if width == 0 || body.len() != width * header.shots as usize {
        return Err(Error::InvalidArgument("dump body length does not match header".into()));
    }
    let outcomes = body
        .chunks(width)
        .map(|c| c.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64))
        .collect();
    Ok((header, outcomes))
}
