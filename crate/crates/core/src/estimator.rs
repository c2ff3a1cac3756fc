//! Estimator weights, analytic variances and empirical energies.
//!
//! Notation: term `i` with coefficient `c_i` sits in groups `Γ(i)`; group `j`
//! gets `M_j` shots; `σ²_i` and `σ_ik` are single-shot variances and
//! covariances. With weights `w_ij` (summing to one over `Γ(i)`) the energy
//! estimator has variance
//!
//! ```text
//! Σ_j 1/M_j [ Σ_{i∈G_j} c_i² σ²_i w_ij² + 2 Σ_{i<k∈G_j} c_i c_k σ_ik w_ij w_kj ]
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::Cover;
use crate::scalar::Real;
use crate::simulator::GroupSampleRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentsFlavor {
    ExactState,
    ZeroCovariance,
    WorstCase,
    UserSupplied,
}

impl std::fmt::Display for MomentsFlavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MomentsFlavor::ExactState => "exact-state",
            MomentsFlavor::ZeroCovariance => "zero-covariance",
            MomentsFlavor::WorstCase => "worst-case",
            MomentsFlavor::UserSupplied => "user-supplied",
        })
    }
}

/// Single-shot second moments of the Hamiltonian terms.
pub trait Moments<T: Real>: Sync {
    fn flavor(&self) -> MomentsFlavor;

    /// `σ²_i = 1 - ⟨P_i⟩²`.
    fn var(&self, i: usize) -> T;

    /// `σ_ik = ⟨P_i P_k⟩ - ⟨P_i⟩⟨P_k⟩`; `cov(i, i) = var(i)`.
    fn cov(&self, i: usize, k: usize) -> Result<T>;

    /// False when every off-diagonal covariance is zero, which lets callers
    /// skip pair sums entirely.
    fn has_covariance(&self) -> bool {
        true
    }
}

fn check_variance<T: Real>(i: usize, v: T) -> Result<T> {
    let slack = T::of(1e-12).max(T::epsilon() * T::of(16.0));
    if !(v >= -slack && v <= T::one() + slack) {
        return Err(Error::InvalidArgument(format!("variance of term {i} is {v}, outside [0, 1]")));
    }
    Ok(v.max(T::zero()).min(T::one()))
}

/// Zero covariance with given variances (all 1 for the state-independent model).
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroCovariance<T: Real> {
    variances: Vec<T>,
}

impl<T: Real> ZeroCovariance<T> {
    pub fn new(variances: Vec<T>) -> Result<Self> {
        let variances = variances.into_iter().enumerate().map(|(i, v)| check_variance(i, v)).collect::<Result<_>>()?;
        Ok(ZeroCovariance { variances })
    }

    pub fn unit(n_terms: usize) -> Self {
        ZeroCovariance { variances: vec![T::one(); n_terms] }
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }
}

impl<T: Real> Moments<T> for ZeroCovariance<T> {
    fn flavor(&self) -> MomentsFlavor {
        MomentsFlavor::ZeroCovariance
    }

    fn var(&self, i: usize) -> T {
        self.variances[i]
    }

    fn cov(&self, i: usize, k: usize) -> Result<T> {
        Ok(if i == k { self.variances[i] } else { T::zero() })
    }

    fn has_covariance(&self) -> bool {
        false
    }
}

/// Unit variances and covariances `sign(c_i c_k)`, so every pair adds its
/// largest possible contribution.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstCase<T: Real> {
    signs: Vec<T>,
}

impl<T: Real> WorstCase<T> {
    pub fn new(coefficients: &[T]) -> Self {
        WorstCase { signs: coefficients.iter().map(|c| c.signum()).collect() }
    }
}

impl<T: Real> Moments<T> for WorstCase<T> {
    fn flavor(&self) -> MomentsFlavor {
        MomentsFlavor::WorstCase
    }

    fn var(&self, _i: usize) -> T {
        T::one()
    }

    fn cov(&self, i: usize, k: usize) -> Result<T> {
        Ok(if i == k { T::one() } else { self.signs[i] * self.signs[k] })
    }
}

/// Explicit variances plus a sparse covariance table.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedMoments<T: Real> {
    flavor: MomentsFlavor,
    variances: Vec<T>,
    covariances: HashMap<(usize, usize), T>,
}

impl<T: Real> TabulatedMoments<T> {
    pub fn new(flavor: MomentsFlavor, variances: Vec<T>) -> Result<Self> {
        let variances = variances.into_iter().enumerate().map(|(i, v)| check_variance(i, v)).collect::<Result<_>>()?;
        Ok(TabulatedMoments { flavor, variances, covariances: HashMap::new() })
    }

    pub fn set_cov(&mut self, i: usize, k: usize, value: T) -> Result<()> {
        let n = self.variances.len();
        for idx in [i, k] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, len: n });
            }
        }
        if i == k {
            return Err(Error::InvalidArgument("use the variance for the diagonal".into()));
        }
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("covariance ({i},{k}) is not finite")));
        }
        self.covariances.insert((i.min(k), i.max(k)), value);
        Ok(())
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    pub fn covariance_count(&self) -> usize {
        self.covariances.len()
    }
}

impl<T: Real> Moments<T> for TabulatedMoments<T> {
    fn flavor(&self) -> MomentsFlavor {
        self.flavor
    }

    fn var(&self, i: usize) -> T {
        self.variances[i]
    }

    fn cov(&self, i: usize, k: usize) -> Result<T> {
        if i == k {
            return Ok(self.variances[i]);
        }
        self.covariances.get(&(i.min(k), i.max(k))).copied().ok_or(Error::MissingCovariance { i, k })
    }
}

/// Continuous per-group shot counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Real")]
pub struct ShotAllocation<T: Real> {
    m: Vec<T>,
}

impl<T: Real> ShotAllocation<T> {
    pub fn new(m: Vec<T>) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::InvalidArgument("allocation over zero groups".into()));
        }
        if let Some((j, v)) = m.iter().enumerate().find(|(_, v)| !(**v > T::zero() && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("group {j} has non-positive shot count {v}")));
        }
        Ok(ShotAllocation { m })
    }

    pub fn uniform(groups: usize, total: T) -> Result<Self> {
        ShotAllocation::new(vec![total / T::of_usize(groups.max(1)); groups])
    }

    pub fn shots(&self) -> &[T] {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn total(&self) -> T {
        self.m.iter().copied().sum()
    }

    pub fn scaled_to(&self, total: T) -> ShotAllocation<T> {
        let s = total / self.total();
        ShotAllocation { m: self.m.iter().map(|&v| v * s).collect() }
    }

    fn check_groups(&self, groups: usize) -> Result<()> {
        if self.m.len() != groups {
            return Err(Error::Dimension { expected: groups, found: self.m.len() });
        }
        Ok(())
    }
}

/// Integer per-group shot counts, each at least one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntegerAllocation {
    m: Vec<u64>,
}

impl IntegerAllocation {
    pub fn new(m: Vec<u64>) -> Result<Self> {
        if m.is_empty() || m.contains(&0) {
            return Err(Error::InvalidArgument("integer allocation needs at least one shot per group".into()));
        }
        Ok(IntegerAllocation { m })
    }

    pub fn shots(&self) -> &[u64] {
        &self.m
    }

    pub fn total(&self) -> u64 {
        self.m.iter().sum()
    }

    pub fn to_continuous<T: Real>(&self) -> ShotAllocation<T> {
        ShotAllocation { m: self.m.iter().map(|&v| T::of(v as f64)).collect() }
    }
}

/// `w_ij` for every term `i` and group `j ∈ Γ(i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EstimatorWeights<T: Real> {
    gamma: Vec<Vec<usize>>,
    w: Vec<Vec<T>>,
}

impl<T: Real> EstimatorWeights<T> {
    /// Validates shape and `Σ_j w_ij = 1` for every term.
    pub fn new(gamma: Vec<Vec<usize>>, w: Vec<Vec<T>>) -> Result<Self> {
        if gamma.len() != w.len() {
            return Err(Error::Dimension { expected: gamma.len(), found: w.len() });
        }
        let tol = T::epsilon().sqrt();
        for (i, (g, wi)) in gamma.iter().zip(&w).enumerate() {
            if g.len() != wi.len() {
                return Err(Error::Dimension { expected: g.len(), found: wi.len() });
            }
            let s: T = wi.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::InvalidArgument(format!("weights of term {i} sum to {s}, not 1")));
            }
        }
        Ok(EstimatorWeights { gamma, w })
    }

    pub fn n_terms(&self) -> usize {
        self.gamma.len()
    }

    pub fn groups_of(&self, i: usize) -> &[usize] {
        &self.gamma[i]
    }

    pub fn weights_of(&self, i: usize) -> &[T] {
        &self.w[i]
    }

    /// `w_ij`, zero when `j ∉ Γ(i)`.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.gamma[i].iter().position(|&g| g == j).map_or(T::zero(), |p| self.w[i][p])
    }

    /// Embed into a cover whose groups are supersets, giving new memberships
    /// weight zero.
    pub fn extend_to<C: Cover + ?Sized>(&self, cover: &C) -> Result<EstimatorWeights<T>> {
        let gamma = cover.membership();
        if gamma.len() != self.gamma.len() {
            return Err(Error::Dimension { expected: self.gamma.len(), found: gamma.len() });
        }
        let mut w = Vec::with_capacity(gamma.len());
        for (i, g) in gamma.iter().enumerate() {
            for &j in &self.gamma[i] {
                if !g.contains(&j) {
                    return Err(Error::InvalidArgument(format!("term {i} left group {j}")));
                }
            }
            w.push(g.iter().map(|&j| self.get(i, j)).collect());
        }
        Ok(EstimatorWeights { gamma, w })
    }

    pub fn max_abs_diff(&self, other: &EstimatorWeights<T>) -> T {
        let mut d = T::zero();
        for i in 0..self.gamma.len() {
            for (p, &j) in self.gamma[i].iter().enumerate() {
                d = d.max((self.w[i][p] - other.get(i, j)).abs());
            }
        }
        d
    }
}

/// Shot-weighted weights `w_ij = M_j / Σ_{k∈Γ(i)} M_k`.
pub fn heuristic_weights<T: Real, C: Cover + ?Sized>(cover: &C, alloc: &ShotAllocation<T>) -> Result<EstimatorWeights<T>> {
    alloc.check_groups(cover.num_groups())?;
    let gamma = cover.membership();
    let mut w = Vec::with_capacity(gamma.len());
    for (i, g) in gamma.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::InvalidArgument(format!("term {i} is in no group")));
        }
        let alpha: T = g.iter().map(|&j| alloc.m[j]).sum();
        w.push(g.iter().map(|&j| alloc.m[j] / alpha).collect());
    }
    Ok(EstimatorWeights { gamma, w })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct VarianceParts<T: Real> {
    pub total: T,
    pub diagonal: T,
    pub covariance: T,
}

/// Weights of each group's members, aligned with the group's member order.
fn weights_by_group<T: Real, C: Cover + ?Sized>(cover: &C, weights: &EstimatorWeights<T>) -> Result<Vec<Vec<T>>> {
    if weights.n_terms() != cover.n_terms() {
        return Err(Error::Dimension { expected: cover.n_terms(), found: weights.n_terms() });
    }
    let out = cover.groups().iter().enumerate().map(|(j, g)| g.iter().map(|&i| weights.get(i, j)).collect()).collect();
    Ok(out)
}

/// Analytic variance of the estimator with arbitrary unbiased weights.
pub fn estimator_variance<T: Real, C: Cover + ?Sized, Mo: Moments<T> + ?Sized>(
    coefficients: &[T],
    cover: &C,
    weights: &EstimatorWeights<T>,
    alloc: &ShotAllocation<T>,
    moments: &Mo,
) -> Result<VarianceParts<T>> {
    alloc.check_groups(cover.num_groups())?;
    if coefficients.len() != cover.n_terms() {
        return Err(Error::Dimension { expected: cover.n_terms(), found: coefficients.len() });
    }
    let wg = weights_by_group(cover, weights)?;
    let two = T::of(2.0);
    let mut diagonal = T::zero();
    let mut covariance = T::zero();
    for (j, g) in cover.groups().iter().enumerate() {
        let inv_m = T::one() / alloc.m[j];
        let w = &wg[j];
        for (p, &i) in g.iter().enumerate() {
            let c = coefficients[i];
            diagonal += c * c * moments.var(i) * w[p] * w[p] * inv_m;
        }
        if !moments.has_covariance() {
            continue;
        }
        for (p, &i) in g.iter().enumerate() {
            if w[p] == T::zero() {
                continue;
            }
            for (q, &k) in g.iter().enumerate().skip(p + 1) {
                if w[q] == T::zero() {
                    continue;
                }
                let s = moments.cov(i, k)?;
                covariance += two * coefficients[i] * coefficients[k] * s * w[p] * w[q] * inv_m;
            }
        }
    }
    Ok(VarianceParts { total: diagonal + covariance, diagonal, covariance })
}

/// The shot-weighted variance written through effective shot counts
/// `α_i = Σ_{j∈Γ(i)} M_j` and shared counts `α_ik`; also provides the
/// allocation gradient.
pub(crate) struct ShotWeightedModel<T: Real> {
    a: Vec<T>,
    gamma: Vec<Vec<usize>>,
    groups: Vec<Vec<usize>>,
    pairs: Vec<Pair<T>>,
}

struct Pair<T> {
    i: usize,
    k: usize,
    b: T,
    shared: Vec<usize>,
}

impl<T: Real> ShotWeightedModel<T> {
    pub(crate) fn new<C: Cover + ?Sized, Mo: Moments<T> + ?Sized>(
        coefficients: &[T],
        cover: &C,
        moments: &Mo,
    ) -> Result<Self> {
        if coefficients.len() != cover.n_terms() {
            return Err(Error::Dimension { expected: cover.n_terms(), found: coefficients.len() });
        }
        let gamma = cover.membership();
        if let Some(i) = gamma.iter().position(|g| g.is_empty()) {
            return Err(Error::InvalidArgument(format!("term {i} is in no group")));
        }
        let a = coefficients.iter().enumerate().map(|(i, &c)| c * c * moments.var(i)).collect();
        let mut pairs: Vec<Pair<T>> = Vec::new();
        if moments.has_covariance() {
            let mut index: HashMap<(usize, usize), usize> = HashMap::new();
            for (j, g) in cover.groups().iter().enumerate() {
                for (p, &x) in g.iter().enumerate() {
                    for &y in &g[p + 1..] {
                        let key = (x.min(y), x.max(y));
                        match index.get(&key) {
                            Some(&e) => pairs[e].shared.push(j),
                            None => {
                                let b = coefficients[key.0] * coefficients[key.1] * moments.cov(key.0, key.1)?;
                                index.insert(key, pairs.len());
                                pairs.push(Pair { i: key.0, k: key.1, b, shared: vec![j] });
                            }
                        }
                    }
                }
            }
        }
        Ok(ShotWeightedModel { a, gamma, groups: cover.groups().to_vec(), pairs })
    }

    pub(crate) fn num_groups(&self) -> usize {
        self.groups.len()
    }

    fn alphas(&self, m: &[T]) -> Vec<T> {
        self.gamma.iter().map(|g| g.iter().map(|&j| m[j]).sum()).collect()
    }

    pub(crate) fn parts(&self, m: &[T]) -> VarianceParts<T> {
        let alpha = self.alphas(m);
        let diagonal: T = self.a.iter().zip(&alpha).map(|(&a, &al)| a / al).sum();
        let two = T::of(2.0);
        let covariance: T = self
            .pairs
            .iter()
            .map(|p| {
                let shared: T = p.shared.iter().map(|&j| m[j]).sum();
                two * p.b * shared / (alpha[p.i] * alpha[p.k])
            })
            .sum();
        VarianceParts { total: diagonal + covariance, diagonal, covariance }
    }

    pub(crate) fn value(&self, m: &[T]) -> T {
        self.parts(m).total
    }

    /// `(f, ∂f/∂M_j)`.
    pub(crate) fn value_and_gradient(&self, m: &[T]) -> (T, Vec<T>) {
        let alpha = self.alphas(m);
        let mut grad = vec![T::zero(); self.groups.len()];
        let mut f = T::zero();
        for (i, g) in self.gamma.iter().enumerate() {
            let t = self.a[i] / alpha[i];
            f += t;
            let d = t / alpha[i];
            for &j in g {
                grad[j] -= d;
            }
        }
        let two = T::of(2.0);
        for p in &self.pairs {
            let (ai, ak) = (alpha[p.i], alpha[p.k]);
            let shared: T = p.shared.iter().map(|&j| m[j]).sum();
            let h = two * p.b / (ai * ak);
            f += h * shared;
            for &j in &p.shared {
                grad[j] += h;
            }
            let di = h * shared / ai;
            for &j in &self.gamma[p.i] {
                grad[j] -= di;
            }
            let dk = h * shared / ak;
            for &j in &self.gamma[p.k] {
                grad[j] -= dk;
            }
        }
        (f, grad)
    }
}

/// Variance of the shot-weighted estimator, computed through effective shot
/// counts rather than explicit weights.
pub fn shot_weighted_variance<T: Real, C: Cover + ?Sized, Mo: Moments<T> + ?Sized>(
    coefficients: &[T],
    cover: &C,
    alloc: &ShotAllocation<T>,
    moments: &Mo,
) -> Result<VarianceParts<T>> {
    alloc.check_groups(cover.num_groups())?;
    Ok(ShotWeightedModel::new(coefficients, cover, moments)?.parts(&alloc.m))
}

/// `Σ_i c_i Σ_{j∈Γ(i)} w_ij ⟨P_i⟩‾_j`.
pub fn empirical_energy<T: Real, C: Cover + ?Sized>(
    coefficients: &[T],
    cover: &C,
    weights: &EstimatorWeights<T>,
    records: &[GroupSampleRecord<T>],
) -> Result<T> {
    if coefficients.len() != cover.n_terms() || weights.n_terms() != cover.n_terms() {
        return Err(Error::Dimension { expected: cover.n_terms(), found: coefficients.len() });
    }
    let mut by_group: Vec<Option<&GroupSampleRecord<T>>> = vec![None; cover.num_groups()];
    for r in records {
        if r.group >= by_group.len() {
            return Err(Error::IndexOutOfRange { index: r.group, len: by_group.len() });
        }
        by_group[r.group] = Some(r);
    }
    let mut energy = T::zero();
    for (i, &c) in coefficients.iter().enumerate() {
        for (&j, &w) in weights.groups_of(i).iter().zip(weights.weights_of(i)) {
            if w == T::zero() {
                continue;
            }
            let rec = by_group[j].ok_or(Error::MissingSamples { group: j })?;
            let mean = rec.mean_of(i).ok_or(Error::MissingSamples { group: j })?;
            energy += c * w * mean;
        }
    }
    Ok(energy)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions { rel_tol: 1e-14, max_iter: 100_000 }
    }
}

/// Minimum-variance unbiased weights. Without covariance the minimizer is
/// the shot-weighted closed form; otherwise the quadratic is minimized
/// numerically.
pub fn optimal_weights<T: Real, C: Cover + ?Sized, Mo: Moments<T> + ?Sized>(
    coefficients: &[T],
    cover: &C,
    alloc: &ShotAllocation<T>,
    moments: &Mo,
) -> Result<EstimatorWeights<T>> {
    if !moments.has_covariance() {
        return heuristic_weights(cover, alloc);
    }
    optimal_weights_numeric(coefficients, cover, alloc, moments, WeightOptions::default()).map(|(w, _)| w)
}

/// Projected conjugate gradient on the affine set `Σ_j w_ij = 1`, started
/// from uniform weights. Returns the weights and the iteration count.
pub fn optimal_weights_numeric<T: Real, C: Cover + ?Sized, Mo: Moments<T> + ?Sized>(
    coefficients: &[T],
    cover: &C,
    alloc: &ShotAllocation<T>,
    moments: &Mo,
    opts: WeightOptions,
) -> Result<(EstimatorWeights<T>, usize)> {
    alloc.check_groups(cover.num_groups())?;
    if coefficients.len() != cover.n_terms() {
        return Err(Error::Dimension { expected: cover.n_terms(), found: coefficients.len() });
    }
    let groups = cover.groups();
    // Flattened variables: offset[j] + position in group j.
    let mut offset = Vec::with_capacity(groups.len());
    let mut dim = 0;
    for g in groups {
        offset.push(dim);
        dim += g.len();
    }
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); cover.n_terms()];
    for (j, g) in groups.iter().enumerate() {
        for (p, &i) in g.iter().enumerate() {
            slots[i].push(offset[j] + p);
        }
    }
    if let Some(i) = slots.iter().position(|s| s.is_empty()) {
        return Err(Error::InvalidArgument(format!("term {i} is in no group")));
    }
    let mut blocks: Vec<Vec<T>> = Vec::with_capacity(groups.len());
    for (j, g) in groups.iter().enumerate() {
        let s = g.len();
        let mut a = vec![T::zero(); s * s];
        for p in 0..s {
            for q in p..s {
                let (i, k) = (g[p], g[q]);
                let sigma = if p == q {
                    moments.var(i)
                } else if moments.has_covariance() {
                    moments.cov(i, k)?
                } else {
                    T::zero()
                };
                let v = coefficients[i] * coefficients[k] * sigma / alloc.m[j];
                a[p * s + q] = v;
                a[q * s + p] = v;
            }
        }
        blocks.push(a);
    }
    let hess = |v: &[T], out: &mut [T]| {
        for (j, g) in groups.iter().enumerate() {
            let s = g.len();
            let a = &blocks[j];
            let base = offset[j];
            for p in 0..s {
                let row = &a[p * s..(p + 1) * s];
                let acc: T = row.iter().zip(&v[base..base + s]).map(|(&x, &y)| x * y).sum();
                out[base + p] = T::of(2.0) * acc;
            }
        }
    };
    let project = |v: &mut [T]| {
        for s in &slots {
            let mean = s.iter().map(|&k| v[k]).sum::<T>() / T::of_usize(s.len());
            for &k in s {
                v[k] -= mean;
            }
        }
    };
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>();

    let mut x = vec![T::zero(); dim];
    for s in &slots {
        let u = T::one() / T::of_usize(s.len());
        for &k in s {
            x[k] = u;
        }
    }
    let mut hx = vec![T::zero(); dim];
    hess(&x, &mut hx);
    let g0 = dot(&hx, &hx).sqrt();
    let mut r: Vec<T> = hx.iter().map(|&v| -v).collect();
    project(&mut r);
    let mut rr = dot(&r, &r);
    let tol = T::of(opts.rel_tol).max(T::epsilon() * T::of(64.0)) * g0.max(T::min_positive_value());
    let mut d = r.clone();
    let mut hd = vec![T::zero(); dim];
    let mut iters = 0;
    while rr.sqrt() > tol {
        if iters >= opts.max_iter {
            return Err(Error::NonConvergence {
                what: "optimal weights",
                iterations: iters,
                residual: (rr.sqrt() / g0).to_f64_lossy(),
                last_iterate: x.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        }
        iters += 1;
        hess(&d, &mut hd);
        project(&mut hd);
        let dhd = dot(&d, &hd);
        if dhd <= T::zero() {
            if dhd < -tol * dot(&d, &d).sqrt() {
                return Err(Error::InvalidArgument(
                    "covariance model is not positive semidefinite on the unbiased weight space".into(),
                ));
            }
            break;
        }
        let step = rr / dhd;
        for k in 0..dim {
            x[k] += step * d[k];
        }
        if iters % 50 == 0 {
            hess(&x, &mut hx);
            r = hx.iter().map(|&v| -v).collect();
            project(&mut r);
        } else {
            for k in 0..dim {
                r[k] -= step * hd[k];
            }
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..dim {
            d[k] = r[k] + beta * d[k];
        }
    }

    let gamma = cover.membership();
    let w: Vec<Vec<T>> = slots.iter().map(|s| s.iter().map(|&k| x[k]).collect()).collect();
    // `slots[i]` and `gamma[i]` both list groups in ascending order.
    Ok((EstimatorWeights { gamma, w }, iters))
}

/// `Σ_j (Σ_{i∈G_j} |c_i|)² / M_j` for a disjoint grouping.
pub fn worst_case_bound<T: Real, C: Cover + ?Sized>(coefficients: &[T], cover: &C, alloc: &ShotAllocation<T>) -> Result<T> {
    alloc.check_groups(cover.num_groups())?;
    if let Some(i) = cover.membership().iter().position(|g| g.len() > 1) {
        return Err(Error::InvalidArgument(format!("term {i} appears in more than one group")));
    }
    Ok(cover
        .groups()
        .iter()
        .zip(&alloc.m)
        .map(|(g, &m)| {
            let l1: T = g.iter().map(|&i| coefficients[i].abs()).sum();
            l1 * l1 / m
        })
        .sum())
}

/// Shots needed for accuracy `ε`: `(Σ_i √Var_i / ε)²`.
pub fn measurement_complexity<T: Real>(group_variances: &[T], epsilon: T) -> Result<T> {
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument(format!("accuracy must be positive, got {epsilon}")));
    }
    if let Some(v) = group_variances.iter().find(|v| !(**v >= T::zero())) {
        return Err(Error::InvalidArgument(format!("negative variance {v}")));
    }
    let s: T = group_variances.iter().map(|v| v.sqrt()).sum();
    Ok((s / epsilon).powi(2))
}

/// JSON summary of one variance evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub grouping_id: String,
    pub allocation: Vec<f64>,
    pub flavor: MomentsFlavor,
    pub variance: f64,
    pub diagonal_part: f64,
    pub covariance_part: f64,
}

impl VarianceReport {
    pub fn new<T: Real>(grouping_id: &str, alloc: &ShotAllocation<T>, flavor: MomentsFlavor, parts: VarianceParts<T>) -> Self {
        VarianceReport {
            grouping_id: grouping_id.to_string(),
            allocation: alloc.shots().iter().map(|v| v.to_f64_lossy()).collect(),
            flavor,
            variance: parts.total.to_f64_lossy(),
            diagonal_part: parts.diagonal.to_f64_lossy(),
            covariance_part: parts.covariance.to_f64_lossy(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::Grouping;

    fn cover(n: usize, groups: Vec<Vec<usize>>) -> Grouping {
        Grouping::new(n, groups, false).unwrap()
    }

    #[test]
    fn heuristic_weights_examples() {
        let g = cover(3, vec![vec![0, 1], vec![2]]);
        let w = heuristic_weights(&g, &ShotAllocation::new(vec![5.0, 2.0]).unwrap()).unwrap();
        for i in 0..3 {
            assert_eq!(w.weights_of(i), &[1.0]);
        }
        let g = cover(2, vec![vec![0, 1], vec![0]]);
        let w = heuristic_weights(&g, &ShotAllocation::new(vec![3.0, 1.0]).unwrap()).unwrap();
        assert_eq!(w.weights_of(0), &[0.75, 0.25]);
        assert_eq!(w.get(1, 1), 0.0);
        let g = cover(3, vec![vec![0, 1]]);
        assert!(heuristic_weights(&g, &ShotAllocation::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn disjoint_zero_covariance_is_sum_over_groups() {
        // S = (2, 8)
        let coeffs = [1.0, 1.0, 2.0, 2.0];
        let g = cover(4, vec![vec![0, 1], vec![2, 3]]);
        let alloc = ShotAllocation::new(vec![1.0, 1.0]).unwrap();
        let w = heuristic_weights(&g, &alloc).unwrap();
        let v = estimator_variance(&coeffs, &g, &w, &alloc, &ZeroCovariance::unit(4)).unwrap();
        assert_eq!(v.total, 10.0);
        assert_eq!(v.covariance, 0.0);
        let zero = ZeroCovariance::new(vec![0.0; 4]).unwrap();
        assert_eq!(estimator_variance(&coeffs, &g, &w, &alloc, &zero).unwrap().total, 0.0);
    }

    #[test]
    fn missing_covariance_is_reported() {
        let g = cover(2, vec![vec![0, 1]]);
        let alloc = ShotAllocation::new(vec![1.0]).unwrap();
        let w = heuristic_weights(&g, &alloc).unwrap();
        let m = TabulatedMoments::new(MomentsFlavor::UserSupplied, vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            estimator_variance(&[1.0, 1.0], &g, &w, &alloc, &m),
            Err(Error::MissingCovariance { i: 0, k: 1 })
        ));
    }

    #[test]
    fn weight_and_alpha_forms_agree() {
        let coeffs = [0.7f64, -1.2, 0.4, 0.9];
        let g = cover(4, vec![vec![0, 1, 2], vec![1, 3], vec![2, 3, 0]]);
        let alloc = ShotAllocation::new(vec![2.0, 5.0, 3.0]).unwrap();
        let mut m = TabulatedMoments::new(MomentsFlavor::UserSupplied, vec![0.3, 0.8, 1.0, 0.6]).unwrap();
        for (i, k, v) in [(0, 1, 0.1), (0, 2, -0.2), (1, 2, 0.05), (1, 3, 0.3), (2, 3, -0.1), (0, 3, 0.2)] {
            m.set_cov(i, k, v).unwrap();
        }
        let w = heuristic_weights(&g, &alloc).unwrap();
        let a = estimator_variance(&coeffs, &g, &w, &alloc, &m).unwrap();
        let b = shot_weighted_variance(&coeffs, &g, &alloc, &m).unwrap();
        assert!((a.total - b.total).abs() < 1e-12);
        assert!((a.diagonal - b.diagonal).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let coeffs = [0.7f64, -1.2, 0.4, 0.9];
        let g = cover(4, vec![vec![0, 1, 2], vec![1, 3], vec![2, 3, 0]]);
        let mut m = TabulatedMoments::new(MomentsFlavor::UserSupplied, vec![0.3, 0.8, 1.0, 0.6]).unwrap();
        for (i, k, v) in [(0, 1, 0.1), (0, 2, -0.2), (1, 2, 0.05), (1, 3, 0.3), (2, 3, -0.1), (0, 3, 0.2)] {
            m.set_cov(i, k, v).unwrap();
        }
        let model = ShotWeightedModel::new(&coeffs, &g, &m).unwrap();
        let x = [2.0, 5.0, 3.0];
        let (f, grad) = model.value_and_gradient(&x);
        assert!((f - model.value(&x)).abs() < 1e-14);
        for j in 0..3 {
            let h = 1e-6;
            let mut up = x;
            up[j] += h;
            let mut dn = x;
            dn[j] -= h;
            let fd = (model.value(&up) - model.value(&dn)) / (2.0 * h);
            assert!((fd - grad[j]).abs() < 1e-7, "group {j}: {fd} vs {}", grad[j]);
        }
    }

    #[test]
    fn numeric_weights_match_closed_form_without_covariance() {
        let coeffs = [0.7f64, -1.2, 0.4, 0.9];
        let g = cover(4, vec![vec![0, 1, 2], vec![1, 3], vec![2, 3, 0]]);
        let alloc = ShotAllocation::new(vec![2.0, 5.0, 3.0]).unwrap();
        let m = ZeroCovariance::new(vec![0.3, 0.8, 1.0, 0.6]).unwrap();
        let (w, _) = optimal_weights_numeric(&coeffs, &g, &alloc, &m, WeightOptions::default()).unwrap();
        let h = heuristic_weights(&g, &alloc).unwrap();
        assert!(w.max_abs_diff(&h) < 1e-9);
        assert_eq!(optimal_weights(&coeffs, &g, &alloc, &m).unwrap(), h);
    }

    #[test]
    fn zero_weight_embedding_keeps_variance() {
        let coeffs = [0.7, -1.2, 0.4];
        let base = cover(3, vec![vec![0, 1], vec![2]]);
        let grown = cover(3, vec![vec![0, 1], vec![2, 0]]);
        let alloc = ShotAllocation::new(vec![2.0, 1.0]).unwrap();
        let w = heuristic_weights(&base, &alloc).unwrap();
        let w2 = w.extend_to(&grown).unwrap();
        let m = WorstCase::new(&coeffs);
        let a = estimator_variance(&coeffs, &base, &w, &alloc, &m).unwrap();
        let b = estimator_variance(&coeffs, &grown, &w2, &alloc, &m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn worst_case_and_complexity() {
        let one = cover(2, vec![vec![0, 1]]);
        assert_eq!(worst_case_bound(&[1.0, -1.0], &one, &ShotAllocation::new(vec![1.0]).unwrap()).unwrap(), 4.0);
        let singles = cover(2, vec![vec![0], vec![1]]);
        let alloc = ShotAllocation::new(vec![2.0, 4.0]).unwrap();
        assert_eq!(worst_case_bound(&[1.0, 2.0], &singles, &alloc).unwrap(), 0.5 + 1.0);
        let overlapping = cover(2, vec![vec![0, 1], vec![1]]);
        assert!(worst_case_bound(&[1.0, 2.0], &overlapping, &alloc).is_err());

        assert!((measurement_complexity(&[1.0f64], 0.1).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(measurement_complexity(&[0.0, 0.0], 0.5).unwrap(), 0.0);
        assert_eq!(measurement_complexity(&[1.0, 4.0], 1.0).unwrap(), 9.0);
        assert!(measurement_complexity(&[1.0], 0.0).is_err());
    }

    #[test]
    fn allocation_validation() {
        assert!(ShotAllocation::<f64>::new(vec![]).is_err());
        assert!(ShotAllocation::new(vec![1.0, 0.0]).is_err());
        assert!(ShotAllocation::new(vec![1.0, f64::NAN]).is_err());
        assert!(IntegerAllocation::new(vec![3, 0]).is_err());
        let a = IntegerAllocation::new(vec![3, 1]).unwrap();
        assert_eq!(a.to_continuous::<f64>().total(), 4.0);
    }

    #[test]
    fn moments_validation() {
        assert!(ZeroCovariance::new(vec![1.5f64]).is_err());
        assert!(TabulatedMoments::new(MomentsFlavor::ExactState, vec![-0.1f64]).is_err());
        let w = WorstCase::new(&[1.0, -2.0, 3.0]);
        assert_eq!(w.cov(0, 1).unwrap(), -1.0);
        assert_eq!(w.cov(0, 2).unwrap(), 1.0);
    }

    #[test]
    fn report_json_fields() {
        let alloc = ShotAllocation::new(vec![1.0]).unwrap();
        let r = VarianceReport::new(
            "g",
            &alloc,
            MomentsFlavor::ZeroCovariance,
            VarianceParts { total: 2.0, diagonal: 2.0, covariance: 0.0 },
        );
        let v = serde_json::to_value(&r).unwrap();
        for key in ["grouping_id", "allocation", "flavor", "variance", "diagonal_part", "covariance_part"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["flavor"], "zero-covariance");
    }
}
