//! Desk-scale numerical experiments: sweeps that produce one record per row.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{alloc_l2, alloc_optimize, AllocOptions};
use crate::clifford::{diagonalize, CliffordCircuit};
use crate::constructions::{build_theorem1, theorem1_variances, Theorem1Variances};
use crate::error::{Error, Result};
use crate::estimator::{
    empirical_energy, estimator_variance, heuristic_weights, shot_weighted_variance, EstimatorWeights,
    IntegerAllocation, Moments, MomentsFlavor, ShotAllocation, TabulatedMoments, ZeroCovariance,
};
use crate::grouping::{sorted_insertion, validate_grouping, Cover, Grouping};
use crate::hamiltonian::{gen_hubbard_spinless_2xn, gen_ising_all_to_all, gen_random, AbstractHamiltonian, Hamiltonian};
use crate::pauli::Sign;
use crate::repacking::{adhoc_repack, posthoc_repack_synthesized};
use crate::rng;
use crate::simulator::{
    ising_witness_state, variance_covariance_split, GroupSampleRecord, GroupSampler, ProductState, StateVector,
    MAX_QUBITS,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_SCALING_QUBITS: usize = 10;

/// A named sweep with its parameters and rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport<R> {
    pub experiment: String,
    pub schema_version: u32,
    pub parameters: serde_json::Value,
    pub rows: Vec<R>,
}

impl<R> ExperimentReport<R> {
    pub fn new(experiment: &str, parameters: serde_json::Value, rows: Vec<R>) -> Self {
        ExperimentReport { experiment: experiment.into(), schema_version: SCHEMA_VERSION, parameters, rows }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginFit {
    pub slope: f64,
    /// `1 - SS_res / Σ (y - ȳ)²`
    pub r2: f64,
    /// `1 - SS_res / Σ y²`
    pub r2_uncentered: f64,
}

/// Least squares `y ≈ slope · x`.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> Result<OriginFit> {
    check_fit_input(x, y)?;
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|b| (b - mean).powi(2)).sum();
    let ss_raw: f64 = y.iter().map(|b| b * b).sum();
    Ok(OriginFit { slope, r2: 1.0 - ss_res / ss_tot, r2_uncentered: 1.0 - ss_res / ss_raw })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope · x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    check_fit_input(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    Ok(LineFit { slope, intercept, r2: 1.0 - ss_res / ss_tot })
}

fn check_fit_input(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), found: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("a fit needs at least two points".into()));
    }
    Ok(())
}

/// Sample mean and its standard error.
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One row per `L`, computed in parallel and returned in input order.
pub fn theorem1_sweep(l_list: &[usize], unit: bool, m_tot: f64) -> Result<Vec<Theorem1Variances>> {
    l_list.par_iter().map(|&l| theorem1_variances(&build_theorem1::<f64>(l, unit)?, m_tot)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixARow {
    pub n: usize,
    pub total: f64,
    pub expected_total: f64,
    pub diagonal: f64,
    pub covariance: f64,
    pub max_diagonal: f64,
    pub ratio: f64,
    pub bound: f64,
}

/// Variance split of the all-to-all Ising model in its witness state.
pub fn appendix_a(n: usize) -> Result<AppendixARow> {
    let h: Hamiltonian<f64> = gen_ising_all_to_all(n)?;
    let s = ising_witness_state(n)?;
    let v = variance_covariance_split(&s, &h)?;
    let nf = n as f64;
    Ok(AppendixARow {
        n,
        total: v.total,
        expected_total: nf.powi(4) / 16.0,
        diagonal: v.diagonal,
        covariance: v.covariance,
        max_diagonal: nf * (nf - 1.0) / 2.0,
        ratio: v.diagonal / v.total,
        bound: 8.0 * (nf - 1.0) / nf.powi(3),
    })
}

/// Three operators `A, B, C` with `[A,B] = [A,C] = 0` and `B, C` not
/// commuting; `G = {{A,C},{B}}` measured with `(M1, M2)` shots and `R` that
/// also places `A` in the second group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixBParams {
    pub c_a: f64,
    pub c_b: f64,
    pub c_c: f64,
    pub m1: f64,
    pub m2: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub var_c: f64,
    pub cov_ab: f64,
    pub cov_ac: f64,
}

impl AppendixBParams {
    /// `σ²_A = σ_AB = 1`, `σ_AC = 0`, `σ²_B = σ²_C = 1`, `c_C = 1`.
    pub fn simplified(c_a: f64, c_b: f64, m1: f64, m2: f64) -> Self {
        AppendixBParams { c_a, c_b, c_c: 1.0, m1, m2, var_a: 1.0, var_b: 1.0, var_c: 1.0, cov_ab: 1.0, cov_ac: 0.0 }
    }

    fn is_simplified(&self) -> bool {
        self.var_a == 1.0 && self.cov_ab == 1.0 && self.cov_ac == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixBResult {
    pub params: AppendixBParams,
    pub var_g: f64,
    pub var_r: f64,
    /// `Var(R) - Var(G)`
    pub delta: f64,
    /// `2 c_A c_B σ_AB - (M2/M1)(c_A² σ²_A + 2 c_A c_C σ_AC)`; positive iff
    /// the variance increases.
    pub margin: f64,
    pub predicts_increase: bool,
    pub observed_increase: bool,
    /// `2 M1 / M2 > c_A / c_B`, only meaningful under the simplified moments
    /// with `c_A c_B > 0`.
    pub simplified_applicable: bool,
    pub simplified_predicts_increase: bool,
}

pub fn appendix_b(p: AppendixBParams) -> Result<AppendixBResult> {
    let coeffs = [p.c_a, p.c_b, p.c_c];
    if coeffs.iter().any(|c| *c == 0.0 || !c.is_finite()) {
        return Err(Error::InvalidArgument("coefficients must be finite and non-zero".into()));
    }
    if !(p.m1 > 0.0 && p.m2 > 0.0) || !p.m1.is_finite() || !p.m2.is_finite() {
        return Err(Error::InvalidArgument("shot counts must be positive".into()));
    }
    for (name, cov, va, vb) in [("AB", p.cov_ab, p.var_a, p.var_b), ("AC", p.cov_ac, p.var_a, p.var_c)] {
        if !cov.is_finite() || cov.abs() > (va * vb).sqrt() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("covariance {name} = {cov} violates Cauchy-Schwarz")));
        }
    }
    let adjacency = vec![vec![true, true, true], vec![true, true, false], vec![true, false, true]];
    let oracle = AbstractHamiltonian::new(coeffs.to_vec(), &adjacency)?;
    let g = Grouping::new(3, vec![vec![0, 2], vec![1]], true)?;
    let r = Grouping::new(3, vec![vec![0, 2], vec![1, 0]], false)?;
    debug_assert!(validate_grouping(&oracle, &r.groups, false)?.is_empty());

    let mut moments = TabulatedMoments::new(MomentsFlavor::UserSupplied, vec![p.var_a, p.var_b, p.var_c])?;
    moments.set_cov(0, 1, p.cov_ab)?;
    moments.set_cov(0, 2, p.cov_ac)?;
    let alloc = ShotAllocation::new(vec![p.m1, p.m2])?;
    let var_g = shot_weighted_variance(&coeffs, &g, &alloc, &moments)?.total;
    let var_r = shot_weighted_variance(&coeffs, &r, &alloc, &moments)?.total;
    let delta = var_r - var_g;
    let margin =
        2.0 * p.c_a * p.c_b * p.cov_ab - (p.m2 / p.m1) * (p.c_a * p.c_a * p.var_a + 2.0 * p.c_a * p.c_c * p.cov_ac);
    Ok(AppendixBResult {
        params: p,
        var_g,
        var_r,
        delta,
        margin,
        predicts_increase: margin > 0.0,
        observed_increase: delta > 0.0,
        simplified_applicable: p.is_simplified() && p.c_a * p.c_b > 0.0,
        simplified_predicts_increase: 2.0 * p.m1 / p.m2 > p.c_a / p.c_b,
    })
}

/// `(c_A, M1)` over a `size x size` grid with `c_B = 1`, `M2 = 100`; the
/// grid points avoid the boundary `2 M1 / M2 = c_A / c_B`.
pub fn appendix_b_grid(size: usize) -> Result<Vec<AppendixBResult>> {
    let mut out = Vec::with_capacity(size * size);
    for a in 0..size {
        for m in 0..size {
            let c_a = 0.05 + 0.1 * a as f64;
            let m1 = 10.0 * (m + 1) as f64;
            out.push(appendix_b(AppendixBParams::simplified(c_a, 1.0, m1, 100.0))?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HubbardRow {
    pub n: usize,
    pub sites: usize,
    pub terms: usize,
    pub states: usize,
    pub mean_diagonal: f64,
    pub se_diagonal: f64,
    pub mean_covariance: f64,
    pub se_covariance: f64,
    pub mean_total: f64,
}

/// Diagonal and covariance parts of `Var(H)` over random product states on
/// the periodic 2 x `n` lattice.
pub fn hubbard_split(n: usize, t: f64, v: f64, states: usize, seed: u64) -> Result<HubbardRow> {
    if 2 * n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("2 x {n} lattice exceeds the {MAX_QUBITS}-qubit cap")));
    }
    if states < 2 {
        return Err(Error::InvalidArgument("need at least two states".into()));
    }
    let h: Hamiltonian<f64> = gen_hubbard_spinless_2xn(n, t, v)?;
    let splits = (0..states)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::split(seed, ((n as u64) << 32) | s as u64);
            let ps = ProductState::<f64>::random_with(2 * n, &mut r)?;
            variance_covariance_split(&ps.to_state_vector()?, &h)
        })
        .collect::<Result<Vec<_>>>()?;
    let d: Vec<f64> = splits.iter().map(|v| v.diagonal).collect();
    let c: Vec<f64> = splits.iter().map(|v| v.covariance).collect();
    let (mean_diagonal, se_diagonal) = mean_and_se(&d);
    let (mean_covariance, se_covariance) = mean_and_se(&c);
    Ok(HubbardRow {
        n,
        sites: 2 * n,
        terms: h.len(),
        states,
        mean_diagonal,
        se_diagonal,
        mean_covariance,
        se_covariance,
        mean_total: splits.iter().map(|v| v.total).sum::<f64>() / states as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomScalingRow {
    pub n: usize,
    pub terms: usize,
    pub groups: usize,
    pub var_sorted_insertion: f64,
    pub var_posthoc: f64,
    pub var_adhoc: f64,
    pub var_adhoc_opt: f64,
    pub ratio_posthoc: f64,
    pub ratio_adhoc: f64,
    pub ratio_adhoc_opt: f64,
    pub mean_multiplicity_posthoc: f64,
    pub mean_multiplicity_adhoc: f64,
}

/// Sorted insertion with `l2` shots against post-hoc and ad-hoc repacking
/// with the same shots, and ad-hoc with re-optimized shots. Variances use
/// zero covariance and the per-term variances of a random product state.
pub fn random_scaling(n: usize, density: f64, seed: u64) -> Result<RandomScalingRow> {
    if n > MAX_SCALING_QUBITS {
        return Err(Error::InvalidArgument(format!("random scaling is capped at {MAX_SCALING_QUBITS} qubits, got {n}")));
    }
    let h: Hamiltonian<f64> = gen_random(n, density, seed)?;
    let c = h.coefficients();
    let ps = ProductState::<f64>::random_with(n, &mut rng::split(seed, 1))?;
    let vars = h.terms().iter().map(|t| ps.expectation(&t.pauli).map(|e| 1.0 - e * e)).collect::<Result<Vec<_>>>()?;
    let moments = ZeroCovariance::new(vars)?;

    let m_tot = 1.0;
    let base = sorted_insertion(&h);
    let alloc = alloc_l2(&c, &base, m_tot)?;
    let posthoc = posthoc_repack_synthesized(&h, &base)?;
    let adhoc = adhoc_repack(&h, &base)?;
    let var_si = shot_weighted_variance(&c, &base, &alloc, &moments)?.total;
    let var_posthoc = shot_weighted_variance(&c, &posthoc, &alloc, &moments)?.total;
    let var_adhoc = shot_weighted_variance(&c, &adhoc, &alloc, &moments)?.total;
    let opts = AllocOptions { start: Some(alloc.shots().to_vec()), ..AllocOptions::default() };
    let var_adhoc_opt = alloc_optimize(&c, &adhoc, &moments, m_tot, &opts)?.variance.min(var_adhoc);
    let mean_mult = |m: Vec<usize>| m.iter().sum::<usize>() as f64 / m.len() as f64;
    Ok(RandomScalingRow {
        n,
        terms: h.len(),
        groups: base.groups.len(),
        var_sorted_insertion: var_si,
        var_posthoc,
        var_adhoc,
        var_adhoc_opt,
        ratio_posthoc: var_si / var_posthoc,
        ratio_adhoc: var_si / var_adhoc,
        ratio_adhoc_opt: var_si / var_adhoc_opt,
        mean_multiplicity_posthoc: mean_mult(posthoc.multiplicity()),
        mean_multiplicity_adhoc: mean_mult(adhoc.multiplicity()),
    })
}

/// Everything needed to draw repeated energy estimates from one state.
#[derive(Clone, Debug)]
pub struct MeasurementPlan {
    coefficients: Vec<f64>,
    cover: Grouping,
    samplers: Vec<GroupSampler>,
    shots: Vec<u64>,
    weights: EstimatorWeights<f64>,
}

impl MeasurementPlan {
    /// Circuits are synthesized per group when not supplied. Shot-weighted
    /// estimator weights follow the integer allocation.
    pub fn new<C: Cover + ?Sized>(
        state: &StateVector<f64>,
        h: &Hamiltonian<f64>,
        cover: &C,
        circuits: Option<&[CliffordCircuit]>,
        signs: Option<&[Vec<Sign>]>,
        shots: &IntegerAllocation,
    ) -> Result<Self> {
        let groups = cover.groups();
        if shots.shots().len() != groups.len() {
            return Err(Error::Dimension { expected: groups.len(), found: shots.shots().len() });
        }
        let samplers = groups
            .par_iter()
            .enumerate()
            .map(|(j, g)| {
                let synthesized;
                let circuit = match circuits {
                    Some(cs) => cs.get(j).ok_or(Error::Dimension { expected: groups.len(), found: cs.len() })?,
                    None => {
                        let paulis: Vec<_> = g.iter().map(|&i| h.pauli(i).clone()).collect();
                        synthesized = diagonalize(&paulis)?.circuit;
                        &synthesized
                    }
                };
                let s = signs.and_then(|s| s.get(j)).map(|v| v.as_slice());
                GroupSampler::new(state, h, j, g, circuit, s)
            })
            .collect::<Result<Vec<_>>>()?;
        let cover = Grouping::new(cover.n_terms(), groups.to_vec(), false)?;
        let weights = heuristic_weights(&cover, &shots.to_continuous())?;
        Ok(MeasurementPlan { coefficients: h.coefficients(), cover, samplers, shots: shots.shots().to_vec(), weights })
    }

    pub fn weights(&self) -> &EstimatorWeights<f64> {
        &self.weights
    }

    /// One full round: every group measured with its shots.
    pub fn sample_records(&self, r: &mut rng::Rng, keep_raw: bool) -> Result<Vec<GroupSampleRecord<f64>>> {
        self.samplers.iter().zip(&self.shots).map(|(s, &m)| s.sample::<f64>(m, r, keep_raw)).collect()
    }

    pub fn energy_of(&self, records: &[GroupSampleRecord<f64>]) -> Result<f64> {
        empirical_energy(&self.coefficients, &self.cover, &self.weights, records)
    }

    pub fn sample_energy(&self, r: &mut rng::Rng) -> Result<f64> {
        self.energy_of(&self.sample_records(r, false)?)
    }

    /// `reps` independent estimates; estimate `k` uses its own split stream.
    pub fn sample_energies(&self, reps: usize, seed: u64) -> Result<Vec<f64>> {
        (0..reps).into_par_iter().map(|k| self.sample_energy(&mut rng::split(seed, k as u64))).collect()
    }

    pub fn analytic_variance<Mo: Moments<f64> + ?Sized>(&self, moments: &Mo) -> Result<f64> {
        let alloc = ShotAllocation::new(self.shots.iter().map(|&m| m as f64).collect())?;
        Ok(estimator_variance(&self.coefficients, &self.cover, &self.weights, &alloc, moments)?.total)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub reps: usize,
    pub exact_energy: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub sample_variance: f64,
    /// Standard error of the sample variance from the sample fourth moment.
    pub sample_variance_se: f64,
    pub analytic_variance: f64,
}

pub fn summarize(estimates: &[f64], exact_energy: f64, analytic_variance: f64) -> SimulationSummary {
    let r = estimates.len() as f64;
    let (mean, mean_se) = mean_and_se(estimates);
    let s2 = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let m4 = estimates.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
    let var_s2 = ((m4 - s2 * s2 * (r - 3.0) / (r - 1.0)) / r).max(0.0);
    SimulationSummary {
        reps: estimates.len(),
        exact_energy,
        mean,
        mean_se,
        sample_variance: s2,
        sample_variance_se: var_s2.sqrt(),
        analytic_variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_recover_lines() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        let f = fit_through_origin(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let l = fit_line(&x, &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert!((l.slope - 2.0).abs() < 1e-12 && (l.intercept - 1.0).abs() < 1e-12);
        assert!(fit_line(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn appendix_a_n4() {
        let row = appendix_a(4).unwrap();
        assert!((row.total - 16.0).abs() < 1e-10);
        assert!((row.diagonal - 4.0).abs() < 1e-10);
        assert!(row.ratio <= row.bound);
    }

    #[test]
    fn appendix_b_matches_closed_form() {
        let p = AppendixBParams {
            c_a: 0.7,
            c_b: -1.3,
            c_c: 0.4,
            m1: 30.0,
            m2: 70.0,
            var_a: 0.8,
            var_b: 0.5,
            var_c: 0.9,
            cov_ab: 0.3,
            cov_ac: -0.2,
        };
        let r = appendix_b(p).unwrap();
        let (m1, m2) = (p.m1, p.m2);
        let expect = 2.0 * p.c_a * p.c_b * p.cov_ab / (m1 + m2)
            - m2 * (p.c_a * p.c_a * p.var_a + 2.0 * p.c_a * p.c_c * p.cov_ac) / (m1 * (m1 + m2));
        assert!((r.delta - expect).abs() < 1e-12);
        assert_eq!(r.predicts_increase, r.observed_increase);
    }

    #[test]
    fn appendix_b_negative_cb_never_increases() {
        for m1 in [1.0, 10.0, 1000.0] {
            let r = appendix_b(AppendixBParams::simplified(1.0, -0.5, m1, 1.0)).unwrap();
            assert!(!r.observed_increase);
            assert!(!r.simplified_applicable);
        }
    }

    #[test]
    fn appendix_b_rejects_bad_moments() {
        let mut p = AppendixBParams::simplified(1.0, 1.0, 1.0, 1.0);
        p.cov_ab = 1.5;
        assert!(appendix_b(p).is_err());
    }

    #[test]
    fn hubbard_small() {
        let a = hubbard_split(2, 1.0, 1.0, 20, 3).unwrap();
        let b = hubbard_split(2, 1.0, 1.0, 20, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_diagonal > 0.0);
        assert!(hubbard_split(8, 1.0, 1.0, 2, 0).is_err());
    }

    #[test]
    fn random_scaling_ratios_at_least_one() {
        let row = random_scaling(4, 0.2, 11).unwrap();
        assert!(row.ratio_posthoc >= 1.0 - 1e-12);
        assert!(row.ratio_adhoc >= 1.0 - 1e-12);
        assert!(row.ratio_adhoc_opt >= row.ratio_adhoc - 1e-12);
        assert!(random_scaling(11, 0.1, 0).is_err());
    }

    #[test]
    fn plan_on_eigenstate_has_no_spread() {
        let h: Hamiltonian<f64> = Hamiltonian::from_pairs(&[(1.0, "ZZ"), (0.5, "ZI"), (0.25, "IZ")]).unwrap();
        let base = sorted_insertion(&h);
        let state = StateVector::zero(2).unwrap();
        let shots = IntegerAllocation::new(vec![10; base.groups.len()]).unwrap();
        let plan = MeasurementPlan::new(&state, &h, &base, None, None, &shots).unwrap();
        let e = plan.sample_energies(5, 1).unwrap();
        assert!(e.iter().all(|v| (v - 1.75).abs() < 1e-12));
    }
}
