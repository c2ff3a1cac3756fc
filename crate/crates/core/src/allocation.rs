//! Distributing a shot budget over measurement groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{IntegerAllocation, Moments, MomentsFlavor, ShotAllocation, ShotWeightedModel};
use crate::grouping::{group_norms, Cover};
use crate::scalar::Real;

fn proportional<T: Real>(weights: Vec<T>, m_tot: T) -> Result<ShotAllocation<T>> {
    if !(m_tot > T::zero()) {
        return Err(Error::InvalidArgument(format!("total shots must be positive, got {m_tot}")));
    }
    if let Some(j) = weights.iter().position(|w| !(*w > T::zero())) {
        return Err(Error::InvalidArgument(format!("group {j} is empty")));
    }
    let s: T = weights.iter().copied().sum();
    ShotAllocation::new(weights.into_iter().map(|w| m_tot * w / s).collect())
}

/// `M_j ∝ Σ_{i∈G_j} |c_i|`.
pub fn alloc_l1<T: Real, C: Cover + ?Sized>(coefficients: &[T], cover: &C, m_tot: T) -> Result<ShotAllocation<T>> {
    proportional(group_norms(coefficients, cover.groups()).iter().map(|n| n.l1).collect(), m_tot)
}

/// `M_j ∝ √(Σ_{i∈G_j} c_i²)`, optimal for a disjoint grouping under the
/// state-independent zero-covariance model.
pub fn alloc_l2<T: Real, C: Cover + ?Sized>(coefficients: &[T], cover: &C, m_tot: T) -> Result<ShotAllocation<T>> {
    proportional(group_norms(coefficients, cover.groups()).iter().map(|n| n.sum_sq.sqrt()).collect(), m_tot)
}

pub fn alloc_uniform<T: Real, C: Cover + ?Sized>(cover: &C, m_tot: T) -> Result<ShotAllocation<T>> {
    if let Some(j) = cover.groups().iter().position(|g| g.is_empty()) {
        return Err(Error::InvalidArgument(format!("group {j} is empty")));
    }
    proportional(vec![T::one(); cover.num_groups()], m_tot)
}

/// `(Σ_j √S_j)² / M` with `S_j = Σ_{i∈G_j} c_i²`.
pub fn min_variance_disjoint<T: Real, C: Cover + ?Sized>(coefficients: &[T], cover: &C, m_tot: T) -> T {
    let s: T = group_norms(coefficients, cover.groups()).iter().map(|n| n.sum_sq.sqrt()).sum();
    s * s / m_tot
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocOptions {
    /// Stop once `max_j M_j |g_j - ḡ| / f` falls below this.
    pub kkt_tol: f64,
    pub max_iter: usize,
    /// Lower bound on any `M_j` as a fraction of `M_tot`.
    pub floor: f64,
    /// Starting point; uniform when absent.
    pub start: Option<Vec<f64>>,
}

impl Default for AllocOptions {
    fn default() -> Self {
        AllocOptions { kkt_tol: 1e-10, max_iter: 100_000, floor: 1e-12, start: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizedAllocation<T: Real> {
    pub alloc: ShotAllocation<T>,
    pub variance: T,
    pub kkt_residual: T,
    pub iterations: usize,
}

fn kkt_residual<T: Real>(m: &[T], g: &[T], f: T, m_tot: T, floor: T) -> T {
    if f == T::zero() {
        return T::zero();
    }
    let gbar = m.iter().zip(g).map(|(&a, &b)| a * b).sum::<T>() / m_tot;
    let mut r = T::zero();
    for (&mj, &gj) in m.iter().zip(g) {
        let at_floor = mj <= floor * T::of(1.000001);
        if at_floor && gj >= gbar {
            continue;
        }
        r = r.max(mj * (gj - gbar).abs());
    }
    r / f.abs()
}

fn normalize<T: Real>(m: &mut [T], m_tot: T, floor: T) {
    for _ in 0..3 {
        let s: T = m.iter().copied().sum();
        for v in m.iter_mut() {
            *v = (*v * m_tot / s).max(floor);
        }
    }
}

/// Continuous allocation minimizing the shot-weighted estimator variance
/// under `moments`, with the heuristic weights held fixed.
///
/// Multiplicative updates on the scaled simplex: when every partial
/// derivative is negative the step is `M_j ← M_j √(-g_j)` (exact in one step
/// for disjoint groupings), otherwise an exponentiated-gradient step; both
/// are damped by backtracking. Convergence is declared on the KKT residual.
pub fn alloc_optimize<T: Real, C: Cover + ?Sized, Mo: Moments<T> + ?Sized>(
    coefficients: &[T],
    cover: &C,
    moments: &Mo,
    m_tot: T,
    opts: &AllocOptions,
) -> Result<OptimizedAllocation<T>> {
    if !(m_tot > T::zero()) {
        return Err(Error::InvalidArgument(format!("total shots must be positive, got {m_tot}")));
    }
    let model = ShotWeightedModel::new(coefficients, cover, moments)?;
    let groups = model.num_groups();
    if groups == 0 {
        return Err(Error::InvalidArgument("no groups to allocate".into()));
    }
    let floor = T::of(opts.floor) * m_tot;
    let tol = T::of(opts.kkt_tol).max(T::epsilon() * T::of(256.0));
    let mut m: Vec<T> = match &opts.start {
        Some(s) if s.len() == groups => s.iter().map(|&v| T::of(v)).collect(),
        Some(s) => return Err(Error::Dimension { expected: groups, found: s.len() }),
        None => vec![T::one(); groups],
    };
    normalize(&mut m, m_tot, floor);

    let slack = T::of(1e-12);
    let mut iterations = 0;
    loop {
        let (f, g) = model.value_and_gradient(&m);
        let residual = kkt_residual(&m, &g, f, m_tot, floor);
        if residual <= tol || groups == 1 {
            return Ok(OptimizedAllocation { alloc: ShotAllocation::new(m)?, variance: f, kkt_residual: residual, iterations });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                what: "shot allocation",
                iterations,
                residual: residual.to_f64_lossy(),
                last_iterate: m.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        }
        iterations += 1;

        let dir: Vec<T> = if g.iter().all(|&x| x < T::zero()) {
            g.iter().map(|&x| T::of(0.5) * (-x).ln()).collect()
        } else {
            g.iter().map(|&x| -x * m_tot / f.abs()).collect()
        };
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<T> = m.iter().zip(&dir).map(|(&mj, &d)| mj * (t * d).exp()).collect();
            if trial.iter().any(|v| !v.is_finite()) {
                t *= T::of(0.5);
                continue;
            }
            normalize(&mut trial, m_tot, floor);
            let ft = model.value(&trial);
            if ft <= f + slack * f.abs() {
                accepted = Some(trial);
                break;
            }
            t *= T::of(0.5);
        }
        match accepted {
            Some(next) => m = next,
            None => {
                return Err(Error::NonConvergence {
                    what: "shot allocation (line search)",
                    iterations,
                    residual: residual.to_f64_lossy(),
                    last_iterate: m.iter().map(|v| v.to_f64_lossy()).collect(),
                })
            }
        }
    }
}

/// Integer shots `>= 1` summing to `m_tot`: scale, floor (at least one per
/// group), then hand out the remainder by largest fractional part, ties to
/// the lower group index.
pub fn round_allocation<T: Real>(alloc: &ShotAllocation<T>, m_tot: u64) -> Result<IntegerAllocation> {
    let groups = alloc.len();
    if (m_tot as usize) < groups {
        return Err(Error::InvalidArgument(format!("{m_tot} shots cannot cover {groups} groups")));
    }
    let scale = m_tot as f64 / alloc.total().to_f64_lossy();
    let exact: Vec<f64> = alloc.shots().iter().map(|v| v.to_f64_lossy() * scale).collect();
    let mut out: Vec<u64> = exact.iter().map(|&x| (x.floor() as u64).max(1)).collect();
    let assigned: u64 = out.iter().sum();
    if assigned <= m_tot {
        let frac: Vec<f64> = (0..groups).map(|j| exact[j] - out[j] as f64).collect();
        let mut order: Vec<usize> = (0..groups).collect();
        order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut left = m_tot - assigned;
        let mut k = 0;
        while left > 0 {
            out[order[k % groups]] += 1;
            left -= 1;
            k += 1;
        }
    } else {
        // floors of 1 overshot; take back from groups furthest above their share
        let mut over = assigned - m_tot;
        while over > 0 {
            let j = (0..groups)
                .filter(|&j| out[j] > 1)
                .min_by(|&a, &b| {
                    let (fa, fb) = (exact[a] - out[a] as f64, exact[b] - out[b] as f64);
                    fa.partial_cmp(&fb).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
                })
                .expect("m_tot >= groups");
            out[j] -= 1;
            over -= 1;
        }
    }
    IntegerAllocation::new(out)
}

/// JSON form of an allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    #[serde(rename = "M_tot")]
    pub m_tot: f64,
    pub continuous: Vec<f64>,
    pub integer: Option<Vec<u64>>,
    pub method: String,
    pub flavor: MomentsFlavor,
    pub kkt_residual: Option<f64>,
}

impl AllocationReport {
    pub fn new<T: Real>(
        alloc: &ShotAllocation<T>,
        integer: Option<&IntegerAllocation>,
        method: &str,
        flavor: MomentsFlavor,
        kkt_residual: Option<T>,
    ) -> Self {
        AllocationReport {
            m_tot: alloc.total().to_f64_lossy(),
            continuous: alloc.shots().iter().map(|v| v.to_f64_lossy()).collect(),
            integer: integer.map(|i| i.shots().to_vec()),
            method: method.to_string(),
            flavor,
            kkt_residual: kkt_residual.map(|r| r.to_f64_lossy()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{shot_weighted_variance, ZeroCovariance};
    use crate::grouping::Grouping;

    fn cover(n: usize, groups: Vec<Vec<usize>>) -> Grouping {
        Grouping::new(n, groups, false).unwrap()
    }

    #[test]
    fn closed_forms() {
        let g = cover(3, vec![vec![0], vec![1, 2]]);
        let a = alloc_l1(&[1.0, 1.0, -2.0], &g, 4.0).unwrap();
        assert_eq!(a.shots(), &[1.0, 3.0]);
        let r2 = 2.0f64.sqrt();
        let a = alloc_l2(&[1.0, r2, r2], &g, 3.0).unwrap();
        assert!((a.shots()[0] - 1.0).abs() < 1e-12 && (a.shots()[1] - 2.0).abs() < 1e-12);
        let one = cover(2, vec![vec![0, 1]]);
        assert_eq!(alloc_l1(&[1.0, 2.0], &one, 7.0).unwrap().shots(), &[7.0]);
        assert!(alloc_l1(&[1.0, 2.0], &one, 0.0).is_err());
        let empty = cover(2, vec![vec![0, 1], vec![]]);
        assert!(alloc_l2(&[1.0, 2.0], &empty, 1.0).is_err());
        assert_eq!(alloc_uniform(&g, 6.0).unwrap().shots(), &[3.0, 3.0]);
    }

    #[test]
    fn min_variance_examples() {
        let g = cover(2, vec![vec![0], vec![1]]);
        assert_eq!(min_variance_disjoint(&[1.0, 1.0], &g, 1.0), 4.0);
        let one = cover(1, vec![vec![0]]);
        assert_eq!(min_variance_disjoint(&[3.0], &one, 1.0), 9.0);
    }

    #[test]
    fn optimizer_reproduces_l2_on_disjoint() {
        let coeffs = [0.3f64, -1.1, 0.8, 0.2, 0.5];
        let g = cover(5, vec![vec![0, 1], vec![2], vec![3, 4]]);
        let z = ZeroCovariance::unit(5);
        let opt = alloc_optimize(&coeffs, &g, &z, 100.0, &AllocOptions::default()).unwrap();
        let l2 = alloc_l2(&coeffs, &g, 100.0).unwrap();
        for (a, b) in opt.alloc.shots().iter().zip(l2.shots()) {
            assert!((a - b).abs() / b < 1e-9);
        }
        assert!((opt.variance - min_variance_disjoint(&coeffs, &g, 100.0)).abs() < 1e-12);
    }

    #[test]
    fn optimizer_single_group_takes_everything() {
        let g = cover(2, vec![vec![0, 1]]);
        let opt = alloc_optimize(&[1.0, 2.0], &g, &ZeroCovariance::unit(2), 10.0, &AllocOptions::default()).unwrap();
        assert_eq!(opt.alloc.shots(), &[10.0]);
    }

    #[test]
    fn optimizer_beats_grid_on_overlapped_instance() {
        let coeffs = [1.0, 0.8, -0.6, 0.4];
        let g = cover(4, vec![vec![0, 1], vec![1, 2], vec![2, 3, 0]]);
        let z = ZeroCovariance::new(vec![0.9, 1.0, 0.7, 0.5]).unwrap();
        let opt = alloc_optimize(&coeffs, &g, &z, 1.0, &AllocOptions::default()).unwrap();
        let mut best = f64::INFINITY;
        let steps = 1000;
        for a in 1..steps {
            for b in 1..steps - a {
                let m = vec![a as f64 / steps as f64, b as f64 / steps as f64, (steps - a - b) as f64 / steps as f64];
                let v = shot_weighted_variance(&coeffs, &g, &ShotAllocation::new(m).unwrap(), &z).unwrap().total;
                best = best.min(v);
            }
        }
        assert!(opt.variance <= best + 1e-12);
        assert!(best - opt.variance < 1e-3 * best);
    }

    #[test]
    fn restarts_agree() {
        let coeffs = [1.0f64, 0.8, -0.6, 0.4, 0.3];
        let g = cover(5, vec![vec![0, 1, 4], vec![1, 2], vec![2, 3, 0], vec![4, 3]]);
        let z = ZeroCovariance::unit(5);
        let base = alloc_optimize(&coeffs, &g, &z, 1.0, &AllocOptions::default()).unwrap();
        for start in [[1.0, 2.0, 3.0, 4.0], [9.0, 0.1, 0.1, 1.0], [0.2, 0.2, 5.0, 0.5]] {
            let o = AllocOptions { start: Some(start.to_vec()), ..Default::default() };
            let r = alloc_optimize(&coeffs, &g, &z, 1.0, &o).unwrap();
            for (a, b) in r.alloc.shots().iter().zip(base.alloc.shots()) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rounding_rule() {
        let a = ShotAllocation::new(vec![1.5, 2.5]).unwrap();
        assert_eq!(round_allocation(&a, 4).unwrap().shots(), &[2, 2]);
        let a = ShotAllocation::new(vec![3.0, 1.0]).unwrap();
        assert_eq!(round_allocation(&a, 4).unwrap().shots(), &[3, 1]);
        let a = ShotAllocation::new(vec![1000.0, 0.001, 0.001]).unwrap();
        assert_eq!(round_allocation(&a, 3).unwrap().shots(), &[1, 1, 1]);
        assert_eq!(round_allocation(&a, 10).unwrap().total(), 10);
        assert!(round_allocation(&a, 2).is_err());
    }

    #[test]
    fn report_fields() {
        let a = ShotAllocation::new(vec![1.5, 2.5]).unwrap();
        let r = AllocationReport::new(&a, None, "l2", MomentsFlavor::ZeroCovariance, Some(0.0));
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["M_tot"], 4.0);
        assert_eq!(v["method"], "l2");
    }
}
