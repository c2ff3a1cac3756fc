use std::fs;
use std::path::Path;

use overgroup::allocation::AllocationReport;
use overgroup::estimator::VarianceReport;
use overgroup::experiments::{
    self as exp, hubbard_split, summarize, theorem1_sweep, AppendixBParams, ExperimentReport, MeasurementPlan,
    MAX_SCALING_QUBITS,
};
use overgroup::grouping::group_norms;
use overgroup::rng::split;
use overgroup::simulator::{write_raw_dump, RawDumpHeader, MAX_QUBITS};
use overgroup::*;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::output::{invocation, write_csv, write_json};
use crate::specs::{AllocSpec, MomentsSpec, StateSpec, WeightsSpec};
use crate::{
    AppendixAArgs, AppendixBArgs, CliError, HubbardArgs, RandomScalingArgs, RepackArgs, RepackMode, SimulateArgs,
    Theorem1Args, VarianceArgs,
};

type CliResult<T> = std::result::Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Text format unless the file ends in `.json`.
fn read_hamiltonian(path: &Path) -> CliResult<Hamiltonian64> {
    let parsed = if is_json(path) { Hamiltonian::from_json(&read_json(path)?) } else { parse_hamiltonian(&read_text(path)?) };
    parsed.map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

enum Loaded {
    Plain(Grouping),
    Repacked(RepackedGrouping),
}

impl Loaded {
    fn cover(&self) -> &dyn Cover {
        match self {
            Loaded::Plain(g) => g,
            Loaded::Repacked(r) => r,
        }
    }
}

fn reject_violations(what: &str, v: Vec<Violation>) -> CliResult<()> {
    if v.is_empty() {
        return Ok(());
    }
    let shown: Vec<String> = v.iter().take(5).map(|x| format!("{x:?}")).collect();
    Err(CliError::invalid(format!("{what}: {} violation(s), e.g. {}", v.len(), shown.join("; "))))
}

/// A grouping or repacked grouping, checked against `h`.
fn read_grouping(path: &Path, h: &Hamiltonian64) -> CliResult<Loaded> {
    let value = read_json(path)?;
    let ctx = |e: Error| CliError::invalid(format!("{}: {e}", path.display()));
    if value.get("base").is_some() {
        let r = RepackedGrouping::from_json(&value, h.len()).map_err(ctx)?;
        reject_violations("base grouping", validate_grouping(h, &r.base.groups, true)?)?;
        reject_violations("repacked grouping", validate_grouping(h, &r.groups, false)?)?;
        Ok(Loaded::Repacked(r))
    } else {
        let g = Grouping::from_json(&value, h.len()).map_err(ctx)?;
        reject_violations("grouping", validate_grouping(h, &g.groups, g.disjoint)?)?;
        Ok(Loaded::Plain(g))
    }
}

fn grouping_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes the main artifact to `out` (or stdout) and the summary to the
/// stream not taken by it.
fn emit<A: Serialize, S: Serialize>(out: Option<&Path>, artifact: &A, summary: &S) -> CliResult<()> {
    write_json(out, artifact)?;
    let s = serde_json::to_string(summary)?;
    if out.is_some() {
        println!("{s}");
    } else {
        eprintln!("{s}");
    }
    Ok(())
}

pub fn group(ham: &Path, out: Option<&Path>) -> CliResult<()> {
    let h = read_hamiltonian(ham)?;
    let g = sorted_insertion(&h);
    let norms = group_norms(&h.coefficients(), &g.groups);
    let summary = json!({
        "terms": h.len(),
        "groups": g.groups.len(),
        "sizes": g.groups.iter().map(Vec::len).collect::<Vec<_>>(),
        "S": norms.iter().map(|n| n.sum_sq).collect::<Vec<_>>(),
        "L1": norms.iter().map(|n| n.l1).collect::<Vec<_>>(),
    });
    emit(out, &g.to_json(), &summary)
}

pub fn repack(a: &RepackArgs) -> CliResult<()> {
    let h = read_hamiltonian(&a.ham)?;
    let base = match read_grouping(&a.grouping, &h)? {
        Loaded::Plain(g) => g,
        Loaded::Repacked(_) => {
            return Err(CliError::invalid("mode/grouping mismatch: input is already an overlapped grouping"))
        }
    };
    reject_violations("repacking needs a disjoint grouping", validate_grouping(&h, &base.groups, true)?)?;
    let base = Grouping::new(base.n_terms(), base.groups, true)?;
    let r = match (a.mode, &a.circuits) {
        (RepackMode::Posthoc, Some(p)) => {
            let circuits: Vec<CliffordCircuit> = serde_json::from_value(read_json(p)?)?;
            posthoc_repack(&h, &base, &circuits)?
        }
        (RepackMode::Posthoc, None) => posthoc_repack_synthesized(&h, &base)?,
        (RepackMode::Adhoc, Some(_)) => return Err(CliError::invalid("--circuits only applies to post-hoc mode")),
        (RepackMode::Adhoc, None) => adhoc_repack(&h, &base)?,
    };
    let mu = r.multiplicity();
    let base_members: usize = r.base.groups.iter().map(Vec::len).sum();
    let members: usize = r.groups.iter().map(Vec::len).sum();
    let summary = json!({
        "groups": r.groups.len(),
        "memberships": members,
        "added": members - base_members,
        "mean_multiplicity": mu.iter().sum::<usize>() as f64 / mu.len() as f64,
        "max_multiplicity": mu.iter().copied().max().unwrap_or(0),
    });
    emit(a.out.as_deref(), &r.to_json(), &summary)
}

fn load_state(spec: &StateSpec, n: usize) -> CliResult<StateVector64> {
    if n > MAX_QUBITS {
        return Err(CliError::invalid(format!("state vectors are capped at {MAX_QUBITS} qubits, Hamiltonian has {n}")));
    }
    Ok(match spec {
        StateSpec::Zero => StateVector::zero(n)?,
        StateSpec::Product(seed) => product_state_seeded(n, *seed)?,
        StateSpec::Witness => ising_witness_state(n)?,
        StateSpec::File(p) => {
            let s = StateVector64::from_json(&read_json(p)?)
                .map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?;
            if s.num_qubits() != n {
                return Err(CliError::invalid(format!(
                    "{}: state has {} qubits, Hamiltonian has {n}",
                    p.display(),
                    s.num_qubits()
                )));
            }
            s
        }
    })
}

fn build_moments(spec: &MomentsSpec, h: &Hamiltonian64, cover: &dyn Cover) -> CliResult<Box<dyn Moments<f64>>> {
    Ok(match spec {
        MomentsSpec::ZeroCov => Box::new(ZeroCovariance::<f64>::unit(h.len())) as Box<dyn Moments<f64>>,
        MomentsSpec::WorstCase => Box::new(WorstCase::new(&h.coefficients())),
        MomentsSpec::State(s) => Box::new(exact_moments_for_cover(&load_state(s, h.num_qubits())?, h, cover)?),
    })
}

/// Continuous allocation and, for `opt`, its KKT residual.
fn allocate(
    spec: AllocSpec,
    c: &[f64],
    loaded: &Loaded,
    moments: &dyn Moments<f64>,
    m_tot: f64,
) -> CliResult<(ShotAllocation64, Option<f64>)> {
    let cover = loaded.cover();
    Ok(match spec {
        AllocSpec::L1 => (alloc_l1(c, cover, m_tot)?, None),
        AllocSpec::L2 => (alloc_l2(c, cover, m_tot)?, None),
        AllocSpec::Uniform => (alloc_uniform(cover, m_tot)?, None),
        AllocSpec::Inherit => match loaded {
            Loaded::Repacked(r) => (alloc_l2(c, &r.base, m_tot)?, None),
            Loaded::Plain(_) => return Err(CliError::invalid("--alloc inherit needs a repacked grouping")),
        },
        AllocSpec::Opt => {
            let o = alloc_optimize(c, cover, moments, m_tot, &AllocOptions::default())?;
            (o.alloc, Some(o.kkt_residual))
        }
    })
}

pub fn variance(a: &VarianceArgs) -> CliResult<()> {
    if !(a.shots > 0.0 && a.shots.is_finite()) {
        return Err(CliError::invalid(format!("--shots must be positive, got {}", a.shots)));
    }
    let h = read_hamiltonian(&a.ham)?;
    let loaded = read_grouping(&a.grouping, &h)?;
    let cover = loaded.cover();
    let c = h.coefficients();
    let moments = build_moments(&a.moments, &h, cover)?;
    let (alloc, _) = allocate(a.alloc, &c, &loaded, moments.as_ref(), a.shots)?;
    let parts = match a.weights {
        WeightsSpec::Heuristic => shot_weighted_variance(&c, cover, &alloc, moments.as_ref())?,
        WeightsSpec::Optimal => {
            let w = optimal_weights(&c, cover, &alloc, moments.as_ref())?;
            estimator_variance(&c, cover, &w, &alloc, moments.as_ref())?
        }
    };
    let report = VarianceReport::new(&grouping_id(&a.grouping), &alloc, moments.flavor(), parts);
    write_json(a.out.as_deref(), &report)
}

#[derive(Serialize)]
struct EstimateRow {
    rep: usize,
    energy: f64,
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let h = read_hamiltonian(&a.ham)?;
    if a.reps < 2 {
        return Err(CliError::invalid("--reps must be at least 2"));
    }
    let state = load_state(&a.state, h.num_qubits())?;
    let loaded = read_grouping(&a.grouping, &h)?;
    let cover = loaded.cover();
    let c = h.coefficients();
    let moments = exact_moments_for_cover(&state, &h, cover)?;
    let (alloc, kkt) = allocate(a.alloc, &c, &loaded, &moments, 1.0)?;
    let shots = round_allocation(&alloc, a.shots)?;
    let (circuits, signs) = match &loaded {
        Loaded::Repacked(r) => (r.circuits.as_deref(), r.signs.as_deref()),
        Loaded::Plain(_) => (None, None),
    };
    let plan = MeasurementPlan::new(&state, &h, cover, circuits, signs, &shots)?;
    let estimates = plan.sample_energies(a.reps, a.seed)?;
    let exact: f64 = h.terms().iter().map(|t| state.expectation(&t.pauli).map(|e| t.coeff * e)).sum::<Result<f64>>()?;
    let summary = summarize(&estimates, exact, plan.analytic_variance(&moments)?);

    let rows: Vec<EstimateRow> = estimates.iter().enumerate().map(|(rep, &energy)| EstimateRow { rep, energy }).collect();
    write_csv(a.out.as_deref(), "simulate", &rows)?;
    let report = json!({
        "summary": summary,
        "allocation": AllocationReport::new(&alloc, Some(&shots), a.alloc.name(), moments.flavor(), kkt),
        "seed": a.seed,
    });
    let text = serde_json::to_string_pretty(&report)?;
    if a.out.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }

    if let Some(dir) = &a.raw_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let records = plan.sample_records(&mut split(a.seed, u64::MAX), true)?;
        for rec in &records {
            let path = dir.join(format!("group{}.bin", rec.group));
            let header = RawDumpHeader { n: h.num_qubits(), shots: rec.shots, group: rec.group, seed: a.seed };
            let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
            let raw = rec.raw.as_deref().unwrap_or_default();
            write_raw_dump(std::io::BufWriter::new(file), &header, raw)?;
        }
    }
    Ok(())
}

/// CSV by default; an `ExperimentReport` when `out` ends in `.json`.
fn write_rows<R: Serialize>(out: Option<&Path>, experiment: &str, parameters: serde_json::Value, rows: Vec<R>) -> CliResult<()> {
    match out {
        Some(p) if is_json(p) => {
            let mut params = parameters;
            params["invocation"] = json!(invocation());
            write_json(out, &ExperimentReport::new(experiment, params, rows))
        }
        _ => write_csv(out, experiment, &rows),
    }
}

pub fn theorem1(a: &Theorem1Args) -> CliResult<()> {
    if let Some(&l) = a.l_list.0.iter().find(|&&l| l < 2) {
        return Err(CliError::invalid(format!("L must be at least 2, got {l}")));
    }
    if let Some(dir) = &a.instances_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for &l in &a.l_list.0 {
            let inst = build_theorem1::<f64>(l, a.unit)?;
            let path = dir.join(format!("theorem1_L{l}.json"));
            write_json(Some(&path), &inst.to_json())?;
        }
    }
    let rows = theorem1_sweep(&a.l_list.0, a.unit, a.shots)?;
    write_rows(a.out.as_deref(), "theorem1", json!({"L": a.l_list.0, "unit": a.unit, "shots": a.shots}), rows)
}

pub fn appendix_a(a: &AppendixAArgs) -> CliResult<()> {
    let rows = a.n_list.0.par_iter().map(|&n| exp::appendix_a(n)).collect::<Result<Vec<_>>>()?;
    write_rows(a.out.as_deref(), "appendixA", json!({"n": a.n_list.0}), rows)
}

pub fn appendix_b(a: &AppendixBArgs) -> CliResult<()> {
    let p = AppendixBParams {
        c_a: a.c_a,
        c_b: a.c_b,
        c_c: a.c_c,
        m1: a.m1,
        m2: a.m2,
        var_a: a.var_a,
        var_b: a.var_b,
        var_c: a.var_c,
        cov_ab: a.cov_ab,
        cov_ac: a.cov_ac,
    };
    write_json(a.out.as_deref(), &exp::appendix_b(p)?)
}

pub fn hubbard(a: &HubbardArgs) -> CliResult<()> {
    if a.states < 2 {
        return Err(CliError::invalid("--states must be at least 2"));
    }
    let rows =
        a.n_list.0.par_iter().map(|&n| hubbard_split(n, a.t, a.v, a.states, a.seed)).collect::<Result<Vec<_>>>()?;
    let params = json!({"n": a.n_list.0, "states": a.states, "seed": a.seed, "t": a.t, "V": a.v});
    write_rows(a.out.as_deref(), "hubbard", params, rows)
}

pub fn random_scaling(a: &RandomScalingArgs) -> CliResult<()> {
    if let Some(&n) = a.n_list.0.iter().find(|&&n| n > MAX_SCALING_QUBITS) {
        return Err(CliError::invalid(format!("random scaling is capped at {MAX_SCALING_QUBITS} qubits, got {n}")));
    }
    let rows =
        a.n_list.0.par_iter().map(|&n| exp::random_scaling(n, a.density, a.seed)).collect::<Result<Vec<_>>>()?;
    let params = json!({"n": a.n_list.0, "density": a.density, "seed": a.seed});
    write_rows(a.out.as_deref(), "random_scaling", params, rows)
}
