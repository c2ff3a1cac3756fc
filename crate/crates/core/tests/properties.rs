use overgroup::allocation::AllocationReport;
use overgroup::repacking::posthoc_repack_synthesized;
use overgroup::*;
use proptest::prelude::*;

fn hamiltonian_strategy() -> impl Strategy<Value = Hamiltonian64> {
    (2usize..5, 1usize..1000, 0.1f64..0.6).prop_map(|(n, seed, density)| gen_random(n, density, seed as u64).unwrap())
}

fn moments_for(h: &Hamiltonian64, seed: u64) -> ZeroCovariance<f64> {
    let ps = ProductState::<f64>::random(h.num_qubits(), seed).unwrap();
    ZeroCovariance::new(h.terms().iter().map(|t| 1.0 - ps.expectation(&t.pauli).unwrap().powi(2)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sorted_insertion_is_a_valid_partition(h in hamiltonian_strategy()) {
        let g = sorted_insertion(&h);
        prop_assert!(validate_grouping(&h, &g.groups, true).unwrap().is_empty());
        let first: Vec<usize> = g.groups.iter().map(|grp| grp[0]).collect();
        // group leaders appear in descending |c|
        prop_assert!(first.windows(2).all(|w| h.coefficient(w[0]).abs() >= h.coefficient(w[1]).abs()));
    }

    #[test]
    fn repackings_refine_and_never_hurt(h in hamiltonian_strategy(), seed in any::<u64>()) {
        let c = h.coefficients();
        let base = sorted_insertion(&h);
        let moments = moments_for(&h, seed);
        let alloc = alloc_l2(&c, &base, 1000.0).unwrap();
        let v0 = shot_weighted_variance(&c, &base, &alloc, &moments).unwrap().total;
        let post = posthoc_repack_synthesized(&h, &base).unwrap();
        let ad = adhoc_repack(&h, &base).unwrap();
        for r in [&post, &ad] {
            prop_assert!(validate_grouping(&h, &r.groups, false).unwrap().is_empty());
            prop_assert!(is_refinement(&base.groups, &r.groups).unwrap());
            let v = shot_weighted_variance(&c, r, &alloc, &moments).unwrap().total;
            prop_assert!(v <= v0 * (1.0 + 1e-12));
        }
        prop_assert!(is_maximal(&h, &ad.groups));
        prop_assert!(is_refinement(&post.groups, &complete_to_maximal(&h, &post).groups).unwrap());
    }

    #[test]
    fn posthoc_signs_agree_with_circuits(h in hamiltonian_strategy()) {
        let base = sorted_insertion(&h);
        let post = posthoc_repack_synthesized(&h, &base).unwrap();
        let circuits = post.circuits.as_ref().unwrap();
        let signs = post.signs.as_ref().unwrap();
        for (j, g) in post.groups.iter().enumerate() {
            for (p, &i) in g.iter().enumerate() {
                let img = circuits[j].conjugate(h.pauli(i)).unwrap();
                prop_assert!(img.pauli.is_z_diagonal());
                prop_assert_eq!(img.sign, signs[j][p]);
            }
        }
    }

    #[test]
    fn weights_are_unbiased(h in hamiltonian_strategy(), raw in proptest::collection::vec(0.1f64..10.0, 64)) {
        let base = sorted_insertion(&h);
        let r = adhoc_repack(&h, &base).unwrap();
        let alloc = ShotAllocation::new(raw.iter().cycle().take(r.groups.len()).copied().collect()).unwrap();
        let w = heuristic_weights(&r, &alloc).unwrap();
        for i in 0..h.len() {
            let s: f64 = w.weights_of(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rounding_preserves_total(raw in proptest::collection::vec(0.01f64..5.0, 1..12), total in 12u64..5000) {
        let a = ShotAllocation::new(raw).unwrap();
        let r = round_allocation(&a, total).unwrap();
        prop_assert_eq!(r.total(), total);
        prop_assert!(r.shots().iter().all(|&m| m >= 1));
    }

    #[test]
    fn optimizer_beats_fixed_rules(h in hamiltonian_strategy(), seed in any::<u64>()) {
        let c = h.coefficients();
        let r = adhoc_repack(&h, &sorted_insertion(&h)).unwrap();
        let m = moments_for(&h, seed);
        let opt = alloc_optimize(&c, &r, &m, 1.0, &AllocOptions::default()).unwrap();
        for a in [alloc_l1(&c, &r, 1.0).unwrap(), alloc_l2(&c, &r, 1.0).unwrap(), alloc_uniform(&r, 1.0).unwrap()] {
            let v = shot_weighted_variance(&c, &r, &a, &m).unwrap().total;
            prop_assert!(opt.variance <= v * (1.0 + 1e-9));
        }
        prop_assert!((opt.alloc.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hamiltonian_text_round_trip(h in hamiltonian_strategy()) {
        let back: Hamiltonian64 = parse_hamiltonian(&write_hamiltonian(&h)).unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn f32_and_f64_agree(h in hamiltonian_strategy()) {
        let c64 = h.coefficients();
        let h32: Hamiltonian32 = parse_hamiltonian(&write_hamiltonian(&h)).unwrap();
        let c32 = h32.coefficients();
        let g = sorted_insertion(&h);
        let v64 = min_variance_disjoint(&c64, &g, 1.0);
        let v32 = min_variance_disjoint(&c32, &g, 1.0f32);
        prop_assert!(((v32 as f64) - v64).abs() <= 1e-4 * v64);
    }
}

#[test]
fn allocation_report_serializes() {
    let h: Hamiltonian64 = Hamiltonian::from_pairs(&[(1.0, "ZI"), (0.5, "ZZ"), (0.3, "XX")]).unwrap();
    let c = h.coefficients();
    let g = sorted_insertion(&h);
    let a = alloc_l2(&c, &g, 100.0).unwrap();
    let int = round_allocation(&a, 100).unwrap();
    let rep = AllocationReport::new(&a, Some(&int), "l2", MomentsFlavor::ZeroCovariance, None::<f64>);
    let j = serde_json::to_value(&rep).unwrap();
    assert_eq!(j["method"], "l2");
    assert_eq!(j["integer"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum::<u64>(), 100);
}
