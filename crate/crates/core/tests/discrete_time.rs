use proptest::prelude::*;
use randtime_core::discrete_time::*;
use randtime_core::RngStream;

fn coin_flip() -> FiniteTree {
    FiniteTree::new(
        1,
        vec![vec![0, 0], vec![0, 1]],
        vec![vec![], vec![0, 0]],
        vec![0.5, 0.5],
        vec![vec![0.0], vec![1.0, -1.0]],
    )
    .unwrap()
}

/// Two-period binomial walk with p(up) = 0.6.
fn binomial2() -> FiniteTree {
    let p = [0.36, 0.24, 0.24, 0.16];
    FiniteTree::new(
        2,
        vec![vec![0; 4], vec![0, 0, 1, 1], vec![0, 1, 2, 3]],
        vec![vec![], vec![0, 0], vec![0, 0, 1, 1]],
        p.to_vec(),
        vec![vec![0.0], vec![1.0, -1.0], vec![2.0, 0.0, 0.0, -2.0]],
    )
    .unwrap()
}

/// P[ρ > t | cell] by brute force: compare every outcome's cell id directly.
fn brute_z(tree: &FiniteTree, rho: &RandomTimeSpec, t: usize, w0: usize) -> f64 {
    let m = tree.n_outcomes();
    let same = |w: usize| tree.cells[t][w] == tree.cells[t][w0];
    let num: f64 = (0..m).filter(|&w| same(w) && rho.rho[w] > t).map(|w| tree.p[w]).sum();
    let den: f64 = (0..m).filter(|&w| same(w)).map(|w| tree.p[w]).sum();
    num / den
}

#[test]
fn coin_flip_rho_one() {
    let tree = coin_flip();
    let rho = RandomTimeSpec { rho: vec![1, 1] };
    let laws = conditional_laws(&tree, &rho).unwrap();
    assert_eq!(laws.z[0][0], 1.0);
    assert_eq!(laws.a[1], vec![1.0, 1.0]);
}

#[test]
fn stopping_time_has_trivial_pair() {
    let tree = binomial2();
    // τ = 1 on the up branch, 2 otherwise.
    let rho = RandomTimeSpec { rho: vec![1, 1, 2, 2] };
    let pair = canonical_pair(&tree, &rho).unwrap();
    for w in 0..4 {
        for t in 0..=2 {
            let c = tree.cell_of(t, w);
            let tau = rho.rho[w];
            assert_eq!(pair.z[t][c], if tau > t { 1.0 } else { 0.0 });
            assert_eq!(pair.a[t][c], if tau <= t { 1.0 } else { 0.0 });
            assert_eq!(pair.k[t][c], if t >= tau { 1.0 } else { 0.0 });
            assert_eq!(pair.l[t][c], 1.0);
        }
    }
    assert_eq!(q_measure(&tree, &pair), tree.p);
}

#[test]
fn deterministic_time() {
    let tree = binomial2();
    let rho = RandomTimeSpec { rho: vec![1; 4] };
    let pair = canonical_pair(&tree, &rho).unwrap();
    assert_eq!(pair.k[0][0], 0.0);
    assert!(pair.k[1].iter().all(|&k| k == 1.0));
    assert!(pair.l.iter().flatten().all(|&l| l == 1.0));
}

#[test]
fn binomial_last_max_matches_enumeration() {
    let tree = binomial2();
    // Last time of the maximum of X.
    let rho = RandomTimeSpec { rho: vec![2, 1, 2, 0] };
    let pair = canonical_pair(&tree, &rho).unwrap();
    for w in 0..4 {
        for t in 0..=2 {
            let c = tree.cell_of(t, w);
            assert!((pair.z[t][c] - brute_z(&tree, &rho, t, w)).abs() < 1e-15);
        }
    }
    // Hand values: Z_0 = P[ρ > 0] = 0.84, Z_1 on the up cell = 0.36/0.6.
    assert!((pair.z[0][0] - 0.84).abs() < 1e-15);
    assert!((pair.z[1][0] - 0.6).abs() < 1e-15);
    assert!(pair_identity_residual(&tree, &pair) < 1e-15);
}

#[test]
fn constant_v_gives_one() {
    let tree = binomial2();
    let rho = RandomTimeSpec { rho: vec![2, 1, 2, 0] };
    let pair = canonical_pair(&tree, &rho).unwrap();
    let ones: Vec<Vec<f64>> = tree.zeros().into_iter().map(|r| vec![1.0; r.len()]).collect();
    assert!(verify_pair_identity(&tree, &rho, &pair, &ones).unwrap() < 1e-15);
    assert!((expectation_via_qu(&tree, &pair, &ones).unwrap() - 1.0).abs() < 1e-15);
    let s = pair.l.clone();
    let rep = numeraire_check(&tree, &rho, &pair, &s).unwrap();
    assert!((rep.value - 1.0).abs() < 1e-15);
    assert_eq!(rep.prob_l_positive, 1.0);
}

#[test]
fn rejects_bad_trees() {
    // Probabilities not summing to one.
    assert!(FiniteTree::new(0, vec![vec![0, 0]], vec![vec![]], vec![0.5, 0.4], vec![vec![0.0]])
        .is_err());
    // Empty cell.
    assert!(FiniteTree::new(0, vec![vec![0, 0]], vec![vec![]], vec![0.5, 0.5], vec![vec![0.0, 1.0]])
        .is_err());
    // Non-refining partition.
    assert!(FiniteTree::new(
        1,
        vec![vec![0, 1], vec![0, 0]],
        vec![vec![], vec![0]],
        vec![0.5, 0.5],
        vec![vec![0.0, 1.0], vec![0.0]],
    )
    .is_err());
    assert!(FiniteTree::from_json("{\"horizon\": 1}").is_err());
}

#[test]
fn json_round_trip() {
    let tree = binomial2();
    let text = serde_json::to_string(&tree).unwrap();
    assert!(text.contains("\"X\""));
    let back = FiniteTree::from_json(&text).unwrap();
    assert_eq!(back, tree);
}

#[test]
fn shipped_corpus_is_reproducible() {
    let shipped = shipped_corpus().unwrap();
    let fresh = generate_corpus(CORPUS_SEED, CORPUS_SIZE);
    assert_eq!(shipped.entries.len(), CORPUS_SIZE);
    assert_eq!(shipped, fresh);
    for e in &shipped.entries {
        assert!(e.tree.horizon <= 5);
        assert!(e.tree.p.iter().all(|&p| p >= 1e-3));
    }
}

#[test]
fn corpus_conditional_laws_match_brute_force() {
    for e in shipped_corpus().unwrap().entries.iter().take(60) {
        let pair = canonical_pair(&e.tree, &e.rho).unwrap();
        for w in 0..e.tree.n_outcomes() {
            for t in 0..=e.tree.horizon {
                let c = e.tree.cell_of(t, w);
                assert!((pair.z[t][c] - brute_z(&e.tree, &e.rho, t, w)).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn support_conditions_hold_pathwise() {
    for e in shipped_corpus().unwrap().entries {
        let pair = canonical_pair(&e.tree, &e.rho).unwrap();
        let (a, b) = pathwise_support_checks(&e.tree, &pair);
        assert!(a <= 1e-12 && b <= 1e-12, "tree {}: {a} {b}", e.id);
    }
}

#[test]
fn perturbed_pair_breaks_identity() {
    let corpus = shipped_corpus().unwrap();
    let mut broken = 0;
    let mut tried = 0;
    for e in corpus.entries.iter().filter(|e| e.tree.horizon >= 2).take(40) {
        let pair = canonical_pair(&e.tree, &e.rho).unwrap();
        // Perturb K at the first node where it is strictly inside (0, 1).
        let Some((t, c)) = (0..=e.tree.horizon)
            .flat_map(|t| (0..e.tree.n_cells(t)).map(move |c| (t, c)))
            .find(|&(t, c)| pair.k[t][c] > 0.0 && pair.k[t][c] < 1.0)
        else {
            continue;
        };
        tried += 1;
        let mut bad = pair.clone();
        bad.k[t][c] = 0.5 * pair.k[t][c];
        let mut v = e.tree.zeros();
        v[t][c] = 1.0;
        if verify_pair_identity(&e.tree, &e.rho, &bad, &v).unwrap() > 1e-6 {
            broken += 1;
        }
    }
    assert!(tried > 10);
    assert_eq!(broken, tried);
}

#[test]
fn stopping_time_enumeration_count() {
    // Full binary tree of horizon 3: f(d) = 1 + f(d-1)^2 with f(0) = 2.
    let mut rng = RngStream::new(1, 0);
    let tree = generate::binary_full(3, &mut rng);
    assert_eq!(enumerate_stopping_times(&tree).unwrap().len(), 677);
}

mod generate {
    use super::*;

    pub fn binary_full(horizon: usize, rng: &mut RngStream) -> FiniteTree {
        let m = 1usize << horizon;
        let cells: Vec<Vec<usize>> = (0..=horizon).map(|t| (0..m).map(|w| w >> (horizon - t)).collect()).collect();
        let refinement: Vec<Vec<usize>> = (0..=horizon)
            .map(|t| if t == 0 { vec![] } else { (0..1usize << t).map(|c| c >> 1).collect() })
            .collect();
        let raw: Vec<f64> = (0..m).map(|_| 1.0 + rng.uniform()).collect();
        let s: f64 = raw.iter().sum();
        let p = raw.iter().map(|v| v / s).collect();
        let x = (0..=horizon).map(|t| (0..1usize << t).map(|c| c as f64).collect()).collect();
        FiniteTree::new(horizon, cells, refinement, p, x).unwrap()
    }
}

#[test]
fn avoidance_on_small_trees_is_exhaustive() {
    // All binary trees with T ≤ 3 built from a small set of conditional
    // probabilities, every kind of random time.
    let probs = [0.5, 0.25, 0.75];
    let mut checked = 0;
    for horizon in 1..=3 {
        for (i, &pu) in probs.iter().enumerate() {
            let m = 1usize << horizon;
            let cells: Vec<Vec<usize>> =
                (0..=horizon).map(|t| (0..m).map(|w| w >> (horizon - t)).collect()).collect();
            let refinement: Vec<Vec<usize>> = (0..=horizon)
                .map(|t| if t == 0 { vec![] } else { (0..1usize << t).map(|c| c >> 1).collect() })
                .collect();
            let p: Vec<f64> = (0..m)
                .map(|w| {
                    (0..horizon)
                        .map(|b| if (w >> b) & 1 == 0 { pu } else { 1.0 - pu })
                        .product()
                })
                .collect();
            let x: Vec<Vec<f64>> = (0..=horizon)
                .map(|t| (0..1usize << t).map(|c| 2.0 * c.count_ones() as f64 - t as f64).collect())
                .collect();
            let tree = FiniteTree::new(horizon, cells, refinement, p, x).unwrap();
            let mut rng = RngStream::new(11, i as u64);
            for kind in RhoKind::ALL {
                let rho = random_time(&tree, kind, &mut rng);
                let pair = canonical_pair(&tree, &rho).unwrap();
                let rep = avoidance_equivalences(&tree, &rho, &pair).unwrap();
                assert_eq!(rep.method, "enumeration");
                assert!(rep.equivalences_hold());
                // A finite time set always admits a stopping time charged by ρ.
                assert!(!rep.avoids_stopping_times);
                assert!(rep.uniform_gap > 0.0);
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 36);
}

#[test]
fn stopping_time_fails_all_three_conditions() {
    let tree = binomial2();
    let rho = RandomTimeSpec { rho: vec![1, 1, 2, 2] };
    let pair = canonical_pair(&tree, &rho).unwrap();
    let rep = avoidance_equivalences(&tree, &rho, &pair).unwrap();
    assert!(!rep.avoids_stopping_times && !rep.delta_k_zero && !rep.delta_k_rho_zero);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pair_invariants_on_random_trees(seed in any::<u64>(), kind in 0usize..4) {
        let mut rng = RngStream::new(seed, 0);
        let tree = random_tree(&mut rng, 5, 3);
        let rho = random_time(&tree, RhoKind::ALL[kind], &mut rng);
        let pair = canonical_pair(&tree, &rho).unwrap();
        prop_assert!(pair_identity_residual(&tree, &pair) <= 1e-12);
        prop_assert!(martingale_residual(&tree, &pair) <= 1e-12);
        for t in 0..=tree.horizon {
            for c in 0..tree.n_cells(t) {
                let k = pair.k[t][c];
                prop_assert!((0.0..=1.0).contains(&k));
                prop_assert!(pair.l[t][c] >= 0.0);
                if let Some(par) = tree.parent(t, c) {
                    prop_assert!(k >= pair.k[t - 1][par]);
                }
            }
        }
        let q = q_measure(&tree, &pair);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let v = random_adapted(&tree, &mut rng);
        prop_assert!(verify_pair_identity(&tree, &rho, &pair, &v).unwrap() <= 1e-12);
        let lhs = lhs_expectation(&tree, &rho, &v);
        prop_assert!((expectation_via_qu(&tree, &pair, &v).unwrap() - lhs).abs() <= 1e-12);
    }
}
