use super::*;
use crate::algebra::{CyclicGroup, PrimeField};

fn cert(outcome: StrengthOutcome) -> StrengthCertificate {
    match outcome {
        StrengthOutcome::Certificate(c) => c,
        StrengthOutcome::Violation(w) => panic!("unexpected violation: {w}"),
    }
}

#[test]
fn strength_of_constant_tuples() {
    let arr = OrthogonalArray::new(3, 2, vec![vec![0, 0], vec![1, 1], vec![2, 2]]).unwrap();
    let c = cert(verify_strength(&arr, 1).unwrap());
    assert_eq!(c.d, 1);
    assert_eq!(c.lambda, 1);
}

#[test]
fn strength_of_three_sum_mod5() {
    let g = CyclicGroup::new(5).unwrap();
    let coll = gen_ksum(&g, 3, 0, 3).unwrap();
    let arr = coll.array(&[0, 1, 2]).unwrap();
    assert_eq!(arr.len(), 25);
    let c = cert(verify_strength(arr, 2).unwrap());
    assert_eq!(c.lambda, 1);
}

#[test]
fn strength_violation_witness_in_scan_order() {
    let arr = OrthogonalArray::new(2, 2, vec![vec![0, 0], vec![0, 1]]).unwrap();
    // Independent count: both rows start with symbol 0, so the first
    // pattern in scan order (D = {0}, y = (0)) already matches twice
    // instead of the expected lambda = |rows| / q = 1.
    match verify_strength(&arr, 1).unwrap() {
        StrengthOutcome::Violation(w) => {
            assert_eq!(w.positions, vec![0]);
            assert_eq!(w.pattern, vec![0]);
            assert_eq!(w.count, 2);
            assert_eq!(w.expected, 1);
        }
        StrengthOutcome::Certificate(_) => panic!("expected a violation"),
    }
}

#[test]
fn strength_rejects_nondivisible_row_count() {
    let arr = OrthogonalArray::new(2, 2, vec![vec![0, 0], vec![0, 1], vec![1, 0]]).unwrap();
    assert!(verify_strength(&arr, 1).is_err());
}

#[test]
fn linearity_of_sum_kernel_and_polynomials() {
    let f5 = PrimeField::new(5).unwrap();
    let g5 = CyclicGroup::new(5).unwrap();
    let zero_sum = gen_ksum(&g5, 3, 0, 3).unwrap();
    assert!(verify_linear(zero_sum.array(&[0, 1, 2]).unwrap(), &f5).unwrap());

    let one_sum = gen_ksum(&g5, 3, 1, 3).unwrap();
    assert!(!verify_linear(one_sum.array(&[0, 1, 2]).unwrap(), &f5).unwrap());

    let degree = gen_ddegree(&f5, 1, 3, 5).unwrap();
    assert!(verify_linear(degree.array(&[0, 1, 2]).unwrap(), &f5).unwrap());
}

#[test]
fn ksum_examples() {
    let g4 = CyclicGroup::new(4).unwrap();
    let coll = gen_ksum(&g4, 2, 0, 3).unwrap();
    assert_eq!(coll.arrays().len(), 3);
    for arr in coll.arrays().values() {
        assert_eq!(arr.len(), 4);
        assert!(arr.contains(&[1, 3]));
    }

    // k = 1 is unordered search: every array is the singleton {t}.
    let g7 = CyclicGroup::new(7).unwrap();
    let search = gen_ksum(&g7, 1, 3, 4).unwrap();
    assert_eq!(search.arrays().len(), 4);
    for arr in search.arrays().values() {
        assert_eq!(arr.rows(), &[vec![3]]);
    }
}

#[test]
fn kdist_examples() {
    let coll = gen_kdist(3, 2, 3).unwrap();
    for arr in coll.arrays().values() {
        assert_eq!(arr.rows(), &[vec![0, 0], vec![1, 1], vec![2, 2]]);
    }
    let single = gen_kdist(2, 3, 3).unwrap();
    assert_eq!(single.arrays().len(), 1);
    assert_eq!(
        single.array(&[0, 1, 2]).unwrap().rows(),
        &[vec![0, 0, 0], vec![1, 1, 1]]
    );
}

#[test]
fn ddegree_examples() {
    let f5 = PrimeField::new(5).unwrap();
    let constants = gen_ddegree(&f5, 0, 2, 4).unwrap();
    let kdist = gen_kdist(5, 2, 4).unwrap();
    for (s, arr) in constants.arrays() {
        assert_eq!(arr.rows(), kdist.array(s).unwrap().rows());
    }

    let lines = gen_ddegree(&f5, 1, 3, 5).unwrap();
    // The identity polynomial evaluated at S = {0, 1, 2}.
    assert!(lines.array(&[0, 1, 2]).unwrap().contains(&[0, 1, 2]));

    let f7 = PrimeField::new(7).unwrap();
    let coll = gen_ddegree(&f7, 1, 3, 5).unwrap();
    assert_eq!(coll.d(), 2);
    for arr in coll.arrays().values() {
        let c = cert(verify_strength(arr, 2).unwrap());
        assert_eq!(c.lambda, 1);
    }
}

#[test]
fn ddegree_rejects_small_field() {
    let f3 = PrimeField::new(3).unwrap();
    assert!(gen_ddegree(&f3, 0, 2, 4).is_err());
}

#[test]
fn generated_collections_are_consistent() {
    let g = CyclicGroup::new(4).unwrap();
    assert!(check_consistency(&gen_ksum(&g, 2, 0, 4).unwrap()).is_consistent());
    assert!(check_consistency(&gen_kdist(3, 2, 4).unwrap()).is_consistent());
    let f7 = PrimeField::new(7).unwrap();
    assert!(check_consistency(&gen_ddegree(&f7, 1, 3, 5).unwrap()).is_consistent());
}

#[test]
fn rank_indexed_degree_collection_is_inconsistent() {
    // Linear polynomials evaluated at ranks: subsets whose shared elements
    // sit at differently spaced ranks disagree on extrapolated positions.
    let f7 = PrimeField::new(7).unwrap();
    let coll = gen_ddegree_rank_indexed(&f7, 1, 4, 5).unwrap();
    match check_consistency(&coll) {
        ConsistencyOutcome::Witness(w) => {
            assert_ne!(w.s1, w.s2);
            assert_eq!(w.positions.len(), coll.d());
            // The witness rows genuinely disagree on some shared element.
            let shared: Vec<usize> = w
                .s1
                .iter()
                .copied()
                .filter(|e| w.s2.contains(e))
                .collect();
            assert!(shared.iter().any(|e| {
                let l1 = w.s1.iter().position(|x| x == e).unwrap();
                let l2 = w.s2.iter().position(|x| x == e).unwrap();
                w.row1[l1] != w.row2[l2]
            }));
        }
        ConsistencyOutcome::Consistent => panic!("expected an inconsistency witness"),
    }
}

#[test]
fn pattern_collections() {
    // Consistent patterns from one global string.
    let coll = gen_pattern_from_global(4, 2, 3, &[0, 1, 2, 0]).unwrap();
    assert!(check_consistency(&coll).is_consistent());

    // Graph-collision encoding over the path 0-1-2: edges carry (1, 1),
    // non-edges the all-dummy tuple. A valid collection, but inconsistent.
    let q = 3u32;
    let dummy = q as u16;
    let mut patterns = BTreeMap::new();
    patterns.insert(vec![0, 1], vec![1, 1]);
    patterns.insert(vec![1, 2], vec![1, 1]);
    patterns.insert(vec![0, 2], vec![dummy, dummy]);
    let gc = gen_pattern(3, 2, q, &patterns).unwrap();
    assert_eq!(gc.d(), 0);
    assert!(!check_consistency(&gc).is_consistent());

    // f fires only on inputs matching an edge pattern.
    let inst = ProblemInstance::new(gc);
    let (v, w) = inst.evaluate(&[1, 1, 0]).unwrap();
    assert!(v);
    assert_eq!(w, vec![vec![0, 1]]);
    let (v, w) = inst.evaluate(&[1, 0, 1]).unwrap();
    assert!(!v);
    assert!(w.is_empty());
}

#[test]
fn single_pattern_problem() {
    let mut patterns = BTreeMap::new();
    patterns.insert(vec![0, 1], vec![0, 1]);
    let coll = gen_pattern(2, 2, 3, &patterns).unwrap();
    let inst = ProblemInstance::new(coll);
    assert!(inst.evaluate(&[0, 1]).unwrap().0);
    assert!(!inst.evaluate(&[1, 0]).unwrap().0);
    assert!(!inst.evaluate(&[0, 0]).unwrap().0);
}

#[test]
fn mixed_dummy_pattern_rejected() {
    let mut patterns = BTreeMap::new();
    patterns.insert(vec![0, 1], vec![0, 3]); // dummy = 3 mixed with real 0
    assert!(gen_pattern(2, 2, 3, &patterns).is_err());
}

#[test]
fn evaluate_examples() {
    let dist = ProblemInstance::new(gen_kdist(4, 2, 3).unwrap());
    let (v, w) = dist.evaluate(&[0, 1, 0]).unwrap();
    assert!(v);
    assert_eq!(w, vec![vec![0, 2]]);

    let g4 = CyclicGroup::new(4).unwrap();
    let sum = ProblemInstance::new(gen_ksum(&g4, 2, 0, 3).unwrap());
    let (v, w) = sum.evaluate(&[1, 2, 2]).unwrap();
    assert!(v);
    assert_eq!(w, vec![vec![1, 2]]); // 2 + 2 = 4 = 0 mod 4

    let (v, w) = dist.evaluate(&[0, 1, 2]).unwrap();
    assert!(!v);
    assert!(w.is_empty());
}

#[test]
fn evaluate_rejects_out_of_range_symbols() {
    let dist = ProblemInstance::new(gen_kdist(4, 2, 3).unwrap());
    assert!(dist.evaluate(&[0, 1, 4]).is_err()); // 4 is the dummy
    assert!(dist.evaluate(&[0, 1]).is_err()); // wrong length
}

#[test]
fn census_two_distinctness() {
    let inst = ProblemInstance::new(gen_kdist(4, 2, 2).unwrap());
    let c = inst.valid_column_census(1 << 20).unwrap();
    assert_eq!(c.valid, 12); // 16 inputs, 4 diagonal ones invalid
    assert_eq!(c.total, 16);
    assert!((c.fraction - 0.75).abs() < 1e-15);
}

#[test]
fn census_unordered_search() {
    let g4 = CyclicGroup::new(4).unwrap();
    let inst = ProblemInstance::new(gen_ksum(&g4, 1, 0, 2).unwrap());
    let c = inst.valid_column_census(1 << 20).unwrap();
    assert_eq!(c.valid, 9); // inputs avoiding symbol 0
}

#[test]
fn census_respects_union_bound() {
    let g16 = CyclicGroup::new(16).unwrap();
    let f7 = PrimeField::new(7).unwrap();
    let instances = vec![
        ProblemInstance::new(gen_kdist(9, 2, 3).unwrap()),
        ProblemInstance::new(gen_ksum(&g16, 2, 0, 4).unwrap()),
        ProblemInstance::new(gen_ddegree(&f7, 0, 2, 3).unwrap()),
    ];
    for inst in instances {
        let c = inst.valid_column_census(1 << 24).unwrap();
        assert!(c.fraction >= inst.valid_fraction_floor() - 1e-12);
    }
}

#[test]
fn census_cap_enforced() {
    let inst = ProblemInstance::new(gen_kdist(9, 2, 3).unwrap());
    assert!(inst.valid_column_census(10).is_err());
}

#[test]
fn collection_rejects_higher_index() {
    // All of [2]^2 is a strength-1 array of index 2.
    let arr = OrthogonalArray::new(
        2,
        2,
        vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
    )
    .unwrap();
    let c = cert(verify_strength(&arr, 1).unwrap());
    assert_eq!(c.lambda, 2);
    let mut arrays = BTreeMap::new();
    arrays.insert(vec![0, 1], arr);
    assert!(OACollection::new(2, 2, 2, 1, arrays).is_err());
}

#[test]
fn collection_rejects_missing_subset() {
    let arr = OrthogonalArray::new(3, 2, vec![vec![0, 0], vec![1, 1], vec![2, 2]]).unwrap();
    let mut arrays = BTreeMap::new();
    arrays.insert(vec![0, 1], arr);
    assert!(OACollection::new(3, 3, 2, 1, arrays).is_err());
}
