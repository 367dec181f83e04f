mod common;

use netclear::clearing::{ClearingProblem, Selection};

#[test]
fn solver_matches_enumeration_on_small_networks() {
    let mut rng = common::rng(7);
    let mut multiple = 0;
    for case in 0..600 {
        let n = 1 + case % 4;
        let inst = common::random_instance(&mut rng, n);
        let (top, bottom) = common::brute_force_extremes(&inst);
        if top != bottom {
            multiple += 1;
        }
        for (sel, want) in [(Selection::Greatest, &top), (Selection::Least, &bottom)] {
            let sol = ClearingProblem::new(&inst.net, inst.costs, sel).solve(&inst.e).unwrap();
            for (got, w) in sol.values.iter().zip(want.iter()) {
                assert!((got - w).abs() < 1e-9, "case {case} {sel:?}: {:?} vs {:?}", sol.values, want);
            }
        }
    }
    // the sample must exercise genuine multiplicity
    assert!(multiple > 10, "only {multiple} instances with several equilibria");
}
