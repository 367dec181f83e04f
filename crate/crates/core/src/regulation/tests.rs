use proptest::prelude::*;

use super::*;
use crate::network::Network;
use crate::network::{build_core_periphery, CorePeripherySpec, NestedSplitSpec, TierSpec};
use crate::returns::MCorrelationSpec;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// n_c = 3, m = 2, k^R = k^r = 1.
fn three() -> CPParams {
    CPParams { n_c: 3, n_p: 0, d: 0.15, d0: 1.0, theta: 0.99, r_high: 1.28, r: 0.2, chi: 3.0, m: 2 }
}

fn cp_like(n_c: usize, theta: f64, chi: f64) -> CPParams {
    CPParams { n_c, n_p: 0, d: 0.1, d0: 1.0, theta, r_high: 1.19, r: 0.15, chi, m: 2 }
}

#[test]
fn policy_json_round_trip_and_validation() {
    let mut p = Policy::with_caps(vec![1.0, 0.5, 0.0]);
    p.bailout = Bailout { members: vec![2], costs: vec![0.3] };
    assert_eq!(Policy::from_json(&p.to_json()).unwrap(), p);
    let parsed = Policy::from_json(r#"{"caps": [1.0, 0.25]}"#).unwrap();
    assert!(parsed.bailout.members.is_empty());
    assert!(p.validate(3).is_ok());
    assert!(p.validate(2).is_err());
    assert!(Policy::with_caps(vec![1.2]).validate(1).is_err());
    let mut dup = Policy::laissez_faire(2);
    dup.bailout = Bailout { members: vec![1, 1], costs: vec![0.0, 0.0] };
    assert!(dup.validate(2).is_err());
    let mut neg = Policy::laissez_faire(2);
    neg.bailout = Bailout { members: vec![1], costs: vec![-1.0] };
    assert!(neg.validate(2).is_err());
    assert!(matches!(Policy::from_json("{\"caps\": [1,\n }"), Err(RegulationError::Parse { line: 2, .. })));
}

#[test]
fn floor_arithmetic() {
    let p = CPParams { r_high: 1.0 + 2.5 * 0.2, d: 0.2, n_c: 6, chi: 10.0, ..three() };
    assert_eq!(p.k_risky(), 2);
    let exact = CPParams { r_high: 1.0 + 2.0 * 0.1, d: 0.1, ..p };
    assert_eq!(exact.k_risky(), 2);
    assert_eq!(three().k_safe(), 1);
}

#[test]
fn params_validation() {
    assert!(three().validate().is_ok());
    assert!(CPParams { theta: 0.9, ..three() }.validate().is_err()); // theta R < 1 + r
    assert!(CPParams { r_high: 2.0, ..three() }.validate().is_err()); // R >= D_0 + (n_c-1)D
    assert!(CPParams { chi: 1.0, ..three() }.validate().is_err()); // recovery
    assert!(CPParams { m: 4, ..three() }.validate().is_err());
    assert!(matches!(cp_thresholds(&CPParams { m: 0, ..three() }), Err(RegulationError::InvalidParams(_))));
}

#[test]
fn induced_profiles_sit_at_the_caps() {
    let p = three();
    let game = cp_game(&p).unwrap();
    let StrategySpace::RiskyShareGrid { grid, .. } = &game.spaces[0] else { unreachable!() };
    let top = grid.len() - 1;
    assert_eq!(induced_profile(&Policy::laissez_faire(3), &game).unwrap(), vec![top; 3]);
    let sym = cp_policy(&p, Regime::SymmetricCap);
    let prof = induced_profile(&sym, &game).unwrap();
    assert!(prof.iter().all(|&s| close(grid[s], 1.0 - p.d0 / p.gross(), 1e-12)));
    assert_eq!(induced_profile(&Policy::with_caps(vec![0.0; 3]), &game).unwrap(), vec![0; 3]);
    let asym = cp_policy(&p, Regime::AsymmetricCap { free: 1 });
    let prof = induced_profile(&asym, &game).unwrap();
    assert_eq!(prof[0], top);
    assert!(close(grid[prof[1]], p.cap_surviving(1), 1e-12));
    let off_grid = Policy::with_caps(vec![0.123; 3]);
    assert!(matches!(induced_profile(&off_grid, &game), Err(RegulationError::InvalidPolicy(_))));
}

#[test]
fn cap_that_is_not_a_best_response_is_reported() {
    // The risky asset has a lower mean than the safe one, so a bank
    // allowed to go fully risky prefers not to.
    let net = Network::new(1, vec![0.0, 0.5, 0.0, 0.0]).unwrap();
    let sc = ScenarioSet::independent_two_point(1, 0.5, 1.2, 0.0).unwrap().with_safe_asset(1.0);
    let game = GameSpec::new(
        net,
        sc,
        BankruptcyCostSpec::new(0.0, 0.1).unwrap(),
        Selection::Greatest,
        vec![StrategySpace::risky_share_grid(5, 0, 1, &[])],
    )
    .unwrap();
    match induced_profile(&Policy::laissez_faire(1), &game) {
        Err(RegulationError::CapNotBestResponse { bank: 0, cap, best }) => {
            assert_eq!(cap, 1.0);
            assert!(best < 1.0);
        }
        other => panic!("expected CapNotBestResponse, got {other:?}"),
    }
}

#[test]
fn symmetric_cap_welfare_per_bank() {
    let p = three();
    let game = cp_game(&p).unwrap();
    let out = policy_welfare(&cp_policy(&p, Regime::SymmetricCap), &game).unwrap();
    let tr = p.theta * p.r_high;
    let per_bank = tr - p.d0 / p.gross() * (tr - p.gross());
    assert!(close(out.welfare, 3.0 * per_bank, 1e-12));
    assert_eq!(out.expected_defaults, 0.0);
}

#[test]
fn worked_example_surplus() {
    let p = three();
    let game = cp_game(&p).unwrap();
    let out = policy_welfare(&cp_safe_core_policy(&p, 1), &game).unwrap();
    let expected = 2.0 * p.gross() + p.theta * p.r_high - (1.0 - p.theta) * p.chi;
    assert!(close(out.welfare, expected, 1e-12));
    assert!(close(cp_safe_core_welfare(&p), expected, 1e-15));
}

#[test]
fn closed_forms_match_the_engine() {
    for p in [three(), cp_like(4, 0.985, 2.0), cp_like(5, 0.99, 2.5), CPParams { m: 1, theta: 0.999, ..three() }] {
        let game = cp_game(&p).unwrap();
        let t = cp_thresholds(&p).unwrap();
        let mut regimes = vec![Regime::LaissezFaire, Regime::SymmetricCap];
        if p.m > t.k_risky {
            regimes.push(Regime::AsymmetricCap { free: t.k_safe });
        }
        for r in regimes {
            let engine = policy_welfare(&cp_policy(&p, r), &game).unwrap().welfare;
            assert!(close(engine, cp_regime_welfare(&p, r), 1e-12), "{r:?} on {p:?}");
        }
        let lf = policy_welfare(&Policy::laissez_faire(p.n_c), &game).unwrap();
        assert!(close(lf.expected_defaults, cp_laissez_faire_defaults(&p), 1e-12));
    }
}

#[test]
fn zero_cost_bailout_of_everyone_removes_bankruptcy_costs() {
    let p = three();
    let game = cp_game(&p).unwrap();
    let mut policy = Policy::laissez_faire(3);
    policy.bailout = Bailout { members: vec![1, 2, 3], costs: vec![0.0; 3] };
    let out = policy_welfare(&policy, &game).unwrap();
    assert_eq!(out.expected_bankruptcy_costs, 0.0);
    assert!(close(out.welfare, 3.0 * p.theta * p.r_high, 1e-12));
    assert!(out.expected_bailouts > 0.0);
}

#[test]
fn bailout_charge_replaces_the_bankruptcy_cost_exactly() {
    // Bank 1 owes bank 2 and node 0; bank 2 holds only the safe asset and
    // cannot default. Bank 1 is the only possible defaulter.
    let chi = 0.7;
    let net = Network::new(2, vec![0.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0, 0.4, 0.0]).unwrap();
    let sc = ScenarioSet::independent_two_point(1, 0.7, 2.0, 0.0).unwrap().with_safe_asset(1.05);
    let game = GameSpec::new(
        net,
        sc,
        BankruptcyCostSpec::new(0.0, chi).unwrap(),
        Selection::Greatest,
        vec![
            StrategySpace::risky_share_grid(3, 0, 1, &[]),
            StrategySpace::Fixed { row: vec![0.0, 1.0] },
        ],
    )
    .unwrap();
    let plain = policy_welfare(&Policy::laissez_faire(2), &game).unwrap();
    let mut bailed = Policy::laissez_faire(2);
    bailed.bailout = Bailout { members: vec![1], costs: vec![chi] };
    let with = policy_welfare(&bailed, &game).unwrap();
    assert!(plain.expected_defaults > 0.0);
    assert_eq!(with.welfare, plain.welfare);
    assert_eq!(with.expected_bailout_costs, plain.expected_bankruptcy_costs);
}

#[test]
fn cheap_bailouts_are_always_used() {
    let p = three();
    let game = cp_game(&p).unwrap();
    let c = 0.5 * p.chi;
    let res = optimal_policy_search(&game, &game_candidate_caps(&game, p.r), Some(&[c; 3])).unwrap();
    assert!(!res.optimal.is_empty());
    for pol in &res.optimal {
        assert_eq!(pol.bailout.members, vec![1, 2, 3]);
        assert!(pol.caps.iter().all(|&x| x == 1.0));
    }
    assert!(close(res.welfare, 3.0 * p.theta * p.r_high - c * 3.0 * (1.0 - p.theta), 1e-12));
}

#[test]
fn costless_default_makes_laissez_faire_optimal() {
    let p = three();
    let net = build_core_periphery(&CorePeripherySpec { n_c: 3, n_p: 0, d: p.d, d0: p.d0 }).unwrap();
    let sc = ScenarioSet::m_correlated(&MCorrelationSpec { n_c: 3, theta: p.theta, m: p.m, r_high: p.r_high, r: p.r })
        .unwrap();
    let spaces = (0..3).map(|b| StrategySpace::risky_share_grid(3, b, 3, &[])).collect();
    let game = GameSpec::new(net, sc, BankruptcyCostSpec::new(0.0, 0.0).unwrap(), Selection::Greatest, spaces).unwrap();
    let res = optimal_policy_search(&game, &game_candidate_caps(&game, p.r), None).unwrap();
    assert_eq!(res.optimal, vec![Policy::laissez_faire(3)]);
}

#[test]
fn search_rejects_large_spaces() {
    let p = cp_like(5, 0.99, 2.5);
    let game = cp_game(&p).unwrap();
    let cands = vec![(0..16).map(|i| i as f64 / 15.0).collect::<Vec<_>>(); 5];
    assert!(matches!(
        optimal_policy_search(&game, &cands, Some(&[1.0; 5])),
        Err(RegulationError::SpaceTooLarge { .. })
    ));
}

#[test]
fn injected_caps_match_the_core_periphery_levels() {
    let p = three();
    let game = cp_game(&p).unwrap();
    let caps = injected_caps(&game.network, 0, p.r);
    let want = cp_candidate_caps(&p);
    assert_eq!(caps.len(), want.len());
    for (a, b) in caps.iter().zip(&want) {
        assert!(close(*a, *b, 1e-12));
    }
}

#[test]
fn freed_banks_are_interchangeable() {
    let p = cp_like(4, 0.99, 2.0);
    let game = cp_game(&p).unwrap();
    let base = cp_policy(&p, Regime::AsymmetricCap { free: 1 });
    let w = policy_welfare(&base, &game).unwrap().welfare;
    for shift in 1..4 {
        let mut caps = base.caps.clone();
        caps.rotate_right(shift);
        let wp = policy_welfare(&Policy::with_caps(caps), &game).unwrap().welfare;
        assert!(close(w, wp, 1e-12));
    }
}

#[test]
fn worked_example_boundary() {
    // Asymmetric (two safe, one free) beats symmetric iff
    // (1-θ)χ < [3D_0/(1+r) - 2][θR - (1+r)]; find the engine's crossing.
    let p = three();
    let diff = |chi: f64| {
        let q = CPParams { chi, ..p };
        let game = cp_game(&q).unwrap();
        policy_welfare(&cp_safe_core_policy(&q, 1), &game).unwrap().welfare
            - policy_welfare(&cp_policy(&q, Regime::SymmetricCap), &game).unwrap().welfare
    };
    let predicted = (3.0 * p.d0 / p.gross() - 2.0) * (p.theta * p.r_high - p.gross()) / (1.0 - p.theta);
    let (a, b) = (2.0, 5.0);
    let (fa, fb) = (diff(a), diff(b));
    assert!(fa > 0.0 && fb < 0.0);
    let root = a - fa * (b - a) / (fb - fa);
    assert!(close(root, predicted, 1e-12), "{root} vs {predicted}");
}

#[test]
fn theta_to_one_is_laissez_faire() {
    for n_c in 3..=5 {
        let v = cp_optimal_regime(&cp_like(n_c, 0.99999, 3.0)).unwrap();
        assert_eq!(v.regime, Regime::LaissezFaire);
    }
}

#[test]
fn defaults_peak_just_above_k_risky() {
    // n_c - 2 >= k^R >= (1-θ)n_c with k^R = 2.
    let base = CPParams { n_c: 6, n_p: 0, d: 0.5, d0: 1.0, theta: 0.9, r_high: 2.2, r: 0.05, chi: 4.0, m: 1 };
    assert_eq!(base.k_risky(), 2);
    let rows = sweep_defaults_vs_m(&base, &[1, 2, 3, 4, 5, 6]).unwrap();
    let flat = (1.0 - base.theta) * 6.0;
    for r in &rows {
        assert!(close(r.expected_defaults, r.closed_form, 1e-12));
    }
    assert!(close(rows[0].expected_defaults, flat, 1e-12));
    assert!(close(rows[1].expected_defaults, flat, 1e-12));
    assert!(close(rows[5].expected_defaults, flat, 1e-12));
    let peak = rows.iter().map(|r| r.expected_defaults).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(rows[2].expected_defaults, peak);
    assert!(rows[2..].windows(2).all(|w| w[1].expected_defaults < w[0].expected_defaults));
}

#[test]
fn regime_matches_the_search_on_small_grids() {
    for n_c in 3..=4 {
        for &theta in &[0.982, 0.99, 0.996] {
            for &chi in &[1.6, 2.4] {
                let p = cp_like(n_c, theta, chi);
                let v = cp_optimal_regime(&p).unwrap();
                let game = cp_game(&p).unwrap();
                let s = optimal_policy_search(&game, &game_candidate_caps(&game, p.r), None).unwrap();
                assert!(close(v.welfare, s.welfare, 1e-12));
                let shape = policy_shape(&v.policy);
                assert!(s.optimal.iter().all(|q| policy_shape(q) == shape));
            }
        }
    }
}

#[test]
fn threshold_model_matches_clearing_for_every_composition() {
    let p = cp_like(4, 0.99, 1.8);
    let game = cp_game(&p).unwrap();
    let cands = cp_candidate_caps(&p);
    use itertools::Itertools;
    for combo in cands.iter().copied().combinations_with_replacement(4) {
        let model = cp_cap_assignment_value(&p, &combo);
        let engine = policy_welfare(&Policy::with_caps(combo.clone()), &game).unwrap();
        assert!(close(model.welfare, engine.welfare, 1e-12), "{combo:?}");
        assert!(close(model.expected_defaults, engine.expected_defaults, 1e-12), "{combo:?}");
    }
}

fn two_tier() -> (NestedSplitSpec, CPParams) {
    let spec = NestedSplitSpec {
        tiers: vec![
            TierSpec { size: 3, counterparty_tiers: vec![1] },
            TierSpec { size: 2, counterparty_tiers: vec![0, 1] },
        ],
        d: 1.0,
        d0: 1.0,
        n_p: 0,
    };
    let p = CPParams { n_c: 5, n_p: 0, d: 1.0, d0: 1.0, theta: 0.8, r_high: 3.5, r: 1.2, chi: 5.0, m: 3 };
    (spec, p)
}

#[test]
fn two_tier_cascade_probabilities_and_ranking() {
    let (spec, p) = two_tier();
    assert_eq!((p.k_risky(), p.k_safe()), (2, 1));
    let (game, split) = ns_game(&spec, &p).unwrap();
    assert_eq!(split.clique, vec![0, 1]);
    assert_eq!(split.independent, vec![2, 3, 4]);
    let clique_safe = Policy::with_caps(vec![0.0, 0.0, 1.0, 1.0, 1.0]);
    let ind_safe = Policy::with_caps(vec![1.0, 1.0, 0.0, 0.0, 1.0]);
    let a = cascade_count(&game, &p, &clique_safe, &split.clique).unwrap();
    let b = cascade_count(&game, &p, &ind_safe, &[2, 3]).unwrap();
    assert_eq!((a.group_defaults, a.subsets), (7, 10));
    assert_eq!((b.group_defaults, b.subsets), (3, 10));
    let fail = p.failure_mass();
    let tr = p.theta * p.r_high;
    let surplus = |frac: f64| 2.0 * (p.gross() - fail * frac * p.chi) + 3.0 * (tr - (1.0 - p.theta) * p.chi);
    let wa = policy_welfare(&clique_safe, &game).unwrap().welfare;
    let wb = policy_welfare(&ind_safe, &game).unwrap().welfare;
    assert!(close(wa, surplus(0.7), 1e-12));
    assert!(close(wb, surplus(0.3), 1e-12));
    assert!(wb > wa);
}

#[test]
fn hierarchical_policy_surplus_and_certificate() {
    let (spec, _) = two_tier();
    let p = CPParams { n_c: 5, n_p: 0, d: 0.3, d0: 1.0, theta: 0.98, r_high: 1.5, r: 0.35, chi: 1.0, m: 2 };
    let v = ns_regime_check(&spec, &p).unwrap();
    assert!(close(v.hierarchical_welfare, v.hierarchical_formula, 1e-12));
    assert!(v.threshold_holds, "threshold {}", v.threshold);
    assert_eq!(v.certified, Some(true));
    assert!(v.best_symmetric_cap < 1.0);
    assert_eq!(v.hierarchical.caps[0], 0.0);
    assert_eq!(v.hierarchical.caps[2], 1.0);
    // below the threshold no certificate is issued
    let low = ns_regime_check(&spec, &CPParams { theta: 0.95, ..p }).unwrap();
    assert!(!low.threshold_holds);
    assert_eq!(low.certified, None);
}

#[test]
fn nested_split_preconditions() {
    let (spec, p) = two_tier();
    let few = CPParams { m: 2, theta: 0.9, ..p };
    assert!(matches!(ns_regime_check(&spec, &few), Err(RegulationError::PreconditionFailed(_))));
    let wrong = CPParams { n_c: 4, ..p };
    assert!(matches!(ns_regime_check(&spec, &wrong), Err(RegulationError::InvalidParams(_))));
}

#[test]
fn nested_split_low_correlation_threshold() {
    // m <= k^R on the two-tier core: the best of laissez-faire and the
    // symmetric cap flips at the stand-alone threshold.
    let (spec, p) = two_tier();
    let base = CPParams { m: 2, ..p };
    let thr = (base.chi + base.d0) / (base.chi + base.r_high / base.gross() * base.d0);
    for (theta, regulate) in [(thr - 0.02, true), (thr + 0.02, false)] {
        let q = CPParams { theta, ..base };
        let (game, _) = ns_game(&spec, &q).unwrap();
        let lf = policy_welfare(&Policy::laissez_faire(5), &game).unwrap().welfare;
        let sym = policy_welfare(&Policy::with_caps(vec![q.cap_surviving(0); 5]), &game).unwrap().welfare;
        assert_eq!(sym > lf, regulate, "theta {theta}");
    }
}

#[test]
fn single_bank_regimes() {
    // Bank 1 owes bank 2 (which holds only the safe asset) and node 0.
    let net = Network::new(2, vec![0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0]).unwrap();
    let q = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let run = |r_high: f64, chi: f64, c: f64| {
        let sc = ScenarioSet::independent_two_point(1, 0.5, r_high, 0.0).unwrap().with_safe_asset(1.05);
        single_bank_regime(&SingleBankQuery {
            network: &net,
            q: &q,
            bank: 0,
            risky: 0,
            safe: 1,
            r: 0.05,
            bailout_cost: c,
            scenarios: &sc,
            costs: BankruptcyCostSpec::new(0.0, chi).unwrap(),
            selection: Selection::Greatest,
        })
        .unwrap()
    };
    let free = run(3.0, 0.0, 0.0);
    assert_eq!(free.nfc, 0.0);
    assert_eq!(free.regime, BankRegime::LaissezFaire);
    assert!(free.boundary);
    assert_eq!(run(3.0, 0.0, 5.0).regime, BankRegime::LaissezFaire);
    // high excess return, high NFC, moderate bailout cost
    let hot = run(6.0, 3.0, 0.5);
    assert!(hot.opportunity_cost > hot.bailout_cost && hot.nfc > hot.bailout_cost);
    assert_eq!(hot.regime, BankRegime::Bailout);
    // low excess return, high NFC
    let tame = run(2.2, 3.0, 5.0);
    assert!(tame.opportunity_cost < tame.nfc);
    assert_eq!(tame.regime, BankRegime::Restrict);
    assert!(close(tame.cap, 1.0 - 0.5 / 1.05, 1e-15));
    let heavy = Network::new(1, vec![0.0, 2.0, 0.0, 0.0]).unwrap();
    let sc = ScenarioSet::independent_two_point(1, 0.5, 3.0, 0.0).unwrap().with_safe_asset(1.05);
    let err = single_bank_regime(&SingleBankQuery {
        network: &heavy,
        q: &[vec![1.0, 0.0]],
        bank: 0,
        risky: 0,
        safe: 1,
        r: 0.05,
        bailout_cost: 1.0,
        scenarios: &sc,
        costs: BankruptcyCostSpec::new(0.0, 1.0).unwrap(),
        selection: Selection::Greatest,
    });
    assert!(matches!(err, Err(RegulationError::CapInfeasible { .. })));
}

#[test]
fn regime_boundaries_are_flagged() {
    assert_eq!(classify_regime(1.0, 1.0, 2.0), (BankRegime::LaissezFaire, true));
    assert_eq!(classify_regime(1.0, 2.0, 1.0), (BankRegime::Restrict, true));
    assert_eq!(classify_regime(2.0, 1.5, 1.0), (BankRegime::Bailout, false));
    assert_eq!(classify_regime(0.5, 1.5, 1.0), (BankRegime::Restrict, false));
    assert_eq!(classify_regime(2.0, 0.5, 1.0), (BankRegime::LaissezFaire, false));
}

#[test]
fn regime_map_rows_are_ordered() {
    let spec = RegimeMapSpec {
        plane: RegimePlane::ExcessNfc { bailout_cost: 1.0, liabilities: 2.0 },
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 2.0,
        steps: 5,
    };
    let cells = sweep_regime_map(&spec).unwrap();
    assert_eq!(cells.len(), 25);
    assert_eq!((cells[6].ix, cells[6].iy), (1, 1));
    assert!(cells.iter().filter(|c| c.boundary).all(|c| {
        c.opportunity_cost == c.nfc || c.bailout_cost == c.nfc || c.opportunity_cost == c.bailout_cost
    }));
}

prop_compose! {
    // Valid core-periphery parameters with D_0 = 1 and m > k^R or not.
    fn cp_params()(n_c in 3usize..=6, d in 0.05f64..0.3, r in 0.02f64..0.5, u in 0.0f64..1.0,
                   t in 0.0f64..1.0, c in 0.0f64..3.0, mm in 0usize..6) -> Option<CPParams> {
        let d0 = 1.0;
        let top = d0 + (n_c - 1) as f64 * d;
        let r_high = (1.0 + r) + u * (top - 1.0 - r);
        let m = 1 + mm % n_c;
        let lo = ((1.0 + r) / r_high).max(1.0 - m as f64 / n_c as f64);
        let theta = lo + (1.0 - lo) * (0.02 + 0.96 * t);
        let mut p = CPParams { n_c, n_p: 0, d, d0, theta, r_high, r, chi: 0.0, m };
        p.chi = r_high + (n_c as f64 - 2.0 - p.k_risky() as f64) * d + c;
        p.validate().ok().map(|_| p)
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, max_global_rejects: 1 << 20, ..ProptestConfig::default() })]

    #[test]
    fn prop_symmetric_threshold_when_correlation_is_low(p in cp_params()) {
        let Some(p) = p else { return Ok(()) };
        prop_assume!(p.m <= p.k_risky());
        let v = cp_optimal_regime(&p).unwrap();
        let thr = v.thresholds.theta_symmetric;
        prop_assume!((p.theta - thr).abs() > 1e-9);
        if p.theta < thr {
            prop_assert_eq!(v.regime, Regime::SymmetricCap);
        } else {
            prop_assert_eq!(v.regime, Regime::LaissezFaire);
        }
    }

    #[test]
    fn prop_high_correlation_threshold_implications(p in cp_params()) {
        let Some(p) = p else { return Ok(()) };
        prop_assume!(p.m > p.k_risky() && p.k_safe() >= 1);
        let v = cp_optimal_regime(&p).unwrap();
        let t = v.thresholds;
        if p.theta < t.theta_high - 1e-9 {
            prop_assert!(v.regime != Regime::LaissezFaire);
        }
        if let Some(low) = t.theta_low {
            if p.theta > low + 1e-9 && p.theta < t.theta_high - 1e-9 {
                prop_assert!(matches!(v.regime, Regime::AsymmetricCap { .. }), "{:?}", v);
            }
        }
        let construction = v.welfare_construction.unwrap();
        prop_assert!(v.welfare >= construction.max(v.welfare_symmetric).max(v.welfare_laissez_faire) - 1e-12);
    }

    #[test]
    fn prop_threshold_order(p in cp_params()) {
        let Some(p) = p else { return Ok(()) };
        let t = cp_thresholds(&p).unwrap();
        prop_assume!(t.asym_feasible);
        let y = p.n_c as f64 * p.d0 - (p.n_c - t.k_safe) as f64 * (p.d0 + t.k_safe as f64 * p.d);
        let lhs = p.n_c as f64 / p.m as f64 * y;
        let rhs = t.k_safe as f64 * p.d0;
        prop_assume!((lhs - rhs).abs() > 1e-9);
        prop_assert_eq!(t.theta_high > t.theta_low.unwrap(), lhs > rhs);
    }

    #[test]
    fn prop_larger_claims_widen_the_sufficient_region(p in cp_params(), grow in 1.0f64..2.0) {
        let Some(p) = p else { return Ok(()) };
        let big = CPParams { d: p.d * grow, ..p };
        prop_assume!(big.validate().is_ok());
        prop_assert!(big.k_risky() <= p.k_risky());
        let regulate = |q: &CPParams| {
            let t = cp_thresholds(q).unwrap();
            if q.m <= t.k_risky { q.theta < t.theta_symmetric } else { q.theta < t.theta_high }
        };
        if regulate(&p) {
            prop_assert!(regulate(&big));
            prop_assert!(cp_optimal_regime(&big).unwrap().regime != Regime::LaissezFaire);
        }
    }
}

#[test]
fn larger_claims_can_remove_the_exact_optimum_intervention() {
    // Outside the sufficient region the exact optimum is not monotone in D:
    // one bank capped to survive three defaults helps at D = 0.12, but no
    // cap survives them at D = 0.24.
    let p = CPParams { n_c: 4, n_p: 0, d: 0.12, d0: 1.0, theta: 0.99995, r_high: 1.2177, r: 0.2172, chi: 3.0, m: 2 };
    let small = cp_optimal_regime(&p).unwrap();
    assert_eq!(small.regime, Regime::AsymmetricCap { free: 3 });
    assert!(p.theta > small.thresholds.theta_high);
    let large = cp_optimal_regime(&CPParams { d: 0.24, ..p }).unwrap();
    assert_eq!(large.regime, Regime::LaissezFaire);
}
