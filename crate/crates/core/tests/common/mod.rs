//! Shared helpers for integration tests: seeded random networks and an
//! independent brute-force enumeration of clearing fixed points.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use netclear::network::{BankruptcyCostSpec, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub net: Network,
    pub e: Vec<f64>,
    pub costs: BankruptcyCostSpec,
}

/// Random debt network with `n` banks. Every bank owes something to node 0,
/// so no closed set of banks can trap value.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    let m = n + 1;
    let mut debt = vec![0.0; m * m];
    for i in 1..m {
        for j in 1..m {
            if i != j && rng.gen::<f64>() < 0.6 {
                debt[i * m + j] = rng.gen_range(0.0..2.0);
            }
        }
        debt[i] = rng.gen_range(0.05..1.0);
        if rng.gen::<f64>() < 0.3 {
            debt[i * m] = rng.gen_range(0.0..0.5);
        }
    }
    let e = (0..n)
        .map(|_| if rng.gen::<f64>() < 0.2 { 0.0 } else { rng.gen_range(0.0..3.0) })
        .collect();
    let a = if rng.gen::<bool>() { 0.0 } else { rng.gen_range(0.0..0.5) };
    let chi = rng.gen_range(0.0..1.5);
    Instance {
        net: Network::new(n, debt).unwrap(),
        e,
        costs: BankruptcyCostSpec::new(a, chi).unwrap(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every consistent fixed point, found by enumerating the default set `S`
/// and, inside it, the set of defaulters that pay nothing. Each candidate
/// is a linear system in the partial payments.
pub fn brute_force_fixed_points(inst: &Instance) -> Vec<Vec<f64>> {
    let net = &inst.net;
    let n = net.n();
    let (a, chi) = (inst.costs.a, inst.costs.chi);
    let dl: Vec<f64> = (1..=n).map(|i| net.liabilities(i)).collect();
    let tol: Vec<f64> = dl.iter().map(|x| 1e-12 * x.max(1.0)).collect();
    let mut found = Vec::new();
    for s_mask in 0u32..(1 << n) {
        if (0..n).any(|j| s_mask >> j & 1 == 1 && dl[j] == 0.0) {
            continue;
        }
        // iterate over subsets z of s_mask
        let mut z = s_mask;
        loop {
            let partial: Vec<usize> = (0..n).filter(|&j| s_mask >> j & 1 == 1 && z >> j & 1 == 0).collect();
            let in_s = |j: usize| s_mask >> j & 1 == 1;
            let base = |i: usize| {
                let mut c = inst.e[i] + net.claim(i + 1, 0);
                for j in 0..n {
                    if !in_s(j) {
                        c += net.claim(i + 1, j + 1);
                    }
                }
                c
            };
            let k = partial.len();
            let mut mat = DMatrix::<f64>::identity(k, k);
            let mut rhs = DVector::<f64>::zeros(k);
            for (r, &j) in partial.iter().enumerate() {
                rhs[r] = (1.0 - a) * base(j) - chi;
                for (c, &l) in partial.iter().enumerate() {
                    mat[(r, c)] -= (1.0 - a) * net.claim(j + 1, l + 1) / dl[l];
                }
            }
            let solved = if k == 0 { Some(DVector::zeros(0)) } else { mat.lu().solve(&rhs) };
            if let Some(pay) = solved {
                let mut total_pay = vec![0.0; n];
                for (r, &j) in partial.iter().enumerate() {
                    total_pay[j] = pay[r];
                }
                for j in 0..n {
                    if !in_s(j) {
                        total_pay[j] = dl[j];
                    }
                }
                let assets: Vec<f64> = (0..n)
                    .map(|i| {
                        let mut x = inst.e[i] + net.claim(i + 1, 0);
                        for j in 0..n {
                            if dl[j] > 0.0 {
                                x += net.claim(i + 1, j + 1) * total_pay[j] / dl[j];
                            }
                        }
                        x
                    })
                    .collect();
                let mut ok = true;
                for j in 0..n {
                    let cover = (1.0 - a) * assets[j] - chi;
                    if in_s(j) {
                        ok &= assets[j] < dl[j] - tol[j];
                        if z >> j & 1 == 1 {
                            ok &= cover <= 1e-12;
                        } else {
                            ok &= cover >= -1e-12;
                        }
                    } else {
                        ok &= assets[j] >= dl[j] - tol[j];
                    }
                }
                if ok {
                    let v = (0..n)
                        .map(|j| {
                            if in_s(j) {
                                (1.0 - a) * assets[j] - chi - dl[j]
                            } else {
                                (assets[j] - dl[j]).max(0.0)
                            }
                        })
                        .collect();
                    found.push(v);
                }
            }
            if z == 0 {
                break;
            }
            z = (z - 1) & s_mask;
        }
    }
    found
}

/// Componentwise max and min of the fixed points, each checked to be a
/// fixed point itself (the lattice has a top and a bottom).
pub fn brute_force_extremes(inst: &Instance) -> (Vec<f64>, Vec<f64>) {
    let pts = brute_force_fixed_points(inst);
    assert!(!pts.is_empty(), "no fixed point found");
    let n = inst.net.n();
    let top: Vec<f64> = (0..n).map(|j| pts.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let bottom: Vec<f64> = (0..n).map(|j| pts.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)).collect();
    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-9);
    assert!(pts.iter().any(|p| close(p, &top)), "componentwise max is not a fixed point");
    assert!(pts.iter().any(|p| close(p, &bottom)), "componentwise min is not a fixed point");
    (top, bottom)
}
