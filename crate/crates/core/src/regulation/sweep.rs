//! Parameter sweeps for plotting: expected defaults against the
//! correlation parameter m, and single-bank regime maps.

use serde::{Deserialize, Serialize};

use super::{classify_regime, cp_game, cp_laissez_faire_defaults, policy_welfare, BankRegime, CPParams, Policy, RegulationError};

/// One row of the defaults-versus-m curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefaultsRow {
    pub m: usize,
    pub k_risky: usize,
    /// Exact expectation from clearing every m-subset.
    pub expected_defaults: f64,
    pub closed_form: f64,
}

/// Expected core defaults under laissez-faire for each `m` in `ms`.
pub fn sweep_defaults_vs_m(base: &CPParams, ms: &[usize]) -> Result<Vec<DefaultsRow>, RegulationError> {
    ms.iter()
        .map(|&m| {
            let p = CPParams { m, ..*base };
            let game = cp_game(&p)?;
            let out = policy_welfare(&Policy::laissez_faire(p.n_c), &game)?;
            Ok(DefaultsRow {
                m,
                k_risky: p.k_risky(),
                expected_defaults: out.expected_defaults,
                closed_form: cp_laissez_faire_defaults(&p),
            })
        })
        .collect()
}

/// The plane a regime map covers; the third quantity is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plane", rename_all = "snake_case")]
pub enum RegimePlane {
    /// x = expected excess return `E[p_r]/(1+r) - 1`, y = NFC.
    ExcessNfc { bailout_cost: f64, liabilities: f64 },
    /// x = bailout cost, y = NFC.
    CostNfc { excess_return: f64, liabilities: f64 },
}

/// Axes of a regime map: `steps` evenly spaced points per axis, ends
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeMapSpec {
    pub plane: RegimePlane,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeCell {
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
    pub opportunity_cost: f64,
    pub nfc: f64,
    pub bailout_cost: f64,
    pub regime: BankRegime,
    pub boundary: bool,
}

fn axis(lo: f64, hi: f64, steps: usize, i: usize) -> f64 {
    if steps <= 1 {
        lo
    } else {
        lo + (hi - lo) * i as f64 / (steps - 1) as f64
    }
}

/// Classifies every grid point; rows are ordered by y, then x.
pub fn sweep_regime_map(spec: &RegimeMapSpec) -> Result<Vec<RegimeCell>, RegulationError> {
    if spec.steps == 0 || !(spec.x_max >= spec.x_min) || !(spec.y_max >= spec.y_min) {
        return Err(RegulationError::InvalidParams("regime map needs steps >= 1 and ordered ranges".into()));
    }
    let mut out = Vec::with_capacity(spec.steps * spec.steps);
    for iy in 0..spec.steps {
        let y = axis(spec.y_min, spec.y_max, spec.steps, iy);
        for ix in 0..spec.steps {
            let x = axis(spec.x_min, spec.x_max, spec.steps, ix);
            let (oc, c) = match spec.plane {
                RegimePlane::ExcessNfc { bailout_cost, liabilities } => (x * liabilities, bailout_cost),
                RegimePlane::CostNfc { excess_return, liabilities } => (excess_return * liabilities, x),
            };
            let (regime, boundary) = classify_regime(oc, y, c);
            out.push(RegimeCell {
                ix,
                iy,
                x,
                y,
                opportunity_cost: oc,
                nfc: y,
                bailout_cost: c,
                regime,
                boundary,
            });
        }
    }
    Ok(out)
}
