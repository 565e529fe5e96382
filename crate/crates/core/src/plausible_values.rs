//! Run an estimator once per plausible value and average the endpoints.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};
use crate::identification::{estimate, AssumptionSet, IdentificationRegion, Ingredients, StratumBounds};
use crate::survey_model::Dataset;

/// Spread of the per-PV endpoints (sample standard deviation; 0 for one PV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvSpread {
    pub lower_sd: f64,
    pub upper_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvAggregate {
    pub per_pv: Vec<IdentificationRegion>,
    pub combined: IdentificationRegion,
    pub spread: PvSpread,
}

/// Mean written as an offset from the first element, so identical inputs
/// return that value exactly.
fn mean(xs: &[f64]) -> f64 {
    let first = xs[0];
    first + xs.iter().map(|x| x - first).sum::<f64>() / xs.len() as f64
}

fn mean_opt(xs: &[Option<f64>]) -> Option<f64> {
    let vals: Option<Vec<f64>> = xs.iter().copied().collect();
    vals.map(|v| mean(&v))
}

fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

fn combine_ingredients(items: &[&Ingredients]) -> Ingredients {
    let pick = |f: fn(&Ingredients) -> f64| mean(&items.iter().map(|i| f(i)).collect::<Vec<_>>());
    let pick_opt = |f: fn(&Ingredients) -> Option<f64>| mean_opt(&items.iter().map(|i| f(i)).collect::<Vec<_>>());
    Ingredients {
        mu: pick(|i| i.mu),
        p1: pick(|i| i.p1),
        p2: pick(|i| i.p2),
        p: pick(|i| i.p),
        q_alpha: pick_opt(|i| i.q_alpha),
        q_upper: pick_opt(|i| i.q_upper),
        participants: items[0].participants,
    }
}

/// Endpoint-wise average of regions that share a regime.
pub fn combine_regions(per_pv: &[IdentificationRegion]) -> Result<IdentificationRegion> {
    let first = per_pv
        .first()
        .ok_or_else(|| BoundsError::config("no plausible values to combine"))?;
    let lowers: Vec<f64> = per_pv.iter().map(|r| r.lower).collect();
    let uppers: Vec<f64> = per_pv.iter().map(|r| r.upper).collect();
    let lower = mean(&lowers);
    let upper = mean(&uppers);

    let per_stratum = first.per_stratum.as_ref().map(|strata| {
        strata
            .iter()
            .map(|(id, b)| {
                let all: Vec<&StratumBounds> = per_pv
                    .iter()
                    .filter_map(|r| r.per_stratum.as_ref().and_then(|m| m.get(id)))
                    .collect();
                let ing: Vec<&Ingredients> = all.iter().map(|s| &s.ingredients).collect();
                let combined = StratumBounds {
                    share: b.share,
                    lower: mean(&all.iter().map(|s| s.lower).collect::<Vec<_>>()),
                    upper: mean(&all.iter().map(|s| s.upper).collect::<Vec<_>>()),
                    ingredients: combine_ingredients(&ing),
                    school_factor: b.school_factor,
                };
                (id.clone(), combined)
            })
            .collect::<BTreeMap<_, _>>()
    });

    let mut warnings: Vec<String> = Vec::new();
    for w in per_pv.iter().flat_map(|r| r.warnings.iter()) {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }

    let ing: Vec<&Ingredients> = per_pv.iter().map(|r| &r.ingredients).collect();
    Ok(IdentificationRegion {
        regime: first.regime,
        alpha: first.alpha,
        lower,
        upper,
        width: upper - lower,
        per_stratum,
        ingredients: combine_ingredients(&ing),
        warnings,
    })
}

/// Estimate with each plausible value in turn and combine endpoint-wise.
pub fn aggregate_over_pvs(dataset: &Dataset, assumptions: &AssumptionSet) -> Result<PvAggregate> {
    assumptions.check()?;
    for st in dataset.students.iter().filter(|s| s.z2) {
        let have = st.pv.as_ref().map_or(0, Vec::len);
        if have < dataset.pv_count {
            return Err(BoundsError::MissingPlausibleValue {
                student_id: st.student_id.clone(),
                index: have + 1,
            });
        }
    }
    let per_pv: Vec<IdentificationRegion> = (0..dataset.pv_count)
        .into_par_iter()
        .map(|k| estimate(dataset, assumptions, k))
        .collect::<Result<_>>()?;
    let combined = combine_regions(&per_pv)?;
    let spread = PvSpread {
        lower_sd: sd(&per_pv.iter().map(|r| r.lower).collect::<Vec<_>>()),
        upper_sd: sd(&per_pv.iter().map(|r| r.upper).collect::<Vec<_>>()),
    };
    Ok(PvAggregate {
        per_pv,
        combined,
        spread,
    })
}
