//! Identification regions for mean achievement under each assumption regime.
//!
//! Every regime is assembled from the same per-cell ingredients (participant
//! mean, participation rates, participant quantiles), computed by one code
//! path in one fixed order. Identities that hold algebraically therefore hold
//! bit for bit: the monotone lower bounds equal the quantile lower bounds,
//! `alpha = 0.5` collapses to a point, and a single stratum reproduces the
//! unstratified regimes.
//!
//! `pv` arguments are zero-based plausible-value indices.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};
use crate::survey_model::{link_replacements, Dataset, SchoolRecord, StratumRecord, StudentRecord};
use crate::weighted_stats::{
    compensated_sum, school_adjustment_factor, school_participation_rate, stratum_adjustment_factor,
    student_participation_over, weighted_mean, WeightedCdf, WeightedSample,
};

/// Slack allowed when checking `lower <= upper`.
pub const ORDER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// Non-participant mean within known support limits.
    #[serde(rename = "WORST_CASE")]
    WorstCase,
    /// A1: non-participant mean within participant quantiles.
    #[serde(rename = "A1")]
    Quantile,
    /// A1.1: A1 within each stratum.
    #[serde(rename = "A1_1")]
    StratifiedQuantile,
    /// A1.2 + A2: ignorable within schools, quantile restriction on
    /// non-participating schools per stratum.
    #[serde(rename = "A1_2_A2")]
    SchoolIgnorable,
    /// A2 + A3: the standard adjustment-cell model, point identified.
    #[serde(rename = "A2_A3")]
    Standard,
    /// A2 + A3 after imputing recipients from replacement schools.
    #[serde(rename = "A2_A3_REPLACEMENT")]
    StandardWithReplacements,
    /// A1 + A4: monotone selection.
    #[serde(rename = "A1_A4")]
    Monotone,
    /// A1.1 + A4.1: monotone selection within strata.
    #[serde(rename = "A1_1_A4_1")]
    StratifiedMonotone,
}

impl Regime {
    pub const ALL: [Regime; 8] = [
        Regime::WorstCase,
        Regime::Quantile,
        Regime::StratifiedQuantile,
        Regime::SchoolIgnorable,
        Regime::Standard,
        Regime::StandardWithReplacements,
        Regime::Monotone,
        Regime::StratifiedMonotone,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Regime::WorstCase => "WORST_CASE",
            Regime::Quantile => "A1",
            Regime::StratifiedQuantile => "A1_1",
            Regime::SchoolIgnorable => "A1_2_A2",
            Regime::Standard => "A2_A3",
            Regime::StandardWithReplacements => "A2_A3_REPLACEMENT",
            Regime::Monotone => "A1_A4",
            Regime::StratifiedMonotone => "A1_1_A4_1",
        }
    }

    pub fn needs_alpha(self) -> bool {
        matches!(
            self,
            Regime::Quantile
                | Regime::StratifiedQuantile
                | Regime::SchoolIgnorable
                | Regime::Monotone
                | Regime::StratifiedMonotone
        )
    }

    pub fn is_point(self) -> bool {
        matches!(self, Regime::Standard | Regime::StandardWithReplacements)
    }

    pub fn is_stratified(self) -> bool {
        matches!(
            self,
            Regime::StratifiedQuantile
                | Regime::SchoolIgnorable
                | Regime::Standard
                | Regime::StandardWithReplacements
                | Regime::StratifiedMonotone
        )
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Regime {
    type Err = BoundsError;

    fn from_str(s: &str) -> Result<Regime> {
        Regime::ALL
            .into_iter()
            .find(|r| r.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| BoundsError::config(format!("unknown regime `{s}`")))
    }
}

/// A regime together with its tuning values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionSet {
    pub regime: Regime,
    /// Quantile level in (0, 0.5]; quantile regimes only.
    pub alpha: Option<f64>,
    /// Support limits; worst-case regime only.
    pub support: Option<(f64, f64)>,
    /// Use the `min` form of the monotone upper bound.
    #[serde(default)]
    pub strict_monotone: bool,
}

impl AssumptionSet {
    pub fn worst_case(support_min: f64, support_max: f64) -> Self {
        AssumptionSet {
            regime: Regime::WorstCase,
            alpha: None,
            support: Some((support_min, support_max)),
            strict_monotone: false,
        }
    }

    pub fn with_alpha(regime: Regime, alpha: f64) -> Self {
        AssumptionSet {
            regime,
            alpha: Some(alpha),
            support: None,
            strict_monotone: false,
        }
    }

    pub fn point(regime: Regime) -> Self {
        AssumptionSet {
            regime,
            alpha: None,
            support: None,
            strict_monotone: false,
        }
    }

    pub fn strict(mut self) -> Self {
        self.strict_monotone = true;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.regime.needs_alpha() {
            let alpha = self
                .alpha
                .ok_or_else(|| BoundsError::config(format!("{} requires alpha", self.regime)))?;
            check_alpha(alpha)?;
        }
        if self.regime == Regime::WorstCase {
            let (lo, hi) = self
                .support
                .ok_or_else(|| BoundsError::config("WORST_CASE requires support limits"))?;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(BoundsError::config(format!("support [{lo}, {hi}] is not an interval")));
            }
        }
        Ok(())
    }

    /// Label such as `A1@0.05` or `A2_A3`.
    pub fn scenario_label(&self) -> String {
        match (self.regime, self.alpha, self.support) {
            (Regime::WorstCase, _, Some((lo, hi))) => format!("WORST_CASE[{lo},{hi}]"),
            (r, Some(a), _) if r.needs_alpha() => {
                let strict = if r == Regime::Monotone && self.strict_monotone {
                    "+strict"
                } else {
                    ""
                };
                format!("{r}{strict}@{a:.2}")
            }
            (r, _, _) => r.label().to_string(),
        }
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(BoundsError::config(format!("alpha {alpha} outside (0, 0.5]")))
    }
}

/// Estimated ingredients behind a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ingredients {
    /// Participant mean.
    pub mu: f64,
    pub p1: f64,
    pub p2: f64,
    pub p: f64,
    pub q_alpha: Option<f64>,
    pub q_upper: Option<f64>,
    /// Number of participant rows contributing.
    pub participants: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumBounds {
    pub share: f64,
    pub lower: f64,
    pub upper: f64,
    #[serde(flatten)]
    pub ingredients: Ingredients,
    /// Stratum adjustment factor π_w^f, point regimes only.
    pub school_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationRegion {
    pub regime: Regime,
    pub alpha: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    pub per_stratum: Option<BTreeMap<String, StratumBounds>>,
    pub ingredients: Ingredients,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl IdentificationRegion {
    fn new(regime: Regime, alpha: Option<f64>, lower: f64, upper: f64, ingredients: Ingredients) -> Result<Self> {
        if lower > upper + ORDER_TOLERANCE {
            return Err(BoundsError::Refuted {
                regime: regime.label().to_string(),
                message: format!("lower bound {lower} exceeds upper bound {upper}"),
            });
        }
        Ok(IdentificationRegion {
            regime,
            alpha,
            lower,
            upper,
            width: upper - lower,
            per_stratum: None,
            ingredients,
            warnings: Vec::new(),
        })
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower - ORDER_TOLERANCE <= value && value <= self.upper + ORDER_TOLERANCE
    }

    /// `self ⊆ other`, with tolerance.
    pub fn is_subset_of(&self, other: &IdentificationRegion) -> bool {
        other.lower <= self.lower + ORDER_TOLERANCE && self.upper <= other.upper + ORDER_TOLERANCE
    }
}

pub fn region_width(region: &IdentificationRegion) -> f64 {
    region.upper - region.lower
}

/// Observed mean share plus a fill value for the non-participant share.
#[inline]
pub fn fill_bound(mu: f64, p: f64, fill: f64) -> f64 {
    mu * p + fill * (1.0 - p)
}

/// Bounds when the non-participant mean lies in `[support_min, support_max]`.
pub fn bounded_support(mu: f64, p: f64, support_min: f64, support_max: f64) -> (f64, f64) {
    (fill_bound(mu, p, support_min), fill_bound(mu, p, support_max))
}

// ---------------------------------------------------------------------------
// Design view and ingredient pipeline

struct SchoolCell<'a> {
    school: &'a SchoolRecord,
    rows: Vec<&'a StudentRecord>,
}

struct StratumCell<'a> {
    stratum: &'a StratumRecord,
    /// Originally sampled schools, file order.
    schools: Vec<SchoolCell<'a>>,
    /// Every school row of the stratum, replacements included.
    all_rows: Vec<&'a SchoolRecord>,
}

struct Design<'a> {
    dataset: &'a Dataset,
    by_school: HashMap<&'a str, Vec<&'a StudentRecord>>,
    strata: Vec<StratumCell<'a>>,
}

#[derive(Clone, Copy)]
enum Weighting {
    /// π_ij⁻¹.
    Design,
    /// (π_ij π_j^f)⁻¹.
    SchoolAdjusted,
    /// (π_ij π_j^f π_w^f)⁻¹ with the given π_w^f.
    FullyAdjusted(f64),
}

struct CellStats {
    ingredients: Ingredients,
    sample: WeightedSample,
}

impl<'a> Design<'a> {
    fn new(dataset: &'a Dataset) -> Self {
        let by_school = dataset.students_by_school();
        let strata = dataset
            .strata
            .iter()
            .map(|stratum| {
                let all_rows: Vec<&SchoolRecord> = dataset.schools_in(&stratum.stratum_id).collect();
                let schools = all_rows
                    .iter()
                    .filter(|s| !s.is_replacement())
                    .map(|&school| SchoolCell {
                        school,
                        rows: by_school.get(school.school_id.as_str()).cloned().unwrap_or_default(),
                    })
                    .collect();
                StratumCell {
                    stratum,
                    schools,
                    all_rows,
                }
            })
            .collect();
        Design {
            dataset,
            by_school,
            strata,
        }
    }

    fn all_schools(&self) -> Vec<&SchoolCell<'a>> {
        self.strata.iter().flat_map(|c| c.schools.iter()).collect()
    }

    fn stratum_factor(&self, cell: &StratumCell<'a>, use_replacements: bool) -> Result<f64> {
        let factor = stratum_adjustment_factor(
            cell.stratum,
            &cell.all_rows,
            &self.dataset.filled_slots,
            use_replacements,
        )?;
        if factor == 0.0 {
            return Err(BoundsError::empty(
                format!("stratum {}", cell.stratum.stratum_id),
                "no participating schools",
            ));
        }
        Ok(factor)
    }

    /// Ingredients over a set of schools. `warnings` collects schools that
    /// contribute nothing under school-level adjustment.
    fn cell(
        &self,
        schools: &[&SchoolCell<'a>],
        pv: usize,
        weighting: Weighting,
        cell_name: &str,
        warnings: &mut Vec<String>,
    ) -> Result<CellStats> {
        let in_cell = |e: BoundsError| match e {
            BoundsError::EmptyCell { message, .. } => BoundsError::empty(cell_name, message),
            other => other,
        };
        let p1 = school_participation_rate(schools.iter().map(|c| c.school)).map_err(in_cell)?;
        let p2 = student_participation_over(schools.iter().map(|c| c.school), &self.by_school).map_err(in_cell)?;

        let mut values = Vec::new();
        let mut weights = Vec::new();
        for cell in schools.iter().filter(|c| c.school.z1) {
            let adjust = match weighting {
                Weighting::Design => 1.0,
                Weighting::SchoolAdjusted | Weighting::FullyAdjusted(_) => {
                    let f = school_adjustment_factor(cell.school, &cell.rows).unwrap_or(0.0);
                    if f == 0.0 {
                        warnings.push(format!(
                            "school {} has no participating students and contributes weight 0",
                            cell.school.school_id
                        ));
                        continue;
                    }
                    match weighting {
                        Weighting::FullyAdjusted(stratum_factor) => f * stratum_factor,
                        _ => f,
                    }
                }
            };
            for st in cell.rows.iter().filter(|s| s.z2) {
                let y = st.pv.as_ref().and_then(|v| v.get(pv)).copied().ok_or_else(|| {
                    BoundsError::MissingPlausibleValue {
                        student_id: st.student_id.clone(),
                        index: pv + 1,
                    }
                })?;
                values.push(y);
                weights.push(if adjust == 1.0 {
                    st.student_weight
                } else {
                    st.student_weight / adjust
                });
            }
        }
        if values.is_empty() {
            return Err(BoundsError::empty(cell_name, "no participating students"));
        }
        let participants = values.len();
        let sample = WeightedSample::new(values, weights)?;
        Ok(CellStats {
            ingredients: Ingredients {
                mu: weighted_mean(&sample),
                p1,
                p2,
                p: p1 * p2,
                q_alpha: None,
                q_upper: None,
                participants,
            },
            sample,
        })
    }

    fn with_quantiles(stats: CellStats, alpha: f64) -> Ingredients {
        let cdf = WeightedCdf::new(&stats.sample);
        let mut ing = stats.ingredients;
        ing.q_alpha = Some(cdf.quantile(alpha));
        ing.q_upper = Some(cdf.quantile(1.0 - alpha));
        ing
    }

    fn overall(
        &self,
        pv: usize,
        alpha: Option<f64>,
        weighting: Weighting,
        warnings: &mut Vec<String>,
    ) -> Result<Ingredients> {
        let schools = self.all_schools();
        let stats = self.cell(&schools, pv, weighting, "sample", warnings)?;
        Ok(match alpha {
            Some(a) => Self::with_quantiles(stats, a),
            None => stats.ingredients,
        })
    }

    fn per_stratum(
        &self,
        pv: usize,
        alpha: f64,
        weighting: Weighting,
        warnings: &mut Vec<String>,
    ) -> Result<Vec<(&'a StratumRecord, Ingredients)>> {
        let mut out = Vec::with_capacity(self.strata.len());
        for cell in &self.strata {
            let name = format!("stratum {}", cell.stratum.stratum_id);
            if cell.schools.is_empty() {
                return Err(BoundsError::empty(name, "no sampled schools"));
            }
            let schools: Vec<&SchoolCell> = cell.schools.iter().collect();
            let stats = self.cell(&schools, pv, weighting, &name, warnings)?;
            out.push((cell.stratum, Self::with_quantiles(stats, alpha)));
        }
        Ok(out)
    }
}

fn quantiles(ing: &Ingredients) -> (f64, f64) {
    (ing.q_alpha.unwrap_or(ing.mu), ing.q_upper.unwrap_or(ing.mu))
}

/// Σ_w P(w)·bound_w in stratum order.
fn share_weighted<F>(strata: &BTreeMap<String, StratumBounds>, order: &[String], f: F) -> f64
where
    F: Fn(&StratumBounds) -> f64,
{
    compensated_sum(order.iter().map(|id| {
        let b = &strata[id];
        b.share * f(b)
    }))
}

fn stratified_region(
    regime: Regime,
    alpha: Option<f64>,
    strata: BTreeMap<String, StratumBounds>,
    order: Vec<String>,
    ingredients: Ingredients,
    warnings: Vec<String>,
) -> Result<IdentificationRegion> {
    let lower = share_weighted(&strata, &order, |b| b.lower);
    let upper = share_weighted(&strata, &order, |b| b.upper);
    let mut region = IdentificationRegion::new(regime, alpha, lower, upper, ingredients)?;
    region.per_stratum = Some(strata);
    region.warnings = warnings;
    Ok(region)
}

fn dedup(mut warnings: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    warnings.retain(|w| seen.insert(w.clone()));
    warnings
}

// ---------------------------------------------------------------------------
// Regimes

pub fn bounds_worst_case(
    dataset: &Dataset,
    pv: usize,
    support_min: f64,
    support_max: f64,
) -> Result<IdentificationRegion> {
    AssumptionSet::worst_case(support_min, support_max).check()?;
    let design = Design::new(dataset);
    for cell in design.all_schools() {
        for st in cell.rows.iter().filter(|s| s.z2) {
            for &y in st.pv.iter().flatten() {
                if y < support_min || y > support_max {
                    return Err(BoundsError::OutsideSupport {
                        student_id: st.student_id.clone(),
                        value: y,
                        min: support_min,
                        max: support_max,
                    });
                }
            }
        }
    }
    let mut warnings = Vec::new();
    let ing = design.overall(pv, None, Weighting::Design, &mut warnings)?;
    let (lower, upper) = bounded_support(ing.mu, ing.p, support_min, support_max);
    IdentificationRegion::new(Regime::WorstCase, None, lower, upper, ing)
}

/// A1, from originally sampled schools with unadjusted weights.
pub fn bounds_a1(dataset: &Dataset, pv: usize, alpha: f64) -> Result<IdentificationRegion> {
    check_alpha(alpha)?;
    let design = Design::new(dataset);
    let mut warnings = Vec::new();
    let ing = design.overall(pv, Some(alpha), Weighting::Design, &mut warnings)?;
    let (qa, qu) = quantiles(&ing);
    IdentificationRegion::new(
        Regime::Quantile,
        Some(alpha),
        fill_bound(ing.mu, ing.p, qa),
        fill_bound(ing.mu, ing.p, qu),
        ing,
    )
}

fn a1_strata(
    design: &Design,
    pv: usize,
    alpha: f64,
    warnings: &mut Vec<String>,
) -> Result<(BTreeMap<String, StratumBounds>, Vec<String>)> {
    let mut strata = BTreeMap::new();
    let mut order = Vec::new();
    for (stratum, ing) in design.per_stratum(pv, alpha, Weighting::Design, warnings)? {
        let (qa, qu) = quantiles(&ing);
        strata.insert(
            stratum.stratum_id.clone(),
            StratumBounds {
                share: stratum.share,
                lower: fill_bound(ing.mu, ing.p, qa),
                upper: fill_bound(ing.mu, ing.p, qu),
                ingredients: ing,
                school_factor: None,
            },
        );
        order.push(stratum.stratum_id.clone());
    }
    Ok((strata, order))
}

/// A1.1: share-weighted stratum A1 bounds.
pub fn bounds_a1_stratified(dataset: &Dataset, pv: usize, alpha: f64) -> Result<IdentificationRegion> {
    check_alpha(alpha)?;
    let design = Design::new(dataset);
    let mut warnings = Vec::new();
    let (strata, order) = a1_strata(&design, pv, alpha, &mut warnings)?;
    let ing = design.overall(pv, Some(alpha), Weighting::Design, &mut warnings)?;
    stratified_region(
        Regime::StratifiedQuantile,
        Some(alpha),
        strata,
        order,
        ing,
        dedup(warnings),
    )
}

/// A1.2 + A2: school-adjusted weights; only school non-participation widens
/// the stratum bounds.
pub fn bounds_a12_a2(dataset: &Dataset, pv: usize, alpha: f64) -> Result<IdentificationRegion> {
    check_alpha(alpha)?;
    let design = Design::new(dataset);
    let mut warnings = Vec::new();
    let mut strata = BTreeMap::new();
    let mut order = Vec::new();
    for (stratum, ing) in design.per_stratum(pv, alpha, Weighting::SchoolAdjusted, &mut warnings)? {
        let (qa, qu) = quantiles(&ing);
        strata.insert(
            stratum.stratum_id.clone(),
            StratumBounds {
                share: stratum.share,
                lower: fill_bound(ing.mu, ing.p1, qa),
                upper: fill_bound(ing.mu, ing.p1, qu),
                ingredients: ing,
                school_factor: None,
            },
        );
        order.push(stratum.stratum_id.clone());
    }
    let ing = design.overall(pv, Some(alpha), Weighting::SchoolAdjusted, &mut warnings)?;
    stratified_region(
        Regime::SchoolIgnorable,
        Some(alpha),
        strata,
        order,
        ing,
        dedup(warnings),
    )
}

/// A2 + A3: mean of participants weighted by (π_ij π_j^f π_w^f)⁻¹. With
/// `use_replacements`, recipients are filled from their replacement schools.
pub fn point_standard(dataset: &Dataset, pv: usize, use_replacements: bool) -> Result<IdentificationRegion> {
    let linked;
    let source = if use_replacements {
        linked = link_replacements(dataset)?;
        &linked
    } else {
        dataset
    };
    let design = Design::new(source);
    let mut warnings = Vec::new();
    let mut strata = BTreeMap::new();
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for cell in &design.strata {
        let name = format!("stratum {}", cell.stratum.stratum_id);
        if cell.schools.is_empty() {
            return Err(BoundsError::empty(name, "no sampled schools"));
        }
        let factor = design.stratum_factor(cell, use_replacements)?;
        let schools: Vec<&SchoolCell> = cell.schools.iter().collect();
        let stats = design.cell(&schools, pv, Weighting::FullyAdjusted(factor), &name, &mut warnings)?;
        let ing = stats.ingredients;
        strata.insert(
            cell.stratum.stratum_id.clone(),
            StratumBounds {
                share: cell.stratum.share,
                lower: ing.mu,
                upper: ing.mu,
                ingredients: ing,
                school_factor: Some(factor),
            },
        );
        values.extend_from_slice(stats.sample.values());
        weights.extend_from_slice(stats.sample.weights());
    }
    let sample = WeightedSample::new(values, weights)?;
    let point = weighted_mean(&sample);
    let overall = design.overall(pv, None, Weighting::Design, &mut warnings)?;
    let ing = Ingredients {
        mu: point,
        participants: sample.len(),
        ..overall
    };
    let regime = if use_replacements {
        Regime::StandardWithReplacements
    } else {
        Regime::Standard
    };
    let mut region = IdentificationRegion::new(regime, None, point, point, ing)?;
    region.per_stratum = Some(strata);
    region.warnings = dedup(warnings);
    Ok(region)
}

/// A1 + A4. The default upper bound is the participant mean; `strict_form`
/// takes the smaller of the mean and the A1 upper bound, warning when the
/// latter binds.
pub fn bounds_monotone(dataset: &Dataset, pv: usize, alpha: f64, strict_form: bool) -> Result<IdentificationRegion> {
    let a1 = bounds_a1(dataset, pv, alpha)?;
    let mu = a1.ingredients.mu;
    let mut warnings = Vec::new();
    let upper = if strict_form && a1.upper < mu {
        warnings.push(format!(
            "upper bound set by the {} quantile ({}) rather than the participant mean ({mu})",
            1.0 - alpha,
            a1.upper
        ));
        a1.upper
    } else {
        mu
    };
    let mut region = IdentificationRegion::new(Regime::Monotone, Some(alpha), a1.lower, upper, a1.ingredients)?;
    region.warnings = warnings;
    Ok(region)
}

/// A1.1 + A4.1: A1.1 lower bound, share-weighted stratum participant means above.
pub fn bounds_monotone_stratified(dataset: &Dataset, pv: usize, alpha: f64) -> Result<IdentificationRegion> {
    check_alpha(alpha)?;
    let design = Design::new(dataset);
    let mut warnings = Vec::new();
    let (mut strata, order) = a1_strata(&design, pv, alpha, &mut warnings)?;
    for b in strata.values_mut() {
        b.upper = b.ingredients.mu;
    }
    let ing = design.overall(pv, Some(alpha), Weighting::Design, &mut warnings)?;
    stratified_region(
        Regime::StratifiedMonotone,
        Some(alpha),
        strata,
        order,
        ing,
        dedup(warnings),
    )
}

/// Dispatch on the assumption set for one plausible value.
pub fn estimate(dataset: &Dataset, assumptions: &AssumptionSet, pv: usize) -> Result<IdentificationRegion> {
    assumptions.check()?;
    let alpha = assumptions.alpha.unwrap_or(0.5);
    match assumptions.regime {
        Regime::WorstCase => {
            let (lo, hi) = assumptions.support.expect("checked");
            bounds_worst_case(dataset, pv, lo, hi)
        }
        Regime::Quantile => bounds_a1(dataset, pv, alpha),
        Regime::StratifiedQuantile => bounds_a1_stratified(dataset, pv, alpha),
        Regime::SchoolIgnorable => bounds_a12_a2(dataset, pv, alpha),
        Regime::Standard => point_standard(dataset, pv, false),
        Regime::StandardWithReplacements => point_standard(dataset, pv, true),
        Regime::Monotone => bounds_monotone(dataset, pv, alpha, assumptions.strict_monotone),
        Regime::StratifiedMonotone => bounds_monotone_stratified(dataset, pv, alpha),
    }
}
