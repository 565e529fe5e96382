//! Sample-analog building blocks: weighted means and quantiles, participation
//! rates, and the school/stratum non-response adjustment factors.
//!
//! # Quantile convention
//!
//! [`weighted_quantile`] is the left-continuous inverse of the weighted
//! empirical CDF: the smallest observed value whose normalized cumulative
//! weight reaches `alpha`. Equal values are merged first, so input order never
//! matters. Bound endpoints depend directly on this choice.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};
use crate::survey_model::{Dataset, SchoolRecord, StratumRecord, StudentRecord};

/// Relative slack when comparing a cumulative weight fraction against `alpha`.
pub const CDF_TOLERANCE: f64 = 1e-12;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Outcome values paired with positive finite weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(BoundsError::InvalidSample(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if values.is_empty() {
            return Err(BoundsError::empty("weighted sample", "no observations"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(BoundsError::InvalidSample(format!(
                "weight {w} is not positive and finite"
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(BoundsError::InvalidSample(format!("value {v} is not finite")));
        }
        Ok(WeightedSample { values, weights })
    }

    pub fn unweighted(values: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; values.len()];
        Self::new(values, weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Σ wᵢyᵢ / Σ wᵢ.
pub fn weighted_mean(sample: &WeightedSample) -> f64 {
    let num = compensated_sum(sample.values.iter().zip(&sample.weights).map(|(y, w)| y * w));
    let mean = num / sample.total_weight();
    // rounding may leave the ratio a hair outside the data range
    mean.clamp(sample.min(), sample.max())
}

/// Weighted empirical CDF over distinct sorted values.
#[derive(Debug, Clone)]
pub struct WeightedCdf {
    values: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl WeightedCdf {
    pub fn new(sample: &WeightedSample) -> Self {
        let mut order: Vec<usize> = (0..sample.len()).collect();
        order.sort_by(|&a, &b| sample.values[a].total_cmp(&sample.values[b]));

        let mut values: Vec<f64> = Vec::new();
        let mut masses: Vec<CompensatedSum> = Vec::new();
        for i in order {
            let v = sample.values[i];
            if values.last() != Some(&v) {
                values.push(v);
                masses.push(CompensatedSum::new());
            }
            masses.last_mut().unwrap().add(sample.weights[i]);
        }
        let mut running = CompensatedSum::new();
        let cumulative = masses
            .iter()
            .map(|m| {
                running.add(m.value());
                running.value()
            })
            .collect();
        WeightedCdf {
            values,
            cumulative,
            total: running.value(),
        }
    }

    /// Smallest value v with F(v) ≥ alpha.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let threshold = alpha * self.total - CDF_TOLERANCE * self.total;
        let k = self.cumulative.partition_point(|&c| c < threshold);
        self.values[k.min(self.values.len() - 1)]
    }

    /// Fraction of weight at or below `v`.
    pub fn cdf(&self, v: f64) -> f64 {
        let k = self.values.partition_point(|&x| x <= v);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1] / self.total
        }
    }

    pub fn distinct_values(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn check_probability(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(BoundsError::config(format!("quantile level {alpha} outside (0, 1)")))
    }
}

pub fn weighted_quantile(sample: &WeightedSample, alpha: f64) -> Result<f64> {
    check_probability(alpha)?;
    Ok(WeightedCdf::new(sample).quantile(alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipationEstimates {
    /// Students enrolled in participating schools.
    pub p1: f64,
    /// Students participating within participating schools.
    pub p2: f64,
    pub p: f64,
}

impl ParticipationEstimates {
    pub fn new(p1: f64, p2: f64) -> Self {
        ParticipationEstimates { p1, p2, p: p1 * p2 }
    }
}

/// Σ π_j⁻¹ M_j z1_j / Σ π_j⁻¹ M_j over originally sampled schools;
/// replacement schools are skipped.
pub fn school_participation_rate<'a, I>(schools: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a SchoolRecord>,
{
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for s in schools.into_iter().filter(|s| !s.is_replacement()) {
        let size = s.school_weight * s.enrollment as f64;
        den.add(size);
        if s.z1 {
            num.add(size);
        }
    }
    let den = den.value();
    if den <= 0.0 {
        return Err(BoundsError::empty("schools", "no sampled schools"));
    }
    Ok(num.value() / den)
}

/// Sampled students of a school: the larger of its row count and its
/// declared `sampled_student_count`.
pub fn sampled_students(school: &SchoolRecord, students: &[&StudentRecord]) -> u64 {
    school.sampled_student_count.max(students.len() as u64)
}

/// Weight carried by sampled non-participants that have no row of their own.
/// Students within a school are drawn with equal probability, so they share
/// the weight of the recorded rows, or π_j⁻¹·M_j/N_j when no rows exist.
fn absent_row_weight(school: &SchoolRecord, students: &[&StudentRecord]) -> f64 {
    if students.is_empty() {
        school.school_weight * school.enrollment as f64 / school.sampled_student_count as f64
    } else {
        compensated_sum(students.iter().map(|s| s.student_weight)) / students.len() as f64
    }
}

/// Weighted participating and sampled student totals of one participating school.
pub(crate) fn student_totals(school: &SchoolRecord, students: &[&StudentRecord]) -> (f64, f64) {
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for st in students {
        den.add(st.student_weight);
        if st.z2 {
            num.add(st.student_weight);
        }
    }
    let absent = sampled_students(school, students) - students.len() as u64;
    if absent > 0 {
        den.add(absent as f64 * absent_row_weight(school, students));
    }
    (num.value(), den.value())
}

/// Student participation over a set of schools (Σ π_ij⁻¹ z1 z2 / Σ π_ij⁻¹ z1).
pub(crate) fn student_participation_over<'a, I>(
    schools: I,
    by_school: &HashMap<&str, Vec<&StudentRecord>>,
) -> Result<f64>
where
    I: IntoIterator<Item = &'a SchoolRecord>,
{
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    let empty = Vec::new();
    for s in schools.into_iter().filter(|s| s.z1 && !s.is_replacement()) {
        let rows = by_school.get(s.school_id.as_str()).unwrap_or(&empty);
        let (n, d) = student_totals(s, rows);
        num.add(n);
        den.add(d);
    }
    let den = den.value();
    if den <= 0.0 {
        return Err(BoundsError::empty(
            "students",
            "no sampled students in participating schools",
        ));
    }
    Ok(num.value() / den)
}

pub fn student_participation_rate(dataset: &Dataset) -> Result<f64> {
    student_participation_over(&dataset.schools, &dataset.students_by_school())
}

pub fn participation_rate(dataset: &Dataset) -> Result<ParticipationEstimates> {
    let p1 = school_participation_rate(&dataset.schools)?;
    let p2 = student_participation_rate(dataset)?;
    Ok(ParticipationEstimates::new(p1, p2))
}

/// π_j^f: participating over sampled students in one participating school.
pub fn school_adjustment_factor(school: &SchoolRecord, students: &[&StudentRecord]) -> Result<f64> {
    if !school.z1 {
        return Err(BoundsError::empty(
            format!("school {}", school.school_id),
            "adjustment factor of a non-participating school",
        ));
    }
    let sampled = sampled_students(school, students);
    if sampled == 0 {
        return Err(BoundsError::empty(
            format!("school {}", school.school_id),
            "no sampled students",
        ));
    }
    let participating = students.iter().filter(|s| s.z2).count();
    Ok(participating as f64 / sampled as f64)
}

/// π_w^f: participating over sampled schools of a stratum.
///
/// `schools` are the stratum's school rows (replacement rows may be among
/// them, they never count as sampled); `filled_slots` marks recipients filled
/// in a linked view. With `use_replacements`, a filled recipient counts as
/// participating.
pub fn stratum_adjustment_factor(
    stratum: &StratumRecord,
    schools: &[&SchoolRecord],
    filled_slots: &BTreeMap<String, String>,
    use_replacements: bool,
) -> Result<f64> {
    let filled = |id: &str| {
        filled_slots.contains_key(id) || schools.iter().any(|s| s.z1 && s.replacement_of.as_deref() == Some(id))
    };
    let originals: Vec<&&SchoolRecord> = schools.iter().filter(|s| !s.is_replacement()).collect();
    if originals.is_empty() {
        return Err(BoundsError::empty(
            format!("stratum {}", stratum.stratum_id),
            "no sampled schools",
        ));
    }
    let participating = originals
        .iter()
        .filter(|s| {
            let linked = filled_slots.contains_key(&s.school_id);
            (s.z1 && !linked) || (use_replacements && filled(&s.school_id))
        })
        .count();
    Ok(participating as f64 / originals.len() as f64)
}
