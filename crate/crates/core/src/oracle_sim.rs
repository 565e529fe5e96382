//! Synthetic populations with known truth, a two-stage sampler, and coverage
//! checks for the identification regions.
//!
//! A population is enumerated in full: every student has an outcome and
//! latent participation flags `z1` (their school would take part if sampled)
//! and `z2` (they would take part if their school did). A census draw samples
//! everything, so sample analogs equal the population quantities they target
//! and identification error is isolated from sampling error.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};
use crate::identification::{check_alpha, AssumptionSet, IdentificationRegion, ORDER_TOLERANCE};
use crate::plausible_values::aggregate_over_pvs;
use crate::survey_model::{strata_from_frame, Dataset, SchoolRecord, StudentRecord, DEFAULT_PV_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MechanismKind {
    /// Participation independent of outcomes within schools and strata.
    IgnorableWithinCells,
    /// Higher achievers (and higher-achieving schools) participate more often.
    MonotoneSelection,
    /// Ignorable within strata, but strata differ in outcomes and participation.
    StratumHeterogeneous,
    /// Non-participant stratum means placed at a chosen point between the
    /// participant quantiles.
    AdversarialWithinQuantiles,
}

impl std::str::FromStr for MechanismKind {
    type Err = BoundsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IGNORABLE" | "IGNORABLE_WITHIN_CELLS" => Ok(MechanismKind::IgnorableWithinCells),
            "MONOTONE" | "MONOTONE_SELECTION" => Ok(MechanismKind::MonotoneSelection),
            "STRATUM_HETEROGENEOUS" | "HETEROGENEOUS" => Ok(MechanismKind::StratumHeterogeneous),
            "ADVERSARIAL" | "ADVERSARIAL_WITHIN_QUANTILES" => Ok(MechanismKind::AdversarialWithinQuantiles),
            _ => Err(BoundsError::config(format!("unknown mechanism `{s}`"))),
        }
    }
}

/// Stratum-dependent location-scale outcome model with optional skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub mean: f64,
    /// Distance between the lowest and highest stratum location, halved.
    pub stratum_spread: f64,
    pub school_sd: f64,
    pub student_sd: f64,
    /// In [-1, 1]; 0 gives normal student deviations.
    pub skew: f64,
}

impl Default for OutcomeModel {
    fn default() -> Self {
        OutcomeModel {
            mean: 500.0,
            stratum_spread: 40.0,
            school_sd: 25.0,
            student_sd: 80.0,
            skew: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    /// Baseline school participation probability, in (0, 1].
    pub school_rate: f64,
    /// Baseline within-school student participation probability, in (0, 1].
    pub student_rate: f64,
    /// Selection strength (monotone) or cross-stratum heterogeneity, in [0, 10].
    pub strength: f64,
    /// Adversarial placement: 0 puts the non-participant mean at the lower
    /// quantile, 1 at the upper one; values outside [0, 1] break the premise.
    pub position: f64,
    /// Quantile level used by the adversarial placement, in (0, 0.5].
    pub alpha: f64,
    pub outcome: OutcomeModel,
    pub seed: u64,
}

impl MechanismConfig {
    pub fn new(kind: MechanismKind, seed: u64) -> Self {
        MechanismConfig {
            kind,
            school_rate: 0.85,
            student_rate: 0.88,
            strength: 1.0,
            position: 0.5,
            alpha: 0.05,
            outcome: OutcomeModel::default(),
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        let in_unit = |x: f64| x > 0.0 && x <= 1.0;
        if !in_unit(self.school_rate) || !in_unit(self.student_rate) {
            return Err(BoundsError::config("participation rates must lie in (0, 1]"));
        }
        if !(0.0..=10.0).contains(&self.strength) {
            return Err(BoundsError::config(format!(
                "strength {} outside [0, 10]",
                self.strength
            )));
        }
        if !(-5.0..=6.0).contains(&self.position) {
            return Err(BoundsError::config(format!(
                "position {} outside [-5, 6]",
                self.position
            )));
        }
        check_alpha(self.alpha)?;
        let o = &self.outcome;
        if !(o.mean.is_finite() && o.stratum_spread.is_finite() && o.school_sd >= 0.0 && o.student_sd > 0.0) {
            return Err(BoundsError::config(
                "outcome model needs finite location and positive student sd",
            ));
        }
        if !(-1.0..=1.0).contains(&o.skew) {
            return Err(BoundsError::config(format!("skew {} outside [-1, 1]", o.skew)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationShape {
    pub strata: usize,
    pub schools_per_stratum: usize,
    /// Mean enrollment per school.
    pub students_per_school: usize,
    /// Relative enrollment variation, in [0, 1); 0 gives equal-size schools.
    pub enrollment_spread: f64,
}

impl PopulationShape {
    pub fn new(strata: usize, schools_per_stratum: usize, students_per_school: usize) -> Self {
        PopulationShape {
            strata,
            schools_per_stratum,
            students_per_school,
            enrollment_spread: 0.5,
        }
    }

    pub fn equal_sizes(mut self) -> Self {
        self.enrollment_spread = 0.0;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStratum {
    pub id: String,
    pub share: f64,
    pub enrollment: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSchool {
    pub id: String,
    pub stratum: usize,
    pub enrollment: u64,
    /// Index of the school's first student in `students`.
    pub first_student: usize,
    pub propensity: f64,
    pub z1: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthStudent {
    pub school: usize,
    pub y: f64,
    pub z1: bool,
    pub z2: bool,
}

impl SynthStudent {
    /// Participates: school and student both take part.
    pub fn z(&self) -> bool {
        self.z1 && self.z2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPopulation {
    pub strata: Vec<SynthStratum>,
    pub schools: Vec<SynthSchool>,
    pub students: Vec<SynthStudent>,
    pub mechanism: MechanismConfig,
    pub shape: PopulationShape,
}

impl SyntheticPopulation {
    pub fn school_students(&self, school: usize) -> &[SynthStudent] {
        let s = &self.schools[school];
        &self.students[s.first_student..s.first_student + s.enrollment as usize]
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

/// Position of stratum `w` in [-1, 1].
fn stratum_position(w: usize, strata: usize) -> f64 {
    if strata <= 1 {
        0.0
    } else {
        let half = (strata - 1) as f64 / 2.0;
        (w as f64 - half) / half
    }
}

pub fn generate_population(config: &MechanismConfig, shape: &PopulationShape) -> Result<SyntheticPopulation> {
    config.check()?;
    if shape.strata == 0 || shape.schools_per_stratum == 0 || shape.students_per_school == 0 {
        return Err(BoundsError::config("population counts must be at least 1"));
    }
    if !(0.0..1.0).contains(&shape.enrollment_spread) {
        return Err(BoundsError::config("enrollment_spread outside [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let o = config.outcome;
    let heterogeneous = config.kind == MechanismKind::StratumHeterogeneous;
    let monotone = config.kind == MechanismKind::MonotoneSelection;

    let mut schools = Vec::new();
    let mut students = Vec::new();
    let mut strata = Vec::new();
    for w in 0..shape.strata {
        let pos = stratum_position(w, shape.strata);
        let spread = if heterogeneous {
            o.stratum_spread * (1.0 + config.strength)
        } else {
            o.stratum_spread
        };
        let location = o.mean + spread * pos;
        let sd = o.student_sd * (1.0 + 0.2 * pos);
        let (school_shift, student_shift) = if heterogeneous {
            (config.strength * pos, 0.5 * config.strength * pos)
        } else {
            (0.0, 0.0)
        };
        let mut stratum_enrollment = 0;
        for j in 0..shape.schools_per_stratum {
            let m = shape.students_per_school as f64;
            let jitter = if shape.enrollment_spread > 0.0 {
                rng.random_range(-shape.enrollment_spread..shape.enrollment_spread)
            } else {
                0.0
            };
            let enrollment = ((m * (1.0 + jitter)).round() as u64).max(1);
            let effect = o.school_sd * std_normal.sample(&mut rng);
            let noise: f64 = std_normal.sample(&mut rng);
            let school_logit = logit(config.school_rate)
                + school_shift
                + if monotone && o.school_sd > 0.0 {
                    config.strength * effect / o.school_sd
                } else {
                    0.3 * noise
                };
            let propensity = if config.school_rate >= 1.0 {
                1.0
            } else {
                logistic(school_logit)
            };
            let z1 = rng.random_bool(propensity);
            let student_base = logit(config.student_rate) + student_shift + 0.3 * std_normal.sample(&mut rng);

            let first_student = students.len();
            let idx = schools.len();
            for _ in 0..enrollment {
                let zdev: f64 = std_normal.sample(&mut rng);
                let dev =
                    (zdev + o.skew * (zdev * zdev - 1.0) / std::f64::consts::SQRT_2) / (1.0 + o.skew * o.skew).sqrt();
                let y = location + effect + sd * dev;
                let p2 = if config.student_rate >= 1.0 {
                    1.0
                } else if monotone {
                    logistic(student_base + config.strength * dev)
                } else {
                    logistic(student_base)
                };
                let z2 = rng.random_bool(p2);
                students.push(SynthStudent { school: idx, y, z1, z2 });
            }
            schools.push(SynthSchool {
                id: format!("W{w:02}S{j:05}"),
                stratum: w,
                enrollment,
                first_student,
                propensity,
                z1,
            });
            stratum_enrollment += enrollment;
        }
        strata.push(SynthStratum {
            id: format!("W{w:02}"),
            share: 0.0,
            enrollment: stratum_enrollment,
        });
    }
    let total: u64 = strata.iter().map(|s| s.enrollment).sum();
    for s in &mut strata {
        s.share = s.enrollment as f64 / total as f64;
    }

    let mut pop = SyntheticPopulation {
        strata,
        schools,
        students,
        mechanism: *config,
        shape: *shape,
    };
    if config.kind == MechanismKind::AdversarialWithinQuantiles {
        place_nonparticipants(&mut pop);
    }
    Ok(pop)
}

/// Smallest sorted value whose cumulative fraction reaches `alpha`, by
/// counting: k = ⌈alpha·n⌉ with a small slack for representation error.
fn census_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let k = ((alpha * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(n) - 1]
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Shift each stratum's non-participants so their mean sits at
/// `Q_a + t (Q_{1-a} - Q_a)` of that stratum's participants. For placements
/// inside [0, 1], one common t is chosen so that the overall
/// non-participant mean also sits at `position` between the overall
/// participant quantiles, when that is attainable.
fn place_nonparticipants(pop: &mut SyntheticPopulation) {
    let alpha = pop.mechanism.alpha;
    let position = pop.mechanism.position;
    let w_count = pop.strata.len();

    let mut part: Vec<Vec<f64>> = vec![Vec::new(); w_count];
    let mut non: Vec<Vec<usize>> = vec![Vec::new(); w_count];
    for (i, st) in pop.students.iter().enumerate() {
        let w = pop.schools[st.school].stratum;
        if st.z() {
            part[w].push(st.y);
        } else {
            non[w].push(i);
        }
    }
    let quant: Vec<Option<(f64, f64)>> = part
        .iter()
        .map(|v| {
            if v.is_empty() {
                None
            } else {
                let s = sorted(v.clone());
                Some((census_quantile(&s, alpha), census_quantile(&s, 1.0 - alpha)))
            }
        })
        .collect();

    let mut t = position;
    if (0.0..=1.0).contains(&position) {
        let all_part = sorted(part.iter().flatten().copied().collect());
        let n0: usize = non
            .iter()
            .zip(&quant)
            .filter(|(_, q)| q.is_some())
            .map(|(n, _)| n.len())
            .sum();
        if !all_part.is_empty() && n0 > 0 {
            let (ga, gu) = (
                census_quantile(&all_part, alpha),
                census_quantile(&all_part, 1.0 - alpha),
            );
            let target = ga + position * (gu - ga);
            let (mut lo, mut hi) = (0.0, 0.0);
            for (n, q) in non.iter().zip(&quant) {
                if let Some((qa, qu)) = q {
                    lo += n.len() as f64 * qa;
                    hi += n.len() as f64 * qu;
                }
            }
            let (lo, hi) = (lo / n0 as f64, hi / n0 as f64);
            if hi > lo {
                t = ((target - lo) / (hi - lo)).clamp(0.0, 1.0);
            }
        }
    }

    for w in 0..w_count {
        let Some((qa, qu)) = quant[w] else { continue };
        if non[w].is_empty() {
            continue;
        }
        let goal = qa + t * (qu - qa);
        let current = non[w].iter().map(|&i| pop.students[i].y).sum::<f64>() / non[w].len() as f64;
        let shift = goal - current;
        for &i in &non[w] {
            pop.students[i].y += shift;
        }
    }
}

// ---------------------------------------------------------------------------
// Census truth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumTruth {
    pub share: f64,
    pub mean: f64,
    pub participant_mean: Option<f64>,
    pub nonparticipant_mean: Option<f64>,
    /// P(z = 1 | w).
    pub p: f64,
    /// P(z1 = 1 | w), enrollment-weighted.
    pub p1: f64,
    /// P(z2 = 1 | z1 = 1, w).
    pub p2: Option<f64>,
    pub q_alpha: Option<f64>,
    pub q_upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Premises {
    /// Overall non-participant mean within the overall participant quantiles.
    pub a1: bool,
    /// Same within every stratum.
    pub a1_1: bool,
    /// Non-participant mean at most the participant mean.
    pub a4: bool,
    /// Same within every stratum.
    pub a4_1: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub students: usize,
    pub mean: f64,
    pub participant_mean: Option<f64>,
    pub nonparticipant_mean: Option<f64>,
    /// P(z = 1).
    pub p: f64,
    /// P(z1 = 1).
    pub p1: f64,
    /// P(z2 = 1 | z1 = 1).
    pub p2: Option<f64>,
    pub alpha: f64,
    pub q_alpha: Option<f64>,
    pub q_upper: Option<f64>,
    pub strata: BTreeMap<String, StratumTruth>,
    pub premises: Premises,
}

fn mean_of(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

struct Group {
    all: Vec<f64>,
    part: Vec<f64>,
    non: Vec<f64>,
    in_participating_schools: usize,
}

impl Group {
    fn new() -> Self {
        Group {
            all: Vec::new(),
            part: Vec::new(),
            non: Vec::new(),
            in_participating_schools: 0,
        }
    }

    fn push(&mut self, st: &SynthStudent) {
        self.all.push(st.y);
        if st.z() {
            self.part.push(st.y);
        } else {
            self.non.push(st.y);
        }
        if st.z1 {
            self.in_participating_schools += 1;
        }
    }

    fn quantiles(&self, alpha: f64) -> (Option<f64>, Option<f64>) {
        if self.part.is_empty() {
            return (None, None);
        }
        let s = sorted(self.part.clone());
        (Some(census_quantile(&s, alpha)), Some(census_quantile(&s, 1.0 - alpha)))
    }

    fn p2(&self) -> Option<f64> {
        (self.in_participating_schools > 0).then(|| self.part.len() as f64 / self.in_participating_schools as f64)
    }
}

fn within(q: (Option<f64>, Option<f64>), m: Option<f64>) -> bool {
    match (q, m) {
        (_, None) => true,
        ((Some(a), Some(b)), Some(m)) => a - ORDER_TOLERANCE <= m && m <= b + ORDER_TOLERANCE,
        _ => false,
    }
}

fn below(non: Option<f64>, part: Option<f64>) -> bool {
    match (non, part) {
        (Some(n), Some(p)) => n <= p + ORDER_TOLERANCE,
        _ => true,
    }
}

/// Population quantities at the mechanism's quantile level.
pub fn census_truth(pop: &SyntheticPopulation) -> TruthReport {
    census_truth_at(pop, pop.mechanism.alpha)
}

/// Population quantities by full enumeration of every student.
pub fn census_truth_at(pop: &SyntheticPopulation, alpha: f64) -> TruthReport {
    let mut overall = Group::new();
    let mut groups: Vec<Group> = pop.strata.iter().map(|_| Group::new()).collect();
    for st in &pop.students {
        overall.push(st);
        groups[pop.schools[st.school].stratum].push(st);
    }

    let n = pop.students.len() as f64;
    let mut strata = BTreeMap::new();
    let mut a1_1 = true;
    let mut a4_1 = true;
    for (s, g) in pop.strata.iter().zip(&groups) {
        let (qa, qu) = g.quantiles(alpha);
        let participant_mean = mean_of(&g.part);
        let nonparticipant_mean = mean_of(&g.non);
        a1_1 &= within((qa, qu), nonparticipant_mean);
        a4_1 &= below(nonparticipant_mean, participant_mean);
        strata.insert(
            s.id.clone(),
            StratumTruth {
                share: s.share,
                mean: mean_of(&g.all).unwrap_or(f64::NAN),
                participant_mean,
                nonparticipant_mean,
                p: g.part.len() as f64 / g.all.len() as f64,
                p1: g.in_participating_schools as f64 / g.all.len() as f64,
                p2: g.p2(),
                q_alpha: qa,
                q_upper: qu,
            },
        );
    }
    let (qa, qu) = overall.quantiles(alpha);
    let participant_mean = mean_of(&overall.part);
    let nonparticipant_mean = mean_of(&overall.non);
    TruthReport {
        students: pop.students.len(),
        mean: mean_of(&overall.all).unwrap_or(f64::NAN),
        participant_mean,
        nonparticipant_mean,
        p: overall.part.len() as f64 / n,
        p1: overall.in_participating_schools as f64 / n,
        p2: overall.p2(),
        alpha,
        q_alpha: qa,
        q_upper: qu,
        strata,
        premises: Premises {
            a1: within((qa, qu), nonparticipant_mean),
            a1_1,
            a4: below(nonparticipant_mean, participant_mean),
            a4_1,
        },
    }
}

// ---------------------------------------------------------------------------
// Sampling

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDesign {
    /// Schools drawn per stratum; `None` takes every school.
    pub schools_per_stratum: Option<usize>,
    /// Students drawn per school; `None` (or a count at or above enrollment)
    /// takes every student.
    pub students_per_school: Option<usize>,
    /// Probability that a sampled non-participating school receives a
    /// replacement from the unsampled participating schools of its stratum.
    pub replacement_rate: f64,
    pub pv_count: usize,
}

impl SampleDesign {
    pub fn census() -> Self {
        SampleDesign {
            schools_per_stratum: None,
            students_per_school: None,
            replacement_rate: 0.0,
            pv_count: DEFAULT_PV_COUNT,
        }
    }

    pub fn new(schools_per_stratum: usize, students_per_school: usize) -> Self {
        SampleDesign {
            schools_per_stratum: Some(schools_per_stratum),
            students_per_school: Some(students_per_school),
            ..SampleDesign::census()
        }
    }

    pub fn with_replacements(mut self, rate: f64) -> Self {
        self.replacement_rate = rate;
        self
    }

    pub fn is_census(&self) -> bool {
        self.schools_per_stratum.is_none() && self.students_per_school.is_none()
    }
}

/// Inclusion probabilities for drawing `n` of the given sizes with
/// probability proportional to size; units whose share would reach 1 are
/// taken with certainty and the rest re-allocated.
pub fn pps_inclusion(sizes: &[f64], n: usize) -> Vec<f64> {
    let mut pi = vec![0.0; sizes.len()];
    let mut open: Vec<usize> = (0..sizes.len()).collect();
    let mut remaining = n;
    loop {
        if remaining == 0 {
            break;
        }
        let total: f64 = open.iter().map(|&i| sizes[i]).sum();
        let (certain, rest): (Vec<usize>, Vec<usize>) =
            open.iter().partition(|&&i| remaining as f64 * sizes[i] >= total);
        if certain.is_empty() {
            for &i in &rest {
                pi[i] = remaining as f64 * sizes[i] / total;
            }
            break;
        }
        for &i in &certain {
            pi[i] = 1.0;
        }
        remaining = remaining.saturating_sub(certain.len());
        open = rest;
    }
    pi
}

/// Systematic pps selection over the frame in the given order.
fn systematic_pps(order: &[usize], pi: &[f64], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut selected: Vec<usize> = order.iter().copied().filter(|&i| pi[i] >= 1.0).collect();
    let open: Vec<usize> = order.iter().copied().filter(|&i| pi[i] < 1.0 && pi[i] > 0.0).collect();
    let expected: f64 = open.iter().map(|&i| pi[i]).sum();
    let n = expected.round() as usize;
    if n == 0 {
        return selected;
    }
    let start: f64 = rng.random::<f64>();
    let mut cum = 0.0;
    let mut k = 0;
    for (pos, &i) in open.iter().enumerate() {
        cum += pi[i];
        let last = pos + 1 == open.len();
        while k < n && (start + (k as f64) < cum || last) {
            selected.push(i);
            k += 1;
        }
    }
    selected.sort_unstable();
    selected.dedup();
    selected
}

fn student_row(
    pop: &SyntheticPopulation,
    school_id: &str,
    student: usize,
    local: usize,
    weight: f64,
    pv_count: usize,
) -> StudentRecord {
    let st = &pop.students[student];
    let id = format!("{school_id}-{local:05}");
    if st.z2 {
        StudentRecord::participant(id, school_id, weight, vec![st.y; pv_count])
    } else {
        StudentRecord::non_participant(id, school_id, weight)
    }
}

/// Draw a two-stage sample: schools by systematic pps on a randomly permuted
/// frame within each stratum, then students by simple random sampling within
/// each school. Weights are exact inverse inclusion probabilities.
pub fn draw_sample(pop: &SyntheticPopulation, design: &SampleDesign, seed: u64) -> Result<Dataset> {
    draw_sample_with(pop, design, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn draw_sample_with(pop: &SyntheticPopulation, design: &SampleDesign, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    if design.pv_count == 0 {
        return Err(BoundsError::config("pv_count must be at least 1"));
    }
    if !(0.0..=1.0).contains(&design.replacement_rate) {
        return Err(BoundsError::config("replacement_rate outside [0, 1]"));
    }
    let mut schools = Vec::new();
    let mut students = Vec::new();
    let mut frames = Vec::new();
    for (w, stratum) in pop.strata.iter().enumerate() {
        frames.push((stratum.id.clone(), stratum.enrollment as f64));
        let members: Vec<usize> = (0..pop.schools.len())
            .filter(|&j| pop.schools[j].stratum == w)
            .collect();
        let n = design.schools_per_stratum.unwrap_or(members.len());
        if n > members.len() {
            return Err(BoundsError::config(format!(
                "design asks for {n} schools in stratum {} which has {}",
                stratum.id,
                members.len()
            )));
        }
        let sizes: Vec<f64> = members.iter().map(|&j| pop.schools[j].enrollment as f64).collect();
        let pi = pps_inclusion(&sizes, n);
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.shuffle(rng);
        let chosen = systematic_pps(&order, &pi, rng);
        let chosen_set: std::collections::HashSet<usize> = chosen.iter().copied().collect();

        for &local in &chosen {
            let j = members[local];
            let school = &pop.schools[j];
            let school_weight = 1.0 / pi[local];
            let draws = students_for(school.enrollment, design.students_per_school, rng);
            let sampled = draws.len() as u64;
            if school.z1 {
                let within = sampled as f64 / school.enrollment as f64;
                let weight = 1.0 / (pi[local] * within);
                for (k, &i) in draws.iter().enumerate() {
                    students.push(student_row(
                        pop,
                        &school.id,
                        school.first_student + i,
                        k,
                        weight,
                        design.pv_count,
                    ));
                }
            }
            schools.push(SchoolRecord::new(
                school.id.clone(),
                stratum.id.clone(),
                school.z1,
                school.enrollment,
                school_weight,
                if school.z1 { sampled } else { 0 },
            ));

            if !school.z1 && design.replacement_rate > 0.0 && rng.random_bool(design.replacement_rate) {
                // nearest-size unsampled participating school
                let candidate = (0..members.len())
                    .filter(|l| !chosen_set.contains(l) && pop.schools[members[*l]].z1)
                    .filter(|l| {
                        !schools
                            .iter()
                            .any(|s: &SchoolRecord| s.school_id == pop.schools[members[*l]].id)
                    })
                    .min_by_key(|&l| (pop.schools[members[l]].enrollment as i64 - school.enrollment as i64).abs());
                if let Some(l) = candidate {
                    let r = &pop.schools[members[l]];
                    let draws = students_for(r.enrollment, design.students_per_school, rng);
                    let within = draws.len() as f64 / r.enrollment as f64;
                    let weight = school_weight / within;
                    for (k, &i) in draws.iter().enumerate() {
                        students.push(student_row(pop, &r.id, r.first_student + i, k, weight, design.pv_count));
                    }
                    schools.push(
                        SchoolRecord::new(
                            r.id.clone(),
                            stratum.id.clone(),
                            true,
                            r.enrollment,
                            school_weight,
                            draws.len() as u64,
                        )
                        .replacing(school.id.clone()),
                    );
                }
            }
        }
    }
    Ok(Dataset {
        students,
        schools,
        strata: strata_from_frame(frames),
        pv_count: design.pv_count,
        filled_slots: BTreeMap::new(),
    })
}

fn students_for(enrollment: u64, per_school: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = enrollment as usize;
    match per_school {
        Some(k) if k < m => {
            let mut v = rand::seq::index::sample(rng, m, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..m).collect(),
    }
}

// ---------------------------------------------------------------------------
// Coverage

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: String,
    pub truth_mean: f64,
    pub premises: Premises,
    pub census_region: Option<IdentificationRegion>,
    pub census_contained: Option<bool>,
    pub replicates: usize,
    /// Replicates where the estimate was defined.
    pub defined: usize,
    pub contained: usize,
    pub coverage: Option<f64>,
    pub mean_lower: Option<f64>,
    pub mean_upper: Option<f64>,
    pub mean_width: Option<f64>,
}

/// Independent stream per replicate index, so parallel order never matters.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64 + 1);
    rng
}

/// Fraction of sampled replicates whose region contains the true mean, plus
/// a single census-mode check.
pub fn verify_coverage(
    pop: &SyntheticPopulation,
    assumptions: &AssumptionSet,
    replicates: usize,
    design: &SampleDesign,
    seed: u64,
) -> Result<CoverageReport> {
    assumptions.check()?;
    let truth = census_truth_at(pop, assumptions.alpha.unwrap_or(pop.mechanism.alpha));

    let census = draw_sample(pop, &SampleDesign::census(), seed)?;
    let census_region = aggregate_over_pvs(&census, assumptions).ok().map(|a| a.combined);
    let census_contained = census_region.as_ref().map(|r| r.contains(truth.mean));

    let results: Vec<Option<(f64, f64)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let sample = draw_sample_with(pop, design, &mut rng).ok()?;
            let region = aggregate_over_pvs(&sample, assumptions).ok()?.combined;
            Some((region.lower, region.upper))
        })
        .collect();

    let defined: Vec<(f64, f64)> = results.into_iter().flatten().collect();
    let contained = defined
        .iter()
        .filter(|(lo, hi)| lo - ORDER_TOLERANCE <= truth.mean && truth.mean <= hi + ORDER_TOLERANCE)
        .count();
    let avg = |f: fn(&(f64, f64)) -> f64| {
        (!defined.is_empty()).then(|| defined.iter().map(f).sum::<f64>() / defined.len() as f64)
    };
    Ok(CoverageReport {
        scenario: assumptions.scenario_label(),
        truth_mean: truth.mean,
        premises: truth.premises,
        census_region,
        census_contained,
        replicates,
        defined: defined.len(),
        contained,
        coverage: (!defined.is_empty()).then(|| contained as f64 / defined.len() as f64),
        mean_lower: avg(|r| r.0),
        mean_upper: avg(|r| r.1),
        mean_width: avg(|r| r.1 - r.0),
    })
}
