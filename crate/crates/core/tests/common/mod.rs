//! Random small datasets and a brute-force evaluation of every estimator that
//! shares no code with the library beyond the record types.

#![allow(dead_code)]

use std::collections::BTreeMap;

use bounds_kit::{Dataset, SchoolRecord, StudentRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PVS: usize = 5;

/// A dataset with at most `max_students` student rows, every stratum holding
/// at least one participating student. Student weights are multiples of 1/8.
pub fn random_dataset(seed: u64, max_students: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata = rng.random_range(1..=3usize);
    let mut schools = Vec::new();
    let mut students = Vec::new();
    let mut frames = Vec::new();
    let budget_per_stratum = (max_students / strata).max(1);
    let tie_pool = [420.0, 480.0, 500.0, 555.5];
    for w in 0..strata {
        let sid = format!("w{w}");
        frames.push((sid.clone(), rng.random_range(100..1000) as f64));
        let n_schools = rng.random_range(1..=3usize);
        let mut used = 0;
        for j in 0..n_schools {
            let id = format!("{sid}-s{j}");
            let z1 = j == 0 || rng.random_bool(0.7);
            let weight = 1.0 + 0.5 * rng.random_range(0..8) as f64;
            let enrollment = rng.random_range(5..60u64);
            let rows = if z1 {
                let left = budget_per_stratum.saturating_sub(used);
                let max = left.saturating_sub(n_schools - j - 1).clamp(1, 4);
                rng.random_range(1..=max)
            } else {
                0
            };
            used += rows;
            for i in 0..rows {
                let sw = weight * (0.25 * rng.random_range(4..12) as f64);
                let participates = (j == 0 && i == 0) || rng.random_bool(0.7);
                let rid = format!("{id}-{i}");
                if participates {
                    let pv: Vec<f64> = (0..PVS)
                        .map(|_| {
                            if rng.random_bool(0.4) {
                                tie_pool[rng.random_range(0..tie_pool.len())]
                            } else {
                                rng.random_range(300..700) as f64
                            }
                        })
                        .collect();
                    students.push(StudentRecord::participant(rid, id.clone(), sw, pv));
                } else {
                    students.push(StudentRecord::non_participant(rid, id.clone(), sw));
                }
            }
            schools.push(SchoolRecord::new(id, sid.clone(), z1, enrollment, weight, rows as u64));
        }
    }
    Dataset::new(students, schools, frames, PVS).expect("fixture valid")
}

/// Participant (value, weight) pairs.
pub type Obs = Vec<(f64, f64)>;

pub fn mean(obs: &Obs) -> f64 {
    let tw: f64 = obs.iter().map(|o| o.1).sum();
    obs.iter().map(|o| o.0 * o.1).sum::<f64>() / tw
}

/// Smallest observed v with weighted share of values <= v reaching alpha,
/// found by checking every candidate.
pub fn quantile_enumerated(obs: &Obs, alpha: f64) -> f64 {
    let tw: f64 = obs.iter().map(|o| o.1).sum();
    let mut best = f64::INFINITY;
    for &(v, _) in obs {
        let below: f64 = obs.iter().filter(|o| o.0 <= v).map(|o| o.1).sum();
        if below >= alpha * tw * (1.0 - 1e-12) && v < best {
            best = v;
        }
    }
    best
}

/// Quantile of the unweighted sample obtained by repeating each record
/// `w * k` times; weights must be multiples of `1 / k`.
pub fn quantile_expanded(obs: &Obs, alpha: f64, k: f64) -> f64 {
    let mut copies = Vec::new();
    for &(v, w) in obs {
        let n = (w * k).round() as usize;
        assert!(((w * k) - n as f64).abs() < 1e-9, "weight {w} not a multiple of 1/{k}");
        copies.extend(std::iter::repeat_n(v, n));
    }
    copies.sort_by(f64::total_cmp);
    let idx = ((alpha * copies.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    copies[idx - 1]
}

pub struct Cell {
    pub p1: f64,
    pub p2: f64,
    pub design: Obs,
    pub school_adjusted: Obs,
}

impl Cell {
    pub fn p(&self) -> f64 {
        self.p1 * self.p2
    }
}

fn originals<'a>(ds: &'a Dataset, stratum: Option<&str>) -> Vec<&'a SchoolRecord> {
    ds.schools
        .iter()
        .filter(|s| s.replacement_of.is_none())
        .filter(|s| stratum.is_none_or(|w| s.stratum_id == w))
        .collect()
}

/// Sums written out term by term. Assumes sampled counts equal row counts.
pub fn cell(ds: &Dataset, stratum: Option<&str>, pv: usize) -> Cell {
    let schools = originals(ds, stratum);
    let num: f64 = schools
        .iter()
        .filter(|s| s.z1)
        .map(|s| s.school_weight * s.enrollment as f64)
        .sum();
    let den: f64 = schools.iter().map(|s| s.school_weight * s.enrollment as f64).sum();
    let (mut p2n, mut p2d) = (0.0, 0.0);
    let mut design = Vec::new();
    let mut adjusted = Vec::new();
    for s in schools.iter().filter(|s| s.z1) {
        let rows: Vec<&StudentRecord> = ds.students.iter().filter(|r| r.school_id == s.school_id).collect();
        let part = rows.iter().filter(|r| r.z2).count() as f64;
        let factor = part / rows.len() as f64;
        for r in &rows {
            p2d += r.student_weight;
            if r.z2 {
                p2n += r.student_weight;
                let y = r.pv.as_ref().unwrap()[pv];
                design.push((y, r.student_weight));
                adjusted.push((y, r.student_weight / factor));
            }
        }
    }
    Cell {
        p1: num / den,
        p2: p2n / p2d,
        design,
        school_adjusted: adjusted,
    }
}

pub fn strata(ds: &Dataset) -> Vec<(String, f64)> {
    let total: f64 = ds.strata.iter().map(|s| s.frame_enrollment).sum();
    ds.strata
        .iter()
        .map(|s| (s.stratum_id.clone(), s.frame_enrollment / total))
        .collect()
}

pub struct Oracle {
    pub worst_case: (f64, f64),
    pub a1: (f64, f64),
    pub a1_1: (f64, f64),
    pub a1_2_a2: (f64, f64),
    pub a2_a3: f64,
    pub a1_a4: (f64, f64),
    pub a1_1_a4_1: (f64, f64),
    pub p: f64,
    pub mu: f64,
    pub q: (f64, f64),
}

pub fn oracle(ds: &Dataset, pv: usize, alpha: f64, support: (f64, f64)) -> Oracle {
    let all = cell(ds, None, pv);
    let p = all.p();
    let mu = mean(&all.design);
    let qa = quantile_expanded(&all.design, alpha, 8.0);
    let qu = quantile_expanded(&all.design, 1.0 - alpha, 8.0);

    let (mut s_lo, mut s_hi, mut ig_lo, mut ig_hi, mut mono_hi) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut pooled: Obs = Vec::new();
    for (w, share) in strata(ds) {
        let c = cell(ds, Some(&w), pv);
        let pw = c.p();
        let muw = mean(&c.design);
        s_lo += share * (muw * pw + quantile_enumerated(&c.design, alpha) * (1.0 - pw));
        s_hi += share * (muw * pw + quantile_enumerated(&c.design, 1.0 - alpha) * (1.0 - pw));
        mono_hi += share * muw;

        let mu_adj = mean(&c.school_adjusted);
        ig_lo += share * (mu_adj * c.p1 + quantile_enumerated(&c.school_adjusted, alpha) * (1.0 - c.p1));
        ig_hi += share * (mu_adj * c.p1 + quantile_enumerated(&c.school_adjusted, 1.0 - alpha) * (1.0 - c.p1));

        let schools = originals(ds, Some(&w));
        let pi_wf = schools.iter().filter(|s| s.z1).count() as f64 / schools.len() as f64;
        pooled.extend(c.school_adjusted.iter().map(|&(y, om)| (y, om / pi_wf)));
    }
    let a1_lo = mu * p + qa * (1.0 - p);
    Oracle {
        worst_case: (mu * p + support.0 * (1.0 - p), mu * p + support.1 * (1.0 - p)),
        a1: (a1_lo, mu * p + qu * (1.0 - p)),
        a1_1: (s_lo, s_hi),
        a1_2_a2: (ig_lo, ig_hi),
        a2_a3: mean(&pooled),
        a1_a4: (a1_lo, mu),
        a1_1_a4_1: (s_lo, mono_hi),
        p,
        mu,
        q: (qa, qu),
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn shares(ds: &Dataset) -> BTreeMap<String, f64> {
    strata(ds).into_iter().collect()
}
