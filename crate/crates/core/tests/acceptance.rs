//! Acceptance suite: one PASS/FAIL line per criterion. Set
//! `BOUNDS_KIT_GERMANY_DIR` to a directory holding students.csv, schools.csv
//! and strata.csv for Germany to run the real-data check.

mod common;

use std::time::{Duration, Instant};

use bounds_kit::identification::{
    bounds_a1, bounds_a12_a2, bounds_a1_stratified, bounds_monotone, bounds_monotone_stratified, bounds_worst_case,
    point_standard,
};
use bounds_kit::oracle_sim::{census_truth_at, OutcomeModel};
use bounds_kit::{
    aggregate_over_pvs, bounded_support, census_truth, draw_sample, generate_population, link_replacements,
    stratum_adjustment_factor, AssumptionSet, Dataset, MechanismConfig, MechanismKind, PopulationShape, Regime,
    SampleDesign, SchoolRecord, StudentRecord,
};
use common::{oracle, random_dataset};

const FIXTURES: u64 = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = out.pass && in_time;
        if !pass {
            self.failures += 1;
        }
        let timing = if in_time {
            String::new()
        } else {
            format!("; over time limit {limit:?}")
        };
        println!(
            "{} [{id}] {name}: {} ({:.3?}{timing})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed
        );
    }

    fn skip(&self, id: u32, name: &str, why: &str) {
        println!("SKIP [{id}] {name}: {why}");
    }
}

fn intro_arithmetic() -> Outcome {
    let (lo, hi) = bounded_support(0.69, 0.8, 0.0, 1.0);
    let ok = (lo - 0.552).abs() <= 1e-12 && (hi - 0.752).abs() <= 1e-12;
    let rounded = ((lo * 100.0).round(), (hi * 100.0).round());
    outcome(ok && rounded == (55.0, 75.0), format!("[{lo}, {hi}]"))
}

fn width_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..FIXTURES {
        let ds = random_dataset(seed, 20);
        let alpha = [0.05, 0.1, 0.25, 0.33][seed as usize % 4];
        let r = bounds_a1(&ds, seed as usize % 5, alpha).unwrap();
        let i = &r.ingredients;
        let want = (1.0 - i.p) * (i.q_upper.unwrap() - i.q_alpha.unwrap());
        worst = worst.max((r.width - want).abs());
    }
    outcome(worst <= 1e-12, format!("{FIXTURES} fixtures, max deviation {worst:e}"))
}

fn nesting() -> Outcome {
    type F = fn(&Dataset, usize, f64) -> bounds_kit::Result<bounds_kit::IdentificationRegion>;
    let regimes: [(&str, F); 3] = [
        ("A1", bounds_a1),
        ("A1_1", bounds_a1_stratified),
        ("A1_2_A2", bounds_a12_a2),
    ];
    let mut bad = Vec::new();
    for seed in 0..FIXTURES {
        let ds = random_dataset(seed, 20);
        for (name, f) in regimes {
            let r: Vec<_> = [0.05, 0.10, 0.25].iter().map(|&a| f(&ds, 0, a).unwrap()).collect();
            if !(r[2].is_subset_of(&r[1]) && r[1].is_subset_of(&r[0])) {
                bad.push(format!("{name}@{seed}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{FIXTURES} fixtures x 3 regimes, violations: {bad:?}"),
    )
}

fn coincidences() -> Outcome {
    let mut bad = Vec::new();
    for seed in 0..FIXTURES {
        let ds = random_dataset(seed, 20);
        let alpha = 0.05 + 0.4 * (seed as f64 / FIXTURES as f64);
        let a1 = bounds_a1(&ds, 0, alpha).unwrap();
        let a11 = bounds_a1_stratified(&ds, 0, alpha).unwrap();
        if let Ok(m) = bounds_monotone(&ds, 0, alpha, false) {
            if m.lower.to_bits() != a1.lower.to_bits() {
                bad.push(format!("A1_A4 lower @{seed}"));
            }
        }
        if let Ok(m) = bounds_monotone_stratified(&ds, 0, alpha) {
            if m.lower.to_bits() != a11.lower.to_bits() {
                bad.push(format!("A1_1_A4_1 lower @{seed}"));
            }
        }
        for (name, r) in [
            ("A1", bounds_a1(&ds, 0, 0.5)),
            ("A1_1", bounds_a1_stratified(&ds, 0, 0.5)),
            ("A1_2_A2", bounds_a12_a2(&ds, 0, 0.5)),
        ] {
            if !r.unwrap().is_point() {
                bad.push(format!("{name} median @{seed}"));
            }
        }
        if ds.strata.len() == 1
            && (a1.lower.to_bits(), a1.upper.to_bits()) != (a11.lower.to_bits(), a11.upper.to_bits())
        {
            bad.push(format!("single stratum @{seed}"));
        }
    }
    outcome(bad.is_empty(), format!("{FIXTURES} fixtures, mismatches: {bad:?}"))
}

fn census_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut track = |a: f64, b: f64| worst = worst.max((a - b).abs());
    for seed in 0..200 {
        let ds = random_dataset(seed, 20);
        let alpha = [0.05, 0.1, 0.25][seed as usize % 3];
        let o = oracle(&ds, 0, alpha, (0.0, 1000.0));
        let pairs = [
            (bounds_worst_case(&ds, 0, 0.0, 1000.0).unwrap(), o.worst_case),
            (bounds_a1(&ds, 0, alpha).unwrap(), o.a1),
            (bounds_a1_stratified(&ds, 0, alpha).unwrap(), o.a1_1),
            (bounds_a12_a2(&ds, 0, alpha).unwrap(), o.a1_2_a2),
            (point_standard(&ds, 0, false).unwrap(), (o.a2_a3, o.a2_a3)),
        ];
        for (r, want) in pairs {
            track(r.lower, want.0);
            track(r.upper, want.1);
        }
        if let Ok(r) = bounds_monotone(&ds, 0, alpha, false) {
            track(r.lower, o.a1_a4.0);
            track(r.upper, o.a1_a4.1);
        }
        if let Ok(r) = bounds_monotone_stratified(&ds, 0, alpha) {
            track(r.lower, o.a1_1_a4_1.0);
            track(r.upper, o.a1_1_a4_1.1);
        }
        checked += 1;
    }
    let mut census_worst: f64 = 0.0;
    for seed in 0..4 {
        let pop = generate_population(
            &MechanismConfig::new(MechanismKind::StratumHeterogeneous, seed),
            &PopulationShape::new(3, 8, 12),
        )
        .unwrap();
        let truth = census_truth_at(&pop, 0.1);
        let ds = draw_sample(&pop, &SampleDesign::census(), seed).unwrap();
        let r = bounds_a1_stratified(&ds, 0, 0.1).unwrap();
        let i = &r.ingredients;
        let mut d = vec![
            (i.p - truth.p).abs(),
            (i.p1 - truth.p1).abs(),
            (i.mu - truth.participant_mean.unwrap()).abs(),
            (i.q_alpha.unwrap() - truth.q_alpha.unwrap()).abs(),
            (i.q_upper.unwrap() - truth.q_upper.unwrap()).abs(),
        ];
        for (id, b) in r.per_stratum.as_ref().unwrap() {
            let t = &truth.strata[id];
            d.push((b.ingredients.p - t.p).abs());
            d.push((b.ingredients.mu - t.participant_mean.unwrap()).abs());
            d.push((b.ingredients.q_alpha.unwrap() - t.q_alpha.unwrap()).abs());
        }
        census_worst = d.into_iter().fold(census_worst, f64::max);
    }
    outcome(
        worst <= 1e-9 && census_worst <= 1e-9,
        format!("{checked} fixtures, max oracle deviation {worst:e}; census max deviation {census_worst:e}"),
    )
}

fn containment() -> Outcome {
    let shape = PopulationShape::new(3, 15, 16);
    let census = SampleDesign::census();
    let a1 = AssumptionSet::with_alpha(Regime::Quantile, 0.05);
    let a11 = AssumptionSet::with_alpha(Regime::StratifiedQuantile, 0.05);
    let mut contained = [0usize; 2];
    for seed in 0..200u64 {
        let mut cfg = MechanismConfig::new(MechanismKind::AdversarialWithinQuantiles, seed);
        cfg.position = (seed % 11) as f64 / 10.0;
        let pop = generate_population(&cfg, &shape).unwrap();
        let truth = census_truth(&pop).mean;
        let ds = draw_sample(&pop, &census, seed).unwrap();
        for (k, a) in [a1, a11].iter().enumerate() {
            if aggregate_over_pvs(&ds, a).unwrap().combined.contains(truth) {
                contained[k] += 1;
            }
        }
    }
    // premise broken on purpose: non-participant means below the lower quantile
    let mut violated = [0usize; 2];
    let mut broken = [0usize; 2];
    for seed in 0..50u64 {
        let mut cfg = MechanismConfig::new(MechanismKind::AdversarialWithinQuantiles, 1000 + seed);
        cfg.position = -0.5;
        let pop = generate_population(&cfg, &shape).unwrap();
        let truth = census_truth(&pop);
        let ds = draw_sample(&pop, &census, seed).unwrap();
        for (k, (a, premise)) in [(a1, truth.premises.a1), (a11, truth.premises.a1_1)].iter().enumerate() {
            if !premise {
                broken[k] += 1;
                if !aggregate_over_pvs(&ds, a).unwrap().combined.contains(truth.mean) {
                    violated[k] += 1;
                }
            }
        }
    }
    let pass = contained == [200, 200] && broken[1] == 50 && violated == broken && broken[0] > 0;
    outcome(
        pass,
        format!(
            "premise held: A1 {}/200, A1_1 {}/200 contained; premise broken: A1 {}/{} and A1_1 {}/{} excluded",
            contained[0], contained[1], violated[0], broken[0], violated[1], broken[1]
        ),
    )
}

fn ignorable_consistency() -> (Outcome, Vec<f64>) {
    let shape = PopulationShape::new(4, 1250, 20);
    let mut errors = Vec::new();
    for seed in 0..20u64 {
        let mut cfg = MechanismConfig::new(MechanismKind::IgnorableWithinCells, seed);
        cfg.outcome = OutcomeModel {
            school_sd: 10.0,
            ..OutcomeModel::default()
        };
        let pop = generate_population(&cfg, &shape).unwrap();
        let truth = census_truth(&pop).mean;
        let mut design = SampleDesign::census();
        design.pv_count = 1;
        let ds = draw_sample(&pop, &design, seed).unwrap();
        let point = point_standard(&ds, 0, false).unwrap().lower;
        errors.push(point - truth);
    }
    let worst = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    (
        outcome(
            worst < 0.5,
            format!(
                "N = {} per population, 20 seeds, max |point - truth| = {worst:.4}",
                4 * 1250 * 20
            ),
        ),
        errors,
    )
}

fn replacement_identity() -> Outcome {
    let mut mismatches = 0;
    for seed in 0..200 {
        let ds = random_dataset(seed, 20);
        let a = point_standard(&ds, 0, false).unwrap();
        let b = point_standard(&ds, 0, true).unwrap();
        if a.lower.to_bits() != b.lower.to_bits() {
            mismatches += 1;
        }
    }

    // 229 sampled schools, 193 participate, 16 of the 36 others replaced
    let mut schools = Vec::new();
    let mut students = Vec::new();
    for j in 0..229 {
        let id = format!("o{j}");
        let z1 = j < 193;
        schools.push(SchoolRecord::new(id.clone(), "w", z1, 40, 10.0, if z1 { 2 } else { 0 }));
        if z1 {
            students.push(StudentRecord::participant(
                format!("{id}-a"),
                id.clone(),
                200.0,
                vec![500.0],
            ));
            students.push(StudentRecord::participant(
                format!("{id}-b"),
                id.clone(),
                200.0,
                vec![520.0],
            ));
        }
    }
    for k in 0..16 {
        let id = format!("r{k}");
        schools.push(SchoolRecord::new(id.clone(), "w", true, 40, 10.0, 1).replacing(format!("o{}", 193 + k)));
        students.push(StudentRecord::participant(format!("{id}-a"), id, 400.0, vec![600.0]));
    }
    let ds = Dataset::new(students, schools, [("w", 9160.0)], 1).unwrap();
    let linked = link_replacements(&ds).unwrap();
    let originals: Vec<&SchoolRecord> = ds.schools.iter().filter(|s| !s.is_replacement()).collect();
    let relinked: Vec<&SchoolRecord> = linked.schools.iter().collect();
    let stratum = ds.stratum("w").unwrap();
    let before = stratum_adjustment_factor(stratum, &originals, &ds.filled_slots, false).unwrap();
    let after = stratum_adjustment_factor(stratum, &relinked, &linked.filled_slots, true).unwrap();
    let exact = before == 193.0 / 229.0 && after == 209.0 / 229.0;
    let step = ((after - before) - 16.0 / 229.0).abs();
    let p0 = point_standard(&ds, 0, false).unwrap().lower;
    let p1 = point_standard(&ds, 0, true).unwrap().lower;
    outcome(
        mismatches == 0 && exact && step < 1e-15 && p1 > p0,
        format!(
            "200 link-free fixtures identical ({mismatches} mismatches); pi_w^f {before:.6} -> {after:.6} \
             (193/229 -> 209/229), point {p0:.2} -> {p1:.2}"
        ),
    )
}

fn germany(dir: &str) -> Outcome {
    let ds = match Dataset::load_from_dir(std::path::Path::new(dir)) {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("could not load {dir}: {e}")),
    };
    let run = |a: AssumptionSet| aggregate_over_pvs(&ds, &a).map(|r| r.combined);
    let targets: [(&str, AssumptionSet, f64, bool); 7] = [
        (
            "A1@0.05 width",
            AssumptionSet::with_alpha(Regime::Quantile, 0.05),
            80.0,
            false,
        ),
        (
            "A1@0.10 width",
            AssumptionSet::with_alpha(Regime::Quantile, 0.10),
            62.0,
            false,
        ),
        (
            "A1@0.25 width",
            AssumptionSet::with_alpha(Regime::Quantile, 0.25),
            32.0,
            false,
        ),
        (
            "A1_1@0.05 width",
            AssumptionSet::with_alpha(Regime::StratifiedQuantile, 0.05),
            70.0,
            false,
        ),
        (
            "A1_2_A2@0.05 width",
            AssumptionSet::with_alpha(Regime::SchoolIgnorable, 0.05),
            46.0,
            false,
        ),
        ("A2_A3 point", AssumptionSet::point(Regime::Standard), 517.0, true),
        (
            "A2_A3_REPLACEMENT point",
            AssumptionSet::point(Regime::StandardWithReplacements),
            518.0,
            true,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, a, want, is_point) in targets {
        match run(a) {
            Ok(r) => {
                let got = if is_point { r.lower } else { r.width };
                ok &= (got - want).abs() <= 1.0;
                parts.push(format!("{name} {got:.1} (want {want})"));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name} error {e}"));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

fn main() {
    let mut suite = Suite { failures: 0 };
    suite.run(
        1,
        "intro arithmetic [0.552, 0.752]",
        Duration::from_millis(1),
        intro_arithmetic,
    );
    suite.run(2, "A1 width identity", Duration::from_secs(5), width_identity);
    suite.run(3, "nesting across alpha", Duration::from_secs(5), nesting);
    suite.run(4, "coincidence identities", Duration::from_secs(5), coincidences);
    suite.run(5, "census oracle equivalence", Duration::from_secs(1), census_oracle);
    suite.run(
        6,
        "containment under satisfied premises",
        Duration::from_secs(30),
        containment,
    );
    let mut spread = Vec::new();
    suite.run(7, "ignorable-mechanism consistency", Duration::from_secs(60), || {
        let (o, e) = ignorable_consistency();
        spread = e;
        o
    });
    suite.run(8, "replacement identity", Duration::from_secs(5), replacement_identity);
    match std::env::var("BOUNDS_KIT_GERMANY_DIR") {
        Ok(dir) => suite.run(9, "Germany ladder", Duration::from_secs(60), || germany(&dir)),
        Err(_) => suite.skip(9, "Germany ladder", "BOUNDS_KIT_GERMANY_DIR not set"),
    }
    if !spread.is_empty() {
        let mean = spread.iter().sum::<f64>() / spread.len() as f64;
        println!("      criterion 7 mean error {mean:+.4}");
    }
    if suite.failures > 0 {
        println!("{} criteria failed", suite.failures);
        std::process::exit(1);
    }
}
