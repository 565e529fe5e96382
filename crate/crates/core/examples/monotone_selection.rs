//! Assuming non-participants score no better than participants.

use bounds_kit::{
    aggregate_over_pvs, census_truth, draw_sample, generate_population, AssumptionSet, MechanismConfig, MechanismKind,
    PopulationShape, Regime, SampleDesign,
};

fn main() -> bounds_kit::Result<()> {
    let mut cfg = MechanismConfig::new(MechanismKind::MonotoneSelection, 12);
    cfg.strength = 0.8;
    let pop = generate_population(&cfg, &PopulationShape::new(2, 60, 30))?;
    let truth = census_truth(&pop);
    let data = draw_sample(&pop, &SampleDesign::census(), 0)?;

    for a in [
        AssumptionSet::with_alpha(Regime::Quantile, 0.05),
        AssumptionSet::with_alpha(Regime::Monotone, 0.05),
        AssumptionSet::with_alpha(Regime::Monotone, 0.05).strict(),
        AssumptionSet::with_alpha(Regime::StratifiedMonotone, 0.05),
    ] {
        let r = aggregate_over_pvs(&data, &a)?.combined;
        println!(
            "{:<18} [{:.2}, {:.2}] contains truth: {}",
            a.scenario_label(),
            r.lower,
            r.upper,
            r.contains(truth.mean)
        );
    }
    println!(
        "true mean {:.2}; participants {:.2}, non-participants {:.2}",
        truth.mean,
        truth.participant_mean.unwrap(),
        truth.nonparticipant_mean.unwrap()
    );
    Ok(())
}
