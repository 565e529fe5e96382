//! How often each region contains the true mean, by mechanism.

use bounds_kit::{
    generate_population, verify_coverage, AssumptionSet, MechanismConfig, MechanismKind, PopulationShape, Regime,
    SampleDesign,
};

fn main() -> bounds_kit::Result<()> {
    let shape = PopulationShape::new(3, 40, 25);
    let design = SampleDesign::new(15, 15);
    let regimes = [
        AssumptionSet::with_alpha(Regime::Quantile, 0.05),
        AssumptionSet::with_alpha(Regime::StratifiedQuantile, 0.05),
        AssumptionSet::with_alpha(Regime::Monotone, 0.05),
        AssumptionSet::point(Regime::Standard),
    ];
    for (kind, position) in [
        (MechanismKind::IgnorableWithinCells, 0.5),
        (MechanismKind::MonotoneSelection, 0.5),
        (MechanismKind::AdversarialWithinQuantiles, 0.2),
        (MechanismKind::AdversarialWithinQuantiles, -0.5),
    ] {
        let mut cfg = MechanismConfig::new(kind, 21);
        cfg.position = position;
        let pop = generate_population(&cfg, &shape)?;
        println!("{kind:?} (position {position})");
        for a in &regimes {
            let rep = verify_coverage(&pop, a, 200, &design, 7)?;
            if a.regime.is_point() {
                let census = rep
                    .census_region
                    .as_ref()
                    .map_or(f64::NAN, |r| r.lower - rep.truth_mean);
                let sampled = rep.mean_lower.unwrap_or(f64::NAN) - rep.truth_mean;
                println!(
                    "  {:<10} census error {census:+.2}  mean sampled error {sampled:+.2}",
                    rep.scenario
                );
                continue;
            }
            println!(
                "  {:<10} census {:<5} sampled coverage {:.3}  mean width {:.2}",
                rep.scenario,
                rep.census_contained.map_or("n/a".into(), |c| c.to_string()),
                rep.coverage.unwrap_or(f64::NAN),
                rep.mean_width.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
