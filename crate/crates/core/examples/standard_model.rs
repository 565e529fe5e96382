//! Ignorability within schools, then within strata, with and without replacement schools.

use bounds_kit::{
    aggregate_over_pvs, census_truth, draw_sample, generate_population, AssumptionSet, MechanismConfig, MechanismKind,
    PopulationShape, Regime, SampleDesign,
};

fn main() -> bounds_kit::Result<()> {
    let pop = generate_population(
        &MechanismConfig::new(MechanismKind::IgnorableWithinCells, 9),
        &PopulationShape::new(3, 100, 30),
    )?;
    let data = draw_sample(&pop, &SampleDesign::new(40, 20).with_replacements(0.5), 10)?;
    let replaced = data.schools.iter().filter(|s| s.is_replacement()).count();
    println!(
        "{} sampled schools, {replaced} replacement schools",
        data.schools.len() - replaced
    );

    let show = |name: &str, a: AssumptionSet| -> bounds_kit::Result<()> {
        let r = aggregate_over_pvs(&data, &a)?.combined;
        println!("{name:<18} [{:.2}, {:.2}]", r.lower, r.upper);
        for w in &r.warnings {
            println!("  warning: {w}");
        }
        Ok(())
    };
    show(
        "A1_2_A2 @ 0.05",
        AssumptionSet::with_alpha(Regime::SchoolIgnorable, 0.05),
    )?;
    show("A2_A3", AssumptionSet::point(Regime::Standard))?;
    show(
        "A2_A3 + replaced",
        AssumptionSet::point(Regime::StandardWithReplacements),
    )?;
    println!("true mean          {:.2}", census_truth(&pop).mean);
    Ok(())
}
