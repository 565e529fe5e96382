//! Narrowing the region by restricting non-participants to participant quantiles.

use bounds_kit::{
    aggregate_over_pvs, bounds_worst_case, draw_sample, generate_population, AssumptionSet, MechanismConfig,
    MechanismKind, PopulationShape, Regime, SampleDesign,
};

fn main() -> bounds_kit::Result<()> {
    let pop = generate_population(
        &MechanismConfig::new(MechanismKind::MonotoneSelection, 1),
        &PopulationShape::new(3, 60, 40),
    )?;
    let data = draw_sample(&pop, &SampleDesign::new(25, 20), 2)?;

    let wc = bounds_worst_case(&data, 0, 100.0, 900.0)?;
    println!(
        "support [100, 900]  [{:7.2}, {:7.2}]  width {:6.2}",
        wc.lower, wc.upper, wc.width
    );
    for alpha in [0.05, 0.10, 0.25, 0.5] {
        let r = aggregate_over_pvs(&data, &AssumptionSet::with_alpha(Regime::Quantile, alpha))?.combined;
        let q = (r.ingredients.q_alpha.unwrap(), r.ingredients.q_upper.unwrap());
        println!(
            "A1 alpha = {alpha:.2}     [{:7.2}, {:7.2}]  width {:6.2}  quantiles ({:.1}, {:.1})",
            r.lower, r.upper, r.width, q.0, q.1
        );
    }
    Ok(())
}
