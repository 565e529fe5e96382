//! Estimating once per plausible value and averaging the endpoints.

use bounds_kit::{
    aggregate_over_pvs, draw_sample, generate_population, AssumptionSet, MechanismConfig, MechanismKind,
    PopulationShape, Regime, SampleDesign,
};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> bounds_kit::Result<()> {
    let pop = generate_population(
        &MechanismConfig::new(MechanismKind::MonotoneSelection, 3),
        &PopulationShape::new(2, 50, 30),
    )?;
    let mut data = draw_sample(&pop, &SampleDesign::new(20, 20), 4)?;

    // measurement noise: each plausible value is a separate draw around the score
    let noise = Normal::new(0.0, 25.0).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for st in &mut data.students {
        if let Some(pv) = st.pv.as_mut() {
            pv.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
    }

    let agg = aggregate_over_pvs(&data, &AssumptionSet::with_alpha(Regime::Quantile, 0.05))?;
    for (k, r) in agg.per_pv.iter().enumerate() {
        println!("pv{}      [{:.2}, {:.2}]", k + 1, r.lower, r.upper);
    }
    let c = &agg.combined;
    println!("average  [{:.2}, {:.2}]", c.lower, c.upper);
    println!(
        "spread   lower sd {:.2}, upper sd {:.2}",
        agg.spread.lower_sd, agg.spread.upper_sd
    );
    Ok(())
}
