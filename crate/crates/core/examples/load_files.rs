//! Writing a dataset to CSV, loading it back, validating, and rendering a report table.

use bounds_kit::cli_io::{estimate_rows, render_rows, OutputFormat, RegimeSpec};
use bounds_kit::{
    draw_sample, generate_population, validate, Dataset, MechanismConfig, MechanismKind, PopulationShape, SampleDesign,
};

fn main() -> bounds_kit::Result<()> {
    let pop = generate_population(
        &MechanismConfig::new(MechanismKind::MonotoneSelection, 30),
        &PopulationShape::new(2, 30, 25),
    )?;
    let dir = tempfile::tempdir().expect("temp dir");
    draw_sample(&pop, &SampleDesign::new(12, 10), 31)?.write_to_dir(dir.path())?;

    let data = Dataset::load_from_dir(dir.path())?;
    let report = validate(&data);
    println!(
        "{} schools, {} students, {} issues",
        data.schools.len(),
        data.students.len(),
        report.violations.len()
    );

    let mut sets = Vec::new();
    for spec in ["A1:0.05", "A1_1:0.05", "A1.2+A2:0.05", "A2_A3"] {
        sets.extend(spec.parse::<RegimeSpec>()?.expand(&[], false));
    }
    let (rows, warnings) = estimate_rows(&data, &sets)?;
    print!("{}", render_rows(&rows, OutputFormat::Tsv)?);
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
