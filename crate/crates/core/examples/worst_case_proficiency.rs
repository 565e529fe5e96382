//! Bounds on a proficiency rate when a fifth of students do not take part.

use bounds_kit::{bounded_support, bounds_worst_case, Dataset, SchoolRecord, StudentRecord};

fn main() -> bounds_kit::Result<()> {
    // 80% take part and 69% of them are proficient; the rest could be anything in [0, 1]
    let (lo, hi) = bounded_support(0.69, 0.8, 0.0, 1.0);
    println!("proficiency rate lies in [{lo:.3}, {hi:.3}]");

    // same numbers from student records: 100 sampled, 80 tested, 55 proficient
    let mut students = Vec::new();
    for i in 0..100 {
        let id = format!("s{i:03}");
        if i < 80 {
            let proficient = if i < 55 { 1.0 } else { 0.0 };
            students.push(StudentRecord::participant(id, "school", 1.0, vec![proficient]));
        } else {
            students.push(StudentRecord::non_participant(id, "school", 1.0));
        }
    }
    let data = Dataset::new(
        students,
        vec![SchoolRecord::new("school", "all", true, 100, 1.0, 100)],
        [("all", 100.0)],
        1,
    )?;
    let r = bounds_worst_case(&data, 0, 0.0, 1.0)?;
    println!(
        "from records: p = {:.2}, mean among tested = {:.4}, region [{:.4}, {:.4}]",
        r.ingredients.p, r.ingredients.mu, r.lower, r.upper
    );
    Ok(())
}
