//! Split records so training holds only the weakest 70%, then look at the
//! performance histogram and at why difference targets survive the shift.

use pairank::dataset;
use pairank::protocol::ShiftSummary;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = dataset::generate_synthetic(200, 31, 0, 0.05)?;
    let (train, test) = data.sorted_split(dataset::DEFAULT_TRAIN_FRACTION)?;
    println!("train {} records, test {} records", train.len(), test.len());

    let hist = data.performance_histogram(0.05)?;
    for (bin, count) in &hist.counts {
        println!("{:>6.2} {}", hist.lower_edge(*bin), "#".repeat(*count));
    }

    let shift = ShiftSummary::new(&train, &test)?;
    println!(
        "raw accuracy: train [{:.3}, {:.3}] test [{:.3}, {:.3}]",
        shift.train_performance.lo,
        shift.train_performance.hi,
        shift.test_performance.lo,
        shift.test_performance.hi
    );
    println!(
        "differences:  train [{:.3}, {:.3}] test [{:.3}, {:.3}]",
        shift.train_differences.lo,
        shift.train_differences.hi,
        shift.test_differences.lo,
        shift.test_differences.hi
    );
    println!(
        "differences bridge the shift: {}",
        shift.differences_bridge_shift()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
