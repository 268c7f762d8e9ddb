//! What training every candidate from scratch would cost.

use pairank::enas_sim::estimate_cost;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for gpus in [1, 20] {
        let c = estimate_cost(50_000, 128, 500, 2.0, 1000, gpus)?;
        println!(
            "{gpus:>2} GPU(s): {} batches/epoch, {} steps/individual, {:.1} h/individual, {:.1} days total",
            c.batches_per_epoch, c.train_steps_per_individual, c.hours_per_individual, c.total_days
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
