//! Plugging in a user model and a custom quantity of interest.
//!
//! The model is a single-server queue: arrival rate and service rate are
//! the uncertain inputs, and each run simulates 200 customers and returns
//! their mean waiting time. The second analysis studies the probability
//! that the mean wait exceeds 1, through the indicator QoI.
//!
//! cargo run --release --example custom_model

use snmc::{
    run_estimation, EstimationConfig, GroupSpec, InputDistribution, InputSpec, NoiseStream, Qoi,
    StochasticModel,
};

struct Queue {
    inputs: InputSpec,
    customers: usize,
}

impl Queue {
    fn new() -> snmc::Result<Self> {
        let inputs = InputSpec::new(vec![
            InputDistribution::Uniform {
                low: 0.5,
                high: 0.8,
            },
            InputDistribution::Uniform {
                low: 1.0,
                high: 1.5,
            },
        ])?;
        Ok(Queue {
            inputs,
            customers: 200,
        })
    }
}

fn exponential(noise: &mut NoiseStream, rate: f64) -> f64 {
    -(1.0 - noise.uniform01()).ln() / rate
}

impl StochasticModel for Queue {
    fn name(&self) -> String {
        "M/M/1 queue".into()
    }

    fn inputs(&self) -> &InputSpec {
        &self.inputs
    }

    fn evaluate(&self, x: &[f64], noise: &mut NoiseStream) -> snmc::Result<f64> {
        let (arrival, service) = (x[0], x[1]);
        let mut wait = 0.0;
        let mut total = 0.0;
        for _ in 0..self.customers {
            // Lindley recursion
            let s = exponential(noise, service);
            let a = exponential(noise, arrival);
            wait = f64::max(0.0, wait + s - a);
            total += wait;
        }
        Ok(total / self.customers as f64)
    }
}

fn main() -> snmc::Result<()> {
    let model = Queue::new()?;
    let groups = GroupSpec::singletons(2)?;
    let config = EstimationConfig {
        budget: 20_000,
        seed: 5,
        ..Default::default()
    };

    let long_wait = Qoi::custom("mean wait > 1", |model, x, noise| {
        Ok(if model.evaluate(x, noise)? > 1.0 {
            1.0
        } else {
            0.0
        })
    });
    for qoi in [Qoi::Identity, long_wait] {
        let report = run_estimation(&model, &qoi, &groups, &config)?.report;
        println!(
            "{} / {}: n = {}, m = {}",
            report.model, report.qoi, report.n, report.m
        );
        for e in &report.first_order {
            println!("  S{{{}}} = {:.3}", e.group, e.regularized);
        }
    }
    Ok(())
}
