//! Runs the reference scenario once and prints the headline metrics.
//!
//! ```text
//! cargo run --release -p spicl-core --example single_run -- [lambda] [stack_size]
//! ```

use std::time::Instant;

use spicl::experiment::{run_scenario, SimConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let lambda: f64 = args.next().map_or(0.0, |a| a.parse().expect("lambda must be a number"));
    let mut cfg = SimConfig::demo().with_sparsity(lambda);
    if let Some(n) = args.next() {
        cfg.stack.capacity = n.parse().expect("stack size must be an integer");
    }
    let start = Instant::now();
    let run = match run_scenario(&cfg) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("run failed: {e}");
            std::process::exit(2);
        }
    };
    let m = &run.metrics;
    println!("lambda            {lambda:e}");
    println!("wall time         {:.2} s", start.elapsed().as_secs_f64());
    println!("rms |e| [50,100]  {:.5}", m.rms_e);
    println!("|theta~(tf)|      {:.5}", m.theta_err_final);
    println!("nonzeros          {}", m.nonzeros);
    println!("confusion         {:?}", m.confusion);
    println!("f1                {:.2}", m.scores.f1);
    println!("lambda_min(Y)     {:.3e}", m.lambda_min_final);
    println!("stack insertions  {}", m.accepted_insertions);
    let rounded: Vec<f64> = run.theta_hat_final.iter().map(|v| (v * 1e3).round() / 1e3).collect();
    println!("theta_hat         {rounded:?}");
}
