//! Finite-difference check of every built-in model.

use gpconv::model::Task;
use gpconv::train::{builtin_configs, grad_check, graph_fixture, node_fixture, FD_EPSILON};

fn main() -> Result<(), gpconv::error::Error> {
    println!("central differences, eps = {FD_EPSILON:e}");
    for task in [Task::Node, Task::Graph] {
        for (name, config) in builtin_configs(task) {
            let fixture = match task {
                Task::Node => node_fixture(&config)?,
                Task::Graph => graph_fixture(&config)?,
            };
            let report = grad_check(&config, &fixture, 1e-5, 0)?;
            println!("{name}:");
            for p in &report.params {
                println!("  {:<14} rel {:.2e}  abs {:.2e}", p.name, p.max_relative_error, p.max_abs_error);
            }
            println!("  passed: {}", report.passed());
        }
    }
    Ok(())
}
