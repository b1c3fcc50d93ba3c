//! Parallel execution of Monte Carlo stream kernels.
//!
//! Streams run on a rayon pool of the requested size; outputs are merged in
//! stream-id order, so results do not depend on the worker count.

use ladder_core::montecarlo::{merge_in_order, SeedPlan, StreamKernel};
use rayon::prelude::*;

pub fn run_parallel<K: StreamKernel>(
    kernel: &K,
    plan: &SeedPlan,
    workers: usize,
) -> anyhow::Result<K::Output> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let mut outputs: Vec<(u32, K::Output)> = pool.install(|| {
        plan.streams
            .par_iter()
            .map(|&(s, t)| (s, kernel.run(s, t, &mut plan.rng(s))))
            .collect()
    });
    Ok(merge_in_order(&mut outputs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ladder_core::montecarlo::{run_sequential, LadderTask};
    use ladder_core::IncrementModel;

    #[test]
    fn worker_count_does_not_change_results() {
        let model = IncrementModel::lazy_walk();
        let task = LadderTask::new(&model, 40).unwrap();
        let plan = SeedPlan::even(7, 4000, 8);
        let reference = run_sequential(&task, &plan).unwrap();
        for w in [1, 3, 8] {
            assert_eq!(run_parallel(&task, &plan, w).unwrap(), reference);
        }
    }
}
