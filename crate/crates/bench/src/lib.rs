//! Inputs shared by the benchmarks.

use streamlift::synth::{perf_program, PerfShape};

/// Generated programs of increasing size, labelled by statement count.
pub fn sized_programs(seed: u64) -> Vec<(usize, String)> {
    [(1_000, 50, 10), (5_000, 250, 50), (10_000, 500, 100)]
        .into_iter()
        .map(|(statements, locations, checks)| {
            (statements, perf_program(seed, PerfShape { statements, locations, checks }))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn programs_analyze() {
        for (_, src) in super::sized_programs(7) {
            streamlift::analyze(&src, &Default::default()).unwrap();
        }
    }
}
