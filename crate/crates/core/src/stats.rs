//! Per-run instrumentation: phase timings, operation counters, and schedule
//! metrics. `RunStats` serializes to the flat stats JSON documented in the
//! README.

use serde::Serialize;

use crate::counters::OpCounters;

/// Work/critical-path metrics of a task graph, in point-weight units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ScheduleStats {
    /// Total work: sum of task weights.
    #[serde(rename = "T1")]
    pub t1: f64,
    /// Critical path: heaviest dependency chain, weight-inclusive.
    #[serde(rename = "Tinf")]
    pub tinf: f64,
    /// Simulated (or planned) parallel time for the run's worker count.
    pub makespan: f64,
    /// `(T1 − Tinf)/P + Tinf`, Graham's list-scheduling guarantee.
    pub graham_bound: f64,
    pub colors_used: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunStats {
    pub algorithm: String,
    pub threads: usize,
    /// `"AxBxC"` for the decomposed algorithms, null otherwise.
    pub decomposition: Option<String>,
    pub n_points: u64,
    pub grid_voxels: u64,
    pub init_seconds: f64,
    /// Point bucketing / subdomain assignment / schedule planning.
    pub assign_seconds: f64,
    pub compute_seconds: f64,
    pub reduce_seconds: f64,
    pub total_seconds: f64,
    #[serde(flatten)]
    pub counters: OpCounters,
    /// Decomposed work divided by the 1×1×1 work; ≥ 1.0, null for
    /// algorithms without a decomposition.
    pub work_overhead_ratio: Option<f64>,
    #[serde(flatten)]
    pub schedule: Option<ScheduleStats>,
    /// Per-task replication factors, in task index order (PB-SYM-PD-REP).
    pub replication_factors: Option<Vec<u32>>,
    /// Bytes the algorithm estimated before allocating (domain replication,
    /// halo buffers).
    pub memory_estimate_bytes: Option<u64>,
}

impl RunStats {
    pub fn new(algorithm: &str, threads: usize, n_points: usize, grid_voxels: usize) -> Self {
        RunStats {
            algorithm: algorithm.to_string(),
            threads,
            decomposition: None,
            n_points: n_points as u64,
            grid_voxels: grid_voxels as u64,
            init_seconds: 0.0,
            assign_seconds: 0.0,
            compute_seconds: 0.0,
            reduce_seconds: 0.0,
            total_seconds: 0.0,
            counters: OpCounters::default(),
            work_overhead_ratio: None,
            schedule: None,
            replication_factors: None,
            memory_estimate_bytes: None,
        }
    }

    pub fn finish_total(&mut self) {
        self.total_seconds =
            self.init_seconds + self.assign_seconds + self.compute_seconds + self.reduce_seconds;
    }

    pub fn with_decomposition(mut self, a: usize, b: usize, c: usize) -> Self {
        self.decomposition = Some(format!("{a}x{b}x{c}"));
        self
    }

    /// The stats JSON document (same content as the CLI's --stats file).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("RunStats serialization is infallible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_json_is_flat_with_stable_keys() {
        let mut stats = RunStats::new("pb-sym", 1, 10, 1000);
        stats.init_seconds = 0.25;
        stats.compute_seconds = 1.0;
        stats.finish_total();
        let json = serde_json::to_value(&stats).unwrap();
        let obj = json.as_object().unwrap();
        for key in [
            "algorithm",
            "threads",
            "init_seconds",
            "compute_seconds",
            "reduce_seconds",
            "total_seconds",
            "distance_tests",
            "kernel_evals_spatial",
            "kernel_evals_temporal",
            "voxel_updates",
            "work_overhead_ratio",
        ] {
            assert!(obj.contains_key(key), "missing key {key}");
        }
        // Sequential run: no schedule metrics.
        assert!(obj.get("T1").is_none());
        assert_eq!(obj["total_seconds"].as_f64().unwrap(), 1.25);

        stats.schedule = Some(ScheduleStats {
            t1: 10.0,
            tinf: 4.0,
            makespan: 6.0,
            graham_bound: 7.0,
            colors_used: 8,
        });
        let json = serde_json::to_value(&stats).unwrap();
        assert_eq!(json["T1"].as_f64().unwrap(), 10.0);
        assert_eq!(json["Tinf"].as_f64().unwrap(), 4.0);
    }
}
