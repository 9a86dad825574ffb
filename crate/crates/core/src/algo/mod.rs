//! The algorithm ladder. Every entry point takes the accepted in-domain
//! points and the grid, and returns the density volume plus run statistics;
//! all of them compute the same estimate and differ only in work, memory,
//! and parallel structure.

pub mod domain;
pub mod pb;
pub mod point;
pub mod vb;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point};
use crate::stats::RunStats;
use crate::volume::DensityVolume;

pub use domain::{assign_points_dd, dr_memory_estimate, run_pb_sym_dd, run_pb_sym_dr, Decomposition};
pub use pb::{accumulate_pb_sym, run_pb, run_pb_bar, run_pb_disk, run_pb_sym};
pub use point::{
    adjust_decomposition, bucket_points, run_pb_sym_pd, run_pb_sym_pd_rep, run_pb_sym_pd_sched,
    simulate_dag, SubdomainGraph,
};
pub use vb::{run_vb, run_vb_dec};

pub(crate) fn validate_points(points: &[Point], grid: &GridSpec) -> Result<()> {
    for p in points {
        if !grid.contains(p) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y, t: p.t, line: None });
        }
    }
    Ok(())
}

/// The algorithms, by their CLI names.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Vb,
    VbDec,
    Pb,
    PbDisk,
    PbBar,
    PbSym,
    PbSymDr,
    PbSymDd,
    PbSymPd,
    PbSymPdSched,
    PbSymPdRep,
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
        Algorithm::Vb,
        Algorithm::VbDec,
        Algorithm::Pb,
        Algorithm::PbDisk,
        Algorithm::PbBar,
        Algorithm::PbSym,
        Algorithm::PbSymDr,
        Algorithm::PbSymDd,
        Algorithm::PbSymPd,
        Algorithm::PbSymPdSched,
        Algorithm::PbSymPdRep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Vb => "vb",
            Algorithm::VbDec => "vb-dec",
            Algorithm::Pb => "pb",
            Algorithm::PbDisk => "pb-disk",
            Algorithm::PbBar => "pb-bar",
            Algorithm::PbSym => "pb-sym",
            Algorithm::PbSymDr => "pb-sym-dr",
            Algorithm::PbSymDd => "pb-sym-dd",
            Algorithm::PbSymPd => "pb-sym-pd",
            Algorithm::PbSymPdSched => "pb-sym-pd-sched",
            Algorithm::PbSymPdRep => "pb-sym-pd-rep",
        }
    }

    /// True for the algorithms that take a decomposition.
    pub fn uses_decomposition(&self) -> bool {
        matches!(
            self,
            Algorithm::PbSymDd
                | Algorithm::PbSymPd
                | Algorithm::PbSymPdSched
                | Algorithm::PbSymPdRep
        )
    }

    pub fn uses_threads(&self) -> bool {
        matches!(
            self,
            Algorithm::PbSymDr
                | Algorithm::PbSymDd
                | Algorithm::PbSymPd
                | Algorithm::PbSymPdSched
                | Algorithm::PbSymPdRep
        )
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .iter()
            .find(|a| a.name() == s)
            .copied()
            .ok_or_else(|| Error::validation("algo", format!("unknown algorithm {s:?}")))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Execution knobs of a single run.
#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    /// Requested decomposition; the point-decomposed algorithms shrink it via
    /// [`adjust_decomposition`] before running.
    pub decomp: (usize, usize, usize),
    pub threads: usize,
    pub mem_budget: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { decomp: (1, 1, 1), threads: 1, mem_budget: None }
    }
}

/// Runs one algorithm. The decomposition is validated (and, for the
/// point-decomposed family, adjusted) here.
pub fn run_algorithm(
    algo: Algorithm,
    points: &[Point],
    grid: &GridSpec,
    config: &RunConfig,
) -> Result<(DensityVolume, RunStats)> {
    match algo {
        Algorithm::Vb => run_vb(points, grid),
        Algorithm::VbDec => run_vb_dec(points, grid),
        Algorithm::Pb => run_pb(points, grid),
        Algorithm::PbDisk => run_pb_disk(points, grid),
        Algorithm::PbBar => run_pb_bar(points, grid),
        Algorithm::PbSym => run_pb_sym(points, grid),
        Algorithm::PbSymDr => run_pb_sym_dr(points, grid, config.threads, config.mem_budget),
        Algorithm::PbSymDd => {
            let (a, b, c) = config.decomp;
            let dec = Decomposition::new(a, b, c, grid)?;
            run_pb_sym_dd(points, grid, &dec, config.threads)
        }
        Algorithm::PbSymPd => {
            let dec = adjust_decomposition(config.decomp, grid);
            run_pb_sym_pd(points, grid, &dec, config.threads)
        }
        Algorithm::PbSymPdSched => {
            let dec = adjust_decomposition(config.decomp, grid);
            run_pb_sym_pd_sched(points, grid, &dec, config.threads)
        }
        Algorithm::PbSymPdRep => {
            let dec = adjust_decomposition(config.decomp, grid);
            run_pb_sym_pd_rep(points, grid, &dec, config.threads, config.mem_budget)
        }
    }
}
