//! SSD staging-tier planning.
//!
//! A staging node sits between `s` compute nodes and the parallel file
//! system (PFS). Each iteration it absorbs the compute nodes' analysis and
//! checkpoint output, runs an analysis kernel over the analysis data, and
//! drains the reduced analysis output plus the checkpoints to the PFS. The
//! model here decides how many compute nodes one staging node can serve and
//! which kernels are fast enough to run on it without delaying the
//! simulation.
//!
//! All quantities are SI: bytes, bytes/s, seconds, watts, joules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StagingError {
    #[error("invalid planning input: {0}")]
    InvalidInput(String),
    /// Nothing is staged per iteration, so capacity imposes no bound.
    #[error("workload stages no data; the capacity ratio is unconstrained")]
    Unconstrained,
    #[error("one staging node cannot serve a single compute node (ratio {ratio:.6})")]
    InfeasibleHardware { ratio: f64 },
    #[error("transfers alone take {busy:.6} s of the {interval:.6} s interval; no kernel throughput is feasible")]
    NoFeasibleThroughput { busy: f64, interval: f64 },
}

pub type Result<T, E = StagingError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    /// Compute nodes in the simulation partition.
    pub n_compute: u64,
    /// Aggregate PFS bandwidth.
    #[serde(with = "units::rate")]
    pub bw_pfs: f64,
    /// Host-to-SSD interface bandwidth of one staging node.
    #[serde(with = "units::rate")]
    pub bw_host2ssd: f64,
    /// First hop: compute-node memory to the staging controller.
    #[serde(with = "units::rate")]
    pub bw_fm2c: f64,
    /// Second hop: staging controller to staging memory.
    #[serde(with = "units::rate")]
    pub bw_c2m: f64,
    /// Usable SSD capacity per staging node.
    #[serde(with = "units::bytes")]
    pub c_ssd: f64,
    #[serde(with = "units::watts")]
    pub p_active: f64,
    #[serde(with = "units::watts")]
    pub p_idle: f64,
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bw_pfs", self.bw_pfs),
            ("bw_host2ssd", self.bw_host2ssd),
            ("bw_fm2c", self.bw_fm2c),
            ("bw_c2m", self.bw_c2m),
            ("c_ssd", self.c_ssd),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StagingError::InvalidInput(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.n_compute < 1 {
            return Err(StagingError::InvalidInput("n_compute must be >= 1".into()));
        }
        if !(self.p_idle >= 0.0 && self.p_active >= self.p_idle && self.p_active.is_finite()) {
            return Err(StagingError::InvalidInput(format!(
                "power must satisfy p_active >= p_idle >= 0, got p_active={} p_idle={}",
                self.p_active, self.p_idle
            )));
        }
        Ok(())
    }

    fn n(&self) -> f64 {
        self.n_compute as f64
    }

    /// Per-node time to move one byte across both hops into staging memory.
    fn hop_cost(&self) -> f64 {
        1.0 / self.bw_fm2c + 1.0 / self.bw_c2m
    }
}

/// Per-compute-node, per-iteration output volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    #[serde(with = "units::bytes")]
    pub lambda_a: f64,
    #[serde(with = "units::bytes")]
    pub lambda_c: f64,
    /// Checkpoint generations retained on the staging SSD.
    pub num_chkpts: u32,
    #[serde(with = "units::seconds")]
    pub interval: f64,
    /// Fraction of analysis data that survives reduction and is drained.
    pub alpha: f64,
}

impl Workload {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_a >= 0.0 && self.lambda_a.is_finite()) {
            return Err(StagingError::InvalidInput(format!("lambda_a must be >= 0, got {}", self.lambda_a)));
        }
        if !(self.lambda_c >= 0.0 && self.lambda_c.is_finite()) {
            return Err(StagingError::InvalidInput(format!("lambda_c must be >= 0, got {}", self.lambda_c)));
        }
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return Err(StagingError::InvalidInput(format!("interval must be > 0, got {}", self.interval)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(StagingError::InvalidInput(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisKernel {
    pub name: String,
    #[serde(with = "units::rate")]
    pub throughput: f64,
}

impl AnalysisKernel {
    pub fn new(name: impl Into<String>, throughput: f64) -> Self {
        AnalysisKernel {
            name: name.into(),
            throughput,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_node2ssd: f64,
    pub e_active: f64,
    pub e_ssd2pfs: f64,
    pub e_idle: f64,
    pub total: f64,
    /// Busy seconds per staging node per iteration.
    pub busy: f64,
    /// Set when the staging nodes are busy for longer than the interval.
    pub over_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelVerdict {
    pub name: String,
    pub throughput: f64,
    pub t_a: f64,
    /// `(t_a + t_c) * s < interval` for this kernel.
    pub feasible: bool,
    /// Throughput strictly above `t_ssd_min`.
    pub offloadable: bool,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagingPlan {
    /// `None` when the workload stages nothing (unconstrained).
    pub s_capacity: Option<f64>,
    pub s_bandwidth: f64,
    pub s: u64,
    pub t_c: f64,
    pub t_ssd_min: f64,
    /// At least one listed kernel can be offloaded.
    pub feasible: bool,
    pub kernels: Vec<KernelVerdict>,
}

/// Capacity-limited staging ratio: how many compute nodes' analysis data and
/// retained checkpoints fit on one staging SSD.
pub fn s_capacity(cfg: &ClusterConfig, wl: &Workload) -> Result<f64> {
    let footprint = wl.lambda_a + wl.num_chkpts as f64 * wl.lambda_c;
    if footprint <= 0.0 {
        return Err(StagingError::Unconstrained);
    }
    Ok(cfg.c_ssd / footprint)
}

/// Bandwidth-limited staging ratio: a staging node's ingest interface must
/// cover the PFS share `s * bw_pfs / N` of the compute nodes it replaces.
pub fn s_bandwidth(cfg: &ClusterConfig) -> f64 {
    cfg.n() * cfg.bw_host2ssd / cfg.bw_pfs
}

/// Integer staging ratio, the floor of the tighter constraint.
pub fn staging_ratio(cfg: &ClusterConfig, wl: &Workload) -> Result<u64> {
    let bw = s_bandwidth(cfg);
    let bound = match s_capacity(cfg, wl) {
        Ok(cap) => cap.min(bw),
        Err(StagingError::Unconstrained) => bw,
        Err(e) => return Err(e),
    };
    if bound < 1.0 {
        return Err(StagingError::InfeasibleHardware { ratio: bound });
    }
    Ok(bound.floor() as u64)
}

/// Per-compute-node analysis time: two transfer hops, kernel processing, and
/// the drain of the reduced output against the staging node's PFS share.
pub fn analysis_drain_time(cfg: &ClusterConfig, wl: &Workload, s: u64, kernel: &AnalysisKernel) -> f64 {
    let s = s as f64;
    wl.lambda_a
        * (cfg.hop_cost() + 1.0 / kernel.throughput + wl.alpha * cfg.n() / (s * cfg.bw_pfs))
}

/// Per-compute-node checkpoint drain time against the staging node's PFS share.
pub fn checkpoint_drain_time(cfg: &ClusterConfig, wl: &Workload, s: u64) -> f64 {
    wl.lambda_c * cfg.n() / (s as f64 * cfg.bw_pfs)
}

/// Whether one iteration of staging work for `s` compute nodes finishes
/// strictly within the iteration interval.
pub fn check_feasible(cfg: &ClusterConfig, wl: &Workload, s: u64, kernel: &AnalysisKernel) -> bool {
    let t = analysis_drain_time(cfg, wl, s, kernel) + checkpoint_drain_time(cfg, wl, s);
    t * (s as f64) < wl.interval
}

/// Minimum kernel throughput for which [`check_feasible`] holds.
///
/// Any throughput strictly above the returned value is feasible; any value
/// strictly below is not.
pub fn min_kernel_throughput(cfg: &ClusterConfig, wl: &Workload, s: u64) -> Result<f64> {
    let sf = s as f64;
    let transfers = wl.lambda_a * sf * cfg.hop_cost()
        + cfg.n() * (wl.alpha * wl.lambda_a + wl.lambda_c) / cfg.bw_pfs;
    let slack = wl.interval - transfers;
    if slack <= 0.0 {
        return Err(StagingError::NoFeasibleThroughput {
            busy: transfers,
            interval: wl.interval,
        });
    }
    Ok(wl.lambda_a * sf / slack)
}

/// Energy drawn by all `N / s` staging nodes over one iteration.
pub fn energy_per_iteration(cfg: &ClusterConfig, wl: &Workload, s: u64, kernel: &AnalysisKernel) -> EnergyBreakdown {
    let sf = s as f64;
    let nodes = cfg.n() / sf;
    let t_in = sf * (wl.lambda_a + wl.lambda_c) / cfg.bw_host2ssd;
    let t_proc = if wl.lambda_a == 0.0 {
        0.0
    } else {
        sf * wl.lambda_a / kernel.throughput
    };
    let t_out = (sf * wl.alpha * wl.lambda_a + sf * wl.lambda_c) * cfg.n() / (sf * cfg.bw_pfs);
    let busy = t_in + t_proc + t_out;
    let over_budget = busy > wl.interval;
    let idle = (wl.interval - busy).max(0.0);

    let e_node2ssd = cfg.p_active * t_in * nodes;
    let e_active = cfg.p_active * t_proc * nodes;
    let e_ssd2pfs = cfg.p_active * t_out * nodes;
    let e_idle = cfg.p_idle * idle * nodes;
    EnergyBreakdown {
        e_node2ssd,
        e_active,
        e_ssd2pfs,
        e_idle,
        total: e_node2ssd + e_active + e_ssd2pfs + e_idle,
        busy,
        over_budget,
    }
}

/// Builds the full staging plan and per-kernel offload verdicts.
pub fn plan(cfg: &ClusterConfig, wl: &Workload, kernels: &[AnalysisKernel]) -> Result<StagingPlan> {
    cfg.validate()?;
    wl.validate()?;
    for k in kernels {
        if !(k.throughput > 0.0) {
            return Err(StagingError::InvalidInput(format!(
                "kernel {:?} throughput must be > 0",
                k.name
            )));
        }
    }
    let s_cap = match s_capacity(cfg, wl) {
        Ok(v) => Some(v),
        Err(StagingError::Unconstrained) => None,
        Err(e) => return Err(e),
    };
    let s = staging_ratio(cfg, wl)?;
    let t_ssd_min = min_kernel_throughput(cfg, wl, s)?;
    let t_c = checkpoint_drain_time(cfg, wl, s);

    let verdicts: Vec<KernelVerdict> = kernels
        .iter()
        .map(|k| KernelVerdict {
            name: k.name.clone(),
            throughput: k.throughput,
            t_a: analysis_drain_time(cfg, wl, s, k),
            feasible: check_feasible(cfg, wl, s, k),
            offloadable: k.throughput > t_ssd_min,
            energy: energy_per_iteration(cfg, wl, s, k),
        })
        .collect();

    Ok(StagingPlan {
        s_capacity: s_cap,
        s_bandwidth: s_bandwidth(cfg),
        s,
        t_c,
        t_ssd_min,
        feasible: verdicts.iter().any(|v| v.offloadable),
        kernels: verdicts,
    })
}
