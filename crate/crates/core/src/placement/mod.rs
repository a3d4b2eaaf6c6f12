//! Deterministic discrete-event simulator for managed data placement.
//!
//! Storage sites hand out leased space allocations guarded by ACLs, and
//! transfers share site interfaces under an equal fair-share rule that is
//! recomputed at every event. Failures are transient outages with explicit
//! durations. A lossy bounded priority queue serves as the comparison
//! baseline for the managed (retrying, unbounded-queue) mode.
//!
//! ```
//! use dwstage::placement::{simulate, Scenario};
//!
//! let scenario: Scenario = serde_json::from_str(r#"{
//!     "sites": [
//!         {"id": "A", "capacity": "1TB", "ingress_bw": "10GB/s", "egress_bw": "10GB/s"},
//!         {"id": "B", "capacity": "1TB", "ingress_bw": "10GB/s", "egress_bw": "10GB/s"}
//!     ],
//!     "transfers": [
//!         {"id": "t1", "source": {"site": "A"}, "destination": {"site": "B"},
//!          "size": "100GB", "owner": "alice", "at": 0}
//!     ]
//! }"#).unwrap();
//! let out = simulate(&scenario).unwrap();
//! assert_eq!(out.jobs[0].completed_at, Some(10.0));
//! ```

mod sim;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units;

pub use sim::{Allocation, Simulator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("unknown site {0:?}")]
    UnknownSite(String),
    #[error("unknown allocation {0:?}")]
    UnknownAllocation(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("principal {principal:?} lacks {permission} permission on allocation {allocation:?}")]
    AclDenied {
        principal: String,
        permission: Permission,
        allocation: String,
    },
    #[error("{target:?} has {free} bytes free, {requested} requested")]
    InsufficientSpace { target: String, requested: f64, free: f64 },
    #[error("{needed} replicas requested but only {eligible} eligible sites")]
    InsufficientSites { needed: usize, eligible: usize },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageSite {
    pub id: String,
    #[serde(with = "units::bytes")]
    pub capacity: f64,
    #[serde(with = "units::rate")]
    pub ingress_bw: f64,
    #[serde(with = "units::rate")]
    pub egress_bw: f64,
    /// Marks a tertiary (tape-backed) tier. Informational only.
    #[serde(default)]
    pub backend: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Permission {
    Read,
    Write,
}

impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Permission::Read => "read",
            Permission::Write => "write",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AclEntry {
    pub principal: String,
    pub permission: Permission,
}

/// A request for leased space on a site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationRequest {
    pub id: String,
    pub site: String,
    #[serde(with = "units::bytes")]
    pub size: f64,
    /// Lease term; `"inf"` never expires.
    #[serde(with = "units::seconds")]
    pub duration: f64,
    #[serde(default)]
    pub acl: Vec<AclEntry>,
    #[serde(with = "units::seconds", default)]
    pub at: f64,
    /// Wait for space instead of being denied outright.
    #[serde(default)]
    pub wait: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Site(String),
    Allocation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferJob {
    pub id: String,
    pub source: Endpoint,
    pub destination: Endpoint,
    #[serde(with = "units::bytes")]
    pub size: f64,
    pub owner: String,
    /// Higher is more urgent. Used by the baseline queue only.
    #[serde(default)]
    pub priority: i64,
    /// Explicit request order for [`Ordering::ByOrderField`]; lower first.
    #[serde(default)]
    pub order: Option<u64>,
    #[serde(with = "units::seconds", default)]
    pub at: f64,
}

/// A dataset to be copied to `replica_count` other sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationRequest {
    pub dataset: String,
    pub source: String,
    #[serde(with = "units::bytes")]
    pub size: f64,
    pub owner: String,
    #[serde(default)]
    pub priority: i64,
    #[serde(default)]
    pub order: Option<u64>,
    #[serde(with = "units::seconds", default)]
    pub at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// The link between `site` and `peer`, or every link of `site` if no peer.
    LinkDown,
    SiteDown,
    /// The site refuses writes outside its allocations.
    DiskOverflow,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::LinkDown => "link-down",
            FailureKind::SiteDown => "site-down",
            FailureKind::DiskOverflow => "disk-overflow",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSpec {
    pub kind: FailureKind,
    pub site: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<String>,
    #[serde(with = "units::seconds")]
    pub at: f64,
    /// Outage length; `"inf"` is permanent.
    #[serde(with = "units::seconds")]
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    #[default]
    Fifo,
    ByOrderField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Managed,
    LossyPriorityBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementPolicy {
    pub replica_count: usize,
    pub ordering: Ordering,
    /// Re-queues allowed after failures before a job is dropped.
    pub retry_limit: u32,
    pub mode: Mode,
    /// Bound on waiting jobs in baseline mode; ignored in managed mode.
    pub queue_capacity: Option<usize>,
    /// Concurrent active transfers per source site; `None` is unlimited.
    pub slots_per_site: Option<usize>,
}

impl Default for PlacementPolicy {
    fn default() -> Self {
        PlacementPolicy {
            replica_count: 1,
            ordering: Ordering::Fifo,
            retry_limit: 3,
            mode: Mode::Managed,
            queue_capacity: None,
            slots_per_site: None,
        }
    }
}

fn infinite() -> f64 {
    f64::INFINITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub sites: Vec<StorageSite>,
    #[serde(default)]
    pub policy: PlacementPolicy,
    #[serde(default)]
    pub allocations: Vec<AllocationRequest>,
    #[serde(default)]
    pub transfers: Vec<TransferJob>,
    #[serde(default)]
    pub replications: Vec<ReplicationRequest>,
    #[serde(default)]
    pub failures: Vec<FailureSpec>,
    /// Simulation horizon.
    #[serde(with = "units::seconds", default = "infinite")]
    pub until: f64,
}

impl Scenario {
    /// Bundled overload scenario: arrivals outpace a single transfer slot.
    pub fn overload() -> Self {
        serde_json::from_str(include_str!("../../data/overload_scenario.json"))
            .expect("bundled overload scenario parses")
    }

    /// Copy with the policy switched to `mode`. Managed mode gets an unbounded
    /// queue and at least as many retries as there are scheduled failures.
    pub fn with_mode(&self, mode: Mode) -> Self {
        let mut s = self.clone();
        s.policy.mode = mode;
        if mode == Mode::Managed {
            s.policy.queue_capacity = None;
            s.policy.retry_limit = s.policy.retry_limit.max(s.failures.len() as u32);
        }
        s
    }

    pub fn validate(&self) -> Result<(), PlacementError> {
        let invalid = |m: String| Err(PlacementError::Invalid(m));
        if self.sites.is_empty() {
            return invalid("no sites".into());
        }
        let mut ids = BTreeSet::new();
        for s in &self.sites {
            if !ids.insert(s.id.as_str()) {
                return Err(PlacementError::DuplicateId(s.id.clone()));
            }
            if !(s.capacity > 0.0 && s.ingress_bw > 0.0 && s.egress_bw > 0.0) {
                return invalid(format!("site {:?} needs positive capacity and bandwidths", s.id));
            }
            if !(s.ingress_bw.is_finite() && s.egress_bw.is_finite()) {
                return invalid(format!("site {:?} has infinite bandwidth", s.id));
            }
        }
        let site = |id: &str| {
            if ids.contains(id) {
                Ok(())
            } else {
                Err(PlacementError::UnknownSite(id.to_string()))
            }
        };
        let time = |what: &str, t: f64| {
            if t.is_finite() && t >= 0.0 {
                Ok(())
            } else {
                invalid(format!("{what} time {t} must be finite and non-negative"))
            }
        };
        let p = &self.policy;
        if p.replica_count < 1 {
            return invalid("replica_count must be at least 1".into());
        }
        if p.queue_capacity == Some(0) {
            return invalid("queue_capacity must be at least 1".into());
        }
        if p.slots_per_site == Some(0) {
            return invalid("slots_per_site must be at least 1".into());
        }
        if !(self.until >= 0.0) {
            return invalid("until must be non-negative".into());
        }
        let mut alloc_ids = BTreeSet::new();
        for a in &self.allocations {
            site(&a.site)?;
            time("allocation", a.at)?;
            if !alloc_ids.insert(a.id.as_str()) {
                return Err(PlacementError::DuplicateId(a.id.clone()));
            }
            if !(a.size > 0.0) || !a.size.is_finite() {
                return invalid(format!("allocation {:?} needs a positive size", a.id));
            }
            if !(a.duration > 0.0) {
                return invalid(format!("allocation {:?} needs a positive duration", a.id));
            }
        }
        let endpoint = |e: &Endpoint| match e {
            Endpoint::Site(s) => site(s),
            Endpoint::Allocation(a) if alloc_ids.contains(a.as_str()) => Ok(()),
            Endpoint::Allocation(a) => Err(PlacementError::UnknownAllocation(a.clone())),
        };
        let mut job_ids = BTreeSet::new();
        for t in &self.transfers {
            endpoint(&t.source)?;
            endpoint(&t.destination)?;
            time("transfer", t.at)?;
            if !job_ids.insert(t.id.clone()) {
                return Err(PlacementError::DuplicateId(t.id.clone()));
            }
            if !(t.size > 0.0) || !t.size.is_finite() {
                return invalid(format!("transfer {:?} needs a positive size", t.id));
            }
        }
        for r in &self.replications {
            site(&r.source)?;
            time("replication", r.at)?;
            if !(r.size > 0.0) || !r.size.is_finite() {
                return invalid(format!("dataset {:?} needs a positive size", r.dataset));
            }
            let eligible = self.sites.len() - 1;
            if p.replica_count > eligible {
                return Err(PlacementError::InsufficientSites {
                    needed: p.replica_count,
                    eligible,
                });
            }
            for k in 0..p.replica_count {
                if !job_ids.insert(replica_job_id(&r.dataset, k)) {
                    return Err(PlacementError::DuplicateId(replica_job_id(&r.dataset, k)));
                }
            }
        }
        for f in &self.failures {
            site(&f.site)?;
            time("failure", f.at)?;
            if let Some(peer) = &f.peer {
                site(peer)?;
                if f.kind != FailureKind::LinkDown {
                    return invalid(format!("{} failures take no peer", f.kind));
                }
            }
            if !(f.duration > 0.0) {
                return invalid("failure duration must be positive".into());
            }
        }
        Ok(())
    }
}

pub(crate) fn replica_job_id(dataset: &str, k: usize) -> String {
    format!("{dataset}#r{}", k + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    AllocGranted,
    AllocDenied,
    AllocQueued,
    AllocExpired,
    TransferQueued,
    TransferRejected,
    TransferStart,
    TransferProgress,
    TransferComplete,
    TransferDropped,
    FailureInjected,
    FailureRecovered,
    RetryScheduled,
    ReplicaPlaced,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
    pub subject: String,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobState {
    Queued,
    Active,
    Done,
    Dropped,
    FailedRetrying,
    Rejected,
}

/// Final state of one transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub size: f64,
    pub state: JobState,
    pub bytes_moved: f64,
    pub submitted_at: f64,
    pub completed_at: Option<f64>,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub submitted: usize,
    pub completed: usize,
    pub dropped: usize,
    pub rejected: usize,
    pub unfinished: usize,
    pub drop_rate: f64,
    pub mean_completion_time: Option<f64>,
    pub bytes_submitted: f64,
    pub bytes_moved: f64,
    pub bytes_delivered: f64,
    pub bytes_abandoned: f64,
    pub retries: u32,
    pub end_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub log: Vec<SimEvent>,
    pub metrics: Metrics,
    pub jobs: Vec<JobRecord>,
}

impl SimOutput {
    /// The event log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }
}

/// Dropped over queued transfers, read from the log; 0 when nothing was queued.
pub fn drop_rate(log: &[SimEvent]) -> f64 {
    let queued = log.iter().filter(|e| e.kind == EventKind::TransferQueued).count();
    let dropped = log.iter().filter(|e| e.kind == EventKind::TransferDropped).count();
    if queued == 0 {
        0.0
    } else {
        dropped as f64 / queued as f64
    }
}

/// Validates and runs a scenario to its horizon.
pub fn simulate(scenario: &Scenario) -> Result<SimOutput, PlacementError> {
    let mut sim = Simulator::new(scenario)?;
    sim.run_until(scenario.until);
    Ok(sim.finish())
}
