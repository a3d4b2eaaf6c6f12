use std::cmp::{Ordering as CmpOrdering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use serde_json::json;

use super::{
    replica_job_id, AllocationRequest, Endpoint, EventKind, FailureKind, FailureSpec, JobRecord, JobState, Metrics,
    Mode, Ordering, Permission, PlacementError, PlacementPolicy, ReplicationRequest, Scenario, SimEvent, SimOutput,
    StorageSite, TransferJob,
};

/// Completion times within this relative distance of the earliest one are
/// treated as simultaneous.
const FINISH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Action {
    Allocate(AllocationRequest),
    Submit(TransferJob),
    Replicate(ReplicationRequest),
    FailureStart(usize),
    FailureEnd(usize),
    LeaseExpire(String),
}

impl Action {
    /// Tie-break class among events at one instant; completions (not on the
    /// heap) always go first.
    fn class(&self) -> u8 {
        match self {
            Action::FailureEnd(_) => 1,
            Action::LeaseExpire(_) => 2,
            Action::FailureStart(_) => 3,
            Action::Allocate(_) => 4,
            Action::Submit(_) | Action::Replicate(_) => 5,
        }
    }
}

#[derive(Debug)]
struct Pending {
    time: f64,
    class: u8,
    seq: u64,
    action: Action,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == CmpOrdering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        self.time
            .total_cmp(&other.time)
            .then(self.class.cmp(&other.class))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug)]
struct SiteState {
    spec: StorageSite,
    allocated: f64,
    /// Bytes written or reserved outside allocations.
    direct: f64,
    waiting: VecDeque<AllocationRequest>,
}

impl SiteState {
    fn free(&self) -> f64 {
        self.spec.capacity - self.allocated - self.direct
    }
}

#[derive(Debug)]
struct AllocState {
    req: AllocationRequest,
    expired: bool,
    used: f64,
}

/// A granted lease.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub id: String,
    pub site: String,
    pub size: f64,
    pub granted_at: f64,
    pub expires_at: f64,
}

#[derive(Debug)]
struct Job {
    spec: TransferJob,
    src: String,
    dst: String,
    /// Destination is the site itself rather than an allocation.
    direct: bool,
    replica_of: Option<String>,
    state: JobState,
    moved: f64,
    rate: f64,
    attempts: u32,
    submitted_at: f64,
    completed_at: Option<f64>,
    enqueue_seq: u64,
    waiting_on: Option<usize>,
}

#[derive(Debug)]
struct ActiveFailure {
    spec: FailureSpec,
    active: bool,
}

impl ActiveFailure {
    fn blocks(&self, job: &Job) -> bool {
        if !self.active {
            return false;
        }
        let s = &self.spec.site;
        match (self.spec.kind, &self.spec.peer) {
            (FailureKind::SiteDown, _) | (FailureKind::LinkDown, None) => *s == job.src || *s == job.dst,
            (FailureKind::LinkDown, Some(p)) => {
                (*s == job.src && *p == job.dst) || (*s == job.dst && *p == job.src)
            }
            (FailureKind::DiskOverflow, _) => job.direct && *s == job.dst,
        }
    }
}

/// Event-driven engine. Build one from a [`Scenario`], optionally drive it
/// with the direct operations, then [`run_until`](Simulator::run_until).
#[derive(Debug)]
pub struct Simulator {
    policy: PlacementPolicy,
    now: f64,
    sites: BTreeMap<String, SiteState>,
    allocs: BTreeMap<String, AllocState>,
    jobs: Vec<Job>,
    job_index: BTreeMap<String, usize>,
    queue: Vec<usize>,
    failures: Vec<ActiveFailure>,
    heap: BinaryHeap<Reverse<Pending>>,
    heap_seq: u64,
    enqueue_seq: u64,
    log: Vec<SimEvent>,
}

impl Simulator {
    pub fn new(scenario: &Scenario) -> Result<Self, PlacementError> {
        scenario.validate()?;
        let mut sim = Simulator {
            policy: scenario.policy.clone(),
            now: 0.0,
            sites: scenario
                .sites
                .iter()
                .map(|s| {
                    (
                        s.id.clone(),
                        SiteState {
                            spec: s.clone(),
                            allocated: 0.0,
                            direct: 0.0,
                            waiting: VecDeque::new(),
                        },
                    )
                })
                .collect(),
            allocs: BTreeMap::new(),
            jobs: Vec::new(),
            job_index: BTreeMap::new(),
            queue: Vec::new(),
            failures: Vec::new(),
            heap: BinaryHeap::new(),
            heap_seq: 0,
            enqueue_seq: 0,
            log: Vec::new(),
        };
        for a in &scenario.allocations {
            sim.push(a.at, Action::Allocate(a.clone()));
        }
        for t in &scenario.transfers {
            sim.push(t.at, Action::Submit(t.clone()));
        }
        for r in &scenario.replications {
            sim.push(r.at, Action::Replicate(r.clone()));
        }
        for f in &scenario.failures {
            sim.inject_failure(f.clone());
        }
        Ok(sim)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn log(&self) -> &[SimEvent] {
        &self.log
    }

    fn push(&mut self, time: f64, action: Action) {
        self.heap_seq += 1;
        self.heap.push(Reverse(Pending {
            time,
            class: action.class(),
            seq: self.heap_seq,
            action,
        }));
    }

    fn emit(&mut self, kind: EventKind, subject: &str, detail: serde_json::Value) {
        let seq = self.log.len() as u64;
        self.log.push(SimEvent {
            time: self.now,
            seq,
            kind,
            subject: subject.to_string(),
            detail,
        });
    }

    /// Schedules an outage. Times earlier than now are clamped to now.
    pub fn inject_failure(&mut self, mut spec: FailureSpec) {
        spec.at = spec.at.max(self.now);
        let at = spec.at;
        self.failures.push(ActiveFailure { spec, active: false });
        self.push(at, Action::FailureStart(self.failures.len() - 1));
    }

    /// Requests space at the current time. `Ok(None)` means the request is
    /// waiting for space to free up.
    pub fn allocate(&mut self, req: AllocationRequest) -> Result<Option<Allocation>, PlacementError> {
        if self.allocs.contains_key(&req.id) || self.sites.values().any(|s| s.waiting.iter().any(|w| w.id == req.id)) {
            return Err(PlacementError::DuplicateId(req.id));
        }
        let site = self
            .sites
            .get(&req.site)
            .ok_or_else(|| PlacementError::UnknownSite(req.site.clone()))?;
        if !(req.size > 0.0) || !(req.duration > 0.0) {
            return Err(PlacementError::Invalid(format!(
                "allocation {:?} needs positive size and duration",
                req.id
            )));
        }
        let free = site.free();
        if site.waiting.is_empty() && req.size <= free {
            return Ok(Some(self.grant(req)));
        }
        if req.wait {
            self.emit(
                EventKind::AllocQueued,
                &req.id,
                json!({"site": req.site, "size": req.size, "free": free}),
            );
            self.sites.get_mut(&req.site).expect("site exists").waiting.push_back(req);
            return Ok(None);
        }
        self.emit(
            EventKind::AllocDenied,
            &req.id,
            json!({"site": req.site, "size": req.size, "free": free, "reason": "insufficient-space"}),
        );
        Err(PlacementError::InsufficientSpace {
            target: req.site,
            requested: req.size,
            free,
        })
    }

    fn grant(&mut self, req: AllocationRequest) -> Allocation {
        let expires_at = self.now + req.duration;
        let site = self.sites.get_mut(&req.site).expect("site exists");
        site.allocated += req.size;
        let allocated = site.allocated;
        self.emit(
            EventKind::AllocGranted,
            &req.id,
            json!({"site": req.site, "size": req.size, "allocated": allocated, "expires_at": time_value(expires_at)}),
        );
        if expires_at.is_finite() {
            self.push(expires_at, Action::LeaseExpire(req.id.clone()));
        }
        let grant = Allocation {
            id: req.id.clone(),
            site: req.site.clone(),
            size: req.size,
            granted_at: self.now,
            expires_at,
        };
        self.allocs.insert(
            req.id.clone(),
            AllocState {
                req,
                expired: false,
                used: 0.0,
            },
        );
        grant
    }

    fn expire(&mut self, id: &str) {
        let (site_id, size) = {
            let a = self.allocs.get_mut(id).expect("lease exists");
            a.expired = true;
            (a.req.site.clone(), a.req.size)
        };
        let site = self.sites.get_mut(&site_id).expect("site exists");
        site.allocated -= size;
        let allocated = site.allocated;
        self.emit(
            EventKind::AllocExpired,
            id,
            json!({"site": site_id, "size": size, "allocated": allocated}),
        );
        let endpoint = Endpoint::Allocation(id.to_string());
        let affected: Vec<usize> = (0..self.jobs.len())
            .filter(|&j| {
                let job = &self.jobs[j];
                matches!(job.state, JobState::Queued | JobState::Active | JobState::FailedRetrying)
                    && (job.spec.source == endpoint || job.spec.destination == endpoint)
            })
            .collect();
        for j in affected {
            self.drop_job(j, "lease-expired");
        }
        loop {
            let site = self.sites.get_mut(&site_id).expect("site exists");
            match site.waiting.front() {
                Some(w) if w.size <= site.free() => {
                    let req = site.waiting.pop_front().expect("front exists");
                    self.grant(req);
                }
                _ => break,
            }
        }
    }

    fn resolve(&self, e: &Endpoint, owner: &str, need: Permission) -> Result<String, PlacementError> {
        match e {
            Endpoint::Site(s) if self.sites.contains_key(s) => Ok(s.clone()),
            Endpoint::Site(s) => Err(PlacementError::UnknownSite(s.clone())),
            Endpoint::Allocation(a) => {
                let state = self
                    .allocs
                    .get(a)
                    .ok_or_else(|| PlacementError::UnknownAllocation(a.clone()))?;
                if state.expired {
                    return Err(PlacementError::UnknownAllocation(a.clone()));
                }
                if !state.req.acl.iter().any(|e| e.principal == owner && e.permission == need) {
                    return Err(PlacementError::AclDenied {
                        principal: owner.to_string(),
                        permission: need,
                        allocation: a.clone(),
                    });
                }
                Ok(state.req.site.clone())
            }
        }
    }

    /// Accepts a transfer at the current time, reserving destination space.
    /// Rejections are logged and returned.
    pub fn submit_transfer(&mut self, job: TransferJob) -> Result<(), PlacementError> {
        self.submit(job, None)
    }

    fn submit(&mut self, mut job: TransferJob, replica_of: Option<String>) -> Result<(), PlacementError> {
        job.at = self.now;
        let checked = self.check_submission(&job);
        let (src, dst) = match checked {
            Ok(v) => v,
            Err(err) => {
                self.emit(
                    EventKind::TransferRejected,
                    &job.id,
                    json!({"reason": rejection_reason(&err), "error": err.to_string()}),
                );
                if !self.job_index.contains_key(&job.id) {
                    self.record(job, String::new(), String::new(), replica_of, JobState::Rejected);
                }
                return Err(err);
            }
        };
        match &job.destination {
            Endpoint::Allocation(a) => self.allocs.get_mut(a).expect("checked").used += job.size,
            Endpoint::Site(s) => self.sites.get_mut(s).expect("checked").direct += job.size,
        }
        self.emit(
            EventKind::TransferQueued,
            &job.id,
            json!({"source": src, "destination": dst, "size": job.size, "priority": job.priority}),
        );
        let j = self.record(job, src, dst, replica_of, JobState::Queued);
        self.enqueue(j);
        Ok(())
    }

    fn check_submission(&self, job: &TransferJob) -> Result<(String, String), PlacementError> {
        if self.job_index.contains_key(&job.id) {
            return Err(PlacementError::DuplicateId(job.id.clone()));
        }
        if !(job.size > 0.0) || !job.size.is_finite() {
            return Err(PlacementError::Invalid(format!("transfer {:?} needs a positive size", job.id)));
        }
        let src = self.resolve(&job.source, &job.owner, Permission::Read)?;
        let dst = self.resolve(&job.destination, &job.owner, Permission::Write)?;
        let (target, free) = match &job.destination {
            Endpoint::Allocation(a) => {
                let state = &self.allocs[a];
                (a.clone(), state.req.size - state.used)
            }
            Endpoint::Site(s) => (s.clone(), self.sites[s].free()),
        };
        if job.size > free {
            return Err(PlacementError::InsufficientSpace {
                target,
                requested: job.size,
                free,
            });
        }
        Ok((src, dst))
    }

    fn record(&mut self, spec: TransferJob, src: String, dst: String, replica_of: Option<String>, state: JobState) -> usize {
        let j = self.jobs.len();
        self.job_index.insert(spec.id.clone(), j);
        let direct = matches!(spec.destination, Endpoint::Site(_));
        self.jobs.push(Job {
            spec,
            src,
            dst,
            direct,
            replica_of,
            state,
            moved: 0.0,
            rate: 0.0,
            attempts: 0,
            submitted_at: self.now,
            completed_at: None,
            enqueue_seq: 0,
            waiting_on: None,
        });
        j
    }

    fn enqueue(&mut self, j: usize) {
        self.enqueue_seq += 1;
        self.jobs[j].enqueue_seq = self.enqueue_seq;
        self.jobs[j].state = JobState::Queued;
        self.queue.push(j);
        if self.policy.mode != Mode::LossyPriorityBaseline {
            return;
        }
        let Some(cap) = self.policy.queue_capacity else {
            return;
        };
        if self.queue.len() > cap {
            // lowest priority, newest on ties
            let victim = *self
                .queue
                .iter()
                .min_by(|&&a, &&b| {
                    let (ja, jb) = (&self.jobs[a], &self.jobs[b]);
                    ja.spec
                        .priority
                        .cmp(&jb.spec.priority)
                        .then(jb.enqueue_seq.cmp(&ja.enqueue_seq))
                })
                .expect("queue is non-empty");
            self.drop_job(victim, "queue-full");
        }
    }

    fn release(&mut self, j: usize) {
        let job = &self.jobs[j];
        let size = job.spec.size;
        match &job.spec.destination {
            Endpoint::Allocation(a) => {
                if let Some(state) = self.allocs.get_mut(a) {
                    state.used -= size;
                }
            }
            Endpoint::Site(s) => {
                if let Some(site) = self.sites.get_mut(s) {
                    site.direct -= size;
                }
            }
        }
    }

    fn drop_job(&mut self, j: usize, reason: &str) {
        self.queue.retain(|&q| q != j);
        self.release(j);
        let job = &mut self.jobs[j];
        job.state = JobState::Dropped;
        job.rate = 0.0;
        job.waiting_on = None;
        let (id, moved, attempts) = (job.spec.id.clone(), job.moved, job.attempts);
        self.emit(
            EventKind::TransferDropped,
            &id,
            json!({"reason": reason, "bytes_moved": moved, "attempts": attempts}),
        );
    }

    /// Schedules copies of a dataset onto the sites with the most free space
    /// (ties by site id). Returns the new transfer ids.
    pub fn replicate(&mut self, req: ReplicationRequest) -> Result<Vec<String>, PlacementError> {
        if !self.sites.contains_key(&req.source) {
            return Err(PlacementError::UnknownSite(req.source.clone()));
        }
        let down: Vec<&str> = self
            .failures
            .iter()
            .filter(|f| f.active && f.spec.kind == FailureKind::SiteDown)
            .map(|f| f.spec.site.as_str())
            .collect();
        let mut eligible: Vec<(&str, f64)> = self
            .sites
            .iter()
            .filter(|(id, s)| **id != req.source && !down.contains(&id.as_str()) && s.free() >= req.size)
            .map(|(id, s)| (id.as_str(), s.free()))
            .collect();
        eligible.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        let needed = self.policy.replica_count;
        if eligible.len() < needed {
            let err = PlacementError::InsufficientSites {
                needed,
                eligible: eligible.len(),
            };
            self.emit(
                EventKind::TransferRejected,
                &req.dataset,
                json!({"reason": "insufficient-sites", "error": err.to_string()}),
            );
            return Err(err);
        }
        let targets: Vec<String> = eligible[..needed].iter().map(|(id, _)| id.to_string()).collect();
        let mut ids = Vec::with_capacity(needed);
        for (k, site) in targets.into_iter().enumerate() {
            let job = TransferJob {
                id: replica_job_id(&req.dataset, k),
                source: Endpoint::Site(req.source.clone()),
                destination: Endpoint::Site(site),
                size: req.size,
                owner: req.owner.clone(),
                priority: req.priority,
                order: req.order,
                at: self.now,
            };
            ids.push(job.id.clone());
            self.submit(job, Some(req.dataset.clone()))?;
        }
        Ok(ids)
    }

    fn start_failure(&mut self, i: usize) {
        self.failures[i].active = true;
        let spec = self.failures[i].spec.clone();
        let recovers = spec.at + spec.duration;
        self.emit(
            EventKind::FailureInjected,
            &spec.site,
            json!({"kind": spec.kind, "peer": spec.peer, "duration": time_value(spec.duration)}),
        );
        if recovers.is_finite() {
            self.push(recovers, Action::FailureEnd(i));
        }
        let hit: Vec<usize> = (0..self.jobs.len())
            .filter(|&j| self.jobs[j].state == JobState::Active && self.failures[i].blocks(&self.jobs[j]))
            .collect();
        for j in hit {
            self.jobs[j].rate = 0.0;
            self.jobs[j].attempts += 1;
            if self.policy.mode == Mode::LossyPriorityBaseline {
                self.drop_job(j, "failure");
            } else if self.jobs[j].attempts > self.policy.retry_limit {
                self.drop_job(j, "retry-limit");
            } else {
                let job = &mut self.jobs[j];
                job.state = JobState::FailedRetrying;
                job.waiting_on = Some(i);
                let (id, moved, attempt) = (job.spec.id.clone(), job.moved, job.attempts);
                self.emit(
                    EventKind::RetryScheduled,
                    &id,
                    json!({"at": time_value(recovers), "attempt": attempt, "bytes_moved": moved}),
                );
            }
        }
    }

    fn end_failure(&mut self, i: usize) {
        self.failures[i].active = false;
        let site = self.failures[i].spec.site.clone();
        let kind = self.failures[i].spec.kind;
        self.emit(EventKind::FailureRecovered, &site, json!({"kind": kind}));
        let waiting: Vec<usize> = (0..self.jobs.len())
            .filter(|&j| self.jobs[j].state == JobState::FailedRetrying && self.jobs[j].waiting_on == Some(i))
            .collect();
        for j in waiting {
            self.jobs[j].waiting_on = None;
            self.enqueue(j);
        }
    }

    fn queue_key(&self, j: usize) -> (i64, u64, u64) {
        let job = &self.jobs[j];
        match (self.policy.mode, self.policy.ordering) {
            (Mode::LossyPriorityBaseline, _) => (-job.spec.priority, 0, job.enqueue_seq),
            (Mode::Managed, Ordering::Fifo) => (0, 0, job.enqueue_seq),
            (Mode::Managed, Ordering::ByOrderField) => (0, job.spec.order.unwrap_or(u64::MAX), job.enqueue_seq),
        }
    }

    fn schedule(&mut self) {
        let mut order = self.queue.clone();
        order.sort_by_key(|&j| self.queue_key(j));
        let mut busy: BTreeMap<String, usize> = BTreeMap::new();
        for job in self.jobs.iter().filter(|j| j.state == JobState::Active) {
            *busy.entry(job.src.clone()).or_default() += 1;
        }
        let slots = self.policy.slots_per_site.unwrap_or(usize::MAX);
        for j in order {
            let job = &self.jobs[j];
            let used = busy.get(&job.src).copied().unwrap_or(0);
            if used >= slots || self.failures.iter().any(|f| f.blocks(job)) {
                continue;
            }
            *busy.entry(job.src.clone()).or_default() += 1;
            self.queue.retain(|&q| q != j);
            let job = &mut self.jobs[j];
            job.state = JobState::Active;
            let (id, moved, attempt) = (job.spec.id.clone(), job.moved, job.attempts + 1);
            self.emit(
                EventKind::TransferStart,
                &id,
                json!({"bytes_moved": moved, "attempt": attempt}),
            );
        }
    }

    fn update_rates(&mut self) {
        let mut egress: BTreeMap<&str, usize> = BTreeMap::new();
        let mut ingress: BTreeMap<&str, usize> = BTreeMap::new();
        for job in self.jobs.iter().filter(|j| j.state == JobState::Active) {
            *egress.entry(job.src.as_str()).or_default() += 1;
            *ingress.entry(job.dst.as_str()).or_default() += 1;
        }
        let rates: Vec<(usize, f64)> = self
            .jobs
            .iter()
            .enumerate()
            .filter(|(_, j)| j.state == JobState::Active)
            .map(|(i, j)| {
                let out = self.sites[&j.src].spec.egress_bw / egress[j.src.as_str()] as f64;
                let inn = self.sites[&j.dst].spec.ingress_bw / ingress[j.dst.as_str()] as f64;
                (i, out.min(inn))
            })
            .collect();
        for (i, rate) in rates {
            let old = self.jobs[i].rate;
            self.jobs[i].rate = rate;
            if old > 0.0 && old != rate {
                let (id, moved) = (self.jobs[i].spec.id.clone(), self.jobs[i].moved);
                self.emit(
                    EventKind::TransferProgress,
                    &id,
                    json!({"bytes_moved": moved, "rate": rate}),
                );
            }
        }
    }

    fn next_completion(&self) -> f64 {
        self.jobs
            .iter()
            .filter(|j| j.state == JobState::Active)
            .map(|j| self.now + (j.spec.size - j.moved) / j.rate)
            .fold(f64::INFINITY, f64::min)
    }

    fn advance(&mut self, to: f64) {
        let dt = to - self.now;
        if dt > 0.0 {
            for job in self.jobs.iter_mut().filter(|j| j.state == JobState::Active) {
                job.moved = (job.moved + job.rate * dt).min(job.spec.size);
            }
        }
        self.now = to;
    }

    fn complete_due(&mut self, at: f64) {
        let limit = at * (1.0 + FINISH_TOLERANCE) + FINISH_TOLERANCE;
        let due: Vec<usize> = (0..self.jobs.len())
            .filter(|&j| {
                let job = &self.jobs[j];
                job.state == JobState::Active && self.now_finish(job) <= limit
            })
            .collect();
        self.advance(at);
        for j in due {
            let job = &mut self.jobs[j];
            job.state = JobState::Done;
            job.moved = job.spec.size;
            job.rate = 0.0;
            job.completed_at = Some(at);
            let (id, size, elapsed, dst) = (job.spec.id.clone(), job.spec.size, at - job.submitted_at, job.dst.clone());
            let replica = job.replica_of.clone();
            self.emit(
                EventKind::TransferComplete,
                &id,
                json!({"bytes": size, "elapsed": elapsed}),
            );
            if let Some(dataset) = replica {
                self.emit(EventKind::ReplicaPlaced, &dataset, json!({"site": dst, "transfer": id}));
            }
        }
    }

    fn now_finish(&self, job: &Job) -> f64 {
        self.now + (job.spec.size - job.moved) / job.rate
    }

    fn dispatch(&mut self, action: Action) {
        // Rejections are already in the log.
        match action {
            Action::Allocate(req) => {
                let _ = self.allocate(req);
            }
            Action::Submit(job) => {
                let _ = self.submit_transfer(job);
            }
            Action::Replicate(req) => {
                let _ = self.replicate(req);
            }
            Action::FailureStart(i) => self.start_failure(i),
            Action::FailureEnd(i) => self.end_failure(i),
            Action::LeaseExpire(id) => self.expire(&id),
        }
    }

    /// Processes every event up to and including `until`.
    pub fn run_until(&mut self, until: f64) {
        self.schedule();
        self.update_rates();
        loop {
            let next_heap = self.heap.peek().map_or(f64::INFINITY, |p| p.0.time);
            let next_done = self.next_completion();
            let t = next_heap.min(next_done);
            if t > until || !t.is_finite() {
                if until.is_finite() && until > self.now {
                    self.advance(until);
                }
                return;
            }
            if next_done <= next_heap {
                self.complete_due(next_done);
            } else {
                let Reverse(p) = self.heap.pop().expect("peeked");
                self.advance(p.time);
                self.dispatch(p.action);
            }
            self.schedule();
            self.update_rates();
        }
    }

    pub fn finish(self) -> SimOutput {
        let jobs: Vec<JobRecord> = self
            .jobs
            .iter()
            .map(|j| JobRecord {
                id: j.spec.id.clone(),
                size: j.spec.size,
                state: j.state,
                bytes_moved: j.moved,
                submitted_at: j.submitted_at,
                completed_at: j.completed_at,
                attempts: j.attempts,
            })
            .collect();
        let count = |s: JobState| jobs.iter().filter(|j| j.state == s).count();
        let accepted: Vec<&JobRecord> = jobs.iter().filter(|j| j.state != JobState::Rejected).collect();
        let completed = count(JobState::Done);
        let dropped = count(JobState::Dropped);
        let submitted = accepted.len();
        let durations: Vec<f64> = jobs
            .iter()
            .filter_map(|j| j.completed_at.map(|c| c - j.submitted_at))
            .collect();
        let metrics = Metrics {
            submitted,
            completed,
            dropped,
            rejected: count(JobState::Rejected),
            unfinished: submitted - completed - dropped,
            drop_rate: if submitted == 0 {
                0.0
            } else {
                dropped as f64 / submitted as f64
            },
            mean_completion_time: if durations.is_empty() {
                None
            } else {
                Some(durations.iter().sum::<f64>() / durations.len() as f64)
            },
            bytes_submitted: accepted.iter().map(|j| j.size).sum(),
            bytes_moved: accepted.iter().map(|j| j.bytes_moved).sum(),
            bytes_delivered: accepted
                .iter()
                .filter(|j| j.state == JobState::Done)
                .map(|j| j.size)
                .sum(),
            bytes_abandoned: accepted
                .iter()
                .filter(|j| j.state == JobState::Dropped)
                .map(|j| j.bytes_moved)
                .sum(),
            retries: self
                .log
                .iter()
                .filter(|e| e.kind == EventKind::RetryScheduled)
                .count() as u32,
            end_time: self.now,
        };
        SimOutput {
            log: self.log,
            metrics,
            jobs,
        }
    }
}

/// Finite times as numbers, unbounded ones as `"inf"`.
fn time_value(t: f64) -> serde_json::Value {
    if t.is_finite() {
        json!(t)
    } else {
        json!("inf")
    }
}

fn rejection_reason(err: &PlacementError) -> &'static str {
    match err {
        PlacementError::AclDenied { .. } => "acl-denied",
        PlacementError::UnknownSite(_) => "unknown-site",
        PlacementError::UnknownAllocation(_) => "unknown-allocation",
        PlacementError::InsufficientSpace { .. } => "insufficient-space",
        PlacementError::InsufficientSites { .. } => "insufficient-sites",
        PlacementError::DuplicateId(_) => "duplicate-id",
        PlacementError::Invalid(_) => "invalid",
    }
}
