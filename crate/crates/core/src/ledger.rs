//! Deterministic in-process escrow ledger for outsourced tasks.
//!
//! A client escrows a service fee when it posts a [`MaskedProblem`]; a worker
//! escrows a deposit when it claims the task. When the worker submits `R′`
//! the ledger runs the public verifier and pays `fee + deposit` to the worker
//! if the check passes and to the client otherwise.
//!
//! Every mutating call is recorded as a [`LedgerOp`], rejected calls
//! included. [`Ledger::snapshot`] plus the ops that followed it reproduce the
//! final state exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::Error as NumError;
use crate::masking::MaskedProblem;
use crate::matrix::Matrix;
use crate::meter::CostMeter;
use crate::verifier::{verify, VerificationReport};

/// Integer currency units.
pub type Units = u64;
pub type TaskId = u64;

type Problem = MaskedProblem<f64>;
type ResultMatrix = Matrix<f64>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(String);

impl AccountId {
    pub fn new(id: impl Into<String>) -> Self {
        AccountId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for AccountId {
    fn from(s: &str) -> Self {
        AccountId(s.to_owned())
    }
}

impl std::fmt::Display for AccountId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Task lifecycle, serialized as its numeric code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum TaskStatus {
    Open = 0,
    Claimed = 1,
    PaidToCloud = 2,
    Refunded = 3,
}

impl TaskStatus {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::PaidToCloud | TaskStatus::Refunded)
    }
}

impl From<TaskStatus> for u8 {
    fn from(s: TaskStatus) -> u8 {
        s.code()
    }
}

impl TryFrom<u8> for TaskStatus {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, String> {
        match code {
            0 => Ok(TaskStatus::Open),
            1 => Ok(TaskStatus::Claimed),
            2 => Ok(TaskStatus::PaidToCloud),
            3 => Ok(TaskStatus::Refunded),
            other => Err(format!("unknown task status {other}")),
        }
    }
}

/// Why a task reached its terminal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Settlement {
    /// The verifier ran; `report.passed` decided the flag.
    Verified { report: VerificationReport },
    /// The submitted result had the wrong shape; settled as a failed check.
    Malformed { reason: String },
    /// The worker reported it could not produce a result.
    NoResult,
}

impl Settlement {
    pub fn flag(&self) -> u8 {
        match self {
            Settlement::Verified { report } if report.passed => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub task_id: TaskId,
    pub client: AccountId,
    pub cloud: Option<AccountId>,
    pub service_fee: Units,
    /// Zero until the task is claimed.
    pub deposit: Units,
    pub status: TaskStatus,
    pub problem: Arc<Problem>,
    pub result: Option<Arc<ResultMatrix>>,
    pub settlement: Option<Settlement>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LedgerError {
    #[error("account {0} already exists")]
    DuplicateAccount(AccountId),
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("account {account} holds {available} units, needs {needed}")]
    InsufficientFunds { account: AccountId, needed: Units, available: Units },
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {task} is in status {found:?}, expected {expected:?}")]
    WrongStatus { task: TaskId, expected: TaskStatus, found: TaskStatus },
    #[error("account {submitter} did not claim task {task}")]
    WrongSubmitter { task: TaskId, submitter: AccountId },
    #[error("payment flag must be 0 or 1, got {0}")]
    InvalidFlag(u8),
    #[error("verification could not run: {0}")]
    Verification(NumError),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// One mutating call, as recorded in the ledger's log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum LedgerOp {
    OpenAccount { id: AccountId, initial_balance: Units },
    SubmitTask { client: AccountId, fee: Units, problem: Problem },
    ClaimTask { cloud: AccountId, task_id: TaskId },
    SubmitResult { task_id: TaskId, submitter: AccountId, result: ResultMatrix, rounds: usize, tol: f64, seed: u64 },
    ReportNoResult { task_id: TaskId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpEffect {
    None,
    TaskCreated(TaskId),
    Settled(Settlement),
}

/// Content-addressed storage for task payloads referenced by snapshots.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContentStore {
    problems: BTreeMap<String, Arc<Problem>>,
    results: BTreeMap<String, Arc<ResultMatrix>>,
}

/// Hex SHA-256 of the value's JSON encoding.
pub fn content_hash<S: Serialize>(value: &S) -> String {
    let bytes = serde_json::to_vec(value).expect("content serializes");
    hex::encode(Sha256::digest(bytes))
}

impl ContentStore {
    pub fn put_problem(&mut self, p: Arc<Problem>) -> String {
        let h = content_hash(p.as_ref());
        self.problems.entry(h.clone()).or_insert(p);
        h
    }

    pub fn put_result(&mut self, r: Arc<ResultMatrix>) -> String {
        let h = content_hash(r.as_ref());
        self.results.entry(h.clone()).or_insert(r);
        h
    }

    pub fn problem(&self, hash: &str) -> Option<Arc<Problem>> {
        self.problems.get(hash).cloned()
    }

    pub fn result(&self, hash: &str) -> Option<Arc<ResultMatrix>> {
        self.results.get(hash).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSnapshot {
    pub task_id: TaskId,
    pub client: AccountId,
    pub cloud: Option<AccountId>,
    pub fee: Units,
    pub deposit: Units,
    pub status: TaskStatus,
    pub problem_hash: String,
    pub result_hash: Option<String>,
    pub settlement: Option<Settlement>,
}

/// Persisted ledger state. Payloads are referenced by content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub balances: BTreeMap<AccountId, Units>,
    pub escrow: Units,
    pub next_task_id: TaskId,
    pub deposit_multiplier: Units,
    pub tasks: Vec<TaskSnapshot>,
}

impl LedgerSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LedgerError> {
        serde_json::from_str(s).map_err(|e| LedgerError::Snapshot(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Ledger {
    balances: BTreeMap<AccountId, Units>,
    escrow: Units,
    tasks: BTreeMap<TaskId, TaskRecord>,
    next_task_id: TaskId,
    deposit_multiplier: Units,
    supply: Units,
    store: ContentStore,
    log: Vec<LedgerOp>,
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::new()
    }
}

impl Ledger {
    /// Empty ledger; deposits equal the service fee.
    pub fn new() -> Self {
        Ledger::with_deposit_multiplier(1)
    }

    /// Empty ledger where a claim escrows `multiplier × service_fee`.
    pub fn with_deposit_multiplier(multiplier: Units) -> Self {
        Ledger {
            balances: BTreeMap::new(),
            escrow: 0,
            tasks: BTreeMap::new(),
            next_task_id: 0,
            deposit_multiplier: multiplier,
            supply: 0,
            store: ContentStore::default(),
            log: Vec::new(),
        }
    }

    pub fn balance(&self, id: &AccountId) -> Option<Units> {
        self.balances.get(id).copied()
    }

    pub fn balances(&self) -> &BTreeMap<AccountId, Units> {
        &self.balances
    }

    pub fn escrow(&self) -> Units {
        self.escrow
    }

    /// Σ balances + escrow, fixed once accounts are opened.
    pub fn total_supply(&self) -> Units {
        self.supply
    }

    pub fn task(&self, id: TaskId) -> Option<&TaskRecord> {
        self.tasks.get(&id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskRecord> {
        self.tasks.values()
    }

    pub fn log(&self) -> &[LedgerOp] {
        &self.log
    }

    pub fn store(&self) -> &ContentStore {
        &self.store
    }

    pub fn open_account(&mut self, id: AccountId, initial_balance: Units) -> Result<(), LedgerError> {
        self.apply(LedgerOp::OpenAccount { id, initial_balance }).map(|_| ())
    }

    pub fn submit_task(&mut self, client: &AccountId, fee: Units, problem: Problem) -> Result<TaskId, LedgerError> {
        match self.apply(LedgerOp::SubmitTask { client: client.clone(), fee, problem })? {
            OpEffect::TaskCreated(id) => Ok(id),
            other => unreachable!("submit_task produced {other:?}"),
        }
    }

    pub fn claim_task(&mut self, cloud: &AccountId, task_id: TaskId) -> Result<(), LedgerError> {
        self.apply(LedgerOp::ClaimTask { cloud: cloud.clone(), task_id }).map(|_| ())
    }

    /// Verifies `result` against the task's public data and settles the task.
    pub fn submit_result(
        &mut self,
        task_id: TaskId,
        submitter: &AccountId,
        result: ResultMatrix,
        rounds: usize,
        tol: f64,
        seed: u64,
    ) -> Result<Settlement, LedgerError> {
        let op = LedgerOp::SubmitResult { task_id, submitter: submitter.clone(), result, rounds, tol, seed };
        match self.apply(op)? {
            OpEffect::Settled(s) => Ok(s),
            other => unreachable!("submit_result produced {other:?}"),
        }
    }

    /// Settles a claimed task whose worker produced no result: the client
    /// receives fee and deposit.
    pub fn report_no_result(&mut self, task_id: TaskId) -> Result<(), LedgerError> {
        self.apply(LedgerOp::ReportNoResult { task_id }).map(|_| ())
    }

    /// Executes and logs one operation. A rejected operation leaves the
    /// state untouched but is still logged.
    pub fn apply(&mut self, op: LedgerOp) -> Result<OpEffect, LedgerError> {
        let out = self.execute(&op);
        self.log.push(op);
        debug_assert!(self.check_invariants().is_ok(), "{:?}", self.check_invariants());
        out
    }

    pub fn apply_all<'a>(&mut self, ops: impl IntoIterator<Item = &'a LedgerOp>) {
        for op in ops {
            let _ = self.apply(op.clone());
        }
    }

    /// Rebuilds a ledger by running `ops` from an empty state.
    pub fn replay<'a>(deposit_multiplier: Units, ops: impl IntoIterator<Item = &'a LedgerOp>) -> Self {
        let mut ledger = Ledger::with_deposit_multiplier(deposit_multiplier);
        ledger.apply_all(ops);
        ledger
    }

    fn execute(&mut self, op: &LedgerOp) -> Result<OpEffect, LedgerError> {
        match op {
            LedgerOp::OpenAccount { id, initial_balance } => {
                if self.balances.contains_key(id) {
                    return Err(LedgerError::DuplicateAccount(id.clone()));
                }
                self.balances.insert(id.clone(), *initial_balance);
                self.supply += initial_balance;
                Ok(OpEffect::None)
            }
            LedgerOp::SubmitTask { client, fee, problem } => {
                self.debit(client, *fee)?;
                self.escrow += fee;
                let task_id = self.next_task_id;
                self.next_task_id += 1;
                let problem = Arc::new(problem.clone());
                self.store.put_problem(problem.clone());
                self.tasks.insert(
                    task_id,
                    TaskRecord {
                        task_id,
                        client: client.clone(),
                        cloud: None,
                        service_fee: *fee,
                        deposit: 0,
                        status: TaskStatus::Open,
                        problem,
                        result: None,
                        settlement: None,
                    },
                );
                Ok(OpEffect::TaskCreated(task_id))
            }
            LedgerOp::ClaimTask { cloud, task_id } => {
                let task = self.task_in(*task_id, TaskStatus::Open)?;
                let deposit = task.service_fee * self.deposit_multiplier;
                self.debit(cloud, deposit)?;
                self.escrow += deposit;
                let task = self.tasks.get_mut(task_id).expect("checked above");
                task.deposit = deposit;
                task.cloud = Some(cloud.clone());
                task.status = TaskStatus::Claimed;
                Ok(OpEffect::None)
            }
            LedgerOp::SubmitResult { task_id, submitter, result, rounds, tol, seed } => {
                let task = self.task_in(*task_id, TaskStatus::Claimed)?;
                if task.cloud.as_ref() != Some(submitter) {
                    return Err(LedgerError::WrongSubmitter { task: *task_id, submitter: submitter.clone() });
                }
                let (x1, x2) = (task.problem.x1(), task.problem.x2());
                let settlement = if result.shape() != (x1.cols(), x1.rows()) {
                    Settlement::Malformed {
                        reason: format!("result is {:?}, expected {:?}", result.shape(), (x1.cols(), x1.rows())),
                    }
                } else {
                    let report = verify(x1, x2, result, *rounds, *tol, *seed, &mut CostMeter::new())
                        .map_err(LedgerError::Verification)?;
                    Settlement::Verified { report }
                };
                let result = Arc::new(result.clone());
                self.store.put_result(result.clone());
                self.tasks.get_mut(task_id).expect("checked above").result = Some(result);
                self.settle(*task_id, settlement.clone())?;
                Ok(OpEffect::Settled(settlement))
            }
            LedgerOp::ReportNoResult { task_id } => {
                self.task_in(*task_id, TaskStatus::Claimed)?;
                self.settle(*task_id, Settlement::NoResult)?;
                Ok(OpEffect::Settled(Settlement::NoResult))
            }
        }
    }

    fn task_in(&self, task_id: TaskId, expected: TaskStatus) -> Result<&TaskRecord, LedgerError> {
        let task = self.tasks.get(&task_id).ok_or(LedgerError::UnknownTask(task_id))?;
        if task.status != expected {
            return Err(LedgerError::WrongStatus { task: task_id, expected, found: task.status });
        }
        Ok(task)
    }

    fn debit(&mut self, id: &AccountId, amount: Units) -> Result<(), LedgerError> {
        let bal = self.balances.get_mut(id).ok_or_else(|| LedgerError::UnknownAccount(id.clone()))?;
        if *bal < amount {
            return Err(LedgerError::InsufficientFunds { account: id.clone(), needed: amount, available: *bal });
        }
        *bal -= amount;
        Ok(())
    }

    fn settle(&mut self, task_id: TaskId, settlement: Settlement) -> Result<(), LedgerError> {
        self.payment(task_id, settlement.flag())?;
        self.tasks.get_mut(&task_id).expect("paid task exists").settlement = Some(settlement);
        Ok(())
    }

    /// Releases `fee + deposit` from escrow: to the worker when `flag == 1`
    /// (status 2), to the client when `flag == 0` (status 3).
    pub(crate) fn payment(&mut self, task_id: TaskId, flag: u8) -> Result<(), LedgerError> {
        if flag > 1 {
            return Err(LedgerError::InvalidFlag(flag));
        }
        let task = self.tasks.get(&task_id).ok_or(LedgerError::UnknownTask(task_id))?;
        if task.status != TaskStatus::Claimed {
            return Err(LedgerError::Invariant(format!("payment on task {task_id} in status {:?}", task.status)));
        }
        let amount = task.service_fee + task.deposit;
        let (payee, status) = if flag == 1 {
            (task.cloud.clone().expect("claimed task has a cloud"), TaskStatus::PaidToCloud)
        } else {
            (task.client.clone(), TaskStatus::Refunded)
        };
        if self.escrow < amount {
            return Err(LedgerError::Invariant(format!("escrow {} cannot cover {amount}", self.escrow)));
        }
        self.escrow -= amount;
        *self.balances.get_mut(&payee).expect("payee has an account") += amount;
        self.tasks.get_mut(&task_id).expect("checked above").status = status;
        Ok(())
    }

    /// Conservation, escrow accounting and per-task structural invariants.
    pub fn check_invariants(&self) -> Result<(), LedgerError> {
        let held: Units = self.balances.values().sum();
        if held + self.escrow != self.supply {
            return Err(LedgerError::Invariant(format!(
                "balances {held} + escrow {} != supply {}",
                self.escrow, self.supply
            )));
        }
        let mut expected_escrow = 0;
        for t in self.tasks.values() {
            match t.status {
                TaskStatus::Open => {
                    expected_escrow += t.service_fee;
                    if t.cloud.is_some() || t.deposit != 0 {
                        return Err(LedgerError::Invariant(format!("open task {} has a claimant", t.task_id)));
                    }
                }
                TaskStatus::Claimed => {
                    expected_escrow += t.service_fee + t.deposit;
                    if t.cloud.is_none() || t.deposit != t.service_fee * self.deposit_multiplier {
                        return Err(LedgerError::Invariant(format!("claimed task {} malformed", t.task_id)));
                    }
                }
                TaskStatus::PaidToCloud | TaskStatus::Refunded => {
                    if t.cloud.is_none() || t.settlement.is_none() {
                        return Err(LedgerError::Invariant(format!("settled task {} malformed", t.task_id)));
                    }
                }
            }
            if t.result.is_some() && !t.status.is_terminal() {
                return Err(LedgerError::Invariant(format!("unsettled task {} holds a result", t.task_id)));
            }
        }
        if expected_escrow != self.escrow {
            return Err(LedgerError::Invariant(format!("escrow {} but tasks hold {expected_escrow}", self.escrow)));
        }
        Ok(())
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let tasks = self
            .tasks
            .values()
            .map(|t| TaskSnapshot {
                task_id: t.task_id,
                client: t.client.clone(),
                cloud: t.cloud.clone(),
                fee: t.service_fee,
                deposit: t.deposit,
                status: t.status,
                problem_hash: content_hash(t.problem.as_ref()),
                result_hash: t.result.as_ref().map(|r| content_hash(r.as_ref())),
                settlement: t.settlement.clone(),
            })
            .collect();
        LedgerSnapshot {
            balances: self.balances.clone(),
            escrow: self.escrow,
            next_task_id: self.next_task_id,
            deposit_multiplier: self.deposit_multiplier,
            tasks,
        }
    }

    /// Rebuilds a ledger from a snapshot, resolving payloads from `store`.
    /// The returned ledger starts with an empty log.
    pub fn restore(snapshot: &LedgerSnapshot, store: &ContentStore) -> Result<Self, LedgerError> {
        let mut ledger = Ledger::with_deposit_multiplier(snapshot.deposit_multiplier);
        ledger.balances = snapshot.balances.clone();
        ledger.escrow = snapshot.escrow;
        ledger.next_task_id = snapshot.next_task_id;
        ledger.supply = ledger.balances.values().sum::<Units>() + ledger.escrow;
        for t in &snapshot.tasks {
            let problem = store
                .problem(&t.problem_hash)
                .ok_or_else(|| LedgerError::Snapshot(format!("problem {} of task {} missing", t.problem_hash, t.task_id)))?;
            ledger.store.put_problem(problem.clone());
            let result = match &t.result_hash {
                Some(h) => {
                    let r = store
                        .result(h)
                        .ok_or_else(|| LedgerError::Snapshot(format!("result {h} of task {} missing", t.task_id)))?;
                    ledger.store.put_result(r.clone());
                    Some(r)
                }
                None => None,
            };
            if t.task_id >= snapshot.next_task_id || ledger.tasks.contains_key(&t.task_id) {
                return Err(LedgerError::Snapshot(format!("task id {} is inconsistent", t.task_id)));
            }
            ledger.tasks.insert(
                t.task_id,
                TaskRecord {
                    task_id: t.task_id,
                    client: t.client.clone(),
                    cloud: t.cloud.clone(),
                    service_fee: t.fee,
                    deposit: t.deposit,
                    status: t.status,
                    problem,
                    result,
                    settlement: t.settlement.clone(),
                },
            );
        }
        ledger.check_invariants().map_err(|e| LedgerError::Snapshot(e.to_string()))?;
        Ok(ledger)
    }
}
