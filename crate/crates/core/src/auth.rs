//! Enrollment and the three-frame authentication session.
//!
//! Each frame's trace is classified on its own; only after the third frame
//! is the classified triple checked against the stored password hash. A
//! frame that cannot be classified is recorded as rejected and the session
//! still runs to completion, so the decision is the only observable result.
//!
//! The password space is 12³ = 1,728 triples (about 10.75 bits). Salting and
//! key stretching keep the triple out of the store in plain form; they do
//! not make it hard to enumerate offline. Online guessing is limited by the
//! per-user [`RateLimitPolicy`].

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::catalog::{Catalog, FramePlan, ShapeId};
use crate::dtree::{catalog_model, classify_tree, path_features, train_tree, LabeledDataset, DatasetSource, TreeConfig, TreeModel};
use crate::error::{Error, Result};
use crate::geometry::{normalize_trace, NormalizeConfig, RawTrace, TimedSample};
use crate::store::StoreRoot;
use crate::template::{classify_template, train_templates, Owner, TemplateMatch, TemplateSet, DEFAULT_TAU};

pub const DEFAULT_HASH_ITERATIONS: u32 = 2048;
const SALT_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Template,
    Dtree,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Template => "template",
            Algorithm::Dtree => "dtree",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "template" => Ok(Algorithm::Template),
            "dtree" => Ok(Algorithm::Dtree),
            _ => Err(Error::Parse(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Three shapes, one per frame, in order. Repeats are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PasswordTriple(pub [ShapeId; 3]);

impl PasswordTriple {
    /// Canonical encoding fed to the key derivation, e.g. `l|e|c`.
    pub fn encode(&self) -> String {
        let [a, b, c] = self.0;
        format!("{a}|{b}|{c}")
    }

    pub fn all() -> impl Iterator<Item = PasswordTriple> {
        ShapeId::ALL.into_iter().flat_map(|a| {
            ShapeId::ALL.into_iter().flat_map(move |b| {
                ShapeId::ALL
                    .into_iter()
                    .map(move |c| PasswordTriple([a, b, c]))
            })
        })
    }
}

impl FromStr for PasswordTriple {
    type Err = Error;

    /// Comma-separated shape ids: `l,e,c`.
    fn from_str(s: &str) -> Result<Self> {
        let ids = s
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<ShapeId>>>()?;
        match ids[..] {
            [a, b, c] => Ok(PasswordTriple([a, b, c])),
            _ => Err(Error::Parse(format!("password needs 3 shapes, got {}", ids.len()))),
        }
    }
}

impl fmt::Display for PasswordTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "{a},{b},{c}")
    }
}

pub fn validate_user_id(user: &str) -> Result<()> {
    let ok = !user.is_empty()
        && user.len() <= 64
        && user
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
        && !user.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "user id {user:?} must be 1-64 characters of [A-Za-z0-9_.-]"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enrollment {
    pub user: String,
    #[serde(with = "hex::serde")]
    pub secret: [u8; 32],
    #[serde(with = "hex::serde")]
    pub salt: [u8; SALT_LEN],
    pub iterations: u32,
    pub created_at_ms: u64,
    pub algorithm: Algorithm,
}

fn derive_key(triple: &PasswordTriple, salt: &[u8], iterations: u32) -> [u8; 32] {
    let mut out = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(triple.encode().as_bytes(), salt, iterations, &mut out);
    out
}

impl Enrollment {
    pub fn create(
        user: &str,
        triple: &PasswordTriple,
        algorithm: Algorithm,
        iterations: u32,
        now_ms: u64,
    ) -> Result<Self> {
        validate_user_id(user)?;
        if iterations == 0 {
            return Err(Error::Config("hash iterations must be >= 1".into()));
        }
        let mut salt = [0u8; SALT_LEN];
        rand::rng().fill_bytes(&mut salt);
        Ok(Self {
            user: user.to_owned(),
            secret: derive_key(triple, &salt, iterations),
            salt,
            iterations,
            created_at_ms: now_ms,
            algorithm,
        })
    }

    pub fn verify(&self, triple: &PasswordTriple) -> bool {
        let candidate = derive_key(triple, &self.salt, self.iterations);
        // constant time over the digest
        candidate
            .iter()
            .zip(&self.secret)
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenyReason {
    ClassificationMismatch,
    FrameRejected,
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenyReason::ClassificationMismatch => "classification-mismatch",
            DenyReason::FrameRejected => "frame-rejected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Granted,
    Denied(DenyReason),
}

impl Decision {
    pub fn is_granted(&self) -> bool {
        matches!(self, Decision::Granted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    AwaitFrame(usize),
    Decided(Decision),
}

/// What one frame was classified as; `None` means rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResult {
    pub classified: Option<ShapeId>,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthSession {
    user: String,
    nonce: String,
    algorithm: Algorithm,
    state: SessionState,
    frames: Vec<FrameResult>,
}

impl AuthSession {
    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn nonce(&self) -> &str {
        &self.nonce
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn frames(&self) -> &[FrameResult] {
        &self.frames
    }

    pub fn decision(&self) -> Option<Decision> {
        match self.state {
            SessionState::Decided(d) => Some(d),
            SessionState::AwaitFrame(_) => None,
        }
    }
}

/// Returned to in-process callers after each frame. Network front ends must
/// not forward `classified`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOutcome {
    pub frame_index: usize,
    pub classified: Option<ShapeId>,
    pub decision: Option<Decision>,
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateLimitPolicy {
    /// Minimum time between one decided session and the next session start.
    pub min_interval_ms: u64,
    pub max_denials: usize,
    pub denial_window_ms: u64,
    pub lockout_ms: u64,
}

impl Default for RateLimitPolicy {
    fn default() -> Self {
        Self {
            min_interval_ms: 2_000,
            max_denials: 5,
            denial_window_ms: 10 * 60 * 1000,
            lockout_ms: 5 * 60 * 1000,
        }
    }
}

impl RateLimitPolicy {
    pub fn disabled() -> Self {
        Self {
            min_interval_ms: 0,
            max_denials: usize::MAX,
            denial_window_ms: 0,
            lockout_ms: 0,
        }
    }
}

#[derive(Debug, Default)]
struct LimitState {
    last_decided_ms: Option<u64>,
    denials: VecDeque<u64>,
    locked_until_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuthConfig {
    pub tau: f64,
    pub normalize: NormalizeConfig,
    pub hash_iterations: u32,
    pub rate_limit: RateLimitPolicy,
}

impl Default for AuthConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            normalize: NormalizeConfig::default(),
            hash_iterations: DEFAULT_HASH_ITERATIONS,
            rate_limit: RateLimitPolicy::default(),
        }
    }
}

type Recognizers = (Arc<TemplateSet>, Arc<TreeModel>);

/// Shared state behind enrollment and authentication. Sessions themselves
/// are plain values owned by the caller.
pub struct AuthEngine {
    catalog: Arc<Catalog>,
    config: AuthConfig,
    store: Option<StoreRoot>,
    clock: Arc<dyn Clock>,
    default_templates: Arc<TemplateSet>,
    default_tree: Arc<TreeModel>,
    enrollments: RwLock<HashMap<String, Enrollment>>,
    user_models: RwLock<HashMap<String, Recognizers>>,
    limits: Mutex<HashMap<String, LimitState>>,
}

impl AuthEngine {
    /// An in-memory engine using the catalog-derived recognizers.
    pub fn new(catalog: Arc<Catalog>, config: AuthConfig) -> Result<Self> {
        let default_templates = Arc::new(TemplateSet::from_catalog(&catalog, &config.normalize)?);
        let default_tree = Arc::new(catalog_model(&catalog)?);
        Ok(Self {
            catalog,
            config,
            store: None,
            clock: Arc::new(SystemClock),
            default_templates,
            default_tree,
            enrollments: RwLock::new(HashMap::new()),
            user_models: RwLock::new(HashMap::new()),
            limits: Mutex::new(HashMap::new()),
        })
    }

    /// Persists through `store` and loads what it already holds: enrollments,
    /// global recognizers if present, and per-user recognizers.
    pub fn with_store(mut self, store: StoreRoot) -> Result<Self> {
        if let Some(t) = store.try_load_templates(&Owner::Global)? {
            self.default_templates = Arc::new(t);
        }
        if let Some(m) = store.try_load_model(&Owner::Global)? {
            self.default_tree = Arc::new(m);
        }
        let enrollments = store.load_enrollments()?;
        let mut models = HashMap::new();
        for user in enrollments.keys() {
            let owner = Owner::User(user.clone());
            if let (Some(t), Some(m)) = (store.try_load_templates(&owner)?, store.try_load_model(&owner)?) {
                models.insert(user.clone(), (Arc::new(t), Arc::new(m)));
            }
        }
        self.enrollments = RwLock::new(enrollments.into_iter().collect());
        self.user_models = RwLock::new(models);
        self.store = Some(store);
        Ok(self)
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn config(&self) -> &AuthConfig {
        &self.config
    }

    pub fn default_templates(&self) -> &TemplateSet {
        &self.default_templates
    }

    pub fn default_tree(&self) -> &TreeModel {
        &self.default_tree
    }

    /// Creates or replaces the user's enrollment.
    pub fn enroll(&self, user: &str, triple: &PasswordTriple, algorithm: Algorithm) -> Result<Enrollment> {
        let enrollment = Enrollment::create(
            user,
            triple,
            algorithm,
            self.config.hash_iterations,
            self.clock.now_ms(),
        )?;
        let mut all = self.enrollments.write().expect("enrollment lock");
        if let Some(store) = &self.store {
            let mut next: std::collections::BTreeMap<_, _> =
                all.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            next.insert(user.to_owned(), enrollment.clone());
            store.save_enrollments(&next)?;
        }
        all.insert(user.to_owned(), enrollment.clone());
        Ok(enrollment)
    }

    pub fn enrollment(&self, user: &str) -> Option<Enrollment> {
        self.enrollments.read().expect("enrollment lock").get(user).cloned()
    }

    /// Builds user templates and a user tree from per-shape traces. With
    /// `replace == false` the new templates are added to the user's current
    /// ones.
    pub fn train_user(
        &self,
        user: &str,
        traces: &std::collections::BTreeMap<ShapeId, Vec<RawTrace>>,
        replace: bool,
    ) -> Result<(Arc<TemplateSet>, Arc<TreeModel>)> {
        validate_user_id(user)?;
        let mut templates = train_templates(traces, user, &self.config.normalize)?;
        let mut rows = Vec::new();
        for (&id, list) in traces {
            for t in list {
                rows.push((path_features(&t.to_path())?, id));
            }
        }
        let mut models = self.user_models.write().expect("model lock");
        if !replace {
            if let Some((old, _)) = models.get(user) {
                templates = old.appended(&templates);
            }
        }
        let tree = train_tree(&LabeledDataset::new(rows, DatasetSource::File)?, &TreeConfig::default())?;
        let owner = Owner::User(user.to_owned());
        if let Some(store) = &self.store {
            store.save_templates(&templates)?;
            store.save_model(&owner, &tree)?;
        }
        let entry = (Arc::new(templates), Arc::new(tree));
        models.insert(user.to_owned(), entry.clone());
        Ok(entry)
    }

    /// The user's trained recognizers, or the defaults if none were trained.
    pub fn recognizers_for(&self, user: &str) -> (Arc<TemplateSet>, Arc<TreeModel>) {
        self.user_models
            .read()
            .expect("model lock")
            .get(user)
            .cloned()
            .unwrap_or_else(|| (self.default_templates.clone(), self.default_tree.clone()))
    }

    pub fn begin_session(&self, user: &str, algorithm: Option<Algorithm>) -> Result<(AuthSession, FramePlan)> {
        let enrollment = self
            .enrollment(user)
            .ok_or_else(|| Error::UnknownUser(user.to_owned()))?;
        self.check_limits(user)?;
        let mut nonce = [0u8; 16];
        rand::rng().fill_bytes(&mut nonce);
        let session = AuthSession {
            user: user.to_owned(),
            nonce: hex::encode(nonce),
            algorithm: algorithm.unwrap_or(enrollment.algorithm),
            state: SessionState::AwaitFrame(1),
            frames: Vec::with_capacity(3),
        };
        Ok((session, *self.catalog.plan()))
    }

    fn classify(&self, session: &AuthSession, trace: &RawTrace) -> Result<FrameResult> {
        let (templates, tree) = self.recognizers_for(&session.user);
        let candidate = normalize_trace(trace, &self.config.normalize)?;
        Ok(match session.algorithm {
            Algorithm::Template => match classify_template(&candidate, &templates, self.config.tau)? {
                TemplateMatch::Matched { shape, distance } => FrameResult {
                    classified: Some(shape),
                    distance: Some(distance),
                },
                TemplateMatch::Rejected { distance, .. } => FrameResult {
                    classified: None,
                    distance: Some(distance),
                },
            },
            Algorithm::Dtree => FrameResult {
                classified: Some(classify_tree(&tree, &path_features(&trace.to_path())?)),
                distance: None,
            },
        })
    }

    /// Classifies one frame and advances the session. Traces that fail
    /// normalization are recorded as rejected rather than returned as errors.
    pub fn submit_frame(&self, session: &mut AuthSession, trace: &RawTrace) -> Result<FrameOutcome> {
        if session.decision().is_some() {
            return Err(Error::SessionOrder);
        }
        let result = self.classify(session, trace).unwrap_or(FrameResult {
            classified: None,
            distance: None,
        });
        self.record(session, result)
    }

    /// Like [`submit_frame`](Self::submit_frame) for samples that have not
    /// been validated as a trace yet (e.g. streamed over the network).
    pub fn submit_samples(&self, session: &mut AuthSession, samples: Vec<TimedSample>) -> Result<FrameOutcome> {
        match RawTrace::new(samples) {
            Ok(trace) => self.submit_frame(session, &trace),
            Err(_) => {
                if session.decision().is_some() {
                    return Err(Error::SessionOrder);
                }
                self.record(
                    session,
                    FrameResult {
                        classified: None,
                        distance: None,
                    },
                )
            }
        }
    }

    fn record(&self, session: &mut AuthSession, result: FrameResult) -> Result<FrameOutcome> {
        session.frames.push(result);
        let frame_index = session.frames.len();
        let decision = if frame_index == 3 {
            let d = self.decide(session)?;
            self.finish(session, d);
            Some(d)
        } else {
            session.state = SessionState::AwaitFrame(frame_index + 1);
            None
        };
        Ok(FrameOutcome {
            frame_index,
            classified: result.classified,
            decision,
        })
    }

    /// Grant iff every frame was classified and the classified triple
    /// verifies against the enrollment.
    pub fn decide(&self, session: &AuthSession) -> Result<Decision> {
        if session.frames.len() != 3 {
            return Err(Error::SessionIncomplete(session.frames.len()));
        }
        let enrollment = self
            .enrollment(&session.user)
            .ok_or_else(|| Error::UnknownUser(session.user.clone()))?;
        let classified: Option<Vec<ShapeId>> = session.frames.iter().map(|f| f.classified).collect();
        Ok(match classified {
            None => Decision::Denied(DenyReason::FrameRejected),
            Some(ids) => {
                if enrollment.verify(&PasswordTriple([ids[0], ids[1], ids[2]])) {
                    Decision::Granted
                } else {
                    Decision::Denied(DenyReason::ClassificationMismatch)
                }
            }
        })
    }

    /// Ends an unfinished session as denied (protocol violation, disconnect).
    pub fn abort(&self, session: &mut AuthSession) {
        if session.decision().is_none() {
            self.finish(session, Decision::Denied(DenyReason::FrameRejected));
        }
    }

    fn finish(&self, session: &mut AuthSession, decision: Decision) {
        session.state = SessionState::Decided(decision);
        let policy = self.config.rate_limit;
        let now = self.clock.now_ms();
        let mut limits = self.limits.lock().expect("limit lock");
        let state = limits.entry(session.user.clone()).or_default();
        state.last_decided_ms = Some(now);
        if decision.is_granted() {
            state.denials.clear();
            return;
        }
        state.denials.push_back(now);
        while state
            .denials
            .front()
            .is_some_and(|&t| now.saturating_sub(t) >= policy.denial_window_ms)
        {
            state.denials.pop_front();
        }
        if state.denials.len() >= policy.max_denials {
            state.locked_until_ms = Some(now + policy.lockout_ms);
            state.denials.clear();
        }
    }

    fn check_limits(&self, user: &str) -> Result<()> {
        let policy = self.config.rate_limit;
        let now = self.clock.now_ms();
        let limits = self.limits.lock().expect("limit lock");
        let Some(state) = limits.get(user) else {
            return Ok(());
        };
        if state.locked_until_ms.is_some_and(|until| now < until) {
            return Err(Error::LockedOut);
        }
        if state
            .last_decided_ms
            .is_some_and(|t| now.saturating_sub(t) < policy.min_interval_ms)
        {
            return Err(Error::RateLimited);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_pursuit, NoiseModel};

    fn t(s: &str) -> PasswordTriple {
        s.parse().unwrap()
    }

    fn engine(clock: Arc<ManualClock>) -> AuthEngine {
        AuthEngine::new(Arc::new(Catalog::shipped()), AuthConfig::default())
            .unwrap()
            .with_clock(clock)
    }

    fn follow(engine: &AuthEngine, id: ShapeId) -> RawTrace {
        let cat = engine.catalog();
        simulate_pursuit(cat.shape(id), cat.plan(), &NoiseModel::noiseless()).unwrap()
    }

    fn run(engine: &AuthEngine, user: &str, shapes: [ShapeId; 3]) -> Decision {
        let (mut s, _) = engine.begin_session(user, None).unwrap();
        for id in shapes {
            engine.submit_frame(&mut s, &follow(engine, id)).unwrap();
        }
        s.decision().unwrap()
    }

    #[test]
    fn hash_round_trip_and_overwrite() {
        let e = engine(Arc::new(ManualClock::new(0)));
        let en = e.enroll("alice", &t("l,e,c"), Algorithm::Template).unwrap();
        assert!(en.verify(&t("l,e,c")));
        assert!(!en.verify(&t("l,e,d")));
        e.enroll("alice", &t("a,b,c"), Algorithm::Template).unwrap();
        let en = e.enrollment("alice").unwrap();
        assert!(!en.verify(&t("l,e,c")));
        assert!(en.verify(&t("a,b,c")));
        assert!(e.enroll("bob", &t("a,a,a"), Algorithm::Dtree).is_ok());
    }

    #[test]
    fn triple_parsing() {
        assert_eq!(t("l,e,c").encode(), "l|e|c");
        assert!("l,e".parse::<PasswordTriple>().is_err());
        assert!("l,e,c,d".parse::<PasswordTriple>().is_err());
        assert!("l,e,z".parse::<PasswordTriple>().is_err());
        assert_eq!(PasswordTriple::all().count(), 1728);
    }

    #[test]
    fn user_ids_are_checked() {
        assert!(validate_user_id("alice_01.x-y").is_ok());
        for bad in ["", ".hidden", "a/b", "a b", &"x".repeat(65)] {
            assert!(validate_user_id(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn session_lifecycle() {
        let clock = Arc::new(ManualClock::new(0));
        let e = engine(clock.clone());
        assert!(matches!(e.begin_session("nobody", None), Err(Error::UnknownUser(_))));
        e.enroll("alice", &t("l,e,c"), Algorithm::Template).unwrap();
        let (mut s, plan) = e.begin_session("alice", None).unwrap();
        assert_eq!(s.state(), SessionState::AwaitFrame(1));
        assert_eq!(plan.frame_duration_ms, 4000.0);
        assert!(matches!(e.decide(&s), Err(Error::SessionIncomplete(0))));
        e.submit_frame(&mut s, &follow(&e, ShapeId::L)).unwrap();
        assert_eq!(s.state(), SessionState::AwaitFrame(2));
        e.submit_frame(&mut s, &follow(&e, ShapeId::E)).unwrap();
        let out = e.submit_frame(&mut s, &follow(&e, ShapeId::C)).unwrap();
        assert_eq!(out.decision, Some(Decision::Granted));
        assert_eq!(e.decide(&s).unwrap(), Decision::Granted);
        assert!(matches!(
            e.submit_frame(&mut s, &follow(&e, ShapeId::C)),
            Err(Error::SessionOrder)
        ));
    }

    #[test]
    fn concurrent_sessions_are_independent() {
        let e = engine(Arc::new(ManualClock::new(0)));
        e.enroll("alice", &t("l,e,c"), Algorithm::Template).unwrap();
        let (a, _) = e.begin_session("alice", None).unwrap();
        let (b, _) = e.begin_session("alice", None).unwrap();
        assert_ne!(a.nonce(), b.nonce());
        assert_eq!(a.nonce().len(), 32);
    }

    #[test]
    fn mismatch_and_rejection_reasons() {
        let clock = Arc::new(ManualClock::new(0));
        let e = engine(clock.clone());
        e.enroll("alice", &t("l,e,c"), Algorithm::Template).unwrap();
        assert_eq!(
            run(&e, "alice", [ShapeId::L, ShapeId::E, ShapeId::D]),
            Decision::Denied(DenyReason::ClassificationMismatch)
        );
        clock.advance(2_000);
        let (mut s, _) = e.begin_session("alice", None).unwrap();
        e.submit_frame(&mut s, &follow(&e, ShapeId::L)).unwrap();
        let short: Vec<_> = follow(&e, ShapeId::E).samples()[..10].to_vec();
        let out = e.submit_samples(&mut s, short).unwrap();
        assert_eq!(out.classified, None);
        assert_eq!(s.state(), SessionState::AwaitFrame(3));
        e.submit_frame(&mut s, &follow(&e, ShapeId::C)).unwrap();
        assert_eq!(s.decision(), Some(Decision::Denied(DenyReason::FrameRejected)));
    }

    #[test]
    fn dtree_sessions() {
        let e = engine(Arc::new(ManualClock::new(0)));
        e.enroll("bob", &t("a,k,k"), Algorithm::Dtree).unwrap();
        assert_eq!(run(&e, "bob", [ShapeId::A, ShapeId::K, ShapeId::K]), Decision::Granted);
    }

    #[test]
    fn rate_limit_and_lockout() {
        let clock = Arc::new(ManualClock::new(1_000_000));
        let e = engine(clock.clone());
        e.enroll("eve", &t("a,b,c"), Algorithm::Template).unwrap();
        let wrong = [ShapeId::D, ShapeId::D, ShapeId::D];
        run(&e, "eve", wrong);
        assert!(matches!(e.begin_session("eve", None), Err(Error::RateLimited)));
        clock.advance(1_999);
        assert!(matches!(e.begin_session("eve", None), Err(Error::RateLimited)));
        clock.advance(1);
        for _ in 0..4 {
            run(&e, "eve", wrong);
            clock.advance(2_000);
        }
        assert!(matches!(e.begin_session("eve", None), Err(Error::LockedOut)));
        clock.advance(5 * 60 * 1000 - 2_001);
        assert!(matches!(e.begin_session("eve", None), Err(Error::LockedOut)));
        clock.advance(1);
        assert_eq!(run(&e, "eve", [ShapeId::A, ShapeId::B, ShapeId::C]), Decision::Granted);
        // other users are unaffected
        e.enroll("frank", &t("a,b,c"), Algorithm::Template).unwrap();
        assert!(e.begin_session("frank", None).is_ok());
    }

    #[test]
    fn denials_outside_the_window_expire() {
        let clock = Arc::new(ManualClock::new(0));
        let e = engine(clock.clone());
        e.enroll("eve", &t("a,b,c"), Algorithm::Template).unwrap();
        for _ in 0..4 {
            run(&e, "eve", [ShapeId::D; 3]);
            clock.advance(3 * 60 * 1000);
        }
        // the first denial is now 12 minutes old
        run(&e, "eve", [ShapeId::D; 3]);
        clock.advance(2_000);
        assert!(e.begin_session("eve", None).is_ok());
    }

    #[test]
    fn abort_denies() {
        let e = engine(Arc::new(ManualClock::new(0)));
        e.enroll("alice", &t("l,e,c"), Algorithm::Template).unwrap();
        let (mut s, _) = e.begin_session("alice", None).unwrap();
        e.abort(&mut s);
        assert_eq!(s.decision(), Some(Decision::Denied(DenyReason::FrameRejected)));
    }
}
