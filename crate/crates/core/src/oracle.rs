//! Instrumented incremental first-order oracle.
//!
//! Every function access goes through an [`OracleSession`], which counts IFO
//! calls, tracks per-block chain progress, keeps a deduplicated trace, and
//! turns the progress profile into a certified residual floor. The span
//! audit replays a stored trace and checks that each iterate lies in the
//! linear span of earlier iterates and returned gradients.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::instance::{CertificateKind, FiniteSumInstance, InstanceError};
use crate::math::{dot, norm};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("session is closed")]
    Closed,
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("zero-chain step bound violated: component {component}, block {block}: prefix {from} -> {to}")]
    ZeroChainViolation { component: usize, block: usize, from: usize, to: usize },
}

/// 64-bit FNV-1a over the IEEE bit patterns.
pub fn hash_f64s(v: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in v {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn hash_usizes(v: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in v {
        for b in (*x as u64).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Number of leading coordinates up to and including the last one with
/// `|v_k| > threshold` (0 for an all-below-threshold block).
pub fn activation(v: &[f64], threshold: f64) -> usize {
    v.iter().rposition(|x| x.abs() > threshold).map_or(0, |k| k + 1)
}

/// Content-addressed point store. Ids are assigned in first-seen order;
/// coordinates are retained only when `keep_points` is set (audit mode).
#[derive(Debug, Clone, Default)]
pub struct PointStore {
    keep_points: bool,
    by_hash: BTreeMap<u64, Vec<u64>>,
    points: Vec<Option<Vec<f64>>>,
}

impl PointStore {
    pub fn new(keep_points: bool) -> Self {
        Self { keep_points, by_hash: BTreeMap::new(), points: Vec::new() }
    }

    pub fn keeps_points(&self) -> bool {
        self.keep_points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn intern(&mut self, p: &[f64]) -> u64 {
        let h = hash_f64s(p);
        if let Some(ids) = self.by_hash.get(&h) {
            if !self.keep_points {
                return ids[0];
            }
            for &id in ids {
                if self.points[id as usize].as_deref() == Some(p) {
                    return id;
                }
            }
        }
        let id = self.points.len() as u64;
        self.points.push(self.keep_points.then(|| p.to_vec()));
        self.by_hash.entry(h).or_default().push(id);
        id
    }

    /// Adds a point under a fresh id, bypassing deduplication.
    pub fn insert_fresh(&mut self, p: &[f64]) -> u64 {
        let id = self.points.len() as u64;
        self.points.push(self.keep_points.then(|| p.to_vec()));
        self.by_hash.entry(hash_f64s(p)).or_default().push(id);
        id
    }

    pub fn get(&self, id: u64) -> Option<&[f64]> {
        self.points.get(id as usize).and_then(|p| p.as_deref())
    }

    /// Iterates stored `(id, point)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f64])> {
        self.points.iter().enumerate().filter_map(|(i, p)| p.as_deref().map(|p| (i as u64, p)))
    }

    /// Rebuilds a store from exported points (audit of an external trace).
    pub fn from_points(points: impl IntoIterator<Item = (u64, Vec<f64>)>) -> Self {
        let mut s = Self::new(true);
        for (id, p) in points {
            let id = id as usize;
            if s.points.len() <= id {
                s.points.resize(id + 1, None);
            }
            s.by_hash.entry(hash_f64s(&p)).or_default().push(id as u64);
            s.points[id] = Some(p);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    /// 0-based IFO call index.
    pub t: u64,
    pub component: usize,
    pub point_id: u64,
    /// Iterate produced right after this call, if the solver moved.
    pub iterate_id: Option<u64>,
    pub grad_norm: f64,
    pub prefix_digest: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    /// IFO count at which the certificate was issued.
    pub step: u64,
    pub kind: CertificateKind,
    pub floor_value: f64,
    pub blocks_below_threshold: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// `|v| > threshold` counts as activated.
    pub activation_threshold: f64,
    /// Return an error on a zero-chain violation (otherwise just count it).
    pub strict_zero_chain: bool,
    /// Keep full coordinates of every distinct point (needed for the span audit).
    pub store_points: bool,
}

impl OracleConfig {
    /// Threshold suggested for traces produced outside this crate.
    pub const FALLBACK_THRESHOLD: f64 = 1e-14;

    pub fn audit() -> Self {
        Self { store_points: true, ..Self::default() }
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { activation_threshold: 0.0, strict_zero_chain: true, store_points: false }
    }
}

pub struct OracleSession<'a> {
    instance: &'a FiniteSumInstance,
    config: OracleConfig,
    ifo_count: u64,
    per_component_counts: Vec<u64>,
    prefix_profile: Vec<usize>,
    /// Largest activation per block over query points, returned gradients
    /// and observed iterates.
    reach: Vec<usize>,
    trace: Vec<TraceRecord>,
    store: PointStore,
    initial_id: Option<u64>,
    rng_seed: u64,
    violations: u64,
    open: bool,
    scratch: Vec<f64>,
}

impl<'a> OracleSession<'a> {
    pub fn new(instance: &'a FiniteSumInstance, rng_seed: u64) -> Self {
        Self::with_config(instance, rng_seed, OracleConfig::default())
    }

    pub fn with_config(instance: &'a FiniteSumInstance, rng_seed: u64, config: OracleConfig) -> Self {
        let n = instance.n;
        Self {
            instance,
            config,
            ifo_count: 0,
            per_component_counts: vec![0; n],
            prefix_profile: vec![0; n],
            reach: vec![0; n],
            trace: Vec::new(),
            store: PointStore::new(config.store_points),
            initial_id: None,
            rng_seed,
            violations: 0,
            open: true,
            scratch: vec![0.0; instance.dim()],
        }
    }

    pub fn instance(&self) -> &'a FiniteSumInstance {
        self.instance
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn ifo_count(&self) -> u64 {
        self.ifo_count
    }

    pub fn per_component_counts(&self) -> &[u64] {
        &self.per_component_counts
    }

    pub fn prefix_profile(&self) -> &[usize] {
        &self.prefix_profile
    }

    pub fn reach(&self) -> &[usize] {
        &self.reach
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn store(&self) -> &PointStore {
        &self.store
    }

    pub fn initial_id(&self) -> Option<u64> {
        self.initial_id
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn zero_chain_violations(&self) -> u64 {
        self.violations
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn close(&mut self) {
        self.open = false;
    }

    fn block_activation(&self, j: usize, v: &[f64]) -> usize {
        activation(self.instance.embedding.select(j, v), self.config.activation_threshold)
    }

    /// Registers the starting point (before any call). Later iterates are
    /// registered through [`OracleSession::observe_iterate`].
    pub fn set_initial(&mut self, x0: &[f64]) -> Result<(), OracleError> {
        if x0.len() != self.instance.dim() {
            return Err(InstanceError::DimensionMismatch { expected: self.instance.dim(), got: x0.len() }.into());
        }
        self.initial_id = Some(self.store.intern(x0));
        for j in 0..self.instance.n {
            let a = self.block_activation(j, x0);
            self.reach[j] = self.reach[j].max(a);
        }
        Ok(())
    }

    /// One IFO call: `(f_i(x), ∇f_i(x))`, gradient written into `grad`.
    pub fn query_into(&mut self, i: usize, point: &[f64], grad: &mut [f64]) -> Result<f64, OracleError> {
        if !self.open {
            return Err(OracleError::Closed);
        }
        self.instance.check_query(&crate::instance::ComponentQuery { index: i, point })?;
        if grad.len() != point.len() {
            return Err(InstanceError::DimensionMismatch { expected: point.len(), got: grad.len() }.into());
        }
        let old = self.prefix_profile[i];
        let act = self.block_activation(i, point);
        if act > old + 1 {
            self.violations += 1;
            if self.config.strict_zero_chain {
                return Err(OracleError::ZeroChainViolation { component: i, block: i, from: old, to: act });
            }
        }
        let value = self.instance.component_into(i, point, grad);
        self.prefix_profile[i] = old.max(act);
        for j in 0..self.instance.n {
            let a = self.block_activation(j, point).max(self.block_activation(j, grad));
            if a > self.reach[j] {
                self.reach[j] = a;
            }
        }
        let point_id = self.store.intern(point);
        self.trace.push(TraceRecord {
            t: self.ifo_count,
            component: i,
            point_id,
            iterate_id: None,
            grad_norm: norm(grad),
            prefix_digest: hash_usizes(&self.prefix_profile),
        });
        self.ifo_count += 1;
        self.per_component_counts[i] += 1;
        Ok(value)
    }

    pub fn query(&mut self, i: usize, point: &[f64]) -> Result<(f64, Vec<f64>), OracleError> {
        let mut g = vec![0.0; point.len()];
        let v = self.query_into(i, point, &mut g)?;
        Ok((v, g))
    }

    /// Records the solver's current iterate against the last IFO call and
    /// folds its activation into the progress profile.
    pub fn observe_iterate(&mut self, x: &[f64]) {
        for j in 0..self.instance.n {
            let a = self.block_activation(j, x);
            if a > self.reach[j] {
                self.reach[j] = a;
            }
        }
        let id = self.store.intern(x);
        if let Some(last) = self.trace.last_mut() {
            last.iterate_id = Some(id);
        } else if self.initial_id.is_none() {
            self.initial_id = Some(id);
        }
    }

    /// Number of blocks whose effective progress `max(reach, act(x))` is
    /// below the instance threshold.
    pub fn blocks_below(&self, x: &[f64]) -> usize {
        let thr = self.instance.threshold();
        (0..self.instance.n).filter(|&j| self.reach[j].max(self.block_activation(j, x)) < thr).count()
    }

    pub fn certificate(&self, x: &[f64]) -> Certificate {
        let k = self.blocks_below(x);
        Certificate {
            step: self.ifo_count,
            kind: self.instance.certificate_kind(),
            floor_value: self.instance.certified_floor(k),
            blocks_below_threshold: k,
        }
    }

    /// `∇F(x)` computed through `n` IFO calls (one per component).
    pub fn full_gradient(&mut self, x: &[f64], out: &mut [f64]) -> Result<f64, OracleError> {
        let n = self.instance.n;
        out.fill(0.0);
        let mut scratch = core::mem::take(&mut self.scratch);
        let mut v = 0.0;
        for i in 0..n {
            match self.query_into(i, x, &mut scratch) {
                Ok(fi) => v += fi,
                Err(e) => {
                    self.scratch = scratch;
                    return Err(e);
                }
            }
            for (o, g) in out.iter_mut().zip(&scratch) {
                *o += g;
            }
        }
        self.scratch = scratch;
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(v * inv)
    }

    /// Replaces the stored iterate of record `t` with `p` (test hook for the
    /// span audit). Only that record is affected.
    pub fn corrupt_iterate(&mut self, t: usize, p: &[f64]) -> bool {
        match self.trace.get(t) {
            Some(rec) if rec.iterate_id.is_some() => {
                let id = self.store.insert_fresh(p);
                self.trace[t].iterate_id = Some(id);
                true
            }
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// span audit

pub const AUDIT_MAX_DIM: usize = 4096;
pub const AUDIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AuditError {
    #[error("ambient dimension {0} exceeds the audit cap")]
    DimensionTooLarge(usize),
    #[error("point {0} is not stored; record traces in audit mode")]
    MissingPoint(u64),
    #[error("trace has no initial point")]
    MissingInitial,
    #[error("trace refers to component {0} outside the instance")]
    BadComponent(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpanViolation {
    pub t: u64,
    pub residual: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AuditReport {
    pub records: usize,
    pub iterates_checked: usize,
    /// Iterates outside the allowed span (these fail the audit).
    pub violations: Vec<SpanViolation>,
    /// Query points outside the span (logged, not failing).
    pub off_span_queries: Vec<SpanViolation>,
    pub final_rank: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Incrementally maintained orthonormal basis (modified Gram–Schmidt, two passes).
#[derive(Debug, Clone)]
pub struct SpanBasis {
    basis: Vec<Vec<f64>>,
    dim: usize,
}

impl SpanBasis {
    /// Relative size below which a new direction is treated as dependent.
    const ADD_TOL: f64 = 1e-12;

    pub fn new(dim: usize) -> Self {
        Self { basis: Vec::new(), dim }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Component of `v` orthogonal to the span.
    pub fn residual(&self, v: &[f64]) -> Vec<f64> {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for b in &self.basis {
                let c = dot(b, &r);
                for (rk, bk) in r.iter_mut().zip(b) {
                    *rk -= c * bk;
                }
            }
        }
        r
    }

    pub fn add(&mut self, v: &[f64]) {
        let scale = norm(v);
        if scale == 0.0 || self.basis.len() >= self.dim {
            return;
        }
        let mut r = self.residual(v);
        let rn = norm(&r);
        if rn > Self::ADD_TOL * scale {
            r.iter_mut().for_each(|x| *x /= rn);
            self.basis.push(r);
        }
    }
}

/// Replays `trace`, recomputing each returned gradient from `instance`,
/// and checks every recorded iterate against the running span
/// `Lin{x^(0), ..., x^(t), ∇f_{i_0}(·), ..., ∇f_{i_t}(·)}`.
/// A failing iterate is reported and then admitted, so a single corrupted
/// step fails alone.
pub fn span_audit(
    instance: &FiniteSumInstance,
    trace: &[TraceRecord],
    store: &PointStore,
    initial_id: Option<u64>,
    tol: f64,
) -> Result<AuditReport, AuditError> {
    let d = instance.dim();
    if d > AUDIT_MAX_DIM {
        return Err(AuditError::DimensionTooLarge(d));
    }
    let initial = initial_id.ok_or(AuditError::MissingInitial)?;
    let get = |id: u64| store.get(id).ok_or(AuditError::MissingPoint(id));
    // refuse up front rather than half-way
    get(initial)?;
    for rec in trace {
        get(rec.point_id)?;
        if let Some(id) = rec.iterate_id {
            get(id)?;
        }
        if rec.component >= instance.n {
            return Err(AuditError::BadComponent(rec.component));
        }
    }
    let mut span = SpanBasis::new(d);
    span.add(get(initial)?);
    let mut report = AuditReport { records: trace.len(), ..Default::default() };
    let mut grad = vec![0.0; d];
    for rec in trace {
        let p = get(rec.point_id)?;
        let pn = norm(p);
        let pr = norm(&span.residual(p));
        if pr > tol * pn {
            report.off_span_queries.push(SpanViolation { t: rec.t, residual: pr, norm: pn });
            span.add(p);
        }
        instance.component_into(rec.component, p, &mut grad);
        span.add(&grad);
        if let Some(id) = rec.iterate_id {
            let x = get(id)?;
            let xn = norm(x);
            let xr = norm(&span.residual(x));
            report.iterates_checked += 1;
            if xr > tol * xn {
                report.violations.push(SpanViolation { t: rec.t, residual: xr, norm: xn });
            }
            span.add(x);
        }
    }
    report.final_rank = span.rank();
    Ok(report)
}

impl OracleSession<'_> {
    pub fn span_audit(&self, tol: f64) -> Result<AuditReport, AuditError> {
        if !self.store.keeps_points() {
            return Err(AuditError::MissingPoint(0));
        }
        span_audit(self.instance, &self.trace, &self.store, self.initial_id, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{make_omega_n_instance, make_sc_instance, OmegaVariant};

    #[test]
    fn activation_counts_prefix() {
        assert_eq!(activation(&[0.0, 0.0, 0.0], 0.0), 0);
        assert_eq!(activation(&[1.0, 0.0, 0.0], 0.0), 1);
        assert_eq!(activation(&[0.0, 0.0, -2.0], 0.0), 3);
        assert_eq!(activation(&[1.0, 1e-15, 0.0], 1e-14), 1);
    }

    #[test]
    fn first_query_keeps_prefix_zero() {
        let inst = make_sc_instance(8, 1.0, 0.01, 1.0, 1e-3).unwrap();
        let mut s = OracleSession::new(&inst, 0);
        let x = vec![0.0; inst.dim()];
        let (_, g) = s.query(3, &x).unwrap();
        assert!(s.prefix_profile().iter().all(|&p| p == 0));
        let block = inst.embedding.select(3, &g);
        assert!(block[0] != 0.0 && block[1..].iter().all(|&v| v == 0.0));
        assert_eq!(s.reach()[3], 1);
    }

    #[test]
    fn round_robin_counts() {
        let inst = make_sc_instance(8, 1.0, 0.01, 1.0, 1e-3).unwrap();
        let mut s = OracleSession::new(&inst, 0);
        let x = vec![0.0; inst.dim()];
        for i in 0..8 {
            s.query(i, &x).unwrap();
        }
        assert_eq!(s.ifo_count(), 8);
        assert!(s.per_component_counts().iter().all(|&c| c == 1));
        assert_eq!(s.trace().len(), 8);
        // all queries share one deduplicated point
        assert!(s.trace().iter().all(|r| r.point_id == s.trace()[0].point_id));
    }

    #[test]
    fn injected_jump_fires() {
        let inst = make_sc_instance(8, 1.0, 0.01, 1.0, 1e-3).unwrap();
        let mut s = OracleSession::new(&inst, 0);
        let mut x = vec![0.0; inst.dim()];
        let r = inst.embedding.block(2);
        x[r.start + 1] = 1.0;
        match s.query(2, &x) {
            Err(OracleError::ZeroChainViolation { component: 2, from: 0, to: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(s.ifo_count(), 0);
        let mut lax = OracleSession::with_config(&inst, 0, OracleConfig { strict_zero_chain: false, ..Default::default() });
        lax.query(2, &x).unwrap();
        assert_eq!(lax.zero_chain_violations(), 1);
    }

    #[test]
    fn closed_session_and_bad_queries() {
        let inst = make_omega_n_instance(4, 1.0, 1.0, OmegaVariant::Sc).unwrap();
        let mut s = OracleSession::new(&inst, 0);
        assert!(matches!(s.query(0, &[0.0; 3]), Err(OracleError::Instance(InstanceError::DimensionMismatch { .. }))));
        assert!(matches!(s.query(4, &[0.0; 4]), Err(OracleError::Instance(InstanceError::IndexOutOfRange { .. }))));
        s.close();
        assert_eq!(s.query(0, &[0.0; 4]), Err(OracleError::Closed));
    }

    #[test]
    fn fresh_and_exhausted_certificates() {
        let inst = make_sc_instance(8, 1.0, 0.01, 1.0, 1e-3).unwrap();
        let s = OracleSession::new(&inst, 0);
        let zero = vec![0.0; inst.dim()];
        let c = s.certificate(&zero);
        assert_eq!(c.kind, CertificateKind::Gap);
        assert_eq!(c.blocks_below_threshold, 8);
        assert!(c.floor_value >= 1e-3);
        let ones = vec![1.0; inst.dim()];
        let c = s.certificate(&ones);
        assert_eq!(c.blocks_below_threshold, 0);
        assert_eq!(c.floor_value, 0.0);
    }

    #[test]
    fn omega_support_certificate() {
        let inst = make_omega_n_instance(8, 1.0, 1.0, OmegaVariant::Sc).unwrap();
        let s = OracleSession::new(&inst, 0);
        let mut x = vec![0.0; 8];
        x[..4].iter_mut().for_each(|v| *v = 0.3);
        let c = s.certificate(&x);
        assert_eq!(c.kind, CertificateKind::Support);
        assert_eq!(c.floor_value, inst.scale.lambda / 4.0);
        x[4] = 0.1;
        assert_eq!(s.certificate(&x).floor_value, 0.0);
    }

    #[test]
    fn point_store_dedup_and_fresh() {
        let mut st = PointStore::new(true);
        let a = st.intern(&[1.0, 2.0]);
        let b = st.intern(&[1.0, 2.0]);
        let c = st.insert_fresh(&[1.0, 2.0]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(st.get(c), Some(&[1.0, 2.0][..]));
        let light = {
            let mut s = PointStore::new(false);
            s.intern(&[3.0]);
            s
        };
        assert_eq!(light.get(0), None);
    }

    #[test]
    fn span_basis_residuals() {
        let mut b = SpanBasis::new(3);
        b.add(&[1.0, 1.0, 0.0]);
        assert!(norm(&b.residual(&[2.0, 2.0, 0.0])) < 1e-15);
        assert!((norm(&b.residual(&[0.0, 0.0, 1.0])) - 1.0).abs() < 1e-15);
        b.add(&[3.0, 3.0, 0.0]);
        assert_eq!(b.rank(), 1);
    }

    #[test]
    fn audit_refuses_without_points() {
        let inst = make_omega_n_instance(4, 1.0, 1.0, OmegaVariant::Sc).unwrap();
        let mut s = OracleSession::new(&inst, 0);
        s.set_initial(&[0.0; 4]).unwrap();
        s.query(0, &[0.0; 4]).unwrap();
        assert!(s.span_audit(AUDIT_TOLERANCE).is_err());
    }
}
