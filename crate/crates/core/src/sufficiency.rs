//! Neutral space of a trajectory segment and the sufficiency test.
//!
//! Just before and after every ball-ball collision a neutral vector has the
//! form `(n, n) + alpha (v1, v2)`, with one translation `n` and one advance
//! `alpha` per island. Between islands each ball's component is carried by
//! its group element, so junction `i` gives, for `k = 1, 2`,
//!
//! `g_i^(k) s_i n_i - n_{i+1} = (alpha_{i+1} - alpha_i) v_k^entry(i+1)`.
//!
//! The neutral space is the null space of this system; the segment is
//! sufficient when only the flow direction survives.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use serde::Serialize;

use crate::fixed::Fixed1024;
use crate::scalar::Real;
use crate::dynamics::{simulate, Budget, DynamicsError, EventKind, EventRecord, PhaseState};
use crate::group::GroupElement;
use crate::symbolic::{compress_to_short, is_rich, long_sequence, LongSeq, Richness, ShortSeq, SymbolicError};
use crate::tables::Table;
use crate::vec2::Vector2;

type V2 = Vector2<f64>;

/// Relative singular-value threshold for the nullity.
pub const RANK_TOL: f64 = 1e-8;
/// Minimum separation (as a ratio) of the singular values from the threshold.
pub const MIN_GAP_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SufficiencyError {
    #[error("velocities given for {got} islands, the sequence has {expected}")]
    MissingVelocities { expected: usize, got: usize },
    #[error("singular values sit within a factor {gap_ratio:.3} of the rank threshold")]
    IllConditioned { nullity: usize, gap_ratio: f64 },
    #[error("sufficiency needs at least 2 islands, got {0}")]
    TooFewIslands(usize),
    #[error("perturbed trajectory changed its collision sequence at event {0}")]
    SequenceChanged(usize),
    #[error("relative velocity {0:e} is too small to define a direction")]
    DegenerateRelativeVelocity(f64),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Velocities of both balls just before an island's first collision and just
/// after its last one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IslandVelocities {
    pub entry: [V2; 2],
    pub exit: [V2; 2],
}

pub fn island_velocities(long: &LongSeq<f64>, short: &ShortSeq) -> Vec<IslandVelocities> {
    short
        .islands
        .iter()
        .map(|i| IslandVelocities {
            entry: long.collisions[i.collisions.start].v_before,
            exit: long.collisions[i.collisions.end - 1].v_after,
        })
        .collect()
}

/// Assembled neutral-space constraints; unknowns `(n_x, n_y, alpha)` per island.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralSystem {
    pub islands: usize,
    pub matrix: DMatrix<f64>,
    /// Extra rows imposing equal advances, appended after the junction rows.
    pub equal_advance_rows: usize,
}

pub fn build_neutral_system(short: &ShortSeq, velocities: &[IslandVelocities]) -> Result<NeutralSystem, SufficiencyError> {
    let k = short.islands.len();
    if velocities.len() != k {
        return Err(SufficiencyError::MissingVelocities {
            expected: k,
            got: velocities.len(),
        });
    }
    let mut m = DMatrix::zeros(4 * (k - 1), 3 * k);
    for (i, j) in short.junctions.iter().enumerate() {
        let s = short.islands[i].s;
        for (ball, g) in [j.pair.g1, j.pair.g2].into_iter().enumerate() {
            let a = (g * s).matrix::<f64>();
            let v = velocities[i + 1].entry[ball];
            for r in 0..2 {
                let row = 4 * i + 2 * ball + r;
                m[(row, 3 * i)] = a[r][0];
                m[(row, 3 * i + 1)] = a[r][1];
                m[(row, 3 * (i + 1) + r)] = -1.0;
                let vr = if r == 0 { v.x } else { v.y };
                m[(row, 3 * i + 2)] = vr;
                m[(row, 3 * (i + 1) + 2)] = -vr;
            }
        }
    }
    Ok(NeutralSystem {
        islands: k,
        matrix: m,
        equal_advance_rows: 0,
    })
}

/// System of the whole window of `long`.
pub fn neutral_system_of(long: &LongSeq<f64>) -> Result<(ShortSeq, NeutralSystem), SufficiencyError> {
    let short = compress_to_short(long);
    let sys = build_neutral_system(&short, &island_velocities(long, &short))?;
    Ok((short, sys))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeutralDimension {
    pub nullity: usize,
    /// Distance of the singular values nearest the threshold from it, as a
    /// ratio (infinite when no singular value is near it).
    pub gap_ratio: f64,
    pub singular_values: Vec<f64>,
}

impl NeutralSystem {
    pub fn columns(&self) -> usize {
        3 * self.islands
    }

    /// Adds the row `alpha_a - alpha_b = 0`.
    pub fn with_equal_advances(mut self, a: usize, b: usize) -> Self {
        let rows = self.matrix.nrows();
        self.matrix = self.matrix.insert_row(rows, 0.0);
        self.matrix[(rows, 3 * a + 2)] = 1.0;
        self.matrix[(rows, 3 * b + 2)] -= 1.0;
        self.equal_advance_rows += 1;
        self
    }

    /// Nullity with the gap diagnostic; never fails (see [`neutral_dimension`]).
    pub fn dimension(&self, tol: f64) -> NeutralDimension {
        let cols = self.columns();
        if self.matrix.nrows() == 0 {
            return NeutralDimension {
                nullity: cols,
                gap_ratio: f64::INFINITY,
                singular_values: Vec::new(),
            };
        }
        let mut sv: Vec<f64> = self.matrix.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let thr = tol * sv[0].max(f64::MIN_POSITIVE);
        let rank = sv.iter().filter(|&&s| s > thr).count();
        let above = if rank > 0 { sv[rank - 1] / thr } else { f64::INFINITY };
        let below = sv.get(rank).map_or(f64::INFINITY, |&s| thr / s);
        NeutralDimension {
            nullity: cols - rank,
            gap_ratio: above.min(below),
            singular_values: sv,
        }
    }

    /// Orthonormal basis of the null space, each vector of length `columns()`.
    pub fn null_space(&self, tol: f64) -> Vec<DVector<f64>> {
        let cols = self.columns();
        // pad to a square system so the SVD exposes all right singular vectors
        let rows = self.matrix.nrows().max(cols);
        let mut m = DMatrix::zeros(rows, cols);
        m.view_mut((0, 0), (self.matrix.nrows(), cols)).copy_from(&self.matrix);
        let svd = m.svd(false, true);
        let vt = svd.v_t.expect("requested");
        let max = svd.singular_values.max().max(f64::MIN_POSITIVE);
        svd.singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= tol * max)
            .map(|(i, _)| vt.row(i).transpose())
            .collect()
    }

    /// `|A x|` for a candidate null vector.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.matrix * x).norm()
    }
}

/// Flow direction in the unknowns: zero translations, unit advances.
pub fn flow_vector(islands: usize) -> DVector<f64> {
    DVector::from_fn(3 * islands, |i, _| if i % 3 == 2 { 1.0 } else { 0.0 })
}

pub fn neutral_dimension(sys: &NeutralSystem, tol: f64) -> Result<NeutralDimension, SufficiencyError> {
    let d = sys.dimension(tol);
    if d.gap_ratio < MIN_GAP_RATIO {
        return Err(SufficiencyError::IllConditioned {
            nullity: d.nullity,
            gap_ratio: d.gap_ratio,
        });
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Sufficiency {
    Sufficient,
    NotSufficient { dim: usize },
    Degenerate { gap_ratio: f64 },
}

impl Sufficiency {
    pub fn label(&self) -> &'static str {
        match self {
            Sufficiency::Sufficient => "sufficient",
            Sufficiency::NotSufficient { .. } => "not_sufficient",
            Sufficiency::Degenerate { .. } => "degenerate",
        }
    }
}

pub fn is_sufficient(sys: &NeutralSystem) -> Result<Sufficiency, SufficiencyError> {
    is_sufficient_with(sys, RANK_TOL)
}

/// [`is_sufficient`] with an explicit relative rank tolerance.
pub fn is_sufficient_with(sys: &NeutralSystem, tol: f64) -> Result<Sufficiency, SufficiencyError> {
    if sys.islands < 2 {
        return Err(SufficiencyError::TooFewIslands(sys.islands));
    }
    Ok(match neutral_dimension(sys, tol) {
        Ok(d) if d.nullity == 1 => Sufficiency::Sufficient,
        Ok(d) => Sufficiency::NotSufficient { dim: d.nullity },
        Err(SufficiencyError::IllConditioned { gap_ratio, .. }) => Sufficiency::Degenerate { gap_ratio },
        Err(e) => return Err(e),
    })
}

/// Whether `v1 - v2` lies on the line with direction `e`, within
/// `1e-9 |v1 - v2|`.
pub fn degeneracy_check(v1: V2, v2: V2, e: V2) -> Result<bool, SufficiencyError> {
    let d = v1 - v2;
    let len = d.norm();
    if len <= 1e-10 {
        return Err(SufficiencyError::DegenerateRelativeVelocity(len));
    }
    Ok(d.cross(e.normalized()).abs() < 1e-9 * len)
}

/// Distance (as `|sin|` of the angle) of `v1 - v2` from the line `e`.
fn line_offset(v1: V2, v2: V2, e: V2) -> f64 {
    let d = v1 - v2;
    d.normalized().cross(e.normalized()).abs()
}

/// Smallest `|sin|` angle between a relative velocity and a line along which
/// a reflection junction makes the two-collision system lose rank: the entry
/// velocities after a junction with `hat g = R_E` against `E^perp`, and the
/// exit velocities before a junction with `bar g = R_E'` against `E'^perp`.
pub fn reflection_degeneracy_margin(short: &ShortSeq, velocities: &[IslandVelocities]) -> f64 {
    let mut margin = f64::INFINITY;
    for (i, j) in short.junctions.iter().enumerate() {
        if let Some(e) = j.pair.hat().axis() {
            let v = velocities[i + 1].entry;
            margin = margin.min(line_offset(v[0], v[1], e.direction::<f64>().perp()));
        }
        if let Some(e) = j.pair.bar().axis() {
            let v = velocities[i].exit;
            margin = margin.min(line_offset(v[0], v[1], e.direction::<f64>().perp()));
        }
    }
    margin
}

/// Perturbation `(n_0, n_0) + alpha_0 (v1, v2)` of the first island's entry
/// state encoded by a solution vector.
pub fn initial_perturbation(x: &DVector<f64>, velocities: &[IslandVelocities]) -> [V2; 2] {
    let n = V2::new(x[0], x[1]);
    let v = velocities[0].entry;
    [n + v[0] * x[2], n + v[1] * x[2]]
}

// ---------------------------------------------------------------------------
// Finite-difference oracles

/// A window of a trajectory from a free-flight state before its first
/// ball-ball collision through its last one.
#[derive(Debug, Clone)]
pub struct Segment {
    /// Midpoint of the free flight that ends at the first collision.
    pub start: PhaseState<f64>,
    /// Events from the first to the last ball-ball collision, inclusive.
    pub events: Vec<EventRecord<f64>>,
    pub long: LongSeq<f64>,
}

/// Window of `events[first..=last]`; both ends must be ball-ball collisions.
pub fn extract_segment(
    n: u8,
    initial: &PhaseState<f64>,
    events: &[EventRecord<f64>],
    first: usize,
    last: usize,
) -> Result<Segment, SufficiencyError> {
    let before = if first == 0 { *initial } else { events[first - 1].state };
    let start = before.flown((events[first].time - before.t) * 0.5);
    let window = events[first..=last].to_vec();
    let long = long_sequence(n, &start, &window)?;
    Ok(Segment {
        start,
        events: window,
        long,
    })
}

fn perturbed<T: Real>(s: &PhaseState<T>, w: [Vector2<T>; 2], h: T) -> PhaseState<T> {
    PhaseState {
        q1: s.q1 + w[0] * h,
        q2: s.q2 + w[1] * h,
        ..*s
    }
}

fn same_kind(a: &EventKind, b: &EventKind) -> bool {
    match (a, b) {
        (EventKind::WallHit { ball: b1, side: s1, .. }, EventKind::WallHit { ball: b2, side: s2, .. }) => {
            b1 == b2 && s1 == s2
        }
        _ => a == b,
    }
}

/// Replays the event sequence `kinds` from `start` moved by `h w` and checks
/// it is unchanged.
fn replay<T: Real>(
    table: &Table<T>,
    start: &PhaseState<T>,
    kinds: &[EventKind],
    w: [Vector2<T>; 2],
    h: T,
) -> Result<Vec<EventRecord<T>>, SufficiencyError> {
    let s = perturbed(start, w, h);
    s.validate(table)?;
    let traj = simulate(table, s, Budget::events(kinds.len()))?;
    if traj.events.len() != kinds.len() {
        return Err(SufficiencyError::SequenceChanged(traj.events.len()));
    }
    for (i, (a, b)) in traj.events.iter().zip(kinds).enumerate() {
        if !same_kind(&a.kind, b) {
            return Err(SufficiencyError::SequenceChanged(i));
        }
    }
    Ok(traj.events)
}

fn kinds<T>(events: &[EventRecord<T>]) -> Vec<EventKind> {
    events.iter().map(|e| e.kind).collect()
}

/// Largest change of the velocities just after the segment's last collision
/// when the start state is moved by `h w`.
pub fn endpoint_velocity_deviation(table: &Table<f64>, seg: &Segment, w: [V2; 2], h: f64) -> Result<f64, SufficiencyError> {
    // compare against the unperturbed replay, not the recorded events, so
    // rounding differences between the two runs cancel
    let k = kinds(&seg.events);
    let ev = replay(table, &seg.start, &k, w, h)?;
    let base = replay(table, &seg.start, &k, w, 0.0)?;
    let (a, b) = (&ev.last().expect("nonempty").state, &base.last().expect("nonempty").state);
    Ok((a.v1 - b.v1).norm().max((a.v2 - b.v2).norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvanceMeasurement {
    /// Position of the collision in the segment's event list.
    pub event: usize,
    /// Richardson-extrapolated advance.
    pub alpha: f64,
    /// `|D(delta) - D(delta/2)|` of the central differences.
    pub residual: f64,
}

/// Advance `tau(x) - tau(x + w)` of event `sigma` of the trajectory
/// `reference` flown from `start`, linearized in `w` by central differences
/// at `delta` and `delta / 2`.
pub fn measure_advance(
    table: &Table<f64>,
    start: &PhaseState<f64>,
    reference: &[EventRecord<f64>],
    sigma: usize,
    w: [V2; 2],
    delta: f64,
) -> Result<AdvanceMeasurement, SufficiencyError> {
    advance_in(table, start, &kinds(&reference[..=sigma]), w, delta)
}

/// `start` in 1024-bit fixed point, back on the unit energy shell.
fn wide_state(start: &PhaseState<f64>) -> PhaseState<Fixed1024> {
    let mut s: PhaseState<Fixed1024> = start.cast();
    let k = s.energy().sqrt().recip();
    s.v1 = s.v1 * k;
    s.v2 = s.v2 * k;
    s
}

fn advance_in<T: Real>(
    table: &Table<T>,
    start: &PhaseState<T>,
    prefix: &[EventKind],
    w: [Vector2<T>; 2],
    delta: T,
) -> Result<AdvanceMeasurement, SufficiencyError> {
    let sigma = prefix.len() - 1;
    // clock restarted at zero so event times carry no absolute-time rounding
    let start = PhaseState { t: T::zero(), ..*start };
    let tau = |h: T| -> Result<T, SufficiencyError> { Ok(replay(table, &start, prefix, w, h)?[sigma].time) };
    let d = |h: T| -> Result<T, SufficiencyError> { Ok((tau(-h)? - tau(h)?) / (T::two() * h)) };
    let (d1, d2) = (d(delta)?, d(delta * T::half())?);
    Ok(AdvanceMeasurement {
        event: sigma,
        alpha: ((T::lit(4.0) * d2 - d1) / T::lit(3.0)).as_f64(),
        residual: (d1 - d2).abs().as_f64(),
    })
}

// ---------------------------------------------------------------------------
// Segment sampling and reports

/// Pattern of a sampled window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentClass {
    /// `b g b` with `hat g` a reflection.
    ReflectionPair,
    /// `b g b` with `hat g` a nontrivial rotation.
    RotationPair,
    /// `b g1 (b,s) g2 b`, rich in case 1.
    RichReflection,
    /// `b g1 (b,s) g2 b`, rich in case 2.
    RichRotation,
}

impl SegmentClass {
    pub const ALL: [SegmentClass; 4] = [
        SegmentClass::ReflectionPair,
        SegmentClass::RotationPair,
        SegmentClass::RichReflection,
        SegmentClass::RichRotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SegmentClass::ReflectionPair => "reflection_pair",
            SegmentClass::RotationPair => "rotation_pair",
            SegmentClass::RichReflection => "rich_case_1",
            SegmentClass::RichRotation => "rich_case_2",
        }
    }

    /// Nullity on generic segments of this class.
    pub fn expected_nullity(self) -> usize {
        match self {
            SegmentClass::ReflectionPair | SegmentClass::RotationPair => 2,
            SegmentClass::RichReflection | SegmentClass::RichRotation => 1,
        }
    }
}

/// Windows of `long` (as collision index ranges) matching `class`.
pub fn matching_windows(long: &LongSeq<f64>, class: SegmentClass) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    match class {
        SegmentClass::ReflectionPair | SegmentClass::RotationPair => {
            for (i, j) in long.junctions.iter().enumerate() {
                let hat = j.hat();
                let hit = match class {
                    SegmentClass::ReflectionPair => hat.is_reflection(),
                    _ => hat.is_rotation() && !hat.is_identity(),
                };
                if hit {
                    out.push(i..i + 2);
                }
            }
        }
        SegmentClass::RichReflection | SegmentClass::RichRotation => {
            let want = if class == SegmentClass::RichReflection { 1 } else { 2 };
            let short = compress_to_short(long);
            for i in 0..short.islands.len().saturating_sub(2) {
                let range = short.islands[i].collisions.end - 1..short.islands[i + 2].collisions.start + 1;
                let sub = compress_to_short(&long.window(range.clone()));
                if let Ok(Richness::Yes { case, .. }) = is_rich(&sub) {
                    if case == want {
                        out.push(range);
                    }
                }
            }
        }
    }
    out
}

/// Event positions (within the trajectory) of the collisions in `range`.
pub fn window_events(long: &LongSeq<f64>, first_event_index: usize, range: &std::ops::Range<usize>) -> (usize, usize) {
    (
        long.collisions[range.start].event_index - first_event_index,
        long.collisions[range.end - 1].event_index - first_event_index,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentRow {
    pub segment_id: usize,
    pub n_islands: usize,
    /// 1 or 2 for rich windows, 0 otherwise.
    pub rich_case: u8,
    pub nullity: usize,
    pub gap_ratio: f64,
    pub verdict: Sufficiency,
    /// Smallest angular distance to a reflection degeneracy line.
    pub degeneracy_margin: f64,
}

impl SegmentRow {
    /// Whether a non-conforming result is explained by a diagnostic.
    pub fn flagged(&self) -> bool {
        matches!(self.verdict, Sufficiency::Degenerate { .. }) || self.gap_ratio < 1e3 || self.degeneracy_margin < 1e-6
    }
}

/// Analyzes one window of `long`.
pub fn analyze_window(segment_id: usize, long: &LongSeq<f64>) -> Result<SegmentRow, SufficiencyError> {
    analyze_window_with(segment_id, long, RANK_TOL)
}

pub fn analyze_window_with(segment_id: usize, long: &LongSeq<f64>, tol: f64) -> Result<SegmentRow, SufficiencyError> {
    let (short, sys) = neutral_system_of(long)?;
    let vel = island_velocities(long, &short);
    let d = sys.dimension(tol);
    let verdict = is_sufficient_with(&sys, tol)?;
    let rich_case = match is_rich(&short) {
        Ok(Richness::Yes { case, .. }) => case,
        _ => 0,
    };
    Ok(SegmentRow {
        segment_id,
        n_islands: short.islands.len(),
        rich_case,
        nullity: d.nullity,
        gap_ratio: d.gap_ratio,
        verdict,
        degeneracy_margin: reflection_degeneracy_margin(&short, &vel),
    })
}

pub const SUFFICIENCY_CSV_HEADER: &str = "segment_id,n_islands,rich_case,nullity,gap_ratio,verdict";

pub fn write_sufficiency_csv<W: Write + ?Sized>(w: &mut W, rows: &[SegmentRow]) -> io::Result<()> {
    writeln!(w, "{SUFFICIENCY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.6e},{}",
            r.segment_id,
            r.n_islands,
            r.rich_case,
            r.nullity,
            r.gap_ratio,
            r.verdict.label()
        )?;
    }
    Ok(())
}

/// Group elements of a short sequence's junctions, for diagnostics.
pub fn junction_elements(short: &ShortSeq) -> Vec<(GroupElement, GroupElement)> {
    short.junctions.iter().map(|j| (j.pair.g1, j.pair.g2)).collect()
}

/// Conformity of one segment class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: SegmentClass,
    pub expected_nullity: usize,
    pub segments: usize,
    pub conforming: usize,
    /// Non-conforming segments explained by the degeneracy or gap diagnostics.
    pub flagged: usize,
    /// Largest endpoint deviation of a null vector, in units of `delta^2`.
    pub fd_null_max: f64,
    /// Smallest endpoint deviation of a random vector, in units of `delta`.
    pub fd_random_min: f64,
    /// Largest observed order `log2(dev(delta) / dev(delta/2))` of a
    /// random-vector deviation (1 for a first-order response).
    pub fd_random_order: f64,
    pub fd_segments: usize,
    pub fd_failures: usize,
    /// Segments whose perturbed replay changed the collision sequence.
    pub fd_skipped: usize,
}

impl ClassSummary {
    pub fn conformity(&self) -> f64 {
        self.conforming as f64 / self.segments.max(1) as f64
    }

    pub fn unexplained(&self) -> usize {
        self.segments - self.conforming - self.flagged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub classes: Vec<ClassSummary>,
    pub rows: Vec<SegmentRow>,
    /// Islands with at least two collisions whose advances were measured.
    pub advance_islands: usize,
    /// Largest spread of measured advances within one island.
    pub advance_spread: f64,
    /// Segments whose advance replays changed the collision sequence.
    pub advance_skipped: usize,
}

impl SuiteReport {
    pub fn passes(&self, min_conformity: f64, advance_tol: f64) -> bool {
        self.classes.iter().all(|c| {
            c.segments > 0 && c.fd_segments > 0 && c.conformity() >= min_conformity && c.unexplained() == 0 && c.fd_failures == 0
        }) && self.advance_spread < advance_tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub segments_per_class: usize,
    /// Segments per class also checked by finite differences.
    pub fd_per_class: usize,
    /// Step of the endpoint-deviation oracle.
    pub delta: f64,
    /// Step of the advance measurements, which replay in 1024-bit fixed point.
    pub advance_delta: f64,
    /// Length of each sampled trajectory.
    pub trajectory_events: usize,
    /// Windows taken per class from one trajectory.
    pub windows_per_trajectory: usize,
    pub rank_tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            segments_per_class: 1000,
            fd_per_class: 200,
            delta: 2e-5,
            advance_delta: 1e-15,
            trajectory_events: 400,
            windows_per_trajectory: 2,
            rank_tol: RANK_TOL,
        }
    }
}

/// Null vectors move the end by at most this many `delta^2`; in practice
/// they move it only by amplified rounding.
const FD_NULL_FACTOR: f64 = 1.0;
/// Random vectors move the end by at least this fraction of `delta`.
const FD_RANDOM_FACTOR: f64 = 1e-3;

struct FiniteDifferences {
    /// Largest null-vector endpoint deviation over `delta^2`.
    null_max: f64,
    /// Random-vector endpoint deviation over `delta`.
    random: f64,
    random_order: f64,
}

impl FiniteDifferences {
    fn passes(&self) -> bool {
        self.null_max <= FD_NULL_FACTOR && self.random >= FD_RANDOM_FACTOR
    }
}

/// Endpoint deviation at `delta` and the observed order from `delta / 2`.
fn deviation_order(table: &Table<f64>, seg: &Segment, w: [V2; 2], delta: f64) -> Result<(f64, f64), SufficiencyError> {
    let d1 = endpoint_velocity_deviation(table, seg, w, delta)?;
    let d2 = endpoint_velocity_deviation(table, seg, w, delta / 2.0)?;
    let order = (d1 / d2.max(f64::MIN_POSITIVE)).log2();
    Ok((d1, order))
}

fn finite_difference_checks<R: rand::Rng + ?Sized>(
    table: &Table<f64>,
    seg: &Segment,
    cfg: &SuiteConfig,
    rng: &mut R,
) -> Result<FiniteDifferences, SufficiencyError> {
    use rand_distr::{Distribution, UnitCircle};
    let delta = cfg.delta;
    let (short, sys) = neutral_system_of(&seg.long)?;
    let vel = island_velocities(&seg.long, &short);
    let mut out = FiniteDifferences {
        null_max: 0.0,
        random: 0.0,
        random_order: 0.0,
    };
    for x in &sys.null_space(cfg.rank_tol) {
        let w = initial_perturbation(x, &vel);
        let dev = endpoint_velocity_deviation(table, seg, w, delta)?;
        out.null_max = out.null_max.max(dev / (delta * delta));
    }
    let r: [f64; 2] = UnitCircle.sample(rng);
    let q: [f64; 2] = UnitCircle.sample(rng);
    let w = [V2::new(r[0], r[1]), V2::new(q[0], q[1])];
    let (dev, order) = deviation_order(table, seg, w, delta)?;
    out.random = dev / delta;
    out.random_order = order;
    Ok(out)
}

type W = Fixed1024;

/// `A x` for the system of `short` with island entry velocities `entries`,
/// evaluated in wide precision and rounded to f64.
fn wide_residual(short: &ShortSeq, entries: &[[Vector2<W>; 2]], x: &[W]) -> DVector<f64> {
    let mut r = DVector::zeros(4 * (short.islands.len() - 1));
    for (i, j) in short.junctions.iter().enumerate() {
        let s = short.islands[i].s;
        for (ball, g) in [j.pair.g1, j.pair.g2].into_iter().enumerate() {
            let a = (g * s).matrix::<W>();
            let v = entries[i + 1][ball];
            for k in 0..2 {
                let vk = if k == 0 { v.x } else { v.y };
                let row = a[k][0] * x[3 * i] + a[k][1] * x[3 * i + 1] - x[3 * (i + 1) + k]
                    + vk * (x[3 * i + 2] - x[3 * (i + 1) + 2]);
                r[4 * i + 2 * ball + k] = row.as_f64();
            }
        }
    }
    r
}

/// Newton steps `x -= A^+ (A x)` with the residual in wide precision and the
/// solve in f64; each step gains about as many digits as f64 carries.
fn refine_null_vector(sys: &NeutralSystem, short: &ShortSeq, entries: &[[Vector2<W>; 2]], x: &DVector<f64>) -> Vec<W> {
    let svd = sys.matrix.clone().svd(true, true);
    let mut xw: Vec<W> = x.iter().map(|&c| W::lit(c)).collect();
    for _ in 0..3 {
        let r = wide_residual(short, entries, &xw);
        let Ok(c) = svd.solve(&r, 1e-12) else { break };
        for (xi, ci) in xw.iter_mut().zip(c.iter()) {
            *xi = *xi - W::lit(*ci);
        }
    }
    xw
}

/// Islands with at least two collisions and the largest within-island
/// spread of the advances along every null vector. Everything runs on the
/// segment recomputed in `wide`: dispersing collisions amplify a rounding
/// error in the perturbation by orders of magnitude per island.
fn advance_checks(wide: &Table<W>, seg: &Segment, cfg: &SuiteConfig) -> Result<(usize, f64), SufficiencyError> {
    let start = wide_state(&seg.start);
    let zero = [Vector2::zero(); 2];
    let events = replay(wide, &start, &kinds(&seg.events), zero, W::lit(0.0))?;
    let long = long_sequence(wide.polygon().angle_lcm(), &start, &events)?;
    let short = compress_to_short(&long);
    let cast = |v: [Vector2<W>; 2]| v.map(|u| u.cast::<f64>());
    let entries: Vec<[Vector2<W>; 2]> = short.islands.iter().map(|i| long.collisions[i.collisions.start].v_before).collect();
    let vel: Vec<IslandVelocities> = short
        .islands
        .iter()
        .map(|i| IslandVelocities {
            entry: cast(long.collisions[i.collisions.start].v_before),
            exit: cast(long.collisions[i.collisions.end - 1].v_after),
        })
        .collect();
    let sys = build_neutral_system(&short, &vel)?;
    let (mut islands, mut spread) = (0, 0.0_f64);
    for x in &sys.null_space(cfg.rank_tol) {
        let x = refine_null_vector(&sys, &short, &entries, x);
        let n = Vector2::new(x[0], x[1]);
        let w = [n + entries[0][0] * x[2], n + entries[0][1] * x[2]];
        for isl in short.islands.iter().filter(|i| i.count() >= 2) {
            let mut alphas = Vec::with_capacity(isl.count());
            for c in isl.collisions.clone() {
                let pos = long.collisions[c].event_index - events[0].index;
                let prefix = kinds(&events[..=pos]);
                alphas.push(advance_in(wide, &start, &prefix, w, W::lit(cfg.advance_delta))?.alpha);
            }
            let (lo, hi) = alphas
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
            islands += 1;
            spread = spread.max(hi - lo);
        }
    }
    Ok((islands, spread))
}

/// Sufficiency suite: samples trajectories from `seed` until every class has
/// `segments_per_class` windows, classifies each, and checks the first
/// `fd_per_class` per class against finite differences and measured advances.
pub fn sufficiency_suite(table: &Table<f64>, seed: u64, cfg: &SuiteConfig) -> Result<SuiteReport, SufficiencyError> {
    use rand::SeedableRng;
    let n = table.polygon().angle_lcm();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut segments: Vec<Vec<Segment>> = vec![Vec::new(); SegmentClass::ALL.len()];
    let mut trajectories = 0;
    while segments.iter().any(|s| s.len() < cfg.segments_per_class) {
        trajectories += 1;
        if trajectories > 1000 * cfg.segments_per_class.max(1) {
            break;
        }
        let s0 = crate::dynamics::sample_state(table, &mut rng)?;
        let traj = simulate(table, s0, Budget::events(cfg.trajectory_events))?;
        let Ok(long) = long_sequence(n, &s0, &traj.events) else { continue };
        let Some(first) = traj.events.first().map(|e| e.index) else { continue };
        for (k, class) in SegmentClass::ALL.into_iter().enumerate() {
            let room = cfg.segments_per_class - segments[k].len().min(cfg.segments_per_class);
            for range in matching_windows(&long, class).into_iter().take(cfg.windows_per_trajectory.min(room)) {
                let (a, b) = window_events(&long, first, &range);
                segments[k].push(extract_segment(n, &s0, &traj.events, a, b)?);
            }
        }
    }

    let mut rows = Vec::new();
    let mut classes = Vec::new();
    let (mut advance_islands, mut advance_spread, mut advance_skipped) = (0, 0.0_f64, 0);
    let wide = table.with_scalar::<Fixed1024>();
    for (class, segs) in SegmentClass::ALL.into_iter().zip(&segments) {
        let mut summary = ClassSummary {
            class,
            expected_nullity: class.expected_nullity(),
            segments: segs.len(),
            conforming: 0,
            flagged: 0,
            fd_null_max: 0.0,
            fd_random_min: f64::INFINITY,
            fd_random_order: 0.0,
            fd_segments: 0,
            fd_failures: 0,
            fd_skipped: 0,
        };
        for (i, seg) in segs.iter().enumerate() {
            let row = match analyze_window_with(rows.len(), &seg.long, cfg.rank_tol) {
                Ok(row) => row,
                Err(SufficiencyError::IllConditioned { nullity, gap_ratio }) => SegmentRow {
                    segment_id: rows.len(),
                    n_islands: compress_to_short(&seg.long).islands.len(),
                    rich_case: 0,
                    nullity,
                    gap_ratio,
                    verdict: Sufficiency::Degenerate { gap_ratio },
                    degeneracy_margin: 0.0,
                },
                Err(e) => return Err(e),
            };
            if row.nullity == class.expected_nullity() && !matches!(row.verdict, Sufficiency::Degenerate { .. }) {
                summary.conforming += 1;
            } else if row.flagged() {
                summary.flagged += 1;
            }
            rows.push(row);
            if i >= cfg.fd_per_class {
                continue;
            }
            match advance_checks(&wide, seg, cfg) {
                Ok((n, spread)) => {
                    advance_islands += n;
                    advance_spread = advance_spread.max(spread);
                }
                Err(SufficiencyError::SequenceChanged(_)) => advance_skipped += 1,
                Err(e) => return Err(e),
            }
            match finite_difference_checks(table, seg, cfg, &mut rng) {
                Ok(fd) => {
                    summary.fd_segments += 1;
                    summary.fd_null_max = summary.fd_null_max.max(fd.null_max);
                    summary.fd_random_min = summary.fd_random_min.min(fd.random);
                    summary.fd_random_order = summary.fd_random_order.max(fd.random_order);
                    summary.fd_failures += usize::from(!fd.passes());
                }
                Err(SufficiencyError::SequenceChanged(_)) => summary.fd_skipped += 1,
                Err(e) => return Err(e),
            }
        }
        classes.push(summary);
    }
    Ok(SuiteReport {
        classes,
        rows,
        advance_islands,
        advance_spread,
        advance_skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sample_state;
    use crate::polygon::PolygonId;
    use crate::symbolic::Junction;
    use crate::tables::make_table;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> V2 {
        V2::from_angle(rng.random_range(0.0..std::f64::consts::TAU))
    }

    /// Generic synthetic velocities consistent with the junctions.
    fn synthetic(short: &ShortSeq, rng: &mut ChaCha8Rng) -> Vec<IslandVelocities> {
        (0..short.islands.len())
            .map(|_| {
                let (a, b) = (random_unit(rng), random_unit(rng) * 0.7);
                IslandVelocities {
                    entry: [a, b],
                    exit: [random_unit(rng), random_unit(rng)],
                }
            })
            .collect()
    }

    fn el(n: u8, s: &str) -> GroupElement {
        GroupElement::parse(n, s).unwrap()
    }

    #[test]
    fn single_island_has_three_free_directions() {
        let short = ShortSeq::parse(3, "b").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sys = build_neutral_system(&short, &synthetic(&short, &mut rng)).unwrap();
        assert_eq!(sys.matrix.nrows(), 0);
        assert_eq!(neutral_dimension(&sys, RANK_TOL).unwrap().nullity, 3);
        assert_eq!(is_sufficient(&sys), Err(SufficiencyError::TooFewIslands(1)));
        assert!(matches!(
            build_neutral_system(&short, &[]),
            Err(SufficiencyError::MissingVelocities { expected: 1, got: 0 })
        ));
    }

    #[test]
    fn all_simple_junctions_are_one_island() {
        let long = ShortSeq::parse(4, "b [R1,R1] b [r1,r1] b").unwrap();
        let short = long.compress();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sys = build_neutral_system(&short, &synthetic(&short, &mut rng)).unwrap();
        assert_eq!(sys.dimension(RANK_TOL).nullity, 3);
    }

    #[test]
    fn reflection_pair_has_equal_advances_and_axis_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2u8, 3, 4, 6] {
            for k in 0..n {
                // g1 arbitrary, g2 = R g1 with R a reflection
                let g1 = GroupElement::from_index(n, rng.random_range(0..2 * n as usize));
                let r = GroupElement::reflection(n, k as i64);
                let short = ShortSeq::parse(n, &format!("b {} b", Junction::new(g1, r * g1))).unwrap();
                let vel = synthetic(&short, &mut rng);
                let sys = build_neutral_system(&short, &vel).unwrap();
                assert_eq!(is_sufficient(&sys).unwrap(), Sufficiency::NotSufficient { dim: 2 });
                let axis = r.axis().unwrap().direction::<f64>();
                for x in sys.null_space(RANK_TOL) {
                    assert!((x[2] - x[5]).abs() < 1e-10, "{x}");
                    let n2 = V2::new(x[3], x[4]);
                    assert!(n2.cross(axis).abs() < 1e-10, "{n2:?} vs axis {axis:?}");
                }
            }
        }
    }

    #[test]
    fn rotation_pair_with_equal_advances_is_sufficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [2u8, 3, 4, 6] {
            for k in 1..n {
                let o = GroupElement::rotation(n, k as i64);
                let short = ShortSeq::parse(n, &format!("b {} b", Junction::new(el(n, "e"), o))).unwrap();
                let sys = build_neutral_system(&short, &synthetic(&short, &mut rng)).unwrap();
                assert_eq!(is_sufficient(&sys).unwrap(), Sufficiency::NotSufficient { dim: 2 });
                let sys = sys.with_equal_advances(0, 1);
                assert_eq!(is_sufficient(&sys).unwrap(), Sufficiency::Sufficient);
            }
        }
    }

    #[test]
    fn rich_windows_are_sufficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cases = [
            (2u8, "b [e,R0] b [R1,e] b"),
            (3, "b [e,R0] b [r1,e] b"),
            (3, "b [e,R0] (b2,s=R1) [R0,e] b"),
            (6, "b [r1,R2] (b3,s=r2) [R4,r5] b"),
        ];
        for (n, text) in cases {
            let short = ShortSeq::parse(n, text).unwrap();
            assert!(matches!(is_rich(&short), Ok(Richness::Yes { .. })), "{text}");
            let sys = build_neutral_system(&short, &synthetic(&short, &mut rng)).unwrap();
            assert_eq!(is_sufficient(&sys).unwrap(), Sufficiency::Sufficient, "{text}");
        }
        // the reflection-return pattern keeps a translation along the axis
        let short = ShortSeq::parse(2, "b [e,R0] b [R0,e] b").unwrap();
        let sys = build_neutral_system(&short, &synthetic(&short, &mut rng)).unwrap();
        assert_eq!(is_sufficient(&sys).unwrap(), Sufficiency::NotSufficient { dim: 2 });
    }

    #[test]
    fn flow_vector_is_always_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let n = [2u8, 3, 4, 6][rng.random_range(0..4)];
            let k = rng.random_range(1..6);
            let mut text = String::from("b");
            for _ in 0..k {
                let a = GroupElement::from_index(n, rng.random_range(0..2 * n as usize));
                let b = GroupElement::from_index(n, rng.random_range(0..2 * n as usize));
                text += &format!(" {} b", Junction::new(a, b));
            }
            let short = ShortSeq::parse(n, &text).unwrap().compress();
            let vel = synthetic(&short, &mut rng);
            let sys = build_neutral_system(&short, &vel).unwrap();
            assert!(sys.residual(&flow_vector(short.islands.len())) < 1e-12);
            let d = sys.dimension(RANK_TOL);
            assert!((1..=3).contains(&d.nullity), "{text}: {d:?}");
        }
    }

    #[test]
    fn degeneracy_check_examples() {
        let z = V2::zero();
        assert_eq!(degeneracy_check(V2::new(1.0, 0.0), z, V2::new(1.0, 0.0)), Ok(true));
        assert_eq!(degeneracy_check(V2::new(1.0, 0.0), z, V2::new(0.0, 1.0)), Ok(false));
        assert_eq!(degeneracy_check(V2::new(1.0, 1e-12), z, V2::new(1.0, 0.0)), Ok(true));
        assert!(matches!(
            degeneracy_check(V2::new(0.3, 0.4), V2::new(0.3, 0.4), V2::new(1.0, 0.0)),
            Err(SufficiencyError::DegenerateRelativeVelocity(_))
        ));
    }

    fn sampled_windows(p: PolygonId, class: SegmentClass, want: usize, seed: u64) -> (Table<f64>, Vec<Segment>) {
        let t = make_table(p, 0.08).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        while out.len() < want {
            let s0 = sample_state(&t, &mut rng).unwrap();
            let traj = simulate(&t, s0, Budget::events(400)).unwrap();
            let Ok(long) = long_sequence(p.angle_lcm(), &s0, &traj.events) else { continue };
            let first = traj.events[0].index;
            for range in matching_windows(&long, class).into_iter().take(2) {
                let (a, b) = window_events(&long, first, &range);
                out.push(extract_segment(p.angle_lcm(), &s0, &traj.events, a, b).unwrap());
            }
        }
        out.truncate(want);
        (t, out)
    }

    #[test]
    fn finite_differences_confirm_null_vectors() {
        let delta = 1e-6;
        for (i, p) in PolygonId::ALL.into_iter().enumerate() {
            for class in SegmentClass::ALL {
                let (t, segs) = sampled_windows(p, class, 3, 100 + i as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(7);
                for seg in segs {
                    let (short, sys) = neutral_system_of(&seg.long).unwrap();
                    let vel = island_velocities(&seg.long, &short);
                    let d = sys.dimension(RANK_TOL);
                    assert_eq!(d.nullity, class.expected_nullity(), "{p} {class:?} {short}");
                    for x in sys.null_space(RANK_TOL) {
                        let w = initial_perturbation(&x, &vel);
                        let dev = endpoint_velocity_deviation(&t, &seg, w, delta).unwrap();
                        assert!(dev < 10.0 * delta * delta, "{p} {class:?}: null vector moved the end by {dev:e}");
                    }
                    let w = [random_unit(&mut rng), random_unit(&mut rng)];
                    let dev = endpoint_velocity_deviation(&t, &seg, w, delta).unwrap();
                    assert!(dev > 1e-3 * delta, "{p} {class:?}: random vector moved the end by only {dev:e}");
                }
            }
        }
    }

    #[test]
    fn measured_advances_match_the_solution() {
        let delta = 1e-6;
        let (t, segs) = sampled_windows(PolygonId::EqTriangle, SegmentClass::ReflectionPair, 5, 9);
        for seg in segs {
            let (short, sys) = neutral_system_of(&seg.long).unwrap();
            let vel = island_velocities(&seg.long, &short);
            // flow direction: unit advance everywhere
            let flow = [seg.start.v1, seg.start.v2];
            let last = seg.events.len() - 1;
            let m = measure_advance(&t, &seg.start, &seg.events, last, flow, delta).unwrap();
            assert!((m.alpha - 1.0).abs() < 1e-7, "{m:?}");
            for x in sys.null_space(RANK_TOL) {
                let w = initial_perturbation(&x, &vel);
                for (island, isl) in short.islands.iter().enumerate() {
                    for c in isl.collisions.clone() {
                        let pos = seg.long.collisions[c].event_index - seg.events[0].index;
                        let m = measure_advance(&t, &seg.start, &seg.events, pos, w, delta).unwrap();
                        assert!((m.alpha - x[3 * island + 2]).abs() < 1e-6, "{m:?} vs {}", x[3 * island + 2]);
                    }
                }
            }
        }
    }

    #[test]
    fn head_on_translation_along_the_contact_line_has_no_advance() {
        let t = make_table(PolygonId::Square, 0.1).unwrap();
        let r = t.contact_distance();
        // centers on a horizontal line, approaching head on
        let s0 = PhaseState::new(V2::new(0.3, 0.4), V2::new(0.3 + r + 0.1, 0.4), V2::new(0.5f64.sqrt(), 0.0), V2::new(-(0.5f64.sqrt()), 0.0));
        let traj = simulate(&t, s0, Budget::events(1)).unwrap();
        assert_eq!(traj.events[0].kind, EventKind::BallBall);
        let up = V2::new(0.0, 1.0);
        let m = measure_advance(&t, &s0, &traj.events, 0, [up, up], 1e-6).unwrap();
        assert!(m.alpha.abs() < 1e-9, "{m:?}");
    }

    #[test]
    fn csv_rows() {
        let (_, segs) = sampled_windows(PolygonId::Square, SegmentClass::RichReflection, 2, 11);
        let rows: Vec<SegmentRow> = segs.iter().enumerate().map(|(i, s)| analyze_window(i, &s.long).unwrap()).collect();
        let mut buf = Vec::new();
        write_sufficiency_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(SUFFICIENCY_CSV_HEADER));
        assert!(text.lines().skip(1).all(|l| l.ends_with(",1,1,1.0e10,sufficient") || l.contains(",1,1,") && l.ends_with(",sufficient")));
    }

    #[test]
    fn small_suite_conforms() {
        let t = make_table(PolygonId::RightIsoceles, 0.08).unwrap();
        let cfg = SuiteConfig {
            segments_per_class: 40,
            fd_per_class: 10,
            ..Default::default()
        };
        let r = sufficiency_suite(&t, 11, &cfg).unwrap();
        assert_eq!(r.classes.len(), 4);
        assert_eq!(r.rows.len(), 160);
        for c in &r.classes {
            assert_eq!(c.segments, 40);
            assert_eq!(c.conforming, 40, "{c:?}");
            assert_eq!(c.fd_failures, 0, "{c:?}");
        }
        assert!(r.passes(0.99, 1e-8), "{r:?}");
    }

    #[test]
    fn refinement_reaches_below_f64_rounding() {
        let (t, segs) = sampled_windows(PolygonId::Square, SegmentClass::RichRotation, 5, 3);
        let wide = t.with_scalar::<W>();
        for seg in &segs {
            let start = wide_state(&seg.start);
            let events = replay(&wide, &start, &kinds(&seg.events), [Vector2::zero(); 2], W::lit(0.0)).unwrap();
            let long = long_sequence(t.polygon().angle_lcm(), &start, &events).unwrap();
            let short = compress_to_short(&long);
            let entries: Vec<_> = short.islands.iter().map(|i| long.collisions[i.collisions.start].v_before).collect();
            let vel: Vec<_> = entries
                .iter()
                .map(|e| IslandVelocities {
                    entry: e.map(|u| u.cast()),
                    exit: e.map(|u| u.cast()),
                })
                .collect();
            let sys = build_neutral_system(&short, &vel).unwrap();
            for x in sys.null_space(RANK_TOL) {
                let raw: Vec<W> = x.iter().map(|&c| W::lit(c)).collect();
                let before = wide_residual(&short, &entries, &raw).norm();
                let after = wide_residual(&short, &entries, &refine_null_vector(&sys, &short, &entries, &x)).norm();
                assert!(after < 1e-30 && after < before, "{before:e} -> {after:e}");
            }
        }
    }

    #[test]
    fn square_island_advances_agree() {
        let t = make_table(PolygonId::Square, 0.1).unwrap();
        let cfg = SuiteConfig {
            segments_per_class: 30,
            fd_per_class: 10,
            ..Default::default()
        };
        let r = sufficiency_suite(&t, 5, &cfg).unwrap();
        assert!(r.advance_islands > 0);
        assert!(r.advance_spread < 1e-12, "{}", r.advance_spread);
    }
}
