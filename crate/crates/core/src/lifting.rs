//! Lift of the two-ball system to the cylindric billiard on `T^2 x T^2`.
//!
//! Each ball carries an affine unfolding transform, composed with the affine
//! side reflection at every wall hit, so its unfolded path is a straight line
//! and its label (the linear part) satisfies `w = g v`. A ball-ball contact
//! with labels `(g1, g2)` is a contact with the cylinder
//! `C_g = {|z1 - g z2| <= R}` for `g = g1 g2^-1`.

use std::io::{self, Write};

use nalgebra::{DMatrix, Matrix4, SymmetricEigen, Vector4};
use serde::Serialize;

use crate::dynamics::{fmt_f, EventKind, EventRecord, PhaseState};
use crate::group::{ElementKind, Group, GroupElement};
use crate::scalar::Real;
use crate::symbolic::{compress_to_short, LongSeq, Poorness};
use crate::tables::{Affine, Table, TorusPoint, UnfoldingAtlas};
use crate::vec2::Vector2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LiftError {
    #[error("no cylinder within tolerance of the contact distance (best deviation {deviation:e}); the atlas translations are inconsistent")]
    NoCylinderFound { deviation: f64 },
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error(transparent)]
    Symbolic(#[from] crate::symbolic::SymbolicError),
    #[error(transparent)]
    Table(#[from] crate::tables::TableError),
}

/// Point of the lifted phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedState<T> {
    pub z: [TorusPoint<T>; 2],
    pub w: [Vector2<T>; 2],
    pub labels: [GroupElement; 2],
    /// Unfolding maps of the relative frame; linear parts equal `labels`.
    pub transforms: [Affine<T>; 2],
}

impl<T: Real> LiftedState<T> {
    /// Lift of `s` under the given unfolding maps.
    pub fn from_downstairs(atlas: &UnfoldingAtlas<T>, s: &PhaseState<T>, transforms: [Affine<T>; 2]) -> Self {
        let o = atlas.origin();
        let q = [s.q1, s.q2];
        let v = [s.v1, s.v2];
        LiftedState {
            z: [0, 1].map(|k| atlas.project(transforms[k].apply(q[k] - o))),
            w: [0, 1].map(|k| transforms[k].linear.apply(v[k])),
            labels: [transforms[0].linear, transforms[1].linear],
            transforms,
        }
    }

    /// `g1 g2^-1`: the cylinder met at a contact in this chart.
    pub fn cylinder_label(&self) -> GroupElement {
        self.labels[0] * self.labels[1].inverse()
    }

    /// Relative-frame Cartesian positions of the two torus points.
    pub fn cartesian(&self, atlas: &UnfoldingAtlas<T>) -> [Vector2<T>; 2] {
        self.z.map(|z| atlas.to_cartesian(z.frac))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedEvent<T> {
    pub index: usize,
    pub time: T,
    pub kind: EventKind,
    pub state: LiftedState<T>,
    /// Distance (modulo the lattice) between the lifted positions and the
    /// straight-line continuation from the previous event.
    pub straightness: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedTrajectory<T> {
    pub initial: LiftedState<T>,
    pub initial_time: T,
    pub events: Vec<LiftedEvent<T>>,
    pub max_straightness_error: T,
    /// Index of a singular event at which lifting stopped.
    pub stopped_at: Option<usize>,
}

impl<T: Real> LiftedTrajectory<T> {
    pub fn at_event(&self, index: usize) -> Option<&LiftedEvent<T>> {
        let first = self.events.first()?.index;
        self.events.get(index.checked_sub(first)?)
    }
}

/// Lifts a trajectory starting in the cells `initial_labels`. A singular event
/// ends the lift; `stopped_at` records it.
pub fn lift_trajectory<T: Real>(
    table: &Table<T>,
    atlas: &UnfoldingAtlas<T>,
    initial: &PhaseState<T>,
    events: &[EventRecord<T>],
    initial_labels: [GroupElement; 2],
) -> LiftedTrajectory<T> {
    let mut transforms = initial_labels.map(Affine::linear);
    let start = LiftedState::from_downstairs(atlas, initial, transforms);
    let mut prev = start;
    let mut prev_time = initial.t;
    let mut out = Vec::with_capacity(events.len());
    let mut worst = T::zero();
    let mut stopped_at = None;
    for e in events {
        match e.kind {
            EventKind::Singular(_) => {
                stopped_at = Some(e.index);
                break;
            }
            EventKind::WallHit { ball, side, .. } => {
                let k = ball.index();
                let next = transforms[k].then_after(&table.side_affine(side));
                // keep the translation short; it is a lattice vector up to rounding
                transforms[k] = Affine {
                    linear: next.linear,
                    translation: atlas.reduce_vector(next.translation),
                };
            }
            EventKind::BallBall => {}
        }
        let state = LiftedState::from_downstairs(atlas, &e.state, transforms);
        let dt = e.time - prev_time;
        let mut straightness = T::zero();
        for k in 0..2 {
            let predicted = atlas.to_cartesian(prev.z[k].frac) + prev.w[k] * dt;
            let d = atlas.reduce_vector(atlas.to_cartesian(state.z[k].frac) - predicted).norm();
            straightness = straightness.max(d);
        }
        worst = worst.max(straightness);
        out.push(LiftedEvent {
            index: e.index,
            time: e.time,
            kind: e.kind,
            state,
            straightness,
        });
        prev = state;
        prev_time = e.time;
    }
    LiftedTrajectory {
        initial: start,
        initial_time: initial.t,
        events: out,
        max_straightness_error: worst,
        stopped_at,
    }
}

/// Result of the cylinder search at a contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderHit {
    pub g: GroupElement,
    /// `| |z1 - g z2 - l| - R |` at the minimizer.
    pub deviation: f64,
    /// Same quantity for the best other element.
    pub runner_up: f64,
}

/// The `g` (over all of `G` and the nearest lattice translates) for which
/// `|z1 - g z2 - l|` is closest to the contact distance. Does not consult
/// the labels.
pub fn cylinder_at_collision<T: Real>(
    atlas: &UnfoldingAtlas<T>,
    group: &Group,
    contact: T,
    state: &LiftedState<T>,
) -> Result<CylinderHit, LiftError> {
    let [x1, x2] = state.cartesian(atlas);
    let mut ranked: Vec<(f64, GroupElement)> = group
        .elements()
        .iter()
        .map(|&g| {
            let d = atlas.reduce_vector(x1 - g.apply(x2)).norm();
            ((d - contact).abs().as_f64(), g)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tol = 1e-8f64.max(1e4 * T::epsilon().as_f64());
    let (deviation, g) = ranked[0];
    if deviation > tol {
        return Err(LiftError::NoCylinderFound { deviation });
    }
    Ok(CylinderHit {
        g,
        deviation,
        runner_up: ranked.get(1).map_or(f64::INFINITY, |r| r.0),
    })
}

/// Cylinder of the next contact: with labels `(g1, g2)` at the current contact
/// and junction `(k1, k2)`, the labels become `(g1 k1^-1, g2 k2^-1)`.
pub fn predict_next_cylinder(labels: [GroupElement; 2], junction: &crate::symbolic::Junction) -> GroupElement {
    labels[0] * junction.g1.inverse() * junction.g2 * labels[1].inverse()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SemiconjugacyReport {
    pub samples: usize,
    pub max_position: f64,
    pub max_velocity: f64,
    /// Midpoints whose folded cell differs from the carried label.
    pub label_mismatches: usize,
}

/// Folds the lifted states at every event (positions) and at the midpoint of
/// every free flight (positions, labels, velocities) and compares against
/// the downstairs trajectory. Event states sit on cell boundaries, where the
/// folded label is ambiguous, so their velocities are not compared.
pub fn verify_semiconjugacy<T: Real>(
    atlas: &UnfoldingAtlas<T>,
    initial: &PhaseState<T>,
    events: &[EventRecord<T>],
    lifted: &LiftedTrajectory<T>,
) -> SemiconjugacyReport {
    let mut rep = SemiconjugacyReport::default();
    let mut down_prev = *initial;
    let mut up_prev = lifted.initial;
    for (e, l) in events.iter().zip(&lifted.events) {
        let dt = e.time - down_prev.t;
        let half = dt * T::half();
        let mid = down_prev.flown(half);
        let q = [mid.q1, mid.q2];
        let v = [mid.v1, mid.v2];
        for k in 0..2 {
            let x = atlas.to_cartesian(up_prev.z[k].frac) + up_prev.w[k] * half;
            let (g, qf) = atlas.fold(atlas.project(x));
            rep.max_position = rep.max_position.max((qf - q[k]).norm().as_f64());
            if g != up_prev.labels[k] {
                rep.label_mismatches += 1;
            }
            let vf = g.inverse().apply(up_prev.w[k]);
            rep.max_velocity = rep.max_velocity.max((vf - v[k]).norm().as_f64());
            let (_, qe) = atlas.fold(l.state.z[k]);
            let qd = if k == 0 { e.state.q1 } else { e.state.q2 };
            rep.max_position = rep.max_position.max((qe - qd).norm().as_f64());
        }
        rep.samples += 1;
        down_prev = e.state;
        up_prev = l.state;
    }
    rep
}

/// Agreement of the lifted contacts with the cylinder bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CylinderReport {
    pub collisions: usize,
    pub search_failures: usize,
    /// Search result differs from `g1 g2^-1`.
    pub label_mismatches: usize,
    pub max_contact_deviation: f64,
    /// Smallest gap between the winning and the runner-up deviation.
    pub min_search_margin: f64,
    pub predictions: usize,
    pub prediction_mismatches: usize,
    pub island_checks: usize,
    pub island_mismatches: usize,
    pub sandwich_checks: usize,
    pub sandwich_mismatches: usize,
}

impl CylinderReport {
    pub fn all_hold(&self) -> bool {
        self.search_failures == 0
            && self.label_mismatches == 0
            && self.prediction_mismatches == 0
            && self.island_mismatches == 0
            && self.sandwich_mismatches == 0
    }

    pub fn merge(&mut self, o: &CylinderReport) {
        self.collisions += o.collisions;
        self.search_failures += o.search_failures;
        self.label_mismatches += o.label_mismatches;
        self.max_contact_deviation = self.max_contact_deviation.max(o.max_contact_deviation);
        self.min_search_margin = self.min_search_margin.min(o.min_search_margin);
        self.predictions += o.predictions;
        self.prediction_mismatches += o.prediction_mismatches;
        self.island_checks += o.island_checks;
        self.island_mismatches += o.island_mismatches;
        self.sandwich_checks += o.sandwich_checks;
        self.sandwich_mismatches += o.sandwich_mismatches;
    }

    /// Fraction of junction predictions that matched, in `[0, 1]`.
    pub fn prediction_rate(&self) -> f64 {
        if self.predictions == 0 {
            1.0
        } else {
            1.0 - self.prediction_mismatches as f64 / self.predictions as f64
        }
    }
}

/// Cylinders met at the collisions of `long`, searched geometrically, plus the
/// consistency checks on them: search vs labels, junction prediction, island
/// constancy and reflection-return sandwiches.
pub fn check_cylinders<T: Real>(
    table: &Table<T>,
    atlas: &UnfoldingAtlas<T>,
    long: &LongSeq<T>,
    lifted: &LiftedTrajectory<T>,
) -> (Vec<Option<GroupElement>>, CylinderReport) {
    let group = table.group();
    let mut rep = CylinderReport {
        min_search_margin: f64::INFINITY,
        ..Default::default()
    };
    let mut found = Vec::with_capacity(long.collisions.len());
    let mut labels = Vec::with_capacity(long.collisions.len());
    for c in &long.collisions {
        let Some(ev) = lifted.at_event(c.event_index) else {
            found.push(None);
            labels.push(None);
            continue;
        };
        rep.collisions += 1;
        labels.push(Some(ev.state.labels));
        match cylinder_at_collision(atlas, group, table.contact_distance(), &ev.state) {
            Ok(hit) => {
                rep.max_contact_deviation = rep.max_contact_deviation.max(hit.deviation);
                rep.min_search_margin = rep.min_search_margin.min(hit.runner_up - hit.deviation);
                if hit.g != ev.state.cylinder_label() {
                    rep.label_mismatches += 1;
                }
                found.push(Some(hit.g));
            }
            Err(_) => {
                rep.search_failures += 1;
                found.push(None);
            }
        }
    }
    for (i, j) in long.junctions.iter().enumerate() {
        let (Some(l), Some(next)) = (labels[i], found[i + 1]) else { continue };
        rep.predictions += 1;
        if predict_next_cylinder(l, j) != next {
            rep.prediction_mismatches += 1;
        }
    }
    let short = compress_to_short(long);
    for island in &short.islands {
        let first = found[island.collisions.start];
        for c in island.collisions.clone().skip(1) {
            rep.island_checks += 1;
            if found[c] != first || first.is_none() {
                rep.island_mismatches += 1;
            }
        }
    }
    for i in 0..short.junctions.len().saturating_sub(1) {
        let (a, b) = (short.junctions[i].pair, short.junctions[i + 1].pair);
        let s = short.islands[i + 1].s;
        let sandwich = match (a.hat().axis(), b.bar().axis()) {
            (Some(e), Some(e2)) => e2 == crate::group::conjugate_axis(s, e),
            _ => false,
        };
        if sandwich {
            rep.sandwich_checks += 1;
            let before = found[short.islands[i].collisions.end - 1];
            let after = found[short.islands[i + 2].collisions.start];
            if before != after || before.is_none() {
                rep.sandwich_mismatches += 1;
            }
        }
    }
    (found, rep)
}

/// Cylinders of the collisions of `long` when its first collision is lifted
/// to `C_e`: labels at collision `i` become `a_k^-1 g_k(i)` where `a` are the
/// labels at the first collision.
pub fn cylinders_from_identity<T: Real>(long: &LongSeq<T>, lifted: &LiftedTrajectory<T>) -> Option<Vec<GroupElement>> {
    let a = lifted.at_event(long.collisions.first()?.event_index)?.state.labels;
    long.collisions
        .iter()
        .map(|c| {
            let l = lifted.at_event(c.event_index)?.state.labels;
            Some(a[0].inverse() * l[0] * (a[1].inverse() * l[1]).inverse())
        })
        .collect()
}

/// Whether the lift started at `C_e` stays in the cylinder family the
/// poorness class predicts: rotations for O-poor, exactly `{C_e, C_witness}`
/// for R-poor. `None` for the other classes.
pub fn poor_lift_holds(class: Poorness, cylinders: &[GroupElement]) -> Option<bool> {
    match class {
        Poorness::OPoor => Some(cylinders.iter().all(|g| g.is_rotation())),
        Poorness::RPoor { witness } => {
            let only_two = cylinders.iter().all(|g| g.is_identity() || *g == witness);
            let both = cylinders.iter().any(|g| g.is_identity()) && cylinders.contains(&witness);
            Some(only_two && both)
        }
        Poorness::Rich { .. } | Poorness::Mixed => None,
    }
}

pub const LIFTED_CSV_HEADER: &str =
    "event_index,time,cylinder_kind,cylinder_index,z1a,z1b,z2a,z2b,w1x,w1y,w2x,w2y,g1,g2";

/// One row per lifted event; the cylinder columns are filled at ball-ball
/// collisions only and use the label cylinder `g1 g2^-1`.
pub fn write_lifted_csv<T: Real, W: Write + ?Sized>(w: &mut W, lifted: &LiftedTrajectory<T>) -> io::Result<()> {
    writeln!(w, "{LIFTED_CSV_HEADER}")?;
    for e in &lifted.events {
        let s = &e.state;
        let (kind, index) = if e.kind == EventKind::BallBall {
            let g = s.cylinder_label();
            let kind = match g.kind() {
                ElementKind::Rotation => "rotation",
                ElementKind::Reflection => "reflection",
            };
            (kind, g.index().to_string())
        } else {
            ("none", String::new())
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.index,
            fmt_f(e.time),
            kind,
            index,
            fmt_f(s.z[0].frac.x),
            fmt_f(s.z[0].frac.y),
            fmt_f(s.z[1].frac.x),
            fmt_f(s.z[1].frac.y),
            fmt_f(s.w[0].x),
            fmt_f(s.w[0].y),
            fmt_f(s.w[1].x),
            fmt_f(s.w[1].y),
            s.labels[0],
            s.labels[1],
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cylinder subspaces in R^4 = R^2 x R^2

/// Subspace tolerance for ranks and orthogonality; all bases are exact up to
/// a few ulps.
const SUBSPACE_TOL: f64 = 1e-9;

/// The cylinder `C_g = {z : |z1 - g z2| <= R}` of the lifted billiard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub g: GroupElement,
    pub contact: f64,
}

fn stack(a: [f64; 2], b: [f64; 2]) -> Vector4<f64> {
    Vector4::new(a[0], a[1], b[0], b[1])
}

fn unit(i: usize) -> Vector2<f64> {
    if i == 0 {
        Vector2::new(1.0, 0.0)
    } else {
        Vector2::new(0.0, 1.0)
    }
}

impl Cylinder {
    pub fn new(g: GroupElement, contact: f64) -> Self {
        Cylinder { g, contact }
    }

    /// Orthonormal basis of the generator subspace `{(g u, u)}`, along which
    /// `z1 - g z2` is constant.
    pub fn generator_basis(&self) -> [Vector4<f64>; 2] {
        [0, 1].map(|i| {
            let u = unit(i);
            let gu = self.g.apply(u);
            stack([gu.x, gu.y], [u.x, u.y]) / std::f64::consts::SQRT_2
        })
    }

    /// Orthonormal basis of the base subspace `{(u, -g^-1 u)}`, the orthogonal
    /// complement of the generator subspace.
    pub fn base_basis(&self) -> [Vector4<f64>; 2] {
        let inv = self.g.inverse();
        [0, 1].map(|i| {
            let u = unit(i);
            let gu = inv.apply(u);
            stack([u.x, u.y], [-gu.x, -gu.y]) / std::f64::consts::SQRT_2
        })
    }

    /// `|z1 - g z2|` for Cartesian points of the plane (no lattice reduction).
    pub fn axis_distance(&self, z1: Vector2<f64>, z2: Vector2<f64>) -> f64 {
        (z1 - self.g.apply(z2)).norm()
    }

    /// Two independent vectors of `L x L` inside the generator subspace and
    /// two inside the base subspace, in lattice coordinates of each factor.
    pub fn lattice_vectors(&self, atlas: &UnfoldingAtlas<f64>) -> ([Vector4<f64>; 2], [Vector4<f64>; 2]) {
        let b = atlas.basis();
        let frac = |x: Vector2<f64>, y: Vector2<f64>| {
            let (fx, fy) = (atlas.to_frac(x), atlas.to_frac(y));
            Vector4::new(fx.x, fx.y, fy.x, fy.y)
        };
        let inv = self.g.inverse();
        (
            [0, 1].map(|i| frac(self.g.apply(b[i]), b[i])),
            [0, 1].map(|i| frac(b[i], -inv.apply(b[i]))),
        )
    }
}

/// Rank of the span of `vectors` (SVD, relative threshold).
pub fn span_rank(vectors: &[Vector4<f64>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(4, vectors.len(), |r, c| vectors[c][r]);
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > SUBSPACE_TOL * max.max(1.0)).count()
}

/// `dim(A ∩ B)` for subspaces given by bases.
pub fn intersection_dim(a: &[Vector4<f64>], b: &[Vector4<f64>]) -> usize {
    let both: Vec<Vector4<f64>> = a.iter().chain(b).copied().collect();
    span_rank(a) + span_rank(b) - span_rank(&both)
}

fn orthonormal_span(vectors: &[Vector4<f64>]) -> Vec<Vector4<f64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_fn(4, vectors.len(), |r, c| vectors[c][r]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested");
    let max = svd.singular_values.max().max(1.0);
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > SUBSPACE_TOL * max)
        .map(|(i, _)| Vector4::from_iterator(u.column(i).iter().copied()))
        .collect()
}

fn orthogonal_complement(basis: &[Vector4<f64>]) -> Vec<Vector4<f64>> {
    let mut p = Matrix4::<f64>::identity();
    for b in basis {
        p -= b * b.transpose();
    }
    let cols: Vec<Vector4<f64>> = (0..4).map(|i| p.column(i).into_owned()).collect();
    orthonormal_span(&cols)
}

/// Orthogonal splitting `R^4 = K1 ⊕ K2` (both nonzero) with every base
/// subspace inside `K1` or inside `K2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OnsResult {
    NoSplit,
    Split {
        k1: Vec<[f64; 4]>,
        k2: Vec<[f64; 4]>,
        /// Cylinders whose base lies in `K1`, then those in `K2`.
        partition: (Vec<GroupElement>, Vec<GroupElement>),
    },
}

impl OnsResult {
    pub fn is_split(&self) -> bool {
        matches!(self, OnsResult::Split { .. })
    }
}

/// Exhaustive search over subsets containing the first cylinder: `K1` is the
/// span of their base subspaces, `K2` its orthogonal complement.
pub fn ons_split(cylinders: &[Cylinder]) -> OnsResult {
    let n = cylinders.len();
    assert!(n > 0 && n < 24, "ons_split expects a small nonempty cylinder set");
    let bases: Vec<[Vector4<f64>; 2]> = cylinders.iter().map(Cylinder::base_basis).collect();
    for mask in 0u32..(1 << (n - 1)) {
        let in_first = |i: usize| i == 0 || mask & (1 << (i - 1)) != 0;
        let first: Vec<Vector4<f64>> = (0..n).filter(|&i| in_first(i)).flat_map(|i| bases[i]).collect();
        let k1 = orthonormal_span(&first);
        if k1.len() == 4 {
            continue;
        }
        let orthogonal = (0..n)
            .filter(|&i| !in_first(i))
            .flat_map(|i| bases[i])
            .all(|v| k1.iter().all(|k| k.dot(&v).abs() < SUBSPACE_TOL));
        if orthogonal {
            let k2 = orthogonal_complement(&k1);
            let arr = |v: &Vector4<f64>| [v[0], v[1], v[2], v[3]];
            return OnsResult::Split {
                k1: k1.iter().map(arr).collect(),
                k2: k2.iter().map(arr).collect(),
                partition: (
                    (0..n).filter(|&i| in_first(i)).map(|i| cylinders[i].g).collect(),
                    (0..n).filter(|&i| !in_first(i)).map(|i| cylinders[i].g).collect(),
                ),
            };
        }
    }
    OnsResult::NoSplit
}

fn projector(basis: &[Vector4<f64>]) -> Matrix4<f64> {
    basis.iter().map(|b| b * b.transpose()).sum()
}

/// Orthonormal frame of `R^4` in which both generator subspaces are spanned
/// by frame vectors, if one exists (iff the orthogonal projectors commute).
pub fn orthogonal_frame(a: &Cylinder, b: &Cylinder) -> Option<[Vector4<f64>; 4]> {
    let pa = projector(&a.generator_basis());
    let pb = projector(&b.generator_basis());
    if (pa * pb - pb * pa).norm() > SUBSPACE_TOL {
        return None;
    }
    // commuting projectors share an eigenbasis; weights 1 and 2 keep the four
    // joint eigenspaces apart
    let eig = SymmetricEigen::new(pa + pb * 2.0);
    Some([0, 1, 2, 3].map(|i| eig.eigenvectors.column(i).into_owned()))
}

/// Whether every vector of `basis` is in the span of a subset of `frame`.
pub fn spanned_by_frame(basis: &[Vector4<f64>], frame: &[Vector4<f64>; 4]) -> bool {
    let picked: Vec<Vector4<f64>> = frame
        .iter()
        .filter(|f| basis.iter().any(|b| b.dot(f).abs() > 1e-6))
        .copied()
        .collect();
    picked.len() == span_rank(basis)
        && basis.iter().all(|b| {
            let residual = b - picked.iter().map(|f| f * f.dot(b)).sum::<Vector4<f64>>();
            residual.norm() < 1e-9
        })
}

/// Subspace geometry of a polygon's rotation-cylinder family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub rotations: Vec<GroupElement>,
    pub pairs: usize,
    /// Pairs of distinct rotations whose generator subspaces meet nontrivially.
    pub generator_overlaps: usize,
    /// Same for base subspaces.
    pub base_overlaps: usize,
    pub ons: OnsResult,
    /// `dim(A_e ∩ A_rho)` for every reflection `rho`.
    pub reflection_intersections: Vec<(GroupElement, usize)>,
}

impl GeometryReport {
    pub fn transversal(&self) -> bool {
        self.generator_overlaps == 0 && self.base_overlaps == 0
    }
}

pub fn cylinder_geometry(group: &Group, contact: f64) -> GeometryReport {
    let rotations = group.rotation_subgroup();
    let cyl: Vec<Cylinder> = rotations.iter().map(|&g| Cylinder::new(g, contact)).collect();
    let (mut pairs, mut generator_overlaps, mut base_overlaps) = (0, 0, 0);
    for (i, a) in cyl.iter().enumerate() {
        for b in &cyl[i + 1..] {
            pairs += 1;
            generator_overlaps += usize::from(intersection_dim(&a.generator_basis(), &b.generator_basis()) != 0);
            base_overlaps += usize::from(intersection_dim(&a.base_basis(), &b.base_basis()) != 0);
        }
    }
    let ce = Cylinder::new(group.identity(), contact);
    let reflection_intersections = group
        .reflections()
        .into_iter()
        .map(|r| (r, intersection_dim(&ce.generator_basis(), &Cylinder::new(r, contact).generator_basis())))
        .collect();
    GeometryReport {
        ons: ons_split(&cyl),
        rotations,
        pairs,
        generator_overlaps,
        base_overlaps,
        reflection_intersections,
    }
}

/// Outcome of the lifting invariants on one sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftCheck {
    pub seed: u64,
    pub events: usize,
    /// Event index of a singular event that cut the run short.
    pub stopped_at: Option<usize>,
    pub max_straightness_error: f64,
    pub semiconjugacy: SemiconjugacyReport,
    pub cylinders: CylinderReport,
    /// Three-collision windows with an O-poor or R-poor pattern.
    pub poor_windows: usize,
    pub poor_failures: usize,
    #[serde(skip)]
    pub lifted: LiftedTrajectory<f64>,
}

impl LiftCheck {
    /// Every 100% invariant holds and the semi-conjugacy deviation is below `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.semiconjugacy.max_position < tol
            && self.semiconjugacy.max_velocity < tol
            && self.semiconjugacy.label_mismatches == 0
            && self.cylinders.all_hold()
            && self.poor_failures == 0
    }
}

/// Samples a Liouville initial state from `seed`, simulates `n_events`,
/// lifts from the identity cells and runs every lifting invariant.
pub fn lift_check(table: &Table<f64>, seed: u64, n_events: usize) -> Result<LiftCheck, LiftError> {
    use rand::SeedableRng;
    let atlas = crate::tables::build_atlas(table)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let s0 = crate::dynamics::sample_state(table, &mut rng)?;
    let traj = crate::dynamics::simulate(table, s0, crate::dynamics::Budget::events(n_events))?;
    let events: Vec<EventRecord<f64>> = traj
        .events
        .into_iter()
        .filter(|e| !matches!(e.kind, EventKind::Singular(_)))
        .collect();
    let id = table.group().identity();
    let lifted = lift_trajectory(table, &atlas, &s0, &events, [id, id]);
    let semiconjugacy = verify_semiconjugacy(&atlas, &s0, &events, &lifted);
    let long = crate::symbolic::long_sequence(table.polygon().angle_lcm(), &s0, &events)?;
    let (_, cylinders) = check_cylinders(table, &atlas, &long, &lifted);
    let (mut poor_windows, mut poor_failures) = (0, 0);
    for w in 0..long.collisions.len().saturating_sub(3) {
        let sub = long.window(w..w + 3);
        let class = crate::symbolic::poorness_class(&sub);
        let Some(cyl) = cylinders_from_identity(&sub, &lifted) else { continue };
        if let Some(ok) = poor_lift_holds(class, &cyl) {
            poor_windows += 1;
            poor_failures += usize::from(!ok);
        }
    }
    Ok(LiftCheck {
        seed,
        events: events.len(),
        stopped_at: traj.halted.map(|_| events.len()),
        max_straightness_error: lifted.max_straightness_error.as_f64(),
        semiconjugacy,
        cylinders,
        poor_windows,
        poor_failures,
        lifted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{sample_state, simulate, Ball, Budget};
    use crate::group::build_group;
    use crate::polygon::PolygonId;
    use crate::symbolic::{long_sequence, poorness_class, Junction};
    use crate::tables::{build_atlas, make_table};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(p: PolygonId, r: f64, n: usize, seed: u64) -> (Table<f64>, UnfoldingAtlas<f64>, PhaseState<f64>, Vec<EventRecord<f64>>) {
        let t = make_table(p, r).unwrap();
        let atlas = build_atlas(&t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s0 = sample_state(&t, &mut rng).unwrap();
        let traj = simulate(&t, s0, Budget::events(n)).unwrap();
        (t, atlas, s0, traj.events)
    }

    fn id2(t: &Table<f64>) -> [GroupElement; 2] {
        [t.group().identity(); 2]
    }

    #[test]
    fn free_flight_keeps_labels() {
        let t = make_table(PolygonId::Square, 0.1).unwrap();
        let atlas = build_atlas(&t).unwrap();
        let s0 = PhaseState::new(
            Vector2::new(0.3, 0.3),
            Vector2::new(0.7, 0.7),
            Vector2::new(0.01, 0.0),
            Vector2::new(0.0, 0.0),
        );
        let e = EventRecord {
            index: 0,
            time: 1.0,
            kind: EventKind::BallBall,
            state: s0.flown(1.0),
        };
        let lifted = lift_trajectory(&t, &atlas, &s0, &[e], id2(&t));
        assert_eq!(lifted.events[0].state.labels, id2(&t));
        assert!(lifted.max_straightness_error < 1e-15);
    }

    #[test]
    fn wall_hit_composes_the_label_on_the_right() {
        let (t, atlas, s0, events) = run(PolygonId::EqTriangle, 0.1, 50, 3);
        let first_wall = events
            .iter()
            .position(|e| matches!(e.kind, EventKind::WallHit { .. }))
            .unwrap();
        let EventKind::WallHit { ball, reflection, .. } = events[first_wall].kind else { unreachable!() };
        let start = [build_group(PolygonId::EqTriangle).element(2), build_group(PolygonId::EqTriangle).element(4)];
        let lifted = lift_trajectory(&t, &atlas, &s0, &events[..=first_wall], start);
        let labels = lifted.events[first_wall].state.labels;
        let k = ball.index();
        assert_eq!(labels[k], start[k] * reflection);
        assert_eq!(labels[1 - k], start[1 - k]);
        let other = if ball == Ball::One { Ball::Two } else { Ball::One };
        assert_eq!(labels[other.index()], start[other.index()]);
    }

    #[test]
    fn unfolded_paths_are_straight() {
        for (i, p) in PolygonId::ALL.into_iter().enumerate() {
            let (t, atlas, s0, events) = run(p, 0.08, 1000, 10 + i as u64);
            let lifted = lift_trajectory(&t, &atlas, &s0, &events, id2(&t));
            assert!(lifted.stopped_at.is_none());
            assert!(lifted.max_straightness_error < 1e-9, "{p}: {:e}", lifted.max_straightness_error);
            for (e, d) in lifted.events.iter().zip(&events) {
                let s = &e.state;
                assert!((s.labels[0].apply(d.state.v1) - s.w[0]).norm() < 1e-12);
                assert!((s.labels[1].apply(d.state.v2) - s.w[1]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contact_cylinder_matches_labels() {
        let (t, atlas, s0, events) = run(PolygonId::Right3060, 0.08, 20_000, 5);
        let lifted = lift_trajectory(&t, &atlas, &s0, &events, id2(&t));
        let mut checked = 0;
        for e in lifted.events.iter().filter(|e| e.kind == EventKind::BallBall) {
            let hit = cylinder_at_collision(&atlas, t.group(), t.contact_distance(), &e.state).unwrap();
            assert_eq!(hit.g, e.state.cylinder_label());
            assert!(hit.deviation < 1e-10);
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn identity_cell_contact_is_on_the_identity_cylinder() {
        let t = make_table(PolygonId::Square, 0.1).unwrap();
        let atlas = build_atlas(&t).unwrap();
        let r = t.contact_distance();
        let s = PhaseState::new(
            Vector2::new(0.5, 0.5),
            Vector2::new(0.5 + r, 0.5),
            Vector2::new(1.0, 0.0),
            Vector2::new(0.0, 0.0),
        );
        let g = t.group();
        let up = LiftedState::from_downstairs(&atlas, &s, id2(&t).map(Affine::linear));
        assert!(cylinder_at_collision(&atlas, g, r, &up).unwrap().g.is_identity());
        let rho = g.reflections()[0];
        let up = LiftedState::from_downstairs(&atlas, &s, [Affine::linear(rho), Affine::identity(2)]);
        assert_eq!(cylinder_at_collision(&atlas, g, r, &up).unwrap().g, rho);
    }

    #[test]
    fn prediction_examples() {
        let g = build_group(PolygonId::EqTriangle);
        let e = g.identity();
        for &a in g.elements() {
            for &b in g.elements() {
                for &k in g.elements() {
                    // simple junction leaves the cylinder unchanged
                    assert_eq!(predict_next_cylinder([a, b], &Junction::new(k, k)), a * b.inverse());
                }
            }
        }
        for rho in g.reflections() {
            assert_eq!(predict_next_cylinder([e, e], &Junction::new(rho, e)), rho);
        }
        // rotation cylinder and rotation bar stay among rotations
        for &a in g.elements() {
            for &b in g.elements() {
                if !(a * b.inverse()).is_rotation() {
                    continue;
                }
                for &k1 in g.elements() {
                    for &k2 in g.elements() {
                        let j = Junction::new(k1, k2);
                        if j.bar().is_rotation() {
                            assert!(predict_next_cylinder([a, b], &j).is_rotation());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cylinder_bookkeeping_holds_on_long_runs() {
        for (i, p) in PolygonId::ALL.into_iter().enumerate() {
            let (t, atlas, s0, events) = run(p, 0.08, 20_000, 40 + i as u64);
            let lifted = lift_trajectory(&t, &atlas, &s0, &events, id2(&t));
            let long = long_sequence(p.angle_lcm(), &s0, &events).unwrap();
            let (_, rep) = check_cylinders(&t, &atlas, &long, &lifted);
            assert!(rep.all_hold(), "{p}: {rep:?}");
            assert!(rep.predictions > 500, "{p}: {rep:?}");
        }
    }

    #[test]
    fn semiconjugacy_and_negative_control() {
        let (t, atlas, s0, events) = run(PolygonId::RightIsoceles, 0.1, 2000, 77);
        let mut lifted = lift_trajectory(&t, &atlas, &s0, &events, id2(&t));
        let rep = verify_semiconjugacy(&atlas, &s0, &events, &lifted);
        assert!(rep.max_position < 1e-9 && rep.max_velocity < 1e-9, "{rep:?}");
        assert_eq!(rep.label_mismatches, 0);

        let empty = verify_semiconjugacy(&atlas, &s0, &[], &lift_trajectory(&t, &atlas, &s0, &[], id2(&t)));
        assert_eq!((empty.samples, empty.max_position, empty.max_velocity), (0, 0.0, 0.0));

        let bad = &mut lifted.events[1000].state;
        let r = t.group().element(1);
        bad.labels[0] = bad.labels[0] * r;
        bad.w[0] = r.apply(bad.w[0]);
        let rep = verify_semiconjugacy(&atlas, &s0, &events, &lifted);
        assert!(rep.max_position > 1e-3 || rep.max_velocity > 1e-3, "{rep:?}");
    }

    #[test]
    fn generator_is_the_invariant_direction() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            for &el in g.elements() {
                let c = Cylinder::new(el, 0.2);
                let z1 = Vector2::new(0.3, -0.2);
                let z2 = Vector2::new(0.1, 0.4);
                for a in c.generator_basis() {
                    let (d1, d2) = (Vector2::new(a[0], a[1]), Vector2::new(a[2], a[3]));
                    assert!((c.axis_distance(z1 + d1 * 0.7, z2 + d2 * 0.7) - c.axis_distance(z1, z2)).abs() < 1e-14);
                    for b in c.base_basis() {
                        assert!(a.dot(&b).abs() < 1e-15);
                    }
                }
                assert_eq!(span_rank(&c.generator_basis()), 2);
                assert_eq!(span_rank(&c.base_basis()), 2);
            }
        }
    }

    #[test]
    fn cylinder_subspaces_are_lattice_subspaces() {
        for p in PolygonId::ALL {
            let t = make_table(p, 0.05).unwrap();
            let atlas = build_atlas(&t).unwrap();
            for &el in t.group().elements() {
                let c = Cylinder::new(el, t.contact_distance());
                let (gen, base) = c.lattice_vectors(&atlas);
                for v in gen.iter().chain(&base) {
                    assert!(v.iter().all(|x| (x - x.round()).abs() < 1e-9), "{p} {el}: {v:?}");
                }
                // lattice coordinates are a linear change of frame, so rank is preserved
                assert_eq!(span_rank(&gen), 2);
                assert_eq!(span_rank(&base), 2);
            }
        }
    }

    #[test]
    fn rotation_cylinders_are_transversal() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            let rot = g.rotation_subgroup();
            for (i, &a) in rot.iter().enumerate() {
                for &b in &rot[i + 1..] {
                    let (ca, cb) = (Cylinder::new(a, 0.1), Cylinder::new(b, 0.1));
                    assert_eq!(intersection_dim(&ca.generator_basis(), &cb.generator_basis()), 0);
                    assert_eq!(intersection_dim(&ca.base_basis(), &cb.base_basis()), 0);
                }
            }
        }
    }

    #[test]
    fn splitting_of_rotation_families() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            let cyl: Vec<Cylinder> = g.rotation_subgroup().into_iter().map(|e| Cylinder::new(e, 0.1)).collect();
            let res = ons_split(&cyl);
            assert_eq!(res.is_split(), p == PolygonId::Square, "{p}: {res:?}");
            if let OnsResult::Split { k1, k2, .. } = res {
                assert_eq!(k1.len() + k2.len(), 4);
                for a in &k1 {
                    for b in &k2 {
                        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                        assert!(dot.abs() < 1e-12);
                    }
                }
            }
        }
        assert!(ons_split(&[Cylinder::new(build_group(PolygonId::EqTriangle).identity(), 0.1)]).is_split());
    }

    #[test]
    fn identity_and_reflection_cylinders_are_orthogonal() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            let ce = Cylinder::new(g.identity(), 0.1);
            for rho in g.reflections() {
                let cr = Cylinder::new(rho, 0.1);
                assert_eq!(intersection_dim(&ce.generator_basis(), &cr.generator_basis()), 1);
                let frame = orthogonal_frame(&ce, &cr).expect("commuting projectors");
                for i in 0..4 {
                    for j in 0..4 {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((frame[i].dot(&frame[j]) - expect).abs() < 1e-12);
                    }
                }
                assert!(spanned_by_frame(&ce.generator_basis(), &frame));
                assert!(spanned_by_frame(&cr.generator_basis(), &frame));
            }
            // two distinct rotations of order > 2 are never orthogonal in this sense
            if p != PolygonId::Square {
                let r1 = Cylinder::new(g.rotation_subgroup()[1], 0.1);
                assert!(orthogonal_frame(&ce, &r1).is_none());
            }
        }
    }

    #[test]
    fn poor_segments_lift_to_restricted_families() {
        let mut seen = (0, 0);
        for (i, p) in PolygonId::ALL.into_iter().enumerate() {
            let (t, atlas, s0, events) = run(p, 0.08, 20_000, 90 + i as u64);
            let lifted = lift_trajectory(&t, &atlas, &s0, &events, id2(&t));
            let long = long_sequence(p.angle_lcm(), &s0, &events).unwrap();
            // sliding windows of three consecutive collisions
            for w in 0..long.collisions.len().saturating_sub(3) {
                let sub = LongSeq::window(&long, w..w + 3);
                let class = poorness_class(&sub);
                let cyl = cylinders_from_identity(&sub, &lifted).unwrap();
                if let Some(ok) = poor_lift_holds(class, &cyl) {
                    assert!(ok, "{p} window {w}: {class:?} {cyl:?}");
                    match class {
                        Poorness::OPoor => seen.0 += 1,
                        _ => seen.1 += 1,
                    }
                }
            }
        }
        assert!(seen.0 > 0 && seen.1 > 0, "{seen:?}");
    }

    #[test]
    fn csv_header_and_rows() {
        let (t, atlas, s0, events) = run(PolygonId::Square, 0.1, 20, 1);
        let lifted = lift_trajectory(&t, &atlas, &s0, &events, id2(&t));
        let mut buf = Vec::new();
        write_lifted_csv(&mut buf, &lifted).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(LIFTED_CSV_HEADER));
        for l in lines {
            assert_eq!(l.split(',').count(), 14);
        }
    }

    #[test]
    fn lift_check_passes_and_counts_pairs() {
        let t = make_table(PolygonId::EqTriangle, 0.1).unwrap();
        let c = lift_check(&t, 7, 5000).unwrap();
        assert!(c.passes(1e-9), "{c:?}");
        assert!(c.cylinders.predictions > 100 && c.poor_windows > 0, "{c:?}");
        assert_eq!(c.cylinders.prediction_rate(), 1.0);
    }

    #[test]
    fn geometry_report_per_polygon() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            let r = cylinder_geometry(&g, 0.2);
            assert!(r.transversal());
            assert_eq!(r.pairs, g.rotation_subgroup().len() * (g.rotation_subgroup().len() - 1) / 2);
            assert_eq!(r.ons.is_split(), p == PolygonId::Square);
            assert!(r.reflection_intersections.iter().all(|(_, d)| *d == 1));
        }
    }
}
