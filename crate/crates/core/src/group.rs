//! The dihedral group `G(P)` generated by reflections in lines through the
//! origin meeting at angles `pi / N`.
//!
//! Elements are stored as a kind plus an integer index modulo `N`; all
//! composition is integer arithmetic and the 2x2 matrices are derived views.
//! Reflection axes are lines, so their angles live in `[0, pi)` and are
//! expressed in units of `pi / N`.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::polygon::PolygonId;
use crate::scalar::Real;
use crate::vec2::{frobenius_distance, mat_vec, Matrix2, Vector2};

/// Default Frobenius tolerance for [`Group::identify_element`].
pub const DEFAULT_IDENTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroupError {
    #[error("matrix is not within {tol:e} of any element of the order-{order} group")]
    NotInGroup { order: usize, tol: f64 },
    #[error("matrix is within {tol:e} of {count} group elements; tolerance too large")]
    Ambiguous { count: usize, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Rotation,
    Reflection,
}

/// A reflection axis: the line through the origin at angle `k pi / N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Axis {
    k: u8,
    n: u8,
}

impl Axis {
    pub fn new(n: u8, k: i64) -> Self {
        assert!(n > 0);
        Axis { k: k.rem_euclid(n as i64) as u8, n }
    }

    /// Index `k` of the angle `k pi / N`, in `[0, N)`.
    pub fn index(self) -> u8 {
        self.k
    }

    /// Angle as a multiple of pi, in `[0, 1)`.
    pub fn angle_over_pi(self) -> Ratio<i64> {
        Ratio::new(self.k as i64, self.n as i64)
    }

    pub fn angle<T: Real>(self) -> T {
        T::PI() * T::lit(self.k as f64) / T::lit(self.n as f64)
    }

    pub fn direction<T: Real>(self) -> Vector2<T> {
        Vector2::from_angle(self.angle())
    }

    /// Image of the line under `g`.
    pub fn image_under(self, g: GroupElement) -> Axis {
        assert_eq!(self.n, g.n, "axis and element from different groups");
        let (k, a) = (self.k as i64, g.k as i64);
        match g.kind {
            // rotation by 2 pi a / N turns the line by 2a units of pi / N
            ElementKind::Rotation => Axis::new(self.n, k + 2 * a),
            ElementKind::Reflection => Axis::new(self.n, 2 * a - k),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.angle_over_pi();
        write!(f, "{}pi", r)
    }
}

/// Result of [`GroupElement::classify`]; angles are exact multiples of pi.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Rotation { angle_over_pi: Ratio<i64> },
    Reflection { axis_over_pi: Ratio<i64> },
}

/// Element of the dihedral group of order `2N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    kind: ElementKind,
    k: u8,
    n: u8,
}

impl GroupElement {
    pub fn identity(n: u8) -> Self {
        Self::rotation(n, 0)
    }

    /// Rotation by `2 pi k / N`.
    pub fn rotation(n: u8, k: i64) -> Self {
        assert!(n > 0);
        GroupElement {
            kind: ElementKind::Rotation,
            k: k.rem_euclid(n as i64) as u8,
            n,
        }
    }

    /// Reflection in the line at angle `k pi / N`.
    pub fn reflection(n: u8, k: i64) -> Self {
        assert!(n > 0);
        GroupElement {
            kind: ElementKind::Reflection,
            k: k.rem_euclid(n as i64) as u8,
            n,
        }
    }

    pub fn reflection_in(axis: Axis) -> Self {
        Self::reflection(axis.n, axis.k as i64)
    }

    pub fn kind(self) -> ElementKind {
        self.kind
    }

    /// Rotation step or reflection axis index, in `[0, N)`.
    pub fn k(self) -> u8 {
        self.k
    }

    pub fn order_n(self) -> u8 {
        self.n
    }

    pub fn is_identity(self) -> bool {
        self.kind == ElementKind::Rotation && self.k == 0
    }

    pub fn is_rotation(self) -> bool {
        self.kind == ElementKind::Rotation
    }

    pub fn is_reflection(self) -> bool {
        self.kind == ElementKind::Reflection
    }

    /// Index in `[0, 2N)`: rotations first, then reflections.
    pub fn index(self) -> usize {
        match self.kind {
            ElementKind::Rotation => self.k as usize,
            ElementKind::Reflection => self.n as usize + self.k as usize,
        }
    }

    pub fn from_index(n: u8, index: usize) -> Self {
        assert!(index < 2 * n as usize, "element index out of range");
        if index < n as usize {
            Self::rotation(n, index as i64)
        } else {
            Self::reflection(n, (index - n as usize) as i64)
        }
    }

    /// The axis of a reflection.
    pub fn axis(self) -> Option<Axis> {
        match self.kind {
            ElementKind::Reflection => Some(Axis::new(self.n, self.k as i64)),
            ElementKind::Rotation => None,
        }
    }

    /// `self * other`, i.e. the element whose matrix is `matrix(self) * matrix(other)`.
    pub fn compose(self, other: GroupElement) -> GroupElement {
        assert_eq!(self.n, other.n, "elements from different groups");
        let (a, b, n) = (self.k as i64, other.k as i64, self.n);
        use ElementKind::*;
        match (self.kind, other.kind) {
            (Rotation, Rotation) => Self::rotation(n, a + b),
            (Rotation, Reflection) => Self::reflection(n, b + a),
            (Reflection, Rotation) => Self::reflection(n, a - b),
            (Reflection, Reflection) => Self::rotation(n, a - b),
        }
    }

    pub fn inverse(self) -> GroupElement {
        match self.kind {
            ElementKind::Rotation => Self::rotation(self.n, -(self.k as i64)),
            ElementKind::Reflection => self,
        }
    }

    pub fn matrix<T: Real>(self) -> Matrix2<T> {
        let m = self.matrix_split::<T>();
        [[m[0][0].0, m[0][1].0], [m[1][0].0, m[1][1].0]]
    }

    /// Matrix entries as unevaluated sums `hi + lo`, accurate to about twice
    /// the precision of `T`.
    pub fn matrix_split<T: Real>(self) -> [[(T, T); 2]; 2] {
        let (c, s) = cos_sin_twelfths::<T>(12 * self.k as usize / self.n as usize);
        let neg = |(h, l): (T, T)| (-h, -l);
        match self.kind {
            ElementKind::Rotation => [[c, neg(s)], [s, c]],
            ElementKind::Reflection => [[c, s], [s, neg(c)]],
        }
    }

    #[inline]
    pub fn apply<T: Real>(self, v: Vector2<T>) -> Vector2<T> {
        mat_vec(&self.matrix(), v)
    }

    /// `apply` with compensated arithmetic: the result is the exact image of
    /// `v` rounded once per component. Used by the wall law, where the
    /// rounding bias of the plain product would accumulate as energy drift.
    pub fn apply_compensated<T: Real>(self, v: Vector2<T>) -> Vector2<T> {
        let m = self.matrix_split::<T>();
        let row = |r: [(T, T); 2]| {
            let (p1, e1) = two_prod(r[0].0, v.x);
            let (p2, e2) = two_prod(r[1].0, v.y);
            let (s, e3) = two_sum(p1, p2);
            s + (e1 + e2 + e3 + r[0].1 * v.x + r[1].1 * v.y)
        };
        Vector2::new(row(m[0]), row(m[1]))
    }

    pub fn determinant_sign(self) -> i8 {
        match self.kind {
            ElementKind::Rotation => 1,
            ElementKind::Reflection => -1,
        }
    }

    pub fn classify(self) -> Classification {
        match self.kind {
            ElementKind::Rotation => Classification::Rotation {
                angle_over_pi: Ratio::new(2 * self.k as i64, self.n as i64),
            },
            ElementKind::Reflection => Classification::Reflection {
                axis_over_pi: Ratio::new(self.k as i64, self.n as i64),
            },
        }
    }
}

impl std::ops::Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: GroupElement) -> GroupElement {
        self.compose(rhs)
    }
}

impl fmt::Display for GroupElement {
    /// `e`, `r<k>` for rotations, `R<k>` for reflections.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ElementKind::Rotation if self.k == 0 => f.write_str("e"),
            ElementKind::Rotation => write!(f, "r{}", self.k),
            ElementKind::Reflection => write!(f, "R{}", self.k),
        }
    }
}

impl GroupElement {
    /// Inverse of the `Display` form, for a group of order `2n`.
    pub fn parse(n: u8, text: &str) -> Option<GroupElement> {
        let text = text.trim();
        if text == "e" {
            return Some(GroupElement::identity(n));
        }
        let (head, digits) = text.split_at(1.min(text.len()));
        let k: u8 = digits.parse().ok()?;
        if k >= n {
            return None;
        }
        match head {
            "r" if k > 0 => Some(GroupElement::rotation(n, k as i64)),
            "R" => Some(GroupElement::reflection(n, k as i64)),
            _ => None,
        }
    }
}

/// Axis `sE` of the conjugate reflection `s R_E s^-1`.
pub fn conjugate_axis(s: GroupElement, e: Axis) -> Axis {
    let conj = s * GroupElement::reflection_in(e) * s.inverse();
    let axis = conj.axis().expect("conjugate of a reflection is a reflection");
    debug_assert_eq!(axis, e.image_under(s));
    axis
}

/// `G(P)` with its Cayley table.
#[derive(Debug, Clone)]
pub struct Group {
    polygon: PolygonId,
    n: u8,
    elements: Vec<GroupElement>,
    cayley: Vec<u8>,
}

pub fn build_group(polygon: PolygonId) -> Group {
    let n = polygon.angle_lcm();
    let order = 2 * n as usize;
    let elements: Vec<_> = (0..order).map(|i| GroupElement::from_index(n, i)).collect();
    let mut cayley = Vec::with_capacity(order * order);
    for a in &elements {
        for b in &elements {
            cayley.push(a.compose(*b).index() as u8);
        }
    }
    Group {
        polygon,
        n,
        elements,
        cayley,
    }
}

impl Group {
    pub fn polygon(&self) -> PolygonId {
        self.polygon
    }

    pub fn n(&self) -> u8 {
        self.n
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::identity(self.n)
    }

    pub fn element(&self, index: usize) -> GroupElement {
        self.elements[index]
    }

    /// Product looked up in the Cayley table.
    pub fn mul(&self, a: GroupElement, b: GroupElement) -> GroupElement {
        let i = a.index() * self.order() + b.index();
        self.elements[self.cayley[i] as usize]
    }

    pub fn contains(&self, g: GroupElement) -> bool {
        g.n == self.n
    }

    /// `G_O`, the subgroup of rotations.
    pub fn rotation_subgroup(&self) -> Vec<GroupElement> {
        self.elements.iter().copied().filter(|g| g.is_rotation()).collect()
    }

    pub fn reflections(&self) -> Vec<GroupElement> {
        self.elements.iter().copied().filter(|g| g.is_reflection()).collect()
    }

    /// Recover the element whose matrix is within `tol` (Frobenius) of `m`.
    pub fn identify_element<T: Real>(&self, m: &Matrix2<T>, tol: T) -> Result<GroupElement, GroupError> {
        let mut found = None;
        let mut count = 0;
        for g in &self.elements {
            if frobenius_distance(&g.matrix::<T>(), m) < tol {
                count += 1;
                found = Some(*g);
            }
        }
        match (count, found) {
            (1, Some(g)) => Ok(g),
            (0, _) => Err(GroupError::NotInGroup {
                order: self.order(),
                tol: tol.as_f64(),
            }),
            _ => Err(GroupError::Ambiguous {
                count,
                tol: tol.as_f64(),
            }),
        }
    }

    /// Smallest Frobenius distance between two distinct element matrices.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.elements.iter().enumerate() {
            for b in &self.elements[i + 1..] {
                best = best.min(frobenius_distance(&a.matrix::<f64>(), &b.matrix::<f64>()));
            }
        }
        best
    }
}

#[inline]
fn two_prod<T: Real>(a: T, b: T) -> (T, T) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[inline]
fn two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `(cos, sin)` of `a pi / 6` as `hi + lo` pairs. Every entry of every group
/// matrix is one of these, so only `sqrt(3) / 2` needs a low part.
fn cos_sin_twelfths<T: Real>(a: usize) -> ((T, T), (T, T)) {
    let hi = T::lit(0.75).sqrt();
    // hi^2 - 3/4 exactly, via fma; lo solves (hi + lo)^2 = 3/4 to first order
    let lo = -hi.mul_add(hi, -T::lit(0.75)) / (T::two() * hi);
    let r3 = (hi, lo);
    let z = (T::zero(), T::zero());
    let one = (T::one(), T::zero());
    let half = (T::half(), T::zero());
    let neg = |(h, l): (T, T)| (-h, -l);
    // (cos, sin) at 0, 30, ..., 330 degrees
    match a % 12 {
        0 => (one, z),
        1 => (r3, half),
        2 => (half, r3),
        3 => (z, one),
        4 => (neg(half), r3),
        5 => (neg(r3), half),
        6 => (neg(one), z),
        7 => (neg(r3), neg(half)),
        8 => (neg(half), neg(r3)),
        9 => (z, neg(one)),
        10 => (half, neg(r3)),
        _ => (r3, neg(half)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::mat_mul;

    fn close(a: &Matrix2<f64>, b: &Matrix2<f64>, tol: f64) -> bool {
        frobenius_distance(a, b) < tol
    }

    /// Closure of the side reflections of the unit polygon, computed with
    /// floating matrices only.
    fn generated_order(polygon: PolygonId) -> usize {
        let v = polygon.unit_vertices();
        let gens: Vec<Matrix2<f64>> = (0..v.len())
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % v.len()]);
                let th = (b.1 - a.1).atan2(b.0 - a.0);
                let (s, c) = (2.0 * th).sin_cos();
                [[c, s], [s, -c]]
            })
            .collect();
        let mut seen: Vec<Matrix2<f64>> = vec![[[1.0, 0.0], [0.0, 1.0]]];
        let mut frontier = seen.clone();
        while let Some(m) = frontier.pop() {
            for g in &gens {
                let p = mat_mul(g, &m);
                if !seen.iter().any(|s| close(s, &p, 1e-9)) {
                    seen.push(p);
                    frontier.push(p);
                }
            }
        }
        seen.len()
    }

    #[test]
    fn orders_match_side_reflection_closure() {
        for (p, order) in [
            (PolygonId::Square, 4),
            (PolygonId::EqTriangle, 6),
            (PolygonId::RightIsoceles, 8),
            (PolygonId::Right3060, 12),
        ] {
            let g = build_group(p);
            assert_eq!(g.order(), order, "{p}");
            assert_eq!(generated_order(p), order, "{p}");
            assert_eq!(g.rotation_subgroup().len(), order / 2);
        }
    }

    #[test]
    fn square_group_elements() {
        let g = build_group(PolygonId::Square);
        let names: Vec<_> = g.elements().iter().map(|e| e.to_string()).collect();
        assert_eq!(names, ["e", "r1", "R0", "R1"]);
        // reflection in 0 deg followed by reflection in 90 deg is the half turn
        let r0 = GroupElement::reflection(2, 0);
        let r90 = GroupElement::reflection(2, 1);
        assert_eq!(r0 * r90, GroupElement::rotation(2, 1));
        let m = mat_mul(&r0.matrix::<f64>(), &r90.matrix::<f64>());
        assert!(close(&m, &[[-1.0, 0.0], [0.0, -1.0]], 1e-15));
    }

    #[test]
    fn identity_and_involutions() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            let e = g.identity();
            for &x in g.elements() {
                assert_eq!(e * x, x);
                assert_eq!(x * e, x);
                assert_eq!(x * x.inverse(), e);
                if x.is_reflection() {
                    assert_eq!(x * x, e);
                    assert_eq!(x.inverse(), x);
                }
            }
        }
        let r120 = GroupElement::rotation(3, 1);
        assert_eq!(r120.inverse(), GroupElement::rotation(3, 2));
    }

    #[test]
    fn closure_and_matrix_faithfulness_exhaustive() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            for &a in g.elements() {
                for &b in g.elements() {
                    let c = a * b;
                    assert!(g.contains(c));
                    assert_eq!(g.mul(a, b), c);
                    let m = mat_mul(&a.matrix::<f64>(), &b.matrix::<f64>());
                    assert!(close(&m, &c.matrix(), 1e-14), "{p}: {a}*{b}");
                }
            }
        }
    }

    #[test]
    fn rotation_subgroup_is_det_plus_one_and_closed() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            let go = g.rotation_subgroup();
            assert_eq!(go.len(), g.n() as usize);
            for &a in g.elements() {
                let m = a.matrix::<f64>();
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                assert!((det - a.determinant_sign() as f64).abs() < 1e-14);
                assert_eq!(det > 0.0, go.contains(&a));
            }
            for &a in &go {
                for &b in &go {
                    assert!(go.contains(&(a * b)));
                }
            }
        }
    }

    #[test]
    fn apply_examples() {
        let n = 2;
        let v = Vector2::new(0.3f64, -1.7);
        assert_eq!(GroupElement::identity(n).apply(Vector2::new(1.0, 0.0)), Vector2::new(1.0, 0.0));
        let r = GroupElement::reflection(n, 0).apply(v);
        assert!((r - Vector2::new(0.3, 1.7)).norm() < 1e-15);
        let h = GroupElement::rotation(n, 1).apply(v);
        assert!((h + v).norm() < 1e-15);
        for p in PolygonId::ALL {
            for &g in build_group(p).elements() {
                assert!((g.apply(v).norm() - v.norm()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn classify_examples() {
        use Classification::*;
        assert_eq!(
            GroupElement::identity(4).classify(),
            Rotation { angle_over_pi: Ratio::from_integer(0) }
        );
        assert_eq!(
            GroupElement::reflection(4, 1).classify(),
            Reflection { axis_over_pi: Ratio::new(1, 4) }
        );
        let c = (GroupElement::reflection(6, 1) * GroupElement::reflection(6, 4)).classify();
        match c {
            Rotation { angle_over_pi } => assert_ne!(angle_over_pi, Ratio::from_integer(0)),
            _ => panic!("two reflections compose to a rotation"),
        }
    }

    #[test]
    fn identify_examples() {
        let g3 = build_group(PolygonId::EqTriangle);
        let id = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(g3.identify_element(&id, 1e-6).unwrap(), g3.identity());
        let mut m = GroupElement::rotation(3, 1).matrix::<f64>();
        m[0][1] += 1e-12;
        assert_eq!(g3.identify_element(&m, 1e-9).unwrap(), GroupElement::rotation(3, 1));
        let quarter = GroupElement::rotation(4, 1).matrix::<f64>();
        assert!(matches!(
            g3.identify_element(&quarter, DEFAULT_IDENTIFY_TOL),
            Err(GroupError::NotInGroup { .. })
        ));
        assert!(matches!(g3.identify_element(&id, 10.0), Err(GroupError::Ambiguous { .. })));
    }

    #[test]
    fn identify_round_trip_and_separation() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            assert!(g.min_separation() > 100.0 * DEFAULT_IDENTIFY_TOL);
            for &x in g.elements() {
                assert_eq!(g.identify_element(&x.matrix::<f64>(), DEFAULT_IDENTIFY_TOL).unwrap(), x);
            }
        }
    }

    #[test]
    fn conjugate_axis_examples() {
        let e0 = Axis::new(2, 0);
        assert_eq!(conjugate_axis(GroupElement::identity(2), e0), e0);
        assert_eq!(conjugate_axis(GroupElement::rotation(2, 1), e0), e0);
        // 120 deg rotation of the 0 deg line is the 120 deg line, index 2 in units of pi/3
        let a = conjugate_axis(GroupElement::rotation(3, 1), Axis::new(3, 0));
        assert_eq!(a.index(), 2);
        assert_eq!(a.angle_over_pi(), Ratio::new(2, 3));
    }

    #[test]
    fn conjugate_axis_matches_matrices() {
        for p in PolygonId::ALL {
            let g = build_group(p);
            for &s in g.elements() {
                for k in 0..g.n() {
                    let e = Axis::new(g.n(), k as i64);
                    let se = conjugate_axis(s, e);
                    let m = mat_mul(
                        &mat_mul(&s.matrix::<f64>(), &GroupElement::reflection_in(e).matrix()),
                        &s.inverse().matrix(),
                    );
                    assert!(close(&m, &GroupElement::reflection_in(se).matrix(), 1e-14));
                    // the image line is the s-image of the direction of e
                    let d = s.apply(e.direction::<f64>());
                    assert!(d.cross(se.direction()).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn f32_matrices_are_orthogonal() {
        for &x in build_group(PolygonId::Right3060).elements() {
            let m = x.matrix::<f32>();
            let mt = [[m[0][0], m[1][0]], [m[0][1], m[1][1]]];
            let p = mat_mul(&m, &mt);
            assert!((p[0][0] - 1.0).abs() < 1e-6 && p[0][1].abs() < 1e-6);
        }
    }
}

