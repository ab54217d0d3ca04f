//! Polygon tables, the eroded domain of the disk centers, and the unfolding
//! atlas realizing the flat torus as `|G|` copies of the eroded polygon.
//!
//! The atlas is anchored at the eroded vertex of angle `pi / N`: every group
//! element fixes that vertex, so the unfolded cells are `g (P_r - o)` and the
//! cylinder formula `|z1 - g z2| <= R` holds modulo the lattice with no cell
//! translations.

use serde::{Deserialize, Serialize};

use crate::group::{build_group, Group, GroupElement, DEFAULT_IDENTIFY_TOL};
use crate::polygon::PolygonId;
use crate::scalar::Real;
use crate::vec2::Vector2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("disk radius {r} too large for {polygon}: need 0 <= r < {bound} (half the inradius)")]
    RadiusTooLarge { polygon: PolygonId, r: f64, bound: f64 },
    #[error("disk radius must be finite and non-negative, got {0}")]
    InvalidRadius(f64),
    #[error("unfolding is inconsistent: {0}")]
    GluingFailure(String),
}

/// One wall of the eroded polygon: centers satisfy `normal . q >= offset`.
#[derive(Debug, Clone, Copy)]
pub struct Side<T> {
    pub start: Vector2<T>,
    pub end: Vector2<T>,
    /// Inward unit normal.
    pub normal: Vector2<T>,
    pub offset: T,
    /// Linear reflection whose axis is parallel to this side.
    pub reflection: GroupElement,
}

impl<T: Real> Side<T> {
    /// Signed distance of `q` from the side line, positive inside.
    #[inline]
    pub fn distance(&self, q: Vector2<T>) -> T {
        self.normal.dot(q) - self.offset
    }

    /// Mirror image of `q` in the side line.
    pub fn mirror(&self, q: Vector2<T>) -> Vector2<T> {
        q - self.normal * (T::two() * self.distance(q))
    }

    pub fn direction(&self) -> Vector2<T> {
        (self.end - self.start).normalized()
    }
}

/// A polygon with two disks of radius `r`; walls are the sides of the eroded polygon.
#[derive(Debug, Clone)]
pub struct Table<T> {
    polygon: PolygonId,
    vertices: Vec<Vector2<T>>,
    radius: T,
    eroded_vertices: Vec<Vector2<T>>,
    sides: Vec<Side<T>>,
    group: Group,
    scale: Scale,
    /// Radius the walls were eroded by; differs from `radius` only for point billiards.
    erosion: T,
}

/// Area via the shoelace formula (positive for counter-clockwise order).
pub fn polygon_area<T: Real>(v: &[Vector2<T>]) -> T {
    let mut acc = T::zero();
    for i in 0..v.len() {
        acc = acc + v[i].cross(v[(i + 1) % v.len()]);
    }
    acc * T::half()
}

fn perimeter<T: Real>(v: &[Vector2<T>]) -> T {
    (0..v.len()).fold(T::zero(), |acc, i| acc + (v[(i + 1) % v.len()] - v[i]).norm())
}

/// Inradius of the unit polygon (longest side 1). All four tables are
/// tangential, so this is `2 area / perimeter`.
pub fn inradius(polygon: PolygonId) -> f64 {
    let v = polygon.vertices::<f64>();
    2.0 * polygon_area(&v) / perimeter(&v)
}

/// Length unit of a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// The container polygon `P` has longest side 1.
    #[default]
    Container,
    /// The eroded polygon `P_r` has longest side 1 at the given radius.
    Eroded,
}

impl Scale {
    /// Factor applied to the unit polygon to obtain the container.
    pub fn container_factor(self, polygon: PolygonId, r: f64) -> f64 {
        match self {
            Scale::Container => 1.0,
            // eroding c P by r shrinks it about the incenter to (c rho - r) / (c rho)
            Scale::Eroded => 1.0 + r / inradius(polygon),
        }
    }

    /// Exclusive upper bound on `r`: half the inradius of the container.
    pub fn radius_bound(self, polygon: PolygonId) -> f64 {
        match self {
            Scale::Container => inradius(polygon) / 2.0,
            // r < (rho + r) / 2
            Scale::Eroded => inradius(polygon),
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "container" => Ok(Scale::Container),
            "eroded" => Ok(Scale::Eroded),
            other => Err(format!("unknown scale '{other}' (expected container or eroded)")),
        }
    }
}

/// Table whose container polygon has longest side 1.
pub fn make_table<T: Real>(polygon: PolygonId, r: T) -> Result<Table<T>, TableError> {
    make_table_scaled(polygon, r, Scale::Container)
}

pub fn make_table_scaled<T: Real>(polygon: PolygonId, r: T, scale: Scale) -> Result<Table<T>, TableError> {
    let rf = r.as_f64();
    if !rf.is_finite() || rf < 0.0 {
        return Err(TableError::InvalidRadius(rf));
    }
    let bound = scale.radius_bound(polygon);
    if rf >= bound {
        return Err(TableError::RadiusTooLarge { polygon, r: rf, bound });
    }
    let factor = match scale {
        Scale::Container => T::one(),
        Scale::Eroded => T::one() + r / T::lit(inradius(polygon)),
    };
    Ok(Table::build(polygon, r, factor, scale))
}

impl<T: Real> Table<T> {
    fn build(polygon: PolygonId, r: T, factor: T, scale: Scale) -> Self {
        let group = build_group(polygon);
        let vertices: Vec<Vector2<T>> = polygon.vertices::<T>().into_iter().map(|v| v * factor).collect();
        let m = vertices.len();
        // inward normals and offsets of the container sides
        let lines: Vec<(Vector2<T>, T)> = (0..m)
            .map(|i| {
                let d = (vertices[(i + 1) % m] - vertices[i]).normalized();
                let n = d.perp();
                (n, n.dot(vertices[i]))
            })
            .collect();
        // eroded vertex i sits between eroded sides i-1 and i
        let eroded_vertices: Vec<Vector2<T>> = (0..m)
            .map(|i| {
                let (n0, c0) = lines[(i + m - 1) % m];
                let (n1, c1) = lines[i];
                let (c0, c1) = (c0 + r, c1 + r);
                let det = n0.cross(n1);
                Vector2::new((c0 * n1.y - c1 * n0.y) / det, (n0.x * c1 - n1.x * c0) / det)
            })
            .collect();
        let sides = (0..m)
            .map(|i| {
                let (start, end) = (eroded_vertices[i], eroded_vertices[(i + 1) % m]);
                let (normal, c) = lines[i];
                let d = -normal.perp();
                let refl = [
                    [d.x * d.x - d.y * d.y, T::two() * d.x * d.y],
                    [T::two() * d.x * d.y, d.y * d.y - d.x * d.x],
                ];
                let reflection = group
                    .identify_element(&refl, T::lit(DEFAULT_IDENTIFY_TOL).max(T::lit(1e3) * T::epsilon()))
                    .expect("side reflection belongs to G(P)");
                Side {
                    start,
                    end,
                    normal,
                    offset: c + r,
                    reflection,
                }
            })
            .collect();
        Table {
            polygon,
            vertices,
            radius: r,
            eroded_vertices,
            sides,
            group,
            scale,
            erosion: r,
        }
    }

    /// The point billiard in this table's eroded polygon: same walls, zero
    /// radius, so balls never meet. Used as the integrable one-ball control.
    pub fn point_billiard(&self) -> Table<T> {
        Table {
            polygon: self.polygon,
            vertices: self.eroded_vertices.clone(),
            radius: T::zero(),
            eroded_vertices: self.eroded_vertices.clone(),
            sides: self.sides.clone(),
            group: self.group.clone(),
            scale: self.scale,
            erosion: self.erosion,
        }
    }

    /// Bypasses the radius bound; only for exercising failure paths in tests.
    #[cfg(test)]
    pub(crate) fn unchecked(polygon: PolygonId, r: T) -> Self {
        Self::build(polygon, r, T::one(), Scale::Container)
    }

    /// The same table built from scratch in another scalar type. The radius
    /// is carried over through its f64 value.
    pub fn with_scalar<U: Real>(&self) -> Table<U> {
        let r = U::lit(self.erosion.as_f64());
        let factor = match self.scale {
            Scale::Container => U::one(),
            Scale::Eroded => U::one() + r / U::lit(inradius(self.polygon)),
        };
        let t = Table::build(self.polygon, r, factor, self.scale);
        if self.radius.as_f64() == 0.0 && self.erosion.as_f64() != 0.0 {
            t.point_billiard()
        } else {
            t
        }
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn polygon(&self) -> PolygonId {
        self.polygon
    }

    pub fn vertices(&self) -> &[Vector2<T>] {
        &self.vertices
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    /// Center distance at ball-ball contact, `R = 2r`.
    pub fn contact_distance(&self) -> T {
        T::two() * self.radius
    }

    pub fn eroded_vertices(&self) -> &[Vector2<T>] {
        &self.eroded_vertices
    }

    pub fn sides(&self) -> &[Side<T>] {
        &self.sides
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn eroded_area(&self) -> T {
        polygon_area(&self.eroded_vertices)
    }

    pub fn eroded_diameter(&self) -> T {
        let v = &self.eroded_vertices;
        let mut d = T::zero();
        for a in v {
            for b in v {
                d = d.max((*a - *b).norm());
            }
        }
        d
    }

    /// Axis-aligned bounding box `(min, max)` of the eroded polygon.
    pub fn eroded_bounds(&self) -> (Vector2<T>, Vector2<T>) {
        let mut lo = self.eroded_vertices[0];
        let mut hi = lo;
        for v in &self.eroded_vertices {
            lo = Vector2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vector2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    /// Whether a center position lies in the eroded polygon, with slack `tol`.
    pub fn contains(&self, q: Vector2<T>, tol: T) -> bool {
        self.sides.iter().all(|s| s.distance(q) >= -tol)
    }

    /// Eroded vertex of angle `pi / N`, where the unfolding is anchored.
    pub fn anchor(&self) -> Vector2<T> {
        self.eroded_vertices[0]
    }

    /// Affine reflection in side `j`, as a map of the relative frame anchored at [`Table::anchor`]:
    /// `x -> g x + t`.
    pub fn side_affine(&self, j: usize) -> Affine<T> {
        let s = &self.sides[j];
        let a = s.start - self.anchor();
        Affine {
            linear: s.reflection,
            translation: a - s.reflection.apply(a),
        }
    }
}

/// Isometry `x -> linear x + translation` of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine<T> {
    pub linear: GroupElement,
    pub translation: Vector2<T>,
}

impl<T: Real> Affine<T> {
    pub fn identity(n: u8) -> Self {
        Affine {
            linear: GroupElement::identity(n),
            translation: Vector2::zero(),
        }
    }

    pub fn linear(g: GroupElement) -> Self {
        Affine {
            linear: g,
            translation: Vector2::zero(),
        }
    }

    #[inline]
    pub fn apply(&self, x: Vector2<T>) -> Vector2<T> {
        self.linear.apply(x) + self.translation
    }

    /// `self o other`.
    pub fn then_after(&self, other: &Affine<T>) -> Affine<T> {
        Affine {
            linear: self.linear * other.linear,
            translation: self.linear.apply(other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Affine<T> {
        let inv = self.linear.inverse();
        Affine {
            linear: inv,
            translation: -inv.apply(self.translation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    Hexagonal,
    Other,
}

/// A point of the torus in lattice (fractional) coordinates, reduced to `[0, 1)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint<T> {
    pub frac: Vector2<T>,
}

impl<T: Real> TorusPoint<T> {
    pub fn reduced(frac: Vector2<T>) -> Self {
        let wrap = |x: T| {
            let y = x - x.floor();
            // floor of a tiny negative number can round up to exactly 1
            if y >= T::one() {
                T::zero()
            } else {
                y
            }
        };
        TorusPoint {
            frac: Vector2::new(wrap(frac.x), wrap(frac.y)),
        }
    }
}

/// Placement of one cell `P_g` in the fundamental domain.
#[derive(Debug, Clone, Copy)]
pub struct CellMap<T> {
    pub element: GroupElement,
    /// Translation of the cell (relative frame); always a lattice vector
    /// reduced to zero for the anchored atlas.
    pub translation: Vector2<T>,
    /// Translation at which breadth-first unfolding first reached this element.
    pub discovered_translation: Vector2<T>,
}

/// The flat torus `R^2 / L` as a union of the cells `P_g`.
#[derive(Debug, Clone)]
pub struct UnfoldingAtlas<T> {
    origin: Vector2<T>,
    basis: [Vector2<T>; 2],
    /// Inverse of the basis matrix, row-major.
    inv_basis: [[T; 2]; 2],
    cells: Vec<CellMap<T>>,
    kind: LatticeKind,
    side_normals: Vec<(Vector2<T>, T)>,
}

/// Maximum number of distinct affine cells explored while unfolding.
const UNFOLD_NODE_CAP: usize = 4096;

pub fn build_atlas<T: Real>(table: &Table<T>) -> Result<UnfoldingAtlas<T>, TableError> {
    let group = table.group();
    let n = group.n();
    let scale = table.eroded_diameter().max(T::lit(1e-300));
    if table.eroded_area() <= T::zero() {
        return Err(TableError::GluingFailure("eroded polygon is degenerate".into()));
    }
    let tol = rel_tol::<T>() * T::lit(100.0) * scale;
    let side_maps: Vec<Affine<T>> = (0..table.sides().len()).map(|j| table.side_affine(j)).collect();

    // breadth-first unfolding over words in the side reflections
    let mut nodes: Vec<Affine<T>> = vec![Affine::identity(n)];
    let mut first: Vec<Option<Vector2<T>>> = vec![None; group.order()];
    first[0] = Some(Vector2::zero());
    let mut lattice_vectors: Vec<Vector2<T>> = Vec::new();
    let mut head = 0;
    let max_depth_nodes = UNFOLD_NODE_CAP;
    while head < nodes.len() && nodes.len() < max_depth_nodes {
        let cell = nodes[head];
        head += 1;
        for side in &side_maps {
            let next = cell.then_after(side);
            if nodes
                .iter()
                .any(|m| m.linear == next.linear && (m.translation - next.translation).norm() < tol)
            {
                continue;
            }
            let gi = next.linear.index();
            match first[gi] {
                None => first[gi] = Some(next.translation),
                Some(t0) => lattice_vectors.push(next.translation - t0),
            }
            nodes.push(next);
        }
        // the nearest shell of translates is enough once the cells are all found
        if first.iter().all(Option::is_some) && lattice_vectors.len() > 64 {
            break;
        }
    }
    if let Some(missing) = first.iter().position(Option::is_none) {
        return Err(TableError::GluingFailure(format!(
            "element {} never reached by unfolding",
            group.element(missing)
        )));
    }

    let basis = reduce_lattice(&lattice_vectors, tol)
        .ok_or_else(|| TableError::GluingFailure("translations do not span a rank-2 lattice".into()))?;
    let det = basis[0].cross(basis[1]);
    let inv_basis = [[basis[1].y / det, -basis[1].x / det], [-basis[0].y / det, basis[0].x / det]];
    let to_frac = |v: Vector2<T>| {
        Vector2::new(
            inv_basis[0][0] * v.x + inv_basis[0][1] * v.y,
            inv_basis[1][0] * v.x + inv_basis[1][1] * v.y,
        )
    };
    let is_lattice = |v: Vector2<T>| {
        let f = to_frac(v);
        (f.x - f.x.round()).abs() < rel_tol::<T>() * T::lit(100.0)
            && (f.y - f.y.round()).abs() < rel_tol::<T>() * T::lit(100.0)
    };
    if let Some(bad) = lattice_vectors.iter().find(|v| !is_lattice(**v)) {
        return Err(TableError::GluingFailure(format!(
            "translation ({}, {}) is not in the lattice spanned by the shortest ones",
            bad.x, bad.y
        )));
    }
    // anchored cells: every discovered translation must itself be a lattice vector
    let mut cells = Vec::with_capacity(group.order());
    for (i, t) in first.iter().enumerate() {
        let t = t.expect("checked above");
        if !is_lattice(t) {
            return Err(TableError::GluingFailure(format!(
                "cell {} sits at a non-lattice offset from the anchor",
                group.element(i)
            )));
        }
        cells.push(CellMap {
            element: group.element(i),
            translation: Vector2::zero(),
            discovered_translation: t,
        });
    }
    // tiling: the cells exactly fill one fundamental domain
    let covolume = det.abs();
    let cells_area = T::lit(group.order() as f64) * table.eroded_area();
    if ((covolume - cells_area) / cells_area).abs() > rel_tol::<T>() {
        return Err(TableError::GluingFailure(format!(
            "lattice covolume {covolume} differs from total cell area {cells_area}"
        )));
    }

    let kind = classify_lattice(basis);
    let origin = table.anchor();
    Ok(UnfoldingAtlas {
        origin,
        basis,
        inv_basis,
        cells,
        kind,
        side_normals: table
            .sides()
            .iter()
            .map(|s| (s.normal, s.offset - s.normal.dot(origin)))
            .collect(),
    })
}

/// Relative tolerance for exact geometric identities, loosened to the precision of `T`.
fn rel_tol<T: Real>() -> T {
    T::lit(1e-9).max(T::lit(1e3) * T::epsilon())
}

/// Lagrange-reduced basis of the lattice generated by `vectors`, taking the
/// shortest vector and the shortest one independent of it.
fn reduce_lattice<T: Real>(vectors: &[Vector2<T>], tol: T) -> Option<[Vector2<T>; 2]> {
    let mut sorted: Vec<_> = vectors.iter().copied().filter(|v| v.norm() > tol).collect();
    sorted.sort_by(|a, b| a.norm_sq().partial_cmp(&b.norm_sq()).unwrap());
    let b1 = *sorted.first()?;
    let b2 = *sorted
        .iter()
        .find(|v| b1.cross(**v).abs() > tol * b1.norm())?;
    let (mut u, mut v) = (b1, b2);
    loop {
        if v.norm_sq() < u.norm_sq() {
            std::mem::swap(&mut u, &mut v);
        }
        let mu = u.dot(v) / u.norm_sq();
        // |mu| = 1/2 is already reduced (hexagonal lattices); rounding it would cycle
        if mu.abs() <= T::half() + T::lit(1e-9) {
            break;
        }
        v -= u * mu.round();
    }
    if u.cross(v) < T::zero() {
        v = -v;
    }
    Some([u, v])
}

fn classify_lattice<T: Real>(b: [Vector2<T>; 2]) -> LatticeKind {
    let (l1, l2) = (b[0].norm(), b[1].norm());
    if ((l1 - l2) / l1).abs() > rel_tol::<T>() {
        return LatticeKind::Other;
    }
    let cos = (b[0].dot(b[1]) / (l1 * l2)).abs();
    if cos < rel_tol::<T>() {
        LatticeKind::Square
    } else if (cos - T::half()).abs() < rel_tol::<T>() {
        LatticeKind::Hexagonal
    } else {
        LatticeKind::Other
    }
}

impl<T: Real> UnfoldingAtlas<T> {
    /// Anchor vertex in table coordinates; torus coordinates are relative to it.
    pub fn origin(&self) -> Vector2<T> {
        self.origin
    }

    pub fn basis(&self) -> [Vector2<T>; 2] {
        self.basis
    }

    pub fn lattice_kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn cells(&self) -> &[CellMap<T>] {
        &self.cells
    }

    pub fn covolume(&self) -> T {
        self.basis[0].cross(self.basis[1]).abs()
    }

    /// Cartesian (relative frame) to lattice coordinates.
    #[inline]
    pub fn to_frac(&self, v: Vector2<T>) -> Vector2<T> {
        let m = &self.inv_basis;
        Vector2::new(m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y)
    }

    #[inline]
    pub fn to_cartesian(&self, f: Vector2<T>) -> Vector2<T> {
        self.basis[0] * f.x + self.basis[1] * f.y
    }

    pub fn lattice_vector(&self, i: i64, j: i64) -> Vector2<T> {
        self.basis[0] * T::lit(i as f64) + self.basis[1] * T::lit(j as f64)
    }

    /// Shortest representative of `v` modulo the lattice, searched over the
    /// 3x3 block of translates around the rounded lattice coordinates.
    pub fn reduce_vector(&self, v: Vector2<T>) -> Vector2<T> {
        let f = self.to_frac(v);
        let (i0, j0) = (f.x.round(), f.y.round());
        let mut best = v;
        let mut best_n = T::infinity();
        for di in -1..=1 {
            for dj in -1..=1 {
                let w = v
                    - self.to_cartesian(Vector2::new(i0 + T::lit(di as f64), j0 + T::lit(dj as f64)));
                let n = w.norm_sq();
                if n < best_n {
                    best_n = n;
                    best = w;
                }
            }
        }
        best
    }

    /// Relative-frame point to torus point.
    pub fn project(&self, x: Vector2<T>) -> TorusPoint<T> {
        TorusPoint::reduced(self.to_frac(x))
    }

    /// `z = g q`: place a center position `q` of the table into cell `P_g`.
    pub fn cell_map(&self, g: GroupElement, q: Vector2<T>) -> TorusPoint<T> {
        let cell = &self.cells[g.index()];
        self.project(g.apply(q - self.origin) + cell.translation)
    }

    fn in_eroded_relative(&self, x: Vector2<T>, tol: T) -> bool {
        self.side_normals.iter().all(|(n, c)| n.dot(x) - *c >= -tol)
    }

    /// Cell label and table position of a torus point. Points on shared cell
    /// boundaries resolve to the incident cell of lowest element index.
    pub fn fold(&self, z: TorusPoint<T>) -> (GroupElement, Vector2<T>) {
        let x = self.to_cartesian(z.frac);
        let (i0, j0) = (z.frac.x.round(), z.frac.y.round());
        let tol = T::lit(1e-12).max(T::lit(64.0) * T::epsilon());
        let mut best: Option<(GroupElement, Vector2<T>, T)> = None;
        for cell in &self.cells {
            let g_inv = cell.element.inverse();
            for di in -1..=1 {
                for dj in -1..=1 {
                    let l = self.to_cartesian(Vector2::new(i0 + T::lit(di as f64), j0 + T::lit(dj as f64)));
                    let y = g_inv.apply(x - l - cell.translation);
                    if self.in_eroded_relative(y, tol) {
                        return (cell.element, y + self.origin);
                    }
                    // keep the least-violating candidate for points that miss every cell by rounding
                    let worst = self
                        .side_normals
                        .iter()
                        .map(|(n, c)| *c - n.dot(y))
                        .fold(T::neg_infinity(), T::max);
                    if best.is_none_or(|b| worst < b.2) {
                        best = Some((cell.element, y + self.origin, worst));
                    }
                }
            }
        }
        let (g, q, _) = best.expect("atlas has cells");
        (g, q)
    }

    pub fn dump(&self, table: &Table<T>) -> AtlasDump {
        let p = |v: &Vector2<T>| [v.x.as_f64(), v.y.as_f64()];
        AtlasDump {
            polygon: table.polygon(),
            radius: table.radius().as_f64(),
            contact_distance: table.contact_distance().as_f64(),
            vertices: table.vertices().iter().map(p).collect(),
            eroded_vertices: table.eroded_vertices().iter().map(p).collect(),
            sides: table
                .sides()
                .iter()
                .map(|s| SideDump {
                    start: p(&s.start),
                    end: p(&s.end),
                    inward_normal: p(&s.normal),
                    reflection: s.reflection.to_string(),
                })
                .collect(),
            origin: p(&self.origin),
            lattice_basis: [p(&self.basis[0]), p(&self.basis[1])],
            lattice_kind: self.kind,
            cells: self
                .cells
                .iter()
                .map(|c| CellDump {
                    element: c.element.to_string(),
                    matrix: c.element.matrix::<f64>(),
                    translation: p(&c.translation),
                    discovered_translation: p(&c.discovered_translation),
                })
                .collect(),
        }
    }
}

/// Plain-data view of a table and its atlas, for plotting and debugging.
#[derive(Debug, Clone, Serialize)]
pub struct AtlasDump {
    pub polygon: PolygonId,
    pub radius: f64,
    pub contact_distance: f64,
    pub vertices: Vec<[f64; 2]>,
    pub eroded_vertices: Vec<[f64; 2]>,
    pub sides: Vec<SideDump>,
    pub origin: [f64; 2],
    pub lattice_basis: [[f64; 2]; 2],
    pub lattice_kind: LatticeKind,
    pub cells: Vec<CellDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SideDump {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub inward_normal: [f64; 2],
    pub reflection: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellDump {
    pub element: String,
    pub matrix: [[f64; 2]; 2],
    pub translation: [f64; 2],
    pub discovered_translation: [f64; 2],
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_erosion() {
        let t = make_table::<f64>(PolygonId::Square, 0.1).unwrap();
        let v = t.eroded_vertices();
        assert!((v[0] - Vector2::new(0.1, 0.1)).norm() < 1e-15);
        assert!(((v[1] - v[0]).norm() - 0.8).abs() < 1e-15);
        assert!((t.contact_distance() - 0.2).abs() < 1e-16);
    }

    #[test]
    fn eroded_scale_gives_unit_longest_side() {
        for p in PolygonId::ALL {
            let t = make_table_scaled(p, 0.1, Scale::Eroded).unwrap();
            let v = t.eroded_vertices();
            let longest = (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).norm()).fold(0.0, f64::max);
            assert!((longest - 1.0).abs() < 1e-14, "{p}: {longest}");
        }
        // r = 0.1 exceeds the container-scale bound of the 30-60 triangle only
        assert!(make_table(PolygonId::Right3060, 0.1).is_err());
        assert!(make_table(PolygonId::RightIsoceles, 0.1).is_ok());
    }

    #[test]
    fn zero_radius_keeps_polygon() {
        let t = make_table::<f64>(PolygonId::EqTriangle, 0.0).unwrap();
        for (a, b) in t.vertices().iter().zip(t.eroded_vertices()) {
            assert!((*a - *b).norm() < 1e-15);
        }
        assert_eq!(t.contact_distance(), 0.0);
    }

    #[test]
    fn radius_bound() {
        assert!(matches!(
            make_table::<f64>(PolygonId::Square, 0.3),
            Err(TableError::RadiusTooLarge { bound, .. }) if (bound - 0.25).abs() < 1e-15
        ));
        assert!(matches!(make_table::<f64>(PolygonId::Square, -0.1), Err(TableError::InvalidRadius(_))));
        assert!(make_table::<f64>(PolygonId::Square, 0.2499).is_ok());
    }

    #[test]
    fn erosion_preserves_angles_and_side_elements() {
        for p in PolygonId::ALL {
            let t = make_table::<f64>(p, 0.07).unwrap();
            let m = t.vertices().len();
            let angle = |v: &[Vector2<f64>], i: usize| {
                let a = v[(i + m - 1) % m] - v[i];
                let b = v[(i + 1) % m] - v[i];
                (a.dot(b) / (a.norm() * b.norm())).acos()
            };
            for i in 0..m {
                assert!((angle(t.vertices(), i) - angle(t.eroded_vertices(), i)).abs() < 1e-12);
            }
            // the anchor vertex has angle pi / N
            let n = p.angle_lcm() as f64;
            assert!((angle(t.eroded_vertices(), 0) - std::f64::consts::PI / n).abs() < 1e-12);
            for s in t.sides() {
                assert!(t.group().contains(s.reflection));
                // reflection axis parallel to the side
                let d = s.direction();
                assert!((s.reflection.apply(d) - d).norm() < 1e-14);
                assert!(s.distance(s.start).abs() < 1e-14 && s.distance(s.end).abs() < 1e-14);
                // eroded side sits at distance r from the container side
                let container_offset = s.offset - t.radius();
                let nearest = t.vertices().iter().map(|v| s.normal.dot(*v) - container_offset).fold(f64::INFINITY, f64::min);
                assert!(nearest.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn atlas_lattices() {
        let expected = [
            (PolygonId::Square, LatticeKind::Square, 4),
            (PolygonId::EqTriangle, LatticeKind::Hexagonal, 6),
            (PolygonId::RightIsoceles, LatticeKind::Square, 8),
            (PolygonId::Right3060, LatticeKind::Hexagonal, 12),
        ];
        for (p, kind, cells) in expected {
            let t = make_table::<f64>(p, 0.05).unwrap();
            let a = build_atlas(&t).unwrap();
            assert_eq!(a.lattice_kind(), kind, "{p}");
            assert_eq!(a.cells().len(), cells);
            let area = cells as f64 * t.eroded_area();
            assert!((a.covolume() - area).abs() < 1e-12 * area);
        }
    }

    #[test]
    fn square_lattice_is_twice_the_side() {
        let t = make_table::<f64>(PolygonId::Square, 0.1).unwrap();
        let a = build_atlas(&t).unwrap();
        for b in a.basis() {
            assert!((b.norm() - 1.6).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_is_group_invariant() {
        for p in PolygonId::ALL {
            let t = make_table::<f64>(p, 0.05).unwrap();
            let a = build_atlas(&t).unwrap();
            for &g in t.group().elements() {
                for b in a.basis() {
                    let f = a.to_frac(g.apply(b));
                    assert!((f.x - f.x.round()).abs() < 1e-9 && (f.y - f.y.round()).abs() < 1e-9);
                }
            }
        }
    }

    fn random_interior(t: &Table<f64>, rng: &mut ChaCha8Rng) -> Vector2<f64> {
        let (lo, hi) = t.eroded_bounds();
        loop {
            let q = Vector2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if t.sides().iter().all(|s| s.distance(q) > 1e-9) {
                return q;
            }
        }
    }

    #[test]
    fn fold_inverts_cell_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in PolygonId::ALL {
            let t = make_table::<f64>(p, 0.08).unwrap();
            let a = build_atlas(&t).unwrap();
            for i in 0..10_000 {
                let q = random_interior(&t, &mut rng);
                let g = t.group().element(i % t.group().order());
                let (g2, q2) = a.fold(a.cell_map(g, q));
                assert_eq!(g2, g, "{p}");
                assert!((q2 - q).norm() < 1e-12, "{p}: {}", (q2 - q).norm());
            }
        }
    }

    #[test]
    fn fold_boundary_tie_break() {
        let t = make_table::<f64>(PolygonId::EqTriangle, 0.05).unwrap();
        let a = build_atlas(&t).unwrap();
        // midpoint of side 0 lies on the shared boundary of P_e and P_{R_0}
        let s = t.sides()[0];
        let mid = (s.start + s.end) * 0.5;
        let refl = s.reflection;
        let (g, q) = a.fold(a.cell_map(refl, mid));
        assert_eq!(g, t.group().identity());
        assert!((q - mid).norm() < 1e-12);
    }

    #[test]
    fn f32_tables_build() {
        for p in PolygonId::ALL {
            let t = make_table(p, 0.05f32).unwrap();
            let a = build_atlas(&t).unwrap();
            assert_eq!(a.cells().len(), t.group().order());
        }
    }

    #[test]
    fn degenerate_eroded_polygon_fails_gluing() {
        let t = Table::unchecked(PolygonId::Square, 0.5);
        assert!(matches!(build_atlas(&t), Err(TableError::GluingFailure(_))));
    }
}
