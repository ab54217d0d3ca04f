use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::vec2::Vector2;

/// The four polygons whose point billiard unfolds to a flat torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolygonId {
    Square,
    EqTriangle,
    /// 45-45-90 triangle.
    RightIsoceles,
    /// 30-60-90 triangle.
    Right3060,
}

impl PolygonId {
    pub const ALL: [PolygonId; 4] = [
        PolygonId::Square,
        PolygonId::EqTriangle,
        PolygonId::RightIsoceles,
        PolygonId::Right3060,
    ];

    /// Least common multiple of the denominators of the angles (as multiples of pi).
    pub fn angle_lcm(self) -> u8 {
        match self {
            PolygonId::Square => 2,
            PolygonId::EqTriangle => 3,
            PolygonId::RightIsoceles => 4,
            PolygonId::Right3060 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolygonId::Square => "square",
            PolygonId::EqTriangle => "eq-triangle",
            PolygonId::RightIsoceles => "right-isoceles",
            PolygonId::Right3060 => "right-30-60",
        }
    }

    /// Vertices of the container, counter-clockwise, longest side of length 1.
    ///
    /// Vertex 0 always carries the smallest angle `pi / N` and sits at the
    /// origin; the unfolding is anchored there.
    pub fn unit_vertices(self) -> Vec<(f64, f64)> {
        self.vertices::<f64>().into_iter().map(|v| (v.x, v.y)).collect()
    }

    /// [`PolygonId::unit_vertices`] evaluated in the scalar type `T`.
    pub fn vertices<T: Real>(self) -> Vec<Vector2<T>> {
        let (z, one, h) = (T::zero(), T::one(), T::half());
        let s3h = T::lit(3.0).sqrt() * h;
        let v = Vector2::new;
        match self {
            PolygonId::Square => vec![v(z, z), v(one, z), v(one, one), v(z, one)],
            PolygonId::EqTriangle => vec![v(z, z), v(one, z), v(h, s3h)],
            PolygonId::RightIsoceles => vec![v(z, z), v(one, z), v(h, h)],
            PolygonId::Right3060 => vec![v(z, z), v(s3h, z), v(s3h, h)],
        }
    }

    /// Whether the unfolded torus is built on the hexagonal lattice (otherwise square).
    pub fn has_hexagonal_lattice(self) -> bool {
        matches!(self, PolygonId::EqTriangle | PolygonId::Right3060)
    }
}

impl fmt::Display for PolygonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown polygon '{0}' (expected one of square, eq-triangle, right-isoceles, right-30-60)")]
pub struct UnknownPolygon(pub String);

impl FromStr for PolygonId {
    type Err = UnknownPolygon;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolygonId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownPolygon(s.to_string()))
    }
}
