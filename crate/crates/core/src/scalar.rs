use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the geometry and dynamics are written against.
///
/// Besides the usual float arithmetic each implementation carries the
/// event-detection tolerances appropriate to its precision; the `f64` values
/// are the reference ones, `f32` scales them to its epsilon.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Two candidate event times closer than this are a simultaneous event.
    fn event_tie_tol() -> Self;
    /// Contact and vertex proximity tolerance.
    fn contact_tol() -> Self;
    /// Slack for the phase-space constraints (inside polygon, `|q1 - q2| >= R`).
    fn constraint_tol() -> Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f64 {
    fn event_tie_tol() -> Self {
        1e-12
    }
    fn contact_tol() -> Self {
        1e-10
    }
    fn constraint_tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn event_tie_tol() -> Self {
        2e-6
    }
    fn contact_tol() -> Self {
        2e-5
    }
    fn constraint_tol() -> Self {
        2e-6
    }
}
