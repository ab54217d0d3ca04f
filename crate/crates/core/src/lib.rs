pub mod analysis;
pub mod dynamics;
pub mod fixed;
pub mod group;
pub mod lifting;
pub mod polygon;
pub mod scalar;
pub mod sufficiency;
pub mod symbolic;
pub mod tables;
pub mod vec2;
