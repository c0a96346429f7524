pub mod cech;
pub mod config;
pub mod error;
pub mod expr;
pub mod field;
pub mod frames;
pub mod geom;
pub mod jet;
pub mod scenarios;
pub mod sections;
pub mod verify;
pub mod winding;
