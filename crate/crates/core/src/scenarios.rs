//! Scenario files shipped with the library.

use crate::config::ScenarioConfig;
use crate::error::Result;

/// `(name, JSON)` pairs; the first six are the headline demos.
pub const BUNDLED: &[(&str, &str)] = &[
    ("sphere-hopf", include_str!("../scenarios/sphere-hopf.json")),
    ("torus-flat", include_str!("../scenarios/torus-flat.json")),
    (
        "bumpy-sphere",
        include_str!("../scenarios/bumpy-sphere.json"),
    ),
    (
        "sphere-linefield",
        include_str!("../scenarios/sphere-linefield.json"),
    ),
    (
        "whitney-pair",
        include_str!("../scenarios/whitney-pair.json"),
    ),
    (
        "tetra-obstruction",
        include_str!("../scenarios/tetra-obstruction.json"),
    ),
    (
        "sphere-rotation-linefield",
        include_str!("../scenarios/sphere-rotation-linefield.json"),
    ),
    (
        "sphere-dipole",
        include_str!("../scenarios/sphere-dipole.json"),
    ),
    (
        "whitney-coincident",
        include_str!("../scenarios/whitney-coincident.json"),
    ),
    (
        "whitney-single",
        include_str!("../scenarios/whitney-single.json"),
    ),
    (
        "torus-saddles",
        include_str!("../scenarios/torus-saddles.json"),
    ),
    (
        "torus-linefield",
        include_str!("../scenarios/torus-linefield.json"),
    ),
    (
        "sphere-deformation",
        include_str!("../scenarios/sphere-deformation.json"),
    ),
    (
        "sphere-structure",
        include_str!("../scenarios/sphere-structure.json"),
    ),
    (
        "rp2-obstruction",
        include_str!("../scenarios/rp2-obstruction.json"),
    ),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Option<Result<ScenarioConfig>> {
    source(name).map(ScenarioConfig::parse)
}
