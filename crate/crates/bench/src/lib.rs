//! Shared inputs for the benchmarks.

use traitgeo::conditioning::condition_c0;
use traitgeo::directions::{normalize_rows, random_direction_set};
use traitgeo::steersim::make_world;
use traitgeo::{ConditionedSet, DirectionSet, SyntheticWorld, WorldConfig};

/// Five unit directions in a model-sized hidden space.
pub fn ocean_set(dim: usize) -> DirectionSet {
    random_direction_set(5, dim, 42).expect("valid shape")
}

/// Correlated five-trait world and its exact axes as C0 directions.
pub fn world_and_axes(dim: usize, layers: usize) -> (SyntheticWorld, ConditionedSet) {
    let world = make_world(WorldConfig::uniform(5, dim, layers, 0.4, 7)).expect("valid world");
    let axes = DirectionSet::new(
        traitgeo::OCEAN.iter().map(|s| s.to_string()).collect(),
        world.true_axes.clone(),
        serde_json::Value::Null,
    )
    .and_then(|s| normalize_rows(&s))
    .and_then(|s| condition_c0(&s))
    .expect("axes are full rank");
    (world, axes)
}
