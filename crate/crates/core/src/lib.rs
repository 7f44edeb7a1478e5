pub mod numerics;
pub mod embedding;
pub mod metaconcept;
pub mod model;
pub mod program;
pub mod world;
pub mod train;
