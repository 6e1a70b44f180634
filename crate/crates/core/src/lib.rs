pub mod analysis;
pub mod games;
pub mod grid;
pub mod numerics;
pub mod scene;
pub mod solver;
pub mod strategy;
