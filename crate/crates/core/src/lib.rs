pub mod geom;
pub mod nav;
pub mod robot;
pub mod world;
pub mod sim;
pub mod intervention;
pub mod learn;
pub mod context;
pub mod registry;
pub mod pipeline;
pub mod bench;
