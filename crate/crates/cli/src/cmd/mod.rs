pub mod bench;
pub mod eval;
pub mod fuse;
pub mod render;
pub mod synth;
pub mod targets;
