pub mod bench;
pub mod check;
pub mod separate;
pub mod synth;
