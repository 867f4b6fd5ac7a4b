pub mod bms;
pub mod dissect;
pub mod eval;
pub mod gen_stim;
pub mod predict;
pub mod relate;
pub mod report;
pub mod train;
