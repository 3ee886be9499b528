pub mod circstats;
pub mod controlflow;
pub mod eventlog;
pub mod mixture;
pub mod search;
pub mod synth;
