//! Functional model of the parallel decoder datapath: dual-bank message
//! memory, read schedule, lane alignment, write-back forwarding, and the
//! cycle counts that feed the throughput estimates.

pub mod layout;
pub mod schedule;
pub mod shift;
pub mod sim;
pub mod throughput;

pub use layout::{build_layout, Bank, MemoryLayout, Slot};
pub use schedule::{build_schedule, cycles_per_iteration, AddressSchedule, RomEntry};
pub use shift::{fold, shift_left, shift_right, write_back_halves, ShiftRightOut, WriteBackInputs};
pub use sim::{
    simulate_decode, simulate_iteration, simulate_iteration_observed, IterationStats,
    PipelineConfig,
};
pub use throughput::{memory_bits, throughput, Throughput, ThroughputModel};
