pub mod analysis;
pub mod cli;
pub mod generate;
pub mod io;
pub mod net;
pub mod routed;
pub mod routing;
pub mod stream;
pub mod throughput;
pub mod timed;
