pub mod channel;
pub mod interop;
pub mod intraop;
pub mod harness;
