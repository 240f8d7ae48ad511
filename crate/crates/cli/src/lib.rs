//! Library half of the command-line tool: the acceptance battery and the
//! report envelope / witness re-verification layer, shared by the binary and
//! the integration tests.

pub mod battery;
pub mod report;
