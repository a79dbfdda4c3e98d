//! Library side of the clonelab CLI: input resolution and the named
//! verifiers, shared by the binary and the acceptance suite.

pub mod io;
pub mod verify;
